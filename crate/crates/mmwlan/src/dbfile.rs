//! Text file for the fingerprint databases.
//!
//! ```text
//! mmwlan-fingerprints 1
//! lps <L> aps <N>
//! sectors <D_1> ... <D_N>
//! [psi]
//! <L rows of N values, dBm, 6 decimals>
//! [phi]
//! <L rows of N sector IDs, -1 where null>
//! [p_off]
//! <L rows of N values, dBm, 6 decimals, `null` where phi is -1>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use mmwlan_core::learning::{BestSector, FingerprintDatabases};

use crate::error::{Error, Result};

const MAGIC: &str = "mmwlan-fingerprints 1";
pub const NULL_SECTOR: i32 = -1;
pub const NULL_POWER: &str = "null";

pub fn to_string(db: &FingerprintDatabases) -> String {
    let (l_count, n_count) = (db.num_lps(), db.num_aps());
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "lps {l_count} aps {n_count}");
    let sectors: Vec<String> = db.sectors_per_ap().iter().map(u16::to_string).collect();
    let _ = writeln!(s, "sectors {}", sectors.join(" "));
    let mut table = |name: &str, cell: &dyn Fn(usize, usize) -> String| {
        let _ = writeln!(s, "[{name}]");
        for l in 0..l_count {
            let row: Vec<String> = (0..n_count).map(|n| cell(l, n)).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    };
    table("psi", &|l, n| format!("{:.6}", db.psi(l, n)));
    table("phi", &|l, n| db.phi(l, n).map_or(NULL_SECTOR.to_string(), |p| p.to_string()));
    table("p_off", &|l, n| db.p_off_dbm(l, n).map_or(NULL_POWER.to_string(), |p| format!("{p:.6}")));
    s
}

/// Parses the file body; errors carry a 1-based line number.
pub fn parse(text: &str) -> std::result::Result<FingerprintDatabases, (usize, String)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| lines.next().ok_or((0, format!("file ends before {what}")));

    let (i, magic) = next("the header")?;
    if magic != MAGIC {
        return Err((i, format!("expected `{MAGIC}`")));
    }
    let (i, dims) = next("the dimensions")?;
    let d: Vec<&str> = dims.split_whitespace().collect();
    let (l_count, n_count) = match d.as_slice() {
        ["lps", l, "aps", n] => (num::<usize>(l, i)?, num::<usize>(n, i)?),
        _ => return Err((i, "expected `lps <L> aps <N>`".into())),
    };
    let (i, sec) = next("the sector counts")?;
    let sectors: Vec<u16> = match sec.strip_prefix("sectors") {
        Some(rest) => rest.split_whitespace().map(|v| num(v, i)).collect::<std::result::Result<_, _>>()?,
        None => return Err((i, "expected `sectors <D_1> ... <D_N>`".into())),
    };
    if sectors.len() != n_count {
        return Err((i, format!("{} sector counts for {n_count} APs", sectors.len())));
    }

    let mut table = |name: &str| -> std::result::Result<Vec<(usize, Vec<String>)>, (usize, String)> {
        let (i, h) = next(name)?;
        if h != format!("[{name}]") {
            return Err((i, format!("expected `[{name}]`")));
        }
        (0..l_count)
            .map(|_| {
                let (i, row) = next(name)?;
                let cells: Vec<String> = row.split_whitespace().map(str::to_string).collect();
                if cells.len() != n_count {
                    return Err((i, format!("{} values in a row of {n_count}", cells.len())));
                }
                Ok((i, cells))
            })
            .collect()
    };
    let psi_rows = table("psi")?;
    let phi_rows = table("phi")?;
    let poff_rows = table("p_off")?;

    let mut psi = Vec::with_capacity(l_count * n_count);
    for (i, row) in &psi_rows {
        for c in row {
            psi.push(num::<f64>(c, *i)?);
        }
    }
    let mut best = Vec::with_capacity(l_count * n_count);
    for ((i, phi), (j, poff)) in phi_rows.iter().zip(&poff_rows) {
        for (f, p) in phi.iter().zip(poff) {
            let sector: i32 = num(f, *i)?;
            best.push(match (sector, p.as_str()) {
                (NULL_SECTOR, NULL_POWER) => None,
                (NULL_SECTOR, _) => return Err((*j, "p_off must be null where phi is -1".into())),
                (_, NULL_POWER) => return Err((*j, "p_off is null where phi names a sector".into())),
                (s, p) => {
                    let sector_id = u16::try_from(s).map_err(|_| (*i, format!("bad sector ID {s}")))?;
                    Some(BestSector { sector_id, power_dbm: num(p, *j)? })
                }
            });
        }
    }
    FingerprintDatabases::from_parts(l_count, sectors, psi, best).map_err(|e| (0, e.to_string()))
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> std::result::Result<T, (usize, String)> {
    s.parse().map_err(|_| (line, format!("cannot read `{s}`")))
}

pub fn write(path: &Path, db: &FingerprintDatabases) -> Result<()> {
    std::fs::write(path, to_string(db)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<FingerprintDatabases> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text).map_err(|(line, message)| Error::DbFormat { path: path.display().to_string(), line, message })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FingerprintDatabases {
        let cell = |s, p| Some(BestSector { sector_id: s, power_dbm: p });
        FingerprintDatabases::from_parts(
            2,
            vec![4, 2],
            vec![-40.25, -61.0, -39.5, -70.125],
            vec![cell(3, -48.5), None, cell(1, -52.75), cell(2, -66.0)],
        )
        .unwrap()
    }

    #[test]
    fn layout_matches_documentation() {
        let text = to_string(&sample());
        let want = "mmwlan-fingerprints 1\nlps 2 aps 2\nsectors 4 2\n[psi]\n-40.250000 -61.000000\n\
                    -39.500000 -70.125000\n[phi]\n3 -1\n1 2\n[p_off]\n-48.500000 null\n-52.750000 -66.000000\n";
        assert_eq!(text, want);
    }

    #[test]
    fn exact_values_round_trip() {
        let db = sample();
        assert_eq!(parse(&to_string(&db)).unwrap(), db);
    }

    #[test]
    fn mismatched_null_rejected() {
        let bad = to_string(&sample()).replace("-48.500000 null", "null null");
        let (line, msg) = parse(&bad).unwrap_err();
        assert_eq!(line, 11);
        assert!(msg.contains("null"));
    }

    #[test]
    fn short_row_names_line() {
        let bad = to_string(&sample()).replace("-39.500000 -70.125000", "-39.5");
        assert_eq!(parse(&bad).unwrap_err().0, 6);
    }
}
