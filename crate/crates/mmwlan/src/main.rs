use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mmwlan::sweep::{run_all, run_points, sweep_points, Point};
use mmwlan::{build_db, dbfile, report, Error, RunConfig};

#[derive(Parser)]
#[command(name = "mmwlan", version, about = "Coordinated 60 GHz WLAN simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the fingerprint databases and write them as a flat file.
    BuildDb(Common),
    /// Run every configured protocol and seed at `environment.num_aps`.
    Run(Common),
    /// Run protocols x AP counts x seeds.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the configured seed list with this one seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a frame trace per run.
    #[arg(long)]
    trace: bool,
}

impl Common {
    fn resolve(&self) -> Result<(RunConfig, PathBuf), Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.run.seeds = vec![s];
        }
        if let Some(o) = &self.out {
            cfg.run.out_dir = o.display().to_string();
        }
        cfg.run.trace |= self.trace;
        let out = PathBuf::from(&cfg.run.out_dir);
        fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let echo = out.join("config.toml");
        fs::write(&echo, cfg.to_toml()).map_err(|e| Error::io(&echo, e))?;
        Ok((cfg, out))
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::BuildDb(c) => {
            let (cfg, out) = c.resolve()?;
            let seed = cfg.run.seeds[0];
            let (db, summary) = build_db(&cfg, seed)?;
            let path = out.join("fingerprints.db");
            dbfile::write(&path, &db)?;
            println!("wrote {} ({} LPs x {} APs, seed {seed})", path.display(), db.num_lps(), db.num_aps());
            println!("ap,covered_lps,groups,exemplars");
            for s in summary {
                println!("{},{},{},{}", s.ap, s.covered_lps, s.groups, s.exemplars);
            }
            Ok(true)
        }
        Cmd::Run(c) => {
            let (cfg, out) = c.resolve()?;
            let points = run_points(&cfg);
            execute(&cfg, &out, &points)
        }
        Cmd::Sweep(c) => {
            let (cfg, out) = c.resolve()?;
            let points = sweep_points(&cfg);
            execute(&cfg, &out, &points)
        }
    }
}

fn execute(cfg: &RunConfig, out: &Path, points: &[Point]) -> anyhow::Result<bool> {
    let started = Instant::now();
    let results = run_all(cfg, points, cfg.run.trace);
    let elapsed = started.elapsed();
    if cfg.run.trace {
        let dir = out.join("traces");
        fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
        for r in &results {
            let p = r.point;
            let path = dir.join(format!("{}_{}ap_seed{}.csv", p.protocol, p.num_aps, p.seed));
            let f = fs::File::create(&path).with_context(|| path.display().to_string())?;
            report::write_trace(std::io::BufWriter::new(f), &r.trace)?;
        }
    }
    let rows: Vec<_> = results.into_iter().map(|r| r.row).collect();
    let path = out.join("results.csv");
    let f = fs::File::create(&path).with_context(|| path.display().to_string())?;
    report::write_csv(f, &rows)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    eprintln!(
        "{} rows ({failed} failed) in {:.1} s wall clock -> {}",
        rows.len(),
        elapsed.as_secs_f64(),
        path.display()
    );
    Ok(failed == 0)
}
