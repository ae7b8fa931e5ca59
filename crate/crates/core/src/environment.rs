//! Physical scenario: room, AP poses, learning points, UE placements and the
//! sectored antenna layout.

use alloc::format;
use alloc::vec::Vec;
use core::ops::{Add, Sub};

use crate::error::{Error, Result};
use crate::math;

/// Default height of UEs and learning points above the floor.
pub const DEFAULT_TERMINAL_HEIGHT_M: f64 = 1.0;

/// Elevation tilts below the horizon used by the three-row sector layout.
pub const SECTOR_TILTS_DEG: [f64; 3] = [20.0, 45.0, 70.0];

/// Tilt used when the layout has a single elevation row.
pub const SINGLE_ROW_TILT_DEG: f64 = 45.0;

const COINCIDENT_EPS_M: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn distance(self, other: Point3) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > COINCIDENT_EPS_M).then(|| self.scale(1.0 / n))
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Axis-aligned room spanning `[0, width] x [0, depth] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Room {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

impl Default for Room {
    /// 12 m x 6 m floor (72 m^2) with a 3 m ceiling.
    fn default() -> Self {
        Self { width: 12.0, depth: 6.0, height: 3.0 }
    }
}

impl Room {
    pub fn contains(&self, p: Point3) -> bool {
        p.is_finite()
            && (0.0..=self.width).contains(&p.x)
            && (0.0..=self.depth).contains(&p.y)
            && (0.0..=self.height).contains(&p.z)
    }

    pub fn contains_strictly(&self, p: Point3) -> bool {
        p.x > 0.0 && p.x < self.width && p.y > 0.0 && p.y < self.depth && p.z > 0.0 && p.z < self.height
    }

    fn check_floor_area(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0) || !self.width.is_finite() || !self.depth.is_finite() {
            return Err(Error::Config(format!(
                "room floor must have positive area, got {} x {}",
                self.width, self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApNode {
    pub id: usize,
    pub position: Point3,
    /// Unit boresight per sector; sector IDs are `1..=boresights.len()`.
    pub boresights: Vec<Point3>,
    pub tx_power_mmw_dbm: f64,
    pub tx_power_wifi_dbm: f64,
}

impl ApNode {
    pub fn new(id: usize, position: Point3, boresights: Vec<Point3>, tx_power_mmw_dbm: f64, tx_power_wifi_dbm: f64) -> Result<Self> {
        if boresights.is_empty() {
            return Err(Error::Config(format!("AP {id} needs at least one sector")));
        }
        if let Some(bad) = boresights.iter().find(|b| math::abs(b.norm() - 1.0) > 1e-9) {
            return Err(Error::Config(format!("AP {id} boresight {bad:?} is not unit length")));
        }
        Ok(Self { id, position, boresights, tx_power_mmw_dbm, tx_power_wifi_dbm })
    }

    pub fn num_sectors(&self) -> usize {
        self.boresights.len()
    }

    /// Iterator over valid sector IDs.
    pub fn sector_ids(&self) -> impl Iterator<Item = u16> {
        1..=self.boresights.len() as u16
    }

    pub fn boresight(&self, sector_id: u16) -> Result<Point3> {
        let idx = usize::from(sector_id);
        if idx == 0 || idx > self.boresights.len() {
            return Err(Error::Config(format!(
                "sector {sector_id} outside 1..={} for AP {}",
                self.boresights.len(),
                self.id
            )));
        }
        Ok(self.boresights[idx - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub room: Room,
    pub aps: Vec<ApNode>,
    pub learning_points: Vec<Point3>,
    pub ues: Vec<Point3>,
}

impl Environment {
    pub fn new(room: Room, aps: Vec<ApNode>, learning_points: Vec<Point3>, ues: Vec<Point3>) -> Result<Self> {
        if aps.is_empty() {
            return Err(Error::Config("at least one AP is required".into()));
        }
        if learning_points.is_empty() {
            return Err(Error::Config("at least one learning point is required".into()));
        }
        for (i, ap) in aps.iter().enumerate() {
            if ap.id != i {
                return Err(Error::Config(format!("AP ids must be 0..N in order, found {} at {i}", ap.id)));
            }
            if !room.contains(ap.position) {
                return Err(Error::Config(format!("AP {i} at {:?} lies outside the room", ap.position)));
            }
        }
        if let Some(p) = learning_points.iter().chain(ues.iter()).find(|p| !room.contains(**p)) {
            return Err(Error::Config(format!("position {p:?} lies outside the room")));
        }
        Ok(Self { room, aps, learning_points, ues })
    }

    pub fn num_aps(&self) -> usize {
        self.aps.len()
    }
}

/// Near-square, cell-centered grid of `count` points at height `z`, row-major.
///
/// `n_x = round(sqrt(count * width / depth))`, `n_y = ceil(count / n_x)`;
/// rows run along `x` and are stacked along `y`; the last row is truncated.
pub fn generate_lp_grid(room: &Room, count: usize, z: f64) -> Result<Vec<Point3>> {
    room.check_floor_area()?;
    if count == 0 {
        return Err(Error::Config("learning-point count must be at least 1".into()));
    }
    let aspect = room.width / room.depth;
    let nx = (math::round(math::sqrt(count as f64 * aspect)) as usize).clamp(1, count);
    let ny = count.div_ceil(nx);
    let (dx, dy) = (room.width / nx as f64, room.depth / ny as f64);
    let points = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .take(count)
        .map(|(i, j)| Point3::new((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy, z))
        .collect();
    Ok(points)
}

/// Angle in `[0, pi]` between a sector's boresight and the AP-to-target ray.
pub fn angle_offset(ap: &ApNode, sector_id: u16, target: Point3) -> Result<f64> {
    let boresight = ap.boresight(sector_id)?;
    let dir = (target - ap.position).normalized().ok_or_else(|| {
        Error::Geometry(format!("target {target:?} coincides with AP {} position", ap.id))
    })?;
    Ok(math::acos(boresight.dot(dir).clamp(-1.0, 1.0)))
}

/// Boresight for azimuth `az` and tilt `tilt` below the horizon (radians).
fn boresight(az: f64, tilt: f64) -> Point3 {
    let c = math::cos(tilt);
    Point3::new(c * math::cos(az), c * math::sin(az), -math::sin(tilt))
}

/// Shape of a sector layout: azimuth steps by elevation rows.
pub fn sector_grid(num_sectors: usize) -> Result<(usize, usize)> {
    match num_sectors {
        0 => Err(Error::Config("sector count must be at least 1".into())),
        1 => Ok((1, 1)),
        n if n % 3 == 0 && n / 3 >= 3 => Ok((n / 3, 3)),
        n => Ok((n, 1)),
    }
}

/// Ceiling-mounted sector boresights, azimuth-major.
///
/// One sector points straight down. Counts divisible by three with at least
/// three azimuth steps use three rows at 20, 45 and 70 degrees below the
/// horizon; every other count uses one row at 45 degrees. Sector
/// `1 + az * rows + row` has azimuth `az * 360 / n_az`.
pub fn default_sector_layout(num_sectors: usize) -> Result<Vec<Point3>> {
    let (n_az, n_el) = sector_grid(num_sectors)?;
    if num_sectors == 1 {
        return Ok(alloc::vec![Point3::new(0.0, 0.0, -1.0)]);
    }
    let tilts: &[f64] = if n_el == 3 { &SECTOR_TILTS_DEG } else { core::slice::from_ref(&SINGLE_ROW_TILT_DEG) };
    let mut out = Vec::with_capacity(num_sectors);
    for a in 0..n_az {
        let az = 2.0 * core::f64::consts::PI * a as f64 / n_az as f64;
        for tilt in tilts {
            out.push(boresight(az, tilt.to_radians()));
        }
    }
    Ok(out)
}

/// Ceiling grid of AP positions maximizing the minimum pairwise distance.
///
/// Every grid shape `n_x x ceil(count / n_x)` is tried; cells are centered and
/// filled row-major. Ties keep the shape with the smaller `n_x`.
pub fn auto_ap_positions(room: &Room, count: usize) -> Result<Vec<Point3>> {
    room.check_floor_area()?;
    if count == 0 {
        return Err(Error::Config("AP count must be at least 1".into()));
    }
    let layout = |nx: usize| -> Vec<Point3> {
        let ny = count.div_ceil(nx);
        let (dx, dy) = (room.width / nx as f64, room.depth / ny as f64);
        (0..ny)
            .flat_map(|j| (0..nx).map(move |i| (i, j)))
            .take(count)
            .map(|(i, j)| Point3::new((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy, room.height))
            .collect()
    };
    let min_spacing = |pts: &[Point3]| -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.min(a.distance(*b));
            }
        }
        best
    };
    let mut best: Option<(f64, Vec<Point3>)> = None;
    for nx in 1..=count {
        let pts = layout(nx);
        let spacing = min_spacing(&pts);
        if best.as_ref().is_none_or(|(s, _)| spacing > *s + 1e-12) {
            best = Some((spacing, pts));
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or_default())
}
