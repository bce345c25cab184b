use std::f64::consts::PI;

use crate::{Error, Result};

/// Triply periodic minimal surface families with trigonometric level sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TpmsKind {
    SchoenGyroid,
    SchwarzDiamond,
    FischerKochS,
}

impl TpmsKind {
    pub const ALL: [TpmsKind; 3] = [TpmsKind::SchoenGyroid, TpmsKind::SchwarzDiamond, TpmsKind::FischerKochS];
}

/// Solid networks keep `φ > c`; sheet networks keep `−c ≤ φ ≤ c`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Network {
    Solid,
    Sheet,
}

/// Level-set function `φ(x, y, z)` on the unit cell.
pub fn level_set(kind: TpmsKind, x: f64, y: f64, z: f64) -> f64 {
    let (x, y, z) = (2.0 * PI * x, 2.0 * PI * y, 2.0 * PI * z);
    match kind {
        TpmsKind::SchoenGyroid => x.sin() * y.cos() + y.sin() * z.cos() + z.sin() * x.cos(),
        TpmsKind::SchwarzDiamond => {
            x.sin() * y.sin() * z.sin()
                + x.sin() * y.cos() * z.cos()
                + x.cos() * y.sin() * z.cos()
                + x.cos() * y.cos() * z.sin()
        }
        TpmsKind::FischerKochS => {
            (2.0 * x).cos() * y.sin() * z.cos()
                + x.cos() * (2.0 * y).cos() * z.sin()
                + x.sin() * y.cos() * (2.0 * z).cos()
        }
    }
}

/// Default admissible `c` interval: solid networks accept any `c` strictly
/// inside the range of `φ`, sheet networks need `c > 0`.
pub fn admissible_range(kind: TpmsKind, network: Network) -> (f64, f64) {
    let bound = match kind {
        TpmsKind::SchoenGyroid => 1.5,
        TpmsKind::SchwarzDiamond => 1.42,
        TpmsKind::FischerKochS => 1.5,
    };
    match network {
        Network::Solid => (-bound, bound),
        Network::Sheet => (0.0, bound),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub occupancy: Vec<bool>,
    pub kind: TpmsKind,
    pub network: Network,
    pub c: f64,
}

impl VoxelGrid {
    pub fn occupied(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    /// Solid volume over cell volume.
    pub fn volume_fraction(&self) -> f64 {
        self.occupied() as f64 / self.occupancy.len() as f64
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.resolution + j) * self.resolution + i
    }
}

fn occupied(network: Network, phi: f64, c: f64) -> bool {
    match network {
        Network::Solid => phi > c,
        Network::Sheet => -c <= phi && phi <= c,
    }
}

pub fn tpms_voxel(kind: TpmsKind, network: Network, resolution: usize, c: f64) -> Result<VoxelGrid> {
    tpms_voxel_in_range(kind, network, resolution, c, admissible_range(kind, network))
}

/// Voxelizes one unit cell by evaluating `φ` at voxel centers.
pub fn tpms_voxel_in_range(
    kind: TpmsKind,
    network: Network,
    resolution: usize,
    c: f64,
    range: (f64, f64),
) -> Result<VoxelGrid> {
    if resolution < 8 {
        return Err(Error::InvalidArgument(format!("resolution must be at least 8, got {resolution}")));
    }
    if !(c > range.0 && c < range.1) {
        return Err(Error::InvalidArgument(format!(
            "c = {c} outside admissible range ({}, {}) for {kind:?}/{network:?}",
            range.0, range.1
        )));
    }
    let r = resolution;
    let h = 1.0 / r as f64;
    let mut occupancy = Vec::with_capacity(r * r * r);
    for k in 0..r {
        let z = (k as f64 + 0.5) * h;
        for j in 0..r {
            let y = (j as f64 + 0.5) * h;
            for i in 0..r {
                let x = (i as f64 + 0.5) * h;
                occupancy.push(occupied(network, level_set(kind, x, y, z), c));
            }
        }
    }
    let grid = VoxelGrid { resolution, occupancy, kind, network, c };
    match grid.occupied() {
        0 => Err(Error::InadmissibleThreshold { c, what: "empty" }),
        n if n == grid.occupancy.len() => Err(Error::InadmissibleThreshold { c, what: "full" }),
        _ => Ok(grid),
    }
}
