//! Volume fraction of the three TPMS families as the level-set threshold moves.

use pncl::data::{admissible_range, tpms_voxel, Network, TpmsKind};

fn main() -> anyhow::Result<()> {
    for network in [Network::Solid, Network::Sheet] {
        for kind in TpmsKind::ALL {
            let (lo, hi) = admissible_range(kind, network);
            let row: Vec<String> = (1..8)
                .map(|i| {
                    let c = lo + (hi - lo) * i as f64 / 8.0;
                    let vf = tpms_voxel(kind, network, 48, c).map(|v| v.volume_fraction()).unwrap_or(f64::NAN);
                    format!("{c:+.2}:{vf:.3}")
                })
                .collect();
            println!("{kind:?}/{network:?}  {}", row.join("  "));
        }
    }
    let g = tpms_voxel(TpmsKind::SchoenGyroid, Network::Solid, 64, 0.0)?;
    println!("gyroid solid at c = 0, 64³: {} of {} voxels", g.occupied(), 64 * 64 * 64);
    Ok(())
}
