//! Reference solver: a manufactured convergence study and one GRF sample.

use std::f64::consts::PI;

use pncl::data::{default_schedule, generate_sample, GridField};
use pncl::oracle::{solve_darcy, DEFAULT_TOLERANCE};
use pncl::physics::relative_errors;

fn main() -> anyhow::Result<()> {
    let mut last = None;
    for n in [17, 33, 65, 129] {
        let k = GridField::constant(n, n, 1.0)?;
        let q = GridField::from_fn(n, n, |x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin())?;
        let exact = GridField::from_fn(n, n, |x, y| (PI * x).sin() * (PI * y).sin())?;
        let (t, report) = solve_darcy(&k, &q, DEFAULT_TOLERANCE)?;
        let (l2, _) = relative_errors(&t, &exact)?;
        let ratio = last.map(|p: f64| format!("  ratio {:.2}", p / l2)).unwrap_or_default();
        println!("n = {n:>3}: rel_L2 {l2:.3e} in {} CG iterations{ratio}", report.iterations);
        last = Some(l2);
    }

    let sample = generate_sample(default_schedule()[5], 0, 64, 0.1, 3)?;
    let q = GridField::constant(64, 64, 1.0)?;
    let (t, report) = solve_darcy(&sample.k, &q, DEFAULT_TOLERANCE)?;
    let peak = t.values().iter().cloned().fold(f64::MIN, f64::max);
    println!(
        "GRF sample: max T {peak:.4}, {} iterations, residual {:.1e}",
        report.iterations, report.final_residual_norm
    );
    Ok(())
}
