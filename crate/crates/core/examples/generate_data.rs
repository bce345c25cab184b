//! Generates a few permeability groups, prints their statistics and round-trips
//! them through the binary dataset format.

use pncl::data::{default_schedule, generate_groups, read_dataset, write_dataset, DEFAULT_LENGTH_SCALE};

fn main() -> anyhow::Result<()> {
    let schedule = default_schedule();
    let picked = [schedule[0], schedule[4], schedule[9]];
    let data = generate_groups(&picked, 16, 32, DEFAULT_LENGTH_SCALE, 42)?;

    for g in &data.groups {
        let logs: Vec<f64> = g.samples.iter().flat_map(|s| s.k.values().iter().map(|k| k.ln())).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let sd = (logs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
        println!(
            "group {:>2} (mu {:+.1}, sigma {:.2}): {} samples, ln k mean {mean:+.3} sd {sd:.3}",
            g.group_id,
            g.mu,
            g.sigma,
            g.samples.len()
        );
    }

    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &data)?;
    let back = read_dataset(bytes.as_slice())?;
    assert_eq!(back, data);
    println!("round trip through {} bytes ok", bytes.len());
    Ok(())
}
