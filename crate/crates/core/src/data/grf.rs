use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlannerScalar;

use super::grid::GridField;
use crate::rng::rng_from;
use crate::{Error, Result};

/// Zero-mean, unit-variance stationary Gaussian field with squared-exponential
/// covariance `exp(−r² / 2ℓ²)`, sampled on an `nx × ny` unit-square grid.
///
/// Synthesis runs on a periodic grid twice the domain size in each direction
/// (so the wrap-around does not correlate opposite edges), with one complex
/// normal coefficient per Fourier mode scaled by the square root of the
/// normalized spectral density. The discrete spectrum is normalized to sum to
/// one, which makes the marginal variance exactly one.
pub fn sample_grf(nx: usize, ny: usize, length_scale: f64, seed: u64) -> Result<GridField> {
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidArgument(format!("grid must be at least 3x3, got {nx}x{ny}")));
    }
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(Error::InvalidArgument(format!("length_scale must be positive, got {length_scale}")));
    }
    let (px, py) = (2 * (nx - 1), 2 * (ny - 1));
    let (lx, ly) = (2.0, 2.0);

    let freq = |k: usize, n: usize| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let mut density = vec![0.0; px * py];
    for ky in 0..py {
        let wy = 2.0 * PI * freq(ky, py) / ly;
        for kx in 0..px {
            let wx = 2.0 * PI * freq(kx, px) / lx;
            density[ky * px + kx] = (-0.5 * length_scale * length_scale * (wx * wx + wy * wy)).exp();
        }
    }
    let total: f64 = density.iter().sum();

    let mut rng = rng_from(seed);
    let mut spec: Vec<Complex64> = density
        .iter()
        .map(|&s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * (s / total).sqrt()
        })
        .collect();

    let mut planner = FftPlannerScalar::<f64>::new();
    let row_fft = planner.plan_fft_inverse(px);
    for row in spec.chunks_mut(px) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_inverse(py);
    let mut col = vec![Complex64::new(0.0, 0.0); py];
    // Only the first nx columns are needed in the output.
    for kx in 0..nx {
        for ky in 0..py {
            col[ky] = spec[ky * px + kx];
        }
        col_fft.process(&mut col);
        for ky in 0..py {
            spec[ky * px + kx] = col[ky];
        }
    }

    let mut values = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            values.push(spec[j * px + i].re);
        }
    }
    GridField::new(nx, ny, values)
}

/// Pointwise `k = exp(μ + σ·g)`.
pub fn make_permeability(g: &GridField, mu: f64, sigma: f64) -> Result<GridField> {
    g.map(|v| (mu + sigma * v).exp())
}
