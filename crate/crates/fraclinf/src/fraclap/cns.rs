//! Normalization constant of the fractional Laplacian,
//! c_{n,s} = s 4^s Gamma(n/2 + s) / (pi^{n/2} Gamma(1 - s)),
//! the choice that gives the operator the Fourier symbol |xi|^{2s}.

use std::f64::consts::PI;

/// Panics outside dim in {1, 2} or s outside (0, 1): those are validated at
/// config level, so a violation here is a programming error.
pub fn normalization_constant(dim: usize, s: f64) -> f64 {
    assert!(dim == 1 || dim == 2, "dim must be 1 or 2, got {dim}");
    assert!(s > 0.0 && s < 1.0, "s must lie in (0, 1), got {s}");
    let n = dim as f64;
    use statrs::function::gamma::gamma;
    s * 4f64.powf(s) * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(1.0 - s))
}
