use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pairwise_sum_by;
use crate::error::Result;
use crate::sim::Ensemble;
use crate::vec3::Vec3;

/// Sample mean of `e^{i(λ, x_k(t))}` over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCF {
    pub lambda: Vec3,
    pub t: f64,
    pub estimate: Complex64,
    /// Jackknife standard error of the complex mean.
    pub std_error: f64,
    pub n: usize,
}

/// For a sample mean the leave-one-out jackknife variance
/// `(n-1)/n Σ |θ_(i) - θ̄|²` reduces to `Σ |z_i - z̄|² / (n (n-1))`, which
/// is what is computed here.
pub fn empirical_char_fn(ens: &Ensemble, lambda: Vec3, t: f64) -> Result<EmpiricalCF> {
    let sample = ens.sample_index(t)?;
    let n = ens.n_traj;
    let phase = |k: usize| lambda.dot(&ens.state(k, sample).x);
    let re = pairwise_sum_by(n, &|k| phase(k).cos()) / n as f64;
    let im = pairwise_sum_by(n, &|k| phase(k).sin()) / n as f64;
    let estimate = Complex64::new(re, im);
    let std_error = if n > 1 {
        let ss = pairwise_sum_by(n, &|k| (Complex64::from_polar(1.0, phase(k)) - estimate).norm_sqr());
        (ss / (n as f64 * (n - 1) as f64)).sqrt()
    } else {
        0.0
    };
    Ok(EmpiricalCF { lambda, t: ens.sample_times[sample], estimate, std_error, n })
}
