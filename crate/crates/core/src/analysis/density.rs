use serde::{Deserialize, Serialize};

use super::{pairwise_sum, ComparisonReport, Metric};
use crate::error::{Error, Result};
use crate::sim::Ensemble;
use crate::spectral::{DensityField, DiffusionKernel};
use crate::vec3::Vec3;

/// Smallest expected count for a bin to enter the χ² statistic on its own.
pub const MIN_EXPECTED: f64 = 10.0;

/// Regular box `[lo, hi)` split into `n[0] × n[1] × n[2]` bins, first axis
/// slowest. Mass outside the box is tracked as one extra cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binning {
    pub lo: Vec3,
    pub hi: Vec3,
    pub n: [usize; 3],
}

impl Binning {
    pub fn new(lo: Vec3, hi: Vec3, n: [usize; 3]) -> Result<Self> {
        let b = Self { lo, hi, n };
        b.validate()?;
        Ok(b)
    }

    /// Cube of half-width `half` about `center` with `n` bins per axis.
    pub fn cube(center: Vec3, half: f64, n: usize) -> Result<Self> {
        let h = Vec3::new(half, half, half);
        Self::new(center - h, center + h, [n; 3])
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.iter().any(|&k| k < 8) {
            return Err(Error::InvalidParameter("binning needs at least 8 bins per axis".into()));
        }
        let (lo, hi) = (self.lo.to_array(), self.hi.to_array());
        if (0..3).any(|k| !(lo[k].is_finite() && hi[k].is_finite() && hi[k] > lo[k])) {
            return Err(Error::InvalidParameter("binning box must have hi > lo on every axis".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn width(&self, axis: usize) -> f64 {
        (self.hi.component(axis) - self.lo.component(axis)) / self.n[axis] as f64
    }

    /// Flat index of the bin containing `x`, if inside the box.
    pub fn bin_of(&self, x: Vec3) -> Option<usize> {
        let mut idx = 0;
        for axis in 0..3 {
            let u = (x.component(axis) - self.lo.component(axis)) / self.width(axis);
            if !(u >= 0.0) || u >= self.n[axis] as f64 {
                return None;
            }
            idx = idx * self.n[axis] + (u as usize).min(self.n[axis] - 1);
        }
        Some(idx)
    }

    pub fn bounds(&self, idx: usize) -> (Vec3, Vec3) {
        let ks = [idx / (self.n[1] * self.n[2]), idx / self.n[2] % self.n[1], idx % self.n[2]];
        let lo: [f64; 3] = std::array::from_fn(|a| self.lo.component(a) + ks[a] as f64 * self.width(a));
        let hi: [f64; 3] = std::array::from_fn(|a| lo[a] + self.width(a));
        (Vec3::from(lo), Vec3::from(hi))
    }
}

/// Probability per bin; whatever is missing from one is outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedPrediction {
    pub binning: Binning,
    pub probs: Vec<f64>,
}

impl BinnedPrediction {
    pub fn from_box_mass<F: Fn(Vec3, Vec3) -> f64>(binning: Binning, mass: F) -> Self {
        let probs = (0..binning.len()).map(|i| {
            let (lo, hi) = binning.bounds(i);
            mass(lo, hi)
        });
        Self { binning, probs: probs.collect() }
    }

    pub fn from_kernel(binning: Binning, kernel: &DiffusionKernel) -> Self {
        Self::from_box_mass(binning, |lo, hi| kernel.box_mass(lo, hi))
    }

    /// All mass in the bin containing `x`.
    pub fn point_mass(binning: Binning, x: Vec3) -> Self {
        let mut probs = vec![0.0; binning.len()];
        if let Some(i) = binning.bin_of(x) {
            probs[i] = 1.0;
        }
        Self { binning, probs }
    }

    /// Each grid cell's mass goes to the bin holding the cell centre; exact
    /// when bin edges coincide with cell edges.
    pub fn from_field(binning: Binning, field: &DensityField) -> Self {
        let dv = field.grid.cell_volume();
        let mut probs = vec![0.0; binning.len()];
        for (i, v) in field.values.iter().enumerate() {
            if let Some(b) = binning.bin_of(field.grid.position(i)) {
                probs[b] += v * dv;
            }
        }
        Self { binning, probs }
    }

    /// Histogram fractions of the ensemble at sample time `t`.
    pub fn from_ensemble(binning: Binning, ens: &Ensemble, t: f64) -> Result<Self> {
        let (counts, _) = histogram(&binning, ens, t)?;
        let n = ens.n_traj as f64;
        Ok(Self { binning, probs: counts.iter().map(|&c| c as f64 / n).collect() })
    }

    pub fn outside(&self) -> f64 {
        1.0 - pairwise_sum(&self.probs)
    }
}

/// Bin counts and the number of trajectories outside the box.
fn histogram(binning: &Binning, ens: &Ensemble, t: f64) -> Result<(Vec<u64>, u64)> {
    let s = ens.sample_index(t)?;
    let mut counts = vec![0u64; binning.len()];
    let mut outside = 0;
    for st in ens.at(s) {
        match binning.bin_of(st.x) {
            Some(i) => counts[i] += 1,
            None => outside += 1,
        }
    }
    Ok((counts, outside))
}

/// `Σ |p_k - q_k|` over bins plus the outside cell.
pub fn histogram_l1(p: &BinnedPrediction, q: &BinnedPrediction) -> f64 {
    let d: Vec<f64> = p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).collect();
    pairwise_sum(&d) + (p.outside() - q.outside()).abs()
}

/// Noise floor of the L1 distance between a histogram of `n` trajectories
/// and its exact law, estimated from the two halves of the ensemble.
///
/// Each bin difference between independent halves has twice the standard
/// deviation of a full-ensemble bin error, so the half-vs-half distance is
/// divided by 2.
pub fn null_l1_floor(ens: &Ensemble, t: f64, binning: Binning) -> Result<f64> {
    let s = ens.sample_index(t)?;
    let half = ens.n_traj / 2;
    if half == 0 {
        return Err(Error::SparseHistogram("need at least two trajectories".into()));
    }
    let mut a = vec![0u64; binning.len() + 1];
    let mut b = vec![0u64; binning.len() + 1];
    for (k, st) in ens.at(s).enumerate().take(2 * half) {
        let slot = binning.bin_of(st.x).unwrap_or(binning.len());
        if k < half {
            a[slot] += 1;
        } else {
            b[slot] += 1;
        }
    }
    let d: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| (x as f64 - y as f64).abs() / half as f64).collect();
    Ok(pairwise_sum(&d) / 2.0)
}

/// L1 distance between the histogram at time `t` and `predicted`, plus a
/// Pearson χ² over bins with at least [`MIN_EXPECTED`] expected counts; the
/// rest, together with the outside cell, are pooled into one tail cell.
/// Degrees of freedom are the number of cells minus one.
pub fn density_l1_compare(
    experiment_id: &str,
    ens: &Ensemble,
    t: f64,
    predicted: &BinnedPrediction,
    threshold: f64,
) -> Result<ComparisonReport> {
    predicted.binning.validate()?;
    let (counts, outside) = histogram(&predicted.binning, ens, t)?;
    let n = ens.n_traj as f64;
    if n * predicted.probs.iter().sum::<f64>().max(predicted.outside()) < MIN_EXPECTED {
        return Err(Error::SparseHistogram(format!("only {n} trajectories")));
    }

    let mut chi2 = 0.0;
    let mut cells = 0usize;
    let (mut tail_obs, mut tail_exp) = (outside as f64, n * predicted.outside().max(0.0));
    let mut l1_terms = Vec::with_capacity(counts.len());
    for (c, p) in counts.iter().zip(&predicted.probs) {
        let (o, e) = (*c as f64, n * p);
        l1_terms.push((o / n - p).abs());
        if e >= MIN_EXPECTED {
            chi2 += (o - e).powi(2) / e;
            cells += 1;
        } else {
            tail_obs += o;
            tail_exp += e.max(0.0);
        }
    }
    if cells == 0 {
        return Err(Error::SparseHistogram(format!(
            "no bin reaches {MIN_EXPECTED} expected counts with n = {n}"
        )));
    }
    if tail_exp > 0.0 {
        chi2 += (tail_obs - tail_exp).powi(2) / tail_exp;
        cells += 1;
    } else if tail_obs > 0.0 {
        chi2 = f64::INFINITY;
    }
    let l1 = pairwise_sum(&l1_terms) + (outside as f64 / n - predicted.outside()).abs();
    let s = ens.sample_index(t)?;
    Ok(ComparisonReport::new(experiment_id, Metric::L1Density, l1, threshold)
        .with("t", ens.sample_times[s])
        .with("n_traj", ens.n_traj)
        .with("chi2", chi2)
        .with("dof", cells.saturating_sub(1))
        .with("outside_fraction", outside as f64 / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::profile::CoefficientProfile;
    use crate::sim::{simulate_ensemble, IntegratorScheme, SchemeKind};

    fn ensemble(b: f64, n: usize, seed: u64) -> Ensemble {
        let p = ModelParams::new(
            CoefficientProfile::Constant { a: 1.0, b },
            Vec3::ZERO,
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::ZERO,
        )
        .unwrap();
        let sp = IntegratorScheme::new(SchemeKind::SpeedProjected, 0.01);
        simulate_ensemble(&p, sp, n, &[0.0, 1.0], seed).unwrap()
    }

    #[test]
    fn binning_geometry() {
        let b = Binning::cube(Vec3::ZERO, 2.0, 8).unwrap();
        assert_eq!(b.bin_of(Vec3::new(-2.0, -2.0, -2.0)), Some(0));
        assert_eq!(b.bin_of(Vec3::new(2.0, 0.0, 0.0)), None);
        let i = b.bin_of(Vec3::new(0.1, -0.6, 1.9)).unwrap();
        let (lo, hi) = b.bounds(i);
        assert_eq!((lo, hi), (Vec3::new(0.0, -1.0, 1.5), Vec3::new(0.5, -0.5, 2.0)));
        assert!(Binning::cube(Vec3::ZERO, 1.0, 4).is_err());
    }

    #[test]
    fn histogram_against_itself() {
        let ens = ensemble(1.0, 2000, 5);
        let b = Binning::cube(Vec3::new(0.5, 0.0, 0.0), 1.5, 8).unwrap();
        let own = BinnedPrediction::from_ensemble(b, &ens, 1.0).unwrap();
        let r = density_l1_compare("self", &ens, 1.0, &own, 1e-12).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.passed());
        assert_eq!(r.metadata["chi2"], 0.0);
    }

    #[test]
    fn free_flight_lands_in_one_bin() {
        let ens = ensemble(0.0, 100, 5);
        let b = Binning::cube(Vec3::ZERO, 2.0, 8).unwrap();
        let target = Vec3::new(1.0 - (-1.0f64).exp(), 0.0, 0.0);
        let right = BinnedPrediction::point_mass(b, target);
        assert!(density_l1_compare("hit", &ens, 1.0, &right, 1e-12).unwrap().passed());
        let wrong = BinnedPrediction::point_mass(b, -target);
        let r = density_l1_compare("miss", &ens, 1.0, &wrong, 0.05).unwrap();
        assert_eq!(r.value, 2.0);
        assert!(!r.passed());
    }

    #[test]
    fn sparse_histograms_are_rejected() {
        let ens = ensemble(1.0, 5, 5);
        let b = Binning::cube(Vec3::ZERO, 3.0, 8).unwrap();
        let flat = BinnedPrediction::from_box_mass(b, |_, _| 1.0 / 512.0);
        assert!(matches!(density_l1_compare("s", &ens, 1.0, &flat, 1.0), Err(Error::SparseHistogram(_))));
    }

    #[test]
    fn null_floor_shrinks_with_n() {
        let b = Binning::cube(Vec3::new(0.5, 0.0, 0.0), 1.5, 8).unwrap();
        let small = null_l1_floor(&ensemble(1.0, 1000, 7), 1.0, b).unwrap();
        let large = null_l1_floor(&ensemble(1.0, 16000, 7), 1.0, b).unwrap();
        assert!(large < small / 2.0, "{small} {large}");
    }
}
