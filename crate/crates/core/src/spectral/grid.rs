//! Cubic grid for density reconstruction and the Fourier pair used on it.
//!
//! Cells of width `dx = x_extent / n` tile `[-L/2, L/2)³`; values are
//! sampled at cell centres and stored with the first axis slowest. Grid
//! index `k` carries the signed wavenumber `λ = 2π k'/L`, `k' ∈ [-n/2, n/2)`,
//! so `lambda_max = π n / L`.
//!
//! The transform follows the characteristic-function sign:
//! `ρ̂(λ) = Σ ρ(x) e^{i(λ,x)} dx³`, inverted with `e^{-i(λ,x)}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::mode::{ModeBasis, ModeSolver};
use super::kernels::averaged_rhs_coefficient;
use super::RegimeParams;
use crate::analysis::pairwise_sum;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::vec3::Vec3;

/// Largest spectral energy fraction tolerated beyond `0.8 lambda_max`.
pub const ALIAS_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGrid {
    pub n_per_axis: usize,
    pub lambda_max: f64,
    pub x_extent: f64,
}

impl SpectralGrid {
    pub fn new(n_per_axis: usize, x_extent: f64) -> Result<Self> {
        let g = Self { n_per_axis, lambda_max: PI * n_per_axis as f64 / x_extent, x_extent };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_per_axis;
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("n_per_axis = {n} is not a power of two >= 2")));
        }
        if !(self.x_extent.is_finite() && self.x_extent > 0.0) {
            return Err(Error::InvalidParameter("x_extent must be > 0".into()));
        }
        let closure = PI * n as f64;
        if !((self.lambda_max * self.x_extent - closure).abs() <= 1e-12 * closure) {
            return Err(Error::InvalidParameter(format!(
                "lambda_max * x_extent must equal pi * n_per_axis ({closure})"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_per_axis.pow(3)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.x_extent / self.n_per_axis as f64
    }

    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    /// Cell-centre coordinate of index `j` along any axis.
    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.x_extent + (j as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_per_axis + j) * self.n_per_axis + k
    }

    pub fn position(&self, idx: usize) -> Vec3 {
        let n = self.n_per_axis;
        Vec3::new(self.coord(idx / (n * n)), self.coord(idx / n % n), self.coord(idx % n))
    }

    /// Signed integer wavenumber of FFT index `k`.
    #[inline]
    pub fn signed_wavenumber(&self, k: usize) -> i64 {
        let n = self.n_per_axis as i64;
        let k = k as i64;
        if k < n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Wavevector of flat spectral index `idx`.
    pub fn wavevector(&self, idx: usize) -> Vec3 {
        let n = self.n_per_axis;
        let s = 2.0 * PI / self.x_extent;
        let w = |k| s * self.signed_wavenumber(k) as f64;
        Vec3::new(w(idx / (n * n)), w(idx / n % n), w(idx % n))
    }

    /// Samples `f` at every cell centre.
    pub fn sample<F: Fn(Vec3) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        (0..self.len()).into_par_iter().map(|i| f(self.position(i))).collect()
    }

    /// Isotropic Gaussian of standard deviation `sigma` about `center`,
    /// normalized so the discrete mass is exactly one.
    pub fn gaussian(&self, center: Vec3, sigma: f64) -> Result<DensityField> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter("gaussian sigma must be > 0".into()));
        }
        let mut values = self.sample(|x| (-(x - center).norm_sq() / (2.0 * sigma * sigma)).exp());
        let mass = pairwise_sum(&values) * self.cell_volume();
        values.iter_mut().for_each(|v| *v /= mass);
        Ok(DensityField::new(*self, 0.0, values))
    }
}

/// Real density sampled on a [`SpectralGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: SpectralGrid,
    pub t: f64,
    pub values: Vec<f64>,
    /// Largest discarded imaginary part relative to the peak value.
    pub imag_residue: f64,
    /// Integral of the negative part (kept in `values`, only reported here).
    pub negative_mass: f64,
}

impl DensityField {
    pub fn new(grid: SpectralGrid, t: f64, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field size does not match grid");
        let negative_mass = values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * grid.cell_volume();
        Self { grid, t, values, imag_residue: 0.0, negative_mass }
    }

    pub fn mass(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> Vec3 {
        let dv = self.grid.cell_volume();
        let m: Vec<Vec3> = (0..self.values.len()).map(|i| self.grid.position(i) * (self.values[i] * dv)).collect();
        let comp = |c: fn(&Vec3) -> f64| pairwise_sum(&m.iter().map(c).collect::<Vec<_>>());
        Vec3::new(comp(|v| v.x1), comp(|v| v.x2), comp(|v| v.x3)) / self.mass()
    }

    /// Covariance matrix of position (row-major 3×3).
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mu = self.mean().to_array();
        let dv = self.grid.cell_volume();
        let mass = self.mass();
        let mut c = [[0.0; 3]; 3];
        for (r, row) in c.iter_mut().enumerate() {
            for (s, cell) in row.iter_mut().enumerate() {
                let terms: Vec<f64> = (0..self.values.len())
                    .map(|i| {
                        let x = self.grid.position(i).to_array();
                        (x[r] - mu[r]) * (x[s] - mu[s]) * self.values[i] * dv
                    })
                    .collect();
                *cell = pairwise_sum(&terms) / mass;
            }
        }
        c
    }
}

struct Fft3 {
    n: usize,
    plan: std::sync::Arc<dyn Fft<f64>>,
}

impl Fft3 {
    /// `sign = +1` uses `e^{+i}` kernels, `-1` uses `e^{-i}`; unnormalized.
    fn new(n: usize, sign: i32) -> Self {
        let mut planner = FftPlanner::new();
        let plan = if sign > 0 { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
        Self { n, plan }
    }

    fn run(&self, data: &mut [Complex64]) {
        let n = self.n;
        // Last axis is contiguous.
        data.par_chunks_mut(n).for_each(|line| self.plan.process(line));
        // Middle axis: strided within each first-axis slab.
        data.par_chunks_mut(n * n).for_each(|slab| {
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for k in 0..n {
                for j in 0..n {
                    line[j] = slab[j * n + k];
                }
                self.plan.process(&mut line);
                for j in 0..n {
                    slab[j * n + k] = line[j];
                }
            }
        });
        // First axis.
        let cols: Vec<Vec<Complex64>> = (0..n * n)
            .into_par_iter()
            .map(|jk| {
                let mut line: Vec<Complex64> = (0..n).map(|i| data[i * n * n + jk]).collect();
                self.plan.process(&mut line);
                line
            })
            .collect();
        for (jk, line) in cols.into_iter().enumerate() {
            for (i, v) in line.into_iter().enumerate() {
                data[i * n * n + jk] = v;
            }
        }
    }
}

/// Spectrum of a real field (the constant per-mode phase of the cell-centre
/// offset is dropped; it cancels on inversion).
fn forward(grid: &SpectralGrid, values: &[f64]) -> Vec<Complex64> {
    let dv = grid.cell_volume();
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v * dv, 0.0)).collect();
    Fft3::new(grid.n_per_axis, 1).run(&mut data);
    data
}

/// Inverse of [`forward`]; returns real parts and the imaginary residue
/// relative to the peak.
fn inverse(grid: &SpectralGrid, mut spec: Vec<Complex64>) -> (Vec<f64>, f64) {
    Fft3::new(grid.n_per_axis, -1).run(&mut spec);
    let scale = 1.0 / (grid.len() as f64 * grid.cell_volume());
    let re: Vec<f64> = spec.iter().map(|c| c.re * scale).collect();
    let peak = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let im = spec.iter().fold(0.0f64, |m, c| m.max((c.im * scale).abs()));
    (re, if peak > 0.0 { im / peak } else { im })
}

fn alias_check(grid: &SpectralGrid, spec: &[Complex64]) -> Result<()> {
    let cut = (0.8 * grid.lambda_max).powi(2);
    let total: f64 = pairwise_sum(&spec.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>());
    let high: f64 = pairwise_sum(
        &spec
            .iter()
            .enumerate()
            .map(|(i, c)| if grid.wavevector(i).norm_sq() > cut { c.norm_sqr() } else { 0.0 })
            .collect::<Vec<_>>(),
    );
    let fraction = if total > 0.0 { high / total } else { 0.0 };
    if fraction > ALIAS_FRACTION {
        return Err(Error::GridTooCoarse { fraction });
    }
    Ok(())
}

fn check_initial(grid: &SpectralGrid, initial: &DensityField) -> Result<()> {
    if initial.grid != *grid {
        return Err(Error::InvalidParameter("initial density lives on a different grid".into()));
    }
    if initial.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("initial density must be finite and non-negative".into()));
    }
    let mass = initial.mass();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("initial density integrates to {mass}, not 1")));
    }
    Ok(())
}

/// Per-index mode multipliers `Ψ_t(λ)` for a point source at the origin,
/// one vector per output time.
///
/// Modes are grouped by `(|k|², (λ,v0)²)`, which fixes the real fundamental
/// pair; each group is solved once. At a Nyquist index the multiplier is the
/// mean over the two aliased wavevectors, which keeps it Hermitian on the
/// discrete lattice.
fn multipliers(grid: &SpectralGrid, params: &ModelParams, times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
    let mut t_grid = Vec::with_capacity(times.len() + 1);
    if times[0] != 0.0 {
        t_grid.push(0.0);
    }
    t_grid.extend_from_slice(times);
    let offset = t_grid.len() - times.len();
    let solver = ModeSolver::new(params, &t_grid)?;
    let v0 = params.v0;
    let n = grid.n_per_axis;
    let half = (n / 2) as i64;

    // Aliased wavevectors per index: flip the sign of Nyquist components.
    let variants = |idx: usize| -> Vec<Vec3> {
        let ks = [idx / (n * n), idx / n % n, idx % n].map(|k| grid.signed_wavenumber(k));
        let s = 2.0 * PI / grid.x_extent;
        let mut out = vec![ks];
        for axis in 0..3 {
            if ks[axis] == -half {
                let copy: Vec<[i64; 3]> = out.iter().map(|v| {
                    let mut w = *v;
                    w[axis] = half;
                    w
                }).collect();
                out.extend(copy);
            }
        }
        out.into_iter().map(|k| Vec3::new(k[0] as f64 * s, k[1] as f64 * s, k[2] as f64 * s)).collect()
    };
    let key = |lambda: Vec3| -> (i64, u64) {
        let s = grid.x_extent / (2.0 * PI);
        let k2 = (lambda * s).norm_sq().round() as i64;
        let q = lambda.dot(&v0);
        (k2, (q * q).to_bits())
    };

    let mut keys: Vec<(i64, u64)> = Vec::new();
    let mut seen: HashMap<(i64, u64), usize> = HashMap::new();
    let mut lambda_sq_of: Vec<f64> = Vec::new();
    for idx in 0..grid.len() {
        for l in variants(idx) {
            let k = key(l);
            if !seen.contains_key(&k) {
                seen.insert(k, keys.len());
                keys.push(k);
                lambda_sq_of.push(l.norm_sq());
            }
        }
    }
    let bases: Vec<ModeBasis> = keys
        .par_iter()
        .zip(lambda_sq_of.par_iter())
        .map(|(k, &l2)| solver.basis(l2, f64::from_bits(k.1)))
        .collect::<Result<_>>()?;

    let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; times.len()];
    for idx in 0..grid.len() {
        let vs = variants(idx);
        let w = 1.0 / vs.len() as f64;
        for l in vs {
            let b = &bases[seen[&key(l)]];
            let q = l.dot(&v0);
            for (ti, slot) in out.iter_mut().enumerate() {
                let (psi, _) = b.psi(ti + offset, q, Complex64::new(1.0, 0.0));
                slot[idx] += psi * w;
            }
        }
    }
    Ok(out)
}

/// Densities at each of `times`: the initial spectrum times the point-source
/// mode solution, inverted. Negative values are kept and reported in
/// [`DensityField::negative_mass`].
pub fn densities_from_modes(
    grid: &SpectralGrid,
    params: &ModelParams,
    times: &[f64],
    initial: &DensityField,
) -> Result<Vec<DensityField>> {
    grid.validate()?;
    check_initial(grid, initial)?;
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times[0] < 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("output times must be non-negative and increasing".into()));
    }
    let spec0 = forward(grid, &initial.values);
    alias_check(grid, &spec0)?;
    let mults = multipliers(grid, params, times)?;
    times
        .iter()
        .zip(mults)
        .map(|(&t, m)| {
            let spec: Vec<Complex64> = spec0.iter().zip(&m).map(|(a, b)| a * b).collect();
            alias_check(grid, &spec)?;
            let (values, imag_residue) = inverse(grid, spec);
            let mut f = DensityField::new(*grid, t, values);
            f.imag_residue = imag_residue;
            Ok(f)
        })
        .collect()
}

pub fn density_from_modes(
    grid: &SpectralGrid,
    params: &ModelParams,
    t: f64,
    initial: &DensityField,
) -> Result<DensityField> {
    Ok(densities_from_modes(grid, params, &[t], initial)?.remove(0))
}

/// Right-hand side `c(t) ∇²ρ` of the velocity-averaged density equation,
/// evaluated spectrally.
pub fn averaged_density_equation_rhs(t: f64, field: &DensityField, regime: &RegimeParams) -> Result<DensityField> {
    regime.validate()?;
    let grid = field.grid;
    grid.validate()?;
    let spec = forward(&grid, &field.values);
    alias_check(&grid, &spec)?;
    let c = averaged_rhs_coefficient(t, regime);
    let spec: Vec<Complex64> =
        spec.iter().enumerate().map(|(i, z)| z * (-c * grid.wavevector(i).norm_sq())).collect();
    let (values, imag_residue) = inverse(&grid, spec);
    let mut f = DensityField::new(grid, t, values);
    f.imag_residue = imag_residue;
    Ok(f)
}

pub const DENSITY_MAGIC: &[u8; 8] = b"ORTHDEN\0";
const VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

/// Header `x1,x2,x3,value`, one row per cell centre in storage order.
pub fn write_density_csv<W: Write>(field: &DensityField, mut w: W) -> Result<()> {
    writeln!(w, "x1,x2,x3,value").map_err(io_err)?;
    for (i, v) in field.values.iter().enumerate() {
        let x = field.grid.position(i);
        writeln!(w, "{},{},{},{}", x.x1, x.x2, x.x3, v).map_err(io_err)?;
    }
    Ok(())
}

/// Little-endian: magic, version u32, endian tag u32, n_per_axis u64,
/// x_extent, lambda_max, t, imag_residue (f64), then `n³` values.
pub fn write_density_binary<W: Write>(field: &DensityField, mut w: W) -> Result<()> {
    let g = &field.grid;
    let mut buf = Vec::with_capacity(56 + 8 * field.values.len());
    buf.extend_from_slice(DENSITY_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&ENDIAN_TAG.to_le_bytes());
    buf.extend_from_slice(&(g.n_per_axis as u64).to_le_bytes());
    for f in [g.x_extent, g.lambda_max, field.t, field.imag_residue] {
        buf.extend_from_slice(&f.to_le_bytes());
    }
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

pub fn read_density_binary<R: Read>(mut r: R) -> Result<DensityField> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| Error::Format("truncated density file".into()))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != DENSITY_MAGIC {
        return Err(Error::Format("not a density file".into()));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    if u32_at(take(4)?) != VERSION {
        return Err(Error::Format("unsupported density file version".into()));
    }
    if u32_at(take(4)?) != ENDIAN_TAG {
        return Err(Error::Format("bad endianness tag".into()));
    }
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut f = [0.0; 4];
    for v in f.iter_mut() {
        *v = f64::from_le_bytes(take(8)?.try_into().unwrap());
    }
    let grid = SpectralGrid { n_per_axis: n, x_extent: f[0], lambda_max: f[1] };
    grid.validate().map_err(|e| Error::Format(e.to_string()))?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if pos != bytes.len() {
        return Err(Error::Format("trailing bytes after density values".into()));
    }
    let mut field = DensityField::new(grid, f[2], values);
    field.imag_residue = f[3];
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::CoefficientProfile;

    fn params(v0: Vec3) -> ModelParams {
        ModelParams::new(CoefficientProfile::Constant { a: 1.0, b: 1.0 }, Vec3::ZERO, v0, Vec3::ZERO).unwrap()
    }

    #[test]
    fn grid_closure_and_layout() {
        let g = SpectralGrid::new(8, 4.0).unwrap();
        assert!((g.lambda_max * g.x_extent - PI * 8.0).abs() < 1e-12);
        assert!(SpectralGrid::new(12, 4.0).is_err());
        assert!(SpectralGrid { n_per_axis: 8, lambda_max: 1.0, x_extent: 4.0 }.validate().is_err());
        assert_eq!(g.coord(0), -1.75);
        assert_eq!(g.position(g.index(1, 2, 3)), Vec3::new(g.coord(1), g.coord(2), g.coord(3)));
        assert_eq!(g.signed_wavenumber(4), -4);
        assert_eq!(g.signed_wavenumber(3), 3);
    }

    #[test]
    fn transform_round_trip() {
        let g = SpectralGrid::new(16, 8.0).unwrap();
        let f = g.gaussian(Vec3::new(0.3, -0.2, 0.1), 0.9).unwrap();
        let (back, im) = inverse(&g, forward(&g, &f.values));
        let err = f.values.iter().zip(&back).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12 * f.peak(), "{err}");
        assert!(im < 1e-13);
    }

    #[test]
    fn forward_matches_direct_sum() {
        // Oracle: the defining sum at one wavevector, with the cell-centre
        // phase reinstated.
        let g = SpectralGrid::new(8, 6.0).unwrap();
        let f = g.gaussian(Vec3::new(0.5, 0.0, -0.4), 0.8).unwrap();
        let spec = forward(&g, &f.values);
        let idx = g.index(1, 7, 2);
        let lambda = g.wavevector(idx);
        let direct: Complex64 = (0..g.len())
            .map(|i| Complex64::from_polar(f.values[i] * g.cell_volume(), lambda.dot(&g.position(i))))
            .sum();
        let shift = Vec3::new(1.0, 1.0, 1.0) * (-0.5 * g.x_extent + 0.5 * g.dx());
        let phase = Complex64::from_polar(1.0, -lambda.dot(&shift));
        assert!((spec[idx] - direct * phase).norm() < 1e-12);
    }

    #[test]
    fn identity_at_time_zero() {
        let g = SpectralGrid::new(16, 10.0).unwrap();
        let f0 = g.gaussian(Vec3::ZERO, 1.0).unwrap();
        let f = density_from_modes(&g, &params(Vec3::new(1.0, 0.0, 0.0)), 0.0, &f0).unwrap();
        let err = f0.values.iter().zip(&f.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn conserves_mass_and_stays_real() {
        let g = SpectralGrid::new(16, 12.0).unwrap();
        let f0 = g.gaussian(Vec3::ZERO, 1.0).unwrap();
        let fs = densities_from_modes(&g, &params(Vec3::new(0.6, 0.0, 0.8)), &[0.5, 1.0, 2.0], &f0).unwrap();
        for f in fs {
            assert!((f.mass() - 1.0).abs() <= 1e-9);
            assert!(f.imag_residue <= 1e-10, "{}", f.imag_residue);
        }
    }

    #[test]
    fn reflecting_v0_mirrors_density() {
        // Ψ depends on v0 through (λ,v0)² and the initial slope, so v0 → -v0
        // conjugates every mode: the density is reflected through the origin.
        let g = SpectralGrid::new(16, 12.0).unwrap();
        let f0 = g.gaussian(Vec3::ZERO, 1.0).unwrap();
        let v0 = Vec3::new(1.0, 0.0, 0.0);
        let a = density_from_modes(&g, &params(v0), 1.0, &f0).unwrap();
        let b = density_from_modes(&g, &params(-v0), 1.0, &f0).unwrap();
        let n = g.n_per_axis;
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let m = g.index(n - 1 - i, n - 1 - j, n - 1 - k);
                    err = err.max((a.values[g.index(i, j, k)] - b.values[m]).abs());
                }
            }
        }
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let g = SpectralGrid::new(8, 16.0).unwrap();
        let f0 = g.gaussian(Vec3::ZERO, 0.3).unwrap();
        assert!(matches!(
            density_from_modes(&g, &params(Vec3::new(1.0, 0.0, 0.0)), 0.5, &f0),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn averaged_rhs_is_a_scaled_laplacian() {
        // Oracle: ∇² of a Gaussian of variance s² is ρ (|x|²/s⁴ - 3/s²).
        let g = SpectralGrid::new(32, 16.0).unwrap();
        let s = 1.2;
        let f = g.gaussian(Vec3::ZERO, s).unwrap();
        let r = RegimeParams::new(0.1, 1.0, 1.0).unwrap();
        let t = 0.05;
        let out = averaged_density_equation_rhs(t, &f, &r).unwrap();
        let c = averaged_rhs_coefficient(t, &r);
        for i in (0..g.len()).step_by(97) {
            let x2 = g.position(i).norm_sq();
            let lap = f.values[i] * (x2 / s.powi(4) - 3.0 / (s * s));
            assert!((out.values[i] - c * lap).abs() < 1e-8, "{} vs {}", out.values[i], c * lap);
        }
        assert!(out.mass().abs() < 1e-12);
    }

    #[test]
    fn density_file_round_trip() {
        let g = SpectralGrid::new(4, 2.0).unwrap();
        let f = g.gaussian(Vec3::ZERO, 0.5).unwrap();
        let mut buf = Vec::new();
        write_density_binary(&f, &mut buf).unwrap();
        assert_eq!(read_density_binary(&buf[..]).unwrap(), f);
        assert!(read_density_binary(&buf[..buf.len() - 1]).is_err());
        let mut csv = Vec::new();
        write_density_csv(&f, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 65);
        assert!(text.starts_with("x1,x2,x3,value\n"));
    }
}
