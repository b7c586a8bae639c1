//! The four workflows. Each returns the files it wrote and its reports;
//! report files are written here, manifests by the caller.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use orthodyn::analysis::{
    density_l1_compare, empirical_char_fn, histogram_l1, moment_report, null_l1_floor, position_moments,
    write_json_lines, BinnedPrediction, Binning, ComparisonReport, Metric,
};
use orthodyn::model::speed_squared;
use orthodyn::sim::{
    em_mean_speed_sq, read_ensemble_binary, simulate_ensemble, write_ensemble_binary, write_ensemble_csv,
    Ensemble, IntegratorScheme, SchemeKind, ENSEMBLE_MAGIC,
};
use orthodyn::spectral::{
    densities_from_modes, mode_ode_solve, read_density_binary, write_density_binary, write_density_csv,
    DensityField, DiffusionKernel, RegimeParams, SpectralGrid, DENSITY_MAGIC,
};
use orthodyn::{ModelParams, Vec3};
use serde_json::json;

use crate::config::{ExperimentConfig, FileFormat, RegimeKind, SpectralV0};
use crate::CliError;

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub reports: Vec<ComparisonReport>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed())
    }

    fn finish(mut self, out: &Path) -> Result<Self, CliError> {
        if !self.reports.is_empty() {
            let path = out.join("report.jsonl");
            write_json_lines(&self.reports, BufWriter::new(File::create(&path)?))?;
            self.files.push(path);
        }
        Ok(self)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?))
}

fn tag(t: f64) -> String {
    format!("{t}")
}

fn write_ensemble(cfg: &ExperimentConfig, ens: &Ensemble, out: &Path, stem: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for f in &cfg.output.formats {
        let path = match f {
            FileFormat::Csv => out.join(format!("{stem}.csv")),
            FileFormat::Binary => out.join(format!("{stem}.bin")),
        };
        let mut w = create(&path)?;
        match f {
            FileFormat::Csv => write_ensemble_csv(ens, &mut w)?,
            FileFormat::Binary => write_ensemble_binary(ens, &mut w)?,
        }
        w.flush()?;
        files.push(path);
    }
    Ok(())
}

fn write_density(cfg: &ExperimentConfig, field: &DensityField, out: &Path, stem: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    for f in &cfg.output.formats {
        let path = match f {
            FileFormat::Csv => out.join(format!("{stem}.csv")),
            FileFormat::Binary => out.join(format!("{stem}.bin")),
        };
        let mut w = create(&path)?;
        match f {
            FileFormat::Csv => write_density_csv(field, &mut w)?,
            FileFormat::Binary => write_density_binary(field, &mut w)?,
        }
        w.flush()?;
        files.push(path);
    }
    Ok(())
}

fn simulate(cfg: &ExperimentConfig) -> Result<Ensemble, CliError> {
    Ok(simulate_ensemble(&cfg.model, cfg.scheme, cfg.ensemble.n_traj, &cfg.ensemble.sample_times, cfg.ensemble.seed)?)
}

/// Speed modulus against the closed form. Projected runs are checked per
/// trajectory; Euler–Maruyama runs through the exact mean of the discrete
/// speed chain, which is itself checked against the ensemble.
pub fn speed_reports(cfg: &ExperimentConfig, ens: &Ensemble) -> Result<Vec<ComparisonReport>, CliError> {
    let law = ens.params.speed_law();
    let th = &cfg.thresholds;
    let mut out = Vec::new();
    for (s, &t) in ens.sample_times.iter().enumerate() {
        let exact = speed_squared(t, &law)?;
        let speeds: Vec<f64> = ens.at(s).map(|st| st.v.norm_sq()).collect();
        match ens.scheme.kind {
            SchemeKind::SpeedProjected => {
                let worst = speeds.iter().map(|v| (v - exact).abs() / exact).fold(0.0, f64::max);
                out.push(
                    ComparisonReport::new(format!("speed_projected_t{}", tag(t)), Metric::Residual, worst, th.speed_rel_projected)
                        .with("t", t)
                        .with("closed_form", exact),
                );
            }
            SchemeKind::EulerMaruyama => {
                if ens.params.h.norm_sq() != 0.0 {
                    continue;
                }
                let steps = (t / ens.scheme.dt).round() as u64;
                let chain = em_mean_speed_sq(&ens.params, ens.scheme.dt, steps)?;
                let n = speeds.len() as f64;
                let mean = orthodyn::analysis::pairwise_sum(&speeds) / n;
                let var = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                let se = (var / n).sqrt();
                // Rounding floor: with b = 0 every trajectory is the same.
                let z = (mean - chain) / se.max(1e-12 * chain);
                out.push(
                    ComparisonReport::new(format!("em_speed_sampling_t{}", tag(t)), Metric::MomentZScores, z, th.moment_z)
                        .with("t", t)
                        .with("ensemble_mean", mean)
                        .with("chain_mean", chain)
                        .with("std_error", se),
                );
                out.push(
                    ComparisonReport::new(format!("em_speed_bias_t{}", tag(t)), Metric::Residual, (chain - exact).abs() / exact, th.speed_rel_em)
                        .with("t", t)
                        .with("chain_mean", chain)
                        .with("closed_form", exact),
                );
            }
        }
    }
    Ok(out)
}

pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let ens = simulate(cfg)?;
    let mut o = Outcome::default();
    write_ensemble(cfg, &ens, out, "ensemble", &mut o.files)?;

    let path = out.join("speed_curve.csv");
    let mut w = create(&path)?;
    writeln!(w, "t,mean_speed_sq,min_speed_sq,max_speed_sq,closed_form")?;
    let law = ens.params.speed_law();
    for (s, &t) in ens.sample_times.iter().enumerate() {
        let speeds: Vec<f64> = ens.at(s).map(|st| st.v.norm_sq()).collect();
        let mean = orthodyn::analysis::pairwise_sum(&speeds) / speeds.len() as f64;
        let lo = speeds.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        writeln!(w, "{t},{mean},{lo},{hi},{}", speed_squared(t, &law)?)?;
    }
    w.flush()?;
    o.files.push(path);
    o.reports = speed_reports(cfg, &ens)?;
    o.finish(out)
}

fn initial_density(cfg: &ExperimentConfig, grid: &SpectralGrid, center: Vec3) -> Result<DensityField, CliError> {
    let sigma = cfg.grid.as_ref().map(|g| g.initial_sigma).unwrap_or(1.0);
    Ok(grid.gaussian(center, sigma)?)
}

/// Mass and realness checks for reconstructed densities.
fn density_reports(cfg: &ExperimentConfig, id: &str, f: &DensityField) -> Vec<ComparisonReport> {
    let th = &cfg.thresholds;
    vec![
        ComparisonReport::new(format!("{id}_mass_t{}", tag(f.t)), Metric::Residual, (f.mass() - 1.0).abs(), th.mass)
            .with("t", f.t)
            .with("negative_mass", f.negative_mass),
        ComparisonReport::new(format!("{id}_imag_t{}", tag(f.t)), Metric::Residual, f.imag_residue, th.imag_residue)
            .with("t", f.t),
    ]
}

fn regime_params(r: &crate::config::RegimeSection, eps: f64) -> Result<RegimeParams, CliError> {
    Ok(RegimeParams::new(eps, r.base_a, r.base_b)?)
}

/// Model for one sweep point. `spectral` selects the initial speed used by
/// the spectral sweep; Monte-Carlo runs always start on the sphere.
fn regime_model(cfg: &ExperimentConfig, eps: f64, spectral: bool) -> Result<ModelParams, CliError> {
    let r = cfg.regime.as_ref().expect("regime section");
    let rp = regime_params(r, eps)?;
    let (coeffs, speed_sq) = match r.kind {
        RegimeKind::Diffusion => (rp.diffusion_profile(), rp.base_speed_sq() / eps),
        RegimeKind::Wave => (rp.wave_profile(), rp.base_speed_sq()),
    };
    let share = if spectral && r.spectral_v0 == SpectralV0::Equipartition { 1.0 / 3.0 } else { 1.0 };
    let v0 = cfg.model.v0.normalized()? * (speed_sq * share).sqrt();
    Ok(ModelParams::new(coeffs, Vec3::ZERO, v0, cfg.model.x0)?)
}

/// Gaussian with variance `var_par` along `dir` and `var_perp` across.
fn aniso_gaussian(x: Vec3, center: Vec3, dir: Vec3, var_par: f64, var_perp: f64) -> f64 {
    let d = x - center;
    let along = d.dot(&dir);
    let across = (d.norm_sq() - along * along).max(0.0);
    let norm = (2.0 * std::f64::consts::PI).powf(1.5) * var_par.sqrt() * var_perp;
    (-along * along / (2.0 * var_par) - across / (2.0 * var_perp)).exp() / norm
}

fn monotone_report(id: &str, eps: &[f64], values: &[f64]) -> ComparisonReport {
    // Order by decreasing epsilon; the value is the largest increase.
    let mut pairs: Vec<(f64, f64)> = eps.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let worst = pairs.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let worst = if worst.is_finite() { worst } else { 0.0 };
    ComparisonReport::new(id, Metric::Residual, worst, 0.0)
        .with("epsilons", pairs.iter().map(|p| p.0).collect::<Vec<_>>())
        .with("l1", pairs.iter().map(|p| p.1).collect::<Vec<_>>())
}

pub fn run_spectral(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let mut o = Outcome::default();
    if cfg.spectral.is_none() && cfg.regime.is_none() {
        return Err(CliError::Config("spectral needs a [spectral] or [regime] section".into()));
    }
    if let Some(s) = &cfg.spectral {
        if !s.lambdas.is_empty() {
            let times = &cfg.ensemble.sample_times;
            let path = out.join("cf.csv");
            let mut w = create(&path)?;
            writeln!(w, "lambda1,lambda2,lambda3,t,re,im,dre_dt,dim_dt")?;
            for &l in &s.lambdas {
                for m in mode_ode_solve(l, &cfg.model, times)? {
                    writeln!(w, "{},{},{},{},{},{},{},{}", l.x1, l.x2, l.x3, m.t, m.psi.re, m.psi.im, m.dpsi_dt.re, m.dpsi_dt.im)?;
                }
            }
            w.flush()?;
            o.files.push(path);
        }
        if !s.density_times.is_empty() {
            let grid = cfg.grid.as_ref().expect("validated").grid()?;
            let f0 = initial_density(cfg, &grid, cfg.model.x0)?;
            for f in densities_from_modes(&grid, &cfg.model, &s.density_times, &f0)? {
                write_density(cfg, &f, out, &format!("density_t{}", tag(f.t)), &mut o.files)?;
                o.reports.extend(density_reports(cfg, "density", &f));
            }
        }
    }
    if let Some(r) = &cfg.regime {
        let g = cfg.grid.as_ref().ok_or_else(|| CliError::Config("a spectral regime sweep needs [grid]".into()))?;
        let grid = g.grid()?;
        let sigma2 = g.initial_sigma * g.initial_sigma;
        let mut l1s = Vec::new();
        let path = out.join("spectral_sweep.csv");
        let mut w = create(&path)?;
        writeln!(w, "epsilon,t,l1")?;
        for &eps in &r.epsilons {
            let params = regime_model(cfg, eps, true)?;
            let f0 = initial_density(cfg, &grid, params.x0)?;
            let f = densities_from_modes(&grid, &params, &[r.t], &f0)?.remove(0);
            let dir = params.v0.normalized()?;
            let pred: Vec<f64> = match r.kind {
                RegimeKind::Diffusion => {
                    let rp = regime_params(r, eps)?;
                    let k = DiffusionKernel::new(r.t, params.x0, dir, rp.base_speed_sq() / eps, rp.base_a / eps)?;
                    let (vp, vt) = (k.variance_parallel() + sigma2, k.variance_transverse() + sigma2);
                    grid.sample(|x| aniso_gaussian(x, params.x0, dir, vp, vt))
                }
                RegimeKind::Wave => {
                    let c = params.x0 + params.v0 * r.t;
                    grid.sample(|x| aniso_gaussian(x, c, dir, sigma2, sigma2))
                }
            };
            let dv = grid.cell_volume();
            let terms: Vec<f64> = f.values.iter().zip(&pred).map(|(a, b)| (a - b).abs() * dv).collect();
            let l1 = orthodyn::analysis::pairwise_sum(&terms);
            writeln!(w, "{eps},{},{l1}", r.t)?;
            l1s.push(l1);
            o.reports.extend(density_reports(cfg, &format!("spectral_eps{eps}"), &f));
        }
        w.flush()?;
        o.files.push(path);
        o.reports.push(monotone_report("spectral_l1_monotone", &r.epsilons, &l1s));
    }
    o.finish(out)
}

fn load_ensemble(path: &Path) -> Result<Ensemble, CliError> {
    let f = File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(read_ensemble_binary(std::io::BufReader::new(f))?)
}

/// Box around the sample cloud at `s` (mean ± 4 sd on the widest axis,
/// plus `extra` margin), `bins` per axis.
fn auto_binning(ens: &Ensemble, t: f64, center: Vec3, extra: f64, bins: usize) -> Result<Binning, CliError> {
    let m = position_moments(ens, t)?;
    let sd = (0..3).map(|k| m.cov[k][k].sqrt()).fold(0.0, f64::max);
    let off = (m.mean - center).to_array().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let half = (off + 4.0 * sd + extra).max(1e-6);
    Ok(Binning::cube(center, half, bins)?)
}

/// Characteristic-function cross-check over every `(λ, t)` cell; passes if
/// at least 11/12 of the cells lie within `cf_z` standard errors.
pub fn cf_crosscheck(cfg: &ExperimentConfig, ens: &Ensemble, lambdas: &[Vec3], times: &[f64]) -> Result<ComparisonReport, CliError> {
    let mut cells = Vec::new();
    let mut zs = Vec::new();
    for &l in lambdas {
        let modes = mode_ode_solve(l, &ens.params, &ens.sample_times)?;
        for &t in times {
            let s = ens.sample_index(t)?;
            let cf = empirical_char_fn(ens, l, t)?;
            let psi = modes[s].psi;
            let err = (cf.estimate - psi).norm();
            let z = if cf.std_error > 0.0 { err / cf.std_error } else if err <= 1e-12 { 0.0 } else { f64::INFINITY };
            zs.push(z);
            cells.push(json!({
                "lambda": l.to_array(), "t": t, "z": z,
                "mc": [cf.estimate.re, cf.estimate.im], "ode": [psi.re, psi.im], "std_error": cf.std_error,
            }));
        }
    }
    let required = (zs.len() * 11).div_ceil(12);
    let mut sorted = zs.clone();
    sorted.sort_by(f64::total_cmp);
    let value = if required == 0 { 0.0 } else { sorted[required - 1] };
    Ok(ComparisonReport::new("cf_crosscheck", Metric::SupCfError, value, cfg.thresholds.cf_z)
        .with("cells", cells)
        .with("required_cells", required)
        .with("cells_within", zs.iter().filter(|z| **z <= cfg.thresholds.cf_z).count()))
}

pub fn run_compare(
    cfg: &ExperimentConfig,
    ensemble: Option<&Path>,
    prediction: Option<&Path>,
    out: &Path,
) -> Result<Outcome, CliError> {
    let mut o = Outcome::default();
    let ens = match ensemble {
        Some(p) => load_ensemble(p)?,
        None => {
            let e = simulate(cfg)?;
            write_ensemble(cfg, &e, out, "ensemble", &mut o.files)?;
            e
        }
    };
    let c = cfg.compare.clone().unwrap_or(crate::config::CompareSection {
        lambdas: vec![],
        times: vec![],
        moments: false,
        reflect_v0: false,
        binning: None,
    });
    let times: Vec<f64> = if c.times.is_empty() {
        ens.sample_times.iter().copied().filter(|t| *t > 0.0).collect()
    } else {
        c.times.clone()
    };
    let th = &cfg.thresholds;

    if !c.lambdas.is_empty() {
        o.reports.push(cf_crosscheck(cfg, &ens, &c.lambdas, &times)?);
    }
    if c.moments {
        for &t in &times {
            o.reports.extend(moment_report(&ens, t)?.into_iter().map(|r| r.rethreshold(th.moment_z)));
        }
    }
    if let Some(p) = prediction {
        let bytes = std::fs::read(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
        if bytes.starts_with(DENSITY_MAGIC) {
            let field = read_density_binary(&bytes[..])?;
            let binning = match c.binning {
                Some(b) => b,
                None => {
                    let g = field.grid;
                    let bins = if g.n_per_axis >= 16 { g.n_per_axis / 2 } else { g.n_per_axis.max(8) };
                    Binning::cube(Vec3::ZERO, 0.5 * g.x_extent, bins)?
                }
            };
            let pred = BinnedPrediction::from_field(binning, &field);
            o.reports.push(density_l1_compare("density_l1", &ens, field.t, &pred, th.l1)?);
        } else if bytes.starts_with(ENSEMBLE_MAGIC) {
            let other = read_ensemble_binary(&bytes[..])?;
            for &t in &times {
                let b = match c.binning {
                    Some(b) => b,
                    None => auto_binning(&ens, t, position_moments(&ens, t)?.mean, 0.0, 16)?,
                };
                let floor = null_l1_floor(&ens, t, b)?;
                let l1 = histogram_l1(
                    &BinnedPrediction::from_ensemble(b, &ens, t)?,
                    &BinnedPrediction::from_ensemble(b, &other, t)?,
                );
                o.reports.push(
                    ComparisonReport::new(format!("ensemble_l1_t{}", tag(t)), Metric::L1Density, l1, th.null_safety * floor * 2f64.sqrt())
                        .with("t", t)
                        .with("null_floor", floor),
                );
            }
        } else {
            return Err(CliError::Runtime(format!("{}: neither a density nor an ensemble file", p.display())));
        }
    }
    if c.reflect_v0 {
        o.reports.extend(reflection_reports(cfg, &ens, &c, &times)?);
    }
    o.finish(out)
}

/// `v0 -> -v0`: Monte-Carlo histograms against an in-run noise floor (an
/// independent run at the next seed) and, with a grid, spectral densities
/// pointwise.
pub fn reflection_reports(
    cfg: &ExperimentConfig,
    ens: &Ensemble,
    c: &crate::config::CompareSection,
    times: &[f64],
) -> Result<Vec<ComparisonReport>, CliError> {
    let th = &cfg.thresholds;
    let mut reflected = ens.params.clone();
    reflected.v0 = -reflected.v0;
    let mirror = simulate_ensemble(&reflected, ens.scheme, ens.n_traj, &ens.sample_times, ens.master_seed)?;
    let twin = simulate_ensemble(&ens.params, ens.scheme, ens.n_traj, &ens.sample_times, ens.master_seed.wrapping_add(1))?;
    let mut out = Vec::new();
    for &t in times {
        let b = match c.binning {
            Some(b) => b,
            None => auto_binning(ens, t, ens.params.x0, 0.0, 16)?,
        };
        let h = |e: &Ensemble| BinnedPrediction::from_ensemble(b, e, t);
        let base = h(ens)?;
        let floor = histogram_l1(&base, &h(&twin)?);
        let l1 = histogram_l1(&base, &h(&mirror)?);
        out.push(
            ComparisonReport::new(format!("v0_reflection_mc_t{}", tag(t)), Metric::L1Density, l1, th.null_safety * floor)
                .with("t", t)
                .with("two_run_floor", floor)
                .with("n_traj", ens.n_traj),
        );
    }
    if let Some(g) = &cfg.grid {
        let grid = g.grid()?;
        let dtimes: Vec<f64> = cfg.spectral.as_ref().map(|s| s.density_times.clone()).filter(|v| !v.is_empty()).unwrap_or_else(|| times.to_vec());
        let f0 = initial_density(cfg, &grid, ens.params.x0)?;
        let a = densities_from_modes(&grid, &ens.params, &dtimes, &f0)?;
        let b = densities_from_modes(&grid, &reflected, &dtimes, &f0)?;
        for (fa, fb) in a.iter().zip(&b) {
            let diff = fa.values.iter().zip(&fb.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            out.push(
                ComparisonReport::new(format!("v0_reflection_spectral_t{}", tag(fa.t)), Metric::Residual, diff, th.reflection)
                    .with("t", fa.t)
                    .with("peak", fa.peak()),
            );
        }
    }
    Ok(out)
}

/// Monte-Carlo sweep over the small parameter.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    let r = cfg.regime.as_ref().ok_or_else(|| CliError::Config("sweep needs a [regime] section".into()))?;
    let th = &cfg.thresholds;
    let mut o = Outcome::default();
    let mut l1s = Vec::new();
    let table = out.join("sweep.csv");
    let mut w = create(&table)?;
    writeln!(w, "epsilon,dt,n_traj,mean1,mean2,mean3,var_parallel,var_transverse,l1,null_floor")?;
    for &eps in &r.epsilons {
        let params = regime_model(cfg, eps, false)?;
        let a = params.coeffs.a(0.0);
        let dt0 = r.a_dt.map(|x| x / a).unwrap_or(cfg.scheme.dt);
        let steps = (r.t / dt0).ceil().max(1.0);
        let dt = r.t / steps;
        let scheme = IntegratorScheme::new(cfg.scheme.kind, dt);
        let ens = simulate_ensemble(&params, scheme, cfg.ensemble.n_traj, &[0.0, r.t], cfg.ensemble.seed)?;
        let t = r.t;
        let m = position_moments(&ens, t)?;
        let dir = params.v0.normalized()?;
        let (l1, floor) = match r.kind {
            RegimeKind::Diffusion => {
                let rep = moment_report(&ens, t)?;
                if let Some(v) = rep.into_iter().find(|x| x.experiment_id == "variance_ratio") {
                    let mut v = v.rethreshold(th.moment_z);
                    v.experiment_id = format!("variance_ratio_eps{eps}");
                    o.reports.push(v.with("epsilon", eps));
                }
                let rp = regime_params(r, eps)?;
                let k = DiffusionKernel::new(t, params.x0, dir, rp.base_speed_sq() / eps, a)?;
                let b = Binning::cube(params.x0, 4.0 * k.variance_parallel().sqrt(), r.bins)?;
                let rep = density_l1_compare(&format!("diffusion_l1_eps{eps}"), &ens, t, &BinnedPrediction::from_kernel(b, &k), th.l1)?;
                let floor = null_l1_floor(&ens, t, b)?;
                let l1 = rep.value;
                o.reports.push(rep.with("epsilon", eps).with("null_floor", floor));
                (l1, floor)
            }
            RegimeKind::Wave => {
                let target = params.x0 + params.v0 * t;
                let se = |k: usize| (m.cov[k][k] / m.n as f64).sqrt();
                for k in 0..3 {
                    let dev = m.mean.component(k) - target.component(k);
                    let z = if se(k) > 0.0 { dev / se(k) } else if dev.abs() <= 1e-12 { 0.0 } else { dev.signum() * f64::INFINITY };
                    o.reports.push(
                        ComparisonReport::new(format!("wave_mean_x{}_eps{eps}", k + 1), Metric::MomentZScores, z, th.moment_z)
                            .with("epsilon", eps)
                            .with("mean", m.mean.component(k))
                            .with("expected", target.component(k))
                            .with("std_error", se(k)),
                    );
                }
                let spread = (m.cov[0][0] + m.cov[1][1] + m.cov[2][2]).sqrt();
                let scale = params.v0.norm() * t;
                o.reports.push(
                    ComparisonReport::new(format!("wave_spread_eps{eps}"), Metric::Residual, spread / scale, th.wave_spread)
                        .with("epsilon", eps)
                        .with("std_dev", spread),
                );
                // Bins of width 0.04 |v0| t with the target at a bin centre.
                let width = 0.04 * scale;
                let n = r.bins as f64;
                let half = Vec3::new(1.0, 1.0, 1.0) * (0.5 * n * width);
                let shift = if r.bins % 2 == 0 { Vec3::new(1.0, 1.0, 1.0) * (0.5 * width) } else { Vec3::ZERO };
                let b = Binning::new(target - half - shift, target + half - shift, [r.bins; 3])?;
                let plus = BinnedPrediction::point_mass(b, target);
                let here = BinnedPrediction::from_ensemble(b, &ens, t)?;
                let l1 = histogram_l1(&here, &plus);
                let back = params.x0 - params.v0 * t;
                let bb = Binning::new(back - half - shift, back + half - shift, [r.bins; 3])?;
                let l1_back = histogram_l1(&BinnedPrediction::from_ensemble(bb, &ens, t)?, &BinnedPrediction::point_mass(bb, back));
                o.reports.push(
                    ComparisonReport::new(format!("wave_l1_eps{eps}"), Metric::L1Density, l1, 2.0).with("epsilon", eps),
                );
                o.reports.push(
                    ComparisonReport::new(format!("transport_direction_eps{eps}"), Metric::L1Density, l1, l1_back)
                        .with("epsilon", eps)
                        .with("l1_plus_v0", l1)
                        .with("l1_minus_v0", l1_back),
                );
                (l1, f64::NAN)
            }
        };
        let vp = m.cov.iter().enumerate().map(|(i, row)| row.iter().enumerate().map(|(j, c)| c * dir.component(i) * dir.component(j)).sum::<f64>()).sum::<f64>();
        let vt = 0.5 * (m.cov[0][0] + m.cov[1][1] + m.cov[2][2] - vp);
        writeln!(w, "{eps},{dt},{},{},{},{},{vp},{vt},{l1},{floor}", ens.n_traj, m.mean.x1, m.mean.x2, m.mean.x3)?;
        l1s.push(l1);
    }
    w.flush()?;
    o.files.push(table);
    let id = match r.kind {
        RegimeKind::Diffusion => "diffusion_l1_monotone",
        RegimeKind::Wave => "wave_l1_monotone",
    };
    o.reports.push(monotone_report(id, &r.epsilons, &l1s));
    o.finish(out)
}
