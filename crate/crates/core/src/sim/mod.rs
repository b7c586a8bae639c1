//! Itô integration of the velocity-orthogonal Langevin system and
//! reproducible ensemble generation.

mod export;

pub use export::{read_ensemble_binary, write_ensemble_binary, write_ensemble_csv, ENSEMBLE_MAGIC};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ortho_cross_noise, ModelParams, SpeedLaw};
use crate::rng::RngLineage;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub x: Vec3,
    pub v: Vec3,
}

impl State {
    pub fn initial(params: &ModelParams) -> Self {
        State { t: 0.0, x: params.x0, v: params.v0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Plain Euler–Maruyama; the speed modulus drifts at O(dt).
    EulerMaruyama,
    /// Euler–Maruyama for the direction, then the speed is reset onto the
    /// exact deterministic speed curve.
    SpeedProjected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorScheme {
    pub kind: SchemeKind,
    pub dt: f64,
}

impl IntegratorScheme {
    pub fn new(kind: SchemeKind, dt: f64) -> Self {
        Self { kind, dt }
    }

    /// Checks `dt > 0` and, for Euler–Maruyama, `dt * max a < 0.5` on
    /// `[0, t_max]`.
    pub fn validate(&self, params: &ModelParams, t_max: f64) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.kind == SchemeKind::EulerMaruyama {
            let guard = self.dt * params.coeffs.sup_a(t_max);
            if guard >= 0.5 {
                return Err(Error::InvalidParameter(format!(
                    "Euler-Maruyama stability guard violated: dt * max a = {guard} >= 0.5"
                )));
            }
        }
        Ok(())
    }
}

/// Ensemble mean of `|v|²` after `n_steps` Euler–Maruyama steps of size
/// `dt`, for `H = 0`.
///
/// The kick is orthogonal to `v`, so `|v'|² = (1 - a dt)² |v|² + b² |P⊥ dw|²`
/// with `P⊥` the projection across `v`; `|P⊥ dw|²` has mean `2 dt` whatever
/// the direction. The mean therefore follows
/// `m' = (1 - a dt)² m + 2 b² dt` exactly, which isolates the scheme's bias
/// from sampling noise.
pub fn em_mean_speed_sq(params: &ModelParams, dt: f64, n_steps: u64) -> Result<f64> {
    params.validate()?;
    if params.h.norm_sq() != 0.0 {
        return Err(Error::NotApplicable("the speed recursion needs H = 0"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0".into()));
    }
    let mut m = params.v0.norm_sq();
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let r = 1.0 - params.coeffs.a(t) * dt;
        m = r * r * m + 2.0 * params.coeffs.b_sq(t) * dt;
    }
    Ok(m)
}

/// One Euler–Maruyama step. The position advances with the pre-step
/// velocity.
#[inline]
pub fn em_step(s: &State, params: &ModelParams, dt: f64, dw: Vec3) -> Result<State> {
    let coeffs = &params.coeffs;
    let drift = s.v * (-coeffs.a(s.t)) + s.v.cross(&params.h);
    let kick = ortho_cross_noise(s.v, dw, coeffs.b(s.t))?;
    let v = s.v + drift * dt + kick;
    if v.norm_sq() == 0.0 {
        return Err(Error::ZeroVelocity);
    }
    Ok(State { t: s.t + dt, x: s.x + s.v * dt, v })
}

/// Euler–Maruyama for the direction, then `v` is rescaled so that
/// `|v|² = speed_squared(t + dt)`.
pub fn speed_projected_step(
    s: &State,
    params: &ModelParams,
    dt: f64,
    dw: Vec3,
    law: &SpeedLaw,
) -> Result<State> {
    let mut next = em_step(s, params, dt, dw)?;
    let target = law.speed_squared(s.t + dt)?;
    next.v = project_speed(next.v, target);
    Ok(next)
}

#[inline]
fn project_speed(v: Vec3, target_sq: f64) -> Vec3 {
    v * (target_sq / v.norm_sq()).sqrt()
}

/// Set of independent trajectories recorded at common sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub params: ModelParams,
    pub scheme: IntegratorScheme,
    pub master_seed: u64,
    pub n_traj: usize,
    pub sample_times: Vec<f64>,
    /// Trajectory-major: `states[traj * sample_times.len() + sample]`.
    pub states: Vec<State>,
}

impl Ensemble {
    #[inline]
    pub fn n_samples(&self) -> usize {
        self.sample_times.len()
    }

    #[inline]
    pub fn state(&self, traj: usize, sample: usize) -> &State {
        &self.states[traj * self.n_samples() + sample]
    }

    /// Index of `t` in the sample times (matched to 1e-9 relative).
    pub fn sample_index(&self, t: f64) -> Result<usize> {
        self.sample_times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * s.abs().max(1.0))
            .ok_or(Error::TimeNotSampled(t))
    }

    /// States of every trajectory at sample `sample`, in trajectory order.
    pub fn at(&self, sample: usize) -> impl Iterator<Item = &State> + '_ {
        let m = self.n_samples();
        self.states.iter().skip(sample).step_by(m)
    }
}

fn sample_steps(sample_times: &[f64], dt: f64) -> Result<Vec<u64>> {
    if sample_times.is_empty() || sample_times[0] != 0.0 {
        return Err(Error::InvalidParameter("sample_times must start at 0".into()));
    }
    let mut steps = Vec::with_capacity(sample_times.len());
    for (i, &t) in sample_times.iter().enumerate() {
        if i > 0 && !(t > sample_times[i - 1]) {
            return Err(Error::InvalidParameter("sample_times must be strictly increasing".into()));
        }
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample time {t} is not a multiple of dt = {dt}"
            )));
        }
        steps.push(k as u64);
    }
    Ok(steps)
}

/// Integrates `n_traj` trajectories, trajectory `k` drawing its increments
/// from lineage `(master_seed, k)`. The result depends only on the inputs,
/// not on the rayon pool it runs in.
pub fn simulate_ensemble(
    params: &ModelParams,
    scheme: IntegratorScheme,
    n_traj: usize,
    sample_times: &[f64],
    master_seed: u64,
) -> Result<Ensemble> {
    params.validate()?;
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
    }
    let steps = sample_steps(sample_times, scheme.dt)?;
    let total_steps = *steps.last().unwrap();
    scheme.validate(params, sample_times[sample_times.len() - 1])?;

    let speed_table = match scheme.kind {
        SchemeKind::SpeedProjected => {
            let times: Vec<f64> = (1..=total_steps).map(|k| k as f64 * scheme.dt).collect();
            Some(params.speed_law().curve(&times)?)
        }
        SchemeKind::EulerMaruyama => None,
    };

    let per_traj: Vec<Result<Vec<State>>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            run_trajectory(params, scheme, &steps, speed_table.as_deref(), RngLineage::new(master_seed, k as u64))
                .map_err(|e| Error::Trajectory { index: k, source: Box::new(e) })
        })
        .collect();

    let mut states = Vec::with_capacity(n_traj * steps.len());
    for r in per_traj {
        states.extend(r?);
    }
    Ok(Ensemble {
        params: params.clone(),
        scheme,
        master_seed,
        n_traj,
        sample_times: sample_times.to_vec(),
        states,
    })
}

fn run_trajectory(
    params: &ModelParams,
    scheme: IntegratorScheme,
    sample_steps: &[u64],
    speed_table: Option<&[f64]>,
    lineage: RngLineage,
) -> Result<Vec<State>> {
    let dt = scheme.dt;
    let mut stream = lineage.stream(dt, 0);
    let mut state = State::initial(params);
    let mut out = Vec::with_capacity(sample_steps.len());
    let mut step = 0u64;
    for &target in sample_steps {
        while step < target {
            let dw = stream.next_increment();
            state = em_step(&state, params, dt, dw)?;
            step += 1;
            // Re-anchor the clock so it never accumulates rounding.
            state.t = step as f64 * dt;
            if let Some(table) = speed_table {
                state.v = project_speed(state.v, table[step as usize - 1]);
            }
        }
        out.push(state);
    }
    Ok(out)
}
