//! Direct integration of `−q̈ = ∇V(q)`, used to check continued loops
//! independently of the harmonic-balance discretisation.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::galerkin::{Galerkin, LoopState};
use crate::lattice::LatticeModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorOptions {
    pub rtol: f64,
    /// Absolute tolerance relative to the sup norm of the initial data
    /// (floored at 1e-3), so that small-amplitude orbits are resolved.
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-12, h_min: 1e-13, max_steps: 5_000_000 }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Default::default() }
    }
}

// Dormand–Prince 5(4)
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand–Prince integration of `y' = f(t, y)`, returning the
/// state at each of the increasing `times` (the first must be `t0`).
/// Steps are shortened to land exactly on the requested times.
pub fn dopri5<F>(mut f: F, y0: &[f64], times: &[f64], opts: &IntegratorOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial data"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("output times must be increasing".into()));
    }
    let Some(&t_start) = times.first() else { return Ok(Vec::new()) };
    let dim = y0.len();
    let scale = y0.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
    let atol = opts.atol * scale;
    let mut k = vec![vec![0.0; dim]; 7];
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; dim];
    let mut stage = vec![0.0; dim];
    let mut t = t_start;
    f(t, &y, &mut k[0]);
    let span = times.last().unwrap() - t_start;
    let mut h = (span * 1e-3).max(1e-6).min(1e-2);
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0usize;
    for &target in times {
        while target - t > 1e-14 * (1.0 + t.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Integration(format!("step budget {} exhausted at t = {t}", opts.max_steps)));
            }
            let clipped = h >= target - t;
            let step = if clipped { target - t } else { h };
            for s in 1..7 {
                for i in 0..dim {
                    stage[i] = y[i] + step * (0..s).map(|m| A[s][m] * k[m][i]).sum::<f64>();
                }
                f(t + C[s] * step, &stage, &mut k[s]);
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            let mut err = 0.0;
            for i in 0..dim {
                let e = step * (0..7).map(|m| E[m] * k[m][i]).sum::<f64>();
                let sc = atol + opts.rtol * y[i].abs().max(y_new[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / dim.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration(format!("non-finite state at t = {t}")));
            }
            if err <= 1.0 {
                t = if clipped { target } else { t + step };
                std::mem::swap(&mut y, &mut y_new);
                // first-same-as-last
                k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !clipped || step * grow > h {
                    h = step * grow;
                }
            } else {
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < opts.h_min {
                    return Err(Error::Integration(format!("step size underflow at t = {t}")));
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Sampled trajectory of the lattice.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    /// `max |H(t) − H(0)| / (H(0) − V(a·𝟙))`
    pub fn relative_energy_drift(&self, model: &LatticeModel) -> Result<f64> {
        let e0 = self.energy[0];
        let rest = model.potential(&vec![model.a; model.n])?;
        let drift = self.energy.iter().fold(0.0f64, |m, e| m.max((e - e0).abs()));
        Ok(if drift == 0.0 { 0.0 } else { drift / (e0 - rest).abs().max(f64::MIN_POSITIVE) })
    }
}

fn check_state(model: &LatticeModel, q: &[f64], p: &[f64]) -> Result<()> {
    if q.len() != model.n || p.len() != model.n {
        return Err(Error::Precondition(format!("state has length {}/{}, expected {}", q.len(), p.len(), model.n)));
    }
    Ok(())
}

/// Integrates from `(q0, p0)` and samples at `times` (starting at 0).
pub fn integrate_at(model: &LatticeModel, q0: &[f64], p0: &[f64], times: &[f64], opts: &IntegratorOptions) -> Result<Trajectory> {
    check_state(model, q0, p0)?;
    let n = model.n;
    let y0: Vec<f64> = q0.iter().chain(p0).copied().collect();
    let ys = dopri5(
        |_, y, dy| {
            dy[..n].copy_from_slice(&y[n..]);
            model.grad_v_into(&y[..n], &mut dy[n..]);
            dy[n..].iter_mut().for_each(|v| *v = -*v);
        },
        &y0,
        times,
        opts,
    )?;
    let mut traj = Trajectory { times: times.to_vec(), q: Vec::new(), p: Vec::new(), energy: Vec::new() };
    for y in ys {
        let (q, p) = y.split_at(n);
        traj.energy.push(model.energy(q, p)?);
        traj.q.push(q.to_vec());
        traj.p.push(p.to_vec());
    }
    Ok(traj)
}

/// Integrates over `[0, duration]` with `samples + 1` equally spaced outputs.
pub fn integrate(model: &LatticeModel, q0: &[f64], p0: &[f64], duration: f64, samples: usize, opts: &IntegratorOptions) -> Result<Trajectory> {
    if !(duration >= 0.0) || samples == 0 {
        return Err(Error::Precondition("need a non-negative duration and at least one sample".into()));
    }
    let times: Vec<f64> = (0..=samples).map(|i| duration * i as f64 / samples as f64).collect();
    integrate_at(model, q0, p0, &times, opts)
}

// Yoshida's fourth-order composition of the leapfrog
const W1: f64 = 1.351_207_191_959_657_6;
const W0: f64 = -1.702_414_383_919_315_3;

/// Fixed-step fourth-order symplectic integration for long energy studies.
pub fn integrate_symplectic(model: &LatticeModel, q0: &[f64], p0: &[f64], step: f64, steps: usize, every: usize) -> Result<Trajectory> {
    check_state(model, q0, p0)?;
    if !(step > 0.0) || every == 0 {
        return Err(Error::Precondition("step must be positive and every >= 1".into()));
    }
    let n = model.n;
    let (mut q, mut p) = (q0.to_vec(), p0.to_vec());
    let mut force = vec![0.0; n];
    let mut traj = Trajectory { times: vec![0.0], q: vec![q.clone()], p: vec![p.clone()], energy: vec![model.energy(&q, &p)?] };
    for s in 1..=steps {
        for w in [W1, W0, W1] {
            let h = w * step;
            q.iter_mut().zip(&p).for_each(|(x, v)| *x += 0.5 * h * v);
            model.grad_v_into(&q, &mut force);
            p.iter_mut().zip(&force).for_each(|(v, g)| *v -= h * g);
            q.iter_mut().zip(&p).for_each(|(x, v)| *x += 0.5 * h * v);
        }
        if s % every == 0 {
            traj.times.push(s as f64 * step);
            traj.energy.push(model.energy(&q, &p)?);
            traj.q.push(q.clone());
            traj.p.push(p.clone());
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicityReport {
    pub nu: f64,
    pub period: f64,
    /// Galerkin residual of the loop.
    pub residual: f64,
    /// `‖(q, p)(T) − (q, p)(0)‖`
    pub return_distance: f64,
    /// Max over samples of `‖q(τ) − a − x(ντ)‖_∞`.
    pub max_deviation: f64,
    pub energy_drift: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Integrates the orbit through `(a + x(0), ν ẋ(0))` over one period `2π/ν`
/// and compares it with the loop.
pub fn verify_periodicity(model: &LatticeModel, x: &LoopState, samples: usize, threshold: f64, opts: &IntegratorOptions) -> Result<PeriodicityReport> {
    if x.n != model.n {
        return Err(Error::Precondition(format!("loop has n = {}, model has n = {}", x.n, model.n)));
    }
    if !(x.nu > 0.0) || !x.is_finite() {
        return Err(Error::Precondition("loop must be finite with positive frequency".into()));
    }
    let residual = Galerkin::new(model, x.l0)?.residual(x)?.norm;
    let (q0, p0) = x.phase_point(model.a);
    let period = TAU / x.nu;
    let traj = integrate(model, &q0, &p0, period, samples.max(1), opts)?;
    let (qt, pt) = (traj.q.last().unwrap(), traj.p.last().unwrap());
    let return_distance = q0
        .iter()
        .zip(qt)
        .chain(p0.iter().zip(pt))
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let mut max_deviation = 0.0f64;
    for (tau, q) in traj.times.iter().zip(&traj.q) {
        let xt = x.eval(x.nu * tau);
        for (qj, xj) in q.iter().zip(xt) {
            max_deviation = max_deviation.max((qj - model.a - xj).abs());
        }
    }
    let energy_drift = traj.relative_energy_drift(model)?;
    Ok(PeriodicityReport {
        nu: x.nu,
        period,
        residual,
        return_distance,
        max_deviation,
        energy_drift,
        threshold,
        passed: return_distance <= threshold && residual <= 1e-9,
    })
}
