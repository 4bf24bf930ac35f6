//! Newton's cradle: all linear frequencies coincide (`W''(0) = 0`), so the
//! bifurcation from `ν = ω` is found from critical points of the reduced
//! potential
//!
//! ```text
//! Φ^H(x₁) = F(x₁ + x₂(x₁)),   F(x) = ∫₀^{2π} ν²|ẋ|²/2 − [V(a + x) − V(a)] dt,
//! ```
//!
//! on the first-harmonic part of `Fix(H)`, `H = S` or `S̃`, where `x₂` solves
//! the remaining harmonics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::galerkin::{solve_slave, Galerkin, LoopState, TruncationPolicy};
use crate::lattice::LatticeModel;
use crate::linalg::{newton, NewtonOptions};
use crate::spectrum::dispersion;
use crate::symmetry::{build_isotropy, GroupElement, GroupLabel, IsotropyGroup};

/// The reduced problem for one group, frequency and truncation.
#[derive(Clone, Debug)]
pub struct ReducedPotential {
    pub group: IsotropyGroup,
    pub nu: f64,
    pub omega: f64,
    gal: Galerkin,
    /// First-harmonic part of `Fix(H)`, full coordinates.
    first: DMatrix<f64>,
    /// Remaining harmonics of `Fix(H)`.
    slave: DMatrix<f64>,
}

/// `Φ^H`, its gradient in fixed-space coordinates and the full loop.
#[derive(Clone, Debug)]
pub struct ReducedValue {
    pub phi: f64,
    pub gradient: DVector<f64>,
    pub state: LoopState,
}

fn check_cradle(model: &LatticeModel) -> Result<f64> {
    let table = dispersion(model);
    if !table.all_equal {
        return Err(Error::Precondition(
            "the reduced-potential search needs coinciding linear frequencies (W''(0) = 0)".into(),
        ));
    }
    let w2 = model.onsite_curvature();
    if w2 <= 0.0 {
        return Err(Error::Precondition(format!("U''(a) = {w2} must be positive")));
    }
    Ok(w2.sqrt())
}

impl ReducedPotential {
    pub fn new(model: &LatticeModel, label: GroupLabel, nu: f64, l0: usize) -> Result<Self> {
        if !matches!(label, GroupLabel::CradleS | GroupLabel::CradleSTilde) {
            return Err(Error::InvalidGroup(format!("{} is not a cradle group", label.name())));
        }
        let omega = check_cradle(model)?;
        if (nu - omega).abs() < 1e-12 {
            return Err(Error::Precondition("nu = omega: the quadratic form is degenerate".into()));
        }
        let group = build_isotropy(label, model.n, 0)?.for_model(model)?;
        let gal = Galerkin::new(model, l0)?;
        let fixed = group.fixed_space(l0, model.zero_mean_mode)?;
        Ok(Self {
            first: fixed.embed(|l| l == 1),
            slave: fixed.embed(|l| l != 1),
            group,
            nu,
            omega,
            gal,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.ncols()
    }

    pub fn l0(&self) -> usize {
        self.gal.l0()
    }

    pub fn first_mode_basis(&self) -> &DMatrix<f64> {
        &self.first
    }

    /// First-harmonic loop with coordinates `u`.
    pub fn first_mode(&self, u: &DVector<f64>) -> LoopState {
        LoopState::from_real(self.gal.n(), self.l0(), self.nu, (&self.first * u).as_slice())
    }

    fn full(&self, u: &DVector<f64>, guess: Option<&LoopState>) -> Result<LoopState> {
        let x1 = self.first_mode(u);
        let s = solve_slave(&self.gal, &x1, self.nu, Some(&self.slave), guess)?;
        let v = x1.to_real() + s.x2.to_real();
        Ok(LoopState::from_real(x1.n, x1.l0, self.nu, v.as_slice()))
    }

    /// `Φ^H(u)` and `∇Φ^H(u) = 2π Bᵀ f(x₁ + x₂)`.
    pub fn evaluate(&self, u: &DVector<f64>, guess: Option<&LoopState>) -> Result<ReducedValue> {
        let state = self.full(u, guess)?;
        let v = state.to_real();
        let phi = self.gal.action(v.as_slice(), self.nu)?;
        let f = self.gal.residual_real(v.as_slice(), self.nu)?;
        Ok(ReducedValue { phi, gradient: self.first.transpose() * f * TAU, state })
    }

    /// Hessian of `Φ^H` at a reduced point: `2π` times the Schur complement
    /// of the slave block in the restricted Jacobian.
    pub fn hessian(&self, state: &LoopState) -> Result<DMatrix<f64>> {
        let v = state.to_real();
        let lin = self.gal.linearize(v.as_slice())?;
        let j1 = self.gal.jacobian_times(&lin, self.nu, &self.first);
        let j2 = self.gal.jacobian_times(&lin, self.nu, &self.slave);
        let a11 = self.first.transpose() * &j1;
        let a21 = self.slave.transpose() * &j1;
        let a22 = self.slave.transpose() * &j2;
        let a12 = self.first.transpose() * &j2;
        let correction = a22
            .lu()
            .solve(&a21)
            .ok_or(Error::NoConvergence { what: "slave block factorisation", iterations: 0, residual: f64::NAN })?;
        Ok((a11 - a12 * correction) * TAU)
    }
}

/// `Φ^H(x₁)` and its gradient for first-harmonic coordinates `u`.
pub fn reduced_potential(model: &LatticeModel, label: GroupLabel, u: &[f64], nu: f64, l0: usize) -> Result<(f64, Vec<f64>)> {
    let rp = ReducedPotential::new(model, label, nu, l0)?;
    if u.len() != rp.dim() {
        return Err(Error::Precondition(format!("expected {} coordinates, got {}", rp.dim(), u.len())));
    }
    let val = rp.evaluate(&DVector::from_column_slice(u), None)?;
    Ok((val.phi, val.gradient.iter().copied().collect()))
}

/// Estimate of the quadratic coefficient `Φ/|x₁|²` near the origin.
///
/// One-sided contacts add a `|x₁|^{5/2}` term to `Φ`; the extrapolated
/// value combines the ratios at `s` and `s/4`, which removes that term.
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticCoefficient {
    /// `|x₁|`, the norm of the complex coefficient `X_1`.
    pub amplitude: f64,
    pub raw: f64,
    pub extrapolated: f64,
    /// `2π(ν² − ω²)`.
    pub predicted: f64,
}

pub fn quadratic_coefficient(rp: &ReducedPotential, direction: &DVector<f64>, amplitude: f64) -> Result<QuadraticCoefficient> {
    let w = direction.normalize();
    // ‖u‖ = L² norm of the first-harmonic loop = √2 |X_1|
    let ratio = |s: f64| -> Result<f64> {
        let val = rp.evaluate(&(&w * (s * std::f64::consts::SQRT_2)), None)?;
        Ok(val.phi / (s * s))
    };
    let raw = ratio(amplitude)?;
    let quarter = ratio(amplitude / 4.0)?;
    Ok(QuadraticCoefficient {
        amplitude,
        raw,
        extrapolated: 2.0 * quarter - raw,
        predicted: TAU * (rp.nu * rp.nu - rp.omega * rp.omega),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CradleOptions {
    /// Truncation of the reduced-potential evaluations.
    pub l0: usize,
    pub seed: u64,
    /// Multistart directions per fixed-space dimension.
    pub starts_per_dim: usize,
    /// Radial scan range and resolution for `∂_sΦ(s w)`.
    pub s_min: f64,
    pub s_max: f64,
    pub scan_points: usize,
    /// Convergence threshold on `‖∇Φ^H‖`.
    pub gradient_tol: f64,
    /// Residual target of the polished loop.
    pub polish_tol: f64,
    pub truncation: TruncationPolicy,
    /// Distance below which two loops in one group orbit are identified.
    pub dedupe_tol: f64,
}

impl Default for CradleOptions {
    fn default() -> Self {
        Self {
            l0: 12,
            seed: 0,
            starts_per_dim: 8,
            s_min: 1e-5,
            s_max: 2.5,
            scan_points: 48,
            gradient_tol: 1e-8,
            polish_tol: 1e-9,
            truncation: TruncationPolicy { l0_min: 12, l0_max: 128, tail_tol: 1e-8 },
            dedupe_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPoint {
    pub group: GroupLabel,
    pub nu: f64,
    /// Coordinates in the first-harmonic fixed-space basis.
    pub u: Vec<f64>,
    pub phi: f64,
    pub gradient_norm: f64,
    /// Index of the group orbit among the distinct points found.
    pub orbit_id: usize,
    /// Residual of the polished loop in `Fix(H)`.
    pub polished_residual: f64,
    pub polished_l0: usize,
    pub energy: f64,
    pub state: LoopState,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriticalPointSet {
    pub group: GroupLabel,
    pub nu: f64,
    pub omega: f64,
    /// `"below"` for `ν < ω`, `"above"` otherwise.
    pub side: &'static str,
    pub fixed_dim: usize,
    pub starts: usize,
    pub converged_starts: usize,
    pub points: Vec<CriticalPoint>,
}

impl CriticalPointSet {
    pub fn count(&self) -> usize {
        self.points.len()
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(d, (0..d).map(|_| rng.gen_range(-1.0..1.0)));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Radial bracket of a sign change of `∂_sΦ(s w)`, then damped Newton on
/// `∇Φ^H = 0`.
fn search_from(rp: &ReducedPotential, w: &DVector<f64>, opts: &CradleOptions) -> Option<(DVector<f64>, ReducedValue)> {
    let ratio = (opts.s_max / opts.s_min).powf(1.0 / (opts.scan_points - 1) as f64);
    let mut guess: Option<LoopState> = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    for i in 0..opts.scan_points {
        let s = opts.s_min * ratio.powi(i as i32);
        let Ok(val) = rp.evaluate(&(w * s), guess.as_ref()) else { break };
        let slope = val.gradient.dot(w);
        if let Some((s0, g0)) = prev {
            if g0 * slope < 0.0 {
                bracket = Some(s0 - g0 * (s - s0) / (slope - g0));
                break;
            }
        }
        prev = Some((s, slope));
        guess = Some(val.state);
    }
    let s = bracket?;
    let mut warm = guess;
    let out = newton(
        w * s,
        |u| {
            let val = rp.evaluate(u, warm.as_ref())?;
            let h = rp.hessian(&val.state)?;
            warm = Some(val.state);
            Ok((val.gradient, h))
        },
        NewtonOptions { tol: opts.gradient_tol, max_iter: 40, damped: true, blowup: 1e6 },
        "reduced Newton iteration",
    )
    .ok()?;
    if out.x.norm() < 0.1 * opts.s_min {
        return None;
    }
    let val = rp.evaluate(&out.x, warm.as_ref()).ok()?;
    (val.gradient.norm() <= opts.gradient_tol).then_some((out.x, val))
}

/// Newton on the full restricted system in `Fix(H)` at fixed `ν`, raising
/// the truncation until the tail test passes.
fn polish(model: &LatticeModel, group: &IsotropyGroup, seed: &LoopState, opts: &CradleOptions) -> Result<LoopState> {
    let mut x = seed.clone();
    let mut l0 = x.l0.max(opts.truncation.l0_min);
    loop {
        let gal = Galerkin::new(model, l0)?;
        let basis = group.fixed_space(l0, model.zero_mean_mode)?.full();
        let z0 = basis.transpose() * x.with_truncation(l0).to_real();
        let nu = x.nu;
        let out = newton(
            z0,
            |z| {
                let v = &basis * z;
                let f = gal.residual_real(v.as_slice(), nu)?;
                let lin = gal.linearize(v.as_slice())?;
                Ok((basis.transpose() * f, basis.transpose() * gal.jacobian_times(&lin, nu, &basis)))
            },
            NewtonOptions { tol: opts.polish_tol * 1e-2, max_iter: 30, ..Default::default() },
            "cradle polish",
        )?;
        x = LoopState::from_real(model.n, l0, nu, (&basis * out.x).as_slice());
        if opts.truncation.accepts(&x) {
            return Ok(x);
        }
        l0 = opts.truncation.next_after(l0).ok_or(Error::Truncation(opts.truncation.l0_max))?;
    }
}

/// All elements of `D_n × O(2)` with time shifts in multiples of `π/n`.
pub fn full_group(n: usize) -> Vec<GroupElement> {
    let mut out = Vec::with_capacity(8 * n * n);
    for flip in [false, true] {
        for rotation in 0..n as i64 {
            for shift in 0..2 * n as i64 {
                for reversal in [false, true] {
                    out.push(GroupElement::new(n, flip, rotation, shift, reversal));
                }
            }
        }
    }
    out
}

/// Whether `y` lies on the group orbit of `x` (compared at the smaller truncation).
pub fn same_orbit(x: &LoopState, y: &LoopState, parity: i8, tol: f64) -> bool {
    let l0 = x.l0.min(y.l0);
    let xv = x.with_truncation(l0).to_real();
    let yv = y.with_truncation(l0).to_real();
    let scale = xv.norm().max(yv.norm()).max(1.0);
    full_group(x.n)
        .iter()
        .any(|g| (g.act_real(parity, xv.as_slice(), l0) - &yv).norm() <= tol * scale)
}

/// Energy `H(q, p) = ‖p‖²/2 + V(q)`.
pub fn energy(model: &LatticeModel, q: &[f64], p: &[f64]) -> Result<f64> {
    model.energy(q, p)
}

/// Energy of the orbit through `q = a + x(0)`, `p = ν ẋ(0)`.
pub fn loop_energy(model: &LatticeModel, x: &LoopState) -> Result<f64> {
    let (q, p) = x.phase_point(model.a);
    model.energy(&q, &p)
}

/// Critical points of `Φ^H` at fixed `ν`, distinct modulo the group orbit,
/// each polished to a loop with residual at most `opts.polish_tol`.
pub fn critical_points(model: &LatticeModel, label: GroupLabel, nu: f64, opts: &CradleOptions) -> Result<CriticalPointSet> {
    let omega = check_cradle(model)?;
    let gap = (nu - omega).abs();
    if !(1e-3..=1e-1).contains(&gap) {
        return Err(Error::Precondition(format!("|nu - omega| = {gap:.3e} outside [1e-3, 1e-1]")));
    }
    if opts.scan_points < 2 || !(opts.s_min > 0.0 && opts.s_min < opts.s_max) {
        return Err(Error::Config("invalid radial scan".into()));
    }
    let rp = ReducedPotential::new(model, label, nu, opts.l0)?;
    let d = rp.dim();
    let starts = opts.starts_per_dim * d;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (label as u64) << 32 ^ nu.to_bits());
    let dirs: Vec<DVector<f64>> = (0..starts).map(|_| random_direction(&mut rng, d)).collect();
    let found: Vec<(DVector<f64>, ReducedValue)> =
        dirs.par_iter().filter_map(|w| search_from(&rp, w, opts)).collect();
    let converged_starts = found.len();

    let parity = rp.group.parity;
    let mut points: Vec<CriticalPoint> = Vec::new();
    for (u, val) in found {
        if points.iter().any(|p| same_orbit(&p.state, &val.state, parity, opts.dedupe_tol * 1e2)) {
            continue;
        }
        let Ok(polished) = polish(model, &rp.group, &val.state, opts) else { continue };
        if points.iter().any(|p| same_orbit(&p.state, &polished, parity, opts.dedupe_tol)) {
            continue;
        }
        let residual = Galerkin::new(model, polished.l0)?.residual(&polished)?.norm;
        if residual > opts.polish_tol {
            continue;
        }
        points.push(CriticalPoint {
            group: label,
            nu,
            u: u.iter().copied().collect(),
            phi: val.phi,
            gradient_norm: val.gradient.norm(),
            orbit_id: points.len(),
            polished_residual: residual,
            polished_l0: polished.l0,
            energy: loop_energy(model, &polished)?,
            state: polished,
        });
    }
    Ok(CriticalPointSet {
        group: label,
        nu,
        omega,
        side: if nu < omega { "below" } else { "above" },
        fixed_dim: d,
        starts,
        converged_starts,
        points,
    })
}

/// Orbits found across several searches, identified modulo the group.
pub fn distinct_orbits(sets: &[CriticalPointSet], parity: i8, tol: f64) -> usize {
    let mut reps: Vec<&LoopState> = Vec::new();
    for p in sets.iter().flat_map(|s| &s.points) {
        let dup = reps
            .iter()
            .any(|r| (r.nu - p.state.nu).abs() < 1e-14 && same_orbit(r, &p.state, parity, tol));
        if !dup {
            reps.push(&p.state);
        }
    }
    reps.len()
}
