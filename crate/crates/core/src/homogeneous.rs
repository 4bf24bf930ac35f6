//! Separable standing waves `q_j(t) = a_j q(t)` of the chain with `U = 0`
//! and the even coupling `W(x) = (2/5)|x|^{5/2}`.
//!
//! The time factor solves `−q̈ = W'(q)`; the profile solves
//! `−a_j = W'(a_{j+1} − a_j) − W'(a_j − a_{j−1})`, which with
//! `b_j = W'(a_j − a_{j−1})` is generated by the planar map
//! `φ(a, b) = (a + b|b|^{−1/3}, b − (a + b|b|^{−1/3}))`.

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::potentials::PotentialSpec;
use crate::timedomain::{dopri5, IntegratorOptions};

/// `W(x) = (2/5)|x|^{5/2}`
pub fn w(x: f64) -> f64 {
    0.4 * x.abs().powf(2.5)
}

/// `W'(x) = x|x|^{1/2}`
pub fn w_prime(x: f64) -> f64 {
    x * x.abs().sqrt()
}

/// Inverse of `W'`: `b|b|^{−1/3}`, extended by 0 at `b = 0`.
pub fn w_prime_inverse(b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        b * b.abs().powf(-1.0 / 3.0)
    }
}

/// Point `(a_{j−1}, b_j)` of the profile recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanarMapState {
    pub a: f64,
    pub b: f64,
}

impl PlanarMapState {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn radius(&self) -> f64 {
        self.a.hypot(self.b)
    }
}

pub fn planar_map(s: PlanarMapState) -> PlanarMapState {
    let a = s.a + w_prime_inverse(s.b);
    PlanarMapState { a, b: s.b - a }
}

/// Analytic Jacobian `[[1, c], [−1, 1 − c]]`, `c = (2/3)|b|^{−1/3}`.
pub fn map_jacobian(s: PlanarMapState) -> Result<[[f64; 2]; 2]> {
    if s.b == 0.0 || !s.b.is_finite() || !s.a.is_finite() {
        return Err(Error::Precondition("the map is not differentiable at b = 0".into()));
    }
    let c = 2.0 / 3.0 * s.b.abs().powf(-1.0 / 3.0);
    Ok([[1.0, c], [-1.0, 1.0 - c]])
}

pub fn map_jacobian_det(s: PlanarMapState) -> Result<f64> {
    let j = map_jacobian(s)?;
    Ok(j[0][0] * j[1][1] - j[0][1] * j[1][0])
}

/// Determinant of the Jacobian by fourth-order central differences with
/// steps relative to `|b|`.
pub fn map_jacobian_det_fd(s: PlanarMapState) -> Result<f64> {
    if s.b == 0.0 {
        return Err(Error::Precondition("the map is not differentiable at b = 0".into()));
    }
    let h = 1e-3 * s.b.abs();
    let diff = |da: f64, db: f64| -> [f64; 2] {
        let at = |t: f64| {
            let p = planar_map(PlanarMapState::new(s.a + t * da, s.b + t * db));
            [p.a, p.b]
        };
        let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
        [0, 1].map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h))
    };
    let ca = diff(1.0, 0.0);
    let cb = diff(0.0, 1.0);
    Ok(ca[0] * cb[1] - cb[0] * ca[1])
}

/// `len` iterates starting from (and including) `s`.
pub fn orbit(s: PlanarMapState, len: usize) -> Vec<PlanarMapState> {
    let mut out = Vec::with_capacity(len);
    let mut cur = s;
    for _ in 0..len {
        out.push(cur);
        cur = planar_map(cur);
    }
    out
}

/// Largest violation of `−a_j = b_{j+1} − b_j`, `a_j − a_{j−1} = b_j|b_j|^{−1/3}`
/// and `−a_j = W'(a_{j+1} − a_j) − W'(a_j − a_{j−1})` along an orbit, each
/// relative to the size of the terms involved.
pub fn recursion_defect(orbit: &[PlanarMapState]) -> f64 {
    let mut worst = 0.0f64;
    let rel = |lhs: f64, rhs: f64, scale: f64| (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE);
    // state i carries (a_{i−1}, b_i)
    for i in 1..orbit.len() {
        let (a_prev, b) = (orbit[i - 1].a, orbit[i - 1].b);
        let (a, b_next) = (orbit[i].a, orbit[i].b);
        worst = worst.max(rel(-a, b_next - b, a.abs().max(b.abs()).max(b_next.abs())));
        let d = w_prime_inverse(b);
        worst = worst.max(rel(a - a_prev, d, a.abs().max(a_prev.abs()).max(d.abs())));
        if i + 1 < orbit.len() {
            let a_next = orbit[i + 1].a;
            let (f1, f0) = (w_prime(a_next - a), w_prime(a - a_prev));
            worst = worst.max(rel(-a, f1 - f0, a.abs().max(f1.abs()).max(f0.abs())));
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub seed_a: f64,
    pub seed_b: f64,
    pub max_radius: f64,
    pub escaped: bool,
}

/// Seeds on a polar grid (`radii × angles`), each iterated `iterations`
/// times; records the largest radius reached.
pub fn orbit_scan(radii: &[f64], angles: usize, iterations: usize) -> Result<Vec<ScanRow>> {
    if iterations > 10_000_000 {
        return Err(Error::Precondition("at most 1e7 iterations".into()));
    }
    if angles == 0 {
        return Err(Error::Precondition("need at least one angle".into()));
    }
    let seeds: Vec<PlanarMapState> = radii
        .iter()
        .flat_map(|&r| {
            let count = if r == 0.0 { 1 } else { angles };
            (0..count).map(move |i| {
                let th = TAU * i as f64 / angles as f64;
                PlanarMapState::new(r * th.cos(), r * th.sin())
            })
        })
        .collect();
    Ok(seeds
        .par_iter()
        .map(|&seed| {
            let mut cur = seed;
            let mut max_radius = seed.radius();
            let mut escaped = false;
            for _ in 0..iterations {
                cur = planar_map(cur);
                let r = cur.radius();
                if !r.is_finite() || r > 1e150 {
                    escaped = true;
                    break;
                }
                max_radius = max_radius.max(r);
            }
            ScanRow { seed_a: seed.a, seed_b: seed.b, max_radius, escaped }
        })
        .collect())
}

/// `q_max = (5E/2)^{2/5}`, the turning point of `−q̈ = W'(q)` at energy `E`.
pub fn turning_point(energy: f64) -> Result<f64> {
    if !(energy > 0.0) || !energy.is_finite() {
        return Err(Error::Precondition(format!("energy must be positive, got {energy}")));
    }
    Ok((2.5 * energy).powf(0.4))
}

/// `∫₀¹ (1 − y^{5/2})^{−1/2} dy` after `y = (1 − v²)²`, which leaves the
/// smooth integrand `4(1 − v²)/√P(v²)` with `1 − (1 − s)^5 = s P(s)`.
fn period_integral() -> f64 {
    let f = |v: f64| {
        let s = v * v;
        let p = 5.0 - 10.0 * s + 10.0 * s * s - 5.0 * s.powi(3) + s.powi(4);
        4.0 * (1.0 - s) / p.sqrt()
    };
    adaptive_simpson(&f, 0.0, 1.0, 1e-15, 50)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// `T(E) = 4∫₀^{q_max} dq / √(2(E − W(q)))`.
pub fn scalar_period(energy: f64) -> Result<f64> {
    let q_max = turning_point(energy)?;
    // q = q_max y turns the integral into q_max / √(2E) times a constant
    Ok(4.0 * q_max / (2.0 * energy).sqrt() * period_integral())
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalarOrbit {
    pub energy: f64,
    pub period: f64,
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    /// `max |q̇²/2 + W(q) − E| / E` over the samples.
    pub energy_drift: f64,
    /// `|q(T) − q(0)| + |q̇(T) − q̇(0)|` after integrating over the quadrature period.
    pub return_distance: f64,
}

/// Samples one period of `−q̈ = W'(q)` from `q(0) = q_max`, `q̇(0) = 0`.
pub fn scalar_orbit(energy: f64, samples: usize, opts: &IntegratorOptions) -> Result<ScalarOrbit> {
    if samples == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let q_max = turning_point(energy)?;
    let period = scalar_period(energy)?;
    let times: Vec<f64> = (0..=samples).map(|i| period * i as f64 / samples as f64).collect();
    let ys = dopri5(
        |_, y, dy| {
            dy[0] = y[1];
            dy[1] = -w_prime(y[0]);
        },
        &[q_max, 0.0],
        &times,
        opts,
    )?;
    let q: Vec<f64> = ys.iter().map(|y| y[0]).collect();
    let qdot: Vec<f64> = ys.iter().map(|y| y[1]).collect();
    let energy_drift = q
        .iter()
        .zip(&qdot)
        .map(|(x, v)| (0.5 * v * v + w(*x) - energy).abs() / energy)
        .fold(0.0, f64::max);
    let last = ys.last().unwrap();
    let return_distance = (last[0] - q_max).abs() + last[1].abs();
    Ok(ScalarOrbit { energy, period, times, q, qdot, energy_drift, return_distance })
}

/// Checks that a model is the homogeneous chain this module describes:
/// no on-site term and the Hertz-type coupling.
pub fn check_model(model: &LatticeModel) -> Result<()> {
    if model.onsite != PotentialSpec::Zero || model.coupling != PotentialSpec::Hertz {
        return Err(Error::Precondition(
            "separable standing waves need U = 0 and a homogeneous degree-5/2 coupling".into(),
        ));
    }
    Ok(())
}

/// The separable standing wave `q_j(t) = a_j q(t)` evaluated on the samples
/// of a scalar orbit.
pub fn separable_wave(profile: &[f64], orbit: &ScalarOrbit) -> Vec<Vec<f64>> {
    orbit.q.iter().map(|qt| profile.iter().map(|a| a * qt).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_examples() {
        assert_eq!(planar_map(PlanarMapState::new(0.7, 0.0)), PlanarMapState::new(0.7, -0.7));
        assert_eq!(planar_map(PlanarMapState::new(0.0, 1.0)), PlanarMapState::new(1.0, 0.0));
        let p = planar_map(PlanarMapState::new(0.0, -8.0));
        assert!((p.a + 4.0).abs() < 1e-14 && (p.b + 4.0).abs() < 1e-14);
    }

    #[test]
    fn jacobian_determinant() {
        for (a, b) in [(0.3, 1.7), (1.0, -2.0), (-0.2, 1e-3)] {
            let s = PlanarMapState::new(a, b);
            assert!((map_jacobian_det(s).unwrap() - 1.0).abs() < 1e-14);
            assert!((map_jacobian_det_fd(s).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(map_jacobian_det(PlanarMapState::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn orbits_solve_the_recursion() {
        let o = orbit(PlanarMapState::new(0.1, 0.05), 200);
        assert!(recursion_defect(&o) < 1e-12);
    }

    #[test]
    fn origin_is_fixed() {
        let rows = orbit_scan(&[0.0], 4, 1000).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].max_radius, 0.0);
        assert!(orbit_scan(&[1.0], 4, 10_000_001).is_err());
    }

    #[test]
    fn period_integral_matches_beta_function() {
        // (2/5) B(2/5, 1/2) = (2/5) Γ(2/5) Γ(1/2) / Γ(9/10)
        let gamma_2_5 = 2.218_159_543_757_688;
        let gamma_9_10 = 1.068_628_702_119_319_4;
        let exact = 0.4 * gamma_2_5 * std::f64::consts::PI.sqrt() / gamma_9_10;
        assert!((period_integral() - exact).abs() < 1e-12, "{}", period_integral());
    }

    #[test]
    fn period_scaling_and_turning_point() {
        assert!((turning_point(0.4).unwrap() - 1.0).abs() < 1e-15);
        let ratio = scalar_period(32.0).unwrap() / scalar_period(1.0).unwrap();
        assert!((ratio - 32f64.powf(-0.1)).abs() < 1e-12);
        assert!(scalar_period(0.0).is_err());
    }

    #[test]
    fn integrated_period_matches_quadrature() {
        let orb = scalar_orbit(1.0, 64, &IntegratorOptions::with_tol(1e-12)).unwrap();
        assert!(orb.return_distance < 1e-8, "{}", orb.return_distance);
        assert!(orb.energy_drift < 1e-9);
    }
}
