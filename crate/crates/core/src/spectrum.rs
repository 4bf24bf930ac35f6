//! Linear frequencies `ν_k` of the chain about its homogeneous equilibrium,
//! resonance detection and the resonant parameter values `ω_l(j)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{circulant_eigenvalue, LatticeModel};

/// Absolute tolerance used when comparing frequencies.
pub const RESONANCE_TOL: f64 = 1e-9;
/// `ν_k²` within this distance of zero counts as a boundary mode.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionEntry {
    pub k: usize,
    pub nu_sq: f64,
    /// `√ν_k²` when positive, `NaN` otherwise.
    pub nu: f64,
    pub bifurcating: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispersionTable {
    pub n: usize,
    /// Entries for `k = 1..=⌊n/2⌋` followed by `k = n`.
    pub entries: Vec<DispersionEntry>,
    /// `W''(0) = 0`: every `ν_k` coincides.
    pub all_equal: bool,
}

impl DispersionTable {
    pub fn entry(&self, k: usize) -> Option<&DispersionEntry> {
        self.entries.iter().find(|e| e.k == k)
    }
}

/// `ν_k² = U''(a) + (2 sin kπ/n)² W''(0)`.
pub fn nu_squared(model: &LatticeModel, k: usize) -> f64 {
    model.onsite_curvature() + circulant_eigenvalue(model.n, k) * model.coupling_curvature()
}

pub fn dispersion(model: &LatticeModel) -> DispersionTable {
    let n = model.n;
    let entries = (1..=n / 2)
        .chain(std::iter::once(n))
        .map(|k| {
            let nu_sq = nu_squared(model, k);
            let bifurcating = nu_sq > BOUNDARY_TOL;
            DispersionEntry {
                k,
                nu_sq,
                nu: if nu_sq > 0.0 { nu_sq.sqrt() } else { f64::NAN },
                bifurcating,
            }
        })
        .collect();
    DispersionTable { n, entries, all_equal: model.coupling_curvature() == 0.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonantPair {
    pub l: usize,
    pub j: usize,
    pub nu_j: f64,
    pub l_nu_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub k: usize,
    pub resonant_pairs: Vec<ResonantPair>,
    /// `ω_l(j)` for every `(l, j)` examined, as `(l, j, ω_l(j))`.
    pub resonance_parameters: Vec<(usize, usize, f64)>,
    pub non_resonant: bool,
    /// All frequencies coincide; the non-resonance test does not apply.
    pub all_equal: bool,
}

/// Checks `lν_k ≠ ν_j` for `l >= 2` and `j ∈ (k, n/2]`.
///
/// `k = n` is treated as the in-phase mode `k = 0`. The search over `l`
/// stops at `l_max` or as soon as `lν_k` exceeds every `ν_j`.
pub fn non_resonance_check(model: &LatticeModel, k: usize, l_max: usize) -> Result<ResonanceReport> {
    let n = model.n;
    if k == 0 || k > n {
        return Err(Error::Precondition(format!("mode k = {k} outside 1..={n}")));
    }
    if l_max < 2 {
        return Err(Error::Precondition("l_max must be at least 2".into()));
    }
    let all_equal = model.coupling_curvature() == 0.0;
    let k_eff = if k == n { 0 } else { k };
    let nu_k_sq = nu_squared(model, k);
    if nu_k_sq <= 0.0 {
        return Err(Error::Precondition(format!("nu_{k}^2 = {nu_k_sq} is not positive")));
    }
    let nu_k = nu_k_sq.sqrt();
    let mut report = ResonanceReport {
        k,
        resonant_pairs: Vec::new(),
        resonance_parameters: Vec::new(),
        non_resonant: true,
        all_equal,
    };
    if all_equal {
        report.non_resonant = false;
        return Ok(report);
    }
    let partners: Vec<(usize, f64)> = ((k_eff + 1)..=n / 2)
        .filter_map(|j| {
            let s = nu_squared(model, j);
            (s > 0.0).then(|| (j, s.sqrt()))
        })
        .collect();
    let nu_max = partners.iter().map(|p| p.1).fold(0.0, f64::max);
    for l in 2..=l_max {
        let l_nu = l as f64 * nu_k;
        if l_nu > nu_max + RESONANCE_TOL {
            break;
        }
        for &(j, nu_j) in &partners {
            if j != k_eff {
                report
                    .resonance_parameters
                    .push((l, j, resonance_parameter(n, k_eff, j, l)?));
            }
            if (l_nu - nu_j).abs() <= RESONANCE_TOL {
                report.resonant_pairs.push(ResonantPair { l, j, nu_j, l_nu_k: l_nu });
            }
        }
    }
    report.non_resonant = report.resonant_pairs.is_empty();
    Ok(report)
}

/// `ω_l(j) = −[(2 sin kπ/n)² − (2 sin jπ/n)²/l²] / (1 − 1/l²)`.
///
/// With unit coupling curvature, `U''(a) = ω_l(j)` is exactly the condition
/// `lν_k = ν_j`.
pub fn resonance_parameter(n: usize, k: usize, j: usize, l: usize) -> Result<f64> {
    if l < 2 {
        return Err(Error::Precondition(format!("l = {l}: resonance parameters need l >= 2")));
    }
    if j % n == k % n {
        return Err(Error::Precondition("resonance parameters need j != k".into()));
    }
    let l2 = (l * l) as f64;
    let sk = circulant_eigenvalue(n, k);
    let sj = circulant_eigenvalue(n, j);
    Ok(-(sk - sj / l2) / (1.0 - 1.0 / l2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Smallest mode with `ν_k² > 0`, if any.
    pub k0: Option<usize>,
    /// Modes with `ν_k² = 0` to within [`BOUNDARY_TOL`].
    pub boundary_modes: Vec<usize>,
    /// `(n/π) arcsin(ω/2)`, the continuum estimate of the threshold.
    pub asymptotic: f64,
}

/// First bifurcating mode for a concave on-site potential (pendulum at `a = π`).
pub fn k0_threshold(model: &LatticeModel) -> Result<Threshold> {
    let curvature = model.onsite_curvature();
    if curvature >= 0.0 {
        return Err(Error::Precondition(
            "k0 threshold needs a concave on-site potential at the equilibrium".into(),
        ));
    }
    let n = model.n;
    let mut boundary_modes = Vec::new();
    let mut k0 = None;
    for k in 1..=n / 2 {
        let s = nu_squared(model, k);
        if s.abs() <= BOUNDARY_TOL {
            boundary_modes.push(k);
        } else if s > 0.0 && k0.is_none() {
            k0 = Some(k);
        }
    }
    let omega = (-curvature / model.coupling_curvature().max(f64::MIN_POSITIVE)).sqrt();
    let asymptotic = if omega < 2.0 { n as f64 / PI * (omega / 2.0).asin() } else { f64::NAN };
    Ok(Threshold { k0, boundary_modes, asymptotic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::PotentialSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pendulum_pi(n: usize, omega: f64) -> LatticeModel {
        LatticeModel::with_equilibrium(
            n,
            PotentialSpec::Pendulum { omega },
            PotentialSpec::Harmonic,
            PI,
            false,
        )
        .unwrap()
    }

    #[test]
    fn pendulum_dispersion() {
        let t = dispersion(&LatticeModel::pendulum(6, 1.0).unwrap());
        assert_abs_diff_eq!(t.entry(1).unwrap().nu, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.entry(2).unwrap().nu, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.entry(3).unwrap().nu, 5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(t.entry(6).unwrap().nu, 1.0, epsilon = 1e-12);
        assert!(!t.all_equal);
    }

    #[test]
    fn cradle_dispersion_is_flat() {
        for n in 3..=9 {
            let t = dispersion(&LatticeModel::cradle(n, 1.0).unwrap());
            assert!(t.all_equal);
            assert!(t.entries.iter().all(|e| e.nu == 1.0));
        }
    }

    #[test]
    fn fpu_dispersion() {
        let t = dispersion(&LatticeModel::fpu(6, 1.0).unwrap());
        assert_abs_diff_eq!(t.entry(1).unwrap().nu, 1.0, epsilon = 1e-12);
        assert!(!t.entry(6).unwrap().bifurcating);
    }

    #[test]
    fn monotone_when_coupled() {
        for n in 3..=20 {
            let t = dispersion(&LatticeModel::pendulum(n, 0.5).unwrap());
            let nus: Vec<f64> =
                t.entries.iter().filter(|e| e.k != n).map(|e| e.nu_sq).collect();
            assert!(nus.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn resonance_examples() {
        let pend = LatticeModel::pendulum(6, 1.0).unwrap();
        let r = non_resonance_check(&pend, 1, 10).unwrap();
        assert!(r.non_resonant);

        let fpu = LatticeModel::fpu(6, 1.0).unwrap();
        let r = non_resonance_check(&fpu, 1, 10).unwrap();
        assert!(!r.non_resonant);
        assert_eq!(r.resonant_pairs.len(), 1);
        let pair = &r.resonant_pairs[0];
        assert_eq!((pair.l, pair.j), (2, 3));
        assert_abs_diff_eq!(pair.nu_j, 2.0, epsilon = 1e-12);

        let cradle = LatticeModel::cradle(5, 1.0).unwrap();
        let r = non_resonance_check(&cradle, 1, 10).unwrap();
        assert!(r.all_equal && !r.non_resonant);
    }

    #[test]
    fn resonance_parameter_examples() {
        assert_abs_diff_eq!(resonance_parameter(4, 1, 2, 2).unwrap(), -4.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(resonance_parameter(6, 1, 3, 2).unwrap(), 0.0, epsilon = 1e-12);
        assert!(resonance_parameter(6, 2, 2, 3).is_err());
        assert!(resonance_parameter(6, 1, 2, 1).is_err());
    }

    #[test]
    fn resonance_parameter_large_l_limit() {
        // −ω_l(j) → (2 sin kπ/n)² as l → ∞
        let (n, k, j) = (7, 1, 3);
        let limit = circulant_eigenvalue(n, k);
        let mut prev = f64::INFINITY;
        for l in [10usize, 100, 1000, 10_000] {
            let gap = (-resonance_parameter(n, k, j, l).unwrap() - limit).abs();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn thresholds() {
        let t = k0_threshold(&pendulum_pi(12, 1.0)).unwrap();
        assert_eq!(t.k0, Some(3));
        assert_eq!(t.boundary_modes, vec![2]);
        assert_abs_diff_eq!(t.asymptotic, 2.0, epsilon = 1e-12);
        assert_eq!(k0_threshold(&pendulum_pi(6, 0.1)).unwrap().k0, Some(1));
        assert_eq!(k0_threshold(&pendulum_pi(4, 1.99)).unwrap().k0, Some(2));
        assert_eq!(k0_threshold(&pendulum_pi(4, 2.5)).unwrap().k0, None);
        assert!(k0_threshold(&LatticeModel::pendulum(4, 1.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn verdict_agrees_with_resonance_parameters(
            omega in 0.05f64..3.0, n in 3usize..14, k_pick in 0usize..7
        ) {
            let model = LatticeModel::pendulum(n, omega).unwrap();
            let k = 1 + k_pick % (n / 2);
            let report = non_resonance_check(&model, k, 64).unwrap();
            let u2 = model.onsite_curvature();
            let mut near_tie = false;
            let mut via_params = true;
            for l in 2..=64usize {
                for j in (k + 1)..=n / 2 {
                    let w = resonance_parameter(n, k, j, l).unwrap();
                    let gap = (u2 - w).abs();
                    if gap <= 1e-9 { via_params = false; }
                    if gap > 1e-9 && gap < 1e-6 { near_tie = true; }
                }
            }
            prop_assume!(!near_tie);
            prop_assert_eq!(report.non_resonant, via_params);
        }
    }
}
