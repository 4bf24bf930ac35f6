//! On-site (`U`) and nearest-neighbour coupling (`W`) potentials.
//!
//! Every family exposes its value and first two derivatives at any real
//! argument. The Hertz contact law is one-sided: it only acts under
//! compression (`x <= 0`) and its second derivative at the origin is the
//! one-sided limit `0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which slot of the lattice a potential occupies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Onsite,
    Coupling,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::Onsite => "onsite",
            Role::Coupling => "coupling",
        }
    }
}

/// A potential family together with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `ω²(1 − cos x)`
    Pendulum { omega: f64 },
    /// `x²/2`
    Harmonic,
    /// `(2/5)|x|^{5/2}` for `x <= 0`, zero otherwise.
    Hertz,
    /// `x²/2 + βx³/3`
    Fpu { beta: f64 },
    /// `e^{−x} + x − 1`
    Toda,
    /// `ω²(1 − x²)²/4`
    Bistable { omega: f64 },
    /// `Σ c_i x^i`, coefficient `i` multiplies `x^i`.
    Polynomial { coefficients: Vec<f64> },
    Zero,
}

impl PotentialSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            PotentialSpec::Pendulum { .. } => "pendulum",
            PotentialSpec::Harmonic => "harmonic",
            PotentialSpec::Hertz => "hertz",
            PotentialSpec::Fpu { .. } => "fpu",
            PotentialSpec::Toda => "toda",
            PotentialSpec::Bistable { .. } => "bistable",
            PotentialSpec::Polynomial { .. } => "polynomial",
            PotentialSpec::Zero => "zero",
        }
    }

    /// Checks that the family may occupy `role` and that its parameters are finite.
    pub fn validate(&self, role: Role) -> Result<()> {
        let forbidden = match (self, role) {
            (PotentialSpec::Hertz, Role::Onsite) => true,
            (PotentialSpec::Pendulum { .. } | PotentialSpec::Bistable { .. }, Role::Coupling) => {
                true
            }
            _ => false,
        };
        if forbidden {
            return Err(Error::PotentialRole {
                family: self.family_name(),
                role: role.name(),
            });
        }
        let finite = match self {
            PotentialSpec::Pendulum { omega } | PotentialSpec::Bistable { omega } => {
                omega.is_finite()
            }
            PotentialSpec::Fpu { beta } => beta.is_finite(),
            PotentialSpec::Polynomial { coefficients } => coefficients.iter().all(|c| c.is_finite()),
            _ => true,
        };
        if !finite {
            return Err(Error::Config(format!(
                "non-finite parameter for {} potential",
                self.family_name()
            )));
        }
        Ok(())
    }

    /// Evaluates the potential (`order = 0`) or one of its first two derivatives.
    pub fn eval(&self, order: u8, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite("potential argument"));
        }
        let v = match order {
            0 => self.value(x),
            1 => self.d1(x),
            2 => self.d2(x),
            _ => {
                return Err(Error::Precondition(format!(
                    "derivative order {order} not supported (0, 1 or 2)"
                )))
            }
        };
        Ok(v)
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Pendulum { omega } => {
                // 1 − cos x without cancellation at small amplitude
                let h = (0.5 * x).sin();
                2.0 * omega * omega * h * h
            }
            PotentialSpec::Harmonic => 0.5 * x * x,
            PotentialSpec::Hertz => {
                if x <= 0.0 {
                    0.4 * (-x).powf(2.5)
                } else {
                    0.0
                }
            }
            PotentialSpec::Fpu { beta } => 0.5 * x * x + beta * x * x * x / 3.0,
            PotentialSpec::Toda => {
                if x.abs() < 1e-2 {
                    // x²/2 − x³/6 + x⁴/24 − …
                    let mut term = x * x / 2.0;
                    let mut sum = 0.0;
                    for i in 3..12 {
                        sum += term;
                        term *= -x / i as f64;
                    }
                    sum
                } else {
                    (-x).exp_m1() + x
                }
            }
            PotentialSpec::Bistable { omega } => {
                let s = 1.0 - x * x;
                omega * omega * s * s / 4.0
            }
            PotentialSpec::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            PotentialSpec::Zero => 0.0,
        }
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Pendulum { omega } => omega * omega * x.sin(),
            PotentialSpec::Harmonic => x,
            PotentialSpec::Hertz => {
                if x <= 0.0 {
                    -(-x).powf(1.5)
                } else {
                    0.0
                }
            }
            PotentialSpec::Fpu { beta } => x + beta * x * x,
            PotentialSpec::Toda => -(-x).exp_m1(),
            PotentialSpec::Bistable { omega } => omega * omega * x * (x * x - 1.0),
            PotentialSpec::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + i as f64 * c),
            PotentialSpec::Zero => 0.0,
        }
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Pendulum { omega } => omega * omega * x.cos(),
            PotentialSpec::Harmonic => 1.0,
            PotentialSpec::Hertz => {
                if x <= 0.0 {
                    1.5 * (-x).sqrt()
                } else {
                    0.0
                }
            }
            PotentialSpec::Fpu { beta } => 1.0 + 2.0 * beta * x,
            PotentialSpec::Toda => (-x).exp(),
            PotentialSpec::Bistable { omega } => omega * omega * (3.0 * x * x - 1.0),
            PotentialSpec::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, c)| acc * x + (i * (i - 1)) as f64 * c),
            PotentialSpec::Zero => 0.0,
        }
    }
}

/// A homogeneous equilibrium `q_j = a` of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub a: f64,
    /// `|U'(a)|` at the returned point.
    pub residual: f64,
}

pub const EQUILIBRIUM_TOL: f64 = 1e-12;
const EQUILIBRIUM_MAX_ITER: usize = 50;

/// Scalar Newton iteration on `U'(a) = 0` started at `seed`.
pub fn find_equilibrium(onsite: &PotentialSpec, seed: f64) -> Result<Equilibrium> {
    if matches!(onsite, PotentialSpec::Zero) {
        return Ok(Equilibrium { a: 0.0, residual: 0.0 });
    }
    if !seed.is_finite() {
        return Err(Error::NonFinite("equilibrium seed"));
    }
    let mut a = seed;
    for _ in 0..EQUILIBRIUM_MAX_ITER {
        let g = onsite.d1(a);
        if g.abs() <= EQUILIBRIUM_TOL {
            return Ok(Equilibrium { a, residual: g.abs() });
        }
        let h = onsite.d2(a);
        if h == 0.0 || !h.is_finite() {
            break;
        }
        a -= g / h;
        if !a.is_finite() {
            break;
        }
    }
    let residual = onsite.d1(a).abs();
    if residual <= EQUILIBRIUM_TOL {
        return Ok(Equilibrium { a, residual });
    }
    Err(Error::NoConvergence {
        what: "equilibrium Newton iteration",
        iterations: EQUILIBRIUM_MAX_ITER,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn families() -> Vec<PotentialSpec> {
        vec![
            PotentialSpec::Pendulum { omega: 1.3 },
            PotentialSpec::Harmonic,
            PotentialSpec::Hertz,
            PotentialSpec::Fpu { beta: 0.7 },
            PotentialSpec::Toda,
            PotentialSpec::Bistable { omega: 0.8 },
            PotentialSpec::Polynomial { coefficients: vec![0.0, 0.0, 1.0, 1.0] },
            PotentialSpec::Zero,
        ]
    }

    #[test]
    fn documented_values() {
        let pend = PotentialSpec::Pendulum { omega: 1.0 };
        assert_eq!(pend.eval(2, 0.0).unwrap(), 1.0);
        assert_eq!(PotentialSpec::Hertz.eval(2, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(PotentialSpec::Hertz.eval(1, -1.0).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(PotentialSpec::Toda.eval(2, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(PotentialSpec::Harmonic.eval(3, 0.0).is_err());
        assert!(PotentialSpec::Harmonic.eval(0, f64::NAN).is_err());
        assert!(PotentialSpec::Hertz.validate(Role::Onsite).is_err());
        assert!(PotentialSpec::Pendulum { omega: 1.0 }.validate(Role::Coupling).is_err());
        assert!(PotentialSpec::Bistable { omega: 1.0 }.validate(Role::Coupling).is_err());
        assert!(PotentialSpec::Hertz.validate(Role::Coupling).is_ok());
    }

    #[test]
    fn hertz_is_one_sided() {
        for x in [1e-9, 0.3, 2.0, 1e3] {
            for k in 0..=2 {
                assert_eq!(PotentialSpec::Hertz.eval(k, x).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn convex_couplings() {
        for spec in [PotentialSpec::Harmonic, PotentialSpec::Toda, PotentialSpec::Hertz] {
            for i in -200..=200 {
                let x = i as f64 * 0.02;
                assert!(spec.d2(x) >= 0.0, "{} not convex at {x}", spec.family_name());
            }
        }
    }

    #[test]
    fn equilibria() {
        let pend = PotentialSpec::Pendulum { omega: 1.0 };
        assert_abs_diff_eq!(find_equilibrium(&pend, 0.1).unwrap().a, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(find_equilibrium(&pend, 3.0).unwrap().a, PI, epsilon = 1e-12);
        let bi = PotentialSpec::Bistable { omega: 1.0 };
        assert_abs_diff_eq!(find_equilibrium(&bi, 0.9).unwrap().a, 1.0, epsilon = 1e-12);
        assert_eq!(find_equilibrium(&PotentialSpec::Zero, 5.0).unwrap().a, 0.0);
        // U' = 1 everywhere has no root.
        let lin = PotentialSpec::Polynomial { coefficients: vec![0.0, 1.0] };
        assert!(matches!(
            find_equilibrium(&lin, 0.0),
            Err(Error::NoConvergence { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn derivatives_match_finite_differences(x in -2.0f64..2.0) {
            let h = 1e-5;
            for spec in families() {
                if matches!(spec, PotentialSpec::Hertz) && x.abs() < 1e-3 {
                    continue;
                }
                let fd1 = (spec.value(x + h) - spec.value(x - h)) / (2.0 * h);
                let d1 = spec.d1(x);
                prop_assert!((fd1 - d1).abs() <= 1e-6 * (1.0 + d1.abs()),
                    "{}: d1 {d1} vs fd {fd1} at {x}", spec.family_name());
                let fd2 = (spec.d1(x + h) - spec.d1(x - h)) / (2.0 * h);
                let d2 = spec.d2(x);
                prop_assert!((fd2 - d2).abs() <= 1e-6 * (1.0 + d2.abs()),
                    "{}: d2 {d2} vs fd {fd2} at {x}", spec.family_name());
            }
        }
    }
}
