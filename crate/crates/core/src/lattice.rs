//! The cyclic chain `−q̈ = ∇V(q)` with `V(q) = Σ_j [U(q_j) + W(q_j − q_{j−1})]`.
//!
//! Oscillator `j` is stored at index `j mod n`, so oscillator `n` lives at
//! index `0` and the cyclic shift `j ↦ j + 1` and reflection `j ↦ −j` are
//! plain modular arithmetic on storage indices.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::{find_equilibrium, PotentialSpec, Role, EQUILIBRIUM_TOL};

/// Largest ring for which dense matrices are materialised.
pub const DENSE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    pub n: usize,
    pub onsite: PotentialSpec,
    pub coupling: PotentialSpec,
    /// Homogeneous equilibrium coordinate.
    pub a: f64,
    /// Restrict every loop to `Σ_j x_j = 0` (meant for `U = 0`).
    pub zero_mean_mode: bool,
}

impl LatticeModel {
    /// Builds the model, locating the equilibrium from `seed`.
    pub fn new(
        n: usize,
        onsite: PotentialSpec,
        coupling: PotentialSpec,
        seed: f64,
        zero_mean_mode: bool,
    ) -> Result<Self> {
        let eq = find_equilibrium(&onsite, seed)?;
        Self::with_equilibrium(n, onsite, coupling, eq.a, zero_mean_mode)
    }

    /// Builds the model around a known equilibrium `a`.
    pub fn with_equilibrium(
        n: usize,
        onsite: PotentialSpec,
        coupling: PotentialSpec,
        a: f64,
        zero_mean_mode: bool,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("ring size n = {n} must be at least 3")));
        }
        onsite.validate(Role::Onsite)?;
        coupling.validate(Role::Coupling)?;
        if coupling.d1(0.0).abs() > EQUILIBRIUM_TOL {
            return Err(Error::Config(format!(
                "coupling W'(0) = {} must vanish for a homogeneous equilibrium",
                coupling.d1(0.0)
            )));
        }
        if onsite.d1(a).abs() > EQUILIBRIUM_TOL {
            return Err(Error::Config(format!(
                "a = {a} is not an equilibrium: U'(a) = {}",
                onsite.d1(a)
            )));
        }
        Ok(Self { n, onsite, coupling, a, zero_mean_mode })
    }

    /// Pendulum chain with linear (Hooke) torsion coupling.
    pub fn pendulum(n: usize, omega: f64) -> Result<Self> {
        Self::with_equilibrium(
            n,
            PotentialSpec::Pendulum { omega },
            PotentialSpec::Harmonic,
            0.0,
            false,
        )
    }

    /// Newton's cradle: pendula with one-sided Hertz contacts.
    pub fn cradle(n: usize, omega: f64) -> Result<Self> {
        Self::with_equilibrium(n, PotentialSpec::Pendulum { omega }, PotentialSpec::Hertz, 0.0, false)
    }

    /// FPU chain `U = 0`, `W = x²/2 + βx³/3`, restricted to zero-mean loops.
    pub fn fpu(n: usize, beta: f64) -> Result<Self> {
        Self::with_equilibrium(n, PotentialSpec::Zero, PotentialSpec::Fpu { beta }, 0.0, true)
    }

    /// Sign `s` such that `x_j ↦ s·x_{−j}` leaves `V(a + x)` invariant.
    ///
    /// `+1` when `W` is even. A one-sided or asymmetric coupling (Hertz,
    /// FPU, Toda) still admits the reflection combined with `x ↦ −x`
    /// provided `U` is even about `a`; then the sign is `−1`. `None` means
    /// the ring reflection is not a symmetry of the model.
    pub fn reflection_parity(&self) -> Option<i8> {
        const PROBES: [f64; 5] = [0.05, 0.3, 0.71, 1.3, 2.2];
        let same = |f: &dyn Fn(f64) -> f64| {
            PROBES.iter().all(|&x| {
                let (p, m) = (f(x), f(-x));
                (p - m).abs() <= 1e-12 * (1.0 + p.abs().max(m.abs()))
            })
        };
        if same(&|x| self.coupling.value(x)) {
            Some(1)
        } else if same(&|x| self.onsite.value(self.a + x)) {
            Some(-1)
        } else {
            None
        }
    }

    /// `U''(a)`
    pub fn onsite_curvature(&self) -> f64 {
        self.onsite.d2(self.a)
    }

    /// `W''(0)`
    pub fn coupling_curvature(&self) -> f64 {
        self.coupling.d2(0.0)
    }

    #[inline]
    fn prev(&self, j: usize) -> usize {
        (j + self.n - 1) % self.n
    }

    #[inline]
    fn next(&self, j: usize) -> usize {
        (j + 1) % self.n
    }

    fn check(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n {
            return Err(Error::Precondition(format!(
                "state has length {}, expected {}",
                q.len(),
                self.n
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("lattice state"));
        }
        Ok(())
    }

    /// `V(q)`
    pub fn potential(&self, q: &[f64]) -> Result<f64> {
        self.check(q)?;
        Ok(self.potential_unchecked(q))
    }

    pub(crate) fn potential_unchecked(&self, q: &[f64]) -> f64 {
        (0..self.n)
            .map(|j| self.onsite.value(q[j]) + self.coupling.value(q[j] - q[self.prev(j)]))
            .sum()
    }

    /// `∇V(q)`, the right-hand side of `−q̈ = ∇V(q)`.
    pub fn grad_v(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check(q)?;
        let mut out = vec![0.0; self.n];
        self.grad_v_into(q, &mut out);
        Ok(out)
    }

    /// Component `j` is `U'(q_j) + W'(q_j − q_{j−1}) − W'(q_{j+1} − q_j)`.
    pub(crate) fn grad_v_into(&self, q: &[f64], out: &mut [f64]) {
        let n = self.n;
        // force[j] = W'(q_j − q_{j−1}) is shared by neighbours j and j−1
        let mut back = self.coupling.d1(q[0] - q[n - 1]);
        let first = back;
        for j in 0..n {
            let fwd = if j + 1 == n { first } else { self.coupling.d1(q[j + 1] - q[j]) };
            out[j] = self.onsite.d1(q[j]) + back - fwd;
            back = fwd;
        }
    }

    /// Dense analytic Hessian `D²V(q)`.
    pub fn hessian_v(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check(q)?;
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let w_back = self.coupling.d2(q[j] - q[self.prev(j)]);
            let w_fwd = self.coupling.d2(q[self.next(j)] - q[j]);
            h[(j, j)] += self.onsite.d2(q[j]) + w_back + w_fwd;
            h[(j, self.next(j))] -= w_fwd;
            h[(j, self.prev(j))] -= w_back;
        }
        Ok(h)
    }

    /// Fills `diag[j] = U''(q_j)` and `bond[j] = W''(q_j − q_{j−1})`, the
    /// data needed to apply `D²V(q)` as a stencil.
    pub(crate) fn hessian_stencil(&self, q: &[f64], diag: &mut [f64], bond: &mut [f64]) {
        for j in 0..self.n {
            diag[j] = self.onsite.d2(q[j]);
            bond[j] = self.coupling.d2(q[j] - q[self.prev(j)]);
        }
    }

    /// `D²V(a·𝟙)`
    pub fn hessian_at_equilibrium(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut h = DMatrix::identity(n, n) * self.onsite_curvature();
        if n <= DENSE_LIMIT {
            h += second_difference_matrix(n) * self.coupling_curvature();
        }
        h
    }

    /// Total energy `‖p‖²/2 + V(q)`.
    pub fn energy(&self, q: &[f64], p: &[f64]) -> Result<f64> {
        self.check(q)?;
        self.check(p)?;
        Ok(0.5 * p.iter().map(|v| v * v).sum::<f64>() + self.potential_unchecked(q))
    }
}

/// Applies the stencil Hessian produced by [`LatticeModel::hessian_stencil`].
pub(crate) fn apply_stencil(diag: &[f64], bond: &[f64], y: &[f64], out: &mut [f64]) {
    let n = y.len();
    for j in 0..n {
        let p = (j + n - 1) % n;
        let q = (j + 1) % n;
        out[j] = diag[j] * y[j] + bond[j] * (y[j] - y[p]) - bond[q] * (y[q] - y[j]);
    }
}

/// The cyclic second-difference matrix `A`: 2 on the diagonal, −1 on the
/// cyclic off-diagonals.
pub fn second_difference_matrix(n: usize) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(j, j)] = 2.0;
        a[(j, (j + 1) % n)] -= 1.0;
        a[(j, (j + n - 1) % n)] -= 1.0;
    }
    a
}

/// `4 sin²(kπ/n)`, the eigenvalue of `A` on the Fourier mode `e_k`.
pub fn circulant_eigenvalue(n: usize, k: usize) -> f64 {
    let s = 2.0 * (k as f64 * PI / n as f64).sin();
    s * s
}

/// Discrete Fourier basis `e_k` of `ℂⁿ`, which diagonalises `A`.
#[derive(Clone, Debug)]
pub struct CirculantBasis {
    pub n: usize,
    /// `vectors[k − 1]` is `e_k`, `k = 1..=n`.
    pub vectors: Vec<Vec<Complex64>>,
    /// `eigenvalues[k − 1] = 4 sin²(kπ/n)`.
    pub eigenvalues: Vec<f64>,
}

/// Entry `j` of `e_k`, `n^{−1/2} e^{ijkζ}` with `ζ = 2π/n`.
#[inline]
pub fn mode_entry(n: usize, k: usize, j: usize) -> Complex64 {
    let phase = 2.0 * PI * ((j * k) % n) as f64 / n as f64;
    Complex64::from_polar(1.0 / (n as f64).sqrt(), phase)
}

pub fn circulant_basis(n: usize) -> Result<CirculantBasis> {
    if n < 3 {
        return Err(Error::Precondition(format!("ring size n = {n} must be at least 3")));
    }
    let vectors = (1..=n)
        .map(|k| (0..n).map(|j| mode_entry(n, k, j)).collect())
        .collect();
    let eigenvalues = (1..=n).map(|k| circulant_eigenvalue(n, k)).collect();
    Ok(CirculantBasis { n, vectors, eigenvalues })
}

impl CirculantBasis {
    /// `e_k` for `k = 1..=n`.
    pub fn mode(&self, k: usize) -> &[Complex64] {
        &self.vectors[(k + self.n - 1) % self.n]
    }

    /// Coefficients `x_k = ⟨e_k, x⟩` so that `x = Σ_k x_k e_k`; entry `k − 1` holds `x_k`.
    pub fn to_mode_coords(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.vectors
            .iter()
            .map(|e| e.iter().zip(x).map(|(e, x)| e.conj() * x).sum())
            .collect()
    }

    pub fn from_mode_coords(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut x = vec![Complex64::new(0.0, 0.0); self.n];
        for (c, e) in coeffs.iter().zip(&self.vectors) {
            for (xj, ej) in x.iter_mut().zip(e) {
                *xj += c * ej;
            }
        }
        x
    }

    /// `max_k ‖A e_k − μ_k e_k‖` using the stencil form of `A`.
    pub fn eigen_defect(&self) -> f64 {
        let n = self.n;
        self.vectors
            .iter()
            .zip(&self.eigenvalues)
            .map(|(e, mu)| {
                (0..n)
                    .map(|j| {
                        let ae = e[j] * 2.0 - e[(j + 1) % n] - e[(j + n - 1) % n];
                        (ae - e[j] * *mu).norm_sqr()
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Writes a dense matrix as comma-separated rows.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut w: W) -> std::io::Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.17e}", m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
