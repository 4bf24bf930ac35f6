//! Harmonic balance for `2π`-periodic loops.
//!
//! A loop `x(t) = Σ_{|l|≤l0} X_l e^{ilt}` with `X_{−l} = conj(X_l)` solves
//! the chain at frequency `ν` when
//!
//! ```text
//! F_l = (lν)² X_l − [∇V(a + x(·))]_l = 0,   l = 0..=l0,
//! ```
//!
//! the Fourier coefficients of `f(x; ν) = −ν²ẍ − ∇V(a + x)`. The nonlinear
//! term is transformed from equispaced time samples.
//!
//! Solvers work in *scaled real coordinates*: `X_0` followed, for every
//! `l >= 1`, by `√2 Re X_l` and `√2 Im X_l`. In these coordinates the
//! Euclidean inner product equals the time-averaged `L²` inner product of
//! loops, so group actions are orthogonal and `f` is the gradient of the
//! action functional.

use std::f64::consts::{SQRT_2, TAU};
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{apply_stencil, LatticeModel};
use crate::linalg::{newton, range_basis, NewtonOptions};
use crate::spectrum::nu_squared;

/// Number of scaled real coordinates for `n` oscillators and `l0` harmonics.
pub fn real_dim(n: usize, l0: usize) -> usize {
    n * (2 * l0 + 1)
}

/// Coordinates of harmonic `l` (`n` for `l = 0`, `2n` otherwise).
pub fn harmonic_range(n: usize, l: usize) -> Range<usize> {
    if l == 0 {
        0..n
    } else {
        let start = n + (l - 1) * 2 * n;
        start..start + 2 * n
    }
}

/// A truncated Fourier loop together with its frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LoopStateJson", into = "LoopStateJson")]
pub struct LoopState {
    pub n: usize,
    pub l0: usize,
    pub nu: f64,
    /// `coeffs[l][j]`, `l = 0..=l0`; `coeffs[0]` is real.
    pub coeffs: Vec<Vec<Complex64>>,
}

impl LoopState {
    pub fn zeros(n: usize, l0: usize, nu: f64) -> Self {
        Self { n, l0, nu, coeffs: vec![vec![Complex64::new(0.0, 0.0); n]; l0 + 1] }
    }

    /// A loop whose only content is `X_l = c`.
    pub fn single_harmonic(l0: usize, nu: f64, l: usize, c: &[Complex64]) -> Self {
        let mut x = Self::zeros(c.len(), l0, nu);
        x.coeffs[l].copy_from_slice(c);
        if l == 0 {
            x.coeffs[0].iter_mut().for_each(|v| v.im = 0.0);
        }
        x
    }

    pub fn to_real(&self) -> DVector<f64> {
        let n = self.n;
        let mut v = DVector::zeros(real_dim(n, self.l0));
        for j in 0..n {
            v[j] = self.coeffs[0][j].re;
        }
        for l in 1..=self.l0 {
            let r = harmonic_range(n, l);
            for j in 0..n {
                v[r.start + j] = SQRT_2 * self.coeffs[l][j].re;
                v[r.start + n + j] = SQRT_2 * self.coeffs[l][j].im;
            }
        }
        v
    }

    pub fn from_real(n: usize, l0: usize, nu: f64, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), real_dim(n, l0));
        let mut x = Self::zeros(n, l0, nu);
        for j in 0..n {
            x.coeffs[0][j] = Complex64::new(v[j], 0.0);
        }
        for l in 1..=l0 {
            let r = harmonic_range(n, l);
            for j in 0..n {
                x.coeffs[l][j] = Complex64::new(v[r.start + j], v[r.start + n + j]) / SQRT_2;
            }
        }
        x
    }

    fn harmonic_norm_sqr(&self, l: usize) -> f64 {
        let s: f64 = self.coeffs[l].iter().map(|c| c.norm_sqr()).sum();
        if l == 0 {
            s
        } else {
            2.0 * s
        }
    }

    /// Time-averaged `L²` norm, `((1/2π)∫|x|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        (0..=self.l0).map(|l| self.harmonic_norm_sqr(l)).sum::<f64>().sqrt()
    }

    /// `(Σ_{l∈ℤ} (1 + l²)|X_l|²)^{1/2}`.
    pub fn h2_norm(&self) -> f64 {
        (0..=self.l0)
            .map(|l| (1.0 + (l * l) as f64) * self.harmonic_norm_sqr(l))
            .sum::<f64>()
            .sqrt()
    }

    /// Norm of the harmonics `l >= from`.
    pub fn tail_norm(&self, from: usize) -> f64 {
        (from..=self.l0).map(|l| self.harmonic_norm_sqr(l)).sum::<f64>().sqrt()
    }

    /// Share of the norm carried by the top two harmonics.
    pub fn tail_fraction(&self) -> f64 {
        let total = self.norm();
        if total == 0.0 {
            0.0
        } else {
            self.tail_norm(self.l0.saturating_sub(1).max(1)) / total
        }
    }

    /// Same loop with `l0` harmonics, zero padded or truncated.
    pub fn with_truncation(&self, l0: usize) -> Self {
        let mut x = Self::zeros(self.n, l0, self.nu);
        for l in 0..=l0.min(self.l0) {
            x.coeffs[l].copy_from_slice(&self.coeffs[l]);
        }
        x
    }

    /// `x(t)` by direct trigonometric summation.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.coeffs[0].iter().map(|c| c.re).collect();
        for l in 1..=self.l0 {
            let e = Complex64::from_polar(2.0, l as f64 * t);
            for (o, c) in out.iter_mut().zip(&self.coeffs[l]) {
                *o += (c * e).re;
            }
        }
        out
    }

    /// `ẋ(t)` with respect to the loop time `t`.
    pub fn eval_derivative(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for l in 1..=self.l0 {
            let e = Complex64::new(0.0, 2.0 * l as f64) * Complex64::from_polar(1.0, l as f64 * t);
            for (o, c) in out.iter_mut().zip(&self.coeffs[l]) {
                *o += (c * e).re;
            }
        }
        out
    }

    /// `x(· + φ)`: harmonic `l` picks up `e^{ilφ}`.
    pub fn time_shifted(&self, phi: f64) -> Self {
        let mut x = self.clone();
        for (l, c) in x.coeffs.iter_mut().enumerate() {
            let e = Complex64::from_polar(1.0, l as f64 * phi);
            c.iter_mut().for_each(|v| *v *= e);
        }
        x
    }

    /// Phase-space point `(a + x(0), ν ẋ(0))` of the orbit `q(τ) = a + x(ντ)`.
    pub fn phase_point(&self, a: f64) -> (Vec<f64>, Vec<f64>) {
        let q = self.eval(0.0).into_iter().map(|x| a + x).collect();
        let p = self.eval_derivative(0.0).into_iter().map(|v| self.nu * v).collect();
        (q, p)
    }

    pub fn is_finite(&self) -> bool {
        self.nu.is_finite() && self.coeffs.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// JSON interchange form: `{n, l0, nu, re, im}` with `re[l][j]`, `im[l][j]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopStateJson {
    pub n: usize,
    pub l0: usize,
    pub nu: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<LoopState> for LoopStateJson {
    fn from(x: LoopState) -> Self {
        Self {
            n: x.n,
            l0: x.l0,
            nu: x.nu,
            re: x.coeffs.iter().map(|h| h.iter().map(|c| c.re).collect()).collect(),
            im: x.coeffs.iter().map(|h| h.iter().map(|c| c.im).collect()).collect(),
        }
    }
}

impl TryFrom<LoopStateJson> for LoopState {
    type Error = String;

    fn try_from(j: LoopStateJson) -> std::result::Result<Self, String> {
        if j.n < 3 {
            return Err(format!("n = {} must be at least 3", j.n));
        }
        let shape_ok = |a: &Vec<Vec<f64>>| a.len() == j.l0 + 1 && a.iter().all(|h| h.len() == j.n);
        if !shape_ok(&j.re) || !shape_ok(&j.im) {
            return Err(format!("coefficient arrays must have shape [{}][{}]", j.l0 + 1, j.n));
        }
        if !j.nu.is_finite() || j.re.iter().chain(&j.im).flatten().any(|v| !v.is_finite()) {
            return Err("non-finite loop data".into());
        }
        if j.im[0].iter().any(|v| v.abs() > 1e-13) {
            return Err("the mean (l = 0) coefficients must be real".into());
        }
        let coeffs = j
            .re
            .iter()
            .zip(&j.im)
            .enumerate()
            .map(|(l, (re, im))| {
                re.iter()
                    .zip(im)
                    .map(|(&a, &b)| Complex64::new(a, if l == 0 { 0.0 } else { b }))
                    .collect()
            })
            .collect();
        Ok(LoopState { n: j.n, l0: j.l0, nu: j.nu, coeffs })
    }
}

/// Equispaced sampling of loops and the transforms between samples and
/// scaled real coordinates.
///
/// The sample count is a multiple of `2n`, so every time shift by a multiple
/// of `π/n` (all group angles) maps the grid onto itself.
#[derive(Clone)]
pub struct SpectralGrid {
    pub n: usize,
    pub l0: usize,
    pub samples: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("l0", &self.l0)
            .field("samples", &self.samples)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize, l0: usize) -> Self {
        let period = 2 * n;
        let samples = (4 * l0 + 2).max(16).div_ceil(period) * period;
        let mut planner = FftPlanner::new();
        Self {
            n,
            l0,
            samples,
            fwd: planner.plan_fft_forward(samples),
            inv: planner.plan_fft_inverse(samples),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples).map(|s| TAU * s as f64 / self.samples as f64).collect()
    }

    /// Samples of the loop with scaled coordinates `v`, laid out as `[s * n + j]`.
    pub fn synthesize(&self, v: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.samples);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            buf[0] = Complex64::new(v[j], 0.0);
            for l in 1..=self.l0 {
                let r = harmonic_range(n, l);
                let c = Complex64::new(v[r.start + j], v[r.start + n + j]) / SQRT_2;
                buf[l] = c;
                buf[m - l] = c.conj();
            }
            self.inv.process(&mut buf);
            for s in 0..m {
                out[s * n + j] = buf[s].re;
            }
        }
    }

    /// Scaled coordinates of the first `l0` harmonics of sampled data.
    pub fn analyze(&self, samples: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.samples);
        let inv_m = 1.0 / m as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..n {
            for s in 0..m {
                buf[s] = Complex64::new(samples[s * n + j], 0.0);
            }
            self.fwd.process(&mut buf);
            out[j] = buf[0].re * inv_m;
            for l in 1..=self.l0 {
                let r = harmonic_range(n, l);
                let c = buf[l] * inv_m;
                out[r.start + j] = SQRT_2 * c.re;
                out[r.start + n + j] = SQRT_2 * c.im;
            }
        }
    }
}

/// Pointwise Hessian data of `V` along a loop.
pub struct Linearization {
    diag: Vec<f64>,
    bond: Vec<f64>,
}

/// Residual of a loop with per-harmonic bookkeeping.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub coeffs: LoopState,
    pub norm: f64,
    /// Norm of the residual in the harmonics `l > l0 − 2`.
    pub tail_norm: f64,
}

/// Harmonic-balance discretisation of one model at one truncation.
#[derive(Clone, Debug)]
pub struct Galerkin {
    pub model: LatticeModel,
    pub grid: SpectralGrid,
    freq2: DVector<f64>,
    base_potential: f64,
}

impl Galerkin {
    pub fn new(model: &LatticeModel, l0: usize) -> Result<Self> {
        if l0 == 0 {
            return Err(Error::Precondition("truncation l0 must be at least 1".into()));
        }
        let n = model.n;
        let mut freq2 = DVector::zeros(real_dim(n, l0));
        for l in 1..=l0 {
            for i in harmonic_range(n, l) {
                freq2[i] = (l * l) as f64;
            }
        }
        let base_potential = model.potential_unchecked(&vec![model.a; n]);
        Ok(Self { model: model.clone(), grid: SpectralGrid::new(n, l0), freq2, base_potential })
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    pub fn l0(&self) -> usize {
        self.grid.l0
    }

    pub fn dim(&self) -> usize {
        self.freq2.len()
    }

    fn check_shape(&self, x: &LoopState) -> Result<()> {
        if x.n != self.n() || x.l0 != self.l0() {
            return Err(Error::Precondition(format!(
                "loop shape (n = {}, l0 = {}) does not match the discretisation (n = {}, l0 = {})",
                x.n,
                x.l0,
                self.n(),
                self.l0()
            )));
        }
        Ok(())
    }

    /// Samples of `a + x` at the grid times.
    fn positions(&self, v: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.grid.samples * self.n()];
        self.grid.synthesize(v, &mut q);
        let a = self.model.a;
        q.iter_mut().for_each(|v| *v += a);
        q
    }

    /// Residual in scaled coordinates.
    pub fn residual_real(&self, v: &[f64], nu: f64) -> Result<DVector<f64>> {
        let n = self.n();
        let q = self.positions(v);
        let mut g = vec![0.0; q.len()];
        for (qs, gs) in q.chunks_exact(n).zip(g.chunks_exact_mut(n)) {
            self.model.grad_v_into(qs, gs);
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual samples"));
        }
        let mut ghat = DVector::zeros(self.dim());
        self.grid.analyze(&g, ghat.as_mut_slice());
        let nu2 = nu * nu;
        Ok(DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| nu2 * self.freq2[i] * v[i] - ghat[i]),
        ))
    }

    pub fn residual(&self, x: &LoopState) -> Result<ResidualReport> {
        self.check_shape(x)?;
        let f = self.residual_real(x.to_real().as_slice(), x.nu)?;
        let coeffs = LoopState::from_real(x.n, x.l0, x.nu, f.as_slice());
        let norm = f.norm();
        let tail_norm = coeffs.tail_norm(x.l0.saturating_sub(1).max(1));
        Ok(ResidualReport { coeffs, norm, tail_norm })
    }

    pub fn linearize(&self, v: &[f64]) -> Result<Linearization> {
        let n = self.n();
        let q = self.positions(v);
        let mut diag = vec![0.0; q.len()];
        let mut bond = vec![0.0; q.len()];
        for ((qs, ds), bs) in q.chunks_exact(n).zip(diag.chunks_exact_mut(n)).zip(bond.chunks_exact_mut(n)) {
            self.model.hessian_stencil(qs, ds, bs);
        }
        if diag.iter().chain(&bond).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Hessian samples"));
        }
        Ok(Linearization { diag, bond })
    }

    /// `J y = (lν)² Y_l − [D²V(a + x) y]_l` for a direction in scaled coordinates.
    pub fn apply_linearization(&self, lin: &Linearization, nu: f64, y: &[f64]) -> DVector<f64> {
        let n = self.n();
        let mut ys = vec![0.0; lin.diag.len()];
        self.grid.synthesize(y, &mut ys);
        let mut hy = vec![0.0; ys.len()];
        for (((d, b), y), o) in lin
            .diag
            .chunks_exact(n)
            .zip(lin.bond.chunks_exact(n))
            .zip(ys.chunks_exact(n))
            .zip(hy.chunks_exact_mut(n))
        {
            apply_stencil(d, b, y, o);
        }
        let mut out = DVector::zeros(self.dim());
        self.grid.analyze(&hy, out.as_mut_slice());
        let nu2 = nu * nu;
        for i in 0..self.dim() {
            out[i] = nu2 * self.freq2[i] * y[i] - out[i];
        }
        out
    }

    /// `J · cols`, one linearised application per column.
    pub fn jacobian_times(&self, lin: &Linearization, nu: f64, cols: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), cols.ncols());
        for c in 0..cols.ncols() {
            let col: Vec<f64> = cols.column(c).iter().copied().collect();
            out.set_column(c, &self.apply_linearization(lin, nu, &col));
        }
        out
    }

    pub fn jacobian_action(&self, x: &LoopState, y: &LoopState) -> Result<LoopState> {
        self.check_shape(x)?;
        self.check_shape(y)?;
        let lin = self.linearize(x.to_real().as_slice())?;
        let out = self.apply_linearization(&lin, x.nu, y.to_real().as_slice());
        Ok(LoopState::from_real(x.n, x.l0, x.nu, out.as_slice()))
    }

    /// `∂F/∂ν = 2ν l² X_l` in scaled coordinates.
    pub fn d_nu(&self, v: &[f64], nu: f64) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| 2.0 * nu * self.freq2[i] * v[i]))
    }

    /// `∫_0^{2π} (ν²|ẋ|²/2 − [V(a + x) − V(a)]) dt` by the grid quadrature.
    ///
    /// The residual is the gradient of this functional: its derivative along
    /// `y` is `2π ⟨F(x), y⟩` in scaled coordinates.
    pub fn action(&self, v: &[f64], nu: f64) -> Result<f64> {
        let n = self.n();
        let kinetic: f64 = (0..self.dim()).map(|i| self.freq2[i] * v[i] * v[i]).sum::<f64>() * 0.5 * nu * nu;
        let q = self.positions(v);
        let mean_v = q.chunks_exact(n).map(|qs| self.model.potential_unchecked(qs)).sum::<f64>()
            / self.grid.samples as f64;
        let out = TAU * (kinetic - (mean_v - self.base_potential));
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonFinite("action functional"))
        }
    }
}

/// Orthonormal basis of the zero-mean subspace inside the given harmonics.
fn zero_mean_block(n: usize, size: usize) -> DMatrix<f64> {
    let mut p = DMatrix::identity(size, size);
    for part in 0..size / n {
        for i in 0..n {
            for j in 0..n {
                p[(part * n + i, part * n + j)] -= 1.0 / n as f64;
            }
        }
    }
    range_basis(&p, 1e-8)
}

/// Basis of the complementary ("slave") harmonics `l = 0, 2..=l0`, without
/// the in-phase mode when `zero_mean` is set.
pub fn slave_basis(n: usize, l0: usize, zero_mean: bool) -> DMatrix<f64> {
    let dim = real_dim(n, l0);
    let blocks: Vec<(Range<usize>, DMatrix<f64>)> = (0..=l0)
        .filter(|&l| l != 1)
        .map(|l| {
            let r = harmonic_range(n, l);
            let size = r.len();
            let b = if zero_mean { zero_mean_block(n, size) } else { DMatrix::identity(size, size) };
            (r, b)
        })
        .collect();
    let cols: usize = blocks.iter().map(|b| b.1.ncols()).sum();
    let mut basis = DMatrix::zeros(dim, cols);
    let mut c = 0;
    for (r, b) in blocks {
        basis.view_mut((r.start, c), (r.len(), b.ncols())).copy_from(&b);
        c += b.ncols();
    }
    basis
}

/// Solution of the complementary equations for fixed first-harmonic data.
#[derive(Clone, Debug)]
pub struct SlaveSolution {
    /// The higher-harmonic (and mean) part, harmonic 1 zero.
    pub x2: LoopState,
    pub residual: f64,
    pub iterations: usize,
}

/// Checks that `M(0) = −D²V(a)` is invertible on the working subspace.
pub fn check_mean_block(model: &LatticeModel) -> Result<()> {
    let n = model.n;
    let worst = (1..=n)
        .filter(|&k| !(model.zero_mean_mode && k == n))
        .map(|k| nu_squared(model, k).abs())
        .fold(f64::INFINITY, f64::min);
    if worst <= 1e-12 {
        return Err(Error::Precondition(
            "M(0) = -D²V(a) is singular; enable zero_mean_mode for U = 0".into(),
        ));
    }
    Ok(())
}

/// Newton solve of the complementary harmonics with harmonic 1 held at `x1`.
///
/// `basis` restricts the unknowns to a subspace of the slave coordinates
/// (e.g. a fixed-point space); by default all of `l = 0, 2..=l0` is used.
pub fn solve_slave(
    gal: &Galerkin,
    x1: &LoopState,
    nu: f64,
    basis: Option<&DMatrix<f64>>,
    guess: Option<&LoopState>,
) -> Result<SlaveSolution> {
    gal.check_shape(x1)?;
    check_mean_block(&gal.model)?;
    if nu.abs() < 1e-6 {
        return Err(Error::Precondition("slave solve needs nu bounded away from 0".into()));
    }
    let n = gal.n();
    let owned;
    let s = match basis {
        Some(b) => b,
        None => {
            owned = slave_basis(n, gal.l0(), gal.model.zero_mean_mode);
            &owned
        }
    };
    let mut fixed = DVector::zeros(gal.dim());
    let first = x1.to_real();
    for i in harmonic_range(n, 1) {
        fixed[i] = first[i];
    }
    let w0 = match guess {
        Some(g) => s.transpose() * g.to_real(),
        None => DVector::zeros(s.ncols()),
    };
    let outcome = newton(
        w0,
        |w| {
            let v = &fixed + s * w;
            let f = gal.residual_real(v.as_slice(), nu)?;
            let lin = gal.linearize(v.as_slice())?;
            let js = gal.jacobian_times(&lin, nu, s);
            Ok((s.transpose() * f, s.transpose() * js))
        },
        NewtonOptions { tol: 1e-11, max_iter: 40, ..Default::default() },
        "slave Newton iteration",
    )?;
    let x2 = LoopState::from_real(n, gal.l0(), nu, (s * &outcome.x).as_slice());
    Ok(SlaveSolution { x2, residual: outcome.residual, iterations: outcome.iterations })
}

/// Adaptive truncation rule: grow `l0` along a fixed ladder until the top two
/// harmonics carry less than `tail_tol` of the loop norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationPolicy {
    pub l0_min: usize,
    pub l0_max: usize,
    pub tail_tol: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { l0_min: 4, l0_max: 128, tail_tol: 1e-8 }
    }
}

const LADDER: [usize; 11] = [4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128];

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.tail_tol > 0.0) {
            return Err(Error::Precondition("tail_tol must be positive".into()));
        }
        if self.l0_min < 1 || self.l0_min > self.l0_max {
            return Err(Error::Precondition(format!(
                "invalid truncation bounds [{}, {}]",
                self.l0_min, self.l0_max
            )));
        }
        Ok(())
    }

    pub fn accepts(&self, x: &LoopState) -> bool {
        x.tail_fraction() < self.tail_tol
    }

    /// Candidate truncations in increasing order.
    pub fn ladder(&self) -> Vec<usize> {
        let mut out: Vec<usize> =
            LADDER.iter().copied().filter(|&l| l >= self.l0_min && l <= self.l0_max).collect();
        if out.first() != Some(&self.l0_min) {
            out.insert(0, self.l0_min);
        }
        if out.last() != Some(&self.l0_max) {
            out.push(self.l0_max);
        }
        out
    }

    pub fn next_after(&self, l0: usize) -> Option<usize> {
        self.ladder().into_iter().find(|&l| l > l0)
    }
}

/// Smallest ladder truncation whose converged orbit passes the tail test.
///
/// `solve(l0)` must return the converged orbit at truncation `l0`.
pub fn choose_truncation<F>(policy: &TruncationPolicy, mut solve: F) -> Result<(usize, LoopState)>
where
    F: FnMut(usize) -> Result<LoopState>,
{
    policy.validate()?;
    for l0 in policy.ladder() {
        let x = solve(l0)?;
        if policy.accepts(&x) {
            return Ok((l0, x));
        }
    }
    Err(Error::Truncation(policy.l0_max))
}
