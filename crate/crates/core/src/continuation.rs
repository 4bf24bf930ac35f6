//! Primary bifurcations from the equilibrium and their continuation.
//!
//! A branch of the family `H` at mode `k` lives in `Fix(H)`, where the
//! linearisation at `ν_k` has a one-dimensional kernel. The restricted
//! system `Bᵀ F(B u; ν) = 0` (columns of `B` spanning `Fix(H)`) is regular
//! along the branch away from folds, so no phase condition is needed.
//!
//! The amplitude `r` of a loop is its inner product with the unit kernel
//! direction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{check_mean_block, solve_slave, Galerkin, LoopState, TruncationPolicy};
use crate::lattice::LatticeModel;
use crate::linalg::{newton, NewtonOptions};
use crate::spectrum::{dispersion, non_resonance_check, nu_squared, ResonantPair};
use crate::symmetry::{build_isotropy, symmetry_residual, GroupLabel, IsotropyGroup};

/// Largest harmonic ratio examined by the resonance check.
const RESONANCE_L_MAX: usize = 64;

/// One bifurcation point of the inventory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub k: usize,
    pub nu_k: f64,
    pub families: Vec<GroupLabel>,
    /// Number of branches guaranteed by the bifurcation theorem.
    pub predicted: usize,
    /// First resonance `lν_k = ν_j`, if any; such modes have no families.
    pub resonance: Option<ResonantPair>,
}

/// Bifurcation points `ν_k > 0` with the families emanating from each.
///
/// Modes `k ∈ [1, n/2)` carry the three families `T_k`, `S_k`, `S̃_k`;
/// `k = n/2` and `k = n` only `T_k`. Modes with `ν_k² <= 0`, the in-phase
/// mode of a zero-mean model and resonant modes are left out or flagged.
pub fn bifurcation_inventory(model: &LatticeModel) -> Result<Vec<InventoryEntry>> {
    let table = dispersion(model);
    if table.all_equal {
        return Err(Error::DegenerateSpectrum);
    }
    let n = model.n;
    let mut out = Vec::new();
    for e in &table.entries {
        if !e.bifurcating || (model.zero_mean_mode && e.k == n) {
            continue;
        }
        let report = non_resonance_check(model, e.k, RESONANCE_L_MAX)?;
        let resonance = report.resonant_pairs.first().cloned();
        let families: Vec<GroupLabel> = if resonance.is_some() {
            vec![]
        } else if 2 * e.k < n {
            GroupLabel::families().to_vec()
        } else {
            vec![GroupLabel::T]
        };
        out.push(InventoryEntry { k: e.k, nu_k: e.nu, predicted: families.len(), families, resonance });
    }
    Ok(out)
}

/// Unit kernel direction of a family together with its realising group.
#[derive(Clone, Debug)]
pub struct KernelDirection {
    pub group: IsotropyGroup,
    /// First-harmonic loop of unit `L²` norm (truncation 1).
    pub direction: LoopState,
    /// Leading-order profile of the family.
    pub profile: &'static str,
}

/// Leading-order profile for an even coupling; `ζ = 2π/n`.
pub fn template_profile(label: GroupLabel, n: usize, k: usize) -> &'static str {
    match label {
        GroupLabel::T if k == n => "x_j(t) = 2r cos t",
        GroupLabel::T if 2 * k == n => "x_j(t) = 2r (-1)^j cos t",
        GroupLabel::T => "x_j(t) = 2r cos(t + jkζ)",
        GroupLabel::S => "x_j(t) = 4r cos(jkζ) cos t",
        GroupLabel::STilde if (n / crate::symmetry::gcd(k, n)) % 2 == 1 => "x_j(t) = -4r sin(jkζ) sin t",
        GroupLabel::STilde => "x_j(t) = 4r cos(jkζ - mζ/2) cos(t + mζ/2)",
        _ => "none",
    }
}

pub fn kernel_direction(model: &LatticeModel, k: usize, family: GroupLabel) -> Result<KernelDirection> {
    let group = build_isotropy(family, model.n, k)?.for_model(model)?;
    let v = group.kernel_direction(group.k, 1)?;
    let direction = LoopState::from_real(model.n, 1, nu_squared(model, group.k).max(0.0).sqrt(), v.as_slice());
    Ok(KernelDirection { profile: template_profile(family, model.n, group.k), group, direction })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationOptions {
    /// Amplitude of the first branch point.
    pub r_min: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Stop once the `L²` norm of the loop exceeds this.
    pub max_amplitude: f64,
    /// Stop once `ν` drops below this.
    pub nu_min: f64,
    pub max_steps: usize,
    pub target_iterations: usize,
    pub max_halvings: usize,
    pub growth: f64,
    pub newton_tol: f64,
    pub truncation: TruncationPolicy,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            r_min: 1e-4,
            h_init: 1e-3,
            h_min: 1e-5,
            h_max: 0.1,
            max_amplitude: 1.0,
            nu_min: 1e-2,
            max_steps: 200,
            target_iterations: 3,
            max_halvings: 8,
            growth: 1.3,
            newton_tol: 1e-11,
            truncation: TruncationPolicy::default(),
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        self.truncation.validate()?;
        let ok = self.r_min > 0.0
            && self.h_min > 0.0
            && self.h_min <= self.h_init
            && self.h_init <= self.h_max
            && self.growth > 1.0
            && self.newton_tol > 0.0
            && self.max_amplitude > self.r_min;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("inconsistent continuation options".into()))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchPoint {
    pub index: usize,
    pub arclength: f64,
    pub r: f64,
    pub nu: f64,
    pub l0: usize,
    /// Coordinates in the fixed-space basis at truncation `l0`.
    pub u: Vec<f64>,
    pub residual: f64,
    pub sym_residual: f64,
    pub tail: f64,
    pub norm: f64,
    pub h2_norm: f64,
    pub newton_iterations: usize,
    #[serde(skip)]
    pub state: Option<LoopState>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    MaxAmplitude,
    MinFrequency,
    StepFailure,
    Reconnected { j: usize, nu_j: f64 },
    Truncation,
    StepBudget,
}

#[derive(Clone, Debug, Serialize)]
pub struct Branch {
    pub n: usize,
    pub k: usize,
    pub family: GroupLabel,
    pub pattern: &'static str,
    pub onset: f64,
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

impl Branch {
    pub fn states(&self) -> impl Iterator<Item = &LoopState> {
        self.points.iter().filter_map(|p| p.state.as_ref())
    }
}

/// The restricted system at one truncation.
struct Restricted {
    gal: Galerkin,
    basis: DMatrix<f64>,
    /// Kernel direction in basis coordinates.
    v0: DVector<f64>,
}

impl Restricted {
    fn new(model: &LatticeModel, group: &IsotropyGroup, v0_full: &DVector<f64>, l0: usize) -> Result<Self> {
        let gal = Galerkin::new(model, l0)?;
        let basis = group.fixed_space(l0, model.zero_mean_mode)?.full();
        let mut padded = DVector::zeros(gal.dim());
        let m = v0_full.len().min(gal.dim());
        padded.rows_mut(0, m).copy_from(&v0_full.rows(0, m));
        let v0 = basis.transpose() * padded;
        Ok(Self { gal, basis, v0 })
    }

    fn l0(&self) -> usize {
        self.gal.l0()
    }

    fn loop_state(&self, u: &DVector<f64>, nu: f64) -> LoopState {
        let v = &self.basis * u;
        LoopState::from_real(self.gal.n(), self.l0(), nu, v.as_slice())
    }

    /// `(G, [G_u | G_ν])` at `z = (u, ν)`.
    fn system(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.basis.ncols();
        let u = z.rows(0, d).into_owned();
        let nu = z[d];
        let v = &self.basis * &u;
        let f = self.gal.residual_real(v.as_slice(), nu)?;
        let lin = self.gal.linearize(v.as_slice())?;
        let ju = self.basis.transpose() * self.gal.jacobian_times(&lin, nu, &self.basis);
        let jn = self.basis.transpose() * self.gal.d_nu(v.as_slice(), nu);
        let mut jac = DMatrix::zeros(d, d + 1);
        jac.view_mut((0, 0), (d, d)).copy_from(&ju);
        jac.set_column(d, &jn);
        Ok((self.basis.transpose() * f, jac))
    }

    /// Re-expresses `z` (or a tangent) from another truncation.
    fn import(&self, other: &Restricted, z: &DVector<f64>) -> DVector<f64> {
        let d_old = other.basis.ncols();
        let v_old = &other.basis * z.rows(0, d_old);
        let mut v = DVector::zeros(self.gal.dim());
        let m = v_old.len().min(v.len());
        v.rows_mut(0, m).copy_from(&v_old.rows(0, m));
        let d = self.basis.ncols();
        let mut out = DVector::zeros(d + 1);
        out.rows_mut(0, d).copy_from(&(self.basis.transpose() * v));
        out[d] = z[d_old];
        out
    }
}

fn bordered(g: DVector<f64>, jac: DMatrix<f64>, row: &DVector<f64>, value: f64) -> (DVector<f64>, DMatrix<f64>) {
    let d = g.len();
    let mut f = DVector::zeros(d + 1);
    f.rows_mut(0, d).copy_from(&g);
    f[d] = value;
    let mut j = DMatrix::zeros(d + 1, d + 1);
    j.view_mut((0, 0), (d, d + 1)).copy_from(&jac);
    j.set_row(d, &row.transpose());
    (f, j)
}

/// Solves for the branch point with amplitude `r`, seeded by the kernel
/// direction and the slave solve at `ν_k`.
fn fixed_amplitude(rs: &Restricted, kd: &KernelDirection, nu_k: f64, r: f64, tol: f64) -> Result<(DVector<f64>, usize)> {
    let l0 = rs.l0();
    let x1 = kd.direction.with_truncation(l0);
    let x1 = LoopState { nu: nu_k, coeffs: x1.coeffs.iter().map(|h| h.iter().map(|c| c * r).collect()).collect(), ..x1 };
    let fixed = kd.group.fixed_space(l0, rs.gal.model.zero_mean_mode)?;
    let slave_basis = fixed.embed(|l| l != 1);
    let seed = match solve_slave(&rs.gal, &x1, nu_k, Some(&slave_basis), None) {
        Ok(s) => x1.to_real() + s.x2.to_real(),
        Err(_) => x1.to_real(),
    };
    debug_assert_eq!(seed.len(), rs.gal.dim());
    let d = rs.basis.ncols();
    let mut z0 = DVector::zeros(d + 1);
    z0.rows_mut(0, d).copy_from(&(rs.basis.transpose() * seed));
    z0[d] = nu_k;
    let mut row = DVector::zeros(d + 1);
    row.rows_mut(0, d).copy_from(&rs.v0);
    let out = newton(
        z0,
        |z| {
            let (g, jac) = rs.system(z)?;
            let amp = rs.v0.dot(&z.rows(0, d));
            Ok(bordered(g, jac, &row, amp - r))
        },
        NewtonOptions { tol, max_iter: 30, ..Default::default() },
        "initial corrector (try a smaller r_min)",
    )
    .map_err(|e| match e {
        Error::NonFinite(_) => Error::NoConvergence { what: "initial corrector", iterations: 0, residual: f64::NAN },
        e => e,
    })?;
    Ok((out.x, out.iterations))
}

fn tangent(jac: &DMatrix<f64>, prev: &DVector<f64>) -> Result<DVector<f64>> {
    let d = jac.nrows();
    let mut a = DMatrix::zeros(d + 1, d + 1);
    a.view_mut((0, 0), (d, d + 1)).copy_from(jac);
    a.set_row(d, &prev.transpose());
    let mut b = DVector::zeros(d + 1);
    b[d] = 1.0;
    let t = a.lu().solve(&b).ok_or(Error::NoConvergence { what: "tangent solve", iterations: 0, residual: f64::NAN })?;
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("branch tangent"));
    }
    Ok(t.normalize())
}

struct Resolved {
    rs: Restricted,
    z: DVector<f64>,
    t: DVector<f64>,
    iterations: usize,
}

/// Raises the truncation until the tail test passes; the point is re-corrected
/// on the hyperplane through itself orthogonal to the tangent.
fn resolve_truncation(
    model: &LatticeModel,
    kd: &KernelDirection,
    v0_full: &DVector<f64>,
    opts: &ContinuationOptions,
    mut cur: Resolved,
) -> Result<Option<Resolved>> {
    loop {
        let d = cur.rs.basis.ncols();
        let state = cur.rs.loop_state(&cur.z.rows(0, d).into_owned(), cur.z[d]);
        if opts.truncation.accepts(&state) {
            return Ok(Some(cur));
        }
        let Some(next) = opts.truncation.next_after(cur.rs.l0()) else { return Ok(None) };
        let rs = Restricted::new(model, &kd.group, v0_full, next)?;
        let z0 = rs.import(&cur.rs, &cur.z);
        let t = rs.import(&cur.rs, &cur.t).normalize();
        let anchor = z0.clone();
        let out = newton(
            z0,
            |z| {
                let (g, jac) = rs.system(z)?;
                Ok(bordered(g, jac, &t, t.dot(&(z - &anchor))))
            },
            NewtonOptions { tol: opts.newton_tol, max_iter: 12, ..Default::default() },
            "truncation refinement",
        )?;
        cur = Resolved { rs, z: out.x, t, iterations: cur.iterations + out.iterations };
    }
}

fn make_point(rs: &Restricted, group: &IsotropyGroup, z: &DVector<f64>, index: usize, s: f64, iterations: usize) -> Result<BranchPoint> {
    let d = rs.basis.ncols();
    let u = z.rows(0, d).into_owned();
    let nu = z[d];
    let state = rs.loop_state(&u, nu);
    let residual = rs.gal.residual(&state)?.norm;
    Ok(BranchPoint {
        index,
        arclength: s,
        r: rs.v0.dot(&u),
        nu,
        l0: rs.l0(),
        u: u.iter().copied().collect(),
        residual,
        sym_residual: symmetry_residual(&state, group),
        tail: state.tail_fraction(),
        norm: state.norm(),
        h2_norm: state.h2_norm(),
        newton_iterations: iterations,
        state: Some(state),
    })
}

fn check_family(model: &LatticeModel, k: usize, family: GroupLabel) -> Result<f64> {
    check_mean_block(model)?;
    let inventory = bifurcation_inventory(model)?;
    let k = if k == 0 { model.n } else { k };
    let entry = inventory
        .iter()
        .find(|e| e.k == k)
        .ok_or_else(|| Error::Precondition(format!("mode k = {k} does not bifurcate")))?;
    if let Some(p) = &entry.resonance {
        return Err(Error::Resonant { k, l: p.l, j: p.j });
    }
    if !entry.families.contains(&family) {
        return Err(Error::Precondition(format!("family {} does not bifurcate at k = {k}", family.name())));
    }
    Ok(entry.nu_k)
}

/// Continues the branch of `family` from `ν_k` in the direction of
/// increasing amplitude; `ν` may move either way.
///
/// The half with negative amplitude is the image under the half-period
/// shift `(0, π)` and is not recomputed.
pub fn continue_branch(model: &LatticeModel, k: usize, family: GroupLabel, opts: &ContinuationOptions) -> Result<Branch> {
    opts.validate()?;
    let nu_k = check_family(model, k, family)?;
    let kd = kernel_direction(model, k, family)?;
    let k = kd.group.k;
    let v0_full = kd.direction.to_real();
    let mut rs = Restricted::new(model, &kd.group, &v0_full, opts.truncation.l0_min)?;
    let (z, iterations) = fixed_amplitude(&rs, &kd, nu_k, opts.r_min, opts.newton_tol)?;
    let d = rs.basis.ncols();
    let (_, jac) = rs.system(&z)?;
    let mut prev = DVector::zeros(d + 1);
    prev.rows_mut(0, d).copy_from(&rs.v0);
    let t = tangent(&jac, &prev)?;
    let Some(first) = resolve_truncation(model, &kd, &v0_full, opts, Resolved { rs, z, t, iterations })? else {
        return Err(Error::Truncation(opts.truncation.l0_max));
    };
    rs = first.rs;
    let (mut z, mut t) = (first.z, first.t);
    let mut s = 0.0;
    let mut points = vec![make_point(&rs, &kd.group, &z, 0, s, first.iterations)?];
    let mut h = opts.h_init;
    let other_modes: Vec<(usize, f64)> = dispersion(model)
        .entries
        .iter()
        .filter(|e| e.k != k && e.bifurcating)
        .map(|e| (e.k, e.nu))
        .collect();

    let termination = loop {
        if points.len() > opts.max_steps {
            break Termination::StepBudget;
        }
        let mut halvings = 0;
        let accepted = loop {
            let pred = &z + &t * h;
            let tt = t.clone();
            let attempt = newton(
                pred.clone(),
                |zz| {
                    let (g, jac) = rs.system(zz)?;
                    Ok(bordered(g, jac, &tt, tt.dot(&(zz - &pred))))
                },
                NewtonOptions { tol: opts.newton_tol, max_iter: 2 * opts.target_iterations + 2, ..Default::default() },
                "pseudo-arclength corrector",
            );
            match attempt {
                Ok(out) => break Some(out),
                Err(_) if halvings < opts.max_halvings && h * 0.5 >= opts.h_min => {
                    h *= 0.5;
                    halvings += 1;
                }
                Err(_) => break None,
            }
        };
        let Some(out) = accepted else { break Termination::StepFailure };
        let (_, jac) = rs.system(&out.x)?;
        let t_new = tangent(&jac, &t)?;
        let step = (&out.x - &z).norm();
        let cur = Resolved { rs, z: out.x, t: t_new, iterations: out.iterations };
        let Some(res) = resolve_truncation(model, &kd, &v0_full, opts, cur)? else {
            break Termination::Truncation;
        };
        rs = res.rs;
        z = res.z;
        t = res.t;
        s += step;
        if out.iterations <= opts.target_iterations {
            h = (h * opts.growth).min(opts.h_max);
        }
        let p = make_point(&rs, &kd.group, &z, points.len(), s, res.iterations)?;
        let (norm, nu) = (p.norm, p.nu);
        points.push(p);
        if norm >= opts.max_amplitude {
            break Termination::MaxAmplitude;
        }
        if nu < opts.nu_min {
            break Termination::MinFrequency;
        }
        if norm < 0.5 * opts.r_min && points.len() > 2 {
            if let Some(&(j, nu_j)) = other_modes.iter().find(|(_, nj)| (nu - nj).abs() < 1e-2) {
                break Termination::Reconnected { j, nu_j };
            }
        }
    };
    Ok(Branch {
        n: model.n,
        k,
        family,
        pattern: kd.group.pattern(),
        onset: nu_k,
        points,
        termination,
    })
}

/// The three (or one) families at mode `k`, continued concurrently.
pub fn continue_families(model: &LatticeModel, k: usize, opts: &ContinuationOptions) -> Result<Vec<Result<Branch>>> {
    let inventory = bifurcation_inventory(model)?;
    let entry = inventory
        .iter()
        .find(|e| e.k == k)
        .ok_or_else(|| Error::Precondition(format!("mode k = {k} does not bifurcate")))?;
    if let Some(p) = &entry.resonance {
        return Err(Error::Resonant { k, l: p.l, j: p.j });
    }
    Ok(entry.families.par_iter().map(|&f| continue_branch(model, k, f, opts)).collect())
}

/// Extrapolated onset `ν(r → 0)` of a family.
#[derive(Clone, Debug, Serialize)]
pub struct OnsetEstimate {
    pub radii: Vec<f64>,
    pub nus: Vec<f64>,
    pub extrapolated: f64,
    pub nu_k: f64,
}

/// Fixed-amplitude solves at `r, 2r, 4r` and Richardson extrapolation,
/// assuming `ν(r) = ν_k + c₂r² + c₄r⁴ + …` (the branch is even in `r`).
pub fn onset_estimate(model: &LatticeModel, k: usize, family: GroupLabel, r: f64, opts: &ContinuationOptions) -> Result<OnsetEstimate> {
    let nu_k = check_family(model, k, family)?;
    let kd = kernel_direction(model, k, family)?;
    let rs = Restricted::new(model, &kd.group, &kd.direction.to_real(), opts.truncation.l0_min)?;
    let radii = vec![r, 2.0 * r, 4.0 * r];
    let mut nus = Vec::new();
    for &ri in &radii {
        let (z, _) = fixed_amplitude(&rs, &kd, nu_k, ri, opts.newton_tol)?;
        nus.push(z[z.len() - 1]);
    }
    let r1 = (4.0 * nus[0] - nus[1]) / 3.0;
    let r2 = (4.0 * nus[1] - nus[2]) / 3.0;
    let extrapolated = (16.0 * r1 - r2) / 15.0;
    Ok(OnsetEstimate { radii, nus, extrapolated, nu_k })
}

/// `‖x − r v₀‖` against `r` on a branch, with the least-squares slope of
/// `log‖x − r v₀‖` over `log r` for `r ∈ [r_lo, r_hi]`.
#[derive(Clone, Debug, Serialize)]
pub struct TemplateDeviation {
    pub samples: Vec<(f64, f64)>,
    pub slope: f64,
}

pub fn template_deviation(branch: &Branch, model: &LatticeModel, r_lo: f64, r_hi: f64) -> Result<TemplateDeviation> {
    let kd = kernel_direction(model, branch.k, branch.family)?;
    let mut samples = Vec::new();
    for p in &branch.points {
        let Some(x) = &p.state else { continue };
        if p.r < r_lo || p.r > r_hi {
            continue;
        }
        let v0 = kd.direction.with_truncation(x.l0).to_real();
        let xv = x.to_real();
        let r = xv.dot(&v0);
        samples.push((r, (xv - v0 * r).norm()));
    }
    if samples.len() < 3 {
        return Err(Error::Precondition(format!("only {} branch points with r in [{r_lo}, {r_hi}]", samples.len())));
    }
    let m = samples.len() as f64;
    let (sx, sy) = samples.iter().fold((0.0, 0.0), |a, s| (a.0 + s.0.ln(), a.1 + s.1.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = samples.iter().fold((0.0, 0.0), |a, s| {
        let dx = s.0.ln() - mx;
        (a.0 + dx * (s.1.ln() - my), a.1 + dx * dx)
    });
    Ok(TemplateDeviation { samples, slope: num / den })
}

/// Residual of a branch point re-evaluated with twice the harmonics.
pub fn doubled_truncation_residual(model: &LatticeModel, x: &LoopState) -> Result<f64> {
    let gal = Galerkin::new(model, 2 * x.l0)?;
    Ok(gal.residual(&x.with_truncation(2 * x.l0))?.norm)
}

/// A zero of `det` of the first-harmonic block of `M(ν) = ν² − D²V(a)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub nu: f64,
    pub multiplicity: usize,
    /// More coincident eigenvalues than an irreducible block carries.
    pub degenerate: bool,
}

fn negative_count(m: DMatrix<f64>) -> usize {
    SymmetricEigen::new(m).eigenvalues.iter().filter(|&&v| v < 0.0).count()
}

/// Locates `λ_k(ν) = 0` on `[lo, hi]` by bisection on the number of
/// negative eigenvalues of `M(ν)`, restricted to `Fix(H)` when a group is
/// given.
pub fn frequency_scan(model: &LatticeModel, group: Option<&IsotropyGroup>, lo: f64, hi: f64) -> Result<Vec<Crossing>> {
    if !(0.0 < lo && lo < hi) {
        return Err(Error::Precondition(format!("invalid window [{lo}, {hi}]")));
    }
    let n = model.n;
    for k in 1..=n {
        let nk = nu_squared(model, k).max(0.0).sqrt();
        if (nk - lo).abs() < 1e-12 || (nk - hi).abs() < 1e-12 {
            return Err(Error::Precondition(format!("window endpoint sits on nu_{k} = {nk}")));
        }
    }
    let hess = model.hessian_at_equilibrium();
    let (block, irreducible): (Box<dyn Fn(f64) -> DMatrix<f64>>, usize) = match group {
        None => (Box::new(move |nu| DMatrix::identity(n, n) * (nu * nu) - &hess), 2),
        Some(g) => {
            let b = g.fixed_space(1, false)?.blocks[1].clone();
            let mut h2 = DMatrix::zeros(2 * n, 2 * n);
            h2.view_mut((0, 0), (n, n)).copy_from(&hess);
            h2.view_mut((n, n), (n, n)).copy_from(&hess);
            let reduced = b.transpose() * &h2 * &b;
            let d = b.ncols();
            (Box::new(move |nu| DMatrix::identity(d, d) * (nu * nu) - &reduced), 1)
        }
    };
    let count = |nu: f64| negative_count(block(nu));
    let mut out = Vec::new();
    let mut stack = vec![(lo, count(lo), hi, count(hi))];
    while let Some((a, ca, b, cb)) = stack.pop() {
        if ca == cb {
            continue;
        }
        if b - a <= 1e-10 {
            let multiplicity = ca - cb;
            out.push(Crossing { nu: 0.5 * (a + b), multiplicity, degenerate: multiplicity > irreducible });
            continue;
        }
        let m = 0.5 * (a + b);
        let cm = count(m);
        stack.push((a, ca, m, cm));
        stack.push((m, cm, b, cb));
    }
    out.sort_by(|x, y| x.nu.total_cmp(&y.nu));
    Ok(out)
}

/// Leading-order loop of a family at amplitude `r`, in the normalisation of
/// the orbit points `(x_{k,1}, x_{n−k,1}) = (r, 0)`, `(r, r)`, `(r, −r)` and
/// `(r, r e^{imζ})` (the last for `n̄` even).
pub fn template_loop(label: GroupLabel, n: usize, k: usize, r: f64, l0: usize) -> LoopState {
    let zeta = 2.0 * std::f64::consts::PI / n as f64;
    let n_bar = n / crate::symmetry::gcd(k, n);
    let m = crate::symmetry::modular_inverse(k / crate::symmetry::gcd(k, n), n_bar).unwrap_or(1) as f64;
    let mut x = LoopState::zeros(n, l0, 0.0);
    for j in 0..n {
        let th = (j * k) as f64 * zeta;
        // x_j(t) = 2 Re(X_j e^{it})
        x.coeffs[1][j] = match label {
            GroupLabel::T => Complex64::from_polar(r, th),
            GroupLabel::S => Complex64::new(2.0 * r * th.cos(), 0.0),
            GroupLabel::STilde if n_bar % 2 == 1 => Complex64::new(0.0, 2.0 * r * th.sin()),
            GroupLabel::STilde => Complex64::from_polar(2.0 * r * (th - m * zeta / 2.0).cos(), m * zeta / 2.0),
            _ => Complex64::new(0.0, 0.0),
        };
    }
    x
}
