//! The `D_n × O(2)` action on loops, the isotropy groups of the bifurcating
//! families, and bases of their fixed-point spaces.
//!
//! Conventions. A spatial element is a permutation `σ(j) = ±j + p (mod n)`
//! and acts by `(ρ(σ)x)_j = s^{flip} x_{σ(j)}`, where `s` is the model's
//! reflection parity (`+1` for even couplings). A temporal element is a
//! shift `φ` optionally preceded by time reversal, acting on harmonics as
//! `X_l ↦ e^{ilφ} X_l` or `X_l ↦ e^{ilφ} conj(X_l)`. Angles are stored as
//! integer multiples of `π/n`, so group closure is exact.
//!
//! A product such as `κζ` denotes `ρ(κ)ρ(ζ)`, i.e. `j ↦ 1 − j`.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{harmonic_range, real_dim, LoopState};
use crate::lattice::{mode_entry, LatticeModel};
use crate::linalg::range_basis;

/// Rank cutoff for fixed-space extraction.
pub const RANK_CUTOFF: f64 = 1e-8;
/// Largest tolerated `‖P² − P‖` of an averaged projector.
pub const IDEMPOTENCY_TOL: f64 = 1e-10;

/// An element of `D_n × O(2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupElement {
    pub n: usize,
    /// `σ(j) = ±j + rotation`; `flip` selects the minus sign.
    pub flip: bool,
    pub rotation: usize,
    /// Time shift in units of `π/n`, in `0..2n`.
    pub shift: usize,
    pub reversal: bool,
}

fn modulo(a: i64, m: usize) -> usize {
    a.rem_euclid(m as i64) as usize
}

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        Self { n, flip: false, rotation: 0, shift: 0, reversal: false }
    }

    /// `(σ, φ)` with `σ(j) = ±j + rotation` and `φ = shift·π/n`.
    pub fn new(n: usize, flip: bool, rotation: i64, shift: i64, reversal: bool) -> Self {
        Self { n, flip, rotation: modulo(rotation, n), shift: modulo(shift, 2 * n), reversal }
    }

    /// `(ζ^p, 0)`
    pub fn rotation(n: usize, p: i64) -> Self {
        Self::new(n, false, p, 0, false)
    }

    /// `(κζ^p, 0)`: `j ↦ p − j`.
    pub fn reflection(n: usize, p: i64) -> Self {
        Self::new(n, true, p, 0, false)
    }

    /// `(0, φ)` with `φ` in units of `π/n`.
    pub fn time_shift(n: usize, units: i64) -> Self {
        Self::new(n, false, 0, units, false)
    }

    /// `(0, φκ̄)`: `x(t) ↦ x(−t − φ)`.
    pub fn time_reversal(n: usize, units: i64) -> Self {
        Self::new(n, false, 0, units, true)
    }

    /// The spatial part of `self` combined with the temporal part of `other`.
    pub fn with_temporal(self, other: Self) -> Self {
        Self { shift: other.shift, reversal: other.reversal, ..self }
    }

    pub fn phi(&self) -> f64 {
        self.shift as f64 * PI / self.n as f64
    }

    /// `σ(j)`
    pub fn permute(&self, j: usize) -> usize {
        let j = if self.flip { (self.n - j % self.n) % self.n } else { j % self.n };
        (j + self.rotation) % self.n
    }

    /// `gh`, so that `ρ(gh) = ρ(g)ρ(h)`.
    pub fn compose(&self, h: &Self) -> Self {
        debug_assert_eq!(self.n, h.n);
        let n = self.n;
        // σ_{gh} = σ_h ∘ σ_g
        let eps_h: i64 = if h.flip { -1 } else { 1 };
        let rotation = eps_h * self.rotation as i64 + h.rotation as i64;
        let shift = if self.reversal {
            self.shift as i64 - h.shift as i64
        } else {
            self.shift as i64 + h.shift as i64
        };
        Self::new(n, self.flip ^ h.flip, rotation, shift, self.reversal ^ h.reversal)
    }

    pub fn inverse(&self) -> Self {
        let n = self.n;
        let rotation = if self.flip { self.rotation as i64 } else { -(self.rotation as i64) };
        let shift = if self.reversal { self.shift as i64 } else { -(self.shift as i64) };
        Self::new(n, self.flip, rotation, shift, self.reversal)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    /// `ρ(g)` on scaled real coordinates.
    pub fn act_real(&self, parity: i8, v: &[f64], l0: usize) -> DVector<f64> {
        let n = self.n;
        let sign = if self.flip && parity < 0 { -1.0 } else { 1.0 };
        let mut out = DVector::zeros(real_dim(n, l0));
        for j in 0..n {
            out[j] = sign * v[self.permute(j)];
        }
        let phi = self.phi();
        for l in 1..=l0 {
            let r = harmonic_range(n, l);
            let rot = Complex64::from_polar(sign, l as f64 * phi);
            for j in 0..n {
                let src = self.permute(j);
                let mut c = Complex64::new(v[r.start + src], v[r.start + n + src]);
                if self.reversal {
                    c = c.conj();
                }
                let c = rot * c;
                out[r.start + j] = c.re;
                out[r.start + n + j] = c.im;
            }
        }
        out
    }

    pub fn act(&self, parity: i8, x: &LoopState) -> LoopState {
        let v = self.act_real(parity, x.to_real().as_slice(), x.l0);
        LoopState::from_real(x.n, x.l0, x.nu, v.as_slice())
    }

    /// Matrix of `ρ(g)` on harmonic `l` (size `n` for `l = 0`, `2n` otherwise).
    pub fn harmonic_matrix(&self, parity: i8, l: usize) -> DMatrix<f64> {
        let n = self.n;
        let r = harmonic_range(n, l);
        let size = r.len();
        let mut m = DMatrix::zeros(size, size);
        let mut v = vec![0.0; real_dim(n, l)];
        for c in 0..size {
            v.iter_mut().for_each(|x| *x = 0.0);
            v[r.start + c] = 1.0;
            let out = self.act_real(parity, &v, l);
            for i in 0..size {
                m[(i, c)] = out[r.start + i];
            }
        }
        m
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spatial = match (self.flip, self.rotation) {
            (false, 0) => "0".to_string(),
            (false, p) => format!("{p}ζ"),
            (true, 0) => "κ".to_string(),
            (true, p) => format!("κ{p}ζ"),
        };
        let temporal = match (self.shift, self.reversal) {
            (0, false) => "0".to_string(),
            (0, true) => "κ̄".to_string(),
            (s, rev) => format!("{s}π/{}{}", self.n, if rev { "κ̄" } else { "" }),
        };
        write!(f, "({spatial},{temporal})")
    }
}

/// Families of isotropy groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLabel {
    /// Travelling waves `T_k` (including `T_n`, `T_{n/2}`).
    T,
    /// Standing waves of the first kind `S_k`.
    S,
    /// Standing waves of the second kind `S̃_k`.
    #[serde(alias = "stilde")]
    STilde,
    /// `S = ⟨(κ,0),(0,κ̄)⟩`, used by the cradle.
    CradleS,
    /// `S̃`, used by the cradle.
    #[serde(alias = "cradle_stilde")]
    CradleSTilde,
    /// The trivial group.
    Trivial,
}

impl GroupLabel {
    pub fn name(&self) -> &'static str {
        match self {
            GroupLabel::T => "T",
            GroupLabel::S => "S",
            GroupLabel::STilde => "S~",
            GroupLabel::CradleS => "cradle_S",
            GroupLabel::CradleSTilde => "cradle_S~",
            GroupLabel::Trivial => "trivial",
        }
    }

    /// The three families bifurcating from a two-dimensional mode block.
    pub fn families() -> [GroupLabel; 3] {
        [GroupLabel::T, GroupLabel::S, GroupLabel::STilde]
    }
}

impl std::str::FromStr for GroupLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" => Ok(GroupLabel::T),
            "s" => Ok(GroupLabel::S),
            "stilde" | "s_tilde" | "s~" => Ok(GroupLabel::STilde),
            "cradle_s" => Ok(GroupLabel::CradleS),
            "cradle_stilde" | "cradle_s_tilde" | "cradle_s~" => Ok(GroupLabel::CradleSTilde),
            "trivial" => Ok(GroupLabel::Trivial),
            _ => Err(Error::Config(format!("unknown group family `{s}`"))),
        }
    }
}

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `m` with `m·a ≡ 1 (mod modulus)`, if it exists.
pub fn modular_inverse(a: usize, modulus: usize) -> Option<usize> {
    if modulus == 1 {
        return Some(0);
    }
    (1..modulus).find(|m| (m * a) % modulus == 1)
}

/// An isotropy subgroup of `D_n × O(2)` with its enumerated elements.
#[derive(Clone, Debug, Serialize)]
pub struct IsotropyGroup {
    pub label: GroupLabel,
    pub n: usize,
    /// Mode index (`0` for the cradle groups and the trivial group).
    pub k: usize,
    /// `h = gcd(k, n)`, `k̄ = k/h`, `n̄ = n/h`.
    pub h: usize,
    pub k_bar: usize,
    pub n_bar: usize,
    /// Inverse of `k̄` mod `n̄` when `n̄` is even.
    pub m: Option<usize>,
    pub generators: Vec<GroupElement>,
    #[serde(skip)]
    pub elements: Vec<GroupElement>,
    /// Reflection parity of the realising model.
    pub parity: i8,
}

/// Closure of a generating set, sorted.
pub fn closure(n: usize, generators: &[GroupElement]) -> Vec<GroupElement> {
    let id = GroupElement::identity(n);
    let mut seen = BTreeSet::from([id]);
    let mut queue = VecDeque::from([id]);
    while let Some(g) = queue.pop_front() {
        for s in generators {
            let h = g.compose(s);
            if seen.insert(h) {
                queue.push_back(h);
            }
        }
    }
    seen.into_iter().collect()
}

/// Builds the isotropy group of a family from its tabulated generators.
pub fn build_isotropy(label: GroupLabel, n: usize, k: usize) -> Result<IsotropyGroup> {
    if n < 3 {
        return Err(Error::InvalidGroup(format!("n = {n} must be at least 3")));
    }
    let e = GroupElement::new;
    let ni = n as i64;
    let (k, h, k_bar, n_bar) = match label {
        GroupLabel::CradleS | GroupLabel::CradleSTilde | GroupLabel::Trivial => (0, n, 0, 1),
        _ => {
            let k = if k == 0 { n } else { k };
            if k > n / 2 && k != n {
                return Err(Error::InvalidGroup(format!("mode k = {k} outside [1, n/2] ∪ {{n}} for n = {n}")));
            }
            let h = gcd(k, n);
            (k, h, k / h, n / h)
        }
    };
    let two_dim_block = k >= 1 && 2 * k < n;
    if matches!(label, GroupLabel::S | GroupLabel::STilde) && !two_dim_block {
        return Err(Error::InvalidGroup(format!(
            "{}_k needs a two-dimensional block, k in [1, n/2); got k = {k}, n = {n}",
            label.name()
        )));
    }
    let m = if two_dim_block && n_bar % 2 == 0 { modular_inverse(k_bar, n_bar) } else { None };
    let nb = n_bar as i64;
    let half_pi = ni; // π in units of π/n
    let generators = match label {
        GroupLabel::T if k == n => vec![e(n, false, 1, 0, false), e(n, true, 0, 0, false), e(n, false, 0, 0, true)],
        GroupLabel::T if 2 * k == n => {
            vec![e(n, false, 1, half_pi, false), e(n, true, 0, 0, false), e(n, false, 0, 0, true)]
        }
        GroupLabel::T => vec![
            e(n, false, 1, -2 * k as i64, false),
            e(n, true, 0, 0, true),
            e(n, false, nb, 0, false),
        ],
        GroupLabel::S if n_bar % 2 == 1 => {
            vec![e(n, true, 0, 0, false), e(n, false, 0, 0, true), e(n, false, nb, 0, false)]
        }
        GroupLabel::STilde if n_bar % 2 == 1 => vec![
            e(n, true, 0, half_pi, false),
            e(n, false, 0, half_pi, true),
            e(n, false, nb, 0, false),
        ],
        GroupLabel::S => {
            let m = m.unwrap() as i64;
            vec![
                e(n, true, 0, 0, false),
                e(n, false, 0, 0, true),
                e(n, false, nb / 2 * m, half_pi, false),
                e(n, false, nb, 0, false),
            ]
        }
        GroupLabel::STilde => {
            let m = m.unwrap() as i64;
            vec![
                e(n, true, m, 0, false),
                e(n, false, 0, 2 * m, true),
                e(n, false, nb / 2 * m, half_pi, false),
                e(n, false, nb, 0, false),
            ]
        }
        GroupLabel::CradleS => vec![e(n, true, 0, 0, false), e(n, false, 0, 0, true)],
        GroupLabel::CradleSTilde if n % 2 == 1 => {
            vec![e(n, true, 0, half_pi, false), e(n, false, 0, half_pi, true)]
        }
        GroupLabel::CradleSTilde => vec![e(n, true, 1, 0, false), e(n, false, 0, 2, true)],
        GroupLabel::Trivial => vec![],
    };
    let elements = closure(n, &generators);
    if elements.len() > 8 * n * n {
        return Err(Error::InvalidGroup(format!("closure has {} elements", elements.len())));
    }
    Ok(IsotropyGroup { label, n, k, h, k_bar, n_bar, m, generators, elements, parity: 1 })
}

/// First-harmonic block of a loop in the coordinates `(x_{k,1}, x_{n−k,1})`.
pub fn mode_pair(x: &LoopState, k: usize) -> (Complex64, Complex64) {
    let n = x.n;
    let coord = |kk: usize| -> Complex64 {
        (0..n).map(|j| mode_entry(n, kk, j).conj() * x.coeffs[1][j]).sum()
    };
    (coord(k % n), coord((n - k % n) % n))
}

/// Orthonormal real basis of the first-harmonic block spanned by `e_k` and
/// `e_{n−k}` (two vectors when they coincide).
pub fn mode_block_basis(n: usize, k: usize) -> DMatrix<f64> {
    let kk = [k % n, (n - k % n) % n];
    let modes: Vec<usize> = if kk[0] == kk[1] { vec![kk[0]] } else { kk.to_vec() };
    let l0 = 1;
    let r = harmonic_range(n, 1);
    let mut cols = Vec::new();
    for &m in &modes {
        for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            let c: Vec<Complex64> = (0..n).map(|j| unit * mode_entry(n, m, j) / 2f64.sqrt()).collect();
            let v = LoopState::single_harmonic(l0, 1.0, 1, &c).to_real();
            cols.push(DVector::from_iterator(2 * n, v.rows(r.start, 2 * n).iter().copied()));
        }
    }
    DMatrix::from_columns(&cols)
}

/// Orthonormal basis of `Fix(H)` inside a truncated loop space.
#[derive(Clone, Debug)]
pub struct FixedSpaceBasis {
    pub n: usize,
    pub l0: usize,
    /// Basis of each harmonic block, `blocks[l]` has `n` or `2n` rows.
    pub blocks: Vec<DMatrix<f64>>,
}

impl FixedSpaceBasis {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.ncols()).sum()
    }

    pub fn harmonic_dim(&self, l: usize) -> usize {
        self.blocks[l].ncols()
    }

    /// Columns for the selected harmonics, embedded in full scaled coordinates.
    pub fn embed(&self, keep: impl Fn(usize) -> bool) -> DMatrix<f64> {
        let dim = real_dim(self.n, self.l0);
        let chosen: Vec<usize> = (0..=self.l0).filter(|&l| keep(l)).collect();
        let cols: usize = chosen.iter().map(|&l| self.blocks[l].ncols()).sum();
        let mut out = DMatrix::zeros(dim, cols);
        let mut c = 0;
        for l in chosen {
            let b = &self.blocks[l];
            let r = harmonic_range(self.n, l);
            out.view_mut((r.start, c), (r.len(), b.ncols())).copy_from(b);
            c += b.ncols();
        }
        out
    }

    pub fn full(&self) -> DMatrix<f64> {
        self.embed(|_| true)
    }
}

impl IsotropyGroup {
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.elements.binary_search(g).is_ok()
    }

    /// The same group acting through `model`'s reflection parity.
    pub fn for_model(&self, model: &LatticeModel) -> Result<IsotropyGroup> {
        if model.n != self.n {
            return Err(Error::InvalidGroup(format!("group for n = {} used with n = {}", self.n, model.n)));
        }
        let parity = match model.reflection_parity() {
            Some(p) => p,
            None if self.elements.iter().all(|g| !g.flip) => 1,
            None => {
                return Err(Error::InvalidGroup(
                    "the ring reflection is not a symmetry of this model".into(),
                ))
            }
        };
        Ok(IsotropyGroup { parity, ..self.clone() })
    }

    /// `P_l = |H|^{-1} Σ_g ρ_l(g)` on harmonic `l`.
    pub fn projector(&self, l: usize) -> DMatrix<f64> {
        let size = if l == 0 { self.n } else { 2 * self.n };
        let mut p = DMatrix::zeros(size, size);
        for g in &self.elements {
            p += g.harmonic_matrix(self.parity, l);
        }
        p / self.elements.len() as f64
    }

    /// Fixed-point space on harmonics `0..=l0`; `zero_mean` removes the
    /// in-phase direction from every harmonic.
    pub fn fixed_space(&self, l0: usize, zero_mean: bool) -> Result<FixedSpaceBasis> {
        let n = self.n;
        let mut blocks = Vec::with_capacity(l0 + 1);
        for l in 0..=l0 {
            let mut p = self.projector(l);
            let defect = (&p * &p - &p).amax();
            if defect > IDEMPOTENCY_TOL {
                return Err(Error::NotIdempotent(defect));
            }
            if zero_mean {
                let size = p.nrows();
                let mut z = DMatrix::<f64>::identity(size, size);
                for part in 0..size / n {
                    for i in 0..n {
                        for j in 0..n {
                            z[(part * n + i, part * n + j)] -= 1.0 / n as f64;
                        }
                    }
                }
                p = &z * p * &z;
            }
            blocks.push(range_basis(&p, RANK_CUTOFF));
        }
        Ok(FixedSpaceBasis { n, l0, blocks })
    }

    /// `dim Fix(H)` inside the first-harmonic block of modes `k`, `n − k`.
    pub fn block_dim(&self, k: usize) -> usize {
        let b = mode_block_basis(self.n, k);
        let p = b.transpose() * self.projector(1) * &b;
        range_basis(&p, RANK_CUTOFF).ncols()
    }

    /// Unit vector spanning `Fix(H)` in the block of mode `k` at harmonic 1,
    /// in full scaled coordinates for truncation `l0`.
    ///
    /// The sign is fixed so that the leading mode coordinate has positive
    /// real part (imaginary part when the real part vanishes).
    pub fn kernel_direction(&self, k: usize, l0: usize) -> Result<DVector<f64>> {
        let b = mode_block_basis(self.n, k);
        let p = b.transpose() * self.projector(1) * &b;
        let range = range_basis(&p, RANK_CUTOFF);
        if range.ncols() != 1 {
            return Err(Error::InvalidGroup(format!(
                "{} has a {}-dimensional fixed space in the block of mode {k}",
                self.label.name(),
                range.ncols()
            )));
        }
        let local = &b * range.column(0);
        let mut v = DVector::zeros(real_dim(self.n, l0));
        let r = harmonic_range(self.n, 1);
        v.rows_mut(r.start, 2 * self.n).copy_from(&local);
        let x = LoopState::from_real(self.n, l0, 1.0, v.as_slice());
        let (z1, z2) = mode_pair(&x, k);
        let lead = if z1.norm() > 1e-8 { z1 } else { z2 };
        let key = if lead.re.abs() > 1e-8 { lead.re } else { lead.im };
        if key < 0.0 {
            v.neg_mut();
        }
        Ok(v.normalize())
    }

    /// Max over generators of `‖ρ(g)x − x‖ / ‖x‖` (absolute for tiny loops).
    pub fn coefficient_residual(&self, x: &LoopState) -> f64 {
        let v = x.to_real();
        let scale = v.norm().max(1e-300);
        self.generators
            .iter()
            .map(|g| (g.act_real(self.parity, v.as_slice(), x.l0) - &v).norm())
            .fold(0.0, f64::max)
            / if scale < 1e-12 { 1.0 } else { scale }
    }

    /// Time-domain form of the symmetry relations,
    /// `x_j(t) = s^{flip} x_{σ(j)}(±t + φ)`, checked on `samples` times by
    /// direct trigonometric summation; relative to the sup norm of `x`.
    pub fn time_domain_residual(&self, x: &LoopState, samples: usize) -> f64 {
        let n = self.n;
        let times: Vec<f64> = (0..samples).map(|s| 2.0 * PI * s as f64 / samples as f64 + 0.1).collect();
        let mut sup: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for g in &self.generators {
            let sign = if g.flip && self.parity < 0 { -1.0 } else { 1.0 };
            for &t in &times {
                let lhs = x.eval(t);
                let tau = if g.reversal { -t - g.phi() } else { t + g.phi() };
                let rhs = x.eval(tau);
                for j in 0..n {
                    sup = sup.max(lhs[j].abs());
                    worst = worst.max((lhs[j] - sign * rhs[g.permute(j)]).abs());
                }
            }
        }
        if sup < 1e-12 {
            worst
        } else {
            worst / sup
        }
    }

    /// Pattern name of the family: `T`, `1SI`–`3SI`, `1SII`–`3SII`.
    pub fn pattern(&self) -> &'static str {
        let kind = match self.label {
            GroupLabel::T => return "T",
            GroupLabel::Trivial => return "none",
            GroupLabel::S | GroupLabel::CradleS => 0,
            GroupLabel::STilde | GroupLabel::CradleSTilde => 1,
        };
        let nb = if matches!(self.label, GroupLabel::CradleS | GroupLabel::CradleSTilde) {
            self.n
        } else {
            self.n_bar
        };
        let case = if nb % 2 == 1 {
            0
        } else if (nb / 2) % 2 == 1 {
            1
        } else {
            2
        };
        [["1SI", "2SI", "3SI"], ["1SII", "2SII", "3SII"]][kind][case]
    }

    /// Per-oscillator properties implied by the group: evenness about a
    /// time `c` (`x_j(c + t) = x_j(c − t)`), `π`-periodicity, and the
    /// oscillators it must equal up to half-period shifts.
    pub fn oscillator_properties(&self) -> Vec<OscillatorProperty> {
        (0..self.n)
            .map(|j| {
                let mut even_about = None;
                let mut pi_periodic = false;
                let mut odd_about = None;
                for g in &self.elements {
                    if g.permute(j) != j {
                        continue;
                    }
                    let sign = if g.flip && self.parity < 0 { -1 } else { 1 };
                    if g.reversal {
                        // x_j(t) = ±x_j(−t − φ): symmetric about −φ/2
                        let c = (-(g.phi()) / 2.0).rem_euclid(PI);
                        if sign > 0 {
                            even_about.get_or_insert(c);
                        } else {
                            odd_about.get_or_insert(c);
                        }
                    } else if g.shift == self.n && sign > 0 {
                        pi_periodic = true;
                    }
                }
                OscillatorProperty { j, even_about, odd_about, pi_periodic }
            })
            .collect()
    }

    /// Checks the per-oscillator properties on a loop by sampling.
    pub fn property_residual(&self, x: &LoopState, samples: usize) -> f64 {
        let props = self.oscillator_properties();
        let mut worst: f64 = 0.0;
        for s in 0..samples {
            let t = 2.0 * PI * s as f64 / samples as f64 + 0.05;
            for p in &props {
                if let Some(c) = p.even_about {
                    worst = worst.max((x.eval(c + t)[p.j] - x.eval(c - t)[p.j]).abs());
                }
                if let Some(c) = p.odd_about {
                    worst = worst.max((x.eval(c + t)[p.j] + x.eval(c - t)[p.j]).abs());
                }
                if p.pi_periodic {
                    worst = worst.max((x.eval(t + PI)[p.j] - x.eval(t)[p.j]).abs());
                }
            }
        }
        let scale = x.norm();
        if scale < 1e-12 {
            worst
        } else {
            worst / scale
        }
    }
}

/// Symmetry of a single oscillator's time profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillatorProperty {
    pub j: usize,
    pub even_about: Option<f64>,
    pub odd_about: Option<f64>,
    pub pi_periodic: bool,
}

/// Combined coefficient and time-domain symmetry residual.
pub fn symmetry_residual(x: &LoopState, group: &IsotropyGroup) -> f64 {
    group
        .coefficient_residual(x)
        .max(group.time_domain_residual(x, 64))
        .max(group.property_residual(x, 32))
}

/// The Weyl element `(0, π)`, which acts as `−1` on first-harmonic fixed spaces.
pub fn weyl_element(n: usize) -> GroupElement {
    GroupElement::time_shift(n, n as i64)
}

/// First-harmonic fixed-space dimensions of the cradle groups predicted by
/// the Weinstein–Moser count (for an even coupling).
pub fn weinstein_moser_dims(n: usize) -> (usize, usize) {
    if n % 2 == 1 {
        ((n + 1) / 2, (n - 1) / 2)
    } else {
        (n / 2 + 1, n / 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::Galerkin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_element(rng: &mut ChaCha8Rng, n: usize) -> GroupElement {
        GroupElement::new(
            n,
            rng.gen(),
            rng.gen_range(0..n as i64),
            rng.gen_range(0..2 * n as i64),
            rng.gen(),
        )
    }

    fn random_loop(rng: &mut ChaCha8Rng, n: usize, l0: usize, scale: f64) -> LoopState {
        let v: Vec<f64> = (0..real_dim(n, l0)).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        LoopState::from_real(n, l0, 1.3, &v)
    }

    #[test]
    fn identity_and_weyl_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_loop(&mut rng, 5, 3, 1.0);
        assert_eq!(GroupElement::identity(5).act(1, &x), x);
        let c: Vec<Complex64> = (0..5).map(|j| Complex64::new(j as f64, 1.0)).collect();
        let first = LoopState::single_harmonic(3, 1.0, 1, &c);
        let shifted = weyl_element(5).act(1, &first);
        for (a, b) in shifted.coeffs[1].iter().zip(&c) {
            assert!((a + b).norm() < 1e-14);
        }
    }

    #[test]
    fn travelling_template_is_fixed_by_the_generator() {
        // 2 Re(e^{it} e_1) sampled before and after (ζ, −ζ)
        let n = 7;
        let c: Vec<Complex64> = (0..n).map(|j| mode_entry(n, 1, j)).collect();
        let x = LoopState::single_harmonic(2, 1.0, 1, &c);
        let g = GroupElement::new(n, false, 1, -2, false);
        let y = g.act(1, &x);
        for s in 0..20 {
            let t = 0.3 * s as f64;
            let (a, b) = (x.eval(t), y.eval(t));
            for j in 0..n {
                assert!((a[j] - b[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn composition_is_a_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.gen_range(3..10);
            let (g, h) = (random_element(&mut rng, n), random_element(&mut rng, n));
            let x = random_loop(&mut rng, n, 4, 1.0);
            for parity in [1, -1] {
                let lhs = g.compose(&h).act(parity, &x).to_real();
                let rhs = g.act(parity, &h.act(parity, &x)).to_real();
                assert!((lhs - rhs).norm() <= 1e-12);
            }
            assert!(g.compose(&g.inverse()).is_identity());
            assert!(g.inverse().compose(&g).is_identity());
        }
    }

    #[test]
    fn actions_are_orthogonal_and_keep_samples_real() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(3..9);
            let g = random_element(&mut rng, n);
            for l in 0..3 {
                let m = g.harmonic_matrix(-1, l);
                let err = (m.transpose() * &m - DMatrix::identity(m.nrows(), m.nrows())).amax();
                assert!(err < 1e-13);
            }
        }
    }

    #[test]
    fn tabulated_generators() {
        let t6 = build_isotropy(GroupLabel::T, 6, 6).unwrap();
        assert_eq!(
            t6.generators,
            vec![
                GroupElement::rotation(6, 1),
                GroupElement::reflection(6, 0),
                GroupElement::time_reversal(6, 0)
            ]
        );
        let st = build_isotropy(GroupLabel::STilde, 5, 1).unwrap();
        assert_eq!(st.generators[2], GroupElement::identity(5));
        assert_eq!(st.generators[0], GroupElement::new(5, true, 0, 5, false));
        assert_eq!(st.generators[1], GroupElement::new(5, false, 0, 5, true));
        let st = build_isotropy(GroupLabel::STilde, 6, 2).unwrap();
        assert_eq!((st.h, st.k_bar, st.n_bar), (2, 1, 3));
        assert_eq!(st.generators[2], GroupElement::rotation(6, 3));
        assert!(!st.generators[2].is_identity());
        let s8 = build_isotropy(GroupLabel::S, 8, 3).unwrap();
        assert_eq!(s8.m, Some(3));
        assert_eq!((s8.m.unwrap() * s8.k_bar) % s8.n_bar, 1);
        assert!(build_isotropy(GroupLabel::S, 6, 3).is_err());
        assert!(build_isotropy(GroupLabel::T, 6, 4).is_err());
        assert!(build_isotropy(GroupLabel::T, 2, 1).is_err());
    }

    #[test]
    fn fixed_space_dimensions_match_the_count() {
        for n in 3..=12 {
            let s = build_isotropy(GroupLabel::CradleS, n, 0).unwrap().fixed_space(1, false).unwrap();
            let st = build_isotropy(GroupLabel::CradleSTilde, n, 0).unwrap().fixed_space(1, false).unwrap();
            assert_eq!((s.harmonic_dim(1), st.harmonic_dim(1)), weinstein_moser_dims(n), "n = {n}");
            for k in 1..=n {
                if k > n / 2 && k != n {
                    continue;
                }
                for label in GroupLabel::families() {
                    let Ok(g) = build_isotropy(label, n, k) else { continue };
                    assert_eq!(g.block_dim(k), 1, "{} n = {n} k = {k}", label.name());
                }
            }
        }
    }

    #[test]
    fn orbit_points_of_the_first_mode() {
        let n = 5;
        let dir = |label| {
            let g = build_isotropy(label, n, 1).unwrap();
            let v = g.kernel_direction(1, 1).unwrap();
            mode_pair(&LoopState::from_real(n, 1, 1.0, v.as_slice()), 1)
        };
        let (z1, z2) = dir(GroupLabel::T);
        assert!(z2.norm() < 1e-12 && z1.im.abs() < 1e-12 && z1.re > 0.0);
        let (z1, z2) = dir(GroupLabel::S);
        assert!((z1 - z2).norm() < 1e-12 && z1.im.abs() < 1e-12 && z1.re > 0.0);
        let (z1, z2) = dir(GroupLabel::STilde);
        assert!((z1 + z2).norm() < 1e-12 && z1.im.abs() < 1e-12);
        // n even: (r, r e^{iζ})
        let n = 6;
        let g = build_isotropy(GroupLabel::STilde, n, 1).unwrap();
        let v = g.kernel_direction(1, 1).unwrap();
        let (z1, z2) = mode_pair(&LoopState::from_real(n, 1, 1.0, v.as_slice()), 1);
        let zeta = 2.0 * PI / n as f64;
        assert!((z2 / z1 - Complex64::from_polar(1.0, zeta)).norm() < 1e-12);
        assert!(z1.im.abs() < 1e-12);
    }

    #[test]
    fn fixed_space_vectors_are_invariant() {
        for (label, n, k) in [
            (GroupLabel::T, 6, 1),
            (GroupLabel::S, 8, 2),
            (GroupLabel::STilde, 10, 2),
            (GroupLabel::STilde, 12, 4),
            (GroupLabel::CradleSTilde, 6, 0),
        ] {
            for parity in [1, -1] {
                let g = IsotropyGroup { parity, ..build_isotropy(label, n, k).unwrap() };
                let basis = g.fixed_space(3, parity < 0).unwrap().full();
                for c in 0..basis.ncols() {
                    let v: Vec<f64> = basis.column(c).iter().copied().collect();
                    for e in &g.generators {
                        let w = e.act_real(parity, &v, 3);
                        let err = (w - basis.column(c)).norm();
                        assert!(err <= 1e-12, "{} n={n} k={k} parity={parity} err={err:e}", label.name());
                    }
                }
                let ortho = basis.transpose() * &basis - DMatrix::identity(basis.ncols(), basis.ncols());
                assert!(ortho.amax() < 1e-12);
            }
        }
    }

    #[test]
    fn weyl_element_negates_first_mode_fixed_spaces() {
        for n in 3..=9 {
            for label in [GroupLabel::CradleS, GroupLabel::CradleSTilde] {
                let b = build_isotropy(label, n, 0).unwrap().fixed_space(1, false).unwrap().embed(|l| l == 1);
                let w = weyl_element(n);
                for c in 0..b.ncols() {
                    let v: Vec<f64> = b.column(c).iter().copied().collect();
                    assert!((w.act_real(1, &v, 1) + b.column(c)).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn residual_map_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [LatticeModel::pendulum(6, 1.0).unwrap(), LatticeModel::cradle(5, 1.0).unwrap()] {
            let parity = model.reflection_parity().unwrap();
            let gal = Galerkin::new(&model, 5).unwrap();
            for _ in 0..40 {
                let g = random_element(&mut rng, model.n);
                let x = random_loop(&mut rng, model.n, 5, 0.4);
                let lhs = gal.residual(&g.act(parity, &x)).unwrap().coeffs.to_real();
                let rhs = g.act(parity, &gal.residual(&x).unwrap().coeffs).to_real();
                assert!((lhs - rhs).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn residual_predicates() {
        let n = 7;
        let zero = LoopState::zeros(n, 3, 1.0);
        let t = build_isotropy(GroupLabel::T, n, 2).unwrap();
        assert_eq!(symmetry_residual(&zero, &t), 0.0);

        // 2r cos(t + jkζ) against T_k
        let r = 0.1;
        let k = 2;
        let c: Vec<Complex64> = (0..n).map(|j| mode_entry(n, k, j) * r * (n as f64).sqrt()).collect();
        let tw = LoopState::single_harmonic(3, 1.0, 1, &c);
        assert!(symmetry_residual(&tw, &t) <= 1e-12);

        // 4r cos(jkζ) cos t is S_k-fixed but not S̃_k-fixed
        let zeta = 2.0 * PI / n as f64;
        let c: Vec<Complex64> =
            (0..n).map(|j| Complex64::new(2.0 * r * (j as f64 * k as f64 * zeta).cos(), 0.0)).collect();
        let sw = LoopState::single_harmonic(3, 1.0, 1, &c);
        for s in 0..10 {
            let t = 0.37 * s as f64;
            for j in 0..n {
                let expect = 4.0 * r * (j as f64 * k as f64 * zeta).cos() * t.cos();
                assert!((sw.eval(t)[j] - expect).abs() < 1e-14);
            }
        }
        let s_k = build_isotropy(GroupLabel::S, n, k).unwrap();
        let st_k = build_isotropy(GroupLabel::STilde, n, k).unwrap();
        assert!(symmetry_residual(&sw, &s_k) <= 1e-12);
        assert!(symmetry_residual(&sw, &st_k) > 0.5);
    }

    #[test]
    fn pattern_names_and_oscillator_properties() {
        let name = |label, n, k| build_isotropy(label, n, k).unwrap().pattern();
        assert_eq!(name(GroupLabel::T, 7, 1), "T");
        assert_eq!(name(GroupLabel::S, 7, 1), "1SI");
        assert_eq!(name(GroupLabel::S, 6, 1), "2SI");
        assert_eq!(name(GroupLabel::S, 8, 1), "3SI");
        assert_eq!(name(GroupLabel::STilde, 7, 2), "1SII");
        assert_eq!(name(GroupLabel::STilde, 10, 1), "2SII");
        assert_eq!(name(GroupLabel::STilde, 12, 1), "3SII");

        // n̄ odd, S_k: every oscillator is even in time
        let p = build_isotropy(GroupLabel::S, 7, 1).unwrap().oscillator_properties();
        assert!(p.iter().all(|o| o.even_about == Some(0.0)));
        // n̄ = 4m + 4, S_k: x_m (j = n̄/4 = 2 for n = 8) is π-periodic
        let p = build_isotropy(GroupLabel::S, 8, 1).unwrap().oscillator_properties();
        assert!(p[2].pi_periodic && p[6].pi_periodic && !p[1].pi_periodic);
        // n̄ odd, S̃_k: x_0 is even and π-periodic
        let p = build_isotropy(GroupLabel::STilde, 7, 1).unwrap().oscillator_properties();
        assert!(p[0].pi_periodic && p[0].even_about.is_some());
    }

    #[test]
    fn model_parity_is_inherited() {
        let g = build_isotropy(GroupLabel::CradleS, 5, 0).unwrap();
        assert_eq!(g.for_model(&LatticeModel::cradle(5, 1.0).unwrap()).unwrap().parity, -1);
        assert_eq!(g.for_model(&LatticeModel::pendulum(5, 1.0).unwrap()).unwrap().parity, 1);
        assert!(g.for_model(&LatticeModel::pendulum(6, 1.0).unwrap()).is_err());
        // for the one-sided cradle the two counts swap
        let cradle = LatticeModel::cradle(5, 1.0).unwrap();
        let s = g.for_model(&cradle).unwrap().fixed_space(1, false).unwrap();
        let st = build_isotropy(GroupLabel::CradleSTilde, 5, 0)
            .unwrap()
            .for_model(&cradle)
            .unwrap()
            .fixed_space(1, false)
            .unwrap();
        assert_eq!((s.harmonic_dim(1), st.harmonic_dim(1)), (2, 3));
    }
}
