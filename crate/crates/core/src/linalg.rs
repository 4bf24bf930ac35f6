//! Dense Newton iteration shared by the slave solve, the branch corrector and
//! the cradle polish, plus a rank-revealing range extraction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Converged once `‖F‖ <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtrack on `‖F‖` when a full step does not decrease it.
    pub damped: bool,
    /// Declare divergence once `‖F‖` exceeds this multiple of the initial norm.
    pub blowup: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 30, damped: false, blowup: 1e8 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Solves `F(x) = 0` for square systems; `system` returns `(F(x), DF(x))`.
pub fn newton<F>(x0: DVector<f64>, mut system: F, opts: NewtonOptions, what: &'static str) -> Result<NewtonOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let mut x = x0;
    let (mut f, mut jac) = system(&x)?;
    let mut norm = f.norm();
    let initial = norm.max(f64::MIN_POSITIVE);
    let fail = |iterations, residual| Error::NoConvergence { what, iterations, residual };
    for it in 0..opts.max_iter {
        if !norm.is_finite() || norm > (opts.blowup * initial).max(1.0) {
            return Err(fail(it, norm));
        }
        if norm <= opts.tol {
            return Ok(NewtonOutcome { x, residual: norm, iterations: it });
        }
        let step = jac.clone().lu().solve(&(-&f)).ok_or_else(|| fail(it, norm))?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(fail(it, norm));
        }
        let mut lambda = 1.0;
        loop {
            let trial = &x + &step * lambda;
            let evaluated = system(&trial);
            match evaluated {
                Ok((f_new, j_new)) => {
                    let n_new = f_new.norm();
                    let accept = !opts.damped || n_new < norm || lambda < 1.0 / 64.0;
                    if accept && n_new.is_finite() {
                        // a full step that only stalls at round-off level still counts
                        let stalled = n_new >= norm && step.norm() <= 1e-14 * (1.0 + x.norm());
                        x = trial;
                        f = f_new;
                        jac = j_new;
                        norm = n_new;
                        if stalled {
                            return if norm <= opts.tol * 100.0 {
                                Ok(NewtonOutcome { x, residual: norm, iterations: it + 1 })
                            } else {
                                Err(fail(it + 1, norm))
                            };
                        }
                        break;
                    }
                }
                Err(e) if !opts.damped => return Err(e),
                Err(_) => {}
            }
            lambda *= 0.5;
            if lambda < 1.0 / 64.0 {
                return Err(fail(it + 1, norm));
            }
        }
    }
    if norm <= opts.tol {
        Ok(NewtonOutcome { x, residual: norm, iterations: opts.max_iter })
    } else {
        Err(fail(opts.max_iter, norm))
    }
}

/// Orthonormal basis of the range of `m`, keeping directions whose singular
/// value exceeds `cutoff`, ordered by decreasing singular value.
pub fn range_basis(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return DMatrix::zeros(rows, 0);
    }
    // Eigenvectors of the symmetric matrix M or M Mᵀ. nalgebra's SVD loses
    // accuracy on some exactly rank-deficient projectors.
    let symmetric = m.is_square() && (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax());
    let (gram, threshold) = if symmetric {
        (0.5 * (m + m.transpose()), cutoff)
    } else {
        (m * m.transpose(), cutoff * cutoff)
    };
    let eig = SymmetricEigen::new(gram);
    let mut keep: Vec<usize> =
        (0..rows).filter(|&i| eig.eigenvalues[i].abs() > threshold).collect();
    keep.sort_by(|&a, &b| {
        eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()).then(a.cmp(&b))
    });
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(i));
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_small_system() {
        // x² + y² = 4, x = y
        let out = newton(
            DVector::from_vec(vec![1.0, 0.5]),
            |v| {
                let f = DVector::from_vec(vec![v[0] * v[0] + v[1] * v[1] - 4.0, v[0] - v[1]]);
                let j = DMatrix::from_row_slice(2, 2, &[2.0 * v[0], 2.0 * v[1], 1.0, -1.0]);
                Ok((f, j))
            },
            NewtonOptions { tol: 1e-13, ..Default::default() },
            "test",
        )
        .unwrap();
        assert!((out.x[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!(out.iterations < 10);
    }

    #[test]
    fn range_of_a_projector() {
        let p = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let b = range_basis(&p, 1e-8);
        assert_eq!(b.ncols(), 1);
        assert!((b.column(0).norm() - 1.0).abs() < 1e-14);
        assert!((b[(0, 0)] - b[(1, 0)]).abs() < 1e-14);
    }

    #[test]
    fn reports_singular_systems() {
        let err = newton(
            DVector::from_vec(vec![1.0]),
            |v| Ok((DVector::from_vec(vec![v[0] * 0.0 + 1.0]), DMatrix::zeros(1, 1))),
            NewtonOptions::default(),
            "singular",
        );
        assert!(matches!(err, Err(Error::NoConvergence { what: "singular", .. })));
    }
}
