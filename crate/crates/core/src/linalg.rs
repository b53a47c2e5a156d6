//! Small dense Hermitian eigensolver and matrix exponentials.
//!
//! Cyclic Jacobi rotations. For the ≤ 11-dimensional matrices used here this
//! is fast and, unlike QR-based tridiagonal solvers, it keeps eigenpairs
//! accurate when an eigenvalue is exactly zero next to entries of order 1e13.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::CMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (unsorted) and orthonormal eigenvectors (columns) of a
/// Hermitian matrix. Only the upper triangle is trusted.
pub fn hermitian_eigen(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    let mut v = CMatrix::identity(n, n);
    let total: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if total == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-3 * total {
            return Ok(((0..n).map(|i| m[(i, i)].re).collect(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // skip rotations that cannot change the diagonal any more
                if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
                    m[(p, q)] = Complex64::new(0.0, 0.0);
                    m[(q, p)] = Complex64::new(0.0, 0.0);
                    continue;
                }
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let ph = apq / mag; // e^{iφ}
                                    // J = [[c, s·e^{iφ}], [−s·e^{−iφ}... ]] acting on columns p, q:
                                    // new_p = c·col_p − s·e^{−iφ}·col_q, new_q = s·e^{iφ}·col_p + c·col_q
                let jpq = ph * s;
                let jqp = -ph.conj() * s;
                // A ← A·J
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * c + akq * jqp;
                    m[(k, q)] = akp * jpq + akq * c;
                }
                // A ← J^H·A
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * c + aqk * jqp.conj();
                    m[(q, k)] = apk * jpq.conj() + aqk * c;
                }
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c + vkq * jqp;
                    v[(k, q)] = vkp * jpq + vkq * c;
                }
            }
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi eigensolver did not converge for H = {a}"
    )))
}

/// `exp(−i·H·dt)` for Hermitian `H`.
pub fn unitary_exp(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let (vals, v) = hermitian_eigen(h)?;
    let phases = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&e| Complex64::from_polar(1.0, -e * dt)),
    );
    let mut vd = v.clone();
    for (j, p) in phases.iter().enumerate() {
        let mut col = vd.column_mut(j);
        col *= *p;
    }
    Ok(vd * v.adjoint())
}

/// `exp(−i·H·dt)` for a general complex matrix (scaling and squaring Padé).
pub fn general_exp(h: &CMatrix, dt: f64) -> CMatrix {
    (h * Complex64::new(0.0, -dt)).exp()
}

/// `exp(−i·H·dt)` for a diagonalizable `H` through its eigendecomposition
/// `H = V·Λ·V⁻¹`. Unlike Padé with squaring this stays accurate when
/// `‖H‖·dt` is in the thousands, which is the regime of a large one-photon
/// detuning.
pub fn eigen_exp(h: &CMatrix, dt: f64) -> Result<CMatrix> {
    let n = h.nrows();
    let schur = nalgebra::Schur::try_new(h.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Numeric(format!("Schur decomposition did not converge for H = {h}"))
    })?;
    let (q, t) = schur.unpack();
    // exp of the upper-triangular factor by the Parlett recurrence
    let mut f = CMatrix::zeros(n, n);
    for i in 0..n {
        f[(i, i)] = (t[(i, i)] * Complex64::new(0.0, -dt)).exp();
    }
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut s = t[(i, j)] * (f[(j, j)] - f[(i, i)]);
            for k in i + 1..j {
                s += t[(i, k)] * f[(k, j)] - f[(i, k)] * t[(k, j)];
            }
            let den = t[(j, j)] - t[(i, i)];
            if den.norm() <= 1e-8 * (t[(i, i)].norm() + t[(j, j)].norm()).max(f64::MIN_POSITIVE) {
                // (near-)confluent eigenvalues: fall back to Padé
                return Ok(general_exp(h, dt));
            }
            f[(i, j)] = s / den;
        }
    }
    Ok(&q * f * q.adjoint())
}
