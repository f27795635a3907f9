//! Small dense kernels behind the Ornstein-Uhlenbeck sub-flows: the matrix
//! exponential, the exponential-integrator functions φ₁ and φ₂, and a
//! thresholded Cholesky factorization for (semi-)definite covariances.
//!
//! φ₁(M) = M⁻¹(e^M − I) and φ₂(M) = M⁻²(e^M − I − M) are read off the
//! upper-right block of the exponential of an augmented block matrix, so they
//! are well defined for singular `M` (zero friction) and for the negative
//! substeps of the fourth-order composition.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Target norm after scaling; the Taylor tail at this radius is below 1e-21.
const SCALED_NORM: f64 = 0.25;
const TAYLOR_DEGREE: usize = 16;

fn check_square(m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix argument"));
    }
    Ok(())
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn mat_exp(m: &Matrix) -> Result<Matrix> {
    check_square(m)?;
    let n = m.nrows();
    let norm = norm1(m);
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m * 2f64.powi(-squarings);

    // Horner form: I + A(I + A/2(I + A/3(...)))
    let ident = Matrix::identity(n, n);
    let mut acc = ident.clone();
    for k in (1..=TAYLOR_DEGREE).rev() {
        acc = &ident + (&scaled * acc) / k as f64;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    Ok(acc)
}

/// φ₁(M) = M⁻¹(e^M − I), computed without inverting `M`.
pub fn phi1(m: &Matrix) -> Result<Matrix> {
    check_square(m)?;
    let n = m.nrows();
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(m);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    let e = mat_exp(&aug)?;
    Ok(e.view((0, n), (n, n)).into_owned())
}

/// φ₂(M) = M⁻²(e^M − I − M), with φ₂(0) = I/2.
pub fn phi2(m: &Matrix) -> Result<Matrix> {
    check_square(m)?;
    let n = m.nrows();
    let mut aug = Matrix::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(m);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    aug.view_mut((n, 2 * n), (n, n)).fill_with_identity();
    let e = mat_exp(&aug)?;
    Ok(e.view((0, 2 * n), (n, n)).into_owned())
}

/// The triple (e^M, φ₁(M), φ₂(M)) from a single augmented exponential.
pub fn exp_phi12(m: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    check_square(m)?;
    let n = m.nrows();
    let mut aug = Matrix::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(m);
    aug.view_mut((0, n), (n, n)).fill_with_identity();
    aug.view_mut((n, 2 * n), (n, n)).fill_with_identity();
    let e = mat_exp(&aug)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    ))
}

/// Lower-triangular `L` with `L Lᵀ = S`.
///
/// A pivot below `1e-12 · S_jj` is treated as an exact zero, which makes
/// rank-deficient covariances (e.g. `S = 0`) factorizable; a pivot below the
/// negative of that threshold is reported as indefinite. The threshold is
/// relative to each diagonal entry, so badly scaled covariances such as that
/// of `(ΔW, ΔU, ΔV)` at small steps keep every column.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    check_square(s)?;
    let n = s.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let tol = 1e-12 * s[(j, j)].abs();
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(Error::Indefinite { pivot: j, value: d });
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / ljj;
        }
    }
    Ok(l)
}

pub(crate) fn ensure_finite(v: &Vector, context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

pub(crate) fn ensure_len(v: &Vector, n: usize, context: &'static str) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected: n,
            found: v.len(),
        })
    }
}
