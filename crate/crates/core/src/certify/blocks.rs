//! The `(n+1) × (n+1)` matrices whose cone forms encode `V̇ ≤ 0`.

use nalgebra::{DMatrix, DVector};

use super::CertifyError;

fn check(what: &str, expected: usize, got: usize) -> Result<(), CertifyError> {
    if expected != got {
        return Err(CertifyError::Dimension {
            what: what.into(),
            expected,
            got,
        });
    }
    Ok(())
}

/// `[[−(PC + CP), P f − C d], [·, 2 dᵀ f]]`, the homogenized form of `∇V · (f − C x)`.
pub fn build_ptilde(p: &DMatrix<f64>, d: &DVector<f64>, f: &DVector<f64>, c: &[f64]) -> Result<DMatrix<f64>, CertifyError> {
    let n = c.len();
    check("P rows", n, p.nrows())?;
    check("P cols", n, p.ncols())?;
    check("d", n, d.len())?;
    check("f", n, f.len())?;
    let cm = DMatrix::from_diagonal(&DVector::from_column_slice(c));
    let mut out = DMatrix::zeros(n + 1, n + 1);
    let top = -(p * &cm + &cm * p);
    out.view_mut((0, 0), (n, n)).copy_from(&top);
    let off = p * f - &cm * d;
    for i in 0..n {
        out[(i, n)] = off[i];
        out[(n, i)] = off[i];
    }
    out[(n, n)] = 2.0 * d.dot(f);
    Ok(out)
}

/// `L_{D_s, j}`: [`build_ptilde`] at the sliding vector `F w_j`.
pub fn build_l_matrix(
    p: &DMatrix<f64>,
    d: &DVector<f64>,
    f: &DMatrix<f64>,
    w: &DVector<f64>,
    c: &[f64],
) -> Result<DMatrix<f64>, CertifyError> {
    check("F cols", w.len(), f.ncols())?;
    build_ptilde(p, d, &(f * w), c)
}

/// `[[0, −δP δf], [·, −2 δdᵀ δf]]` with `δX = X_j − X_k`.
pub fn build_delta_ptilde(
    pk: &DMatrix<f64>,
    pj: &DMatrix<f64>,
    dk: &DVector<f64>,
    dj: &DVector<f64>,
    fk: &DVector<f64>,
    fj: &DVector<f64>,
) -> Result<DMatrix<f64>, CertifyError> {
    let n = pk.nrows();
    check("P_j", n, pj.nrows())?;
    check("d_k", n, dk.len())?;
    check("d_j", n, dj.len())?;
    check("f_k", n, fk.len())?;
    check("f_j", n, fj.len())?;
    let dp = pj - pk;
    let dd = dj - dk;
    let df = fj - fk;
    let off = -(&dp * &df);
    let mut out = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        out[(i, n)] = off[i];
        out[(n, i)] = off[i];
    }
    out[(n, n)] = -2.0 * dd.dot(&df);
    Ok(out)
}

/// `P̄ = [[P, d], [dᵀ, ω]]`.
pub fn pbar(p: &DMatrix<f64>, d: &DVector<f64>, omega: f64) -> DMatrix<f64> {
    let n = d.len();
    let mut out = DMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(p);
    for i in 0..n {
        out[(i, n)] = d[i];
        out[(n, i)] = d[i];
    }
    out[(n, n)] = omega;
    out
}
