//! Thin helpers over nalgebra for the small dense complex systems solved per
//! frequency point.

use nalgebra::DMatrix;

use crate::C64;

pub type CMatrix = DMatrix<C64>;

/// Column-sum (1-) norm.
pub(crate) fn norm1(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A X = B` by partial-pivot LU. Returns the solution together with
/// the 1-norm condition number of `A`; `None` when `A` is exactly singular.
pub(crate) fn solve_with_condition(a: &CMatrix, b: &CMatrix) -> Option<(CMatrix, f64)> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    let inv = lu.try_inverse()?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return None;
    }
    Some((x, cond))
}

pub(crate) fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}
