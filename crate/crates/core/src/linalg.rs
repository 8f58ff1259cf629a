use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pivot-ratio threshold below which a factorization is treated as singular.
const RCOND_FLOOR: f64 = 1e-14;

/// Dense LU solve with one round of iterative refinement.
pub(crate) fn solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let lu = a.clone().lu();
    let u = lu.u();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..u.nrows() {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(rcond > RCOND_FLOOR) {
        return Err(Error::Singular {
            context: context.to_string(),
            rcond,
        });
    }
    let mut x = lu.solve(b).ok_or_else(|| Error::Singular {
        context: context.to_string(),
        rcond,
    })?;
    let residual = b - a * &x;
    if let Some(dx) = lu.solve(&residual) {
        x += dx;
    }
    Ok(x)
}
