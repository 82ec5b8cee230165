use crate::error::bail;
use crate::Result;

/// Composite Simpson integral of `y` sampled at strictly increasing `x`.
///
/// Pairs of intervals use the (possibly non-uniform) three-point parabola;
/// with an odd interval count the last interval falls back to the trapezoid.
pub fn simpson_integrate(y: &[f64], x: &[f64]) -> Result<f64> {
    if y.len() != x.len() {
        bail!(Input, "Simpson: {} values for {} abscissae", y.len(), x.len());
    }
    if y.len() < 2 {
        bail!(Input, "Simpson needs at least two points, got {}", y.len());
    }
    if x.windows(2).any(|p| !(p[1] > p[0])) {
        bail!(Input, "Simpson abscissae must be strictly increasing");
    }
    let intervals = y.len() - 1;
    let paired = intervals - intervals % 2;
    let mut total = 0.0;
    for i in (0..paired).step_by(2) {
        let h0 = x[i + 1] - x[i];
        let h1 = x[i + 2] - x[i + 1];
        let hs = h0 + h1;
        total += hs / 6.0
            * ((2.0 - h1 / h0) * y[i] + hs * hs / (h0 * h1) * y[i + 1] + (2.0 - h0 / h1) * y[i + 2]);
    }
    if paired < intervals {
        let i = paired;
        total += 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
    }
    Ok(total)
}
