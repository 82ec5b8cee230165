//! Small dense solves for normal equations.

use crate::prelude::*;

/// Solves `G a = b` for a symmetric positive semi-definite `n × n` matrix `G`
/// (row-major) by Cholesky factorisation.
///
/// Unknowns whose pivot drops below `rel_tol × max(diag G)` are linearly
/// dependent on earlier ones; they are fixed at zero and the remaining system
/// is solved exactly. Returns the solution and the numerical rank.
pub(crate) fn solve_psd(g: &[f64], b: &[f64], rel_tol: f64) -> (Vec<f64>, usize) {
    let n = b.len();
    debug_assert_eq!(g.len(), n * n);
    let max_diag = (0..n).map(|i| g[i * n + i]).fold(0.0, f64::max);
    let tol = rel_tol * max_diag;
    let mut l = vec![0.0; n * n];
    let mut active = vec![false; n];
    for j in 0..n {
        let d = g[j * n + j] - (0..j).map(|k| l[j * n + k] * l[j * n + k]).sum::<f64>();
        if max_diag <= 0.0 || d <= tol {
            continue;
        }
        active[j] = true;
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let s = g[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = s / ljj;
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).filter(|&i| active[i]) {
        let s = b[i] - (0..i).map(|k| l[i * n + k] * y[k]).sum::<f64>();
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev().filter(|&i| active[i]) {
        let s = y[i] - (i + 1..n).map(|k| l[k * n + i] * x[k]).sum::<f64>();
        x[i] = s / l[i * n + i];
    }
    (x, active.iter().filter(|&&a| a).count())
}
