//! Membership test for the convex hull of the statistic table.
//!
//! Solves the nonnegative least-squares problem
//! `min_{λ≥0} ‖Σ λ_x τ(x) − t‖² + (Σ λ_x − 1)²` with the Lawson–Hanson active
//! set method. A zero residual certifies membership; the residual is a lower
//! bound on the Euclidean distance to the hull and is within a factor
//! `1 + max‖τ(x) − t‖` of it.

use nalgebra::{DMatrix, DVector};

pub fn hull_residual(points: &[Vec<f64>], target: &[f64]) -> f64 {
    let d = target.len();
    let k = points.len();
    let a = DMatrix::from_fn(d + 1, k, |i, x| if i < d { points[x][i] } else { 1.0 });
    let b = DVector::from_column_slice(target).push(1.0);
    let lambda = nnls(&a, &b);
    (&a * &lambda - &b).norm()
}

fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let tol = 1e-13 * (1.0 + a.amax()) * (1.0 + b.amax());
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(a, b, &passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
    let sol = sub
        .svd(true, true)
        .solve(b, 1e-14)
        .expect("svd with both factors");
    let mut z = DVector::zeros(passive.len());
    for (c, &i) in idx.iter().enumerate() {
        z[i] = sol[c];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_membership() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(hull_residual(&pts, &[0.2, 0.3]) < 1e-12);
        assert!(hull_residual(&pts, &[0.0, 0.0]) < 1e-12);
        assert!(hull_residual(&pts, &[0.5, 0.5]) < 1e-12);
        assert!(hull_residual(&pts, &[0.6, 0.6]) > 1e-3);
        assert!(hull_residual(&pts, &[-0.1, 0.2]) > 1e-3);
    }

    #[test]
    fn interval_membership() {
        let pts = vec![vec![0.0], vec![1.0], vec![2f64.sqrt()]];
        assert!(hull_residual(&pts, &[1.3]) < 1e-12);
        assert!(hull_residual(&pts, &[1.5]) > 1e-3);
    }
}
