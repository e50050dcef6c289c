//! Revenue-maximizing group probabilities under ε-group fairness.
//!
//! maximize   Σ_k p_k Pr_k
//! subject to |Pr_k w_k − Pr_l w_l| ≤ ε  for all k, l
//!            Σ_k Pr_k = 1,  0 ≤ Pr_k ≤ 1
//!
//! where `w_k` is group k's top bid and `p_k` its second-price payment.
//! Two groups reduce to one free variable on an interval. Three to six
//! groups are solved by enumerating vertices of the lifted polytope
//! `{(Pr, t) : t ≤ Pr_k w_k ≤ t + ε}`, which has `4m` inequalities instead
//! of the `2m + m(m−1)` of the pairwise form.

use crate::error::{AuctionError, Result};

/// Largest group count handled by vertex enumeration.
pub const MAX_GROUPS: usize = 6;

/// Feasibility slack on every constraint.
pub const FEASIBILITY_TOL: f64 = 1e-9;

pub fn solve_group_lp(winner_bids: &[f64], prices: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let m = winner_bids.len();
    if m == 0 || prices.len() != m {
        return Err(AuctionError::Contract(
            "winner bids and prices must be nonempty and of equal length".into(),
        ));
    }
    if epsilon.is_nan() {
        return Err(AuctionError::Config("epsilon is NaN".into()));
    }
    if epsilon < 0.0 {
        // Pr_k ∝ 1/w_k (or all mass on a zero-bid group) equalizes every
        // Pr_k w_k, so ε = 0 is always feasible.
        return Err(AuctionError::Infeasible {
            epsilon,
            min_epsilon: 0.0,
        });
    }
    match m {
        1 => Ok(vec![1.0]),
        2 => Ok(solve_two(winner_bids, prices, epsilon)),
        _ if m <= MAX_GROUPS => solve_by_vertices(winner_bids, prices, epsilon),
        _ => Err(AuctionError::TooManyGroups { m, max: MAX_GROUPS }),
    }
}

fn solve_two(w: &[f64], p: &[f64], eps: f64) -> Vec<f64> {
    let (a, b) = (w[0], w[1]);
    let total = a + b;
    // Pr_0 = x:  |x a − (1 − x) b| ≤ ε  ⇔  x (a + b) − b ∈ [−ε, ε]
    let (lo, hi, fair) = if total > 0.0 {
        (
            ((b - eps) / total).max(0.0),
            ((b + eps) / total).min(1.0),
            b / total,
        )
    } else {
        (0.0, 1.0, 0.5)
    };
    let x = if p[0] > p[1] {
        hi
    } else if p[0] < p[1] {
        lo
    } else {
        fair.clamp(lo, hi)
    };
    vec![x, 1.0 - x]
}

/// Constraint `coeffs · z ≤ rhs` over `z = (Pr_0, …, Pr_{m−1}, t)`.
struct Halfspace {
    coeffs: Vec<f64>,
    rhs: f64,
}

fn lifted_constraints(w: &[f64], eps: f64) -> Vec<Halfspace> {
    let m = w.len();
    let mut out = Vec::with_capacity(4 * m);
    for k in 0..m {
        let unit = |scale: f64, t: f64| {
            let mut c = vec![0.0; m + 1];
            c[k] = scale;
            c[m] = t;
            c
        };
        out.push(Halfspace { coeffs: unit(-1.0, 0.0), rhs: 0.0 });
        out.push(Halfspace { coeffs: unit(1.0, 0.0), rhs: 1.0 });
        out.push(Halfspace { coeffs: unit(-w[k], 1.0), rhs: 0.0 });
        out.push(Halfspace { coeffs: unit(w[k], -1.0), rhs: eps });
    }
    out
}

fn solve_by_vertices(w: &[f64], p: &[f64], eps: f64) -> Result<Vec<f64>> {
    let m = w.len();
    let dim = m + 1;
    let constraints = lifted_constraints(w, eps);
    let scale = 1.0 + w.iter().fold(0.0_f64, |a, &b| a.max(b.abs())) + eps;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen: Vec<usize> = (0..m).collect();
    loop {
        // equality row plus the m chosen inequalities held tight
        let mut a = Vec::with_capacity(dim * dim);
        let mut rhs = Vec::with_capacity(dim);
        a.extend((0..dim).map(|j| if j < m { 1.0 } else { 0.0 }));
        rhs.push(1.0);
        for &c in &chosen {
            a.extend_from_slice(&constraints[c].coeffs);
            rhs.push(constraints[c].rhs);
        }
        if let Some(z) = solve_dense(&mut a, &mut rhs, dim) {
            let feasible = constraints.iter().all(|h| {
                let lhs: f64 = h.coeffs.iter().zip(&z).map(|(c, v)| c * v).sum();
                lhs <= h.rhs + 1e-12 * scale
            });
            if feasible {
                let obj: f64 = p.iter().zip(&z).map(|(pk, x)| pk * x).sum();
                if best.as_ref().is_none_or(|(b, _)| obj > *b + 1e-12) {
                    best = Some((obj, z));
                }
            }
        }
        if !next_combination(&mut chosen, constraints.len()) {
            break;
        }
    }
    let (_, z) = best.ok_or(AuctionError::Infeasible {
        epsilon: eps,
        min_epsilon: 0.0,
    })?;
    Ok(z[..m].iter().map(|x| x.clamp(0.0, 1.0)).collect())
}

/// Advances `idx` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on a row-major `dim × dim`
/// system. Returns `None` for (numerically) singular systems.
fn solve_dense(a: &mut [f64], b: &mut [f64], dim: usize) -> Option<Vec<f64>> {
    for col in 0..dim {
        let pivot = (col..dim).max_by(|&r, &s| a[r * dim + col].abs().total_cmp(&a[s * dim + col].abs()))?;
        if a[pivot * dim + col].abs() < 1e-12 {
            return None;
        }
        if pivot != col {
            for j in 0..dim {
                a.swap(pivot * dim + j, col * dim + j);
            }
            b.swap(pivot, col);
        }
        let diag = a[col * dim + col];
        for r in (col + 1)..dim {
            let f = a[r * dim + col] / diag;
            if f != 0.0 {
                for j in col..dim {
                    a[r * dim + j] -= f * a[col * dim + j];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; dim];
    for r in (0..dim).rev() {
        let s: f64 = ((r + 1)..dim).map(|j| a[r * dim + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * dim + r];
    }
    Some(x)
}

/// Largest pairwise `|Pr_k w_k − Pr_l w_l|`.
pub fn fairness_violation(probs: &[f64], winner_bids: &[f64]) -> f64 {
    let xs: Vec<f64> = probs.iter().zip(winner_bids).map(|(p, w)| p * w).collect();
    crate::model::group_fairness_gap(&xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn example_one_closed_form() {
        let p = solve_group_lp(&[9.0, 7.0], &[8.0, 3.0], 0.0).unwrap();
        assert_abs_diff_eq!(p[0], 7.0 / 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 9.0 / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn slack_constraint_takes_higher_price() {
        assert_eq!(solve_group_lp(&[9.0, 7.0], &[8.0, 3.0], 100.0).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn epsilon_one_hits_interval_end() {
        // feasible Pr_A ∈ [3/8, 1/2], objective increasing in Pr_A
        let p = solve_group_lp(&[9.0, 7.0], &[8.0, 3.0], 1.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        // brute force over Pr_A on a fine grid
        let best = (0..=100_000)
            .map(|i| i as f64 / 100_000.0)
            .filter(|&x| (9.0 * x - 7.0 * (1.0 - x)).abs() <= 1.0 + 1e-12)
            .map(|x| 8.0 * x + 3.0 * (1.0 - x))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(8.0 * p[0] + 3.0 * p[1], best, epsilon = 1e-9);
    }

    #[test]
    fn vertex_route_agrees_with_closed_form_on_two_groups() {
        for &(w, pr, eps) in &[
            ([9.0, 7.0], [8.0, 3.0], 0.0),
            ([9.0, 7.0], [8.0, 3.0], 1.0),
            ([9.0, 7.0], [3.0, 8.0], 0.5),
            ([2.0, 0.0], [1.0, 0.0], 0.3),
            ([5.0, 5.0], [4.0, 4.0], 0.2),
        ] {
            let a = solve_two(&w, &pr, eps);
            let b = solve_by_vertices(&w, &pr, eps).unwrap();
            let obj = |x: &[f64]| pr[0] * x[0] + pr[1] * x[1];
            assert_abs_diff_eq!(obj(&a), obj(&b), epsilon = 1e-9);
            assert!(fairness_violation(&b, &w) <= eps + 1e-9);
        }
    }

    #[test]
    fn three_groups_exact_fairness() {
        let w = [10.0, 8.0, 5.0];
        let p = solve_group_lp(&w, &[9.0, 7.0, 4.0], 0.0).unwrap();
        // Pr_k ∝ 1/w_k
        let inv: f64 = w.iter().map(|x| 1.0 / x).sum();
        for k in 0..3 {
            assert_abs_diff_eq!(p[k], (1.0 / w[k]) / inv, epsilon = 1e-10);
        }
    }

    #[test]
    fn single_group_and_errors() {
        assert_eq!(solve_group_lp(&[3.0], &[1.0], 0.0).unwrap(), vec![1.0]);
        assert!(matches!(
            solve_group_lp(&[3.0, 2.0], &[1.0, 1.0], -0.1),
            Err(AuctionError::Infeasible { min_epsilon, .. }) if min_epsilon == 0.0
        ));
        assert!(matches!(
            solve_group_lp(&[1.0; 7], &[1.0; 7], 0.1),
            Err(AuctionError::TooManyGroups { m: 7, .. })
        ));
    }

    #[test]
    fn combinations_enumerate_binomial_count() {
        let mut idx = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
    }
}
