//! Earth mover's distance between two equal-size image sets under the
//! squared-distance ground cost.
//!
//! With uniform unit marginals the transport LP has an integral optimum,
//! so the exact value comes from an assignment solver: a shortest
//! augmenting path implementation with dual potentials, O(N^3).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Exact square assignment: minimise `sum_i cost[i][sigma(i)]`.
/// Returns the optimal value and the row-to-column assignment.
pub fn solve_assignment(cost: &[f64], n: usize) -> (f64, Vec<usize>) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    // 1-based arrays; p[j] = row matched to column j
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    (total, assignment)
}

/// Empirical EMD: the optimal transport value between the two sets under
/// cost `||a_i - b_j||_2^2` with unit marginals on both sides.
pub fn emd(set_a: &[Tensor], set_b: &[Tensor]) -> Result<f64> {
    if set_a.len() != set_b.len() {
        return Err(Error::InvalidArgument(format!(
            "emd needs equal-size sets, got {} and {}",
            set_a.len(),
            set_b.len()
        )));
    }
    let n = set_a.len();
    if n == 0 {
        return Err(Error::InvalidArgument("emd needs at least one image".to_string()));
    }
    let shape = set_a[0].shape();
    let mut cost = vec![0.0; n * n];
    for (i, a) in set_a.iter().enumerate() {
        for (j, b) in set_b.iter().enumerate() {
            if a.shape() != shape || b.shape() != shape {
                return Err(Error::shape("emd images", shape, b.shape()));
            }
            cost[i * n + j] = a.sub(b)?.sqnorm();
        }
    }
    Ok(solve_assignment(&cost, n).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, rng_from_seed, standard_normal, uniform};

    /// Factorial brute force over all permutations.
    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn permute(
            cost: &[f64],
            n: usize,
            row: usize,
            used: &mut Vec<bool>,
            acc: f64,
            best: &mut f64,
        ) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    permute(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        permute(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let mut rng = rng_from_seed(1);
        let set: Vec<Tensor> = (0..5).map(|_| uniform(&[4, 4], 0.0, 1.0, &mut rng)).collect();
        assert_eq!(emd(&set, &set).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_is_squared_distance() {
        let a = Tensor::from_vec(vec![1.0, 2.0]);
        let b = Tensor::from_vec(vec![0.0, 4.0]);
        let d = emd(&[a.clone()], &[b.clone()]).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn size_mismatch_rejected() {
        let a = vec![Tensor::zeros(&[2])];
        let b = vec![Tensor::zeros(&[2]), Tensor::zeros(&[2])];
        assert!(emd(&a, &b).is_err());
    }

    #[test]
    fn assignment_matches_factorial_brute_force() {
        // 50 seeded trials across sizes up to 8
        for trial in 0..50u64 {
            let mut rng = rng_from_seed(derive_seed(0xE44D, trial));
            let n = 2 + (trial % 7) as usize; // 2..=8
            let cost: Vec<f64> = standard_normal(&[n * n], &mut rng)
                .data()
                .iter()
                .map(|v| v.abs() * 3.0)
                .collect();
            let (fast, assignment) = solve_assignment(&cost, n);
            let slow = brute_force(&cost, n);
            assert!(
                (fast - slow).abs() <= 1e-10,
                "trial {trial} (n={n}): {fast} vs brute {slow}"
            );
            // assignment is a permutation
            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
        }
    }

    #[test]
    fn emd_is_symmetric_and_nonnegative() {
        let mut rng = rng_from_seed(7);
        let a: Vec<Tensor> = (0..6).map(|_| uniform(&[3, 3], 0.0, 1.0, &mut rng)).collect();
        let b: Vec<Tensor> = (0..6).map(|_| uniform(&[3, 3], 0.0, 1.0, &mut rng)).collect();
        let ab = emd(&a, &b).unwrap();
        let ba = emd(&b, &a).unwrap();
        assert!(ab >= 0.0);
        assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
    }

    #[test]
    fn zero_iff_equal_multisets() {
        let mut rng = rng_from_seed(9);
        let a: Vec<Tensor> = (0..4).map(|_| uniform(&[3], 0.0, 1.0, &mut rng)).collect();
        // same multiset, different order
        let b = vec![a[2].clone(), a[0].clone(), a[3].clone(), a[1].clone()];
        assert!(emd(&a, &b).unwrap().abs() <= 1e-12);
        // different multiset: strictly positive
        let mut c = b.clone();
        c[0] = c[0].map(|v| v + 0.25);
        assert!(emd(&a, &c).unwrap() > 1e-6);
    }
}
