//! Maximum-weight one-to-one assignment between two label sets.
//!
//! Two routes: exhaustive enumeration of injective mappings (the oracle,
//! used for small label sets) and the Hungarian algorithm with potentials.

const INF: f64 = f64::INFINITY;

/// Exhaustive search over injective row→column mappings maximizing the total
/// weight. `weight[r][c]` must be rectangular; rows must not outnumber
/// columns.
pub fn permutation_max(weight: &[Vec<f64>]) -> Vec<usize> {
    let rows = weight.len();
    let cols = if rows == 0 { 0 } else { weight[0].len() };
    assert!(rows <= cols, "permutation_max needs rows <= cols");
    let mut best = vec![0; rows];
    let mut best_sum = -INF;
    let mut current = vec![usize::MAX; rows];
    let mut used = vec![false; cols];
    fn recurse(
        weight: &[Vec<f64>],
        row: usize,
        sum: f64,
        current: &mut Vec<usize>,
        used: &mut Vec<bool>,
        best: &mut Vec<usize>,
        best_sum: &mut f64,
    ) {
        if row == weight.len() {
            if sum > *best_sum {
                *best_sum = sum;
                best.clone_from(current);
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                current[row] = c;
                recurse(
                    weight,
                    row + 1,
                    sum + weight[row][c],
                    current,
                    used,
                    best,
                    best_sum,
                );
                used[c] = false;
            }
        }
    }
    recurse(
        weight,
        0,
        0.0,
        &mut current,
        &mut used,
        &mut best,
        &mut best_sum,
    );
    best
}

/// Hungarian algorithm (shortest augmenting paths with potentials) maximizing
/// the total weight. Returns the assigned column per row; rows must not
/// outnumber columns.
pub fn hungarian_max(weight: &[Vec<f64>]) -> Vec<usize> {
    let n = weight.len();
    if n == 0 {
        return Vec::new();
    }
    let m = weight[0].len();
    assert!(n <= m, "hungarian_max needs rows <= cols");

    // Minimize the negated weights.
    let cost = |r: usize, c: usize| -weight[r][c];

    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut assigned_row = vec![0usize; m + 1]; // column -> row (1-based, 0 = free)
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![usize::MAX; n];
    for j in 1..=m {
        if assigned_row[j] != 0 {
            result[assigned_row[j] - 1] = j - 1;
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn total(weight: &[Vec<f64>], assign: &[usize]) -> f64 {
        assign.iter().enumerate().map(|(r, &c)| weight[r][c]).sum()
    }

    #[test]
    fn dominant_diagonal_maps_identity() {
        let w = vec![
            vec![10.0, 1.0, 0.0],
            vec![0.5, 9.0, 1.0],
            vec![1.0, 0.0, 8.0],
        ];
        assert_eq!(hungarian_max(&w), vec![0, 1, 2]);
        assert_eq!(permutation_max(&w), vec![0, 1, 2]);
    }

    #[test]
    fn rectangular_assignment() {
        let w = vec![vec![1.0, 5.0, 2.0], vec![4.0, 1.0, 3.0]];
        let h = hungarian_max(&w);
        let p = permutation_max(&w);
        assert_eq!(total(&w, &h), total(&w, &p));
        assert_eq!(total(&w, &h), 9.0);
    }

    #[test]
    fn hungarian_matches_exhaustive_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(n..=6);
            let w: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let h = hungarian_max(&w);
            let p = permutation_max(&w);
            assert!(
                (total(&w, &h) - total(&w, &p)).abs() < 1e-9,
                "hungarian {h:?} vs exhaustive {p:?} on {w:?}"
            );
        }
    }
}
