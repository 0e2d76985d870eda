//! Agglomerative clustering of binary keys with k-medoids initialization,
//! plus elbow-based solution selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diarization::key::{jaccard_distance, key_from_counts, BinaryKey};
use crate::error::{Error, Result};

/// One clustering level: a cluster id per segment plus the level's quality
/// measure (mean Jaccard distance from each segment to its cluster key).
#[derive(Clone, Debug)]
pub struct ClusteringSolution {
    pub n_clusters: usize,
    pub assignments: Vec<usize>,
    pub within_mean_distance: f64,
    /// Distance of the merge that produced this level; the initial level has
    /// none.
    pub merge_distance: Option<f64>,
}

/// Cluster segment keys agglomeratively: k-medoids seeds `init_clusters`
/// clusters, then the two closest clusters (by the Jaccard distance of their
/// recomputed keys) merge until one remains. One solution is returned per
/// cluster count, from `min(init_clusters, n)` down to 1.
pub fn ahc_cluster(
    keys: &[BinaryKey],
    init_clusters: usize,
    seed: u64,
) -> Result<Vec<ClusteringSolution>> {
    let n = keys.len();
    if n < 2 {
        return Ok(vec![ClusteringSolution {
            n_clusters: n.min(1),
            assignments: vec![0; n],
            within_mean_distance: 0.0,
            merge_distance: None,
        }]);
    }
    let key_len = keys[0].len();
    if keys.iter().any(|k| k.len() != key_len) {
        return Err(Error::Diarization("segment keys differ in length".into()));
    }

    let dist = distance_matrix(keys)?;
    let k0 = init_clusters.min(n).max(1);
    let mut clusters = kmedoids(&dist, k0, seed, 20);

    let mut solutions = Vec::with_capacity(k0);
    solutions.push(solution_from(keys, &clusters, None, n));

    while clusters.len() > 1 {
        // Closest pair of clusters by the Jaccard distance of their keys.
        let cluster_keys: Vec<BinaryKey> =
            clusters.iter().map(|c| pooled_key(keys, c)).collect();
        let mut best = (0usize, 1usize);
        let mut best_dist = f64::INFINITY;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = jaccard_distance(&cluster_keys[i], &cluster_keys[j])?;
                if d < best_dist {
                    best_dist = d;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let merged = clusters.remove(j);
        clusters[i].extend(merged);
        clusters[i].sort_unstable();
        solutions.push(solution_from(keys, &clusters, Some(best_dist), n));
    }
    Ok(solutions)
}

/// Elbow selection over the within-cluster distance curve: among interior
/// cluster counts, the one maximizing the discrete second difference wins;
/// ties go to fewer clusters. With fewer than three solutions the
/// fewest-cluster solution is returned.
pub fn elbow_select(solutions: &[ClusteringSolution]) -> Result<&ClusteringSolution> {
    if solutions.is_empty() {
        return Err(Error::Diarization("no clustering solutions".into()));
    }
    let mut ordered: Vec<&ClusteringSolution> = solutions.iter().collect();
    ordered.sort_by(|a, b| b.n_clusters.cmp(&a.n_clusters));
    if ordered.len() < 3 {
        return Ok(ordered.last().unwrap());
    }
    let mut best_idx = 1;
    let mut best_curvature = f64::NEG_INFINITY;
    for i in 1..ordered.len() - 1 {
        let curvature = ordered[i - 1].within_mean_distance
            - 2.0 * ordered[i].within_mean_distance
            + ordered[i + 1].within_mean_distance;
        // Strict comparison keeps later (fewer-cluster) candidates on ties.
        if curvature > best_curvature {
            best_curvature = curvature;
            best_idx = i;
        } else if curvature == best_curvature {
            best_idx = i;
        }
    }
    Ok(ordered[best_idx])
}

fn distance_matrix(keys: &[BinaryKey]) -> Result<Vec<Vec<f64>>> {
    let n = keys.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = jaccard_distance(&keys[i], &keys[j])?;
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    Ok(m)
}

/// Seeded k-medoids on a precomputed distance matrix. Medoid points always
/// belong to their own cluster, so no cluster ever empties.
fn kmedoids(dist: &[Vec<f64>], k: usize, seed: u64, max_iters: usize) -> Vec<Vec<usize>> {
    let n = dist.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut rng);
    let mut medoids: Vec<usize> = indices.into_iter().take(k).collect();
    medoids.sort_unstable();

    // Nearest medoid for a point, ties to the lower cluster index; medoid
    // points stay in their own cluster.
    let nearest = |medoids: &[usize], p: usize| -> usize {
        if let Some(mi) = medoids.iter().position(|&m| m == p) {
            return mi;
        }
        let mut best = 0;
        for (mi, &m) in medoids.iter().enumerate() {
            if dist[p][m] < dist[p][medoids[best]] {
                best = mi;
            }
        }
        best
    };

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iters {
        for p in 0..n {
            assignment[p] = nearest(&medoids, p);
        }
        // Recompute each medoid as the member minimizing total distance
        // within its cluster, ties to the lower index.
        let mut changed = false;
        for mi in 0..medoids.len() {
            let members: Vec<usize> = (0..n).filter(|&p| assignment[p] == mi).collect();
            let mut best = members[0];
            let mut best_cost = f64::INFINITY;
            for &cand in &members {
                let cost: f64 = members.iter().map(|&o| dist[cand][o]).sum();
                if cost < best_cost {
                    best_cost = cost;
                    best = cand;
                }
            }
            if best != medoids[mi] {
                medoids[mi] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut clusters = vec![Vec::new(); k];
    for p in 0..n {
        clusters[nearest(&medoids, p)].push(p);
    }
    clusters
}

/// Cluster key recomputed from the pooled (summed) cumulative vectors.
fn pooled_key(keys: &[BinaryKey], members: &[usize]) -> BinaryKey {
    let len = keys[members[0]].len();
    let mut counts = vec![0.0; len];
    for &m in members {
        for (c, v) in counts.iter_mut().zip(&keys[m].cumulative) {
            *c += v;
        }
    }
    key_from_counts(&counts)
}

fn solution_from(
    keys: &[BinaryKey],
    clusters: &[Vec<usize>],
    merge_distance: Option<f64>,
    n: usize,
) -> ClusteringSolution {
    let mut assignments = vec![0usize; n];
    let mut total = 0.0;
    for (ci, members) in clusters.iter().enumerate() {
        let ckey = pooled_key(keys, members);
        for &m in members {
            assignments[m] = ci;
            total += jaccard_distance(&keys[m], &ckey).unwrap();
        }
    }
    ClusteringSolution {
        n_clusters: clusters.len(),
        assignments,
        within_mean_distance: total / n as f64,
        merge_distance,
    }
}
