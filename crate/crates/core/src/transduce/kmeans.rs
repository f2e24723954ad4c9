//! Lloyd's algorithm with k-means++ seeding over matrix rows.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::num::Matrix;

/// Final centers, per-row assignments, and the sum of squared distances to
/// assigned centers.
#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub centers: Matrix,
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest_center(row: &[f64], centers: &Matrix) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for c in 0..centers.rows() {
        let d = dist_sq(row, centers.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp_init(x: &Matrix, clusters: usize, rng: &mut ChaCha12Rng) -> Matrix {
    let n = x.rows();
    let mut centers = Matrix::zeros(clusters, x.cols());
    let first = rng.gen_range(0..n as u64) as usize;
    centers.row_mut(0).copy_from_slice(x.row(first));

    let mut d2: Vec<f64> = (0..n).map(|r| dist_sq(x.row(r), centers.row(0))).collect();
    for c in 1..clusters {
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            // Draw proportionally to squared distance from the nearest
            // chosen center.
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (r, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = r;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.gen_range(0..n as u64) as usize
        };
        centers.row_mut(c).copy_from_slice(x.row(chosen));
        for r in 0..n {
            let d = dist_sq(x.row(r), centers.row(c));
            if d < d2[r] {
                d2[r] = d;
            }
        }
    }
    centers
}

/// K-means++ initialization followed by Lloyd iterations until the
/// assignment fixpoint or `max_iter`. An empty cluster is re-seeded from
/// the point farthest from its assigned center.
pub fn kmeans(x: &Matrix, clusters: usize, seed: u64, max_iter: usize) -> Result<KmeansResult> {
    let n = x.rows();
    if clusters == 0 || n < clusters {
        return Err(Error::InvalidInput {
            context: "kmeans",
            reason: format!("need at least {clusters} rows, have {n}"),
        });
    }
    let mut rng = crate::rng::RunRng::new(seed).fork("kmeans");
    let mut centers = kmeans_pp_init(x, clusters, &mut rng);
    let mut assignments = vec![0usize; n];

    for _ in 0..max_iter {
        // Assignment step.
        let mut changed = false;
        for r in 0..n {
            let (best, _) = nearest_center(x.row(r), &centers);
            if assignments[r] != best {
                assignments[r] = best;
                changed = true;
            }
        }

        // Update step.
        let mut sums = Matrix::zeros(clusters, x.cols());
        let mut counts = vec![0usize; clusters];
        for r in 0..n {
            counts[assignments[r]] += 1;
            for (s, &v) in sums.row_mut(assignments[r]).iter_mut().zip(x.row(r)) {
                *s += v;
            }
        }
        for c in 0..clusters {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                // Re-seed from the point farthest from its assigned center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist_sq(x.row(a), centers.row(assignments[a]));
                        let db = dist_sq(x.row(b), centers.row(assignments[b]));
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers.row_mut(c).copy_from_slice(x.row(far));
                assignments[far] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Final assignment pass so assignments match the returned centers.
    let mut inertia = 0.0;
    for r in 0..n {
        let (best, d) = nearest_center(x.row(r), &centers);
        assignments[r] = best;
        inertia += d;
    }
    Ok(KmeansResult {
        centers,
        assignments,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn distinct_points_equal_clusters_zero_inertia() {
        let x = Matrix::from_rows(&[&[0.0, 0.0], &[10.0, 0.0], &[0.0, 10.0]]);
        let r = kmeans(&x, 3, 1, 50).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut seen: Vec<usize> = r.assignments.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn rejects_more_clusters_than_points() {
        let x = Matrix::zeros(2, 2);
        assert!(kmeans(&x, 3, 1, 10).is_err());
    }

    #[test]
    fn inertia_non_increasing_in_iteration_count() {
        // Truncated runs share the deterministic prefix of the full run, so
        // inertia after t iterations is non-increasing in t.
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(17);
        let mut rows = Vec::new();
        for c in 0..4 {
            for _ in 0..20 {
                rows.push(vec![
                    c as f64 * 3.0 + rng.gen_range(-1.0..1.0),
                    (c % 2) as f64 * 3.0 + rng.gen_range(-1.0..1.0),
                ]);
            }
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = Matrix::from_rows(&refs);
        let mut prev = f64::INFINITY;
        for max_iter in 1..10 {
            let r = kmeans(&x, 4, 9, max_iter).unwrap();
            assert!(
                r.inertia <= prev + 1e-9,
                "inertia rose from {prev} to {} at iter {max_iter}",
                r.inertia
            );
            prev = r.inertia;
        }
    }

    #[test]
    fn two_separated_blobs_are_perfectly_split() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        for _ in 0..30 {
            rows.push(vec![rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]);
        }
        for _ in 0..30 {
            rows.push(vec![50.0 + rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]);
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let x = Matrix::from_rows(&refs);
        let r = kmeans(&x, 2, 7, 100).unwrap();
        let first = r.assignments[0];
        assert!(r.assignments[..30].iter().all(|&a| a == first));
        assert!(r.assignments[30..].iter().all(|&a| a != first));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(2);
        let x = Matrix::from_vec(40, 3, (0..120).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap();
        let a = kmeans(&x, 4, 11, 60).unwrap();
        let b = kmeans(&x, 4, 11, 60).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.inertia, b.inertia);
        assert_eq!(a.centers, b.centers);
    }
}
