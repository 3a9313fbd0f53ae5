//! Seeded k-means (k-means++ seeding, Lloyd iterations) shared by the GMM
//! initialization and CBAD.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::SampleMatrix;

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid; lowest index wins ties.
pub(crate) fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

pub(crate) fn kmeans_plus_plus(samples: &SampleMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let rows = samples.rows();
    let mut centroids = vec![samples.row(rng.gen_range(0..rows)).to_vec()];
    let mut d2: Vec<f64> = samples.iter_rows().map(|r| sq_dist(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = rows - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.gen_range(0..rows)
        };
        let c = samples.row(pick).to_vec();
        for (d, r) in d2.iter_mut().zip(samples.iter_rows()) {
            *d = d.min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

#[derive(Debug, Clone)]
pub(crate) struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
}

/// Lloyd iterations until `max_iter` or the largest centroid move drops below
/// `tol`. An emptied cluster is re-seeded at the point farthest from its
/// current centroid.
pub(crate) fn kmeans(samples: &SampleMatrix, k: usize, max_iter: usize, tol: f64, rng: &mut ChaCha8Rng) -> KMeans {
    let n = samples.cols();
    let mut centroids = kmeans_plus_plus(samples, k, rng);
    let mut assignment: Vec<usize> = samples.iter_rows().map(|r| nearest(r, &centroids)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![vec![0.0; n]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in samples.iter_rows().zip(&assignment) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let new = if counts[c] > 0 {
                sums[c].iter().map(|s| s / counts[c] as f64).collect()
            } else {
                let far = farthest_point(samples, &assignment, &centroids);
                assignment[far] = c;
                samples.row(far).to_vec()
            };
            shift = shift.max(sq_dist(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        for (a, r) in assignment.iter_mut().zip(samples.iter_rows()) {
            *a = nearest(r, &centroids);
        }
        if shift < tol {
            break;
        }
    }
    KMeans { centroids, assignment }
}

fn farthest_point(samples: &SampleMatrix, assignment: &[usize], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = -1.0;
    for (i, (r, &a)) in samples.iter_rows().zip(assignment).enumerate() {
        let d = sq_dist(r, &centroids[a]);
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn separates_two_blobs() {
        let mut vals = Vec::new();
        for i in 0..20 {
            let e = i as f64 * 0.001;
            vals.extend([0.1 + e, 0.1]);
            vals.extend([0.9 - e, 0.9]);
        }
        let s = SampleMatrix::new(40, 2, vals).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let km = kmeans(&s, 2, 10, 1e-6, &mut rng);
        let a0 = km.assignment[0];
        for i in 0..40 {
            assert_eq!(km.assignment[i] == a0, i % 2 == 0);
        }
    }

    #[test]
    fn duplicates_do_not_panic() {
        let s = SampleMatrix::new(5, 2, vec![0.5; 10]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let km = kmeans(&s, 3, 10, 1e-6, &mut rng);
        assert_eq!(km.centroids.len(), 3);
        assert!(km.centroids.iter().all(|c| c == &vec![0.5, 0.5]));
    }
}
