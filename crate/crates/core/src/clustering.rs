//! Lloyd's k-means with k-means++ seeding.
//!
//! Everything is computed in `f64` internally; centroids are rounded to the
//! element type only when returned. Given the same points and config the
//! result is bit-identical, regardless of how many threads rayon uses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Below this many points the assignment step stays on the calling thread.
const PAR_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    /// Maximum number of centroid updates.
    pub max_iters: usize,
    /// Stop once an update improves inertia by less than `rel_tol` times the
    /// previous inertia.
    pub rel_tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, max_iters: 100, rel_tol: 1e-4, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol < 0.0 {
            return Err(Error::Config(format!("rel_tol must be non-negative, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    /// `k × dim` centroid table.
    pub centroids: DenseMatrix<T>,
    pub assignments: Vec<u32>,
    /// Sum of squared distances from each point to its assigned (returned) centroid.
    pub inertia: f64,
    /// Inertia after the initial assignment and after every update.
    pub inertia_trace: Vec<f64>,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lowest index.
#[inline]
fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c as u32, d);
        }
    }
    best
}

fn assign_all(points: &[f64], centroids: &[f64], dim: usize) -> Vec<(u32, f64)> {
    if points.len() / dim >= PAR_THRESHOLD {
        points
            .par_chunks_exact(dim)
            .map(|p| nearest(p, centroids, dim))
            .collect()
    } else {
        points
            .chunks_exact(dim)
            .map(|p| nearest(p, centroids, dim))
            .collect()
    }
}

fn to_f64<T: Scalar>(m: &DenseMatrix<T>) -> Vec<f64> {
    m.data().iter().map(|v| v.to_f64_lossless()).collect()
}

/// Maps every point to its nearest centroid (squared Euclidean, lowest index on ties).
pub fn kmeans_assign<T: Scalar>(
    points: &DenseMatrix<T>,
    centroids: &DenseMatrix<T>,
) -> Result<Vec<u32>> {
    if points.cols() != centroids.cols() {
        return Err(Error::Shape(format!(
            "points have {} columns, centroids have {}",
            points.cols(),
            centroids.cols()
        )));
    }
    let dim = points.cols();
    Ok(assign_all(&to_f64(points), &to_f64(centroids), dim)
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}

fn kmeans_plus_plus(points: &[f64], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / dim;
    let mut chosen = vec![false; n];
    let mut centroids = Vec::with_capacity(k * dim);

    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.extend_from_slice(&points[first * dim..(first + 1) * dim]);
    let mut dists: Vec<f64> = points
        .chunks_exact(dim)
        .map(|p| sq_dist(p, &centroids[..dim]))
        .collect();

    for _ in 1..k {
        let total: f64 = dists.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in dists.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just above the final partial sum.
            pick.unwrap_or_else(|| dists.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every point coincides with a chosen centroid.
            chosen.iter().position(|&c| !c).unwrap()
        };
        chosen[pick] = true;
        let c = &points[pick * dim..(pick + 1) * dim];
        centroids.extend_from_slice(c);
        for (d, p) in dists.iter_mut().zip(points.chunks_exact(dim)) {
            *d = d.min(sq_dist(p, c));
        }
    }
    centroids
}

/// Recomputes centroids as member means. A centroid left without members
/// takes over the point farthest from its current centroid, drawn from
/// clusters that can spare one.
fn update_centroids(
    points: &[f64],
    dim: usize,
    k: usize,
    assigned: &mut [(u32, f64)],
    centroids: &mut [f64],
) {
    let mut counts = vec![0usize; k];
    for &(c, _) in assigned.iter() {
        counts[c as usize] += 1;
    }
    for empty in 0..k {
        if counts[empty] != 0 {
            continue;
        }
        let donor = assigned
            .iter()
            .enumerate()
            .filter(|(_, (c, _))| counts[*c as usize] > 1)
            .fold(None, |best: Option<(usize, f64)>, (i, &(_, d))| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = donor {
            counts[assigned[i].0 as usize] -= 1;
            counts[empty] = 1;
            assigned[i] = (empty as u32, 0.0);
        }
    }

    let mut sums = vec![0.0f64; k * dim];
    for (p, &(c, _)) in points.chunks_exact(dim).zip(assigned.iter()) {
        let s = &mut sums[c as usize * dim..(c as usize + 1) * dim];
        for (acc, &v) in s.iter_mut().zip(p) {
            *acc += v;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        let count = counts[c] as f64;
        for (dst, &s) in centroids[c * dim..(c + 1) * dim]
            .iter_mut()
            .zip(&sums[c * dim..(c + 1) * dim])
        {
            *dst = s / count;
        }
    }
}

/// Runs Lloyd's algorithm from a k-means++ start.
///
/// Iteration stops when assignments stop changing, when inertia reaches
/// zero, when an update improves inertia by less than
/// `rel_tol × previous`, or after `max_iters` updates.
pub fn kmeans_fit<T: Scalar>(points: &DenseMatrix<T>, cfg: &KMeansConfig) -> Result<KMeansResult<T>> {
    cfg.validate()?;
    let n = points.rows();
    if cfg.k > n {
        return Err(Error::TooFewPoints { k: cfg.k, points: n });
    }
    let dim = points.cols();
    let pts = to_f64(points);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let round = |c: &[f64]| -> Vec<f64> {
        c.iter()
            .map(|&v| T::from_f64_nearest(v).to_f64_lossless())
            .collect()
    };

    let mut centroids = kmeans_plus_plus(&pts, dim, cfg.k, &mut rng);
    let mut assigned = assign_all(&pts, &centroids, dim);
    let mut inertia: f64 = assigned.iter().map(|a| a.1).sum();
    let mut trace = vec![inertia];

    for _ in 0..cfg.max_iters {
        if inertia == 0.0 {
            break;
        }
        let mut next = centroids.clone();
        update_centroids(&pts, dim, cfg.k, &mut assigned, &mut next);
        // Distances are measured against the centroids as they will be stored.
        let next = round(&next);
        let next_assigned = assign_all(&pts, &next, dim);
        let next_inertia: f64 = next_assigned.iter().map(|a| a.1).sum();
        let changed = next_assigned
            .iter()
            .zip(&assigned)
            .any(|(a, b)| a.0 != b.0);
        let improvement = inertia - next_inertia;

        centroids = next;
        assigned = next_assigned;
        inertia = next_inertia;
        trace.push(inertia);

        if !changed || improvement <= cfg.rel_tol * trace[trace.len() - 2] {
            break;
        }
    }

    let data = centroids.iter().map(|&v| T::from_f64_nearest(v)).collect();
    Ok(KMeansResult {
        centroids: DenseMatrix::new(cfg.k, dim, data)?,
        assignments: assigned.iter().map(|a| a.0).collect(),
        inertia,
        inertia_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn column(values: &[f64]) -> DenseMatrix<f64> {
        DenseMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    /// Best inertia over every assignment of points to `k` non-empty clusters.
    fn brute_force_inertia(points: &[Vec<f64>], k: usize) -> f64 {
        let n = points.len();
        let dim = points[0].len();
        let mut best = f64::INFINITY;
        let mut labels = vec![0usize; n];
        loop {
            let mut counts = vec![0usize; k];
            let mut sums = vec![vec![0.0; dim]; k];
            for (p, &l) in points.iter().zip(&labels) {
                counts[l] += 1;
                for (s, v) in sums[l].iter_mut().zip(p) {
                    *s += v;
                }
            }
            if counts.iter().all(|&c| c > 0) {
                let inertia: f64 = points
                    .iter()
                    .zip(&labels)
                    .map(|(p, &l)| {
                        p.iter()
                            .zip(&sums[l])
                            .map(|(v, s)| (v - s / counts[l] as f64).powi(2))
                            .sum::<f64>()
                    })
                    .sum();
                best = best.min(inertia);
            }
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                labels[i] += 1;
                if labels[i] < k {
                    break;
                }
                labels[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn four_points_two_clusters() {
        let pts = [0.0, 0.1, 0.9, 1.0];
        let oracle = brute_force_inertia(&pts.iter().map(|&v| vec![v]).collect::<Vec<_>>(), 2);
        assert!((oracle - 0.01).abs() < 1e-12);

        let res = kmeans_fit(&column(&pts), &KMeansConfig::new(2, 11)).unwrap();
        let mut c: Vec<f64> = res.centroids.data().to_vec();
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 0.95).abs() < 1e-12, "{c:?}");
        assert!((res.inertia - oracle).abs() < 1e-9);
    }

    #[test]
    fn k_equals_n_is_lossless() {
        let pts = [0.3, -1.0, 2.5, 7.0, 0.31];
        let res = kmeans_fit(&column(&pts), &KMeansConfig::new(5, 2)).unwrap();
        assert_eq!(res.inertia, 0.0);
        let mut c = res.centroids.data().to_vec();
        c.sort_by(f64::total_cmp);
        let mut want = pts.to_vec();
        want.sort_by(f64::total_cmp);
        assert_eq!(c, want);
    }

    #[test]
    fn constant_data() {
        let m = DenseMatrix::filled(10, 3, 0.75f32).unwrap();
        for k in 1..=4 {
            let res = kmeans_fit(&m, &KMeansConfig::new(k, 9)).unwrap();
            assert!(res.centroids.data().iter().all(|&v| v == 0.75));
            assert_eq!(res.inertia, 0.0);
        }
    }

    #[test]
    fn errors() {
        let m = column(&[1.0, 2.0]);
        assert!(matches!(
            kmeans_fit(&m, &KMeansConfig::new(3, 0)),
            Err(Error::TooFewPoints { k: 3, points: 2 })
        ));
        assert!(kmeans_fit(&m, &KMeansConfig::new(0, 0)).is_err());
        let mut cfg = KMeansConfig::new(1, 0);
        cfg.max_iters = 0;
        assert!(kmeans_fit(&m, &cfg).is_err());
        let bad = DenseMatrix::<f64>::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(kmeans_assign(&bad, &m).is_err());
    }

    #[test]
    fn assign_exact_match_and_ties() {
        let centroids =
            DenseMatrix::<f32>::from_rows(&[[9.0, 9.0], [0.0, 0.0], [2.0, 0.0], [5.0, 5.0]]).unwrap();
        let points = DenseMatrix::<f32>::from_rows(&[[5.0, 5.0], [1.0, 0.0]]).unwrap();
        assert_eq!(kmeans_assign(&points, &centroids).unwrap(), vec![3, 1]);
    }

    #[test]
    fn assign_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let points = DenseMatrix::<f32>::new(
            100,
            4,
            (0..400).map(|_| rng.random::<f32>()).collect(),
        )
        .unwrap();
        let centroids =
            DenseMatrix::<f32>::new(8, 4, (0..32).map(|_| rng.random::<f32>()).collect()).unwrap();
        let got = kmeans_assign(&points, &centroids).unwrap();
        for (i, p) in points.iter_rows().enumerate() {
            let d: Vec<f64> = centroids
                .iter_rows()
                .map(|c| p.iter().zip(c).map(|(a, b)| ((a - b) as f64).powi(2)).sum())
                .collect();
            let best = (0..8).fold(0, |b, c| if d[c] < d[b] { c } else { b });
            assert_eq!(got[i] as usize, best);
        }
    }

    #[test]
    fn duplicate_points_do_not_break_seeding() {
        // Only two distinct values, so k-means++ must seed a coincident centroid.
        let pts = [1.0, 1.0, 1.0, 1.0, 5.0];
        let res = kmeans_fit(&column(&pts), &KMeansConfig::new(3, 4)).unwrap();
        assert_eq!(res.centroids.rows(), 3);
        assert_eq!(res.inertia, 0.0);
        let c = res.centroids.data();
        assert!(c.contains(&1.0) && c.contains(&5.0));
    }

    #[test]
    fn empty_cluster_takes_farthest_point() {
        let pts = [0.0, 1.0, 10.0, 11.0, 30.0];
        let mut assigned = vec![(0, 0.25), (0, 0.25), (0, 0.0), (0, 1.0), (1, 0.0)];
        let mut centroids = vec![0.0, 30.0, 100.0];
        update_centroids(&pts, 1, 3, &mut assigned, &mut centroids);
        assert_eq!(assigned[3].0, 2);
        assert_eq!(centroids, vec![11.0 / 3.0, 30.0, 11.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn invariants_hold(
            n in 2usize..60,
            dim in 1usize..4,
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let k = k.min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts = DenseMatrix::<f32>::new(n, dim, (0..n * dim).map(|_| rng.random::<f32>()).collect()).unwrap();
            let cfg = KMeansConfig::new(k, seed);
            let res = kmeans_fit(&pts, &cfg).unwrap();

            for w in res.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9, "inertia rose: {:?}", res.inertia_trace);
            }
            prop_assert!(res.assignments.iter().all(|&a| (a as usize) < k));

            let recomputed: f64 = pts.iter_rows().zip(&res.assignments).map(|(p, &a)| {
                p.iter().zip(res.centroids.row(a as usize)).map(|(&x, &c)| (x as f64 - c as f64).powi(2)).sum::<f64>()
            }).sum();
            prop_assert!((recomputed - res.inertia).abs() < 1e-9);
            prop_assert_eq!(&kmeans_assign(&pts, &res.centroids).unwrap(), &res.assignments);
            prop_assert_eq!(kmeans_fit(&pts, &cfg).unwrap(), res);
        }
    }
}
