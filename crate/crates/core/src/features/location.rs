//! K-means clustering of location fixes with silhouette-selected k.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{percentile_sorted, sorted};

pub const LOCATION_NAMES: [&str; 3] = ["loc_home", "loc_distinct", "loc_cluster"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k_min: 6,
            k_max: 10,
            restarts: 50,
            max_iter: 100,
            seed: 0,
        }
    }
}

pub type Point = [f64; 2];

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansRun {
    pub centers: Vec<Point>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia: Vec<f64>,
}

fn assign(points: &[Point], centers: &[Point], labels: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for (p, l) in points.iter().zip(labels.iter_mut()) {
        let (best, d) = centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dist2(p, c)))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        *l = best;
        total += d;
    }
    total
}

/// Lloyd iterations from a farthest-point seeding whose first center is
/// drawn from `rng`.
pub fn kmeans(points: &[Point], k: usize, max_iter: usize, rng: &mut impl Rng) -> KMeansRun {
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut nearest: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let far = nearest
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc })
            .0;
        let c = points[far];
        for (n, p) in nearest.iter_mut().zip(points) {
            *n = n.min(dist2(p, &c));
        }
        centers.push(c);
    }
    let mut labels = vec![0; points.len()];
    let mut inertia = vec![assign(points, &centers, &mut labels)];
    for _ in 0..max_iter {
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            }
        }
        let before = labels.clone();
        inertia.push(assign(points, &centers, &mut labels));
        if labels == before {
            break;
        }
    }
    KMeansRun {
        centers,
        labels,
        inertia,
    }
}

/// Mean silhouette; singletons score 0.
pub fn silhouette(points: &[Point], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for i in 0..n {
        sums.fill(0.0);
        for j in 0..n {
            if i != j {
                sums[labels[j]] += dist2(&points[i], &points[j]).sqrt();
            }
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 && b.is_finite() {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocationClusters {
    pub k: usize,
    pub silhouette: f64,
    pub centers: Vec<Point>,
    /// Cluster index per input point, ranked by population (0 = home);
    /// `None` for points removed as outliers.
    pub labels: Vec<Option<usize>>,
}

impl LocationClusters {
    pub fn home(&self) -> usize {
        0
    }
}

fn iqr_bounds(x: &[f64]) -> (f64, f64) {
    let s = sorted(x);
    let q1 = percentile_sorted(&s, 0.25);
    let q3 = percentile_sorted(&s, 0.75);
    (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1))
}

/// Clusters points after per-coordinate IQR outlier removal. Returns `None`
/// (cluster unknown) when fewer than `k_min + 1` distinct points remain.
pub fn cluster_locations(points: &[Point], cfg: &ClusterConfig) -> Option<LocationClusters> {
    if points.is_empty() {
        return None;
    }
    let lat: Vec<f64> = points.iter().map(|p| p[0]).collect();
    let lon: Vec<f64> = points.iter().map(|p| p[1]).collect();
    let (lat_lo, lat_hi) = iqr_bounds(&lat);
    let (lon_lo, lon_hi) = iqr_bounds(&lon);
    let keep: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let p = points[i];
            p[0] >= lat_lo && p[0] <= lat_hi && p[1] >= lon_lo && p[1] <= lon_hi
        })
        .collect();
    let kept: Vec<Point> = keep.iter().map(|&i| points[i]).collect();
    let mut distinct = kept.clone();
    distinct.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    distinct.dedup();
    if distinct.len() < cfg.k_min + 1 {
        return None;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(usize, f64, KMeansRun)> = None;
    for k in cfg.k_min..=cfg.k_max.min(distinct.len() - 1) {
        let run = (0..cfg.restarts.max(1))
            .map(|_| kmeans(&kept, k, cfg.max_iter, &mut rng))
            .min_by(|a, b| a.inertia.last().unwrap().total_cmp(b.inertia.last().unwrap()))
            .unwrap();
        let s = silhouette(&kept, &run.labels, k);
        if best.as_ref().is_none_or(|b| s > b.1) {
            best = Some((k, s, run));
        }
    }
    let (k, s, run) = best?;

    let mut sizes: Vec<(usize, usize)> = (0..k)
        .map(|c| (c, run.labels.iter().filter(|&&l| l == c).count()))
        .collect();
    sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut rank = vec![0; k];
    for (r, (c, _)) in sizes.iter().enumerate() {
        rank[*c] = r;
    }
    let mut labels = vec![None; points.len()];
    for (j, &i) in keep.iter().enumerate() {
        labels[i] = Some(rank[run.labels[j]]);
    }
    let centers = sizes.iter().map(|(c, _)| run.centers[*c]).collect();
    Some(LocationClusters {
        k,
        silhouette: s,
        centers,
        labels,
    })
}

/// Fraction of labeled fixes at home, number of distinct clusters, modal
/// cluster (ties to the lower rank).
pub fn location_features(labels: &[Option<usize>]) -> [Option<f64>; 3] {
    let known: Vec<usize> = labels.iter().flatten().copied().collect();
    if known.is_empty() {
        return [None; 3];
    }
    let k = known.iter().max().unwrap() + 1;
    let mut counts = vec![0usize; k];
    for &l in &known {
        counts[l] += 1;
    }
    let modal = (0..k).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
    [
        Some(counts[0] as f64 / known.len() as f64),
        Some(counts.iter().filter(|&&c| c > 0).count() as f64),
        Some(modal as f64),
    ]
}
