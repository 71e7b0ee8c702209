use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;

use super::iou;
use crate::error::{Error, Result};
use crate::microworld::RegionBox;
use crate::rng::{rng_from, streams, Rng};

const KMEANS_RESTARTS: usize = 8;
const KMEANS_ITERS: usize = 100;

/// Selected region hypotheses: `m * k` proposals grouped by cluster, followed
/// by the whole canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    pub hypotheses: Vec<(RegionBox, f64)>,
    /// Cluster of each hypothesis; `None` marks the whole-canvas entry.
    pub clusters: Vec<Option<usize>>,
}

impl HypothesisSet {
    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn boxes(&self) -> impl Iterator<Item = &RegionBox> {
        self.hypotheses.iter().map(|(b, _)| b)
    }

    /// Keeps only the hypotheses at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        HypothesisSet {
            hypotheses: indices.iter().map(|&i| self.hypotheses[i]).collect(),
            clusters: indices.iter().map(|&i| self.clusters[i]).collect(),
        }
    }
}

fn affinity(boxes: &[RegionBox]) -> DMatrix<f64> {
    let n = boxes.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { iou(&boxes[i], &boxes[j]) })
}

/// Multiway normalized cut `sum_c cut(A_c, rest) / vol(A_c)` of a labelling.
pub fn ncut_value(boxes: &[RegionBox], labels: &[usize]) -> f64 {
    ncut_of(&affinity(boxes), labels)
}

fn ncut_of(a: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let m = labels.iter().max().map_or(0, |&x| x + 1);
    let mut cut = vec![0.0; m];
    let mut vol = vec![0.0; m];
    for i in 0..labels.len() {
        for j in 0..labels.len() {
            vol[labels[i]] += a[(i, j)];
            if labels[i] != labels[j] {
                cut[labels[i]] += a[(i, j)];
            }
        }
    }
    cut.iter().zip(&vol).filter(|(_, &v)| v > 0.0).map(|(c, v)| c / v).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; empty clusters steal the point
/// farthest from its centroid.
fn kmeans_once(points: &[Vec<f64>], m: usize, rng: &mut Rng) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < m {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut r = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &di) in d.iter().enumerate() {
                if r < di {
                    idx = i;
                    break;
                }
                r -= di;
            }
            idx
        };
        centers.push(points[pick].clone());
    }
    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(p, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        fix_empty(points, &centers, &mut labels, m);
        let dim = points[0].len();
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            for k in 0..dim {
                center[k] = members.iter().map(|p| p[k]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (labels, inertia)
}

fn fix_empty(points: &[Vec<f64>], centers: &[Vec<f64>], labels: &mut [usize], m: usize) {
    loop {
        let mut sizes = vec![0usize; m];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..points.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                sq_dist(&points[a], &centers[labels[a]])
                    .total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                    .then(b.cmp(&a))
            })
            .expect("n >= m guarantees a cluster with two members");
        labels[donor] = empty;
    }
}

/// Greedy single-box moves that lower the normalized cut, keeping every
/// cluster nonempty.
fn refine(a: &DMatrix<f64>, labels: &mut [usize], m: usize) {
    let mut best = ncut_of(a, labels);
    loop {
        let mut improved = false;
        for i in 0..labels.len() {
            let own = labels[i];
            if labels.iter().filter(|&&l| l == own).count() == 1 {
                continue;
            }
            for c in 0..m {
                if c == own {
                    continue;
                }
                labels[i] = c;
                let v = ncut_of(a, labels);
                if v < best - 1e-12 {
                    best = v;
                    improved = true;
                    break;
                }
                labels[i] = own;
            }
        }
        if !improved {
            return;
        }
    }
}

/// Relabels clusters in order of first appearance.
fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: Vec<Option<usize>> = vec![None; labels.iter().max().map_or(0, |&l| l + 1)];
    let mut next = 0;
    labels
        .iter()
        .map(|&l| {
            *map[l].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

/// Connected components of the affinity graph, labelled by first member.
fn components(a: &DMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if label[j] == usize::MAX && a[(i, j)] > 0.0 {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

/// Packs at least `m` components into `m` clusters, largest first into the
/// currently smallest cluster. Every such packing has zero cut.
fn pack_components(comp: &[usize], m: usize) -> Vec<usize> {
    let count = comp.iter().max().map_or(0, |&c| c + 1);
    let mut sizes: Vec<(usize, usize)> = (0..count)
        .map(|c| (c, comp.iter().filter(|&&x| x == c).count()))
        .collect();
    sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut load = vec![0usize; m];
    let mut target = vec![0usize; count];
    for (k, &(c, size)) in sizes.iter().enumerate() {
        let slot = if k < m {
            k
        } else {
            (0..m).min_by_key(|&s| (load[s], s)).expect("m > 0")
        };
        target[c] = slot;
        load[slot] += size;
    }
    comp.iter().map(|&c| target[c]).collect()
}

/// Partitions `boxes` into `m` groups. When the IoU graph falls apart into
/// at least `m` pieces they are packed whole (a zero cut). Otherwise
/// spectral clustering of the IoU affinity: rows of the `m` smallest eigenvectors of the symmetric
/// normalized Laplacian, normalized to unit length, are clustered by seeded
/// k-means and the result is polished by normalized-cut descent.
pub fn spectral_partition(boxes: &[RegionBox], m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = boxes.len();
    if m == 0 {
        return Err(Error::domain("number of clusters must be positive"));
    }
    if n < m {
        return Err(Error::domain(format!("{n} proposals cannot form {m} clusters")));
    }
    if m == 1 {
        return Ok(vec![0; n]);
    }
    let a = affinity(boxes);
    let comp = components(&a);
    if comp.iter().max().map_or(0, |&c| c + 1) >= m {
        return Ok(canonical_labels(&pack_components(&comp, m)));
    }
    let d_inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / a.row(i).sum().sqrt()).collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - d_inv_sqrt[i] * a[(i, j)] * d_inv_sqrt[j]
    });
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]).then(x.cmp(&y)));
    let points: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let row: Vec<f64> = order[..m].iter().map(|&c| eig.eigenvectors[(i, c)]).collect();
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter().map(|x| x / norm).collect()
            } else {
                row
            }
        })
        .collect();
    let mut rng = rng_from(seed ^ streams::KMEANS);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let (labels, inertia) = kmeans_once(&points, m, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    let mut labels = best.expect("at least one restart").0;
    refine(&a, &mut labels, m);
    Ok(canonical_labels(&labels))
}

fn canonical_order(proposals: &[(RegionBox, f64)]) -> Vec<(RegionBox, f64)> {
    let mut sorted = proposals.to_vec();
    sorted.sort_by(|(a, sa), (b, sb)| {
        a.x0.total_cmp(&b.x0)
            .then(a.y0.total_cmp(&b.y0))
            .then(a.x1.total_cmp(&b.x1))
            .then(a.y1.total_cmp(&b.y1))
            .then(sa.total_cmp(sb))
    });
    sorted
}

/// Groups `proposals` into `m` clusters and keeps the `k` best-scoring boxes
/// of each (repeating a cluster's best box when it has fewer than `k`), then
/// appends the whole canvas. The result has exactly `m * k + 1` entries and
/// does not depend on the order of `proposals`.
pub fn cluster_and_select(
    proposals: &[(RegionBox, f64)],
    m: usize,
    k: usize,
    canvas: (f64, f64),
) -> Result<HypothesisSet> {
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    if proposals.iter().any(|(_, s)| !s.is_finite()) {
        return Err(Error::domain("non-finite proposal score"));
    }
    let sorted = canonical_order(proposals);
    let boxes: Vec<RegionBox> = sorted.iter().map(|(b, _)| *b).collect();
    let labels = spectral_partition(&boxes, m, streams::HYPOTHESIS)?;
    let mut hypotheses = Vec::with_capacity(m * k + 1);
    let mut clusters = Vec::with_capacity(m * k + 1);
    for c in 0..m {
        let mut members: Vec<usize> = (0..sorted.len()).filter(|&i| labels[i] == c).collect();
        members.sort_by(|&a, &b| sorted[b].1.total_cmp(&sorted[a].1).then(a.cmp(&b)));
        for j in 0..k {
            let pick = members.get(j).copied().unwrap_or(members[0]);
            hypotheses.push(sorted[pick]);
            clusters.push(Some(c));
        }
    }
    hypotheses.push((RegionBox::whole(canvas), 1.0));
    clusters.push(None);
    Ok(HypothesisSet { hypotheses, clusters })
}
