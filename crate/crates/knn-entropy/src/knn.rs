//! Exact k-nearest-neighbor search over a [`Dataset`].
//!
//! Two interchangeable backends answer the same queries with bit-identical
//! results: a bounding-box k-d tree and a linear scan. Ties are broken by
//! ascending original point index, with ordering on *squared* distances so
//! the tie rule is independent of the final `sqrt` rounding. The k-d tree
//! prunes with point-to-box distances that respect torus wraparound, so it
//! is exact on both space kinds and for every radius.
//!
//! Only exact search is provided: the concentration and moment bounds this
//! crate verifies are statements about exact `eps_k`, and an approximate
//! backend would silently void them.

use crate::space::{MetricSpace, SpaceKind};
use crate::{Error, Result};
use rayon::prelude::*;
use std::collections::BinaryHeap;
use std::io::{BufRead, Write};

/// An ordered collection of `n` points bound to a metric space.
///
/// Torus coordinates are canonicalized into `[0, 1)` at construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    space: MetricSpace,
    coords: Vec<f64>,
    n: usize,
}

impl Dataset {
    /// Build from one coordinate row per point.
    pub fn from_rows(space: MetricSpace, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = space.dim();
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(space, coords)
    }

    /// Build from a flat row-major coordinate buffer of length `n * D`.
    pub fn from_flat(space: MetricSpace, mut coords: Vec<f64>) -> Result<Self> {
        let dim = space.dim();
        if coords.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: coords.len() % dim,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("dataset coordinates must be finite".into()));
        }
        space.canonicalize(&mut coords);
        let n = coords.len() / dim;
        Ok(Self { space, coords, n })
    }

    pub fn space(&self) -> MetricSpace {
        self.space
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.space.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.space.dim())
    }

    /// Write as CSV: one row per point, `D` columns, 17 significant digits
    /// (lossless for IEEE doubles), LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for p in self.iter_points() {
            let row: Vec<String> = p.iter().map(|&v| format_real(v)).collect();
            w.write_all(row.join(",").as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Read a CSV produced by [`Dataset::write_csv`] (or any numeric CSV with
    /// `D` columns). Blank lines and lines starting with `#` are skipped.
    pub fn read_csv<R: BufRead>(space: MetricSpace, r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut row = Vec::with_capacity(space.dim());
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad real: {field:?}"),
                })?;
                row.push(v);
            }
            if row.len() != space.dim() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected {} columns, got {}", space.dim(), row.len()),
                });
            }
            rows.push(row);
        }
        Self::from_rows(space, &rows)
    }
}

/// Format a real with 17 significant digits; round-trips any f64.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// One answered neighbor: metric distance and original point index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub distance: f64,
    pub index: usize,
}

/// Leave-one-out k-NN distances for every point of a dataset.
#[derive(Debug, Clone)]
pub struct KnnResult {
    pub k: usize,
    /// `eps[i]` is the k-NN distance of point `i` with itself excluded.
    pub eps: Vec<f64>,
    /// Indices of the k nearest neighbors of each point, ascending by
    /// (squared distance, index).
    pub neighbor_indices: Vec<Vec<usize>>,
}

impl KnnResult {
    /// Points whose k-NN distance is exactly zero (duplicates).
    pub fn zero_count(&self) -> usize {
        self.eps.iter().filter(|&&e| e == 0.0).count()
    }
}

// Candidate ordered by (squared distance, index): the deterministic tie rule
// shared by every backend.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

// Keeps the k smallest candidates under the tie rule; max-heap on top.
struct KBest {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl KBest {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn consider(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if c < *self.heap.peek().expect("non-empty") {
            self.heap.pop();
            self.heap.push(c);
        }
    }

    // Largest accepted squared distance, or +inf while not full.
    fn worst_dist_sq(&self) -> f64 {
        if self.heap.len() < self.k {
            f64::INFINITY
        } else {
            self.heap.peek().map(|c| c.dist_sq).unwrap_or(f64::INFINITY)
        }
    }

    fn into_sorted(self) -> Vec<Candidate> {
        self.heap.into_sorted_vec()
    }
}

const LEAF_SIZE: usize = 16;

struct KdNode {
    lo: Box<[f64]>,
    hi: Box<[f64]>,
    // Leaf: scan perm[start..end]. Internal: recurse into children.
    start: u32,
    end: u32,
    children: Option<(u32, u32)>,
}

struct KdTree {
    perm: Vec<u32>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    fn build(data: &Dataset) -> Self {
        let n = data.n();
        let mut perm: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::new();
        Self::build_range(data, &mut perm, &mut nodes, 0, n);
        Self { perm, nodes }
    }

    fn build_range(
        data: &Dataset,
        perm: &mut [u32],
        nodes: &mut Vec<KdNode>,
        offset: usize,
        len: usize,
    ) -> u32 {
        let dim = data.dim();
        let slot = nodes.len();
        let mut lo = vec![f64::INFINITY; dim].into_boxed_slice();
        let mut hi = vec![f64::NEG_INFINITY; dim].into_boxed_slice();
        for &idx in perm[offset..offset + len].iter() {
            for (d, &c) in data.point(idx as usize).iter().enumerate() {
                lo[d] = lo[d].min(c);
                hi[d] = hi[d].max(c);
            }
        }
        nodes.push(KdNode {
            lo,
            hi,
            start: offset as u32,
            end: (offset + len) as u32,
            children: None,
        });
        if len <= LEAF_SIZE {
            return slot as u32;
        }
        // Split along the widest box extent at the median position;
        // (coordinate, index) ordering keeps construction deterministic.
        let node = &nodes[slot];
        let split_dim = (0..dim)
            .max_by(|&a, &b| (node.hi[a] - node.lo[a]).total_cmp(&(node.hi[b] - node.lo[b])))
            .unwrap_or(0);
        let mid = len / 2;
        perm[offset..offset + len].select_nth_unstable_by(mid, |&a, &b| {
            data.point(a as usize)[split_dim]
                .total_cmp(&data.point(b as usize)[split_dim])
                .then(a.cmp(&b))
        });
        let left = Self::build_range(data, perm, nodes, offset, mid);
        let right = Self::build_range(data, perm, nodes, offset + mid, len - mid);
        nodes[slot].children = Some((left, right));
        slot as u32
    }

    // Smallest possible squared distance from x to any point inside the box,
    // honoring torus wraparound.
    fn box_dist_sq(&self, space: &MetricSpace, node: &KdNode, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        match space.kind() {
            SpaceKind::Euclidean => {
                for d in 0..x.len() {
                    let gap = (node.lo[d] - x[d]).max(x[d] - node.hi[d]).max(0.0);
                    acc += gap * gap;
                }
            }
            SpaceKind::FlatTorus => {
                for d in 0..x.len() {
                    let mut gap = f64::INFINITY;
                    for shift in [-1.0, 0.0, 1.0] {
                        let g = (node.lo[d] + shift - x[d])
                            .max(x[d] - (node.hi[d] + shift))
                            .max(0.0);
                        gap = gap.min(g);
                    }
                    acc += gap * gap;
                }
            }
        }
        acc
    }

    fn search(&self, data: &Dataset, x: &[f64], exclude: Option<usize>, best: &mut KBest) {
        self.search_node(data, 0, x, exclude, best);
    }

    fn search_node(
        &self,
        data: &Dataset,
        node_id: u32,
        x: &[f64],
        exclude: Option<usize>,
        best: &mut KBest,
    ) {
        let node = &self.nodes[node_id as usize];
        match node.children {
            None => {
                for &idx in &self.perm[node.start as usize..node.end as usize] {
                    let idx = idx as usize;
                    if Some(idx) == exclude {
                        continue;
                    }
                    let dist_sq = data.space.distance_sq(x, data.point(idx));
                    best.consider(Candidate {
                        dist_sq,
                        index: idx,
                    });
                }
            }
            Some((l, r)) => {
                let dl = self.box_dist_sq(&data.space, &self.nodes[l as usize], x);
                let dr = self.box_dist_sq(&data.space, &self.nodes[r as usize], x);
                let ordered = if dl <= dr {
                    [(dl, l), (dr, r)]
                } else {
                    [(dr, r), (dl, l)]
                };
                for (d, child) in ordered {
                    // <= rather than <: an equal-distance point with a smaller
                    // index may still displace the current worst candidate.
                    if d <= best.worst_dist_sq() {
                        self.search_node(data, child, x, exclude, best);
                    }
                }
            }
        }
    }
}

enum Backend {
    Brute,
    Tree(KdTree),
}

/// Immutable exact k-NN index over a dataset. Concurrent queries are safe.
pub struct KnnIndex<'a> {
    data: &'a Dataset,
    backend: Backend,
}

impl<'a> KnnIndex<'a> {
    /// Build the default (k-d tree) index.
    pub fn build(data: &'a Dataset) -> Self {
        Self {
            data,
            backend: Backend::Tree(KdTree::build(data)),
        }
    }

    /// Linear-scan backend; answers every query identically to the tree.
    pub fn brute_force(data: &'a Dataset) -> Self {
        Self {
            data,
            backend: Backend::Brute,
        }
    }

    pub fn dataset(&self) -> &Dataset {
        self.data
    }

    fn check_k(&self, k: usize, exclude: Option<usize>) -> Result<()> {
        let limit = self.data.n() - usize::from(exclude.is_some());
        if k == 0 || k > limit {
            return Err(Error::KOutOfRange { k, limit });
        }
        Ok(())
    }

    /// The k nearest neighbors of `x`, ascending by (squared distance,
    /// index). `exclude` drops one dataset index from consideration.
    ///
    /// Torus queries are canonicalized into `[0, 1)` first, like dataset
    /// points are at construction.
    pub fn knn_query(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Result<Vec<Neighbor>> {
        self.check_k(k, exclude)?;
        if x.len() != self.data.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data.dim(),
                got: x.len(),
            });
        }
        let canonical: Vec<f64>;
        let x = if self.data.space.kind() == SpaceKind::FlatTorus
            && x.iter().any(|&c| !(0.0..1.0).contains(&c))
        {
            let mut q = x.to_vec();
            self.data.space.canonicalize(&mut q);
            canonical = q;
            &canonical
        } else {
            x
        };
        let mut best = KBest::new(k);
        match &self.backend {
            Backend::Brute => {
                for (idx, p) in self.data.iter_points().enumerate() {
                    if Some(idx) == exclude {
                        continue;
                    }
                    let dist_sq = self.data.space.distance_sq(x, p);
                    best.consider(Candidate {
                        dist_sq,
                        index: idx,
                    });
                }
            }
            Backend::Tree(tree) => tree.search(self.data, x, exclude, &mut best),
        }
        Ok(best
            .into_sorted()
            .into_iter()
            .map(|c| Neighbor {
                distance: c.dist_sq.sqrt(),
                index: c.index,
            })
            .collect())
    }

    /// `eps_k(x)`: distance from `x` to its k-th nearest neighbor.
    pub fn knn_distance(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Result<f64> {
        Ok(self.knn_query(x, k, exclude)?[k - 1].distance)
    }

    // Below this size, per-point queries are far cheaper than the scheduling
    // overhead of farming them out.
    const PAR_LOO_THRESHOLD: usize = 512;

    // Per-point map preserving index order; results are identical on either
    // path (each point's query is independent).
    fn loo_map<T: Send, F: Fn(usize) -> T + Send + Sync>(&self, f: F) -> Vec<T> {
        let n = self.data.n();
        if n < Self::PAR_LOO_THRESHOLD {
            (0..n).map(f).collect()
        } else {
            (0..n).into_par_iter().map(f).collect()
        }
    }

    /// Leave-one-out distances: `eps[i]` is the k-NN distance of point `i`
    /// among the other `n - 1` points. Requires `k <= n - 1`.
    ///
    /// Zero distances (duplicate points) are reported as-is here; the
    /// estimator layer decides whether they are an error (strict mode) or
    /// dropped (lenient mode).
    pub fn loo_knn_distances(&self, k: usize) -> Result<KnnResult> {
        self.check_k(k, Some(0))?;
        let per_point: Vec<Vec<Neighbor>> = self.loo_map(|i| {
            self.knn_query(self.data.point(i), k, Some(i))
                .expect("preconditions checked")
        });
        let eps = per_point.iter().map(|nb| nb[k - 1].distance).collect();
        let neighbor_indices = per_point
            .into_iter()
            .map(|nb| nb.into_iter().map(|c| c.index).collect())
            .collect();
        Ok(KnnResult {
            k,
            eps,
            neighbor_indices,
        })
    }

    /// Leave-one-out `eps` values only (no neighbor index recording).
    pub fn loo_eps(&self, k: usize) -> Result<Vec<f64>> {
        self.check_k(k, Some(0))?;
        Ok(self.loo_map(|i| {
            self.knn_query(self.data.point(i), k, Some(i))
                .expect("preconditions checked")[k - 1]
                .distance
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset_1d(space: MetricSpace, xs: &[f64]) -> Dataset {
        Dataset::from_rows(space, &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    // Independent oracle: full sort by the (squared distance, index) rule.
    fn brute_oracle(data: &Dataset, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        let mut all: Vec<(f64, usize)> = data
            .iter_points()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (data.space().distance_sq(x, p), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter()
            .map(|(d2, i)| Neighbor {
                distance: d2.sqrt(),
                index: i,
            })
            .collect()
    }

    #[test]
    fn single_point_dataset_builds() {
        let ds = dataset_1d(MetricSpace::euclidean(1).unwrap(), &[0.3]);
        let idx = KnnIndex::build(&ds);
        assert!(idx.knn_distance(&[0.0], 1, None).unwrap() - 0.3 < 1e-15);
        assert!(idx.loo_knn_distances(1).is_err()); // k <= n - 1 fails
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(
            Dataset::from_rows(MetricSpace::euclidean(1).unwrap(), &[]),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn query_examples() {
        let ds = dataset_1d(MetricSpace::euclidean(1).unwrap(), &[1.0, 3.0]);
        let idx = KnnIndex::build(&ds);
        assert_eq!(idx.knn_distance(&[0.0], 1, None).unwrap(), 1.0);
        assert_eq!(idx.knn_distance(&[0.0], 2, None).unwrap(), 3.0);
        assert!(idx.knn_distance(&[0.0], 3, None).is_err());
        assert!(idx.knn_distance(&[0.0], 0, None).is_err());

        let ds = dataset_1d(MetricSpace::flat_torus(1).unwrap(), &[0.1, 0.9]);
        let idx = KnnIndex::build(&ds);
        assert!((idx.knn_distance(&[0.0], 1, None).unwrap() - 0.1).abs() < 1e-15);
        // Non-canonical torus queries wrap to the same answer.
        assert_eq!(
            idx.knn_distance(&[2.25], 1, None).unwrap(),
            idx.knn_distance(&[0.25], 1, None).unwrap()
        );
        assert_eq!(
            idx.knn_distance(&[-0.75], 2, None).unwrap(),
            idx.knn_distance(&[0.25], 2, None).unwrap()
        );
    }

    #[test]
    fn loo_examples() {
        let ds = dataset_1d(MetricSpace::euclidean(1).unwrap(), &[0.0, 1.0, 3.0]);
        let idx = KnnIndex::build(&ds);
        let r = idx.loo_knn_distances(1).unwrap();
        assert_eq!(r.eps, vec![1.0, 1.0, 2.0]);
        let r = idx.loo_knn_distances(2).unwrap();
        assert_eq!(r.eps, vec![3.0, 2.0, 3.0]);
        assert!(idx.loo_knn_distances(3).is_err());
    }

    #[test]
    fn duplicates_show_up_as_zero_eps() {
        let ds = dataset_1d(MetricSpace::euclidean(1).unwrap(), &[0.5, 0.5, 2.0]);
        let idx = KnnIndex::build(&ds);
        let r = idx.loo_knn_distances(1).unwrap();
        assert_eq!(r.zero_count(), 2);
        // Tie rule: point 1 is the neighbor of point 0, not vice versa first.
        assert_eq!(r.neighbor_indices[0], vec![1]);
        assert_eq!(r.neighbor_indices[1], vec![0]);
    }

    #[test]
    fn tree_matches_oracle_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7ee5);
        for trial in 0..400 {
            let dim = rng.gen_range(1..=5);
            let n = rng.gen_range(2..=120);
            let space = if trial % 2 == 0 {
                MetricSpace::euclidean(dim).unwrap()
            } else {
                MetricSpace::flat_torus(dim).unwrap()
            };
            // Coarse grid coordinates force plenty of exact distance ties.
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..dim).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect())
                .collect();
            let ds = Dataset::from_rows(space, &rows).unwrap();
            let tree = KnnIndex::build(&ds);
            let brute = KnnIndex::brute_force(&ds);
            let k = rng.gen_range(1..=n.min(12));
            let x: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();

            let got_tree = tree.knn_query(&x, k, None).unwrap();
            let got_brute = brute.knn_query(&x, k, None).unwrap();
            let want = brute_oracle(&ds, &x, k, None);
            for (g, w) in got_tree.iter().zip(&want) {
                assert_eq!(g.distance.to_bits(), w.distance.to_bits());
                assert_eq!(g.index, w.index);
            }
            for (g, w) in got_brute.iter().zip(&want) {
                assert_eq!(g.distance.to_bits(), w.distance.to_bits());
                assert_eq!(g.index, w.index);
            }

            // Every 8th configuration also compares the full leave-one-out
            // table against the oracle, point by point.
            if trial % 8 == 0 && k < n {
                let loo = tree.loo_knn_distances(k).unwrap();
                for i in 0..n {
                    let want = brute_oracle(&ds, ds.point(i), k, Some(i));
                    assert_eq!(loo.eps[i].to_bits(), want[k - 1].distance.to_bits());
                    let expect: Vec<usize> = want.iter().map(|c| c.index).collect();
                    assert_eq!(loo.neighbor_indices[i], expect);
                }
            }
        }
    }

    #[test]
    fn eps_nondecreasing_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let ds = Dataset::from_rows(MetricSpace::euclidean(2).unwrap(), &rows).unwrap();
        let idx = KnnIndex::build(&ds);
        let x = [0.4, 0.6];
        let mut prev = 0.0;
        for k in 1..=59 {
            let e = idx.knn_distance(&x, k, None).unwrap();
            assert!(e >= prev);
            prev = e;
        }
    }

    #[test]
    fn loo_is_permutation_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let space = MetricSpace::flat_torus(3).unwrap();
        let ds = Dataset::from_rows(space, &rows).unwrap();
        let eps = KnnIndex::build(&ds).loo_knn_distances(3).unwrap().eps;

        // Reverse the point order; eps values must follow the permutation.
        let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
        let ds_rev = Dataset::from_rows(space, &rev).unwrap();
        let eps_rev = KnnIndex::build(&ds_rev).loo_knn_distances(3).unwrap().eps;
        for i in 0..n {
            assert_eq!(eps[i].to_bits(), eps_rev[n - 1 - i].to_bits());
        }
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen::<f64>() * 1e3 - 500.0, rng.gen::<f64>() * 1e-7])
            .collect();
        let space = MetricSpace::euclidean(2).unwrap();
        let ds = Dataset::from_rows(space, &rows).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(space, &buf[..]).unwrap();
        assert_eq!(ds.n(), back.n());
        for i in 0..ds.n() {
            for d in 0..2 {
                assert_eq!(ds.point(i)[d].to_bits(), back.point(i)[d].to_bits());
            }
        }
        // Malformed input surfaces a parse error with the line number.
        let bad = b"0.1,0.2\nnot,a number\n";
        assert!(matches!(
            Dataset::read_csv(space, &bad[..]),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
