//! Exact nearest-neighbor search over a static 3D point set.
//!
//! Median split on the widest-spread axis, points stored contiguously in leaf
//! order. Every node keeps the tight bounding box of its points; the search visits
//! the nearer child box first and prunes boxes farther than the current best.
//! Distances are compared in squared form and square-rooted on return.
//! Ties between equidistant points resolve to the lowest input index.

use rayon::prelude::*;

use crate::geometry::Vec3;

pub const DEFAULT_LEAF_SIZE: usize = 32;

/// Queries per parallel work item in [`KdTree::nearest_batch`].
const BATCH_CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnResult {
    /// Euclidean distance to the nearest indexed point, `+∞` for an empty index.
    pub distance: f64,
    /// Input index of that point.
    pub index: Option<usize>,
}

impl NnResult {
    pub const NONE: NnResult = NnResult { distance: f64::INFINITY, index: None };
}

#[derive(Clone, Copy, Debug)]
struct Node {
    lo: [f64; 3],
    hi: [f64; 3],
    /// Inner: left child. Leaf: first slot.
    a: u32,
    /// Inner: right child. Leaf: one past the last slot.
    b: u32,
    leaf: bool,
}

impl Node {
    /// Squared distance from `q` to the box, summed in x, y, z order like point
    /// distances, so it never exceeds the computed distance of any point inside.
    #[inline]
    fn box_d2(&self, q: &[f64; 3]) -> f64 {
        let d = |k: usize| (self.lo[k] - q[k]).max(q[k] - self.hi[k]).max(0.0);
        let (dx, dy, dz) = (d(0), d(1), d(2));
        dx * dx + dy * dy + dz * dz
    }
}

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    indices: Vec<u32>,
    nodes: Vec<Node>,
}

#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    index: u32,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> KdTree {
        KdTree::with_leaf_size(points, DEFAULT_LEAF_SIZE)
    }

    pub fn with_leaf_size(points: &[Vec3], leaf_size: usize) -> KdTree {
        assert!(points.len() < u32::MAX as usize, "too many points for a u32-indexed tree");
        let leaf_size = leaf_size.max(1);
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * points.len() / leaf_size + 1);
        if !points.is_empty() {
            build_node(points, &mut order, 0, leaf_size, &mut nodes);
        }
        KdTree { points: order.iter().map(|&i| points[i as usize].to_array()).collect(), indices: order, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, q: Vec3) -> NnResult {
        if self.nodes.is_empty() {
            return NnResult::NONE;
        }
        let q = q.to_array();
        let mut best = Best { d2: f64::INFINITY, index: u32::MAX };
        self.search(0, &q, &mut best);
        NnResult { distance: best.d2.sqrt(), index: Some(best.index as usize) }
    }

    /// Element-wise equal to [`KdTree::nearest`], in query order. Runs on the current rayon pool.
    pub fn nearest_batch(&self, queries: &[Vec3]) -> Vec<NnResult> {
        let mut out = vec![NnResult::NONE; queries.len()];
        out.par_chunks_mut(BATCH_CHUNK).zip(queries.par_chunks(BATCH_CHUNK)).for_each(|(dst, src)| {
            for (d, &q) in dst.iter_mut().zip(src) {
                *d = self.nearest(q);
            }
        });
        out
    }

    fn search(&self, node: u32, q: &[f64; 3], best: &mut Best) {
        let n = &self.nodes[node as usize];
        if n.leaf {
            for slot in n.a as usize..n.b as usize {
                let p = &self.points[slot];
                let dx = q[0] - p[0];
                let dy = q[1] - p[1];
                let dz = q[2] - p[2];
                let d2 = dx * dx + dy * dy + dz * dz;
                if d2 <= best.d2 {
                    let idx = self.indices[slot];
                    if d2 < best.d2 || idx < best.index {
                        best.d2 = d2;
                        best.index = idx;
                    }
                }
            }
            return;
        }
        let da = self.nodes[n.a as usize].box_d2(q);
        let db = self.nodes[n.b as usize].box_d2(q);
        let ((near, dn), (far, df)) = if da <= db { ((n.a, da), (n.b, db)) } else { ((n.b, db), (n.a, da)) };
        // equal distances must still be visited for the tie rule
        if dn <= best.d2 {
            self.search(near, q, best);
        }
        if df <= best.d2 {
            self.search(far, q, best);
        }
    }
}

fn build_node(points: &[Vec3], order: &mut [u32], base: usize, leaf_size: usize, nodes: &mut Vec<Node>) -> u32 {
    let id = nodes.len() as u32;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        let p = points[i as usize].to_array();
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let leaf = Node { lo, hi, a: base as u32, b: (base + order.len()) as u32, leaf: true };
    let spread = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let axis = if spread[0] >= spread[1] && spread[0] >= spread[2] {
        0
    } else if spread[1] >= spread[2] {
        1
    } else {
        2
    };
    // small sets and sets of coincident points stay leaves
    if order.len() <= leaf_size || spread[axis] == 0.0 {
        nodes.push(leaf);
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&x, &y| {
        points[x as usize][axis].total_cmp(&points[y as usize][axis]).then(x.cmp(&y))
    });
    nodes.push(Node { leaf: false, ..leaf });
    let (left, right) = order.split_at_mut(mid);
    let l = build_node(points, left, base, leaf_size, nodes);
    let r = build_node(points, right, base + mid, leaf_size, nodes);
    nodes[id as usize].a = l;
    nodes[id as usize].b = r;
    id
}

/// Linear-scan nearest neighbor with the same tie rule; the baseline the tree is checked against.
pub fn brute_force_nearest(points: &[Vec3], q: Vec3) -> NnResult {
    let mut best = NnResult::NONE;
    let mut best_d2 = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d2 = q.distance_squared(*p);
        if d2 < best_d2 {
            best_d2 = d2;
            best = NnResult { distance: 0.0, index: Some(i) };
        }
    }
    best.distance = best_d2.sqrt();
    best
}

/// Parallel linear-scan batch query.
pub fn brute_force_batch(points: &[Vec3], queries: &[Vec3]) -> Vec<NnResult> {
    queries.par_iter().map(|&q| brute_force_nearest(points, q)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-2.0..2.0)))
            .collect()
    }

    #[test]
    fn empty_tree_reports_infinity() {
        let t = KdTree::build(&[]);
        let r = t.nearest(Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(r.distance, f64::INFINITY);
        assert_eq!(r.index, None);
        assert!(t.nearest_batch(&[]).is_empty());
    }

    #[test]
    fn single_point() {
        let t = KdTree::build(&[Vec3::new(1.0, 1.0, 1.0)]);
        for q in [Vec3::ZERO, Vec3::splat(100.0), Vec3::new(-4.0, 2.0, 9.0)] {
            let r = t.nearest(q);
            assert_eq!(r.index, Some(0));
            assert_eq!(r.distance, q.distance(Vec3::splat(1.0)));
        }
    }

    #[test]
    fn two_points() {
        let t = KdTree::build(&[Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)]);
        assert_eq!(t.nearest(Vec3::new(4.0, 0.0, 0.0)), NnResult { distance: 4.0, index: Some(0) });
        assert_eq!(t.nearest(Vec3::ZERO).distance, 0.0);
    }

    #[test]
    fn ties_pick_lowest_index() {
        // duplicates and an equidistant ring around the query
        let mut pts = vec![Vec3::new(5.0, 5.0, 5.0); 3];
        for k in 0..100 {
            let a = k as f64 * std::f64::consts::TAU / 100.0;
            pts.push(Vec3::new(a.cos(), a.sin(), 0.0) * 2.0);
        }
        pts.push(Vec3::new(2.0, 0.0, 0.0));
        let t = KdTree::with_leaf_size(&pts, 2);
        assert_eq!(t.nearest(Vec3::new(5.0, 5.0, 5.0)).index, Some(0));
        let q = Vec3::new(4.0, 0.0, 0.0);
        assert_eq!(t.nearest(q), brute_force_nearest(&pts, q));
    }

    #[test]
    fn matches_brute_force_across_leaf_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = cloud(&mut rng, 3000);
        let queries = cloud(&mut rng, 500);
        for leaf in [1, 4, 32, 100] {
            let t = KdTree::with_leaf_size(&pts, leaf);
            for &q in &queries {
                assert_eq!(t.nearest(q), brute_force_nearest(&pts, q));
            }
        }
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let pts = cloud(&mut rng, 2000);
        let queries = cloud(&mut rng, 5000);
        let t = KdTree::build(&pts);
        let batch = t.nearest_batch(&queries);
        for (q, r) in queries.iter().zip(&batch) {
            assert_eq!(*r, t.nearest(*q));
        }
        assert_eq!(t.nearest_batch(&queries[..1]), vec![t.nearest(queries[0])]);
    }

    #[test]
    fn self_query_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let pts = cloud(&mut rng, 100_000);
        let t = KdTree::build(&pts);
        assert_eq!(t.len(), pts.len());
        let res = t.nearest_batch(&pts);
        assert!(res.iter().all(|r| r.distance == 0.0));
    }
}
