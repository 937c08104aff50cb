//! Binned-SAH bounding volume hierarchy over world-space triangles.

use crate::geometry::{Aabb, Vec3};

use super::ray::RayPrecomp;

const MAX_LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 12;
/// Below this depth splits switch to object medians so traversal stacks stay bounded.
const MEDIAN_DEPTH: usize = 40;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
struct Node {
    min: [f64; 3],
    max: [f64; 3],
    /// First primitive slot for leaves, left child index for inner nodes.
    start: u32,
    /// Primitive count; zero marks an inner node whose children are `start` and `start + 1`.
    count: u32,
}

/// Hierarchy over triangle indices. Triangles are referenced, not owned.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices in leaf order.
    order: Vec<u32>,
}

fn pad(b: Aabb) -> ([f64; 3], [f64; 3]) {
    let mut min = b.min.to_array();
    let mut max = b.max.to_array();
    for k in 0..3 {
        let slack = 1e-9 * (1.0 + min[k].abs().max(max[k].abs()));
        min[k] -= slack;
        max[k] += slack;
    }
    (min, max)
}

impl Bvh {
    pub fn build(triangles: &[[Vec3; 3]]) -> Bvh {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len().max(1));
        if triangles.is_empty() {
            return Bvh { nodes, order };
        }
        let bounds: Vec<Aabb> = triangles.iter().map(|t| Aabb::from_points(t.iter().copied())).collect();
        let centroids: Vec<Vec3> = bounds.iter().map(|b| b.center()).collect();
        nodes.push(Node { min: [0.0; 3], max: [0.0; 3], start: 0, count: 0 });
        let mut stack = vec![(0usize, 0usize, triangles.len(), 0usize)];
        while let Some((node, lo, hi, depth)) = stack.pop() {
            let slice = &mut order[lo..hi];
            let nb = slice.iter().fold(Aabb::EMPTY, |b, &i| b.union(bounds[i as usize]));
            let (min, max) = pad(nb);
            nodes[node].min = min;
            nodes[node].max = max;
            let split = if slice.len() <= MAX_LEAF_SIZE {
                None
            } else if depth >= MEDIAN_DEPTH {
                Some(median_split(slice, &centroids))
            } else {
                sah_split(slice, &bounds, &centroids, nb)
            };
            match split {
                None => {
                    nodes[node].start = lo as u32;
                    nodes[node].count = (hi - lo) as u32;
                }
                Some(mid) => {
                    let left = nodes.len();
                    nodes.push(Node { min: [0.0; 3], max: [0.0; 3], start: 0, count: 0 });
                    nodes.push(Node { min: [0.0; 3], max: [0.0; 3], start: 0, count: 0 });
                    nodes[node].start = left as u32;
                    nodes[node].count = 0;
                    stack.push((left, lo, lo + mid, depth + 1));
                    stack.push((left + 1, lo + mid, hi, depth + 1));
                }
            }
        }
        Bvh { nodes, order }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nearest hit in `(t_min, t_max]`, ties resolved towards the lower triangle index.
    /// `tri_at(i)` returns the vertices of triangle `i`.
    #[inline]
    pub(crate) fn closest_hit<F>(&self, ray: &RayPrecomp, t_min: f64, t_max: f64, tri_at: F) -> Option<(f64, u32)>
    where
        F: Fn(u32) -> [[f64; 3]; 3],
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(f64, u32)> = None;
        let mut limit = t_max;
        let mut stack = [0u32; 128];
        let mut sp = 0usize;
        let mut current = 0u32;
        loop {
            let node = &self.nodes[current as usize];
            if node.count > 0 {
                let first = node.start as usize;
                for &tri in &self.order[first..first + node.count as usize] {
                    if let Some(t) = ray.intersect(&tri_at(tri), t_min, limit) {
                        let better = match best {
                            None => true,
                            Some((bt, bi)) => t < bt || (t == bt && tri < bi),
                        };
                        if better {
                            best = Some((t, tri));
                            limit = t;
                        }
                    }
                }
            } else {
                let l = node.start;
                let r = l + 1;
                let tl = slab(ray, &self.nodes[l as usize], limit);
                let tr = slab(ray, &self.nodes[r as usize], limit);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        let (near, far) = if a <= b { (l, r) } else { (r, l) };
                        stack[sp] = far;
                        sp += 1;
                        current = near;
                        continue;
                    }
                    (Some(_), None) => {
                        current = l;
                        continue;
                    }
                    (None, Some(_)) => {
                        current = r;
                        continue;
                    }
                    (None, None) => {}
                }
            }
            // pop, skipping nodes whose entry lies beyond the current best
            loop {
                if sp == 0 {
                    return best;
                }
                sp -= 1;
                let n = stack[sp];
                if slab(ray, &self.nodes[n as usize], limit).is_some() {
                    current = n;
                    break;
                }
            }
        }
    }

    #[cfg(test)]
    fn check_invariants(&self, triangles: &[[Vec3; 3]]) {
        let mut seen = vec![0u32; triangles.len()];
        for n in &self.nodes {
            if n.count > 0 {
                for &t in &self.order[n.start as usize..(n.start + n.count) as usize] {
                    seen[t as usize] += 1;
                    for v in triangles[t as usize] {
                        for k in 0..3 {
                            assert!(v[k] >= n.min[k] && v[k] <= n.max[k]);
                        }
                    }
                }
            } else {
                for c in [n.start, n.start + 1] {
                    let ch = &self.nodes[c as usize];
                    for k in 0..3 {
                        assert!(ch.min[k] >= n.min[k] && ch.max[k] <= n.max[k], "child box escapes parent");
                    }
                }
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "every triangle referenced exactly once");
    }
}

/// Entry parameter of the ray into the node box if the overlap is non-empty
/// and starts no later than `limit`.
#[inline]
fn slab(ray: &RayPrecomp, node: &Node, limit: f64) -> Option<f64> {
    let mut t0 = 0.0f64;
    let mut t1 = limit;
    for k in 0..3 {
        let a = (node.min[k] - ray.origin[k]) * ray.inv_dir[k];
        let b = (node.max[k] - ray.origin[k]) * ray.inv_dir[k];
        // NaN means a parallel ray lying on the slab plane: treat the axis as unconstrained
        let (lo, hi) = if a <= b {
            (a, b)
        } else if b < a {
            (b, a)
        } else {
            continue;
        };
        if lo > t0 {
            t0 = lo;
        }
        if hi < t1 {
            t1 = hi;
        }
    }
    (t0 <= t1).then_some(t0)
}

fn median_split(slice: &mut [u32], centroids: &[Vec3]) -> usize {
    let cb = Aabb::from_points(slice.iter().map(|&i| centroids[i as usize]));
    let axis = cb.largest_axis();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis]).then(a.cmp(&b))
    });
    mid
}

/// Chooses a split position within `slice` by binned SAH, partitioning in place.
/// Falls back to an object median when centroids coincide.
fn sah_split(slice: &mut [u32], bounds: &[Aabb], centroids: &[Vec3], node_bounds: Aabb) -> Option<usize> {
    let cb = Aabb::from_points(slice.iter().map(|&i| centroids[i as usize]));
    let axis = cb.largest_axis();
    let lo = cb.min[axis];
    let extent = cb.max[axis] - lo;
    let n = slice.len();
    if !(extent > 0.0) {
        slice.sort_unstable();
        return Some(n / 2);
    }
    let scale = SAH_BINS as f64 / extent;
    let bin_of = |i: u32| (((centroids[i as usize][axis] - lo) * scale) as usize).min(SAH_BINS - 1);
    let mut bin_bounds = [Aabb::EMPTY; SAH_BINS];
    let mut bin_counts = [0usize; SAH_BINS];
    for &i in slice.iter() {
        let b = bin_of(i);
        bin_counts[b] += 1;
        bin_bounds[b] = bin_bounds[b].union(bounds[i as usize]);
    }
    let mut right_area = [0.0; SAH_BINS];
    let mut acc = Aabb::EMPTY;
    for b in (1..SAH_BINS).rev() {
        acc = acc.union(bin_bounds[b]);
        right_area[b] = acc.surface_area();
    }
    let mut best_cost = f64::INFINITY;
    let mut best_bin = 0;
    let mut left = Aabb::EMPTY;
    let mut left_count = 0;
    for b in 1..SAH_BINS {
        left = left.union(bin_bounds[b - 1]);
        left_count += bin_counts[b - 1];
        let right_count = n - left_count;
        if left_count == 0 || right_count == 0 {
            continue;
        }
        let cost = left.surface_area() * left_count as f64 + right_area[b] * right_count as f64;
        if cost < best_cost {
            best_cost = cost;
            best_bin = b;
        }
    }
    let parent_area = node_bounds.surface_area().max(f64::MIN_POSITIVE);
    let split_cost = TRAVERSAL_COST + INTERSECT_COST * best_cost / parent_area;
    if best_bin == 0 || (split_cost >= INTERSECT_COST * n as f64 && n <= 16) {
        return None;
    }
    // stable partition keeps construction deterministic
    let (left_part, right_part): (Vec<u32>, Vec<u32>) = slice.iter().partition(|&&i| bin_of(i) < best_bin);
    let mid = left_part.len();
    slice[..mid].copy_from_slice(&left_part);
    slice[mid..].copy_from_slice(&right_part);
    Some(mid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn invariants_on_random_soup() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [0usize, 1, 3, 5, 17, 300, 5000] {
            let tris: Vec<[Vec3; 3]> = (0..n)
                .map(|_| {
                    let c = Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(0.0..5.0));
                    [0, 1, 2].map(|_| {
                        c + Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                    })
                })
                .collect();
            let bvh = Bvh::build(&tris);
            bvh.check_invariants(&tris);
        }
    }
}
