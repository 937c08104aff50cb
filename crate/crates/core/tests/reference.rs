use blindspot::presets::desk_reference;
use blindspot::reference::{timestep_rng, ReferenceSampler, ReferenceSamplerConfig, ShellVolume};
use blindspot::scene::{Actor, Trajectory, TriangleMesh, WorldSnapshot};
use blindspot::{Aabb, RigidTransform, Vec3};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ego_box() -> Aabb {
    TriangleMesh::hatchback().bounds()
}

fn ego() -> Actor {
    Actor::new("ego", TriangleMesh::hatchback(), Trajectory::Static(RigidTransform::IDENTITY), true)
}

fn ground() -> Actor {
    Actor::new(
        "ground",
        TriangleMesh::ground_plane(500.0).unwrap(),
        Trajectory::Static(RigidTransform::IDENTITY),
        false,
    )
}

/// Length of `[a, b] ∩ [c, d]`.
fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Chi-square p-value of the samples' marginal along `axis` against the analytic
/// density of a uniform distribution over outer box minus inner box.
fn marginal_p_value(samples: &[Vec3], outer: &Aabb, inner: &Aabb, axis: usize, bins: usize) -> f64 {
    let get = |v: Vec3| v.to_array()[axis];
    let o = [0, 1, 2].map(|k| (outer.min.to_array()[k], outer.max.to_array()[k]));
    let i = [0, 1, 2].map(|k| (inner.min.to_array()[k], inner.max.to_array()[k]));
    let others: Vec<usize> = (0..3).filter(|&k| k != axis).collect();
    let outer_area = others.iter().map(|&k| o[k].1 - o[k].0).product::<f64>();
    let inner_area = others.iter().map(|&k| i[k].1 - i[k].0).product::<f64>();
    let volume = outer_area * (o[axis].1 - o[axis].0) - inner_area * (i[axis].1 - i[axis].0);

    let (lo, hi) = o[axis];
    let width = (hi - lo) / bins as f64;
    let mut observed = vec![0.0; bins];
    for &s in samples {
        let b = (((get(s) - lo) / width) as usize).min(bins - 1);
        observed[b] += 1.0;
    }
    let n = samples.len() as f64;
    let mut chi2 = 0.0;
    for (b, obs) in observed.iter().enumerate() {
        let a = lo + b as f64 * width;
        let mass = outer_area * width - inner_area * overlap(a, a + width, i[axis].0, i[axis].1);
        let expected = n * mass / volume;
        chi2 += (obs - expected).powi(2) / expected;
    }
    1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2)
}

#[test]
fn shell_matches_margins_and_excludes_ego() {
    let b = ego_box();
    let shell = ShellVolume::new(b, 0.5, 0.5);
    let expected = Aabb {
        min: Vec3::new(b.min.x - 0.5, b.min.y - 0.5, b.min.z),
        max: Vec3::new(b.max.x + 0.5, b.max.y + 0.5, b.max.z + 0.5),
    };
    assert_eq!(shell.outer, expected);
    let mut rng = timestep_rng(11, 0);
    for _ in 0..100_000 {
        let p = shell.sample(&mut rng);
        assert!(expected.contains(p));
        assert!(!b.contains(p));
    }
}

#[test]
fn shell_marginals_are_uniform_over_the_shell() {
    let b = ego_box();
    let shell = ShellVolume::new(b, 0.5, 0.5);
    let mut rng = timestep_rng(12, 3);
    let samples: Vec<Vec3> = (0..100_000).map(|_| shell.sample(&mut rng)).collect();
    for axis in 0..3 {
        let p = marginal_p_value(&samples, &shell.outer, &shell.inner, axis, 40);
        assert!(p > 0.01, "axis {axis}: p = {p}");
    }
}

#[test]
fn reference_points_lie_on_non_ego_geometry() {
    let wall = Actor::new(
        "wall",
        TriangleMesh::cuboid(Vec3::new(8.0, 0.0, 1.5), Vec3::new(0.5, 6.0, 3.0)).unwrap(),
        Trajectory::Static(RigidTransform::IDENTITY),
        false,
    );
    let actors = [ego(), ground(), wall];
    let cfg = ReferenceSamplerConfig { channels: 32, points_per_channel: 64, seed: 4, ..Default::default() };
    let sampler = ReferenceSampler::new(cfg, ego_box()).unwrap();
    for t in 0..8 {
        let world = WorldSnapshot::build(&actors, t).unwrap();
        let cloud = sampler.scan(&world, &RigidTransform::IDENTITY);
        assert!(!cloud.is_empty());
        for &p in cloud.points() {
            let d = world.distance_to_surface(p, |a| !world.is_ego(a));
            assert!(d < 1e-5, "timestep {t}: point {p:?} is {d} m from non-ego geometry");
        }
    }
}

#[test]
fn ego_alone_yields_empty_reference() {
    let sampler = ReferenceSampler::new(desk_reference(), ego_box()).unwrap();
    let world = WorldSnapshot::build(&[ego()], 0).unwrap();
    assert!(sampler.scan(&world, &RigidTransform::IDENTITY).is_empty());
}

/// Horizontal distance from `(x, y)` to the ego footprint rectangle.
fn footprint_distance(b: &Aabb, x: f64, y: f64) -> f64 {
    let dx = (b.min.x - x).max(x - b.max.x).max(0.0);
    let dy = (b.min.y - y).max(y - b.max.y).max(0.0);
    dx.hypot(dy)
}

#[test]
fn reference_covers_ground_ring_around_ego() {
    let b = ego_box();
    let sampler = ReferenceSampler::new(ReferenceSamplerConfig { seed: 9, ..desk_reference() }, b).unwrap();
    let actors = [ego(), ground()];
    let (half, cell) = (15.0, 0.5);
    let n = (2.0 * half / cell) as usize;
    let mut hit = vec![false; n * n];
    for t in 0..512 {
        let world = WorldSnapshot::build(&actors, t).unwrap();
        for p in sampler.scan(&world, &RigidTransform::IDENTITY).points() {
            assert!(p.z.abs() < 1e-6);
            if p.x.abs() < half && p.y.abs() < half {
                hit[((p.x + half) / cell) as usize * n + ((p.y + half) / cell) as usize] = true;
            }
        }
    }
    let (mut ring, mut covered) = (0, 0);
    for ix in 0..n {
        for iy in 0..n {
            let cx = -half + (ix as f64 + 0.5) * cell;
            let cy = -half + (iy as f64 + 0.5) * cell;
            let d = footprint_distance(&b, cx, cy);
            if (2.0..=10.0).contains(&d) {
                ring += 1;
                covered += hit[ix * n + iy] as usize;
            }
        }
    }
    let frac = covered as f64 / ring as f64;
    assert!(frac >= 0.99, "{covered} of {ring} ring cells observed ({frac:.4})");
}
