use std::collections::BTreeMap;

use blindspot::coverage::{
    summarize, Aggregation, Averaging, CoverageGrid, GridSpec, Probe, Roi, RoiSummary, VerticalSlab,
};
use blindspot::io::{compare_reports, CoverageReport, RunMetadata, Winner};
use blindspot::Vec3;
use proptest::prelude::*;

const SPEC: (f64, f64, f64, f64, f64) = (-4.0, 6.0, -3.0, 3.0, 0.5);

fn spec() -> GridSpec {
    GridSpec::new(SPEC.0, SPEC.1, SPEC.2, SPEC.3, SPEC.4).unwrap()
}

fn probe() -> impl Strategy<Value = Probe> {
    // a few probes land outside the grid or the slab; radii include exact thresholds,
    // infinities and values above the grid diagonal
    let radius = prop_oneof![
        4 => 0.0..3.0f64,
        1 => Just(0.4),
        1 => Just(f64::INFINITY),
        1 => 10.0..40.0f64,
    ];
    (-5.0..7.0f64, -4.0..4.0f64, -0.8..0.8f64, radius)
        .prop_map(|(x, y, z, r)| Probe { point: Vec3::new(x, y, z), radius: r })
}

fn timesteps() -> impl Strategy<Value = Vec<Vec<Probe>>> {
    prop::collection::vec(prop::collection::vec(probe(), 0..60), 1..8)
}

fn run(steps: &[Vec<Probe>], r_thresh: f64) -> CoverageGrid {
    let mut g = CoverageGrid::new(spec(), VerticalSlab::ground()).unwrap();
    for s in steps {
        g.accumulate(s, r_thresh);
    }
    g
}

/// Cell of a probe by direct arithmetic, independent of the grid code.
fn oracle_cell(p: Vec3) -> Option<usize> {
    if !(p.z >= -0.5 && p.z < 0.5) {
        return None;
    }
    let ny = ((SPEC.3 - SPEC.2) / SPEC.4).ceil() as usize;
    let nx = ((SPEC.1 - SPEC.0) / SPEC.4).ceil() as usize;
    if !(p.x >= SPEC.0 && p.x < SPEC.1 && p.y >= SPEC.2 && p.y < SPEC.3) {
        return None;
    }
    let ix = (((p.x - SPEC.0) / SPEC.4).floor() as usize).min(nx - 1);
    let iy = (((p.y - SPEC.2) / SPEC.4).floor() as usize).min(ny - 1);
    Some(ix * ny + iy)
}

/// Mean over timesteps of per-timestep means, as a literal double loop.
fn nested_oracle(steps: &[Vec<Probe>], r_thresh: f64, cap: f64) -> BTreeMap<usize, (f64, f64)> {
    let mut acc: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for step in steps {
        let mut per: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
        for p in step {
            let Some(c) = oracle_cell(p.point) else { continue };
            let e = per.entry(c).or_insert((0.0, 0.0, 0));
            e.0 += p.radius.min(cap);
            e.1 += if p.radius <= r_thresh { 1.0 } else { 0.0 };
            e.2 += 1;
        }
        for (c, (sr, sp, n)) in per {
            let e = acc.entry(c).or_insert((0.0, 0.0, 0));
            e.0 += sr / n as f64;
            e.1 += sp / n as f64;
            e.2 += 1;
        }
    }
    acc.into_iter().map(|(c, (r, p, k))| (c, (r / k as f64, p / k as f64))).collect()
}

fn report(name: &str, summaries: Vec<RoiSummary>) -> CoverageReport {
    CoverageReport {
        scenario: "s".into(),
        rig: name.into(),
        metadata: RunMetadata::default(),
        summaries,
        rasters: Vec::new(),
    }
}

fn summary(roi: &str, r: Option<f64>, p: Option<f64>) -> RoiSummary {
    RoiSummary {
        roi: roi.into(),
        mean_blind_spot_radius: r,
        mean_detection_probability: p,
        nonempty_cell_count: r.is_some() as usize,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn per_timestep_means_match_nested_loop(steps in timesteps(), r_thresh in 0.0..2.0f64) {
        let g = run(&steps, r_thresh);
        let out = g.finalize_with(Averaging::PerTimestep, Aggregation::Mean);
        let oracle = nested_oracle(&steps, r_thresh, spec().diagonal());
        for c in 0..spec().cell_count() {
            match oracle.get(&c) {
                Some(&(r, p)) => {
                    prop_assert_eq!(out.radius.values[c], Some(r));
                    prop_assert_eq!(out.probability.values[c], Some(p));
                }
                None => {
                    prop_assert_eq!(out.radius.values[c], None);
                    prop_assert_eq!(out.probability.values[c], None);
                }
            }
        }
    }

    #[test]
    fn pooled_means_match_flat_loop(steps in timesteps()) {
        let g = run(&steps, 0.4);
        let out = g.finalize();
        let cap = spec().diagonal();
        let mut acc: BTreeMap<usize, (f64, u64, u64)> = BTreeMap::new();
        let mut clamped = 0;
        for p in steps.iter().flatten() {
            let Some(c) = oracle_cell(p.point) else { continue };
            clamped += (p.radius > cap) as u64;
            let e = acc.entry(c).or_insert((0.0, 0, 0));
            e.0 += p.radius.min(cap);
            e.1 += (p.radius <= 0.4) as u64;
            e.2 += 1;
        }
        prop_assert_eq!(g.clamped_count(), clamped);
        for (c, (r, h, n)) in acc {
            prop_assert_eq!(out.radius.values[c], Some(r / n as f64));
            prop_assert_eq!(out.probability.values[c], Some(h as f64 / n as f64));
        }
    }

    #[test]
    fn larger_threshold_never_lowers_probability(steps in timesteps(), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = run(&steps, lo).finalize().probability;
        let p_hi = run(&steps, hi).finalize().probability;
        for (x, y) in p_lo.values.iter().zip(&p_hi.values) {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!(y >= x),
                (None, None) => {}
                _ => prop_assert!(false, "threshold changed which cells have data"),
            }
        }
    }

    #[test]
    fn summarize_matches_cell_loop(
        steps in timesteps(),
        x0 in -4.0..6.0f64, w in 0.0..10.0f64,
        y0 in -3.0..3.0f64, h in 0.0..6.0f64,
    ) {
        let roi = Roi {
            name: "r".into(),
            slab: "ground".into(),
            x_min: x0,
            x_max: (x0 + w).min(SPEC.1),
            y_min: y0,
            y_max: (y0 + h).min(SPEC.3),
        };
        let out = run(&steps, 0.4).finalize();
        let s = summarize(&out, &roi).unwrap();
        let spec = spec();
        let (mut sr, mut sp, mut n) = (0.0, 0.0, 0usize);
        for ix in 0..spec.nx() {
            for iy in 0..spec.ny() {
                let cx = SPEC.0 + (ix as f64 + 0.5) * SPEC.4;
                let cy = SPEC.2 + (iy as f64 + 0.5) * SPEC.4;
                if !(cx >= roi.x_min && cx < roi.x_max && cy >= roi.y_min && cy < roi.y_max) {
                    continue;
                }
                if let (Some(r), Some(p)) = (out.radius.get(ix, iy), out.probability.get(ix, iy)) {
                    sr += r;
                    sp += p;
                    n += 1;
                }
            }
        }
        prop_assert_eq!(s.nonempty_cell_count, n);
        if n == 0 {
            prop_assert!(s.mean_blind_spot_radius.is_none() && s.mean_detection_probability.is_none());
        } else {
            prop_assert!((s.mean_blind_spot_radius.unwrap() - sr / n as f64).abs() < 1e-12);
            prop_assert!((s.mean_detection_probability.unwrap() - sp / n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn comparison_matches_loop(vals in prop::collection::vec((0.0..5.0f64, 0.0..1.0f64, 0.0..5.0f64, 0.0..1.0f64), 1..6)) {
        let names: Vec<String> = (0..vals.len()).map(|i| format!("roi-{i}")).collect();
        let a = report("a", vals.iter().zip(&names).map(|(v, n)| summary(n, Some(v.0), Some(v.1))).collect());
        let b = report("b", vals.iter().zip(&names).map(|(v, n)| summary(n, Some(v.2), Some(v.3))).collect());
        let cmp = compare_reports(&a, &b).unwrap();
        prop_assert_eq!(cmp.rows.len(), vals.len());
        for (row, v) in cmp.rows.iter().zip(&vals) {
            prop_assert_eq!(row.blind_spot_radius.delta, Some(v.0 - v.2));
            prop_assert_eq!(row.detection_probability.delta, Some(v.1 - v.3));
            let radius_winner = if v.0 < v.2 { Winner::A } else if v.0 > v.2 { Winner::B } else { Winner::Tie };
            let prob_winner = if v.1 > v.3 { Winner::A } else if v.1 < v.3 { Winner::B } else { Winner::Tie };
            prop_assert_eq!(row.blind_spot_radius.winner, Some(radius_winner));
            prop_assert_eq!(row.detection_probability.winner, Some(prob_winner));
        }
    }
}

#[test]
fn max_aggregation_reports_largest_clamped_radius() {
    let mut g = CoverageGrid::new(spec(), VerticalSlab::ground()).unwrap();
    let at = |r| Probe { point: Vec3::new(0.1, 0.1, 0.0), radius: r };
    g.accumulate(&[at(0.2), at(1.5)], 0.4);
    g.accumulate(&[at(f64::INFINITY)], 0.4);
    let out = g.finalize_with(Averaging::Pooled, Aggregation::Max);
    let c = spec().cell_of(0.1, 0.1).unwrap();
    assert_eq!(out.radius.values[c], Some(spec().diagonal()));
    assert_eq!(out.probability.values[c], Some(1.0 / 3.0));
}

#[test]
fn mismatched_regions_are_rejected() {
    let a = report("a", vec![summary("x", Some(1.0), Some(0.5))]);
    let b = report("b", vec![summary("y", Some(1.0), Some(0.5))]);
    assert!(compare_reports(&a, &b).is_err());
}
