//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gated criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use linemerge::baselines::oto_incremental_merge;
use linemerge::evaluation::{
    detect_redundant_pairs, error_metric, map_quality, rasterize_segment, EvalParams, GridGeometry, LookupTable,
};
use linemerge::fusion::{merge_segments, satisfies_fusion_conditions};
use linemerge::mapper::{filter_by_weight, OriginalSegment};
use linemerge::pipeline::extract_keyframes;
use linemerge::scan_io::{write_segment_map, KeyframeParams, SegmentMapFile, Trajectory};
use linemerge::synth::{synthesize, DriftParams, SynthOutput, SynthParams, World};
use linemerge::{
    run_pipeline, FusionThresholds, GlobalMap, LineMapper, LineSegment, MergerKind, PipelineInput, PipelineOptions,
    Point, Pose2D,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> LineSegment {
    LineSegment::from_coords(x1, y1, x2, y2).unwrap()
}

fn loop_log() -> SynthOutput {
    synthesize(&World::loop_corridor(), &SynthParams::default()).unwrap()
}

fn run(out: &SynthOutput, merger: MergerKind, scans: usize, verify: bool) -> linemerge::PipelineOutput {
    let lc = out.loop_closure.expect("loop closes");
    let markers = [lc];
    let input = PipelineInput {
        scans: &out.scans[..scans.min(out.scans.len())],
        trajectory: &out.drifted,
        optimized: Some(&out.exact),
        adjust_at: if lc < scans { &markers } else { &[] },
    };
    let opts = PipelineOptions {
        merger,
        verify,
        ..Default::default()
    };
    run_pipeline(input, &opts).unwrap()
}

// ---- 1

fn oracle_norm_angle(mut a: f64) -> f64 {
    while a > PI {
        a -= 2.0 * PI;
    }
    while a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Gate decision written out from the raw endpoint coordinates.
fn oracle_fusion(m: [f64; 4], s: [f64; 4], theta_max: f64, d_max: f64, p_min: f64) -> bool {
    let [mx1, my1, mx2, my2] = m;
    let [sx1, sy1, sx2, sy2] = s;
    let theta_m = (my2 - my1).atan2(mx2 - mx1);
    let theta_s = (sy2 - sy1).atan2(sx2 - sx1);
    let c1 = oracle_norm_angle(theta_m - theta_s).abs() <= theta_max;

    let a = my1 - my2;
    let b = mx2 - mx1;
    let c = mx1 * my2 - mx2 * my1;
    let norm = (a * a + b * b).sqrt();
    let d1 = (a * sx1 + b * sy1 + c).abs() / norm;
    let d2 = (a * sx2 + b * sy2 + c).abs() / norm;
    let c2 = d1.max(d2) <= d_max;

    let len = b.hypot(a);
    let (ux, uy) = ((mx2 - mx1) / len, (my2 - my1) / len);
    let t1 = (sx1 - mx1) * ux + (sy1 - my1) * uy;
    let t2 = (sx2 - mx1) * ux + (sy2 - my1) * uy;
    let lo = t1.min(t2).max(0.0);
    let hi = t1.max(t2).min(len);
    let p = if hi > lo {
        let (ex1, ey1) = (mx1 + lo * ux, my1 + lo * uy);
        let (ex2, ey2) = (mx1 + hi * ux, my1 + hi * uy);
        ((ex1 - ex2).powi(2) + (ey1 - ey2).powi(2)).sqrt()
    } else {
        hi - lo
    };
    let c3 = p >= p_min;
    c1 && c2 && c3
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t0 = Instant::now();
    let mut accepted = 0;
    for k in 0..1000 {
        let t = if k % 2 == 0 { FusionThresholds::dense() } else { FusionThresholds::sparse() };
        let (x, y) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
        let h = rng.random_range(-PI..PI);
        let len = rng.random_range(0.3..5.0);
        let m = [x, y, x + len * h.cos(), y + len * h.sin()];
        // scan segment near the map segment so every gate gets exercised
        let hs = h + if rng.random_bool(0.1) { PI } else { 0.0 } + rng.random_range(-2.0..2.0) * t.theta_max;
        let along = rng.random_range(-len - 0.3..len + 0.3);
        let off = rng.random_range(-2.0..2.0) * t.d_max;
        let (cx, cy) = (x + along * h.cos() - off * h.sin(), y + along * h.sin() + off * h.cos());
        let ls = rng.random_range(0.2..3.0);
        let s = [cx, cy, cx + ls * hs.cos(), cy + ls * hs.sin()];
        let got = satisfies_fusion_conditions(&seg(m[0], m[1], m[2], m[3]), &seg(s[0], s[1], s[2], s[3]), &t);
        let want = oracle_fusion(m, s, t.theta_max, t.d_max, t.p_min);
        check(got == want, format!("pair {k} disagrees: {m:?} {s:?}"))?;
        accepted += usize::from(got);
    }
    let el = t0.elapsed();
    check(accepted > 50 && accepted < 950, format!("degenerate sample: {accepted} accepted"))?;
    check(el < Duration::from_secs(1), format!("took {el:?}"))?;
    Ok(format!("1000/1000 agree, {accepted} accepted, {el:.2?}"))
}

// ---- 2

fn random_merge_set(rng: &mut ChaCha8Rng, t: &FusionThresholds) -> Vec<LineSegment> {
    loop {
        let h = rng.random_range(-PI..PI);
        let (x, y) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let n = rng.random_range(2..=8);
        let set: Vec<LineSegment> = (0..n)
            .map(|_| {
                let hi = h + rng.random_range(-0.4..0.4) * t.theta_max;
                let off = rng.random_range(-0.4..0.4) * t.d_max;
                let a = rng.random_range(-1.0..0.5);
                let l = rng.random_range(0.5..2.0);
                let (sx, sy) = (x + a * h.cos() - off * h.sin(), y + a * h.sin() + off * h.cos());
                LineSegment::from_coords(sx, sy, sx + l * hi.cos(), sy + l * hi.sin())
                    .unwrap()
                    .with_weight(rng.random_range(1..=6))
            })
            .collect();
        let pairwise = set.iter().all(|a| set.iter().all(|b| satisfies_fusion_conditions(a, b, t)));
        if pairwise {
            return set;
        }
    }
}

fn max_delta(a: &LineSegment, b: &LineSegment) -> f64 {
    a.start().distance(b.start()).max(a.end().distance(b.end()))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = FusionThresholds::dense();
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..500 {
        let mut set = random_merge_set(&mut rng, &t);
        let base = merge_segments(&set).unwrap();
        let total: u32 = set.iter().map(LineSegment::weight).sum();
        check(base.weight() == total, format!("set {k}: weight {} != {total}", base.weight()))?;
        for _ in 0..4 {
            set.shuffle(&mut rng);
            let m = merge_segments(&set).unwrap();
            worst = worst.max(max_delta(&base, &m));
            check(m.weight() == total, format!("set {k}: weight changed under permutation"))?;
        }
        let scale = rng.random_range(2..=7);
        let scaled: Vec<_> = set.iter().map(|s| s.with_weight(s.weight() * scale)).collect();
        let m = merge_segments(&scaled).unwrap();
        worst = worst.max(max_delta(&base, &m));
        check(m.weight() == total * scale, format!("set {k}: scaled weight"))?;
    }
    let el = t0.elapsed();
    check(worst < 1e-9, format!("max coordinate delta {worst:e}"))?;
    check(el < Duration::from_secs(1), format!("took {el:?}"))?;
    Ok(format!("500 sets, max delta {worst:.1e}, {el:.2?}"))
}

// ---- 3

fn criterion_3() -> Outcome {
    let out = loop_log();
    let lc = out.loop_closure.ok_or("no loop closure")?;
    let t0 = Instant::now();
    let scans = &out.scans[..200];
    let frames = extract_keyframes(scans, &out.drifted, &KeyframeParams::default(), &Default::default())
        .map_err(|e| e.to_string())?;
    let mut mapper = LineMapper::new(FusionThresholds::dense()).with_verification(true);
    let mut inserted = 0usize;
    let mut last = 0usize;
    let mut adjusted = false;
    for (idx, segs) in &frames {
        let mut traj = &out.drifted;
        if *idx >= lc {
            if !adjusted {
                mapper.global_map_adjust(&out.exact, 0).map_err(|e| e.to_string())?;
                adjusted = true;
            }
            traj = &out.exact;
        }
        let pose = *traj.require(*idx).unwrap();
        mapper.incremental_merge(segs, *idx, &pose).map_err(|e| e.to_string())?;
        inserted += segs.len();
        mapper.check_invariants().map_err(|e| e.to_string())?;
        let map = mapper.map();
        check(map.last_index() >= last, format!("last index went back at scan {idx}"))?;
        last = map.last_index();
        check(
            mapper.store().total_originals() == inserted,
            format!("scan {idx}: {} originals stored, {inserted} inserted", mapper.store().total_originals()),
        )?;
        let weights: usize = map.segments().map(|s| s.weight() as usize).sum();
        check(weights == inserted, format!("scan {idx}: weights sum to {weights}"))?;
    }
    let el = t0.elapsed();
    check(adjusted, "closure not reached")?;
    check(el < Duration::from_secs(10), format!("took {el:?}"))?;
    Ok(format!(
        "{} frames, {inserted} originals, {} segments, {el:.2?}",
        frames.len(),
        mapper.map().len()
    ))
}

// ---- 4

fn map_bytes(map: &GlobalMap) -> Vec<u8> {
    let mut buf = Vec::new();
    write_segment_map(&SegmentMapFile::new(map.clone()), &mut buf).unwrap();
    buf
}

/// Center and heading means plus extreme projections, from scratch.
fn oracle_remerge(subset: &[OriginalSegment], traj: &Trajectory) -> (Point, Point, u32) {
    let globals: Vec<(Point, Point)> = subset
        .iter()
        .map(|o| {
            let p = traj.pose(o.pose_index).unwrap();
            let (c, s) = (p.theta.cos(), p.theta.sin());
            let tf = |q: Point| Point::new(p.x + c * q.x - s * q.y, p.y + s * q.x + c * q.y);
            (tf(o.segment.start()), tf(o.segment.end()))
        })
        .collect();
    let n = globals.len() as f64;
    let (a0, b0) = globals[0];
    let h0 = (b0.y - a0.y).atan2(b0.x - a0.x);
    let (mut cx, mut cy, mut dh) = (0.0, 0.0, 0.0);
    for (a, b) in &globals {
        cx += (a.x + b.x) / 2.0;
        cy += (a.y + b.y) / 2.0;
        dh += oracle_norm_angle((b.y - a.y).atan2(b.x - a.x) - h0);
    }
    let (cx, cy, h) = (cx / n, cy / n, h0 + dh / n);
    let (ux, uy) = (h.cos(), h.sin());
    let ts: Vec<f64> = globals
        .iter()
        .flat_map(|(a, b)| [*a, *b])
        .map(|p| (p.x - cx) * ux + (p.y - cy) * uy)
        .collect();
    let lo = ts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (
        Point::new(cx + lo * ux, cy + lo * uy),
        Point::new(cx + hi * ux, cy + hi * uy),
        subset.len() as u32,
    )
}

fn criterion_4() -> Outcome {
    let out = loop_log();
    // built on drifted poses, never adjusted
    let input = PipelineInput {
        scans: &out.scans,
        trajectory: &out.drifted,
        optimized: None,
        adjust_at: &[],
    };
    let built = run_pipeline(input, &PipelineOptions::default()).unwrap().mapper;

    let mut files = Vec::new();
    let mut adjusted = Vec::new();
    for workers in [1, 2, 8] {
        let mut m = built.clone();
        m.global_map_adjust(&out.exact, workers).map_err(|e| e.to_string())?;
        files.push(map_bytes(m.map()));
        adjusted.push(m);
    }
    check(files.windows(2).all(|w| w[0] == w[1]), "map files differ across worker counts")?;
    let adj = &adjusted[0];

    let mut worst = 0.0f64;
    for (idx, subset) in adj.store().iter() {
        let (a, b, w) = oracle_remerge(subset, &out.exact);
        let s = adj.map().get(idx).unwrap();
        check(s.weight() == w, format!("segment {idx} weight"))?;
        worst = worst.max(s.start().distance(a).max(s.end().distance(b)));
    }
    check(worst < 1e-9, format!("oracle delta {worst:e}"))?;

    // adjusting with the poses the map already reflects changes nothing
    let mut again = adj.clone();
    again.global_map_adjust(&out.exact, 2).map_err(|e| e.to_string())?;
    let mut identity = 0.0f64;
    for (i, s) in adj.map().iter() {
        identity = identity.max(max_delta(s, again.map().get(i).unwrap()));
    }
    check(identity < 1e-9, format!("identity delta {identity:e}"))?;

    // a map merged from exact poses re-adjusted with those same poses
    let exact_run = run_pipeline(
        PipelineInput {
            trajectory: &out.exact,
            ..input
        },
        &PipelineOptions::default(),
    )
    .unwrap()
    .mapper;
    let mut re = exact_run.clone();
    re.global_map_adjust(&out.exact, 0).map_err(|e| e.to_string())?;
    let mut incremental = 0.0f64;
    for (i, s) in exact_run.map().iter() {
        incremental = incremental.max(max_delta(s, re.map().get(i).unwrap()));
    }
    Ok(format!(
        "{} subsets, identical files for 1/2/8 workers, oracle delta {worst:.1e}, identity delta {identity:.1e} \
         (incremental-vs-batch endpoint spread {incremental:.1e} m, not gated)",
        adj.store().len()
    ))
}

// ---- 5 and 6

fn exported(out: &linemerge::PipelineOutput) -> GlobalMap {
    filter_by_weight(out.mapper.map(), 5)
}

fn criterion_5() -> Outcome {
    let out = loop_log();
    let cae = exported(&run(&out, MergerKind::Cae, usize::MAX, false));
    let oto = exported(&run(&out, MergerKind::Oto, usize::MAX, false));
    let params = EvalParams::default();
    let t = FusionThresholds::dense();
    let rc = detect_redundant_pairs(&cae, &t, &params.grid(), &params);
    let ro = detect_redundant_pairs(&oto, &t, &params.grid(), &params);
    let detail = format!(
        "CAE {} segments / {} pairs, OTO {} segments / {} pairs",
        cae.len(),
        rc.pairs.len(),
        oto.len(),
        ro.pairs.len()
    );
    check(cae.len() < oto.len(), detail.clone())?;
    check(!ro.pairs.is_empty() && rc.pairs.is_empty(), detail.clone())?;
    Ok(detail)
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let out = loop_log();
    let cae = exported(&run(&out, MergerKind::Cae, usize::MAX, false));
    let o2to = exported(&run(&out, MergerKind::O2to, usize::MAX, false));
    let t = FusionThresholds::dense();
    let mut rows = Vec::new();
    for k in 1..=10 {
        let params = EvalParams {
            resolution: f64::from(k) * 0.01,
            ..Default::default()
        };
        let table = LookupTable::build(&out.scans, &out.exact, params.grid(), params.sigma).unwrap();
        let qc = map_quality(&cae, &table, &t, &params).unwrap().q;
        let qo = map_quality(&o2to, &table, &t, &params).unwrap().q;
        check(qc > qo, format!("resolution {:.2}: CAE {qc:.4} <= O2TO {qo:.4}", params.resolution))?;
        rows.push(format!("{:.2}:{qc:.3}>{qo:.3}", params.resolution));
    }
    let el = t0.elapsed();
    check(el < Duration::from_secs(60), format!("took {el:?}"))?;
    Ok(format!("{} ({el:.1?})", rows.join(" ")))
}

// ---- 7

fn criterion_7() -> Outcome {
    let walls = World::square_room().walls;
    let params = EvalParams {
        lambda: 1.0,
        ..Default::default()
    };
    let grid = params.grid();
    // dense noiseless samples along the map itself
    let points: Vec<Point> = walls
        .iter()
        .flat_map(|w| {
            let n = (w.length() / 0.002).ceil() as usize;
            (0..=n).map(move |i| w.start() + w.delta() * (i as f64 / n as f64))
        })
        .collect();
    let table = LookupTable::from_points(points, grid, params.sigma).unwrap();
    let t = FusionThresholds::dense();

    let perfect = GlobalMap::from_segments(walls.iter().copied().enumerate(), None).unwrap();
    let q = map_quality(&perfect, &table, &t, &params).unwrap().q;
    check((q - 1.0).abs() <= 0.02, format!("perfect map q = {q}"))?;

    let doubled = GlobalMap::from_segments(walls.iter().chain(walls.iter()).copied().enumerate(), None).unwrap();
    let qd = map_quality(&doubled, &table, &t, &params).unwrap().q;
    let (mut sum, mut n) = (0.0, 0usize);
    for w in walls.iter().chain(walls.iter()) {
        for p in rasterize_segment(w, &grid, params.angle_bin_deg) {
            sum += table.value(p.cell);
            n += 1;
        }
    }
    let mean = sum / n as f64;
    check((qd + mean).abs() <= 1e-9, format!("duplicated q = {qd}, mean pixel score {mean}"))?;

    // axis-aligned duplicates observed from the identity pose
    let id = Pose2D::identity();
    let traj = Trajectory::from_poses((0..4).map(|i| (i, id)).collect()).unwrap();
    let mut mapper = LineMapper::new(t);
    let scan = [seg(0.0, 0.0, 6.0, 0.0), seg(6.0, 0.5, 6.0, 5.0), seg(5.0, 6.0, 0.0, 6.0)];
    for i in 0..4 {
        mapper.incremental_merge(&scan, i, &id).unwrap();
    }
    let e = error_metric(mapper.map(), mapper.store(), &traj).unwrap();
    check(e.e == 0.0 && e.originals == 12, format!("error metric {} over {}", e.e, e.originals))?;
    Ok(format!("perfect q = {q:.4}, duplicated q = {qd:.6} vs -{mean:.6}, e = {}", e.e))
}

// ---- 8

fn criterion_8() -> Outcome {
    let grid = GridGeometry::new(0.5);
    let sigma = 0.5;
    let mut t = LookupTable::new(grid, sigma);
    t.add_point(grid.cell_center((0, 0)));
    check(t.value((0, 0)) == 1.0, format!("center value {}", t.value((0, 0))))?;
    // cell (2, 0) has its center exactly 1.0 m = 2σ away
    let far = t.value((2, 0));
    check((far - (-2.0f64).exp()).abs() <= 1e-12, format!("2σ value {far}"))?;
    check(t.value((3, 0)) == 0.0, "beyond 2σ is not smeared")?;

    let kernel = |p: Point, c: Point| (-(p.distance(c).powi(2)) / (2.0 * sigma * sigma)).exp();
    let cases: [&[Point]; 3] = [
        // two points in one cell
        &[Point::new(0.1, 0.1), Point::new(0.3, 0.2)],
        // overlapping footprints from neighbouring cells
        &[Point::new(0.25, 0.25), Point::new(0.9, 0.4), Point::new(-0.3, 0.6)],
        // same point twice plus a far one
        &[Point::new(1.1, -0.7), Point::new(1.1, -0.7), Point::new(-1.4, 0.2)],
    ];
    for (k, pts) in cases.iter().enumerate() {
        let table = LookupTable::from_points(pts.iter().copied(), grid, sigma).unwrap();
        let mut rev = LookupTable::new(grid, sigma);
        for p in pts.iter().rev() {
            rev.add_point(*p);
        }
        for cx in -6..=6 {
            for cy in -6..=6 {
                let c = grid.cell_center((cx, cy));
                let want = pts
                    .iter()
                    .filter(|p| p.distance(c) <= 2.0 * sigma)
                    .map(|p| kernel(*p, c))
                    .fold(0.0, f64::max);
                let got = table.value((cx, cy));
                check((got - want).abs() <= 1e-12, format!("case {k} cell ({cx},{cy}): {got} vs {want}"))?;
                check(rev.value((cx, cy)) == got, format!("case {k}: insertion order matters"))?;
            }
        }
    }
    Ok("center 1.0, 2σ exp(-2), 3 max cases".into())
}

// ---- 9

fn criterion_9() -> Outcome {
    let room = World::square_room();
    let mut waypoints = Vec::new();
    for _ in 0..20 {
        waypoints.extend_from_slice(&room.waypoints);
    }
    waypoints.push(room.waypoints[0]);
    let world = World::new(room.walls.clone(), waypoints).unwrap();
    let params = SynthParams {
        drift: DriftParams::none(),
        ..Default::default()
    };
    let out = synthesize(&world, &params).unwrap();
    check(out.scans.len() >= 1000, format!("only {} scans", out.scans.len()))?;
    let scans = &out.scans[..1000];
    let frames = extract_keyframes(scans, &out.exact, &KeyframeParams::all(), &Default::default()).unwrap();
    let total_segs: usize = frames.iter().map(|f| f.1.len()).sum();
    let per_scan = total_segs as f64 / frames.len() as f64;
    check(per_scan >= 3.0, format!("{per_scan:.2} segments per scan"))?;

    let mut cae = LineMapper::new(FusionThresholds::dense());
    let mut oto = LineMapper::new(FusionThresholds::dense());
    let (mut t_cae, mut t_oto) = (Duration::ZERO, Duration::ZERO);
    for (idx, segs) in &frames {
        let pose = *out.exact.require(*idx).unwrap();
        let t0 = Instant::now();
        cae.incremental_merge(segs, *idx, &pose).unwrap();
        t_cae += t0.elapsed();
        let t0 = Instant::now();
        oto_incremental_merge(&mut oto, segs, *idx, &pose).unwrap();
        t_oto += t0.elapsed();
    }
    let mean = t_cae / frames.len() as u32;
    check(mean < Duration::from_millis(1), format!("mean per frame {mean:?}"))?;
    check(t_cae < Duration::from_millis(500), format!("total {t_cae:?}"))?;
    Ok(format!(
        "1000 frames, {per_scan:.2} segments/scan, mean {mean:.2?}, total {t_cae:.2?} (OTO total {t_oto:.2?})"
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fusion gates match brute-force oracle", criterion_1),
        ("merge permutation, weight and scale properties", criterion_2),
        ("mapper invariants over 200-scan loop replay", criterion_3),
        ("parallel adjustment determinism and re-merge oracle", criterion_4),
        ("one-to-many beats one-to-one on the loop corridor", criterion_5),
        ("quality ordering across cell sizes 0.01-0.10 m", criterion_6),
        ("metric closed forms", criterion_7),
        ("lookup-table kernel", criterion_8),
        ("per-frame runtime envelope", criterion_9),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                println!("FAIL {:>2} {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    println!("SKIP 10 dataset smoke: needs an external log and SLAM poses");
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
