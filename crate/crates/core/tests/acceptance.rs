//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use hydroblow::characteristics::{time_at_amplitude, trace_reduced_characteristic_with, TraceOptions, PATH_TOLERANCE};
use hydroblow::transform::DEFAULT_Y_LIST;
use hydroblow::{
    build_grid, check_convexity_lemma, fuzz_convexity_lemma, galilean_transform_onto, hydrostatic_residual,
    make_initial_profile, simulate, trace_reduced_characteristic, verify_characteristic_ode, Axis, Field2D,
    GalileanShift, Profile, ProfileFamily, SimConfig, SimResult,
};

type Outcome = Result<String, String>;

fn run_with(family: ProfileFamily, cfg: &SimConfig) -> SimResult {
    let a0 = make_initial_profile(&cfg.grid().unwrap(), family).unwrap();
    simulate(cfg, &a0).unwrap()
}

fn poly2(c: f64, n: usize) -> SimResult {
    run_with(ProfileFamily::Poly2 { c }, &SimConfig { n_nodes: n, ..Default::default() })
}

fn bound_time(run: &SimResult) -> f64 {
    3.0 / run.riccati_a0.expect("hypotheses hold")
}

fn riccati_dominance() -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut rows = 0;
    for c in [1.0, 2.0, 3.0, 4.0] {
        let run = poly2(c, 257);
        let cutoff = 0.98 * bound_time(&run);
        for r in run.rows.iter().filter(|r| r.t < cutoff) {
            let lb = r.riccati_bound.ok_or("row without a bound")?;
            // positive means the bound is breached
            let gap = (lb - 1e-3 * r.a_at_1 - r.a_at_1) / r.a_at_1;
            worst = worst.max(gap);
            rows += 1;
            if gap > 0.0 {
                return Err(format!("c = {c}, t = {}: a = {} < {lb}", r.t, r.a_at_1));
            }
        }
    }
    Ok(format!("{rows} rows, worst relative margin {:.3e}", -worst))
}

fn blowup_time_bound() -> Outcome {
    let mut detail = Vec::new();
    for c in [1.0, 2.0, 3.0, 4.0] {
        let coarse = poly2(c, 257);
        let fine = poly2(c, 513);
        let ratio = |r: &SimResult| r.estimated_blowup_time.unwrap().time / bound_time(r);
        let (r1, r2) = (ratio(&coarse), ratio(&fine));
        if r1 > 1.05 || r2 > 1.05 {
            return Err(format!("c = {c}: T_est/bound = {r1}, {r2}"));
        }
        let drift = (r1 - r2).abs() / r2;
        if drift > 0.02 {
            return Err(format!("c = {c}: ratio moved {drift:.3e} between N = 257 and 513"));
        }
        detail.push(format!("c={c}: {r1:.6}"));
    }
    Ok(format!("T_est/(3/a0(1)) {}", detail.join(", ")))
}

fn steady_deviation(n: usize, rtol: f64, atol: f64) -> f64 {
    let cfg = SimConfig { n_nodes: n, t_max: 1.0, rtol, atol, ..Default::default() };
    let grid = cfg.grid().unwrap();
    let a0 = Profile::from_fn(&grid, |y| (PI * y).cos()).unwrap();
    let run = simulate(&cfg, &a0).unwrap();
    let mut dev: f64 = 0.0;
    for k in 0..=20 {
        let s = run.state_at(k as f64 / 20.0).unwrap();
        for (i, v) in s.a.values().iter().enumerate() {
            dev = dev.max((v - (PI * grid.node(i)).cos()).abs());
        }
    }
    dev
}

fn steady_state() -> Outcome {
    let dev = steady_deviation(257, 1e-10, 1e-12);
    if dev > 1e-5 {
        return Err(format!("sup deviation {dev:e} at N = 257"));
    }
    let e: Vec<f64> = [65, 129, 257].iter().map(|&n| steady_deviation(n, 1e-13, 1e-15)).collect();
    let p1 = (e[0] / e[1]).log2();
    let p2 = (e[1] / e[2]).log2();
    if p1 < 3.5 || p2 < 3.5 {
        return Err(format!("observed orders {p1:.2}, {p2:.2}"));
    }
    Ok(format!("deviation {dev:.2e}, observed orders {p1:.2}, {p2:.2}"))
}

fn conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [1.0, 2.0, 3.0, 4.0] {
        let cfg = SimConfig { project_mean: false, ..Default::default() };
        let run = run_with(ProfileFamily::Poly2 { c }, &cfg);
        let t_blow = run.estimated_blowup_time.unwrap().time;
        for r in run.rows.iter().filter(|r| r.t <= 0.99 * t_blow) {
            worst = worst.max(r.mean_a.abs());
        }
    }
    if worst > 1e-8 {
        return Err(format!("max |∫a| = {worst:e}"));
    }
    Ok(format!("max |∫a| = {worst:.2e} with projection off"))
}

/// Derivative at `t[2]` of the quartic through five samples.
fn lagrange5_slope(t: &[f64], f: &[f64]) -> f64 {
    let c = 2;
    let mut d = 0.0;
    for j in 0..5 {
        let w = if j == c {
            (0..5).filter(|&m| m != c).map(|m| 1.0 / (t[c] - t[m])).sum()
        } else {
            let num: f64 = (0..5).filter(|&m| m != j && m != c).map(|m| t[c] - t[m]).product();
            let den: f64 = (0..5).filter(|&m| m != j).map(|m| t[j] - t[m]).product();
            num / den
        };
        d += w * f[j];
    }
    d
}

fn energy_identity() -> Outcome {
    let cfg = SimConfig::default();
    let run = poly2(3.0, 257);
    let stop = time_at_amplitude(&run, cfg.blowup_threshold / 10.0).unwrap_or(run.t_end());
    let rows: Vec<_> = run.rows.iter().filter(|r| r.t <= stop).collect();
    let mut worst: f64 = 0.0;
    for w in rows.windows(5) {
        let t: Vec<f64> = w.iter().map(|r| r.t).collect();
        if t.windows(2).any(|p| p[1] <= p[0]) {
            continue;
        }
        let e: Vec<f64> = w.iter().map(|r| r.int_a_sq).collect();
        let want = 3.0 * w[2].int_a_cubed;
        worst = worst.max((lagrange5_slope(&t, &e) - want).abs() / want.abs());
    }
    if worst > 1e-3 {
        return Err(format!("relative mismatch {worst:e}"));
    }
    Ok(format!("{} rows, max relative mismatch {worst:.2e}", rows.len()))
}

fn persistence() -> Outcome {
    let families = [
        ProfileFamily::Poly2 { c: 1.0 },
        ProfileFamily::Poly2 { c: 3.0 },
        ProfileFamily::Poly4 { c1: 1.0, c2: 2.0 },
        ProfileFamily::CoshK { c: 1.0, k: 2.0 },
    ];
    let mut slope: f64 = 0.0;
    let mut rows = 0;
    for fam in families {
        let cfg = SimConfig::default();
        let run = run_with(fam, &cfg);
        if run.riccati_a0.is_none() {
            return Err(format!("{fam:?} fails the hypotheses"));
        }
        for r in run.rows.iter().take_while(|r| r.sup_abs_a < cfg.blowup_threshold / 10.0) {
            let rel = r.ay_at_0.abs() / r.max_abs_ay;
            slope = slope.max(rel);
            rows += 1;
            if rel > 1e-5 || r.min_ayy_interior <= 0.0 {
                return Err(format!("{fam:?} at t = {}: |a_y(0)|/max = {rel:e}, min a_yy = {}", r.t, r.min_ayy_interior));
            }
        }
    }
    Ok(format!("{rows} rows, max |a_y(0)|/max|a_y| = {slope:.2e}, a_yy > 0 throughout"))
}

fn convexity_fuzz() -> Outcome {
    let start = Instant::now();
    let summary = fuzz_convexity_lemma(20_251_016, 1000).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    if summary.violations > 0 || summary.min_f_at_1 <= 0.0 {
        return Err(format!("{} violations", summary.violations));
    }
    let grid = build_grid(257).unwrap();
    let probe = check_convexity_lemma(&Profile::from_fn(&grid, |y| y - 0.5).unwrap());
    let gap = (probe.integral_f_sq - probe.bound).abs();
    if gap > 1e-12 {
        return Err(format!("extremal probe misses equality by {gap:e}"));
    }
    Ok(format!(
        "1000 trials, 0 violations, max ratio {:.6}, probe gap {gap:.1e}, {elapsed:.2}s",
        summary.max_ratio
    ))
}

fn characteristics() -> Outcome {
    let cfg = SimConfig::default();
    let run = poly2(3.0, 257);
    let t_end = time_at_amplitude(&run, cfg.blowup_threshold / 10.0);
    let opts = TraceOptions { t_end, ..Default::default() };
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let path = trace_reduced_characteristic_with(&run, k as f64 / 10.0, &opts).map_err(|e| e.to_string())?;
        worst = worst.max(path.monotonicity_defect());
    }
    if worst > PATH_TOLERANCE {
        return Err(format!("a_yy drops by {worst:e}"));
    }

    let mut closed: f64 = 0.0;
    for c in [1.0, 2.0] {
        let steady = SimConfig { t_max: 1.0, ..Default::default() };
        let a0 = Profile::from_fn(&steady.grid().unwrap(), |y| c * (PI * y).cos()).unwrap();
        let sim = simulate(&steady, &a0).unwrap();
        for y0 in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let path = trace_reduced_characteristic(&sim, y0).map_err(|e| e.to_string())?;
            for (&t, &y) in path.times.iter().zip(&path.y_values) {
                let want = 2.0 / PI * ((PI * y0 / 2.0).tan() * (c * t).exp()).atan();
                closed = closed.max((y - want).abs());
            }
        }
    }
    if closed > 1e-5 {
        return Err(format!("closed-form mismatch {closed:e}"));
    }
    Ok(format!("max a_yy drop {worst:.2e}, closed-form error {closed:.2e}"))
}

fn transformation_group() -> Outcome {
    let t = Axis::new(0.0, 1.0, 41).unwrap();
    let x = Axis::new(-3.0, 3.0, 121).unwrap();
    let y = Axis::new(0.0, 1.0, 21).unwrap();
    let frame = Axis::new(-1.0, 1.0, 41).unwrap();
    let profile = |y: f64| 1.0 + 0.5 * (PI * y).cos();
    let zero = |_: f64, _: f64, _: f64| 0.0;

    let shear = Field2D::sample(t, x, y, |_, _, y| profile(y), zero, |_, _| 0.0).unwrap();
    let moved = galilean_transform_onto(&shear, &GalileanShift::monomial(0.5, 2).unwrap(), frame).unwrap();
    let (r0, r1) = (hydrostatic_residual(&shear), hydrostatic_residual(&moved));
    let res = r0.momentum.max(r0.divergence).max(r1.momentum).max(r1.divergence);
    if res > 1e-8 {
        return Err(format!("residual {res:e}"));
    }

    let cubic = |t: f64, x: f64, y: f64| (x * x * x - 2.0 * x) * (PI * y).cos() + t * x * x;
    let any = Field2D::sample(t, x, y, cubic, zero, |_, _| 0.0).unwrap();
    let g3 = GalileanShift::monomial(1.0, 3).unwrap();
    let any_moved = galilean_transform_onto(&any, &g3, frame).unwrap();
    let d = any_moved.u_x();
    let mut inv: f64 = 0.0;
    for it in 0..t.len() {
        let s = t.node(it);
        for ix in 0..frame.len() {
            let xx = frame.node(ix) + g3.g(s);
            for iy in 0..y.len() {
                let want = (3.0 * xx * xx - 2.0) * (PI * y.node(iy)).cos() + 2.0 * s * xx;
                inv = inv.max((d[any_moved.index(it, ix, iy)] - want).abs());
            }
        }
    }
    if inv > 1e-10 {
        return Err(format!("x-derivative invariance error {inv:e}"));
    }

    let uniform = Field2D::sample(t, x, y, |_, _, _| 0.7, zero, |_, _| 0.0).unwrap();
    let uniform_moved = galilean_transform_onto(&uniform, &g3, frame).unwrap();
    let straight = verify_characteristic_ode(&uniform_moved, 0.0, &DEFAULT_Y_LIST).map_err(|e| e.to_string())?;
    if straight.max_spread > 1e-7 {
        return Err(format!("constant-line spread {:e}", straight.max_spread));
    }

    let sheared = verify_characteristic_ode(&shear, 0.0, &DEFAULT_Y_LIST).map_err(|e| e.to_string())?;
    let mut split: f64 = 0.0;
    for (i, pi) in sheared.x_paths.iter().enumerate() {
        for (j, pj) in sheared.x_paths.iter().enumerate() {
            let du = profile(DEFAULT_Y_LIST[i]) - profile(DEFAULT_Y_LIST[j]);
            for (k, &tk) in sheared.times.iter().enumerate() {
                split = split.max((pi[k] - pj[k] - du * tk).abs());
            }
        }
    }
    if split > 1e-12 {
        return Err(format!("sheared spread off by {split:e}"));
    }
    Ok(format!(
        "residual {res:.1e}, invariance {inv:.1e}, spread {:.1e}, shear split error {split:.1e}",
        straight.max_spread
    ))
}

fn scaling_symmetry() -> Outcome {
    let cfg = SimConfig::default();
    let mut worst: f64 = 0.0;
    for c in [1.0, 3.0] {
        let slow = run_with(ProfileFamily::Poly2 { c }, &cfg);
        let fast = run_with(ProfileFamily::Poly2 { c: 2.0 * c }, &cfg);
        let t_fast = fast.estimated_blowup_time.unwrap().time;
        for k in 1..=19 {
            let t = 0.9 * t_fast * k as f64 / 19.0;
            let b = fast.state_at(t).unwrap();
            let a = slow.state_at(2.0 * t).unwrap();
            let scale = b.a.sup_norm();
            for (bi, ai) in b.a.values().iter().zip(a.a.values()) {
                worst = worst.max((bi - 2.0 * ai).abs() / scale);
            }
        }
    }
    if worst > 1e-4 {
        return Err(format!("relative mismatch {worst:e}"));
    }
    Ok(format!("max relative mismatch {worst:.2e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("riccati bound dominance", riccati_dominance),
        ("blowup time bound", blowup_time_bound),
        ("exact steady state", steady_state),
        ("mean conservation", conservation),
        ("energy identity", energy_identity),
        ("convexity persistence", persistence),
        ("one-third inequality fuzz", convexity_fuzz),
        ("characteristic monotonicity", characteristics),
        ("transformation group", transformation_group),
        ("scaling symmetry", scaling_symmetry),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!("{} passed, {failed} failed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
