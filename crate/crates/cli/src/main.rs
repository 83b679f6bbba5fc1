use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use hydroblow::characteristics::{time_at_amplitude, trace_reduced_characteristic_with, TraceOptions, PATH_TOLERANCE};
use hydroblow::reduced::fmt_f64;
use hydroblow::transform::DEFAULT_Y_LIST;
use hydroblow::{
    build_grid, check_convexity_lemma, fuzz_convexity_lemma, galilean_transform_onto, hydrostatic_residual,
    make_initial_profile, simulate, verify_characteristic_ode, Axis, DiagnosticsRow, Error, Field2D,
    GalileanShift, Profile, SimResult,
};

mod config;
mod expr;

use config::Settings;

#[derive(Parser)]
#[command(name = "hydroblow", version, about = "Blowup experiments for the reduced hydrostatic Euler equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// Initial data family: poly2, poly4 or coshk
    #[arg(long)]
    family: Option<String>,
    #[arg(long = "c", allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long = "c1", allow_hyphen_values = true)]
    c1: Option<String>,
    #[arg(long = "c2", allow_hyphen_values = true)]
    c2: Option<String>,
    #[arg(long = "k")]
    k: Option<String>,
    /// Grid nodes in y (odd)
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    tmax: Option<String>,
    #[arg(long)]
    rtol: Option<String>,
    #[arg(long)]
    atol: Option<String>,
    /// Stop once sup|a| exceeds this
    #[arg(long)]
    threshold: Option<String>,
    /// Output directory (falls back to HYDROBLOW_OUT, then .)
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads for sweeps and path tracing
    #[arg(long)]
    jobs: Option<String>,
    /// key = value settings file; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("family", self.family.clone()),
            ("c", self.c.clone()),
            ("c1", self.c1.clone()),
            ("c2", self.c2.clone()),
            ("k", self.k.clone()),
            ("nodes", self.nodes.clone()),
            ("tmax", self.tmax.clone()),
            ("rtol", self.rtol.clone()),
            ("atol", self.atol.clone()),
            ("threshold", self.threshold.clone()),
            ("out", self.out.clone()),
            ("seed", self.seed.clone()),
            ("jobs", self.jobs.clone()),
        ]
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one initial profile to blowup or tmax
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Repeat simulate over a list of parameter values
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary: c, c1, c2 or k
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values
        #[arg(long, allow_hyphen_values = true)]
        values: Option<String>,
        /// Allowed excess of T_est over 3/a0(1)
        #[arg(long = "sweep-tol")]
        sweep_tol: Option<String>,
    },
    /// Check the one-third inequality on a single profile
    LemmaCheck {
        #[command(flatten)]
        common: Common,
        /// Profile as `poly:<expr in y>`; defaults to the selected family
        #[arg(long = "f", allow_hyphen_values = true)]
        f: Option<String>,
    },
    /// Check the one-third inequality on random convex profiles
    Fuzz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<String>,
    },
    /// Trace particle paths of a simulated run
    Characteristics {
        #[command(flatten)]
        common: Common,
        /// Comma-separated starting heights
        #[arg(long)]
        y0: Option<String>,
    },
    /// Apply the Galilean shift to shear flows and check residuals
    TransformDemo {
        #[command(flatten)]
        common: Common,
        /// Shift polynomial coefficients c0,c1,c2,... (c0 = c1 = 0)
        #[arg(long, allow_hyphen_values = true)]
        shift: Option<String>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Violation(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::InvalidConfig(_)
            | Error::InvalidProfile(_)
            | Error::UnknownFamily(_)
            | Error::Parse(_)
            | Error::Domain(_) => Failure::Usage(e.to_string()),
            Error::Counterexample { .. } => Failure::Violation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Runtime(m) | Failure::Violation(m)) = &f;
            eprintln!("hydroblow: {m}");
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { common } => cmd_simulate(&Settings::resolve(&common, &[])?),
        Command::Sweep { common, param, values, sweep_tol } => {
            let extra = [("param", param), ("values", values), ("sweep_tol", sweep_tol)];
            cmd_sweep(&Settings::resolve(&common, &extra)?)
        }
        Command::LemmaCheck { common, f } => cmd_lemma(&Settings::resolve(&common, &[("f", f)])?),
        Command::Fuzz { common, trials } => cmd_fuzz(&Settings::resolve(&common, &[("trials", trials)])?),
        Command::Characteristics { common, y0 } => {
            cmd_characteristics(&Settings::resolve(&common, &[("y0", y0)])?)
        }
        Command::TransformDemo { common, shift } => {
            cmd_transform(&Settings::resolve(&common, &[("shift", shift)])?)
        }
    }
}

fn output_dir(s: &Settings) -> Result<PathBuf, Failure> {
    let dir = s.output_dir();
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let mut out = String::from(DiagnosticsRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// Outcome of the bound checks on one run.
struct BoundCheck {
    bound_time: Option<f64>,
    t_est: Option<f64>,
    ratio: Option<f64>,
    dominance_ok: bool,
}

fn check_bounds(run: &SimResult) -> BoundCheck {
    let bound_time = run.riccati_a0.map(|a1| 3.0 / a1);
    let t_est = run.estimated_blowup_time.map(|e| e.time);
    let ratio = bound_time.zip(t_est).map(|(b, t)| t / b);
    let dominance_ok = match bound_time {
        Some(b) => run.rows.iter().filter(|r| r.t < 0.98 * b).all(|r| match r.riccati_bound {
            Some(lb) => r.a_at_1 >= lb - 1e-3 * r.a_at_1.abs(),
            None => true,
        }),
        None => true,
    };
    BoundCheck { bound_time, t_est, ratio, dominance_ok }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn run_family(s: &Settings) -> Result<SimResult, Failure> {
    let config = s.sim_config();
    let a0 = make_initial_profile(&config.grid()?, s.family())?;
    Ok(simulate(&config, &a0)?)
}

fn run_summary(s: &Settings, run: &SimResult, check: &BoundCheck) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{}nodes = {}\ntmax = {}\nrtol = {:e}\natol = {:e}\nthreshold = {:e}\n",
        s.describe_family(),
        s.nodes,
        s.tmax,
        s.rtol,
        s.atol,
        s.threshold
    );
    let a1 = run.rows.first().map(|r| r.a_at_1).unwrap_or(f64::NAN);
    let _ = writeln!(out, "a0_at_1 = {a1}");
    let _ = writeln!(out, "hypotheses = {}", if run.riccati_a0.is_some() { "pass" } else { "fail" });
    let _ = writeln!(out, "bound_time = {}", opt(check.bound_time));
    let _ = writeln!(out, "termination = {}", run.termination.as_str());
    let _ = writeln!(out, "blowup_signal = {}", run.blowup_signal.map(|b| b.as_str()).unwrap_or(""));
    let _ = writeln!(out, "T_est = {}", opt(check.t_est));
    if let Some(e) = run.estimated_blowup_time {
        let _ = writeln!(out, "fit_correlation = {}", e.correlation);
        let _ = writeln!(out, "low_confidence = {}", e.low_confidence);
    }
    let _ = writeln!(out, "ratio = {}", opt(check.ratio));
    let _ = writeln!(out, "t_end = {}", run.t_end());
    let _ = writeln!(out, "steps_accepted = {}", run.steps_accepted);
    let _ = writeln!(out, "steps_rejected = {}", run.steps_rejected);
    let _ = writeln!(out, "riccati_dominance = {}", if check.dominance_ok { "pass" } else { "FAIL" });
    out
}

fn cmd_simulate(s: &Settings) -> Result<(), Failure> {
    let dir = output_dir(s)?;
    let run = run_family(s)?;
    let check = check_bounds(&run);
    write(&dir, "diagnostics.csv", &diagnostics_csv(&run.rows))?;
    let summary = format!("command = simulate\n{}", run_summary(s, &run, &check));
    write(&dir, "summary.txt", &summary)?;
    print!("{summary}");
    if !check.dominance_ok {
        return Err(Failure::Violation("a(t,1) fell below the Riccati lower bound".into()));
    }
    if let Some(r) = check.ratio {
        if r > 1.05 {
            return Err(Failure::Violation(format!("T_est exceeds 3/a0(1) by a factor {r}")));
        }
    }
    Ok(())
}

fn with_param(s: &Settings, value: f64) -> Result<Settings, Failure> {
    let mut t = s.clone();
    match s.param.as_str() {
        "c" | "c1" | "c2" | "k" => t.set(&s.param, &value.to_string())?,
        other => return Err(Failure::Usage(format!("cannot sweep over `{other}`; use c, c1, c2 or k"))),
    }
    Ok(t)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn cmd_sweep(s: &Settings) -> Result<(), Failure> {
    let values = s.values.clone().unwrap_or_default();
    if values.is_empty() {
        return Err(Failure::Usage("sweep needs a non-empty --values list".into()));
    }
    let settings = values.iter().map(|&v| with_param(s, v)).collect::<Result<Vec<_>, _>>()?;
    let dir = output_dir(s)?;
    let results: Vec<Result<SimResult, Failure>> =
        pool(s.jobs)?.install(|| settings.par_iter().map(run_family).collect());

    let mut csv = String::from("param,a0_at_1,T_est,paper_bound,ratio\n");
    let mut summary = format!("command = sweep\nparam = {}\n{}", s.param, s.describe_family());
    let mut worst: f64 = 0.0;
    let mut missing = Vec::new();
    for (&v, res) in values.iter().zip(results) {
        let run = res?;
        let check = check_bounds(&run);
        let a1 = run.rows.first().map(|r| r.a_at_1).unwrap_or(f64::NAN);
        let f = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", fmt_f64(v), fmt_f64(a1), f(check.t_est), f(check.bound_time), f(check.ratio));
        let _ = writeln!(
            summary,
            "{} = {v}: T_est = {}, bound = {}, ratio = {}, dominance = {}",
            s.param,
            opt(check.t_est),
            opt(check.bound_time),
            opt(check.ratio),
            if check.dominance_ok { "pass" } else { "FAIL" }
        );
        if !check.dominance_ok {
            worst = f64::INFINITY;
        }
        match check.ratio {
            Some(r) => worst = worst.max(r),
            None => missing.push(v),
        }
    }
    let _ = writeln!(summary, "max_ratio = {worst}\nsweep_tol = {}", s.sweep_tol);
    write(&dir, "sweep.csv", &csv)?;
    write(&dir, "summary.txt", &summary)?;
    print!("{summary}");
    if worst > 1.0 + s.sweep_tol {
        return Err(Failure::Violation(format!("sweep ratio {worst} exceeds 1 + {}", s.sweep_tol)));
    }
    if !missing.is_empty() {
        return Err(Failure::Runtime(format!("no blowup estimate for {} = {missing:?}", s.param)));
    }
    Ok(())
}

fn lemma_profile(s: &Settings) -> Result<Profile, Failure> {
    let grid = build_grid(s.nodes)?;
    match &s.f {
        None => Ok(make_initial_profile(&grid, s.family())?),
        Some(arg) => {
            let body = arg
                .strip_prefix("poly:")
                .ok_or_else(|| Failure::Usage(format!("--f expects `poly:<expr>`, got `{arg}`")))?;
            let e = expr::parse(body).map_err(|e| Failure::Usage(format!("--f: {e}")))?;
            Ok(Profile::from_fn(&grid, |y| e.eval(y))?)
        }
    }
}

fn cmd_lemma(s: &Settings) -> Result<(), Failure> {
    let dir = output_dir(s)?;
    let f = lemma_profile(s)?;
    let report = check_convexity_lemma(&f);
    let source = s.f.clone().unwrap_or_else(|| s.describe_family().replace('\n', " ").trim().to_string());
    let summary = format!("command = lemma-check\nprofile = {source}\nnodes = {}\n{report}\n", s.nodes);
    write(&dir, "summary.txt", &summary)?;
    print!("{summary}");
    if !report.consistent() {
        return Err(Failure::Violation("hypotheses hold but the inequality fails".into()));
    }
    Ok(())
}

fn cmd_fuzz(s: &Settings) -> Result<(), Failure> {
    let dir = output_dir(s)?;
    let summary = fuzz_convexity_lemma(s.seed, s.trials)?;
    let text = format!("command = fuzz\n{summary}\n");
    write(&dir, "summary.txt", &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_characteristics(s: &Settings) -> Result<(), Failure> {
    if s.y0.is_empty() {
        return Err(Failure::Usage("--y0 list is empty".into()));
    }
    let dir = output_dir(s)?;
    let run = run_family(s)?;
    write(&dir, "diagnostics.csv", &diagnostics_csv(&run.rows))?;
    let t_end = time_at_amplitude(&run, s.threshold / 10.0);
    let opts = TraceOptions { t_end, ..TraceOptions::default() };
    let paths: Vec<_> = pool(s.jobs)?
        .install(|| s.y0.par_iter().map(|&y0| trace_reduced_characteristic_with(&run, y0, &opts)).collect());

    let mut summary = format!("command = characteristics\n{}nodes = {}\n", s.describe_family(), s.nodes);
    let _ = writeln!(summary, "t_end = {}", opt(t_end.or(Some(run.t_end()))));
    let mut bad = Vec::new();
    for (&y0, path) in s.y0.iter().zip(paths) {
        let path = path?;
        write(&dir, &format!("path_{y0}.csv"), &path.to_csv())?;
        let defect = path.monotonicity_defect();
        let growth = path.a_yy_along.last().unwrap() / path.a_yy_along[0];
        let ok = defect <= PATH_TOLERANCE;
        let _ = writeln!(
            summary,
            "y0 = {y0}: Y_end = {}, a_yy growth = {growth}, monotonicity defect = {defect:e} {}",
            path.y_values.last().unwrap(),
            if ok { "pass" } else { "FAIL" }
        );
        if !ok && run.riccati_a0.is_some() {
            bad.push(y0);
        }
    }
    write(&dir, "summary.txt", &summary)?;
    print!("{summary}");
    if !bad.is_empty() {
        return Err(Failure::Violation(format!("a_yy decreased along paths from y0 = {bad:?}")));
    }
    Ok(())
}

fn cmd_transform(s: &Settings) -> Result<(), Failure> {
    use std::f64::consts::PI;
    let dir = output_dir(s)?;
    let shift = GalileanShift::polynomial(s.shift.clone())?;
    let t = Axis::new(0.0, 1.0, 41)?;
    let x = Axis::new(-4.0, 4.0, 161)?;
    let y = Axis::new(0.0, 1.0, 21)?;
    let x_frame = Axis::new(-1.0, 1.0, 41)?;
    let profile = |y: f64| 1.0 + 0.5 * (PI * y).cos();

    let shear = Field2D::sample(t, x, y, |_, _, y| profile(y), |_, _, _| 0.0, |_, _| 0.0)?;
    let moved = galilean_transform_onto(&shear, &shift, x_frame)?;
    let r0 = hydrostatic_residual(&shear);
    let r1 = hydrostatic_residual(&moved);

    let u_hat = 0.7;
    let uniform = Field2D::sample(t, x, y, |_, _, _| u_hat, |_, _, _| 0.0, |_, _| 0.0)?;
    let uniform_moved = galilean_transform_onto(&uniform, &shift, x_frame)?;
    let straight = verify_characteristic_ode(&uniform_moved, 0.0, &DEFAULT_Y_LIST)?;
    let sheared = verify_characteristic_ode(&shear, 0.0, &DEFAULT_Y_LIST)?;
    let (lo, hi) = DEFAULT_Y_LIST
        .iter()
        .map(|&y| profile(y))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), u| (a.min(u), b.max(u)));

    write(&dir, "field.csv", &moved.to_csv())?;
    let mut summary = String::from("command = transform-demo\n");
    let _ = writeln!(summary, "shift = {:?}", s.shift);
    let _ = writeln!(summary, "shear residual = {:e} (momentum), {:e} (divergence)", r0.momentum, r0.divergence);
    let _ = writeln!(summary, "shifted residual = {:e} (momentum), {:e} (divergence)", r1.momentum, r1.divergence);
    let _ = writeln!(summary, "uniform flow spread = {:e}, accel residual = {:e}", straight.max_spread, straight.accel_residual);
    let _ = writeln!(summary, "sheared flow spread = {} (expected {})", sheared.max_spread, (hi - lo) * t.end());
    write(&dir, "summary.txt", &summary)?;
    print!("{summary}");
    let worst = r0.momentum.max(r0.divergence).max(r1.momentum).max(r1.divergence);
    if worst > 1e-8 || straight.max_spread > 1e-7 {
        return Err(Failure::Violation("transformed field is not a solution".into()));
    }
    Ok(())
}
