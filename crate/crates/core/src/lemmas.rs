//! Initial-data hypotheses, the one-third convexity inequality, and the
//! generator families used to build blowup data.
//!
//! For `f ∈ C²[0,1]` with `f'(0) = 0`, `f'' > 0` and `∫f = 0`, one has
//! `f(1) > 0` and `∫f² ≤ f(1)²/3`. The constant is sharp: the linear
//! profile `y − 1/2` attains equality while violating both derivative
//! conditions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{build_grid, derivative_y, integrate, Derivative, GridSpec, Profile};
use crate::reduced::{fmt_f64, interior_min};

/// Thresholds for turning discrete checks into booleans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `|∫f| ≤ mean · max(1, sup|f|)`.
    pub mean: f64,
    /// `|f'(0)| ≤ wall_slope · max|f'|`.
    pub wall_slope: f64,
    /// Interior `f''` must exceed this (exclusive).
    pub curvature_floor: f64,
    /// Relative slack on `∫f² ≤ f(1)²/3`.
    pub inequality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            mean: 1e-8,
            wall_slope: 1e-6,
            curvature_floor: 0.0,
            inequality: 1e-12,
        }
    }
}

struct ShapeChecks {
    mean: f64,
    mean_ok: bool,
    wall_slope: f64,
    wall_ok: bool,
    min_curvature: f64,
    convex_ok: bool,
}

fn shape_checks(f: &Profile, tol: &Tolerances) -> ShapeChecks {
    let mean = integrate(f);
    let fy = derivative_y(f, Derivative::First);
    let fyy = derivative_y(f, Derivative::Second);
    let wall_slope = fy.first().abs();
    let min_curvature = interior_min(fyy.values());
    ShapeChecks {
        mean,
        mean_ok: mean.abs() <= tol.mean * f.sup_norm().max(1.0),
        wall_slope,
        wall_ok: wall_slope <= tol.wall_slope * fy.sup_norm(),
        min_curvature,
        convex_ok: min_curvature > tol.curvature_floor,
    }
}

/// Outcome of checking initial data against the blowup hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub mean_zero: bool,
    pub mean_residual: f64,
    pub wall_slope_zero: bool,
    /// `|a₀'(0)|`
    pub wall_slope: f64,
    pub strictly_convex: bool,
    /// Interior minimum of `a₀''`.
    pub min_curvature: f64,
    pub a0_at_1: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.mean_zero && self.wall_slope_zero && self.strictly_convex
    }

    /// Upper bound `3 / a₀(1)` on the blowup time, when it applies.
    pub fn blowup_time_bound(&self) -> Option<f64> {
        (self.all_pass() && self.a0_at_1 > 0.0).then(|| 3.0 / self.a0_at_1)
    }

    pub const CSV_HEADER: &'static str =
        "mean_zero,mean_residual,wall_slope_zero,wall_slope,strictly_convex,min_curvature,a0_at_1";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.mean_zero,
            fmt_f64(self.mean_residual),
            self.wall_slope_zero,
            fmt_f64(self.wall_slope),
            self.strictly_convex,
            fmt_f64(self.min_curvature),
            fmt_f64(self.a0_at_1)
        )
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

impl fmt::Display for HypothesisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "initial data hypotheses")?;
        writeln!(f, "  mean zero        {}  (∫a0 = {:.3e})", mark(self.mean_zero), self.mean_residual)?;
        writeln!(f, "  wall slope zero  {}  (|a0'(0)| = {:.3e})", mark(self.wall_slope_zero), self.wall_slope)?;
        writeln!(f, "  strictly convex  {}  (min a0'' = {:.6})", mark(self.strictly_convex), self.min_curvature)?;
        write!(f, "  a0(1) = {:.10}", self.a0_at_1)
    }
}

pub fn validate_hypotheses(a0: &Profile) -> HypothesisReport {
    validate_hypotheses_with(a0, &Tolerances::default())
}

pub fn validate_hypotheses_with(a0: &Profile, tol: &Tolerances) -> HypothesisReport {
    let c = shape_checks(a0, tol);
    HypothesisReport {
        mean_zero: c.mean_ok,
        mean_residual: c.mean,
        wall_slope_zero: c.wall_ok,
        wall_slope: c.wall_slope,
        strictly_convex: c.convex_ok,
        min_curvature: c.min_curvature,
        a0_at_1: a0.last(),
    }
}

/// Both sides of `∫f² ≤ f(1)²/3`, with the lemma's hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub f_at_1: f64,
    pub integral_f: f64,
    pub integral_f_sq: f64,
    /// `f(1)² / 3`
    pub bound: f64,
    pub inequality_holds: bool,
    pub hypotheses_met: bool,
    pub wall_slope: f64,
    pub min_curvature: f64,
}

impl LemmaReport {
    /// `∫f² / (f(1)²/3)`; at most one under the hypotheses.
    pub fn ratio(&self) -> f64 {
        self.integral_f_sq / self.bound
    }

    /// `f(1) > 0`, the lemma's other conclusion.
    pub fn positive_at_top(&self) -> bool {
        self.f_at_1 > 0.0
    }

    /// False only for a genuine counterexample: hypotheses met but a
    /// conclusion fails.
    pub fn consistent(&self) -> bool {
        !self.hypotheses_met || (self.inequality_holds && self.positive_at_top())
    }

    pub const CSV_HEADER: &'static str =
        "f_at_1,integral_f,integral_f_sq,bound,ratio,inequality_holds,hypotheses_met";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            fmt_f64(self.f_at_1),
            fmt_f64(self.integral_f),
            fmt_f64(self.integral_f_sq),
            fmt_f64(self.bound),
            fmt_f64(self.ratio()),
            self.inequality_holds,
            self.hypotheses_met
        )
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "convexity inequality")?;
        writeln!(
            f,
            "  hypotheses       {}  (|f'(0)| = {:.3e}, min f'' = {:.6}, ∫f = {:.3e})",
            if self.hypotheses_met { "met" } else { "NOT met" },
            self.wall_slope,
            self.min_curvature,
            self.integral_f
        )?;
        writeln!(f, "  f(1)             {:.6}", self.f_at_1)?;
        writeln!(
            f,
            "  ∫f² ≤ f(1)²/3    {:.6} ≤ {:.6}  {}",
            self.integral_f_sq,
            self.bound,
            if self.inequality_holds { "holds" } else { "FAILS" }
        )?;
        write!(f, "  ratio            {:.9}", self.ratio())
    }
}

pub fn check_convexity_lemma(f: &Profile) -> LemmaReport {
    check_convexity_lemma_with(f, &Tolerances::default())
}

pub fn check_convexity_lemma_with(f: &Profile, tol: &Tolerances) -> LemmaReport {
    let c = shape_checks(f, tol);
    let sq = f.map(|v| v * v).expect("square of finite profile");
    let integral_f_sq = integrate(&sq);
    let f_at_1 = f.last();
    let bound = f_at_1 * f_at_1 / 3.0;
    LemmaReport {
        f_at_1,
        integral_f: c.mean,
        integral_f_sq,
        bound,
        inequality_holds: integral_f_sq <= bound * (1.0 + tol.inequality),
        hypotheses_met: c.mean_ok && c.wall_ok && c.convex_ok,
        wall_slope: c.wall_slope,
        min_curvature: c.min_curvature,
    }
}

/// Families of mean-zero initial data `c · (G(y) − ∫G)` with `G'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileFamily {
    /// `c (y² − 1/3)`
    Poly2 { c: f64 },
    /// `c₁ (y² − 1/3) + c₂ (y⁴ − 1/5)`
    Poly4 { c1: f64, c2: f64 },
    /// `c (cosh(k y) − sinh(k)/k)`
    CoshK { c: f64, k: f64 },
}

/// Family name as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Poly2,
    Poly4,
    CoshK,
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly2" => Ok(FamilyKind::Poly2),
            "poly4" => Ok(FamilyKind::Poly4),
            "coshk" => Ok(FamilyKind::CoshK),
            other => Err(Error::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyKind::Poly2 => "poly2",
            FamilyKind::Poly4 => "poly4",
            FamilyKind::CoshK => "coshk",
        })
    }
}

impl ProfileFamily {
    pub fn kind(&self) -> FamilyKind {
        match self {
            ProfileFamily::Poly2 { .. } => FamilyKind::Poly2,
            ProfileFamily::Poly4 { .. } => FamilyKind::Poly4,
            ProfileFamily::CoshK { .. } => FamilyKind::CoshK,
        }
    }

    /// The un-centred generator `c · G(y)`.
    pub fn generator(&self, y: f64) -> f64 {
        match *self {
            ProfileFamily::Poly2 { c } => c * y * y,
            ProfileFamily::Poly4 { c1, c2 } => c1 * y * y + c2 * y.powi(4),
            ProfileFamily::CoshK { c, k } => c * (k * y).cosh(),
        }
    }

    /// Closed-form `∫₀¹` of [`ProfileFamily::generator`].
    pub fn generator_mean(&self) -> f64 {
        match *self {
            ProfileFamily::Poly2 { c } => c / 3.0,
            ProfileFamily::Poly4 { c1, c2 } => c1 / 3.0 + c2 / 5.0,
            ProfileFamily::CoshK { c, k } => c * k.sinh() / k,
        }
    }

    /// Whether the constants give strictly convex data.
    pub fn is_convex(&self) -> bool {
        match *self {
            ProfileFamily::Poly2 { c } => c > 0.0,
            ProfileFamily::Poly4 { c1, c2 } => c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0,
            ProfileFamily::CoshK { c, k } => c > 0.0 && k > 0.0,
        }
    }

    /// Multiply the amplitude constants by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match *self {
            ProfileFamily::Poly2 { c } => ProfileFamily::Poly2 { c: s * c },
            ProfileFamily::Poly4 { c1, c2 } => ProfileFamily::Poly4 { c1: s * c1, c2: s * c2 },
            ProfileFamily::CoshK { c, k } => ProfileFamily::CoshK { c: s * c, k },
        }
    }
}

/// Sample a family member on `grid`.
///
/// The closed-form mean is subtracted first; the remaining quadrature
/// residual (`O(h⁴)`, zero for `poly2`) is then removed so the discrete
/// constraint holds to rounding.
pub fn make_initial_profile(grid: &GridSpec, family: ProfileFamily) -> Result<Profile> {
    let mean = family.generator_mean();
    let raw = Profile::from_fn(grid, |y| family.generator(y) - mean)?;
    let residual = integrate(&raw);
    raw.map(|v| v - residual)
}

/// Summary of a randomized run of [`check_convexity_lemma`].
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzSummary {
    pub seed: u64,
    pub trials: usize,
    pub violations: usize,
    /// Trials whose discrete hypothesis checks failed (should be zero).
    pub hypothesis_misses: usize,
    pub max_ratio: f64,
    pub max_ratio_trial: usize,
    pub min_f_at_1: f64,
}

impl fmt::Display for FuzzSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed               {}", self.seed)?;
        writeln!(f, "trials             {}", self.trials)?;
        writeln!(f, "violations         {}", self.violations)?;
        writeln!(f, "hypothesis misses  {}", self.hypothesis_misses)?;
        writeln!(f, "max ratio          {} (trial {})", fmt_f64(self.max_ratio), self.max_ratio_trial)?;
        write!(f, "min f(1)           {}", fmt_f64(self.min_f_at_1))
    }
}

/// Grid used by the fuzz harness.
pub const FUZZ_NODES: usize = 257;
/// Range of the `cosh(k y)` rate drawn per trial.
pub const FUZZ_K_RANGE: (f64, f64) = (0.5, 6.0);

/// Weights and rate for one fuzz trial.
///
/// Each trial draws from its own ChaCha8 stream (`seed`, stream = trial
/// index), so trials are reproducible across platforms and independent of
/// evaluation order.
pub fn fuzz_trial_params(seed: u64, trial: usize) -> ([f64; 4], f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    loop {
        let w: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>());
        let k = rng.random_range(FUZZ_K_RANGE.0..FUZZ_K_RANGE.1);
        if w.iter().sum::<f64>() > 1e-3 {
            return (w, k);
        }
    }
}

/// `Σ wᵢ Gᵢ − ∫Σ wᵢ Gᵢ` with `G ∈ {y², y⁴, y⁶, cosh(k y)}`, centred by
/// quadrature.
pub fn fuzz_profile(grid: &GridSpec, weights: &[f64; 4], k: f64) -> Result<Profile> {
    let raw = Profile::from_fn(grid, |y| {
        weights[0] * y * y + weights[1] * y.powi(4) + weights[2] * y.powi(6) + weights[3] * (k * y).cosh()
    })?;
    let mean = integrate(&raw);
    raw.map(|v| v - mean)
}

pub fn fuzz_convexity_lemma(seed: u64, n_trials: usize) -> Result<FuzzSummary> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    let grid = build_grid(FUZZ_NODES)?;
    let mut summary = FuzzSummary {
        seed,
        trials: n_trials,
        violations: 0,
        hypothesis_misses: 0,
        max_ratio: f64::NEG_INFINITY,
        max_ratio_trial: 0,
        min_f_at_1: f64::INFINITY,
    };
    for trial in 0..n_trials {
        let (weights, k) = fuzz_trial_params(seed, trial);
        let f = fuzz_profile(&grid, &weights, k)?;
        let report = check_convexity_lemma(&f);
        if !report.hypotheses_met {
            summary.hypothesis_misses += 1;
        }
        if !(report.inequality_holds && report.positive_at_top()) {
            return Err(Error::Counterexample {
                trial,
                weights: weights.to_vec(),
                k,
            });
        }
        let ratio = report.ratio();
        if ratio > summary.max_ratio {
            summary.max_ratio = ratio;
            summary.max_ratio_trial = trial;
        }
        summary.min_f_at_1 = summary.min_f_at_1.min(report.f_at_1);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        build_grid(257).unwrap()
    }

    #[test]
    fn hypotheses_examples() {
        let g = grid();
        let a0 = Profile::from_fn(&g, |y| 3.0 * (y * y - 1.0 / 3.0)).unwrap();
        let r = validate_hypotheses(&a0);
        assert!(r.all_pass(), "{r}");
        assert!((r.a0_at_1 - 2.0).abs() < 1e-14);
        assert!((r.blowup_time_bound().unwrap() - 1.5).abs() < 1e-14);

        let r = validate_hypotheses(&Profile::from_fn(&g, |y| (PI * y).cos()).unwrap());
        assert!(r.mean_zero && r.wall_slope_zero && !r.strictly_convex);
        assert!(r.blowup_time_bound().is_none());

        let r = validate_hypotheses(&Profile::zeros(&g));
        assert!(r.mean_zero && r.wall_slope_zero && !r.strictly_convex);
    }

    #[test]
    fn hypotheses_catch_each_failure() {
        let g = grid();
        let r = validate_hypotheses(&Profile::from_fn(&g, |y| y * y).unwrap());
        assert!(!r.mean_zero && r.wall_slope_zero && r.strictly_convex);
        let tilted = Profile::from_fn(&g, |y| (y - 0.1).powi(2)).unwrap();
        let mean = integrate(&tilted);
        let r = validate_hypotheses(&tilted.map(|v| v - mean).unwrap());
        assert!(r.mean_zero && !r.wall_slope_zero && r.strictly_convex);
    }

    #[test]
    fn lemma_examples() {
        let g = grid();
        let r = check_convexity_lemma(&Profile::from_fn(&g, |y| y * y - 1.0 / 3.0).unwrap());
        assert!((r.integral_f_sq - 4.0 / 45.0).abs() < 1e-12);
        assert!((r.bound - 4.0 / 27.0).abs() < 1e-14);
        assert!(r.inequality_holds && r.hypotheses_met && r.positive_at_top());
        assert!((r.f_at_1 - 2.0 / 3.0).abs() < 1e-14);

        let r = check_convexity_lemma(&Profile::from_fn(&g, |y| y - 0.5).unwrap());
        assert!((r.integral_f_sq - 1.0 / 12.0).abs() < 1e-12);
        assert!((r.integral_f_sq - r.bound).abs() < 1e-12);
        assert!(r.inequality_holds);
        assert!(!r.hypotheses_met);

        let r = check_convexity_lemma(&Profile::from_fn(&g, |y| -(y * y - 1.0 / 3.0)).unwrap());
        assert!(!r.hypotheses_met);
        assert!((r.f_at_1 + 2.0 / 3.0).abs() < 1e-14);
        assert!((r.integral_f_sq - 4.0 / 45.0).abs() < 1e-12);
        assert!(r.consistent());
    }

    #[test]
    fn family_examples() {
        let g = grid();
        let a = make_initial_profile(&g, ProfileFamily::Poly2 { c: 3.0 }).unwrap();
        assert!((a.first() + 1.0).abs() < 1e-14);
        assert!((a.last() - 2.0).abs() < 1e-14);

        let a = make_initial_profile(&g, ProfileFamily::CoshK { c: 1.0, k: 1.0 }).unwrap();
        assert!((a.last() - (-1.0f64).exp()).abs() < 1e-10);

        let a = make_initial_profile(&g, ProfileFamily::Poly2 { c: 0.0 }).unwrap();
        assert_eq!(a.sup_norm(), 0.0);

        assert!(matches!("poly3".parse::<FamilyKind>(), Err(Error::UnknownFamily(_))));
        assert_eq!("coshk".parse::<FamilyKind>().unwrap(), FamilyKind::CoshK);
    }

    #[test]
    fn family_convexity_matches_validator() {
        let g = grid();
        let cases = [
            ProfileFamily::Poly2 { c: 0.5 },
            ProfileFamily::Poly2 { c: -1.0 },
            ProfileFamily::Poly4 { c1: 1.0, c2: 2.0 },
            ProfileFamily::Poly4 { c1: 0.0, c2: 2.0 },
            ProfileFamily::Poly4 { c1: -1.0, c2: 0.5 },
            ProfileFamily::CoshK { c: 2.0, k: 3.0 },
            ProfileFamily::CoshK { c: -2.0, k: 3.0 },
        ];
        for fam in cases {
            let a = make_initial_profile(&g, fam).unwrap();
            assert_eq!(validate_hypotheses(&a).all_pass(), fam.is_convex(), "{fam:?}");
        }
    }

    #[test]
    fn fuzz_examples() {
        let s = fuzz_convexity_lemma(1, 1000).unwrap();
        assert_eq!(s.violations, 0);
        assert_eq!(s.hypothesis_misses, 0);
        assert!(s.max_ratio <= 1.0 + 1e-9);
        assert!(s.min_f_at_1 > 0.0);
        assert!(fuzz_convexity_lemma(1, 0).is_err());
        assert_eq!(fuzz_convexity_lemma(7, 50).unwrap(), fuzz_convexity_lemma(7, 50).unwrap());
        assert_ne!(fuzz_convexity_lemma(7, 50).unwrap(), fuzz_convexity_lemma(8, 50).unwrap());
    }

    #[test]
    fn near_extremal_ratio_approaches_one() {
        let g = grid();
        for eps in [0.01, 0.003, 0.0] {
            let f = Profile::from_fn(&g, |y| y - 0.5 + eps * (y * y - 1.0 / 3.0)).unwrap();
            assert!(check_convexity_lemma(&f).ratio() >= 0.99, "eps = {eps}");
        }
    }

    #[test]
    fn report_serialization() {
        let g = grid();
        let f = Profile::from_fn(&g, |y| y * y - 1.0 / 3.0).unwrap();
        let r = check_convexity_lemma(&f);
        assert_eq!(r.to_csv().split(',').count(), LemmaReport::CSV_HEADER.split(',').count());
        let text = r.to_string();
        assert!(text.contains("0.088889 ≤ 0.148148"), "{text}");
        let h = validate_hypotheses(&f);
        assert_eq!(h.to_csv().split(',').count(), HypothesisReport::CSV_HEADER.split(',').count());
        assert!(h.to_string().contains("strictly convex  pass"));
    }
}
