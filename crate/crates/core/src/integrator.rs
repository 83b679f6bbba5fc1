//! Adaptive Dormand–Prince 5(4) integration of the reduced system up to the
//! singularity, with blowup detection and blowup-time extrapolation.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{build_grid, integrate_values, GridSpec, Profile, MIN_NODES};
use crate::lemmas::validate_hypotheses;
use crate::reduced::{diagnostics_of, DiagnosticsRow, PressureForm, ReducedState, ReducedSystem};

/// Number of tail points used by [`estimate_blowup_time`].
pub const FIT_WINDOW: usize = 20;
/// Fewest points accepted by [`estimate_blowup_time`].
pub const MIN_FIT_POINTS: usize = 8;
/// `|r|` below this marks a blowup-time estimate as low confidence.
pub const FIT_CORRELATION: f64 = 0.999;

/// Run parameters for [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_nodes: usize,
    pub t_max: f64,
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
    pub dt_min: f64,
    pub blowup_threshold: f64,
    pub mean_tolerance: f64,
    /// Emit one diagnostics row every `output_stride` accepted steps.
    pub output_stride: usize,
    /// Subtract `∫a` after every accepted step.
    pub project_mean: bool,
    pub pressure: PressureForm,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_nodes: 257,
            t_max: 10.0,
            rtol: 1e-10,
            atol: 1e-12,
            dt_init: 1e-4,
            dt_min: 1e-12,
            blowup_threshold: 1e6,
            mean_tolerance: crate::reduced::DEFAULT_MEAN_TOLERANCE,
            output_stride: 1,
            project_mean: true,
            pressure: PressureForm::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_nodes < MIN_NODES || self.n_nodes.is_multiple_of(2) {
            return bad(format!(
                "n_nodes must be odd and at least {MIN_NODES}, got {}",
                self.n_nodes
            ));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max must be positive, got {}", self.t_max));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be positive".into());
        }
        if !(self.dt_min > 0.0 && self.dt_min < self.dt_init) {
            return bad(format!(
                "need 0 < dt_min < dt_init, got dt_min = {}, dt_init = {}",
                self.dt_min, self.dt_init
            ));
        }
        if !(self.blowup_threshold > 0.0) {
            return bad("blowup_threshold must be positive".into());
        }
        if !(self.mean_tolerance > 0.0) {
            return bad("mean_tolerance must be positive".into());
        }
        if self.output_stride == 0 {
            return bad("output_stride must be at least 1".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.validate()?;
        build_grid(self.n_nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ReachedTMax,
    BlowupDetected,
    ConstraintViolation,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ReachedTMax => "reached_t_max",
            Termination::BlowupDetected => "blowup_detected",
            Termination::ConstraintViolation => "constraint_violation",
        }
    }
}

/// Which signal declared the blowup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupSignal {
    /// `sup|a|` exceeded the configured threshold.
    Threshold,
    /// The error controller pushed the step below `dt_min`.
    StepCollapse,
}

impl BlowupSignal {
    pub fn as_str(self) -> &'static str {
        match self {
            BlowupSignal::Threshold => "sup_norm_threshold",
            BlowupSignal::StepCollapse => "step_size_collapse",
        }
    }
}

/// Extrapolated zero of `1/a(t, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupEstimate {
    pub time: f64,
    /// Pearson correlation of the reciprocal fit.
    pub correlation: f64,
    pub low_confidence: bool,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub rows: Vec<DiagnosticsRow>,
    pub termination: Termination,
    pub blowup_signal: Option<BlowupSignal>,
    pub final_state: ReducedState,
    pub estimated_blowup_time: Option<BlowupEstimate>,
    /// `a₀(1)` when the initial data satisfies every blowup hypothesis.
    pub riccati_a0: Option<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub dense: DenseOutput,
}

impl SimResult {
    /// Interpolated state at `t` within the integrated range.
    pub fn state_at(&self, t: f64) -> Option<ReducedState> {
        self.dense
            .profile_at(t)
            .map(|a| ReducedState::new(t, a))
    }

    pub fn t_end(&self) -> f64 {
        self.final_state.time
    }
}

/// One accepted step's continuous extension.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    // five coefficient vectors laid out back to back
    coeffs: Vec<f64>,
}

/// Fourth-order continuous extension of every accepted step.
#[derive(Debug, Clone)]
pub struct DenseOutput {
    grid: GridSpec,
    segments: Vec<Segment>,
    initial: Vec<f64>,
}

impl DenseOutput {
    fn new(grid: &GridSpec, initial: Vec<f64>) -> Self {
        Self {
            grid: grid.clone(),
            segments: Vec::new(),
            initial,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Covered time interval.
    pub fn span(&self) -> (f64, f64) {
        match (self.segments.first(), self.segments.last()) {
            (Some(a), Some(b)) => (a.t0, b.t0 + b.h),
            _ => (0.0, 0.0),
        }
    }

    /// Write `a(t, ·)` into `out`; `None` outside the covered interval.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Option<()> {
        let (t_lo, t_hi) = self.span();
        if self.segments.is_empty() {
            if t == t_lo {
                out.copy_from_slice(&self.initial);
                return Some(());
            }
            return None;
        }
        if !(t >= t_lo && t <= t_hi) {
            return None;
        }
        let idx = self
            .segments
            .partition_point(|s| s.t0 + s.h < t)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let n = out.len();
        let s = ((t - seg.t0) / seg.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let c = &seg.coeffs;
        for i in 0..n {
            let r = |k: usize| c[k * n + i];
            out[i] = r(0) + s * (r(1) + s1 * (r(2) + s * (r(3) + s1 * r(4))));
        }
        Some(())
    }

    pub fn profile_at(&self, t: f64) -> Option<Profile> {
        let mut out = vec![0.0; self.grid.n_nodes()];
        self.eval_into(t, &mut out)?;
        Profile::new(&self.grid, out).ok()
    }
}

/// The Riccati comparison `a(t, 1) ≥ 3 a₀(1) / (3 − a₀(1) t)`.
pub fn riccati_lower_bound(a0_at_1: f64, t: f64) -> Result<f64> {
    if !(a0_at_1 > 0.0) {
        return Err(Error::Domain(format!("a0(1) = {a0_at_1} must be positive")));
    }
    let horizon = 3.0 / a0_at_1;
    if t >= horizon {
        return Err(Error::Domain(format!(
            "t = {t} is past the bound's blowup time {horizon}"
        )));
    }
    Ok(3.0 * a0_at_1 / (3.0 - a0_at_1 * t))
}

/// Fit `1/a(t,1)` linearly in `t` over the last [`FIT_WINDOW`] points and
/// return its zero crossing.
pub fn estimate_blowup_time(series: &[(f64, f64)]) -> Result<BlowupEstimate> {
    estimate_blowup_time_with_window(series, FIT_WINDOW)
}

pub fn estimate_blowup_time_with_window(
    series: &[(f64, f64)],
    window: usize,
) -> Result<BlowupEstimate> {
    if series.len() < MIN_FIT_POINTS {
        return Err(Error::NoBlowupEvidence(format!(
            "need at least {MIN_FIT_POINTS} points, got {}",
            series.len()
        )));
    }
    let tail = &series[series.len() - window.clamp(MIN_FIT_POINTS, series.len())..];
    if tail.iter().any(|&(_, a)| !(a > 0.0)) {
        return Err(Error::NoBlowupEvidence("non-positive a(t,1) in fit window".into()));
    }
    if tail.windows(2).any(|w| !(w[1].1 > w[0].1 && w[1].0 > w[0].0)) {
        return Err(Error::NoBlowupEvidence("a(t,1) not increasing over fit window".into()));
    }
    let m = tail.len() as f64;
    let (mt, mr) = tail
        .iter()
        .fold((0.0, 0.0), |(st, sr), &(t, a)| (st + t / m, sr + 1.0 / a / m));
    let (mut stt, mut srr, mut str_) = (0.0, 0.0, 0.0);
    for &(t, a) in tail {
        let (dt, dr) = (t - mt, 1.0 / a - mr);
        stt += dt * dt;
        srr += dr * dr;
        str_ += dt * dr;
    }
    let slope = str_ / stt;
    if !(slope < 0.0) {
        return Err(Error::NoBlowupEvidence("1/a(t,1) is not decreasing".into()));
    }
    let correlation = if srr > 0.0 { str_ / (stt * srr).sqrt() } else { -1.0 };
    let time = mt - mr / slope;
    Ok(BlowupEstimate {
        time,
        correlation,
        low_confidence: correlation.abs() < FIT_CORRELATION,
    })
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer–Nørsett–Wanner, dopri5).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

/// A right-hand side `y' = f(t, y)` for the Dormand–Prince stepper.
pub(crate) trait OdeRhs {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
}

impl OdeRhs for ReducedSystem {
    fn eval(&mut self, _t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_into(y, out)
    }
}

pub(crate) struct StepOutcome {
    pub err: f64,
    pub y_new: Vec<f64>,
}

/// Stage storage for one Dormand–Prince step.
pub(crate) struct Stepper {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    fsal_valid: bool,
}

impl Stepper {
    pub fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            fsal_valid: false,
        }
    }

    /// Attempt a step of size `h` from `(t, y)`.
    pub fn attempt(
        &mut self,
        f: &mut impl OdeRhs,
        t: f64,
        y: &[f64],
        h: f64,
        rtol: f64,
        atol: f64,
    ) -> Result<StepOutcome> {
        let n = y.len();
        if !self.fsal_valid {
            let (k0, _) = self.k.split_at_mut(1);
            f.eval(t, y, &mut k0[0])?;
            self.fsal_valid = true;
        }
        let combos: [(f64, &[f64]); 5] = [
            (C2, &[A21]),
            (C3, &[A31, A32]),
            (C4, &[A41, A42, A43]),
            (C5, &[A51, A52, A53, A54]),
            (1.0, &[A61, A62, A63, A64, A65]),
        ];
        for (stage, (c, coeffs)) in combos.iter().enumerate() {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, &a) in coeffs.iter().enumerate() {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            check_finite(&self.tmp)?;
            let (_, rest) = self.k.split_at_mut(stage + 1);
            f.eval(t + c * h, &self.tmp, &mut rest[0])?;
        }
        let mut y_new = vec![0.0; n];
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * self.k[0][i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        check_finite(&y_new)?;
        {
            let (_, rest) = self.k.split_at_mut(6);
            f.eval(t + h, &y_new, &mut rest[0])?;
        }
        let mut sum = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            sum += (e / sc).powi(2);
        }
        Ok(StepOutcome {
            err: (sum / n as f64).sqrt(),
            y_new,
        })
    }

    /// Dense-output coefficients of the step just attempted; call before
    /// [`Stepper::accept`].
    pub fn dense_coeffs(&self, y: &[f64], y_new: &[f64], h: f64) -> Vec<f64> {
        let n = y.len();
        let mut c = vec![0.0; 5 * n];
        let k = &self.k;
        for i in 0..n {
            let diff = y_new[i] - y[i];
            let bspl = h * k[0][i] - diff;
            c[i] = y[i];
            c[n + i] = diff;
            c[2 * n + i] = bspl;
            c[3 * n + i] = diff - h * k[6][i] - bspl;
            c[4 * n + i] = h
                * (D1 * k[0][i]
                    + D3 * k[2][i]
                    + D4 * k[3][i]
                    + D5 * k[4][i]
                    + D6 * k[5][i]
                    + D7 * k[6][i]);
        }
        c
    }

    /// First-same-as-last: the final stage becomes the next first stage.
    pub fn accept(&mut self) {
        self.k.swap(0, 6);
    }

    /// Forget the cached first stage, e.g. after the state was modified.
    pub fn invalidate(&mut self) {
        self.fsal_valid = false;
    }
}

fn check_finite(y: &[f64]) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidProfile("non-finite value during step".into()))
    }
}

pub(crate) fn grow_factor(err: f64) -> f64 {
    if err == 0.0 {
        MAX_FACTOR
    } else {
        (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
    }
}

/// Integrate the reduced system from `a0` until `t_max`, blowup, or a
/// broken constraint.
pub fn simulate(config: &SimConfig, a0: &Profile) -> Result<SimResult> {
    let grid = config.grid()?;
    if a0.grid().n_nodes() != grid.n_nodes() {
        return Err(Error::InvalidConfig(format!(
            "initial profile has {} nodes, config expects {}",
            a0.grid().n_nodes(),
            grid.n_nodes()
        )));
    }
    let h_y = grid.spacing();
    let mean0 = integrate_values(a0.values(), h_y);
    if mean0.abs() > config.mean_tolerance {
        return Err(Error::ConstraintViolation {
            residual: mean0.abs(),
            limit: config.mean_tolerance,
        });
    }

    let hypotheses = validate_hypotheses(a0);
    let riccati_a0 = hypotheses.all_pass().then_some(hypotheses.a0_at_1);
    let bound_at = |t: f64| riccati_a0.and_then(|a1| riccati_lower_bound(a1, t).ok());

    let mut system = ReducedSystem::new(&grid, config.mean_tolerance).with_pressure(config.pressure);
    let mut stepper = Stepper::new(grid.n_nodes());
    let mut dense = DenseOutput::new(&grid, a0.values().to_vec());

    let mut t = 0.0;
    let mut y = a0.values().to_vec();
    let mut h = config.dt_init.min(config.t_max);
    let mut rows = Vec::new();
    let mut tail: VecDeque<(f64, f64)> = VecDeque::with_capacity(FIT_WINDOW + 1);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut last_dt = 0.0;

    let make_row = |t: f64, y: &[f64], dt: f64| {
        let state = ReducedState::new(t, Profile::from_trusted(&grid, y.to_vec()));
        let mut row = diagnostics_of(&state);
        row.riccati_bound = bound_at(t);
        row.dt_accepted = dt;
        row
    };

    rows.push(make_row(t, &y, 0.0));
    let mut last_row_t = t;
    tail.push_back((t, y[y.len() - 1]));

    let (termination, signal) = loop {
        if t >= config.t_max {
            break (Termination::ReachedTMax, None);
        }
        if y.iter().any(|v| v.abs() > config.blowup_threshold) {
            break (Termination::BlowupDetected, Some(BlowupSignal::Threshold));
        }
        if h < config.dt_min {
            break (Termination::BlowupDetected, Some(BlowupSignal::StepCollapse));
        }
        let h_try = h.min(config.t_max - t);
        let outcome = match stepper.attempt(&mut system, t, &y, h_try, config.rtol, config.atol) {
            Ok(o) => o,
            Err(_) => break (Termination::ConstraintViolation, None),
        };
        if outcome.err <= 1.0 {
            let coeffs = stepper.dense_coeffs(&y, &outcome.y_new, h_try);
            dense.segments.push(Segment {
                t0: t,
                h: h_try,
                coeffs,
            });
            stepper.accept();
            t = if h_try == config.t_max - t { config.t_max } else { t + h_try };
            y = outcome.y_new;
            if config.project_mean {
                let mean = integrate_values(&y, h_y);
                if mean != 0.0 {
                    y.iter_mut().for_each(|v| *v -= mean);
                    stepper.invalidate();
                }
            }
            accepted += 1;
            last_dt = h_try;
            if tail.len() == FIT_WINDOW {
                tail.pop_front();
            }
            tail.push_back((t, y[y.len() - 1]));
            if accepted.is_multiple_of(config.output_stride) {
                rows.push(make_row(t, &y, h_try));
                last_row_t = t;
            }
            if h_try < config.dt_min && t < config.t_max {
                break (Termination::BlowupDetected, Some(BlowupSignal::StepCollapse));
            }
            h = h_try * grow_factor(outcome.err);
        } else {
            rejected += 1;
            h = h_try * grow_factor(outcome.err).min(1.0);
        }
    };

    if last_row_t != t {
        rows.push(make_row(t, &y, last_dt));
    }

    let series: Vec<(f64, f64)> = tail.into_iter().collect();
    let estimated_blowup_time = match termination {
        Termination::BlowupDetected => Some(estimate_blowup_time(&series).unwrap_or(BlowupEstimate {
            time: t,
            correlation: 0.0,
            low_confidence: true,
        })),
        _ => None,
    };

    Ok(SimResult {
        rows,
        termination,
        blowup_signal: signal,
        final_state: ReducedState::new(t, Profile::from_trusted(&grid, y)),
        estimated_blowup_time,
        riccati_a0,
        steps_accepted: accepted,
        steps_rejected: rejected,
        dense,
    })
}
