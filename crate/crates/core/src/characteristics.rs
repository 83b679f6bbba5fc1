//! Particle paths `dY/dt = v(t, Y)` of the reduced flow.
//!
//! Along such a path `(∂_t + v ∂_y) a_yy = a_y² ≥ 0`, so the curvature seen
//! by a particle never decreases while the solution is smooth. Paths are
//! integrated with the same Dormand–Prince pair as the profile, reading `a`
//! from the run's dense output and interpolating in `y` at fourth order.

use crate::error::{Error, Result};
use crate::grid::{
    cumulative_values, interpolate_values, second_derivative_into, GridSpec,
};
use crate::integrator::{grow_factor, OdeRhs, SimResult, Stepper};
use crate::reduced::fmt_f64;

/// Relative slack allowed by [`CharacteristicPath::is_monotone`].
pub const PATH_TOLERANCE: f64 = 1e-4;

/// A traced characteristic `Y(t)` and the curvature `a_yy(t, Y(t))` on it.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPath {
    pub y0: f64,
    pub times: Vec<f64>,
    pub y_values: Vec<f64>,
    pub a_yy_along: Vec<f64>,
}

impl CharacteristicPath {
    /// Largest relative drop of `a_yy` below its running maximum.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut defect: f64 = 0.0;
        for &c in &self.a_yy_along {
            best = best.max(c);
            if best > c {
                defect = defect.max((best - c) / best.abs().max(f64::MIN_POSITIVE));
            }
        }
        defect
    }

    pub fn is_monotone(&self, tolerance: f64) -> bool {
        self.monotonicity_defect() <= tolerance
    }

    /// Interpolated `Y(t)` between recorded samples (linear).
    pub fn y_at(&self, t: f64) -> Option<f64> {
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return (self.times.first() == Some(&t)).then(|| self.y_values[0]);
        }
        if i == self.times.len() {
            return None;
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        Some(self.y_values[i - 1] * (1.0 - w) + self.y_values[i] * w)
    }

    pub const CSV_HEADER: &'static str = "t,Y,a_yy";

    /// CSV text with header, LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(self.times[i]),
                fmt_f64(self.y_values[i]),
                fmt_f64(self.a_yy_along[i])
            ));
        }
        out
    }
}

/// Samples `v` and `a_yy` from a run's dense output.
struct ReducedFlow<'a> {
    sim: &'a SimResult,
    grid: GridSpec,
    a: Vec<f64>,
    ayy: Vec<f64>,
}

impl<'a> ReducedFlow<'a> {
    fn new(sim: &'a SimResult) -> Self {
        let grid = sim.dense.grid().clone();
        let n = grid.n_nodes();
        Self {
            sim,
            grid,
            a: vec![0.0; n],
            ayy: vec![0.0; n],
        }
    }

    fn load(&mut self, t: f64) -> Result<()> {
        self.sim
            .dense
            .eval_into(t, &mut self.a)
            .ok_or_else(|| Error::Interpolation(format!("t = {t} outside the simulated interval")))
    }

    fn velocity(&mut self, t: f64, y: f64) -> Result<f64> {
        self.load(t)?;
        let v = cumulative_values(&self.a, self.grid.spacing());
        interpolate_values(&v, self.grid.spacing(), y)
    }

    fn curvature(&mut self, t: f64, y: f64) -> Result<f64> {
        self.load(t)?;
        second_derivative_into(&self.a, self.grid.spacing(), &mut self.ayy);
        interpolate_values(&self.ayy, self.grid.spacing(), y)
    }
}

impl OdeRhs for ReducedFlow<'_> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.velocity(t, y[0])?;
        Ok(())
    }
}

/// Options for [`trace_reduced_characteristic_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions {
    /// Stop here, or at the end of the run if that is earlier.
    pub t_end: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub dt_init: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            t_end: None,
            rtol: 1e-10,
            atol: 1e-12,
            dt_init: 1e-4,
        }
    }
}

pub fn trace_reduced_characteristic(sim: &SimResult, y0: f64) -> Result<CharacteristicPath> {
    trace_reduced_characteristic_with(sim, y0, &TraceOptions::default())
}

pub fn trace_reduced_characteristic_with(
    sim: &SimResult,
    y0: f64,
    opts: &TraceOptions,
) -> Result<CharacteristicPath> {
    if !(0.0..=1.0).contains(&y0) {
        return Err(Error::Domain(format!("y0 = {y0} lies outside [0, 1]")));
    }
    let (t_start, t_stop) = sim.dense.span();
    let t_end = opts.t_end.map_or(t_stop, |t| t.min(t_stop));
    let mut flow = ReducedFlow::new(sim);
    let mut stepper = Stepper::new(1);

    let mut path = CharacteristicPath {
        y0,
        times: vec![t_start],
        y_values: vec![y0],
        a_yy_along: vec![flow.curvature(t_start, y0)?],
    };
    if t_end <= t_start {
        return Ok(path);
    }

    let mut t = t_start;
    let mut y = vec![y0];
    let mut h = opts.dt_init.min(t_end - t);
    while t < t_end {
        let h_try = h.min(t_end - t);
        let outcome = stepper.attempt(&mut flow, t, &y, h_try, opts.rtol, opts.atol)?;
        if outcome.err <= 1.0 {
            stepper.accept();
            t = if h_try == t_end - t { t_end } else { t + h_try };
            let y_new = outcome.y_new[0];
            if !(-1e-9..=1.0 + 1e-9).contains(&y_new) {
                return Err(Error::Interpolation(format!(
                    "characteristic left [0, 1]: Y({t}) = {y_new}"
                )));
            }
            y[0] = y_new.clamp(0.0, 1.0);
            path.times.push(t);
            path.y_values.push(y[0]);
            path.a_yy_along.push(flow.curvature(t, y[0])?);
            h = h_try * grow_factor(outcome.err);
        } else {
            h = h_try * grow_factor(outcome.err).min(1.0);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Interpolation(format!("step size collapsed at t = {t}")));
        }
    }
    Ok(path)
}

/// Time at which `sup|a|` first reaches `level` in a run's rows, if it does.
pub fn time_at_amplitude(sim: &SimResult, level: f64) -> Option<f64> {
    sim.rows.iter().find(|r| r.sup_abs_a >= level).map(|r| r.t)
}
