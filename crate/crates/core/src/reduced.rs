//! The reduced evolution on the frozen line `x = 0`:
//!
//! ```text
//! a_t + v a_y = a² − 2 ∫₀¹ a² dy,    v_y = a,    v(0) = v(1) = 0,
//! ```
//!
//! where `a = −u_x(t, 0, y)`. The velocity `v` is rebuilt from `a` on every
//! evaluation, which pins `v(0) = 0` exactly; `v(1) = ∫a` then measures how
//! far the mean-zero constraint has drifted.
//!
//! The nonlocal term is `−p_xx` on the frozen line. In the continuum
//! `∫(a² − v a_y) = 2∫a²`; [`PressureForm::Constraint`] uses the left-hand
//! side under the discrete quadrature, which makes `∫a` an exact invariant
//! of the semi-discrete system. [`PressureForm::Integral`] uses `2∫a²`
//! directly and conserves the mean only to truncation error.

use crate::error::{Error, Result};
use crate::grid::{
    cumulative_values, first_derivative_into, integrate, integrate_values,
    second_derivative_into, GridSpec, Profile,
};

/// Default tolerance on `|∫a|`.
pub const DEFAULT_MEAN_TOLERANCE: f64 = 1e-8;

/// Nodes skipped at each wall when taking the interior minimum of `a_yy`.
pub const INTERIOR_SKIP: usize = 2;

/// How the pressure term `−p_xx` is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PressureForm {
    /// `∫_h (a² − v a_y)`: the multiplier that keeps `∫_h a` fixed.
    #[default]
    Constraint,
    /// `2 ∫_h a²`.
    Integral,
}

/// A snapshot `(t, a(t, ·))` of the reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub time: f64,
    pub a: Profile,
}

impl ReducedState {
    pub fn new(time: f64, a: Profile) -> Self {
        Self { time, a }
    }

    /// Mean residual `∫a`, which the continuum flow keeps at zero.
    pub fn mean(&self) -> f64 {
        integrate(&self.a)
    }
}

/// Evaluates the reduced right-hand side with reusable scratch buffers.
///
/// The tolerance on `|v(1)|` is `10 · mean_tolerance`, scaled by
/// `max(1, sup|a|)` so that a fixed relative rounding level near the
/// singularity does not trip it.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    grid: GridSpec,
    mean_tolerance: f64,
    pressure: PressureForm,
    v: Vec<f64>,
    ay: Vec<f64>,
    sq: Vec<f64>,
}

impl ReducedSystem {
    pub fn new(grid: &GridSpec, mean_tolerance: f64) -> Self {
        let n = grid.n_nodes();
        Self {
            grid: grid.clone(),
            mean_tolerance,
            pressure: PressureForm::default(),
            v: vec![0.0; n],
            ay: vec![0.0; n],
            sq: vec![0.0; n],
        }
    }

    pub fn with_pressure(mut self, pressure: PressureForm) -> Self {
        self.pressure = pressure;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn pressure(&self) -> PressureForm {
        self.pressure
    }

    pub fn mean_tolerance(&self) -> f64 {
        self.mean_tolerance
    }

    pub(crate) fn velocity_limit(&self, a: &[f64]) -> f64 {
        let sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        10.0 * self.mean_tolerance * sup.max(1.0)
    }

    /// Writes `−v a_y + a² + p_xx` into `out`.
    pub fn eval_into(&mut self, a: &[f64], out: &mut [f64]) -> Result<()> {
        let h = self.grid.spacing();
        self.v = cumulative_values(a, h);
        let top = self.v[self.v.len() - 1];
        let limit = self.velocity_limit(a);
        if !(top.abs() <= limit) {
            return Err(Error::ConstraintViolation {
                residual: top.abs(),
                limit,
            });
        }
        first_derivative_into(a, h, &mut self.ay);
        for (s, &ai) in self.sq.iter_mut().zip(a) {
            *s = ai * ai;
        }
        for i in 0..a.len() {
            out[i] = self.sq[i] - self.v[i] * self.ay[i];
        }
        let pressure = match self.pressure {
            PressureForm::Constraint => integrate_values(out, h),
            PressureForm::Integral => 2.0 * integrate_values(&self.sq, h),
        };
        out.iter_mut().for_each(|r| *r -= pressure);
        Ok(())
    }
}

/// `v(y) = ∫₀ʸ a`, checking that `v(1)` vanishes.
pub fn reconstruct_velocity(a: &Profile, mean_tolerance: f64) -> Result<Profile> {
    let v = cumulative_values(a.values(), a.grid().spacing());
    let top = v[v.len() - 1];
    let limit = 10.0 * mean_tolerance;
    if top.abs() > limit {
        return Err(Error::ConstraintViolation {
            residual: top.abs(),
            limit,
        });
    }
    Ok(Profile::from_trusted(a.grid(), v))
}

/// Right-hand side `−v a_y + a² − 2∫a²` of the reduced equation, with the
/// pressure term in its constraint-preserving form.
pub fn rhs(a: &Profile, mean_tolerance: f64) -> Result<Profile> {
    rhs_with(a, mean_tolerance, PressureForm::default())
}

pub fn rhs_with(a: &Profile, mean_tolerance: f64, pressure: PressureForm) -> Result<Profile> {
    reconstruct_velocity(a, mean_tolerance)?;
    let mut system = ReducedSystem::new(a.grid(), mean_tolerance).with_pressure(pressure);
    let mut out = vec![0.0; a.values().len()];
    system.eval_into(a.values(), &mut out)?;
    Profile::new(a.grid(), out)
}

/// `p_xx` on the frozen line, where `u ≡ 0` reduces `−p_xx = 2∫(u u_xx + u_x²)`
/// to `2∫a²`.
pub fn pressure_curvature(a: &Profile) -> f64 {
    let sq: Vec<f64> = a.values().iter().map(|v| v * v).collect();
    -2.0 * integrate_values(&sq, a.grid().spacing())
}

/// Per-snapshot quantities monitored along a run.
///
/// `riccati_bound` and `dt_accepted` are filled in by the integrator;
/// `max_abs_ay` and `sup_abs_a` are not part of the CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub a_at_1: f64,
    pub mean_a: f64,
    pub int_a_sq: f64,
    pub int_a_cubed: f64,
    pub ay_at_0: f64,
    pub min_ayy_interior: f64,
    pub pxx_at_0: f64,
    pub riccati_bound: Option<f64>,
    pub dt_accepted: f64,
    pub max_abs_ay: f64,
    pub sup_abs_a: f64,
}

impl DiagnosticsRow {
    pub const CSV_HEADER: &'static str = "t,a_at_1,mean_a,int_a_sq,int_a_cubed,ay_at_0,\
min_ayy_interior,pxx_at_0,riccati_bound,dt_accepted";

    /// One CSV line (no newline), 17 significant digits per number.
    pub fn to_csv(&self) -> String {
        let bound = self.riccati_bound.map(fmt_f64).unwrap_or_default();
        [
            fmt_f64(self.t),
            fmt_f64(self.a_at_1),
            fmt_f64(self.mean_a),
            fmt_f64(self.int_a_sq),
            fmt_f64(self.int_a_cubed),
            fmt_f64(self.ay_at_0),
            fmt_f64(self.min_ayy_interior),
            fmt_f64(self.pxx_at_0),
            bound,
            fmt_f64(self.dt_accepted),
        ]
        .join(",")
    }
}

/// Round-trip exact formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Smallest `a_yy` away from the wall closures.
pub fn interior_min(ayy: &[f64]) -> f64 {
    ayy[INTERIOR_SKIP..ayy.len() - INTERIOR_SKIP]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn diagnostics_of(state: &ReducedState) -> DiagnosticsRow {
    let a = state.a.values();
    let grid = state.a.grid();
    let h = grid.spacing();
    let n = a.len();
    let mut ay = vec![0.0; n];
    let mut ayy = vec![0.0; n];
    first_derivative_into(a, h, &mut ay);
    second_derivative_into(a, h, &mut ayy);
    let sq: Vec<f64> = a.iter().map(|v| v * v).collect();
    let cube: Vec<f64> = a.iter().map(|v| v * v * v).collect();
    let int_a_sq = integrate_values(&sq, h);
    DiagnosticsRow {
        t: state.time,
        a_at_1: state.a.last(),
        mean_a: integrate_values(a, h),
        int_a_sq,
        int_a_cubed: integrate_values(&cube, h),
        ay_at_0: ay[0],
        min_ayy_interior: interior_min(&ayy),
        pxx_at_0: -2.0 * int_a_sq,
        riccati_bound: None,
        dt_accepted: 0.0,
        max_abs_ay: ay.iter().fold(0.0, |m, v| m.max(v.abs())),
        sup_abs_a: state.a.sup_norm(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    const TOL: f64 = DEFAULT_MEAN_TOLERANCE;

    fn profile(n: usize, f: impl Fn(f64) -> f64) -> Profile {
        Profile::from_fn(&build_grid(n).unwrap(), f).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let v = reconstruct_velocity(&profile(257, |_| 0.0), TOL).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));

        let v = reconstruct_velocity(&profile(257, |y| (PI * y).cos()), TOL).unwrap();
        assert_eq!(v.first(), 0.0);
        assert!((v.values()[128] - 1.0 / PI).abs() < 1e-8);

        let v = reconstruct_velocity(&profile(257, |y| y - 0.5), TOL).unwrap();
        assert!(v.last().abs() < 1e-12);
        for (y, x) in v.grid().nodes().iter().zip(v.values()) {
            assert!((x - (y * y / 2.0 - y / 2.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn velocity_rejects_drifted_mean() {
        let err = reconstruct_velocity(&profile(65, |y| y), TOL).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation { .. }));
        assert!(rhs(&profile(65, |y| y * y), TOL).is_err());
    }

    #[test]
    fn rhs_examples() {
        for form in [PressureForm::Constraint, PressureForm::Integral] {
            assert_eq!(rhs_with(&profile(257, |_| 0.0), TOL, form).unwrap().sup_norm(), 0.0);
            let r = rhs_with(&profile(257, |y| (PI * y).cos()), TOL, form).unwrap();
            assert!(r.sup_norm() <= 1e-6, "{form:?}: {}", r.sup_norm());
            let r = rhs_with(&profile(257, |y| y - 0.5), TOL, form).unwrap();
            assert!((r.first() - 1.0 / 12.0).abs() < 1e-8);
            for (y, x) in r.grid().nodes().iter().zip(r.values()) {
                assert!((x - (y * y / 2.0 - y / 2.0 + 1.0 / 12.0)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pressure_forms_agree_to_truncation_error() {
        let err = |n: usize| {
            let a = profile(n, |y| 2.0 * (y * y - 1.0 / 3.0) + 0.5 * ((PI * y).cos()));
            let c = rhs_with(&a, TOL, PressureForm::Constraint).unwrap();
            let i = rhs_with(&a, TOL, PressureForm::Integral).unwrap();
            (c.first() - i.first()).abs()
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e1 < 1e-5 && e1 / e2 > 12.0, "{e1} {e2}");
    }

    #[test]
    fn constraint_form_conserves_the_mean_exactly() {
        let a = profile(129, |y| (y * y - 1.0 / 3.0) * 3.0 + 0.2 * (2.0 * PI * y).sin() - 0.0);
        let mean = integrate(&a);
        let a = a.map(|v| v - mean).unwrap();
        let r = rhs(&a, TOL).unwrap();
        assert!(integrate(&r).abs() < 1e-13);
    }

    #[test]
    fn pressure_curvature_examples() {
        assert_eq!(pressure_curvature(&profile(257, |_| 0.0)), 0.0);
        let p = pressure_curvature(&profile(257, |y| (PI * y).cos()));
        assert!((p + 1.0).abs() < 1e-10);
        let p = pressure_curvature(&profile(257, |y| 3.0 * (y * y - 1.0 / 3.0)));
        assert!((p + 1.6).abs() < 1e-10);
    }

    #[test]
    fn diagnostics_examples() {
        let z = diagnostics_of(&ReducedState::new(0.7, profile(33, |_| 0.0)));
        assert_eq!(z.t, 0.7);
        for x in [z.a_at_1, z.mean_a, z.int_a_sq, z.int_a_cubed, z.ay_at_0, z.min_ayy_interior, z.pxx_at_0] {
            assert_eq!(x, 0.0);
        }

        let d = diagnostics_of(&ReducedState::new(0.0, profile(257, |y| 3.0 * (y * y - 1.0 / 3.0))));
        assert!((d.a_at_1 - 2.0).abs() < 1e-14);
        assert!((d.int_a_sq - 0.8).abs() < 1e-10);
        assert!(d.ay_at_0.abs() < 1e-8);
        assert!((d.min_ayy_interior - 6.0).abs() < 1e-6);
        assert!((d.pxx_at_0 + 1.6).abs() < 1e-10);

        // The minimum sits at the first node past the excluded wall closures.
        let d = diagnostics_of(&ReducedState::new(0.0, profile(257, |y| (PI * y).cos())));
        let y2 = 2.0 / 256.0;
        assert!((d.min_ayy_interior + PI * PI * (PI * y2).cos()).abs() < 1e-4);
        assert!(d.min_ayy_interior < 0.0);
    }

    #[test]
    fn csv_row_layout() {
        let mut d = diagnostics_of(&ReducedState::new(0.0, profile(9, |_| 0.0)));
        assert_eq!(d.to_csv().split(',').count(), 10);
        assert_eq!(d.to_csv().split(',').nth(8), Some(""));
        d.riccati_bound = Some(2.0);
        assert_eq!(d.to_csv().split(',').nth(8), Some("2.0000000000000000e0"));
        assert_eq!(DiagnosticsRow::CSV_HEADER.split(',').count(), 10);
    }

    #[test]
    fn formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
