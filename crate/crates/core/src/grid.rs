//! Uniform grids on `[0, 1]`, sampled profiles, quadrature and finite
//! differences in `y`.
//!
//! Everything here is at least fourth order: end-corrected Simpson quadrature,
//! five-point central differences in the interior and one-sided closures at
//! the walls, and four-point Lagrange interpolation between nodes.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Smallest grid with room for the one-sided second-derivative closure.
pub const MIN_NODES: usize = 9;

/// Uniform grid `y_i = i / (n - 1)` on `[0, 1]`.
///
/// Cloning is cheap; the node array is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n_nodes: usize,
    spacing: f64,
    nodes: Arc<[f64]>,
}

impl GridSpec {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Grid with an odd node count, as composite Simpson needs.
    pub fn is_odd(&self) -> bool {
        self.n_nodes % 2 == 1
    }
}

/// Build the uniform grid with `n_nodes` points.
pub fn build_grid(n_nodes: usize) -> Result<GridSpec> {
    if n_nodes < MIN_NODES {
        return Err(Error::InvalidGrid(format!(
            "need at least {MIN_NODES} nodes, got {n_nodes}"
        )));
    }
    let intervals = (n_nodes - 1) as f64;
    // i / (n-1) rather than i * h keeps the last node at exactly 1 and the
    // midpoint of an odd grid at exactly 0.5.
    let nodes: Arc<[f64]> = (0..n_nodes).map(|i| i as f64 / intervals).collect();
    Ok(GridSpec {
        n_nodes,
        spacing: 1.0 / intervals,
        nodes,
    })
}

/// A scalar function of `y` sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Profile {
    pub fn new(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::InvalidProfile(format!(
                "expected {} values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidProfile(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().iter().map(|&y| f(y)).collect())
    }

    pub fn zeros(grid: &GridSpec) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.n_nodes()],
        }
    }

    /// Wrap values already known to be finite and of the right length.
    pub(crate) fn from_trusted(grid: &GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_nodes());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at the top wall `y = 1`.
    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Value at the bottom wall `y = 0`.
    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Fourth-order interpolation at an arbitrary `y` in `[0, 1]`.
    ///
    /// Points within `1e-9` outside the interval are clamped to the wall.
    pub fn interpolate(&self, y: f64) -> Result<f64> {
        interpolate_values(&self.values, self.grid.spacing(), y)
    }
}

/// Composite Simpson approximation of `∫₀¹ f dy` with the Euler–Maclaurin
/// end correction `−h⁴/180 · (f'''(1) − f'''(0))`.
///
/// The correction makes the rule exact for quintics and sixth order for
/// smooth data. Even node counts close the last three intervals with
/// Simpson's 3/8 rule and skip the correction (fourth order).
pub fn integrate(f: &Profile) -> f64 {
    integrate_values(f.values(), f.grid().spacing())
}

pub(crate) fn integrate_values(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n.is_multiple_of(2) {
        let mut sum = 0.0;
        for k in (0..n - 4).step_by(2) {
            sum += simpson_panel(f, k, h);
        }
        return sum + three_eighths_panel(f, n - 4, h);
    }
    let mut sum = 0.0;
    for k in (0..n - 1).step_by(2) {
        sum += simpson_panel(f, k, h);
    }
    sum - end_correction(third_derivative_at(f, n - 1, h), third_derivative_at(f, 0, h), h)
}

#[inline]
fn end_correction(d3_hi: f64, d3_lo: f64, h: f64) -> f64 {
    h.powi(4) / 180.0 * (d3_hi - d3_lo)
}

/// Second-order `f'''` at node `i`: central (-1, 2, 0, -2, 1) / 2h³ in the
/// interior, one-sided (-5, 18, -24, 14, -3) / 2h³ at the walls.
fn third_derivative_at(f: &[f64], i: usize, h: f64) -> f64 {
    let n = f.len();
    let s = 1.0 / (2.0 * h * h * h);
    if i == 0 {
        (-5.0 * f[0] + 18.0 * f[1] - 24.0 * f[2] + 14.0 * f[3] - 3.0 * f[4]) * s
    } else if i == n - 1 {
        let m = n - 1;
        (5.0 * f[m] - 18.0 * f[m - 1] + 24.0 * f[m - 2] - 14.0 * f[m - 3] + 3.0 * f[m - 4]) * s
    } else {
        (-f[i - 2] + 2.0 * f[i - 1] - 2.0 * f[i + 1] + f[i + 2]) * s
    }
}

#[inline]
fn simpson_panel(f: &[f64], k: usize, h: f64) -> f64 {
    h / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2])
}

#[inline]
fn three_eighths_panel(f: &[f64], k: usize, h: f64) -> f64 {
    3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3])
}

/// `∫` over the single interval `[y_j, y_{j+1}]` from a cubic through four
/// neighbouring nodes.
#[inline]
fn single_interval(f: &[f64], j: usize, h: f64) -> f64 {
    if j + 3 < f.len() {
        // nodes j..j+3: (9, 19, -5, 1) / 24
        h / 24.0 * (9.0 * f[j] + 19.0 * f[j + 1] - 5.0 * f[j + 2] + f[j + 3])
    } else {
        // nodes j-1..j+2: (-1, 13, 13, -1) / 24
        h / 24.0 * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2])
    }
}

/// Running integral `g(y_i) = ∫₀^{y_i} f`, with `g(0) = 0` exactly.
///
/// Even-indexed nodes take the end-corrected Simpson sum up to that node,
/// so `g(1)` is exactly [`integrate`]; odd-indexed nodes add one interval
/// of a four-point cubic rule to the preceding even node.
pub fn cumulative_integral(f: &Profile) -> Profile {
    let values = cumulative_values(f.values(), f.grid().spacing());
    Profile::from_trusted(f.grid(), values)
}

pub(crate) fn cumulative_values(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut g = vec![0.0; n];
    if n.is_multiple_of(2) {
        let mut acc = 0.0;
        let mut k = 0;
        while k < n - 4 {
            g[k + 1] = acc + single_interval(f, k, h);
            acc += simpson_panel(f, k, h);
            g[k + 2] = acc;
            k += 2;
        }
        g[k + 1] = g[k] + single_interval(f, k, h);
        g[k + 2] = g[k] + simpson_panel(f, k, h);
        g[k + 3] = g[k] + three_eighths_panel(f, k, h);
        return g;
    }
    let d3_lo = third_derivative_at(f, 0, h);
    let mut acc = 0.0;
    let mut k = 0;
    while k < n - 1 {
        g[k + 1] = g[k] + single_interval(f, k, h);
        acc += simpson_panel(f, k, h);
        g[k + 2] = acc - end_correction(third_derivative_at(f, k + 2, h), d3_lo, h);
        k += 2;
    }
    g
}

/// Order of a derivative in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    First,
    Second,
}

/// Fourth-order finite-difference derivative in `y`.
pub fn derivative_y(f: &Profile, order: Derivative) -> Profile {
    let mut out = vec![0.0; f.values().len()];
    match order {
        Derivative::First => first_derivative_into(f.values(), f.grid().spacing(), &mut out),
        Derivative::Second => second_derivative_into(f.values(), f.grid().spacing(), &mut out),
    }
    Profile::from_trusted(f.grid(), out)
}

// Interior: (1, -8, 0, 8, -1) / 12h.
// Wall node:  (-25, 48, -36, 16, -3) / 12h.
// Next node:  (-3, -10, 18, -6, 1) / 12h.
// The top wall uses the mirrored stencils with the sign flipped.
pub(crate) fn first_derivative_into(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let s = 1.0 / (12.0 * h);
    // Weights sum to zero, so each stencil is applied to differences from
    // its own node; constants then differentiate to exactly zero.
    for i in 2..n - 2 {
        out[i] = ((f[i + 1] - f[i - 1]) * 8.0 - (f[i + 2] - f[i - 2])) * s;
    }
    let wall = |g: [f64; 5]| {
        (48.0 * (g[1] - g[0]) - 36.0 * (g[2] - g[0]) + 16.0 * (g[3] - g[0]) - 3.0 * (g[4] - g[0])) * s
    };
    let near = |g: [f64; 5]| {
        (-3.0 * (g[0] - g[1]) + 18.0 * (g[2] - g[1]) - 6.0 * (g[3] - g[1]) + (g[4] - g[1])) * s
    };
    let m = n - 1;
    let low = [f[0], f[1], f[2], f[3], f[4]];
    let high = [f[m], f[m - 1], f[m - 2], f[m - 3], f[m - 4]];
    out[0] = wall(low);
    out[1] = near(low);
    out[m] = -wall(high);
    out[m - 1] = -near(high);
}

// Interior: (-1, 16, -30, 16, -1) / 12h².
// Wall node:  (45, -154, 214, -156, 61, -10) / 12h².
// Next node:  (10, -15, -4, 14, -6, 1) / 12h².
// Six points are needed for fourth order in the one-sided closures.
pub(crate) fn second_derivative_into(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    let s = 1.0 / (12.0 * h * h);
    for i in 2..n - 2 {
        let c = f[i];
        out[i] = (16.0 * ((f[i - 1] - c) + (f[i + 1] - c)) - ((f[i - 2] - c) + (f[i + 2] - c))) * s;
    }
    let wall = |g: [f64; 6]| {
        let d = |j: usize| g[j] - g[0];
        (-154.0 * d(1) + 214.0 * d(2) - 156.0 * d(3) + 61.0 * d(4) - 10.0 * d(5)) * s
    };
    let near = |g: [f64; 6]| {
        let d = |j: usize| g[j] - g[1];
        (10.0 * d(0) - 4.0 * d(2) + 14.0 * d(3) - 6.0 * d(4) + d(5)) * s
    };
    let low = [f[0], f[1], f[2], f[3], f[4], f[5]];
    let m = n - 1;
    let high = [f[m], f[m - 1], f[m - 2], f[m - 3], f[m - 4], f[m - 5]];
    out[0] = wall(low);
    out[1] = near(low);
    out[m] = wall(high);
    out[m - 1] = near(high);
}

const WALL_SLACK: f64 = 1e-9;

pub(crate) fn interpolate_values(f: &[f64], h: f64, y: f64) -> Result<f64> {
    if !(-WALL_SLACK..=1.0 + WALL_SLACK).contains(&y) {
        return Err(Error::Interpolation(format!("y = {y} lies outside [0, 1]")));
    }
    let y = y.clamp(0.0, 1.0);
    Ok(lagrange4(f, h, 0.0, y))
}

/// Cubic Lagrange interpolation on a uniform array starting at `origin`.
/// The caller guarantees `x` lies within the sampled range.
pub(crate) fn lagrange4(f: &[f64], h: f64, origin: f64, x: f64) -> f64 {
    let n = f.len();
    let pos = (x - origin) / h;
    let cell = (pos.floor().max(0.0) as usize).min(n - 2);
    if pos == cell as f64 {
        return f[cell];
    }
    let j = cell.saturating_sub(1).min(n - 4);
    let s = pos - j as f64;
    let w = lagrange4_weights(s);
    w[0] * f[j] + w[1] * f[j + 1] + w[2] * f[j + 2] + w[3] * f[j + 3]
}

/// Weights of the cubic through offsets 0, 1, 2, 3 evaluated at `s`.
#[inline]
pub(crate) fn lagrange4_weights(s: f64) -> [f64; 4] {
    let (a, b, c, d) = (s, s - 1.0, s - 2.0, s - 3.0);
    [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn profile(n: usize, f: impl Fn(f64) -> f64) -> Profile {
        Profile::from_fn(&build_grid(n).unwrap(), f).unwrap()
    }

    #[test]
    fn grid_examples() {
        let g = build_grid(11).unwrap();
        assert!((g.spacing() - 0.1).abs() < 1e-15);
        assert!((g.node(5) - 0.5).abs() < 1e-15);
        assert_eq!(build_grid(257).unwrap().node(128), 0.5);
        assert!(matches!(build_grid(2), Err(Error::InvalidGrid(_))));
        assert!(build_grid(8).is_err());
        assert!(build_grid(9).is_ok());
    }

    #[test]
    fn grid_invariants() {
        for n in [9, 10, 65, 256, 257, 1025] {
            let g = build_grid(n).unwrap();
            assert_eq!(g.node(0), 0.0);
            assert_eq!(g.node(n - 1), 1.0);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            assert!((g.spacing() * (n - 1) as f64 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn profile_rejects_bad_values() {
        let g = build_grid(9).unwrap();
        assert!(Profile::new(&g, vec![0.0; 8]).is_err());
        let mut v = vec![0.0; 9];
        v[3] = f64::NAN;
        assert!(Profile::new(&g, v).is_err());
    }

    #[test]
    fn integrate_examples() {
        let f = profile(257, |y| y * y - 1.0 / 3.0);
        assert!(integrate(&f).abs() < 1e-12);
        assert_eq!(integrate(&profile(257, |_| 0.0)), 0.0);
        let f = profile(257, |y| (PI * y).cos().powi(2));
        assert!((integrate(&f) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn integrate_even_grid_is_fourth_order() {
        let exact = (1.0f64).exp() - 1.0;
        let e1 = (integrate(&profile(64, f64::exp)) - exact).abs();
        let e2 = (integrate(&profile(128, f64::exp)) - exact).abs();
        assert!(e1 / e2 > 14.0, "ratio {}", e1 / e2);
        let f = profile(10, |y| y * y * y);
        assert!((integrate(&f) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cumulative_examples() {
        let g = cumulative_integral(&profile(257, |_| 1.0));
        for (y, v) in g.grid().nodes().iter().zip(g.values()) {
            assert!((v - y).abs() < 1e-12);
        }
        assert_eq!(g.first(), 0.0);

        let g = cumulative_integral(&profile(257, |y| (PI * y).cos()));
        assert!((g.values()[128] - 1.0 / PI).abs() < 1e-8);

        let g = cumulative_integral(&profile(257, |_| 0.0));
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cumulative_matches_integrate_at_the_top_wall() {
        for n in [9, 10, 33, 64, 257] {
            let f = profile(n, |y| (3.0 * y).sin() + y * y);
            let total = integrate(&f);
            let g = cumulative_integral(&f);
            assert!((g.last() - total).abs() <= 1e-12 * total.abs(), "n = {n}");
        }
    }

    #[test]
    fn cumulative_exact_for_cubics() {
        for n in [9, 10, 17] {
            let g = cumulative_integral(&profile(n, |y| 4.0 * y * y * y - y));
            for (y, v) in g.grid().nodes().iter().zip(g.values()) {
                assert!((v - (y.powi(4) - y * y / 2.0)).abs() < 1e-14, "n = {n}, y = {y}");
            }
        }
    }

    #[test]
    fn derivative_examples() {
        let f = profile(257, |y| y * y);
        let d1 = derivative_y(&f, Derivative::First);
        let d2 = derivative_y(&f, Derivative::Second);
        for (i, &y) in f.grid().nodes().iter().enumerate() {
            assert!((d1.values()[i] - 2.0 * y).abs() < 1e-10);
            assert!((d2.values()[i] - 2.0).abs() < 1e-8);
        }
        let f = profile(257, |y| (PI * y).cos());
        assert!(derivative_y(&f, Derivative::First).first().abs() < 1e-6);
        let f = profile(257, |_| 4.2);
        for order in [Derivative::First, Derivative::Second] {
            assert!(derivative_y(&f, order).sup_norm() < 1e-12);
        }
    }

    #[test]
    fn stencils_are_exact_on_quartics() {
        let p = |y: f64| 1.0 - 2.0 * y + 3.0 * y * y - 0.5 * y.powi(3) + 0.25 * y.powi(4);
        let dp = |y: f64| -2.0 + 6.0 * y - 1.5 * y * y + y.powi(3);
        let ddp = |y: f64| 6.0 - 3.0 * y + 3.0 * y * y;
        let f = profile(9, p);
        let d1 = derivative_y(&f, Derivative::First);
        let d2 = derivative_y(&f, Derivative::Second);
        for (i, &y) in f.grid().nodes().iter().enumerate() {
            assert!((d1.values()[i] - dp(y)).abs() < 1e-11, "d1 at {y}");
            assert!((d2.values()[i] - ddp(y)).abs() < 1e-9, "d2 at {y}");
        }
    }

    #[test]
    fn derivative_converges_at_fourth_order() {
        let err = |n: usize, order| {
            let f = profile(n, |y| (2.0 * y).sin());
            let d = derivative_y(&f, order);
            f.grid()
                .nodes()
                .iter()
                .zip(d.values())
                .map(|(&y, v)| {
                    let exact = match order {
                        Derivative::First => 2.0 * (2.0 * y).cos(),
                        Derivative::Second => -4.0 * (2.0 * y).sin(),
                    };
                    (v - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        for order in [Derivative::First, Derivative::Second] {
            let ratio = err(33, order) / err(65, order);
            assert!(ratio > 12.0, "{order:?}: ratio {ratio}");
        }
    }

    #[test]
    fn interpolation_is_exact_on_cubics_and_at_nodes() {
        let f = profile(17, |y| y * y * y - y);
        for y in [0.0, 0.013, 0.5, 0.77, 0.999, 1.0] {
            let v = f.interpolate(y).unwrap();
            assert!((v - (y * y * y - y)).abs() < 1e-14, "y = {y}");
        }
        assert_eq!(f.interpolate(f.grid().node(3)).unwrap(), f.values()[3]);
        assert!(f.interpolate(1.0 + 1e-6).is_err());
        assert!(f.interpolate(-1e-10).is_ok());
    }
}
