//! Sampled channel flows and the Galilean freezing transformation.
//!
//! A [`Field2D`] holds `u`, `v` on a uniform `(t, x, y)` box and a pressure
//! `p(t, x)` that does not depend on `y`. The hydrostatic system is
//!
//! ```text
//! u_t + u u_x + v u_y = -p_x,    u_x + v_y = 0,    v = 0 at y = 0, 1.
//! ```
//!
//! For any `g` with `g(0) = g'(0) = 0` the map
//!
//! ```text
//! ũ(t, x̃, y) = u(t, x̃ + g, y) - g',   ṽ = v,   p̃(t, x̃) = p(t, x̃ + g) + (x̃ + g) g''
//! ```
//!
//! sends solutions to solutions. Choosing `g` as the path of a particle pins
//! that particle to `x̃ = 0`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{first_derivative_into, lagrange4_weights, second_derivative_into};
use crate::reduced::fmt_f64;

/// Default bound on `|g'|` and `|g''|` accepted by [`GalileanShift::validate`].
pub const DEFAULT_M_BOUND: f64 = 10.0;

/// Smallest axis length the fourth-order stencils support.
pub const MIN_AXIS_NODES: usize = 6;

const AXIS_SLACK: f64 = 1e-12;

/// Uniform axis `start + i * step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    start: f64,
    step: f64,
    len: usize,
}

impl Axis {
    pub fn new(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < MIN_AXIS_NODES {
            return Err(Error::InvalidGrid(format!(
                "axis needs at least {MIN_AXIS_NODES} nodes, got {len}"
            )));
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::InvalidGrid(format!("axis [{start}, {end}] is empty")));
        }
        Ok(Self {
            start,
            step: (end - start) / (len - 1) as f64,
            len,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.node(self.len - 1)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn node(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|i| self.node(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        let slack = AXIS_SLACK * self.step;
        x >= self.start - slack && x <= self.end() + slack
    }

    /// First index and weights of the cubic stencil around `x`.
    fn stencil(&self, x: f64) -> (usize, [f64; 4]) {
        let pos = ((x - self.start) / self.step).clamp(0.0, (self.len - 1) as f64);
        let cell = (pos.floor() as usize).min(self.len - 2);
        let j = cell.saturating_sub(1).min(self.len - 4);
        (j, lagrange4_weights(pos - j as f64))
    }
}

/// Sampled `(u, v, p)` on a uniform space-time box.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    t: Axis,
    x: Axis,
    y: Axis,
    u: Vec<f64>,
    v: Vec<f64>,
    p: Vec<f64>,
}

/// Largest `|v|` tolerated on the walls.
pub const WALL_TOLERANCE: f64 = 1e-12;

impl Field2D {
    /// Builds a field from arrays laid out as `[(it * nx + ix) * ny + iy]`
    /// for `u`, `v` and `[it * nx + ix]` for `p`.
    pub fn new(t: Axis, x: Axis, y: Axis, u: Vec<f64>, v: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if (y.start() - 0.0).abs() > AXIS_SLACK || (y.end() - 1.0).abs() > AXIS_SLACK {
            return Err(Error::InvalidGrid("y axis must span [0, 1]".into()));
        }
        let vol = t.len() * x.len() * y.len();
        if u.len() != vol || v.len() != vol || p.len() != t.len() * x.len() {
            return Err(Error::InvalidGrid("field arrays do not match the axes".into()));
        }
        if !u.iter().chain(&v).chain(&p).all(|z| z.is_finite()) {
            return Err(Error::InvalidProfile("field contains non-finite samples".into()));
        }
        let f = Self { t, x, y, u, v, p };
        let ny = y.len();
        for it in 0..t.len() {
            for ix in 0..x.len() {
                let base = f.index(it, ix, 0);
                let wall = f.v[base].abs().max(f.v[base + ny - 1].abs());
                if wall > WALL_TOLERANCE {
                    return Err(Error::InvalidProfile(format!(
                        "v = {wall:e} on a wall at t = {}, x = {}",
                        t.node(it),
                        x.node(ix)
                    )));
                }
            }
        }
        Ok(f)
    }

    /// Samples closed-form `u(t, x, y)`, `v(t, x, y)` and `p(t, x)`.
    pub fn sample(
        t: Axis,
        x: Axis,
        y: Axis,
        u: impl Fn(f64, f64, f64) -> f64,
        v: impl Fn(f64, f64, f64) -> f64,
        p: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let vol = t.len() * x.len() * y.len();
        let (mut us, mut vs) = (Vec::with_capacity(vol), Vec::with_capacity(vol));
        let mut ps = Vec::with_capacity(t.len() * x.len());
        for tt in t.nodes() {
            for xx in x.nodes() {
                ps.push(p(tt, xx));
                for yy in y.nodes() {
                    us.push(u(tt, xx, yy));
                    vs.push(v(tt, xx, yy));
                }
            }
        }
        Self::new(t, x, y, us, vs, ps)
    }

    pub fn t_axis(&self) -> Axis {
        self.t
    }

    pub fn x_axis(&self) -> Axis {
        self.x
    }

    pub fn y_axis(&self) -> Axis {
        self.y
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn index(&self, it: usize, ix: usize, iy: usize) -> usize {
        (it * self.x.len() + ix) * self.y.len() + iy
    }

    pub fn u_at(&self, it: usize, ix: usize, iy: usize) -> f64 {
        self.u[self.index(it, ix, iy)]
    }

    pub fn v_at(&self, it: usize, ix: usize, iy: usize) -> f64 {
        self.v[self.index(it, ix, iy)]
    }

    pub fn p_at(&self, it: usize, ix: usize) -> f64 {
        self.p[it * self.x.len() + ix]
    }

    /// `u_x` at every sample.
    pub fn u_x(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.u.len()];
        let (nx, ny) = (self.x.len(), self.y.len());
        for it in 0..self.t.len() {
            for iy in 0..ny {
                let stride = |ix: usize| self.index(it, ix, iy);
                derive_line(&self.u, &mut out, nx, stride, self.x.step());
            }
        }
        out
    }

    /// `p_x` at every `(t, x)` sample.
    pub fn p_x(&self) -> Vec<f64> {
        let nx = self.x.len();
        let mut out = vec![0.0; self.p.len()];
        for it in 0..self.t.len() {
            let row = it * nx..(it + 1) * nx;
            first_derivative_into(&self.p[row.clone()], self.x.step(), &mut out[row]);
        }
        out
    }

    fn interp3(&self, data: &[f64], t: f64, x: f64, y: f64) -> f64 {
        let (jt, wt) = self.t.stencil(t);
        let (jx, wx) = self.x.stencil(x);
        let (jy, wy) = self.y.stencil(y);
        let mut acc = 0.0;
        for (a, &ct) in wt.iter().enumerate() {
            for (b, &cx) in wx.iter().enumerate() {
                let base = self.index(jt + a, jx + b, jy);
                let line = wy[0] * data[base]
                    + wy[1] * data[base + 1]
                    + wy[2] * data[base + 2]
                    + wy[3] * data[base + 3];
                acc += ct * cx * line;
            }
        }
        acc
    }

    /// Serializes as long-format CSV with columns `t,x,y,u,v,p`, one row
    /// per sample, `y` varying fastest, then `x`, then `t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for it in 0..self.t.len() {
            for ix in 0..self.x.len() {
                let p = fmt_f64(self.p_at(it, ix));
                for iy in 0..self.y.len() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        fmt_f64(self.t.node(it)),
                        fmt_f64(self.x.node(ix)),
                        fmt_f64(self.y.node(iy)),
                        fmt_f64(self.u_at(it, ix, iy)),
                        fmt_f64(self.v_at(it, ix, iy)),
                        p
                    ));
                }
            }
        }
        out
    }

    pub const CSV_HEADER: &'static str = "t,x,y,u,v,p";
}

impl FromStr for Field2D {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == Self::CSV_HEADER => {}
            other => {
                return Err(Error::Parse(format!(
                    "expected header `{}`, found {:?}",
                    Self::CSV_HEADER,
                    other
                )))
            }
        }
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", k + 2)))?;
            if vals.len() != 6 {
                return Err(Error::Parse(format!("row {}: expected 6 columns", k + 2)));
            }
            rows.push([vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]]);
        }
        let t = axis_from_samples(rows.iter().map(|r| r[0]), "t")?;
        let x = axis_from_samples(rows.iter().map(|r| r[1]), "x")?;
        let y = axis_from_samples(rows.iter().map(|r| r[2]), "y")?;
        if rows.len() != t.len() * x.len() * y.len() {
            return Err(Error::Parse("samples do not fill the (t, x, y) box".into()));
        }
        let mut u = Vec::with_capacity(rows.len());
        let mut v = Vec::with_capacity(rows.len());
        let mut p = Vec::with_capacity(t.len() * x.len());
        for (k, r) in rows.iter().enumerate() {
            let (it, rest) = (k / (x.len() * y.len()), k % (x.len() * y.len()));
            let (ix, iy) = (rest / y.len(), rest % y.len());
            let close = |a: f64, b: f64, h: f64| (a - b).abs() <= 1e-9 * h.max(1.0);
            if !close(r[0], t.node(it), t.step())
                || !close(r[1], x.node(ix), x.step())
                || !close(r[2], y.node(iy), y.step())
            {
                return Err(Error::Parse(format!("row {} is out of order", k + 2)));
            }
            if iy == 0 {
                p.push(r[5]);
            } else if r[5] != p[p.len() - 1] {
                return Err(Error::Parse(format!("row {}: pressure varies with y", k + 2)));
            }
            u.push(r[3]);
            v.push(r[4]);
        }
        Field2D::new(t, x, y, u, v, p)
    }
}

fn axis_from_samples(values: impl Iterator<Item = f64>, name: &str) -> Result<Axis> {
    let mut distinct: Vec<f64> = values.collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < MIN_AXIS_NODES {
        return Err(Error::Parse(format!("{name} axis has {} nodes", distinct.len())));
    }
    let axis = Axis::new(distinct[0], distinct[distinct.len() - 1], distinct.len())?;
    let uniform = distinct
        .iter()
        .enumerate()
        .all(|(i, &z)| (z - axis.node(i)).abs() <= 1e-9 * axis.step());
    if !uniform {
        return Err(Error::Parse(format!("{name} axis is not uniform")));
    }
    Ok(axis)
}

fn derive_line(data: &[f64], out: &mut [f64], n: usize, at: impl Fn(usize) -> usize, h: f64) {
    let line: Vec<f64> = (0..n).map(|i| data[at(i)]).collect();
    let mut d = vec![0.0; n];
    first_derivative_into(&line, h, &mut d);
    for (i, di) in d.into_iter().enumerate() {
        out[at(i)] = di;
    }
}

/// Polynomial shift `g(t) = Σ c_k t^k` with `c_0 = c_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GalileanShift {
    coeffs: Vec<f64>,
}

impl GalileanShift {
    /// `coeffs[k]` multiplies `t^k`. Fails unless `g(0) = g'(0) = 0`.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().take(2).any(|&c| c != 0.0) {
            return Err(Error::InvalidConfig("a shift needs g(0) = g'(0) = 0".into()));
        }
        if !coeffs.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidConfig("shift coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `g(t) = c t^k` for `k >= 2`.
    pub fn monomial(c: f64, k: usize) -> Result<Self> {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::polynomial(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn g(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn dg(&self, t: f64) -> f64 {
        let n = self.coeffs.len();
        (1..n).rev().fold(0.0, |acc, k| acc * t + k as f64 * self.coeffs[k])
    }

    pub fn ddg(&self, t: f64) -> f64 {
        let n = self.coeffs.len();
        (2..n)
            .rev()
            .fold(0.0, |acc, k| acc * t + (k * (k - 1)) as f64 * self.coeffs[k])
    }

    /// Checks `|g'| <= m_bound` and `|g''| <= m_bound` at the nodes of `t`.
    pub fn validate(&self, t: &Axis, m_bound: f64) -> Result<()> {
        for s in t.nodes() {
            let worst = self.dg(s).abs().max(self.ddg(s).abs());
            if worst > m_bound {
                return Err(Error::InvalidConfig(format!(
                    "shift derivative {worst} exceeds the bound {m_bound} at t = {s}"
                )));
            }
        }
        Ok(())
    }
}

impl std::ops::Neg for GalileanShift {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            coeffs: self.coeffs.into_iter().map(|c| -c).collect(),
        }
    }
}

/// Transforms `field` onto its own `x` axis.
pub fn galilean_transform(field: &Field2D, shift: &GalileanShift) -> Result<Field2D> {
    galilean_transform_onto(field, shift, field.x_axis())
}

/// Transforms `field`, sampling the result at the nodes of `x_out`.
pub fn galilean_transform_onto(field: &Field2D, shift: &GalileanShift, x_out: Axis) -> Result<Field2D> {
    shift.validate(&field.t, DEFAULT_M_BOUND)?;
    if shift.is_zero() && x_out == field.x {
        return Ok(field.clone());
    }
    let (nt, nx, ny) = (field.t.len(), x_out.len(), field.y.len());
    let mut u = Vec::with_capacity(nt * nx * ny);
    let mut v = Vec::with_capacity(nt * nx * ny);
    let mut p = Vec::with_capacity(nt * nx);
    for it in 0..nt {
        let t = field.t.node(it);
        let (g, dg, ddg) = (shift.g(t), shift.dg(t), shift.ddg(t));
        for xt in x_out.nodes() {
            let x = xt + g;
            if !field.x.contains(x) {
                return Err(Error::OutOfDomain(format!(
                    "x̃ = {xt} maps to x = {x} outside [{}, {}] at t = {t}",
                    field.x.start(),
                    field.x.end()
                )));
            }
            let (jx, w) = field.x.stencil(x);
            let mix = |data: &[f64], iy: usize| {
                (0..4).map(|b| w[b] * data[field.index(it, jx + b, iy)]).sum::<f64>()
            };
            for iy in 0..ny {
                u.push(mix(&field.u, iy) - dg);
                v.push(mix(&field.v, iy));
            }
            let pr = (0..4).map(|b| w[b] * field.p_at(it, jx + b)).sum::<f64>();
            p.push(pr + x * ddg);
        }
    }
    // interpolation can leave rounding-level values on the walls
    for k in (0..nt * nx).flat_map(|c| [c * ny, c * ny + ny - 1]) {
        if v[k].abs() <= WALL_TOLERANCE {
            v[k] = 0.0;
        }
    }
    Field2D::new(field.t, x_out, field.y, u, v, p)
}

/// Max-norms of the momentum and divergence residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub momentum: f64,
    pub divergence: f64,
}

/// Evaluates `u_t + u u_x + v u_y + p_x` and `u_x + v_y` with fourth-order
/// differences on the sample grids.
pub fn hydrostatic_residual(field: &Field2D) -> Residuals {
    let (nt, nx, ny) = (field.t.len(), field.x.len(), field.y.len());
    let mut u_t = vec![0.0; field.u.len()];
    let mut u_y = vec![0.0; field.u.len()];
    let mut v_y = vec![0.0; field.u.len()];
    let u_x = field.u_x();
    for ix in 0..nx {
        for iy in 0..ny {
            derive_line(&field.u, &mut u_t, nt, |it| field.index(it, ix, iy), field.t.step());
        }
    }
    for it in 0..nt {
        for ix in 0..nx {
            let row = field.index(it, ix, 0)..field.index(it, ix, 0) + ny;
            first_derivative_into(&field.u[row.clone()], field.y.step(), &mut u_y[row.clone()]);
            first_derivative_into(&field.v[row.clone()], field.y.step(), &mut v_y[row]);
        }
    }
    let p_x = field.p_x();
    let mut res = Residuals { momentum: 0.0, divergence: 0.0 };
    for it in 0..nt {
        for ix in 0..nx {
            for iy in 0..ny {
                let k = field.index(it, ix, iy);
                let m = u_t[k] + field.u[k] * u_x[k] + field.v[k] * u_y[k] + p_x[it * nx + ix];
                res.momentum = res.momentum.max(m.abs());
                res.divergence = res.divergence.max((u_x[k] + v_y[k]).abs());
            }
        }
    }
    res
}

/// Heights used for spread checks when none are given.
pub const DEFAULT_Y_LIST: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Particle paths started on one vertical line.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicReport {
    pub x0: f64,
    pub y_list: Vec<f64>,
    pub times: Vec<f64>,
    /// `x_paths[i][k]` is `X(times[k])` for the particle started at `y_list[i]`.
    pub x_paths: Vec<Vec<f64>>,
    pub y_paths: Vec<Vec<f64>>,
    /// `max |X_i - X_j|` over all pairs and times.
    pub max_spread: f64,
    /// `max |Ẍ + p_x(t, X)|` over all paths and times.
    pub accel_residual: f64,
}

impl fmt::Display for CharacteristicReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "x0 = {}, {} paths to t = {}", self.x0, self.y_list.len(), self.times.last().unwrap_or(&0.0))?;
        writeln!(f, "max spread     {:.3e}", self.max_spread)?;
        write!(f, "accel residual {:.3e}", self.accel_residual)
    }
}

/// Substeps per sample interval in [`verify_characteristic_ode`].
const SUBSTEPS: usize = 8;

/// Integrates `Ẋ = u`, `Ẏ = v` from `(x0, y_i)` with classical Runge–Kutta
/// and reports how far apart the `X` components drift and how well they
/// satisfy `Ẍ = -p_x(t, X)`.
pub fn verify_characteristic_ode(field: &Field2D, x0: f64, y_list: &[f64]) -> Result<CharacteristicReport> {
    if y_list.is_empty() {
        return Err(Error::InvalidConfig("y_list is empty".into()));
    }
    if let Some(&y) = y_list.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::Domain(format!("y0 = {y} lies outside [0, 1]")));
    }
    let nt = field.t.len();
    let times: Vec<f64> = field.t.nodes().collect();
    let h = field.t.step() / SUBSTEPS as f64;
    let vel = |t: f64, x: f64, y: f64| -> Result<(f64, f64)> {
        if !field.x.contains(x) {
            return Err(Error::OutOfDomain(format!("characteristic reached x = {x} at t = {t}")));
        }
        let y = y.clamp(0.0, 1.0);
        Ok((field.interp3(&field.u, t, x, y), field.interp3(&field.v, t, x, y)))
    };

    let mut x_paths = Vec::with_capacity(y_list.len());
    let mut y_paths = Vec::with_capacity(y_list.len());
    for &y0 in y_list {
        let (mut x, mut y) = (x0, y0);
        let mut xs = vec![x];
        let mut ys = vec![y];
        for it in 0..nt - 1 {
            for s in 0..SUBSTEPS {
                let t = times[it] + h * s as f64;
                let k1 = vel(t, x, y)?;
                let k2 = vel(t + h / 2.0, x + h / 2.0 * k1.0, y + h / 2.0 * k1.1)?;
                let k3 = vel(t + h / 2.0, x + h / 2.0 * k2.0, y + h / 2.0 * k2.1)?;
                let k4 = vel(t + h, x + h * k3.0, y + h * k3.1)?;
                x += h / 6.0 * (k1.0 + 2.0 * (k2.0 + k3.0) + k4.0);
                y += h / 6.0 * (k1.1 + 2.0 * (k2.1 + k3.1) + k4.1);
            }
            if !field.x.contains(x) {
                return Err(Error::OutOfDomain(format!("characteristic reached x = {x}")));
            }
            xs.push(x);
            ys.push(y.clamp(0.0, 1.0));
        }
        x_paths.push(xs);
        y_paths.push(ys);
    }

    let mut max_spread: f64 = 0.0;
    for k in 0..nt {
        let (lo, hi) = x_paths
            .iter()
            .map(|p| p[k])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| (a.min(z), b.max(z)));
        max_spread = max_spread.max(hi - lo);
    }

    let p_x = field.p_x();
    let nx = field.x.len();
    let mut accel_residual: f64 = 0.0;
    let mut xdd = vec![0.0; nt];
    for path in &x_paths {
        second_derivative_into(path, field.t.step(), &mut xdd);
        for (it, (&xk, &acc)) in path.iter().zip(&xdd).enumerate() {
            let (jx, w) = field.x.stencil(xk);
            let px: f64 = (0..4).map(|b| w[b] * p_x[it * nx + jx + b]).sum();
            accel_residual = accel_residual.max((acc + px).abs());
        }
    }

    Ok(CharacteristicReport {
        x0,
        y_list: y_list.to_vec(),
        times,
        x_paths,
        y_paths,
        max_spread,
        accel_residual,
    })
}
