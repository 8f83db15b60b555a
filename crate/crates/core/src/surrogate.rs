//! Linear surrogate `G(x) = R(c) + J (x - c)` and the trust-region subproblem
//! `min U(G(x))` over the box intersected with the radius ball.
//!
//! The model objective is the maximum of the in-band rows of `G`, which is
//! convex and piecewise linear in `x`. The solver runs a multi-start projected
//! subgradient descent, then refines the best point by minimizing a
//! log-sum-exp smoothing of the maximum with a decreasing temperature.
//! Projection onto box ∩ ball is exact (see [`Reduced::project`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::{splitmix64, unit_f64};
use crate::types::{Bounds, DesignVector, FrequencySweep, ResponseCurve};

/// Center response plus an `m x D` forward-difference Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    center: DesignVector,
    center_response: ResponseCurve,
    /// Row-major, `rows x cols`.
    jacobian: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl LinearModel {
    pub fn new(
        center: DesignVector,
        center_response: ResponseCurve,
        jacobian: Vec<f64>,
    ) -> Result<Self> {
        let rows = center_response.len();
        let cols = center.dim();
        if jacobian.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: jacobian.len(),
            });
        }
        if let Some(k) = jacobian.iter().position(|v| !v.is_finite()) {
            return Err(Error::config(format!(
                "Jacobian entry ({}, {}) is not finite",
                k / cols,
                k % cols
            )));
        }
        Ok(Self {
            center,
            center_response,
            jacobian,
            rows,
            cols,
        })
    }

    pub fn center(&self) -> &DesignVector {
        &self.center
    }

    pub fn center_response(&self) -> &ResponseCurve {
        &self.center_response
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, d: usize) -> f64 {
        self.jacobian[i * self.cols + d]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.jacobian[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.entry(i, d)).collect()
    }
}

/// `center_response + J (x - center)`.
pub fn model_predict(model: &LinearModel, x: &[f64]) -> Result<ResponseCurve> {
    if x.len() != model.cols {
        return Err(Error::DimensionMismatch {
            expected: model.cols,
            actual: x.len(),
        });
    }
    let dx: Vec<f64> = x
        .iter()
        .zip(model.center.iter())
        .map(|(a, c)| a - c)
        .collect();
    let values = (0..model.rows)
        .map(|i| model.center_response[i] + dot(model.row(i), &dx))
        .collect();
    Ok(ResponseCurve::from_vec_unchecked(values))
}

/// Space in which the trust-region radius is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Euclidean norm on raw parameters.
    #[default]
    Euclidean,
    /// Euclidean norm after mapping the box `[l, u]` onto `[0, 1]^D`.
    UnitBox,
}

impl NormMode {
    fn scale(self, b: &Bounds, d: usize) -> f64 {
        match self {
            NormMode::Euclidean => 1.0,
            NormMode::UnitBox => b.range(d),
        }
    }

    /// Length of `x - y` in this norm.
    pub fn distance(self, b: &Bounds, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .enumerate()
            .map(|(d, (a, c))| {
                let t = (a - c) / self.scale(b, d);
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub model: &'a LinearModel,
    pub bounds: &'a Bounds,
    pub radius: f64,
    pub norm: NormMode,
    pub sweep: &'a FrequencySweep,
}

impl SubproblemSpec<'_> {
    pub fn validate(&self) -> Result<()> {
        self.bounds.check_dim(self.model.cols())?;
        if self.sweep.len() != self.model.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.sweep.len(),
                actual: self.model.rows(),
            });
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::config(format!(
                "trust-region radius must be positive, got {}",
                self.radius
            )));
        }
        if !self.bounds.contains(self.model.center()) {
            return Err(Error::config("model center lies outside the bounds"));
        }
        Ok(())
    }

    /// `U(G(x))`: the largest in-band model response.
    pub fn model_objective(&self, x: &[f64]) -> f64 {
        let c = self.model.center();
        self.sweep
            .in_band()
            .iter()
            .map(|&i| {
                let row = self.model.row(i);
                self.model.center_response[i]
                    + row
                        .iter()
                        .zip(x.iter().zip(c.iter()))
                        .map(|(j, (a, b))| j * (a - b))
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

const SUBGRADIENT_ITERS: usize = 500;
const EXTRA_STARTS: usize = 8;
const SMOOTH_ITERS: usize = 300;

/// Minimizes the model objective over box ∩ ball. Always feasible; never worse
/// than the center; deterministic for a given spec.
pub fn solve_tr_subproblem(spec: &SubproblemSpec<'_>) -> Result<DesignVector> {
    spec.validate()?;
    let red = Reduced::new(spec);
    let zero = vec![0.0; red.dim];
    let (v0, active) = red.value(&zero);
    let mut best = Best {
        z: zero.clone(),
        value: v0,
        norm: 0.0,
    };

    let mut starts = vec![zero];
    let g = red.row(active);
    let gn = norm(g);
    for k in 0..EXTRA_STARTS {
        let dir: Vec<f64> = if k == 0 && gn > 0.0 {
            g.iter().map(|v| -v / gn).collect()
        } else {
            hashed_direction(k as u64, red.dim)
        };
        let y: Vec<f64> = dir.iter().map(|v| 0.5 * red.radius * v).collect();
        starts.push(red.project(&y));
    }
    for start in starts {
        red.subgradient(start, &mut best);
    }
    red.polish(&mut best);
    red.snap_to_vertex(&mut best);
    Ok(DesignVector::from_vec_unchecked(red.to_design(&best.z)))
}

/// Exhaustive grid search over box ∩ ball (`D <= 3`). Ties go to the
/// lexicographically smallest grid index.
pub fn subproblem_oracle_grid(
    spec: &SubproblemSpec<'_>,
    resolution: usize,
) -> Result<DesignVector> {
    spec.validate()?;
    let dim = spec.model.cols();
    if dim > 3 {
        return Err(Error::config(format!(
            "grid oracle supports at most 3 dimensions, got {dim}"
        )));
    }
    if resolution < 11 {
        return Err(Error::config(format!(
            "grid resolution must be at least 11, got {resolution}"
        )));
    }
    let red = Reduced::new(spec);
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|d| {
            let lo = red.lo[d].max(-red.radius);
            let hi = red.hi[d].min(red.radius);
            (0..resolution)
                .map(|k| lo + (hi - lo) * k as f64 / (resolution - 1) as f64)
                .collect()
        })
        .collect();
    let r2 = red.radius * red.radius * (1.0 + 1e-12);
    let mut idx = vec![0usize; dim];
    let mut z = vec![0.0; dim];
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        for d in 0..dim {
            z[d] = axes[d][idx[d]];
        }
        if z.iter().map(|v| v * v).sum::<f64>() <= r2 {
            let (v, _) = red.value(&z);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, z.clone()));
            }
        }
        // Odometer with the last dimension running fastest.
        let mut d = dim;
        loop {
            if d == 0 {
                let (_, z) = best.expect("the grid always contains feasible points");
                return Ok(DesignVector::from_vec_unchecked(red.to_design(&z)));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < resolution {
                break;
            }
            idx[d] = 0;
        }
    }
}

struct Best {
    z: Vec<f64>,
    value: f64,
    norm: f64,
}

impl Best {
    /// Strictly better objective wins; equal objectives go to the smaller step.
    fn offer(&mut self, z: &[f64], value: f64) {
        let tol = 1e-12 * (1.0 + self.value.abs());
        let n = norm(z);
        if value < self.value - tol || (value <= self.value + tol && n < self.norm) {
            self.z.clear();
            self.z.extend_from_slice(z);
            self.value = value;
            self.norm = n;
        }
    }
}

/// The subproblem in scaled step coordinates `z = (x - c) / s`, keeping only
/// in-band rows: minimize `max_i (b_i + a_i . z)` s.t. `lo <= z <= hi`,
/// `|z| <= radius`. `lo <= 0 <= hi` always holds.
struct Reduced {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    radius: f64,
    center: Vec<f64>,
    scale: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Reduced {
    fn new(spec: &SubproblemSpec<'_>) -> Self {
        let dim = spec.model.cols();
        let scale: Vec<f64> = (0..dim).map(|d| spec.norm.scale(spec.bounds, d)).collect();
        let center = spec.model.center().to_vec();
        let band = spec.sweep.in_band();
        let mut a = Vec::with_capacity(band.len() * dim);
        let mut b = Vec::with_capacity(band.len());
        for &i in band {
            a.extend(spec.model.row(i).iter().zip(&scale).map(|(j, s)| j * s));
            b.push(spec.model.center_response()[i]);
        }
        let lo = (0..dim)
            .map(|d| (spec.bounds.lower()[d] - center[d]) / scale[d])
            .collect();
        let hi = (0..dim)
            .map(|d| (spec.bounds.upper()[d] - center[d]) / scale[d])
            .collect();
        Self {
            dim,
            a,
            b,
            lo,
            hi,
            radius: spec.radius,
            center,
            scale,
            lower: spec.bounds.lower().to_vec(),
            upper: spec.bounds.upper().to_vec(),
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    fn rows(&self) -> usize {
        self.b.len()
    }

    /// Objective value and the first active row.
    fn value(&self, z: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for i in 0..self.rows() {
            let v = self.b[i] + dot(self.row(i), z);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    fn to_design(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|d| {
                (self.center[d] + self.scale[d] * z[d])
                    .max(self.lower[d])
                    .min(self.upper[d])
            })
            .collect()
    }

    fn clamp(&self, y: &[f64], shrink: f64) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(d, v)| (v / shrink).max(self.lo[d]).min(self.hi[d]))
            .collect()
    }

    /// Euclidean projection onto box ∩ ball. The KKT conditions give
    /// `z(θ) = clamp(y / (1 + θ))` with `θ >= 0` chosen so that `|z(θ)| = radius`
    /// whenever the plain box projection lies outside the ball; `|z(θ)|` is
    /// non-increasing in θ, so θ is found by bisection.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let z = self.clamp(y, 1.0);
        if norm(&z) <= self.radius {
            return z;
        }
        let (mut lo, mut hi) = (0.0, norm(y) / self.radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if norm(&self.clamp(y, 1.0 + mid)) > self.radius {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * (1.0 + hi) {
                break;
            }
        }
        let mut z = self.clamp(y, 1.0 + hi);
        let n = norm(&z);
        if n > self.radius {
            // Scaling toward the origin stays inside the box.
            let f = self.radius / n;
            z.iter_mut().for_each(|v| *v *= f);
        }
        z
    }

    fn subgradient(&self, start: Vec<f64>, best: &mut Best) {
        let mut z = start;
        let mut y = vec![0.0; self.dim];
        for k in 0..SUBGRADIENT_ITERS {
            let (v, i) = self.value(&z);
            best.offer(&z, v);
            let g = self.row(i);
            let gn = norm(g);
            if gn == 0.0 {
                return;
            }
            let eta = self.radius / ((k + 1) as f64).sqrt() / gn;
            for d in 0..self.dim {
                y[d] = z[d] - eta * g[d];
            }
            z = self.project(&y);
        }
        let (v, _) = self.value(&z);
        best.offer(&z, v);
    }

    /// Smoothed max `mu * ln sum exp(v_i / mu)` and its gradient.
    fn smoothed(&self, z: &[f64], mu: f64, vals: &mut [f64], grad: &mut [f64]) {
        let mut vmax = f64::NEG_INFINITY;
        for (i, v) in vals.iter_mut().enumerate() {
            *v = self.b[i] + dot(self.row(i), z);
            vmax = vmax.max(*v);
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut total = 0.0;
        for (i, v) in vals.iter().enumerate() {
            let w = ((v - vmax) / mu).exp();
            total += w;
            for (g, a) in grad.iter_mut().zip(self.row(i)) {
                *g += w * a;
            }
        }
        grad.iter_mut().for_each(|g| *g /= total);
    }

    /// Accelerated projected gradient on the smoothed objective, with the
    /// temperature lowered geometrically. The gradient of the smoothing is
    /// Lipschitz with constant `max|a_i|^2 / mu`, which fixes the step.
    fn polish(&self, best: &mut Best) {
        let gmax = (0..self.rows())
            .map(|i| norm(self.row(i)))
            .fold(0.0, f64::max);
        if gmax == 0.0 {
            return;
        }
        let mut vals = vec![0.0; self.rows()];
        let mut grad = vec![0.0; self.dim];
        let mut z = best.z.clone();
        let mut mu = 0.1 * self.radius * gmax;
        let mu_min = 1e-13 * (1.0 + best.value.abs());
        while mu > mu_min {
            let step = mu / (gmax * gmax);
            let mut y = z.clone();
            let mut theta = 1.0f64;
            for _ in 0..SMOOTH_ITERS {
                self.smoothed(&y, mu, &mut vals, &mut grad);
                let trial: Vec<f64> = y.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
                let z_next = self.project(&trial);
                let (v, _) = self.value(&z_next);
                best.offer(&z_next, v);

                let moved: f64 = norm(&sub(&z_next, &z));
                // Restart momentum when it points uphill.
                let restart = dot(&sub(&y, &z_next), &sub(&z_next, &z)) > 0.0;
                let theta_next = if restart {
                    1.0
                } else {
                    0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
                };
                let momentum = if restart {
                    0.0
                } else {
                    (theta - 1.0) / theta_next
                };
                y = z_next
                    .iter()
                    .zip(&z)
                    .map(|(a, b)| a + momentum * (a - b))
                    .collect();
                z = z_next;
                theta = theta_next;
                if moved <= 1e-15 * (1.0 + self.radius) {
                    break;
                }
            }
            mu *= 0.2;
        }
    }
}

/// A constraint that can hold with equality at an optimal vertex.
#[derive(Clone, Copy)]
enum Tight {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

impl Reduced {
    /// When the ball is slack the optimum is a vertex of the epigraph LP:
    /// `D + 1` of the row and box constraints hold with equality. Solving that
    /// system for the tightest constraints at the polished point removes the
    /// residual smoothing error.
    fn snap_to_vertex(&self, best: &mut Best) {
        let n = self.dim + 1;
        let t = best.value;
        let mut slack: Vec<(f64, Tight)> = (0..self.rows())
            .map(|i| (t - self.b[i] - dot(self.row(i), &best.z), Tight::Row(i)))
            .collect();
        for d in 0..self.dim {
            slack.push((best.z[d] - self.lo[d], Tight::Lower(d)));
            slack.push((self.hi[d] - best.z[d], Tight::Upper(d)));
        }
        slack.sort_by(|a, b| a.0.total_cmp(&b.0));
        let pool: Vec<Tight> = slack.iter().take(n + 1).map(|s| s.1).collect();
        if pool.len() < n {
            return;
        }
        for skip in 0..pool.len() {
            let chosen: Vec<Tight> = pool
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != skip || pool.len() == n)
                .map(|(_, c)| *c)
                .take(n)
                .collect();
            if !chosen.iter().any(|c| matches!(c, Tight::Row(_))) {
                continue;
            }
            if let Some(z) = self.solve_vertex(&chosen) {
                let (v, _) = self.value(&z);
                best.offer(&z, v);
            }
            if pool.len() == n {
                break;
            }
        }
    }

    /// Solves for `(z, t)` with every chosen constraint active; `None` if the
    /// system is singular or the vertex is infeasible.
    fn solve_vertex(&self, chosen: &[Tight]) -> Option<Vec<f64>> {
        let n = self.dim + 1;
        let mut m = vec![0.0; n * (n + 1)];
        for (r, c) in chosen.iter().enumerate() {
            let row = &mut m[r * (n + 1)..(r + 1) * (n + 1)];
            match *c {
                Tight::Row(i) => {
                    row[..self.dim].copy_from_slice(self.row(i));
                    row[self.dim] = -1.0;
                    row[n] = -self.b[i];
                }
                Tight::Lower(d) => {
                    row[d] = 1.0;
                    row[n] = self.lo[d];
                }
                Tight::Upper(d) => {
                    row[d] = 1.0;
                    row[n] = self.hi[d];
                }
            }
        }
        let sol = gauss_solve(&mut m, n)?;
        let tol = 1e-12 * (1.0 + self.radius);
        let z: Vec<f64> = (0..self.dim)
            .map(|d| {
                let v = sol[d];
                (v >= self.lo[d] - tol && v <= self.hi[d] + tol)
                    .then(|| v.max(self.lo[d]).min(self.hi[d]))
            })
            .collect::<Option<_>>()?;
        (norm(&z) <= self.radius).then_some(z)
    }
}

/// Gaussian elimination with partial pivoting on an `n x (n + 1)` augmented
/// matrix stored row-major.
fn gauss_solve(m: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let w = n + 1;
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&a, &b| m[a * w + col].abs().total_cmp(&m[b * w + col].abs()))?;
        if m[pivot * w + col].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..w {
                m.swap(pivot * w + k, col * w + k);
            }
        }
        for r in col + 1..n {
            let f = m[r * w + col] / m[col * w + col];
            for k in col..w {
                m[r * w + k] -= f * m[col * w + k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|k| m[r * w + k] * x[k]).sum();
        x[r] = (m[r * w + n] - tail) / m[r * w + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Deterministic unit vector for multi-start seeds.
fn hashed_direction(k: u64, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim as u64)
        .map(|d| 2.0 * unit_f64(splitmix64(0xD1B5_4A32_D192_ED03 ^ (k << 32) ^ d)) - 1.0)
        .collect();
    let n = norm(&v);
    if n == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(center: &[f64], response: &[f64], jac: &[f64]) -> LinearModel {
        LinearModel::new(
            DesignVector::new(center.to_vec()).unwrap(),
            ResponseCurve::from_db(response.to_vec()).unwrap(),
            jac.to_vec(),
        )
        .unwrap()
    }

    fn sweep(m: usize) -> FrequencySweep {
        FrequencySweep::uniform(5.0, 6.0, m, 5.0, 6.0).unwrap()
    }

    fn spec<'a>(
        m: &'a LinearModel,
        b: &'a Bounds,
        s: &'a FrequencySweep,
        radius: f64,
    ) -> SubproblemSpec<'a> {
        SubproblemSpec {
            model: m,
            bounds: b,
            radius,
            norm: NormMode::Euclidean,
            sweep: s,
        }
    }

    #[test]
    fn predict_matches_definition() {
        let m = model(&[1.0, 2.0], &[0.5, -1.0], &[2.0, 1.0, -1.0, 0.0]);
        assert_eq!(
            model_predict(&m, &[1.0, 2.0]).unwrap().as_slice(),
            &[0.5, -1.0]
        );
        assert_eq!(
            model_predict(&m, &[2.0, 2.0]).unwrap().as_slice(),
            &[2.5, -2.0]
        );
        assert_eq!(
            model_predict(&m, &[1.0, 3.0]).unwrap().as_slice(),
            &[1.5, -1.0]
        );
        assert!(model_predict(&m, &[1.0]).is_err());
    }

    #[test]
    fn model_rejects_bad_shapes() {
        let c = DesignVector::new(vec![0.0]).unwrap();
        let r = ResponseCurve::from_db(vec![0.0, 0.0]).unwrap();
        assert!(LinearModel::new(c.clone(), r.clone(), vec![1.0]).is_err());
        assert!(LinearModel::new(c, r, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn box_binds_before_ball() {
        let m = model(&[0.0], &[0.0], &[1.0]);
        let s = sweep(1);
        let b = Bounds::new(vec![-0.5], vec![10.0]).unwrap();
        let x = solve_tr_subproblem(&spec(&m, &b, &s, 1.0)).unwrap();
        assert!((x[0] + 0.5).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn ball_binds_before_box() {
        let m = model(&[0.0], &[0.0], &[1.0]);
        let s = sweep(1);
        let b = Bounds::new(vec![-10.0], vec![10.0]).unwrap();
        let x = solve_tr_subproblem(&spec(&m, &b, &s, 1.0)).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn symmetric_kink_stays_at_center() {
        let m = model(&[0.0], &[0.0, 0.0], &[1.0, -1.0]);
        let s = sweep(2);
        let b = Bounds::new(vec![-10.0], vec![10.0]).unwrap();
        let sp = spec(&m, &b, &s, 1.0);
        let x = solve_tr_subproblem(&sp).unwrap();
        assert_eq!(x.as_slice(), &[0.0]);
        assert_eq!(sp.model_objective(&x), 0.0);
    }

    #[test]
    fn grid_oracle_reproduces_worked_examples() {
        let s1 = sweep(1);
        let s2 = sweep(2);
        let slope = model(&[0.0], &[0.0], &[1.0]);
        let kink = model(&[0.0], &[0.0, 0.0], &[1.0, -1.0]);
        let narrow = Bounds::new(vec![-0.5], vec![10.0]).unwrap();
        let wide = Bounds::new(vec![-10.0], vec![10.0]).unwrap();
        let cell = 2.0 / 400.0;
        let x = subproblem_oracle_grid(&spec(&slope, &narrow, &s1, 1.0), 401).unwrap();
        assert!((x[0] + 0.5).abs() <= cell);
        let x = subproblem_oracle_grid(&spec(&slope, &wide, &s1, 1.0), 401).unwrap();
        assert!((x[0] + 1.0).abs() <= cell);
        let x = subproblem_oracle_grid(&spec(&kink, &wide, &s2, 1.0), 401).unwrap();
        assert!(x[0].abs() <= cell);
    }

    #[test]
    fn grid_oracle_ties_go_to_first_feasible_point() {
        let m = model(&[0.0, 0.0], &[-3.0], &[0.0, 0.0]);
        let s = sweep(1);
        let b = Bounds::new(vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let x = subproblem_oracle_grid(&spec(&m, &b, &s, 1.0), 11).unwrap();
        // Axis values are -1.0, -0.8, ..., 1.0; the first feasible index in
        // lexicographic order is (0, 5), i.e. (-1, 0).
        assert!((x[0] + 1.0).abs() < 1e-12 && x[1].abs() < 1e-12, "{x:?}");
        // The solver keeps the center for a flat model.
        assert_eq!(
            solve_tr_subproblem(&spec(&m, &b, &s, 1.0))
                .unwrap()
                .as_slice(),
            &[0.0, 0.0]
        );
    }

    #[test]
    fn grid_oracle_refuses_large_problems() {
        let m = model(&[0.0; 4], &[0.0], &[1.0; 4]);
        let s = sweep(1);
        let b = Bounds::new(vec![-1.0; 4], vec![1.0; 4]).unwrap();
        assert!(subproblem_oracle_grid(&spec(&m, &b, &s, 1.0), 11).is_err());
        let m = model(&[0.0], &[0.0], &[1.0]);
        let b = Bounds::new(vec![-1.0], vec![1.0]).unwrap();
        assert!(subproblem_oracle_grid(&spec(&m, &b, &s, 1.0), 10).is_err());
    }

    #[test]
    fn unit_box_norm_scales_by_range() {
        let b = Bounds::new(vec![0.0, 0.0], vec![10.0, 1.0]).unwrap();
        let d = NormMode::UnitBox.distance(&b, &[3.0, 0.5], &[0.0, 0.5]);
        assert!((d - 0.3).abs() < 1e-15);
        let m = model(&[5.0, 0.5], &[0.0], &[1.0, 0.0]);
        let s = sweep(1);
        let sp = SubproblemSpec {
            model: &m,
            bounds: &b,
            radius: 0.2,
            norm: NormMode::UnitBox,
            sweep: &s,
        };
        let x = solve_tr_subproblem(&sp).unwrap();
        // The second variable does not enter the model, so only the first is pinned.
        assert!(
            (x[0] - 3.0).abs() < 1e-9 && (x[1] - 0.5).abs() < 1e-6,
            "{x:?}"
        );
    }

    #[test]
    fn out_of_band_rows_are_ignored() {
        // Row 0 is out of band and would dominate if it were counted.
        let s = FrequencySweep::new(vec![4.0, 5.5], 5.0, 6.0).unwrap();
        let m = model(&[0.0], &[100.0, 0.0], &[-50.0, 1.0]);
        let b = Bounds::new(vec![-10.0], vec![10.0]).unwrap();
        let x = solve_tr_subproblem(&spec(&m, &b, &s, 1.0)).unwrap();
        assert!((x[0] + 1.0).abs() < 1e-12);
    }

    fn random_instance(seed: u64, rows: usize) -> (LinearModel, Bounds) {
        let mut state = seed;
        let mut next = || {
            state = splitmix64(state);
            2.0 * unit_f64(state) - 1.0
        };
        let center = vec![next() * 0.5, next() * 0.5];
        let response: Vec<f64> = (0..rows).map(|_| -20.0 + 5.0 * next()).collect();
        let jac: Vec<f64> = (0..rows * 2).map(|_| 3.0 * next()).collect();
        let b = Bounds::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        (model(&center, &response, &jac), b)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solver_is_feasible_and_never_worse(seed in any::<u64>(), radius in 0.01f64..3.0) {
            let (m, b) = random_instance(seed, 5);
            let s = sweep(5);
            let sp = spec(&m, &b, &s, radius);
            let x = solve_tr_subproblem(&sp).unwrap();
            prop_assert!(b.contains(&x));
            prop_assert!(NormMode::Euclidean.distance(&b, &x, m.center()) <= radius * (1.0 + 1e-12));
            prop_assert!(sp.model_objective(&x) <= sp.model_objective(m.center()));
        }

        #[test]
        fn larger_radius_never_hurts(seed in any::<u64>(), r1 in 0.01f64..1.5, grow in 1.0f64..3.0) {
            let (m, b) = random_instance(seed, 4);
            let s = sweep(4);
            let small = spec(&m, &b, &s, r1);
            let large = spec(&m, &b, &s, r1 * grow);
            let u_small = small.model_objective(&solve_tr_subproblem(&small).unwrap());
            let u_large = large.model_objective(&solve_tr_subproblem(&large).unwrap());
            prop_assert!(u_small >= u_large - 1e-9, "{} < {}", u_small, u_large);
        }

        #[test]
        fn projection_is_feasible_and_idempotent(
            y in proptest::collection::vec(-5.0f64..5.0, 3),
            radius in 0.05f64..4.0,
        ) {
            let m = model(&[0.2, -0.3, 0.0], &[0.0], &[1.0, 1.0, 1.0]);
            let b = Bounds::new(vec![-1.0, -2.0, -0.5], vec![1.0, 0.5, 3.0]).unwrap();
            let s = sweep(1);
            let red = Reduced::new(&spec(&m, &b, &s, radius));
            let z = red.project(&y);
            prop_assert!(norm(&z) <= radius * (1.0 + 1e-12));
            for d in 0..3 {
                prop_assert!(red.lo[d] <= z[d] && z[d] <= red.hi[d]);
            }
            let again = red.project(&z);
            for d in 0..3 {
                prop_assert!((again[d] - z[d]).abs() <= 1e-12);
            }
        }
    }
}
