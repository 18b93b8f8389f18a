//! Discretization of the periodic strip T x [0, Y]: grids, scalar fields,
//! discrete derivatives and weighted quadrature.
//!
//! The x-direction is periodic with spacing 1/nx and no duplicated seam
//! column; the y-direction spans [0, Y] with node 0 on the wall. Fields are
//! immutable values; every operator here is a pure function.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::deriv_weights;

/// Map from the uniform index space to physical y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Grading {
    Uniform,
    /// y_j = Y (e^{beta j/(ny-1)} - 1) / (e^beta - 1); clusters nodes at the wall.
    Exponential { beta: f64 },
}

/// Static description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Periodic nodes in x; spacing h_x = 1/nx.
    pub nx: usize,
    /// Nodes in y including the wall node j = 0.
    pub ny: usize,
    /// Truncation height of the strip.
    pub y_max: f64,
    /// Reference time step carried with the grid.
    pub dt: f64,
    pub grading: Grading,
}

impl GridSpec {
    pub fn uniform(nx: usize, ny: usize, y_max: f64, dt: f64) -> Self {
        GridSpec { nx, ny, y_max, dt, grading: Grading::Uniform }
    }

    pub fn exponential(nx: usize, ny: usize, y_max: f64, dt: f64, beta: f64) -> Self {
        GridSpec { nx, ny, y_max, dt, grading: Grading::Exponential { beta } }
    }
}

/// Materialized grid: node coordinates, quadrature weights and FFT plans.
///
/// Construction is the only fallible step; sizes of at least 8 in each
/// direction are expected by the higher-order wall stencils downstream.
pub struct Grid {
    pub spec: GridSpec,
    /// x_i = i/nx on the unit circle.
    pub x: Vec<f64>,
    /// Strictly increasing, y_0 = 0, y_{ny-1} = Y.
    pub y: Vec<f64>,
    /// Trapezoid weights over [0, Y].
    wy: Vec<f64>,
    fft_fwd: Arc<dyn Fft<f64>>,
    fft_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("spec", &self.spec).finish()
    }
}

/// Builds the grid, materializing coordinates and quadrature weights.
pub fn build_grid(spec: GridSpec) -> Result<Arc<Grid>> {
    if spec.nx == 0 || spec.ny < 2 {
        return Err(Error::InvalidSpec(format!(
            "grid sizes must be positive (nx = {}, ny = {})",
            spec.nx, spec.ny
        )));
    }
    if !(spec.y_max > 1.0) {
        return Err(Error::InvalidSpec(format!("need Y > 1, got Y = {}", spec.y_max)));
    }
    if !(spec.dt > 0.0) {
        return Err(Error::InvalidSpec(format!("need dt > 0, got dt = {}", spec.dt)));
    }
    if let Grading::Exponential { beta } = spec.grading {
        if !(beta > 0.0) {
            return Err(Error::InvalidSpec(format!("need beta > 0, got beta = {beta}")));
        }
    }

    let nx = spec.nx;
    let ny = spec.ny;
    let x: Vec<f64> = (0..nx).map(|i| i as f64 / nx as f64).collect();
    let n1 = (ny - 1) as f64;
    let y: Vec<f64> = match spec.grading {
        Grading::Uniform => (0..ny).map(|j| spec.y_max * j as f64 / n1).collect(),
        Grading::Exponential { beta } => (0..ny)
            .map(|j| spec.y_max * f64::exp_m1(beta * j as f64 / n1) / f64::exp_m1(beta))
            .collect(),
    };

    let mut wy = vec![0.0; ny];
    for j in 0..ny - 1 {
        let h = y[j + 1] - y[j];
        wy[j] += 0.5 * h;
        wy[j + 1] += 0.5 * h;
    }

    let mut planner = FftPlanner::new();
    let fft_fwd = planner.plan_fft_forward(nx);
    let fft_inv = planner.plan_fft_inverse(nx);

    Ok(Arc::new(Grid { spec, x, y, wy, fft_fwd, fft_inv }))
}

impl Grid {
    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn hx(&self) -> f64 {
        1.0 / self.spec.nx as f64
    }

    /// Smallest y spacing (at the wall under exponential grading).
    pub fn min_dy(&self) -> f64 {
        self.y
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid weight of node j over [0, Y].
    pub fn y_weight(&self, j: usize) -> f64 {
        self.wy[j]
    }

    pub(crate) fn plan_fwd(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_fwd
    }

    pub(crate) fn plan_inv(&self) -> &Arc<dyn Fft<f64>> {
        &self.fft_inv
    }

    /// Signed integer frequency of FFT bin m.
    fn freq(&self, m: usize) -> i64 {
        let nx = self.spec.nx as i64;
        let m = m as i64;
        if 2 * m <= nx {
            m
        } else {
            m - nx
        }
    }
}

/// Scalar field on the grid, indexed (i, j) = (x, y). Periodic in i.
#[derive(Clone)]
pub struct Field {
    values: Array2<f64>,
    grid: Arc<Grid>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("nx", &self.grid.nx())
            .field("ny", &self.grid.ny())
            .finish()
    }
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            values: Array2::zeros((grid.nx(), grid.ny())),
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = Array2::zeros((grid.nx(), grid.ny()));
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                values[[i, j]] = f(grid.x[i], grid.y[j]);
            }
        }
        let out = Field { values, grid: grid.clone() };
        debug_assert!(out.all_finite());
        out
    }

    pub fn from_array(grid: &Arc<Grid>, values: Array2<f64>) -> Field {
        assert_eq!(values.dim(), (grid.nx(), grid.ny()));
        let out = Field { values, grid: grid.clone() };
        debug_assert!(out.all_finite());
        out
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i % self.grid.nx(), j]]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::SolverError(format!("non-finite values after {context}")))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            values: self.values.mapv(|v| f(v)),
            grid: self.grid.clone(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Field { values, grid: self.grid.clone() }
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    /// Adds c * other in place of an allocation-heavy chain.
    pub fn add_scaled(&self, other: &Field, c: f64) -> Field {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Subtracts an x-profile from every row: f(x, y) - p(x).
    pub fn sub_profile(&self, p: &Profile) -> Field {
        let mut values = self.values.clone();
        for i in 0..self.grid.nx() {
            let pi = p.values[i];
            for j in 0..self.grid.ny() {
                values[[i, j]] -= pi;
            }
        }
        Field { values, grid: self.grid.clone() }
    }

    /// Multiplies each row j by w(y_j).
    pub fn mul_y_profile(&self, w: impl Fn(f64) -> f64) -> Field {
        let mut values = self.values.clone();
        for j in 0..self.grid.ny() {
            let wj = w(self.grid.y[j]);
            for i in 0..self.grid.nx() {
                values[[i, j]] *= wj;
            }
        }
        Field { values, grid: self.grid.clone() }
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Restriction to the wall row y = 0.
    pub fn wall_row(&self) -> Profile {
        let values = (0..self.grid.nx()).map(|i| self.values[[i, 0]]).collect();
        Profile { values, grid: self.grid.clone() }
    }

    /// Restriction to the top row y = Y.
    pub fn top_row(&self) -> Profile {
        let j = self.grid.ny() - 1;
        let values = (0..self.grid.nx()).map(|i| self.values[[i, j]]).collect();
        Profile { values, grid: self.grid.clone() }
    }
}

/// Periodic scalar on T alone (an x-profile), e.g. the outer flow U or the
/// pressure gradient trace.
#[derive(Clone)]
pub struct Profile {
    values: Vec<f64>,
    grid: Arc<Grid>,
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Profile").field("nx", &self.grid.nx()).finish()
    }
}

impl Profile {
    pub fn zeros(grid: &Arc<Grid>) -> Profile {
        Profile { values: vec![0.0; grid.nx()], grid: grid.clone() }
    }

    pub fn constant(grid: &Arc<Grid>, c: f64) -> Profile {
        Profile { values: vec![c; grid.nx()], grid: grid.clone() }
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> Profile {
        Profile {
            values: grid.x.iter().map(|&x| f(x)).collect(),
            grid: grid.clone(),
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Profile {
        assert_eq!(values.len(), grid.nx());
        Profile { values, grid: grid.clone() }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i % self.grid.nx()]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Profile {
        Profile {
            values: self.values.iter().map(|&v| f(v)).collect(),
            grid: self.grid.clone(),
        }
    }

    pub fn zip_map(&self, other: &Profile, f: impl Fn(f64, f64) -> f64) -> Profile {
        Profile {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            grid: self.grid.clone(),
        }
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L^2(T) norm with the exact-mean quadrature (1/nx) sum.
    pub fn l2(&self) -> f64 {
        let nx = self.grid.nx() as f64;
        (self.values.iter().map(|v| v * v).sum::<f64>() / nx).sqrt()
    }

    /// k-th x-derivative by Fourier diagonalization.
    pub fn deriv(&self, k: usize) -> Profile {
        let out = deriv_x_rows(&self.grid, &[self.values.clone()], k, DerivScheme::Fourier);
        Profile { values: out.into_iter().next().unwrap(), grid: self.grid.clone() }
    }

    /// Sobolev H^s(T) norm: sum of L^2 norms of x-derivatives up to order s.
    pub fn hs_norm(&self, s: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..=s {
            let d = if k == 0 { self.clone() } else { self.deriv(k) };
            total += d.l2().powi(2);
        }
        total.sqrt()
    }

    /// Expands the profile to a y-independent field.
    pub fn broadcast(&self) -> Field {
        let grid = &self.grid;
        let mut values = Array2::zeros((grid.nx(), grid.ny()));
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                values[[i, j]] = self.values[i];
            }
        }
        Field { values, grid: grid.clone() }
    }
}

/// Scheme selector for x-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DerivScheme {
    /// Discrete Fourier diagonalization; exact on resolved modes.
    Fourier,
    /// Second-order centered differences, for cross-validation.
    Centered,
}

/// Wall treatment for y-derivatives.
pub enum YBoundary<'a> {
    /// Second-order biased stencils at the wall.
    OneSided,
    /// Mirror ghost node carrying the Neumann value d_y f|_{y=0}.
    Ghost(&'a Profile),
}

fn deriv_x_rows(
    grid: &Arc<Grid>,
    rows: &[Vec<f64>],
    k: usize,
    scheme: DerivScheme,
) -> Vec<Vec<f64>> {
    let nx = grid.nx();
    match scheme {
        DerivScheme::Fourier => {
            let mut mult = vec![Complex64::new(0.0, 0.0); nx];
            for (m, mm) in mult.iter_mut().enumerate() {
                let f = grid.freq(m);
                // Nyquist mode of an odd derivative has no consistent sign; drop it.
                if nx % 2 == 0 && m == nx / 2 && k % 2 == 1 {
                    continue;
                }
                let ik = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f as f64);
                *mm = ik.powu(k as u32);
            }
            let mut buf = vec![Complex64::new(0.0, 0.0); nx];
            rows.iter()
                .map(|row| {
                    // The derivative of a constant row is identically zero; keep
                    // that exact so x-independent data stays exactly x-independent.
                    if row.iter().all(|&v| v == row[0]) {
                        return vec![0.0; nx];
                    }
                    for (b, &v) in buf.iter_mut().zip(row) {
                        *b = Complex64::new(v, 0.0);
                    }
                    grid.fft_fwd.process(&mut buf);
                    for (b, m) in buf.iter_mut().zip(&mult) {
                        *b *= m;
                    }
                    grid.fft_inv.process(&mut buf);
                    buf.iter().map(|c| c.re / nx as f64).collect()
                })
                .collect()
        }
        DerivScheme::Centered => {
            let hx = grid.hx();
            let mut out: Vec<Vec<f64>> = rows.to_vec();
            for _ in 0..k {
                for row in out.iter_mut() {
                    let prev = row.clone();
                    for i in 0..nx {
                        let ip = (i + 1) % nx;
                        let im = (i + nx - 1) % nx;
                        row[i] = (prev[ip] - prev[im]) / (2.0 * hx);
                    }
                }
            }
            out
        }
    }
}

/// Discrete k-th x-derivative with the default Fourier scheme.
pub fn deriv_x(f: &Field, k: usize) -> Field {
    deriv_x_scheme(f, k, DerivScheme::Fourier)
}

/// Discrete k-th x-derivative with an explicit scheme choice. k <= 6.
pub fn deriv_x_scheme(f: &Field, k: usize, scheme: DerivScheme) -> Field {
    assert!(k >= 1 && k <= 6, "x-derivative order {k} out of range 1..=6");
    let grid = f.grid();
    let ny = grid.ny();
    let rows: Vec<Vec<f64>> = (0..ny)
        .map(|j| (0..grid.nx()).map(|i| f.values[[i, j]]).collect())
        .collect();
    let drows = deriv_x_rows(grid, &rows, k, scheme);
    let mut values = Array2::zeros((grid.nx(), ny));
    for (j, row) in drows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            values[[i, j]] = v;
        }
    }
    Field::from_array(grid, values)
}

/// Window half-width rule: odd windows so interior stencils are centered.
fn y_window(k: usize) -> usize {
    match k {
        1 | 2 => 3,
        3 | 4 => 5,
        _ => 7,
    }
}

/// Discrete k-th y-derivative, k <= 5. Centered stencils in the interior,
/// second-order biased stencils at both ends; the `Ghost` wall mode imposes
/// the given Neumann value through a mirror node for k = 1, 2 and falls back
/// to one-sided stencils for higher orders.
pub fn deriv_y(f: &Field, k: usize, boundary: YBoundary<'_>) -> Field {
    assert!(k >= 1 && k <= 5, "y-derivative order {k} out of range 1..=5");
    let grid = f.grid();
    let nx = grid.nx();
    let ny = grid.ny();
    let w = y_window(k).min(ny);
    // Biased stencils need k+2 points to stay second order.
    let wb = (k + 2).max(w).min(ny);
    assert!(w > k, "grid too coarse for y-derivative of order {k}");
    let y = &grid.y;

    let mut values = Array2::zeros((nx, ny));
    let half = w / 2;
    for j in 0..ny {
        let centered = j >= half && j + half < ny;
        let width = if centered { w } else { wb };
        let lo = if centered { j - half } else { j.saturating_sub(width / 2).min(ny - width) };
        let pts = &y[lo..lo + width];
        let wts = deriv_weights(y[j], pts, k);
        for i in 0..nx {
            let mut acc = 0.0;
            for (o, &c) in wts.iter().enumerate() {
                acc += c * f.values[[i, lo + o]];
            }
            values[[i, j]] = acc;
        }
    }

    // Mirror-ghost wall rows: f_{-1} = f_1 - 2*dy0*g at y_{-1} = -y_1.
    if let YBoundary::Ghost(neumann) = boundary {
        let dy0 = y[1] - y[0];
        match k {
            1 => {
                for i in 0..nx {
                    values[[i, 0]] = neumann.values[i];
                }
            }
            2 => {
                for i in 0..nx {
                    values[[i, 0]] = (2.0 * f.values[[i, 1]]
                        - 2.0 * f.values[[i, 0]]
                        - 2.0 * dy0 * neumann.values[i])
                        / (dy0 * dy0);
                }
            }
            _ => {}
        }
    }

    Field::from_array(grid, values)
}

/// Result of an upper y-integration, with the tail-model reliability flag.
pub struct UpperIntegral {
    pub field: Field,
    /// Set when |f(., Y)| exceeds a tenth of max |f|, i.e. the closed-form
    /// tail cannot be trusted.
    pub tail_unreliable: bool,
}

/// Partial integrals I(x, y_j) = int_{y_j}^{infinity} f dy: trapezoid on
/// [y_j, Y] plus the closed-form tail f(x, Y) (1+Y)/sigma, which is exact for
/// f proportional to (1+y)^{-sigma-1}. Requires sigma > 1.
pub fn integrate_y_upper(f: &Field, tail_exponent: f64) -> Result<UpperIntegral> {
    if !(tail_exponent > 1.0) {
        return Err(Error::DomainError(format!(
            "tail exponent must exceed 1, got {tail_exponent}"
        )));
    }
    let grid = f.grid();
    let nx = grid.nx();
    let ny = grid.ny();
    let y = &grid.y;
    let y_top = grid.spec.y_max;

    let max_abs = f.linf();
    let top_abs = (0..nx).map(|i| f.values[[i, ny - 1]].abs()).fold(0.0, f64::max);
    let tail_unreliable = max_abs > 0.0 && top_abs > 0.1 * max_abs;

    let mut values = Array2::zeros((nx, ny));
    for i in 0..nx {
        let tail = f.values[[i, ny - 1]] * (1.0 + y_top) / tail_exponent;
        let mut acc = tail;
        values[[i, ny - 1]] = acc;
        for j in (0..ny - 1).rev() {
            let h = y[j + 1] - y[j];
            acc += 0.5 * h * (f.values[[i, j]] + f.values[[i, j + 1]]);
            values[[i, j]] = acc;
        }
    }
    Ok(UpperIntegral { field: Field::from_array(grid, values), tail_unreliable })
}

/// Cumulative integral from the wall: V(x, y_j) = int_0^{y_j} f dy by
/// trapezoid.
pub fn integrate_y_from_wall(f: &Field) -> Field {
    let grid = f.grid();
    let nx = grid.nx();
    let ny = grid.ny();
    let y = &grid.y;
    let mut values = Array2::zeros((nx, ny));
    for i in 0..nx {
        let mut acc = 0.0;
        values[[i, 0]] = 0.0;
        for j in 1..ny {
            let h = y[j] - y[j - 1];
            acc += 0.5 * h * (f.values[[i, j - 1]] + f.values[[i, j]]);
            values[[i, j]] = acc;
        }
    }
    Field::from_array(grid, values)
}

/// Weighted L^2 norm ( iint (1+y)^{2 lambda} f^2 dy dx )^{1/2} with trapezoid
/// quadrature in y and the exact mean in x; the domain is truncated at Y.
pub fn weighted_l2(f: &Field, lambda: f64) -> f64 {
    weighted_l2_below(f, lambda, f64::INFINITY)
}

/// Same as [`weighted_l2`] restricted to nodes with y <= y_cut.
pub fn weighted_l2_below(f: &Field, lambda: f64, y_cut: f64) -> f64 {
    let grid = f.grid();
    let nx = grid.nx();
    let ny = grid.ny();
    let mut total = 0.0;
    for j in 0..ny {
        if grid.y[j] > y_cut {
            break;
        }
        let w = grid.y_weight(j) * (1.0 + grid.y[j]).powf(2.0 * lambda);
        let mut row = 0.0;
        for i in 0..nx {
            let v = f.values[[i, j]];
            row += v * v;
        }
        total += w * row / nx as f64;
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(nx: usize, ny: usize, y_max: f64) -> Arc<Grid> {
        build_grid(GridSpec::uniform(nx, ny, y_max, 1e-3)).unwrap()
    }

    #[test]
    fn uniform_grading_nodes() {
        let g = build_grid(GridSpec::uniform(8, 5, 4.0, 1e-3)).unwrap();
        assert_eq!(g.y, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn exponential_grading_nodes() {
        // beta = ln 4 over 3 nodes: y = [0, 4*(2-1)/3, 4].
        let g = build_grid(GridSpec::exponential(8, 3, 4.0, 1e-3, 4.0_f64.ln())).unwrap();
        assert!((g.y[0] - 0.0).abs() < 1e-15);
        assert!((g.y[1] - 4.0 / 3.0).abs() < 1e-12);
        assert!((g.y[2] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_grid(GridSpec::uniform(0, 8, 4.0, 1e-3)).is_err());
        assert!(build_grid(GridSpec::uniform(8, 8, 0.5, 1e-3)).is_err());
        assert!(build_grid(GridSpec::uniform(8, 8, 4.0, 0.0)).is_err());
        assert!(build_grid(GridSpec::exponential(8, 8, 4.0, 1e-3, -1.0)).is_err());
    }

    #[test]
    fn fourier_derivative_of_resolved_mode() {
        let g = grid(32, 8, 4.0);
        let f = Field::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let d = deriv_x(&f, 1);
        let exact = Field::from_fn(&g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
        let err = d.sub(&exact).linf();
        assert!(err <= 1e-10, "err = {err}");
    }

    #[test]
    fn derivative_of_constant_exactly_zero() {
        let g = grid(16, 8, 4.0);
        let f = Field::from_fn(&g, |_, _| 3.25);
        for k in 1..=6 {
            assert_eq!(deriv_x(&f, k).linf(), 0.0);
        }
    }

    #[test]
    fn centered_x_scheme_is_second_order() {
        let errs: Vec<f64> = [32usize, 64]
            .iter()
            .map(|&nx| {
                let g = grid(nx, 8, 4.0);
                let f = Field::from_fn(&g, |x, _| (2.0 * PI * x).sin());
                let d = deriv_x_scheme(&f, 1, DerivScheme::Centered);
                let exact = Field::from_fn(&g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
                d.sub(&exact).linf()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((1.9..=2.1).contains(&order), "order = {order}");
    }

    #[test]
    fn deriv_y_exact_on_quadratics() {
        let g = grid(8, 33, 4.0);
        let f = Field::from_fn(&g, |_, y| y * y);
        let d = deriv_y(&f, 1, YBoundary::OneSided);
        for j in 1..g.ny() - 1 {
            assert!((d.values[[0, j]] - 2.0 * g.y[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn deriv_y_second_derivative_converges() {
        let errs: Vec<f64> = [65usize, 129]
            .iter()
            .map(|&ny| {
                let g = grid(8, ny, 4.0);
                let f = Field::from_fn(&g, |_, y| (-y).exp());
                let d = deriv_y(&f, 2, YBoundary::OneSided);
                let exact = Field::from_fn(&g, |_, y| (-y).exp());
                d.sub(&exact).linf()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(order >= 1.8, "order = {order}");
    }

    #[test]
    fn ghost_first_derivative_reproduces_neumann_value() {
        let g = grid(8, 17, 4.0);
        let f = Field::from_fn(&g, |_, y| y);
        let one = Profile::constant(&g, 1.0);
        let d = deriv_y(&f, 1, YBoundary::Ghost(&one));
        assert_eq!(d.values[[3, 0]], 1.0);
    }

    #[test]
    fn upper_integral_of_inverse_square() {
        // int_y^inf (1+t)^-2 dt = (1+y)^-1; model exponent 1 makes the tail exact.
        let g = build_grid(GridSpec::exponential(8, 256, 30.0, 1e-3, 2.0)).unwrap();
        let f = Field::from_fn(&g, |_, y| (1.0 + y).powi(-2));
        let out = integrate_y_upper(&f, 2.0).unwrap();
        let err = (out.field.values()[[0, 0]] - 1.0 / 2.0_f64).abs();
        // At sigma = 2 the tail model underestimates; check the tuned exponent.
        let tuned = integrate_y_upper(&f, 1.0 + 1e-9).unwrap();
        let err_tuned = (tuned.field.values()[[0, 0]] - 1.0).abs();
        assert!(err_tuned <= 1e-3, "tuned err = {err_tuned}");
        assert!(err > err_tuned);
    }

    #[test]
    fn upper_integral_of_exponential() {
        let g = grid(8, 256, 30.0);
        let f = Field::from_fn(&g, |_, y| (-y).exp());
        let out = integrate_y_upper(&f, 2.0).unwrap();
        let err = (out.field.values()[[0, 0]] - 1.0).abs();
        assert!(err <= 2e-3, "err = {err}");
        assert!(!out.tail_unreliable);
    }

    #[test]
    fn upper_integral_zero_field() {
        let g = grid(8, 32, 4.0);
        let f = Field::zeros(&g);
        let out = integrate_y_upper(&f, 2.0).unwrap();
        assert_eq!(out.field.linf(), 0.0);
        assert!(!out.tail_unreliable);
    }

    #[test]
    fn upper_integral_flags_nondecaying_input() {
        let g = grid(8, 32, 4.0);
        let f = Field::from_fn(&g, |_, _| 1.0);
        let out = integrate_y_upper(&f, 2.0).unwrap();
        assert!(out.tail_unreliable);
    }

    #[test]
    fn weighted_l2_inverse_square_weight_one() {
        // ||(1+y)^1 (1+y)^-2||^2 = int_0^Y (1+y)^-2 = 1 - 1/(1+Y).
        let g = build_grid(GridSpec::exponential(8, 512, 30.0, 1e-3, 2.0)).unwrap();
        let f = Field::from_fn(&g, |_, y| (1.0 + y).powi(-2));
        let got = weighted_l2(&f, 1.0);
        let want = (1.0 - 1.0 / 31.0_f64).sqrt();
        assert!((got - want).abs() <= 1e-3, "got {got}, want {want}");
    }

    #[test]
    fn weighted_l2_constant() {
        let g = grid(8, 513, 30.0);
        let f = Field::from_fn(&g, |_, _| 1.0);
        assert!((weighted_l2(&f, 0.0) - 30.0_f64.sqrt()).abs() < 1e-12);
        assert_eq!(weighted_l2(&Field::zeros(&g), 1.0), 0.0);
    }

    #[test]
    fn deriv_x_shift_equivariance() {
        let g = grid(16, 8, 4.0);
        let f = Field::from_fn(&g, |x, y| (2.0 * PI * x).sin() + 0.3 * (4.0 * PI * x).cos() * y);
        let shifted = Field::from_fn(&g, |x, y| {
            let xs = (x + g.hx()).rem_euclid(1.0);
            (2.0 * PI * xs).sin() + 0.3 * (4.0 * PI * xs).cos() * y
        });
        for scheme in [DerivScheme::Fourier, DerivScheme::Centered] {
            let d = deriv_x_scheme(&f, 1, scheme);
            let ds = deriv_x_scheme(&shifted, 1, scheme);
            let mut err: f64 = 0.0;
            for i in 0..g.nx() {
                for j in 0..g.ny() {
                    err = err.max((ds.values[[i, j]] - d.values[[(i + 1) % g.nx(), j]]).abs());
                }
            }
            assert!(err <= 1e-11, "{scheme:?}: err = {err}");
        }
    }
}
