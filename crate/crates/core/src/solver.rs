//! Time integration of the regularized vorticity system, its truncated and
//! linearized variants, velocity reconstruction and the standard datum.
//!
//! One IMEX step treats the advection term (optionally multiplied by the
//! cutoff chi_R) explicitly and the eps^2 d_xx + d_yy diffusion implicitly:
//! the x-direction is diagonalized by the discrete Fourier transform, which
//! leaves one real tridiagonal solve in y per mode. The wall row carries the
//! Neumann condition d_y omega|_{y=0} = d_x p through a mirror ghost node and
//! the top row a homogeneous Neumann condition.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{
    deriv_x, deriv_y, integrate_y_from_wall, integrate_y_upper, Field, Grid, Profile, YBoundary,
};
use crate::norms::{membership, NormParams};

/// Advective CFL safety factor.
pub const CFL_SAFETY: f64 = 0.5;

/// Smooth cutoff profile chi on [0, infinity): identically 1 on [0,1],
/// supported in [0,2], monotone, with slope bounded below by -2. Built from
/// the exp(-p/s) mollified step; the steepness p < 1 keeps the slope bound
/// strict with margin (the midpoint slope is exactly -2p).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CutoffChi {
    pub steepness: f64,
}

impl Default for CutoffChi {
    fn default() -> Self {
        CutoffChi { steepness: 0.9 }
    }
}

impl CutoffChi {
    fn mollifier(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else {
            (-self.steepness / s).exp()
        }
    }

    /// chi(t).
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 1.0 {
            1.0
        } else if t >= 2.0 {
            0.0
        } else {
            let s = t - 1.0;
            let a = self.mollifier(1.0 - s);
            let b = self.mollifier(s);
            a / (a + b)
        }
    }

    /// chi_R(y) = chi(y / R).
    pub fn eval_scaled(&self, y: f64, r: f64) -> f64 {
        self.eval(y / r)
    }

    /// Numerically audits the four profile constraints on a fine 1D grid:
    /// 0 <= chi <= 1, chi = 1 on [0,1], supp chi in [0,2], -2 <= chi' <= 0.
    pub fn check_properties(&self, n: usize) -> ChiPropertyReport {
        let h = 3.0 / (n - 1) as f64;
        let mut in_range = true;
        let mut one_on_unit = true;
        let mut supported = true;
        let mut slope_min: f64 = 0.0;
        let mut slope_max: f64 = 0.0;
        for k in 0..n {
            let t = k as f64 * h;
            let v = self.eval(t);
            in_range &= (0.0..=1.0).contains(&v);
            if t <= 1.0 {
                one_on_unit &= v == 1.0;
            }
            if t >= 2.0 {
                supported &= v == 0.0;
            }
            if k > 0 && k < n - 1 {
                let d = (self.eval(t + h) - self.eval(t - h)) / (2.0 * h);
                slope_min = slope_min.min(d);
                slope_max = slope_max.max(d);
            }
        }
        ChiPropertyReport { in_range, one_on_unit, supported, slope_min, slope_max }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChiPropertyReport {
    pub in_range: bool,
    pub one_on_unit: bool,
    pub supported: bool,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl ChiPropertyReport {
    pub fn all_hold(&self) -> bool {
        self.in_range
            && self.one_on_unit
            && self.supported
            && self.slope_min >= -2.0 + 1e-6
            && self.slope_max <= 0.0 + 1e-9
    }
}

/// Time integrator choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Explicit advection, backward-Euler diffusion; first order in time.
    ImexEuler,
    /// Symmetrized split: half-step advection (Heun), Crank-Nicolson
    /// diffusion, half-step advection; second order on smooth problems.
    Strang,
}

/// Scheme configuration for the time stepper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub integrator: Integrator,
    pub dt: f64,
    /// Truncation radius R >= 1; `None` runs the untruncated system.
    pub truncation: Option<f64>,
    pub matching_tol: f64,
    pub cutoff: CutoffChi,
    /// Additive fault injected into the wall Neumann datum; diagnostic knob
    /// for the boundary-check tests, zero in every real run.
    pub wall_fault: f64,
}

impl SchemeConfig {
    pub fn new(integrator: Integrator, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
        }
        Ok(SchemeConfig {
            integrator,
            dt,
            truncation: None,
            matching_tol: 1e-3,
            cutoff: CutoffChi::default(),
            wall_fault: 0.0,
        })
    }

    pub fn with_truncation(mut self, r: f64) -> Result<Self> {
        if !(r >= 1.0) {
            return Err(Error::InvalidSpec(format!("truncation radius must be >= 1, got {r}")));
        }
        self.truncation = Some(r);
        Ok(self)
    }
}

/// One snapshot of the regularized system: vorticity plus the reconstructed
/// velocity field, the outer flow and the pressure-gradient trace.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub t: f64,
    pub omega: Field,
    pub u: Field,
    pub v: Field,
    pub outer: Profile,
    pub px: Profile,
    pub eps: f64,
    pub params: NormParams,
}

impl SolverState {
    /// Builds the initial state: the pressure gradient comes from the
    /// regularized Bernoulli law and (u, v) from the vorticity.
    pub fn new(omega0: Field, outer: Profile, eps: f64, params: NormParams) -> Result<SolverState> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidSpec(format!("eps must be >= 0, got {eps}")));
        }
        let px = regularized_px(&outer, eps);
        let (u, v) = reconstruct_velocity(&omega0, &outer, &params)?;
        Ok(SolverState { t: 0.0, omega: omega0, u, v, outer, px, eps, params })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.omega.grid()
    }

    /// Largest stable dt under the advective CFL condition.
    pub fn cfl_limit(&self) -> f64 {
        let grid = self.grid();
        let max_u = self.u.linf();
        let max_v = self.v.linf();
        let tx = if max_u > 0.0 { grid.hx() / max_u } else { f64::INFINITY };
        let ty = if max_v > 0.0 { grid.min_dy() / max_v } else { f64::INFINITY };
        CFL_SAFETY * tx.min(ty)
    }

    /// Matching-condition residual max_x |int_0^inf omega dy - U|.
    pub fn matching_residual(&self) -> f64 {
        let integral = integrate_y_upper(&self.omega, tail_exponent(&self.params))
            .expect("tail exponent is validated at construction");
        integral
            .field
            .wall_row()
            .zip_map(&self.outer, |a, b| a - b)
            .linf()
    }
}

fn tail_exponent(p: &NormParams) -> f64 {
    // The class decay (1+y)^{-sigma} makes sigma - 1 the matching tail model;
    // clamp into the admissible range of the quadrature.
    (p.sigma - 1.0).max(1.0 + 1e-9)
}

/// Pressure gradient from the regularized Bernoulli law for a stationary
/// outer flow: d_x p = eps^2 d_xx U - U d_x U.
pub fn regularized_px(outer: &Profile, eps: f64) -> Profile {
    let du = outer.deriv(1);
    let ddu = outer.deriv(2);
    let mut vals = Vec::with_capacity(outer.values().len());
    for i in 0..outer.values().len() {
        vals.push(eps * eps * ddu.values()[i] - outer.values()[i] * du.values()[i]);
    }
    Profile::from_values(outer.grid(), vals)
}

/// Velocity reconstruction u = U - int_y^inf omega, v = - int_0^y d_x u.
pub fn reconstruct_velocity(
    omega: &Field,
    outer: &Profile,
    params: &NormParams,
) -> Result<(Field, Field)> {
    let upper = integrate_y_upper(omega, tail_exponent(params))?;
    let u = upper.field.map(|v| -v).add(&outer.broadcast());
    let dxu = deriv_x(&u, 1);
    let v = integrate_y_from_wall(&dxu).map(|w| -w);
    Ok((u, v))
}

/// Standard initial datum omega_0 = b (1+y)^{-sigma} (1 + a cos(2 pi x) e^{-y})
/// with the outer flow U_0 = int_0^inf omega_0 dy. The amplitude is halved
/// (at most five times) until membership in the class with margin 2 delta
/// holds.
pub fn make_standard_datum(
    grid: &Arc<Grid>,
    p: &NormParams,
    amplitude: f64,
    scale: f64,
) -> Result<(Field, Profile)> {
    if !(2.0 * p.delta < 1.0) {
        return Err(Error::InvalidSpec(format!(
            "datum requires delta < 1/2 so the 2 delta margin is a valid class, got {}",
            p.delta
        )));
    }
    let margin = NormParams { delta: 2.0 * p.delta, ..*p };
    let mut a = amplitude;
    for _ in 0..=5 {
        let omega0 = Field::from_fn(grid, |x, y| {
            scale
                * (1.0 + y).powf(-p.sigma)
                * (1.0 + a * (2.0 * std::f64::consts::PI * x).cos() * (-y).exp())
        });
        if membership(&omega0, &margin).in_class {
            let outer = integrate_y_upper(&omega0, tail_exponent(p))?.field.wall_row();
            return Ok((omega0, outer));
        }
        a *= 0.5;
    }
    Err(Error::CannotSatisfyClass { retries: 5 })
}

/// Explicit advection u d_x omega + v d_y omega, cutoff-multiplied when a
/// truncation radius is present. The wall y-stencil carries the Neumann
/// ghost value d_y omega|_0 = d_x p.
fn advection(state: &SolverState, cfg: &SchemeConfig, omega: &Field, u: &Field, v: &Field) -> Field {
    let dxw = deriv_x(omega, 1);
    let dyw = deriv_y(omega, 1, YBoundary::Ghost(&state.px));
    let mut adv = u.mul(&dxw).add(&v.mul(&dyw));
    if let Some(r) = cfg.truncation {
        let chi = cfg.cutoff;
        adv = adv.mul_y_profile(|y| chi.eval_scaled(y, r));
    }
    adv
}

/// Right-hand side of the vorticity equation,
/// -u d_x omega - v d_y omega + eps^2 d_xx omega + d_yy omega,
/// with the Neumann ghost value used in every wall-touching y-stencil.
pub fn rhs_vorticity(state: &SolverState) -> Field {
    let dxw = deriv_x(&state.omega, 1);
    let dyw = deriv_y(&state.omega, 1, YBoundary::Ghost(&state.px));
    let dyyw = deriv_y(&state.omega, 2, YBoundary::Ghost(&state.px));
    let mut rhs = state
        .u
        .mul(&dxw)
        .add(&state.v.mul(&dyw))
        .map(|v| -v)
        .add(&dyyw);
    if state.eps > 0.0 {
        let dxxw = deriv_x(&state.omega, 2);
        rhs = rhs.add_scaled(&dxxw, state.eps * state.eps);
    }
    rhs
}

/// Per-mode implicit y-solve apparatus: real tridiagonal rows of the
/// diffusion operator with the ghost wall row and homogeneous Neumann top.
pub(crate) struct DiffusionOperator {
    /// d2 rows: lower, diag, upper (ghost rows folded in).
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// Affine wall contribution per unit Neumann datum: row 0 gets -2 g / dy0.
    wall_coeff: f64,
}

impl DiffusionOperator {
    pub(crate) fn new(grid: &Grid) -> DiffusionOperator {
        let ny = grid.ny();
        let y = &grid.y;
        let mut lower = vec![0.0; ny];
        let mut diag = vec![0.0; ny];
        let mut upper = vec![0.0; ny];
        // Wall: mirror ghost at -y_1 makes the stencil locally uniform.
        let dy0 = y[1] - y[0];
        diag[0] = -2.0 / (dy0 * dy0);
        upper[0] = 2.0 / (dy0 * dy0);
        for j in 1..ny - 1 {
            let hm = y[j] - y[j - 1];
            let hp = y[j + 1] - y[j];
            lower[j] = 2.0 / (hm * (hm + hp));
            diag[j] = -2.0 / (hm * hp);
            upper[j] = 2.0 / (hp * (hm + hp));
        }
        // Top: zero-slope mirror.
        let dyl = y[ny - 1] - y[ny - 2];
        lower[ny - 1] = 2.0 / (dyl * dyl);
        diag[ny - 1] = -2.0 / (dyl * dyl);
        DiffusionOperator { lower, diag, upper, wall_coeff: -2.0 / dy0 }
    }

    /// Applies L_m = -eps^2 k^2 + d_yy (plus the affine wall term) to a mode
    /// column.
    fn apply(&self, col: &[Complex64], k2eps2: f64, wall_datum: Complex64) -> Vec<Complex64> {
        let ny = col.len();
        let mut out = vec![Complex64::new(0.0, 0.0); ny];
        for j in 0..ny {
            let mut acc = self.diag[j] * col[j] - k2eps2 * col[j];
            if j > 0 {
                acc += self.lower[j] * col[j - 1];
            }
            if j + 1 < ny {
                acc += self.upper[j] * col[j + 1];
            }
            out[j] = acc;
        }
        out[0] += self.wall_coeff * wall_datum;
        out
    }

    /// Solves (I - theta dt L_m) out = rhs for one mode.
    fn solve(
        &self,
        rhs: &mut [Complex64],
        theta_dt: f64,
        k2eps2: f64,
        scratch: &mut Vec<f64>,
    ) -> Result<()> {
        let ny = rhs.len();
        let mut lower = vec![0.0; ny];
        let mut diag = vec![0.0; ny];
        let mut upper = vec![0.0; ny];
        for j in 0..ny {
            lower[j] = -theta_dt * self.lower[j];
            diag[j] = 1.0 - theta_dt * (self.diag[j] - k2eps2);
            upper[j] = -theta_dt * self.upper[j];
        }
        if crate::stencil::solve_tridiagonal(&lower, &diag, &upper, rhs, scratch) {
            Ok(())
        } else {
            Err(Error::SolverError("tridiagonal pivot degenerated".into()))
        }
    }
}

/// Forward FFT of every y-row; columns indexed by mode.
pub(crate) fn fft_columns(field: &Field) -> Vec<Vec<Complex64>> {
    let grid = field.grid();
    let nx = grid.nx();
    let ny = grid.ny();
    let mut cols = vec![vec![Complex64::new(0.0, 0.0); ny]; nx];
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for i in 0..nx {
            buf[i] = Complex64::new(field.values()[[i, j]], 0.0);
        }
        grid.plan_fwd().process(&mut buf);
        for m in 0..nx {
            cols[m][j] = buf[m];
        }
    }
    cols
}

pub(crate) fn ifft_columns(grid: &Arc<Grid>, cols: &[Vec<Complex64>]) -> Field {
    let nx = grid.nx();
    let ny = grid.ny();
    let mut values = ndarray::Array2::zeros((nx, ny));
    let mut buf = vec![Complex64::new(0.0, 0.0); nx];
    for j in 0..ny {
        for m in 0..nx {
            buf[m] = cols[m][j];
        }
        grid.plan_inv().process(&mut buf);
        for i in 0..nx {
            values[[i, j]] = buf[i].re / nx as f64;
        }
    }
    Field::from_array(grid, values)
}

pub(crate) fn fft_profile(p: &Profile) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = p.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    p.grid().plan_fwd().process(&mut buf);
    buf
}

pub(crate) fn mode_k2(grid: &Grid, m: usize) -> f64 {
    let nx = grid.nx() as i64;
    let mm = if 2 * (m as i64) <= nx { m as i64 } else { m as i64 - nx };
    let k = 2.0 * std::f64::consts::PI * mm as f64;
    k * k
}

/// Implicit diffusion solve: out satisfies
/// (I - theta dt L) out = explicit + (extra_dt) L explicit_l + dt * wall term,
/// assembled per x-mode. theta = 1 is backward Euler, theta = 1/2 with
/// `crank_lhs` set adds the (I + dt/2 L) application of Crank-Nicolson.
fn diffuse(
    grid: &Arc<Grid>,
    op: &DiffusionOperator,
    input: &Field,
    wall: &Profile,
    eps: f64,
    dt: f64,
    crank: bool,
) -> Result<Field> {
    let mut cols = fft_columns(input);
    let wall_hat = fft_profile(wall);
    let mut scratch = Vec::new();
    let theta = if crank { 0.5 } else { 1.0 };
    for (m, col) in cols.iter_mut().enumerate() {
        let k2eps2 = eps * eps * mode_k2(grid, m);
        if crank {
            let applied = op.apply(col, k2eps2, wall_hat[m]);
            for (c, a) in col.iter_mut().zip(&applied) {
                *c += 0.5 * dt * a;
            }
            // The wall term of the implicit half enters through the rhs.
            col[0] += 0.5 * dt * op.wall_coeff * wall_hat[m];
        } else {
            col[0] += dt * op.wall_coeff * wall_hat[m];
        }
        op.solve(col, theta * dt, k2eps2, &mut scratch)?;
    }
    Ok(ifft_columns(grid, &cols))
}

fn effective_wall(state: &SolverState, cfg: &SchemeConfig) -> Profile {
    if cfg.wall_fault == 0.0 {
        state.px.clone()
    } else {
        state.px.map(|v| v + cfg.wall_fault)
    }
}

/// Advances the state by one IMEX step. The CFL precondition is enforced;
/// velocities are re-reconstructed from the new vorticity.
pub fn step(state: &SolverState, cfg: &SchemeConfig) -> Result<SolverState> {
    let limit = state.cfl_limit();
    if cfg.dt > limit {
        return Err(Error::UnstableStep { dt: cfg.dt, limit });
    }
    let grid = state.grid().clone();
    let op = DiffusionOperator::new(&grid);
    let wall = effective_wall(state, cfg);
    let dt = cfg.dt;

    let omega_new = match cfg.integrator {
        Integrator::ImexEuler => {
            let adv = advection(state, cfg, &state.omega, &state.u, &state.v);
            let star = state.omega.add_scaled(&adv, -dt);
            diffuse(&grid, &op, &star, &wall, state.eps, dt, false)?
        }
        Integrator::Strang => {
            let half = |w: &Field| -> Result<Field> {
                // Heun sub-steps for the advection half-flow.
                let (u1, v1) = reconstruct_velocity(w, &state.outer, &state.params)?;
                let k1 = advection(state, cfg, w, &u1, &v1);
                let mid = w.add_scaled(&k1, -0.5 * dt);
                let (u2, v2) = reconstruct_velocity(&mid, &state.outer, &state.params)?;
                let k2 = advection(state, cfg, &mid, &u2, &v2);
                Ok(w.add_scaled(&k1.add(&k2), -0.25 * dt))
            };
            let a = half(&state.omega)?;
            let b = diffuse(&grid, &op, &a, &wall, state.eps, dt, true)?;
            half(&b)?
        }
    };
    omega_new.ensure_finite("time step")?;
    let (u, v) = reconstruct_velocity(&omega_new, &state.outer, &state.params)?;
    Ok(SolverState {
        t: state.t + dt,
        omega: omega_new,
        u,
        v,
        outer: state.outer.clone(),
        px: state.px.clone(),
        eps: state.eps,
        params: state.params,
    })
}

/// Propagates the linear inhomogeneous problem
/// d_t w = eps^2 d_xx w + d_yy w - sources(t), d_y w|_0 = px,
/// with the same implicit machinery as [`step`]. `sources` holds the forcing
/// at every sample time (n_steps + 1 entries). Returns the full trajectory.
pub fn propagate_linear(
    w0: &Field,
    sources: &[Field],
    px: &Profile,
    eps: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<Vec<Field>> {
    assert!(!sources.is_empty(), "need sources at every sample time");
    let n_steps = sources.len() - 1;
    let grid = w0.grid().clone();
    let op = DiffusionOperator::new(&grid);
    let mut traj = Vec::with_capacity(n_steps + 1);
    traj.push(w0.clone());
    for k in 0..n_steps {
        let prev = traj.last().unwrap();
        let next = match integrator {
            Integrator::ImexEuler => {
                let star = prev.add_scaled(&sources[k], -dt);
                diffuse(&grid, &op, &star, px, eps, dt, false)?
            }
            Integrator::Strang => {
                let mid = sources[k].add(&sources[k + 1]).scale(0.5);
                let star = prev.add_scaled(&mid, -dt);
                diffuse(&grid, &op, &star, px, eps, dt, true)?
            }
        };
        next.ensure_finite("linear propagation")?;
        traj.push(next);
    }
    Ok(traj)
}

/// Result of the Picard fixed-point iteration.
pub struct PicardResult {
    /// iterates[n][k] is the n-th iterate at time k dt; iterate 0 is the
    /// initial datum held constant in time.
    pub iterates: Vec<Vec<Field>>,
    /// cauchy_gaps[n] = sup_t || w^{n+1} - w^n ||_{L^2}.
    pub cauchy_gaps: Vec<f64>,
}

/// Picard iteration for the linearized, truncated, regularized system:
/// iterate n+1 solves the linear parabolic problem with the transport term
/// frozen at iterate n. Requires eps > 0 and a truncation radius.
pub fn picard_solve(
    omega0: &Field,
    outer: &Profile,
    eps: f64,
    cfg: &SchemeConfig,
    params: &NormParams,
    n_iters: usize,
    t_end: f64,
) -> Result<PicardResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "the linearized system is regularized: eps must be positive, got {eps}"
        )));
    }
    let Some(r) = cfg.truncation else {
        return Err(Error::InvalidSpec(
            "picard iteration requires a truncation radius".into(),
        ));
    };
    let n_steps = (t_end / cfg.dt).round().max(0.0) as usize;
    let px = regularized_px(outer, eps);
    let chi = cfg.cutoff;

    let mut iterates: Vec<Vec<Field>> = vec![vec![omega0.clone(); n_steps + 1]];
    let mut cauchy_gaps = Vec::new();
    let mut growth_streak = 0usize;

    for n in 0..n_iters {
        // Frozen transport source chi_R { u^n d_x w^n + v^n d_y w^n }.
        let prev = &iterates[n];
        let mut sources = Vec::with_capacity(n_steps + 1);
        for w in prev {
            let (u, v) = reconstruct_velocity(w, outer, params)?;
            let dxw = deriv_x(w, 1);
            let dyw = deriv_y(w, 1, YBoundary::Ghost(&px));
            let adv = u.mul(&dxw).add(&v.mul(&dyw)).mul_y_profile(|y| chi.eval_scaled(y, r));
            sources.push(adv);
        }
        let next = propagate_linear(omega0, &sources, &px, eps, cfg.dt, Integrator::ImexEuler)?;

        let gap = next
            .iter()
            .zip(prev)
            .map(|(a, b)| crate::grid::weighted_l2(&a.sub(b), 0.0))
            .fold(0.0, f64::max);
        if let Some(&last) = cauchy_gaps.last() {
            if gap > last {
                growth_streak += 1;
                if growth_streak >= 3 {
                    return Err(Error::PicardDiverged { iterate: n });
                }
            } else {
                growth_streak = 0;
            }
        }
        cauchy_gaps.push(gap);
        iterates.push(next);
    }
    Ok(PicardResult { iterates, cauchy_gaps })
}

/// Supremum over a run of the wall velocity, ||u(., 0)||_inf. The wall trace
/// solves a viscous Burgers equation with zero data, so it must stay at zero;
/// growth flags a broken Neumann wall row.
pub fn wall_burgers_residual(states: &[SolverState]) -> f64 {
    states
        .iter()
        .map(|s| s.u.wall_row().linf())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, weighted_l2, GridSpec};
    use crate::norms::membership;

    fn params() -> NormParams {
        NormParams::new(4, 1.0, 2.6, 0.05).unwrap()
    }

    fn graded_grid(nx: usize, ny: usize) -> std::sync::Arc<Grid> {
        build_grid(GridSpec::exponential(nx, ny, 30.0, 1e-3, 3.0)).unwrap()
    }

    /// Independently written 1D Crank-Nicolson heat solve with the same
    /// mirror Neumann rows, used as the reduction oracle.
    fn heat_1d_cn(w0: &[f64], dy: f64, dt: f64, n_steps: usize) -> Vec<f64> {
        let n = w0.len();
        let lap = |w: &[f64], j: usize| -> f64 {
            if j == 0 {
                (2.0 * w[1] - 2.0 * w[0]) / (dy * dy)
            } else if j == n - 1 {
                (2.0 * w[n - 2] - 2.0 * w[n - 1]) / (dy * dy)
            } else {
                (w[j - 1] - 2.0 * w[j] + w[j + 1]) / (dy * dy)
            }
        };
        let mut w = w0.to_vec();
        let r = dt / (2.0 * dy * dy);
        // Assemble (I - dt/2 L) once; Thomas factorization inline.
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        diag[0] = 1.0 + 2.0 * r;
        upper[0] = -2.0 * r;
        for j in 1..n - 1 {
            lower[j] = -r;
            diag[j] = 1.0 + 2.0 * r;
            upper[j] = -r;
        }
        lower[n - 1] = -2.0 * r;
        diag[n - 1] = 1.0 + 2.0 * r;
        for _ in 0..n_steps {
            let mut rhs: Vec<f64> = (0..n).map(|j| w[j] + 0.5 * dt * lap(&w, j)).collect();
            // Thomas
            let mut c = vec![0.0; n];
            c[0] = upper[0] / diag[0];
            rhs[0] /= diag[0];
            for j in 1..n {
                let m = diag[j] - lower[j] * c[j - 1];
                if j < n - 1 {
                    c[j] = upper[j] / m;
                }
                rhs[j] = (rhs[j] - lower[j] * rhs[j - 1]) / m;
            }
            for j in (0..n - 1).rev() {
                rhs[j] -= c[j] * rhs[j + 1];
            }
            w = rhs;
        }
        w
    }

    #[test]
    fn chi_satisfies_profile_constraints() {
        let chi = CutoffChi::default();
        let rep = chi.check_properties(4001);
        assert!(rep.all_hold(), "{rep:?}");
        assert_eq!(chi.eval(0.5), 1.0);
        assert_eq!(chi.eval(1.0), 1.0);
        assert_eq!(chi.eval(2.3), 0.0);
    }

    #[test]
    fn standard_datum_x_independent() {
        let g = graded_grid(8, 257);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        // U0 = int (1+y)^{-sigma} = 1/(sigma-1) up to the tail model.
        let want = 1.0 / (p.sigma - 1.0);
        for &v in outer.values() {
            assert!((v - want).abs() < 5e-3, "U0 = {v}, want {want}");
        }
        let margin = NormParams { delta: 2.0 * p.delta, ..p };
        assert!(membership(&omega0, &margin).in_class);
    }

    #[test]
    fn standard_datum_reduces_amplitude_into_class() {
        let g = graded_grid(16, 257);
        let p = params();
        let (omega0, _) = make_standard_datum(&g, &p, 0.2, 1.0).unwrap();
        let margin = NormParams { delta: 2.0 * p.delta, ..p };
        assert!(membership(&omega0, &margin).in_class);
    }

    #[test]
    fn regularized_px_examples() {
        let g = graded_grid(32, 17);
        let one = Profile::constant(&g, 1.0);
        assert_eq!(regularized_px(&one, 0.3).linf(), 0.0);

        let tau = 2.0 * std::f64::consts::PI;
        let outer = Profile::from_fn(&g, |x| 1.0 + 0.1 * (tau * x).sin());
        let px0 = regularized_px(&outer, 0.0);
        for (i, &x) in g.x.iter().enumerate() {
            let want = -0.1 * tau * (tau * x).cos() * (1.0 + 0.1 * (tau * x).sin());
            assert!((px0.values()[i] - want).abs() < 1e-10, "x = {x}");
        }
        let px_eps = regularized_px(&outer, 0.1);
        for (i, &x) in g.x.iter().enumerate() {
            let want = px0.values()[i] + 0.01 * (-0.1 * tau * tau * (tau * x).sin());
            assert!((px_eps.values()[i] - want).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn reconstruct_zero_vorticity() {
        let g = graded_grid(8, 65);
        let p = params();
        let omega = Field::zeros(&g);
        let outer = Profile::constant(&g, 1.0);
        let (u, v) = reconstruct_velocity(&omega, &outer, &p).unwrap();
        assert_eq!(u.sub(&outer.broadcast()).linf(), 0.0);
        assert_eq!(v.linf(), 0.0);
    }

    #[test]
    fn reconstruct_x_independent_v_vanishes_exactly() {
        let g = graded_grid(8, 129);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        let (u, v) = reconstruct_velocity(&omega0, &outer, &p).unwrap();
        assert_eq!(v.linf(), 0.0);
        // U was built from the same integral, so the wall velocity is exact.
        assert_eq!(u.wall_row().linf(), 0.0);
    }

    #[test]
    fn rhs_reduces_to_heat_on_x_independent_data() {
        let g = graded_grid(8, 129);
        let p = params();
        let (omega0, _) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        let outer = Profile::constant(&g, 1.0);
        let state = SolverState::new(omega0.clone(), outer, 0.25, p).unwrap();
        assert_eq!(state.px.linf(), 0.0);
        let rhs = rhs_vorticity(&state);
        let dyy = crate::grid::deriv_y(&omega0, 2, YBoundary::Ghost(&state.px));
        assert_eq!(rhs.sub(&dyy).linf(), 0.0);
    }

    #[test]
    fn rhs_nearly_zero_on_constant_field() {
        let g = graded_grid(8, 65);
        let p = params();
        let omega = Field::from_fn(&g, |_, _| 0.7);
        let outer = integrate_y_upper(&omega, 1.5).unwrap().field.wall_row();
        let state = SolverState::new(omega, outer, 0.0, p).unwrap();
        assert!(rhs_vorticity(&state).linf() <= 1e-9);
    }

    #[test]
    fn cfl_violation_is_an_error() {
        let g = graded_grid(8, 65);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        let state = SolverState::new(omega0, outer, 0.0, p).unwrap();
        let cfg = SchemeConfig::new(Integrator::ImexEuler, 1e9).unwrap();
        assert!(matches!(step(&state, &cfg), Err(Error::UnstableStep { .. })));
    }

    #[test]
    fn tiny_step_changes_little() {
        let g = graded_grid(8, 65);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.05, 1.0).unwrap();
        let state = SolverState::new(omega0.clone(), outer, 0.1, p).unwrap();
        let cfg = SchemeConfig::new(Integrator::ImexEuler, 1e-12).unwrap();
        let next = step(&state, &cfg).unwrap();
        let rel = next.omega.sub(&omega0).linf() / omega0.linf();
        assert!(rel <= 1e-9, "rel = {rel}");
    }

    #[test]
    fn x_independent_run_matches_1d_oracle() {
        // Uniform grid so the oracle shares the spatial discretization.
        let g = build_grid(GridSpec::uniform(8, 121, 30.0, 1e-3)).unwrap();
        let p = params();
        let omega0 = Field::from_fn(&g, |_, y| (1.0 + y).powf(-p.sigma));
        let outer = integrate_y_upper(&omega0, p.sigma - 1.0).unwrap().field.wall_row();
        let state = SolverState::new(omega0.clone(), outer, 0.4, p).unwrap();
        let dt = 1e-3;
        let cfg = SchemeConfig::new(Integrator::Strang, dt).unwrap();
        let mut s = state;
        for _ in 0..50 {
            s = step(&s, &cfg).unwrap();
        }
        let w0: Vec<f64> = (0..g.ny()).map(|j| omega0.values()[[0, j]]).collect();
        let dy = g.y[1] - g.y[0];
        let oracle = heat_1d_cn(&w0, dy, dt / 16.0, 50 * 16);
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..g.ny() {
            let d = s.omega.values()[[0, j]] - oracle[j];
            num += d * d;
            den += oracle[j] * oracle[j];
        }
        let rel = (num / den).sqrt();
        assert!(rel <= 1e-3, "rel = {rel}");
    }

    #[test]
    fn temporal_orders_on_the_reduction() {
        // Compatible datum (zero wall slope) so the temporal order is clean.
        let g = build_grid(GridSpec::uniform(8, 241, 12.0, 1e-3)).unwrap();
        let p = params();
        let omega0 = Field::from_fn(&g, |_, y| (-0.5 * y * y).exp() + 0.05);
        let outer = integrate_y_upper(&omega0, 1.5).unwrap().field.wall_row();
        let t_end = 0.04;
        let w0: Vec<f64> = (0..g.ny()).map(|j| omega0.values()[[0, j]]).collect();
        let dy = g.y[1] - g.y[0];
        let reference = heat_1d_cn(&w0, dy, t_end / 4096.0, 4096);

        let run = |integrator: Integrator, dt: f64| -> Vec<f64> {
            let state = SolverState::new(omega0.clone(), outer.clone(), 0.0, p).unwrap();
            let cfg = SchemeConfig::new(integrator, dt).unwrap();
            let mut s = state;
            for _ in 0..(t_end / dt).round() as usize {
                s = step(&s, &cfg).unwrap();
            }
            (0..g.ny()).map(|j| s.omega.values()[[0, j]]).collect()
        };
        let err = |w: &[f64]| -> f64 {
            w.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        for (integrator, want) in [(Integrator::ImexEuler, 0.9), (Integrator::Strang, 1.8)] {
            let e1 = err(&run(integrator, 4e-3));
            let e2 = err(&run(integrator, 2e-3));
            let order = (e1 / e2).log2();
            assert!(order >= want, "{integrator:?}: order = {order}, e1 = {e1}, e2 = {e2}");
        }
    }

    #[test]
    fn cutoff_identity_when_radius_covers_grid() {
        let g = graded_grid(16, 65);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.05, 1.0).unwrap();
        let state = SolverState::new(omega0, outer, 0.1, p).unwrap();
        let plain = SchemeConfig::new(Integrator::ImexEuler, 5e-4).unwrap();
        let truncated = plain.clone().with_truncation(30.0).unwrap();
        let mut a = state.clone();
        let mut b = state;
        for _ in 0..5 {
            a = step(&a, &plain).unwrap();
            b = step(&b, &truncated).unwrap();
        }
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                assert_eq!(a.omega.values()[[i, j]], b.omega.values()[[i, j]]);
            }
        }
    }

    #[test]
    fn stepping_is_bitwise_deterministic() {
        let g = graded_grid(16, 65);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.05, 1.0).unwrap();
        let cfg = SchemeConfig::new(Integrator::Strang, 5e-4).unwrap();
        let run = || {
            let mut s = SolverState::new(omega0.clone(), outer.clone(), 0.1, p).unwrap();
            for _ in 0..5 {
                s = step(&s, &cfg).unwrap();
            }
            s
        };
        let a = run();
        let b = run();
        for i in 0..g.nx() {
            for j in 0..g.ny() {
                assert_eq!(a.omega.values()[[i, j]], b.omega.values()[[i, j]]);
            }
        }
    }

    #[test]
    fn matching_condition_drift_stays_small() {
        let g = graded_grid(16, 129);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.1, 1.0).unwrap();
        let mut s = SolverState::new(omega0, outer, 0.1, p).unwrap();
        let cfg = SchemeConfig::new(Integrator::ImexEuler, 5e-4).unwrap();
        for _ in 0..100 {
            s = step(&s, &cfg).unwrap();
        }
        assert!(s.matching_residual() <= 1e-3, "drift = {}", s.matching_residual());
    }

    #[test]
    fn picard_x_independent_freezes_immediately() {
        let g = graded_grid(8, 129);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        let cfg = SchemeConfig::new(Integrator::ImexEuler, 5e-4)
            .unwrap()
            .with_truncation(10.0)
            .unwrap();
        let result = picard_solve(&omega0, &outer, 0.1, &cfg, &p, 3, 0.01).unwrap();
        assert_eq!(result.cauchy_gaps.len(), 3);
        assert!(result.cauchy_gaps[0] > 0.0);
        for &gap in &result.cauchy_gaps[1..] {
            assert!(gap <= 1e-10, "gap = {gap}");
        }
    }

    #[test]
    fn picard_preconditions() {
        let g = graded_grid(8, 65);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        let cfg = SchemeConfig::new(Integrator::ImexEuler, 5e-4).unwrap();
        // Missing truncation radius.
        assert!(picard_solve(&omega0, &outer, 0.1, &cfg, &p, 2, 0.01).is_err());
        // eps = 0 is not regularized.
        let cfg_r = cfg.with_truncation(5.0).unwrap();
        assert!(picard_solve(&omega0, &outer, 0.0, &cfg_r, &p, 2, 0.01).is_err());
        // Zero iterations returns just the frozen trajectory.
        let r = picard_solve(&omega0, &outer, 0.1, &cfg_r, &p, 0, 0.01).unwrap();
        assert_eq!(r.iterates.len(), 1);
        assert!(r.cauchy_gaps.is_empty());
    }

    #[test]
    fn wall_fault_breaks_burgers_conservation() {
        let g = graded_grid(8, 129);
        let p = params();
        let (omega0, outer) = make_standard_datum(&g, &p, 0.0, 1.0).unwrap();
        let run = |fault: f64| -> f64 {
            let mut cfg = SchemeConfig::new(Integrator::ImexEuler, 5e-4).unwrap();
            cfg.wall_fault = fault;
            let mut s = SolverState::new(omega0.clone(), outer.clone(), 0.0, p).unwrap();
            let mut states = vec![s.clone()];
            for _ in 0..40 {
                s = step(&s, &cfg).unwrap();
                states.push(s.clone());
            }
            wall_burgers_residual(&states)
        };
        let clean = run(0.0);
        let broken = run(2.0);
        assert!(clean <= 1e-3, "clean = {clean}");
        assert!(broken > 10.0 * 1e-3, "broken = {broken}");
        assert_eq!(wall_burgers_residual(&[]), 0.0);
    }
}
