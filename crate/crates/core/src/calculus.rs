//! Executable calculus inequalities: the Hardy pair, the Sobolev embedding
//! ratio, the unit-strip trace estimate, pointwise interpolation and
//! decay-rate fitting.
//!
//! Every inequality tolerance carries an h^2 discretization slack so that
//! refinement can only make a true inequality pass more robustly. The
//! vanishing-at-infinity hypothesis of the upper Hardy inequality is replaced
//! by a smallness threshold at y = Y, recorded in the result rather than
//! silently assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{deriv_x, deriv_y, weighted_l2, DerivScheme, Field, YBoundary};
use crate::norms::{deriv_alpha, NormParams};

/// Outcome of a two-sided inequality evaluation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Decay-proxy satisfied at y = Y (upper Hardy only; true elsewhere).
    pub decay_ok: bool,
    pub tolerance: f64,
}

fn h_slack(f: &Field) -> f64 {
    let g = f.grid();
    let h = g.hx().max((g.spec.y_max / (g.ny() as f64 - 1.0)).min(g.min_dy() * 4.0));
    h * h
}

/// Threshold for the vanishing-at-infinity proxy of the upper Hardy
/// inequality: |f(., Y)| <= 1e-6 max |f|.
pub const DECAY_PROXY_FACTOR: f64 = 1e-6;

/// Upper Hardy inequality: ||(1+y)^l f|| <= 2/(2l+1) ||(1+y)^{l+1} d_y f||
/// for l > -1/2 and f vanishing at infinity.
pub fn hardy_upper(f: &Field, lambda: f64) -> Result<InequalityCheck> {
    if !(lambda > -0.5) {
        return Err(Error::DomainError(format!(
            "upper Hardy needs lambda > -1/2, got {lambda}"
        )));
    }
    let max_abs = f.linf();
    let decay_ok = f.top_row().linf() <= DECAY_PROXY_FACTOR * max_abs || max_abs == 0.0;
    let lhs = weighted_l2(f, lambda);
    let dy = deriv_y(f, 1, YBoundary::OneSided);
    let rhs = 2.0 / (2.0 * lambda + 1.0) * weighted_l2(&dy, lambda + 1.0);
    let tol = 1e-6 + h_slack(f);
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + tol), decay_ok, tolerance: tol })
}

/// Lower Hardy inequality for l < -1/2: the wall trace replaces the decay
/// hypothesis.
pub fn hardy_lower(f: &Field, lambda: f64) -> Result<InequalityCheck> {
    if !(lambda < -0.5) {
        return Err(Error::DomainError(format!(
            "lower Hardy needs lambda < -1/2, got {lambda}"
        )));
    }
    let lhs = weighted_l2(f, lambda);
    let dy = deriv_y(f, 1, YBoundary::OneSided);
    let rhs = (-1.0 / (2.0 * lambda + 1.0)).sqrt() * f.wall_row().l2()
        - 2.0 / (2.0 * lambda + 1.0) * weighted_l2(&dy, lambda + 1.0);
    let tol = 1e-6 + h_slack(f);
    Ok(InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + tol), decay_ok: true, tolerance: tol })
}

/// Sobolev embedding ratio ||f||_inf / (||f|| + ||d_x f|| + ||d_yy f||).
/// Callers assert the ratio is bounded by one constant across a family; the
/// constant itself is measured, never assumed.
pub fn sobolev_ratio(f: &Field) -> Result<f64> {
    let denom = weighted_l2(f, 0.0)
        + weighted_l2(&deriv_x(f, 1), 0.0)
        + weighted_l2(&deriv_y(f, 2, YBoundary::OneSided), 0.0);
    if denom == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(f.linf() / denom)
}

/// Unit-strip trace estimate with the concrete admissible constant C = 2:
/// int |f(., 0)| <= 2 (int_0^1 int |f| + int_0^1 int |d_y f|).
pub fn trace_bound(f: &Field) -> InequalityCheck {
    let grid = f.grid();
    let nx = grid.nx() as f64;
    let lhs = f.wall_row().values().iter().map(|v| v.abs()).sum::<f64>() / nx;

    // L^1 over T x [0,1] by trapezoid clipped at y = 1 (linear interpolation
    // for the fractional last interval).
    let strip_l1 = |g: &Field| -> f64 {
        let mut total = 0.0;
        for i in 0..grid.nx() {
            let mut acc = 0.0;
            for j in 0..grid.ny() - 1 {
                let (y0, y1) = (grid.y[j], grid.y[j + 1]);
                if y0 >= 1.0 {
                    break;
                }
                let v0 = g.values()[[i, j]].abs();
                let v1 = g.values()[[i, j + 1]].abs();
                if y1 <= 1.0 {
                    acc += 0.5 * (y1 - y0) * (v0 + v1);
                } else {
                    let frac = (1.0 - y0) / (y1 - y0);
                    let vm = v0 + frac * (v1 - v0);
                    acc += 0.5 * (1.0 - y0) * (v0 + vm);
                }
            }
            total += acc;
        }
        total / nx
    };
    let dy = deriv_y(f, 1, YBoundary::OneSided);
    let rhs = 2.0 * (strip_l1(f) + strip_l1(&dy));
    let tol = 1e-6 + h_slack(f);
    InequalityCheck { lhs, rhs, holds: lhs <= rhs * (1.0 + tol), decay_ok: true, tolerance: tol }
}

/// Direction selector for the pointwise interpolation lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpDirection {
    X,
    Y,
}

/// Pointwise interpolation: if |d^i f| <= C_i (1+y)^{-b_i} for i = 0, 2, then
/// |d f| <= 2 sqrt(C0 C2) (1+y)^{-(b0+b2)/2}. The premises are verified
/// numerically first; their failure is a distinct signal, not `false`.
pub fn pointwise_interp_check(
    f: &Field,
    c0: f64,
    b0: f64,
    c2: f64,
    b2: f64,
    direction: InterpDirection,
) -> Result<bool> {
    if direction == InterpDirection::Y && (b0 < 0.0 || b2 < 0.0) {
        return Err(Error::DomainError(
            "y-direction interpolation requires nonnegative decay exponents".into(),
        ));
    }
    let grid = f.grid();
    let tol = 1e-3 + h_slack(f);
    let d = |k: usize| -> Field {
        match direction {
            InterpDirection::X => deriv_x(f, k),
            InterpDirection::Y => deriv_y(f, k, YBoundary::OneSided),
        }
    };

    let premise = |g: &Field, c: f64, b: f64| -> bool {
        for i in 0..grid.nx() {
            for j in 0..grid.ny() {
                let bound = c * (1.0 + grid.y[j]).powf(-b) * (1.0 + tol);
                if g.values()[[i, j]].abs() > bound {
                    return false;
                }
            }
        }
        true
    };
    if !premise(f, c0, b0) {
        return Err(Error::PremiseViolated(format!(
            "|f| exceeds C0 (1+y)^-b0 with C0 = {c0}, b0 = {b0}"
        )));
    }
    let d2 = d(2);
    if !premise(&d2, c2, b2) {
        return Err(Error::PremiseViolated(format!(
            "|d^2 f| exceeds C2 (1+y)^-b2 with C2 = {c2}, b2 = {b2}"
        )));
    }

    let c_mid = 2.0 * (c0 * c2).sqrt();
    let b_mid = 0.5 * (b0 + b2);
    Ok(premise(&d(1), c_mid, b_mid))
}

/// Outcome of a decay-rate fit against the class exponent table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    pub b_hat: f64,
    pub b_target: f64,
    pub meets: bool,
}

/// Target decay exponent of D^alpha omega for class members: sigma + a2 for
/// |alpha| <= 2, the interpolated rate for 2 <= |alpha| <= s+1, and
/// gamma + a2 at |alpha| = s + 2.
pub fn decay_target(p: &NormParams, a1: usize, a2: usize) -> f64 {
    let total = a1 + a2;
    if total <= 2 {
        p.sigma + a2 as f64
    } else if total <= p.s + 1 {
        let pow = 2f64.powi(total as i32 - 2);
        (p.sigma + (pow - 1.0) * p.gamma) / pow + a2 as f64
    } else {
        p.gamma + a2 as f64
    }
}

/// Least-squares decay exponent of D^alpha f over the window
/// y in [Y/4, 3Y/4], measured at the x-column of maximal amplitude (the
/// window avoids wall-layer contamination below and truncation above).
pub fn fit_decay_exponent(f: &Field, a1: usize, a2: usize, p: &NormParams) -> Result<DecayFit> {
    let grid = f.grid();
    let d = deriv_alpha(f, a1, a2);
    let y_top = grid.spec.y_max;
    let (lo, hi) = (y_top / 4.0, 3.0 * y_top / 4.0);
    let window: Vec<usize> = (0..grid.ny())
        .filter(|&j| grid.y[j] >= lo && grid.y[j] <= hi)
        .collect();

    // x-column of maximal amplitude over the window.
    let mut best = (0usize, 0.0f64);
    for i in 0..grid.nx() {
        let amp = window
            .iter()
            .map(|&j| d.values()[[i, j]].abs())
            .fold(0.0, f64::max);
        if amp > best.1 {
            best = (i, amp);
        }
    }
    let global = d.linf();
    if best.1 <= 1e-12 * global.max(1e-30) || best.1 == 0.0 {
        return Err(Error::InsufficientSignal { max_abs: best.1 });
    }

    // Least squares of log|D f| against log(1+y).
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut n = 0.0;
    for &j in &window {
        let v = d.values()[[best.0, j]].abs();
        if v <= 0.0 {
            continue;
        }
        let x = (1.0 + grid.y[j]).ln();
        let y = v.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
    }
    if n < 3.0 {
        return Err(Error::InsufficientSignal { max_abs: best.1 });
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let b_hat = -slope;
    let b_target = decay_target(p, a1, a2);
    Ok(DecayFit { b_hat, b_target, meets: b_hat >= b_target - 0.1 })
}

/// One entry of the inequality audit table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub inequality: String,
    pub field_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// False when the inequality's premise excluded this field (not a
    /// violation).
    pub applicable: bool,
}

/// A deterministic generator-family member: trigonometric x-modes times
/// (1+y)^{-p} e^{-q y} profiles.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorParams {
    pub mode: usize,
    pub amplitude: f64,
    pub power: f64,
    pub rate: f64,
}

impl GeneratorParams {
    pub fn id(&self) -> String {
        format!("m{}a{}p{}q{}", self.mode, self.amplitude, self.power, self.rate)
    }

    pub fn build(&self, grid: &std::sync::Arc<crate::grid::Grid>) -> Field {
        let m = self.mode as f64;
        let a = self.amplitude;
        let p = self.power;
        let q = self.rate;
        Field::from_fn(grid, |x, y| {
            (1.0 + y).powf(-p)
                * (-q * y).exp()
                * (1.0 + a * (2.0 * std::f64::consts::PI * m * x).cos())
        })
    }
}

/// The standard generator family: products of trigonometric x-modes and
/// (1+y)^{-p} e^{-qy} profiles with p >= 2, q >= 0.
pub fn generator_family(count: usize) -> Vec<GeneratorParams> {
    let modes = [1usize, 2, 3, 4];
    let amps = [0.0, 0.3, 0.7];
    let powers = [2.0, 2.6, 3.0, 4.0];
    let rates = [0.0, 0.5, 1.0, 2.0];
    let mut out = Vec::new();
    'outer: for &power in &powers {
        for &rate in &rates {
            for &mode in &modes {
                for &amplitude in &amps {
                    out.push(GeneratorParams { mode, amplitude, power, rate });
                    if out.len() >= count {
                        break 'outer;
                    }
                }
            }
        }
    }
    out
}

/// Runs the full inequality audit for one field.
pub fn audit_field(
    field: &Field,
    id: &str,
    lambda_upper: f64,
    lambda_lower: f64,
) -> Result<Vec<AuditRow>> {
    let mut rows = Vec::new();
    let up = hardy_upper(field, lambda_upper)?;
    rows.push(AuditRow {
        inequality: "hardy_upper".into(),
        field_id: id.into(),
        lhs: up.lhs,
        rhs: up.rhs,
        holds: !up.decay_ok || up.holds,
        applicable: up.decay_ok,
    });
    let low = hardy_lower(field, lambda_lower)?;
    rows.push(AuditRow {
        inequality: "hardy_lower".into(),
        field_id: id.into(),
        lhs: low.lhs,
        rhs: low.rhs,
        holds: low.holds,
        applicable: true,
    });
    let tr = trace_bound(field);
    rows.push(AuditRow {
        inequality: "trace_bound".into(),
        field_id: id.into(),
        lhs: tr.lhs,
        rhs: tr.rhs,
        holds: tr.holds,
        applicable: true,
    });
    Ok(rows)
}

/// Centered-difference cross-check: the Fourier and centered x-derivative
/// agree to second order; used by scheme-independence assertions.
pub fn scheme_gap(f: &Field, k: usize) -> f64 {
    let a = deriv_x_scheme_wrap(f, k, DerivScheme::Fourier);
    let b = deriv_x_scheme_wrap(f, k, DerivScheme::Centered);
    weighted_l2(&a.sub(&b), 0.0)
}

fn deriv_x_scheme_wrap(f: &Field, k: usize, scheme: DerivScheme) -> Field {
    crate::grid::deriv_x_scheme(f, k, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    /// Fine graded grid on [0, 1000] so power-law tails satisfy the decay
    /// proxy of the upper Hardy inequality.
    fn tall_grid() -> Arc<crate::grid::Grid> {
        build_grid(GridSpec::exponential(8, 513, 1000.0, 1e-3, 10.0)).unwrap()
    }

    fn short_grid() -> Arc<crate::grid::Grid> {
        build_grid(GridSpec::exponential(8, 257, 30.0, 1e-3, 2.0)).unwrap()
    }

    #[test]
    fn hardy_upper_inverse_square() {
        // lhs = ||(1+y)^{-2}|| = (1/3)^{1/2}, rhs = 2 || (1+y)(-2)(1+y)^{-3} ||
        //     = 4 (1/3)^{1/2}.
        let g = tall_grid();
        let f = Field::from_fn(&g, |_, y| (1.0 + y).powi(-2));
        let r = hardy_upper(&f, 0.0).unwrap();
        assert!(r.decay_ok, "tail {:.3e}", f.top_row().linf());
        assert!(r.holds);
        let third: f64 = 1.0 / 3.0;
        assert!((r.lhs - third.sqrt()).abs() < 1e-3, "lhs = {}", r.lhs);
        assert!((r.rhs - 4.0 * third.sqrt()).abs() < 5e-3, "rhs = {}", r.rhs);
    }

    #[test]
    fn hardy_upper_zero_and_exponential() {
        let g = short_grid();
        let z = Field::zeros(&g);
        let r = hardy_upper(&z, 0.0).unwrap();
        assert!(r.holds && r.lhs == 0.0 && r.rhs == 0.0);

        let f = Field::from_fn(&g, |_, y| (-y).exp());
        let r = hardy_upper(&f, 0.0).unwrap();
        assert!(r.decay_ok);
        assert!(r.holds && r.lhs < r.rhs);
    }

    #[test]
    fn hardy_upper_rejects_bad_lambda() {
        let g = short_grid();
        let f = Field::from_fn(&g, |_, y| (-y).exp());
        assert!(matches!(hardy_upper(&f, -0.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn hardy_lower_constant_field() {
        // f = 1, lambda = -1: lhs = (1 - 1/(1+Y))^{1/2}, rhs = 1.
        let g = short_grid();
        let f = Field::from_fn(&g, |_, _| 1.0);
        let r = hardy_lower(&f, -1.0).unwrap();
        let want = (1.0 - 1.0 / 31.0_f64).sqrt();
        assert!((r.lhs - want).abs() < 1e-3);
        assert!((r.rhs - 1.0).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn hardy_lower_inverse_power() {
        let g = short_grid();
        let f = Field::from_fn(&g, |_, y| (1.0 + y).powi(-1));
        let r = hardy_lower(&f, -1.0).unwrap();
        assert!(r.holds, "lhs = {}, rhs = {}", r.lhs, r.rhs);
        assert!(matches!(hardy_lower(&f, 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn sobolev_ratio_constant_field() {
        let g = build_grid(GridSpec::uniform(8, 513, 30.0, 1e-3)).unwrap();
        let f = Field::from_fn(&g, |_, _| 1.0);
        let r = sobolev_ratio(&f).unwrap();
        assert!((r - 1.0 / 30.0_f64.sqrt()).abs() < 1e-10);
        assert!(matches!(sobolev_ratio(&Field::zeros(&g)), Err(Error::UndefinedRatio)));
    }

    #[test]
    fn sobolev_ratio_family_bounded() {
        let g = short_grid();
        let mut ratios = Vec::new();
        for m in 1..=4usize {
            for n in 1..=4usize {
                let f = Field::from_fn(&g, |x, y| {
                    (2.0 * PI * m as f64 * x).sin() * (-(n as f64) * y).exp()
                });
                ratios.push(sobolev_ratio(&f).unwrap());
            }
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 50.0, "ratio spread {max}/{min}");
    }

    #[test]
    fn trace_bound_cases() {
        let g = short_grid();
        let one = Field::from_fn(&g, |_, _| 1.0);
        let r = trace_bound(&one);
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!((r.rhs - 2.0).abs() < 1e-6);
        assert!(r.holds);

        let linear = Field::from_fn(&g, |_, y| y);
        let r = trace_bound(&linear);
        assert!(r.lhs.abs() < 1e-12 && r.holds);

        let f = Field::from_fn(&g, |x, y| (-y).exp() * (2.0 * PI * x).cos());
        assert!(trace_bound(&f).holds);
    }

    #[test]
    fn interp_check_power_profile() {
        // |d_y (1+y)^{-2}| = 2 (1+y)^{-3} <= 2 sqrt(6) (1+y)^{-3}.
        let g = short_grid();
        let f = Field::from_fn(&g, |_, y| (1.0 + y).powi(-2));
        let ok = pointwise_interp_check(&f, 1.0, 2.0, 6.0, 4.0, InterpDirection::Y).unwrap();
        assert!(ok);
    }

    #[test]
    fn interp_check_zero_and_exponential() {
        let g = short_grid();
        let z = Field::zeros(&g);
        assert!(pointwise_interp_check(&z, 1.0, 0.0, 1.0, 0.0, InterpDirection::Y).unwrap());

        let f = Field::from_fn(&g, |_, y| (-y).exp());
        assert!(pointwise_interp_check(&f, 1.0, 0.0, 1.0, 0.0, InterpDirection::Y).unwrap());
    }

    #[test]
    fn interp_premise_violation_is_distinct() {
        let g = short_grid();
        let f = Field::from_fn(&g, |_, _| 10.0);
        assert!(matches!(
            pointwise_interp_check(&f, 1.0, 0.0, 1.0, 0.0, InterpDirection::Y),
            Err(Error::PremiseViolated(_))
        ));
    }

    #[test]
    fn interp_scale_covariance() {
        let g = short_grid();
        let f = Field::from_fn(&g, |x, y| (1.0 + y).powi(-2) * (1.0 + 0.2 * (2.0 * PI * x).cos()));
        let base =
            pointwise_interp_check(&f, 1.3, 2.0, 8.0, 4.0, InterpDirection::Y).unwrap();
        let c = 37.5;
        let scaled = pointwise_interp_check(&f.scale(c), c * 1.3, 2.0, c * 8.0, 4.0, InterpDirection::Y)
            .unwrap();
        assert_eq!(base, scaled);
    }

    #[test]
    fn decay_fit_power_law() {
        let g = short_grid();
        let p = NormParams::new(4, 1.0, 2.6, 0.05).unwrap();
        let f = Field::from_fn(&g, |_, y| (1.0 + y).powf(-2.6));
        let fit = fit_decay_exponent(&f, 0, 0, &p).unwrap();
        assert!((fit.b_hat - 2.6).abs() < 0.05, "b_hat = {}", fit.b_hat);
        assert!(fit.meets);

        let fit = fit_decay_exponent(&f, 0, 1, &p).unwrap();
        assert!((fit.b_hat - 3.6).abs() < 0.05, "b_hat = {}", fit.b_hat);
        assert!(fit.meets);
    }

    #[test]
    fn decay_fit_insufficient_signal() {
        let g = short_grid();
        let p = NormParams::new(4, 1.0, 2.6, 0.05).unwrap();
        assert!(matches!(
            fit_decay_exponent(&Field::zeros(&g), 0, 0, &p),
            Err(Error::InsufficientSignal { .. })
        ));
    }

    #[test]
    fn generator_family_has_requested_size() {
        assert_eq!(generator_family(100).len(), 100);
        assert_eq!(generator_family(50).len(), 50);
    }
}
