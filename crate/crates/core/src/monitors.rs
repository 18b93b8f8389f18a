//! Runtime monitors: the a priori estimates of the energy method turned into
//! falsifiable bound checks over recorded traces, plus the lifespan formulas
//! and the abstract maximum / minimum principles.
//!
//! All unnamed constants are fitted from data (envelope fits over a
//! calibration window) and validated out of sample; none are hardcoded.
//! Checks are reports, never guards: a violated monitor marks the trace and
//! leaves the solver alone, so discretization noise cannot abort sweeps.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Field, Profile};
use crate::norms::{
    check_monotonicity, membership, norm_hs_g, norm_weighted_hs, weighted_low_order_sum,
    DerivTable, NormParams, NormReport,
};
use crate::solver::{wall_burgers_residual, SolverState};

/// Time series recorded during a run: the monitor ledger.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// ||omega||_{H^{s,gamma}_g} samples.
    pub e_g: Vec<f64>,
    /// ||omega||_{H^{s,gamma}} samples.
    pub e_hs: Vec<f64>,
    /// sup-node I(t) samples.
    pub i_sup: Vec<f64>,
    /// min (1+y)^sigma omega samples.
    pub min_sigma_omega: Vec<f64>,
    /// F(t) samples with unit fitting constant.
    pub f_vals: Vec<f64>,
    /// Wall-velocity sup samples (the Burgers conservation diagnostic).
    pub wall_sup_u: Vec<f64>,
    /// Per-identity boundary residual samples (k0, k1, k2), when recorded.
    pub boundary_residuals: Vec<[f64; 3]>,
    /// In-class flags per sample (membership is warn-only during stepping).
    pub in_class: Vec<bool>,
    pub params: Option<NormParams>,
    /// sup_t ||d_x^s U||_{L^2(T)}, constant for a stationary outer flow.
    pub dxs_outer_l2: f64,
}

impl EnergyTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Appends one sample computed from a solver state.
    pub fn record(&mut self, state: &SolverState) -> Result<()> {
        let p = state.params;
        if self.params.is_none() {
            self.params = Some(p);
            self.dxs_outer_l2 = state.outer.deriv(p.s).l2();
        }
        let mem = membership(&state.omega, &p);
        self.times.push(state.t);
        self.e_g
            .push(norm_hs_g(&state.omega, &state.u, &state.outer, &p)?);
        self.e_hs.push(norm_weighted_hs(&state.omega, &p));
        self.i_sup.push(mem.sup_i);
        self.min_sigma_omega.push(mem.min_weighted_omega);
        self.f_vals
            .push(compute_f_single(&state.outer, &state.px, &p, 1.0));
        self.wall_sup_u.push(wall_burgers_residual(std::slice::from_ref(state)));
        self.in_class.push(mem.in_class);
        Ok(())
    }

    /// Running supremum Omega(t) of the g-norm, nondecreasing by construction.
    pub fn omega_running(&self) -> Vec<f64> {
        running_max(&self.e_g)
    }

    /// Running G(t) = sup ||omega||_g + sup ||d_x^s U||_{L^2}.
    pub fn g_running(&self) -> Vec<f64> {
        running_max(&self.e_g)
            .into_iter()
            .map(|v| v + self.dxs_outer_l2)
            .collect()
    }
}

fn running_max(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut m = f64::NEG_INFINITY;
    for &v in values {
        m = m.max(v);
        out.push(m);
    }
    out
}

/// Measured stand-ins for the unnamed constants of the estimates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FittedConstants {
    /// Stands in for the energy-inequality constant.
    pub c_energy: f64,
    /// Stands in for the L-infinity family constant.
    pub c_linf: f64,
    /// Coefficient bound for the abstract parabolic principles.
    pub lambda: f64,
    /// Measured Sobolev embedding constant (the sup of `sobolev_ratio`).
    pub sobolev_c: f64,
}

impl Default for FittedConstants {
    fn default() -> Self {
        FittedConstants { c_energy: 0.0, c_linf: 0.0, lambda: 0.0, sobolev_c: 1.0 }
    }
}

/// F(t) = C (1 + ||d_x^{s+1} U||_inf^4) + C sum_l ||d_t^l d_x p||^2_{H^{s-2l}};
/// for a stationary outer flow only the l = 0 term survives.
pub fn compute_f(
    outer: &Profile,
    px_series: &[Profile],
    p: &NormParams,
    c_fit: f64,
) -> Vec<f64> {
    px_series
        .iter()
        .map(|px| compute_f_single(outer, px, p, c_fit))
        .collect()
}

pub fn compute_f_single(outer: &Profile, px: &Profile, p: &NormParams, c_fit: f64) -> f64 {
    let du = outer.deriv(p.s + 1).linf();
    c_fit * (1.0 + du.powi(4)) + c_fit * px.hs_norm(p.s).powi(2)
}

/// Verdict of the energy comparison-ODE check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyBoundReport {
    pub violated_at: Option<f64>,
    /// E(t)(1+tol) - e_g(t)^2 per sample.
    pub margin: Vec<f64>,
    /// Set when the comparison ODE blew up before the trace ended; the blowup
    /// time is itself a lifespan prediction.
    pub ode_blowup_at: Option<f64>,
    pub tolerance: f64,
}

/// Integrates the comparison ODE E' = C E^{s/2} + F from E(0) = e_g(0)^2 on
/// the trace's time grid (RK4, F piecewise linear) and reports the first
/// sample where e_g^2 exceeds E (1 + tol).
pub fn energy_ode_bound(trace: &EnergyTrace, consts: &FittedConstants) -> EnergyBoundReport {
    let tol = 0.2;
    let s = trace.params.map(|p| p.s).unwrap_or(4);
    let mut report = EnergyBoundReport {
        violated_at: None,
        margin: Vec::new(),
        ode_blowup_at: None,
        tolerance: tol,
    };
    if trace.is_empty() {
        return report;
    }
    let blowup_cap = 1e12 * (1.0 + trace.e_g[0].powi(2));
    let mut e = trace.e_g[0].powi(2);
    let pow = s as f64 / 2.0;
    let rhs = |e: f64, f: f64| consts.c_energy * e.max(0.0).powf(pow) + f;

    for k in 0..trace.len() {
        if k > 0 {
            let dt = trace.times[k] - trace.times[k - 1];
            let f0 = trace.f_vals[k - 1];
            let f1 = trace.f_vals[k];
            let fm = 0.5 * (f0 + f1);
            let k1 = rhs(e, f0);
            let k2 = rhs(e + 0.5 * dt * k1, fm);
            let k3 = rhs(e + 0.5 * dt * k2, fm);
            let k4 = rhs(e + dt * k3, f1);
            e += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !e.is_finite() || e > blowup_cap {
                report.ode_blowup_at = Some(trace.times[k]);
                break;
            }
        }
        let margin = e * (1.0 + tol) - trace.e_g[k].powi(2);
        report.margin.push(margin);
        if margin < 0.0 && report.violated_at.is_none() {
            report.violated_at = Some(trace.times[k]);
        }
    }
    report
}

/// Envelope fit of the energy constant on the calibration prefix of a trace:
/// the smallest C >= 0 making the differential inequality
/// d/dt e_g^2 <= C e_g^s + F hold at every interior sample of the window.
pub fn fit_c_energy(trace: &EnergyTrace, window: usize) -> f64 {
    let s = trace.params.map(|p| p.s).unwrap_or(4);
    let n = window.min(trace.len());
    let mut c: f64 = 0.0;
    for k in 1..n.saturating_sub(1) {
        let dt = trace.times[k + 1] - trace.times[k - 1];
        if dt <= 0.0 {
            continue;
        }
        let de = (trace.e_g[k + 1].powi(2) - trace.e_g[k - 1].powi(2)) / dt;
        let denom = trace.e_g[k].powf(s as f64);
        if denom > 0.0 {
            c = c.max((de - trace.f_vals[k]) / denom);
        }
    }
    c
}

/// Verdict of one bound check over a trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheckReport {
    /// Per-sample slack rhs - lhs (nonnegative = holds); NaN where the check
    /// is suspended (conditional validity lost).
    pub slack: Vec<f64>,
    pub violated_at: Option<f64>,
    pub suspended_from: Option<f64>,
    pub tolerance: f64,
}

impl BoundCheckReport {
    pub fn holds(&self) -> bool {
        self.violated_at.is_none()
    }
}

/// Checks I_sup(t) <= max{I_sup(0), 6 C^2 Omega(t)^2} e^{C_linf (1+G(t)) t}
/// with the measured Sobolev constant C, and for s >= 6 also the additive
/// bound I(0) + C_linf (1 + Omega) Omega^2 t times the same exponential.
pub fn linf_bounds_check(trace: &EnergyTrace, consts: &FittedConstants) -> BoundCheckReport {
    let tol = 0.2;
    let s = trace.params.map(|p| p.s).unwrap_or(4);
    let omega = trace.omega_running();
    let g = trace.g_running();
    let mut report = BoundCheckReport {
        slack: Vec::new(),
        violated_at: None,
        suspended_from: None,
        tolerance: tol,
    };
    if trace.is_empty() {
        return report;
    }
    let i0 = trace.i_sup[0];
    let c2 = consts.sobolev_c * consts.sobolev_c;
    for k in 0..trace.len() {
        let t = trace.times[k] - trace.times[0];
        let grow = (consts.c_linf * (1.0 + g[k]) * t).exp();
        let mut rhs = i0.max(6.0 * c2 * omega[k] * omega[k]) * grow;
        if s >= 6 {
            let additive = (i0 + consts.c_linf * (1.0 + omega[k]) * omega[k].powi(2) * t) * grow;
            rhs = rhs.min(additive);
        }
        let slack = rhs * (1.0 + tol) - trace.i_sup[k];
        report.slack.push(slack);
        if slack < 0.0 && report.violated_at.is_none() {
            report.violated_at = Some(trace.times[k]);
        }
    }
    report
}

/// Envelope fit of the exponent constant in the weighted L-infinity bound
/// over the calibration prefix.
pub fn fit_c_linf(trace: &EnergyTrace, consts_sobolev: f64, window: usize) -> f64 {
    let omega = trace.omega_running();
    let g = trace.g_running();
    let n = window.min(trace.len());
    let mut c: f64 = 0.0;
    if trace.is_empty() {
        return c;
    }
    let i0 = trace.i_sup[0];
    let c2 = consts_sobolev * consts_sobolev;
    for k in 1..n {
        let t = trace.times[k] - trace.times[0];
        let base = i0.max(6.0 * c2 * omega[k] * omega[k]);
        if t > 0.0 && base > 0.0 && trace.i_sup[k] > base {
            c = c.max((trace.i_sup[k] / base).ln() / ((1.0 + g[k]) * t));
        }
    }
    c
}

/// Checks the lower-bound estimate
/// min (1+y)^sigma omega(t) >= (1 - C(1+G)t e^{C(1+G)t}) (min(0) - C Omega t),
/// suspended once the second factor changes sign.
pub fn lower_bound_check(trace: &EnergyTrace, consts: &FittedConstants) -> BoundCheckReport {
    let tol = 0.05;
    let omega = trace.omega_running();
    let g = trace.g_running();
    let mut report = BoundCheckReport {
        slack: Vec::new(),
        violated_at: None,
        suspended_from: None,
        tolerance: tol,
    };
    if trace.is_empty() {
        return report;
    }
    let min0 = trace.min_sigma_omega[0];
    let c = consts.c_linf;
    for k in 0..trace.len() {
        let t = trace.times[k] - trace.times[0];
        let second = min0 - c * omega[k] * t;
        if second < 0.0 {
            if report.suspended_from.is_none() {
                report.suspended_from = Some(trace.times[k]);
            }
            report.slack.push(f64::NAN);
            continue;
        }
        let a = c * (1.0 + g[k]) * t;
        let rhs = (1.0 - a * a.exp()) * second;
        let slack = trace.min_sigma_omega[k] - rhs * (1.0 - tol);
        report.slack.push(slack);
        if slack < 0.0 && report.violated_at.is_none() {
            report.violated_at = Some(trace.times[k]);
        }
    }
    report
}

/// Smallest C >= 0 making the lower bound hold on the calibration prefix;
/// the bound loosens monotonically in C, so bisection applies.
pub fn fit_c_lower(trace: &EnergyTrace, window: usize) -> f64 {
    let omega = trace.omega_running();
    let g = trace.g_running();
    let n = window.min(trace.len());
    if n == 0 {
        return 0.0;
    }
    let min0 = trace.min_sigma_omega[0];
    let holds = |c: f64| -> bool {
        for k in 0..n {
            let t = trace.times[k] - trace.times[0];
            let second = min0 - c * omega[k] * t;
            if second < 0.0 {
                continue;
            }
            let a = c * (1.0 + g[k]) * t;
            if trace.min_sigma_omega[k] < (1.0 - a * a.exp()) * second {
                return false;
            }
        }
        true
    };
    if holds(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !holds(hi) && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// The explicit lifespan formulas evaluated with fitted constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LifespanEstimate {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t: f64,
    pub m_u: f64,
    pub k_const: f64,
}

/// T1 = min{ 3||w0||^2/(C M_U), (1-2^{-s+2})/(2^{s-2} C ||w0||^{s-2}) },
/// T2, T3 as displayed, K = 4 ||w0||_g + M_U. An infinite value means the
/// fitted constants place no bound within the horizon.
pub fn lifespan_estimate(
    omega0_norms: &NormReport,
    outer: &Profile,
    consts: &FittedConstants,
    p: &NormParams,
) -> LifespanEstimate {
    let s = p.s as i32;
    let e0 = omega0_norms.h_s_gamma_g;
    let c = consts.c_energy;
    let c_lin = consts.c_linf;
    let delta = p.delta;

    // M_U = sup_t {1 + sum_{l=0}^{s/2+1} ||d_t^l U||^2_{H^{s-2l+2}}}^2; only
    // l = 0 survives for a stationary outer flow.
    let m_u = {
        let h = outer.hs_norm(p.s + 2);
        (1.0 + h * h).powi(2)
    };

    let div = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::INFINITY };

    let t1 = div(3.0 * e0 * e0, c * m_u).min(div(
        1.0 - 2.0_f64.powi(-s + 2),
        2.0_f64.powi(s - 2) * c * e0.powi(s - 2),
    ));
    let k_const = 4.0 * e0 + m_u;
    let t2 = t1
        .min(div(1.0, 64.0 * delta * delta * c_lin * (1.0 + 4.0 * e0) * e0 * e0))
        .min(div(2.0_f64.ln(), c * (1.0 + k_const)));
    let t3 = t1
        .min(div(delta, 8.0 * c_lin * e0))
        .min(div(1.0, 6.0 * c * (1.0 + k_const)))
        .min(div(2.0_f64.ln(), c * (1.0 + k_const)));
    LifespanEstimate { t1, t2, t3, t: t1.min(t2).min(t3), m_u, k_const }
}

/// Report of the abstract maximum / minimum principle checks on a scalar
/// trajectory H(t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub sup_holds: bool,
    pub min_holds: bool,
    /// Samples where the minimum bound was vacuous (1 - lambda t e^{lambda t} < 0).
    pub min_vacuous_from: Option<f64>,
    pub sup_slack: Vec<f64>,
    pub min_slack: Vec<f64>,
}

/// Checks sup H(t) <= max{e^{lambda t}||H(0)||_inf, max_tau e^{lambda(t-tau)}
/// ||H(tau)|_{y=0}||_inf} and the minimum counterpart
/// min H(t) >= (1 - lambda t e^{lambda t}) kappa(t).
pub fn max_principle_bound(
    times: &[f64],
    fields: &[Field],
    lambda: f64,
    wall_values: &[Profile],
) -> MaxPrincipleReport {
    assert_eq!(times.len(), fields.len());
    assert_eq!(times.len(), wall_values.len());
    let tol = 1e-9;
    let mut report = MaxPrincipleReport {
        sup_holds: true,
        min_holds: true,
        min_vacuous_from: None,
        sup_slack: Vec::new(),
        min_slack: Vec::new(),
    };
    if times.is_empty() {
        return report;
    }
    let h0_sup = fields[0].linf();
    let h0_min = fields[0].min_value();
    let mut wall_min = f64::INFINITY;

    for k in 0..times.len() {
        let t = times[k] - times[0];
        let sup_h = fields[k].values().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut rhs = (lambda * t).exp() * h0_sup;
        for (kk, w) in wall_values[0..=k].iter().enumerate() {
            let tau = times[kk] - times[0];
            rhs = rhs.max((lambda * (t - tau)).exp() * w.linf());
        }
        let slack = rhs * (1.0 + tol) - sup_h;
        report.sup_slack.push(slack);
        if slack < 0.0 {
            report.sup_holds = false;
        }

        wall_min = wall_min.min(wall_values[k].values().iter().cloned().fold(f64::INFINITY, f64::min));
        let kappa = h0_min.min(wall_min);
        let factor = 1.0 - lambda * t * (lambda * t).exp();
        if factor < 0.0 || kappa < 0.0 {
            if report.min_vacuous_from.is_none() {
                report.min_vacuous_from = Some(times[k]);
            }
            report.min_slack.push(f64::NAN);
            continue;
        }
        let min_h = fields[k].min_value();
        let mslack = min_h - factor * kappa * (1.0 - tol);
        report.min_slack.push(mslack);
        if mslack < 0.0 {
            report.min_holds = false;
        }
    }
    report
}

/// One ratio entry of the velocity/vorticity control report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlRatio {
    pub name: String,
    pub lhs: f64,
    pub ratio: f64,
}

/// Evaluates the left sides of the L^2 and L-infinity controls on u, v,
/// omega and g_k against the common right side ||omega||_g + ||d_x^s U||_2.
/// Callers assert family-wide boundedness of the ratios.
pub fn uvw_control_report(state: &SolverState) -> Result<Vec<ControlRatio>> {
    check_monotonicity(&state.omega)?;
    let p = state.params;
    let s = p.s;
    let denom = norm_hs_g(&state.omega, &state.u, &state.outer, &p)? + state.outer.deriv(s).l2();

    let u_rel = state.u.sub_profile(&state.outer);
    let u_rel_dx = DerivTable::new(&u_rel, s, 0, s);
    let v_dx = DerivTable::new(&state.v, s - 1, 0, s - 1);
    let mut out = Vec::new();
    let mut push = |name: &str, lhs: f64| {
        out.push(ControlRatio { name: name.into(), lhs, ratio: lhs / denom });
    };

    let mut l2_u: f64 = 0.0;
    for k in 0..=s {
        l2_u = l2_u.max(crate::grid::weighted_l2(u_rel_dx.get(k, 0), p.gamma - 1.0));
    }
    push("l2_u", l2_u);

    let mut l2_v: f64 = 0.0;
    for k in 0..=(s - 1) {
        let du = state.outer.deriv(k + 1).broadcast().mul_y_profile(|y| y);
        let num = v_dx.get(k, 0).add(&du).mul_y_profile(|y| 1.0 / (1.0 + y));
        l2_v = l2_v.max(crate::grid::weighted_l2(&num, 0.0));
    }
    push("l2_v", l2_v);

    let mut linf_u: f64 = 0.0;
    for k in 0..=(s - 1) {
        let f = if k == 0 {
            state.u.clone()
        } else {
            crate::grid::deriv_x(&state.u, k)
        };
        linf_u = linf_u.max(f.linf());
    }
    push("linf_u", linf_u);

    let mut linf_v: f64 = 0.0;
    for k in 0..=(s - 2) {
        linf_v = linf_v.max(v_dx.get(k, 0).mul_y_profile(|y| 1.0 / (1.0 + y)).linf());
    }
    push("linf_v", linf_v);

    let table = DerivTable::new(&state.omega, s - 2, s - 2, s - 2);
    let mut linf_w: f64 = 0.0;
    for a1 in 0..=(s - 2) {
        for a2 in 0..=(s - 2 - a1) {
            let f = table
                .get(a1, a2)
                .mul_y_profile(|y| (1.0 + y).powf(p.gamma + a2 as f64));
            linf_w = linf_w.max(f.linf());
        }
    }
    push("linf_w", linf_w);

    Ok(out)
}

/// Startup diagnostic for the extra s = 4 hypothesis: compares
/// ||omega_0||_g * delta against the fitted constant; warn-only.
pub fn s4_smallness_diagnostic(e_g0: f64, p: &NormParams, fitted_c: f64) -> Option<String> {
    if p.s == 4 && e_g0 * p.delta > fitted_c.max(1.0) {
        Some(format!(
            "s = 4 smallness hypothesis is tight: ||omega0||_g * delta = {:.3e} exceeds the fitted constant {:.3e}",
            e_g0 * p.delta,
            fitted_c.max(1.0)
        ))
    } else {
        None
    }
}

/// The pointwise quantity I as a field, for fault-injection tests.
pub fn i_field(omega: &Field, sigma: f64) -> Field {
    weighted_low_order_sum(omega, sigma)
}
