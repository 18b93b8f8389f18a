//! Weighted Sobolev norms, the cancellation quantities g_k and
//! a = d_y omega / omega, and solution-class membership.
//!
//! The solution class carries four parameters (s, gamma, sigma, delta):
//! an even Sobolev order s >= 4, the base weight exponent gamma >= 1, the
//! pointwise decay exponent sigma > gamma + 1/2 and the class margin
//! delta in (0, 1). The class is empty when sigma <= gamma + 1/2, so that
//! constraint is enforced at construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{deriv_x, deriv_y, weighted_l2, Field, Profile, YBoundary};

/// The tuple (s, gamma, sigma, delta) of the solution class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub s: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl NormParams {
    pub fn new(s: usize, gamma: f64, sigma: f64, delta: f64) -> Result<Self> {
        let p = NormParams { s, gamma, sigma, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 4 || self.s % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "s must be an even integer >= 4, got {}",
                self.s
            )));
        }
        if !(self.gamma >= 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must be >= 1, got {}", self.gamma)));
        }
        if !(self.sigma > self.gamma + 0.5) {
            return Err(Error::InvalidSpec(format!(
                "sigma must exceed gamma + 1/2 (the class is empty otherwise): sigma = {}, gamma = {}",
                self.sigma, self.gamma
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidSpec(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        Ok(())
    }

    /// True when sigma - gamma - 1/2 < 1/2: truncation error at the top of
    /// the strip enters the weighted norms with little margin.
    pub fn low_margin(&self) -> bool {
        self.sigma - self.gamma - 0.5 < 0.5
    }
}

/// Mixed derivative d_x^{a1} d_y^{a2} f with one-sided wall stencils.
pub fn deriv_alpha(f: &Field, a1: usize, a2: usize) -> Field {
    let dy = if a2 == 0 { f.clone() } else { deriv_y(f, a2, YBoundary::OneSided) };
    if a1 == 0 {
        dy
    } else {
        deriv_x(&dy, a1)
    }
}

/// Cache of mixed derivatives D^alpha f for 0 <= a1 <= max_x, 0 <= a2 <= max_y,
/// a1 + a2 <= max_total. The x-order bound is structural: requesting a higher
/// x-derivative than the table was built with panics, which is what the
/// cancellation certificate tests rely on.
pub struct DerivTable {
    fields: Vec<Option<Field>>,
    max_x: usize,
    max_y: usize,
}

impl DerivTable {
    pub fn new(f: &Field, max_x: usize, max_y: usize, max_total: usize) -> DerivTable {
        let mut fields = vec![None; (max_x + 1) * (max_y + 1)];
        for a2 in 0..=max_y {
            if a2 > max_total {
                break;
            }
            let base = if a2 == 0 { f.clone() } else { deriv_y(f, a2, YBoundary::OneSided) };
            for a1 in 0..=max_x {
                if a1 + a2 > max_total {
                    break;
                }
                let d = if a1 == 0 { base.clone() } else { deriv_x(&base, a1) };
                fields[a1 * (max_y + 1) + a2] = Some(d);
            }
        }
        DerivTable { fields, max_x, max_y }
    }

    pub fn max_x_order(&self) -> usize {
        self.max_x
    }

    pub fn get(&self, a1: usize, a2: usize) -> &Field {
        assert!(
            a1 <= self.max_x && a2 <= self.max_y,
            "derivative ({a1},{a2}) outside table bounds ({}, {})",
            self.max_x,
            self.max_y
        );
        self.fields[a1 * (self.max_y + 1) + a2]
            .as_ref()
            .expect("derivative outside the |alpha| bound of this table")
    }
}

/// Weighted H^{s,gamma} norm: sum over |alpha| <= s of
/// ||(1+y)^{gamma+alpha_2} D^alpha omega||_{L^2}, one extra weight power per
/// y-derivative.
pub fn norm_weighted_hs(omega: &Field, p: &NormParams) -> f64 {
    let table = DerivTable::new(omega, p.s, p.s, p.s);
    let mut total = 0.0;
    for a1 in 0..=p.s {
        for a2 in 0..=(p.s - a1) {
            let term = weighted_l2(table.get(a1, a2), p.gamma + a2 as f64);
            total += term * term;
        }
    }
    total.sqrt()
}

/// Log-derivative a = d_y omega / omega. Requires strict positivity of omega
/// (the monotonicity assumption); the class lower bound is the guard, not an
/// epsilon floor, because a floor would silently break the cancellation
/// identities.
pub fn compute_a(omega: &Field) -> Result<Field> {
    check_monotonicity(omega)?;
    let dy = deriv_y(omega, 1, YBoundary::OneSided);
    Ok(dy.zip_map(omega, |num, den| num / den))
}

/// Returns the offending node as the error payload when omega <= 0 anywhere.
pub fn check_monotonicity(omega: &Field) -> Result<()> {
    let v = omega.values();
    for i in 0..omega.grid().nx() {
        for j in 0..omega.grid().ny() {
            if !(v[[i, j]] > 0.0) {
                return Err(Error::MonotonicityViolated { i, j, value: v[[i, j]] });
            }
        }
    }
    Ok(())
}

/// Cancellation quantity g_k = d_x^k omega - a d_x^k (u - U).
pub fn compute_g(omega: &Field, u: &Field, outer: &Profile, k: usize) -> Result<Field> {
    let a = compute_a(omega)?;
    let u_rel = u.sub_profile(outer);
    let dxk_w = deriv_x(omega, k);
    let dxk_u = deriv_x(&u_rel, k);
    Ok(dxk_w.sub(&a.mul(&dxk_u)))
}

/// The rewritten form g_k = omega d_y( d_x^k (u - U) / omega ), used as an
/// independent route for cross-checking the subtraction form.
pub fn compute_g_dual(omega: &Field, u: &Field, outer: &Profile, k: usize) -> Result<Field> {
    check_monotonicity(omega)?;
    let u_rel = u.sub_profile(outer);
    let ratio = deriv_x(&u_rel, k).zip_map(omega, |num, den| num / den);
    let dy = deriv_y(&ratio, 1, YBoundary::OneSided);
    Ok(omega.mul(&dy))
}

/// The g-weighted norm: the d_x^s omega term of the H^{s,gamma} norm is
/// replaced by (1+y)^gamma g_s and nothing else changes.
pub fn norm_hs_g(omega: &Field, u: &Field, outer: &Profile, p: &NormParams) -> Result<f64> {
    let gs = compute_g(omega, u, outer, p.s)?;
    let table = DerivTable::new(omega, p.s - 1, p.s, p.s);
    let mut total = weighted_l2(&gs, p.gamma).powi(2);
    for a1 in 0..=(p.s - 1) {
        for a2 in 0..=(p.s - a1) {
            let term = weighted_l2(table.get(a1, a2), p.gamma + a2 as f64);
            total += term * term;
        }
    }
    Ok(total.sqrt())
}

/// Discrete ||u - U||_{H^{s, gamma-1}}. The y-derivatives of u are taken as
/// derivatives of omega of one order lower to avoid double differencing.
pub fn norm_u_minus_outer(omega: &Field, u: &Field, outer: &Profile, p: &NormParams) -> f64 {
    let u_rel = u.sub_profile(outer);
    let lambda0 = p.gamma - 1.0;
    let mut total = 0.0;
    for a1 in 0..=p.s {
        let term = weighted_l2(&deriv_alpha(&u_rel, a1, 0), lambda0);
        total += term * term;
    }
    let table = DerivTable::new(omega, p.s, p.s - 1, p.s - 1);
    for a1 in 0..=p.s {
        for a2 in 1..=(p.s - a1) {
            let term = weighted_l2(table.get(a1, a2 - 1), lambda0 + a2 as f64);
            total += term * term;
        }
    }
    total.sqrt()
}

/// Class membership diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipReport {
    /// min over nodes of (1+y)^sigma omega.
    #[serde(rename = "min_sigma_omega")]
    pub min_weighted_omega: f64,
    /// max over nodes of sum_{|alpha| <= 2} |(1+y)^{sigma+alpha_2} D^alpha omega|^2.
    #[serde(rename = "sup_I")]
    pub sup_i: f64,
    pub in_class: bool,
    /// Node attaining the weighted minimum.
    pub argmin: (usize, usize),
    /// Node attaining the sup of I.
    pub argmax: (usize, usize),
}

/// Evaluates the pointwise class conditions (1+y)^sigma omega >= delta and
/// sup I <= 1/delta^2. A report, not a guard.
pub fn membership(omega: &Field, p: &NormParams) -> MembershipReport {
    let grid = omega.grid().clone();
    let i_field = weighted_low_order_sum(omega, p.sigma);
    let weighted = omega.mul_y_profile(|y| (1.0 + y).powf(p.sigma));

    let mut min_w = f64::INFINITY;
    let mut argmin = (0, 0);
    let mut sup_i = 0.0;
    let mut argmax = (0, 0);
    for i in 0..grid.nx() {
        for j in 0..grid.ny() {
            let w = weighted.values()[[i, j]];
            if w < min_w {
                min_w = w;
                argmin = (i, j);
            }
            let iv = i_field.values()[[i, j]];
            if iv > sup_i {
                sup_i = iv;
                argmax = (i, j);
            }
        }
    }
    let in_class = min_w >= p.delta && sup_i <= 1.0 / (p.delta * p.delta);
    MembershipReport { min_weighted_omega: min_w, sup_i, in_class, argmin, argmax }
}

/// The pointwise quantity I = sum_{|alpha| <= 2} |(1+y)^{sigma+alpha_2} D^alpha omega|^2.
pub fn weighted_low_order_sum(omega: &Field, sigma: f64) -> Field {
    let mut acc = Field::zeros(omega.grid());
    for (a1, a2) in [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)] {
        let d = deriv_alpha(omega, a1, a2).mul_y_profile(|y| (1.0 + y).powf(sigma + a2 as f64));
        acc = acc.zip_map(&d, |s, v| s + v * v);
    }
    acc
}

/// All norm diagnostics for one field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    #[serde(rename = "hs_gamma")]
    pub h_s_gamma: f64,
    #[serde(rename = "hs_gamma_g")]
    pub h_s_gamma_g: f64,
    pub u_minus_u_norm: f64,
    pub membership: MembershipReport,
    /// Set when sigma - gamma - 1/2 < 1/2 (truncation margin is small).
    pub low_margin: bool,
}

pub fn norm_report(omega: &Field, u: &Field, outer: &Profile, p: &NormParams) -> Result<NormReport> {
    Ok(NormReport {
        h_s_gamma: norm_weighted_hs(omega, p),
        h_s_gamma_g: norm_hs_g(omega, u, outer, p)?,
        u_minus_u_norm: norm_u_minus_outer(omega, u, outer, p),
        membership: membership(omega, p),
        low_margin: p.low_margin(),
    })
}

/// Bracketing ratios of the almost-equivalence relation between the two
/// weighted norms. Callers assert family-wide stability of the bracket; no
/// constants are hardcoded because only ratios are measurable.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EquivReport {
    pub lower_ratio: f64,
    pub upper_ratio: f64,
}

pub fn almost_equiv_report(
    omega: &Field,
    u: &Field,
    outer: &Profile,
    p: &NormParams,
) -> Result<EquivReport> {
    let mem = membership(omega, p);
    if !mem.in_class {
        return Err(Error::NotInClass(format!(
            "min (1+y)^sigma omega = {:.3e}, sup I = {:.3e}, delta = {}",
            mem.min_weighted_omega, mem.sup_i, p.delta
        )));
    }
    let scale = 1.0 + outer.linf();
    let wall = u.wall_row().linf();
    if wall > 1e-3 * scale {
        return Err(Error::NotInClass(format!("u at the wall is {wall:.3e}, expected ~0")));
    }
    let top_gap = u.top_row().zip_map(outer, |a, b| a - b).linf();
    if top_gap > 1e-2 * scale {
        return Err(Error::NotInClass(format!(
            "u at the top differs from the outer flow by {top_gap:.3e}"
        )));
    }

    let mid = norm_weighted_hs(omega, p) + norm_u_minus_outer(omega, u, outer, p);
    let hg = norm_hs_g(omega, u, outer, p)?;
    let dxs_u = outer.deriv(p.s).l2();
    Ok(EquivReport { lower_ratio: mid / hg, upper_ratio: mid / (hg + dxs_u) })
}
