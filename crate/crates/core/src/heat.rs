//! Reflection-kernel propagator for the inhomogeneous heat problem
//! d_t W + F = eps^2 d_xx W + d_yy W, d_y W|_{y=0} = d_x p.
//!
//! Built from the 1D heat kernel with even reflection across y = 0 (so the
//! free-space Gaussian enforces the homogeneous Neumann condition), a lift
//! carrying the inhomogeneous wall flux, Duhamel accumulation of the forcing
//! and mode-by-mode e^{-eps^2 k^2 t} damping in x. Used only to
//! cross-validate the tridiagonal stepper on linear problems.

use num_complex::Complex64;
use std::sync::Arc;

use crate::grid::{Field, Grid, Profile};
use crate::solver::{fft_columns, ifft_columns, mode_k2};

/// Kernel convolution matrix for one time step: K[i][j] integrates the even
/// reflection of the Gaussian of width sqrt(4 dt) against trapezoid weights.
fn reflected_kernel(grid: &Grid, dt: f64) -> Vec<f64> {
    let ny = grid.ny();
    let norm = 1.0 / (4.0 * std::f64::consts::PI * dt).sqrt();
    let mut k = vec![0.0; ny * ny];
    for i in 0..ny {
        let yi = grid.y[i];
        for j in 0..ny {
            let yj = grid.y[j];
            let direct = (-(yi - yj) * (yi - yj) / (4.0 * dt)).exp();
            let mirror = (-(yi + yj) * (yi + yj) / (4.0 * dt)).exp();
            k[i * ny + j] = grid.y_weight(j) * norm * (direct + mirror);
        }
    }
    k
}

fn apply_kernel(k: &[f64], col: &[Complex64], out: &mut [Complex64]) {
    let ny = col.len();
    for i in 0..ny {
        let row = &k[i * ny..(i + 1) * ny];
        let mut acc = Complex64::new(0.0, 0.0);
        for (kij, cj) in row.iter().zip(col) {
            acc += kij * cj;
        }
        out[i] = acc;
    }
}

/// Propagates W0 under the inhomogeneous heat equation for `n_steps` steps of
/// size `dt`. `forcing` holds F at every sample time (n_steps + 1 fields, or
/// empty for F = 0). Returns the trajectory including the initial snapshot.
///
/// The wall flux is handled by the stationary lift W = W~ + px(x) psi(y) with
/// psi = -e^{-y}, which homogenizes the Neumann datum and turns it into a
/// smooth extra forcing; each step then applies the damped reflected kernel
/// with trapezoid-in-time Duhamel accumulation.
pub fn heat_propagate(
    w0: &Field,
    forcing: &[Field],
    px: &Profile,
    eps: f64,
    dt: f64,
    n_steps: usize,
) -> Vec<Field> {
    let grid: Arc<Grid> = w0.grid().clone();
    let nx = grid.nx();
    let ny = grid.ny();
    assert!(
        forcing.is_empty() || forcing.len() == n_steps + 1,
        "forcing must be given at every sample time"
    );

    let psi = |y: f64| -(-y).exp();
    let lift = |p: &Profile| -> Field { p.broadcast().mul_y_profile(psi) };

    // Lifted variables: W~ = W - px psi, F~ = F - (eps^2 d_xx px + px) psi.
    let p_lift = lift(px);
    let w_tilde0 = w0.sub(&p_lift);
    let dxx_px = px.deriv(2);
    let extra = lift(&dxx_px.zip_map(px, |ddp, p| eps * eps * ddp + p));

    let kernel = reflected_kernel(&grid, dt);
    let damping: Vec<f64> = (0..nx)
        .map(|m| (-eps * eps * mode_k2(&grid, m) * dt).exp())
        .collect();

    let mut cols = fft_columns(&w_tilde0);
    let force_cols: Vec<Vec<Vec<Complex64>>> = forcing
        .iter()
        .map(|f| fft_columns(&f.sub(&extra)))
        .collect();
    // With no forcing the lift still contributes.
    let extra_only: Vec<Vec<Complex64>> = if forcing.is_empty() {
        fft_columns(&extra.map(|v| -v))
    } else {
        Vec::new()
    };

    let f_at = |k: usize, m: usize| -> &[Complex64] {
        if forcing.is_empty() {
            &extra_only[m]
        } else {
            &force_cols[k][m]
        }
    };

    let mut trajectory = Vec::with_capacity(n_steps + 1);
    trajectory.push(w0.clone());

    let mut buf = vec![Complex64::new(0.0, 0.0); ny];
    for k in 0..n_steps {
        for m in 0..nx {
            let fk = f_at(k, m);
            let fk1 = f_at(k + 1, m);
            // W_{k+1} = S_dt [W_k - dt/2 F_k] - dt/2 F_{k+1}.
            for j in 0..ny {
                buf[j] = cols[m][j] - 0.5 * dt * fk[j];
            }
            let col = &mut cols[m];
            apply_kernel(&kernel, &buf, col);
            let damp = damping[m];
            for j in 0..ny {
                col[j] = damp * col[j] - 0.5 * dt * fk1[j];
            }
        }
        let w_tilde = ifft_columns(&grid, &cols);
        trajectory.push(w_tilde.add(&p_lift));
    }
    trajectory
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};

    #[test]
    fn gaussian_matches_closed_form() {
        // Even data e^{-y^2}: the Neumann half-line solution is the
        // restriction of the line solution (1+4t)^{-1/2} e^{-y^2/(1+4t)}.
        let g = build_grid(GridSpec::uniform(4, 513, 15.0, 1e-3)).unwrap();
        let w0 = Field::from_fn(&g, |_, y| (-y * y).exp());
        let px = Profile::zeros(&g);
        let dt = 2.5e-3;
        let n = 40;
        let traj = heat_propagate(&w0, &[], &px, 0.0, dt, n);
        let t = dt * n as f64;
        let exact = Field::from_fn(&g, |_, y| {
            (1.0 + 4.0 * t).sqrt().recip() * (-y * y / (1.0 + 4.0 * t)).exp()
        });
        let err = traj.last().unwrap().sub(&exact).linf();
        assert!(err <= 1e-4, "err = {err}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = build_grid(GridSpec::uniform(4, 65, 8.0, 1e-3)).unwrap();
        let w0 = Field::zeros(&g);
        let px = Profile::zeros(&g);
        let traj = heat_propagate(&w0, &[], &px, 0.1, 1e-2, 5);
        for w in &traj {
            assert!(w.linf() <= 1e-14);
        }
    }

    #[test]
    fn neumann_flux_is_respected() {
        // Constant wall flux: d_y W|_0 = 1. Compare the discrete wall slope
        // after a few steps.
        let g = build_grid(GridSpec::uniform(4, 801, 20.0, 1e-3)).unwrap();
        let w0 = Field::from_fn(&g, |_, y| -(-y).exp());
        let px = Profile::constant(&g, 1.0);
        let dt = 2e-3;
        let traj = heat_propagate(&w0, &[], &px, 0.0, dt, 25);
        let w = traj.last().unwrap();
        let h = g.y[1] - g.y[0];
        // One-sided 2nd-order slope at the wall.
        let slope = (-1.5 * w.values()[[0, 0]] + 2.0 * w.values()[[0, 1]]
            - 0.5 * w.values()[[0, 2]])
            / h;
        assert!((slope - 1.0).abs() < 2e-3, "slope = {slope}");
    }

    #[test]
    fn mass_is_conserved_without_flux() {
        let g = build_grid(GridSpec::uniform(4, 513, 15.0, 1e-3)).unwrap();
        let w0 = Field::from_fn(&g, |_, y| (-(y - 3.0) * (y - 3.0)).exp());
        let px = Profile::zeros(&g);
        let traj = heat_propagate(&w0, &[], &px, 0.0, 2.5e-3, 20);
        let mass = |f: &Field| -> f64 {
            (0..g.ny()).map(|j| g.y_weight(j) * f.values()[[0, j]]).sum()
        };
        let m0 = mass(&traj[0]);
        let m1 = mass(traj.last().unwrap());
        assert!((m1 - m0).abs() < 1e-8 * m0.abs().max(1.0), "m0 = {m0}, m1 = {m1}");
    }
}
