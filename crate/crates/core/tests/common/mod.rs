//! Independent oracles shared by the integration and acceptance tests.
//! Everything here uses finite differences or closed forms, never the
//! library's automatic differentiation.
#![allow(dead_code)]

use esfem::geometry::{LevelSetSurface, Point};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Fourth-order central first derivative of `f` along `dir`.
pub fn fd_directional(f: &dyn Fn(&Point) -> f64, x: &Point, dir: &Vector3<f64>, h: f64) -> f64 {
    STENCIL
        .iter()
        .map(|&(k, c)| c * f(&(x + dir * (k * h))))
        .sum::<f64>()
        / (12.0 * h)
}

pub fn fd_gradient(f: &dyn Fn(&Point) -> f64, x: &Point, h: f64) -> Vector3<f64> {
    Vector3::from_fn(|i, _| fd_directional(f, x, &Vector3::ith(i, 1.0), h))
}

/// Hessian as the gradient of the gradient, both by fourth-order stencils.
pub fn fd_hessian(f: &dyn Fn(&Point) -> f64, x: &Point, h: f64) -> Matrix3<f64> {
    let mut hess = Matrix3::zeros();
    for i in 0..3 {
        let di = |y: &Point| fd_directional(f, y, &Vector3::ith(i, 1.0), h);
        for j in 0..3 {
            hess[(i, j)] = fd_directional(&di, x, &Vector3::ith(j, 1.0), h);
        }
    }
    (hess + hess.transpose()) * 0.5
}

/// `Δ_Γ g` at `x` on the level set of `phi` through `x`, with every
/// derivative taken by finite differences.
pub fn fd_laplace_beltrami(
    phi: &dyn Fn(&Point) -> f64,
    g: &dyn Fn(&Point) -> f64,
    x: &Point,
    h: f64,
) -> f64 {
    let gp = fd_gradient(phi, x, h);
    let hp = fd_hessian(phi, x, h);
    let n = gp.norm();
    let nu = gp / n;
    let curvature = (hp.trace() - (nu.transpose() * hp * nu)[0]) / n;
    let gg = fd_gradient(g, x, h);
    let hg = fd_hessian(g, x, h);
    hg.trace() - (nu.transpose() * hg * nu)[0] - curvature * nu.dot(&gg)
}

pub fn exact_u(x: &Point, t: f64) -> f64 {
    (-6.0 * t).exp() * x[0] * x[1]
}

/// Right-hand side of the linear fourth-order problem for `exact_u`,
/// assembled from finite differences: the material derivative along the
/// closed-form trajectories, the tangential divergence of the velocity, and
/// a nested difference Laplace–Beltrami for `ε Δ_Γ² u`. The spatial step
/// is Richardson-extrapolated from h and h/2: the nested fourth derivatives
/// lose too many digits to roundoff once h is small enough to be accurate
/// on its own.
pub fn fd_forcing(surface: &LevelSetSurface, x: &Point, t: f64, eps: f64) -> f64 {
    let coarse = fd_forcing_steps(surface, x, t, eps, 1e-4, 2e-2);
    let fine = fd_forcing_steps(surface, x, t, eps, 1e-4, 1e-2);
    (16.0 * fine - coarse) / 15.0
}

pub fn fd_forcing_steps(surface: &LevelSetSurface, x: &Point, t: f64, eps: f64, dt: f64, h: f64) -> f64 {
    let material = STENCIL
        .iter()
        .map(|&(k, c)| {
            let s = t + k * dt;
            c * exact_u(&surface.flow_map(x, t, s), s)
        })
        .sum::<f64>()
        / (12.0 * dt);

    let phi = |y: &Point| surface.phi_at(y, t);
    let nu = fd_gradient(&phi, x, h).normalize();
    let jac = Matrix3::from_fn(|r, c| {
        let vr = |y: &Point| surface.material_velocity(y, t)[r];
        fd_directional(&vr, x, &Vector3::ith(c, 1.0), h)
    });
    let div_v = jac.trace() - (nu.transpose() * jac * nu)[0];

    let u = |y: &Point| exact_u(y, t);
    let w = |y: &Point| -eps * fd_laplace_beltrami(&phi, &u, y, h);
    let lap_w = fd_laplace_beltrami(&phi, &w, x, h);
    material + exact_u(x, t) * div_v - lap_w
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `∫_T λ₀^a λ₁^b λ₂^c`.
pub fn barycentric_integral(area: f64, k: [u32; 3]) -> f64 {
    2.0 * area * factorial(k[0]) * factorial(k[1]) * factorial(k[2]) / factorial(k[0] + k[1] + k[2] + 2)
}

/// `∫_T ((Σ αᵢλᵢ)³ − Σ αᵢλᵢ) λ_j` by multinomial expansion.
pub fn psi_closed_form(area: f64, alpha: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for p in 0..=3u32 {
            for q in 0..=(3 - p) {
                let r = 3 - p - q;
                let coeff = factorial(3) / (factorial(p) * factorial(q) * factorial(r));
                let mut k = [p, q, r];
                k[j] += 1;
                acc += coeff
                    * alpha[0].powi(p as i32)
                    * alpha[1].powi(q as i32)
                    * alpha[2].powi(r as i32)
                    * barycentric_integral(area, k);
            }
        }
        for (i, a) in alpha.iter().enumerate() {
            let mut k = [0, 0, 0];
            k[i] += 1;
            k[j] += 1;
            acc -= a * barycentric_integral(area, k);
        }
        *o = acc;
    }
    out
}

/// Dense LU solve.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    m.lu()
        .solve(&DVector::from_column_slice(b))
        .expect("nonsingular")
        .as_slice()
        .to_vec()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n
}
