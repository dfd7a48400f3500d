//! Error norms against smooth solutions, convergence orders, energy and mass
//! diagnostics, and the interpolation / Ritz projection initialisers.

use nalgebra::{Matrix2, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_stiffness, double_well, NodalField, QuadratureRule};
use crate::error::{Error, Result};
use crate::geometry::{surface_gradient, AmbientField, LevelSetSurface, Point};
use crate::linalg::{cg_solve, dot, norm, CsrMatrix, LinearOperator, SolverOptions};
use crate::mesh::SurfaceMesh;

/// Finite-difference step for the Jacobian of the closest-point map.
const LIFT_FD_STEP: f64 = 1e-6;

/// Nodal interpolant `I_h g`; the nodes lie on Γ(t).
pub fn interpolate_nodal<F: AmbientField + ?Sized>(mesh: &SurfaceMesh, g: &F, t: f64) -> NodalField {
    mesh.nodes.iter().map(|x| g.value(x, t)).collect::<Vec<_>>().into()
}

/// Independent uniform samples in `[-amplitude, amplitude]`, one per node.
pub fn random_nodal(n: usize, seed: u64, amplitude: f64) -> NodalField {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..n)
        .map(|_| rng.random_range(-amplitude..=amplitude))
        .collect::<Vec<_>>()
        .into()
}

/// Quadrature point of Γ_h lifted to Γ(t).
struct LiftedPoint {
    p: Point,
    /// Surface measure ratio `dσ / dσ_h`.
    jacobian: f64,
    /// Tangent basis of Γ_h and of Γ at `p`, and the lift differential
    /// between them.
    e: [Vector3<f64>; 2],
    f: [Vector3<f64>; 2],
    b: Matrix2<f64>,
}

fn tangent_basis(n: &Vector3<f64>) -> [Vector3<f64>; 2] {
    let trial = if n[0].abs() < 0.6 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let e1 = (trial - n * n.dot(&trial)).normalize();
    [e1, n.cross(&e1)]
}

fn lift_point(
    surface: &LevelSetSurface,
    t: f64,
    x: &Point,
    normal_h: &Vector3<f64>,
) -> Result<LiftedPoint> {
    let p = surface.closest_point(x, t)?;
    let nu = surface.normal(&p, t)?;
    let e = tangent_basis(normal_h);
    // orient Γ's basis consistently with the element's
    let nu = if nu.dot(normal_h) < 0.0 { -nu } else { nu };
    let f = tangent_basis(&nu);
    let mut dp = [Vector3::zeros(); 2];
    for (k, ek) in e.iter().enumerate() {
        let plus = surface.closest_point(&(x + ek * LIFT_FD_STEP), t)?;
        let minus = surface.closest_point(&(x - ek * LIFT_FD_STEP), t)?;
        dp[k] = (plus - minus) / (2.0 * LIFT_FD_STEP);
    }
    let b = Matrix2::from_fn(|i, j| f[i].dot(&dp[j]));
    Ok(LiftedPoint {
        p,
        jacobian: b.determinant().abs(),
        e,
        f,
        b,
    })
}

/// Ritz projection: `S α = r` with `r_j = ∫_Γ ∇_Γ z · ∇_Γ φ_j^ℓ`, plus the mean
/// constraint `∫_{Γ_h} Π_h z = ∫_Γ z`. Both integrals use quadrature on the
/// lifted elements.
pub fn ritz_projection<F: AmbientField + ?Sized>(
    mesh: &SurfaceMesh,
    surface: &LevelSetSurface,
    t: f64,
    z: &F,
    quad: &QuadratureRule,
) -> Result<NodalField> {
    let locals: Vec<([f64; 3], f64)> = (0..mesh.n_tris())
        .into_par_iter()
        .map(|e| -> Result<([f64; 3], f64)> {
            let g = mesh.element_geometry(e)?;
            let mut r = [0.0; 3];
            let mut mean = 0.0;
            for (x, _, w) in quad.map(&mesh.vertices(e)) {
                let lp = lift_point(surface, t, &x, &g.normal)?;
                let dz = surface_gradient(z, surface, &lp.p, t)?;
                let dz_f = Vector2::new(lp.f[0].dot(&dz), lp.f[1].dot(&dz));
                let binv_t = lp
                    .b
                    .try_inverse()
                    .ok_or_else(|| Error::SingularSystem(format!("lift differential of element {e}")))?
                    .transpose();
                let dvol = w * g.area * lp.jacobian;
                for a in 0..3 {
                    let gh = Vector2::new(lp.e[0].dot(&g.grads[a]), lp.e[1].dot(&g.grads[a]));
                    r[a] += dvol * (binv_t * gh).dot(&dz_f);
                }
                mean += dvol * z.value(&lp.p, t);
            }
            Ok((r, mean))
        })
        .collect::<Result<_>>()?;

    let n = mesh.n_nodes();
    let mut r = vec![0.0; n];
    let mut target_mean = 0.0;
    for (tri, (local, mean)) in mesh.tris.iter().zip(&locals) {
        for a in 0..3 {
            r[tri[a]] += local[a];
        }
        target_mean += mean;
    }

    let s = assemble_stiffness(mesh)?;
    let q = lumped_row_sums(mesh)?;
    let qq: f64 = q.iter().map(|v| v * v).sum();
    if !(qq > 0.0) {
        return Err(Error::SingularSystem("mean constraint row vanishes".into()));
    }
    // (S + μqqᵀ) c = r forces qᵀc = 0 because 1ᵀr = 0; the mean is then
    // fixed by a constant shift, which S does not see.
    let mu = s.diagonal().iter().sum::<f64>() / qq;
    let op = RankOneUpdate { a: &s, q: &q, mu };
    let opts = SolverOptions {
        tol_rel: 1e-11,
        ..SolverOptions::default()
    };
    let mut c = cg_solve(&op, &r, None, &opts)?.x;
    let area: f64 = q.iter().sum();
    let shift = (target_mean - dot(&q, &c)) / area;
    c.iter_mut().for_each(|v| *v += shift);

    let sc = s.spmv(&c)?;
    let res = sc.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let rn = norm(&r);
    if res > 1e-10 * rn.max(f64::MIN_POSITIVE) && res > 1e-14 {
        return Err(Error::NoConvergence {
            context: "Ritz projection".into(),
            residual: res / rn,
        });
    }
    Ok(c.into())
}

// 1ᵀM, i.e. ∫ φ_j.
fn lumped_row_sums(mesh: &SurfaceMesh) -> Result<Vec<f64>> {
    let mut q = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_tris() {
        let g = mesh.element_geometry(e)?;
        for &j in &mesh.tris[e] {
            q[j] += g.area / 3.0;
        }
    }
    Ok(q)
}

/// `A + μ q qᵀ`, applied without forming the dense rank-one part.
pub struct RankOneUpdate<'a> {
    pub a: &'a CsrMatrix,
    pub q: &'a [f64],
    pub mu: f64,
}

impl LinearOperator for RankOneUpdate<'_> {
    fn dim(&self) -> usize {
        self.a.n_rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.a.spmv_into(x, y);
        let qx: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        for (yi, qi) in y.iter_mut().zip(self.q) {
            *yi += self.mu * qi * qx;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.a
            .diagonal()
            .iter()
            .zip(self.q)
            .map(|(d, q)| d + self.mu * q * q)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    /// `‖P_h ∇ũ(p) − ∇_{Γ_h} U_h‖_{L²(Γ_h)}`.
    pub h1_semi: f64,
    /// `sqrt(l2² + h1_semi²)`.
    pub h1: f64,
}

/// Errors between `U_h` on Γ_h(t) and the inverse lift of `exact`.
pub fn error_norms<F: AmbientField + ?Sized>(
    mesh: &SurfaceMesh,
    u: &[f64],
    exact: &F,
    surface: &LevelSetSurface,
    t: f64,
    quad: &QuadratureRule,
) -> Result<ErrorNorms> {
    if u.len() != mesh.n_nodes() {
        return Err(Error::LengthMismatch(u.len(), mesh.n_nodes()));
    }
    let locals: Vec<(f64, f64)> = (0..mesh.n_tris())
        .into_par_iter()
        .map(|e| -> Result<(f64, f64)> {
            let g = mesh.element_geometry(e)?;
            let tri = mesh.tris[e];
            let vals = [u[tri[0]], u[tri[1]], u[tri[2]]];
            let grad_h: Vector3<f64> = (0..3).map(|a| g.grads[a] * vals[a]).sum();
            let mut l2 = 0.0;
            let mut semi = 0.0;
            for (x, l, w) in quad.map(&mesh.vertices(e)) {
                let p = surface.closest_point(&x, t)?;
                let jet = exact.jet(&p, t);
                let uh = vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2];
                l2 += w * (jet.v - uh).powi(2);
                let grad = Vector3::from(jet.g);
                let projected = grad - g.normal * g.normal.dot(&grad);
                semi += w * (projected - grad_h).norm_squared();
            }
            Ok((l2 * g.area, semi * g.area))
        })
        .collect::<Result<_>>()?;
    let (l2, semi) = locals
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    Ok(ErrorNorms {
        l2: l2.sqrt(),
        h1_semi: semi.sqrt(),
        h1: (l2 + semi).sqrt(),
    })
}

/// `eoc_i = log(E_i / E_{i−1}) / log(h_i / h_{i−1})` for `i ≥ 1`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() {
        return Err(Error::LengthMismatch(errors.len(), hs.len()));
    }
    if errors.len() < 2 {
        return Err(Error::validation("errors", "need at least two entries"));
    }
    if let Some(&bad) = errors.iter().chain(hs).find(|&&v| !(v > 0.0)) {
        return Err(Error::NonPositiveInput(bad));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[1] / e[0]).ln() / (h[1] / h[0]).ln())
        .collect())
}

/// `∫_{Γ_h} ε/2 |∇U_h|² + ψ(U_h)/ε`.
pub fn ginzburg_landau_energy(
    mesh: &SurfaceMesh,
    u: &[f64],
    epsilon: f64,
    quad: &QuadratureRule,
) -> Result<f64> {
    if u.len() != mesh.n_nodes() {
        return Err(Error::LengthMismatch(u.len(), mesh.n_nodes()));
    }
    let locals: Vec<f64> = (0..mesh.n_tris())
        .into_par_iter()
        .map(|e| -> Result<f64> {
            let g = mesh.element_geometry(e)?;
            let tri = mesh.tris[e];
            let vals = [u[tri[0]], u[tri[1]], u[tri[2]]];
            let grad: Vector3<f64> = (0..3).map(|a| g.grads[a] * vals[a]).sum();
            let potential: f64 = quad
                .points
                .iter()
                .zip(&quad.weights)
                .map(|(l, w)| w * double_well(vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2]))
                .sum();
            Ok(g.area * (0.5 * epsilon * grad.norm_squared() + potential / epsilon))
        })
        .collect::<Result<_>>()?;
    Ok(locals.iter().sum())
}

/// `1ᵀ M U = ∫_{Γ_h} U_h`.
pub fn total_mass(mesh: &SurfaceMesh, u: &[f64]) -> f64 {
    mesh.tris
        .iter()
        .enumerate()
        .map(|(e, tri)| {
            let [x0, x1, x2] = mesh.vertices(e);
            let area = 0.5 * (x1 - x0).cross(&(x2 - x0)).norm();
            area / 3.0 * (u[tri[0]] + u[tri[1]] + u[tri[2]])
        })
        .sum()
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    pub level: u32,
    pub h: f64,
    pub err_u_l2: f64,
    pub err_w_l2: f64,
    pub err_u_h1: f64,
    pub err_w_h1: f64,
    pub eoc_u_l2: Option<f64>,
    pub eoc_w_l2: Option<f64>,
    pub eoc_u_h1: Option<f64>,
    pub eoc_w_h1: Option<f64>,
}

impl ConvergenceRecord {
    pub fn new(level: u32, h: f64, u: ErrorNorms, w: ErrorNorms) -> Self {
        ConvergenceRecord {
            level,
            h,
            err_u_l2: u.l2,
            err_w_l2: w.l2,
            err_u_h1: u.h1,
            err_w_h1: w.h1,
            eoc_u_l2: None,
            eoc_w_l2: None,
            eoc_u_h1: None,
            eoc_w_h1: None,
        }
    }
}

/// Fills the EOC columns from consecutive records. `h` must strictly decrease.
pub fn fill_eoc(records: &mut [ConvergenceRecord]) -> Result<()> {
    for k in 1..records.len() {
        let (prev, cur) = (&records[k - 1], &records[k]);
        if !(cur.h < prev.h) {
            return Err(Error::validation(
                "h",
                format!("mesh sizes not decreasing at level {}", cur.level),
            ));
        }
        let hs = [prev.h, cur.h];
        let rate = |a: f64, b: f64| eoc(&[a, b], &hs).map(|v| v[0]);
        let eu = rate(prev.err_u_l2, cur.err_u_l2)?;
        let ew = rate(prev.err_w_l2, cur.err_w_l2)?;
        let euh = rate(prev.err_u_h1, cur.err_u_h1)?;
        let ewh = rate(prev.err_w_h1, cur.err_w_h1)?;
        let cur = &mut records[k];
        cur.eoc_u_l2 = Some(eu);
        cur.eoc_w_l2 = Some(ew);
        cur.eoc_u_h1 = Some(euh);
        cur.eoc_w_h1 = Some(ewh);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_mass;
    use crate::geometry::{ConstantField, CosineProduct, Monomial};
    use crate::mesh::{build_icosphere, initial_mesh};
    use std::f64::consts::PI;

    const XY: Monomial = Monomial {
        coeff: 1.0,
        powers: [1, 1, 0],
    };

    fn sphere_levels(levels: std::ops::RangeInclusive<u32>) -> Vec<SurfaceMesh> {
        levels.map(|l| build_icosphere(l).unwrap()).collect()
    }

    #[test]
    fn eoc_examples() {
        let r = eoc(&[9.424750e-3, 3.001764e-3], &[5.564983e-1, 2.866409e-1]).unwrap();
        assert!((r[0] - 1.724571).abs() <= 1e-5, "{}", r[0]);
        let r = eoc(&[1.0, 0.25, 0.0625], &[1.0, 0.5, 0.25]).unwrap();
        assert!(r.iter().all(|v| (v - 2.0).abs() < 1e-14));
        assert_eq!(eoc(&[0.3, 0.3], &[1.0, 0.5]).unwrap(), vec![0.0]);
        let scaled = eoc(&[3.0 * 4.0, 0.9 * 4.0], &[0.4, 0.2]).unwrap()[0];
        let base = eoc(&[3.0, 0.9], &[0.4, 0.2]).unwrap()[0];
        assert_eq!(scaled.to_bits(), base.to_bits());
        assert!(matches!(eoc(&[1.0], &[1.0, 0.5]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(eoc(&[1.0, 0.0], &[1.0, 0.5]), Err(Error::NonPositiveInput(_))));
    }

    #[test]
    fn interpolation_basics_and_order() {
        let s = LevelSetSurface::sphere(1.0);
        let q = QuadratureRule::default();
        let m = build_icosphere(2).unwrap();
        assert!(interpolate_nodal(&m, &ConstantField(2.5), 0.0).iter().all(|&v| v == 2.5));
        let z = interpolate_nodal(&m, &Monomial::new(1.0, [0, 0, 1]), 0.0);
        assert!(z.iter().zip(&m.nodes).all(|(v, x)| *v == x[2]));

        let meshes = sphere_levels(1..=4);
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        for mesh in &meshes {
            let u = interpolate_nodal(mesh, &XY, 0.0);
            errs.push(error_norms(mesh, &u, &XY, &s, 0.0, &q).unwrap());
            hs.push(mesh.metrics().h);
        }
        let l2: Vec<f64> = errs.iter().map(|e| e.l2).collect();
        let h1: Vec<f64> = errs.iter().map(|e| e.h1).collect();
        assert!(l2.windows(2).all(|w| w[1] < w[0]));
        let r2 = eoc(&l2, &hs).unwrap();
        let r1 = eoc(&h1, &hs).unwrap();
        assert!(r2[2] > 1.9, "{r2:?}");
        assert!(r1[2] > 0.9, "{r1:?}");
    }

    #[test]
    fn exact_constant_has_zero_error() {
        let s = LevelSetSurface::dziuk_ellipsoid();
        let m = initial_mesh(&s, 2).unwrap();
        let u = vec![1.5; m.n_nodes()];
        let e = error_norms(&m, &u, &ConstantField(1.5), &s, 0.0, &QuadratureRule::default()).unwrap();
        assert_eq!(e.l2, 0.0);
        assert!(e.h1 <= 1e-13);
    }

    #[test]
    fn ritz_projection_constant_and_residual() {
        let s = LevelSetSurface::sphere(1.0);
        let q = QuadratureRule::default();
        let m = build_icosphere(2).unwrap();
        let c = ritz_projection(&m, &s, 0.0, &ConstantField(0.7), &q).unwrap();
        let mass = assemble_mass(&m, false).unwrap();
        let ones = vec![1.0; m.n_nodes()];
        // mean matches ∫_Γ 0.7 = 0.7·4π up to lifted quadrature
        let mean = mass.bilinear(&ones, &c);
        assert!((mean - 0.7 * 4.0 * PI).abs() < 1e-3);
        let spread = c.iter().fold(0.0f64, |a, v| a.max((v - c[0]).abs()));
        assert!(spread <= 1e-10);
    }

    #[test]
    fn ritz_projection_order() {
        let s = LevelSetSurface::sphere(1.0);
        let q = QuadratureRule::default();
        let mut l2 = Vec::new();
        let mut hs = Vec::new();
        for mesh in sphere_levels(1..=4) {
            let p = ritz_projection(&mesh, &s, 0.0, &XY, &q).unwrap();
            l2.push(error_norms(&mesh, &p, &XY, &s, 0.0, &q).unwrap().l2);
            hs.push(mesh.metrics().h);
        }
        let r = eoc(&l2, &hs).unwrap();
        assert!(r[2] > 1.85, "{r:?}");
    }

    #[test]
    fn energy_and_mass() {
        let m = build_icosphere(3).unwrap();
        let q = QuadratureRule::default();
        let n = m.n_nodes();
        for c in [1.0, -1.0] {
            assert!(ginzburg_landau_energy(&m, &vec![c; n], 0.1, &q).unwrap().abs() < 1e-15);
        }
        let e0 = ginzburg_landau_energy(&m, &vec![0.0; n], 0.1, &q).unwrap();
        assert!((e0 - m.total_area() / 0.4).abs() < 1e-12);
        let u = vec![0.5; n];
        assert!((total_mass(&m, &u) - 0.5 * m.total_area()).abs() < 1e-13);
    }

    #[test]
    fn energy_matches_degree_eight_oracle() {
        let s = LevelSetSurface::dziuk_ellipsoid();
        let m = initial_mesh(&s, 2).unwrap();
        let u = interpolate_nodal(&m, &CosineProduct, 0.0);
        let eps = 0.1;
        let e = ginzburg_landau_energy(&m, &u, eps, &QuadratureRule::default()).unwrap();
        let stiff = assemble_stiffness(&m).unwrap();
        let q8 = QuadratureRule::sixteen_point();
        let mut pot = 0.0;
        for (k, tri) in m.tris.iter().enumerate() {
            let area = m.element_geometry(k).unwrap().area;
            for (l, w) in q8.points.iter().zip(&q8.weights) {
                let v: f64 = (0..3).map(|a| u[tri[a]] * l[a]).sum();
                pot += area * w * 0.25 * (v * v - 1.0).powi(2);
            }
        }
        let oracle = 0.5 * eps * stiff.bilinear(&u, &u) + pot / eps;
        assert!(((e - oracle) / oracle).abs() <= 1e-8);
        assert!(e >= 0.0);
    }

    #[test]
    fn random_field_is_seeded_and_bounded() {
        let a = random_nodal(100, 42, 0.1);
        let b = random_nodal(100, 42, 0.1);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| v.abs() <= 0.1));
        assert_ne!(a, random_nodal(100, 43, 0.1));
    }

    #[test]
    fn eoc_fill_requires_decreasing_h() {
        let e = ErrorNorms {
            l2: 1.0,
            h1_semi: 1.0,
            h1: 1.0,
        };
        let half = ErrorNorms {
            l2: 0.25,
            h1_semi: 0.5,
            h1: 0.5,
        };
        let mut recs = vec![ConvergenceRecord::new(1, 0.5, e, e), ConvergenceRecord::new(2, 0.25, half, half)];
        fill_eoc(&mut recs).unwrap();
        assert_eq!(recs[0].eoc_u_l2, None);
        assert!((recs[1].eoc_u_l2.unwrap() - 2.0).abs() < 1e-14);
        assert!((recs[1].eoc_u_h1.unwrap() - 1.0).abs() < 1e-14);
        recs[1].h = 0.6;
        assert!(fill_eoc(&mut recs).is_err());
    }
}
