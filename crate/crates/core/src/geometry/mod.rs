//! Smooth evolving surfaces given as zero level sets, their differential
//! geometry, material velocities, and the manufactured forcing of the linear
//! fourth-order test problem.
//!
//! All derivatives are obtained with forward-mode AD (see [`ad`]); surface
//! fields are extended off the surface by their closed-form ambient
//! expressions.

pub mod ad;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use ad::{Dual, Jet, Scalar};

pub type Point = Vector3<f64>;

/// Smallest admissible |∇Φ|.
pub const MIN_GRADIENT_NORM: f64 = 1e-10;

const CLOSEST_POINT_MAX_ITER: usize = 50;
const CLOSEST_POINT_TOL: f64 = 1e-12;

/// A scalar field on ℝ³ × [0, T], generic over the number type so that it can
/// be differentiated by [`Jet`] and [`Dual`].
pub trait AmbientField: Sync {
    fn eval<S: Scalar>(&self, x: [S; 3], t: S) -> S;

    fn value(&self, x: &Point, t: f64) -> f64 {
        self.eval([x[0], x[1], x[2]], t)
    }

    /// Value, gradient and Hessian in space.
    fn jet(&self, x: &Point, t: f64) -> Jet<f64> {
        self.eval(Jet::seed([x[0], x[1], x[2]]), Jet::constant(t))
    }

    fn time_derivative(&self, x: &Point, t: f64) -> f64 {
        let c = |v: f64| Dual::constant(v);
        self.eval([c(x[0]), c(x[1]), c(x[2])], Dual::variable(t)).d
    }
}

impl<F: AmbientField> AmbientField for &F {
    fn eval<S: Scalar>(&self, x: [S; 3], t: S) -> S {
        (**self).eval(x, t)
    }
}

/// Constant field.
#[derive(Clone, Copy, Debug)]
pub struct ConstantField(pub f64);

impl AmbientField for ConstantField {
    fn eval<S: Scalar>(&self, _x: [S; 3], _t: S) -> S {
        S::cst(self.0)
    }
}

/// Time-independent monomial `c · x_i x_j ...` given by integer exponents.
#[derive(Clone, Copy, Debug)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: [u32; 3],
}

impl Monomial {
    pub fn new(coeff: f64, powers: [u32; 3]) -> Self {
        Monomial { coeff, powers }
    }
}

impl AmbientField for Monomial {
    fn eval<S: Scalar>(&self, x: [S; 3], _t: S) -> S {
        x[0].powi(self.powers[0]) * x[1].powi(self.powers[1]) * x[2].powi(self.powers[2])
            * self.coeff
    }
}

/// Exact solution of the linear test problem, `u(x, t) = e^{-6t} x₁ x₂`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearTestSolution;

impl AmbientField for LinearTestSolution {
    fn eval<S: Scalar>(&self, x: [S; 3], t: S) -> S {
        (t * -6.0).exp() * x[0] * x[1]
    }
}

pub fn exact_solution_linear4th(x: &Point, t: f64) -> f64 {
    LinearTestSolution.value(x, t)
}

/// Initial condition of the Cahn–Hilliard runs on the ellipsoid,
/// `0.1 cos(2πx) cos(2πy) cos(2πz)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CosineProduct;

impl AmbientField for CosineProduct {
    fn eval<S: Scalar>(&self, x: [S; 3], _t: S) -> S {
        (x[0] * (2.0 * PI)).cos() * (x[1] * (2.0 * PI)).cos() * (x[2] * (2.0 * PI)).cos() * 0.1
    }
}

/// `scale · Δ_Γ η̃` extended off the surface by the ambient formula.
///
/// With `scale = -ε` and `η̃ = u` this is the chemical potential `w` of the
/// linear problem.
pub struct ScaledLaplaceBeltrami<'a, F> {
    pub surface: &'a LevelSetSurface,
    pub field: F,
    pub scale: f64,
}

impl<F: AmbientField> AmbientField for ScaledLaplaceBeltrami<'_, F> {
    fn eval<S: Scalar>(&self, x: [S; 3], t: S) -> S {
        laplace_beltrami_ambient(self.surface, &self.field, x, t) * self.scale
    }
}

/// Chemical potential of the linear test, `w = -ε Δ_Γ u`.
pub fn chemical_potential_linear4th(
    surface: &LevelSetSurface,
    epsilon: f64,
) -> ScaledLaplaceBeltrami<'_, LinearTestSolution> {
    ScaledLaplaceBeltrami {
        surface,
        field: LinearTestSolution,
        scale: -epsilon,
    }
}

/// Surface presets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SurfaceKind {
    /// Stationary sphere `|x|² − R² = 0`.
    Sphere { radius: f64 },
    /// `x₁²/a(t) + x₂² + x₃² − 1 = 0` with `a(t) = 1 + 0.25 sin(10πt)`.
    DziukEllipsoid,
    /// `x₁² + x₂² + a(t)² G(x₃²/L(t)²) − a(t)² = 0`.
    Dumbbell,
}

impl SurfaceKind {
    pub fn id(&self) -> &'static str {
        match self {
            SurfaceKind::Sphere { .. } => "sphere",
            SurfaceKind::DziukEllipsoid => "dziuk-ellipsoid",
            SurfaceKind::Dumbbell => "dumbbell",
        }
    }
}

impl FromStr for SurfaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SurfaceKind::Sphere { radius: 1.0 }),
            "dziuk-ellipsoid" => Ok(SurfaceKind::DziukEllipsoid),
            "dumbbell" => Ok(SurfaceKind::Dumbbell),
            other => Err(Error::UnknownExperiment(other.to_string())),
        }
    }
}

impl fmt::Display for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Ellipsoid semi-axis law `a(t) = 1 + 0.25 sin(10πt)`.
fn ellipsoid_a<S: Scalar>(t: S) -> S {
    (t * (10.0 * PI)).sin() * 0.25 + 1.0
}

fn ellipsoid_a_dot(t: f64) -> f64 {
    2.5 * PI * (10.0 * PI * t).cos()
}

fn dumbbell_a<S: Scalar>(t: S) -> S {
    (t * (2.0 * PI)).sin() * 0.05 + 0.1
}

fn dumbbell_a_dot(t: f64) -> f64 {
    0.1 * PI * (2.0 * PI * t).cos()
}

fn dumbbell_l<S: Scalar>(t: S) -> S {
    (t * (4.0 * PI)).sin() * 0.2 + 1.0
}

fn dumbbell_l_dot(t: f64) -> f64 {
    0.8 * PI * (4.0 * PI * t).cos()
}

/// Dumbbell profile `G(s) = 200 s (s − 199/100)`.
fn dumbbell_g<S: Scalar>(s: S) -> S {
    s * (s - 1.99) * 200.0
}

/// Unit normal, shape operator and mean curvature at a point.
#[derive(Clone, Debug)]
pub struct GeometryPack {
    pub normal: Vector3<f64>,
    /// Mean curvature, trace of the shape operator (2/R on a sphere).
    pub mean_curvature: f64,
    pub projector: Matrix3<f64>,
    pub weingarten: Matrix3<f64>,
}

/// A closed surface Γ(t) = {Φ(·, t) = 0}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelSetSurface {
    pub kind: SurfaceKind,
}

impl AmbientField for LevelSetSurface {
    fn eval<S: Scalar>(&self, x: [S; 3], t: S) -> S {
        self.phi(x, t)
    }
}

impl LevelSetSurface {
    pub fn new(kind: SurfaceKind) -> Self {
        LevelSetSurface { kind }
    }

    pub fn sphere(radius: f64) -> Self {
        Self::new(SurfaceKind::Sphere { radius })
    }

    pub fn dziuk_ellipsoid() -> Self {
        Self::new(SurfaceKind::DziukEllipsoid)
    }

    pub fn dumbbell() -> Self {
        Self::new(SurfaceKind::Dumbbell)
    }

    pub fn from_id(id: &str) -> Result<Self> {
        Ok(Self::new(id.parse()?))
    }

    /// Level-set function Φ(x, t).
    pub fn phi<S: Scalar>(&self, x: [S; 3], t: S) -> S {
        match self.kind {
            SurfaceKind::Sphere { radius } => {
                x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - radius * radius
            }
            SurfaceKind::DziukEllipsoid => {
                x[0] * x[0] / ellipsoid_a(t) + x[1] * x[1] + x[2] * x[2] - 1.0
            }
            SurfaceKind::Dumbbell => {
                let a = dumbbell_a(t);
                let l = dumbbell_l(t);
                let a2 = a * a;
                x[0] * x[0] + x[1] * x[1] + a2 * dumbbell_g(x[2] * x[2] / (l * l)) - a2
            }
        }
    }

    pub fn phi_at(&self, x: &Point, t: f64) -> f64 {
        self.value(x, t)
    }

    /// Φ, ∇Φ, ∇²Φ at `x`, rejecting points where the gradient degenerates.
    fn checked_jet(&self, x: &Point, t: f64) -> Result<(Jet<f64>, f64)> {
        let j = self.jet(x, t);
        let n = norm3(&j.g);
        if !(n >= MIN_GRADIENT_NORM) {
            return Err(Error::DegenerateGradient {
                point: [x[0], x[1], x[2]],
                norm: n,
            });
        }
        Ok((j, n))
    }

    pub fn geometry_pack(&self, x: &Point, t: f64) -> Result<GeometryPack> {
        let (j, n) = self.checked_jet(x, t)?;
        let normal = Vector3::from(j.g) / n;
        let projector = Matrix3::identity() - normal * normal.transpose();
        let hess = Matrix3::from_fn(|r, c| j.h[r][c]);
        let weingarten = projector * hess * projector / n;
        Ok(GeometryPack {
            normal,
            mean_curvature: weingarten.trace(),
            projector,
            weingarten,
        })
    }

    pub fn normal(&self, x: &Point, t: f64) -> Result<Vector3<f64>> {
        let (j, n) = self.checked_jet(x, t)?;
        Ok(Vector3::from(j.g) / n)
    }

    /// Closest point on Γ(t) to `x`, by damped Newton iteration on
    /// `p − x + λ∇Φ(p) = 0, Φ(p) = 0`.
    pub fn closest_point(&self, x: &Point, t: f64) -> Result<Point> {
        let (j0, n0) = self.checked_jet(x, t)?;
        let g0 = Vector3::from(j0.g);
        let mut p = x - g0 * (j0.v / (n0 * n0));
        let (jp, np) = self.checked_jet(&p, t)?;
        let mut lambda = (x - p).dot(&Vector3::from(jp.g)) / (np * np);

        let residual = |p: &Point, lambda: f64| -> Result<(Vector4<f64>, Jet<f64>)> {
            let (j, _) = self.checked_jet(p, t)?;
            let g = Vector3::from(j.g);
            let r = p - x + g * lambda;
            Ok((Vector4::new(r[0], r[1], r[2], j.v), j))
        };

        let scale = 1.0 + x.norm();
        let (mut res, mut jet) = residual(&p, lambda)?;
        for _ in 0..CLOSEST_POINT_MAX_ITER {
            let stationary = res.fixed_rows::<3>(0).norm() <= CLOSEST_POINT_TOL * scale;
            if stationary && res[3].abs() <= CLOSEST_POINT_TOL {
                return Ok(p);
            }
            let mut jac = Matrix4::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    jac[(r, c)] = lambda * jet.h[r][c] + if r == c { 1.0 } else { 0.0 };
                }
                jac[(r, 3)] = jet.g[r];
                jac[(3, r)] = jet.g[r];
            }
            let step = jac.lu().solve(&(-res)).ok_or_else(|| Error::NoConvergence {
                context: "closest-point Newton (singular Jacobian)".into(),
                residual: res.norm(),
            })?;
            let mut damping = 1.0;
            loop {
                let p_new = p + step.fixed_rows::<3>(0) * damping;
                let l_new = lambda + step[3] * damping;
                let (r_new, j_new) = residual(&p_new, l_new)?;
                if r_new.norm() < res.norm() || damping < 1e-3 {
                    p = p_new;
                    lambda = l_new;
                    res = r_new;
                    jet = j_new;
                    break;
                }
                damping *= 0.5;
            }
        }
        Err(Error::NoConvergence {
            context: format!("closest-point projection of {:?}", [x[0], x[1], x[2]]),
            residual: res.norm(),
        })
    }

    /// Material velocity of the preset's surface points.
    pub fn velocity<S: Scalar>(&self, x: [S; 3], t: f64) -> [S; 3] {
        match self.kind {
            SurfaceKind::Sphere { .. } => [S::zero(); 3],
            SurfaceKind::DziukEllipsoid => {
                let rate = ellipsoid_a_dot(t) / (2.0 * ellipsoid_a(t));
                [x[0] * rate, S::zero(), S::zero()]
            }
            SurfaceKind::Dumbbell => {
                let ra = dumbbell_a_dot(t) / dumbbell_a(t);
                let rl = dumbbell_l_dot(t) / dumbbell_l(t);
                [x[0] * ra, x[1] * ra, x[2] * rl]
            }
        }
    }

    pub fn material_velocity(&self, x: &Point, t: f64) -> Vector3<f64> {
        Vector3::from(self.velocity([x[0], x[1], x[2]], t))
    }

    /// Tangential divergence `∇·v − νᵀ(∇v)ν`.
    pub fn surface_divergence_v(&self, x: &Point, t: f64) -> Result<f64> {
        let nu = self.normal(x, t)?;
        let v = self.velocity(Jet::seed([x[0], x[1], x[2]]), t);
        let jac = Matrix3::from_fn(|r, c| v[r].g[c]);
        Ok(jac.trace() - (nu.transpose() * jac * nu)[0])
    }

    /// Closed-form trajectory: position at time `t` of the material point
    /// that sat at `x` at time `t0`.
    pub fn flow_map(&self, x: &Point, t0: f64, t: f64) -> Point {
        match self.kind {
            SurfaceKind::Sphere { .. } => *x,
            SurfaceKind::DziukEllipsoid => {
                let s = (ellipsoid_a(t) / ellipsoid_a(t0)).sqrt();
                Point::new(x[0] * s, x[1], x[2])
            }
            SurfaceKind::Dumbbell => {
                let sa = dumbbell_a(t) / dumbbell_a(t0);
                let sl = dumbbell_l(t) / dumbbell_l(t0);
                Point::new(x[0] * sa, x[1] * sa, x[2] * sl)
            }
        }
    }
}

fn norm3<S: Scalar>(g: &[S; 3]) -> S {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

/// Ambient Laplace–Beltrami formula
/// `Δ_Γη = Δη̃ − νᵀ(∇²η̃)ν − H ν·∇η̃`, with ν = ∇Φ/|∇Φ| and H = ∇·ν,
/// evaluated in any scalar type (so it can itself be differentiated).
pub fn laplace_beltrami_ambient<S: Scalar, F: AmbientField + ?Sized>(
    surface: &LevelSetSurface,
    field: &F,
    x: [S; 3],
    t: S,
) -> S {
    let xj = Jet::seed(x);
    let tj = Jet::constant(t);
    let phi = surface.phi(xj, tj);
    let eta = field.eval(xj, tj);

    let n = norm3(&phi.g);
    let nu = [phi.g[0] / n, phi.g[1] / n, phi.g[2] / n];
    let quad = |h: &[[S; 3]; 3]| {
        let mut acc = S::zero();
        for i in 0..3 {
            for j in 0..3 {
                acc = acc + nu[i] * h[i][j] * nu[j];
            }
        }
        acc
    };
    let mean_curvature = (phi.laplacian() - quad(&phi.h)) / n;
    let nu_dot_grad = nu[0] * eta.g[0] + nu[1] * eta.g[1] + nu[2] * eta.g[2];
    eta.laplacian() - quad(&eta.h) - mean_curvature * nu_dot_grad
}

/// `P ∇η̃` at a point of Γ(t).
pub fn surface_gradient<F: AmbientField + ?Sized>(
    field: &F,
    surface: &LevelSetSurface,
    x: &Point,
    t: f64,
) -> Result<Vector3<f64>> {
    let nu = surface.normal(x, t)?;
    let g = Vector3::from(field.jet(x, t).g);
    Ok(g - nu * nu.dot(&g))
}

pub fn laplace_beltrami<F: AmbientField + ?Sized>(
    field: &F,
    surface: &LevelSetSurface,
    x: &Point,
    t: f64,
) -> Result<f64> {
    surface.checked_jet(x, t)?;
    Ok(laplace_beltrami_ambient(surface, field, [x[0], x[1], x[2]], t))
}

/// Right-hand side of the linear fourth-order problem for an arbitrary
/// trial solution `u`:
/// `f = ∂ₜũ + v·∇ũ + ũ ∇_Γ·v − Δ_Γ w̃`, with `w̃ = −ε Δ_Γ ũ`.
pub fn forcing_for<F: AmbientField>(
    field: &F,
    surface: &LevelSetSurface,
    x: &Point,
    t: f64,
    epsilon: f64,
) -> Result<f64> {
    surface.checked_jet(x, t)?;
    let u = field.jet(x, t);
    let u_t = field.time_derivative(x, t);
    let v = surface.material_velocity(x, t);
    let advect = v[0] * u.g[0] + v[1] * u.g[1] + v[2] * u.g[2];
    let div_v = surface.surface_divergence_v(x, t)?;
    let w = ScaledLaplaceBeltrami {
        surface,
        field,
        scale: -epsilon,
    };
    let lap_w = laplace_beltrami(&w, surface, x, t)?;
    Ok(u_t + advect + u.v * div_v - lap_w)
}

/// Manufactured forcing for `u = e^{-6t} x₁x₂`.
pub fn forcing_linear4th(
    surface: &LevelSetSurface,
    x: &Point,
    t: f64,
    epsilon: f64,
) -> Result<f64> {
    forcing_for(&LinearTestSolution, surface, x, t, epsilon)
}
