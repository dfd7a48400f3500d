//! P1 finite element assembly on the current surface mesh.

use std::ops::{Deref, DerefMut};

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{LevelSetSurface, Point};
use crate::linalg::CsrMatrix;
use crate::mesh::{ElementGeometry, SurfaceMesh};

/// Nodal values of a piecewise linear function on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub coeffs: Vec<f64>,
}

impl NodalField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        NodalField { coeffs }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        NodalField {
            coeffs: vec![value; n],
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn check_len(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.coeffs.len() != mesh.n_nodes() {
            return Err(Error::LengthMismatch(self.coeffs.len(), mesh.n_nodes()));
        }
        Ok(())
    }
}

impl Deref for NodalField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coeffs
    }
}

impl DerefMut for NodalField {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
}

impl From<Vec<f64>> for NodalField {
    fn from(coeffs: Vec<f64>) -> Self {
        NodalField { coeffs }
    }
}

/// Symmetric rule on a triangle in barycentric coordinates. Weights are
/// normalised to sum to one, so `∫_E f ≈ |E| Σ w_q f(x_q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: u32,
}

impl QuadratureRule {
    pub fn centroid() -> Self {
        QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    pub fn three_point() -> Self {
        let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
        QuadratureRule {
            points: vec![[a, b, b], [b, a, b], [b, b, a]],
            weights: vec![1.0 / 3.0; 3],
            degree: 2,
        }
    }

    /// Radon's 7-point rule.
    pub fn seven_point() -> Self {
        let s = 15f64.sqrt();
        let mut rule = QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![9.0 / 40.0],
            degree: 5,
        };
        for (b, w) in [
            ((6.0 - s) / 21.0, (155.0 - s) / 1200.0),
            ((6.0 + s) / 21.0, (155.0 + s) / 1200.0),
        ] {
            rule.push_orbit3(1.0 - 2.0 * b, w);
        }
        rule
    }

    /// Dunavant's 16-point rule.
    pub fn sixteen_point() -> Self {
        let mut rule = QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![0.144315607677787],
            degree: 8,
        };
        rule.push_orbit3(0.081414823414554, 0.095091634267285);
        rule.push_orbit3(0.658861384496480, 0.103217370534718);
        rule.push_orbit3(0.898905543365938, 0.032458497623198);
        let (a, b, c) = (0.008394777409958, 0.263112829634638, 0.728492392955404);
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            rule.points.push(p);
            rule.weights.push(0.027230314174435);
        }
        rule
    }

    /// Smallest built-in rule exact for polynomials of the given degree.
    pub fn with_degree(degree: u32) -> Result<Self> {
        match degree {
            0 | 1 => Ok(Self::centroid()),
            2 => Ok(Self::three_point()),
            3..=5 => Ok(Self::seven_point()),
            6..=8 => Ok(Self::sixteen_point()),
            _ => Err(Error::validation(
                "quadrature degree",
                format!("{degree} exceeds the highest available rule (8)"),
            )),
        }
    }

    // (a, b, b) and its two rotations, with b = (1 − a)/2.
    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 0.5 * (1.0 - a);
        for p in [[a, b, b], [b, a, b], [b, b, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical quadrature points of a triangle.
    pub fn map(&self, x: &[Point; 3]) -> impl Iterator<Item = (Point, &[f64; 3], f64)> + '_ {
        let x = *x;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(l, &w)| (x[0] * l[0] + x[1] * l[1] + x[2] * l[2], l, w))
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::seven_point()
    }
}

/// Double-well potential `ψ(z) = ¼(z² − 1)²`.
pub fn double_well(z: f64) -> f64 {
    0.25 * (z * z - 1.0).powi(2)
}

pub fn double_well_prime(z: f64) -> f64 {
    z * z * z - z
}

pub fn element_geometries(mesh: &SurfaceMesh) -> Result<Vec<ElementGeometry>> {
    (0..mesh.n_tris())
        .into_par_iter()
        .map(|e| mesh.element_geometry(e))
        .collect()
}

fn assemble_elementwise<F>(mesh: &SurfaceMesh, element: F) -> Result<CsrMatrix>
where
    F: Fn(usize, &ElementGeometry) -> Result<[[f64; 3]; 3]> + Sync,
{
    let locals: Vec<[[f64; 3]; 3]> = (0..mesh.n_tris())
        .into_par_iter()
        .map(|e| element(e, &mesh.element_geometry(e)?))
        .collect::<Result<_>>()?;
    let mut triplets = Vec::with_capacity(9 * locals.len());
    for (tri, local) in mesh.tris.iter().zip(&locals) {
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], local[a][b]));
            }
        }
    }
    let n = mesh.n_nodes();
    CsrMatrix::from_triplets(n, n, &triplets)
}

fn scatter<F>(mesh: &SurfaceMesh, element: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &ElementGeometry) -> Result<[f64; 3]> + Sync,
{
    let locals: Vec<[f64; 3]> = (0..mesh.n_tris())
        .into_par_iter()
        .map(|e| element(e, &mesh.element_geometry(e)?))
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; mesh.n_nodes()];
    for (tri, local) in mesh.tris.iter().zip(&locals) {
        for a in 0..3 {
            out[tri[a]] += local[a];
        }
    }
    Ok(out)
}

fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Mass matrix `∫ φ_i φ_j`, exact for flat triangles. The lumped variant
/// places the row sums on the diagonal.
pub fn assemble_mass(mesh: &SurfaceMesh, lumped: bool) -> Result<CsrMatrix> {
    if lumped {
        let diag = scatter(mesh, |_, g| Ok([g.area / 3.0; 3]))?;
        return Ok(CsrMatrix::from_diagonal(&diag));
    }
    assemble_elementwise(mesh, |_, g| Ok(local_mass(g.area)))
}

/// Stiffness matrix `∫ ∇φ_i · ∇φ_j`.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<CsrMatrix> {
    assemble_elementwise(mesh, |_, g| {
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] = g.area * g.grads[a].dot(&g.grads[b]);
            }
        }
        Ok(k)
    })
}

/// `Ψ(α)_j = ∫ ψ′(U_h) φ_j` with `U_h = Σ α_i φ_i`.
pub fn assemble_nonlinear(
    mesh: &SurfaceMesh,
    alpha: &[f64],
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    if alpha.len() != mesh.n_nodes() {
        return Err(Error::LengthMismatch(alpha.len(), mesh.n_nodes()));
    }
    scatter(mesh, |e, g| {
        let tri = mesh.tris[e];
        let vals = [alpha[tri[0]], alpha[tri[1]], alpha[tri[2]]];
        let mut local = [0.0; 3];
        for (l, w) in quad.points.iter().zip(&quad.weights) {
            let u = vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2];
            let f = double_well_prime(u) * w * g.area;
            for a in 0..3 {
                local[a] += f * l[a];
            }
        }
        Ok(local)
    })
}

/// `b_j = ∫_{Γ_h} f φ_j`, with `f` evaluated at quadrature points of Γ_h.
pub fn assemble_load<F>(mesh: &SurfaceMesh, f: F, quad: &QuadratureRule) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    scatter(mesh, |e, g| {
        let mut local = [0.0; 3];
        for (x, l, w) in quad.map(&mesh.vertices(e)) {
            let v = f(&x)? * w * g.area;
            for a in 0..3 {
                local[a] += v * l[a];
            }
        }
        Ok(local)
    })
}

/// Load vector of a function defined on the smooth surface: each quadrature
/// point of Γ_h is lifted to Γ(t) by the closest-point map before evaluating.
pub fn assemble_lifted_load<F>(
    mesh: &SurfaceMesh,
    surface: &LevelSetSurface,
    t: f64,
    f: F,
    quad: &QuadratureRule,
) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    assemble_load(mesh, |x| f(&surface.closest_point(x, t)?), quad)
}

/// `G_ij = ∫ φ_i φ_j ∇_{Γ_h}·V_h` for the nodal velocity interpolant `V_h`.
/// The divergence is constant per element, so the integral is exact.
pub fn assemble_div_velocity_mass_nodal(
    mesh: &SurfaceMesh,
    velocities: &[Vector3<f64>],
) -> Result<CsrMatrix> {
    if velocities.len() != mesh.n_nodes() {
        return Err(Error::LengthMismatch(velocities.len(), mesh.n_nodes()));
    }
    assemble_elementwise(mesh, |e, g| {
        let tri = mesh.tris[e];
        let div: f64 = (0..3).map(|a| velocities[tri[a]].dot(&g.grads[a])).sum();
        let mut m = local_mass(g.area);
        m.iter_mut().flatten().for_each(|v| *v *= div);
        Ok(m)
    })
}

/// [`assemble_div_velocity_mass_nodal`] with the surface's material velocity
/// sampled at the nodes.
pub fn assemble_div_velocity_mass(
    mesh: &SurfaceMesh,
    surface: &LevelSetSurface,
    t: f64,
) -> Result<CsrMatrix> {
    let v: Vec<_> = mesh
        .nodes
        .iter()
        .map(|x| surface.material_velocity(x, t))
        .collect();
    assemble_div_velocity_mass_nodal(mesh, &v)
}
