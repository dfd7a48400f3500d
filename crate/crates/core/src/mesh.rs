//! Triangulated surfaces whose nodes move with the material velocity.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{AmbientField, LevelSetSurface, Point, SurfaceKind};

pub const MAX_ICOSPHERE_LEVEL: u32 = 8;

/// A closed triangulated surface with linear elements.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    pub nodes: Vec<Point>,
    /// Node positions at t = 0.
    pub nodes_ref: Vec<Point>,
    /// Counterclockwise with respect to the outward normal.
    pub tris: Vec<[usize; 3]>,
    pub time: f64,
}

/// Area, per-vertex P1 basis gradients and unit normal of one flat triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub area: f64,
    pub grads: [Vector3<f64>; 3],
    pub normal: Vector3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshMetrics {
    /// Maximum element diameter.
    pub h: f64,
    /// Smallest interior angle, in degrees.
    pub min_angle: f64,
    /// `h / min_E (2√3 r_E)` with `r_E` the inradius; 1 for a uniform
    /// equilateral mesh.
    pub quasi_uniformity: f64,
    pub total_area: f64,
}

/// How nodes are advanced in time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeMotion {
    /// Closed-form trajectories from the reference positions.
    ExactMap,
    /// Classical Runge–Kutta on `Ẋ = v(X, t)` with the given number of substeps.
    Rk4 { substeps: usize },
}

impl SurfaceMesh {
    pub fn new(nodes: Vec<Point>, tris: Vec<[usize; 3]>) -> Self {
        SurfaceMesh {
            nodes_ref: nodes.clone(),
            nodes,
            tris,
            time: 0.0,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_tris(&self) -> usize {
        self.tris.len()
    }

    pub fn vertices(&self, tri: usize) -> [Point; 3] {
        let [a, b, c] = self.tris[tri];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn element_geometry(&self, tri: usize) -> Result<ElementGeometry> {
        let [x0, x1, x2] = self.vertices(tri);
        let cross = (x1 - x0).cross(&(x2 - x0));
        let twice_area = cross.norm();
        let diam = (x1 - x0)
            .norm()
            .max((x2 - x1).norm())
            .max((x0 - x2).norm());
        if !(twice_area > 2e-14 * diam * diam) {
            return Err(Error::DegenerateTriangle(tri));
        }
        let normal = cross / twice_area;
        let grads = [
            normal.cross(&(x2 - x1)) / twice_area,
            normal.cross(&(x0 - x2)) / twice_area,
            normal.cross(&(x1 - x0)) / twice_area,
        ];
        Ok(ElementGeometry {
            area: 0.5 * twice_area,
            grads,
            normal,
        })
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_tris())
            .map(|e| {
                let [x0, x1, x2] = self.vertices(e);
                0.5 * (x1 - x0).cross(&(x2 - x0)).norm()
            })
            .sum()
    }

    pub fn metrics(&self) -> MeshMetrics {
        let mut h = 0.0f64;
        let mut min_angle = 180.0f64;
        let mut min_inradius = f64::INFINITY;
        let mut total_area = 0.0;
        for e in 0..self.n_tris() {
            let x = self.vertices(e);
            let edges = [x[1] - x[0], x[2] - x[1], x[0] - x[2]];
            let lens = [edges[0].norm(), edges[1].norm(), edges[2].norm()];
            let area = 0.5 * edges[0].cross(&edges[2]).norm();
            total_area += area;
            h = h.max(lens[0]).max(lens[1]).max(lens[2]);
            min_inradius = min_inradius.min(2.0 * area / (lens[0] + lens[1] + lens[2]));
            for k in 0..3 {
                // angle at vertex k between the two edges leaving it
                let a = -edges[(k + 2) % 3];
                let b = edges[k];
                let cos = (a.dot(&b) / (lens[(k + 2) % 3] * lens[k])).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos().to_degrees());
            }
        }
        MeshMetrics {
            h,
            min_angle,
            quasi_uniformity: h / (2.0 * 3f64.sqrt() * min_inradius),
            total_area,
        }
    }

    /// Checks index ranges, that every edge is shared by exactly two
    /// consistently oriented triangles, and returns the Euler characteristic.
    pub fn check_topology(&self) -> Result<i64> {
        let n = self.n_nodes();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (e, tri) in self.tris.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if a >= n || b >= n {
                    return Err(Error::Format(format!("triangle {e} references node >= {n}")));
                }
                if a == b {
                    return Err(Error::DegenerateTriangle(e));
                }
                if directed.insert((a, b), e).is_some() {
                    return Err(Error::Format(format!(
                        "directed edge ({a}, {b}) used twice (non-manifold or misoriented)"
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::Format(format!("edge ({a}, {b}) lies on a boundary")));
            }
        }
        let edges = directed.len() / 2;
        Ok(n as i64 - edges as i64 + self.n_tris() as i64)
    }

    /// Writes the mesh in OFF format.
    pub fn write_off<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut s = String::new();
        writeln!(s, "OFF").unwrap();
        writeln!(s, "{} {} 0", self.n_nodes(), self.n_tris()).unwrap();
        for p in &self.nodes {
            writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]).unwrap();
        }
        for t in &self.tris {
            writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out.write_all(s.as_bytes())
    }

    /// Reads a triangle mesh in OFF format.
    pub fn read_off<R: Read>(input: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in BufReader::new(input).lines() {
            let line = line.map_err(|e| Error::Format(e.to_string()))?;
            let line = line.split('#').next().unwrap_or("");
            tokens.extend(line.split_whitespace().map(str::to_owned));
        }
        let mut it = tokens.into_iter();
        if it.next().as_deref() != Some("OFF") {
            return Err(Error::Format("missing OFF header".into()));
        }
        let mut next_num = |what: &str| -> Result<String> {
            it.next()
                .ok_or_else(|| Error::Format(format!("unexpected end of file reading {what}")))
        };
        let parse_usize = |s: String| -> Result<usize> {
            s.parse().map_err(|_| Error::Format(format!("bad integer `{s}`")))
        };
        let nv = parse_usize(next_num("vertex count")?)?;
        let nf = parse_usize(next_num("face count")?)?;
        let _ne = next_num("edge count")?;
        let mut nodes = Vec::with_capacity(nv);
        for _ in 0..nv {
            let mut p = Point::zeros();
            for k in 0..3 {
                let s = next_num("vertex")?;
                p[k] = s.parse().map_err(|_| Error::Format(format!("bad coordinate `{s}`")))?;
            }
            nodes.push(p);
        }
        let mut tris = Vec::with_capacity(nf);
        for _ in 0..nf {
            if parse_usize(next_num("face")?)? != 3 {
                return Err(Error::Format("only triangular faces are supported".into()));
            }
            let mut t = [0; 3];
            for v in &mut t {
                *v = parse_usize(next_num("face index")?)?;
                if *v >= nv {
                    return Err(Error::Format(format!("face index {v} >= {nv}")));
                }
            }
            tris.push(t);
        }
        Ok(SurfaceMesh::new(nodes, tris))
    }
}

/// Icosahedron with vertices at the poles, refined `level` times by
/// midpoint subdivision with the new nodes pushed onto the unit sphere.
pub fn build_icosphere(level: u32) -> Result<SurfaceMesh> {
    if level > MAX_ICOSPHERE_LEVEL {
        return Err(Error::LevelOutOfRange(level));
    }
    let (mut nodes, mut tris) = icosahedron();
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut refined = Vec::with_capacity(4 * tris.len());
        for &[a, b, c] in &tris {
            let mut mid = |i: usize, j: usize| -> usize {
                *midpoints.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    nodes.push((nodes[i] + nodes[j]).normalize());
                    nodes.len() - 1
                })
            };
            let ab = mid(a, b);
            let bc = mid(b, c);
            let ca = mid(c, a);
            refined.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = refined;
    }
    Ok(SurfaceMesh::new(nodes, tris))
}

fn icosahedron() -> (Vec<Point>, Vec<[usize; 3]>) {
    use std::f64::consts::PI;
    let z = 1.0 / 5f64.sqrt();
    let r = 2.0 / 5f64.sqrt();
    let mut nodes = vec![Point::new(0.0, 0.0, 1.0)];
    for k in 0..5 {
        let th = 2.0 * PI * k as f64 / 5.0;
        nodes.push(Point::new(r * th.cos(), r * th.sin(), z));
    }
    for k in 0..5 {
        let th = 2.0 * PI * k as f64 / 5.0 + PI / 5.0;
        nodes.push(Point::new(r * th.cos(), r * th.sin(), -z));
    }
    nodes.push(Point::new(0.0, 0.0, -1.0));
    let up = |k: usize| 1 + k % 5;
    let lo = |k: usize| 6 + k % 5;
    let mut tris = Vec::with_capacity(20);
    for k in 0..5 {
        tris.push([0, up(k), up(k + 1)]);
        tris.push([up(k), lo(k), up(k + 1)]);
        tris.push([up(k + 1), lo(k), lo(k + 1)]);
        tris.push([11, lo(k + 1), lo(k)]);
    }
    for t in &mut tris {
        let [a, b, c] = *t;
        let n = (nodes[b] - nodes[a]).cross(&(nodes[c] - nodes[a]));
        if n.dot(&(nodes[a] + nodes[b] + nodes[c])) < 0.0 {
            t.swap(1, 2);
        }
    }
    (nodes, tris)
}

/// Moves every node to its closest point on Γ(t). Connectivity is unchanged;
/// at `t = 0` the projected positions also become the reference positions.
pub fn project_to_surface(
    mesh: &SurfaceMesh,
    surface: &LevelSetSurface,
    t: f64,
) -> Result<SurfaceMesh> {
    let nodes = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(j, x)| {
            surface.closest_point(x, t).map_err(|e| Error::AtNode {
                node: j,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurfaceMesh {
        nodes_ref: if t == 0.0 {
            nodes.clone()
        } else {
            mesh.nodes_ref.clone()
        },
        nodes,
        tris: mesh.tris.clone(),
        time: t,
    })
}

/// Initial triangulation of Γ(0) for a preset.
///
/// Sphere and ellipsoid use the projected icosphere. The dumbbell's neck is
/// an order of magnitude thinner than its lobes, which no projection of a
/// sphere mesh resolves with bounded element shape, so it is meshed ring by
/// ring as a surface of revolution at the icosphere's mesh size.
pub fn initial_mesh(surface: &LevelSetSurface, level: u32) -> Result<SurfaceMesh> {
    let sphere = build_icosphere(level)?;
    match surface.kind {
        SurfaceKind::Dumbbell => {
            let h = sphere.metrics().h;
            let rings = revolution_mesh(surface, h);
            project_to_surface(&rings, surface, 0.0)
        }
        _ => project_to_surface(&sphere, surface, 0.0),
    }
}

/// Meshes an x₃-axisymmetric star-shaped surface Γ(0) with rings of nodes
/// equally spaced in profile arclength, each ring holding as many nodes as
/// its circumference allows at spacing `h`.
fn revolution_mesh(surface: &LevelSetSurface, h: f64) -> SurfaceMesh {
    use std::f64::consts::PI;

    // Profile (ρ, z) sampled by polar angle from the top tip; the surface is
    // star-shaped about the origin so each ray crosses it once.
    const SAMPLES: usize = 20_000;
    let radial = |theta: f64| -> (f64, f64) {
        let dir = (theta.sin(), theta.cos());
        let phi = |r: f64| surface.phi_at(&Point::new(r * dir.0, 0.0, r * dir.1), 0.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        while phi(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        (r * dir.0, r * dir.1)
    };
    let profile: Vec<(f64, f64)> = (0..=SAMPLES)
        .map(|i| radial(PI * i as f64 / SAMPLES as f64))
        .collect();
    let mut arclen = vec![0.0; profile.len()];
    for i in 1..profile.len() {
        let (d0, d1) = (profile[i].0 - profile[i - 1].0, profile[i].1 - profile[i - 1].1);
        arclen[i] = arclen[i - 1] + d0.hypot(d1);
    }
    let total = arclen[SAMPLES];
    let at_arclength = |s: f64| -> (f64, f64) {
        let i = arclen.partition_point(|&a| a < s).clamp(1, SAMPLES);
        let w = (s - arclen[i - 1]) / (arclen[i] - arclen[i - 1]);
        let (p, q) = (profile[i - 1], profile[i]);
        (p.0 + w * (q.0 - p.0), p.1 + w * (q.1 - p.1))
    };

    let n_rings = ((total / h).round() as usize).max(2);
    let ds = total / n_rings as f64;
    let mut nodes = vec![Point::new(0.0, 0.0, profile[0].1)];
    let mut rings: Vec<Vec<usize>> = Vec::new();
    let mut offsets = Vec::new();
    for k in 1..n_rings {
        let (rho, z) = at_arclength(k as f64 * ds);
        let m = ((2.0 * PI * rho / h).round() as usize).max(3);
        let offset = 0.5 * (k % 2) as f64;
        let ring = (0..m)
            .map(|i| {
                let phi = 2.0 * PI * (i as f64 + offset) / m as f64;
                nodes.push(Point::new(rho * phi.cos(), rho * phi.sin(), z));
                nodes.len() - 1
            })
            .collect();
        rings.push(ring);
        offsets.push(offset);
    }
    nodes.push(Point::new(0.0, 0.0, profile[SAMPLES].1));
    let bottom = nodes.len() - 1;

    let mut tris = Vec::new();
    let first = &rings[0];
    for i in 0..first.len() {
        tris.push([0, first[i], first[(i + 1) % first.len()]]);
    }
    for k in 0..rings.len() - 1 {
        let (a, b) = (&rings[k], &rings[k + 1]);
        let angle = |ring: &Vec<usize>, off: f64, i: usize| (i as f64 + off) / ring.len() as f64;
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let advance_a = j == b.len()
                || (i < a.len() && angle(a, offsets[k], i + 1) <= angle(b, offsets[k + 1], j + 1));
            if advance_a {
                tris.push([a[i % a.len()], a[(i + 1) % a.len()], b[j % b.len()]]);
                i += 1;
            } else {
                tris.push([a[i % a.len()], b[(j + 1) % b.len()], b[j % b.len()]]);
                j += 1;
            }
        }
    }
    let last = rings.last().unwrap();
    for i in 0..last.len() {
        tris.push([bottom, last[(i + 1) % last.len()], last[i]]);
    }

    // orient along ∇Φ, which points outward
    for t in &mut tris {
        let [p0, p1, p2] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
        let n = (p1 - p0).cross(&(p2 - p0));
        let c = (p0 + p1 + p2) / 3.0;
        let grad = Vector3::from(surface.jet(&c, 0.0).g);
        if n.dot(&grad) < 0.0 {
            t.swap(1, 2);
        }
    }
    SurfaceMesh::new(nodes, tris)
}

/// Advances the nodes of a mesh at time `t0` to time `t1`.
pub fn evolve_nodes(
    mesh: &SurfaceMesh,
    surface: &LevelSetSurface,
    t0: f64,
    t1: f64,
    mode: NodeMotion,
) -> Result<SurfaceMesh> {
    if t1 < t0 {
        return Err(Error::validation("t1", format!("{t1} precedes t0 = {t0}")));
    }
    let nodes = match mode {
        NodeMotion::ExactMap => mesh
            .nodes_ref
            .iter()
            .map(|x| surface.flow_map(x, 0.0, t1))
            .collect(),
        NodeMotion::Rk4 { substeps } => {
            let substeps = substeps.max(1);
            let dt = (t1 - t0) / substeps as f64;
            let v = |x: &Point, t: f64| surface.material_velocity(x, t);
            mesh.nodes
                .iter()
                .map(|x0| {
                    let mut x = *x0;
                    for k in 0..substeps {
                        let t = t0 + k as f64 * dt;
                        let k1 = v(&x, t);
                        let k2 = v(&(x + k1 * (0.5 * dt)), t + 0.5 * dt);
                        let k3 = v(&(x + k2 * (0.5 * dt)), t + 0.5 * dt);
                        let k4 = v(&(x + k3 * dt), t + dt);
                        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
                    }
                    x
                })
                .collect()
        }
    };
    Ok(SurfaceMesh {
        nodes,
        nodes_ref: mesh.nodes_ref.clone(),
        tris: mesh.tris.clone(),
        time: t1,
    })
}
