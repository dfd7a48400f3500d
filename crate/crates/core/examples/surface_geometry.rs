//! Level-set geometry of the three preset surfaces: closest points,
//! normals, curvature, velocities and the manufactured forcing.
//!
//! ```text
//! cargo run --release --example surface_geometry -- [t]
//! ```

use esfem::geometry::{forcing_linear4th, LevelSetSurface, Point};

fn main() -> esfem::Result<()> {
    let t: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("t must be a number"))
        .unwrap_or(0.05);
    let probe = Point::new(0.7, 0.5, 0.9);
    for surface in [
        LevelSetSurface::sphere(1.0),
        LevelSetSurface::dziuk_ellipsoid(),
        LevelSetSurface::dumbbell(),
    ] {
        let p = surface.closest_point(&probe, t)?;
        let g = surface.geometry_pack(&p, t)?;
        let v = surface.material_velocity(&p, t);
        println!("{} at t = {t}", surface.kind.id());
        println!("  closest point   {:.6} {:.6} {:.6}", p[0], p[1], p[2]);
        println!("  |Phi|           {:.2e}", surface.phi_at(&p, t).abs());
        println!("  normal          {:.6} {:.6} {:.6}", g.normal[0], g.normal[1], g.normal[2]);
        println!("  mean curvature  {:.6}", g.mean_curvature);
        println!("  velocity        {:.6} {:.6} {:.6}", v[0], v[1], v[2]);
        println!("  div_G v         {:.6}", surface.surface_divergence_v(&p, t)?);
        let later = surface.flow_map(&p, t, t + 0.01);
        println!("  |Phi| after flow map to t + 0.01: {:.2e}", surface.phi_at(&later, t + 0.01).abs());
    }

    let ellipsoid = LevelSetSurface::dziuk_ellipsoid();
    let p = ellipsoid.closest_point(&probe, t)?;
    println!("forcing of the linear test problem at that point: {:.10}", forcing_linear4th(&ellipsoid, &p, t, 0.1)?);
    Ok(())
}
