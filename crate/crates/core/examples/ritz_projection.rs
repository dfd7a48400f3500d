//! Ritz projection against nodal interpolation of `x₁x₂` on the ellipsoid
//! at t = 0.
//!
//! ```text
//! cargo run --release --example ritz_projection -- [max_level]
//! ```

use esfem::analysis::{error_norms, interpolate_nodal, ritz_projection};
use esfem::assembly::QuadratureRule;
use esfem::geometry::{LevelSetSurface, LinearTestSolution};
use esfem::mesh::initial_mesh;

fn main() -> esfem::Result<()> {
    let max_level: u32 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("max_level must be an integer"))
        .unwrap_or(4);
    let surface = LevelSetSurface::dziuk_ellipsoid();
    let quad = QuadratureRule::default();
    println!("{:>5} {:>10} {:>12} {:>12} {:>12} {:>12}", "level", "h", "L2 interp", "L2 Ritz", "H1 interp", "H1 Ritz");
    for level in 1..=max_level {
        let mesh = initial_mesh(&surface, level)?;
        let interp = interpolate_nodal(&mesh, &LinearTestSolution, 0.0);
        let ritz = ritz_projection(&mesh, &surface, 0.0, &LinearTestSolution, &quad)?;
        let ei = error_norms(&mesh, &interp, &LinearTestSolution, &surface, 0.0, &quad)?;
        let er = error_norms(&mesh, &ritz, &LinearTestSolution, &surface, 0.0, &quad)?;
        println!(
            "{level:>5} {:>10.5} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            mesh.metrics().h,
            ei.l2,
            er.l2,
            ei.h1,
            er.h1
        );
    }
    Ok(())
}
