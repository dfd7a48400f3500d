//! Icosphere refinement and the initial meshes of the preset surfaces.
//!
//! ```text
//! cargo run --release --example icosphere_mesh -- [max_level] [out.off]
//! ```

use std::f64::consts::PI;

use esfem::geometry::LevelSetSurface;
use esfem::mesh::{build_icosphere, initial_mesh};

fn main() -> esfem::Result<()> {
    let mut args = std::env::args().skip(1);
    let max_level: u32 = args
        .next()
        .map(|s| s.parse().expect("max_level must be an integer"))
        .unwrap_or(5);
    let out = args.next();

    println!("{:>5} {:>7} {:>7} {:>10} {:>12} {:>6} {:>8}", "level", "nodes", "tris", "h", "|4pi - A|", "eoc", "min ang");
    let mut prev: Option<(f64, f64)> = None;
    for level in 0..=max_level {
        let mesh = build_icosphere(level)?;
        let m = mesh.metrics();
        let err = (4.0 * PI - m.total_area).abs();
        let eoc = prev.map_or("-".into(), |(h0, e0)| format!("{:.3}", (err / e0).ln() / (m.h / h0).ln()));
        println!(
            "{level:>5} {:>7} {:>7} {:>10.6} {:>12.4e} {eoc:>6} {:>8.2}",
            mesh.n_nodes(),
            mesh.n_tris(),
            m.h,
            err,
            m.min_angle
        );
        prev = Some((m.h, err));
        if level == max_level {
            if let Some(path) = &out {
                mesh.write_off(std::fs::File::create(path).expect("cannot create output file"))
                    .expect("write failed");
                println!("wrote {path}");
            }
        }
    }

    for surface in [LevelSetSurface::dziuk_ellipsoid(), LevelSetSurface::dumbbell()] {
        let mesh = initial_mesh(&surface, 3)?;
        let m = mesh.metrics();
        println!(
            "{} level 3: {} nodes, h {:.4}, min angle {:.2} deg, quasi-uniformity {:.3}, Euler characteristic {}",
            surface.kind.id(),
            mesh.n_nodes(),
            m.h,
            m.min_angle,
            m.quasi_uniformity,
            mesh.check_topology()?
        );
    }
    Ok(())
}
