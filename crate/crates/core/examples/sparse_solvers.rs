//! Assembled surface matrices and the iterative solvers: a screened Poisson
//! problem `(M + S) x = M f` on the sphere, solved with CG and GMRES.
//!
//! ```text
//! cargo run --release --example sparse_solvers -- [level] [matrix.mtx]
//! ```

use esfem::analysis::interpolate_nodal;
use esfem::assembly::{assemble_mass, assemble_stiffness};
use esfem::geometry::{LevelSetSurface, Monomial};
use esfem::linalg::{cg_solve, gmres_solve, norm, CsrMatrix, SolverOptions};
use esfem::mesh::initial_mesh;

fn main() -> esfem::Result<()> {
    let mut args = std::env::args().skip(1);
    let level: u32 = args
        .next()
        .map(|s| s.parse().expect("level must be an integer"))
        .unwrap_or(4);
    let mesh = initial_mesh(&LevelSetSurface::sphere(1.0), level)?;
    let mass = assemble_mass(&mesh, false)?;
    let stiffness = assemble_stiffness(&mesh)?;
    println!(
        "{} nodes, M: {} nonzeros, asymmetry {:.1e}; S: {} nonzeros",
        mesh.n_nodes(),
        mass.nnz(),
        mass.asymmetry(),
        stiffness.nnz()
    );

    let mut triplets = Vec::new();
    for m in [&mass, &stiffness] {
        for r in 0..m.n_rows() {
            triplets.extend(m.row(r).map(|(c, v)| (r, c, v)));
        }
    }
    let a = CsrMatrix::from_triplets(mesh.n_nodes(), mesh.n_nodes(), &triplets)?;

    // x₃ is an eigenfunction of the Laplace–Beltrami operator with eigenvalue 2
    let f = interpolate_nodal(&mesh, &Monomial::new(3.0, [0, 0, 1]), 0.0);
    let b = mass.spmv(&f)?;
    let opts = SolverOptions::default();
    let cg = cg_solve(&a, &b, None, &opts)?;
    let gm = gmres_solve(&a, &b, None, &opts)?;
    let diff: Vec<f64> = cg.x.iter().zip(&gm.x).map(|(x, y)| x - y).collect();
    let exact = interpolate_nodal(&mesh, &Monomial::new(1.0, [0, 0, 1]), 0.0);
    let err: Vec<f64> = cg.x.iter().zip(exact.iter()).map(|(x, y)| x - y).collect();
    println!("CG:    {} iterations, residual {:.2e}", cg.iterations, cg.relative_residual);
    println!("GMRES: {} iterations, residual {:.2e}", gm.iterations, gm.relative_residual);
    println!("|x_cg - x_gmres| = {:.2e}, max nodal error against x3 = {:.2e}", norm(&diff), err.iter().fold(0.0f64, |m, e| m.max(e.abs())));

    if let Some(path) = args.next() {
        a.write_matrix_market(std::fs::File::create(&path).expect("cannot create output file"))
            .expect("write failed");
        println!("wrote {path}");
    }
    Ok(())
}
