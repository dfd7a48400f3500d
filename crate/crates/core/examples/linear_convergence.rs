//! Convergence study for the linear fourth-order problem on the oscillating
//! ellipsoid.
//!
//! ```text
//! cargo run --release --example linear_convergence -- [max_level]
//! ```

use esfem::runner::{linear_convergence, Experiment, ExperimentConfig};

fn main() -> esfem::Result<()> {
    let max_level: u32 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("max_level must be an integer"))
        .unwrap_or(4);
    let mut cfg = ExperimentConfig::preset(Experiment::Linear4th);
    cfg.levels = (1..=max_level).collect();

    let records = linear_convergence(&cfg)?;
    println!(
        "{:>5} {:>12} {:>12} {:>7} {:>12} {:>7} {:>12} {:>7}",
        "level", "h", "L2(u)", "eoc", "L2(w)", "eoc", "H1(u)", "eoc"
    );
    let eoc = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
    for r in &records {
        println!(
            "{:>5} {:>12.6e} {:>12.6e} {:>7} {:>12.6e} {:>7} {:>12.6e} {:>7}",
            r.level,
            r.h,
            r.err_u_l2,
            eoc(r.eoc_u_l2),
            r.err_w_l2,
            eoc(r.eoc_w_l2),
            r.err_u_h1,
            eoc(r.eoc_u_h1),
        );
    }
    Ok(())
}
