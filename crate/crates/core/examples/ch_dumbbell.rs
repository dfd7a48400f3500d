//! Phase separation from random data on the deforming dumbbell, tracking
//! mesh quality.
//!
//! ```text
//! cargo run --release --example ch_dumbbell -- [level] [T] [output_dir]
//! ```

use esfem::runner::{initial_state, run_experiment, Experiment, ExperimentConfig};
use esfem::timestepper::{run, SimulationState};

fn main() -> esfem::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::preset(Experiment::ChDumbbell);
    if let Some(level) = args.next() {
        cfg.levels = vec![level.parse().expect("level must be an integer")];
    }
    cfg.final_time = args.next().map_or(0.1, |t| t.parse().expect("T must be a number"));

    if let Some(dir) = args.next() {
        cfg.output_dir = dir.into();
        let report = run_experiment(&cfg)?;
        println!("wrote {} files to {}", report.files.len(), cfg.output_dir.display());
        return Ok(());
    }

    let init = initial_state(&cfg, cfg.levels[0])?;
    let q0 = init.diagnostics.quasi_uniformity;
    println!("{} nodes, seed {}", init.mesh.n_nodes(), cfg.seed);
    println!("{:>8} {:>7} {:>12} {:>9} {:>8} {:>9}", "step", "t", "energy", "min ang", "q / q0", "max |u|");
    let mut print = |s: &SimulationState| -> esfem::Result<()> {
        if s.step.is_multiple_of(200) {
            let d = &s.diagnostics;
            let umax = s.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            println!(
                "{:>8} {:>7.4} {:>12.6} {:>9.2} {:>8.3} {:>9.4}",
                s.step, s.t, d.energy, d.min_angle, d.quasi_uniformity / q0, umax
            );
        }
        Ok(())
    };
    run(init, &cfg.experiment.surface(), &cfg.scheme(), &mut [&mut print])?;
    Ok(())
}
