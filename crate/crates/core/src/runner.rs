//! Experiment presets, JSON configuration and file output.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    error_norms, fill_eoc, interpolate_nodal, random_nodal, ritz_projection, ConvergenceRecord,
};
use crate::assembly::NodalField;
use crate::error::{Error, Result};
use crate::geometry::{
    chemical_potential_linear4th, forcing_linear4th, CosineProduct, LevelSetSurface,
    LinearTestSolution,
};
use crate::mesh::{initial_mesh, SurfaceMesh, MAX_ICOSPHERE_LEVEL};
use crate::timestepper::{run, Diagnostics, RunOutput, SchemeConfig, SimulationState, TimeStep};

/// Amplitude of the random initial condition on the dumbbell.
pub const RANDOM_AMPLITUDE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Linear fourth-order problem with a known solution on the oscillating
    /// ellipsoid; produces a convergence table.
    Linear4th,
    /// Cahn–Hilliard on the oscillating ellipsoid from a cosine initial state.
    ChEllipsoid,
    /// Cahn–Hilliard on the breathing dumbbell from random data.
    ChDumbbell,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Linear4th, Experiment::ChEllipsoid, Experiment::ChDumbbell];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Linear4th => "linear4th",
            Experiment::ChEllipsoid => "ch-ellipsoid",
            Experiment::ChDumbbell => "ch-dumbbell",
        }
    }

    pub fn surface(self) -> LevelSetSurface {
        match self {
            Experiment::Linear4th | Experiment::ChEllipsoid => LevelSetSurface::dziuk_ellipsoid(),
            Experiment::ChDumbbell => LevelSetSurface::dumbbell(),
        }
    }

    fn default_final_time(self) -> f64 {
        match self {
            Experiment::Linear4th => 0.1,
            Experiment::ChEllipsoid => 0.8,
            Experiment::ChDumbbell => 0.6,
        }
    }

    fn default_levels(self) -> Vec<u32> {
        match self {
            Experiment::Linear4th => vec![1, 2, 3, 4],
            Experiment::ChEllipsoid => vec![2],
            Experiment::ChDumbbell => vec![3],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.id() == s)
            .ok_or_else(|| Error::validation("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    Interpolate,
    Ritz,
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub levels: Vec<u32>,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_rule: Option<f64>,
    #[serde(rename = "T")]
    pub final_time: f64,
    pub seed: u64,
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    pub lumped: bool,
    pub initial: InitialCondition,
}

/// Configuration as written in JSON; every key is optional until validated.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<String>,
    pub levels: Option<Vec<u32>>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub tau_rule: Option<f64>,
    #[serde(rename = "T")]
    pub final_time: Option<f64>,
    pub seed: Option<u64>,
    pub snapshot_every: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub lumped: Option<bool>,
    pub initial: Option<InitialCondition>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn validate(self) -> Result<ExperimentConfig> {
        let experiment: Experiment = self
            .experiment
            .as_deref()
            .ok_or_else(|| Error::validation("experiment", "missing"))?
            .parse()?;
        let levels = self.levels.unwrap_or_else(|| experiment.default_levels());
        if levels.is_empty() {
            return Err(Error::validation("levels", "must not be empty"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("levels", "must be strictly increasing"));
        }
        if let Some(&l) = levels.iter().find(|&&l| l > MAX_ICOSPHERE_LEVEL) {
            return Err(Error::validation("levels", format!("level {l} exceeds {MAX_ICOSPHERE_LEVEL}")));
        }
        let epsilon = self.epsilon.unwrap_or(0.1);
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::validation("epsilon", "must be positive"));
        }
        let final_time = self.final_time.unwrap_or_else(|| experiment.default_final_time());
        if !(final_time > 0.0 && final_time.is_finite()) {
            return Err(Error::validation("T", "must be positive"));
        }
        let (tau, tau_rule) = match (self.tau, self.tau_rule) {
            (Some(_), Some(_)) => {
                return Err(Error::validation("tau", "give either tau or tau_rule, not both"))
            }
            (Some(t), None) => (Some(t), None),
            (None, Some(c)) => (None, Some(c)),
            (None, None) => match experiment {
                Experiment::Linear4th => (None, Some(0.5)),
                _ => (Some(1e-4), None),
            },
        };
        if let Some(t) = tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::validation("tau", "must be positive"));
            }
        }
        if let Some(c) = tau_rule {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::validation("tau_rule", "must be positive"));
            }
        }
        let snapshot_every = self.snapshot_every.unwrap_or(match experiment {
            // one snapshot per 0.1 time units
            Experiment::ChDumbbell => tau.map_or(100, |t| ((0.1 / t).round() as usize).max(1)),
            _ => 100,
        });
        if snapshot_every == 0 {
            return Err(Error::validation("snapshot_every", "must be at least 1"));
        }
        Ok(ExperimentConfig {
            experiment,
            levels,
            epsilon,
            tau,
            tau_rule,
            final_time,
            seed: self.seed.unwrap_or(42),
            snapshot_every,
            output_dir: self.output_dir.unwrap_or_else(|| PathBuf::from("output")),
            lumped: self.lumped.unwrap_or(false),
            initial: self.initial.unwrap_or(InitialCondition::Interpolate),
        })
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    RawConfig::parse(text)?.validate()
}

impl ExperimentConfig {
    /// Preset with all defaults.
    pub fn preset(experiment: Experiment) -> Self {
        RawConfig {
            experiment: Some(experiment.id().to_string()),
            ..RawConfig::default()
        }
        .validate()
        .expect("presets are valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn time_step(&self) -> TimeStep {
        match (self.tau, self.tau_rule) {
            (Some(t), _) => TimeStep::Fixed(t),
            (None, Some(c)) => TimeStep::MeshScaled { coeff: c },
            (None, None) => TimeStep::MeshScaled { coeff: 0.5 },
        }
    }

    pub fn scheme(&self) -> SchemeConfig {
        let mut cfg = match self.experiment {
            Experiment::Linear4th => {
                let surface = self.experiment.surface();
                let eps = self.epsilon;
                SchemeConfig::linear(
                    eps,
                    self.time_step(),
                    self.final_time,
                    Arc::new(move |p, t| forcing_linear4th(&surface, p, t, eps)),
                )
            }
            _ => {
                let mut c = SchemeConfig::cahn_hilliard(self.epsilon, 1.0, self.final_time);
                c.time_step = self.time_step();
                c
            }
        };
        cfg.lumped = self.lumped;
        cfg
    }
}

/// Initial state for one level of an experiment.
pub fn initial_state(cfg: &ExperimentConfig, level: u32) -> Result<SimulationState> {
    let surface = cfg.experiment.surface();
    let mesh = initial_mesh(&surface, level)?;
    let scheme = cfg.scheme();
    let n = mesh.n_nodes();
    let (u, w) = match cfg.experiment {
        Experiment::Linear4th => {
            let u = match cfg.initial {
                InitialCondition::Interpolate => interpolate_nodal(&mesh, &LinearTestSolution, 0.0),
                InitialCondition::Ritz => {
                    ritz_projection(&mesh, &surface, 0.0, &LinearTestSolution, &scheme.quad)?
                }
            };
            let w = interpolate_nodal(&mesh, &chemical_potential_linear4th(&surface, cfg.epsilon), 0.0);
            (u, w)
        }
        Experiment::ChEllipsoid => {
            let u = match cfg.initial {
                InitialCondition::Interpolate => interpolate_nodal(&mesh, &CosineProduct, 0.0),
                InitialCondition::Ritz => ritz_projection(&mesh, &surface, 0.0, &CosineProduct, &scheme.quad)?,
            };
            (u, NodalField::zeros(n))
        }
        Experiment::ChDumbbell => (random_nodal(n, cfg.seed, RANDOM_AMPLITUDE), NodalField::zeros(n)),
    };
    SimulationState::new(mesh, u, w, &scheme)
}

/// Runs the linear problem at one level and measures the errors at the
/// final time. The reported `h` is that of the initial mesh.
pub fn linear_level(cfg: &ExperimentConfig, level: u32) -> Result<(ConvergenceRecord, RunOutput)> {
    let surface = cfg.experiment.surface();
    let scheme = cfg.scheme();
    let init = initial_state(cfg, level)?;
    let h = init.diagnostics.h;
    let out = run(init, &surface, &scheme, &mut [])?;
    let st = &out.state;
    let eu = error_norms(&st.mesh, &st.u, &LinearTestSolution, &surface, st.t, &scheme.quad)?;
    let w_exact = chemical_potential_linear4th(&surface, cfg.epsilon);
    let ew = error_norms(&st.mesh, &st.w, &w_exact, &surface, st.t, &scheme.quad)?;
    Ok((ConvergenceRecord::new(level, h, eu, ew), out))
}

/// Convergence table over all configured levels.
pub fn linear_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRecord>> {
    let mut records = cfg
        .levels
        .iter()
        .map(|&l| linear_level(cfg, l).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    fill_eoc(&mut records)?;
    Ok(records)
}

/// What a run wrote and measured.
#[derive(Clone, Debug, Default)]
pub struct ExperimentReport {
    pub files: Vec<PathBuf>,
    pub convergence: Vec<ConvergenceRecord>,
    /// Per level: step size and the diagnostics history.
    pub histories: Vec<(u32, f64, Vec<(f64, Diagnostics)>)>,
    pub warnings: Vec<String>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    create_dir(&cfg.output_dir)?;
    let mut report = ExperimentReport::default();
    let config_path = cfg.output_dir.join("config.json");
    write_file(&config_path, cfg.to_json().as_bytes())?;
    report.files.push(config_path);

    if cfg.experiment == Experiment::Linear4th {
        report.convergence = linear_convergence(cfg)?;
        let path = cfg.output_dir.join("errors.csv");
        let mut out = Vec::new();
        write_errors_csv(&mut out, &report.convergence).map_err(|e| Error::io(&path, e))?;
        write_file(&path, &out)?;
        report.files.push(path);
        return Ok(report);
    }

    let surface = cfg.experiment.surface();
    let scheme = cfg.scheme();
    for &level in &cfg.levels {
        let dir = if cfg.levels.len() == 1 {
            cfg.output_dir.clone()
        } else {
            cfg.output_dir.join(format!("level{level}"))
        };
        create_dir(&dir)?;
        let init = initial_state(cfg, level)?;
        let mesh_path = dir.join("mesh.off");
        let mut off = Vec::new();
        init.mesh.write_off(&mut off).map_err(|e| Error::io(&mesh_path, e))?;
        write_file(&mesh_path, &off)?;
        report.files.push(mesh_path);

        let every = cfg.snapshot_every;
        let mut snapshots = Vec::new();
        let mut writer = |st: &SimulationState| -> Result<()> {
            if st.step.is_multiple_of(every) {
                let path = dir.join(format!("snapshot_{:06}.vtk", st.step));
                write_vtk(st, &path)?;
                snapshots.push(path);
            }
            Ok(())
        };
        let out = run(init, &surface, &scheme, &mut [&mut writer])?;
        report.files.extend(snapshots);

        let path = dir.join("energy.csv");
        let mut csv = Vec::new();
        write_energy_csv(&mut csv, &out.history).map_err(|e| Error::io(&path, e))?;
        write_file(&path, &csv)?;
        report.files.push(path);
        report
            .warnings
            .extend(out.warnings.into_iter().map(|w| format!("level {level}: {w}")));
        report.histories.push((level, out.tau, out.history));
    }
    Ok(report)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `%.15e` as in C: fifteen fraction digits and an exponent of at least two
/// digits with explicit sign.
pub fn fmt_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}").to_lowercase();
    }
    let s = format!("{x:.15e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sci).unwrap_or_default()
}

pub const ERRORS_HEADER: &str =
    "level,h,err_u_L2,eoc_u,err_w_L2,eoc_w,err_u_H1,eoc_u_H1,err_w_H1,eoc_w_H1";

pub fn write_errors_csv<W: Write>(mut out: W, records: &[ConvergenceRecord]) -> std::io::Result<()> {
    writeln!(out, "{ERRORS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.level,
            fmt_sci(r.h),
            fmt_sci(r.err_u_l2),
            fmt_opt(r.eoc_u_l2),
            fmt_sci(r.err_w_l2),
            fmt_opt(r.eoc_w_l2),
            fmt_sci(r.err_u_h1),
            fmt_opt(r.eoc_u_h1),
            fmt_sci(r.err_w_h1),
            fmt_opt(r.eoc_w_h1),
        )?;
    }
    Ok(())
}

pub fn write_energy_csv<W: Write>(mut out: W, history: &[(f64, Diagnostics)]) -> std::io::Result<()> {
    writeln!(out, "t,energy,mass,min_angle")?;
    for (t, d) in history {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_sci(*t),
            fmt_sci(d.energy),
            fmt_sci(d.mass),
            fmt_sci(d.min_angle)
        )?;
    }
    Ok(())
}

/// Legacy ASCII VTK unstructured grid with `u` and `w` as point data.
pub fn write_vtk(state: &SimulationState, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_vtk_to(&mut out, &state.mesh, &state.u, &state.w, state.t)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_vtk_to<W: Write>(
    mut out: W,
    mesh: &SurfaceMesh,
    u: &[f64],
    w: &[f64],
    t: f64,
) -> std::io::Result<()> {
    let n = mesh.n_nodes();
    let m = mesh.n_tris();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "surface fields at t = {t:e}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n} double")?;
    for x in &mesh.nodes {
        writeln!(out, "{:e} {:e} {:e}", x[0], x[1], x[2])?;
    }
    writeln!(out, "CELLS {m} {}", 4 * m)?;
    for t in &mesh.tris {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {n}")?;
    for (name, values) in [("u", u), ("w", w)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(out, "{v:e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn parse_with_defaults() {
        let c = parse_config(r#"{"experiment":"linear4th","levels":[1,2,3,4],"T":0.1}"#).unwrap();
        assert_eq!(c.experiment, Experiment::Linear4th);
        assert_eq!(c.levels, vec![1, 2, 3, 4]);
        assert_eq!((c.epsilon, c.seed, c.snapshot_every), (0.1, 42, 100));
        assert_eq!(c.time_step(), TimeStep::MeshScaled { coeff: 0.5 });
        assert!(!c.lumped);
    }

    #[test]
    fn parse_errors() {
        match parse_config(r#"{"experiment":"bogus"}"#) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "experiment"),
            other => panic!("{other:?}"),
        }
        match parse_config("{\n  \"experiment\": \"linear4th\",\n  \"levels\": [1,\n}") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config(r#"{"experiment":"linear4th","colour":1}"#),
            Err(Error::Parse { .. })
        ));
        for (text, field) in [
            (r#"{"experiment":"ch-ellipsoid","levels":[]}"#, "levels"),
            (r#"{"experiment":"ch-ellipsoid","levels":[3,2]}"#, "levels"),
            (r#"{"experiment":"ch-ellipsoid","T":-1}"#, "T"),
            (r#"{"experiment":"ch-ellipsoid","tau":0}"#, "tau"),
            (r#"{"experiment":"ch-ellipsoid","epsilon":0}"#, "epsilon"),
            (r#"{"levels":[1]}"#, "experiment"),
        ] {
            match parse_config(text) {
                Err(Error::Validation { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(parse_config(r#"{"experiment":"bogus"}"#).unwrap_err().is_config_error());
    }

    #[test]
    fn config_round_trip() {
        for e in Experiment::ALL {
            let c = ExperimentConfig::preset(e);
            assert_eq!(parse_config(&c.to_json()).unwrap(), c);
        }
        let c = parse_config(r#"{"experiment":"ch-dumbbell","seed":7,"lumped":true,"initial":"ritz"}"#).unwrap();
        assert_eq!(parse_config(&c.to_json()).unwrap(), c);
        assert_eq!(c.snapshot_every, 1000);
    }

    #[test]
    fn scientific_format() {
        assert_eq!(fmt_sci(0.0078125), "7.812500000000000e-03");
        assert_eq!(fmt_sci(1.0), "1.000000000000000e+00");
        assert_eq!(fmt_sci(-2.5e120), "-2.500000000000000e+120");
        assert_eq!(fmt_sci(0.0), "0.000000000000000e+00");
    }

    #[test]
    fn errors_csv_layout() {
        let e = crate::analysis::ErrorNorms {
            l2: 1.0,
            h1_semi: 1.0,
            h1: 2.0,
        };
        let recs = vec![ConvergenceRecord::new(1, 0.5, e, e)];
        let mut out = Vec::new();
        write_errors_csv(&mut out, &recs).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(ERRORS_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[3], "");
    }

    #[test]
    fn vtk_single_triangle() {
        let mesh = SurfaceMesh::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        );
        let mut out = Vec::new();
        write_vtk_to(&mut out, &mesh, &[1.0; 3], &[1.0; 3], 0.0).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 3 double\n"));
        assert!(text.contains("CELLS 1 4\n3 0 1 2\n"));
        assert!(text.contains("CELL_TYPES 1\n5\n"));
        assert!(text.contains("SCALARS u double 1\nLOOKUP_TABLE default\n1e0\n1e0\n1e0\n"));
    }
}
