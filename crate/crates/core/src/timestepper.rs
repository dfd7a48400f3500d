//! Semi-implicit time stepping of the coupled `(U, W)` system on an evolving
//! mesh:
//!
//! ```text
//! M(t₁) U₁ + τ S(t₁) W₁ = M(t₀) U₀ + τ b(t₁)
//! ε S(t₁) U₁ − M(t₁) W₁ = −Ψ(U₀) / ε
//! ```
//!
//! with all matrices assembled fresh on the mesh at `t₁`.

use std::fmt;
use std::sync::Arc;

use crate::analysis::{ginzburg_landau_energy, total_mass};
use crate::assembly::{
    assemble_lifted_load, assemble_mass, assemble_nonlinear, assemble_stiffness, NodalField,
    QuadratureRule,
};
use crate::error::{Error, Result};
use crate::geometry::{LevelSetSurface, Point};
use crate::linalg::{
    cg_solve, gmres_solve, norm, BlockSystem, CsrMatrix, LinearOperator, SolverOptions,
};
use crate::mesh::{evolve_nodes, NodeMotion, SurfaceMesh};

/// Source term `f(p, t)` evaluated at points `p` of Γ(t).
pub type Forcing = Arc<dyn Fn(&Point, f64) -> Result<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    /// `τ = coeff · h²` with `h` the initial mesh size, shrunk so that it
    /// divides the final time.
    MeshScaled { coeff: f64 },
}

#[derive(Clone)]
pub struct SchemeConfig {
    pub epsilon: f64,
    pub time_step: TimeStep,
    pub final_time: f64,
    pub lumped: bool,
    pub psi_enabled: bool,
    pub forcing: Option<Forcing>,
    pub motion: NodeMotion,
    pub quad: QuadratureRule,
    pub solver: SolverOptions,
}

impl fmt::Debug for SchemeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SchemeConfig")
            .field("epsilon", &self.epsilon)
            .field("time_step", &self.time_step)
            .field("final_time", &self.final_time)
            .field("lumped", &self.lumped)
            .field("psi_enabled", &self.psi_enabled)
            .field("forcing", &self.forcing.is_some())
            .field("motion", &self.motion)
            .finish()
    }
}

impl SchemeConfig {
    /// Cahn–Hilliard defaults: fixed step, consistent mass, no forcing.
    pub fn cahn_hilliard(epsilon: f64, tau: f64, final_time: f64) -> Self {
        SchemeConfig {
            epsilon,
            time_step: TimeStep::Fixed(tau),
            final_time,
            lumped: false,
            psi_enabled: true,
            forcing: None,
            motion: NodeMotion::ExactMap,
            quad: QuadratureRule::default(),
            solver: SolverOptions::default(),
        }
    }

    /// Linear fourth-order problem (`ψ ≡ 0`) with a source term.
    pub fn linear(epsilon: f64, time_step: TimeStep, final_time: f64, forcing: Forcing) -> Self {
        SchemeConfig {
            time_step,
            psi_enabled: false,
            forcing: Some(forcing),
            ..Self::cahn_hilliard(epsilon, 1.0, final_time)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::validation("epsilon", "must be positive"));
        }
        if !(self.final_time >= 0.0) {
            return Err(Error::validation("T", "must be nonnegative"));
        }
        match self.time_step {
            TimeStep::Fixed(tau) if !(tau > 0.0) => {
                Err(Error::validation("tau", "must be positive"))
            }
            TimeStep::MeshScaled { coeff } if !(coeff > 0.0) => {
                Err(Error::validation("tau_rule", "coefficient must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Step size and step count for a run starting on a mesh of size `h0`.
    pub fn resolve_steps(&self, h0: f64) -> Result<(f64, usize)> {
        self.validate()?;
        if self.final_time == 0.0 {
            return Ok((0.0, 0));
        }
        match self.time_step {
            TimeStep::Fixed(tau) => {
                let n = (self.final_time / tau).round().max(1.0);
                if (n * tau - self.final_time).abs() > 1e-9 * self.final_time {
                    return Err(Error::validation(
                        "tau",
                        format!("{tau} does not divide T = {}", self.final_time),
                    ));
                }
                Ok((tau, n as usize))
            }
            TimeStep::MeshScaled { coeff } => {
                let raw = coeff * h0 * h0;
                let n = (self.final_time / raw - 1e-9).ceil().max(1.0);
                Ok((self.final_time / n, n as usize))
            }
        }
    }

    /// Non-fatal concerns about the parameters.
    pub fn warnings(&self, tau: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.psi_enabled && tau >= self.epsilon {
            out.push(format!(
                "time step {tau} is not below epsilon = {}; the scheme may be unstable",
                self.epsilon
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// `1ᵀ M U`.
    pub mass: f64,
    pub energy: f64,
    pub min_angle: f64,
    pub quasi_uniformity: f64,
    pub h: f64,
    pub iterations: usize,
    /// Relative residual of the last block solve.
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct SimulationState {
    pub step: usize,
    pub t: f64,
    pub u: NodalField,
    pub w: NodalField,
    pub mesh: SurfaceMesh,
    pub diagnostics: Diagnostics,
}

impl SimulationState {
    pub fn new(mesh: SurfaceMesh, u: NodalField, w: NodalField, cfg: &SchemeConfig) -> Result<Self> {
        u.check_len(&mesh)?;
        w.check_len(&mesh)?;
        let mut state = SimulationState {
            step: 0,
            t: mesh.time,
            u,
            w,
            mesh,
            diagnostics: Diagnostics::default(),
        };
        state.update_diagnostics(cfg, 0, 0.0)?;
        Ok(state)
    }

    fn update_diagnostics(&mut self, cfg: &SchemeConfig, iterations: usize, residual: f64) -> Result<()> {
        let metrics = self.mesh.metrics();
        self.diagnostics = Diagnostics {
            mass: total_mass(&self.mesh, &self.u),
            energy: ginzburg_landau_energy(&self.mesh, &self.u, cfg.epsilon, &cfg.quad)?,
            min_angle: metrics.min_angle,
            quasi_uniformity: metrics.quasi_uniformity,
            h: metrics.h,
            iterations,
            residual,
        };
        Ok(())
    }
}

/// `(M_l + τε S M_l⁻¹ S)`, the Schur complement of the lumped block system.
pub struct LumpedSchur<'a> {
    pub lumped: &'a [f64],
    pub stiffness: &'a CsrMatrix,
    pub tau: f64,
    pub epsilon: f64,
}

impl LinearOperator for LumpedSchur<'_> {
    fn dim(&self) -> usize {
        self.lumped.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut sx = vec![0.0; x.len()];
        self.stiffness.spmv_into(x, &mut sx);
        sx.iter_mut().zip(self.lumped).for_each(|(v, m)| *v /= m);
        self.stiffness.spmv_into(&sx, y);
        let c = self.tau * self.epsilon;
        for ((yi, xi), m) in y.iter_mut().zip(x).zip(self.lumped) {
            *yi = m * xi + c * *yi;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let c = self.tau * self.epsilon;
        (0..self.dim())
            .map(|i| {
                let s2: f64 = self
                    .stiffness
                    .row(i)
                    .map(|(k, v)| v * v / self.lumped[k])
                    .sum();
                self.lumped[i] + c * s2
            })
            .collect()
    }
}

/// The assembled linear system of one step.
pub struct StepSystem {
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub rhs: Vec<f64>,
    pub tau: f64,
    pub epsilon: f64,
    pub mesh: SurfaceMesh,
}

impl StepSystem {
    pub fn operator(&self) -> BlockSystem<'_> {
        BlockSystem::cahn_hilliard(&self.mass, &self.stiffness, &self.mass, self.tau, self.epsilon)
    }

    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let op = self.operator();
        let mut r = vec![0.0; x.len()];
        op.apply(x, &mut r);
        r.iter_mut().zip(&self.rhs).for_each(|(ri, bi)| *ri -= bi);
        let b = norm(&self.rhs);
        if b == 0.0 {
            norm(&r)
        } else {
            norm(&r) / b
        }
    }
}

/// Moves the mesh to `t + τ` and assembles the block system there.
pub fn assemble_step(
    state: &SimulationState,
    surface: &LevelSetSurface,
    cfg: &SchemeConfig,
    tau: f64,
) -> Result<StepSystem> {
    let t1 = state.t + tau;
    let old_mass = assemble_mass(&state.mesh, cfg.lumped)?;
    let mesh = evolve_nodes(&state.mesh, surface, state.t, t1, cfg.motion)?;
    let mass = assemble_mass(&mesh, cfg.lumped)?;
    let stiffness = assemble_stiffness(&mesh)?;

    let mut rhs1 = old_mass.spmv(&state.u)?;
    if let Some(f) = &cfg.forcing {
        let load = assemble_lifted_load(&mesh, surface, t1, |p| f(p, t1), &cfg.quad)?;
        rhs1.iter_mut().zip(&load).for_each(|(r, l)| *r += tau * l);
    }
    let rhs2 = if cfg.psi_enabled {
        let psi = assemble_nonlinear(&mesh, &state.u, &cfg.quad)?;
        psi.into_iter().map(|v| -v / cfg.epsilon).collect()
    } else {
        vec![0.0; mesh.n_nodes()]
    };
    rhs1.extend(rhs2);
    Ok(StepSystem {
        mass,
        stiffness,
        rhs: rhs1,
        tau,
        epsilon: cfg.epsilon,
        mesh,
    })
}

/// Advances the state by one step of size `tau`.
pub fn step(
    state: &SimulationState,
    surface: &LevelSetSurface,
    cfg: &SchemeConfig,
    tau: f64,
) -> Result<SimulationState> {
    let sys = assemble_step(state, surface, cfg, tau)?;
    let n = sys.mesh.n_nodes();
    let (x, iterations) = if cfg.lumped {
        solve_lumped(&sys, &state.u, &cfg.solver)?
    } else {
        let x0: Vec<f64> = state.u.iter().chain(state.w.iter()).copied().collect();
        let sol = gmres_solve(&sys.operator(), &sys.rhs, Some(&x0), &cfg.solver)?;
        (sol.x, sol.iterations)
    };
    let mut x = x;
    conserve_mass(&sys, &mut x);
    let residual = sys.relative_residual(&x);
    if !(residual <= cfg.solver.tol_rel) {
        return Err(Error::NoConvergence {
            context: "block solve".into(),
            residual,
        });
    }
    let mut next = SimulationState {
        step: state.step + 1,
        t: sys.mesh.time,
        u: x[..n].to_vec().into(),
        w: x[n..].to_vec().into(),
        mesh: sys.mesh,
        diagnostics: Diagnostics::default(),
    };
    next.update_diagnostics(cfg, iterations, residual)?;
    Ok(next)
}

// Shifts U by a constant so that 1ᵀMU equals 1ᵀ(rhs₁), the mass the exact
// solution carries since 1ᵀS = 0. Constants lie in the kernel of S, so the
// second block row is unaffected and the first changes only at the level of
// the solver residual.
fn conserve_mass(sys: &StepSystem, x: &mut [f64]) {
    let n = sys.mesh.n_nodes();
    let target: f64 = sys.rhs[..n].iter().sum();
    let m1 = sys.mass.row_sums();
    let area: f64 = m1.iter().sum();
    let current: f64 = m1.iter().zip(&x[..n]).map(|(a, b)| a * b).sum();
    let shift = (target - current) / area;
    x[..n].iter_mut().for_each(|v| *v += shift);
}

// Eliminates W = M_l⁻¹(εSU − rhs₂) and solves the SPD Schur system by CG.
fn solve_lumped(sys: &StepSystem, u0: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let n = sys.mesh.n_nodes();
    let ml = sys.mass.diagonal();
    let (rhs1, rhs2) = sys.rhs.split_at(n);
    let scaled: Vec<f64> = rhs2.iter().zip(&ml).map(|(r, m)| r / m).collect();
    let s_scaled = sys.stiffness.spmv(&scaled)?;
    let b: Vec<f64> = rhs1
        .iter()
        .zip(&s_scaled)
        .map(|(r, s)| r + sys.tau * s)
        .collect();
    let schur = LumpedSchur {
        lumped: &ml,
        stiffness: &sys.stiffness,
        tau: sys.tau,
        epsilon: sys.epsilon,
    };
    // tighter than the block tolerance so the recovered pair meets it
    let inner = SolverOptions {
        tol_rel: opts.tol_rel * 1e-2,
        ..*opts
    };
    let sol = cg_solve(&schur, &b, Some(u0), &inner)?;
    let su = sys.stiffness.spmv(&sol.x)?;
    let w: Vec<f64> = su
        .iter()
        .zip(rhs2)
        .zip(&ml)
        .map(|((s, r), m)| (sys.epsilon * s - r) / m)
        .collect();
    let mut x = sol.x;
    x.extend(w);
    Ok((x, sol.iterations))
}

/// Receives the state after every step (and once for the initial state).
pub trait Observer {
    fn observe(&mut self, state: &SimulationState) -> Result<()>;
}

impl<F: FnMut(&SimulationState) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &SimulationState) -> Result<()> {
        self(state)
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: SimulationState,
    pub tau: f64,
    /// `(t, diagnostics)` after every step, starting with the initial state.
    pub history: Vec<(f64, Diagnostics)>,
    /// Mesh-quality warnings, each reported once.
    pub warnings: Vec<String>,
}

/// Smallest interior angle, in degrees, below which a run warns.
pub const MIN_ANGLE_WARNING: f64 = 15.0;
/// Growth of the quasi-uniformity ratio over its initial value that triggers
/// a warning.
pub const QUASI_UNIFORMITY_WARNING: f64 = 2.0;

fn quality_warnings(
    d: &Diagnostics,
    initial: &Diagnostics,
    t: f64,
    seen: &mut [bool; 2],
    out: &mut Vec<String>,
) {
    if !seen[0] && d.min_angle < MIN_ANGLE_WARNING {
        seen[0] = true;
        out.push(format!(
            "minimum angle fell to {:.2} degrees at t = {t}; the mesh is not remeshed",
            d.min_angle
        ));
    }
    if !seen[1] && d.quasi_uniformity > QUASI_UNIFORMITY_WARNING * initial.quasi_uniformity {
        seen[1] = true;
        out.push(format!(
            "quasi-uniformity grew from {:.3} to {:.3} at t = {t}; the mesh is not remeshed",
            initial.quasi_uniformity, d.quasi_uniformity
        ));
    }
}

/// Runs from `initial` to the configured final time.
pub fn run(
    initial: SimulationState,
    surface: &LevelSetSurface,
    cfg: &SchemeConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutput> {
    let (tau, n_steps) = cfg.resolve_steps(initial.mesh.metrics().h)?;
    let t0 = initial.t;
    let mut state = initial;
    let mut history = vec![(state.t, state.diagnostics)];
    let mut warnings = Vec::new();
    let mut seen = [false; 2];
    let initial_diag = state.diagnostics;
    for obs in observers.iter_mut() {
        obs.observe(&state)?;
    }
    for k in 0..n_steps {
        let mut next = step(&state, surface, cfg, tau).map_err(|e| Error::AtStep {
            step: k + 1,
            source: Box::new(e),
        })?;
        // pin the clock to the grid so long runs do not accumulate drift
        next.t = if k + 1 == n_steps {
            t0 + cfg.final_time
        } else {
            t0 + (k + 1) as f64 * tau
        };
        next.mesh.time = next.t;
        history.push((next.t, next.diagnostics));
        quality_warnings(&next.diagnostics, &initial_diag, next.t, &mut seen, &mut warnings);
        state = next;
        for obs in observers.iter_mut() {
            obs.observe(&state).map_err(|e| Error::AtStep {
                step: k + 1,
                source: Box::new(e),
            })?;
        }
    }
    Ok(RunOutput {
        state,
        tau,
        history,
        warnings,
    })
}
