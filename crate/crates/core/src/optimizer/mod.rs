//! Stage-wise minimization of the refinement cost and the full pipeline.

mod solver;

pub use solver::{
    minimize, numeric_gradient, relative_steps, Iterate, MinimizeOutcome, Objective, SolverMode, SolverOptions,
    Termination,
};

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cost::{
    numeric_cost_gradient, smoothness_weights, total_cost, CostBreakdown, CostDiagnostics, CostWeights,
    GradientLayout, ParamState, Problem, SmoothnessWeightParams, StepPolicy, ViewData,
};
use crate::error::{Error, Result};
use crate::mesh::{compute_visibility_raw, sqrt3_subdivide_counted, Camera, SubdivisionOptions, TriMesh, Visibility};
use crate::polarimetry::PolarizationImageSet;
use crate::shading::Illumination;

/// Weights, shape parameters and stopping rules of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Stage {
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub t: f64,
    pub k: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
}

impl Default for Stage {
    fn default() -> Self {
        Stage {
            tau1: 60.0,
            tau2: 0.1,
            tau3: 2.0,
            t: 2.2,
            k: 0.5,
            max_iterations: 100,
            convergence_tol: 1e-6,
        }
    }
}

impl Stage {
    pub fn weights(&self, dop_weight: bool) -> CostWeights {
        CostWeights {
            tau1: self.tau1,
            tau2: self.tau2,
            tau3: self.tau3,
            k: self.k,
            t: self.t,
            dop_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct StageSchedule {
    pub stages: Vec<Stage>,
}

impl Default for StageSchedule {
    /// Three stages with growing polarimetric weight and smoothness exponent.
    fn default() -> Self {
        let stage = |tau1, t| Stage {
            tau1,
            t,
            ..Stage::default()
        };
        StageSchedule {
            stages: vec![stage(60.0, 2.2), stage(120.0, 2.8), stage(360.0, 3.4)],
        }
    }
}

impl StageSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidInput("schedule needs at least one stage".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            s.weights(true)
                .validate()
                .map_err(|e| Error::InvalidInput(format!("stage {i}: {e}")))?;
            if !(s.convergence_tol >= 0.0) {
                return Err(Error::InvalidInput(format!("stage {i}: negative convergence tolerance")));
            }
        }
        Ok(())
    }

    /// Sets the polarimetric weight of every stage.
    pub fn with_tau1(mut self, tau1: f64) -> Self {
        for s in &mut self.stages {
            s.tau1 = tau1;
        }
        self
    }
}

/// Breakdown of the cost at one accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IterationRecord {
    pub stage: usize,
    pub iteration: usize,
    pub cost: CostBreakdown,
    pub gradient_inf_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageReport {
    pub stage: usize,
    pub weights: CostWeights,
    pub iterations: usize,
    pub termination: Termination,
    pub initial: CostBreakdown,
    pub final_cost: CostBreakdown,
    pub gradient_norms: Vec<f64>,
    pub diagnostics: CostDiagnostics,
    pub unseen_vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverReport {
    pub vertex_count: usize,
    pub subdivision_steps: usize,
    pub stages: Vec<StageReport>,
    pub iterations: Vec<IterationRecord>,
    /// Filled in by callers that can measure time; never part of the
    /// serialized report so reports stay reproducible.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub wall_time_seconds: Option<f64>,
}

/// Sqrt(3)-subdivision target and options.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SubdivisionConfig {
    pub max_pixel_area: f64,
    pub smooth: bool,
    pub reverify_visibility: bool,
    pub max_steps: usize,
}

impl Default for SubdivisionConfig {
    fn default() -> Self {
        let o = SubdivisionOptions::default();
        SubdivisionConfig {
            max_pixel_area: 16.0,
            smooth: o.smooth,
            reverify_visibility: o.reverify_visibility,
            max_steps: o.max_steps,
        }
    }
}

impl SubdivisionConfig {
    pub fn options(&self) -> SubdivisionOptions {
        SubdivisionOptions {
            smooth: self.smooth,
            reverify_visibility: self.reverify_visibility,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PipelineConfig {
    #[cfg_attr(feature = "serde", serde(rename = "stages"))]
    pub schedule: StageSchedule,
    pub subdivision: SubdivisionConfig,
    pub solver: SolverOptions,
    pub smoothness: SmoothnessWeightParams,
    /// Compare renders against the total-intensity RGB instead of the unpolarized one.
    pub use_intensity: bool,
    /// Disable the DoP weighting of polarimetric samples.
    pub no_dop_weight: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Refined mesh with final albedo and visibility.
    pub mesh: TriMesh,
    pub illumination: Vec<Illumination>,
    pub report: SolverReport,
}

/// Initial parameters: albedo is the mean observed RGB over visible cameras,
/// lighting is uniform white.
pub fn initialize(mesh: &TriMesh, views: &[ViewData], cameras: &[Camera]) -> Result<ParamState> {
    let vis = &mesh.visibility;
    if vis.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch(format!(
            "visibility for {} vertices, mesh has {}",
            vis.len(),
            mesh.vertex_count()
        )));
    }
    let m = mesh.vertex_count();
    let mut albedo: Vec<Option<[f64; 3]>> = vec![None; m];
    for (i, slot) in albedo.iter_mut().enumerate() {
        let mut sum = [0.0; 3];
        let mut count = 0usize;
        for &c in vis.cameras(i) {
            let Some(p) = cameras[c].project(mesh.positions[i]) else { continue };
            if !cameras[c].contains(p.x, p.y) {
                continue;
            }
            let s = views[c].rgb.sample_bilinear_rgb(p.x, p.y);
            for ch in 0..3 {
                sum[ch] += s[ch];
            }
            count += 1;
        }
        if count > 0 {
            *slot = Some(sum.map(|v| v / count as f64));
        }
    }
    let seeded: Vec<Option<[f64; 3]>> = albedo.clone();
    let topo = mesh.topology();
    let mut resolved = Vec::with_capacity(m);
    for i in 0..m {
        if let Some(k) = seeded[i] {
            resolved.push(k);
            continue;
        }
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([i]);
        seen[i] = true;
        let mut found = None;
        while let Some(v) = queue.pop_front() {
            if let Some(k) = seeded[v] {
                found = Some(k);
                break;
            }
            for &n in topo.neighbors(v) {
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        resolved.push(found.unwrap_or([0.0; 3]));
    }
    if seeded.iter().all(Option::is_none) && m > 0 {
        log::warn!("no vertex is observed by any camera; albedo initialized to zero");
    }
    Ok(ParamState {
        positions: mesh.positions.clone(),
        albedo: resolved,
        illumination: vec![Illumination::UNIFORM; cameras.len()],
    })
}

struct StageObjective<'a> {
    problem: Problem<'a>,
    layout: GradientLayout,
    scale: f64,
    policy: StepPolicy,
}

impl StageObjective<'_> {
    fn to_vector(&self, state: &ParamState) -> Vec<f64> {
        let mut x = self.layout.pack(state);
        x[..3 * self.layout.vertices].iter_mut().for_each(|v| *v /= self.scale);
        x
    }

    fn to_state(&self, x: &[f64]) -> ParamState {
        let mut state = self.layout.unpack(x);
        for p in &mut state.positions {
            *p = *p * self.scale;
        }
        state
    }
}

impl Objective for StageObjective<'_> {
    type Info = (CostBreakdown, CostDiagnostics);

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Self::Info)> {
        let state = self.to_state(x);
        if !state.is_finite() {
            return Err(Error::NonFiniteCost("non-finite parameters".into()));
        }
        let (b, d) = total_cost(&self.problem, &state)?;
        Ok((b.total, (b, d)))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let state = self.to_state(x);
        let mut g = numeric_cost_gradient(&self.problem, &state, &self.policy)?;
        g[..3 * self.layout.vertices].iter_mut().for_each(|v| *v *= self.scale);
        Ok(g)
    }
}

/// Everything one stage needs besides the parameters.
pub struct StageInputs<'a> {
    pub mesh: &'a TriMesh,
    pub cameras: &'a [Camera],
    pub views: &'a [ViewData],
    pub visibility: &'a Visibility,
    pub psm_weights: &'a [f64],
    pub solver: &'a SolverOptions,
    pub dop_weight: bool,
}

/// Minimizes the total cost of one stage starting from `state`.
pub fn minimize_stage(
    state: &ParamState,
    stage: &Stage,
    index: usize,
    inputs: &StageInputs,
) -> Result<(ParamState, StageReport, Vec<IterationRecord>)> {
    let weights = stage.weights(inputs.dop_weight);
    let problem = Problem::new(
        inputs.mesh.topology(),
        inputs.cameras,
        inputs.views,
        inputs.visibility,
        inputs.psm_weights,
        weights,
    )?;
    problem.check_state(state)?;
    let scale = inputs.mesh.bounding_box_diagonal();
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let objective = StageObjective {
        problem,
        layout: GradientLayout::of(state),
        scale,
        policy: StepPolicy::for_scene(scale),
    };
    let x0 = objective.to_vector(state);
    let out = minimize(
        &objective,
        x0,
        stage.max_iterations,
        stage.convergence_tol,
        inputs.solver,
    )?;
    let diagnostics = out.info.1;
    if diagnostics.dropped_fraction() > 0.01 {
        log::warn!(
            "stage {index}: {:.2}% of contributions fell outside their images",
            100.0 * diagnostics.dropped_fraction()
        );
    }
    let records = out
        .history
        .iter()
        .map(|it| IterationRecord {
            stage: index,
            iteration: it.iteration,
            cost: it.info.0,
            gradient_inf_norm: it.gradient_inf_norm,
            step: it.step,
        })
        .collect();
    let report = StageReport {
        stage: index,
        weights,
        iterations: out.iterations,
        termination: out.termination,
        initial: out.initial_info.0,
        final_cost: out.info.0,
        gradient_norms: out.history.iter().map(|it| it.gradient_inf_norm).collect(),
        diagnostics,
        unseen_vertices: inputs.visibility.unseen_count(),
    };
    Ok((objective.to_state(&out.x), report, records))
}

/// Visibility, subdivision, initialization and the staged minimization.
pub fn run_pipeline(
    mesh: &TriMesh,
    cameras: &[Camera],
    images: &[PolarizationImageSet],
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if cameras.is_empty() || cameras.len() != images.len() {
        return Err(Error::InvalidInput(format!(
            "{} cameras and {} image sets",
            cameras.len(),
            images.len()
        )));
    }
    for cam in cameras {
        cam.validate()?;
    }
    config.schedule.validate()?;
    if cameras.len() == 1 {
        log::warn!("single view: geometry is weakly constrained");
    }
    let views: Vec<ViewData> = images
        .iter()
        .map(|s| ViewData::from_set(s, config.use_intensity))
        .collect();

    let mut work = mesh.clone();
    work.visibility = compute_visibility_raw(work.topology(), &work.positions, cameras);
    let (subdivided, subdivision_steps) = sqrt3_subdivide_counted(
        &work,
        cameras,
        config.subdivision.max_pixel_area,
        &config.subdivision.options(),
    )?;
    work = subdivided;
    work.visibility = compute_visibility_raw(work.topology(), &work.positions, cameras);
    log::info!(
        "{} vertices after {subdivision_steps} subdivision steps, {} unseen",
        work.vertex_count(),
        work.visibility.unseen_count()
    );
    let mut state = initialize(&work, &views, cameras)?;

    let mut report = SolverReport {
        vertex_count: work.vertex_count(),
        subdivision_steps,
        ..SolverReport::default()
    };
    for (index, stage) in config.schedule.stages.iter().enumerate() {
        let visibility = compute_visibility_raw(work.topology(), &state.positions, cameras);
        work.positions.clone_from(&state.positions);
        let psm_weights = smoothness_weights(
            work.topology(),
            &state.positions,
            cameras,
            &views,
            &visibility,
            &config.smoothness,
        );
        let inputs = StageInputs {
            mesh: &work,
            cameras,
            views: &views,
            visibility: &visibility,
            psm_weights: &psm_weights,
            solver: &config.solver,
            dop_weight: !config.no_dop_weight,
        };
        let (next, stage_report, records) = minimize_stage(&state, stage, index, &inputs)?;
        log::info!(
            "stage {index}: {} iterations, total {:.6e} -> {:.6e} ({:?})",
            stage_report.iterations,
            stage_report.initial.total,
            stage_report.final_cost.total,
            stage_report.termination
        );
        state = next;
        report.stages.push(stage_report);
        report.iterations.extend(records);
        work.visibility = visibility;
    }
    work.positions = state.positions;
    work.albedo = state.albedo;
    work.visibility = compute_visibility_raw(work.topology(), &work.positions, cameras);
    Ok(PipelineOutput {
        mesh: work,
        illumination: state.illumination,
        report,
    })
}

#[cfg(test)]
mod tests;
