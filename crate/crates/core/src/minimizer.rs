//! Energy minimization: inner projected gradient descent on the
//! deformation for a fixed crack set, outer finite search over crack
//! candidates (always including the crack-free baseline).

use crate::admissibility::{check_class, check_noninterpenetration, AdmissibilityReport};
use crate::energy::{eval_density, DensitySpec, EnergyParams};
use crate::error::{Error, Result};
use crate::mesh::BodyMesh;
use crate::state::{cut_mesh, DeformationState};
use crate::tensor::vec;
use crate::varifold::{CrackEnergyBreakdown, DiscreteVarifold};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStrategy {
    EnumerateConnectedSubsurfaces,
    GreedyGrowth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizerConfig {
    pub max_candidates: usize,
    pub max_inner_iterations: usize,
    /// Relative gradient tolerance: stop at |grad| <= tol * (1 + |E|).
    pub gradient_tolerance: f64,
    pub backtracking_factor: f64,
    pub max_halvings: usize,
    pub initial_step: f64,
    pub strategy: CandidateStrategy,
    pub seed: u64,
    pub check_noninterpenetration: bool,
    pub voxel_resolution: usize,
    pub gms_samples: usize,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            max_candidates: 64,
            max_inner_iterations: 500,
            gradient_tolerance: 1e-6,
            backtracking_factor: 0.5,
            max_halvings: 40,
            initial_step: 1e-2,
            strategy: CandidateStrategy::EnumerateConnectedSubsurfaces,
            seed: 0,
            check_noninterpenetration: true,
            voxel_resolution: 128,
            gms_samples: 8,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gradient_tolerance <= 0.0 || self.initial_step <= 0.0 {
            return Err(Error::Config("tolerances and steps must be positive".into()));
        }
        if !(self.backtracking_factor > 0.0 && self.backtracking_factor < 1.0) {
            return Err(Error::Config("backtracking factor must be in (0, 1)".into()));
        }
        if self.max_candidates == 0 {
            return Err(Error::Config("need at least one candidate".into()));
        }
        Ok(())
    }
}

/// Inner-solve diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct InnerDiagnostics {
    pub iterations: usize,
    /// Energy after the start and after each accepted step.
    pub energy_trace: Vec<f64>,
    /// Smallest element determinant after each accepted step.
    pub min_det_trace: Vec<f64>,
    pub final_gradient_norm: f64,
    /// Line search found no admissible step; best-so-far returned.
    pub stalled: bool,
}

/// Gradient descent with backtracking on the free nodes. Steps are
/// accepted only if the energy strictly decreases and stays finite
/// (which enforces det > 0 on every element); the box bound |y| <= K
/// is enforced by pulling offending nodes back toward their previous
/// value.
pub fn minimize_deformation(
    mesh: &BodyMesh,
    active: &[usize],
    spec: &DensitySpec,
    params: &EnergyParams,
    config: &MinimizerConfig,
    warm: Option<&DeformationState>,
) -> Result<(DeformationState, f64, InnerDiagnostics)> {
    config.validate()?;
    params.validate()?;
    let mut state = cut_mesh(mesh, active)?;
    if let Some(w) = warm {
        for (n, &orig) in state.topo.orig_of.iter().enumerate() {
            state.y[n] = w.y[orig];
        }
    }
    state.apply_dirichlet();

    let mut energy = state.bulk_energy(spec);
    if !energy.is_finite() {
        return Err(Error::Domain(
            "starting deformation has non-positive determinants".into(),
        ));
    }
    let mut trace = vec![energy];
    let mut min_det_trace = vec![state.min_det()];
    let mut step = config.initial_step;
    let mut gnorm = f64::INFINITY;
    let mut stalled = false;
    let mut iterations = 0;

    for _ in 0..config.max_inner_iterations {
        let grad = state.bulk_gradient(spec)?;
        gnorm = grad.iter().map(|g| vec::dot(g, g)).sum::<f64>().sqrt();
        if gnorm <= config.gradient_tolerance * (1.0 + energy.abs()) {
            break;
        }
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..=config.max_halvings {
            let mut trial = state.clone();
            for (n, g) in grad.iter().enumerate() {
                let prev = trial.y[n];
                let mut next = vec::sub(&prev, &vec::scale(g, trial_step));
                // box projection: shrink toward the previous (feasible)
                // position until back inside the ball of radius K
                let mut guard = 0;
                while vec::norm(&next) > params.k_bound && guard < 80 {
                    next = vec::scale(&vec::add(&next, &prev), 0.5);
                    guard += 1;
                }
                trial.y[n] = next;
            }
            let e = trial.bulk_energy(spec);
            if e.is_finite() && e < energy {
                state = trial;
                energy = e;
                trace.push(e);
                min_det_trace.push(state.min_det());
                accepted = true;
                // try a slightly larger step next iteration
                step = trial_step / config.backtracking_factor.sqrt();
                break;
            }
            trial_step *= config.backtracking_factor;
        }
        iterations += 1;
        if !accepted {
            stalled = true;
            break;
        }
    }

    Ok((
        state,
        energy,
        InnerDiagnostics {
            iterations,
            energy_trace: trace,
            min_det_trace,
            final_gradient_norm: gnorm,
            stalled,
        },
    ))
}

/// Candidate crack sets: the empty set plus edge-connected subsets of
/// the candidate surface (in (size, lexicographic) order, truncated to
/// `limit`). The greedy strategy needs energy context and yields only
/// the baseline here; `minimize_total` drives its growth.
pub fn generate_candidates(
    mesh: &BodyMesh,
    strategy: CandidateStrategy,
    limit: usize,
) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    if strategy == CandidateStrategy::GreedyGrowth || limit <= 1 {
        return out;
    }
    let n = mesh.candidate_faces.len();
    // adjacency: candidate faces sharing an edge
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in (a + 1)..n {
            let fa = mesh.candidate_faces[a];
            let fb = mesh.candidate_faces[b];
            let shared = fa.iter().filter(|x| fb.contains(x)).count();
            if shared == 2 {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    // breadth-first over subset size
    let mut current: BTreeSet<Vec<usize>> = (0..n).map(|f| vec![f]).collect();
    let mut seen: BTreeSet<Vec<usize>> = current.clone();
    while !current.is_empty() && out.len() + seen.len() > out.len() {
        for s in &current {
            if out.len() < limit {
                out.push(s.clone());
            }
        }
        if out.len() >= limit {
            break;
        }
        let mut next: BTreeSet<Vec<usize>> = BTreeSet::new();
        for s in &current {
            for &f in s {
                for &g in &adj[f] {
                    if s.contains(&g) {
                        continue;
                    }
                    let mut grown = s.clone();
                    grown.push(g);
                    grown.sort_unstable();
                    if seen.insert(grown.clone()) {
                        next.insert(grown);
                    }
                }
            }
        }
        current = next;
    }
    out.truncate(limit);
    out
}

/// Minimal multiplicity satisfying the jump-coverage bound.
pub fn required_multiplicity(params: &EnergyParams) -> u32 {
    ((2.0 / params.c_jump).ceil() as u32).max(1)
}

/// Crack varifold supported on the given candidate faces, with shared
/// vertices so surface edges match up.
pub fn crack_varifold(mesh: &BodyMesh, faces: &[usize], theta: u32) -> Result<DiscreteVarifold> {
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for &f in faces {
        let nodes = mesh.candidate_faces[f];
        let mut tri = [0usize; 3];
        for (k, &n) in nodes.iter().enumerate() {
            let id = *remap.entry(n).or_insert_with(|| {
                vertices.push(mesh.nodes[n]);
                vertices.len() - 1
            });
            tri[k] = id;
        }
        triangles.push(tri);
    }
    let thetas = vec![theta; triangles.len()];
    DiscreteVarifold::from_triangles(vertices, triangles, thetas)
}

/// One evaluated crack candidate.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateRecord {
    pub id: usize,
    pub faces: Vec<usize>,
    pub bulk_energy: f64,
    pub crack_energy: CrackEnergyBreakdown,
    pub total_energy: f64,
    pub crack_mass: f64,
    pub inner_iterations: usize,
    pub stalled: bool,
    pub admissible: bool,
    pub rejection: Option<String>,
    pub admissibility: AdmissibilityReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizationReport {
    pub candidates: Vec<CandidateRecord>,
    /// Index into `candidates` of the admissible minimizer.
    pub selected: usize,
    pub config: MinimizerConfig,
    /// Not serialized: reports must be byte-identical across runs.
    #[serde(skip)]
    pub wall_clock_ms: u128,
}

impl MinimizationReport {
    pub fn selected_record(&self) -> &CandidateRecord {
        &self.candidates[self.selected]
    }
}

struct Evaluated {
    record: CandidateRecord,
    state: DeformationState,
}

fn evaluate_candidate(
    mesh: &BodyMesh,
    faces: &[usize],
    id: usize,
    spec: &DensitySpec,
    params: &EnergyParams,
    config: &MinimizerConfig,
    warm: Option<&DeformationState>,
) -> Result<Evaluated> {
    let theta = required_multiplicity(params);
    let v = if faces.is_empty() {
        DiscreteVarifold::empty()
    } else {
        crack_varifold(mesh, faces, theta)?
    };
    let (state, bulk, diag) = minimize_deformation(mesh, faces, spec, params, config, warm)?;
    let crack = v.crack_energy(params)?;
    let report = check_class(&state, &v, params);
    let mut rejection = None;
    if !report.pass() {
        let names: Vec<&str> = report.failures().iter().map(|r| r.name.as_str()).collect();
        rejection = Some(format!("admissibility: {}", names.join("; ")));
    } else if config.check_noninterpenetration {
        let ni = check_noninterpenetration(
            &state,
            config.voxel_resolution,
            config.gms_samples,
            config.seed,
        )?;
        if !ni.pass {
            rejection = Some(format!(
                "interpenetration: det integral {:.6} vs image volume {:.6} (+/- {:.6}), sampled defect {:.3e}",
                ni.det_integral, ni.image_volume, ni.volume_tolerance, ni.sampled_worst
            ));
        }
    }
    let record = CandidateRecord {
        id,
        faces: faces.to_vec(),
        bulk_energy: bulk,
        crack_energy: crack,
        total_energy: bulk + crack.total,
        crack_mass: v.mass(),
        inner_iterations: diag.iterations,
        stalled: diag.stalled,
        admissible: rejection.is_none(),
        rejection,
        admissibility: report,
    };
    Ok(Evaluated { record, state })
}

/// Full outer search. Evaluates every candidate crack set (baseline
/// first, used as warm start for the rest), checks admissibility, and
/// selects the admissible total-energy minimizer; ties break toward
/// smaller crack mass, then the lexicographically smaller face set.
pub fn minimize_total(
    mesh: &BodyMesh,
    spec: &DensitySpec,
    params: &EnergyParams,
    config: &MinimizerConfig,
) -> Result<MinimizationReport> {
    config.validate()?;
    let t0 = std::time::Instant::now();

    let baseline = evaluate_candidate(mesh, &[], 0, spec, params, config, None)?;
    let warm = baseline.state.clone();

    let mut records = vec![baseline.record];
    match config.strategy {
        CandidateStrategy::EnumerateConnectedSubsurfaces => {
            let sets = generate_candidates(mesh, config.strategy, config.max_candidates);
            let rest: Result<Vec<Evaluated>> = sets
                .par_iter()
                .enumerate()
                .filter(|(_, faces)| !faces.is_empty())
                .map(|(id, faces)| {
                    evaluate_candidate(mesh, faces, id, spec, params, config, Some(&warm))
                })
                .collect();
            records.extend(rest?.into_iter().map(|e| e.record));
        }
        CandidateStrategy::GreedyGrowth => {
            // seed at the candidate face with the largest bulk density
            // above it, then grow while the total energy decreases
            let fields = warm.fields();
            let density: Vec<f64> = (0..mesh.candidate_faces.len())
                .map(|f| {
                    let key = mesh.candidate_key(f);
                    let (a, b) = mesh.face_adjacency(&key).expect("candidate is interior");
                    let wa = eval_density(spec, &fields.grads[a], &fields.d1[a], &fields.d2[a]);
                    let wb = eval_density(spec, &fields.grads[b], &fields.d1[b], &fields.d2[b]);
                    0.5 * (wa + wb)
                })
                .collect();
            let mut current_faces: Vec<usize> = Vec::new();
            let mut best_total = records[0].total_energy;
            let mut id = 1;
            while records.len() < config.max_candidates {
                // grow by the highest-density face adjacent to (or
                // seeding) the current set
                let next_face = (0..mesh.candidate_faces.len())
                    .filter(|f| !current_faces.contains(f))
                    .filter(|&f| {
                        current_faces.is_empty()
                            || current_faces.iter().any(|&g| {
                                let fa = mesh.candidate_faces[f];
                                let fb = mesh.candidate_faces[g];
                                fa.iter().filter(|x| fb.contains(x)).count() == 2
                            })
                    })
                    .max_by(|&a, &b| density[a].total_cmp(&density[b]).then(b.cmp(&a)));
                let Some(f) = next_face else { break };
                let mut faces = current_faces.clone();
                faces.push(f);
                faces.sort_unstable();
                let eval = evaluate_candidate(mesh, &faces, id, spec, params, config, Some(&warm))?;
                id += 1;
                let improved = eval.record.admissible && eval.record.total_energy < best_total;
                if improved {
                    best_total = eval.record.total_energy;
                    current_faces = faces;
                }
                records.push(eval.record);
                if !improved {
                    break;
                }
            }
        }
    }

    let selected = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.admissible)
        .min_by(|(_, a), (_, b)| {
            a.total_energy
                .total_cmp(&b.total_energy)
                .then(a.crack_mass.total_cmp(&b.crack_mass))
                .then(a.faces.cmp(&b.faces))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            Error::NoFeasibleCandidate(format!(
                "all {} candidates rejected by admissibility",
                records.len()
            ))
        })?;

    Ok(MinimizationReport {
        candidates: records,
        selected,
        config: config.clone(),
        wall_clock_ms: t0.elapsed().as_millis(),
    })
}
