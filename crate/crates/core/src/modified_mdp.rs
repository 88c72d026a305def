//! Planning over coefficient vectors.
//!
//! A belief `b` is represented by the coefficients `α` with
//! `F_b^T = Σ_i α_i F_{b_i}^T` in the spanner basis. Because the core tests
//! carry the full Hankel rank, the same coefficients predict every test, so
//! one step of the belief dynamics becomes
//!
//! ```text
//! p(z | α, a) = αᵀ v_{a,z}          q = αᵀ W_{a,z} / p          Mᵀ β = q
//! ```
//!
//! with `v_{a,z}(i) = P(z | b_i, a)` and `W_{a,z}(i, j) = P((a,z)∘t_j | b_i)`.
//! The spanner bounds every genuine belief's coefficients by 2, so the
//! lattice `{m · ε/r : |m| ≤ 2r/ε}^r` covers the reachable space with a size
//! that depends on `r` only.

use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::automaton::{test_word, MultiplicityAutomaton};
use crate::decomposition::{
    discover_basis, improve_to_spanner, CoreDecomposition, DecompositionConfig, DecompositionError,
    SpannerBasis, SPANNER_BOUND,
};
use crate::mdp::{value_iteration, FiniteMdp, GridKind, PlanResult, SolveError};
use crate::pomdp::{BeliefState, PomdpModel, Signal};

/// Branches whose probability does not exceed this are dropped.
pub const P_MIN: f64 = 1e-9;
pub const DEFAULT_STATE_CAP: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("grid exceeded the state cap of {cap} states; try a coarser mesh")]
    StateCap { cap: usize },
    #[error("invalid mesh parameter {0}: must lie in (0, 1]")]
    Mesh(f64),
    #[error("invalid delta {0}: must lie in (0, 1] with 1/delta an integer")]
    Delta(f64),
    #[error("dynamics cache: {0}")]
    Cache(String),
}

/// Per-symbol one-step quantities in the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDynamics {
    rank: usize,
    num_actions: usize,
    num_signals: usize,
    /// `[a * |Z| + z]`
    v: Vec<DVector<f64>>,
    /// `[a * |Z| + z]`
    w: Vec<DMatrix<f64>>,
    /// `[a]`
    rho: Vec<DVector<f64>>,
    reward_of_signal: Vec<f64>,
}

impl SignalDynamics {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_signals(&self) -> usize {
        self.num_signals
    }

    /// `v_{a,z}(i) = P(z | b_i, a)`.
    pub fn signal_probs(&self, a: usize, z: usize) -> &DVector<f64> {
        &self.v[a * self.num_signals + z]
    }

    /// `W_{a,z}(i, j) = P((a,z)∘t_j | b_i)`.
    pub fn extension_probs(&self, a: usize, z: usize) -> &DMatrix<f64> {
        &self.w[a * self.num_signals + z]
    }

    /// `ρ_a(i)`: expected reward of `a` from basis state `b_i`.
    pub fn rewards(&self, a: usize) -> &DVector<f64> {
        &self.rho[a]
    }
}

/// Computes `v`, `W` and `ρ` exactly from the automaton of the model.
pub fn precompute_dynamics(model: &PomdpModel, spanner: &SpannerBasis) -> SignalDynamics {
    let ma = MultiplicityAutomaton::from_pomdp(model);
    let core = spanner.core();
    let r = core.rank();
    let (na, nz) = (model.num_actions(), model.num_signals());
    let test_columns: Vec<DVector<f64>> = core
        .tests()
        .iter()
        .map(|t| ma.suffix_vector(&test_word(model, t)).expect("core tests use model symbols"))
        .collect();
    let mut v = Vec::with_capacity(na * nz);
    let mut w = Vec::with_capacity(na * nz);
    for sym in 0..na * nz {
        let ext: Vec<DVector<f64>> = test_columns.iter().map(|c| ma.mu(sym) * c).collect();
        let wm = DMatrix::from_fn(r, r, |i, j| ext[j][core.basis()[i]]);
        // the empty test is t_0, so its extension is the one-step test itself
        v.push(wm.column(0).into_owned());
        w.push(wm);
    }
    let reward_of_signal: Vec<f64> = (0..nz)
        .map(|z| model.reward_values()[model.signal_at(z).reward])
        .collect();
    let rho = (0..na)
        .map(|a| {
            (0..nz).fold(DVector::zeros(r), |acc, z| acc + &v[a * nz + z] * reward_of_signal[z])
        })
        .collect();
    SignalDynamics {
        rank: r,
        num_actions: na,
        num_signals: nz,
        v,
        w,
        rho,
        reward_of_signal,
    }
}

/// Successor coefficients after one (action, signal) step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientStep {
    pub probability: f64,
    pub beta: DVector<f64>,
    /// Largest amount any coefficient was moved by clamping into [-2, 2].
    pub clamp: f64,
}

fn clamp_coefficients(alpha: &mut DVector<f64>) -> f64 {
    let mut moved: f64 = 0.0;
    for x in alpha.iter_mut() {
        let c = x.clamp(-SPANNER_BOUND, SPANNER_BOUND);
        moved = moved.max((c - *x).abs());
        *x = c;
    }
    moved
}

/// One signal-wise step of the coefficient dynamics. `Ok(None)` marks a
/// branch with probability at most [`P_MIN`].
pub fn step_coefficients(
    dynamics: &SignalDynamics,
    core: &CoreDecomposition,
    alpha: &DVector<f64>,
    a: usize,
    z: usize,
) -> Result<Option<CoefficientStep>, DecompositionError> {
    let p = alpha.dot(dynamics.signal_probs(a, z)).clamp(0.0, 1.0);
    if p <= P_MIN {
        return Ok(None);
    }
    let q = dynamics.extension_probs(a, z).tr_mul(alpha) / p;
    let mut beta = core.solve_coefficients(&q)?.alpha;
    let clamp = clamp_coefficients(&mut beta);
    Ok(Some(CoefficientStep {
        probability: p,
        beta,
        clamp,
    }))
}

/// A point of the coefficient lattice: `coords[i] * mesh` is the coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct GridState {
    pub coords: Vec<i64>,
}

impl GridState {
    pub fn coefficients(&self, mesh: f64) -> DVector<f64> {
        DVector::from_iterator(self.coords.len(), self.coords.iter().map(|&m| m as f64 * mesh))
    }
}

/// Largest lattice index `⌊2/mesh⌋` (i.e. `⌊2r/ε⌋`).
pub fn max_index(epsilon: f64, rank: usize) -> i64 {
    (2.0 * rank as f64 / epsilon + 1e-9).floor() as i64
}

/// Rounds each coordinate to the nearest multiple of `mesh`, ties toward
/// −∞, then clamps into the lattice's [-2, 2] range.
pub fn round_to_grid(alpha: &[f64], mesh: f64) -> GridState {
    let limit = (2.0 / mesh + 1e-9).floor() as i64;
    GridState {
        coords: alpha
            .iter()
            .map(|&x| {
                let m = ((x / mesh) - 0.5).ceil() as i64;
                m.clamp(-limit, limit)
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    /// Only states reachable from the rounded initial belief.
    #[default]
    Reachable,
    /// Every lattice point in [-2, 2]^r.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub epsilon: f64,
    pub mode: GridMode,
    pub state_cap: usize,
}

impl GridConfig {
    pub fn new(epsilon: f64) -> Self {
        GridConfig {
            epsilon,
            mode: GridMode::Reachable,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

/// Counters for the clipping rules applied while building a grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridDiagnostics {
    /// Rewards `gᵀρ_a` that left [0, 1] and were clamped.
    pub reward_clamps: usize,
    /// Successor coefficient vectors that needed clamping into [-2, 2].
    pub coefficient_clamps: usize,
    pub max_coefficient_clamp: f64,
    /// Branches dropped for probability at most `P_MIN`.
    pub dropped_branches: usize,
    /// Largest deviation from 1 of a per-action successor mass before renormalizing.
    pub max_mass_defect: f64,
}

#[derive(Debug, Clone)]
pub struct GridMdp {
    pub epsilon: f64,
    pub mesh: f64,
    pub rank: usize,
    pub mode: GridMode,
    pub mdp: FiniteMdp,
    pub diagnostics: GridDiagnostics,
}

impl GridMdp {
    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn kind(&self) -> GridKind {
        GridKind::Coefficient {
            epsilon: self.epsilon,
            mesh: self.mesh,
            rank: self.rank,
        }
    }
}

/// Coefficients of a belief, clamped into [-2, 2].
pub fn belief_coefficients(core: &CoreDecomposition, b: &BeliefState) -> Result<DVector<f64>, DecompositionError> {
    let mut alpha = core.coefficients_of(b)?.alpha;
    clamp_coefficients(&mut alpha);
    Ok(alpha)
}

pub fn build_grid(
    model: &PomdpModel,
    spanner: &SpannerBasis,
    dynamics: &SignalDynamics,
    config: GridConfig,
) -> Result<GridMdp, PlanError> {
    if !(config.epsilon > 0.0 && config.epsilon <= 1.0) {
        return Err(PlanError::Mesh(config.epsilon));
    }
    let core = spanner.core();
    let r = core.rank();
    let mesh = config.epsilon / r as f64;
    let limit = max_index(config.epsilon, r);
    let na = model.num_actions();
    let nz = model.num_signals();

    let start = round_to_grid(belief_coefficients(core, model.initial_belief())?.as_slice(), mesh);

    let mut labels: Vec<Vec<i64>> = Vec::new();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    match config.mode {
        GridMode::Reachable => {
            index.insert(start.coords.clone(), 0);
            labels.push(start.coords.clone());
        }
        GridMode::Full => {
            let side = (2 * limit + 1) as u128;
            let total = side.checked_pow(r as u32).unwrap_or(u128::MAX);
            if total > config.state_cap as u128 {
                return Err(PlanError::StateCap {
                    cap: config.state_cap,
                });
            }
            let mut coords = vec![-limit; r];
            loop {
                index.insert(coords.clone(), labels.len());
                labels.push(coords.clone());
                // odometer increment, last coordinate fastest
                let mut k = r;
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    if coords[k] < limit {
                        coords[k] += 1;
                        break;
                    }
                    coords[k] = -limit;
                    if k == 0 {
                        k = usize::MAX;
                        break;
                    }
                }
                if k == usize::MAX {
                    break;
                }
            }
        }
    }

    let mut diagnostics = GridDiagnostics::default();
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    let mut queue: VecDeque<usize> = (0..labels.len()).collect();
    while let Some(s) = queue.pop_front() {
        let alpha = GridState {
            coords: labels[s].clone(),
        }
        .coefficients(mesh);
        for a in 0..na {
            let mut succ: Vec<(usize, f64)> = Vec::new();
            for z in 0..nz {
                let Some(step) = step_coefficients(dynamics, core, &alpha, a, z)? else {
                    if alpha.dot(dynamics.signal_probs(a, z)) != 0.0 {
                        diagnostics.dropped_branches += 1;
                    }
                    continue;
                };
                if step.clamp > 0.0 {
                    diagnostics.coefficient_clamps += 1;
                    diagnostics.max_coefficient_clamp = diagnostics.max_coefficient_clamp.max(step.clamp);
                }
                let g = round_to_grid(step.beta.as_slice(), mesh);
                let next = match index.get(&g.coords) {
                    Some(&i) => i,
                    None => {
                        if labels.len() >= config.state_cap {
                            return Err(PlanError::StateCap {
                                cap: config.state_cap,
                            });
                        }
                        let i = labels.len();
                        index.insert(g.coords.clone(), i);
                        labels.push(g.coords);
                        queue.push_back(i);
                        i
                    }
                };
                succ.push((next, step.probability));
            }
            let mass: f64 = succ.iter().map(|(_, p)| p).sum();
            diagnostics.max_mass_defect = diagnostics.max_mass_defect.max((mass - 1.0).abs());
            let succ = if mass > 0.0 {
                merge_successors(succ, mass)
            } else {
                vec![(s, 1.0)]
            };
            let raw = alpha.dot(dynamics.rewards(a));
            let reward = raw.clamp(0.0, 1.0);
            if reward != raw {
                diagnostics.reward_clamps += 1;
            }
            ensure_slot(&mut transitions, &mut rewards, s, na);
            transitions[s * na + a] = succ;
            rewards[s * na + a] = reward;
        }
    }

    let initial = index[&start.coords];
    Ok(GridMdp {
        epsilon: config.epsilon,
        mesh,
        rank: r,
        mode: config.mode,
        mdp: FiniteMdp {
            num_actions: na,
            labels,
            transitions,
            rewards,
            discount: model.discount(),
            initial,
        },
        diagnostics,
    })
}

fn ensure_slot(transitions: &mut Vec<Vec<(usize, f64)>>, rewards: &mut Vec<f64>, s: usize, na: usize) {
    let needed = (s + 1) * na;
    if transitions.len() < needed {
        transitions.resize(needed, Vec::new());
        rewards.resize(needed, 0.0);
    }
}

/// Sums duplicate targets, sorts by target, and divides by `mass`.
pub(crate) fn merge_successors(mut succ: Vec<(usize, f64)>, mass: f64) -> Vec<(usize, f64)> {
    succ.sort_by_key(|(t, _)| *t);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(succ.len());
    for (t, p) in succ {
        match out.last_mut() {
            Some((last, q)) if *last == t => *q += p,
            _ => out.push((t, p)),
        }
    }
    out.iter_mut().for_each(|(_, p)| *p /= mass);
    out
}

/// Solves the grid MDP by value iteration.
pub fn solve(grid: &GridMdp, vi_tol: f64) -> Result<PlanResult, PlanError> {
    let solution = value_iteration(&grid.mdp, vi_tol)?;
    Ok(PlanResult::new(grid.kind(), &grid.mdp, solution))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConfig {
    pub grid: GridConfig,
    pub vi_tol: f64,
    pub decomposition: DecompositionConfig,
}

impl PlanConfig {
    pub fn new(epsilon: f64, vi_tol: f64) -> Self {
        PlanConfig {
            grid: GridConfig::new(epsilon),
            vi_tol,
            decomposition: DecompositionConfig::default(),
        }
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageTimings {
    pub discover_basis: f64,
    pub improve_to_spanner: f64,
    pub precompute_dynamics: f64,
    pub build_grid: f64,
    pub solve: f64,
}

/// Everything produced by [`plan`].
#[derive(Debug, Clone)]
pub struct Planner {
    pub discovered: CoreDecomposition,
    pub spanner: SpannerBasis,
    pub dynamics: SignalDynamics,
    pub grid_diagnostics: GridDiagnostics,
    pub grid_mode: GridMode,
    pub result: PlanResult,
    pub timings: StageTimings,
}

impl Planner {
    pub fn mesh(&self) -> f64 {
        match self.result.kind {
            GridKind::Coefficient { mesh, .. } => mesh,
            GridKind::Simplex { delta, .. } => delta,
        }
    }

    /// Action of the grid policy for a live belief.
    pub fn act(&self, b: &BeliefState) -> usize {
        act(&self.spanner, &self.result, b)
    }
}

/// Runs basis discovery, spanner improvement, dynamics, grid construction and
/// value iteration. `dynamics_cache` optionally names a directory holding
/// precomputed dynamics.
pub fn plan_with_cache(
    model: &PomdpModel,
    config: PlanConfig,
    dynamics_cache: Option<&Path>,
) -> Result<Planner, PlanError> {
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let discovered = discover_basis(model, config.decomposition)?;
    timings.discover_basis = t.elapsed().as_secs_f64();
    log::info!("discovered basis of rank {} in {:.3}s", discovered.rank(), timings.discover_basis);

    let t = Instant::now();
    let spanner = improve_to_spanner(&discovered);
    timings.improve_to_spanner = t.elapsed().as_secs_f64();
    log::info!("spanner after {} swaps", spanner.swaps().len());

    let t = Instant::now();
    let dynamics = match dynamics_cache {
        Some(dir) => {
            let key = dynamics_cache_key(model, &spanner);
            match read_dynamics_cache(dir, &key)? {
                Some(d) => d,
                None => {
                    let d = precompute_dynamics(model, &spanner);
                    write_dynamics_cache(dir, &key, &d)?;
                    d
                }
            }
        }
        None => precompute_dynamics(model, &spanner),
    };
    timings.precompute_dynamics = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let grid = build_grid(model, &spanner, &dynamics, config.grid)?;
    timings.build_grid = t.elapsed().as_secs_f64();
    log::info!("built {} grid states in {:.3}s", grid.num_states(), timings.build_grid);

    let t = Instant::now();
    let result = solve(&grid, config.vi_tol)?;
    timings.solve = t.elapsed().as_secs_f64();
    log::info!("value iteration converged in {} sweeps", result.iterations);

    Ok(Planner {
        discovered,
        spanner,
        dynamics,
        grid_diagnostics: grid.diagnostics,
        grid_mode: grid.mode,
        result,
        timings,
    })
}

pub fn plan(model: &PomdpModel, config: PlanConfig) -> Result<Planner, PlanError> {
    plan_with_cache(model, config, None)
}

/// Maps a belief to its rounded coefficient vector and returns the policy's
/// action there; unexpanded grid states fall back to the nearest expanded one.
pub fn act(spanner: &SpannerBasis, plan: &PlanResult, b: &BeliefState) -> usize {
    let GridKind::Coefficient { mesh, .. } = plan.kind else {
        panic!("act needs a coefficient-grid plan");
    };
    let label = match belief_coefficients(spanner.core(), b) {
        Ok(alpha) => round_to_grid(alpha.as_slice(), mesh).coords,
        Err(e) => {
            log::warn!("coefficient solve failed ({e}); using the initial grid state");
            plan.labels[plan.initial_state].clone()
        }
    };
    plan.policy[plan.resolve(&label).0]
}

/// Hex SHA-256 over the model's canonical JSON and the spanner dump.
pub fn dynamics_cache_key(model: &PomdpModel, spanner: &SpannerBasis) -> String {
    let mut h = Sha256::new();
    h.update(model.to_json_string().as_bytes());
    h.update(serde_json::to_vec(&spanner.to_json(model)).expect("spanner json"));
    hex::encode(h.finalize())
}

const CACHE_MAGIC: &[u8; 8] = b"MAPDYN01";

fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.dyn"))
}

/// Binary little-endian cache: magic, key, dimensions, then `v`, `W`
/// (row-major), `ρ` and per-signal rewards as `f64`.
pub fn write_dynamics_cache(dir: &Path, key: &str, d: &SignalDynamics) -> Result<(), PlanError> {
    let io = |e: std::io::Error| PlanError::Cache(e.to_string());
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(key.as_bytes());
    for dim in [d.rank, d.num_actions, d.num_signals] {
        buf.extend_from_slice(&(dim as u64).to_le_bytes());
    }
    let mut put = |x: f64| buf.extend_from_slice(&x.to_le_bytes());
    for v in &d.v {
        v.iter().for_each(|&x| put(x));
    }
    for w in &d.w {
        for i in 0..d.rank {
            for j in 0..d.rank {
                put(w[(i, j)]);
            }
        }
    }
    for rho in &d.rho {
        rho.iter().for_each(|&x| put(x));
    }
    d.reward_of_signal.iter().for_each(|&x| put(x));
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    std::fs::write(tmp.path(), &buf).map_err(io)?;
    tmp.persist(cache_path(dir, key))
        .map_err(|e| PlanError::Cache(e.to_string()))?;
    Ok(())
}

pub fn read_dynamics_cache(dir: &Path, key: &str) -> Result<Option<SignalDynamics>, PlanError> {
    let path = cache_path(dir, key);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(PlanError::Cache(e.to_string())),
    };
    let bad = || PlanError::Cache(format!("{} is corrupt", path.display()));
    let header = CACHE_MAGIC.len() + key.len();
    if bytes.len() < header + 24 || &bytes[..8] != CACHE_MAGIC || &bytes[8..header] != key.as_bytes() {
        return Err(bad());
    }
    let mut pos = header;
    let take_u64 = |pos: &mut usize| -> Result<usize, PlanError> {
        let chunk = bytes.get(*pos..*pos + 8).ok_or_else(bad)?;
        *pos += 8;
        Ok(u64::from_le_bytes(chunk.try_into().unwrap()) as usize)
    };
    let r = take_u64(&mut pos)?;
    let na = take_u64(&mut pos)?;
    let nz = take_u64(&mut pos)?;
    let expected = pos + 8 * (na * nz * (r + r * r) + na * r + nz);
    if bytes.len() != expected {
        return Err(bad());
    }
    let mut floats = bytes[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut next = || floats.next().unwrap();
    let v = (0..na * nz).map(|_| DVector::from_fn(r, |_, _| next())).collect();
    let w = (0..na * nz)
        .map(|_| {
            let data: Vec<f64> = (0..r * r).map(|_| next()).collect();
            DMatrix::from_row_slice(r, r, &data)
        })
        .collect();
    let rho = (0..na).map(|_| DVector::from_fn(r, |_, _| next())).collect();
    let reward_of_signal = (0..nz).map(|_| next()).collect();
    Ok(Some(SignalDynamics {
        rank: r,
        num_actions: na,
        num_signals: nz,
        v,
        w,
        rho,
        reward_of_signal,
    }))
}

/// Realized signal helper for callers holding a [`Signal`].
pub fn step_signal(
    model: &PomdpModel,
    dynamics: &SignalDynamics,
    core: &CoreDecomposition,
    alpha: &DVector<f64>,
    a: usize,
    z: Signal,
) -> Result<Option<CoefficientStep>, DecompositionError> {
    step_coefficients(dynamics, core, alpha, a, model.signal_index(z))
}
