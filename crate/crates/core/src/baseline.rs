//! Grid planner over the belief simplex.
//!
//! Beliefs are discretized to the lattice `{m δ : Σ m = 1/δ}` and the belief
//! MDP is restricted to lattice points: each signal branch is filtered exactly
//! and the posterior rounded back onto the lattice. The grid size grows with
//! the number of hidden states, which is what the coefficient planner avoids.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use serde::Serialize;

use crate::mdp::{value_iteration, FiniteMdp, GridKind, PlanResult};
use crate::modified_mdp::{merge_successors, PlanError, DEFAULT_STATE_CAP, P_MIN};
use crate::pomdp::{BeliefState, PomdpModel};

/// Number of lattice steps `1/δ`, or an error when it is not an integer.
pub fn lattice_steps(delta: f64) -> Result<u32, PlanError> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(PlanError::Delta(delta));
    }
    let k = (1.0 / delta).round();
    if (k * delta - 1.0).abs() > 1e-9 || k > u32::MAX as f64 {
        return Err(PlanError::Delta(delta));
    }
    Ok(k as u32)
}

/// Largest-remainder rounding of `b` onto the lattice with `steps` units:
/// floor every coordinate, then hand the leftover units to the largest
/// remainders, lowest index first on ties.
pub fn round_simplex(b: &[f64], steps: u32) -> Vec<i64> {
    let k = steps as f64;
    let mut m: Vec<i64> = b.iter().map(|&x| (x.max(0.0) * k).floor() as i64).collect();
    let assigned: i64 = m.iter().sum();
    let mut left = steps as i64 - assigned;
    if left > 0 {
        let mut order: Vec<usize> = (0..b.len()).collect();
        let rem = |i: usize| b[i].max(0.0) * k - m[i] as f64;
        order.sort_by(|&i, &j| rem(j).total_cmp(&rem(i)).then(i.cmp(&j)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            m[i] += 1;
            left -= 1;
        }
    } else {
        // only reachable through float drift above 1: take units back from the largest entries
        while left < 0 {
            let i = (0..m.len()).max_by_key(|&i| (m[i], std::cmp::Reverse(i))).unwrap();
            m[i] -= 1;
            left += 1;
        }
    }
    m
}

pub fn lattice_belief(m: &[i64], steps: u32) -> BeliefState {
    BeliefState::from_weights(m.iter().map(|&x| x as f64).collect())
        .unwrap_or_else(|| panic!("lattice point {m:?} for {steps} steps has no mass"))
}

#[derive(Debug, Clone)]
pub struct SimplexGrid {
    pub delta: f64,
    pub steps: u32,
    pub mdp: FiniteMdp,
    /// Largest deviation from 1 of a per-action successor mass before renormalizing.
    pub max_mass_defect: f64,
}

impl SimplexGrid {
    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn kind(&self) -> GridKind {
        GridKind::Simplex {
            delta: self.delta,
            states: self.mdp.labels.first().map_or(0, Vec::len),
        }
    }
}

/// Reachable closure of the simplex lattice from the rounded initial belief.
pub fn build_delta_grid(model: &PomdpModel, delta: f64, state_cap: usize) -> Result<SimplexGrid, PlanError> {
    let steps = lattice_steps(delta)?;
    let na = model.num_actions();
    let start = round_simplex(model.initial_belief().as_slice(), steps);
    let mut labels = vec![start.clone()];
    let mut index: HashMap<Vec<i64>, usize> = HashMap::from([(start, 0)]);
    let mut transitions: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rewards = Vec::new();
    let mut max_mass_defect: f64 = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        let b = lattice_belief(&labels[s], steps);
        for a in 0..na {
            let mut succ = Vec::new();
            for u in model.joint_successors(&b, a) {
                let p: f64 = u.iter().sum();
                if p <= P_MIN {
                    continue;
                }
                let post: Vec<f64> = u.iter().map(|x| x / p).collect();
                let g = round_simplex(&post, steps);
                let next = match index.get(&g) {
                    Some(&i) => i,
                    None => {
                        if labels.len() >= state_cap {
                            return Err(PlanError::StateCap { cap: state_cap });
                        }
                        let i = labels.len();
                        index.insert(g.clone(), i);
                        labels.push(g);
                        queue.push_back(i);
                        i
                    }
                };
                succ.push((next, p));
            }
            let mass: f64 = succ.iter().map(|(_, p)| p).sum();
            max_mass_defect = max_mass_defect.max((mass - 1.0).abs());
            let needed = (s + 1) * na;
            if transitions.len() < needed {
                transitions.resize(needed, Vec::new());
                rewards.resize(needed, 0.0);
            }
            transitions[s * na + a] = merge_successors(succ, mass);
            rewards[s * na + a] = model.expected_reward(&b, a);
        }
    }
    Ok(SimplexGrid {
        delta,
        steps,
        mdp: FiniteMdp {
            num_actions: na,
            labels,
            transitions,
            rewards,
            discount: model.discount(),
            initial: 0,
        },
        max_mass_defect,
    })
}

pub fn solve_baseline(grid: &SimplexGrid, vi_tol: f64) -> Result<PlanResult, PlanError> {
    let solution = value_iteration(&grid.mdp, vi_tol)?;
    Ok(PlanResult::new(grid.kind(), &grid.mdp, solution))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineTimings {
    pub build_grid: f64,
    pub solve: f64,
}

#[derive(Debug, Clone)]
pub struct BaselinePlanner {
    pub steps: u32,
    pub max_mass_defect: f64,
    pub result: PlanResult,
    pub timings: BaselineTimings,
}

impl BaselinePlanner {
    pub fn act(&self, b: &BeliefState) -> usize {
        act_baseline(&self.result, b)
    }
}

pub fn plan_baseline(
    model: &PomdpModel,
    delta: f64,
    vi_tol: f64,
    state_cap: Option<usize>,
) -> Result<BaselinePlanner, PlanError> {
    let t = Instant::now();
    let grid = build_delta_grid(model, delta, state_cap.unwrap_or(DEFAULT_STATE_CAP))?;
    let build_grid = t.elapsed().as_secs_f64();
    log::info!("built {} simplex grid states in {build_grid:.3}s", grid.num_states());
    let t = Instant::now();
    let result = solve_baseline(&grid, vi_tol)?;
    log::info!("value iteration converged in {} sweeps", result.iterations);
    Ok(BaselinePlanner {
        steps: grid.steps,
        max_mass_defect: grid.max_mass_defect,
        result,
        timings: BaselineTimings {
            build_grid,
            solve: t.elapsed().as_secs_f64(),
        },
    })
}

/// Action of a simplex-grid policy for a live belief.
pub fn act_baseline(plan: &PlanResult, b: &BeliefState) -> usize {
    let GridKind::Simplex { delta, .. } = plan.kind else {
        panic!("act_baseline needs a simplex-grid plan");
    };
    let steps = lattice_steps(delta).expect("plan was built with a valid delta");
    plan.policy[plan.resolve(&round_simplex(b.as_slice(), steps)).0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn delta_must_divide_one() {
        assert_eq!(lattice_steps(0.05).unwrap(), 20);
        assert_eq!(lattice_steps(1.0).unwrap(), 1);
        assert!(lattice_steps(0.3).is_err());
        assert!(lattice_steps(0.0).is_err());
        assert!(lattice_steps(1.5).is_err());
    }

    #[test]
    fn largest_remainder_rounding() {
        assert_eq!(round_simplex(&[0.5, 0.5], 1), vec![1, 0]);
        assert_eq!(round_simplex(&[0.34, 0.33, 0.33], 10), vec![4, 3, 3]);
        assert_eq!(round_simplex(&[0.12, 0.18, 0.7], 10), vec![1, 2, 7]);
        assert_eq!(round_simplex(&[0.25, 0.75], 4), vec![1, 3]);
        let m = round_simplex(&[0.1234, 0.4321, 0.4445], 20);
        assert_eq!(m.iter().sum::<i64>(), 20);
    }

    #[test]
    fn one_state_model_has_one_grid_state() {
        let m = corpus::fair_coin();
        for d in [1.0, 0.5, 0.05] {
            assert_eq!(build_delta_grid(&m, d, 100).unwrap().num_states(), 1);
        }
    }

    #[test]
    fn unit_delta_uses_corners_only() {
        let m = corpus::tiger();
        let grid = build_delta_grid(&m, 1.0, 100).unwrap();
        for l in &grid.mdp.labels {
            assert_eq!(l.iter().sum::<i64>(), 1);
            assert!(l.iter().all(|&x| x == 0 || x == 1));
        }
        // uniform rounds to the first corner, and every branch from it rounds back there
        assert_eq!(grid.mdp.labels, vec![vec![1, 0]]);
    }

    #[test]
    fn fully_observable_matches_mdp_values() {
        let parts = corpus::fully_observable_parts(3, 11);
        let m = PomdpModel::new(parts.clone()).unwrap();
        let delta = 0.05;
        let vi_tol = 1e-6;
        let plan = plan_baseline(&m, delta, vi_tol, None).unwrap();
        // exact MDP on the hidden states
        let n = 3;
        let reward = |s: usize, a: usize| m.expected_reward(&BeliefState::point(n, s), a);
        let exact = FiniteMdp {
            num_actions: 2,
            labels: (0..n as i64).map(|s| vec![s]).collect(),
            transitions: (0..n)
                .flat_map(|s| (0..2).map(move |a| (s, a)))
                .map(|(s, a)| (0..n).map(|j| (j, m.transition(s, a, j))).filter(|e| e.1 > 0.0).collect())
                .collect(),
            rewards: (0..n).flat_map(|s| (0..2).map(move |a| (s, a))).map(|(s, a)| reward(s, a)).collect(),
            discount: m.discount(),
            initial: 0,
        };
        let sol = value_iteration(&exact, 1e-9).unwrap();
        let gamma = m.discount();
        let bound = vi_tol + 2.0 * delta / (1.0 - gamma).powi(3);
        for s in 0..n {
            let corner = round_simplex(BeliefState::point(n, s).as_slice(), 20);
            if let Some(i) = plan.result.lookup(&corner) {
                assert!((plan.result.values[i] - sol.values[s]).abs() <= bound);
                // corners stay corners, so the grid is exact there
                assert!((plan.result.values[i] - sol.values[s]).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn tiger_baseline_listens_at_uniform() {
        let m = corpus::tiger();
        let plan = plan_baseline(&m, 0.05, 1e-6, None).unwrap();
        assert_eq!(plan.act(&BeliefState::uniform(2)), 0);
    }
}
