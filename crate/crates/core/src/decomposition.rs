//! Minimal state/test bases of the Hankel matrix and their improvement to a
//! 2-barycentric spanner.
//!
//! [`discover_basis`] grows a set of basis states `B` and core tests `T`
//! (starting from state 0 and the empty test) until no state outside `B`
//! breaks the linear relation its predictions satisfy on `T` for some
//! one-step extension `σ∘y`, `y ∈ T`. The matrix `M(i, j) = P(t_j | b_i)` is
//! then square, invertible, and has the rank of the full Hankel matrix.
//!
//! [`improve_to_spanner`] swaps basis states for other states while any
//! single-row swap more than doubles `|det M|`. On exit every state's
//! prediction vector has coefficients bounded by 2 in magnitude, and so does
//! every belief, being a convex combination of states.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::Serialize;
use thiserror::Error;

use crate::automaton::MultiplicityAutomaton;
use crate::linalg::{self, LogDet, DEFAULT_RANK_TOL};
use crate::pomdp::{BeliefState, PomdpModel, Step, Test};

/// Default absolute tolerance on test-probability mismatches.
pub const DEFAULT_DEP_TOL: f64 = 1e-7;
/// Coefficient bound guaranteed by the spanner.
pub const SPANNER_BOUND: f64 = 2.0;
const MAX_SWAPS: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum DecompositionError {
    #[error("basis matrix is numerically singular (inverse condition {inverse_condition:e})")]
    Degenerate { inverse_condition: f64 },
    #[error("coefficient target has {got} entries, basis has rank {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionConfig {
    /// Absolute threshold above which a prediction mismatch counts as a violation.
    pub dep_tol: f64,
    /// Relative singular-value threshold for rank and invertibility decisions.
    pub rank_tol: f64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            dep_tol: DEFAULT_DEP_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Basis states, core tests and the invertible matrix between them.
#[derive(Debug, Clone)]
pub struct CoreDecomposition {
    basis: Vec<usize>,
    tests: Vec<Test>,
    /// `M(i, j) = P(t_j | b_i)`
    m: DMatrix<f64>,
    /// `F_s^T` for every state `s`, one row per state.
    state_tests: DMatrix<f64>,
    factor: LU<f64, Dyn, Dyn>,
    inverse_condition: f64,
    config: DecompositionConfig,
}

/// Solution of `Mᵀ α = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub alpha: DVector<f64>,
    /// `‖Mᵀ α − target‖∞`
    pub residual: f64,
}

impl CoreDecomposition {
    fn assemble(
        basis: Vec<usize>,
        tests: Vec<Test>,
        state_tests: DMatrix<f64>,
        config: DecompositionConfig,
    ) -> Self {
        let r = basis.len();
        let m = DMatrix::from_fn(r, r, |i, j| state_tests[(basis[i], j)]);
        let factor = m.transpose().lu();
        let inverse_condition = linalg::inverse_condition(&m);
        CoreDecomposition {
            basis,
            tests,
            m,
            state_tests,
            factor,
            inverse_condition,
            config,
        }
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn tests(&self) -> &[Test] {
        &self.tests
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// `F_s^T` rows for every hidden state.
    pub fn state_tests(&self) -> &DMatrix<f64> {
        &self.state_tests
    }

    pub fn inverse_condition(&self) -> f64 {
        self.inverse_condition
    }

    pub fn config(&self) -> DecompositionConfig {
        self.config
    }

    pub fn is_invertible(&self) -> bool {
        self.inverse_condition > self.config.rank_tol
    }

    pub fn log_det(&self) -> LogDet {
        LogDet::of(&self.m)
    }

    /// `F_b^T`, the core-test predictions of belief `b`.
    pub fn predictions(&self, b: &BeliefState) -> DVector<f64> {
        self.state_tests.tr_mul(&DVector::from_column_slice(b.as_slice()))
    }

    /// Unique `α` with `Mᵀ α = target`.
    pub fn solve_coefficients(&self, target: &DVector<f64>) -> Result<Coefficients, DecompositionError> {
        if target.len() != self.rank() {
            return Err(DecompositionError::Dimension {
                expected: self.rank(),
                got: target.len(),
            });
        }
        if !self.is_invertible() {
            return Err(DecompositionError::Degenerate {
                inverse_condition: self.inverse_condition,
            });
        }
        let alpha = self
            .factor
            .solve(target)
            .ok_or(DecompositionError::Degenerate {
                inverse_condition: self.inverse_condition,
            })?;
        let residual = linalg::max_abs(&(self.m.tr_mul(&alpha) - target));
        Ok(Coefficients { alpha, residual })
    }

    /// Coefficients of a belief's predictions in the basis.
    pub fn coefficients_of(&self, b: &BeliefState) -> Result<Coefficients, DecompositionError> {
        self.solve_coefficients(&self.predictions(b))
    }

    /// Largest coefficient magnitude over all point-mass states.
    pub fn max_state_coefficient(&self) -> Result<f64, DecompositionError> {
        let mut worst: f64 = 0.0;
        for s in 0..self.state_tests.nrows() {
            let target = self.state_tests.row(s).transpose();
            let c = self.solve_coefficients(&target)?;
            worst = worst.max(linalg::max_abs(&c.alpha));
        }
        Ok(worst)
    }

    pub fn to_json(&self, model: &PomdpModel) -> DecompositionJson {
        DecompositionJson {
            rank: self.rank(),
            basis_states: self.basis.clone(),
            basis_state_names: self.basis.iter().map(|&s| model.states()[s].clone()).collect(),
            core_tests: self.tests.iter().map(test_triples).collect(),
            matrix: self
                .m
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            inverse_condition: self.inverse_condition,
        }
    }
}

fn test_triples(t: &Test) -> Vec<[usize; 3]> {
    t.steps()
        .iter()
        .map(|s| [s.action, s.signal.observation, s.signal.reward])
        .collect()
}

/// Core tests are written as `(action, observation, reward-index)` triples.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DecompositionJson {
    pub rank: usize,
    pub basis_states: Vec<usize>,
    pub basis_state_names: Vec<String>,
    pub core_tests: Vec<Vec<[usize; 3]>>,
    pub matrix: Vec<Vec<f64>>,
    pub inverse_condition: f64,
}

/// Grows the basis one (state, extension test) pair at a time. Candidates are
/// scanned in (state, action, signal, test) order and the first violation wins.
pub fn discover_basis(
    model: &PomdpModel,
    config: DecompositionConfig,
) -> Result<CoreDecomposition, DecompositionError> {
    let ma = MultiplicityAutomaton::from_pomdp(model);
    let n = model.num_states();
    let nsym = model.num_symbols();
    let mut basis = vec![0usize];
    let mut tests = vec![Test::empty()];
    // column j holds P(t_j | s) for every state s
    let mut columns: Vec<DVector<f64>> = vec![ma.terminal().clone()];

    loop {
        let r = basis.len();
        let mt = DMatrix::from_fn(r, r, |i, j| columns[i][basis[j]]);
        let lu = mt.lu();
        // one-step extensions σ∘y, in (σ, y) order
        let extensions: Vec<DVector<f64>> = (0..nsym)
            .flat_map(|sym| columns.iter().map(move |c| (sym, c)))
            .map(|(sym, c)| ma.mu(sym) * c)
            .collect();

        let mut found = None;
        'scan: for b in (0..n).filter(|b| !basis.contains(b)) {
            let target = DVector::from_fn(r, |j, _| columns[j][b]);
            let Some(alpha) = lu.solve(&target) else {
                return Err(DecompositionError::Degenerate {
                    inverse_condition: 0.0,
                });
            };
            for (k, ext) in extensions.iter().enumerate() {
                let predicted: f64 = basis.iter().zip(alpha.iter()).map(|(&bi, a)| a * ext[bi]).sum();
                if (ext[b] - predicted).abs() > config.dep_tol {
                    found = Some((b, k));
                    break 'scan;
                }
            }
        }

        let Some((b, k)) = found else { break };
        let (sym, y) = (k / r, k % r);
        let step: Step = model.step_at(sym);
        basis.push(b);
        tests.push(tests[y].prepend(step));
        columns.push(extensions[k].clone());
        debug_assert!(basis.len() <= n);
    }

    let state_tests = DMatrix::from_fn(n, columns.len(), |s, j| columns[j][s]);
    let decomp = CoreDecomposition::assemble(basis, tests, state_tests, config);
    if !decomp.is_invertible() {
        return Err(DecompositionError::Degenerate {
            inverse_condition: decomp.inverse_condition,
        });
    }
    Ok(decomp)
}

/// One basis replacement performed by the spanner search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Swap {
    pub position: usize,
    pub removed: usize,
    pub added: usize,
}

/// A core decomposition whose basis is a 2-barycentric spanner of the states'
/// prediction vectors.
#[derive(Debug, Clone)]
pub struct SpannerBasis {
    core: CoreDecomposition,
    swaps: Vec<Swap>,
    /// `|det M|` before the first swap and after each one.
    det_ledger: Vec<f64>,
    ln_det_ledger: Vec<f64>,
}

impl SpannerBasis {
    pub fn core(&self) -> &CoreDecomposition {
        &self.core
    }

    pub fn rank(&self) -> usize {
        self.core.rank()
    }

    pub fn swaps(&self) -> &[Swap] {
        &self.swaps
    }

    pub fn det_ledger(&self) -> &[f64] {
        &self.det_ledger
    }

    pub fn ln_det_ledger(&self) -> &[f64] {
        &self.ln_det_ledger
    }

    pub fn bound(&self) -> f64 {
        SPANNER_BOUND
    }

    pub fn final_abs_det(&self) -> f64 {
        *self.det_ledger.last().unwrap()
    }

    pub fn to_json(&self, model: &PomdpModel) -> SpannerJson {
        SpannerJson {
            decomposition: self.core.to_json(model),
            spanner_bound: SPANNER_BOUND,
            abs_det: self.final_abs_det(),
            det_ledger: self.det_ledger.clone(),
            swaps: self.swaps.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SpannerJson {
    pub decomposition: DecompositionJson,
    pub spanner_bound: f64,
    pub abs_det: f64,
    pub det_ledger: Vec<f64>,
    pub swaps: Vec<Swap>,
}

/// Replaces basis rows by other states while some replacement more than
/// doubles `|det M|`. Candidates are scanned by state index, then basis
/// position; determinants are compared in log-magnitude.
pub fn improve_to_spanner(decomp: &CoreDecomposition) -> SpannerBasis {
    let n = decomp.state_tests.nrows();
    let r = decomp.rank();
    let mut basis = decomp.basis.clone();
    let mut m = decomp.m.clone();
    let mut current = LogDet::of(&m);
    let mut ln_det_ledger = vec![current.ln_abs];
    let mut swaps = Vec::new();
    let threshold = SPANNER_BOUND.ln();

    while swaps.len() < MAX_SWAPS {
        let mut best = None;
        'scan: for x in (0..n).filter(|x| !basis.contains(x)) {
            for i in 0..r {
                let mut candidate = m.clone();
                candidate.set_row(i, &decomp.state_tests.row(x));
                let ld = LogDet::of(&candidate);
                if ld.ln_abs - current.ln_abs > threshold {
                    best = Some((x, i, candidate, ld));
                    break 'scan;
                }
            }
        }
        let Some((x, i, candidate, ld)) = best else { break };
        swaps.push(Swap {
            position: i,
            removed: basis[i],
            added: x,
        });
        basis[i] = x;
        m = candidate;
        current = ld;
        ln_det_ledger.push(current.ln_abs);
    }

    let core = CoreDecomposition::assemble(basis, decomp.tests.clone(), decomp.state_tests.clone(), decomp.config);
    SpannerBasis {
        core,
        swaps,
        det_ledger: ln_det_ledger.iter().map(|l| l.exp()).collect(),
        ln_det_ledger,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{self, MultiplicityAutomaton};
    use crate::corpus;

    fn basis_of(m: &PomdpModel) -> CoreDecomposition {
        discover_basis(m, DecompositionConfig::default()).unwrap()
    }

    #[test]
    fn coin_has_rank_one() {
        let d = basis_of(&corpus::fair_coin());
        assert_eq!(d.rank(), 1);
        assert_eq!(d.basis(), &[0]);
        assert_eq!(d.tests(), &[Test::empty()]);
        assert_eq!(d.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn fully_observable_pair() {
        let m = corpus::fully_observable(2, 3);
        let d = basis_of(&m);
        assert_eq!(d.rank(), 2);
        assert_eq!(d.tests()[1].len(), 1);
        assert_eq!(linalg::numerical_rank(d.matrix(), DEFAULT_RANK_TOL), 2);
        let ma = MultiplicityAutomaton::from_pomdp(&m);
        assert_eq!(automaton::stabilized_rank(&ma, 2, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn tiger_rank_two_matches_hankel() {
        let m = corpus::tiger();
        let d = basis_of(&m);
        assert_eq!(d.rank(), 2);
        let ma = MultiplicityAutomaton::from_pomdp(&m);
        assert_eq!(
            linalg::numerical_rank(&automaton::state_hankel(&ma, 3), DEFAULT_RANK_TOL),
            2
        );
    }

    #[test]
    fn lambda_column_is_ones() {
        let d = basis_of(&corpus::split_tiger());
        assert!(d.matrix().column(0).iter().all(|&x| x == 1.0));
        assert_eq!(d.rank(), 2);
    }

    #[test]
    fn solve_reproduces_basis_rows() {
        let d = basis_of(&corpus::random_model(
            corpus::RandomSpec {
                states: 4,
                actions: 2,
                observations: 2,
                rewards: 2,
                discount: 0.5,
            },
            17,
        ));
        let r = d.rank();
        for i in 0..r {
            let row = d.matrix().row(i).transpose();
            let c = d.solve_coefficients(&row).unwrap();
            for j in 0..r {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((c.alpha[j] - expect).abs() < 1e-9);
            }
        }
        if r >= 2 {
            let mid = (d.matrix().row(0) + d.matrix().row(1)).transpose() * 0.5;
            let c = d.solve_coefficients(&mid).unwrap();
            assert!((c.alpha[0] - 0.5).abs() < 1e-9 && (c.alpha[1] - 0.5).abs() < 1e-9);
            assert!(c.alpha.iter().skip(2).all(|a| a.abs() < 1e-9));
        }
        assert!(matches!(
            d.solve_coefficients(&DVector::zeros(r + 1)),
            Err(DecompositionError::Dimension { .. })
        ));
    }

    #[test]
    fn tiger_uniform_coefficients_predict_held_out_tests() {
        let m = corpus::tiger();
        let d = basis_of(&m);
        let b = BeliefState::uniform(2);
        let alpha = d.coefficients_of(&b).unwrap().alpha;
        let held_out: Vec<Test> = automaton::all_tests(&m, 3)
            .into_iter()
            .filter(|t| !d.tests().contains(t))
            .step_by(97)
            .take(10)
            .collect();
        assert_eq!(held_out.len(), 10);
        for t in &held_out {
            let combined: f64 = d
                .basis()
                .iter()
                .zip(alpha.iter())
                .map(|(&s, a)| a * m.sequence_probability(&BeliefState::point(2, s), t))
                .sum();
            assert!((combined - m.sequence_probability(&b, t)).abs() < 1e-10);
        }
    }

    #[test]
    fn full_basis_needs_no_swaps() {
        let d = basis_of(&corpus::tiger());
        let s = improve_to_spanner(&d);
        assert!(s.swaps().is_empty());
        assert_eq!(s.core().basis(), d.basis());
    }

    #[test]
    fn near_duplicate_pair_is_swapped_out() {
        let m = corpus::near_duplicate(1e-3);
        let d = basis_of(&m);
        assert_eq!(d.basis(), &[0, 1]);
        let s = improve_to_spanner(&d);
        assert!(!s.swaps().is_empty());
        for w in s.det_ledger().windows(2) {
            assert!(w[1] >= 2.0 * w[0]);
        }
        assert!(s.core().basis().contains(&2));
        assert!(d.max_state_coefficient().unwrap() > 100.0);
        assert!(s.core().max_state_coefficient().unwrap() <= SPANNER_BOUND + 1e-6);
    }
}
