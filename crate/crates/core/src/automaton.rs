//! Multiplicity automata over a finite alphabet, their construction from a
//! POMDP, and Hankel submatrices used to audit ranks.
//!
//! An automaton of size `r` assigns to a word `w = σ1…σk` the value
//! `ηᵀ μ_{σ1} ⋯ μ_{σk} γ` where `η` is the initial weight vector and `γ` the
//! terminal vector. For a POMDP, `μ_{(a,z)}(i, j) = P(s_j, z | s_i, a)`,
//! `γ` is all ones and `η` is the initial belief, so the value of a word is
//! the probability of the corresponding test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::pomdp::{BeliefState, PomdpModel, Step, Test};

#[derive(Debug, Error, PartialEq)]
pub enum AutomatonError {
    #[error("unknown symbol {0}")]
    UnknownSymbol(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("empty alphabet")]
    EmptyAlphabet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityAutomaton {
    alphabet: Vec<String>,
    mu: Vec<DMatrix<f64>>,
    terminal: DVector<f64>,
    initial: DVector<f64>,
}

impl MultiplicityAutomaton {
    pub fn new(
        alphabet: Vec<String>,
        mu: Vec<DMatrix<f64>>,
        terminal: DVector<f64>,
        initial: DVector<f64>,
    ) -> Result<Self, AutomatonError> {
        if alphabet.is_empty() {
            return Err(AutomatonError::EmptyAlphabet);
        }
        if mu.len() != alphabet.len() {
            return Err(AutomatonError::Dimension {
                expected: alphabet.len(),
                got: mu.len(),
            });
        }
        let r = terminal.len();
        for m in &mu {
            if m.nrows() != r || m.ncols() != r {
                return Err(AutomatonError::Dimension {
                    expected: r,
                    got: m.nrows().max(m.ncols()),
                });
            }
        }
        if initial.len() != r {
            return Err(AutomatonError::Dimension {
                expected: r,
                got: initial.len(),
            });
        }
        Ok(MultiplicityAutomaton {
            alphabet,
            mu,
            terminal,
            initial,
        })
    }

    /// Builds the automaton of a POMDP: one `n × n` matrix per
    /// (action, signal) symbol, all-ones terminal vector, initial belief as
    /// initial weights.
    pub fn from_pomdp(model: &PomdpModel) -> Self {
        let n = model.num_states();
        let mut alphabet = Vec::with_capacity(model.num_symbols());
        let mut mu = Vec::with_capacity(model.num_symbols());
        for sym in 0..model.num_symbols() {
            let step = model.step_at(sym);
            let z = model.signal_index(step.signal);
            alphabet.push(format!(
                "{}:{}:{}",
                model.actions()[step.action],
                model.observations()[step.signal.observation],
                step.signal.reward
            ));
            mu.push(DMatrix::from_fn(n, n, |i, j| {
                model.transition(i, step.action, j) * model.signal_prob(i, step.action, j, z)
            }));
        }
        MultiplicityAutomaton {
            alphabet,
            mu,
            terminal: DVector::from_element(n, 1.0),
            initial: DVector::from_column_slice(model.initial_belief().as_slice()),
        }
    }

    pub fn size(&self) -> usize {
        self.terminal.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn symbol(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == name)
    }

    pub fn mu(&self, symbol: usize) -> &DMatrix<f64> {
        &self.mu[symbol]
    }

    pub fn terminal(&self) -> &DVector<f64> {
        &self.terminal
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.initial
    }

    /// Translates symbol names to indices.
    pub fn word(&self, names: &[&str]) -> Result<Vec<usize>, AutomatonError> {
        names
            .iter()
            .map(|n| {
                self.symbol(n)
                    .ok_or_else(|| AutomatonError::UnknownSymbol((*n).to_string()))
            })
            .collect()
    }

    fn check_word(&self, word: &[usize]) -> Result<(), AutomatonError> {
        match word.iter().find(|&&s| s >= self.mu.len()) {
            Some(s) => Err(AutomatonError::UnknownSymbol(s.to_string())),
            None => Ok(()),
        }
    }

    /// `ηᵀ μ(w) γ`, accumulated as left-to-right vector-matrix products.
    pub fn evaluate(&self, word: &[usize]) -> Result<f64, AutomatonError> {
        self.weighted_value(&self.initial, word)
    }

    /// `bᵀ μ(w) γ` for an arbitrary row weighting `b`. With `b` a point mass
    /// on row `i` of a POMDP automaton this is the test probability from `s_i`.
    pub fn test_probability(&self, b: &[f64], word: &[usize]) -> Result<f64, AutomatonError> {
        if b.len() != self.size() {
            return Err(AutomatonError::Dimension {
                expected: self.size(),
                got: b.len(),
            });
        }
        self.weighted_value(&DVector::from_column_slice(b), word)
    }

    fn weighted_value(&self, start: &DVector<f64>, word: &[usize]) -> Result<f64, AutomatonError> {
        self.check_word(word)?;
        let mut row = start.clone();
        for &s in word {
            row = self.mu[s].tr_mul(&row);
        }
        Ok(row.dot(&self.terminal))
    }

    /// `μ(w) γ`: the value of `w` from every row at once, accumulated right to left.
    pub fn suffix_vector(&self, word: &[usize]) -> Result<DVector<f64>, AutomatonError> {
        self.check_word(word)?;
        let mut col = self.terminal.clone();
        for &s in word.iter().rev() {
            col = &self.mu[s] * col;
        }
        Ok(col)
    }

    /// Materialized `μ(w)`; the identity for the empty word.
    pub fn word_matrix(&self, word: &[usize]) -> Result<DMatrix<f64>, AutomatonError> {
        self.check_word(word)?;
        let r = self.size();
        Ok(word
            .iter()
            .fold(DMatrix::identity(r, r), |acc, &s| acc * &self.mu[s]))
    }

    pub fn to_json(&self) -> AutomatonJson {
        AutomatonJson {
            size: self.size(),
            alphabet: self.alphabet.clone(),
            mu: self
                .mu
                .iter()
                .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            terminal: self.terminal.iter().copied().collect(),
            initial: self.initial.iter().copied().collect(),
        }
    }
}

/// JSON form; `mu` is listed in alphabet order, each matrix as rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutomatonJson {
    pub size: usize,
    pub alphabet: Vec<String>,
    pub mu: Vec<Vec<Vec<f64>>>,
    pub terminal: Vec<f64>,
    pub initial: Vec<f64>,
}

impl AutomatonJson {
    pub fn into_automaton(self) -> Result<MultiplicityAutomaton, AutomatonError> {
        let r = self.size;
        let mut mu = Vec::with_capacity(self.mu.len());
        for m in &self.mu {
            if m.len() != r || m.iter().any(|row| row.len() != r) {
                return Err(AutomatonError::Dimension {
                    expected: r,
                    got: m.len(),
                });
            }
            mu.push(DMatrix::from_fn(r, r, |i, j| m[i][j]));
        }
        MultiplicityAutomaton::new(
            self.alphabet,
            mu,
            DVector::from_vec(self.terminal),
            DVector::from_vec(self.initial),
        )
    }
}

/// Symbol indices of a test in the automaton built by [`MultiplicityAutomaton::from_pomdp`].
pub fn test_word(model: &PomdpModel, t: &Test) -> Vec<usize> {
    t.steps().iter().map(|&s| model.symbol_index(s)).collect()
}

/// All tests of length at most `max_len`, shortest first, each length in
/// lexicographic symbol order.
pub fn all_tests(model: &PomdpModel, max_len: usize) -> Vec<Test> {
    let mut out = vec![Test::empty()];
    let mut level = vec![Test::empty()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(level.len() * model.num_symbols());
        for sym in 0..model.num_symbols() {
            let step: Step = model.step_at(sym);
            next.extend(level.iter().map(|t| t.prepend(step)));
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// A finite block of the Hankel matrix: rows are starting beliefs, columns
/// tests, entries `P(test | belief)`.
#[derive(Debug, Clone)]
pub struct HankelSubmatrix {
    pub row_labels: Vec<BeliefState>,
    pub col_labels: Vec<Test>,
    pub values: DMatrix<f64>,
}

impl HankelSubmatrix {
    pub fn rank(&self, rel_tol: f64) -> usize {
        linalg::numerical_rank(&self.values, rel_tol)
    }
}

pub fn hankel_submatrix(model: &PomdpModel, rows: &[BeliefState], cols: &[Test]) -> HankelSubmatrix {
    let values = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        model.sequence_probability(&rows[i], &cols[j])
    });
    HankelSubmatrix {
        row_labels: rows.to_vec(),
        col_labels: cols.to_vec(),
        values,
    }
}

/// Rows for every point-mass state, columns for every test of length at most
/// `max_len` with at least one nonzero entry. Columns are built by
/// prepending symbols to the previous level, so each costs one
/// matrix-vector product.
pub fn state_hankel(ma: &MultiplicityAutomaton, max_len: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = vec![ma.terminal().clone()];
    let mut level = cols.clone();
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(level.len() * ma.alphabet().len());
        for sym in 0..ma.alphabet().len() {
            for c in &level {
                let v = ma.mu(sym) * c;
                if v.iter().any(|x| *x != 0.0) {
                    next.push(v);
                }
            }
        }
        cols.extend(next.iter().cloned());
        level = next;
    }
    DMatrix::from_columns(&cols)
}

/// Rank of [`state_hankel`] for lengths `0..=max_len`.
pub fn state_hankel_ranks(ma: &MultiplicityAutomaton, max_len: usize, rel_tol: f64) -> Vec<usize> {
    (0..=max_len)
        .map(|l| linalg::numerical_rank(&state_hankel(ma, l), rel_tol))
        .collect()
}

/// Rank once it has held for two consecutive length bounds, or the rank at
/// `max_len` if it never settles.
pub fn stabilized_rank(ma: &MultiplicityAutomaton, max_len: usize, rel_tol: f64) -> usize {
    let ranks = state_hankel_ranks(ma, max_len, rel_tol);
    ranks
        .windows(2)
        .find(|w| w[0] == w[1])
        .map(|w| w[0])
        .unwrap_or(*ranks.last().unwrap())
}

/// The three-state automaton accepting words over {a, b, c, d} that contain "ab".
pub fn contains_ab() -> MultiplicityAutomaton {
    let m = |rows: [[f64; 3]; 3]| DMatrix::from_fn(3, 3, |i, j| rows[i][j]);
    let mu_a = m([[0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let mu_b = m([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]);
    let mu_c = m([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
    let mu_d = mu_c.clone();
    MultiplicityAutomaton::new(
        ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect(),
        vec![mu_a, mu_b, mu_c, mu_d],
        DVector::from_vec(vec![0.0, 0.0, 1.0]),
        DVector::from_vec(vec![1.0, 0.0, 0.0]),
    )
    .expect("fixed automaton is well formed")
}
