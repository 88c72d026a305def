//! Exact finite-horizon expectimax on the true belief MDP.
//!
//! With rewards in [0, 1] the infinite-horizon value lies in
//! `[V_H, V_H + γ^{H+1}/(1−γ)]`, so every comparison against this oracle
//! carries that truncation slack explicitly. Intended for small models only.

use std::collections::HashMap;

use thiserror::Error;

use crate::pomdp::{BeliefState, PomdpModel};

pub const DEFAULT_BUDGET: u64 = 100_000_000;
/// Belief coordinates are rounded to this resolution to form memo keys.
pub const MEMO_QUANTUM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle exceeded its budget of {budget} node expansions at horizon {horizon}")]
    Budget { budget: u64, horizon: usize },
    #[error("cannot reach truncation slack {slack} with discount {discount}")]
    Slack { slack: f64, discount: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub memoize: bool,
    /// Maximum number of node expansions (memo misses) per oracle.
    pub budget: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            memoize: true,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// `γ^{H+1} / (1−γ)`.
pub fn truncation_slack(discount: f64, horizon: usize) -> f64 {
    discount.powi(horizon as i32 + 1) / (1.0 - discount)
}

/// Smallest `H` whose truncation slack is at most `slack`.
pub fn horizon_for_slack(discount: f64, slack: f64) -> Result<usize, OracleError> {
    if slack.is_nan() || slack <= 0.0 || !(0.0..1.0).contains(&discount) {
        return Err(OracleError::Slack { slack, discount });
    }
    if discount == 0.0 {
        return Ok(0);
    }
    let mut h = ((slack * (1.0 - discount)).ln() / discount.ln() - 1.0).floor().max(0.0) as usize;
    while truncation_slack(discount, h) > slack {
        h += 1;
    }
    while h > 0 && truncation_slack(discount, h - 1) <= slack {
        h -= 1;
    }
    Ok(h)
}

fn memo_key(b: &BeliefState, depth: usize) -> (Vec<i64>, usize) {
    (
        b.as_slice().iter().map(|&x| (x / MEMO_QUANTUM).round() as i64).collect(),
        depth,
    )
}

/// Expectimax solver with a persistent memo of optimal values.
pub struct Oracle<'m> {
    model: &'m PomdpModel,
    config: OracleConfig,
    memo: HashMap<(Vec<i64>, usize), f64>,
    expansions: u64,
}

impl<'m> Oracle<'m> {
    pub fn new(model: &'m PomdpModel, config: OracleConfig) -> Self {
        Oracle {
            model,
            config,
            memo: HashMap::new(),
            expansions: 0,
        }
    }

    pub fn model(&self) -> &PomdpModel {
        self.model
    }

    /// Node expansions so far, counted against the budget.
    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    fn charge(&mut self, horizon: usize) -> Result<(), OracleError> {
        self.expansions += 1;
        if self.expansions > self.config.budget {
            return Err(OracleError::Budget {
                budget: self.config.budget,
                horizon,
            });
        }
        Ok(())
    }

    /// Continuation `Σ_z P(z | b, a) · V_{depth}(b'_z)`.
    fn continuation(&mut self, b: &BeliefState, a: usize, depth: usize, horizon: usize) -> Result<f64, OracleError> {
        let mut total = 0.0;
        for u in self.model.joint_successors(b, a) {
            let p: f64 = u.iter().sum();
            if p <= 0.0 {
                continue;
            }
            let post = BeliefState::from_weights(u).expect("positive mass");
            total += p * self.value_at(&post, depth, horizon)?;
        }
        Ok(total)
    }

    fn value_at(&mut self, b: &BeliefState, depth: usize, horizon: usize) -> Result<f64, OracleError> {
        let key = self.config.memoize.then(|| memo_key(b, depth));
        if let Some(v) = key.as_ref().and_then(|k| self.memo.get(k)) {
            return Ok(*v);
        }
        self.charge(horizon)?;
        let mut best = f64::NEG_INFINITY;
        for a in 0..self.model.num_actions() {
            best = best.max(self.q_at(b, a, depth, horizon)?);
        }
        if let Some(k) = key {
            self.memo.insert(k, best);
        }
        Ok(best)
    }

    fn q_at(&mut self, b: &BeliefState, a: usize, depth: usize, horizon: usize) -> Result<f64, OracleError> {
        let r = self.model.expected_reward(b, a);
        if depth == 0 {
            return Ok(r);
        }
        Ok(r + self.model.discount() * self.continuation(b, a, depth - 1, horizon)?)
    }

    /// `V_H*(b)` and the lowest-index maximizing first action.
    pub fn exact_value(&mut self, b: &BeliefState, horizon: usize) -> Result<(f64, usize), OracleError> {
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..self.model.num_actions() {
            let q = self.q_at(b, a, horizon, horizon)?;
            if q > best.0 {
                best = (q, a);
            }
        }
        Ok(best)
    }

    /// `Q_H(b, a)`: take `a` now, then act optimally for the remaining horizon.
    pub fn exact_q(&mut self, b: &BeliefState, a: usize, horizon: usize) -> Result<f64, OracleError> {
        self.q_at(b, a, horizon, horizon)
    }

    /// `H`-step value of a belief-to-action policy. Uses its own memo, so
    /// the policy must depend on the belief only.
    pub fn evaluate_policy<P>(&mut self, policy: P, b: &BeliefState, horizon: usize) -> Result<f64, OracleError>
    where
        P: Fn(&BeliefState) -> usize,
    {
        let mut memo = HashMap::new();
        self.policy_value(&policy, &mut memo, b, horizon, horizon)
    }

    fn policy_value<P>(
        &mut self,
        policy: &P,
        memo: &mut HashMap<(Vec<i64>, usize), f64>,
        b: &BeliefState,
        depth: usize,
        horizon: usize,
    ) -> Result<f64, OracleError>
    where
        P: Fn(&BeliefState) -> usize,
    {
        let key = self.config.memoize.then(|| memo_key(b, depth));
        if let Some(v) = key.as_ref().and_then(|k| memo.get(k)) {
            return Ok(*v);
        }
        self.charge(horizon)?;
        let a = policy(b);
        let mut v = self.model.expected_reward(b, a);
        if depth > 0 {
            let mut cont = 0.0;
            for u in self.model.joint_successors(b, a) {
                let p: f64 = u.iter().sum();
                if p <= 0.0 {
                    continue;
                }
                let post = BeliefState::from_weights(u).expect("positive mass");
                cont += p * self.policy_value(policy, memo, &post, depth - 1, horizon)?;
            }
            v += self.model.discount() * cont;
        }
        if let Some(k) = key {
            memo.insert(k, v);
        }
        Ok(v)
    }
}

pub fn exact_value(model: &PomdpModel, b: &BeliefState, horizon: usize) -> Result<(f64, usize), OracleError> {
    Oracle::new(model, OracleConfig::default()).exact_value(b, horizon)
}

pub fn exact_q(model: &PomdpModel, b: &BeliefState, a: usize, horizon: usize) -> Result<f64, OracleError> {
    Oracle::new(model, OracleConfig::default()).exact_q(b, a, horizon)
}

pub fn evaluate_policy<P>(model: &PomdpModel, policy: P, b: &BeliefState, horizon: usize) -> Result<f64, OracleError>
where
    P: Fn(&BeliefState) -> usize,
{
    Oracle::new(model, OracleConfig::default()).evaluate_policy(policy, b, horizon)
}
