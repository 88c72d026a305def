//! Built-in models: the classic tiger and fair-coin files, hand-constructed
//! models with known rank structure, and a seeded random generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pomdp::{parse_pomdp, LoadOptions, ModelParts, PomdpModel, SignalKernel};

pub const TIGER_POMDP: &str = include_str!("../data/tiger.POMDP");
pub const FAIR_COIN_POMDP: &str = include_str!("../data/fair_coin.POMDP");

/// Tiger with discount 0.75 and rewards normalized from {-100, -1, 10}.
pub fn tiger() -> PomdpModel {
    parse_pomdp(TIGER_POMDP, LoadOptions::default()).expect("bundled tiger model parses")
}

/// One state, one action, two equally likely observations, reward 0.5.
pub fn fair_coin() -> PomdpModel {
    parse_pomdp(FAIR_COIN_POMDP, LoadOptions::default()).expect("bundled coin model parses")
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i}")).collect()
}

fn random_dist<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    // exponential spacings give a uniform draw from the simplex
    let w: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Parts of an `n`-state model whose observation names the arriving state.
/// Two actions with random transitions; the reward (0 or 1) is a random
/// function of (action, arriving state).
pub fn fully_observable_parts(n: usize, seed: u64) -> ModelParts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let na = 2;
    let transition: Vec<Vec<Vec<f64>>> = (0..na)
        .map(|_| (0..n).map(|_| random_dist(&mut rng, n)).collect())
        .collect();
    let kernel: Vec<Vec<Vec<f64>>> = (0..na)
        .map(|_| {
            (0..n)
                .map(|s2| {
                    let mut row = vec![0.0; n * 2];
                    row[s2 * 2 + usize::from(rng.gen_bool(0.5))] = 1.0;
                    row
                })
                .collect()
        })
        .collect();
    ModelParts {
        states: names("s", n),
        actions: names("a", na),
        observations: names("s", n),
        reward_values: vec![0.0, 1.0],
        transition,
        signal_kernel: SignalKernel::Arrival(kernel),
        discount: 0.75,
        initial_belief: vec![1.0 / n as f64; n],
        reward_scale: 1.0,
        reward_offset: 0.0,
    }
}

pub fn fully_observable(n: usize, seed: u64) -> PomdpModel {
    PomdpModel::new(fully_observable_parts(n, seed)).expect("valid fully observable model")
}

/// `n` states visited in a fixed cycle; one uninformative observation, reward 0.5.
pub fn deterministic_cycle(n: usize) -> PomdpModel {
    let transition = vec![(0..n)
        .map(|s| {
            let mut row = vec![0.0; n];
            row[(s + 1) % n] = 1.0;
            row
        })
        .collect()];
    PomdpModel::new(ModelParts {
        states: names("s", n),
        actions: vec!["step".into()],
        observations: vec!["none".into()],
        reward_values: vec![0.5],
        transition,
        signal_kernel: SignalKernel::Arrival(vec![vec![vec![1.0]; n]]),
        discount: 0.9,
        initial_belief: vec![1.0 / n as f64; n],
        reward_scale: 1.0,
        reward_offset: 0.0,
    })
    .expect("valid cycle model")
}

/// Dimensions and discount of a random model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub states: usize,
    pub actions: usize,
    pub observations: usize,
    pub rewards: usize,
    pub discount: f64,
}

/// A dense random model whose signal depends on the action and arriving state.
/// Reward values are spread evenly over [0, 1].
pub fn random_model(spec: RandomSpec, seed: u64) -> PomdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let RandomSpec {
        states: n,
        actions: na,
        observations: no,
        rewards: nr,
        discount,
    } = spec;
    let transition = (0..na)
        .map(|_| (0..n).map(|_| random_dist(&mut rng, n)).collect())
        .collect();
    let kernel = (0..na)
        .map(|_| (0..n).map(|_| random_dist(&mut rng, no * nr)).collect())
        .collect();
    let reward_values = if nr == 1 {
        vec![0.5]
    } else {
        (0..nr).map(|k| k as f64 / (nr - 1) as f64).collect()
    };
    PomdpModel::new(ModelParts {
        states: names("s", n),
        actions: names("a", na),
        observations: names("o", no),
        reward_values,
        transition,
        signal_kernel: SignalKernel::Arrival(kernel),
        discount,
        initial_belief: random_dist(&mut rng, n),
        reward_scale: 1.0,
        reward_offset: 0.0,
    })
    .expect("random model is valid by construction")
}

/// Draws dimensions uniformly from `1..=max` (states from `min_states..=max`)
/// and builds the model; used for the randomized equivalence sweeps.
pub fn random_model_within(
    max: RandomSpec,
    min_states: usize,
    seed: u64,
) -> PomdpModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let spec = RandomSpec {
        states: rng.gen_range(min_states..=max.states),
        actions: rng.gen_range(1..=max.actions),
        observations: rng.gen_range(1..=max.observations),
        rewards: rng.gen_range(1..=max.rewards),
        discount: max.discount,
    };
    random_model(spec, seed)
}

/// Splits state `s` into two behaviourally identical copies. Mass that used
/// to enter `s` from state `i` goes to the copy with probability
/// `weights[i]`; both copies share outgoing rows and signal kernels.
pub fn split_state(model: &PomdpModel, s: usize, weights: &[f64]) -> PomdpModel {
    let n = model.num_states();
    assert_eq!(weights.len(), n);
    let na = model.num_actions();
    // new index n is the copy of s
    let origin = |i: usize| if i == n { s } else { i };
    let transition: Vec<Vec<Vec<f64>>> = (0..na)
        .map(|a| {
            (0..=n)
                .map(|i| {
                    let src = origin(i);
                    let mut row: Vec<f64> = model.transition_row(src, a).to_vec();
                    let into = row[s];
                    row[s] = into * (1.0 - weights[src]);
                    row.push(into * weights[src]);
                    row
                })
                .collect()
        })
        .collect();
    let kernel: Vec<Vec<Vec<Vec<f64>>>> = (0..na)
        .map(|a| {
            (0..=n)
                .map(|i| {
                    (0..=n)
                        .map(|j| model.signal_row(origin(i), a, origin(j)).to_vec())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut b0 = model.initial_belief().as_slice().to_vec();
    let half = b0[s] / 2.0;
    b0[s] = half;
    b0.push(half);
    let mut states = model.states().to_vec();
    states.push(format!("{}'", model.states()[s]));
    PomdpModel::new(ModelParts {
        states,
        actions: model.actions().to_vec(),
        observations: model.observations().to_vec(),
        reward_values: model.reward_values().to_vec(),
        transition,
        signal_kernel: SignalKernel::Joint(kernel),
        discount: model.discount(),
        initial_belief: b0,
        reward_scale: model.reward_scale(),
        reward_offset: model.reward_offset(),
    })
    .expect("splitting preserves validity")
}

/// Three states of rank two: state 1 behaves like state 0 with probability
/// `1 - eta` and like state 2 with probability `eta`. The basis search picks
/// states 0 and 1, a nearly dependent pair that the spanner step replaces.
pub fn near_duplicate(eta: f64) -> PomdpModel {
    let a_row = [0.7, 0.0, 0.3];
    let b_row = [0.2, 0.0, 0.8];
    let mix: Vec<f64> = a_row
        .iter()
        .zip(&b_row)
        .map(|(x, y)| (1.0 - eta) * x + eta * y)
        .collect();
    let obs_a = [0.9, 0.1];
    let obs_b = [0.2, 0.8];
    PomdpModel::new(ModelParts {
        states: vec!["a".into(), "mix".into(), "b".into()],
        actions: vec!["go".into()],
        observations: vec!["x".into(), "y".into()],
        reward_values: vec![0.0, 1.0],
        transition: vec![vec![a_row.to_vec(), mix, b_row.to_vec()]],
        // reward 1 exactly when observing x
        signal_kernel: SignalKernel::Arrival(vec![vec![
            vec![0.0, obs_a[0], obs_a[1], 0.0],
            vec![0.0, obs_a[0], obs_a[1], 0.0],
            vec![0.0, obs_b[0], obs_b[1], 0.0],
        ]]),
        discount: 0.75,
        initial_belief: vec![1.0 / 3.0; 3],
        reward_scale: 1.0,
        reward_offset: 0.0,
    })
    .expect("valid near-duplicate model")
}

/// A random 3-state model with one state split into two indistinguishable
/// copies: four hidden states, Hankel rank at most three.
pub fn duplicated_states(seed: u64) -> PomdpModel {
    let base = random_model(
        RandomSpec {
            states: 3,
            actions: 2,
            observations: 2,
            rewards: 2,
            discount: 0.75,
        },
        seed,
    );
    split_state(&base, 2, &[0.2, 0.5, 0.9])
}

/// Tiger with both hidden states split into copies entered at different
/// rates: four hidden states whose Hankel rank is still two.
pub fn split_tiger() -> PomdpModel {
    let t = tiger();
    let once = split_state(&t, 0, &[0.3, 0.8]);
    split_state(&once, 1, &[0.6, 0.1, 0.25])
}

/// Tiger whose two hidden states are each replicated into four copies with
/// distinct entry rates: eight hidden states, Hankel rank two.
pub fn replicated_tiger() -> PomdpModel {
    let mut m = tiger();
    let mut k = 0;
    while m.num_states() < 8 {
        let n = m.num_states();
        let weights: Vec<f64> = (0..n)
            .map(|i| ((i * 7 + k * 3) % 10) as f64 / 10.0 * 0.8 + 0.1)
            .collect();
        m = split_state(&m, k % 2, &weights);
        k += 1;
    }
    m
}
