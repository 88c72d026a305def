//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails. Flagged observations are
//! printed but never fail the run.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use mapomdp::automaton::{all_tests, contains_ab, stabilized_rank, test_word, MultiplicityAutomaton};
use mapomdp::baseline::plan_baseline;
use mapomdp::corpus::{self, RandomSpec};
use mapomdp::decomposition::{discover_basis, improve_to_spanner, DecompositionConfig};
use mapomdp::linalg::DEFAULT_RANK_TOL;
use mapomdp::modified_mdp::{self, build_grid, precompute_dynamics, GridConfig, GridMode, PlanConfig};
use mapomdp::oracle::{horizon_for_slack, Oracle, OracleConfig};
use mapomdp::pomdp::{BeliefState, PomdpModel, Step, Test};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    summary: String,
    flags: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, summary: impl Into<String>) -> Self {
        Outcome {
            pass,
            summary: summary.into(),
            flags: Vec::new(),
        }
    }
}

fn corpus_models() -> Vec<(String, PomdpModel)> {
    let mut v = vec![
        ("tiger".to_string(), corpus::tiger()),
        ("fair-coin".into(), corpus::fair_coin()),
        ("fully-observable-3".into(), corpus::fully_observable(3, 1)),
        ("cycle-4".into(), corpus::deterministic_cycle(4)),
        ("near-duplicate".into(), corpus::near_duplicate(1e-3)),
        ("duplicated-states".into(), corpus::duplicated_states(3)),
        ("split-tiger".into(), corpus::split_tiger()),
        ("replicated-tiger".into(), corpus::replicated_tiger()),
    ];
    for seed in 0..4 {
        v.push((format!("random-{seed}"), corpus::random_model(desk_spec(seed), 100 + seed)));
    }
    v
}

/// Random models small enough for the exact oracle: |A| = |O| = |R| = 2.
fn desk_spec(seed: u64) -> RandomSpec {
    RandomSpec {
        states: 2 + (seed % 3) as usize,
        actions: 2,
        observations: 2,
        rewards: 2,
        discount: 0.5,
    }
}

fn planning_corpus() -> Vec<(String, PomdpModel)> {
    let mut v = vec![("tiger".to_string(), corpus::tiger())];
    for seed in 0..10 {
        v.push((format!("random-{seed}"), corpus::random_model(desk_spec(seed), 100 + seed)));
    }
    v
}

fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> BeliefState {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-12).collect();
    BeliefState::from_weights(w).unwrap()
}

fn random_test(rng: &mut ChaCha8Rng, m: &PomdpModel, max_len: usize) -> Test {
    let len = rng.gen_range(1..=max_len);
    Test(
        (0..len)
            .map(|_| m.step_at(rng.gen_range(0..m.num_symbols())))
            .collect::<Vec<Step>>(),
    )
}

fn a1() -> Outcome {
    let start = Instant::now();
    let max = RandomSpec {
        states: 6,
        actions: 3,
        observations: 3,
        rewards: 2,
        discount: 0.9,
    };
    let mut worst: f64 = 0.0;
    let mut words = 0usize;
    for seed in 0..50 {
        let m = corpus::random_model_within(max, 1, seed);
        let ma = MultiplicityAutomaton::from_pomdp(&m);
        for t in all_tests(&m, 4) {
            let f = ma.evaluate(&test_word(&m, &t)).unwrap();
            let p = m.sequence_probability(m.initial_belief(), &t);
            worst = worst.max((f - p).abs());
            words += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-10 && secs <= 60.0,
        format!("50 models, {words} words, max |f_MA - filter| = {worst:.2e} (tol 1e-10), {secs:.1}s (limit 60s)"),
    )
}

fn a2() -> Outcome {
    let ma = contains_ab();
    let mut checked = 0;
    let mut mismatches = 0;
    let mut level: Vec<Vec<usize>> = vec![vec![]];
    for _ in 1..=5 {
        let mut next = Vec::new();
        for w in &level {
            for s in 0..4 {
                let mut x = w.clone();
                x.push(s);
                next.push(x);
            }
        }
        for w in &next {
            let expect = if w.windows(2).any(|p| p == [0, 1]) { 1.0 } else { 0.0 };
            if ma.evaluate(w).unwrap() != expect {
                mismatches += 1;
            }
            checked += 1;
        }
        level = next;
    }
    Outcome::new(
        checked == 1364 && mismatches == 0,
        format!("{checked} strings of length 1..=5, {mismatches} mismatches"),
    )
}

fn a3() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m) in corpus_models() {
        let d = discover_basis(&m, DecompositionConfig::default()).unwrap();
        let ma = MultiplicityAutomaton::from_pomdp(&m);
        let depth = if m.num_symbols() > 8 { 3 } else { 4 };
        let hankel = stabilized_rank(&ma, depth, DEFAULT_RANK_TOL);
        let ok = d.rank() <= m.num_states() && d.rank() == hankel;
        pass &= ok;
        parts.push(format!("{name}: r={} n={} hankel={hankel}", d.rank(), m.num_states()));
    }
    let dup = discover_basis(&corpus::duplicated_states(3), DecompositionConfig::default()).unwrap();
    pass &= dup.rank() <= 3;
    Outcome::new(pass, format!("duplicated-states r={} (<= 3); {}", dup.rank(), parts.join("; ")))
}

fn a4() -> Outcome {
    let mut pass = true;
    let mut flags = Vec::new();
    let mut worst_coeff: f64 = 0.0;
    let mut worst_ratio = f64::INFINITY;
    let mut total_swaps = 0;
    for (name, m) in corpus_models().into_iter().chain([("near-duplicate-1e-6".into(), corpus::near_duplicate(1e-6))]) {
        let d = discover_basis(&m, DecompositionConfig::default()).unwrap();
        let s = improve_to_spanner(&d);
        let coeff = s.core().max_state_coefficient().unwrap();
        worst_coeff = worst_coeff.max(coeff);
        pass &= coeff <= 2.0 + 1e-6;
        for w in s.ln_det_ledger().windows(2) {
            let ratio = (w[1] - w[0]).exp();
            worst_ratio = worst_ratio.min(ratio);
            pass &= w[1] > w[0] && ratio >= 2.0 - 1e-9;
        }
        let r = s.rank() as f64;
        let ceiling = (5.0 * r * (r.log2() + 4.0).ceil()) as usize;
        total_swaps += s.swaps().len();
        if s.swaps().len() > ceiling {
            flags.push(format!("{name}: {} swaps exceeds ceiling {ceiling}", s.swaps().len()));
        }
    }
    let ratio = if worst_ratio.is_finite() {
        format!("{worst_ratio:.3}")
    } else {
        "n/a".into()
    };
    let mut o = Outcome::new(
        pass,
        format!(
            "max coefficient {worst_coeff:.6} (<= 2 + 1e-6), min det ratio per swap {ratio} (>= 2), {total_swaps} swaps in total"
        ),
    );
    o.flags = flags;
    o
}

fn a5_a6() -> (Outcome, Outcome) {
    let (epsilon, delta, slack_req) = (0.1, 0.05, 1e-2);
    let (mut p5, mut p6) = (true, true);
    let (mut s5, mut s6) = (Vec::new(), Vec::new());
    let mut flags5 = Vec::new();
    for (name, m) in planning_corpus() {
        let gamma = m.discount();
        let h = horizon_for_slack(gamma, slack_req).unwrap();
        let slack = mapomdp::oracle::truncation_slack(gamma, h);
        let planner = modified_mdp::plan(&m, PlanConfig::new(epsilon, 1e-4)).unwrap();
        let base = plan_baseline(&m, delta, 1e-4, None).unwrap();
        let mut o = Oracle::new(&m, OracleConfig::default());
        let b0 = m.initial_belief();
        let (opt, _) = o.exact_value(b0, h).unwrap();
        let pv = o.evaluate_policy(|b| planner.act(b), b0, h).unwrap();
        let bv = o.evaluate_policy(|b| base.act(b), b0, h).unwrap();
        let bound5 = epsilon / (1.0 - gamma).powi(4);
        let bound6 = 2.0 * delta / (1.0 - gamma).powi(3);
        let (gap5, gap6) = (opt - pv, opt - bv);
        p5 &= pv >= opt - bound5 - 2.0 * slack;
        p6 &= bv >= opt - bound6 - 2.0 * slack;
        s5.push(format!("{name} gap {gap5:.4}"));
        s6.push(format!("{name} gap {gap6:.4}"));
        if gap5 > 0.05 / (1.0 - gamma) {
            flags5.push(format!("{name}: gap {gap5:.4} > {:.4}", 0.05 / (1.0 - gamma)));
        }
    }
    let mut o5 = Outcome::new(
        p5,
        format!("eps=0.1, slack<=1e-2, bound eps/(1-g)^4 (25.6 at g=0.75, 1.6 at g=0.5); {}", s5.join(", ")),
    );
    o5.flags = flags5;
    let o6 = Outcome::new(
        p6,
        format!("delta=0.05, bound 2*delta/(1-g)^3 (6.4 at g=0.75, 0.8 at g=0.5); {}", s6.join(", ")),
    );
    (o5, o6)
}

fn a7() -> Outcome {
    // slack 1e-3 forces long horizons, so the random models use small discounts
    let mut models = vec![("tiger".to_string(), corpus::tiger())];
    models.push((
        "random-r1".into(),
        corpus::random_model(
            RandomSpec {
                states: 3,
                actions: 2,
                observations: 2,
                rewards: 1,
                discount: 0.3,
            },
            200,
        ),
    ));
    for seed in 0..2 {
        let spec = RandomSpec {
            discount: 0.2,
            ..desk_spec(seed + 1)
        };
        models.push((format!("random-{seed}"), corpus::random_model(spec, 201 + seed)));
    }
    let mut violations = 0;
    let mut worst_margin = f64::NEG_INFINITY;
    let mut pairs = 0;
    let mut horizons = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (name, m) in &models {
        let gamma = m.discount();
        let h = horizon_for_slack(gamma, 1e-3).unwrap();
        horizons.push(format!("{name} H={h}"));
        let n = m.num_states();
        for _ in 0..100 {
            let x = random_belief(&mut rng, n);
            let y = random_belief(&mut rng, n);
            // a fresh oracle per pair keeps the memo from accumulating unrelated beliefs
            let mut o = Oracle::new(m, OracleConfig::default());
            let allowed = x.l1_distance(&y) / (1.0 - gamma) + 2e-3;
            for a in 0..m.num_actions() {
                let diff = (o.exact_q(&x, a, h).unwrap() - o.exact_q(&y, a, h).unwrap()).abs();
                worst_margin = worst_margin.max(diff - allowed);
                if diff > allowed {
                    violations += 1;
                }
            }
            pairs += 1;
        }
    }
    Outcome::new(
        violations == 0,
        format!(
            "{pairs} pairs ({}), {violations} violations, max (|dQ| - bound) = {worst_margin:.3e}",
            horizons.join(", ")
        ),
    )
}

fn a8() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m, eps) in [
        ("fair-coin", corpus::fair_coin(), 0.1),
        ("tiger", corpus::tiger(), 0.5),
        ("tiger", corpus::tiger(), 0.1),
        ("fully-observable-2", corpus::fully_observable(2, 5), 0.25),
    ] {
        let s = improve_to_spanner(&discover_basis(&m, DecompositionConfig::default()).unwrap());
        let d = precompute_dynamics(&m, &s);
        let r = s.rank();
        let mut cfg = GridConfig::new(eps);
        cfg.mode = GridMode::Full;
        let full = build_grid(&m, &s, &d, cfg).unwrap();
        cfg.mode = GridMode::Reachable;
        let reach = build_grid(&m, &s, &d, cfg).unwrap();
        let expect = (2 * (2.0 * r as f64 / eps + 1e-9).floor() as usize + 1).pow(r as u32);
        let full_set: HashSet<&Vec<i64>> = full.mdp.labels.iter().collect();
        let subset = reach.mdp.labels.iter().all(|l| full_set.contains(l));
        pass &= r <= 2 && full.num_states() == expect && subset;
        parts.push(format!(
            "{name} r={r} eps={eps}: full {} (expected {expect}), reachable {} subset={subset}",
            full.num_states(),
            reach.num_states()
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn a9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let model = concat!(env!("CARGO_MANIFEST_DIR"), "/data/tiger.POMDP");
    let run = |tag: &str| -> (u8, Vec<u8>, Vec<u8>) {
        let report = dir.path().join(format!("report-{tag}.json"));
        let policy = dir.path().join(format!("policy-{tag}.json"));
        let code = mapomdp::cli::run([
            "mapomdp",
            "plan",
            model,
            "--no-timings",
            "--oracle",
            "--rollouts",
            "20",
            "--seed",
            "42",
            "--json-out",
            report.to_str().unwrap(),
            "--policy-out",
            policy.to_str().unwrap(),
        ]);
        (
            code,
            std::fs::read(&report).unwrap_or_default(),
            std::fs::read(&policy).unwrap_or_default(),
        )
    };
    let (c1, r1, p1) = run("a");
    let (c2, r2, p2) = run("b");
    let pass = c1 == 0 && c2 == 0 && !r1.is_empty() && !p1.is_empty() && r1 == r2 && p1 == p2;
    Outcome::new(
        pass,
        format!(
            "exit codes {c1}/{c2}; report {} bytes identical={}; policy {} bytes identical={}",
            r1.len(),
            r1 == r2,
            p1.len(),
            p1 == p2
        ),
    )
}

fn a10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let max = RandomSpec {
        states: 5,
        actions: 3,
        observations: 3,
        rewards: 2,
        discount: 0.9,
    };
    let (mut consistency, mut linearity, mut chain): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for case in 0..1000u64 {
        let m = corpus::random_model_within(max, 1, 10_000 + case);
        let n = m.num_states();
        let b = random_belief(&mut rng, n);

        // filter consistency: signal probabilities sum to 1 and each posterior is the normalized joint
        let a = rng.gen_range(0..m.num_actions());
        let joint = m.joint_successors(&b, a);
        let mut total = 0.0;
        for z in m.signals() {
            let f = m.belief_update(&b, a, z);
            total += f.probability;
            let u = &joint[m.signal_index(z)];
            if let Some(post) = f.posterior {
                let p: f64 = u.iter().sum();
                consistency = consistency.max((post.as_slice().iter().sum::<f64>() - 1.0).abs());
                for (x, y) in post.as_slice().iter().zip(u) {
                    consistency = consistency.max((x * p - y).abs());
                }
            }
        }
        consistency = consistency.max((total - 1.0).abs());

        // linearity in the starting belief
        let x = random_belief(&mut rng, n);
        let lambda: f64 = rng.gen();
        let mixed = b.mix(&x, lambda);
        let t = random_test(&mut rng, &m, 4);
        let lhs = m.sequence_probability(&mixed, &t);
        let rhs = lambda * m.sequence_probability(&b, &t) + (1.0 - lambda) * m.sequence_probability(&x, &t);
        linearity = linearity.max((lhs - rhs).abs());

        // chain rule through the filtered belief
        let t1 = random_test(&mut rng, &m, 2);
        let t2 = random_test(&mut rng, &m, 2);
        let whole = m.sequence_probability(&b, &t1.concat(&t2));
        let p1 = m.sequence_probability(&b, &t1);
        let mut mid = b.clone();
        for s in t1.steps() {
            match m.belief_update(&mid, s.action, s.signal).posterior {
                Some(p) => mid = p,
                None => break,
            }
        }
        let expect = if p1 > 0.0 { p1 * m.sequence_probability(&mid, &t2) } else { 0.0 };
        chain = chain.max((whole - expect).abs());
    }
    Outcome::new(
        consistency <= 1e-10 && linearity <= 1e-10 && chain <= 1e-10,
        format!(
            "1000 cases each: consistency {consistency:.2e}, linearity {linearity:.2e}, chain rule {chain:.2e} (tol 1e-10)"
        ),
    )
}

const IDS: [&str; 10] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10"];

fn main() -> ExitCode {
    // `cargo test <filter>` passes its filter through: criterion ids select criteria,
    // any other filter that does not name this target skips it
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let picked: Vec<&str> = IDS
        .into_iter()
        .filter(|id| args.iter().any(|a| a.eq_ignore_ascii_case(id)))
        .collect();
    if !args.is_empty() && picked.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let wanted = |id: &str| picked.is_empty() || picked.contains(&id);
    let mut failed = 0;
    let mut report = |id: &str, o: Outcome, secs: f64| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{id} {tag} ({secs:.1}s): {}", o.summary);
        for f in o.flags {
            println!("{id} FLAG: {f}");
        }
        if !o.pass {
            failed += 1;
        }
    };
    let timed = |f: fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed().as_secs_f64())
    };
    for (id, f) in [("A1", a1 as fn() -> Outcome), ("A2", a2), ("A3", a3), ("A4", a4)] {
        if wanted(id) {
            let (o, s) = timed(f);
            report(id, o, s);
        }
    }
    if wanted("A5") || wanted("A6") {
        // both criteria share one set of plans and oracle runs
        let t = Instant::now();
        let (o5, o6) = a5_a6();
        let s = t.elapsed().as_secs_f64();
        report("A5", o5, s);
        report("A6", o6, s);
    }
    for (id, f) in [("A7", a7 as fn() -> Outcome), ("A8", a8), ("A9", a9), ("A10", a10)] {
        if wanted(id) {
            let (o, s) = timed(f);
            report(id, o, s);
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
