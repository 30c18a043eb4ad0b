//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Pass substrings as arguments to run a subset.

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nahaco_core::aco::{
    expert_heuristic, pheromone_update, solve, transition_probabilities, AcoParams, CostModel, ExpertGuide,
    HeuristicField, HeuristicSource, HeuristicWeights, PheromoneField, Tour,
};
use nahaco_core::bench::{brute_force_tsp, run_suite, InstanceSource, Method, MethodSpec, SuiteConfig};
use nahaco_core::neural::{forward, to_bytes, LearnedGuide, Mode, ModelConfig, ModelParams};
use nahaco_core::training::{carl_loss, rollout, train, Episode, InstanceFamily, TrainConfig};
use nahaco_core::warehouse::{gen_tsp_instance, gen_warehouse_instance, TrafficState, WarehouseInstance};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn random_traffic(inst: &WarehouseInstance, rng: &mut ChaCha8Rng) -> TrafficState {
    let mut t = TrafficState::new(inst);
    for f in &mut t.flow {
        *f = rng.gen_range(0..6) as f64;
    }
    t
}

fn oracle_optimality() -> Verdict {
    let start = Instant::now();
    let weights = HeuristicWeights::default();
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let inst = gen_tsp_instance(8, seed, 7).unwrap();
        let optimum = brute_force_tsp(&inst, &weights, 0.0).unwrap().cost;
        let cost = CostModel::expert(&inst, &weights, 0.0).unwrap();
        let aco = AcoParams { n_ants: 100, n_iterations: 200, delta: 0.0, seed, ..AcoParams::default() };
        let best = solve(&inst, &cost, &mut ExpertGuide(cost.h.clone()), &aco).unwrap().best.cost;
        let gap = (best - optimum) / optimum;
        worst = worst.max(gap);
        if gap <= 0.02 {
            within += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        within >= 9 && secs < 60.0,
        format!("{within}/10 within 2% of the optimum, worst gap {:.3}%, {secs:.1}s", 100.0 * worst),
    )
}

fn probability_normalization() -> Verdict {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let states = std::cell::Cell::new(0usize);
    let worst = std::cell::Cell::new(0.0f64);
    let strategy = (3usize..40, any::<u64>(), 0.0f64..3.0, 0.0f64..5.0, any::<u64>());
    let result = runner.run(&strategy, |(n, seed, alpha, beta, state_seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(state_seed);
        let k = rng.gen_range(1..n);
        let inst = gen_tsp_instance(n, seed, k).unwrap();
        let tau = PheromoneField { tau: (0..inst.n_edges()).map(|_| 10f64.powf(rng.gen_range(-6.0..3.0))).collect() };
        let eta = HeuristicField::new(
            (0..inst.n_edges()).map(|_| 10f64.powf(rng.gen_range(-4.0..4.0))).collect(),
            HeuristicSource::Expert,
        )
        .unwrap();
        let current = rng.gen_range(0..n);
        let mut visited: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        visited[current] = true;
        let (open, _) = inst.neighbors(current)[rng.gen_range(0..inst.degree(current))];
        visited[open] = false;
        let params = AcoParams { alpha, beta, ..AcoParams::default() };
        let moves = transition_probabilities(&inst, current, &visited, &tau, &eta, &params).unwrap();
        let sum: f64 = moves.iter().map(|m| m.prob).sum();
        states.set(states.get() + 1);
        worst.set(worst.get().max((sum - 1.0).abs()));
        prop_assert!((sum - 1.0).abs() <= 1e-9, "sum {}", sum);
        Ok(())
    });
    let eq2_ok = result.is_ok() && states.get() >= 1000;

    let params = ModelParams::new(ModelConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut attention_worst: f64 = 0.0;
    let mut rows = 0;
    for i in 0..100 {
        let inst = if i % 4 == 3 {
            gen_warehouse_instance(3, 4, 2, rng.gen_range(5..20), rng.gen()).unwrap()
        } else {
            let n = rng.gen_range(5..40);
            gen_tsp_instance(n, rng.gen(), rng.gen_range(2..n.min(12))).unwrap()
        };
        let traffic = random_traffic(&inst, &mut rng);
        let mode = if i % 2 == 0 { Mode::Train } else { Mode::Eval };
        let pred = forward(&inst, &traffic, &params, mode).unwrap();
        for row in pred.attention().unwrap() {
            attention_worst = attention_worst.max((row.iter().sum::<f64>() - 1.0).abs());
            rows += 1;
        }
    }
    let attention_ok = attention_worst <= 1e-6;
    verdict(
        eq2_ok && attention_ok,
        format!(
            "{} move distributions, max |sum-1| {:.1e}; {rows} attention rows over 100 instances, max |sum-1| {attention_worst:.1e}",
            states.get(),
            worst.get()
        ),
    )
}

fn pheromone_dynamics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tau0: Vec<f64> = (0..40).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect();
    let params = AcoParams { rho: 0.37, ..AcoParams::default() };
    let mut tau = PheromoneField { tau: tau0.clone() };
    let mut decay_err: f64 = 0.0;
    for t in 1..=50 {
        tau = pheromone_update(&tau, &[], &params).unwrap();
        for (v, v0) in tau.tau.iter().zip(&tau0) {
            let exact = v0 * (1.0 - params.rho).powi(t);
            decay_err = decay_err.max((v - exact).abs() / exact);
        }
    }

    let inst = gen_tsp_instance(15, 3, 5).unwrap();
    let mut tau = PheromoneField::for_instance(&inst);
    let mut min_tau = f64::INFINITY;
    for _ in 0..1000 {
        let rho = if rng.gen_bool(0.2) { 1.0 - 10f64.powf(-rng.gen_range(1.0..15.0)) } else { rng.gen_range(0.001..0.999) };
        let params = AcoParams { rho, q: 10f64.powf(rng.gen_range(-3.0..2.0)), ..AcoParams::default() };
        let tours: Vec<Tour> = (0..rng.gen_range(0..4))
            .map(|_| {
                let mut order: Vec<usize> = (1..15).collect();
                rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
                order.insert(0, 0);
                // Any positive cost will do for the deposit.
                let edges = (0..14).map(|i| inst.edge_between(order[i], order[i + 1])).collect::<Option<Vec<_>>>();
                let edges = edges.unwrap_or_else(|| vec![rng.gen_range(0..inst.n_edges())]);
                Tour { visit_order: order, walk: vec![], edges, log_selection_prob: 0.0, cost: rng.gen_range(0.1..1e6) }
            })
            .collect();
        tau = pheromone_update(&tau, &tours, &params).unwrap();
        min_tau = tau.tau.iter().copied().fold(min_tau, f64::min);
    }
    verdict(
        decay_err <= 1e-12 && min_tau > 0.0,
        format!("max relative decay error {decay_err:.1e} over 50 steps; min tau {min_tau:.1e} over 1000 updates"),
    )
}

fn eta_scaling_invariance() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..300 {
        let n = rng.gen_range(4..30);
        let inst = gen_tsp_instance(n, rng.gen(), rng.gen_range(2..n)).unwrap();
        let w = HeuristicWeights::default();
        let eta = expert_heuristic(&inst, &w).unwrap();
        let tau = PheromoneField { tau: (0..inst.n_edges()).map(|_| rng.gen_range(0.01..5.0)).collect() };
        let params = AcoParams { alpha: rng.gen_range(0.0..3.0), beta: rng.gen_range(0.0..5.0), ..AcoParams::default() };
        let c = 10f64.powf(rng.gen_range(-6.0..6.0));
        let scaled = eta.scaled(c);
        let visited: Vec<bool> = (0..n).map(|i| i == 0).collect();
        for current in 0..n {
            let mut vis = visited.clone();
            vis[current] = true;
            let Ok(a) = transition_probabilities(&inst, current, &vis, &tau, &eta, &params) else { continue };
            let b = transition_probabilities(&inst, current, &vis, &tau, &scaled, &params).unwrap();
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x.prob - y.prob).abs());
                checked += 1;
            }
        }
    }
    verdict(worst <= 1e-12, format!("{checked} probabilities, max change {worst:.1e} under eta scaling"))
}

fn gradient_correctness() -> Verdict {
    let start = Instant::now();
    let inst = gen_tsp_instance(12, 77, 4).unwrap();
    let weights = HeuristicWeights::default();
    let aco = AcoParams { n_ants: 6, n_iterations: 3, seed: 3, ..AcoParams::default() };
    let mut params = ModelParams::new(ModelConfig::default()).unwrap();
    // Non-zero traffic weights so every block carries gradient.
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    params.fusion.t_weight[0] = 0.3;
    params.fusion.t_bias[0] = -0.2;
    let base = rollout(&inst, &params, &aco, &weights).unwrap();
    let analytic = base.grad.trainable_vec();
    let theta = params.trainable_vec();
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = 1e-6 * scale;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    let mut tours_stable = true;
    let mut above_floor = 0;
    let samples = 60;
    for _ in 0..samples {
        let k = rng.gen_range(0..theta.len());
        let mut eval = |delta: f64| {
            let mut p = params.clone();
            let mut t = theta.clone();
            t[k] += delta;
            p.set_trainable_vec(&t).unwrap();
            let r = rollout(&inst, &p, &aco, &weights).unwrap();
            tours_stable &= r.tours == base.tours;
            r.loss_sum
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        if analytic[k].abs() > floor {
            above_floor += 1;
        }
        let rel = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(floor);
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-3 && tours_stable && secs < 300.0,
        format!(
            "{samples} of {} parameters ({above_floor} above floor {floor:.1e}), max relative error {worst:.2e}, tours fixed: {tours_stable}, {secs:.1}s",
            theta.len()
        ),
    )
}

fn carl_identities() -> Verdict {
    let uniform = carl_loss(&Episode::from_costs(&[3.0, 3.0, 3.0], &[-1.0, -2.0, -0.5]).unwrap());
    let two_ant = carl_loss(&Episode::from_costs(&[2.0, 4.0], &[0.0, 0.0]).unwrap());
    verdict(uniform == 0.0 && two_ant == 1.0, format!("uniform-cost loss {uniform}, two-ant loss {two_ant}"))
}

fn delta_zero_degeneration() -> Verdict {
    let weights = HeuristicWeights::default();
    let model = ModelParams::new(ModelConfig { hidden: 8, gnn_layers: 2, fusion_width: 6, decoder_hidden: vec![8], ..Default::default() }).unwrap();
    let mut exact = true;
    let mut max_con: f64 = 0.0;
    let mut runs = 0;
    let instances = [
        gen_tsp_instance(30, 1, 8).unwrap(),
        gen_tsp_instance(12, 2, 11).unwrap(),
        gen_warehouse_instance(4, 5, 3, 25, 3).unwrap(),
    ];
    for inst in &instances {
        let cost = CostModel::expert(inst, &weights, 0.0).unwrap();
        for seed in 0..3 {
            let aco = AcoParams { n_ants: 10, n_iterations: 10, delta: 0.0, seed, ..AcoParams::default() };
            for learned in [false, true] {
                let r = if learned {
                    solve(inst, &cost, &mut LearnedGuide { params: &model }, &aco).unwrap()
                } else {
                    solve(inst, &cost, &mut ExpertGuide(cost.h.clone()), &aco).unwrap()
                };
                let direct: f64 = r.best.edges.iter().map(|&e| 1.0 / cost.h.eta[e]).sum();
                exact &= r.best.cost == direct;
                max_con = max_con.max(r.best_con.abs());
                runs += 1;
            }
        }
    }
    let suite = SuiteConfig {
        methods: vec![MethodSpec { name: None, method: Method::ExpertAco }, MethodSpec { name: None, method: Method::BruteForce }],
        instances: vec![InstanceSource::Tsp { n: 8, seed: 4, k: 7 }],
        seeds: vec![0, 1],
        aco: AcoParams { n_ants: 10, n_iterations: 10, delta: 0.0, ..AcoParams::default() },
        heuristic_weights: weights,
        baseline: None,
        parallel: false,
    };
    for r in run_suite(&suite, std::path::Path::new(".")).unwrap() {
        max_con = max_con.max(r.con.abs());
        runs += 1;
    }
    verdict(
        exact && max_con == 0.0,
        format!("{runs} runs, cost equals sum of 1/H exactly: {exact}, max Con {max_con}"),
    )
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn training_efficacy() -> Verdict {
    let start = Instant::now();
    let cfg = TrainConfig::default();
    let outcome = train(&cfg, None).unwrap();
    let losses = outcome.losses();
    let first = mean(&losses[..5]);
    let last = mean(&losses[losses.len() - 5..]);
    let weights = HeuristicWeights::default();
    let mut wins = 0;
    let mut expert_costs = Vec::new();
    let mut learned_costs = Vec::new();
    for s in 0..10u64 {
        let inst = gen_tsp_instance(50, 1000 + s, 10).unwrap();
        let aco = AcoParams { n_ants: 20, n_iterations: 30, seed: s, ..AcoParams::default() };
        let cost = CostModel::expert(&inst, &weights, aco.delta).unwrap();
        let e = solve(&inst, &cost, &mut ExpertGuide(cost.h.clone()), &aco).unwrap().best.cost;
        let l = solve(&inst, &cost, &mut LearnedGuide { params: &outcome.params }, &aco).unwrap().best.cost;
        if l <= e {
            wins += 1;
        }
        expert_costs.push(e);
        learned_costs.push(l);
    }
    let secs = start.elapsed().as_secs_f64();
    let a = last <= first;
    let b = wins >= 7;
    verdict(
        a && b && secs < 1800.0,
        format!(
            "(a) loss first-5 {first:.3e} -> last-5 {last:.3e} [{}]; (b) learned <= expert on {wins}/10, mean cost {:.3} vs {:.3} [{}]; {} epochs, {secs:.1}s",
            if a { "ok" } else { "not met" },
            mean(&learned_costs),
            mean(&expert_costs),
            if b { "ok" } else { "not met" },
            losses.len()
        ),
    )
}

fn congestion_mitigation() -> Verdict {
    let start = Instant::now();
    let delta = 0.2;
    let cfg = TrainConfig {
        epochs: 100,
        family: InstanceFamily::Warehouse { aisles: 10, slots: 10, levels: 5, min_cargo: 50, max_cargo: 100 },
        aco: AcoParams { n_ants: 10, n_iterations: 5, delta, ..AcoParams::default() },
        seed: 2,
        ..TrainConfig::default()
    };
    let model = train(&cfg, None).unwrap().params;
    let inst = gen_warehouse_instance(10, 10, 5, 100, 7).unwrap();
    let weights = HeuristicWeights::default();
    let cost = CostModel::expert(&inst, &weights, delta).unwrap();
    let mut expert = Vec::new();
    let mut learned = Vec::new();
    for seed in 0..5 {
        let aco = AcoParams { n_ants: 20, n_iterations: 50, delta, seed, ..AcoParams::default() };
        expert.push(solve(&inst, &cost, &mut ExpertGuide(cost.h.clone()), &aco).unwrap().best_con);
        learned.push(solve(&inst, &cost, &mut LearnedGuide { params: &model }, &aco).unwrap().best_con);
    }
    let (e, l) = (mean(&expert), mean(&learned));
    verdict(
        l <= e,
        format!("mean Con learned {l:.4} vs expert {e:.4} over 5 seeds, {:.1}s", start.elapsed().as_secs_f64()),
    )
}

fn determinism() -> Verdict {
    let mut checks = Vec::new();

    let gen = || {
        (
            gen_tsp_instance(40, 9, 8).unwrap().to_json().unwrap(),
            gen_warehouse_instance(5, 6, 3, 30, 9).unwrap().to_json().unwrap(),
        )
    };
    checks.push(("gen", gen() == gen()));

    let inst = gen_warehouse_instance(5, 6, 3, 30, 9).unwrap();
    let model = ModelParams::new(ModelConfig { hidden: 8, gnn_layers: 2, fusion_width: 6, decoder_hidden: vec![8], ..Default::default() }).unwrap();
    let solve_once = || {
        let cost = CostModel::expert(&inst, &HeuristicWeights::default(), 0.3).unwrap();
        let aco = AcoParams { n_ants: 8, n_iterations: 6, delta: 0.3, seed: 4, ..AcoParams::default() };
        let e = solve(&inst, &cost, &mut ExpertGuide(cost.h.clone()), &aco).unwrap();
        let l = solve(&inst, &cost, &mut LearnedGuide { params: &model }, &aco).unwrap();
        let key = |r: &nahaco_core::aco::SolveResult| {
            (r.best.clone(), r.best_con.to_bits(), r.history.iter().map(|s| (s.best.to_bits(), s.mean.to_bits())).collect::<Vec<_>>())
        };
        (key(&e), key(&l))
    };
    checks.push(("solve", solve_once() == solve_once()));

    let cfg = TrainConfig {
        epochs: 3,
        instances_per_epoch: 3,
        family: InstanceFamily::Tsp { min_nodes: 10, max_nodes: 14, k_neighbors: 5 },
        aco: AcoParams { n_ants: 5, n_iterations: 3, ..AcoParams::default() },
        model: ModelConfig { hidden: 8, gnn_layers: 2, fusion_width: 6, decoder_hidden: vec![8], ..Default::default() },
        seed: 13,
        ..TrainConfig::default()
    };
    let train_once = || {
        let out = train(&cfg, None).unwrap();
        (to_bytes(&out.params), out.history.iter().map(|h| (h.mean_loss.to_bits(), h.mean_best_cost.to_bits(), h.mean_con.to_bits())).collect::<Vec<_>>())
    };
    checks.push(("train", train_once() == train_once()));

    let suite = SuiteConfig {
        methods: vec![MethodSpec { name: None, method: Method::ExpertAco }, MethodSpec { name: None, method: Method::BruteForce }],
        instances: vec![InstanceSource::Tsp { n: 8, seed: 1, k: 7 }, InstanceSource::Tsp { n: 7, seed: 2, k: 6 }],
        seeds: vec![0, 5],
        aco: AcoParams { n_ants: 6, n_iterations: 5, delta: 0.2, ..AcoParams::default() },
        heuristic_weights: HeuristicWeights::default(),
        baseline: Some("brute-force".into()),
        parallel: true,
    };
    let bench_once = || {
        run_suite(&suite, std::path::Path::new("."))
            .unwrap()
            .into_iter()
            .map(|r| (r.method, r.instance, r.seed, r.cost.to_bits(), r.con.to_bits(), r.gap_pct.map(f64::to_bits)))
            .collect::<Vec<_>>()
    };
    checks.push(("bench", bench_once() == bench_once()));

    let detail = checks.iter().map(|(n, ok)| format!("{n} {}", if *ok { "identical" } else { "DIFFERS" })).collect::<Vec<_>>();
    verdict(checks.iter().all(|c| c.1), detail.join(", "))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle-optimality", oracle_optimality),
        ("probability-normalization", probability_normalization),
        ("pheromone-dynamics", pheromone_dynamics),
        ("eta-scaling-invariance", eta_scaling_invariance),
        ("gradient-correctness", gradient_correctness),
        ("carl-loss-identities", carl_identities),
        ("delta-zero-degeneration", delta_zero_degeneration),
        ("training-efficacy", training_efficacy),
        ("congestion-mitigation", congestion_mitigation),
        ("determinism", determinism),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = check();
        println!("{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
