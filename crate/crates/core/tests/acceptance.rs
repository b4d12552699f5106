//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Absolute cycle counts are model outputs, so every check here is a
//! property or a relative trend, never a hardware claim.

mod common;

use common::{dense_gcn, dense_gin, dense_sage, max_rel_err};
use gnnsim::experiment::{self, ExperimentConfig};
use gnnsim::sim::{audit_trace, host_run, simulate_double_buffered, SimConfig};
use gnnsim::{
    build_csr, degree_quant_assign, generate_power_law_graph, nodeslot_allocation,
    protection_probabilities, quantize, FeatureMatrix, Graph, LayerWeights, ModelConfig,
    ModelKind, NodeId, Precision, PrecisionAssignment, PrecisionBudget, QuantParams,
    ResourceBudget, ResourceKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(n: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {n} ({name}): {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
}

/// Uniform-degree random graph: every node draws its degree uniformly from
/// [1, max_degree] and samples distinct non-self neighbors.
fn uniform_graph(n: usize, max_degree: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for v in 0..n {
        let degree = rng.gen_range(1..=max_degree);
        let picks = rand::seq::index::sample(&mut rng, n - 1, degree);
        for idx in picks.iter() {
            let j = if idx >= v { idx + 1 } else { idx };
            edges.push((v as NodeId, j as NodeId, 1.0));
        }
    }
    build_csr(&edges, n, true).unwrap()
}

#[test]
fn criterion_1_simulator_matches_reference() {
    let sim = SimConfig::default();
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let n = 24 + (i as usize * 17) % 233; // up to 256
        let max_degree = (n / 3).max(2);
        let g = if i % 2 == 0 {
            generate_power_law_graph(n, 1.8 + 0.05 * (i % 10) as f64, max_degree, 1000 + i)
                .unwrap()
        } else {
            uniform_graph(n, max_degree.min(12), 2000 + i)
        };
        let kind = [ModelKind::Gcn, ModelKind::Gin, ModelKind::GraphSage][(i % 3) as usize];
        let d_in = 4 + (i as usize % 5);
        let w = LayerWeights::random(kind, d_in, 6, 5, 3000 + i);
        let cfg = ModelConfig::preset(kind);
        let x = FeatureMatrix::random(n, d_in, 4000 + i);
        let reference = gnnsim::message_passing_layer(&g, &x, &cfg, &w).unwrap();
        let out = host_run(
            &g,
            &cfg,
            &[w],
            &PrecisionAssignment::all_float32(n),
            &x,
            &sim,
        )
        .unwrap();
        worst = worst.max(out.output.max_relative_error(&reference));
    }
    criterion(
        1,
        "oracle equivalence",
        worst < 1e-5,
        &format!("worst relative error {worst:.2e} over 50 graphs"),
    );
}

#[test]
fn criterion_2_reference_matches_dense_formulation() {
    let mut worst: f64 = 0.0;
    for i in 0..12u64 {
        let n = 8 + (i as usize * 7) % 57; // up to 64
        let g = generate_power_law_graph(n, 2.0, (n / 2).max(2), 5000 + i).unwrap();
        let x = FeatureMatrix::random(n, 5, 6000 + i);
        let gcn = LayerWeights::random(ModelKind::Gcn, 5, 0, 4, 7000 + i);
        let gin = LayerWeights::random(ModelKind::Gin, 5, 6, 4, 7100 + i);
        let sage = LayerWeights::random(ModelKind::GraphSage, 5, 4, 4, 7200 + i);
        worst = worst.max(max_rel_err(
            gnnsim::gcn_layer(&g, &x, &gcn).unwrap().as_array(),
            &dense_gcn(&g, &x, &gcn),
        ));
        worst = worst.max(max_rel_err(
            gnnsim::gin_layer(&g, &x, &gin).unwrap().as_array(),
            &dense_gin(&g, &x, &gin),
        ));
        worst = worst.max(max_rel_err(
            gnnsim::sage_layer(&g, &x, &sage).unwrap().as_array(),
            &dense_sage(&g, &x, &sage),
        ));
    }
    criterion(
        2,
        "dense-oracle equivalence",
        worst < 1e-6,
        &format!("worst relative error {worst:.2e}"),
    );
}

#[test]
fn criterion_3_quantization_grid_scan() {
    let mut ok = true;
    let mut checked = 0u64;
    for bits in [8u8, 4] {
        for scale in [0.013, 0.25, 1.7] {
            let qp = QuantParams::symmetric(scale, bits).unwrap();
            let (lo, hi) = qp.representable_range();
            // Scan 100k points across 1.5x the representable range so the
            // saturation branches are exercised.
            let span_lo = lo * 1.5;
            let span_hi = hi * 1.5;
            let steps = 100_000u64;
            let mut prev_code = i32::MIN;
            for k in 0..=steps {
                let x = span_lo + (span_hi - span_lo) * (k as f64) / (steps as f64);
                let code = quantize(x, &qp).unwrap();
                ok &= code >= qp.q_min && code <= qp.q_max;
                ok &= code >= prev_code; // monotone over an increasing grid
                prev_code = code;
                if x >= lo && x <= hi {
                    let back = (code as f64 - qp.zero_point) * qp.scale;
                    ok &= (back - x).abs() <= qp.scale / 2.0 + 1e-12;
                }
                checked += 1;
            }
        }
    }
    criterion(
        3,
        "quantization properties",
        ok,
        &format!("{checked} grid points, int8 and int4"),
    );
}

#[test]
fn criterion_4_allocation_matches_brute_force() {
    // Independent oracle: the smallest slot count that covers the minimum
    // budget/cost ratio, found by upward scan.
    fn brute_force(pb_max: &[f64], pb_cost: &[f64]) -> usize {
        let m = pb_max
            .iter()
            .zip(pb_cost)
            .filter(|&(_, &c)| c > 0.0)
            .map(|(&r, &c)| r / c)
            .fold(f64::INFINITY, f64::min);
        let mut n = 0usize;
        while (n as f64) < m {
            n += 1;
        }
        n
    }

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ok = true;
    for _ in 0..100 {
        let kinds = &ResourceKind::ALL[..rng.gen_range(1..=4)];
        let maxes: Vec<f64> = kinds.iter().map(|_| rng.gen_range(10.0..1e5)).collect();
        let costs: Vec<f64> = kinds.iter().map(|_| rng.gen_range(0.5..1e3)).collect();
        let pb = PrecisionBudget::new(
            kinds.iter().copied().zip(maxes.iter().copied()).collect(),
            kinds.iter().copied().zip(costs.iter().copied()).collect(),
        )
        .unwrap();
        let mut budget = ResourceBudget::new();
        budget.insert(Precision::Int8, pb);
        let got = nodeslot_allocation(&budget, Precision::Int8, false).unwrap();
        ok &= got == brute_force(&maxes, &costs);
    }

    // The worked example: min(1000/300, 2000/450) = 3.33 -> 4 slots.
    let mut budget = ResourceBudget::new();
    budget.insert(
        Precision::Float32,
        PrecisionBudget::new(
            [(ResourceKind::Lut, 1000.0), (ResourceKind::Ff, 2000.0)].into(),
            [(ResourceKind::Lut, 300.0), (ResourceKind::Ff, 450.0)].into(),
        )
        .unwrap(),
    );
    ok &= nodeslot_allocation(&budget, Precision::Float32, false).unwrap() == 4;

    criterion(4, "allocation-rule exactness", ok, "100 random budgets");
}

#[test]
fn criterion_5_degree_quant_statistics() {
    let g = generate_power_law_graph(10_000, 2.0, 100, 42).unwrap();
    let probs = protection_probabilities(&g, 0.0, 0.1).unwrap();
    let n = probs.len() as f64;
    let expected = probs.iter().sum::<f64>() / n;
    let per_trial_var = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>() / (n * n);
    let trials = 50u64;
    let sigma_mean = (per_trial_var / trials as f64).sqrt();

    let mean_ratio = (0..trials)
        .map(|s| {
            degree_quant_assign(&g, 0.0, 0.1, s)
                .unwrap()
                .protected_ratio()
        })
        .sum::<f64>()
        / trials as f64;

    // Monotonicity asserted on the probability array, not on samples.
    let stats = g.degree_stats();
    let mut pairs: Vec<(u32, f64)> = stats.degrees.iter().copied().zip(probs).collect();
    pairs.sort_by_key(|&(d, _)| d);
    let monotone = pairs.windows(2).all(|w| w[0].1 <= w[1].1);

    let within = (mean_ratio - expected).abs() <= 3.0 * sigma_mean;
    let below_3pct = mean_ratio < 0.03;
    criterion(
        5,
        "degree-quant statistics",
        within && monotone && below_3pct,
        &format!(
            "mean ratio {mean_ratio:.5} vs analytic {expected:.5} (3σ = {:.5}), monotone = {monotone}",
            3.0 * sigma_mean
        ),
    );
}

#[test]
fn criterion_6_event_driven_dominates_double_buffering() {
    let sim = SimConfig::default();
    let cfg = ModelConfig::preset(ModelKind::Gcn);
    let mut improvements = Vec::new();
    let mut all_dominate = true;
    for seed in 0..20u64 {
        let g = generate_power_law_graph(5_000, 2.0, 256, 8000 + seed).unwrap();
        let x = FeatureMatrix::random(5_000, 16, 8100 + seed);
        let w = LayerWeights::random(ModelKind::Gcn, 16, 0, 16, 8200 + seed);
        let assignment = PrecisionAssignment::all_float32(5_000);
        let ed = host_run(&g, &cfg, &[w.clone()], &assignment, &x, &sim).unwrap();
        let db =
            simulate_double_buffered(&g, &cfg, &[w], &assignment, &x, &sim, 64).unwrap();
        let (ed_c, db_c) = (ed.report.total_cycles, db.report.total_cycles);
        all_dominate &= ed_c <= db_c;
        improvements.push(1.0 - ed_c as f64 / db_c as f64);
    }
    let mean_improvement = improvements.iter().sum::<f64>() / improvements.len() as f64;
    criterion(
        6,
        "event-driven scheduling dominance",
        all_dominate && mean_improvement >= 0.10,
        &format!("dominates on all 20 seeds, mean improvement {:.1}%", mean_improvement * 100.0),
    );
}

#[test]
fn criterion_7_partial_response_latency_hiding() {
    // Targeted workload: a handful of hubs whose degree exceeds the queue
    // capacity, plus leaves.
    let n = 120usize;
    let mut edges = Vec::new();
    for hub in 0..4u32 {
        for k in 0..24u32 {
            let j = 4 + ((hub * 29 + k * 7) % (n as u32 - 4));
            edges.push((hub, j, 1.0));
        }
    }
    for v in 4..n as u32 {
        edges.push((v, (v + 1) % n as u32, 1.0));
    }
    let g = build_csr(&edges, n, true).unwrap();
    let x = FeatureMatrix::random(n, 8, 1);
    let cfg = ModelConfig::preset(ModelKind::Gcn);
    let w = LayerWeights::random(ModelKind::Gcn, 8, 0, 8, 2);
    let assignment = PrecisionAssignment::all_float32(n);

    let mut sim = SimConfig::default();
    sim.message_queue_capacity = 16;
    let with = host_run(&g, &cfg, &[w.clone()], &assignment, &x, &sim).unwrap();
    sim.partial_response = false;
    let without = host_run(&g, &cfg, &[w], &assignment, &x, &sim).unwrap();

    let mut hides = true;
    let mut strictly_slower = true;
    let mut hubs_checked = 0;
    for r in &with.report.per_node {
        if r.degree as usize > 16 {
            hubs_checked += 1;
            hides &= r.aggregation_start_cycle < r.fetch_complete_cycle;
            let baseline = without
                .report
                .per_node
                .iter()
                .find(|b| b.node == r.node)
                .unwrap();
            strictly_slower &= baseline.latency() > r.latency();
        }
    }
    criterion(
        7,
        "partial-response latency hiding",
        hubs_checked > 0 && hides && strictly_slower,
        &format!("{hubs_checked} over-capacity nodes checked"),
    );
}

#[test]
fn criterion_8_determinism_and_conservation() {
    let mut cfg = ExperimentConfig::default();
    cfg.set("graph.nodes", "400").unwrap();
    cfg.set("graph.max_degree", "40").unwrap();
    cfg.set("model.kind", "graphsage").unwrap();
    cfg.set("model.in_features", "8").unwrap();
    cfg.set("model.hidden_features", "6").unwrap();
    cfg.set("model.out_features", "5").unwrap();
    cfg.set("precision.policy", "degree-quant").unwrap();
    cfg.set("scheduler.policy", "both").unwrap();
    cfg.set("run.seed", "11").unwrap();

    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    experiment::run_to_dir(&cfg, dir_a.path()).unwrap();
    experiment::run_to_dir(&cfg, dir_b.path()).unwrap();
    let summary_a = std::fs::read(dir_a.path().join("summary.csv")).unwrap();
    let summary_b = std::fs::read(dir_b.path().join("summary.csv")).unwrap();
    let identical = summary_a == summary_b;

    // Explicit audit of both policies' traces plus conservation counters.
    let artifacts = experiment::execute(&cfg).unwrap();
    let mut audited = true;
    let mut conserved = true;
    for out in &artifacts.outputs {
        audited &= audit_trace(&out.trace, 400, 1, 64).is_ok();
        let done_count = out
            .trace
            .iter()
            .filter(|t| t.to == gnnsim::sim::NodeState::Done)
            .count();
        audited &= done_count == 400;
        let c = &out.report.counters;
        conserved &= c.nodes_programmed == 400
            && c.slots_freed == 400
            && c.noc_flits_injected == c.noc_flits_consumed
            && c.mem_words_requested == c.mem_words_delivered;
    }
    criterion(
        8,
        "determinism and conservation",
        identical && audited && conserved,
        "byte-identical summary.csv, audited traces, balanced counters",
    );
}

#[test]
fn criterion_9_throughput_monotone_in_slots() {
    let g = generate_power_law_graph(10_000, 2.0, 100, 77).unwrap();
    let x = FeatureMatrix::random(10_000, 16, 78);
    let cfg = ModelConfig::preset(ModelKind::Gcn);
    let w = LayerWeights::random(ModelKind::Gcn, 16, 0, 16, 79);
    let assignment = PrecisionAssignment::all_float32(10_000);

    let mut throughputs = Vec::new();
    for slots in [1usize, 4, 16, 64] {
        let mut sim = SimConfig::default();
        sim.nodeslots = slots;
        let out = host_run(&g, &cfg, &[w.clone()], &assignment, &x, &sim).unwrap();
        throughputs.push(out.report.throughput_nodes_per_cycle());
    }
    let monotone = throughputs.windows(2).all(|w| w[1] >= w[0]);
    criterion(
        9,
        "throughput monotonicity",
        monotone,
        &format!(
            "nodes/cycle over slots {{1,4,16,64}}: {:?}",
            throughputs
                .iter()
                .map(|t| format!("{t:.5}"))
                .collect::<Vec<_>>()
        ),
    );
}
