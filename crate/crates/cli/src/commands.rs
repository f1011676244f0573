use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use tierlink::analytic::{tier_interruption_matrix_with, InterruptionMatrix};
use tierlink::config::ExperimentConfig;
use tierlink::geometry::Network;
use tierlink::link_metrics::{availability, db_to_linear, multiflow_interruption, multiflow_total, CoverageModel};
use tierlink::markov::{analyze as run_analysis, cumulative_interruption, reachable_tiers, Analysis, PriorityStrategy};
use tierlink::simulator::{exhaustive_search, routing_rule, Router};
use tierlink::strategy::{
    density_inspired, evaluate_strategies, single_hop_inspired, stationary_optimal, StrategyMode, StrategyReport,
    MAX_EXHAUSTIVE_TIERS,
};
use tierlink::sweep::run_sweep;
use tierlink::Error;

use crate::output::{Cell, Table};
use crate::AppError;

type Written = Result<Vec<PathBuf>, AppError>;

/// Network, interruption matrix and selected strategy of a configuration.
struct Setup {
    network: Network,
    p: InterruptionMatrix,
    strategy: PriorityStrategy,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, AppError> {
    let network = cfg.network()?;
    let p = tier_interruption_matrix_with(&network, &cfg.constraint_set(), cfg.own_tier_exponent);
    let strategy = cfg
        .strategy_mode
        .select(&network, &p, cfg.explicit_strategy.as_ref())
        .map_err(|e| diagnose(e, &p))?;
    Ok(Setup { network, p, strategy })
}

/// Adds the reachable tier set to infeasibility errors.
fn diagnose(e: Error, p: &InterruptionMatrix) -> AppError {
    if matches!(e, Error::NonAbsorbing { .. } | Error::NoStationary(_) | Error::NoFeasibleStrategy | Error::Domain(_)) {
        let reachable: Vec<String> = reachable_tiers(p).iter().map(|i| (i + 1).to_string()).collect();
        let delivering: Vec<String> = (0..p.k()).filter(|&j| p.delivers(j)).map(|j| (j + 1).to_string()).collect();
        eprintln!("infeasible network: tiers reachable from the gateways: [{}]", reachable.join(" "));
        eprintln!("tiers that can deliver to the receiver: [{}]", delivering.join(" "));
        let ps = p.single_hop();
        for i in 0..p.k() {
            eprintln!("  tier {}: single-hop interruption {}", i + 1, crate::output::fmt_g(ps.get(i)));
        }
    }
    AppError::Lib(e)
}

fn analysis(cfg: &ExperimentConfig, s: &Setup) -> Result<Analysis, AppError> {
    run_analysis(&s.network, &cfg.constraint_set(), &s.strategy, cfg.own_tier_exponent).map_err(|e| diagnose(e, &s.p))
}

fn tier_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| i.to_string()).collect()
}

fn matrix_table(m: &DMatrix<f64>, k: usize) -> Table {
    let mut cols = tier_labels(k);
    if m.ncols() > k {
        cols.push("absorbing".to_string());
    }
    let mut header = vec!["from".to_string()];
    header.extend(cols.iter().cloned());
    let mut t = Table::new(&header);
    for (r, label) in cols.iter().enumerate().take(m.nrows()) {
        let mut row: Vec<Cell> = vec![label.clone().into()];
        row.extend((0..m.ncols()).map(|c| Cell::from(m[(r, c)])));
        t.row(row);
    }
    t
}

fn strategy_table(reports: &[StrategyReport], k: usize) -> Table {
    let mut header = vec!["rank".to_string(), "strategy".to_string()];
    header.extend((1..=k).map(|i| format!("v_{i}")));
    header.extend((1..=k).map(|i| format!("one_step_{i}")));
    header.extend(["one_step_absorbing", "weighted_interruption", "n_h", "multihop_interruption"].map(String::from));
    let mut t = Table::new(&header);
    for (rank, r) in reports.iter().enumerate() {
        let mut row: Vec<Cell> = vec![(rank + 1).into(), r.strategy.to_string().into()];
        row.extend(r.stationary.as_slice().iter().map(|&x| Cell::from(x)));
        row.extend(r.one_step.iter().map(|&x| Cell::from(x)));
        row.extend([r.weighted_interruption.into(), r.n_h.into(), r.analytic_multihop.into()]);
        t.row(row);
    }
    t
}

fn analyze_tables(cfg: &ExperimentConfig) -> Result<Vec<(&'static str, Table)>, AppError> {
    let s = setup(cfg)?;
    let a = analysis(cfg, &s)?;
    let k = s.network.len();
    let mut out = Vec::new();

    out.push(("pI.csv", matrix_table(s.p.matrix(), k)));
    let mut ps = Table::new(&["tier", "single_hop_interruption"]);
    for i in 0..k {
        ps.row(vec![(i + 1).into(), a.single_hop.get(i).into()]);
    }
    out.push(("pS.csv", ps));
    out.push(("t1.csv", matrix_table(&a.matrices.t1, k)));
    out.push(("t2.csv", matrix_table(&a.matrices.t2, k)));
    out.push(("t3.csv", matrix_table(&a.matrices.t3, k)));

    let mut v = Table::new(&["tier", "stationary"]);
    for i in 0..k {
        v.row(vec![(i + 1).into(), a.stationary.get(i).into()]);
    }
    out.push(("stationary.csv", v));

    let mut hops = Table::new(&["quantity", "tier", "value"]);
    for i in 0..k {
        hops.row(vec!["mu".into(), (i + 1).into(), a.hops.mu[i].into()]);
    }
    hops.row(vec!["n_h".into(), "".into(), a.hops.n_h.into()]);
    hops.row(vec!["theta_bar".into(), "".into(), a.hops.theta_bar.into()]);
    out.push(("hop_stats.csv", hops));

    let mut m = Table::new(&["strategy", "n_h", "weighted_single_hop", "multihop_interruption"]);
    m.row(vec![a.strategy.to_string().into(), a.hops.n_h.into(), a.weighted_single_hop().into(), a.multihop.into()]);
    out.push(("multihop.csv", m));

    let mut cum = Table::new(&["n_e", "n", "cumulative_interruption"]);
    for &n_e in &cfg.cumulative_horizons {
        for n in 0..n_e {
            let x = cumulative_interruption(n, n_e, &a.matrices.t2, &a.matrices.t3)?;
            cum.row(vec![n_e.into(), n.into(), x.into()]);
        }
    }
    out.push(("cumulative.csv", cum));

    if k <= MAX_EXHAUSTIVE_TIERS {
        let reports = evaluate_strategies(&s.network, &cfg.constraint_set(), &s.p)?;
        out.push(("strategies.csv", strategy_table(&reports, k)));
    }
    Ok(out)
}

fn write_all(dir: &Path, tables: Vec<(&str, Table)>) -> Written {
    tables.into_iter().map(|(name, t)| t.write(dir, name)).collect()
}

pub fn analyze(cfg: &ExperimentConfig, dir: &Path) -> Written {
    write_all(dir, analyze_tables(cfg)?)
}

pub fn simulate(cfg: &ExperimentConfig, dir: &Path) -> Written {
    let s = setup(cfg)?;
    let c = cfg.constraint_set();
    let theta_bar = if cfg.strategy_mode == StrategyMode::Dynamic { analysis(cfg, &s)?.hops.theta_bar } else { f64::NAN };
    let rule = routing_rule(cfg.strategy_mode, &s.strategy, &s.network, &c, &s.p, theta_bar, cfg.penultimate_adjustment)?;
    let e = Router::new(&s.network, &c, rule).estimate(cfg.iterations, cfg.seed);

    let mut est = Table::new(&[
        "strategy_mode",
        "strategy",
        "iterations",
        "seed",
        "interruptions",
        "interruption_probability",
        "standard_error",
        "mean_hops_success",
        "mean_forward_advance",
    ]);
    est.row(vec![
        cfg.strategy_mode.name().into(),
        s.strategy.to_string().into(),
        cfg.iterations.into(),
        cfg.seed.into(),
        e.interruptions.into(),
        e.interruption_probability.into(),
        e.standard_error.into(),
        e.mean_hops_success.into(),
        e.mean_forward_advance.into(),
    ]);

    let mut hist = Table::new(&["hops", "trials", "successes"]);
    for (&h, &n) in &e.hop_histogram {
        hist.row(vec![h.into(), n.into(), e.success_histogram.get(&h).copied().unwrap_or(0).into()]);
    }

    let mut per_hop = Table::new(&["hop", "interruptions", "fraction_of_trials"]);
    for (i, &n) in e.per_hop_interruptions.iter().enumerate() {
        per_hop.row(vec![(i + 1).into(), n.into(), (n as f64 / cfg.iterations as f64).into()]);
    }
    write_all(dir, vec![("estimate.csv", est), ("hop_histogram.csv", hist), ("per_hop_interruptions.csv", per_hop)])
}

pub fn strategy_search(cfg: &ExperimentConfig, dir: &Path, simulate: bool) -> Written {
    let network = cfg.network()?;
    let c = cfg.constraint_set();
    let p = tier_interruption_matrix_with(&network, &c, cfg.own_tier_exponent);
    let k = network.len();
    let reports = evaluate_strategies(&network, &c, &p).map_err(|e| diagnose(e, &p))?;
    let mut tables = vec![("strategies.csv", strategy_table(&reports, k))];

    let mut picks = Table::new(&["heuristic", "strategy", "weighted_interruption", "multihop_interruption"]);
    let candidates = [
        ("stationary_optimal", stationary_optimal(&p).map_err(|e| diagnose(e, &p))?),
        ("single_hop", single_hop_inspired(&p.single_hop())),
        ("density", density_inspired(&network, &reachable_tiers(&p))),
    ];
    for (name, s) in candidates {
        let (w, m) = match reports.iter().find(|r| r.strategy == s) {
            Some(r) => (r.weighted_interruption, r.analytic_multihop),
            None => (f64::NAN, f64::NAN),
        };
        picks.row(vec![name.into(), s.to_string().into(), w.into(), m.into()]);
    }
    tables.push(("heuristics.csv", picks));

    if simulate {
        let ranked = exhaustive_search(&network, &c, cfg.iterations, cfg.seed)?;
        let mut sim = Table::new(&["rank", "strategy", "interruption_probability", "standard_error", "mean_hops_success"]);
        for (i, (s, e)) in ranked.iter().enumerate() {
            sim.row(vec![
                (i + 1).into(),
                s.to_string().into(),
                e.interruption_probability.into(),
                e.standard_error.into(),
                e.mean_hops_success.into(),
            ]);
        }
        tables.push(("simulated.csv", sim));
    }
    write_all(dir, tables)
}

pub fn metrics(cfg: &ExperimentConfig, dir: &Path) -> Written {
    let budget = cfg.link_budget().ok_or_else(|| {
        Error::Config(vec![
            "metrics needs a link_budget block with carrier_frequency_hz, transmit_power_dbw, antenna_gain_dbi, \
             bandwidth_hz, noise_power_w, rain_attenuation_db, package_size_bits, fading {b, m, omega}, \
             snr_threshold_db and latency_threshold_s (an empty block {} selects the Ka-band reference values)"
                .to_string(),
        ])
    })?;
    let s = setup(cfg)?;
    let c = cfg.constraint_set();
    let own = cfg.own_tier_exponent;
    let model = CoverageModel::new(&s.network, &c, &s.strategy, own, &budget, cfg.metrics.fading_samples, cfg.seed)
        .map_err(|e| diagnose(e, &s.p))?;
    let label = s.strategy.to_string();

    let mut avail = Table::new(&["strategy", "availability", "multihop_interruption"]);
    avail.row(vec![
        label.clone().into(),
        availability(&s.network, &c, &s.strategy, own)?.into(),
        model.analysis().multihop.into(),
    ]);

    let mut cov = Table::new(&["gamma_db", "gamma", "coverage"]);
    for &g in &cfg.metrics.gamma_db {
        let gamma = db_to_linear(g);
        cov.row(vec![g.into(), gamma.into(), model.coverage(gamma)?.into()]);
    }

    let mut urllc = Table::new(&["gamma_db", "tau_s", "urllc", "coverage"]);
    for &g in &cfg.metrics.gamma_db {
        let gamma = db_to_linear(g);
        let pc = model.coverage(gamma)?;
        for &tau in &cfg.metrics.tau_s {
            urllc.row(vec![g.into(), tau.into(), model.urllc(gamma, tau, cfg.metrics.urllc_mode)?.into(), pc.into()]);
        }
    }

    let base = model.analysis().multihop;
    let mut flows = Table::new(&["dihedral_angle", "flow_interruption"]);
    for &theta in &cfg.metrics.dihedral_angles {
        flows.row(vec![theta.into(), multiflow_interruption(theta, base, c.theta_m)?.into()]);
    }
    let mut tables = vec![
        ("availability.csv", avail),
        ("coverage.csv", cov),
        ("urllc.csv", urllc),
        ("multiflow.csv", flows),
    ];
    if let Some(spec) = cfg.flow_spec() {
        let mut total = Table::new(&["flows", "total_interruption", "single_flow_interruption"]);
        total.row(vec![spec.dihedral_angles.len().into(), multiflow_total(&spec, base, c.theta_m)?.into(), base.into()]);
        tables.push(("multiflow_total.csv", total));
    }
    write_all(dir, tables)
}

pub fn sweep(cfg: &ExperimentConfig, dir: &Path) -> Written {
    let rows = run_sweep(cfg)?;
    let mut t = Table::new(&["sweep", "point", "x_name", "x", "series", "metric", "value"]);
    for r in rows {
        t.row(vec![r.sweep.into(), r.point.into(), r.x_name.into(), r.x.into(), r.series.into(), r.metric.into(), r.value.into()]);
    }
    write_all(dir, vec![("sweep.csv", t)])
}
