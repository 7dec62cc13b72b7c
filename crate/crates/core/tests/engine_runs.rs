use std::sync::Mutex;

use multihop::config::{parse_config, preset, ExperimentConfig};
use multihop::engine::{run, run_observed, RunOptions, TrialView};
use multihop::routing::Protocol;

fn small(edits: &[(&str, f64)]) -> ExperimentConfig {
    let mut file = parse_config("").unwrap().file;
    file.set("num_topologies", 4.0).unwrap();
    file.set("trials_per_topology", 16.0).unwrap();
    file.set("num_relays", 40.0).unwrap();
    for &(k, v) in edits {
        file.set(k, v).unwrap();
    }
    ExperimentConfig::from_file(file).unwrap()
}

fn go(cfg: &ExperimentConfig, threads: Option<usize>) -> multihop::engine::RunResult {
    run(
        &cfg.plan,
        &cfg.network,
        &cfg.channel,
        &cfg.service,
        &RunOptions { threads, progress: false },
    )
    .unwrap()
}

#[test]
fn lone_direct_link_without_outage() {
    let cfg = small(&[
        ("num_topologies", 1.0),
        ("trials_per_topology", 1.0),
        ("num_relays", 0.0),
        ("shadowing_std_db", 0.0),
        ("snr_db", 300.0),
    ]);
    let r = go(&cfg, None);
    for p in Protocol::ALL {
        let a = r.averages(p).unwrap();
        assert_eq!(a.reliability.mean, 1.0);
        assert_eq!(a.hops.unwrap().mean, 1.0);
        assert_eq!(a.delay.unwrap().mean, cfg.plan.slot_delay);
    }
}

#[test]
fn no_relays_in_service_and_dead_direct_link() {
    let cfg = small(&[
        ("relay_prob", 0.0),
        ("shadowing_std_db", 0.0),
        ("snr_db", -300.0),
        ("source_dest_distance", 1.0),
    ]);
    let r = go(&cfg, None);
    for p in Protocol::ALL {
        let a = r.averages(p).unwrap();
        assert_eq!(a.reliability.mean, 0.0);
        assert_eq!(a.ase.mean, 0.0);
        assert!(a.delay.is_none() && a.hops.is_none());
        assert_eq!(a.undefined, cfg.plan.num_topologies);
    }
}

#[test]
fn every_topology_runs_exactly_k_trials() {
    let cfg = small(&[("trials_per_topology", 25.0)]);
    let seen = Mutex::new(vec![0usize; cfg.plan.num_topologies]);
    let r = run_observed(
        &cfg.plan,
        &cfg.network,
        &cfg.channel,
        &cfg.service,
        &RunOptions::default(),
        &|v: &TrialView<'_>| {
            let rec = v.record;
            assert!(rec.service_id < 5 && rec.trial_id < 5);
            assert_eq!(rec.outcomes.len(), 3);
            seen.lock().unwrap()[rec.topology_id] += 1;
        },
    )
    .unwrap();
    assert!(seen.into_inner().unwrap().iter().all(|&n| n == 25));
    for per in &r.per_topology {
        assert_eq!(per.len(), cfg.plan.num_topologies);
        for m in per {
            assert_eq!(m.trials, 25);
            assert_eq!(m.reliability, 1.0 - m.failures as f64 / 25.0);
        }
    }
}

#[test]
fn dominance_holds_in_every_trial() {
    let cfg = small(&[("num_relays", 120.0), ("source_dest_distance", 0.8), ("num_topologies", 6.0)]);
    let violations = Mutex::new(0usize);
    let checked = Mutex::new(0usize);
    run_observed(
        &cfg.plan,
        &cfg.network,
        &cfg.channel,
        &cfg.service,
        &RunOptions::default(),
        &|v: &TrialView<'_>| {
            let o = &v.record.outcomes;
            let ldr = o.iter().find(|x| x.protocol == Protocol::LeastDelay).unwrap();
            for g in o.iter().filter(|x| x.protocol != Protocol::LeastDelay) {
                if let Some(d) = g.delay {
                    *checked.lock().unwrap() += 1;
                    if !ldr.delay.is_some_and(|l| l <= d) {
                        *violations.lock().unwrap() += 1;
                    }
                }
            }
        },
    )
    .unwrap();
    assert!(checked.into_inner().unwrap() > 0);
    assert_eq!(violations.into_inner().unwrap(), 0);
}

#[test]
fn per_topology_reliability_ordering() {
    let cfg = small(&[("num_relays", 120.0), ("source_dest_distance", 0.9)]);
    let r = go(&cfg, None);
    let ldr = r.topology_metrics(Protocol::LeastDelay).unwrap();
    for p in [Protocol::NearestNeighbor, Protocol::MaximumProgress] {
        for (a, b) in ldr.iter().zip(r.topology_metrics(p).unwrap()) {
            assert!(a.reliability >= b.reliability);
            assert!(a.ase >= b.ase);
        }
    }
}

#[test]
fn results_independent_of_thread_count() {
    let cfg = small(&[("num_relays", 80.0), ("num_topologies", 8.0)]);
    let one = go(&cfg, Some(1));
    let four = go(&cfg, Some(4));
    assert_eq!(one.per_topology, four.per_topology);
    assert_eq!(one.averages, four.averages);
}

#[test]
fn master_seed_changes_results() {
    let a = go(&small(&[("seed", 1.0)]), None);
    let b = go(&small(&[("seed", 2.0)]), None);
    assert_ne!(a.per_topology, b.per_topology);
}

#[test]
fn subset_of_protocols_matches_full_run() {
    let cfg = small(&[]);
    let full = go(&cfg, None);
    let mut only = cfg.clone();
    only.plan.protocols = vec![Protocol::MaximumProgress];
    let part = go(&only, None);
    assert_eq!(
        part.topology_metrics(Protocol::MaximumProgress),
        full.topology_metrics(Protocol::MaximumProgress)
    );
}

#[test]
fn desk_preset_loads_and_runs_one_topology() {
    let mut cfg = preset("desk-fig1").unwrap().single_point();
    cfg.plan.num_topologies = 1;
    cfg.plan.trials_per_topology = 4;
    let r = go(&cfg, None);
    assert_eq!(r.protocols, Protocol::ALL.to_vec());
    assert!((r.density - 201.0 / std::f64::consts::PI).abs() < 1e-12);
}
