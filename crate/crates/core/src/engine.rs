//! Three-level Monte Carlo driver.
//!
//! Level 1 draws a topology and its shadowing, level 2 draws `√K_t` relay
//! service realizations per topology and evaluates the outage probability of
//! every routable link, level 3 runs `√K_t` link-attempt trials per service
//! realization and routes all selected protocols over the same candidate
//! links.
//!
//! Every random stream is seeded from [`derive_seed`], so results depend only
//! on the master seed and never on scheduling. Topologies run in parallel and
//! are merged in index order.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{draw_shadowing, ChannelConfig, ChannelRealization};
use crate::error::{Result, SimError};
use crate::metrics::{spatial_averages, transmitter_density, SpatialAverages, TopologyMetrics, TrialAccumulator};
use crate::outage::{outage_probability, Interferer, LinkOutageInput, OutageTable};
use crate::routing::{draw_service, route, routable_links, CandidateLinkSet, Protocol, RouteOutcome, ServiceRealization};
use crate::topology::{place_mobiles, NetworkConfig, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub num_topologies: usize,
    /// `K_t`; must be a perfect square.
    pub trials_per_topology: usize,
    pub max_attempts: u32,
    /// Delay `T` of one transmission over a link.
    pub slot_delay: f64,
    /// Excess delay `T_e` added by each retransmission.
    pub excess_delay: f64,
    pub master_seed: u64,
    pub protocols: Vec<Protocol>,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.num_topologies == 0 {
            return bad("number of topologies must be at least 1".into());
        }
        if self.trials_per_topology == 0 || integer_sqrt(self.trials_per_topology).is_none() {
            return bad(format!(
                "K_t must be a perfect square, got {}",
                self.trials_per_topology
            ));
        }
        if self.max_attempts == 0 {
            return bad("maximum number of attempts B must be at least 1".into());
        }
        if !(self.slot_delay > 0.0) {
            return bad(format!("link delay T must be > 0, got {}", self.slot_delay));
        }
        if !(self.excess_delay >= 0.0) {
            return bad(format!("excess delay must be ≥ 0, got {}", self.excess_delay));
        }
        if self.protocols.is_empty() {
            return bad("at least one protocol must be selected".into());
        }
        let mut sorted = self.protocols.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.protocols.len() {
            return bad("protocol list contains duplicates".into());
        }
        Ok(())
    }

    /// `√K_t`: service draws per topology and trials per service draw.
    pub fn level_size(&self) -> usize {
        integer_sqrt(self.trials_per_topology).unwrap_or(0)
    }
}

fn integer_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Relay service probability `μ` and transmit probability `p`, common to all
/// relays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceModel {
    pub relay_prob: f64,
    pub transmit_prob: f64,
}

impl ServiceModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("relay service", self.relay_prob), ("transmit", self.transmit_prob)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} probability must lie in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Topology = 1,
    Shadowing = 2,
    Service = 3,
    Trial = 4,
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one random stream: SplitMix64 folded over
/// `(master, topology, service, trial, tag)` in that order. This mapping is
/// part of the replay contract and must not change.
pub fn derive_seed(master: u64, topology_id: u64, service_id: u64, trial_id: u64, tag: StreamTag) -> u64 {
    [topology_id, service_id, trial_id, tag as u64]
        .into_iter()
        .fold(splitmix64(master), |h, x| splitmix64(h ^ x))
}

pub fn stream(master: u64, topology_id: usize, service_id: usize, trial_id: usize, tag: StreamTag) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(
        master,
        topology_id as u64,
        service_id as u64,
        trial_id as u64,
        tag,
    ))
}

/// Level-1 draw for topology `topology_id`: placement and shadowing.
pub fn draw_topology(
    master_seed: u64,
    topology_id: usize,
    network: &NetworkConfig,
    channel: &ChannelConfig,
) -> Result<(Topology, ChannelRealization)> {
    let topology = place_mobiles(network, &mut stream(master_seed, topology_id, 0, 0, StreamTag::Topology))?;
    let shadow = draw_shadowing(
        &topology,
        channel.shadowing_std_db,
        &mut stream(master_seed, topology_id, 0, 0, StreamTag::Shadowing),
    );
    let realization = ChannelRealization::new(&topology, shadow, channel)?;
    Ok((topology, realization))
}

/// Outage probability of every routable link. Interferers are the relays
/// not in service (other than the link endpoints), each active with its
/// transmit probability.
pub fn link_outage_table(
    topology: &Topology,
    channel: &ChannelRealization,
    service: &ServiceRealization,
    config: &ChannelConfig,
) -> Result<OutageTable> {
    let links = routable_links(topology, service);
    let interferers: Vec<usize> = (1..=topology.num_relays())
        .filter(|&i| !service.is_eligible(i) && service.transmit_prob(i) > 0.0)
        .collect();
    let mut table = OutageTable::with_capacity(links.len());
    let mut input = LinkOutageInput {
        desired_omega: 1.0,
        desired_m: 1,
        interferers: Vec::with_capacity(interferers.len()),
        inv_snr: config.inv_snr(),
        threshold: config.sinr_threshold,
    };
    for link in links {
        let (k, j) = (link.from, link.to);
        input.desired_omega = channel.normalized_power(k, j, k);
        input.desired_m = channel.nakagami(k, j);
        input.interferers.clear();
        input.interferers.extend(
            interferers
                .iter()
                .filter(|&&i| i != k && i != j)
                .map(|&i| Interferer::new(channel.normalized_power(i, j, k), channel.nakagami(i, j), service.transmit_prob(i))),
        );
        table.push(link, outage_probability(&input)?);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub topology_id: usize,
    pub service_id: usize,
    pub trial_id: usize,
    /// One outcome per selected protocol, in plan order.
    pub outcomes: Vec<RouteOutcome>,
}

/// Everything known about one trial, handed to an observer.
pub struct TrialView<'a> {
    pub record: &'a TrialRecord,
    pub topology: &'a Topology,
    pub candidates: &'a CandidateLinkSet,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    /// Report completed topologies on standard error.
    pub progress: bool,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub protocols: Vec<Protocol>,
    pub density: f64,
    /// `per_topology[p][t]` for protocol index `p` and topology `t`.
    pub per_topology: Vec<Vec<TopologyMetrics>>,
    pub averages: Vec<SpatialAverages>,
}

impl RunResult {
    fn index(&self, protocol: Protocol) -> Option<usize> {
        self.protocols.iter().position(|&p| p == protocol)
    }

    pub fn topology_metrics(&self, protocol: Protocol) -> Option<&[TopologyMetrics]> {
        self.index(protocol).map(|i| self.per_topology[i].as_slice())
    }

    pub fn averages(&self, protocol: Protocol) -> Option<&SpatialAverages> {
        self.index(protocol).map(|i| &self.averages[i])
    }
}

pub fn run(
    plan: &SimulationPlan,
    network: &NetworkConfig,
    channel: &ChannelConfig,
    service: &ServiceModel,
    options: &RunOptions,
) -> Result<RunResult> {
    run_observed(plan, network, channel, service, options, &|_| {})
}

/// Like [`run`], calling `observer` after every trial. Calls for different
/// topologies may arrive concurrently and in any order; within a topology
/// they arrive in (service, trial) order.
pub fn run_observed(
    plan: &SimulationPlan,
    network: &NetworkConfig,
    channel: &ChannelConfig,
    service: &ServiceModel,
    options: &RunOptions,
    observer: &(dyn Fn(&TrialView<'_>) + Sync),
) -> Result<RunResult> {
    plan.validate()?;
    network.validate()?;
    channel.validate(network)?;
    service.validate()?;

    let done = AtomicUsize::new(0);
    let report_every = (plan.num_topologies / 10).max(1);
    let work = |t: usize| -> Result<Vec<TrialAccumulator>> {
        let acc = run_topology(t, plan, network, channel, service, observer)?;
        if options.progress {
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n.is_multiple_of(report_every) || n == plan.num_topologies {
                eprintln!("topologies completed: {n}/{}", plan.num_topologies);
            }
        }
        Ok(acc)
    };
    let per_topology: Vec<Vec<TrialAccumulator>> = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SimError::InvalidConfig(format!("thread pool: {e}")))?
            .install(|| (0..plan.num_topologies).into_par_iter().map(work).collect::<Result<_>>())?,
        None => (0..plan.num_topologies).into_par_iter().map(work).collect::<Result<_>>()?,
    };

    let density = transmitter_density(network.num_relays, network.net_radius);
    let mut metrics = vec![Vec::with_capacity(plan.num_topologies); plan.protocols.len()];
    for accs in &per_topology {
        for (p, acc) in accs.iter().enumerate() {
            metrics[p].push(acc.finish(density)?);
        }
    }
    let averages = metrics
        .iter()
        .map(|m| spatial_averages(m))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        protocols: plan.protocols.clone(),
        density,
        per_topology: metrics,
        averages,
    })
}

fn run_topology(
    topology_id: usize,
    plan: &SimulationPlan,
    network: &NetworkConfig,
    channel: &ChannelConfig,
    service: &ServiceModel,
    observer: &(dyn Fn(&TrialView<'_>) + Sync),
) -> Result<Vec<TrialAccumulator>> {
    let seed = plan.master_seed;
    let (topology, realization) =
        draw_topology(seed, topology_id, network, channel).map_err(|e| e.in_trial(topology_id, 0))?;
    let n = topology.len();
    let relay_prob = vec![service.relay_prob; network.num_relays];
    let transmit_prob = vec![service.transmit_prob; network.num_relays];
    let level = plan.level_size();
    let mut acc = vec![TrialAccumulator::default(); plan.protocols.len()];

    for service_id in 0..level {
        let ctx = |e: SimError| e.in_trial(topology_id, service_id);
        let svc = draw_service(
            &relay_prob,
            &transmit_prob,
            &mut stream(seed, topology_id, service_id, 0, StreamTag::Service),
        )
        .map_err(ctx)?;
        let table = link_outage_table(&topology, &realization, &svc, channel).map_err(ctx)?;

        for trial_id in 0..level {
            let mut rng = stream(seed, topology_id, service_id, trial_id, StreamTag::Trial);
            let candidates = CandidateLinkSet::simulate(
                n,
                &table,
                plan.max_attempts,
                plan.slot_delay,
                plan.excess_delay,
                &mut rng,
            );
            let outcomes: Vec<RouteOutcome> = plan
                .protocols
                .iter()
                .map(|&p| route(p, &candidates, &topology))
                .collect();
            for (a, o) in acc.iter_mut().zip(&outcomes) {
                a.record(o);
            }
            let record = TrialRecord {
                topology_id,
                service_id,
                trial_id,
                outcomes,
            };
            observer(&TrialView {
                record: &record,
                topology: &topology,
                candidates: &candidates,
            });
        }
    }
    Ok(acc)
}
