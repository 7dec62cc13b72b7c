//! Link filtering, per-trial link attempt simulation and path selection for
//! least-delay (LDR), nearest-neighbor (NNR) and maximum-progress (MPR)
//! routing.
//!
//! All three protocols run on the same [`CandidateLinkSet`] within a trial.
//! Links only exist when they strictly reduce the distance to the
//! destination, so every candidate graph is acyclic and the greedy walks
//! always terminate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::outage::OutageTable;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    #[serde(rename = "LDR")]
    LeastDelay,
    #[serde(rename = "NNR")]
    NearestNeighbor,
    #[serde(rename = "MPR")]
    MaximumProgress,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [
        Protocol::LeastDelay,
        Protocol::NearestNeighbor,
        Protocol::MaximumProgress,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Protocol::LeastDelay => "LDR",
            Protocol::NearestNeighbor => "NNR",
            Protocol::MaximumProgress => "MPR",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Protocol {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LDR" => Ok(Protocol::LeastDelay),
            "NNR" => Ok(Protocol::NearestNeighbor),
            "MPR" => Ok(Protocol::MaximumProgress),
            other => Err(SimError::InvalidConfig(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Directed link from transmitter `from` to receiver `to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Link {
    pub from: usize,
    pub to: usize,
}

impl Link {
    pub fn new(from: usize, to: usize) -> Self {
        Link { from, to }
    }
}

/// Relay availability and transmit probabilities for one service draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRealization {
    /// Indexed by mobile; the source and destination are always eligible.
    eligible: Vec<bool>,
    transmit_prob: Vec<f64>,
}

impl ServiceRealization {
    /// Builds a realization from explicit relay availability (`available[r]`
    /// refers to mobile `r + 1`) and per-relay transmit probabilities.
    pub fn from_parts(available: &[bool], transmit_prob: &[f64]) -> Result<Self> {
        if available.len() != transmit_prob.len() {
            return Err(SimError::InvalidInput(format!(
                "{} availability flags for {} transmit probabilities",
                available.len(),
                transmit_prob.len()
            )));
        }
        let n = available.len() + 2;
        let mut eligible = vec![true; n];
        let mut p = vec![0.0; n];
        for (r, (&a, &q)) in available.iter().zip(transmit_prob).enumerate() {
            if !(0.0..=1.0).contains(&q) {
                return Err(SimError::InvalidInput(format!(
                    "transmit probability of relay {} outside [0, 1]: {q}",
                    r + 1
                )));
            }
            eligible[r + 1] = a;
            p[r + 1] = if a { 0.0 } else { q };
        }
        Ok(ServiceRealization {
            eligible,
            transmit_prob: p,
        })
    }

    pub fn num_mobiles(&self) -> usize {
        self.eligible.len()
    }

    /// Whether mobile `i` may terminate or originate a link: the source, the
    /// destination, or an available relay.
    pub fn is_eligible(&self, i: usize) -> bool {
        self.eligible[i]
    }

    pub fn is_available_relay(&self, i: usize) -> bool {
        i != 0 && i + 1 != self.eligible.len() && self.eligible[i]
    }

    pub fn available_relays(&self) -> usize {
        (1..self.eligible.len() - 1).filter(|&i| self.eligible[i]).count()
    }

    /// Transmit probability `p_i`; zero for relays in service.
    pub fn transmit_prob(&self, i: usize) -> f64 {
        self.transmit_prob[i]
    }
}

/// Marks each relay available with probability `μ_i` and zeroes `p_i` for
/// the available ones. Exactly one uniform is consumed per relay.
pub fn draw_service<R: Rng + ?Sized>(
    relay_prob: &[f64],
    transmit_prob: &[f64],
    rng: &mut R,
) -> Result<ServiceRealization> {
    if relay_prob.iter().any(|mu| !(0.0..=1.0).contains(mu)) {
        return Err(SimError::InvalidInput("service probabilities must lie in [0, 1]".into()));
    }
    let available: Vec<bool> = relay_prob
        .iter()
        .map(|&mu| rng.random::<f64>() < mu)
        .collect();
    ServiceRealization::from_parts(&available, transmit_prob)
}

/// Every ordered pair of eligible mobiles that strictly reduces the distance
/// to the destination. Links never enter the source or leave the destination.
pub fn included_links(topology: &Topology, service: &ServiceRealization) -> Vec<Link> {
    let n = topology.len();
    let src = topology.source();
    let dst = topology.destination();
    let remaining: Vec<f64> = (0..n).map(|i| topology.remaining(i)).collect();
    let mut links = Vec::new();
    for a in (0..n).filter(|&a| a != dst && service.is_eligible(a)) {
        for b in (0..n).filter(|&b| b != src && b != a && service.is_eligible(b)) {
            if remaining[b] < remaining[a] {
                links.push(Link::new(a, b));
            }
        }
    }
    links
}

/// Included links that can lie on a path from the source: the tail is the
/// source itself or strictly closer to the destination than the source.
pub fn routable_links(topology: &Topology, service: &ServiceRealization) -> Vec<Link> {
    let limit = topology.remaining(topology.source());
    included_links(topology, service)
        .into_iter()
        .filter(|l| l.from == topology.source() || topology.remaining(l.from) < limit)
        .collect()
}

/// Number of attempts up to and including the first success, or `None` when
/// all `max_attempts` fail. Attempts fail independently with probability
/// `eps`. A single uniform `u ∈ (0, 1]` is inverted through the truncated
/// geometric law: `N = min { n : u > eps^n }`, which makes `N` nondecreasing
/// in `eps` for a fixed stream.
pub fn simulate_link_attempts<R: Rng + ?Sized>(eps: f64, max_attempts: u32, rng: &mut R) -> Option<u32> {
    let u = 1.0 - rng.random::<f64>();
    let mut fail_all = 1.0;
    for n in 1..=max_attempts {
        fail_all *= eps;
        if u > fail_all {
            return Some(n);
        }
    }
    None
}

/// `N T + (N − 1) T_e`.
pub fn link_delay(attempts: u32, slot: f64, excess: f64) -> f64 {
    debug_assert!(attempts >= 1);
    attempts as f64 * slot + (attempts - 1) as f64 * excess
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateLink {
    pub link: Link,
    pub outage: f64,
    pub attempts: u32,
    pub delay: f64,
}

/// Links that delivered within the attempt budget in one trial.
#[derive(Debug, Clone)]
pub struct CandidateLinkSet {
    links: Vec<CandidateLink>,
    outgoing: Vec<Vec<usize>>,
}

impl CandidateLinkSet {
    pub fn new(num_mobiles: usize, links: Vec<CandidateLink>) -> Self {
        let mut outgoing = vec![Vec::new(); num_mobiles];
        for (idx, c) in links.iter().enumerate() {
            outgoing[c.link.from].push(idx);
        }
        CandidateLinkSet { links, outgoing }
    }

    /// Runs the attempt simulation on every link of the outage table.
    pub fn simulate<R: Rng + ?Sized>(
        num_mobiles: usize,
        table: &OutageTable,
        max_attempts: u32,
        slot: f64,
        excess: f64,
        rng: &mut R,
    ) -> Self {
        let links = table
            .iter()
            .filter_map(|&(link, eps)| {
                simulate_link_attempts(eps, max_attempts, rng).map(|n| CandidateLink {
                    link,
                    outage: eps,
                    attempts: n,
                    delay: link_delay(n, slot, excess),
                })
            })
            .collect();
        Self::new(num_mobiles, links)
    }

    pub fn links(&self) -> &[CandidateLink] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn num_mobiles(&self) -> usize {
        self.outgoing.len()
    }

    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = &CandidateLink> {
        self.outgoing[node].iter().map(move |&i| &self.links[i])
    }

    pub fn find(&self, link: Link) -> Option<&CandidateLink> {
        self.outgoing(link.from).find(|c| c.link == link)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteOutcome {
    pub protocol: Protocol,
    /// Mobile sequence from source to destination; empty on failure.
    pub nodes: Vec<usize>,
    /// End-to-end delay; `None` on routing failure.
    pub delay: Option<f64>,
}

impl RouteOutcome {
    pub fn failure(protocol: Protocol) -> Self {
        RouteOutcome {
            protocol,
            nodes: Vec::new(),
            delay: None,
        }
    }

    pub fn success(&self) -> bool {
        self.delay.is_some()
    }

    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// `1/T`, zero on failure.
    pub fn inverse_delay(&self) -> f64 {
        self.delay.map_or(0.0, |d| 1.0 / d)
    }

    pub fn links(&self) -> impl Iterator<Item = Link> + '_ {
        self.nodes.windows(2).map(|w| Link::new(w[0], w[1]))
    }
}

pub fn route(protocol: Protocol, cand: &CandidateLinkSet, topology: &Topology) -> RouteOutcome {
    match protocol {
        Protocol::LeastDelay => least_delay_path(cand, topology),
        Protocol::NearestNeighbor => nearest_neighbor_path(cand, topology),
        Protocol::MaximumProgress => maximum_progress_path(cand, topology),
    }
}

/// Dijkstra label: total delay, then hop count, then node index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Label {
    delay: f64,
    hops: usize,
    node: usize,
}

impl Eq for Label {}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other
            .delay
            .total_cmp(&self.delay)
            .then_with(|| other.hops.cmp(&self.hops))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-delay candidate path. Equal-delay paths are resolved in favour of
/// fewer hops.
pub fn least_delay_path(cand: &CandidateLinkSet, topology: &Topology) -> RouteOutcome {
    let n = cand.num_mobiles();
    let src = topology.source();
    let dst = topology.destination();
    let mut best: Vec<Option<(f64, usize)>> = vec![None; n];
    let mut pred = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[src] = Some((0.0, 0));
    heap.push(Label {
        delay: 0.0,
        hops: 0,
        node: src,
    });

    while let Some(Label { delay, hops, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if node == dst {
            break;
        }
        for c in cand.outgoing(node) {
            let v = c.link.to;
            if done[v] {
                continue;
            }
            let next = (delay + c.delay, hops + 1);
            let better = match best[v] {
                None => true,
                Some((d, h)) => next.0 < d || (next.0 == d && next.1 < h),
            };
            if better {
                best[v] = Some(next);
                pred[v] = node;
                heap.push(Label {
                    delay: next.0,
                    hops: next.1,
                    node: v,
                });
            }
        }
    }

    let Some((total, _)) = best[dst] else {
        return RouteOutcome::failure(Protocol::LeastDelay);
    };
    let mut nodes = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = pred[cur];
        nodes.push(cur);
    }
    nodes.reverse();
    RouteOutcome {
        protocol: Protocol::LeastDelay,
        nodes,
        delay: Some(total),
    }
}

/// Hop-by-hop walk that picks, at each node, the outgoing candidate link
/// minimizing `key`; ties go to the lower receiver index. No backtracking.
fn greedy_path<F>(protocol: Protocol, cand: &CandidateLinkSet, topology: &Topology, key: F) -> RouteOutcome
where
    F: Fn(&CandidateLink) -> f64,
{
    let src = topology.source();
    let dst = topology.destination();
    let mut nodes = vec![src];
    let mut total = 0.0;
    let mut cur = src;
    while cur != dst {
        let next = cand.outgoing(cur).min_by(|a, b| {
            key(a)
                .total_cmp(&key(b))
                .then_with(|| a.link.to.cmp(&b.link.to))
        });
        match next {
            Some(c) => {
                total += c.delay;
                cur = c.link.to;
                nodes.push(cur);
            }
            None => return RouteOutcome::failure(protocol),
        }
    }
    RouteOutcome {
        protocol,
        nodes,
        delay: Some(total),
    }
}

/// Greedy shortest-next-link path.
pub fn nearest_neighbor_path(cand: &CandidateLinkSet, topology: &Topology) -> RouteOutcome {
    greedy_path(Protocol::NearestNeighbor, cand, topology, |c| {
        topology.distance(c.link.from, c.link.to)
    })
}

/// Greedy path minimizing the remaining distance to the destination.
pub fn maximum_progress_path(cand: &CandidateLinkSet, topology: &Topology) -> RouteOutcome {
    greedy_path(Protocol::MaximumProgress, cand, topology, |c| {
        topology.remaining(c.link.to)
    })
}
