//! Per-topology routing metrics and their spatial averages.

use std::io::Write;

use crate::error::{Result, SimError};
use crate::routing::{Protocol, RouteOutcome};
use crate::topology::fmt_f64;

/// Density of potential transmitters, `(M + 1) / (π r_net²)`.
pub fn transmitter_density(num_relays: usize, net_radius: f64) -> f64 {
    (num_relays + 1) as f64 / (std::f64::consts::PI * net_radius * net_radius)
}

/// Running sums over the trials of one topology for one protocol.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrialAccumulator {
    pub trials: u64,
    pub failures: u64,
    pub delay_sum: f64,
    pub hop_sum: u64,
    pub inverse_delay_sum: f64,
}

impl TrialAccumulator {
    pub fn record(&mut self, outcome: &RouteOutcome) {
        self.trials += 1;
        match outcome.delay {
            Some(d) => {
                self.delay_sum += d;
                self.hop_sum += outcome.hops() as u64;
                self.inverse_delay_sum += 1.0 / d;
            }
            None => self.failures += 1,
        }
    }

    pub fn merge(&mut self, other: &TrialAccumulator) {
        self.trials += other.trials;
        self.failures += other.failures;
        self.delay_sum += other.delay_sum;
        self.hop_sum += other.hop_sum;
        self.inverse_delay_sum += other.inverse_delay_sum;
    }

    pub fn finish(&self, density: f64) -> Result<TopologyMetrics> {
        if self.trials == 0 {
            return Err(SimError::InvalidInput("no trials recorded".into()));
        }
        let k = self.trials as f64;
        let successes = self.trials - self.failures;
        let (delay, hops) = if successes == 0 {
            (None, None)
        } else {
            let s = successes as f64;
            (Some(self.delay_sum / s), Some(self.hop_sum as f64 / s))
        };
        Ok(TopologyMetrics {
            reliability: 1.0 - self.failures as f64 / k,
            cond_avg_delay: delay,
            cond_avg_hops: hops,
            ase: density / k * self.inverse_delay_sum,
            failures: self.failures,
            trials: self.trials,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopologyMetrics {
    /// `R_t = 1 − F_t / K_t`.
    pub reliability: f64,
    /// Mean delay over successful trials; undefined when every trial failed.
    pub cond_avg_delay: Option<f64>,
    pub cond_avg_hops: Option<f64>,
    /// Normalized area spectral efficiency `A_t`.
    pub ase: f64,
    pub failures: u64,
    pub trials: u64,
}

pub fn topology_metrics(outcomes: &[RouteOutcome], density: f64) -> Result<TopologyMetrics> {
    let mut acc = TrialAccumulator::default();
    for o in outcomes {
        acc.record(o);
    }
    acc.finish(density)
}

/// Arithmetic mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl Estimate {
    fn from_values(values: &[f64]) -> Option<Estimate> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_error = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Some(Estimate {
            mean,
            std_error,
            count: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialAverages {
    pub reliability: Estimate,
    pub delay: Option<Estimate>,
    pub hops: Option<Estimate>,
    pub ase: Estimate,
    pub topologies: usize,
    /// Topologies dropped from the delay and hop means because every trial failed.
    pub undefined: usize,
}

pub fn spatial_averages(per_topology: &[TopologyMetrics]) -> Result<SpatialAverages> {
    if per_topology.is_empty() {
        return Err(SimError::InvalidInput("need at least one topology".into()));
    }
    let collect = |f: &dyn Fn(&TopologyMetrics) -> Option<f64>| -> Vec<f64> {
        per_topology.iter().filter_map(f).collect()
    };
    let r = collect(&|m| Some(m.reliability));
    let a = collect(&|m| Some(m.ase));
    let d = collect(&|m| m.cond_avg_delay);
    let h = collect(&|m| m.cond_avg_hops);
    Ok(SpatialAverages {
        reliability: Estimate::from_values(&r).expect("non-empty"),
        delay: Estimate::from_values(&d),
        hops: Estimate::from_values(&h),
        ase: Estimate::from_values(&a).expect("non-empty"),
        topologies: per_topology.len(),
        undefined: per_topology.len() - d.len(),
    })
}

fn opt(v: Option<f64>) -> String {
    fmt_f64(v.unwrap_or(f64::NAN))
}

pub const TOPOLOGY_CSV_HEADER: [&str; 7] = ["topology_id", "protocol", "R_t", "D_t", "H_t", "A_t", "F_t"];

/// One row per topology; undefined conditional means are written as `NaN`.
pub fn write_topology_csv<W: Write>(
    writer: W,
    protocol: Protocol,
    per_topology: &[TopologyMetrics],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TOPOLOGY_CSV_HEADER)?;
    for (t, m) in per_topology.iter().enumerate() {
        w.write_record([
            t.to_string(),
            protocol.to_string(),
            fmt_f64(m.reliability),
            opt(m.cond_avg_delay),
            opt(m.cond_avg_hops),
            fmt_f64(m.ase),
            m.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SUMMARY_CSV_HEADER: [&str; 12] = [
    "sweep_value",
    "protocol",
    "R_bar",
    "D_bar",
    "H_bar",
    "A_bar",
    "R_se",
    "D_se",
    "H_se",
    "A_se",
    "topologies",
    "undefined_topologies",
];

pub fn summary_record(sweep_value: f64, protocol: Protocol, avg: &SpatialAverages) -> Vec<String> {
    vec![
        fmt_f64(sweep_value),
        protocol.to_string(),
        fmt_f64(avg.reliability.mean),
        opt(avg.delay.map(|e| e.mean)),
        opt(avg.hops.map(|e| e.mean)),
        fmt_f64(avg.ase.mean),
        fmt_f64(avg.reliability.std_error),
        opt(avg.delay.map(|e| e.std_error)),
        opt(avg.hops.map(|e| e.std_error)),
        fmt_f64(avg.ase.std_error),
        avg.topologies.to_string(),
        avg.undefined.to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ok(delay: f64, hops: usize) -> RouteOutcome {
        RouteOutcome {
            protocol: Protocol::LeastDelay,
            nodes: (0..=hops).collect(),
            delay: Some(delay),
        }
    }

    fn fail() -> RouteOutcome {
        RouteOutcome::failure(Protocol::LeastDelay)
    }

    #[test]
    fn all_failures() {
        let m = topology_metrics(&[fail(), fail(), fail()], 10.0).unwrap();
        assert_eq!(m.reliability, 0.0);
        assert_eq!(m.ase, 0.0);
        assert_eq!(m.cond_avg_delay, None);
        assert_eq!(m.cond_avg_hops, None);
        assert_eq!(m.failures, 3);
    }

    #[test]
    fn mixed_outcomes() {
        let lambda = 7.0;
        let m = topology_metrics(&[ok(1.0, 1), ok(2.0, 2), fail(), fail()], lambda).unwrap();
        assert_eq!(m.reliability, 0.5);
        assert_eq!(m.cond_avg_delay, Some(1.5));
        assert_eq!(m.cond_avg_hops, Some(1.5));
        assert!((m.ase - lambda / 4.0 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn paper_density() {
        let lambda = transmitter_density(200, 1.0);
        assert!((lambda - 201.0 / std::f64::consts::PI).abs() < 1e-12);
        assert!((lambda - 63.9803).abs() < 1e-4);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(topology_metrics(&[], 1.0).is_err());
        assert!(spatial_averages(&[]).is_err());
    }

    #[test]
    fn averages() {
        let a = topology_metrics(&[ok(1.0, 1), ok(3.0, 2)], 1.0).unwrap();
        let single = spatial_averages(&[a]).unwrap();
        assert_eq!(single.reliability.mean, a.reliability);
        assert_eq!(single.delay.unwrap().mean, a.cond_avg_delay.unwrap());
        assert_eq!(single.ase.mean, a.ase);

        let same = spatial_averages(&[a, a, a]).unwrap();
        assert_eq!(same.hops.unwrap().mean, 1.5);
        assert_eq!(same.reliability.std_error, 0.0);

        let mk = |r: f64| TopologyMetrics {
            reliability: r,
            cond_avg_delay: None,
            cond_avg_hops: None,
            ase: 0.0,
            failures: 0,
            trials: 1,
        };
        let two = spatial_averages(&[mk(0.4), mk(0.8)]).unwrap();
        assert!((two.reliability.mean - 0.6).abs() < 1e-15);
        assert_eq!(two.undefined, 2);
        assert!(two.delay.is_none());
    }

    #[test]
    fn undefined_topologies_are_dropped_from_conditional_means() {
        let good = topology_metrics(&[ok(2.0, 2)], 1.0).unwrap();
        let bad = topology_metrics(&[fail()], 1.0).unwrap();
        let avg = spatial_averages(&[good, bad]).unwrap();
        assert_eq!(avg.delay.unwrap().mean, 2.0);
        assert_eq!(avg.reliability.mean, 0.5);
        assert_eq!(avg.undefined, 1);
    }

    #[test]
    fn csv_marks_undefined_as_nan() {
        let bad = topology_metrics(&[fail()], 1.0).unwrap();
        let mut buf = Vec::new();
        write_topology_csv(&mut buf, Protocol::MaximumProgress, &[bad]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("topology_id,protocol,R_t,D_t,H_t,A_t,F_t\n"));
        assert!(text.contains("0,MPR,0.0000000000000000e0,NaN,NaN,0.0000000000000000e0,1"));
    }

    fn arb_outcomes() -> impl Strategy<Value = Vec<RouteOutcome>> {
        prop::collection::vec(
            prop_oneof![
                Just(None),
                (1u32..8, 1usize..10).prop_map(|(d, h)| Some((d as f64 * 2.0 - 1.0, h))),
            ],
            1..50,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|o| match o {
                    Some((d, h)) => ok(d, h),
                    None => fail(),
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn reliability_and_ase_bounds(outcomes in arb_outcomes()) {
            let lambda = 3.0;
            let m = topology_metrics(&outcomes, lambda).unwrap();
            let failures = outcomes.iter().filter(|o| !o.success()).count();
            prop_assert_eq!(m.reliability, 1.0 - failures as f64 / outcomes.len() as f64);
            // every delay is at least one slot of length 1
            prop_assert!(m.ase <= lambda / 1.0 + 1e-12);
            if let Some(d) = m.cond_avg_delay {
                prop_assert!(d >= 1.0);
            }
            if let Some(h) = m.cond_avg_hops {
                prop_assert!(h >= 1.0);
            }
        }

        #[test]
        fn permutation_invariant(outcomes in arb_outcomes()) {
            let m = topology_metrics(&outcomes, 2.0).unwrap();
            let mut sorted = outcomes.clone();
            sorted.sort_by(|a, b| a.delay.unwrap_or(f64::INFINITY).total_cmp(&b.delay.unwrap_or(f64::INFINITY)));
            let s = topology_metrics(&sorted, 2.0).unwrap();
            prop_assert_eq!(m.reliability, s.reliability);
            prop_assert!((m.ase - s.ase).abs() <= 1e-12);
            prop_assert_eq!(m.cond_avg_hops, s.cond_avg_hops);
            match (m.cond_avg_delay, s.cond_avg_delay) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn success_never_hurts(outcomes in arb_outcomes(), pick in 0usize..50, d in 1u32..8) {
            let before = topology_metrics(&outcomes, 2.0).unwrap();
            let mut improved = outcomes.clone();
            let idx = pick % improved.len();
            if !improved[idx].success() {
                improved[idx] = ok(d as f64, 1);
            }
            let after = topology_metrics(&improved, 2.0).unwrap();
            prop_assert!(after.reliability >= before.reliability);
            prop_assert!(after.ase >= before.ase);
        }

        #[test]
        fn merge_matches_single_pass(outcomes in arb_outcomes(), split in 0usize..50) {
            let cut = split % outcomes.len();
            let mut left = TrialAccumulator::default();
            let mut right = TrialAccumulator::default();
            outcomes[..cut].iter().for_each(|o| left.record(o));
            outcomes[cut..].iter().for_each(|o| right.record(o));
            left.merge(&right);
            let mut whole = TrialAccumulator::default();
            outcomes.iter().for_each(|o| whole.record(o));
            prop_assert_eq!(left.trials, whole.trials);
            prop_assert_eq!(left.failures, whole.failures);
            prop_assert_eq!(left.hop_sum, whole.hop_sum);
            prop_assert!((left.inverse_delay_sum - whole.inverse_delay_sum).abs() < 1e-12);
        }
    }
}
