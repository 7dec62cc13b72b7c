use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

/// Errors raised while configuring or running a simulation.
#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value violates one of its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Input to a pure computation violates its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A mobile could not be placed outside the existing exclusion zones.
    #[error("placement infeasible: mobile {index} still overlaps an exclusion zone after {redraws} redraws")]
    PlacementInfeasible { index: usize, redraws: u64 },

    /// The outage series left the unit interval by more than the guard band.
    #[error("numerical instability: outage probability evaluated to {value}")]
    NumericalInstability { value: f64 },

    #[error("topology {topology_id}, service draw {service_id}: {source}")]
    Trial {
        topology_id: usize,
        service_id: usize,
        #[source]
        source: Box<SimError>,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub(crate) fn in_trial(self, topology_id: usize, service_id: usize) -> SimError {
        SimError::Trial {
            topology_id,
            service_id,
            source: Box::new(self),
        }
    }
}
