//! Network realizations: mobiles placed in a disc by sequential uniform
//! clustering with exclusion zones.
//!
//! The disc is centered at the origin. The source sits at the center and the
//! destination on the positive x-axis at the configured distance; both are
//! placed before any relay. Relays are drawn uniformly in the disc and redrawn
//! until they fall outside every previously placed exclusion zone.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub const DEFAULT_REDRAW_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    /// Number of potential relays `M`; the network holds `M + 2` mobiles.
    pub num_relays: usize,
    pub net_radius: f64,
    pub exclusion_radius: f64,
    pub source_dest_distance: f64,
    /// Maximum redraws for a single relay before placement is declared infeasible.
    pub redraw_cap: u64,
}

impl NetworkConfig {
    pub fn new(
        num_relays: usize,
        net_radius: f64,
        exclusion_radius: f64,
        source_dest_distance: f64,
    ) -> Self {
        NetworkConfig {
            num_relays,
            net_radius,
            exclusion_radius,
            source_dest_distance,
            redraw_cap: DEFAULT_REDRAW_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if !(self.net_radius > 0.0 && self.net_radius.is_finite()) {
            return bad(format!(
                "network radius must be positive, got {}",
                self.net_radius
            ));
        }
        if !(self.exclusion_radius >= 0.0 && self.exclusion_radius < self.net_radius) {
            return bad(format!(
                "exclusion radius must satisfy 0 <= r_ex < r_net, got {}",
                self.exclusion_radius
            ));
        }
        if !(self.source_dest_distance >= 0.0 && self.source_dest_distance <= self.net_radius) {
            return bad(format!(
                "source-destination distance must lie in [0, r_net], got {}",
                self.source_dest_distance
            ));
        }
        if self.source_dest_distance < self.exclusion_radius {
            return bad(format!(
                "source-destination distance {} is inside the exclusion radius {}",
                self.source_dest_distance, self.exclusion_radius
            ));
        }
        if self.redraw_cap == 0 {
            return bad("redraw cap must be at least 1".into());
        }
        Ok(())
    }

    pub fn num_mobiles(&self) -> usize {
        self.num_relays + 2
    }
}

/// Positions of the `M + 2` mobiles. Index 0 is the source and index `M + 1`
/// the destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Point>,
}

impl Topology {
    pub fn from_positions(positions: Vec<Point>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(SimError::InvalidInput(format!(
                "a topology needs a source and a destination, got {} positions",
                positions.len()
            )));
        }
        Ok(Topology { positions })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Point {
        self.positions[i]
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn num_relays(&self) -> usize {
        self.positions.len() - 2
    }

    pub fn source(&self) -> usize {
        0
    }

    pub fn destination(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.positions[i].distance(&self.positions[j])
    }

    /// Distance from mobile `i` to the destination.
    pub fn remaining(&self, i: usize) -> f64 {
        self.distance(i, self.destination())
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                best = best.min(a.distance(b));
            }
        }
        best
    }

    /// Writes `index,x,y` rows with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "x", "y"])?;
        for (i, p) in self.positions.iter().enumerate() {
            w.write_record([i.to_string(), fmt_f64(p.x), fmt_f64(p.y)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut positions = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |k: usize| -> Result<&str> {
                record.get(k).ok_or_else(|| {
                    SimError::InvalidInput(format!("topology row {}: missing column {k}", row + 1))
                })
            };
            let index: usize = field(0)?.trim().parse().map_err(|e| {
                SimError::InvalidInput(format!("topology row {}: bad index: {e}", row + 1))
            })?;
            if index != positions.len() {
                return Err(SimError::InvalidInput(format!(
                    "topology row {}: expected index {}, found {index}",
                    row + 1,
                    positions.len()
                )));
            }
            let coord = |k: usize| -> Result<f64> {
                field(k)?.trim().parse().map_err(|e| {
                    SimError::InvalidInput(format!("topology row {}: bad coordinate: {e}", row + 1))
                })
            };
            positions.push(Point::new(coord(1)?, coord(2)?));
        }
        Topology::from_positions(positions)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

/// Places the source at the origin, the destination at `(δ, 0)`, then the
/// relays one by one with rejection against all earlier exclusion zones.
pub fn place_mobiles<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<Topology> {
    cfg.validate()?;
    let n = cfg.num_mobiles();
    let mut positions = Vec::with_capacity(n);
    positions.push(Point::ORIGIN);
    let destination = Point::new(cfg.source_dest_distance, 0.0);

    let r_ex = cfg.exclusion_radius;
    for index in 1..=cfg.num_relays {
        let mut redraws = 0u64;
        loop {
            let candidate = uniform_in_disc(cfg.net_radius, rng);
            let clear = r_ex == 0.0
                || (candidate.distance(&destination) >= r_ex
                    && positions.iter().all(|p| candidate.distance(p) >= r_ex));
            if clear {
                positions.push(candidate);
                break;
            }
            redraws += 1;
            if redraws >= cfg.redraw_cap {
                return Err(SimError::PlacementInfeasible { index, redraws });
            }
        }
    }
    positions.push(destination);
    Ok(Topology { positions })
}
