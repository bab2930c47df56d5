//! Edge-client to edge-cloud offloading.
//!
//! A moving vehicle either runs a task locally or ships it to one of several
//! roadside cloud nodes. Local execution costs
//!
//! ```text
//! t_L = w / f_L
//! e_L = (alpha + beta * f_L^3) * w / f_L
//! ```
//!
//! and offloading to node `i` costs
//!
//! ```text
//! t_off = w / f_off + D_in / r + D_out / r
//! e_off = P_in * D_in / r + P_out * D_out / r
//! ```
//!
//! Both are folded into `c = eta * t + (1 - eta) * e`. Seconds and joules are
//! summed as-is, so callers should pre-scale their units if the magnitudes
//! differ wildly.
//!
//! Node selection prefers the node the vehicle stays connected to the
//! longest (its dwell time), falling through to the next-longest when a node
//! lacks capacity or offers no benefit.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OffloadError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("malformed scenario: {0}")]
    Malformed(String),
}

impl OffloadError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        OffloadError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Name of the offending field, for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            OffloadError::Invalid { field, .. } => Some(field),
            OffloadError::Malformed(_) => None,
        }
    }
}

/// Position in metres, speed in m/s and heading in radians. The vehicle
/// moves by `(v sinθ, v cosθ)` per second, so θ = 0 points along +Y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub theta: f64,
}

impl VehicleState {
    /// Validates the state and normalises the heading into `[0, 2π)`.
    pub fn new(x: f64, y: f64, v: f64, theta: f64) -> Result<Self, OffloadError> {
        let mut s = Self { x, y, v, theta };
        s.validate("vehicle")?;
        s.theta = s.theta.rem_euclid(TAU);
        Ok(s)
    }

    fn validate(&self, prefix: &str) -> Result<(), OffloadError> {
        finite(prefix, "x", self.x)?;
        finite(prefix, "y", self.y)?;
        finite(prefix, "theta", self.theta)?;
        non_negative(prefix, "v", self.v)
    }

    /// Position after `t` seconds of straight-line motion.
    pub fn position_after(&self, t: f64) -> (f64, f64) {
        (
            self.x + t * self.v * self.theta.sin(),
            self.y + t * self.v * self.theta.cos(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudNode {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Communication range in metres.
    pub r_range: f64,
    /// Compute speed in instructions per second.
    pub f_off: f64,
    /// Remaining processing capacity in instructions.
    pub w_avail: f64,
    /// Link bandwidth in bytes per second.
    pub bandwidth: f64,
}

impl CloudNode {
    pub fn validate(&self, prefix: &str) -> Result<(), OffloadError> {
        if self.id.is_empty() {
            return Err(OffloadError::invalid(format!("{prefix}.id"), "must not be empty"));
        }
        if self.id == "local" {
            return Err(OffloadError::invalid(
                format!("{prefix}.id"),
                "`local` is reserved for the local choice",
            ));
        }
        finite(prefix, "x", self.x)?;
        finite(prefix, "y", self.y)?;
        positive(prefix, "r_range", self.r_range)?;
        positive(prefix, "f_off", self.f_off)?;
        non_negative(prefix, "w_avail", self.w_avail)?;
        positive(prefix, "bandwidth", self.bandwidth)
    }
}

/// Task and client power parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Workload in instructions.
    pub w: f64,
    /// Local compute speed in instructions per second.
    pub f_l: f64,
    /// Static power in watts.
    pub alpha: f64,
    /// Dynamic power coefficient, watts per (instructions/s)^3.
    pub beta: f64,
    /// Weight of time against energy, in `[0, 1]`.
    pub eta: f64,
    /// Bytes sent to the node.
    pub d_in: f64,
    /// Bytes received from the node.
    pub d_out: f64,
    /// Radio power while sending, watts.
    pub p_in: f64,
    /// Radio power while receiving, watts.
    pub p_out: f64,
}

impl CostParams {
    pub fn validate(&self) -> Result<(), OffloadError> {
        let p = "params";
        positive(p, "w", self.w)?;
        positive(p, "f_l", self.f_l)?;
        non_negative(p, "alpha", self.alpha)?;
        non_negative(p, "beta", self.beta)?;
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(OffloadError::invalid("params.eta", "must lie in [0, 1]"));
        }
        non_negative(p, "d_in", self.d_in)?;
        non_negative(p, "d_out", self.d_out)?;
        non_negative(p, "p_in", self.p_in)?;
        non_negative(p, "p_out", self.p_out)
    }

    /// `eta * time + (1 - eta) * energy`.
    pub fn weigh(&self, time: f64, energy: f64) -> f64 {
        self.eta * time + (1.0 - self.eta) * energy
    }
}

fn finite(prefix: &str, name: &str, v: f64) -> Result<(), OffloadError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(OffloadError::invalid(format!("{prefix}.{name}"), "must be finite"))
    }
}

fn positive(prefix: &str, name: &str, v: f64) -> Result<(), OffloadError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(OffloadError::invalid(format!("{prefix}.{name}"), format!("must be > 0 (got {v})")))
    }
}

fn non_negative(prefix: &str, name: &str, v: f64) -> Result<(), OffloadError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(OffloadError::invalid(format!("{prefix}.{name}"), format!("must be >= 0 (got {v})")))
    }
}

/// Time a vehicle stays inside a node's range. `Unbounded` sorts above every
/// finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dwell {
    Finite(f64),
    Unbounded,
}

impl Dwell {
    pub fn as_secs(self) -> f64 {
        match self {
            Dwell::Finite(t) => t,
            Dwell::Unbounded => f64::INFINITY,
        }
    }

    pub fn is_covered(self) -> bool {
        self.as_secs() > 0.0
    }
}

impl Eq for Dwell {}

impl PartialOrd for Dwell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dwell {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_secs().total_cmp(&other.as_secs())
    }
}

impl fmt::Display for Dwell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dwell::Finite(t) => write!(f, "{t}s"),
            Dwell::Unbounded => f.write_str("unbounded"),
        }
    }
}

impl Serialize for Dwell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Dwell::Finite(t) => s.serialize_f64(*t),
            Dwell::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Dwell {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Secs(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Secs(t) => Ok(Dwell::Finite(t)),
            Raw::Word(w) if w == "unbounded" => Ok(Dwell::Unbounded),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("bad dwell `{w}`"))),
        }
    }
}

/// Time until straight-line motion carries the vehicle out of the node's
/// range circle. Zero if the vehicle is outside the range now; unbounded if
/// it is inside and stationary.
pub fn dwell_time(vehicle: &VehicleState, node: &CloudNode) -> Dwell {
    let dx = vehicle.x - node.x;
    let dy = vehicle.y - node.y;
    let c = dx * dx + dy * dy - node.r_range * node.r_range;
    if c > 0.0 {
        return Dwell::Finite(0.0);
    }
    if vehicle.v == 0.0 {
        return Dwell::Unbounded;
    }
    // Distance s travelled along the heading solves s^2 + 2 p s + c = 0,
    // with p the offset projected on the heading and c <= 0.
    let p = dx * vehicle.theta.sin() + dy * vehicle.theta.cos();
    let root = (p * p - c).sqrt();
    let distance = if p > 0.0 { -c / (p + root) } else { root - p };
    Dwell::Finite(distance / vehicle.v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    /// Completion time, seconds.
    pub time: f64,
    /// Client energy, joules.
    pub energy: f64,
    /// Weighted cost.
    pub cost: f64,
}

pub fn local_cost(p: &CostParams) -> Cost {
    let time = p.w / p.f_l;
    let power = p.alpha + p.beta * p.f_l * p.f_l * p.f_l;
    let energy = power * p.w / p.f_l;
    Cost {
        time,
        energy,
        cost: p.weigh(time, energy),
    }
}

pub fn offload_cost(p: &CostParams, node: &CloudNode) -> Cost {
    let r = node.bandwidth;
    let time = p.w / node.f_off + p.d_in / r + p.d_out / r;
    let energy = p.p_in * p.d_in / r + p.p_out * p.d_out / r;
    Cost {
        time,
        energy,
        cost: p.weigh(time, energy),
    }
}

/// First gate a node failed, in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    OutOfRange,
    InsufficientCapacity,
    CostNotLower,
    TimeNotLower,
    LeavesRangeBeforeDone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: String,
    pub dwell: Dwell,
    pub offload: Cost,
    pub eligible: bool,
    pub rejection: Option<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    Local,
    Node(String),
}

impl Serialize for Choice {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Choice::Local => s.serialize_str("local"),
            Choice::Node(id) => s.serialize_str(id),
        }
    }
}

impl<'de> Deserialize<'de> for Choice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == "local" { Choice::Local } else { Choice::Node(s) })
    }
}

/// Outcome of [`select_node`]. Node reports are in walk order (dwell
/// descending, then id ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadDecision {
    pub choice: Choice,
    pub local: Cost,
    pub nodes: Vec<NodeReport>,
}

impl OffloadDecision {
    pub fn chosen(&self) -> Option<&NodeReport> {
        match &self.choice {
            Choice::Local => None,
            Choice::Node(id) => self.nodes.iter().find(|n| &n.id == id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectConfig {
    /// Require the offloaded task to finish before the vehicle leaves range.
    pub require_coverage: bool,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            require_coverage: true,
        }
    }
}

pub fn select_node(vehicle: &VehicleState, nodes: &[CloudNode], p: &CostParams) -> OffloadDecision {
    select_node_with(vehicle, nodes, p, SelectConfig::default())
}

/// Walks nodes from longest to shortest dwell and picks the first that is in
/// range, has capacity for the workload, beats local execution on both cost
/// and time, and (if configured) finishes before the vehicle leaves range.
pub fn select_node_with(
    vehicle: &VehicleState,
    nodes: &[CloudNode],
    p: &CostParams,
    config: SelectConfig,
) -> OffloadDecision {
    let local = local_cost(p);
    let mut reports: Vec<NodeReport> = nodes
        .iter()
        .map(|node| {
            let dwell = dwell_time(vehicle, node);
            let offload = offload_cost(p, node);
            let rejection = if !dwell.is_covered() {
                Some(Rejection::OutOfRange)
            } else if node.w_avail < p.w {
                Some(Rejection::InsufficientCapacity)
            } else if offload.cost >= local.cost {
                Some(Rejection::CostNotLower)
            } else if offload.time >= local.time {
                Some(Rejection::TimeNotLower)
            } else if config.require_coverage && offload.time > dwell.as_secs() {
                Some(Rejection::LeavesRangeBeforeDone)
            } else {
                None
            };
            NodeReport {
                id: node.id.clone(),
                dwell,
                offload,
                eligible: rejection.is_none(),
                rejection,
            }
        })
        .collect();
    reports.sort_by(|a, b| b.dwell.cmp(&a.dwell).then_with(|| a.id.cmp(&b.id)));
    let choice = reports
        .iter()
        .find(|r| r.eligible)
        .map_or(Choice::Local, |r| Choice::Node(r.id.clone()));
    OffloadDecision {
        choice,
        local,
        nodes: reports,
    }
}

/// Input file for the offload command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub vehicle: VehicleState,
    pub params: CostParams,
    #[serde(default)]
    pub nodes: Vec<CloudNode>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, OffloadError> {
        let mut s: Scenario =
            serde_json::from_str(text).map_err(|e| OffloadError::Malformed(e.to_string()))?;
        s.validate()?;
        s.vehicle.theta = s.vehicle.theta.rem_euclid(TAU);
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), OffloadError> {
        self.vehicle.validate("vehicle")?;
        self.params.validate()?;
        let mut ids = std::collections::HashSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let prefix = format!("nodes[{i}]");
            node.validate(&prefix)?;
            if !ids.insert(node.id.as_str()) {
                return Err(OffloadError::invalid(format!("{prefix}.id"), "duplicate node id"));
            }
        }
        Ok(())
    }

    pub fn decide(&self, config: SelectConfig) -> OffloadDecision {
        select_node_with(&self.vehicle, &self.nodes, &self.params, config)
    }
}
