//! Place-and-route of optical paths through the mesh.
//!
//! Light enters a unit at one port and leaves at the opposite end, either on
//! the same rail (bar) or the other rail (cross). A route is a sequence of
//! units joined by mesh connections; no unit is used twice. Each routed unit
//! costs `hop + loss·insertion_loss_dB + power·[mode needs phase]`.
//!
//! The search is best-first over partial paths keyed by
//! `(cost, unit-id sequence)`. Keys never decrease along an extension, so the
//! first complete path popped is cost-minimal and, among equal-cost paths,
//! has the lexicographically smallest unit sequence. Costs are accumulated
//! in integer nano-units so that ties are exact.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Mesh, PortId, Program, TbuId};
use crate::tbu::{TbuMode, DEFAULT_INSERTION_LOSS_DB};

/// Upper bound on partial paths expanded by one search.
pub const MAX_EXPANSIONS: usize = 2_000_000;
const COST_SCALE: f64 = 1e9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouterError {
    #[error("source and destination are the same port {0}")]
    SameEndpoints(PortId),
    #[error("{0} is not an external port of the mesh")]
    NotExternal(PortId),
    #[error("blocked unit T{0} does not exist")]
    UnknownTbu(TbuId),
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),
    #[error("no path from {from} to {to}")]
    NoPath { from: PortId, to: PortId },
    #[error("no path between the requested port sets")]
    Unreachable,
    #[error("unit T{0} is already in use")]
    Conflict(TbuId),
    #[error("search exceeded {MAX_EXPANSIONS} expansions")]
    SearchLimit,
    #[error("request {index}: {source}")]
    Request {
        index: usize,
        #[source]
        source: Box<RouterError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub loss_per_db: f64,
    pub power_per_actuator: f64,
    pub hop: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            loss_per_db: 1.0,
            power_per_actuator: 0.0,
            hop: 0.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), RouterError> {
        let all = [self.loss_per_db, self.power_per_actuator, self.hop];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RouterError::InvalidWeights(format!(
                "weights must be finite and non-negative: {self:?}"
            )));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(RouterError::InvalidWeights("all weights are zero".into()));
        }
        Ok(())
    }
}

/// Which routing states draw actuator power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub bar_active: bool,
    pub cross_active: bool,
}

impl Default for PowerModel {
    /// The unit is passive in cross (Δ = 0) and needs Δ = π for bar.
    fn default() -> Self {
        PowerModel {
            bar_active: true,
            cross_active: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouterConfig {
    pub insertion_loss_db: f64,
    pub power: PowerModel,
}

impl Default for RouterConfig {
    fn default() -> Self {
        RouterConfig {
            insertion_loss_db: DEFAULT_INSERTION_LOSS_DB,
            power: PowerModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingRequest {
    pub source: PortId,
    pub destination: PortId,
    pub blocked: BTreeSet<TbuId>,
    pub weights: CostWeights,
}

impl RoutingRequest {
    pub fn new(source: PortId, destination: PortId) -> Self {
        RoutingRequest {
            source,
            destination,
            blocked: BTreeSet::new(),
            weights: CostWeights::default(),
        }
    }

    pub fn blocking(mut self, blocked: impl IntoIterator<Item = TbuId>) -> Self {
        self.blocked.extend(blocked);
        self
    }

    pub fn with_weights(mut self, weights: CostWeights) -> Self {
        self.weights = weights;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteMode {
    Bar,
    Cross,
}

impl From<RouteMode> for TbuMode {
    fn from(m: RouteMode) -> TbuMode {
        match m {
            RouteMode::Bar => TbuMode::Bar,
            RouteMode::Cross => TbuMode::Cross,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub tbu_id: TbuId,
    pub mode: RouteMode,
    pub in_port: PortId,
    pub out_port: PortId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub cost: f64,
    pub loss_db: f64,
    pub hops: Vec<Hop>,
}

impl Route {
    pub fn tbus(&self) -> Vec<TbuId> {
        self.hops.iter().map(|h| h.tbu_id).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("route serialization");
        s.push('\n');
        s
    }
}

/// Integer cost of routing one unit in `mode`.
pub fn unit_cost(mode: RouteMode, weights: &CostWeights, config: &RouterConfig) -> u64 {
    let active = match mode {
        RouteMode::Bar => config.power.bar_active,
        RouteMode::Cross => config.power.cross_active,
    };
    let c = weights.hop
        + weights.loss_per_db * config.insertion_loss_db
        + weights.power_per_actuator * if active { 1.0 } else { 0.0 };
    (c * COST_SCALE).round() as u64
}

fn cost_value(units: u64) -> f64 {
    units as f64 / COST_SCALE
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }
    fn has(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

/// (cost, unit sequence, incomplete?, insertion order, arena index)
type QueueKey = (u64, Vec<TbuId>, bool, usize, usize);

struct Partial {
    entry: Option<PortId>,
    hops: Vec<Hop>,
    visited: Bits,
}

/// Cheapest path entering the mesh at any of `starts` (ports where light
/// enters a unit) and leaving through any of `targets` (ports where light
/// leaves a unit). Units in `blocked` are never used.
pub fn search(
    mesh: &Mesh,
    starts: &[PortId],
    targets: &BTreeSet<PortId>,
    blocked: &BTreeSet<TbuId>,
    weights: &CostWeights,
    config: &RouterConfig,
) -> Result<Option<(Vec<Hop>, u64)>, RouterError> {
    let n = mesh.tbu_count();
    let costs = [
        unit_cost(RouteMode::Bar, weights, config),
        unit_cost(RouteMode::Cross, weights, config),
    ];

    let mut arena: Vec<Partial> = Vec::new();
    let mut heap: BinaryHeap<Reverse<QueueKey>> = BinaryHeap::new();
    let mut counter = 0;
    for &s in starts {
        arena.push(Partial {
            entry: Some(s),
            hops: Vec::new(),
            visited: Bits::new(n),
        });
        heap.push(Reverse((0, Vec::new(), true, counter, arena.len() - 1)));
        counter += 1;
    }

    let mut seen: HashMap<PortId, Vec<Bits>> = HashMap::new();
    let mut expansions = 0;
    while let Some(Reverse((cost, seq, incomplete, _, idx))) = heap.pop() {
        if !incomplete {
            return Ok(Some((std::mem::take(&mut arena[idx].hops), cost)));
        }
        let Some(entry) = arena[idx].entry else { continue };
        let t = entry.tbu;
        if blocked.contains(&t) || arena[idx].visited.has(t) {
            continue;
        }
        let dominated = seen
            .get(&entry)
            .is_some_and(|list| list.iter().any(|b| b.subset_of(&arena[idx].visited)));
        if dominated {
            continue;
        }
        seen.entry(entry).or_default().push(arena[idx].visited.clone());

        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(RouterError::SearchLimit);
        }

        let mut visited = arena[idx].visited.clone();
        visited.set(t);
        for (k, mode) in [RouteMode::Bar, RouteMode::Cross].into_iter().enumerate() {
            let rail = match mode {
                RouteMode::Bar => entry.rail,
                RouteMode::Cross => 1 - entry.rail,
            };
            let exit = PortId::new(t, entry.end.other(), rail);
            let mut hops = arena[idx].hops.clone();
            hops.push(Hop {
                tbu_id: t,
                mode,
                in_port: entry,
                out_port: exit,
            });
            let mut next_seq = seq.clone();
            next_seq.push(t);
            let next_cost = cost + costs[k];

            if targets.contains(&exit) {
                arena.push(Partial {
                    entry: None,
                    hops: hops.clone(),
                    visited: visited.clone(),
                });
                heap.push(Reverse((next_cost, next_seq.clone(), false, counter, arena.len() - 1)));
                counter += 1;
            }
            if let Some(q) = mesh.partner(exit) {
                if blocked.contains(&q.tbu) || visited.has(q.tbu) {
                    continue;
                }
                arena.push(Partial {
                    entry: Some(q),
                    hops,
                    visited: visited.clone(),
                });
                heap.push(Reverse((next_cost, next_seq, true, counter, arena.len() - 1)));
                counter += 1;
            }
        }
    }
    Ok(None)
}

fn check_request(mesh: &Mesh, request: &RoutingRequest) -> Result<(), RouterError> {
    for p in [request.source, request.destination] {
        if !mesh.is_external(p) {
            return Err(RouterError::NotExternal(p));
        }
    }
    if request.source == request.destination {
        return Err(RouterError::SameEndpoints(request.source));
    }
    if let Some(&t) = request.blocked.iter().find(|&&t| t >= mesh.tbu_count()) {
        return Err(RouterError::UnknownTbu(t));
    }
    request.weights.validate()
}

pub fn route(
    mesh: &Mesh,
    request: &RoutingRequest,
    config: &RouterConfig,
) -> Result<Route, RouterError> {
    check_request(mesh, request)?;
    let targets = BTreeSet::from([request.destination]);
    let found = search(
        mesh,
        &[request.source],
        &targets,
        &request.blocked,
        &request.weights,
        config,
    )?;
    let (hops, cost) = found.ok_or(RouterError::NoPath {
        from: request.source,
        to: request.destination,
    })?;
    Ok(Route {
        cost: cost_value(cost),
        loss_db: hops.len() as f64 * config.insertion_loss_db,
        hops,
    })
}

/// Program with the route's bar/cross states added.
pub fn apply_route(program: &Program, route: &Route) -> Result<Program, RouterError> {
    let mut out = program.clone();
    for hop in &route.hops {
        if !out.mode(hop.tbu_id).is_off() {
            return Err(RouterError::Conflict(hop.tbu_id));
        }
        out.set(hop.tbu_id, hop.mode.into());
    }
    Ok(out)
}

/// Route requests in order; each sees earlier routes' units as blocked.
pub fn multi_route(
    mesh: &Mesh,
    requests: &[RoutingRequest],
    config: &RouterConfig,
) -> Result<(Program, Vec<Route>), RouterError> {
    if requests.is_empty() {
        return Err(RouterError::Request {
            index: 0,
            source: Box::new(RouterError::Unreachable),
        });
    }
    let mut program = Program::with_loss(config.insertion_loss_db);
    let mut routes = Vec::with_capacity(requests.len());
    let mut used = BTreeSet::new();
    for (index, req) in requests.iter().enumerate() {
        let wrap = |e| RouterError::Request {
            index,
            source: Box::new(e),
        };
        let mut req = req.clone();
        req.blocked.extend(used.iter().copied());
        let r = route(mesh, &req, config).map_err(wrap)?;
        program = apply_route(&program, &r).map_err(wrap)?;
        used.extend(r.tbus());
        routes.push(r);
    }
    Ok((program, routes))
}
