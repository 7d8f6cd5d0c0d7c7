//! Canonical mesh programs: a single-cell ring filter, a Vernier pair of
//! rings, a reconfigurable 2×4 optical hybrid, and a coherent transceiver
//! built from a ring and a hybrid.
//!
//! Each preset returns the program, the units it touches, its external
//! inputs and outputs, and an analytic reference that the simulated
//! response can be checked against.

use std::collections::{BTreeSet, VecDeque};

use num_complex::Complex64;
use thiserror::Error;

use crate::mesh::{Cell, End, Mesh, PortId, Program, TbuId, Topology};
use crate::netsolve::{cascade_gain, WaveguideParams};
use crate::router::{self, CostWeights, Hop, RouteMode, RouterConfig, RouterError};
use crate::tbu::{settings_for_coupling, TbuMode, DEFAULT_INSERTION_LOSS_DB};

const J: Complex64 = Complex64::new(0.0, 1.0);
const RING_UNITS: usize = 6;

/// Preset names as addressed from front ends.
pub const PRESET_NAMES: [&str; 4] = ["ring", "vernier", "hybrid24", "transceiver"];

/// Smallest hexagonal meshes (rows, columns) on which [`transceiver_demo`]
/// succeeds; every larger mesh in either direction works too.
pub const TRANSCEIVER_MIN_SIZES: [(usize, usize); 2] = [(3, 3), (2, 4)];
/// Smallest hexagonal mesh on which [`hybrid_2x4`] succeeds.
pub const HYBRID_MIN_SIZE: (usize, usize) = (2, 3);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresetError {
    #[error("preset needs a hexagonal mesh, got {0}")]
    NotHexagonal(Topology),
    #[error("cell ({row}, {col}) is outside the mesh")]
    CellOutOfRange { row: usize, col: usize },
    #[error("coupling {0} outside (0, 1]")]
    InvalidKappa(f64),
    #[error("cell ({row}, {col}) has no unit with both outer ports on the mesh edge")]
    NoBoundaryCoupler { row: usize, col: usize },
    #[error("cells overlap or coincide")]
    OverlappingCells,
    #[error("cannot place {0}: not enough free units or no connecting routes")]
    Unplaceable(&'static str),
    #[error("mesh too small for the transceiver; it needs at least a hexagonal 3x3 or 2x4 mesh")]
    TooSmall,
    #[error(transparent)]
    Router(#[from] RouterError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetConfig {
    pub loss_db: f64,
    pub params: WaveguideParams,
}

impl Default for PresetConfig {
    fn default() -> Self {
        PresetConfig {
            loss_db: DEFAULT_INSERTION_LOSS_DB,
            params: WaveguideParams::default(),
        }
    }
}

/// All-pass response of a ring coupled to a bus:
/// `(t − a·e^{−jφ}) / (1 − t·a·e^{−jφ})`.
pub fn all_pass(t: f64, a: f64, phi: f64) -> Complex64 {
    let e = Complex64::from_polar(a, -phi);
    (t - e) / (1.0 - t * e)
}

/// Closed-form bus response of a single-cell ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingReference {
    pub kappa: f64,
    pub loss_db: f64,
    /// Constant phase factor set by the coupler and loop orientation.
    pub prefactor: Complex64,
}

impl RingReference {
    /// Bus-to-bus field response. The coupler contributes one unit of loss
    /// and delay on the bus on top of the all-pass factor.
    pub fn response(&self, params: &WaveguideParams, frequency_hz: f64) -> Complex64 {
        let a1 = 10f64.powf(-self.loss_db / 20.0) * params.propagation_amplitude();
        let bl = params.beta(frequency_hz) * params.tbu_length_m;
        let t = (1.0 - self.kappa).sqrt();
        self.prefactor
            * Complex64::from_polar(a1, -bl)
            * all_pass(t, a1.powi(RING_UNITS as i32), RING_UNITS as f64 * bl)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VernierReference {
    pub ring_a: RingReference,
    pub ring_b: RingReference,
    /// Product of the routed bus units' constant factors.
    pub bus_sign: Complex64,
    pub bus_units: usize,
    pub loss_db: f64,
}

impl VernierReference {
    pub fn response(&self, params: &WaveguideParams, frequency_hz: f64) -> Complex64 {
        let a1 = 10f64.powf(-self.loss_db / 20.0) * params.propagation_amplitude();
        let bl = params.beta(frequency_hz) * params.tbu_length_m;
        let bus = self.bus_sign * Complex64::from_polar(a1, -bl).powu(self.bus_units as u32);
        bus * self.ring_a.response(params, frequency_hz) * self.ring_b.response(params, frequency_hz)
    }
}

/// Target of the 2×4 hybrid: `(1/2)·[[1,1],[1,j],[1,−1],[1,−j]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridReference {
    pub target: [[Complex64; 2]; 4],
}

impl Default for HybridReference {
    fn default() -> Self {
        let one = Complex64::new(0.5, 0.0);
        HybridReference {
            target: [[one, one], [one, one * J], [one, -one], [one, -one * J]],
        }
    }
}

impl HybridReference {
    /// Least-squares common factor `γ` with `m ≈ γ·target`, and the largest
    /// entrywise residual of `m/γ − target`.
    pub fn fit(&self, m: &[[Complex64; 2]; 4]) -> (Complex64, f64) {
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for (mr, tr) in m.iter().zip(&self.target) {
            for (x, t) in mr.iter().zip(tr) {
                num += t.conj() * x;
                den += t.norm_sqr();
            }
        }
        let gamma = num / den;
        if gamma.norm() == 0.0 {
            return (gamma, f64::INFINITY);
        }
        let err = m
            .iter()
            .zip(&self.target)
            .flat_map(|(mr, tr)| mr.iter().zip(tr).map(|(x, t)| (x / gamma - t).norm()))
            .fold(0.0, f64::max);
        (gamma, err)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Ring(RingReference),
    Vernier(VernierReference),
    Hybrid(HybridReference),
    Transceiver {
        ring: RingReference,
        hybrid: HybridReference,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PresetResult {
    pub name: &'static str,
    pub program: Program,
    pub used_tbus: BTreeSet<TbuId>,
    pub inputs: Vec<PortId>,
    pub outputs: Vec<PortId>,
    pub reference: Reference,
}

struct RingPlan {
    units: Vec<TbuId>,
    modes: Vec<(TbuId, TbuMode)>,
    bus_in: PortId,
    bus_out: PortId,
    reference: RingReference,
}

fn rail_sign(rail: u8) -> f64 {
    if rail == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Ring on `cell` whose coupler is `cell.tbus[idx]`, bus entering at `entry`.
///
/// The other five units sit in bar. A bar unit passes its inner rail with
/// factor `j·(±1)`, so the coupler's mean phase is set to 0 or π to make the
/// loop's constant phase vanish; the round-trip phase is then `6βL`.
fn plan_ring(cell: &Cell, idx: usize, entry: End, kappa: f64, loss_db: f64) -> Result<RingPlan, PresetError> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(PresetError::InvalidKappa(kappa));
    }
    let coupler = cell.tbus[idx];
    let ri = cell.inner_rails[idx];
    let bars: f64 = cell
        .inner_rails
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != idx)
        .map(|(_, &r)| rail_sign(r))
        .product();
    // ε_ri · j · (j^5 · Π ε_bar) = −ε_ri · Π ε_bar
    let v = -rail_sign(ri) * bars;
    let common = if v > 0.0 { 0.0 } else { std::f64::consts::PI };
    let settings = settings_for_coupling(kappa, common, loss_db).map_err(|_| PresetError::InvalidKappa(kappa))?;

    let mut modes = vec![(coupler, TbuMode::Tunable(settings))];
    modes.extend(cell.tbus.iter().filter(|&&t| t != coupler).map(|&t| (t, TbuMode::Bar)));
    let ro = 1 - ri;
    Ok(RingPlan {
        units: cell.tbus.clone(),
        modes,
        bus_in: PortId::new(coupler, entry, ro),
        bus_out: PortId::new(coupler, entry.other(), ro),
        reference: RingReference {
            kappa,
            loss_db,
            prefactor: -rail_sign(ri) * J * Complex64::from_polar(1.0, common),
        },
    })
}

fn hex_cell(mesh: &Mesh, (row, col): (usize, usize)) -> Result<&Cell, PresetError> {
    if mesh.topology() != Topology::Hexagonal {
        return Err(PresetError::NotHexagonal(mesh.topology()));
    }
    mesh.cell(row, col).ok_or(PresetError::CellOutOfRange { row, col })
}

fn new_program(name: &str, cfg: &PresetConfig) -> Program {
    let mut p = Program::with_loss(cfg.loss_db);
    p.label = Some(name.to_string());
    p
}

/// Ring cavity on one hexagonal cell. The coupler is the lowest-id unit of
/// the cell with both outer ports on the mesh edge; those ports are the bus
/// input (end `A`) and output (end `B`).
pub fn ring_filter(
    mesh: &Mesh,
    cell: (usize, usize),
    kappa: f64,
    cfg: &PresetConfig,
) -> Result<PresetResult, PresetError> {
    let c = hex_cell(mesh, cell)?;
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(PresetError::InvalidKappa(kappa));
    }
    let idx = (0..c.tbus.len())
        .filter(|&k| {
            let ro = 1 - c.inner_rails[k];
            [End::A, End::B]
                .iter()
                .all(|&e| mesh.is_external(PortId::new(c.tbus[k], e, ro)))
        })
        .min_by_key(|&k| c.tbus[k])
        .ok_or(PresetError::NoBoundaryCoupler {
            row: cell.0,
            col: cell.1,
        })?;
    let plan = plan_ring(c, idx, End::A, kappa, cfg.loss_db)?;
    let mut program = new_program("ring", cfg);
    for &(t, m) in &plan.modes {
        program.set(t, m);
    }
    Ok(PresetResult {
        name: "ring",
        program,
        used_tbus: plan.units.iter().copied().collect(),
        inputs: vec![plan.bus_in],
        outputs: vec![plan.bus_out],
        reference: Reference::Ring(plan.reference),
    })
}

fn free_external_exits(mesh: &Mesh, blocked: &BTreeSet<TbuId>) -> BTreeSet<PortId> {
    mesh.external_ports()
        .iter()
        .copied()
        .filter(|p| !blocked.contains(&p.tbu))
        .collect()
}

fn route_ports(
    mesh: &Mesh,
    starts: &[PortId],
    targets: &BTreeSet<PortId>,
    blocked: &BTreeSet<TbuId>,
) -> Result<Option<Vec<Hop>>, PresetError> {
    let cfg = RouterConfig::default();
    Ok(router::search(mesh, starts, targets, blocked, &CostWeights::default(), &cfg)?.map(|(h, _)| h))
}

fn hop_factor(h: &Hop) -> Complex64 {
    match h.mode {
        RouteMode::Cross => J,
        RouteMode::Bar => J * rail_sign(h.in_port.rail),
    }
}

/// Two single-cell rings in series on one bus. Bus segments are routed
/// through free units; the combination with the fewest routed units wins.
pub fn vernier_pair(
    mesh: &Mesh,
    cell_a: (usize, usize),
    cell_b: (usize, usize),
    kappa_a: f64,
    kappa_b: f64,
    cfg: &PresetConfig,
) -> Result<PresetResult, PresetError> {
    let (ca, cb) = (hex_cell(mesh, cell_a)?, hex_cell(mesh, cell_b)?);
    for k in [kappa_a, kappa_b] {
        if !(k > 0.0 && k <= 1.0) {
            return Err(PresetError::InvalidKappa(k));
        }
    }
    let rings: BTreeSet<TbuId> = ca.tbus.iter().chain(&cb.tbus).copied().collect();
    if cell_a == cell_b || rings.len() != ca.tbus.len() + cb.tbus.len() {
        return Err(PresetError::OverlappingCells);
    }

    let order = |c: &Cell| {
        let mut idx: Vec<usize> = (0..c.tbus.len()).collect();
        idx.sort_by_key(|&k| c.tbus[k]);
        idx
    };
    let mut best: Option<(usize, RingPlan, RingPlan, Vec<Hop>, PortId, PortId)> = None;
    for ia in order(ca) {
        for ea in [End::A, End::B] {
            for ib in order(cb) {
                for eb in [End::A, End::B] {
                    let ra = plan_ring(ca, ia, ea, kappa_a, cfg.loss_db)?;
                    let rb = plan_ring(cb, ib, eb, kappa_b, cfg.loss_db)?;
                    let Some((hops, input, output)) = vernier_bus(mesh, &rings, &ra, &rb)? else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|b| hops.len() < b.0) {
                        best = Some((hops.len(), ra, rb, hops, input, output));
                    }
                }
            }
        }
    }
    let (_, ra, rb, hops, input, output) = best.ok_or(PresetError::Unplaceable("vernier pair"))?;

    let mut program = new_program("vernier", cfg);
    for &(t, m) in ra.modes.iter().chain(&rb.modes) {
        program.set(t, m);
    }
    for h in &hops {
        program.set(h.tbu_id, h.mode.into());
    }
    let mut used = rings;
    used.extend(hops.iter().map(|h| h.tbu_id));
    Ok(PresetResult {
        name: "vernier",
        program,
        used_tbus: used,
        inputs: vec![input],
        outputs: vec![output],
        reference: Reference::Vernier(VernierReference {
            ring_a: ra.reference,
            ring_b: rb.reference,
            bus_sign: hops.iter().map(hop_factor).product(),
            bus_units: hops.len(),
            loss_db: cfg.loss_db,
        }),
    })
}

/// Routes external → ring A → ring B → external, or `None`.
fn vernier_bus(
    mesh: &Mesh,
    rings: &BTreeSet<TbuId>,
    ra: &RingPlan,
    rb: &RingPlan,
) -> Result<Option<(Vec<Hop>, PortId, PortId)>, PresetError> {
    let mut blocked = rings.clone();
    let mut hops = Vec::new();

    let input = match mesh.partner(ra.bus_in) {
        None => ra.bus_in,
        Some(q) => {
            let starts: Vec<PortId> = free_external_exits(mesh, &blocked).into_iter().collect();
            let Some(r) = route_ports(mesh, &starts, &BTreeSet::from([q]), &blocked)? else {
                return Ok(None);
            };
            blocked.extend(r.iter().map(|h| h.tbu_id));
            let first = r[0].in_port;
            hops.extend(r);
            first
        }
    };

    let (Some(start), Some(end)) = (mesh.partner(ra.bus_out), mesh.partner(rb.bus_in)) else {
        return Ok(None);
    };
    if start != rb.bus_in {
        let Some(r) = route_ports(mesh, &[start], &BTreeSet::from([end]), &blocked)? else {
            return Ok(None);
        };
        blocked.extend(r.iter().map(|h| h.tbu_id));
        hops.extend(r);
    }

    let output = match mesh.partner(rb.bus_out) {
        None => rb.bus_out,
        Some(q) => {
            let targets = free_external_exits(mesh, &blocked);
            let Some(r) = route_ports(mesh, &[q], &targets, &blocked)? else {
                return Ok(None);
            };
            let last = r[r.len() - 1].out_port;
            hops.extend(r);
            last
        }
    };
    Ok(Some((hops, input, output)))
}

/// Output row of combiner `k` (0 or 1) on exit rail `o`.
fn hybrid_row(k: usize, o: u8) -> usize {
    k + 2 * o as usize
}

#[derive(Debug, Clone, Default)]
struct Arm {
    split_exit: Option<PortId>,
    comb_entry: Option<PortId>,
    hops: Vec<Hop>,
}

#[derive(Debug, Clone)]
struct HybridPlan {
    /// (unit, entry port) per input.
    splitters: [(TbuId, PortId); 2],
    /// (unit, entry end) per combiner.
    combiners: [(TbuId, End); 2],
    /// ins[i]: edge to splitter i, empty when its entry port is external.
    ins: [Vec<Hop>; 2],
    /// arms[i][k]: splitter i to combiner k, possibly a direct connection.
    arms: [[Arm; 2]; 2],
    /// outs[k][o]: combiner k exit rail o to the edge, empty when external.
    outs: [[Vec<Hop>; 2]; 2],
}

impl HybridPlan {
    fn routes(&self) -> impl Iterator<Item = &Hop> {
        self.ins
            .iter()
            .chain(self.outs.iter().flatten())
            .flatten()
            .chain(self.arms.iter().flatten().flat_map(|a| &a.hops))
    }

    fn units(&self) -> BTreeSet<TbuId> {
        let mut s: BTreeSet<TbuId> = self.splitters.iter().map(|s| s.0).collect();
        s.extend(self.combiners.iter().map(|c| c.0));
        s.extend(self.routes().map(|h| h.tbu_id));
        s
    }

    fn input_port(&self, i: usize) -> PortId {
        self.ins[i].first().map_or(self.splitters[i].1, |h| h.in_port)
    }

    fn output_port(&self, k: usize, o: u8) -> PortId {
        let (c, e) = self.combiners[k];
        self.outs[k][o as usize]
            .last()
            .map_or(PortId::new(c, e.other(), o), |h| h.out_port)
    }

    /// Passes from input `i` to the output of combiner `k` on rail `o`.
    fn passes(&self, i: usize, k: usize, o: u8) -> Vec<(PortId, PortId)> {
        let arm = &self.arms[i][k];
        let (ct, ce) = self.combiners[k];
        let hop = |h: &Hop| (h.in_port, h.out_port);
        let mut v: Vec<_> = self.ins[i].iter().map(hop).collect();
        v.push((self.splitters[i].1, arm.split_exit.expect("arm placed")));
        v.extend(arm.hops.iter().map(hop));
        v.push((arm.comb_entry.expect("arm placed"), PortId::new(ct, ce.other(), o)));
        v.extend(self.outs[k][o as usize].iter().map(hop));
        v
    }
}

/// Unit-graph hop distances from `start`.
fn distances(mesh: &Mesh, start: TbuId) -> Vec<usize> {
    let mut adj = vec![Vec::new(); mesh.tbu_count()];
    for (a, b) in mesh.connections() {
        adj[a.tbu].push(b.tbu);
        adj[b.tbu].push(a.tbu);
    }
    let mut d = vec![usize::MAX; mesh.tbu_count()];
    d[start] = 0;
    let mut q = VecDeque::from([start]);
    while let Some(t) = q.pop_front() {
        for &u in &adj[t] {
            if d[u] == usize::MAX {
                d[u] = d[t] + 1;
                q.push_back(u);
            }
        }
    }
    d
}

const MAX_SPLITTER_PAIRS: usize = 64;
const MAX_COMBINER_CANDIDATES: usize = 12;

/// Spoke leaving each vertex of `cell`, as the spoke's port at that vertex.
/// Vertices on the mesh edge have no spoke.
fn cell_spokes(mesh: &Mesh, cell: &Cell) -> Vec<Option<PortId>> {
    let n = cell.tbus.len();
    (0..n)
        .map(|i| {
            let (t, next) = (cell.tbus[i], cell.tbus[(i + 1) % n]);
            let ri = cell.inner_rails[i];
            let end = [End::A, End::B]
                .into_iter()
                .find(|&e| mesh.partner(PortId::new(t, e, ri)).is_some_and(|q| q.tbu == next))?;
            mesh.partner(PortId::new(t, end, 1 - ri))
        })
        .collect()
}

/// Hexagonal placement: the four arms run around one cell and the
/// splitters and combiners are the spokes at alternating junction vertices.
fn place_hybrid_on_cells(mesh: &Mesh, base_blocked: &BTreeSet<TbuId>) -> Result<Option<HybridPlan>, PresetError> {
    let (m, n) = mesh.dims();
    let centre = |c: &Cell| {
        let dr = 2.0 * c.row as f64 - (m as f64 - 1.0);
        let dc = 2.0 * c.col as f64 - (n as f64 - 1.0);
        ((dr * dr + dc * dc) * 1e6) as u64
    };
    let mut cells: Vec<&Cell> = mesh.cells().iter().collect();
    cells.sort_by_key(|c| (centre(c), c.row, c.col));

    for cell in cells {
        if cell.tbus.iter().any(|t| base_blocked.contains(t)) {
            continue;
        }
        let spokes = cell_spokes(mesh, cell);
        let k = spokes.len();
        for mask in 0u32..(1 << k) {
            if mask.count_ones() != 4 {
                continue;
            }
            let junctions: Vec<PortId> = (0..k)
                .filter(|i| mask >> i & 1 == 1)
                .filter_map(|i| spokes[i])
                .filter(|p| !base_blocked.contains(&p.tbu))
                .filter(|p| (0..2).all(|r| mesh.partner(PortId::new(p.tbu, p.end, r)).is_some()))
                .collect();
            if junctions.len() != 4 {
                continue;
            }
            for first in 0..2 {
                let s = [junctions[first], junctions[first + 2]];
                let c = [junctions[1 - first], junctions[3 - first]];
                let combiners = [(c[0].tbu, c[0].end), (c[1].tbu, c[1].end)];
                for rails in 0..16u8 {
                    let splitters = [
                        (s[0].tbu, PortId::new(s[0].tbu, s[0].end.other(), rails & 1)),
                        (s[1].tbu, PortId::new(s[1].tbu, s[1].end.other(), rails >> 1 & 1)),
                    ];
                    let to_first = [rails >> 2 & 1, rails >> 3 & 1];
                    if let Some(p) = try_hybrid(mesh, base_blocked, splitters, combiners, to_first)? {
                        return Ok(Some(p));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn place_hybrid(mesh: &Mesh, base_blocked: &BTreeSet<TbuId>) -> Result<Option<HybridPlan>, PresetError> {
    if mesh.topology() == Topology::Hexagonal {
        return place_hybrid_on_cells(mesh, base_blocked);
    }
    let internal = |p: PortId| mesh.partner(p).is_some();
    let splitters: Vec<(TbuId, PortId)> = (0..mesh.tbu_count())
        .filter(|t| !base_blocked.contains(t))
        .flat_map(|t| [End::A, End::B].map(|e| (t, e)))
        .filter(|&(t, e)| (0..2).all(|r| internal(PortId::new(t, e.other(), r))))
        .flat_map(|(t, e)| [0, 1].map(|r| (t, PortId::new(t, e, r))))
        .collect();

    let dist: Vec<Vec<usize>> = (0..mesh.tbu_count()).map(|t| distances(mesh, t)).collect();
    let mut pairs = Vec::new();
    for a in 0..splitters.len() {
        for b in a + 1..splitters.len() {
            let (ta, tb) = (splitters[a].0, splitters[b].0);
            if ta != tb {
                pairs.push((dist[ta][tb], a, b));
            }
        }
    }
    pairs.sort();
    pairs.truncate(MAX_SPLITTER_PAIRS);

    for (_, a, b) in pairs {
        let (s1, s2) = (splitters[a], splitters[b]);
        let (d1, d2) = (&dist[s1.0], &dist[s2.0]);
        let mut combiners: Vec<(usize, TbuId, End)> = (0..mesh.tbu_count())
            .filter(|t| !base_blocked.contains(t) && *t != s1.0 && *t != s2.0)
            .flat_map(|t| [(t, End::A), (t, End::B)])
            .filter(|&(t, e)| {
                (0..2).all(|r| internal(PortId::new(t, e, r)))
                    && (0..2).any(|r| internal(PortId::new(t, e.other(), r)))
            })
            .map(|(t, e)| (d1[t].saturating_add(d2[t]), t, e))
            .collect();
        combiners.sort();
        combiners.truncate(MAX_COMBINER_CANDIDATES);

        for x in &combiners {
            for y in &combiners {
                if x.1 == y.1 {
                    continue;
                }
                let comb = [(x.1, x.2), (y.1, y.2)];
                for swap in 0..4u8 {
                    if let Some(p) = try_hybrid(mesh, base_blocked, [s1, s2], comb, [swap & 1, swap >> 1])? {
                        return Ok(Some(p));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Route arms, inputs and outputs for one choice of couplers.
/// `rail_to_first[i]` is the splitter-`i` exit rail sent to the first
/// combiner.
fn try_hybrid(
    mesh: &Mesh,
    base_blocked: &BTreeSet<TbuId>,
    splitters: [(TbuId, PortId); 2],
    combiners: [(TbuId, End); 2],
    rail_to_first: [u8; 2],
) -> Result<Option<HybridPlan>, PresetError> {
    let mut blocked = base_blocked.clone();
    blocked.extend(splitters.iter().map(|s| s.0));
    blocked.extend(combiners.iter().map(|c| c.0));

    let mut arms: [[Arm; 2]; 2] = Default::default();
    let mut taken: [Vec<PortId>; 2] = Default::default();
    for (i, k) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let (st, entry) = splitters[i];
        let rail = if k == 0 { rail_to_first[i] } else { 1 - rail_to_first[i] };
        let exit = PortId::new(st, entry.end.other(), rail);
        let start = mesh.partner(exit).expect("splitter exits are internal");
        let (ct, ce) = combiners[k];
        let free: Vec<PortId> = (0..2)
            .map(|r| PortId::new(ct, ce, r))
            .filter(|p| !taken[k].contains(p))
            .collect();
        let arm = if free.contains(&start) {
            Arm {
                split_exit: Some(exit),
                comb_entry: Some(start),
                hops: Vec::new(),
            }
        } else {
            let targets: BTreeSet<PortId> = free.iter().filter_map(|&p| mesh.partner(p)).collect();
            let Some(r) = route_ports(mesh, &[start], &targets, &blocked)? else {
                return Ok(None);
            };
            blocked.extend(r.iter().map(|h| h.tbu_id));
            Arm {
                split_exit: Some(exit),
                comb_entry: mesh.partner(r[r.len() - 1].out_port),
                hops: r,
            }
        };
        taken[k].push(arm.comb_entry.expect("arm reaches the combiner"));
        arms[i][k] = arm;
    }
    if arms.iter().flatten().all(|a| a.hops.is_empty()) {
        return Ok(None);
    }

    let mut ins: [Vec<Hop>; 2] = Default::default();
    for (i, &(_, entry)) in splitters.iter().enumerate() {
        if let Some(q) = mesh.partner(entry) {
            let starts: Vec<PortId> = free_external_exits(mesh, &blocked).into_iter().collect();
            let Some(r) = route_ports(mesh, &starts, &BTreeSet::from([q]), &blocked)? else {
                return Ok(None);
            };
            blocked.extend(r.iter().map(|h| h.tbu_id));
            ins[i] = r;
        }
    }

    let mut outs: [[Vec<Hop>; 2]; 2] = Default::default();
    for (k, &(ct, ce)) in combiners.iter().enumerate() {
        for o in 0..2u8 {
            if let Some(q) = mesh.partner(PortId::new(ct, ce.other(), o)) {
                let targets = free_external_exits(mesh, &blocked);
                let Some(r) = route_ports(mesh, &[q], &targets, &blocked)? else {
                    return Ok(None);
                };
                blocked.extend(r.iter().map(|h| h.tbu_id));
                outs[k][o as usize] = r;
            }
        }
        if outs[k].iter().all(|r| r.is_empty()) {
            return Ok(None);
        }
    }
    Ok(Some(HybridPlan {
        splitters,
        combiners,
        ins,
        arms,
        outs,
    }))
}

fn set_hop(program: &mut Program, h: &Hop, phase: f64, loss_db: f64) {
    let kappa = match h.mode {
        RouteMode::Bar => 0.0,
        RouteMode::Cross => 1.0,
    };
    let s = settings_for_coupling(kappa, phase, loss_db).expect("kappa is 0 or 1");
    program.set(h.tbu_id, TbuMode::Tunable(s));
}

/// 90° optical hybrid with two inputs and four outputs.
///
/// Two 50:50 splitters, each fed from the mesh edge, send one arm each to
/// two 50:50 combiners. The first combiner gives rows 0 and 2, the second
/// rows 1 and 3. Phases are corrected in closed form at the reference
/// frequency: the splitters' and combiners' mean phases, one routed arm, and
/// one output route per combiner are set so that the transfer equals the
/// target up to a common factor. Units outside `region` (when given) are
/// left alone.
pub fn hybrid_2x4(
    mesh: &Mesh,
    region: Option<&BTreeSet<TbuId>>,
    cfg: &PresetConfig,
) -> Result<PresetResult, PresetError> {
    let blocked: BTreeSet<TbuId> = match region {
        Some(r) => (0..mesh.tbu_count()).filter(|t| !r.contains(t)).collect(),
        None => BTreeSet::new(),
    };
    let plan = place_hybrid(mesh, &blocked)?.ok_or(PresetError::Unplaceable("2x4 hybrid"))?;

    let mut program = new_program("hybrid24", cfg);
    let half = |phase| TbuMode::Tunable(settings_for_coupling(0.5, phase, cfg.loss_db).expect("valid coupling"));
    for t in plan.splitters.iter().map(|s| s.0).chain(plan.combiners.iter().map(|c| c.0)) {
        program.set(t, half(0.0));
    }
    for h in plan.routes() {
        set_hop(&mut program, h, 0.0, cfg.loss_db);
    }

    // Phase each entry still needs: θ[row][i] = arg target − arg base.
    let f = cfg.params.reference_hz;
    let reference = HybridReference::default();
    let mut theta = [[0.0; 2]; 4];
    for k in 0..2 {
        for o in 0..2u8 {
            for (i, th) in theta[hybrid_row(k, o)].iter_mut().enumerate() {
                let b = cascade_gain(&program, &plan.passes(i, k, o), &cfg.params, f).expect("all passes programmed");
                *th = reference.target[hybrid_row(k, o)][i].arg() - b.arg();
            }
        }
    }

    // Row differences within a combiner go on one output route.
    let mut plain = [0u8; 2];
    for k in 0..2 {
        let knob = if plan.outs[k][1].is_empty() { 0u8 } else { 1 };
        plain[k] = 1 - knob;
        let omega = theta[hybrid_row(k, knob)][0] - theta[hybrid_row(k, plain[k])][0];
        set_hop(&mut program, &plan.outs[k][knob as usize][0], omega, cfg.loss_db);
    }
    // The rest is σ_i + κ_k + ψ on a single routed arm (i*, k*).
    let x = |i: usize, k: usize| theta[hybrid_row(k, plain[k])][i];
    let (pi, pk) = [(1, 1), (0, 1), (1, 0), (0, 0)]
        .into_iter()
        .find(|&(i, k)| !plan.arms[i][k].hops.is_empty())
        .expect("placement guarantees a routed arm");
    let sigma = [x(0, 1 - pk), x(1, 1 - pk)];
    let mut kappa_phase = [0.0; 2];
    kappa_phase[pk] = x(1 - pi, pk) - sigma[1 - pi];
    let psi = x(pi, pk) - sigma[pi] - kappa_phase[pk];
    for (s, phase) in plan.splitters.iter().zip(sigma) {
        program.set(s.0, half(phase));
    }
    for (c, phase) in plan.combiners.iter().zip(kappa_phase) {
        program.set(c.0, half(phase));
    }
    set_hop(&mut program, &plan.arms[pi][pk].hops[0], psi, cfg.loss_db);

    let mut outputs = vec![plan.output_port(0, 0); 4];
    for k in 0..2 {
        for o in 0..2u8 {
            outputs[hybrid_row(k, o)] = plan.output_port(k, o);
        }
    }
    Ok(PresetResult {
        name: "hybrid24",
        program,
        used_tbus: plan.units(),
        inputs: (0..2).map(|i| plan.input_port(i)).collect(),
        outputs,
        reference: Reference::Hybrid(reference),
    })
}

/// Coherent transceiver: a ring filter on the transmit carrier path and a
/// 2×4 hybrid on the receive path (signal and local-oscillator inputs). The
/// laser, modulator and receivers are external ports. The ring takes the
/// first edge cell for which the hybrid still fits on the remaining units.
///
/// Inputs are `[tx_in, rx_signal, rx_lo]`; outputs are `[tx_out, rx_0..rx_3]`.
pub fn transceiver_demo(mesh: &Mesh, kappa: f64, cfg: &PresetConfig) -> Result<PresetResult, PresetError> {
    if mesh.topology() != Topology::Hexagonal {
        return Err(PresetError::NotHexagonal(mesh.topology()));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(PresetError::InvalidKappa(kappa));
    }
    for cell in mesh.cells() {
        let ring = match ring_filter(mesh, (cell.row, cell.col), kappa, cfg) {
            Ok(r) => r,
            Err(PresetError::NoBoundaryCoupler { .. }) => continue,
            Err(e) => return Err(e),
        };
        let region: BTreeSet<TbuId> = (0..mesh.tbu_count()).filter(|t| !ring.used_tbus.contains(t)).collect();
        let hybrid = match hybrid_2x4(mesh, Some(&region), cfg) {
            Ok(h) => h,
            Err(PresetError::Unplaceable(_)) => continue,
            Err(e) => return Err(e),
        };
        let mut program = new_program("transceiver", cfg);
        for (t, m) in ring.program.entries().chain(hybrid.program.entries()) {
            program.set(t, m);
        }
        let (Reference::Ring(r), Reference::Hybrid(h)) = (ring.reference, hybrid.reference) else {
            unreachable!("sub-presets return their own reference kinds");
        };
        return Ok(PresetResult {
            name: "transceiver",
            program,
            used_tbus: ring.used_tbus.union(&hybrid.used_tbus).copied().collect(),
            inputs: [ring.inputs, hybrid.inputs].concat(),
            outputs: [ring.outputs, hybrid.outputs].concat(),
            reference: Reference::Transceiver { ring: r, hybrid: h },
        });
    }
    Err(PresetError::TooSmall)
}
