//! Mesh topologies, port bookkeeping and the on-disk document format.
//!
//! Every tunable unit sits on one edge of the cell lattice. Its two ends
//! (`A` at the lexicographically smaller lattice vertex, `B` at the other)
//! each carry two rails; rail 0 runs along the left side of the `A → B`
//! direction. At a lattice vertex the ends meeting there are sorted
//! counter-clockwise, and the two rails facing a wedge that lies inside a
//! cell are joined. Rails facing the outside of the mesh are external ports.
//!
//! Unit and port counts for a few sizes:
//!
//! | topology   | m×n | units | external ports |
//! |------------|-----|-------|----------------|
//! | hexagonal  | 1×1 | 6     | 12             |
//! | hexagonal  | 2×2 | 19    | 28             |
//! | square     | 1×1 | 4     | 8              |
//! | triangular | 1×1 | 3     | 6              |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::tbu::{mode_settings, TbuMode, TbuSettings, DEFAULT_INSERTION_LOSS_DB};

pub type TbuId = usize;
type Vertex = (i64, i64);

/// Document schema version written by [`serialize`].
pub const SCHEMA_VERSION: i64 = 1;
/// Largest accepted cell count along either dimension.
pub const MAX_DIMENSION: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh dimensions must be between 1 and {MAX_DIMENSION}, got {m}×{n}")]
    InvalidDimensions { m: usize, n: usize },
    #[error("unsupported topology `{0}`")]
    UnsupportedTopology(String),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("unknown schema version {0} (supported: {SCHEMA_VERSION})")]
    UnknownVersion(i64),
    #[error("connection references undeclared port {0}")]
    DanglingConnection(PortId),
    #[error("port {0} appears in more than one connection")]
    DuplicatePort(PortId),
    #[error("document does not describe the generated {0} mesh: {1}")]
    TopologyMismatch(Topology, String),
    #[error("program references unknown unit T{0}")]
    UnknownTbu(TbuId),
    #[error("invalid port `{0}`")]
    InvalidPort(String),
    #[error("invalid program entry for T{0}: {1}")]
    InvalidProgramEntry(TbuId, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum End {
    A,
    B,
}

impl End {
    pub fn other(self) -> End {
        match self {
            End::A => End::B,
            End::B => End::A,
        }
    }

    /// Rail on the counter-clockwise (left) side when looking from this end
    /// along the unit.
    fn left_rail(self) -> u8 {
        match self {
            End::A => 0,
            End::B => 1,
        }
    }
}

/// One of the four optical ports of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortId {
    pub tbu: TbuId,
    pub end: End,
    pub rail: u8,
}

impl PortId {
    pub fn new(tbu: TbuId, end: End, rail: u8) -> Self {
        PortId { tbu, end, rail }
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = match self.end {
            End::A => 'A',
            End::B => 'B',
        };
        write!(f, "T{}.{}{}", self.tbu, e, self.rail)
    }
}

impl FromStr for PortId {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MeshError::InvalidPort(s.to_string());
        let rest = s.strip_prefix('T').ok_or_else(bad)?;
        let (id, tail) = rest.split_once('.').ok_or_else(bad)?;
        let tbu = id.parse::<TbuId>().map_err(|_| bad())?;
        let mut chars = tail.chars();
        let end = match chars.next() {
            Some('A') => End::A,
            Some('B') => End::B,
            _ => return Err(bad()),
        };
        let rail = match chars.as_str() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad()),
        };
        Ok(PortId { tbu, end, rail })
    }
}

impl Serialize for PortId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PortId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Square,
    Triangular,
    Hexagonal,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Square => "square",
            Topology::Triangular => "triangular",
            Topology::Hexagonal => "hexagonal",
        })
    }
}

impl FromStr for Topology {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "square" => Ok(Topology::Square),
            "triangular" => Ok(Topology::Triangular),
            "hexagonal" | "hex" => Ok(Topology::Hexagonal),
            other => Err(MeshError::UnsupportedTopology(other.to_string())),
        }
    }
}

impl Topology {
    /// Maximum number of unit ends meeting at a lattice vertex.
    pub fn vertex_degree(self) -> usize {
        match self {
            Topology::Square => 4,
            Topology::Triangular => 6,
            Topology::Hexagonal => 3,
        }
    }

    fn position(self, v: Vertex) -> (f64, f64) {
        let (x, y) = (v.0 as f64, v.1 as f64);
        match self {
            Topology::Square => (x, y),
            Topology::Hexagonal => (x, y * 3f64.sqrt()),
            Topology::Triangular => (x + y / 2.0, y * 3f64.sqrt() / 2.0),
        }
    }

    /// Counter-clockwise lattice polygon of cell (`row`, `col`).
    fn cell_polygon(self, row: i64, col: i64) -> Vec<Vertex> {
        match self {
            Topology::Square => vec![
                (col, row),
                (col + 1, row),
                (col + 1, row + 1),
                (col, row + 1),
            ],
            Topology::Hexagonal => {
                let (cx, cy) = (3 * col, 2 * row + (col & 1));
                [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)]
                    .iter()
                    .map(|&(dx, dy)| (cx + dx, cy + dy))
                    .collect()
            }
            Topology::Triangular => {
                let a = col / 2;
                if col % 2 == 0 {
                    vec![(a, row), (a + 1, row), (a, row + 1)]
                } else {
                    vec![(a + 1, row), (a + 1, row + 1), (a, row + 1)]
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tbu {
    pub id: TbuId,
    /// Lattice vertices of end `A` and end `B`.
    ends: [Vertex; 2],
}

impl Tbu {
    pub fn ports(&self) -> [PortId; 4] {
        [
            PortId::new(self.id, End::A, 0),
            PortId::new(self.id, End::A, 1),
            PortId::new(self.id, End::B, 0),
            PortId::new(self.id, End::B, 1),
        ]
    }
}

/// One lattice cell and the units on its boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
    /// Units in counter-clockwise order around the cell.
    pub tbus: Vec<TbuId>,
    /// For each entry of `tbus`, the rail that faces the cell interior.
    pub inner_rails: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    topology: Topology,
    m: usize,
    n: usize,
    tbus: Vec<Tbu>,
    connections: Vec<(PortId, PortId)>,
    external: Vec<PortId>,
    cells: Vec<Cell>,
    partner: HashMap<PortId, PortId>,
}

impl Mesh {
    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn tbu_count(&self) -> usize {
        self.tbus.len()
    }

    pub fn tbus(&self) -> &[Tbu] {
        &self.tbus
    }

    /// Internal connections, each pair sorted and the list sorted.
    pub fn connections(&self) -> &[(PortId, PortId)] {
        &self.connections
    }

    /// External ports in clockwise perimeter order.
    pub fn external_ports(&self) -> &[PortId] {
        &self.external
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.cells.iter().find(|c| c.row == row && c.col == col)
    }

    /// The port joined to `port`, or `None` for an external port.
    pub fn partner(&self, port: PortId) -> Option<PortId> {
        self.partner.get(&port).copied()
    }

    pub fn contains_port(&self, port: PortId) -> bool {
        port.tbu < self.tbus.len() && port.rail < 2
    }

    pub fn is_external(&self, port: PortId) -> bool {
        self.contains_port(port) && !self.partner.contains_key(&port)
    }

    pub fn external_index(&self, port: PortId) -> Option<usize> {
        self.external.iter().position(|p| *p == port)
    }

    /// Resolve `P<k>` (k-th external port) or a raw `T<id>.<end><rail>` name.
    pub fn resolve_port(&self, name: &str) -> Result<PortId, MeshError> {
        if let Some(idx) = name.strip_prefix('P') {
            let k: usize = idx
                .parse()
                .map_err(|_| MeshError::InvalidPort(name.to_string()))?;
            return self
                .external
                .get(k)
                .copied()
                .ok_or_else(|| MeshError::InvalidPort(name.to_string()));
        }
        let port: PortId = name.parse()?;
        if !self.contains_port(port) {
            return Err(MeshError::InvalidPort(name.to_string()));
        }
        Ok(port)
    }

    /// Display name of a port: `P<k>` when external, else its raw id.
    pub fn port_name(&self, port: PortId) -> String {
        match self.external_index(port) {
            Some(k) => format!("P{k}"),
            None => port.to_string(),
        }
    }

    /// Units with at least one external port, ascending.
    pub fn boundary_tbus(&self) -> BTreeSet<TbuId> {
        self.external.iter().map(|p| p.tbu).collect()
    }

    /// Whether every unit is reachable from unit 0 through connections.
    pub fn is_connected(&self) -> bool {
        if self.tbus.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.tbus.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut adj: Vec<Vec<TbuId>> = vec![Vec::new(); self.tbus.len()];
        for (a, b) in &self.connections {
            adj[a.tbu].push(b.tbu);
            adj[b.tbu].push(a.tbu);
        }
        while let Some(t) = stack.pop() {
            for &u in &adj[t] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn end_vertex(&self, port: PortId) -> Vertex {
        let t = &self.tbus[port.tbu];
        match port.end {
            End::A => t.ends[0],
            End::B => t.ends[1],
        }
    }

    /// Number of unit ends meeting at the lattice vertex of `port`.
    pub fn junction_degree(&self, port: PortId) -> usize {
        let v = self.end_vertex(port);
        self.tbus
            .iter()
            .map(|t| t.ends.iter().filter(|e| **e == v).count())
            .sum()
    }
}

/// Build an `m × n` mesh of the given topology.
pub fn generate(topology: Topology, m: usize, n: usize) -> Result<Mesh, MeshError> {
    if m == 0 || n == 0 || m > MAX_DIMENSION || n > MAX_DIMENSION {
        return Err(MeshError::InvalidDimensions { m, n });
    }

    let mut polygons = Vec::with_capacity(m * n);
    for row in 0..m {
        for col in 0..n {
            // one triangle per band would leave the bands touching only at
            // corners, so a single triangular column runs along one band
            let (r, c) = match topology {
                Topology::Triangular if n == 1 => (0, row),
                _ => (row, col),
            };
            polygons.push((row, col, topology.cell_polygon(r as i64, c as i64)));
        }
    }

    let edge = |a: Vertex, b: Vertex| if a < b { (a, b) } else { (b, a) };
    let edges: BTreeSet<(Vertex, Vertex)> = polygons
        .iter()
        .flat_map(|(_, _, p)| (0..p.len()).map(move |i| edge(p[i], p[(i + 1) % p.len()])))
        .collect();
    let tbus: Vec<Tbu> = edges
        .iter()
        .enumerate()
        .map(|(id, &(a, b))| Tbu { id, ends: [a, b] })
        .collect();
    let id_of: HashMap<(Vertex, Vertex), TbuId> =
        edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();

    // Interior wedges: (vertex, unit toward next vertex, unit toward previous
    // vertex); sweeping counter-clockwise from the first to the second stays
    // inside the cell.
    let mut wedges = BTreeSet::new();
    let mut cells = Vec::with_capacity(polygons.len());
    for (row, col, poly) in &polygons {
        let k = poly.len();
        let mut ids = Vec::with_capacity(k);
        let mut inner = Vec::with_capacity(k);
        for i in 0..k {
            let (v, next, prev) = (poly[i], poly[(i + 1) % k], poly[(i + k - 1) % k]);
            let t_next = id_of[&edge(v, next)];
            wedges.insert((v, t_next, id_of[&edge(prev, v)]));
            ids.push(t_next);
            // Travelling v → next, the interior is on the left.
            inner.push(if v < next { 0 } else { 1 });
        }
        cells.push(Cell {
            row: *row,
            col: *col,
            tbus: ids,
            inner_rails: inner,
        });
    }

    let mut at_vertex: BTreeMap<Vertex, Vec<(TbuId, End)>> = BTreeMap::new();
    for t in &tbus {
        at_vertex.entry(t.ends[0]).or_default().push((t.id, End::A));
        at_vertex.entry(t.ends[1]).or_default().push((t.id, End::B));
    }

    let mut connections = Vec::new();
    for (v, ends) in &mut at_vertex {
        let origin = topology.position(*v);
        let angle = |&(t, e): &(TbuId, End)| {
            let far = match e {
                End::A => tbus[t].ends[1],
                End::B => tbus[t].ends[0],
            };
            let p = topology.position(far);
            (p.1 - origin.1).atan2(p.0 - origin.0)
        };
        ends.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
        let k = ends.len();
        if k < 2 {
            continue;
        }
        for i in 0..k {
            let (ta, ea) = ends[i];
            let (tb, eb) = ends[(i + 1) % k];
            if wedges.contains(&(*v, ta, tb)) {
                let p = PortId::new(ta, ea, ea.left_rail());
                let q = PortId::new(tb, eb, 1 - eb.left_rail());
                connections.push(if p < q { (p, q) } else { (q, p) });
            }
        }
    }
    connections.sort();

    let mut partner = HashMap::with_capacity(connections.len() * 2);
    for &(a, b) in &connections {
        partner.insert(a, b);
        partner.insert(b, a);
    }

    let mut mesh = Mesh {
        topology,
        m,
        n,
        tbus,
        connections,
        external: Vec::new(),
        cells,
        partner,
    };
    mesh.external = perimeter_order(&mesh);
    Ok(mesh)
}

/// Clockwise order around the mesh centroid, rotated to begin at the first
/// port (in that order) of the lowest-numbered boundary unit.
fn perimeter_order(mesh: &Mesh) -> Vec<PortId> {
    let topo = mesh.topology;
    let pts: Vec<(f64, f64)> = mesh
        .tbus
        .iter()
        .flat_map(|t| t.ends.iter().map(|v| topo.position(*v)))
        .collect();
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;

    let place = |port: PortId| {
        let t = &mesh.tbus[port.tbu];
        let (here, there) = match port.end {
            End::A => (t.ends[0], t.ends[1]),
            End::B => (t.ends[1], t.ends[0]),
        };
        let (p, q) = (topo.position(here), topo.position(there));
        let (dx, dy) = (q.0 - p.0, q.1 - p.1);
        let len = dx.hypot(dy);
        let (ux, uy) = (dx / len, dy / len);
        let side = if port.rail == port.end.left_rail() { 1.0 } else { -1.0 };
        let x = p.0 + 0.25 * ux - 0.1 * side * uy;
        let y = p.1 + 0.25 * uy + 0.1 * side * ux;
        (y - cy).atan2(x - cx)
    };

    let mut ports: Vec<(f64, PortId)> = mesh
        .tbus
        .iter()
        .flat_map(|t| t.ports())
        .filter(|p| !mesh.partner.contains_key(p))
        .map(|p| (place(p), p))
        .collect();
    ports.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let ports: Vec<PortId> = ports.into_iter().map(|(_, p)| p).collect();

    let Some(first) = ports.iter().map(|p| p.tbu).min() else {
        return ports;
    };
    let k = ports.len();
    let start = (0..k)
        .find(|&i| ports[i].tbu == first && ports[(i + k - 1) % k].tbu != first)
        .unwrap_or(0);
    ports[start..].iter().chain(&ports[..start]).copied().collect()
}

/// Per-unit routing modes for one mesh. Units without an entry are `off`.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub label: Option<String>,
    /// Insertion loss applied to bar and cross entries.
    pub default_loss_db: f64,
    modes: BTreeMap<TbuId, TbuMode>,
}

impl Default for Program {
    fn default() -> Self {
        Program::new()
    }
}

impl Program {
    pub fn new() -> Self {
        Program {
            label: None,
            default_loss_db: DEFAULT_INSERTION_LOSS_DB,
            modes: BTreeMap::new(),
        }
    }

    pub fn with_loss(default_loss_db: f64) -> Self {
        Program {
            default_loss_db,
            ..Program::new()
        }
    }

    pub fn mode(&self, tbu: TbuId) -> TbuMode {
        self.modes.get(&tbu).copied().unwrap_or(TbuMode::Off)
    }

    pub fn set(&mut self, tbu: TbuId, mode: TbuMode) {
        if mode.is_off() {
            self.modes.remove(&tbu);
        } else {
            self.modes.insert(tbu, mode);
        }
    }

    /// Non-off entries in ascending unit order.
    pub fn entries(&self) -> impl Iterator<Item = (TbuId, TbuMode)> + '_ {
        self.modes.iter().map(|(k, v)| (*k, *v))
    }

    pub fn used_tbus(&self) -> BTreeSet<TbuId> {
        self.modes.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Concrete settings of a non-off unit.
    pub fn settings(&self, tbu: TbuId) -> Option<TbuSettings> {
        mode_settings(&self.mode(tbu), self.default_loss_db).ok()
    }

    pub fn validate_for(&self, mesh: &Mesh) -> Result<(), MeshError> {
        for (&t, mode) in &self.modes {
            if t >= mesh.tbu_count() {
                return Err(MeshError::UnknownTbu(t));
            }
            mode_settings(mode, self.default_loss_db)
                .map_err(|e| MeshError::InvalidProgramEntry(t, e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TbuDoc {
    id: TbuId,
    ports: Vec<PortId>,
}

#[derive(Serialize, Deserialize)]
struct ProgramEntryDoc {
    tbu_id: TbuId,
    mode: String,
    theta_upper: f64,
    theta_lower: f64,
    loss_db: f64,
}

#[derive(Serialize, Deserialize)]
struct MeshDoc {
    version: i64,
    topology: Topology,
    m: usize,
    n: usize,
    tbus: Vec<TbuDoc>,
    connections: Vec<(PortId, PortId)>,
    external_ports: Vec<PortId>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default = "default_loss")]
    default_loss_db: f64,
    program: Vec<ProgramEntryDoc>,
}

fn default_loss() -> f64 {
    DEFAULT_INSERTION_LOSS_DB
}

/// Write a mesh and its program as a pretty-printed JSON document.
pub fn serialize(mesh: &Mesh, program: &Program) -> String {
    let entries = program
        .entries()
        .map(|(id, mode)| {
            // entries() only yields valid non-off modes
            let s = mode_settings(&mode, program.default_loss_db)
                .unwrap_or(TbuSettings::new(0.0, 0.0, 0.0));
            ProgramEntryDoc {
                tbu_id: id,
                mode: mode.name().to_string(),
                theta_upper: s.theta_upper,
                theta_lower: s.theta_lower,
                loss_db: s.insertion_loss_db,
            }
        })
        .collect();
    let doc = MeshDoc {
        version: SCHEMA_VERSION,
        topology: mesh.topology,
        m: mesh.m,
        n: mesh.n,
        tbus: mesh
            .tbus
            .iter()
            .map(|t| TbuDoc {
                id: t.id,
                ports: t.ports().to_vec(),
            })
            .collect(),
        connections: mesh.connections.clone(),
        external_ports: mesh.external.clone(),
        label: program.label.clone(),
        default_loss_db: program.default_loss_db,
        program: entries,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("document serialization");
    out.push('\n');
    out
}

pub fn deserialize(text: &str) -> Result<(Mesh, Program), MeshError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| MeshError::Malformed(e.to_string()))?;
    let version = value
        .get("version")
        .ok_or_else(|| MeshError::Malformed("missing `version`".into()))?
        .as_i64()
        .ok_or_else(|| MeshError::Malformed("`version` must be an integer".into()))?;
    if version != SCHEMA_VERSION {
        return Err(MeshError::UnknownVersion(version));
    }
    let doc: MeshDoc =
        serde_json::from_value(value).map_err(|e| MeshError::Malformed(e.to_string()))?;

    let mut declared = BTreeSet::new();
    for t in &doc.tbus {
        for p in &t.ports {
            if p.tbu != t.id {
                return Err(MeshError::Malformed(format!(
                    "port {p} listed under unit T{}",
                    t.id
                )));
            }
            declared.insert(*p);
        }
    }
    let mut used = BTreeSet::new();
    for &(a, b) in &doc.connections {
        for p in [a, b] {
            if !declared.contains(&p) {
                return Err(MeshError::DanglingConnection(p));
            }
            if !used.insert(p) {
                return Err(MeshError::DuplicatePort(p));
            }
        }
    }

    let mesh = generate(doc.topology, doc.m, doc.n)?;
    let mismatch = |what: &str| MeshError::TopologyMismatch(doc.topology, what.to_string());
    let generated: BTreeSet<PortId> = mesh.tbus.iter().flat_map(|t| t.ports()).collect();
    if generated != declared {
        return Err(mismatch("unit/port set differs"));
    }
    let mut conns: Vec<(PortId, PortId)> = doc
        .connections
        .iter()
        .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect();
    conns.sort();
    if conns != mesh.connections {
        return Err(mismatch("connection set differs"));
    }
    if doc.external_ports != mesh.external {
        return Err(mismatch("external port order differs"));
    }

    let mut program = Program::with_loss(doc.default_loss_db);
    program.label = doc.label;
    for e in doc.program {
        if e.tbu_id >= mesh.tbu_count() {
            return Err(MeshError::UnknownTbu(e.tbu_id));
        }
        let mode = match e.mode.as_str() {
            "bar" => TbuMode::Bar,
            "cross" => TbuMode::Cross,
            "off" => TbuMode::Off,
            "tunable" => TbuMode::Tunable(TbuSettings::new(e.theta_upper, e.theta_lower, e.loss_db)),
            other => {
                return Err(MeshError::InvalidProgramEntry(
                    e.tbu_id,
                    format!("unknown mode `{other}`"),
                ))
            }
        };
        program.set(e.tbu_id, mode);
    }
    program.validate_for(&mesh)?;
    Ok((mesh, program))
}
