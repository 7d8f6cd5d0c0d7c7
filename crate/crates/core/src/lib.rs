//! Toolchain and simulator for programmable photonic waveguide meshes.
//!
//! The crate is organised bottom-up:
//!
//! - [`gates`]: 2×2 unitary algebra, rotations and Euler synthesis.
//! - [`tbu`]: the tunable basic unit (balanced MZI) transfer model.
//! - [`mesh`]: square, triangular and hexagonal topologies plus programs.
//! - [`netsolve`]: frequency-domain scattering solver with feedback loops.
//! - [`router`]: place-and-route of optical paths over the mesh.
//! - [`presets`]: ring filters, Vernier pairs, a 2×4 hybrid and a transceiver.
//! - [`control`]: driver quantisation, monitors, crosstalk and calibration.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod gates;
pub mod linalg;
pub mod mesh;
pub mod netsolve;
pub mod presets;
pub mod router;
pub mod tbu;

pub use control::{CrosstalkMatrix, DriverConfig, MonitorConfig, OptimizerOptions};
pub use gates::{Axis, EulerAngles, EulerOrder, Gate2};
pub use mesh::{End, Mesh, PortId, Program, TbuId, Topology};
pub use netsolve::{FrequencyGrid, SParams, WaveguideParams};
pub use presets::{PresetConfig, PresetResult, Reference};
pub use router::{Route, RoutingRequest};
pub use tbu::{TbuMode, TbuSettings};
