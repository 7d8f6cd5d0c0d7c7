//! Frequency-domain scattering solver for programmed meshes.
//!
//! Unknowns are the waves travelling *into* each internally connected port.
//! Every unit maps its incoming waves to outgoing waves through its 2×2
//! transfer (end `A` → `B` uses `T`, end `B` → `A` uses `Tᵀ`), and each
//! connection forwards an outgoing wave into its partner port. With `x` the
//! internal incoming waves and `e` the external excitations:
//!
//! ```text
//! x = A·x + B·e        y = D·x + F·e
//! S = D·(I - A)⁻¹·B + F
//! ```
//!
//! Loops (ring cavities) are handled exactly by the linear solve.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::gates::Gate2;
use crate::linalg::{self, CMatrix};
use crate::mesh::{End, Mesh, MeshError, PortId, Program};
use crate::tbu::{tbu_transfer, DEFAULT_TBU_LENGTH_M};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Program(#[from] MeshError),
    #[error("invalid waveguide parameters: {0}")]
    Params(String),
    #[error("invalid frequency grid: {0}")]
    Grid(String),
    #[error("singular network at {frequency_hz} Hz (lossless loop on resonance)")]
    Singular { frequency_hz: f64 },
    #[error("sweep point {index}: {source}")]
    SweepPoint {
        index: usize,
        #[source]
        source: Box<SolveError>,
    },
}

/// Waveguide constants shared by every unit.
///
/// The propagation constant is linearised around `reference_hz`:
/// `β(f) = 2π/c · (n_eff·f_ref + n_g·(f - f_ref))`, so the phase index sets
/// the absolute phase and the group index sets resonance spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideParams {
    pub n_eff: f64,
    pub n_g: f64,
    pub reference_hz: f64,
    pub propagation_loss_db_per_cm: f64,
    pub tbu_length_m: f64,
}

impl Default for WaveguideParams {
    fn default() -> Self {
        WaveguideParams {
            n_eff: 2.35,
            n_g: 4.18,
            reference_hz: 193.4e12,
            propagation_loss_db_per_cm: 0.0,
            tbu_length_m: DEFAULT_TBU_LENGTH_M,
        }
    }
}

impl WaveguideParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        let ok = self.n_eff > 0.0
            && self.n_g > 0.0
            && self.reference_hz.is_finite()
            && self.reference_hz >= 0.0
            && self.propagation_loss_db_per_cm >= 0.0
            && self.propagation_loss_db_per_cm.is_finite()
            && self.tbu_length_m > 0.0
            && self.tbu_length_m.is_finite()
            && self.n_eff.is_finite()
            && self.n_g.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SolveError::Params(format!("{self:?}")))
        }
    }

    /// Propagation constant in rad/m.
    pub fn beta(&self, frequency_hz: f64) -> f64 {
        2.0 * PI / SPEED_OF_LIGHT
            * (self.n_eff * self.reference_hz + self.n_g * (frequency_hz - self.reference_hz))
    }

    /// Field amplitude after one unit length of distributed loss.
    pub fn propagation_amplitude(&self) -> f64 {
        let db = self.propagation_loss_db_per_cm * self.tbu_length_m * 100.0;
        10f64.powf(-db / 20.0)
    }

    /// Complex factor for one unit length: amplitude · e^{-jβL}.
    pub fn propagation(&self, frequency_hz: f64) -> Complex64 {
        Complex64::from_polar(
            self.propagation_amplitude(),
            -self.beta(frequency_hz) * self.tbu_length_m,
        )
    }

    /// Free spectral range of a loop made of `units` unit lengths.
    pub fn fsr_hz(&self, units: usize) -> f64 {
        SPEED_OF_LIGHT / (self.n_g * units as f64 * self.tbu_length_m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, stop_hz: f64, points: usize) -> Result<Self, SolveError> {
        let g = FrequencyGrid {
            start_hz,
            stop_hz,
            points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.points == 0 {
            return Err(SolveError::Grid("at least one point required".into()));
        }
        if !self.start_hz.is_finite() || !self.stop_hz.is_finite() {
            return Err(SolveError::Grid("non-finite bounds".into()));
        }
        if self.points > 1 && !(self.start_hz < self.stop_hz) {
            return Err(SolveError::Grid(format!(
                "start {} must be below stop {}",
                self.start_hz, self.stop_hz
            )));
        }
        Ok(())
    }

    pub fn step_hz(&self) -> f64 {
        if self.points > 1 {
            (self.stop_hz - self.start_hz) / (self.points - 1) as f64
        } else {
            0.0
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let step = self.step_hz();
        (0..self.points)
            .map(|i| self.start_hz + step * i as f64)
            .collect()
    }
}

/// External-port scattering matrices over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SParams {
    /// External ports, in the mesh's perimeter order (matrix index order).
    pub ports: Vec<PortId>,
    pub frequencies: Vec<f64>,
    pub matrices: Vec<CMatrix>,
}

impl SParams {
    /// `S[out][in]` at every frequency point.
    pub fn trace(&self, out: usize, inp: usize) -> Vec<Complex64> {
        self.matrices.iter().map(|m| m[(out, inp)]).collect()
    }
}

/// The linear system for one frequency point.
#[derive(Debug, Clone)]
pub struct NetworkSystem {
    /// Port whose incoming wave is unknown `i`.
    pub unknowns: Vec<PortId>,
    pub a: CMatrix,
    pub b: CMatrix,
    pub d: CMatrix,
    pub f: CMatrix,
}

impl NetworkSystem {
    pub fn dimension(&self) -> usize {
        self.unknowns.len()
    }
}

/// Transfer of one programmed unit including propagation, or `None` if off.
pub fn unit_transfer(
    program: &Program,
    tbu: usize,
    params: &WaveguideParams,
    frequency_hz: f64,
) -> Option<Gate2> {
    let settings = program.settings(tbu)?;
    let g = tbu_transfer(&settings).ok()?;
    Some(g.scale(params.propagation(frequency_hz)))
}

enum Slot {
    Internal(usize),
    External(usize),
}

pub fn assemble(
    mesh: &Mesh,
    program: &Program,
    params: &WaveguideParams,
    frequency_hz: f64,
) -> Result<NetworkSystem, SolveError> {
    program.validate_for(mesh)?;
    params.validate()?;

    let unknowns: Vec<PortId> = mesh
        .connections()
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect();
    let mut unknowns = unknowns;
    unknowns.sort();
    let ext = mesh.external_ports();
    let (n, p) = (unknowns.len(), ext.len());

    let slot = |port: PortId| -> Slot {
        match unknowns.binary_search(&port) {
            Ok(i) => Slot::Internal(i),
            Err(_) => Slot::External(mesh.external_index(port).expect("port is external")),
        }
    };

    let mut sys = NetworkSystem {
        a: CMatrix::zeros(n, n),
        b: CMatrix::zeros(n, p),
        d: CMatrix::zeros(p, n),
        f: CMatrix::zeros(p, p),
        unknowns: unknowns.clone(),
    };

    for (tbu, _) in program.entries() {
        let Some(g) = unit_transfer(program, tbu, params, frequency_hz) else {
            continue;
        };
        for end in [End::A, End::B] {
            for rin in 0..2u8 {
                let src = slot(PortId::new(tbu, end, rin));
                for rout in 0..2u8 {
                    let t = match end {
                        End::A => g.get(rout as usize, rin as usize),
                        End::B => g.get(rin as usize, rout as usize),
                    };
                    let out_port = PortId::new(tbu, end.other(), rout);
                    match (mesh.partner(out_port), &src) {
                        (Some(dst), Slot::Internal(j)) => {
                            let Slot::Internal(i) = slot(dst) else { unreachable!() };
                            sys.a[(i, *j)] += t;
                        }
                        (Some(dst), Slot::External(j)) => {
                            let Slot::Internal(i) = slot(dst) else { unreachable!() };
                            sys.b[(i, *j)] += t;
                        }
                        (None, Slot::Internal(j)) => {
                            let Slot::External(i) = slot(out_port) else { unreachable!() };
                            sys.d[(i, *j)] += t;
                        }
                        (None, Slot::External(j)) => {
                            let Slot::External(i) = slot(out_port) else { unreachable!() };
                            sys.f[(i, *j)] += t;
                        }
                    }
                }
            }
        }
    }
    Ok(sys)
}

/// External scattering matrix `S[out][in]` at one frequency.
pub fn solve(
    mesh: &Mesh,
    program: &Program,
    params: &WaveguideParams,
    frequency_hz: f64,
) -> Result<CMatrix, SolveError> {
    let sys = assemble(mesh, program, params, frequency_hz)?;
    solve_system(&sys).ok_or(SolveError::Singular { frequency_hz })
}

pub fn solve_system(sys: &NetworkSystem) -> Option<CMatrix> {
    let n = sys.dimension();
    if n == 0 {
        return Some(sys.f.clone());
    }
    let mut lhs = CMatrix::identity(n);
    for r in 0..n {
        for c in 0..n {
            lhs[(r, c)] -= sys.a[(r, c)];
        }
    }
    let x = linalg::solve(lhs, sys.b.clone())?;
    let mut s = &sys.d * &x;
    for r in 0..s.rows() {
        for c in 0..s.cols() {
            s[(r, c)] += sys.f[(r, c)];
        }
    }
    Some(s)
}

/// Solve every grid point; points are independent and run in parallel.
pub fn sweep(
    mesh: &Mesh,
    program: &Program,
    params: &WaveguideParams,
    grid: &FrequencyGrid,
) -> Result<SParams, SolveError> {
    grid.validate()?;
    program.validate_for(mesh)?;
    params.validate()?;
    let frequencies = grid.frequencies();
    let matrices = frequencies
        .par_iter()
        .enumerate()
        .map(|(index, &f)| {
            solve(mesh, program, params, f).map_err(|e| SolveError::SweepPoint {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SParams {
        ports: mesh.external_ports().to_vec(),
        frequencies,
        matrices,
    })
}

/// Field gain of one pass through a programmed unit from `in_port` to
/// `out_port` (opposite ends), or `None` if the unit is off or the ports do
/// not form a pass.
pub fn pass_gain(
    program: &Program,
    in_port: PortId,
    out_port: PortId,
    params: &WaveguideParams,
    frequency_hz: f64,
) -> Option<Complex64> {
    if in_port.tbu != out_port.tbu || in_port.end == out_port.end {
        return None;
    }
    let g = unit_transfer(program, in_port.tbu, params, frequency_hz)?;
    let (rin, rout) = (in_port.rail as usize, out_port.rail as usize);
    Some(match in_port.end {
        End::A => g.get(rout, rin),
        End::B => g.get(rin, rout),
    })
}

/// Product of [`pass_gain`] along a loop-free chain of passes.
pub fn cascade_gain(
    program: &Program,
    passes: &[(PortId, PortId)],
    params: &WaveguideParams,
    frequency_hz: f64,
) -> Option<Complex64> {
    passes.iter().try_fold(Complex64::new(1.0, 0.0), |acc, &(i, o)| {
        Some(acc * pass_gain(program, i, o, params, frequency_hz)?)
    })
}

/// Floor applied to `mag_db` so zero transmission stays a finite number.
pub const MAG_DB_FLOOR: f64 = -300.0;

/// CSV with one row per (frequency, output port, input port).
pub fn write_spectrum_csv<W: Write>(s: &SParams, mesh: &Mesh, mut w: W) -> io::Result<()> {
    writeln!(w, "frequency_hz,out_port,in_port,re,im,mag_db,phase_rad")?;
    let names: Vec<String> = s.ports.iter().map(|p| mesh.port_name(*p)).collect();
    for (f, m) in s.frequencies.iter().zip(&s.matrices) {
        for (i, out) in names.iter().enumerate() {
            for (j, inp) in names.iter().enumerate() {
                let z = m[(i, j)];
                let mag_db = (20.0 * z.norm().log10()).max(MAG_DB_FLOOR);
                writeln!(
                    w,
                    "{f},{out},{inp},{},{},{},{}",
                    z.re,
                    z.im,
                    mag_db,
                    z.arg()
                )?;
            }
        }
    }
    Ok(())
}
