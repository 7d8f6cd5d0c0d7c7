//! Electronic control tier: phase drivers with finite resolution, photodiode
//! monitors, linear thermal crosstalk, and derivative-free calibration.
//!
//! Actuators are enumerated as `[θu, θl]` for every non-off unit of a program
//! in ascending unit id. Drivers command phase directly.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::mesh::{Mesh, PortId, Program, TbuId};
use crate::netsolve::{self, SolveError, WaveguideParams};
use crate::tbu::{mode_settings, TbuMode, TbuSettings};

const TAU: f64 = 2.0 * PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("driver resolution {0} bits outside [1, 24]")]
    Resolution(u32),
    #[error("invalid monitor configuration: {0}")]
    Monitor(String),
    #[error("optical power {0} W must be finite and non-negative")]
    NegativePower(f64),
    #[error("invalid crosstalk matrix: {0}")]
    Crosstalk(String),
    #[error("crosstalk matrix is {matrix}×{matrix} but the program has {actuators} actuators")]
    DimensionMismatch { matrix: usize, actuators: usize },
    #[error("invalid optimizer options: {0}")]
    Options(String),
    #[error("objective returned {cost} at settings {settings:?}")]
    NonFiniteCost { cost: f64, settings: Vec<f64> },
    #[error("invalid coupling target: {0}")]
    Target(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriverConfig {
    bits: u32,
}

impl DriverConfig {
    pub fn new(bits: u32) -> Result<Self, ControlError> {
        if (1..=24).contains(&bits) {
            Ok(DriverConfig { bits })
        } else {
            Err(ControlError::Resolution(bits))
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    /// Spacing between adjacent phase levels.
    pub fn step(&self) -> f64 {
        TAU / self.levels() as f64
    }

    /// Nearest level to `phase` after wrapping into `[0, 2π)`. The top level
    /// `2π` is kept rather than folded to 0 so that rounding stays monotone;
    /// it is the same physical phase.
    pub fn quantize(&self, phase: f64) -> f64 {
        let w = phase.rem_euclid(TAU);
        (w / self.step()).round() * self.step()
    }
}

/// Every non-off unit becomes tunable with both arm phases quantized.
pub fn quantize_program(program: &Program, driver: &DriverConfig) -> Program {
    map_settings(program, |s| {
        TbuSettings::new(
            driver.quantize(s.theta_upper),
            driver.quantize(s.theta_lower),
            s.insertion_loss_db,
        )
    })
}

fn map_settings(program: &Program, mut f: impl FnMut(TbuSettings) -> TbuSettings) -> Program {
    let mut out = program.clone();
    for (tbu, mode) in program.entries() {
        if let Ok(s) = mode_settings(&mode, program.default_loss_db) {
            out.set(tbu, TbuMode::Tunable(f(s)));
        }
    }
    out
}

/// Commanded phases in actuator order.
pub fn actuator_phases(program: &Program) -> Vec<f64> {
    program
        .entries()
        .filter_map(|(_, mode)| mode_settings(&mode, program.default_loss_db).ok())
        .flat_map(|s| [s.theta_upper, s.theta_lower])
        .collect()
}

/// Units owning the actuators, in actuator-pair order.
pub fn actuator_units(program: &Program) -> Vec<TbuId> {
    program
        .entries()
        .filter(|(_, m)| !m.is_off())
        .map(|(t, _)| t)
        .collect()
}

/// Replace every actuator phase, in actuator order.
pub fn with_phases(program: &Program, phases: &[f64]) -> Result<Program, ControlError> {
    let n = 2 * actuator_units(program).len();
    if phases.len() != n {
        return Err(ControlError::DimensionMismatch {
            matrix: phases.len(),
            actuators: n,
        });
    }
    let mut it = phases.chunks(2);
    Ok(map_settings(program, |s| {
        let p = it.next().expect("length checked");
        TbuSettings::new(p[0], p[1], s.insertion_loss_db)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorConfig {
    pub responsivity_a_per_w: f64,
    pub dark_current_a: f64,
    pub noise_sigma_a: f64,
    pub tap_ratio: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            responsivity_a_per_w: 0.7,
            dark_current_a: 50e-9,
            noise_sigma_a: 0.0,
            tap_ratio: 1.0,
        }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.responsivity_a_per_w > 0.0
            && self.responsivity_a_per_w.is_finite()
            && self.dark_current_a >= 0.0
            && self.dark_current_a.is_finite()
            && self.noise_sigma_a >= 0.0
            && self.noise_sigma_a.is_finite()
            && self.tap_ratio > 0.0
            && self.tap_ratio <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(ControlError::Monitor(format!("{self:?}")))
        }
    }
}

/// Photocurrent for `power_w` of optical power. No randomness is drawn when
/// `sigma` is zero.
pub fn monitor_read<R: Rng + ?Sized>(
    power_w: f64,
    config: &MonitorConfig,
    rng: &mut R,
) -> Result<f64, ControlError> {
    config.validate()?;
    if !(power_w >= 0.0) || !power_w.is_finite() {
        return Err(ControlError::NegativePower(power_w));
    }
    let mut i = config.responsivity_a_per_w * config.tap_ratio * power_w + config.dark_current_a;
    if config.noise_sigma_a > 0.0 {
        let n = Normal::new(0.0, config.noise_sigma_a).expect("sigma validated");
        i += n.sample(rng);
    }
    Ok(i)
}

/// Parasitic phase at actuator `i` per radian commanded at actuator `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CrosstalkMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ControlError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ControlError::Crosstalk("matrix must be square".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r[i] != 0.0 {
                return Err(ControlError::Crosstalk(format!("diagonal entry {i} is not zero")));
            }
            if r.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(ControlError::Crosstalk(format!("row {i} has a negative or non-finite entry")));
            }
            if r.iter().sum::<f64>() >= 1.0 {
                return Err(ControlError::Crosstalk(format!("row {i} sums to 1 or more")));
            }
        }
        Ok(CrosstalkMatrix {
            n,
            data: rows.concat(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        CrosstalkMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// Coupling `eps` between consecutive actuators in actuator order.
    pub fn uniform_neighbor(n: usize, eps: f64) -> Result<Self, ControlError> {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|k| if i.abs_diff(k) == 1 { eps } else { 0.0 })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.n + k]
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|k| self.get(i, k)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `commanded + X · commanded`.
    pub fn apply(&self, commanded: &[f64]) -> Result<Vec<f64>, ControlError> {
        if commanded.len() != self.n {
            return Err(ControlError::DimensionMismatch {
                matrix: self.n,
                actuators: commanded.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| commanded[i] + (0..self.n).map(|k| self.get(i, k) * commanded[k]).sum::<f64>())
            .collect())
    }
}

/// Effective phase vector of `program` under crosstalk `x`.
pub fn apply_crosstalk(program: &Program, x: &CrosstalkMatrix) -> Result<Vec<f64>, ControlError> {
    x.apply(&actuator_phases(program))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerOptions {
    pub max_evaluations: usize,
    /// A full coordinate sweep that improves the best cost by less than this
    /// stops the search.
    pub tolerance: f64,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    /// Line searches stop once the bracket is this fraction of the bound
    /// width.
    pub line_tolerance: f64,
}

impl OptimizerOptions {
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        OptimizerOptions {
            max_evaluations: 500,
            tolerance: 1e-12,
            bounds,
            seed: 0,
            line_tolerance: 1e-7,
        }
    }

    pub fn validate(&self, initial: &[f64]) -> Result<(), ControlError> {
        let bad = |m: String| Err(ControlError::Options(m));
        if self.max_evaluations < 1 {
            return bad("max_evaluations must be at least 1".into());
        }
        if !(self.tolerance > 0.0) || !(self.line_tolerance > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.bounds.len() != initial.len() {
            return bad(format!(
                "{} bounds for {} parameters",
                self.bounds.len(),
                initial.len()
            ));
        }
        for (i, (&(lo, hi), &x)) in self.bounds.iter().zip(initial).enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return bad(format!("bounds {i} = ({lo}, {hi}) are not an interval"));
            }
            if !(lo..=hi).contains(&x) {
                return bad(format!("initial value {x} outside bounds {i} = ({lo}, {hi})"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub evaluation: usize,
    pub cost: f64,
    pub settings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

pub trait Optimizer {
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> f64,
        initial: &[f64],
        options: &OptimizerOptions,
    ) -> Result<OptimizeResult, ControlError>;
}

/// Bounded coordinate descent; each coordinate is line-searched by golden
/// section over its full bound. Coordinate order per sweep is shuffled by
/// the seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoordinateDescent;

struct Tracker<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    budget: usize,
    trace: Vec<TraceEntry>,
    best: Vec<f64>,
    best_cost: f64,
}

impl Tracker<'_> {
    fn exhausted(&self) -> bool {
        self.trace.len() >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> Result<f64, ControlError> {
        let cost = (self.objective)(x);
        if !cost.is_finite() {
            return Err(ControlError::NonFiniteCost {
                cost,
                settings: x.to_vec(),
            });
        }
        self.trace.push(TraceEntry {
            evaluation: self.trace.len() + 1,
            cost,
            settings: x.to_vec(),
        });
        if cost < self.best_cost {
            self.best_cost = cost;
            self.best = x.to_vec();
        }
        Ok(cost)
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

impl Optimizer for CoordinateDescent {
    fn minimize(
        &self,
        objective: &mut dyn FnMut(&[f64]) -> f64,
        initial: &[f64],
        options: &OptimizerOptions,
    ) -> Result<OptimizeResult, ControlError> {
        options.validate(initial)?;
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut t = Tracker {
            objective,
            budget: options.max_evaluations,
            trace: Vec::new(),
            best: initial.to_vec(),
            best_cost: f64::INFINITY,
        };
        t.eval(initial)?;
        let mut converged = false;
        let mut order: Vec<usize> = (0..initial.len()).collect();

        'sweeps: while !t.exhausted() {
            let start = t.best_cost;
            order.shuffle(&mut rng);
            for &i in &order {
                let (lo, hi) = options.bounds[i];
                let min_width = options.line_tolerance * (hi - lo);
                let (mut a, mut b) = (lo, hi);
                let mut x = t.best.clone();
                let mut probe = |v: f64, t: &mut Tracker| {
                    x[i] = v;
                    t.eval(&x)
                };
                if t.exhausted() {
                    break 'sweeps;
                }
                let mut c = b - INV_PHI * (b - a);
                let mut d = a + INV_PHI * (b - a);
                let mut fc = probe(c, &mut t)?;
                if t.exhausted() {
                    break 'sweeps;
                }
                let mut fd = probe(d, &mut t)?;
                while b - a > min_width {
                    if t.exhausted() {
                        break 'sweeps;
                    }
                    if fc <= fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - INV_PHI * (b - a);
                        fc = probe(c, &mut t)?;
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + INV_PHI * (b - a);
                        fd = probe(d, &mut t)?;
                    }
                }
            }
            if start - t.best_cost < options.tolerance {
                converged = true;
                break;
            }
        }

        Ok(OptimizeResult {
            evaluations: t.trace.len(),
            best: t.best,
            best_cost: t.best_cost,
            converged,
            trace: t.trace,
        })
    }
}

pub fn optimize(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    initial: &[f64],
    options: &OptimizerOptions,
) -> Result<OptimizeResult, ControlError> {
    CoordinateDescent.minimize(objective, initial, options)
}

/// CSV with header `evaluation,cost,x0,x1,...`.
pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], mut w: W) -> io::Result<()> {
    let dims = trace.first().map_or(0, |e| e.settings.len());
    write!(w, "evaluation,cost")?;
    for i in 0..dims {
        write!(w, ",x{i}")?;
    }
    writeln!(w)?;
    for e in trace {
        write!(w, "{},{}", e.evaluation, e.cost)?;
        for x in &e.settings {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Calibrate one unit's split ratio from monitor readings at two outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTarget {
    pub tbu: TbuId,
    pub input: PortId,
    pub through: PortId,
    pub coupled: PortId,
    /// Desired `coupled / (through + coupled)` power fraction.
    pub ratio: f64,
}

/// The simulated hardware in the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareModel {
    pub driver: Option<DriverConfig>,
    pub crosstalk: Option<CrosstalkMatrix>,
    pub monitor: MonitorConfig,
    pub params: WaveguideParams,
    pub frequency_hz: f64,
    pub input_power_w: f64,
}

impl Default for HardwareModel {
    fn default() -> Self {
        let params = WaveguideParams::default();
        HardwareModel {
            driver: None,
            crosstalk: None,
            monitor: MonitorConfig::default(),
            frequency_hz: params.reference_hz,
            params,
            input_power_w: 1e-3,
        }
    }
}

/// Closed loop `Δ → program → quantize → crosstalk → solve → monitors → cost`
/// for a single unit's arm difference, with the unit's mean phase held.
pub struct ClosedLoop<'a> {
    pub mesh: &'a Mesh,
    pub program: Program,
    pub target: CouplingTarget,
    pub hardware: HardwareModel,
    pub seed: u64,
}

impl ClosedLoop<'_> {
    pub fn validate(&self) -> Result<(), ControlError> {
        let t = &self.target;
        self.program.validate_for(self.mesh).map_err(SolveError::from)?;
        if !(0.0..=1.0).contains(&t.ratio) {
            return Err(ControlError::Target(format!("ratio {} outside [0, 1]", t.ratio)));
        }
        if t.tbu >= self.mesh.tbu_count() {
            return Err(ControlError::Target(format!("unit T{} does not exist", t.tbu)));
        }
        for p in [t.input, t.through, t.coupled] {
            if !self.mesh.is_external(p) {
                return Err(ControlError::Target(format!("{p} is not an external port")));
            }
        }
        if t.through == t.coupled {
            return Err(ControlError::Target("through and coupled ports coincide".into()));
        }
        self.hardware.monitor.validate()?;
        Ok(())
    }

    /// Commanded program with the target unit at arm difference `delta`.
    pub fn program_for(&self, delta: f64) -> Program {
        let base = self
            .program
            .settings(self.target.tbu)
            .unwrap_or(TbuSettings::new(0.0, 0.0, self.program.default_loss_db));
        let c = base.common();
        let mut p = self.program.clone();
        p.set(
            self.target.tbu,
            TbuMode::Tunable(TbuSettings::new(c + delta / 2.0, c - delta / 2.0, base.insertion_loss_db)),
        );
        p
    }

    /// Program as the hardware realises it.
    pub fn realised(&self, commanded: &Program) -> Result<Program, ControlError> {
        let mut p = match &self.hardware.driver {
            Some(d) => quantize_program(commanded, d),
            None => commanded.clone(),
        };
        if let Some(x) = &self.hardware.crosstalk {
            p = with_phases(&p, &apply_crosstalk(&p, x)?)?;
        }
        Ok(p)
    }

    /// Monitored coupled fraction, dark current subtracted.
    pub fn measure<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> Result<f64, ControlError> {
        let p = self.realised(&self.program_for(delta))?;
        let s = netsolve::solve(self.mesh, &p, &self.hardware.params, self.hardware.frequency_hz)?;
        let idx = |q: PortId| self.mesh.external_index(q).expect("validated external port");
        let i = idx(self.target.input);
        let pin = self.hardware.input_power_w;
        let dark = self.hardware.monitor.dark_current_a;
        let through = monitor_read(s[(idx(self.target.through), i)].norm_sqr() * pin, &self.hardware.monitor, rng)? - dark;
        let coupled = monitor_read(s[(idx(self.target.coupled), i)].norm_sqr() * pin, &self.hardware.monitor, rng)? - dark;
        let total = through + coupled;
        if total <= 0.0 {
            return Ok(0.0);
        }
        Ok(coupled / total)
    }

    /// Minimise `(measured − ratio)²` over `delta ∈ [0, π]`, starting from
    /// `initial_delta`.
    pub fn run(&self, initial_delta: f64, mut options: OptimizerOptions) -> Result<OptimizeResult, ControlError> {
        self.validate()?;
        options.bounds = vec![(0.0, PI)];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut failure = None;
        let mut objective = |x: &[f64]| match self.measure(x[0], &mut rng) {
            Ok(r) => (r - self.target.ratio).powi(2),
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let result = optimize(&mut objective, &[initial_delta.clamp(0.0, PI)], &options);
        match (result, failure) {
            (Err(ControlError::NonFiniteCost { .. }), Some(e)) => Err(e),
            (r, _) => r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, Topology};

    #[test]
    fn monitor_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = MonitorConfig::default();
        let i = monitor_read(1e-3, &cfg, &mut rng).unwrap();
        assert!((i - 700.05e-6).abs() <= 2.0 * f64::EPSILON * 700.05e-6);
        assert_eq!(monitor_read(0.0, &cfg, &mut rng).unwrap(), 50e-9);
        assert_eq!(
            monitor_read(-1.0, &cfg, &mut rng),
            Err(ControlError::NegativePower(-1.0))
        );
    }

    #[test]
    fn noisy_mean_converges() {
        let cfg = MonitorConfig {
            noise_sigma_a: 1e-6,
            ..MonitorConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mean = (0..n).map(|_| monitor_read(1e-3, &cfg, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 700.05e-6).abs() < 5.0 * 1e-6 / (n as f64).sqrt());
    }

    #[test]
    fn quantization_bounds_and_monotonicity() {
        let d8 = DriverConfig::new(8).unwrap();
        let mut prev = 0.0;
        for k in 0..10_000 {
            let x = TAU * k as f64 / 10_000.0;
            let q = d8.quantize(x);
            assert!((q - x).abs() <= PI / 256.0 + 1e-15);
            assert!(q >= prev);
            prev = q;
        }
        let d24 = DriverConfig::new(24).unwrap();
        let x = 12345.0 * d24.step();
        assert_eq!(d24.quantize(x), x);
        assert!(DriverConfig::new(0).is_err());
        assert!(DriverConfig::new(25).is_err());
    }

    #[test]
    fn crosstalk_examples() {
        let mut p = Program::new();
        p.set(0, TbuMode::Tunable(TbuSettings::new(PI, 0.5, 0.0)));
        p.set(1, TbuMode::Tunable(TbuSettings::new(PI, 0.0, 0.0)));
        assert_eq!(apply_crosstalk(&p, &CrosstalkMatrix::zeros(4)).unwrap(), actuator_phases(&p));
        // actuator 1 (θl of T0) has neighbours 0 and 2, both at π
        let eps = 0.01;
        let x = CrosstalkMatrix::uniform_neighbor(4, eps).unwrap();
        let eff = apply_crosstalk(&p, &x).unwrap();
        assert!((eff[1] - 0.5 - 2.0 * eps * PI).abs() < 1e-15);
        assert!(matches!(
            apply_crosstalk(&p, &CrosstalkMatrix::zeros(3)),
            Err(ControlError::DimensionMismatch { .. })
        ));
        assert!(CrosstalkMatrix::new(vec![vec![0.0, 0.6], vec![1.0, 0.0]]).is_err());
        assert!(CrosstalkMatrix::new(vec![vec![0.1]]).is_err());
    }

    #[test]
    fn separable_quadratic_reaches_vertex() {
        let mut f = |x: &[f64]| (x[0] - 0.3).powi(2) + 2.0 * (x[1] + 1.1).powi(2);
        let opts = OptimizerOptions::new(vec![(-2.0, 2.0), (-2.0, 2.0)]);
        let r = optimize(&mut f, &[1.5, 1.5], &opts).unwrap();
        assert!(r.converged);
        assert!((r.best[0] - 0.3).abs() < 1e-6 && (r.best[1] + 1.1).abs() < 1e-6);
        assert!(r.trace.iter().all(|e| e.cost >= r.best_cost));
        assert_eq!(r.trace[0].settings, vec![1.5, 1.5]);
    }

    #[test]
    fn budget_of_one_returns_initial() {
        let mut f = |x: &[f64]| x[0] * x[0];
        let mut opts = OptimizerOptions::new(vec![(-1.0, 1.0)]);
        opts.max_evaluations = 1;
        let r = optimize(&mut f, &[0.7], &opts).unwrap();
        assert_eq!((r.best, r.evaluations), (vec![0.7], 1));
    }

    #[test]
    fn non_finite_cost_names_settings() {
        let mut f = |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 1.0 };
        let r = optimize(&mut f, &[0.0], &OptimizerOptions::new(vec![(0.0, 1.0)]));
        match r {
            Err(ControlError::NonFiniteCost { settings, .. }) => assert!(settings[0] > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_csv_header() {
        let trace = vec![TraceEntry {
            evaluation: 1,
            cost: 0.25,
            settings: vec![1.0, 2.0],
        }];
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "evaluation,cost,x0,x1\n1,0.25,1,2\n");
    }

    #[test]
    fn closed_loop_finds_half_split() {
        let mesh = generate(Topology::Hexagonal, 1, 1).unwrap();
        let p = |s: &str| mesh.resolve_port(s).unwrap();
        let mut program = Program::with_loss(0.0);
        program.set(0, TbuMode::Cross);
        program.set(1, TbuMode::Cross);
        let target = CouplingTarget {
            tbu: 0,
            input: p("P0"),
            through: p("P1"),
            coupled: p("P3"),
            ratio: 0.5,
        };
        let lp = ClosedLoop {
            mesh: &mesh,
            program,
            target,
            hardware: HardwareModel::default(),
            seed: 3,
        };
        let r = lp.run(0.2, OptimizerOptions::new(vec![])).unwrap();
        assert!(r.evaluations < 200, "{}", r.evaluations);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((lp.measure(r.best[0], &mut rng).unwrap() - 0.5).abs() < 1e-4);
    }
}
