//! Tunable basic unit: a balanced Mach-Zehnder cell with one phase shifter
//! per arm, fed and recombined by fixed 50:50 couplers.
//!
//! Couplers are `(1/√2)·[[1, j], [j, 1]]` and the arms are
//! `diag(e^{jθu}, e^{jθl})`, which gives
//!
//! ```text
//! T = a · j·e^{jθ̄} · [[sin Δ/2,  cos Δ/2],
//!                     [cos Δ/2, -sin Δ/2]]
//! ```
//!
//! with `θ̄ = (θu+θl)/2`, `Δ = θu-θl` and `a = 10^{-loss/20}`. Rail 0 is the
//! upper arm. `Δ = 0` is the full cross state, `Δ = π` the full bar state.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gates::Gate2;

/// Insertion loss per unit used when nothing else is configured.
pub const DEFAULT_INSERTION_LOSS_DB: f64 = 0.3;
/// Physical length of one unit in metres.
pub const DEFAULT_TBU_LENGTH_M: f64 = 811e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TbuError {
    #[error("invalid unit settings: {0}")]
    InvalidSettings(String),
    #[error("power coupling ratio {0} outside [0, 1]")]
    CouplingOutOfRange(f64),
    #[error("an `off` unit has no transfer matrix")]
    OffMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TbuSettings {
    pub theta_upper: f64,
    pub theta_lower: f64,
    pub insertion_loss_db: f64,
}

impl TbuSettings {
    pub fn new(theta_upper: f64, theta_lower: f64, insertion_loss_db: f64) -> Self {
        TbuSettings {
            theta_upper,
            theta_lower,
            insertion_loss_db,
        }
    }

    pub fn validate(&self) -> Result<(), TbuError> {
        if !self.theta_upper.is_finite() || !self.theta_lower.is_finite() {
            return Err(TbuError::InvalidSettings(format!(
                "non-finite phase ({}, {})",
                self.theta_upper, self.theta_lower
            )));
        }
        if !(self.insertion_loss_db >= 0.0) || !self.insertion_loss_db.is_finite() {
            return Err(TbuError::InvalidSettings(format!(
                "insertion loss {} dB must be finite and non-negative",
                self.insertion_loss_db
            )));
        }
        Ok(())
    }

    /// Arm phase difference `θu - θl`.
    pub fn differential(&self) -> f64 {
        self.theta_upper - self.theta_lower
    }

    /// Mean arm phase `(θu + θl) / 2`.
    pub fn common(&self) -> f64 {
        (self.theta_upper + self.theta_lower) / 2.0
    }

    pub fn amplitude(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 20.0)
    }
}

/// Routing state of one unit inside a program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TbuMode {
    Bar,
    Cross,
    Tunable(TbuSettings),
    /// Unused; light reaching it is absorbed.
    Off,
}

impl TbuMode {
    pub fn name(&self) -> &'static str {
        match self {
            TbuMode::Bar => "bar",
            TbuMode::Cross => "cross",
            TbuMode::Tunable(_) => "tunable",
            TbuMode::Off => "off",
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self, TbuMode::Off)
    }
}

pub fn tbu_transfer(s: &TbuSettings) -> Result<Gate2, TbuError> {
    s.validate()?;
    let half = s.differential() / 2.0;
    let (sin, cos) = half.sin_cos();
    let k = Complex64::new(0.0, 1.0) * Complex64::from_polar(s.amplitude(), s.common());
    Ok(Gate2::new(k * sin, k * cos, k * cos, -k * sin))
}

/// Settings whose lossless cross-port power equals `kappa`, with mean arm
/// phase `common_phase`.
pub fn settings_for_coupling(
    kappa: f64,
    common_phase: f64,
    loss_db: f64,
) -> Result<TbuSettings, TbuError> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(TbuError::CouplingOutOfRange(kappa));
    }
    let delta = 2.0 * kappa.sqrt().acos();
    let s = TbuSettings::new(common_phase + delta / 2.0, common_phase - delta / 2.0, loss_db);
    s.validate()?;
    Ok(s)
}

/// Concrete settings for a routing mode. Bar and cross use zero mean phase.
pub fn mode_settings(mode: &TbuMode, default_loss_db: f64) -> Result<TbuSettings, TbuError> {
    match mode {
        TbuMode::Bar => settings_for_coupling(0.0, 0.0, default_loss_db),
        TbuMode::Cross => settings_for_coupling(1.0, 0.0, default_loss_db),
        TbuMode::Tunable(s) => {
            s.validate()?;
            Ok(*s)
        }
        TbuMode::Off => Err(TbuError::OffMode),
    }
}

/// Power fraction coupled to the opposite rail (lossless normalisation).
pub fn cross_power(s: &TbuSettings) -> f64 {
    (s.differential() / 2.0).cos().powi(2)
}

/// Whether a mode needs a non-zero arm phase difference to hold.
pub fn mode_is_active(mode: &TbuMode) -> bool {
    match mode {
        TbuMode::Bar => true,
        TbuMode::Cross | TbuMode::Off => false,
        TbuMode::Tunable(s) => (s.differential().rem_euclid(2.0 * PI)).abs() > 0.0,
    }
}
