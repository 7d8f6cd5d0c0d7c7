//! Algebra of 2×2 unitary gates.
//!
//! Matrices are indexed `[output][input]`. Rotation matrices follow the
//! photonic convention used throughout the crate:
//!
//! ```text
//! Rx(θ) = [[cos θ/2, j sin θ/2], [j sin θ/2, cos θ/2]]
//! Ry(θ) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]
//! Rz(θ) = diag(e^{-jθ/2}, e^{jθ/2})
//! ```
//!
//! Any U(2) matrix is `e^{jδ}·Rz(α)·Ry(β)·Rx(γ)` (ZYX order) or
//! `e^{jδ}·Rx(α)·Ry(β)·Rz(γ)` (XYZ order).

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used to accept a matrix as unitary when it comes from outside
/// (e.g. read back from a simulation).
pub const INPUT_UNITARITY_TOL: f64 = 1e-9;

const J: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("Pauli index {0} out of range 0..=3")]
    PauliIndex(usize),
    #[error("non-finite angle {0}")]
    NonFinite(f64),
    #[error("cannot compose an empty gate list")]
    EmptyComposition,
    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
}

/// A 2×2 complex field transfer matrix; row = output port, column = input port.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate2(pub [[Complex64; 2]; 2]);

impl fmt::Debug for Gate2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "[[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            m[0][0], m[0][1], m[1][0], m[1][1]
        )
    }
}

impl Gate2 {
    pub const IDENTITY: Gate2 = Gate2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Gate2([[a, b], [c, d]])
    }

    #[inline]
    pub fn get(&self, out: usize, inp: usize) -> Complex64 {
        self.0[out][inp]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.0;
        Gate2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Gate2([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Gate2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Gate2) -> f64 {
        let mut acc = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                acc += (self.0[r][c] - other.0[r][c]).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Largest entrywise deviation of `U^H U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint() * *self;
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let expect = if r == c { ONE } else { ZERO };
                worst = worst.max((p.0[r][c] - expect).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }
}

impl Mul for Gate2 {
    type Output = Gate2;

    fn mul(self, rhs: Gate2) -> Gate2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[ZERO; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = a[r][0] * b[0][c] + a[r][1] * b[1][c];
            }
        }
        Gate2(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Which of the two rotation sequences an [`EulerAngles`] value describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EulerOrder {
    /// `e^{jδ}·Rz(α)·Ry(β)·Rx(γ)`
    Zyx,
    /// `e^{jδ}·Rx(α)·Ry(β)·Rz(γ)`
    Xyz,
}

/// Global phase plus three rotation angles, all in radians.
///
/// Decomposition returns `δ ∈ (-π/2, π/2]`, `α ∈ [0, 4π)`, `β ∈ [-π/2, π/2]`
/// and `γ ∈ (-2π, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub order: EulerOrder,
}

impl EulerAngles {
    pub fn new(delta: f64, alpha: f64, beta: f64, gamma: f64, order: EulerOrder) -> Self {
        EulerAngles {
            delta,
            alpha,
            beta,
            gamma,
            order,
        }
    }
}

/// Pauli matrix `σ_k` for `k ∈ {0, 1, 2, 3}` (`σ_0` is the identity).
pub fn pauli(k: usize) -> Result<Gate2, GateError> {
    let g = match k {
        0 => Gate2::IDENTITY,
        1 => Gate2::new(ZERO, ONE, ONE, ZERO),
        2 => Gate2::new(ZERO, -J, J, ZERO),
        3 => Gate2::new(ONE, ZERO, ZERO, -ONE),
        _ => return Err(GateError::PauliIndex(k)),
    };
    Ok(g)
}

fn finite(x: f64) -> Result<f64, GateError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(GateError::NonFinite(x))
    }
}

pub fn rotation(axis: Axis, theta: f64) -> Result<Gate2, GateError> {
    let half = finite(theta)? / 2.0;
    let (s, c) = half.sin_cos();
    let g = match axis {
        Axis::X => Gate2::new(c.into(), J * s, J * s, c.into()),
        Axis::Y => Gate2::new(c.into(), (-s).into(), s.into(), c.into()),
        Axis::Z => Gate2::new(
            Complex64::from_polar(1.0, -half),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, half),
        ),
    };
    Ok(g)
}

/// Cascade product. The first gate in the slice acts on the signal first,
/// so `compose(&[a, b, c]) == c * b * a`.
pub fn compose(gates: &[Gate2]) -> Result<Gate2, GateError> {
    let (first, rest) = gates.split_first().ok_or(GateError::EmptyComposition)?;
    Ok(rest.iter().fold(*first, |acc, g| *g * acc))
}

pub fn euler_compose(angles: &EulerAngles) -> Result<Gate2, GateError> {
    let phase = Complex64::from_polar(1.0, finite(angles.delta)?);
    let (outer, inner) = match angles.order {
        EulerOrder::Zyx => (Axis::Z, Axis::X),
        EulerOrder::Xyz => (Axis::X, Axis::Z),
    };
    let u = rotation(outer, angles.alpha)?
        * rotation(Axis::Y, angles.beta)?
        * rotation(inner, angles.gamma)?;
    Ok(u.scale(phase))
}

/// Decompose a unitary into Euler angles of the requested order.
pub fn euler_decompose(u: &Gate2, order: EulerOrder) -> Result<EulerAngles, GateError> {
    let deviation = u.unitarity_deviation();
    if !(deviation <= INPUT_UNITARITY_TOL) {
        return Err(GateError::NotUnitary { deviation });
    }
    // arg ∈ (-π, π] so δ ∈ (-π/2, π/2]
    let delta = u.det().arg() / 2.0;
    let v = u.scale(Complex64::from_polar(1.0, -delta));

    match order {
        EulerOrder::Zyx => {
            let (alpha, beta, gamma) = zyx_angles(&v);
            Ok(EulerAngles::new(delta, alpha, beta, gamma, order))
        }
        EulerOrder::Xyz => {
            // V = Rx(α)Ry(β)Rz(γ)  ⇔  V^H = Rz(-γ)Ry(-β)Rx(-α)
            let (a, b, c) = zyx_angles(&v.adjoint());
            let mut alpha = -c;
            if alpha < 0.0 {
                alpha += 4.0 * PI;
            }
            let mut gamma = -a;
            if gamma <= -2.0 * PI {
                gamma += 4.0 * PI;
            }
            Ok(EulerAngles::new(delta, alpha, -b, gamma, order))
        }
    }
}

/// ZYX angles of an SU(2) matrix, exact including the global sign.
fn zyx_angles(v: &Gate2) -> (f64, f64, f64) {
    let m = &v.0;
    // V = q0·I - j(q1·X + q2·Y + q3·Z)
    let q0 = (m[0][0].re + m[1][1].re) / 2.0;
    let q3 = (m[1][1].im - m[0][0].im) / 2.0;
    let q2 = (m[1][0].re - m[0][1].re) / 2.0;
    let q1 = -(m[1][0].im + m[0][1].im) / 2.0;

    // With z = α/2, x = -γ/2 (the X rotation here is e^{+jγX/2}),
    // c = cos β/2, s = sin β/2:
    //   q0 + q2 = (c+s) cos(z-x),  q3 - q1 = (c+s) sin(z-x)
    //   q0 - q2 = (c-s) cos(z+x),  q3 + q1 = (c-s) sin(z+x)
    let plus = (q3 - q1).hypot(q0 + q2);
    let minus = (q3 + q1).hypot(q0 - q2);
    let beta = ((plus * plus - minus * minus) / 2.0).atan2(plus * minus);

    const LOCK: f64 = 1e-12;
    let diff = (q3 - q1).atan2(q0 + q2);
    let sum = (q3 + q1).atan2(q0 - q2);
    let (z, x) = if minus < LOCK {
        (diff, 0.0)
    } else if plus < LOCK {
        (sum, 0.0)
    } else {
        ((sum + diff) / 2.0, (sum - diff) / 2.0)
    };

    let mut alpha = 2.0 * z;
    if alpha < 0.0 {
        alpha += 4.0 * PI;
    }
    let gamma = -2.0 * x;
    (alpha, beta, if gamma == 0.0 { 0.0 } else { gamma })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &Gate2, b: &Gate2, tol: f64) -> bool {
        a.frobenius_distance(b) < tol
    }

    #[test]
    fn pauli_matrices_match_definition() {
        assert_eq!(pauli(0).unwrap(), Gate2::IDENTITY);
        assert_eq!(pauli(1).unwrap(), Gate2::new(ZERO, ONE, ONE, ZERO));
        assert_eq!(pauli(2).unwrap(), Gate2::new(ZERO, c(0.0, -1.0), J, ZERO));
        assert_eq!(pauli(3).unwrap(), Gate2::new(ONE, ZERO, ZERO, -ONE));
        assert_eq!(pauli(4), Err(GateError::PauliIndex(4)));
    }

    #[test]
    fn pauli_squares_to_identity() {
        for k in 1..=3 {
            let p = pauli(k).unwrap();
            assert!(close(&(p * p), &Gate2::IDENTITY, TOL));
        }
    }

    #[test]
    fn rotation_examples() {
        assert!(close(&rotation(Axis::X, 0.0).unwrap(), &Gate2::IDENTITY, TOL));
        let rx_pi = rotation(Axis::X, PI).unwrap();
        assert!(close(&rx_pi, &Gate2::new(ZERO, J, J, ZERO), TOL));
        let t = 0.83;
        let rz = rotation(Axis::Z, t).unwrap();
        let expect = Gate2::new(
            Complex64::from_polar(1.0, -t / 2.0),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, t / 2.0),
        );
        assert!(close(&rz, &expect, TOL));
        assert!(rotation(Axis::Y, f64::NAN).is_err());
    }

    #[test]
    fn rotations_are_special_unitary() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for k in 0..20 {
                let g = rotation(axis, -7.0 + 0.77 * k as f64).unwrap();
                assert!(g.is_unitary(TOL));
                assert!((g.det() - ONE).norm() < TOL);
            }
        }
    }

    #[test]
    fn rotations_add_about_same_axis() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let (a, b) = (0.4, -2.9);
            let lhs = rotation(axis, a).unwrap() * rotation(axis, b).unwrap();
            assert!(close(&lhs, &rotation(axis, a + b).unwrap(), TOL));
        }
    }

    #[test]
    fn compose_applies_first_element_first() {
        assert!(compose(&[]).is_err());
        let id = compose(&[Gate2::IDENTITY, Gate2::IDENTITY]).unwrap();
        assert!(close(&id, &Gate2::IDENTITY, TOL));
        let inv = compose(&[
            rotation(Axis::X, PI).unwrap(),
            rotation(Axis::X, -PI).unwrap(),
        ])
        .unwrap();
        assert!(close(&inv, &Gate2::IDENTITY, TOL));

        let (a, b, g) = (0.3, 1.1, -0.6);
        let cascade = compose(&[
            rotation(Axis::X, g).unwrap(),
            rotation(Axis::Y, b).unwrap(),
            rotation(Axis::Z, a).unwrap(),
        ])
        .unwrap();
        let euler = euler_compose(&EulerAngles::new(0.0, a, b, g, EulerOrder::Zyx)).unwrap();
        assert!(close(&cascade, &euler, TOL));
    }

    #[test]
    fn euler_compose_examples() {
        let zero = EulerAngles::new(0.0, 0.0, 0.0, 0.0, EulerOrder::Zyx);
        assert!(close(&euler_compose(&zero).unwrap(), &Gate2::IDENTITY, TOL));

        // e^{jπ/2}·Rx(-π) = j·[[0,-j],[-j,0]] = X
        let x = EulerAngles::new(PI / 2.0, 0.0, 0.0, -PI, EulerOrder::Zyx);
        assert!(close(&euler_compose(&x).unwrap(), &pauli(1).unwrap(), TOL));

        let t = 1.9;
        let z = EulerAngles::new(0.0, t, 0.0, 0.0, EulerOrder::Zyx);
        assert!(close(
            &euler_compose(&z).unwrap(),
            &rotation(Axis::Z, t).unwrap(),
            TOL
        ));
        let bad = EulerAngles::new(f64::INFINITY, 0.0, 0.0, 0.0, EulerOrder::Zyx);
        assert!(euler_compose(&bad).is_err());
    }

    #[test]
    fn determinant_is_global_phase_squared() {
        for order in [EulerOrder::Zyx, EulerOrder::Xyz] {
            let a = EulerAngles::new(0.7, 2.0, -1.0, 0.4, order);
            let d = euler_compose(&a).unwrap().det();
            assert!((d - Complex64::from_polar(1.0, 1.4)).norm() < TOL);
        }
    }

    #[test]
    fn decompose_examples() {
        let id = euler_decompose(&Gate2::IDENTITY, EulerOrder::Zyx).unwrap();
        assert_eq!(
            (id.delta, id.alpha, id.beta, id.gamma),
            (0.0, 0.0, 0.0, 0.0)
        );

        let x = euler_decompose(&pauli(1).unwrap(), EulerOrder::Zyx).unwrap();
        assert!(close(&euler_compose(&x).unwrap(), &pauli(1).unwrap(), 1e-10));
        assert!((x.delta - PI / 2.0).abs() < TOL);
        assert!(x.alpha.abs() < TOL && x.beta.abs() < TOL);
        assert!((x.gamma + PI).abs() < TOL);

        let y = euler_decompose(&rotation(Axis::Y, 0.7).unwrap(), EulerOrder::Zyx).unwrap();
        assert!(y.delta.abs() < TOL && y.alpha.abs() < TOL && y.gamma.abs() < TOL);
        assert!((y.beta - 0.7).abs() < TOL);
    }

    #[test]
    fn decompose_rejects_non_unitary() {
        let m = Gate2::IDENTITY.scale(c(1.0 + 1e-6, 0.0));
        assert!(matches!(
            euler_decompose(&m, EulerOrder::Zyx),
            Err(GateError::NotUnitary { .. })
        ));
    }

    #[test]
    fn gimbal_lock_fixes_gamma() {
        for beta in [PI / 2.0, -PI / 2.0] {
            let u = euler_compose(&EulerAngles::new(0.2, 1.0, beta, 0.5, EulerOrder::Zyx)).unwrap();
            let a = euler_decompose(&u, EulerOrder::Zyx).unwrap();
            assert_eq!(a.gamma, 0.0);
            assert!((a.beta - beta).abs() < 1e-9);
            assert!(close(&euler_compose(&a).unwrap(), &u, 1e-10));
        }
    }

    #[test]
    fn xyz_round_trip_and_ranges() {
        let u = euler_compose(&EulerAngles::new(-1.2, 5.0, 0.3, -3.5, EulerOrder::Xyz)).unwrap();
        let a = euler_decompose(&u, EulerOrder::Xyz).unwrap();
        assert!(close(&euler_compose(&a).unwrap(), &u, 1e-10));
        assert!((0.0..4.0 * PI).contains(&a.alpha));
        assert!(a.gamma > -2.0 * PI && a.gamma <= 2.0 * PI);
    }
}
