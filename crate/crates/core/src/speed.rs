//! Outer speed loop: a PI baseline and an extended-state-observer based
//! disturbance-compensation (DC) law. Both produce the q-axis current
//! reference and share the same output clamp.
//!
//! The observer models the speed dynamics as `ω̇ = iq*/k + dω` with
//! `k = 2Jn/(3·p·ψf)` and a lumped disturbance `dω` assumed constant over a
//! period. `z1` estimates the speed and `z2` estimates `dω`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::machine::MachineParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiGains {
    /// Proportional gain (A per rad/s).
    pub kp: f64,
    /// Integral gain (A per rad).
    pub ki: f64,
    /// Output clamp (A).
    pub limit: f64,
}

impl PiGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp.is_finite() && self.kp >= 0.0) {
            return Err(invalid("pi.kp_a_s_per_rad", format!("must be >= 0, got {}", self.kp)));
        }
        if !(self.ki.is_finite() && self.ki >= 0.0) {
            return Err(invalid("pi.ki_a_per_rad", format!("must be >= 0, got {}", self.ki)));
        }
        if !(self.limit.is_finite() && self.limit > 0.0) {
            return Err(invalid("speed.limit_a", format!("must be > 0, got {}", self.limit)));
        }
        Ok(())
    }
}

/// Integral of the speed error (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PiState {
    pub integral: f64,
}

/// PI speed controller with conditional integration: the integrator is
/// frozen while the output is saturated in the direction of the error.
pub fn pi_speed(omega_ref: f64, omega: f64, state: PiState, gains: &PiGains, dt: f64) -> (f64, PiState) {
    debug_assert!(dt > 0.0);
    let error = omega_ref - omega;
    let trial = state.integral + error * dt;
    let unclamped = gains.kp * error + gains.ki * trial;
    let winding_up = unclamped.abs() > gains.limit && unclamped.signum() == error.signum();
    let next = if winding_up { state } else { PiState { integral: trial } };
    let out = (gains.kp * error + gains.ki * next.integral).clamp(-gains.limit, gains.limit);
    (out, next)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EsoState {
    /// Speed estimate (rad/s).
    pub z1: f64,
    /// Lumped disturbance estimate (rad/s²).
    pub z2: f64,
}

impl EsoState {
    pub fn new(measured_speed: f64) -> Self {
        Self {
            z1: measured_speed,
            z2: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsoGains {
    /// Observer gain on the speed error (1/s).
    pub beta1: f64,
    /// Observer gain driving the disturbance estimate (1/s²).
    pub beta2: f64,
    /// Bandwidth of the proportional law (1/s).
    pub kp: f64,
    k_gain: f64,
}

impl EsoGains {
    /// Input gain derived from the machine, with the nominal inertia equal to
    /// the true one.
    pub fn new(beta1: f64, beta2: f64, kp: f64, machine: &MachineParams) -> Result<Self> {
        Self::with_nominal_inertia(beta1, beta2, kp, machine, machine.inertia)
    }

    pub fn with_nominal_inertia(
        beta1: f64,
        beta2: f64,
        kp: f64,
        machine: &MachineParams,
        nominal_inertia: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("dc.beta1_per_s", beta1),
            ("dc.beta2_per_s2", beta2),
            ("dc.kp_per_s", kp),
            ("dc.jn_kgm2", nominal_inertia),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self {
            beta1,
            beta2,
            kp,
            k_gain: 2.0 * nominal_inertia / (3.0 * machine.poles() * machine.psi_f),
        })
    }

    /// `2·Jn / (3·p·ψf)`: current per unit of speed-loop acceleration.
    pub fn k_gain(&self) -> f64 {
        self.k_gain
    }

    /// Continuous characteristic roots of the observer error dynamics,
    /// `s² + β1·s + β2`. Complex pairs are returned as `(re, ±im)`.
    pub fn characteristic_roots(&self) -> [(f64, f64); 2] {
        let half = -0.5 * self.beta1;
        let disc = 0.25 * self.beta1 * self.beta1 - self.beta2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            [(half + r, 0.0), (half - r, 0.0)]
        } else {
            let i = (-disc).sqrt();
            [(half, i), (half, -i)]
        }
    }

    /// Matrix of the forward-Euler observer error update over one step.
    pub fn error_update_matrix(&self, dt: f64) -> [[f64; 2]; 2] {
        [[1.0 - dt * self.beta1, dt], [-dt * self.beta2, 1.0]]
    }

    /// Spectral radius of [`Self::error_update_matrix`].
    pub fn discrete_spectral_radius(&self, dt: f64) -> f64 {
        let [[a, b], [c, d]] = self.error_update_matrix(dt);
        let tr = a + d;
        let det = a * d - b * c;
        let disc = 0.25 * tr * tr - det;
        if disc >= 0.0 {
            let r = disc.sqrt();
            (0.5 * tr + r).abs().max((0.5 * tr - r).abs())
        } else {
            // complex pair: |λ|² = det
            det.sqrt()
        }
    }
}

/// Forward-Euler observer update.
pub fn eso_update(state: EsoState, iq_ref: f64, omega_meas: f64, gains: &EsoGains, dt: f64) -> EsoState {
    debug_assert!(dt > 0.0);
    let e = state.z1 - omega_meas;
    EsoState {
        z1: state.z1 + dt * (iq_ref / gains.k_gain + state.z2 - gains.beta1 * e),
        z2: state.z2 + dt * (-gains.beta2 * e),
    }
}

/// Proportional law on the estimated speed plus disturbance cancellation:
/// `iq* = k·(kp·(ω* − z1) − z2)`, clamped to `±limit`.
pub fn dc_control(omega_ref: f64, state: &EsoState, gains: &EsoGains, limit: f64) -> f64 {
    let accel = gains.kp * (omega_ref - state.z1);
    (gains.k_gain * accel - gains.k_gain * state.z2).clamp(-limit, limit)
}

/// Stateful speed controller as used inside the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub enum SpeedController {
    Pi {
        gains: PiGains,
        state: PiState,
    },
    Dc {
        gains: EsoGains,
        limit: f64,
        observer: Option<EsoState>,
        last_output: f64,
    },
}

impl SpeedController {
    pub fn pi(gains: PiGains) -> Self {
        Self::Pi {
            gains,
            state: PiState::default(),
        }
    }

    pub fn dc(gains: EsoGains, limit: f64) -> Self {
        Self::Dc {
            gains,
            limit,
            observer: None,
            last_output: 0.0,
        }
    }

    /// Runs one period and returns the q-current reference. The observer is
    /// seeded with the first measurement, then corrected with the previous
    /// period's (clamped) output before the new output is computed.
    pub fn update(&mut self, omega_ref: f64, omega_meas: f64, dt: f64) -> f64 {
        match self {
            Self::Pi { gains, state } => {
                let (out, next) = pi_speed(omega_ref, omega_meas, *state, gains, dt);
                *state = next;
                out
            }
            Self::Dc {
                gains,
                limit,
                observer,
                last_output,
            } => {
                let z = match observer {
                    None => EsoState::new(omega_meas),
                    Some(z) => eso_update(*z, *last_output, omega_meas, gains, dt),
                };
                *observer = Some(z);
                *last_output = dc_control(omega_ref, &z, gains, *limit);
                *last_output
            }
        }
    }

    pub fn observer(&self) -> Option<EsoState> {
        match self {
            Self::Dc { observer, .. } => *observer,
            Self::Pi { .. } => None,
        }
    }
}
