//! Continuous-time PMSM plant in the rotor (dq) frame.
//!
//! State is `(id, iq, ωm, θe)`; the electrical speed is always derived as
//! `ωre = p·ωm` and never stored. Integration uses classical fixed-step RK4.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::transforms::Dq;

/// Electrical and mechanical constants of the machine and its DC link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    /// Stator resistance (Ω).
    pub rs: f64,
    /// d-axis inductance (H).
    pub ld: f64,
    /// q-axis inductance (H).
    pub lq: f64,
    /// Rotor flux linkage (Wb).
    pub psi_f: f64,
    pub pole_pairs: u32,
    /// Rotor inertia (kg·m²).
    pub inertia: f64,
    /// Viscous friction (N·m·s/rad).
    pub friction: f64,
    /// DC-link voltage (V).
    pub vdc: f64,
}

impl Default for MachineParams {
    /// Surface-mounted machine: 311 V, 1.3 Ω, 8.5 mH, 0.175 Wb, 4 pole pairs,
    /// 0.008 kg·m², no friction.
    fn default() -> Self {
        Self {
            rs: 1.3,
            ld: 0.0085,
            lq: 0.0085,
            psi_f: 0.175,
            pole_pairs: 4,
            inertia: 0.008,
            friction: 0.0,
            vdc: 311.0,
        }
    }
}

impl MachineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("machine.rs_ohm", self.rs),
            ("machine.ld_h", self.ld),
            ("machine.lq_h", self.lq),
            ("machine.psi_f_wb", self.psi_f),
            ("machine.j_kgm2", self.inertia),
            ("machine.vdc_v", self.vdc),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {value}")));
            }
        }
        if self.pole_pairs == 0 {
            return Err(invalid("machine.pole_pairs", "must be >= 1"));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(invalid(
                "machine.b_nms",
                format!("must be finite and >= 0, got {}", self.friction),
            ));
        }
        Ok(())
    }

    pub fn poles(&self) -> f64 {
        f64::from(self.pole_pairs)
    }

    /// 1.5·p·ψf, the torque per ampere of q current for a non-salient rotor.
    pub fn torque_constant(&self) -> f64 {
        1.5 * self.poles() * self.psi_f
    }
}

/// Plant state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MotorState {
    pub id: f64,
    pub iq: f64,
    /// Mechanical speed (rad/s).
    pub omega_m: f64,
    /// Electrical angle, kept in [0, 2π).
    pub theta_e: f64,
}

impl MotorState {
    pub fn currents(&self) -> Dq {
        Dq::new(self.id, self.iq)
    }

    pub fn omega_e(&self, params: &MachineParams) -> f64 {
        params.poles() * self.omega_m
    }

    pub fn is_finite(&self) -> bool {
        self.id.is_finite() && self.iq.is_finite() && self.omega_m.is_finite() && self.theta_e.is_finite()
    }
}

/// Terminal voltages and load torque applied over an integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantInput {
    pub ud: f64,
    pub uq: f64,
    /// Load torque (N·m), opposing positive rotation.
    pub load_torque: f64,
}

impl PlantInput {
    pub fn new(voltage: Dq, load_torque: f64) -> Self {
        Self {
            ud: voltage.d,
            uq: voltage.q,
            load_torque,
        }
    }
}

/// Time derivative of [`MotorState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorStateRate {
    pub did: f64,
    pub diq: f64,
    pub domega_m: f64,
    pub dtheta_e: f64,
}

pub fn electromagnetic_torque(state: &MotorState, params: &MachineParams) -> f64 {
    1.5 * params.poles() * (params.psi_f * state.iq + (params.ld - params.lq) * state.id * state.iq)
}

/// Voltage equations solved for di/dt plus the mechanical equation.
pub fn derivative(state: &MotorState, input: &PlantInput, params: &MachineParams) -> MotorStateRate {
    let omega_re = state.omega_e(params);
    let did = (input.ud - params.rs * state.id + omega_re * params.lq * state.iq) / params.ld;
    let diq = (input.uq - params.rs * state.iq - omega_re * params.ld * state.id - omega_re * params.psi_f) / params.lq;
    let torque = electromagnetic_torque(state, params);
    let domega_m = (torque - params.friction * state.omega_m - input.load_torque) / params.inertia;
    MotorStateRate {
        did,
        diq,
        domega_m,
        dtheta_e: omega_re,
    }
}

fn advance(state: &MotorState, rate: &MotorStateRate, h: f64) -> MotorState {
    MotorState {
        id: state.id + h * rate.did,
        iq: state.iq + h * rate.diq,
        omega_m: state.omega_m + h * rate.domega_m,
        theta_e: state.theta_e + h * rate.dtheta_e,
    }
}

/// One classical RK4 step of length `dt` with the input held constant.
pub fn step_plant(state: &MotorState, input: &PlantInput, params: &MachineParams, dt: f64) -> Result<MotorState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be finite and > 0, got {dt}")));
    }
    let k1 = derivative(state, input, params);
    let k2 = derivative(&advance(state, &k1, 0.5 * dt), input, params);
    let k3 = derivative(&advance(state, &k2, 0.5 * dt), input, params);
    let k4 = derivative(&advance(state, &k3, dt), input, params);
    let sixth = dt / 6.0;
    let mut next = MotorState {
        id: state.id + sixth * (k1.did + 2.0 * k2.did + 2.0 * k3.did + k4.did),
        iq: state.iq + sixth * (k1.diq + 2.0 * k2.diq + 2.0 * k3.diq + k4.diq),
        omega_m: state.omega_m + sixth * (k1.domega_m + 2.0 * k2.domega_m + 2.0 * k3.domega_m + k4.domega_m),
        theta_e: state.theta_e + sixth * (k1.dtheta_e + 2.0 * k2.dtheta_e + 2.0 * k3.dtheta_e + k4.dtheta_e),
    };
    next.theta_e = wrap_angle(next.theta_e);
    Ok(next)
}

/// Wraps an angle into [0, 2π).
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

pub fn rpm_to_rad_s(rpm: f64) -> f64 {
    rpm * PI / 30.0
}

pub fn rad_s_to_rpm(omega: f64) -> f64 {
    omega * 30.0 / PI
}
