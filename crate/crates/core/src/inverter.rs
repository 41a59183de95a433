//! Two-level three-phase inverter: the eight switch states and their voltages.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::transforms::{clarke, park, AlphaBeta, Dq};

/// One switch combination. The index encodes the leg states as bits with
/// phase a as the most significant bit: `index = 4·Sa + 2·Sb + Sc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SwitchState(u8);

impl SwitchState {
    pub const COUNT: usize = 8;

    pub const ALL: [SwitchState; 8] = [
        SwitchState(0),
        SwitchState(1),
        SwitchState(2),
        SwitchState(3),
        SwitchState(4),
        SwitchState(5),
        SwitchState(6),
        SwitchState(7),
    ];

    /// (0,0,0), all lower switches on.
    pub const ZERO_LOW: SwitchState = SwitchState(0);
    /// (1,1,1), all upper switches on.
    pub const ZERO_HIGH: SwitchState = SwitchState(7);

    pub fn from_index(index: u8) -> Option<Self> {
        (usize::from(index) < Self::COUNT).then_some(SwitchState(index))
    }

    pub fn from_legs(sa: bool, sb: bool, sc: bool) -> Self {
        SwitchState((u8::from(sa) << 2) | (u8::from(sb) << 1) | u8::from(sc))
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn slot(self) -> usize {
        usize::from(self.0)
    }

    /// Leg states `[Sa, Sb, Sc]`, each 0 or 1.
    pub fn legs(self) -> [u8; 3] {
        [(self.0 >> 2) & 1, (self.0 >> 1) & 1, self.0 & 1]
    }

    pub fn is_zero_vector(self) -> bool {
        self.0 == 0 || self.0 == 7
    }
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.legs();
        write!(f, "V{}({a}{b}{c})", self.0)
    }
}

/// The finite control set, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorSet {
    states: [SwitchState; 8],
}

impl Default for VectorSet {
    fn default() -> Self {
        Self::two_level()
    }
}

impl VectorSet {
    pub fn two_level() -> Self {
        Self {
            states: SwitchState::ALL,
        }
    }

    pub fn states(&self) -> &[SwitchState; 8] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = SwitchState> + '_ {
        self.states.iter().copied()
    }

    /// dq images of every state at one rotor angle, indexed by state index.
    pub fn dq_images(&self, vdc: f64, theta_e: f64) -> [Dq; 8] {
        let (s, c) = theta_e.sin_cos();
        let mut out = [Dq::ZERO; 8];
        for state in self.iter() {
            let ab = alpha_beta_voltage(state, vdc);
            out[state.slot()] = Dq::new(ab.alpha * c + ab.beta * s, -ab.alpha * s + ab.beta * c);
        }
        out
    }
}

/// Phase-to-neutral voltages of a star-connected load.
pub fn phase_voltages(state: SwitchState, vdc: f64) -> [f64; 3] {
    let [a, b, c] = state.legs().map(f64::from);
    [
        vdc * (2.0 * a - b - c) / 3.0,
        vdc * (2.0 * b - c - a) / 3.0,
        vdc * (2.0 * c - a - b) / 3.0,
    ]
}

pub fn alpha_beta_voltage(state: SwitchState, vdc: f64) -> AlphaBeta {
    clarke(phase_voltages(state, vdc))
}

/// Rotor-frame voltage produced by `state` when the rotor sits at `theta_e`.
pub fn dq_voltage(state: SwitchState, vdc: f64, theta_e: f64) -> Dq {
    park(alpha_beta_voltage(state, vdc), theta_e)
}
