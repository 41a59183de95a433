//! Amplitude-invariant Clarke and Park transforms.
//!
//! The αβ frame is aligned with phase a; the dq frame rotates by the electrical
//! angle θe, so `park(v, θ)` rotates the αβ vector by −θ.

use serde::{Deserialize, Serialize};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// A pair of rotor-frame quantities (currents in A or voltages in V).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Dq {
    pub d: f64,
    pub q: f64,
}

impl Dq {
    pub const ZERO: Dq = Dq { d: 0.0, q: 0.0 };

    pub const fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }

    pub fn magnitude(self) -> f64 {
        self.d.hypot(self.q)
    }

    pub fn is_finite(self) -> bool {
        self.d.is_finite() && self.q.is_finite()
    }
}

/// Stationary-frame quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlphaBeta {
    pub alpha: f64,
    pub beta: f64,
}

impl AlphaBeta {
    pub fn magnitude(self) -> f64 {
        self.alpha.hypot(self.beta)
    }

    pub fn angle(self) -> f64 {
        self.beta.atan2(self.alpha)
    }
}

/// abc → αβ, 2/3-scaled so that αβ magnitudes equal phase amplitudes.
pub fn clarke(abc: [f64; 3]) -> AlphaBeta {
    let [a, b, c] = abc;
    AlphaBeta {
        alpha: (2.0 * a - b - c) / 3.0,
        beta: (b - c) / SQRT3,
    }
}

/// αβ → abc (zero-sequence free).
pub fn inverse_clarke(v: AlphaBeta) -> [f64; 3] {
    let half_alpha = -0.5 * v.alpha;
    let beta_part = 0.5 * SQRT3 * v.beta;
    [v.alpha, half_alpha + beta_part, half_alpha - beta_part]
}

pub fn park(v: AlphaBeta, theta_e: f64) -> Dq {
    let (s, c) = theta_e.sin_cos();
    Dq {
        d: v.alpha * c + v.beta * s,
        q: -v.alpha * s + v.beta * c,
    }
}

pub fn inverse_park(v: Dq, theta_e: f64) -> AlphaBeta {
    let (s, c) = theta_e.sin_cos();
    AlphaBeta {
        alpha: v.d * c - v.q * s,
        beta: v.d * s + v.q * c,
    }
}

pub fn abc_to_dq(abc: [f64; 3], theta_e: f64) -> Dq {
    park(clarke(abc), theta_e)
}

pub fn dq_to_abc(v: Dq, theta_e: f64) -> [f64; 3] {
    inverse_clarke(inverse_park(v, theta_e))
}
