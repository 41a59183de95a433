//! Independent reference implementations used by the integration tests.
//! Nothing here calls the library's prediction or search code.

#![allow(dead_code)]

use std::f64::consts::PI;

pub const TS: f64 = 50e-6;

#[derive(Clone, Copy, Debug)]
pub struct Motor {
    pub rs: f64,
    pub ld: f64,
    pub lq: f64,
    pub psi: f64,
    pub p: f64,
    pub vdc: f64,
}

pub const MOTOR: Motor = Motor {
    rs: 1.3,
    ld: 0.0085,
    lq: 0.0085,
    psi: 0.175,
    p: 4.0,
    vdc: 311.0,
};

/// dq voltage of switch vector `index` (bits a, b, c from MSB) at angle `theta`.
pub fn vector_dq(m: &Motor, index: usize, theta: f64) -> (f64, f64) {
    let sa = ((index >> 2) & 1) as f64;
    let sb = ((index >> 1) & 1) as f64;
    let sc = (index & 1) as f64;
    let ua = m.vdc * (2.0 * sa - sb - sc) / 3.0;
    let ub = m.vdc * (2.0 * sb - sa - sc) / 3.0;
    let uc = m.vdc * (2.0 * sc - sa - sb) / 3.0;
    let alpha = (2.0 / 3.0) * (ua - 0.5 * ub - 0.5 * uc);
    let beta = (2.0 / 3.0) * (3f64.sqrt() / 2.0) * (ub - uc);
    (
        alpha * theta.cos() + beta * theta.sin(),
        -alpha * theta.sin() + beta * theta.cos(),
    )
}

/// Forward-Euler current step.
pub fn euler(m: &Motor, ts: f64, id: f64, iq: f64, w: f64, ud: f64, uq: f64) -> (f64, f64) {
    let g = ts / m.ld;
    let h = ts / m.lq;
    (
        (1.0 - m.rs * g) * id + m.lq * g * w * iq + g * ud,
        -m.ld * h * w * id + (1.0 - m.rs * h) * iq + h * uq - m.psi * h * w,
    )
}

pub fn cost(pred: (f64, f64), refd: f64, refq: f64, i_max: f64) -> f64 {
    let lim = if pred.0.abs() > i_max || pred.1.abs() > i_max {
        1e9
    } else {
        0.0
    };
    (refd - pred.0).abs() + (refq - pred.1).abs() + lim
}

pub fn violates(pred: (f64, f64), i_max: f64) -> bool {
    pred.0.abs() > i_max || pred.1.abs() > i_max
}

/// A delay-compensated operating point and reference.
#[derive(Clone, Copy, Debug)]
pub struct Case {
    pub id: f64,
    pub iq: f64,
    pub w: f64,
    pub theta: f64,
    pub refd: f64,
    pub refq: f64,
}

/// Voltage of vector `v` during prediction step `n` (0-based) starting at
/// the case angle, evaluated at the middle of the period.
pub fn step_voltage(m: &Motor, c: &Case, n: usize, v: usize) -> (f64, f64) {
    vector_dq(m, v, c.theta + (n as f64 + 0.5) * c.w * TS)
}

pub fn first_step(m: &Motor, c: &Case, v: usize) -> (f64, f64) {
    let (ud, uq) = step_voltage(m, c, 0, v);
    euler(m, TS, c.id, c.iq, c.w, ud, uq)
}

pub fn single_step_oracle(m: &Motor, c: &Case, i_max: f64) -> usize {
    let mut best = (f64::INFINITY, 0);
    for v in 0..8 {
        let g = cost(first_step(m, c, v), c.refd, c.refq, i_max);
        if g < best.0 {
            best = (g, v);
        }
    }
    best.1
}

/// Brute force over all two-step sequences whose first vector is one of the
/// two cheapest first-step vectors. The sequence cost is the final-step
/// cost, with a first-step limit violation weighted twice the penalty so it
/// outranks any final-step violation. Ties go to the cheaper first vector,
/// then the lower second index.
pub fn restricted_two_step_oracle(m: &Motor, c: &Case, i_max: f64) -> usize {
    let mut first: Vec<(f64, usize)> = (0..8)
        .map(|v| (cost(first_step(m, c, v), c.refd, c.refq, i_max), v))
        .collect();
    // stable sort keeps the lower index first among equal costs
    first.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let candidates = [first[0].1, first[1].1];
    let mut best = (f64::INFINITY, candidates[0]);
    for &v1 in &candidates {
        let p1 = first_step(m, c, v1);
        let carried = if violates(p1, i_max) { 2e9 } else { 0.0 };
        for v2 in 0..8 {
            let (ud, uq) = step_voltage(m, c, 1, v2);
            let p2 = euler(m, TS, p1.0, p1.1, c.w, ud, uq);
            let g = cost(p2, c.refd, c.refq, i_max) + carried;
            if g < best.0 {
                best = (g, v1);
            }
        }
    }
    best.1
}

/// Exhaustive N-step search with costs summed over the horizon.
pub fn exhaustive_oracle(m: &Motor, c: &Case, horizon: usize, i_max: f64) -> (usize, f64) {
    fn rec(m: &Motor, c: &Case, n: usize, horizon: usize, i: (f64, f64), i_max: f64) -> f64 {
        if n == horizon {
            return 0.0;
        }
        (0..8)
            .map(|v| {
                let (ud, uq) = step_voltage(m, c, n, v);
                let p = euler(m, TS, i.0, i.1, c.w, ud, uq);
                cost(p, c.refd, c.refq, i_max) + rec(m, c, n + 1, horizon, p, i_max)
            })
            .fold(f64::INFINITY, f64::min)
    }
    let mut best = (0, f64::INFINITY);
    for v in 0..8 {
        let p = first_step(m, c, v);
        let g = cost(p, c.refd, c.refq, i_max) + rec(m, c, 1, horizon, p, i_max);
        if g < best.1 {
            best = (v, g);
        }
    }
    best
}

/// Deterministic pseudo-random cases (SplitMix64), independent of the
/// library's generator.
pub struct Cases {
    state: u64,
}

impl Cases {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn case(&mut self) -> Case {
        Case {
            id: self.uniform(-6.0, 6.0),
            iq: self.uniform(-6.0, 6.0),
            w: self.uniform(-600.0, 600.0),
            theta: self.uniform(0.0, 2.0 * PI),
            refd: self.uniform(-5.0, 5.0),
            refq: self.uniform(-8.0, 8.0),
        }
    }
}
