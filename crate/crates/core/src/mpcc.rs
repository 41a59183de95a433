//! Discrete current prediction, delay compensation, the stage cost with its
//! current-limit term, and single-step finite-control-set selection.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::inverter::{SwitchState, VectorSet};
use crate::machine::MachineParams;
use crate::transforms::Dq;

/// Longest horizon any controller in this crate evaluates.
pub const MAX_HORIZON: usize = 3;

/// Forward-Euler discretization of the dq current equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    /// Ts / Ld.
    g: f64,
    /// Ts / Lq.
    h: f64,
    ts: f64,
    machine: MachineParams,
}

impl DiscreteModel {
    pub fn new(machine: MachineParams, ts: f64) -> Result<Self> {
        machine.validate()?;
        if !(ts.is_finite() && ts > 0.0) {
            return Err(invalid("ts", format!("must be finite and > 0, got {ts}")));
        }
        Ok(Self {
            g: ts / machine.ld,
            h: ts / machine.lq,
            ts,
            machine,
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn machine(&self) -> &MachineParams {
        &self.machine
    }
}

/// Current reference in the rotor frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CurrentRef {
    pub id: f64,
    pub iq: f64,
}

impl CurrentRef {
    pub fn new(id: f64, iq: f64) -> Self {
        Self { id, iq }
    }

    /// Builds a reference whose magnitude does not exceed `i_max`. The d
    /// component keeps priority; q is cut back to the remaining headroom.
    pub fn limited(id: f64, iq: f64, i_max: f64) -> Self {
        let id = id.clamp(-i_max, i_max);
        let headroom = (i_max * i_max - id * id).max(0.0).sqrt();
        Self {
            id,
            iq: iq.clamp(-headroom, headroom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Maximum instantaneous current per axis (A).
    pub i_max: f64,
    /// Finite stand-in for an infinite limit cost.
    pub penalty: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            i_max: 10.0,
            penalty: 1e9,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_max.is_finite() && self.i_max > 0.0) {
            return Err(invalid("mpcc.i_max_a", format!("must be > 0, got {}", self.i_max)));
        }
        // the worst feasible error is |Δid| + |Δiq| <= 4·i_max
        if !(self.penalty.is_finite() && self.penalty > 4.0 * self.i_max) {
            return Err(invalid(
                "mpcc.penalty",
                format!(
                    "must dominate feasible costs (> {}), got {}",
                    4.0 * self.i_max,
                    self.penalty
                ),
            ));
        }
        Ok(())
    }
}

/// One forward-Euler step of the current model under voltage `u`.
pub fn predict_step(i: Dq, omega_re: f64, u: Dq, model: &DiscreteModel) -> Dq {
    let m = &model.machine;
    let (g, h) = (model.g, model.h);
    Dq {
        d: (1.0 - m.rs * g) * i.d + m.lq * g * omega_re * i.q + g * u.d,
        q: -m.ld * h * omega_re * i.d + (1.0 - m.rs * h) * i.q + h * u.q - m.psi_f * h * omega_re,
    }
}

/// Advances the measured currents through the period in which the already
/// latched vector acts, giving the state the next decision starts from.
pub fn delay_compensate(measured: Dq, omega_re: f64, applied: Dq, model: &DiscreteModel) -> Dq {
    predict_step(measured, omega_re, applied, model)
}

/// True when either axis exceeds the per-axis limit in magnitude.
pub fn exceeds_limit(i: Dq, cost: &CostConfig) -> bool {
    i.d.abs() > cost.i_max || i.q.abs() > cost.i_max
}

pub fn limit_term(i: Dq, cost: &CostConfig) -> f64 {
    if exceeds_limit(i, cost) {
        cost.penalty
    } else {
        0.0
    }
}

/// Absolute tracking error on both axes plus the limit term.
pub fn stage_cost(pred: Dq, reference: &CurrentRef, cost: &CostConfig) -> f64 {
    (reference.id - pred.d).abs() + (reference.iq - pred.q).abs() + limit_term(pred, cost)
}

/// Number of prediction-model and cost-function evaluations in one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalCounter {
    pub model_evals: u32,
    pub cost_evals: u32,
}

impl EvalCounter {
    pub(crate) fn count(&mut self) {
        self.model_evals += 1;
        self.cost_evals += 1;
    }
}

/// Everything a controller needs to score candidates within one period:
/// the model, the cost settings, the (frozen) electrical speed and the dq
/// image of every switch state for each step of the horizon.
#[derive(Debug, Clone, Copy)]
pub struct PredictionContext {
    pub model: DiscreteModel,
    pub cost: CostConfig,
    pub omega_re: f64,
    voltages: [[Dq; 8]; MAX_HORIZON],
}

impl PredictionContext {
    /// `theta_start` is the rotor angle when the first candidate period
    /// begins; step `n` projects the vectors at that period's mid angle.
    pub fn new(model: DiscreteModel, cost: CostConfig, omega_re: f64, theta_start: f64) -> Self {
        let vs = VectorSet::two_level();
        let vdc = model.machine.vdc;
        let mut voltages = [[Dq::ZERO; 8]; MAX_HORIZON];
        for (n, images) in voltages.iter_mut().enumerate() {
            let theta = theta_start + (n as f64 + 0.5) * omega_re * model.ts;
            *images = vs.dq_images(vdc, theta);
        }
        Self {
            model,
            cost,
            omega_re,
            voltages,
        }
    }

    /// Uses the same candidate voltages at every step.
    pub fn with_voltages(model: DiscreteModel, cost: CostConfig, omega_re: f64, images: [Dq; 8]) -> Self {
        Self {
            model,
            cost,
            omega_re,
            voltages: [images; MAX_HORIZON],
        }
    }

    pub fn voltage(&self, step: usize, state: SwitchState) -> Dq {
        self.voltages[step][state.slot()]
    }

    pub fn predict(&self, from: Dq, step: usize, state: SwitchState) -> Dq {
        predict_step(from, self.omega_re, self.voltage(step, state), &self.model)
    }

    /// Predicts and scores all eight candidates from `from` at `step`.
    pub(crate) fn expand(
        &self,
        from: Dq,
        step: usize,
        reference: &CurrentRef,
        evals: &mut EvalCounter,
    ) -> ([Dq; 8], [f64; 8]) {
        let mut preds = [Dq::ZERO; 8];
        let mut costs = [0.0; 8];
        for s in SwitchState::ALL {
            let p = self.predict(from, step, s);
            preds[s.slot()] = p;
            costs[s.slot()] = stage_cost(p, reference, &self.cost);
            evals.count();
        }
        (preds, costs)
    }
}

/// Result of a single-period decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub vector: SwitchState,
    pub cost: f64,
    pub evals: EvalCounter,
    /// False when every candidate violated the current limit; the vector is
    /// then the least-bad argmin.
    pub feasible: bool,
}

/// Index of the smallest entry; the lowest index wins ties.
pub(crate) fn argmin(costs: &[f64]) -> usize {
    let mut best = 0;
    for (k, &c) in costs.iter().enumerate().skip(1) {
        if c < costs[best] {
            best = k;
        }
    }
    best
}

pub fn single_step_select(state_k1: Dq, reference: &CurrentRef, ctx: &PredictionContext) -> Selection {
    let mut evals = EvalCounter::default();
    let (_, costs) = ctx.expand(state_k1, 0, reference, &mut evals);
    let best = argmin(&costs);
    Selection {
        vector: SwitchState::ALL[best],
        cost: costs[best],
        evals,
        feasible: costs[best] < ctx.cost.penalty,
    }
}
