//! Multi-step finite-control-set selection.
//!
//! Two searches live here:
//!
//! * [`conventional_nstep`] enumerates every vector sequence over the horizon
//!   and scores it by the summed stage cost. It is exact and serves as the
//!   reference, at a cost of `8 + 8² + … + 8ᴺ` evaluations per period.
//! * [`im_n_step`] keeps only the best and second-best first-step vectors,
//!   expands each surviving branch into its two best children at every
//!   intermediate level, and scores the eight final-step candidates of every
//!   leaf branch. The resulting cost matrix has `2ᴺ⁻¹` rows ordered by choice
//!   path (best child first). The applied vector is the best first-step
//!   vector if the global minimum of the matrix lies in the first half of the
//!   rows, otherwise the second-best one. For N = 2 that is 24 evaluations,
//!   for N = 3 it is 56.
//!
//! Matrix entries hold the final-step stage cost only. A limit violation
//! earlier on a branch is carried into all of that branch's entries with
//! weight `2^(N−s)` for step `s`, so an earlier violation always outweighs any
//! combination of later ones and an inadmissible first step is never rescued
//! by a good second step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverter::SwitchState;
use crate::mpcc::{argmin, limit_term, CurrentRef, EvalCounter, PredictionContext, MAX_HORIZON};
use crate::transforms::Dq;

/// How the entries of the IM cost matrix are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Final-step stage cost plus inherited limit penalties.
    #[default]
    FinalStep,
    /// Sum of every stage cost along the branch.
    Accumulated,
}

/// A scored first-step candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub vector: SwitchState,
    pub cost: f64,
    /// Predicted currents at the end of the candidate's period.
    pub predicted: Dq,
}

/// Best and second-best first-step candidates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePair {
    pub min1: Candidate,
    pub min2: Candidate,
}

/// Two lowest-cost entries, lowest index first on ties.
pub fn im_candidates(costs: &[f64; 8]) -> (SwitchState, SwitchState) {
    let (a, b) = two_lowest(costs);
    (SwitchState::ALL[a], SwitchState::ALL[b])
}

fn two_lowest(costs: &[f64; 8]) -> (usize, usize) {
    let first = argmin(costs);
    let mut second = usize::from(first == 0);
    for k in 0..costs.len() {
        if k != first && costs[k] < costs[second] {
            second = k;
        }
    }
    (first, second)
}

/// Final-level costs of every leaf branch of the IM search.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: Vec<[f64; 8]>,
    paths: Vec<Vec<SwitchState>>,
}

impl CostMatrix {
    pub fn rows(&self) -> &[[f64; 8]] {
        &self.rows
    }

    /// Vectors chosen on the way to each row, first step first.
    pub fn paths(&self) -> &[Vec<SwitchState>] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(row, column, value)` of the smallest entry. Row-major scan, so the
    /// earlier row and then the lower column win ties.
    pub fn global_min(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for (r, row) in self.rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v < best.2 {
                    best = (r, c, v);
                }
            }
        }
        best
    }

    pub fn min_in_first_half(&self) -> bool {
        self.global_min().0 < self.rows.len() / 2
    }
}

/// Decision of the branch-limited search.
#[derive(Debug, Clone, PartialEq)]
pub struct ImDecision {
    pub vector: SwitchState,
    pub pair: CandidatePair,
    pub matrix: CostMatrix,
    pub evals: EvalCounter,
}

impl ImDecision {
    /// False when the applied vector's own first step violates the limit.
    pub fn feasible(&self, penalty: f64) -> bool {
        let chosen = if self.vector == self.pair.min1.vector {
            self.pair.min1
        } else {
            self.pair.min2
        };
        chosen.cost < penalty
    }
}

struct Branch {
    path: Vec<SwitchState>,
    state: Dq,
    carried: f64,
}

pub fn im_two_step(state_k1: Dq, reference: &CurrentRef, ctx: &PredictionContext) -> ImDecision {
    im_search(state_k1, reference, 2, ctx, CostMode::FinalStep)
}

pub fn im_n_step(
    state_k1: Dq,
    reference: &CurrentRef,
    horizon: usize,
    ctx: &PredictionContext,
    mode: CostMode,
) -> Result<ImDecision> {
    if !(2..=MAX_HORIZON).contains(&horizon) {
        return Err(Error::UnsupportedHorizon {
            horizon,
            supported: "2..=3",
        });
    }
    Ok(im_search(state_k1, reference, horizon, ctx, mode))
}

fn im_search(
    state_k1: Dq,
    reference: &CurrentRef,
    horizon: usize,
    ctx: &PredictionContext,
    mode: CostMode,
) -> ImDecision {
    let mut evals = EvalCounter::default();
    let (preds, costs) = ctx.expand(state_k1, 0, reference, &mut evals);
    let (i1, i2) = two_lowest(&costs);
    let candidate = |k: usize| Candidate {
        vector: SwitchState::ALL[k],
        cost: costs[k],
        predicted: preds[k],
    };
    let pair = CandidatePair {
        min1: candidate(i1),
        min2: candidate(i2),
    };

    // `step` is zero-based, so the first step carries 2^(N-1)
    let carry = |step: usize, cost: f64, pred: Dq| match mode {
        CostMode::FinalStep => limit_term(pred, &ctx.cost) * f64::from(1u32 << (horizon - 1 - step)),
        CostMode::Accumulated => cost,
    };
    let mut branches: Vec<Branch> = [pair.min1, pair.min2]
        .into_iter()
        .map(|c| Branch {
            path: vec![c.vector],
            state: c.predicted,
            carried: carry(0, c.cost, c.predicted),
        })
        .collect();

    let mut rows = Vec::with_capacity(1 << (horizon - 1));
    let mut paths = Vec::with_capacity(1 << (horizon - 1));
    for step in 1..horizon {
        let last = step + 1 == horizon;
        let mut next = Vec::with_capacity(branches.len() * 2);
        for branch in &branches {
            let (preds, costs) = ctx.expand(branch.state, step, reference, &mut evals);
            if last {
                rows.push(costs.map(|c| c + branch.carried));
                paths.push(branch.path.clone());
            } else {
                let (c1, c2) = two_lowest(&costs);
                for k in [c1, c2] {
                    let mut path = branch.path.clone();
                    path.push(SwitchState::ALL[k]);
                    next.push(Branch {
                        path,
                        state: preds[k],
                        carried: branch.carried + carry(step, costs[k], preds[k]),
                    });
                }
            }
        }
        branches = next;
    }

    let matrix = CostMatrix { rows, paths };
    let vector = if matrix.min_in_first_half() {
        pair.min1.vector
    } else {
        pair.min2.vector
    };
    ImDecision {
        vector,
        pair,
        matrix,
        evals,
    }
}

/// Decision of the exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDecision {
    /// First vector of the best sequence.
    pub vector: SwitchState,
    pub sequence: Vec<SwitchState>,
    pub cost: f64,
    pub evals: EvalCounter,
}

pub fn conventional_nstep(
    state_k1: Dq,
    reference: &CurrentRef,
    horizon: usize,
    ctx: &PredictionContext,
) -> Result<SequenceDecision> {
    if !(1..=MAX_HORIZON).contains(&horizon) {
        return Err(Error::UnsupportedHorizon {
            horizon,
            supported: "1..=3",
        });
    }
    let mut search = Exhaustive {
        ctx,
        reference,
        horizon,
        evals: EvalCounter::default(),
        path: Vec::with_capacity(horizon),
        best: Vec::new(),
        best_cost: f64::INFINITY,
    };
    search.descend(state_k1, 0, 0.0);
    Ok(SequenceDecision {
        vector: search.best[0],
        sequence: search.best,
        cost: search.best_cost,
        evals: search.evals,
    })
}

struct Exhaustive<'a> {
    ctx: &'a PredictionContext,
    reference: &'a CurrentRef,
    horizon: usize,
    evals: EvalCounter,
    path: Vec<SwitchState>,
    best: Vec<SwitchState>,
    best_cost: f64,
}

impl Exhaustive<'_> {
    fn descend(&mut self, from: Dq, step: usize, acc: f64) {
        let (preds, costs) = self.ctx.expand(from, step, self.reference, &mut self.evals);
        for s in SwitchState::ALL {
            let total = acc + costs[s.slot()];
            self.path.push(s);
            if step + 1 == self.horizon {
                // strict comparison keeps the lexicographically first sequence
                if total < self.best_cost {
                    self.best_cost = total;
                    self.best.clone_from(&self.path);
                }
            } else {
                self.descend(preds[s.slot()], step + 1, total);
            }
            self.path.pop();
        }
    }
}
