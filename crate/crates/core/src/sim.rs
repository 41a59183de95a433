//! Deterministic closed-loop simulation.
//!
//! Each control period `k`:
//!
//! 1. sample the plant (optionally with seeded uniform current noise);
//! 2. run the speed loop to get `iq*`;
//! 3. with a one-step actuation delay, advance the sample through the period
//!    in which the latched vector acts;
//! 4. let the current controller pick the next vector;
//! 5. apply the latched vector (one-step delay) or the new one (no delay);
//! 6. integrate the plant over the period in `substeps` RK4 steps, the
//!    inverter holding its switch state;
//! 7. record a trace row.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::inverter::{dq_voltage, SwitchState};
use crate::machine::{
    electromagnetic_torque, rad_s_to_rpm, rpm_to_rad_s, step_plant, MachineParams, MotorState, PlantInput,
};
use crate::mpcc::{
    delay_compensate, single_step_select, CostConfig, CurrentRef, DiscreteModel, EvalCounter, PredictionContext,
};
use crate::multistep::{conventional_nstep, im_n_step, CostMode};
use crate::speed::{EsoGains, PiGains, SpeedController};
use crate::transforms::{dq_to_abc, Dq};

/// Speed-loop plus current-controller combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    /// PI speed loop, single-step current control.
    #[serde(rename = "PI+MPCC")]
    PiMpcc,
    /// PI speed loop, exhaustive N-step current control.
    #[serde(rename = "PI+ConvN")]
    PiConvN,
    /// PI speed loop, branch-limited N-step current control.
    #[serde(rename = "PI+IMMPCC")]
    PiImMpcc,
    /// Observer-based disturbance compensation, branch-limited N-step.
    #[serde(rename = "DC+IMMPCC")]
    DcImMpcc,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] = [Self::PiMpcc, Self::PiConvN, Self::PiImMpcc, Self::DcImMpcc];

    pub fn label(self) -> &'static str {
        match self {
            Self::PiMpcc => "PI+MPCC",
            Self::PiConvN => "PI+ConvN",
            Self::PiImMpcc => "PI+IMMPCC",
            Self::DcImMpcc => "DC+IMMPCC",
        }
    }

    /// File-name friendly form of the label.
    pub fn slug(self) -> &'static str {
        match self {
            Self::PiMpcc => "pi-mpcc",
            Self::PiConvN => "pi-convn",
            Self::PiImMpcc => "pi-immpcc",
            Self::DcImMpcc => "dc-immpcc",
        }
    }

    pub fn uses_observer(self) -> bool {
        self == Self::DcImMpcc
    }

    /// Contractual evaluations per period for a given horizon.
    pub fn evals_per_period(self, horizon: usize) -> u32 {
        match self {
            Self::PiMpcc => 8,
            Self::PiConvN => (1..=horizon as u32).map(|n| 8u32.pow(n)).sum(),
            Self::PiImMpcc | Self::DcImMpcc => (0..horizon as u32).map(|n| 8 << n).sum(),
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let wanted = s.trim();
        Self::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(wanted) || k.slug().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| {
                format!("unknown controller `{wanted}` (expected PI+MPCC, PI+ConvN, PI+IMMPCC or DC+IMMPCC)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// The chosen vector acts in the same period.
    None,
    /// The chosen vector acts one period later; the controller compensates.
    #[default]
    OneStep,
}

impl FromStr for DelayModel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "none" => Ok(Self::None),
            "one_step" => Ok(Self::OneStep),
            other => Err(format!("unknown delay model `{other}` (expected none or one_step)")),
        }
    }
}

/// Piecewise-constant signal given as `(time, value)` breakpoints. The value
/// before the first breakpoint is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    points: Vec<(f64, f64)>,
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("profile", "needs at least one breakpoint"));
        }
        for &(t, v) in &points {
            if !(t.is_finite() && v.is_finite() && t >= 0.0) {
                return Err(invalid("profile", format!("bad breakpoint ({t}, {v})")));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(invalid("profile", "breakpoint times must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn value_at(&self, t: f64) -> f64 {
        // breakpoints are compared with a tolerance well below any period so
        // that k·Ts lands on the intended side of a step
        let t = t + 1e-9;
        self.points
            .iter()
            .take_while(|(time, _)| *time <= t)
            .last()
            .map_or(0.0, |&(_, v)| v)
    }

    fn last_time(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }
}

/// Disturbance-compensation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcConfig {
    /// Proportional law bandwidth (1/s).
    pub kp: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Inertia assumed by the controller; `None` uses the machine's.
    pub nominal_inertia: Option<f64>,
}

impl Default for DcConfig {
    fn default() -> Self {
        Self {
            kp: 30.0,
            beta1: 1200.0,
            beta2: 4000.0,
            nominal_inertia: None,
        }
    }
}

impl DcConfig {
    pub fn gains(&self, machine: &MachineParams) -> Result<EsoGains> {
        EsoGains::with_nominal_inertia(
            self.beta1,
            self.beta2,
            self.kp,
            machine,
            self.nominal_inertia.unwrap_or(machine.inertia),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Simulated time (s).
    pub duration: f64,
    /// Control period (s).
    pub ts: f64,
    /// Plant integration steps per control period.
    pub substeps: u32,
    pub machine: MachineParams,
    pub controller: ControllerKind,
    /// Prediction horizon for the multi-step controllers.
    pub horizon: usize,
    pub cost_mode: CostMode,
    pub cost: CostConfig,
    /// PI gains; `pi.limit` is the speed-loop output clamp for both laws.
    pub pi: PiGains,
    pub dc: DcConfig,
    pub speed_ref_rpm: Profile,
    pub load_nm: Profile,
    /// d-axis current reference (A).
    pub id_ref: f64,
    pub delay_model: DelayModel,
    pub initial_speed_rpm: f64,
    /// Half-width of the uniform measurement noise on id and iq (A).
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            duration: 0.2,
            ts: 50e-6,
            substeps: 10,
            machine: MachineParams::default(),
            controller: ControllerKind::PiImMpcc,
            horizon: 2,
            cost_mode: CostMode::FinalStep,
            cost: CostConfig::default(),
            // critically damped double pole near 100 rad/s for the default machine
            pi: PiGains {
                kp: 1.524,
                ki: 76.19,
                limit: 10.0,
            },
            dc: DcConfig::default(),
            speed_ref_rpm: Profile::constant(1000.0),
            load_nm: Profile::constant(0.0),
            id_ref: 0.0,
            delay_model: DelayModel::OneStep,
            initial_speed_rpm: 0.0,
            noise_amplitude: 0.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid("duration_s", format!("must be > 0, got {}", self.duration)));
        }
        if !(self.ts.is_finite() && self.ts > 0.0 && self.ts <= self.duration) {
            return Err(invalid("ts_us", format!("must be in (0, duration], got {} s", self.ts)));
        }
        if self.substeps == 0 {
            return Err(invalid("substeps", "must be >= 1"));
        }
        self.machine.validate()?;
        self.cost.validate()?;
        self.pi.validate()?;
        self.dc.gains(&self.machine)?;
        let supported = match self.controller {
            ControllerKind::PiMpcc => 1..=3,
            ControllerKind::PiConvN => 1..=3,
            ControllerKind::PiImMpcc | ControllerKind::DcImMpcc => 2..=3,
        };
        if !supported.contains(&self.horizon) {
            return Err(Error::UnsupportedHorizon {
                horizon: self.horizon,
                supported: if self.controller == ControllerKind::PiConvN {
                    "1..=3"
                } else {
                    "2..=3"
                },
            });
        }
        for (name, p) in [
            ("profile.speed_rpm", &self.speed_ref_rpm),
            ("profile.load_nm", &self.load_nm),
        ] {
            Profile::new(p.points.clone())?;
            if p.last_time() > self.duration {
                return Err(invalid(name, "breakpoints must lie within [0, duration]"));
            }
        }
        if !self.id_ref.is_finite() {
            return Err(invalid("id_ref_a", "must be finite"));
        }
        if !self.initial_speed_rpm.is_finite() {
            return Err(invalid("initial_speed_rpm", "must be finite"));
        }
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
            return Err(invalid("noise_a", "must be >= 0"));
        }
        Ok(())
    }

    pub fn periods(&self) -> usize {
        (self.duration / self.ts).round() as usize
    }

    /// Evaluations every period must report.
    pub fn evals_per_period(&self) -> u32 {
        self.controller.evals_per_period(self.horizon)
    }

    /// Short hex digest of the canonical JSON form of the config.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Scenario identity written at the top of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub controller: ControllerKind,
    pub horizon: usize,
    pub ts: f64,
    pub pole_pairs: u32,
    pub seed: u64,
    pub config_hash: String,
}

/// One control period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub id: f64,
    pub iq: f64,
    pub ia: f64,
    pub ib: f64,
    pub ic: f64,
    pub theta_e: f64,
    pub omega_rpm: f64,
    pub omega_ref_rpm: f64,
    pub te: f64,
    pub tl: f64,
    pub id_ref: f64,
    pub iq_ref: f64,
    /// Vector acting during this period.
    pub applied: u8,
    /// Vector chosen this period.
    pub chosen: u8,
    pub model_evals: u32,
    pub cost_evals: u32,
    pub feasible: bool,
    pub z1: Option<f64>,
    pub z2: Option<f64>,
}

pub const TRACE_COLUMNS: [&str; 20] = [
    "t_s",
    "id_a",
    "iq_a",
    "ia_a",
    "ib_a",
    "ic_a",
    "theta_e_rad",
    "omega_rpm",
    "omega_ref_rpm",
    "te_nm",
    "tl_nm",
    "id_ref_a",
    "iq_ref_a",
    "applied",
    "chosen",
    "model_evals",
    "cost_evals",
    "feasible",
    "z1_rad_s",
    "z2_rad_s2",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    /// Index range of rows with `t0 <= t < t1`.
    pub fn window(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let eps = 1e-9 * self.meta.ts;
        let start = self.rows.partition_point(|r| r.t < t0 - eps);
        let end = self.rows.partition_point(|r| r.t < t1 - eps);
        start..end.max(start)
    }

    pub fn end_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t + self.meta.ts)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let m = &self.meta;
        writeln!(out, "# fcs-mpcc trace")?;
        writeln!(out, "# scenario={}", m.scenario)?;
        writeln!(out, "# controller={}", m.controller)?;
        writeln!(out, "# horizon={}", m.horizon)?;
        writeln!(out, "# ts_s={}", fmt_sig9(m.ts))?;
        writeln!(out, "# pole_pairs={}", m.pole_pairs)?;
        writeln!(out, "# seed={}", m.seed)?;
        writeln!(out, "# config_hash={}", m.config_hash)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_COLUMNS)?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(fmt_sig9).unwrap_or_default();
            w.write_record([
                fmt_sig9(r.t),
                fmt_sig9(r.id),
                fmt_sig9(r.iq),
                fmt_sig9(r.ia),
                fmt_sig9(r.ib),
                fmt_sig9(r.ic),
                fmt_sig9(r.theta_e),
                fmt_sig9(r.omega_rpm),
                fmt_sig9(r.omega_ref_rpm),
                fmt_sig9(r.te),
                fmt_sig9(r.tl),
                fmt_sig9(r.id_ref),
                fmt_sig9(r.iq_ref),
                r.applied.to_string(),
                r.chosen.to_string(),
                r.model_evals.to_string(),
                r.cost_evals.to_string(),
                u8::from(r.feasible).to_string(),
                opt(r.z1),
                opt(r.z2),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut meta = std::collections::HashMap::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| Error::Trace(format!("missing `# {k}=` header")))
        };
        let parse_num = |k: &str| -> Result<f64> {
            get(k)?
                .parse::<f64>()
                .map_err(|e| Error::Trace(format!("header {k}: {e}")))
        };
        let meta = TraceMeta {
            scenario: get("scenario")?,
            controller: get("controller")?.parse().map_err(Error::Trace)?,
            horizon: parse_num("horizon")? as usize,
            ts: parse_num("ts_s")?,
            pole_pairs: parse_num("pole_pairs")? as u32,
            seed: get("seed")?
                .parse()
                .map_err(|e| Error::Trace(format!("header seed: {e}")))?,
            config_hash: get("config_hash")?,
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().ne(TRACE_COLUMNS.iter().copied()) {
            return Err(Error::Trace("unexpected column layout".into()));
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let field = |k: usize| -> Result<f64> {
                record[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Trace(format!("row {line}, column {}: {e}", TRACE_COLUMNS[k])))
            };
            let opt = |k: usize| -> Result<Option<f64>> {
                if record[k].is_empty() {
                    Ok(None)
                } else {
                    field(k).map(Some)
                }
            };
            rows.push(TraceRow {
                t: field(0)?,
                id: field(1)?,
                iq: field(2)?,
                ia: field(3)?,
                ib: field(4)?,
                ic: field(5)?,
                theta_e: field(6)?,
                omega_rpm: field(7)?,
                omega_ref_rpm: field(8)?,
                te: field(9)?,
                tl: field(10)?,
                id_ref: field(11)?,
                iq_ref: field(12)?,
                applied: field(13)? as u8,
                chosen: field(14)? as u8,
                model_evals: field(15)? as u32,
                cost_evals: field(16)? as u32,
                feasible: field(17)? != 0.0,
                z1: opt(18)?,
                z2: opt(19)?,
            });
        }
        Ok(Trace { meta, rows })
    }
}

/// Formats with nine significant digits, `%.9g` style.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let sci = format!("{v:.8e}");
    // rounding may bump the exponent (9.999999999 -> 1.00000000e1)
    let (mantissa, e) = sci.split_once('e').expect("exponent present");
    let e: i32 = e.parse().expect("integer exponent");
    let exp = if e != exp { e } else { exp };
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{v:.decimals$}");
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), e)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Phase currents from the rotor-frame currents at the rotor angle.
pub fn phase_currents(state: &MotorState) -> [f64; 3] {
    dq_to_abc(state.currents(), state.theta_e)
}

struct Decision {
    vector: SwitchState,
    evals: EvalCounter,
    feasible: bool,
}

fn decide(cfg: &ScenarioConfig, start: Dq, reference: &CurrentRef, ctx: &PredictionContext) -> Result<Decision> {
    Ok(match cfg.controller {
        ControllerKind::PiMpcc => {
            let s = single_step_select(start, reference, ctx);
            Decision {
                vector: s.vector,
                evals: s.evals,
                feasible: s.feasible,
            }
        }
        ControllerKind::PiConvN => {
            let s = conventional_nstep(start, reference, cfg.horizon, ctx)?;
            Decision {
                vector: s.vector,
                evals: s.evals,
                feasible: s.cost < ctx.cost.penalty,
            }
        }
        ControllerKind::PiImMpcc | ControllerKind::DcImMpcc => {
            let s = im_n_step(start, reference, cfg.horizon, ctx, cfg.cost_mode)?;
            Decision {
                vector: s.vector,
                evals: s.evals,
                feasible: s.feasible(ctx.cost.penalty),
            }
        }
    })
}

/// Runs one scenario to completion. Identical configs give identical traces.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace> {
    cfg.validate()?;
    let machine = cfg.machine;
    let model = DiscreteModel::new(machine, cfg.ts)?;
    let mut speed = match cfg.controller {
        ControllerKind::DcImMpcc => SpeedController::dc(cfg.dc.gains(&machine)?, cfg.pi.limit),
        _ => SpeedController::pi(cfg.pi),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dt = cfg.ts / f64::from(cfg.substeps);
    let n = cfg.periods();

    let mut state = MotorState {
        omega_m: rpm_to_rad_s(cfg.initial_speed_rpm),
        ..MotorState::default()
    };
    let mut latched = SwitchState::ZERO_LOW;
    let mut rows = Vec::with_capacity(n);

    for k in 0..n {
        let t = k as f64 * cfg.ts;
        let mut measured = state.currents();
        if cfg.noise_amplitude > 0.0 {
            let a = cfg.noise_amplitude;
            measured.d += rng.gen_range(-a..=a);
            measured.q += rng.gen_range(-a..=a);
        }
        let omega_ref_rpm = cfg.speed_ref_rpm.value_at(t);
        let load = cfg.load_nm.value_at(t);
        let iq_cmd = speed.update(rpm_to_rad_s(omega_ref_rpm), state.omega_m, cfg.ts);
        let reference = CurrentRef::limited(cfg.id_ref, iq_cmd, cfg.cost.i_max);
        let omega_re = state.omega_e(&machine);

        let (start, theta_start) = match cfg.delay_model {
            DelayModel::OneStep => {
                let mid = state.theta_e + 0.5 * omega_re * cfg.ts;
                let u = dq_voltage(latched, machine.vdc, mid);
                (
                    delay_compensate(measured, omega_re, u, &model),
                    state.theta_e + omega_re * cfg.ts,
                )
            }
            DelayModel::None => (measured, state.theta_e),
        };
        let ctx = PredictionContext::new(model, cfg.cost, omega_re, theta_start);
        let decision = decide(cfg, start, &reference, &ctx)?;
        let applied = match cfg.delay_model {
            DelayModel::OneStep => latched,
            DelayModel::None => decision.vector,
        };

        let [ia, ib, ic] = phase_currents(&state);
        let observer = speed.observer();
        rows.push(TraceRow {
            t,
            id: state.id,
            iq: state.iq,
            ia,
            ib,
            ic,
            theta_e: state.theta_e,
            omega_rpm: rad_s_to_rpm(state.omega_m),
            omega_ref_rpm,
            te: electromagnetic_torque(&state, &machine),
            tl: load,
            id_ref: reference.id,
            iq_ref: reference.iq,
            applied: applied.index(),
            chosen: decision.vector.index(),
            model_evals: decision.evals.model_evals,
            cost_evals: decision.evals.cost_evals,
            feasible: decision.feasible,
            z1: observer.map(|z| z.z1),
            z2: observer.map(|z| z.z2),
        });

        for _ in 0..cfg.substeps {
            let mid = state.theta_e + 0.5 * state.omega_e(&machine) * dt;
            let input = PlantInput::new(dq_voltage(applied, machine.vdc, mid), load);
            state = step_plant(&state, &input, &machine, dt)?;
        }
        if !state.is_finite() || state.currents().magnitude() > 1e6 {
            return Err(Error::Diverged {
                t: t + cfg.ts,
                what: format!("plant state {state:?}"),
            });
        }
        if cfg.delay_model == DelayModel::OneStep {
            latched = decision.vector;
        }
    }

    Ok(Trace {
        meta: TraceMeta {
            scenario: cfg.name.clone(),
            controller: cfg.controller,
            horizon: cfg.horizon,
            ts: cfg.ts,
            pole_pairs: machine.pole_pairs,
            seed: cfg.seed,
            config_hash: cfg.config_hash(),
        },
        rows,
    })
}

/// Runs independent scenarios on up to `jobs` worker threads. Results come
/// back in input order.
pub fn run_batch(configs: &[ScenarioConfig], jobs: usize) -> Vec<Result<Trace>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| configs.par_iter().map(run_scenario).collect())
}
