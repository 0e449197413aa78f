//! Execution of every experiment kind.

use super::config::{
    AlohaExperiment, AsymptoticCurve, AsymptoticExperiment, ConverseExperiment, ConverseSweep, Experiment, ExperimentConfig,
    FblAchExperiment, FrameDecoder, FrameExperiment, ShamaiBetteshExperiment, SlotExperiment, SlotMode, SlotModel,
};
use super::dat::{emit_dat, Schema};
use super::runner::{mean_and_se, Runner};
use crate::aloha::{
    epsilon_t_genie, optimize_operating_point, run_frame, AlohaProblem, FrameConfig, GenieDecoder, OperatingGrid, SlotErrorModel,
    SlotScheme,
};
use crate::asymptotic::{ach_theorem4, conv, conv_iid, replica_optimal, AsymptoticParams};
use crate::channel::{noise_only, power_for_ebn0_db, transmit, FadingDraw};
use crate::error::{Error, Result};
use crate::fbl::{
    converse_min_ebn0, converse_theorem1, shamai_bettesh_min_ebn0, slot_error_bound_mc, tin_pe, FadingSamples, FblParams,
    NormalApproxModel,
};
use crate::joint::{DecodeHook, JointDecoder, JointDecoderConfig};
use crate::ldpc::{bpsk_map, LdpcCode};
use crate::rng::RngStream;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

/// Eb/N0 window in dB searched by the bound bisections.
pub const BOUND_WINDOW_DB: (f64, f64) = (-10.0, 60.0);

/// Bisection resolution in dB for finite-blocklength curves.
pub const BOUND_TOL_DB: f64 = 0.05;

/// How a point's accuracy is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uncertainty {
    StdError(f64),
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub uncertainty: Uncertainty,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl Point {
    fn exact(x: f64, y: f64) -> Self {
        Self { x, y, uncertainty: Uncertainty::Exact, extra: BTreeMap::new() }
    }

    fn estimated(x: f64, y: f64, se: f64) -> Self {
        Self { x, y, uncertainty: Uncertainty::StdError(se), extra: BTreeMap::new() }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.extra.insert(key.into(), value);
        self
    }

    pub fn std_error(&self) -> Option<f64> {
        match self.uncertainty {
            Uncertainty::StdError(se) => Some(se),
            Uncertainty::Exact => None,
        }
    }
}

/// One curve, written to `<name>.dat`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub schema: Schema,
    pub points: Vec<Point>,
    /// Sweep values for which the bound has no solution inside the search window.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub infeasible: Vec<f64>,
}

impl Series {
    fn new(name: impl Into<String>, schema: Schema) -> Self {
        Self { name: name.into(), schema, points: Vec::new(), infeasible: Vec::new() }
    }

    pub fn rows(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.y)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub kind: String,
    pub config_hash: String,
    pub source_revision: String,
    pub seed: u64,
    pub trials: usize,
    pub workers: usize,
    pub series: Vec<Series>,
    pub wall_time_s: f64,
}

impl ResultRecord {
    pub fn has_infeasible(&self) -> bool {
        self.series.iter().any(|s| !s.infeasible.is_empty())
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// Crate version plus the git commit of the source tree when available.
pub fn source_revision() -> String {
    let commit = std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into());
    format!("{} ({commit})", env!("CARGO_PKG_VERSION"))
}

/// File stem of the record and checkpoint: the label, or the experiment kind.
pub fn record_stem(cfg: &ExperimentConfig) -> String {
    name_or(cfg, cfg.experiment.kind())
}

/// Runs `cfg` on a fresh worker pool and writes its data files and
/// `<stem>.record.json`.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let checkpoint = cfg.output.join(format!("{}.checkpoint.json", record_stem(cfg)));
    let runner = Runner::new(cfg.workers, Some(checkpoint))?;
    run_with(cfg, &runner)
}

pub fn run_with(cfg: &ExperimentConfig, runner: &Runner) -> Result<ResultRecord> {
    cfg.validate()?;
    let started = Instant::now();
    let series = runner.install(|| match &cfg.experiment {
        Experiment::SimulateSlot(e) => simulate_slot(cfg, e, runner).map(|s| vec![s]),
        Experiment::SimulateFrame(e) => simulate_frame(cfg, e, runner).map(|s| vec![s]),
        Experiment::BoundFblAch(e) => bound_fbl_ach(cfg, e).map(|s| vec![s]),
        Experiment::BoundConverse(e) => bound_converse(cfg, e).map(|s| vec![s]),
        Experiment::BoundAsymptotic(e) => bound_asymptotic(cfg, e),
        Experiment::OptimizeAloha(e) => optimize_aloha(cfg, e, runner).map(|s| vec![s]),
        Experiment::BoundShamaiBettesh(e) => bound_shamai_bettesh(cfg, e).map(|s| vec![s]),
    })?;
    let record = ResultRecord {
        kind: cfg.experiment.kind().into(),
        config_hash: cfg.hash(),
        source_revision: source_revision(),
        seed: cfg.seed,
        trials: cfg.trials,
        workers: runner.workers(),
        series,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_outputs(&cfg.output, &record_stem(cfg), &record)?;
    Ok(record)
}

fn write_outputs(dir: &Path, stem: &str, record: &ResultRecord) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for s in &record.series {
        emit_dat(dir.join(format!("{}.dat", s.name)), s.schema, &s.rows())?;
    }
    let json = serde_json::to_string_pretty(record).map_err(|e| Error::InvalidParameter(format!("record serialization: {e}")))?;
    std::fs::write(dir.join(format!("{stem}.record.json")), json)?;
    let ckpt = dir.join(format!("{stem}.checkpoint.json"));
    if ckpt.exists() {
        std::fs::remove_file(ckpt)?;
    }
    Ok(())
}

fn name_or(cfg: &ExperimentConfig, default: &str) -> String {
    cfg.label.clone().unwrap_or_else(|| default.into())
}

fn load_code(key: &str, name: &str) -> Result<LdpcCode> {
    LdpcCode::load(name).map_err(|e| Error::Config { key: key.into(), message: e.to_string() })
}

/// Outcome of one simulated slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotTrial {
    pub miss_fraction: f64,
    pub overflow: bool,
}

fn random_message<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<u8> {
    (0..k).map(|_| rng.random_range(0..2u8)).collect()
}

fn slot_hook(mode: SlotMode, users: usize, fading: &FadingDraw) -> DecodeHook {
    match mode {
        SlotMode::Blind => DecodeHook::default(),
        SlotMode::KnownK => DecodeHook { branches: Some(users), known_fading: None },
        SlotMode::KnownH => DecodeHook { branches: Some(users), known_fading: Some(fading.coefficients.clone()) },
    }
}

/// Transmits `messages` through one fading slot and decodes it.
fn decode_messages(
    code: &LdpcCode,
    cfg: &JointDecoderConfig,
    mode: SlotMode,
    power: f64,
    messages: &[Vec<u8>],
    rng: &mut (impl Rng + ?Sized),
) -> Result<Vec<Vec<u8>>> {
    let words: Vec<Vec<u8>> = messages.iter().map(|m| code.encoder.encode(m)).collect::<Result<_>>()?;
    let fading = FadingDraw::sample(words.len(), rng);
    let y = if words.is_empty() {
        noise_only(code.n(), rng)?
    } else {
        let x = words.iter().map(|w| bpsk_map(w, power)).collect::<Result<Vec<_>>>()?;
        transmit(&x, &fading, true, rng)?
    };
    let mut decoder = JointDecoder::new(code.clone(), *cfg, power)?;
    let out = decoder.decode_slot_with(&y, &slot_hook(mode, words.len(), &fading), rng)?;
    Ok(out.codewords.iter().map(|c| code.encoder.extract_message(c)).collect())
}

/// One slot with `users` random messages at per-user symbol power `power`.
pub fn slot_trial<R: Rng + ?Sized>(
    code: &LdpcCode,
    cfg: &JointDecoderConfig,
    mode: SlotMode,
    users: usize,
    power: f64,
    rng: &mut R,
) -> Result<SlotTrial> {
    let messages: Vec<Vec<u8>> = (0..users).map(|_| random_message(code.k(), rng)).collect();
    let list = decode_messages(code, cfg, mode, power, &messages, rng)?;
    let misses = messages.iter().filter(|m| !list.contains(m)).count();
    Ok(SlotTrial {
        miss_fraction: if users == 0 { 0.0 } else { misses as f64 / users as f64 },
        overflow: list.len() > users,
    })
}

fn simulate_slot(cfg: &ExperimentConfig, e: &SlotExperiment, runner: &Runner) -> Result<Series> {
    let code = load_code("code", &e.code)?;
    let mut series = Series::new(name_or(cfg, "slot"), Schema::EbnoFer);
    for (p, &db) in e.ebn0_db.iter().enumerate() {
        let power = power_for_ebn0_db(code.n(), code.k(), db);
        let stage = format!("simulate-slot {db} dB");
        let trials = runner.map_trials(&stage, RngStream::new(cfg.seed, p as u64), cfg.trials, |_, rng| {
            slot_trial(&code, &e.decoder, e.mode, e.users, power, rng)
        })?;
        let miss: Vec<f64> = trials.iter().map(|t| t.miss_fraction).collect();
        let overflow: Vec<f64> = trials.iter().map(|t| t.overflow as u8 as f64).collect();
        let (m, se) = mean_and_se(&miss);
        let (q, q_se) = mean_and_se(&overflow);
        series.points.push(Point::estimated(db, m, se).with("overflow", q).with("overflow_se", q_se));
    }
    Ok(series)
}

fn message_bits(message: u128, k: usize) -> Vec<u8> {
    (0..k).map(|j| ((message >> j) & 1) as u8).collect()
}

fn bits_message(bits: &[u8]) -> u128 {
    bits.iter().enumerate().fold(0u128, |acc, (j, &b)| acc | ((b as u128) << j))
}

/// The joint decoder as the slot scheme of a frame.
struct LdpcSlots<'a> {
    code: &'a LdpcCode,
    config: &'a JointDecoderConfig,
    mode: SlotMode,
    slot_power: f64,
    failure: Option<Error>,
}

impl SlotScheme for LdpcSlots<'_> {
    fn transmit_and_decode(&mut self, messages: &[u128], _: usize, rng: &mut dyn RngCore) -> Vec<u128> {
        let bits: Vec<Vec<u8>> = messages.iter().map(|&m| message_bits(m, self.code.k())).collect();
        match decode_messages(self.code, self.config, self.mode, self.slot_power, &bits, rng) {
            Ok(list) => list.iter().map(|b| bits_message(b)).collect(),
            Err(err) => {
                self.failure.get_or_insert(err);
                Vec::new()
            }
        }
    }
}

fn simulate_frame(cfg: &ExperimentConfig, e: &FrameExperiment, runner: &Runner) -> Result<Series> {
    let code = match &e.decoder {
        FrameDecoder::Ldpc { code, .. } => {
            let c = load_code("code", code)?;
            if e.frame_length / e.slots != c.n() || c.k() != e.payload_bits {
                return Err(Error::Config {
                    key: "slots".into(),
                    message: format!("slot length {} and payload {} must match the [{}, {}] code", e.frame_length / e.slots, e.payload_bits, c.n(), c.k()),
                });
            }
            Some(c)
        }
        FrameDecoder::Genie { .. } => None,
    };
    let mut series = Series::new(name_or(cfg, "frame"), Schema::EbnoPupe);
    for (p, &db) in e.ebn0_db.iter().enumerate() {
        let frame = FrameConfig {
            frame_length: e.frame_length,
            slots: e.slots,
            active_users: e.active_users,
            max_per_slot: e.max_per_slot,
            codebook_size: 1u128 << e.payload_bits,
            power: power_for_ebn0_db(e.frame_length, e.payload_bits, db),
        };
        let stage = format!("simulate-frame {db} dB");
        let pupe = runner.map_trials(&stage, RngStream::new(cfg.seed, p as u64), cfg.trials, |_, rng| match &e.decoder {
            FrameDecoder::Genie { miss } => {
                let mut genie = GenieDecoder { miss: miss[..e.max_per_slot].to_vec() };
                Ok(run_frame(&frame, &mut genie, rng)?.pupe)
            }
            FrameDecoder::Ldpc { mode, config, .. } => {
                let code = code.as_ref().expect("code loaded");
                let mut scheme = LdpcSlots { code, config, mode: *mode, slot_power: frame.slot_power(), failure: None };
                let out = run_frame(&frame, &mut scheme, rng)?;
                match scheme.failure {
                    Some(err) => Err(err),
                    None => Ok(out.pupe),
                }
            }
        })?;
        let (m, se) = mean_and_se(&pupe);
        let mut point = Point::estimated(db, m, se);
        if let FrameDecoder::Genie { miss } = &e.decoder {
            let m_size = 2f64.powi(e.payload_bits as i32);
            point = point.with("genie_bound", epsilon_t_genie(e.active_users, e.slots, e.max_per_slot, m_size, miss)?);
        }
        series.points.push(point);
    }
    Ok(series)
}

fn bound_fbl_ach(cfg: &ExperimentConfig, e: &FblAchExperiment) -> Result<Series> {
    let points: Vec<Point> = e
        .ebn0_db
        .par_iter()
        .enumerate()
        .map(|(p, &db)| {
            let power = power_for_ebn0_db(e.slot_length, e.payload_bits, db);
            let params = FblParams::spherical_slot(e.slot_length, e.payload_bits as f64, e.users, power);
            let bound = slot_error_bound_mc(&params, cfg.trials, &mut RngStream::new(cfg.seed, p as u64).rng())?;
            Ok(Point::exact(db, bound.pupe).with("draws", cfg.trials as f64))
        })
        .collect::<Result<_>>()?;
    let mut series = Series::new(name_or(cfg, "fbl"), Schema::EbnoFer);
    series.points = points;
    Ok(series)
}

/// Smallest error probability the converse allows at `power`, by bisection in `ln ε`.
fn converse_error(n: usize, k: usize, users: usize, power: f64, samples: usize, stream: RngStream) -> Result<(f64, bool)> {
    let feasible = |eps: f64| -> Result<bool> { Ok(converse_theorem1(n, power, users, eps, samples, stream)?.log2_m_max >= k as f64) };
    let floor = (1.0 / samples as f64).max(1e-9);
    let ceiling = 1.0 - 1e-9;
    if feasible(floor)? {
        return Ok((floor, true));
    }
    if !feasible(ceiling)? {
        return Ok((1.0, false));
    }
    let (mut lo, mut hi) = (floor.ln(), ceiling.ln());
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid.exp())? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi.exp(), false))
}

fn bound_converse(cfg: &ExperimentConfig, e: &ConverseExperiment) -> Result<Series> {
    let (n, k) = (e.block_length, e.payload_bits);
    match &e.sweep {
        ConverseSweep::MinEbn0 { active_users, target_pupe } => {
            let found: Vec<Option<f64>> = active_users
                .par_iter()
                .enumerate()
                .map(|(i, &ka)| converse_min_ebn0(n, k, ka, *target_pupe, cfg.trials, RngStream::new(cfg.seed, i as u64), BOUND_WINDOW_DB, BOUND_TOL_DB))
                .collect::<Result<_>>()?;
            let mut series = Series::new(name_or(cfg, "converse"), Schema::KaEbno);
            for (&ka, db) in active_users.iter().zip(found) {
                match db {
                    Some(db) => series.points.push(Point::exact(ka as f64, db).with("draws", cfg.trials as f64)),
                    None => series.infeasible.push(ka as f64),
                }
            }
            Ok(series)
        }
        ConverseSweep::ErrorCurve { users, ebn0_db } => {
            let points: Vec<Point> = ebn0_db
                .par_iter()
                .enumerate()
                .map(|(p, &db)| {
                    let power = power_for_ebn0_db(n, k, db);
                    let (eps, at_floor) = converse_error(n, k, *users, power, cfg.trials, RngStream::new(cfg.seed, p as u64))?;
                    Ok(Point::exact(db, eps).with("draws", cfg.trials as f64).with("at_resolution_floor", at_floor as u8 as f64))
                })
                .collect::<Result<_>>()?;
            let mut series = Series::new(name_or(cfg, "converse"), Schema::EbnoFer);
            series.points = points;
            Ok(series)
        }
    }
}

fn asymptotic_point(e: &AsymptoticExperiment, curve: AsymptoticCurve, mu: f64) -> Result<Option<f64>> {
    let ap = AsymptoticParams::new(mu, e.log2_m1, e.target_pupe)?;
    let value = match curve {
        AsymptoticCurve::Achievability => ach_theorem4(&ap, &e.grid).map(|r| r.ebn0_db),
        AsymptoticCurve::Optimal => replica_optimal(&ap).map(|r| r.ebn0_db),
        AsymptoticCurve::Converse => conv(&ap),
        AsymptoticCurve::ConverseIid => conv_iid(&ap),
    };
    match value {
        Ok(v) => Ok(Some(v)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(err) => Err(err),
    }
}

/// One series per curve. A label names the series outright when a single curve
/// is requested and prefixes the curve names otherwise.
fn bound_asymptotic(cfg: &ExperimentConfig, e: &AsymptoticExperiment) -> Result<Vec<Series>> {
    let jobs: Vec<(AsymptoticCurve, f64)> = e.curves.iter().flat_map(|&c| e.user_density.iter().map(move |&mu| (c, mu))).collect();
    let values: Vec<Option<f64>> = jobs.par_iter().map(|&(c, mu)| asymptotic_point(e, c, mu)).collect::<Result<_>>()?;
    let schema = if e.frame_length.is_some() { Schema::KaEbno } else { Schema::EpsMu };
    let mut out = Vec::new();
    for (ci, &curve) in e.curves.iter().enumerate() {
        let name = match (&cfg.label, e.curves.len()) {
            (Some(l), 1) => l.clone(),
            (Some(l), _) => format!("{l}{}", curve.file_stem()),
            (None, _) => curve.file_stem().to_string(),
        };
        let mut series = Series::new(name, schema);
        for (mi, &mu) in e.user_density.iter().enumerate() {
            let x = e.frame_length.map_or(mu, |n| mu * n as f64);
            match values[ci * e.user_density.len() + mi] {
                Some(db) => series.points.push(match e.frame_length {
                    Some(_) => Point::exact(x, db),
                    None => Point::exact(db, mu),
                }),
                None => series.infeasible.push(x),
            }
        }
        out.push(series);
    }
    Ok(out)
}

/// Treating interference as noise; every occupancy reuses the same draws.
struct TinModel {
    payload_bits: usize,
    draws: usize,
    seed: u64,
}

impl SlotErrorModel for TinModel {
    fn miss(&self, slot_length: usize, r: usize, slot_power: f64) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let mut rng = RngStream::new(self.seed, r as u64).rng();
        tin_pe(slot_length, self.payload_bits, slot_power, r - 1, self.draws, &mut rng)
    }
}

type ModelCache = Mutex<HashMap<(usize, usize, u64), (f64, f64)>>;

/// Projection-decoder Monte-Carlo bound, memoized per `(n₁, r, power)`.
struct FblModel {
    payload_bits: usize,
    samples: usize,
    seed: u64,
    cache: ModelCache,
}

impl SlotErrorModel for FblModel {
    fn miss(&self, slot_length: usize, r: usize, slot_power: f64) -> f64 {
        if r == 0 {
            return 0.0;
        }
        let key = (slot_length, r, slot_power.to_bits());
        if let Some(&(v, _)) = self.cache.lock().expect("cache lock").get(&key) {
            return v;
        }
        let params = FblParams::spherical_slot(slot_length, self.payload_bits as f64, r, slot_power);
        let mut rng = RngStream::new(self.seed, r as u64).child(slot_length as u64).rng();
        let v = slot_error_bound_mc(&params, self.samples, &mut rng).map(|b| b.pupe).unwrap_or(1.0);
        self.cache.lock().expect("cache lock").insert(key, (v, 0.0));
        v
    }
}

/// Measured joint-decoder miss and list-overflow rates, memoized per `(r, power)`.
/// Overflow beyond `T + 1` users reuses the `T + 1` estimate.
struct LdpcModel<'a> {
    code: LdpcCode,
    config: JointDecoderConfig,
    mode: SlotMode,
    trials: usize,
    seed: u64,
    runner: &'a Runner,
    cache: ModelCache,
    failure: Mutex<Option<Error>>,
}

impl LdpcModel<'_> {
    fn measure(&self, r: usize, slot_power: f64) -> (f64, f64) {
        let r = r.min(self.config.max_users + 1);
        let key = (self.code.n(), r, slot_power.to_bits());
        if let Some(&v) = self.cache.lock().expect("cache lock").get(&key) {
            return v;
        }
        let stage = format!("ldpc slot model r={r}");
        let trials = self.runner.map_trials(&stage, RngStream::new(self.seed, r as u64), self.trials, |_, rng| {
            slot_trial(&self.code, &self.config, self.mode, r, slot_power, rng)
        });
        let v = match trials {
            Ok(t) => {
                let n = t.len() as f64;
                (t.iter().map(|s| s.miss_fraction).sum::<f64>() / n, t.iter().filter(|s| s.overflow).count() as f64 / n)
            }
            Err(err) => {
                self.failure.lock().expect("failure lock").get_or_insert(err);
                (1.0, 1.0)
            }
        };
        self.cache.lock().expect("cache lock").insert(key, v);
        v
    }
}

impl SlotErrorModel for LdpcModel<'_> {
    fn miss(&self, slot_length: usize, r: usize, slot_power: f64) -> f64 {
        if r == 0 {
            return 0.0;
        }
        if slot_length != self.code.n() || r > self.config.max_users {
            return 1.0;
        }
        self.measure(r, slot_power).0
    }

    fn overflow(&self, slot_length: usize, r: usize, slot_power: f64) -> f64 {
        if slot_length != self.code.n() {
            return 1.0;
        }
        self.measure(r, slot_power).1
    }
}

fn aloha_point(problem: &AlohaProblem, model: &dyn SlotErrorModel, grid: &OperatingGrid) -> Result<Option<Point>> {
    match optimize_operating_point(problem, model, grid) {
        Ok(op) => Ok(Some(
            Point::exact(problem.active_users as f64, op.ebn0_db).with("slots", op.slots as f64).with("pupe", op.pupe),
        )),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(err) => Err(err),
    }
}

fn optimize_aloha(cfg: &ExperimentConfig, e: &AlohaExperiment, runner: &Runner) -> Result<Series> {
    let grid = OperatingGrid {
        slot_counts: (1..=(e.frame_length / e.min_slot_length.max(1)).max(1)).collect(),
        ebn0_min_db: e.ebn0_min_db,
        ebn0_max_db: e.ebn0_max_db,
        ebn0_step_db: e.ebn0_step_db,
    };
    let problem = |ka: usize| AlohaProblem {
        frame_length: e.frame_length,
        payload_bits: e.payload_bits,
        active_users: ka,
        max_per_slot: e.max_per_slot,
        target: e.target_pupe,
        genie: e.genie,
    };
    let normal = || NormalApproxModel {
        log2_m: e.payload_bits as f64,
        fading: FadingSamples::new(e.max_per_slot, cfg.trials, &mut RngStream::new(cfg.seed, 0).rng()),
    };
    let results: Vec<Option<Point>> = match &e.model {
        SlotModel::NormalApprox => {
            let model = normal();
            e.active_users.par_iter().map(|&ka| aloha_point(&problem(ka), &model, &grid)).collect::<Result<_>>()?
        }
        SlotModel::Tin => {
            let model = TinModel { payload_bits: e.payload_bits, draws: cfg.trials, seed: cfg.seed };
            e.active_users.par_iter().map(|&ka| aloha_point(&problem(ka), &model, &grid)).collect::<Result<_>>()?
        }
        SlotModel::Fbl => {
            let seed_model = normal();
            let model = FblModel { payload_bits: e.payload_bits, samples: cfg.trials.min(2000), seed: cfg.seed, cache: Mutex::new(HashMap::new()) };
            e.active_users
                .par_iter()
                .map(|&ka| {
                    let Some(seed_point) = aloha_point(&problem(ka), &seed_model, &grid)? else { return Ok(None) };
                    let fixed = OperatingGrid { slot_counts: vec![seed_point.extra["slots"] as usize], ..grid.clone() };
                    aloha_point(&problem(ka), &model, &fixed)
                })
                .collect::<Result<_>>()?
        }
        SlotModel::Ldpc { codes, mode, config } => {
            let mut models = Vec::new();
            for (i, name) in codes.iter().enumerate() {
                let code = load_code("codes", name)?;
                if code.k() != e.payload_bits || e.frame_length / code.n() == 0 {
                    return Err(Error::Config { key: "codes".into(), message: format!("code `{name}` does not fit the frame and payload") });
                }
                models.push(LdpcModel {
                    code,
                    config: *config,
                    mode: *mode,
                    trials: cfg.trials,
                    seed: cfg.seed.wrapping_add(i as u64),
                    runner,
                    cache: Mutex::new(HashMap::new()),
                    failure: Mutex::new(None),
                });
            }
            let mut out = Vec::new();
            for &ka in &e.active_users {
                let mut best: Option<Point> = None;
                for (i, model) in models.iter().enumerate() {
                    let fixed = OperatingGrid { slot_counts: vec![e.frame_length / model.code.n()], ..grid.clone() };
                    let point = aloha_point(&problem(ka), model, &fixed)?;
                    if let Some(err) = model.failure.lock().expect("failure lock").take() {
                        return Err(err);
                    }
                    if let Some(p) = point {
                        if best.as_ref().is_none_or(|b| p.y < b.y) {
                            best = Some(p.with("code", i as f64));
                        }
                    }
                }
                out.push(best);
            }
            out
        }
    };
    let mut series = Series::new(name_or(cfg, "aloha"), Schema::KaEbno);
    for (&ka, point) in e.active_users.iter().zip(results) {
        match point {
            Some(p) => series.points.push(p),
            None => series.infeasible.push(ka as f64),
        }
    }
    Ok(series)
}

fn bound_shamai_bettesh(cfg: &ExperimentConfig, e: &ShamaiBetteshExperiment) -> Result<Series> {
    let mut series = Series::new(name_or(cfg, "shamai_bettesh"), Schema::KaEbno);
    for &ka in &e.active_users {
        match shamai_bettesh_min_ebn0(ka, e.frame_length, e.payload_bits, e.target_pupe, BOUND_WINDOW_DB, 0.01)? {
            Some(db) => series.points.push(Point::exact(ka as f64, db)),
            None => series.infeasible.push(ka as f64),
        }
    }
    Ok(series)
}
