//! Experiment plans regenerating the published figure data.

use super::config::{
    AlohaExperiment, AsymptoticCurve, AsymptoticExperiment, ConverseExperiment, ConverseSweep, Experiment, ExperimentConfig,
    FblAchExperiment, FrameDecoder, FrameExperiment, ShamaiBetteshExperiment, SlotExperiment, SlotMode, SlotModel,
};
use super::experiments::{run, ResultRecord};
use crate::asymptotic::AchGrid;
use crate::error::{Error, Result};
use crate::gm::GmConfig;
use crate::joint::JointDecoderConfig;
use crate::ldpc::LdpcCode;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// Reduced trials, grids and codes; minutes to a few hours on a laptop.
    Desk,
    /// Published block lengths and trial budgets; days of CPU time.
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::Config { key: "scale".into(), message: format!("unknown scale `{s}` (desk or full)") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig1,
    Fig2,
    FigK2,
    FigK3,
    FigK4,
    FigAsymp1,
    FigAsymp2,
    FigHardDecision,
}

impl Figure {
    pub const ALL: [Figure; 8] = [
        Figure::Fig1,
        Figure::Fig2,
        Figure::FigK2,
        Figure::FigK3,
        Figure::FigK4,
        Figure::FigAsymp1,
        Figure::FigAsymp2,
        Figure::FigHardDecision,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::FigK2 => "figK2",
            Figure::FigK3 => "figK3",
            Figure::FigK4 => "figK4",
            Figure::FigAsymp1 => "fig_asymp1",
            Figure::FigAsymp2 => "fig_asymp2",
            Figure::FigHardDecision => "fig_hard_decision",
        }
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config { key: "figure".into(), message: format!("unknown figure `{s}`") })
    }
}

const FRAME_LENGTH: usize = 30_000;
const PAYLOAD_BITS: usize = 100;
const TARGET_PUPE: f64 = 0.1;

struct Plan<'a> {
    seed: u64,
    out: &'a Path,
    configs: Vec<ExperimentConfig>,
}

impl Plan<'_> {
    fn add(&mut self, label: &str, trials: usize, experiment: Experiment) {
        self.configs.push(ExperimentConfig {
            seed: self.seed.wrapping_add(self.configs.len() as u64),
            trials,
            output: self.out.to_path_buf(),
            workers: None,
            label: Some(label.into()),
            experiment,
        });
    }
}

fn pick<T>(scale: Scale, desk: T, full: T) -> T {
    match scale {
        Scale::Desk => desk,
        Scale::Full => full,
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step).round() as usize;
    (0..=count).map(|i| lo + i as f64 * step).collect()
}

fn blind_decoder(max_users: usize) -> JointDecoderConfig {
    JointDecoderConfig { max_users, ..JointDecoderConfig::default() }
}

fn single_component_gm() -> GmConfig {
    GmConfig { max_components: 1, merge_distance: 0.0, prune_cum_weight: 0.0, sample_count: 20 }
}

fn asymptotic(plan: &mut Plan, scale: Scale, epsilon: f64, prefix: &str) {
    let mu = pick(scale, grid(0.02, 0.2, 0.02), grid(0.005, 0.2, 0.005));
    plan.add(
        prefix,
        1,
        Experiment::BoundAsymptotic(AsymptoticExperiment {
            log2_m1: PAYLOAD_BITS as f64,
            target_pupe: epsilon,
            user_density: mu,
            curves: AsymptoticCurve::ALL.to_vec(),
            grid: AchGrid::default(),
            frame_length: None,
        }),
    );
}

fn fig1(plan: &mut Plan, scale: Scale) {
    let users = pick(scale, vec![25, 50, 100, 150, 250], (1..=10).map(|i| 25 * i).collect());
    let ldpc_users = pick(scale, vec![50, 150], users.clone());
    let step = pick(scale, 0.25, 0.1);
    let aloha = |t: usize, genie: bool, model: SlotModel, active_users: Vec<usize>| {
        Experiment::OptimizeAloha(AlohaExperiment {
            frame_length: FRAME_LENGTH,
            payload_bits: PAYLOAD_BITS,
            max_per_slot: t,
            target_pupe: TARGET_PUPE,
            active_users,
            genie,
            model,
            min_slot_length: PAYLOAD_BITS,
            ebn0_min_db: 0.0,
            ebn0_max_db: 40.0,
            ebn0_step_db: step,
        })
    };
    let draws = pick(scale, 2000, 100_000);
    plan.add("aloha1_fbl", draws, aloha(1, true, SlotModel::Fbl, users.clone()));
    plan.add("aloha4_fbl", draws, aloha(4, true, SlotModel::Fbl, users.clone()));
    let codes = pick(scale, vec!["ldpc_200_100".to_string()], vec!["ldpc_200_100".to_string(), "ldpc_400_100".to_string()]);
    let slot_trials = pick(scale, 20, 1000);
    for (label, t) in [("aloha1_ldpc", 1), ("aloha4_ldpc", 4)] {
        let model = SlotModel::Ldpc { codes: codes.clone(), mode: SlotMode::Blind, config: blind_decoder(t) };
        plan.add(label, slot_trials, aloha(t, false, model, ldpc_users.clone()));
    }
    plan.add("tin", draws, aloha(4, true, SlotModel::Tin, users.clone()));
    plan.add(
        "shamai_bettesh",
        1,
        Experiment::BoundShamaiBettesh(ShamaiBetteshExperiment {
            frame_length: FRAME_LENGTH,
            payload_bits: PAYLOAD_BITS,
            target_pupe: TARGET_PUPE,
            active_users: users.clone(),
        }),
    );
    plan.add(
        "converse",
        pick(scale, 10_000, 100_000),
        Experiment::BoundConverse(ConverseExperiment {
            block_length: FRAME_LENGTH,
            payload_bits: PAYLOAD_BITS,
            sweep: ConverseSweep::MinEbn0 { active_users: users.clone(), target_pupe: TARGET_PUPE },
        }),
    );
    plan.add(
        "optimal_decoder",
        1,
        Experiment::BoundAsymptotic(AsymptoticExperiment {
            log2_m1: PAYLOAD_BITS as f64,
            target_pupe: TARGET_PUPE,
            user_density: users.iter().map(|&k| k as f64 / FRAME_LENGTH as f64).collect(),
            curves: vec![AsymptoticCurve::Optimal],
            grid: AchGrid::default(),
            frame_length: Some(FRAME_LENGTH),
        }),
    );
}

/// Desk scale shrinks the frame and the user count by ten, keeping the load per slot.
fn fig2(plan: &mut Plan, scale: Scale) -> Result<()> {
    let code = "ldpc_400_100";
    let n1 = LdpcCode::load(code)?.n();
    let shrink = pick(scale, 10, 1);
    let frame_length = FRAME_LENGTH / shrink;
    for ka in [50, 150, 250] {
        plan.add(
            &format!("ka_{ka}"),
            pick(scale, 4, 1000),
            Experiment::SimulateFrame(FrameExperiment {
                frame_length,
                slots: frame_length / n1,
                active_users: ka / shrink,
                max_per_slot: 4,
                payload_bits: PAYLOAD_BITS,
                ebn0_db: pick(scale, grid(8.0, 16.0, 4.0), grid(6.0, 22.0, 1.0)),
                decoder: FrameDecoder::Ldpc { code: code.into(), mode: SlotMode::Blind, config: blind_decoder(4) },
            }),
        );
    }
    Ok(())
}

fn fig_k(plan: &mut Plan, scale: Scale, users: usize) -> Result<()> {
    let code = pick(scale, "ldpc_200_100", "ldpc_400_100");
    let n1 = LdpcCode::load(code)?.n();
    let ebn0 = pick(scale, grid(6.0, 22.0, 4.0), grid(6.0, 22.0, 1.0));
    let trials = pick(scale, 40, 1000);
    for (suffix, mode) in [("blind", SlotMode::Blind), ("known_k", SlotMode::KnownK), ("known_kh", SlotMode::KnownH)] {
        plan.add(
            &format!("k{users}_{suffix}"),
            trials,
            Experiment::SimulateSlot(SlotExperiment { code: code.into(), users, mode, ebn0_db: ebn0.clone(), decoder: blind_decoder(4) }),
        );
    }
    plan.add(
        &format!("k{users}_fbl"),
        pick(scale, 500, 2000),
        Experiment::BoundFblAch(FblAchExperiment { slot_length: n1, payload_bits: PAYLOAD_BITS, users, ebn0_db: ebn0.clone() }),
    );
    plan.add(
        &format!("k{users}_converse"),
        pick(scale, 10_000, 100_000),
        Experiment::BoundConverse(ConverseExperiment {
            block_length: n1,
            payload_bits: PAYLOAD_BITS,
            sweep: ConverseSweep::ErrorCurve { users, ebn0_db: ebn0 },
        }),
    );
    Ok(())
}

fn fig_hard_decision(plan: &mut Plan, scale: Scale) {
    let code = pick(scale, "ldpc_200_100", "ldpc_400_100");
    let ebn0 = pick(scale, grid(11.0, 23.0, 4.0), grid(11.0, 25.0, 1.0));
    let trials = pick(scale, 40, 1000);
    let simple = JointDecoderConfig { gm: single_component_gm(), ..blind_decoder(4) };
    for (label, decoder) in [("gm_full", blind_decoder(4)), ("gm_simple", simple)] {
        plan.add(
            label,
            trials,
            Experiment::SimulateSlot(SlotExperiment { code: code.into(), users: 4, mode: SlotMode::Blind, ebn0_db: ebn0.clone(), decoder }),
        );
    }
}

/// The experiments behind `figure`, writing into `out`.
pub fn figure_plan(figure: Figure, scale: Scale, seed: u64, out: &Path) -> Result<Vec<ExperimentConfig>> {
    let mut plan = Plan { seed, out, configs: Vec::new() };
    match figure {
        Figure::Fig1 => fig1(&mut plan, scale),
        Figure::Fig2 => fig2(&mut plan, scale)?,
        Figure::FigK2 => fig_k(&mut plan, scale, 2)?,
        Figure::FigK3 => fig_k(&mut plan, scale, 3)?,
        Figure::FigK4 => fig_k(&mut plan, scale, 4)?,
        Figure::FigAsymp1 => asymptotic(&mut plan, scale, 1e-3, "pe1e-3_"),
        Figure::FigAsymp2 => asymptotic(&mut plan, scale, 1e-1, "pe1e-1_"),
        Figure::FigHardDecision => fig_hard_decision(&mut plan, scale),
    }
    for cfg in &plan.configs {
        cfg.validate()?;
    }
    Ok(plan.configs)
}

/// Runs every experiment of `figure` in turn.
pub fn reproduce_figure(figure: Figure, scale: Scale, seed: u64, out: &Path, workers: Option<usize>) -> Result<Vec<ResultRecord>> {
    figure_plan(figure, scale, seed, out)?
        .into_iter()
        .map(|cfg| run(&ExperimentConfig { workers, ..cfg }))
        .collect()
}
