//! Experiment driver: TOML configs, presets, seed grids and sweeps, and the
//! `pretrain`, `downstream`, `visitation` and `analyze` subcommands.
//!
//! Every run gets its own directory under the output directory holding a
//! config snapshot (`config.toml`) that reproduces it, a per-iteration
//! `progress.csv`, periodic checkpoints and the final artifacts.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    coverage, diversity_report, learning_curve, read_visitation_csv, visitation_run, write_curve_csv,
    write_svg, write_visitation_csv, DiversityThresholds, LatentMode, VisitationRecord,
};
use crate::envs::{Dynamics, EnvConfig, EnvKind, AGENT_DIM};
use crate::error::{Error, Result};
use crate::policy::checkpoint::{load_policy_expecting, save_manager, save_policy};
use crate::policy::{Integration, MlpSpec, SnnPolicy};
use crate::training::{
    downstream_iteration, flat_iteration, pretrain_iteration, train_multipolicy_skills, DownstreamConfig,
    DownstreamMetrics, DownstreamState, FlatState, PretrainConfig, PretrainState, SkillSet,
};
use crate::trpo::{write_progress, ProgressRow};

pub const CONFIG_VERSION: u32 = 1;

/// Rollouts in the visitation run written at the end of pre-training.
pub const FINAL_VISITATION_ROLLOUTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Pretrain,
    Downstream,
}

/// Which low-level controller a run trains or uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    /// One stochastic network with a latent code.
    #[default]
    Snn,
    /// A bank of independently trained plain policies.
    Multipolicy,
    /// Flat Gaussian policy on the task plus the speed reward (downstream only).
    ComProxy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    /// Full-size settings: 50k pre-training batch, and the task-specific
    /// downstream batch, path length and switch time.
    PaperScale,
    /// Gather with path length 500 and batch 50k.
    GatherBenchmark,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub alpha_h: Vec<f64>,
    pub switch_time: Vec<usize>,
    pub integration: Vec<Integration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub kind: RunKind,
    /// Pre-training seeds; for downstream runs, one per entry of `skills`.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_seeds")]
    pub downstream_seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Skill checkpoints (or bank directories) aligned with `seeds`.
    #[serde(default)]
    pub skills: Vec<PathBuf>,
    /// Write a checkpoint every this many iterations; 0 disables.
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    #[serde(default)]
    pub downstream: DownstreamConfig,
    /// Network of the flat com-proxy policy.
    #[serde(default)]
    pub flat_policy: MlpSpec,
    #[serde(default)]
    pub sweep: SweepAxes,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn config_err(field: &str, constraint: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        constraint: constraint.into(),
    }
}

impl ExperimentConfig {
    pub fn new(mode: Mode, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            version: CONFIG_VERSION,
            mode,
            kind: RunKind::Snn,
            seeds: default_seeds(),
            downstream_seeds: default_seeds(),
            output_dir: output_dir.into(),
            skills: Vec::new(),
            checkpoint_every: 0,
            pretrain: PretrainConfig::default(),
            downstream: DownstreamConfig::default(),
            flat_policy: MlpSpec::default(),
            sweep: SweepAxes::default(),
        }
    }

    pub fn apply_preset(&mut self, preset: Preset) -> Result<()> {
        match preset {
            Preset::Desk => {
                self.pretrain = PretrainConfig::default();
                self.downstream = DownstreamConfig::for_task(self.downstream.env.clone());
            }
            Preset::PaperScale => {
                self.pretrain.batch_size = 50_000;
                self.pretrain.horizon = 500;
                self.pretrain.k = 6;
                self.pretrain.mesh_density = 10.0;
                self.pretrain.policy = MlpSpec::new(vec![32, 32]);
                self.downstream.manager = MlpSpec::new(vec![32, 32]);
                self.flat_policy = MlpSpec::new(vec![32, 32]);
                let (batch, horizon, switch) = match self.downstream.env.task {
                    EnvKind::Gather { .. } => (100_000, 5_000, 10),
                    _ => (1_000_000, 10_000, 500),
                };
                self.downstream.batch_size = batch;
                self.downstream.horizon = horizon;
                self.downstream.switch_time = switch;
            }
            Preset::GatherBenchmark => {
                if !matches!(self.downstream.env.task, EnvKind::Gather { .. }) {
                    self.downstream.env = EnvConfig {
                        dynamics: self.downstream.env.dynamics,
                        ..EnvConfig::gather()
                    };
                }
                self.downstream.batch_size = 50_000;
                self.downstream.horizon = 500;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err("version", format!("must be {CONFIG_VERSION}")));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed"));
        }
        if self.downstream_seeds.is_empty() {
            return Err(config_err("downstream_seeds", "at least one seed"));
        }
        // TOML integers are signed 64-bit
        if self.seeds.iter().chain(&self.downstream_seeds).any(|&s| s > i64::MAX as u64) {
            return Err(config_err("seeds", "must be <= 2^63 - 1"));
        }
        if self.sweep.alpha_h.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(config_err("sweep.alpha_h", "values must be finite and >= 0"));
        }
        match self.mode {
            Mode::Pretrain => {
                if self.kind == RunKind::ComProxy {
                    return Err(config_err("kind", "com-proxy is a downstream baseline"));
                }
                if !self.sweep.switch_time.is_empty() {
                    return Err(config_err("sweep.switch_time", "only applies to downstream runs"));
                }
                self.pretrain.validate()
            }
            Mode::Downstream => {
                if !self.sweep.alpha_h.is_empty() || !self.sweep.integration.is_empty() {
                    return Err(config_err("sweep", "alpha_h and integration only apply to pre-training"));
                }
                if self.kind != RunKind::ComProxy && self.skills.len() != self.seeds.len() {
                    return Err(config_err(
                        "skills",
                        format!("need one skill checkpoint per seed ({} seeds, {} given)", self.seeds.len(), self.skills.len()),
                    ));
                }
                if self.kind == RunKind::ComProxy {
                    self.flat_policy.validate()?;
                }
                self.downstream.validate()
            }
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(config_err("version", format!("must be {CONFIG_VERSION}")));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&fs::read_to_string(path)?)
    }
}

/// One concrete run of a planned experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    /// Single-run config that reproduces this run.
    pub config: ExperimentConfig,
}

fn values_or<T: Clone>(axis: &[T], fallback: T) -> Vec<T> {
    if axis.is_empty() {
        vec![fallback]
    } else {
        axis.to_vec()
    }
}

fn integration_name(i: Integration) -> &'static str {
    match i {
        Integration::Plain => "plain",
        Integration::Concat => "concat",
        Integration::Bilinear => "bilinear",
    }
}

/// Expand seeds and sweep axes into individual runs. Downstream runs cover
/// the full grid of pre-training seeds (through their skills) times
/// downstream seeds times switch times; com-proxy runs have no skills and
/// iterate downstream seeds and switch times only.
pub fn plan_runs(config: &ExperimentConfig) -> Result<Vec<RunSpec>> {
    config.validate()?;
    let single = |c: &ExperimentConfig| ExperimentConfig {
        sweep: SweepAxes::default(),
        ..c.clone()
    };
    let mut runs = Vec::new();
    match config.mode {
        Mode::Pretrain => {
            let alphas = values_or(&config.sweep.alpha_h, config.pretrain.mi.alpha_h);
            let integrations = values_or(&config.sweep.integration, config.pretrain.integration);
            for &seed in &config.seeds {
                for &alpha in &alphas {
                    for &integration in &integrations {
                        let mut c = single(config);
                        c.seeds = vec![seed];
                        c.pretrain.seed = seed;
                        c.pretrain.mi.alpha_h = alpha;
                        c.pretrain.integration = integration;
                        c.validate()?;
                        let name = match config.kind {
                            RunKind::Multipolicy => format!("multipolicy_s{seed}"),
                            _ => format!("pretrain_s{seed}_a{alpha}_{}", integration_name(integration)),
                        };
                        runs.push(RunSpec { name, config: c });
                    }
                }
            }
        }
        Mode::Downstream => {
            let switches = values_or(&config.sweep.switch_time, config.downstream.switch_time);
            let pretrain_seeds: Vec<Option<usize>> = if config.kind == RunKind::ComProxy {
                vec![None]
            } else {
                (0..config.seeds.len()).map(Some).collect()
            };
            for p in pretrain_seeds {
                for &d in &config.downstream_seeds {
                    for &switch in &switches {
                        let mut c = single(config);
                        c.downstream_seeds = vec![d];
                        c.downstream.seed = d;
                        c.downstream.switch_time = switch;
                        let name = match p {
                            Some(i) => {
                                c.seeds = vec![config.seeds[i]];
                                c.skills = vec![config.skills[i].clone()];
                                let kind = if config.kind == RunKind::Snn { "snn" } else { "multipolicy" };
                                format!("{kind}_p{}_d{d}_T{switch}", config.seeds[i])
                            }
                            None => format!("com-proxy_d{d}_T{switch}"),
                        };
                        c.validate()?;
                        runs.push(RunSpec { name, config: c });
                    }
                }
            }
        }
    }
    Ok(runs)
}

/// Load skills for a downstream run: an SNN checkpoint, or a bank directory
/// of `skill_<i>.ckpt` files.
pub fn load_skills(path: &Path, kind: RunKind) -> Result<SkillSet> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    match kind {
        RunKind::Snn => Ok(SkillSet::Snn(load_policy_expecting(path, AGENT_DIM, 2)?)),
        RunKind::Multipolicy => {
            let mut bank = Vec::new();
            loop {
                let p = path.join(format!("skill_{}.ckpt", bank.len()));
                if !p.exists() {
                    break;
                }
                bank.push(load_policy_expecting(&p, AGENT_DIM, 2)?);
            }
            if bank.is_empty() {
                return Err(Error::MissingInput(path.join("skill_0.ckpt")));
            }
            Ok(SkillSet::Multi(bank))
        }
        RunKind::ComProxy => Err(config_err("kind", "com-proxy runs take no skills")),
    }
}

pub fn save_bank(dir: &Path, bank: &[SnnPolicy]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, p) in bank.iter().enumerate() {
        save_policy(&dir.join(format!("skill_{i}.ckpt")), p)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn visitation_extent(records: &[VisitationRecord]) -> f64 {
    let m = records.iter().map(|r| r.x.abs().max(r.y.abs())).fold(1.0, f64::max);
    (m * 1.05).ceil()
}

fn write_visitation_artifacts(dir: &Path, records: &[VisitationRecord]) -> Result<()> {
    write_visitation_csv(records, fs::File::create(dir.join("visitation.csv"))?)?;
    write_svg(records, visitation_extent(records), fs::File::create(dir.join("visitation.svg"))?)
}

fn prepare_dir(spec: &RunSpec) -> Result<PathBuf> {
    let dir = spec.config.output_dir.join(&spec.name);
    fs::create_dir_all(dir.join("checkpoints"))?;
    fs::write(dir.join("config.toml"), spec.config.to_toml()?)?;
    Ok(dir)
}

fn due(every: usize, iteration: usize) -> bool {
    every > 0 && (iteration + 1) % every == 0
}

#[derive(Debug, Serialize)]
struct PretrainSummary {
    final_mean_step_reward: f64,
    timesteps: usize,
    coverage: usize,
    diversity: crate::analysis::SkillDiversityReport,
}

/// Pre-train one run: progress CSV, checkpoints, final skills, visitation
/// and diversity report.
pub fn run_pretrain(spec: &RunSpec, log: &mut dyn Write) -> Result<PathBuf> {
    let cfg = &spec.config;
    let pc = &cfg.pretrain;
    let dir = prepare_dir(spec)?;
    let (skills, step_reward, timesteps) = match cfg.kind {
        RunKind::Multipolicy => {
            let (bank, steps) = train_multipolicy_skills(pc)?;
            save_bank(&dir.join("bank"), &bank)?;
            (SkillSet::Multi(bank), f64::NAN, steps)
        }
        _ => {
            let mut state = PretrainState::new(pc)?;
            let mut rows = Vec::with_capacity(pc.n_iterations);
            let mut last = 0.0;
            let mut steps = 0;
            for _ in 0..pc.n_iterations {
                let m = pretrain_iteration(&mut state, pc)?;
                writeln!(
                    log,
                    "{} it {:>4} speed {:.4} return {:.3} kl {:.5} accepted {}",
                    spec.name, m.iteration, m.mean_step_reward, m.mean_raw_return, m.step.kl, m.step.accepted
                )?;
                rows.push(ProgressRow::new(m.iteration, m.mean_raw_return, &m.step));
                last = m.mean_step_reward;
                steps += m.timesteps;
                if due(cfg.checkpoint_every, m.iteration) {
                    save_policy(&dir.join(format!("checkpoints/iter_{:05}.ckpt", m.iteration + 1)), &state.policy)?;
                }
            }
            write_progress(&rows, fs::File::create(dir.join("progress.csv"))?)?;
            save_policy(&dir.join("skills.ckpt"), &state.policy)?;
            (SkillSet::Snn(state.policy), last, steps)
        }
    };
    let env = pc.env();
    let records = visitation_run(
        &skills,
        &env,
        FINAL_VISITATION_ROLLOUTS,
        pc.horizon,
        crate::analysis::LatentMode::PerRolloutUniform,
        pc.seed,
    )?;
    write_visitation_artifacts(&dir, &records)?;
    let diversity = diversity_report(&records, skills.k(), DiversityThresholds::for_travel(pc.dynamics.v_max, pc.horizon))?;
    write_json(
        &dir.join("summary.json"),
        &PretrainSummary {
            final_mean_step_reward: step_reward,
            timesteps,
            coverage: coverage(&records, pc.mesh_density)?,
            diversity,
        },
    )?;
    Ok(dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct DownstreamSummary {
    pub final_success_rate: f64,
    pub final_mean_score: f64,
    pub timesteps: usize,
    pub reward_conserved: bool,
    pub skills_frozen: bool,
}

#[derive(Serialize)]
struct EvalRow {
    iteration: usize,
    success_rate: f64,
    mean_score: f64,
}

fn finish_downstream(dir: &Path, history: &[DownstreamMetrics], skills_frozen: bool) -> Result<DownstreamSummary> {
    let rows: Vec<_> = history
        .iter()
        .map(|m| ProgressRow::new(m.iteration, m.mean_return, &m.step))
        .collect();
    write_progress(&rows, fs::File::create(dir.join("progress.csv"))?)?;
    let mut w = csv::Writer::from_path(dir.join("eval.csv"))?;
    for m in history {
        if let Some(e) = m.eval {
            w.serialize(EvalRow {
                iteration: m.iteration,
                success_rate: e.success_rate,
                mean_score: e.mean_score,
            })?;
        }
    }
    w.flush()?;
    let last = history.iter().rev().find_map(|m| m.eval);
    let summary = DownstreamSummary {
        final_success_rate: last.map_or(f64::NAN, |e| e.success_rate),
        final_mean_score: last.map_or(f64::NAN, |e| e.mean_score),
        timesteps: history.iter().map(|m| m.timesteps).sum(),
        reward_conserved: history.iter().all(|m| m.reward_conserved),
        skills_frozen,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn log_downstream(log: &mut dyn Write, name: &str, m: &DownstreamMetrics) -> Result<()> {
    write!(
        log,
        "{name} it {:>4} return {:.4} success {:.3} kl {:.5}",
        m.iteration, m.mean_return, m.success_rate, m.step.kl
    )?;
    if let Some(e) = m.eval {
        write!(log, " eval_success {:.3} eval_score {:.3}", e.success_rate, e.mean_score)?;
    }
    writeln!(log)?;
    Ok(())
}

/// Train one manager (or the flat com-proxy policy).
pub fn run_downstream(spec: &RunSpec, log: &mut dyn Write) -> Result<(PathBuf, DownstreamSummary)> {
    let cfg = &spec.config;
    let dc = &cfg.downstream;
    let dir = prepare_dir(spec)?;
    let mut history = Vec::with_capacity(dc.n_iterations);
    let frozen = if cfg.kind == RunKind::ComProxy {
        let mut state = FlatState::new(dc, cfg.flat_policy.clone())?;
        for _ in 0..dc.n_iterations {
            let m = flat_iteration(&mut state, dc)?;
            log_downstream(log, &spec.name, &m)?;
            if due(cfg.checkpoint_every, m.iteration) {
                save_policy(&dir.join(format!("checkpoints/iter_{:05}.ckpt", m.iteration + 1)), &state.policy)?;
            }
            history.push(m);
        }
        save_policy(&dir.join("flat.ckpt"), &state.policy)?;
        true
    } else {
        let skills = load_skills(&cfg.skills[0], cfg.kind)?;
        let before = skills.parameters();
        let mut state = DownstreamState::new(dc, &skills)?;
        let mut frozen = true;
        for _ in 0..dc.n_iterations {
            let m = downstream_iteration(&mut state, &skills, dc)?;
            frozen &= skills
                .parameters()
                .iter()
                .zip(&before)
                .all(|(a, b)| a.to_bits() == b.to_bits());
            log_downstream(log, &spec.name, &m)?;
            if due(cfg.checkpoint_every, m.iteration) {
                save_manager(&dir.join(format!("checkpoints/iter_{:05}.ckpt", m.iteration + 1)), &state.manager)?;
            }
            history.push(m);
        }
        save_manager(&dir.join("manager.ckpt"), &state.manager)?;
        frozen
    };
    let summary = finish_downstream(&dir, &history, frozen)?;
    Ok((dir, summary))
}

#[derive(Parser, Debug)]
#[command(name = "snn-hrl", version, about = "Skill pre-training with stochastic networks and hierarchical control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pre-train skills on the speed reward.
    Pretrain(PretrainArgs),
    /// Train a manager over frozen skills, or the flat com-proxy baseline.
    Downstream(DownstreamArgs),
    /// Roll skills out and write visitation CSV/SVG, coverage and diversity.
    Visitation(VisitationArgs),
    /// Aggregate learning curves or analyze a visitation CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, num_args = 1..)]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Sweep one axis: `--sweep switch-time 10 50 100`, `--sweep alpha-h 0 0.01`,
    /// `--sweep integration concat bilinear`.
    #[arg(long, num_args = 2..)]
    pub sweep: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Validate the config, print the planned runs and exit.
    #[arg(long)]
    pub dry_run: bool,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub kind: Option<RunKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, num_args = 1..)]
    pub alpha_h: Vec<f64>,
    #[arg(long, num_args = 1..)]
    pub integration: Vec<String>,
    #[arg(long)]
    pub mesh_density: Option<f64>,
}

#[derive(Args, Debug)]
pub struct DownstreamArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// maze0, maze1, maze2, maze3 or gather.
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long, value_enum)]
    pub skill_mode: Option<RunKind>,
    /// Skill checkpoint (snn) or bank directory (multipolicy), one per seed.
    #[arg(long, num_args = 1..)]
    pub skills: Vec<PathBuf>,
    #[arg(long, num_args = 1..)]
    pub downstream_seeds: Vec<u64>,
    #[arg(long)]
    pub switch_time: Option<usize>,
    #[arg(long)]
    pub eval_episodes: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LatentModeArg {
    PerRollout,
    Fixed,
    RandomManager,
}

#[derive(Args, Debug)]
pub struct VisitationArgs {
    /// SNN checkpoint.
    #[arg(long, conflicts_with_all = ["bank", "gaussian"])]
    pub skills: Option<PathBuf>,
    /// Directory of `skill_<i>.ckpt` files.
    #[arg(long, conflicts_with = "gaussian")]
    pub bank: Option<PathBuf>,
    /// i.i.d. standard normal actions instead of trained skills.
    #[arg(long)]
    pub gaussian: bool,
    #[arg(long, value_enum, default_value = "per-rollout")]
    pub latent_mode: LatentModeArg,
    #[arg(long)]
    pub latent: Option<usize>,
    #[arg(long, default_value_t = 50)]
    pub switch_time: usize,
    /// Defaults to 100, or 1 for a random manager.
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Steps per rollout.
    #[arg(long, default_value_t = 500)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::mi::DEFAULT_MESH_DENSITY)]
    pub mesh_density: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Progress CSVs to aggregate into one mean/std curve.
    #[arg(long, num_args = 1..)]
    pub progress: Vec<PathBuf>,
    #[arg(long, default_value = "mean_return")]
    pub column: String,
    /// Visitation CSV to summarize.
    #[arg(long)]
    pub visitation: Option<PathBuf>,
    /// Number of latents in the visitation CSV.
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    #[arg(long, default_value_t = crate::mi::DEFAULT_MESH_DENSITY)]
    pub mesh_density: f64,
    #[arg(long, default_value_t = Dynamics::default().v_max)]
    pub v_max: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn parse_task(name: &str) -> Result<EnvConfig> {
    match name {
        "gather" => Ok(EnvConfig::gather()),
        _ => match name.strip_prefix("maze").and_then(|d| d.parse::<u8>().ok()) {
            Some(id) => EnvConfig::maze(id),
            None => Err(config_err("task", format!("unknown task {name:?}; expected maze0-maze3 or gather"))),
        },
    }
}

fn parse_integration(name: &str) -> Result<Integration> {
    match name {
        "concat" => Ok(Integration::Concat),
        "bilinear" => Ok(Integration::Bilinear),
        "plain" => Ok(Integration::Plain),
        _ => Err(config_err("integration", format!("unknown integration {name:?}"))),
    }
}

fn apply_sweep(cfg: &mut ExperimentConfig, sweep: &[String]) -> Result<()> {
    let Some((axis, values)) = sweep.split_first() else {
        return Ok(());
    };
    let num = |v: &String| v.parse::<f64>().map_err(|_| config_err("sweep", format!("bad value {v:?}")));
    match axis.as_str() {
        "switch-time" => {
            cfg.sweep.switch_time = values
                .iter()
                .map(|v| v.parse().map_err(|_| config_err("sweep", format!("bad switch time {v:?}"))))
                .collect::<Result<_>>()?
        }
        "alpha-h" => cfg.sweep.alpha_h = values.iter().map(num).collect::<Result<_>>()?,
        "integration" => cfg.sweep.integration = values.iter().map(|v| parse_integration(v)).collect::<Result<_>>()?,
        other => return Err(config_err("sweep", format!("unknown axis {other:?}"))),
    }
    Ok(())
}

fn base_config(mode: Mode, common: &CommonArgs, task: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            if common.preset.is_some() {
                return Err(Error::InvalidArgument("--preset and --config are exclusive".into()));
            }
            let c = ExperimentConfig::load(path)?;
            if c.mode != mode {
                return Err(config_err("mode", format!("config is for {:?}", c.mode)));
            }
            c
        }
        None => ExperimentConfig::new(mode, "runs"),
    };
    if let Some(t) = task {
        let env = parse_task(t)?;
        if common.config.is_some() {
            cfg.downstream.env = env;
        } else {
            cfg.downstream = DownstreamConfig::for_task(env);
        }
    }
    if let Some(p) = common.preset {
        cfg.apply_preset(p)?;
    }
    if !common.seeds.is_empty() {
        cfg.seeds = common.seeds.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(n) = common.checkpoint_every {
        cfg.checkpoint_every = n;
    }
    apply_sweep(&mut cfg, &common.sweep)?;
    Ok(cfg)
}

pub fn pretrain_config(args: &PretrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(Mode::Pretrain, &args.common, None)?;
    let p = &mut cfg.pretrain;
    let c = &args.common;
    if let Some(v) = c.iterations {
        p.n_iterations = v;
    }
    if let Some(v) = c.batch_size {
        p.batch_size = v;
    }
    if let Some(v) = c.horizon {
        p.horizon = v;
    }
    if let Some(v) = args.k {
        p.k = v;
    }
    if let Some(v) = args.mesh_density {
        p.mesh_density = v;
    }
    if let Some(v) = args.kind {
        cfg.kind = v;
    }
    if !args.alpha_h.is_empty() {
        cfg.sweep.alpha_h = args.alpha_h.clone();
    }
    if !args.integration.is_empty() {
        cfg.sweep.integration = args.integration.iter().map(|s| parse_integration(s)).collect::<Result<_>>()?;
    }
    Ok(cfg)
}

pub fn downstream_config(args: &DownstreamArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(Mode::Downstream, &args.common, args.task.as_deref())?;
    let d = &mut cfg.downstream;
    let c = &args.common;
    if let Some(v) = c.iterations {
        d.n_iterations = v;
    }
    if let Some(v) = c.batch_size {
        d.batch_size = v;
    }
    if let Some(v) = c.horizon {
        d.horizon = v;
    }
    if let Some(v) = args.switch_time {
        d.switch_time = v;
    }
    if let Some(v) = args.eval_episodes {
        d.eval_episodes = v;
    }
    if let Some(v) = args.eval_every {
        d.eval_every = v;
    }
    if let Some(v) = args.skill_mode {
        cfg.kind = v;
    }
    if !args.skills.is_empty() {
        cfg.skills = args.skills.clone();
    }
    if !args.downstream_seeds.is_empty() {
        cfg.downstream_seeds = args.downstream_seeds.clone();
    }
    Ok(cfg)
}

fn sink(quiet: bool) -> Box<dyn Write> {
    if quiet {
        Box::new(std::io::sink())
    } else {
        Box::new(std::io::stderr())
    }
}

fn run_planned(cfg: &ExperimentConfig, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let runs = plan_runs(cfg)?;
    if common.dry_run {
        for r in &runs {
            writeln!(out, "{}", r.name)?;
        }
        writeln!(out, "{} runs planned", runs.len())?;
        return Ok(());
    }
    let mut log = sink(common.quiet);
    for r in &runs {
        let dir = match cfg.mode {
            Mode::Pretrain => run_pretrain(r, log.as_mut())?,
            Mode::Downstream => run_downstream(r, log.as_mut())?.0,
        };
        writeln!(out, "{}", dir.display())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VisitationSummary {
    records: usize,
    coverage: usize,
    diversity: Option<crate::analysis::SkillDiversityReport>,
}

pub fn cmd_visitation(args: &VisitationArgs) -> Result<()> {
    let skills = if let Some(p) = &args.skills {
        load_skills(p, RunKind::Snn)?
    } else if let Some(p) = &args.bank {
        load_skills(p, RunKind::Multipolicy)?
    } else if args.gaussian {
        SkillSet::Snn(SnnPolicy::zeros(AGENT_DIM, 2, 1, Integration::Plain, MlpSpec::default())?)
    } else {
        return Err(Error::InvalidArgument("one of --skills, --bank or --gaussian is required".into()));
    };
    let mode = match args.latent_mode {
        LatentModeArg::PerRollout => LatentMode::PerRolloutUniform,
        LatentModeArg::Fixed => LatentMode::Fixed(
            args.latent
                .ok_or_else(|| Error::InvalidArgument("--latent-mode fixed needs --latent".into()))?,
        ),
        LatentModeArg::RandomManager => LatentMode::RandomManager(args.switch_time),
    };
    let rollouts = args
        .rollouts
        .unwrap_or(if mode == LatentMode::RandomManager(args.switch_time) { 1 } else { FINAL_VISITATION_ROLLOUTS });
    let records = visitation_run(&skills, &EnvConfig::pretrain(), rollouts, args.steps, mode, args.seed)?;
    fs::create_dir_all(&args.out)?;
    write_visitation_artifacts(&args.out, &records)?;
    let diversity = match mode {
        LatentMode::RandomManager(_) => None,
        _ => Some(diversity_report(
            &records,
            skills.k(),
            DiversityThresholds::for_travel(Dynamics::default().v_max, args.steps),
        )?),
    };
    write_json(
        &args.out.join("summary.json"),
        &VisitationSummary {
            records: records.len(),
            coverage: coverage(&records, args.mesh_density)?,
            diversity,
        },
    )
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<()> {
    if args.progress.is_empty() && args.visitation.is_none() {
        return Err(Error::InvalidArgument("nothing to analyze: pass --progress or --visitation".into()));
    }
    if !args.progress.is_empty() {
        let curve = learning_curve(&args.progress, &args.column)?;
        let path = if args.visitation.is_some() {
            args.out.join("curve.csv")
        } else {
            args.out.clone()
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_curve_csv(&curve, fs::File::create(path)?)?;
    }
    if let Some(v) = &args.visitation {
        if !v.exists() {
            return Err(Error::MissingInput(v.clone()));
        }
        let records = read_visitation_csv(fs::File::open(v)?)?;
        let horizon = records.iter().map(|r| r.timestep + 1).max().unwrap_or(1);
        let path = if args.progress.is_empty() {
            args.out.clone()
        } else {
            args.out.join("visitation_summary.json")
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        write_json(
            &path,
            &VisitationSummary {
                records: records.len(),
                coverage: coverage(&records, args.mesh_density)?,
                diversity: Some(diversity_report(&records, args.k, DiversityThresholds::for_travel(args.v_max, horizon))?),
            },
        )?;
    }
    Ok(())
}

/// Run a parsed command, writing run directories (or the dry-run plan) to
/// `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Pretrain(a) => run_planned(&pretrain_config(a)?, &a.common, out),
        Command::Downstream(a) => run_planned(&downstream_config(a)?, &a.common, out),
        Command::Visitation(a) => cmd_visitation(a),
        Command::Analyze(a) => cmd_analyze(a),
    }
}

/// One-line JSON error description.
pub fn error_line(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let err = Error::InvalidArgument(e.kind().to_string());
            eprintln!("{}", error_line(&err));
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &mut std::io::stdout()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("snn-hrl").chain(args.iter().copied())).unwrap()
    }

    fn pretrain_cfg(args: &[&str]) -> Result<ExperimentConfig> {
        match parse(args).command {
            Command::Pretrain(a) => pretrain_config(&a),
            _ => unreachable!(),
        }
    }

    fn downstream_cfg(args: &[&str]) -> Result<ExperimentConfig> {
        match parse(args).command {
            Command::Downstream(a) => downstream_config(&a),
            _ => unreachable!(),
        }
    }

    #[test]
    fn paper_scale_preset() {
        let c = pretrain_cfg(&["pretrain", "--preset", "paper-scale"]).unwrap();
        assert_eq!(c.pretrain.batch_size, 50_000);
        assert_eq!(c.pretrain.horizon, 500);
        assert_eq!(c.pretrain.k, 6);
        assert_eq!(c.pretrain.mesh_density, 10.0);
        assert_eq!(c.pretrain.policy.hidden, vec![32, 32]);
        let d = downstream_cfg(&["downstream", "--task", "gather", "--preset", "paper-scale", "--skill-mode", "com-proxy"]).unwrap();
        assert_eq!((d.downstream.batch_size, d.downstream.horizon, d.downstream.switch_time), (100_000, 5_000, 10));
        let d = downstream_cfg(&["downstream", "--task", "maze0", "--preset", "paper-scale", "--skill-mode", "com-proxy"]).unwrap();
        assert_eq!((d.downstream.batch_size, d.downstream.horizon, d.downstream.switch_time), (1_000_000, 10_000, 500));
        let g = downstream_cfg(&["downstream", "--preset", "gather-benchmark", "--skill-mode", "com-proxy"]).unwrap();
        assert!(matches!(g.downstream.env.task, EnvKind::Gather { .. }));
        assert_eq!((g.downstream.batch_size, g.downstream.horizon), (50_000, 500));
    }

    #[test]
    fn desk_task_defaults() {
        let g = downstream_cfg(&["downstream", "--task", "gather", "--skill-mode", "com-proxy"]).unwrap();
        assert_eq!((g.downstream.horizon, g.downstream.switch_time), (400, 10));
        let m = downstream_cfg(&["downstream", "--task", "maze2", "--skill-mode", "com-proxy"]).unwrap();
        assert_eq!((m.downstream.horizon, m.downstream.switch_time), (400, 50));
        let t = downstream_cfg(&["downstream", "--task", "gather", "--switch-time", "100", "--skill-mode", "com-proxy"]).unwrap();
        assert_eq!(t.downstream.switch_time, 100);
    }

    #[test]
    fn alpha_sweep_expands_per_seed() {
        let c = pretrain_cfg(&["pretrain", "--alpha-h", "0", "0.001", "0.01", "0.1", "--seeds", "1", "2"]).unwrap();
        let runs = plan_runs(&c).unwrap();
        assert_eq!(runs.len(), 8);
        let alphas: Vec<f64> = runs.iter().take(4).map(|r| r.config.pretrain.mi.alpha_h).collect();
        assert_eq!(alphas, vec![0.0, 0.001, 0.01, 0.1]);
        assert!(runs.iter().all(|r| r.config.sweep == SweepAxes::default()));
    }

    #[test]
    fn seed_grid_is_product() {
        let c = downstream_cfg(&[
            "downstream", "--task", "maze0", "--switch-time", "50", "--skill-mode", "snn",
            "--seeds", "0", "1", "2", "3", "4", "--downstream-seeds", "0", "1",
            "--skills", "a", "b", "c", "d", "e",
        ])
        .unwrap();
        let runs = plan_runs(&c).unwrap();
        assert_eq!(runs.len(), 10);
        let mut names: Vec<_> = runs.iter().map(|r| r.name.clone()).collect();
        names.dedup();
        assert_eq!(names.len(), 10);
        let c = downstream_cfg(&[
            "downstream", "--skill-mode", "snn", "--skills", "a", "--sweep", "switch-time", "10", "50", "100",
        ])
        .unwrap();
        let t: Vec<_> = plan_runs(&c).unwrap().iter().map(|r| r.config.downstream.switch_time).collect();
        assert_eq!(t, vec![10, 50, 100]);
    }

    #[test]
    fn invalid_fields_are_named() {
        let e = pretrain_cfg(&["pretrain", "--k", "1"]).and_then(|c| plan_runs(&c)).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "pretrain.k"), "{e}");
        let e = downstream_cfg(&["downstream", "--skill-mode", "snn"]).and_then(|c| plan_runs(&c)).unwrap_err();
        assert!(matches!(e, Error::Config { ref field, .. } if field == "skills"));
        assert!(downstream_cfg(&["downstream", "--task", "maze9"]).is_err());
        assert!(pretrain_cfg(&["pretrain", "--sweep", "speed", "1", "2"]).is_err());
    }

    #[test]
    fn unknown_keys_and_versions_rejected() {
        let mut text = ExperimentConfig::new(Mode::Pretrain, "out").to_toml().unwrap();
        assert!(ExperimentConfig::from_toml(&text).is_ok());
        let typo = text.replace("[pretrain]\n", "[pretrain]\nbatch_sise = 5\n");
        assert!(matches!(ExperimentConfig::from_toml(&typo), Err(Error::ConfigParse(_))));
        text = text.replace("version = 1", "version = 7");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn dry_run_simulates_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("runs");
        let cli = parse(&["pretrain", "--seeds", "0", "1", "--out", out.to_str().unwrap(), "--dry-run"]);
        let mut buf = Vec::new();
        execute(&cli, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("2 runs planned"));
        assert!(!out.exists());
    }

    #[test]
    fn error_line_is_json() {
        let e = config_err("pretrain.k", "must be >= 2");
        let v: serde_json::Value = serde_json::from_str(&error_line(&e)).unwrap();
        assert_eq!(v["error"]["kind"], "config");
    }

    fn arb_config() -> impl Strategy<Value = ExperimentConfig> {
        (
            prop::collection::vec(0u64..i64::MAX as u64, 1..4),
            0.0f64..1.0,
            1usize..600,
            prop::bool::ANY,
            prop::collection::vec(1usize..100, 0..3),
            prop::sample::select(vec!["maze0", "maze1", "maze2", "maze3", "gather"]),
        )
            .prop_map(|(seeds, alpha, iters, bilinear, switches, task)| {
                let mut c = ExperimentConfig::new(Mode::Downstream, "runs/x");
                c.seeds = seeds.clone();
                c.skills = seeds.iter().map(|s| PathBuf::from(format!("skills/{s}.ckpt"))).collect();
                c.pretrain.mi.alpha_h = alpha;
                c.pretrain.n_iterations = iters;
                c.pretrain.integration = if bilinear { Integration::Bilinear } else { Integration::Concat };
                c.downstream.env = parse_task(task).unwrap();
                c.sweep.switch_time = switches;
                c
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn config_round_trips(c in arb_config()) {
            let text = c.to_toml().unwrap();
            prop_assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
        }
    }
}
