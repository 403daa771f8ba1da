//! Scenario configuration and reproducible run directories.
//!
//! A run directory is self-describing: it holds the resolved config
//! snapshot, per-iteration statistics, the final event stream, the final
//! scored population and run metadata. Re-running the same config with the
//! same seed reproduces every file byte for byte.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Result, SimError};
use crate::events::{read_events_csv, RawEvent};
use crate::network::{build_cordon_from_ids, load_network, validate, Cordon, Network};
use crate::population::{load_population, save_population, Population};
use crate::replanning::{run_iterations, IterationStats, ScoreRow, StrategyConfig};
use crate::scoring::ScoringParams;
use crate::tolling::{
    nyc_cbd_base_periods, Direction, TollKind, TollPeriod, TollScheme,
};
use crate::transit::{load_schedule, TransitSchedule};
use crate::Mode;

pub const NYC_CBD_BASE: &str = "nyc-cbd-base";

/// Toll section of the scenario config. A preset fills periods and rules;
/// explicit fields override it. The charging region comes from
/// `inside_nodes`, falling back to the network file's cordon region.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TollConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inside_nodes: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<TollPeriod>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub once_per_day: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charged_modes: Option<Vec<Mode>>,
}

impl TollConfig {
    pub fn preset(name: &str) -> Self {
        TollConfig {
            preset: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn resolve(&self, net: &Network) -> Result<TollScheme> {
        let mut periods = None;
        let mut once_per_day = true;
        let mut direction = Direction::Both;
        let mut kind_name = "cordon".to_string();
        if let Some(preset) = &self.preset {
            if preset != NYC_CBD_BASE {
                return Err(SimError::UnknownTollPreset(preset.clone()));
            }
            periods = Some(nyc_cbd_base_periods());
        }
        if let Some(p) = &self.periods {
            periods = Some(p.clone());
        }
        if let Some(o) = self.once_per_day {
            once_per_day = o;
        }
        if let Some(d) = self.direction {
            direction = d;
        }
        if let Some(k) = &self.kind {
            kind_name = k.clone();
        } else if self.links.is_some() {
            kind_name = "link".to_string();
        }
        let periods = periods.ok_or_else(|| {
            SimError::Config("toll: no periods given and no preset named".to_string())
        })?;
        let charged_modes: BTreeSet<Mode> = match &self.charged_modes {
            Some(modes) => modes.iter().copied().collect(),
            None => BTreeSet::from([Mode::Car]),
        };
        let kind = match kind_name.as_str() {
            "link" => {
                let ids = self.links.as_ref().ok_or_else(|| {
                    SimError::Config("toll: link scheme without links".to_string())
                })?;
                let mut links = Vec::with_capacity(ids.len());
                for id in ids {
                    links.push(net.link_idx(id).ok_or_else(|| {
                        SimError::DanglingReference {
                            context: "toll links".to_string(),
                            kind: "link",
                            id: id.clone(),
                        }
                    })?);
                }
                TollKind::Links(links)
            }
            "cordon" => {
                let inside: Vec<String> = match (&self.inside_nodes, &net.cordon_nodes) {
                    (Some(nodes), _) => nodes.clone(),
                    (None, Some(region)) => region.clone(),
                    (None, None) => {
                        return Err(SimError::Config(
                            "toll: cordon scheme but neither inside_nodes nor a network cordon region given"
                                .to_string(),
                        ))
                    }
                };
                TollKind::Cordon(build_cordon_from_ids(
                    net,
                    inside.iter().map(|s| s.as_str()),
                )?)
            }
            other => {
                return Err(SimError::Config(format!(
                    "toll: unknown scheme kind \"{other}\""
                )))
            }
        };
        TollScheme::new(kind, periods, once_per_day, charged_modes, direction)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub network: PathBuf,
    pub population: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transit: Option<PathBuf>,
    #[serde(default)]
    pub scoring: ScoringParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toll: Option<TollConfig>,
    #[serde(default)]
    pub strategy: StrategyConfig,
    pub iterations: usize,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_scale() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("run")
}

impl ScenarioConfig {
    /// Loads a config file and resolves its paths relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let mut config: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| SimError::parse(path, &e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.network = absolutize(base, &config.network);
        config.population = absolutize(base, &config.population);
        config.transit = config.transit.as_ref().map(|t| absolutize(base, t));
        config.output = absolutize(base, &config.output);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(SimError::Config("iterations must be at least 1".to_string()));
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(SimError::Config(format!(
                "scale must lie in (0, 1], got {}",
                self.scale
            )));
        }
        self.scoring.validate()?;
        self.strategy.validate()
    }
}

/// Resolves `p` against the config file's directory and pins it to an
/// absolute path, so the snapshot in a run directory stays valid no matter
/// where analysis runs from.
fn absolutize(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    };
    std::path::absolute(&joined).unwrap_or(joined)
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub output: Option<PathBuf>,
    pub toll_preset: Option<String>,
    /// Forces an empty toll scheme (baseline runs).
    pub no_toll: bool,
}

impl Overrides {
    fn apply(&self, config: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(iterations) = self.iterations {
            config.iterations = iterations;
        }
        if let Some(out) = &self.output {
            config.output = out.clone();
        }
        if self.no_toll {
            config.toll = None;
        } else if let Some(preset) = &self.toll_preset {
            let inside = config.toll.as_ref().and_then(|t| t.inside_nodes.clone());
            config.toll = Some(TollConfig {
                preset: Some(preset.clone()),
                inside_nodes: inside,
                ..Default::default()
            });
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub version: String,
    pub iterations: usize,
    pub converged: bool,
    /// Fingerprint of the network file the run used; compare refuses runs
    /// with different networks.
    pub network_hash: String,
    /// Travelers still en route at the end of the horizon.
    pub stuck: usize,
}

fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| SimError::io(path, e))?;
    Ok(format!("{:016x}", crate::fnv1a(&bytes)))
}

/// Runs a scenario end to end and fills the run directory.
pub fn run_scenario(config_path: impl AsRef<Path>, overrides: &Overrides) -> Result<PathBuf> {
    let mut config = ScenarioConfig::load(config_path)?;
    overrides.apply(&mut config);
    config.validate()?;

    let net = load_network(&config.network)?;
    let structural = validate(&net, None);
    if !structural.is_empty() {
        return Err(SimError::Config(format!(
            "network failed validation: {}",
            structural
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    let mut pop = load_population(&config.population, &net)?;
    let schedule = match &config.transit {
        Some(path) => load_schedule(path, &net)?,
        None => TransitSchedule::default(),
    };
    let toll = config.toll.as_ref().map(|t| t.resolve(&net)).transpose()?;
    let stats_cordon = stats_cordon(&net, toll.as_ref())?;

    let out_dir = config.output.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| SimError::io(&out_dir, e))?;

    // Snapshot before running so a crashed run still documents its inputs.
    let snapshot = serde_json::to_string_pretty(&config).expect("config serialization");
    std::fs::write(out_dir.join("config.json"), snapshot)
        .map_err(|e| SimError::io(out_dir.join("config.json"), e))?;

    let output = run_iterations(
        &net,
        &mut pop,
        &schedule,
        toll.as_ref(),
        &config.scoring,
        &config.strategy,
        config.iterations,
        config.scale,
        config.seed,
        stats_cordon.as_ref(),
    )?;

    write_stats_csv(&output.stats, &out_dir.join("iteration_stats.csv"))?;
    write_scores_csv(&output.score_rows, &pop, &out_dir.join("scores.csv"))?;
    output
        .final_events
        .write_csv(&net, &pop, &schedule, out_dir.join("events.csv"))?;
    save_population(&pop, &net, out_dir.join("population.json"))?;

    let metadata = RunMetadata {
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        iterations: config.iterations,
        converged: output.converged,
        network_hash: hash_file(&config.network)?,
        stuck: output.final_stuck,
    };
    let text = serde_json::to_string_pretty(&metadata).expect("metadata serialization");
    std::fs::write(out_dir.join("metadata.json"), text)
        .map_err(|e| SimError::io(out_dir.join("metadata.json"), e))?;

    Ok(out_dir)
}

/// Cordon used for per-iteration entry statistics: the toll scheme's cordon
/// when present, else the network's shipped region.
fn stats_cordon(net: &Network, toll: Option<&TollScheme>) -> Result<Option<Cordon>> {
    if let Some(scheme) = toll {
        if let TollKind::Cordon(c) = &scheme.kind {
            return Ok(Some(c.clone()));
        }
    }
    match &net.cordon_nodes {
        Some(region) => Ok(Some(build_cordon_from_ids(
            net,
            region.iter().map(|s| s.as_str()),
        )?)),
        None => Ok(None),
    }
}

fn write_stats_csv(stats: &[IterationStats], path: &Path) -> Result<()> {
    let mut out = String::from(
        "iteration,mean_score,std_score,share_car,share_pt,share_walk,share_bike,cordon_entries,convergence_metric\n",
    );
    for s in stats {
        let metric = s
            .convergence_metric
            .map(|m| format!("{m}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.iteration,
            s.mean_score,
            s.std_score,
            s.shares.car,
            s.shares.pt,
            s.shares.walk,
            s.shares.bike,
            s.cordon_entries,
            metric
        ));
    }
    std::fs::write(path, out).map_err(|e| SimError::io(path, e))
}

fn write_scores_csv(rows: &[ScoreRow], pop: &Population, path: &Path) -> Result<()> {
    let mut out = String::from("iteration,person,score,executed_flag\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.iteration,
            pop.persons[row.person as usize].id,
            row.score,
            row.executed
        ));
    }
    std::fs::write(path, out).map_err(|e| SimError::io(path, e))
}

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

/// A completed run directory, loaded lazily.
pub struct RunDir {
    pub path: PathBuf,
    pub config: ScenarioConfig,
    pub metadata: RunMetadata,
}

impl RunDir {
    pub fn load(path: impl AsRef<Path>) -> Result<RunDir> {
        let path = path.as_ref().to_path_buf();
        let need = |name: &str| -> Result<PathBuf> {
            let p = path.join(name);
            if !p.exists() {
                return Err(SimError::IncompleteRunDir {
                    path: path.clone(),
                    missing: name.to_string(),
                });
            }
            Ok(p)
        };
        let config_path = need("config.json")?;
        let metadata_path = need("metadata.json")?;
        need("events.csv")?;
        need("population.json")?;
        let config = ScenarioConfig::load(&config_path)?;
        let text =
            std::fs::read_to_string(&metadata_path).map_err(|e| SimError::io(&metadata_path, e))?;
        let metadata: RunMetadata =
            serde_json::from_str(&text).map_err(|e| SimError::parse(&metadata_path, &e))?;
        Ok(RunDir {
            path,
            config,
            metadata,
        })
    }

    pub fn network(&self) -> Result<Network> {
        load_network(&self.config.network)
    }

    pub fn events(&self) -> Result<Vec<RawEvent>> {
        read_events_csv(self.path.join("events.csv"))
    }

    pub fn population(&self, net: &Network) -> Result<Population> {
        load_population(self.path.join("population.json"), net)
    }

    pub fn cordon(&self, net: &Network) -> Result<Option<Cordon>> {
        let toll = self
            .config
            .toll
            .as_ref()
            .map(|t| t.resolve(net))
            .transpose()?;
        stats_cordon(net, toll.as_ref())
    }
}

/// Writes all analysis outputs for one run into `<run>/analysis/`.
pub fn analyze_run(run: &RunDir, hour: usize) -> Result<PathBuf> {
    let net = run.network()?;
    let events = run.events()?;
    let pop = run.population(&net)?;
    let out = run.path.join("analysis");
    std::fs::create_dir_all(&out).map_err(|e| SimError::io(&out, e))?;

    let volumes = analysis::link_volumes(&events, &net);
    analysis::write_link_volumes_csv(&volumes, out.join("link_volumes.csv"))?;

    let ridership = analysis::pt_ridership(&events);
    analysis::write_pt_ridership_csv(&ridership, out.join("pt_ridership.csv"))?;

    let stats = analysis::score_stats(&pop)?;
    let text = format!(
        "mean,std,minimum,maximum,median\n{},{},{},{},{}\n",
        stats.mean, stats.std, stats.min, stats.max, stats.median
    );
    std::fs::write(out.join("score_stats.csv"), text)
        .map_err(|e| SimError::io(out.join("score_stats.csv"), e))?;

    if let Some(cordon) = run.cordon(&net)? {
        let metrics = analysis::cordon_metrics(&events, &cordon, &net);
        analysis::write_cordon_metrics_csv(&metrics, out.join("cordon_entries.csv"))?;
        analysis::write_cordon_summary_csv(&metrics, out.join("cordon_summary.csv"))?;
    }

    let geojson = analysis::export_geojson(&net, &volumes, hour)?;
    let geo_path = out.join(format!("volumes_h{hour}.geojson"));
    std::fs::write(&geo_path, geojson).map_err(|e| SimError::io(&geo_path, e))?;

    Ok(out)
}

/// Pairwise comparison of a baseline run (without pricing) against a policy
/// run (with pricing). Refused unless both runs used the same seed and
/// network, or `force` is set.
pub fn compare_runs(
    baseline_dir: impl AsRef<Path>,
    policy_dir: impl AsRef<Path>,
    force: bool,
    out_dir: impl AsRef<Path>,
) -> Result<PathBuf> {
    let baseline = RunDir::load(baseline_dir)?;
    let policy = RunDir::load(policy_dir)?;
    if !force {
        if baseline.metadata.seed != policy.metadata.seed {
            return Err(SimError::CompareMismatch(format!(
                "seeds differ ({} vs {})",
                baseline.metadata.seed, policy.metadata.seed
            )));
        }
        if baseline.metadata.network_hash != policy.metadata.network_hash {
            return Err(SimError::CompareMismatch(
                "network files differ".to_string(),
            ));
        }
    }

    let net = baseline.network()?;
    let base_events = baseline.events()?;
    let policy_events = policy.events()?;
    let base_pop = baseline.population(&net)?;
    let policy_pop = policy.population(&net)?;

    let out = out_dir.as_ref().to_path_buf();
    std::fs::create_dir_all(&out).map_err(|e| SimError::io(&out, e))?;

    let share = analysis::mode_share(&policy_pop, &base_pop)?;
    analysis::write_mode_share_csv(&share, out.join("mode_share.csv"))?;

    let base_stats = analysis::score_stats(&base_pop)?;
    let policy_stats = analysis::score_stats(&policy_pop)?;
    analysis::write_score_stats_csv(&base_stats, &policy_stats, out.join("score_stats.csv"))?;

    let base_volumes = analysis::link_volumes(&base_events, &net);
    let policy_volumes = analysis::link_volumes(&policy_events, &net);
    analysis::write_volume_deltas_csv(
        &base_volumes,
        &policy_volumes,
        out.join("volume_deltas.csv"),
    )?;

    // The policy run's cordon (or the network region) measures both runs.
    let cordon = policy.cordon(&net)?.or(baseline.cordon(&net)?);
    let mut summary = String::new();
    summary.push_str(&format!(
        "baseline: {}\npolicy:   {}\nseed: {}\n\n",
        baseline.path.display(),
        policy.path.display(),
        baseline.metadata.seed
    ));
    summary.push_str(&format!(
        "mean executed score: {} -> {} (diff {:+.4})\n",
        base_stats.mean,
        policy_stats.mean,
        policy_stats.mean - base_stats.mean
    ));
    if let Some(cordon) = cordon {
        let base_m = analysis::cordon_metrics(&base_events, &cordon, &net);
        let policy_m = analysis::cordon_metrics(&policy_events, &cordon, &net);
        let deltas = format!(
            "metric,without,with,delta\n\
             cordon_entries,{},{},{}\n\
             unique_entering_persons,{},{},{}\n\
             vkt_inside,{},{},{}\n\
             revenue,{},{},{}\n",
            base_m.total_entries(),
            policy_m.total_entries(),
            policy_m.total_entries() as i64 - base_m.total_entries() as i64,
            base_m.unique_entering_persons,
            policy_m.unique_entering_persons,
            policy_m.unique_entering_persons as i64 - base_m.unique_entering_persons as i64,
            base_m.vkt_inside,
            policy_m.vkt_inside,
            policy_m.vkt_inside - base_m.vkt_inside,
            base_m.revenue,
            policy_m.revenue,
            policy_m.revenue - base_m.revenue,
        );
        std::fs::write(out.join("cordon_deltas.csv"), deltas)
            .map_err(|e| SimError::io(out.join("cordon_deltas.csv"), e))?;
        summary.push_str(&format!(
            "cordon entries: {} -> {}\nrevenue: {} -> {}\nvkt inside: {:.3} -> {:.3}\n",
            base_m.total_entries(),
            policy_m.total_entries(),
            base_m.revenue,
            policy_m.revenue,
            base_m.vkt_inside,
            policy_m.vkt_inside,
        ));
    }
    std::fs::write(out.join("summary.txt"), summary)
        .map_err(|e| SimError::io(out.join("summary.txt"), e))?;

    Ok(out)
}
