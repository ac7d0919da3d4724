//! Grid experiments over `(k, method)` cells with table and per-instance
//! outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{filter_instances, select_global, select_random, tkmia_attack, AttackConfig, AttackOutcome, Method, Scheme};
use crate::baselines::{run_baseline, Baseline, BaselineSpec};
use crate::dataset::{self, write_atomic, Instance};
use crate::error::{Error, Result};
use crate::harness::synthetic::{gen_synthetic, SyntheticSpec};
use crate::metrics::{self, delta_report, map_at_k_per_category, AggregateReport, MetricsRecord, RowLabel, SideSummary};
use crate::model::{train_bce, Scorer, TrainConfig};
use crate::ranking::{LabelVector, SpecifiedSet};

/// How `mAP@k` is aggregated in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    #[default]
    SampleMean,
    PerCategory,
}

/// Where the instances come from. A synthetic source is split: the first
/// `train_fraction` of instances train the victim (when one is trained) and
/// the rest are attacked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Path(PathBuf),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VictimSource {
    Path(PathBuf),
    Train(TrainConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    pub victim: VictimSource,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    pub k_values: Vec<usize>,
    pub scheme: Scheme,
    pub methods: Vec<Method>,
    /// Settings shared by every method; `k` and `scheme` are overwritten per
    /// cell.
    #[serde(default)]
    pub attack: AttackConfig,
    /// Per-method overrides keyed by method tag.
    #[serde(default)]
    pub method_attack: BTreeMap<String, AttackConfig>,
    #[serde(default = "default_cap")]
    pub max_instances: usize,
    #[serde(default)]
    pub map_mode: MapMode,
    #[serde(default)]
    pub seed: u64,
    pub output_csv: PathBuf,
    pub output_jsonl: PathBuf,
}

fn default_train_fraction() -> f64 {
    0.5
}

fn default_cap() -> usize {
    1000
}

/// Preset iteration budgets for sweeps; 300 is the default budget.
pub const ITERATION_GRID: [usize; 3] = [100, 300, 500];

/// Preset values for learning-rate and `α` sweeps.
pub const HYPERPARAMETER_GRID: [f64; 4] = [1e-3, 5e-4, 1e-4, 5e-5];

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::arg("k grid must be non-empty"));
        }
        if self.methods.is_empty() {
            return Err(Error::arg("method list must be non-empty"));
        }
        if self.max_instances == 0 {
            return Err(Error::arg("instance cap must be positive"));
        }
        if !(0.0..1.0).contains(&self.train_fraction) {
            return Err(Error::arg("train fraction must lie in [0, 1)"));
        }
        for &k in &self.k_values {
            self.cell_config(Method::Tkmia, k).validate()?;
        }
        for tag in self.method_attack.keys() {
            tag.parse::<Method>()?;
        }
        Ok(())
    }

    /// Effective attack settings for one method in the cell for `k`.
    pub fn cell_config(&self, method: Method, k: usize) -> AttackConfig {
        let base = self.method_attack.get(method.tag()).unwrap_or(&self.attack);
        AttackConfig {
            k,
            scheme: self.scheme.clone(),
            ..base.clone()
        }
    }

    pub fn s_size(&self) -> usize {
        match &self.scheme {
            Scheme::Global { categories } => categories.len(),
            Scheme::Random { m } => *m,
        }
    }
}

/// One line of the per-instance outcome file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub k: usize,
    pub s_size: usize,
    pub instance: usize,
    #[serde(flatten)]
    pub outcome: AttackOutcome,
    pub perturbation_norm: f64,
    pub clean: MetricsRecord,
    pub perturbed: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<AggregateReport>,
    pub records: Vec<InstanceRecord>,
}

impl ExperimentResult {
    pub fn csv(&self) -> String {
        metrics::to_csv(&self.rows)
    }

    pub fn jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }
}

/// Attack set of one cell: instance indices and their specified sets,
/// identical for every method.
pub fn cell_targets(
    data: &[Instance],
    scheme: &Scheme,
    k: usize,
    cap: usize,
    seed: u64,
) -> Result<Vec<(usize, SpecifiedSet)>> {
    let mut targets = match scheme {
        Scheme::Global { categories } => select_global(data, categories)?
            .into_iter()
            .filter(|(i, s)| data[*i].y.relevant_count() >= k + s.len())
            .collect::<Vec<_>>(),
        Scheme::Random { m } => filter_instances(data, k, *m)
            .into_iter()
            .map(|i| Ok((i, select_random(&data[i], *m, k, derive_seed(seed, k, i))?)))
            .collect::<Result<Vec<_>>>()?,
    };
    targets.truncate(cap);
    Ok(targets)
}

/// SplitMix64 over (seed, k, instance).
fn derive_seed(seed: u64, k: usize, instance: usize) -> u64 {
    let mut z = seed
        .wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((instance as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_method(model: &Scorer, inst: &Instance, s: &SpecifiedSet, method: Method, config: &AttackConfig) -> Result<AttackOutcome> {
    match method {
        Method::Tkmia => tkmia_attack(model, inst, s, config),
        other => run_baseline(
            model,
            inst,
            s,
            &BaselineSpec {
                method: Baseline::try_from(other)?,
                config: config.clone(),
            },
        ),
    }
}

fn side_summary(
    records: &[MetricsRecord],
    scores: &[&[f64]],
    labels: &[&LabelVector],
    k: usize,
    mode: MapMode,
) -> Result<SideSummary> {
    let mut summary = SideSummary::from_records(records)?;
    if mode == MapMode::PerCategory {
        let samples: Vec<(&[f64], &LabelVector)> = scores.iter().copied().zip(labels.iter().copied()).collect();
        summary.map_at_k = map_at_k_per_category(&samples, k)?;
    }
    Ok(summary)
}

/// Runs every cell against an already loaded victim and attack set.
pub fn run_grid(config: &ExperimentConfig, model: &Scorer, data: &[Instance]) -> Result<ExperimentResult> {
    config.validate()?;
    let s_size = config.s_size();
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &k in &config.k_values {
        let targets = cell_targets(data, &config.scheme, k, config.max_instances, config.seed)?;
        let label = |method: Method| RowLabel { k, s_size, method: method.tag().to_string() };
        if targets.is_empty() {
            rows.extend(config.methods.iter().map(|&m| AggregateReport::empty(label(m))));
            continue;
        }
        let clean_scores: Vec<Vec<f64>> = targets
            .iter()
            .map(|(i, _)| model.outputs(&data[*i].x))
            .collect::<Result<_>>()?;
        let labels: Vec<&LabelVector> = targets.iter().map(|(i, _)| &data[*i].y).collect();
        let clean: Vec<MetricsRecord> = clean_scores
            .iter()
            .zip(&labels)
            .map(|(s, y)| MetricsRecord::evaluate(s, y, k))
            .collect::<Result<_>>()?;
        let clean_refs: Vec<&[f64]> = clean_scores.iter().map(Vec::as_slice).collect();
        let clean_summary = side_summary(&clean, &clean_refs, &labels, k, config.map_mode)?;

        for &method in &config.methods {
            if method == Method::Kfool {
                rows.push(AggregateReport::not_run(label(method), targets.len()));
                continue;
            }
            let attack_cfg = config.cell_config(method, k);
            let outcomes: Vec<AttackOutcome> = targets
                .par_iter()
                .map(|(i, s)| run_method(model, &data[*i], s, method, &attack_cfg))
                .collect::<Result<_>>()?;
            let perturbed: Vec<MetricsRecord> = outcomes
                .iter()
                .zip(&labels)
                .map(|(o, y)| MetricsRecord::evaluate(&o.scores_after, y, k))
                .collect::<Result<_>>()?;
            let after: Vec<&[f64]> = outcomes.iter().map(|o| o.scores_after.as_slice()).collect();
            let perturbed_summary = side_summary(&perturbed, &after, &labels, k, config.map_mode)?;
            let expulsions: Vec<_> = outcomes.iter().map(AttackOutcome::expulsion).collect();
            let successes: Vec<&[f64]> = outcomes
                .iter()
                .filter(|o| o.success)
                .map(|o| o.epsilon.as_slice())
                .collect();
            rows.push(delta_report(label(method), &clean_summary, &perturbed_summary, &expulsions, &successes)?);

            for (((idx, _), outcome), (c, p)) in targets.iter().zip(outcomes).zip(clean.iter().zip(perturbed)) {
                records.push(InstanceRecord {
                    k,
                    s_size,
                    instance: *idx,
                    perturbation_norm: outcome.perturbation_norm(),
                    outcome,
                    clean: *c,
                    perturbed: p,
                });
            }
        }
    }
    Ok(ExperimentResult { rows, records })
}

/// Resolves the dataset and victim, runs the grid and writes both outputs.
/// Nothing is written unless every cell completes.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (model, attack_set) = prepare(config)?;
    let result = run_grid(config, &model, &attack_set)?;
    write_atomic(&config.output_csv, result.csv().as_bytes())?;
    write_atomic(&config.output_jsonl, result.jsonl().as_bytes())?;
    Ok(result)
}

/// Loads or generates the data, then loads or trains the victim. Returns
/// the victim and the instances to attack.
pub fn prepare(config: &ExperimentConfig) -> Result<(Scorer, Vec<Instance>)> {
    let data = match &config.dataset {
        DataSource::Path(p) => dataset::load(p)?,
        DataSource::Synthetic(spec) => gen_synthetic(spec)?,
    };
    let split = (data.len() as f64 * config.train_fraction).round() as usize;
    let (train, eval) = data.split_at(split);
    let model = match &config.victim {
        VictimSource::Path(p) => Scorer::load(p)?,
        VictimSource::Train(tc) => {
            let train = if train.is_empty() { eval } else { train };
            train_bce(train, tc)?
        }
    };
    let (d, c) = dataset::dimensions(eval)?;
    if d != model.input_dim() || c != model.classes() {
        return Err(Error::arg(format!(
            "victim expects ({}, {}) but the data has ({d}, {c})",
            model.input_dim(),
            model.classes()
        )));
    }
    Ok((model, eval.to_vec()))
}
