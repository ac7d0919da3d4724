//! Top-k ranking measures and the clean-vs-perturbed delta report.
//!
//! Per-instance measures only look at the ranking of the score vector, so
//! they are invariant under any strictly increasing transform of the scores.
//! `mAP@k` defaults to the sample mean of `AP@k`; the per-category variant
//! ranks instances within each class instead (see [`map_at_k_per_category`]).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{check_k, Error, Result};
use crate::ranking::{top_k_indices, LabelVector};

fn check_pair(scores: &[f64], labels: &LabelVector, k: usize) -> Result<Vec<usize>> {
    if scores.len() != labels.len() {
        return Err(Error::arg(format!(
            "score vector has {} classes but label vector has {}",
            scores.len(),
            labels.len()
        )));
    }
    check_k(k, scores.len())?;
    top_k_indices(scores, k)
}

/// Top-k accuracy: 1 iff every relevant label is inside the top-k.
pub fn tk_acc(scores: &[f64], labels: &LabelVector, k: usize) -> Result<bool> {
    let top = check_pair(scores, labels, k)?;
    let hits = top.iter().filter(|&&i| labels.is_relevant(i)).count();
    Ok(hits == labels.relevant_count())
}

pub fn precision_at_k(scores: &[f64], labels: &LabelVector, k: usize) -> Result<f64> {
    let top = check_pair(scores, labels, k)?;
    let hits = top.iter().filter(|&&i| labels.is_relevant(i)).count();
    Ok(hits as f64 / k as f64)
}

/// `N_k(y) = min(k, |Yp|)`.
fn normalizer(labels: &LabelVector, k: usize, metric: &'static str) -> Result<usize> {
    match labels.relevant_count() {
        0 => Err(Error::UndefinedMetric(metric)),
        n => Ok(n.min(k)),
    }
}

/// Average precision over the top-k, using the precision of each relevant
/// prefix and normalised by `min(k, |Yp|)`.
pub fn ap_at_k(scores: &[f64], labels: &LabelVector, k: usize) -> Result<f64> {
    let top = check_pair(scores, labels, k)?;
    let norm = normalizer(labels, k, "AP@k")?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &class) in top.iter().enumerate() {
        if labels.is_relevant(class) {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Ok(sum / norm as f64)
}

/// Discount applied at 1-based rank position `pos`.
#[inline]
fn gain(pos: usize) -> f64 {
    1.0 / ((pos + 1) as f64).log2()
}

pub fn ndcg_at_k(scores: &[f64], labels: &LabelVector, k: usize) -> Result<f64> {
    let top = check_pair(scores, labels, k)?;
    let norm = normalizer(labels, k, "NDCG@k")?;
    let dcg: f64 = top
        .iter()
        .enumerate()
        .filter(|(_, &c)| labels.is_relevant(c))
        .map(|(i, _)| gain(i + 1))
        .sum();
    let idcg: f64 = (1..=norm).map(gain).sum();
    Ok(dcg / idcg)
}

/// Sample-mean `AP@k`, the default `mAP@k`.
pub fn map_at_k(samples: &[(&[f64], &LabelVector)], k: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::arg("mAP@k needs at least one sample"));
    }
    let mut sum = 0.0;
    for (scores, labels) in samples {
        sum += ap_at_k(scores, labels, k)?;
    }
    Ok(sum / samples.len() as f64)
}

/// Per-category `mAP@k`: for each class, rank the samples by that class's
/// score (ties by sample order), take the top `min(k, n)` and compute AP
/// against the class's relevance column. Classes without any relevant
/// sample are skipped.
pub fn map_at_k_per_category(samples: &[(&[f64], &LabelVector)], k: usize) -> Result<f64> {
    let Some((first, _)) = samples.first() else {
        return Err(Error::arg("mAP@k needs at least one sample"));
    };
    let c = first.len();
    if k == 0 {
        return Err(Error::Range { what: "k", value: k, lo: 1, hi: samples.len() });
    }
    for (scores, labels) in samples {
        if scores.len() != c || labels.len() != c {
            return Err(Error::arg("all samples must share the same class count"));
        }
    }
    let depth = k.min(samples.len());
    let mut total = 0.0;
    let mut categories = 0usize;
    for class in 0..c {
        let positives = samples.iter().filter(|(_, y)| y.is_relevant(class)).count();
        if positives == 0 {
            continue;
        }
        let column: Vec<f64> = samples.iter().map(|(s, _)| s[class]).collect();
        let relevance = LabelVector::new(samples.iter().map(|(_, y)| y.is_relevant(class)).collect());
        total += ap_at_k(&column, &relevance, depth)?;
        categories += 1;
    }
    if categories == 0 {
        return Err(Error::UndefinedMetric("per-category mAP@k"));
    }
    Ok(total / categories as f64)
}

/// How many specified labels an attack targeted and how many are still in the
/// top-k afterwards (`|S|` and `|S′|`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expulsion {
    pub specified: usize,
    pub residual: usize,
}

impl Expulsion {
    pub fn expelled(&self) -> usize {
        self.specified - self.residual
    }
}

/// `Δl`: mean number of specified labels pushed out of the top-k.
pub fn delta_l(outcomes: &[Expulsion]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::arg("delta_l needs at least one outcome"));
    }
    let total: usize = outcomes.iter().map(Expulsion::expelled).sum();
    Ok(total as f64 / outcomes.len() as f64)
}

/// `APer`: mean L2 norm over successful perturbations; `None` when there
/// were no successes.
pub fn aper<V: AsRef<[f64]>>(perturbations: &[V]) -> Option<f64> {
    if perturbations.is_empty() {
        return None;
    }
    let sum: f64 = perturbations.iter().map(|e| l2_norm(e.as_ref())).sum();
    Some(sum / perturbations.len() as f64)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The four ranking measures for one score vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub k: usize,
    pub tk_acc: bool,
    pub p_at_k: f64,
    pub ap_at_k: f64,
    pub ndcg_at_k: f64,
}

impl MetricsRecord {
    pub fn evaluate(scores: &[f64], labels: &LabelVector, k: usize) -> Result<Self> {
        Ok(Self {
            k,
            tk_acc: tk_acc(scores, labels, k)?,
            p_at_k: precision_at_k(scores, labels, k)?,
            ap_at_k: ap_at_k(scores, labels, k)?,
            ndcg_at_k: ndcg_at_k(scores, labels, k)?,
        })
    }
}

/// Means of the per-instance measures over one side (clean or perturbed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideSummary {
    pub n: usize,
    pub k: usize,
    pub tk_acc: f64,
    pub p_at_k: f64,
    pub map_at_k: f64,
    pub ndcg_at_k: f64,
}

impl SideSummary {
    /// Sums are accumulated in slice order so the result is bit-stable.
    pub fn from_records(records: &[MetricsRecord]) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::arg("cannot summarise an empty record list"));
        };
        if records.iter().any(|r| r.k != first.k) {
            return Err(Error::arg("records were computed with different k"));
        }
        let n = records.len() as f64;
        let mean = |f: fn(&MetricsRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            n: records.len(),
            k: first.k,
            tk_acc: mean(|r| f64::from(u8::from(r.tk_acc))),
            p_at_k: mean(|r| r.p_at_k),
            map_at_k: mean(|r| r.ap_at_k),
            ndcg_at_k: mean(|r| r.ndcg_at_k),
        })
    }
}

/// Identifies a report row: the grid cell and the attack method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowLabel {
    pub k: usize,
    pub s_size: usize,
    pub method: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub clean: SideSummary,
    pub perturbed: SideSummary,
    pub delta_tk_acc: f64,
    pub delta_p_at_k: f64,
    pub delta_map_at_k: f64,
    pub delta_ndcg_at_k: f64,
    pub delta_l: f64,
    pub mean_specified: f64,
    pub successes: usize,
}

/// One row of the results table. `stats` is `None` when the cell had no
/// attackable instances; `aper` is `None` when no attack succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub label: RowLabel,
    pub n: usize,
    pub stats: Option<CellStats>,
    pub aper: Option<f64>,
    /// The method was listed but not executed.
    #[serde(default)]
    pub skipped: bool,
}

/// Deltas are `clean − perturbed`, so they are positive when the attack
/// degraded the measure and may be negative when it improved it.
pub fn delta_report<V: AsRef<[f64]>>(
    label: RowLabel,
    clean: &SideSummary,
    perturbed: &SideSummary,
    expulsions: &[Expulsion],
    successful_perturbations: &[V],
) -> Result<AggregateReport> {
    if clean.n != perturbed.n || clean.n != expulsions.len() {
        return Err(Error::arg(format!(
            "mismatched instance sets: clean n={}, perturbed n={}, outcomes n={}",
            clean.n,
            perturbed.n,
            expulsions.len()
        )));
    }
    if clean.k != perturbed.k || clean.k != label.k {
        return Err(Error::arg("clean and perturbed sides use different k"));
    }
    if successful_perturbations.len() > expulsions.len() {
        return Err(Error::arg("more successful perturbations than instances"));
    }
    let mean_specified =
        expulsions.iter().map(|e| e.specified).sum::<usize>() as f64 / expulsions.len() as f64;
    let stats = CellStats {
        clean: *clean,
        perturbed: *perturbed,
        delta_tk_acc: clean.tk_acc - perturbed.tk_acc,
        delta_p_at_k: clean.p_at_k - perturbed.p_at_k,
        delta_map_at_k: clean.map_at_k - perturbed.map_at_k,
        delta_ndcg_at_k: clean.ndcg_at_k - perturbed.ndcg_at_k,
        delta_l: delta_l(expulsions)?,
        mean_specified,
        successes: successful_perturbations.len(),
    };
    Ok(AggregateReport {
        label,
        n: clean.n,
        stats: Some(stats),
        aper: aper(successful_perturbations),
        skipped: false,
    })
}

impl AggregateReport {
    /// Row for a cell where filtering left nothing to attack.
    pub fn empty(label: RowLabel) -> Self {
        Self {
            label,
            n: 0,
            stats: None,
            aper: None,
            skipped: false,
        }
    }

    /// Row for a method that is listed in the grid but not executed.
    pub fn not_run(label: RowLabel, n: usize) -> Self {
        Self {
            label,
            n,
            stats: None,
            aper: None,
            skipped: true,
        }
    }

    pub fn csv_row(&self) -> String {
        let missing = if self.skipped { NOT_RUN } else { NA };
        let cell = |v: Option<f64>| v.map_or_else(|| missing.to_string(), |x| x.to_string());
        let s = self.stats.as_ref();
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{},{},{},{}",
            self.label.k,
            self.label.s_size,
            self.label.method,
            cell(s.map(|s| s.delta_tk_acc)),
            cell(s.map(|s| s.delta_p_at_k)),
            cell(s.map(|s| s.delta_map_at_k)),
            cell(s.map(|s| s.delta_ndcg_at_k)),
            cell(s.map(|s| s.delta_l)),
            cell(self.aper),
            self.n
        );
        row
    }
}

/// Marker written for undefined cells.
pub const NA: &str = "NA";

/// Marker written for methods that were not executed.
pub const NOT_RUN: &str = "not run";

pub const CSV_HEADER: &str = "k,|S|,method,dTkAcc,dP@k,dmAP@k,dNDCG@k,dl,APer,n";

pub fn to_csv(rows: &[AggregateReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}
