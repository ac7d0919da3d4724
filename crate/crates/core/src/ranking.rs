//! Ranking primitives over class score vectors and the average top-k
//! machinery the attack objective is built on.
//!
//! Class order is always "descending score, ties broken by smaller class
//! index", so every ranking is total and reproducible. Operations take plain
//! `&[f64]` slices so they work on raw model outputs as well as on validated
//! [`ScoreVector`]s.

use std::cmp::Ordering;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_k, Error, Result};

/// Class relevancy scores `F(x)`, one entry per class, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::arg(format!(
                "a score vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(Error::arg(format!("score {i} = {v} is not in [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<ScoreVector> for Vec<f64> {
    fn from(v: ScoreVector) -> Self {
        v.0
    }
}

/// Binary ground truth `y`; serialized as a list of 0/1 integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct LabelVector(Vec<bool>);

impl LabelVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    /// Builds a label vector of length `c` with the given classes relevant.
    pub fn from_relevant(c: usize, relevant: &[usize]) -> Result<Self> {
        let mut bits = vec![false; c];
        for &j in relevant {
            if j >= c {
                return Err(Error::arg(format!("label index {j} >= class count {c}")));
            }
            bits[j] = true;
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_relevant(&self, class: usize) -> bool {
        self.0[class]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// `Yp`, ascending.
    pub fn relevant(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i]).collect()
    }

    /// `Yn`, ascending.
    pub fn irrelevant(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| !self.0[i]).collect()
    }

    pub fn relevant_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl TryFrom<Vec<u8>> for LabelVector {
    type Error = Error;

    fn try_from(raw: Vec<u8>) -> Result<Self> {
        raw.into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::arg(format!("label entries must be 0 or 1, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl From<LabelVector> for Vec<u8> {
    fn from(v: LabelVector) -> Self {
        v.0.into_iter().map(u8::from).collect()
    }
}

/// The specified label set `S` the attacker wants expelled from the top-k.
///
/// Stored sorted and deduplicated; never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct SpecifiedSet(Vec<usize>);

impl SpecifiedSet {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::arg("specified set must be non-empty"));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self(indices))
    }

    /// Like [`SpecifiedSet::new`] but also checks every index is below `c`.
    pub fn for_classes(indices: Vec<usize>, c: usize) -> Result<Self> {
        let set = Self::new(indices)?;
        set.check_classes(c)?;
        Ok(set)
    }

    pub fn check_classes(&self, c: usize) -> Result<()> {
        match self.0.iter().find(|&&i| i >= c) {
            Some(i) => Err(Error::arg(format!("specified class {i} >= class count {c}"))),
            None => Ok(()),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.binary_search(&class).is_ok()
    }

    pub fn is_subset_of(&self, labels: &LabelVector) -> bool {
        self.0.iter().all(|&i| i < labels.len() && labels.is_relevant(i))
    }
}

impl TryFrom<Vec<usize>> for SpecifiedSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpecifiedSet> for Vec<usize> {
    fn from(s: SpecifiedSet) -> Self {
        s.0
    }
}

/// Descending-score comparator with the smaller index first on ties.
#[inline]
pub(crate) fn rank_order(scores: &[f64], a: usize, b: usize) -> Ordering {
    scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
}

/// All class indices in rank order.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| rank_order(scores, a, b));
    idx
}

/// The `k` highest-scoring classes, best first.
pub fn top_k_indices(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(k, scores.len())?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
        idx.truncate(k);
    }
    idx.sort_by(|&a, &b| rank_order(scores, a, b));
    Ok(idx)
}

/// `f_[k]`, the k-th largest score.
pub fn kth_largest(scores: &[f64], k: usize) -> Result<f64> {
    check_k(k, scores.len())?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let (_, nth, _) = idx.select_nth_unstable_by(k - 1, |&a, &b| rank_order(scores, a, b));
    Ok(scores[*nth])
}

/// The average of the `k` largest scores, `φ_k(F) = (1/k) Σ_{i≤k} f_[i]`.
pub fn avg_top_k(scores: &[f64], k: usize) -> Result<f64> {
    let top = top_k_indices(scores, k)?;
    Ok(top.iter().map(|&i| scores[i]).sum::<f64>() / k as f64)
}

/// `k·λ + Σ_i [f_i − λ]_+`. Minimising over `λ ∈ [0, 1]` yields the sum of
/// the `k` largest scores, attained at `λ = f_[k]`.
pub fn variational_top_k_sum(scores: &[f64], k: usize, lambda: f64) -> Result<f64> {
    check_k(k, scores.len())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::arg(format!("lambda = {lambda} is not in [0, 1]")));
    }
    Ok(k as f64 * lambda + scores.iter().map(|&f| hinge(f - lambda)).sum::<f64>())
}

#[inline]
pub fn hinge(a: f64) -> f64 {
    a.max(0.0)
}

/// Index of the largest score among `set`; smallest index wins ties.
pub fn argmax_over(scores: &[f64], set: &[usize]) -> Option<usize> {
    set.iter()
        .copied()
        .min_by(|&a, &b| rank_order(scores, a, b))
}

/// Index of the smallest score among `set`; smallest index wins ties.
pub fn argmin_over(scores: &[f64], set: &[usize]) -> Option<usize> {
    set.iter()
        .copied()
        .min_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)))
}

/// `Δ_i = [max_{s∈S} f_s − f_i]_+` for every class, indexed by class.
pub fn delta_terms(scores: &[f64], specified: &SpecifiedSet) -> Result<Vec<f64>> {
    specified.check_classes(scores.len())?;
    let top = argmax_over(scores, specified.indices())
        .ok_or_else(|| Error::arg("specified set must be non-empty"))?;
    let reference = scores[top];
    Ok(scores.iter().map(|&f| hinge(reference - f)).collect())
}

/// `Yp \ S` in ascending order.
pub fn remaining_relevant(relevant: &[usize], specified: &SpecifiedSet) -> Vec<usize> {
    relevant
        .iter()
        .copied()
        .filter(|&y| !specified.contains(y))
        .collect()
}

/// `Δ̃_j = [f_j − min_{y∈Yp\S} f_y]_+` for every class, indexed by class.
pub fn delta_tilde_terms(
    scores: &[f64],
    relevant: &[usize],
    specified: &SpecifiedSet,
) -> Result<Vec<f64>> {
    if let Some(&bad) = relevant.iter().find(|&&y| y >= scores.len()) {
        return Err(Error::arg(format!("relevant class {bad} >= class count {}", scores.len())));
    }
    let rest = remaining_relevant(relevant, specified);
    let low = argmin_over(scores, &rest)
        .ok_or_else(|| Error::arg("Yp \\ S is empty; the instance does not satisfy |Yp| >= k + |S|"))?;
    let reference = scores[low];
    Ok(scores.iter().map(|&f| hinge(f - reference)).collect())
}
