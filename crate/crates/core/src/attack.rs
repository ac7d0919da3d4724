//! The measure-imperceptible top-k attack.
//!
//! The objective replaces the ranking operators `f_[k]` and `f_[k+1]` in the
//! two expulsion/filling conditions by their average top-k relaxations, so
//! its value and gradient only need a max over `S`, a min over `Yp \ S` and
//! hinge sums over all classes. Nothing on the gradient path sorts scores;
//! only [`success_check`] ranks classes.
//!
//! The optimiser follows the usual loop: plain projected steps on the two
//! relaxation variables, a momentum step on the perturbation, projection of
//! `x + ε` back into the input box, and an early exit once the specified
//! labels have left the top-k.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::error::{check_k, Error, Result};
use crate::metrics::{l2_norm, Expulsion};
use crate::model::Scorer;
use crate::ranking::{argmax_over, argmin_over, kth_largest, remaining_relevant, top_k_indices, ScoreVector, SpecifiedSet};

/// How the specified set is chosen per instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// S1: the same categories for every instance, intersected with `Yp`.
    Global { categories: Vec<usize> },
    /// S2: `m` relevant labels drawn uniformly per instance.
    Random { m: usize },
}

/// Which conditions end the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Every specified label ranks below position k.
    #[default]
    C1Only,
    /// Additionally, no other relevant label scores below `f_[k]`.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub k: usize,
    /// Weight of the `(α/2)‖ε‖²` term.
    pub alpha: f64,
    /// Learning rate for ε and for the relaxation variables.
    pub eta: f64,
    /// Momentum applied to ε only.
    pub momentum: f64,
    pub max_iter: usize,
    pub scheme: Scheme,
    /// Minimum number of expelled specified labels for a baseline run to
    /// count as a success; `None` means `|S|`.
    pub delta_threshold: Option<usize>,
    pub clip_domain: [f64; 2],
    pub stop_mode: StopMode,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            k: 3,
            alpha: 1e-4,
            eta: 1e-3,
            momentum: 0.9,
            max_iter: 300,
            scheme: Scheme::Random { m: 1 },
            delta_threshold: None,
            clip_domain: [-1.0, 1.0],
            stop_mode: StopMode::C1Only,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::arg("k must be positive"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::arg("alpha must be non-negative"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::arg("eta must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::arg("momentum must lie in [0, 1)"));
        }
        let [lo, hi] = self.clip_domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::arg("clip domain must be a finite interval lo < hi"));
        }
        if self.delta_threshold == Some(0) {
            return Err(Error::arg("delta threshold must be positive"));
        }
        match &self.scheme {
            Scheme::Global { categories } if categories.is_empty() => {
                Err(Error::arg("global selection needs at least one category"))
            }
            Scheme::Random { m } if *m == 0 || *m > self.k => {
                Err(Error::arg(format!("random selection needs 0 < m <= k, got m = {m}, k = {}", self.k)))
            }
            _ => Ok(()),
        }
    }

    /// The effective success threshold for a specified set.
    pub fn delta_for(&self, specified: &SpecifiedSet) -> Result<usize> {
        let delta = self.delta_threshold.unwrap_or(specified.len());
        if delta == 0 || delta > specified.len() {
            return Err(Error::arg(format!(
                "delta threshold {delta} must lie in [1, |S| = {}]",
                specified.len()
            )));
        }
        Ok(delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tkmia,
    MlCwU,
    TkmlApU,
    /// Listed so reports can carry its column; never executed.
    Kfool,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Tkmia => "tkmia",
            Method::MlCwU => "ml_cw_u",
            Method::TkmlApU => "tkml_ap_u",
            Method::Kfool => "kfool",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tkmia" => Ok(Method::Tkmia),
            "ml_cw_u" => Ok(Method::MlCwU),
            "tkml_ap_u" => Ok(Method::TkmlApU),
            "kfool" => Ok(Method::Kfool),
            other => Err(Error::arg(format!("unknown method {other:?}"))),
        }
    }
}

/// Value and gradients of the attack objective at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub grad_eps: Vec<f64>,
    pub grad_lambda1: f64,
    pub grad_lambda2: f64,
}

/// Evaluates
///
/// ```text
/// λ1 + λ2 + (α/2)‖ε‖²
///   + 1/(c−k) Σ_i [max_{s∈S} f_s − f_i − λ1]_+
///   + 1/k     Σ_j [f_j − min_{y∈Yp\S} f_y − λ2]_+
/// ```
///
/// at `x + ε` together with its (sub)gradients. The max and min pass their
/// gradient to a single arg-extremum, ties going to the smaller class index.
#[allow(clippy::too_many_arguments)]
pub fn tkmia_objective(
    model: &Scorer,
    x: &[f64],
    eps: &[f64],
    lambda1: f64,
    lambda2: f64,
    specified: &SpecifiedSet,
    relevant: &[usize],
    config: &AttackConfig,
) -> Result<ObjectiveEval> {
    for (name, l) in [("lambda1", lambda1), ("lambda2", lambda2)] {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::arg(format!("{name} = {l} is not in [0, 1]")));
        }
    }
    let c = model.classes();
    let k = config.k;
    if k == 0 || k >= c {
        return Err(Error::Range { what: "k", value: k, lo: 1, hi: c.saturating_sub(1) });
    }
    specified.check_classes(c)?;
    let rest = remaining_relevant(relevant, specified);
    if rest.iter().any(|&y| y >= c) {
        return Err(Error::arg("relevant class index out of range"));
    }
    let z = shifted(x, eps)?;
    let f = model.outputs(&z)?;

    let top = argmax_over(&f, specified.indices()).expect("S is non-empty");
    let low = argmin_over(&f, &rest)
        .ok_or_else(|| Error::arg("Yp \\ S is empty; the instance does not satisfy |Yp| >= k + |S|"))?;

    let w1 = 1.0 / (c - k) as f64;
    let w2 = 1.0 / k as f64;
    let mut cot = vec![0.0; c];
    let mut sum1 = 0.0;
    let mut active1 = 0usize;
    let mut sum2 = 0.0;
    let mut active2 = 0usize;
    for i in 0..c {
        let a = f[top] - f[i] - lambda1;
        if a > 0.0 {
            sum1 += a;
            active1 += 1;
            cot[top] += w1;
            cot[i] -= w1;
        }
        let b = f[i] - f[low] - lambda2;
        if b > 0.0 {
            sum2 += b;
            active2 += 1;
            cot[i] += w2;
            cot[low] -= w2;
        }
    }
    let sq_norm: f64 = eps.iter().map(|e| e * e).sum();
    let value = lambda1 + lambda2 + 0.5 * config.alpha * sq_norm + w1 * sum1 + w2 * sum2;

    let mut grad_eps = model.input_gradient(&z, &cot)?;
    for (g, e) in grad_eps.iter_mut().zip(eps) {
        *g += config.alpha * e;
    }
    Ok(ObjectiveEval {
        value,
        grad_eps,
        grad_lambda1: 1.0 - active1 as f64 * w1,
        grad_lambda2: 1.0 - active2 as f64 * w2,
    })
}

pub(crate) fn shifted(x: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if x.len() != eps.len() {
        return Err(Error::arg(format!(
            "perturbation has dimension {} but the input has {}",
            eps.len(),
            x.len()
        )));
    }
    Ok(x.iter().zip(eps).map(|(a, b)| a + b).collect())
}

/// Tests the attack conditions on a score vector using the tie-broken rank
/// order: `C1Only` holds when no specified label is in the top-k; `Strict`
/// also needs every label of `Yp \ S` to score at least `f_[k]`.
pub fn success_check(
    scores: &[f64],
    specified: &SpecifiedSet,
    relevant: &[usize],
    k: usize,
    mode: StopMode,
) -> Result<bool> {
    let c = scores.len();
    if k == 0 || k >= c {
        return Err(Error::Range { what: "k", value: k, lo: 1, hi: c.saturating_sub(1) });
    }
    specified.check_classes(c)?;
    let top = top_k_indices(scores, k)?;
    if top.iter().any(|&i| specified.contains(i)) {
        return Ok(false);
    }
    match mode {
        StopMode::C1Only => Ok(true),
        StopMode::Strict => {
            let kth = kth_largest(scores, k)?;
            let rest = remaining_relevant(relevant, specified);
            Ok(rest.iter().all(|&y| scores[y] >= kth))
        }
    }
}

/// `S′`: the specified labels still inside the top-k.
pub fn residual_set(scores: &[f64], specified: &SpecifiedSet, k: usize) -> Result<Vec<usize>> {
    let top = top_k_indices(scores, k)?;
    Ok(specified.indices().iter().copied().filter(|s| top.contains(s)).collect())
}

/// Result of one attack run on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub method: Method,
    pub epsilon: Vec<f64>,
    pub iterations_used: usize,
    pub success: bool,
    pub specified: SpecifiedSet,
    pub residual: Vec<usize>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Objective value at every evaluated iterate.
    pub trace: Vec<f64>,
    pub scores_before: ScoreVector,
    pub scores_after: ScoreVector,
    /// `f_[k] − min_{y∈Yp\S} f_y` after the attack (positive while the c2
    /// gap is open); `None` when `Yp \ S` is empty.
    pub c2_gap: Option<f64>,
}

impl AttackOutcome {
    pub fn expulsion(&self) -> Expulsion {
        Expulsion {
            specified: self.specified.len(),
            residual: self.residual.len(),
        }
    }

    pub fn perturbation_norm(&self) -> f64 {
        l2_norm(&self.epsilon)
    }

    /// `x + ε`.
    pub fn adversarial(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.epsilon).map(|(a, b)| a + b).collect()
    }

    /// Best objective value seen so far, per iteration.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::INFINITY, |best, &v| {
                *best = best.min(v);
                Some(*best)
            })
            .collect()
    }
}

/// One evaluation of a loss for the shared engine.
pub(crate) struct Step {
    pub value: f64,
    pub grad_eps: Vec<f64>,
    pub grad_lambda: [f64; 2],
}

/// Checks `S ⊆ Yp`, `|Yp| ≥ k + |S|` and dimensions.
pub(crate) fn check_attack_inputs(
    model: &Scorer,
    instance: &Instance,
    specified: &SpecifiedSet,
    config: &AttackConfig,
) -> Result<Vec<usize>> {
    config.validate()?;
    let c = model.classes();
    if instance.y.len() != c {
        return Err(Error::arg(format!("instance has {} labels but the scorer has {c} classes", instance.y.len())));
    }
    check_k(config.k, c - 1)?;
    specified.check_classes(c)?;
    if !specified.is_subset_of(&instance.y) {
        return Err(Error::arg("specified set must be a subset of the relevant labels"));
    }
    let relevant = instance.relevant();
    if relevant.len() < config.k + specified.len() {
        return Err(Error::arg(format!(
            "instance has |Yp| = {} < k + |S| = {}",
            relevant.len(),
            config.k + specified.len()
        )));
    }
    Ok(relevant)
}

/// Projected iterative descent shared by every method.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_engine<L, D>(
    model: &Scorer,
    instance: &Instance,
    specified: &SpecifiedSet,
    relevant: &[usize],
    config: &AttackConfig,
    method: Method,
    mut loss: L,
    done: D,
) -> Result<AttackOutcome>
where
    L: FnMut(&[f64], [f64; 2]) -> Result<Step>,
    D: Fn(&[f64]) -> Result<bool>,
{
    let x = &instance.x;
    let [lo, hi] = config.clip_domain;
    let d = x.len();
    let mut eps = vec![0.0; d];
    let mut velocity = vec![0.0; d];
    let mut lambdas = [0.0f64; 2];
    let mut trace = Vec::new();
    let scores_before = model.score(x)?;

    let mut scores = scores_before.clone();
    let mut iterations = 0;
    let mut success = done(&scores)?;
    while !success && iterations < config.max_iter {
        let step = loss(&eps, lambdas)?;
        if !step.value.is_finite() || step.grad_lambda.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric { what: "objective", iteration: iterations });
        }
        if step.grad_eps.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric { what: "perturbation gradient", iteration: iterations });
        }
        trace.push(step.value);
        for (l, g) in lambdas.iter_mut().zip(step.grad_lambda) {
            *l = (*l - config.eta * g).clamp(0.0, 1.0);
        }
        for i in 0..d {
            velocity[i] = config.momentum * velocity[i] + step.grad_eps[i];
            let moved = (x[i] + eps[i] - config.eta * velocity[i]).clamp(lo, hi);
            eps[i] = moved - x[i];
        }
        iterations += 1;
        scores = model.score(&shifted(x, &eps)?)?;
        success = done(&scores)?;
    }

    let residual = residual_set(&scores, specified, config.k)?;
    let rest = remaining_relevant(relevant, specified);
    let c2_gap = match argmin_over(&scores, &rest) {
        Some(y) => Some(kth_largest(&scores, config.k)? - scores[y]),
        None => None,
    };
    Ok(AttackOutcome {
        method,
        epsilon: eps,
        iterations_used: iterations,
        success,
        specified: specified.clone(),
        residual,
        lambda1: lambdas[0],
        lambda2: lambdas[1],
        trace,
        scores_before,
        scores_after: scores,
        c2_gap,
    })
}

/// Runs the attack on one instance. `ε` starts at zero, so an instance
/// whose specified labels are already outside the top-k returns at once.
pub fn tkmia_attack(
    model: &Scorer,
    instance: &Instance,
    specified: &SpecifiedSet,
    config: &AttackConfig,
) -> Result<AttackOutcome> {
    let relevant = check_attack_inputs(model, instance, specified, config)?;
    let x = &instance.x;
    run_engine(
        model,
        instance,
        specified,
        &relevant,
        config,
        Method::Tkmia,
        |eps, [l1, l2]| {
            let eval = tkmia_objective(model, x, eps, l1, l2, specified, &relevant, config)?;
            Ok(Step {
                value: eval.value,
                grad_eps: eval.grad_eps,
                grad_lambda: [eval.grad_lambda1, eval.grad_lambda2],
            })
        },
        |scores| success_check(scores, specified, &relevant, config.k, config.stop_mode),
    )
}

/// S1: `S = Yp ∩ categories` for every instance with a non-empty
/// intersection. Returns `(instance index, S)` pairs in dataset order.
pub fn select_global(data: &[Instance], categories: &[usize]) -> Result<Vec<(usize, SpecifiedSet)>> {
    if categories.is_empty() {
        return Err(Error::arg("global selection needs at least one category"));
    }
    let mut out = Vec::new();
    for (i, inst) in data.iter().enumerate() {
        let hits: Vec<usize> = categories
            .iter()
            .copied()
            .filter(|&cat| cat < inst.y.len() && inst.y.is_relevant(cat))
            .collect();
        if !hits.is_empty() {
            out.push((i, SpecifiedSet::new(hits)?));
        }
    }
    Ok(out)
}

/// S2: `m` relevant labels drawn uniformly without replacement.
pub fn select_random(instance: &Instance, m: usize, k: usize, seed: u64) -> Result<SpecifiedSet> {
    let relevant = instance.relevant();
    if m == 0 || m > k || m > relevant.len() {
        return Err(Error::arg(format!(
            "random selection needs 0 < m <= min(k, |Yp|), got m = {m}, k = {k}, |Yp| = {}",
            relevant.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, relevant.len(), m)
        .into_iter()
        .map(|i| relevant[i])
        .collect();
    SpecifiedSet::new(picked)
}

/// Indices of instances with `|Yp| ≥ k + s_size`.
pub fn filter_instances(data: &[Instance], k: usize, s_size: usize) -> Vec<usize> {
    data.iter()
        .enumerate()
        .filter(|(_, inst)| inst.y.relevant_count() >= k + s_size)
        .map(|(i, _)| i)
        .collect()
}
