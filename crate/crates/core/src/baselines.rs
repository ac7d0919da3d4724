//! Comparison attacks run on the same projected-descent engine as
//! [`tkmia_attack`](crate::attack::tkmia_attack), without relaxation
//! variables.
//!
//! Both losses target the whole relevant set rather than `S`, so they expel
//! the specified labels only as a side effect of pushing relevant labels
//! down. A run succeeds once at least `δ` specified labels have left the
//! top-k.

use serde::{Deserialize, Serialize};

use crate::attack::{self, check_attack_inputs, run_engine, shifted, AttackConfig, AttackOutcome, Method, Step};
use crate::dataset::Instance;
use crate::error::{Error, Result};
use crate::model::Scorer;
use crate::ranking::{argmax_over, argmin_over, hinge, ranking, SpecifiedSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    MlCwU,
    TkmlApU,
}

impl Baseline {
    pub fn method(self) -> Method {
        match self {
            Baseline::MlCwU => Method::MlCwU,
            Baseline::TkmlApU => Method::TkmlApU,
        }
    }
}

impl TryFrom<Method> for Baseline {
    type Error = Error;

    fn try_from(m: Method) -> Result<Self> {
        match m {
            Method::MlCwU => Ok(Baseline::MlCwU),
            Method::TkmlApU => Ok(Baseline::TkmlApU),
            other => Err(Error::arg(format!("{} is not a runnable baseline", other.tag()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub method: Baseline,
    pub config: AttackConfig,
}

/// Loss value and its gradient with respect to ε.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad_eps: Vec<f64>,
}

fn finish(model: &Scorer, z: &[f64], eps: &[f64], alpha: f64, hinge_value: f64, cot: Vec<f64>) -> Result<LossEval> {
    let sq: f64 = eps.iter().map(|e| e * e).sum();
    let mut grad_eps = model.input_gradient(z, &cot)?;
    for (g, e) in grad_eps.iter_mut().zip(eps) {
        *g += alpha * e;
    }
    Ok(LossEval {
        value: hinge_value + 0.5 * alpha * sq,
        grad_eps,
    })
}

/// `[min_{j∈Yp} f_j − max_{i∉Yp} f_i]_+ + (α/2)‖ε‖²` at `x + ε`.
///
/// This is the margin a correct multi-label ranking keeps positive;
/// descending it pushes the weakest relevant label under the strongest
/// irrelevant one.
pub fn ml_cw_u_loss(model: &Scorer, x: &[f64], eps: &[f64], relevant: &[usize], alpha: f64) -> Result<LossEval> {
    let c = model.classes();
    let mut is_rel = vec![false; c];
    for &j in relevant {
        *is_rel
            .get_mut(j)
            .ok_or_else(|| Error::arg(format!("relevant class {j} >= class count {c}")))? = true;
    }
    let irrelevant: Vec<usize> = (0..c).filter(|&i| !is_rel[i]).collect();
    if relevant.is_empty() || irrelevant.is_empty() {
        return Err(Error::arg("ML-CW-U needs both relevant and irrelevant labels"));
    }
    let z = shifted(x, eps)?;
    let f = model.outputs(&z)?;
    let weakest = argmin_over(&f, relevant).expect("non-empty");
    let strongest = argmax_over(&f, &irrelevant).expect("non-empty");
    let margin = f[weakest] - f[strongest];
    let mut cot = vec![0.0; c];
    if margin > 0.0 {
        cot[weakest] += 1.0;
        cot[strongest] -= 1.0;
    }
    finish(model, &z, eps, alpha, hinge(margin), cot)
}

/// `[max_{y∈Yp} f_y − f_[k+1]]_+ + (α/2)‖ε‖²` at `x + ε`.
///
/// The `f_[k+1]` gradient flows through whichever class currently holds
/// rank `k + 1` (ties by smaller index).
pub fn tkml_ap_u_loss(
    model: &Scorer,
    x: &[f64],
    eps: &[f64],
    relevant: &[usize],
    k: usize,
    alpha: f64,
) -> Result<LossEval> {
    let c = model.classes();
    if k == 0 || k >= c {
        return Err(Error::Range { what: "k", value: k, lo: 1, hi: c - 1 });
    }
    if let Some(&j) = relevant.iter().find(|&&j| j >= c) {
        return Err(Error::arg(format!("relevant class {j} >= class count {c}")));
    }
    if relevant.is_empty() {
        return Err(Error::arg("TkML-AP-U needs at least one relevant label"));
    }
    let z = shifted(x, eps)?;
    let f = model.outputs(&z)?;
    let best = argmax_over(&f, relevant).expect("non-empty");
    let pivot = ranking(&f)[k];
    let margin = f[best] - f[pivot];
    let mut cot = vec![0.0; c];
    if margin > 0.0 {
        cot[best] += 1.0;
        cot[pivot] -= 1.0;
    }
    finish(model, &z, eps, alpha, hinge(margin), cot)
}

/// Runs a baseline until `δ` specified labels are out of the top-k or the
/// iteration budget is spent.
pub fn run_baseline(
    model: &Scorer,
    instance: &Instance,
    specified: &SpecifiedSet,
    spec: &BaselineSpec,
) -> Result<AttackOutcome> {
    let config = &spec.config;
    let relevant = check_attack_inputs(model, instance, specified, config)?;
    let delta = config.delta_for(specified)?;
    let x = &instance.x;
    let k = config.k;
    let alpha = config.alpha;
    let done = |scores: &[f64]| -> Result<bool> {
        let residual = attack::residual_set(scores, specified, k)?;
        Ok(specified.len() - residual.len() >= delta)
    };
    let step = |eval: LossEval| Step {
        value: eval.value,
        grad_eps: eval.grad_eps,
        grad_lambda: [0.0, 0.0],
    };
    match spec.method {
        Baseline::MlCwU => run_engine(
            model,
            instance,
            specified,
            &relevant,
            config,
            Method::MlCwU,
            |eps, _| ml_cw_u_loss(model, x, eps, &relevant, alpha).map(step),
            done,
        ),
        Baseline::TkmlApU => run_engine(
            model,
            instance,
            specified,
            &relevant,
            config,
            Method::TkmlApU,
            |eps, _| tkml_ap_u_loss(model, x, eps, &relevant, k, alpha).map(step),
            done,
        ),
    }
}
