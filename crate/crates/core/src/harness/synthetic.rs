//! Seeded synthetic multi-label data.
//!
//! Every class gets a Gaussian prototype in feature space. An instance's
//! label vector is drawn first; its features are the sum of the prototypes of
//! its relevant classes plus isotropic noise, then every feature column is
//! divided by its largest magnitude so the data lies in `[-1, 1]`.
//!
//! Labels share a per-instance latent uniform `u`: each class independently
//! uses `u` with probability `correlation` (otherwise a fresh uniform) and is
//! relevant when its uniform falls below `mean_relevant / c`. Marginals stay
//! exact and the pairwise label covariance is `correlation² · p(1 − p)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::Instance;
use crate::error::{Error, Result};
use crate::ranking::LabelVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub mean_relevant: f64,
    #[serde(default)]
    pub correlation: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.75
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 32,
            c: 10,
            mean_relevant: 4.0,
            correlation: 0.0,
            noise: default_noise(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.c < 2 {
            return Err(Error::arg("synthetic spec needs n >= 1, d >= 1 and c >= 2"));
        }
        if !(self.mean_relevant > 0.0 && self.mean_relevant <= self.c as f64) {
            return Err(Error::arg(format!(
                "mean relevant labels {} is infeasible for {} classes",
                self.mean_relevant, self.c
            )));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(Error::arg("label correlation must lie in [0, 1]"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::arg("noise must be non-negative"));
        }
        Ok(())
    }
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prototypes: Vec<Vec<f64>> = (0..spec.c)
        .map(|_| (0..spec.d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let p = spec.mean_relevant / spec.c as f64;

    let mut labels = Vec::with_capacity(spec.n);
    let mut raw = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let shared: f64 = rng.random();
        let bits: Vec<bool> = (0..spec.c)
            .map(|_| {
                let u = if rng.random_bool(spec.correlation) { shared } else { rng.random() };
                u < p
            })
            .collect();
        let mut x: Vec<f64> = (0..spec.d)
            .map(|_| spec.noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for (j, _) in bits.iter().enumerate().filter(|(_, &b)| b) {
            for (v, m) in x.iter_mut().zip(&prototypes[j]) {
                *v += m;
            }
        }
        labels.push(LabelVector::new(bits));
        raw.push(x);
    }

    let mut scale = vec![0.0f64; spec.d];
    for x in &raw {
        for (s, v) in scale.iter_mut().zip(x) {
            *s = s.max(v.abs());
        }
    }
    Ok(raw
        .into_iter()
        .zip(labels)
        .map(|(mut x, y)| {
            for (v, s) in x.iter_mut().zip(&scale) {
                if *s > 0.0 {
                    *v /= s;
                }
            }
            Instance::new(x, y)
        })
        .collect())
}
