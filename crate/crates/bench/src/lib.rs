//! Shared fixtures for the benchmarks: a trained affine victim and the
//! attackable instances of its held-out split.

use tkmia::attack::{select_global, AttackConfig};
use tkmia::dataset::Instance;
use tkmia::harness::{gen_synthetic, SyntheticSpec};
use tkmia::model::{train_bce, Scorer, TrainConfig};
use tkmia::ranking::SpecifiedSet;

pub struct Fixture {
    pub model: Scorer,
    pub targets: Vec<(Instance, SpecifiedSet)>,
    pub config: AttackConfig,
}

pub fn fixture() -> Fixture {
    let data = gen_synthetic(&SyntheticSpec { n: 1000, ..Default::default() }).expect("valid spec");
    let (train, held_out) = data.split_at(500);
    let model = train_bce(train, &TrainConfig::default()).expect("training succeeds");
    let config = AttackConfig::default();
    let targets = select_global(held_out, &[0])
        .expect("category list is non-empty")
        .into_iter()
        .filter(|(i, s)| held_out[*i].y.relevant_count() >= config.k + s.len())
        .map(|(i, s)| (held_out[i].clone(), s))
        .collect();
    Fixture { model, targets, config }
}
