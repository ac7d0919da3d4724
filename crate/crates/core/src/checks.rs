//! Randomised property suites behind the `check` command.
//!
//! Each suite draws its own cases from a seeded generator and reports the
//! worst deviation it saw against a fixed tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::attack::{tkmia_objective, AttackConfig};
use crate::baselines::{ml_cw_u_loss, tkml_ap_u_loss};
use crate::error::Result;
use crate::gradcheck;
use crate::metrics::{ap_at_k, ndcg_at_k, precision_at_k, tk_acc};
use crate::model::{Activation, Dense, Scorer};
use crate::ranking::{avg_top_k, hinge, kth_largest, variational_top_k_sum, LabelVector, SpecifiedSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SuiteReport {
    fn new(name: &'static str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self {
            name,
            cases,
            worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<12} {} cases={} worst={:.3e} tol={:.0e}",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.cases,
            self.worst,
            self.tolerance
        )
    }
}

fn scores<R: Rng>(rng: &mut R, c: usize) -> Vec<f64> {
    (0..c).map(|_| rng.random::<f64>()).collect()
}

/// Minimises a convex function of one variable on `[0, 1]`: a coarse grid
/// followed by ternary search in the best bracket.
fn grid_minimum<F: Fn(f64) -> f64>(f: F) -> f64 {
    const N: usize = 1000;
    let best = (0..=N).min_by(|&a, &b| f(a as f64 / N as f64).total_cmp(&f(b as f64 / N as f64))).unwrap();
    let (mut lo, mut hi) = (best.saturating_sub(1) as f64 / N as f64, (best + 1).min(N) as f64 / N as f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).min(f(best as f64 / N as f64))
}

/// `k · avg_top_k` against the variational form, both at its grid minimum
/// and at `λ = f_[k]`. Returns `(grid suite, exact suite)`.
pub fn top_k_variational(cases: usize, seed: u64) -> Result<(SuiteReport, SuiteReport)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut grid_err, mut exact_err) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let c = rng.random_range(2..=20);
        let k = rng.random_range(1..=c);
        let f = scores(&mut rng, c);
        let target = k as f64 * avg_top_k(&f, k)?;
        let at_kth = variational_top_k_sum(&f, k, kth_largest(&f, k)?)?;
        let min = grid_minimum(|l| variational_top_k_sum(&f, k, l).expect("lambda in [0, 1]"));
        grid_err = grid_err.max((min - target).abs());
        exact_err = exact_err.max((at_kth - target).abs());
    }
    Ok((
        SuiteReport::new("topk-grid", cases, grid_err, 1e-6),
        SuiteReport::new("topk-kth", cases, exact_err, 1e-9),
    ))
}

/// `[[a − x]_+ − b]_+ = [a − x − b]_+` for `a, b > 0`.
pub fn nested_hinge(cases: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let a = rng.random_range(1e-9..10.0);
        let b = rng.random_range(1e-9..10.0);
        let x = rng.random_range(-10.0..10.0);
        worst = worst.max((hinge(hinge(a - x) - b) - hinge(a - x - b)).abs());
    }
    SuiteReport::new("nested-hinge", cases, worst, 1e-12)
}

fn dense<R: Rng>(rng: &mut R, inputs: usize, outputs: usize, scale: f64) -> Dense {
    let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-scale..scale)).collect::<Vec<_>>();
    let w = draw(inputs * outputs);
    let b = draw(outputs);
    Dense::new(inputs, outputs, w, b).expect("valid shapes")
}

/// Random affine and tanh-MLP victims with well-spread scores.
pub fn random_victims(seed: u64, d: usize, c: usize) -> Vec<Scorer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        Scorer::affine(dense(&mut rng, d, c, 1.0)),
        Scorer::mlp(dense(&mut rng, d, 6, 1.0), dense(&mut rng, 6, c, 1.5), Activation::Tanh).expect("matching shapes"),
    ]
}

/// True when all pairwise score gaps and every listed hinge argument are
/// at least `margin` away from a kink.
fn generic(f: &[f64], hinge_args: &[f64], margin: f64) -> bool {
    let spread = f.iter().enumerate().all(|(i, a)| f[i + 1..].iter().all(|b| (a - b).abs() > margin));
    spread && hinge_args.iter().all(|h| h.abs() > margin)
}

struct Draw {
    x: Vec<f64>,
    eps: Vec<f64>,
    relevant: Vec<usize>,
    specified: SpecifiedSet,
    lambdas: [f64; 2],
}

fn draw_point<R: Rng>(rng: &mut R, d: usize, c: usize, k: usize) -> Draw {
    let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eps: Vec<f64> = (0..d).map(|_| rng.random_range(-0.3..0.3)).collect();
    let n_rel = rng.random_range(k + 1..c);
    let relevant: Vec<usize> = rand::seq::index::sample(rng, c, n_rel).into_iter().collect();
    let m = rng.random_range(1..=n_rel - k);
    let specified = SpecifiedSet::new(relevant[..m].to_vec()).expect("non-empty");
    let lambdas = [rng.random_range(0.05..0.6), rng.random_range(0.05..0.6)];
    Draw { x, eps, relevant, specified, lambdas }
}

const STEP: f64 = 1e-6;
const MARGIN: f64 = 1e-4;

/// Objective and baseline gradients against central differences at
/// `points` generic points per victim. Returns one report per loss.
pub fn gradients(points: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    let (d, c, k) = (5, 8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for model in random_victims(seed ^ 0x5eed, d, c) {
        for (which, (w, n)) in worst.iter_mut().zip(counts.iter_mut()).enumerate() {
            let mut done = 0;
            while done < points {
                let p = draw_point(&mut rng, d, c, k);
                let z: Vec<f64> = p.x.iter().zip(&p.eps).map(|(a, b)| a + b).collect();
                let f = model.outputs(&z)?;
                let alpha = 0.1;
                let err = match which {
                    0 => {
                        let cfg = AttackConfig { k, alpha, ..Default::default() };
                        let rest: Vec<usize> = p.relevant.iter().copied().filter(|y| !p.specified.contains(*y)).collect();
                        let top = p.specified.indices().iter().map(|&s| f[s]).fold(f64::MIN, f64::max);
                        let low = rest.iter().map(|&y| f[y]).fold(f64::MAX, f64::min);
                        let args: Vec<f64> = (0..c)
                            .flat_map(|i| [top - f[i] - p.lambdas[0], f[i] - low - p.lambdas[1]])
                            .collect();
                        if !generic(&f, &args, MARGIN) {
                            continue;
                        }
                        let mut point = p.eps.clone();
                        point.extend(p.lambdas);
                        let eval = |v: &[f64]| {
                            tkmia_objective(&model, &p.x, &v[..d], v[d], v[d + 1], &p.specified, &p.relevant, &cfg)
                        };
                        let e = eval(&point)?;
                        let mut analytic = e.grad_eps.clone();
                        analytic.extend([e.grad_lambda1, e.grad_lambda2]);
                        let numeric = gradcheck::central_difference(|v| eval(v).expect("valid point").value, &point, STEP);
                        gradcheck::compare(&analytic, &numeric, 1e-4).max_rel_error
                    }
                    1 => {
                        let irr_max = (0..c).filter(|i| !p.relevant.contains(i)).map(|i| f[i]).fold(f64::MIN, f64::max);
                        let rel_min = p.relevant.iter().map(|&j| f[j]).fold(f64::MAX, f64::min);
                        if !generic(&f, &[rel_min - irr_max], MARGIN) {
                            continue;
                        }
                        let g = ml_cw_u_loss(&model, &p.x, &p.eps, &p.relevant, alpha)?.grad_eps;
                        let numeric = gradcheck::central_difference(
                            |e| ml_cw_u_loss(&model, &p.x, e, &p.relevant, alpha).expect("valid point").value,
                            &p.eps,
                            STEP,
                        );
                        gradcheck::compare(&g, &numeric, 1e-4).max_rel_error
                    }
                    _ => {
                        let mut sorted = f.clone();
                        sorted.sort_by(|a, b| b.total_cmp(a));
                        let rel_max = p.relevant.iter().map(|&j| f[j]).fold(f64::MIN, f64::max);
                        if !generic(&f, &[rel_max - sorted[k]], MARGIN) {
                            continue;
                        }
                        let g = tkml_ap_u_loss(&model, &p.x, &p.eps, &p.relevant, k, alpha)?.grad_eps;
                        let numeric = gradcheck::central_difference(
                            |e| tkml_ap_u_loss(&model, &p.x, e, &p.relevant, k, alpha).expect("valid point").value,
                            &p.eps,
                            STEP,
                        );
                        gradcheck::compare(&g, &numeric, 1e-4).max_rel_error
                    }
                };
                *w = w.max(err);
                *n += 1;
                done += 1;
            }
        }
    }
    let names = ["grad-tkmia", "grad-mlcwu", "grad-tkmlapu"];
    Ok(names
        .iter()
        .zip(worst)
        .zip(counts)
        .map(|((name, w), n)| SuiteReport::new(name, n, w, 1e-4))
        .collect())
}

/// Midpoint convexity of the attack objective in `(ε, λ1, λ2)` for an
/// affine scorer without the sigmoid head.
pub fn convexity(pairs: usize, seed: u64) -> Result<SuiteReport> {
    let (d, c, k) = (6, 8, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = Scorer::affine(dense(&mut rng, d, c, 1.0)).with_linear_head();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let p = draw_point(&mut rng, d, c, k);
        let q_eps: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let q_l = [rng.random::<f64>(), rng.random::<f64>()];
        let cfg = AttackConfig { k, alpha: rng.random_range(0.0..1.0), ..Default::default() };
        let value = |e: &[f64], l: [f64; 2]| {
            tkmia_objective(&model, &p.x, e, l[0], l[1], &p.specified, &p.relevant, &cfg).map(|r| r.value)
        };
        let mid_eps: Vec<f64> = p.eps.iter().zip(&q_eps).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid_l = [0.5 * (p.lambdas[0] + q_l[0]), 0.5 * (p.lambdas[1] + q_l[1])];
        let chord = 0.5 * (value(&p.eps, p.lambdas)? + value(&q_eps, q_l)?);
        worst = worst.max(value(&mid_eps, mid_l)? - chord);
    }
    Ok(SuiteReport::new("convexity", pairs, worst.max(0.0), 1e-9))
}

/// Position of every class in the tie-broken descending order, counted
/// directly from pairwise comparisons.
fn positions(f: &[f64]) -> Vec<usize> {
    (0..f.len())
        .map(|i| (0..f.len()).filter(|&j| f[j] > f[i] || (f[j] == f[i] && j < i)).count())
        .collect()
}

/// Per-instance measures against definitional versions written from rank
/// positions.
pub fn metrics(cases: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = rng.random_range(2..=12);
        let k = rng.random_range(1..=c);
        // coarse scores so ties occur
        let f: Vec<f64> = (0..c).map(|_| f64::from(rng.random_range(0..6u8)) / 5.0).collect();
        let mut bits: Vec<bool> = (0..c).map(|_| rng.random_bool(0.4)).collect();
        let forced = rng.random_range(0..c);
        bits[forced] = true;
        let y = LabelVector::new(bits);
        let pos = positions(&f);
        let in_top = |i: usize| pos[i] < k;
        let rel = y.relevant();
        let hits = rel.iter().filter(|&&i| in_top(i)).count();
        let n = rel.len().min(k);

        let acc = if hits == rel.len() { 1.0 } else { 0.0 };
        let prec = hits as f64 / k as f64;
        let ap = rel
            .iter()
            .filter(|&&i| in_top(i))
            .map(|&i| rel.iter().filter(|&&j| pos[j] <= pos[i]).count() as f64 / (pos[i] + 1) as f64)
            .sum::<f64>()
            / n as f64;
        let dcg: f64 = rel.iter().filter(|&&i| in_top(i)).map(|&i| 1.0 / ((pos[i] + 2) as f64).log2()).sum();
        let idcg: f64 = (0..n).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();

        let got = [
            f64::from(u8::from(tk_acc(&f, &y, k)?)),
            precision_at_k(&f, &y, k)?,
            ap_at_k(&f, &y, k)?,
            ndcg_at_k(&f, &y, k)?,
        ];
        for (g, want) in got.iter().zip([acc, prec, ap, dcg / idcg]) {
            worst = worst.max((g - want).abs());
        }
    }
    Ok(SuiteReport::new("metrics", cases, worst, 1e-12))
}

/// Every suite at its default size.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    let (grid, exact) = top_k_variational(1000, seed)?;
    let mut out = vec![grid, exact, nested_hinge(100_000, seed)];
    out.extend(gradients(200, seed)?);
    out.push(convexity(1000, seed)?);
    out.push(metrics(1000, seed)?);
    Ok(out)
}
