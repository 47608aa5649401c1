//! Independent reference computations shared by the integration tests.
//!
//! Everything here is written from the model definition with plain loops and
//! touches the library only to read factors, so a transcription error in the
//! library cannot cancel out.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sad_core::data::{InteractionDataset, LooSplit, RawInteraction};
use sad_core::gibbs::{GibbsConfig, ProbitState};
use sad_core::{Direction, FactorMatrix, FactorModel, Observation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize, k: usize) -> FactorModel<f64> {
    let xi = FactorMatrix::from_fn(k, n, |_, _| rng.random_range(-2.0..2.0));
    let h = FactorMatrix::from_fn(k, m, |_, _| rng.random_range(-2.0..2.0));
    let t = FactorMatrix::from_fn(k, m, |_, _| rng.random_range(0.1..3.0));
    FactorModel::new(xi, h, t).unwrap()
}

/// `sum_h xi_hu (eta_hi tau_hj - eta_hj tau_hi)` term by term.
pub fn direct_preference(model: &FactorModel<f64>, u: usize, i: usize, j: usize) -> f64 {
    let (xi, h, t) = (
        model.user_factors(),
        model.left_item_factors(),
        model.right_item_factors(),
    );
    (0..model.n_factors())
        .map(|c| xi.get(c, u) * (h.get(c, i) * t.get(c, j) - h.get(c, j) * t.get(c, i)))
        .sum()
}

/// `log p(d | x)` for a Bernoulli with `p(+1) = 1 / (1 + exp(-x))`.
pub fn bernoulli_log_prob(x: f64, d: Direction) -> f64 {
    let s = match d {
        Direction::Positive => x,
        Direction::Negative => -x,
    };
    if s > 0.0 {
        -(-s).exp().ln_1p()
    } else {
        s - s.exp().ln_1p()
    }
}

pub fn observation_log_prob(model: &FactorModel<f64>, o: &Observation) -> f64 {
    bernoulli_log_prob(direct_preference(model, o.user, o.first, o.second), o.direction)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    User,
    Left,
    Right,
}

/// Copy of `model` with one entry shifted by `delta`.
pub fn perturbed(model: &FactorModel<f64>, block: Block, row: usize, col: usize, delta: f64) -> FactorModel<f64> {
    let (mut xi, mut h, mut t) = model.clone().into_parts();
    let m = match block {
        Block::User => &mut xi,
        Block::Left => &mut h,
        Block::Right => &mut t,
    };
    m.set(row, col, m.get(row, col) + delta);
    FactorModel::new(xi, h, t).unwrap()
}

/// Central difference of the observation log-likelihood in one entry.
pub fn central_difference(model: &FactorModel<f64>, o: &Observation, block: Block, row: usize, col: usize, step: f64) -> f64 {
    let up = observation_log_prob(&perturbed(model, block, row, col, step), o);
    let down = observation_log_prob(&perturbed(model, block, row, col, -step), o);
    (up - down) / (2.0 * step)
}

/// Largest relative error between analytic and numeric partials over
/// `instances` random problems with `k <= 8`.
pub fn max_gradient_error(seed: u64, instances: usize) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let k = r.random_range(1..=8);
        let n = r.random_range(1..=4);
        let m = r.random_range(2..=6);
        let model = random_model(&mut r, n, m, k);
        let u = r.random_range(0..n);
        let i = r.random_range(0..m);
        let j = loop {
            let j = r.random_range(0..m);
            if j != i {
                break j;
            }
        };
        let d = if r.random::<bool>() {
            Direction::Positive
        } else {
            Direction::Negative
        };
        let o = Observation::new(u, i, j, d);
        let g = sad_core::sgd::observation_gradients(&model, u, i, j, d).unwrap();
        let checks = [
            (&g.d_user, Block::User, u),
            (&g.d_left_i, Block::Left, i),
            (&g.d_left_j, Block::Left, j),
            (&g.d_right_i, Block::Right, i),
            (&g.d_right_j, Block::Right, j),
        ];
        for (analytic, block, col) in checks {
            for (c, &a) in analytic.iter().enumerate() {
                let numeric = central_difference(&model, &o, block, c, col, 1e-5);
                let scale = a.abs().max(numeric.abs()).max(1e-3);
                worst = worst.max((a - numeric).abs() / scale);
            }
        }
    }
    worst
}

/// Augmented probit joint: Gaussian `z` around `x` with sign support, and
/// independent `N(0, prior_var)` entries with `T >= 0`.
pub fn probit_joint(model: &FactorModel<f64>, obs: &[Observation], z: &[f64], prior_var: f64) -> f64 {
    let c = 0.5 * (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    for (o, &zv) in obs.iter().zip(z) {
        let ok = match o.direction {
            Direction::Positive => zv > 0.0,
            Direction::Negative => zv <= 0.0,
        };
        if !ok {
            return f64::NEG_INFINITY;
        }
        let x = direct_preference(model, o.user, o.first, o.second);
        total += -0.5 * (zv - x).powi(2) - c;
    }
    for mat in [model.user_factors(), model.left_item_factors(), model.right_item_factors()] {
        for r in 0..mat.rows() {
            for col in 0..mat.cols() {
                let v = mat.get(r, col);
                total += -0.5 * v * v / prior_var - c - 0.5 * prior_var.ln();
            }
        }
    }
    if model.right_item_factors().as_slice().iter().any(|t| *t < 0.0) {
        return f64::NEG_INFINITY;
    }
    total
}

/// Five users over thirty items with hand-picked ratings. User `u` skips
/// the six items with `(7i + 3u) % 5 == 0`, so every item is rated by four
/// users and everyone has six never-interacted items. A few interactions
/// carry no rating on purpose.
pub fn toy_rated_dataset() -> InteractionDataset {
    let mut recs = Vec::new();
    for u in 0..5usize {
        for i in 0..30usize {
            if (7 * i + 3 * u) % 5 == 0 {
                continue;
            }
            let rating = if (i * u) % 11 == 5 {
                None
            } else {
                Some(1 + ((3 * i + 7 * u) % 5) as i32)
            };
            recs.push(RawInteraction {
                user: format!("u{u}"),
                item: format!("i{i}"),
                rating,
                timestamp: None,
            });
        }
    }
    InteractionDataset::from_records(&recs).unwrap()
}

pub struct BruteConsistency {
    pub mean_x: f64,
    pub match_fraction: f64,
    pub per_user_median: f64,
    pub users: usize,
    pub pairs: usize,
    pub skipped: usize,
}

pub fn brute_consistency(model: &FactorModel<f64>, split: &LooSplit, full: &InteractionDataset) -> BruteConsistency {
    let mut sum = 0.0;
    let mut hits = 0usize;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    let mut shares: Vec<f64> = Vec::new();
    for u in 0..full.n_users() {
        let Some(&o) = split.holdout.get(&u) else { continue };
        let mut up = 0usize;
        let mut uh = 0usize;
        for &j in split.train.implicit().items(u) {
            let ro = full.rating(u, o);
            let rj = full.rating(u, j);
            match (ro, rj) {
                (Some(a), Some(b)) if a != b => {
                    let x = if a > b {
                        direct_preference(model, u, o, j)
                    } else {
                        direct_preference(model, u, j, o)
                    };
                    sum += x;
                    up += 1;
                    if x > 0.0 {
                        uh += 1;
                    }
                }
                _ => skipped += 1,
            }
        }
        if up > 0 {
            shares.push(uh as f64 / up as f64);
        }
        pairs += up;
        hits += uh;
    }
    shares.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = match shares.len() {
        0 => 0.0,
        n if n % 2 == 1 => shares[n / 2],
        n => (shares[n / 2 - 1] + shares[n / 2]) / 2.0,
    };
    BruteConsistency {
        mean_x: if pairs > 0 { sum / pairs as f64 } else { 0.0 },
        match_fraction: if pairs > 0 { hits as f64 / pairs as f64 } else { 0.0 },
        per_user_median: median,
        users: shares.len(),
        pairs,
        skipped,
    }
}

pub fn brute_rank_m1(model: &FactorModel<f64>, u: usize, o: usize, negatives: &[usize]) -> usize {
    let mut rank = 0;
    for &j in negatives {
        if direct_preference(model, u, j, o) > 0.0 {
            rank += 1;
        }
    }
    rank
}

pub fn brute_score_m2(model: &FactorModel<f64>, u: usize, t: usize, train: &[usize]) -> f64 {
    let mut wins = 0;
    for &i in train {
        if direct_preference(model, u, t, i) > 0.0 {
            wins += 1;
        }
    }
    wins as f64 / train.len() as f64
}

pub fn brute_rank_m2(model: &FactorModel<f64>, u: usize, o: usize, negatives: &[usize], train: &[usize]) -> usize {
    let own = brute_score_m2(model, u, o, train);
    negatives
        .iter()
        .filter(|&&j| brute_score_m2(model, u, j, train) > own)
        .count()
}

pub fn brute_hit_ratio(ranks: &[usize], threshold: usize) -> f64 {
    let mut hits = 0;
    for &r in ranks {
        if r < threshold {
            hits += 1;
        }
    }
    hits as f64 / ranks.len() as f64
}

/// Seeded probit state on 3 users and 4 items with k = 2, a few sweeps in.
pub fn tiny_probit_state() -> ProbitState {
    let mut r = rng(31);
    let mut obs = Vec::new();
    for u in 0..3 {
        for i in 0..4 {
            for j in (i + 1)..4 {
                if r.random::<f64>() < 0.75 {
                    let d = if r.random::<bool>() {
                        Direction::Positive
                    } else {
                        Direction::Negative
                    };
                    obs.push(Observation::new(u, i, j, d));
                }
            }
        }
    }
    let config = GibbsConfig {
        n_factors: 2,
        seed: 77,
        ..GibbsConfig::default()
    };
    let mut state = ProbitState::new(&obs, 3, 4, config).unwrap();
    for _ in 0..5 {
        state.sweep().unwrap();
    }
    state
}

pub fn probit_state_joint(state: &ProbitState) -> f64 {
    probit_joint(state.model(), state.observations(), state.z(), state.config().prior_var)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

fn random_vector(r: &mut impl Rng, k: usize, non_negative: bool) -> Vec<f64> {
    (0..k)
        .map(|_| {
            if non_negative {
                r.random_range(0.0..3.0)
            } else {
                r.random_range(-3.0..3.0)
            }
        })
        .collect()
}

/// Largest relative gap between the conditional log-density difference and
/// the joint log-density difference over `pairs` random value pairs, for the
/// user, left-item, right-item and latent conditionals in that order.
pub fn conditional_ratio_errors(pairs: usize) -> [f64; 4] {
    let mut worst = [0.0f64; 4];
    let mut state = tiny_probit_state();
    let mut r = rng(1);
    for trial in 0..pairs {
        let u = trial % 3;
        let spec = state.user_conditional(u).unwrap();
        let (a, b) = (random_vector(&mut r, 2, false), random_vector(&mut r, 2, false));
        state.set_user_factor(u, &a);
        let ja = probit_state_joint(&state);
        state.set_user_factor(u, &b);
        let jb = probit_state_joint(&state);
        let got = spec.log_density_unnormalized(&b) - spec.log_density_unnormalized(&a);
        worst[0] = worst[0].max(rel_err(got, jb - ja));
    }
    let mut state = tiny_probit_state();
    for trial in 0..pairs {
        let i = trial % 4;
        let spec = state.left_item_conditional(i).unwrap();
        let (a, b) = (random_vector(&mut r, 2, false), random_vector(&mut r, 2, false));
        state.set_left_item_factor(i, &a);
        let ja = probit_state_joint(&state);
        state.set_left_item_factor(i, &b);
        let jb = probit_state_joint(&state);
        let got = spec.log_density_unnormalized(&b) - spec.log_density_unnormalized(&a);
        worst[1] = worst[1].max(rel_err(got, jb - ja));
    }
    let mut state = tiny_probit_state();
    for trial in 0..pairs {
        let j = trial % 4;
        let spec = state.right_item_conditional(j).unwrap();
        let (a, b) = (random_vector(&mut r, 2, true), random_vector(&mut r, 2, true));
        state.set_right_item_factor(j, &a).unwrap();
        let ja = probit_state_joint(&state);
        state.set_right_item_factor(j, &b).unwrap();
        let jb = probit_state_joint(&state);
        let got = spec.log_density_unnormalized(&b) - spec.log_density_unnormalized(&a);
        worst[2] = worst[2].max(rel_err(got, jb - ja));
    }
    let mut state = tiny_probit_state();
    let n = state.observations().len();
    for trial in 0..pairs {
        let idx = trial % n;
        let sign = state.observations()[idx].direction.sign();
        let a = sign * r.random_range(0.01..4.0);
        let b = sign * r.random_range(0.01..4.0);
        state.set_z(idx, a);
        let ja = probit_state_joint(&state);
        state.set_z(idx, b);
        let jb = probit_state_joint(&state);
        let got = state.z_conditional_log_density(idx, b) - state.z_conditional_log_density(idx, a);
        worst[3] = worst[3].max(rel_err(got, jb - ja));
    }
    worst
}

/// Worst observed deviation of each structural property over `probes`
/// random (model, indices) draws: anti-symmetry, zero diagonal, probability
/// complement, reduction to dot products with unit `T`, and transitivity
/// when three items share their `T` column.
pub fn structural_probe_worst(seed: u64, probes: usize) -> [f64; 5] {
    let mut r = rng(seed);
    let mut worst = [0.0f64; 5];
    for _ in 0..probes {
        let n = r.random_range(1..4);
        let m = r.random_range(3..9);
        let k = r.random_range(1..9);
        let model = random_model(&mut r, n, m, k);
        let u = r.random_range(0..n);
        let (i, j, t) = (r.random_range(0..m), r.random_range(0..m), r.random_range(0..m));
        let x_ij = model.preference(u, i, j).unwrap().value();
        let x_ji = model.preference(u, j, i).unwrap().value();
        worst[0] = worst[0].max((x_ij + x_ji).abs());
        worst[1] = worst[1].max(model.preference(u, i, i).unwrap().value().abs());
        let p = model.prob_prefer(u, i, j).unwrap() + model.prob_prefer(u, j, i).unwrap();
        worst[2] = worst[2].max((p - 1.0).abs());

        let (xi, h, tm) = model.into_parts();
        let bpr = FactorModel::with_unit_right_factors(xi.clone(), h.clone()).unwrap();
        let dot = |item: usize| -> f64 { (0..k).map(|c| xi.get(c, u) * h.get(c, item)).sum() };
        let want = dot(i) - dot(j);
        let got = bpr.preference(u, i, j).unwrap().value();
        worst[3] = worst[3].max((got - want).abs() / want.abs().max(1.0));

        if i != j && j != t && i != t {
            let mut shared = tm;
            for c in 0..k {
                let v = shared.get(c, i);
                shared.set(c, t, v);
                shared.set(c, j, v);
            }
            let tied = FactorModel::new(xi, h, shared).unwrap();
            let res = tied.transitivity_residual(u, i, t, j).unwrap().abs();
            let scale = direct_preference(&tied, u, i, t).abs().max(1.0);
            worst[4] = worst[4].max(res / scale);
        }
    }
    worst
}
