//! Stochastic gradient ascent on the logistic log-likelihood.
//!
//! Every observation `(u, i, j, d)` contributes the gradients
//!
//! ```text
//! w        = sigmoid(-x_uij) - [d == -1]
//! d xi_u   = w (eta_i * tau_j - eta_j * tau_i)
//! d eta_i  =  w xi_u * tau_j
//! d eta_j  = -w xi_u * tau_i
//! d tau_i  = -w xi_u * eta_j
//! d tau_j  =  w xi_u * eta_i
//! ```
//!
//! User and left item vectors get an l2 penalty. Right item vectors get an
//! l1 penalty centred at one, applied as a proximal step so that entries
//! close to one snap onto it, and are then clamped at zero.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{sample_negative, ImplicitFeedback};
use crate::error::{Result, SadError};
use crate::model::{log_prob, sigmoid, Direction, FactorMatrix, FactorModel, Observation};
use crate::rng::{indexed_stream, stream, SadRng, STREAM_INIT, STREAM_NEGATIVES, STREAM_SHUFFLE};
use crate::scalar::Scalar;
use crate::simulation::sparsity;

/// Dead-zone half-width used for the logged T-sparsity.
pub const SPARSITY_TOL: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub epochs: usize,
    pub n_factors: usize,
    pub seed: u64,
    /// Stop early once the relative change of the epoch mean log-likelihood
    /// falls below this; zero disables early stopping.
    pub convergence_rel_tol: f64,
    /// Keep `T` fixed at one (the dot-product baseline).
    pub freeze_right_factors: bool,
    /// Visit users and items in a random order each epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            l1_weight: 0.01,
            l2_weight: 0.005,
            epochs: 20,
            n_factors: 5,
            seed: 0,
            convergence_rel_tol: 0.0,
            freeze_right_factors: false,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(SadError::Config(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if [self.l1_weight, self.l2_weight].iter().any(|w| w.is_nan() || *w < 0.0) {
            return bad("regularization weights must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.n_factors == 0 {
            return bad("n_factors must be at least 1");
        }
        if self.convergence_rel_tol.is_nan() || self.convergence_rel_tol < 0.0 {
            return bad("convergence_rel_tol must be non-negative");
        }
        Ok(())
    }

    /// `key=value` lines, one per field, in declaration order.
    pub fn to_key_values(&self) -> String {
        format!(
            "learning_rate={}\nl1_weight={}\nl2_weight={}\nepochs={}\nn_factors={}\nseed={}\n\
             convergence_rel_tol={}\nfreeze_right_factors={}\nshuffle={}\n",
            self.learning_rate,
            self.l1_weight,
            self.l2_weight,
            self.epochs,
            self.n_factors,
            self.seed,
            self.convergence_rel_tol,
            self.freeze_right_factors,
            self.shuffle
        )
    }

    /// Sets one field by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| SadError::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "l1_weight" => self.l1_weight = parse(key, value)?,
            "l2_weight" => self.l2_weight = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "n_factors" => self.n_factors = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "convergence_rel_tol" => self.convergence_rel_tol = parse(key, value)?,
            "freeze_right_factors" => self.freeze_right_factors = parse(key, value)?,
            "shuffle" => self.shuffle = parse(key, value)?,
            other => return Err(SadError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` file; `#` starts a comment.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SadError::Parse {
                line: n + 1,
                message: format!("expected key=value, found {line:?}"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }
}

/// Per-observation partial derivatives of the log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub weight: f64,
    pub d_user: Vec<f64>,
    pub d_left_i: Vec<f64>,
    pub d_left_j: Vec<f64>,
    pub d_right_i: Vec<f64>,
    pub d_right_j: Vec<f64>,
}

/// Gradient weight `sigmoid(-x) - [d == -1]`.
#[inline]
pub fn gradient_weight(x: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Positive => sigmoid(-x),
        Direction::Negative => sigmoid(-x) - 1.0,
    }
}

pub fn observation_gradients<S: Scalar>(
    model: &FactorModel<S>,
    u: usize,
    i: usize,
    j: usize,
    direction: Direction,
) -> Result<GradientBundle> {
    if i == j {
        return Err(SadError::Contract(format!("gradient needs i != j, got {i} twice")));
    }
    let x = model.preference(u, i, j)?.value();
    let w = gradient_weight(x, direction);
    let xi = model.user_factors().column(u);
    let (ei, ej) = (
        model.left_item_factors().column(i),
        model.left_item_factors().column(j),
    );
    let (ti, tj) = (
        model.right_item_factors().column(i),
        model.right_item_factors().column(j),
    );
    let k = model.n_factors();
    let mut g = GradientBundle {
        weight: w,
        d_user: Vec::with_capacity(k),
        d_left_i: Vec::with_capacity(k),
        d_left_j: Vec::with_capacity(k),
        d_right_i: Vec::with_capacity(k),
        d_right_j: Vec::with_capacity(k),
    };
    for h in 0..k {
        let (x_h, ei_h, ej_h, ti_h, tj_h) = (
            xi[h].widen(),
            ei[h].widen(),
            ej[h].widen(),
            ti[h].widen(),
            tj[h].widen(),
        );
        g.d_user.push(w * (ei_h * tj_h - ej_h * ti_h));
        g.d_left_i.push(w * x_h * tj_h);
        g.d_left_j.push(-w * x_h * ti_h);
        g.d_right_i.push(-w * x_h * ej_h);
        g.d_right_j.push(w * x_h * ei_h);
    }
    Ok(g)
}

/// Proximal step for `step * |tau - 1|` followed by projection onto `tau >= 0`.
#[inline]
pub fn l1_prox_toward_one(value: f64, step: f64) -> f64 {
    let v = if value > 1.0 + step {
        value - step
    } else if value < 1.0 - step {
        value + step
    } else {
        1.0
    };
    v.max(0.0)
}

/// Applies one observation's update in place and returns its pre-update
/// log-likelihood.
fn sgd_step<S: Scalar>(
    model: &mut FactorModel<S>,
    obs: Observation,
    config: &TrainConfig,
    buf: &mut Vec<f64>,
) -> f64 {
    let Observation {
        user: u,
        first: i,
        second: j,
        direction,
    } = obs;
    let x = model.preference_value(u, i, j);
    let w = gradient_weight(x, direction);
    let rho = config.learning_rate;
    let decay = 2.0 * config.l2_weight;
    let l1_step = rho * config.l1_weight;
    let k = model.n_factors();

    // Snapshot pre-update values: [xi | eta_i | eta_j | tau_i | tau_j].
    buf.clear();
    {
        let xi = model.user_factors().column(u);
        let h = model.left_item_factors();
        let t = model.right_item_factors();
        buf.extend(xi.iter().map(|v| v.widen()));
        buf.extend(h.column(i).iter().map(|v| v.widen()));
        buf.extend(h.column(j).iter().map(|v| v.widen()));
        buf.extend(t.column(i).iter().map(|v| v.widen()));
        buf.extend(t.column(j).iter().map(|v| v.widen()));
    }
    let (xi, rest) = buf.split_at(k);
    let (ei, rest) = rest.split_at(k);
    let (ej, rest) = rest.split_at(k);
    let (ti, tj) = rest.split_at(k);

    let freeze = config.freeze_right_factors;
    let (user_m, left_m, right_m) = model.parts_mut();
    {
        let col = user_m.column_mut(u);
        for h in 0..k {
            let g = w * (ei[h] * tj[h] - ej[h] * ti[h]);
            col[h] = S::narrow(xi[h] + rho * (g - decay * xi[h]));
        }
    }
    {
        let col = left_m.column_mut(i);
        for h in 0..k {
            col[h] = S::narrow(ei[h] + rho * (w * xi[h] * tj[h] - decay * ei[h]));
        }
    }
    {
        let col = left_m.column_mut(j);
        for h in 0..k {
            col[h] = S::narrow(ej[h] + rho * (-w * xi[h] * ti[h] - decay * ej[h]));
        }
    }
    if !freeze {
        {
            let col = right_m.column_mut(i);
            for h in 0..k {
                let g = ti[h] + rho * (-w * xi[h] * ej[h]);
                col[h] = S::narrow(l1_prox_toward_one(g, l1_step));
            }
        }
        {
            let col = right_m.column_mut(j);
            for h in 0..k {
                let g = tj[h] + rho * (w * xi[h] * ei[h]);
                col[h] = S::narrow(l1_prox_toward_one(g, l1_step));
            }
        }
    }
    log_prob(x, direction)
}

/// Result of one pass over the data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochSummary {
    /// Mean log-likelihood of the visited observations before each update.
    pub mean_loglik: f64,
    pub updates: usize,
    pub skipped_users: usize,
}

/// One pass of the implicit-feedback loop: for every user and every
/// interacted item, draw one non-interacted rival and ascend on `d = +1`.
pub fn sgd_epoch<S: Scalar>(
    model: &mut FactorModel<S>,
    feedback: &ImplicitFeedback,
    config: &TrainConfig,
    rng: &mut SadRng,
    shuffle_rng: Option<&mut SadRng>,
) -> Result<EpochSummary> {
    check_shapes(model, feedback.n_users(), feedback.n_items())?;
    let mut users: Vec<usize> = (0..feedback.n_users()).collect();
    let mut shuffle_rng = shuffle_rng;
    if let Some(r) = shuffle_rng.as_deref_mut() {
        users.shuffle(r);
    }
    let mut buf = Vec::with_capacity(5 * model.n_factors());
    let mut total = 0.0;
    let mut updates = 0;
    let mut skipped = 0;
    let mut order: Vec<usize> = Vec::new();
    for u in users {
        let items = feedback.items(u);
        if items.is_empty() || feedback.non_interacted_count(u) == 0 {
            skipped += 1;
            continue;
        }
        order.clear();
        order.extend_from_slice(items);
        if let Some(r) = shuffle_rng.as_deref_mut() {
            order.shuffle(r);
        }
        for &i in &order {
            let j = sample_negative(feedback, u, rng)?;
            total += sgd_step(model, Observation::new(u, i, j, Direction::Positive), config, &mut buf);
            updates += 1;
        }
    }
    Ok(EpochSummary {
        mean_loglik: if updates > 0 { total / updates as f64 } else { 0.0 },
        updates,
        skipped_users: skipped,
    })
}

/// One pass over explicit observations (both label signs allowed).
pub fn observation_epoch<S: Scalar>(
    model: &mut FactorModel<S>,
    observations: &[Observation],
    config: &TrainConfig,
    shuffle_rng: Option<&mut SadRng>,
) -> Result<EpochSummary> {
    let mut order: Vec<usize> = (0..observations.len()).collect();
    if let Some(r) = shuffle_rng {
        order.shuffle(r);
    }
    let mut buf = Vec::with_capacity(5 * model.n_factors());
    let mut total = 0.0;
    for &idx in &order {
        let obs = observations[idx];
        if obs.first == obs.second {
            return Err(SadError::Contract(format!(
                "observation {idx} compares item {} with itself",
                obs.first
            )));
        }
        total += sgd_step(model, obs, config, &mut buf);
    }
    Ok(EpochSummary {
        mean_loglik: if order.is_empty() { 0.0 } else { total / order.len() as f64 },
        updates: order.len(),
        skipped_users: 0,
    })
}

fn check_shapes<S: Scalar>(model: &FactorModel<S>, n_users: usize, n_items: usize) -> Result<()> {
    if model.n_users() != n_users || model.n_items() != n_items {
        return Err(SadError::ShapeMismatch(format!(
            "model is {}x{}, data is {n_users}x{n_items}",
            model.n_users(),
            model.n_items()
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loglik: f64,
    pub t_sparsity: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    /// Mean log-likelihood of the initial model on the same kind of pass.
    pub initial_loglik: f64,
    pub epochs: Vec<EpochRecord>,
    pub skipped_users: usize,
}

impl TrainingLog {
    pub fn final_loglik(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.mean_loglik)
    }

    /// Delimited text `epoch,mean_loglik,t_sparsity,seconds`. With
    /// `include_timing == false` the seconds field is left empty so the file
    /// is a pure function of the inputs.
    pub fn to_csv(&self, include_timing: bool) -> String {
        let mut out = String::from("epoch,mean_loglik,t_sparsity,seconds\n");
        for r in &self.epochs {
            let secs = if include_timing {
                format!("{:.6}", r.seconds)
            } else {
                String::new()
            };
            out.push_str(&format!(
                "{},{:e},{:e},{}\n",
                r.epoch, r.mean_loglik, r.t_sparsity, secs
            ));
        }
        out
    }
}

/// Fresh model: `Xi`, `H` with i.i.d. standard normal entries, `T` all ones.
pub fn initialize_model<S: Scalar>(n_users: usize, n_items: usize, config: &TrainConfig) -> FactorModel<S> {
    let k = config.n_factors;
    let mut rng = stream(config.seed, STREAM_INIT);
    let mut draw = |_, _| S::narrow(StandardNormal.sample(&mut rng));
    let xi = FactorMatrix::from_fn(k, n_users, &mut draw);
    let h = FactorMatrix::from_fn(k, n_items, &mut draw);
    FactorModel::with_unit_right_factors(xi, h).expect("consistent shapes")
}

/// What a training run iterates over.
#[derive(Clone, Copy, Debug)]
pub enum TrainingData<'a> {
    /// Interacted items against sampled non-interacted rivals.
    Feedback(&'a ImplicitFeedback),
    /// Explicit labelled comparisons.
    Observations(&'a [Observation]),
}

fn initial_loglik<S: Scalar>(model: &FactorModel<S>, data: TrainingData<'_>, seed: u64) -> Result<f64> {
    match data {
        TrainingData::Observations(obs) => {
            if obs.is_empty() {
                return Ok(0.0);
            }
            let total: f64 = obs
                .iter()
                .map(|o| log_prob(model.preference_value(o.user, o.first, o.second), o.direction))
                .sum();
            Ok(total / obs.len() as f64)
        }
        TrainingData::Feedback(fb) => {
            let mut rng = indexed_stream(seed, STREAM_NEGATIVES, u64::MAX);
            let mut total = 0.0;
            let mut count = 0usize;
            for u in 0..fb.n_users() {
                if fb.non_interacted_count(u) == 0 {
                    continue;
                }
                for &i in fb.items(u) {
                    let j = sample_negative(fb, u, &mut rng)?;
                    total += log_prob(model.preference_value(u, i, j), Direction::Positive);
                    count += 1;
                }
            }
            Ok(if count > 0 { total / count as f64 } else { 0.0 })
        }
    }
}

/// Runs epochs on `model` until the epoch budget or the convergence test
/// stops it. `on_epoch` sees the model after every completed epoch.
pub fn fit<S: Scalar>(
    model: &mut FactorModel<S>,
    data: TrainingData<'_>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &FactorModel<S>),
) -> Result<TrainingLog> {
    config.validate()?;
    if model.n_factors() != config.n_factors {
        return Err(SadError::ShapeMismatch(format!(
            "model has {} factors, config asks for {}",
            model.n_factors(),
            config.n_factors
        )));
    }
    match data {
        TrainingData::Feedback(fb) => {
            if fb.n_interactions() == 0 {
                return Err(SadError::EmptyDataset);
            }
            check_shapes(model, fb.n_users(), fb.n_items())?;
        }
        TrainingData::Observations(obs) => {
            if obs.is_empty() {
                return Err(SadError::EmptyDataset);
            }
            for o in obs {
                model.check_user(o.user)?;
                model.check_item(o.first)?;
                model.check_item(o.second)?;
            }
        }
    }
    if config.freeze_right_factors
        && model.right_item_factors().as_slice().iter().any(|t| *t != S::one())
    {
        return Err(SadError::Contract(
            "frozen right factors must start at one".into(),
        ));
    }

    let mut log = TrainingLog {
        initial_loglik: initial_loglik(model, data, config.seed)?,
        ..Default::default()
    };
    let mut neg_rng = stream(config.seed, STREAM_NEGATIVES);
    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut previous: Option<f64> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let shuffle = if config.shuffle { Some(&mut shuffle_rng) } else { None };
        let summary = match data {
            TrainingData::Feedback(fb) => sgd_epoch(model, fb, config, &mut neg_rng, shuffle)?,
            TrainingData::Observations(obs) => observation_epoch(model, obs, config, shuffle)?,
        };
        if !model.all_finite() || !summary.mean_loglik.is_finite() {
            return Err(SadError::Diverged { epoch });
        }
        log.skipped_users = summary.skipped_users;
        let record = EpochRecord {
            epoch,
            mean_loglik: summary.mean_loglik,
            t_sparsity: sparsity(model.right_item_factors(), SPARSITY_TOL),
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record, model);
        log.epochs.push(record);

        if config.convergence_rel_tol > 0.0 {
            if let Some(prev) = previous {
                let rel = (summary.mean_loglik - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
                if rel < config.convergence_rel_tol {
                    break;
                }
            }
        }
        previous = Some(summary.mean_loglik);
    }
    Ok(log)
}

/// Trains a fresh model on implicit feedback.
pub fn train<S: Scalar>(
    feedback: &ImplicitFeedback,
    config: &TrainConfig,
) -> Result<(FactorModel<S>, TrainingLog)> {
    config.validate()?;
    let mut model = initialize_model(feedback.n_users(), feedback.n_items(), config);
    let log = fit(&mut model, TrainingData::Feedback(feedback), config, |_, _| {})?;
    Ok((model, log))
}

/// [`train`] with the right item factors frozen at one.
pub fn train_bpr<S: Scalar>(
    feedback: &ImplicitFeedback,
    config: &TrainConfig,
) -> Result<(FactorModel<S>, TrainingLog)> {
    let config = TrainConfig {
        freeze_right_factors: true,
        ..config.clone()
    };
    train(feedback, &config)
}

/// Trains a fresh model on explicit observations.
pub fn train_observations<S: Scalar>(
    observations: &[Observation],
    n_users: usize,
    n_items: usize,
    config: &TrainConfig,
) -> Result<(FactorModel<S>, TrainingLog)> {
    config.validate()?;
    let mut model = initialize_model(n_users, n_items, config);
    let log = fit(&mut model, TrainingData::Observations(observations), config, |_, _| {})?;
    Ok((model, log))
}
