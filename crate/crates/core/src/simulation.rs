//! Synthetic ground truth and recovery metrics.
//!
//! `Sim1` keeps `T` at one, so the truth is a plain dot-product model.
//! `Sim2` pushes a fixed share of `T` entries to extreme values, which the
//! dot-product model cannot express.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::data::mask_missing;
use crate::error::{Result, SadError};
use crate::model::{sigmoid, Direction, FactorMatrix, FactorModel, Observation};
use crate::rng::{indexed_stream, stream, STREAM_MASK, STREAM_TRUTH};
use crate::scalar::Scalar;
use crate::sgd::{fit, initialize_model, TrainConfig, TrainingData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimKind {
    Sim1,
    Sim2,
}

impl fmt::Display for SimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SimKind::Sim1 => "sim1",
            SimKind::Sim2 => "sim2",
        })
    }
}

impl FromStr for SimKind {
    type Err = SadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim1" => Ok(SimKind::Sim1),
            "sim2" => Ok(SimKind::Sim2),
            other => Err(SadError::Config(format!("unknown simulation kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_factors: usize,
    pub kind: SimKind,
    /// Share of `T` entries pushed to an extreme value (ignored for `Sim1`).
    pub extreme_fraction: f64,
    pub extreme_values: (f64, f64),
    pub seed: u64,
}

impl SimSpec {
    pub fn new(kind: SimKind, seed: u64) -> Self {
        SimSpec {
            n_users: 20,
            n_items: 50,
            n_factors: 5,
            kind,
            extreme_fraction: match kind {
                SimKind::Sim1 => 0.0,
                SimKind::Sim2 => 0.14,
            },
            extreme_values: (0.01, 5.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items < 2 || self.n_factors == 0 {
            return Err(SadError::Config(
                "simulation needs at least 1 user, 2 items and 1 factor".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.extreme_fraction) {
            return Err(SadError::Config(format!(
                "extreme_fraction {} outside [0, 1)",
                self.extreme_fraction
            )));
        }
        let (lo, hi) = self.extreme_values;
        if !(lo >= 0.0 && hi >= 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(SadError::Config("extreme values must be finite and non-negative".into()));
        }
        Ok(())
    }

    fn effective_extreme_fraction(&self) -> f64 {
        match self.kind {
            SimKind::Sim1 => 0.0,
            SimKind::Sim2 => self.extreme_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimTruth {
    pub model: FactorModel<f64>,
    /// One labelled comparison for every user and every pair `i < j`.
    pub observations: Vec<Observation>,
}

/// Draws `d = +1` with probability `sigmoid(x)`.
pub fn draw_direction<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Direction {
    if rng.random::<f64>() < sigmoid(x) {
        Direction::Positive
    } else {
        Direction::Negative
    }
}

pub fn generate_truth(spec: &SimSpec) -> Result<SimTruth> {
    spec.validate()?;
    let (n, m, k) = (spec.n_users, spec.n_items, spec.n_factors);
    let mut rng = stream(spec.seed, STREAM_TRUTH);
    let unif = Uniform::new_inclusive(-2.0, 2.0).expect("valid range");
    let xi = FactorMatrix::from_fn(k, n, |_, _| unif.sample(&mut rng));
    let h = FactorMatrix::from_fn(k, m, |_, _| unif.sample(&mut rng));
    let mut t = FactorMatrix::<f64>::ones(k, m);
    let n_extreme = (spec.effective_extreme_fraction() * (k * m) as f64).round() as usize;
    if n_extreme > 0 {
        let mut picked = index::sample(&mut rng, k * m, n_extreme).into_vec();
        picked.sort_unstable();
        let (lo, hi) = spec.extreme_values;
        let slots = t.as_mut_slice();
        for p in picked {
            slots[p] = if rng.random::<bool>() { lo } else { hi };
        }
    }
    let model = FactorModel::new(xi, h, t)?;
    let mut observations = Vec::with_capacity(n * m * (m - 1) / 2);
    for u in 0..n {
        for i in 0..m {
            for j in (i + 1)..m {
                let d = draw_direction(model.preference_value(u, i, j), &mut rng);
                observations.push(Observation::new(u, i, j, d));
            }
        }
    }
    Ok(SimTruth {
        model,
        observations,
    })
}

/// Fraction of entries with `|tau - 1| < tol`.
pub fn sparsity<S: Scalar>(t: &FactorMatrix<S>, tol: f64) -> f64 {
    let values = t.as_slice();
    if values.is_empty() {
        return 1.0;
    }
    let inside = values
        .iter()
        .filter(|v| (v.widen() - 1.0).abs() < tol)
        .count();
    inside as f64 / values.len() as f64
}

/// Mean over users of the squared Frobenius distance between preference
/// slices, divided by `m^2`.
pub fn frobenius_mse<S: Scalar, T: Scalar>(a: &FactorModel<S>, b: &FactorModel<T>) -> Result<f64> {
    if a.n_users() != b.n_users() || a.n_items() != b.n_items() {
        return Err(SadError::ShapeMismatch(format!(
            "cannot compare {}x{} with {}x{}",
            a.n_users(),
            a.n_items(),
            b.n_users(),
            b.n_items()
        )));
    }
    let (n, m) = (a.n_users(), a.n_items());
    let mut total = 0.0;
    for u in 0..n {
        let mut slice = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = a.preference_value(u, i, j) - b.preference_value(u, i, j);
                slice += d * d;
            }
        }
        // Both triangles contribute equally; the diagonal is zero.
        total += 2.0 * slice;
    }
    Ok(total / (n as f64 * (m * m) as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub spec: SimSpec,
    pub missing_fractions: Vec<f64>,
    pub sad: TrainConfig,
    pub bpr: TrainConfig,
}

impl StudyConfig {
    /// Simulation defaults: both models share everything except frozen `T`.
    pub fn new(spec: SimSpec, missing_fractions: Vec<f64>) -> Self {
        let sad = TrainConfig {
            n_factors: spec.n_factors,
            seed: spec.seed,
            ..TrainConfig::default()
        };
        let bpr = TrainConfig {
            freeze_right_factors: true,
            ..sad.clone()
        };
        StudyConfig {
            spec,
            missing_fractions,
            sad,
            bpr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyModel {
    Sad,
    Bpr,
}

impl fmt::Display for StudyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyModel::Sad => "sad",
            StudyModel::Bpr => "bpr",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub mean_loglik: f64,
    pub sparsity: f64,
    pub mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub kind: SimKind,
    pub missing_fraction: f64,
    pub model: StudyModel,
    pub n_observations: usize,
    pub initial_loglik: f64,
    pub initial_mse: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

impl StudyRow {
    pub fn last(&self) -> &TrajectoryPoint {
        self.trajectory.last().expect("at least one epoch")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub true_sparsity: f64,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn row(&self, missing_fraction: f64, model: StudyModel) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.missing_fraction == missing_fraction && r.model == model)
    }

    /// One line per (kind, missing fraction, model) with final values.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "kind,missing_fraction,model,observations,final_loglik,sparsity,initial_mse,mse\n",
        );
        for r in &self.rows {
            let last = r.last();
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e},{:e}\n",
                r.kind,
                r.missing_fraction,
                r.model,
                r.n_observations,
                last.mean_loglik,
                last.sparsity,
                r.initial_mse,
                last.mse
            ));
        }
        out
    }

    /// Per-epoch log-likelihood, sparsity and distance to the truth.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("kind,missing_fraction,model,epoch,mean_loglik,sparsity,mse\n");
        for r in &self.rows {
            for p in &r.trajectory {
                out.push_str(&format!(
                    "{},{},{},{},{:e},{:e},{:e}\n",
                    r.kind, r.missing_fraction, r.model, p.epoch, p.mean_loglik, p.sparsity, p.mse
                ));
            }
        }
        out
    }
}

/// Observations left after dropping `fraction` of them with the mask stream
/// for position `index` of the study.
pub fn masked_observations(truth: &SimTruth, seed: u64, index: usize, fraction: f64) -> Result<Vec<Observation>> {
    let mut rng = indexed_stream(seed, STREAM_MASK, index as u64);
    mask_missing(&truth.observations, fraction, &mut rng)
}

/// Trains one model on one masked observation set and tracks its distance
/// to the truth after every epoch.
pub fn run_cell(
    truth: &SimTruth,
    observations: &[Observation],
    config: &TrainConfig,
    kind: SimKind,
    missing_fraction: f64,
    model_kind: StudyModel,
) -> Result<StudyRow> {
    let (n, m) = (truth.model.n_users(), truth.model.n_items());
    let mut model: FactorModel<f64> = initialize_model(n, m, config);
    let initial_mse = frobenius_mse(&model, &truth.model)?;
    let mut trajectory = Vec::with_capacity(config.epochs);
    let mut failure = None;
    let log = fit(&mut model, TrainingData::Observations(observations), config, |rec, fitted| {
        match frobenius_mse(fitted, &truth.model) {
            Ok(mse) => trajectory.push(TrajectoryPoint {
                epoch: rec.epoch,
                mean_loglik: rec.mean_loglik,
                sparsity: sparsity(fitted.right_item_factors(), crate::sgd::SPARSITY_TOL),
                mse,
            }),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(StudyRow {
        kind,
        missing_fraction,
        model: model_kind,
        n_observations: observations.len(),
        initial_loglik: log.initial_loglik,
        initial_mse,
        trajectory,
    })
}

pub fn run_simulation_study(config: &StudyConfig) -> Result<StudyReport> {
    let truth = generate_truth(&config.spec)?;
    let mut rows = Vec::with_capacity(2 * config.missing_fractions.len());
    for (idx, &fraction) in config.missing_fractions.iter().enumerate() {
        let observations = masked_observations(&truth, config.spec.seed, idx, fraction)?;
        for (model_kind, train) in [(StudyModel::Sad, &config.sad), (StudyModel::Bpr, &config.bpr)] {
            rows.push(run_cell(
                &truth,
                &observations,
                train,
                config.spec.kind,
                fraction,
                model_kind,
            )?);
        }
    }
    Ok(StudyReport {
        true_sparsity: sparsity(truth.model.right_item_factors(), crate::sgd::SPARSITY_TOL),
        rows,
    })
}
