//! Gibbs sampler for the probit variant.
//!
//! Each comparison gets a latent `z_uij = x_uij + eps`, `eps ~ N(0, 1)`, whose
//! sign is the observed label. Given `z`, every factor vector is the
//! coefficient of a Bayesian linear regression with a spherical Gaussian
//! prior; right item vectors are additionally confined to the non-negative
//! orthant.
//!
//! Only observed comparisons enter the regressions. A pair stored as
//! `(u, a, b)` with `a < b` serves both items: for the second item the
//! identity `z_uba = -z_uab` turns it into a row with the roles swapped.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SadError};
use crate::model::{Direction, FactorMatrix, FactorModel, Observation};
use crate::rng::{stream, SadRng, STREAM_GIBBS, STREAM_INIT};
use crate::truncnorm::{sample_truncated_normal, sample_truncated_normal_scaled};

/// Largest `n_users * n_items` accepted by default.
pub const DEFAULT_PAIR_CAP: usize = 1_000_000;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsConfig {
    pub n_factors: usize,
    pub seed: u64,
    /// Variance of the spherical Gaussian prior on every factor entry.
    pub prior_var: f64,
    /// Coordinate passes per orthant-truncated draw.
    pub tau_passes: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            n_factors: 5,
            seed: 0,
            prior_var: 1.0,
            tau_passes: 2,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_factors == 0 {
            return Err(SadError::Config("n_factors must be at least 1".into()));
        }
        if !(self.prior_var > 0.0 && self.prior_var.is_finite()) {
            return Err(SadError::Config("prior_var must be positive".into()));
        }
        if self.tau_passes == 0 {
            return Err(SadError::Config("tau_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Refuses problems whose `n * m` exceeds `cap`.
pub fn check_size(n_users: usize, n_items: usize, cap: usize) -> Result<()> {
    let size = n_users.saturating_mul(n_items);
    if size > cap {
        return Err(SadError::DiagnosticLimit {
            what: "gibbs user-item pairs",
            size,
            limit: cap,
        });
    }
    Ok(())
}

/// Gaussian full conditional of one factor vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSpec {
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub mean: DVector<f64>,
    /// Support is the non-negative orthant.
    pub truncated: bool,
}

impl ConditionalSpec {
    fn build(design: DMatrix<f64>, response: DVector<f64>, prior_var: f64, truncated: bool) -> Result<Self> {
        let k = design.ncols();
        let precision = design.transpose() * &design + DMatrix::identity(k, k) / prior_var;
        let rhs = design.transpose() * &response;
        let chol = precision
            .clone()
            .cholesky()
            .ok_or_else(|| SadError::Numerical("posterior precision is not positive definite".into()))?;
        let mean = chol.solve(&rhs);
        Ok(ConditionalSpec {
            design,
            response,
            precision,
            mean,
            truncated,
        })
    }

    /// Log density up to a constant; `-inf` outside the support.
    pub fn log_density_unnormalized(&self, theta: &[f64]) -> f64 {
        if self.truncated && theta.iter().any(|&t| t < 0.0) {
            return f64::NEG_INFINITY;
        }
        let d = DVector::from_column_slice(theta) - &self.mean;
        -0.5 * (d.transpose() * &self.precision * &d)[(0, 0)]
    }

    fn draw_unconstrained(&self, rng: &mut SadRng) -> Result<Vec<f64>> {
        let k = self.mean.len();
        let chol = self
            .precision
            .clone()
            .cholesky()
            .ok_or_else(|| SadError::Numerical("posterior precision is not positive definite".into()))?;
        let eps = DVector::from_fn(k, |_, _| StandardNormal.sample(rng));
        // P = L L^T, so L^T y = eps gives y ~ N(0, P^-1).
        let y = chol
            .l()
            .transpose()
            .solve_upper_triangular(&eps)
            .ok_or_else(|| SadError::Numerical("singular Cholesky factor".into()))?;
        Ok((&self.mean + y).iter().copied().collect())
    }

    /// Coordinate-wise Gibbs inside the orthant, started from `start`.
    fn draw_orthant(&self, start: &[f64], passes: usize, rng: &mut SadRng) -> Vec<f64> {
        let k = self.mean.len();
        let p = &self.precision;
        let mut theta = start.to_vec();
        for _ in 0..passes {
            for h in 0..k {
                let mut shift = 0.0;
                for l in 0..k {
                    if l != h {
                        shift += p[(h, l)] * (theta[l] - self.mean[l]);
                    }
                }
                let phh = p[(h, h)];
                let mu = self.mean[h] - shift / phh;
                theta[h] = sample_truncated_normal_scaled(mu, phh.sqrt().recip(), Direction::Positive, rng);
            }
        }
        theta
    }
}

/// Mutable chain state: factors, latent `z` per observation, and the RNG.
#[derive(Clone, Debug)]
pub struct ProbitState {
    model: FactorModel<f64>,
    observations: Vec<Observation>,
    z: Vec<f64>,
    by_user: Vec<Vec<usize>>,
    by_item: Vec<Vec<usize>>,
    config: GibbsConfig,
    rng: SadRng,
}

impl ProbitState {
    /// Starts from `Xi`, `H` drawn from the prior, `T = 1`, and `z` drawn
    /// given those.
    pub fn new(observations: &[Observation], n_users: usize, n_items: usize, config: GibbsConfig) -> Result<Self> {
        config.validate()?;
        let mut init = stream(config.seed, STREAM_INIT);
        let sd = config.prior_var.sqrt();
        let k = config.n_factors;
        let mut draw = |_, _| {
            let e: f64 = StandardNormal.sample(&mut init);
            sd * e
        };
        let xi = FactorMatrix::from_fn(k, n_users, &mut draw);
        let h = FactorMatrix::from_fn(k, n_items, &mut draw);
        let model = FactorModel::with_unit_right_factors(xi, h)?;
        let mut state = Self::with_model(observations, model, config)?;
        state.sample_z();
        Ok(state)
    }

    /// Wraps an existing model; `z` starts at the label signs (`+-1`).
    pub fn with_model(observations: &[Observation], model: FactorModel<f64>, config: GibbsConfig) -> Result<Self> {
        config.validate()?;
        if model.n_factors() != config.n_factors {
            return Err(SadError::ShapeMismatch(format!(
                "model has {} factors, config asks for {}",
                model.n_factors(),
                config.n_factors
            )));
        }
        let mut obs = Vec::with_capacity(observations.len());
        let mut by_user = vec![Vec::new(); model.n_users()];
        let mut by_item = vec![Vec::new(); model.n_items()];
        for (idx, o) in observations.iter().enumerate() {
            model.check_user(o.user)?;
            model.check_item(o.first)?;
            model.check_item(o.second)?;
            if o.first == o.second {
                return Err(SadError::Contract(format!(
                    "observation {idx} compares item {} with itself",
                    o.first
                )));
            }
            let c = o.canonical();
            by_user[c.user].push(idx);
            by_item[c.first].push(idx);
            by_item[c.second].push(idx);
            obs.push(c);
        }
        let z = obs.iter().map(|o| o.direction.sign()).collect();
        Ok(ProbitState {
            model,
            observations: obs,
            z,
            by_user,
            by_item,
            rng: stream(config.seed, STREAM_GIBBS),
            config,
        })
    }

    pub fn model(&self) -> &FactorModel<f64> {
        &self.model
    }

    /// Observations with `first < second`, aligned with [`Self::z`].
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn config(&self) -> &GibbsConfig {
        &self.config
    }

    pub fn set_z(&mut self, idx: usize, value: f64) {
        self.z[idx] = value;
    }

    pub fn set_user_factor(&mut self, u: usize, values: &[f64]) {
        self.model.parts_mut().0.column_mut(u).copy_from_slice(values);
    }

    pub fn set_left_item_factor(&mut self, i: usize, values: &[f64]) {
        self.model.parts_mut().1.column_mut(i).copy_from_slice(values);
    }

    pub fn set_right_item_factor(&mut self, j: usize, values: &[f64]) -> Result<()> {
        if values.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(SadError::Contract("right factors must be non-negative".into()));
        }
        self.model.parts_mut().2.column_mut(j).copy_from_slice(values);
        Ok(())
    }

    /// Redraws every latent `z` from its truncated normal conditional.
    pub fn sample_z(&mut self) {
        for (idx, o) in self.observations.iter().enumerate() {
            let x = self.model.preference_value(o.user, o.first, o.second);
            self.z[idx] = sample_truncated_normal(x, o.direction, &mut self.rng);
        }
    }

    /// Log density of `z[idx] = value` given everything else, up to a constant.
    pub fn z_conditional_log_density(&self, idx: usize, value: f64) -> f64 {
        let o = self.observations[idx];
        let consistent = match o.direction {
            Direction::Positive => value > 0.0,
            Direction::Negative => value <= 0.0,
        };
        if !consistent {
            return f64::NEG_INFINITY;
        }
        let x = self.model.preference_value(o.user, o.first, o.second);
        -0.5 * (value - x) * (value - x)
    }

    pub fn user_conditional(&self, u: usize) -> Result<ConditionalSpec> {
        self.model.check_user(u)?;
        let k = self.model.n_factors();
        let h = self.model.left_item_factors();
        let t = self.model.right_item_factors();
        let rows = &self.by_user[u];
        let mut design = DMatrix::zeros(rows.len(), k);
        let mut response = DVector::zeros(rows.len());
        for (r, &idx) in rows.iter().enumerate() {
            let o = self.observations[idx];
            let (ea, eb) = (h.column(o.first), h.column(o.second));
            let (ta, tb) = (t.column(o.first), t.column(o.second));
            for c in 0..k {
                design[(r, c)] = ea[c] * tb[c] - eb[c] * ta[c];
            }
            response[r] = self.z[idx];
        }
        ConditionalSpec::build(design, response, self.config.prior_var, false)
    }

    /// Rival item and sign of `z` when `item` is moved to the first slot.
    fn oriented(&self, idx: usize, item: usize) -> (usize, usize, f64) {
        let o = self.observations[idx];
        if o.first == item {
            (o.user, o.second, self.z[idx])
        } else {
            (o.user, o.first, -self.z[idx])
        }
    }

    pub fn left_item_conditional(&self, i: usize) -> Result<ConditionalSpec> {
        self.model.check_item(i)?;
        let k = self.model.n_factors();
        let xi = self.model.user_factors();
        let h = self.model.left_item_factors();
        let t = self.model.right_item_factors();
        let ti = t.column(i);
        let rows = &self.by_item[i];
        let mut design = DMatrix::zeros(rows.len(), k);
        let mut response = DVector::zeros(rows.len());
        for (r, &idx) in rows.iter().enumerate() {
            // z_uir = sum xi (eta_i tau_r - eta_r tau_i) + eps
            let (u, rival, z) = self.oriented(idx, i);
            let (xu, er, tr) = (xi.column(u), h.column(rival), t.column(rival));
            let mut offset = 0.0;
            for c in 0..k {
                design[(r, c)] = xu[c] * tr[c];
                offset += xu[c] * ti[c] * er[c];
            }
            response[r] = z + offset;
        }
        ConditionalSpec::build(design, response, self.config.prior_var, false)
    }

    pub fn right_item_conditional(&self, j: usize) -> Result<ConditionalSpec> {
        self.model.check_item(j)?;
        let k = self.model.n_factors();
        let xi = self.model.user_factors();
        let h = self.model.left_item_factors();
        let t = self.model.right_item_factors();
        let ej = h.column(j);
        let rows = &self.by_item[j];
        let mut design = DMatrix::zeros(rows.len(), k);
        let mut response = DVector::zeros(rows.len());
        for (r, &idx) in rows.iter().enumerate() {
            // z_urj = -z_ujr = sum xi (eta_r tau_j - eta_j tau_r) + eps
            let (u, rival, z_first) = self.oriented(idx, j);
            let (xu, er, tr) = (xi.column(u), h.column(rival), t.column(rival));
            let mut offset = 0.0;
            for c in 0..k {
                design[(r, c)] = xu[c] * er[c];
                offset += xu[c] * ej[c] * tr[c];
            }
            response[r] = -z_first + offset;
        }
        ConditionalSpec::build(design, response, self.config.prior_var, true)
    }

    pub fn sample_user_factor(&mut self, u: usize) -> Result<()> {
        let draw = self.user_conditional(u)?.draw_unconstrained(&mut self.rng)?;
        self.set_user_factor(u, &draw);
        Ok(())
    }

    pub fn sample_left_item_factor(&mut self, i: usize) -> Result<()> {
        let draw = self.left_item_conditional(i)?.draw_unconstrained(&mut self.rng)?;
        self.set_left_item_factor(i, &draw);
        Ok(())
    }

    pub fn sample_right_item_factor(&mut self, j: usize) -> Result<()> {
        let spec = self.right_item_conditional(j)?;
        let start = self.model.right_item_factors().column(j).to_vec();
        let draw = spec.draw_orthant(&start, self.config.tau_passes, &mut self.rng);
        self.set_right_item_factor(j, &draw)
    }

    /// One sweep: all `z`, then every user, left item and right item vector.
    pub fn sweep(&mut self) -> Result<()> {
        self.sample_z();
        for u in 0..self.model.n_users() {
            self.sample_user_factor(u)?;
        }
        for i in 0..self.model.n_items() {
            self.sample_left_item_factor(i)?;
        }
        for j in 0..self.model.n_items() {
            self.sample_right_item_factor(j)?;
        }
        Ok(())
    }

    /// Log of the augmented joint density of `(z, Xi, H, T)`.
    pub fn joint_log_density(&self) -> f64 {
        let mut total = 0.0;
        for (o, &z) in self.observations.iter().zip(&self.z) {
            let consistent = match o.direction {
                Direction::Positive => z > 0.0,
                Direction::Negative => z <= 0.0,
            };
            if !consistent {
                return f64::NEG_INFINITY;
            }
            let d = z - self.model.preference_value(o.user, o.first, o.second);
            total += -0.5 * d * d - LN_SQRT_2PI;
        }
        let v = self.config.prior_var;
        let prior = |m: &FactorMatrix<f64>| -> f64 {
            m.as_slice()
                .iter()
                .map(|x| -0.5 * x * x / v - LN_SQRT_2PI - 0.5 * v.ln())
                .sum()
        };
        if self.model.right_item_factors().as_slice().iter().any(|t| *t < 0.0) {
            return f64::NEG_INFINITY;
        }
        total
            + prior(self.model.user_factors())
            + prior(self.model.left_item_factors())
            + prior(self.model.right_item_factors())
    }
}

/// Running per-entry mean and standard deviation of one factor matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixMoments {
    pub mean: FactorMatrix<f64>,
    pub sd: FactorMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub n_samples: usize,
    pub user: MatrixMoments,
    pub left: MatrixMoments,
    pub right: MatrixMoments,
}

impl PosteriorSummary {
    /// Model built from the posterior means.
    pub fn mean_model(&self) -> Result<FactorModel<f64>> {
        FactorModel::new(self.user.mean.clone(), self.left.mean.clone(), self.right.mean.clone())
    }

    /// `param,row,col,mean,sd` with `row` the factor and `col` the user or item.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,row,col,mean,sd\n");
        for (name, m) in [("XI", &self.user), ("H", &self.left), ("T", &self.right)] {
            for c in 0..m.mean.cols() {
                for r in 0..m.mean.rows() {
                    out.push_str(&format!(
                        "{name},{r},{c},{:e},{:e}\n",
                        m.mean.get(r, c),
                        m.sd.get(r, c)
                    ));
                }
            }
        }
        out
    }
}

fn moments(samples: &[FactorModel<f64>], pick: impl Fn(&FactorModel<f64>) -> &FactorMatrix<f64>) -> MatrixMoments {
    let first = pick(&samples[0]);
    let (rows, cols) = (first.rows(), first.cols());
    let n = samples.len() as f64;
    let mut mean = FactorMatrix::<f64>::zeros(rows, cols);
    for s in samples {
        for (acc, v) in mean.as_mut_slice().iter_mut().zip(pick(s).as_slice()) {
            *acc += v;
        }
    }
    mean.as_mut_slice().iter_mut().for_each(|v| *v /= n);
    let mut sd = FactorMatrix::<f64>::zeros(rows, cols);
    if samples.len() > 1 {
        for s in samples {
            for ((acc, v), m) in sd.as_mut_slice().iter_mut().zip(pick(s).as_slice()).zip(mean.as_slice()) {
                *acc += (v - m) * (v - m);
            }
        }
        sd.as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = (*v / (n - 1.0)).sqrt());
    }
    MatrixMoments { mean, sd }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    /// Thinned post-burn-in draws.
    pub samples: Vec<FactorModel<f64>>,
    /// Joint log density after every sweep.
    pub log_density: Vec<f64>,
    pub summary: PosteriorSummary,
}

impl ChainOutput {
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("sweep,joint_log_density\n");
        for (s, v) in self.log_density.iter().enumerate() {
            out.push_str(&format!("{},{:e}\n", s + 1, v));
        }
        out
    }
}

/// Runs `n_sweeps` sweeps and keeps every `thin`-th draw after `burn_in`.
pub fn run_chain(
    observations: &[Observation],
    n_users: usize,
    n_items: usize,
    config: &GibbsConfig,
    n_sweeps: usize,
    burn_in: usize,
    thin: usize,
) -> Result<ChainOutput> {
    if n_sweeps <= burn_in {
        return Err(SadError::Config(format!(
            "n_sweeps ({n_sweeps}) must exceed burn_in ({burn_in})"
        )));
    }
    if thin == 0 {
        return Err(SadError::Config("thin must be at least 1".into()));
    }
    let mut state = ProbitState::new(observations, n_users, n_items, config.clone())?;
    let mut samples = Vec::new();
    let mut log_density = Vec::with_capacity(n_sweeps);
    for sweep in 1..=n_sweeps {
        state.sweep().map_err(|e| match e {
            SadError::Numerical(_) => SadError::ChainDiverged { sweep },
            other => other,
        })?;
        if !state.model.all_finite() || state.z.iter().any(|z| !z.is_finite()) {
            return Err(SadError::ChainDiverged { sweep });
        }
        log_density.push(state.joint_log_density());
        if sweep > burn_in && (sweep - burn_in).is_multiple_of(thin) {
            samples.push(state.model.clone());
        }
    }
    let summary = PosteriorSummary {
        n_samples: samples.len(),
        user: moments(&samples, |m| m.user_factors()),
        left: moments(&samples, |m| m.left_item_factors()),
        right: moments(&samples, |m| m.right_item_factors()),
    };
    Ok(ChainOutput {
        samples,
        log_density,
        summary,
    })
}
