//! The factor model: user vectors, left item vectors and non-negative right
//! item vectors, plus every quantity derived from them.
//!
//! For user `u` and items `i`, `j` the relative preference is
//!
//! ```text
//! x_uij = sum_h xi[h,u] * (eta[h,i] * tau[h,j] - eta[h,j] * tau[h,i])
//! ```
//!
//! so each per-user slice `X_u` is anti-symmetric, and with `tau == 1` the
//! model is exactly the dot-product model `<xi_u, eta_i> - <xi_u, eta_j>`.

use nalgebra::DMatrix;

use crate::error::{Result, SadError};
use crate::scalar::Scalar;

/// Largest item count for which dense per-user slices are materialised.
pub const DEFAULT_DIAGNOSTIC_LIMIT: usize = 2048;

/// Dense `rows x cols` matrix stored column by column, so that the factor
/// vector of one user or item is a contiguous slice.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> FactorMatrix<S> {
    pub fn filled(rows: usize, cols: usize, value: S) -> Self {
        FactorMatrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, S::zero())
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, S::one())
    }

    /// Builds the matrix from `f(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        FactorMatrix { rows, cols, data }
    }

    /// Builds the matrix from values listed row after row.
    pub fn from_row_major(rows: usize, cols: usize, values: &[S]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(SadError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self::from_fn(rows, cols, |r, c| values[r * cols + c]))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> S {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: S) {
        self.data[col * self.rows + row] = value;
    }

    #[inline]
    pub fn column(&self, col: usize) -> &[S] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, col: usize) -> &mut [S] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    /// The `row`-th factor across all columns.
    pub fn row(&self, row: usize) -> Vec<S> {
        (0..self.cols).map(|c| self.get(row, c)).collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts the storage type.
    pub fn cast<T: Scalar>(&self) -> FactorMatrix<T> {
        FactorMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| T::narrow(v.widen())).collect(),
        }
    }
}

/// Relative preference `x_uij`, the log-odds that user `u` prefers `i` over `j`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Preference(pub f64);

impl Preference {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Probability of the preference under the logistic link.
    #[inline]
    pub fn probability(self) -> f64 {
        sigmoid(self.0)
    }
}

/// Binary label of an observed pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `d = +1`: the first item is preferred.
    Positive,
    /// `d = -1`: the second item is preferred.
    Negative,
}

impl Direction {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }

    #[inline]
    pub fn flipped(self) -> Self {
        match self {
            Direction::Positive => Direction::Negative,
            Direction::Negative => Direction::Positive,
        }
    }

    pub fn from_sign(sign: i8) -> Option<Self> {
        match sign {
            1 => Some(Direction::Positive),
            -1 => Some(Direction::Negative),
            _ => None,
        }
    }
}

/// One observed entry `d_uij` of the three-way comparison tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Observation {
    pub user: usize,
    pub first: usize,
    pub second: usize,
    pub direction: Direction,
}

impl Observation {
    pub fn new(user: usize, first: usize, second: usize, direction: Direction) -> Self {
        Observation {
            user,
            first,
            second,
            direction,
        }
    }

    /// The same event stated with the items in ascending order.
    pub fn canonical(self) -> Self {
        if self.first <= self.second {
            self
        } else {
            Observation {
                user: self.user,
                first: self.second,
                second: self.first,
                direction: self.direction.flipped(),
            }
        }
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x)) = -log(1 + exp(-x))` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Log-Bernoulli probability of `direction` given log-odds `x`.
#[inline]
pub fn log_prob(x: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Positive => log_sigmoid(x),
        Direction::Negative => log_sigmoid(-x),
    }
}

/// Learned state: `Xi` (k x n), `H` (k x m) and `T` (k x m, non-negative).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<S> {
    user_factors: FactorMatrix<S>,
    left_item_factors: FactorMatrix<S>,
    right_item_factors: FactorMatrix<S>,
}

impl<S: Scalar> FactorModel<S> {
    pub fn new(
        user_factors: FactorMatrix<S>,
        left_item_factors: FactorMatrix<S>,
        right_item_factors: FactorMatrix<S>,
    ) -> Result<Self> {
        let k = user_factors.rows();
        if left_item_factors.rows() != k || right_item_factors.rows() != k {
            return Err(SadError::ShapeMismatch(format!(
                "factor counts differ: Xi {k}, H {}, T {}",
                left_item_factors.rows(),
                right_item_factors.rows()
            )));
        }
        if left_item_factors.cols() != right_item_factors.cols() {
            return Err(SadError::ShapeMismatch(format!(
                "item counts differ: H {}, T {}",
                left_item_factors.cols(),
                right_item_factors.cols()
            )));
        }
        if k == 0 {
            return Err(SadError::ShapeMismatch("zero latent factors".into()));
        }
        if let Some(bad) = right_item_factors.as_slice().iter().find(|v| v.is_nan() || **v < S::zero()) {
            return Err(SadError::Contract(format!(
                "right item factors must be non-negative, found {bad}"
            )));
        }
        Ok(FactorModel {
            user_factors,
            left_item_factors,
            right_item_factors,
        })
    }

    /// Model with all right item factors fixed at one.
    pub fn with_unit_right_factors(
        user_factors: FactorMatrix<S>,
        left_item_factors: FactorMatrix<S>,
    ) -> Result<Self> {
        let t = FactorMatrix::ones(left_item_factors.rows(), left_item_factors.cols());
        Self::new(user_factors, left_item_factors, t)
    }

    /// All-zero user and left item factors; every preference is zero.
    pub fn zeros(n_users: usize, n_items: usize, n_factors: usize) -> Self {
        FactorModel {
            user_factors: FactorMatrix::zeros(n_factors, n_users),
            left_item_factors: FactorMatrix::zeros(n_factors, n_items),
            right_item_factors: FactorMatrix::ones(n_factors, n_items),
        }
    }

    #[inline]
    pub fn n_users(&self) -> usize {
        self.user_factors.cols()
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.left_item_factors.cols()
    }

    #[inline]
    pub fn n_factors(&self) -> usize {
        self.user_factors.rows()
    }

    pub fn user_factors(&self) -> &FactorMatrix<S> {
        &self.user_factors
    }

    pub fn left_item_factors(&self) -> &FactorMatrix<S> {
        &self.left_item_factors
    }

    pub fn right_item_factors(&self) -> &FactorMatrix<S> {
        &self.right_item_factors
    }

    /// Mutable access for trainers. Callers keep `T >= 0`.
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (
        &mut FactorMatrix<S>,
        &mut FactorMatrix<S>,
        &mut FactorMatrix<S>,
    ) {
        (
            &mut self.user_factors,
            &mut self.left_item_factors,
            &mut self.right_item_factors,
        )
    }

    pub fn into_parts(self) -> (FactorMatrix<S>, FactorMatrix<S>, FactorMatrix<S>) {
        (
            self.user_factors,
            self.left_item_factors,
            self.right_item_factors,
        )
    }

    pub fn all_finite(&self) -> bool {
        self.user_factors.all_finite()
            && self.left_item_factors.all_finite()
            && self.right_item_factors.all_finite()
    }

    pub fn cast<T: Scalar>(&self) -> FactorModel<T> {
        FactorModel {
            user_factors: self.user_factors.cast(),
            left_item_factors: self.left_item_factors.cast(),
            right_item_factors: self.right_item_factors.cast(),
        }
    }

    pub fn check_user(&self, u: usize) -> Result<()> {
        if u < self.n_users() {
            Ok(())
        } else {
            Err(SadError::IndexOutOfRange {
                what: "user",
                index: u,
                size: self.n_users(),
            })
        }
    }

    pub fn check_item(&self, i: usize) -> Result<()> {
        if i < self.n_items() {
            Ok(())
        } else {
            Err(SadError::IndexOutOfRange {
                what: "item",
                index: i,
                size: self.n_items(),
            })
        }
    }

    // Sum for i < j; the swap is its exact negation.
    #[inline]
    fn ordered_sum(&self, u: usize, i: usize, j: usize) -> f64 {
        let xi = self.user_factors.column(u);
        let eta_i = self.left_item_factors.column(i);
        let eta_j = self.left_item_factors.column(j);
        let tau_i = self.right_item_factors.column(i);
        let tau_j = self.right_item_factors.column(j);
        let mut acc = 0.0;
        for h in 0..xi.len() {
            acc += xi[h].widen()
                * (eta_i[h].widen() * tau_j[h].widen() - eta_j[h].widen() * tau_i[h].widen());
        }
        acc
    }

    /// `x_uij` without index validation; panics when out of range.
    #[inline]
    pub fn preference_value(&self, u: usize, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.ordered_sum(u, i, j),
            std::cmp::Ordering::Greater => -self.ordered_sum(u, j, i),
        }
    }

    pub fn preference(&self, u: usize, i: usize, j: usize) -> Result<Preference> {
        self.check_user(u)?;
        self.check_item(i)?;
        self.check_item(j)?;
        Ok(Preference(self.preference_value(u, i, j)))
    }

    /// Probability that `u` prefers `i` over `j`.
    pub fn prob_prefer(&self, u: usize, i: usize, j: usize) -> Result<f64> {
        Ok(self.preference(u, i, j)?.probability())
    }

    /// Dense `m x m` slice `X_u`.
    pub fn user_slice(&self, u: usize) -> Result<DMatrix<f64>> {
        self.user_slice_with_limit(u, DEFAULT_DIAGNOSTIC_LIMIT)
    }

    pub fn user_slice_with_limit(&self, u: usize, limit: usize) -> Result<DMatrix<f64>> {
        self.check_user(u)?;
        let m = self.n_items();
        if m > limit {
            return Err(SadError::DiagnosticLimit {
                what: "user slice",
                size: m,
                limit,
            });
        }
        let mut slice = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let x = self.ordered_sum(u, i, j);
                slice[(i, j)] = x;
                slice[(j, i)] = -x;
            }
        }
        Ok(slice)
    }

    /// Log-likelihood of observations given with `first < second`.
    pub fn log_likelihood(&self, observations: &[Observation]) -> Result<f64> {
        let mut total = 0.0;
        for obs in observations {
            if obs.first >= obs.second {
                return Err(SadError::Contract(format!(
                    "observation ({}, {}, {}) must have first < second",
                    obs.user, obs.first, obs.second
                )));
            }
            self.check_user(obs.user)?;
            self.check_item(obs.second)?;
            let x = self.ordered_sum(obs.user, obs.first, obs.second);
            total += log_prob(x, obs.direction);
        }
        Ok(total)
    }

    /// `x_uij - x_uit - x_utj`; zero when the ternary is additively transitive.
    pub fn transitivity_residual(&self, u: usize, i: usize, t: usize, j: usize) -> Result<f64> {
        if i == t || t == j || i == j {
            return Err(SadError::Contract(format!(
                "ternary ({i}, {t}, {j}) must be pairwise distinct"
            )));
        }
        self.check_user(u)?;
        for item in [i, t, j] {
            self.check_item(item)?;
        }
        Ok(self.preference_value(u, i, j)
            - self.preference_value(u, i, t)
            - self.preference_value(u, t, j))
    }

    /// Directed 3-cycles `a > b > c > a` among `items` for user `u`.
    ///
    /// Each cycle is reported once, rotated so that its first element comes
    /// earliest in `items` (after dropping repeated items).
    pub fn find_preference_cycles(&self, u: usize, items: &[usize]) -> Result<Vec<[usize; 3]>> {
        self.check_user(u)?;
        let mut subset: Vec<usize> = Vec::with_capacity(items.len());
        for &item in items {
            self.check_item(item)?;
            if !subset.contains(&item) {
                subset.push(item);
            }
        }
        if subset.len() > DEFAULT_DIAGNOSTIC_LIMIT {
            return Err(SadError::DiagnosticLimit {
                what: "cycle search subset",
                size: subset.len(),
                limit: DEFAULT_DIAGNOSTIC_LIMIT,
            });
        }
        let s = subset.len();
        let mut wins = vec![false; s * s];
        for a in 0..s {
            for b in 0..s {
                wins[a * s + b] = self.preference_value(u, subset[a], subset[b]) > 0.0;
            }
        }
        let mut cycles = Vec::new();
        for a in 0..s {
            for b in (a + 1)..s {
                if !wins[a * s + b] {
                    continue;
                }
                for c in (a + 1)..s {
                    if c != b && wins[b * s + c] && wins[c * s + a] {
                        cycles.push([subset[a], subset[b], subset[c]]);
                    }
                }
            }
        }
        Ok(cycles)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k1_model() -> FactorModel<f64> {
        // xi = 2, eta = (1, 0.5), tau = (1, 2)
        FactorModel::new(
            FactorMatrix::from_row_major(1, 1, &[2.0]).unwrap(),
            FactorMatrix::from_row_major(1, 2, &[1.0, 0.5]).unwrap(),
            FactorMatrix::from_row_major(1, 2, &[1.0, 2.0]).unwrap(),
        )
        .unwrap()
    }

    pub(crate) fn random_model(n: usize, m: usize, k: usize, seed: u64) -> FactorModel<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = FactorMatrix::from_fn(k, n, |_, _| rng.random_range(-2.0..2.0));
        let h = FactorMatrix::from_fn(k, m, |_, _| rng.random_range(-2.0..2.0));
        let t = FactorMatrix::from_fn(k, m, |_, _| rng.random_range(0.0..3.0));
        FactorModel::new(xi, h, t).unwrap()
    }

    #[test]
    fn hand_evaluated_preference() {
        let model = k1_model();
        // 2*1*2 - 2*0.5*1
        assert_eq!(model.preference(0, 0, 1).unwrap().value(), 3.0);
        assert_eq!(model.preference(0, 1, 0).unwrap().value(), -3.0);
        assert_eq!(model.preference(0, 1, 1).unwrap().value(), 0.0);
    }

    #[test]
    fn sigmoid_at_three() {
        // 1 / (1 + e^-3)
        let p = k1_model().prob_prefer(0, 0, 1).unwrap();
        assert!((p - 0.952_574_126_822_433_4).abs() < 1e-12);
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn stable_at_extremes() {
        assert_eq!(sigmoid(-700.0) + sigmoid(700.0), 1.0);
        assert!(log_sigmoid(-700.0).is_finite());
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-12);
        let tiny = log_sigmoid(700.0);
        assert!(tiny <= 0.0 && tiny > -1e-300);
    }

    #[test]
    fn k1_slice() {
        let slice = k1_model().user_slice(0).unwrap();
        assert_eq!(slice[(0, 0)], 0.0);
        assert_eq!(slice[(0, 1)], 3.0);
        assert_eq!(slice[(1, 0)], -3.0);
        assert_eq!(slice[(1, 1)], 0.0);
    }

    #[test]
    fn slice_is_antisymmetric_and_matches_bpr_form() {
        let model = random_model(3, 7, 4, 11);
        let slice = model.user_slice(1).unwrap();
        assert_eq!(&slice + slice.transpose(), DMatrix::zeros(7, 7));

        let (xi, h, _) = model.clone().into_parts();
        let bpr = FactorModel::with_unit_right_factors(xi.clone(), h.clone()).unwrap();
        let slice = bpr.user_slice(2).unwrap();
        // sum_h xi_hu (eta^h 1^T - 1 eta^h^T)
        let mut expected = DMatrix::zeros(7, 7);
        for f in 0..4 {
            let row = h.row(f);
            for i in 0..7 {
                for j in 0..7 {
                    expected[(i, j)] += xi.get(f, 2) * (row[i] - row[j]);
                }
            }
        }
        assert!((slice - expected).abs().max() < 1e-12);
    }

    #[test]
    fn slice_refuses_large_item_counts() {
        let model = FactorModel::<f64>::zeros(1, 10, 1);
        assert!(matches!(
            model.user_slice_with_limit(0, 5),
            Err(SadError::DiagnosticLimit { .. })
        ));
    }

    #[test]
    fn out_of_range_indices() {
        let model = k1_model();
        assert!(matches!(
            model.preference(1, 0, 1),
            Err(SadError::IndexOutOfRange { what: "user", .. })
        ));
        assert!(model.preference(0, 0, 2).is_err());
    }

    #[test]
    fn negative_right_factor_rejected() {
        let res = FactorModel::new(
            FactorMatrix::<f64>::ones(1, 1),
            FactorMatrix::ones(1, 2),
            FactorMatrix::from_row_major(1, 2, &[1.0, -0.1]).unwrap(),
        );
        assert!(matches!(res, Err(SadError::Contract(_))));
    }

    #[test]
    fn log_likelihood_edge_cases() {
        let zero = FactorModel::<f64>::zeros(2, 4, 2);
        assert_eq!(zero.log_likelihood(&[]).unwrap(), 0.0);
        let obs = [
            Observation::new(0, 0, 1, Direction::Positive),
            Observation::new(1, 2, 3, Direction::Negative),
        ];
        let ll = zero.log_likelihood(&obs).unwrap();
        assert!((ll + 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        let bad = [Observation::new(0, 2, 1, Direction::Positive)];
        assert!(matches!(zero.log_likelihood(&bad), Err(SadError::Contract(_))));
    }

    #[test]
    fn log_likelihood_matches_scalar_oracle() {
        let model = random_model(4, 6, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut obs = Vec::new();
        for _ in 0..10 {
            let u = rng.random_range(0..4);
            let i = rng.random_range(0..5);
            let j = rng.random_range(i + 1..6);
            let d = if rng.random_bool(0.5) {
                Direction::Positive
            } else {
                Direction::Negative
            };
            obs.push(Observation::new(u, i, j, d));
        }
        // Independent route: explicit sums and the textbook Bernoulli pmf.
        let mut expected = 0.0;
        for o in &obs {
            let mut x = 0.0;
            for h in 0..3 {
                let xi = model.user_factors().get(h, o.user);
                let (ei, ej) = (
                    model.left_item_factors().get(h, o.first),
                    model.left_item_factors().get(h, o.second),
                );
                let (ti, tj) = (
                    model.right_item_factors().get(h, o.first),
                    model.right_item_factors().get(h, o.second),
                );
                x += xi * ei * tj - xi * ej * ti;
            }
            let p = 1.0 / (1.0 + (-x).exp());
            expected += match o.direction {
                Direction::Positive => p.ln(),
                Direction::Negative => (1.0 - p).ln(),
            };
        }
        let got = model.log_likelihood(&obs).unwrap();
        assert!(((got - expected) / expected).abs() <= 1e-12);
        assert!(got <= 0.0);
    }

    #[test]
    fn transitivity_residual_hand_case() {
        // items (i, t, j) = (0, 1, 2); eta = (1, 2, 3), tau = (1, 5, 1), xi = 1
        // x_ij = 1*1 - 3*1 = -2; x_it = 1*5 - 2*1 = 3; x_tj = 2*1 - 3*5 = -13
        // residual = -2 - 3 + 13 = 8
        let model = FactorModel::new(
            FactorMatrix::from_row_major(1, 1, &[1.0]).unwrap(),
            FactorMatrix::from_row_major(1, 3, &[1.0, 2.0, 3.0]).unwrap(),
            FactorMatrix::from_row_major(1, 3, &[1.0, 5.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert_eq!(model.transitivity_residual(0, 0, 1, 2).unwrap(), 8.0);
        assert!(model.transitivity_residual(0, 0, 0, 2).is_err());
    }

    #[test]
    fn transitive_when_tau_columns_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = 4;
        let shared: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..3.0)).collect();
        let xi = FactorMatrix::from_fn(k, 2, |_, _| rng.random_range(-2.0..2.0));
        let h = FactorMatrix::from_fn(k, 5, |_, _| rng.random_range(-2.0..2.0));
        let t = FactorMatrix::from_fn(k, 5, |f, c| if c < 3 { shared[f] } else { 2.5 });
        let model = FactorModel::new(xi, h, t).unwrap();
        let r = model.transitivity_residual(1, 0, 1, 2).unwrap();
        assert!(r.abs() < 1e-12);
    }

    #[test]
    fn cycles_match_brute_force_scan() {
        // Extreme tau values make cycles likely.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (k, m) = (3, 20);
        let xi = FactorMatrix::from_fn(k, 1, |_, _| rng.random_range(-2.0..2.0));
        let h = FactorMatrix::from_fn(k, m, |_, _| rng.random_range(-2.0..2.0));
        let t = FactorMatrix::from_fn(k, m, |_, _| match rng.random_range(0..3) {
            0 => 0.01,
            1 => 5.0,
            _ => 1.0,
        });
        let model = FactorModel::new(xi, h, t).unwrap();
        let items: Vec<usize> = (0..m).collect();
        let cycles = model.find_preference_cycles(0, &items).unwrap();

        let mut brute = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let x = |p, q| model.preference_value(0, p, q);
                    if a < b && a < c && x(a, b) > 0.0 && x(b, c) > 0.0 && x(c, a) > 0.0 {
                        brute.push([a, b, c]);
                    }
                }
            }
        }
        let mut got = cycles.clone();
        got.sort();
        brute.sort();
        assert_eq!(got, brute);
        assert!(!brute.is_empty());

        assert!(model.find_preference_cycles(0, &[0, 1]).unwrap().is_empty());
    }

    #[test]
    fn unit_right_factors_admit_no_cycles() {
        let (xi, h, _) = random_model(2, 15, 3, 8).into_parts();
        let model = FactorModel::with_unit_right_factors(xi, h).unwrap();
        let items: Vec<usize> = (0..15).collect();
        assert!(model.find_preference_cycles(1, &items).unwrap().is_empty());
    }

    #[test]
    fn f32_storage_computes_in_f64() {
        let model = k1_model().cast::<f32>();
        assert_eq!(model.preference(0, 0, 1).unwrap().value(), 3.0);
    }
}
