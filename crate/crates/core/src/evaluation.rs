//! Leave-one-out evaluation: rating consistency and holdout ranking.
//!
//! Consistency compares every held-out item with the user's training items
//! whose rating differs, oriented so the better-rated item comes first, and
//! asks whether the model agrees. Rating ties carry no order and are skipped.
//!
//! Ranking places the holdout among sampled never-interacted items in two
//! ways: by how many of them the model prefers to it directly, and by how
//! many beat it on the share of training items each one is preferred over.
//! Ties never push the holdout down.

use crate::data::{InteractionDataset, LooSplit};
use crate::error::{Result, SadError};
use crate::model::FactorModel;
use crate::scalar::Scalar;

pub const DEFAULT_HIT_THRESHOLD: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// Mean predicted preference of the better-rated item over the other.
    pub mean_preference: f64,
    /// Share of ordered pairs with a positive prediction.
    pub match_fraction: f64,
    /// Median over users with at least one ordered pair of their match share.
    pub per_user_match_median: f64,
    pub users: usize,
    pub pairs: usize,
    /// Pairs dropped for equal or missing ratings.
    pub skipped: usize,
}

/// Median of a non-empty list; the midpoint for even lengths.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// `full` supplies the holdout ratings; training ratings come from the split.
pub fn consistency_report<S: Scalar>(
    model: &FactorModel<S>,
    split: &LooSplit,
    full: &InteractionDataset,
) -> Result<ConsistencyReport> {
    let mut sum_x = 0.0;
    let mut matched = 0usize;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    let mut per_user = Vec::new();
    for (&u, &o) in &split.holdout {
        model.check_user(u)?;
        model.check_item(o)?;
        let r_o = full.rating(u, o);
        let mut user_pairs = 0usize;
        let mut user_matched = 0usize;
        for (j, detail) in split.train.interactions(u) {
            let (Some(r_o), Some(r_j)) = (r_o, detail.rating) else {
                skipped += 1;
                continue;
            };
            if r_o == r_j {
                skipped += 1;
                continue;
            }
            let (hi, lo) = if r_o > r_j { (o, j) } else { (j, o) };
            let x = model.preference_value(u, hi, lo);
            sum_x += x;
            user_pairs += 1;
            if x > 0.0 {
                user_matched += 1;
            }
        }
        if user_pairs > 0 {
            per_user.push(user_matched as f64 / user_pairs as f64);
        }
        pairs += user_pairs;
        matched += user_matched;
    }
    let denom = pairs.max(1) as f64;
    Ok(ConsistencyReport {
        mean_preference: sum_x / denom,
        match_fraction: matched as f64 / denom,
        per_user_match_median: median(&mut per_user).unwrap_or(0.0),
        users: per_user.len(),
        pairs,
        skipped,
    })
}

/// Number of negatives the model prefers to the holdout `o`.
pub fn rank_m1<S: Scalar>(model: &FactorModel<S>, u: usize, o: usize, negatives: &[usize]) -> usize {
    negatives
        .iter()
        .filter(|&&j| model.preference_value(u, j, o) > 0.0)
        .count()
}

/// Share of `train_items` that `t` is preferred over.
pub fn score_m2<S: Scalar>(model: &FactorModel<S>, u: usize, t: usize, train_items: &[usize]) -> Result<f64> {
    if train_items.is_empty() {
        return Err(SadError::Contract(format!(
            "user {u} has no training interactions to score against"
        )));
    }
    let wins = train_items
        .iter()
        .filter(|&&i| model.preference_value(u, t, i) > 0.0)
        .count();
    Ok(wins as f64 / train_items.len() as f64)
}

/// Number of negatives whose score strictly exceeds the holdout's.
pub fn rank_m2<S: Scalar>(
    model: &FactorModel<S>,
    u: usize,
    o: usize,
    negatives: &[usize],
    train_items: &[usize],
) -> Result<usize> {
    let own = score_m2(model, u, o, train_items)?;
    let mut rank = 0;
    for &j in negatives {
        if score_m2(model, u, j, train_items)? > own {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Share of ranks strictly below `threshold`.
pub fn hit_ratio(ranks: &[usize], threshold: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(SadError::Contract("hit ratio of an empty rank list".into()));
    }
    Ok(ranks.iter().filter(|&&r| r < threshold).count() as f64 / ranks.len() as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub split_seed: u64,
    pub consistency: ConsistencyReport,
    pub hit_ratio_m1: f64,
    pub hit_ratio_m2: f64,
}

impl EvalReport {
    pub const HEADER: &'static str = "split_seed,mean_x,match,per_user_median,hr_m1,hr_m2,users,pairs,skipped";

    pub fn to_row(&self) -> String {
        let c = &self.consistency;
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            self.split_seed,
            c.mean_preference,
            c.match_fraction,
            c.per_user_match_median,
            self.hit_ratio_m1,
            self.hit_ratio_m2,
            c.users,
            c.pairs,
            c.skipped
        )
    }
}

/// Both ranking variants for every user with a holdout.
pub fn holdout_ranks<S: Scalar>(model: &FactorModel<S>, split: &LooSplit) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut m1 = Vec::with_capacity(split.holdout.len());
    let mut m2 = Vec::with_capacity(split.holdout.len());
    for (&u, &o) in &split.holdout {
        model.check_user(u)?;
        model.check_item(o)?;
        let negatives = split
            .test_negatives
            .get(&u)
            .ok_or_else(|| SadError::Contract(format!("user {u} has a holdout but no negatives")))?;
        let train = split.train.implicit().items(u);
        m1.push(rank_m1(model, u, o, negatives));
        m2.push(rank_m2(model, u, o, negatives, train)?);
    }
    Ok((m1, m2))
}

pub fn evaluate_split<S: Scalar>(
    model: &FactorModel<S>,
    split: &LooSplit,
    full: &InteractionDataset,
    threshold: usize,
) -> Result<EvalReport> {
    let consistency = consistency_report(model, split, full)?;
    let (m1, m2) = holdout_ranks(model, split)?;
    Ok(EvalReport {
        split_seed: split.seed,
        consistency,
        hit_ratio_m1: hit_ratio(&m1, threshold)?,
        hit_ratio_m2: hit_ratio(&m2, threshold)?,
    })
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and standard deviation of every column across splits.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub splits: usize,
    pub mean_x: (f64, f64),
    pub match_fraction: (f64, f64),
    pub per_user_median: (f64, f64),
    pub hit_ratio_m1: (f64, f64),
    pub hit_ratio_m2: (f64, f64),
}

impl Aggregate {
    pub fn from_reports(reports: &[EvalReport]) -> Self {
        let col = |f: &dyn Fn(&EvalReport) -> f64| mean_sd(&reports.iter().map(f).collect::<Vec<_>>());
        Aggregate {
            splits: reports.len(),
            mean_x: col(&|r| r.consistency.mean_preference),
            match_fraction: col(&|r| r.consistency.match_fraction),
            per_user_median: col(&|r| r.consistency.per_user_match_median),
            hit_ratio_m1: col(&|r| r.hit_ratio_m1),
            hit_ratio_m2: col(&|r| r.hit_ratio_m2),
        }
    }

    /// Machine row: `mean,<mean_x>,<sd>,<match>,<sd>,...`.
    pub fn to_row(&self) -> String {
        let cols = [
            self.mean_x,
            self.match_fraction,
            self.per_user_median,
            self.hit_ratio_m1,
            self.hit_ratio_m2,
        ];
        let body: Vec<String> = cols.iter().map(|(m, s)| format!("{m:e},{s:e}")).collect();
        format!("aggregate,{}", body.join(","))
    }

    /// Fixed-width table with percentages for the fraction columns.
    pub fn to_table(&self, model_name: &str) -> String {
        let pct = |(m, s): (f64, f64)| format!("{:.1} ± {:.1}", 100.0 * m, 100.0 * s);
        format!(
            "{:<8} {:>16} {:>14} {:>14} {:>14} {:>14}\n{:<8} {:>16} {:>14} {:>14} {:>14} {:>14}\n",
            "model",
            "mean x",
            "match (%)",
            "per user (%)",
            "M1 (%)",
            "M2 (%)",
            model_name,
            format!("{:.3} ± {:.3}", self.mean_x.0, self.mean_x.1),
            pct(self.match_fraction),
            pct(self.per_user_median),
            pct(self.hit_ratio_m1),
            pct(self.hit_ratio_m2),
        )
    }
}
