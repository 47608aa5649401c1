//! Interaction datasets, loaders, leave-one-out splits and sampling helpers.
//!
//! Ratings and timestamps are kept on [`InteractionDataset`] for evaluation
//! only. Trainers receive an [`ImplicitFeedback`], which exposes nothing but
//! the user-item membership.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;

use crate::error::{Result, SadError};
use crate::model::{Direction, Observation};
use crate::rng::{stream, STREAM_SPLIT};

/// Number of sampled non-interacted items per held-out user.
pub const DEFAULT_TEST_NEGATIVES: usize = 100;

/// Binary user-item membership: the only view of the data a trainer sees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImplicitFeedback {
    n_items: usize,
    items: Vec<Vec<usize>>,
    sorted: Vec<Vec<usize>>,
}

impl ImplicitFeedback {
    /// Builds from per-user item lists; duplicates within a user are an error.
    pub fn new(n_items: usize, items: Vec<Vec<usize>>) -> Result<Self> {
        let mut sorted = Vec::with_capacity(items.len());
        for (u, list) in items.iter().enumerate() {
            let mut s = list.clone();
            s.sort_unstable();
            if let Some(w) = s.windows(2).find(|w| w[0] == w[1]) {
                return Err(SadError::Contract(format!(
                    "user {u} interacts with item {} twice",
                    w[0]
                )));
            }
            if let Some(&last) = s.last() {
                if last >= n_items {
                    return Err(SadError::IndexOutOfRange {
                        what: "item",
                        index: last,
                        size: n_items,
                    });
                }
            }
            sorted.push(s);
        }
        Ok(ImplicitFeedback {
            n_items,
            items,
            sorted,
        })
    }

    #[inline]
    pub fn n_users(&self) -> usize {
        self.items.len()
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Items of `u` in dataset order.
    #[inline]
    pub fn items(&self, u: usize) -> &[usize] {
        &self.items[u]
    }

    #[inline]
    pub fn contains(&self, u: usize, item: usize) -> bool {
        self.sorted[u].binary_search(&item).is_ok()
    }

    pub fn n_interactions(&self) -> usize {
        self.items.iter().map(Vec::len).sum()
    }

    pub fn non_interacted_count(&self, u: usize) -> usize {
        self.n_items - self.items[u].len()
    }

    /// Items `u` never interacted with, ascending.
    pub fn complement(&self, u: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.non_interacted_count(u));
        let mut it = self.sorted[u].iter().peekable();
        for item in 0..self.n_items {
            if it.peek() == Some(&&item) {
                it.next();
            } else {
                out.push(item);
            }
        }
        out
    }
}

/// Extra columns of one interaction, hidden from trainers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InteractionDetail {
    pub rating: Option<i32>,
    pub timestamp: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionDataset {
    implicit: ImplicitFeedback,
    details: Vec<Vec<InteractionDetail>>,
    user_ids: Vec<String>,
    item_ids: Vec<String>,
}

/// One parsed input row.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawInteraction {
    pub user: String,
    pub item: String,
    pub rating: Option<i32>,
    pub timestamp: Option<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    /// `user,item,rating[,timestamp]` with an optional header line.
    CsvComma,
    /// `user::item::rating::timestamp`, no header.
    DoubleColon,
}

impl std::str::FromStr for InputFormat {
    type Err = SadError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "csv-comma" | "comma" => Ok(InputFormat::CsvComma),
            "movielens" | "double-colon" | "movielens-double-colon" | "::" => {
                Ok(InputFormat::DoubleColon)
            }
            other => Err(SadError::Config(format!("unknown input format {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Items with fewer interactions (after user selection) are dropped.
    pub min_item_count: usize,
    /// Keep only this many most active users.
    pub top_users: Option<usize>,
}

impl InteractionDataset {
    /// Builds a dataset from rows in order. Indices follow first appearance;
    /// repeated (user, item) rows keep the first occurrence.
    pub fn from_records(records: &[RawInteraction]) -> Result<Self> {
        let mut user_index: HashMap<&str, usize> = HashMap::new();
        let mut item_index: HashMap<&str, usize> = HashMap::new();
        let mut user_ids = Vec::new();
        let mut item_ids = Vec::new();
        let mut items: Vec<Vec<usize>> = Vec::new();
        let mut details: Vec<Vec<InteractionDetail>> = Vec::new();
        let mut seen: std::collections::HashSet<(usize, usize)> = Default::default();

        for rec in records {
            let u = *user_index.entry(rec.user.as_str()).or_insert_with(|| {
                user_ids.push(rec.user.clone());
                items.push(Vec::new());
                details.push(Vec::new());
                user_ids.len() - 1
            });
            let i = *item_index.entry(rec.item.as_str()).or_insert_with(|| {
                item_ids.push(rec.item.clone());
                item_ids.len() - 1
            });
            if seen.insert((u, i)) {
                items[u].push(i);
                details[u].push(InteractionDetail {
                    rating: rec.rating,
                    timestamp: rec.timestamp,
                });
            }
        }
        if user_ids.is_empty() {
            return Err(SadError::EmptyDataset);
        }
        let implicit = ImplicitFeedback::new(item_ids.len(), items)?;
        Ok(InteractionDataset {
            implicit,
            details,
            user_ids,
            item_ids,
        })
    }

    /// The trainer-visible view.
    pub fn implicit(&self) -> &ImplicitFeedback {
        &self.implicit
    }

    pub fn n_users(&self) -> usize {
        self.implicit.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.implicit.n_items()
    }

    pub fn n_interactions(&self) -> usize {
        self.implicit.n_interactions()
    }

    pub fn user_id(&self, u: usize) -> &str {
        &self.user_ids[u]
    }

    pub fn item_id(&self, i: usize) -> &str {
        &self.item_ids[i]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    /// `(item, detail)` pairs of `u` in dataset order.
    pub fn interactions(&self, u: usize) -> impl Iterator<Item = (usize, InteractionDetail)> + '_ {
        self.implicit
            .items(u)
            .iter()
            .copied()
            .zip(self.details[u].iter().copied())
    }

    /// Rating `u` gave `item`, if both the interaction and a rating exist.
    pub fn rating(&self, u: usize, item: usize) -> Option<i32> {
        let pos = self.implicit.items(u).iter().position(|&i| i == item)?;
        self.details[u][pos].rating
    }

    /// Per-user `item -> rating` lookup tables.
    pub fn rating_tables(&self) -> Vec<HashMap<usize, i32>> {
        (0..self.n_users())
            .map(|u| {
                self.interactions(u)
                    .filter_map(|(i, d)| d.rating.map(|r| (i, r)))
                    .collect()
            })
            .collect()
    }

    /// Copy without the listed `(user, item)` interactions; index space unchanged.
    fn without(&self, removed: &BTreeMap<usize, usize>) -> Self {
        let mut items = Vec::with_capacity(self.n_users());
        let mut details = Vec::with_capacity(self.n_users());
        for u in 0..self.n_users() {
            let drop = removed.get(&u).copied();
            let (its, dts): (Vec<usize>, Vec<InteractionDetail>) = self
                .interactions(u)
                .filter(|(i, _)| Some(*i) != drop)
                .unzip();
            items.push(its);
            details.push(dts);
        }
        InteractionDataset {
            implicit: ImplicitFeedback::new(self.n_items(), items)
                .expect("subset of a valid dataset"),
            details,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
        }
    }

    /// Canonical dump: comma format sorted by (user index, item index).
    pub fn write_canonical<W: Write>(&self, out: &mut W) -> Result<()> {
        for u in 0..self.n_users() {
            let mut rows: Vec<(usize, InteractionDetail)> = self.interactions(u).collect();
            rows.sort_unstable_by_key(|(i, _)| *i);
            for (i, d) in rows {
                let rating = d.rating.map(|r| r.to_string()).unwrap_or_default();
                match d.timestamp {
                    Some(ts) => writeln!(
                        out,
                        "{},{},{},{}",
                        self.user_ids[u], self.item_ids[i], rating, ts
                    )?,
                    None => writeln!(out, "{},{},{}", self.user_ids[u], self.item_ids[i], rating)?,
                }
            }
        }
        Ok(())
    }

    pub fn save_canonical(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(File::create(path)?);
        self.write_canonical(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

fn parse_rating(field: &str, line: usize) -> Result<Option<i32>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    if let Ok(v) = field.parse::<i32>() {
        return Ok(Some(v));
    }
    match field.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => Ok(Some(v as i32)),
        _ => Err(SadError::Parse {
            line,
            message: format!("rating {field:?} is not a small integer"),
        }),
    }
}

fn parse_timestamp(field: &str, line: usize) -> Result<Option<i64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field.parse::<i64>().map(Some).map_err(|_| SadError::Parse {
        line,
        message: format!("timestamp {field:?} is not an integer"),
    })
}

/// Parses rows from `reader` without filtering.
pub fn parse_interactions<R: BufRead>(reader: R, format: InputFormat) -> Result<Vec<RawInteraction>> {
    let mut records = Vec::new();
    let mut first_content = true;
    for (n, line) in reader.lines().enumerate() {
        let number = n + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = match format {
            InputFormat::CsvComma => line.split(',').collect(),
            InputFormat::DoubleColon => line.split("::").collect(),
        };
        let is_first = std::mem::replace(&mut first_content, false);
        if is_first
            && format == InputFormat::CsvComma
            && fields.len() >= 3
            && parse_rating(fields[2], number).is_err()
        {
            // header row
            continue;
        }
        if !(3..=4).contains(&fields.len()) {
            return Err(SadError::Parse {
                line: number,
                message: format!("expected 3 or 4 fields, found {}", fields.len()),
            });
        }
        let user = fields[0].trim();
        let item = fields[1].trim();
        if user.is_empty() || item.is_empty() {
            return Err(SadError::Parse {
                line: number,
                message: "empty user or item id".into(),
            });
        }
        records.push(RawInteraction {
            user: user.to_string(),
            item: item.to_string(),
            rating: parse_rating(fields[2], number)?,
            timestamp: match fields.get(3) {
                Some(f) => parse_timestamp(f, number)?,
                None => None,
            },
        });
    }
    Ok(records)
}

/// Applies user selection, then item count filtering. Users left without
/// interactions disappear because indices are assigned afterwards.
pub fn filter_records(records: Vec<RawInteraction>, options: LoadOptions) -> Vec<RawInteraction> {
    let mut records = records;
    if let Some(top) = options.top_users {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (pos, r) in records.iter().enumerate() {
            counts.entry(r.user.as_str()).or_insert((0, pos)).0 += 1;
        }
        let mut ranked: Vec<(&str, (usize, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        let keep: std::collections::HashSet<String> =
            ranked.iter().take(top).map(|(u, _)| u.to_string()).collect();
        records.retain(|r| keep.contains(&r.user));
    }
    if options.min_item_count > 1 {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for r in &records {
            *counts.entry(r.item.clone()).or_default() += 1;
        }
        records.retain(|r| counts[&r.item] >= options.min_item_count);
    }
    records
}

pub fn read_interactions<R: BufRead>(
    reader: R,
    format: InputFormat,
    options: LoadOptions,
) -> Result<InteractionDataset> {
    let records = filter_records(parse_interactions(reader, format)?, options);
    InteractionDataset::from_records(&records)
}

pub fn load_interactions(
    path: &Path,
    format: InputFormat,
    options: LoadOptions,
) -> Result<InteractionDataset> {
    read_interactions(BufReader::new(File::open(path)?), format, options)
}

/// Uniform draw from the items `u` never interacted with.
pub fn sample_negative<R: Rng + ?Sized>(
    feedback: &ImplicitFeedback,
    u: usize,
    rng: &mut R,
) -> Result<usize> {
    let m = feedback.n_items();
    let free = feedback.non_interacted_count(u);
    if free == 0 {
        return Err(SadError::NoNegatives { user: u });
    }
    if 2 * free >= m {
        // acceptance rate >= 1/2
        loop {
            let j = rng.random_range(0..m);
            if !feedback.contains(u, j) {
                return Ok(j);
            }
        }
    }
    let complement = feedback.complement(u);
    Ok(complement[rng.random_range(0..complement.len())])
}

/// Drops `round(fraction * N)` uniformly chosen entries, keeping order.
pub fn mask_missing<T: Clone, R: Rng + ?Sized>(items: &[T], fraction: f64, rng: &mut R) -> Result<Vec<T>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(SadError::Config(format!(
            "missing fraction {fraction} outside [0, 1)"
        )));
    }
    let n = items.len();
    let drop = ((fraction * n as f64).round() as usize).min(n);
    if drop == 0 {
        return Ok(items.to_vec());
    }
    let mut dropped = vec![false; n];
    for idx in index::sample(rng, n, drop) {
        dropped[idx] = true;
    }
    Ok(items
        .iter()
        .zip(dropped)
        .filter(|(_, d)| !d)
        .map(|(x, _)| x.clone())
        .collect())
}

/// Every (interacted, non-interacted) pair as a canonical observation.
pub fn observations_from_feedback(feedback: &ImplicitFeedback) -> Vec<Observation> {
    let mut out = Vec::new();
    for u in 0..feedback.n_users() {
        let complement = feedback.complement(u);
        for &i in feedback.items(u) {
            for &j in &complement {
                out.push(Observation::new(u, i, j, Direction::Positive).canonical());
            }
        }
    }
    out
}

/// Leave-one-interaction-out split.
#[derive(Clone, Debug, PartialEq)]
pub struct LooSplit {
    pub train: InteractionDataset,
    /// user -> held-out item
    pub holdout: BTreeMap<usize, usize>,
    /// user -> sampled never-interacted items
    pub test_negatives: BTreeMap<usize, Vec<usize>>,
    pub seed: u64,
}

pub fn loo_split(dataset: &InteractionDataset, seed: u64) -> Result<LooSplit> {
    loo_split_with(dataset, seed, DEFAULT_TEST_NEGATIVES)
}

pub fn loo_split_with(
    dataset: &InteractionDataset,
    seed: u64,
    n_negatives: usize,
) -> Result<LooSplit> {
    if dataset.n_interactions() == 0 {
        return Err(SadError::EmptyDataset);
    }
    let feedback = dataset.implicit();
    let mut rng = stream(seed, STREAM_SPLIT);
    let mut holdout = BTreeMap::new();
    let mut test_negatives = BTreeMap::new();
    for u in 0..dataset.n_users() {
        let items = feedback.items(u);
        if items.len() < 2 {
            continue;
        }
        let held = items[rng.random_range(0..items.len())];
        let complement = feedback.complement(u);
        if complement.len() < n_negatives {
            return Err(SadError::InsufficientNegatives {
                user: u,
                available: complement.len(),
                required: n_negatives,
            });
        }
        let negatives: Vec<usize> = index::sample(&mut rng, complement.len(), n_negatives)
            .into_iter()
            .map(|k| complement[k])
            .collect();
        holdout.insert(u, held);
        test_negatives.insert(u, negatives);
    }
    let train = dataset.without(&holdout);
    Ok(LooSplit {
        train,
        holdout,
        test_negatives,
        seed,
    })
}

impl LooSplit {
    /// Checks the split invariants against the dataset it came from.
    pub fn validate(&self, full: &InteractionDataset, n_negatives: usize) -> Result<()> {
        let fail = |msg: String| Err(SadError::Contract(msg));
        if self.train.n_users() != full.n_users() || self.train.n_items() != full.n_items() {
            return fail("train index space differs from the full dataset".into());
        }
        for u in 0..full.n_users() {
            let n_full = full.implicit().items(u).len();
            let n_train = self.train.implicit().items(u).len();
            match self.holdout.get(&u) {
                Some(&o) => {
                    if self.train.implicit().contains(u, o) {
                        return fail(format!("held-out item {o} of user {u} is in train"));
                    }
                    if !full.implicit().contains(u, o) {
                        return fail(format!("held-out item {o} of user {u} is not an interaction"));
                    }
                    if n_train + 1 != n_full {
                        return fail(format!("user {u} lost more than one interaction"));
                    }
                    let negs = self
                        .test_negatives
                        .get(&u)
                        .ok_or_else(|| SadError::Contract(format!("user {u} has no negatives")))?;
                    if negs.len() != n_negatives {
                        return fail(format!("user {u} has {} negatives", negs.len()));
                    }
                    let mut sorted = negs.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != negs.len() {
                        return fail(format!("user {u} has repeated negatives"));
                    }
                    if let Some(j) = negs.iter().find(|&&j| full.implicit().contains(u, j)) {
                        return fail(format!("negative {j} of user {u} was interacted"));
                    }
                }
                None => {
                    if n_full >= 2 {
                        return fail(format!("user {u} is eligible but has no holdout"));
                    }
                    if n_train != n_full {
                        return fail(format!("user {u} without holdout lost interactions"));
                    }
                }
            }
        }
        Ok(())
    }
}
