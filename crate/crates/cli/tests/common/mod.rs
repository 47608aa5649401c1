//! Helpers for driving the `sad` binary from tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    /// Run directory announced on the first stdout line.
    pub fn run_dir(&self) -> PathBuf {
        let line = self
            .stdout
            .lines()
            .find_map(|l| l.strip_prefix("run: "))
            .unwrap_or_else(|| panic!("no run directory in output:\n{}\n{}", self.stdout, self.stderr));
        PathBuf::from(line)
    }
}

/// Runs the binary with `--out-dir out` and no output-directory override
/// from the environment.
pub fn sad(out: &Path, args: &[&str]) -> Outcome {
    let output = Command::new(env!("CARGO_BIN_EXE_sad"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("SAD_OUTPUT_DIR")
        .output()
        .expect("spawn sad");
    Outcome {
        code: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

pub fn sad_ok(out: &Path, args: &[&str]) -> Outcome {
    let o = sad(out, args);
    assert_eq!(o.code, 0, "sad {args:?} failed:\n{}\n{}", o.stdout, o.stderr);
    o
}

/// Every file of a run directory by name.
pub fn run_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

/// Writes `user::item::rating::timestamp` rows drawn from a planted
/// anti-symmetric model: each user picks the items that win most often
/// against a fixed panel of reference items, with Gumbel noise, and rates
/// them by that win score.
pub fn write_planted_movielens(path: &Path, n_users: usize, n_items: usize, seed: u64) {
    let k = 8;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let xi: Vec<Vec<f64>> = (0..n_users).map(|_| (0..k).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let eta: Vec<Vec<f64>> = (0..n_items).map(|_| (0..k).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let tau: Vec<Vec<f64>> = (0..n_items)
        .map(|_| {
            (0..k)
                .map(|_| match r.random_range(0..10) {
                    0 => 0.1,
                    1 => 3.0,
                    _ => 1.0,
                })
                .collect()
        })
        .collect();
    let panel: Vec<usize> = (0..40).map(|_| r.random_range(0..n_items)).collect();
    let popularity: Vec<f64> = (0..n_items).map(|_| r.random_range(0.0..1.5)).collect();

    let mut out = String::new();
    for (u, xu) in xi.iter().enumerate() {
        let mut scored: Vec<(f64, f64, usize)> = (0..n_items)
            .map(|i| {
                let wins: f64 = panel
                    .iter()
                    .map(|&j| (0..k).map(|h| xu[h] * (eta[i][h] * tau[j][h] - eta[j][h] * tau[i][h])).sum::<f64>())
                    .sum::<f64>()
                    / panel.len() as f64;
                let gumbel = -(-r.random_range(1e-12..1.0f64).ln()).ln();
                (wins + popularity[i] + 0.5 * gumbel, wins, i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let count = r.random_range(20..80).min(n_items - 1);
        let mut chosen: Vec<(f64, usize)> = scored[..count].iter().map(|&(_, w, i)| (w, i)).collect();
        chosen.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut rows: Vec<(usize, usize)> = chosen
            .iter()
            .enumerate()
            .map(|(rank, &(_, i))| (i, 1 + 5 * rank / count))
            .collect();
        rows.sort();
        for (pos, (i, rating)) in rows.into_iter().enumerate() {
            writeln!(out, "{}::{}::{}::{}", u + 1, i + 1, rating, 978_300_000 + 1000 * u + pos).unwrap();
        }
    }
    fs::write(path, out).unwrap();
}
