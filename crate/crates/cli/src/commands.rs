//! The four computing subcommands and the shared launch/replay driver.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use sad_core::data::observations_from_feedback;
use sad_core::evaluation::Aggregate;
use sad_core::gibbs::check_size;
use sad_core::sgd::SPARSITY_TOL;
use sad_core::simulation::{masked_observations, run_cell, StudyModel, StudyReport};
use sad_core::{
    evaluate_split, generate_truth, load_checkpoint, load_interactions, loo_split_with, run_chain,
    save_checkpoint, sparsity, train, train_bpr, EvalReport, FactorModel, GibbsConfig,
    ImplicitFeedback, InteractionDataset, Scalar, SimKind, SimSpec, TrainConfig, TrainingLog,
};

use crate::args::{EvaluateArgs, GibbsArgs, ModelArg, PrecisionArg, SimulateArgs, TrainArgs};
use crate::run::{absolute, apply_config, digest_file, usage, InputDigest, RunDir, RunManifest, UsageError};

pub const GRID_LEARNING_RATES: [f64; 7] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1];
pub const GRID_EPOCHS: [usize; 5] = [2, 5, 10, 20, 50];
pub const GRID_L2: [f64; 4] = [0.05, 0.01, 0.005, 0.001];

pub trait RunCommand: Serialize + DeserializeOwned + Sync {
    const NAME: &'static str;

    fn seed(&self) -> u64;
    fn take_config(&mut self) -> Option<PathBuf>;
    /// Rewrites input paths to absolute form.
    fn absolutize(&mut self) -> Result<()>;
    fn inputs(&self) -> Vec<PathBuf>;
    fn artifacts(&self) -> Vec<String>;
    fn validate(&self) -> Result<()>;
    /// Does the work and returns a short report for stdout.
    fn execute(&self, run: &RunDir) -> Result<String>;
}

/// Resolves flags and config file, writes the manifest, then runs.
pub fn launch<C: RunCommand>(mut cmd: C, base: &Path) -> Result<PathBuf> {
    let mut inputs = Vec::new();
    if let Some(path) = cmd.take_config() {
        let path = absolute(&path)?;
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let mut value = serde_json::to_value(&cmd)?;
        apply_config(&mut value, &text)?;
        cmd = serde_json::from_value(value)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        inputs.push(digest_file(&path)?);
    }
    cmd.absolutize()?;
    cmd.validate()?;
    for path in cmd.inputs() {
        inputs.push(digest_file(&path)?);
    }
    run_resolved(&cmd, inputs, base)
}

fn run_resolved<C: RunCommand>(cmd: &C, inputs: Vec<InputDigest>, base: &Path) -> Result<PathBuf> {
    let run = RunDir::create(base, C::NAME, cmd.seed())?;
    let manifest = RunManifest {
        command: C::NAME.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cmd.seed(),
        args: serde_json::to_value(cmd)?,
        inputs,
        artifacts: cmd.artifacts(),
    };
    run.write_manifest(&manifest)?;
    // Output may go to a closed pipe; the run directory is the real result.
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "run: {}", run.path.display());
    let _ = stdout.flush();
    let report = cmd.execute(&run)?;
    let _ = write!(stdout, "{report}");
    Ok(run.path)
}

/// Re-runs a manifest into a fresh run directory.
pub fn replay(manifest_path: &Path, base: &Path) -> Result<PathBuf> {
    let manifest = RunManifest::load(manifest_path)?;
    if manifest.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, replaying with {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    manifest.verify_inputs()?;
    fn go<C: RunCommand>(m: &RunManifest, base: &Path) -> Result<PathBuf> {
        let cmd: C = serde_json::from_value(m.args.clone()).context("manifest arguments")?;
        cmd.validate()?;
        run_resolved(&cmd, m.inputs.clone(), base)
    }
    match manifest.command.as_str() {
        SimulateArgs::NAME => go::<SimulateArgs>(&manifest, base),
        TrainArgs::NAME => go::<TrainArgs>(&manifest, base),
        GibbsArgs::NAME => go::<GibbsArgs>(&manifest, base),
        EvaluateArgs::NAME => go::<EvaluateArgs>(&manifest, base),
        other => usage(format!("manifest names unknown command {other:?}")),
    }
}

/// Maps `f` over `items` in order, on `threads` workers when asked.
fn map_ordered<T, R, F>(items: &[T], threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    match threads {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build()?;
            pool.install(|| items.par_iter().map(&f).collect())
        }
        _ => items.iter().map(f).collect(),
    }
}

fn check_parallel(parallel: Option<usize>) -> Result<()> {
    if parallel == Some(0) {
        return usage("--parallel needs at least one worker");
    }
    Ok(())
}

fn load_dataset(path: &Path, source: &crate::args::DataArgs) -> Result<InteractionDataset> {
    load_interactions(path, source.format.into(), source.load_options())
        .with_context(|| format!("loading {}", path.display()))
}

impl SimulateArgs {
    fn spec(&self) -> SimSpec {
        SimSpec {
            n_users: self.n_users,
            n_items: self.n_items,
            n_factors: self.hyper.k,
            extreme_fraction: self.extreme_fraction,
            ..SimSpec::new(self.kind.into(), self.seed)
        }
    }
}

impl RunCommand for SimulateArgs {
    const NAME: &'static str = "simulate";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn take_config(&mut self) -> Option<PathBuf> {
        self.config.take()
    }

    fn absolutize(&mut self) -> Result<()> {
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        Vec::new()
    }

    fn artifacts(&self) -> Vec<String> {
        ["summary.csv", "trajectory.csv", "truth.ckpt"].map(String::from).to_vec()
    }

    fn validate(&self) -> Result<()> {
        check_parallel(self.parallel)?;
        if self.missing.is_empty() {
            return usage("--missing needs at least one fraction");
        }
        if let Some(f) = self.missing.iter().find(|f| !(0.0..1.0).contains(*f)) {
            return usage(format!("missing fraction {f} outside [0, 1)"));
        }
        self.spec().validate()?;
        self.hyper.train_config(self.seed, ModelArg::Sad).validate()?;
        Ok(())
    }

    fn execute(&self, run: &RunDir) -> Result<String> {
        let spec = self.spec();
        let kind = spec.kind;
        let truth = generate_truth(&spec)?;
        save_checkpoint(&run.file("truth.ckpt"), &truth.model)?;

        let observations = self
            .missing
            .iter()
            .enumerate()
            .map(|(idx, &f)| masked_observations(&truth, spec.seed, idx, f))
            .collect::<sad_core::Result<Vec<_>>>()?;
        let mut cells = Vec::new();
        for idx in 0..self.missing.len() {
            cells.push((idx, StudyModel::Sad, self.hyper.train_config(self.seed, ModelArg::Sad)));
            cells.push((idx, StudyModel::Bpr, self.hyper.train_config(self.seed, ModelArg::Bpr)));
        }
        let rows = map_ordered(&cells, self.parallel, |(idx, model, config)| {
            Ok(run_cell(&truth, &observations[*idx], config, kind, self.missing[*idx], *model)?)
        })?;
        let report = StudyReport {
            true_sparsity: sparsity(truth.model.right_item_factors(), SPARSITY_TOL),
            rows,
        };
        run.write("summary.csv", &report.summary_csv())?;
        run.write("trajectory.csv", &report.trajectory_csv())?;

        let mut out = format!("{kind}: true T sparsity {:.3}\n", report.true_sparsity);
        writeln!(out, "{:>8} {:>5} {:>10} {:>10} {:>10}", "missing", "model", "loglik", "sparsity", "mse")?;
        for row in &report.rows {
            let last = row.last();
            writeln!(
                out,
                "{:>8.2} {:>5} {:>10.4} {:>10.3} {:>10.4}",
                row.missing_fraction, row.model, last.mean_loglik, last.sparsity, last.mse
            )?;
        }
        Ok(out)
    }
}

/// One grid cell: trained to the largest epoch budget, read off at each
/// smaller budget. Early stopping leaves later budgets at the final epoch.
#[derive(Clone, Debug)]
struct GridRow {
    learning_rate: f64,
    epochs: usize,
    l2: f64,
    final_loglik: f64,
}

fn fit_model<S: Scalar>(fb: &ImplicitFeedback, config: &TrainConfig, model: ModelArg) -> Result<(FactorModel<S>, TrainingLog)> {
    Ok(match model {
        ModelArg::Sad => train(fb, config)?,
        ModelArg::Bpr => train_bpr(fb, config)?,
    })
}

fn fit_and_save<S: Scalar>(
    fb: &ImplicitFeedback,
    config: &TrainConfig,
    model: ModelArg,
    run: &RunDir,
) -> Result<TrainingLog> {
    let (fitted, log) = fit_model::<S>(fb, config, model)?;
    save_checkpoint(&run.file("model.ckpt"), &fitted)?;
    Ok(log)
}

impl TrainArgs {
    fn grid_search(&self, fb: &ImplicitFeedback) -> Result<Vec<GridRow>> {
        let max_epochs = *GRID_EPOCHS.iter().max().expect("non-empty grid");
        let mut cells = Vec::new();
        for &lr in &GRID_LEARNING_RATES {
            for &l2 in &GRID_L2 {
                cells.push((lr, l2));
            }
        }
        let logs = map_ordered(&cells, self.parallel, |&(lr, l2)| {
            let config = TrainConfig {
                learning_rate: lr,
                l2_weight: l2,
                epochs: max_epochs,
                ..self.hyper.train_config(self.seed, self.model)
            };
            Ok(fit_model::<f64>(fb, &config, self.model)?.1)
        })?;
        let mut rows = Vec::new();
        for (&(lr, l2), log) in cells.iter().zip(&logs) {
            for &epochs in &GRID_EPOCHS {
                let record = &log.epochs[epochs.min(log.epochs.len()) - 1];
                rows.push(GridRow {
                    learning_rate: lr,
                    epochs,
                    l2,
                    final_loglik: record.mean_loglik,
                });
            }
        }
        Ok(rows)
    }
}

fn grid_csv(rows: &[GridRow], chosen: usize) -> String {
    let mut out = String::from("learning_rate,epochs,l2,final_loglik,chosen\n");
    for (idx, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{:e},{}\n",
            r.learning_rate,
            r.epochs,
            r.l2,
            r.final_loglik,
            idx == chosen
        ));
    }
    out
}

impl RunCommand for TrainArgs {
    const NAME: &'static str = "train";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn take_config(&mut self) -> Option<PathBuf> {
        self.config.take()
    }

    fn absolutize(&mut self) -> Result<()> {
        self.data = absolute(&self.data)?;
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        vec![self.data.clone()]
    }

    fn artifacts(&self) -> Vec<String> {
        let mut out: Vec<String> = ["model.ckpt", "training_log.csv"].map(String::from).to_vec();
        if self.grid {
            out.push("grid.csv".into());
        }
        out
    }

    fn validate(&self) -> Result<()> {
        check_parallel(self.parallel)?;
        self.hyper.train_config(self.seed, self.model).validate()?;
        Ok(())
    }

    fn execute(&self, run: &RunDir) -> Result<String> {
        let dataset = load_dataset(&self.data, &self.source)?;
        let fb = dataset.implicit();
        let mut config = self.hyper.train_config(self.seed, self.model);
        let mut out = format!(
            "{} users, {} items, {} interactions\n",
            dataset.n_users(),
            dataset.n_items(),
            dataset.n_interactions()
        );
        if self.grid {
            let rows = self.grid_search(fb)?;
            let mut best = 0;
            for (idx, r) in rows.iter().enumerate() {
                if r.final_loglik > rows[best].final_loglik {
                    best = idx;
                }
            }
            run.write("grid.csv", &grid_csv(&rows, best))?;
            let chosen = &rows[best];
            config.learning_rate = chosen.learning_rate;
            config.epochs = chosen.epochs;
            config.l2_weight = chosen.l2;
            writeln!(
                out,
                "grid choice: lr {} epochs {} l2 {} (loglik {:.5})",
                chosen.learning_rate, chosen.epochs, chosen.l2, chosen.final_loglik
            )?;
        }
        let log = match self.precision {
            PrecisionArg::F64 => fit_and_save::<f64>(fb, &config, self.model, run)?,
            PrecisionArg::F32 => fit_and_save::<f32>(fb, &config, self.model, run)?,
        };
        run.write("training_log.csv", &log.to_csv(self.timing))?;
        let last = log.epochs.last().expect("at least one epoch");
        writeln!(
            out,
            "initial loglik {:.5}, after {} epochs {:.5}, T sparsity {:.3}",
            log.initial_loglik, last.epoch, last.mean_loglik, last.t_sparsity
        )?;
        if log.skipped_users > 0 {
            writeln!(out, "{} users without a non-interacted item were skipped", log.skipped_users)?;
        }
        Ok(out)
    }
}

impl RunCommand for GibbsArgs {
    const NAME: &'static str = "gibbs";

    fn seed(&self) -> u64 {
        self.seed
    }

    fn take_config(&mut self) -> Option<PathBuf> {
        self.config.take()
    }

    fn absolutize(&mut self) -> Result<()> {
        if let Some(p) = &self.data {
            self.data = Some(absolute(p)?);
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.data.iter().cloned().collect()
    }

    fn artifacts(&self) -> Vec<String> {
        let mut out: Vec<String> = ["posterior_summary.csv", "trace.csv", "posterior_mean.ckpt"]
            .map(String::from)
            .to_vec();
        if self.sim.is_some() {
            out.push("truth.ckpt".into());
        }
        out
    }

    fn validate(&self) -> Result<()> {
        match (&self.sim, &self.data) {
            (None, None) => return usage("gibbs needs --sim or --data"),
            (Some(_), Some(_)) => return usage("--sim and --data are exclusive"),
            _ => {}
        }
        if !(0.0..1.0).contains(&self.missing) {
            return usage(format!("missing fraction {} outside [0, 1)", self.missing));
        }
        if self.sweeps <= self.burn_in {
            return usage(format!("--sweeps ({}) must exceed --burn-in ({})", self.sweeps, self.burn_in));
        }
        if self.thin == 0 {
            return usage("--thin must be at least 1");
        }
        self.gibbs_config().validate()?;
        if let Some(kind) = self.sim {
            check_size(self.n_users, self.n_items, self.cap)?;
            self.sim_spec(kind.into()).validate()?;
        }
        Ok(())
    }

    fn execute(&self, run: &RunDir) -> Result<String> {
        let (observations, n, m) = match (self.sim, &self.data) {
            (Some(kind), _) => {
                let spec = self.sim_spec(kind.into());
                let truth = generate_truth(&spec)?;
                save_checkpoint(&run.file("truth.ckpt"), &truth.model)?;
                let obs = masked_observations(&truth, spec.seed, 0, self.missing)?;
                (obs, spec.n_users, spec.n_items)
            }
            (None, Some(path)) => {
                let dataset = load_dataset(path, &self.source)?;
                check_size(dataset.n_users(), dataset.n_items(), self.cap)?;
                (observations_from_feedback(dataset.implicit()), dataset.n_users(), dataset.n_items())
            }
            (None, None) => unreachable!("validated"),
        };
        let chain = run_chain(&observations, n, m, &self.gibbs_config(), self.sweeps, self.burn_in, self.thin)?;
        run.write("posterior_summary.csv", &chain.summary.to_csv())?;
        run.write("trace.csv", &chain.trace_csv())?;
        let mean = chain.summary.mean_model()?;
        save_checkpoint(&run.file("posterior_mean.ckpt"), &mean)?;

        let t = mean.right_item_factors().as_slice();
        let t_dev = t.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / t.len() as f64;
        Ok(format!(
            "{} observations, {} kept draws, final joint log density {:.3}\n\
             posterior mean T: mean |T - 1| {:.4}, sparsity {:.3}\n",
            observations.len(),
            chain.summary.n_samples,
            chain.log_density.last().copied().unwrap_or(f64::NAN),
            t_dev,
            sparsity(mean.right_item_factors(), SPARSITY_TOL)
        ))
    }
}

impl GibbsArgs {
    fn sim_spec(&self, kind: SimKind) -> SimSpec {
        SimSpec {
            n_users: self.n_users,
            n_items: self.n_items,
            n_factors: self.k,
            ..SimSpec::new(kind, self.seed)
        }
    }

    fn gibbs_config(&self) -> GibbsConfig {
        GibbsConfig {
            n_factors: self.k,
            seed: self.seed,
            prior_var: self.prior_var,
            tau_passes: self.tau_passes,
        }
    }
}

impl RunCommand for EvaluateArgs {
    const NAME: &'static str = "evaluate";

    fn seed(&self) -> u64 {
        self.seed_base
    }

    fn take_config(&mut self) -> Option<PathBuf> {
        self.config.take()
    }

    fn absolutize(&mut self) -> Result<()> {
        self.data = absolute(&self.data)?;
        if let Some(p) = &self.checkpoint {
            self.checkpoint = Some(absolute(p)?);
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<PathBuf> {
        let mut out = vec![self.data.clone()];
        out.extend(self.checkpoint.iter().cloned());
        out
    }

    fn artifacts(&self) -> Vec<String> {
        ["eval.csv", "table.txt"].map(String::from).to_vec()
    }

    fn validate(&self) -> Result<()> {
        check_parallel(self.parallel)?;
        if self.splits == 0 {
            return usage("--splits must be at least 1");
        }
        if self.threshold == 0 {
            return usage("--threshold must be at least 1");
        }
        if self.checkpoint.is_none() {
            self.hyper.train_config(self.seed_base, self.model).validate()?;
        }
        Ok(())
    }

    fn execute(&self, run: &RunDir) -> Result<String> {
        let dataset = load_dataset(&self.data, &self.source)?;
        let fixed: Option<FactorModel<f64>> = match &self.checkpoint {
            Some(path) => {
                let model = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
                if model.n_users() != dataset.n_users() || model.n_items() != dataset.n_items() {
                    return Err(sad_core::SadError::ShapeMismatch(format!(
                        "checkpoint is {} users x {} items, dataset is {} x {}",
                        model.n_users(),
                        model.n_items(),
                        dataset.n_users(),
                        dataset.n_items()
                    ))
                    .into());
                }
                Some(model)
            }
            None => None,
        };
        let seeds: Vec<u64> = (0..self.splits as u64).map(|s| self.seed_base + s).collect();
        let reports: Vec<EvalReport> = map_ordered(&seeds, self.parallel, |&seed| {
            let split = loo_split_with(&dataset, seed, self.negatives)?;
            let report = match &fixed {
                Some(model) => evaluate_split(model, &split, &dataset, self.threshold)?,
                None => {
                    let config = self.hyper.train_config(seed, self.model);
                    let (model, _) = fit_model::<f64>(split.train.implicit(), &config, self.model)?;
                    evaluate_split(&model, &split, &dataset, self.threshold)?
                }
            };
            Ok(report)
        })?;
        let aggregate = Aggregate::from_reports(&reports);
        let mut csv = String::from(EvalReport::HEADER);
        csv.push('\n');
        for r in &reports {
            csv.push_str(&r.to_row());
            csv.push('\n');
        }
        csv.push_str(&aggregate.to_row());
        csv.push('\n');
        run.write("eval.csv", &csv)?;
        let name = match self.model {
            ModelArg::Sad => "SAD",
            ModelArg::Bpr => "BPR",
        };
        let table = aggregate.to_table(name);
        run.write("table.txt", &table)?;
        Ok(format!("{} splits on {} users\n{table}", reports.len(), dataset.n_users()))
    }
}
