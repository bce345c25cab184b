use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Seeds};
use crate::continual::{
    evaluate, mean_errors, rank_worst, run_sequence, score_dataset, sft_train, split_group, train_baseline, SampleRef,
};
use crate::data::{generate_groups, read_dataset, write_dataset, Dataset, DatasetManifest, DATASET_VERSION};
use crate::diffcore::CHECKPOINT_VERSION;
use crate::oracle::{solve_darcy, DEFAULT_TOLERANCE};
use crate::physics::write_score_dump;
use crate::rng::GENERATOR_NAME;
use crate::transolver::{load_model, save_model, sidecar_path, TransolverModel};
use crate::{Error, Result};

pub const DATASET_FILE: &str = "dataset.pnds";
pub const LABELED_FILE: &str = "labeled.pnds";
pub const MODEL_FILE: &str = "model.pncl";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GenData,
    SolveLabels,
    Train,
    Continual,
    Sft,
    Eval,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::SolveLabels => "solve-labels",
            Command::Train => "train",
            Command::Continual => "continual",
            Command::Sft => "sft",
            Command::Eval => "eval",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub overwrite: bool,
    /// Checkpoint used by `sft` and `eval`; defaults to `<out>/model.pncl`.
    pub model: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    seeds: Seeds,
    generator: &'static str,
    dataset_format_version: u32,
    checkpoint_format_version: u32,
    wall_seconds: f64,
    outputs: Vec<String>,
    details: Value,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    opts: &'a RunOptions,
    outputs: Vec<PathBuf>,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    /// Reserves output paths, refusing to clobber existing files.
    fn claim(&mut self, names: &[String]) -> Result<Vec<PathBuf>> {
        let paths: Vec<PathBuf> = names.iter().map(|n| self.path(n)).collect();
        if !self.opts.overwrite {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(Error::WouldOverwrite(p.clone()));
            }
        }
        self.outputs.extend(paths.iter().cloned());
        Ok(paths)
    }

    fn write_json(&self, path: &Path, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Malformed(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    fn load_dataset(&self, need_labels: bool) -> Result<Dataset> {
        let labeled = self.path(LABELED_FILE);
        let path = if labeled.exists() { labeled } else { self.path(DATASET_FILE) };
        if !path.exists() {
            return Err(Error::Config(format!("no dataset in `{}`; run gen-data first", self.cfg.out.display())));
        }
        let d = read_dataset(BufReader::new(File::open(&path)?))?;
        if need_labels && !d.is_labeled() {
            return Err(Error::Config(format!("`{}` has no labels; run solve-labels first", path.display())));
        }
        Ok(d)
    }

    fn model_path(&self) -> PathBuf {
        self.opts.model.clone().unwrap_or_else(|| self.path(MODEL_FILE))
    }
}

fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(&mut w, d)?;
    w.flush()?;
    Ok(())
}

fn group_refs<'d>(d: &'d Dataset, ids: &[u32], test_per_group: usize, train: bool) -> Result<Vec<SampleRef<'d>>> {
    let mut out = Vec::new();
    for g in &d.groups {
        if ids.is_empty() || ids.contains(&g.group_id) {
            let (a, b) = split_group(g, test_per_group)?;
            out.extend(if train { a } else { b });
        }
    }
    Ok(out)
}

fn save_with_sidecar(ctx: &mut Ctx, model: &TransolverModel, name: &str) -> Result<PathBuf> {
    let path = ctx.path(name);
    let paths = ctx.claim(&[name.to_string(), format!("{name}.json")])?;
    debug_assert_eq!(paths[1], sidecar_path(&path));
    save_model(model, &path)?;
    Ok(path)
}

fn gen_data(ctx: &mut Ctx) -> Result<Value> {
    let c = ctx.cfg;
    let paths = ctx.claim(&[DATASET_FILE.into(), "dataset.json".into()])?;
    let d = &c.dataset;
    let seed = c.seeds().dataset;
    let ds = generate_groups(&d.schedule, d.samples_per_group, d.nx, d.length_scale, seed)?;
    save_dataset(&ds, &paths[0])?;
    let mut manifest = DatasetManifest::new(&d.schedule, d.samples_per_group, d.nx, d.length_scale, seed);
    manifest.forcing = d.forcing;
    ctx.write_json(&paths[1], &manifest)?;
    Ok(json!({ "groups": ds.groups.len(), "samples": ds.sample_count() }))
}

fn solve_labels(ctx: &mut Ctx) -> Result<Value> {
    let mut ds = ctx.load_dataset(false)?;
    let paths = ctx.claim(&[LABELED_FILE.into(), "labeled.json".into()])?;
    let q = crate::data::GridField::constant(ds.nx, ds.ny, ctx.cfg.dataset.forcing)?;
    let mut max_iterations = 0;
    let mut max_residual: f64 = 0.0;
    for g in &mut ds.groups {
        use rayon::prelude::*;
        let solved: Vec<_> =
            g.samples.par_iter().map(|s| solve_darcy(&s.k, &q, DEFAULT_TOLERANCE)).collect::<Result<_>>()?;
        for (s, (t, rep)) in g.samples.iter_mut().zip(solved) {
            max_iterations = max_iterations.max(rep.iterations);
            max_residual = max_residual.max(rep.final_residual_norm);
            s.label = Some(t);
        }
    }
    save_dataset(&ds, &paths[0])?;
    let d = &ctx.cfg.dataset;
    let mut manifest =
        DatasetManifest::new(&d.schedule, d.samples_per_group, d.nx, d.length_scale, ctx.cfg.seeds().dataset);
    manifest.forcing = d.forcing;
    manifest.labeled = true;
    ctx.write_json(&paths[1], &manifest)?;
    Ok(
        json!({ "tolerance": DEFAULT_TOLERANCE, "max_iterations": max_iterations, "max_relative_residual": max_residual }),
    )
}

fn train(ctx: &mut Ctx) -> Result<Value> {
    let c = ctx.cfg;
    let ds = ctx.load_dataset(c.loss.needs_labels())?;
    let ids =
        if c.strategy.train_groups.is_empty() { vec![ds.groups[0].group_id] } else { c.strategy.train_groups.clone() };
    let samples = group_refs(&ds, &ids, c.strategy.test_per_group, true)?;
    let model = TransolverModel::new(c.model.transolver()?, c.seeds().model)?;
    let (model, report) = train_baseline(&model, &samples, &c.cl_config(c.strategy.initial_epochs))?;
    save_with_sidecar(ctx, &model, MODEL_FILE)?;
    let mut details = json!({ "groups": ids, "samples": samples.len(), "train": report });
    if ds.is_labeled() {
        let tests = group_refs(&ds, &ids, c.strategy.test_per_group, false)?;
        let (l2, h1) = mean_errors(&evaluate(&model, &tests, c.loss.boundary_mode)?);
        details["test_rel_l2"] = json!(l2);
        details["test_rel_h1"] = json!(h1);
    }
    Ok(details)
}

fn continual(ctx: &mut Ctx) -> Result<Value> {
    let c = ctx.cfg;
    let strategy = c.strategy.kind.sequence_strategy().ok_or_else(|| {
        Error::Config("strategy.kind: continual needs joint, naive or replay (use the sft command for sft)".into())
    })?;
    let ds = ctx.load_dataset(true)?;
    let name = strategy.as_str();
    let matrix_path = ctx.claim(&[format!("error_matrix_{name}.csv")])?.remove(0);
    let result = run_sequence(&ds, strategy, &c.sequence_config()?)?;
    std::fs::write(&matrix_path, result.matrix.to_csv())?;
    save_with_sidecar(ctx, &result.model, &format!("model_{name}.pncl"))?;
    Ok(json!({ "strategy": name, "stages": result.stages }))
}

fn sft(ctx: &mut Ctx) -> Result<Value> {
    let c = ctx.cfg;
    let ds = ctx.load_dataset(true)?;
    let model = load_model(&ctx.model_path())?;
    let pool = group_refs(&ds, &c.strategy.sft_groups, c.strategy.test_per_group, true)?;
    let cfg = c.cl_config(c.strategy.epochs);
    let scores = score_dataset(&model, &pool, cfg.score_kind, cfg.loss.boundary_mode, cfg.forcing)?;
    let n_sft = crate::continual::plan_count(c.strategy.sft_fraction, pool.len());
    let worst: Vec<(u32, usize)> = rank_worst(&scores)[..n_sft].iter().map(|s| (s.group_id, s.sample_index)).collect();
    let (d_sft, d_left): (Vec<SampleRef>, Vec<SampleRef>) = pool.iter().partition(|r| worst.contains(&r.key()));
    let paths = ctx.claim(&["sft_scores.csv".into()])?;
    write_score_dump(BufWriter::new(File::create(&paths[0])?), &scores)?;
    let mode = cfg.loss.boundary_mode;
    let before = (mean_errors(&evaluate(&model, &d_sft, mode)?).0, mean_errors(&evaluate(&model, &d_left, mode)?).0);
    let (tuned, report) = sft_train(&model, &d_sft, &d_left, &cfg)?;
    let after = (mean_errors(&evaluate(&tuned, &d_sft, mode)?).0, mean_errors(&evaluate(&tuned, &d_left, mode)?).0);
    save_with_sidecar(ctx, &tuned, "model_sft.pncl")?;
    Ok(json!({
        "sft_samples": worst,
        "sft_rel_l2_before": before.0, "sft_rel_l2_after": after.0,
        "left_rel_l2_before": before.1, "left_rel_l2_after": after.1,
        "train": report,
    }))
}

fn eval(ctx: &mut Ctx) -> Result<Value> {
    let c = ctx.cfg;
    let ds = ctx.load_dataset(true)?;
    let model = load_model(&ctx.model_path())?;
    let paths = ctx.claim(&["eval.csv".into(), "eval_scores.csv".into()])?;
    let tests = group_refs(&ds, &[], c.strategy.test_per_group, false)?;
    let errors = evaluate(&model, &tests, c.loss.boundary_mode)?;
    let mut w = BufWriter::new(File::create(&paths[0])?);
    writeln!(w, "group_id,sample_index,rel_L2,rel_H1")?;
    for e in &errors {
        writeln!(w, "{},{},{},{}", e.group_id, e.sample_index, e.rel_l2, e.rel_h1)?;
    }
    w.flush()?;
    let scores = score_dataset(&model, &tests, c.strategy.score_kind, c.loss.boundary_mode, c.dataset.forcing)?;
    write_score_dump(BufWriter::new(File::create(&paths[1])?), &scores)?;
    let per_group: Vec<Value> = ds
        .groups
        .iter()
        .map(|g| {
            let e: Vec<_> = errors.iter().filter(|e| e.group_id == g.group_id).copied().collect();
            let (l2, h1) = mean_errors(&e);
            json!({ "group_id": g.group_id, "rel_l2": l2, "rel_h1": h1 })
        })
        .collect();
    Ok(json!({ "model": ctx.model_path(), "groups": per_group }))
}

/// Summary of one `error_matrix_<strategy>.csv`.
fn summarize_matrix(text: &str) -> Result<Value> {
    let mut rows: Vec<(usize, u32, f64, f64, bool)> = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Malformed(format!("error matrix line {}", n + 1));
        if f.len() != 5 {
            return Err(bad());
        }
        rows.push((
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
            f[3].parse().map_err(|_| bad())?,
            f[4] == "1",
        ));
    }
    let mean = |v: Vec<f64>| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
    let last = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let id = mean(rows.iter().filter(|r| !r.4).map(|r| r.2).collect());
    let ood = mean(rows.iter().filter(|r| r.4).map(|r| r.2).collect());
    let final_row: Vec<Value> =
        rows.iter().filter(|r| r.0 == last).map(|r| json!({ "group": r.1, "rel_l2": r.2, "rel_h1": r.3 })).collect();
    let final_mean = mean(rows.iter().filter(|r| r.0 == last).map(|r| r.2).collect());
    Ok(
        json!({ "stages": last, "mean_id_rel_l2": id, "mean_ood_rel_l2": ood, "final_mean_rel_l2": final_mean, "final_row": final_row }),
    )
}

fn report(ctx: &mut Ctx) -> Result<Value> {
    let mut entries: Vec<(String, PathBuf)> = Vec::new();
    for e in std::fs::read_dir(&ctx.cfg.out)? {
        let p = e?.path();
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if let Some(s) = name.strip_prefix("error_matrix_").and_then(|s| s.strip_suffix(".csv")) {
            entries.push((s.to_string(), p));
        }
    }
    if entries.is_empty() {
        return Err(Error::Config(format!("no error matrices in `{}`; run continual first", ctx.cfg.out.display())));
    }
    entries.sort();
    let paths = ctx.claim(&["report.json".into()])?;
    let mut summary = serde_json::Map::new();
    for (strategy, p) in &entries {
        summary.insert(strategy.clone(), summarize_matrix(&std::fs::read_to_string(p)?)?);
    }
    let summary = Value::Object(summary);
    ctx.write_json(&paths[0], &summary)?;
    Ok(summary)
}

/// Runs one subcommand, writing its artifacts and a manifest under `cfg.out`.
/// On failure a `failure_<command>.json` record is left next to any partial output.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out)?;
    let start = Instant::now();
    let mut ctx = Ctx { cfg, opts, outputs: Vec::new() };
    let manifest_name = format!("manifest_{}.json", cmd.name().replace('-', "_"));
    let outcome = (|| {
        ctx.claim(std::slice::from_ref(&manifest_name))?;
        match cmd {
            Command::GenData => gen_data(&mut ctx),
            Command::SolveLabels => solve_labels(&mut ctx),
            Command::Train => train(&mut ctx),
            Command::Continual => continual(&mut ctx),
            Command::Sft => sft(&mut ctx),
            Command::Eval => eval(&mut ctx),
            Command::Report => report(&mut ctx),
        }
    })();
    let details = match outcome {
        Ok(v) => v,
        Err(e) => {
            let record = json!({ "command": cmd.name(), "error": e.to_string(), "partial_outputs": ctx.outputs });
            let _ = ctx.write_json(&cfg.out.join(format!("failure_{}.json", cmd.name().replace('-', "_"))), &record);
            return Err(e);
        }
    };
    let manifest = Manifest {
        command: cmd.name(),
        config: cfg,
        seeds: cfg.seeds(),
        generator: GENERATOR_NAME,
        dataset_format_version: DATASET_VERSION,
        checkpoint_format_version: CHECKPOINT_VERSION,
        wall_seconds: start.elapsed().as_secs_f64(),
        outputs: ctx.outputs.iter().map(|p| p.display().to_string()).collect(),
        details,
    };
    ctx.write_json(&cfg.out.join(&manifest_name), &manifest)?;
    Ok(ctx.outputs)
}
