use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use bbt_core::bench::{
    evaluate_pe, fit_algorithm, format_table, run_sweep, write_log_csv, write_summary_csv, AlgoParams, Algorithm,
    SweepConfig, TrainedModel,
};
use bbt_core::data::{
    generate_synthetic, load_csv, load_feature_rows, to_early_prediction, write_csv, Class, FeatureSchema,
    FeatureValue, SyntheticConfig,
};
use bbt_core::persist::ModelFile;
use bbt_core::sampling::{qsample, QSpec};
use bbt_core::{Dataset, Error, Result};

use crate::config::Settings;
use crate::{
    known_keys, Cli, Command, ConvertArgs, EvaluateArgs, GenerateArgs, ModelArgs, PredictArgs, StudyArgs, SweepArgs,
    TrainArgs,
};

struct Ctx {
    settings: Settings,
    seed: u64,
    out: Option<PathBuf>,
}

impl Ctx {
    fn out_path(&self, command: &str) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::usage(format!("`{command}` needs --out")))
    }

    fn required(&self, flag: Option<PathBuf>, key: &str, command: &str) -> Result<PathBuf> {
        self.settings
            .pick(flag, key)?
            .ok_or_else(|| Error::usage(format!("`{command}` needs --{key}")))
    }
}

/// Runs a parsed command line. Reports go to `out`; heavy work runs on a
/// dedicated pool of `--jobs` threads.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    settings.check_known(&known_keys())?;
    let seed = settings.pick_or(cli.seed, "seed", 0u64)?;
    let jobs: Option<usize> = settings.pick(cli.jobs, "jobs")?;
    if jobs == Some(0) {
        return Err(Error::usage("--jobs must be at least 1"));
    }
    let out_path = settings.pick(cli.out, "out")?;
    let ctx = Ctx {
        settings,
        seed,
        out: out_path,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::usage(format!("cannot start {} worker threads: {e}", jobs.unwrap_or(0))))?;

    let (report, result) = pool.install(|| {
        let mut buf = Vec::new();
        // Keep stdout a clean CSV when predictions are streamed there.
        if matches!(cli.command, Command::Predict(_)) && ctx.out.is_none() {
            eprintln!("seed: {seed}");
        } else {
            let _ = writeln!(buf, "seed: {seed}");
        }
        let result = match cli.command {
            Command::Generate(a) => generate(&ctx, a, &mut buf),
            Command::Convert(a) => convert(&ctx, a, &mut buf),
            Command::Train(a) => train(&ctx, a, &mut buf),
            Command::Predict(a) => predict(&ctx, a, &mut buf),
            Command::Evaluate(a) => evaluate(&ctx, a, &mut buf),
            Command::Sweep(a) => sweep(&ctx, a, &mut buf),
        };
        (buf, result)
    });
    out.write_all(&report)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))?;
    result
}

/// Where the schema of a data CSV is stored: `<csv>.schema.json`.
pub fn schema_sidecar(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".schema.json");
    PathBuf::from(name)
}

fn write_schema(schema: &FeatureSchema, csv: &Path) -> Result<()> {
    let path = schema_sidecar(csv);
    let mut text = serde_json::to_string_pretty(schema)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

fn read_schema(ctx: &Ctx, flag: Option<PathBuf>, csv: &Path) -> Result<FeatureSchema> {
    let path = ctx
        .settings
        .pick(flag, "schema")?
        .unwrap_or_else(|| schema_sidecar(csv));
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn study_config(s: &Settings, a: StudyArgs, base: SyntheticConfig) -> Result<SyntheticConfig> {
    Ok(SyntheticConfig {
        n_days: s.pick_or(a.days, "days", base.n_days)?,
        mean_obs_per_day: s.pick_or(a.obs_per_day, "obs-per-day", base.mean_obs_per_day)?,
        subject_effect_sd: s.pick_or(a.subject_effect_sd, "subject-effect-sd", base.subject_effect_sd)?,
        noise_sd: s.pick_or(a.noise_sd, "noise-sd", base.noise_sd)?,
        n_numeric: s.pick_or(a.numeric, "numeric", base.n_numeric)?,
        n_categorical: s.pick_or(a.categorical, "categorical", base.n_categorical)?,
        categorical_arity: s.pick_or(a.arity, "arity", base.categorical_arity)?,
        within_day_correlation: s.pick_or(
            a.within_day_correlation,
            "within-day-correlation",
            base.within_day_correlation,
        )?,
        ..base
    })
}

/// `depth_of` selects whose trees `--depth` applies to; `None` means the
/// boosted base learners only.
fn model_params(s: &Settings, a: ModelArgs, depth_of: Option<Algorithm>) -> Result<AlgoParams<f64>> {
    let mut p = AlgoParams::<f64>::default();
    p.bags = s.pick_or(a.bags, "bags", p.bags)?;
    p.boost.n_rounds = s.pick_or(a.rounds, "rounds", p.boost.n_rounds)?;
    p.boost.shrinkage = s.pick_or(a.shrinkage, "shrinkage", p.boost.shrinkage)?;
    p.boost.subsample_fraction = s.pick_or(a.subsample, "subsample", p.boost.subsample_fraction)?;
    if let Some(n) = s.pick(a.trees, "trees")? {
        p.bagging_trees = n;
        p.rf_trees = n;
    }
    p.rf_mtry = s.pick(a.mtry, "mtry")?;
    if let Some(d) = s.pick(a.depth, "depth")? {
        let tree = match depth_of {
            Some(Algorithm::Sct) => &mut p.sct,
            Some(Algorithm::Bagging) => &mut p.bagging_tree,
            Some(Algorithm::RandomForest) => &mut p.rf_tree,
            _ => &mut p.boost.tree,
        };
        tree.max_depth = d;
    }
    Ok(p)
}

fn check_q(q: f64) -> Result<f64> {
    if q > 0.0 && q < 1.0 {
        Ok(q)
    } else {
        Err(Error::usage(format!("--q must lie in (0, 1), got {q}")))
    }
}

fn generate(ctx: &Ctx, a: GenerateArgs, out: &mut Vec<u8>) -> Result<()> {
    let base = SyntheticConfig::default();
    let cfg = SyntheticConfig {
        n_subjects: ctx.settings.pick_or(a.subjects, "subjects", base.n_subjects)?,
        ..study_config(&ctx.settings, a.study, base)?
    };
    cfg.validate()?;
    let path = ctx.out_path("generate")?;
    let ds: Dataset = generate_synthetic(&cfg, ctx.seed)?;
    write_csv(&ds, path)?;
    write_schema(ds.schema(), path)?;
    let _ = writeln!(
        out,
        "wrote {} records for {} subjects to {}",
        ds.len(),
        ds.n_subjects(),
        path.display()
    );
    Ok(())
}

fn convert(ctx: &Ctx, a: ConvertArgs, out: &mut Vec<u8>) -> Result<()> {
    let input = ctx.required(a.input, "input", "convert")?;
    let schema = read_schema(ctx, a.schema, &input)?;
    let path = ctx.out_path("convert")?;
    let ds: Dataset = load_csv(&input, &schema)?;
    let converted = to_early_prediction(&ds);
    write_csv(&converted, path)?;
    write_schema(&schema, path)?;
    let _ = writeln!(
        out,
        "kept {} of {} records (each now labelled by its same-day successor) in {}",
        converted.len(),
        ds.len(),
        path.display()
    );
    Ok(())
}

fn train(ctx: &Ctx, a: TrainArgs, out: &mut Vec<u8>) -> Result<()> {
    let s = &ctx.settings;
    let input = ctx.required(a.input, "input", "train")?;
    let schema = read_schema(ctx, a.schema, &input)?;
    let path = ctx.out_path("train")?.to_owned();
    let algorithm: Algorithm = s.pick_or(a.algo, "algo", "bbt".to_owned())?.parse()?;
    let params = model_params(s, a.model, Some(algorithm))?;

    let mut ds: Dataset = load_csv(&input, &schema)?;
    if s.switch(a.early_prediction, "early-prediction")? {
        ds = to_early_prediction(&ds);
        let _ = writeln!(out, "early prediction: {} records", ds.len());
    }
    if let Some(q) = s.pick(a.q, "q")? {
        let mut spec = QSpec::new(check_q(q)?);
        spec.jitter_sd = s.pick(a.jitter_sd, "jitter-sd")?;
        spec.max_replication = s.pick_or(a.max_replication, "max-replication", spec.max_replication)?;
        let sampled = qsample(&ds, &spec, ctx.seed)?;
        let r = sampled.replication;
        let _ = writeln!(
            out,
            "q-sampling: positives x{}, negatives x{}, {} records",
            r.positive,
            r.negative,
            sampled.dataset.len()
        );
        if !r.exact {
            let _ = writeln!(out, "effective q: {} (requested {q})", r.effective_q);
        }
        ds = sampled.dataset;
    }

    let model = fit_algorithm(algorithm, &ds, &params, ctx.seed)?;
    let _ = writeln!(out, "algorithm: {}", algorithm.label());
    if let TrainedModel::Bbt(m) = &model {
        m.check()?;
        let _ = writeln!(out, "m*: {} of {} rounds", m.m_star, params.boost.n_rounds);
        let _ = writeln!(
            out,
            "estimated PE (out-of-bag, {} records): {}",
            m.pe_curve.n_oob,
            m.estimate_pe()
        );
    }
    ModelFile::new(schema, ctx.seed, model).save(&path)?;
    let _ = writeln!(out, "saved model to {}", path.display());
    Ok(())
}

fn labeller(model: &TrainedModel<f64>, q: Option<f64>) -> impl Fn(&[FeatureValue<f64>]) -> Class + '_ {
    move |x| match q {
        Some(q) => model.predict_at(x, q),
        None => model.predict(x),
    }
}

fn predict(ctx: &Ctx, a: PredictArgs, out: &mut Vec<u8>) -> Result<()> {
    let s = &ctx.settings;
    let file = ModelFile::<f64>::load(ctx.required(a.model, "model", "predict")?)?;
    let input = ctx.required(a.input, "input", "predict")?;
    let q = s.pick(a.q, "q")?.map(check_q).transpose()?;
    let rows = load_feature_rows::<f64>(&input, &file.schema)?;
    let label = labeller(&file.model, q);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["subject", "day", "seq", "p", "label"])?;
    for r in &rows {
        let p = file.model.probability(&r.features);
        w.write_record([
            r.subject.0.clone(),
            r.day.to_string(),
            r.seq.to_string(),
            p.to_string(),
            label(&r.features).to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::usage(format!("writing predictions: {e}")))?;
    match &ctx.out {
        Some(path) => {
            fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
            let _ = writeln!(out, "wrote {} predictions to {}", rows.len(), path.display());
        }
        None => out.extend_from_slice(&bytes),
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs, out: &mut Vec<u8>) -> Result<()> {
    let s = &ctx.settings;
    let file = ModelFile::<f64>::load(ctx.required(a.model, "model", "evaluate")?)?;
    let input = ctx.required(a.input, "input", "evaluate")?;
    let q = s.pick(a.q, "q")?.map(check_q).transpose()?;
    let mut ds: Dataset = load_csv(&input, &file.schema)?;
    if s.switch(a.early_prediction, "early-prediction")? {
        ds = to_early_prediction(&ds);
    }
    let pe = evaluate_pe(labeller(&file.model, q), &ds)?;
    let _ = writeln!(out, "algorithm: {}", file.model.algorithm().label());
    let _ = writeln!(out, "records: {}", ds.len());
    let _ = writeln!(out, "prediction error: {pe}");
    Ok(())
}

fn sweep(ctx: &Ctx, a: SweepArgs, out: &mut Vec<u8>) -> Result<()> {
    let s = &ctx.settings;
    let gen = study_config(s, a.study, SyntheticConfig::default())?;
    let defaults = SweepConfig::<f64>::default();
    let algorithms = match s.pick_list(a.algos, "algos")? {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<Algorithm>>>()?,
        None => defaults.algorithms.clone(),
    };
    let cfg = SweepConfig {
        subject_counts: s
            .pick_list(a.subject_counts, "subject-counts")?
            .unwrap_or(defaults.subject_counts),
        repetitions: s.pick_or(a.reps, "reps", defaults.repetitions)?,
        algorithms,
        test_fraction: s.pick_or(a.test_fraction, "test-fraction", defaults.test_fraction)?,
        seed: ctx.seed,
        early_prediction: !s.switch(a.no_early_prediction, "no-early-prediction")?,
        params: model_params(s, a.model, None)?,
    };
    let result = run_sweep(&gen, &cfg)?;
    let table = format_table(&result);
    let _ = write!(out, "{table}");
    if let Some(dir) = &ctx.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_log_csv(&result, dir.join("pe_log.csv"))?;
        write_summary_csv(&result, dir.join("summary.csv"))?;
        let path = dir.join("table.txt");
        fs::write(&path, &table).map_err(|e| Error::io(path, e))?;
        let _ = writeln!(out, "wrote pe_log.csv, summary.csv and table.txt to {}", dir.display());
    }
    Ok(())
}
