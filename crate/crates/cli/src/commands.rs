use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use droidops::classifiers::{load_model, save_model, Trainer};
use droidops::corpus::{build_histogram_set, BuildOptions, FailurePolicy, HISTOGRAMS_FILE};
use droidops::evaluation::{
    cross_validate, feature_sweep, generate_synthetic_corpus, holdout, write_folds_csv,
    write_holdout_csv, write_sweep_csv, Grid, RankingConfig, SweepConfig,
};
use droidops::extraction::extract_path;
use droidops::selection::{
    compute_class_means, project, project_set, rank_features, read_ranking_csv, write_ranking_csv,
};
use droidops::{CorpusManifest, InstructionFormatTable, Label, LabeledHistogramSet};

use crate::config::{HyperArgs, RunConfig, Settings, DEFAULT_K, DEFAULT_TEST_FRACTION};

pub const EXIT_MALWARE: u8 = 10;

/// Name of the run-configuration sidecar written next to the cache files.
pub const RUN_CONFIG_FILE: &str = "run_config.toml";

/// `--cache` may name the cache directory or the histogram CSV itself.
fn histograms_path(cache: &Path) -> PathBuf {
    if cache.is_dir() {
        cache.join(HISTOGRAMS_FILE)
    } else {
        cache.to_path_buf()
    }
}

fn load_set(cache: &Path) -> Result<LabeledHistogramSet> {
    let path = histograms_path(cache);
    LabeledHistogramSet::load(&path).with_context(|| format!("loading {}", path.display()))
}

/// Creates `path` and writes the run config as leading `#` lines.
fn create_with_header(path: &Path, run: &RunConfig) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    w.write_all(run.as_comment().as_bytes())?;
    Ok(w)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |r| format!("{:.4}", r))
}

pub fn extract(
    settings: &Settings,
    manifest: &Path,
    cache: &Path,
    skip_failures: bool,
) -> Result<ExitCode> {
    let manifest_data = CorpusManifest::load(manifest)?;
    let options = BuildOptions {
        policy: if skip_failures {
            FailurePolicy::Skip
        } else {
            FailurePolicy::Abort
        },
        table: InstructionFormatTable::shared(),
    };
    let (set, report) = build_histogram_set(&manifest_data, cache, options)?;

    let run = RunConfig::new("extract", settings)
        .input(manifest)
        .output(cache);
    fs::write(cache.join(RUN_CONFIG_FILE), run.to_toml())?;

    println!(
        "{} extracted, {} cached, {} skipped ({} benign, {} malware)",
        report.extracted,
        report.cached,
        report.skipped.len(),
        set.count(Label::Benign),
        set.count(Label::Malware)
    );
    let d = &report.diagnostics;
    if report.extracted > 0 {
        println!(
            "  methods {}, payload tables {}, unknown opcodes {}, unmatched smali tokens {}",
            d.methods,
            d.payloads,
            d.unknown_opcodes.values().sum::<u64>(),
            d.unmatched_tokens.values().sum::<u64>()
        );
    }
    for s in &report.skipped {
        println!("  skipped {}: {}", s.app_id, s.error);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn rank(settings: &Settings, cache: &Path, n: Option<usize>, out: &Path) -> Result<ExitCode> {
    let set = load_set(cache)?;
    let n = settings.n_features(n);
    let profile = compute_class_means(&set, settings.mode)?;
    let ranking = rank_features(&profile, n)?;
    if ranking.len() < n {
        log::warn!(
            "only {} opcodes exist; writing {} rows instead of {n}",
            ranking.len(),
            ranking.len()
        );
    }

    let mut run = RunConfig::new("rank", settings).input(cache).output(out);
    run.n_features = Some(n);
    let mut w = create_with_header(out, &run)?;
    write_ranking_csv(&mut w, &ranking, &profile, InstructionFormatTable::shared())?;
    w.flush()?;
    println!(
        "wrote {} ranked opcodes ({} mode) to {}",
        ranking.len(),
        ranking.mode,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub struct TrainArgs<'a> {
    pub cache: &'a Path,
    pub ranking: Option<&'a Path>,
    pub n: Option<usize>,
    pub classifier: Option<&'a str>,
    pub hyper: &'a HyperArgs,
    pub model: &'a Path,
}

pub fn train(settings: &Settings, args: TrainArgs<'_>) -> Result<ExitCode> {
    let kind = settings.kind(args.classifier)?;
    let set = load_set(args.cache)?;
    let mut run = RunConfig::new("train", settings).input(args.cache);

    let ranking = match args.ranking {
        Some(path) => {
            run = run.input(path);
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let ranking = read_ranking_csv(BufReader::new(file))?;
            let ranking = match args.n {
                Some(n) => ranking.top(n),
                None => ranking,
            };
            if ranking.mode != settings.mode {
                log::warn!("using the ranking file's {} mode", ranking.mode);
            }
            ranking
        }
        None => {
            let n = settings.n_features(args.n);
            rank_features(&compute_class_means(&set, settings.mode)?, n)?
        }
    };
    run.n_features = Some(ranking.len());

    let config = settings.classifier(kind, args.hyper);
    run.classifier = Some(config.clone());
    run = run.output(args.model);

    let data = project_set(&set, &ranking, None)?;
    let mut model = config.train(&data)?.with_selection(ranking);
    model.run_config = Some(run.to_toml());
    save_model(&model, args.model)?;

    println!(
        "trained {} on {} apps x {} features: {} tree(s), {} leaves -> {}",
        model.kind,
        data.len(),
        model.n_features(),
        model.trees.len(),
        model.leaf_count(),
        args.model.display()
    );
    Ok(ExitCode::SUCCESS)
}

pub struct EvaluateArgs<'a> {
    pub cache: &'a Path,
    pub classifier: Option<&'a str>,
    pub n: Option<usize>,
    pub hyper: &'a HyperArgs,
    pub kfold: Option<usize>,
    pub holdout: Option<f64>,
    pub stratified: bool,
    pub out: &'a Path,
}

pub fn evaluate(settings: &Settings, args: EvaluateArgs<'_>) -> Result<ExitCode> {
    let set = load_set(args.cache)?;
    let kind = settings.kind(args.classifier)?;
    let classifier = settings.classifier(kind, args.hyper);
    let ranking = RankingConfig {
        n_features: settings.n_features(args.n),
        mode: settings.mode,
        paper_faithful: settings.paper_faithful,
    };

    let mut run = RunConfig::new("evaluate", settings)
        .input(args.cache)
        .output(args.out);
    run.n_features = Some(ranking.n_features);
    run.classifier = Some(classifier.clone());

    if let Some(f) = args.holdout {
        run.test_fraction = Some(f);
        run.stratified = Some(args.stratified);
        let result = holdout(
            &set,
            &classifier,
            &ranking,
            f,
            settings.seed,
            args.stratified,
        )?;
        let mut w = create_with_header(args.out, &run)?;
        write_holdout_csv(&mut w, &result)?;
        w.flush()?;
        println!(
            "{kind} held-out ({} train / {} test, n={})",
            result.split.train.len(),
            result.split.test.len(),
            ranking.n_features
        );
        println!("  {}", result.confusion);
        let m = &result.metrics;
        println!(
            "  accuracy {:.2}%  TPR {}  TNR {}  FPR {}  FNR {}",
            m.accuracy_pct,
            pct(m.tpr),
            pct(m.tnr),
            pct(m.fpr),
            pct(m.fnr)
        );
    } else {
        let k = args.kfold.or(settings.file.k).unwrap_or(DEFAULT_K);
        run.k = Some(k);
        let cv = cross_validate(&set, &classifier, &ranking, k, settings.seed)?;
        let mut w = create_with_header(args.out, &run)?;
        write_folds_csv(&mut w, &cv)?;
        w.flush()?;
        println!(
            "{kind} {k}-fold cross-validation (n={})",
            ranking.n_features
        );
        println!("  fold  n_test  accuracy%");
        for f in &cv.folds {
            println!(
                "  {:>4}  {:>6}  {:>9.2}",
                f.fold, f.n_test, f.metrics.accuracy_pct
            );
        }
        let m = &cv.metrics;
        println!("  aggregate {}", cv.confusion);
        println!(
            "  accuracy {:.2}%  TPR {}  TNR {}  FPR {}  FNR {}",
            m.accuracy_pct,
            pct(m.tpr),
            pct(m.tnr),
            pct(m.fpr),
            pct(m.fnr)
        );
    }
    Ok(ExitCode::SUCCESS)
}

pub struct SweepArgs<'a> {
    pub cache: &'a Path,
    pub classifiers: Option<&'a str>,
    pub hyper: &'a HyperArgs,
    pub grid: (Option<usize>, Option<usize>, Option<usize>),
    pub test_fraction: Option<f64>,
    pub stratified: bool,
    pub timing: bool,
    pub out: &'a Path,
}

pub fn sweep(settings: &Settings, args: SweepArgs<'_>) -> Result<ExitCode> {
    let set = load_set(args.cache)?;
    let kinds = settings.kinds(args.classifiers)?;
    let base = settings.file.grid.unwrap_or_default();
    let grid = Grid::new(
        args.grid.0.unwrap_or(base.start),
        args.grid.1.unwrap_or(base.stop),
        args.grid.2.unwrap_or(base.step),
    )?;
    let timing = args.timing || settings.file.timing.unwrap_or(false);
    let config = SweepConfig {
        classifiers: kinds
            .iter()
            .map(|&k| settings.classifier(k, args.hyper))
            .collect(),
        grid,
        test_fraction: args
            .test_fraction
            .or(settings.file.test_fraction)
            .unwrap_or(DEFAULT_TEST_FRACTION),
        seed: settings.seed,
        mode: settings.mode,
        paper_faithful: settings.paper_faithful,
        stratified: args.stratified,
    };

    let mut run = RunConfig::new("sweep", settings)
        .input(args.cache)
        .output(args.out);
    run.grid = Some(grid);
    run.test_fraction = Some(config.test_fraction);
    run.stratified = Some(args.stratified);
    run.timing = Some(timing);
    run.classifiers = config.classifiers.clone();

    let report = feature_sweep(&set, &config)?;
    let mut w = create_with_header(args.out, &run)?;
    write_sweep_csv(&mut w, &report, timing)?;
    w.flush()?;

    let summary = report.summary();
    println!(
        "sweep: {} cells ({} failed), n = {}..={} step {}, {} train / {} test",
        report.rows.len(),
        report.failed(),
        grid.start,
        grid.stop,
        grid.step,
        report.split.train.len(),
        report.split.test.len()
    );
    println!("  classifier  best_acc%  best_n  mean_acc%  std_acc%");
    for s in &summary.per_classifier {
        println!(
            "  {:<10}  {:>9.2}  {:>6}  {:>9.2}  {:>8.3}",
            s.classifier.to_string(),
            s.best_accuracy_pct,
            s.best_n,
            s.mean_accuracy_pct,
            s.std_accuracy_pct
        );
    }
    if let Some(k) = summary.least_fluctuation {
        println!("  least fluctuation across n: {k}");
    }
    if report.failed() == report.rows.len() {
        bail!("every sweep cell failed");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn scan(app: &Path, model_path: &Path) -> Result<ExitCode> {
    let model = load_model(model_path)?;
    let Some(selection) = &model.selection else {
        bail!(
            "{} records no feature ranking; retrain it with `droidops train`",
            model_path.display()
        );
    };
    let app_id = app
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| app.display().to_string());
    let extraction = extract_path(app, &app_id, InstructionFormatTable::shared())?;
    let x = project(&extraction.histogram, &selection.ranking);
    let p = model.predict(&x)?;
    println!("{app_id}\t{}\t{:.6}", p.label, p.score);
    Ok(match p.label {
        Label::Malware => ExitCode::from(EXIT_MALWARE),
        Label::Benign => ExitCode::SUCCESS,
    })
}

pub fn synth(
    settings: &Settings,
    benign: usize,
    malware: usize,
    separation: f64,
    out: &Path,
) -> Result<ExitCode> {
    let corpus = generate_synthetic_corpus(benign, malware, separation, settings.seed)?;
    let mut run = RunConfig::new("synth", settings).output(out);
    run.inputs.push(format!(
        "synthetic benign={benign} malware={malware} separation={separation}"
    ));

    let mut w = create_with_header(out, &run)?;
    writeln!(
        w,
        "# planted malware opcodes: {}",
        corpus
            .malware_planted
            .iter()
            .map(|o| format!("0x{o:02x}"))
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    writeln!(
        w,
        "# planted benign opcodes: {}",
        corpus
            .benign_planted
            .iter()
            .map(|o| format!("0x{o:02x}"))
            .collect::<Vec<_>>()
            .join(" ")
    )?;
    corpus.set.write_csv(&mut w)?;
    w.flush()?;
    println!(
        "wrote {benign} benign + {malware} malware synthetic apps to {}",
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}
