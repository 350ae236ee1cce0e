use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use leadership::corpus::{load_corpus, save_corpus};
use leadership::eval::{
    chance_interval, composition_baseline, cross_dataset_eval, group_sizes, online_eval, single_feature_analysis,
    within_dataset_eval, write_json, write_online_csv, write_orientation_csv, write_result_csv,
};
use leadership::pipeline::{
    featurize, parse_featuresets, predict_corpus, train_on_corpus, FeatureConfig, FeatureSetId, PipelineConfig,
    SvmPolicy, T2Mode, TrainedModel, WindowPolicy,
};
use leadership::synth::{generate_corpus, SynthConfig};
use leadership::{Error, Result};

const OUT_DIR_ENV: &str = "LEADERSHIP_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "leadership-out";

#[derive(Parser, Debug)]
#[command(name = "leadership", version, about = "Emergent leader detection from nonverbal behaviour streams")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $LEADERSHIP_OUT_DIR, else ./leadership-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Extract feature samples from a corpus.
    Featurize(FeaturizeArgs),
    /// Train a model on a labelled source corpus.
    Train(TrainArgs),
    /// Predict the leader of every interaction of a target corpus.
    Predict(PredictArgs),
    /// Run the cross- or within-corpus protocol.
    Evaluate(EvaluateArgs),
    /// Accuracy over growing observation windows.
    OnlineEval(OnlineArgs),
    /// Post-hoc single-feature orientation analysis.
    FeatureAnalysis(AnalysisArgs),
}

#[derive(Args, Debug)]
struct FeatureArgs {
    /// Comma-separated featuresets: vfoa, pose, face, speech.
    #[arg(long)]
    featuresets: Option<String>,
    /// Analysed prefix of each target interaction, in minutes.
    #[arg(long)]
    minutes: Option<f64>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Number of interactions; tetrads unless --triads is given.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    triads: Option<usize>,
    #[arg(long)]
    tetrads: Option<usize>,
    #[arg(long)]
    effect: Option<f64>,
    /// Gaze label-flip probability.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    duration_minutes: Option<f64>,
    #[arg(long)]
    segment_minutes: Option<f64>,
    #[arg(long)]
    prefix: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Full,
    Segments,
}

#[derive(Args, Debug)]
struct FeaturizeArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    policy: PolicyArg,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    source: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    minutes: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Protocol {
    Cross,
    Within,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, value_enum)]
    protocol: Protocol,
    /// Source corpus manifest (cross protocol).
    #[arg(long)]
    source: Option<PathBuf>,
    /// Target corpus manifest; the only corpus for the within protocol.
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args, Debug)]
struct OnlineArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Comma-separated ascending minutes, e.g. 1,5,19.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    featuresets: Option<String>,
}

#[derive(Args, Debug)]
struct AnalysisArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "vfoa")]
    featureset: String,
    #[arg(long)]
    minutes: Option<f64>,
}

/// Optional TOML configuration.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    featuresets: Option<Vec<String>>,
    window_minutes: Option<f64>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    folds: Option<usize>,
    features: FeatureConfig,
    svm: SvmPolicy,
    synth: SynthConfig,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.features.validate()?;
        if config.svm.c_grid.is_empty() || config.svm.c_grid.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::Config("svm.c_grid must hold positive values".into()));
        }
        Ok(config)
    }
}

struct Run {
    config: RunConfig,
    out_dir: PathBuf,
    seed: u64,
}

impl Run {
    fn pipeline(&self, minutes: Option<f64>) -> Result<PipelineConfig> {
        let window_minutes = minutes
            .or(self.config.window_minutes)
            .unwrap_or(PipelineConfig::default().window_minutes);
        if !(window_minutes.is_finite() && window_minutes > 0.0) {
            return Err(Error::Argument(format!("minutes must be positive, got {window_minutes}")));
        }
        Ok(PipelineConfig {
            features: self.config.features.clone(),
            svm: self.config.svm.clone(),
            window_minutes,
        })
    }

    fn featuresets(&self, flag: Option<&str>) -> Result<Vec<FeatureSetId>> {
        match (flag, &self.config.featuresets) {
            (Some(list), _) => parse_featuresets(list),
            (None, Some(list)) => parse_featuresets(&list.join(",")),
            (None, None) => Ok(vec![FeatureSetId::Vfoa, FeatureSetId::Pose]),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn prepare(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|source| Error::Write {
            path: self.out_dir.clone(),
            source,
        })
    }

    fn record(&self, command: &str, details: serde_json::Value) -> Result<()> {
        write_json(
            self.path("run.json"),
            &json!({
                "tool": "leadership",
                "version": env!("CARGO_PKG_VERSION"),
                "command": command,
                "seed": self.seed,
                "config": self.config,
                "details": details,
            }),
        )
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    grid.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Argument(format!("invalid grid value '{s}'")))
        })
        .collect()
}

fn synth(run: &Run, args: &SynthArgs) -> Result<()> {
    let mut cfg = run.config.synth.clone();
    cfg.seed = run.seed;
    if let Some(n) = args.n {
        let triads = args.triads.unwrap_or(0);
        if triads > n {
            return Err(Error::Argument(format!("--triads {triads} exceeds --n {n}")));
        }
        cfg.triads = triads;
        cfg.tetrads = n - triads;
    } else {
        cfg.triads = args.triads.unwrap_or(cfg.triads);
        cfg.tetrads = args.tetrads.unwrap_or(cfg.tetrads);
    }
    cfg.effect_size = args.effect.unwrap_or(cfg.effect_size);
    cfg.gaze_noise = args.noise.unwrap_or(cfg.gaze_noise);
    cfg.fps = args.fps.unwrap_or(cfg.fps);
    cfg.duration_minutes = args.duration_minutes.unwrap_or(cfg.duration_minutes);
    if args.segment_minutes.is_some() {
        cfg.segment_minutes = args.segment_minutes;
    }
    if let Some(p) = &args.prefix {
        cfg.id_prefix = p.clone();
    }
    let corpus = generate_corpus(&cfg)?;
    run.prepare()?;
    let manifest = save_corpus(&run.out_dir, &corpus)?;
    run.record("synth", json!({ "synth": cfg }))?;
    println!("wrote {} interactions to {}", corpus.len(), manifest.display());
    Ok(())
}

fn featurize_cmd(run: &Run, args: &FeaturizeArgs) -> Result<()> {
    let corpus = load_corpus(&args.manifest)?;
    let featuresets = run.featuresets(args.features.featuresets.as_deref())?;
    let pipeline = run.pipeline(args.features.minutes)?;
    let policy = match args.policy {
        PolicyArg::Full => WindowPolicy::Full {
            minutes: pipeline.window_minutes,
        },
        PolicyArg::Segments => WindowPolicy::Segments,
    };
    let samples = featurize(&corpus, &featuresets, &policy, &pipeline.features, T2Mode::PerStream)?;
    run.prepare()?;
    write_json(run.path("samples.json"), &samples)?;
    run.record(
        "featurize",
        json!({ "manifest": args.manifest, "featuresets": featuresets, "policy": policy }),
    )?;
    println!("wrote {} samples", samples.len());
    Ok(())
}

fn train_cmd(run: &Run, args: &TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.source)?;
    let featuresets = run.featuresets(args.features.featuresets.as_deref())?;
    let pipeline = run.pipeline(args.features.minutes)?;
    let model = train_on_corpus(&corpus, &featuresets, &pipeline, run.seed)?;
    run.prepare()?;
    write_text(&run.path("model.json"), &model.to_json())?;
    run.record("train", json!({ "source": args.source, "featuresets": featuresets }))?;
    for m in &model.models {
        println!("{}: C = {}", m.featureset, m.c_selection.c);
    }
    Ok(())
}

fn predict_cmd(run: &Run, args: &PredictArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.model).map_err(|source| Error::Load {
        path: args.model.clone(),
        source,
    })?;
    let model = TrainedModel::from_json(&text)?;
    let target = load_corpus(&args.target)?;
    let minutes = args.minutes.unwrap_or(model.config.window_minutes);
    let reports = predict_corpus(&model, &target, minutes)?;
    run.prepare()?;
    let mut csv = String::from("interaction_id,participant,");
    csv += &model.featuresets().iter().map(|f| f.as_str()).collect::<Vec<_>>().join(",");
    csv += ",fused,leader\n";
    for r in &reports {
        for s in &r.scores {
            let probs: Vec<String> = s.probabilities.iter().map(f64::to_string).collect();
            csv += &format!(
                "{},{},{},{},{}\n",
                r.interaction_id,
                s.participant,
                probs.join(","),
                s.fused,
                u8::from(s.participant == r.leader)
            );
        }
        println!("{}: {}", r.interaction_id, r.leader);
    }
    write_text(&run.path("predictions.csv"), &csv)?;
    write_json(run.path("predictions.json"), &reports)?;
    run.record("predict", json!({ "model": args.model, "target": args.target, "minutes": minutes }))
}

fn evaluate_cmd(run: &Run, args: &EvaluateArgs) -> Result<()> {
    let featuresets = run.featuresets(args.features.featuresets.as_deref())?;
    let pipeline = run.pipeline(args.features.minutes)?;
    let target = load_corpus(&args.target)?;
    let result = match args.protocol {
        Protocol::Cross => {
            let source_path = args
                .source
                .as_ref()
                .ok_or_else(|| Error::Argument("the cross protocol needs --source".into()))?;
            let source = load_corpus(source_path)?;
            cross_dataset_eval(&source, &target, &featuresets, &pipeline, run.seed)?
        }
        Protocol::Within => {
            let folds = args.folds.or(run.config.folds).unwrap_or(5);
            within_dataset_eval(&target, &featuresets, folds, &pipeline, run.seed)?
        }
    };
    let sizes = group_sizes(&target);
    let baseline = composition_baseline(&sizes)?;
    let interval = chance_interval(&sizes, 0.95)?;
    run.prepare()?;
    write_result_csv(run.path("result.csv"), &result)?;
    write_json(
        run.path("result.json"),
        &json!({
            "result": result,
            "baseline": baseline,
            "chance_interval_95": [interval.0, interval.1],
        }),
    )?;
    run.record(
        "evaluate",
        json!({ "protocol": args.protocol, "source": args.source, "target": args.target }),
    )?;
    println!("accuracy: {:.4} (baseline {:.4})", result.accuracy, baseline);
    Ok(())
}

fn online_cmd(run: &Run, args: &OnlineArgs) -> Result<()> {
    let featuresets = run.featuresets(args.featuresets.as_deref())?;
    let pipeline = run.pipeline(None)?;
    let grid = parse_grid(&args.grid)?;
    let source = load_corpus(&args.source)?;
    let target = load_corpus(&args.target)?;
    let points = online_eval(&source, &target, &featuresets, &grid, &pipeline, run.seed)?;
    run.prepare()?;
    write_online_csv(run.path("online.csv"), &points)?;
    write_json(run.path("online.json"), &points)?;
    run.record(
        "online-eval",
        json!({ "source": args.source, "target": args.target, "grid": grid, "featuresets": featuresets }),
    )?;
    for p in &points {
        println!("{} min: {:.4}", p.minutes, p.accuracy);
    }
    Ok(())
}

fn analysis_cmd(run: &Run, args: &AnalysisArgs) -> Result<()> {
    let featureset: FeatureSetId = args.featureset.parse()?;
    let pipeline = run.pipeline(args.minutes)?;
    let corpus = load_corpus(&args.manifest)?;
    let rows = single_feature_analysis(&corpus, featureset, &pipeline)?;
    run.prepare()?;
    write_orientation_csv(run.path("orientation.csv"), &rows)?;
    run.record(
        "feature-analysis",
        json!({ "manifest": args.manifest, "featureset": featureset, "analysis": "post-hoc" }),
    )?;
    println!("post-hoc single-feature analysis ({featureset})");
    for r in &rows {
        println!("{}\t{:.4}\t{}", r.feature, r.accuracy, r.orientation.symbol());
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let config = RunConfig::load(cli.config.as_deref())?;
    let out_dir = cli
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let run = Run { config, out_dir, seed };
    match &cli.command {
        Command::Synth(a) => synth(&run, a),
        Command::Featurize(a) => featurize_cmd(&run, a),
        Command::Train(a) => train_cmd(&run, a),
        Command::Predict(a) => predict_cmd(&run, a),
        Command::Evaluate(a) => evaluate_cmd(&run, a),
        Command::OnlineEval(a) => online_cmd(&run, a),
        Command::FeatureAnalysis(a) => analysis_cmd(&run, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
