use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ctinfer::checkpoint::Checkpoint;
use ctinfer::config::{resolve_data_path, TrainConfig};
use ctinfer::graph_file::read_graph_file;
use ctinfer::harness::{self, Method, Prepared, SummaryRow};
use ctinfer::records::{read_records, write_records};
use ctinfer::reports;
use ctinfer_core::autodiff::{max_relative_error, numeric_gradient};
use ctinfer_core::corpus::{encode, generate_synthetic, SynthConfig};
use ctinfer_core::graph::graph_stats;
use ctinfer_core::loss::{LossConfig, Variant};
use ctinfer_core::model::{Model, ModelConfig};
use ctinfer_core::ConceptGraph;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ctinfer", version, about = "Joint concept and concept-transition inference for text queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labelled corpus for a graph.
    Generate(GenerateArgs),
    /// Train one variant on a 70/10/20 split.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Cross-validate one variant with pooled held-out predictions.
    Cv(TrainArgs),
    /// Train several methods on the same split and tabulate them.
    Compare(CompareArgs),
    /// Label frequencies and active-graph connectivity of a dataset.
    Analyze(AnalyzeArgs),
    /// Compare analytic and finite-difference gradients on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth tallies CSV; defaults to `<out>.tallies.csv`.
    #[arg(long)]
    tallies: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    queries: usize,
    #[arg(long, default_value_t = 300)]
    vocab: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    templates: Option<usize>,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Flat `key = value` config file, applied before any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    d_word: Option<usize>,
    #[arg(long)]
    d_pos: Option<usize>,
    #[arg(long)]
    d_hidden: Option<usize>,
    #[arg(long)]
    energy_weight: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
    /// Single worker thread; runs are bit-reproducible.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, value_delimiter = ',', default_value = "LR,CI,CTI,coCTI,coCTI-MTL")]
    methods: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Stats CSV (`kind,name,count`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "coCTI-MTL")]
    variant: String,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

impl TrainArgs {
    fn resolve(&self) -> anyhow::Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(path) = &self.config {
            cfg.merge_file(path)?;
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').with_context(|| format!("expected KEY=VALUE, got `{kv}`"))?;
            cfg.apply(k, v)?;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone().into();
                }
            )*};
        }
        set!(graph, data, out_dir, epochs, batch_size, lr, seed, patience, d_word, d_pos, d_hidden, energy_weight, folds);
        if let Some(v) = &self.variant {
            cfg.variant = v.parse()?;
        }
        cfg.deterministic |= self.deterministic;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_graph(path: &Path) -> anyhow::Result<ConceptGraph> {
    let parsed = read_graph_file(&resolve_data_path(path))?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    Ok(parsed.graph)
}

fn load_prepared(cfg: &TrainConfig) -> anyhow::Result<Prepared> {
    let graph = load_graph(cfg.graph.as_deref().context("no graph given (--graph or `graph =`)")?)?;
    let data = resolve_data_path(cfg.data.as_deref().context("no dataset given (--data or `data =`)")?);
    let records = read_records(&data)?;
    Ok(Prepared::new(graph, &records, cfg.min_count)?)
}

fn out_dir(cfg: &TrainConfig) -> anyhow::Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn configure_threads(cfg: &TrainConfig) {
    #[cfg(feature = "parallel")]
    if cfg.deterministic {
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cfg;
}

fn file_name(method: &str) -> String {
    method.to_ascii_lowercase().replace('-', "_")
}

#[derive(Serialize)]
struct Timing {
    wall_clock_secs: f64,
}

fn generate(a: &GenerateArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let mut cfg = SynthConfig::new(a.queries, a.vocab, a.seed);
    if let Some(n) = a.noise {
        cfg.noise_rate = n;
    }
    if let Some(t) = a.templates {
        cfg.templates_per_transition = t;
    }
    let corpus = generate_synthetic(&graph, &cfg)?;
    write_records(&a.out, &corpus.queries)?;
    let tallies = a.tallies.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".tallies.csv");
        p.into()
    });
    reports::write_tallies_csv(&tallies, &corpus.tallies, &graph, corpus.queries.len())?;
    println!("wrote {} queries to {} and tallies to {}", corpus.queries.len(), a.out.display(), tallies.display());
    Ok(())
}

fn train(a: &TrainArgs) -> anyhow::Result<()> {
    let cfg = a.resolve()?;
    configure_threads(&cfg);
    let data = load_prepared(&cfg)?;
    let dir = out_dir(&cfg)?;
    let out = harness::train(&cfg, &data)?;
    out.checkpoint.save(&dir.join("checkpoint.json"))?;
    reports::write_json(&dir.join("report.json"), &out.report)?;
    reports::write_json(&dir.join("timing.json"), &Timing { wall_clock_secs: out.report.wall_clock_secs })?;
    reports::write_predictions_jsonl(&dir.join("predictions.jsonl"), &out.test_ids, &out.test_predictions)?;
    reports::write_roc_csv(&dir.join(format!("roc_{}.csv", file_name(&out.report.method))), &out.evaluation.roc)?;
    reports::write_summary_csv(&dir.join("summary.csv"), &[SummaryRow::from_report(&out.report)])?;
    let t = &out.report.test.transitions;
    println!(
        "{}: best epoch {}, test micro-AUC {:.4}, macro-AUC {:.4}, coverage {:.3}, LRAP {:.4}",
        out.report.method, out.report.best_epoch, t.micro_auc, t.macro_auc, t.coverage_error, t.lrap
    );
    Ok(())
}

fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let checkpoint = Checkpoint::load(&a.checkpoint)?;
    let vocab = checkpoint.vocabulary();
    let records = read_records(&resolve_data_path(&a.data))?;
    let queries = records.iter().map(|r| encode(r, &vocab, &graph)).collect::<Result<Vec<_>, _>>()?;
    let (predictions, evaluation) = harness::evaluate(&checkpoint, &vocab, &queries, &graph)?;
    fs::create_dir_all(&a.out_dir)?;
    reports::write_json(&a.out_dir.join("eval.json"), &evaluation.summary)?;
    let ids: Vec<usize> = (0..queries.len()).collect();
    reports::write_predictions_jsonl(&a.out_dir.join("predictions.jsonl"), &ids, &predictions)?;
    reports::write_roc_csv(&a.out_dir.join("roc.csv"), &evaluation.roc)?;
    let t = &evaluation.summary.transitions;
    println!("{} queries: micro-AUC {:.4}, macro-AUC {:.4}", queries.len(), t.micro_auc, t.macro_auc);
    Ok(())
}

fn cv(a: &TrainArgs) -> anyhow::Result<()> {
    let cfg = a.resolve()?;
    configure_threads(&cfg);
    let data = load_prepared(&cfg)?;
    let dir = out_dir(&cfg)?;
    let out = harness::cross_validate(&cfg, &data)?;
    reports::write_json(&dir.join("cv_report.json"), &out.report)?;
    reports::write_predictions_jsonl(&dir.join("pooled_predictions.jsonl"), &out.pooled_ids, &out.pooled_predictions)?;
    reports::write_roc_csv(&dir.join(format!("roc_{}.csv", file_name(&out.report.method))), &out.evaluation.roc)?;
    println!("{}-fold pooled micro-AUC {:.4}", cfg.folds, out.report.pooled.transitions.micro_auc);
    Ok(())
}

fn compare(a: &CompareArgs) -> anyhow::Result<()> {
    let cfg = a.train.resolve()?;
    configure_threads(&cfg);
    let methods = a.methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>()?;
    let data = load_prepared(&cfg)?;
    let dir = out_dir(&cfg)?;
    let comparison = harness::compare_variants(&cfg, &data, &methods)?;
    let summary = comparison.summary();
    reports::write_summary_csv(&dir.join("summary.csv"), &summary)?;
    reports::write_per_label_csv(&dir.join("per_label_auc.csv"), &comparison)?;
    for run in &comparison.runs {
        reports::write_roc_csv(&dir.join(format!("roc_{}.csv", file_name(&run.report.method))), &run.roc)?;
    }
    let all: Vec<_> = comparison.runs.iter().map(|r| &r.report).collect();
    reports::write_json(&dir.join("reports.json"), &all)?;
    for row in summary {
        println!("{:<10} micro-AUC {:.4}  macro-AUC {:.4}", row.method, row.micro_auc, row.macro_auc);
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let graph = load_graph(&a.graph)?;
    let records = read_records(&resolve_data_path(&a.data))?;
    let data = Prepared::new(graph, &records, 1)?;
    let stats = graph_stats(&data.queries, &data.graph)?;
    if let Some(out) = &a.out {
        reports::write_stats_csv(out, &stats, &data.graph, a.top)?;
    }
    println!("{} queries, {:.2}% with a connected active graph", stats.queries, 100.0 * stats.connected_fraction());
    for (c, n) in data.graph.concepts().iter().zip(&stats.concept_counts) {
        println!("concept     {:<24} {n}", c.name);
    }
    for (t, n) in data.graph.transitions().iter().zip(&stats.transition_counts) {
        println!("transition  {:<24} {n}", data.graph.transition_name(t.id));
    }
    for (shape, n) in stats.top_shapes(a.top) {
        println!("shape       {:<24} {n}", shape.describe(&data.graph));
    }
    Ok(())
}

fn gradcheck(a: &GradcheckArgs) -> anyhow::Result<bool> {
    let variant: Variant = a.variant.parse()?;
    let graph = ConceptGraph::new(&["a", "b", "c"], &[(0, 1), (1, 2), (2, 0)])?;
    let model = Model::new(ModelConfig::new(20, 8, 3, 3).with_dims(6, 4, 6), a.seed)?;
    let query = ctinfer_core::corpus::EncodedQuery {
        word_ids: vec![3, 17, 5, 9, 1],
        pos_ids: vec![1, 7, 2, 2, 4],
        concept_labels: vec![1.0, 1.0, 0.0],
        transition_labels: vec![1.0, 0.0, 0.0],
    };
    let loss_cfg = LossConfig::new(variant);
    let (_, grads) = model.loss_and_gradient(&query, &loss_cfg, graph.transfer())?;
    let mut worst: f64 = 0.0;
    for slot in 0..model.params().len() {
        let numeric = numeric_gradient(model.params().get(slot), 1e-5, |t| {
            let mut m = model.clone();
            *m.params_mut().get_mut(slot) = t.clone();
            m.loss(&query, &loss_cfg, graph.transfer())
        })?;
        let err = max_relative_error(grads.get(slot), &numeric);
        worst = worst.max(err);
        println!("{:<12} {err:.3e}", model.params().names()[slot]);
    }
    let ok = worst < a.tolerance;
    println!("max relative error {worst:.3e} ({})", if ok { "ok" } else { "FAILED" });
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Cv(a) => cv(a),
        Command::Compare(a) => compare(a),
        Command::Analyze(a) => analyze(a),
        Command::Gradcheck(a) => gradcheck(a).and_then(|ok| if ok { Ok(()) } else { bail!("gradient check failed") }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
