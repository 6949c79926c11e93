//! Training, evaluation, cross-validation and variant comparison.

use std::time::Instant;

use ctinfer_core::baseline::LogisticBaseline;
use ctinfer_core::corpus::{encode, fold_assignment, shuffled_indices, split_sizes, EncodedQuery, RawQuery, Vocabulary};
use ctinfer_core::loss::{energy_count, LossConfig, Variant};
use ctinfer_core::metrics::{roc_and_auc, summarize, EvalBatch, RocCurve};
use ctinfer_core::model::{Model, Prediction};
use ctinfer_core::optim::{clip_global_norm, AdamState};
use ctinfer_core::params::ParamStore;
use ctinfer_core::{ConceptGraph, TransferMatrix};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::Checkpoint;
use crate::config::TrainConfig;
use crate::error::{Error, Result};

/// A graph, a vocabulary and the corpus encoded against both.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: ConceptGraph,
    pub vocab: Vocabulary,
    pub queries: Vec<EncodedQuery>,
}

impl Prepared {
    /// Builds the vocabulary from `records` and encodes them.
    pub fn new(graph: ConceptGraph, records: &[RawQuery], min_count: usize) -> Result<Self> {
        let vocab = Vocabulary::build(records, min_count)?;
        Self::with_vocab(graph, vocab, records)
    }

    pub fn with_vocab(graph: ConceptGraph, vocab: Vocabulary, records: &[RawQuery]) -> Result<Self> {
        let queries = records.iter().map(|r| encode(r, &vocab, &graph)).collect::<ctinfer_core::Result<_>>()?;
        Ok(Prepared { graph, vocab, queries })
    }

    pub fn select(&self, ids: &[usize]) -> Vec<EncodedQuery> {
        ids.iter().map(|&i| self.queries[i].clone()).collect()
    }
}

/// Index sets of a seeded 70/10/20 split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < 10 {
            return Err(ctinfer_core::Error::Data(format!("need at least 10 records to split, got {n}")).into());
        }
        let order = shuffled_indices(n, seed);
        let (a, b, _) = split_sizes(n);
        Ok(SplitIndices {
            train: order[..a].to_vec(),
            validation: order[a..a + b].to_vec(),
            test: order[a + b..].to_vec(),
        })
    }

    /// SHA-256 over the three index lists.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for part in [&self.train, &self.validation, &self.test] {
            for i in part {
                h.update((*i as u64).to_le_bytes());
            }
            h.update(u64::MAX.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Something trainable with the shared optimizer loop.
pub trait Trainable: Sync {
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn loss_and_gradient(&self, q: &EncodedQuery) -> Result<(f64, ParamStore)>;
    /// Scores in the label space used for model selection.
    fn selection_scores(&self, queries: &[EncodedQuery]) -> Result<Vec<Vec<f64>>>;
    fn selection_truth(&self, q: &EncodedQuery) -> Vec<f64>;
}

/// The network trained with one loss variant.
#[derive(Debug, Clone)]
pub struct NeuralTask {
    pub model: Model,
    pub loss: LossConfig,
    pub transfer: TransferMatrix,
}

/// Concepts when the variant only supervises concepts, transitions
/// otherwise.
pub fn selects_on_concepts(variant: Variant) -> bool {
    variant == Variant::Ci
}

impl Trainable for NeuralTask {
    fn params(&self) -> &ParamStore {
        self.model.params()
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        self.model.params_mut()
    }

    fn loss_and_gradient(&self, q: &EncodedQuery) -> Result<(f64, ParamStore)> {
        Ok(self.model.loss_and_gradient(q, &self.loss, &self.transfer)?)
    }

    fn selection_scores(&self, queries: &[EncodedQuery]) -> Result<Vec<Vec<f64>>> {
        let preds = predict_all(&self.model, queries)?;
        let concepts = selects_on_concepts(self.loss.variant);
        Ok(preds
            .into_iter()
            .map(|p| if concepts { p.concept_probs } else { p.transition_probs })
            .collect())
    }

    fn selection_truth(&self, q: &EncodedQuery) -> Vec<f64> {
        if selects_on_concepts(self.loss.variant) {
            q.concept_labels.clone()
        } else {
            q.transition_labels.clone()
        }
    }
}

impl Trainable for LogisticBaseline {
    fn params(&self) -> &ParamStore {
        LogisticBaseline::params(self)
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        LogisticBaseline::params_mut(self)
    }

    fn loss_and_gradient(&self, q: &EncodedQuery) -> Result<(f64, ParamStore)> {
        Ok(LogisticBaseline::loss_and_gradient(self, q)?)
    }

    fn selection_scores(&self, queries: &[EncodedQuery]) -> Result<Vec<Vec<f64>>> {
        Ok(queries.iter().map(|q| self.predict(q)).collect::<ctinfer_core::Result<_>>()?)
    }

    fn selection_truth(&self, q: &EncodedQuery) -> Vec<f64> {
        q.transition_labels.clone()
    }
}

/// Tape-free predictions in input order. Queries are grouped by length so
/// little padding is evaluated.
pub fn predict_all(model: &Model, queries: &[EncodedQuery]) -> Result<Vec<Prediction>> {
    const CHUNK: usize = 64;
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by_key(|&i| queries[i].len());
    let mut out: Vec<Option<Prediction>> = vec![None; queries.len()];
    for ids in order.chunks(CHUNK) {
        let chunk: Vec<EncodedQuery> = ids.iter().map(|&i| queries[i].clone()).collect();
        for (&i, p) in ids.iter().zip(model.predict_batch(&chunk)?) {
            out[i] = Some(p);
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every index is filled")).collect())
}

/// Length-bucketed mini-batches for one epoch: a seeded shuffle, a stable
/// sort by length, fixed-size chunks, then a seeded shuffle of the chunks.
pub fn epoch_batches(lengths: &[usize], batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mix = seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut order = shuffled_indices(lengths.len(), mix);
    order.sort_by_key(|&i| lengths[i]);
    let chunks: Vec<Vec<usize>> = order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect();
    shuffled_indices(chunks.len(), mix.rotate_left(17))
        .into_iter()
        .map(|i| chunks[i].clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_micro_auc: f64,
    pub val_macro_auc: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub epochs: Vec<EpochRow>,
    pub best_epoch: usize,
    pub best_val_micro_auc: f64,
}

fn batch_gradient<T: Trainable>(task: &T, queries: &[&EncodedQuery]) -> Result<(f64, ParamStore)> {
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<(f64, ParamStore)>> = {
        use rayon::prelude::*;
        queries.par_iter().map(|q| task.loss_and_gradient(q)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<(f64, ParamStore)>> = queries.iter().map(|q| task.loss_and_gradient(q)).collect();

    // fixed summation order keeps the result independent of thread count
    let mut total = task.params().zeros_like();
    let mut loss = 0.0;
    for part in parts {
        let (l, g) = part?;
        loss += l;
        total.add_assign(&g)?;
    }
    total.scale(1.0 / queries.len() as f64);
    Ok((loss, total))
}

fn validation_auc<T: Trainable>(task: &T, validation: &[EncodedQuery]) -> Result<(f64, f64)> {
    let scores = task.selection_scores(validation)?;
    let truth: Vec<Vec<f64>> = validation.iter().map(|q| task.selection_truth(q)).collect();
    let auc = ctinfer_core::metrics::micro_macro_auc(&EvalBatch::new(&truth, &scores)?)?;
    Ok((auc.micro, auc.macro_))
}

/// Mini-batch Adam with global-norm clipping and early stopping on
/// validation micro-AUC. Leaves the best parameters in `task`.
pub fn fit<T: Trainable>(task: &mut T, train: &[EncodedQuery], validation: &[EncodedQuery], cfg: &TrainConfig) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    let mut adam = AdamState::with_lr(task.params(), cfg.lr);
    let lengths: Vec<usize> = train.iter().map(EncodedQuery::len).collect();
    let mut epochs = Vec::new();
    let mut best = (f64::NEG_INFINITY, task.params().clone(), 0usize);
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let mut loss_sum = 0.0;
        for (b, ids) in epoch_batches(&lengths, cfg.batch_size, cfg.seed, epoch).iter().enumerate() {
            let batch: Vec<&EncodedQuery> = ids.iter().map(|&i| &train[i]).collect();
            let (loss, mut grads) = batch_gradient(task, &batch).map_err(|e| match e {
                Error::Core(ctinfer_core::Error::NonFinite(op)) => {
                    Error::Diverged { epoch, batch: b, detail: format!("non-finite value in {op}") }
                }
                other => other,
            })?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, detail: format!("loss {loss}") });
            }
            loss_sum += loss;
            clip_global_norm(&mut grads, cfg.clip_norm);
            adam.step(task.params_mut(), &grads)?;
        }
        let (micro, macro_) = validation_auc(task, validation)?;
        epochs.push(EpochRow { epoch, train_loss: loss_sum / train.len() as f64, val_micro_auc: micro, val_macro_auc: macro_ });
        if micro > best.0 {
            best = (micro, task.params().clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    *task.params_mut() = best.1;
    Ok(FitResult { epochs, best_epoch: best.2, best_val_micro_auc: best.0 })
}

/// Metric suite over one label space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub micro_auc: f64,
    pub macro_auc: f64,
    pub coverage_error: f64,
    pub lrap: f64,
    pub per_label_auc: Vec<Option<f64>>,
    /// Labels with a single class, left out of the macro average.
    pub skipped_labels: Vec<usize>,
    /// Queries without a positive label, left out of coverage and LRAP.
    pub skipped_rows: usize,
}

impl LabelScores {
    pub fn compute(truth: &[Vec<f64>], scores: &[Vec<f64>]) -> Result<(Self, RocCurve)> {
        let batch = EvalBatch::new(truth, scores)?;
        let s = summarize(&batch)?;
        let (roc, _) = roc_and_auc(batch.flat_truths(), batch.flat_scores())?;
        Ok((
            LabelScores {
                micro_auc: s.auc.micro,
                macro_auc: s.auc.macro_,
                coverage_error: s.coverage.value,
                lrap: s.lrap.value,
                skipped_labels: s.auc.skipped_labels().collect(),
                per_label_auc: s.auc.per_label,
                skipped_rows: s.coverage.skipped_rows,
            },
            roc,
        ))
    }
}

/// Held-out metrics. `concepts` and the energy are absent for models
/// that only predict transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub queries: usize,
    pub transitions: LabelScores,
    pub concepts: Option<LabelScores>,
    /// Median over queries of the counting-form energy.
    pub energy_median: Option<f64>,
    pub energy_mean: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub summary: EvalSummary,
    /// Micro ROC over transitions.
    pub roc: RocCurve,
    pub energies: Vec<f64>,
}

fn cardinality(labels: &[f64]) -> usize {
    labels.iter().filter(|v| **v > 0.5).count()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Scores full predictions against the truth in `queries`.
pub fn evaluate_predictions(queries: &[EncodedQuery], predictions: &[Prediction], graph: &ConceptGraph) -> Result<Evaluation> {
    if queries.len() != predictions.len() {
        return Err(Error::Config(format!("{} queries but {} predictions", queries.len(), predictions.len())));
    }
    let tt: Vec<Vec<f64>> = queries.iter().map(|q| q.transition_labels.clone()).collect();
    let ts: Vec<Vec<f64>> = predictions.iter().map(|p| p.transition_probs.clone()).collect();
    let ct: Vec<Vec<f64>> = queries.iter().map(|q| q.concept_labels.clone()).collect();
    let cs: Vec<Vec<f64>> = predictions.iter().map(|p| p.concept_probs.clone()).collect();
    let (transitions, roc) = LabelScores::compute(&tt, &ts)?;
    let (concepts, _) = LabelScores::compute(&ct, &cs)?;
    let energies = queries
        .iter()
        .zip(predictions)
        .map(|(q, p)| {
            energy_count(
                &p.concept_probs,
                &p.transition_probs,
                graph.transfer(),
                cardinality(&q.concept_labels),
                cardinality(&q.transition_labels),
            )
        })
        .collect::<ctinfer_core::Result<Vec<f64>>>()?;
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    Ok(Evaluation {
        summary: EvalSummary {
            queries: queries.len(),
            transitions,
            concepts: Some(concepts),
            energy_median: Some(median(&energies)),
            energy_mean: Some(mean),
        },
        roc,
        energies,
    })
}

/// Scores transition-only predictions.
pub fn evaluate_transition_scores(queries: &[EncodedQuery], scores: &[Vec<f64>]) -> Result<Evaluation> {
    let tt: Vec<Vec<f64>> = queries.iter().map(|q| q.transition_labels.clone()).collect();
    let (transitions, roc) = LabelScores::compute(&tt, scores)?;
    Ok(Evaluation {
        summary: EvalSummary { queries: queries.len(), transitions, concepts: None, energy_median: None, energy_mean: None },
        roc,
        energies: Vec::new(),
    })
}

/// Runs a checkpoint over `queries` after checking it matches `vocab`
/// and `graph`.
pub fn evaluate(checkpoint: &Checkpoint, vocab: &Vocabulary, queries: &[EncodedQuery], graph: &ConceptGraph) -> Result<(Vec<Prediction>, Evaluation)> {
    checkpoint.verify(vocab, graph)?;
    let model = checkpoint.to_model()?;
    let predictions = predict_all(&model, queries)?;
    let evaluation = evaluate_predictions(queries, &predictions, graph)?;
    Ok((predictions, evaluation))
}

/// Everything a training run reports. Deterministic for a fixed seed; the
/// wall-clock time is kept apart for that reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: String,
    pub seed: u64,
    pub split_hash: String,
    pub epochs: Vec<EpochRow>,
    pub best_epoch: usize,
    pub best_val_micro_auc: f64,
    pub test: EvalSummary,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

pub struct TrainOutcome {
    pub model: Model,
    pub checkpoint: Checkpoint,
    pub report: RunReport,
    pub test_ids: Vec<usize>,
    pub test_predictions: Vec<Prediction>,
    pub evaluation: Evaluation,
}

pub fn new_task(cfg: &TrainConfig, data: &Prepared) -> Result<NeuralTask> {
    let mc = cfg.model_config(data.vocab.word_size(), data.vocab.pos_size(), data.graph.num_concepts(), data.graph.num_transitions());
    Ok(NeuralTask { model: Model::new(mc, cfg.seed)?, loss: cfg.loss_config(), transfer: data.graph.transfer().clone() })
}

/// Trains `cfg.variant` on the 70% split, selects on the 10% split and
/// reports on the 20% split.
pub fn train(cfg: &TrainConfig, data: &Prepared) -> Result<TrainOutcome> {
    let start = Instant::now();
    let split = SplitIndices::new(data.queries.len(), cfg.seed)?;
    let mut task = new_task(cfg, data)?;
    let fit_result = fit(&mut task, &data.select(&split.train), &data.select(&split.validation), cfg)?;
    let test = data.select(&split.test);
    let test_predictions = predict_all(&task.model, &test)?;
    let evaluation = evaluate_predictions(&test, &test_predictions, &data.graph)?;
    let checkpoint = Checkpoint::new(&task.model, &data.vocab, &data.graph, cfg.variant.as_str(), cfg.seed, fit_result.best_epoch);
    let report = RunReport {
        method: cfg.variant.as_str().to_string(),
        seed: cfg.seed,
        split_hash: split.hash(),
        epochs: fit_result.epochs,
        best_epoch: fit_result.best_epoch,
        best_val_micro_auc: fit_result.best_val_micro_auc,
        test: evaluation.summary.clone(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome { model: task.model, checkpoint, report, test_ids: split.test, test_predictions, evaluation })
}

pub struct BaselineOutcome {
    pub model: LogisticBaseline,
    pub report: RunReport,
    pub test_scores: Vec<Vec<f64>>,
    pub evaluation: Evaluation,
}

pub const LR_METHOD: &str = "LR";

/// Per-transition logistic regression over word and POS counts, trained
/// and selected exactly like the network.
pub fn lr_baseline(cfg: &TrainConfig, data: &Prepared) -> Result<BaselineOutcome> {
    let start = Instant::now();
    let split = SplitIndices::new(data.queries.len(), cfg.seed)?;
    let mut model = LogisticBaseline::new(data.vocab.word_size(), data.vocab.pos_size(), data.graph.num_transitions(), cfg.seed)?;
    let fit_result = fit(&mut model, &data.select(&split.train), &data.select(&split.validation), cfg)?;
    let test = data.select(&split.test);
    let test_scores = model.selection_scores(&test)?;
    let evaluation = evaluate_transition_scores(&test, &test_scores)?;
    let report = RunReport {
        method: LR_METHOD.to_string(),
        seed: cfg.seed,
        split_hash: split.hash(),
        epochs: fit_result.epochs,
        best_epoch: fit_result.best_epoch,
        best_val_micro_auc: fit_result.best_val_micro_auc,
        test: evaluation.summary.clone(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(BaselineOutcome { model, report, test_scores, evaluation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub best_epoch: usize,
    pub test_micro_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: String,
    pub seed: u64,
    pub folds: Vec<FoldRow>,
    /// Metrics on the pooled held-out predictions of all folds.
    pub pooled: EvalSummary,
}

pub struct CvOutcome {
    pub report: CvReport,
    /// Record index of every pooled prediction, in pooled order.
    pub pooled_ids: Vec<usize>,
    pub pooled_predictions: Vec<Prediction>,
    pub evaluation: Evaluation,
}

/// Train/validation/test indices of one fold. One ninth of the non-test
/// records (seeded) is held out for early stopping.
pub fn fold_indices(assignment: &[usize], fold: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let test: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] == fold).collect();
    let rest: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] != fold).collect();
    let order = shuffled_indices(rest.len(), seed.wrapping_add(fold as u64 + 1));
    let n_val = (rest.len() / 9).max(1);
    let validation = order[..n_val].iter().map(|&k| rest[k]).collect();
    let train = order[n_val..].iter().map(|&k| rest[k]).collect();
    (train, validation, test)
}

/// `cfg.folds`-way cross-validation with pooled held-out predictions.
pub fn cross_validate(cfg: &TrainConfig, data: &Prepared) -> Result<CvOutcome> {
    cfg.validate()?;
    let assignment = fold_assignment(data.queries.len(), cfg.folds, cfg.seed)?;
    let mut folds = Vec::new();
    let mut pooled_ids = Vec::new();
    let mut pooled_predictions = Vec::new();
    for fold in 0..cfg.folds {
        let (train_ids, val_ids, test_ids) = fold_indices(&assignment, fold, cfg.seed);
        let mut task = new_task(cfg, data)?;
        let fit_result = fit(&mut task, &data.select(&train_ids), &data.select(&val_ids), cfg)?;
        let test = data.select(&test_ids);
        let preds = predict_all(&task.model, &test)?;
        let fold_eval = evaluate_predictions(&test, &preds, &data.graph)?;
        folds.push(FoldRow {
            fold,
            train_size: train_ids.len(),
            validation_size: val_ids.len(),
            test_size: test_ids.len(),
            best_epoch: fit_result.best_epoch,
            test_micro_auc: fold_eval.summary.transitions.micro_auc,
        });
        pooled_ids.extend(test_ids);
        pooled_predictions.extend(preds);
    }
    let pooled_queries = data.select(&pooled_ids);
    let evaluation = evaluate_predictions(&pooled_queries, &pooled_predictions, &data.graph)?;
    Ok(CvOutcome {
        report: CvReport { method: cfg.variant.as_str().to_string(), seed: cfg.seed, folds, pooled: evaluation.summary.clone() },
        pooled_ids,
        pooled_predictions,
        evaluation,
    })
}

/// A model family in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lr,
    Neural(Variant),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lr => LR_METHOD,
            Method::Neural(v) => v.as_str(),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case(LR_METHOD) {
            Ok(Method::Lr)
        } else {
            Ok(Method::Neural(s.trim().parse()?))
        }
    }
}

pub struct MethodRun {
    pub report: RunReport,
    pub roc: RocCurve,
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub seed: u64,
    pub split_hash: String,
    pub best_epoch: usize,
    pub micro_auc: f64,
    pub macro_auc: f64,
    pub coverage_error: f64,
    pub lrap: f64,
    pub energy_median: Option<f64>,
}

impl SummaryRow {
    pub fn from_report(r: &RunReport) -> Self {
        let t = &r.test.transitions;
        SummaryRow {
            method: r.method.clone(),
            seed: r.seed,
            split_hash: r.split_hash.clone(),
            best_epoch: r.best_epoch,
            micro_auc: t.micro_auc,
            macro_auc: t.macro_auc,
            coverage_error: t.coverage_error,
            lrap: t.lrap,
            energy_median: r.test.energy_median,
        }
    }
}

pub struct Comparison {
    pub transitions: Vec<String>,
    pub runs: Vec<MethodRun>,
}

impl Comparison {
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.runs.iter().map(|r| SummaryRow::from_report(&r.report)).collect()
    }

    pub fn run(&self, method: &str) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.report.method == method)
    }
}

pub fn run_method(method: Method, cfg: &TrainConfig, data: &Prepared) -> Result<MethodRun> {
    match method {
        Method::Lr => {
            let out = lr_baseline(cfg, data)?;
            Ok(MethodRun { report: out.report, roc: out.evaluation.roc, energies: out.evaluation.energies })
        }
        Method::Neural(variant) => {
            let cfg = TrainConfig { variant, ..cfg.clone() };
            let out = train(&cfg, data)?;
            Ok(MethodRun { report: out.report, roc: out.evaluation.roc, energies: out.evaluation.energies })
        }
    }
}

/// Trains every method with the same seed and split.
pub fn compare_variants(cfg: &TrainConfig, data: &Prepared, methods: &[Method]) -> Result<Comparison> {
    let runs = methods.iter().map(|&m| run_method(m, cfg, data)).collect::<Result<Vec<_>>>()?;
    let transitions = (0..data.graph.num_transitions()).map(|i| data.graph.transition_name(i)).collect();
    Ok(Comparison { transitions, runs })
}
