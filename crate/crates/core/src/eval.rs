//! Dataset evaluation: per-type signed mean relative volume error.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::ingest::{ImagePairRecord, Manifest, View};
use crate::pipeline::{Pipeline, Stage, StageError, StageTimings, REPORT_SCHEMA};

/// Discard reason for records with no reference volume.
pub const MISSING_REFERENCE: &str = "MissingReference";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("no estimates to evaluate")]
    EmptyInput,
    #[error("reference volume must be positive, got {0} for {1}")]
    NonpositiveReference(f64, String),
    #[error("manifest has no records with a reference volume")]
    NoEvaluableRecords,
    #[error("cannot build a pool of {0} threads: {1}")]
    ThreadPool(usize, String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEstimate {
    pub pair_id: String,
    pub food_label: String,
    /// cm³
    pub estimated_volume: f64,
    /// cm³
    pub reference_volume: f64,
    pub relative_error: f64,
}

impl PairEstimate {
    pub fn new(pair_id: &str, food_label: &str, estimated: f64, reference: f64) -> Result<Self, EvalError> {
        if !(reference > 0.0 && reference.is_finite()) {
            return Err(EvalError::NonpositiveReference(reference, pair_id.to_string()));
        }
        Ok(Self {
            pair_id: pair_id.to_string(),
            food_label: food_label.to_string(),
            estimated_volume: estimated,
            reference_volume: reference,
            relative_error: (estimated - reference) / reference,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeReport {
    pub food_label: String,
    /// Evaluated pairs.
    pub n: usize,
    /// Signed mean of the relative errors.
    pub mean_error: f64,
    /// `|mean_error|`
    pub abs_mean_error: f64,
    pub discarded: usize,
}

/// One report per label, sorted by label. Errors of opposite sign cancel.
pub fn mean_error(estimates: &[PairEstimate]) -> Result<Vec<TypeReport>, EvalError> {
    if estimates.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for e in estimates {
        if !(e.reference_volume > 0.0) {
            return Err(EvalError::NonpositiveReference(e.reference_volume, e.pair_id.clone()));
        }
        groups.entry(&e.food_label).or_default().push(e.relative_error);
    }
    Ok(groups
        .into_iter()
        .map(|(label, errs)| {
            let me = errs.iter().sum::<f64>() / errs.len() as f64;
            TypeReport {
                food_label: label.to_string(),
                n: errs.len(),
                mean_error: me,
                abs_mean_error: me.abs(),
                discarded: 0,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discarded {
    pub pair_id: String,
    pub food_label: String,
    pub stage: Stage,
    pub reason: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTiming {
    pub pair_id: String,
    #[serde(flatten)]
    pub stages: StageTimings,
    pub total_ms: f64,
}

/// Everything `evaluate` writes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub schema: u32,
    pub detector: String,
    pub total_records: usize,
    pub evaluated: usize,
    pub types: Vec<TypeReport>,
    pub pairs: Vec<PairEstimate>,
    pub discarded: Vec<Discarded>,
    /// Wall-clock measurements; the only nondeterministic field.
    pub timings: Vec<PairTiming>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Types whose `|ME|` exceeds `bound`.
    pub fn types_outside(&self, bound: f64) -> Vec<&TypeReport> {
        self.types.iter().filter(|t| t.abs_mean_error > bound).collect()
    }
}

fn evaluate_record(pipeline: &Pipeline, manifest: &Manifest, r: &ImagePairRecord) -> (Result<f64, StageError>, PairTiming) {
    let t = Instant::now();
    let est = match r.true_volume {
        None => Err(StageError::new(Stage::Ingest, MISSING_REFERENCE, "record has no true volume")),
        Some(_) => pipeline.estimate_files(
            &manifest.image_path(r, View::Top),
            &manifest.image_path(r, View::Side),
            Some(r.annotations(View::Top)),
            Some(r.annotations(View::Side)),
        ),
    };
    let stages = est.as_ref().map(|e| e.timings).unwrap_or_default();
    // several foods in one pair (mix images) are compared as their sum
    let volume = est.map(|e| e.report.total_volume());
    let timing = PairTiming {
        pair_id: r.pair_id.clone(),
        stages,
        total_ms: t.elapsed().as_secs_f64() * 1e3,
    };
    (volume, timing)
}

/// Runs the pipeline on every record, concurrently with `config.jobs`
/// threads. Failing pairs are listed in `discarded`; the output is ordered
/// by pair_id whatever the completion order.
pub fn evaluate_manifest(manifest: &Manifest, pipeline: &Pipeline) -> Result<EvalReport, EvalError> {
    if !manifest.records.iter().any(|r| r.true_volume.is_some()) {
        return Err(EvalError::NoEvaluableRecords);
    }
    let jobs = pipeline.config.jobs;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::ThreadPool(jobs, e.to_string()))?;
    let mut results: Vec<_> = pool.install(|| {
        manifest
            .records
            .par_iter()
            .map(|r| (r, evaluate_record(pipeline, manifest, r)))
            .collect()
    });
    results.sort_by(|a, b| a.0.pair_id.cmp(&b.0.pair_id));

    let mut pairs = Vec::new();
    let mut discarded = Vec::new();
    let mut timings = Vec::new();
    for (r, (volume, timing)) in results {
        timings.push(timing);
        match volume {
            Ok(v) => {
                let reference = r.true_volume.expect("checked before estimating");
                pairs.push(PairEstimate::new(&r.pair_id, &r.food_label, v, reference)?);
            }
            Err(e) => {
                log::info!("discarding {}: {e}", r.pair_id);
                discarded.push(Discarded {
                    pair_id: r.pair_id.clone(),
                    food_label: r.food_label.clone(),
                    stage: e.stage,
                    reason: e.reason,
                    message: e.message,
                });
            }
        }
    }
    let mut types = if pairs.is_empty() { Vec::new() } else { mean_error(&pairs)? };
    for t in &mut types {
        t.discarded = discarded.iter().filter(|d| d.food_label == t.food_label).count();
    }
    Ok(EvalReport {
        schema: REPORT_SCHEMA,
        detector: pipeline.config.detector.to_string(),
        total_records: manifest.records.len(),
        evaluated: pairs.len(),
        types,
        pairs,
        discarded,
        timings,
    })
}
