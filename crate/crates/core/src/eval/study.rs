use serde::{Deserialize, Serialize};

use super::checker::{count_warnings, Checker};
use super::score_predictions;
use crate::error::{Error, Result};
use crate::infer::{predict_project, ConjoinConfig, ModelBundle, PredictionSet, ProjectIndex};
use crate::ingest::AliasTable;
use crate::learn::{stable_hash, train, ModelConfig, SplitSpec};
use crate::napast::{NapAst, PruneConfig};
use crate::rewrite::{apply_edits, plan_edits, write_sources, RewriteConfig, Sources};

/// Everything fixed across the fractions of one study.
pub struct StudySetup<'a> {
    pub corpus: &'a [NapAst],
    pub model: ModelConfig,
    pub split: SplitSpec,
    pub prune: PruneConfig,
    pub tau: f64,
    pub conjoin: ConjoinConfig,
    pub eval_index: &'a ProjectIndex,
    pub eval_truth: &'a [String],
    /// Erased sources of the evaluation project, needed for warning counts.
    pub eval_sources: Option<&'a Sources>,
    pub checker: Option<Checker>,
    pub alias: AliasTable,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub fraction: f64,
    pub classes: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub warnings: Option<usize>,
}

/// Indices of the classes in the sample for `fraction`; samples for larger
/// fractions contain those for smaller ones.
pub fn sample_fraction(corpus: &[NapAst], fraction: f64, seed: u64) -> Vec<usize> {
    let mut order: Vec<(u64, usize)> = corpus
        .iter()
        .enumerate()
        .map(|(i, g)| (stable_hash(&[&seed.to_le_bytes(), g.class_id.as_bytes()]), i))
        .collect();
    order.sort_unstable();
    let n = ((fraction * corpus.len() as f64).round() as usize).clamp(1, corpus.len().max(1));
    let mut picked: Vec<usize> = order.into_iter().take(n).map(|(_, i)| i).collect();
    picked.sort_unstable();
    picked
}

/// Warnings left after writing `p` into a copy of the erased sources.
pub fn warnings_after(
    erased: &Sources,
    p: &PredictionSet,
    checker: &Checker,
    alias: &AliasTable,
) -> Result<usize> {
    let plan = plan_edits(p, erased, alias, &RewriteConfig::default())?;
    let annotated = apply_edits(&plan, erased)?;
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    write_sources(dir.path(), &annotated)?;
    count_warnings(dir.path(), checker, alias)
}

/// Trains on growing samples of the corpus and scores each model on the
/// evaluation project.
pub fn data_fraction_study(setup: &StudySetup, fractions: &[f64]) -> Result<Vec<StudyRow>> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::Config(format!("fraction {f} outside (0, 1]")));
    }
    let mut rows = Vec::new();
    for &fraction in fractions {
        let picked = sample_fraction(setup.corpus, fraction, setup.seed);
        let sample: Vec<NapAst> = picked.iter().map(|&i| setup.corpus[i].clone()).collect();
        let (ckpt, report) = train(&sample, &setup.split, &setup.model, setup.prune.node_cap)?;
        let p = predict_project(
            setup.eval_index,
            &setup.prune,
            &ModelBundle::single(ckpt),
            setup.tau,
            &setup.conjoin,
        )?;
        let score = score_predictions("study", &p, setup.eval_truth)?;
        let warnings = match (setup.eval_sources, &setup.checker) {
            (Some(src), Some(checker)) => Some(warnings_after(src, &p, checker, &setup.alias)?),
            _ => None,
        };
        log::info!(
            "fraction {fraction}: {} classes, test F1 {:.3}, project F1 {:.3}",
            sample.len(),
            report.test_f1,
            score.f1
        );
        rows.push(StudyRow {
            fraction,
            classes: sample.len(),
            precision: score.precision,
            recall: score.recall,
            f1: score.f1,
            warnings,
        });
    }
    Ok(rows)
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("fraction,classes,precision,recall,f1,warnings\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{}\n",
            r.fraction,
            r.classes,
            r.precision,
            r.recall,
            r.f1,
            r.warnings.map_or("-".to_string(), |w| w.to_string())
        ));
    }
    out
}
