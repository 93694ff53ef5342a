use std::collections::BTreeSet;
use std::path::Path;

use qualinfer::eval::{
    count_warnings, data_fraction_study, generate_corpus, score_predictions, score_signatures, study_csv,
    warnings_after, Checker, CheckerConfig, EvalReport, GeneratorSpec, StudySetup,
};
use qualinfer::infer::{
    apply_threshold, conjoined_predict, postprocess, predict_project, train_clustered, ModelBundle, PredictionSet,
    ProjectIndex,
};
use qualinfer::ingest::{scan_corpus_graphs, CorpusManifest, NodeKind, RawGraph};
use qualinfer::learn::{train, ModelKind};
use qualinfer::napast::{encode_class, NapAst, PruneConfig};
use qualinfer::rewrite::{
    apply_edits_in_dir, dry_run_diff, erase_sources, plan_edits, read_sources, sources_diff, write_atomic, write_sources, Sources,
};
use qualinfer::tune::{
    ablate_node_types, ablate_statement_types, ablation_csv, cluster_graphs, derive_drop_list, AblationSpec,
};
use qualinfer::{jsonl, Error, Result};

use crate::config::{CheckerSetting, RunConfig};
use crate::{Cli, Command};

struct Ctx {
    cfg: RunConfig,
    argv: Vec<String>,
}

impl Ctx {
    fn provenance(&self) -> serde_json::Value {
        self.cfg.provenance(&self.argv)
    }

    fn write(&self, path: &Path, text: &str) -> Result<()> {
        if self.cfg.dry_run {
            println!("would write {} ({} bytes)", path.display(), text.len());
            return Ok(());
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Write {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        write_atomic(path, text)?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    fn emit(&self, path: Option<&Path>, text: &str) -> Result<()> {
        match path {
            Some(p) => self.write(p, text),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }

    /// Artifacts without a place for provenance get it beside them.
    fn write_with_sidecar(&self, path: &Path, text: &str) -> Result<()> {
        self.write(path, text)?;
        let mut side = path.as_os_str().to_owned();
        side.push(".provenance.json");
        self.write(Path::new(&side), &pretty(&self.provenance()))
    }
}

fn pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn checker_from_flag(flag: &Option<String>, pattern: &str, cfg: &RunConfig) -> Option<Checker> {
    match flag.as_deref() {
        None => cfg.checker(),
        Some("stub") => Some(Checker::Stub),
        Some(cmd) => Some(Checker::Command(CheckerConfig {
            checker_cmd: cmd.to_string(),
            warning_pattern: pattern.to_string(),
            timeout_seconds: match &cfg.checker {
                Some(CheckerSetting::Command(c)) => c.timeout_seconds,
                _ => 600,
            },
        })),
    }
}

fn encode_all(graphs: &[RawGraph], prune: &PruneConfig) -> Result<Vec<NapAst>> {
    use rayon::prelude::*;
    let encoded: Vec<Result<NapAst>> = graphs.par_iter().map(|g| encode_class(g, prune)).collect();
    let mut out = Vec::new();
    for (g, r) in graphs.iter().zip(encoded) {
        match r {
            Ok(n) => out.push(n),
            Err(Error::CapExceeded { nodes, cap }) => {
                log::warn!("{}: {nodes} nodes exceed the cap of {cap}, skipped", g.class_id)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn erased_project(dir: &Path, cfg: &RunConfig) -> Result<(Sources, ProjectIndex)> {
    let alias = cfg.alias_table()?;
    let erased = erase_sources(&read_sources(dir)?, &alias);
    let pairs: Vec<(String, String)> = erased.clone().into_iter().collect();
    let index = ProjectIndex::build(&pairs, &alias);
    Ok((erased, index))
}

fn warnings_of(sources: &Sources, checker: &Checker, cfg: &RunConfig) -> Result<usize> {
    let dir = tempfile::tempdir().map_err(|e| Error::Write {
        path: std::env::temp_dir(),
        source: e,
    })?;
    write_sources(dir.path(), sources)?;
    count_warnings(dir.path(), checker, &cfg.alias_table()?)
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.prune.is_some() {
        cfg.prune = cli.prune.clone();
    }
    cfg.dry_run |= cli.dry_run;
    match &cli.command {
        Command::Train { model: Some(m), .. } => cfg.model = m.parse::<ModelKind>().map_err(Error::Config)?,
        Command::Predict { tau: Some(t), .. } => cfg.tau = *t,
        Command::Ablate { reps: Some(r), .. } => cfg.ablation_reps = *r,
        Command::Cluster { k_min, k_max, .. } => {
            if let Some(k) = k_min {
                cfg.cluster.k_min = *k;
            }
            if let Some(k) = k_max {
                cfg.cluster.k_max = *k;
            }
        }
        _ => {}
    }
    let ctx = Ctx {
        cfg: cfg.resolve()?,
        argv: std::env::args().skip(1).collect(),
    };
    let cfg = &ctx.cfg;
    let alias = cfg.alias_table()?;
    match &cli.command {
        Command::Scan(io) => {
            let (mut manifest, _) = scan_corpus_graphs(&io.input, &alias, cfg.size_bounds)?;
            manifest.provenance = Some(ctx.provenance());
            log::info!("{} classes included, {} excluded", manifest.classes.len(), manifest.excluded.len());
            ctx.write(&io.out, &manifest.to_json())
        }
        Command::Encode(io) => {
            let (_, graphs) = scan_corpus_graphs(&io.input, &alias, cfg.size_bounds)?;
            let encoded = encode_all(&graphs, &cfg.prune_config()?)?;
            ctx.write_with_sidecar(&io.out, &jsonl::to_string(&encoded))
        }
        Command::Ablate {
            io,
            statements,
            drop_list,
            ..
        } => {
            let (_, graphs) = scan_corpus_graphs(&io.input, &alias, cfg.size_bounds)?;
            let prune = cfg.prune_config()?;
            let base = PruneConfig {
                phase2_drop_kinds: BTreeSet::new(),
                phase3_prune_stmt_kinds: BTreeSet::new(),
                ..prune.clone()
            };
            let present: BTreeSet<NodeKind> = graphs.iter().flat_map(|g| g.nodes.iter().map(|n| n.kind)).collect();
            let spec = AblationSpec {
                reps: cfg.ablation_reps,
                split: cfg.split,
                model: cfg.gcn.clone(),
                seed: cfg.seed,
            };
            let results = if *statements {
                let kinds: Vec<NodeKind> = present.into_iter().filter(|k| k.is_statement()).collect();
                ablate_statement_types(&graphs, &base, &kinds, &spec)?
            } else {
                let kinds: Vec<NodeKind> = present
                    .into_iter()
                    .filter(|k| {
                        !k.may_carry_label() && !matches!(k, NodeKind::NameNode | NodeKind::CompilationUnit)
                    })
                    .collect();
                ablate_node_types(&graphs, &base, &kinds, &spec)?
            };
            ctx.write_with_sidecar(&io.out, &ablation_csv(&results))?;
            if let Some(path) = drop_list {
                let kinds = derive_drop_list(&results)?;
                let mut derived = prune;
                if *statements {
                    derived.phase3_prune_stmt_kinds = kinds;
                } else {
                    derived.phase2_drop_kinds = kinds;
                }
                derived.validate()?;
                ctx.write(path, &derived.to_json())?;
            }
            Ok(())
        }
        Command::Cluster { graphs, out, .. } => {
            let corpus: Vec<NapAst> = jsonl::read(graphs)?;
            let ks: Vec<usize> = (cfg.cluster.k_min..=cfg.cluster.k_max).collect();
            let mut model = cluster_graphs(&corpus, &ks, cfg.seed)?;
            log::info!("chose k = {}", model.k);
            model.provenance = Some(ctx.provenance());
            ctx.write(out, &model.to_json())
        }
        Command::Train {
            graphs,
            out,
            clusters,
            report,
            ..
        } => {
            let corpus: Vec<NapAst> = jsonl::read(graphs)?;
            let node_cap = cfg.prune_config()?.node_cap;
            let model = cfg.model_config();
            let (text, reports) = match clusters {
                Some(path) => {
                    let cm = qualinfer::tune::ClusterModel::from_json(&read(path)?)?;
                    let (mut bundle, reports) = train_clustered(&corpus, &cm, &cfg.split, &model, node_cap)?;
                    for c in &mut bundle.checkpoints {
                        c.provenance = Some(ctx.provenance());
                    }
                    (bundle.to_json(), reports)
                }
                None => {
                    let (mut ckpt, report) = train(&corpus, &cfg.split, &model, node_cap)?;
                    log::info!("best validation F1 {:.4}, test F1 {:.4}", report.best_validation_f1, report.test_f1);
                    ckpt.provenance = Some(ctx.provenance());
                    (ckpt.to_json(), vec![report])
                }
            };
            ctx.write(out, &text)?;
            if let Some(path) = report {
                ctx.write(path, &serde_json::to_string_pretty(&reports).expect("reports serialize"))?;
            }
            Ok(())
        }
        Command::Predict {
            input,
            graphs,
            model,
            out,
            csv,
            ..
        } => {
            let bundle = ModelBundle::from_json(&read(model)?)?;
            let prune = cfg.prune_config()?;
            let mut p = match (input, graphs) {
                (Some(dir), _) => {
                    let index = ProjectIndex::from_dir(dir, &alias)?;
                    predict_project(&index, &prune, &bundle, cfg.tau, &cfg.conjoin())?
                }
                (None, Some(g)) => {
                    let graphs: Vec<NapAst> = jsonl::read(g)?;
                    let index = ProjectIndex::default();
                    let p = conjoined_predict(&graphs, &index, &bundle, &cfg.conjoin())?;
                    postprocess(apply_threshold(p, cfg.tau), &index)?
                }
                (None, None) => unreachable!("clap requires --in or --graphs"),
            };
            p.provenance = Some(ctx.provenance());
            log::info!("{} of {} elements decided", p.decided().len(), p.entries.len());
            ctx.emit(out.as_deref(), &p.to_json())?;
            if let Some(path) = csv {
                ctx.write_with_sidecar(path, &p.to_csv())?;
            }
            Ok(())
        }
        Command::Annotate {
            input,
            predictions,
            plan,
        } => {
            let p = PredictionSet::from_json(&read(predictions)?)?;
            let sources = read_sources(input)?;
            let mut edit_plan = plan_edits(&p, &sources, &alias, &cfg.rewrite)?;
            edit_plan.provenance = Some(ctx.provenance());
            if let Some(path) = plan {
                ctx.write(path, &edit_plan.to_json())?;
            }
            if cfg.dry_run {
                print!("{}", dry_run_diff(&edit_plan, &sources)?);
                return Ok(());
            }
            let written = apply_edits_in_dir(&edit_plan, input)?;
            log::info!("{} insertions in {} files", edit_plan.insertion_count(), written.len());
            Ok(())
        }
        Command::Erase { input, out } => {
            let sources = read_sources(input)?;
            let erased = erase_sources(&sources, &alias);
            if cfg.dry_run {
                print!("{}", sources_diff(&sources, &erased));
                return Ok(());
            }
            match out {
                Some(dir) => write_sources(dir, &erased),
                None => {
                    let changed: Sources = erased.into_iter().filter(|(p, t)| *t != sources[p]).collect();
                    write_sources(input, &changed)
                }
            }
        }
        Command::Eval {
            project,
            truth,
            predictions,
            checker,
            warning_pattern,
            out,
            csv,
        } => {
            let start = std::time::Instant::now();
            let truth = CorpusManifest::load(truth)?.truth();
            let name = project
                .file_name()
                .map_or_else(|| project.display().to_string(), |n| n.to_string_lossy().into_owned());
            let checker = checker_from_flag(checker, warning_pattern, cfg);
            let mut report = match predictions {
                Some(path) => {
                    let p = PredictionSet::from_json(&read(path)?)?;
                    let mut r = score_predictions(&name, &p, &truth)?;
                    if let Some(ch) = &checker {
                        let (erased, _) = erased_project(project, cfg)?;
                        let base = warnings_of(&erased, ch, cfg)?;
                        r = r.with_warnings(base, warnings_after(&erased, &p, ch, &alias)?);
                    }
                    r
                }
                None => {
                    let (manifest, _) = scan_corpus_graphs(project, &alias, cfg.size_bounds)?;
                    let decided: BTreeSet<String> = manifest.truth().into_iter().collect();
                    let mut r = score_signatures(&name, &decided, &truth)?;
                    if let Some(ch) = &checker {
                        let (erased, _) = erased_project(project, cfg)?;
                        r = r.with_warnings(warnings_of(&erased, ch, cfg)?, count_warnings(project, ch, &alias)?);
                    }
                    r
                }
            };
            report.project = name;
            let mut eval = EvalReport::new(vec![report]);
            eval.provenance = Some(ctx.provenance());
            log::info!("evaluated in {:.2}s", start.elapsed().as_secs_f64());
            ctx.emit(out.as_deref(), &eval.to_json())?;
            if let Some(path) = csv {
                ctx.write_with_sidecar(path, &eval.to_csv())?;
            }
            Ok(())
        }
        Command::Study {
            train: train_dir,
            eval,
            fractions,
            checker,
            warning_pattern,
            out,
        } => {
            let prune = cfg.prune_config()?;
            let (_, graphs) = scan_corpus_graphs(train_dir, &alias, cfg.size_bounds)?;
            let corpus = encode_all(&graphs, &prune)?;
            let (manifest, _) = scan_corpus_graphs(eval, &alias, cfg.size_bounds)?;
            let truth = manifest.truth();
            let (erased, index) = erased_project(eval, cfg)?;
            let setup = StudySetup {
                corpus: &corpus,
                model: cfg.model_config(),
                split: cfg.split,
                prune,
                tau: cfg.tau,
                conjoin: cfg.conjoin(),
                eval_index: &index,
                eval_truth: &truth,
                eval_sources: Some(&erased),
                checker: checker_from_flag(checker, warning_pattern, cfg),
                alias: alias.clone(),
                seed: cfg.seed,
            };
            let rows = data_fraction_study(&setup, fractions)?;
            ctx.write_with_sidecar(out, &study_csv(&rows))
        }
        Command::Gen {
            out,
            classes,
            spec,
            package_prefix,
            manifest,
        } => {
            let spec = match spec {
                Some(path) => GeneratorSpec::from_json(&read(path)?)?,
                None => GeneratorSpec {
                    package_prefix: package_prefix.clone(),
                    ..GeneratorSpec::new(*classes, cfg.seed)
                },
            };
            let mut corpus = generate_corpus(&spec)?;
            corpus.manifest.root = out.display().to_string();
            corpus.manifest.provenance = Some(ctx.provenance());
            let manifest_path = manifest.clone().unwrap_or_else(|| out.join("manifest.json"));
            if cfg.dry_run {
                println!("would write {} files under {}", corpus.sources.len(), out.display());
            } else {
                corpus.write_to(out)?;
            }
            ctx.write(&manifest_path, &corpus.manifest.to_json())
        }
    }
}
