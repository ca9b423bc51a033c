use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;
use serde_json::{json, Value};

use curate::corpus::{read_corpus, Document};
use curate::decontam::{
    build_overlap_index, build_overlap_index_bloom, contamination_fractions, excise_matches, flag_qa_overlap,
    read_eval_set, FlagConfig,
};
use curate::dedup::{
    bff_process_document, calibrate_bands, minhash_cluster, minhash_signature, BffConfig, BloomFilter,
    MinHashConfig,
};
use curate::metrics::{aggregate_core, corpus_stats, roc_auc, TaskScore};
use curate::mixing::{mix_sources, MixSpecFile};
use curate::pipeline::{ExecutionReport, PipelineConfig};
use curate::quality::{prep_eli5, train_classifier, NgramClassifier, QaPost, QualityScorer, TrainConfig};

use crate::common::{
    data, read_inputs, read_json, run_config, single_stage, tokenizer, usage, write_docs, write_json, CliResult,
    Common, RunReport,
};
use crate::{Command, DecontamCmd, MetricsCmd, QualityCmd};

fn config(v: Value) -> CliResult<PipelineConfig> {
    serde_json::from_value(v).map_err(usage)
}

fn stage(kind: &str, name: &str, params: Value) -> Value {
    json!({"kind": kind, "name": name, "params": params})
}

fn global(name: &str, params: Value) -> Value {
    json!({"name": name, "scope": "shard", "params": params})
}

fn json_file(path: Option<&Path>) -> CliResult<Value> {
    path.map_or(Ok(json!({})), read_json)
}

pub fn run(cmd: Command) -> CliResult<()> {
    let here = Path::new(".");
    match cmd {
        Command::Extract { common, config: cfg, full_text } => {
            let mut params = json_file(cfg.as_deref())?;
            if full_text {
                if cfg.is_some() {
                    return Err(usage("--full-text and --config are exclusive"));
                }
                params = serde_json::to_value(curate::extract::ExtractConfig::full_text()).map_err(data)?;
            }
            let c = config(json!({"stages": [stage("modifier", "extract", params)]}))?;
            run_config("extract", &common, c, here, cfg.is_none())
        }
        Command::Filter { common, config: cfg, banned_domains, banned_substrings } => {
            let mut stages = vec![stage("filter", "heuristics", json_file(cfg.as_deref())?)];
            if banned_domains.is_some() || banned_substrings.is_some() {
                stages.push(stage(
                    "filter",
                    "url",
                    json!({"domains_file": banned_domains, "substrings_file": banned_substrings}),
                ));
            }
            let c = config(json!({ "stages": stages }))?;
            run_config("filter", &common, c, here, cfg.is_none())
        }
        Command::DedupExact { common, key } => {
            let c = config(json!({"globals": [global("dedup-exact", json!({"key": key}))]}))?;
            run_config("dedup-exact", &common, c, here, true)
        }
        Command::DedupBloom { common, min_ngram, max_ngram, threshold, fpr, expected_tokens, snapshot_in, snapshot_out } => {
            let bff = BffConfig { min_ngram_size: min_ngram, max_ngram_size: max_ngram, threshold, eps: fpr, expected_tokens };
            bff.validate().map_err(usage)?;
            if snapshot_in.is_none() && snapshot_out.is_none() {
                let params = serde_json::to_value(&bff).map_err(data)?;
                let c = config(json!({"globals": [global("dedup-bloom", params)]}))?;
                return run_config("dedup-bloom", &common, c, here, true);
            }
            if common.shards != 1 {
                return Err(usage("snapshots need a single shard"));
            }
            dedup_bloom_snapshot(&common, &bff, snapshot_in.as_deref(), snapshot_out.as_deref())
        }
        Command::DedupMinhash { common, ngram, bands, rows, budget, clusters } => {
            let (bands, rows) = budget.map_or((bands, rows), |b| calibrate_bands(b, (450, 20)));
            let mh = MinHashConfig { ngram_size: ngram, bands, rows, ..Default::default() };
            match clusters {
                None => {
                    let params = serde_json::to_value(mh).map_err(data)?;
                    let c = config(json!({"globals": [global("dedup-minhash", params)]}))?;
                    run_config("dedup-minhash", &common, c, here, true)
                }
                Some(path) => dedup_minhash_clusters(&common, &mh, &path),
            }
        }
        Command::DedupSuffix { common, min_run, max_tokens } => {
            let c = config(json!({"globals": [global("dedup-suffix", json!({"min_run": min_run, "max_tokens": max_tokens}))]}))?;
            run_config("dedup-suffix", &common, c, here, true)
        }
        Command::Quality(q) => quality(q),
        Command::Decontam(d) => decontam(d),
        Command::Mix { spec, output, report, tokenizer: t } => {
            let tok = tokenizer(&t)?;
            let started = Instant::now();
            let file: MixSpecFile = read_json(&spec)?;
            let base = spec.parent().unwrap_or(Path::new("."));
            let (spec_loaded, bad) = file.load(base).map_err(data)?;
            let input: Vec<Document> = spec_loaded.entries.iter().flat_map(|e| e.documents.iter().cloned()).collect();
            let (docs, mix) = mix_sources(&spec_loaded, &tok).map_err(data)?;
            write_docs(&docs, output.as_deref())?;
            let exec = single_stage("mix", "global", &input, &docs, &tok, started, bad as u64);
            let common = Common {
                input: file.entries.iter().map(|e| base.join(&e.path)).collect(),
                output,
                report: report.clone(),
                seed: file.seed,
                workers: 1,
                shards: 1,
                tokenizer: t,
            };
            RunReport::new("mix", &common, exec)
                .with_details(serde_json::to_value(mix).map_err(data)?)
                .emit(report.as_deref())
        }
        Command::Stats { input, report, tokenizer: t } => {
            let tok = tokenizer(&t)?;
            let started = Instant::now();
            let (docs, bad) = read_inputs(&input)?;
            let stats = corpus_stats(&docs, &tok);
            let sources = curate::mixing::mixture_report(&docs, &tok);
            let mut exec = ExecutionReport {
                docs_in: docs.len() as u64,
                docs_out: docs.len() as u64,
                tokens_in: stats.total_tokens,
                tokens_out: stats.total_tokens,
                input_errors: bad,
                ..Default::default()
            };
            exec.wall_ms = started.elapsed().as_secs_f64() * 1e3;
            let common = Common {
                input,
                output: None,
                report: report.clone(),
                seed: curate::pipeline::DEFAULT_SEED,
                workers: 1,
                shards: 1,
                tokenizer: t,
            };
            let r = RunReport::new("stats", &common, exec)
                .with_details(json!({"stats": stats, "sources": sources.sources}));
            write_json(&r, None)?;
            if let Some(p) = &report {
                write_json(&r, Some(p))?;
            }
            Ok(())
        }
        Command::Pipeline { common, config: path } => {
            let text = std::fs::read_to_string(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            let cfg: PipelineConfig = serde_path_config(de, &path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            run_config("pipeline", &common, cfg, base, false)
        }
        Command::Metrics(m) => metrics(m),
    }
}

fn serde_path_config(de: &mut serde_json::Deserializer<serde_json::de::StrRead<'_>>, path: &Path) -> CliResult<PipelineConfig> {
    PipelineConfig::deserialize(de).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn dedup_bloom_snapshot(c: &Common, bff: &BffConfig, input: Option<&Path>, output: Option<&Path>) -> CliResult<()> {
    let tok = c.tok()?;
    let started = Instant::now();
    let (docs, bad) = read_inputs(&c.input)?;
    let filter = match input {
        Some(p) => BloomFilter::load(p).map_err(|e| data(format!("{}: {e}", p.display())))?,
        None => {
            let n = bff.expected_tokens.unwrap_or_else(|| docs.iter().map(|d| tok.count(&d.text) as u64).sum());
            BloomFilter::new(n.max(1), bff.eps, c.seed).map_err(usage)?
        }
    };
    let mut removed_paragraphs = 0usize;
    let kept: Vec<Document> = docs
        .iter()
        .filter_map(|d| {
            let o = bff_process_document(d, &filter, bff, &tok);
            removed_paragraphs += o.removed_paragraphs.len();
            o.document
        })
        .collect();
    if let Some(p) = output {
        filter.save(p).map_err(|e| data(format!("{}: {e}", p.display())))?;
    }
    write_docs(&kept, c.output.as_deref())?;
    let exec = single_stage("dedup-bloom", "global", &docs, &kept, &tok, started, bad);
    let details = json!({
        "removed_paragraphs": removed_paragraphs,
        "filter": {"m": filter.m(), "k": filter.k(), "bits_set": filter.count_ones()},
    });
    RunReport::new("dedup-bloom", c, exec).with_details(details).emit(c.report.as_deref())
}

fn dedup_minhash_clusters(c: &Common, mh: &MinHashConfig, path: &Path) -> CliResult<()> {
    let tok = c.tok()?;
    let started = Instant::now();
    let (docs, bad) = read_inputs(&c.input)?;
    let mut sigs = Vec::new();
    for (i, d) in docs.iter().enumerate() {
        if let Ok(mut s) = minhash_signature(d, mh, &tok) {
            s.id = format!("{i:020}");
            sigs.push(s);
        }
    }
    let clusters = minhash_cluster(&sigs).map_err(data)?;
    let mut drop = vec![false; docs.len()];
    let mut out_clusters = Vec::new();
    for cl in &clusters {
        let idx: Vec<usize> = cl.members.iter().map(|m| m.parse().expect("index id")).collect();
        for &i in &idx[1..] {
            drop[i] = true;
        }
        out_clusters.push(json!({
            "retained": docs[idx[0]].id,
            "members": idx.iter().map(|&i| docs[i].id.clone()).collect::<Vec<_>>(),
        }));
    }
    let kept: Vec<Document> = docs.iter().zip(&drop).filter(|(_, &x)| !x).map(|(d, _)| d.clone()).collect();
    write_json(&out_clusters, Some(path))?;
    write_docs(&kept, c.output.as_deref())?;
    let exec = single_stage("dedup-minhash", "global", &docs, &kept, &tok, started, bad);
    let details = json!({"bands": mh.bands, "rows": mh.rows, "clusters": clusters.len()});
    RunReport::new("dedup-minhash", c, exec).with_details(details).emit(c.report.as_deref())
}

fn read_all(paths: &[PathBuf]) -> CliResult<Vec<Document>> {
    let mut out = Vec::new();
    for p in paths {
        let (d, errs) = read_corpus(p).map_err(data)?;
        for e in &errs {
            eprintln!("warning: skipped record {e}");
        }
        out.extend(d);
    }
    Ok(out)
}

fn quality(q: QualityCmd) -> CliResult<()> {
    let here = Path::new(".");
    match q {
        QualityCmd::Train { positive, negative, model, epochs, learning_rate, buckets, orders, seed, report } => {
            let pos = read_all(&positive)?;
            let neg = read_all(&negative)?;
            if pos.is_empty() || neg.is_empty() {
                return Err(data("both classes need at least one document"));
            }
            let cfg = TrainConfig { epochs, learning_rate, bucket_count: buckets, orders, seed };
            let (clf, rep) = train_classifier(&pos, &neg, &cfg).map_err(usage)?;
            clf.save(&model).map_err(|e| data(format!("{}: {e}", model.display())))?;
            eprintln!(
                "trained on {} examples: accuracy {:.4}, loss {:.4}",
                rep.examples, rep.train_accuracy, rep.final_loss
            );
            if let Some(p) = report {
                let details = json!({
                    "examples": rep.examples,
                    "train_accuracy": rep.train_accuracy,
                    "final_loss": rep.final_loss,
                    "config": cfg,
                });
                let common = Common {
                    input: positive.into_iter().chain(negative).collect(),
                    output: Some(model),
                    report: Some(p.clone()),
                    seed,
                    workers: 1,
                    shards: 1,
                    tokenizer: "unicode".into(),
                };
                let exec = ExecutionReport {
                    docs_in: rep.examples as u64,
                    docs_out: rep.examples as u64,
                    ..Default::default()
                };
                write_json(&RunReport::new("quality train", &common, exec).with_details(details), Some(&p))?;
            }
            Ok(())
        }
        QualityCmd::Score { common, model, key } => {
            let tok = common.tok()?;
            let started = Instant::now();
            let clf = NgramClassifier::load(&model).map_err(|e| data(format!("{}: {e}", model.display())))?;
            let (docs, bad) = read_inputs(&common.input)?;
            let scored: Vec<Document> = docs
                .iter()
                .map(|d| {
                    let s = clf.score(d).unwrap_or(f64::NAN);
                    d.clone().with_meta(key.clone(), format!("{s}"))
                })
                .collect();
            write_docs(&scored, common.output.as_deref())?;
            let exec = single_stage("quality-score", "enricher", &docs, &scored, &tok, started, bad);
            RunReport::new("quality score", &common, exec).emit(common.report.as_deref())
        }
        QualityCmd::Filter { common, model, reference, keep, sketch_k } => {
            let threshold = match sketch_k {
                Some(k) => json!({"mode": "sketch", "k": k}),
                None => json!({"mode": "exact"}),
            };
            let g = match (model, reference) {
                (Some(m), _) => json!({"name": "quality-filter", "scope": "corpus",
                    "params": {"model": m, "keep": keep, "threshold": threshold}}),
                (None, Some(r)) => json!({"name": "perplexity-filter", "scope": "corpus",
                    "params": {"reference": r, "keep": keep, "threshold": threshold}}),
                (None, None) => return Err(usage("need --model or --reference")),
            };
            let c = config(json!({ "globals": [g] }))?;
            // Missing or corrupt model files are data errors, not usage errors.
            run_config("quality filter", &common, c, here, false)
        }
        QualityCmd::PrepEli5 { input, output } => {
            let text = std::fs::read_to_string(&input).map_err(|e| data(format!("{}: {e}", input.display())))?;
            let mut posts = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let p: QaPost =
                    serde_json::from_str(line).map_err(|e| data(format!("{}:{}: {e}", input.display(), i + 1)))?;
                posts.push(p);
            }
            let docs = prep_eli5(&posts);
            eprintln!("{} of {} posts kept", docs.len(), posts.len());
            write_docs(&docs, output.as_deref())
        }
    }
}

fn decontam(d: DecontamCmd) -> CliResult<()> {
    match d {
        DecontamCmd::Measure { common, eval, ngram, bloom_fpr } => {
            let tok = common.tok()?;
            let started = Instant::now();
            let samples = read_eval_set(&eval).map_err(data)?;
            let (docs, bad) = read_inputs(&common.input)?;
            let idx = match bloom_fpr {
                Some(eps) => build_overlap_index_bloom(&docs, ngram, &tok, eps, common.seed).map_err(usage)?,
                None => build_overlap_index(&docs, ngram, &tok),
            };
            let rep = contamination_fractions(&samples, &idx);
            write_json(&rep, common.output.as_deref())?;
            let exec = single_stage("decontam-measure", "global", &docs, &docs, &tok, started, bad);
            let details = json!({"ngram": ngram, "samples": samples.len(), "percent": rep.percent});
            RunReport::new("decontam measure", &common, exec).with_details(details).emit(common.report.as_deref())
        }
        DecontamCmd::Excise { common, eval, case_insensitive } => {
            let tok = common.tok()?;
            let started = Instant::now();
            let samples = read_eval_set(&eval).map_err(data)?;
            let (docs, bad) = read_inputs(&common.input)?;
            let cfg = FlagConfig { case_insensitive };
            let mut flagged = 0usize;
            let out: Vec<Document> = docs
                .iter()
                .map(|d| {
                    let res = flag_qa_overlap(d, &samples, &cfg);
                    flagged += usize::from(!res.matches.is_empty());
                    excise_matches(d, &res.matches)
                })
                .collect();
            write_docs(&out, common.output.as_deref())?;
            let exec = single_stage("decontam-excise", "modifier", &docs, &out, &tok, started, bad);
            RunReport::new("decontam excise", &common, exec)
                .with_details(json!({"flagged_documents": flagged}))
                .emit(common.report.as_deref())
        }
    }
}

#[derive(Deserialize)]
struct Scored {
    score: f64,
    label: u8,
}

fn metrics(m: MetricsCmd) -> CliResult<()> {
    match m {
        MetricsCmd::Core { scores } => {
            let tasks: Vec<TaskScore> = read_json(&scores)?;
            let core = aggregate_core(&tasks).map_err(data)?;
            write_json(&json!({"tasks": tasks.len(), "core": core}), None)
        }
        MetricsCmd::Auc { input } => {
            let text = std::fs::read_to_string(&input).map_err(|e| data(format!("{}: {e}", input.display())))?;
            let mut s = Vec::new();
            let mut l = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let r: Scored =
                    serde_json::from_str(line).map_err(|e| data(format!("{}:{}: {e}", input.display(), i + 1)))?;
                s.push(r.score);
                l.push(r.label);
            }
            let auc = roc_auc(&s, &l).map_err(data)?;
            write_json(&json!({"examples": s.len(), "auc": auc}), None)
        }
    }
}
