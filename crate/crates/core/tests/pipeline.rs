use std::sync::Arc;

use curate::corpus::{shard_corpus, Document, Shard, ShardPolicy, Tokenizer};
use curate::pipeline::{
    load_pipeline_config, GlobalContext, GlobalStage, Mapper, MapperError, MapperKind, Pipeline, PipelineError,
    Scope,
};

fn para(tag: &str, n: usize) -> String {
    (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
}

fn bloom_config(scope: &str) -> String {
    format!(
        r#"{{"globals": [{{"name": "dedup-bloom", "scope": "{scope}", "params": {{"min_ngram_size": 5, "max_ngram_size": 5}}}}]}}"#
    )
}

#[test]
fn shard_local_bloom_misses_cross_shard_duplicates() {
    let dup = para("dup", 40);
    let docs = vec![
        Document::new("0", dup.clone()),
        Document::new("1", dup.clone()),
        Document::new("2", para("x", 40)),
        Document::new("3", para("y", 40)),
    ];
    let run = |scope: &str| {
        let p = load_pipeline_config(&bloom_config(scope)).unwrap();
        let shards = shard_corpus(docs.clone(), 2, ShardPolicy::RoundRobin).unwrap();
        p.run_sharded(shards, 2).unwrap().0
    };
    let local = run("shard");
    let global = run("corpus");
    assert_eq!(local.len(), 4, "round robin puts the pair in different shards");
    assert_eq!(global.len(), 3);
    assert!(global.iter().any(|d| d.id == "0") && !global.iter().any(|d| d.id == "1"));
}

#[test]
fn merged_report_sums_over_shards() {
    let docs: Vec<Document> = (0..40).map(|i| Document::new(format!("{i}"), para("w", 1 + i % 7))).collect();
    let p = load_pipeline_config(r#"{"stages": [{"kind": "filter", "name": "word_count", "params": {"min_words": 4}}]}"#)
        .unwrap();
    let shards = shard_corpus(docs.clone(), 4, ShardPolicy::HashOfId).unwrap();
    let mut summed = 0;
    for s in shards.clone() {
        summed += p.run(s).unwrap().1.docs_out;
    }
    let (out, rep) = p.run_sharded(shards, 3).unwrap();
    assert_eq!(rep.docs_in, 40);
    assert_eq!(rep.docs_out, summed);
    assert_eq!(rep.docs_out as usize, out.len());
    assert_eq!(rep.stages[0].docs_in, 40);
    let kept = docs.iter().filter(|d| d.text.split(' ').count() >= 4).count();
    assert_eq!(out.len(), kept);
}

#[test]
fn filter_then_modifier_counts() {
    let docs: Vec<Document> = (0..100)
        .map(|i| {
            let n = if i % 4 == 0 { 2 } else { 10 };
            Document::new(format!("{i}"), format!("{}\n\n{}", para("a", n), para("b", n)))
        })
        .collect();
    let p = load_pipeline_config(
        r#"{"stages": [
            {"kind": "filter", "name": "word_count", "params": {"min_words": 10}},
            {"kind": "modifier", "name": "split_paragraphs"}
        ]}"#,
    )
    .unwrap();
    let (out, rep) = p.run(Shard { index: 0, documents: docs }).unwrap();
    assert_eq!(rep.stages[0].docs_in, 100);
    assert_eq!(rep.stages[0].docs_out, 75);
    assert_eq!(rep.stages[1].docs_in, 75);
    assert_eq!(rep.stages[1].docs_out, 150);
    assert_eq!(out.documents.len(), 150);
    assert!((rep.stages[0].removal_rate - 0.25).abs() < 1e-12);
    assert_eq!(rep.stages[1].removal_rate, 0.0);
    let funnel = rep.funnel();
    assert_eq!(funnel.steps.first().unwrap().percent_documents, 100.0);
}

#[test]
fn config_round_trips_through_canonical_json() {
    let text = r#"{
        "stages": [
            {"kind": "filter", "name": "heuristics", "params": {"word_count": [10, 1000]}},
            {"kind": "enricher", "name": "token_count"}
        ],
        "globals": [{"name": "dedup-exact", "after": "heuristics", "scope": "corpus", "params": {"key": "normalized-text"}}],
        "seed": 42,
        "shards": 4
    }"#;
    let p = load_pipeline_config(text).unwrap();
    let cfg = p.config().unwrap().clone();
    let canon = cfg.to_canonical_json();
    let again = load_pipeline_config(&canon).unwrap();
    assert_eq!(again.config().unwrap(), &cfg);
    assert_eq!(again.config().unwrap().to_canonical_json(), canon);
    assert_eq!(p.seed(), 42);
    assert_eq!(p.step_names(), vec!["heuristics", "dedup-exact", "token_count"]);
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        (r#"{"stages": [{"kind": "filter", "name": "nope"}]}"#, "stages[0].name"),
        (r#"{"stages": [{"kind": "modifier", "name": "heuristics"}]}"#, "stages[0].kind"),
        (r#"{"globals": [{"name": "dedup-bloom", "params": {"threshold": 2}}]}"#, "globals[0].params"),
    ];
    for (text, path) in cases {
        match load_pipeline_config(text) {
            Err(PipelineError::Config { path: p, .. }) => assert!(p.starts_with(path), "{p} vs {path}"),
            Err(e) => panic!("{text}: unexpected {e}"),
            Ok(_) => panic!("{text}: accepted"),
        }
    }
}

struct Upper;

impl Mapper for Upper {
    fn kind(&self) -> MapperKind {
        MapperKind::Modifier
    }
    fn apply(&self, mut doc: Document) -> Result<Vec<Document>, MapperError> {
        if doc.text.contains("boom") {
            return Err(MapperError("boom".into()));
        }
        doc.text = doc.text.to_uppercase();
        Ok(vec![doc])
    }
}

struct KeepTop(f64);

impl GlobalStage for KeepTop {
    fn run(&self, docs: Vec<Document>, ctx: &GlobalContext) -> Result<Vec<Option<Document>>, String> {
        let mut lens: Vec<usize> = docs.iter().map(|d| ctx.tokenizer.count(&d.text)).collect();
        lens.sort_unstable();
        let cut = lens[((1.0 - self.0) * lens.len() as f64) as usize];
        Ok(docs.into_iter().map(|d| (ctx.tokenizer.count(&d.text) >= cut).then_some(d)).collect())
    }
}

#[test]
fn custom_stages_and_errors() {
    let p = Pipeline::new(Tokenizer::Whitespace, 1)
        .stage("upper", Arc::new(Upper))
        .global("top", Scope::Corpus, Arc::new(KeepTop(0.1)));
    let mut docs: Vec<Document> = (1..=100).map(|i| Document::new(format!("{i}"), para("t", i))).collect();
    docs.push(Document::new("bad", "boom"));
    let shards = shard_corpus(docs, 8, ShardPolicy::Contiguous).unwrap();
    let (out, rep) = p.run_sharded(shards, 4).unwrap();
    assert_eq!(rep.stages[0].errors, 1);
    assert_eq!(out.len(), 10);
    assert!(out.iter().all(|d| d.text.starts_with('T')));
}

#[test]
fn zero_workers_rejected() {
    let p = Pipeline::new(Tokenizer::default(), 0);
    assert!(matches!(p.run_sharded(vec![], 0), Err(PipelineError::Workers)));
}
