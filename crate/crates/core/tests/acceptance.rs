//! Acceptance suite. Prints one `ACCEPTANCE` line per criterion and exits
//! non-zero if any fails.

use std::collections::{HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use curate::baseline::{run_full_baseline, BaselineConfig, QualityStep};
use curate::corpus::{Document, Tokenizer};
use curate::decontam::{
    build_overlap_index, contamination_fractions, excise_matches, flag_qa_overlap, ContaminationLabel,
    EvalSample, FlagConfig,
};
use curate::dedup::{
    bff_dedup, bff_process_document, bloom_optimal_k, bloom_optimal_m, calibrate_bands, calibrate_bands_with,
    false_mark_bound, minhash_cluster, minhash_detect_prob, minhash_signature, repeated_token_mask, suffix_dedup,
    BffConfig, BffOutcome, BloomFilter, BudgetMode, MinHashConfig,
};
use curate::metrics::{centered_accuracy, roc_auc};
use curate::quality::{quality_filter, train_classifier, QualityError, QualityScorer, ThresholdMode, TrainConfig};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn word(r: &mut ChaCha8Rng, vocab: u32) -> String {
    format!("w{}", r.random_range(0..vocab))
}

/// Words that never repeat across calls sharing `next`.
fn fresh(prefix: &str, next: &mut usize, n: usize) -> Vec<String> {
    let out = (0..n).map(|i| format!("{prefix}{}", *next + i)).collect();
    *next += n;
    out
}

// 1 -------------------------------------------------------------------------

fn fpr(n: f64, k: f64, m: f64) -> f64 {
    (1.0 - (-k * n / m).exp()).powf(k)
}

fn bloom_math() -> Outcome {
    ensure!(bloom_optimal_k(0.01).unwrap() == 7, "k(0.01) = {}", bloom_optimal_k(0.01).unwrap());
    let raw = -(0.01f64).ln() / 2f64.ln();
    ensure!((raw - 6.6439).abs() < 1e-4, "-ln 0.01 / ln 2 = {raw}");

    let mut r = rng(1);
    let mut worst_exact: f64 = 0.0;
    let mut worst_ln2: f64 = 0.0;
    for _ in 0..20 {
        let n = 10f64.powf(r.random_range(3.0..7.0)).round() as u64;
        let eps = 10f64.powf(r.random_range(-5.0..0.5f64.log10()));
        let k = bloom_optimal_k(eps).map_err(|e| e.to_string())?;
        let k_ref = (-eps.ln() / 2f64.ln()).round().max(1.0) as u32;
        ensure!(k == k_ref, "k({eps}) = {k}, expected {k_ref}");
        let m = bloom_optimal_m(n, k, eps).map_err(|e| e.to_string())?;
        let (nf, kf) = (n as f64, k as f64);
        ensure!(fpr(nf, kf, m as f64) <= eps, "n={n} eps={eps}: m={m} misses eps");
        ensure!(fpr(nf, kf, (m - 1) as f64) > eps, "n={n} eps={eps}: m-1={} already meets eps", m - 1);
        // Exact inversion of the back-substitution for this k.
        let closed = -kf * nf / (1.0 - eps.powf(1.0 / kf)).ln();
        let rel = (m as f64 - closed).abs() / closed;
        worst_exact = worst_exact.max(rel);
        ensure!(rel < 0.01, "n={n} eps={eps}: m={m} vs closed form {closed:.1}");
        // -n ln eps / ln^2 2 at eps = 0.01 for the same n.
        let k1 = bloom_optimal_k(0.01).unwrap();
        let m1 = bloom_optimal_m(n, k1, 0.01).map_err(|e| e.to_string())?;
        let ln2 = -nf * 0.01f64.ln() / 2f64.ln().powi(2);
        let rel2 = (m1 as f64 - ln2).abs() / ln2;
        worst_ln2 = worst_ln2.max(rel2);
        ensure!(rel2 < 0.01, "n={n}: m={m1} vs -n ln eps / ln^2 2 = {ln2:.1}");
    }
    let m6 = bloom_optimal_m(1_000_000, 7, 0.01).unwrap();
    ensure!((9_500_000..9_700_000).contains(&m6), "m(1e6, 7, 0.01) = {m6}");
    Ok(format!(
        "k(0.01)=7, m(1e6)={m6}, 20 pairs on boundary, worst rel err {worst_exact:.2e} (k-exact) / {worst_ln2:.2e} (ln^2 2)"
    ))
}

// 2 -------------------------------------------------------------------------

fn empirical_fpr() -> Outcome {
    let f = BloomFilter::new(1_000_000, 0.01, 0xF00D).map_err(|e| e.to_string())?;
    for i in 0..1_000_000u64 {
        let g = format!("in{i}");
        f.check_and_insert(&[g.as_str(), "x"]);
    }
    for i in (0..1_000_000u64).step_by(9973) {
        let g = format!("in{i}");
        ensure!(f.contains(&[g.as_str(), "x"]), "false negative on in{i}");
    }
    let mut hits = 0u64;
    for i in 0..100_000u64 {
        let g = format!("out{i}");
        hits += u64::from(f.contains(&[g.as_str(), "x"]));
    }
    let rate = hits as f64 / 100_000.0;
    ensure!(rate <= 0.02, "measured FPR {rate}");
    Ok(format!("m={} k={} measured FPR {rate:.4} <= 0.02", f.m(), f.k()))
}

// 3 -------------------------------------------------------------------------

fn hoeffding() -> Outcome {
    let b = false_mark_bound(100, 60, 0.8, 0.01).map_err(|e| e.to_string())?;
    let (n, s, t, eps) = (100.0f64, 60.0f64, 0.8f64, 0.01f64);
    let dev = t * n - s - eps * (n - s);
    let oracle = (-2.0 * dev * dev / (n - s)).exp();
    ensure!(b < 1e-8, "bound {b:e}");
    ensure!((b - oracle).abs() <= 1e-12 * oracle.max(1e-300), "bound {b:e} vs direct {oracle:e}");
    Ok(format!("bound {b:.3e} < 1e-8"))
}

// 4 -------------------------------------------------------------------------

/// Step-by-step paragraph + document procedure over an exact set.
struct Oracle {
    seen: HashSet<Vec<String>>,
}

impl Oracle {
    fn run(&mut self, doc: &Document, cfg: &BffConfig, tok: &Tokenizer) -> BffOutcome {
        let mut total_ngrams = 0u64;
        let mut contained_ngrams = 0u64;
        let mut out_paras: Vec<String> = Vec::new();
        let mut removed = Vec::new();
        let paragraphs: Vec<&str> = doc.text.split('\n').collect();
        for (i, p) in paragraphs.iter().enumerate() {
            let toks: Vec<String> = tok.tokenize(p).into_iter().map(String::from).collect();
            if toks.len() < cfg.min_ngram_size {
                out_paras.push(p.to_string());
            } else if toks.len() <= cfg.max_ngram_size {
                total_ngrams += 1;
                if self.seen.contains(&toks) {
                    contained_ngrams += 1;
                    removed.push(i);
                } else {
                    self.seen.insert(toks);
                    out_paras.push(p.to_string());
                }
            } else {
                let grams: Vec<Vec<String>> = toks.windows(cfg.max_ngram_size).map(|w| w.to_vec()).collect();
                let mut here = 0u64;
                let mut absent = Vec::new();
                for g in &grams {
                    total_ngrams += 1;
                    if self.seen.contains(g) {
                        contained_ngrams += 1;
                        here += 1;
                    } else {
                        absent.push(g.clone());
                    }
                }
                if here as f64 > cfg.threshold * grams.len() as f64 {
                    removed.push(i);
                } else {
                    for g in absent {
                        self.seen.insert(g);
                    }
                    out_paras.push(p.to_string());
                }
            }
        }
        let document = if total_ngrams > 0 && contained_ngrams as f64 > cfg.threshold * total_ngrams as f64 {
            None
        } else {
            let mut d = doc.clone();
            d.text = out_paras.join("\n");
            Some(d)
        };
        BffOutcome { document, removed_paragraphs: removed, total_ngrams, contained_ngrams }
    }
}

fn paragraph_pool(r: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    (0..size)
        .map(|_| {
            let len = *[1usize, 2, 3, 5, 6, 8, 12, 13, 14, 20, 30, 45].choose(r).unwrap();
            (0..len).map(|_| word(r, 40)).collect::<Vec<_>>().join(" ")
        })
        .collect()
}

fn bff_corpus(r: &mut ChaCha8Rng) -> Vec<Document> {
    let pool = paragraph_pool(r, 25);
    let docs = r.random_range(5..=50);
    (0..docs)
        .map(|i| {
            let paras = r.random_range(1..=6);
            let text: Vec<&str> = (0..paras).map(|_| pool.choose(r).unwrap().as_str()).collect();
            Document::new(format!("d{i}"), text.join("\n"))
        })
        .collect()
}

fn bff_oracle() -> Outcome {
    let tok = Tokenizer::default();
    let mut r = rng(4);
    let configs = [
        BffConfig { eps: 1e-9, ..Default::default() },
        BffConfig { min_ngram_size: 3, max_ngram_size: 6, threshold: 0.5, eps: 1e-9, expected_tokens: None },
    ];
    let mut compared = 0usize;
    let mut removals = 0usize;
    for c in 0..50 {
        let docs = bff_corpus(&mut r);
        let cfg = &configs[c % 2];
        let (got, _) = bff_dedup(&docs, cfg, &tok, c as u64).map_err(|e| e.to_string())?;
        let mut oracle = Oracle { seen: HashSet::new() };
        for (d, g) in docs.iter().zip(&got) {
            let want = oracle.run(d, cfg, &tok);
            ensure!(*g == want, "corpus {c} doc {}: {g:?} != oracle {want:?}", d.id);
            compared += 1;
            removals += usize::from(g.document.is_none()) + g.removed_paragraphs.len();
        }
    }
    ensure!(removals > 0, "constructed corpora never trigger a removal");

    // A gram planted in the filter alone is the only source of divergence.
    let cfg = BffConfig { min_ngram_size: 3, max_ngram_size: 6, threshold: 0.5, eps: 1e-9, expected_tokens: None };
    let doc = Document::new("fp", "q1 q2 q3 q4\nr1 r2 r3 r4 r5 r6 r7 r8");
    let filter = BloomFilter::new(1000, 1e-9, 9).map_err(|e| e.to_string())?;
    filter.check_and_insert(&["q1", "q2", "q3", "q4"]);
    let got = bff_process_document(&doc, &filter, &cfg, &tok);
    let clean = Oracle { seen: HashSet::new() }.run(&doc, &cfg, &tok);
    ensure!(got != clean, "injected false positive had no effect");
    let mut seeded = Oracle { seen: HashSet::new() };
    seeded.seen.insert(["q1", "q2", "q3", "q4"].iter().map(|s| s.to_string()).collect());
    let want = seeded.run(&doc, &cfg, &tok);
    ensure!(got == want, "injected divergence not explained by the planted gram: {got:?} vs {want:?}");
    Ok(format!("{compared} documents over 50 corpora identical ({removals} removals); injected FP diverges only"))
}

// 5 -------------------------------------------------------------------------

fn shingles(tokens: &[String], n: usize) -> HashSet<Vec<String>> {
    tokens.windows(n).map(|w| w.to_vec()).collect()
}

fn jaccard(a: &[String], b: &[String], n: usize) -> f64 {
    let (x, y) = (shingles(a, n), shingles(b, n));
    x.intersection(&y).count() as f64 / x.union(&y).count() as f64
}

fn band_collide(a: &[u64], b: &[u64], bands: usize, rows: usize) -> bool {
    (0..bands).any(|i| a[i * rows..(i + 1) * rows] == b[i * rows..(i + 1) * rows])
}

fn minhash_analytics() -> Outcome {
    let p = minhash_detect_prob(0.8, 93, 15);
    let direct = 1.0 - (1.0 - 0.8f64.powi(15)).powi(93);
    ensure!((p - direct).abs() < 1e-12, "detect prob {p} vs {direct}");
    ensure!((0.955..=0.975).contains(&p), "detect prob {p}");

    let cfg = MinHashConfig::default();
    let tok = Tokenizer::Whitespace;
    let mut next = 0usize;
    let mut collide = 0usize;
    let pairs = 2000;
    for i in 0..pairs {
        let a = fresh("t", &mut next, 49);
        let mut b = a.clone();
        b[24] = fresh("t", &mut next, 1).remove(0);
        if i < 20 {
            let j = jaccard(&a, &b, 5);
            ensure!((j - 0.8).abs() < 1e-12, "pair Jaccard {j}");
        }
        let sa = minhash_signature(&Document::new("a", a.join(" ")), &cfg, &tok).map_err(|e| e.to_string())?;
        let sb = minhash_signature(&Document::new("b", b.join(" ")), &cfg, &tok).map_err(|e| e.to_string())?;
        collide += usize::from(band_collide(&sa.values, &sb.values, cfg.bands, cfg.rows));
    }
    let rate = collide as f64 / pairs as f64;
    ensure!((rate - p).abs() <= 0.03, "empirical collision {rate} vs analytic {p}");

    let exact = calibrate_bands(1395, (450, 20));
    let at_most = calibrate_bands_with(1395, (450, 20), BudgetMode::AtMost);
    let gap = (at_most.distance - curate::dedup::band_curve_distance((93, 15), (450, 20))).abs();
    let tie_ok = exact == (93, 15) || gap < 1e-4;
    ensure!(tie_ok, "calibration {exact:?}");
    Ok(format!(
        "P(0.8;93,15)={p:.4}, empirical {rate:.4} over {pairs} pairs, calibrate(1395)={exact:?} (b*r<=budget gives ({},{}), l2 gap {gap:.1e})",
        at_most.bands, at_most.rows
    ))
}

// 6 -------------------------------------------------------------------------

fn clustering() -> Outcome {
    let cfg = MinHashConfig::default();
    let tok = Tokenizer::Whitespace;
    let mut r = rng(6);
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    let mut expected = Vec::new();
    for corpus in 0..5 {
        let mut next = corpus * 1_000_000;
        let mut docs: Vec<Vec<String>> = Vec::new();
        while docs.len() < 200 {
            let base = fresh("u", &mut next, 60);
            let roll = r.random_range(0..10);
            let twin = match roll {
                0..=3 => None,
                4..=5 => {
                    let mut t = base.clone();
                    t[30] = fresh("u", &mut next, 1).remove(0);
                    Some(t)
                }
                6..=8 => {
                    let k = r.random_range(1..=3);
                    let mut t = base.clone();
                    for s in t.iter_mut().skip(60 - k) {
                        *s = fresh("u", &mut next, 1).remove(0);
                    }
                    Some(t)
                }
                _ => {
                    let mut t = base.clone();
                    for pos in [10, 22, 34, 46] {
                        t[pos] = fresh("u", &mut next, 1).remove(0);
                    }
                    Some(t)
                }
            };
            docs.push(base);
            if let Some(t) = twin {
                if docs.len() < 200 {
                    docs.push(t);
                }
            }
        }
        docs.shuffle(&mut r);
        let sigs = docs
            .iter()
            .enumerate()
            .map(|(i, d)| minhash_signature(&Document::new(format!("{i:03}"), d.join(" ")), &cfg, &tok))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        let clusters = minhash_cluster(&sigs).map_err(|e| e.to_string())?;
        let mut label: HashMap<usize, usize> = HashMap::new();
        for (c, cl) in clusters.iter().enumerate() {
            for m in &cl.members {
                label.insert(m.parse().unwrap(), c);
            }
        }
        let sets: Vec<HashSet<Vec<String>>> = docs.iter().map(|d| shingles(d, 5)).collect();
        for i in 0..docs.len() {
            for j in i + 1..docs.len() {
                let inter = sets[i].intersection(&sets[j]).count();
                let j_ij = if inter == 0 { 0.0 } else { inter as f64 / sets[i].union(&sets[j]).count() as f64 };
                let truth = j_ij >= 0.8;
                let pred = matches!((label.get(&i), label.get(&j)), (Some(a), Some(b)) if a == b);
                if truth {
                    expected.push(minhash_detect_prob(j_ij, cfg.bands, cfg.rows));
                }
                match (truth, pred) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fnn += 1,
                    _ => {}
                }
            }
        }
    }
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    let recall = tp as f64 / (tp + fnn).max(1) as f64;
    let analytic = expected.iter().sum::<f64>() / expected.len().max(1) as f64;
    ensure!(tp + fnn >= 100, "only {} true pairs", tp + fnn);
    ensure!(precision >= 0.95, "precision {precision}");
    ensure!((recall - analytic).abs() <= 0.05, "recall {recall} vs analytic {analytic}");
    Ok(format!(
        "precision {precision:.3}, recall {recall:.3} vs analytic {analytic:.3} over {} true pairs",
        tp + fnn
    ))
}

// 7 -------------------------------------------------------------------------

/// Marks every token inside a window equal to any earlier window.
fn naive_mask(docs: &[Vec<String>], run: usize) -> Vec<Vec<bool>> {
    let windows: Vec<(usize, usize)> = docs
        .iter()
        .enumerate()
        .flat_map(|(d, t)| (0..(t.len() + 1).saturating_sub(run)).map(move |o| (d, o)))
        .collect();
    let mut mask: Vec<Vec<bool>> = docs.iter().map(|t| vec![false; t.len()]).collect();
    for (w, &(d, o)) in windows.iter().enumerate() {
        let cur = &docs[d][o..o + run];
        let repeated = windows[..w].iter().any(|&(d2, o2)| docs[d2][o2..o2 + run] == *cur);
        if repeated {
            mask[d][o..o + run].iter_mut().for_each(|m| *m = true);
        }
    }
    mask
}

fn check_suffix(docs: &[Vec<String>], run: usize) -> Result<usize, String> {
    let want = naive_mask(docs, run);
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let seqs: Vec<Vec<u32>> = docs
        .iter()
        .map(|d| {
            d.iter()
                .map(|t| {
                    let n = ids.len() as u32;
                    *ids.entry(t).or_insert(n)
                })
                .collect()
        })
        .collect();
    let got = repeated_token_mask(&seqs, run);
    if got != want {
        return Err("mask differs from naive oracle".into());
    }
    let input: Vec<Document> = docs.iter().enumerate().map(|(i, d)| Document::new(format!("{i}"), d.join(" "))).collect();
    let out = suffix_dedup(input, run, &Tokenizer::Whitespace).map_err(|e| e.to_string())?;
    for (i, (d, m)) in docs.iter().zip(&want).enumerate() {
        let kept: Vec<&str> = d.iter().zip(m).filter(|(_, &x)| !x).map(|(t, _)| t.as_str()).collect();
        if out[i].text != kept.join(" ") {
            return Err(format!("doc {i}: output {:?} != kept tokens", out[i].text));
        }
    }
    Ok(want.iter().flatten().filter(|&&x| x).count())
}

fn suffix_oracle() -> Outcome {
    let mut next = 0usize;
    // A whole 60-token document repeated.
    let a = fresh("s", &mut next, 60);
    let removed = check_suffix(&[a.clone(), a.clone()], 50)?;
    ensure!(removed == 60, "60-token duplicate: {removed} removed");
    // A shared run of exactly 50 tokens.
    let run = fresh("s", &mut next, 50);
    let d1 = [fresh("s", &mut next, 7), run.clone(), fresh("s", &mut next, 5)].concat();
    let d2 = [fresh("s", &mut next, 3), run.clone(), fresh("s", &mut next, 9)].concat();
    let removed = check_suffix(&[d1, d2], 50)?;
    ensure!(removed == 50, "50-token run: {removed} removed");
    // 49 shared tokens stay.
    let run = fresh("s", &mut next, 49);
    let d1 = [fresh("s", &mut next, 7), run.clone(), fresh("s", &mut next, 5)].concat();
    let d2 = [fresh("s", &mut next, 3), run.clone(), fresh("s", &mut next, 9)].concat();
    let removed = check_suffix(&[d1, d2], 50)?;
    ensure!(removed == 0, "49-token run: {removed} removed");

    let mut r = rng(7);
    let mut total_tokens = 0usize;
    let mut total_removed = 0usize;
    for c in 0..12 {
        let budget = [500usize, 2000, 10_000][c % 3];
        let vocab = [6u32, 50, 5000][c % 3];
        let mut docs: Vec<Vec<String>> = Vec::new();
        let mut used = 0;
        while used < budget {
            let len = r.random_range(1..=300).min(budget - used);
            let mut d: Vec<String> = (0..len).map(|_| word(&mut r, vocab)).collect();
            if !docs.is_empty() && r.random_bool(0.5) {
                let src = docs.choose(&mut r).unwrap().clone();
                let l = r.random_range(1..=src.len().min(120));
                let s = r.random_range(0..=src.len() - l);
                let at = r.random_range(0..=d.len());
                d.splice(at..at, src[s..s + l].iter().cloned());
                d.truncate(budget - used);
            }
            used += d.len();
            if !d.is_empty() {
                docs.push(d);
            }
        }
        let run = [50usize, 50, 20][c % 3];
        total_removed += check_suffix(&docs, run).map_err(|e| format!("corpus {c}: {e}"))?;
        total_tokens += used;
    }
    Ok(format!("boundary fixtures 60/50/49 ok; 12 random corpora ({total_tokens} tokens, {total_removed} removed) equal the oracle"))
}

// 8 -------------------------------------------------------------------------

fn class_doc(r: &mut ChaCha8Rng, class: usize) -> String {
    let shared = ["the", "and", "of", "to", "in", "is", "it", "that"];
    (0..r.random_range(30..60))
        .map(|_| {
            if r.random_bool(0.5) {
                shared.choose(r).unwrap().to_string()
            } else if class == 1 {
                format!("alpha{}", r.random_range(0..200))
            } else {
                format!("beta{}", r.random_range(0..200))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut win, mut n) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            n += 1.0;
            win += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
        }
    }
    win / n
}

struct IndexScore;

impl QualityScorer for IndexScore {
    fn name(&self) -> &str {
        "index"
    }
    fn score(&self, d: &Document) -> Result<f64, QualityError> {
        Ok(d.id.parse::<f64>().unwrap())
    }
}

fn classifier() -> Outcome {
    let mut r = rng(8);
    let cfg = TrainConfig { bucket_count: 1 << 18, ..Default::default() };
    let mk = |r: &mut ChaCha8Rng, class, n: usize| -> Vec<Document> {
        (0..n).map(|i| Document::new(format!("{class}-{i}"), class_doc(r, class))).collect()
    };
    let (pos, neg) = (mk(&mut r, 1, 500), mk(&mut r, 0, 500));
    let (model, _) = train_classifier(&pos, &neg, &cfg).map_err(|e| e.to_string())?;
    let (hp, hn) = (mk(&mut r, 1, 500), mk(&mut r, 0, 500));
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (d, y) in hp.iter().map(|d| (d, 1u8)).chain(hn.iter().map(|d| (d, 0u8))) {
        scores.push(model.probability(&d.text));
        labels.push(y);
    }
    let acc = scores.iter().zip(&labels).filter(|(s, &y)| (**s >= 0.5) == (y == 1)).count() as f64 / scores.len() as f64;
    let auc = roc_auc(&scores, &labels).map_err(|e| e.to_string())?;
    let brute = brute_auc(&scores, &labels);
    ensure!((auc - brute).abs() < 1e-12, "roc_auc {auc} vs pair count {brute}");
    ensure!(acc >= 0.99 && auc >= 0.99, "held-out accuracy {acc}, AUC {auc}");

    // Same documents, labels drawn independently of content.
    let all: Vec<Document> = pos.iter().chain(&neg).cloned().collect();
    let mut yl: Vec<u8> = (0..all.len()).map(|i| (i % 2) as u8).collect();
    yl.shuffle(&mut r);
    let rp: Vec<Document> = all.iter().zip(&yl).filter(|(_, &y)| y == 1).map(|(d, _)| d.clone()).collect();
    let rn: Vec<Document> = all.iter().zip(&yl).filter(|(_, &y)| y == 0).map(|(d, _)| d.clone()).collect();
    let (ctrl, _) = train_classifier(&rp, &rn, &cfg).map_err(|e| e.to_string())?;
    let held: Vec<Document> = (0..4000).map(|i| Document::new("h", class_doc(&mut r, i % 2))).collect();
    let mut hl: Vec<u8> = (0..held.len()).map(|i| (i % 2) as u8).collect();
    hl.shuffle(&mut r);
    let cs: Vec<f64> = held.iter().map(|d| ctrl.probability(&d.text)).collect();
    let cauc = roc_auc(&cs, &hl).map_err(|e| e.to_string())?;
    ensure!((0.45..=0.55).contains(&cauc), "permutation control AUC {cauc}");

    for n in [1usize, 9, 10, 11, 99, 100, 101, 1000, 1234, 5000] {
        let mut ids: Vec<usize> = (0..n).collect();
        ids.shuffle(&mut r);
        let docs: Vec<Document> = ids.iter().map(|i| Document::new(i.to_string(), "x")).collect();
        let out = quality_filter(docs, &IndexScore, 0.1, ThresholdMode::Exact).map_err(|e| e.to_string())?;
        let want = (n as f64 * 0.1).ceil() as usize;
        ensure!(out.documents.len() == want, "N={n}: kept {} not {want}", out.documents.len());
    }
    Ok(format!("held-out acc {acc:.4}, AUC {auc:.4}; control AUC {cauc:.4}; percentile keeps ceil(N/10) for 10 sizes"))
}

// 9 -------------------------------------------------------------------------

/// Per-token coverage by any `n`-run of the sample found contiguously in a
/// training document.
fn brute_coverage(sample: &[String], train: &[Vec<String>], n: usize) -> usize {
    let mut cov = vec![false; sample.len()];
    for s in 0..(sample.len() + 1).saturating_sub(n) {
        let run = &sample[s..s + n];
        let found = train.iter().any(|t| t.windows(n).any(|w| w == run));
        if found {
            cov[s..s + n].iter_mut().for_each(|c| *c = true);
        }
    }
    cov.iter().filter(|&&c| c).count()
}

fn decontamination() -> Outcome {
    let tok = Tokenizer::default();
    let n = 10;
    let mut r = rng(9);
    let train: Vec<Vec<String>> = (0..40).map(|_| (0..400).map(|_| word(&mut r, 3000)).collect()).collect();
    let train_docs: Vec<Document> =
        train.iter().enumerate().map(|(i, t)| Document::new(format!("t{i}"), t.join(" "))).collect();
    let idx = build_overlap_index(&train_docs, n, &tok);

    let mut next = 0usize;
    let mut samples = Vec::new();
    let mut sample_tokens = Vec::new();
    for i in 0..100 {
        let mut toks = Vec::new();
        while toks.len() < 100 {
            if r.random_bool(0.5) {
                let src = train.choose(&mut r).unwrap();
                let l = r.random_range(5..=25);
                let s = r.random_range(0..=src.len() - l);
                toks.extend_from_slice(&src[s..s + l]);
            } else {
                toks.extend(fresh("e", &mut next, r.random_range(1..=15)));
            }
        }
        toks.truncate(100);
        samples.push(EvalSample::text(format!("s{i}"), toks.join(" ")));
        sample_tokens.push(toks);
    }
    let rep = contamination_fractions(&samples, &idx);
    let mut total = 0;
    for (s, t) in rep.samples.iter().zip(&sample_tokens) {
        let want = brute_coverage(t, &train, n);
        ensure!(s.contaminated == want, "{}: {} covered, oracle {want}", s.id, s.contaminated);
        ensure!(s.tokens == 100, "{}: {} tokens", s.id, s.tokens);
        total += want;
    }

    let mut bounds = Vec::new();
    for (c, label) in [
        (19, ContaminationLabel::Clean),
        (20, ContaminationLabel::Partial),
        (80, ContaminationLabel::Partial),
        (81, ContaminationLabel::Dirty),
    ] {
        let src = &train[0];
        let toks: Vec<String> = src[..c].iter().cloned().chain(fresh("b", &mut next, 100 - c)).collect();
        let s = EvalSample::text(format!("b{c}"), toks.join(" "));
        let rep = contamination_fractions(&[s], &idx);
        let got = &rep.samples[0];
        ensure!(got.contaminated == c && got.label == label, "{c}/100: {got:?}");
        bounds.push(format!("{c}->{:?}", got.label));
    }

    let qa: Vec<EvalSample> = (0..30)
        .map(|i| {
            let q = format!("Background for item {i} is given. Which choice best fits case {i}?");
            let opts = (0..4).map(|o| format!("option {i} answer {o}"));
            EvalSample::qa(format!("q{i}"), q, opts)
        })
        .collect();
    let cfg = FlagConfig::default();
    let mut flagged = 0;
    for d in 0..100 {
        let mut parts: Vec<String> = Vec::new();
        for _ in 0..r.random_range(1..4) {
            let s = qa.choose(&mut r).unwrap();
            parts.push((0..8).map(|_| word(&mut r, 3000)).collect::<Vec<_>>().join(" "));
            parts.push(format!("Q: {}", s.question.as_deref().unwrap()));
            for o in s.options.iter().filter(|_| r.random_bool(0.6)) {
                parts.push(format!("- {o}"));
            }
            parts.push(format!("A: {}", s.options[0]));
        }
        let doc = Document::new(format!("d{d}"), parts.join("\n"));
        let first = flag_qa_overlap(&doc, &qa, &cfg);
        ensure!(!first.matches.is_empty(), "doc {d} not flagged");
        flagged += first.matches.len();
        let cleaned = excise_matches(&doc, &first.matches);
        let again = flag_qa_overlap(&cleaned, &qa, &cfg);
        ensure!(again.matches.is_empty(), "doc {d}: {} matches after excision", again.matches.len());
    }
    Ok(format!(
        "100 samples equal the oracle ({total} covered tokens); labels {}; {flagged} flags on 100 docs, 0 after one excision",
        bounds.join(" ")
    ))
}

// 10 ------------------------------------------------------------------------

fn metrics() -> Outcome {
    for b in [0.0, 0.25, 0.5, 0.9] {
        let at_base = centered_accuracy(b, b).map_err(|e| e.to_string())?;
        let perfect = centered_accuracy(1.0, b).map_err(|e| e.to_string())?;
        ensure!(at_base == 0.0 && perfect == 1.0, "baseline {b}: {at_base}, {perfect}");
    }
    let s = [0.1, 0.4, 0.35, 0.8];
    let l = [0u8, 0, 1, 1];
    let auc = roc_auc(&s, &l).map_err(|e| e.to_string())?;
    let pairs = brute_auc(&s, &l);
    ensure!(auc == 0.75 && pairs == 0.75, "auc {auc}, pairs {pairs}");
    Ok("centered accuracy 0 at baseline, 1 at perfect; AUC 0.75 = 3/4 pairs".into())
}

// 11 ------------------------------------------------------------------------

const COMMON: &[&str] = &[
    "the", "of", "and", "to", "in", "that", "is", "with", "for", "on", "as", "by", "from", "this", "was", "are",
    "have", "which", "their", "been",
];

fn english_doc(r: &mut ChaCha8Rng, lexicon: &[String]) -> String {
    let paragraphs = r.random_range(2..=4);
    (0..paragraphs)
        .map(|_| {
            (0..r.random_range(3..=5))
                .map(|_| {
                    let words: Vec<&str> = (0..r.random_range(8..=14))
                        .map(|_| {
                            if r.random_bool(0.35) {
                                *COMMON.choose(r).unwrap()
                            } else {
                                lexicon.choose(r).unwrap().as_str()
                            }
                        })
                        .collect();
                    let mut s = words.join(" ");
                    s[..1].make_ascii_uppercase();
                    s.push('.');
                    s
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn lexicon(r: &mut ChaCha8Rng) -> Vec<String> {
    let syll = ["ka", "ro", "mi", "sen", "tal", "ver", "dun", "pol", "ine", "gor", "las", "te"];
    (0..3000)
        .map(|_| (0..r.random_range(2..=3)).map(|_| *syll.choose(r).unwrap()).collect::<String>())
        .collect()
}

fn determinism() -> Outcome {
    let mut r = rng(11);
    let lex = lexicon(&mut r);
    let mut docs: Vec<Document> = Vec::with_capacity(10_000);
    for i in 0..10_000 {
        let text = if i >= 100 && r.random_bool(0.1) {
            docs[r.random_range(0..i)].text.clone()
        } else {
            english_doc(&mut r, &lex)
        };
        docs.push(Document::new(format!("doc{i:05}"), text).with_source("synthetic"));
    }
    let passing = docs
        .iter()
        .filter(|d| curate::heuristics::heuristic_filter(d, &Default::default()).is_keep())
        .count();
    ensure!(passing >= 9_000, "only {passing} synthetic documents pass the heuristics");

    let pos: Vec<Document> = (0..300).map(|i| Document::new(format!("p{i}"), english_doc(&mut r, &lex))).collect();
    let neg: Vec<Document> = (0..300)
        .map(|i| Document::new(format!("n{i}"), (0..80).map(|_| word(&mut r, 500)).collect::<Vec<_>>().join(" ")))
        .collect();
    let tc = TrainConfig { bucket_count: 1 << 16, epochs: 2, ..Default::default() };
    let (model, _) = train_classifier(&pos, &neg, &tc).map_err(|e| e.to_string())?;
    let quality = Some(QualityStep { scorer: Arc::new(model), keep: 0.5 });

    let run = |workers: usize| -> Result<(String, usize, usize), String> {
        let cfg = BaselineConfig { workers, shards: 8, quality: quality.clone(), ..Default::default() };
        let out = run_full_baseline(docs.clone(), &cfg).map_err(|e| e.to_string())?;
        let jsonl: String = out.documents.iter().map(|d| serde_json::to_string(d).unwrap() + "\n").collect();
        Ok((jsonl, out.documents.len(), out.funnel.steps.len()))
    };
    let (a, kept, steps) = run(1)?;
    let (b, _, _) = run(1)?;
    let (c, _, _) = run(8)?;
    ensure!(kept > 0 && kept < docs.len(), "baseline kept {kept} of {}", docs.len());
    ensure!(a == b, "two runs with the same seed differ");
    ensure!(a == c, "workers 1 and 8 differ");
    Ok(format!(
        "10000 docs ({passing} pass heuristics) -> {kept} kept over {steps} funnel steps; runs and 1 vs 8 workers byte-identical ({} bytes)",
        a.len()
    ))
}

// 12 ------------------------------------------------------------------------

fn scaling() -> Outcome {
    let mut r = rng(12);
    let tok = Tokenizer::default();
    let para = |r: &mut ChaCha8Rng| (0..r.random_range(15..40)).map(|_| word(r, 50_000)).collect::<Vec<_>>().join(" ");
    let templates: Vec<String> = (0..100).map(|_| (0..3).map(|_| para(&mut r)).collect::<Vec<_>>().join("\n")).collect();
    let pool: Vec<Document> = (0..4000)
        .map(|i| {
            let text = if r.random_bool(0.3) {
                templates.choose(&mut r).unwrap().clone()
            } else {
                (0..3).map(|_| para(&mut r)).collect::<Vec<_>>().join("\n")
            };
            Document::new(format!("{i}"), text)
        })
        .collect();
    let mut rates = Vec::new();
    for size in [500usize, 1000, 2000, 4000] {
        let docs = &pool[..size];
        let (out, _) = bff_dedup(docs, &BffConfig::default(), &tok, 12).map_err(|e| e.to_string())?;
        let before: usize = docs.iter().map(|d| tok.count(&d.text)).sum();
        let after: usize = out.iter().filter_map(|o| o.document.as_ref()).map(|d| tok.count(&d.text)).sum();
        rates.push((size, 1.0 - after as f64 / before as f64));
    }
    let monotone = rates.windows(2).all(|w| w[1].1 >= w[0].1);
    let shown: Vec<String> = rates.iter().map(|(s, x)| format!("{s}:{x:.3}")).collect();
    ensure!(monotone, "removal rates not monotone: {}", shown.join(" "));
    Ok(format!("token removal rate by pool size {}", shown.join(" ")))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: Vec<(&str, Duration, fn() -> Outcome)> = vec![
        ("bloom math", Duration::from_secs(1), bloom_math),
        ("empirical FPR", Duration::from_secs(30), empirical_fpr),
        ("Hoeffding bound", Duration::from_secs(1), hoeffding),
        ("BFF oracle", Duration::from_secs(10), bff_oracle),
        ("MinHash analytics", Duration::from_secs(120), minhash_analytics),
        ("MinHash clustering", Duration::from_secs(60), clustering),
        ("suffix dedup oracle", Duration::from_secs(30), suffix_oracle),
        ("classifier", Duration::from_secs(60), classifier),
        ("decontamination", Duration::from_secs(30), decontamination),
        ("metrics", Duration::from_secs(1), metrics),
        ("end-to-end determinism", Duration::from_secs(120), determinism),
        ("scaling direction", Duration::from_secs(60), scaling),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let res = match res {
            Ok(_) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match res {
            Ok(msg) => println!("ACCEPTANCE {:>2} {name}: PASS ({msg}; {took:.2?} / {limit:?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("ACCEPTANCE {:>2} {name}: FAIL ({msg}; {took:.2?} / {limit:?})", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
