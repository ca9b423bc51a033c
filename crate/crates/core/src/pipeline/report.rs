use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    /// `filter`, `enricher`, `modifier` or `global`.
    pub kind: String,
    pub docs_in: u64,
    pub docs_out: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub errors: u64,
    /// `1 - docs_out / docs_in`, clamped to `[0, 1]`; 0 when nothing came in.
    pub removal_rate: f64,
    pub wall_ms: f64,
}

impl StageReport {
    pub fn new(name: &str, kind: &str) -> Self {
        StageReport { name: name.to_string(), kind: kind.to_string(), ..Default::default() }
    }

    /// Recomputes `removal_rate` from the counts.
    pub fn finish(&mut self) {
        self.removal_rate = if self.docs_in == 0 {
            0.0
        } else {
            (1.0 - self.docs_out as f64 / self.docs_in as f64).clamp(0.0, 1.0)
        };
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub stages: Vec<StageReport>,
    pub docs_in: u64,
    pub docs_out: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    /// Per-record errors from reading input, when the caller supplies them.
    #[serde(default)]
    pub input_errors: u64,
    pub wall_ms: f64,
}

impl ExecutionReport {
    /// Adds another report over the same stages, position by position.
    /// Wall time takes the maximum, as shards run concurrently.
    pub fn merge(&mut self, other: &ExecutionReport) {
        if self.stages.is_empty() {
            self.stages = other.stages.iter().map(|s| StageReport::new(&s.name, &s.kind)).collect();
        }
        for (a, b) in self.stages.iter_mut().zip(&other.stages) {
            a.docs_in += b.docs_in;
            a.docs_out += b.docs_out;
            a.tokens_in += b.tokens_in;
            a.tokens_out += b.tokens_out;
            a.errors += b.errors;
            a.wall_ms = a.wall_ms.max(b.wall_ms);
            a.finish();
        }
        self.docs_in += other.docs_in;
        self.docs_out += other.docs_out;
        self.tokens_in += other.tokens_in;
        self.tokens_out += other.tokens_out;
        self.input_errors += other.input_errors;
        self.wall_ms = self.wall_ms.max(other.wall_ms);
    }

    pub fn total_errors(&self) -> u64 {
        self.stages.iter().map(|s| s.errors).sum::<u64>() + self.input_errors
    }

    /// Document and token survival after each stage, as percentages of the
    /// pipeline input.
    pub fn funnel(&self) -> Funnel {
        let pct = |x: u64, of: u64| if of == 0 { 0.0 } else { 100.0 * x as f64 / of as f64 };
        let mut steps = vec![FunnelStep {
            stage: "input".into(),
            documents: self.docs_in,
            tokens: self.tokens_in,
            percent_documents: pct(self.docs_in, self.docs_in),
            percent_tokens: pct(self.tokens_in, self.tokens_in),
        }];
        steps.extend(self.stages.iter().map(|s| FunnelStep {
            stage: s.name.clone(),
            documents: s.docs_out,
            tokens: s.tokens_out,
            percent_documents: pct(s.docs_out, self.docs_in),
            percent_tokens: pct(s.tokens_out, self.tokens_in),
        }));
        Funnel { steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunnelStep {
    pub stage: String,
    pub documents: u64,
    pub tokens: u64,
    pub percent_documents: f64,
    pub percent_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    pub steps: Vec<FunnelStep>,
}

impl std::fmt::Display for Funnel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<24} {:>10} {:>8} {:>12} {:>8}", "stage", "docs", "%docs", "tokens", "%tokens")?;
        for s in &self.steps {
            writeln!(
                f,
                "{:<24} {:>10} {:>7.2}% {:>12} {:>7.2}%",
                s.stage, s.documents, s.percent_documents, s.tokens, s.percent_tokens
            )?;
        }
        Ok(())
    }
}
