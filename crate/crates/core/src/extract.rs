//! HTML to plain text with line-level boilerplate trimming.
//!
//! A tolerant single-pass tag scanner, not a DOM: unclosed and misnested
//! tags are fine, the scanner just keeps going. Output is one line per block
//! element, whitespace collapsed inside lines. Lines that are mostly link
//! text, short lines that carry a link, and lines matching a small navigation
//! lexicon are dropped.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    /// Elements whose whole subtree contributes nothing. `"comments"` stands
    /// for `<!-- -->` blocks.
    pub drop_elements: BTreeSet<String>,
    /// Elements whose start and end force a line break.
    pub block_tags: BTreeSet<String>,
    /// Lines with a larger share of characters inside `<a>` are dropped.
    pub max_link_density: f64,
    /// Lines with fewer words than this are dropped if they contain any link text.
    pub min_line_words: usize,
    /// Whole lines (case-insensitive) treated as navigation chrome.
    pub nav_lexicon: Vec<String>,
    /// Set to false to keep every non-empty line (WET-style output).
    pub boilerplate_filter: bool,
}

const DEFAULT_DROP: &[&str] = &["script", "style", "noscript", "iframe", "svg", "comments"];
const DEFAULT_BLOCKS: &[&str] = &[
    "p", "div", "li", "br", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "ul", "ol", "table",
    "section", "article", "header", "footer", "nav", "aside", "main", "blockquote", "pre",
    "title", "form", "dd", "dt", "hr", "figcaption",
];
const DEFAULT_NAV: &[&str] = &[
    "skip to content",
    "skip to navigation",
    "log in",
    "sign in",
    "sign up",
    "log in sign up",
    "subscribe",
    "subscribe now",
    "advertisement",
    "share this page",
    "share",
    "site map",
    "site index",
    "site index navigation",
    "site navigation",
    "site search navigation",
    "site information navigation",
    "privacy policy",
    "terms of service",
    "cookie policy",
    "loading...",
    "add a comment",
    "add a comment |",
    "share|improve this question",
    "share|improve this answer",
];

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            drop_elements: DEFAULT_DROP.iter().map(|s| s.to_string()).collect(),
            block_tags: DEFAULT_BLOCKS.iter().map(|s| s.to_string()).collect(),
            max_link_density: 0.5,
            min_line_words: 3,
            nav_lexicon: DEFAULT_NAV.iter().map(|s| s.to_string()).collect(),
            boilerplate_filter: true,
        }
    }
}

impl ExtractConfig {
    /// WET-like settings: scripts and styles dropped, nothing trimmed.
    pub fn full_text() -> Self {
        ExtractConfig {
            drop_elements: ["script", "style", "comments"].iter().map(|s| s.to_string()).collect(),
            boilerplate_filter: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.max_link_density) {
            return Err(format!("max_link_density {} not in [0,1]", self.max_link_density));
        }
        if let Some(t) = self.drop_elements.intersection(&self.block_tags).next() {
            return Err(format!("tag {t:?} is both dropped and a block tag"));
        }
        Ok(())
    }
}

#[derive(Default)]
struct Line {
    text: String,
    link_chars: usize,
    chars: usize,
    pending_space: bool,
}

struct Builder {
    lines: Vec<Line>,
    cur: Line,
}

impl Builder {
    fn new() -> Self {
        Builder {
            lines: Vec::new(),
            cur: Line::default(),
        }
    }

    fn push_char(&mut self, c: char, in_link: bool) {
        if c == '\n' {
            self.break_line();
            return;
        }
        if c.is_whitespace() {
            if !self.cur.text.is_empty() {
                self.cur.pending_space = true;
            }
            return;
        }
        if self.cur.pending_space {
            self.cur.text.push(' ');
            self.cur.pending_space = false;
        }
        self.cur.text.push(c);
        self.cur.chars += 1;
        if in_link {
            self.cur.link_chars += 1;
        }
    }

    fn break_line(&mut self) {
        if !self.cur.text.is_empty() {
            self.lines.push(std::mem::take(&mut self.cur));
        } else {
            self.cur = Line::default();
        }
    }

    fn finish(mut self) -> Vec<Line> {
        self.break_line();
        self.lines
    }
}

fn decode_entity(s: &str) -> Option<(char, usize)> {
    // s starts right after '&'
    let end = s.char_indices().take(12).find(|&(_, c)| c == ';')?.0;
    let name = &s[..end];
    let c = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" | "#39" => '\'',
        "nbsp" => ' ',
        "mdash" => '—',
        "ndash" => '–',
        "hellip" => '…',
        "copy" => '©',
        "raquo" => '»',
        "laquo" => '«',
        "rsquo" => '’',
        "lsquo" => '‘',
        "rdquo" => '”',
        "ldquo" => '“',
        _ => {
            let num = name.strip_prefix('#')?;
            let code = if let Some(hex) = num.strip_prefix(['x', 'X']) {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                num.parse::<u32>().ok()?
            };
            char::from_u32(code)?
        }
    };
    Some((c, end + 1))
}

struct Tag {
    name: String,
    closing: bool,
    self_closing: bool,
    /// byte length of the whole tag including `<` and `>`
    len: usize,
}

/// Parses a tag at the start of `s` (which begins with '<'). Returns `None`
/// when the '<' does not start a tag and should be treated as text.
fn parse_tag(s: &str) -> Option<Tag> {
    let bytes = s.as_bytes();
    let mut i = 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let name_start = i;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-' || bytes[i] == b':') {
        i += 1;
    }
    if i == name_start || !bytes[name_start].is_ascii_alphabetic() {
        return None;
    }
    let name = s[name_start..i].to_ascii_lowercase();
    let mut quote: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        match quote {
            Some(q) if b == q => quote = None,
            Some(_) => {}
            None if b == b'"' || b == b'\'' => quote = Some(b),
            None if b == b'>' => {
                let self_closing = i > 0 && bytes[i - 1] == b'/';
                return Some(Tag {
                    name,
                    closing,
                    self_closing,
                    len: i + 1,
                });
            }
            None => {}
        }
        i += 1;
    }
    // unterminated tag: swallow the rest
    Some(Tag {
        name,
        closing,
        self_closing: false,
        len: s.len(),
    })
}

/// Finds `</name` (ASCII case-insensitive) at or after `from`.
fn find_close(html: &str, from: usize, name: &str) -> Option<usize> {
    let hay = html.as_bytes();
    let needle_len = name.len() + 2;
    let mut i = from;
    while i + needle_len <= hay.len() {
        if hay[i] == b'<'
            && hay[i + 1] == b'/'
            && hay[i + 2..i + needle_len].eq_ignore_ascii_case(name.as_bytes())
        {
            return Some(i);
        }
        i += 1;
    }
    None
}

const VOID: &[&str] = &["br", "hr", "img", "meta", "link", "input", "wbr", "source", "area", "col"];

/// Elements whose content is not parsed for tags.
const RAW_TEXT: &[&str] = &["script", "style"];

struct Open {
    name: String,
    dropped: bool,
}

/// Open-element stack. Text is suppressed while any dropped element is open.
struct Stack {
    open: Vec<Open>,
    dropped: usize,
    links: usize,
}

impl Stack {
    fn push(&mut self, name: &str, dropped: bool) {
        self.dropped += usize::from(dropped);
        self.links += usize::from(name == "a");
        self.open.push(Open { name: name.to_string(), dropped });
    }

    /// Pops up to and including the nearest open `name`; stray closes are ignored.
    fn close(&mut self, name: &str) {
        if let Some(pos) = self.open.iter().rposition(|o| o.name == name) {
            for o in self.open.drain(pos..) {
                self.dropped -= usize::from(o.dropped);
                self.links -= usize::from(o.name == "a");
            }
        }
    }

    fn suppressed(&self) -> bool {
        self.dropped > 0
    }
}

fn scan(html: &str, cfg: &ExtractConfig) -> Vec<Line> {
    let mut out = Builder::new();
    let mut stack = Stack { open: Vec::new(), dropped: 0, links: 0 };
    let drop_comments = cfg.drop_elements.contains("comments");
    let mut i = 0;
    while i < html.len() {
        let rest = &html[i..];
        if rest.starts_with("<!--") {
            let end = rest[4..].find("-->").map(|p| p + 7).unwrap_or(rest.len());
            if !drop_comments && !stack.suppressed() {
                // comment bodies are not text either way; only the boundary matters
                out.push_char(' ', false);
            }
            i += end;
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            i += rest.find('>').map(|p| p + 1).unwrap_or(rest.len());
            continue;
        }
        if rest.starts_with('<') {
            if let Some(tag) = parse_tag(rest) {
                i += tag.len;
                let name = tag.name.as_str();
                let dropped = cfg.drop_elements.contains(name);
                if tag.closing {
                    stack.close(name);
                } else if RAW_TEXT.contains(&name) && !tag.self_closing {
                    let end = find_close(html, i, name).unwrap_or(html.len());
                    if !dropped && !stack.suppressed() {
                        let in_link = stack.links > 0;
                        html[i..end].chars().for_each(|c| out.push_char(c, in_link));
                    }
                    i = end;
                    continue;
                } else if !tag.self_closing && !VOID.contains(&name) {
                    stack.push(name, dropped);
                }
                if stack.suppressed() || dropped {
                    continue;
                }
                if cfg.block_tags.contains(name) {
                    out.break_line();
                } else if matches!(name, "td" | "th" | "span" | "img") {
                    out.push_char(' ', false);
                }
                continue;
            }
        }
        let c = rest.chars().next().unwrap();
        let (c, used) = match c {
            '&' => decode_entity(&rest[1..]).map_or(('&', 1), |(d, n)| (d, n + 1)),
            c => (c, c.len_utf8()),
        };
        if !stack.suppressed() {
            out.push_char(c, stack.links > 0);
        }
        i += used;
    }
    out.finish()
}

fn is_boilerplate(line: &Line, cfg: &ExtractConfig) -> bool {
    if line.chars > 0 && line.link_chars as f64 / line.chars as f64 > cfg.max_link_density {
        return true;
    }
    let words = line.text.split_whitespace().count();
    if words < cfg.min_line_words && line.link_chars > 0 {
        return true;
    }
    let lowered = line.text.trim().to_lowercase();
    cfg.nav_lexicon.iter().any(|entry| lowered == entry.to_lowercase())
}

/// Extracts readable text from an HTML page. Never fails.
pub fn extract_text(html: &str, cfg: &ExtractConfig) -> String {
    let lines = scan(html, cfg);
    let kept: Vec<&str> = lines
        .iter()
        .filter(|l| !cfg.boilerplate_filter || !is_boilerplate(l, cfg))
        .map(|l| l.text.trim())
        .filter(|t| !t.is_empty())
        .collect();
    kept.join("\n")
}

/// All text nodes of the page, the way a WET record would carry them.
pub fn full_text(html: &str) -> String {
    extract_text(html, &ExtractConfig::full_text())
}

/// Token count of `extracted` over the token count of every text node in
/// `raw`. Zero when `raw` has no tokens.
pub fn extraction_ratio(raw: &str, extracted: &str, tok: &Tokenizer) -> f64 {
    let denom = tok.count(&full_text(raw));
    if denom == 0 {
        return 0.0;
    }
    tok.count(extracted) as f64 / denom as f64
}
