//! Labeled bracket scoring in the style of evalb, with breakdowns by label, sentence length
//! and span length.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::treebank::{strip_function_tags, Token, Tree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{gold} gold trees but {pred} predicted trees")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("token counts differ for sentences {0:?}")]
    TokenMismatch(Vec<usize>),
}

/// Labels listed first in per-label tables, in this order.
pub const HEADLINE_LABELS: [&str; 9] =
    ["NP", "VP", "S", "PP", "SBAR", "ADVP", "ADJP", "WHNP", "QP"];

/// Span lengths at or above this share one bucket.
pub const SPAN_CAP: usize = 14;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalConfig {
    /// Tokens with these POS tags are removed before spans are computed.
    pub delete_pos: HashSet<String>,
    /// A root bracket with one of these labels is not scored.
    pub root_labels: HashSet<String>,
    /// Score PRT as ADVP.
    pub advp_prt: bool,
    pub strip_function_tags: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            delete_pos: ["''", "``", ".", ":", ","]
                .into_iter()
                .map(String::from)
                .collect(),
            root_labels: ["TOP", "ROOT"].into_iter().map(String::from).collect(),
            advp_prt: false,
            strip_function_tags: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bracket {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl Bracket {
    pub fn span_len(&self) -> usize {
        self.end - self.start
    }
}

/// One bracket per scored internal node, spans counted over the tokens that survive
/// punctuation deletion. Brackets left empty by the deletion are dropped.
pub fn brackets(tree: &Tree, tokens: &[Token], config: &EvalConfig) -> Vec<Bracket> {
    let mut position = Vec::with_capacity(tokens.len() + 1);
    let mut kept = 0;
    for t in tokens {
        position.push(kept);
        if !config.delete_pos.contains(&t.pos) {
            kept += 1;
        }
    }
    position.push(kept);

    fn walk(
        tree: &Tree,
        is_root: bool,
        next_leaf: &mut usize,
        position: &[usize],
        config: &EvalConfig,
        out: &mut Vec<Bracket>,
    ) {
        let Tree::Node { label, children } = tree else {
            *next_leaf += 1;
            return;
        };
        let first = *next_leaf;
        for c in children {
            walk(c, false, next_leaf, position, config, out);
        }
        let mut label = if config.strip_function_tags {
            strip_function_tags(label)
        } else {
            label
        };
        if config.advp_prt && label == "PRT" {
            label = "ADVP";
        }
        if is_root && config.root_labels.contains(label) {
            return;
        }
        let (start, end) = (position[first], position[*next_leaf]);
        if start < end {
            out.push(Bracket {
                label: label.to_string(),
                start,
                end,
            });
        }
    }

    let mut out = Vec::new();
    let mut next_leaf = 0;
    walk(tree, true, &mut next_leaf, &position, config, &mut out);
    out
}

/// Gold, predicted and matched bracket counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub gold: usize,
    pub pred: usize,
    pub correct: usize,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

impl Counts {
    pub fn recall(&self) -> f64 {
        percent(self.correct, self.gold)
    }

    pub fn precision(&self) -> f64 {
        percent(self.correct, self.pred)
    }

    pub fn f1(&self) -> f64 {
        let (r, p) = (self.recall(), self.precision());
        if r + p > 0.0 {
            2.0 * r * p / (r + p)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: Counts) {
        self.gold += other.gold;
        self.pred += other.pred;
        self.correct += other.correct;
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub total: Counts,
    pub sentences: usize,
    /// Sentences whose bracket multisets match exactly.
    pub exact_match: usize,
    pub per_label: BTreeMap<String, Counts>,
    /// Keyed by the upper end of the length bin: 10 covers lengths 1 to 10, 20 covers 11 to 20.
    pub by_length: BTreeMap<usize, Counts>,
    /// Keyed by span length; [`SPAN_CAP`] collects every longer span.
    pub by_span: BTreeMap<usize, Counts>,
}

pub fn length_bin(len: usize) -> usize {
    len.div_ceil(10).max(1) * 10
}

fn multiset(bs: Vec<Bracket>) -> HashMap<Bracket, usize> {
    let mut m = HashMap::new();
    for b in bs {
        *m.entry(b).or_insert(0) += 1;
    }
    m
}

impl EvalReport {
    /// Scores one sentence pair and returns its report.
    pub fn sentence(gold: &Tree, pred: &Tree, tokens: &[Token], config: &EvalConfig) -> Self {
        let g = multiset(brackets(gold, tokens, config));
        let p = multiset(brackets(pred, tokens, config));
        let mut report = EvalReport {
            sentences: 1,
            exact_match: usize::from(g == p),
            ..Self::default()
        };
        let mut update = |b: &Bracket, c: Counts| {
            report.total.add(c);
            report.per_label.entry(b.label.clone()).or_default().add(c);
            report
                .by_span
                .entry(b.span_len().min(SPAN_CAP))
                .or_default()
                .add(c);
        };
        for (b, &n) in &g {
            let m = p.get(b).copied().unwrap_or(0);
            update(
                b,
                Counts {
                    gold: n,
                    pred: 0,
                    correct: n.min(m),
                },
            );
        }
        for (b, &n) in &p {
            update(
                b,
                Counts {
                    gold: 0,
                    pred: n,
                    correct: 0,
                },
            );
        }
        report
            .by_length
            .insert(length_bin(tokens.len()), report.total);
        report
    }

    /// Report for a sentence the parser produced nothing for: every gold bracket is missed.
    pub fn unparsed(gold: &Tree, tokens: &[Token], config: &EvalConfig) -> Self {
        let mut report = EvalReport {
            sentences: 1,
            ..Self::default()
        };
        for b in brackets(gold, tokens, config) {
            let c = Counts {
                gold: 1,
                pred: 0,
                correct: 0,
            };
            report.total.add(c);
            report.per_label.entry(b.label.clone()).or_default().add(c);
            report
                .by_span
                .entry(b.span_len().min(SPAN_CAP))
                .or_default()
                .add(c);
        }
        report
            .by_length
            .insert(length_bin(tokens.len()), report.total);
        report
    }

    pub fn merge(mut self, other: EvalReport) -> Self {
        self.total.add(other.total);
        self.sentences += other.sentences;
        self.exact_match += other.exact_match;
        for (maps, theirs) in [
            (&mut self.by_length, other.by_length),
            (&mut self.by_span, other.by_span),
        ] {
            for (k, c) in theirs {
                maps.entry(k).or_default().add(c);
            }
        }
        for (k, c) in other.per_label {
            self.per_label.entry(k).or_default().add(c);
        }
        self
    }

    pub fn lr(&self) -> f64 {
        self.total.recall()
    }

    pub fn lp(&self) -> f64 {
        self.total.precision()
    }

    pub fn f1(&self) -> f64 {
        self.total.f1()
    }

    /// Labels with the headline labels first, then the rest alphabetically.
    pub fn label_order(&self) -> Vec<&str> {
        let mut out: Vec<&str> = HEADLINE_LABELS
            .iter()
            .copied()
            .filter(|l| self.per_label.contains_key(*l))
            .collect();
        out.extend(
            self.per_label
                .keys()
                .map(String::as_str)
                .filter(|l| !HEADLINE_LABELS.contains(l)),
        );
        out
    }

    /// `key=value` lines: `LR`, `LP`, `F1`, `sentences`, `exact_match`,
    /// `per_label.<L>.f1`, `len_bin.<k>.f1`, `span_len.<k>.f1`.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        writeln!(s, "LR={:.2}", self.lr()).unwrap();
        writeln!(s, "LP={:.2}", self.lp()).unwrap();
        writeln!(s, "F1={:.2}", self.f1()).unwrap();
        writeln!(s, "sentences={}", self.sentences).unwrap();
        writeln!(s, "exact_match={}", self.exact_match).unwrap();
        for l in self.label_order() {
            writeln!(s, "per_label.{l}.f1={:.2}", self.per_label[l].f1()).unwrap();
        }
        for (k, c) in &self.by_length {
            writeln!(s, "len_bin.{k}.f1={:.2}", c.f1()).unwrap();
        }
        for (k, c) in &self.by_span {
            writeln!(s, "span_len.{k}.f1={:.2}", c.f1()).unwrap();
        }
        s
    }

    pub fn summary_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<14}{:>8}", "sentences", self.sentences).unwrap();
        writeln!(s, "{:<14}{:>8}", "exact match", self.exact_match).unwrap();
        writeln!(s, "{:<14}{:>8}", "gold brackets", self.total.gold).unwrap();
        writeln!(s, "{:<14}{:>8}", "test brackets", self.total.pred).unwrap();
        writeln!(s, "{:<14}{:>8}", "matched", self.total.correct).unwrap();
        writeln!(s, "{:<14}{:>8.2}", "LR", self.lr()).unwrap();
        writeln!(s, "{:<14}{:>8.2}", "LP", self.lp()).unwrap();
        writeln!(s, "{:<14}{:>8.2}", "F1", self.f1()).unwrap();
        s
    }

    fn table<K: std::fmt::Display>(title: &str, rows: impl Iterator<Item = (K, Counts)>) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<10}{:>8}{:>8}{:>8}{:>8}{:>8}{:>8}",
            title, "gold", "test", "match", "LR", "LP", "F1"
        )
        .unwrap();
        for (k, c) in rows {
            writeln!(
                s,
                "{:<10}{:>8}{:>8}{:>8}{:>8.2}{:>8.2}{:>8.2}",
                k.to_string(),
                c.gold,
                c.pred,
                c.correct,
                c.recall(),
                c.precision(),
                c.f1()
            )
            .unwrap();
        }
        s
    }

    pub fn label_table(&self) -> String {
        Self::table(
            "label",
            self.label_order()
                .into_iter()
                .map(|l| (l, self.per_label[l])),
        )
    }

    pub fn length_table(&self) -> String {
        Self::table(
            "length",
            self.by_length
                .iter()
                .map(|(k, c)| (format!("{}-{}", k - 9, k), *c)),
        )
    }

    pub fn span_table(&self) -> String {
        Self::table(
            "span",
            self.by_span.iter().map(|(k, c)| {
                let key = if *k == SPAN_CAP {
                    format!("{k}+")
                } else {
                    k.to_string()
                };
                (key, *c)
            }),
        )
    }

    /// Every table, aligned, separated by blank lines.
    pub fn to_text(&self) -> String {
        [
            self.summary_table(),
            self.label_table(),
            self.length_table(),
            self.span_table(),
        ]
        .join("\n")
    }
}

/// Scores predicted trees against gold trees; `tokens[i]` belongs to `gold[i]`.
pub fn score(
    gold: &[(Tree, Vec<Token>)],
    pred: &[Tree],
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    check_pairs(gold, pred)?;
    Ok(gold
        .iter()
        .zip(pred)
        .map(|((g, tokens), p)| EvalReport::sentence(g, p, tokens, config))
        .fold(EvalReport::default(), EvalReport::merge))
}

/// Checks that the lists pair up and every pair covers the same number of tokens.
pub fn check_pairs(gold: &[(Tree, Vec<Token>)], pred: &[Tree]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let bad: Vec<usize> = gold
        .iter()
        .zip(pred)
        .enumerate()
        .filter(|(_, ((g, tokens), p))| {
            g.num_leaves() != tokens.len() || p.num_leaves() != tokens.len()
        })
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(EvalError::TokenMismatch(bad))
    }
}
