use std::collections::HashMap;

use crate::transition::System;
use crate::treebank::{Token, Tree};

use super::ModelError;

pub const UNK: &str = "<unk>";

/// A dense string index. Entry 0 is reserved for unknown items where the table has one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Index {
    items: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Index {
    pub fn new(items: Vec<String>) -> Result<Self, ModelError> {
        let mut ids = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if ids.insert(item.clone(), i).is_some() {
                return Err(ModelError::Format(format!(
                    "duplicate vocabulary entry {item:?}"
                )));
            }
        }
        Ok(Index { items, ids })
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.ids.get(item).copied()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Embedding-table rows for one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WordIds {
    pub word: usize,
    pub pos: usize,
    /// Row of the pretrained table; 0 is the all-zero row for words it lacks.
    pub pretrained: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    /// Training words, `UNK` first.
    pub words: Index,
    /// Training frequency of each word (0 for `UNK`).
    pub word_counts: Vec<usize>,
    /// POS tags, `UNK` first.
    pub pos: Index,
    /// Plain nonterminal labels; these define the action inventory.
    pub labels: Vec<String>,
    /// Rows of the nonterminal embedding table: plain labels, plus `X*` for bottom-up.
    pub nonterminals: Index,
    /// Words of the pretrained table; row `i + 1` belongs to `pretrained.items()[i]`.
    pub pretrained: Index,
}

fn collect_labels(tree: &Tree, out: &mut Vec<String>) {
    if let Tree::Node { label, children } = tree {
        out.push(label.clone());
        children.iter().for_each(|c| collect_labels(c, out));
    }
}

impl Vocabulary {
    pub fn build(
        corpus: &[(Tree, Vec<Token>)],
        system: System,
        pretrained_words: Vec<String>,
    ) -> Result<Self, ModelError> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut word_list: Vec<String> = vec![UNK.to_string()];
        let mut pos_list: Vec<String> = vec![UNK.to_string()];
        let mut labels = Vec::new();
        for (tree, tokens) in corpus {
            for t in tokens {
                let c = counts.entry(&t.form).or_insert(0);
                if *c == 0 {
                    word_list.push(t.form.clone());
                }
                *c += 1;
                if !pos_list.contains(&t.pos) {
                    pos_list.push(t.pos.clone());
                }
            }
            collect_labels(tree, &mut labels);
        }
        word_list[1..].sort();
        pos_list[1..].sort();
        labels.sort();
        labels.dedup();
        let word_counts = word_list
            .iter()
            .map(|w| counts.get(w.as_str()).copied().unwrap_or(0))
            .collect();
        Self::from_parts(
            word_list,
            word_counts,
            pos_list,
            labels,
            system,
            pretrained_words,
        )
    }

    pub fn from_parts(
        words: Vec<String>,
        word_counts: Vec<usize>,
        pos: Vec<String>,
        labels: Vec<String>,
        system: System,
        pretrained_words: Vec<String>,
    ) -> Result<Self, ModelError> {
        if words.first().map(String::as_str) != Some(UNK)
            || pos.first().map(String::as_str) != Some(UNK)
        {
            return Err(ModelError::Format(
                "word and POS tables must start with the unknown entry".into(),
            ));
        }
        if word_counts.len() != words.len() {
            return Err(ModelError::Format(
                "word count table has the wrong length".into(),
            ));
        }
        let mut nts = labels.clone();
        if system.binarized() {
            nts.extend(labels.iter().map(|l| format!("{l}*")));
        }
        Ok(Vocabulary {
            words: Index::new(words)?,
            word_counts,
            pos: Index::new(pos)?,
            nonterminals: Index::new(nts)?,
            labels,
            pretrained: Index::new(pretrained_words)?,
        })
    }

    pub fn word_ids(&self, token: &Token) -> WordIds {
        WordIds {
            word: self.words.get(&token.form).unwrap_or(0),
            pos: self.pos.get(&token.pos).unwrap_or(0),
            pretrained: self.pretrained.get(&token.form).map_or(0, |i| i + 1),
        }
    }

    pub fn is_singleton(&self, word_id: usize) -> bool {
        self.word_counts[word_id] == 1
    }

    /// Embedding row of a nonterminal; `temporary` selects the `X*` row.
    pub fn nonterminal_id(&self, label: &str, temporary: bool) -> Result<usize, ModelError> {
        let found = if temporary {
            self.nonterminals.get(&format!("{label}*"))
        } else {
            self.nonterminals.get(label)
        };
        found.ok_or_else(|| ModelError::UnknownLabel(label.to_string()))
    }
}

/// Pretrained word vectors, one `word v1 ... vD` line each.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub words: Vec<String>,
    /// Row-major `words.len() × dim`.
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl Pretrained {
    pub fn parse(text: &str, dim: usize) -> Result<Self, ModelError> {
        let mut words = Vec::new();
        let mut vectors = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| ModelError::Embeddings {
                line: i + 1,
                message,
            };
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else {
                continue;
            };
            let values = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| err(format!("bad number {f:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != dim {
                return Err(err(format!(
                    "expected {dim} values, found {}",
                    values.len()
                )));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(err(format!("non-finite value {v}")));
            }
            if !seen.insert(word.to_string()) {
                // First occurrence wins, as in common embedding readers.
                continue;
            }
            words.push(word.to_string());
            vectors.extend(values);
        }
        Ok(Pretrained {
            words,
            vectors,
            dim,
        })
    }
}
