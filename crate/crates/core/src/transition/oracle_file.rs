//! Oracle files: one block per sentence, blank-line separated. The first line lists the
//! tokens as `form_pos`; each following line holds one action in canonical spelling.

use crate::treebank::Token;

use super::{Action, TransitionError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleEntry {
    pub tokens: Vec<Token>,
    pub actions: Vec<Action>,
}

pub fn write_oracle_file(entries: &[OracleEntry]) -> String {
    let mut out = String::new();
    for (i, entry) in entries.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let words: Vec<String> = entry
            .tokens
            .iter()
            .map(|t| format!("{}_{}", t.form, t.pos))
            .collect();
        out.push_str(&words.join(" "));
        out.push('\n');
        for action in &entry.actions {
            out.push_str(&action.to_string());
            out.push('\n');
        }
    }
    out
}

pub fn read_oracle_file(text: &str) -> Result<Vec<OracleEntry>, TransitionError> {
    let mut entries = Vec::new();
    let mut current: Option<OracleEntry> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            entries.extend(current.take());
            continue;
        }
        let err = |message: String| TransitionError::OracleFile {
            line: lineno + 1,
            message,
        };
        match &mut current {
            None => {
                let tokens = line
                    .split_whitespace()
                    .map(|w| {
                        let (form, pos) = w
                            .rsplit_once('_')
                            .ok_or_else(|| err(format!("token {w:?} is not form_pos")))?;
                        Token::new(form, pos).map_err(|e| err(e.to_string()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                current = Some(OracleEntry {
                    tokens,
                    actions: Vec::new(),
                });
            }
            Some(entry) => entry.actions.push(
                line.parse()
                    .map_err(|e: TransitionError| err(e.to_string()))?,
            ),
        }
    }
    entries.extend(current);
    Ok(entries)
}
