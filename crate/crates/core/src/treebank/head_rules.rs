use std::collections::HashMap;

use super::TreebankError;

/// Order in which children are searched for a head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Scan children from the leftmost one.
    LeftToRight,
    /// Scan children from the rightmost one.
    RightToLeft,
}

/// One search pass: for each priority label in order, scan children in `direction` and take
/// the first match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadDirective {
    pub direction: Direction,
    pub priorities: Vec<String>,
}

/// Head-finding table keyed by parent label.
///
/// A label may carry several directives (one per line in the text format); they are tried in
/// order. When none matches, the first child in the direction of the first directive is the
/// head. Labels without an entry use `default`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadRules {
    rules: HashMap<String, Vec<HeadDirective>>,
    default: HeadDirective,
}

/// Collins-style head table for English treebank labels.
const COLLINS: &str = "\
ADJP left NNS QP NN $ ADVP JJ VBN VBG ADJP JJR NP JJS DT FW RBR RBS SBAR RB
ADVP right RB RBR RBS FW ADVP TO CD JJR JJ IN NP JJS NN
CONJP right CC RB IN
FRAG right
INTJ left
LST right LS :
NAC left NN NNS NNP NNPS NP NAC EX $ CD QP PRP VBG JJ JJS JJR ADJP FW
NP right NN NNP NNPS NNS NX POS JJR
NP left NP
NP right $ ADJP PRN
NP right CD
NP right JJ JJS RB QP
NX left
PP right IN TO VBG VBN RP FW
PRN left
PRT right RP
QP left $ IN NNS NN JJ RB DT CD NCD QP JJR JJS
RRC right VP NP ADVP ADJP PP
S left TO IN VP S SBAR ADJP UCP NP
SBAR left WHNP WHPP WHADVP WHADJP IN DT S SQ SINV SBAR FRAG
SBARQ left SQ S SINV SBARQ FRAG
SINV left VBZ VBD VBP VB MD VP S SINV ADJP NP
SQ left VBZ VBD VBP VB MD VP SQ
UCP right
VP left TO VBD VBN MD VBZ VB VBG VBP VP ADJP NN NNS NP
WHADJP left CC WRB JJ ADJP
WHADVP right CC WRB
WHNP left WDT WP WP$ WHADJP WHPP WHNP
WHPP right IN TO FW
X right
";

impl Default for HeadRules {
    /// The shipped English table.
    fn default() -> Self {
        HeadRules::parse(COLLINS).expect("built-in head rules parse")
    }
}

impl HeadRules {
    /// A table with no entries: every node's head is its rightmost child.
    pub fn rightmost() -> Self {
        HeadRules {
            rules: HashMap::new(),
            default: HeadDirective {
                direction: Direction::RightToLeft,
                priorities: Vec::new(),
            },
        }
    }

    /// Parses the text format: one `LABEL left|right CHILD...` directive per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, TreebankError> {
        let mut table = HeadRules::rightmost();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let label = fields.next().unwrap_or_default();
            let direction = match fields.next() {
                Some("left") => Direction::LeftToRight,
                Some("right") => Direction::RightToLeft,
                other => {
                    return Err(TreebankError::HeadRules {
                        line: lineno + 1,
                        message: format!("expected direction left|right, found {other:?}"),
                    })
                }
            };
            table
                .rules
                .entry(label.to_string())
                .or_default()
                .push(HeadDirective {
                    direction,
                    priorities: fields.map(str::to_string).collect(),
                });
        }
        Ok(table)
    }

    pub fn directives(&self, label: &str) -> &[HeadDirective] {
        self.rules
            .get(label)
            .map(Vec::as_slice)
            .unwrap_or(std::slice::from_ref(&self.default))
    }

    /// Index of the head among `children` (given by their labels; POS tags for preterminals).
    pub fn find_head(&self, label: &str, children: &[&str]) -> usize {
        assert!(!children.is_empty(), "head of a childless node");
        let directives = self.directives(label);
        for directive in directives {
            for wanted in &directive.priorities {
                let found = match directive.direction {
                    Direction::LeftToRight => children.iter().position(|c| c == wanted),
                    Direction::RightToLeft => children.iter().rposition(|c| c == wanted),
                };
                if let Some(i) = found {
                    return i;
                }
            }
        }
        match directives[0].direction {
            Direction::LeftToRight => 0,
            Direction::RightToLeft => children.len() - 1,
        }
    }
}
