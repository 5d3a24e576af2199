use super::{strip_function_tags, Token, Tree, TreebankError};

/// Options for [`read_trees_with`].
#[derive(Debug, Clone)]
pub struct ReadOptions {
    /// Cut nonterminal labels at the first `-` or `=` (`NP-SBJ` → `NP`).
    pub strip_function_tags: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            strip_function_tags: true,
        }
    }
}

#[derive(Debug)]
enum Sexp {
    Atom {
        text: String,
        line: usize,
        column: usize,
    },
    List {
        items: Vec<Sexp>,
        line: usize,
        column: usize,
    },
}

impl Sexp {
    fn position(&self) -> (usize, usize) {
        match self {
            Sexp::Atom { line, column, .. } | Sexp::List { line, column, .. } => (*line, *column),
        }
    }
}

fn error(line: usize, column: usize, message: impl Into<String>) -> TreebankError {
    TreebankError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_sexps(text: &str) -> Result<Vec<Sexp>, TreebankError> {
    // Open lists: (items, line, column).
    let mut open: Vec<(Vec<Sexp>, usize, usize)> = Vec::new();
    let mut top = Vec::new();
    let mut atom: Option<(String, usize, usize)> = None;
    let (mut line, mut column) = (1, 0);

    fn flush(
        atom: &mut Option<(String, usize, usize)>,
        open: &mut [(Vec<Sexp>, usize, usize)],
    ) -> Result<(), TreebankError> {
        if let Some((text, line, column)) = atom.take() {
            match open.last_mut() {
                Some((items, ..)) => items.push(Sexp::Atom { text, line, column }),
                None => {
                    return Err(error(
                        line,
                        column,
                        format!("token {text:?} outside brackets"),
                    ))
                }
            }
        }
        Ok(())
    }

    for c in text.chars() {
        if c == '\n' {
            line += 1;
            column = 0;
        } else {
            column += 1;
        }
        match c {
            '(' => {
                flush(&mut atom, &mut open)?;
                open.push((Vec::new(), line, column));
            }
            ')' => {
                flush(&mut atom, &mut open)?;
                let (items, l, col) = open
                    .pop()
                    .ok_or_else(|| error(line, column, "unbalanced ')'"))?;
                let list = Sexp::List {
                    items,
                    line: l,
                    column: col,
                };
                match open.last_mut() {
                    Some((parent, ..)) => parent.push(list),
                    None => top.push(list),
                }
            }
            c if c.is_whitespace() => flush(&mut atom, &mut open)?,
            c => match &mut atom {
                Some((text, ..)) => text.push(c),
                None => atom = Some((c.to_string(), line, column)),
            },
        }
    }
    flush(&mut atom, &mut open)?;
    if let Some((_, l, col)) = open.last() {
        return Err(error(*l, *col, "unbalanced '(' never closed"));
    }
    Ok(top)
}

fn unescape(s: &str) -> String {
    s.replace("-LRB-", "(").replace("-RRB-", ")")
}

fn escape(s: &str) -> String {
    s.replace('(', "-LRB-").replace(')', "-RRB-")
}

struct Builder<'a> {
    options: &'a ReadOptions,
    tokens: Vec<Token>,
}

impl Builder<'_> {
    fn build(&mut self, sexp: Sexp) -> Result<Tree, TreebankError> {
        let (line, column) = sexp.position();
        let mut items = match sexp {
            Sexp::Atom { text, .. } => {
                return Err(error(
                    line,
                    column,
                    format!("bare token {text:?} outside a preterminal"),
                ))
            }
            Sexp::List { items, .. } => items,
        };
        if items.is_empty() {
            return Err(error(line, column, "empty constituent ()"));
        }
        let label = match items.remove(0) {
            Sexp::Atom { text, .. } => text,
            Sexp::List { .. } => return Err(error(line, column, "unlabeled constituent")),
        };
        if items.is_empty() {
            return Err(error(line, column, format!("empty constituent ({label})")));
        }
        if let [Sexp::Atom { text, .. }] = items.as_slice() {
            let token = Token::new(unescape(text), unescape(&label))
                .map_err(|e| error(line, column, e.to_string()))?;
            self.tokens.push(token);
            return Ok(Tree::Leaf(self.tokens.len() - 1));
        }
        let label = if self.options.strip_function_tags {
            strip_function_tags(&label).to_string()
        } else {
            label
        };
        let children = items
            .into_iter()
            .map(|item| self.build(item))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tree::Node { label, children })
    }
}

/// Reads every top-level bracketed tree in `text` with default options.
pub fn read_trees(text: &str) -> Result<Vec<(Tree, Vec<Token>)>, TreebankError> {
    read_trees_with(text, &ReadOptions::default())
}

pub fn read_trees_with(
    text: &str,
    options: &ReadOptions,
) -> Result<Vec<(Tree, Vec<Token>)>, TreebankError> {
    let mut out = Vec::new();
    for sexp in parse_sexps(text)? {
        let (line, column) = sexp.position();
        // Treebank files often wrap each tree in an unlabeled outer pair: `( (S ...) )`.
        let sexp = match sexp {
            Sexp::List { mut items, .. } if matches!(items.first(), Some(Sexp::List { .. })) => {
                if items.len() != 1 {
                    return Err(error(
                        line,
                        column,
                        "unlabeled outer bracket with several children",
                    ));
                }
                items.remove(0)
            }
            other => other,
        };
        let mut builder = Builder {
            options,
            tokens: Vec::new(),
        };
        let tree = builder.build(sexp)?;
        out.push((tree, builder.tokens));
    }
    Ok(out)
}

/// Renders one tree on a single line, e.g. `(S (NP (DT The) (NN boy)) (VP (VBZ sleeps)))`.
pub fn write_tree<L: std::fmt::Display>(tree: &Tree<L>, tokens: &[Token]) -> String {
    let mut out = String::new();
    write_into(tree, tokens, &mut out);
    out
}

fn write_into<L: std::fmt::Display>(tree: &Tree<L>, tokens: &[Token], out: &mut String) {
    match tree {
        Tree::Leaf(i) => {
            let token = &tokens[*i];
            out.push('(');
            out.push_str(&escape(&token.pos));
            out.push(' ');
            out.push_str(&escape(&token.form));
            out.push(')');
        }
        Tree::Node { label, children } => {
            out.push('(');
            out.push_str(&label.to_string());
            for child in children {
                out.push(' ');
                write_into(child, tokens, out);
            }
            out.push(')');
        }
    }
}

/// One tree per line.
pub fn write_trees(trees: &[(Tree, Vec<Token>)]) -> String {
    let mut out = String::new();
    for (tree, tokens) in trees {
        out.push_str(&write_tree(tree, tokens));
        out.push('\n');
    }
    out
}
