//! Plain-text graph files: a header line `n t`, then one `u v` edge per line.
//! Lines starting with `#` and blank lines are ignored.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{Digraph, GraphError};
use crate::Label;

impl Digraph {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n(), self.target());
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").expect("writing to a String cannot fail");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, GraphError> {
        let mut header: Option<(usize, Label)> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let pair = parse_pair(line, idx + 1)?;
            if header.is_none() {
                header = Some(pair);
            } else {
                edges.push(pair);
            }
        }
        let (n, t) = header.ok_or(GraphError::Parse {
            line: 0,
            msg: "missing `n t` header".into(),
        })?;
        Digraph::new(n, t, edges)
    }
}

impl FromStr for Digraph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Digraph::from_text(s)
    }
}

fn parse_pair(line: &str, lineno: usize) -> Result<(usize, usize), GraphError> {
    let err = |msg: String| GraphError::Parse { line: lineno, msg };
    let mut fields = line.split_whitespace();
    let mut next = || -> Result<usize, GraphError> {
        let tok = fields
            .next()
            .ok_or_else(|| err("expected two integers".into()))?;
        tok.parse()
            .map_err(|_| err(format!("`{tok}` is not a non-negative integer")))
    };
    let a = next()?;
    let b = next()?;
    if fields.next().is_some() {
        return Err(err("trailing fields".into()));
    }
    Ok((a, b))
}
