//! Text format: a header `kind n k length`, then exactly `length` lines, one
//! per set, listing members separated by whitespace (an empty line is an
//! empty set).

use std::fmt::Write as _;

use super::{SelectorError, SelectorFamily, SelectorKind};
use crate::Label;

impl SelectorFamily {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {}\n",
            self.kind(),
            self.n(),
            self.k(),
            self.length()
        );
        for set in self.sets() {
            let line: Vec<String> = set.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).expect("writing to a String cannot fail");
        }
        out
    }

    /// Parses the text format. Missing trailing lines count as empty sets.
    /// The result is unverified regardless of how it was produced.
    pub fn from_text(text: &str) -> Result<Self, SelectorError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| SelectorError::Parse("missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [kind, n, k, length] = fields[..] else {
            return Err(SelectorError::Parse(format!(
                "header `{header}` is not `kind n k length`"
            )));
        };
        let kind: SelectorKind = kind.parse()?;
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| SelectorError::Parse(format!("`{s}` is not a non-negative integer")))
        };
        let (n, k, length) = (num(n)?, num(k)?, num(length)?);
        let mut sets: Vec<Vec<Label>> = Vec::with_capacity(length);
        for line in lines.by_ref().take(length) {
            sets.push(line.split_whitespace().map(num).collect::<Result<_, _>>()?);
        }
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(SelectorError::Parse(format!(
                "more than {length} set lines"
            )));
        }
        sets.resize(length, Vec::new());
        SelectorFamily::from_sets(kind, n, k, &sets)
    }
}
