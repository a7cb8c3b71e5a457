use serde::{Deserialize, Serialize};

/// Outcome of one trace property over all the items it inspected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub checked: u64,
    pub failures: u64,
    /// The first few failures, human readable.
    pub examples: Vec<String>,
}

const MAX_EXAMPLES: usize = 5;

impl Check {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            checked: 0,
            failures: 0,
            examples: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// Counts one inspected item; `fail` is only evaluated when `ok` is false.
    pub fn record(&mut self, ok: bool, fail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(fail());
            }
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} ({} checked, {} failed)",
            self.name,
            if self.passed() { "pass" } else { "FAIL" },
            self.checked,
            self.failures
        )?;
        for e in &self.examples {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}
