use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Thread-safe tally of linear solves, keyed by a label such as `"state"`
/// or `"prior"`.
///
/// Counts only grow; [`SolveLedger::reset`] is the one way to clear them.
#[derive(Debug, Default)]
pub struct SolveLedger {
    counts: Mutex<BTreeMap<String, u64>>,
}

impl SolveLedger {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn record(&self, tag: &str) {
        self.record_n(tag, 1);
    }

    pub fn record_n(&self, tag: &str, n: u64) {
        if n == 0 {
            return;
        }
        let mut counts = self.counts.lock().expect("ledger lock poisoned");
        *counts.entry(tag.to_string()).or_insert(0) += n;
    }

    pub fn count(&self, tag: &str) -> u64 {
        let counts = self.counts.lock().expect("ledger lock poisoned");
        counts.get(tag).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        let counts = self.counts.lock().expect("ledger lock poisoned");
        counts.values().sum()
    }

    pub fn snapshot(&self) -> BTreeMap<String, u64> {
        self.counts.lock().expect("ledger lock poisoned").clone()
    }

    pub fn reset(&self) {
        self.counts.lock().expect("ledger lock poisoned").clear();
    }

    /// One `label=count` pair per line, sorted by label.
    pub fn report(&self) -> String {
        self.snapshot()
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn concurrent_increments_are_not_lost() {
        let ledger = SolveLedger::new();
        (0..1000).into_par_iter().for_each(|i| {
            ledger.record(if i % 2 == 0 { "a" } else { "b" });
        });
        assert_eq!(ledger.count("a"), 500);
        assert_eq!(ledger.count("b"), 500);
        assert_eq!(ledger.total(), 1000);
        ledger.reset();
        assert_eq!(ledger.total(), 0);
    }
}
