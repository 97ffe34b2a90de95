use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::ModelResponse;
use crate::agents::AgentKind;
use crate::context::ReviewPass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLedgerEntry {
    pub agent: AgentKind,
    pub pass: ReviewPass,
    pub calls: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Running token totals per (agent, pass).
#[derive(Debug, Default)]
pub struct UsageLedger {
    rows: Mutex<BTreeMap<(AgentKind, ReviewPass), UsageLedgerEntry>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one response and returns the updated row.
    pub fn record(&self, resp: &ModelResponse, agent: AgentKind, pass: ReviewPass) -> UsageLedgerEntry {
        let mut rows = self.rows.lock().expect("ledger poisoned");
        let row = rows.entry((agent, pass)).or_insert(UsageLedgerEntry {
            agent,
            pass,
            calls: 0,
            input_tokens: 0,
            output_tokens: 0,
        });
        row.calls += 1;
        row.input_tokens += resp.input_tokens;
        row.output_tokens += resp.output_tokens;
        *row
    }

    pub fn output_tokens(&self, agent: AgentKind, pass: ReviewPass) -> u64 {
        self.rows
            .lock()
            .expect("ledger poisoned")
            .get(&(agent, pass))
            .map_or(0, |r| r.output_tokens)
    }

    /// Rows in agent, then pass, order.
    pub fn rows(&self) -> Vec<UsageLedgerEntry> {
        self.rows.lock().expect("ledger poisoned").values().copied().collect()
    }
}

pub fn record_usage(ledger: &UsageLedger, resp: &ModelResponse, agent: AgentKind, pass: ReviewPass) -> UsageLedgerEntry {
    ledger.record(resp, agent, pass)
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;

    fn resp(out: u64) -> ModelResponse {
        ModelResponse {
            text: String::new(),
            input_tokens: 1,
            output_tokens: out,
            latency: Duration::ZERO,
        }
    }

    #[test]
    fn totals_accumulate() {
        let l = UsageLedger::new();
        record_usage(&l, &resp(100), AgentKind::Security, ReviewPass::SinglePass);
        let row = record_usage(&l, &resp(50), AgentKind::Security, ReviewPass::SinglePass);
        assert_eq!(row.output_tokens, 150);
        assert_eq!(l.output_tokens(AgentKind::Security, ReviewPass::SinglePass), 150);
        assert_eq!(l.output_tokens(AgentKind::Error, ReviewPass::Reflection), 0);
        assert_eq!(l.rows().len(), 1);
    }
}
