use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{StageName, ValidateError};
use crate::model::SCHEMA_VERSION;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub stage: StageName,
    pub entered: u64,
    pub dropped: u64,
    pub drop_reasons: BTreeMap<String, u64>,
}

/// Per-stage accept/drop accounting for one chain run (or a merge of several).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub schema_version: u32,
    pub stages: Vec<StageCounts>,
    pub accepted: u64,
}

impl Default for FilterReport {
    fn default() -> Self {
        Self::empty()
    }
}

impl FilterReport {
    /// All seven stages, every count zero.
    pub fn empty() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            stages: StageName::ORDER
                .iter()
                .map(|s| StageCounts { stage: *s, entered: 0, dropped: 0, drop_reasons: BTreeMap::new() })
                .collect(),
            accepted: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.stages.first().map_or(0, |s| s.entered)
    }

    /// Entered/dropped/accepted counts chain together and reasons sum to drops.
    pub fn reconciles(&self) -> bool {
        let stages_ok = self.stages.iter().map(|s| s.stage).eq(StageName::ORDER.iter().copied());
        let chained = self.stages.windows(2).all(|w| w[1].entered == w[0].entered - w[0].dropped.min(w[0].entered));
        let no_overdraw = self.stages.iter().all(|s| s.dropped <= s.entered);
        let reasons = self.stages.iter().all(|s| s.drop_reasons.values().sum::<u64>() == s.dropped);
        let tail = self.stages.last().is_some_and(|s| self.accepted == s.entered - s.dropped.min(s.entered));
        stages_ok && chained && no_overdraw && reasons && tail
    }

    /// Adds `other` into `self`; merging is commutative and associative.
    pub fn merge(&mut self, other: &FilterReport) -> Result<(), ValidateError> {
        if other.schema_version != self.schema_version {
            return Err(ValidateError::IncompatibleSchemaVersion {
                expected: self.schema_version,
                found: other.schema_version,
            });
        }
        if !self.stages.iter().map(|s| s.stage).eq(other.stages.iter().map(|s| s.stage)) {
            return Err(ValidateError::IncompatibleStages);
        }
        for (mine, theirs) in self.stages.iter_mut().zip(&other.stages) {
            mine.entered += theirs.entered;
            mine.dropped += theirs.dropped;
            for (reason, n) in &theirs.drop_reasons {
                *mine.drop_reasons.entry(reason.clone()).or_default() += n;
            }
        }
        self.accepted += other.accepted;
        Ok(())
    }

    /// Plain-text table of per-stage drops, as a share of stage input and of the total.
    pub fn render_table(&self) -> String {
        let total = self.total();
        let pct = |n: u64, d: u64| if d == 0 { 0.0 } else { 100.0 * n as f64 / d as f64 };
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>9} {:>9} {:>8} {:>8}", "stage", "entered", "dropped", "%stage", "%total");
        for s in &self.stages {
            let _ = writeln!(
                out,
                "{:<18} {:>9} {:>9} {:>7.2}% {:>7.2}%",
                s.stage.as_str(),
                s.entered,
                s.dropped,
                pct(s.dropped, s.entered),
                pct(s.dropped, total)
            );
            for (reason, n) in &s.drop_reasons {
                let _ = writeln!(out, "  {:<36} {:>9}", reason, n);
            }
        }
        let _ = writeln!(out, "{:<18} {:>9} {:>9} {:>7.2}%", "accepted", self.accepted, "", pct(self.accepted, total));
        out
    }
}

pub fn merge_reports<'a>(reports: impl IntoIterator<Item = &'a FilterReport>) -> Result<FilterReport, ValidateError> {
    let mut out = FilterReport::empty();
    for r in reports {
        out.merge(r)?;
    }
    Ok(out)
}
