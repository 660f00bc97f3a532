use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::FilterConfig;
use super::pixels::FrameStats;
use super::report::FilterReport;
use super::stages::evaluate_stage;
use super::{StageName, ValidateError};
use crate::model::{ClipWindow, VideoRecord};

/// One line of a clips file: a window plus the pixel data measured for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip: ClipWindow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_stats: Option<FrameStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub clip: ClipWindow,
    pub record: VideoRecord,
    pub frame_stats: Option<FrameStats>,
    pub mask_fraction: Option<f64>,
}

/// A candidate that survived every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedClip {
    pub clip: ClipWindow,
    pub record: VideoRecord,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Accepted,
    Dropped { stage: StageName, reason: String },
}

/// Pairs every clip with its record, keeping clip order.
pub fn join_candidates(records: &[VideoRecord], clips: Vec<ClipEntry>) -> Result<Vec<Candidate>, ValidateError> {
    let by_id: HashMap<&str, &VideoRecord> = records.iter().map(|r| (r.video_id.as_str(), r)).collect();
    clips
        .into_iter()
        .map(|e| {
            let record = by_id.get(e.clip.video_id.as_str()).ok_or_else(|| ValidateError::UnknownVideo(e.clip.video_id.clone()))?;
            Ok(Candidate { clip: e.clip, record: (*record).clone(), frame_stats: e.frame_stats, mask_fraction: e.mask_fraction })
        })
        .collect()
}

fn first_failure(c: &Candidate, cfg: &FilterConfig) -> Outcome {
    for stage in StageName::ORDER {
        if let Err(reason) = evaluate_stage(stage, c, cfg) {
            return Outcome::Dropped { stage, reason };
        }
    }
    Outcome::Accepted
}

/// Runs the seven stages in order; a candidate stops at its first failing stage.
///
/// Candidates are evaluated in parallel, but the accepted list and the report
/// follow input order.
pub fn run_filter_chain(candidates: Vec<Candidate>, cfg: &FilterConfig) -> Result<(Vec<AcceptedClip>, FilterReport, Vec<Outcome>), ValidateError> {
    cfg.check()?;
    let outcomes: Vec<Outcome> = candidates.par_iter().map(|c| first_failure(c, cfg)).collect();

    let mut report = FilterReport::empty();
    for outcome in &outcomes {
        for counts in report.stages.iter_mut() {
            counts.entered += 1;
            if let Outcome::Dropped { stage, reason } = outcome {
                if *stage == counts.stage {
                    counts.dropped += 1;
                    *counts.drop_reasons.entry(reason.clone()).or_default() += 1;
                    break;
                }
            }
        }
        if *outcome == Outcome::Accepted {
            report.accepted += 1;
        }
    }

    let provenance: Vec<String> = StageName::ORDER.iter().map(|s| s.as_str().to_string()).collect();
    let accepted = candidates
        .into_iter()
        .zip(&outcomes)
        .filter(|(_, o)| **o == Outcome::Accepted)
        .map(|(c, _)| AcceptedClip { clip: c.clip, record: c.record, provenance: provenance.clone() })
        .collect();
    Ok((accepted, report, outcomes))
}
