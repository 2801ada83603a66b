//! Music-video planning: transcript lines become timed segments, segments
//! become a fixed-rate frame schedule, and the schedule becomes a render plan
//! that names which embedding grids each frame interpolates between.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Song;

#[derive(Debug, Error, PartialEq)]
pub enum TimelineError {
    #[error("transcript line {index}: {message}")]
    BadLine { index: usize, message: String },
    #[error("transcript lines {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("duration {duration} is shorter than the last line end {last_end}")]
    DurationTooShort { duration: f64, last_end: f64 },
    #[error("duration must be positive and finite, got {0}")]
    BadDuration(f64),
    #[error("{0} must be positive and finite")]
    BadParameter(&'static str),
    #[error("transition of {transition_s}s exceeds the shortest segment ({shortest_s}s)")]
    TransitionTooLong { transition_s: f64, shortest_s: f64 },
    #[error("segments do not tile the timeline at segment {0}")]
    NotTiled(usize),
    #[error("no embedding matrix for segment {0}")]
    MissingMatrix(usize),
    #[error("{got} elaborations for {expected} segments")]
    ElaborationCount { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    #[serde(rename = "start")]
    pub start_s: f64,
    #[serde(rename = "end")]
    pub end_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub duration: f64,
    pub artist: String,
    pub title: String,
    pub lines: Vec<TranscriptLine>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Lyric,
    Break,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: SegmentKind,
    pub prompt_source: String,
    #[serde(default)]
    pub elaboration: String,
}

impl TimelineSegment {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentParams {
    /// Silences at least this long become break segments; shorter ones are
    /// absorbed into the preceding segment.
    pub break_threshold_s: f64,
    /// Preceding lyric lines quoted in a mid-song break prompt.
    pub break_context_lines: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            break_threshold_s: 3.0,
            break_context_lines: 2,
        }
    }
}

pub fn intro_prompt(title: &str, artist: &str) -> String {
    format!("{title} by {artist}; musical intro")
}

pub fn outro_prompt(title: &str, artist: &str) -> String {
    format!("{title} by {artist}; musical outro")
}

fn validate(t: &Transcript) -> Result<(), TimelineError> {
    if !(t.duration.is_finite() && t.duration > 0.0) {
        return Err(TimelineError::BadDuration(t.duration));
    }
    for (index, l) in t.lines.iter().enumerate() {
        let bad = |message: &str| TimelineError::BadLine { index, message: message.into() };
        if !(l.start_s.is_finite() && l.end_s.is_finite()) {
            return Err(bad("non-finite timestamp"));
        }
        if l.start_s < 0.0 {
            return Err(bad("negative start"));
        }
        if l.start_s >= l.end_s {
            return Err(bad("start must precede end"));
        }
    }
    for (i, w) in t.lines.windows(2).enumerate() {
        if w[1].start_s < w[0].end_s {
            return Err(TimelineError::Overlap(i, i + 1));
        }
    }
    if let Some(last) = t.lines.last() {
        if t.duration < last.end_s {
            return Err(TimelineError::DurationTooShort { duration: t.duration, last_end: last.end_s });
        }
    }
    Ok(())
}

/// Split `[0, duration]` into lyric and break segments that tile it exactly:
/// every boundary is copied from a transcript timestamp, so adjacent segments
/// share bit-identical endpoints.
pub fn segments_from_transcript(
    transcript: &Transcript,
    params: &SegmentParams,
) -> Result<Vec<TimelineSegment>, TimelineError> {
    validate(transcript)?;
    if !(params.break_threshold_s.is_finite() && params.break_threshold_s > 0.0) {
        return Err(TimelineError::BadParameter("break_threshold_s"));
    }
    let threshold = params.break_threshold_s;
    let lines = &transcript.lines;
    let brk = |start_s, end_s, prompt_source| TimelineSegment {
        start_s,
        end_s,
        kind: SegmentKind::Break,
        prompt_source,
        elaboration: String::new(),
    };

    if lines.is_empty() {
        return Ok(vec![brk(0.0, transcript.duration, intro_prompt(&transcript.title, &transcript.artist))]);
    }

    let mut out = Vec::with_capacity(lines.len() * 2 + 1);
    let mut start = 0.0;
    if lines[0].start_s >= threshold {
        out.push(brk(0.0, lines[0].start_s, intro_prompt(&transcript.title, &transcript.artist)));
        start = lines[0].start_s;
    }
    for (i, line) in lines.iter().enumerate() {
        let (gap_end, is_last) = match lines.get(i + 1) {
            Some(next) => (next.start_s, false),
            None => (transcript.duration, true),
        };
        let long_gap = gap_end - line.end_s >= threshold;
        let end = if long_gap { line.end_s } else { gap_end };
        out.push(TimelineSegment {
            start_s: start,
            end_s: end,
            kind: SegmentKind::Lyric,
            prompt_source: line.text.clone(),
            elaboration: String::new(),
        });
        if long_gap {
            let prompt = if is_last {
                outro_prompt(&transcript.title, &transcript.artist)
            } else {
                let from = (i + 1).saturating_sub(params.break_context_lines);
                let mut parts: Vec<&str> = lines[from..=i].iter().map(|l| l.text.as_str()).collect();
                parts.push("musical break");
                parts.join("; ")
            };
            out.push(brk(line.end_s, gap_end, prompt));
        }
        start = gap_end;
    }
    Ok(out)
}

/// Check that segments cover `[0, duration]` with shared endpoints.
pub fn check_tiling(segments: &[TimelineSegment], duration: f64) -> Result<(), TimelineError> {
    if segments.first().map(|s| s.start_s) != Some(0.0) {
        return Err(TimelineError::NotTiled(0));
    }
    for (i, w) in segments.windows(2).enumerate() {
        if w[0].end_s != w[1].start_s || w[0].start_s >= w[0].end_s {
            return Err(TimelineError::NotTiled(i));
        }
    }
    let last = segments.len() - 1;
    if segments[last].end_s != duration || segments[last].start_s >= segments[last].end_s {
        return Err(TimelineError::NotTiled(last));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Hold,
    Transition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub frame: usize,
    pub segment: usize,
    pub phase: Phase,
    /// Interpolation position towards the next segment; 0 for holds.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSchedule {
    pub fps: f64,
    pub entries: Vec<FrameEntry>,
}

impl FrameSchedule {
    pub fn timestamp(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }
}

/// Assign `round(duration * fps)` frames to segments. Frame `f` belongs to the
/// segment containing time `f / fps`; the last `transition_s * fps` frames of
/// every segment except the final one blend into the next segment with `t`
/// spaced uniformly over `(0, 1]`.
pub fn schedule_frames(
    segments: &[TimelineSegment],
    fps: f64,
    transition_s: f64,
) -> Result<FrameSchedule, TimelineError> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(TimelineError::BadParameter("fps"));
    }
    if !(transition_s.is_finite() && transition_s >= 0.0) {
        return Err(TimelineError::BadParameter("transition_s"));
    }
    let Some(last) = segments.last() else {
        return Ok(FrameSchedule { fps, entries: Vec::new() });
    };
    let duration = last.end_s;
    check_tiling(segments, duration)?;
    let shortest = segments.iter().map(TimelineSegment::duration).fold(f64::INFINITY, f64::min);
    if transition_s > shortest {
        return Err(TimelineError::TransitionTooLong { transition_s, shortest_s: shortest });
    }

    let total = (duration * fps).round() as usize;
    let mut owner = Vec::with_capacity(total);
    let mut seg = 0;
    for f in 0..total {
        let ts = f as f64 / fps;
        while seg + 1 < segments.len() && ts >= segments[seg + 1].start_s {
            seg += 1;
        }
        owner.push(seg);
    }

    let want = (transition_s * fps).round() as usize;
    let mut entries: Vec<FrameEntry> = owner
        .iter()
        .enumerate()
        .map(|(frame, &segment)| FrameEntry { frame, segment, phase: Phase::Hold, t: 0.0 })
        .collect();
    let mut f = 0;
    while f < total {
        let segment = owner[f];
        let run_end = owner[f..].iter().position(|&s| s != segment).map_or(total, |p| f + p);
        if segment + 1 < segments.len() {
            let n = want.min(run_end - f);
            for k in 0..n {
                let e = &mut entries[run_end - n + k];
                e.phase = Phase::Transition;
                e.t = (k + 1) as f64 / n as f64;
            }
        }
        f = run_end;
    }
    Ok(FrameSchedule { fps, entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum PlanEntry {
    Hold {
        frame: usize,
        segment: usize,
        matrix: String,
    },
    Transition {
        frame: usize,
        from_segment: usize,
        to_segment: usize,
        from: String,
        to: String,
        t: f64,
    },
}

/// Bind every frame to the embedding grids it renders from. `matrices` maps a
/// segment index to a reference (usually a file name) for its grid.
pub fn render_plan(
    schedule: &FrameSchedule,
    matrices: &BTreeMap<usize, String>,
) -> Result<Vec<PlanEntry>, TimelineError> {
    let get = |seg: usize| matrices.get(&seg).cloned().ok_or(TimelineError::MissingMatrix(seg));
    schedule
        .entries
        .iter()
        .map(|e| {
            Ok(match e.phase {
                Phase::Hold => PlanEntry::Hold { frame: e.frame, segment: e.segment, matrix: get(e.segment)? },
                Phase::Transition => PlanEntry::Transition {
                    frame: e.frame,
                    from_segment: e.segment,
                    to_segment: e.segment + 1,
                    from: get(e.segment)?,
                    to: get(e.segment + 1)?,
                    t: e.t,
                },
            })
        })
        .collect()
}

/// Default matrix reference for a segment.
pub fn matrix_name(segment: usize) -> String {
    format!("segment_{segment:03}.bin")
}

/// Present segment prompts as a song so they can be sent through the elaborator.
pub fn prompt_song(transcript: &Transcript, segments: &[TimelineSegment]) -> Song {
    Song::from_texts(
        transcript.artist.clone(),
        transcript.title.clone(),
        1,
        segments.iter().map(|s| s.prompt_source.clone()),
    )
}

pub fn attach_elaborations(segments: &mut [TimelineSegment], elaborations: Vec<String>) -> Result<(), TimelineError> {
    if elaborations.len() != segments.len() {
        return Err(TimelineError::ElaborationCount { got: elaborations.len(), expected: segments.len() });
    }
    for (s, e) in segments.iter_mut().zip(elaborations) {
        s.elaboration = e;
    }
    Ok(())
}
