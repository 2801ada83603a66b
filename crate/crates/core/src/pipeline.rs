//! File-level stages and the end-to-end `ingest → filter → elaborate → dataset` chain.

use std::collections::HashSet;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::contextizer::{self, ContextError, StoredElaboration};
use crate::corpus::{self, CorpusError, FilterConfig, FilterReport, IngestReport, InputFormat, Song};
use crate::elaborator::{self, ChatClient, ElaborationPolicy, Elaborator, RunError, RunReport, SystemRole};
use crate::jsonl;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path} is both an input and an output")]
    SamePath { path: String },
    #[error("{path}: {count} malformed corpus records (first at line {line}: {message})")]
    MalformedCorpus { path: String, count: usize, line: usize, message: String },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

fn normalize(p: &Path) -> PathBuf {
    if let Ok(c) = p.canonicalize() {
        return c;
    }
    let parent = p.parent().filter(|x| !x.as_os_str().is_empty()).unwrap_or(Path::new("."));
    match (parent.canonicalize(), p.file_name()) {
        (Ok(dir), Some(name)) => dir.join(name),
        _ => p.to_path_buf(),
    }
}

/// Refuse to run a stage that would overwrite one of its own inputs.
pub fn ensure_distinct(reads: &[&Path], writes: &[&Path]) -> Result<(), PipelineError> {
    let inputs: HashSet<PathBuf> = reads.iter().map(|p| normalize(p)).collect();
    let mut seen = HashSet::new();
    for w in writes {
        let n = normalize(w);
        if inputs.contains(&n) || !seen.insert(n) {
            return Err(PipelineError::SamePath { path: w.display().to_string() });
        }
    }
    Ok(())
}

fn ensure_parent(path: &Path) -> Result<(), PipelineError> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d).map_err(io_at(d)),
        _ => Ok(()),
    }
}

pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<(), PipelineError> {
    ensure_parent(path)?;
    jsonl::write_json(path, report).map_err(io_at(path))
}

fn write_jsonl<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<usize, PipelineError> {
    ensure_parent(path)?;
    jsonl::write_records(path, records).map_err(io_at(path))
}

/// Read a corpus file, failing on any malformed record.
pub fn read_corpus(path: &Path) -> Result<Vec<Song>, PipelineError> {
    let (songs, report) = corpus::ingest(path, InputFormat::Auto)?;
    if let Some(first) = report.malformed.first() {
        return Err(PipelineError::MalformedCorpus {
            path: path.display().to_string(),
            count: report.malformed.len(),
            line: first.line,
            message: first.message.clone(),
        });
    }
    Ok(songs)
}

pub fn read_elaborations(path: &Path) -> Result<Vec<StoredElaboration>, PipelineError> {
    Ok(elaborator::read_store(path)?)
}

pub fn ingest_stage(input: &Path, out: &Path, report: &Path) -> Result<IngestReport, PipelineError> {
    ensure_distinct(&[input], &[out, report])?;
    let (songs, rep) = corpus::ingest(input, InputFormat::Auto)?;
    write_jsonl(out, &songs)?;
    write_report(report, &rep)?;
    Ok(rep)
}

pub fn filter_stage(input: &Path, out: &Path, report: &Path, cfg: &FilterConfig) -> Result<FilterReport, PipelineError> {
    ensure_distinct(&[input], &[out, report])?;
    let songs = read_corpus(input)?;
    let (kept, rep) = corpus::filter_corpus(songs, cfg)?;
    write_jsonl(out, &kept)?;
    write_report(report, &rep)?;
    Ok(rep)
}

pub fn elaborate_stage(
    corpus_path: &Path,
    store: &Path,
    report: &Path,
    client: &dyn ChatClient,
    policy: ElaborationPolicy,
) -> Result<RunReport, PipelineError> {
    ensure_distinct(&[corpus_path], &[store, report])?;
    let songs = read_corpus(corpus_path)?;
    ensure_parent(store)?;
    let rep = Elaborator::new(client, SystemRole::v1(), policy).run_corpus(&songs, store)?;
    write_report(report, &rep)?;
    Ok(rep)
}

pub fn dataset_stage(corpus_path: &Path, elabs: &Path, context_size: usize, out: &Path) -> Result<usize, PipelineError> {
    ensure_distinct(&[corpus_path, elabs], &[out])?;
    let songs = read_corpus(corpus_path)?;
    let stored = read_elaborations(elabs)?;
    let records = contextizer::emit_dataset(&songs, &stored, context_size)?;
    write_jsonl(out, &records)
}

pub fn dataset_file_name(context_size: usize) -> String {
    format!("dataset_t{context_size}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub context_size: usize,
    pub file: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub ingest: IngestReport,
    pub filter: FilterReport,
    pub elaborate: RunReport,
    /// Songs that made it into the datasets (filtered and not discarded).
    pub dataset_songs: usize,
    pub datasets: Vec<DatasetSummary>,
}

/// Run every stage for the configured paths and context sizes.
pub fn run_pipeline(cfg: &PipelineConfig, client: &dyn ChatClient) -> Result<PipelineSummary, PipelineError> {
    let p = &cfg.paths;
    let dataset_paths: Vec<PathBuf> = cfg.context_sizes.iter().map(|&t| p.datasets.join(dataset_file_name(t))).collect();
    let mut writes: Vec<&Path> = vec![&p.corpus, &p.elabs];
    writes.extend(dataset_paths.iter().map(PathBuf::as_path));
    ensure_distinct(&[&p.raw], &writes)?;

    let (songs, ingest) = corpus::ingest(&p.raw, InputFormat::Auto)?;
    write_report(&p.reports.join("ingest.json"), &ingest)?;

    let (kept, filter) = corpus::filter_corpus(songs, &cfg.filter)?;
    write_jsonl(&p.corpus, &kept)?;
    write_report(&p.reports.join("filter.json"), &filter)?;

    ensure_parent(&p.elabs)?;
    let elaborate = Elaborator::new(client, SystemRole::v1(), cfg.endpoint.policy()).run_corpus(&kept, &p.elabs)?;
    write_report(&p.reports.join("elaborate.json"), &elaborate)?;

    let stored = elaborator::read_store(&p.elabs)?;
    let done: HashSet<(&str, &str)> = stored.iter().map(|r| (r.artist.as_str(), r.title.as_str())).collect();
    let usable: Vec<Song> = kept.iter().filter(|s| done.contains(&s.key())).cloned().collect();

    let mut datasets = Vec::with_capacity(cfg.context_sizes.len());
    for (&t, path) in cfg.context_sizes.iter().zip(&dataset_paths) {
        let records = contextizer::emit_dataset(&usable, &stored, t)?;
        let n = write_jsonl(path, &records)?;
        datasets.push(DatasetSummary { context_size: t, file: dataset_file_name(t), records: n });
    }

    let summary = PipelineSummary { ingest, filter, elaborate, dataset_songs: usable.len(), datasets };
    write_report(&p.reports.join("pipeline.json"), &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distinct_paths() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        std::fs::write(&a, "").unwrap();
        let b = dir.path().join("b.jsonl");
        assert!(ensure_distinct(&[&a], &[&b]).is_ok());
        assert!(matches!(ensure_distinct(&[&a], &[&a]), Err(PipelineError::SamePath { .. })));
        let dotted = dir.path().join(".").join("a.jsonl");
        assert!(ensure_distinct(&[&a], &[&dotted]).is_err());
        assert!(ensure_distinct(&[&a], &[&b, &b]).is_err());
    }
}
