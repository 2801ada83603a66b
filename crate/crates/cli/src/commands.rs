use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use serde_json::{json, Value};

use lyriccanvas::config::{self, EndpointConfig, PipelineConfig};
use lyriccanvas::corpus::FilterConfig;
use lyriccanvas::elaborator::{Elaborator, SongOutcome, SystemRole};
use lyriccanvas::embed::StubEmbedder;
use lyriccanvas::geometry::{interpolate_sequence, EmbeddingMatrix, InterpolationParams};
use lyriccanvas::matrix_io::{self, EmbeddingRecord};
use lyriccanvas::metrics::{self, RetrievalReport, SimilarityMatrix};
use lyriccanvas::safety::{self, LexiconScorer};
use lyriccanvas::timeline::{self, Transcript};
use lyriccanvas::{jsonl, pipeline};

use crate::{Cli, Command};

/// Bad combination of arguments; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => {
            let rep = pipeline::ingest_stage(&a.input, &a.out, &a.report)?;
            print_json(&rep)
        }
        Command::Filter(a) => {
            let cfg = match &cli.config {
                Some(p) => config::load_filter_config(p, &cli.overrides)?,
                None => {
                    no_overrides(cli)?;
                    FilterConfig::default()
                }
            };
            let rep = pipeline::filter_stage(&a.input, &a.out, &a.report, &cfg)?;
            print_json(&rep)
        }
        Command::Elaborate(a) => {
            let endpoint = endpoint(cli)?;
            let client = endpoint.build_client()?;
            let rep = pipeline::elaborate_stage(&a.corpus, &a.out, &a.report, client.as_ref(), endpoint.policy())?;
            print_json(&rep)
        }
        Command::Dataset(a) => {
            let n = pipeline::dataset_stage(&a.corpus, &a.elabs, a.context_size, &a.out)?;
            print_json(&json!({ "context_size": a.context_size, "records": n }))
        }
        Command::ProfanityReport(a) => profanity(a),
        Command::EvalRetrieval(a) => retrieval(cli, a),
        Command::EvalEmotion(a) => emotion(cli, a),
        Command::Interpolate(a) => interpolate(cli, a),
        Command::Timeline(a) => timeline_cmd(cli, a),
        Command::Embed(a) => embed(a),
        Command::EmbedGrid(a) => {
            let m: EmbeddingMatrix<f32> = StubEmbedder::new(a.dim, a.seed).embed_tokens(&a.text, a.rows);
            matrix_io::write_matrix(&a.out, &m)?;
            print_json(&json!({ "rows": a.rows, "dim": a.dim, "out": a.out }))
        }
        Command::Pipeline => {
            let Some(path) = &cli.config else {
                return Err(usage("pipeline requires --config"));
            };
            let cfg = PipelineConfig::load(path, &cli.overrides)?;
            let client = cfg.endpoint.build_client()?;
            let summary = pipeline::run_pipeline(&cfg, client.as_ref())?;
            print_json(&summary)
        }
    }
}

fn no_overrides(cli: &Cli) -> Result<()> {
    if cli.overrides.is_empty() {
        Ok(())
    } else {
        Err(usage("--set requires --config"))
    }
}

fn load_config(cli: &Cli) -> Result<Option<PipelineConfig>> {
    match &cli.config {
        Some(p) => Ok(Some(PipelineConfig::load(p, &cli.overrides)?)),
        None => no_overrides(cli).map(|_| None),
    }
}

fn endpoint(cli: &Cli) -> Result<EndpointConfig> {
    Ok(match load_config(cli)? {
        Some(c) => c.endpoint,
        None => {
            log::warn!("no --config given; using the offline fake endpoint");
            EndpointConfig::default()
        }
    })
}

fn percent(cli: &Cli) -> Result<bool> {
    Ok(load_config(cli)?.is_none_or(|c| c.metrics.percent))
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => jsonl::write_json(p, value).with_context(|| format!("writing {}", p.display())),
        None => print_json(value),
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for item in jsonl::read_lines(path).with_context(|| format!("reading {}", path.display()))? {
        let (n, line) = item?;
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{n}", path.display()))?);
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    source: String,
    target: String,
    system: String,
}

fn profanity(a: &crate::ProfanityArgs) -> Result<()> {
    let scorer = LexiconScorer::load(&a.lexicon)?;
    let texts: Vec<(String, String, String)> = read_jsonl::<PairRecord>(&a.pairs)?
        .into_iter()
        .map(|p| (p.source, p.target, p.system))
        .collect();
    let report = safety::bin_report(&safety::score_pairs(&scorer, &texts))?;
    emit(&serde_json::to_value(report)?, a.out.as_deref())
}

fn scale(x: f64, pct: bool) -> f64 {
    if pct {
        x * 100.0
    } else {
        x
    }
}

fn retrieval_json(r: &RetrievalReport, pct: bool) -> Value {
    json!({
        "r1": scale(r.r1(), pct),
        "r5": scale(r.r5(), pct),
        "r10": scale(r.r10(), pct),
        "mean_recall": scale(r.mean_recall, pct),
        "k_clamped": r.k_clamped,
        "queries": r.queries,
        "candidates": r.candidates,
    })
}

type Paired = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Reorder `b` so `b[i].id == a[i].id`; both sides must hold the same ids.
fn pair_by_id(a: Vec<EmbeddingRecord>, b: Vec<EmbeddingRecord>) -> Result<Paired> {
    if a.len() != b.len() {
        bail!("{} records on one side and {} on the other", a.len(), b.len());
    }
    let mut by_id: HashMap<String, Vec<f32>> = HashMap::new();
    for r in b {
        if by_id.insert(r.id.clone(), r.vector).is_some() {
            bail!("duplicate id {:?}", r.id);
        }
    }
    let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<f64>>();
    let mut left = Vec::with_capacity(a.len());
    let mut right = Vec::with_capacity(a.len());
    for r in a {
        let v = by_id.remove(&r.id).with_context(|| format!("id {:?} has no counterpart", r.id))?;
        left.push(widen(r.vector));
        right.push(widen(v));
    }
    Ok((left, right))
}

fn retrieval(cli: &Cli, a: &crate::RetrievalArgs) -> Result<()> {
    let pct = percent(cli)?;
    let s: SimilarityMatrix<f64> = match (&a.matrix, &a.queries, &a.candidates) {
        (Some(path), None, None) => {
            let m = matrix_io::read_matrix(path)?.cast::<f64>();
            let (n, cols) = m.shape();
            let truth = match &a.ground_truth {
                Some(gt) => {
                    let src = fs::read_to_string(gt).with_context(|| format!("reading {}", gt.display()))?;
                    serde_json::from_str::<Vec<usize>>(&src).with_context(|| format!("parsing {}", gt.display()))?
                }
                None => {
                    if n != cols {
                        return Err(usage("a non-square matrix needs --ground-truth"));
                    }
                    (0..n).collect()
                }
            };
            SimilarityMatrix::new(n, cols, m.into_vec(), truth)?
        }
        (None, Some(q), Some(c)) => {
            let (qs, cs) = pair_by_id(matrix_io::read_embeddings(q)?, matrix_io::read_embeddings(c)?)?;
            SimilarityMatrix::from_paired_embeddings(&qs, &cs)?
        }
        _ => return Err(usage("give either --matrix or both --queries and --candidates")),
    };
    let mut body = serde_json::Map::new();
    body.insert("scale".into(), json!(if pct { "percent" } else { "fraction" }));
    body.insert("query_to_candidate".into(), retrieval_json(&metrics::mean_recall(&s), pct));
    if let Some(t) = s.transpose() {
        body.insert("candidate_to_query".into(), retrieval_json(&metrics::mean_recall(&t), pct));
    }
    emit(&Value::Object(body), a.out.as_deref())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRecord {
    gold: String,
    pred: String,
}

fn emotion(cli: &Cli, a: &crate::EmotionArgs) -> Result<()> {
    if a.labels.is_none() && a.text_emb.is_none() {
        return Err(usage("give --labels and/or --text-emb with --image-emb"));
    }
    let pct = percent(cli)?;
    let mut body = serde_json::Map::new();
    body.insert("scale".into(), json!(if pct { "percent" } else { "fraction" }));
    if let Some(path) = &a.labels {
        let records: Vec<LabelRecord> = read_jsonl(path)?;
        if records.is_empty() {
            bail!("{} holds no labels", path.display());
        }
        let gold = metrics::parse_labels(&records.iter().map(|r| r.gold.as_str()).collect::<Vec<_>>())?;
        let pred = metrics::parse_labels(&records.iter().map(|r| r.pred.as_str()).collect::<Vec<_>>())?;
        let eval = metrics::confusion(&pred, &gold)?;
        let names: Vec<&str> = eval.labels.iter().map(|e| e.name()).collect();
        let mut matrix = serde_json::Map::new();
        for (g, row) in names.iter().zip(&eval.confusion) {
            let cells: serde_json::Map<String, Value> =
                names.iter().zip(row).map(|(p, v)| (p.to_string(), json!(scale(*v, pct)))).collect();
            matrix.insert(g.to_string(), Value::Object(cells));
        }
        body.insert("samples".into(), json!(records.len()));
        body.insert("semantic_proximity".into(), json!(scale(eval.accuracy, pct)));
        body.insert("labels".into(), json!(names));
        body.insert("counts".into(), json!(eval.counts));
        body.insert("confusion".into(), Value::Object(matrix));
    }
    if let (Some(t), Some(i)) = (&a.text_emb, &a.image_emb) {
        let (text, image) = pair_by_id(matrix_io::read_embeddings(t)?, matrix_io::read_embeddings(i)?)?;
        let vp = metrics::visual_perceptibility(&text, &image)?;
        body.insert("visual_perceptibility".into(), json!(scale(vp, pct)));
    }
    emit(&Value::Object(body), a.out.as_deref())
}

fn interpolate(cli: &Cli, a: &crate::InterpolateArgs) -> Result<()> {
    let mut params = match load_config(cli)? {
        Some(c) => c.geometry,
        None => InterpolationParams { align: false, ..InterpolationParams::default() },
    };
    params.align |= a.align;
    if let Some(n) = a.steps {
        params.n_steps = n;
    }
    if let Some(w) = a.window {
        params.window = w;
    }
    let p0 = matrix_io::read_matrix(&a.p0)?.cast::<f64>();
    let p1 = matrix_io::read_matrix(&a.p1)?.cast::<f64>();
    let result = interpolate_sequence(&p0, &p1, &params)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut files = Vec::with_capacity(result.steps.len());
    for (j, step) in result.steps.iter().enumerate() {
        let name = format!("step_{j:03}.bin");
        matrix_io::write_matrix(&a.out_dir.join(&name), &step.cast::<f32>())?;
        files.push(name);
    }
    let summary = json!({
        "n_steps": params.n_steps,
        "aligned": params.align,
        "window": params.window,
        "shift": result.alignment.as_ref().map(|r| r.shift),
        "score": result.alignment.as_ref().map(|r| r.score),
        "all_scores": result.alignment.as_ref().map(|r| r.all_scores.clone()),
        "steps": files,
    });
    jsonl::write_json(&a.out_dir.join("alignment.json"), &summary)?;
    print_json(&summary)
}

fn timeline_cmd(cli: &Cli, a: &crate::TimelineArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let mut tl = cfg.as_ref().map(|c| c.timeline.clone()).unwrap_or_default();
    if let Some(v) = a.fps {
        tl.fps = v;
    }
    if let Some(v) = a.transition {
        tl.transition_s = v;
    }
    if let Some(v) = a.break_threshold {
        tl.break_threshold_s = v;
    }
    let src = fs::read_to_string(&a.transcript).with_context(|| format!("reading {}", a.transcript.display()))?;
    let transcript: Transcript =
        serde_json::from_str(&src).with_context(|| format!("parsing {}", a.transcript.display()))?;
    let mut segments = timeline::segments_from_transcript(&transcript, &tl.segment_params())?;

    if a.elaborate {
        let endpoint = cfg.map(|c| c.endpoint).unwrap_or_default();
        let client = endpoint.build_client()?;
        let elaborator = Elaborator::new(client.as_ref(), SystemRole::v1(), endpoint.policy());
        match elaborator.elaborate_song(&timeline::prompt_song(&transcript, &segments))? {
            SongOutcome::Elaborated(items) => {
                timeline::attach_elaborations(&mut segments, items.into_iter().map(|e| e.text).collect())?
            }
            SongOutcome::Discarded { reason, attempts } => {
                bail!("segment elaboration failed after {attempts} attempts: {reason}")
            }
        }
    }

    let schedule = timeline::schedule_frames(&segments, tl.fps, tl.transition_s)?;
    let matrices: BTreeMap<usize, String> = (0..segments.len()).map(|i| (i, timeline::matrix_name(i))).collect();
    let plan = timeline::render_plan(&schedule, &matrices)?;
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            jsonl::write_json(&dir.join("segments.json"), &segments)?;
            jsonl::write_records(&dir.join("plan.jsonl"), &plan)?;
            print_json(&json!({
                "segments": segments.len(),
                "frames": plan.len(),
                "fps": tl.fps,
                "duration": transcript.duration,
            }))
        }
        None => {
            let mut out = std::io::stdout().lock();
            for entry in &plan {
                serde_json::to_writer(&mut out, entry)?;
                writeln!(out)?;
            }
            Ok(())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TextRecord {
    id: String,
    text: String,
}

fn embed(a: &crate::EmbedArgs) -> Result<()> {
    let embedder = StubEmbedder::new(a.dim, a.seed);
    let records: Vec<EmbeddingRecord> = read_jsonl::<TextRecord>(&a.input)?
        .into_iter()
        .map(|r| EmbeddingRecord { vector: embedder.embed::<f32>(&r.text), id: r.id })
        .collect();
    matrix_io::write_embeddings(&a.out, &records)?;
    print_json(&json!({ "records": records.len(), "dim": a.dim }))
}
