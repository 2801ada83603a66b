//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Expected values come from references computed here from first principles;
//! the determinism check compares two independent pipeline runs.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lyriccanvas::config::{EndpointConfig, PipelineConfig};
use lyriccanvas::contextizer::{self, END_MARKER, SEPARATOR};
use lyriccanvas::corpus::{self, FilterConfig, Song};
use lyriccanvas::elaborator::{self, SystemRole};
use lyriccanvas::geometry::{self, EmbeddingMatrix};
use lyriccanvas::metrics::{self, SimilarityMatrix};
use lyriccanvas::safety::{self, LexiconScorer};
use lyriccanvas::timeline::{self, SegmentParams, Transcript, TranscriptLine};
use lyriccanvas::{jsonl, pipeline};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: &[&str] = &[
    "moon", "river", "fire", "stone", "night", "rain", "gold", "heart", "road", "sky", "dream", "city", "wolf",
    "glass", "ocean", "summer", "winter", "shadow", "light", "song", "dance", "train", "window", "letter",
];

// ---------------------------------------------------------------- criterion 1

fn ref_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            let chars: Vec<char> = w.chars().collect();
            let mut a = 0;
            let mut b = chars.len();
            while a < b && !chars[a].is_alphanumeric() {
                a += 1;
            }
            while b > a && !chars[b - 1].is_alphanumeric() {
                b -= 1;
            }
            chars[a..b].iter().collect::<String>().to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Songs kept by the three rules, as (artist, title) → surviving line texts.
fn reference_filter(songs: &[(String, String, u32, Vec<String>)]) -> BTreeMap<(String, String), Vec<String>> {
    let mut out = BTreeMap::new();
    for (artist, title, rank, lines) in songs {
        let kept: Vec<&String> = lines
            .iter()
            .filter(|l| {
                let toks = ref_tokens(l);
                let unique: BTreeSet<&String> = toks.iter().collect();
                unique.len() >= 2 && toks.len() <= 20
            })
            .collect();
        let diverse = kept
            .iter()
            .filter(|l| ref_tokens(l).into_iter().collect::<BTreeSet<_>>().len() >= 4)
            .count();
        if diverse >= 15 && *rank <= 50 {
            out.insert((artist.clone(), title.clone()), kept.into_iter().cloned().collect());
        }
    }
    out
}

fn filter_fixture() -> Vec<(String, String, u32, Vec<String>)> {
    let mut r = rng(1);
    let mut ranks: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for a in 0..4 {
        let mut pool: Vec<u32> = (1..=70).collect();
        pool.shuffle(&mut r);
        ranks.insert(a, pool);
    }
    (0..100)
        .map(|i| {
            let artist = i % 4;
            let rank = ranks.get_mut(&artist).unwrap().pop().unwrap();
            let n_lines = r.gen_range(10..40);
            // Some songs are built to sit right at the diversity threshold.
            let diverse_bias = r.gen_range(0.2..1.0);
            let lines = (0..n_lines)
                .map(|_| {
                    let kind: f64 = r.gen();
                    if kind < 0.08 {
                        // one unique word, possibly repeated or punctuated
                        let w = WORDS[r.gen_range(0..WORDS.len())];
                        format!("{w}, {}!", w.to_uppercase())
                    } else if kind < 0.14 {
                        (0..r.gen_range(21..30)).map(|_| WORDS[r.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
                    } else if kind < 0.18 {
                        "-- ... !!".to_string()
                    } else {
                        let n = if r.gen::<f64>() < diverse_bias { r.gen_range(4..12) } else { r.gen_range(2..4) };
                        let mut ws: Vec<String> = (0..n).map(|_| WORDS[r.gen_range(0..WORDS.len())].to_string()).collect();
                        if r.gen_bool(0.3) {
                            ws[0] = format!("\"{}", ws[0]);
                        }
                        ws.join(" ")
                    }
                })
                .collect();
            (format!("Artist {artist}"), format!("Song {i:03}"), rank, lines)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let fixture = filter_fixture();
    let expected = reference_filter(&fixture);
    let songs: Vec<Song> = fixture.iter().map(|(a, t, r, l)| Song::from_texts(a.clone(), t.clone(), *r, l.clone())).collect();
    let start = Instant::now();
    let (kept, report) = corpus::filter_corpus(songs, &FilterConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let r = &report.rejections;
    if r.line_too_few_unique_words == 0 || r.line_too_many_words == 0 || r.song_low_diversity == 0 || r.song_over_artist_cap == 0 {
        return Err(format!("fixture does not exercise every rule: {r:?}"));
    }
    let got: BTreeMap<(String, String), Vec<String>> = kept
        .iter()
        .map(|s| ((s.artist.clone(), s.title.clone()), s.lines.iter().map(|l| l.text.clone()).collect()))
        .collect();
    let mut mismatches = 0;
    for (i, (a, t, _, _)) in fixture.iter().enumerate() {
        let key = (a.clone(), t.clone());
        if got.get(&key) != expected.get(&key) {
            mismatches += 1;
            eprintln!("  song {i} differs");
        }
    }
    let reindexed = kept.iter().all(|s| s.lines.iter().enumerate().all(|(i, l)| l.index == i));
    if mismatches > 0 || !reindexed {
        return Err(format!("{mismatches} mismatches, contiguous indices: {reindexed}"));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("0 mismatches over 100 songs, {} kept, {elapsed:?}", kept.len()))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let texts: Vec<String> = (0..30).map(|i| format!("line number {i} of the fixture")).collect();
    let song = Song::from_texts("A", "B", 1, texts.clone());
    let mut checked = 0;
    for t in [0usize, 1, 3, 5, 7] {
        for i in 0..30 {
            let expected: Vec<&String> = texts.iter().enumerate().filter(|&(j, _)| j <= i && i - j <= t).map(|(_, l)| l).collect();
            let w = contextizer::build_context(&song, i, t).map_err(|e| e.to_string())?;
            let got: Vec<&String> = w.lines.iter().collect();
            if got != expected || w.target_index != i || w.lines.last() != Some(&texts[i]) {
                return Err(format!("mismatch at i={i} t={t}"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked}/150 windows match"))
}

// ---------------------------------------------------------------- criterion 3

fn random_text(r: &mut ChaCha8Rng, max_words: usize) -> String {
    const EXTRA: &[&str] = &["café", "naïve", "日本", "🎵", "señor", "straße", "<", "|", "end", "ELAB", "\"quoted\""];
    let n = r.gen_range(1..=max_words);
    (0..n)
        .map(|_| if r.gen_bool(0.2) { EXTRA[r.gen_range(0..EXTRA.len())] } else { WORDS[r.gen_range(0..WORDS.len())] })
        .collect::<Vec<_>>()
        .join(" ")
}

fn criterion_3() -> Outcome {
    let mut r = rng(3);
    let mut violations = 0;
    let mut total = 0;
    while total < 10_000 {
        let n = r.gen_range(1..12);
        let song = Song::from_texts("Artist", "Title", 1, (0..n).map(|_| random_text(&mut r, 10)));
        let i = r.gen_range(0..n);
        let t = [0, 1, 3, 5, 7][r.gen_range(0..5)];
        let w = contextizer::build_context(&song, i, t).map_err(|e| e.to_string())?;
        let elab = random_text(&mut r, 20);
        let rec = contextizer::serialize(&w, &elab).map_err(|e| e.to_string())?;
        total += 1;

        let full: Vec<char> = rec.full_sequence().chars().collect();
        let (a, b) = rec.loss_span;
        let prefix_len = rec.prefix.chars().count() + SEPARATOR.chars().count();
        let want: Vec<char> = format!("{elab}{END_MARKER}").chars().collect();
        if a < prefix_len || b != full.len() || full[a..b] != want[..] || full[..prefix_len].iter().collect::<String>() != format!("{}{SEPARATOR}", rec.prefix) {
            violations += 1;
        }
    }
    if violations > 0 {
        return Err(format!("{violations} violations in {total} records"));
    }
    Ok(format!("0 violations in {total} records"))
}

// ---------------------------------------------------------------- criterion 4

/// The two quoted numbered blocks inside the system role: the example input
/// lyrics and the example answer.
fn example_blocks(role: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut cur: Option<Vec<&str>> = None;
    for line in role.lines() {
        if cur.is_none() && line.starts_with("\"1. ") {
            cur = Some(Vec::new());
        }
        if let Some(c) = cur.as_mut() {
            c.push(line);
            if line.ends_with('"') {
                blocks.push(cur.take().unwrap().join("\n"));
            }
        }
    }
    blocks
}

fn criterion_4() -> Outcome {
    let role = SystemRole::v1();
    let asset = include_str!("../assets/system_role_v1.txt");
    if role.text != asset.trim_end() {
        return Err("role text differs from the asset".into());
    }
    let blocks = example_blocks(&role.text);
    if blocks.len() != 2 {
        return Err(format!("expected 2 example blocks in the role, found {}", blocks.len()));
    }
    let lyrics: Vec<String> = blocks[0]
        .trim_matches('"')
        .lines()
        .map(|l| l.split_once(". ").map_or(l, |(_, rest)| rest).to_string())
        .collect();
    if lyrics.len() != 6 || !lyrics[0].starts_with("Feels like the weight") {
        return Err(format!("unexpected example lyrics: {lyrics:?}"));
    }
    let song = Song::from_texts("Example", "Example", 1, lyrics.clone());
    let req = elaborator::build_request(&song, &role).map_err(|e| e.to_string())?;
    let system = &req.messages[0];
    if system.content.as_bytes() != asset.trim_end().as_bytes() {
        return Err("system message is not byte-identical to the asset".into());
    }
    let expected_user: String = lyrics.iter().enumerate().map(|(i, l)| format!("{}. {l}\n", i + 1)).collect();
    if req.user_content() != expected_user.trim_end() {
        return Err(format!("user message {:?}", req.user_content()));
    }

    let parsed = elaborator::parse_response(&blocks[1], 6).map_err(|e| e.to_string())?;
    let answer: Vec<String> = blocks[1]
        .trim_matches('"')
        .lines()
        .map(|l| l.split_once(". ").unwrap().1.to_string())
        .collect();
    if parsed != answer {
        return Err(format!("parsed {parsed:?}"));
    }
    if !parsed[0].starts_with("A man carrying a giant globe") {
        return Err(format!("first elaboration {:?}", parsed[0]));
    }
    Ok(format!("role pinned ({} bytes), 6 numbered lines, 6 aligned elaborations", role.text.len()))
}

// ---------------------------------------------------------------- criterion 5

fn oracle_recall(values: &[Vec<f64>], truth: &[usize], k: usize) -> f64 {
    let hits = values
        .iter()
        .zip(truth)
        .filter(|(row, &g)| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            // stable: equal scores keep ascending index order
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap());
            order.iter().position(|&j| j == g).unwrap() < k
        })
        .count();
    hits as f64 / values.len() as f64
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    for case in 0..200 {
        let n = r.gen_range(1..=50);
        let m = r.gen_range(1..=50);
        let coarse = case % 3 == 0;
        let values: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| if coarse { r.gen_range(0..4) as f64 } else { r.gen_range(-1.0..1.0) }).collect())
            .collect();
        let truth: Vec<usize> = (0..n).map(|_| r.gen_range(0..m)).collect();
        let s = SimilarityMatrix::new(n, m, values.concat(), truth.clone()).map_err(|e| e.to_string())?;
        for k in 1..=m {
            let got = metrics::recall_at_k(&s, k).map_err(|e| e.to_string())?;
            let want = oracle_recall(&values, &truth, k);
            if got != want {
                return Err(format!("case {case}: recall@{k} {got} != {want}"));
            }
        }
        let rep = metrics::mean_recall(&s);
        let at = |k: usize| oracle_recall(&values, &truth, k.min(m));
        let want_mean = (at(1) + at(5) + at(10)) / 3.0;
        if rep.mean_recall != want_mean || rep.r1() != at(1) || rep.r5() != at(5) || rep.r10() != at(10) {
            return Err(format!("case {case}: mean recall {} != {want_mean}", rep.mean_recall));
        }
        if rep.k_clamped != (m < 10) {
            return Err(format!("case {case}: clamp flag"));
        }
        if !(rep.r1() <= rep.r5() && rep.r5() <= rep.r10()) {
            return Err(format!("case {case}: recall not monotone"));
        }
    }
    Ok("200 matrices match the sort oracle exactly; r@1 <= r@5 <= r@10".into())
}

// ---------------------------------------------------------------- criterion 6

fn unit(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| r.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn criterion_6() -> Outcome {
    const TOL: f64 = 1e-6;
    const FB: f64 = 1e-4;
    let mut r = rng(6);
    let mut worst = 0.0f64;
    for pair in 0..1000 {
        let d = r.gen_range(2..128);
        let a = unit(&mut r, d);
        let b = unit(&mut r, d);
        let t: f64 = r.gen();
        let s = |p: &[f64], q: &[f64], t: f64| geometry::slerp(p, q, t, FB).map_err(|e| format!("pair {pair}: {e}"));

        let e0 = dist(&s(&a, &b, 0.0)?, &a);
        let e1 = dist(&s(&a, &b, 1.0)?, &b);
        let mid = s(&a, &b, t)?;
        let en = (mid.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs();
        let es = dist(&mid, &s(&b, &a, 1.0 - t)?);

        // orthogonal unit pair via Gram-Schmidt
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let o: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - dot * x).collect();
        let on = o.iter().map(|x| x * x).sum::<f64>().sqrt();
        let o: Vec<f64> = o.into_iter().map(|x| x / on).collect();
        let half: Vec<f64> = a.iter().zip(&o).map(|(x, y)| (x + y) / 2f64.sqrt()).collect();
        let eo = dist(&s(&a, &o, 0.5)?, &half);

        let e = e0.max(e1).max(en).max(es).max(eo);
        if e >= TOL {
            return Err(format!("pair {pair}: error {e:e}"));
        }
        worst = worst.max(e);
    }
    Ok(format!("1000 pairs, worst deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    const L: usize = 77;
    const D: usize = 768;
    const W: usize = 8;
    let mut r = rng(7);
    let mut min_score = f64::INFINITY;
    let mut worst_scale = 0.0f64;
    for case in 0..100 {
        let data: Vec<f64> = (0..L * D).map(|_| r.sample(StandardNormal)).collect();
        let p0 = EmbeddingMatrix::new(L, D, data).map_err(|e| e.to_string())?;
        let k = r.gen_range(0..L);
        let rows: Vec<Vec<f64>> = (0..L).map(|i| p0.row((i + k) % L).to_vec()).collect();
        let p1 = EmbeddingMatrix::from_rows(&rows).map_err(|e| e.to_string())?;

        let res = geometry::chunked_align(&p0, &p1, W).map_err(|e| e.to_string())?;
        let inverse = (L - k) % L;
        if res.shift != inverse || res.score < 0.999 {
            return Err(format!("case {case}: rotation {k} gave shift {} score {}", res.shift, res.score));
        }
        min_score = min_score.min(res.score);

        let own = geometry::chunked_align(&p0, &p0, W).map_err(|e| e.to_string())?;
        if own.shift != 0 || (own.score - 1.0).abs() > 1e-12 {
            return Err(format!("case {case}: self alignment shift {} score {}", own.shift, own.score));
        }

        let mut scaled = p1.clone();
        for row in 0..L {
            scaled.scale_row(row, r.gen_range(0.01..100.0));
        }
        let res2 = geometry::chunked_align(&p0, &scaled, W).map_err(|e| e.to_string())?;
        let dev = res.all_scores.iter().zip(&res2.all_scores).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if dev > 1e-6 || res2.shift != res.shift {
            return Err(format!("case {case}: scaling moved scores by {dev:e}"));
        }
        worst_scale = worst_scale.max(dev);
    }
    Ok(format!("100/100 shifts recovered, min score {min_score:.6}, scaling deviation {worst_scale:.1e}"))
}

// ---------------------------------------------------------------- criterion 8

fn random_transcript(r: &mut ChaCha8Rng) -> Transcript {
    let mut t = if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.0..8.0) };
    let mut lines = Vec::new();
    for i in 0..r.gen_range(0..25) {
        let len = r.gen_range(0.6..6.0);
        lines.push(TranscriptLine { start_s: t, end_s: t + len, text: format!("line {i}") });
        t += len;
        t += match r.gen_range(0..3) {
            0 => 0.0,
            1 => r.gen_range(0.0..3.0),
            _ => r.gen_range(3.0..10.0),
        };
    }
    let duration = lines.last().map_or(r.gen_range(1.0..30.0), |l: &TranscriptLine| l.end_s) + r.gen_range(0.0..6.0);
    Transcript { duration, artist: "A".into(), title: "T".into(), lines }
}

fn criterion_8() -> Outcome {
    let mut r = rng(8);
    let fps = 10.0;
    for case in 0..500 {
        let tr = random_transcript(&mut r);
        let segs = timeline::segments_from_transcript(&tr, &SegmentParams::default()).map_err(|e| format!("case {case}: {e}"))?;
        let tiles = !segs.is_empty()
            && segs[0].start_s == 0.0
            && segs.last().unwrap().end_s == tr.duration
            && segs.windows(2).all(|w| w[0].end_s == w[1].start_s)
            && segs.iter().all(|s| s.end_s > s.start_s);
        if !tiles {
            return Err(format!("case {case}: segments do not tile [0, {}]", tr.duration));
        }
        let sched = timeline::schedule_frames(&segs, fps, 0.5).map_err(|e| format!("case {case}: {e}"))?;
        let want = (tr.duration * fps).round() as usize;
        if sched.entries.len() != want {
            return Err(format!("case {case}: {} frames, expected {want}", sched.entries.len()));
        }
        for e in &sched.entries {
            let ts = e.frame as f64 / fps;
            let s = &segs[e.segment];
            let last = e.segment + 1 == segs.len();
            if ts < s.start_s || (ts >= s.end_s && !last) {
                return Err(format!("case {case}: frame {} outside its segment", e.frame));
            }
        }
    }
    Ok("500 transcripts tile exactly; frame counts equal round(duration * 10)".into())
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9() -> Outcome {
    let lexicon: &[(&str, f64)] = &[
        ("darn", 0.1),
        ("heck", 0.15),
        ("crap", 0.3),
        ("damn", 0.45),
        ("hell", 0.55),
        ("bastard", 0.7),
        ("bloody hell", 0.8),
        ("shit", 0.9),
        ("fuck", 1.0),
    ];
    let neutral = ["sunlight", "meadow", "lantern", "harbor", "violin"];
    let scorer = LexiconScorer::new(lexicon.iter().copied()).map_err(|e| e.to_string())?;
    let mut r = rng(9);
    let mut pairs = Vec::new();
    for _ in 0..300 {
        let mut src = Vec::new();
        let mut tgt = Vec::new();
        for _ in 0..r.gen_range(3..10) {
            if r.gen_bool(0.2) {
                let (term, _) = lexicon[r.gen_range(0..lexicon.len())];
                src.push(term.to_string());
                tgt.push(neutral[r.gen_range(0..neutral.len())].to_string());
            } else {
                let w = WORDS[r.gen_range(0..WORDS.len())].to_string();
                src.push(w.clone());
                tgt.push(w);
            }
        }
        if !src.iter().any(|w| lexicon.iter().any(|(t, _)| t == w)) {
            let (term, _) = lexicon[r.gen_range(0..lexicon.len())];
            src.push(term.to_string());
            tgt.push(neutral[0].to_string());
        }
        pairs.push((src.join(" "), tgt.join(" "), "ours".to_string()));
    }
    let report = safety::bin_report(&safety::score_pairs(&scorer, &pairs)).map_err(|e| e.to_string())?;
    let mut non_empty = 0;
    for (b, bin) in report.bins.iter().enumerate() {
        let Some(src_mean) = bin.mean_source else { continue };
        non_empty += 1;
        let tgt_mean = bin.systems["ours"].mean_target;
        if tgt_mean >= src_mean {
            return Err(format!("bin {b}: target mean {tgt_mean} >= source mean {src_mean}"));
        }
    }
    if non_empty < 5 {
        return Err(format!("only {non_empty} non-empty bins; fixture too narrow"));
    }
    Ok(format!("target mean below source mean in {non_empty}/5 bins"))
}

// --------------------------------------------------------------- criterion 10

fn write_fixture_corpus(path: &std::path::Path) -> std::io::Result<()> {
    let mut r = rng(10);
    let records: Vec<serde_json::Value> = (0..24)
        .map(|i| {
            let lines: Vec<String> = (0..r.gen_range(16..40))
                .map(|_| {
                    let n = r.gen_range(1..14);
                    (0..n).map(|_| WORDS[r.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
                })
                .collect();
            serde_json::json!({
                "artist": format!("Artist {}", i % 5),
                "title": format!("Track {i}"),
                "popularity_rank": i / 5 + 1,
                "lines": lines,
            })
        })
        .collect();
    jsonl::write_records(path, &records).map(|_| ())
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let raw = dir.path().join("raw.jsonl");
    write_fixture_corpus(&raw).map_err(|e| e.to_string())?;
    let mut outputs: Vec<Vec<Vec<u8>>> = Vec::new();
    let mut records = 0;
    for run in 0..2 {
        let root = dir.path().join(format!("run{run}"));
        let tree = serde_json::json!({
            "paths": {
                "raw": raw,
                "corpus": root.join("corpus.jsonl"),
                "elabs": root.join("elabs.jsonl"),
                "datasets": root.join("datasets"),
                "reports": root.join("reports"),
            },
        });
        let cfg = PipelineConfig::from_tree(tree, &[]).map_err(|e| e.to_string())?;
        let client = EndpointConfig::default().build_client().map_err(|e| e.to_string())?;
        let summary = pipeline::run_pipeline(&cfg, client.as_ref()).map_err(|e| e.to_string())?;
        if summary.datasets.len() != 5 || summary.dataset_songs == 0 {
            return Err(format!("run {run}: {} datasets over {} songs", summary.datasets.len(), summary.dataset_songs));
        }
        records = summary.datasets.iter().map(|d| d.records).sum();
        let files: Result<Vec<Vec<u8>>, _> = summary
            .datasets
            .iter()
            .map(|d| std::fs::read(cfg.paths.datasets.join(&d.file)))
            .collect();
        outputs.push(files.map_err(|e| e.to_string())?);
    }
    let elapsed = start.elapsed();
    let same: HashSet<bool> = outputs[0].iter().zip(&outputs[1]).map(|(a, b)| a == b && !a.is_empty()).collect();
    if same != HashSet::from([true]) {
        return Err("dataset files differ between runs".into());
    }
    if elapsed >= Duration::from_secs(30) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("5 datasets byte-identical across runs ({records} records each run), {elapsed:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("filter soundness", criterion_1),
        ("context correctness", criterion_2),
        ("mask exclusivity", criterion_3),
        ("prompt protocol fidelity", criterion_4),
        ("retrieval oracle equivalence", criterion_5),
        ("slerp analytics", criterion_6),
        ("alignment recovery", criterion_7),
        ("timeline conservation", criterion_8),
        ("profanity reduction witness", criterion_9),
        ("end-to-end determinism", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
