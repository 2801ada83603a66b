//! Lyric ingestion and the three corpus filters.
//!
//! Filters run in a fixed order: per-line length limits, then the per-song
//! diversity rule on the surviving lines, then the per-artist popularity cap.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl;
use crate::text::word_stats;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt scrape: artist {artist:?} has two songs with popularity rank {rank}")]
    DuplicateRank { artist: String, rank: u32 },
    #[error("invalid filter config: {0} must be >= 1")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LyricLine {
    pub index: usize,
    pub text: String,
    pub word_count: usize,
    pub unique_word_count: usize,
}

impl LyricLine {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        let text = text.into();
        let (word_count, unique_word_count) = word_stats(&text);
        Self {
            index,
            text,
            word_count,
            unique_word_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Song {
    pub artist: String,
    pub title: String,
    pub popularity_rank: u32,
    pub lines: Vec<LyricLine>,
}

impl Song {
    /// Build a song from raw line texts, computing word statistics.
    pub fn from_texts<S: Into<String>>(
        artist: impl Into<String>,
        title: impl Into<String>,
        popularity_rank: u32,
        texts: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            artist: artist.into(),
            title: title.into(),
            popularity_rank,
            lines: texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| LyricLine::new(i, t))
                .collect(),
        }
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.artist, &self.title)
    }

    /// Human-readable identifier used in error messages.
    pub fn label(&self) -> String {
        format!("{} - {}", self.artist, self.title)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub min_qualifying_lines: usize,
    pub min_unique_per_qualifying_line: usize,
    pub min_line_unique_words: usize,
    pub max_line_words: usize,
    pub top_songs_per_artist: u32,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_qualifying_lines: 15,
            min_unique_per_qualifying_line: 4,
            min_line_unique_words: 2,
            max_line_words: 20,
            top_songs_per_artist: 50,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let checks = [
            (self.min_qualifying_lines, "min_qualifying_lines"),
            (
                self.min_unique_per_qualifying_line,
                "min_unique_per_qualifying_line",
            ),
            (self.min_line_unique_words, "min_line_unique_words"),
            (self.max_line_words, "max_line_words"),
            (self.top_songs_per_artist as usize, "top_songs_per_artist"),
        ];
        match checks.iter().find(|(v, _)| *v == 0) {
            Some((_, name)) => Err(CorpusError::InvalidConfig(name)),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineRejection {
    TooFewUniqueWords,
    TooManyWords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SongRejection {
    LowDiversity { qualifying: usize },
}

pub fn filter_line(line: &LyricLine, cfg: &FilterConfig) -> Result<(), LineRejection> {
    if line.unique_word_count < cfg.min_line_unique_words {
        Err(LineRejection::TooFewUniqueWords)
    } else if line.word_count > cfg.max_line_words {
        Err(LineRejection::TooManyWords)
    } else {
        Ok(())
    }
}

/// Diversity rule. Expects `song.lines` to contain only lines that passed [`filter_line`].
pub fn filter_song(song: &Song, cfg: &FilterConfig) -> Result<(), SongRejection> {
    let qualifying = song
        .lines
        .iter()
        .filter(|l| l.unique_word_count >= cfg.min_unique_per_qualifying_line)
        .count();
    if qualifying < cfg.min_qualifying_lines {
        Err(SongRejection::LowDiversity { qualifying })
    } else {
        Ok(())
    }
}

/// Keep songs whose popularity rank is within the per-artist cap, preserving order.
pub fn cap_artist(songs: Vec<Song>, cfg: &FilterConfig) -> Result<Vec<Song>, CorpusError> {
    let mut seen: HashSet<(&str, u32)> = HashSet::new();
    for s in &songs {
        if !seen.insert((&s.artist, s.popularity_rank)) {
            return Err(CorpusError::DuplicateRank {
                artist: s.artist.clone(),
                rank: s.popularity_rank,
            });
        }
    }
    Ok(songs
        .into_iter()
        .filter(|s| s.popularity_rank <= cfg.top_songs_per_artist)
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejections {
    pub line_too_few_unique_words: usize,
    pub line_too_many_words: usize,
    pub song_low_diversity: usize,
    pub song_over_artist_cap: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub songs_in: usize,
    pub songs_out: usize,
    pub lines_in: usize,
    pub lines_out: usize,
    pub rejections: Rejections,
}

/// Run all three filters. Surviving lines are re-indexed contiguously from 0.
pub fn filter_corpus(
    songs: Vec<Song>,
    cfg: &FilterConfig,
) -> Result<(Vec<Song>, FilterReport), CorpusError> {
    cfg.validate()?;
    let mut report = FilterReport {
        songs_in: songs.len(),
        lines_in: songs.iter().map(|s| s.lines.len()).sum(),
        ..Default::default()
    };

    let mut kept = Vec::with_capacity(songs.len());
    for mut song in songs {
        let mut lines = Vec::with_capacity(song.lines.len());
        for line in song.lines {
            match filter_line(&line, cfg) {
                Ok(()) => lines.push(line),
                Err(LineRejection::TooFewUniqueWords) => {
                    report.rejections.line_too_few_unique_words += 1
                }
                Err(LineRejection::TooManyWords) => report.rejections.line_too_many_words += 1,
            }
        }
        for (i, l) in lines.iter_mut().enumerate() {
            l.index = i;
        }
        song.lines = lines;
        match filter_song(&song, cfg) {
            Ok(()) => kept.push(song),
            Err(SongRejection::LowDiversity { .. }) => report.rejections.song_low_diversity += 1,
        }
    }

    let before_cap = kept.len();
    let kept = cap_artist(kept, cfg)?;
    report.rejections.song_over_artist_cap = before_cap - kept.len();
    report.songs_out = kept.len();
    report.lines_out = kept.iter().map(|s| s.lines.len()).sum();
    Ok((kept, report))
}

/// Accepted record shapes for [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    /// `{"artist", "title", "popularity_rank", "lines": [str, ...]}`
    Raw,
    /// Corpus output: `lines` holds objects with at least a `text` field.
    Corpus,
    /// Either of the above, per record.
    #[default]
    Auto,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LineRecord {
    Text(String),
    Object { text: String },
}

#[derive(Deserialize)]
struct SongRecord {
    artist: String,
    title: String,
    popularity_rank: u32,
    lines: Vec<LineRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub records_read: usize,
    pub songs_parsed: usize,
    pub malformed: Vec<RecordError>,
}

/// Parse a song JSONL file. Malformed records are collected and skipped;
/// word statistics are always recomputed from the line text.
pub fn ingest(path: &Path, format: InputFormat) -> Result<(Vec<Song>, IngestReport), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut report = IngestReport::default();
    let mut songs = Vec::new();
    let mut keys = HashSet::new();
    for item in jsonl::read_lines(path).map_err(io_err)? {
        let (line_no, raw) = item.map_err(io_err)?;
        report.records_read += 1;
        match parse_record(&raw, format) {
            Ok(song) => {
                if !keys.insert((song.artist.clone(), song.title.clone())) {
                    report.malformed.push(RecordError {
                        line: line_no,
                        message: format!("duplicate song {}", song.label()),
                    });
                    continue;
                }
                songs.push(song);
            }
            Err(message) => report.malformed.push(RecordError {
                line: line_no,
                message,
            }),
        }
    }
    report.songs_parsed = songs.len();
    Ok((songs, report))
}

fn parse_record(raw: &str, format: InputFormat) -> Result<Song, String> {
    let rec: SongRecord = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    if rec.popularity_rank == 0 {
        return Err("popularity_rank must be >= 1".into());
    }
    let mut texts = Vec::with_capacity(rec.lines.len());
    for l in rec.lines {
        match (l, format) {
            (LineRecord::Text(_), InputFormat::Corpus) => {
                return Err("expected line objects in corpus format".into())
            }
            (LineRecord::Object { .. }, InputFormat::Raw) => {
                return Err("expected plain line strings in raw format".into())
            }
            (LineRecord::Text(t), _) | (LineRecord::Object { text: t }, _) => texts.push(t),
        }
    }
    Ok(Song::from_texts(rec.artist, rec.title, rec.popularity_rank, texts))
}

pub fn write_corpus(path: &Path, songs: &[Song]) -> std::io::Result<usize> {
    jsonl::write_records(path, songs)
}

/// Songs grouped per artist, each group in input order. Used by reports.
pub fn songs_by_artist(songs: &[Song]) -> BTreeMap<&str, Vec<&Song>> {
    let mut out: BTreeMap<&str, Vec<&Song>> = BTreeMap::new();
    for s in songs {
        out.entry(s.artist.as_str()).or_default().push(s);
    }
    out
}

/// Index songs by `(artist, title)`.
pub fn index_songs(songs: &[Song]) -> HashMap<(&str, &str), &Song> {
    songs.iter().map(|s| (s.key(), s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(text: &str) -> LyricLine {
        LyricLine::new(0, text)
    }

    fn distinct_words(n: usize, salt: &str) -> String {
        (0..n)
            .map(|i| format!("{salt}{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn line_rules() {
        let cfg = FilterConfig::default();
        assert_eq!(
            filter_line(&line("la la"), &cfg),
            Err(LineRejection::TooFewUniqueWords)
        );
        assert_eq!(
            filter_line(&line(&distinct_words(21, "w")), &cfg),
            Err(LineRejection::TooManyWords)
        );
        assert_eq!(filter_line(&line("hello world"), &cfg), Ok(()));
        assert_eq!(filter_line(&line(&distinct_words(20, "w")), &cfg), Ok(()));
        assert_eq!(
            filter_line(&line(""), &cfg),
            Err(LineRejection::TooFewUniqueWords)
        );
    }

    #[test]
    fn song_rules() {
        let cfg = FilterConfig::default();
        let s14 = Song::from_texts("a", "t", 1, (0..14).map(|i| distinct_words(4, &format!("l{i}x"))));
        assert!(filter_song(&s14, &cfg).is_err());

        let s15 = Song::from_texts("a", "t", 1, (0..15).map(|i| distinct_words(4, &format!("l{i}x"))));
        assert_eq!(filter_song(&s15, &cfg), Ok(()));

        // 20 lines: even lines carry 4 distinct words, odd lines only 3.
        let texts = (0..20).map(|i| distinct_words(if i % 2 == 0 { 4 } else { 3 }, &format!("l{i}x")));
        let s20 = Song::from_texts("a", "t", 1, texts);
        assert_eq!(
            filter_song(&s20, &cfg),
            Err(SongRejection::LowDiversity { qualifying: 10 })
        );
    }

    fn artist_songs(artist: &str, n: u32) -> Vec<Song> {
        (1..=n)
            .map(|r| Song::from_texts(artist, format!("song {r}"), r, ["x y"]))
            .collect()
    }

    #[test]
    fn cap_keeps_top_ranks() {
        let cfg = FilterConfig::default();
        let kept = cap_artist(artist_songs("a", 60), &cfg).unwrap();
        assert_eq!(kept.len(), 50);
        assert!(kept.iter().map(|s| s.popularity_rank).eq(1..=50));

        assert_eq!(cap_artist(artist_songs("a", 3), &cfg).unwrap().len(), 3);

        let mut two = artist_songs("a", 55);
        two.extend(artist_songs("b", 55));
        assert_eq!(cap_artist(two, &cfg).unwrap().len(), 100);
    }

    #[test]
    fn cap_preserves_order() {
        let mut songs = artist_songs("a", 60);
        songs.reverse();
        let kept = cap_artist(songs, &FilterConfig::default()).unwrap();
        assert!(kept.iter().map(|s| s.popularity_rank).eq((1..=50).rev()));
    }

    #[test]
    fn cap_rejects_duplicate_rank() {
        let mut songs = artist_songs("a", 2);
        songs[1].popularity_rank = 1;
        assert!(matches!(
            cap_artist(songs, &FilterConfig::default()),
            Err(CorpusError::DuplicateRank { rank: 1, .. })
        ));
    }

    #[test]
    fn zero_config_field_rejected() {
        let cfg = FilterConfig {
            max_line_words: 0,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(CorpusError::InvalidConfig("max_line_words"))
        ));
    }

    #[test]
    fn ingest_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.jsonl");
        std::fs::write(&empty, "").unwrap();
        let (songs, rep) = ingest(&empty, InputFormat::Auto).unwrap();
        assert!(songs.is_empty());
        assert_eq!(rep, IngestReport::default());

        let p = dir.path().join("songs.jsonl");
        std::fs::write(
            &p,
            concat!(
                r#"{"artist":"A","title":"T","popularity_rank":1,"lines":["Hello hello world","la"]}"#,
                "\n",
                r#"{"artist":"A","title":"U","popularity_rank":2}"#,
                "\n",
                "not json\n",
                r#"{"artist":"A","title":"V","popularity_rank":3,"lines":[{"text":"x y","word_count":99,"unique_word_count":99,"index":0}]}"#,
                "\n",
            ),
        )
        .unwrap();
        let (songs, rep) = ingest(&p, InputFormat::Auto).unwrap();
        assert_eq!(songs.len(), 2);
        assert_eq!(songs[0].lines[0].word_count, 3);
        assert_eq!(songs[0].lines[0].unique_word_count, 2);
        assert_eq!(songs[1].lines[0].word_count, 2, "stats are recounted");
        assert_eq!(rep.records_read, 4);
        assert_eq!(rep.malformed.len(), 2);
        assert_eq!(rep.malformed[0].line, 2);
        assert!(rep.malformed[0].message.contains("lines"));

        let (songs, rep) = ingest(&p, InputFormat::Raw).unwrap();
        assert_eq!(songs.len(), 1);
        assert_eq!(rep.malformed.len(), 3);
    }

    #[test]
    fn ingest_missing_file_is_fatal() {
        assert!(matches!(
            ingest(Path::new("/nonexistent/x.jsonl"), InputFormat::Auto),
            Err(CorpusError::Io { .. })
        ));
    }

    fn arb_song(artist: u8, rank: u32) -> impl Strategy<Value = Song> {
        let word = prop::sample::select(vec!["a", "b", "c", "d", "e", "f", "g", "h", "la", "oh"]);
        let text = prop::collection::vec(word, 0..24).prop_map(|w| w.join(" "));
        prop::collection::vec(text, 0..30)
            .prop_map(move |lines| Song::from_texts(format!("artist{artist}"), format!("t{rank}"), rank, lines))
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<Song>> {
        prop::collection::vec((0u8..3, 1u32..8), 0..12).prop_flat_map(|keys| {
            let mut seen = HashSet::new();
            let keys: Vec<_> = keys.into_iter().filter(|k| seen.insert(*k)).collect();
            keys.into_iter().map(|(a, r)| arb_song(a, r)).collect::<Vec<_>>()
        })
    }

    fn small_cfg() -> impl Strategy<Value = FilterConfig> {
        (1usize..6, 1usize..6, 1usize..4, 1usize..25, 1u32..8).prop_map(|(q, u, lu, mw, top)| FilterConfig {
            min_qualifying_lines: q,
            min_unique_per_qualifying_line: u,
            min_line_unique_words: lu,
            max_line_words: mw,
            top_songs_per_artist: top,
        })
    }

    proptest! {
        #[test]
        fn filtering_is_idempotent(corpus in arb_corpus(), cfg in small_cfg()) {
            let (once, _) = filter_corpus(corpus, &cfg).unwrap();
            let (twice, rep) = filter_corpus(once.clone(), &cfg).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(rep.songs_in, rep.songs_out);
        }

        #[test]
        fn tightening_never_grows(corpus in arb_corpus(), cfg in small_cfg(), which in 0usize..5) {
            let mut tight = cfg;
            match which {
                0 => tight.min_qualifying_lines += 1,
                1 => tight.min_unique_per_qualifying_line += 1,
                2 => tight.min_line_unique_words += 1,
                3 => tight.max_line_words = (tight.max_line_words - 1).max(1),
                _ => tight.top_songs_per_artist = (tight.top_songs_per_artist - 1).max(1),
            }
            let (loose, _) = filter_corpus(corpus.clone(), &cfg).unwrap();
            let (strict, _) = filter_corpus(corpus, &tight).unwrap();
            let loose_keys: HashSet<_> = loose.iter().map(|s| s.key()).collect();
            prop_assert!(strict.iter().all(|s| loose_keys.contains(&s.key())));
        }

        #[test]
        fn report_counts_are_sound(corpus in arb_corpus(), cfg in small_cfg()) {
            let (kept, rep) = filter_corpus(corpus, &cfg).unwrap();
            prop_assert_eq!(rep.songs_out, kept.len());
            prop_assert!(rep.songs_out <= rep.songs_in);
            let r = &rep.rejections;
            prop_assert!(r.song_low_diversity + r.song_over_artist_cap >= rep.songs_in - rep.songs_out);
            prop_assert_eq!(rep.lines_in - rep.lines_out >= r.line_too_few_unique_words + r.line_too_many_words, true);
            for s in &kept {
                prop_assert!(s.lines.iter().enumerate().all(|(i, l)| l.index == i));
            }
        }
    }
}
