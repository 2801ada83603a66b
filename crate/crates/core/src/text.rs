//! Word tokenization shared by the corpus filters and the profanity scorer.
//!
//! A word is a whitespace-separated token, case-folded, with leading and
//! trailing non-alphanumeric characters removed. Tokens that strip down to
//! nothing ("...", "--") are not words.

use std::collections::HashSet;

pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let t = raw.trim_matches(|c: char| !c.is_alphanumeric());
        (!t.is_empty()).then(|| t.to_lowercase())
    })
}

/// `(word_count, unique_word_count)` for a line of text.
pub fn word_stats(text: &str) -> (usize, usize) {
    let mut seen = HashSet::new();
    let mut total = 0;
    for tok in tokens(text) {
        total += 1;
        seen.insert(tok);
    }
    (total, seen.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(word_stats(""), (0, 0));
        assert_eq!(word_stats("   \t\n"), (0, 0));
    }

    #[test]
    fn case_and_punctuation_fold() {
        assert_eq!(word_stats("La, la LA!"), (3, 1));
        assert_eq!(word_stats("Don't stop... \u{2014} believin'"), (3, 3));
        let toks: Vec<_> = tokens("\"Hello,\" World?!").collect();
        assert_eq!(toks, ["hello", "world"]);
    }

    #[test]
    fn unicode_words() {
        assert_eq!(word_stats("Ça va, ÇA VA"), (4, 2));
        assert_eq!(word_stats("愛してる 愛してる"), (2, 1));
    }

    proptest! {
        #[test]
        fn never_panics_and_unique_bounded(s in "\\PC*") {
            let (w, u) = word_stats(&s);
            prop_assert!(u <= w);
        }
    }
}
