//! Description text normalization: lowercasing, punctuation stripping,
//! stop-word removal and an optional suffix-stripping stemmer.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

/// Normalizer settings. The stemmer is a plain longest-suffix stripper; swap
/// the stop list / suffix table per language through the config.
#[derive(Debug, Clone)]
pub struct Normalizer {
    pub stopwords: BTreeSet<String>,
    pub strip_suffixes: bool,
    /// Suffixes tried longest-first; at most one is stripped, and only when
    /// the remaining stem keeps at least `min_stem` characters.
    pub suffixes: Vec<String>,
    pub min_stem: usize,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer {
            stopwords: DEFAULT_STOPWORDS.iter().map(|s| String::from(*s)).collect(),
            strip_suffixes: true,
            suffixes: ["ing", "est", "ed", "es", "ly", "s"]
                .iter()
                .map(|s| String::from(*s))
                .collect(),
            min_stem: 3,
        }
    }
}

const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "an", "and", "at", "by", "for", "from", "in", "is", "it", "of", "on", "or", "the", "to",
    "with",
];

impl Normalizer {
    /// Lowercase, split on non-alphanumeric characters, drop stop words,
    /// optionally strip one suffix per token. Empty output is allowed.
    pub fn normalize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut token = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                for lc in ch.to_lowercase() {
                    token.push(lc);
                }
            } else if !token.is_empty() {
                self.push_token(&mut out, core::mem::take(&mut token));
            }
        }
        if !token.is_empty() {
            self.push_token(&mut out, token);
        }
        out
    }

    fn push_token(&self, out: &mut Vec<String>, token: String) {
        if self.stopwords.contains(&token) {
            return;
        }
        let token = if self.strip_suffixes { self.stem(token) } else { token };
        if !token.is_empty() {
            out.push(token);
        }
    }

    fn stem(&self, token: String) -> String {
        for suffix in &self.suffixes {
            if let Some(stem) = token.strip_suffix(suffix.as_str()) {
                if stem.chars().count() >= self.min_stem {
                    return String::from(stem);
                }
            }
        }
        token
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plain() -> Normalizer {
        Normalizer {
            stopwords: ["the"].iter().map(|s| String::from(*s)).collect(),
            strip_suffixes: false,
            ..Normalizer::default()
        }
    }

    #[test]
    fn strips_case_punctuation_and_stopwords() {
        assert_eq!(plain().normalize("The BEACH, the sea!"), vec!["beach", "sea"]);
    }

    #[test]
    fn empty_text_gives_empty_tokens() {
        assert!(plain().normalize("").is_empty());
        assert!(plain().normalize("  ,,; !").is_empty());
    }

    #[test]
    fn paragraph_fixture_matches_hand_normalization() {
        let n = Normalizer::default();
        // Hand-applied rules: lowercase, split on non-alphanumerics, drop
        // stopwords, strip one suffix ("family" loses "ly") where the stem
        // keeps >= 3 chars.
        let got = n.normalize("Sightseeing tours in the OLD town; family-friendly beaches!");
        assert_eq!(
            got,
            vec!["sightsee", "tour", "old", "town", "fami", "friend", "beach"]
        );
    }

    #[test]
    fn stemmer_respects_min_stem() {
        let n = Normalizer::default();
        // "sea" has no matching suffix and "es" would leave a 2-char stem
        // for "does" -> kept intact ("doe" is 3... pick "its" -> "it" < 3).
        assert_eq!(n.normalize("seas"), vec!["sea"]);
        assert_eq!(n.stem(String::from("abs")), "abs");
    }
}
