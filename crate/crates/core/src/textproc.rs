//! Tokenization and sentence segmentation.
//!
//! Every budget in the crate is counted in the tokens produced here. The
//! rule is deliberately simple: split on whitespace, then peel leading and
//! trailing punctuation characters off each word as one-character tokens.
//! Words that exactly match a structural or decoration marker (`<S>`, `<pl>`,
//! ...) stay atomic.

use std::collections::HashSet;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Structural and decoration markers, in documented order.
pub const SPECIAL_TOKENS: [&str; 11] = [
    "<S>", "<T>", "<ABS>", "<pl>", "</pl>", "<pop>", "</pop>", "<inter>", "</inter>", "<out>",
    "</out>",
];

const BUNDLED_ABBREVIATIONS: &str = include_str!("../data/abbreviations.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Byte offsets `[start, end)` into the source text.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub index: usize,
}

/// Replaceable tokenization boundary. Implementations must return ordered,
/// non-overlapping tokens whose spans slice the source to their text.
pub trait Tokenizer: Send + Sync {
    fn tokenize(&self, text: &str) -> Vec<Token>;
}

/// The default whitespace-and-punctuation tokenizer.
#[derive(Debug, Default, Clone, Copy)]
pub struct WordTokenizer;

impl Tokenizer for WordTokenizer {
    fn tokenize(&self, text: &str) -> Vec<Token> {
        tokenize(text)
    }
}

pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
                | '\u{00B1}' | '\u{00B7}'
        )
}

pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (start, word) in words(text) {
        push_word_tokens(text, start, word, &mut out);
    }
    out
}

pub fn token_count(text: &str) -> usize {
    let mut sink = Vec::new();
    let mut n = 0;
    for (start, word) in words(text) {
        sink.clear();
        push_word_tokens(text, start, word, &mut sink);
        n += sink.len();
    }
    n
}

fn words(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = text;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let skip = rest.len() - rest.trim_start().len();
        offset += skip;
        rest = &rest[skip..];
        if rest.is_empty() {
            return None;
        }
        let len = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let start = offset;
        let word = &rest[..len];
        offset += len;
        rest = &rest[len..];
        Some((start, word))
    })
}

fn push_word_tokens(text: &str, start: usize, word: &str, out: &mut Vec<Token>) {
    let tok = |s: usize, e: usize| Token { text: text[s..e].to_string(), start: s, end: e };
    if SPECIAL_TOKENS.contains(&word) {
        out.push(tok(start, start + word.len()));
        return;
    }
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut lo = 0;
    while lo < chars.len() && is_punct(chars[lo].1) {
        lo += 1;
    }
    if lo == chars.len() {
        // all punctuation: one token per character
        for &(i, c) in &chars {
            out.push(tok(start + i, start + i + c.len_utf8()));
        }
        return;
    }
    let mut hi = chars.len();
    while hi > lo && is_punct(chars[hi - 1].1) {
        hi -= 1;
    }
    for &(i, c) in &chars[..lo] {
        out.push(tok(start + i, start + i + c.len_utf8()));
    }
    let core_start = start + chars[lo].0;
    let core_end = if hi == chars.len() { start + word.len() } else { start + chars[hi].0 };
    out.push(tok(core_start, core_end));
    for &(i, c) in &chars[hi..] {
        out.push(tok(start + i, start + i + c.len_utf8()));
    }
}

/// Rule-based sentence splitter with an abbreviation stop-list.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        SentenceSplitter::from_list(BUNDLED_ABBREVIATIONS)
    }
}

impl SentenceSplitter {
    /// Parses a stop-list: one abbreviation per line, `#` starts a comment.
    pub fn from_list(list: &str) -> Self {
        let abbreviations = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        SentenceSplitter { abbreviations }
    }

    pub fn from_file(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Self::from_list(&fs::read_to_string(path)?))
    }

    pub fn bundled() -> &'static SentenceSplitter {
        static SPLITTER: OnceLock<SentenceSplitter> = OnceLock::new();
        SPLITTER.get_or_init(SentenceSplitter::default)
    }

    fn is_abbreviation(&self, text: &str, dot: usize) -> bool {
        let word_start = text[..dot].rfind(char::is_whitespace).map_or(0, |i| i + 1);
        let word = text[word_start..=dot].trim_start_matches(['(', '[', '"', '\'']);
        self.abbreviations.contains(&word.to_lowercase())
    }

    pub fn split(&self, text: &str) -> Vec<Sentence> {
        let mut sentences = Vec::new();
        let mut start = match text.find(|c: char| !c.is_whitespace()) {
            Some(s) => s,
            None => return sentences,
        };
        let bytes = text.as_bytes();
        let mut i = start;
        while i < text.len() {
            let b = bytes[i];
            if !matches!(b, b'.' | b'?' | b'!') {
                i += 1;
                continue;
            }
            let mut k = i + 1;
            while k < text.len() && matches!(bytes[k], b'.' | b'?' | b'!') {
                k += 1;
            }
            while let Some(c) = text[k..].chars().next() {
                if matches!(c, ')' | ']' | '"' | '\'' | '\u{201D}' | '\u{2019}') {
                    k += c.len_utf8();
                } else {
                    break;
                }
            }
            let rest = &text[k..];
            let ws = rest.len() - rest.trim_start().len();
            let next = rest[ws..].chars().next();
            let boundary = ws > 0
                && next.is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
                && !(b == b'.' && self.is_abbreviation(text, i));
            if boundary {
                sentences.push(sentence(text, start, k, sentences.len()));
                start = k + ws;
                i = start;
            } else {
                i = k;
            }
        }
        let end = start + text[start..].trim_end().len();
        if end > start {
            sentences.push(sentence(text, start, end, sentences.len()));
        }
        sentences
    }
}

fn sentence(text: &str, start: usize, end: usize, index: usize) -> Sentence {
    Sentence { text: text[start..end].to_string(), start, end, index }
}

/// Splits with the bundled abbreviation list.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    SentenceSplitter::bundled().split(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenize_detaches_terminal_punctuation() {
        let t = tokenize("Inhaled antibiotics improve FEV1.");
        assert_eq!(texts(&t), ["Inhaled", "antibiotics", "improve", "FEV1", "."]);
        assert_eq!(t[4].start, 32);
    }

    #[test]
    fn tokenize_empty_and_operators() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \n\t").is_empty());
        assert_eq!(texts(&tokenize("n = 45")), ["n", "=", "45"]);
    }

    #[test]
    fn tokenize_peels_both_sides_and_keeps_inner_punctuation() {
        assert_eq!(texts(&tokenize("(n=45).")), ["(", "n=45", ")", "."]);
        assert_eq!(texts(&tokenize("e.g.")), ["e.g", "."]);
        assert_eq!(texts(&tokenize("--")), ["-", "-"]);
    }

    #[test]
    fn special_tokens_are_atomic() {
        assert_eq!(texts(&tokenize("<S> <T> x <ABS>")), ["<S>", "<T>", "x", "<ABS>"]);
        assert_eq!(texts(&tokenize("<S>x")), ["<", "S>x"]);
    }

    #[test]
    fn tokenize_multibyte() {
        let t = tokenize("“Größe” ±2");
        assert_eq!(texts(&t), ["“", "Größe", "”", "±", "2"]);
    }

    #[test]
    fn split_two_sentences() {
        let s = split_sentences("A improved. B did not.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "A improved.");
        assert_eq!(s[1].text, "B did not.");
        assert_eq!(s[1].index, 1);
    }

    #[test]
    fn split_without_boundary() {
        let s = split_sentences("No terminal punctuation");
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].text, "No terminal punctuation");
    }

    #[test]
    fn split_respects_abbreviations() {
        let s = split_sentences("Results vs. control were mixed. Done.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].text, "Results vs. control were mixed.");
        let s = split_sentences("Patients saw Dr. Smith. Fig. 2 shows it.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].text, "Fig. 2 shows it.");
    }

    #[test]
    fn split_digit_start_and_closing_paren() {
        let s = split_sentences("It worked (p < 0.01.) 45 patients left! Why? Unknown");
        let t: Vec<_> = s.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(t, ["It worked (p < 0.01.)", "45 patients left!", "Why?", "Unknown"]);
    }

    #[test]
    fn split_whitespace_only() {
        assert!(split_sentences("   ").is_empty());
        assert!(split_sentences("").is_empty());
    }

    #[test]
    fn custom_stop_list() {
        let sp = SentenceSplitter::from_list("# none\nwk.\n");
        assert_eq!(sp.split("At wk. 4 it held.").len(), 1);
        assert_eq!(sp.split("Dr. Smith came.").len(), 2);
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                "[A-Za-z]{1,8}",
                "[0-9]{1,3}",
                Just(".".to_string()),
                Just("vs.".to_string()),
                Just("Dr.".to_string()),
                Just("?".to_string()),
                Just("(n=4).".to_string()),
                Just("é".to_string()),
            ],
            0..30,
        )
        .prop_flat_map(|words| {
            let n = words.len();
            (Just(words), proptest::collection::vec(prop_oneof![Just(" "), Just("  "), Just("\n")], n))
        })
        .prop_map(|(words, seps)| {
            words.iter().zip(seps).map(|(w, s)| format!("{w}{s}")).collect::<String>()
        })
    }

    proptest! {
        #[test]
        fn tokens_slice_source(text in text_strategy()) {
            let toks = tokenize(&text);
            let mut last = 0;
            for t in &toks {
                prop_assert!(t.start >= last && t.end > t.start && t.end <= text.len());
                prop_assert_eq!(&text[t.start..t.end], t.text.as_str());
                last = t.end;
            }
            prop_assert_eq!(token_count(&text), toks.len());
        }

        #[test]
        fn token_count_is_additive(a in text_strategy(), b in text_strategy()) {
            let joined = format!("{a} {b}");
            prop_assert_eq!(tokenize(&joined).len(), tokenize(&a).len() + tokenize(&b).len());
        }

        #[test]
        fn sentences_cover_text(text in text_strategy()) {
            let sents = split_sentences(&text);
            let mut rebuilt = String::new();
            let mut last = 0;
            for s in &sents {
                let gap = &text[last..s.start];
                prop_assert!(gap.chars().all(char::is_whitespace));
                rebuilt.push_str(gap);
                rebuilt.push_str(&s.text);
                last = s.end;
            }
            prop_assert!(text[last..].chars().all(char::is_whitespace));
            rebuilt.push_str(&text[last..]);
            prop_assert_eq!(rebuilt, text);
        }

        #[test]
        fn split_is_idempotent(text in text_strategy()) {
            for s in split_sentences(&text) {
                let again = split_sentences(&s.text);
                prop_assert_eq!(again.len(), 1);
                prop_assert_eq!(&again[0].text, &s.text);
            }
        }
    }
}
