use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::corpus::{LabeledSentence, Provenance};

/// Splits text on whitespace, then peels punctuation off into single-char
/// tokens. Hyphens and apostrophes between letters stay inside the word
/// (`kanak-kanak`, `Qur'an`).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let joiner = (c == '-' || c == '\'')
                && !word.is_empty()
                && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if c.is_alphanumeric() || joiner {
                word.push(c);
            } else {
                if !word.is_empty() {
                    out.push(std::mem::take(&mut word));
                }
                out.push(c.to_string());
            }
        }
        if !word.is_empty() {
            out.push(word);
        }
    }
    out
}

/// Punctuation and numbers pass the dictionary test unconditionally.
pub fn is_exempt(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphabetic)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: BTreeSet<String>,
    case_fold: bool,
}

impl Vocabulary {
    pub fn new(case_fold: bool) -> Vocabulary {
        Vocabulary {
            tokens: BTreeSet::new(),
            case_fold,
        }
    }

    pub fn case_fold(&self) -> bool {
        self.case_fold
    }

    pub fn normalize(&self, token: &str) -> String {
        if self.case_fold {
            token.to_lowercase()
        } else {
            token.to_string()
        }
    }

    pub fn insert(&mut self, token: &str) {
        if !token.is_empty() {
            let n = self.normalize(token);
            self.tokens.insert(n);
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.contains(&self.normalize(token))
    }

    /// Membership as used by the dictionary filter.
    pub fn admits(&self, token: &str) -> bool {
        is_exempt(token) || self.contains(token)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }

    /// One token per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str, case_fold: bool) -> Vocabulary {
        let mut v = Vocabulary::new(case_fold);
        for line in text.lines() {
            v.insert(line.trim());
        }
        v
    }
}

/// Collects every distinct normalized token of the corpus. Punctuation
/// tokens are included like any other.
pub fn build_vocab<'a, I>(documents: I, case_fold: bool) -> Vocabulary
where
    I: IntoIterator<Item = &'a str>,
{
    let mut v = Vocabulary::new(case_fold);
    for doc in documents {
        for tok in tokenize(doc) {
            v.insert(&tok);
        }
    }
    v
}

/// Keeps sentences whose every token the vocabulary admits.
pub fn filter_by_vocab(source: &[LabeledSentence], vocab: &Vocabulary) -> Vec<LabeledSentence> {
    source
        .iter()
        .filter(|s| s.tokens.iter().all(|t| vocab.admits(t)))
        .map(|s| LabeledSentence {
            provenance: Provenance::Homologous,
            ..s.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{NerLabel, SentenceId};

    fn unlabeled(words: &str) -> LabeledSentence {
        let tokens: Vec<String> = words.split(' ').map(String::from).collect();
        let tags = vec![NerLabel::O; tokens.len()];
        LabeledSentence::new(SentenceId::new("id", 0), tokens, tags, Provenance::External).unwrap()
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Harga: 12."), ["Harga", ":", "12", "."]);
        assert_eq!(tokenize("kanak-kanak  main"), ["kanak-kanak", "main"]);
        assert_eq!(tokenize("(Ali)"), ["(", "Ali", ")"]);
        assert_eq!(tokenize("end-"), ["end", "-"]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn build_examples() {
        let v = build_vocab(["saya suka saya"], true);
        assert_eq!(v.len(), 2);
        assert!(v.contains("saya") && v.contains("suka"));
        assert!(build_vocab(std::iter::empty::<&str>(), true).is_empty());
        let v = build_vocab(["Saya saya"], true);
        assert_eq!(v.len(), 1);
        let v = build_vocab(["Saya saya"], false);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn filter_examples() {
        let v = build_vocab(["saya suka nasi"], true);
        let kept = filter_by_vocab(&[unlabeled("saya suka nasi"), unlabeled("saya suka rendang")], &v);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].tokens, ["saya", "suka", "nasi"]);
        assert_eq!(kept[0].provenance, Provenance::Homologous);

        let v = build_vocab(["harga"], true);
        assert_eq!(filter_by_vocab(&[unlabeled("Harga : 12")], &v).len(), 1);
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab(["b a c a"], true);
        assert_eq!(Vocabulary::from_text(&v.to_text(), true), v);
        assert!(!Vocabulary::from_text("\n\n", true).iter().any(str::is_empty));
    }
}
