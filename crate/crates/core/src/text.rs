//! Script-neutral tokenization shared by ROUGE, LEAD-n and the mock embedder.
//!
//! Rules:
//! - split on Unicode whitespace;
//! - strip leading and trailing characters of any Unicode punctuation
//!   category (`Pc Pd Ps Pe Pi Pf Po`) from each token, dropping tokens
//!   that become empty;
//! - lowercase Latin-script letters only, leaving every other script as is;
//! - no stemming.

use unicode_general_category::{get_general_category, GeneralCategory};

/// Returns true for characters in one of the Unicode punctuation categories.
pub fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// Latin letters: ASCII, Latin-1 Supplement, Latin Extended-A/B, IPA,
/// Latin Extended Additional and the fullwidth Latin forms.
fn is_latin_letter(c: char) -> bool {
    if !c.is_alphabetic() {
        return false;
    }
    matches!(c as u32,
        0x0041..=0x005A
        | 0x0061..=0x007A
        | 0x00C0..=0x024F
        | 0x0250..=0x02AF
        | 0x1E00..=0x1EFF
        | 0xFF21..=0xFF3A
        | 0xFF41..=0xFF5A)
}

fn normalize_token(raw: &str) -> Option<String> {
    let stripped = raw.trim_matches(is_punctuation);
    if stripped.is_empty() {
        return None;
    }
    let mut out = String::with_capacity(stripped.len());
    for c in stripped.chars() {
        if is_latin_letter(c) {
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    Some(out)
}

/// Tokenizes `text` with the rules in the module docs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(normalize_token).collect()
}

/// Splits on `\n` and tokenizes each line, dropping lines with no tokens.
pub fn tokenize_sentences(text: &str) -> Vec<Vec<String>> {
    text.split('\n')
        .map(tokenize)
        .filter(|tokens| !tokens.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_edge_punctuation_only() {
        assert_eq!(tokenize("Hello, world!"), vec!["hello", "world"]);
        assert_eq!(tokenize("don't (stop)"), vec!["don't", "stop"]);
        assert_eq!(tokenize("«quoted» — dash"), vec!["quoted", "dash"]);
    }

    #[test]
    fn drops_punctuation_only_tokens() {
        assert_eq!(tokenize("a , b ... c"), vec!["a", "b", "c"]);
        assert!(tokenize(" ?! ").is_empty());
    }

    #[test]
    fn lowercases_latin_but_not_other_scripts() {
        assert_eq!(tokenize("ÉCOLE Straße"), vec!["école", "straße"]);
        // Greek and Cyrillic capitals are left untouched.
        assert_eq!(tokenize("ΑΒΓ ЖЗ"), vec!["ΑΒΓ", "ЖЗ"]);
        // Bengali danda is punctuation and gets stripped.
        assert_eq!(tokenize("আমি ভাত খাই।"), vec!["আমি", "ভাত", "খাই"]);
    }

    #[test]
    fn unicode_whitespace_splits() {
        assert_eq!(tokenize("a\u{00A0}b\u{2003}c\td"), vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn sentences_split_on_newline_only() {
        let s = tokenize_sentences("One two.\n\nThree\r\nfour. five");
        assert_eq!(s, vec![vec!["one", "two"], vec!["three"], vec!["four", "five"]]);
    }
}
