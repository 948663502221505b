//! Canonical text form and character-offset helpers.
//!
//! All offsets exposed outside this crate count Unicode scalar values, not
//! bytes, so they line up with the offsets used by common QA tooling.

use unicode_normalization::UnicodeNormalization;

/// NFC-compose, collapse every whitespace run to one ASCII space, trim.
pub fn normalize_text(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Substring by character offsets `[start, end)`; `None` when out of range
/// or `start > end`.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let begin = byte_offset(text, start)?;
    let finish = byte_offset(text, end)?;
    Some(&text[begin..finish])
}

/// Byte offset of the `char_idx`-th character; `text.len()` for one past the end.
pub fn byte_offset(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (b, _) in text.char_indices() {
        if seen == char_idx {
            return Some(b);
        }
        seen += 1;
    }
    (seen == char_idx).then_some(text.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace_and_trims() {
        assert_eq!(normalize_text("  deep \t\n sleep  "), "deep sleep");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text(" \n "), "");
    }

    #[test]
    fn composes_to_nfc() {
        let decomposed = "cafe\u{301}";
        assert_eq!(normalize_text(decomposed), "caf\u{e9}");
    }

    #[test]
    fn char_slices_multibyte() {
        let s = "naïve sleep";
        assert_eq!(char_slice(s, 0, 5), Some("naïve"));
        assert_eq!(char_slice(s, 6, 11), Some("sleep"));
        assert_eq!(char_slice(s, 6, 12), None);
        assert_eq!(char_slice(s, 3, 2), None);
        assert_eq!(char_len(s), 11);
    }
}
