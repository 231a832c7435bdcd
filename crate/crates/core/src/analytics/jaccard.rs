//! Token-set Jaccard similarity.

use std::collections::BTreeSet;

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // kana
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2FA1F)
}

/// Lowercase, drop punctuation and symbols, split on whitespace. Text that
/// contains CJK characters but yields at most one whitespace token is split
/// into single characters instead.
pub fn tokens(text: &str) -> BTreeSet<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    let words: BTreeSet<String> = cleaned.split_whitespace().map(str::to_string).collect();
    if words.len() <= 1 && cleaned.chars().any(is_cjk) {
        return cleaned
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect();
    }
    words
}

/// |T(a) ∩ T(b)| / |T(a) ∪ T(b)|, with two empty sets counting as identical.
pub fn jaccard(a: &str, b: &str) -> f64 {
    set_jaccard(&tokens(a), &tokens(b))
}

pub fn set_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(jaccard("a b c", "b c d"), 0.5);
        assert_eq!(jaccard("Hello, world!", "hello world"), 1.0);
        assert_eq!(jaccard("cat", "dog"), 0.0);
        assert_eq!(jaccard("", "  ...  "), 1.0);
        assert_eq!(jaccard("", "x"), 0.0);
    }

    #[test]
    fn cjk_falls_back_to_characters() {
        assert_eq!(tokens("旧日记。"), ["旧", "日", "记"].iter().map(|s| s.to_string()).collect());
        assert_eq!(jaccard("害羞的学生", "学生"), 0.4);
    }
}
