use unicode_normalization::UnicodeNormalization;

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Canonical form used on both sides of answer matching.
///
/// NFKC, lowercase, edge punctuation/whitespace trimmed, internal whitespace
/// collapsed, leading articles removed. The rules are applied until nothing
/// changes, so the output is always a fixed point. An empty result means the
/// token should be discarded.
pub fn normalize_answer(raw: &str) -> String {
    let mut current = raw.to_string();
    loop {
        let next = normalize_once(&current);
        if next == current {
            return next;
        }
        current = next;
    }
}

fn normalize_once(s: &str) -> String {
    let folded = s.nfkc().collect::<String>().to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed.trim_matches(|c: char| !c.is_alphanumeric());
    let mut words = trimmed.split(' ').peekable();
    if let Some(first) = words.peek() {
        if ARTICLES.contains(first) && trimmed.contains(' ') {
            words.next();
            return words.collect::<Vec<_>>().join(" ");
        }
    }
    trimmed.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_case_punctuation_and_article() {
        assert_eq!(normalize_answer("  The Coffee Shop! "), "coffee shop");
    }

    #[test]
    fn plain_word_is_fixed_point() {
        assert_eq!(normalize_answer("dog"), "dog");
    }

    #[test]
    fn collapses_inner_whitespace() {
        assert_eq!(normalize_answer("fast \t  food"), "fast food");
    }

    #[test]
    fn repeated_articles_all_removed() {
        assert_eq!(normalize_answer("the the dog"), "dog");
        assert_eq!(normalize_answer("An  THE apple."), "apple");
    }

    #[test]
    fn lone_article_is_kept() {
        assert_eq!(normalize_answer("A"), "a");
    }

    #[test]
    fn punctuation_only_is_empty() {
        assert_eq!(normalize_answer(" ...!? "), "");
        assert_eq!(normalize_answer(""), "");
    }

    #[test]
    fn compatibility_forms_fold() {
        // fullwidth letters fold under NFKC
        assert_eq!(normalize_answer("ＤＯＧ"), "dog");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,40}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once.clone());
        }
    }
}
