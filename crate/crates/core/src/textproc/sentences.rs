use super::segment::is_abbreviation;

/// Splits running text into sentences.
///
/// A boundary is a run of `.`, `!` or `?` (plus closing quotes or brackets)
/// followed by whitespace and an uppercase letter, digit or opening quote.
/// A period after a known abbreviation is not a boundary.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < chars.len() && matches!(chars[j + 1].1, '.' | '!' | '?' | '"' | '\'' | '”' | '’' | ')' | ']') {
            j += 1;
        }
        let end = chars[j].0 + chars[j].1.len_utf8();
        let mut k = j + 1;
        let mut saw_space = false;
        while k < chars.len() && chars[k].1.is_whitespace() {
            saw_space = true;
            k += 1;
        }
        let next_starts_sentence = k < chars.len()
            && saw_space
            && (chars[k].1.is_uppercase()
                || chars[k].1.is_ascii_digit()
                || (matches!(chars[k].1, '"' | '“' | '\'' | '(')
                    && chars.get(k + 1).is_some_and(|(_, ch)| ch.is_uppercase())));
        let abbreviation = c == '.' && i == j && is_abbreviation(text, pos);
        if next_starts_sentence && !abbreviation {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = chars[k].0;
            i = k;
            continue;
        }
        i = j + 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminator_boundaries() {
        assert_eq!(split_sentences("A. B? C!"), vec!["A.", "B?", "C!"]);
    }

    #[test]
    fn empty_text() {
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn two_sentence_revised_situation() {
        let revised = "The geological history of our planet is marked by numerous catastrophic events, such as \
                       massive volcanic eruptions and asteroid impacts, which have had a significant impact on the \
                       evolution of life on Earth. However, our evolving dynamic planet has survived sea level \
                       changes of hundreds of metres.";
        // two sentence-final periods, each followed by a capital or the end
        assert_eq!(split_sentences(revised).len(), 2);
    }

    #[test]
    fn lowercase_continuation_and_abbreviations() {
        assert_eq!(split_sentences("Version 2.5 is out. see notes."), vec!["Version 2.5 is out. see notes."]);
        assert_eq!(split_sentences("Mr. Smith left. He was sad."), vec!["Mr. Smith left.", "He was sad."]);
        assert_eq!(split_sentences("He said \"Stop.\" Then he left."), vec!["He said \"Stop.\"", "Then he left."]);
    }
}
