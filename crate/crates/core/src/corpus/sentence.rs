/// Splits text into sentences.
pub trait SentenceSplitter {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str>;
}

/// Rule-based splitter: a sentence ends at `.`, `!`, `?` or `;` when the
/// terminator is followed by whitespace and an uppercase letter, or by the
/// end of the text. Abbreviations get no special treatment.
///
/// Returned segments are trimmed and never empty.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleSentenceSplitter;

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | ';')
}

impl SentenceSplitter for RuleSentenceSplitter {
    fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let mut out = Vec::new();
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut start = 0usize;
        let mut i = 0usize;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if is_terminator(c) {
                let end = pos + c.len_utf8();
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_whitespace() {
                    j += 1;
                }
                let boundary = if j == chars.len() {
                    true
                } else {
                    j > i + 1 && chars[j].1.is_uppercase()
                };
                if boundary {
                    push_trimmed(&mut out, &text[start..end]);
                    start = if j == chars.len() {
                        text.len()
                    } else {
                        chars[j].0
                    };
                    i = j;
                    continue;
                }
            }
            i += 1;
        }
        if start < text.len() {
            push_trimmed(&mut out, &text[start..]);
        }
        out
    }
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, segment: &'a str) {
    let trimmed = segment.trim();
    if !trimmed.is_empty() {
        out.push(trimmed);
    }
}
