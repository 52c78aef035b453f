//! Constituent providers for span removal.

use std::collections::HashSet;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::io::SpanSidecar;
use crate::model::{Template, TemplateToken};

/// Supplies constituent spans over template token positions. Spans are
/// end-exclusive and must be well nested.
pub trait ParseProvider: Send + Sync {
    fn constituents(&self, t: &Template) -> Result<Vec<Range<usize>>>;
}

pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "in", "on", "at", "of",
    "for", "to", "with", "by", "from", "near", "and", "or", "but", "as", "it", "its", "that", "which", "who", "whom",
    "whose", "this", "these", "those", "there", "here", "he", "she", "they", "him", "her", "them", "his", "their",
    "also", "not", "into", "onto", "than", "then", "where", "when", "while",
];

/// Chunks a sentence into runs of function words followed by runs of
/// content words, split at punctuation.
///
/// Constituents are the whole sentence, every single token, every chunk,
/// and the content tail of every chunk that starts with function words.
#[derive(Clone, Debug)]
pub struct HeuristicChunker {
    stop_words: HashSet<String>,
}

impl Default for HeuristicChunker {
    fn default() -> Self {
        HeuristicChunker::new(DEFAULT_STOP_WORDS.iter().copied())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Function,
    Content,
    Punct,
}

impl HeuristicChunker {
    pub fn new<I, S>(stop_words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        HeuristicChunker {
            stop_words: stop_words.into_iter().map(|s| s.as_ref().to_lowercase()).collect(),
        }
    }

    fn kind(&self, tok: &TemplateToken) -> Kind {
        match tok {
            TemplateToken::Nonterminal(_) => Kind::Content,
            TemplateToken::Terminal(w) if w.chars().all(|c| c.is_ascii_punctuation()) => Kind::Punct,
            TemplateToken::Terminal(w) if self.stop_words.contains(&w.to_lowercase()) => Kind::Function,
            TemplateToken::Terminal(_) => Kind::Content,
        }
    }

    /// `(chunk, content tail start)` pairs.
    fn chunks(&self, tokens: &[TemplateToken]) -> Vec<(Range<usize>, usize)> {
        let kinds: Vec<Kind> = tokens.iter().map(|t| self.kind(t)).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < kinds.len() {
            if kinds[i] == Kind::Punct {
                i += 1;
                continue;
            }
            let start = i;
            while i < kinds.len() && kinds[i] == Kind::Function {
                i += 1;
            }
            let tail = i;
            while i < kinds.len() && kinds[i] == Kind::Content {
                i += 1;
            }
            out.push((start..i, tail));
        }
        out
    }
}

impl ParseProvider for HeuristicChunker {
    fn constituents(&self, t: &Template) -> Result<Vec<Range<usize>>> {
        let n = t.len();
        let mut spans = vec![0..n];
        for (chunk, tail) in self.chunks(t.tokens()) {
            if chunk.len() > 1 && chunk != (0..n) {
                spans.push(chunk.clone());
            }
            if tail > chunk.start && chunk.end - tail > 1 {
                spans.push(tail..chunk.end);
            }
        }
        if n > 1 {
            spans.extend((0..n).map(|i| i..i + 1));
        }
        Ok(spans)
    }
}

/// Spans read from a sidecar file, keyed by template id; templates without
/// an entry fall back to another provider.
pub struct SidecarParser<P> {
    spans: SpanSidecar,
    fallback: P,
}

impl<P: ParseProvider> SidecarParser<P> {
    pub fn new(spans: SpanSidecar, fallback: P) -> Self {
        SidecarParser { spans, fallback }
    }
}

impl<P: ParseProvider> ParseProvider for SidecarParser<P> {
    fn constituents(&self, t: &Template) -> Result<Vec<Range<usize>>> {
        let Some(spans) = self.spans.get(&t.id) else {
            return self.fallback.constituents(t);
        };
        let spans: Vec<Range<usize>> = spans.iter().map(|&(s, e)| s..e).collect();
        check_nested(&spans, t.len())
            .map_err(|reason| Error::InvalidParameter(format!("spans for `{}`: {reason}", t.id)))?;
        Ok(spans)
    }
}

/// Checks bounds, non-emptiness and that no two spans cross.
pub fn check_nested(spans: &[Range<usize>], len: usize) -> std::result::Result<(), String> {
    for s in spans {
        if s.start >= s.end || s.end > len {
            return Err(format!("span {s:?} outside 0..{len}"));
        }
    }
    for (i, a) in spans.iter().enumerate() {
        for b in &spans[i + 1..] {
            let crossing = a.start < b.start && b.start < a.end && a.end < b.end
                || b.start < a.start && a.start < b.end && b.end < a.end;
            if crossing {
                return Err(format!("spans {a:?} and {b:?} cross"));
            }
        }
    }
    Ok(())
}
