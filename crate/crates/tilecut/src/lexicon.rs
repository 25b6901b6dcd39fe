//! Lexicon construction and longest-match tokenization.
//!
//! A lexicon maps every inflected surface form of every lemma entry back to
//! its source entries. Tokenization walks the input word by word and greedily
//! consumes the longest known surface form, preferring multi-word compounds;
//! words matching nothing become unknown tokens. Matching is case-insensitive
//! and delimiter-insensitive (any non-alphanumeric run separates words), but
//! tokens always carry the original text slice and character span.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::taxonomy::ConceptId;

/// One strip/append suffix rule: remove `strip` from the end of the lemma,
/// then append `append`. An inapplicable rule (strip is not a suffix of the
/// lemma) makes the whole entry rejected at build time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub strip: String,
    pub append: String,
}

/// How an entry inflects: by suffix rules or by an explicit form list.
/// The two are mutually exclusive per entry; the bare lemma is always a
/// surface form in addition to whatever the pattern generates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inflection {
    Rules(Vec<SuffixRule>),
    Forms(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct LemmaEntry {
    pub lemma: String,
    /// Opaque part-of-speech tag; carried through, never interpreted.
    pub pos_tag: String,
    pub inflection: Inflection,
    pub concepts: Vec<ConceptId>,
}

/// An entry skipped by `build_lexicon`, with the reason.
#[derive(Debug, Clone)]
pub struct RejectedEntry {
    /// Index into the input entry list.
    pub index: usize,
    pub lemma: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaCandidate {
    pub lemma: String,
    pub pos_tag: String,
    pub concepts: Vec<ConceptId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Original text slice, case and internal delimiters preserved.
    pub surface: String,
    /// Character span (Unicode scalars) in the source, end exclusive.
    pub char_span: (usize, usize),
    /// Every lexicon reading of this surface; empty for unknown tokens.
    pub lemma_candidates: Vec<LemmaCandidate>,
    pub is_stopword: bool,
}

impl Token {
    /// Union of concept ids over all candidate readings, deduplicated.
    pub fn concepts(&self) -> Vec<&ConceptId> {
        let mut set = BTreeSet::new();
        for cand in &self.lemma_candidates {
            for c in &cand.concepts {
                set.insert(c);
            }
        }
        set.into_iter().collect()
    }

    pub fn is_unknown(&self) -> bool {
        self.lemma_candidates.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug)]
pub struct Lexicon {
    entries: Vec<LemmaEntry>,
    /// Normalized surface form → indices into `entries`.
    surface_index: HashMap<String, Vec<usize>>,
    /// Normalized stoplist entries.
    stoplist: BTreeSet<String>,
    /// Longest surface form in the index, counted in words.
    max_surface_words: usize,
}

/// Lowercases and collapses a surface string to its delimiter-insensitive
/// lookup key: words joined by single spaces. Empty when the input has no
/// alphanumeric content.
fn normalize(surface: &str) -> String {
    let mut key = String::with_capacity(surface.len());
    let mut in_word = false;
    for ch in surface.chars() {
        if ch.is_alphanumeric() {
            if !in_word && !key.is_empty() {
                key.push(' ');
            }
            in_word = true;
            key.extend(ch.to_lowercase());
        } else {
            in_word = false;
        }
    }
    key
}

/// Builds the surface index from entries plus a stoplist. Entries whose
/// rules cannot apply to their lemma are skipped and reported; everything
/// else is indexed. The lexicon is immutable afterwards.
pub fn build_lexicon(
    entries: Vec<LemmaEntry>,
    stoplist: BTreeSet<String>,
) -> (Lexicon, Vec<RejectedEntry>) {
    let mut rejected = Vec::new();
    let mut kept = Vec::new();
    let mut forms: Vec<(String, usize)> = Vec::new();

    'entries: for (index, entry) in entries.into_iter().enumerate() {
        let slot = kept.len();
        let mut surfaces = vec![entry.lemma.clone()];
        match &entry.inflection {
            Inflection::Rules(rules) => {
                for rule in rules {
                    match entry.lemma.strip_suffix(rule.strip.as_str()) {
                        Some(base) => surfaces.push(format!("{base}{}", rule.append)),
                        None => {
                            rejected.push(RejectedEntry {
                                index,
                                lemma: entry.lemma.clone(),
                                reason: format!(
                                    "suffix rule strips {:?}, not a suffix of the lemma",
                                    rule.strip
                                ),
                            });
                            continue 'entries;
                        }
                    }
                }
            }
            Inflection::Forms(list) => surfaces.extend(list.iter().cloned()),
        }
        for surface in surfaces {
            forms.push((surface, slot));
        }
        kept.push(entry);
    }

    let mut surface_index: HashMap<String, Vec<usize>> = HashMap::new();
    let mut max_surface_words = 0;
    for (surface, slot) in forms {
        let key = normalize(&surface);
        if key.is_empty() {
            continue;
        }
        max_surface_words = max_surface_words.max(key.split(' ').count());
        let slots = surface_index.entry(key).or_default();
        if !slots.contains(&slot) {
            slots.push(slot);
        }
    }

    let stoplist = stoplist
        .iter()
        .map(|s| normalize(s))
        .filter(|s| !s.is_empty())
        .collect();

    (
        Lexicon { entries: kept, surface_index, stoplist, max_surface_words },
        rejected,
    )
}

impl Lexicon {
    pub fn empty() -> Lexicon {
        build_lexicon(Vec::new(), BTreeSet::new()).0
    }

    pub fn entries(&self) -> &[LemmaEntry] {
        &self.entries
    }

    /// All readings of a surface form, or an empty slice when unknown.
    pub fn lookup(&self, surface: &str) -> Vec<&LemmaEntry> {
        match self.surface_index.get(&normalize(surface)) {
            Some(slots) => slots.iter().map(|&i| &self.entries[i]).collect(),
            None => Vec::new(),
        }
    }

    /// Stoplist membership is decided on the normalized surface alone,
    /// regardless of part of speech.
    pub fn is_stopword(&self, surface: &str) -> bool {
        self.stoplist.contains(&normalize(surface))
    }

    pub fn stoplist(&self) -> &BTreeSet<String> {
        &self.stoplist
    }

    /// Every surface form generated at build time, normalized and sorted.
    pub fn surface_forms(&self) -> Vec<&str> {
        let mut forms: Vec<&str> = self.surface_index.keys().map(String::as_str).collect();
        forms.sort_unstable();
        forms
    }
}

/// One maximal alphanumeric run in the source text.
struct Word {
    char_start: usize,
    char_end: usize,
    byte_start: usize,
    byte_end: usize,
}

fn split_words(text: &str) -> Vec<Word> {
    let mut words = Vec::new();
    let mut current: Option<Word> = None;
    for (char_idx, (byte_idx, ch)) in text.char_indices().enumerate() {
        if ch.is_alphanumeric() {
            match &mut current {
                Some(w) => {
                    w.char_end = char_idx + 1;
                    w.byte_end = byte_idx + ch.len_utf8();
                }
                None => {
                    current = Some(Word {
                        char_start: char_idx,
                        char_end: char_idx + 1,
                        byte_start: byte_idx,
                        byte_end: byte_idx + ch.len_utf8(),
                    });
                }
            }
        } else if let Some(w) = current.take() {
            words.push(w);
        }
    }
    if let Some(w) = current.take() {
        words.push(w);
    }
    words
}

/// Splits `text` into tokens by longest-match lookup against the lexicon.
///
/// At each word, the longest run of consecutive words whose normalized join
/// is a known surface form becomes one token (so compounds win over their
/// parts); a word matching nothing becomes a single unknown token. Delimiter
/// characters never appear inside a token except between the words of a
/// matched compound. Stopwords are marked, not removed.
pub fn tokenize(text: &str, lexicon: &Lexicon) -> Vec<Token> {
    let words = split_words(text);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let kmax = lexicon.max_surface_words.min(words.len() - i);
        let mut matched: Option<(usize, &[usize])> = None;
        for k in (1..=kmax).rev() {
            let span = &text[words[i].byte_start..words[i + k - 1].byte_end];
            if let Some(slots) = lexicon.surface_index.get(&normalize(span)) {
                matched = Some((k, slots));
                break;
            }
        }
        let (k, slots) = matched.unwrap_or((1, &[]));
        let surface = text[words[i].byte_start..words[i + k - 1].byte_end].to_owned();
        let lemma_candidates = slots
            .iter()
            .map(|&slot| {
                let e = &lexicon.entries[slot];
                LemmaCandidate {
                    lemma: e.lemma.clone(),
                    pos_tag: e.pos_tag.clone(),
                    concepts: e.concepts.clone(),
                }
            })
            .collect();
        tokens.push(Token {
            is_stopword: lexicon.is_stopword(&surface),
            char_span: (words[i].char_start, words[i + k - 1].char_end),
            surface,
            lemma_candidates,
        });
        i += k;
    }
    tokens
}

/// Drops stopword tokens, preserving order and spans. Membership is
/// re-derived from the lexicon so the result is correct even for tokens
/// whose flags were constructed by hand.
pub fn filter_stopwords(tokens: &[Token], lexicon: &Lexicon) -> Vec<Token> {
    tokens
        .iter()
        .filter(|t| !lexicon.is_stopword(&t.surface))
        .cloned()
        .collect()
}

/// Parses the line-oriented lexicon format, one entry per line:
///
/// ```text
/// lemma<TAB>pos_tag<TAB>inflection<TAB>concept_ids
/// ```
///
/// The inflection field is either empty (bare lemma only), `=f1,f2,...`
/// (explicit irregular forms), or `strip>append;strip>append;...` suffix
/// rules where `strip` may be empty. Concept ids are comma-separated and may
/// be empty. Blank lines and `#` comments are skipped.
pub fn parse_lexicon_file(text: &str) -> Result<Vec<LemmaEntry>, LexiconError> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            return Err(LexiconError::Parse {
                line,
                msg: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        if fields[0].is_empty() {
            return Err(LexiconError::Parse { line, msg: "empty lemma".into() });
        }
        let inflection = if fields[2].is_empty() {
            Inflection::Rules(Vec::new())
        } else if let Some(forms) = fields[2].strip_prefix('=') {
            Inflection::Forms(
                forms.split(',').filter(|f| !f.is_empty()).map(str::to_owned).collect(),
            )
        } else {
            let mut rules = Vec::new();
            for part in fields[2].split(';') {
                let Some((strip, append)) = part.split_once('>') else {
                    return Err(LexiconError::Parse {
                        line,
                        msg: format!("bad suffix rule {part:?}, expected strip>append"),
                    });
                };
                rules.push(SuffixRule { strip: strip.to_owned(), append: append.to_owned() });
            }
            Inflection::Rules(rules)
        };
        let concepts = fields[3]
            .split(',')
            .filter(|c| !c.is_empty())
            .map(ConceptId::new)
            .collect();
        entries.push(LemmaEntry {
            lemma: fields[0].to_owned(),
            pos_tag: fields[1].to_owned(),
            inflection,
            concepts,
        });
    }
    Ok(entries)
}

/// Stoplist format: one surface form per line, `#` comments allowed.
pub fn parse_stoplist(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

// ---------------------------------------------------------------------------
