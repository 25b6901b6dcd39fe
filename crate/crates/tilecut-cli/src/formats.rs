//! Line-oriented TSV input and report output.
//!
//! Two input formats live here because several subcommands share them:
//!
//! * segmentation files: `doc_id<TAB>word_count<TAB>starts`, where starts is
//!   a comma-separated list of 1-based word positions (empty for a document
//!   with a single segment);
//! * annotation files: one `doc_id<TAB>concept_id` pair per line.
//!
//! Blank lines and `#` comments are skipped in both. Report floats are
//! printed with the shortest round-trip representation, so reports are
//! byte-stable and lose no precision.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::Path;

use tilecut::evaluation::Segmentation;
use tilecut::taxonomy::ConceptId;

use crate::CliError;

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, content: &str) -> Result<(), CliError> {
    std::fs::write(path, content)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes the report to the path when given, stdout otherwise.
pub fn write_out(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, content),
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| CliError::Data(format!("stdout: {e}"))),
    }
}

fn data_at(path: &Path, line: usize, msg: String) -> CliError {
    CliError::Data(format!("{}:{line}: {msg}", path.display()))
}

/// Lines of `text` that carry content, with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Parses a segmentation file. Doc ids must be unique; `path` is only used
/// for error messages.
pub fn parse_segmentations(
    text: &str,
    path: &Path,
) -> Result<Vec<(String, Segmentation)>, CliError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, raw) in content_lines(text) {
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 3 {
            return Err(data_at(
                path,
                line,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let doc = fields[0];
        if doc.is_empty() {
            return Err(data_at(path, line, "empty doc id".into()));
        }
        if !seen.insert(doc.to_owned()) {
            return Err(data_at(path, line, format!("duplicate doc id {doc:?}")));
        }
        let word_count: usize = fields[1]
            .parse()
            .map_err(|e| data_at(path, line, format!("bad word count {:?}: {e}", fields[1])))?;
        let starts = if fields[2].is_empty() {
            Vec::new()
        } else {
            fields[2]
                .split(',')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|e| data_at(path, line, format!("bad start {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let seg = Segmentation::new(word_count, starts)
            .map_err(|e| data_at(path, line, format!("doc {doc:?}: {e}")))?;
        out.push((doc.to_owned(), seg));
    }
    Ok(out)
}

pub fn format_segmentation(doc_id: &str, seg: &Segmentation) -> String {
    let starts: Vec<String> = seg.starts().iter().map(|s| s.to_string()).collect();
    format!("{doc_id}\t{}\t{}\n", seg.word_count(), starts.join(","))
}

/// Parses an annotation file into per-document concept lists, documents in
/// first-appearance order. A concept repeated within one document (for
/// example by two segments of the same run) is kept once.
pub fn parse_annotations(
    text: &str,
    path: &Path,
) -> Result<Vec<(String, Vec<ConceptId>)>, CliError> {
    let mut docs: Vec<(String, Vec<ConceptId>)> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    for (line, raw) in content_lines(text) {
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 2 {
            return Err(data_at(
                path,
                line,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(data_at(path, line, "empty doc or concept id".into()));
        }
        let slot = *index.entry(fields[0].to_owned()).or_insert_with(|| {
            docs.push((fields[0].to_owned(), Vec::new()));
            docs.len() - 1
        });
        let concept = ConceptId::new(fields[1]);
        if !docs[slot].1.contains(&concept) {
            docs[slot].1.push(concept);
        }
    }
    Ok(docs)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn path() -> PathBuf {
        PathBuf::from("test.tsv")
    }

    #[test]
    fn segmentation_roundtrip_preserves_counts_and_starts() {
        let text = "# comment\ndocA\t6\t2,4\n\ndocB\t10\t\n";
        let segs = parse_segmentations(text, &path()).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].0, "docA");
        assert_eq!(segs[0].1.starts(), &[2, 4]);
        assert_eq!(segs[1].1.segment_count(), 1);
        assert_eq!(format_segmentation("docA", &segs[0].1), "docA\t6\t2,4\n");
        assert_eq!(format_segmentation("docB", &segs[1].1), "docB\t10\t\n");
    }

    #[test]
    fn segmentation_errors_carry_file_and_line() {
        let err = parse_segmentations("docA\t6\t2,4\ndocA\t6\t3\n", &path()).unwrap_err();
        let CliError::Data(msg) = err else { panic!("expected data error") };
        assert!(msg.contains("test.tsv:2"), "{msg}");
        assert!(msg.contains("duplicate"), "{msg}");

        // Out-of-range start: 9 > word count 6.
        let err = parse_segmentations("docA\t6\t9\n", &path()).unwrap_err();
        let CliError::Data(msg) = err else { panic!("expected data error") };
        assert!(msg.contains("docA"), "{msg}");
    }

    #[test]
    fn segmentation_rejects_malformed_rows() {
        assert!(parse_segmentations("docA\t6\n", &path()).is_err());
        assert!(parse_segmentations("docA\tsix\t\n", &path()).is_err());
        assert!(parse_segmentations("docA\t6\ttwo\n", &path()).is_err());
        assert!(parse_segmentations("\t6\t\n", &path()).is_err());
    }

    #[test]
    fn annotations_group_by_doc_in_first_appearance_order() {
        let text = "d2\tc1\nd1\tc2\nd2\tc3\nd2\tc1\n";
        let docs = parse_annotations(text, &path()).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].0, "d2");
        assert_eq!(docs[0].1, vec![ConceptId::new("c1"), ConceptId::new("c3")]);
        assert_eq!(docs[1].0, "d1");
        assert_eq!(docs[1].1, vec![ConceptId::new("c2")]);
    }

    #[test]
    fn annotations_reject_malformed_rows() {
        assert!(parse_annotations("d1\n", &path()).is_err());
        assert!(parse_annotations("d1\tc1\textra\n", &path()).is_err());
        assert!(parse_annotations("\tc1\n", &path()).is_err());
        assert!(parse_annotations("d1\t\n", &path()).is_err());
    }
}
