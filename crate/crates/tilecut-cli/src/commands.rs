//! One function per subcommand.
//!
//! Commands resolve their configuration (flags over config file over
//! defaults), load resources once, fan documents out over the worker pool,
//! and assemble reports strictly in input order. They are all-or-nothing: a
//! failing document aborts the run before anything is written.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;

use tilecut::evaluation::{
    aggregate_probabilities, f_measure, segmentation_error, synthesize_eval_corpus,
    threshold_sweep, Segmentation,
};
use tilecut::extractor::{
    annotate, bag_of_concepts, brute_force_best_cut, build_spanning_dag, extract_cut,
    ExtractionConfig, ScoredCut, SkipReason, SpanningDag,
};
use tilecut::lexicon::{build_lexicon, parse_lexicon_file, parse_stoplist, tokenize, Lexicon};
use tilecut::synth::{disjoint_blocks, random_taxonomy, CorpusGen, TaxonomyGen};
use tilecut::taxonomy::{ConceptDag, ConceptId, TaxonomyError};

use crate::config::{self, ConfigFile};
use crate::{formats, pool};
use crate::{
    AnnotateArgs, CliError, EvalSegArgs, EvalTopicsArgs, ExtractArgs, LexiconArgs,
    LexiconBuildArgs, SegmentArgs, SynthCorpusArgs, SynthTaxonomyArgs, TaxonomyStatsArgs,
};

// ---- shared loading ----

fn stoplist_set(
    flag: Option<PathBuf>,
    cfg: &ConfigFile,
) -> Result<BTreeSet<String>, CliError> {
    match config::resolve_opt(flag, cfg, "stoplist")? {
        None => Ok(BTreeSet::new()),
        Some(path) => Ok(parse_stoplist(&formats::read_input(&path)?)),
    }
}

/// Loads the lexicon named by flag or config; without one, every word of the
/// input becomes an unknown token (its own term, carrying no concepts).
/// Entries the builder rejects are reported on stderr but do not fail the
/// run.
fn load_lexicon(lex: &LexiconArgs, cfg: &ConfigFile) -> Result<Lexicon, CliError> {
    let entries = match config::resolve_opt(lex.lexicon.clone(), cfg, "lexicon")? {
        None => Vec::new(),
        Some(path) => parse_lexicon_file(&formats::read_input(&path)?)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
    };
    let stoplist = stoplist_set(lex.stoplist.clone(), cfg)?;
    let (lexicon, rejected) = build_lexicon(entries, stoplist);
    for r in &rejected {
        eprintln!("warning: lexicon entry {:?} skipped: {}", r.lemma, r.reason);
    }
    Ok(lexicon)
}

fn load_taxonomy(path: &std::path::Path) -> Result<ConceptDag, CliError> {
    ConceptDag::parse(&formats::read_input(path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Reads every input document up front; the doc id in reports is the path as
/// given on the command line.
fn read_docs(inputs: &[PathBuf]) -> Result<Vec<(String, String)>, CliError> {
    inputs
        .iter()
        .map(|p| Ok((p.display().to_string(), formats::read_input(p)?)))
        .collect()
}

// ---- report pieces ----

fn skip_reason_text(reason: SkipReason) -> &'static str {
    match reason {
        SkipReason::NotInTaxonomy => "not in the taxonomy",
        SkipReason::Anonymous => "anonymous",
        SkipReason::Orphan => "orphan",
    }
}

fn skip_warnings(doc: &str, skipped: &[(ConceptId, SkipReason)]) -> Vec<String> {
    skipped
        .iter()
        .map(|(id, r)| format!("warning: {doc}: concept {id} skipped ({})", skip_reason_text(*r)))
        .collect()
}

/// Topic rows: segment index, concept id, headword, local score U, covered
/// leaf paths n_i.
fn push_topic_rows(report: &mut String, segment: usize, cut: &ScoredCut, taxonomy: &ConceptDag) {
    for c in &cut.selected {
        let headword = taxonomy
            .node(&c.concept)
            .and_then(|n| n.headword.as_deref())
            .unwrap_or("");
        let _ = writeln!(
            report,
            "{segment}\t{}\t{headword}\t{}\t{}",
            c.concept, c.local_score, c.covered_paths
        );
    }
}

/// Debug row comparing the DP cut score against exhaustive search; segments
/// the oracle cannot handle (non-tree or oversized DAGs) are reported as
/// skipped rather than failing the run.
fn oracle_row(segment: usize, dag: &SpanningDag, cfg: &ExtractionConfig) -> String {
    let dp = extract_cut(dag, cfg).expect("spanning DAG is non-empty here");
    match brute_force_best_cut(dag, cfg) {
        Ok(oracle) => {
            let verdict = if dp.score == oracle.score { "equal" } else { "UNEQUAL" };
            format!("oracle\t{segment}\t{}\t{}\t{verdict}\n", dp.score, oracle.score)
        }
        Err(e) => format!("oracle\t{segment}\tskipped\t{e}\n"),
    }
}

// ---- subcommands ----

pub fn lexicon_build(args: &LexiconBuildArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let path = config::require_path(args.lex.lexicon.clone(), &cfg, "lexicon", "--lexicon")?;
    let entries = parse_lexicon_file(&formats::read_input(&path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let stoplist = stoplist_set(args.lex.stoplist.clone(), &cfg)?;
    let (lexicon, rejected) = build_lexicon(entries, stoplist);

    let mut report = String::new();
    let _ = writeln!(report, "entries\t{}", lexicon.entries().len());
    let _ = writeln!(report, "surfaces\t{}", lexicon.surface_forms().len());
    let _ = writeln!(report, "stopwords\t{}", lexicon.stoplist().len());
    for r in &rejected {
        let _ = writeln!(report, "rejected\t{}\t{}\t{}", r.index, r.lemma, r.reason);
    }
    formats::write_out(out.as_deref(), &report)
}

pub fn segment_docs(args: &SegmentArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let seg_cfg = args.seg.resolve(&cfg)?;
    let jobs = args.jobs.resolve()?;
    let lexicon = load_lexicon(&args.lex, &cfg)?;
    let docs = read_docs(&args.inputs)?;

    let results = pool::ordered_map(&docs, jobs, |(doc, text)| {
        let seg = tilecut::segmenter::segment(text, &lexicon, &seg_cfg);
        let mut report = format!("doc\t{doc}\n");
        for b in &seg.boundaries {
            let _ = writeln!(
                report,
                "boundary\t{}\t{}\t{}",
                b.token_offset, b.char_offset, b.relevance
            );
        }
        let mut curve = format!("doc\t{doc}\n");
        let smoothed = &seg.smoothed_curve.values;
        for (gap, (raw, smooth)) in seg.raw_curve.values.iter().zip(smoothed).enumerate() {
            let _ = writeln!(curve, "{gap}\t{raw}\t{smooth}");
        }
        (report, curve)
    });

    let mut report = String::new();
    let mut curves = String::new();
    for (r, c) in &results {
        report.push_str(r);
        curves.push_str(c);
    }
    formats::write_out(out.as_deref(), &report)?;
    if let Some(path) = &args.curve {
        formats::write_file(path, &curves)?;
    }
    Ok(())
}

pub fn extract_docs(args: &ExtractArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let ext_cfg = args.ext.resolve(&cfg)?;
    let jobs = args.jobs.resolve()?;
    let lexicon = load_lexicon(&args.lex, &cfg)?;
    let taxonomy = load_taxonomy(&args.taxonomy.require(&cfg)?)?;
    let docs = read_docs(&args.inputs)?;

    let results = pool::ordered_map(&docs, jobs, |(doc, text)| -> Result<_, CliError> {
        let tokens = tokenize(text, &lexicon);
        let bag = bag_of_concepts(&tokens, &taxonomy);
        let warnings = skip_warnings(doc, bag.skipped());
        let mut report = format!("doc\t{doc}\n");
        if !bag.is_empty() {
            let dag = build_spanning_dag(&bag, &taxonomy)
                .map_err(|e| CliError::Data(format!("{doc}: {e}")))?;
            let cut =
                extract_cut(&dag, &ext_cfg).map_err(|e| CliError::Data(format!("{doc}: {e}")))?;
            push_topic_rows(&mut report, 0, &cut, &taxonomy);
            if args.oracle {
                report.push_str(&oracle_row(0, &dag, &ext_cfg));
            }
        }
        Ok((report, warnings))
    });

    let mut report = String::new();
    let mut warnings = Vec::new();
    for result in results {
        let (r, w) = result?;
        report.push_str(&r);
        warnings.extend(w);
    }
    for w in &warnings {
        eprintln!("{w}");
    }
    formats::write_out(out.as_deref(), &report)
}

pub fn annotate_docs(args: &AnnotateArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let seg_cfg = args.seg.resolve(&cfg)?;
    let ext_cfg = args.ext.resolve(&cfg)?;
    let jobs = args.jobs.resolve()?;
    let lexicon = load_lexicon(&args.lex, &cfg)?;
    let taxonomy = load_taxonomy(&args.taxonomy.require(&cfg)?)?;
    let docs = read_docs(&args.inputs)?;

    let results = pool::ordered_map(&docs, jobs, |(doc, text)| -> Result<_, CliError> {
        let ann = annotate(text, &lexicon, &taxonomy, &seg_cfg, &ext_cfg)
            .map_err(|e| CliError::Data(format!("{doc}: {e}")))?;
        let mut report = format!("doc\t{doc}\n");
        let mut skipped = BTreeSet::new();
        for (i, seg) in ann.segments.iter().enumerate() {
            push_topic_rows(&mut report, i, &seg.cut, &taxonomy);
            skipped.extend(seg.skipped.iter().cloned());
        }
        if args.oracle {
            for (i, seg) in ann.segments.iter().enumerate() {
                let tokens = &ann.segmentation.tokens[seg.span.0..seg.span.1];
                let bag = bag_of_concepts(tokens, &taxonomy);
                if bag.is_empty() {
                    let _ = writeln!(report, "oracle\t{i}\tskipped\tempty segment");
                } else {
                    let dag = build_spanning_dag(&bag, &taxonomy)
                        .map_err(|e| CliError::Data(format!("{doc}: {e}")))?;
                    report.push_str(&oracle_row(i, &dag, &ext_cfg));
                }
            }
        }
        let skipped: Vec<_> = skipped.into_iter().collect();
        Ok((report, skip_warnings(doc, &skipped)))
    });

    let mut report = String::new();
    let mut warnings = Vec::new();
    for result in results {
        let (r, w) = result?;
        report.push_str(&r);
        warnings.extend(w);
    }
    for w in &warnings {
        eprintln!("{w}");
    }
    formats::write_out(out.as_deref(), &report)
}

pub fn eval_seg(args: &EvalSegArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let jobs = args.jobs.resolve()?;
    let real = formats::parse_segmentations(&formats::read_input(&args.real)?, &args.real)?;
    let found = formats::parse_segmentations(&formats::read_input(&args.found)?, &args.found)?;

    let real_ids: BTreeSet<&str> = real.iter().map(|(d, _)| d.as_str()).collect();
    for (doc, _) in &found {
        if !real_ids.contains(doc.as_str()) {
            return Err(CliError::Data(format!(
                "doc {doc:?} appears in --found but not in --real"
            )));
        }
    }
    let found_map: HashMap<&str, &Segmentation> =
        found.iter().map(|(d, s)| (d.as_str(), s)).collect();
    let pairs: Vec<(&str, &Segmentation, &Segmentation)> = real
        .iter()
        .map(|(doc, r)| {
            let f = found_map.get(doc.as_str()).ok_or_else(|| {
                CliError::Data(format!("doc {doc:?} appears in --real but not in --found"))
            })?;
            Ok((doc.as_str(), r, *f))
        })
        .collect::<Result<_, CliError>>()?;

    let rows = pool::ordered_map(&pairs, jobs, |&(doc, real, found)| {
        segmentation_error(real, found)
            .map(|e| format!("{doc}\t{e}\t{}\t{}\n", real.segment_count(), found.segment_count()))
            .map_err(|e| CliError::Data(format!("doc {doc:?}: {e}")))
    });
    let mut report = String::new();
    for row in rows {
        report.push_str(&row?);
    }
    formats::write_out(out.as_deref(), &report)
}

/// Per-document sweep values at one threshold; `None` marks a value that is
/// undefined because the threshold eliminated every produced concept.
struct SweepRow {
    precision: Option<f64>,
    recall: f64,
    f: Option<f64>,
    accuracy: Option<f64>,
}

fn parse_thetas(flag: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(list) = flag else {
        return Ok((0..20).map(|k| k as f64 / 20.0).collect());
    };
    let mut thetas = Vec::new();
    for part in list.split(',') {
        let part = part.trim();
        let theta: f64 = part
            .parse()
            .map_err(|e| CliError::Config(format!("bad threshold {part:?}: {e}")))?;
        if !(0.0..1.0).contains(&theta) {
            return Err(CliError::Config(format!("threshold {theta} outside [0, 1)")));
        }
        thetas.push(theta);
    }
    Ok(thetas)
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

pub fn eval_topics(args: &EvalTopicsArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let jobs = args.jobs.resolve()?;
    let thetas = parse_thetas(args.thetas.as_deref())?;
    let beta = args.beta.unwrap_or(1.0);
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(CliError::Config(format!("beta must be finite and positive, got {beta}")));
    }
    let taxonomy = load_taxonomy(&args.taxonomy.require(&cfg)?)?;
    let produced =
        formats::parse_annotations(&formats::read_input(&args.produced)?, &args.produced)?;
    let reference =
        formats::parse_annotations(&formats::read_input(&args.reference)?, &args.reference)?;
    if reference.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no documents to evaluate",
            args.reference.display()
        )));
    }

    let ref_ids: BTreeSet<&str> = reference.iter().map(|(d, _)| d.as_str()).collect();
    for (doc, _) in &produced {
        if !ref_ids.contains(doc.as_str()) {
            return Err(CliError::Data(format!(
                "doc {doc:?} appears in --produced but not in --reference"
            )));
        }
    }
    let produced_map: HashMap<&str, &[ConceptId]> =
        produced.iter().map(|(d, c)| (d.as_str(), c.as_slice())).collect();
    let mut items = Vec::new();
    for (doc, refs) in &reference {
        let prods = produced_map.get(doc.as_str()).ok_or_else(|| {
            CliError::Data(format!("doc {doc:?} appears in --reference but not in --produced"))
        })?;
        items.push((doc.as_str(), *prods, refs.as_slice()));
    }

    let per_doc = pool::ordered_map(&items, jobs, |&(doc, prods, refs)| -> Result<_, CliError> {
        let mp = aggregate_probabilities(prods, refs, &taxonomy)
            .map_err(|e| CliError::Data(format!("doc {doc:?}: {e}")))?;
        let mut warnings = Vec::new();
        if !mp.unreachable_pairs().is_empty() {
            warnings.push(format!(
                "warning: {doc}: {} concept pairs share no hierarchy component (matched with probability 0)",
                mp.unreachable_pairs().len()
            ));
        }
        let rows: Vec<SweepRow> = threshold_sweep(&mp, &thetas)
            .into_iter()
            .map(|point| {
                let f = point
                    .precision
                    .map(|p| f_measure(p, point.recall, beta).expect("beta was validated"));
                SweepRow {
                    precision: point.precision,
                    recall: point.recall,
                    f,
                    accuracy: point.accuracy,
                }
            })
            .collect();
        Ok((warnings, rows))
    });

    let mut doc_rows = Vec::new();
    let mut warnings = Vec::new();
    for result in per_doc {
        let (w, rows) = result?;
        warnings.extend(w);
        doc_rows.push(rows);
    }
    for w in &warnings {
        eprintln!("{w}");
    }

    // Macro averages: recall over all docs; precision, F, and accuracy over
    // the docs where they are defined, blank when that is none of them.
    let mut report = String::new();
    for (k, &theta) in thetas.iter().enumerate() {
        let mut p_vals = Vec::new();
        let mut f_vals = Vec::new();
        let mut a_vals = Vec::new();
        let mut r_sum = 0.0;
        for rows in &doc_rows {
            let row = &rows[k];
            r_sum += row.recall;
            if let Some(p) = row.precision {
                p_vals.push(p);
            }
            if let Some(f) = row.f {
                f_vals.push(f);
            }
            if let Some(a) = row.accuracy {
                a_vals.push(a);
            }
        }
        let recall = r_sum / doc_rows.len() as f64;
        let _ = writeln!(
            report,
            "{theta}\t{}\t{recall}\t{}\t{}",
            fmt_opt(mean(&p_vals)),
            fmt_opt(mean(&f_vals)),
            fmt_opt(mean(&a_vals))
        );
    }
    formats::write_out(out.as_deref(), &report)
}

fn require_seed(flag: Option<u64>, cfg: &ConfigFile) -> Result<u64, CliError> {
    config::resolve_opt(flag, cfg, "seed")?.ok_or_else(|| {
        CliError::Config("synthesis requires a seed (--seed or config key seed)".into())
    })
}

pub fn synth_taxonomy(args: &SynthTaxonomyArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let seed = require_seed(args.seed, &cfg)?;
    let defaults = TaxonomyGen::default();
    let gen = TaxonomyGen {
        nodes: args.nodes.unwrap_or(defaults.nodes),
        extra_parent_prob: args.extra_parent_prob.unwrap_or(defaults.extra_parent_prob),
        anonymous_prob: args.anonymous_prob.unwrap_or(defaults.anonymous_prob),
    };
    if gen.nodes == 0 {
        return Err(CliError::Config("nodes must be at least 1".into()));
    }
    for (name, p) in [("extra-parent-prob", gen.extra_parent_prob), ("anonymous-prob", gen.anonymous_prob)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Config(format!("{name} must be in [0, 1], got {p}")));
        }
    }
    formats::write_out(out.as_deref(), &random_taxonomy(&gen, seed).to_text())
}

pub fn synth_corpus(args: &SynthCorpusArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let seed = require_seed(args.seed, &cfg)?;

    let (text, truth) = if args.from_docs.is_empty() {
        let defaults = CorpusGen::default();
        let gen = CorpusGen {
            blocks: args.blocks.unwrap_or(defaults.blocks),
            words_per_block: args.words_per_block.unwrap_or(defaults.words_per_block),
            vocab_per_block: args.vocab_per_block.unwrap_or(defaults.vocab_per_block),
        };
        if gen.blocks == 0 || gen.words_per_block == 0 || gen.vocab_per_block == 0 {
            return Err(CliError::Config("block counts and sizes must be at least 1".into()));
        }
        let blocks = disjoint_blocks(&gen, seed);
        let starts: Vec<usize> = (1..gen.blocks).map(|b| b * gen.words_per_block + 1).collect();
        let seg = Segmentation::new(gen.blocks * gen.words_per_block, starts)
            .expect("junction starts are in range by construction");
        (blocks.join("\n") + "\n", seg)
    } else {
        let group_size = args.group_size.unwrap_or(2);
        if group_size < 2 {
            return Err(CliError::Config(format!(
                "group-size must be at least 2, got {group_size}"
            )));
        }
        let docs: Vec<String> = args
            .from_docs
            .iter()
            .map(|p| formats::read_input(p))
            .collect::<Result<_, _>>()?;
        let (text, seg) = synthesize_eval_corpus(&docs, group_size, seed)
            .map_err(|e| CliError::Data(e.to_string()))?;
        (text + "\n", seg)
    };

    formats::write_out(out.as_deref(), &text)?;
    if let Some(path) = &args.truth {
        formats::write_file(path, &formats::format_segmentation("corpus", &truth))?;
    }
    Ok(())
}

pub fn taxonomy_stats(args: &TaxonomyStatsArgs) -> Result<(), CliError> {
    let cfg = args.common.load_config()?;
    let out = args.common.resolve_out(&cfg)?;
    let dag = load_taxonomy(&args.taxonomy.require(&cfg)?)?;

    let mut report = String::new();
    let _ = writeln!(report, "concepts\t{}", dag.len());
    let _ = writeln!(report, "roots\t{}", dag.roots().len());
    let _ = writeln!(report, "orphans\t{}", dag.orphans().len());
    let _ = writeln!(report, "depth\t{}", dag.max_depth());

    let explicit = !args.concept.is_empty();
    let ids: Vec<ConceptId> = if explicit {
        args.concept.iter().map(ConceptId::new).collect()
    } else {
        dag.ids().cloned().collect()
    };
    for id in &ids {
        match dag.path_stats(id) {
            Ok(stats) => {
                let _ = writeln!(
                    report,
                    "stats\t{id}\t{}\t{}\t{}\t{}",
                    stats.n_up, stats.n_down, stats.root_distance, stats.leaf_separation
                );
            }
            // The full listing skips orphans (they have no paths); asking
            // for one by name is an error.
            Err(TaxonomyError::Orphan(_)) if !explicit => {
                eprintln!("warning: concept {id} is an orphan, no path statistics");
            }
            Err(e) => return Err(CliError::Data(e.to_string())),
        }
    }
    formats::write_out(out.as_deref(), &report)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_thetas_are_twenty_even_steps() {
        let thetas = parse_thetas(None).unwrap();
        assert_eq!(thetas.len(), 20);
        assert_eq!(thetas[0], 0.0);
        assert_eq!(thetas[1], 0.05);
        assert_eq!(thetas[19], 0.95);
    }

    #[test]
    fn explicit_thetas_are_parsed_and_range_checked() {
        assert_eq!(parse_thetas(Some("0, 0.5,0.97")).unwrap(), vec![0.0, 0.5, 0.97]);
        assert!(parse_thetas(Some("1.0")).is_err(), "1 is outside [0, 1)");
        assert!(parse_thetas(Some("-0.1")).is_err());
        assert!(parse_thetas(Some("0.5,x")).is_err());
        assert!(parse_thetas(Some("")).is_err(), "empty list has no usable value");
    }

    #[test]
    fn mean_is_none_only_when_empty() {
        assert_eq!(mean(&[]), None);
        assert_eq!(mean(&[0.5]), Some(0.5));
        assert_eq!(mean(&[0.0, 1.0]), Some(0.5));
        assert_eq!(fmt_opt(None), "");
        assert_eq!(fmt_opt(Some(0.25)), "0.25");
    }
}
