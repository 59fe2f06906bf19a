//! Plain-text corpus, vocabulary and merge-list files.
//!
//! * token corpus: `token<TAB>lang<TAB>pos` per line (`pos` may be `-`), blank line ends a sentence
//! * sentence corpus: `label<TAB>text` per line
//! * vocab: `subword<TAB>id<TAB>freq` per line, reserved entries first
//! * merges: `left<SPACE>right` per line, in application order

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::encode::Merge;
use super::sample::{RawDocument, Sentiment, TokenLabel};
use super::vocab::Vocab;
use super::CorpusError;

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, body: &str) -> Result<(), CorpusError> {
    fs::write(path, body).map_err(|e| CorpusError::Io(format!("{}: {e}", path.display())))
}

fn malformed(line: usize, msg: impl Into<String>) -> CorpusError {
    CorpusError::Malformed { line, msg: msg.into() }
}

pub fn parse_token_corpus(body: &str) -> Result<Vec<RawDocument>, CorpusError> {
    let mut docs = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut flush = |tokens: &mut Vec<String>, labels: &mut Vec<TokenLabel>| {
        if !tokens.is_empty() {
            docs.push(RawDocument {
                text: tokens.join(" "),
                token_labels: Some(std::mem::take(labels)),
                sentiment: None,
            });
            tokens.clear();
        }
    };
    for (i, line) in body.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut tokens, &mut labels);
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(malformed(i + 1, format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let (tok, lang, pos) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if tok.is_empty() || tok.contains(char::is_whitespace) || lang.is_empty() || pos.is_empty() {
            return Err(malformed(i + 1, "empty or space-containing field"));
        }
        tokens.push(tok.to_string());
        labels.push(TokenLabel {
            lang: lang.to_string(),
            pos: (pos != "-").then(|| pos.to_string()),
        });
    }
    flush(&mut tokens, &mut labels);
    Ok(docs)
}

pub fn parse_sentence_corpus(body: &str) -> Result<Vec<RawDocument>, CorpusError> {
    let mut docs = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line
            .split_once('\t')
            .ok_or_else(|| malformed(i + 1, "missing tab between label and text"))?;
        let sentiment: Sentiment = label
            .trim()
            .parse()
            .map_err(|_| malformed(i + 1, format!("unknown label `{label}`")))?;
        docs.push(RawDocument::sentence(text, Some(sentiment)));
    }
    Ok(docs)
}

pub fn load_token_corpus(path: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    parse_token_corpus(&read(path)?)
}

pub fn load_sentence_corpus(path: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    parse_sentence_corpus(&read(path)?)
}

pub fn format_token_corpus(docs: &[RawDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        let Some(labels) = &d.token_labels else { continue };
        for (tok, l) in d.tokens().iter().zip(labels) {
            let _ = writeln!(out, "{tok}\t{}\t{}", l.lang, l.pos.as_deref().unwrap_or("-"));
        }
        out.push('\n');
    }
    out
}

pub fn format_sentence_corpus(docs: &[RawDocument]) -> String {
    let mut out = String::new();
    for d in docs {
        if let Some(s) = d.sentiment {
            let _ = writeln!(out, "{s}\t{}", d.text);
        }
    }
    out
}

pub fn write_token_corpus(path: &Path, docs: &[RawDocument]) -> Result<(), CorpusError> {
    write(path, &format_token_corpus(docs))
}

pub fn write_sentence_corpus(path: &Path, docs: &[RawDocument]) -> Result<(), CorpusError> {
    write(path, &format_sentence_corpus(docs))
}

pub fn format_vocab(vocab: &Vocab) -> String {
    let mut out = String::new();
    for (id, (piece, freq)) in vocab.entries().iter().enumerate() {
        let _ = writeln!(out, "{piece}\t{id}\t{freq}");
    }
    out
}

pub fn parse_vocab(body: &str) -> Result<Vocab, CorpusError> {
    let mut entries = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        let [piece, id, freq] = f[..] else {
            return Err(malformed(i + 1, "expected subword<TAB>id<TAB>freq"));
        };
        let id: usize = id.parse().map_err(|_| malformed(i + 1, "bad id"))?;
        let freq: u64 = freq.parse().map_err(|_| malformed(i + 1, "bad freq"))?;
        if id != i {
            return Err(malformed(i + 1, format!("ids must be dense; expected {i}, got {id}")));
        }
        entries.push((piece.to_string(), freq));
    }
    Vocab::from_entries(entries)
}

pub fn save_vocab(path: &Path, vocab: &Vocab) -> Result<(), CorpusError> {
    write(path, &format_vocab(vocab))
}

pub fn load_vocab(path: &Path) -> Result<Vocab, CorpusError> {
    parse_vocab(&read(path)?)
}

pub fn format_merges(merges: &[Merge]) -> String {
    merges.iter().map(|(l, r)| format!("{l} {r}\n")).collect()
}

pub fn parse_merges(body: &str) -> Result<Vec<Merge>, CorpusError> {
    body.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let (a, b) = l.split_once(' ').ok_or_else(|| malformed(i + 1, "expected `left right`"))?;
            if a.is_empty() || b.is_empty() || b.contains(' ') {
                return Err(malformed(i + 1, "expected `left right`"));
            }
            Ok((a.to_string(), b.to_string()))
        })
        .collect()
}

pub fn save_merges(path: &Path, merges: &[Merge]) -> Result<(), CorpusError> {
    write(path, &format_merges(merges))
}

pub fn load_merges(path: &Path) -> Result<Vec<Merge>, CorpusError> {
    parse_merges(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_block_becomes_one_document() {
        let docs = parse_token_corpus("meri\thi\tPRON\ngirl\ten\tNOUN\n\n").unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].text, "meri girl");
        let labels = docs[0].token_labels.as_ref().unwrap();
        assert_eq!(labels[1].pos.as_deref(), Some("NOUN"));
    }

    #[test]
    fn dash_pos_is_absent_and_last_block_needs_no_blank_line() {
        let docs = parse_token_corpus("a\ten\t-\n\nb\thi\t-").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[1].token_labels.as_ref().unwrap()[0].pos, None);
    }

    #[test]
    fn malformed_token_line_reports_line_number() {
        match parse_token_corpus("a\ten\tX\nb\ten\n") {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sentence_lines() {
        let docs = parse_sentence_corpus("positive\tgood movie\nnegative\tbakwas\n").unwrap();
        assert_eq!(docs[0].sentiment, Some(Sentiment::Positive));
        assert_eq!(docs[0].text, "good movie");
        match parse_sentence_corpus("positive\tok\nno tab here\n") {
            Err(CorpusError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_sentence_corpus("great\tx\n").is_err());
    }

    #[test]
    fn vocab_and_merge_files_round_trip() {
        let v = Vocab::build([["gir", "l*#", "gir"].into_iter()], 1);
        let text = format_vocab(&v);
        assert!(text.starts_with("<pad>\t0\t0\n<unk>\t1\t0\n"));
        assert_eq!(parse_vocab(&text).unwrap(), v);
        let merges = vec![("a".to_string(), "b".to_string()), ("ab".to_string(), "*".to_string())];
        assert_eq!(format_merges(&merges), "a b\nab *\n");
        assert_eq!(parse_merges(&format_merges(&merges)).unwrap(), merges);
        assert!(parse_vocab("<pad>\t3\t0\n").is_err());
    }
}
