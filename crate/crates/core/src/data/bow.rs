//! UCI bag-of-words corpora and a synthetic LDA-process generator.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::rng::stream_rng;
use crate::{Error, Result};

/// Sparse documents over a fixed vocabulary. Entries are
/// (word id, count) with counts >= 1 and no duplicate word within a doc.
#[derive(Debug, Clone, PartialEq)]
pub struct BowCorpus {
    pub docs: Vec<Vec<(usize, u32)>>,
    pub vocab_size: usize,
    pub vocab: Option<Vec<String>>,
}

impl BowCorpus {
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs
            .iter()
            .flat_map(|d| d.iter().map(|&(_, c)| c as u64))
            .sum()
    }
}

/// Parses the UCI bag-of-words format: header values D, W, NNZ (on one
/// line or three), then NNZ lines "docId wordId count" with 1-based ids.
/// Duplicate (doc, word) pairs merge by summation.
pub fn parse_bow(
    docword_path: impl AsRef<Path>,
    vocab_path: Option<&Path>,
) -> Result<BowCorpus> {
    let path = docword_path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut header: Vec<u64> = Vec::with_capacity(3);
    let mut docs: Vec<Vec<(usize, u32)>> = Vec::new();
    let mut nnz_seen: u64 = 0;
    let (mut n_docs, mut n_words, mut nnz) = (0usize, 0usize, 0u64);

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if header.len() < 3 {
            for f in &fields {
                if header.len() == 3 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: "unexpected extra header value".into(),
                    });
                }
                header.push(f.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("cannot parse header value from {f:?}"),
                })?);
            }
            if header.len() == 3 {
                n_docs = header[0] as usize;
                n_words = header[1] as usize;
                nnz = header[2];
                docs = vec![Vec::new(); n_docs];
            }
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 'doc word count', got {} fields", fields.len()),
            });
        }
        let doc: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse doc id from {:?}", fields[0]),
        })?;
        let word: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse word id from {:?}", fields[1]),
        })?;
        let count: i64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse count from {:?}", fields[2]),
        })?;
        if doc < 1 || doc > n_docs {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("doc id {doc} outside [1, {n_docs}]"),
            });
        }
        if word < 1 || word > n_words {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("word id {word} outside [1, {n_words}]"),
            });
        }
        if count < 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("count must be >= 1, got {count}"),
            });
        }
        nnz_seen += 1;
        let entries = &mut docs[doc - 1];
        match entries.iter_mut().find(|(w, _)| *w == word - 1) {
            Some((_, c)) => *c += count as u32,
            None => entries.push((word - 1, count as u32)),
        }
    }

    if header.len() < 3 {
        return Err(Error::Contract(format!(
            "missing bag-of-words header in {}",
            path.display()
        )));
    }
    if nnz_seen != nnz {
        return Err(Error::Parse {
            line: 0,
            msg: format!("header declares {nnz} entries but file has {nnz_seen}"),
        });
    }
    for d in docs.iter_mut() {
        d.sort_unstable_by_key(|&(w, _)| w);
    }

    let vocab = match vocab_path {
        None => None,
        Some(vp) => {
            let vfile = File::open(vp).map_err(|e| Error::io(vp, e))?;
            let tokens: Vec<String> = BufReader::new(vfile)
                .lines()
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(|e| Error::io(vp, e))?
                .into_iter()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            if tokens.len() != n_words {
                return Err(Error::Parse {
                    line: 0,
                    msg: format!(
                        "vocabulary has {} tokens but header declares {n_words} words",
                        tokens.len()
                    ),
                });
            }
            Some(tokens)
        }
    };

    Ok(BowCorpus {
        docs,
        vocab_size: n_words,
        vocab,
    })
}

/// Writes the corpus in UCI format (three header lines then triples).
pub fn write_bow(corpus: &BowCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    let nnz: usize = corpus.docs.iter().map(|d| d.len()).sum();
    writeln!(w, "{}", corpus.n_docs()).map_err(io_err)?;
    writeln!(w, "{}", corpus.vocab_size).map_err(io_err)?;
    writeln!(w, "{}", nnz).map_err(io_err)?;
    for (d, doc) in corpus.docs.iter().enumerate() {
        for &(word, count) in doc {
            writeln!(w, "{} {} {}", d + 1, word + 1, count).map_err(io_err)?;
        }
    }
    Ok(())
}

fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = alphas
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("valid shape").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|g| g / total).collect()
}

fn sample_discrete<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Synthetic LDA corpus: topics ~ Dirichlet(0.1) over the vocabulary,
/// per-doc proportions ~ Dirichlet(0.5), every document exactly
/// `doc_len` tokens. Returns the corpus and the true topic-word
/// distributions (one row per topic).
pub fn gen_lda_synthetic(
    n_docs: usize,
    vocab_size: usize,
    n_topics: usize,
    doc_len: usize,
    seed: u64,
) -> Result<(BowCorpus, Vec<Vec<f64>>)> {
    if vocab_size < n_topics {
        return Err(Error::Contract(format!(
            "vocabulary size {vocab_size} must be >= topic count {n_topics}"
        )));
    }
    let mut rng = stream_rng(seed, "gen-lda", 0);
    let topics: Vec<Vec<f64>> = (0..n_topics)
        .map(|_| sample_dirichlet(&vec![0.1; vocab_size], &mut rng))
        .collect();
    let mut docs = Vec::with_capacity(n_docs);
    for _ in 0..n_docs {
        let theta = sample_dirichlet(&vec![0.5; n_topics], &mut rng);
        let mut counts = vec![0u32; vocab_size];
        for _ in 0..doc_len {
            let z = sample_discrete(&theta, &mut rng);
            let w = sample_discrete(&topics[z], &mut rng);
            counts[w] += 1;
        }
        docs.push(
            counts
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c > 0)
                .map(|(w, &c)| (w, c))
                .collect(),
        );
    }
    Ok((
        BowCorpus {
            docs,
            vocab_size,
            vocab: None,
        },
        topics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_header_and_triples() {
        let f = write_tmp("2 3 2\n1 1 4\n2 3 1\n");
        let c = parse_bow(f.path(), None).unwrap();
        assert_eq!(c.n_docs(), 2);
        assert_eq!(c.docs[0], vec![(0, 4)]);
        assert_eq!(c.docs[1], vec![(2, 1)]);
    }

    #[test]
    fn parses_three_line_header() {
        let f = write_tmp("2\n3\n2\n1 1 4\n2 3 1\n");
        let c = parse_bow(f.path(), None).unwrap();
        assert_eq!(c.docs[0], vec![(0, 4)]);
    }

    #[test]
    fn nnz_mismatch_rejected() {
        let f = write_tmp("2 3 5\n1 1 4\n2 3 1\n");
        assert!(matches!(
            parse_bow(f.path(), None),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn duplicates_merge_by_summation() {
        let f = write_tmp("1 3 2\n1 2 4\n1 2 3\n");
        let c = parse_bow(f.path(), None).unwrap();
        assert_eq!(c.docs[0], vec![(1, 7)]);
    }

    #[test]
    fn out_of_range_ids_rejected() {
        let f = write_tmp("1 3 1\n1 4 2\n");
        assert!(parse_bow(f.path(), None).is_err());
        let f = write_tmp("1 3 1\n2 1 2\n");
        assert!(parse_bow(f.path(), None).is_err());
        let f = write_tmp("1 3 1\n1 1 0\n");
        assert!(parse_bow(f.path(), None).is_err());
    }

    #[test]
    fn vocab_length_checked() {
        let doc = write_tmp("1 2 1\n1 1 1\n");
        let vocab = write_tmp("apple\nbanana\n");
        assert!(parse_bow(doc.path(), Some(vocab.path())).is_ok());
        let short = write_tmp("apple\n");
        assert!(parse_bow(doc.path(), Some(short.path())).is_err());
    }

    #[test]
    fn doc_totals_equal_doc_len() {
        let (c, _) = gen_lda_synthetic(20, 30, 3, 17, 5).unwrap();
        for d in &c.docs {
            let total: u32 = d.iter().map(|&(_, c)| c).sum();
            assert_eq!(total, 17);
        }
    }

    #[test]
    fn single_topic_matches_frequencies() {
        let (c, topics) = gen_lda_synthetic(300, 20, 1, 100, 5).unwrap();
        let mut freq = vec![0.0; 20];
        for d in &c.docs {
            for &(w, n) in d {
                freq[w] += n as f64;
            }
        }
        let total: f64 = freq.iter().sum();
        for (f, t) in freq.iter().zip(&topics[0]) {
            assert!((f / total - t).abs() < 0.02, "freq {} vs topic {t}", f / total);
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_lda_synthetic(10, 25, 4, 30, 77).unwrap();
        let b = gen_lda_synthetic(10, 25, 4, 30, 77).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
