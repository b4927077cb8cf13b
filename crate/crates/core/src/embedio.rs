//! JSON-lines embedding interchange.
//!
//! One record per line: `{"id":..,"alg":..,"tag":..,"dim":..,"v":[..]}`.
//! An optional first line `{"meta":{..}}` carries file-level provenance.
//! Values are written with 17 significant digits, so they parse back
//! bit-exactly. All records in a file share `alg` and `dim`, and ids are
//! unique.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scattering::Embedding;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileMeta {
    pub producer: String,
    pub version: String,
    /// Manifest of the dataset the embeddings were computed from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl FileMeta {
    pub fn this_crate(manifest: Option<String>) -> Self {
        FileMeta { producer: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into(), manifest }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingFile {
    pub meta: Option<FileMeta>,
    pub records: Vec<Embedding>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    alg: String,
    #[serde(default)]
    tag: String,
    dim: usize,
    v: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaLine {
    meta: FileMeta,
}

/// Tracks the file-wide invariants while records stream past.
#[derive(Default)]
struct Validator {
    seen: HashSet<String>,
    alg: Option<String>,
    dim: Option<usize>,
}

impl Validator {
    fn check(&mut self, e: &Embedding) -> std::result::Result<(), String> {
        if let Some(d) = self.dim {
            if e.dim() != d {
                return Err(format!("record {:?} has dim {}, file dim is {d}", e.image_id, e.dim()));
            }
        }
        if let Some(a) = &self.alg {
            if &e.algorithm != a {
                return Err(format!("record {:?} has alg {:?}, file alg is {a:?}", e.image_id, e.algorithm));
            }
        }
        if !self.seen.insert(e.image_id.clone()) {
            return Err(format!("duplicate id {:?}", e.image_id));
        }
        self.dim = Some(e.dim());
        if self.alg.is_none() {
            self.alg = Some(e.algorithm.clone());
        }
        Ok(())
    }
}

/// Streaming reader; holds one line at a time plus the set of seen ids.
pub struct EmbeddingReader<R> {
    lines: std::io::Lines<R>,
    path: String,
    line_no: usize,
    meta: Option<FileMeta>,
    pending: Option<Embedding>,
    validator: Validator,
}

impl<R: BufRead> EmbeddingReader<R> {
    /// Reads ahead to the first record so that a metadata line, if any, is
    /// available from [`EmbeddingReader::meta`].
    pub fn new(reader: R, path: impl Into<String>) -> Result<Self> {
        let mut r = EmbeddingReader {
            lines: reader.lines(),
            path: path.into(),
            line_no: 0,
            meta: None,
            pending: None,
            validator: Validator::default(),
        };
        if let Some(line) = r.next_line()? {
            if let Ok(m) = serde_json::from_str::<MetaLine>(&line) {
                r.meta = Some(m.meta);
            } else {
                r.pending = Some(r.parse_record(&line)?);
            }
        }
        Ok(r)
    }

    pub fn meta(&self) -> Option<&FileMeta> {
        self.meta.as_ref()
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone().into(), line: self.line_no, msg: msg.into() }
    }

    fn next_line(&mut self) -> Result<Option<String>> {
        for line in self.lines.by_ref() {
            self.line_no += 1;
            let line = line?;
            if !line.trim().is_empty() {
                return Ok(Some(line));
            }
        }
        Ok(None)
    }

    fn parse_record(&mut self, line: &str) -> Result<Embedding> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| self.err(format!("malformed record: {e}")))?;
        if raw.dim != raw.v.len() {
            return Err(self.err(format!("record {:?} declares dim {} but has {} values", raw.id, raw.dim, raw.v.len())));
        }
        let e = Embedding { image_id: raw.id, algorithm: raw.alg, tag: raw.tag, vector: raw.v };
        self.validator.check(&e).map_err(|m| self.err(m))?;
        Ok(e)
    }
}

impl<R: BufRead> Iterator for EmbeddingReader<R> {
    type Item = Result<Embedding>;

    fn next(&mut self) -> Option<Self::Item> {
        if let Some(e) = self.pending.take() {
            return Some(Ok(e));
        }
        match self.next_line() {
            Ok(Some(line)) => Some(self.parse_record(&line)),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

pub fn open_embeddings(path: &Path) -> Result<EmbeddingReader<BufReader<File>>> {
    EmbeddingReader::new(BufReader::new(File::open(path)?), path.display().to_string())
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingFile> {
    let reader = open_embeddings(path)?;
    let meta = reader.meta().cloned();
    let records = reader.collect::<Result<Vec<_>>>()?;
    Ok(EmbeddingFile { meta, records })
}

fn write_record<W: Write>(w: &mut W, e: &Embedding) -> Result<()> {
    write!(
        w,
        "{{\"id\":{},\"alg\":{},\"tag\":{},\"dim\":{},\"v\":[",
        serde_json::to_string(&e.image_id)?,
        serde_json::to_string(&e.algorithm)?,
        serde_json::to_string(&e.tag)?,
        e.dim()
    )?;
    for (i, v) in e.vector.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Format(format!("record {:?} has non-finite value {v}", e.image_id)));
        }
        if i > 0 {
            w.write_all(b",")?;
        }
        write!(w, "{v:.16e}")?;
    }
    w.write_all(b"]}\n")?;
    Ok(())
}

/// Validates the file invariants, then writes every record.
pub fn write_embeddings_to<W: Write>(mut w: W, meta: Option<&FileMeta>, records: &[Embedding]) -> Result<()> {
    let mut v = Validator::default();
    for e in records {
        v.check(e).map_err(Error::Format)?;
    }
    if let Some(m) = meta {
        writeln!(w, "{{\"meta\":{}}}", serde_json::to_string(m)?)?;
    }
    for e in records {
        write_record(&mut w, e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_embeddings(path: &Path, meta: Option<&FileMeta>, records: &[Embedding]) -> Result<()> {
    write_embeddings_to(BufWriter::new(File::create(path)?), meta, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str, v: Vec<f64>) -> Embedding {
        Embedding { image_id: id.into(), algorithm: "wavelet".into(), tag: "jzazbz".into(), vector: v }
    }

    fn parse(text: &str) -> Result<EmbeddingFile> {
        let r = EmbeddingReader::new(text.as_bytes(), "mem")?;
        let meta = r.meta().cloned();
        Ok(EmbeddingFile { meta, records: r.collect::<Result<_>>()? })
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let recs = vec![
            rec("a", vec![0.1, -2.5e-300, 1.0 / 3.0]),
            rec("b\"quoted\"", vec![f64::MAX, f64::MIN_POSITIVE, -0.0]),
            rec("c", vec![5e-324, 123456789.123456789, 0.0]),
        ];
        let meta = FileMeta::this_crate(Some("manifest.jsonl".into()));
        let mut buf = Vec::new();
        write_embeddings_to(&mut buf, Some(&meta), &recs).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.meta, Some(meta));
        for (a, b) in recs.iter().zip(&back.records) {
            assert_eq!(a.image_id, b.image_id);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.vector), bits(&b.vector));
        }
    }

    #[test]
    fn format_is_one_object_per_line() {
        let mut buf = Vec::new();
        write_embeddings_to(&mut buf, None, &[rec("x", vec![0.5, 2.0])]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"id\":\"x\",\"alg\":\"wavelet\",\"tag\":\"jzazbz\",\"dim\":2,\"v\":[5.0000000000000000e-1,2.0000000000000000e0]}\n"
        );
    }

    #[test]
    fn rejects_bad_files_with_line_numbers() {
        let ok = r#"{"id":"a","alg":"w","tag":"","dim":2,"v":[1,2]}"#;
        let e = parse(&format!("{ok}\n{{\"id\":\"b\",\"alg\":\"w\",\"tag\":\"\",\"dim\":4,\"v\":[1,2,3]}}\n")).unwrap_err();
        assert_eq!(line_of(e), 2);
        let e = parse(&format!("{ok}\n\n{ok}\n")).unwrap_err();
        assert_eq!(line_of(e), 3);
        let e = parse(&format!("{ok}\n{{\"id\":\"b\",\"alg\":\"w\",\"tag\":\"\",\"dim\":3,\"v\":[1,2,3]}}\n")).unwrap_err();
        assert_eq!(line_of(e), 2);
        let e = parse(&format!("{ok}\n{{\"id\":\"b\",\"alg\":\"other\",\"tag\":\"\",\"dim\":2,\"v\":[1,2]}}\n")).unwrap_err();
        assert_eq!(line_of(e), 2);
        let e = parse("{\"meta\":{\"producer\":\"p\",\"version\":\"1\"}}\nnot json\n").unwrap_err();
        assert_eq!(line_of(e), 2);
        assert!(parse("").unwrap().records.is_empty());
    }

    #[test]
    fn writer_enforces_invariants() {
        let mut sink = Vec::new();
        assert!(write_embeddings_to(&mut sink, None, &[rec("a", vec![1.0]), rec("a", vec![2.0])]).is_err());
        assert!(write_embeddings_to(&mut sink, None, &[rec("a", vec![1.0]), rec("b", vec![2.0, 3.0])]).is_err());
        assert!(write_embeddings_to(&mut sink, None, &[rec("a", vec![f64::NAN])]).is_err());
    }

    #[test]
    fn streams_large_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.jsonl");
        let recs: Vec<Embedding> = (0..10_000).map(|i| rec(&format!("img{i:05}"), vec![i as f64 * 0.1; 48])).collect();
        write_embeddings(&path, None, &recs).unwrap();
        let mut n = 0;
        for (i, e) in open_embeddings(&path).unwrap().enumerate() {
            assert_eq!(e.unwrap().vector[0], i as f64 * 0.1);
            n += 1;
        }
        assert_eq!(n, 10_000);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn random_vectors_round_trip(seed_vals in proptest::collection::vec(proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 16), 1000)) {
            let recs: Vec<Embedding> = seed_vals.into_iter().enumerate().map(|(i, v)| rec(&i.to_string(), v)).collect();
            let mut buf = Vec::new();
            write_embeddings_to(&mut buf, None, &recs).unwrap();
            let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap().records;
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in recs.iter().zip(&back) {
                for (x, y) in a.vector.iter().zip(&b.vector) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }
}
