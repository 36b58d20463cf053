//! Sketch files: a `QIKEY-SKETCH v1` line followed by a JSON body.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EstimatorSketch;
use crate::filter::{PairSketch, TupleSketch};

pub const MAGIC: &str = "QIKEY-SKETCH v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoredSketch {
    Tuple(TupleSketch),
    Pair(PairSketch),
    Estimator(EstimatorSketch),
}

impl StoredSketch {
    fn validate(&self) -> Result<()> {
        let (rows, n) = match self {
            StoredSketch::Tuple(s) => (&s.sample, s.n),
            StoredSketch::Pair(s) => {
                if s.rows.len() % 2 != 0 {
                    return Err(Error::SketchFormat("pair sketch holds an odd row count".into()));
                }
                (&s.rows, s.n)
            }
            StoredSketch::Estimator(s) => {
                if s.rows.len() % 2 != 0 {
                    return Err(Error::SketchFormat("estimator holds an odd row count".into()));
                }
                if s.max_query == 0 || s.max_query > s.rows.n_cols() {
                    return Err(Error::SketchFormat(format!("bad query bound {}", s.max_query)));
                }
                (&s.rows, s.n)
            }
        };
        rows.validate()?;
        if rows.source_rows().iter().any(|&r| r >= n) {
            return Err(Error::SketchFormat("sampled row index beyond source size".into()));
        }
        Ok(())
    }
}

pub fn write_sketch<W: Write>(mut writer: W, sketch: &StoredSketch) -> Result<()> {
    let io_err = |source| Error::Io {
        path: "<sketch>".into(),
        source,
    };
    writeln!(writer, "{MAGIC}").map_err(io_err)?;
    serde_json::to_writer(&mut writer, sketch)?;
    writeln!(writer).map_err(io_err)?;
    writer.flush().map_err(io_err)
}

pub fn read_sketch<R: Read>(reader: R) -> Result<StoredSketch> {
    let mut reader = BufReader::new(reader);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|source| Error::Io {
        path: "<sketch>".into(),
        source,
    })?;
    if first.trim_end_matches(['\r', '\n']) != MAGIC {
        return Err(Error::SketchFormat(format!("expected header `{MAGIC}`")));
    }
    let sketch: StoredSketch = serde_json::from_reader(reader)?;
    sketch.validate()?;
    Ok(sketch)
}

pub fn save(path: impl AsRef<Path>, sketch: &StoredSketch) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| io_error(path, source))?;
    write_sketch(BufWriter::new(file), sketch)
}

pub fn load(path: impl AsRef<Path>) -> Result<StoredSketch> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| io_error(path, source))?;
    read_sketch(file)
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSet, Dataset};

    fn ds() -> Dataset {
        let rows: Vec<Vec<String>> = (0..40).map(|i| vec![(i % 7).to_string(), (i % 5).to_string()]).collect();
        Dataset::from_rows(&rows, Some(vec!["a".into(), "b".into()])).unwrap()
    }

    fn round_trip(s: &StoredSketch) -> StoredSketch {
        let mut buf = Vec::new();
        write_sketch(&mut buf, s).unwrap();
        assert!(buf.starts_with(MAGIC.as_bytes()));
        read_sketch(buf.as_slice()).unwrap()
    }

    #[test]
    fn all_kinds_round_trip() {
        let d = ds();
        let t = StoredSketch::Tuple(TupleSketch::build(&d, 0.2, 2.0, 9).unwrap());
        let p = StoredSketch::Pair(PairSketch::build(&d, 0.2, 2.0, 9).unwrap());
        let e = StoredSketch::Estimator(EstimatorSketch::build(&d, 1, 0.5, 0.5, 1.0, 9).unwrap());
        for s in [t, p, e] {
            assert_eq!(round_trip(&s), s);
        }
    }

    #[test]
    fn loaded_sketch_answers_like_the_original() {
        let d = ds();
        let t = TupleSketch::build(&d, 0.2, 2.0, 3).unwrap();
        let StoredSketch::Tuple(back) = round_trip(&StoredSketch::Tuple(t.clone())) else {
            panic!("kind changed");
        };
        for mask in 0..4u64 {
            let a = AttributeSet::from_mask(mask);
            assert_eq!(t.query(&a).unwrap(), back.query(&a).unwrap());
        }
    }

    #[test]
    fn rejects_bad_header_and_body() {
        assert!(matches!(read_sketch("nope\n{}".as_bytes()), Err(Error::SketchFormat(_))));
        assert!(read_sketch(format!("{MAGIC}\n{{\"kind\":\"tuple\"}}").as_bytes()).is_err());
        let broken = format!(
            "{MAGIC}\n{{\"kind\":\"tuple\",\"sample\":{{\"m\":2,\"source\":[0],\"codes\":[1]}},\
             \"epsilon\":0.1,\"constant\":1.0,\"seed\":0,\"n\":5,\"names\":null}}"
        );
        assert!(matches!(read_sketch(broken.as_bytes()), Err(Error::SketchFormat(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.qik");
        let s = StoredSketch::Tuple(TupleSketch::build(&ds(), 0.2, 2.0, 1).unwrap());
        save(&path, &s).unwrap();
        assert_eq!(load(&path).unwrap(), s);
        assert!(load(dir.path().join("missing")).is_err());
    }
}
