//! Dataset files: UTF-8 CSV with header
//! `f0,...,f{D-1},kind,label,candidates,true_label`.
//!
//! Floats are written with 17 significant digits so a read after a write
//! reproduces every feature bit for bit. Class count is not stored; readers
//! infer it as one past the largest class index unless told otherwise.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{CandidateSet, Entry, ImpreciseDataset, LabelInfo, LabelKind, Sample};
use crate::error::{Error, Result};

const TAIL: [&str; 4] = ["kind", "label", "candidates", "true_label"];

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_set(s: &CandidateSet) -> String {
    s.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("|")
}

pub fn write_dataset(dataset: &ImpreciseDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = BufWriter::new(File::create(path.as_ref())?);
    let mut w = csv::WriterBuilder::new().from_writer(file);
    let mut header: Vec<String> = (0..dataset.dim()).map(|i| format!("f{i}")).collect();
    header.extend(TAIL.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for e in dataset.entries() {
        let mut row: Vec<String> = e.sample.features.iter().map(|&v| format_f64(v)).collect();
        let (label, candidates) = match &e.label {
            LabelInfo::Exact(y) | LabelInfo::Noisy(y) => (y.to_string(), String::new()),
            LabelInfo::Candidates(s) | LabelInfo::NoisyCandidates(s) => (String::new(), join_set(s)),
            LabelInfo::Unlabeled => (String::new(), String::new()),
        };
        row.push(e.label.kind().tag().to_string());
        row.push(label);
        row.push(candidates);
        row.push(e.sample.true_label.to_string());
        w.write_record(&row)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    inner.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<ImpreciseDataset> {
    read_impl(path.as_ref(), None)
}

/// Like [`read_dataset`] but with a known class count.
pub fn read_dataset_with_classes(path: impl AsRef<Path>, classes: usize) -> Result<ImpreciseDataset> {
    read_impl(path.as_ref(), Some(classes))
}

fn read_impl(path: &Path, classes: Option<usize>) -> Result<ImpreciseDataset> {
    let file = BufReader::new(File::open(path)?);
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let header = r.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < TAIL.len() + 1 || cols[cols.len() - TAIL.len()..] != TAIL {
        return Err(parse_err(1, format!("unexpected header {cols:?}")));
    }
    let dim = cols.len() - TAIL.len();
    for (i, name) in cols[..dim].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(parse_err(1, format!("feature column {i} is named `{name}`")));
        }
    }

    let mut entries = Vec::new();
    let mut max_class = 0;
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols.len() {
            return Err(parse_err(line, format!("expected {} fields, found {}", cols.len(), record.len())));
        }
        let features = (0..dim)
            .map(|i| {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| parse_err(line, format!("feature f{i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let tag = &record[dim];
        let kind = LabelKind::from_tag(tag).ok_or_else(|| Error::FormatVersion {
            path: path.to_path_buf(),
            line,
            tag: tag.to_string(),
        })?;
        let class = |field: &str, what: &str| -> Result<usize> {
            field
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(line, format!("{what} `{field}`: {e}")))
        };
        let set = |field: &str| -> Result<CandidateSet> {
            if field.is_empty() {
                return Err(parse_err(line, format!("kind `{tag}` needs a nonempty candidate set")));
            }
            let members = field
                .split('|')
                .map(|c| class(c, "candidate"))
                .collect::<Result<Vec<_>>>()?;
            CandidateSet::new(members).map_err(|e| parse_err(line, e.to_string()))
        };
        let label_field = &record[dim + 1];
        let label = match kind {
            LabelKind::Exact => LabelInfo::Exact(class(label_field, "label")?),
            LabelKind::Noisy => LabelInfo::Noisy(class(label_field, "label")?),
            LabelKind::Partial => LabelInfo::Candidates(set(&record[dim + 2])?),
            LabelKind::NoisyPartial => LabelInfo::NoisyCandidates(set(&record[dim + 2])?),
            LabelKind::Unlabeled => LabelInfo::Unlabeled,
        };
        let true_label = class(&record[dim + 3], "true_label")?;
        max_class = max_class.max(true_label).max(label.max_class().unwrap_or(0));
        entries.push(Entry {
            sample: Sample {
                features,
                true_label,
            },
            label,
        });
    }
    let classes = classes.unwrap_or(max_class + 1).max(2);
    ImpreciseDataset::new(classes, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{make_mixed, make_partial, BlobSpec};
    use crate::rng::Stream;

    fn write_raw(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("d.csv");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn round_trip_generated() {
        let dir = tempfile::tempdir().unwrap();
        let clean = BlobSpec {
            classes: 4,
            dim: 3,
            ..BlobSpec::default()
        }
        .generate(64, 2, Stream::TrainData)
        .unwrap();
        for ds in [
            make_partial(&clean, 0.4, 1).unwrap(),
            make_mixed(&clean, 16, 0.3, 0.5, 1).unwrap(),
        ] {
            let p = dir.path().join("rt.csv");
            write_dataset(&ds, &p).unwrap();
            let back = read_dataset_with_classes(&p, 4).unwrap();
            assert_eq!(back.entries(), ds.entries());
            assert_eq!(back.classes(), ds.classes());
        }
    }

    #[test]
    fn pipe_separated_candidates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "f0,kind,label,candidates,true_label\n0.5,partial,,2|5|7,5\n");
        let ds = read_dataset_with_classes(&p, 10).unwrap();
        assert_eq!(
            ds.entries()[0].label,
            LabelInfo::Candidates(CandidateSet::new(vec![2, 5, 7]).unwrap())
        );
    }

    #[test]
    fn empty_partial_cell_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "f0,kind,label,candidates,true_label\n0.5,exact,1,,1\n0.5,partial,,,5\n");
        match read_dataset(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_kind_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "f0,kind,label,candidates,true_label\n0.5,soft,1,,1\n");
        assert!(matches!(read_dataset(&p), Err(Error::FormatVersion { .. })));
    }

    #[test]
    fn malformed_float_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_raw(&dir, "f0,kind,label,candidates,true_label\n0.5,exact,1,,1\nabc,exact,1,,1\n");
        match read_dataset(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("f0"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
