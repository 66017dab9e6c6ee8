//! LIBSVM sparse text format: `label idx:val idx:val …` with 1-based,
//! strictly increasing indices.
//!
//! Labels `1`/`+1` map to `+1` and `2`/`-1` to `−1`. A constant bias
//! feature is appended after the last raw feature.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, Dataset};
use crate::loss::{Example, Features, SparseVector};

pub fn load_libsvm(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_libsvm(BufReader::new(file), expected_dim, &name).map_err(|e| match e {
        DataError::Io { source, .. } => DataError::io(path, source),
        other => other,
    })
}

pub fn parse_libsvm(
    reader: impl Read,
    expected_dim: Option<usize>,
    name: &str,
) -> Result<Dataset, DataError> {
    let mut rows: Vec<(Vec<u32>, Vec<f64>, i32)> = Vec::new();
    let mut max_index = 0usize;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DataError::io("<input>", e))?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| DataError::Parse {
            line: line_no,
            message,
        };
        let mut tokens = line.split_ascii_whitespace();
        let label = match tokens.next().unwrap() {
            "1" | "+1" | "1.0" => 1,
            "2" | "-1" | "2.0" | "-1.0" => -1,
            other => {
                return Err(err(format!(
                    "unsupported label `{other}` (expected 1 or 2)"
                )))
            }
        };
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, found `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| err(format!("bad feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite feature value `{val}`")));
            }
            if let Some(&prev) = indices.last() {
                if idx - 1 <= prev as usize {
                    return Err(err(format!("feature index {idx} is not increasing")));
                }
            }
            if let Some(dim) = expected_dim {
                if idx > dim {
                    return Err(err(format!("feature index {idx} exceeds dimension {dim}")));
                }
            }
            let idx0 = u32::try_from(idx - 1)
                .map_err(|_| err(format!("feature index {idx} too large")))?;
            indices.push(idx0);
            values.push(val);
            max_index = max_index.max(idx);
        }
        rows.push((indices, values, label));
    }
    let raw_dim = expected_dim.unwrap_or(max_index);
    let bias = raw_dim as u32;
    let examples = rows
        .into_iter()
        .map(|(mut indices, mut values, label)| {
            indices.push(bias);
            values.push(1.0);
            Ok(Example::labeled(
                Features::Sparse(SparseVector::new(indices, values)?),
                label,
            ))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Dataset::new(name, examples, raw_dim + 1, 2, true)
}

/// Writes a binary dataset back out in LIBSVM form, dropping the bias
/// feature and using the `1`/`2` label convention.
pub fn write_libsvm(dataset: &Dataset, writer: impl Write) -> Result<(), DataError> {
    let mut w = BufWriter::new(writer);
    let bias = dataset.has_bias.then(|| dataset.n_features - 1);
    let io = |e| DataError::io("<output>", e);
    for (index, ex) in dataset.examples.iter().enumerate() {
        let l = ex.as_labeled().ok_or_else(|| DataError::InvalidExample {
            index,
            message: "only labelled examples can be written".into(),
        })?;
        let label = match l.label {
            1 => "1",
            -1 => "2",
            other => {
                return Err(DataError::InvalidExample {
                    index,
                    message: format!("label {other} is not binary"),
                })
            }
        };
        write!(w, "{label}").map_err(io)?;
        let mut result = Ok(());
        l.features.for_each_entry(|i, v| {
            if Some(i) != bias && result.is_ok() {
                result = write!(w, " {}:{}", i + 1, v);
            }
        });
        result.map_err(io)?;
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset, DataError> {
        parse_libsvm(s.as_bytes(), None, "test")
    }

    fn sparse(ex: &Example) -> (Vec<u32>, Vec<f64>, i32) {
        let l = ex.as_labeled().unwrap();
        match &l.features {
            Features::Sparse(s) => (s.indices().to_vec(), s.values().to_vec(), l.label),
            _ => unreachable!(),
        }
    }

    #[test]
    fn parses_basic_lines() {
        let d = parse("1 1:0.5 3:-2\n2\n").unwrap();
        assert_eq!(d.n_features, 4);
        assert_eq!(
            sparse(&d.examples[0]),
            (vec![0, 2, 3], vec![0.5, -2.0, 1.0], 1)
        );
        assert_eq!(sparse(&d.examples[1]), (vec![3], vec![1.0], -1));
    }

    #[test]
    fn expected_dimension_places_bias() {
        let d = parse_libsvm("1 1:1\n".as_bytes(), Some(54), "x").unwrap();
        assert_eq!(d.n_features, 55);
        assert_eq!(sparse(&d.examples[0]).0, vec![0, 54]);
        assert!(parse_libsvm("1 55:1\n".as_bytes(), Some(54), "x").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("1 1:1\n1 3:1 2:1\n", 2),
            ("1 1:1\n\n3 1:1\n", 3),
            ("1 1:x\n", 1),
            ("1 0:1\n", 1),
            ("1 1:1 1:2\n", 1),
            ("1 nocolon\n", 1),
        ] {
            match parse(text) {
                Err(DataError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn round_trip() {
        let text = "1 1:0.25 7:1e-7\n2 2:-3.5\n2\n1 3:0.1 4:0.30000000000000004\n";
        let d = parse(text).unwrap();
        let mut out = Vec::new();
        write_libsvm(&d, &mut out).unwrap();
        let again = parse_libsvm(out.as_slice(), None, "test").unwrap();
        assert_eq!(again, d);
    }
}
