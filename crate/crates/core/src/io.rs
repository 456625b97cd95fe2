//! File formats: headerless CSV matrices and shape-tagged JSON matrices.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Dataset, Error, Result};

/// JSON form of a matrix: explicit shape plus row-major entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl TryFrom<MatrixJson> for DMatrix<f64> {
    type Error = String;
    fn try_from(j: MatrixJson) -> std::result::Result<Self, String> {
        if j.rows * j.cols != j.data.len() {
            return Err(format!(
                "matrix declares {}x{} but carries {} entries",
                j.rows,
                j.cols,
                j.data.len()
            ));
        }
        Ok(DMatrix::from_row_slice(j.rows, j.cols, &j.data))
    }
}

pub mod matrix_json {
    use super::MatrixJson;
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        DMatrix::try_from(MatrixJson::deserialize(d)?).map_err(D::Error::custom)
    }
}

pub mod matrix_list_json {
    use super::MatrixJson;
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<MatrixJson> = ms.iter().map(MatrixJson::from).collect();
        list.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Vec::<MatrixJson>::deserialize(d)?
            .into_iter()
            .map(|j| DMatrix::try_from(j).map_err(D::Error::custom))
            .collect()
    }
}

/// Round-trip float text with 17 significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        "nan".to_string()
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_csv_matrix(text: &str, skip_header: bool, path: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let lines = text.lines().enumerate().skip(usize::from(skip_header));
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_string(),
                    message: format!("line {}: '{}': {e}", lineno + 1, field.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_string(),
                    message: format!(
                        "line {} has {} fields, expected {}",
                        lineno + 1,
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

pub fn read_csv_matrix(path: &Path, skip_header: bool) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv_matrix(&text, skip_header, &path.display().to_string())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_csv_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

/// Loads `X.csv`/`Y.csv`-style files into a validated dataset.
pub fn read_dataset(x_path: &Path, y_path: &Path, skip_header: bool) -> Result<Dataset> {
    let x = read_csv_matrix(x_path, skip_header)?;
    let y = read_csv_matrix(y_path, skip_header)?;
    Dataset::new(x, y)
}

pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    write_csv_matrix(&dir.join("X.csv"), data.x())?;
    write_csv_matrix(&dir.join("Y.csv"), data.y())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_header_is_skipped_on_request() {
        let m = parse_csv_matrix("a,b\n1,2\n3,4\n", true, "t").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(parse_csv_matrix("a,b\n1,2\n", false, "t").is_err());
    }

    #[test]
    fn ragged_csv_is_rejected() {
        assert!(parse_csv_matrix("1,2\n3\n", false, "t").is_err());
    }

    #[test]
    fn json_matrix_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let j = MatrixJson::from(&m);
        assert_eq!(j.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!((j.rows, j.cols), (2, 3));
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(vals in prop::collection::vec(-1e12f64..1e12, 1..40), cols in 1usize..5) {
            let rows = vals.len() / cols;
            prop_assume!(rows > 0);
            let m = DMatrix::from_row_slice(rows, cols, &vals[..rows * cols]);
            let back = parse_csv_matrix(&matrix_to_csv(&m), false, "t").unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
