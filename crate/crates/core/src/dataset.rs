//! Labelled instances and their line-delimited JSON file format
//! (`{"x":[...],"y":[...]}` per line).

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::LabelVector;

/// A feature vector and its binary ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub x: Vec<f64>,
    pub y: LabelVector,
}

impl Instance {
    pub fn new(x: Vec<f64>, y: LabelVector) -> Self {
        Self { x, y }
    }

    pub fn relevant(&self) -> Vec<usize> {
        self.y.relevant()
    }
}

/// Checks every instance shares the first one's dimensions and returns
/// `(d, c)`.
pub fn dimensions(data: &[Instance]) -> Result<(usize, usize)> {
    let first = data.first().ok_or_else(|| Error::arg("dataset is empty"))?;
    let (d, c) = (first.x.len(), first.y.len());
    for (i, inst) in data.iter().enumerate() {
        if inst.x.len() != d || inst.y.len() != c {
            return Err(Error::arg(format!(
                "instance {i} has shape ({}, {}), expected ({d}, {c})",
                inst.x.len(),
                inst.y.len()
            )));
        }
        if inst.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg(format!("instance {i} has a non-finite feature")));
        }
    }
    Ok((d, c))
}

pub fn to_jsonl(data: &[Instance]) -> String {
    let mut out = String::new();
    for inst in data {
        out.push_str(&serde_json::to_string(inst).expect("instances always serialize"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            line: n + 1,
            source,
        })?);
    }
    Ok(rows)
}

pub fn load(path: &Path) -> Result<Vec<Instance>> {
    let data: Vec<Instance> = read_jsonl(path)?;
    dimensions(&data)?;
    Ok(data)
}

pub fn save(path: &Path, data: &[Instance]) -> Result<()> {
    write_atomic(path, to_jsonl(data).as_bytes())
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
