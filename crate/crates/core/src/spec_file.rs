//! Channel description files.
//!
//! JSON document with `input_size`, `output_size`, `kernels` (one row-major
//! `output_size x input_size` matrix per state, outer index = previous output)
//! and an optional `reference_w` in the same layout. Entries are numbers or
//! strings holding a decimal or an exact rational such as `"2/3"`.
//!
//! ```json
//! {
//!   "input_size": 2,
//!   "output_size": 2,
//!   "kernels": [
//!     [[0.9, 0.2], [0.1, 0.8]],
//!     [["22/25", 0.22], ["3/25", 0.78]]
//!   ]
//! }
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::{check_column_stochastic, MemorylessChannel, PostChannel, STOCHASTIC_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    pub fn value(&self) -> Result<f64> {
        match self {
            Entry::Number(v) => Ok(*v),
            Entry::Text(s) => parse_probability(s),
        }
    }
}

/// Parse `"p/q"` or a decimal string.
pub fn parse_probability(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("cannot parse probability {s:?}"));
    match s.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num.trim().parse().map_err(|_| bad())?;
            let d: f64 = den.trim().parse().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            Ok(n / d)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

type RowMajor = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpecFile {
    pub input_size: usize,
    pub output_size: usize,
    pub kernels: Vec<RowMajor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_w: Option<RowMajor>,
}

fn to_matrix(rows: &RowMajor, y_size: usize, x_size: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != y_size {
        return Err(Error::Dimension(format!(
            "{what} has {} rows, expected output_size = {y_size}",
            rows.len()
        )));
    }
    let mut m = DMatrix::zeros(y_size, x_size);
    for (y, row) in rows.iter().enumerate() {
        if row.len() != x_size {
            return Err(Error::Dimension(format!(
                "{what} row {y} has {} entries, expected input_size = {x_size}",
                row.len()
            )));
        }
        for (x, e) in row.iter().enumerate() {
            m[(y, x)] = e.value()?;
        }
    }
    Ok(m)
}

fn from_matrix(m: &DMatrix<f64>) -> RowMajor {
    (0..m.nrows())
        .map(|y| (0..m.ncols()).map(|x| Entry::Number(m[(y, x)])).collect())
        .collect()
}

impl ChannelSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// JSON with one matrix per line.
    pub fn to_json(&self) -> String {
        let m = |rows: &RowMajor| serde_json::to_string(rows).expect("matrix serializes");
        let kernels: Vec<String> = self.kernels.iter().map(|k| format!("    {}", m(k))).collect();
        let mut out = format!(
            "{{\n  \"input_size\": {},\n  \"output_size\": {},\n  \"kernels\": [\n{}\n  ]",
            self.input_size,
            self.output_size,
            kernels.join(",\n")
        );
        if let Some(w) = &self.reference_w {
            out.push_str(&format!(",\n  \"reference_w\": {}", m(w)));
        }
        out.push_str("\n}\n");
        out
    }

    pub fn from_channel(ch: &PostChannel, reference: Option<&MemorylessChannel>) -> Self {
        Self {
            input_size: ch.x_size(),
            output_size: ch.y_size(),
            kernels: ch.kernels().iter().map(from_matrix).collect(),
            reference_w: reference.map(|w| from_matrix(w.matrix())),
        }
    }

    /// Validate and convert to a channel plus optional reference.
    pub fn to_channel(&self) -> Result<(PostChannel, Option<MemorylessChannel>)> {
        let (ys, xs) = (self.output_size, self.input_size);
        if self.kernels.len() != ys {
            return Err(Error::Dimension(format!(
                "{} kernels given, expected one per state (output_size = {ys})",
                self.kernels.len()
            )));
        }
        let mut kernels = Vec::with_capacity(ys);
        for (s, rows) in self.kernels.iter().enumerate() {
            let what = format!("kernel for state y'={s}");
            let m = to_matrix(rows, ys, xs, &what)?;
            check_column_stochastic(&m, &what, STOCHASTIC_TOL)?;
            kernels.push(m);
        }
        let ch = PostChannel::new(kernels)?;
        let reference = match &self.reference_w {
            Some(rows) => Some(MemorylessChannel::new(to_matrix(rows, ys, xs, "reference_w")?)?),
            None => None,
        };
        Ok((ch, reference))
    }
}

/// Load a channel file, returning the channel and its optional reference `W`.
pub fn load_channel_file(path: impl AsRef<Path>) -> Result<(PostChannel, Option<MemorylessChannel>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ChannelSpecFile::from_json(&text)?.to_channel()
}

pub fn load_post_channel(path: impl AsRef<Path>) -> Result<PostChannel> {
    load_channel_file(path).map(|(ch, _)| ch)
}

pub fn save_post_channel(
    path: impl AsRef<Path>,
    ch: &PostChannel,
    reference: Option<&MemorylessChannel>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ChannelSpecFile::from_channel(ch, reference).to_json())
        .map_err(|e| Error::io(path, e))
}
