//! Feature files: one row per sequence element, sketches stored back to back
//! in sequence order. Labels, when known, are listed once per sketch.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::format::{self, Header};

const MAGIC: &str = "dualsketch-features";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dim: usize,
    /// Rows per sketch; 50 for full sequences.
    pub rows_per_item: usize,
    pub rows: Vec<Vec<f64>>,
    /// Empty, or one entry per sketch (`None` for unlabeled).
    pub labels: Vec<Option<String>>,
}

impl FeatureFile {
    pub fn items(&self) -> usize {
        self.rows.len() / self.rows_per_item.max(1)
    }

    /// Rows belonging to sketch `i`.
    pub fn item(&self, i: usize) -> &[Vec<f64>] {
        &self.rows[i * self.rows_per_item..(i + 1) * self.rows_per_item]
    }

    fn validate(&self) -> Result<()> {
        if self.rows_per_item == 0 || !self.rows.len().is_multiple_of(self.rows_per_item) {
            return Err(Error::format(format!("{} rows do not split into items of {}", self.rows.len(), self.rows_per_item)));
        }
        if let Some(r) = self.rows.iter().find(|r| r.len() != self.dim) {
            return Err(Error::shape(format!("feature row of length {} in a {}-dim file", r.len(), self.dim)));
        }
        if !self.labels.is_empty() && self.labels.len() != self.items() {
            return Err(Error::format(format!("{} labels for {} items", self.labels.len(), self.items())));
        }
        Ok(())
    }
}

pub fn write_feature_file<W: Write>(w: &mut W, f: &FeatureFile) -> Result<()> {
    f.validate()?;
    let mut h = Header::new(MAGIC, VERSION);
    h.push("count", f.rows.len());
    h.push("dim", f.dim);
    h.push("rows_per_item", f.rows_per_item);
    for l in &f.labels {
        match l {
            Some(name) if !name.contains(char::is_whitespace) && !name.is_empty() => h.push("label", name),
            Some(name) => return Err(Error::format(format!("label {name:?} cannot contain whitespace"))),
            None => h.push("label", "-"),
        }
    }
    h.write_to(w)?;
    format::write_f32_payload(w, f.rows.iter().flatten().copied())
}

pub fn read_feature_file<R: BufRead>(r: &mut R) -> Result<FeatureFile> {
    let h = Header::read_from(r, MAGIC, VERSION)?;
    let count = h.parse_usize("count")?;
    let dim = h.parse_usize("dim")?;
    let rows_per_item = h.parse_usize("rows_per_item")?;
    let labels = h.entries.iter().filter(|(k, _)| k == "label").map(|(_, v)| (v != "-").then(|| v.clone())).collect();
    let flat = format::read_f32_payload(r, count * dim)?;
    format::expect_eof(r)?;
    let rows = if dim == 0 { vec![Vec::new(); count] } else { flat.chunks(dim).map(<[f64]>::to_vec).collect() };
    let f = FeatureFile { dim, rows_per_item, rows, labels };
    f.validate()?;
    Ok(f)
}
