//! Versioned parameter files: a text header listing every tensor by
//! `group/name` and shape, followed by the values as little-endian `f32`
//! in header order.

use std::io::{BufRead, Write};

use super::tensor::{Parameters, Tensor2};
use crate::error::{Error, Result};
use crate::format::{self, Header};

const MAGIC: &str = "dualsketch-checkpoint";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub seed: u64,
    pub epoch: usize,
    /// Free-form `key value` pairs (config snapshot, codebook hash, ...).
    pub meta: Vec<(String, String)>,
    pub groups: Vec<(String, Vec<(String, Tensor2)>)>,
}

impl Checkpoint {
    pub fn new(seed: u64, epoch: usize) -> Self {
        Checkpoint { seed, epoch, ..Default::default() }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn add_group<P: Parameters>(&mut self, name: &str, params: &P) {
        let tensors = params.tensors().into_iter().map(|(n, t)| (n, t.clone())).collect();
        self.groups.push((name.to_string(), tensors));
    }

    /// Copies a stored group into `params`, whose layout must match exactly.
    pub fn load_group<P: Parameters>(&self, name: &str, params: &mut P) -> Result<()> {
        let (_, stored) =
            self.groups.iter().find(|(g, _)| g == name).ok_or_else(|| Error::format(format!("checkpoint has no group `{name}`")))?;
        let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
        let targets = params.tensors_mut();
        if targets.len() != stored.len() {
            return Err(Error::format(format!("group `{name}` holds {} tensors, expected {}", stored.len(), targets.len())));
        }
        for ((dst, want), (got, src)) in targets.into_iter().zip(&names).zip(stored) {
            if want != got || dst.shape() != src.shape() {
                return Err(Error::format(format!(
                    "group `{name}`: stored {got} {:?} does not match {want} {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.data.copy_from_slice(&src.data);
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut h = Header::new(MAGIC, VERSION);
        h.push("seed", self.seed);
        h.push("epoch", self.epoch);
        for (k, v) in &self.meta {
            h.push("meta", format!("{k} {v}"));
        }
        for (g, tensors) in &self.groups {
            for (n, t) in tensors {
                h.push("tensor", format!("{g}/{n} {} {}", t.rows, t.cols));
            }
        }
        h.write_to(w)?;
        let values = self.groups.iter().flat_map(|(_, ts)| ts.iter().flat_map(|(_, t)| t.data.iter().copied()));
        format::write_f32_payload(w, values)
    }

    pub fn read_from<R: BufRead>(r: &mut R) -> Result<Self> {
        let h = Header::read_from(r, MAGIC, VERSION)?;
        let mut ck = Checkpoint::new(h.parse_u64("seed")?, h.parse_usize("epoch")?);
        let mut layout: Vec<(String, String, usize, usize)> = Vec::new();
        for (k, v) in &h.entries {
            match k.as_str() {
                "meta" => {
                    let (mk, mv) = v.split_once(' ').unwrap_or((v.as_str(), ""));
                    ck.meta.push((mk.to_string(), mv.to_string()));
                }
                "tensor" => {
                    let parts: Vec<&str> = v.split(' ').collect();
                    let parsed = match parts.as_slice() {
                        [path, rows, cols] => path
                            .split_once('/')
                            .zip(rows.parse().ok())
                            .zip(cols.parse().ok())
                            .map(|(((g, n), r), c)| (g.to_string(), n.to_string(), r, c)),
                        _ => None,
                    };
                    layout.push(parsed.ok_or_else(|| Error::format(format!("bad tensor line {v:?}")))?);
                }
                _ => {}
            }
        }
        for (g, n, rows, cols) in layout {
            let data = format::read_f32_payload(r, rows * cols)?;
            let t = Tensor2::from_vec(rows, cols, data)?;
            match ck.groups.iter_mut().find(|(name, _)| *name == g) {
                Some((_, ts)) => ts.push((n, t)),
                None => ck.groups.push((g, vec![(n, t)])),
            }
        }
        format::expect_eof(r)?;
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::GruLayerParams;
    use rand::SeedableRng;

    #[test]
    fn roundtrip_through_f32() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = GruLayerParams::init(3, 4, 2, &mut rng);
        let mut ck = Checkpoint::new(7, 12);
        ck.set_meta("codebook", "abc123");
        ck.set_meta("note", "two words");
        ck.add_group("texture_gru", &p);
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();

        let back = Checkpoint::read_from(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back.seed, 7);
        assert_eq!(back.epoch, 12);
        assert_eq!(back.meta("note"), Some("two words"));
        let mut q = GruLayerParams::zeros(3, 4, 2);
        back.load_group("texture_gru", &mut q).unwrap();
        for (a, b) in p.flatten().iter().zip(q.flatten()) {
            assert_eq!(*a as f32 as f64, b);
        }
        let mut wrong = GruLayerParams::zeros(3, 5, 2);
        assert!(back.load_group("texture_gru", &mut wrong).is_err());
        assert!(back.load_group("shape_gru", &mut q).is_err());
    }

    #[test]
    fn truncated_file_fails() {
        let mut ck = Checkpoint::new(0, 0);
        ck.add_group("g", &GruLayerParams::zeros(1, 1, 1));
        let mut buf = Vec::new();
        ck.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(Checkpoint::read_from(&mut std::io::Cursor::new(&buf)).is_err());
    }
}
