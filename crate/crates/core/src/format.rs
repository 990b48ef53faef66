//! Shared container layout for codebooks, checkpoints and feature files.
//!
//! Every file starts with a UTF-8 text header: a magic line `<magic> <version>`,
//! then `key value...` lines, terminated by the line `payload f32le`. What
//! follows is raw little-endian `f32` data whose length the header determines.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

pub const PAYLOAD_MARKER: &str = "payload f32le";

#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub magic: String,
    pub version: u32,
    pub entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(magic: &str, version: u32) -> Self {
        Header { magic: magic.to_string(), version, entries: Vec::new() }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::format(format!("{} header is missing `{key}`", self.magic)))
    }

    pub fn parse_usize(&self, key: &str) -> Result<usize> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| Error::format(format!("`{key}` is not an integer: {raw:?}")))
    }

    pub fn parse_u64(&self, key: &str) -> Result<u64> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| Error::format(format!("`{key}` is not an integer: {raw:?}")))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.magic, self.version)?;
        for (k, v) in &self.entries {
            debug_assert!(!k.contains(char::is_whitespace));
            debug_assert!(!v.contains('\n'));
            writeln!(w, "{k} {v}")?;
        }
        writeln!(w, "{PAYLOAD_MARKER}")?;
        Ok(())
    }

    /// Reads a header and checks its magic; versions newer than `max_version`
    /// are rejected.
    pub fn read_from<R: BufRead>(r: &mut R, magic: &str, max_version: u32) -> Result<Header> {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::format("file is empty"));
        }
        let mut first = line.trim_end().splitn(2, ' ');
        let found = first.next().unwrap_or_default();
        if found != magic {
            return Err(Error::format(format!("expected a {magic} file, found {found:?}")));
        }
        let version: u32 = first.next().and_then(|v| v.parse().ok()).ok_or_else(|| Error::format("missing or malformed version"))?;
        if version == 0 || version > max_version {
            return Err(Error::format(format!("unsupported {magic} version {version}")));
        }
        let mut header = Header::new(magic, version);
        loop {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::format("header ended before the payload marker"));
            }
            let text = line.trim_end_matches(['\n', '\r']);
            if text == PAYLOAD_MARKER {
                return Ok(header);
            }
            let (k, v) = text.split_once(' ').unwrap_or((text, ""));
            header.entries.push((k.to_string(), v.to_string()));
        }
    }
}

pub fn write_f32_payload<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_f32_payload<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(format!("payload truncated: expected {count} floats"))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

/// Fails if anything remains after the declared payload.
pub fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::format("trailing bytes after payload")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn header_and_payload_roundtrip() {
        let mut h = Header::new("testfile", 1);
        h.push("count", 3);
        h.push("note", "two words");
        let mut buf = Vec::new();
        h.write_to(&mut buf).unwrap();
        write_f32_payload(&mut buf, [1.0, -2.5, 0.125]).unwrap();

        let mut cur = Cursor::new(buf);
        let back = Header::read_from(&mut cur, "testfile", 1).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.parse_usize("count").unwrap(), 3);
        let vals = read_f32_payload(&mut cur, 3).unwrap();
        assert_eq!(vals, vec![1.0, -2.5, 0.125]);
        expect_eof(&mut cur).unwrap();
    }

    #[test]
    fn rejects_wrong_magic_and_future_version() {
        let mut cur = Cursor::new(b"other 1\npayload f32le\n".to_vec());
        assert!(Header::read_from(&mut cur, "testfile", 1).is_err());
        let mut cur = Cursor::new(b"testfile 9\npayload f32le\n".to_vec());
        assert!(Header::read_from(&mut cur, "testfile", 1).is_err());
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut cur = Cursor::new(vec![0u8; 7]);
        assert!(matches!(read_f32_payload(&mut cur, 2), Err(Error::Format(_))));
    }
}
