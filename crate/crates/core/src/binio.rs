//! Little-endian byte writer/reader shared by the binary file formats.
//!
//! Every format is `magic | u32 version | body | u32 crc32`, where the CRC
//! covers all bytes before it.

use crate::error::FormatError;

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn with_header(magic: &[u8; 8], version: u32) -> Self {
        let mut w = ByteWriter::default();
        w.bytes(magic);
        w.u32(version);
        w
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32s(&mut self, v: &[f32]) {
        self.buf.reserve(v.len() * 4);
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    /// Appends the CRC32 trailer and returns the finished buffer.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct ByteReader<'a> {
    /// Body only, without the checksum trailer.
    buf: &'a [u8],
    trailer: [u8; 4],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    /// Validates magic and version, returning a reader positioned just after
    /// the version field and bounded before the checksum trailer. The
    /// checksum itself is verified by [`ByteReader::finish`], after parsing,
    /// so a short file reports truncation rather than a bad checksum.
    pub fn open(
        buf: &'a [u8],
        magic: &[u8; 8],
        kind: &'static str,
        version: u32,
    ) -> Result<Self, FormatError> {
        if buf.len() < magic.len() || &buf[..magic.len()] != magic {
            return Err(FormatError::BadMagic {
                expected: kind,
                found: buf[..buf.len().min(magic.len())].to_vec(),
            });
        }
        let min = magic.len() + 4 + 4;
        if buf.len() < min {
            return Err(FormatError::Truncated {
                offset: 0,
                needed: min,
                len: buf.len(),
            });
        }
        let body_end = buf.len() - 4;
        let mut r = ByteReader {
            buf: &buf[..body_end],
            trailer: buf[body_end..].try_into().expect("4 bytes"),
            pos: magic.len(),
        };
        let found = r.u32()?;
        if found != version {
            return Err(FormatError::UnsupportedVersion {
                found,
                supported: version,
            });
        }
        Ok(r)
    }

    /// Bytes left in the body.
    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Requires the body to be fully consumed, then checks the CRC trailer.
    pub fn finish(self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::Malformed(format!(
                "{} trailing bytes before checksum",
                self.buf.len() - self.pos
            )));
        }
        let stored = u32::from_le_bytes(self.trailer);
        let computed = crc32fast::hash(self.buf);
        if stored != computed {
            return Err(FormatError::ChecksumMismatch { stored, computed });
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                len: self.buf.len(),
            }),
        }
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32s(&mut self, count: usize) -> Result<Vec<f32>, FormatError> {
        let bytes = count
            .checked_mul(4)
            .ok_or_else(|| FormatError::Malformed(format!("element count {count} overflows")))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
