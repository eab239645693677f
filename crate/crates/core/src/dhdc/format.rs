//! RDF1 frame files.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RDF1"
//!      4     4  version (u32 LE)
//!      8     4  rows (u32 LE)
//!     12     4  cols (u32 LE)
//!     16     1  dtype code (1 = complex, interleaved f32 re/im)
//!     17     1  domain tag (0 IFS, 1 RDM, 2 PROB_MAP)
//!     18     1  mode tag (0 MM, 1 NTM, 255 none)
//!     19     1  flags (bit 0: mask present)
//!     20     4  frame index (u32 LE)
//!     24    36  reserved, zero
//!     60     4  CRC-32 of bytes 0..60
//!     64     .  rows*cols*8 bytes of samples, row-major
//!      .     .  ceil(rows*cols/8) bytes of packed mask bits (LSB first), if flagged
//!      .     4  CRC-32 of everything before it
//! ```

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::{DataMode, Mask};
use crate::error::{Error, Result};
use crate::numerics::{ComplexFrame, DomainTag};

pub const RDF_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"RDF1";
const HEADER_LEN: usize = 64;
const DTYPE_C32: u8 = 1;
const NO_MODE: u8 = 255;

/// Contents of one RDF1 file.
#[derive(Clone, Debug, PartialEq)]
pub struct RdfFrame {
    pub frame: ComplexFrame,
    pub mask: Option<Mask>,
    pub mode: Option<DataMode>,
    pub index: u32,
}

fn mask_bytes(cells: usize) -> usize {
    cells.div_ceil(8)
}

pub fn write_frame_bytes(f: &RdfFrame) -> Result<Vec<u8>> {
    let (rows, cols) = f.frame.shape();
    if let Some(m) = &f.mask {
        if m.shape() != (rows, cols) {
            return Err(Error::Dimension("mask shape differs from frame".into()));
        }
    }
    let cells = rows * cols;
    let mut out = Vec::with_capacity(HEADER_LEN + cells * 8 + mask_bytes(cells) + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&RDF_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.push(DTYPE_C32);
    out.push(f.frame.tag().code());
    out.push(f.mode.map_or(NO_MODE, DataMode::code));
    out.push(u8::from(f.mask.is_some()));
    out.extend_from_slice(&f.index.to_le_bytes());
    out.resize(60, 0);
    let hcrc = crc32fast::hash(&out);
    out.extend_from_slice(&hcrc.to_le_bytes());
    for z in f.frame.data() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    if let Some(m) = &f.mask {
        let mut packed = vec![0u8; mask_bytes(cells)];
        for (i, &b) in m.bits().iter().enumerate() {
            if b {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes([b[off], b[off + 1], b[off + 2], b[off + 3]])
}

/// Parse an RDF1 image. `frame` names the dataset index in checksum errors.
pub fn read_frame_bytes(bytes: &[u8], path: &Path, frame: usize) -> Result<RdfFrame> {
    let fmt = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if crc32fast::hash(&bytes[..60]) != u32_at(bytes, 60) {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            frame,
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(fmt("bad magic".into()));
    }
    let version = u32_at(bytes, 4);
    if version != RDF_VERSION {
        return Err(Error::VersionMismatch {
            path: path.to_path_buf(),
            found: version,
            expected: RDF_VERSION,
        });
    }
    let rows = u32_at(bytes, 8) as usize;
    let cols = u32_at(bytes, 12) as usize;
    if bytes[16] != DTYPE_C32 {
        return Err(fmt(format!("unknown dtype code {}", bytes[16])));
    }
    let tag = DomainTag::from_code(bytes[17]).ok_or_else(|| fmt(format!("unknown domain tag {}", bytes[17])))?;
    let mode = match bytes[18] {
        NO_MODE => None,
        c => Some(DataMode::from_code(c).ok_or_else(|| fmt(format!("unknown mode tag {c}")))?),
    };
    let has_mask = bytes[19] & 1 == 1;
    let index = u32_at(bytes, 20);
    let cells = rows * cols;
    let body = cells * 8 + if has_mask { mask_bytes(cells) } else { 0 };
    let expected = HEADER_LEN + body + 4;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(fmt(format!("{} trailing bytes", bytes.len() - expected)));
    }
    if crc32fast::hash(&bytes[..expected - 4]) != u32_at(bytes, expected - 4) {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            frame,
        });
    }
    let mut data = Vec::with_capacity(cells);
    let samples = &bytes[HEADER_LEN..HEADER_LEN + cells * 8];
    for chunk in samples.chunks_exact(8) {
        let re = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        let im = f32::from_le_bytes([chunk[4], chunk[5], chunk[6], chunk[7]]);
        data.push(Complex64::new(re as f64, im as f64));
    }
    let frame_data = ComplexFrame::from_vec(rows, cols, data, tag)?;
    let mask = if has_mask {
        let packed = &bytes[HEADER_LEN + cells * 8..expected - 4];
        let bits = (0..cells).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
        Some(Mask::from_bits(rows, cols, bits)?)
    } else {
        None
    };
    Ok(RdfFrame {
        frame: frame_data,
        mask,
        mode,
        index,
    })
}

pub fn write_frame_file(path: &Path, f: &RdfFrame) -> Result<()> {
    let bytes = write_frame_bytes(f)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_frame_file(path: &Path, frame: usize) -> Result<RdfFrame> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_frame_bytes(&bytes, path, frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RdfFrame {
        let frame = ComplexFrame::from_fn(3, 5, DomainTag::Rdm, |r, c| Complex64::new(r as f64 - 0.5, c as f64 * 0.25));
        let mut mask = Mask::new(3, 5);
        mask.set(1, 4, true);
        mask.set(2, 0, true);
        RdfFrame {
            frame,
            mask: Some(mask),
            mode: Some(DataMode::Ntm),
            index: 7,
        }
    }

    #[test]
    fn round_trip() {
        let f = sample();
        let bytes = write_frame_bytes(&f).unwrap();
        assert_eq!(bytes.len(), 64 + 15 * 8 + 2 + 4);
        let back = read_frame_bytes(&bytes, Path::new("x"), 7).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn header_fields() {
        let bytes = write_frame_bytes(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"RDF1");
        assert_eq!(u32_at(&bytes, 8), 3);
        assert_eq!(u32_at(&bytes, 12), 5);
        assert_eq!(bytes[17], 1);
        assert_eq!(bytes[18], 1);
        assert!(bytes[24..60].iter().all(|&b| b == 0));
    }

    #[test]
    fn distinct_errors() {
        let bytes = write_frame_bytes(&sample()).unwrap();
        let p = Path::new("f.rdf");

        let err = read_frame_bytes(&bytes[..bytes.len() - 9], p, 3).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }), "{err}");

        let mut bad = bytes.clone();
        bad[70] ^= 0x10;
        let err = read_frame_bytes(&bad, p, 3).unwrap_err();
        assert!(matches!(err, Error::Checksum { frame: 3, .. }), "{err}");

        let mut v2 = bytes.clone();
        v2[4] = 2;
        let hcrc = crc32fast::hash(&v2[..60]);
        v2[60..64].copy_from_slice(&hcrc.to_le_bytes());
        let err = read_frame_bytes(&v2, p, 3).unwrap_err();
        assert!(matches!(err, Error::VersionMismatch { found: 2, .. }), "{err}");

        let mut hdr = bytes.clone();
        hdr[9] ^= 1;
        let err = read_frame_bytes(&hdr, p, 3).unwrap_err();
        assert!(matches!(err, Error::Checksum { .. }), "{err}");
    }
}
