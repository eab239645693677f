//! CKPT1 checkpoint files.
//!
//! Layout (little-endian): `b"CKPT1"`, u32 config length, the network
//! config as TOML, u64 parameter count, the parameters as f64, and a CRC-32
//! of everything before it.

use std::path::Path;

use super::model::{NetConfig, Network, NetworkParams};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"CKPT1";

pub fn checkpoint_bytes(cfg: &NetConfig, params: &NetworkParams) -> Result<Vec<u8>> {
    let net = Network::new(cfg)?;
    net.check_params(params)?;
    let text = toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::with_capacity(5 + 4 + text.len() + 8 + 8 * params.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for v in &params.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn parse_checkpoint(bytes: &[u8], path: &Path) -> Result<(NetConfig, NetworkParams)> {
    let format = |reason: &str| Error::Format {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 9 {
        return Err(truncated(9));
    }
    if &bytes[..5] != MAGIC {
        return Err(format("missing CKPT1 magic"));
    }
    let clen = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let head = 9 + clen + 8;
    if bytes.len() < head {
        return Err(truncated(head));
    }
    let n = u64::from_le_bytes(bytes[9 + clen..head].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(8)
        .and_then(|b| b.checked_add(head + 4))
        .ok_or_else(|| format("parameter count overflows"))?;
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(format("trailing bytes after checksum"));
    }
    let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
    if crc32fast::hash(&bytes[..expected - 4]) != stored {
        return Err(Error::Checksum {
            path: path.to_path_buf(),
            frame: 0,
        });
    }
    let text = std::str::from_utf8(&bytes[9..9 + clen]).map_err(|_| format("config is not UTF-8"))?;
    let cfg: NetConfig = toml::from_str(text).map_err(|e| format(&format!("bad config: {e}")))?;
    let net = Network::new(&cfg)?;
    if net.param_count() != n {
        return Err(format(&format!(
            "config implies {} parameters, file holds {n}",
            net.param_count()
        )));
    }
    let values = bytes[head..expected - 4]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        cfg,
        NetworkParams {
            values,
            registry: net.registry().to_vec(),
        },
    ))
}

pub fn write_checkpoint(path: &Path, cfg: &NetConfig, params: &NetworkParams) -> Result<()> {
    let bytes = checkpoint_bytes(cfg, params)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(NetConfig, NetworkParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&bytes, path)
}
