//! On-disk layout of a component fit: `fit.json` (everything but the draws),
//! `draws.bin` and `diagnostics.json`.
//!
//! `draws.bin` is a little-endian `u32` header length, a JSON header, then
//! the draws as row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PosteriorFit;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct DrawsHeader {
    rows: usize,
    cols: usize,
    chains: usize,
    names: Vec<String>,
}

pub(crate) fn save(fit: &PosteriorFit, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("fit.json"), serde_json::to_vec_pretty(fit)?)?;
    fs::write(dir.join("diagnostics.json"), serde_json::to_vec_pretty(&fit.diagnostics)?)?;
    let header = serde_json::to_vec(&DrawsHeader {
        rows: fit.num_draws(),
        cols: fit.dim(),
        chains: fit.chains,
        names: fit.layout.names(),
    })?;
    let mut bytes = Vec::with_capacity(4 + header.len() + 8 * fit.draws.len());
    bytes.extend_from_slice(&(header.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&header);
    for v in &fit.draws {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join("draws.bin"), bytes)?;
    Ok(())
}

pub(crate) fn load(dir: &Path) -> Result<PosteriorFit> {
    let mut fit: PosteriorFit = serde_json::from_slice(&fs::read(dir.join("fit.json"))?)?;
    let bytes = fs::read(dir.join("draws.bin"))?;
    let bad = |m: &str| Error::Config(format!("{}: {m}", dir.join("draws.bin").display()));
    if bytes.len() < 4 {
        return Err(bad("truncated header"));
    }
    let hlen = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    let body_start = 4 + hlen;
    if bytes.len() < body_start {
        return Err(bad("truncated header"));
    }
    let header: DrawsHeader = serde_json::from_slice(&bytes[4..body_start])?;
    if header.cols != fit.dim() || header.rows != fit.num_draws() {
        return Err(bad("shape does not match fit.json"));
    }
    let body = &bytes[body_start..];
    if body.len() != 8 * header.rows * header.cols {
        return Err(bad("unexpected body length"));
    }
    fit.draws = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(fit)
}
