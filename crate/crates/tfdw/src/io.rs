//! Artifact plumbing shared by the library and the command line: atomic
//! file writes, configuration hashing, and the on-disk state format.
//!
//! Every artifact carries the hash of the configuration that produced it,
//! and consumers compare hashes before combining files. That is a cheap,
//! mechanical guard against the classic sweep accident: mixing curve
//! points computed on different grids or at different couplings.

use crate::cartesian::{BoxGridSpec, Field3};
use crate::error::{Error, Result};
use crate::radial::RadialGridSpec;
use crate::State;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write as _;
use std::path::Path;

/// Schema tag stamped into every state file.
pub const STATE_FORMAT: &str = "tfdw-state-v1";

/// Marker for the packed box payload: little-endian f64, base64 text.
pub const BOX_ENCODING: &str = "base64/f64-le";

/// Writes bytes through a temporary file in the destination directory and
/// renames it into place, so a crash mid-write never leaves a truncated
/// artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Twelve hex characters of the SHA-256 of the value's JSON encoding.
///
/// Struct fields serialize in declaration order and none of the hashed
/// types contain maps, so the digest is deterministic for a given
/// configuration.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(12);
    for b in &digest[..6] {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}

/// On-disk representation of a [`State`], tagged with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    /// Always [`STATE_FORMAT`]; rejected otherwise on load.
    pub format: String,
    /// Hash of the configuration that produced this state.
    pub config_hash: String,
    pub state: StateRepr,
}

/// The two grid representations a state file can hold.
///
/// Radial values stay human-readable JSON numbers; a box field at n = 64
/// holds 262144 cells, so its values are packed as little-endian f64 and
/// base64-encoded instead. Cell order is `(ix * n + iy) * n + iz`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateRepr {
    Radial {
        grid: RadialGridSpec,
        values: Vec<f64>,
    },
    Box3 {
        grid: BoxGridSpec,
        encoding: String,
        values: String,
    },
}

fn pack_f64(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    BASE64.encode(bytes)
}

fn unpack_f64(text: &str) -> Result<Vec<f64>> {
    let bytes = BASE64
        .decode(text)
        .map_err(|e| Error::Config(format!("state payload is not valid base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Config(format!(
            "state payload holds {} bytes, not a whole number of f64",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn encode_state(state: &State) -> StateRepr {
    match state {
        State::Radial(u) => StateRepr::Radial {
            grid: u.grid().spec().clone(),
            values: u.values().to_vec(),
        },
        State::Box3(f) => StateRepr::Box3 {
            grid: f.grid().spec(),
            encoding: BOX_ENCODING.to_string(),
            values: pack_f64(f.values()),
        },
    }
}

fn decode_state(repr: StateRepr) -> Result<State> {
    match repr {
        StateRepr::Radial { grid, values } => {
            let grid = grid.build()?;
            Ok(State::Radial(crate::radial::RadialFunction::new(
                grid, values,
            )?))
        }
        StateRepr::Box3 {
            grid,
            encoding,
            values,
        } => {
            if encoding != BOX_ENCODING {
                return Err(Error::Config(format!(
                    "unsupported box encoding {encoding:?}, expected {BOX_ENCODING:?}"
                )));
            }
            let grid = grid.build()?;
            Ok(State::Box3(Field3::new(grid, unpack_f64(&values)?)?))
        }
    }
}

/// Saves a state with its configuration hash, atomically.
pub fn save_state(state: &State, config_hash: &str, path: &Path) -> Result<()> {
    let file = StateFile {
        format: STATE_FORMAT.to_string(),
        config_hash: config_hash.to_string(),
        state: encode_state(state),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// Loads a state file, returning the state and the configuration hash it
/// was stamped with.
pub fn load_state(path: &Path) -> Result<(State, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: StateFile = serde_json::from_str(&text)?;
    if file.format != STATE_FORMAT {
        return Err(Error::Config(format!(
            "{} has format tag {:?}, expected {STATE_FORMAT:?}",
            path.display(),
            file.format
        )));
    }
    Ok((decode_state(file.state)?, file.config_hash))
}
