//! Model file: one header line `sensiloop-model <version> <sha256>` followed by
//! a JSON body. The digest covers every byte after the header line.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::TrainedModel;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "sensiloop-model";

#[derive(serde::Serialize, serde::Deserialize)]
struct Body {
    format_version: u32,
    model: TrainedModel,
}

pub fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let body = serde_json::to_vec(&Body { format_version: FORMAT_VERSION, model: model.clone() })?;
    let digest = hex::encode(Sha256::digest(&body));
    let mut out = format!("{MAGIC} {FORMAT_VERSION} {digest}\n").into_bytes();
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| Error::Format("missing header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::Format("header is not text".into()))?;
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(Error::Format("not a model file".into()));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("missing format version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, supported: FORMAT_VERSION });
    }
    let digest = parts.next().ok_or_else(|| Error::Format("missing checksum".into()))?;
    let body = &bytes[nl + 1..];
    if hex::encode(Sha256::digest(body)) != digest {
        return Err(Error::Checksum);
    }
    let parsed: Body = serde_json::from_slice(body).map_err(|e| Error::Format(e.to_string()))?;
    if parsed.format_version != version {
        return Err(Error::Format("header and body versions differ".into()));
    }
    let m = parsed.model;
    if m.fingerprint.inputs.is_empty() || m.fingerprint.outputs.is_empty() {
        return Err(Error::Format("fingerprint absent".into()));
    }
    Ok(m)
}

pub fn save(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
    from_bytes(&fs::read(path)?)
}
