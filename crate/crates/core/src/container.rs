//! Versioned, checksummed document container.
//!
//! Every file the pipeline writes (statistics snapshots, probe reports,
//! dispatch plans) shares one layout:
//!
//! ```text
//! offset 0   magic  b"QPDOC\0"                 (6 bytes)
//! offset 6   format_version u32 LE             (currently 1)
//! offset 10  header_len u64 LE
//!            header: UTF-8 JSON with a "kind" field
//!            payload_len u64 LE
//!            payload: kind-specific bytes
//! trailer    SHA-256 over all preceding bytes  (32 bytes)
//! ```
//!
//! Readers check, in order: magic, format version, checksum, then parse.
//! A version mismatch is reported as such even when the checksum would also
//! fail; any truncation, bad magic or checksum mismatch is a corrupt
//! document.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"QPDOC\0";
pub const FORMAT_VERSION: u32 = 1;

/// A parsed container.
#[derive(Debug, Clone)]
pub struct Document {
    pub kind: String,
    pub header: serde_json::Value,
    pub payload: Vec<u8>,
    /// Hex of the embedded SHA-256; doubles as the document's identity for
    /// provenance tracking.
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializes a container to bytes.
pub fn to_bytes(kind: &str, header: &serde_json::Value, payload: &[u8]) -> Result<Vec<u8>> {
    let mut header = header.clone();
    match &mut header {
        serde_json::Value::Object(map) => {
            map.insert("kind".into(), serde_json::Value::String(kind.into()));
        }
        _ => {
            return Err(Error::CorruptSnapshot(
                "container header must be a JSON object".into(),
            ))
        }
    }
    let header_bytes = serde_json::to_vec(&header)
        .map_err(|e| Error::CorruptSnapshot(format!("header serialization: {e}")))?;

    let mut out = Vec::with_capacity(6 + 4 + 16 + header_bytes.len() + payload.len() + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

/// Parses a container from bytes.
pub fn from_bytes(bytes: &[u8]) -> Result<Document> {
    let corrupt = |msg: &str| Error::CorruptSnapshot(msg.to_string());
    if bytes.len() < 6 + 4 {
        return Err(corrupt("truncated: missing magic/version"));
    }
    if &bytes[..6] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersionMismatch {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    if bytes.len() < 10 + 8 + 8 + 32 {
        return Err(corrupt("truncated: too short for lengths and checksum"));
    }
    let body_len = bytes.len() - 32;
    let (body, checksum) = bytes.split_at(body_len);
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(corrupt("checksum mismatch"));
    }

    let mut pos = 10usize;
    let header_len = u64::from_le_bytes(body[pos..pos + 8].try_into().unwrap()) as usize;
    pos += 8;
    if pos + header_len + 8 > body_len {
        return Err(corrupt("truncated header"));
    }
    let header: serde_json::Value = serde_json::from_slice(&body[pos..pos + header_len])
        .map_err(|e| corrupt(&format!("header parse: {e}")))?;
    pos += header_len;
    let payload_len = u64::from_le_bytes(body[pos..pos + 8].try_into().unwrap()) as usize;
    pos += 8;
    if pos + payload_len != body_len {
        return Err(corrupt("payload length mismatch"));
    }
    let payload = body[pos..pos + payload_len].to_vec();
    let kind = header
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| corrupt("header missing kind"))?
        .to_string();

    Ok(Document {
        kind,
        header,
        payload,
        sha256: sha256_hex(checksum),
    })
}

pub fn write_file(path: &Path, kind: &str, header: &serde_json::Value, payload: &[u8]) -> Result<()> {
    let bytes = to_bytes(kind, header, payload)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<Document> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}

/// Writes a document whose payload is the JSON serialization of `value`.
pub fn write_json_document<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let payload = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::CorruptSnapshot(format!("payload serialization: {e}")))?;
    write_file(path, kind, &serde_json::json!({}), &payload)
}

/// Reads a JSON-payload document, checking the expected kind.
pub fn read_json_document<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<(T, String)> {
    let doc = read_file(path)?;
    if doc.kind != kind {
        return Err(Error::CorruptSnapshot(format!(
            "expected kind {kind:?}, found {:?}",
            doc.kind
        )));
    }
    let value = serde_json::from_slice(&doc.payload)
        .map_err(|e| Error::MalformedReport(format!("payload parse: {e}")))?;
    Ok((value, doc.sha256))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_everything() {
        let header = serde_json::json!({"dims": [2, 3], "n": 7});
        let payload = vec![1u8, 2, 3, 255, 0, 128];
        let bytes = to_bytes("test_doc", &header, &payload).unwrap();
        let doc = from_bytes(&bytes).unwrap();
        assert_eq!(doc.kind, "test_doc");
        assert_eq!(doc.payload, payload);
        assert_eq!(doc.header.get("n").unwrap().as_u64(), Some(7));
    }

    #[test]
    fn altered_version_is_version_mismatch() {
        let bytes = to_bytes("t", &serde_json::json!({}), b"x").unwrap();
        let mut tampered = bytes.clone();
        tampered[6] = 99;
        assert!(matches!(
            from_bytes(&tampered),
            Err(Error::FormatVersionMismatch {
                expected: 1,
                found: 99
            })
        ));
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = to_bytes("t", &serde_json::json!({}), b"payload").unwrap();
        for cut in [3, 12, bytes.len() - 5] {
            assert!(matches!(
                from_bytes(&bytes[..cut]),
                Err(Error::CorruptSnapshot(_))
            ));
        }
    }

    #[test]
    fn bitflip_is_corrupt() {
        let bytes = to_bytes("t", &serde_json::json!({}), b"payload-data").unwrap();
        let mut tampered = bytes.clone();
        let mid = bytes.len() / 2;
        tampered[mid] ^= 0x40;
        assert!(matches!(
            from_bytes(&tampered),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let mut bytes = to_bytes("t", &serde_json::json!({}), b"x").unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            from_bytes(&bytes),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn identical_content_identical_bytes() {
        let header = serde_json::json!({"a": 1});
        let b1 = to_bytes("t", &header, b"abc").unwrap();
        let b2 = to_bytes("t", &header, b"abc").unwrap();
        assert_eq!(b1, b2);
    }
}
