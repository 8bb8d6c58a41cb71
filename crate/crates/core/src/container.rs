//! Version-tagged binary container: a JSON header followed by flat
//! little-endian arrays.
//!
//! Layout: 8-byte magic, `u32` version, `u64` header length, header JSON,
//! then each blob back to back in header order. The header lists every
//! blob's name, element type and element count.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    U32,
    U64,
    F64,
}

impl Dtype {
    fn width(self) -> usize {
        match self {
            Dtype::U32 => 4,
            Dtype::U64 | Dtype::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobInfo {
    pub name: String,
    pub dtype: Dtype,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlobData {
    U32(Vec<u32>),
    U64(Vec<u64>),
    F64(Vec<f64>),
}

impl BlobData {
    fn dtype(&self) -> Dtype {
        match self {
            BlobData::U32(_) => Dtype::U32,
            BlobData::U64(_) => Dtype::U64,
            BlobData::F64(_) => Dtype::F64,
        }
    }

    fn len(&self) -> usize {
        match self {
            BlobData::U32(v) => v.len(),
            BlobData::U64(v) => v.len(),
            BlobData::F64(v) => v.len(),
        }
    }

    pub fn into_u32(self) -> Result<Vec<u32>> {
        match self {
            BlobData::U32(v) => Ok(v),
            other => Err(Error::Format(format!(
                "expected u32 blob, found {:?}",
                other.dtype()
            ))),
        }
    }

    pub fn into_u64(self) -> Result<Vec<u64>> {
        match self {
            BlobData::U64(v) => Ok(v),
            other => Err(Error::Format(format!(
                "expected u64 blob, found {:?}",
                other.dtype()
            ))),
        }
    }

    pub fn into_f64(self) -> Result<Vec<f64>> {
        match self {
            BlobData::F64(v) => Ok(v),
            other => Err(Error::Format(format!(
                "expected f64 blob, found {:?}",
                other.dtype()
            ))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope<H> {
    header: H,
    blobs: Vec<BlobInfo>,
}

pub fn encode<H: Serialize>(
    magic: &[u8; 8],
    version: u32,
    header: &H,
    blobs: &[(String, BlobData)],
) -> Result<Vec<u8>> {
    let envelope = Envelope {
        header,
        blobs: blobs
            .iter()
            .map(|(name, data)| BlobInfo {
                name: name.clone(),
                dtype: data.dtype(),
                len: data.len(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&envelope)?;
    let mut out = Vec::with_capacity(20 + json.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, data) in blobs {
        match data {
            BlobData::U32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            BlobData::U64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            BlobData::F64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    Ok(out)
}

pub struct Decoded<H> {
    pub version: u32,
    pub header: H,
    pub blobs: Blobs,
}

pub struct Blobs(Vec<(BlobInfo, BlobData)>);

impl Blobs {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(i, _)| i.name.as_str())
    }

    /// Removes and returns the blob called `name`.
    pub fn take(&mut self, name: &str) -> Result<BlobData> {
        let pos = self
            .0
            .iter()
            .position(|(info, _)| info.name == name)
            .ok_or_else(|| Error::Format(format!("missing blob `{name}`")))?;
        Ok(self.0.remove(pos).1)
    }
}

pub fn decode<H: DeserializeOwned>(
    magic: &[u8; 8],
    supported_version: u32,
    bytes: &[u8],
) -> Result<Decoded<H>> {
    if bytes.len() < 20 || &bytes[..8] != magic {
        return Err(Error::Format(format!(
            "not a {} file",
            String::from_utf8_lossy(magic).trim_end_matches('\0')
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != supported_version {
        return Err(Error::Format(format!(
            "unsupported version {version} (expected {supported_version})"
        )));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < header_len {
        return Err(Error::Format("truncated header".into()));
    }
    let envelope: Envelope<H> = serde_json::from_slice(&body[..header_len])?;
    let mut cursor = header_len;
    let mut blobs = Vec::with_capacity(envelope.blobs.len());
    for info in envelope.blobs {
        let nbytes = info
            .len
            .checked_mul(info.dtype.width())
            .ok_or_else(|| Error::Format("blob size overflow".into()))?;
        let raw = body
            .get(cursor..cursor + nbytes)
            .ok_or_else(|| Error::Format(format!("truncated blob `{}`", info.name)))?;
        cursor += nbytes;
        let data = match info.dtype {
            Dtype::U32 => BlobData::U32(
                raw.chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
            ),
            Dtype::U64 => BlobData::U64(
                raw.chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            ),
            Dtype::F64 => BlobData::F64(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            ),
        };
        blobs.push((info, data));
    }
    if cursor != body.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last blob",
            body.len() - cursor
        )));
    }
    Ok(Decoded {
        version,
        header: envelope.header,
        blobs: Blobs(blobs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"TESTFILE";

    #[test]
    fn roundtrip_and_rejections() {
        let blobs = vec![
            ("a".to_string(), BlobData::U32(vec![1, 2, 3])),
            ("b".to_string(), BlobData::F64(vec![0.5, -1.25])),
        ];
        let bytes = encode(MAGIC, 1, &"hello", &blobs).unwrap();
        let Decoded {
            header, mut blobs, ..
        } = decode::<String>(MAGIC, 1, &bytes).unwrap();
        assert_eq!(header, "hello");
        let d = &mut blobs;
        assert_eq!(d.take("b").unwrap().into_f64().unwrap(), vec![0.5, -1.25]);
        assert_eq!(d.take("a").unwrap().into_u32().unwrap(), vec![1, 2, 3]);
        assert!(d.take("a").is_err());

        assert!(decode::<String>(b"OTHERFIL", 1, &bytes).is_err());
        assert!(decode::<String>(MAGIC, 2, &bytes).is_err());
        assert!(decode::<String>(MAGIC, 1, &bytes[..bytes.len() - 1]).is_err());
    }
}
