//! VAEB v1 binary embedding format.
//!
//! ```text
//! 0..4    b"VAEB"
//! 4..8    u32 LE version (1)
//! 8..12   u32 LE T
//! 12..16  u32 LE N
//! 16..20  u32 LE C
//! 20..24  f32 LE fps
//! then for each frame: C x f32 LE class embedding, N*C x f32 LE patch embeddings
//! ```

use std::fs;
use std::path::Path;

use super::{FrameEmbedding, FrameSequence};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"VAEB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;

/// Serializes a validated sequence into VAEB v1 bytes.
pub fn encode_sequence(seq: &FrameSequence) -> Result<Vec<u8>> {
    seq.validate()?;
    let to_u32 = |v: usize, name: &str| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("{name}={v} does not fit in u32")))
    };
    let t = to_u32(seq.frames.len(), "T")?;
    let n = to_u32(seq.num_patches, "N")?;
    let c = to_u32(seq.channels, "C")?;

    let per_frame = seq.channels * (1 + seq.num_patches);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * per_frame * seq.frames.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&c.to_le_bytes());
    out.extend_from_slice(&seq.fps.to_le_bytes());
    for frame in &seq.frames {
        for v in frame.class_embedding.iter().chain(&frame.patch_embeddings) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses VAEB v1 bytes. The video id is supplied by the caller since the format does not carry one.
pub fn decode_sequence(bytes: &[u8], video_id: &str) -> Result<FrameSequence> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic {
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(Error::Truncated {
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().unwrap() };
    if word(0) != MAGIC {
        return Err(Error::BadMagic { found: word(0) });
    }
    let version = u32::from_le_bytes(word(4));
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let t = u32::from_le_bytes(word(8)) as u64;
    let n = u32::from_le_bytes(word(12)) as u64;
    let c = u32::from_le_bytes(word(16)) as u64;
    let fps = f32::from_le_bytes(word(20));

    let expected = HEADER_LEN as u64 + t * c * (1 + n) * 4;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(Error::TrailingBytes { expected, actual });
    }

    let (t, n, c) = (t as usize, n as usize, c as usize);
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let mut frames = Vec::with_capacity(t);
    for idx in 0..t {
        let class_embedding: Vec<f32> = values.by_ref().take(c).collect();
        let patch_embeddings: Vec<f32> = values.by_ref().take(n * c).collect();
        if class_embedding
            .iter()
            .chain(&patch_embeddings)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite {
                what: format!("frame {idx}"),
            });
        }
        frames.push(FrameEmbedding {
            patch_embeddings,
            class_embedding,
        });
    }

    let seq = FrameSequence {
        video_id: video_id.to_string(),
        fps,
        num_patches: n,
        channels: c,
        frames,
    };
    seq.validate()?;
    Ok(seq)
}

/// Writes `seq` to `path`. Invariant violations are reported before the file is touched.
pub fn write_sequence(seq: &FrameSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_sequence(seq)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads a VAEB file. The returned `video_id` is the file stem.
pub fn read_sequence(path: impl AsRef<Path>) -> Result<FrameSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_sequence(&bytes, &id)
}
