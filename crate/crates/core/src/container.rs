//! Binary container shared by every on-disk artifact.
//!
//! Layout: 8-byte ASCII magic, `u32` little-endian header length, a UTF-8
//! JSON header of that length, then the payload as little-endian floats.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MAGIC_LEN: usize = 8;

/// Headers larger than this are rejected before any allocation.
pub const MAX_HEADER_LEN: usize = 16 << 20;

pub fn encode<H: Serialize>(magic: &[u8; MAGIC_LEN], header: &H, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    let mut out = Vec::with_capacity(MAGIC_LEN + 4 + json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Splits a container into its parsed header and raw payload bytes.
pub fn decode<'a, H: DeserializeOwned>(magic: &[u8; MAGIC_LEN], bytes: &'a [u8]) -> Result<(H, &'a [u8])> {
    if bytes.len() < MAGIC_LEN + 4 {
        return Err(Error::Format(format!("truncated: {} bytes", bytes.len())));
    }
    if &bytes[..MAGIC_LEN] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..MAGIC_LEN]),
            String::from_utf8_lossy(magic)
        )));
    }
    let len = u32::from_le_bytes(bytes[MAGIC_LEN..MAGIC_LEN + 4].try_into().unwrap()) as usize;
    if len > MAX_HEADER_LEN {
        return Err(Error::Format(format!("header length {len} exceeds limit")));
    }
    let start = MAGIC_LEN + 4;
    let end = start
        .checked_add(len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format(format!("header length {len} runs past end of data")))?;
    let header = serde_json::from_slice(&bytes[start..end])?;
    Ok((header, &bytes[end..]))
}

pub fn f32_payload(values: impl IntoIterator<Item = f32>) -> Vec<u8> {
    values.into_iter().flat_map(f32::to_le_bytes).collect()
}

pub fn f64_payload(values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    values.into_iter().flat_map(f64::to_le_bytes).collect()
}

/// Reads exactly `count` f32 values; any trailing or missing bytes are an error.
pub fn read_f32s(payload: &[u8], count: usize) -> Result<Vec<f32>> {
    let expected = count
        .checked_mul(4)
        .ok_or_else(|| Error::Format("element count overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_f64s(payload: &[u8], count: usize) -> Result<Vec<f64>> {
    let expected = count
        .checked_mul(8)
        .ok_or_else(|| Error::Format("element count overflows".into()))?;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// `a * b * c` with overflow reported as a format error.
pub fn checked_volume(dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| Error::Format(format!("dimensions {dims:?} overflow")))
    })
}
