//! Append-only file of entropy results keyed by parameter, depth and
//! precision.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::entropy::{EntropyMethod, EntropyResult};
use crate::error::Result;

pub(crate) const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "entroscope-cache";
const RECORD_LEN: usize = 56;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) struct CacheKey {
    pub a_bits: u64,
    pub depth: u32,
    pub precision: u32,
}

impl CacheKey {
    pub fn new(a: f64, depth: usize, precision: usize) -> Self {
        CacheKey {
            a_bits: a.to_bits(),
            depth: depth as u32,
            precision: precision as u32,
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn encode(key: &CacheKey, r: &EntropyResult) -> [u8; RECORD_LEN] {
    let mut buf = [0u8; RECORD_LEN];
    buf[0..8].copy_from_slice(&key.a_bits.to_le_bytes());
    buf[8..12].copy_from_slice(&key.depth.to_le_bytes());
    buf[12..16].copy_from_slice(&key.precision.to_le_bytes());
    buf[16..24].copy_from_slice(&r.value.to_bits().to_le_bytes());
    buf[24..32].copy_from_slice(&r.value_lo.to_bits().to_le_bytes());
    buf[32..40].copy_from_slice(&r.error_radius.to_bits().to_le_bytes());
    buf[40..44].copy_from_slice(&r.renorm_depth.to_le_bytes());
    let flags = u32::from(r.no_root) | u32::from(r.superattracting) << 1;
    buf[44..48].copy_from_slice(&flags.to_le_bytes());
    let sum = fnv1a(&buf[..48]);
    buf[48..56].copy_from_slice(&sum.to_le_bytes());
    buf
}

fn decode(buf: &[u8; RECORD_LEN]) -> Option<(CacheKey, EntropyResult)> {
    let u64_at = |i: usize| u64::from_le_bytes(buf[i..i + 8].try_into().expect("8 bytes"));
    let u32_at = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().expect("4 bytes"));
    if u64_at(48) != fnv1a(&buf[..48]) {
        return None;
    }
    let key = CacheKey {
        a_bits: u64_at(0),
        depth: u32_at(8),
        precision: u32_at(12),
    };
    let flags = u32_at(44);
    let r = EntropyResult {
        value: f64::from_bits(u64_at(16)),
        value_lo: f64::from_bits(u64_at(24)),
        error_radius: f64::from_bits(u64_at(32)),
        method: EntropyMethod::KneadBisect,
        renorm_depth: u32_at(40),
        no_root: flags & 1 != 0,
        superattracting: flags & 2 != 0,
    };
    Some((key, r))
}

fn header(precision: usize) -> String {
    format!("{MAGIC} schema={SCHEMA_VERSION} record={RECORD_LEN} precision={precision}\n")
}

fn parse_version(line: &str) -> Option<u32> {
    let mut parts = line.split_whitespace();
    if parts.next()? != MAGIC {
        return None;
    }
    parts
        .find_map(|p| p.strip_prefix("schema="))
        .and_then(|v| v.parse().ok())
}

pub(crate) struct EntropyCache {
    path: PathBuf,
    entries: HashMap<CacheKey, EntropyResult>,
    /// The file belongs to another schema and is left untouched.
    disabled: bool,
    pub warnings: Vec<String>,
}

impl EntropyCache {
    /// Load the cache, creating the file when absent.
    pub fn open(path: &Path, precision: usize) -> Result<Self> {
        let mut cache = EntropyCache {
            path: path.to_path_buf(),
            entries: HashMap::new(),
            disabled: false,
            warnings: Vec::new(),
        };
        if !path.exists() {
            let mut f = File::create(path)?;
            f.write_all(header(precision).as_bytes())?;
            return Ok(cache);
        }
        let mut reader = BufReader::new(File::open(path)?);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        match parse_version(&first) {
            Some(SCHEMA_VERSION) => {}
            other => {
                cache.warnings.push(format!(
                    "cache {} has schema {:?}, expected {SCHEMA_VERSION}; ignoring it",
                    path.display(),
                    other
                ));
                cache.disabled = true;
                return Ok(cache);
            }
        }
        let mut rest = Vec::new();
        reader.read_to_end(&mut rest)?;
        let mut bad = 0;
        for chunk in rest.chunks(RECORD_LEN) {
            let Ok(buf) = <&[u8; RECORD_LEN]>::try_from(chunk) else {
                bad += 1;
                continue;
            };
            match decode(buf) {
                Some((k, r)) => {
                    cache.entries.insert(k, r);
                }
                None => bad += 1,
            }
        }
        if bad > 0 {
            cache.warnings.push(format!("skipped {bad} corrupt cache records"));
        }
        Ok(cache)
    }

    pub fn get(&self, key: &CacheKey) -> Option<EntropyResult> {
        self.entries.get(key).copied()
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Append new results in the given order.
    pub fn append(&mut self, items: &[(CacheKey, EntropyResult)]) -> Result<()> {
        if self.disabled || items.is_empty() {
            return Ok(());
        }
        let mut f = OpenOptions::new().append(true).open(&self.path)?;
        let mut buf = Vec::with_capacity(items.len() * RECORD_LEN);
        for (k, r) in items {
            if self.entries.insert(*k, *r).is_none() {
                buf.extend_from_slice(&encode(k, r));
            }
        }
        f.write_all(&buf)?;
        Ok(())
    }
}
