//! Concurrent impulse-response cache with a binary on-disk form.

use super::rir::{compute_rir, RirConfig};
use super::{AcousticsError, ImpulseResponse};
use crate::world::{Scene, Vec2};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, RwLock};

/// Cache key: scene content hash, exact endpoint coordinates and render settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RirKey {
    pub scene: u64,
    pub source: (u64, u64),
    pub ear: (u64, u64),
    pub max_order: u32,
    pub length: u32,
    pub band: u32,
}

impl RirKey {
    pub fn new(scene_hash: u64, source: Vec2, ear: Vec2, cfg: &RirConfig) -> Self {
        Self {
            scene: scene_hash,
            source: (source.x.to_bits(), source.y.to_bits()),
            ear: (ear.x.to_bits(), ear.y.to_bits()),
            max_order: cfg.max_order as u32,
            length: cfg.length_samples() as u32,
            band: cfg.band as u32,
        }
    }
}

const CACHE_MAGIC: &[u8; 8] = b"ERIRCACH";

/// Read-mostly cache; lookups take a shared lock, inserts an exclusive one.
#[derive(Debug, Default)]
pub struct RirCache {
    entries: RwLock<HashMap<RirKey, Arc<ImpulseResponse>>>,
}

impl RirCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &RirKey) -> Option<Arc<ImpulseResponse>> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn get_or_compute(
        &self,
        scene: &Scene,
        source: Vec2,
        ear: Vec2,
        cfg: &RirConfig,
    ) -> Result<Arc<ImpulseResponse>, AcousticsError> {
        let key = RirKey::new(scene.content_hash(), source, ear, cfg);
        if let Some(hit) = self.get(&key) {
            return Ok(hit);
        }
        let rir = Arc::new(compute_rir(scene, source, ear, cfg)?);
        let mut entries = self.entries.write().unwrap();
        Ok(entries.entry(key).or_insert(rir).clone())
    }

    /// Writes `b"ERIRCACH"`, u32 entry count, then per entry the key fields
    /// (u64 scene, 4 x u64 coordinate bits, 3 x u32 settings) followed by the
    /// impulse response in its `ERIR` binary form. All little-endian.
    pub fn save<W: Write>(&self, mut out: W) -> Result<(), AcousticsError> {
        let entries = self.entries.read().unwrap();
        let mut keys: Vec<&RirKey> = entries.keys().collect();
        keys.sort_by_key(|k| (k.scene, k.source, k.ear, k.max_order, k.length, k.band));
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&(keys.len() as u32).to_le_bytes())?;
        for k in keys {
            out.write_all(&k.scene.to_le_bytes())?;
            for v in [k.source.0, k.source.1, k.ear.0, k.ear.1] {
                out.write_all(&v.to_le_bytes())?;
            }
            for v in [k.max_order, k.length, k.band] {
                out.write_all(&v.to_le_bytes())?;
            }
            out.write_all(&entries[k].to_bytes())?;
        }
        Ok(())
    }

    /// Loads entries written by [`RirCache::save`]. Taps come back at f32 precision.
    pub fn load<R: Read>(mut input: R) -> Result<Self, AcousticsError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let bad = |m: &str| AcousticsError::Format(m.to_string());
        if bytes.len() < 12 || &bytes[..8] != CACHE_MAGIC {
            return Err(bad("missing cache header"));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut pos = 12;
        let mut map = HashMap::with_capacity(count);
        for _ in 0..count {
            if bytes.len() < pos + 52 {
                return Err(bad("truncated key"));
            }
            let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
            let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
            let key = RirKey {
                scene: u64_at(pos),
                source: (u64_at(pos + 8), u64_at(pos + 16)),
                ear: (u64_at(pos + 24), u64_at(pos + 32)),
                max_order: u32_at(pos + 40),
                length: u32_at(pos + 44),
                band: u32_at(pos + 48),
            };
            pos += 52;
            let (rir, used) = ImpulseResponse::from_bytes(&bytes[pos..])?;
            pos += used;
            map.insert(key, Arc::new(rir));
        }
        Ok(Self {
            entries: RwLock::new(map),
        })
    }
}
