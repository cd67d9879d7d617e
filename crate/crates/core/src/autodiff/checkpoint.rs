//! Binary checkpoint files.
//!
//! Layout (little-endian): magic `GSLCKPT1`, `u64` version, label string,
//! `u32` section count, then per section: name, shape manifest
//! (`u32` count of `(name, u64 rows, u64 cols)`), `u64` value count and the
//! `f64` values, a `u8` optimizer flag followed (when set) by the Adam step
//! counter and both moment vectors. A CRC-32 of all preceding bytes closes
//! the file. Strings are `u32` length-prefixed UTF-8.

use std::fs;
use std::path::Path;

use super::adam::AdamState;
use super::mlp::{ManifestEntry, ParamVector};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{GslError, Result};

pub const MAGIC: &[u8; 8] = b"GSLCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSection {
    pub name: String,
    pub params: ParamVector,
    pub optimizer: Option<AdamState>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub version: u64,
    pub label: String,
    pub sections: Vec<CheckpointSection>,
}

impl Checkpoint {
    pub fn new(version: u64, label: impl Into<String>) -> Self {
        Checkpoint {
            version,
            label: label.into(),
            sections: Vec::new(),
        }
    }

    pub fn with_section(
        mut self,
        name: impl Into<String>,
        params: &ParamVector,
        optimizer: Option<&AdamState>,
    ) -> Self {
        self.sections.push(CheckpointSection {
            name: name.into(),
            params: params.clone(),
            optimizer: optimizer.cloned(),
        });
        self
    }

    pub fn section(&self, name: &str) -> Result<&CheckpointSection> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| GslError::Runtime(format!("checkpoint has no section '{name}'")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u64(self.version);
        w.str(&self.label);
        w.u32(self.sections.len() as u32);
        for s in &self.sections {
            w.str(&s.name);
            w.u32(s.params.manifest.len() as u32);
            for e in &s.params.manifest {
                w.str(&e.name);
                w.u64(e.rows as u64);
                w.u64(e.cols as u64);
            }
            w.u64(s.params.len() as u64);
            w.f64s(&s.params.values);
            match &s.optimizer {
                Some(opt) => {
                    w.u8(1);
                    w.u64(opt.step);
                    w.f64s(&opt.m);
                    w.f64s(&opt.v);
                }
                None => w.u8(0),
            }
        }
        w.finish_with_crc()
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let mut r = ByteReader::with_crc(bytes, origin)?;
        r.expect_magic(MAGIC)?;
        let version = r.u64()?;
        let label = r.str()?;
        let n_sections = r.u32()?;
        let mut sections = Vec::with_capacity(n_sections as usize);
        for _ in 0..n_sections {
            let name = r.str()?;
            let n_entries = r.u32()?;
            let mut manifest = Vec::with_capacity(n_entries as usize);
            for _ in 0..n_entries {
                let name = r.str()?;
                let rows = r.u64()? as usize;
                let cols = r.u64()? as usize;
                manifest.push(ManifestEntry { name, rows, cols });
            }
            let n = r.u64()? as usize;
            let values = r.f64s(n)?;
            let total: usize = manifest.iter().map(ManifestEntry::len).sum();
            if total != n {
                return Err(r.err(format!("section '{name}' manifest covers {total} of {n} values")));
            }
            let optimizer = match r.u8()? {
                0 => None,
                1 => {
                    let step = r.u64()?;
                    let m = r.f64s(n)?;
                    let v = r.f64s(n)?;
                    Some(AdamState { m, v, step })
                }
                f => return Err(r.err(format!("bad optimizer flag {f}"))),
            };
            sections.push(CheckpointSection {
                name,
                params: ParamVector { values, manifest },
                optimizer,
            });
        }
        if !r.is_done() {
            return Err(r.err("trailing bytes after last section"));
        }
        Ok(Checkpoint {
            version,
            label,
            sections,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        // write-then-rename so a killed process never leaves a torn file
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::mlp::{HeadKind, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let spec = MlpSpec::new(3, vec![4], HeadKind::Categorical { actions: 2 });
        let p = spec.init(&mut ChaCha8Rng::seed_from_u64(9));
        let mut opt = AdamState::for_params(&p);
        opt.step = 7;
        opt.m[0] = -0.25;
        Checkpoint::new(3, "policy")
            .with_section("policy", &p, Some(&opt))
            .with_section("value", &p, None)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        let back = Checkpoint::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = sample().to_bytes();
        bytes[20] ^= 0x40;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes, "mem"),
            Err(GslError::Checksum(_))
        ));
    }
}
