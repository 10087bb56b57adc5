//! Binary checkpoints: a versioned header describing the architecture,
//! followed by the flat little-endian `f64` parameter vector.
//!
//! ```text
//! magic      6 bytes  "SNNHRL"
//! version    u16
//! kind       u8       0 = gaussian policy, 1 = manager
//! integration u8      0 = plain, 1 = concat, 2 = bilinear (0 for managers)
//! k          u32
//! obs_dim    u32
//! out_dim    u32      action dim (gaussian) or k (manager)
//! n_hidden   u32, then n_hidden x u32 layer sizes
//! n_params   u64, then n_params x f64
//! ```

use std::path::Path;

use super::{Integration, ManagerPolicy, MlpSpec, SnnPolicy};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"SNNHRL";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub kind: u8,
    pub integration: Integration,
    pub k: usize,
    pub obs_dim: usize,
    pub out_dim: usize,
    pub hidden: Vec<usize>,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = if self.kind == 0 { "gaussian" } else { "manager" };
        write!(
            f,
            "{kind} integration={:?} k={} obs_dim={} out_dim={} hidden={:?}",
            self.integration, self.k, self.obs_dim, self.out_dim, self.hidden
        )
    }
}

impl Architecture {
    pub fn of_policy(p: &SnnPolicy) -> Self {
        Self {
            kind: 0,
            integration: p.integration,
            k: p.k,
            obs_dim: p.obs_dim,
            out_dim: p.action_dim,
            hidden: p.spec.hidden.clone(),
        }
    }

    pub fn of_manager(m: &ManagerPolicy) -> Self {
        Self {
            kind: 1,
            integration: Integration::Plain,
            k: m.k,
            obs_dim: m.obs_dim,
            out_dim: m.k,
            hidden: m.spec.hidden.clone(),
        }
    }
}

fn encode(arch: &Architecture, params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(arch.kind);
    out.push(arch.integration.tag());
    for v in [arch.k, arch.obs_dim, arch.out_dim, arch.hidden.len()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for &h in &arch.hidden {
        out.extend_from_slice(&(h as u32).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Architecture, Vec<f64>)> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(6)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    if kind > 1 {
        return Err(Error::Checkpoint(format!("unknown kind {kind}")));
    }
    let tag = r.u8()?;
    let integration = Integration::from_tag(tag)
        .ok_or_else(|| Error::Checkpoint(format!("unknown integration tag {tag}")))?;
    let k = r.u32()?;
    let obs_dim = r.u32()?;
    let out_dim = r.u32()?;
    let n_hidden = r.u32()?;
    let hidden = (0..n_hidden).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let n = r.u64()? as usize;
    if bytes.len() - r.pos != 8 * n {
        return Err(Error::Checkpoint(format!(
            "expected {n} parameters, found {} bytes",
            bytes.len() - r.pos
        )));
    }
    let params = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    Ok((
        Architecture {
            kind,
            integration,
            k,
            obs_dim,
            out_dim,
            hidden,
        },
        params,
    ))
}

pub fn encode_policy(p: &SnnPolicy) -> Vec<u8> {
    encode(&Architecture::of_policy(p), &p.params.values)
}

pub fn encode_manager(m: &ManagerPolicy) -> Vec<u8> {
    encode(&Architecture::of_manager(m), &m.params.values)
}

pub fn decode_policy(bytes: &[u8]) -> Result<SnnPolicy> {
    let (arch, params) = decode(bytes)?;
    if arch.kind != 0 {
        return Err(Error::Checkpoint("checkpoint holds a manager, not a policy".into()));
    }
    let mut p = SnnPolicy::zeros(
        arch.obs_dim,
        arch.out_dim,
        arch.k,
        arch.integration,
        MlpSpec::new(arch.hidden.clone()),
    )?;
    p.set_params(&params)
        .map_err(|_| Error::Checkpoint(format!("parameter count {} does not fit {arch}", params.len())))?;
    Ok(p)
}

pub fn decode_manager(bytes: &[u8]) -> Result<ManagerPolicy> {
    let (arch, params) = decode(bytes)?;
    if arch.kind != 1 {
        return Err(Error::Checkpoint("checkpoint holds a policy, not a manager".into()));
    }
    let mut m = ManagerPolicy::zeros(arch.obs_dim, arch.k, MlpSpec::new(arch.hidden.clone()))?;
    m.set_params(&params)
        .map_err(|_| Error::Checkpoint(format!("parameter count {} does not fit {arch}", params.len())))?;
    Ok(m)
}

pub fn save_policy(path: &Path, p: &SnnPolicy) -> Result<()> {
    std::fs::write(path, encode_policy(p))?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<SnnPolicy> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    decode_policy(&std::fs::read(path)?)
}

/// Load a policy and require a specific architecture.
pub fn load_policy_expecting(path: &Path, obs_dim: usize, action_dim: usize) -> Result<SnnPolicy> {
    let p = load_policy(path)?;
    if p.obs_dim != obs_dim || p.action_dim != action_dim {
        return Err(Error::Architecture {
            expected: format!("obs_dim={obs_dim} action_dim={action_dim}"),
            found: p.descriptor(),
        });
    }
    Ok(p)
}

pub fn save_manager(path: &Path, m: &ManagerPolicy) -> Result<()> {
    std::fs::write(path, encode_manager(m))?;
    Ok(())
}

pub fn load_manager(path: &Path) -> Result<ManagerPolicy> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    decode_manager(&std::fs::read(path)?)
}
