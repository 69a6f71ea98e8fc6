//! On-disk cache of spectral bases keyed by mesh content and `k`.
//!
//! Entry layout (little endian), stored as `<mesh hash>_k<k>.fmbc`:
//!
//! ```text
//! "FMBC" | u32 version | 32-byte mesh hash | u64 n | u64 k
//!   | k f64 eigenvalues | n f64 mass | n·k f64 eigenvectors, row-major
//!   | 32-byte SHA-256 of everything above
//! ```
//!
//! An entry that fails any check is recomputed and overwritten with a
//! warning; a valid entry is never rewritten.

use std::fs;
use std::path::{Path, PathBuf};

use fmapkit_core::mesh::{build_laplacian, TriangleMesh};
use fmapkit_core::spectral::{compute_basis, SpectralBasis};
use fmapkit_core::Mat;
use sha2::{Digest, Sha256};

use crate::formats::Reader;
use crate::mesh_io::write_atomic;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"FMBC";
const VERSION: u32 = 1;

pub type MeshHash = [u8; 32];

/// SHA-256 over vertex coordinate bits and face indices.
pub fn mesh_hash(mesh: &TriangleMesh) -> MeshHash {
    let mut h = Sha256::new();
    h.update((mesh.n() as u64).to_le_bytes());
    h.update((mesh.faces().len() as u64).to_le_bytes());
    for p in mesh.vertices() {
        for c in p {
            h.update(c.to_bits().to_le_bytes());
        }
    }
    for f in mesh.faces() {
        for v in f {
            h.update((*v as u64).to_le_bytes());
        }
    }
    h.finalize().into()
}

pub fn hex(hash: &MeshHash) -> String {
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheStatus {
    /// Loaded from a valid entry.
    Hit,
    /// No entry existed; computed and stored.
    Computed,
    /// An entry existed but was invalid; recomputed and overwritten.
    Recomputed,
    /// Caching disabled.
    Uncached,
}

#[derive(Clone, Debug)]
pub struct BasisCache {
    dir: Option<PathBuf>,
}

impl BasisCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn entry_path(&self, hash: &MeshHash, k: usize) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}_k{k}.fmbc", hex(hash))))
    }

    /// The first `k` eigenpairs of `mesh`, from the cache when possible.
    pub fn basis(&self, mesh: &TriangleMesh, k: usize) -> Result<(SpectralBasis, CacheStatus)> {
        let hash = mesh_hash(mesh);
        let Some(path) = self.entry_path(&hash, k) else {
            return Ok((compute(mesh, k)?, CacheStatus::Uncached));
        };
        let status = match fs::read(&path) {
            Ok(bytes) => match decode(&bytes, &hash, mesh.n(), k) {
                Ok(basis) => return Ok((basis, CacheStatus::Hit)),
                Err(reason) => {
                    log::warn!("{}: corrupted cache entry ({reason}); recomputing", path.display());
                    CacheStatus::Recomputed
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => CacheStatus::Computed,
            Err(e) => return Err(Error::io(&path, e)),
        };
        let basis = compute(mesh, k)?;
        write_atomic(&path, &encode(&basis, &hash))?;
        Ok((basis, status))
    }
}

fn compute(mesh: &TriangleMesh, k: usize) -> Result<SpectralBasis> {
    let lap = build_laplacian(mesh)?;
    Ok(compute_basis(&lap, k)?)
}

pub fn encode(basis: &SpectralBasis, hash: &MeshHash) -> Vec<u8> {
    let (n, k) = (basis.n(), basis.k());
    let mut out = Vec::with_capacity(4 + 4 + 32 + 16 + 8 * (k + n + n * k) + 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(hash);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    for v in basis.lambda().iter().chain(basis.mass()).chain(basis.phi().as_slice()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest: [u8; 32] = Sha256::digest(&out).into();
    out.extend_from_slice(&digest);
    out
}

pub fn decode(bytes: &[u8], hash: &MeshHash, n: usize, k: usize) -> std::result::Result<SpectralBasis, String> {
    if bytes.len() < 32 {
        return Err("file too short".into());
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err("checksum mismatch".into());
    }
    let mut r = Reader::new(body);
    if r.take(4) != Some(MAGIC.as_slice()) {
        return Err("bad magic".into());
    }
    if r.u32() != Some(VERSION) {
        return Err("unsupported version".into());
    }
    if r.take(32) != Some(hash.as_slice()) {
        return Err("mesh hash mismatch".into());
    }
    if r.usize() != Some(n) || r.usize() != Some(k) {
        return Err("size mismatch".into());
    }
    let lambda = r.f64s(k).ok_or("truncated eigenvalues")?;
    let mass = r.f64s(n).ok_or("truncated mass")?;
    let phi = r.f64s(n * k).ok_or("truncated eigenvectors")?;
    if !r.at_end() {
        return Err("trailing bytes".into());
    }
    SpectralBasis::from_parts(Mat::from_vec(n, k, phi), lambda, mass).map_err(|e| e.to_string())
}

/// Hash prefix used in log messages.
pub fn short_hash(mesh: &TriangleMesh) -> String {
    hex(&mesh_hash(mesh))[..12].to_string()
}

/// All entries currently in `dir`.
pub fn list_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "fmbc"))
        .collect();
    entries.sort();
    Ok(entries)
}
