//! Named `f32` parameter arrays and the QPRW container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "QPRW" | u32 version | u32 count
//! per array: u16 name_len | name (UTF-8) | u8 dtype (0 = f32) | u8 rank
//!            | rank × u32 dims | product(dims) × f32, row-major
//! ```

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::arch::ArchitectureSpec;
use super::CnnError;
use crate::fsio::write_atomic;

pub const QPRW_MAGIC: &[u8; 4] = b"QPRW";
pub const QPRW_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedArray {
    pub fn numel(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Ordered collection of named arrays. Order is preserved through a file
/// round trip, so equal bundles serialize to equal bytes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightBundle {
    arrays: Vec<NamedArray>,
}

impl WeightBundle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an array, replacing any previous one with the same name in place.
    pub fn insert(&mut self, name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) {
        let name = name.into();
        let arr = NamedArray { name, dims, data };
        match self.arrays.iter_mut().find(|a| a.name == arr.name) {
            Some(slot) => *slot = arr,
            None => self.arrays.push(arr),
        }
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut NamedArray> {
        self.arrays.iter_mut().find(|a| a.name == name)
    }

    pub fn arrays(&self) -> &[NamedArray] {
        &self.arrays
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    /// Total number of stored scalars, batch-norm statistics included.
    pub fn param_count(&self) -> usize {
        self.arrays.iter().map(NamedArray::numel).sum()
    }

    /// Every architecture array set to zero, except batch-norm variances
    /// which are 1.
    pub fn zeros() -> Self {
        let mut b = Self::new();
        for (name, dims) in ArchitectureSpec::required_arrays() {
            let n = dims.iter().product();
            let v = if name.ends_with(".var") { 1.0 } else { 0.0 };
            b.insert(name, dims, vec![v; n]);
        }
        b
    }

    /// A valid random bundle for the fixed architecture: He-scaled
    /// convolution and dense weights, batch-norm statistics near identity.
    pub fn synthetic(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Self::new();
        for (name, dims) in ArchitectureSpec::required_arrays() {
            let n: usize = dims.iter().product();
            let data: Vec<f32> = if name.ends_with(".w") {
                let fan_in: usize = dims[1..].iter().product();
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid sigma");
                (0..n).map(|_| normal.sample(&mut rng) as f32).collect()
            } else if name.ends_with(".gamma") {
                (0..n).map(|_| rng.random_range(0.8..1.2)).collect()
            } else if name.ends_with(".var") {
                (0..n).map(|_| rng.random_range(0.5..1.5)).collect()
            } else {
                (0..n).map(|_| rng.random_range(-0.1..0.1)).collect()
            };
            b.insert(name, dims, data);
        }
        b
    }
}

/// One array that does not fit the architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeOffense {
    pub name: String,
    pub expected: Vec<usize>,
    /// `None` when the array is missing.
    pub found: Option<Vec<usize>>,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BundleShapeError {
    pub offenders: Vec<ShapeOffense>,
}

impl fmt::Display for BundleShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} array(s) do not fit the architecture:", self.offenders.len())?;
        for o in &self.offenders {
            write!(f, " {} ({}, expected {:?}", o.name, o.problem, o.expected)?;
            if let Some(found) = &o.found {
                write!(f, ", found {found:?}")?;
            }
            write!(f, ");")?;
        }
        Ok(())
    }
}

impl std::error::Error for BundleShapeError {}

pub fn write_bundle(bundle: &WeightBundle) -> Result<Vec<u8>, CnnError> {
    let mut out = Vec::with_capacity(12 + 4 * bundle.param_count());
    out.extend_from_slice(QPRW_MAGIC);
    out.extend_from_slice(&QPRW_VERSION.to_le_bytes());
    out.extend_from_slice(&(bundle.len() as u32).to_le_bytes());
    for a in bundle.arrays() {
        let bad = |why: String| CnnError::ShapeHeaderMismatch(format!("{}: {why}", a.name));
        if a.data.len() != a.numel() {
            return Err(bad(format!("{} values for dims {:?}", a.data.len(), a.dims)));
        }
        let name_len = u16::try_from(a.name.len()).map_err(|_| bad("name too long".into()))?;
        let rank = u8::try_from(a.dims.len()).map_err(|_| bad("rank above 255".into()))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(a.name.as_bytes());
        out.push(DTYPE_F32);
        out.push(rank);
        for &d in &a.dims {
            let d = u32::try_from(d).map_err(|_| bad(format!("dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &a.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, array: Option<&str>) -> Result<&'a [u8], CnnError> {
        if self.buf.len() - self.pos < n {
            return Err(CnnError::TruncatedFile {
                array: array.map(str::to_owned),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, array: Option<&str>) -> Result<u8, CnnError> {
        Ok(self.take(1, array)?[0])
    }

    fn u16(&mut self, array: Option<&str>) -> Result<u16, CnnError> {
        let b = self.take(2, array)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, array: Option<&str>) -> Result<u32, CnnError> {
        let b = self.take(4, array)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_bundle(bytes: &[u8]) -> Result<WeightBundle, CnnError> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if bytes.len() >= 4 && &bytes[..4] != QPRW_MAGIC {
        return Err(CnnError::BadMagic);
    }
    cur.take(4, None)?;
    let version = cur.u32(None)?;
    if version != QPRW_VERSION {
        return Err(CnnError::UnsupportedVersion(version));
    }
    let count = cur.u32(None)?;
    let mut bundle = WeightBundle::new();
    let mut seen = HashSet::new();
    for i in 0..count {
        let placeholder = format!("array #{i}");
        let name_len = cur.u16(Some(&placeholder))? as usize;
        let name = std::str::from_utf8(cur.take(name_len, Some(&placeholder))?)
            .map_err(|_| CnnError::ShapeHeaderMismatch(format!("{placeholder}: name is not UTF-8")))?
            .to_owned();
        let tag = Some(name.as_str());
        let dtype = cur.u8(tag)?;
        if dtype != DTYPE_F32 {
            return Err(CnnError::UnsupportedDtype { array: name, code: dtype });
        }
        let rank = cur.u8(tag)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u32(tag)? as usize);
        }
        let numel = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| CnnError::ShapeHeaderMismatch(format!("{name}: dims {dims:?} overflow")))?
            / 4;
        let payload = cur.take(4 * numel, tag)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if !seen.insert(name.clone()) {
            return Err(CnnError::ShapeHeaderMismatch(format!("{name}: duplicate array")));
        }
        bundle.arrays.push(NamedArray { name, dims, data });
    }
    if cur.pos != bytes.len() {
        return Err(CnnError::ShapeHeaderMismatch(format!(
            "header declares {count} arrays but {} bytes follow them",
            bytes.len() - cur.pos
        )));
    }
    Ok(bundle)
}

pub fn save_weights(bundle: &WeightBundle, path: &Path) -> Result<(), CnnError> {
    Ok(write_atomic(path, &write_bundle(bundle)?)?)
}

pub fn load_weights(path: &Path) -> Result<WeightBundle, CnnError> {
    read_bundle(&std::fs::read(path)?)
}
