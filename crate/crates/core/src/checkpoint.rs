//! Binary checkpoints of a velocity field.
//!
//! Layout, all little-endian: the magic `CEVF`, a `u32` version, `K` and `P` as
//! `u64`, time and radius as `f64`, then the coefficients of both components
//! as `(re, im)` pairs in [`GridField`] order.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::grid_field::{GridField, VectorGridField};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"CEVF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: f64,
    pub tau: f64,
    pub v: VectorGridField,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let (k, p) = (self.v.k_max(), self.v.degree());
        let mut out = Vec::with_capacity(40 + 32 * (2 * k + 1) * (p + 1));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(k as u64).to_le_bytes());
        out.extend_from_slice(&(p as u64).to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        out.extend_from_slice(&self.tau.to_le_bytes());
        for comp in [&self.v.comp1, &self.v.comp2] {
            for c in comp.coeffs() {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        take(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(take_n(&mut r)?);
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported checkpoint version {version}")));
        }
        let k = u64::from_le_bytes(take_n(&mut r)?) as usize;
        let p = u64::from_le_bytes(take_n(&mut r)?) as usize;
        let t = f64::from_le_bytes(take_n(&mut r)?);
        let tau = f64::from_le_bytes(take_n(&mut r)?);
        let n = (2 * k + 1) * (p + 1);
        if r.len() != 2 * n * 16 {
            return Err(Error::Parse(format!(
                "checkpoint payload has {} bytes, expected {} for K = {k}, P = {p}",
                r.len(),
                2 * n * 16
            )));
        }
        let mut read_comp = || -> Result<GridField> {
            let mut c = Vec::with_capacity(n);
            for _ in 0..n {
                let re = f64::from_le_bytes(take_n(&mut r)?);
                let im = f64::from_le_bytes(take_n(&mut r)?);
                c.push(Complex64::new(re, im));
            }
            Ok(GridField::from_coeffs(k, p, c))
        };
        let a = read_comp()?;
        let b = read_comp()?;
        Ok(Checkpoint {
            t,
            tau,
            v: VectorGridField::new(a, b),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

fn take(r: &mut &[u8], out: &mut [u8]) -> Result<()> {
    if r.len() < out.len() {
        return Err(Error::Parse("truncated checkpoint".into()));
    }
    out.copy_from_slice(&r[..out.len()]);
    *r = &r[out.len()..];
    Ok(())
}

fn take_n<const N: usize>(r: &mut &[u8]) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    take(r, &mut b)?;
    Ok(b)
}
