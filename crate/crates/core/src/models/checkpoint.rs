//! Binary checkpoint format for [`ModelParams`].
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "LMPC"
//! u32     version (1)
//! u8      model kind (0 mlp, 1 gcn, 2 lemp)
//! u8      float width in bytes (4 or 8)
//! f64     beta
//! 4 x     group: weights, biases, gates, projections
//!   u64   tensor count
//!   per tensor: u64 rows, u64 cols, rows*cols floats (row-major)
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelParams};
use crate::ndmath::Matrix;

const MAGIC: &[u8; 4] = b"LMPC";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatWidth {
    F32,
    F64,
}

impl FloatWidth {
    fn bytes(self) -> u8 {
        match self {
            FloatWidth::F32 => 4,
            FloatWidth::F64 => 8,
        }
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, params: &ModelParams, width: FloatWidth) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let kind = match params.kind {
        ModelKind::Mlp => 0u8,
        ModelKind::Gcn => 1,
        ModelKind::Lemp => 2,
    };
    w.write_all(&[kind, width.bytes()])?;
    w.write_all(&params.beta.to_le_bytes())?;
    for group in [&params.weights, &params.biases, &params.gates, &params.projections] {
        w.write_all(&(group.len() as u64).to_le_bytes())?;
        for m in group {
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for &v in m.as_slice() {
                match width {
                    FloatWidth::F32 => w.write_all(&(v as f32).to_le_bytes())?,
                    FloatWidth::F64 => w.write_all(&v.to_le_bytes())?,
                }
            }
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ModelParams> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    let io = |e: std::io::Error| Error::Checkpoint(format!("truncated or unreadable: {e}"));

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(bad("magic mismatch"));
    }
    let version = u32::from_le_bytes(read_array(&mut r).map_err(io)?);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let [kind, width] = read_array::<2, _>(&mut r).map_err(io)?;
    let kind = match kind {
        0 => ModelKind::Mlp,
        1 => ModelKind::Gcn,
        2 => ModelKind::Lemp,
        k => return Err(Error::Checkpoint(format!("unknown model kind tag {k}"))),
    };
    if width != 4 && width != 8 {
        return Err(Error::Checkpoint(format!("unsupported float width {width}")));
    }
    let beta = f64::from_le_bytes(read_array(&mut r).map_err(io)?);

    let mut groups: Vec<Vec<Matrix>> = Vec::with_capacity(4);
    for _ in 0..4 {
        let count = u64::from_le_bytes(read_array(&mut r).map_err(io)?) as usize;
        if count > 1 << 16 {
            return Err(bad("implausible tensor count"));
        }
        let mut group = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = u64::from_le_bytes(read_array(&mut r).map_err(io)?) as usize;
            let cols = u64::from_le_bytes(read_array(&mut r).map_err(io)?) as usize;
            let len = rows.checked_mul(cols).filter(|&l| l <= 1 << 32).ok_or_else(|| bad("implausible tensor shape"))?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let v = if width == 4 {
                    f64::from(f32::from_le_bytes(read_array(&mut r).map_err(io)?))
                } else {
                    f64::from_le_bytes(read_array(&mut r).map_err(io)?)
                };
                data.push(v);
            }
            group.push(Matrix::from_vec(rows, cols, data)?);
        }
        groups.push(group);
    }
    let mut it = groups.into_iter();
    let params = ModelParams {
        kind,
        weights: it.next().unwrap_or_default(),
        biases: it.next().unwrap_or_default(),
        gates: it.next().unwrap_or_default(),
        projections: it.next().unwrap_or_default(),
        beta,
    };
    params.validate()?;
    Ok(params)
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn f64_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ModelParams::init(ModelKind::Lemp, 5, 4, 3, 2, 6, 0.5, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, FloatWidth::F64).unwrap();
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn f32_round_trip_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ModelParams::init(ModelKind::Gcn, 5, 4, 3, 2, 0, 0.5, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, FloatWidth::F32).unwrap();
        let q = read_checkpoint(buf.as_slice()).unwrap();
        for (a, b) in p.tensors().iter().zip(q.tensors()) {
            assert!(a.max_abs_diff(b) < 1e-6);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        assert!(matches!(read_checkpoint(&b"NOPE"[..]), Err(Error::Checkpoint(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ModelParams::init(ModelKind::Mlp, 2, 2, 2, 2, 0, 0.5, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, FloatWidth::F64).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_checkpoint(buf.as_slice()), Err(Error::Checkpoint(_))));
    }
}
