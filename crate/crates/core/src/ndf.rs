//! NDF, the on-disk array format used by every CLI stage.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "NDR1"
//! dtype   u32      1 = float64, 2 = complex128
//! ndim    u32
//! dims    ndim × u64
//! payload row-major scalars: f64, or interleaved re/im f64 pairs
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::array::{NdArrayC, NdArrayF};
use crate::error::{CoreError, Result};

const MAGIC: [u8; 4] = *b"NDR1";
const DTYPE_F64: u32 = 1;
const DTYPE_C128: u32 = 2;

/// An array read back from disk: the dtype decides the variant.
#[derive(Debug, Clone)]
pub enum NdfArray {
    Real(NdArrayF),
    Complex(NdArrayC),
}

impl NdfArray {
    pub fn shape(&self) -> &[usize] {
        match self {
            NdfArray::Real(a) => a.shape(),
            NdfArray::Complex(a) => a.shape(),
        }
    }

    pub fn into_real(self) -> Result<NdArrayF> {
        match self {
            NdfArray::Real(a) => Ok(a),
            NdfArray::Complex(_) => Err(CoreError::InvalidArgument(
                "expected a real (dtype=1) array, found complex".into(),
            )),
        }
    }

    pub fn into_complex(self) -> Result<NdArrayC> {
        match self {
            NdfArray::Complex(a) => Ok(a),
            NdfArray::Real(_) => Err(CoreError::InvalidArgument(
                "expected a complex (dtype=2) array, found real".into(),
            )),
        }
    }
}

fn write_header<W: Write>(w: &mut W, dtype: u32, shape: &[usize]) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&dtype.to_le_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

/// Write a real array; bit-exact roundtrip with [`read`].
pub fn write_real(path: impl AsRef<Path>, array: &NdArrayF) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, DTYPE_F64, array.shape())?;
        for v in array.data() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    inner().map_err(|e| CoreError::io(path, e))
}

/// Write a complex array, payload interleaved re/im.
pub fn write_complex(path: impl AsRef<Path>, array: &NdArrayC) -> Result<()> {
    let path = path.as_ref();
    let inner = || -> std::io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, DTYPE_C128, array.shape())?;
        for v in array.data() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()
    };
    inner().map_err(|e| CoreError::io(path, e))
}

/// Read either flavor back, with distinct errors for bad magic,
/// unknown dtype, and truncated payloads.
pub fn read(path: impl AsRef<Path>) -> Result<NdfArray> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| CoreError::io(path, e))?;
    if magic != MAGIC {
        return Err(CoreError::BadMagic { path: path.into() });
    }

    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)
        .map_err(|e| CoreError::io(path, e))?;
    let dtype = u32::from_le_bytes(u32buf);
    if dtype != DTYPE_F64 && dtype != DTYPE_C128 {
        return Err(CoreError::BadDtype {
            path: path.into(),
            dtype,
        });
    }

    r.read_exact(&mut u32buf)
        .map_err(|e| CoreError::io(path, e))?;
    let ndim = u32::from_le_bytes(u32buf) as usize;
    if ndim == 0 {
        return Err(CoreError::Malformed {
            path: path.into(),
            reason: "ndim = 0".into(),
        });
    }

    let mut shape = Vec::with_capacity(ndim);
    let mut u64buf = [0u8; 8];
    for _ in 0..ndim {
        r.read_exact(&mut u64buf)
            .map_err(|e| CoreError::io(path, e))?;
        let d = u64::from_le_bytes(u64buf);
        if d == 0 {
            return Err(CoreError::Malformed {
                path: path.into(),
                reason: "zero dimension".into(),
            });
        }
        shape.push(d as usize);
    }
    let count: usize = shape.iter().product();
    let scalar_bytes = if dtype == DTYPE_F64 { 8 } else { 16 };
    let expected = (count as u64) * scalar_bytes;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)
        .map_err(|e| CoreError::io(path, e))?;
    if (payload.len() as u64) < expected {
        return Err(CoreError::Truncated {
            path: path.into(),
            expected,
            got: payload.len() as u64,
        });
    }
    if (payload.len() as u64) > expected {
        return Err(CoreError::Malformed {
            path: path.into(),
            reason: format!(
                "trailing bytes: payload {} > expected {}",
                payload.len(),
                expected
            ),
        });
    }

    let le = |chunk: &[u8]| f64::from_le_bytes(chunk.try_into().unwrap());
    if dtype == DTYPE_F64 {
        let data: Vec<f64> = payload.chunks_exact(8).map(le).collect();
        Ok(NdfArray::Real(NdArrayF::new(shape, data)?))
    } else {
        let data: Vec<Complex64> = payload
            .chunks_exact(16)
            .map(|c| Complex64 {
                re: le(&c[..8]),
                im: le(&c[8..]),
            })
            .collect();
        Ok(NdfArray::Complex(NdArrayC::new(shape, data)?))
    }
}
