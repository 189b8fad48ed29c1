//! VSTF tensor blob format.
//!
//! Layout: magic `"VSTF"`, u8 version, u8 dtype code (0 = f32, 1 = f64),
//! u32 rank, rank × u64 dims, then the little-endian payload. Checkpoints
//! and dataset caches use the f32 dtype; in-memory math is always f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VSTF";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(DType::F32),
            1 => Ok(DType::F64),
            c => Err(Error::data(format!("unknown VSTF dtype code {c}"))),
        }
    }
}

pub fn write_tensor<W: Write>(w: &mut W, t: &Tensor, dtype: DType) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION, dtype.code()])?;
    w.write_all(&(t.rank() as u32).to_le_bytes())?;
    for &d in t.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    match dtype {
        DType::F32 => {
            for &v in t.data() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        DType::F64 => {
            for &v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_tensor<R: Read>(r: &mut R) -> Result<Tensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::data(format!(
            "bad VSTF magic {:02x?}, expected {:02x?}",
            magic, MAGIC
        )));
    }
    let mut head = [0u8; 2];
    r.read_exact(&mut head)?;
    if head[0] != VERSION {
        return Err(Error::data(format!(
            "unsupported VSTF version {}, expected {VERSION}",
            head[0]
        )));
    }
    let dtype = DType::from_code(head[1])?;
    let mut rank_buf = [0u8; 4];
    r.read_exact(&mut rank_buf)?;
    let rank = u32::from_le_bytes(rank_buf) as usize;
    if rank > 8 {
        return Err(Error::data(format!("implausible VSTF rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut d = [0u8; 8];
        r.read_exact(&mut d)?;
        shape.push(u64::from_le_bytes(d) as usize);
    }
    let n: usize = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    match dtype {
        DType::F32 => {
            let mut buf = [0u8; 4];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f32::from_le_bytes(buf) as f64);
            }
        }
        DType::F64 => {
            let mut buf = [0u8; 8];
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                data.push(f64::from_le_bytes(buf));
            }
        }
    }
    Tensor::new(shape, data)
}

pub fn write_tensor_to_path(path: &Path, t: &Tensor, dtype: DType) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t, dtype)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_from_path(path: &Path) -> Result<Tensor> {
    let mut r = BufReader::new(File::open(path)?);
    read_tensor(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_stable() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t, DType::F32).unwrap();
        assert_eq!(&buf[..4], b"VSTF");
        assert_eq!(buf[4], 1); // version
        assert_eq!(buf[5], 0); // f32
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[10..18].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[18..26].try_into().unwrap()), 2);
        assert_eq!(buf.len(), 26 + 8);
    }

    #[test]
    fn rejects_corrupt_magic() {
        let mut buf = Vec::new();
        write_tensor(&mut buf, &Tensor::scalar(1.0), DType::F64).unwrap();
        buf[0] = b'X';
        assert!(read_tensor(&mut buf.as_slice()).is_err());
    }

    proptest! {
        #[test]
        fn f64_round_trip_is_exact(values in proptest::collection::vec(-1e6f64..1e6, 1..64)) {
            let t = Tensor::new(vec![values.len()], values).unwrap();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &t, DType::F64).unwrap();
            let back = read_tensor(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.data(), t.data());
        }

        #[test]
        fn f32_round_trip_is_idempotent(values in proptest::collection::vec(-1e6f64..1e6, 1..64)) {
            // One f32 rounding, then stable forever.
            let t = Tensor::new(vec![values.len()], values).unwrap();
            let mut buf = Vec::new();
            write_tensor(&mut buf, &t, DType::F32).unwrap();
            let once = read_tensor(&mut buf.as_slice()).unwrap();
            let mut buf2 = Vec::new();
            write_tensor(&mut buf2, &once, DType::F32).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }
}
