//! Binary tensor files.
//!
//! Layout: magic `SGT1`, then little-endian u32 fields: dtype code
//! (1 = float32, 2 = uint8, 3 = float64), rank, one u32 per dimension,
//! followed by the row-major payload. Dataset files use codes 1 and 2;
//! code 3 is used by checkpoints, which store named f64 parameter tensors
//! behind a JSON header.

use crate::error::{Result, SggError};
use ndarray::ArrayD;
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"SGT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 1,
    U8 = 2,
    F64 = 3,
}

impl Dtype {
    fn from_code(code: u32) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::U8),
            3 => Ok(Dtype::F64),
            other => Err(SggError::Data(format!("unknown dtype code {other}"))),
        }
    }
}

fn write_header(w: &mut impl Write, dtype: Dtype, shape: &[usize]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(dtype as u32).to_le_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &d in shape {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_header(r: &mut impl Read) -> Result<(Dtype, Vec<usize>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SggError::Data("bad tensor magic".into()));
    }
    let dtype = Dtype::from_code(read_u32(r)?)?;
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(SggError::Data(format!("implausible tensor rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    Ok((dtype, shape))
}

pub fn write_f32(w: &mut impl Write, t: &ArrayD<f32>) -> Result<()> {
    write_header(w, Dtype::F32, t.shape())?;
    for v in t.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_u8(w: &mut impl Write, t: &ArrayD<u8>) -> Result<()> {
    write_header(w, Dtype::U8, t.shape())?;
    for v in t.iter() {
        w.write_all(&[*v])?;
    }
    Ok(())
}

pub fn write_f64(w: &mut impl Write, t: &ArrayD<f64>) -> Result<()> {
    write_header(w, Dtype::F64, t.shape())?;
    for v in t.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub fn read_f32(r: &mut impl Read) -> Result<ArrayD<f32>> {
    let (dtype, shape) = read_header(r)?;
    if dtype != Dtype::F32 {
        return Err(SggError::Data("expected f32 tensor".into()));
    }
    let n = numel(&shape);
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    ArrayD::from_shape_vec(shape, data).map_err(|e| SggError::Data(e.to_string()))
}

pub fn read_u8(r: &mut impl Read) -> Result<ArrayD<u8>> {
    let (dtype, shape) = read_header(r)?;
    if dtype != Dtype::U8 {
        return Err(SggError::Data("expected u8 tensor".into()));
    }
    let n = numel(&shape);
    let mut data = vec![0u8; n];
    r.read_exact(&mut data)?;
    ArrayD::from_shape_vec(shape, data).map_err(|e| SggError::Data(e.to_string()))
}

pub fn read_f64(r: &mut impl Read) -> Result<ArrayD<f64>> {
    let (dtype, shape) = read_header(r)?;
    if dtype != Dtype::F64 {
        return Err(SggError::Data("expected f64 tensor".into()));
    }
    let n = numel(&shape);
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes)?;
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect();
    ArrayD::from_shape_vec(shape, data).map_err(|e| SggError::Data(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::ArrayD;

    #[test]
    fn f32_roundtrip() {
        let t = ArrayD::from_shape_vec(
            ndarray::IxDyn(&[2, 3]),
            vec![0.0f32, 1.5, -2.25, 3.0, 4.0, 5.5],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_f32(&mut buf, &t).unwrap();
        // magic + dtype + rank + 2 dims + 6 * 4 payload bytes
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 24);
        assert_eq!(&buf[..4], b"SGT1");
        assert_eq!(u32::from_le_bytes([buf[4], buf[5], buf[6], buf[7]]), 1);
        let back = read_f32(&mut buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn u8_roundtrip() {
        let t =
            ArrayD::from_shape_vec(ndarray::IxDyn(&[2, 2, 2]), vec![0u8, 1, 1, 0, 255, 3, 7, 9])
                .unwrap();
        let mut buf = Vec::new();
        write_u8(&mut buf, &t).unwrap();
        let back = read_u8(&mut buf.as_slice()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn f64_roundtrip_bit_exact() {
        let t = ArrayD::from_shape_vec(
            ndarray::IxDyn(&[3]),
            vec![std::f64::consts::PI, -0.0, 1e-300],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_f64(&mut buf, &t).unwrap();
        let back = read_f64(&mut buf.as_slice()).unwrap();
        for (a, b) in t.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn wrong_dtype_rejected() {
        let t = ArrayD::from_shape_vec(ndarray::IxDyn(&[1]), vec![1.0f32]).unwrap();
        let mut buf = Vec::new();
        write_f32(&mut buf, &t).unwrap();
        assert!(read_u8(&mut buf.as_slice()).is_err());
    }
}
