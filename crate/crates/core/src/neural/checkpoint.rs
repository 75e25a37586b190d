//! Binary model checkpoints.
//!
//! Layout (all integers little-endian): 8-byte magic `MCCKPT\0\0`,
//! `u32` format version, `u8` variant tag, `u32` tensor count, then per
//! tensor: `u16` name length + UTF-8 name, `u8` rank, `u32` per
//! dimension, and the data as little-endian `f64`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::neural::{ClassifierParams, Variant};

const MAGIC: &[u8; 8] = b"MCCKPT\0\0";
const VERSION: u32 = 1;

fn variant_tag(v: Variant) -> u8 {
    match v {
        Variant::HighOnly => 0,
        Variant::LowOnly => 1,
        Variant::Mcc => 2,
    }
}

fn variant_from_tag(tag: u8) -> Result<Variant> {
    match tag {
        0 => Ok(Variant::HighOnly),
        1 => Ok(Variant::LowOnly),
        2 => Ok(Variant::Mcc),
        other => Err(Error::domain(format!("unknown variant tag {other}"))),
    }
}

pub fn save(params: &ClassifierParams, mut w: impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[variant_tag(params.variant)])?;
    let tensors = params.tensors();
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, dims, data) in tensors {
        let name_bytes = name.as_bytes();
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        w.write_all(&[dims.len() as u8])?;
        for d in &dims {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(data.len() * 8);
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn load(mut r: impl Read) -> Result<ClassifierParams> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::domain("not a model checkpoint (bad magic)"));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::domain(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let mut byte = [0u8; 1];
    r.read_exact(&mut byte)?;
    let variant = variant_from_tag(byte[0])?;
    r.read_exact(&mut u32buf)?;
    let n_tensors = u32::from_le_bytes(u32buf) as usize;

    let mut loaded: BTreeMap<String, (Vec<usize>, Vec<f64>)> = BTreeMap::new();
    for _ in 0..n_tensors {
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf)?;
        let name_len = u16::from_le_bytes(u16buf) as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::domain("checkpoint tensor name is not UTF-8"))?;
        r.read_exact(&mut byte)?;
        let rank = byte[0] as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            r.read_exact(&mut u32buf)?;
            dims.push(u32::from_le_bytes(u32buf) as usize);
        }
        let len: usize = dims.iter().product();
        let mut payload = vec![0u8; len * 8];
        r.read_exact(&mut payload)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        loaded.insert(name, (dims, data));
    }

    let mut params = ClassifierParams::zeros(variant);
    let expected = params.tensors();
    if expected.len() != n_tensors {
        return Err(Error::domain(format!(
            "checkpoint has {n_tensors} tensors, variant `{}` needs {}",
            variant.name(),
            expected.len()
        )));
    }
    let expected_dims: Vec<(&'static str, Vec<usize>)> = expected
        .into_iter()
        .map(|(name, dims, _)| (name, dims))
        .collect();
    for ((name, dst), (exp_name, exp_dims)) in
        params.tensors_mut().into_iter().zip(expected_dims)
    {
        debug_assert_eq!(name, exp_name);
        let (dims, data) = loaded
            .get(name)
            .ok_or_else(|| Error::domain(format!("checkpoint missing tensor `{name}`")))?;
        if *dims != exp_dims {
            return Err(Error::domain(format!(
                "tensor `{name}` has dims {dims:?}, expected {exp_dims:?}"
            )));
        }
        dst.copy_from_slice(data);
    }
    Ok(params)
}

pub fn save_to_path(params: &ClassifierParams, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    save(params, BufWriter::new(file))
}

pub fn load_from_path(path: &Path) -> Result<ClassifierParams> {
    let file = File::open(path)?;
    load(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        for variant in [Variant::HighOnly, Variant::LowOnly, Variant::Mcc] {
            let params = ClassifierParams::init(variant, 123);
            let mut buf = Vec::new();
            save(&params, &mut buf).unwrap();
            let back = load(buf.as_slice()).unwrap();
            assert_eq!(params, back);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(load(&b"not a checkpoint"[..]).is_err());
    }
}
