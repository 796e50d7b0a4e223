//! Flat binary parameter checkpoints.
//!
//! Layout: the magic bytes `FTM1`, then for every parameter in store order
//! its name length (`u32` LE), UTF-8 name, rank (`u32` LE), extents (`u32` LE
//! each) and values (`f64` LE). The file ends after the last parameter.

use std::io::{Read, Write};

use super::{ParamStore, Tensor, TensorError};

pub const MAGIC: &[u8; 4] = b"FTM1";

pub fn write_checkpoint<W: Write>(store: &ParamStore, mut out: W) -> Result<(), TensorError> {
    out.write_all(MAGIC)?;
    for (_, name, tensor) in store.iter() {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
        for &e in tensor.shape() {
            out.write_all(&(e as u32).to_le_bytes())?;
        }
        for v in tensor.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn to_bytes(store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(store, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TensorError> {
        if self.pos + n > self.bytes.len() {
            return Err(TensorError::Checkpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TensorError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ParamStore, TensorError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(TensorError::Checkpoint("missing FTM1 magic".into()));
    }
    let mut store = ParamStore::new();
    while cur.pos < bytes.len() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|e| TensorError::Checkpoint(format!("parameter name is not UTF-8: {e}")))?
            .to_string();
        let rank = cur.u32()? as usize;
        let shape = (0..rank).map(|_| cur.u32().map(|e| e as usize)).collect::<Result<Vec<_>, _>>()?;
        let count: usize = shape.iter().product();
        let raw = cur.take(count * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        store.insert(name, Tensor::new(shape, data)?)?;
    }
    Ok(store)
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<ParamStore, TensorError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::new(vec![2], vec![1.0, -2.5]).unwrap()).unwrap();
        let bytes = to_bytes(&store);
        let mut expected = b"FTM1".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(b"w");
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f64.to_le_bytes());
        expected.extend((-2.5f64).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(from_bytes(b"FTM2").is_err());
        let mut store = ParamStore::new();
        store.insert("w", Tensor::row(vec![1.0, 2.0])).unwrap();
        let bytes = to_bytes(&store);
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in proptest::collection::vec(
            (1usize..4, 1usize..4, proptest::collection::vec(-1e6f64..1e6, 16)), 1..4)) {
            let mut store = ParamStore::new();
            for (i, (r, c, v)) in values.iter().enumerate() {
                let t = Tensor::matrix(*r, *c, v[..r * c].to_vec()).unwrap();
                store.insert(format!("p{i}.é"), t).unwrap();
            }
            let back = from_bytes(&to_bytes(&store)).unwrap();
            prop_assert_eq!(back, store);
        }
    }
}
