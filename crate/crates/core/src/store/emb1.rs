//! EMB1: a little-endian `f32` matrix container.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EMB1"
//!      4     4  n_rows   (u32 LE)
//!      8     4  n_cols   (u32 LE)
//!     12     4  reserved (zero)
//!     16   4*n  payload, row-major f32 LE
//! ```

use std::fs;
use std::path::Path;

use super::EmbeddingMatrix;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EMB1";
pub const HEADER_LEN: usize = 16;

pub fn encode(m: &EmbeddingMatrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.n_rows()).map_err(|_| overflow(m.n_rows(), m.n_cols()))?;
    let cols = u32::try_from(m.n_cols()).map_err(|_| overflow(m.n_rows(), m.n_cols()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.n_rows() * m.n_cols());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for &v in m.view().iter() {
        let x = v as f32;
        if !x.is_finite() {
            return Err(Error::NonFinite("f32 encoding"));
        }
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let (rows, cols) = (word(4), word(8));
    if word(12) != 0 {
        return Err(Error::ReservedField);
    }
    let payload = (rows as u64)
        .checked_mul(cols as u64)
        .and_then(|v| v.checked_mul(4))
        .filter(|&p| p <= (usize::MAX - HEADER_LEN) as u64);
    let payload = match payload {
        Some(p) if rows != 0 && cols != 0 => p,
        _ => {
            return Err(Error::DimensionOverflow {
                rows: rows.into(),
                cols: cols.into(),
            })
        }
    };
    let expected = HEADER_LEN + payload as usize;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingData {
            actual: bytes.len() - expected,
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingMatrix::from_shape_vec(rows as usize, cols as usize, values)
}

pub fn save(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(m)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

fn overflow(rows: usize, cols: usize) -> Error {
    Error::DimensionOverflow {
        rows: rows as u64,
        cols: cols as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: usize, cols: usize, v: Vec<f64>) -> EmbeddingMatrix {
        EmbeddingMatrix::from_shape_vec(rows, cols, v).unwrap()
    }

    #[test]
    fn smallest_file_layout() {
        let bytes = encode(&m(1, 1, vec![0.5])).unwrap();
        assert_eq!(bytes.len(), 20);
        assert_eq!(&bytes[..4], b"EMB1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &[0, 0, 0, 0]);
        assert_eq!(&bytes[16..], &0.5f32.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), m(1, 1, vec![0.5]));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.emb");
        let x = m(2, 3, vec![1.0, -2.5, 0.125, 3.0, 4.0, -0.0]);
        save(&x, &path).unwrap();
        assert_eq!(load(&path).unwrap(), x);
    }

    #[test]
    fn error_cases_are_distinct() {
        let good = encode(&m(2, 2, vec![1.0; 4])).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::BadMagic)));
        assert!(matches!(decode(b"EM"), Err(Error::BadMagic)));

        assert!(matches!(decode(&good[..10]), Err(Error::Truncated { .. })));
        assert!(matches!(
            decode(&good[..good.len() - 1]),
            Err(Error::Truncated {
                expected: 32,
                actual: 31
            })
        ));

        let mut extra = good.clone();
        extra.push(0);
        assert!(matches!(
            decode(&extra),
            Err(Error::TrailingData { actual: 1 })
        ));

        let mut reserved = good.clone();
        reserved[13] = 1;
        assert!(matches!(decode(&reserved), Err(Error::ReservedField)));

        let mut zero_rows = good.clone();
        zero_rows[4..8].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(
            decode(&zero_rows),
            Err(Error::DimensionOverflow { .. })
        ));

        let mut huge = good;
        huge[4..8].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            decode(&huge),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn nan_payload_rejected() {
        let mut bytes = encode(&m(1, 1, vec![1.0])).unwrap();
        bytes[16..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&bytes), Err(Error::NonFinite(_))));
    }

    #[test]
    fn out_of_f32_range_rejected() {
        assert!(encode(&m(1, 1, vec![1e300])).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_identity_on_f32_values(
            (rows, cols, vals) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), prop::collection::vec(-1e30f32..1e30, r * c))
            })
        ) {
            let x = m(rows, cols, vals.iter().map(|&v| v as f64).collect());
            let back = decode(&encode(&x).unwrap()).unwrap();
            prop_assert_eq!(back, x);
        }
    }
}
