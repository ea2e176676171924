//! Format 212: pairs of 12-bit two's-complement samples packed into three
//! bytes. The first sample is byte 0 plus the low nibble of byte 1 as bits
//! 8..12; the second is byte 2 plus the high nibble of byte 1.

use super::WfdbError;

pub const SAMPLE_MIN: i16 = -2048;
pub const SAMPLE_MAX: i16 = 2047;

fn sign_extend_12(v: u16) -> i16 {
    ((v << 4) as i16) >> 4
}

/// Bytes needed to hold `n_values` packed samples.
pub fn packed_len(n_values: usize) -> usize {
    (3 * n_values).div_ceil(2)
}

/// Decodes `n_values` samples (interleaved across signals, in file order).
pub fn decode_format212(packed: &[u8], n_values: usize) -> Result<Vec<i16>, WfdbError> {
    let needed = packed_len(n_values);
    if packed.len() < needed {
        return Err(WfdbError::Truncated {
            offset: packed.len(),
            needed,
        });
    }
    let mut out = Vec::with_capacity(n_values);
    for chunk in packed[..needed].chunks(3) {
        let b0 = chunk[0] as u16;
        let b1 = chunk[1] as u16;
        out.push(sign_extend_12(b0 | ((b1 & 0x0f) << 8)));
        if out.len() == n_values {
            break;
        }
        let b2 = chunk[2] as u16;
        out.push(sign_extend_12(b2 | ((b1 & 0xf0) << 4)));
    }
    Ok(out)
}

/// Packs samples; an odd trailing sample occupies two bytes.
pub fn encode_format212(values: &[i16]) -> Result<Vec<u8>, WfdbError> {
    let mut out = Vec::with_capacity(packed_len(values.len()));
    for (i, pair) in values.chunks(2).enumerate() {
        for (j, &v) in pair.iter().enumerate() {
            if !(SAMPLE_MIN..=SAMPLE_MAX).contains(&v) {
                return Err(WfdbError::SampleRange {
                    index: 2 * i + j,
                    value: v,
                });
            }
        }
        let s0 = (pair[0] as u16) & 0x0fff;
        out.push((s0 & 0xff) as u8);
        match pair.get(1) {
            Some(&v) => {
                let s1 = (v as u16) & 0x0fff;
                out.push(((s0 >> 8) | ((s1 >> 8) << 4)) as u8);
                out.push((s1 & 0xff) as u8);
            }
            None => out.push((s0 >> 8) as u8),
        }
    }
    Ok(out)
}

/// Splits interleaved frames into one series per signal.
pub fn deinterleave(values: &[i16], n_signals: usize) -> Vec<Vec<i16>> {
    let n_signals = n_signals.max(1);
    let mut signals = vec![Vec::with_capacity(values.len() / n_signals); n_signals];
    for (i, &v) in values.iter().enumerate() {
        signals[i % n_signals].push(v);
    }
    signals
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent packer written against the byte layout, one bit field at a time.
    fn oracle_pack(a: i16, b: i16) -> [u8; 3] {
        let ua = (a as i32).rem_euclid(4096) as u32;
        let ub = (b as i32).rem_euclid(4096) as u32;
        [(ua % 256) as u8, ((ua / 256) + 16 * (ub / 256)) as u8, (ub % 256) as u8]
    }

    #[test]
    fn spot_values() {
        assert_eq!(decode_format212(&[0, 0, 0], 2).unwrap(), vec![0, 0]);
        assert_eq!(decode_format212(&[0x64, 0, 0], 2).unwrap(), vec![100, 0]);
        assert_eq!(decode_format212(&[0xff, 0x0f, 0], 2).unwrap(), vec![-1, 0]);
        assert_eq!(oracle_pack(100, 0), [0x64, 0, 0]);
        assert_eq!(oracle_pack(-1, 0), [0xff, 0x0f, 0]);
        assert_eq!(
            decode_format212(&oracle_pack(-2048, 2047), 2).unwrap(),
            vec![-2048, 2047]
        );
    }

    #[test]
    fn odd_count_uses_two_bytes() {
        let packed = encode_format212(&[5, -7, 300]).unwrap();
        assert_eq!(packed.len(), 5);
        assert_eq!(decode_format212(&packed, 3).unwrap(), vec![5, -7, 300]);
    }

    #[test]
    fn truncated_buffer_reports_offset() {
        match decode_format212(&[1, 2, 3, 4], 4) {
            Err(WfdbError::Truncated { offset, needed }) => {
                assert_eq!((offset, needed), (4, 6));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_sample_rejected() {
        assert!(encode_format212(&[2048]).is_err());
        assert!(encode_format212(&[0, -2049]).is_err());
    }

    #[test]
    fn deinterleaves_frames() {
        let s = deinterleave(&[1, 10, 2, 20, 3, 30], 2);
        assert_eq!(s, vec![vec![1, 2, 3], vec![10, 20, 30]]);
    }

    proptest! {
        #[test]
        fn matches_oracle(a in SAMPLE_MIN..=SAMPLE_MAX, b in SAMPLE_MIN..=SAMPLE_MAX) {
            let bytes = oracle_pack(a, b);
            prop_assert_eq!(decode_format212(&bytes, 2).unwrap(), vec![a, b]);
            prop_assert_eq!(encode_format212(&[a, b]).unwrap(), bytes.to_vec());
        }

        #[test]
        fn bytes_round_trip(bytes in proptest::collection::vec(any::<[u8; 3]>(), 0..64)) {
            let flat: Vec<u8> = bytes.concat();
            let decoded = decode_format212(&flat, bytes.len() * 2).unwrap();
            prop_assert!(decoded.iter().all(|v| (SAMPLE_MIN..=SAMPLE_MAX).contains(v)));
            prop_assert_eq!(encode_format212(&decoded).unwrap(), flat);
        }
    }
}
