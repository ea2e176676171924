//! MIT binary annotation files.
//!
//! Each annotation is a little-endian 16-bit word: the top six bits hold the
//! annotation code, the low ten bits the sample interval since the previous
//! annotation. A handful of pseudo-codes modify the stream:
//!
//! * `SKIP` (59): the next four bytes carry a 32-bit interval (high half first).
//! * `NUM` (60), `SUB` (61), `CHN` (62): set the field for the preceding annotation.
//! * `AUX` (63): the interval field is a byte count of auxiliary data, padded to even.
//!
//! A zero word ends the stream.

use super::WfdbError;

const SKIP: u8 = 59;
const NUM: u8 = 60;
const SUB: u8 = 61;
const CHN: u8 = 62;
const AUX: u8 = 63;

/// Mnemonics for codes 0..=49 (standard annotation table).
const SYMBOLS: [&str; 50] = [
    " ", "N", "L", "R", "a", "V", "F", "J", "A", "S", "E", "j", "/", "Q", "~", "", "|", "", "s", "T", "*", "D", "\"",
    "=", "p", "B", "^", "t", "+", "u", "?", "!", "[", "]", "e", "n", "@", "x", "f", "(", ")", "r", "", "", "", "", "",
    "", "", "",
];

/// Codes that mark a QRS complex.
const BEAT_CODES: [u8; 19] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 25, 30, 34, 35, 38, 41];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Annotation {
    pub sample_index: usize,
    pub code: u8,
    pub subtype: i8,
    pub channel: u8,
    pub number: i8,
    pub aux: Option<Vec<u8>>,
}

impl Annotation {
    pub fn new(sample_index: usize, code: u8) -> Self {
        Annotation {
            sample_index,
            code,
            subtype: 0,
            channel: 0,
            number: 0,
            aux: None,
        }
    }

    pub fn symbol(&self) -> &'static str {
        code_symbol(self.code)
    }

    pub fn is_beat(&self) -> bool {
        is_beat_code(self.code)
    }
}

pub fn code_symbol(code: u8) -> &'static str {
    SYMBOLS.get(code as usize).copied().unwrap_or("")
}

pub fn symbol_code(symbol: &str) -> Option<u8> {
    if symbol.is_empty() || symbol == " " {
        return None;
    }
    SYMBOLS.iter().position(|&s| s == symbol).map(|p| p as u8)
}

pub fn is_beat_code(code: u8) -> bool {
    BEAT_CODES.contains(&code)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BeatLabel {
    Normal,
    Arrhythmia,
    Ignore,
}

/// `N` is normal; every other beat code is arrhythmia; non-beat codes are ignored.
pub fn label_beat(code: u8) -> BeatLabel {
    if code == 1 {
        BeatLabel::Normal
    } else if is_beat_code(code) {
        BeatLabel::Arrhythmia
    } else {
        BeatLabel::Ignore
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn word(&mut self) -> Result<Option<u16>, WfdbError> {
        match self.bytes.len() - self.pos {
            0 => Ok(None),
            1 => Err(WfdbError::Annotation {
                offset: self.pos,
                message: "odd trailing byte".into(),
            }),
            _ => {
                let w = u16::from_le_bytes([self.bytes[self.pos], self.bytes[self.pos + 1]]);
                self.pos += 2;
                Ok(Some(w))
            }
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8], WfdbError> {
        if self.bytes.len() - self.pos < n {
            return Err(WfdbError::Annotation {
                offset: self.pos,
                message: format!("expected {n} more bytes"),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Decodes an annotation stream.
///
/// Indices must be strictly increasing and, when `n_samples` is given, below it.
/// A stream that ends without the zero terminator is accepted.
pub fn parse_annotations(bytes: &[u8], n_samples: Option<usize>) -> Result<Vec<Annotation>, WfdbError> {
    let mut reader = Reader { bytes, pos: 0 };
    let mut out: Vec<Annotation> = Vec::new();
    let mut time: i64 = 0;
    let mut pending_skip: i64 = 0;

    while let Some(word) = reader.word()? {
        let offset = reader.pos - 2;
        let code = (word >> 10) as u8;
        let field = word & 0x03ff;
        match (code, field) {
            (0, 0) => return Ok(out),
            (SKIP, _) => {
                let b = reader.take(4)?;
                let hi = u16::from_le_bytes([b[0], b[1]]) as u32;
                let lo = u16::from_le_bytes([b[2], b[3]]) as u32;
                pending_skip += ((hi << 16) | lo) as i32 as i64;
            }
            (NUM | SUB | CHN, _) => {
                let last = out.last_mut().ok_or_else(|| WfdbError::Annotation {
                    offset,
                    message: "modifier before first annotation".into(),
                })?;
                match code {
                    NUM => last.number = field as u8 as i8,
                    SUB => last.subtype = field as u8 as i8,
                    _ => last.channel = field as u8,
                }
            }
            (AUX, len) => {
                let len = len as usize;
                let data = reader.take(len + (len & 1))?[..len].to_vec();
                let last = out.last_mut().ok_or_else(|| WfdbError::Annotation {
                    offset,
                    message: "aux data before first annotation".into(),
                })?;
                last.aux = Some(data);
            }
            _ => {
                let next = time + pending_skip + field as i64;
                pending_skip = 0;
                if next < 0 {
                    return Err(WfdbError::Annotation {
                        offset,
                        message: format!("negative sample index {next}"),
                    });
                }
                if !out.is_empty() && next <= time {
                    return Err(WfdbError::Annotation {
                        offset,
                        message: format!("sample index {next} does not follow {time}"),
                    });
                }
                if let Some(limit) = n_samples {
                    if next as u64 >= limit as u64 {
                        return Err(WfdbError::Annotation {
                            offset,
                            message: format!("sample index {next} past record end {limit}"),
                        });
                    }
                }
                time = next;
                out.push(Annotation::new(next as usize, code));
            }
        }
    }
    Ok(out)
}

/// Encodes annotations, using `SKIP` for intervals that do not fit in ten
/// bits. Indices must be strictly increasing and codes in 1..=49.
pub fn write_annotations(annotations: &[Annotation]) -> Result<Vec<u8>, WfdbError> {
    let mut out = Vec::with_capacity(annotations.len() * 2 + 2);
    let push = |out: &mut Vec<u8>, code: u8, field: u16| {
        out.extend_from_slice(&(((code as u16) << 10) | (field & 0x03ff)).to_le_bytes());
    };
    let mut time = 0usize;
    for (i, a) in annotations.iter().enumerate() {
        if !(1..=49).contains(&a.code) {
            return Err(WfdbError::Annotation {
                offset: i,
                message: format!("code {} cannot be written", a.code),
            });
        }
        if i > 0 && a.sample_index <= time {
            return Err(WfdbError::Annotation {
                offset: i,
                message: "indices not strictly increasing".into(),
            });
        }
        let delta = a.sample_index - time;
        if delta > 0x03ff {
            // the skip interval is signed, so long gaps take several
            let mut left = delta;
            while left > 0 {
                let skip = left.min(i32::MAX as usize) as u32;
                push(&mut out, SKIP, 0);
                out.extend_from_slice(&((skip >> 16) as u16).to_le_bytes());
                out.extend_from_slice(&(skip as u16).to_le_bytes());
                left -= skip as usize;
            }
            push(&mut out, a.code, 0);
        } else {
            push(&mut out, a.code, delta as u16);
        }
        if a.subtype != 0 {
            push(&mut out, SUB, a.subtype as u8 as u16);
        }
        if a.channel != 0 {
            push(&mut out, CHN, a.channel as u16);
        }
        if a.number != 0 {
            push(&mut out, NUM, a.number as u8 as u16);
        }
        if let Some(aux) = &a.aux {
            if aux.len() > 0x03ff {
                return Err(WfdbError::Annotation {
                    offset: i,
                    message: format!("{} aux bytes exceed the 1023-byte field", aux.len()),
                });
            }
            push(&mut out, AUX, aux.len() as u16);
            out.extend_from_slice(aux);
            if aux.len() & 1 == 1 {
                out.push(0);
            }
        }
        time = a.sample_index;
    }
    out.extend_from_slice(&[0, 0]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Hand-assembled words, independent of `write_annotations`.
    fn word(code: u16, field: u16) -> [u8; 2] {
        let w = code * 1024 + field;
        [(w % 256) as u8, (w / 256) as u8]
    }

    #[test]
    fn long_aux_round_trips() {
        let mut a = Annotation::new(10, 1);
        a.aux = Some(vec![7; 300]);
        let anns = vec![a.clone()];
        assert_eq!(
            parse_annotations(&write_annotations(&anns).unwrap(), None).unwrap(),
            anns
        );
        a.aux = Some(vec![7; 1024]);
        assert!(write_annotations(&[a]).is_err());
    }

    #[test]
    fn gaps_beyond_i32_round_trip() {
        let anns = vec![Annotation::new(5, 1), Annotation::new(5 + (3usize << 31), 5)];
        assert_eq!(
            parse_annotations(&write_annotations(&anns).unwrap(), None).unwrap(),
            anns
        );
    }

    #[test]
    fn terminator_only() {
        assert!(parse_annotations(&[0, 0], None).unwrap().is_empty());
        assert!(parse_annotations(&[], None).unwrap().is_empty());
    }

    #[test]
    fn two_beats() {
        let bytes = [word(1, 100), word(5, 145), word(0, 0)].concat();
        let anns = parse_annotations(&bytes, None).unwrap();
        assert_eq!(anns.len(), 2);
        assert_eq!((anns[0].sample_index, anns[0].symbol()), (100, "N"));
        assert_eq!((anns[1].sample_index, anns[1].symbol()), (245, "V"));
    }

    #[test]
    fn skip_and_modifiers() {
        let mut bytes = word(SKIP as u16, 0).to_vec();
        // 70000 = 0x0001_1170, high half first
        bytes.extend_from_slice(&[0x01, 0x00, 0x70, 0x11]);
        bytes.extend(word(28, 0));
        bytes.extend(word(AUX as u16, 3));
        bytes.extend(b"(N\0\0");
        bytes.extend(word(1, 10));
        bytes.extend(word(SUB as u16, 2));
        bytes.extend(word(0, 0));
        let anns = parse_annotations(&bytes, None).unwrap();
        assert_eq!(anns[0].sample_index, 70000);
        assert_eq!(anns[0].symbol(), "+");
        assert_eq!(anns[0].aux.as_deref(), Some(&b"(N\0"[..]));
        assert_eq!(anns[1].sample_index, 70010);
        assert_eq!(anns[1].subtype, 2);
    }

    #[test]
    fn decreasing_offset_rejected() {
        let mut bytes = word(1, 500).to_vec();
        bytes.extend(word(SKIP as u16, 0));
        bytes.extend((-200i32 as u32 >> 16).to_le_bytes()[..2].iter());
        bytes.extend((-200i32 as u32 as u16).to_le_bytes());
        bytes.extend(word(1, 0));
        assert!(matches!(
            parse_annotations(&bytes, None),
            Err(WfdbError::Annotation { .. })
        ));
    }

    #[test]
    fn zero_interval_rejected() {
        let bytes = [word(1, 5), word(1, 0)].concat();
        assert!(parse_annotations(&bytes, None).is_err());
    }

    #[test]
    fn index_past_record_end() {
        let bytes = [word(1, 100), word(0, 0)].concat();
        assert!(parse_annotations(&bytes, Some(100)).is_err());
        assert!(parse_annotations(&bytes, Some(101)).is_ok());
    }

    #[test]
    fn labels() {
        assert_eq!(label_beat(symbol_code("N").unwrap()), BeatLabel::Normal);
        assert_eq!(label_beat(symbol_code("V").unwrap()), BeatLabel::Arrhythmia);
        for s in [
            "L", "R", "A", "a", "J", "S", "E", "j", "F", "/", "f", "Q", "e", "n", "B", "r",
        ] {
            assert_eq!(label_beat(symbol_code(s).unwrap()), BeatLabel::Arrhythmia, "{s}");
        }
        for s in ["+", "~", "|", "\"", "x", "[", "]", "!"] {
            assert_eq!(label_beat(symbol_code(s).unwrap()), BeatLabel::Ignore, "{s}");
        }
    }

    fn annotation_list() -> impl Strategy<Value = Vec<Annotation>> {
        proptest::collection::vec((1usize..5000, 1u8..=49, any::<i8>(), 0u8..4), 0..40).prop_map(|items| {
            let mut t = 0;
            items
                .into_iter()
                .enumerate()
                .map(|(i, (gap, code, sub, chan))| {
                    t += if i == 0 { gap - 1 } else { gap };
                    Annotation {
                        subtype: sub,
                        channel: chan,
                        ..Annotation::new(t, code)
                    }
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn writer_reader_identity(anns in annotation_list()) {
            let bytes = write_annotations(&anns).unwrap();
            prop_assert_eq!(parse_annotations(&bytes, None).unwrap(), anns);
        }
    }
}
