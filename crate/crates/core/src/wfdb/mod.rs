//! Reading (and writing) MIT-BIH style records: a text header, format-212
//! sample data and a binary annotation file.

mod annotation;
mod format212;
mod header;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use annotation::{
    code_symbol, is_beat_code, label_beat, parse_annotations, symbol_code, write_annotations, Annotation, BeatLabel,
};
pub use format212::{decode_format212, deinterleave, encode_format212, packed_len, SAMPLE_MAX, SAMPLE_MIN};
pub use header::{parse_header, write_header, RecordHeader, SignalSpec};

#[derive(Debug, Error)]
pub enum WfdbError {
    #[error("header line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("signal {signal}: format {format} unsupported (only 212 is read)")]
    UnsupportedFormat { signal: usize, format: u16 },
    #[error("sample data truncated at byte {offset} ({needed} bytes needed)")]
    Truncated { offset: usize, needed: usize },
    #[error("sample {index} value {value} outside the 12-bit range")]
    SampleRange { index: usize, value: i16 },
    #[error("annotation stream at byte {offset}: {message}")]
    Annotation { offset: usize, message: String },
    #[error("record layout: {0}")]
    Layout(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    pub header: RecordHeader,
    /// One series per signal, each `header.n_samples` long.
    pub signals: Vec<Vec<i16>>,
    pub annotations: Vec<Annotation>,
}

impl EcgRecord {
    pub fn sampling_frequency(&self) -> f64 {
        self.header.sampling_frequency
    }

    pub fn name(&self) -> &str {
        &self.header.record_name
    }

    /// Signal `channel` as floating point with the ADC zero removed.
    pub fn channel_f64(&self, channel: usize) -> Option<Vec<f64>> {
        let zero = self.header.signals.get(channel)?.adc_zero as f64;
        self.signals
            .get(channel)
            .map(|s| s.iter().map(|&v| v as f64 - zero).collect())
    }

    /// Beat annotations with their binary labels, non-beat codes dropped.
    pub fn labelled_beats(&self) -> Vec<(usize, BeatLabel)> {
        self.annotations
            .iter()
            .map(|a| (a.sample_index, label_beat(a.code)))
            .filter(|&(_, l)| l != BeatLabel::Ignore)
            .collect()
    }
}

/// Builds a record from raw header, sample and (optional) annotation bytes.
pub fn decode_record(header_text: &[u8], samples: &[u8], annotations: Option<&[u8]>) -> Result<EcgRecord, WfdbError> {
    let header = parse_header(header_text)?;
    let first_file = &header.signals[0].file_name;
    if header.signals.iter().any(|s| &s.file_name != first_file) {
        return Err(WfdbError::Layout("signals spread across several files".into()));
    }
    let n_values = header
        .n_samples
        .checked_mul(header.n_signals)
        .ok_or_else(|| WfdbError::Layout("sample count overflows".into()))?;
    let flat = decode_format212(samples, n_values)?;
    let signals = deinterleave(&flat, header.n_signals);
    let annotations = match annotations {
        Some(bytes) => parse_annotations(bytes, Some(header.n_samples))?,
        None => Vec::new(),
    };
    Ok(EcgRecord {
        header,
        signals,
        annotations,
    })
}

fn read(path: &Path) -> Result<Vec<u8>, WfdbError> {
    fs::read(path).map_err(|source| WfdbError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `<base>.hea`, the data file it names, and `<base>.atr` if present.
/// `path` may be the record base name or the header file itself.
pub fn read_record(path: &Path) -> Result<EcgRecord, WfdbError> {
    let header_path = if path.extension().is_some_and(|e| e == "hea") {
        path.to_path_buf()
    } else {
        path.with_extension("hea")
    };
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let header_bytes = read(&header_path)?;
    let header = parse_header(&header_bytes)?;
    let samples = read(&dir.join(&header.signals[0].file_name))?;
    let atr = header_path.with_extension("atr");
    let annotations = if atr.exists() { Some(read(&atr)?) } else { None };
    decode_record(&header_bytes, &samples, annotations.as_deref())
}

/// Writes `<dir>/<name>.hea`, `.dat` and `.atr` for `record`. Returns the header path.
pub fn write_record(record: &EcgRecord, dir: &Path) -> Result<PathBuf, WfdbError> {
    let name = &record.header.record_name;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| WfdbError::Io { path, source }
    };
    if record.signals.len() != record.header.n_signals
        || record.signals.iter().any(|s| s.len() != record.header.n_samples)
    {
        return Err(WfdbError::Layout("signal lengths disagree with header".into()));
    }
    let mut flat = Vec::with_capacity(record.header.n_samples * record.header.n_signals);
    for i in 0..record.header.n_samples {
        flat.extend(record.signals.iter().map(|s| s[i]));
    }
    let mut header = record.header.clone();
    for s in &mut header.signals {
        s.file_name = format!("{name}.dat");
    }
    let hea = dir.join(format!("{name}.hea"));
    let dat = dir.join(format!("{name}.dat"));
    let atr = dir.join(format!("{name}.atr"));
    fs::write(&hea, write_header(&header)).map_err(io_err(&hea))?;
    fs::write(&dat, encode_format212(&flat)?).map_err(io_err(&dat))?;
    fs::write(&atr, write_annotations(&record.annotations)?).map_err(io_err(&atr))?;
    Ok(hea)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_record() -> EcgRecord {
        let header = parse_header(b"t 2 360 5\nt.dat 212 200 11 0\nt.dat 212 200 11 0\n").unwrap();
        EcgRecord {
            header,
            signals: vec![vec![1, -2, 3, 2047, -2048], vec![0, 10, 20, 30, 40]],
            annotations: vec![Annotation::new(1, 1), Annotation::new(3, 5)],
        }
    }

    #[test]
    fn files_round_trip() {
        let dir = std::env::temp_dir().join(format!("wfdb-rt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let rec = tiny_record();
        let hea = write_record(&rec, &dir).unwrap();
        let back = read_record(&hea).unwrap();
        assert_eq!(back, rec);
        assert_eq!(
            back.labelled_beats(),
            vec![(1, BeatLabel::Normal), (3, BeatLabel::Arrhythmia)]
        );
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn truncated_data_file() {
        let err = decode_record(b"t 2 360 5\nt.dat 212\nt.dat 212\n", &[0; 14], None).unwrap_err();
        assert!(matches!(err, WfdbError::Truncated { offset: 14, needed: 15 }));
    }

    #[test]
    fn annotation_past_end() {
        let ann = write_annotations(&[Annotation::new(7, 1)]).unwrap();
        assert!(decode_record(b"t 1 360 5\nt.dat 212\n", &[0; 8], Some(&ann)).is_err());
    }
}
