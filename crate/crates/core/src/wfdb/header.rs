//! Record header (`.hea`) parsing and writing.
//!
//! The record line is `name[/segs] n_signals [fs[/counter[(base)]] [n_samples ...]]`;
//! each signal line is `file format[x..][:..][+..] [gain[(baseline)][/units] [adc_res [adc_zero [init [checksum [block [description]]]]]]]`.
//! Lines starting with `#` are comments.

use std::fmt::Write as _;

use super::WfdbError;

pub const DEFAULT_GAIN: f64 = 200.0;
pub const DEFAULT_FREQUENCY: f64 = 250.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format: u16,
    /// ADC units per physical unit (mV).
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: u8,
    pub adc_zero: i32,
    pub initial_value: i32,
    pub checksum: i32,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_frequency: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
}

fn header_err(line: usize, message: impl Into<String>) -> WfdbError {
    WfdbError::Header {
        line,
        message: message.into(),
    }
}

fn leading_number(field: &str) -> &str {
    let end = field
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && (c == '-' || c == '+')) || c == '.' || c == 'e' || c == 'E'))
        .map_or(field.len(), |(i, _)| i);
    &field[..end]
}

fn parse_record_line(line_no: usize, line: &str) -> Result<(String, usize, f64, usize), WfdbError> {
    let mut fields = line.split_whitespace();
    let name_field = fields
        .next()
        .ok_or_else(|| header_err(line_no, "missing record name"))?;
    if name_field.contains('/') {
        return Err(header_err(line_no, "multi-segment records are not supported"));
    }
    let n_signals: usize = fields
        .next()
        .ok_or_else(|| header_err(line_no, "missing signal count"))?
        .parse()
        .map_err(|_| header_err(line_no, "signal count is not an integer"))?;
    if n_signals == 0 {
        return Err(header_err(line_no, "record declares no signals"));
    }
    let fs = match fields.next() {
        Some(f) => {
            let text = f.split('/').next().unwrap_or(f);
            let fs: f64 = text
                .parse()
                .map_err(|_| header_err(line_no, format!("bad sampling frequency `{f}`")))?;
            if !(fs.is_finite() && fs > 0.0) {
                return Err(header_err(line_no, "sampling frequency must be positive"));
            }
            fs
        }
        None => DEFAULT_FREQUENCY,
    };
    let n_samples: usize = fields
        .next()
        .ok_or_else(|| header_err(line_no, "missing sample count"))?
        .parse()
        .map_err(|_| header_err(line_no, "sample count is not an integer"))?;
    Ok((name_field.to_string(), n_signals, fs, n_samples))
}

fn parse_signal_line(line_no: usize, line: &str) -> Result<SignalSpec, WfdbError> {
    let mut fields = line.split_whitespace();
    let file_name = fields
        .next()
        .ok_or_else(|| header_err(line_no, "missing file name"))?
        .to_string();
    let format_field = fields.next().ok_or_else(|| header_err(line_no, "missing format"))?;
    let digits: String = format_field.chars().take_while(|c| c.is_ascii_digit()).collect();
    let format: u16 = digits
        .parse()
        .map_err(|_| header_err(line_no, format!("bad format field `{format_field}`")))?;

    let mut gain = DEFAULT_GAIN;
    let mut baseline: Option<i32> = None;
    let mut units = String::from("mV");
    if let Some(g) = fields.next() {
        let (gain_part, unit_part) = match g.split_once('/') {
            Some((a, b)) => (a, Some(b)),
            None => (g, None),
        };
        let (value_part, base_part) = match gain_part.split_once('(') {
            Some((a, b)) => (
                a,
                Some(
                    b.strip_suffix(')')
                        .ok_or_else(|| header_err(line_no, "unclosed baseline"))?,
                ),
            ),
            None => (gain_part, None),
        };
        let parsed: f64 = leading_number(value_part)
            .parse()
            .map_err(|_| header_err(line_no, format!("bad gain `{g}`")))?;
        if !parsed.is_finite() || parsed < 0.0 {
            return Err(header_err(line_no, "gain must be nonnegative"));
        }
        if parsed > 0.0 {
            gain = parsed;
        }
        if let Some(b) = base_part {
            baseline = Some(
                b.parse()
                    .map_err(|_| header_err(line_no, format!("bad baseline `{b}`")))?,
            );
        }
        if let Some(u) = unit_part {
            units = u.to_string();
        }
    }
    let mut next_int = |name: &str| -> Result<Option<i64>, WfdbError> {
        match fields.next() {
            Some(v) => v
                .parse::<i64>()
                .map(Some)
                .map_err(|_| header_err(line_no, format!("bad {name} `{v}`"))),
            None => Ok(None),
        }
    };
    let adc_resolution = next_int("ADC resolution")?.unwrap_or(12);
    let adc_zero = next_int("ADC zero")?.unwrap_or(0);
    let initial_value = next_int("initial value")?.unwrap_or(adc_zero);
    let checksum = next_int("checksum")?.unwrap_or(0);
    let _block_size = next_int("block size")?;
    let description: Vec<&str> = fields.collect();

    let to_i32 = |v: i64, what: &str| i32::try_from(v).map_err(|_| header_err(line_no, format!("{what} out of range")));
    Ok(SignalSpec {
        file_name,
        format,
        gain,
        baseline: baseline.unwrap_or(to_i32(adc_zero, "ADC zero")?),
        units,
        adc_resolution: u8::try_from(adc_resolution).map_err(|_| header_err(line_no, "ADC resolution out of range"))?,
        adc_zero: to_i32(adc_zero, "ADC zero")?,
        initial_value: to_i32(initial_value, "initial value")?,
        checksum: to_i32(checksum, "checksum")?,
        description: description.join(" "),
    })
}

/// Parses header text. Every signal must be stored in format 212.
pub fn parse_header(text: &[u8]) -> Result<RecordHeader, WfdbError> {
    let text = std::str::from_utf8(text).map_err(|e| header_err(0, format!("not UTF-8: {e}")))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line_no, record_line) = lines.next().ok_or(WfdbError::Header {
        line: 0,
        message: "empty header".into(),
    })?;
    let (record_name, n_signals, sampling_frequency, n_samples) = parse_record_line(line_no, record_line)?;

    let mut signals = Vec::with_capacity(n_signals.min(64));
    for index in 0..n_signals {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| header_err(line_no, format!("expected {n_signals} signal lines, found {index}")))?;
        let spec = parse_signal_line(line_no, line)?;
        if spec.format != 212 {
            return Err(WfdbError::UnsupportedFormat {
                signal: index,
                format: spec.format,
            });
        }
        signals.push(spec);
    }
    Ok(RecordHeader {
        record_name,
        n_signals,
        sampling_frequency,
        n_samples,
        signals,
    })
}

pub fn write_header(header: &RecordHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {} {}",
        header.record_name, header.n_signals, header.sampling_frequency, header.n_samples
    );
    for s in &header.signals {
        let _ = write!(
            out,
            "{} {} {}({})/{} {} {} {} {} 0",
            s.file_name,
            s.format,
            s.gain,
            s.baseline,
            s.units,
            s.adc_resolution,
            s.adc_zero,
            s.initial_value,
            s.checksum
        );
        if !s.description.is_empty() {
            let _ = write!(out, " {}", s.description);
        }
        out.push('\n');
    }
    out
}
