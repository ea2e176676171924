//! Plain-text model files.
//!
//! ```text
//! mlp v1
//! layers 12 6 2
//! hidden_activation platanh
//! output_activation ntanh-pla
//! numeric fixed 24 12
//! hidden_weights ...
//! hidden_bias ...
//! output_weights ...
//! output_bias ...
//! ```
//!
//! Real models store each parameter with round-trip float formatting; fixed
//! models store raw integers.

use std::fmt::Write as _;

use crate::fixed::{to_fixed, FixedPoint, QFormat};

use super::{param_count, MlpModel, NnError, NumericMode};

const MAGIC: &str = "mlp v1";
const BLOCKS: [&str; 4] = ["hidden_weights", "hidden_bias", "output_weights", "output_bias"];

pub fn model_to_text(model: &MlpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "layers {} {} {}", model.inputs, model.hidden, model.outputs);
    let _ = writeln!(out, "hidden_activation {}", model.hidden_activation);
    let _ = writeln!(out, "output_activation {}", model.output_activation);
    match model.numeric {
        NumericMode::Real => out.push_str("numeric real\n"),
        NumericMode::Fixed(f) => {
            let _ = writeln!(out, "numeric fixed {} {}", f.total_bits(), f.frac_bits());
        }
    }
    let blocks = [
        model.hidden_weights(),
        model.hidden_bias(),
        model.output_weights(),
        model.output_bias(),
    ];
    for (name, values) in BLOCKS.iter().zip(blocks) {
        out.push_str(name);
        for &v in values {
            match model.numeric {
                NumericMode::Real => {
                    let _ = write!(out, " {v:?}");
                }
                NumericMode::Fixed(f) => {
                    let _ = write!(out, " {}", to_fixed(v, f).raw());
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn model_from_text(text: &str) -> Result<MlpModel, NnError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| {
        lines.next().ok_or_else(|| NnError::Format {
            line: 0,
            message: format!("missing `{what}` line"),
        })
    };
    let bad = |line: usize, message: String| NnError::Format { line, message };

    let (n, magic) = next("mlp v1")?;
    if magic != MAGIC {
        return Err(bad(n, format!("expected `{MAGIC}`, found `{magic}`")));
    }

    let (n, line) = next("layers")?;
    let sizes = keyed(line, "layers", n)?
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| bad(n, format!("bad layer size `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let [inputs, hidden, outputs] = sizes[..] else {
        return Err(bad(n, "expected three layer sizes".into()));
    };
    // guards against absurd allocations from hostile files
    if inputs.checked_mul(hidden).is_none_or(|v| v > 1 << 20) || hidden.checked_mul(outputs).is_none_or(|v| v > 1 << 20)
    {
        return Err(bad(n, "layers too large".into()));
    }

    let (n, line) = next("hidden_activation")?;
    let hidden_activation = single(line, "hidden_activation", n)?
        .parse()
        .map_err(|e: String| bad(n, e))?;
    let (n, line) = next("output_activation")?;
    let output_activation = single(line, "output_activation", n)?
        .parse()
        .map_err(|e: String| bad(n, e))?;

    let (n, line) = next("numeric")?;
    let numeric = match keyed(line, "numeric", n)?.as_slice() {
        ["real"] => NumericMode::Real,
        ["fixed", w, f] => {
            let w = w.parse().map_err(|_| bad(n, format!("bad word length `{w}`")))?;
            let f = f.parse().map_err(|_| bad(n, format!("bad fraction bits `{f}`")))?;
            NumericMode::Fixed(QFormat::new(w, f).map_err(|e| bad(n, e.to_string()))?)
        }
        _ => return Err(bad(n, format!("bad numeric line `{line}`"))),
    };

    let mut model = MlpModel::zeros(inputs, hidden, outputs, hidden_activation, output_activation)
        .map_err(|e| bad(n, e.to_string()))?;
    model.numeric = numeric;
    let expected_lens = [hidden * inputs, hidden, outputs * hidden, outputs];
    let mut params = Vec::with_capacity(param_count(inputs, hidden, outputs));
    for (name, len) in BLOCKS.iter().zip(expected_lens) {
        let (n, line) = next(name)?;
        let fields = keyed(line, name, n)?;
        if fields.len() != len {
            return Err(bad(n, format!("`{name}` needs {len} values, found {}", fields.len())));
        }
        for f in fields {
            let v = match numeric {
                NumericMode::Real => f
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(n, format!("bad value `{f}`")))?,
                NumericMode::Fixed(format) => {
                    let raw: i64 = f.parse().map_err(|_| bad(n, format!("bad raw value `{f}`")))?;
                    if !format.contains_raw(raw) {
                        return Err(bad(n, format!("raw value {raw} outside {format}")));
                    }
                    FixedPoint::from_raw(raw, format).to_f64()
                }
            };
            params.push(v);
        }
    }
    if let Some((n, line)) = lines.next() {
        return Err(bad(n, format!("unexpected trailing line `{line}`")));
    }
    model.set_params(params)?;
    model.validate()?;
    Ok(model)
}

fn keyed<'a>(line: &'a str, key: &str, n: usize) -> Result<Vec<&'a str>, NnError> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(NnError::Format {
            line: n,
            message: format!("expected `{key}` line, found `{line}`"),
        });
    }
    Ok(parts.collect())
}

fn single<'a>(line: &'a str, key: &str, n: usize) -> Result<&'a str, NnError> {
    match keyed(line, key, n)?.as_slice() {
        [v] => Ok(v),
        _ => Err(NnError::Format {
            line: n,
            message: format!("`{key}` takes one value"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{HiddenActivation, OutputActivation};
    use crate::nn::quantize_model;
    use proptest::prelude::*;

    #[test]
    fn fixed_model_stores_raw_integers() {
        let m = MlpModel::standard(HiddenActivation::PlaTanh, OutputActivation::NtanhPla);
        let n = m.params().len();
        let m = m.with_params((0..n).map(|i| i as f64 * 0.25 - 10.0).collect()).unwrap();
        let (q, _) = quantize_model(&m, QFormat::DEFAULT);
        let text = model_to_text(&q);
        assert!(text.contains("numeric fixed 24 12"));
        assert!(text.contains("hidden_weights -40960 -39936"));
        assert_eq!(model_from_text(&text).unwrap(), q);
    }

    #[test]
    fn rejects_malformed_files() {
        let good = model_to_text(&MlpModel::standard(HiddenActivation::Tanh, OutputActivation::Softmax));
        assert!(model_from_text(&good).is_ok());
        assert!(model_from_text("").is_err());
        assert!(model_from_text(&good.replace("mlp v1", "mlp v2")).is_err());
        assert!(model_from_text(&good.replace("layers 12 6 2", "layers 12 6")).is_err());
        assert!(model_from_text(&good.replace("softmax", "relu")).is_err());
        assert!(model_from_text(&good.replace("output_bias 0.0 0.0", "output_bias 0.0")).is_err());
        assert!(model_from_text(&good.replace("output_bias 0.0 0.0", "output_bias 0.0 NaN")).is_err());
        assert!(model_from_text(&format!("{good}extra\n")).is_err());
        let fixed = good.replace("numeric real", "numeric fixed 24 12");
        // fixed mode needs PLA activations
        assert!(model_from_text(&fixed).is_err());
        let bad_raw = model_to_text(
            &quantize_model(
                &MlpModel::standard(HiddenActivation::PlaTanh, OutputActivation::NtanhPla),
                QFormat::DEFAULT,
            )
            .0,
        )
        .replace("output_bias 0 0", "output_bias 0 99999999");
        assert!(model_from_text(&bad_raw).is_err());
    }

    proptest! {
        #[test]
        fn real_round_trip_is_lossless(params in proptest::collection::vec(-1e6f64..1e6, 92), hidden_pla in any::<bool>(), out in 0usize..3) {
            let hidden = if hidden_pla { HiddenActivation::PlaTanh } else { HiddenActivation::Tanh };
            let output = [OutputActivation::Softmax, OutputActivation::Ntanh, OutputActivation::NtanhPla][out];
            let m = MlpModel::standard(hidden, output).with_params(params).unwrap();
            prop_assert_eq!(model_from_text(&model_to_text(&m)).unwrap(), m);
        }
    }
}
