use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use super::{BeatWindow, FeatureError};

/// Relative eigenvalue below which a direction counts as absent.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` rows of length `dim`, row-major.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of the sample covariance, descending.
    pub explained_variance: Vec<f64>,
    /// Number of leading components with nonzero variance.
    pub rank: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// `components * (x - mean)`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim(), "window length differs from model");
        self.components
            .iter()
            .map(|row| {
                row.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(c, (v, m))| c * (v - m))
                    .sum()
            })
            .collect()
    }

    pub fn project_window(&self, window: &BeatWindow) -> Vec<f64> {
        self.project(&window.samples)
    }

    /// `mean + components^T * coefficients`.
    pub fn reconstruct(&self, coefficients: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (row, &c) in self.components.iter().zip(coefficients) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += c * v;
            }
        }
        out
    }

    /// Keeps only the first `k` components.
    pub fn truncated(&self, k: usize) -> PcaModel {
        let k = k.min(self.n_components());
        PcaModel {
            mean: self.mean.clone(),
            components: self.components[..k].to_vec(),
            explained_variance: self.explained_variance[..k].to_vec(),
            rank: self.rank.min(k),
        }
    }

    /// Scale applied to projections so they land roughly in [-1, 1].
    pub fn projection_scale(&self) -> f64 {
        match self.explained_variance.first() {
            Some(&v) if v > 0.0 => 1.0 / (4.0 * v.sqrt()),
            _ => 1.0,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "pca v1");
        let _ = writeln!(out, "dim {}", self.dim());
        let _ = writeln!(out, "components {}", self.n_components());
        let _ = writeln!(out, "rank {}", self.rank);
        write_row(&mut out, "mean", &self.mean);
        write_row(&mut out, "variance", &self.explained_variance);
        for row in &self.components {
            write_row(&mut out, "component", row);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<PcaModel, FeatureError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let bad = |line: usize, msg: &str| FeatureError::Format {
            line,
            message: msg.to_string(),
        };
        let mut next = |key: &str| -> Result<(usize, Vec<&str>), FeatureError> {
            let (n, l) = lines.next().ok_or_else(|| bad(0, &format!("missing `{key}` line")))?;
            let mut fields = l.split_whitespace();
            if fields.next() != Some(key) {
                return Err(bad(n, &format!("expected `{key}`")));
            }
            Ok((n, fields.collect()))
        };
        let (n, version) = next("pca")?;
        if version != ["v1"] {
            return Err(bad(n, "unsupported version"));
        }
        let scalar = |(n, f): (usize, Vec<&str>)| -> Result<usize, FeatureError> {
            match f.as_slice() {
                [v] => v.parse().map_err(|_| bad(n, "expected an integer")),
                _ => Err(bad(n, "expected one value")),
            }
        };
        let dim = scalar(next("dim")?)?;
        let k = scalar(next("components")?)?;
        let rank = scalar(next("rank")?)?;
        if dim == 0 || k > dim || rank > k {
            return Err(bad(0, "inconsistent dimensions"));
        }
        let floats = |(n, f): (usize, Vec<&str>), len: usize| -> Result<Vec<f64>, FeatureError> {
            if f.len() != len {
                return Err(bad(n, &format!("expected {len} values, found {}", f.len())));
            }
            f.iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| bad(n, "bad number"))
                })
                .collect()
        };
        let mean = floats(next("mean")?, dim)?;
        let explained_variance = floats(next("variance")?, k)?;
        let components = (0..k)
            .map(|_| floats(next("component")?, dim))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PcaModel {
            mean,
            components,
            explained_variance,
            rank,
        })
    }
}

fn write_row(out: &mut String, key: &str, values: &[f64]) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}

/// Fits a `k`-component PCA to equal-length rows.
///
/// Components are the leading eigenvectors of the sample covariance (divisor
/// `n - 1`), sorted by descending eigenvalue, each signed so its
/// largest-magnitude entry is positive. Directions beyond the covariance rank
/// are returned as zero rows with zero variance.
pub fn fit_pca_rows(rows: &[&[f64]], k: usize) -> Result<PcaModel, FeatureError> {
    let n = rows.len();
    let dim = rows.first().map_or(0, |r| r.len());
    if k == 0 || k > dim.max(1) {
        return Err(FeatureError::InvalidComponents { k, dim });
    }
    if n < k || n < 2 {
        return Err(FeatureError::TooFewWindows {
            have: n,
            need: k.max(2),
        });
    }
    if rows.iter().any(|r| r.len() != dim) {
        return Err(FeatureError::RaggedInput);
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    let mut rank = 0;
    for &idx in order.iter().take(k) {
        let value = eig.eigenvalues[idx];
        if top <= 0.0 || value <= RANK_TOLERANCE * top {
            components.push(vec![0.0; dim]);
            explained_variance.push(0.0);
            continue;
        }
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(value);
        rank += 1;
    }
    if rank < k {
        log::warn!("covariance rank {rank} below requested {k} components; padding with zero components");
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        rank,
    })
}

pub fn fit_pca(windows: &[BeatWindow], k: usize) -> Result<PcaModel, FeatureError> {
    let rows: Vec<&[f64]> = windows.iter().map(|w| w.samples.as_slice()).collect();
    fit_pca_rows(&rows, k)
}
