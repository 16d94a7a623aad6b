use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::spray::config::SprayConfig;
use crate::spray::Semispray;

use super::CliError;

/// Residual thresholds by check name, with per-run overrides.
#[derive(Clone, Debug, PartialEq)]
pub struct Thresholds {
    values: BTreeMap<&'static str, f64>,
}

/// Default thresholds. Checks marked `min` in [`AT_LEAST`] pass when the
/// measured value is at least the threshold.
pub const DEFAULT_THRESHOLDS: &[(&str, f64)] = &[
    ("bundle.canonical_projection_base", 0.0),
    ("bundle.canonical_projections_distinct", 0.0),
    ("bundle.ddpi_kappa", 0.0),
    ("bundle.dpi_pi_kappa", 0.0),
    ("bundle.kappa_squared", 0.0),
    ("bundle.pi_ddpi", 0.0),
    ("bundle.pi_dkappa", 0.0),
    ("bundle.pi_dpi", 0.0),
    ("bundle.representative_map", 1e-6),
    ("flow.determinism", 0.0),
    ("flow.dpi_projection", 1e-6),
    ("flow.flow_lift", 1e-4),
    ("flow.involution", 1e-6),
    ("flow.pi_projection", 1e-6),
    ("flow.rk4_order", 8.0),
    ("jacobi.chart", 1e-6),
    ("jacobi.field_equivalence", 1e-5),
    ("jacobi.liouville_j2", 1e-4),
    ("jacobi.riccati", 1e-5),
    ("jacobi.shape_operator_j1", 1e-4),
    ("jacobi.tensor_residual", 1e-6),
    ("jacobi.transversality_preserved", 1e-6),
    ("multidual.associativity", 1e-13),
    ("multidual.nilpotency", 0.0),
    ("spray.connection_fd", 1e-6),
    ("spray.endomorphism_fd", 1e-6),
    ("spray.lift_homogeneity", 1e-12),
    ("spray.lift_r1", 1e-13),
    ("spray.two_homogeneity", 1e-9),
    ("variation.base_slice", 0.0),
    ("variation.fd_order", 3.5),
    ("variation.forward_r1", 1e-5),
    ("variation.forward_r2", 1e-3),
    ("variation.projection_identity", 1e-5),
    ("variation.round_trip", 1e-3),
];

/// Checks whose measured value is a ratio that must reach the threshold.
pub const AT_LEAST: &[&str] = &["flow.rk4_order", "variation.fd_order"];

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            values: DEFAULT_THRESHOLDS.iter().copied().collect(),
        }
    }
}

impl Thresholds {
    /// Defaults overridden by `key=value` pairs; unknown keys are rejected.
    pub fn with_overrides(pairs: &[String]) -> Result<Self, CliError> {
        let mut t = Self::default();
        for pair in pairs {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("threshold `{pair}` is not key=value")))?;
            let key = key.trim();
            let slot = t
                .values
                .iter_mut()
                .find(|(k, _)| **k == key)
                .map(|(_, v)| v)
                .ok_or_else(|| CliError::Input(format!("unknown threshold key `{key}`")))?;
            *slot = value
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
                .ok_or_else(|| CliError::Input(format!("threshold `{key}` needs a non-negative number, got `{value}`")))?;
        }
        Ok(t)
    }

    pub fn get(&self, key: &str) -> f64 {
        self.values[key]
    }

    pub fn passes(&self, key: &str, measured: f64) -> bool {
        let thr = self.get(key);
        if AT_LEAST.contains(&key) {
            measured >= thr
        } else {
            measured <= thr
        }
    }
}

pub fn load_spray(path: &Path) -> Result<Semispray, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let cfg = SprayConfig::from_json(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    cfg.build().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// `"0.5, -1,2e-3"` → numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Input(format!("`{v}` is not a finite number")))
        })
        .collect()
}

/// Row-major matrix: rows separated by `;`, entries by `,`. A single row
/// of `n²` entries is also read row by row.
pub fn parse_matrix(text: &str, n: usize) -> Result<DMatrix<f64>, CliError> {
    parse_rect(text, n, n)
}

pub fn parse_rect(text: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, CliError> {
    let parsed: Vec<Vec<f64>> = text.split(';').map(parse_list).collect::<Result<_, _>>()?;
    let flat: Vec<f64> = if parsed.len() == 1 && parsed[0].len() == rows * cols {
        parsed[0].clone()
    } else if parsed.len() == rows && parsed.iter().all(|r| r.len() == cols) {
        parsed.concat()
    } else {
        return Err(CliError::Input(format!("matrix `{text}` is not {rows}×{cols}")));
    };
    Ok(DMatrix::from_row_slice(rows, cols, &flat))
}

pub fn parse_window(text: &str) -> Result<(f64, f64), CliError> {
    match parse_list(text)?.as_slice() {
        &[a, b] if a < b => Ok((a, b)),
        _ => Err(CliError::Input(format!("window `{text}` must be a,b with a < b"))),
    }
}

pub fn parse_indices(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| CliError::Input(format!("index `{v}` must be a positive integer")))
        })
        .collect()
}

/// Either the `n` base components (higher blocks zero) or all `2^r n`.
pub fn bundle_values(values: Option<&[f64]>, n: usize, r: usize, default_base: &[f64]) -> Result<Vec<f64>, CliError> {
    let total = n << r;
    let mut out = vec![0.0; total];
    match values {
        None => out[..n].copy_from_slice(default_base),
        Some(v) if v.len() == n => out[..n].copy_from_slice(v),
        Some(v) if v.len() == total => out.copy_from_slice(v),
        Some(v) => {
            return Err(CliError::Input(format!(
                "expected {n} or {total} values for a point of order {r}, got {}",
                v.len()
            )))
        }
    }
    Ok(out)
}
