use serde::{Deserialize, Serialize};

use super::Semispray;
use crate::error::{GeomError, Result};
use crate::multidual::MultiDual;

/// JSON description of a spray.
///
/// ```json
/// {"kind": "constant_curvature", "n": 2, "K": 1.0}
/// {"kind": "christoffel", "n": 2, "christoffel": [
///     {"i": 0, "j": 1, "k": 1, "terms": [{"pow": [1, 0], "coef": -1.0}]}
/// ]}
/// ```
///
/// Christoffel indices are 0-based. Entries are used as given, so a
/// symmetric connection must list both `(j, k)` and `(k, j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprayConfig {
    pub kind: String,
    pub n: usize,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub christoffel: Option<Vec<ChristoffelEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub terms: Vec<ChristoffelTerm>,
}

/// `coef · Π x_m^{pow[m]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChristoffelTerm {
    pub pow: Vec<u32>,
    pub coef: f64,
}

impl SprayConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            GeomError::Config(format!(
                "line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(GeomError::Config("n must be at least 1".into()));
        }
        let allowed: &[&str] = match self.kind.as_str() {
            "flat" => &[],
            "constant_curvature" => &["K"],
            "damped" => &["c"],
            "christoffel" => &["christoffel"],
            other => return Err(GeomError::Config(format!("unknown spray kind `{other}`"))),
        };
        let present = [
            ("K", self.k.is_some()),
            ("c", self.c.is_some()),
            ("christoffel", self.christoffel.is_some()),
        ];
        for (key, set) in present {
            let wanted = allowed.contains(&key);
            if set && !wanted {
                return Err(GeomError::Config(format!(
                    "key `{key}` is not used by kind `{}`",
                    self.kind
                )));
            }
            if !set && wanted {
                return Err(GeomError::Config(format!(
                    "kind `{}` requires key `{key}`",
                    self.kind
                )));
            }
        }
        for v in [self.k, self.c].into_iter().flatten() {
            if !v.is_finite() {
                return Err(GeomError::Config("parameters must be finite".into()));
            }
        }
        if let Some(table) = &self.christoffel {
            let n = self.n;
            for e in table {
                if e.i >= n || e.j >= n || e.k >= n {
                    return Err(GeomError::Config(format!(
                        "christoffel index ({}, {}, {}) out of range for n = {n}",
                        e.i, e.j, e.k
                    )));
                }
                for t in &e.terms {
                    if t.pow.len() != n {
                        return Err(GeomError::Config(format!(
                            "exponent vector of length {} for n = {n}",
                            t.pow.len()
                        )));
                    }
                    if !t.coef.is_finite() {
                        return Err(GeomError::Config("coefficients must be finite".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Semispray> {
        self.validate()?;
        let n = self.n;
        let mut spray = match self.kind.as_str() {
            "flat" => Semispray::flat(n),
            "constant_curvature" => Semispray::constant_curvature(n, self.k.unwrap_or(0.0)),
            "damped" => Semispray::damped(n, self.c.unwrap_or(0.0)),
            "christoffel" => {
                let table = self.christoffel.clone().unwrap_or_default();
                Semispray::from_christoffel(n, "christoffel", move |x: &[MultiDual]| {
                    polynomial_table(n, &table, x)
                })
            }
            other => return Err(GeomError::Config(format!("unknown spray kind `{other}`"))),
        };
        if let Some(label) = &self.label {
            spray.label = label.clone();
        }
        Ok(spray)
    }
}

fn polynomial_table(n: usize, table: &[ChristoffelEntry], x: &[MultiDual]) -> Result<Vec<MultiDual>> {
    let order = x[0].order();
    let mut out = vec![MultiDual::zero(order); n * n * n];
    for e in table {
        let slot = &mut out[(e.i * n + e.j) * n + e.k];
        for t in &e.terms {
            let mut mono = MultiDual::constant(order, t.coef);
            for (xm, &p) in x.iter().zip(&t.pow) {
                if p > 0 {
                    mono = &mono * &xm.powi(p as i32)?;
                }
            }
            *slot = &*slot + &mono;
        }
    }
    Ok(out)
}
