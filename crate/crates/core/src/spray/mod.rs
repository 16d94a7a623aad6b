//! Semisprays `S = y^i ∂/∂x^i − 2 G^i(x, y) ∂/∂y^i` given by coefficient
//! maps that can be evaluated over [`MultiDual`] jets.
//!
//! Evaluating `G` on jets whose blocks are the blocks of a point of `T^r M`
//! produces every block of the iterated complete lift `S^(r)` at once; the
//! same mechanism gives the nonlinear connection `N^i_j = ∂G^i/∂y^j` and the
//! Jacobi endomorphism `Φ`.

pub mod config;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::BundlePoint;
use crate::error::{GeomError, Result};
use crate::linalg;
use crate::multidual::MultiDual;

pub use config::{ChristoffelEntry, ChristoffelTerm, SprayConfig};

/// `(x, y) ↦ G(x, y)` over jets of a common order.
pub type CoefficientFn =
    dyn Fn(&[MultiDual], &[MultiDual]) -> Result<Vec<MultiDual>> + Send + Sync;

/// `x ↦ Γ^i_{jk}(x)`, flattened as `(i * n + j) * n + k`.
pub type ChristoffelFn = dyn Fn(&[MultiDual]) -> Result<Vec<MultiDual>> + Send + Sync;

pub type ConnectionCoefficients = DMatrix<f64>;
pub type JacobiEndomorphism = DMatrix<f64>;

/// Which builder produced a spray; informational only.
#[derive(Clone, Debug, PartialEq)]
pub enum SprayKind {
    Flat,
    ConstantCurvature { k: f64 },
    Christoffel,
    Damped { c: f64 },
    Custom,
}

/// Builder selector for [`build_spray`].
#[derive(Clone)]
pub enum SprayBuild {
    Flat,
    ConstantCurvature(f64),
    FromChristoffel(Arc<ChristoffelFn>),
    Custom(Arc<CoefficientFn>),
    Damped(f64),
}

#[derive(Clone)]
pub struct Semispray {
    n: usize,
    label: String,
    kind: SprayKind,
    g: Arc<CoefficientFn>,
}

impl fmt::Debug for Semispray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Semispray")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    Spray,
    SemisprayOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomogeneityReport {
    pub class: Homogeneity,
    pub max_violation: f64,
    pub samples_used: usize,
}

/// Relative violation of `G(x, λy) = λ² G(x, y)` below which a semispray is
/// classified as a spray.
pub const HOMOGENEITY_THRESHOLD: f64 = 1e-9;

pub fn build_spray(n: usize, kind: SprayBuild) -> Semispray {
    match kind {
        SprayBuild::Flat => Semispray::flat(n),
        SprayBuild::ConstantCurvature(k) => Semispray::constant_curvature(n, k),
        SprayBuild::FromChristoffel(gamma) => Semispray::from_christoffel_arc(n, "christoffel", gamma),
        SprayBuild::Custom(g) => Semispray {
            n,
            label: "custom".into(),
            kind: SprayKind::Custom,
            g,
        },
        SprayBuild::Damped(c) => Semispray::damped(n, c),
    }
}

impl Semispray {
    pub fn flat(n: usize) -> Self {
        Self {
            n,
            label: "flat".into(),
            kind: SprayKind::Flat,
            g: Arc::new(|x: &[MultiDual], _y: &[MultiDual]| {
                let order = x[0].order();
                Ok(vec![MultiDual::zero(order); x.len()])
            }),
        }
    }

    /// Geodesic spray of `g_ij = δ_ij / (1 + K|x|²/4)²`, the sphere (K > 0),
    /// Euclidean space (K = 0) or Poincaré ball (K < 0) of curvature `K`.
    ///
    /// With `σ = −ln(1 + K|x|²/4)` the coefficients are
    /// `G^i = y^i ⟨∂σ, y⟩ − ½ |y|² ∂_i σ`.
    pub fn constant_curvature(n: usize, k: f64) -> Self {
        let g = move |x: &[MultiDual], y: &[MultiDual]| -> Result<Vec<MultiDual>> {
            let order = x[0].order();
            let mut r2 = MultiDual::zero(order);
            for xi in x {
                r2 = &r2 + &(xi * xi);
            }
            let denom = &(r2 * (k / 4.0)) + 1.0;
            if denom.value() <= 0.0 {
                return Err(GeomError::DomainError(format!(
                    "point outside the chart of curvature {k} (1 + K|x|²/4 = {})",
                    denom.value()
                )));
            }
            let inv = denom.recip()?;
            // ∂_i σ = −(K/2) x_i / (1 + K|x|²/4)
            let dsigma: Vec<MultiDual> = x.iter().map(|xi| &(xi * &inv) * (-k / 2.0)).collect();
            let mut dot = MultiDual::zero(order);
            let mut yy = MultiDual::zero(order);
            for (ds, yi) in dsigma.iter().zip(y) {
                dot = &dot + &(ds * yi);
                yy = &yy + &(yi * yi);
            }
            let half_yy = yy * 0.5;
            Ok(y.iter()
                .zip(&dsigma)
                .map(|(yi, ds)| &(yi * &dot) - &(&half_yy * ds))
                .collect())
        };
        Self {
            n,
            label: format!("constant_curvature({k})"),
            kind: SprayKind::ConstantCurvature { k },
            g: Arc::new(g),
        }
    }

    /// `G^i = ½ Γ^i_{jk}(x) y^j y^k`.
    pub fn from_christoffel(
        n: usize,
        label: impl Into<String>,
        gamma: impl Fn(&[MultiDual]) -> Result<Vec<MultiDual>> + Send + Sync + 'static,
    ) -> Self {
        Self::from_christoffel_arc(n, label, Arc::new(gamma))
    }

    fn from_christoffel_arc(n: usize, label: impl Into<String>, gamma: Arc<ChristoffelFn>) -> Self {
        let g = move |x: &[MultiDual], y: &[MultiDual]| -> Result<Vec<MultiDual>> {
            let order = x[0].order();
            let table = gamma(x)?;
            if table.len() != n * n * n {
                return Err(GeomError::DimensionMismatch {
                    expected: n * n * n,
                    got: table.len(),
                });
            }
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let mut acc = MultiDual::zero(order);
                for j in 0..n {
                    for k in 0..n {
                        let c = &table[(i * n + j) * n + k];
                        if c.blocks().iter().any(|&b| b != 0.0) {
                            acc = &acc + &(&(c * &y[j]) * &y[k]);
                        }
                    }
                }
                out.push(acc * 0.5);
            }
            Ok(out)
        };
        Self {
            n,
            label: label.into(),
            kind: SprayKind::Christoffel,
            g: Arc::new(g),
        }
    }

    /// `G^i = c y^i`: geodesics solve `ẍ + 2c ẋ = 0`. Not homogeneous of
    /// degree two unless `c = 0`.
    pub fn damped(n: usize, c: f64) -> Self {
        Self {
            n,
            label: format!("damped({c})"),
            kind: SprayKind::Damped { c },
            g: Arc::new(move |_x: &[MultiDual], y: &[MultiDual]| {
                Ok(y.iter().map(|yi| yi * c).collect())
            }),
        }
    }

    pub fn custom(
        n: usize,
        label: impl Into<String>,
        g: impl Fn(&[MultiDual], &[MultiDual]) -> Result<Vec<MultiDual>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            label: label.into(),
            kind: SprayKind::Custom,
            g: Arc::new(g),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &SprayKind {
        &self.kind
    }

    pub fn eval(&self, x: &[MultiDual], y: &[MultiDual]) -> Result<Vec<MultiDual>> {
        if x.len() != self.n || y.len() != self.n {
            return Err(GeomError::DimensionMismatch {
                expected: self.n,
                got: if x.len() != self.n { x.len() } else { y.len() },
            });
        }
        let out = (self.g)(x, y)?;
        if out.len() != self.n {
            return Err(GeomError::DimensionMismatch {
                expected: self.n,
                got: out.len(),
            });
        }
        Ok(out)
    }

    pub fn eval_real(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let xs: Vec<MultiDual> = x.iter().map(|&v| MultiDual::real(v)).collect();
        let ys: Vec<MultiDual> = y.iter().map(|&v| MultiDual::real(v)).collect();
        Ok(self.eval(&xs, &ys)?.iter().map(MultiDual::value).collect())
    }

    /// Acceleration blocks of `S^(r)` at position `pos` and velocity `vel`,
    /// both flat block arrays of a point of `T^r M`.
    pub(crate) fn acceleration(&self, r: usize, pos: &[f64], vel: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let blocks = 1usize << r;
        let jets = |data: &[f64]| -> Vec<MultiDual> {
            (0..n)
                .map(|i| {
                    let b = (0..blocks).map(|m| data[m * n + i]).collect();
                    MultiDual::with_cap(r, b, usize::MAX).expect("block count")
                })
                .collect()
        };
        let g = self.eval(&jets(pos), &jets(vel))?;
        let mut out = vec![0.0; n * blocks];
        for (i, gi) in g.iter().enumerate() {
            for (m, b) in gi.blocks().iter().enumerate() {
                out[m * n + i] = -2.0 * b;
            }
        }
        Ok(out)
    }

    /// The acceleration of `S^(r)` at the state `(ξ, η)`: the blocks of
    /// `−2 G(Σ ξ_A ε_A, Σ η_A ε_A)`. For `r = 1` these are
    /// `(−2 G^v, −2 G^c)`.
    pub fn lifted_rhs(&self, r: usize, xi: &BundlePoint, eta: &BundlePoint) -> Result<BundlePoint> {
        for p in [xi, eta] {
            if p.order() != r || p.dim() != self.n {
                return Err(GeomError::DimensionMismatch {
                    expected: self.n << r,
                    got: p.as_slice().len(),
                });
            }
        }
        if linalg::norm(eta.block(0)) == 0.0 {
            return Err(GeomError::OutsideSlashed);
        }
        let acc = self.acceleration(r, xi.as_slice(), eta.as_slice())?;
        BundlePoint::new(self.n, r, acc)
    }

    /// `N^i_j = ∂G^i/∂y^j` at `(x, y)`; column `j` is the `ε`-part of
    /// `G(x, y + ε e_j)`.
    pub fn connection(&self, x: &[f64], y: &[f64]) -> Result<ConnectionCoefficients> {
        self.check_point(x, y)?;
        let n = self.n;
        let xs: Vec<MultiDual> = x.iter().map(|&v| MultiDual::constant(1, v)).collect();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let ys: Vec<MultiDual> = y
                .iter()
                .enumerate()
                .map(|(k, &v)| jet1(v, if k == j { 1.0 } else { 0.0 }))
                .collect();
            let g = self.eval(&xs, &ys)?;
            for i in 0..n {
                out[(i, j)] = g[i].block(1);
            }
        }
        Ok(out)
    }

    /// `Φ^i_j = 2 ∂G^i/∂x^j − S(N^i_j) − N^i_r N^r_j` at `(x, y)`, where
    /// `S(f) = y^k ∂f/∂x^k − 2 G^k ∂f/∂y^k`.
    pub fn jacobi_endomorphism(&self, x: &[f64], y: &[f64]) -> Result<JacobiEndomorphism> {
        Ok(self.connection_and_endomorphism(x, y)?.1)
    }

    /// `(N, Φ)` at `(x, y)` from one pass of second-order jets.
    pub fn connection_and_endomorphism(
        &self,
        x: &[f64],
        y: &[f64],
    ) -> Result<(ConnectionCoefficients, JacobiEndomorphism)> {
        self.check_point(x, y)?;
        let n = self.n;
        let g0 = self.eval_real(x, y)?;
        let mut nmat = DMatrix::zeros(n, n);
        let mut snmat = DMatrix::zeros(n, n);
        let mut gx = DMatrix::zeros(n, n);
        // ε1 moves along S = (y, −2G), ε2 along ∂/∂y^j:
        // block {2} = N_{·j}, block {1,2} = S(N_{·j}).
        let xs: Vec<MultiDual> = x
            .iter()
            .zip(y)
            .map(|(&xv, &yv)| MultiDual::new(2, vec![xv, yv, 0.0, 0.0]).unwrap())
            .collect();
        for j in 0..n {
            let ys: Vec<MultiDual> = (0..n)
                .map(|k| {
                    let e = if k == j { 1.0 } else { 0.0 };
                    MultiDual::new(2, vec![y[k], -2.0 * g0[k], e, 0.0]).unwrap()
                })
                .collect();
            let g = self.eval(&xs, &ys)?;
            for i in 0..n {
                nmat[(i, j)] = g[i].block(2);
                snmat[(i, j)] = g[i].block(3);
            }
            let xj: Vec<MultiDual> = x
                .iter()
                .enumerate()
                .map(|(k, &v)| jet1(v, if k == j { 1.0 } else { 0.0 }))
                .collect();
            let yj: Vec<MultiDual> = y.iter().map(|&v| MultiDual::constant(1, v)).collect();
            let g = self.eval(&xj, &yj)?;
            for i in 0..n {
                gx[(i, j)] = g[i].block(1);
            }
        }
        let phi = gx * 2.0 - snmat - &nmat * &nmat;
        Ok((nmat, phi))
    }

    /// Sample `G(x, λy)` against `λ² G(x, y)` for `λ ∈ {0.5, 2, 3}` at
    /// `samples` seeded random points near the origin.
    pub fn classify_homogeneity(&self, samples: usize, seed: u64) -> HomogeneityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        let mut used = 0;
        let mut attempts = 0;
        while used < samples.max(1) && attempts < 100 * samples.max(1) {
            attempts += 1;
            let x: Vec<f64> = (0..self.n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let y: Vec<f64> = (0..self.n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if linalg::norm(&y) < 0.1 {
                continue;
            }
            let Ok(base) = self.eval_real(&x, &y) else {
                continue;
            };
            for lambda in [0.5, 2.0, 3.0] {
                let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
                let Ok(scaled) = self.eval_real(&x, &ly) else {
                    continue;
                };
                let want: Vec<f64> = base.iter().map(|v| lambda * lambda * v).collect();
                let diff = linalg::max_abs_diff(&scaled, &want);
                let size = want.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let rel = if diff == 0.0 { 0.0 } else { diff / size.max(f64::MIN_POSITIVE) };
                worst = worst.max(rel);
            }
            used += 1;
        }
        HomogeneityReport {
            class: if worst < HOMOGENEITY_THRESHOLD {
                Homogeneity::Spray
            } else {
                Homogeneity::SemisprayOnly
            },
            max_violation: worst,
            samples_used: used,
        }
    }

    pub fn is_spray(&self) -> bool {
        self.classify_homogeneity(16, 0x5eed).class == Homogeneity::Spray
    }

    fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.n {
            return Err(GeomError::DimensionMismatch {
                expected: self.n,
                got: x.len().min(y.len()),
            });
        }
        if linalg::norm(y) == 0.0 {
            return Err(GeomError::OutsideSlashed);
        }
        Ok(())
    }
}

fn jet1(value: f64, slope: f64) -> MultiDual {
    MultiDual::new(1, vec![value, slope]).unwrap()
}
