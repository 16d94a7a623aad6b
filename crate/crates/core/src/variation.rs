//! Multi-parameter geodesic variations and their mixed parameter
//! derivatives.
//!
//! A variation is given by its initial data: `s ↦ (x₀(s), v₀(s))` at a
//! reference time. Every `t ↦ V(t, s)` is the geodesic with that initial
//! condition. Mixed derivatives in `s` are geodesics of the lifted sprays
//! `S^(r)`, and conversely every geodesic of `S^(r)` arises this way.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::bundle::{self, BundlePoint};
use crate::error::{GeomError, Result};
use crate::flow::{self, GeodesicRecord, SLASHED_THRESHOLD};
use crate::linalg;
use crate::spray::Semispray;

/// Largest number of parameter derivatives taken by finite differences.
pub const MAX_DEPTH: usize = 3;
pub const DEFAULT_HS: f64 = 1e-3;

/// `s ↦ (x₀(s), v₀(s))`.
pub type InitFn = dyn Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync;

#[derive(Clone)]
pub struct GeodesicVariation {
    pub spray: Semispray,
    pub k: usize,
    pub eps: f64,
    /// Time at which `init` prescribes the initial condition.
    pub t_ref: f64,
    pub t_span: (f64, f64),
    pub step: f64,
    init: Arc<InitFn>,
}

impl fmt::Debug for GeodesicVariation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicVariation")
            .field("spray", &self.spray.label())
            .field("k", &self.k)
            .field("eps", &self.eps)
            .field("t_ref", &self.t_ref)
            .field("t_span", &self.t_span)
            .field("step", &self.step)
            .finish_non_exhaustive()
    }
}

/// Samples of `∂_{s^{i₁}} ⋯ ∂_{s^{i_r}} V |_{s=0}` and of its time
/// derivative, as points of `T^r M`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedCurve {
    pub r: usize,
    pub t_grid: Vec<f64>,
    pub values: Vec<BundlePoint>,
    pub velocities: Vec<BundlePoint>,
}

/// Finite-difference settings for [`mixed_derivative_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub hs: f64,
    /// Combine steps `hs` and `hs/2` as `(4 D(hs/2) − D(hs)) / 3`.
    pub richardson: bool,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            hs: DEFAULT_HS,
            richardson: true,
        }
    }
}

impl GeodesicVariation {
    pub fn new(
        spray: Semispray,
        k: usize,
        eps: f64,
        t_span: (f64, f64),
        step: f64,
        init: impl Fn(&[f64]) -> Result<(Vec<f64>, Vec<f64>)> + Send + Sync + 'static,
    ) -> Self {
        Self {
            spray,
            k,
            eps,
            t_ref: t_span.0,
            t_span,
            step,
            init: Arc::new(init),
        }
    }

    pub fn with_reference_time(mut self, t_ref: f64) -> Self {
        self.t_ref = t_ref;
        self
    }

    pub fn init(&self, s: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if s.len() != self.k {
            return Err(GeomError::DimensionMismatch {
                expected: self.k,
                got: s.len(),
            });
        }
        (self.init)(s)
    }

    /// The geodesic `t ↦ V(t, s)` over the whole span.
    pub fn geodesic(&self, s: &[f64]) -> Result<GeodesicRecord> {
        if s.iter().any(|v| v.abs() > self.eps) {
            return Err(GeomError::InvalidArgument(format!(
                "parameter {s:?} outside (−{0}, {0})",
                self.eps
            )));
        }
        let truncated = |reason: String| GeomError::TruncatedVariation {
            s: s.to_vec(),
            reason,
        };
        let (x0, v0) = self.init(s)?;
        let g = flow::integrate_geodesic_from(
            &self.spray,
            0,
            (&BundlePoint::base(&x0), &BundlePoint::base(&v0)),
            self.t_ref,
            self.t_span,
            self.step,
        )
        .map_err(|e| truncated(e.to_string()))?;
        if let Some(reason) = &g.exit {
            return Err(truncated(reason.to_string()));
        }
        Ok(g)
    }

    pub fn base_geodesic(&self) -> Result<GeodesicRecord> {
        self.geodesic(&vec![0.0; self.k])
    }

    /// `V(t, s)`.
    pub fn evaluate(&self, t: f64, s: &[f64]) -> Result<Vec<f64>> {
        let (t0, t1) = self.t_span;
        if t < t0 || t > t1 {
            return Err(GeomError::InvalidArgument(format!("t = {t} outside [{t0}, {t1}]")));
        }
        let (x0, v0) = self.init(s)?;
        let xi = BundlePoint::tangent(&x0, &v0)?;
        let end = flow::flow_map(&self.spray, 0, &xi, t - self.t_ref, self.step).map_err(|e| {
            GeomError::TruncatedVariation {
                s: s.to_vec(),
                reason: e.to_string(),
            }
        })?;
        Ok(end.block(0).to_vec())
    }
}

impl DerivedCurve {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    /// View as a trajectory of `S^(r)`.
    pub fn to_record(&self, spray_label: &str) -> GeodesicRecord {
        let len = self.t_grid.len();
        let step = if len > 1 {
            (self.t_grid[len - 1] - self.t_grid[0]) / (len - 1) as f64
        } else {
            0.0
        };
        GeodesicRecord {
            spray_label: spray_label.to_string(),
            r: self.r,
            step,
            t_grid: self.t_grid.clone(),
            pos: self.values.clone(),
            vel: self.velocities.clone(),
            exit: None,
        }
    }

    /// Index of the grid point nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &ti) in self.t_grid.iter().enumerate() {
            if (ti - t).abs() < (self.t_grid[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

fn check_indices(v: &GeodesicVariation, indices: &[usize]) -> Result<()> {
    if indices.len() > MAX_DEPTH {
        return Err(GeomError::DepthCap {
            depth: indices.len(),
            cap: MAX_DEPTH,
        });
    }
    for &i in indices {
        if i == 0 || i > v.k {
            return Err(GeomError::BadIndex { index: i, order: v.k });
        }
    }
    Ok(())
}

/// `∂_{s^{i₁}} ⋯ ∂_{s^{i_r}} V |_{s=0}` with the default stencil.
pub fn mixed_derivative(v: &GeodesicVariation, indices: &[usize]) -> Result<DerivedCurve> {
    mixed_derivative_with(v, indices, Stencil::default())
}

/// Mixed central differences of the variation. Bit `j` of the result is
/// the derivative along `s^{i_{r−j+1}}`, so the innermost derivative
/// `∂_{s^{i_r}}` is bit 1. Each listed derivative gets its own auxiliary
/// parameter, so repeated indices are allowed.
pub fn mixed_derivative_with(
    v: &GeodesicVariation,
    indices: &[usize],
    stencil: Stencil,
) -> Result<DerivedCurve> {
    check_indices(v, indices)?;
    let r = indices.len();
    let hs = stencil.hs;
    if !(hs > 0.0) || r as f64 * hs > v.eps {
        return Err(GeomError::InvalidArgument(format!(
            "parameter step {hs} must be positive with depth × step within eps = {}",
            v.eps
        )));
    }
    // stencil offsets in units of hs/2: {−2, −1, 0, 1, 2}, or {−2, 0, 2}
    let offsets: &[i32] = if stencil.richardson { &[-2, -1, 0, 1, 2] } else { &[-2, 0, 2] };
    let m = offsets.len();
    let points: Vec<Vec<i32>> = (0..m.pow(r as u32))
        .map(|mut code| {
            (0..r)
                .map(|_| {
                    let o = offsets[code % m];
                    code /= m;
                    o
                })
                .collect()
        })
        .collect();
    let param = |sigma: &[i32]| -> Vec<f64> {
        let mut s = vec![0.0; v.k];
        for (j, &o) in sigma.iter().enumerate() {
            // σ_{j+1} ↔ bit j+1 ↔ index i_{r−j}
            s[indices[r - 1 - j] - 1] += o as f64 * hs / 2.0;
        }
        s
    };
    let runs: Vec<GeodesicRecord> = points
        .par_iter()
        .map(|sigma| v.geodesic(&param(sigma)))
        .collect::<Result<_>>()?;
    let lookup = |sigma: &[i32]| -> &GeodesicRecord {
        let mut code = 0;
        for &o in sigma.iter().rev() {
            code = code * m + offsets.iter().position(|&x| x == o).unwrap();
        }
        &runs[code]
    };
    let n = v.spray.dim();
    let len = runs[0].len();
    let blocks = 1usize << r;

    // D_A at half-step multiple `w` (w = 2 ↔ hs, w = 1 ↔ hs/2)
    let difference = |w: i32, mask: usize, i: usize, velocity: bool| -> Vec<f64> {
        let active: Vec<usize> = (0..r).filter(|&j| mask & (1 << j) != 0).collect();
        let mut acc = vec![0.0; n];
        for signs in 0..1usize << active.len() {
            let mut sigma = vec![0; r];
            let mut sign = 1.0;
            for (b, &j) in active.iter().enumerate() {
                if signs & (1 << b) != 0 {
                    sigma[j] = w;
                } else {
                    sigma[j] = -w;
                    sign = -sign;
                }
            }
            let g = lookup(&sigma);
            let p = if velocity { &g.vel[i] } else { &g.pos[i] };
            for (a, x) in acc.iter_mut().zip(p.as_slice()) {
                *a += sign * x;
            }
        }
        let h = w as f64 * hs / 2.0;
        let scale = (2.0 * h).powi(active.len() as i32);
        acc.iter().map(|a| a / scale).collect()
    };
    let assemble = |i: usize, velocity: bool| -> BundlePoint {
        let mut data = Vec::with_capacity(n * blocks);
        for mask in 0..blocks {
            let coarse = difference(2, mask, i, velocity);
            if stencil.richardson && mask != 0 {
                let fine = difference(1, mask, i, velocity);
                data.extend(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0));
            } else {
                data.extend(coarse);
            }
        }
        BundlePoint::new(n, r, data).unwrap()
    };
    Ok(DerivedCurve {
        r,
        t_grid: runs[0].t_grid.clone(),
        values: (0..len).map(|i| assemble(i, false)).collect(),
        velocities: (0..len).map(|i| assemble(i, true)).collect(),
    })
}

/// Integrate `S^(r)` from the derived initial state at the reference time
/// and compare with the derived curve; max discrepancy of positions and
/// velocities over the grid.
pub fn verify_variation_theorem_forward(
    v: &GeodesicVariation,
    indices: &[usize],
    stencil: Stencil,
) -> Result<f64> {
    let derived = mixed_derivative_with(v, indices, stencil)?;
    let i0 = derived.index_of(v.t_ref);
    let g = flow::integrate_geodesic_from(
        &v.spray,
        derived.r,
        (&derived.values[i0], &derived.velocities[i0]),
        v.t_ref,
        v.t_span,
        v.step,
    )?;
    g.require_complete()?;
    compare(&derived, &g)
}

fn compare(derived: &DerivedCurve, g: &GeodesicRecord) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, &t) in g.t_grid.iter().enumerate() {
        let j = derived.index_of(t);
        if (derived.t_grid[j] - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(GeomError::InvalidArgument(format!("time {t} missing from derived grid")));
        }
        worst = worst
            .max(derived.values[j].max_abs_diff(&g.pos[i]))
            .max(derived.velocities[j].max_abs_diff(&g.vel[i]));
    }
    Ok(worst)
}

/// `(Σ_A p_A ∏_{j∈A} s^{r−j+1})`, the normal form of the representative
/// map evaluated at `s`.
fn polynomial(p: &BundlePoint, s: &[f64]) -> Vec<f64> {
    let r = p.order();
    let mut out = vec![0.0; p.dim()];
    for mask in 0..p.block_count() {
        let mut w = 1.0;
        for j in 1..=r {
            if mask & (1 << (j - 1)) != 0 {
                w *= s[r - j];
            }
        }
        if w != 0.0 {
            for (o, b) in out.iter_mut().zip(p.block(mask)) {
                *o += w * b;
            }
        }
    }
    out
}

/// An `r`-parameter variation whose derivative `∂_{s^1} ⋯ ∂_{s^r} V`
/// is the given geodesic of `S^(r)`.
///
/// The initial data are the `s⁰`-derivative of the representative map of
/// the initial state `(pos, vel)(t₀) ∈ T^{r+1} M`. The width `ε` starts at
/// 0.1 and is halved until every initial condition on a `5^r` grid is
/// slashed and inside the chart; the time span is widened by one step on
/// each side.
pub fn variation_from_geodesic(spray: &Semispray, g: &GeodesicRecord) -> Result<GeodesicVariation> {
    let r = g.r;
    if r == 0 {
        return Err(GeomError::BadOrder { order: 0, needed: 1 });
    }
    if g.len() < 2 {
        return Err(GeomError::GridTooShort { len: g.len(), needed: 2 });
    }
    g.require_complete()?;
    let pos0 = g.pos[0].clone();
    let vel0 = g.vel[0].clone();
    let init = move |s: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((polynomial(&pos0, s), polynomial(&vel0, s)))
    };
    let admissible = |eps: f64| -> bool {
        let levels = [-eps, -eps / 2.0, 0.0, eps / 2.0, eps];
        (0..5usize.pow(r as u32)).all(|mut code| {
            let s: Vec<f64> = (0..r)
                .map(|_| {
                    let l = levels[code % 5];
                    code /= 5;
                    l
                })
                .collect();
            let (x, y) = init(&s).unwrap();
            linalg::norm(&y) >= SLASHED_THRESHOLD
                && spray.eval_real(&x, &y).is_ok_and(|gv| gv.iter().all(|c| c.is_finite()))
        })
    };
    let mut eps = 0.1;
    while !admissible(eps) {
        eps /= 2.0;
        if eps < 1e-6 {
            return Err(GeomError::ShrinkEpsilon { eps });
        }
    }
    let len = g.len();
    let (t0, t1) = (g.t_grid[0], g.t_grid[len - 1]);
    let h = (t1 - t0) / (len - 1) as f64;
    Ok(GeodesicVariation::new(spray.clone(), r, eps, (t0 - h, t1 + h), h, init).with_reference_time(t0))
}

/// Max discrepancy between `mixed_derivative(V, (1..r))` and `g` on the
/// grid of `g`.
pub fn round_trip_residual(v: &GeodesicVariation, g: &GeodesicRecord, stencil: Stencil) -> Result<f64> {
    let indices: Vec<usize> = (1..=g.r).collect();
    let derived = mixed_derivative_with(v, &indices, stencil)?;
    compare(&derived, g)
}

/// Compare `p^(r)_a ∘ ∂_{s^1} ⋯ ∂_{s^r} V` with `∂_{s^{r−a+1}} V`, the
/// latter by an independent five-point stencil in one parameter.
///
/// For `r = 1` the projection is the identity and the check is exact.
pub fn projection_identity_check(v: &GeodesicVariation, r: usize, hs: f64) -> Result<f64> {
    if r == 0 || r > v.k {
        return Err(GeomError::BadOrder { order: r, needed: 1 });
    }
    let indices: Vec<usize> = (1..=r).collect();
    let derived = mixed_derivative_with(v, &indices, Stencil { hs, richardson: true })?;
    if r == 1 {
        let mut worst = 0.0f64;
        for p in &derived.values {
            worst = worst.max(bundle::canonical_projection(p, 1)?.max_abs_diff(p));
        }
        return Ok(worst);
    }
    let mut worst = 0.0f64;
    for a in 1..=r {
        let param = r - a + 1;
        let shifted = |k: f64| -> Result<GeodesicRecord> {
            let mut s = vec![0.0; v.k];
            s[param - 1] = k * hs;
            v.geodesic(&s)
        };
        let runs: Vec<GeodesicRecord> = [-2.0, -1.0, 1.0, 2.0]
            .par_iter()
            .map(|&k| shifted(k))
            .collect::<Result<_>>()?;
        let base = v.base_geodesic()?;
        for (i, p) in derived.values.iter().enumerate() {
            let proj = bundle::canonical_projection(p, a)?;
            let d: Vec<f64> = (0..v.spray.dim())
                .map(|c| {
                    let at = |j: usize| runs[j].pos[i].as_slice()[c];
                    (at(0) - 8.0 * at(1) + 8.0 * at(2) - at(3)) / (12.0 * hs)
                })
                .collect();
            let direct = BundlePoint::tangent(base.pos[i].as_slice(), &d)?;
            worst = worst.max(proj.max_abs_diff(&direct));
        }
    }
    Ok(worst)
}
