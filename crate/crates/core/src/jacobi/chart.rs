use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::frame::ParallelFrame;
use super::tensor::{invert_transversal, variation_from_tensor, JacobiTensor};
use super::window_indices;
use crate::error::{GeomError, Result};
use crate::flow::{self, GeodesicRecord};
use crate::linalg;
use crate::variation::GeodesicVariation;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartOptions {
    /// First width tried; halved until the checks pass.
    pub eps0: f64,
    pub min_eps: f64,
    /// Number of time samples in the window used by the checks.
    pub t_samples: usize,
    /// Samples per parameter axis, spread over `(−ε, ε)`.
    pub s_samples: usize,
    pub det_threshold: f64,
    pub geodesic_tolerance: f64,
}

impl Default for ChartOptions {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            min_eps: 1e-6,
            t_samples: 41,
            s_samples: 5,
            det_threshold: 1e-8,
            geodesic_tolerance: 1e-6,
        }
    }
}

/// Coordinates `(t, s) ∈ window × (−ε, ε)^{n−1}` around the base geodesic,
/// with the measurements that certify them on the sample grid.
#[derive(Clone, Debug)]
pub struct Chart {
    pub variation: GeodesicVariation,
    pub eps: f64,
    pub window: (f64, f64),
    /// Smallest `|det [∂_t V | ∂_s V]|` on the sample grid.
    pub min_abs_det: f64,
    /// Smallest distance between images of distinct sample points.
    pub min_separation: f64,
    /// Largest geodesic residual of the sampled `t`-coordinate lines.
    pub t_line_residual: f64,
}

impl Chart {
    pub fn eval(&self, t: f64, s: &[f64]) -> Result<Vec<f64>> {
        if t < self.window.0 || t > self.window.1 {
            return Err(GeomError::InvalidArgument(format!("t = {t} outside the chart window")));
        }
        self.variation.evaluate(t, s)
    }
}

fn sample_indices(all: &[usize], count: usize) -> Vec<usize> {
    if all.len() <= count {
        return all.to_vec();
    }
    let mut out: Vec<usize> = (0..count)
        .map(|q| all[q * (all.len() - 1) / (count - 1).max(1)])
        .collect();
    out.dedup();
    out
}

fn restrict(g: &GeodesicRecord, idx: &[usize]) -> GeodesicRecord {
    GeodesicRecord {
        t_grid: idx.iter().map(|&i| g.t_grid[i]).collect(),
        pos: idx.iter().map(|&i| g.pos[i].clone()).collect(),
        vel: idx.iter().map(|&i| g.vel[i].clone()).collect(),
        ..g.clone()
    }
}

/// Distance between the segments `[p0, p1]` and `[q0, q1]`.
fn segment_distance(p0: &[f64], p1: &[f64], q0: &[f64], q1: &[f64]) -> f64 {
    let d1 = DVector::from_column_slice(p1) - DVector::from_column_slice(p0);
    let d2 = DVector::from_column_slice(q1) - DVector::from_column_slice(q0);
    let r = DVector::from_column_slice(p0) - DVector::from_column_slice(q0);
    let (a, e, f) = (d1.dot(&d1), d2.dot(&d2), d2.dot(&r));
    let (c, b) = (d1.dot(&r), d1.dot(&d2));
    let denom = a * e - b * b;
    let mut u = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut w = if e > 0.0 { (b * u + f) / e } else { 0.0 };
    if w < 0.0 {
        w = 0.0;
        u = if a > 0.0 { (-c / a).clamp(0.0, 1.0) } else { 0.0 };
    } else if w > 1.0 {
        w = 1.0;
        u = if a > 0.0 { ((b - c) / a).clamp(0.0, 1.0) } else { 0.0 };
    }
    (r + d1 * u - d2 * w).norm()
}

/// Reject base curves that come back to themselves: coarse samples locate
/// close approaches between well-separated times, full-resolution segment
/// distances decide.
fn check_embedded(frame: &ParallelFrame, window: (f64, f64)) -> Result<()> {
    let idx = window_indices(frame.t_grid(), window);
    let sub = sample_indices(&idx, 400);
    if sub.len() < 2 {
        return Ok(());
    }
    let t = frame.t_grid();
    let pos = |i: usize| frame.base.pos[i].as_slice();
    let reach = (1..sub.len())
        .map(|q| linalg::norm(&linalg::axpy(pos(sub[q]), -1.0, pos(sub[q - 1]))))
        .fold(0.0, f64::max);
    let gap = sub[1] - sub[0];
    for a in 0..sub.len() {
        for b in a + 1..sub.len() {
            if b - a <= 10 {
                continue;
            }
            let coarse = linalg::norm(&linalg::axpy(pos(sub[a]), -1.0, pos(sub[b])));
            if coarse > 2.0 * reach {
                continue;
            }
            let around = |c: usize| {
                let lo = c.saturating_sub(gap).max(idx[0]);
                let hi = (c + gap).min(*idx.last().unwrap() - 1);
                lo..=hi
            };
            for i in around(sub[a]) {
                for j in around(sub[b]) {
                    if j <= i + 1 {
                        continue;
                    }
                    if segment_distance(pos(i), pos(i + 1), pos(j), pos(j + 1)) <= 1e-6 {
                        return Err(GeomError::NotEmbeddable { t1: t[i], t2: t[j] });
                    }
                }
            }
        }
    }
    Ok(())
}

struct Measured {
    min_abs_det: f64,
    min_separation: f64,
    t_line_residual: f64,
}

/// Checks of one candidate width; `None` when the width is rejected.
fn measure(v: &GeodesicVariation, window: (f64, f64), opts: &ChartOptions) -> Result<Option<Measured>> {
    let k = v.k;
    let n = v.spray.dim();
    let eps = v.eps;
    let levels: Vec<f64> = (0..opts.s_samples)
        .map(|q| {
            let u = if opts.s_samples == 1 { 0.0 } else { q as f64 / (opts.s_samples - 1) as f64 };
            0.9 * eps * (2.0 * u - 1.0)
        })
        .collect();
    let params: Vec<Vec<f64>> = (0..opts.s_samples.pow(k as u32))
        .map(|mut code| {
            (0..k)
                .map(|_| {
                    let l = levels[code % opts.s_samples];
                    code /= opts.s_samples;
                    l
                })
                .collect()
        })
        .collect();
    let hs = 1e-3 * eps;
    // geodesic at s and at s ± hs e_a for every parameter sample
    let runs: Vec<Option<Vec<GeodesicRecord>>> = params
        .par_iter()
        .map(|s| {
            let mut out = vec![v.geodesic(s).ok()?];
            for a in 0..k {
                for sign in [1.0, -1.0] {
                    let mut sp = s.clone();
                    sp[a] += sign * hs;
                    out.push(v.geodesic(&sp).ok()?);
                }
            }
            Some(out)
        })
        .collect();
    if runs.iter().any(Option::is_none) {
        return Ok(None);
    }
    let runs: Vec<Vec<GeodesicRecord>> = runs.into_iter().map(Option::unwrap).collect();
    let grid = &runs[0][0].t_grid;
    let idx = window_indices(grid, window);
    let t_idx = sample_indices(&idx, opts.t_samples);

    let mut min_abs_det = f64::INFINITY;
    let mut sign = 0.0;
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut t_line_residual = 0.0f64;
    for group in &runs {
        let g = &group[0];
        t_line_residual = t_line_residual.max(flow::geodesic_residual(&v.spray, &restrict(g, &idx))?);
        for &i in &t_idx {
            let mut jac = DMatrix::zeros(n, n);
            jac.set_column(0, &DVector::from_column_slice(g.vel[i].as_slice()));
            for a in 0..k {
                let (p, m) = (&group[1 + 2 * a].pos[i], &group[2 + 2 * a].pos[i]);
                let d: Vec<f64> = p.as_slice().iter().zip(m.as_slice()).map(|(x, y)| (x - y) / (2.0 * hs)).collect();
                jac.set_column(a + 1, &DVector::from_vec(d));
            }
            let det = jac.determinant();
            if sign == 0.0 {
                sign = det.signum();
            }
            if det.abs() <= opts.det_threshold || det.signum() != sign {
                return Ok(None);
            }
            min_abs_det = min_abs_det.min(det.abs());
            images.push(g.pos[i].as_slice().to_vec());
        }
    }
    if t_line_residual >= opts.geodesic_tolerance {
        return Err(GeomError::ChartFailed(format!(
            "t-coordinate lines are not geodesics (residual {t_line_residual:e})"
        )));
    }
    let mut min_separation = f64::INFINITY;
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            min_separation = min_separation.min(linalg::max_abs_diff(&images[a], &images[b]));
        }
    }
    if !(min_separation > 1e-9) {
        return Ok(None);
    }
    Ok(Some(Measured {
        min_abs_det,
        min_separation,
        t_line_residual,
    }))
}

/// Pre-semigeodesic chart around the base geodesic on `window`, built from
/// the variation of an invertible Jacobi tensor by halving `ε` until the
/// Jacobian determinant and injectivity checks pass on the sample grid.
pub fn build_chart(
    jt: &JacobiTensor,
    frame: &ParallelFrame,
    window: (f64, f64),
    opts: ChartOptions,
) -> Result<Chart> {
    check_embedded(frame, window)?;
    invert_transversal(&jt.j, frame, window)?;
    let mut eps = opts.eps0;
    while eps >= opts.min_eps {
        let v = variation_from_tensor(jt, frame, eps)?;
        if let Some(m) = measure(&v, window, &opts)? {
            return Ok(Chart {
                variation: v,
                eps,
                window,
                min_abs_det: m.min_abs_det,
                min_separation: m.min_separation,
                t_line_residual: m.t_line_residual,
            });
        }
        eps /= 2.0;
    }
    Err(GeomError::ChartFailed(format!("no admissible width down to {:e}", opts.min_eps)))
}
