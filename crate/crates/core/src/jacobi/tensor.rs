use nalgebra::{DMatrix, DVector};

use super::frame::{covariant_derivative, integrate_along, ParallelFrame};
use super::{window_indices, TensorAlongCurve, Valence, SINGULAR_DET, TRANSVERSAL_TOLERANCE};
use crate::bundle::BundlePoint;
use crate::error::{GeomError, Result};
use crate::flow;
use crate::variation::{mixed_derivative, GeodesicVariation};

/// A `(1,1)`-tensor `J` along the frame's base geodesic together with
/// `∇J`, and the measured residual of `∇²J + ΦJ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiTensor {
    pub j: TensorAlongCurve,
    pub nabla: TensorAlongCurve,
    pub residual: f64,
}

impl JacobiTensor {
    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    /// Transverse frame matrices of `J` on the grid.
    pub fn frame_matrices(&self, frame: &ParallelFrame) -> Result<Vec<DMatrix<f64>>> {
        self.j
            .t_grid
            .iter()
            .zip(&self.j.comps)
            .map(|(&t, m)| Ok(frame.transverse(frame.index_of(t)?, m)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransversalityReport {
    pub transversal: bool,
    /// `max_t |J c'| / |c'|`.
    pub tangent: f64,
    /// Largest `c'`-component of `Im J` in the frame.
    pub image: f64,
}

/// Numerical check of the propagation statement: `Φ` transversal and the
/// four initial conditions imply that `J` stays transversal.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationReport {
    /// `max |Φ c'|` and off-`W` part of `Φ W` on the grid.
    pub phi_violation: f64,
    /// Violation of `Jc'(0) = 0`, `(∇J)c'(0) = 0`, `Im J(0) ⊂ W`,
    /// `Im ∇J(0) ⊂ W`.
    pub initial_violation: f64,
    pub hypotheses_hold: bool,
    pub conclusion: TransversalityReport,
}

fn endomorphisms(t_grid: &[f64], comps: Vec<DMatrix<f64>>) -> TensorAlongCurve {
    TensorAlongCurve::new(Valence::Endomorphism, t_grid.to_vec(), comps)
}

/// Max of `|∇²J + ΦJ|` and `|∇J − P|` with both covariant derivatives by
/// finite differences.
pub fn jacobi_residual(j: &TensorAlongCurve, nabla: &TensorAlongCurve, frame: &ParallelFrame) -> Result<f64> {
    let dj = covariant_derivative(j, frame)?;
    let ddj = covariant_derivative(&dj, frame)?;
    let mut worst = dj.max_abs_diff(nabla);
    for ((m, jm), &t) in ddj.comps.iter().zip(&j.comps).zip(&j.t_grid) {
        let phi = &frame.endomorphism[frame.index_of(t)?];
        worst = worst.max((m + phi * jm).amax());
    }
    Ok(worst)
}

/// Solve `∇²J + ΦJ = 0` with `J(t₀) = J₀`, `∇J(t₀) = J₀'` as the system
/// `J' = P − NJ + JN`, `P' = −ΦJ − NP + PN`.
pub fn integrate_jacobi_tensor(frame: &ParallelFrame, j0: &DMatrix<f64>, j0p: &DMatrix<f64>) -> Result<JacobiTensor> {
    let n = frame.dim();
    for m in [j0, j0p] {
        if m.nrows() != n || m.ncols() != n {
            return Err(GeomError::DimensionMismatch {
                expected: n * n,
                got: m.len(),
            });
        }
    }
    let mut start = j0.as_slice().to_vec();
    start.extend_from_slice(j0p.as_slice());
    let samples = integrate_along(&frame.spray, &frame.base, &start, true, |nm, phi, s| {
        let j = DMatrix::from_column_slice(n, n, &s[..n * n]);
        let p = DMatrix::from_column_slice(n, n, &s[n * n..]);
        let dj = &p - nm * &j + &j * nm;
        let dp = -(phi * &j) - nm * &p + &p * nm;
        let mut out = dj.as_slice().to_vec();
        out.extend_from_slice(dp.as_slice());
        out
    })?;
    let t_grid = frame.t_grid().to_vec();
    let (js, ps): (Vec<_>, Vec<_>) = samples
        .into_iter()
        .map(|s| {
            (
                DMatrix::from_column_slice(n, n, &s[..n * n]),
                DMatrix::from_column_slice(n, n, &s[n * n..]),
            )
        })
        .unzip();
    let j = endomorphisms(&t_grid, js);
    let nabla = endomorphisms(&t_grid, ps);
    let residual = jacobi_residual(&j, &nabla, frame)?;
    Ok(JacobiTensor { j, nabla, residual })
}

/// Compare `J ∘ v` with the Jacobi field (geodesic of `S^(1)`) having the
/// same initial value and covariant derivative, for a parallel `v`.
pub fn jacobi_field_equivalence(frame: &ParallelFrame, v: &TensorAlongCurve, jt: &JacobiTensor) -> Result<f64> {
    let base = &frame.base;
    let field = jt.j.apply(v);
    let j0 = field.comps[0].column(0).into_owned();
    // (∇(J v))(0) = (∇J)(0) v(0) for parallel v; j' = ∇j − N j
    let nabla0 = &jt.nabla.comps[0] * &v.comps[0];
    let jdot0 = nabla0.column(0) - &frame.connection[0] * &j0;
    let pos = BundlePoint::tangent(base.pos[0].as_slice(), j0.as_slice())?;
    let vel = BundlePoint::tangent(base.vel[0].as_slice(), jdot0.as_slice())?;
    let len = base.len();
    let span = (base.t_grid[0], base.t_grid[len - 1]);
    let step = (span.1 - span.0) / (len - 1) as f64;
    let g = flow::integrate_geodesic(&frame.spray, 1, (&pos, &vel), span, step)?;
    g.require_complete()?;
    let mut worst = 0.0f64;
    for (p, f) in g.pos.iter().zip(&field.comps) {
        let d = DVector::from_column_slice(p.block(1)) - f.column(0);
        worst = worst.max(d.amax());
    }
    Ok(worst)
}

/// `J c' = 0` and `Im J ⊂ W_t` on the grid.
pub fn check_transversality(j: &TensorAlongCurve, frame: &ParallelFrame) -> Result<TransversalityReport> {
    check_transversality_tol(j, frame, TRANSVERSAL_TOLERANCE)
}

pub(crate) fn check_transversality_tol(
    j: &TensorAlongCurve,
    frame: &ParallelFrame,
    tol: f64,
) -> Result<TransversalityReport> {
    let mut tangent = 0.0f64;
    let mut image = 0.0f64;
    for (m, &t) in j.comps.iter().zip(&j.t_grid) {
        let i = frame.index_of(t)?;
        let c = frame.velocity(i);
        tangent = tangent.max((m * &c).amax() / c.norm());
        let fm = frame.to_frame(i, m);
        image = image.max(fm.row(0).amax());
    }
    Ok(TransversalityReport {
        transversal: tangent <= tol && image <= tol,
        tangent,
        image,
    })
}

/// Check the hypotheses of the propagation statement for the initial data
/// `(J₀, J₀')` and whether the integrated tensor is transversal.
pub fn transversality_from_initial_data(
    frame: &ParallelFrame,
    j0: &DMatrix<f64>,
    j0p: &DMatrix<f64>,
) -> Result<PropagationReport> {
    let tol = TRANSVERSAL_TOLERANCE;
    let mut phi_violation = 0.0f64;
    for i in 0..frame.len() {
        let c = frame.velocity(i);
        let phi = &frame.endomorphism[i];
        phi_violation = phi_violation.max((phi * &c).amax() / c.norm());
        phi_violation = phi_violation.max(frame.to_frame(i, phi).row(0).amax());
    }
    let c0 = frame.velocity(0);
    let mut initial_violation = 0.0f64;
    for m in [j0, j0p] {
        initial_violation = initial_violation
            .max((m * &c0).amax() / c0.norm())
            .max(frame.to_frame(0, m).row(0).amax());
    }
    let jt = integrate_jacobi_tensor(frame, j0, j0p)?;
    Ok(PropagationReport {
        phi_violation,
        initial_violation,
        hypotheses_hold: phi_violation <= tol && initial_violation <= tol,
        conclusion: check_transversality_tol(&jt.j, frame, tol)?,
    })
}

/// The Jacobi tensor with `J c' = 0` and `J e_a = ∂_{s^a} V |_{s=0}`, for a
/// variation with `k = n − 1` whose base is the frame's geodesic.
pub fn tensor_from_variation(v: &GeodesicVariation, frame: &ParallelFrame) -> Result<JacobiTensor> {
    let n = frame.dim();
    if n < 2 || v.k != n - 1 {
        return Err(GeomError::InvalidArgument(format!(
            "need an (n−1)-parameter variation, got k = {} for n = {n}",
            v.k
        )));
    }
    let derived: Vec<_> = (1..n).map(|a| mixed_derivative(v, &[a])).collect::<Result<_>>()?;
    let mut js = Vec::with_capacity(frame.len());
    let mut ps = Vec::with_capacity(frame.len());
    for (i, &t) in frame.t_grid().iter().enumerate() {
        let k = derived[0].index_of(t);
        if (derived[0].t_grid[k] - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(GeomError::InvalidArgument(format!(
                "variation grid does not contain t = {t}"
            )));
        }
        let mut d = DMatrix::zeros(n, n);
        let mut p = DMatrix::zeros(n, n);
        let nm = &frame.connection[i];
        for (a, curve) in derived.iter().enumerate() {
            let da = DVector::from_column_slice(curve.values[k].block(1));
            let dot = DVector::from_column_slice(curve.velocities[k].block(1));
            p.set_column(a + 1, &(dot + nm * &da));
            d.set_column(a + 1, &da);
        }
        js.push(d * &frame.basis_inv[i]);
        ps.push(p * &frame.basis_inv[i]);
    }
    let t_grid = frame.t_grid().to_vec();
    let j = endomorphisms(&t_grid, js);
    let nabla = endomorphisms(&t_grid, ps);
    let residual = jacobi_residual(&j, &nabla, frame)?;
    Ok(JacobiTensor { j, nabla, residual })
}

/// The variation `V(t, s)` whose initial data are
/// `(c(0) + Σ J_a(0) s^a, c'(0) + Σ J'_a(0) s^a)` with `J_a = J e_a`;
/// its time span extends the frame grid by one step on each side.
pub fn variation_from_tensor(jt: &JacobiTensor, frame: &ParallelFrame, eps: f64) -> Result<GeodesicVariation> {
    let report = check_transversality(&jt.j, frame)?;
    if !report.transversal {
        return Err(GeomError::NotTransversal {
            tangent: report.tangent,
            image: report.image,
        });
    }
    let n = frame.dim();
    let e0 = &frame.e[0];
    let ja = &jt.j.comps[0] * e0;
    let jdot = &jt.nabla.comps[0] * e0 - &frame.connection[0] * &ja;
    let c0 = frame.base.pos[0].as_slice().to_vec();
    let v0 = frame.base.vel[0].as_slice().to_vec();
    let init = move |s: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let sv = DVector::from_column_slice(s);
        let x = DVector::from_column_slice(&c0) + &ja * &sv;
        let y = DVector::from_column_slice(&v0) + &jdot * &sv;
        Ok((x.as_slice().to_vec(), y.as_slice().to_vec()))
    };
    let h = frame.step();
    let t0 = frame.t_grid()[0];
    let t1 = frame.t_grid()[frame.len() - 1];
    Ok(
        GeodesicVariation::new(frame.spray.clone(), n - 1, eps, (t0 - h, t1 + h), h, init)
            .with_reference_time(t0),
    )
}

/// The transversal tensor whose frame matrix is the inverse of that of
/// `J`, on the samples inside `window`.
pub fn invert_transversal(
    j: &TensorAlongCurve,
    frame: &ParallelFrame,
    window: (f64, f64),
) -> Result<TensorAlongCurve> {
    let idx = window_indices(&j.t_grid, window);
    let mut singular = Vec::new();
    let mut comps = Vec::with_capacity(idx.len());
    for &k in &idx {
        let t = j.t_grid[k];
        let i = frame.index_of(t)?;
        let m = frame.transverse(i, &j.comps[k]);
        match m.clone().try_inverse() {
            Some(inv) if m.determinant().abs() > SINGULAR_DET => comps.push(frame.from_transverse(i, &inv)),
            _ => singular.push(t),
        }
    }
    if !singular.is_empty() {
        return Err(GeomError::SingularAt(singular));
    }
    Ok(TensorAlongCurve::new(
        Valence::Endomorphism,
        idx.iter().map(|&k| j.t_grid[k]).collect(),
        comps,
    ))
}

/// Times where the determinant of the transverse frame matrix of the
/// Jacobi tensor with `J(0) = 0`, `∇J(0) = Id` on `W` changes sign.
pub fn conjugate_points(frame: &ParallelFrame) -> Result<Vec<f64>> {
    let n = frame.dim();
    let jt = integrate_jacobi_tensor(frame, &DMatrix::zeros(n, n), &frame.transverse_projector(0))?;
    let dets: Vec<f64> = jt.frame_matrices(frame)?.iter().map(|m| m.determinant()).collect();
    let t = frame.t_grid();
    let mut out = Vec::new();
    // det vanishes at t₀ itself; start looking one sample later
    for i in 1..dets.len().saturating_sub(1) {
        let (a, b) = (dets[i], dets[i + 1]);
        if a * b < 0.0 {
            out.push(t[i] + (t[i + 1] - t[i]) * a / (a - b));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate_geodesic, GeodesicRecord};
    use crate::jacobi::parallel_transport;
    use crate::spray::Semispray;

    fn unit_geodesic(k: f64, t1: f64) -> (Semispray, GeodesicRecord) {
        let s = Semispray::constant_curvature(2, k);
        let g = integrate_geodesic(
            &s,
            0,
            (&BundlePoint::base(&[0.0, 0.0]), &BundlePoint::base(&[1.0, 0.0])),
            (0.0, t1),
            1e-3,
        )
        .unwrap();
        (s, g)
    }

    #[test]
    fn constant_curvature_oracles() {
        for (k, f) in [
            (1.0, f64::sin as fn(f64) -> f64),
            (0.0, (|t| t) as fn(f64) -> f64),
            (-1.0, f64::sinh as fn(f64) -> f64),
        ] {
            let (s, g) = unit_geodesic(k, 2.8);
            let frame = ParallelFrame::new(&s, &g).unwrap();
            let jt = integrate_jacobi_tensor(&frame, &DMatrix::zeros(2, 2), &frame.transverse_projector(0)).unwrap();
            assert!(jt.residual < 1e-6, "K = {k}: {}", jt.residual);
            for (m, &t) in jt.frame_matrices(&frame).unwrap().iter().zip(&jt.j.t_grid) {
                assert!((m[(0, 0)] - f(t)).abs() < 1e-6, "K = {k}, t = {t}");
            }
            assert!(check_transversality(&jt.j, &frame).unwrap().transversal);
        }
    }

    #[test]
    fn flat_tensor_is_affine() {
        let s = Semispray::flat(2);
        let g = integrate_geodesic(&s, 0, (&BundlePoint::base(&[0.0, 0.0]), &BundlePoint::base(&[1.0, 1.0])), (0.0, 1.0), 1e-2).unwrap();
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let j0 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let j0p = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 3.0, 1.0]);
        let jt = integrate_jacobi_tensor(&frame, &j0, &j0p).unwrap();
        for (m, &t) in jt.j.comps.iter().zip(&jt.j.t_grid) {
            assert!((m - (&j0 + &j0p * t)).amax() < 1e-13);
        }
    }

    #[test]
    fn composed_with_parallel_fields_gives_jacobi_fields() {
        let (s, g) = unit_geodesic(1.0, 2.0);
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let j0 = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.4]);
        let j0p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -0.5, 0.2]);
        let jt = integrate_jacobi_tensor(&frame, &j0, &j0p).unwrap();
        let v = parallel_transport(&s, &g, &[0.6, 0.8]).unwrap();
        assert!(jacobi_field_equivalence(&frame, &v, &jt).unwrap() < 1e-5);
        let zero = parallel_transport(&s, &g, &[0.0, 0.0]).unwrap();
        assert_eq!(jacobi_field_equivalence(&frame, &zero, &jt).unwrap(), 0.0);
    }

    #[test]
    fn transversality_checks() {
        let (s, g) = unit_geodesic(1.0, 2.0);
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let full = integrate_jacobi_tensor(&frame, &DMatrix::identity(2, 2), &DMatrix::zeros(2, 2)).unwrap();
        let report = check_transversality(&full.j, &frame).unwrap();
        assert!(!report.transversal && report.tangent > 0.5);
        let p = frame.transverse_projector(0);
        let prop = transversality_from_initial_data(&frame, &DMatrix::zeros(2, 2), &p).unwrap();
        assert!(prop.hypotheses_hold && prop.conclusion.transversal);
        // ∇J of a transversal J is transversal
        let jt = integrate_jacobi_tensor(&frame, &DMatrix::zeros(2, 2), &p).unwrap();
        assert!(check_transversality(&jt.nabla, &frame).unwrap().transversal);
        assert!(matches!(
            variation_from_tensor(&full, &frame, 0.1),
            Err(GeomError::NotTransversal { .. })
        ));
    }

    #[test]
    fn inversion() {
        let (s, g) = unit_geodesic(1.0, 3.0);
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let jt = integrate_jacobi_tensor(&frame, &DMatrix::zeros(2, 2), &frame.transverse_projector(0)).unwrap();
        let inv = invert_transversal(&jt.j, &frame, (0.5, 2.5)).unwrap();
        for (m, &t) in inv.comps.iter().zip(&inv.t_grid) {
            let i = frame.index_of(t).unwrap();
            assert!((frame.transverse(i, m)[(0, 0)] - 1.0 / t.sin()).abs() < 1e-6);
        }
        assert_eq!(inv.t_grid.first().copied(), Some(0.5));
        assert_eq!(invert_transversal(&jt.j, &frame, (0.0, 1.0)), Err(GeomError::SingularAt(vec![0.0])));
        let conj = conjugate_points(&frame).unwrap();
        assert_eq!(conj.len(), 0);
        // the geodesic through the origin reaches the chart's pole at t = π;
        // start on a great circle that stays in the chart instead
        let phi = 1.0 / (1.0 + 0.25 / 4.0);
        let g = integrate_geodesic(&s, 0, (&BundlePoint::base(&[0.5, 0.0]), &BundlePoint::base(&[0.0, 1.0 / phi])), (0.0, 3.5), 1e-3).unwrap();
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let conj = conjugate_points(&frame).unwrap();
        assert_eq!(conj.len(), 1);
        assert!((conj[0] - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn tensor_variation_round_trip() {
        for (k, f) in [(1.0, f64::sin as fn(f64) -> f64), (-1.0, f64::sinh as fn(f64) -> f64)] {
            let (s, g) = unit_geodesic(k, 2.0);
            let frame = ParallelFrame::new(&s, &g).unwrap();
            let jt = integrate_jacobi_tensor(&frame, &DMatrix::zeros(2, 2), &frame.transverse_projector(0)).unwrap();
            let v = variation_from_tensor(&jt, &frame, 0.1).unwrap();
            let back = tensor_from_variation(&v, &frame).unwrap();
            assert!(back.j.max_abs_diff(&jt.j) < 1e-4);
            assert!(back.residual < 1e-4, "{}", back.residual);
            for (m, &t) in back.frame_matrices(&frame).unwrap().iter().zip(&back.j.t_grid) {
                assert!((m[(0, 0)] - f(t)).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn flat_linear_variation() {
        // V(t, s) = x₀ + t v + s (1 + t) e
        let s = Semispray::flat(2);
        let v = GeodesicVariation::new(s.clone(), 1, 0.1, (0.0, 1.0), 1e-2, |p| {
            Ok((vec![0.0, p[0]], vec![1.0, p[0]]))
        });
        let g = v.base_geodesic().unwrap();
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let jt = tensor_from_variation(&v, &frame).unwrap();
        for (i, m) in jt.j.comps.iter().enumerate() {
            let t = frame.t_grid()[i];
            let want = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0 + t]);
            assert!((m - want).amax() < 1e-9);
        }
        assert!(jt.residual < 1e-8);
    }
}
