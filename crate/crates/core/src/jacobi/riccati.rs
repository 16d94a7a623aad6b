use nalgebra::{DMatrix, DVector};

use super::frame::{covariant_derivative, ParallelFrame};
use super::tensor::{invert_transversal, JacobiTensor};
use super::{window_indices, TensorAlongCurve, Valence};
use crate::error::{GeomError, Result};
use crate::linalg;
use crate::variation::{mixed_derivative, GeodesicVariation};

/// `L = ∇J ∘ J⁻¹` on a window and the residual of `∇L + L² + Φ = 0`
/// measured on `W_t` in the parallel frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RiccatiOperator {
    pub l: TensorAlongCurve,
    pub residual: f64,
}

/// `A_Z = K ∘ DZ` along the base geodesic for the geodesic vector field
/// `Z = ∂_t V`, and the residual of `∇A + A² + Φ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeOperator {
    pub a: TensorAlongCurve,
    pub riccati_residual: f64,
}

/// Max over the samples of the chosen part of `∇T + T² + Φ` in the frame.
fn riccati_defect(t: &TensorAlongCurve, frame: &ParallelFrame, transverse_only: bool) -> Result<f64> {
    let dt = covariant_derivative(t, frame)?;
    let mut worst = 0.0f64;
    for ((d, m), &time) in dt.comps.iter().zip(&t.comps).zip(&t.t_grid) {
        let i = frame.index_of(time)?;
        let r = d + m * m + &frame.endomorphism[i];
        let size = if transverse_only {
            frame.transverse(i, &r).amax()
        } else {
            frame.to_frame(i, &r).amax()
        };
        worst = worst.max(size);
    }
    Ok(worst)
}

pub fn riccati_residual(jt: &JacobiTensor, frame: &ParallelFrame, window: (f64, f64)) -> Result<RiccatiOperator> {
    let inv = invert_transversal(&jt.j, frame, window)?;
    let idx = window_indices(&jt.j.t_grid, window);
    let comps: Vec<DMatrix<f64>> = idx
        .iter()
        .zip(&inv.comps)
        .map(|(&k, m)| &jt.nabla.comps[k] * m)
        .collect();
    let l = TensorAlongCurve::new(Valence::Endomorphism, inv.t_grid.clone(), comps);
    let residual = riccati_defect(&l, frame, true)?;
    Ok(RiccatiOperator { l, residual })
}

/// Shape operator of the variation's geodesic field along its base curve:
/// `A = [∂_t Z | ∂_s Z] · [c' | ∂_s V]⁻¹ + N(c')`, where `∂_t Z = −2G(c')`
/// and `∂_s Z = ∂_s ∂_t V` by parameter differences.
pub fn shape_operator(v: &GeodesicVariation, frame: &ParallelFrame, window: (f64, f64)) -> Result<ShapeOperator> {
    let n = frame.dim();
    if n < 2 || v.k != n - 1 {
        return Err(GeomError::InvalidArgument(format!(
            "need an (n−1)-parameter variation, got k = {} for n = {n}",
            v.k
        )));
    }
    let derived: Vec<_> = (1..n).map(|a| mixed_derivative(v, &[a])).collect::<Result<_>>()?;
    let idx = window_indices(frame.t_grid(), window);
    let mut comps = Vec::with_capacity(idx.len());
    for &i in &idx {
        let t = frame.t_grid()[i];
        let k = derived[0].index_of(t);
        if (derived[0].t_grid[k] - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(GeomError::InvalidArgument(format!("variation grid does not contain t = {t}")));
        }
        let x = frame.base.pos[i].as_slice();
        let y = frame.base.vel[i].as_slice();
        let mut jac = DMatrix::zeros(n, n);
        let mut dz = DMatrix::zeros(n, n);
        jac.set_column(0, &DVector::from_column_slice(y));
        dz.set_column(0, &DVector::from_vec(frame.spray.acceleration(0, x, y)?));
        for (a, curve) in derived.iter().enumerate() {
            jac.set_column(a + 1, &DVector::from_column_slice(curve.values[k].block(1)));
            dz.set_column(a + 1, &DVector::from_column_slice(curve.velocities[k].block(1)));
        }
        if jac.determinant().abs() <= 1e-8 {
            return Err(GeomError::NotDiffeo { t });
        }
        let inv = jac.try_inverse().ok_or(GeomError::NotDiffeo { t })?;
        comps.push(dz * inv + &frame.connection[i]);
    }
    let a = TensorAlongCurve::new(
        Valence::Endomorphism,
        idx.iter().map(|&i| frame.t_grid()[i]).collect(),
        comps,
    );
    let riccati_residual = riccati_defect(&a, frame, false)?;
    Ok(ShapeOperator { a, riccati_residual })
}

/// `(res_J1, res_J2)`: the largest deviation of `A_Z` from `∇J ∘ J⁻¹`, and
/// of `d/dt det J` from `tr A_Z · det J`, with `det J` the determinant of
/// the transverse frame matrix.
pub fn check_j1_j2(
    v: &GeodesicVariation,
    jt: &JacobiTensor,
    frame: &ParallelFrame,
    window: (f64, f64),
) -> Result<(f64, f64)> {
    let shape = shape_operator(v, frame, window)?;
    let ric = riccati_residual(jt, frame, window)?;
    let res_j1 = shape.a.max_abs_diff(&ric.l);
    let idx = window_indices(&jt.j.t_grid, window);
    let len = idx.len();
    if len < 5 {
        return Err(GeomError::GridTooShort { len, needed: 5 });
    }
    let dets: Vec<DMatrix<f64>> = idx
        .iter()
        .map(|&k| {
            let i = frame.index_of(jt.j.t_grid[k])?;
            Ok(DMatrix::from_element(1, 1, frame.transverse(i, &jt.j.comps[k]).determinant()))
        })
        .collect::<Result<_>>()?;
    let h = (jt.j.t_grid[idx[len - 1]] - jt.j.t_grid[idx[0]]) / (len - 1) as f64;
    let ddet = linalg::differentiate(&dets, h);
    let mut res_j2 = 0.0f64;
    for ((d, det), a) in ddet.iter().zip(&dets).zip(&shape.a.comps) {
        res_j2 = res_j2.max((d[(0, 0)] - a.trace() * det[(0, 0)]).abs());
    }
    Ok((res_j1, res_j2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::BundlePoint;
    use crate::flow::integrate_geodesic;
    use crate::jacobi::integrate_jacobi_tensor;
    use crate::spray::Semispray;

    fn setup(k: f64, t1: f64) -> (ParallelFrame, JacobiTensor, GeodesicVariation) {
        let s = Semispray::constant_curvature(2, k);
        let g = integrate_geodesic(
            &s,
            0,
            (&BundlePoint::base(&[0.0, 0.0]), &BundlePoint::base(&[1.0, 0.0])),
            (0.0, t1),
            1e-3,
        )
        .unwrap();
        let frame = ParallelFrame::new(&s, &g).unwrap();
        let jt = integrate_jacobi_tensor(&frame, &DMatrix::zeros(2, 2), &frame.transverse_projector(0)).unwrap();
        // geodesics from the origin with rotated initial direction
        let v = GeodesicVariation::new(s, 1, 0.1, (0.0, t1), 1e-3, |p| {
            Ok((vec![0.0, 0.0], vec![p[0].cos(), p[0].sin()]))
        });
        (frame, jt, v)
    }

    #[test]
    fn riccati_closed_forms() {
        let cases: [(f64, fn(f64) -> f64, (f64, f64)); 3] = [
            (1.0, |t| 1.0 / t.tan(), (0.3, 2.8)),
            (0.0, |t| 1.0 / t, (0.3, 2.8)),
            (-1.0, |t| 1.0 / t.tanh(), (0.3, 2.8)),
        ];
        for (k, l, window) in cases {
            let (frame, jt, _) = setup(k, 2.8);
            let ric = riccati_residual(&jt, &frame, window).unwrap();
            assert!(ric.residual < 1e-5, "K = {k}: {}", ric.residual);
            for (m, &t) in ric.l.comps.iter().zip(&ric.l.t_grid) {
                let i = frame.index_of(t).unwrap();
                assert!((frame.transverse(i, m)[(0, 0)] - l(t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn shape_operator_matches_riccati() {
        for k in [1.0, 0.0, -1.0] {
            let (frame, jt, v) = setup(k, 2.8);
            let window = (0.3, 2.8);
            let shape = shape_operator(&v, &frame, window).unwrap();
            assert!(shape.riccati_residual < 1e-4, "K = {k}: {}", shape.riccati_residual);
            for (a, &t) in shape.a.comps.iter().zip(&shape.a.t_grid) {
                let i = frame.index_of(t).unwrap();
                assert!((a * frame.velocity(i)).amax() < 1e-8);
            }
            let (j1, j2) = check_j1_j2(&v, &jt, &frame, window).unwrap();
            assert!(j1 < 1e-4 && j2 < 1e-4, "K = {k}: {j1} {j2}");
        }
    }

    #[test]
    fn collapsed_variation_is_not_a_diffeomorphism() {
        let (frame, _, v) = setup(1.0, 1.0);
        assert_eq!(shape_operator(&v, &frame, (0.0, 1.0)).unwrap_err(), GeomError::NotDiffeo { t: 0.0 });
    }
}
