use nalgebra::{DMatrix, DVector};

use super::{TensorAlongCurve, Valence};
use crate::bundle::BundlePoint;
use crate::error::{GeomError, Result};
use crate::flow::{rk4_step, GeodesicRecord};
use crate::linalg;
use crate::spray::Semispray;

/// A base geodesic with `n − 1` parallel vector fields spanning a
/// complement `W_t` of `c'(t)`, plus `N` and `Φ` sampled along it.
#[derive(Clone, Debug)]
pub struct ParallelFrame {
    pub spray: Semispray,
    pub base: GeodesicRecord,
    /// `n × (n−1)` matrices with columns `e_a(t)`.
    pub e: Vec<DMatrix<f64>>,
    /// `B(t) = [c'(t) | e_1(t) … e_{n−1}(t)]`.
    pub basis: Vec<DMatrix<f64>>,
    pub basis_inv: Vec<DMatrix<f64>>,
    pub connection: Vec<DMatrix<f64>>,
    pub endomorphism: Vec<DMatrix<f64>>,
    /// Largest condition number of `B(t)` on the grid.
    pub condition: f64,
}

/// Integrate `(x, y, extra)` where `(x, y)` follows the spray and
/// `extra' = f(N(x, y), Φ(x, y), extra)`, on the grid of `base`.
pub(crate) fn integrate_along(
    spray: &Semispray,
    base: &GeodesicRecord,
    extra0: &[f64],
    need_phi: bool,
    f: impl Fn(&DMatrix<f64>, &DMatrix<f64>, &[f64]) -> Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    check_base(spray, base)?;
    let n = spray.dim();
    let len = base.len();
    let h = (base.t_grid[len - 1] - base.t_grid[0]) / (len - 1) as f64;
    let rhs = |state: &[f64]| -> Result<Vec<f64>> {
        let (x, rest) = state.split_at(n);
        let (y, extra) = rest.split_at(n);
        let (nm, phi) = if need_phi {
            spray.connection_and_endomorphism(x, y)?
        } else {
            (spray.connection(x, y)?, DMatrix::zeros(0, 0))
        };
        let acc = spray.acceleration(0, x, y)?;
        let mut out = Vec::with_capacity(state.len());
        out.extend_from_slice(y);
        out.extend(acc);
        out.extend(f(&nm, &phi, extra));
        Ok(out)
    };
    let mut state: Vec<f64> = base.pos[0].as_slice().to_vec();
    state.extend_from_slice(base.vel[0].as_slice());
    state.extend_from_slice(extra0);
    let mut out = Vec::with_capacity(len);
    out.push(state[2 * n..].to_vec());
    for _ in 1..len {
        state = rk4_step(&rhs, &state, h)?;
        out.push(state[2 * n..].to_vec());
    }
    Ok(out)
}

fn check_base(spray: &Semispray, base: &GeodesicRecord) -> Result<()> {
    if base.r != 0 {
        return Err(GeomError::InvalidArgument(format!(
            "base geodesic must be a curve in M, got order {}",
            base.r
        )));
    }
    if base.len() < 2 {
        return Err(GeomError::GridTooShort { len: base.len(), needed: 2 });
    }
    if base.dim() != spray.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: spray.dim(),
            got: base.dim(),
        });
    }
    base.require_complete()?;
    Ok(())
}

/// Solve `v' + N(c') v = 0` along `base`.
pub fn parallel_transport(spray: &Semispray, base: &GeodesicRecord, v0: &[f64]) -> Result<TensorAlongCurve> {
    let n = spray.dim();
    if v0.len() != n {
        return Err(GeomError::DimensionMismatch { expected: n, got: v0.len() });
    }
    let samples = integrate_along(spray, base, v0, false, |nm, _, v| {
        (-(nm * DVector::from_column_slice(v))).as_slice().to_vec()
    })?;
    Ok(TensorAlongCurve::new(
        Valence::Vector,
        base.t_grid.clone(),
        samples.into_iter().map(|v| DMatrix::from_vec(n, 1, v)).collect(),
    ))
}

impl ParallelFrame {
    /// Frame whose `W_0` is the Euclidean orthogonal complement of `c'(0)`.
    pub fn new(spray: &Semispray, base: &GeodesicRecord) -> Result<Self> {
        check_base(spray, base)?;
        let n = spray.dim();
        if n < 2 {
            return Err(GeomError::InvalidArgument("frames need n ≥ 2".into()));
        }
        let c0 = DVector::from_column_slice(base.vel[0].as_slice());
        // complete c'(0) to a basis and orthogonalize
        let mut cols = vec![c0.normalize()];
        for k in 0..n {
            let mut v = DVector::zeros(n);
            v[k] = 1.0;
            for c in &cols {
                v -= c * c.dot(&v);
            }
            if v.norm() > 1e-8 && cols.len() < n {
                cols.push(v.normalize());
            }
        }
        let e0 = DMatrix::from_columns(&cols[1..]);
        Self::with_complement(spray, base, &e0)
    }

    /// Frame transported from the given `n × (n−1)` initial complement.
    pub fn with_complement(spray: &Semispray, base: &GeodesicRecord, e0: &DMatrix<f64>) -> Result<Self> {
        check_base(spray, base)?;
        let n = spray.dim();
        if e0.nrows() != n || e0.ncols() + 1 != n {
            return Err(GeomError::DimensionMismatch {
                expected: n * (n - 1),
                got: e0.len(),
            });
        }
        let m = n - 1;
        let samples = integrate_along(spray, base, e0.as_slice(), false, |nm, _, e| {
            (-(nm * DMatrix::from_column_slice(n, m, e))).as_slice().to_vec()
        })?;
        let e: Vec<DMatrix<f64>> = samples
            .into_iter()
            .map(|v| DMatrix::from_vec(n, m, v))
            .collect();
        let mut basis = Vec::with_capacity(e.len());
        let mut basis_inv = Vec::with_capacity(e.len());
        let mut connection = Vec::with_capacity(e.len());
        let mut endomorphism = Vec::with_capacity(e.len());
        let mut condition = 0.0f64;
        for (i, ei) in e.iter().enumerate() {
            let mut b = DMatrix::zeros(n, n);
            b.set_column(0, &DVector::from_column_slice(base.vel[i].as_slice()));
            b.view_mut((0, 1), (n, m)).copy_from(ei);
            let sv = b.singular_values();
            let (smax, smin) = (sv.max(), sv.min());
            if smin <= 1e-12 * smax.max(1.0) {
                return Err(GeomError::SingularFrame { t: base.t_grid[i] });
            }
            condition = condition.max(smax / smin);
            basis_inv.push(b.clone().try_inverse().ok_or(GeomError::SingularFrame { t: base.t_grid[i] })?);
            basis.push(b);
            let (nm, phi) =
                spray.connection_and_endomorphism(base.pos[i].as_slice(), base.vel[i].as_slice())?;
            connection.push(nm);
            endomorphism.push(phi);
        }
        Ok(Self {
            spray: spray.clone(),
            base: base.clone(),
            e,
            basis,
            basis_inv,
            connection,
            endomorphism,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.spray.dim()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.base.t_grid
    }

    pub fn step(&self) -> f64 {
        let len = self.len();
        (self.base.t_grid[len - 1] - self.base.t_grid[0]) / (len - 1) as f64
    }

    /// Grid index of time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let t0 = self.base.t_grid[0];
        let i = ((t - t0) / self.step()).round();
        if i < 0.0 || i as usize >= self.len() {
            return Err(GeomError::InvalidArgument(format!("t = {t} outside the frame grid")));
        }
        let i = i as usize;
        if (self.base.t_grid[i] - t).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(GeomError::InvalidArgument(format!("t = {t} is not a grid time")));
        }
        Ok(i)
    }

    /// Grid index closest to `t`, clamped to the grid.
    pub fn index_of_nearest(&self, t: f64) -> usize {
        let i = ((t - self.base.t_grid[0]) / self.step()).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    pub fn velocity(&self, i: usize) -> DVector<f64> {
        DVector::from_column_slice(self.base.vel[i].as_slice())
    }

    /// `B⁻¹ m B`: components of a `(1,1)`-tensor in the frame.
    pub fn to_frame(&self, i: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis_inv[i] * m * &self.basis[i]
    }

    pub fn from_frame(&self, i: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
        &self.basis[i] * m * &self.basis_inv[i]
    }

    /// The `(n−1) × (n−1)` block of [`to_frame`](Self::to_frame) acting on
    /// `W_t`.
    pub fn transverse(&self, i: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        self.to_frame(i, m).view((1, 1), (n - 1, n - 1)).into_owned()
    }

    /// The chart tensor that kills `c'` and acts on `W_t` by `block`.
    pub fn from_transverse(&self, i: usize, block: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut full = DMatrix::zeros(n, n);
        full.view_mut((1, 1), (n - 1, n - 1)).copy_from(block);
        self.from_frame(i, &full)
    }

    /// Projector onto `W_0` along `c'(0)`.
    pub fn transverse_projector(&self, i: usize) -> DMatrix<f64> {
        let n = self.dim();
        self.from_transverse(i, &DMatrix::identity(n - 1, n - 1))
    }
}

/// `∇T` for a tensor sampled on (part of) the frame grid: fourth-order
/// differences in `t` plus `N T` for vectors, `−T N` for covectors and
/// `N T − T N` for endomorphisms.
pub fn covariant_derivative(t: &TensorAlongCurve, frame: &ParallelFrame) -> Result<TensorAlongCurve> {
    let len = t.len();
    if len < 5 {
        return Err(GeomError::GridTooShort { len, needed: 5 });
    }
    let h = (t.t_grid[len - 1] - t.t_grid[0]) / (len - 1) as f64;
    let d = linalg::differentiate(&t.comps, h);
    let comps = d
        .into_iter()
        .zip(&t.comps)
        .zip(&t.t_grid)
        .map(|((dt, c), &time)| {
            let nm = &frame.connection[frame.index_of(time)?];
            Ok(match t.valence {
                Valence::Vector => dt + nm * c,
                Valence::Covector => dt - c * nm,
                Valence::Endomorphism => dt + nm * c - c * nm,
            })
        })
        .collect::<Result<_>>()?;
    Ok(TensorAlongCurve::new(t.valence, t.t_grid.clone(), comps))
}

/// `K(x, y, X, Y) = (x, Y + N(y) X)` for a point `(x, y, X, Y)` of `T²M`.
pub fn connection_map(spray: &Semispray, xi: &BundlePoint) -> Result<BundlePoint> {
    if xi.order() != 2 || xi.dim() != spray.dim() {
        return Err(GeomError::DimensionMismatch {
            expected: spray.dim() << 2,
            got: xi.as_slice().len(),
        });
    }
    let nm = spray.connection(xi.block(0), xi.block(1))?;
    let big_x = DVector::from_column_slice(xi.block(2));
    let nx = nm * big_x;
    let fiber: Vec<f64> = xi.block(3).iter().zip(nx.iter()).map(|(a, b)| a + b).collect();
    BundlePoint::tangent(xi.block(0), &fiber)
}
