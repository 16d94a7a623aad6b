//! Points of the iterated tangent bundle `T^r M` over a single chart and the
//! canonical maps between them.
//!
//! A point has `2^r` blocks of `n` coordinates. If the point is the mixed
//! partial `∂_{s^1} ⋯ ∂_{s^r} W |_0` of a map `W`, block `A` holds the
//! partial along `{ s^{r-j+1} : j ∈ A }`; bit 1 is the innermost derivative.
//! For `r = 2` the blocks are `(x, y, X, Y)`.
//!
//! Every structure map here is a permutation or selection of blocks, so all
//! identities between them hold exactly.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GeomError, Result};
use crate::mask;

/// Tolerance for the base-point agreement required by fiber addition.
pub const BASE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct BundlePoint {
    n: usize,
    r: usize,
    data: Vec<f64>,
}

/// The three projections `T^r M → T^{r-1} M` that drop one tangent level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// `π`: forget the outermost level.
    Pi,
    /// `Dπ`: forget the second outermost level.
    DPi,
    /// `DDπ`: forget the third outermost level.
    DDPi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FiberOp {
    Add,
    Scale,
}

/// Membership in the slashed bundle `T^r M ∖ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlashedFlag {
    pub member: bool,
}

impl BundlePoint {
    pub fn new(n: usize, r: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n << r {
            return Err(GeomError::DimensionMismatch {
                expected: n << r,
                got: data.len(),
            });
        }
        Ok(Self { n, r, data })
    }

    pub fn from_blocks(blocks: &[Vec<f64>]) -> Result<Self> {
        let count = blocks.len();
        if count == 0 || !count.is_power_of_two() {
            return Err(GeomError::InvalidArgument(format!(
                "block count {count} is not a power of two"
            )));
        }
        let r = count.trailing_zeros() as usize;
        let n = blocks[0].len();
        let mut data = Vec::with_capacity(n * count);
        for b in blocks {
            if b.len() != n {
                return Err(GeomError::DimensionMismatch {
                    expected: n,
                    got: b.len(),
                });
            }
            data.extend_from_slice(b);
        }
        Self::new(n, r, data)
    }

    pub fn zeros(n: usize, r: usize) -> Self {
        Self {
            n,
            r,
            data: vec![0.0; n << r],
        }
    }

    /// Order-0 point, i.e. a point of `M`.
    pub fn base(x: &[f64]) -> Self {
        Self {
            n: x.len(),
            r: 0,
            data: x.to_vec(),
        }
    }

    /// The point of `TM` with base `x` and fiber `y`.
    pub fn tangent(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(GeomError::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        let mut data = x.to_vec();
        data.extend_from_slice(y);
        Self::new(x.len(), 1, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.r
    }

    pub fn block_count(&self) -> usize {
        1 << self.r
    }

    pub fn block(&self, mask: usize) -> &[f64] {
        &self.data[mask * self.n..(mask + 1) * self.n]
    }

    pub fn block_mut(&mut self, mask: usize) -> &mut [f64] {
        &mut self.data[mask * self.n..(mask + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Stack a point of `T^r M` (the base) and a tangent at it into a
    /// point of `T^{r+1} M`; the tangent occupies the new top level.
    pub fn assemble(base: &BundlePoint, tangent: &BundlePoint) -> Result<Self> {
        if base.n != tangent.n || base.r != tangent.r {
            return Err(GeomError::DimensionMismatch {
                expected: base.data.len(),
                got: tangent.data.len(),
            });
        }
        let mut data = base.data.clone();
        data.extend_from_slice(&tangent.data);
        Self::new(base.n, base.r + 1, data)
    }

    /// Inverse of [`assemble`](Self::assemble): `(π(ξ), fiber part)`.
    pub fn split(&self) -> Result<(BundlePoint, BundlePoint)> {
        if self.r == 0 {
            return Err(GeomError::BadOrder {
                order: 0,
                needed: 1,
            });
        }
        let half = self.data.len() / 2;
        Ok((
            Self {
                n: self.n,
                r: self.r - 1,
                data: self.data[..half].to_vec(),
            },
            Self {
                n: self.n,
                r: self.r - 1,
                data: self.data[half..].to_vec(),
            },
        ))
    }

    pub fn max_abs_diff(&self, other: &BundlePoint) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Block `mask` of the result is block `source(mask)` of `self`.
    fn gather(&self, r: usize, source: impl Fn(usize) -> usize) -> Self {
        let mut data = Vec::with_capacity(self.n << r);
        for m in 0..1usize << r {
            data.extend_from_slice(self.block(source(m)));
        }
        Self {
            n: self.n,
            r,
            data,
        }
    }

    /// Drop every block containing level `j` and close the gap.
    fn forget_level(&self, j: usize) -> Self {
        self.gather(self.r - 1, |m| mask::expand(m, j))
    }

    fn swap_levels(&self, a: usize, b: usize) -> Self {
        self.gather(self.r, |m| mask::swap(m, a, b))
    }
}

/// The involution `κ_k` lifted to `T^r M` (`κ_r` itself when `k = r`, and
/// `Dκ_{r-1}`, `DDκ_{r-2}`, … below): swaps tangent levels `k - 1` and `k`.
pub fn involution(xi: &BundlePoint, level: usize) -> Result<BundlePoint> {
    if xi.r < 2 || level < 2 || level > xi.r {
        return Err(GeomError::BadLevel {
            level,
            order: xi.r,
        });
    }
    Ok(xi.swap_levels(level - 1, level))
}

pub fn project(xi: &BundlePoint, kind: Projection) -> Result<BundlePoint> {
    let depth = match kind {
        Projection::Pi => 0,
        Projection::DPi => 1,
        Projection::DDPi => 2,
    };
    if xi.r < depth + 1 {
        return Err(GeomError::BadOrder {
            order: xi.r,
            needed: depth + 1,
        });
    }
    Ok(xi.forget_level(xi.r - depth))
}

/// `p^(r)_a : T^r M → TM`, in closed form `(ξ_∅, ξ_{a})`.
pub fn canonical_projection(xi: &BundlePoint, a: usize) -> Result<BundlePoint> {
    if xi.r == 0 {
        return Err(GeomError::BadOrder {
            order: 0,
            needed: 1,
        });
    }
    if a == 0 || a > xi.r {
        return Err(GeomError::BadIndex {
            index: a,
            order: xi.r,
        });
    }
    BundlePoint::tangent(xi.block(0), xi.block(mask::bit(a)))
}

/// Fiber addition or scaling on `T^r M → T^{r-1} M`.
///
/// `Add` requires both points to share all blocks without level `r`;
/// `Scale` ignores `eta`'s contents beyond its dimensions and uses `lambda`.
pub fn fiber_combine(
    xi: &BundlePoint,
    eta: &BundlePoint,
    lambda: f64,
    mode: FiberOp,
) -> Result<BundlePoint> {
    if xi.r == 0 {
        return Err(GeomError::BadOrder {
            order: 0,
            needed: 1,
        });
    }
    let top = mask::bit(xi.r);
    let mut out = xi.clone();
    match mode {
        FiberOp::Scale => {
            for m in (0..xi.block_count()).filter(|m| m & top != 0) {
                out.block_mut(m).iter_mut().for_each(|v| *v *= lambda);
            }
        }
        FiberOp::Add => {
            if eta.n != xi.n || eta.r != xi.r {
                return Err(GeomError::DimensionMismatch {
                    expected: xi.data.len(),
                    got: eta.data.len(),
                });
            }
            let mut gap = 0.0f64;
            for m in (0..xi.block_count()).filter(|m| m & top == 0) {
                for (a, b) in xi.block(m).iter().zip(eta.block(m)) {
                    gap = gap.max((a - b).abs());
                }
            }
            if gap > BASE_TOLERANCE {
                return Err(GeomError::BaseMismatch { gap });
            }
            for m in (0..xi.block_count()).filter(|m| m & top != 0) {
                let add = eta.block(m).to_vec();
                out.block_mut(m)
                    .iter_mut()
                    .zip(add)
                    .for_each(|(v, w)| *v += w);
            }
        }
    }
    Ok(out)
}

/// The Liouville vector `C_r(ξ) = ∂_s((1+s) ξ)|_{s=0}` as a point of
/// `T^{r+1} M`.
pub fn liouville(xi: &BundlePoint) -> Result<BundlePoint> {
    if xi.r == 0 {
        return Err(GeomError::BadOrder {
            order: 0,
            needed: 1,
        });
    }
    let top = mask::bit(xi.r);
    let mut fiber = BundlePoint::zeros(xi.n, xi.r);
    for m in (0..xi.block_count()).filter(|m| m & top != 0) {
        fiber.block_mut(m).copy_from_slice(xi.block(m));
    }
    BundlePoint::assemble(xi, &fiber)
}

pub fn in_slashed(xi: &BundlePoint) -> SlashedFlag {
    slashed_with(xi, 0.0)
}

/// Slashed membership with an explicit threshold on the velocity block.
pub fn slashed_with(xi: &BundlePoint, threshold: f64) -> SlashedFlag {
    if xi.r == 0 {
        return SlashedFlag { member: true };
    }
    let v = xi.block(mask::bit(xi.r));
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    SlashedFlag {
        member: norm > threshold,
    }
}

/// The multilinear map `W(s^1, …, s^r) = Σ_A ξ_A ∏_{j ∈ A} s^{r-j+1}` whose
/// mixed partial `∂_{s^1} ⋯ ∂_{s^r} W |_0` is `ξ`.
#[derive(Clone, Debug)]
pub struct RepresentativeMap {
    point: BundlePoint,
}

pub fn representative_map(xi: &BundlePoint) -> RepresentativeMap {
    RepresentativeMap { point: xi.clone() }
}

impl RepresentativeMap {
    pub fn order(&self) -> usize {
        self.point.r
    }

    pub fn point(&self) -> &BundlePoint {
        &self.point
    }

    /// `W(s)`; `s[0]` is `s^1`.
    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        let r = self.point.r;
        assert_eq!(s.len(), r, "expected {r} parameters");
        let mut out = vec![0.0; self.point.n];
        for m in 0..self.point.block_count() {
            let weight: f64 = (1..=r)
                .filter(|&j| mask::has(m, j))
                .map(|j| s[r - j])
                .product();
            for (o, v) in out.iter_mut().zip(self.point.block(m)) {
                *o += weight * v;
            }
        }
        out
    }
}

impl Serialize for BundlePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BundlePointRepr {
            n: self.n,
            r: self.r,
            blocks: self.blocks(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BundlePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BundlePointRepr::deserialize(deserializer)?;
        if repr.blocks.len() != 1 << repr.r {
            return Err(serde::de::Error::custom(format!(
                "expected {} blocks for r = {}, got {}",
                1usize << repr.r,
                repr.r,
                repr.blocks.len()
            )));
        }
        let mut data = Vec::with_capacity(repr.n << repr.r);
        for b in &repr.blocks {
            if b.len() != repr.n {
                return Err(serde::de::Error::custom(format!(
                    "block of length {} in a point with n = {}",
                    b.len(),
                    repr.n
                )));
            }
            data.extend_from_slice(b);
        }
        Ok(BundlePoint {
            n: repr.n,
            r: repr.r,
            data,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundlePointRepr {
    n: usize,
    r: usize,
    blocks: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(n: usize, r: usize, v: &[f64]) -> BundlePoint {
        BundlePoint::new(n, r, v.to_vec()).unwrap()
    }

    pub(crate) fn random_point(rng: &mut ChaCha8Rng, n: usize, r: usize) -> BundlePoint {
        let data = (0..n << r).map(|_| rng.random_range(-3.0..3.0)).collect();
        BundlePoint::new(n, r, data).unwrap()
    }

    /// Nested `w^(k)` construction used as an oracle for the normal form.
    fn nested_w(blocks: &[Vec<f64>], s: &[f64]) -> Vec<f64> {
        if s.is_empty() {
            return blocks[0].clone();
        }
        let half = blocks.len() / 2;
        let (u, v) = blocks.split_at(half);
        let merged: Vec<Vec<f64>> = u
            .iter()
            .zip(v)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s[0] * y).collect())
            .collect();
        nested_w(&merged, &s[1..])
    }

    #[test]
    fn involution_swaps_middle_blocks() {
        let xi = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(involution(&xi, 2).unwrap().as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert!(matches!(involution(&xi, 3), Err(GeomError::BadLevel { .. })));
        assert!(matches!(
            involution(&pt(1, 1, &[1.0, 2.0]), 2),
            Err(GeomError::BadLevel { .. })
        ));
    }

    #[test]
    fn involution_exchanges_mixed_partials() {
        // W(s, t) = s² t: the curve t ↦ ∂_s W lifted by ∂_t versus the
        // other ordering, both by central differences at (1, 1).
        let w = |s: f64, t: f64| s * s * t;
        let h = 1e-4;
        let ds = |s: f64, t: f64| (w(s + h, t) - w(s - h, t)) / (2.0 * h);
        let dt = |s: f64, t: f64| (w(s, t + h) - w(s, t - h)) / (2.0 * h);
        let dtds = (ds(1.0, 1.0 + h) - ds(1.0, 1.0 - h)) / (2.0 * h);
        // ∂_t ∂_s c = (c, ∂_s c, ∂_t c, ∂_t∂_s c)
        let ts = pt(1, 2, &[w(1.0, 1.0), ds(1.0, 1.0), dt(1.0, 1.0), dtds]);
        let dsdt = (dt(1.0 + h, 1.0) - dt(1.0 - h, 1.0)) / (2.0 * h);
        let st = pt(1, 2, &[w(1.0, 1.0), dt(1.0, 1.0), ds(1.0, 1.0), dsdt]);
        let swapped = involution(&st, 2).unwrap();
        assert!(swapped.max_abs_diff(&ts) < 1e-6);
    }

    #[test]
    fn projections_on_second_bundle() {
        let xi = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(project(&xi, Projection::Pi).unwrap().as_slice(), &[1.0, 2.0]);
        assert_eq!(project(&xi, Projection::DPi).unwrap().as_slice(), &[1.0, 3.0]);
        assert!(matches!(
            project(&xi, Projection::DDPi),
            Err(GeomError::BadOrder { .. })
        ));
        assert!(matches!(
            project(&BundlePoint::base(&[1.0]), Projection::Pi),
            Err(GeomError::BadOrder { .. })
        ));
    }

    #[test]
    fn canonical_projection_examples() {
        let xi = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(canonical_projection(&xi, 1).unwrap().as_slice(), &[1.0, 2.0]);
        assert_eq!(canonical_projection(&xi, 2).unwrap().as_slice(), &[1.0, 3.0]);
        let tm = pt(2, 1, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(canonical_projection(&tm, 1).unwrap(), tm);
        assert!(matches!(
            canonical_projection(&xi, 3),
            Err(GeomError::BadIndex { .. })
        ));
    }

    fn recursive_projection(xi: &BundlePoint, a: usize) -> BundlePoint {
        let r = xi.order();
        if r == 1 {
            return xi.clone();
        }
        if a < r {
            recursive_projection(&project(xi, Projection::Pi).unwrap(), a)
        } else {
            recursive_projection(&project(xi, Projection::DPi).unwrap(), r - 1)
        }
    }

    #[test]
    fn canonical_projection_matches_recursion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for r in 1..=5 {
            for _ in 0..20 {
                let xi = random_point(&mut rng, 2, r);
                for a in 1..=r {
                    assert_eq!(
                        canonical_projection(&xi, a).unwrap(),
                        recursive_projection(&xi, a)
                    );
                }
            }
        }
    }

    #[test]
    fn fiber_operations() {
        let a = pt(1, 1, &[1.0, 2.0]);
        let b = pt(1, 1, &[1.0, 5.0]);
        assert_eq!(
            fiber_combine(&a, &b, 0.0, FiberOp::Add).unwrap().as_slice(),
            &[1.0, 7.0]
        );
        assert_eq!(
            fiber_combine(&a, &a, 0.0, FiberOp::Scale).unwrap().as_slice(),
            &[1.0, 0.0]
        );
        let xi = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            fiber_combine(&xi, &xi, 2.0, FiberOp::Scale).unwrap().as_slice(),
            &[1.0, 2.0, 6.0, 8.0]
        );
        let c = pt(1, 1, &[1.5, 5.0]);
        assert!(matches!(
            fiber_combine(&a, &c, 0.0, FiberOp::Add),
            Err(GeomError::BaseMismatch { .. })
        ));
    }

    #[test]
    fn liouville_field() {
        let xi = pt(1, 1, &[1.0, 2.0]);
        assert_eq!(liouville(&xi).unwrap().as_slice(), &[1.0, 2.0, 0.0, 2.0]);
        let zero_fiber = pt(2, 1, &[1.0, 2.0, 0.0, 0.0]);
        let c = liouville(&zero_fiber).unwrap();
        assert!(c.as_slice()[4..].iter().all(|&v| v == 0.0));
        let xi2 = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            liouville(&xi2).unwrap().as_slice(),
            &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0, 3.0, 4.0]
        );
    }

    #[test]
    fn slashed_membership() {
        assert!(!in_slashed(&pt(1, 1, &[1.0, 0.0])).member);
        assert!(!in_slashed(&pt(1, 2, &[1.0, 2.0, 0.0, 4.0])).member);
        assert!(in_slashed(&pt(1, 2, &[1.0, 0.0, 3.0, 0.0])).member);
    }

    #[test]
    fn representative_map_forms() {
        let xi = pt(1, 2, &[1.0, 2.0, 3.0, 4.0]);
        let w = representative_map(&xi);
        let (s1, s2) = (0.3, -0.7);
        let want = 1.0 + 3.0 * s1 + 2.0 * s2 + 4.0 * s1 * s2;
        assert!((w.eval(&[s1, s2])[0] - want).abs() < 1e-15);

        let line = representative_map(&pt(2, 1, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(line.eval(&[0.5]), vec![2.5, 4.0]);

        let mut only_base = BundlePoint::zeros(2, 3);
        only_base.block_mut(0).copy_from_slice(&[1.0, -1.0]);
        let c = representative_map(&only_base);
        assert_eq!(c.eval(&[0.1, 0.2, 0.3]), vec![1.0, -1.0]);
    }

    #[test]
    fn representative_map_matches_nested_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for r in 1..=4 {
            let xi = random_point(&mut rng, 2, r);
            let w = representative_map(&xi);
            for _ in 0..10 {
                let s: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
                let a = w.eval(&s);
                let b = nested_w(&xi.blocks(), &s);
                for (x, y) in a.iter().zip(&b) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn representative_map_mixed_partials_reproduce_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-3;
        for r in 1..=3 {
            let xi = random_point(&mut rng, 2, r);
            let w = representative_map(&xi);
            for m in 0..1usize << r {
                // mixed central difference along the parameters of mask m
                let dirs: Vec<usize> = (1..=r).filter(|&j| mask::has(m, j)).map(|j| r - j).collect();
                let mut acc = [0.0; 2];
                for signs in 0..1usize << dirs.len() {
                    let mut s = vec![0.0; r];
                    let mut sign = 1.0;
                    for (k, &d) in dirs.iter().enumerate() {
                        if signs & (1 << k) != 0 {
                            s[d] = h;
                        } else {
                            s[d] = -h;
                            sign = -sign;
                        }
                    }
                    for (a, v) in acc.iter_mut().zip(w.eval(&s)) {
                        *a += sign * v;
                    }
                }
                let scale = (2.0 * h).powi(dirs.len() as i32);
                for (a, want) in acc.iter().zip(xi.block(m)) {
                    assert!((a / scale - want).abs() < 1e-6, "r={r} mask={m}");
                }
            }
        }
    }

    #[test]
    fn structural_identities_hold_exactly() {
        use Projection::*;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pi = |p: &BundlePoint| project(p, Pi).unwrap();
        let dpi = |p: &BundlePoint| project(p, DPi).unwrap();
        let ddpi = |p: &BundlePoint| project(p, DDPi).unwrap();
        let kappa = |p: &BundlePoint, k: usize| involution(p, k).unwrap();
        for _ in 0..50 {
            for r in 2..=4 {
                let xi = random_point(&mut rng, 2, r);
                assert_eq!(kappa(&kappa(&xi, r), r), xi);
            }
            for r in 2..=3 {
                // π_r ∘ Dκ_r = κ_r ∘ π_r on T^{r+1}M
                let xi = random_point(&mut rng, 2, r + 1);
                assert_eq!(pi(&kappa(&xi, r)), kappa(&pi(&xi), r));
            }
            for r in 1..=3 {
                let xi = random_point(&mut rng, 2, r + 1);
                assert_eq!(dpi(&xi), pi(&kappa(&xi, r + 1)));
                assert_eq!(pi(&dpi(&xi)), pi(&pi(&xi)));
            }
            for r in 1..=2 {
                let xi = random_point(&mut rng, 2, r + 2);
                assert_eq!(dpi(&pi(&xi)), pi(&ddpi(&xi)));
                assert_eq!(ddpi(&kappa(&xi, r + 2)), kappa(&ddpi(&xi), r + 1));
            }
        }
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 0..=3 {
            let mut xi = random_point(&mut rng, 3, r);
            xi.data[0] = 0.1 + 0.2;
            xi.data[1] = f64::MIN_POSITIVE;
            xi.data[2] = -1.0 / 3.0;
            let text = serde_json::to_string(&xi).unwrap();
            let back: BundlePoint = serde_json::from_str(&text).unwrap();
            assert!(back
                .as_slice()
                .iter()
                .zip(xi.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        let text = r#"{"n":1,"r":1,"blocks":[[1.0],[2.0]]}"#;
        let p: BundlePoint = serde_json::from_str(text).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 2.0]);
        assert!(serde_json::from_str::<BundlePoint>(r#"{"n":1,"r":2,"blocks":[[1.0],[2.0]]}"#).is_err());
        assert!(serde_json::from_str::<BundlePoint>(r#"{"n":2,"r":1,"blocks":[[1.0],[2.0]]}"#).is_err());
    }
}
