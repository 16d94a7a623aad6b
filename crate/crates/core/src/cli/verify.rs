//! `jetspray verify`: named property checks replayed against one spray.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{load_spray, Thresholds};
use super::output::{write_json, write_output, Format};
use super::{CliError, VerifyArgs};
use crate::bundle::{self, BundlePoint, Projection};
use crate::error::{GeomError, Result};
use crate::flow::{self, GeodesicRecord};
use crate::jacobi::{self, ChartOptions, ParallelFrame, TensorAlongCurve, Valence};
use crate::linalg;
use crate::multidual::{md_lift, BundleFunction, Lift, MultiDual};
use crate::spray::{Homogeneity, Semispray};
use crate::variation::{self, GeodesicVariation, Stencil};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

/// One line of the report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub status: Status,
    pub residual: Option<f64>,
    pub threshold: f64,
    pub seconds: Option<f64>,
}

enum Outcome {
    Measured(f64),
    Skipped,
}

type CheckFn = fn(&Ctx) -> Result<Outcome>;

struct Ctx {
    spray: Semispray,
    is_spray: bool,
    seed: u64,
}

impl Ctx {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    fn spray_only(&self, f: impl FnOnce() -> Result<f64>) -> Result<Outcome> {
        if self.is_spray {
            f().map(Outcome::Measured)
        } else {
            Ok(Outcome::Skipped)
        }
    }
}

const CHECKS: &[(&str, CheckFn)] = &[
    ("bundle.canonical_projection_base", canonical_projection_base),
    ("bundle.canonical_projections_distinct", canonical_projections_distinct),
    ("bundle.ddpi_kappa", ddpi_kappa),
    ("bundle.dpi_pi_kappa", dpi_pi_kappa),
    ("bundle.kappa_squared", kappa_squared),
    ("bundle.pi_ddpi", pi_ddpi),
    ("bundle.pi_dkappa", pi_dkappa),
    ("bundle.pi_dpi", pi_dpi),
    ("bundle.representative_map", representative_map),
    ("flow.determinism", determinism),
    ("flow.dpi_projection", dpi_projection),
    ("flow.flow_lift", flow_lift),
    ("flow.involution", flow_involution),
    ("flow.pi_projection", pi_projection),
    ("flow.rk4_order", rk4_order),
    ("jacobi.chart", chart),
    ("jacobi.field_equivalence", field_equivalence),
    ("jacobi.liouville_j2", liouville_j2),
    ("jacobi.riccati", riccati),
    ("jacobi.shape_operator_j1", shape_operator_j1),
    ("jacobi.tensor_residual", tensor_residual),
    ("jacobi.transversality_preserved", transversality_preserved),
    ("multidual.associativity", associativity),
    ("multidual.nilpotency", nilpotency),
    ("spray.connection_fd", connection_fd),
    ("spray.endomorphism_fd", endomorphism_fd),
    ("spray.lift_homogeneity", lift_homogeneity),
    ("spray.lift_r1", lift_r1),
    ("spray.two_homogeneity", two_homogeneity),
    ("variation.base_slice", base_slice),
    ("variation.fd_order", fd_order),
    ("variation.forward_r1", forward_r1),
    ("variation.forward_r2", forward_r2),
    ("variation.projection_identity", projection_identity),
    ("variation.round_trip", round_trip),
];

/// Run every check against `spray`, in parallel, sorted by name.
pub fn run_checks(spray: &Semispray, seed: u64, thresholds: &Thresholds, timings: bool) -> Vec<CheckReport> {
    let class = spray.classify_homogeneity(200, seed);
    let ctx = Ctx {
        spray: spray.clone(),
        is_spray: class.class == Homogeneity::Spray,
        seed,
    };
    let mut out: Vec<CheckReport> = CHECKS
        .par_iter()
        .map(|&(name, f)| {
            let start = Instant::now();
            let outcome = f(&ctx);
            let seconds = timings.then(|| start.elapsed().as_secs_f64());
            let threshold = thresholds.get(name);
            let (status, residual) = match outcome {
                Ok(Outcome::Measured(v)) => {
                    let status = if thresholds.passes(name, v) { Status::Pass } else { Status::Fail };
                    (status, Some(v))
                }
                Ok(Outcome::Skipped) => (Status::Skip, None),
                Err(e) => {
                    eprintln!("{name}: {e}");
                    (Status::Fail, None)
                }
            };
            CheckReport {
                check: name.to_string(),
                status,
                residual,
                threshold,
                seconds,
            }
        })
        .collect();
    out.sort_by(|a, b| a.check.cmp(&b.check));
    out
}

pub fn run(a: VerifyArgs) -> std::result::Result<(), CliError> {
    let spray = load_spray(&a.common.spray)?;
    let thresholds = Thresholds::with_overrides(&a.common.threshold)?;
    let reports = run_checks(&spray, a.seed, &thresholds, a.timings);
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    write_output(a.common.output.as_deref(), |w| match a.common.format.unwrap_or(Format::Json) {
        Format::Json => write_json(w, &reports),
        Format::Csv => {
            writeln!(w, "check,status,residual,threshold,seconds")?;
            for r in &reports {
                let status = serde_json::to_value(r.status).map_err(std::io::Error::other)?;
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.check,
                    status.as_str().unwrap_or_default(),
                    opt(r.residual),
                    opt(Some(r.threshold)),
                    opt(r.seconds)
                )?;
            }
            Ok(())
        }
    })?;
    for r in reports.iter().filter(|r| r.status != Status::Pass) {
        let mark = if r.status == Status::Skip { "SKIP" } else { "FAIL" };
        eprintln!("{mark} {}", r.check);
    }
    let failed: Vec<String> = reports
        .iter()
        .filter(|r| r.status == Status::Fail)
        .map(|r| r.check.clone())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Residual(failed))
    }
}

/// `0` when the points agree bit for bit, otherwise their largest
/// difference (at least the smallest positive float).
fn bitwise_gap(a: &BundlePoint, b: &BundlePoint) -> f64 {
    let same = a.order() == b.order()
        && a.dim() == b.dim()
        && a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits());
    if same {
        0.0
    } else if a.as_slice().len() != b.as_slice().len() {
        f64::INFINITY
    } else {
        a.max_abs_diff(b).max(f64::MIN_POSITIVE)
    }
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, r: usize) -> BundlePoint {
    let data = (0..n << r).map(|_| rng.random_range(-3.0..3.0)).collect();
    BundlePoint::new(n, r, data).expect("shape")
}

/// Worst gap of `lhs(ξ)` vs `rhs(ξ)` over 100 random points of order `r`
/// for every `n ≤ 3` and listed `r`.
fn identity(
    ctx: &Ctx,
    salt: u64,
    orders: std::ops::RangeInclusive<usize>,
    lhs: impl Fn(&BundlePoint) -> Result<BundlePoint>,
    rhs: impl Fn(&BundlePoint) -> Result<BundlePoint>,
) -> Result<Outcome> {
    let mut rng = ctx.rng(salt);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        for n in 1..=3 {
            for r in orders.clone() {
                let xi = random_point(&mut rng, n, r);
                worst = worst.max(bitwise_gap(&lhs(&xi)?, &rhs(&xi)?));
            }
        }
    }
    Ok(Outcome::Measured(worst))
}

fn pi(p: &BundlePoint) -> Result<BundlePoint> {
    bundle::project(p, Projection::Pi)
}

fn dpi(p: &BundlePoint) -> Result<BundlePoint> {
    bundle::project(p, Projection::DPi)
}

fn ddpi(p: &BundlePoint) -> Result<BundlePoint> {
    bundle::project(p, Projection::DDPi)
}

fn kappa_squared(ctx: &Ctx) -> Result<Outcome> {
    identity(ctx, 1, 2..=4, |x| bundle::involution(&bundle::involution(x, x.order())?, x.order()), |x| Ok(x.clone()))
}

fn pi_dkappa(ctx: &Ctx) -> Result<Outcome> {
    // π ∘ Dκ = κ ∘ π on T^{r+1}M
    identity(ctx, 2, 3..=4, |x| pi(&bundle::involution(x, x.order() - 1)?), |x| {
        bundle::involution(&pi(x)?, x.order() - 1)
    })
}

fn dpi_pi_kappa(ctx: &Ctx) -> Result<Outcome> {
    identity(ctx, 3, 2..=4, dpi, |x| pi(&bundle::involution(x, x.order())?))
}

fn pi_dpi(ctx: &Ctx) -> Result<Outcome> {
    identity(ctx, 4, 2..=4, |x| pi(&dpi(x)?), |x| pi(&pi(x)?))
}

fn pi_ddpi(ctx: &Ctx) -> Result<Outcome> {
    identity(ctx, 5, 3..=4, |x| dpi(&pi(x)?), |x| pi(&ddpi(x)?))
}

fn ddpi_kappa(ctx: &Ctx) -> Result<Outcome> {
    identity(ctx, 6, 3..=4, |x| ddpi(&bundle::involution(x, x.order())?), |x| {
        bundle::involution(&ddpi(x)?, x.order() - 1)
    })
}

fn canonical_projection_base(ctx: &Ctx) -> Result<Outcome> {
    identity(
        ctx,
        7,
        1..=4,
        |x| {
            let outs: Vec<BundlePoint> = (1..=x.order()).map(|a| bundle::canonical_projection(x, a)).collect::<Result<_>>()?;
            let bases: Vec<f64> = outs.iter().flat_map(|p| p.block(0).to_vec()).collect();
            Ok(BundlePoint::base(&bases))
        },
        |x| {
            let bases: Vec<f64> = (0..x.order()).flat_map(|_| x.block(0).to_vec()).collect();
            Ok(BundlePoint::base(&bases))
        },
    )
}

/// Number of coinciding pairs among the `r` canonical projections of a
/// random point, summed over `r ≤ 4`.
fn canonical_projections_distinct(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(8);
    let mut coincident = 0usize;
    for r in 1..=4 {
        let xi = random_point(&mut rng, 2, r);
        let outs: Vec<BundlePoint> = (1..=r).map(|a| bundle::canonical_projection(&xi, a)).collect::<Result<_>>()?;
        for a in 0..r {
            for b in a + 1..r {
                if outs[a] == outs[b] {
                    coincident += 1;
                }
            }
        }
    }
    Ok(Outcome::Measured(coincident as f64))
}

/// Central mixed differences of `W` at `s = 0` against the blocks of `ξ`.
fn representative_map(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(9);
    let h = 1e-3;
    let mut worst = 0.0f64;
    for r in 1..=3 {
        let xi = random_point(&mut rng, 2, r);
        let w = bundle::representative_map(&xi);
        for m in 0..1usize << r {
            let dirs: Vec<usize> = (1..=r).filter(|&j| m & (1 << (j - 1)) != 0).map(|j| r - j).collect();
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
                worst = worst.max((a / scale - want).abs());
            }
        }
    }
    Ok(Outcome::Measured(worst))
}

fn random_jet(rng: &mut ChaCha8Rng, order: usize) -> MultiDual {
    MultiDual::new(order, (0..1usize << order).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("order")
}

fn associativity(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(10);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        for order in 0..=4 {
            let (a, b, c) = (random_jet(&mut rng, order), random_jet(&mut rng, order), random_jet(&mut rng, order));
            let left = a.try_mul(&b)?.try_mul(&c)?;
            let right = a.try_mul(&b.try_mul(&c)?)?;
            let ab = a.try_mul(&b)?;
            let ba = b.try_mul(&a)?;
            for k in 0..left.blocks().len() {
                worst = worst
                    .max((left.block(k) - right.block(k)).abs())
                    .max((ab.block(k) - ba.block(k)).abs());
            }
        }
    }
    Ok(Outcome::Measured(worst))
}

fn nilpotency(ctx: &Ctx) -> Result<Outcome> {
    let mut rng = ctx.rng(11);
    let mut worst = 0.0f64;
    for order in 1..=4 {
        for _ in 0..25 {
            let mut blocks: Vec<f64> = (0..1usize << order).map(|_| rng.random_range(-1.0..1.0)).collect();
            blocks[0] = 0.0;
            let a = MultiDual::new(order, blocks)?;
            let mut p = a.clone();
            for _ in 0..order {
                p = p.try_mul(&a)?;
            }
            worst = worst.max(p.blocks().iter().fold(0.0, |m, v| m.max(v.abs())));
        }
    }
    Ok(Outcome::Measured(worst))
}

/// Random `(x, y)` with `|x_i| ≤ 0.5`, `|y_i| ≤ 1` and `|y| ≥ 0.1`.
fn sample_xy(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    loop {
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if linalg::norm(&y) >= 0.1 {
            return (x, y);
        }
    }
}

fn lift_r1(ctx: &Ctx) -> Result<Outcome> {
    let s = &ctx.spray;
    let n = s.dim();
    let mut rng = ctx.rng(12);
    let fns: Vec<(BundleFunction, BundleFunction)> = (0..n)
        .map(|i| {
            let ss = s.clone();
            let gi = BundleFunction::new(n, 1, move |c| Ok(ss.eval(&c[..n], &c[n..])?[i].clone()));
            (md_lift(&gi, Lift::Vertical), md_lift(&gi, Lift::Complete))
        })
        .collect();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (x, y) = sample_xy(&mut rng, n);
        let (dx, dy) = sample_xy(&mut rng, n);
        let xi = BundlePoint::tangent(&x, &dx)?;
        let eta = BundlePoint::tangent(&y, &dy)?;
        let acc = s.lifted_rhs(1, &xi, &eta)?;
        let coords: Vec<f64> = xi.as_slice().iter().chain(eta.as_slice()).copied().collect();
        for (i, (gv, gc)) in fns.iter().enumerate() {
            let (gv, gc) = (gv.eval_real(&coords)?, gc.eval_real(&coords)?);
            worst = worst
                .max((acc.block(0)[i] + 2.0 * gv).abs())
                .max((acc.block(1)[i] + 2.0 * gc).abs());
        }
    }
    Ok(Outcome::Measured(worst))
}

fn fd_connection(s: &Semispray, x: &[f64], y: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = s.dim();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let (mut yp, mut ym) = (y.to_vec(), y.to_vec());
        yp[j] += h;
        ym[j] -= h;
        let (gp, gm) = (s.eval_real(x, &yp)?, s.eval_real(x, &ym)?);
        for i in 0..n {
            m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// `2∂G/∂x − S(N) − N²` by nested central differences.
fn fd_endomorphism(s: &Semispray, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let n = s.dim();
    let (h1, h2) = (1e-5, 1e-4);
    let g = s.eval_real(x, y)?;
    let mut gx = DMatrix::zeros(n, n);
    for j in 0..n {
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h1;
        xm[j] -= h1;
        let (gp, gm) = (s.eval_real(&xp, y)?, s.eval_real(&xm, y)?);
        for i in 0..n {
            gx[(i, j)] = (gp[i] - gm[i]) / (2.0 * h1);
        }
    }
    let shifted = |tau: f64| fd_connection(s, &linalg::axpy(x, tau, y), &linalg::axpy(y, -2.0 * tau, &g), h2);
    let sn = (shifted(h2)? - shifted(-h2)?) / (2.0 * h2);
    let nm = fd_connection(s, x, y, h1)?;
    Ok(gx * 2.0 - sn - &nm * &nm)
}

/// Relative gap `|a − b| / max(1, |a|)` over 20 random points.
fn fd_agreement(ctx: &Ctx, salt: u64, pick: impl Fn(&Semispray, &[f64], &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)>) -> Result<Outcome> {
    let mut rng = ctx.rng(salt);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (x, y) = sample_xy(&mut rng, ctx.spray.dim());
        let (exact, fd) = pick(&ctx.spray, &x, &y)?;
        worst = worst.max(linalg::max_abs(&(&exact - fd)) / linalg::max_abs(&exact).max(1.0));
    }
    Ok(Outcome::Measured(worst))
}

fn connection_fd(ctx: &Ctx) -> Result<Outcome> {
    fd_agreement(ctx, 13, |s, x, y| Ok((s.connection(x, y)?, fd_connection(s, x, y, 1e-5)?)))
}

fn endomorphism_fd(ctx: &Ctx) -> Result<Outcome> {
    fd_agreement(ctx, 14, |s, x, y| Ok((s.jacobi_endomorphism(x, y)?, fd_endomorphism(s, x, y)?)))
}

/// `lifted_rhs` at order 2 scales by `λ²` when every velocity block
/// scales by `λ`.
fn lift_homogeneity(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| {
        let s = &ctx.spray;
        let n = s.dim();
        let mut rng = ctx.rng(15);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let xi = BundlePoint::new(n, 2, (0..4 * n).map(|_| rng.random_range(-0.4..0.4)).collect())?;
            let (y, _) = sample_xy(&mut rng, n);
            let mut data: Vec<f64> = (0..4 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            data[..n].copy_from_slice(&y);
            let eta = BundlePoint::new(n, 2, data)?;
            let lam = rng.random_range(0.5..2.0);
            let scaled = BundlePoint::new(n, 2, eta.as_slice().iter().map(|v| lam * v).collect())?;
            let (a, b) = (s.lifted_rhs(2, &xi, &eta)?, s.lifted_rhs(2, &xi, &scaled)?);
            let scale = a.as_slice().iter().fold(1.0f64, |m, v| m.max(lam * lam * v.abs()));
            for (u, v) in a.as_slice().iter().zip(b.as_slice()) {
                worst = worst.max((lam * lam * u - v).abs() / scale);
            }
        }
        Ok(worst)
    })
}

fn two_homogeneity(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| Ok(ctx.spray.classify_homogeneity(200, ctx.seed).max_violation))
}

/// A state of `S^(r)` whose base block is `(x, y)` with `x = (0.1, …)`,
/// `y = e_1 + 0.3 e_2`, and small pseudo-random higher blocks.
fn lifted_state(ctx: &Ctx, r: usize, salt: u64) -> Result<(BundlePoint, BundlePoint)> {
    let n = ctx.spray.dim();
    let mut rng = ctx.rng(salt);
    let mut pos: Vec<f64> = (0..n << r).map(|_| rng.random_range(-0.3..0.3)).collect();
    let mut vel: Vec<f64> = (0..n << r).map(|_| rng.random_range(-0.3..0.3)).collect();
    for i in 0..n {
        pos[i] = 0.1 / (i + 1) as f64;
        vel[i] = match i {
            0 => 1.0,
            1 => 0.3,
            _ => 0.0,
        };
    }
    Ok((BundlePoint::new(n, r, pos)?, BundlePoint::new(n, r, vel)?))
}

fn lifted_geodesic(ctx: &Ctx, r: usize) -> Result<GeodesicRecord> {
    let (pos, vel) = lifted_state(ctx, r, 16 + r as u64)?;
    let g = flow::integrate_geodesic(&ctx.spray, r, (&pos, &vel), (0.0, 1.0), flow::DEFAULT_STEP)?;
    g.require_complete()?;
    Ok(g)
}

fn projected_residual(ctx: &Ctx, orders: std::ops::RangeInclusive<usize>, map: impl Fn(&GeodesicRecord) -> Result<GeodesicRecord>) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for r in orders {
        let g = lifted_geodesic(ctx, r)?;
        worst = worst.max(flow::geodesic_residual(&ctx.spray, &map(&g)?)?);
    }
    Ok(Outcome::Measured(worst))
}

fn pi_projection(ctx: &Ctx) -> Result<Outcome> {
    projected_residual(ctx, 1..=3, |g| g.project(Projection::Pi))
}

fn dpi_projection(ctx: &Ctx) -> Result<Outcome> {
    projected_residual(ctx, 2..=3, |g| g.project(Projection::DPi))
}

fn flow_involution(ctx: &Ctx) -> Result<Outcome> {
    projected_residual(ctx, 2..=3, |g| g.involution(g.r))
}

fn determinism(ctx: &Ctx) -> Result<Outcome> {
    let (a, b) = (lifted_geodesic(ctx, 2)?, lifted_geodesic(ctx, 2)?);
    let same = a.t_grid.iter().zip(&b.t_grid).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.pos.iter().zip(&b.pos).chain(a.vel.iter().zip(&b.vel)).all(|(p, q)| bitwise_gap(p, q) == 0.0);
    Ok(Outcome::Measured(if same && a.len() == b.len() { 0.0 } else { 1.0 }))
}

/// Error ratio of the final state under step halving, against a run with
/// a step 32 times finer.
fn rk4_order(ctx: &Ctx) -> Result<Outcome> {
    let (pos, vel) = lifted_state(ctx, 0, 20)?;
    let end = |h: f64| -> Result<BundlePoint> {
        let g = flow::integrate_geodesic(&ctx.spray, 0, (&pos, &vel), (0.0, 2.0), h)?;
        g.require_complete()?;
        Ok(g.last_state())
    };
    let reference = end(0.04 / 32.0)?;
    let coarse = end(0.04)?.max_abs_diff(&reference);
    let fine = end(0.02)?.max_abs_diff(&reference);
    order_ratio(coarse, fine)
}

fn flow_lift(ctx: &Ctx) -> Result<Outcome> {
    let n = ctx.spray.dim();
    let mut worst = 0.0f64;
    for r in 0..=1usize {
        let mut rng = ctx.rng(21 + r as u64);
        let mut data: Vec<f64> = (0..n << (r + 2)).map(|_| rng.random_range(-0.3..0.3)).collect();
        // nonzero base velocity at level r+1 and for the lifted flow
        data[(1usize << r) * n] += 1.0;
        data[(1usize << (r + 1)) * n] += 1.0;
        let xi = BundlePoint::new(n, r + 2, data)?;
        worst = worst.max(flow::check_flow_lift(&ctx.spray, r, &xi, 0.5, flow::DEFAULT_STEP)?);
    }
    Ok(Outcome::Measured(worst))
}

/// Two-parameter family through `x = (0.1, …)`, `y = e_1 + 0.3 e_2`,
/// moving position along `e_1` and velocity along `e_2`, over `[0, 2]`.
fn sample_variation(ctx: &Ctx) -> GeodesicVariation {
    let n = ctx.spray.dim();
    let x0: Vec<f64> = (0..n).map(|i| 0.1 / (i + 1) as f64).collect();
    let mut v0 = vec![0.0; n];
    v0[0] = 1.0;
    if n > 1 {
        v0[1] = 0.3;
    }
    let init = move |s: &[f64]| {
        let mut x = x0.clone();
        let mut y = v0.clone();
        x[0] += 0.5 * s[0];
        y[n.min(2) - 1] += 0.5 * s[1];
        x[n - 1] += 0.2 * s[1];
        Ok((x, y))
    };
    GeodesicVariation::new(ctx.spray.clone(), 2, 0.1, (0.0, 2.0), flow::DEFAULT_STEP, init)
}

fn forward_r1(ctx: &Ctx) -> Result<Outcome> {
    let v = sample_variation(ctx);
    let a = variation::verify_variation_theorem_forward(&v, &[1], Stencil::default())?;
    let b = variation::verify_variation_theorem_forward(&v, &[2], Stencil::default())?;
    Ok(Outcome::Measured(a.max(b)))
}

fn forward_r2(ctx: &Ctx) -> Result<Outcome> {
    let v = sample_variation(ctx);
    Ok(Outcome::Measured(variation::verify_variation_theorem_forward(&v, &[1, 2], Stencil::default())?))
}

/// Residual ratio between `h_s` and `h_s/2` with plain central differences.
fn fd_order(ctx: &Ctx) -> Result<Outcome> {
    let v = sample_variation(ctx);
    let run = |hs: f64| variation::verify_variation_theorem_forward(&v, &[1, 2], Stencil { hs, richardson: false });
    let (coarse, fine) = (run(4e-3)?, run(2e-3)?);
    order_ratio(coarse, fine)
}

/// Below this error the scheme is exact on the problem up to rounding and
/// no convergence order can be observed (linear flows commute with both
/// RK4 and the parameter stencil).
const ROUNDING_FLOOR: f64 = 1e-11;

fn order_ratio(coarse: f64, fine: f64) -> Result<Outcome> {
    if coarse < ROUNDING_FLOOR {
        return Ok(Outcome::Skipped);
    }
    Ok(Outcome::Measured(coarse / fine.max(f64::MIN_POSITIVE)))
}

fn base_slice(ctx: &Ctx) -> Result<Outcome> {
    let v = sample_variation(ctx);
    let base = v.base_geodesic()?;
    let d = variation::mixed_derivative(&v, &[1, 2])?;
    let mut worst = 0.0f64;
    for (p, b) in d.values.iter().zip(&base.pos) {
        let same = p.block(0).iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits());
        if !same {
            worst = worst.max(linalg::max_abs_diff(p.block(0), b.as_slice()).max(f64::MIN_POSITIVE));
        }
    }
    Ok(Outcome::Measured(worst))
}

fn projection_identity(ctx: &Ctx) -> Result<Outcome> {
    let v = sample_variation(ctx);
    Ok(Outcome::Measured(variation::projection_identity_check(&v, 2, variation::DEFAULT_HS)?))
}

fn round_trip(ctx: &Ctx) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for r in 1..=2 {
        let g = lifted_geodesic(ctx, r)?;
        let v = variation::variation_from_geodesic(&ctx.spray, &g)?;
        worst = worst.max(variation::round_trip_residual(&v, &g, Stencil::default())?);
    }
    Ok(Outcome::Measured(worst))
}

/// Geodesic from the origin along `e_1` over `[0, 2.8]`, its frame, and
/// the Jacobi tensor with `J(0) = 0`, `∇J(0) = Id` on `W`.
fn jacobi_base(ctx: &Ctx) -> Result<(ParallelFrame, jacobi::JacobiTensor)> {
    let n = ctx.spray.dim();
    if n < 2 {
        return Err(GeomError::InvalidArgument("Jacobi tensors need n ≥ 2".into()));
    }
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let g = flow::integrate_geodesic(
        &ctx.spray,
        0,
        (&BundlePoint::base(&vec![0.0; n]), &BundlePoint::base(&e1)),
        (0.0, 2.8),
        flow::DEFAULT_STEP,
    )?;
    g.require_complete()?;
    let frame = ParallelFrame::new(&ctx.spray, &g)?;
    let jt = jacobi::integrate_jacobi_tensor(&frame, &DMatrix::zeros(n, n), &frame.transverse_projector(0))?;
    Ok((frame, jt))
}

const RICCATI_WINDOW: (f64, f64) = (0.3, 2.8);

fn tensor_residual(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| Ok(jacobi_base(ctx)?.1.residual))
}

fn field_equivalence(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| {
        let (frame, jt) = jacobi_base(ctx)?;
        let v = TensorAlongCurve::new(
            Valence::Vector,
            frame.t_grid().to_vec(),
            frame.e.iter().map(|e| e.columns(0, 1).into_owned()).collect(),
        );
        jacobi::jacobi_field_equivalence(&frame, &v, &jt)
    })
}

fn transversality_preserved(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| {
        let (frame, jt) = jacobi_base(ctx)?;
        let report = jacobi::check_transversality(&jt.nabla, &frame)?;
        Ok(report.tangent.max(report.image))
    })
}

fn riccati(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| {
        let (frame, jt) = jacobi_base(ctx)?;
        Ok(jacobi::riccati_residual(&jt, &frame, RICCATI_WINDOW)?.residual)
    })
}

fn j1_j2(ctx: &Ctx) -> Result<(f64, f64)> {
    let (frame, jt) = jacobi_base(ctx)?;
    let v = jacobi::variation_from_tensor(&jt, &frame, 0.1)?;
    jacobi::check_j1_j2(&v, &jt, &frame, RICCATI_WINDOW)
}

fn shape_operator_j1(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| Ok(j1_j2(ctx)?.0))
}

fn liouville_j2(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| Ok(j1_j2(ctx)?.1))
}

fn chart(ctx: &Ctx) -> Result<Outcome> {
    ctx.spray_only(|| {
        let (frame, jt) = jacobi_base(ctx)?;
        let c = jacobi::build_chart(&jt, &frame, (0.3, 1.2), ChartOptions::default())?;
        Ok(c.t_line_residual)
    })
}
