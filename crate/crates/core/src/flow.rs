//! Geodesics of the lifted semisprays `S^(r)` and their flows.
//!
//! A geodesic of `S^(r)` is a curve `t ↦ pos(t) ∈ T^r M` with velocity
//! `vel = pos'` solving `vel' = lifted_rhs(pos, vel)`. Integration is
//! classical fixed-step RK4 on a uniform grid.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bundle::{self, BundlePoint, Projection};
use crate::error::{GeomError, Result};
use crate::linalg;
use crate::spray::Semispray;

pub const DEFAULT_STEP: f64 = 1e-3;

/// Base velocity norm below which a state counts as having left the
/// slashed bundle.
pub const SLASHED_THRESHOLD: f64 = 1e-12;

/// Why an integration stopped before the end of the requested span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    LeftSlashed,
    Domain(String),
}

impl fmt::Display for ExitReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExitReason::LeftSlashed => write!(f, "left the slashed bundle"),
            ExitReason::Domain(msg) => write!(f, "left the chart domain: {msg}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicRecord {
    pub spray_label: String,
    pub r: usize,
    pub step: f64,
    pub t_grid: Vec<f64>,
    pub pos: Vec<BundlePoint>,
    pub vel: Vec<BundlePoint>,
    /// Set when the trajectory stopped early; the samples cover the part
    /// that was integrated.
    pub exit: Option<ExitReason>,
}

impl GeodesicRecord {
    pub fn len(&self) -> usize {
        self.t_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.pos[0].dim()
    }

    pub fn is_complete(&self) -> bool {
        self.exit.is_none()
    }

    /// `Err(Truncated)` if the record stopped early.
    pub fn require_complete(&self) -> Result<&Self> {
        match &self.exit {
            None => Ok(self),
            Some(reason) => Err(GeomError::Truncated {
                t: *self.t_grid.last().unwrap_or(&f64::NAN),
                reason: reason.to_string(),
            }),
        }
    }

    /// The state `(pos, vel)` at sample `i` as a point of `T^{r+1} M`.
    pub fn state(&self, i: usize) -> BundlePoint {
        BundlePoint::assemble(&self.pos[i], &self.vel[i]).expect("matching shapes")
    }

    pub fn last_state(&self) -> BundlePoint {
        self.state(self.len() - 1)
    }

    /// Apply a linear bundle map to positions and velocities alike.
    pub fn map_points(
        &self,
        r: usize,
        f: impl Fn(&BundlePoint) -> Result<BundlePoint>,
    ) -> Result<GeodesicRecord> {
        Ok(GeodesicRecord {
            spray_label: self.spray_label.clone(),
            r,
            step: self.step,
            t_grid: self.t_grid.clone(),
            pos: self.pos.iter().map(&f).collect::<Result<_>>()?,
            vel: self.vel.iter().map(&f).collect::<Result<_>>()?,
            exit: self.exit.clone(),
        })
    }

    pub fn project(&self, kind: Projection) -> Result<GeodesicRecord> {
        let r = self.r.checked_sub(1).ok_or(GeomError::BadOrder {
            order: self.r,
            needed: 1,
        })?;
        self.map_points(r, |p| bundle::project(p, kind))
    }

    pub fn involution(&self, level: usize) -> Result<GeodesicRecord> {
        self.map_points(self.r, |p| bundle::involution(p, level))
    }

    /// CSV with header `t, pos[mask][i]..., vel[mask][i]...`.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        let n = if self.is_empty() { 0 } else { self.dim() };
        let blocks = 1usize << self.r;
        let mut header = vec!["t".to_string()];
        for part in ["pos", "vel"] {
            for m in 0..blocks {
                for i in 0..n {
                    header.push(format!("{part}[{m}][{i}]"));
                }
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![self.t_grid[k].to_string()];
            row.extend(self.pos[k].as_slice().iter().map(f64::to_string));
            row.extend(self.vel[k].as_slice().iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Parse the JSON form written by `serde_json`, checking that all
    /// samples share one shape.
    pub fn from_json(text: &str) -> Result<Self> {
        let g: GeodesicRecord = serde_json::from_str(text).map_err(|e| {
            GeomError::Config(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        g.validate()?;
        Ok(g)
    }

    /// Read the CSV layout of [`write_csv`](Self::write_csv). The label is
    /// taken from `label` and the step from the first two samples.
    pub fn read_csv(r: impl BufRead, label: &str) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let bad = |line: usize, msg: String| GeomError::Config(format!("line {}, column 1: {msg}", line + 1));
        let header = match lines.next() {
            Some((_, Ok(h))) => h,
            Some((i, Err(e))) => return Err(bad(i, e.to_string())),
            None => return Err(bad(0, "empty file".into())),
        };
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.first() != Some(&"t") || cols.len() < 3 || !(cols.len() - 1).is_multiple_of(2) {
            return Err(bad(0, "expected header t,pos[..][..]...,vel[..][..]...".into()));
        }
        let half = (cols.len() - 1) / 2;
        // the last position column names the highest mask and component
        let (mut blocks, mut n) = (0usize, 0usize);
        for c in &cols[1..=half] {
            let inner = c.strip_prefix("pos[").and_then(|c| c.strip_suffix(']'));
            let parsed = inner.and_then(|c| {
                let (m, i) = c.split_once("][")?;
                Some((m.parse::<usize>().ok()?, i.parse::<usize>().ok()?))
            });
            let (m, i) = parsed.ok_or_else(|| bad(0, format!("bad column {c}")))?;
            blocks = blocks.max(m + 1);
            n = n.max(i + 1);
        }
        if !blocks.is_power_of_two() || blocks * n != half {
            return Err(bad(0, "position columns do not form a bundle point".into()));
        }
        let r = blocks.trailing_zeros() as usize;
        let (mut t_grid, mut pos, mut vel) = (Vec::new(), Vec::new(), Vec::new());
        for (i, line) in lines {
            let line = line.map_err(|e| bad(i, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(i, e.to_string()))?;
            if vals.len() != cols.len() {
                return Err(bad(i, format!("expected {} values, got {}", cols.len(), vals.len())));
            }
            t_grid.push(vals[0]);
            pos.push(BundlePoint::new(n, r, vals[1..=half].to_vec())?);
            vel.push(BundlePoint::new(n, r, vals[half + 1..].to_vec())?);
        }
        let step = if t_grid.len() >= 2 { t_grid[1] - t_grid[0] } else { 0.0 };
        let g = GeodesicRecord {
            spray_label: label.to_string(),
            r,
            step,
            t_grid,
            pos,
            vel,
            exit: None,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let len = self.t_grid.len();
        if len == 0 || self.pos.len() != len || self.vel.len() != len {
            return Err(GeomError::Config("record needs equally many times, positions and velocities".into()));
        }
        let n = self.pos[0].dim();
        for p in self.pos.iter().chain(&self.vel) {
            if p.order() != self.r || p.dim() != n {
                return Err(GeomError::Config(format!(
                    "sample of order {} and dimension {} in a record of order {} and dimension {n}",
                    p.order(),
                    p.dim(),
                    self.r
                )));
            }
        }
        if self.t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GeomError::Config("time grid must increase".into()));
        }
        Ok(())
    }
}

/// One classical RK4 step of the autonomous system `y' = f(y)`.
pub(crate) fn rk4_step(
    f: &impl Fn(&[f64]) -> Result<Vec<f64>>,
    y: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let k1 = f(y)?;
    let k2 = f(&linalg::axpy(y, h / 2.0, &k1))?;
    let k3 = f(&linalg::axpy(y, h / 2.0, &k2))?;
    let k4 = f(&linalg::axpy(y, h, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Number of uniform steps of size at most `step` covering `length`.
pub(crate) fn step_count(length: f64, step: f64) -> usize {
    let raw = length.abs() / step;
    // absorb roundoff so that e.g. 1.0 / 1e-3 gives 1000 steps, not 1001
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Phase-space state `[pos | vel]` of `S^(r)` as one flat vector.
pub(crate) struct LiftedSystem<'a> {
    pub spray: &'a Semispray,
    pub r: usize,
}

impl LiftedSystem<'_> {
    pub(crate) fn half(&self) -> usize {
        self.spray.dim() << self.r
    }

    pub(crate) fn rhs(&self, state: &[f64]) -> Result<Vec<f64>> {
        let h = self.half();
        let (pos, vel) = state.split_at(h);
        let n = self.spray.dim();
        if linalg::norm(&vel[..n]) < SLASHED_THRESHOLD {
            return Err(GeomError::OutsideSlashed);
        }
        let acc = self.spray.acceleration(self.r, pos, vel)?;
        let mut out = Vec::with_capacity(2 * h);
        out.extend_from_slice(vel);
        out.extend(acc);
        Ok(out)
    }
}

fn exit_reason(e: GeomError) -> ExitReason {
    match e {
        GeomError::OutsideSlashed => ExitReason::LeftSlashed,
        GeomError::DomainError(msg) => ExitReason::Domain(msg),
        other => ExitReason::Domain(other.to_string()),
    }
}

/// Integrate from `state` at `t_start` to `t_end` (either direction) in
/// `steps` equal steps. Returns the visited states including the start and
/// the exit reason if the run stopped early.
fn run(
    sys: &LiftedSystem<'_>,
    state: Vec<f64>,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> (Vec<f64>, Vec<Vec<f64>>, Option<ExitReason>) {
    let n = sys.spray.dim();
    let half = sys.half();
    let h = if steps == 0 { 0.0 } else { (t_end - t_start) / steps as f64 };
    let mut times = vec![t_start];
    let mut states = vec![state];
    for k in 1..=steps {
        let next = rk4_step(&|y: &[f64]| sys.rhs(y), states.last().unwrap(), h);
        match next {
            Ok(y) if y.iter().all(|v| v.is_finite()) => {
                if linalg::norm(&y[half..half + n]) < SLASHED_THRESHOLD {
                    return (times, states, Some(ExitReason::LeftSlashed));
                }
                times.push(if k == steps { t_end } else { t_start + k as f64 * h });
                states.push(y);
            }
            Ok(_) => {
                return (
                    times,
                    states,
                    Some(ExitReason::Domain("non-finite state".into())),
                )
            }
            Err(e) => return (times, states, Some(exit_reason(e))),
        }
    }
    (times, states, None)
}

fn check_init(spray: &Semispray, r: usize, pos: &BundlePoint, vel: &BundlePoint) -> Result<()> {
    for p in [pos, vel] {
        if p.dim() != spray.dim() || p.order() != r {
            return Err(GeomError::DimensionMismatch {
                expected: spray.dim() << r,
                got: p.as_slice().len(),
            });
        }
    }
    if linalg::norm(vel.block(0)) < SLASHED_THRESHOLD {
        return Err(GeomError::OutsideSlashed);
    }
    Ok(())
}

/// Integrate the geodesic of `S^(r)` with `pos(t₀) = ξ₀`, `vel(t₀) = η₀`
/// over `[t₀, t₁]`.
pub fn integrate_geodesic(
    spray: &Semispray,
    r: usize,
    init: (&BundlePoint, &BundlePoint),
    t_span: (f64, f64),
    step: f64,
) -> Result<GeodesicRecord> {
    integrate_geodesic_from(spray, r, init, t_span.0, t_span, step)
}

/// Like [`integrate_geodesic`] with the initial condition given at
/// `t_ref ∈ [t₀, t₁]`; the record covers the whole span.
pub fn integrate_geodesic_from(
    spray: &Semispray,
    r: usize,
    init: (&BundlePoint, &BundlePoint),
    t_ref: f64,
    t_span: (f64, f64),
    step: f64,
) -> Result<GeodesicRecord> {
    let (t0, t1) = t_span;
    if !(step > 0.0) || !step.is_finite() {
        return Err(GeomError::InvalidArgument(format!("step must be positive, got {step}")));
    }
    if !(t0 <= t_ref && t_ref <= t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(GeomError::InvalidArgument(format!(
            "reference time {t_ref} outside [{t0}, {t1}]"
        )));
    }
    check_init(spray, r, init.0, init.1)?;
    let sys = LiftedSystem { spray, r };
    let mut start = init.0.as_slice().to_vec();
    start.extend_from_slice(init.1.as_slice());

    let (bt, bs, bexit) = run(&sys, start.clone(), t_ref, t0, step_count(t_ref - t0, step));
    let (ft, fs, fexit) = run(&sys, start, t_ref, t1, step_count(t1 - t_ref, step));
    let exit = bexit.or(fexit);

    let mut times: Vec<f64> = bt.into_iter().skip(1).rev().collect();
    let mut states: Vec<Vec<f64>> = bs.into_iter().skip(1).rev().collect();
    times.extend(ft);
    states.extend(fs);

    let n = spray.dim();
    let half = n << r;
    let (pos, vel) = states
        .into_iter()
        .map(|s| {
            (
                BundlePoint::new(n, r, s[..half].to_vec()).unwrap(),
                BundlePoint::new(n, r, s[half..].to_vec()).unwrap(),
            )
        })
        .unzip();
    Ok(GeodesicRecord {
        spray_label: spray.label().to_string(),
        r,
        step,
        t_grid: times,
        pos,
        vel,
        exit,
    })
}

/// `φ^(r)_t(ξ)` for `ξ ∈ T^{r+1} M ∖ 0`; `t` may be negative.
pub fn flow_map(spray: &Semispray, r: usize, xi: &BundlePoint, t: f64, step: f64) -> Result<BundlePoint> {
    if xi.order() != r + 1 {
        return Err(GeomError::DimensionMismatch {
            expected: spray.dim() << (r + 1),
            got: xi.as_slice().len(),
        });
    }
    if !(step > 0.0) {
        return Err(GeomError::InvalidArgument(format!("step must be positive, got {step}")));
    }
    let (pos, vel) = xi.split()?;
    check_init(spray, r, &pos, &vel)?;
    let sys = LiftedSystem { spray, r };
    let (times, states, exit) = run(&sys, xi.as_slice().to_vec(), 0.0, t, step_count(t, step));
    if let Some(reason) = exit {
        return Err(GeomError::Truncated {
            t: *times.last().unwrap(),
            reason: reason.to_string(),
        });
    }
    BundlePoint::new(spray.dim(), r + 1, states.into_iter().last().unwrap())
}

/// Discrepancy between `φ^(r+1)_t(ξ)` and `κ_{r+2} ∘ Dφ^(r)_t ∘ κ_{r+2}(ξ)`
/// for `ξ ∈ T^{r+2} M`. The derivative `Dφ^(r)_t` is a central difference
/// with one Richardson level.
pub fn check_flow_lift(spray: &Semispray, r: usize, xi: &BundlePoint, t: f64, step: f64) -> Result<f64> {
    if xi.order() != r + 2 {
        return Err(GeomError::DimensionMismatch {
            expected: spray.dim() << (r + 2),
            got: xi.as_slice().len(),
        });
    }
    let lhs = flow_map(spray, r + 1, xi, t, step)?;
    if t == 0.0 {
        // φ_0 and Dφ_0 are identities; no difference quotient needed
        return Ok(lhs.max_abs_diff(xi));
    }
    let swapped = bundle::involution(xi, r + 2)?;
    let (base, tangent) = swapped.split()?;
    let at = |k: f64| -> Result<Vec<f64>> {
        let p = BundlePoint::new(
            spray.dim(),
            r + 1,
            linalg::axpy(base.as_slice(), k, tangent.as_slice()),
        )?;
        Ok(flow_map(spray, r, &p, t, step)?.into_vec())
    };
    let h = 1e-5;
    let central = |h: f64| -> Result<Vec<f64>> {
        let (p, m) = (at(h)?, at(-h)?);
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    let d: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let image = flow_map(spray, r, &base, t, step)?;
    let tangent_image = BundlePoint::new(spray.dim(), r + 1, d)?;
    let rhs = bundle::involution(&BundlePoint::assemble(&image, &tangent_image)?, r + 2)?;
    Ok(lhs.max_abs_diff(&rhs))
}

/// Max deviation of a record from the geodesic equation of `S^(r)`:
/// fourth-order differences of positions and velocities against the
/// velocities and `lifted_rhs`.
pub fn geodesic_residual(spray: &Semispray, g: &GeodesicRecord) -> Result<f64> {
    let len = g.len();
    if len < 5 {
        return Err(GeomError::GridTooShort { len, needed: 5 });
    }
    let h = (g.t_grid[len - 1] - g.t_grid[0]) / (len - 1) as f64;
    let mut worst = 0.0f64;
    for i in 0..len {
        let w = linalg::derivative_weights(i, len);
        let diff = |pts: &[BundlePoint]| -> Vec<f64> {
            let mut acc = vec![0.0; pts[i].as_slice().len()];
            for (off, c) in w {
                let p = pts[(i as isize + off) as usize].as_slice();
                for (a, v) in acc.iter_mut().zip(p) {
                    *a += c * v;
                }
            }
            acc.iter().map(|a| a / h).collect()
        };
        let acc = spray.acceleration(g.r, g.pos[i].as_slice(), g.vel[i].as_slice())?;
        worst = worst
            .max(linalg::max_abs_diff(&diff(&g.pos), g.vel[i].as_slice()))
            .max(linalg::max_abs_diff(&diff(&g.vel), &acc));
    }
    Ok(worst)
}

/// The curves `p^(r)_a ∘ j` in `TM`, `a = 1..r`, of a geodesic `j` of `S^(r)`.
pub fn extract_jacobi_fields(g: &GeodesicRecord) -> Result<Vec<GeodesicRecord>> {
    if g.r == 0 {
        return Err(GeomError::BadOrder { order: 0, needed: 1 });
    }
    (1..=g.r)
        .map(|a| g.map_points(1, |p| bundle::canonical_projection(p, a)))
        .collect()
}
