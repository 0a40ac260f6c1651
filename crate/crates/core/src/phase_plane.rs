//! Phase plane of the scaled stationary equation
//! `-phi'' + phi' = mu * f(phi)`, `f(phi) = phi - phi^2`, `mu = beta^-2`,
//! written as the planar system `phi' = psi`, `psi' = psi - mu f(phi)`.
//!
//! The origin is an unstable spiral for `mu > 1/4` and an unstable node
//! otherwise; `(1, 0)` is always a saddle. Four special orbits matter for the
//! stationary problem on a river network:
//!
//! * `GammaPlus`: stable manifold of the saddle inside `psi > 0` (`mu > 1/4`);
//!   it meets the positive `psi`-axis.
//! * `H`: the same manifold for `mu <= 1/4`, which now connects to the origin
//!   tangent to the slow direction `psi = lambda0_minus * phi`.
//! * `GammaMinus`: unstable manifold of the saddle inside `psi < 0`.
//! * `GammaStar`: the orbit leaving the origin along the fast direction
//!   `psi = lambda0_plus * phi` (`mu <= 1/4`), ending at `phi = 1`.
//!
//! Each orbit inside the strip `0 < phi < 1` is a graph `psi = Psi(phi)` that
//! solves `dPsi/dphi = 1 - mu f(phi) / Psi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::ode::{self, OdeOptions, State};

/// Logistic growth `f(phi) = phi - phi^2`.
#[inline]
pub fn growth(phi: f64) -> f64 {
    // Factored form: `1 - phi` is exact near the saddle.
    phi * (1.0 - phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phi: f64,
    pub psi: f64,
}

impl PhasePoint {
    pub fn new(phi: f64, psi: f64) -> Self {
        Self { phi, psi }
    }
}

/// Right-hand side `(psi, psi - mu f(phi))`.
pub fn vector_field(p: PhasePoint, mu: f64) -> (f64, f64) {
    (p.psi, p.psi - mu * growth(p.phi))
}

fn field(mu: f64) -> impl Fn(&State) -> State {
    move |y: &State| [y[1], y[1] - mu * growth(y[0])]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OriginType {
    Spiral,
    DegenerateNode,
    Node,
}

/// A possibly complex eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub mu: f64,
    pub origin_type: OriginType,
    pub lambda0_plus: Eigenvalue,
    pub lambda0_minus: Eigenvalue,
    pub lambda1_plus: f64,
    pub lambda1_minus: f64,
    /// `(1, lambda)` for real origin eigenvalues.
    pub eigvec0_plus: Option<[f64; 2]>,
    pub eigvec0_minus: Option<[f64; 2]>,
    pub eigvec1_plus: [f64; 2],
    pub eigvec1_minus: [f64; 2],
}

/// `1 - 4 mu`, snapped to zero within rounding of the degenerate value.
fn origin_discriminant(mu: f64) -> f64 {
    let d = 1.0 - 4.0 * mu;
    if d.abs() < 1e-14 {
        0.0
    } else {
        d
    }
}

pub fn equilibrium_eigen(mu: f64) -> EquilibriumReport {
    let d0 = origin_discriminant(mu);
    let (origin_type, l0p, l0m) = if d0 < 0.0 {
        let im = 0.5 * (-d0).sqrt();
        (OriginType::Spiral, Eigenvalue { re: 0.5, im }, Eigenvalue { re: 0.5, im: -im })
    } else {
        let s = d0.sqrt();
        let kind = if d0 == 0.0 { OriginType::DegenerateNode } else { OriginType::Node };
        (kind, Eigenvalue { re: 0.5 * (1.0 + s), im: 0.0 }, Eigenvalue { re: 0.5 * (1.0 - s), im: 0.0 })
    };
    let s1 = (1.0 + 4.0 * mu).sqrt();
    let l1p = 0.5 * (1.0 + s1);
    let l1m = 0.5 * (1.0 - s1);
    let real = origin_type != OriginType::Spiral;
    EquilibriumReport {
        mu,
        origin_type,
        lambda0_plus: l0p,
        lambda0_minus: l0m,
        lambda1_plus: l1p,
        lambda1_minus: l1m,
        eigvec0_plus: real.then_some([1.0, l0p.re]),
        eigvec0_minus: real.then_some([1.0, l0m.re]),
        eigvec1_plus: [1.0, l1p],
        eigvec1_minus: [1.0, l1m],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrajectoryKind {
    GammaPlus,
    GammaMinus,
    GammaStar,
    H,
}

impl std::fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TrajectoryKind::GammaPlus => "gamma-plus",
            TrajectoryKind::GammaMinus => "gamma-minus",
            TrajectoryKind::GammaStar => "gamma-star",
            TrajectoryKind::H => "h",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma-plus" | "gammaplus" | "plus" => Ok(TrajectoryKind::GammaPlus),
            "gamma-minus" | "gammaminus" | "minus" => Ok(TrajectoryKind::GammaMinus),
            "gamma-star" | "gammastar" | "star" => Ok(TrajectoryKind::GammaStar),
            "h" => Ok(TrajectoryKind::H),
            other => Err(Error::InvalidInput(format!("unknown trajectory kind '{other}'"))),
        }
    }
}

impl TrajectoryKind {
    pub fn valid_for(self, mu: f64) -> bool {
        let degenerate_or_node = origin_discriminant(mu) >= 0.0;
        match self {
            TrajectoryKind::GammaPlus => !degenerate_or_node,
            TrajectoryKind::GammaMinus => true,
            TrajectoryKind::GammaStar | TrajectoryKind::H => degenerate_or_node,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    pub atol: f64,
    pub rtol: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Launch offset along the unit eigenvector.
    pub epsilon: f64,
    /// `|psi|` beyond which the integration is declared divergent.
    pub psi_window: f64,
    /// `H` is followed into the origin until `phi` drops to this level.
    pub phi_floor: f64,
    /// Largest admissible parameter span.
    pub max_span: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            h_max: 0.5,
            max_steps: 2_000_000,
            epsilon: 1e-8,
            psi_window: 1e3,
            phi_floor: 1e-12,
            max_span: 1e6,
        }
    }
}

impl TraceOptions {
    fn ode(&self) -> OdeOptions {
        OdeOptions { atol: self.atol, rtol: self.rtol, h_init: 1e-3, h_max: self.h_max, max_steps: self.max_steps }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub x: f64,
    pub phi: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Launch {
    pub point: PhasePoint,
    /// Equilibrium the orbit leaves from (or arrives at).
    pub equilibrium: PhasePoint,
    pub epsilon: f64,
    pub backward: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryCurve {
    pub kind: TrajectoryKind,
    pub mu: f64,
    /// Accepted integration points in integration order; `x = 0` at launch.
    pub samples: Vec<TrajectorySample>,
    pub launch: Launch,
}

impl TrajectoryCurve {
    pub fn endpoint(&self) -> TrajectorySample {
        *self.samples.last().unwrap()
    }

    /// Dense-output state at parameter `x` inside the traced span.
    pub fn state_at(&self, x: f64) -> Option<PhasePoint> {
        state_at(self.mu, &self.samples, x)
    }

    /// First point of the orbit where `phi` equals `phi`.
    pub fn at_phi(&self, phi: f64) -> Option<TrajectorySample> {
        at_phi(self.mu, &self.samples, phi)
    }
}

/// An orbit through an arbitrary point, traced until `phi` falls to a floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub mu: f64,
    pub samples: Vec<TrajectorySample>,
}

impl Orbit {
    pub fn endpoint(&self) -> TrajectorySample {
        *self.samples.last().unwrap()
    }

    pub fn state_at(&self, x: f64) -> Option<PhasePoint> {
        state_at(self.mu, &self.samples, x)
    }

    pub fn at_phi(&self, phi: f64) -> Option<TrajectorySample> {
        at_phi(self.mu, &self.samples, phi)
    }
}

/// Follows the orbit through `start` (forward or backward in the scaled
/// variable) until `phi` drops to `phi_floor`. Leaving the strip through
/// `phi = 1` is an error.
pub fn trace_orbit(mu: f64, start: PhasePoint, backward: bool, phi_floor: f64, opts: &TraceOptions) -> Result<Orbit> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::NonpositiveParameter { name: "mu".into(), value: mu });
    }
    if !(start.phi > phi_floor && start.phi <= 1.0) {
        return Err(Error::InvalidInput(format!("start phi = {} outside ({phi_floor}, 1]", start.phi)));
    }
    let f = field(mu);
    let span = if backward { -opts.max_span } else { opts.max_span };
    let window = opts.psi_window;
    let guard = |y: &State| (y[1].abs() > window).then(|| format!("orbit left the window at {y:?}"));
    // Positive inside `(phi_floor, 1]`; the first sign change is the exit.
    let exit = |y: &State| (y[0] - phi_floor).min(1.0 + 1e-12 - y[0]);
    let sol = ode::integrate(&f, 0.0, [start.phi, start.psi], span, &opts.ode(), exit, guard)?;
    if sol.stop != ode::Stop::Event {
        return Err(Error::StoppingConditionNotReached { steps: sol.xs.len() });
    }
    if sol.ys.last().unwrap()[0] > 0.5 {
        return Err(Error::TrajectoryEscapedUnitBox);
    }
    let samples = sol
        .xs
        .iter()
        .zip(&sol.ys)
        .map(|(&x, y)| TrajectorySample { x, phi: y[0], psi: y[1] })
        .collect();
    Ok(Orbit { mu, samples })
}

fn state_at(mu: f64, samples: &[TrajectorySample], x: f64) -> Option<PhasePoint> {
    let n = samples.len();
    let forward = samples[n - 1].x > samples[0].x;
    let key = |s: &TrajectorySample| if forward { s.x } else { -s.x };
    let kx = if forward { x } else { -x };
    if kx < key(&samples[0]) || kx > key(&samples[n - 1]) {
        return None;
    }
    let i = samples.partition_point(|s| key(s) <= kx);
    if i == 0 {
        let s = samples[0];
        return Some(PhasePoint::new(s.phi, s.psi));
    }
    if i >= n {
        let s = samples[n - 1];
        return Some(PhasePoint::new(s.phi, s.psi));
    }
    let (a, b) = (samples[i - 1], samples[i]);
    let h = b.x - a.x;
    let theta = ((x - a.x) / h).clamp(0.0, 1.0);
    let y = ode::partial_step(&field(mu), &[a.phi, a.psi], h, theta);
    Some(PhasePoint::new(y[0], y[1]))
}

fn at_phi(mu: f64, samples: &[TrajectorySample], phi: f64) -> Option<TrajectorySample> {
    let f = field(mu);
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.phi == phi {
            return Some(a);
        }
        if (a.phi - phi) * (b.phi - phi) <= 0.0 {
            let h = b.x - a.x;
            let y0 = [a.phi, a.psi];
            let theta = ode::locate_value(&f, &y0, h, 0, phi, b.phi);
            let y = ode::partial_step(&f, &y0, h, theta);
            return Some(TrajectorySample { x: a.x + theta * h, phi: y[0], psi: y[1] });
        }
    }
    None
}

/// Quadratic coefficient `k` of the analytic orbit `psi = lambda phi + k phi^2`
/// leaving the origin with slope `lambda`.
fn origin_quadratic(mu: f64, lambda: f64) -> f64 {
    (mu / lambda) / (2.0 - mu / (lambda * lambda))
}

fn launch_for(kind: TrajectoryKind, mu: f64, eps: f64) -> Launch {
    let eig = equilibrium_eigen(mu);
    let saddle = PhasePoint::new(1.0, 0.0);
    match kind {
        TrajectoryKind::GammaPlus | TrajectoryKind::H => {
            let l = eig.lambda1_minus;
            let n = (1.0 + l * l).sqrt();
            Launch {
                point: PhasePoint::new(1.0 - eps / n, -eps * l / n),
                equilibrium: saddle,
                epsilon: eps,
                backward: true,
                description: format!("stable eigenvector (1, {l:.12}) of the saddle, phi < 1 side"),
            }
        }
        TrajectoryKind::GammaMinus => {
            let l = eig.lambda1_plus;
            let n = (1.0 + l * l).sqrt();
            Launch {
                point: PhasePoint::new(1.0 - eps / n, -eps * l / n),
                equilibrium: saddle,
                epsilon: eps,
                backward: false,
                description: format!("unstable eigenvector (1, {l:.12}) of the saddle, psi < 0 side"),
            }
        }
        TrajectoryKind::GammaStar => {
            let l = eig.lambda0_plus.re;
            let n = (1.0 + l * l).sqrt();
            let phi = eps / n;
            let k = origin_quadratic(mu, l);
            Launch {
                point: PhasePoint::new(phi, l * phi + k * phi * phi),
                equilibrium: PhasePoint::new(0.0, 0.0),
                epsilon: eps,
                backward: false,
                description: format!("fast eigenvector (1, {l:.12}) of the origin with quadratic term {k:.12}"),
            }
        }
    }
}

/// Traces one of the four special orbits. See the module docs for what each
/// kind is and where its integration stops.
pub fn trace_special_trajectory(kind: TrajectoryKind, mu: f64, opts: &TraceOptions) -> Result<TrajectoryCurve> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::NonpositiveParameter { name: "mu".into(), value: mu });
    }
    if !kind.valid_for(mu) {
        return Err(Error::InvalidKindForMu { kind: kind.to_string(), mu });
    }
    let launch = launch_for(kind, mu, opts.epsilon);
    let f = field(mu);
    let y0 = [launch.point.phi, launch.point.psi];
    let span = if launch.backward { -opts.max_span } else { opts.max_span };
    let window = opts.psi_window;
    let guard = |y: &State| {
        (y[1].abs() > window || y[0].abs() > 10.0).then(|| format!("orbit left the window at {y:?}"))
    };
    let floor = opts.phi_floor;
    let sol = match kind {
        TrajectoryKind::GammaPlus | TrajectoryKind::GammaMinus => {
            ode::integrate(&f, 0.0, y0, span, &opts.ode(), |y| y[0], guard)?
        }
        TrajectoryKind::GammaStar => ode::integrate(&f, 0.0, y0, span, &opts.ode(), |y| 1.0 - y[0], guard)?,
        TrajectoryKind::H => ode::integrate(&f, 0.0, y0, span, &opts.ode(), |y| y[0] - floor, guard)?,
    };
    if sol.stop != ode::Stop::Event {
        return Err(Error::StoppingConditionNotReached { steps: sol.xs.len() });
    }
    let samples = sol
        .xs
        .iter()
        .zip(&sol.ys)
        .map(|(&x, y)| TrajectorySample { x, phi: y[0], psi: y[1] })
        .collect();
    Ok(TrajectoryCurve { kind, mu, samples, launch })
}

/// Largest local defect of the stored samples: each step is re-integrated at a
/// hundredfold tighter tolerance and compared with the next sample, in units
/// of the scaled tolerance `atol + rtol |y|`.
pub fn trajectory_defect(traj: &TrajectoryCurve, opts: &TraceOptions) -> Result<f64> {
    let f = field(traj.mu);
    let tight = OdeOptions { atol: opts.atol / 100.0, rtol: opts.rtol / 100.0, h_init: 1e-4, h_max: opts.h_max, max_steps: 100_000 };
    let mut worst = 0.0_f64;
    for w in traj.samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sol = ode::integrate(&f, a.x, [a.phi, a.psi], b.x - a.x, &tight, |_| 1.0, |_| None)?;
        let y = sol.ys.last().unwrap();
        for (got, want) in [(b.phi, y[0]), (b.psi, y[1])] {
            let sc = opts.atol + opts.rtol * want.abs();
            worst = worst.max((got - want).abs() / sc);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiGridOptions {
    pub points: usize,
    pub delta: f64,
}

impl Default for PsiGridOptions {
    fn default() -> Self {
        Self { points: 2048, delta: 1e-4 }
    }
}

impl PsiGridOptions {
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.delta, 1.0 - self.delta);
        let n = self.points;
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }
}

/// An orbit written as the graph `psi = Psi(phi)` on a uniform `phi`-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiCurve {
    pub kind: TrajectoryKind,
    pub mu: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(skip_serializing, default = "empty_interp")]
    interpolant: MonotoneCubic,
}

fn empty_interp() -> MonotoneCubic {
    MonotoneCubic::new(vec![0.0, 1.0], vec![0.0, 0.0])
}

impl PsiCurve {
    pub fn eval(&self, phi: f64) -> f64 {
        self.interpolant.eval(phi)
    }

    pub fn derivative(&self, phi: f64) -> f64 {
        self.interpolant.derivative(phi)
    }

    pub fn phi_min(&self) -> f64 {
        self.grid[0]
    }

    pub fn phi_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Right-hand side of `dPsi/dphi = 1 - mu f / Psi` at `phi`.
    pub fn ode_slope(&self, phi: f64) -> f64 {
        1.0 - self.mu * growth(phi) / self.eval(phi)
    }
}

/// Resamples `traj` as a graph over the uniform `phi`-grid.
/// Grid values are located on the integrator's own steps, so they carry the
/// integration accuracy; slopes come from the orbit equation.
pub fn psi_curve(traj: &TrajectoryCurve, grid_opts: &PsiGridOptions) -> Result<PsiCurve> {
    // Every sample but the terminal event point lies inside the strip.
    let arc: Vec<&TrajectorySample> = traj.samples.iter().collect();
    let inside = |s: &&TrajectorySample| s.phi > 0.0 && s.phi < 1.0;
    if arc.len() < 2 || !arc[..arc.len() - 1].iter().all(inside) {
        return Err(Error::NonMonotonePhi);
    }
    let increasing = arc[1].phi > arc[0].phi;
    let sign = arc[0].psi.signum();
    for w in arc.windows(2) {
        let monotone = if increasing { w[1].phi > w[0].phi } else { w[1].phi < w[0].phi };
        if !monotone || w[1].psi.signum() != sign {
            return Err(Error::NonMonotonePhi);
        }
    }
    let grid = grid_opts.grid();
    let lo = arc.iter().map(|s| s.phi).fold(f64::INFINITY, f64::min);
    let hi = arc.iter().map(|s| s.phi).fold(f64::NEG_INFINITY, f64::max);
    if grid[0] < lo || *grid.last().unwrap() > hi {
        return Err(Error::InvalidInput(format!(
            "orbit covers phi in [{lo:e}, {hi}], grid needs [{}, {}]",
            grid[0],
            grid.last().unwrap()
        )));
    }

    let f = field(traj.mu);
    let n = grid.len();
    let mut values = vec![f64::NAN; n];
    for w in arc.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (p_lo, p_hi) = if increasing { (a.phi, b.phi) } else { (b.phi, a.phi) };
        let start = grid.partition_point(|&g| g < p_lo);
        let end = grid.partition_point(|&g| g <= p_hi);
        let h = b.x - a.x;
        for (k, &g) in grid.iter().enumerate().take(end).skip(start) {
            let y0 = [a.phi, a.psi];
            let theta = if g == a.phi {
                0.0
            } else {
                ode::locate_value(&f, &y0, h, 0, g, b.phi)
            };
            values[k] = ode::partial_step(&f, &y0, h, theta)[1];
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonMonotonePhi);
    }
    let slopes: Vec<f64> = grid.iter().zip(&values).map(|(&p, &v)| 1.0 - traj.mu * growth(p) / v).collect();
    let interpolant = MonotoneCubic::with_slopes(grid.clone(), values.clone(), slopes);
    Ok(PsiCurve { kind: traj.kind, mu: traj.mu, grid, values, interpolant })
}

/// Convenience: trace and resample in one call.
pub fn special_psi_curve(kind: TrajectoryKind, mu: f64, opts: &TraceOptions, grid: &PsiGridOptions) -> Result<PsiCurve> {
    psi_curve(&trace_special_trajectory(kind, mu, opts)?, grid)
}

/// Largest grid difference between curves launched at `epsilon` and
/// `epsilon / 2`.
pub fn launch_richardson(kind: TrajectoryKind, mu: f64, opts: &TraceOptions, grid: &PsiGridOptions) -> Result<f64> {
    let a = special_psi_curve(kind, mu, opts, grid)?;
    let half = TraceOptions { epsilon: opts.epsilon / 2.0, ..*opts };
    let b = special_psi_curve(kind, mu, &half, grid)?;
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeModel {
    /// `psi/phi = lambda + c phi`: analytic approach.
    Linear,
    /// `psi/phi = lambda + 1 / (x - x_c)`: degenerate node, logarithmic approach.
    Resonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub model: SlopeModel,
    pub rms_residual: f64,
    pub samples: usize,
}

/// Estimates the limiting slope `psi/phi` of an orbit at the origin from its
/// samples with `phi_lo <= phi <= phi_hi`, trying both approach models and
/// keeping the one with the smaller residual.
pub fn origin_slope_fit(traj: &TrajectoryCurve, phi_lo: f64, phi_hi: f64) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64, f64)> = traj
        .samples
        .iter()
        .filter(|s| s.phi >= phi_lo && s.phi <= phi_hi && s.phi > 0.0)
        .map(|s| (s.x, s.phi, s.psi / s.phi))
        .collect();
    if pts.len() < 5 {
        return Err(Error::WindowTooShort(format!("{} samples with phi in [{phi_lo:e}, {phi_hi:e}]", pts.len())));
    }
    let linear = fit_linear(&pts);
    let resonant = fit_resonant(&pts);
    let best = match resonant {
        Some(r) if r.rms_residual < linear.rms_residual => r,
        _ => linear,
    };
    Ok(best)
}

fn fit_linear(pts: &[(f64, f64, f64)]) -> SlopeFit {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.1, acc.1 + p.2));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for p in pts {
        sxx += (p.1 - mx) * (p.1 - mx);
        sxy += (p.1 - mx) * (p.2 - my);
    }
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let lambda = my - c * mx;
    let rms = (pts.iter().map(|p| (p.2 - lambda - c * p.1).powi(2)).sum::<f64>() / n).sqrt();
    SlopeFit { slope: lambda, model: SlopeModel::Linear, rms_residual: rms, samples: pts.len() }
}

/// For a trial `lambda`, `x - 1/(s - lambda)` should be the constant `x_c`;
/// `lambda` is chosen to minimize its spread.
fn fit_resonant(pts: &[(f64, f64, f64)]) -> Option<SlopeFit> {
    let s_max = pts.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
    let s_min = pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let rms_at = |lambda: f64| -> f64 {
        let xc = pts.iter().map(|p| p.0 - 1.0 / (p.2 - lambda)).sum::<f64>() / pts.len() as f64;
        let ss: f64 = pts.iter().map(|p| (p.2 - lambda - 1.0 / (p.0 - xc)).powi(2)).sum();
        let r = (ss / pts.len() as f64).sqrt();
        if r.is_finite() {
            r
        } else {
            f64::INFINITY
        }
    };
    // The spread is not unimodal in lambda, so scan log-spaced offsets from
    // the data on both sides before a local golden-section refinement.
    let mut best = (f64::INFINITY, f64::NAN);
    for side in [1.0, -1.0] {
        let edge = if side > 0.0 { s_max } else { s_min };
        for k in 0..=600 {
            let lambda = edge + side * 10f64.powf(-8.0 + 8.0 * k as f64 / 600.0);
            let r = rms_at(lambda);
            if r < best.0 {
                best = (r, lambda);
            }
        }
    }
    if !best.0.is_finite() {
        return None;
    }
    let width = (best.1 - if best.1 > s_max { s_max } else { s_min }).abs() * 0.05;
    let (mut a, mut b) = (best.1 - width, best.1 + width);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if rms_at(c) < rms_at(d) {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let lambda = 0.5 * (a + b);
    let rms = rms_at(lambda);
    let (lambda, rms) = if rms < best.0 { (lambda, rms) } else { (best.1, best.0) };
    Some(SlopeFit { slope: lambda, model: SlopeModel::Resonant, rms_residual: rms, samples: pts.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_field_examples() {
        assert_eq!(vector_field(PhasePoint::new(0.5, 0.25), 1.0), (0.25, 0.0));
        assert_eq!(vector_field(PhasePoint::new(0.0, 0.0), 3.0), (0.0, 0.0));
        assert_eq!(vector_field(PhasePoint::new(1.0, 0.0), 0.2), (0.0, 0.0));
    }

    #[test]
    fn eigen_examples() {
        let r = equilibrium_eigen(0.25);
        assert_eq!(r.origin_type, OriginType::DegenerateNode);
        assert_eq!((r.lambda0_plus.re, r.lambda0_minus.re), (0.5, 0.5));
        let r = equilibrium_eigen(2.0);
        assert_eq!((r.lambda1_plus, r.lambda1_minus), (2.0, -1.0));
        assert_eq!(r.origin_type, OriginType::Spiral);
        assert!(r.eigvec0_plus.is_none());
        let r = equilibrium_eigen(1.0 / 9.0);
        assert!((r.lambda0_plus.re - 0.872_677_996_249_964_9).abs() < 1e-12);
        assert!((r.lambda0_minus.re - 0.127_322_003_750_035_1).abs() < 1e-12);
    }

    #[test]
    fn invalid_kinds_are_refused() {
        let o = TraceOptions::default();
        assert!(matches!(trace_special_trajectory(TrajectoryKind::GammaStar, 0.5, &o), Err(Error::InvalidKindForMu { .. })));
        assert!(matches!(trace_special_trajectory(TrajectoryKind::H, 0.3, &o), Err(Error::InvalidKindForMu { .. })));
        assert!(matches!(trace_special_trajectory(TrajectoryKind::GammaPlus, 0.2, &o), Err(Error::InvalidKindForMu { .. })));
    }

    #[test]
    fn gamma_star_ends_on_phi_one() {
        let t = trace_special_trajectory(TrajectoryKind::GammaStar, 1.0 / 9.0, &TraceOptions::default()).unwrap();
        let e = t.endpoint();
        assert!((e.phi - 1.0).abs() < 1e-10);
        assert!(e.psi > 0.0);
    }

    #[test]
    fn origin_quadratic_degenerate_value() {
        assert!((origin_quadratic(0.25, 0.5) - 0.5).abs() < 1e-15);
    }
}
