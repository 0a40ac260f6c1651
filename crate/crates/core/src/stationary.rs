//! Stationary states on two- and three-branch networks.
//!
//! In the scaled variable `s = beta x` every branch profile is an orbit of
//! the phase plane with `mu = beta^-2`. A profile with junction value `alpha`
//! is assembled from orbits that all pass through `phi = alpha`:
//!
//! * a lower branch rises to 1 along the stable manifold of the saddle
//!   (`GammaPlus` when `beta < 2`, `H` otherwise);
//! * an upper branch decaying to 0 upstream is any orbit entering the origin
//!   backward, which requires `beta >= 2` and a junction slope at most
//!   `Psi*(alpha)` (the `GammaStar` value);
//! * an upper branch rising to 1 upstream sits on `GammaMinus`.
//!
//! Kirchhoff's law `sum_lower a phi'(0) = sum_upper a phi'(0)` ties the
//! junction slopes together, and in scaled slopes it reads
//! `sum_lower a beta Psi = sum_upper a beta Psi`. Thresholds are the values of
//! `alpha` where that balance first becomes feasible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{junction_weights, RiverNetwork, Topology};
use crate::phase_plane::{
    equilibrium_eigen, psi_curve, trace_orbit, trace_special_trajectory, PhasePoint, PsiCurve, PsiGridOptions,
    TraceOptions, TrajectoryCurve, TrajectoryKind,
};
use crate::simulator::{
    discretize, fast_exponent, slow_exponent, FarBoundary, GridSpec, Scheme, SimulationState, Simulator,
};

/// `beta >= 2` with ties on the supercritical side.
pub fn is_supercritical(beta: f64) -> bool {
    beta >= 2.0
}

pub fn mu_of(beta: f64) -> f64 {
    1.0 / (beta * beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "TB-i")]
    TbI,
    #[serde(rename = "TB-ii")]
    TbII,
    #[serde(rename = "TB-iii")]
    TbIII,
    #[serde(rename = "UUL-I")]
    UulI,
    #[serde(rename = "UUL-II")]
    UulII,
    #[serde(rename = "UUL-III")]
    UulIII,
    #[serde(rename = "UUL-IV")]
    UulIV,
    #[serde(rename = "ULL-I")]
    UllI,
    #[serde(rename = "ULL-II")]
    UllII,
    #[serde(rename = "ULL-III")]
    UllIII,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::TbI => "TB-i",
            Regime::TbII => "TB-ii",
            Regime::TbIII => "TB-iii",
            Regime::UulI => "UUL-I",
            Regime::UulII => "UUL-II",
            Regime::UulIII => "UUL-III",
            Regime::UulIV => "UUL-IV",
            Regime::UllI => "ULL-I",
            Regime::UllII => "ULL-II",
            Regime::UllIII => "ULL-III",
        };
        f.write_str(s)
    }
}

/// Topology plus regime, with branch ids resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseTag {
    pub topology: Topology,
    pub regime: Regime,
    pub upper: Vec<usize>,
    pub lower: Vec<usize>,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.regime)
    }
}

pub fn classify_case(network: &RiverNetwork) -> Result<CaseTag> {
    let upper = network.upper_ids();
    let lower = network.lower_ids();
    let sup = |id: &usize| is_supercritical(network.branch(*id).beta);
    let regime = match network.topology() {
        Topology::TwoBranch => match (sup(&upper[0]), sup(&lower[0])) {
            (false, _) => Regime::TbI,
            (true, true) => Regime::TbII,
            (true, false) => Regime::TbIII,
        },
        Topology::TwoUpOneDown => match (upper.iter().filter(|i| sup(i)).count(), sup(&lower[0])) {
            (0, _) => Regime::UulI,
            (2, true) => Regime::UulII,
            (2, false) => Regime::UulIII,
            _ => Regime::UulIV,
        },
        Topology::OneUpTwoDown => match (sup(&upper[0]), lower.iter().all(sup)) {
            (false, _) => Regime::UllI,
            (true, true) => Regime::UllII,
            (true, false) => Regime::UllIII,
        },
        Topology::GeneralStar => {
            return Err(Error::UnsupportedTopology("stationary theory covers two- and three-branch stars".into()))
        }
    };
    Ok(CaseTag { topology: network.topology(), regime, upper, lower })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolutionType {
    /// Every upper branch decays to 0 upstream.
    #[serde(rename = "type-00")]
    Type00,
    /// One upper branch rises to 1 upstream.
    #[serde(rename = "type-01")]
    Type01,
}

impl fmt::Display for SolutionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolutionType::Type00 => "type-00",
            SolutionType::Type01 => "type-01",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub trace: TraceOptions,
    pub grid: PsiGridOptions,
    /// Bisection stops once the bracket is this narrow in `phi`.
    pub bisection_tol: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self { trace: TraceOptions::default(), grid: PsiGridOptions::default(), bisection_tol: 1e-10 }
    }
}

/// One threshold: all sign changes of a curve difference on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// `alpha0`, `alpha_star`, `alpha_star_star`, `alpha_hat_<branch>`.
    pub name: String,
    /// First crossing.
    pub value: f64,
    /// Last crossing (equal to `value` when there is one).
    pub last: f64,
    pub crossings: Vec<f64>,
    pub crossing_count: usize,
    pub solution_type: SolutionType,
    /// Upper branch that rises to 1 upstream, for type-01 thresholds.
    pub decreasing_branch: Option<usize>,
    pub comparison: String,
}

/// Set of `alpha` where solutions of one type exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExistenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub solution_type: SolutionType,
    pub decreasing_branch: Option<usize>,
    /// Whether a whole continuum of solutions exists inside the interval.
    pub continuum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub case: CaseTag,
    pub thresholds: Vec<Threshold>,
    pub existence: Vec<ExistenceInterval>,
}

impl ThresholdReport {
    pub fn get(&self, name: &str) -> Option<&Threshold> {
        self.thresholds.iter().find(|t| t.name == name)
    }

    /// The threshold for type-00 solutions (or type-01 in UUL-IV).
    pub fn primary(&self) -> Option<&Threshold> {
        self.thresholds.first().filter(|t| !t.name.starts_with("alpha_hat"))
    }

    pub fn crossing_count(&self) -> Option<usize> {
        self.primary().map(|t| t.crossing_count)
    }
}

/// Stable-manifold orbit used by a lower branch.
fn lower_kind(beta: f64) -> TrajectoryKind {
    if is_supercritical(beta) {
        TrajectoryKind::H
    } else {
        TrajectoryKind::GammaPlus
    }
}

fn curve(kind: TrajectoryKind, beta: f64, opts: &ThresholdOptions) -> Result<PsiCurve> {
    psi_curve(&trace_special_trajectory(kind, mu_of(beta), &opts.trace)?, &opts.grid)
}

/// Weighted sum of curves minus a reference, on the shared grid.
struct Comparison {
    terms: Vec<(f64, PsiCurve)>,
    reference: PsiCurve,
}

impl Comparison {
    fn grid_values(&self) -> Vec<f64> {
        (0..self.reference.grid.len())
            .map(|i| self.terms.iter().map(|(c, p)| c * p.values[i]).sum::<f64>() - self.reference.values[i])
            .collect()
    }

    fn eval(&self, phi: f64) -> f64 {
        self.terms.iter().map(|(c, p)| c * p.eval(phi)).sum::<f64>() - self.reference.eval(phi)
    }

    /// Grid scan for sign changes, each refined by bisection.
    fn crossings(&self, tol: f64) -> (Vec<f64>, f64) {
        let grid = &self.reference.grid;
        let d = self.grid_values();
        let mut roots = Vec::new();
        let mut i = 0;
        while i + 1 < d.len() {
            if d[i] == 0.0 {
                roots.push(grid[i]);
                // Skip the run of zeros and a sign-preserving touch.
                let mut j = i + 1;
                while j < d.len() && d[j] == 0.0 {
                    j += 1;
                }
                i = j;
                continue;
            }
            if d[i] * d[i + 1] < 0.0 {
                let (mut lo, mut hi) = (grid[i], grid[i + 1]);
                let s_lo = d[i].signum();
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if self.eval(mid).signum() == s_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            i += 1;
        }
        (roots, d[0])
    }
}

/// Sub-intervals of `(0, 1)` where `feasible(D)` holds, from the crossings
/// and the sign at the start of the grid.
fn feasible_intervals(roots: &[f64], d0: f64, feasible_when_nonneg: bool) -> Vec<(f64, f64)> {
    let mut inside = (d0 >= 0.0) == feasible_when_nonneg;
    let mut out = Vec::new();
    let mut start = 0.0;
    for &r in roots {
        if inside {
            out.push((start, r));
        } else {
            start = r;
        }
        inside = !inside;
    }
    if inside {
        out.push((start, 1.0));
    }
    out
}

struct ThresholdSpec {
    name: String,
    comparison: Comparison,
    description: String,
    solution_type: SolutionType,
    decreasing_branch: Option<usize>,
    /// Feasible where the difference is >= 0 (else <= 0).
    feasible_when_nonneg: bool,
    continuum: bool,
}

fn evaluate(spec: ThresholdSpec, tol: f64) -> Result<(Threshold, Vec<ExistenceInterval>)> {
    let (roots, d0) = spec.comparison.crossings(tol);
    if roots.is_empty() {
        return Err(Error::NoCrossingFound(format!("{}: {}", spec.name, spec.description)));
    }
    if roots.len() > 1 {
        log::warn!("{}: {} crossings found ({:?}); reporting all", spec.name, roots.len(), roots);
    }
    let existence = feasible_intervals(&roots, d0, spec.feasible_when_nonneg)
        .into_iter()
        .map(|(lower, upper)| ExistenceInterval {
            lower,
            upper,
            solution_type: spec.solution_type,
            decreasing_branch: spec.decreasing_branch,
            continuum: spec.continuum,
        })
        .collect();
    let t = Threshold {
        name: spec.name,
        value: roots[0],
        last: *roots.last().unwrap(),
        crossing_count: roots.len(),
        crossings: roots,
        solution_type: spec.solution_type,
        decreasing_branch: spec.decreasing_branch,
        comparison: spec.description,
    };
    Ok((t, existence))
}

pub fn compute_thresholds(network: &RiverNetwork) -> Result<ThresholdReport> {
    compute_thresholds_with(network, &ThresholdOptions::default())
}

pub fn compute_thresholds_with(network: &RiverNetwork, opts: &ThresholdOptions) -> Result<ThresholdReport> {
    let case = classify_case(network)?;
    let beta = |id: usize| network.branch(id).beta;
    let mut specs = Vec::new();
    match case.regime {
        Regime::TbI | Regime::UulI | Regime::UllI => {
            return Err(Error::RegimeHasNoThreshold(format!("{} (no stationary solution in (0, 1))", case.regime)))
        }
        Regime::TbII | Regime::UllII => {
            return Err(Error::RegimeHasNoThreshold(format!("{} (a unique solution for every alpha)", case.regime)))
        }
        Regime::TbIII => {
            let (u, l) = (case.upper[0], case.lower[0]);
            specs.push(ThresholdSpec {
                name: "alpha0".into(),
                comparison: Comparison {
                    terms: vec![(1.0, curve(TrajectoryKind::GammaPlus, beta(l), opts)?)],
                    reference: curve(TrajectoryKind::GammaStar, beta(u), opts)?,
                },
                description: format!("GammaPlus(beta={}) - GammaStar(beta={})", beta(l), beta(u)),
                solution_type: SolutionType::Type00,
                decreasing_branch: None,
                feasible_when_nonneg: false,
                continuum: false,
            });
        }
        Regime::UulII | Regime::UulIII => {
            let w = junction_weights(network)?;
            let l = case.lower[0];
            let lk = lower_kind(beta(l));
            if case.regime == Regime::UulIII {
                let terms = w
                    .branch_ids
                    .iter()
                    .zip(&w.weights)
                    .map(|(&id, &xi)| Ok((xi, curve(TrajectoryKind::GammaStar, beta(id), opts)?)))
                    .collect::<Result<Vec<_>>>()?;
                specs.push(ThresholdSpec {
                    name: "alpha_star".into(),
                    comparison: Comparison { terms, reference: curve(lk, beta(l), opts)? },
                    description: "xi1 GammaStar1 + xi2 GammaStar2 - GammaPlus3".into(),
                    solution_type: SolutionType::Type00,
                    decreasing_branch: None,
                    feasible_when_nonneg: true,
                    continuum: true,
                });
            }
            for k in 0..2 {
                let (i, j) = (w.branch_ids[k], w.branch_ids[1 - k]);
                specs.push(ThresholdSpec {
                    name: format!("alpha_hat_{i}"),
                    comparison: Comparison {
                        terms: vec![
                            (w.weights[k], curve(TrajectoryKind::GammaMinus, beta(i), opts)?),
                            (w.weights[1 - k], curve(TrajectoryKind::GammaStar, beta(j), opts)?),
                        ],
                        reference: curve(lk, beta(l), opts)?,
                    },
                    description: format!("xi_{i} GammaMinus_{i} + xi_{j} GammaStar_{j} - {}_{l}", lk),
                    solution_type: SolutionType::Type01,
                    decreasing_branch: Some(i),
                    feasible_when_nonneg: true,
                    continuum: false,
                });
            }
        }
        Regime::UulIV => {
            let w = junction_weights(network)?;
            let l = case.lower[0];
            let lk = lower_kind(beta(l));
            let k = (0..2).find(|&k| !is_supercritical(beta(w.branch_ids[k]))).unwrap();
            let (i, j) = (w.branch_ids[k], w.branch_ids[1 - k]);
            specs.push(ThresholdSpec {
                name: "alpha_star_star".into(),
                comparison: Comparison {
                    terms: vec![
                        (w.weights[k], curve(TrajectoryKind::GammaMinus, beta(i), opts)?),
                        (w.weights[1 - k], curve(TrajectoryKind::GammaStar, beta(j), opts)?),
                    ],
                    reference: curve(lk, beta(l), opts)?,
                },
                description: format!("xi_{i} GammaMinus_{i} + xi_{j} GammaStar_{j} - {}_{l}", lk),
                solution_type: SolutionType::Type01,
                decreasing_branch: Some(i),
                feasible_when_nonneg: true,
                continuum: false,
            });
        }
        Regime::UllIII => {
            let w = junction_weights(network)?;
            let u = case.upper[0];
            let terms = w
                .branch_ids
                .iter()
                .zip(&w.weights)
                .map(|(&id, &eta)| Ok((eta, curve(lower_kind(beta(id)), beta(id), opts)?)))
                .collect::<Result<Vec<_>>>()?;
            specs.push(ThresholdSpec {
                name: "alpha_star".into(),
                comparison: Comparison { terms, reference: curve(TrajectoryKind::GammaStar, beta(u), opts)? },
                description: "eta1 Psi1 + eta2 Psi2 - GammaStar_U".into(),
                solution_type: SolutionType::Type00,
                decreasing_branch: None,
                feasible_when_nonneg: false,
                continuum: false,
            });
        }
    }
    let mut thresholds = Vec::new();
    let mut existence = Vec::new();
    for spec in specs {
        let (t, e) = evaluate(spec, opts.bisection_tol)?;
        thresholds.push(t);
        existence.extend(e);
    }
    if case.regime == Regime::UulII {
        existence.insert(
            0,
            ExistenceInterval { lower: 0.0, upper: 1.0, solution_type: SolutionType::Type00, decreasing_branch: None, continuum: true },
        );
    }
    Ok(ThresholdReport { case, thresholds, existence })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExistenceLabel {
    NoSolution,
    Unique,
    UniqueType01,
    Continuum,
}

impl fmt::Display for ExistenceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExistenceLabel::NoSolution => "no-solution",
            ExistenceLabel::Unique => "unique",
            ExistenceLabel::UniqueType01 => "unique-type-01",
            ExistenceLabel::Continuum => "continuum",
        })
    }
}

/// Tolerance for placing `alpha` on a threshold.
pub const ALPHA_TOL: f64 = 1e-9;

/// Existence and multiplicity of solutions with junction value `alpha`.
pub fn existence_classification(network: &RiverNetwork, alpha: f64) -> Result<ExistenceLabel> {
    let case = classify_case(network)?;
    let report = match case.regime {
        Regime::TbIII | Regime::UulII | Regime::UulIII | Regime::UulIV | Regime::UllIII => Some(compute_thresholds(network)?),
        _ => None,
    };
    Ok(existence_from_report(&case, report.as_ref(), alpha))
}

/// Table lookup behind [`existence_classification`].
pub fn existence_from_report(case: &CaseTag, report: Option<&ThresholdReport>, alpha: f64) -> ExistenceLabel {
    if !(alpha > 0.0 && alpha < 1.0) {
        return ExistenceLabel::NoSolution;
    }
    let within = |e: &ExistenceInterval| alpha >= e.lower - ALPHA_TOL && alpha <= e.upper;
    match case.regime {
        Regime::TbI | Regime::UulI | Regime::UllI => ExistenceLabel::NoSolution,
        Regime::TbII | Regime::UllII => ExistenceLabel::Unique,
        Regime::UulII => ExistenceLabel::Continuum,
        _ => {
            let Some(report) = report else { return ExistenceLabel::NoSolution };
            let type00 = report.existence.iter().find(|e| e.solution_type == SolutionType::Type00 && within(e));
            if let Some(e) = type00 {
                if e.continuum && (alpha - e.lower).abs() > ALPHA_TOL {
                    return ExistenceLabel::Continuum;
                }
                return ExistenceLabel::Unique;
            }
            if report.existence.iter().any(|e| e.solution_type == SolutionType::Type01 && within(e)) {
                return ExistenceLabel::UniqueType01;
            }
            ExistenceLabel::NoSolution
        }
    }
}

/// Which solution to build at a given `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TypeSelector {
    /// All upper branches decay to 0. `split` fixes the physical junction
    /// slope of the first upper branch in continuum regimes; `None` picks the
    /// split minimizing the largest upper slope.
    Type00 { split: Option<f64> },
    /// Upper branch `decreasing` rises to 1 upstream.
    Type01 { decreasing: usize },
}

impl Default for TypeSelector {
    fn default() -> Self {
        TypeSelector::Type00 { split: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub trace: TraceOptions,
    /// Branches are sampled until within this distance of their limit.
    pub limit_tol: f64,
    /// Fixed physical spacing on every branch; `None` uses
    /// `min(0.01, 1 / (4 beta))` per branch.
    pub spacing: Option<f64>,
    /// Slack allowed on the feasibility tests (scaled slope units).
    pub feasibility_slack: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { trace: TraceOptions::default(), limit_tol: 1e-8, spacing: None, feasibility_slack: 1e-8 }
    }
}

pub fn default_spacing(beta: f64) -> f64 {
    0.01_f64.min(0.25 / beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchProfile {
    pub branch: usize,
    pub upper: bool,
    pub beta: f64,
    /// Physical positions, ordered away from the junction.
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    /// Physical derivative `d phi / dx`.
    pub slope: Vec<f64>,
    /// Limit at the far end (`0` or `1`).
    pub limit: f64,
}

impl BranchProfile {
    /// Cubic Hermite value at physical `x`; the limit beyond the sampled range.
    pub fn eval(&self, x: f64) -> f64 {
        let y = x.abs();
        let n = self.x.len();
        let ys = |i: usize| self.x[i].abs();
        if n == 1 || y >= ys(n - 1) {
            return if n == 1 || y > ys(n - 1) { self.limit } else { self.value[n - 1] };
        }
        let i = self.x.partition_point(|v| v.abs() <= y).clamp(1, n - 1) - 1;
        let (y0, y1) = (ys(i), ys(i + 1));
        let h = y1 - y0;
        let t = (y - y0) / h;
        // Slopes with respect to |x|.
        let sgn = if self.upper { -1.0 } else { 1.0 };
        let (d0, d1) = (sgn * self.slope[i], sgn * self.slope[i + 1]);
        let (v0, v1) = (self.value[i], self.value[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * v0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * v1 + (t3 - t2) * h * d1
    }

    pub fn junction_slope(&self) -> f64 {
        self.slope[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryProfile {
    pub alpha: f64,
    pub case: Option<CaseTag>,
    pub solution_type: SolutionType,
    pub branches: Vec<BranchProfile>,
    /// `|sum_lower a phi'(0) - sum_upper a phi'(0)|`.
    pub flux_residual: f64,
    /// Decay class of each upper branch that tends to 0 (`None` elsewhere or
    /// when the fit is not possible).
    pub decay: Vec<Option<DecayClass>>,
}

impl StationaryProfile {
    pub fn branch(&self, id: usize) -> &BranchProfile {
        self.branches.iter().find(|b| b.branch == id).expect("branch id")
    }

    /// Samples the profile as initial data for the simulator.
    pub fn as_initial_data(&self) -> impl Fn(usize, f64) -> f64 + '_ {
        move |b, x| if x == 0.0 { self.alpha } else { self.branch(b).eval(x) }
    }
}

fn constant_profile(network: &RiverNetwork, case: Option<CaseTag>, c: f64) -> StationaryProfile {
    let branches = network
        .branches()
        .iter()
        .enumerate()
        .map(|(id, b)| BranchProfile {
            branch: id,
            upper: b.is_upper(),
            beta: b.beta,
            x: vec![0.0],
            value: vec![c],
            slope: vec![0.0],
            limit: c,
        })
        .collect();
    StationaryProfile {
        alpha: c,
        case,
        solution_type: SolutionType::Type00,
        branches,
        flux_residual: 0.0,
        decay: vec![None; network.len()],
    }
}

/// Samples an orbit at `s = s0 + dir * beta * k * h` (`k = 0, 1, ...`) while
/// the orbit lasts.
fn sample_branch(
    state_at: &dyn Fn(f64) -> Option<PhasePoint>,
    s0: f64,
    s_end: f64,
    dir: f64,
    id: usize,
    upper: bool,
    beta: f64,
    h: f64,
    limit: f64,
) -> BranchProfile {
    let mut p = BranchProfile { branch: id, upper, beta, x: vec![], value: vec![], slope: vec![], limit };
    let span = (s_end - s0) * dir;
    let mut k = 0usize;
    loop {
        let ds = beta * k as f64 * h;
        if ds > span + 1e-12 {
            break;
        }
        let Some(pt) = state_at(s0 + dir * ds.min(span)) else { break };
        let x = k as f64 * h;
        p.x.push(if upper { -x } else { x });
        p.value.push(pt.phi);
        p.slope.push(beta * pt.psi);
        k += 1;
    }
    p
}

/// Lower branch on the stable manifold through `phi = alpha`; `None` when
/// `alpha` is already within the launch offset of 1.
fn lower_branch(
    manifold: &TrajectoryCurve,
    alpha: f64,
    id: usize,
    beta: f64,
    h: f64,
) -> Result<BranchProfile> {
    let Some(hit) = manifold.at_phi(alpha) else {
        let l = equilibrium_eigen(manifold.mu).lambda1_minus;
        return Ok(BranchProfile {
            branch: id,
            upper: false,
            beta,
            x: vec![0.0],
            value: vec![alpha],
            slope: vec![beta * l * (alpha - 1.0)],
            limit: 1.0,
        });
    };
    Ok(sample_branch(&|s| manifold.state_at(s), hit.x, 0.0, 1.0, id, false, beta, h, 1.0))
}

fn manifold_slope(curve: &TrajectoryCurve, alpha: f64, near_one: f64) -> f64 {
    curve.at_phi(alpha).map_or(near_one * (alpha - 1.0), |s| s.psi)
}

/// Junction slope cap `Psi*(alpha)` on an upper branch with `beta >= 2`.
fn star_cap(beta: f64, alpha: f64, opts: &ProfileOptions) -> Result<f64> {
    let star = trace_special_trajectory(TrajectoryKind::GammaStar, mu_of(beta), &opts.trace)?;
    star.at_phi(alpha)
        .map(|s| s.psi)
        .ok_or_else(|| Error::InvalidInput(format!("alpha = {alpha} outside GammaStar's range")))
}

pub fn stationary_profile(network: &RiverNetwork, alpha: f64, selector: TypeSelector) -> Result<StationaryProfile> {
    stationary_profile_with(network, alpha, selector, &ProfileOptions::default())
}

/// Feasible range of the physical junction slope of the first upper branch
/// for type-00 solutions of a two-upper network.
pub fn feasible_split(network: &RiverNetwork, alpha: f64, opts: &ProfileOptions) -> Result<(f64, f64)> {
    let case = classify_case(network)?;
    if !matches!(case.regime, Regime::UulII | Regime::UulIII) {
        return Err(Error::InvalidInput(format!("{}: junction slopes have no free split", case.regime)));
    }
    let (u1, u2, l) = (case.upper[0], case.upper[1], case.lower[0]);
    let b = |id: usize| network.branch(id);
    let lower = trace_special_trajectory(lower_kind(b(l).beta), mu_of(b(l).beta), &opts.trace)?;
    let l1m = equilibrium_eigen(mu_of(b(l).beta)).lambda1_minus;
    let flux = b(l).a * b(l).beta * manifold_slope(&lower, alpha, l1m);
    let cap1 = b(u1).beta * star_cap(b(u1).beta, alpha, opts)?;
    let cap2 = b(u2).beta * star_cap(b(u2).beta, alpha, opts)?;
    // a1 s1 + a2 s2 = flux, 0 < s_i <= cap_i.
    let lo = ((flux - b(u2).a * cap2) / b(u1).a).max(0.0);
    let hi = cap1.min(flux / b(u1).a);
    let slack = opts.feasibility_slack * b(u1).beta.max(b(u2).beta);
    if lo > hi + slack {
        return Err(Error::InfeasibleAlpha { alpha, threshold: f64::NAN });
    }
    Ok((lo.min(hi), hi))
}

fn upper_decaying(
    network: &RiverNetwork,
    id: usize,
    alpha: f64,
    psi: f64,
    opts: &ProfileOptions,
) -> Result<BranchProfile> {
    let beta = network.branch(id).beta;
    let orbit = trace_orbit(mu_of(beta), PhasePoint::new(alpha, psi), true, opts.limit_tol, &opts.trace)?;
    let end = orbit.endpoint().x;
    let h = opts.spacing.unwrap_or_else(|| default_spacing(beta));
    Ok(sample_branch(&|s| orbit.state_at(s), 0.0, end, -1.0, id, true, beta, h, 0.0))
}

fn upper_rising(network: &RiverNetwork, id: usize, alpha: f64, opts: &ProfileOptions) -> Result<(BranchProfile, f64)> {
    let beta = network.branch(id).beta;
    let gm = trace_special_trajectory(TrajectoryKind::GammaMinus, mu_of(beta), &opts.trace)?;
    let h = opts.spacing.unwrap_or_else(|| default_spacing(beta));
    match gm.at_phi(alpha) {
        Some(hit) => Ok((
            sample_branch(&|s| gm.state_at(s), hit.x, 0.0, -1.0, id, true, beta, h, 1.0),
            hit.psi,
        )),
        None => {
            let l = equilibrium_eigen(mu_of(beta)).lambda1_plus;
            let psi = l * (alpha - 1.0);
            let p = BranchProfile { branch: id, upper: true, beta, x: vec![0.0], value: vec![alpha], slope: vec![beta * psi], limit: 1.0 };
            Ok((p, psi))
        }
    }
}

fn infeasible(alpha: f64, regime: Regime, network: &RiverNetwork) -> Error {
    let threshold = compute_thresholds(network).ok().and_then(|r| r.thresholds.first().map(|t| t.value));
    log::debug!("alpha = {alpha} infeasible in {regime}");
    Error::InfeasibleAlpha { alpha, threshold: threshold.unwrap_or(f64::NAN) }
}

pub fn stationary_profile_with(
    network: &RiverNetwork,
    alpha: f64,
    selector: TypeSelector,
    opts: &ProfileOptions,
) -> Result<StationaryProfile> {
    let case = classify_case(network)?;
    if !(alpha >= 0.0 && alpha <= 1.0) {
        return Err(Error::InfeasibleAlpha { alpha, threshold: f64::NAN });
    }
    if alpha == 0.0 || alpha == 1.0 {
        return Ok(constant_profile(network, Some(case), alpha));
    }
    let b = |id: usize| network.branch(id);
    let spacing = |id: usize| opts.spacing.unwrap_or_else(|| default_spacing(b(id).beta));
    let slack = opts.feasibility_slack;
    let regime = case.regime;
    if matches!(regime, Regime::TbI | Regime::UulI | Regime::UllI) {
        return Err(Error::InfeasibleAlpha { alpha, threshold: f64::NAN });
    }
    let mut branches: Vec<BranchProfile> = Vec::new();
    let mut solution_type = SolutionType::Type00;

    // Lower branches first: their slopes are fixed by alpha.
    let mut lower_flux = 0.0;
    for &id in &case.lower {
        let beta = b(id).beta;
        let manifold = trace_special_trajectory(lower_kind(beta), mu_of(beta), &opts.trace)?;
        let p = lower_branch(&manifold, alpha, id, beta, spacing(id))?;
        lower_flux += b(id).a * p.junction_slope();
        branches.push(p);
    }

    match (case.topology, selector) {
        (Topology::TwoBranch | Topology::OneUpTwoDown, TypeSelector::Type01 { .. }) => {
            return Err(Error::InvalidInput(format!("{regime} has no type-01 solutions")));
        }
        (Topology::TwoBranch | Topology::OneUpTwoDown, TypeSelector::Type00 { .. }) => {
            let u = case.upper[0];
            let beta = b(u).beta;
            let psi = lower_flux / (b(u).a * beta);
            if psi > star_cap(beta, alpha, opts)? + slack {
                return Err(infeasible(alpha, regime, network));
            }
            branches.push(upper_decaying(network, u, alpha, psi, opts)?);
        }
        (Topology::TwoUpOneDown, TypeSelector::Type00 { split }) => {
            if regime == Regime::UulIV {
                return Err(Error::InvalidInput("UUL-IV has only type-01 solutions".into()));
            }
            let (u1, u2) = (case.upper[0], case.upper[1]);
            let (lo, hi) = feasible_split(network, alpha, opts).map_err(|e| match e {
                Error::InfeasibleAlpha { .. } => infeasible(alpha, regime, network),
                e => e,
            })?;
            let s1 = match split {
                Some(s) => {
                    if s < lo - slack || s > hi + slack {
                        return Err(Error::InvalidInput(format!("split {s} outside the feasible interval [{lo}, {hi}]")));
                    }
                    s.clamp(lo, hi)
                }
                None => {
                    // Equal slopes when both caps allow it, otherwise the
                    // tighter cap binds.
                    let (a1, a2) = (b(u1).a, b(u2).a);
                    let equal = lower_flux / (a1 + a2);
                    let cap1 = b(u1).beta * star_cap(b(u1).beta, alpha, opts)?;
                    let cap2 = b(u2).beta * star_cap(b(u2).beta, alpha, opts)?;
                    if equal <= cap1 && equal <= cap2 {
                        equal
                    } else if equal > cap1 {
                        cap1
                    } else {
                        (lower_flux - a2 * cap2) / a1
                    }
                }
            };
            let s2 = (lower_flux - b(u1).a * s1) / b(u2).a;
            if !(s1 > 0.0 && s2 > 0.0) {
                return Err(Error::InvalidInput(format!("degenerate split: slopes {s1}, {s2}")));
            }
            branches.push(upper_decaying(network, u1, alpha, s1 / b(u1).beta, opts)?);
            branches.push(upper_decaying(network, u2, alpha, s2 / b(u2).beta, opts)?);
        }
        (Topology::TwoUpOneDown, TypeSelector::Type01 { decreasing }) => {
            if !case.upper.contains(&decreasing) {
                return Err(Error::InvalidInput(format!("branch {decreasing} is not an upper branch")));
            }
            let j = *case.upper.iter().find(|&&id| id != decreasing).unwrap();
            if !is_supercritical(b(j).beta) {
                return Err(Error::InvalidInput(format!("branch {j} must have beta >= 2 to decay upstream")));
            }
            let (rising, psi_i) = upper_rising(network, decreasing, alpha, opts)?;
            let s_i = b(decreasing).beta * psi_i;
            let s_j = (lower_flux - b(decreasing).a * s_i) / b(j).a;
            let psi_j = s_j / b(j).beta;
            if psi_j > star_cap(b(j).beta, alpha, opts)? + slack {
                return Err(infeasible(alpha, regime, network));
            }
            branches.push(rising);
            branches.push(upper_decaying(network, j, alpha, psi_j, opts)?);
            solution_type = SolutionType::Type01;
        }
        (Topology::GeneralStar, _) => unreachable!("rejected by classify_case"),
    }
    branches.sort_by_key(|p| p.branch);
    finish_profile(network, alpha, Some(case), solution_type, branches)
}

fn finish_profile(
    network: &RiverNetwork,
    alpha: f64,
    case: Option<CaseTag>,
    solution_type: SolutionType,
    branches: Vec<BranchProfile>,
) -> Result<StationaryProfile> {
    let mut up = 0.0;
    let mut low = 0.0;
    for p in &branches {
        let flux = network.branch(p.branch).a * p.junction_slope();
        if p.upper {
            up += flux;
        } else {
            low += flux;
        }
    }
    let mut profile = StationaryProfile {
        alpha,
        case,
        solution_type,
        branches,
        flux_residual: (low - up).abs(),
        decay: vec![None; network.len()],
    };
    for id in 0..network.len() {
        let p = profile.branch(id);
        if p.upper && p.limit == 0.0 {
            profile.decay[id] = decay_rate(&profile, id).ok();
        }
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayKind {
    Fast,
    Slow,
    SlowCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayClass {
    pub kind: DecayKind,
    pub fitted_exponent: f64,
    /// Closed-form exponent of the declared kind.
    pub expected_exponent: f64,
    /// Physical `x`-interval of the fit.
    pub fit_window: (f64, f64),
}

impl DecayClass {
    pub fn relative_error(&self) -> f64 {
        ((self.fitted_exponent - self.expected_exponent) / self.expected_exponent).abs()
    }
}

/// Values used by the decay fit.
pub const FIT_WINDOW: (f64, f64) = (1e-7, 1e-4);

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Relative misfit of the best line through `(x, v e^{-k x})`.
fn linear_misfit(xs: &[f64], vs: &[f64], k: f64) -> f64 {
    let g: Vec<f64> = xs.iter().zip(vs).map(|(x, v)| v * (-k * x).exp()).collect();
    let slope = least_squares_slope(xs, &g);
    let n = xs.len() as f64;
    let (mx, mg) = (xs.iter().sum::<f64>() / n, g.iter().sum::<f64>() / n);
    let ss: f64 = xs.iter().zip(&g).map(|(x, y)| (y - mg - slope * (x - mx)).powi(2)).sum();
    (ss / n).sqrt() / mg.abs()
}

/// Exponent `k` for which `v e^{-k x}` is affine in `x`, the shape of
/// `(c1 |x| + c0) e^{k x}`: a coarse scan followed by golden-section search.
fn critical_exponent(xs: &[f64], vs: &[f64]) -> f64 {
    let (lo, hi, n) = (0.5, 1.5, 201);
    let step = (hi - lo) / (n - 1) as f64;
    let best = (0..n)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| linear_misfit(xs, vs, *a).total_cmp(&linear_misfit(xs, vs, *b)))
        .unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-10 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if linear_misfit(xs, vs, c) < linear_misfit(xs, vs, d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Far-field exponent of an upper branch decaying to 0, fitted on the
/// samples whose values lie in [`FIT_WINDOW`].
pub fn decay_rate(profile: &StationaryProfile, branch_id: usize) -> Result<DecayClass> {
    let p = profile
        .branches
        .iter()
        .find(|p| p.branch == branch_id)
        .ok_or_else(|| Error::InvalidInput(format!("no branch {branch_id}")))?;
    if !p.upper || p.limit != 0.0 {
        return Err(Error::InvalidInput(format!("branch {branch_id} is not an upper branch decaying to 0")));
    }
    if !is_supercritical(p.beta) {
        return Err(Error::InvalidInput(format!("beta = {} < 2 has no monotone decay", p.beta)));
    }
    let (lo, hi) = FIT_WINDOW;
    let (xs, logs): (Vec<f64>, Vec<f64>) =
        p.x.iter().zip(&p.value).filter(|(_, &v)| v >= lo && v <= hi).map(|(&x, &v)| (x, v.ln())).unzip();
    if xs.len() < 8 {
        return Err(Error::WindowTooShort(format!("{} samples in the fit window", xs.len())));
    }
    let span = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - logs.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 3.0 {
        return Err(Error::WindowTooShort(format!("window spans {span:.2} e-foldings")));
    }
    let window = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let fitted = least_squares_slope(&xs, &logs);
    let beta = p.beta;
    let (kp, km) = (fast_exponent(beta).unwrap(), slow_exponent(beta).unwrap());
    if beta == 2.0 {
        // Repeated exponent 1: test for the |x| e^x factor.
        let lx: Vec<f64> = xs.iter().map(|x| x.abs().ln()).collect();
        let resid: Vec<f64> = xs.iter().zip(&logs).map(|(x, l)| l - x).collect();
        let power = least_squares_slope(&lx, &resid);
        if power > 0.5 {
            // The subleading constant in (c1 |x| + c0) e^x biases a plain
            // log-linear fit, so k is fitted against the full shape.
            let vs: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
            let k = critical_exponent(&xs, &vs);
            return Ok(DecayClass { kind: DecayKind::SlowCritical, fitted_exponent: k, expected_exponent: 1.0, fit_window: window });
        }
        return Ok(DecayClass { kind: DecayKind::Fast, fitted_exponent: fitted, expected_exponent: 1.0, fit_window: window });
    }
    let (ep, em) = (((fitted - kp) / kp).abs(), ((fitted - km) / km).abs());
    if ep.min(em) > 0.1 {
        return Err(Error::AmbiguousFit { fitted, k_plus: kp, k_minus: km });
    }
    let (kind, expected) = if ep <= em { (DecayKind::Fast, kp) } else { (DecayKind::Slow, km) };
    Ok(DecayClass { kind, fitted_exponent: fitted, expected_exponent: expected, fit_window: window })
}

/// `(M e^{k+ x}` on upper branches with `beta >= 2`, `M` elsewhere): a
/// supersolution whose upstream tail already decays at the fast rate.
pub fn supersolution(network: &RiverNetwork, m: f64) -> impl Fn(usize, f64) -> f64 + '_ {
    move |b, x| {
        let spec = network.branch(b);
        match fast_exponent(spec.beta) {
            Some(k) if spec.is_upper() => m * (k * x).exp(),
            _ => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub length: f64,
    pub h: f64,
    pub far_bc: FarBoundary,
    /// Pseudo-time steps: `dt_start` until `switch_time`, then `dt`.
    pub dt_start: f64,
    pub switch_time: f64,
    pub dt: f64,
    /// Stop once `max |w_new - w_old| / dt` falls below this.
    pub tol: f64,
    pub max_time: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            length: 50.0,
            h: 0.01,
            far_bc: FarBoundary::FastDecayRobin,
            dt_start: 0.05,
            switch_time: 10.0,
            dt: 0.5,
            tol: 1e-9,
            max_time: 1e5,
        }
    }
}

/// Outcome of a relaxation run.
#[derive(Debug, Clone)]
pub struct Relaxed {
    pub state: SimulationState,
    /// Final `max |dw/dt|`.
    pub rate: f64,
}

/// Backward-Euler pseudo-time stepping of `state` until it stops moving.
/// The fixed point of the scheme is the discrete stationary state whatever
/// the step, so large steps are used once the transient has passed.
pub fn relax(mut state: SimulationState, opts: &OracleOptions) -> Result<Relaxed> {
    let be = Scheme { theta: 1.0, startup_steps: 0 };
    let start = Simulator::new(&state.network, &state.grid, opts.dt_start, be)?;
    let main = Simulator::new(&state.network, &state.grid, opts.dt, be)?;
    let mut prev = state.fields.clone();
    let mut rate = f64::INFINITY;
    while state.time < opts.max_time {
        let sim = if state.time < opts.switch_time { &start } else { &main };
        sim.step(&mut state)?;
        rate = state
            .fields
            .iter()
            .flatten()
            .zip(prev.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / sim.dt();
        if rate < opts.tol && state.time >= opts.switch_time {
            return Ok(Relaxed { state, rate });
        }
        for (p, w) in prev.iter_mut().zip(&state.fields) {
            p.copy_from_slice(w);
        }
    }
    Err(Error::NotConverged { time: state.time, drift: rate })
}

/// Runs the time stepper from `init` to its stationary limit and returns it
/// as a profile.
pub fn relaxation_oracle(
    network: &RiverNetwork,
    init: &dyn Fn(usize, f64) -> f64,
    opts: &OracleOptions,
) -> Result<StationaryProfile> {
    let grid = GridSpec::with_spacing(network, opts.length, opts.h, opts.far_bc)?;
    let state = discretize(network, &grid, init)?;
    let relaxed = relax(state, opts)?;
    Ok(profile_from_state(&relaxed.state))
}

/// Reads a simulator state as a stationary profile (one-sided
/// second-order slopes at the ends, central inside).
pub fn profile_from_state(state: &SimulationState) -> StationaryProfile {
    let network = &state.network;
    let mut branches = Vec::new();
    let mut solution_type = SolutionType::Type00;
    for b in 0..network.len() {
        let spec = network.branch(b);
        let w = &state.fields[b];
        let h = state.grid.spacing(b);
        let n = w.len();
        let sgn = if spec.is_upper() { -1.0 } else { 1.0 };
        let slope: Vec<f64> = (0..n)
            .map(|j| {
                let d = if j == 0 {
                    (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
                } else if j == n - 1 {
                    (3.0 * w[j] - 4.0 * w[j - 1] + w[j - 2]) / (2.0 * h)
                } else {
                    (w[j + 1] - w[j - 1]) / (2.0 * h)
                };
                sgn * d
            })
            .collect();
        let limit = if w[n - 1] > 0.5 { 1.0 } else { 0.0 };
        if spec.is_upper() && limit == 1.0 {
            solution_type = SolutionType::Type01;
        }
        branches.push(BranchProfile {
            branch: b,
            upper: spec.is_upper(),
            beta: spec.beta,
            x: state.branch_positions(b),
            value: w.clone(),
            slope,
            limit,
        });
    }
    let case = classify_case(network).ok();
    finish_profile(network, state.junction_value, case, solution_type, branches).expect("profile assembly is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tb(bu: f64, bl: f64) -> RiverNetwork {
        RiverNetwork::two_branch(bu, bl).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_case(&tb(3.0, 1.0)).unwrap().regime, Regime::TbIII);
        assert_eq!(classify_case(&tb(1.0, 3.0)).unwrap().regime, Regime::TbI);
        assert_eq!(classify_case(&tb(2.0, 2.0)).unwrap().regime, Regime::TbII);
        let uul = RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap();
        assert_eq!(classify_case(&uul).unwrap().regime, Regime::UulIII);
        let uul = RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap();
        assert_eq!(classify_case(&uul).unwrap().regime, Regime::UulIV);
        let uul = RiverNetwork::two_up_one_down(2.0, 2.0, 2.0).unwrap();
        assert_eq!(classify_case(&uul).unwrap().regime, Regime::UulII);
        let ull = RiverNetwork::one_up_two_down(1.5, 1.0, 1.0).unwrap();
        assert_eq!(classify_case(&ull).unwrap().regime, Regime::UllI);
        let ull = RiverNetwork::one_up_two_down(3.0, 1.0, 2.5).unwrap();
        assert_eq!(classify_case(&ull).unwrap().regime, Regime::UllIII);
    }

    #[test]
    fn tie_goes_to_supercritical() {
        // Both UUL-III and UUL-IV hypotheses cover (2, 3, 1); ties go to >= 2.
        let uul = RiverNetwork::two_up_one_down(2.0, 3.0, 1.0).unwrap();
        assert_eq!(classify_case(&uul).unwrap().regime, Regime::UulIII);
        assert_eq!(classify_case(&tb(2.0, 1.0)).unwrap().regime, Regime::TbIII);
    }

    #[test]
    fn feasible_intervals_follow_the_sign() {
        assert_eq!(feasible_intervals(&[0.3], 1.0, false), vec![(0.3, 1.0)]);
        assert_eq!(feasible_intervals(&[0.3], -1.0, true), vec![(0.3, 1.0)]);
        assert_eq!(feasible_intervals(&[0.3, 0.5], -1.0, true), vec![(0.3, 0.5)]);
        assert_eq!(feasible_intervals(&[0.3, 0.5], 1.0, true), vec![(0.0, 0.3), (0.5, 1.0)]);
    }

    #[test]
    fn tb_iii_threshold_is_single() {
        let r = compute_thresholds(&tb(3.0, 1.0)).unwrap();
        let t = r.primary().unwrap();
        assert_eq!(t.name, "alpha0");
        assert_eq!(t.crossing_count, 1);
        assert!(t.value > 0.0 && t.value < 1.0);
        assert_eq!(r.existence.len(), 1);
        assert_eq!(r.existence[0].upper, 1.0);
    }

    #[test]
    fn constant_profiles() {
        let p = stationary_profile(&tb(3.0, 1.0), 1.0, TypeSelector::default()).unwrap();
        assert!(p.branches.iter().all(|b| b.value.iter().all(|&v| v == 1.0)));
        assert_eq!(p.flux_residual, 0.0);
    }

    #[test]
    fn least_squares_recovers_a_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        assert!((least_squares_slope(&xs, &ys) - 2.5).abs() < 1e-14);
    }
}
