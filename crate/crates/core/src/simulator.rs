//! Finite-difference time stepping on the truncated star graph.
//!
//! Every branch is discretized in its local coordinate `y = |x| >= 0`, where
//! the equation reads `w_t = w_yy - v w_y + w(1 - w)` with `v = +beta` on
//! lower branches and `v = -beta` on upper ones. In that coordinate the
//! Kirchhoff condition becomes `sum_b a_b w_y(0) = 0` over all branches.
//!
//! Node 0 of every branch is the junction. Diffusion and advection are
//! treated with a theta-scheme (Crank-Nicolson by default), the reaction
//! explicitly. Each branch contributes a tridiagonal block coupled to the
//! single junction unknown; the junction row is the Kirchhoff balance with
//! three-point one-sided differences. The block system is solved by
//! eliminating the branch blocks (Thomas) and solving the scalar junction
//! equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{RiverNetwork, Topology};

pub const MAX_SPACING: f64 = 0.05;
pub const MIN_LENGTH: f64 = 50.0;
pub const MIN_NODES: usize = 1001;

/// Condition imposed at the far end of each truncated branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FarBoundary {
    Neumann,
    Dirichlet,
    /// `w_x = k+ w` at the far end of upper branches with `beta >= 2`
    /// (selects the fast upstream decay `e^{k+ x}`); Neumann elsewhere.
    FastDecayRobin,
}

impl std::str::FromStr for FarBoundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "neumann" => Ok(FarBoundary::Neumann),
            "dirichlet" => Ok(FarBoundary::Dirichlet),
            "robin" | "fast-decay-robin" => Ok(FarBoundary::FastDecayRobin),
            other => Err(Error::InvalidInput(format!("unknown far boundary '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lengths: Vec<f64>,
    pub nodes: Vec<usize>,
    pub far_bc: FarBoundary,
}

impl GridSpec {
    /// Same length and node count on every branch.
    pub fn uniform(network: &RiverNetwork, length: f64, nodes: usize, far_bc: FarBoundary) -> Result<Self> {
        let g = Self { lengths: vec![length; network.len()], nodes: vec![nodes; network.len()], far_bc };
        g.validate(network)?;
        Ok(g)
    }

    /// Same length on every branch with spacing as close to `h` as the
    /// length allows (never coarser).
    pub fn with_spacing(network: &RiverNetwork, length: f64, h: f64, far_bc: FarBoundary) -> Result<Self> {
        let nodes = (length / h - 1e-9).ceil() as usize + 1;
        Self::uniform(network, length, nodes, far_bc)
    }

    pub fn spacing(&self, branch: usize) -> f64 {
        self.lengths[branch] / (self.nodes[branch] - 1) as f64
    }

    /// Physical coordinate of node `j` (negative on upper branches).
    pub fn position(&self, network: &RiverNetwork, branch: usize, j: usize) -> f64 {
        let y = j as f64 * self.spacing(branch);
        if network.branch(branch).is_upper() {
            -y
        } else {
            y
        }
    }

    pub fn validate(&self, network: &RiverNetwork) -> Result<()> {
        if self.lengths.len() != network.len() || self.nodes.len() != network.len() {
            return Err(Error::InvalidGrid("one length and node count per branch required".into()));
        }
        for b in 0..network.len() {
            let (l, n) = (self.lengths[b], self.nodes[b]);
            if !(l >= MIN_LENGTH) {
                return Err(Error::InvalidGrid(format!("branch {b}: L = {l} < {MIN_LENGTH}")));
            }
            if n < MIN_NODES {
                return Err(Error::InvalidGrid(format!("branch {b}: N = {n} < {MIN_NODES}")));
            }
            let h = self.spacing(b);
            if h > MAX_SPACING * (1.0 + 1e-12) {
                return Err(Error::InvalidGrid(format!("branch {b}: h = {h} > {MAX_SPACING}")));
            }
            let beta = network.branch(b).beta;
            if h * beta >= 2.0 {
                return Err(Error::InvalidGrid(format!("branch {b}: cell Peclet number h*beta/2 = {} >= 1", h * beta / 2.0)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub time: f64,
    pub junction_value: f64,
    /// One array per branch; entry 0 is the junction node.
    pub fields: Vec<Vec<f64>>,
    pub grid: GridSpec,
    pub network: RiverNetwork,
    /// `max(1, sup of the initial data)`: the invariant upper bound.
    pub bound: f64,
    pub steps: usize,
}

impl SimulationState {
    pub fn branch_positions(&self, branch: usize) -> Vec<f64> {
        (0..self.grid.nodes[branch]).map(|j| self.grid.position(&self.network, branch, j)).collect()
    }

    /// Largest value on a branch over the truncated window.
    pub fn windowed_sup(&self, branch: usize) -> f64 {
        self.fields[branch].iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation of a branch field at physical position `x`.
    pub fn value_at(&self, branch: usize, x: f64) -> f64 {
        let h = self.grid.spacing(branch);
        let y = x.abs() / h;
        let n = self.grid.nodes[branch];
        let j = (y.floor() as usize).min(n - 2);
        let t = (y - j as f64).clamp(0.0, 1.0);
        let w = &self.fields[branch];
        w[j] * (1.0 - t) + w[j + 1] * t
    }

    /// `sum_b a_b w_y(0)` with the three-point one-sided stencil.
    pub fn kirchhoff_residual(&self) -> f64 {
        (0..self.network.len())
            .map(|b| {
                let w = &self.fields[b];
                let h = self.grid.spacing(b);
                self.network.branch(b).a * (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
            })
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.fields.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.fields.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sup-norm distance to another state on the same grid.
    pub fn distance(&self, other: &SimulationState) -> Result<f64> {
        if self.grid != other.grid || self.network != other.network {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .fields
            .iter()
            .flatten()
            .zip(other.fields.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Samples `init(branch, x)` on the grid (`x` physical, negative upstream).
pub fn discretize(network: &RiverNetwork, grid: &GridSpec, init: &dyn Fn(usize, f64) -> f64) -> Result<SimulationState> {
    grid.validate(network)?;
    let at_zero: Vec<f64> = (0..network.len()).map(|b| init(b, 0.0)).collect();
    let j0 = at_zero[0];
    if at_zero.iter().any(|v| (v - j0).abs() > 1e-12) {
        return Err(Error::IncompatibleJunctionData(format!("values at x = 0: {at_zero:?}")));
    }
    let mut fields = Vec::with_capacity(network.len());
    for b in 0..network.len() {
        let mut w = Vec::with_capacity(grid.nodes[b]);
        for j in 0..grid.nodes[b] {
            let x = grid.position(network, b, j);
            let v = if j == 0 { j0 } else { init(b, x) };
            if !(v >= 0.0) {
                return Err(Error::NegativeInitialData { branch: b, x });
            }
            w.push(v);
        }
        if grid.far_bc == FarBoundary::Dirichlet {
            *w.last_mut().unwrap() = 0.0;
        }
        fields.push(w);
    }
    let sup = fields.iter().flatten().cloned().fold(0.0, f64::max);
    Ok(SimulationState {
        time: 0.0,
        junction_value: j0,
        fields,
        grid: grid.clone(),
        network: network.clone(),
        bound: sup.max(1.0),
        steps: 0,
    })
}

/// Canonical compactly supported datum `max(0, 1 - x^2)` on every branch.
pub fn canonical_bump(_branch: usize, x: f64) -> f64 {
    (1.0 - x * x).max(0.0)
}

/// Fast upstream exponent `k+ = (beta + sqrt(beta^2 - 4)) / 2` (`beta >= 2`).
pub fn fast_exponent(beta: f64) -> Option<f64> {
    (beta >= 2.0).then(|| 0.5 * (beta + (beta * beta - 4.0).max(0.0).sqrt()))
}

/// Slow upstream exponent `k- = (beta - sqrt(beta^2 - 4)) / 2` (`beta >= 2`).
pub fn slow_exponent(beta: f64) -> Option<f64> {
    (beta >= 2.0).then(|| 0.5 * (beta - (beta * beta - 4.0).max(0.0).sqrt()))
}

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    /// 0.5 is Crank-Nicolson, 1 is backward Euler.
    pub theta: f64,
    /// Number of initial steps replaced by two backward-Euler half steps,
    /// damping the stiff modes excited by non-smooth data.
    pub startup_steps: usize,
}

impl Default for Scheme {
    fn default() -> Self {
        Self { theta: 0.5, startup_steps: 2 }
    }
}

/// Factorized linear part for one `(dt, theta)` pair.
#[derive(Debug, Clone)]
struct Factorized {
    dt: f64,
    theta: f64,
    branches: Vec<BranchSystem>,
    /// `sum_b a_b (3 - 4 q_1 + q_2) / (2 h_b)`.
    junction_denominator: f64,
}

#[derive(Debug, Clone)]
struct BranchSystem {
    h: f64,
    a: f64,
    /// Stencil weights of `A` for `w_{j-1}`, `w_j`, `w_{j+1}`.
    c_lo: f64,
    c_mid: f64,
    c_hi: f64,
    /// Far-end Robin coefficient in the local coordinate: `w_y = g w`.
    g: f64,
    /// Number of unknowns (nodes 1..=m).
    m: usize,
    dirichlet: bool,
    sub: Vec<f64>,
    cprime: Vec<f64>,
    inv_denom: Vec<f64>,
    /// Response of the block to a unit junction value at the new level.
    q: Vec<f64>,
}

impl BranchSystem {
    fn new(network: &RiverNetwork, grid: &GridSpec, b: usize, dt: f64, theta: f64) -> Result<Self> {
        let spec = network.branch(b);
        let h = grid.spacing(b);
        let v = if spec.is_upper() { -spec.beta } else { spec.beta };
        let c_lo = 1.0 / (h * h) + v / (2.0 * h);
        let c_mid = -2.0 / (h * h);
        let c_hi = 1.0 / (h * h) - v / (2.0 * h);
        let n = grid.nodes[b];
        let dirichlet = grid.far_bc == FarBoundary::Dirichlet;
        let g = match grid.far_bc {
            FarBoundary::FastDecayRobin if spec.is_upper() => fast_exponent(spec.beta).map_or(0.0, |k| -k),
            _ => 0.0,
        };
        let m = if dirichlet { n - 2 } else { n - 1 };
        let td = theta * dt;
        let mut sub = vec![-td * c_lo; m];
        let mut diag = vec![1.0 - td * c_mid; m];
        let sup = vec![-td * c_hi; m];
        sub[0] = 0.0;
        if !dirichlet {
            sub[m - 1] = -td * (c_lo + c_hi);
            diag[m - 1] = 1.0 - td * (c_mid + 2.0 * h * g * c_hi);
        }
        let mut cprime = vec![0.0; m];
        let mut inv_denom = vec![0.0; m];
        for i in 0..m {
            let denom = diag[i] - if i > 0 { sub[i] * cprime[i - 1] } else { 0.0 };
            if denom.abs() < 1e-300 || !denom.is_finite() {
                return Err(Error::LinearSolveFailed(format!("zero pivot on branch {b} row {i}")));
            }
            inv_denom[i] = 1.0 / denom;
            cprime[i] = if i + 1 < m { sup[i] * inv_denom[i] } else { 0.0 };
        }
        let mut sys = Self { h, a: spec.a, c_lo, c_mid, c_hi, g, m, dirichlet, sub, cprime, inv_denom, q: vec![] };
        let mut rhs = vec![0.0; m];
        rhs[0] = td * c_lo;
        sys.solve_in_place(&mut rhs);
        for v in &mut rhs {
            *v = flush(*v);
        }
        sys.q = rhs;
        Ok(sys)
    }

    fn solve_in_place(&self, d: &mut [f64]) {
        let m = self.m;
        d[0] *= self.inv_denom[0];
        for i in 1..m {
            d[i] = (d[i] - self.sub[i] * d[i - 1]) * self.inv_denom[i];
        }
        for i in (0..m - 1).rev() {
            d[i] -= self.cprime[i] * d[i + 1];
        }
    }

    /// `(A w)_j` for `j = 1..=m`, with `w[0]` the junction value.
    #[inline]
    fn apply(&self, w: &[f64], j: usize) -> f64 {
        if !self.dirichlet && j == self.m {
            // Ghost node from the far-end condition.
            let ghost = w[j - 1] + 2.0 * self.h * self.g * w[j];
            self.c_lo * w[j - 1] + self.c_mid * w[j] + self.c_hi * ghost
        } else {
            self.c_lo * w[j - 1] + self.c_mid * w[j] + self.c_hi * w[j + 1]
        }
    }
}

/// Values this small are set to zero: subnormal arithmetic in decayed
/// far fields is orders of magnitude slower and carries no information.
const FLUSH: f64 = 1e-290;

#[inline]
fn flush(v: f64) -> f64 {
    if v.abs() < FLUSH {
        0.0
    } else {
        v
    }
}

impl Factorized {
    fn new(network: &RiverNetwork, grid: &GridSpec, dt: f64, theta: f64) -> Result<Self> {
        let branches = (0..network.len())
            .map(|b| BranchSystem::new(network, grid, b, dt, theta))
            .collect::<Result<Vec<_>>>()?;
        let junction_denominator = branches
            .iter()
            .map(|s| s.a * (3.0 - 4.0 * s.q[0] + s.q[1]) / (2.0 * s.h))
            .sum::<f64>();
        if !(junction_denominator.abs() > 0.0) {
            return Err(Error::LinearSolveFailed("singular junction equation".into()));
        }
        Ok(Self { dt, theta, branches, junction_denominator })
    }

    fn advance(&self, state: &mut SimulationState, scratch: &mut Vec<Vec<f64>>) {
        let dt = self.dt;
        let explicit = (1.0 - self.theta) * dt;
        let mut numer = 0.0;
        for (b, sys) in self.branches.iter().enumerate() {
            let w = &state.fields[b];
            let p = &mut scratch[b];
            p.resize(sys.m, 0.0);
            for j in 1..=sys.m {
                let wj = w[j];
                let mut r = wj + dt * wj * (1.0 - wj);
                if explicit != 0.0 {
                    r += explicit * sys.apply(w, j);
                }
                p[j - 1] = r;
            }
            sys.solve_in_place(p);
            numer += sys.a * (4.0 * p[0] - p[1]) / (2.0 * sys.h);
        }
        let junction = numer / self.junction_denominator;
        for (b, sys) in self.branches.iter().enumerate() {
            let w = &mut state.fields[b];
            let p = &scratch[b];
            w[0] = junction;
            for j in 1..=sys.m {
                w[j] = flush(p[j - 1] + junction * sys.q[j - 1]);
            }
        }
        state.junction_value = junction;
        state.time += dt;
        state.steps += 1;
    }
}

/// A time stepper with cached factorizations for one grid and step size.
#[derive(Debug, Clone)]
pub struct Simulator {
    network: RiverNetwork,
    grid: GridSpec,
    scheme: Scheme,
    main: Factorized,
    startup: Option<Factorized>,
}

impl Simulator {
    pub fn new(network: &RiverNetwork, grid: &GridSpec, dt: f64, scheme: Scheme) -> Result<Self> {
        grid.validate(network)?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::NonpositiveParameter { name: "dt".into(), value: dt });
        }
        if !(0.5..=1.0).contains(&scheme.theta) {
            return Err(Error::InvalidInput(format!("theta = {} outside [0.5, 1]", scheme.theta)));
        }
        let main = Factorized::new(network, grid, dt, scheme.theta)?;
        let startup = if scheme.startup_steps > 0 && scheme.theta != 1.0 {
            Some(Factorized::new(network, grid, 0.5 * dt, 1.0)?)
        } else {
            None
        };
        Ok(Self { network: network.clone(), grid: grid.clone(), scheme, main, startup })
    }

    pub fn dt(&self) -> f64 {
        self.main.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Advances `state` by one step of size `dt`.
    pub fn step(&self, state: &mut SimulationState) -> Result<()> {
        let mut scratch = vec![Vec::new(); self.network.len()];
        self.step_with(state, &mut scratch)
    }

    fn step_with(&self, state: &mut SimulationState, scratch: &mut Vec<Vec<f64>>) -> Result<()> {
        if state.grid != self.grid || state.network != self.network {
            return Err(Error::GridMismatch);
        }
        let (t0, steps) = (state.time, state.steps);
        match &self.startup {
            Some(be) if state.steps < self.scheme.startup_steps => {
                be.advance(state, scratch);
                be.advance(state, scratch);
                state.steps = steps + 1;
            }
            _ => self.main.advance(state, scratch),
        }
        state.time = t0 + self.main.dt;
        check_band(state)
    }
}

fn check_band(state: &SimulationState) -> Result<()> {
    let hi = state.bound + 1e-8;
    for w in &state.fields {
        for &v in w {
            if !(v >= -1e-8 && v <= hi) {
                return Err(Error::StabilityViolation { time: state.time, value: v });
            }
        }
    }
    Ok(())
}

/// One Crank-Nicolson step of size `dt` from `state`.
pub fn step(state: &SimulationState, dt: f64) -> Result<SimulationState> {
    let sim = Simulator::new(&state.network, &state.grid, dt, Scheme { theta: 0.5, startup_steps: 0 })?;
    let mut next = state.clone();
    sim.step(&mut next)?;
    Ok(next)
}

/// A point observer on one branch at physical position `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub branch: usize,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationPolicy {
    /// Stop the run at the first detection.
    Abort,
    /// Record the detection and keep going.
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observers {
    /// Time between recorded samples.
    pub sample_every: f64,
    pub probes: Vec<Probe>,
    /// Record the Lyapunov functional (two-branch networks only).
    pub lyapunov: bool,
    /// Also evaluate the Lyapunov functional after every step and keep the
    /// largest one-step increase.
    pub lyapunov_every_step: bool,
    pub contamination: ContaminationPolicy,
}

impl Default for Observers {
    fn default() -> Self {
        Self {
            sample_every: 0.5,
            probes: vec![],
            lyapunov: false,
            lyapunov_every_step: false,
            contamination: ContaminationPolicy::Abort,
        }
    }
}

/// The far-field region of a branch started changing: a front reached the
/// artificial boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationWarning {
    pub time: f64,
    pub branch: usize,
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub junction: Vec<f64>,
    /// `sup_norms[b][k]`: windowed sup of branch `b` at sample `k`.
    pub sup_norms: Vec<Vec<f64>>,
    pub probes: Vec<Probe>,
    /// `probe_values[p][k]`.
    pub probe_values: Vec<Vec<f64>>,
    pub lyapunov: Option<Vec<f64>>,
    /// Largest one-step increase of the Lyapunov functional, when monitored.
    pub max_lyapunov_increase: Option<f64>,
    pub contamination: Option<ContaminationWarning>,
    /// Whether the run stopped before the requested final time.
    pub aborted: bool,
}

impl TimeSeries {
    pub fn final_junction(&self) -> f64 {
        *self.junction.last().unwrap()
    }
}

struct FarWatch {
    start: Vec<usize>,
    reference: Vec<Vec<f64>>,
}

impl FarWatch {
    fn new(state: &SimulationState) -> Self {
        let mut start = vec![];
        let mut reference = vec![];
        for w in &state.fields {
            let n = w.len();
            let s = n - (n / 10).max(1);
            start.push(s);
            reference.push(w[s..].to_vec());
        }
        Self { start, reference }
    }

    fn check(&self, state: &SimulationState) -> Option<ContaminationWarning> {
        for (b, w) in state.fields.iter().enumerate() {
            let change = w[self.start[b]..]
                .iter()
                .zip(&self.reference[b])
                .map(|(v, r)| (v - r).abs() / r.abs().max(1.0))
                .fold(0.0, f64::max);
            if change > 1e-6 {
                return Some(ContaminationWarning { time: state.time, branch: b, change });
            }
        }
        None
    }
}

impl Simulator {
    /// Steps `state` to time `t_final`, sampling observers every
    /// `observers.sample_every` (and at both ends).
    pub fn run(&self, state: &mut SimulationState, t_final: f64, observers: &Observers) -> Result<TimeSeries> {
        if !(t_final > state.time) {
            return Err(Error::InvalidInput(format!("final time {t_final} must exceed current time {}", state.time)));
        }
        let want_v = observers.lyapunov || observers.lyapunov_every_step;
        if want_v && state.network.topology() != Topology::TwoBranch {
            return Err(Error::UnsupportedTopology("the Lyapunov functional is defined for two branches".into()));
        }
        for p in &observers.probes {
            if p.branch >= state.network.len() || p.x.abs() > state.grid.lengths[p.branch] {
                return Err(Error::InvalidInput(format!("probe {p:?} outside the grid")));
            }
        }
        let mut series = TimeSeries {
            times: vec![],
            junction: vec![],
            sup_norms: vec![vec![]; state.network.len()],
            probes: observers.probes.clone(),
            probe_values: vec![vec![]; observers.probes.len()],
            lyapunov: observers.lyapunov.then(Vec::new),
            max_lyapunov_increase: observers.lyapunov_every_step.then_some(f64::NEG_INFINITY),
            contamination: None,
            aborted: false,
        };
        let record = |series: &mut TimeSeries, state: &SimulationState| -> Result<()> {
            series.times.push(state.time);
            series.junction.push(state.junction_value);
            for b in 0..state.network.len() {
                series.sup_norms[b].push(state.windowed_sup(b));
            }
            for (k, p) in series.probes.clone().iter().enumerate() {
                series.probe_values[k].push(state.value_at(p.branch, p.x));
            }
            if let Some(v) = series.lyapunov.as_mut() {
                v.push(lyapunov_value(state)?);
            }
            Ok(())
        };
        record(&mut series, state)?;
        let watch = FarWatch::new(state);
        let dt = self.dt();
        let n_steps = ((t_final - state.time) / dt - 1e-9).ceil() as usize;
        let every = ((observers.sample_every / dt).round() as usize).max(1);
        let mut scratch = vec![Vec::new(); state.network.len()];
        let mut v_prev = if observers.lyapunov_every_step { lyapunov_value(state)? } else { 0.0 };
        for k in 1..=n_steps {
            self.step_with(state, &mut scratch)?;
            if observers.lyapunov_every_step {
                let v = lyapunov_value(state)?;
                let inc = series.max_lyapunov_increase.as_mut().unwrap();
                *inc = inc.max(v - v_prev);
                v_prev = v;
            }
            let sample = k % every == 0 || k == n_steps;
            if sample || k % 10 == 0 {
                if series.contamination.is_none() {
                    if let Some(w) = watch.check(state) {
                        log::warn!("far field of branch {} changed by {:.3e} at t = {:.3}", w.branch, w.change, w.time);
                        series.contamination = Some(w);
                        if observers.contamination == ContaminationPolicy::Abort {
                            record(&mut series, state)?;
                            series.aborted = k < n_steps;
                            return Ok(series);
                        }
                    }
                }
            }
            if sample {
                record(&mut series, state)?;
            }
        }
        Ok(series)
    }
}

/// Convenience wrapper: default scheme, `dt`, run to `t_final`.
pub fn run(state: &mut SimulationState, dt: f64, t_final: f64, observers: &Observers) -> Result<TimeSeries> {
    let sim = Simulator::new(&state.network, &state.grid, dt, Scheme::default())?;
    sim.run(state, t_final, observers)
}

/// `F(v) = v^2/2 - v^3/3`.
pub fn lyapunov_potential(v: f64) -> f64 {
    v * v / 2.0 - v * v * v / 3.0
}

/// Composite-trapezoid value of
/// `V = sum_b a_b int e^{-beta_b x} [ w_x^2 / 2 - F(w) ] dx`
/// over the truncated two-branch grid. The weight grows upstream, so each
/// term is formed in log space.
pub fn lyapunov_value(state: &SimulationState) -> Result<f64> {
    if state.network.topology() != Topology::TwoBranch {
        return Err(Error::UnsupportedTopology("the Lyapunov functional is defined for two branches".into()));
    }
    let mut total = 0.0;
    for b in 0..state.network.len() {
        let spec = state.network.branch(b);
        let v = if spec.is_upper() { -spec.beta } else { spec.beta };
        let w = &state.fields[b];
        let h = state.grid.spacing(b);
        let n = w.len();
        let mut sum = 0.0;
        for j in 0..n {
            let d = if j == 0 {
                (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * w[j] - 4.0 * w[j - 1] + w[j - 2]) / (2.0 * h)
            } else {
                (w[j + 1] - w[j - 1]) / (2.0 * h)
            };
            let g = 0.5 * d * d - lyapunov_potential(w[j]);
            if g == 0.0 {
                continue;
            }
            let term = g.signum() * (g.abs().ln() - v * j as f64 * h).exp();
            let weight = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            sum += weight * term;
        }
        total += spec.a * h * sum;
    }
    if !total.is_finite() {
        return Err(Error::InvalidInput("Lyapunov weight overflows on this grid (shorten the upper branch)".into()));
    }
    Ok(total)
}

/// `true` iff every value of `a` is at most the matching value of `b` plus `1e-10`.
pub fn check_ordering(a: &SimulationState, b: &SimulationState) -> Result<bool> {
    if a.grid != b.grid || a.network != b.network {
        return Err(Error::GridMismatch);
    }
    Ok(a.fields.iter().flatten().zip(b.fields.iter().flatten()).all(|(x, y)| *x <= *y + 1e-10))
}

/// Largest amount by which `a` exceeds `b`.
pub fn ordering_violation(a: &SimulationState, b: &SimulationState) -> Result<f64> {
    if a.grid != b.grid || a.network != b.network {
        return Err(Error::GridMismatch);
    }
    Ok(a.fields.iter().flatten().zip(b.fields.iter().flatten()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationComparison {
    pub shorter: f64,
    pub longer: f64,
    /// Largest `w_shorter - w_longer` on shared nodes (should be <= 1e-10).
    pub max_violation: f64,
    /// Largest `|w_shorter - w_longer|` on shared nodes.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub lengths: Vec<f64>,
    pub t_final: f64,
    pub comparisons: Vec<TruncationComparison>,
    /// Monotone nondecrease in the truncation length at every shared node.
    pub monotone: bool,
    /// Gap between the two largest lengths.
    pub cauchy_gap: Option<f64>,
}

/// Runs the same initial data on Dirichlet truncations of increasing length
/// (same spacing `h`) and compares them on shared nodes.
pub fn truncation_convergence(
    network: &RiverNetwork,
    init: &dyn Fn(usize, f64) -> f64,
    lengths: &[f64],
    h: f64,
    dt: f64,
    t_final: f64,
) -> Result<TruncationReport> {
    if lengths.is_empty() || lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("lengths must be a non-empty increasing list".into()));
    }
    let mut finals = Vec::new();
    for &l in lengths {
        let grid = GridSpec::with_spacing(network, l, h, FarBoundary::Dirichlet)?;
        let mut state = discretize(network, &grid, init)?;
        let sim = Simulator::new(network, &grid, dt, Scheme::default())?;
        sim.run(&mut state, t_final, &Observers { sample_every: t_final, contamination: ContaminationPolicy::Warn, ..Default::default() })?;
        finals.push(state);
    }
    let mut comparisons = Vec::new();
    for w in finals.windows(2) {
        let (s, l) = (&w[0], &w[1]);
        let mut viol = f64::NEG_INFINITY;
        let mut gap = 0.0_f64;
        for b in 0..network.len() {
            if (s.grid.spacing(b) - l.grid.spacing(b)).abs() > 1e-12 * s.grid.spacing(b) {
                return Err(Error::GridMismatch);
            }
            for (x, y) in s.fields[b].iter().zip(&l.fields[b]) {
                viol = viol.max(x - y);
                gap = gap.max((x - y).abs());
            }
        }
        comparisons.push(TruncationComparison { shorter: s.grid.lengths[0], longer: l.grid.lengths[0], max_violation: viol, gap });
    }
    let monotone = comparisons.iter().all(|c| c.max_violation <= 1e-10);
    let cauchy_gap = comparisons.last().map(|c| c.gap);
    Ok(TruncationReport { lengths: lengths.to_vec(), t_final, comparisons, monotone, cauchy_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tb(bu: f64, bl: f64) -> RiverNetwork {
        RiverNetwork::two_branch(bu, bl).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let net = tb(3.0, 1.0);
        assert!(GridSpec::uniform(&net, 49.0, 2001, FarBoundary::Neumann).is_err());
        assert!(GridSpec::uniform(&net, 50.0, 1000, FarBoundary::Neumann).is_err());
        assert!(GridSpec::uniform(&net, 100.0, 1001, FarBoundary::Neumann).is_err());
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        assert_eq!(g.nodes, vec![1001, 1001]);
        assert!((g.spacing(0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn bump_discretization() {
        let net = tb(3.0, 1.0);
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        let s = discretize(&net, &g, &canonical_bump).unwrap();
        assert_eq!(s.junction_value, 1.0);
        for b in 0..2 {
            for (j, &v) in s.fields[b].iter().enumerate() {
                let x = g.position(&net, b, j);
                if x.abs() >= 1.0 {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn incompatible_and_negative_data() {
        let net = tb(3.0, 1.0);
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        let bad = |b: usize, _x: f64| if b == 0 { 1.0 } else { 0.5 };
        assert!(matches!(discretize(&net, &g, &bad), Err(Error::IncompatibleJunctionData(_))));
        let neg = |_b: usize, x: f64| if x > 3.0 { -0.1 } else { 0.0 };
        assert!(matches!(discretize(&net, &g, &neg), Err(Error::NegativeInitialData { .. })));
    }

    #[test]
    fn equilibria_are_preserved() {
        let net = tb(1.5, 1.0);
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        for c in [0.0, 1.0] {
            let s = discretize(&net, &g, &|_, _| c).unwrap();
            let next = step(&s, 0.01).unwrap();
            assert!(next.distance(&s).unwrap() < 1e-13);
            assert!((next.junction_value - c).abs() < 1e-13);
        }
    }

    #[test]
    fn junction_is_shared_and_kirchhoff_holds() {
        let net = RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap();
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        let mut s = discretize(&net, &g, &canonical_bump).unwrap();
        let sim = Simulator::new(&net, &g, 0.01, Scheme::default()).unwrap();
        for _ in 0..50 {
            sim.step(&mut s).unwrap();
            for b in 0..3 {
                assert_eq!(s.fields[b][0], s.junction_value);
            }
            assert!(s.kirchhoff_residual().abs() < 1e-12 * 400.0);
        }
    }

    #[test]
    fn lyapunov_of_constants() {
        let net = tb(3.0, 1.0);
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        let zero = discretize(&net, &g, &|_, _| 0.0).unwrap();
        assert_eq!(lyapunov_value(&zero).unwrap(), 0.0);
        let one = discretize(&net, &g, &|_, _| 1.0).unwrap();
        let v = lyapunov_value(&one).unwrap();
        // Trapezoid of -F(1) a e^{-beta x} on both truncated branches.
        let trap = |beta_signed: f64, a: f64| {
            let h = 0.05;
            let mut s = 0.0;
            for j in 0..1001 {
                let wgt = if j == 0 || j == 1000 { 0.5 } else { 1.0 };
                s += wgt * (-beta_signed * j as f64 * h).exp();
            }
            -a * h * s / 6.0
        };
        let want = trap(1.0, 3.0) + trap(-3.0, 1.0);
        assert!(((v - want) / want).abs() < 1e-12);
        assert!(v.is_finite() && v < 0.0);
    }

    #[test]
    fn ordering_checks() {
        let net = tb(3.0, 1.0);
        let g = GridSpec::with_spacing(&net, 50.0, 0.05, FarBoundary::Neumann).unwrap();
        let zero = discretize(&net, &g, &|_, _| 0.0).unwrap();
        let bump = discretize(&net, &g, &canonical_bump).unwrap();
        assert!(check_ordering(&zero, &bump).unwrap());
        assert!(check_ordering(&bump, &bump).unwrap());
        assert!(!check_ordering(&bump, &zero).unwrap());
        let g2 = GridSpec::with_spacing(&net, 60.0, 0.05, FarBoundary::Neumann).unwrap();
        let other = discretize(&net, &g2, &canonical_bump).unwrap();
        assert_eq!(check_ordering(&bump, &other), Err(Error::GridMismatch));
    }

    #[test]
    fn truncation_input_contract() {
        let net = tb(1.5, 1.0);
        assert!(truncation_convergence(&net, &canonical_bump, &[100.0, 50.0], 0.05, 0.01, 1.0).is_err());
        let r = truncation_convergence(&net, &canonical_bump, &[50.0], 0.05, 0.01, 0.5).unwrap();
        assert!(r.comparisons.is_empty());
        assert!(r.cauchy_gap.is_none());
    }
}
