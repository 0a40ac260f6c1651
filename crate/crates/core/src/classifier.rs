//! Long-time outcome of the evolution problem: washout, persistence at
//! carrying capacity, or persistence below it at a stationary state.
//!
//! The prediction depends only on how each branch speed compares with the
//! critical speed 2; the stationary solver supplies the junction value in
//! the below-capacity case. Observed outcomes are read off simulated time
//! series.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::RiverNetwork;
use crate::simulator::{
    canonical_bump, discretize, ContaminationPolicy, ContaminationWarning, FarBoundary, GridSpec, Observers, Probe,
    Scheme, Simulator, TimeSeries,
};
use crate::stationary::{classify_case, compute_thresholds, CaseTag, Regime, SolutionType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Washout,
    CarryingCapacity,
    BelowCapacity,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Washout => "washout",
            Outcome::CarryingCapacity => "carrying-capacity",
            Outcome::BelowCapacity => "below-capacity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistenceState {
    pub outcome: Outcome,
    /// Junction value, present iff below capacity.
    pub alpha: Option<f64>,
    /// Present iff below capacity.
    pub solution_type: Option<SolutionType>,
}

impl PersistenceState {
    pub fn washout() -> Self {
        Self { outcome: Outcome::Washout, alpha: None, solution_type: None }
    }

    pub fn carrying_capacity() -> Self {
        Self { outcome: Outcome::CarryingCapacity, alpha: None, solution_type: None }
    }

    pub fn below(alpha: f64, solution_type: SolutionType) -> Self {
        Self { outcome: Outcome::BelowCapacity, alpha: Some(alpha), solution_type: Some(solution_type) }
    }
}

impl fmt::Display for PersistenceState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.alpha, self.solution_type) {
            (Some(a), Some(t)) => write!(f, "{} (alpha = {a:.6}, {t})", self.outcome),
            _ => write!(f, "{}", self.outcome),
        }
    }
}

/// Outcome predicted from the branch speeds alone.
pub fn classify_parameters(network: &RiverNetwork) -> Result<PersistenceState> {
    let case = classify_case(network)?;
    predicted_from_case(network, &case)
}

fn predicted_from_case(network: &RiverNetwork, case: &CaseTag) -> Result<PersistenceState> {
    Ok(match case.regime {
        Regime::TbI | Regime::UulI | Regime::UllI => PersistenceState::carrying_capacity(),
        Regime::TbII | Regime::UulII | Regime::UllII => PersistenceState::washout(),
        Regime::TbIII | Regime::UulIII | Regime::UulIV | Regime::UllIII => {
            let report = compute_thresholds(network)?;
            let t = report.primary().expect("below-capacity regimes have a primary threshold");
            PersistenceState::below(t.value, t.solution_type)
        }
    })
}

/// Value above which an upper-branch probe signals `phi(-inf) = 1`.
pub const TYPE01_PROBE_LEVEL: f64 = 0.9;

/// Junction drift over the trailing 20% of the series (max minus min).
pub fn trailing_drift(series: &TimeSeries) -> f64 {
    let t_end = *series.times.last().unwrap();
    let t_start = series.times[0] + 0.8 * (t_end - series.times[0]);
    let tail = series.times.iter().zip(&series.junction).filter(|(t, _)| **t >= t_start).map(|(_, j)| *j);
    let (lo, hi) = tail.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| (lo.min(j), hi.max(j)));
    hi - lo
}

/// Reads the outcome off a time series. The junction value must have
/// settled (drift below `tol / 10` over the trailing 20% of the run).
/// Probes at `x < 0` are upper-branch probes; one above
/// [`TYPE01_PROBE_LEVEL`] at the final time marks a type-01 state.
pub fn classify_simulation(series: &TimeSeries, tol: f64) -> Result<PersistenceState> {
    if series.times.is_empty() {
        return Err(Error::InvalidInput("empty time series".into()));
    }
    let drift = trailing_drift(series);
    if drift >= tol / 10.0 {
        return Err(Error::NotSettled { drift });
    }
    let j = series.final_junction();
    if j < tol {
        return Ok(PersistenceState::washout());
    }
    if j > 1.0 - tol {
        return Ok(PersistenceState::carrying_capacity());
    }
    let rising = series
        .probes
        .iter()
        .zip(&series.probe_values)
        .any(|(p, v)| p.x < 0.0 && *v.last().unwrap() > TYPE01_PROBE_LEVEL);
    Ok(PersistenceState::below(j, if rising { SolutionType::Type01 } else { SolutionType::Type00 }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub length: f64,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub far_bc: FarBoundary,
    /// Outcome tolerance (and junction-gap tolerance).
    pub tol: f64,
    pub sample_every: f64,
    pub contamination: ContaminationPolicy,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            length: 500.0,
            h: 0.05,
            dt: 0.005,
            t_final: 200.0,
            far_bc: FarBoundary::Neumann,
            tol: 1e-2,
            sample_every: 0.5,
            contamination: ContaminationPolicy::Warn,
        }
    }
}

/// Canonical run: bump initial data, probes at `x = -L/2` on every upper
/// branch.
pub fn simulate_canonical(network: &RiverNetwork, opts: &SimOptions) -> Result<TimeSeries> {
    let grid = GridSpec::with_spacing(network, opts.length, opts.h, opts.far_bc)?;
    let mut state = discretize(network, &grid, &canonical_bump)?;
    let sim = Simulator::new(network, &grid, opts.dt, Scheme::default())?;
    let probes = network.upper_ids().into_iter().map(|b| Probe { branch: b, x: -0.5 * opts.length }).collect();
    let observers = Observers { sample_every: opts.sample_every, probes, contamination: opts.contamination, ..Default::default() };
    sim.run(&mut state, opts.t_final, &observers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: CaseTag,
    pub predicted: PersistenceState,
    pub observed: PersistenceState,
    pub junction_gap: Option<f64>,
    pub tolerance: f64,
    pub t_final: f64,
    /// Largest value on each branch over the truncated window at the final
    /// time (a windowed sup, not a sup over the half-line).
    pub windowed_sup: Vec<f64>,
    pub contamination: Option<ContaminationWarning>,
    pub pass: bool,
}

/// Compares prediction and observation.
pub fn compare(case: CaseTag, predicted: PersistenceState, observed: PersistenceState, series: &TimeSeries, opts: &SimOptions) -> VerificationReport {
    let junction_gap = match (predicted.alpha, observed.alpha) {
        (Some(p), Some(o)) => Some((p - o).abs()),
        _ => None,
    };
    let pass = predicted.outcome == observed.outcome
        && predicted.solution_type == observed.solution_type
        && junction_gap.map_or(true, |g| g < opts.tol);
    VerificationReport {
        case,
        predicted,
        observed,
        junction_gap,
        tolerance: opts.tol,
        t_final: *series.times.last().unwrap(),
        windowed_sup: series.sup_norms.iter().map(|s| *s.last().unwrap()).collect(),
        contamination: series.contamination.clone(),
        pass,
    }
}

/// Predicts, simulates from the canonical bump, classifies, compares.
pub fn verify_trichotomy(network: &RiverNetwork, opts: &SimOptions) -> Result<VerificationReport> {
    let case = classify_case(network)?;
    let predicted = predicted_from_case(network, &case)?;
    let series = simulate_canonical(network, opts)?;
    let observed = classify_simulation(&series, opts.tol)?;
    Ok(compare(case, predicted, observed, &series, opts))
}

/// Three-branch and two-branch network families for parameter sweeps, built
/// with the conservation-consistent cross sections of [`RiverNetwork`]'s
/// helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Tb,
    Uul,
    Ull,
}

impl Family {
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            Family::Tb => &["beta_u", "beta_l"],
            Family::Uul => &["beta_u1", "beta_u2", "beta_l"],
            Family::Ull => &["beta_u", "beta_l1", "beta_l2"],
        }
    }

    pub fn build(self, betas: &[f64]) -> Result<RiverNetwork> {
        match (self, betas) {
            (Family::Tb, [u, l]) => RiverNetwork::two_branch(*u, *l),
            (Family::Uul, [u1, u2, l]) => RiverNetwork::two_up_one_down(*u1, *u2, *l),
            (Family::Ull, [u, l1, l2]) => RiverNetwork::one_up_two_down(*u, *l1, *l2),
            _ => Err(Error::InvalidInput(format!("{self:?} takes {} speeds", self.parameter_names().len()))),
        }
    }
}

/// A rectangular grid of branch speeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: Family,
    /// One list of values per parameter, in [`Family::parameter_names`] order.
    pub axes: Vec<Vec<f64>>,
}

impl SweepSpec {
    /// Parses `family:name=start:stop:count,name=value,...`, e.g.
    /// `tb:beta_u=1.5:3:7,beta_l=1`. Every parameter of the family must be
    /// given.
    pub fn parse(spec: &str) -> Result<Self> {
        let bad = |m: String| Error::InvalidInput(format!("sweep spec '{spec}': {m}"));
        let (fam, rest) = spec.split_once(':').ok_or_else(|| bad("expected '<family>:<axes>'".into()))?;
        let family = match fam.trim().to_ascii_lowercase().as_str() {
            "tb" => Family::Tb,
            "uul" => Family::Uul,
            "ull" => Family::Ull,
            other => return Err(bad(format!("unknown family '{other}' (tb, uul, ull)"))),
        };
        let names = family.parameter_names();
        let mut axes: Vec<Option<Vec<f64>>> = vec![None; names.len()];
        for item in rest.split(',') {
            let (name, range) = item.split_once('=').ok_or_else(|| bad(format!("expected name=range in '{item}'")))?;
            let k = names.iter().position(|n| *n == name.trim()).ok_or_else(|| bad(format!("unknown parameter '{name}'")))?;
            let parts: Vec<&str> = range.split(':').collect();
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("'{s}': {e}")));
            let values = match parts.as_slice() {
                [v] => vec![num(v)?],
                [a, b, n] => {
                    let (a, b) = (num(a)?, num(b)?);
                    let n: usize = n.trim().parse().map_err(|e| bad(format!("count '{n}': {e}")))?;
                    if n == 0 {
                        return Err(bad("count must be positive".into()));
                    }
                    if n == 1 {
                        vec![a]
                    } else {
                        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                    }
                }
                _ => return Err(bad(format!("range '{range}' is neither a value nor start:stop:count"))),
            };
            axes[k] = Some(values);
        }
        let axes = axes
            .into_iter()
            .zip(names)
            .map(|(a, n)| a.ok_or_else(|| bad(format!("missing parameter '{n}'"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { family, axes })
    }

    /// Cartesian product in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![]];
        for axis in &self.axes {
            out = out.into_iter().flat_map(|p| axis.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub betas: Vec<f64>,
    pub regime: Option<Regime>,
    pub predicted: Option<PersistenceState>,
    pub observed: Option<PersistenceState>,
    /// Final junction value of the simulation, when one was run.
    pub final_junction: Option<f64>,
    pub error: Option<String>,
}

/// Evaluates one sweep point; simulation only when `sim` is given. Domain
/// errors are recorded in the row instead of aborting the sweep.
pub fn sweep_point(family: Family, betas: &[f64], sim: Option<&SimOptions>) -> SweepRow {
    let mut row = SweepRow { betas: betas.to_vec(), regime: None, predicted: None, observed: None, final_junction: None, error: None };
    let run = |row: &mut SweepRow| -> Result<()> {
        let net = family.build(betas)?;
        let case = classify_case(&net)?;
        row.regime = Some(case.regime);
        row.predicted = Some(predicted_from_case(&net, &case)?);
        if let Some(opts) = sim {
            let series = simulate_canonical(&net, opts)?;
            row.final_junction = Some(series.final_junction());
            row.observed = Some(classify_simulation(&series, opts.tol)?);
        }
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(junction: Vec<f64>) -> TimeSeries {
        let n = junction.len();
        TimeSeries {
            times: (0..n).map(|i| i as f64).collect(),
            junction,
            sup_norms: vec![],
            probes: vec![Probe { branch: 0, x: -100.0 }],
            probe_values: vec![vec![0.95; n]],
            lyapunov: None,
            max_lyapunov_increase: None,
            contamination: None,
            aborted: false,
        }
    }

    #[test]
    fn parameter_predictions() {
        let tb = RiverNetwork::two_branch(1.5, 3.0).unwrap();
        assert_eq!(classify_parameters(&tb).unwrap(), PersistenceState::carrying_capacity());
        let uul = RiverNetwork::two_up_one_down(2.0, 2.0, 2.0).unwrap();
        assert_eq!(classify_parameters(&uul).unwrap(), PersistenceState::washout());
        let uul = RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap();
        let p = classify_parameters(&uul).unwrap();
        assert_eq!(p.outcome, Outcome::BelowCapacity);
        assert_eq!(p.solution_type, Some(SolutionType::Type01));
    }

    #[test]
    fn series_classification() {
        assert_eq!(classify_simulation(&series(vec![0.0; 50]), 1e-2).unwrap(), PersistenceState::washout());
        assert_eq!(classify_simulation(&series(vec![0.999; 50]), 1e-2).unwrap(), PersistenceState::carrying_capacity());
        let p = classify_simulation(&series(vec![0.4; 50]), 1e-2).unwrap();
        assert_eq!(p, PersistenceState::below(0.4, SolutionType::Type01));
        let drifting: Vec<f64> = (0..50).map(|i| 0.3 + 0.01 * i as f64).collect();
        assert!(matches!(classify_simulation(&series(drifting), 1e-2), Err(Error::NotSettled { .. })));
    }

    #[test]
    fn sweep_spec_parsing() {
        let s = SweepSpec::parse("tb:beta_u=1:3:5,beta_l=1").unwrap();
        assert_eq!(s.axes, vec![vec![1.0, 1.5, 2.0, 2.5, 3.0], vec![1.0]]);
        assert_eq!(s.points().len(), 5);
        let s = SweepSpec::parse("uul:beta_u1=2:3:2,beta_u2=1:2:2,beta_l=1").unwrap();
        assert_eq!(s.points(), vec![vec![2.0, 1.0, 1.0], vec![2.0, 2.0, 1.0], vec![3.0, 1.0, 1.0], vec![3.0, 2.0, 1.0]]);
        assert!(SweepSpec::parse("tb:beta_u=1").is_err());
        assert!(SweepSpec::parse("star:beta_u=1").is_err());
        assert!(SweepSpec::parse("tb:beta_u=1:2,beta_l=1").is_err());
    }

    #[test]
    fn sweep_rows_record_errors() {
        let row = sweep_point(Family::Tb, &[0.0, 1.0], None);
        assert!(row.error.is_some());
        let row = sweep_point(Family::Tb, &[3.0, 1.0], None);
        assert_eq!(row.regime, Some(Regime::TbIII));
        assert!(row.predicted.unwrap().alpha.unwrap() > 0.0);
    }
}
