//! CSV artifacts: header row, `.` decimal point, 17 significant digits.

use std::path::Path;

use riverkpp::classifier::{Family, SweepRow};
use riverkpp::phase_plane::{PsiCurve, TrajectoryCurve};
use riverkpp::simulator::{SimulationState, TimeSeries};
use riverkpp::stationary::StationaryProfile;

/// Lossless text form of a double.
pub fn real(v: f64) -> String {
    // Adding zero turns -0 into 0.
    format!("{:.16e}", v + 0.0)
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

fn writer(out: &Path, name: &str) -> anyhow::Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(out.join(name))?)
}

pub fn write_trajectory(out: &Path, traj: &TrajectoryCurve) -> anyhow::Result<String> {
    let name = "trajectory.csv";
    let mut w = writer(out, name)?;
    w.write_record(["x", "phi", "psi"])?;
    for s in &traj.samples {
        w.write_record([real(s.x), real(s.phi), real(s.psi)])?;
    }
    w.flush()?;
    Ok(name.into())
}

pub fn write_psi_curve(out: &Path, curve: &PsiCurve) -> anyhow::Result<String> {
    let name = "psi_curve.csv";
    let mut w = writer(out, name)?;
    w.write_record(["phi", "psi"])?;
    for (p, v) in curve.grid.iter().zip(&curve.values) {
        w.write_record([real(*p), real(*v)])?;
    }
    w.flush()?;
    Ok(name.into())
}

pub fn write_profile(out: &Path, profile: &StationaryProfile) -> anyhow::Result<String> {
    let name = "profile.csv";
    let mut w = writer(out, name)?;
    w.write_record(["branch", "x", "value"])?;
    for b in &profile.branches {
        for (x, v) in b.x.iter().zip(&b.value) {
            w.write_record([b.branch.to_string(), real(*x), real(*v)])?;
        }
    }
    w.flush()?;
    Ok(name.into())
}

pub fn write_state(out: &Path, state: &SimulationState) -> anyhow::Result<String> {
    let name = "final_profile.csv";
    let mut w = writer(out, name)?;
    w.write_record(["branch", "x", "value"])?;
    for b in 0..state.network.len() {
        for (x, v) in state.branch_positions(b).iter().zip(&state.fields[b]) {
            w.write_record([b.to_string(), real(*x), real(*v)])?;
        }
    }
    w.flush()?;
    Ok(name.into())
}

pub fn write_time_series(out: &Path, series: &TimeSeries) -> anyhow::Result<String> {
    let name = "timeseries.csv";
    let mut w = writer(out, name)?;
    let mut header = vec!["t".to_string(), "junction".to_string()];
    header.extend((0..series.sup_norms.len()).map(|b| format!("windowed_sup_{b}")));
    header.extend(series.probes.iter().map(|p| format!("probe_{}_{}", p.branch, real(p.x))));
    if series.lyapunov.is_some() {
        header.push("lyapunov".into());
    }
    w.write_record(&header)?;
    for k in 0..series.times.len() {
        let mut row = vec![real(series.times[k]), real(series.junction[k])];
        row.extend(series.sup_norms.iter().map(|s| real(s[k])));
        row.extend(series.probe_values.iter().map(|s| real(s[k])));
        if let Some(v) = &series.lyapunov {
            row.push(real(v[k]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(name.into())
}

pub fn write_sweep(out: &Path, family: Family, rows: &[SweepRow]) -> anyhow::Result<String> {
    let name = "sweep.csv";
    let mut w = writer(out, name)?;
    let mut header: Vec<String> = family.parameter_names().iter().map(|s| s.to_string()).collect();
    header.extend(
        ["regime", "predicted", "predicted_alpha", "predicted_type", "observed", "observed_alpha", "observed_type", "final_junction", "error"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.betas.iter().map(|b| real(*b)).collect();
        rec.push(r.regime.map(|g| g.to_string()).unwrap_or_default());
        for p in [r.predicted, r.observed] {
            rec.push(p.map(|p| p.outcome.to_string()).unwrap_or_default());
            rec.push(opt_real(p.and_then(|p| p.alpha)));
            rec.push(p.and_then(|p| p.solution_type).map(|t| t.to_string()).unwrap_or_default());
        }
        rec.push(opt_real(r.final_junction));
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(name.into())
}
