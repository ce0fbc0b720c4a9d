//! Invariant time series, drift comparison between a collective run and a
//! baseline run, and CSV output.

use std::io::Write;

use crate::clebsch::{momentum_map, PhasePoint};
use crate::error::{Error, Result};
use crate::integrators::Trajectory;
use crate::lie_algebra::{DualPoint, LieAlgebraSpec};
use crate::linalg;
use crate::poisson::{BracketSign, HamiltonianDef};

/// `(I - I0) / max(|I0|, 1e-14)`
pub fn relative_error(value: f64, initial: f64) -> f64 {
    (value - initial) / initial.abs().max(1e-14)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSeries {
    pub name: String,
    pub initial: f64,
    pub times: Vec<f64>,
    pub relative_error: Vec<f64>,
    /// Set when evaluation left the invariant's domain; the series stops there.
    pub truncated: bool,
}

impl InvariantSeries {
    /// Least-squares slope of the relative error against time.
    pub fn drift_slope(&self) -> f64 {
        linalg::ls_slope(&self.times, &self.relative_error)
    }

    pub fn max_abs_error(&self) -> f64 {
        linalg::max_abs(&self.relative_error)
    }

    pub fn len(&self) -> usize {
        self.relative_error.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relative_error.is_empty()
    }
}

/// Evaluate `eval` along a trajectory. A domain error after the first sample
/// truncates the series (logged, `truncated = true`); at the first sample it is an error.
pub fn invariant_series(
    name: &str,
    times: &[f64],
    states: &[Vec<f64>],
    eval: impl Fn(&[f64]) -> Result<f64>,
) -> Result<InvariantSeries> {
    if states.is_empty() || times.len() != states.len() {
        return Err(Error::InvalidArgument(
            "trajectory must be non-empty with one time per state".into(),
        ));
    }
    let initial = eval(&states[0])?;
    let mut out = InvariantSeries {
        name: name.to_string(),
        initial,
        times: Vec::with_capacity(times.len()),
        relative_error: Vec::with_capacity(times.len()),
        truncated: false,
    };
    for (t, y) in times.iter().zip(states) {
        match eval(y) {
            Ok(v) if v.is_finite() => {
                out.times.push(*t);
                out.relative_error.push(relative_error(v, initial));
            }
            Ok(_) | Err(Error::Domain { .. }) => {
                log::warn!("invariant `{name}` left its domain at t = {t}; series truncated");
                out.truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Energy and Casimirs along a Lie-Poisson trajectory.
pub fn lie_poisson_invariants(ham: &HamiltonianDef, traj: &Trajectory) -> Result<Vec<InvariantSeries>> {
    let mut out = vec![invariant_series(ham.energy.name(), &traj.times, &traj.states, |y| {
        ham.value(&DualPoint::from(y))
    })?];
    for c in &ham.casimirs {
        out.push(invariant_series(c.name(), &traj.times, &traj.states, |y| {
            c.value(&DualPoint::from(y))
        })?);
    }
    Ok(out)
}

/// Invariants along an anti-reduced trajectory on `[q; p]`: energy and
/// Casimirs through the momentum map, then `F0 = p.q`, `F1 = kappa(q, q)` and,
/// for semisimple algebras, `F2 = kappa*(p, p)`.
pub fn collective_invariants(
    algebra: &LieAlgebraSpec,
    ham: &HamiltonianDef,
    sign: BracketSign,
    traj: &Trajectory,
) -> Result<Vec<InvariantSeries>> {
    let mu_of = |y: &[f64]| momentum_map(algebra, &PhasePoint::from_flat(y), sign);
    let mut out = vec![invariant_series(ham.energy.name(), &traj.times, &traj.states, |y| {
        ham.value(&mu_of(y))
    })?];
    for c in &ham.casimirs {
        out.push(invariant_series(c.name(), &traj.times, &traj.states, |y| {
            c.value(&mu_of(y))
        })?);
    }
    out.push(invariant_series("F0", &traj.times, &traj.states, |y| {
        Ok(PhasePoint::from_flat(y).f0())
    })?);
    out.push(invariant_series("F1", &traj.times, &traj.states, |y| {
        let z = PhasePoint::from_flat(y);
        Ok(algebra.killing(&z.q, &z.q))
    })?);
    if algebra.is_semisimple() {
        out.push(invariant_series("F2", &traj.times, &traj.states, |y| {
            let z = PhasePoint::from_flat(y);
            algebra.dual_killing(&z.p, &z.p)
        })?);
    }
    Ok(out)
}

/// Map an anti-reduced trajectory to `g*` through the momentum map.
pub fn project_trajectory(algebra: &LieAlgebraSpec, sign: BracketSign, traj: &Trajectory) -> Trajectory {
    Trajectory {
        method: traj.method,
        dt: traj.dt,
        times: traj.times.clone(),
        states: traj
            .states
            .iter()
            .map(|y| momentum_map(algebra, &PhasePoint::from_flat(y), sign).into_vec())
            .collect(),
        newton_iterations: traj.newton_iterations.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftThresholds {
    /// Collective slope must be at most `factor` times the baseline slope...
    pub factor: f64,
    /// ...or below this absolute floor.
    pub absolute_floor: f64,
}

impl Default for DriftThresholds {
    fn default() -> Self {
        Self {
            factor: 0.1,
            absolute_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub collective_slope: f64,
    pub baseline_slope: f64,
    pub collective_max: f64,
    pub baseline_max: f64,
    pub drift_free: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub thresholds: DriftThresholds,
    pub verdicts: Vec<Verdict>,
}

impl ComparisonReport {
    pub fn all_drift_free(&self) -> bool {
        self.verdicts.iter().all(|v| v.drift_free)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0))
}

/// Compare drift slopes of invariants present in both runs (matched by name).
/// Both runs must share the same output grid.
pub fn compare_runs(
    collective: &[InvariantSeries],
    baseline: &[InvariantSeries],
    thresholds: DriftThresholds,
) -> Result<ComparisonReport> {
    let mut verdicts = Vec::new();
    for c in collective {
        let Some(b) = baseline.iter().find(|b| b.name == c.name) else {
            continue;
        };
        let n = c.len().min(b.len());
        if !same_grid(&c.times[..n], &b.times[..n]) || (!c.truncated && !b.truncated && c.len() != b.len()) {
            return Err(Error::InvalidArgument(format!(
                "runs for `{}` use different output grids",
                c.name
            )));
        }
        let cs = c.drift_slope();
        let bs = b.drift_slope();
        verdicts.push(Verdict {
            name: c.name.clone(),
            collective_slope: cs,
            baseline_slope: bs,
            collective_max: c.max_abs_error(),
            baseline_max: b.max_abs_error(),
            drift_free: cs.abs() <= thresholds.factor * bs.abs() || cs.abs() <= thresholds.absolute_floor,
        });
    }
    Ok(ComparisonReport { thresholds, verdicts })
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// `t,<label>...` with one row per stored state.
pub fn write_trajectory_csv(w: &mut impl Write, labels: &[String], traj: &Trajectory) -> std::io::Result<()> {
    write!(w, "t")?;
    for l in labels {
        write!(w, ",{l}")?;
    }
    writeln!(w)?;
    for (t, y) in traj.times.iter().zip(&traj.states) {
        write!(w, "{}", fmt_f(*t))?;
        for v in y {
            write!(w, ",{}", fmt_f(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// `t,<name>_relerr...` on the grid `times`; samples past a truncation are `nan`.
pub fn write_series_csv(w: &mut impl Write, times: &[f64], series: &[InvariantSeries]) -> std::io::Result<()> {
    write!(w, "t")?;
    for s in series {
        write!(w, ",{}_relerr", s.name)?;
    }
    writeln!(w)?;
    for (k, t) in times.iter().enumerate() {
        write!(w, "{}", fmt_f(*t))?;
        for s in series {
            match s.relative_error.get(k) {
                Some(v) => write!(w, ",{}", fmt_f(*v))?,
                None => write!(w, ",nan")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
