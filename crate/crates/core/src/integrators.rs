//! Runge-Kutta integrators: implicit midpoint and 2-stage Gauss-Legendre
//! (solved with simplified Newton), classical explicit RK4, and an empirical
//! order estimator.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Autonomous ODE `y' = f(y)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Wraps a closure as a [`VectorField`].
pub struct FnField<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(y, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Midpoint,
    Gl4,
    Rk4,
}

impl Method {
    pub fn tableau(self) -> ButcherTableau {
        match self {
            Method::Midpoint => ButcherTableau::implicit_midpoint(),
            Method::Gl4 => ButcherTableau::gauss_legendre_4(),
            Method::Rk4 => ButcherTableau::classical_rk4(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Midpoint => "midpoint",
            Method::Gl4 => "gl4",
            Method::Rk4 => "rk4",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "midpoint" | "implicit-midpoint" => Ok(Method::Midpoint),
            "gl4" | "gauss-legendre" | "gauss" => Ok(Method::Gl4),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::InvalidArgument(format!(
                "unknown integrator `{other}` (expected midpoint, gl4 or rk4)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub method: Method,
    pub stages: usize,
    /// Row-major `s x s`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: u32,
}

impl ButcherTableau {
    pub fn implicit_midpoint() -> Self {
        Self {
            method: Method::Midpoint,
            stages: 1,
            a: vec![0.5],
            b: vec![1.0],
            c: vec![0.5],
            order: 2,
        }
    }

    pub fn gauss_legendre_4() -> Self {
        let r = 3.0_f64.sqrt() / 6.0;
        Self {
            method: Method::Gl4,
            stages: 2,
            a: vec![0.25, 0.25 - r, 0.25 + r, 0.25],
            b: vec![0.5, 0.5],
            c: vec![0.5 - r, 0.5 + r],
            order: 4,
        }
    }

    pub fn classical_rk4() -> Self {
        #[rustfmt::skip]
        let a = vec![
            0.0, 0.0, 0.0, 0.0,
            0.5, 0.0, 0.0, 0.0,
            0.0, 0.5, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        Self {
            method: Method::Rk4,
            stages: 4,
            a,
            b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            c: vec![0.0, 0.5, 0.5, 1.0],
            order: 4,
        }
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    pub fn is_explicit(&self) -> bool {
        (0..self.stages).all(|i| (i..self.stages).all(|j| self.a(i, j) == 0.0))
    }

    /// `max |b_i a_ij + b_j a_ji - b_i b_j|`; zero for symplectic methods.
    pub fn symplecticity_defect(&self) -> f64 {
        let s = self.stages;
        let mut m = 0.0_f64;
        for i in 0..s {
            for j in 0..s {
                let d = self.b[i] * self.a(i, j) + self.b[j] * self.a(j, i) - self.b[i] * self.b[j];
                m = m.max(d.abs());
            }
        }
        m
    }

    /// `max(|sum b - 1|, max_i |sum_j a_ij - c_i|)`
    pub fn consistency_defect(&self) -> f64 {
        let mut m = (self.b.iter().sum::<f64>() - 1.0).abs();
        for i in 0..self.stages {
            let row: f64 = (0..self.stages).map(|j| self.a(i, j)).sum();
            m = m.max((row - self.c[i]).abs());
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageSolver {
    /// Simplified Newton with a finite-difference Jacobian frozen at the step start.
    Newton,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Convergence when `max |G(Z)| <= tolerance * (1 + |y|_inf)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub solver: StageSolver,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-13,
            max_iterations: 25,
            solver: StageSolver::Newton,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    pub tableau: ButcherTableau,
    pub dt: f64,
    pub newton: NewtonSettings,
    /// Keep every `sample_stride`-th state.
    pub sample_stride: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, dt: f64) -> Self {
        Self {
            tableau: method.tableau(),
            dt,
            newton: NewtonSettings::default(),
            sample_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.sample_stride = stride;
        self
    }

    pub fn validate(&self, t_end: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "final time must be non-negative, got {t_end}"
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidArgument("sample stride must be at least 1".into()));
        }
        if !(self.newton.tolerance > 0.0) || self.newton.max_iterations == 0 {
            return Err(Error::InvalidArgument("invalid stage-solver settings".into()));
        }
        Ok(())
    }
}

/// Number of steps of size `dt` that fit in `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    ((t_end / dt) * (1.0 + 1e-12)).floor() as usize
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    pub residual: f64,
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "vector field returned a non-finite value".into(),
        ))
    }
}

/// One step of an explicit tableau.
pub fn step_explicit(f: &dyn VectorField, tableau: &ButcherTableau, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    debug_assert!(tableau.is_explicit());
    let n = y.len();
    let s = tableau.stages;
    let mut k = vec![vec![0.0; n]; s];
    let mut stage = vec![0.0; n];
    for i in 0..s {
        stage.copy_from_slice(y);
        for j in 0..i {
            let aij = tableau.a(i, j);
            if aij != 0.0 {
                for (x, kj) in stage.iter_mut().zip(&k[j]) {
                    *x += dt * aij * kj;
                }
            }
        }
        let (_, rest) = k.split_at_mut(i);
        f.eval(&stage, &mut rest[0])?;
        check_finite(&rest[0])?;
    }
    let mut out = y.to_vec();
    for (bi, ki) in tableau.b.iter().zip(&k) {
        for (o, v) in out.iter_mut().zip(ki) {
            *o += dt * bi * v;
        }
    }
    Ok(out)
}

pub fn step_explicit_rk4(f: &dyn VectorField, y: &[f64], dt: f64) -> Result<Vec<f64>> {
    step_explicit(f, &ButcherTableau::classical_rk4(), y, dt)
}

/// Central-difference Jacobian with steps proportional to each component,
/// so that components of very different magnitude are resolved.
fn fd_jacobian(f: &dyn VectorField, y: &[f64]) -> Result<DMatrix<f64>> {
    let n = y.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut w = y.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    let rel = f64::EPSILON.cbrt();
    for j in 0..n {
        let h = rel * y[j].abs().max(1e-8);
        w[j] = y[j] + h;
        f.eval(&w, &mut fp)?;
        w[j] = y[j] - h;
        f.eval(&w, &mut fm)?;
        w[j] = y[j];
        let width = (y[j] + h) - (y[j] - h);
        for i in 0..n {
            jac[(i, j)] = (fp[i] - fm[i]) / width;
        }
    }
    Ok(jac)
}

/// `I - dt (a_ij J_j)` assembled blockwise.
fn newton_matrix(tableau: &ButcherTableau, dt: f64, jacs: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let s = tableau.stages;
    let n = jacs[0].nrows();
    let mut m = DMatrix::<f64>::identity(s * n, s * n);
    for i in 0..s {
        for j in 0..s {
            let aij = tableau.a(i, j);
            if aij != 0.0 {
                let mut block = m.view_mut((i * n, j * n), (n, n));
                block -= jacs[j] * (dt * aij);
            }
        }
    }
    m
}

/// One step of an implicit tableau. `dt` may be negative (backward step).
pub fn step_implicit_rk(
    f: &dyn VectorField,
    y: &[f64],
    tableau: &ButcherTableau,
    dt: f64,
    newton: &NewtonSettings,
) -> Result<(Vec<f64>, StepStats)> {
    let n = y.len();
    let s = tableau.stages;
    let tol = newton.tolerance * (1.0 + linalg::max_abs(y));

    let mut fy = vec![0.0; n];
    f.eval(y, &mut fy)?;
    check_finite(&fy)?;

    // Stage increments Z_i = Y_i - y and stage slopes F_i = f(y + Z_i).
    let mut z = vec![0.0; s * n];
    let mut fz = vec![0.0; s * n];
    let mut g = vec![0.0; s * n];
    let mut stage = vec![0.0; n];
    let mut stats = StepStats::default();

    // Simplified Newton starts with J(y) for every stage. If the iteration
    // contracts slowly, the matrix is rebuilt from J(Y_j) at the current stages.
    let mut lu = match newton.solver {
        StageSolver::Newton => {
            let jac = fd_jacobian(f, y)?;
            let jacs: Vec<&DMatrix<f64>> = vec![&jac; s];
            Some(newton_matrix(tableau, dt, &jacs).lu())
        }
        StageSolver::FixedPoint => None,
    };
    let mut previous = f64::INFINITY;
    loop {
        for i in 0..s {
            for (x, (yi, zi)) in stage.iter_mut().zip(y.iter().zip(&z[i * n..(i + 1) * n])) {
                *x = yi + zi;
            }
            f.eval(&stage, &mut fz[i * n..(i + 1) * n])?;
        }
        check_finite(&fz)?;
        for i in 0..s {
            for r in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += tableau.a(i, j) * fz[j * n + r];
                }
                g[i * n + r] = z[i * n + r] - dt * acc;
            }
        }
        stats.iterations += 1;
        stats.residual = linalg::max_abs(&g);
        if !stats.residual.is_finite() {
            return Err(Error::StageSolve {
                iterations: stats.iterations,
                residual: stats.residual,
            });
        }
        if stats.residual <= tol {
            break;
        }
        if stats.iterations >= newton.max_iterations {
            return Err(Error::StageSolve {
                iterations: stats.iterations,
                residual: stats.residual,
            });
        }
        if lu.is_some() && stats.residual > 0.25 * previous {
            let mut jacs = Vec::with_capacity(s);
            for i in 0..s {
                for (x, (yi, zi)) in stage.iter_mut().zip(y.iter().zip(&z[i * n..(i + 1) * n])) {
                    *x = yi + zi;
                }
                jacs.push(fd_jacobian(f, &stage)?);
            }
            let refs: Vec<&DMatrix<f64>> = jacs.iter().collect();
            lu = Some(newton_matrix(tableau, dt, &refs).lu());
        }
        previous = stats.residual;
        match &lu {
            Some(lu) => {
                let rhs = nalgebra::DVector::from_column_slice(&g);
                let delta = lu.solve(&rhs).ok_or(Error::StageSolve {
                    iterations: stats.iterations,
                    residual: stats.residual,
                })?;
                for (zi, d) in z.iter_mut().zip(delta.iter()) {
                    *zi -= d;
                }
            }
            None => {
                for (zi, gi) in z.iter_mut().zip(&g) {
                    *zi -= gi;
                }
            }
        }
    }

    let mut out = y.to_vec();
    for i in 0..s {
        let bi = tableau.b[i];
        for (o, v) in out.iter_mut().zip(&fz[i * n..(i + 1) * n]) {
            *o += dt * bi * v;
        }
    }
    Ok((out, stats))
}

/// One step with any tableau.
pub fn step(
    f: &dyn VectorField,
    y: &[f64],
    tableau: &ButcherTableau,
    dt: f64,
    newton: &NewtonSettings,
) -> Result<(Vec<f64>, StepStats)> {
    if tableau.is_explicit() {
        Ok((step_explicit(f, tableau, y, dt)?, StepStats::default()))
    } else {
        step_implicit_rk(f, y, tableau, dt, newton)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: Method,
    pub dt: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Stage-solver iterations per step (empty for explicit methods).
    pub newton_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.newton_iterations.iter().copied().max().unwrap_or(0)
    }
}

/// Integrate from `t = 0` to `t_end` with `step_count(t_end, dt)` fixed steps.
///
/// The stored grid is `t_k = k * dt` for every `sample_stride`-th step,
/// always including `t = 0`.
pub fn integrate(f: &dyn VectorField, y0: &[f64], cfg: &IntegratorConfig, t_end: f64) -> Result<Trajectory> {
    cfg.validate(t_end)?;
    Error::check_dim(f.dim(), y0.len())?;
    let steps = step_count(t_end, cfg.dt);
    let explicit = cfg.tableau.is_explicit();
    let mut traj = Trajectory {
        method: cfg.tableau.method,
        dt: cfg.dt,
        times: Vec::with_capacity(steps / cfg.sample_stride + 1),
        states: Vec::with_capacity(steps / cfg.sample_stride + 1),
        newton_iterations: Vec::with_capacity(if explicit { 0 } else { steps }),
    };
    traj.times.push(0.0);
    traj.states.push(y0.to_vec());
    let mut y = y0.to_vec();
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let (next, stats) = step(f, &y, &cfg.tableau, cfg.dt, &cfg.newton).map_err(|e| Error::Step {
            step: k,
            time: t,
            source: Box::new(e),
        })?;
        if !explicit {
            traj.newton_iterations.push(stats.iterations);
        }
        y = next;
        if (k + 1) % cfg.sample_stride == 0 {
            traj.times.push((k + 1) as f64 * cfg.dt);
            traj.states.push(y.clone());
        }
    }
    Ok(traj)
}

/// Final state only; avoids storing the trajectory.
pub fn integrate_final(f: &dyn VectorField, y0: &[f64], cfg: &IntegratorConfig, steps: usize) -> Result<Vec<f64>> {
    Error::check_dim(f.dim(), y0.len())?;
    let mut y = y0.to_vec();
    for k in 0..steps {
        y = step(f, &y, &cfg.tableau, cfg.dt, &cfg.newton)
            .map_err(|e| Error::Step {
                step: k,
                time: k as f64 * cfg.dt,
                source: Box::new(e),
            })?
            .0;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub slope: f64,
    /// `(dt, error)` for every step size that was used in the fit.
    pub errors: Vec<(f64, f64)>,
    /// Step sizes dropped because the stage solver failed.
    pub excluded: Vec<f64>,
}

/// Empirical convergence order at `t_end` against a reference solution.
///
/// Each `dt` is rounded so that an integer number of steps reaches `t_end`.
/// Without `reference`, the same method at `min(dts) / 100` is used.
pub fn estimate_order(
    f: &dyn VectorField,
    y0: &[f64],
    tableau: &ButcherTableau,
    newton: &NewtonSettings,
    t_end: f64,
    dts: &[f64],
    reference: Option<&[f64]>,
) -> Result<OrderEstimate> {
    if dts.len() < 3 || dts.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("need at least three positive step sizes".into()));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidArgument("final time must be positive".into()));
    }
    let run = |dt: f64| -> Result<(f64, Vec<f64>)> {
        let steps = (t_end / dt).round().max(1.0) as usize;
        let h = t_end / steps as f64;
        let cfg = IntegratorConfig {
            tableau: tableau.clone(),
            dt: h,
            newton: *newton,
            sample_stride: 1,
        };
        Ok((h, integrate_final(f, y0, &cfg, steps)?))
    };
    let reference = match reference {
        Some(r) => r.to_vec(),
        None => {
            let dmin = dts.iter().cloned().fold(f64::INFINITY, f64::min);
            run(dmin / 100.0)?.1
        }
    };
    let mut errors = Vec::new();
    let mut excluded = Vec::new();
    for &dt in dts {
        match run(dt) {
            Ok((h, y)) => {
                let err = y.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                errors.push((h, err));
            }
            Err(e) => {
                log::warn!("dt = {dt} excluded from order fit: {e}");
                excluded.push(dt);
            }
        }
    }
    if errors.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "only {} step sizes converged; cannot fit an order",
            errors.len()
        )));
    }
    let xs: Vec<f64> = errors.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.max(f64::MIN_POSITIVE).ln()).collect();
    Ok(OrderEstimate {
        slope: linalg::ls_slope(&xs, &ys),
        errors,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decay() -> FnField<impl Fn(&[f64], &mut [f64]) -> Result<()>> {
        FnField::new(1, |y: &[f64], out: &mut [f64]| {
            out[0] = -y[0];
            Ok(())
        })
    }

    fn oscillator() -> FnField<impl Fn(&[f64], &mut [f64]) -> Result<()>> {
        FnField::new(2, |y: &[f64], out: &mut [f64]| {
            out[0] = y[1];
            out[1] = -y[0];
            Ok(())
        })
    }

    #[test]
    fn tableaus_are_consistent() {
        for m in [Method::Midpoint, Method::Gl4, Method::Rk4] {
            let t = m.tableau();
            assert!(t.consistency_defect() < 1e-15, "{m}");
        }
        assert!(ButcherTableau::gauss_legendre_4().symplecticity_defect() <= 1e-15);
        assert_eq!(ButcherTableau::implicit_midpoint().symplecticity_defect(), 0.0);
        assert!(ButcherTableau::classical_rk4().symplecticity_defect() > 1e-3);
        assert!(ButcherTableau::classical_rk4().is_explicit());
        assert!(!ButcherTableau::gauss_legendre_4().is_explicit());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Midpoint, Method::Gl4, Method::Rk4] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("euler".parse::<Method>().is_err());
    }

    #[test]
    fn rk4_one_step_is_truncated_exponential() {
        let f = decay();
        let dt = 0.1_f64;
        let y = step_explicit_rk4(&f, &[1.0], dt).unwrap()[0];
        let expected = 1.0 - dt + dt * dt / 2.0 - dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
        assert!((y - expected).abs() < 1e-16);
    }

    #[test]
    fn rk4_local_error_scales_with_fifth_power() {
        let f = decay();
        let err = |dt: f64| (step_explicit_rk4(&f, &[1.0], dt).unwrap()[0] - (-dt).exp()).abs();
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 32.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn gl4_global_order_on_decay() {
        let f = decay();
        let est = estimate_order(
            &f,
            &[1.0],
            &ButcherTableau::gauss_legendre_4(),
            &NewtonSettings::default(),
            1.0,
            &[0.2, 0.1, 0.05, 0.025],
            Some(&[(-1.0_f64).exp()]),
        )
        .unwrap();
        assert!((est.slope - 4.0).abs() <= 0.2, "slope {}", est.slope);
    }

    #[test]
    fn midpoint_global_order_on_oscillator() {
        let f = oscillator();
        let est = estimate_order(
            &f,
            &[1.0, 0.0],
            &ButcherTableau::implicit_midpoint(),
            &NewtonSettings::default(),
            1.0,
            &[0.1, 0.05, 0.025, 0.0125],
            Some(&[1.0_f64.cos(), -1.0_f64.sin()]),
        )
        .unwrap();
        assert!((est.slope - 2.0).abs() <= 0.1, "slope {}", est.slope);
    }

    #[test]
    fn implicit_methods_conserve_oscillator_energy() {
        let f = oscillator();
        for method in [Method::Midpoint, Method::Gl4] {
            let cfg = IntegratorConfig::new(method, 0.1);
            let traj = integrate(&f, &[1.0, 0.0], &cfg, 100.0).unwrap();
            assert_eq!(traj.len(), 1001);
            for y in &traj.states {
                let e = 0.5 * (y[0] * y[0] + y[1] * y[1]);
                assert!((e - 0.5).abs() <= 1e-12, "{method}: {e}");
            }
        }
    }

    #[test]
    fn zero_field_converges_in_one_iteration() {
        let f = FnField::new(3, |_: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        });
        let y = [0.3, -2.0, 5.0];
        let (next, stats) = step_implicit_rk(
            &f,
            &y,
            &ButcherTableau::gauss_legendre_4(),
            0.1,
            &NewtonSettings::default(),
        )
        .unwrap();
        assert_eq!(next, y.to_vec());
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn zero_final_time_keeps_initial_state_only() {
        let f = decay();
        let traj = integrate(&f, &[2.0], &IntegratorConfig::new(Method::Gl4, 0.1), 0.0).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.states, vec![vec![2.0]]);
    }

    #[test]
    fn sampling_stride_sets_row_count() {
        let f = decay();
        let cfg = IntegratorConfig::new(Method::Rk4, 0.01).with_stride(7);
        let traj = integrate(&f, &[1.0], &cfg, 1.0).unwrap();
        assert_eq!(traj.len(), 100 / 7 + 1);
        assert!((traj.times[1] - 0.07).abs() < 1e-15);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let f = decay();
        assert!(integrate(&f, &[1.0], &IntegratorConfig::new(Method::Rk4, 0.0), 1.0).is_err());
        assert!(integrate(&f, &[1.0], &IntegratorConfig::new(Method::Rk4, 0.1), -1.0).is_err());
        assert!(integrate(&f, &[1.0, 2.0], &IntegratorConfig::new(Method::Rk4, 0.1), 1.0).is_err());
    }

    #[test]
    fn stage_solver_failure_is_reported() {
        let f = FnField::new(1, |y: &[f64], out: &mut [f64]| {
            out[0] = y[0] * y[0];
            Ok(())
        });
        let mut cfg = IntegratorConfig::new(Method::Gl4, 0.5);
        cfg.newton.max_iterations = 2;
        let err = integrate(&f, &[1.0], &cfg, 1.0).unwrap_err();
        assert!(matches!(err, Error::Step { step: 0, .. }), "{err}");
    }

    #[test]
    fn fixed_point_solver_matches_newton() {
        let f = oscillator();
        let mut fp = NewtonSettings::default();
        fp.solver = StageSolver::FixedPoint;
        fp.max_iterations = 200;
        let tab = ButcherTableau::gauss_legendre_4();
        let (a, _) = step_implicit_rk(&f, &[1.0, 0.5], &tab, 0.1, &NewtonSettings::default()).unwrap();
        let (b, _) = step_implicit_rk(&f, &[1.0, 0.5], &tab, 0.1, &fp).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn implicit_steps_are_time_reversible(
            y0 in -2.0..2.0f64, y1 in -2.0..2.0f64, dt in 0.01..0.3f64, gl in any::<bool>()
        ) {
            // Pendulum: nonlinear, so the Newton path is exercised.
            let f = FnField::new(2, |y: &[f64], out: &mut [f64]| {
                out[0] = y[1];
                out[1] = -y[0].sin();
                Ok(())
            });
            let tab = if gl { ButcherTableau::gauss_legendre_4() } else { ButcherTableau::implicit_midpoint() };
            let s = NewtonSettings::default();
            let (fwd, _) = step_implicit_rk(&f, &[y0, y1], &tab, dt, &s).unwrap();
            let (back, _) = step_implicit_rk(&f, &fwd, &tab, -dt, &s).unwrap();
            prop_assert!((back[0] - y0).abs() <= 1e-12 && (back[1] - y1).abs() <= 1e-12);
        }

        #[test]
        fn gl4_conserves_quadratic_invariant(a in -3.0..3.0f64, b in -3.0..3.0f64, dt in 0.01..0.5f64) {
            let f = oscillator();
            let cfg = IntegratorConfig::new(Method::Gl4, dt);
            let traj = integrate(&f, &[a, b], &cfg, 20.0 * dt).unwrap();
            let e0 = a * a + b * b;
            for y in &traj.states {
                prop_assert!((y[0] * y[0] + y[1] * y[1] - e0).abs() <= 1e-12 * (1.0 + e0));
            }
        }
    }
}
