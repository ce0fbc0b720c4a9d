//! Kida elliptical vortex in a uniform shear flow, on `so(2,1)*`.
//!
//! Basis: `[E1, E2] = E3`, `[E1, E3] = E2`, `[E2, E3] = -E1`.
//! Energy `h = eps mu2 + omega mu3 - (pi/8) ln(pi/8 - mu3)`, Casimir `mu1^2 + mu2^2 - mu3^2`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::clebsch::{Constraint, PhasePoint, PinningSpec, Seed};
use crate::error::{Error, Result};
use crate::lie_algebra::{AlgebraVector, DualPoint, LieAlgebraSpec};
use crate::poisson::{BracketSign, HamiltonianDef, ScalarField};

use super::{apply_overrides, SystemPreset};

/// Casimir value of the leaf carrying physical vortex patches.
pub const PHYSICAL_LEAF: f64 = -PI * PI / 64.0;

pub fn algebra() -> LieAlgebraSpec {
    LieAlgebraSpec::from_brackets(3, &[(0, 1, 2, 1.0), (0, 2, 1, 1.0), (1, 2, 0, -1.0)])
        .and_then(|a| a.with_labels(vec!["mu1".into(), "mu2".into(), "mu3".into()]))
        .expect("static structure constants")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KidaParams {
    pub epsilon: f64,
    pub omega: f64,
    /// Prescribed first component of `mu0`.
    pub mu1_0: f64,
    /// Casimir value of the leaf through `mu0`.
    pub casimir: f64,
    /// Energy level of `mu0`.
    pub energy: f64,
}

impl Default for KidaParams {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            omega: -1.0,
            mu1_0: 1.0,
            casimir: -0.25,
            energy: 1.0,
        }
    }
}

impl KidaParams {
    /// Same parameters on the leaf of physical vortex patches.
    pub fn on_physical_leaf(mut self) -> Self {
        self.casimir = PHYSICAL_LEAF;
        self
    }

    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        apply_overrides(
            &mut [
                ("epsilon", &mut self.epsilon),
                ("omega", &mut self.omega),
                ("mu1_0", &mut self.mu1_0),
                ("casimir", &mut self.casimir),
                ("energy", &mut self.energy),
            ],
            overrides,
        )?;
        Ok(self)
    }
}

fn energy_field(eps: f64, omega: f64) -> ScalarField {
    let c = PI / 8.0;
    ScalarField::new("h", move |mu| eps * mu[1] + omega * mu[2] - c * (c - mu[2]).ln())
        .with_gradient(move |mu| AlgebraVector::new(vec![0.0, eps, omega + c / (c - mu[2])]))
        .with_guard(move |mu| {
            if mu[2] < c {
                Ok(())
            } else {
                Err(format!("mu3 = {} must stay below pi/8", mu[2]))
            }
        })
}

pub fn casimir() -> ScalarField {
    ScalarField::new("f1", |mu| mu[0] * mu[0] + mu[1] * mu[1] - mu[2] * mu[2])
        .with_gradient(|mu| AlgebraVector::new(vec![2.0 * mu[0], 2.0 * mu[1], -2.0 * mu[2]]))
}

pub fn hamiltonian(eps: f64, omega: f64) -> HamiltonianDef {
    HamiltonianDef::new(energy_field(eps, omega), vec![casimir()])
}

/// Solve for `(mu2, mu3)` given `mu1`, the Casimir value and the energy,
/// by Newton's method from `(0, -1)`.
pub fn initial_momentum(params: &KidaParams) -> Result<DualPoint> {
    let KidaParams {
        epsilon: eps,
        omega,
        mu1_0: m1,
        casimir: c0,
        energy: e0,
    } = *params;
    let c = PI / 8.0;
    let (mut m2, mut m3) = (0.0_f64, -1.0_f64);
    for _ in 0..100 {
        if m3 >= c {
            break;
        }
        let r1 = m1 * m1 + m2 * m2 - m3 * m3 - c0;
        let r2 = eps * m2 + omega * m3 - c * (c - m3).ln() - e0;
        if r1.abs().max(r2.abs()) <= 1e-15 {
            return Ok(DualPoint::new(vec![m1, m2, m3]));
        }
        let (a, b) = (2.0 * m2, -2.0 * m3);
        let (cc, d) = (eps, omega + c / (c - m3));
        let det = a * d - b * cc;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        m2 -= (d * r1 - b * r2) / det;
        m3 -= (a * r2 - cc * r1) / det;
    }
    // Accept a last iterate that is converged to roundoff.
    let r1 = m1 * m1 + m2 * m2 - m3 * m3 - c0;
    let r2 = eps * m2 + omega * m3 - c * (c - m3).ln() - e0;
    if m3 < c && r1.abs().max(r2.abs()) <= 1e-13 {
        return Ok(DualPoint::new(vec![m1, m2, m3]));
    }
    Err(Error::InvalidArgument(format!(
        "no initial momentum with mu1 = {m1}, casimir = {c0}, energy = {e0}"
    )))
}

/// Pin `q1 = 1`, `p1 = 0`, `p . q = 1`. The solution is `q = (1, s, s)`,
/// `p = (0, -mu3, -mu2)` with `s = -1/(mu2 + mu3)`.
pub fn pinning() -> PinningSpec {
    let seed = PhasePoint::new(
        AlgebraVector::new(vec![1.0, 0.5, 0.5]),
        DualPoint::new(vec![0.0, 1.0, 0.0]),
    );
    PinningSpec::gauss_newton(
        Seed::Point(seed),
        vec![
            Constraint::FixQ { index: 0, value: 1.0 },
            Constraint::FixP { index: 0, value: 0.0 },
            Constraint::F0(1.0),
        ],
    )
}

pub fn closed_form_lp_rhs(eps: f64, omega: f64) -> impl Fn(&DualPoint) -> DualPoint + Send + Sync {
    move |mu| {
        let w = omega + PI / (PI - 8.0 * mu[2]);
        DualPoint::new(vec![
            omega * mu[1] + eps * mu[2] + PI * mu[1] / (PI - 8.0 * mu[2]),
            -mu[0] * w,
            eps * mu[0],
        ])
    }
}

/// Anti-reduced field for the plus sign, expanded by hand.
pub fn closed_form_antireduced_rhs(eps: f64, omega: f64) -> impl Fn(&PhasePoint) -> PhasePoint + Send + Sync {
    move |z| {
        let (q1, q2, q3) = (z.q[0], z.q[1], z.q[2]);
        let (p1, p2, p3) = (z.p[0], z.p[1], z.p[2]);
        let d = q1 * p2 - q2 * p1 + PI / 8.0;
        let c = PI / 8.0;
        PhasePoint::new(
            AlgebraVector::new(vec![
                omega * q2 - eps * q3 + c * q2 / d,
                -omega * q1 - c * q1 / d,
                -eps * q1,
            ]),
            DualPoint::new(vec![
                omega * p2 + eps * p3 + c * p2 / d,
                -omega * p1 - c * p1 / d,
                eps * p1,
            ]),
        )
    }
}

pub fn preset() -> Result<SystemPreset> {
    preset_with(&KidaParams::default())
}

pub fn preset_with(params: &KidaParams) -> Result<SystemPreset> {
    let mu0 = initial_momentum(params)?;
    let (eps, omega) = (params.epsilon, params.omega);
    Ok(SystemPreset {
        name: "kida".into(),
        algebra: algebra(),
        ham: hamiltonian(eps, omega),
        sign: BracketSign::Plus,
        params: vec![
            ("epsilon".into(), eps),
            ("omega".into(), omega),
            ("mu1_0".into(), params.mu1_0),
            ("casimir".into(), params.casimir),
            ("energy".into(), params.energy),
        ],
        mu0,
        pinning: pinning(),
        recommended_dt: 0.1,
        recommended_t_end: 100.0,
        closed_form_lp_rhs: Some(Arc::new(closed_form_lp_rhs(eps, omega))),
        closed_form_antireduced_rhs: Some(Arc::new(closed_form_antireduced_rhs(eps, omega))),
    })
}

// ---------------------------------------------------------------------------
// Physical chart on the leaf f1 = -pi^2/64
// ---------------------------------------------------------------------------

/// Aspect ratio `lambda` in `(0, 1]` and orientation `phi` of the vortex patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KidaPhysicalState {
    pub lambda: f64,
    pub phi: f64,
}

/// Tolerance on the Casimir when mapping into the physical chart.
pub const CHART_LEAF_TOL: f64 = 1e-6;

/// `mu = (pi/16) ((lambda - 1/lambda) sin 2phi, (lambda - 1/lambda) cos 2phi, -(lambda + 1/lambda))`.
pub fn mu_from_physical(state: &KidaPhysicalState) -> Result<DualPoint> {
    let KidaPhysicalState { lambda, phi } = *state;
    if !(lambda > 0.0 && lambda <= 1.0) || !phi.is_finite() {
        return Err(Error::Chart(format!("aspect ratio must lie in (0, 1], got {lambda}")));
    }
    let a = PI / 16.0 * (lambda - 1.0 / lambda);
    Ok(DualPoint::new(vec![
        a * (2.0 * phi).sin(),
        a * (2.0 * phi).cos(),
        -PI / 16.0 * (lambda + 1.0 / lambda),
    ]))
}

/// Inverse of [`mu_from_physical`]; `phi` is returned in `(-pi/2, pi/2]` and
/// set to zero for the circular patch, where it is undefined.
pub fn physical_from_mu(mu: &DualPoint) -> Result<KidaPhysicalState> {
    if mu.len() != 3 || !mu.is_finite() {
        return Err(Error::Chart("expected a finite 3-vector".into()));
    }
    let f1 = mu[0] * mu[0] + mu[1] * mu[1] - mu[2] * mu[2];
    if (f1 - PHYSICAL_LEAF).abs() > CHART_LEAF_TOL {
        return Err(Error::Chart(format!(
            "point is off the physical leaf (casimir {f1:.6e}, expected {PHYSICAL_LEAF:.6e})"
        )));
    }
    if mu[2] >= 0.0 {
        return Err(Error::Chart("mu3 must be negative on the physical sheet".into()));
    }
    // s = lambda + 1/lambda >= 2
    let s = (-16.0 * mu[2] / PI).max(2.0);
    let lambda = 2.0 / (s + (s * s - 4.0).max(0.0).sqrt());
    let a = PI / 16.0 * (lambda - 1.0 / lambda);
    let phi = if a.abs() < 1e-14 {
        0.0
    } else {
        0.5 * (mu[0] / a).atan2(mu[1] / a)
    };
    Ok(KidaPhysicalState { lambda, phi })
}

/// Kida's equations for `(lambda', phi')`.
pub fn physical_rhs(state: &KidaPhysicalState, eps: f64, omega: f64) -> (f64, f64) {
    let KidaPhysicalState { lambda: l, phi } = *state;
    let c2 = (2.0 * phi).cos();
    let s2 = (2.0 * phi).sin();
    let dl = -eps * l * s2;
    let dphi = l / ((1.0 + l) * (1.0 + l)) + 0.5 * omega + 0.5 * eps * (1.0 + l * l) / (1.0 - l * l) * c2;
    (dl, dphi)
}
