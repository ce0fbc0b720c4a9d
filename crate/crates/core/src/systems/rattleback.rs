//! Rattleback model on a three-dimensional solvable algebra:
//! `[E1, E3] = lambda E1`, `[E2, E3] = -E2`, energy `|mu|^2 / 2`,
//! Casimir `P R^lambda` for `mu = (P, R, S)` with `R > 0`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::clebsch::{Constraint, PhasePoint, PinningSpec, Seed};
use crate::error::{Error, Result};
use crate::lie_algebra::{AlgebraVector, DualPoint, LieAlgebraSpec};
use crate::poisson::{BracketSign, HamiltonianDef, ScalarField};

use super::{apply_overrides, SystemPreset};

pub fn algebra(lambda: f64) -> LieAlgebraSpec {
    LieAlgebraSpec::from_brackets(3, &[(0, 2, 0, lambda), (1, 2, 1, -1.0)])
        .and_then(|a| a.with_labels(vec!["P".into(), "R".into(), "S".into()]))
        .expect("finite lambda")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RattlebackParams {
    pub lambda: f64,
    pub mu0: [f64; 3],
    /// Pinned components `q1 = q3 = pin_q`.
    pub pin_q: f64,
}

impl Default for RattlebackParams {
    fn default() -> Self {
        Self {
            lambda: 4.0,
            mu0: [0.01, 0.01, 0.5],
            pin_q: 0.1,
        }
    }
}

impl RattlebackParams {
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let [m1, m2, m3] = &mut self.mu0;
        apply_overrides(
            &mut [
                ("lambda", &mut self.lambda),
                ("mu0_1", m1),
                ("mu0_2", m2),
                ("mu0_3", m3),
                ("pin_q", &mut self.pin_q),
            ],
            overrides,
        )?;
        Ok(self)
    }
}

pub fn energy() -> ScalarField {
    ScalarField::quadratic("h", vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![0.0; 3])
}

pub fn casimir(lambda: f64) -> ScalarField {
    ScalarField::new("f1", move |mu| mu[0] * mu[1].powf(lambda))
        .with_gradient(move |mu| {
            AlgebraVector::new(vec![mu[1].powf(lambda), lambda * mu[0] * mu[1].powf(lambda - 1.0), 0.0])
        })
        .with_guard(|mu| {
            if mu[1] > 0.0 {
                Ok(())
            } else {
                Err(format!("R = {} must be positive", mu[1]))
            }
        })
}

pub fn hamiltonian(lambda: f64) -> HamiltonianDef {
    HamiltonianDef::new(energy(), vec![casimir(lambda)])
}

pub fn closed_form_lp_rhs(lambda: f64) -> impl Fn(&DualPoint) -> DualPoint + Send + Sync {
    move |mu| {
        let (p, r, s) = (mu[0], mu[1], mu[2]);
        DualPoint::new(vec![lambda * p * s, -r * s, r * r - lambda * p * p])
    }
}

/// Anti-reduced field for the plus sign, expanded by hand.
pub fn closed_form_antireduced_rhs(lambda: f64) -> impl Fn(&PhasePoint) -> PhasePoint + Send + Sync {
    move |z| {
        let (q1, q2, q3) = (z.q[0], z.q[1], z.q[2]);
        let (p1, p2) = (z.p[0], z.p[1]);
        let l = lambda;
        PhasePoint::new(
            AlgebraVector::new(vec![
                l * l * (q1 * q1 + q3 * q3) * p1 - l * q1 * q2 * p2,
                (q2 * q2 + q3 * q3) * p2 - l * q1 * q2 * p1,
                0.0,
            ]),
            DualPoint::new(vec![
                l * q2 * p1 * p2 - l * l * q1 * p1 * p1,
                l * q1 * p1 * p2 - q2 * p2 * p2,
                -q3 * (l * l * p1 * p1 + p2 * p2),
            ]),
        )
    }
}

/// Pin `q1 = q3 = pin_q` and `p . q = 1`.
pub fn pinning(pin_q: f64) -> PinningSpec {
    let seed = PhasePoint::new(
        AlgebraVector::new(vec![pin_q, -1.0, pin_q]),
        DualPoint::new(vec![0.1, -0.1, 1.0]),
    );
    PinningSpec::gauss_newton(
        Seed::Point(seed),
        vec![
            Constraint::FixQ { index: 0, value: pin_q },
            Constraint::FixQ { index: 2, value: pin_q },
            Constraint::F0(1.0),
        ],
    )
}

pub fn preset() -> Result<SystemPreset> {
    preset_with(&RattlebackParams::default())
}

pub fn preset_with(params: &RattlebackParams) -> Result<SystemPreset> {
    let l = params.lambda;
    if !l.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite".into()));
    }
    Ok(SystemPreset {
        name: "rattleback".into(),
        algebra: algebra(l),
        ham: hamiltonian(l),
        sign: BracketSign::Plus,
        params: vec![
            ("lambda".into(), l),
            ("mu0_1".into(), params.mu0[0]),
            ("mu0_2".into(), params.mu0[1]),
            ("mu0_3".into(), params.mu0[2]),
            ("pin_q".into(), params.pin_q),
        ],
        mu0: DualPoint::new(params.mu0.to_vec()),
        pinning: pinning(params.pin_q),
        recommended_dt: 0.01,
        recommended_t_end: 500.0,
        closed_form_lp_rhs: Some(Arc::new(closed_form_lp_rhs(l))),
        closed_form_antireduced_rhs: Some(Arc::new(closed_form_antireduced_rhs(l))),
    })
}
