//! Turn an [`ExperimentConfig`] into a concrete system and initial point.

use antireduce::clebsch::{Constraint, PinningSpec, Seed};
use antireduce::systems;
use antireduce::{AlgebraVector, DualPoint, HamiltonianDef, LieAlgebraSpec, ScalarField, SystemPreset};

use crate::config::{ExperimentConfig, PinningChoice, SystemSource};
use crate::CliError;

const INLINE_DT: f64 = 0.01;
const INLINE_T_END: f64 = 10.0;

/// A preset with the config's sign, pinning, step and horizon applied.
pub struct Resolved {
    pub system: SystemPreset,
    pub dt: f64,
    pub t_end: f64,
    /// Seed of a randomized pinning, if one was used.
    pub seed: Option<u64>,
}

fn inline_system(algebra_path: &std::path::Path, diag: &[f64], mu0: &[f64]) -> Result<SystemPreset, CliError> {
    let text = std::fs::read_to_string(algebra_path).map_err(|e| CliError::Io {
        path: algebra_path.to_path_buf(),
        source: e,
    })?;
    let algebra = LieAlgebraSpec::parse(&text)?;
    let n = algebra.dim();
    if diag.len() != n || mu0.len() != n {
        return Err(CliError::Usage(format!(
            "inline system of dimension {n} needs {n} entries in `energy_diag` and `mu0`"
        )));
    }
    let mut a = vec![0.0; n * n];
    for (i, d) in diag.iter().enumerate() {
        a[i * n + i] = *d;
    }
    let energy = ScalarField::quadratic("h", a, vec![0.0; n]);
    // kappa*(mu, mu) is a Casimir whenever the Killing form is invertible.
    let mut casimirs = Vec::new();
    if algebra.is_semisimple() {
        let (a1, a2) = (algebra.clone(), algebra.clone());
        casimirs.push(
            ScalarField::new("kappa_star", move |mu| a1.dual_killing(mu, mu).unwrap_or(f64::NAN)).with_gradient(
                move |mu| {
                    a2.kappa_sharp(mu)
                        .map(|v| v.scaled(2.0))
                        .unwrap_or_else(|_| AlgebraVector::zeros(mu.len()))
                },
            ),
        );
    }
    Ok(SystemPreset {
        name: "inline".into(),
        pinning: PinningSpec::gauss_newton(Seed::Random(0), vec![Constraint::F0(1.0)]),
        ham: HamiltonianDef::new(energy, casimirs),
        sign: antireduce::BracketSign::Plus,
        params: diag
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("energy_diag_{}", i + 1), *d))
            .collect(),
        mu0: DualPoint::new(mu0.to_vec()),
        algebra,
        recommended_dt: INLINE_DT,
        recommended_t_end: INLINE_T_END,
        closed_form_lp_rhs: None,
        closed_form_antireduced_rhs: None,
    })
}

/// Build the system only; no initial-point solve.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, CliError> {
    cfg.validate()?;
    let mut system = match &cfg.system {
        SystemSource::Preset(name) => {
            systems::by_name(name, &cfg.params).map_err(|e| CliError::Usage(e.to_string()))?
        }
        SystemSource::Inline {
            algebra,
            energy_diag,
            mu0,
        } => {
            if !cfg.params.is_empty() {
                return Err(CliError::Usage("[params] applies to presets only".into()));
            }
            inline_system(algebra, energy_diag, mu0)?
        }
    };
    if let Some(sign) = cfg.sign {
        system.sign = sign;
    }
    let mut seed = None;
    match &cfg.pinning {
        PinningChoice::Preset => {
            if let antireduce::clebsch::PinningStrategy::GaussNewton {
                seed: Seed::Random(s), ..
            } = &system.pinning.strategy
            {
                seed = Some(*s);
            }
        }
        PinningChoice::FixedQ(q) => {
            if q.len() != system.algebra.dim() {
                return Err(CliError::Usage(format!(
                    "pinning q has {} entries, the algebra has dimension {}",
                    q.len(),
                    system.algebra.dim()
                )));
            }
            system.pinning = PinningSpec::fixed_q(AlgebraVector::new(q.clone()));
        }
        PinningChoice::Random { seed: s, f0 } => {
            system.pinning = PinningSpec::gauss_newton(Seed::Random(*s), vec![Constraint::F0(*f0)]);
            seed = Some(*s);
        }
    }
    Ok(Resolved {
        dt: cfg.dt.unwrap_or(system.recommended_dt),
        t_end: cfg.t_end.unwrap_or(system.recommended_t_end),
        system,
        seed,
    })
}

/// Short description of the pinning rule for summaries.
pub fn describe_pinning(spec: &PinningSpec) -> String {
    match &spec.strategy {
        antireduce::clebsch::PinningStrategy::FixedQ(q) => format!("fixed_q {:?}", q.as_slice()),
        antireduce::clebsch::PinningStrategy::GaussNewton { seed, constraints } => {
            let seed = match seed {
                Seed::Point(_) => "preset seed point".to_string(),
                Seed::Random(s) => format!("random seed {s}"),
            };
            format!("gauss_newton from {seed}, constraints {constraints:?}")
        }
    }
}
