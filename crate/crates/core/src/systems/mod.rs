//! Preset mechanical systems: Kida vortex, rattleback, heavy top with moving mass.

pub mod heavy_top;
pub mod kida;
pub mod rattleback;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::clebsch::{solve_initial_point, PhasePoint, PinningSpec};
use crate::error::{Error, Result};
use crate::lie_algebra::{DualPoint, LieAlgebraSpec};
use crate::poisson::{BracketSign, HamiltonianDef};

pub type LpOracle = Arc<dyn Fn(&DualPoint) -> DualPoint + Send + Sync>;
pub type PhaseOracle = Arc<dyn Fn(&PhasePoint) -> PhasePoint + Send + Sync>;

/// Everything needed to run one experiment.
#[derive(Clone)]
pub struct SystemPreset {
    pub name: String,
    pub algebra: LieAlgebraSpec,
    pub ham: HamiltonianDef,
    pub sign: BracketSign,
    /// Resolved parameter values, in a stable order.
    pub params: Vec<(String, f64)>,
    pub mu0: DualPoint,
    pub pinning: PinningSpec,
    pub recommended_dt: f64,
    pub recommended_t_end: f64,
    /// Hand-expanded Lie-Poisson vector field used as a test oracle.
    pub closed_form_lp_rhs: Option<LpOracle>,
    /// Hand-expanded anti-reduced vector field used as a test oracle.
    pub closed_form_antireduced_rhs: Option<PhaseOracle>,
}

impl fmt::Debug for SystemPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemPreset")
            .field("name", &self.name)
            .field("dim", &self.algebra.dim())
            .field("sign", &self.sign)
            .field("params", &self.params)
            .field("mu0", &self.mu0)
            .finish_non_exhaustive()
    }
}

impl SystemPreset {
    /// Solve `M(q0, p0) = mu0` with the preset's pinning rule.
    pub fn initial_point(&self) -> Result<PhasePoint> {
        solve_initial_point(&self.algebra, &self.mu0, &self.pinning, self.sign)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

pub const PRESET_NAMES: [&str; 3] = ["kida", "rattleback", "heavy_top"];

/// Build a preset by name with optional parameter overrides.
pub fn by_name(name: &str, overrides: &BTreeMap<String, f64>) -> Result<SystemPreset> {
    match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "kida" => kida::preset_with(&kida::KidaParams::default().with_overrides(overrides)?),
        "rattleback" => rattleback::preset_with(&rattleback::RattlebackParams::default().with_overrides(overrides)?),
        "heavy_top" | "heavytop" => {
            heavy_top::preset_with(&heavy_top::HeavyTopParams::default().with_overrides(overrides)?)
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown preset `{other}` (expected one of {})",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Apply `overrides` to named parameter slots; unknown names are an error.
pub(crate) fn apply_overrides(slots: &mut [(&str, &mut f64)], overrides: &BTreeMap<String, f64>) -> Result<()> {
    for (key, value) in overrides {
        let Some(idx) = slots.iter().position(|(name, _)| name == key) else {
            let known: Vec<&str> = slots.iter().map(|(n, _)| *n).collect();
            return Err(Error::InvalidArgument(format!(
                "unknown parameter `{key}` (known: {})",
                known.join(", ")
            )));
        };
        let slot = &mut slots[idx];
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("parameter `{key}` must be finite")));
        }
        *slot.1 = *value;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_by_name() {
        for name in PRESET_NAMES {
            let p = by_name(name, &BTreeMap::new()).unwrap();
            assert_eq!(p.name, name);
            assert_eq!(p.mu0.len(), p.algebra.dim());
        }
        assert!(by_name("pendulum", &BTreeMap::new()).is_err());
    }

    #[test]
    fn overrides_are_applied_and_checked() {
        let mut o = BTreeMap::new();
        o.insert("lambda".to_string(), 3.0);
        let p = by_name("rattleback", &o).unwrap();
        assert_eq!(p.param("lambda"), Some(3.0));
        o.insert("bogus".to_string(), 1.0);
        assert!(by_name("rattleback", &o).is_err());
    }
}
