//! Lie-Poisson brackets and vector fields on the dual of a Lie algebra.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lie_algebra::{AlgebraVector, DualPoint, LieAlgebraSpec};

/// Which of the two Lie-Poisson brackets `{f,g}_± = ±<mu, [Df, Dg]>` is used.
///
/// The sign also selects the matching momentum map `M_± = ∓ ad*_q p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BracketSign {
    #[default]
    Plus,
    Minus,
}

impl BracketSign {
    /// `+1.0` for [`Plus`](Self::Plus), `-1.0` for [`Minus`](Self::Minus).
    pub fn factor(self) -> f64 {
        match self {
            BracketSign::Plus => 1.0,
            BracketSign::Minus => -1.0,
        }
    }
}

impl fmt::Display for BracketSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BracketSign::Plus => "plus",
            BracketSign::Minus => "minus",
        })
    }
}

impl FromStr for BracketSign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus" | "+" => Ok(BracketSign::Plus),
            "minus" | "-" => Ok(BracketSign::Minus),
            other => Err(Error::InvalidArgument(format!(
                "unknown bracket sign `{other}` (expected plus or minus)"
            ))),
        }
    }
}

pub type ValueFn = Arc<dyn Fn(&DualPoint) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&DualPoint) -> AlgebraVector + Send + Sync>;
pub type GuardFn = Arc<dyn Fn(&DualPoint) -> std::result::Result<(), String> + Send + Sync>;

/// A named smooth function on the dual, with optional analytic gradient and domain guard.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    value: ValueFn,
    gradient: Option<GradientFn>,
    guard: Option<GuardFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("guarded", &self.guard.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, value: impl Fn(&DualPoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            value: Arc::new(value),
            gradient: None,
            guard: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&DualPoint) -> AlgebraVector + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_guard(
        mut self,
        guard: impl Fn(&DualPoint) -> std::result::Result<(), String> + Send + Sync + 'static,
    ) -> Self {
        self.guard = Some(Arc::new(guard));
        self
    }

    /// The `i`-th coordinate function `mu -> mu_i`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        Self::new(format!("mu{}", i + 1), move |mu| mu[i]).with_gradient(move |_| AlgebraVector::basis(n, i))
    }

    /// `mu -> 1/2 mu^T A mu + b . mu` with `A` symmetric (row-major, `n x n`).
    pub fn quadratic(name: impl Into<String>, a: Vec<f64>, b: Vec<f64>) -> Self {
        let n = b.len();
        assert_eq!(a.len(), n * n, "quadratic form has wrong size");
        let a2 = a.clone();
        let b2 = b.clone();
        Self::new(name, move |mu| {
            let mut s = 0.0;
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    row += a[i * n + j] * mu[j];
                }
                s += mu[i] * (0.5 * row + b[i]);
            }
            s
        })
        .with_gradient(move |mu| {
            let g = (0..n)
                .map(|i| (0..n).map(|j| a2[i * n + j] * mu[j]).sum::<f64>() + b2[i])
                .collect();
            AlgebraVector::new(g)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn check_domain(&self, mu: &DualPoint) -> Result<()> {
        if !mu.is_finite() {
            return Err(Error::domain(&self.name, "non-finite argument"));
        }
        match &self.guard {
            Some(g) => g(mu).map_err(|reason| Error::domain(&self.name, reason)),
            None => Ok(()),
        }
    }

    pub fn value(&self, mu: &DualPoint) -> Result<f64> {
        self.check_domain(mu)?;
        Ok((self.value)(mu))
    }

    /// `Df(mu)`: analytic when available, fourth-order central differences otherwise.
    pub fn gradient(&self, mu: &DualPoint) -> Result<AlgebraVector> {
        self.check_domain(mu)?;
        Ok(match &self.gradient {
            Some(g) => g(mu),
            None => self.fd_gradient_unchecked(mu),
        })
    }

    /// Fourth-order central differences, step `1e-5 (1 + |mu_i|)`.
    pub fn fd_gradient(&self, mu: &DualPoint) -> Result<AlgebraVector> {
        self.check_domain(mu)?;
        Ok(self.fd_gradient_unchecked(mu))
    }

    fn fd_gradient_unchecked(&self, mu: &DualPoint) -> AlgebraVector {
        let mut x = mu.clone();
        let mut g = AlgebraVector::zeros(mu.len());
        for i in 0..mu.len() {
            let h = 1e-5 * (1.0 + mu[i].abs());
            let x0 = mu[i];
            let mut at = |s: f64| {
                x[i] = x0 + s * h;
                (self.value)(&x)
            };
            let (fp2, fp1, fm1, fm2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
            x[i] = x0;
            g[i] = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
        }
        g
    }

    /// Discrepancy between the gradient and second-order central differences
    /// with step `1e-6 (1 + |mu|)`, relative to `max(|Df|_inf, 1)`.
    pub fn gradient_check(&self, mu: &DualPoint) -> Result<f64> {
        let g = self.gradient(mu)?;
        let h = 1e-6 * (1.0 + mu.norm());
        let mut x = mu.clone();
        let mut worst = 0.0_f64;
        for i in 0..mu.len() {
            let x0 = mu[i];
            x[i] = x0 + h;
            let fp = (self.value)(&x);
            x[i] = x0 - h;
            let fm = (self.value)(&x);
            x[i] = x0;
            worst = worst.max(((fp - fm) / (2.0 * h) - g[i]).abs());
        }
        Ok(worst / g.max_abs().max(1.0))
    }
}

/// The Hamiltonian of a Lie-Poisson system together with its known Casimirs.
#[derive(Debug, Clone)]
pub struct HamiltonianDef {
    pub energy: ScalarField,
    pub casimirs: Vec<ScalarField>,
}

impl HamiltonianDef {
    pub fn new(energy: ScalarField, casimirs: Vec<ScalarField>) -> Self {
        Self { energy, casimirs }
    }

    pub fn value(&self, mu: &DualPoint) -> Result<f64> {
        self.energy.value(mu)
    }

    pub fn gradient(&self, mu: &DualPoint) -> Result<AlgebraVector> {
        self.energy.gradient(mu)
    }
}

/// `{f, g}_±(mu) = ±<mu, [Df(mu), Dg(mu)]>`.
pub fn lp_bracket(
    algebra: &LieAlgebraSpec,
    f: &ScalarField,
    g: &ScalarField,
    mu: &DualPoint,
    sign: BracketSign,
) -> Result<f64> {
    Error::check_dim(algebra.dim(), mu.len())?;
    let df = f.gradient(mu)?;
    let dg = g.gradient(mu)?;
    Ok(sign.factor() * mu.pair(&algebra.bracket(&df, &dg)))
}

/// The Lie-Poisson vector field `mu' = ∓ ad*_{Dh(mu)} mu`.
pub fn lp_rhs(algebra: &LieAlgebraSpec, ham: &HamiltonianDef, mu: &DualPoint, sign: BracketSign) -> Result<DualPoint> {
    Error::check_dim(algebra.dim(), mu.len())?;
    let dh = ham.gradient(mu)?;
    Ok(algebra.coadjoint(&dh, mu).scaled(-sign.factor()))
}

/// `|ad*_{Df(mu)} mu|`; zero exactly when `f` is a Casimir at `mu`.
pub fn casimir_residual(algebra: &LieAlgebraSpec, f: &ScalarField, mu: &DualPoint) -> Result<f64> {
    Error::check_dim(algebra.dim(), mu.len())?;
    let df = f.gradient(mu)?;
    Ok(algebra.coadjoint(&df, mu).norm())
}

/// The Lie-Poisson system as a flat vector field on `mu`.
#[derive(Clone, Copy)]
pub struct LiePoissonField<'a> {
    pub algebra: &'a LieAlgebraSpec,
    pub ham: &'a HamiltonianDef,
    pub sign: BracketSign,
}

impl crate::integrators::VectorField for LiePoissonField<'_> {
    fn dim(&self) -> usize {
        self.algebra.dim()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let v = lp_rhs(self.algebra, self.ham, &DualPoint::from(y), self.sign)?;
        out.copy_from_slice(v.as_slice());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::systems::{heavy_top, kida, rattleback, SystemPreset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mu(rng: &mut ChaCha8Rng, preset: &SystemPreset) -> DualPoint {
        loop {
            let mu: Vec<f64> = preset
                .mu0
                .iter()
                .map(|m| m + rng.random_range(-0.5..0.5) * (1.0 + m.abs()))
                .collect();
            let mu = DualPoint::new(mu);
            if preset.ham.energy.check_domain(&mu).is_ok()
                && preset.ham.casimirs.iter().all(|c| c.check_domain(&mu).is_ok())
            {
                return mu;
            }
        }
    }

    fn presets() -> Vec<SystemPreset> {
        vec![
            kida::preset().unwrap(),
            rattleback::preset().unwrap(),
            heavy_top::preset().unwrap(),
        ]
    }

    #[test]
    fn bracket_of_field_with_itself_vanishes() {
        let p = kida::preset().unwrap();
        let mu = DualPoint::new(vec![0.3, -0.2, -1.0]);
        let v = lp_bracket(&p.algebra, &p.ham.energy, &p.ham.energy, &mu, BracketSign::Plus).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn coordinate_brackets_reproduce_structure_matrix() {
        let a = kida::algebra();
        let mu = DualPoint::new(vec![0.4, -1.3, 2.2]);
        for i in 0..3 {
            for j in 0..3 {
                let f = ScalarField::coordinate(3, i);
                let g = ScalarField::coordinate(3, j);
                let v = lp_bracket(&a, &f, &g, &mu, BracketSign::Plus).unwrap();
                assert!((v - a.structure_matrix(&mu)[(i, j)]).abs() < 1e-15);
            }
        }
        let b12 = lp_bracket(
            &a,
            &ScalarField::coordinate(3, 0),
            &ScalarField::coordinate(3, 1),
            &mu,
            BracketSign::Plus,
        )
        .unwrap();
        assert_eq!(b12, mu[2]);
    }

    #[test]
    fn rattleback_rhs_matches_closed_form() {
        let p = rattleback::preset().unwrap();
        let lambda = 4.0;
        let mu = DualPoint::new(vec![0.3, 0.7, -0.2]);
        let r = lp_rhs(&p.algebra, &p.ham, &mu, p.sign).unwrap();
        let (pp, rr, ss) = (mu[0], mu[1], mu[2]);
        let expected = [lambda * pp * ss, -rr * ss, rr * rr - lambda * pp * pp];
        for (a, b) in r.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn constant_hamiltonian_gives_zero_field() {
        let a = kida::algebra();
        let ham = HamiltonianDef::new(ScalarField::new("const", |_| 3.0), vec![]);
        let mu = DualPoint::new(vec![0.1, 0.2, 0.3]);
        let r = lp_rhs(&a, &ham, &mu, BracketSign::Plus).unwrap();
        assert!(r.max_abs() < 1e-9);
    }

    #[test]
    fn kida_domain_guard_is_an_error() {
        let p = kida::preset().unwrap();
        let mu = DualPoint::new(vec![0.0, 0.0, 0.5]);
        let err = lp_rhs(&p.algebra, &p.ham, &mu, p.sign).unwrap_err();
        assert!(matches!(err, Error::Domain { .. }));
    }

    #[test]
    fn non_casimir_has_positive_residual() {
        let a = kida::algebra();
        let r = casimir_residual(&a, &ScalarField::coordinate(3, 0), &DualPoint::new(vec![0.0, 0.0, 1.0])).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fd_fallback_matches_analytic_gradient() {
        let p = kida::preset().unwrap();
        let raw = ScalarField::new("h", {
            let h = p.ham.energy.clone();
            move |mu| h.value(mu).unwrap()
        });
        let mu = DualPoint::new(vec![0.7, -0.1, -0.9]);
        let fd = raw.gradient(&mu).unwrap();
        let an = p.ham.gradient(&mu).unwrap();
        assert!(fd.sub(&an).max_abs() < 1e-9);
    }

    #[test]
    fn sign_parsing() {
        assert_eq!("plus".parse::<BracketSign>().unwrap(), BracketSign::Plus);
        assert_eq!("Minus".parse::<BracketSign>().unwrap(), BracketSign::Minus);
        assert!("sideways".parse::<BracketSign>().is_err());
    }

    #[test]
    fn preset_fields_are_consistent_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for preset in presets() {
            let a = &preset.algebra;
            for _ in 0..100 {
                let mu = random_mu(&mut rng, &preset);
                let scale = 1.0 + mu.norm();
                assert!(
                    preset.ham.energy.gradient_check(&mu).unwrap() <= 1e-6,
                    "{}",
                    preset.name
                );
                let rhs = lp_rhs(a, &preset.ham, &mu, preset.sign).unwrap();
                let dh = preset.ham.gradient(&mu).unwrap();
                let e_rate = dot(rhs.as_slice(), dh.as_slice());
                assert!(e_rate.abs() <= 1e-12 * rhs.norm().max(1.0) * dh.norm().max(1.0));
                for c in &preset.ham.casimirs {
                    assert!(c.gradient_check(&mu).unwrap() <= 1e-6, "{}", c.name());
                    let res = casimir_residual(a, c, &mu).unwrap();
                    assert!(res <= 1e-10 * scale.powi(3), "{} {} {res}", preset.name, c.name());
                    let dc = c.gradient(&mu).unwrap();
                    let c_rate = dot(rhs.as_slice(), dc.as_slice());
                    assert!(c_rate.abs() <= 1e-10 * rhs.norm().max(1.0) * dc.norm().max(1.0));
                    let cross = lp_bracket(a, c, &preset.ham.energy, &mu, preset.sign).unwrap();
                    assert!(cross.abs() <= 1e-10 * scale * dc.norm().max(1.0) * dh.norm().max(1.0));
                }
            }
        }
    }
}
