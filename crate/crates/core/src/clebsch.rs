//! Clebsch anti-reduction: momentum maps `M_±: T*g -> g*`, the lifted
//! canonical system on `T*g ≅ R^n x R^n`, its structural invariants and the
//! solver for initial points `M_±(q0, p0) = mu0`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::integrators::VectorField;
use crate::lie_algebra::{AlgebraVector, DualPoint, LieAlgebraSpec};
use crate::linalg;
use crate::poisson::{lp_bracket, lp_rhs, BracketSign, HamiltonianDef, ScalarField};

/// Canonical coordinates `(q, p)` on `T*g`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: AlgebraVector,
    pub p: DualPoint,
}

impl PhasePoint {
    pub fn new(q: AlgebraVector, p: DualPoint) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same dimension");
        Self { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Flat state `[q; p]` as used by the integrators.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(2 * self.dim());
        z.extend_from_slice(self.q.as_slice());
        z.extend_from_slice(self.p.as_slice());
        z
    }

    pub fn from_flat(z: &[f64]) -> Self {
        assert!(z.len() % 2 == 0, "flat phase state must have even length");
        let n = z.len() / 2;
        Self {
            q: AlgebraVector::from(&z[..n]),
            p: DualPoint::from(&z[n..]),
        }
    }

    /// `F0(q, p) = p . q`, the momentum map of the scaling symmetry.
    pub fn f0(&self) -> f64 {
        self.p.pair(&self.q)
    }
}

/// `M_±(q, p) = ∓ ad*_q p`.
pub fn momentum_map(algebra: &LieAlgebraSpec, z: &PhasePoint, sign: BracketSign) -> DualPoint {
    algebra.coadjoint(&z.q, &z.p).scaled(-sign.factor())
}

/// Jacobian blocks `(dM/dq, dM/dp)` of the momentum map, each `n x n`.
///
/// For the plus sign `dM_i/dq^j = c^k_{ij} p_k` and `dM_i/dp_k = c^k_{ij} q^j`.
pub fn momentum_map_jacobian(
    algebra: &LieAlgebraSpec,
    z: &PhasePoint,
    sign: BracketSign,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = sign.factor();
    let dq = algebra.structure_matrix(&z.p) * s;
    let dp = algebra.coadjoint_matrix(&z.q) * (-s);
    (dq, dp)
}

/// `H(q, p) = h(M_±(q, p))`.
pub fn lifted_hamiltonian(
    algebra: &LieAlgebraSpec,
    ham: &HamiltonianDef,
    z: &PhasePoint,
    sign: BracketSign,
) -> Result<f64> {
    ham.value(&momentum_map(algebra, z, sign))
}

/// Hamiltonian vector field of the anti-reduced system.
///
/// With `eta = Dh(M_±(z))` this is `±(ad_eta q, -ad*_eta p)`, which equals
/// `(dH/dp, -dH/dq)`.
pub fn anti_reduced_rhs(
    algebra: &LieAlgebraSpec,
    ham: &HamiltonianDef,
    z: &PhasePoint,
    sign: BracketSign,
) -> Result<PhasePoint> {
    let mu = momentum_map(algebra, z, sign);
    let eta = ham.gradient(&mu)?;
    let s = sign.factor();
    Ok(PhasePoint {
        q: algebra.bracket(&eta, &z.q).scaled(s),
        p: algebra.coadjoint(&eta, &z.p).scaled(-s),
    })
}

/// Invariants of the anti-reduced flow evaluated at one phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    /// `p . q`
    pub f0: f64,
    /// `kappa(q, q)`
    pub killing_q: f64,
    /// `kappa*(p, p)`; present only for semisimple algebras.
    pub killing_p: Option<f64>,
    /// `f ∘ M_±` for every Casimir; `None` where `f` is outside its domain.
    pub lifted_casimirs: Vec<(String, Option<f64>)>,
    pub hamiltonian: f64,
}

pub fn invariants(
    algebra: &LieAlgebraSpec,
    ham: &HamiltonianDef,
    z: &PhasePoint,
    sign: BracketSign,
) -> Result<InvariantSet> {
    let mu = momentum_map(algebra, z, sign);
    let killing_p = if algebra.is_semisimple() {
        Some(algebra.dual_killing(&z.p, &z.p)?)
    } else {
        None
    };
    Ok(InvariantSet {
        f0: z.f0(),
        killing_q: algebra.killing(&z.q, &z.q),
        killing_p,
        lifted_casimirs: ham
            .casimirs
            .iter()
            .map(|c| (c.name().to_string(), c.value(&mu).ok()))
            .collect(),
        hamiltonian: ham.value(&mu)?,
    })
}

/// Canonical bracket `{f ∘ M, g ∘ M}(z)`, with the chain rule through the exact
/// Jacobian of the momentum map.
pub fn lifted_canonical_bracket(
    algebra: &LieAlgebraSpec,
    f: &ScalarField,
    g: &ScalarField,
    z: &PhasePoint,
    sign: BracketSign,
) -> Result<f64> {
    let mu = momentum_map(algebra, z, sign);
    let (dq, dp) = momentum_map_jacobian(algebra, z, sign);
    let df = f.gradient(&mu)?.to_dvector();
    let dg = g.gradient(&mu)?.to_dvector();
    let fq = dq.tr_mul(&df);
    let fp = dp.tr_mul(&df);
    let gq = dq.tr_mul(&dg);
    let gp = dp.tr_mul(&dg);
    Ok(fq.dot(&gp) - gq.dot(&fp))
}

/// `|{f ∘ M, g ∘ M}(z) - {f, g}_±(M(z))|`; zero when `M_±` is a Poisson map.
pub fn poisson_map_residual(
    algebra: &LieAlgebraSpec,
    f: &ScalarField,
    g: &ScalarField,
    z: &PhasePoint,
    sign: BracketSign,
) -> Result<f64> {
    let lhs = lifted_canonical_bracket(algebra, f, g, z, sign)?;
    let rhs = lp_bracket(algebra, f, g, &momentum_map(algebra, z, sign), sign)?;
    Ok((lhs - rhs).abs())
}

/// `|TM · X_H(z) - lp_rhs(M(z))|_inf`: the anti-reduced field pushes forward
/// to the Lie-Poisson field.
pub fn pushforward_residual(
    algebra: &LieAlgebraSpec,
    ham: &HamiltonianDef,
    z: &PhasePoint,
    sign: BracketSign,
) -> Result<f64> {
    let x = anti_reduced_rhs(algebra, ham, z, sign)?;
    let (dq, dp) = momentum_map_jacobian(algebra, z, sign);
    let pushed = dq * x.q.to_dvector() + dp * x.p.to_dvector();
    let target = lp_rhs(algebra, ham, &momentum_map(algebra, z, sign), sign)?;
    Ok((pushed - target.to_dvector()).amax())
}

/// Residual of infinitesimal equivariance,
/// `|TM · xi_{T*g}(z) ± ad*_xi M(z)|_inf`, for the left (plus) or right (minus) action.
pub fn equivariance_residual(algebra: &LieAlgebraSpec, xi: &AlgebraVector, z: &PhasePoint, sign: BracketSign) -> f64 {
    let s = sign.factor();
    let gen_q = algebra.bracket(xi, &z.q).scaled(s);
    let gen_p = algebra.coadjoint(xi, &z.p).scaled(-s);
    let (dq, dp) = momentum_map_jacobian(algebra, z, sign);
    let moved = dq * gen_q.to_dvector() + dp * gen_p.to_dvector();
    let co = algebra.coadjoint(xi, &momentum_map(algebra, z, sign)).scaled(s);
    (moved + co.to_dvector()).amax()
}

/// The anti-reduced system as a flat vector field on `[q; p]`.
#[derive(Clone, Copy)]
pub struct AntiReducedField<'a> {
    pub algebra: &'a LieAlgebraSpec,
    pub ham: &'a HamiltonianDef,
    pub sign: BracketSign,
}

impl VectorField for AntiReducedField<'_> {
    fn dim(&self) -> usize {
        2 * self.algebra.dim()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.algebra.dim();
        let x = anti_reduced_rhs(self.algebra, self.ham, &PhasePoint::from_flat(y), self.sign)?;
        out[..n].copy_from_slice(x.q.as_slice());
        out[n..].copy_from_slice(x.p.as_slice());
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Initial points
// ---------------------------------------------------------------------------

/// A scalar equation on `(q, p)` used to pick one preimage of `mu0`.
#[derive(Clone)]
pub enum Constraint {
    /// `q^index = value`
    FixQ { index: usize, value: f64 },
    /// `p_index = value`
    FixP { index: usize, value: f64 },
    /// `p . q = value`
    F0(f64),
    /// `residual(z) = 0`; differentiated numerically.
    Custom {
        name: String,
        residual: Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::FixQ { index, value } => write!(f, "q{} = {value}", index + 1),
            Constraint::FixP { index, value } => write!(f, "p{} = {value}", index + 1),
            Constraint::F0(v) => write!(f, "F0 = {v}"),
            Constraint::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

impl Constraint {
    fn residual(&self, z: &PhasePoint) -> f64 {
        match self {
            Constraint::FixQ { index, value } => z.q[*index] - value,
            Constraint::FixP { index, value } => z.p[*index] - value,
            Constraint::F0(v) => z.f0() - v,
            Constraint::Custom { residual, .. } => residual(z),
        }
    }

    /// Gradient with respect to the flat state `[q; p]`.
    fn gradient(&self, z: &PhasePoint) -> Vec<f64> {
        let n = z.dim();
        let mut g = vec![0.0; 2 * n];
        match self {
            Constraint::FixQ { index, .. } => g[*index] = 1.0,
            Constraint::FixP { index, .. } => g[n + index] = 1.0,
            Constraint::F0(_) => {
                g[..n].copy_from_slice(z.p.as_slice());
                g[n..].copy_from_slice(z.q.as_slice());
            }
            Constraint::Custom { residual, .. } => {
                let flat = z.to_flat();
                let mut w = flat.clone();
                for i in 0..2 * n {
                    let h = 1e-7 * (1.0 + flat[i].abs());
                    w[i] = flat[i] + h;
                    let fp = residual(&PhasePoint::from_flat(&w));
                    w[i] = flat[i] - h;
                    let fm = residual(&PhasePoint::from_flat(&w));
                    w[i] = flat[i];
                    g[i] = (fp - fm) / (2.0 * h);
                }
            }
        }
        g
    }
}

/// Starting point of the Gauss-Newton iteration.
#[derive(Debug, Clone)]
pub enum Seed {
    Point(PhasePoint),
    /// Components drawn uniformly from `[-1, 1]` with a ChaCha8 stream.
    Random(u64),
}

#[derive(Debug, Clone)]
pub enum PinningStrategy {
    /// Keep `q` fixed and solve the linear system `M_±(q, p) = mu0` for `p`
    /// (minimum-norm solution; `B(q)` always has `q` in its kernel).
    FixedQ(AlgebraVector),
    /// Damped Gauss-Newton on `M_±(z) - mu0` augmented by `constraints`.
    GaussNewton { seed: Seed, constraints: Vec<Constraint> },
}

#[derive(Debug, Clone)]
pub struct PinningSpec {
    pub strategy: PinningStrategy,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl PinningSpec {
    pub fn fixed_q(q: AlgebraVector) -> Self {
        Self {
            strategy: PinningStrategy::FixedQ(q),
            tolerance: 1e-12,
            max_iterations: 50,
        }
    }

    pub fn gauss_newton(seed: Seed, constraints: Vec<Constraint>) -> Self {
        Self {
            strategy: PinningStrategy::GaussNewton { seed, constraints },
            tolerance: 1e-12,
            max_iterations: 50,
        }
    }
}

/// Find `(q0, p0)` with `M_±(q0, p0) = mu0` according to `pin`.
pub fn solve_initial_point(
    algebra: &LieAlgebraSpec,
    mu0: &DualPoint,
    pin: &PinningSpec,
    sign: BracketSign,
) -> Result<PhasePoint> {
    let n = algebra.dim();
    Error::check_dim(n, mu0.len())?;
    if !mu0.is_finite() {
        return Err(Error::InvalidArgument("target momentum must be finite".into()));
    }
    if !(pin.tolerance > 0.0) {
        return Err(Error::InvalidArgument("pinning tolerance must be positive".into()));
    }
    let scale = 1.0 + mu0.norm();
    match &pin.strategy {
        PinningStrategy::FixedQ(q) => {
            Error::check_dim(n, q.len())?;
            let probe = PhasePoint::new(q.clone(), DualPoint::zeros(n));
            let (_, b) = momentum_map_jacobian(algebra, &probe, sign);
            let p = linalg::lstsq_min_norm(&b, &mu0.to_dvector());
            let z = PhasePoint::new(q.clone(), DualPoint::new(p.as_slice().to_vec()));
            let residual = momentum_map(algebra, &z, sign).sub(mu0).norm();
            if residual <= pin.tolerance * scale {
                Ok(z)
            } else {
                Err(Error::SingularPinning { residual })
            }
        }
        PinningStrategy::GaussNewton { seed, constraints } => {
            let z0 = match seed {
                Seed::Point(z) => {
                    Error::check_dim(n, z.dim())?;
                    z.clone()
                }
                Seed::Random(s) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(*s);
                    let flat: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    PhasePoint::from_flat(&flat)
                }
            };
            gauss_newton(algebra, mu0, constraints, z0, pin, sign, scale)
        }
    }
}

fn pinning_residual(
    algebra: &LieAlgebraSpec,
    mu0: &DualPoint,
    constraints: &[Constraint],
    z: &PhasePoint,
    sign: BracketSign,
) -> DVector<f64> {
    let n = algebra.dim();
    let mut r = DVector::zeros(n + constraints.len());
    let m = momentum_map(algebra, z, sign);
    for i in 0..n {
        r[i] = m[i] - mu0[i];
    }
    for (c, slot) in constraints.iter().zip(n..) {
        r[slot] = c.residual(z);
    }
    r
}

fn gauss_newton(
    algebra: &LieAlgebraSpec,
    mu0: &DualPoint,
    constraints: &[Constraint],
    mut z: PhasePoint,
    pin: &PinningSpec,
    sign: BracketSign,
    scale: f64,
) -> Result<PhasePoint> {
    let n = algebra.dim();
    let rows = n + constraints.len();
    let mut r = pinning_residual(algebra, mu0, constraints, &z, sign);
    let mut rnorm = r.norm();
    for _ in 0..pin.max_iterations {
        if rnorm <= pin.tolerance * scale {
            return Ok(z);
        }
        let (dq, dp) = momentum_map_jacobian(algebra, &z, sign);
        let mut jac = DMatrix::zeros(rows, 2 * n);
        jac.view_mut((0, 0), (n, n)).copy_from(&dq);
        jac.view_mut((0, n), (n, n)).copy_from(&dp);
        for (c, row) in constraints.iter().zip(n..) {
            for (col, v) in c.gradient(&z).into_iter().enumerate() {
                jac[(row, col)] = v;
            }
        }
        let step = linalg::lstsq_min_norm(&jac, &(-&r));
        let flat = DVector::from_vec(z.to_flat());
        let mut damping = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = PhasePoint::from_flat((&flat + &step * damping).as_slice());
            let rt = pinning_residual(algebra, mu0, constraints, &trial, sign);
            let tn = rt.norm();
            if tn.is_finite() && tn < rnorm {
                z = trial;
                r = rt;
                rnorm = tn;
                accepted = true;
                break;
            }
            damping *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rnorm <= pin.tolerance * scale {
        Ok(z)
    } else {
        Err(Error::PinningDiverged {
            iterations: pin.max_iterations,
            residual: rnorm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::systems::{heavy_top, kida, rattleback, SystemPreset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn presets() -> Vec<SystemPreset> {
        vec![
            kida::preset().unwrap(),
            rattleback::preset().unwrap(),
            heavy_top::preset().unwrap(),
        ]
    }

    /// Random phase point near the preset's pinned initial point whose image is in-domain.
    fn random_z(rng: &mut ChaCha8Rng, preset: &SystemPreset, sign: BracketSign) -> PhasePoint {
        let z0 = preset.initial_point().unwrap().to_flat();
        loop {
            let flat: Vec<f64> = z0
                .iter()
                .map(|v| v + rng.random_range(-0.3..0.3) * (1.0 + v.abs()))
                .collect();
            let z = PhasePoint::from_flat(&flat);
            let mu = momentum_map(&preset.algebra, &z, sign);
            // Keep a margin from domain boundaries so finite differences stay accurate.
            let interior = (0..mu.len()).all(|i| {
                [-0.2, 0.2].iter().all(|d| {
                    let mut m = mu.clone();
                    m[i] += d * mu[i].abs();
                    preset.ham.energy.check_domain(&m).is_ok()
                        && preset.ham.casimirs.iter().all(|c| c.check_domain(&m).is_ok())
                })
            });
            if interior {
                return z;
            }
        }
    }

    /// Central differences of H, giving (dH/dp, -dH/dq).
    fn fd_hamilton_field(preset: &SystemPreset, z: &PhasePoint, sign: BracketSign) -> Vec<f64> {
        let n = preset.algebra.dim();
        let flat = z.to_flat();
        let h = |w: &[f64]| lifted_hamiltonian(&preset.algebra, &preset.ham, &PhasePoint::from_flat(w), sign).unwrap();
        let mut grad = vec![0.0; 2 * n];
        let mut w = flat.clone();
        for i in 0..2 * n {
            let step = 1e-6 * (1.0 + flat[i].abs());
            w[i] = flat[i] + step;
            let fp = h(&w);
            w[i] = flat[i] - step;
            let fm = h(&w);
            w[i] = flat[i];
            grad[i] = (fp - fm) / (2.0 * step);
        }
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            out[i] = grad[n + i];
            out[n + i] = -grad[i];
        }
        out
    }

    #[test]
    fn momentum_maps_match_closed_forms() {
        let a = kida::algebra();
        let z = PhasePoint::new(vec![0.3, -1.2, 0.7].into(), vec![1.1, 0.4, -0.9].into());
        let (q, p) = (&z.q, &z.p);
        let m = momentum_map(&a, &z, BracketSign::Plus);
        let expected = [
            q[1] * p[2] + q[2] * p[1],
            -q[2] * p[0] - q[0] * p[2],
            -q[0] * p[1] + q[1] * p[0],
        ];
        for (x, y) in m.iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        let mm = momentum_map(&a, &z, BracketSign::Minus);
        assert!(mm.add(&m).max_abs() == 0.0);

        let lambda = 4.0;
        let a = rattleback::algebra(lambda);
        let m = momentum_map(&a, &z, BracketSign::Plus);
        let expected = [lambda * q[2] * p[0], -q[2] * p[1], q[1] * p[1] - lambda * q[0] * p[0]];
        for (x, y) in m.iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }

        let zero_p = PhasePoint::new(z.q.clone(), DualPoint::zeros(3));
        assert_eq!(momentum_map(&a, &zero_p, BracketSign::Plus).max_abs(), 0.0);
    }

    #[test]
    fn rattleback_lifted_hamiltonian_expansion() {
        let p = rattleback::preset().unwrap();
        let l = 4.0_f64;
        let z = PhasePoint::new(vec![0.2, -0.5, 0.9].into(), vec![1.3, 0.6, -0.4].into());
        let (q1, q2, q3) = (z.q[0], z.q[1], z.q[2]);
        let (p1, p2) = (z.p[0], z.p[1]);
        let expected = 0.5
            * (l * l * q3 * q3 * p1 * p1 + q3 * q3 * p2 * p2 + l * l * q1 * q1 * p1 * p1 - 2.0 * l * q1 * q2 * p1 * p2
                + q2 * q2 * p2 * p2);
        let got = lifted_hamiltonian(&p.algebra, &p.ham, &z, p.sign).unwrap();
        assert!((got - expected).abs() < 1e-14);
        let z0 = PhasePoint::new(z.q.clone(), DualPoint::zeros(3));
        assert_eq!(lifted_hamiltonian(&p.algebra, &p.ham, &z0, p.sign).unwrap(), 0.0);
    }

    #[test]
    fn lifted_hamiltonian_is_scaling_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for preset in presets() {
            let z = random_z(&mut rng, &preset, preset.sign);
            let h0 = lifted_hamiltonian(&preset.algebra, &preset.ham, &z, preset.sign).unwrap();
            for s in [-1.0_f64, 1.0] {
                let zs = PhasePoint::new(z.q.scaled(s.exp()), z.p.scaled((-s).exp()));
                let hs = lifted_hamiltonian(&preset.algebra, &preset.ham, &zs, preset.sign).unwrap();
                assert!((hs - h0).abs() <= 1e-13 * h0.abs().max(1.0), "{}", preset.name);
            }
        }
    }

    #[test]
    fn anti_reduced_components_from_closed_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = rattleback::preset().unwrap();
        for _ in 0..20 {
            let z = random_z(&mut rng, &r, r.sign);
            let x = anti_reduced_rhs(&r.algebra, &r.ham, &z, r.sign).unwrap();
            assert_eq!(x.q[2], 0.0);
        }
        let k = kida::preset().unwrap();
        let eps = 0.5;
        for _ in 0..20 {
            let z = random_z(&mut rng, &k, k.sign);
            let x = anti_reduced_rhs(&k.algebra, &k.ham, &z, k.sign).unwrap();
            assert!((x.q[2] + eps * z.q[0]).abs() < 1e-14);
            assert!((x.p[2] - eps * z.p[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn anti_reduced_field_is_hamiltonian_for_both_signs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for preset in presets() {
            for sign in [BracketSign::Plus, BracketSign::Minus] {
                for _ in 0..25 {
                    let z = random_z(&mut rng, &preset, sign);
                    let x = anti_reduced_rhs(&preset.algebra, &preset.ham, &z, sign).unwrap();
                    let fd = fd_hamilton_field(&preset, &z, sign);
                    let xf = x.to_flat();
                    let err = xf.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let scale = linalg::max_abs(&xf).max(1.0);
                    assert!(err / scale <= 1e-6, "{} {sign}: {err}", preset.name);
                }
            }
        }
    }

    #[test]
    fn invariant_set_on_presets() {
        let k = kida::preset().unwrap();
        let z = PhasePoint::new(vec![0.5, -0.3, 0.8].into(), vec![0.2, 0.9, -0.1].into());
        let inv = invariants(&k.algebra, &k.ham, &z, k.sign).unwrap();
        let (q, p) = (&z.q, &z.p);
        assert!((inv.killing_q - 2.0 * (q[0] * q[0] + q[1] * q[1] - q[2] * q[2])).abs() < 1e-14);
        let kp = inv.killing_p.unwrap();
        // kappa* uses the inverse Killing matrix diag(1/2, 1/2, -1/2).
        assert!((kp - 0.5 * (p[0] * p[0] + p[1] * p[1] - p[2] * p[2])).abs() < 1e-14);
        assert!((inv.f0 - dot(q.as_slice(), p.as_slice())).abs() < 1e-15);

        let h = heavy_top::preset().unwrap();
        let zf: Vec<f64> = (0..18).map(|i| (i as f64 * 0.37).sin()).collect();
        let z = PhasePoint::from_flat(&zf);
        let inv = invariants(&h.algebra, &h.ham, &z, h.sign).unwrap();
        let qq: f64 = z.q.iter().take(3).map(|x| x * x).sum();
        assert!((inv.killing_q + 6.0 * qq).abs() < 1e-13);
        assert!(inv.killing_p.is_none());

        let z = PhasePoint::new(vec![0.5, -0.3, 0.8].into(), DualPoint::zeros(3));
        let inv = invariants(&k.algebra, &k.ham, &z, k.sign).unwrap();
        assert_eq!(inv.f0, 0.0);
        assert_eq!(inv.lifted_casimirs[0].1, Some(0.0));
    }

    #[test]
    fn poisson_map_property_for_kida_coordinates() {
        let a = kida::algebra();
        let z = PhasePoint::new(vec![0.4, -0.8, 1.5].into(), vec![-0.6, 0.3, 0.2].into());
        let f = ScalarField::coordinate(3, 0);
        let g = ScalarField::coordinate(3, 1);
        assert!(poisson_map_residual(&a, &f, &g, &z, BracketSign::Plus).unwrap() <= 1e-12);
        assert_eq!(poisson_map_residual(&a, &f, &f, &z, BracketSign::Plus).unwrap(), 0.0);
    }

    #[test]
    fn structural_identities_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for preset in presets() {
            let a = &preset.algebra;
            let n = a.dim();
            for sign in [BracketSign::Plus, BracketSign::Minus] {
                for _ in 0..30 {
                    let z = random_z(&mut rng, &preset, sign);
                    let scale = 1.0 + z.q.norm() * z.p.norm();
                    let pr = pushforward_residual(a, &preset.ham, &z, sign).unwrap();
                    let x = anti_reduced_rhs(a, &preset.ham, &z, sign).unwrap();
                    assert!(pr <= 1e-12 * scale.max(x.to_flat().iter().fold(1.0, |m: f64, v| m.max(v.abs()))));

                    let xi = AlgebraVector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
                    assert!(equivariance_residual(a, &xi, &z, sign) <= 1e-12 * scale);

                    // Time derivatives of the quadratic invariants vanish along X_H.
                    let df0 = x.q.iter().zip(z.p.iter()).map(|(a, b)| a * b).sum::<f64>()
                        + x.p.iter().zip(z.q.iter()).map(|(a, b)| a * b).sum::<f64>();
                    let xs = x.q.norm() * z.p.norm() + x.p.norm() * z.q.norm();
                    assert!(df0.abs() <= 1e-12 * xs.max(1.0));
                    let dkq = 2.0 * a.killing(&z.q, &x.q);
                    assert!(dkq.abs() <= 1e-12 * (z.q.norm() * x.q.norm()).max(1.0) * 10.0);
                    if a.is_semisimple() {
                        let dkp = 2.0 * a.dual_killing(&z.p, &x.p).unwrap();
                        assert!(dkp.abs() <= 1e-12 * (z.p.norm() * x.p.norm()).max(1.0));
                    }

                    // Lifted Casimirs Poisson-commute with H.
                    for c in &preset.ham.casimirs {
                        let b = lifted_canonical_bracket(a, c, &preset.ham.energy, &z, sign).unwrap();
                        let (dq, dp) = momentum_map_jacobian(a, &z, sign);
                        let mu = momentum_map(a, &z, sign);
                        let dc = c.gradient(&mu).unwrap().to_dvector();
                        let grad_scale = (dq.tr_mul(&dc).norm() + dp.tr_mul(&dc).norm())
                            * x.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt();
                        assert!(b.abs() <= 1e-10 * grad_scale.max(1.0), "{} {}", preset.name, c.name());
                    }
                }
            }
        }
    }

    #[test]
    fn rattleback_pinned_solve_matches_hand_solution() {
        let r = rattleback::preset().unwrap();
        let z = solve_initial_point(&r.algebra, &r.mu0, &r.pinning, r.sign).unwrap();
        let q = [0.1, -5.1, 0.1];
        let p = [0.025, -0.1, 4.875];
        for i in 0..3 {
            assert!((z.q[i] - q[i]).abs() <= 1e-12, "q{i} = {}", z.q[i]);
            assert!((z.p[i] - p[i]).abs() <= 1e-12, "p{i} = {}", z.p[i]);
        }
    }

    #[test]
    fn fixed_q_solves() {
        let a = kida::algebra();
        let q = AlgebraVector::new(vec![0.3, -0.4, 1.2]);
        let z = solve_initial_point(
            &a,
            &DualPoint::zeros(3),
            &PinningSpec::fixed_q(q.clone()),
            BracketSign::Plus,
        )
        .unwrap();
        assert_eq!(z.p.max_abs(), 0.0);

        // <mu0, q> = 0 is reachable.
        let mu0 = DualPoint::new(vec![0.4, 0.3, 0.0]);
        let q = AlgebraVector::new(vec![0.0, 0.0, 1.0]);
        let z = solve_initial_point(&a, &mu0, &PinningSpec::fixed_q(q.clone()), BracketSign::Plus).unwrap();
        assert!(momentum_map(&a, &z, BracketSign::Plus).sub(&mu0).norm() <= 1e-12);

        // q = (1,0,0) cannot produce mu1 = 1.
        let err = solve_initial_point(
            &a,
            &DualPoint::new(vec![1.0, 0.2, -1.0]),
            &PinningSpec::fixed_q(AlgebraVector::new(vec![1.0, 0.0, 0.0])),
            BracketSign::Plus,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularPinning { .. }));
    }

    #[test]
    fn non_surjective_target_reports_divergence() {
        // so(2,1) + R has a center; mu0 pairing nonzero with it is unreachable.
        let base = kida::algebra();
        let a =
            LieAlgebraSpec::from_fn(4, |k, i, j| if k < 3 && i < 3 && j < 3 { base.c(k, i, j) } else { 0.0 }).unwrap();
        let mu0 = DualPoint::new(vec![0.3, 0.1, -0.4, 1.0]);
        let pin = PinningSpec::gauss_newton(Seed::Random(1), vec![]);
        let err = solve_initial_point(&a, &mu0, &pin, BracketSign::Plus).unwrap_err();
        match err {
            Error::PinningDiverged { residual, .. } => assert!(residual >= 0.99),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_preset_solves_reach_tolerance() {
        for preset in presets() {
            let z = preset.initial_point().unwrap();
            let res = momentum_map(&preset.algebra, &z, preset.sign).sub(&preset.mu0).norm();
            assert!(res <= 1e-12, "{}: {res}", preset.name);
        }
    }

    #[test]
    fn anti_reduced_rhs_matches_preset_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for preset in presets() {
            let oracle = preset.closed_form_antireduced_rhs.clone().unwrap();
            for _ in 0..100 {
                let z = random_z(&mut rng, &preset, preset.sign);
                let x = anti_reduced_rhs(&preset.algebra, &preset.ham, &z, preset.sign).unwrap();
                let y = oracle(&z);
                let scale = linalg::max_abs(&x.to_flat()).max(1.0);
                for (a, b) in x.to_flat().iter().zip(y.to_flat()) {
                    assert!((a - b).abs() <= 1e-13 * scale, "{}: {a} vs {b}", preset.name);
                }
            }
        }
    }
}
