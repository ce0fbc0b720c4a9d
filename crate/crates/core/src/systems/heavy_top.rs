//! Heavy top on a movable base with a kinetic-shaping controller, on
//! `(se(3) ⋉ R^3)*` with coordinates `mu = (Pi, P, Gamma)` and the minus bracket.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::clebsch::{Constraint, PhasePoint, PinningSpec, Seed};
use crate::error::{Error, Result};
use crate::lie_algebra::{AlgebraVector, DualPoint, LieAlgebraSpec};
use crate::poisson::{BracketSign, HamiltonianDef, ScalarField};

use super::{apply_overrides, SystemPreset};

fn hat(v: &[f64]) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

fn v3(s: &[f64]) -> Vector3<f64> {
    Vector3::new(s[0], s[1], s[2])
}

/// Structure matrix `S(mu) = -[[Pi^, P^, Gamma^], [P^, 0, 0], [Gamma^, 0, 0]]`.
pub fn algebra() -> LieAlgebraSpec {
    LieAlgebraSpec::from_structure_matrix(9, |mu| {
        let mut s = DMatrix::zeros(9, 9);
        let pi = hat(&mu[0..3]);
        let p = hat(&mu[3..6]);
        let g = hat(&mu[6..9]);
        s.view_mut((0, 0), (3, 3)).copy_from(&(-pi));
        s.view_mut((0, 3), (3, 3)).copy_from(&(-p));
        s.view_mut((0, 6), (3, 3)).copy_from(&(-g));
        s.view_mut((3, 0), (3, 3)).copy_from(&(-p));
        s.view_mut((6, 0), (3, 3)).copy_from(&(-g));
        s
    })
    .expect("static structure constants")
    .with_labels(
        ["Pi1", "Pi2", "Pi3", "P1", "P2", "P3", "Gamma1", "Gamma2", "Gamma3"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
    )
    .expect("nine labels")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTopParams {
    /// Base mass.
    pub big_m: f64,
    /// Top mass.
    pub m: f64,
    pub i1: f64,
    pub i3: f64,
    pub l: f64,
    pub g: f64,
    /// Controller gain as a multiple of `m^2 l^2 / I1`.
    pub rho_factor: f64,
    pub chi: [f64; 3],
    pub omega0: [f64; 3],
    pub v0: [f64; 3],
    pub theta0: f64,
    pub phi0: f64,
}

impl Default for HeavyTopParams {
    fn default() -> Self {
        Self {
            big_m: 0.44,
            m: 0.7,
            i1: 0.2,
            i3: 0.24,
            l: 0.215,
            g: 9.8,
            rho_factor: 0.9,
            chi: [0.0, 0.0, 1.0],
            omega0: [0.1, 0.2, 0.1],
            v0: [0.0, 0.0, 0.0],
            theta0: PI / 3.0,
            phi0: PI / 20.0,
        }
    }
}

impl HeavyTopParams {
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let [c1, c2, c3] = &mut self.chi;
        let [w1, w2, w3] = &mut self.omega0;
        let [u1, u2, u3] = &mut self.v0;
        apply_overrides(
            &mut [
                ("M", &mut self.big_m),
                ("m", &mut self.m),
                ("I1", &mut self.i1),
                ("I3", &mut self.i3),
                ("l", &mut self.l),
                ("g", &mut self.g),
                ("rho_factor", &mut self.rho_factor),
                ("chi1", c1),
                ("chi2", c2),
                ("chi3", c3),
                ("omega0_1", w1),
                ("omega0_2", w2),
                ("omega0_3", w3),
                ("v0_1", u1),
                ("v0_2", u2),
                ("v0_3", u3),
                ("theta0", &mut self.theta0),
                ("phi0", &mut self.phi0),
            ],
            overrides,
        )?;
        Ok(self)
    }

    pub fn total_mass(&self) -> f64 {
        self.big_m + self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho_factor * self.m * self.m * self.l * self.l / self.i1
    }

    fn inertia(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(self.i1, self.i1, self.i3))
    }

    /// Controlled mass matrix `[[I, m l chi^], [-m l chi^, rho 1]]`.
    pub fn controlled_mass_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(6, 6);
        let c = hat(&self.chi) * (self.m * self.l);
        g.view_mut((0, 0), (3, 3)).copy_from(&self.inertia());
        g.view_mut((0, 3), (3, 3)).copy_from(&c);
        g.view_mut((3, 0), (3, 3)).copy_from(&(-c));
        g.view_mut((3, 3), (3, 3))
            .copy_from(&(Matrix3::identity() * self.rho()));
        g
    }

    /// Initial momentum from body angular velocity, base velocity and the
    /// spherical angles of the vertical.
    pub fn initial_momentum(&self) -> DualPoint {
        let ml = self.m * self.l;
        let chi = v3(&self.chi);
        let om = v3(&self.omega0);
        let v = v3(&self.v0);
        let pi = self.inertia() * om + chi.cross(&v) * ml;
        let p = -chi.cross(&om) * ml + v * self.total_mass();
        let (t, f) = (self.theta0, self.phi0);
        DualPoint::new(vec![
            pi[0],
            pi[1],
            pi[2],
            p[0],
            p[1],
            p[2],
            t.cos() * f.sin(),
            t.sin() * f.sin(),
            f.cos(),
        ])
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.big_m, self.m, self.i1, self.i3, self.l, self.g, self.rho_factor];
        if vals.iter().any(|v| !v.is_finite()) || self.i1 <= 0.0 || self.i3 <= 0.0 || self.rho() == 0.0 {
            return Err(Error::InvalidArgument(
                "heavy-top parameters must be finite with positive inertia and nonzero rho".into(),
            ));
        }
        Ok(())
    }
}

/// Controlled energy `1/2 x^T G_c^{-1} x + m g l chi . Gamma`, `x = (Pi, P)`.
pub fn energy(params: &HeavyTopParams) -> Result<ScalarField> {
    params.validate()?;
    let ginv = params
        .controlled_mass_matrix()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("controlled mass matrix is singular".into()))?;
    let ginv = (&ginv + ginv.transpose()) * 0.5;
    let ginv2 = ginv.clone();
    let mgl = params.m * params.g * params.l;
    let chi = params.chi;
    Ok(ScalarField::new("h_c", move |mu| {
        let mut s = 0.0;
        for i in 0..6 {
            let mut row = 0.0;
            for j in 0..6 {
                row += ginv[(i, j)] * mu[j];
            }
            s += mu[i] * row;
        }
        0.5 * s + mgl * (chi[0] * mu[6] + chi[1] * mu[7] + chi[2] * mu[8])
    })
    .with_gradient(move |mu| {
        let mut g = vec![0.0; 9];
        for (i, gi) in g.iter_mut().take(6).enumerate() {
            *gi = (0..6).map(|j| ginv2[(i, j)] * mu[j]).sum();
        }
        for k in 0..3 {
            g[6 + k] = mgl * chi[k];
        }
        AlgebraVector::new(g)
    }))
}

/// `h_c` written with the shaped inertia `J_c`, mass `M_c` and coupling `k_c`;
/// valid for `chi = e3` and `I1 = I2`. Used as an independent check.
pub fn energy_closed_form(params: &HeavyTopParams, mu: &DualPoint) -> f64 {
    let (m, l, rho, i1, i3) = (params.m, params.l, params.rho(), params.i1, params.i3);
    let m2l2 = m * m * l * l;
    let jc = [i1 - m2l2 / rho, i1 - m2l2 / rho, i3];
    let mc = [rho - m2l2 / i1, rho - m2l2 / i1, rho];
    let kc = 1.0 / (i1 * rho - m2l2);
    let pi = v3(&mu.as_slice()[0..3]);
    let p = v3(&mu.as_slice()[3..6]);
    let gam = v3(&mu.as_slice()[6..9]);
    let chi = v3(&params.chi);
    let quad: f64 = (0..3).map(|i| pi[i] * pi[i] / jc[i] + p[i] * p[i] / mc[i]).sum();
    0.5 * (quad + 2.0 * kc * m * l * pi.dot(&p.cross(&chi))) + m * params.g * l * chi.dot(&gam)
}

pub fn casimirs() -> Vec<ScalarField> {
    let f1 = ScalarField::new("f1", |mu| {
        let p = &mu.as_slice()[3..6];
        p.iter().map(|x| x * x).sum()
    })
    .with_gradient(|mu| {
        let mut g = vec![0.0; 9];
        for k in 0..3 {
            g[3 + k] = 2.0 * mu[3 + k];
        }
        AlgebraVector::new(g)
    });
    let f2 = ScalarField::new("f2", |mu| {
        let c = v3(&mu.as_slice()[3..6]).cross(&v3(&mu.as_slice()[6..9]));
        c.norm_squared()
    })
    .with_gradient(|mu| {
        let p = v3(&mu.as_slice()[3..6]);
        let gam = v3(&mu.as_slice()[6..9]);
        let c = p.cross(&gam);
        // d|P x G|^2 = 2 (P x G) . (dP x G + P x dG)
        let dp = gam.cross(&c) * 2.0;
        let dg = c.cross(&p) * 2.0;
        let mut g = vec![0.0; 9];
        for k in 0..3 {
            g[3 + k] = dp[k];
            g[6 + k] = dg[k];
        }
        AlgebraVector::new(g)
    });
    let f3 = ScalarField::new("f3", |mu| {
        let g = &mu.as_slice()[6..9];
        g.iter().map(|x| x * x).sum()
    })
    .with_gradient(|mu| {
        let mut g = vec![0.0; 9];
        for k in 0..3 {
            g[6 + k] = 2.0 * mu[6 + k];
        }
        AlgebraVector::new(g)
    });
    vec![f1, f2, f3]
}

pub fn hamiltonian(params: &HeavyTopParams) -> Result<HamiltonianDef> {
    Ok(HamiltonianDef::new(energy(params)?, casimirs()))
}

/// `Pi' = Pi x h_Pi + P x h_P + Gamma x h_Gamma`, `P' = P x h_Pi`, `Gamma' = Gamma x h_Pi`.
pub fn closed_form_lp_rhs(ham: HamiltonianDef) -> impl Fn(&DualPoint) -> DualPoint + Send + Sync {
    move |mu| {
        let dh = ham.gradient(mu).expect("energy is defined everywhere");
        let s = mu.as_slice();
        let (pi, p, gam) = (v3(&s[0..3]), v3(&s[3..6]), v3(&s[6..9]));
        let d = dh.as_slice();
        let (hpi, hp, hg) = (v3(&d[0..3]), v3(&d[3..6]), v3(&d[6..9]));
        let a = pi.cross(&hpi) + p.cross(&hp) + gam.cross(&hg);
        let b = p.cross(&hpi);
        let c = gam.cross(&hpi);
        DualPoint::new(vec![a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2]])
    }
}

/// `M_-(a, b) = -(a1 x b1 + a2 x b2 + a3 x b3, a1 x b2, a1 x b3)`.
pub fn closed_form_momentum_map(z: &PhasePoint) -> DualPoint {
    let q = z.q.as_slice();
    let p = z.p.as_slice();
    let (a1, a2, a3) = (v3(&q[0..3]), v3(&q[3..6]), v3(&q[6..9]));
    let (b1, b2, b3) = (v3(&p[0..3]), v3(&p[3..6]), v3(&p[6..9]));
    let x = -(a1.cross(&b1) + a2.cross(&b2) + a3.cross(&b3));
    let y = -a1.cross(&b2);
    let w = -a1.cross(&b3);
    DualPoint::new(vec![x[0], x[1], x[2], y[0], y[1], y[2], w[0], w[1], w[2]])
}

/// Anti-reduced field for the minus sign written with cross products,
/// `eta = (eta1, eta2, eta3) = Dh(M_-)`.
pub fn closed_form_antireduced_rhs(ham: HamiltonianDef) -> impl Fn(&PhasePoint) -> PhasePoint + Send + Sync {
    move |z| {
        let mu = closed_form_momentum_map(z);
        let eta = ham.gradient(&mu).expect("energy is defined everywhere");
        let e = eta.as_slice();
        let (e1, e2, e3) = (v3(&e[0..3]), v3(&e[3..6]), v3(&e[6..9]));
        let q = z.q.as_slice();
        let p = z.p.as_slice();
        let (a1, a2, a3) = (v3(&q[0..3]), v3(&q[3..6]), v3(&q[6..9]));
        let (b1, b2, b3) = (v3(&p[0..3]), v3(&p[3..6]), v3(&p[6..9]));
        let qd = [
            a1.cross(&e1),
            a2.cross(&e1) + a1.cross(&e2),
            a3.cross(&e1) + a1.cross(&e3),
        ];
        let pd = [
            b1.cross(&e1) + b2.cross(&e2) + b3.cross(&e3),
            b2.cross(&e1),
            b3.cross(&e1),
        ];
        let flat = |vs: [Vector3<f64>; 3]| vs.iter().flat_map(|v| [v[0], v[1], v[2]]).collect::<Vec<f64>>();
        PhasePoint::new(AlgebraVector::new(flat(qd)), DualPoint::new(flat(pd)))
    }
}

/// Pin `a1 = Gamma0 x P0` and `b1 = 0`; the rest is a minimum-norm Gauss-Newton solve.
pub fn pinning(mu0: &DualPoint) -> PinningSpec {
    let p0 = v3(&mu0.as_slice()[3..6]);
    let g0 = v3(&mu0.as_slice()[6..9]);
    let a1 = g0.cross(&p0);
    let mut constraints = Vec::with_capacity(6);
    for k in 0..3 {
        constraints.push(Constraint::FixQ { index: k, value: a1[k] });
    }
    for k in 0..3 {
        constraints.push(Constraint::FixP { index: k, value: 0.0 });
    }
    let q = vec![a1[0], a1[1], a1[2], 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
    let p = vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5];
    PinningSpec::gauss_newton(
        Seed::Point(PhasePoint::new(AlgebraVector::new(q), DualPoint::new(p))),
        constraints,
    )
}

pub fn preset() -> Result<SystemPreset> {
    preset_with(&HeavyTopParams::default())
}

pub fn preset_with(params: &HeavyTopParams) -> Result<SystemPreset> {
    let ham = hamiltonian(params)?;
    let mu0 = params.initial_momentum();
    let p = params;
    Ok(SystemPreset {
        name: "heavy_top".into(),
        algebra: algebra(),
        ham: ham.clone(),
        sign: BracketSign::Minus,
        params: vec![
            ("M".into(), p.big_m),
            ("m".into(), p.m),
            ("I1".into(), p.i1),
            ("I3".into(), p.i3),
            ("l".into(), p.l),
            ("g".into(), p.g),
            ("rho_factor".into(), p.rho_factor),
            ("rho".into(), p.rho()),
            ("chi1".into(), p.chi[0]),
            ("chi2".into(), p.chi[1]),
            ("chi3".into(), p.chi[2]),
            ("theta0".into(), p.theta0),
            ("phi0".into(), p.phi0),
        ],
        pinning: pinning(&mu0),
        mu0,
        recommended_dt: 0.01,
        recommended_t_end: 30.0,
        closed_form_lp_rhs: Some(Arc::new(closed_form_lp_rhs(ham.clone()))),
        closed_form_antireduced_rhs: Some(Arc::new(closed_form_antireduced_rhs(ham))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clebsch::momentum_map;

    #[test]
    fn energy_matches_shaped_inertia_form() {
        let params = HeavyTopParams::default();
        let h = energy(&params).unwrap();
        for k in 0..20 {
            let mu = DualPoint::new((0..9).map(|i| ((k * 9 + i) as f64 * 0.731).sin()).collect());
            let a = h.value(&mu).unwrap();
            let b = energy_closed_form(&params, &mu);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn mass_matrix_is_symmetric() {
        let g = HeavyTopParams::default().controlled_mass_matrix();
        assert!((&g - g.transpose()).amax() == 0.0);
    }

    #[test]
    fn initial_momentum_values() {
        let p = HeavyTopParams::default();
        let mu = p.initial_momentum();
        assert!((mu[0] - 0.02).abs() < 1e-16);
        assert!((mu[1] - 0.04).abs() < 1e-16);
        assert!((mu[2] - 0.024).abs() < 1e-16);
        // P0 = -m l chi x Omega0 = -m l (-0.2, 0.1, 0)
        assert!((mu[3] - 0.7 * 0.215 * 0.2).abs() < 1e-16);
        assert!((mu[4] + 0.7 * 0.215 * 0.1).abs() < 1e-16);
        assert_eq!(mu[5], 0.0);
        let g2: f64 = mu.as_slice()[6..9].iter().map(|x| x * x).sum();
        assert!((g2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn momentum_map_matches_cross_products() {
        let a = algebra();
        for k in 0..10 {
            let flat: Vec<f64> = (0..18).map(|i| ((k * 18 + i) as f64 * 1.37).cos()).collect();
            let z = PhasePoint::from_flat(&flat);
            let m = momentum_map(&a, &z, BracketSign::Minus);
            assert!(m.sub(&closed_form_momentum_map(&z)).max_abs() < 1e-14);
        }
    }

    #[test]
    fn pinned_point_respects_constraints() {
        let p = preset().unwrap();
        let z = p.initial_point().unwrap();
        let a1 = v3(&p.mu0.as_slice()[6..9]).cross(&v3(&p.mu0.as_slice()[3..6]));
        for k in 0..3 {
            assert!((z.q[k] - a1[k]).abs() <= 1e-12);
            assert!(z.p[k].abs() <= 1e-12);
        }
    }
}
