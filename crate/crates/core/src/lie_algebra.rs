//! Finite-dimensional Lie algebras given by structure constants.
//!
//! A [`LieAlgebraSpec`] stores the dense tensor `c[k][i][j]` with
//! `[E_i, E_j] = c^k_{ij} E_k`. Everything else in the crate (brackets,
//! coadjoint actions, momentum maps, Killing forms) is derived from it.
//!
//! Coadjoint convention: `<ad*_x a, y> = <a, [x, y]>`, i.e.
//! `(ad*_x a)_j = a_k c^k_{ij} x^i`.

use std::fmt;
use std::fmt::Write as _;
use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

macro_rules! coordinate_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(components: Vec<f64>) -> Self {
                Self(components)
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![0.0; n])
            }

            /// The `i`-th basis element (0-based).
            pub fn basis(n: usize, i: usize) -> Self {
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                Self(v)
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn as_mut_slice(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn into_vec(self) -> Vec<f64> {
                self.0
            }

            pub fn iter(&self) -> std::slice::Iter<'_, f64> {
                self.0.iter()
            }

            pub fn norm(&self) -> f64 {
                linalg::norm2(&self.0)
            }

            pub fn max_abs(&self) -> f64 {
                linalg::max_abs(&self.0)
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }

            pub fn scaled(&self, s: f64) -> Self {
                Self(self.0.iter().map(|x| s * x).collect())
            }

            pub fn sub(&self, other: &Self) -> Self {
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
            }

            pub fn add(&self, other: &Self) -> Self {
                Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
            }

            pub(crate) fn to_dvector(&self) -> DVector<f64> {
                DVector::from_column_slice(&self.0)
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(v)
            }
        }

        impl From<&[f64]> for $name {
            fn from(v: &[f64]) -> Self {
                Self(v.to_vec())
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $name {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }
    };
}

coordinate_vector!(
    /// An element `x = x^i E_i` of the Lie algebra.
    AlgebraVector
);
coordinate_vector!(
    /// An element `mu = mu_i E*^i` of the dual of the Lie algebra.
    DualPoint
);

impl DualPoint {
    /// The natural pairing `<mu, x>`.
    pub fn pair(&self, x: &AlgebraVector) -> f64 {
        linalg::dot(&self.0, &x.0)
    }
}

/// A single nonzero structure constant `c^k_{ij}` (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    k: usize,
    i: usize,
    j: usize,
    value: f64,
}

/// Lie algebra in a fixed basis.
#[derive(Debug, Clone)]
pub struct LieAlgebraSpec {
    n: usize,
    c: Vec<f64>,
    labels: Vec<String>,
    nonzeros: Vec<Entry>,
    killing: DMatrix<f64>,
    killing_rank: usize,
    killing_inverse: Option<DMatrix<f64>>,
}

/// Algebraic diagnostics for a [`LieAlgebraSpec`].
#[derive(Debug, Clone)]
pub struct AlgebraReport {
    pub dimension: usize,
    pub jacobi_residual: f64,
    pub antisymmetry_residual: f64,
    pub center_dimension: usize,
    pub killing_matrix: DMatrix<f64>,
    pub killing_rank: usize,
    pub semisimple: bool,
}

impl AlgebraReport {
    /// Antisymmetry and Jacobi hold to within `tol`.
    pub fn is_lie_algebra(&self, tol: f64) -> bool {
        self.antisymmetry_residual <= tol && self.jacobi_residual <= tol
    }
}

impl LieAlgebraSpec {
    /// Build from the dense tensor, laid out as `c[(k * n + i) * n + j] = c^k_{ij}`.
    ///
    /// No algebraic checks are made here; run [`audit`](Self::audit) for that.
    pub fn from_tensor(n: usize, c: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Error::check_dim(n * n * n, c.len())?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("structure constants must be finite".into()));
        }
        let mut nonzeros = Vec::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let value = c[(k * n + i) * n + j];
                    if value != 0.0 {
                        nonzeros.push(Entry { k, i, j, value });
                    }
                }
            }
        }
        let killing = killing_from_tensor(n, &c);
        let killing_rank = linalg::numerical_rank(&killing);
        let killing_inverse = if killing_rank == n {
            killing.clone().try_inverse()
        } else {
            None
        };
        Ok(Self {
            n,
            c,
            labels: (1..=n).map(|i| format!("E{i}")).collect(),
            nonzeros,
            killing,
            killing_rank,
            killing_inverse,
        })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut c = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    c[(k * n + i) * n + j] = f(k, i, j);
                }
            }
        }
        Self::from_tensor(n, c)
    }

    /// Build from brackets of basis elements `[E_i, E_j] = value * E_k` given
    /// for `i < j` as `(i, j, k, value)` (0-based); antisymmetric partners are filled in.
    pub fn from_brackets(n: usize, brackets: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut c = vec![0.0; n * n * n];
        for &(i, j, k, value) in brackets {
            if i >= n || j >= n || k >= n {
                return Err(Error::InvalidArgument(format!(
                    "bracket index out of range for dimension {n}"
                )));
            }
            c[(k * n + i) * n + j] += value;
            c[(k * n + j) * n + i] -= value;
        }
        Self::from_tensor(n, c)
    }

    /// Unpack the family of matrices `S(mu)_{ij} = mu_k c^k_{ij}` (linear in `mu`),
    /// which is how Lie-Poisson structures are usually displayed.
    pub fn from_structure_matrix(n: usize, s: impl Fn(&[f64]) -> DMatrix<f64>) -> Result<Self> {
        let mut c = vec![0.0; n * n * n];
        let mut mu = vec![0.0; n];
        for k in 0..n {
            mu.iter_mut().for_each(|m| *m = 0.0);
            mu[k] = 1.0;
            let m = s(&mu);
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.nrows(),
                });
            }
            for i in 0..n {
                for j in 0..n {
                    c[(k * n + i) * n + j] = m[(i, j)];
                }
            }
        }
        Self::from_tensor(n, c)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        Error::check_dim(self.n, labels.len())?;
        self.labels = labels;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// `c^k_{ij}` (0-based).
    #[inline]
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c[(k * self.n + i) * self.n + j]
    }

    pub fn tensor(&self) -> &[f64] {
        &self.c
    }

    /// `[x, y]^k = c^k_{ij} x^i y^j`.
    ///
    /// Panics if the dimensions do not match the algebra.
    pub fn bracket(&self, x: &AlgebraVector, y: &AlgebraVector) -> AlgebraVector {
        assert_eq!(x.len(), self.n, "bracket: x has wrong dimension");
        assert_eq!(y.len(), self.n, "bracket: y has wrong dimension");
        let mut out = vec![0.0; self.n];
        for e in &self.nonzeros {
            out[e.k] += e.value * x[e.i] * y[e.j];
        }
        AlgebraVector(out)
    }

    /// `(ad*_x a)_j = a_k c^k_{ij} x^i`.
    ///
    /// Panics if the dimensions do not match the algebra.
    pub fn coadjoint(&self, x: &AlgebraVector, a: &DualPoint) -> DualPoint {
        assert_eq!(x.len(), self.n, "coadjoint: x has wrong dimension");
        assert_eq!(a.len(), self.n, "coadjoint: covector has wrong dimension");
        let mut out = vec![0.0; self.n];
        for e in &self.nonzeros {
            out[e.j] += e.value * a[e.k] * x[e.i];
        }
        DualPoint(out)
    }

    /// Matrix of `ad_x` acting on coordinates: `(ad_x)_{kj} = c^k_{ij} x^i`.
    pub fn ad_matrix(&self, x: &AlgebraVector) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for e in &self.nonzeros {
            m[(e.k, e.j)] += e.value * x[e.i];
        }
        m
    }

    /// Matrix of `ad*_x`; the transpose of [`ad_matrix`](Self::ad_matrix).
    pub fn coadjoint_matrix(&self, x: &AlgebraVector) -> DMatrix<f64> {
        self.ad_matrix(x).transpose()
    }

    /// `S(mu)_{ij} = mu_k c^k_{ij}`, the Lie-Poisson structure matrix at `mu`.
    pub fn structure_matrix(&self, mu: &DualPoint) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for e in &self.nonzeros {
            m[(e.i, e.j)] += e.value * mu[e.k];
        }
        m
    }

    /// `kappa_{ij} = c^l_{ik} c^k_{jl}`.
    pub fn killing_matrix(&self) -> &DMatrix<f64> {
        &self.killing
    }

    pub fn killing(&self, x: &AlgebraVector, y: &AlgebraVector) -> f64 {
        let xv = x.to_dvector();
        let yv = y.to_dvector();
        xv.dot(&(&self.killing * yv))
    }

    pub fn is_semisimple(&self) -> bool {
        self.killing_inverse.is_some()
    }

    pub fn kappa_flat(&self, x: &AlgebraVector) -> DualPoint {
        let v = &self.killing * x.to_dvector();
        DualPoint(v.as_slice().to_vec())
    }

    /// Inverse of [`kappa_flat`](Self::kappa_flat); requires a nondegenerate Killing form.
    pub fn kappa_sharp(&self, a: &DualPoint) -> Result<AlgebraVector> {
        Error::check_dim(self.n, a.len())?;
        let inv = self.killing_inverse.as_ref().ok_or(Error::NotSemisimple {
            rank: self.killing_rank,
            dim: self.n,
        })?;
        let v = inv * a.to_dvector();
        Ok(AlgebraVector(v.as_slice().to_vec()))
    }

    /// `kappa*(a, b) = <a, kappa_sharp(b)>`.
    pub fn dual_killing(&self, a: &DualPoint, b: &DualPoint) -> Result<f64> {
        Ok(a.pair(&self.kappa_sharp(b)?))
    }

    pub fn audit(&self) -> AlgebraReport {
        let n = self.n;
        let mut antisymmetry_residual = 0.0_f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    antisymmetry_residual = antisymmetry_residual.max((self.c(k, i, j) + self.c(k, j, i)).abs());
                }
            }
        }

        let mut jacobi_residual = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for m in 0..n {
                        let mut s = 0.0;
                        for k in 0..n {
                            s += self.c(k, i, j) * self.c(m, k, l)
                                + self.c(k, j, l) * self.c(m, k, i)
                                + self.c(k, l, i) * self.c(m, k, j);
                        }
                        jacobi_residual = jacobi_residual.max(s.abs());
                    }
                }
            }
        }

        // x -> ([x, E_j])_{j,k}; its null space is the center.
        let mut center_map = DMatrix::zeros(n * n, n);
        for j in 0..n {
            for k in 0..n {
                for i in 0..n {
                    center_map[(j * n + k, i)] = self.c(k, i, j);
                }
            }
        }
        let center_dimension = n - linalg::numerical_rank(&center_map);

        AlgebraReport {
            dimension: n,
            jacobi_residual,
            antisymmetry_residual,
            center_dimension,
            killing_matrix: self.killing.clone(),
            killing_rank: self.killing_rank,
            semisimple: self.killing_rank == n,
        }
    }

    /// Parse the plain-text structure-constant format:
    ///
    /// ```text
    /// # comments and blank lines are ignored
    /// n=3
    /// labels: E1 E2 E3        (optional)
    /// k i j value             (1-based, one nonzero c^k_{ij} per line)
    /// ```
    ///
    /// Entries are taken literally: both `c^k_{ij}` and `c^k_{ji}` must be listed.
    /// Repeating an index triple is an error.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut c: Vec<f64> = Vec::new();
        let mut seen: Vec<bool> = Vec::new();
        let mut labels: Option<Vec<String>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if n.is_none() {
                let rest = line
                    .strip_prefix("n")
                    .map(str::trim_start)
                    .and_then(|r| r.strip_prefix('='))
                    .ok_or_else(|| err(format!("expected header `n=<int>`, found `{line}`")))?;
                let dim: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("invalid dimension `{}`", rest.trim())))?;
                if dim == 0 {
                    return Err(err("dimension must be positive".into()));
                }
                n = Some(dim);
                c = vec![0.0; dim * dim * dim];
                seen = vec![false; dim * dim * dim];
                continue;
            }
            let dim = n.unwrap_or_default();
            if let Some(rest) = line.strip_prefix("labels:") {
                let names: Vec<String> = rest.split_whitespace().map(String::from).collect();
                if names.len() != dim {
                    return Err(err(format!("expected {dim} labels, found {}", names.len())));
                }
                labels = Some(names);
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!("expected `k i j value`, found `{line}`")));
            }
            let mut idx = [0usize; 3];
            for (slot, field) in idx.iter_mut().zip(&fields[..3]) {
                let v: usize = field.parse().map_err(|_| err(format!("invalid index `{field}`")))?;
                if v == 0 || v > dim {
                    return Err(err(format!("index {v} out of range 1..={dim}")));
                }
                *slot = v - 1;
            }
            let value: f64 = fields[3]
                .parse()
                .map_err(|_| err(format!("invalid value `{}`", fields[3])))?;
            let pos = (idx[0] * dim + idx[1]) * dim + idx[2];
            if seen[pos] {
                return Err(err(format!(
                    "duplicate entry for ({}, {}, {})",
                    idx[0] + 1,
                    idx[1] + 1,
                    idx[2] + 1
                )));
            }
            seen[pos] = true;
            c[pos] = value;
        }
        let dim = n.ok_or(Error::Parse {
            line: 0,
            message: "missing header `n=<int>`".into(),
        })?;
        let algebra = Self::from_tensor(dim, c)?;
        match labels {
            Some(l) => algebra.with_labels(l),
            None => Ok(algebra),
        }
    }

    /// Serialize to the format read by [`parse`](Self::parse).
    pub fn to_text(&self) -> String {
        let mut s = format!("n={}\nlabels: {}\n", self.n, self.labels.join(" "));
        for e in &self.nonzeros {
            let _ = writeln!(s, "{} {} {} {:?}", e.k + 1, e.i + 1, e.j + 1, e.value);
        }
        s
    }
}

impl fmt::Display for AlgebraReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dimension            {}", self.dimension)?;
        writeln!(f, "antisymmetry residual {:.3e}", self.antisymmetry_residual)?;
        writeln!(f, "jacobi residual      {:.3e}", self.jacobi_residual)?;
        writeln!(f, "center dimension     {}", self.center_dimension)?;
        writeln!(f, "killing rank         {}", self.killing_rank)?;
        write!(f, "semisimple           {}", self.semisimple)
    }
}

fn killing_from_tensor(n: usize, c: &[f64]) -> DMatrix<f64> {
    let at = |k: usize, i: usize, j: usize| c[(k * n + i) * n + j];
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += at(l, i, k) * at(k, j, l);
                }
            }
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    m
}
