//! Discretized unit-cube domains with homogeneous Dirichlet boundary and the
//! two Gelfand-triple realizations used by the evolution models:
//! `L^p ⊂ H^{-1} ⊂ (L^p)^*` (porous media) and `W^{1,p}_0 ⊂ L^2 ⊂ W^{-1,p'}`
//! (Φ-Laplace).
//!
//! Interior nodes of `(0,1)^d` (`d ∈ {1,2}`) are spaced `h = 1/(n+1)` apart and
//! carry the quadrature weight `w = h^d`. The Laplacian is the standard 3/5-point
//! Dirichlet stencil; `H^{-1}` quantities go through `(-Δ_h)^{-1}`, with the
//! 1D solve done by the Thomas algorithm and 2D solves by a cached dense
//! Cholesky factor (conjugate gradients past a size cutoff).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Spatial dimension of the grid: the models are exercised on intervals and squares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    One,
    Two,
}

/// Uniform grid of interior nodes on `(0,1)^d` with zero Dirichlet boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    dim: Dim,
    n: usize,
}

impl Grid {
    pub fn new_1d(n: usize) -> Result<Grid, Error> {
        if n < 2 {
            return Err(Error::invalid("grid needs at least 2 interior nodes per axis"));
        }
        Ok(Grid { dim: Dim::One, n })
    }

    pub fn new_2d(n: usize) -> Result<Grid, Error> {
        if n < 2 {
            return Err(Error::invalid("grid needs at least 2 interior nodes per axis"));
        }
        Ok(Grid { dim: Dim::Two, n })
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh spacing `h = 1/(n+1)`.
    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Quadrature weight `w = h^d` attached to every interior node.
    pub fn weight(&self) -> f64 {
        match self.dim {
            Dim::One => self.h(),
            Dim::Two => self.h() * self.h(),
        }
    }

    /// Total interior node count `N = n^d`.
    pub fn node_count(&self) -> usize {
        match self.dim {
            Dim::One => self.n,
            Dim::Two => self.n * self.n,
        }
    }

    /// Number of forward-difference edges, counting the boundary-touching ones.
    pub fn edge_count(&self) -> usize {
        match self.dim {
            Dim::One => self.n + 1,
            Dim::Two => 2 * self.n * (self.n + 1),
        }
    }

    /// Coordinates of interior node `idx` (second component is 0 in 1D).
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let h = self.h();
        match self.dim {
            Dim::One => ((idx as f64 + 1.0) * h, 0.0),
            Dim::Two => {
                let i = idx % self.n;
                let j = idx / self.n;
                ((i as f64 + 1.0) * h, (j as f64 + 1.0) * h)
            }
        }
    }

    /// Smallest eigenvalue of `-Δ_h` on this grid (first discrete sine mode).
    pub fn mu1(&self) -> f64 {
        let h = self.h();
        let one_d = (2.0 / (h * h)) * (1.0 - (std::f64::consts::PI * h).cos());
        match self.dim {
            Dim::One => one_d,
            Dim::Two => 2.0 * one_d,
        }
    }
}

/// Real values on the interior nodes of a grid; the discrete state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        Field { grid, values: vec![0.0; grid.node_count()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Field, Error> {
        if values.len() != grid.node_count() {
            return Err(Error::invalid("field length does not match grid"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let values = (0..grid.node_count())
            .map(|i| {
                let (x, y) = grid.coords(i);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    /// First discrete sine mode `sin(πx)` (times `sin(πy)` in 2D), scaled by `amplitude`.
    pub fn sine_mode(grid: Grid, mode: usize, amplitude: f64) -> Field {
        let k = mode as f64 * std::f64::consts::PI;
        Field::from_fn(grid, |x, y| match grid.dim() {
            Dim::One => amplitude * (k * x).sin(),
            Dim::Two => amplitude * (k * x).sin() * (k * y).sin(),
        })
    }

    pub fn constant(grid: Grid, c: f64) -> Field {
        Field { grid, values: vec![c; grid.node_count()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "field arithmetic across different grids");
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        assert_eq!(self.grid, other.grid, "field arithmetic across different grids");
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// In-place `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        assert_eq!(self.grid, other.grid, "field arithmetic across different grids");
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    /// Quadrature inner product `Σ u_i v_i w`.
    pub fn dot_quad(&self, other: &Field) -> f64 {
        assert_eq!(self.grid, other.grid, "field arithmetic across different grids");
        let w = self.grid.weight();
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * w
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Forward-difference gradient values on the edges of a grid (x-edges stacked
/// before y-edges in 2D); boundary values are the Dirichlet zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct GradField {
    grid: Grid,
    values: Vec<f64>,
}

impl GradField {
    pub fn zeros(grid: Grid) -> GradField {
        GradField { grid, values: vec![0.0; grid.edge_count()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GradField {
        GradField { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sub(&self, other: &GradField) -> GradField {
        assert_eq!(self.grid, other.grid, "gradient arithmetic across different grids");
        GradField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Quadrature inner product over edges.
    pub fn dot_quad(&self, other: &GradField) -> f64 {
        assert_eq!(self.grid, other.grid, "gradient arithmetic across different grids");
        let w = self.grid.weight();
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * w
    }
}

/// 3-point (1D) / 5-point (2D) Dirichlet Laplacian `Δ_h u`.
pub fn laplacian(u: &Field) -> Field {
    let grid = u.grid;
    let h2 = grid.h() * grid.h();
    let n = grid.n;
    let v = &u.values;
    let mut out = vec![0.0; v.len()];
    match grid.dim {
        Dim::One => {
            for i in 0..n {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = (left - 2.0 * v[i] + right) / h2;
            }
        }
        Dim::Two => {
            for j in 0..n {
                for i in 0..n {
                    let idx = j * n + i;
                    let left = if i > 0 { v[idx - 1] } else { 0.0 };
                    let right = if i + 1 < n { v[idx + 1] } else { 0.0 };
                    let down = if j > 0 { v[idx - n] } else { 0.0 };
                    let up = if j + 1 < n { v[idx + n] } else { 0.0 };
                    out[idx] = (left + right + down + up - 4.0 * v[idx]) / h2;
                }
            }
        }
    }
    Field { grid, values: out }
}

/// Forward-difference gradient with Dirichlet zeros on the boundary.
pub fn gradient(u: &Field) -> GradField {
    let grid = u.grid;
    let h = grid.h();
    let n = grid.n;
    let v = &u.values;
    let mut out = Vec::with_capacity(grid.edge_count());
    match grid.dim {
        Dim::One => {
            // edge e sits between node e-1 and node e (nodes -1 and n are the boundary)
            for e in 0..=n {
                let a = if e > 0 { v[e - 1] } else { 0.0 };
                let b = if e < n { v[e] } else { 0.0 };
                out.push((b - a) / h);
            }
        }
        Dim::Two => {
            for j in 0..n {
                for e in 0..=n {
                    let a = if e > 0 { v[j * n + e - 1] } else { 0.0 };
                    let b = if e < n { v[j * n + e] } else { 0.0 };
                    out.push((b - a) / h);
                }
            }
            for i in 0..n {
                for e in 0..=n {
                    let a = if e > 0 { v[(e - 1) * n + i] } else { 0.0 };
                    let b = if e < n { v[e * n + i] } else { 0.0 };
                    out.push((b - a) / h);
                }
            }
        }
    }
    GradField { grid, values: out }
}

/// Negative divergence, the quadrature adjoint of [`gradient`]:
/// `Σ_i (-div g)_i v_i w = Σ_e g_e (∇v)_e w` for every `v`; `-div∘∇ = -Δ_h`.
pub fn divergence_neg(g: &GradField) -> Field {
    let grid = g.grid;
    let h = grid.h();
    let n = grid.n;
    let gv = &g.values;
    let mut out = vec![0.0; grid.node_count()];
    match grid.dim {
        Dim::One => {
            for i in 0..n {
                out[i] = (gv[i] - gv[i + 1]) / h;
            }
        }
        Dim::Two => {
            let x_off = 0;
            let y_off = n * (n + 1);
            for j in 0..n {
                for i in 0..n {
                    let idx = j * n + i;
                    let gx_l = gv[x_off + j * (n + 1) + i];
                    let gx_r = gv[x_off + j * (n + 1) + i + 1];
                    let gy_d = gv[y_off + i * (n + 1) + j];
                    let gy_u = gv[y_off + i * (n + 1) + j + 1];
                    out[idx] = (gx_l - gx_r + gy_d - gy_u) / h;
                }
            }
        }
    }
    Field { grid, values: out }
}

enum LaplaceFactor {
    Tridiag { n: usize, h2: f64 },
    Dense(Cholesky<f64, Dyn>),
    Cg,
}

fn factor_cache() -> &'static Mutex<HashMap<Grid, Arc<LaplaceFactor>>> {
    static CACHE: OnceLock<Mutex<HashMap<Grid, Arc<LaplaceFactor>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

const DENSE_FACTOR_LIMIT: usize = 2048;

fn factor_for(grid: Grid) -> Arc<LaplaceFactor> {
    if let Some(f) = factor_cache().lock().unwrap().get(&grid) {
        return f.clone();
    }
    let factor = match grid.dim {
        Dim::One => LaplaceFactor::Tridiag { n: grid.n, h2: grid.h() * grid.h() },
        Dim::Two => {
            let nn = grid.node_count();
            if nn <= DENSE_FACTOR_LIMIT {
                let h2 = grid.h() * grid.h();
                let n = grid.n;
                let mut m = DMatrix::<f64>::zeros(nn, nn);
                for j in 0..n {
                    for i in 0..n {
                        let idx = j * n + i;
                        m[(idx, idx)] = 4.0 / h2;
                        if i > 0 {
                            m[(idx, idx - 1)] = -1.0 / h2;
                        }
                        if i + 1 < n {
                            m[(idx, idx + 1)] = -1.0 / h2;
                        }
                        if j > 0 {
                            m[(idx, idx - n)] = -1.0 / h2;
                        }
                        if j + 1 < n {
                            m[(idx, idx + n)] = -1.0 / h2;
                        }
                    }
                }
                LaplaceFactor::Dense(Cholesky::new(m).expect("-Δ_h is positive definite"))
            } else {
                LaplaceFactor::Cg
            }
        }
    };
    let arc = Arc::new(factor);
    factor_cache().lock().unwrap().insert(grid, arc.clone());
    arc
}

fn thomas_solve(n: usize, h2: f64, rhs: &[f64]) -> Vec<f64> {
    // -Δ_h u = f  with diag 2/h², off-diag -1/h²
    let a = -1.0 / h2;
    let b = 2.0 / h2;
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = a / b;
    dp[0] = rhs[0] / b;
    for i in 1..n {
        let m = b - a * cp[i - 1];
        cp[i] = a / m;
        dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = dp[i] - cp[i] * u[i + 1];
    }
    u
}

fn cg_solve(grid: Grid, rhs: &Field, rel_tol: f64) -> Result<Field, Error> {
    let mut x = Field::zeros(grid);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let rhs_norm = rhs.dot_quad(rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let mut rs = r.dot_quad(&r);
    let max_iter = 20 * grid.node_count();
    for _ in 0..max_iter {
        let ap = laplacian(&p).scale(-1.0);
        let alpha = rs / p.dot_quad(&ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rs_new = r.dot_quad(&r);
        if rs_new.sqrt() <= rel_tol * rhs_norm {
            return Ok(x);
        }
        let beta = rs_new / rs;
        p = r.add(&p.scale(beta));
        rs = rs_new;
    }
    Err(Error::SolverNonConvergence {
        what: "conjugate gradients for (-Δ_h)^{-1}".into(),
        residual: rs.sqrt() / rhs_norm,
    })
}

/// Solves `-Δ_h u = f` (the discrete Riesz map of `H^{-1}`).
pub fn inv_laplacian(f: &Field) -> Result<Field, Error> {
    let grid = f.grid;
    match &*factor_for(grid) {
        LaplaceFactor::Tridiag { n, h2 } => {
            Ok(Field { grid, values: thomas_solve(*n, *h2, &f.values) })
        }
        LaplaceFactor::Dense(chol) => {
            let rhs = DVector::from_column_slice(&f.values);
            let sol = chol.solve(&rhs);
            Ok(Field { grid, values: sol.data.into() })
        }
        LaplaceFactor::Cg => cg_solve(grid, f, 1e-13),
    }
}

/// Norm selector for [`norm`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormSpace {
    Lp(f64),
    L2,
    Hminus1,
    W1p(f64),
}

fn lp_of(values: &[f64], p: f64, w: f64) -> f64 {
    if p == 2.0 {
        (values.iter().map(|v| v * v).sum::<f64>() * w).sqrt()
    } else {
        (values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * w).powf(1.0 / p)
    }
}

/// Discrete norms: `Lp` by plain quadrature, `Hminus1` through the Riesz map,
/// `W1p` as the `L^p` norm of the forward-difference gradient.
pub fn norm(u: &Field, space: NormSpace) -> Result<f64, Error> {
    let w = u.grid.weight();
    match space {
        NormSpace::Lp(p) => {
            if p < 1.0 {
                return Err(Error::invalid("L^p norm needs p >= 1"));
            }
            Ok(lp_of(&u.values, p, w))
        }
        NormSpace::L2 => Ok(lp_of(&u.values, 2.0, w)),
        NormSpace::Hminus1 => {
            let riesz = inv_laplacian(u)?;
            Ok(riesz.dot_quad(u).max(0.0).sqrt())
        }
        NormSpace::W1p(p) => {
            if p < 1.0 {
                return Err(Error::invalid("W^{1,p} norm needs p >= 1"));
            }
            Ok(lp_of(&gradient(u).values, p, w))
        }
    }
}

/// Which `(V, H, V^*)` realization a model lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleKind {
    /// `V = L^p`, `H = H^{-1}`, duals stored as `L^{p'}` node densities.
    PorousMedia,
    /// `V = W^{1,p}_0`, `H = L^2`, duals stored as gradient-space densities.
    PhiLaplace,
}

/// A Gelfand triple `V ⊂ H ⊂ V^*` with coercivity gauge `α` (default `α = p`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GelfandTriple {
    kind: TripleKind,
    p: f64,
    alpha: f64,
}

impl GelfandTriple {
    pub fn porous_media(p: f64, dim: Dim) -> Result<GelfandTriple, Error> {
        if p <= 1.0 {
            return Err(Error::invalid("porous-media triple needs p > 1"));
        }
        // p > 2d/(d+2) is automatic for d ∈ {1,2}; keep the check for the record.
        let d = match dim {
            Dim::One => 1.0,
            Dim::Two => 2.0,
        };
        if p <= 2.0 * d / (d + 2.0) {
            return Err(Error::invalid("porous-media triple needs p > 2d/(d+2)"));
        }
        Ok(GelfandTriple { kind: TripleKind::PorousMedia, p, alpha: p })
    }

    pub fn phi_laplace(p: f64) -> Result<GelfandTriple, Error> {
        if p <= 1.0 {
            return Err(Error::invalid("Φ-Laplace triple needs p > 1"));
        }
        Ok(GelfandTriple { kind: TripleKind::PhiLaplace, p, alpha: p })
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<GelfandTriple, Error> {
        if alpha <= 1.0 {
            return Err(Error::invalid("gauge exponent needs alpha > 1"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn kind(&self) -> TripleKind {
        self.kind
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Conjugate exponent `p' = p/(p-1)`.
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn v_norm(&self, u: &Field) -> f64 {
        match self.kind {
            TripleKind::PorousMedia => norm(u, NormSpace::Lp(self.p)).expect("p > 1"),
            TripleKind::PhiLaplace => norm(u, NormSpace::W1p(self.p)).expect("p > 1"),
        }
    }

    pub fn h_norm(&self, u: &Field) -> f64 {
        match self.kind {
            TripleKind::PorousMedia => norm(u, NormSpace::Hminus1).expect("infallible"),
            TripleKind::PhiLaplace => norm(u, NormSpace::L2).expect("infallible"),
        }
    }
}

/// A `V^*` element in its computable density representation: an `L^{p'}` node
/// density `w` standing for `-Δ_h w` (porous media), or a gradient-space edge
/// density `ṽ` standing for `-div_h ṽ` (Φ-Laplace). Node densities are also
/// legal against the Φ-Laplace triple through the `L^2 ⊂ V^*` embedding.
#[derive(Clone, Debug)]
pub enum DualField {
    Node(Field),
    Grad(GradField),
}

impl DualField {
    pub fn zero_node(grid: Grid) -> DualField {
        DualField::Node(Field::zeros(grid))
    }

    pub fn grid(&self) -> Grid {
        match self {
            DualField::Node(f) => f.grid,
            DualField::Grad(g) => g.grid,
        }
    }

    pub fn as_node(&self) -> Option<&Field> {
        match self {
            DualField::Node(f) => Some(f),
            DualField::Grad(_) => None,
        }
    }

    pub fn as_grad(&self) -> Option<&GradField> {
        match self {
            DualField::Grad(g) => Some(g),
            DualField::Node(_) => None,
        }
    }

    /// The `H`-space representative of the functional: the grid vector `z` with
    /// `⟨v, u⟩ = ⟨z, u⟩_H` for all `u`. For a porous-media node density `w` this
    /// is `-Δ_h w`; for a Φ-Laplace edge density it is `-div_h ṽ`; an `L^2`
    /// density on the Φ-Laplace triple is its own representative.
    pub fn h_representative(&self, triple: &GelfandTriple) -> Result<Field, Error> {
        match (triple.kind, self) {
            (TripleKind::PorousMedia, DualField::Node(f)) => Ok(laplacian(f).scale(-1.0)),
            (TripleKind::PorousMedia, DualField::Grad(_)) => {
                Err(Error::RepresentationMismatch)
            }
            (TripleKind::PhiLaplace, DualField::Node(f)) => Ok(f.clone()),
            (TripleKind::PhiLaplace, DualField::Grad(g)) => Ok(divergence_neg(g)),
        }
    }
}

/// Duality pairing `⟨v, u⟩` between a stored dual element and `u ∈ V`.
pub fn pairing(v: &DualField, u: &Field, triple: &GelfandTriple) -> Result<f64, Error> {
    if v.grid() != u.grid {
        return Err(Error::GridMismatch);
    }
    match (triple.kind, v) {
        (TripleKind::PorousMedia, DualField::Node(d)) => Ok(d.dot_quad(u)),
        (TripleKind::PorousMedia, DualField::Grad(_)) => Err(Error::RepresentationMismatch),
        (TripleKind::PhiLaplace, DualField::Grad(d)) => Ok(d.dot_quad(&gradient(u))),
        (TripleKind::PhiLaplace, DualField::Node(d)) => Ok(d.dot_quad(u)),
    }
}

/// Bracketed `V^*` norm: `lower ≤ ‖v‖_{V^*} ≤ upper`. Exact (tight bracket) for
/// porous-media node densities, where `-Δ_h` is an isometry from `L^{p'}`.
#[derive(Clone, Copy, Debug)]
pub struct DualNormBracket {
    pub lower: f64,
    pub upper: f64,
}

impl DualNormBracket {
    pub fn exact(v: f64) -> DualNormBracket {
        DualNormBracket { lower: v, upper: v }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// `V^*` norm of a stored dual element, as a certified bracket.
///
/// Φ-Laplace densities get the exact `L^{p'}` density norm as the upper bound
/// and a dictionary sup (coordinate directions plus 64 seeded random unit-`V`
/// directions) as the lower bound; node densities on that triple are first
/// rewritten as the gradient density of their harmonic lift, which is exact
/// when `p = 2`.
pub fn dual_norm(v: &DualField, triple: &GelfandTriple) -> Result<DualNormBracket, Error> {
    let q = triple.p_conj();
    let w = v.grid().weight();
    match (triple.kind, v) {
        (TripleKind::PorousMedia, DualField::Node(d)) => {
            Ok(DualNormBracket::exact(lp_of(d.values(), q, w)))
        }
        (TripleKind::PorousMedia, DualField::Grad(_)) => Err(Error::RepresentationMismatch),
        (TripleKind::PhiLaplace, DualField::Grad(d)) => {
            let upper = lp_of(d.values(), q, w);
            let lower = dictionary_lower_bound(v, triple)?;
            Ok(DualNormBracket { lower, upper: upper.max(lower) })
        }
        (TripleKind::PhiLaplace, DualField::Node(d)) => {
            let lift = inv_laplacian(d)?;
            let density = gradient(&lift);
            let upper = lp_of(density.values(), q, w);
            if triple.p == 2.0 {
                // Riesz: the harmonic lift attains the sup, the bracket is tight.
                return Ok(DualNormBracket::exact(upper));
            }
            let lower = dictionary_lower_bound(v, triple)?;
            Ok(DualNormBracket { lower, upper: upper.max(lower) })
        }
    }
}

fn dictionary_lower_bound(v: &DualField, triple: &GelfandTriple) -> Result<f64, Error> {
    use rand::prelude::*;
    let grid = v.grid();
    let mut best = 0.0_f64;
    let mut probe = |dir: &Field| -> Result<(), Error> {
        let nv = triple.v_norm(dir);
        if nv > 0.0 {
            best = best.max(pairing(v, dir, triple)?.abs() / nv);
        }
        Ok(())
    };
    // coordinate directions
    let mut e = Field::zeros(grid);
    for i in 0..grid.node_count() {
        e.values_mut()[i] = 1.0;
        probe(&e)?;
        e.values_mut()[i] = 0.0;
    }
    // fixed random dictionary
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed_d1c7);
    for _ in 0..64 {
        let dir = Field::from_fn(grid, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        probe(&dir)?;
    }
    // the element's own lift is usually the best direction available
    if let DualField::Grad(g) = v {
        let lift = inv_laplacian(&divergence_neg(g))?;
        probe(&lift)?;
    }
    Ok(best)
}

/// Discrete embedding constant `c0 = min_{u≠0} ‖u‖_V / ‖u‖_H` on a grid,
/// found by normalized projected gradient descent from several restarts and
/// certified by re-evaluating the ratio at the minimizer.
pub fn embedding_constant(triple: &GelfandTriple, grid: Grid) -> Result<f64, Error> {
    use rand::prelude::*;
    let mut best = f64::INFINITY;

    let ratio = |u: &Field| -> f64 {
        let h = triple.h_norm(u);
        if h == 0.0 {
            f64::INFINITY
        } else {
            triple.v_norm(u) / h
        }
    };

    let mut starts: Vec<Field> = vec![Field::sine_mode(grid, 1, 1.0)];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0e17_bedd);
    for _ in 0..8 {
        starts.push(Field::from_fn(grid, |_, _| rng.random::<f64>() * 2.0 - 1.0));
    }

    for start in &starts {
        let u = minimize_ratio(triple, start, 400);
        let r = ratio(&u);
        if r.is_finite() && r < best {
            best = r;
        }
    }

    if !best.is_finite() {
        return Err(Error::SolverNonConvergence {
            what: "embedding-constant search".into(),
            residual: f64::NAN,
        });
    }
    Ok(best)
}

fn v_norm_gradient(triple: &GelfandTriple, u: &Field) -> Field {
    let p = triple.p;
    let w = u.grid.weight();
    let eps = 1e-12;
    match triple.kind {
        TripleKind::PorousMedia => {
            let nv = triple.v_norm(u).max(eps);
            u.map(|v| {
                let a = v.abs().max(eps);
                nv.powf(1.0 - p) * a.powf(p - 2.0) * v
            })
            .scale(w)
        }
        TripleKind::PhiLaplace => {
            let nv = triple.v_norm(u).max(eps);
            let g = gradient(u);
            let density = g.map(|v| {
                let a = v.abs().max(eps);
                nv.powf(1.0 - p) * a.powf(p - 2.0) * v
            });
            divergence_neg(&density).scale(w)
        }
    }
}

fn h_norm_gradient(triple: &GelfandTriple, u: &Field) -> Field {
    let w = u.grid.weight();
    let nh = triple.h_norm(u).max(1e-300);
    match triple.kind {
        TripleKind::PorousMedia => inv_laplacian(u).expect("riesz solve").scale(w / nh),
        TripleKind::PhiLaplace => u.scale(w / nh),
    }
}

fn minimize_ratio(triple: &GelfandTriple, start: &Field, iters: usize) -> Field {
    let mut u = start.clone();
    let hn = triple.h_norm(&u);
    if hn == 0.0 {
        return u;
    }
    u = u.scale(1.0 / hn);
    let mut lr = 0.5;
    let mut obj = triple.v_norm(&u);
    for _ in 0..iters {
        // on the sphere ‖u‖_H = 1 the objective is just ‖u‖_V
        let gv = v_norm_gradient(triple, &u);
        let gh = h_norm_gradient(triple, &u);
        // project out the constraint direction
        let scale = gv.dot_quad(&gh) / gh.dot_quad(&gh).max(1e-300);
        let mut step = gv;
        step.axpy(-scale, &gh);
        let step_norm = step.dot_quad(&step).sqrt();
        if step_norm < 1e-15 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = u.clone();
            cand.axpy(-lr / step_norm.max(1e-300), &step);
            let hc = triple.h_norm(&cand);
            if hc > 0.0 {
                let cand = cand.scale(1.0 / hc);
                let co = triple.v_norm(&cand);
                if co < obj {
                    u = cand;
                    obj = co;
                    lr *= 1.3;
                    accepted = true;
                    break;
                }
            }
            lr *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new_1d(3).unwrap()
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let u = Field::zeros(grid3());
        assert_eq!(laplacian(&u).values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn laplacian_hand_stencil() {
        // d=1, n=3, h=1/4, u=(0,1,0) → (16, -32, 16)
        let u = Field::from_values(grid3(), vec![0.0, 1.0, 0.0]).unwrap();
        let lu = laplacian(&u);
        assert_eq!(lu.values(), &[16.0, -32.0, 16.0]);
    }

    #[test]
    fn laplacian_sine_eigenpair() {
        for grid in [Grid::new_1d(17).unwrap(), Grid::new_2d(9).unwrap()] {
            let u = Field::sine_mode(grid, 1, 1.0);
            let lu = laplacian(&u);
            let mu1 = grid.mu1();
            for (a, b) in lu.values().iter().zip(u.values()) {
                assert!((a + mu1 * b).abs() < 1e-9 * mu1, "eigenpair violated: {a} vs {}", -mu1 * b);
            }
        }
    }

    #[test]
    fn inv_laplacian_round_trip_and_eigenmode() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for grid in [Grid::new_1d(31).unwrap(), Grid::new_2d(12).unwrap()] {
            let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
            let f = laplacian(&u).scale(-1.0);
            let back = inv_laplacian(&f).unwrap();
            let err = back.sub(&u);
            let rel = err.dot_quad(&err).sqrt() / u.dot_quad(&u).sqrt();
            assert!(rel < 1e-10, "round trip rel err {rel}");

            let s1 = Field::sine_mode(grid, 1, 1.0);
            let sol = inv_laplacian(&s1).unwrap();
            let expect = s1.scale(1.0 / grid.mu1());
            let diff = sol.sub(&expect);
            assert!(diff.linf() < 1e-10);

            let zero = inv_laplacian(&Field::zeros(grid)).unwrap();
            assert_eq!(zero.linf(), 0.0);
        }
    }

    #[test]
    fn cg_path_matches_round_trip() {
        use rand::prelude::*;
        // big enough 2D grid to fall back to CG
        let grid = Grid::new_2d(50).unwrap();
        assert!(grid.node_count() > DENSE_FACTOR_LIMIT);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
        let f = laplacian(&u).scale(-1.0);
        let back = inv_laplacian(&f).unwrap();
        let err = back.sub(&u);
        let rel = err.dot_quad(&err).sqrt() / u.dot_quad(&u).sqrt();
        assert!(rel < 1e-10, "cg round trip rel err {rel}");
    }

    #[test]
    fn l2_norm_quadrature() {
        // u ≡ 1 on d=1, n=3: sqrt(3 · 1 · 1/4)
        let u = Field::constant(grid3(), 1.0);
        let n = norm(&u, NormSpace::L2).unwrap();
        assert!((n - 0.75_f64.sqrt()).abs() < 1e-15);
        assert_eq!(norm(&Field::zeros(grid3()), NormSpace::Hminus1).unwrap(), 0.0);
    }

    #[test]
    fn hminus1_matches_dense_oracle() {
        use rand::prelude::*;
        let grid = Grid::new_1d(17).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
        // dense oracle: assemble -Δ_h, solve with full LU
        let n = grid.n();
        let h2 = grid.h() * grid.h();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 2.0 / h2;
            if i > 0 {
                m[(i, i - 1)] = -1.0 / h2;
            }
            if i + 1 < n {
                m[(i, i + 1)] = -1.0 / h2;
            }
        }
        let sol = m.lu().solve(&DVector::from_column_slice(u.values())).unwrap();
        let oracle = (sol.dot(&DVector::from_column_slice(u.values())) * grid.weight()).sqrt();
        let ours = norm(&u, NormSpace::Hminus1).unwrap();
        assert!((ours - oracle).abs() < 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn laplacian_symmetric_negative_definite() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for grid in [Grid::new_1d(9).unwrap(), Grid::new_2d(5).unwrap()] {
            for _ in 0..20 {
                let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
                let v = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
                let lu = laplacian(&u);
                let lv = laplacian(&v);
                assert!((lu.dot_quad(&v) - u.dot_quad(&lv)).abs() < 1e-12 * lu.linf().max(1.0));
                assert!(lu.dot_quad(&u) < 0.0);
            }
        }
    }

    #[test]
    fn gradient_divergence_adjoint() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        for grid in [Grid::new_1d(7).unwrap(), Grid::new_2d(6).unwrap()] {
            let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
            let v = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
            let mut g = GradField::zeros(grid);
            for e in g.values_mut() {
                *e = rng.random::<f64>() - 0.5;
            }
            // adjoint identity
            let lhs = divergence_neg(&g).dot_quad(&v);
            let rhs = g.dot_quad(&gradient(&v));
            assert!((lhs - rhs).abs() < 1e-12);
            // -div ∘ ∇ = -Δ_h
            let a = divergence_neg(&gradient(&u));
            let b = laplacian(&u).scale(-1.0);
            assert!(a.sub(&b).linf() < 1e-10);
        }
    }

    #[test]
    fn w12_norm_is_dirichlet_energy() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let grid = Grid::new_2d(8).unwrap();
        let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
        let w12 = norm(&u, NormSpace::W1p(2.0)).unwrap();
        let energy = laplacian(&u).scale(-1.0).dot_quad(&u);
        assert!((w12 * w12 - energy).abs() < 1e-12 * energy.max(1.0));
    }

    #[test]
    fn pairing_examples() {
        let grid = grid3();
        let pm = GelfandTriple::porous_media(2.0, Dim::One).unwrap();
        let one = Field::constant(grid, 1.0);
        // w = u ≡ 1 → Σ 1·1·(1/4) = 0.75
        let v = DualField::Node(one.clone());
        assert!((pairing(&v, &one, &pm).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(pairing(&DualField::Node(Field::zeros(grid)), &one, &pm).unwrap(), 0.0);

        // Φ-Laplace: ṽ = ∇u → pairing = ‖u‖²_{W^{1,2}}
        let pl = GelfandTriple::phi_laplace(2.0).unwrap();
        let u = Field::from_values(grid, vec![0.3, -0.2, 0.9]).unwrap();
        let g = DualField::Grad(gradient(&u));
        let w12 = norm(&u, NormSpace::W1p(2.0)).unwrap();
        assert!((pairing(&g, &u, &pl).unwrap() - w12 * w12).abs() < 1e-14);

        // mismatched representation rejected
        assert!(matches!(
            pairing(&g, &u, &pm),
            Err(Error::RepresentationMismatch)
        ));
    }

    #[test]
    fn embedding_constant_p2_matches_eigenvalue() {
        let grid = Grid::new_1d(12).unwrap();
        let mu1 = grid.mu1();
        let pl = GelfandTriple::phi_laplace(2.0).unwrap();
        let c0 = embedding_constant(&pl, grid).unwrap();
        assert!(
            (c0 * c0 - mu1).abs() < 1e-6 * mu1,
            "phi-laplace c0² = {} vs μ₁ = {mu1}",
            c0 * c0
        );

        let pm = GelfandTriple::porous_media(2.0, Dim::One).unwrap();
        let c0 = embedding_constant(&pm, grid).unwrap();
        assert!(
            (c0 * c0 - mu1).abs() < 1e-6 * mu1,
            "porous-media c0² = {} vs μ₁ = {mu1}",
            c0 * c0
        );
    }

    #[test]
    fn embedding_holds_on_random_fields() {
        use rand::prelude::*;
        let grid = Grid::new_1d(9).unwrap();
        for triple in [
            GelfandTriple::porous_media(1.5, Dim::One).unwrap(),
            GelfandTriple::phi_laplace(2.5).unwrap(),
        ] {
            let c0 = embedding_constant(&triple, grid).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
            for _ in 0..500 {
                let u = Field::from_fn(grid, |_, _| rng.random::<f64>() - 0.5);
                let scaled = u.scale(2.0);
                // 0-homogeneous ratio
                let r1 = triple.v_norm(&u) / triple.h_norm(&u);
                let r2 = triple.v_norm(&scaled) / triple.h_norm(&scaled);
                assert!((r1 - r2).abs() < 1e-9 * r1);
                assert!(
                    triple.v_norm(&u) >= c0 * triple.h_norm(&u) - 1e-9,
                    "embedding violated: ratio {r1} < c0 {c0}"
                );
            }
        }
    }

    #[test]
    fn lp_norm_monotone_in_p_after_normalizing() {
        use rand::prelude::*;
        let grid = Grid::new_1d(9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let u = Field::from_fn(grid, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let measure = grid.node_count() as f64 * grid.weight();
        // power-mean inequality: the measure-normalized L^p norm is nondecreasing in p
        let mut prev = 0.0;
        for p in [1.0, 1.5, 2.0, 3.0, 6.0] {
            let m = norm(&u, NormSpace::Lp(p)).unwrap() / measure.powf(1.0 / p);
            assert!(m >= prev - 1e-12, "power mean decreased: {m} < {prev} at p={p}");
            prev = m;
        }
    }
}
