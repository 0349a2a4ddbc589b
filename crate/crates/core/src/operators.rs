//! Field-level multi-valued operators for the shipped models, the gauged
//! duality mapping on `V`, and the vector generalized resolvent/Yosida
//! operators.
//!
//! The three operator families compose a scalar graph with the domain
//! geometry:
//! - porous media `A(u) = -Δ Ψ(u)` on the `L^p ⊂ H^{-1}` triple, where the
//!   `-Δ` isometry makes dual elements plain `L^{p'}` node densities;
//! - Φ-Laplace `A(u) = -div Φ(∇u)` on `W^{1,p}_0 ⊂ L^2`, with duals stored as
//!   gradient-space edge densities;
//! - subdifferential reaction terms `A(u) = ∂φ(u)` applied node-wise on the
//!   `p = 2` triple.
//!
//! The resolvent inclusion `0 ∈ J(y-x) + λA(y)` is solved by graph-smoothing
//! continuation: the scalar graph is replaced by its Yosida regularization at
//! level μ, the smooth system is solved by damped Newton (Sherman–Morrison on
//! the diagonal-plus-rank-one porous-media Jacobian, dense LU otherwise), and
//! μ is driven down a geometric schedule with warm starts until the exact
//! set-valued residual meets tolerance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::graphs::{scalar_duality, RegularizedGraph, ScalarGraph, YosidaParams};
use crate::spaces::{
    divergence_neg, gradient, laplacian, pairing, DualField, Field, GelfandTriple, GradField,
    Grid, TripleKind,
};

/// Which §5-style composition the operator realizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    PorousMedia,
    PhiLaplace,
    Subdifferential,
}

/// Declared standing-assumption constants: `⟨v,x⟩ ≥ delta‖x‖_V^α − f_const`
/// and `‖A⁰(x)‖^{α/(α-1)} ≤ (f_const + growth_c‖x‖_V^α)(1+‖x‖_H^β)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct OperatorAssumptions {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub growth_c: f64,
    pub f_const: f64,
}

/// A multi-valued maximal-monotone operator on fields.
#[derive(Clone, Debug)]
pub struct MultiValuedOperator {
    kind: OperatorKind,
    graph: ScalarGraph,
    triple: GelfandTriple,
    assumptions: OperatorAssumptions,
}

impl MultiValuedOperator {
    /// `A(u) = -Δ Ψ(u)` on the porous-media triple.
    pub fn porous_media(graph: ScalarGraph, triple: GelfandTriple) -> Result<Self, Error> {
        if triple.kind() != TripleKind::PorousMedia {
            return Err(Error::invalid("porous-media operator needs the porous-media triple"));
        }
        let assumptions = derive_assumptions(&graph, &triple, 1.0);
        Ok(MultiValuedOperator { kind: OperatorKind::PorousMedia, graph, triple, assumptions })
    }

    /// `A(u) = -div Φ(∇u)` on the Φ-Laplace triple.
    pub fn phi_laplace(graph: ScalarGraph, triple: GelfandTriple) -> Result<Self, Error> {
        if triple.kind() != TripleKind::PhiLaplace {
            return Err(Error::invalid("Φ-Laplace operator needs the Φ-Laplace triple"));
        }
        let assumptions = derive_assumptions(&graph, &triple, 2.0);
        Ok(MultiValuedOperator { kind: OperatorKind::PhiLaplace, graph, triple, assumptions })
    }

    /// Node-wise subdifferential `A(u) = ∂φ(u)` on the `p = 2` Φ-Laplace
    /// triple. The grid fixes the (weak, mesh-dependent) `V`-coercivity
    /// constant `δ_g / μ_max`.
    pub fn subdifferential(
        graph: ScalarGraph,
        triple: GelfandTriple,
        grid: Grid,
    ) -> Result<Self, Error> {
        if triple.kind() != TripleKind::PhiLaplace || triple.p() != 2.0 {
            return Err(Error::invalid("subdifferential operator needs the p = 2 Φ-Laplace triple"));
        }
        let mut assumptions = derive_assumptions(&graph, &triple, 1.0);
        // ‖u‖²_{L²} ≥ ‖u‖²_V / μ_max on the grid
        let h = grid.h();
        let mu_max_1d = (2.0 / (h * h)) * (1.0 + (std::f64::consts::PI * h).cos());
        let mu_max = match grid.dim() {
            crate::spaces::Dim::One => mu_max_1d,
            crate::spaces::Dim::Two => 2.0 * mu_max_1d,
        };
        assumptions.delta /= mu_max;
        Ok(MultiValuedOperator { kind: OperatorKind::Subdifferential, graph, triple, assumptions })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn graph(&self) -> &ScalarGraph {
        &self.graph
    }

    pub fn triple(&self) -> &GelfandTriple {
        &self.triple
    }

    pub fn assumptions(&self) -> OperatorAssumptions {
        self.assumptions
    }
}

fn derive_assumptions(graph: &ScalarGraph, triple: &GelfandTriple, measure_cap: f64) -> OperatorAssumptions {
    let alpha = triple.alpha();
    match graph.meta() {
        Some(meta) => {
            let q = triple.p_conj();
            let c = meta.growth_c;
            let growth = (2.0 * c).powf(q);
            OperatorAssumptions {
                delta: if (meta.p - triple.p()).abs() < 1e-12 { meta.delta } else { 0.0 },
                alpha,
                beta: 0.0,
                growth_c: growth,
                f_const: (meta.coer_c * measure_cap).max(growth * measure_cap),
            }
        }
        None => OperatorAssumptions { delta: 0.0, alpha, beta: 0.0, growth_c: 1.0, f_const: 1.0 },
    }
}

/// The α-gauged duality map `J: V → V^*`, in density form. Satisfies
/// `⟨J(u), u⟩ = ‖u‖_V^α` and `‖J(u)‖_{V^*} = ‖u‖_V^{α-1}` exactly in the
/// density representation; `J(0) = 0`.
pub fn duality_map(u: &Field, triple: &GelfandTriple, alpha: f64) -> Result<DualField, Error> {
    if alpha <= 1.0 {
        return Err(Error::invalid("duality map needs alpha > 1"));
    }
    let p = triple.p();
    match triple.kind() {
        TripleKind::PorousMedia => {
            let nv = triple.v_norm(u);
            if nv == 0.0 {
                return Ok(DualField::Node(Field::zeros(u.grid())));
            }
            let pref = nv.powf(alpha - p);
            Ok(DualField::Node(u.map(|v| pref * scalar_duality(v, p))))
        }
        TripleKind::PhiLaplace => {
            let nv = triple.v_norm(u);
            if nv == 0.0 {
                return Ok(DualField::Grad(GradField::zeros(u.grid())));
            }
            let pref = nv.powf(alpha - p);
            Ok(DualField::Grad(gradient(u).map(|g| pref * scalar_duality(g, p))))
        }
    }
}

/// The minimal section `A⁰(u)` in density form: the node-wise (porous media,
/// subdifferential) or edge-wise (Φ-Laplace) minimal selection of the graph.
/// Exactly `V^*`-minimal for porous media by the `-Δ` isometry; a certified
/// representative under the bracketed dual norm otherwise.
pub fn apply_minimal(op: &MultiValuedOperator, u: &Field) -> Result<DualField, Error> {
    if !u.is_finite() {
        return Err(Error::NonFinite);
    }
    match op.kind {
        OperatorKind::PorousMedia | OperatorKind::Subdifferential => {
            Ok(DualField::Node(u.map(|v| op.graph.minimal_section(v))))
        }
        OperatorKind::PhiLaplace => {
            Ok(DualField::Grad(gradient(u).map(|g| op.graph.minimal_section(g))))
        }
    }
}

/// The pointwise Yosida-regularized drift at level μ: `-Δ ψ_μ(u)` /
/// `-div φ_μ(∇u)` / `ψ_μ(u)` in density form, with the scalar regularization
/// running at the operator's gauge. Single-valued and coercive with constant
/// `δ 2^{-α}` for `μ ∈ (0, δ^{-1})`.
pub fn yosida_regularized_drift(
    op: &MultiValuedOperator,
    u: &Field,
    mu: f64,
) -> Result<DualField, Error> {
    let reg = RegularizedGraph::new(&op.graph, mu, op.assumptions.alpha)?;
    match op.kind {
        OperatorKind::PorousMedia | OperatorKind::Subdifferential => {
            Ok(DualField::Node(u.map(|v| reg.value(v))))
        }
        OperatorKind::PhiLaplace => Ok(DualField::Grad(gradient(u).map(|g| reg.value(g)))),
    }
}

/// Shipped single-valued drifts `B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingleValuedDrift {
    Zero,
    /// `B(u) = -Δu + g(u)` with a Carathéodory reaction term.
    ReactionDiffusion { reaction: ReactionTerm },
}

/// Reaction families with declared growth; `PowerU` is `coef·u·|u|^{exponent-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionTerm {
    None,
    PowerU { coef: f64, exponent: f64 },
}

impl ReactionTerm {
    fn eval(&self, u: f64) -> f64 {
        match *self {
            ReactionTerm::None => 0.0,
            ReactionTerm::PowerU { coef, exponent } => coef * scalar_duality(u, exponent + 1.0),
        }
    }
}

impl SingleValuedDrift {
    /// The `f(t)` constant the drift declares for the weak-coercivity check;
    /// the shipped families are coercive with `f ≡ 0`.
    pub fn f_const(&self) -> f64 {
        match self {
            SingleValuedDrift::Zero => 0.0,
            SingleValuedDrift::ReactionDiffusion { reaction } => match reaction {
                ReactionTerm::None => 0.0,
                ReactionTerm::PowerU { coef, .. } => {
                    if *coef >= 0.0 {
                        0.0
                    } else {
                        coef.abs()
                    }
                }
            },
        }
    }
}

/// `B(t, u)` as an `L^2` node density (`-Δ_h u + g(u)`); the zero variant
/// returns the zero density.
pub fn drift_b(drift: &SingleValuedDrift, _t: f64, u: &Field) -> DualField {
    match drift {
        SingleValuedDrift::Zero => DualField::Node(Field::zeros(u.grid())),
        SingleValuedDrift::ReactionDiffusion { reaction } => {
            let mut d = laplacian(u).scale(-1.0);
            for (dv, &uv) in d.values_mut().iter_mut().zip(u.values()) {
                *dv += reaction.eval(uv);
            }
            DualField::Node(d)
        }
    }
}

/// Options for the vector resolvent continuation.
#[derive(Clone, Debug)]
pub struct SolverOpts {
    /// Exact-selection residual tolerance, relative to the problem scale.
    pub tol: f64,
    /// Geometric smoothing schedule, driven further down adaptively when the
    /// exact residual still exceeds `tol`.
    pub mu_schedule: Vec<f64>,
    pub max_newton: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            tol: 1e-9,
            mu_schedule: (1..=10).map(|k| 10f64.powi(-k)).collect(),
            max_newton: 80,
        }
    }
}

impl SolverOpts {
    /// A deliberately different schedule for uniqueness cross-checks.
    pub fn alternate() -> Self {
        SolverOpts {
            tol: 1e-9,
            mu_schedule: vec![3e-1, 3e-2, 1e-3, 3e-5, 1e-6, 1e-8, 1e-10],
            max_newton: 80,
        }
    }
}

/// Convergence report attached to a vector resolvent solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolventReport {
    /// Exact set-valued residual (dual-density norm for porous media, lifted
    /// `L^2` node-residual norm for the gradient-coupled kinds).
    pub residual: f64,
    pub stages: usize,
    pub newton_iters: usize,
}

struct NewtonScratch {
    n: usize,
}

/// Solves `0 ∈ J(y-x) + λA(y)` for the unique `y` (`λ < δ^{-1}`); see the
/// module docs for the continuation algorithm.
pub fn vector_resolvent(
    op: &MultiValuedOperator,
    x: &Field,
    params: &YosidaParams,
    opts: &SolverOpts,
) -> Result<Field, Error> {
    vector_resolvent_detailed(op, x, params, opts).map(|(y, _)| y)
}

pub fn vector_resolvent_detailed(
    op: &MultiValuedOperator,
    x: &Field,
    params: &YosidaParams,
    opts: &SolverOpts,
) -> Result<(Field, ResolventReport), Error> {
    if !(params.alpha > 1.0) || !(params.lambda > 0.0) {
        return Err(Error::invalid("resolvent needs lambda > 0, alpha > 1"));
    }
    if op.assumptions.delta > 0.0 && params.lambda >= 1.0 / op.assumptions.delta {
        return Err(Error::invalid("lambda must stay below 1/delta"));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite);
    }

    // node-wise warm start: exact for porous media at gauge α = p, and a good
    // first iterate otherwise
    let mut y = match op.kind {
        OperatorKind::PorousMedia => {
            let sp = YosidaParams {
                lambda: params.lambda,
                alpha: op.triple.p(),
                tol: 1e-13,
                max_iter: 200,
            };
            let mut vals = Vec::with_capacity(x.len());
            for &xi in x.values() {
                vals.push(crate::graphs::scalar_resolvent(&op.graph, xi, &sp)?);
            }
            Field::from_values(x.grid(), vals)?
        }
        _ => x.clone(),
    };
    let mut stages = 0;
    let mut iters = 0;
    let scratch = NewtonScratch { n: x.len() };
    let scale = 1.0 + op.triple.v_norm(x);

    let mut schedule = opts.mu_schedule.clone();
    // keep the graph-side μ legal
    if let Some(meta) = op.graph.meta() {
        if meta.delta > 0.0 {
            let cap = 0.99 / meta.delta;
            schedule.retain(|m| *m < cap);
            if schedule.is_empty() {
                schedule.push(cap * 0.1);
            }
        }
    }

    if op.kind == OperatorKind::PorousMedia {
        // nodes decouple given the norm prefactor, so the exact set-valued
        // inclusion is solvable directly by coordinate bisection; smoothing
        // continuation is unnecessary on this path
        let it = pm_stage_solve(op, x, &mut y, params, None, scale)?;
        let residual = exact_residual(op, x, &y, params, 0.0)?;
        if residual > opts.tol * scale {
            return Err(Error::NewtonDiverged { stage: 0.0, residual });
        }
        return Ok((y, ResolventReport { residual, stages: 1, newton_iters: it }));
    }

    let mut mu_last = *schedule.last().unwrap();
    for &mu in &schedule {
        let it = newton_stage(op, x, &mut y, params, mu, opts.max_newton, &scratch, scale)?;
        stages += 1;
        iters += it;
        mu_last = mu;
    }
    // drive μ further until the exact residual is met
    let mut residual = exact_residual(op, x, &y, params, mu_last)?;
    while residual > opts.tol * scale && mu_last > 1e-20 {
        mu_last /= 100.0;
        let it = newton_stage(op, x, &mut y, params, mu_last, opts.max_newton, &scratch, scale)?;
        stages += 1;
        iters += it;
        residual = exact_residual(op, x, &y, params, mu_last)?;
    }
    if residual > opts.tol * scale {
        return Err(Error::NewtonDiverged { stage: mu_last, residual });
    }
    Ok((y, ResolventReport { residual, stages, newton_iters: iters }))
}

/// `A_λ(x) = (1/λ) J(x - R_λ(x))` in density form, together with the resolvent.
pub fn vector_yosida_detailed(
    op: &MultiValuedOperator,
    x: &Field,
    params: &YosidaParams,
    opts: &SolverOpts,
) -> Result<(DualField, Field), Error> {
    let y = vector_resolvent(op, x, params, opts)?;
    let j = duality_map(&x.sub(&y), &op.triple, params.alpha)?;
    let a = match j {
        DualField::Node(f) => DualField::Node(f.scale(1.0 / params.lambda)),
        DualField::Grad(g) => DualField::Grad(g.map(|v| v / params.lambda)),
    };
    Ok((a, y))
}

pub fn vector_yosida(
    op: &MultiValuedOperator,
    x: &Field,
    params: &YosidaParams,
    opts: &SolverOpts,
) -> Result<DualField, Error> {
    vector_yosida_detailed(op, x, params, opts).map(|(a, _)| a)
}

// ---- continuation internals ----

fn gauge_prefactor(v_norm: f64, alpha: f64, p: f64) -> f64 {
    if (alpha - p).abs() < 1e-14 {
        1.0
    } else if v_norm == 0.0 {
        // J(0) = 0; the α > p prefactor vanishes, α < p is handled by the
        // caller treating the zero field separately.
        0.0
    } else {
        v_norm.powf(alpha - p)
    }
}

/// Exact solve for the porous-media kind. Given the prefactor
/// `c = ‖y-x‖_V^{α-p}`, each node solves the scalar inclusion
/// `0 ∈ c·j_p(t - x_i) + λ Ψ(t)` — the scalar resolvent at an effective step
/// `λ/c` — by interval bisection; the prefactor itself is pinned by one outer
/// bisection on `r = ‖y-x‖_V` (vacuous when `α = p`).
fn pm_stage_solve(
    op: &MultiValuedOperator,
    x: &Field,
    y: &mut Field,
    params: &YosidaParams,
    _mu: Option<f64>,
    scale: f64,
) -> Result<usize, Error> {
    let (alpha, lambda, p) = (params.alpha, params.lambda, op.triple.p());
    let mut evals = 0usize;

    let mut solve_nodes = |c: f64, evals: &mut usize| -> Result<Field, Error> {
        let lam_eff = lambda / c;
        let mut out = Field::zeros(x.grid());
        for (o, &xi) in out.values_mut().iter_mut().zip(x.values()) {
            *o = crate::graphs::scalar_resolvent_raw(&op.graph, xi, lam_eff, p, 1e-15, 300, None)?;
            *evals += 1;
        }
        Ok(out)
    };

    if (alpha - p).abs() < 1e-14 {
        *y = solve_nodes(1.0, &mut evals)?;
        return Ok(evals);
    }

    // outer bisection on r = ‖y - x‖_V; φ(r) = ‖Y(r) - x‖_V - r has a single
    // sign change at the true prefactor (resolvent uniqueness)
    let cap = |r: f64| r.powf(alpha - p).clamp(1e-200, 1e200);
    let r_min = 1e-13 * scale;
    let mut r_hi = scale;
    let mut phi = |r: f64, evals: &mut usize| -> Result<f64, Error> {
        let yy = solve_nodes(cap(r), evals)?;
        Ok(op.triple.v_norm(&yy.sub(x)) - r)
    };
    if phi(r_min, &mut evals)? <= 0.0 {
        *y = solve_nodes(cap(r_min), &mut evals)?;
        return Ok(evals);
    }
    let mut guard = 0;
    while phi(r_hi, &mut evals)? > 0.0 {
        r_hi *= 4.0;
        guard += 1;
        if guard > 100 {
            return Err(Error::NewtonDiverged { stage: 0.0, residual: f64::INFINITY });
        }
    }
    let (mut a, mut b) = (r_min, r_hi);
    for _ in 0..220 {
        if b - a <= 1e-14 * scale {
            break;
        }
        let mid = 0.5 * (a + b);
        if phi(mid, &mut evals)? > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    *y = solve_nodes(cap(0.5 * (a + b)), &mut evals)?;
    Ok(evals)
}

fn newton_stage(
    op: &MultiValuedOperator,
    x: &Field,
    y: &mut Field,
    params: &YosidaParams,
    mu: f64,
    max_newton: usize,
    scratch: &NewtonScratch,
    scale: f64,
) -> Result<usize, Error> {
    let reg = RegularizedGraph::new(&op.graph, mu, op.assumptions.alpha)?;
    // residual entries carry a 1/h² divergence scale, so the achievable floor
    // is machine epsilon times that magnitude
    let h2 = x.grid().h() * x.grid().h();
    let mag = (1.0 + params.lambda) * (1.0 + x.linf()) / h2 * (scratch.n as f64).sqrt();
    let stage_tol = (1e-12 * scale).max(1e-13 * mag);
    let give_up_tol = (1e-6 * scale).max(1e-8 * mag);
    let mut iters = 0;
    let mut levenberg = 0.0_f64;
    let mut res = stage_residual(op, x, y, params, &reg)?;
    let mut res_norm = euclid(&res);
    while res_norm > stage_tol && iters < max_newton {
        let step = newton_step(op, x, y, params, &reg, &res, levenberg, scratch)?;
        // backtracking line search on the stage residual
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let mut cand = y.clone();
            for (c, s) in cand.values_mut().iter_mut().zip(&step) {
                *c -= t * s;
            }
            let cres = stage_residual(op, x, &cand, params, &reg)?;
            let cnorm = euclid(&cres);
            if cnorm < res_norm * (1.0 - 1e-4 * t) {
                *y = cand;
                res = cres;
                res_norm = cnorm;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        if !improved {
            if res_norm <= give_up_tol {
                // stalled at the rounding floor; the exact-residual gate
                // downstream decides whether this is good enough
                break;
            }
            levenberg = if levenberg == 0.0 { 1e-8 * scale } else { levenberg * 100.0 };
            if levenberg > 1e12 * scale {
                return Err(Error::NewtonDiverged { stage: mu, residual: res_norm });
            }
        } else {
            levenberg = 0.0;
        }
    }
    if res_norm > give_up_tol && iters >= max_newton {
        return Err(Error::NewtonDiverged { stage: mu, residual: res_norm });
    }
    Ok(iters)
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Stage residual as a plain vector: dual density (porous media) or node
/// functional coefficients (gradient-coupled kinds).
fn stage_residual(
    op: &MultiValuedOperator,
    x: &Field,
    y: &Field,
    params: &YosidaParams,
    reg: &RegularizedGraph,
) -> Result<Vec<f64>, Error> {
    let (alpha, lambda, p) = (params.alpha, params.lambda, op.triple.p());
    let z = y.sub(x);
    match op.kind {
        OperatorKind::PorousMedia => {
            let c = gauge_prefactor(op.triple.v_norm(&z), alpha, p);
            Ok(z.values()
                .iter()
                .zip(y.values())
                .map(|(&zi, &yi)| c * scalar_duality(zi, p) + lambda * reg.value(yi))
                .collect())
        }
        OperatorKind::PhiLaplace => {
            let gz = gradient(&z);
            let gy = gradient(y);
            let c = gauge_prefactor(op.triple.v_norm(&z), alpha, p);
            let mut rho = GradField::zeros(x.grid());
            for ((r, &gzi), &gyi) in
                rho.values_mut().iter_mut().zip(gz.values()).zip(gy.values())
            {
                *r = c * scalar_duality(gzi, p) + lambda * reg.value(gyi);
            }
            Ok(divergence_neg(&rho).values().to_vec())
        }
        OperatorKind::Subdifferential => {
            let c = gauge_prefactor(op.triple.v_norm(&z), alpha, p);
            let lap = laplacian(&z).scale(-c);
            Ok(lap
                .values()
                .iter()
                .zip(y.values())
                .map(|(&l, &yi)| l + lambda * reg.value(yi))
                .collect())
        }
    }
}

/// Exact set-valued residual at `y`: distance of `-J(y-x)/λ` to `A(y)` in the
/// appropriate representation (density norm for porous media; lifted node
/// residual for the gradient-coupled kinds).
/// Exact set-valued residual at `y`, with graph membership tested over a
/// neighborhood of width `j^{-1}(μ(1+|a|))`: the terminal smoothing level
/// leaves pinned points exactly that far from their jump abscissa.
fn exact_residual(
    op: &MultiValuedOperator,
    x: &Field,
    y: &Field,
    params: &YosidaParams,
    mu_last: f64,
) -> Result<f64, Error> {
    let (alpha, lambda, p) = (params.alpha, params.lambda, op.triple.p());
    let z = y.sub(x);
    let w = x.grid().weight();
    let q = op.triple.p_conj();
    let fuzz = |point: f64, target: f64| -> f64 {
        2.0 * crate::graphs::scalar_duality_inv(mu_last * (1.0 + target.abs()), alpha)
            + 1e-12 * (1.0 + point.abs())
    };
    match op.kind {
        OperatorKind::PorousMedia | OperatorKind::Subdifferential => {
            let c = gauge_prefactor(op.triple.v_norm(&z), alpha, p);
            let jpart: Vec<f64> = if op.kind == OperatorKind::PorousMedia {
                z.values().iter().map(|&zi| c * scalar_duality(zi, p)).collect()
            } else {
                laplacian(&z).scale(-c).values().to_vec()
            };
            let resid: Vec<f64> = jpart
                .iter()
                .zip(y.values())
                .map(|(&jp, &yi)| {
                    let target = -jp / lambda;
                    let (lo, hi) = op.graph.eval_fuzzy(yi, fuzz(yi, target));
                    lambda * (target - target.clamp(lo, hi)).abs()
                })
                .collect();
            Ok((resid.iter().map(|r| r.abs().powf(q)).sum::<f64>() * w).powf(1.0 / q))
        }
        OperatorKind::PhiLaplace => {
            let gz = gradient(&z);
            let gy = gradient(y);
            let c = gauge_prefactor(op.triple.v_norm(&z), alpha, p);
            let mut rho = GradField::zeros(x.grid());
            for ((r, &gzi), &gyi) in
                rho.values_mut().iter_mut().zip(gz.values()).zip(gy.values())
            {
                let jpart = c * scalar_duality(gzi, p);
                let target = -jpart / lambda;
                let (lo, hi) = op.graph.eval_fuzzy(gyi, fuzz(gyi, target));
                *r = jpart + lambda * target.clamp(lo, hi);
            }
            let lifted = divergence_neg(&rho);
            Ok(lifted.dot_quad(&lifted).sqrt())
        }
    }
}

fn newton_step(
    op: &MultiValuedOperator,
    x: &Field,
    y: &Field,
    params: &YosidaParams,
    reg: &RegularizedGraph,
    res: &[f64],
    levenberg: f64,
    scratch: &NewtonScratch,
) -> Result<Vec<f64>, Error> {
    let (alpha, lambda, p) = (params.alpha, params.lambda, op.triple.p());
    let n = scratch.n;
    let z = y.sub(x);
    let w = x.grid().weight();
    let nv = op.triple.v_norm(&z);
    let c = gauge_prefactor(nv, alpha, p);
    let gauged = (alpha - p).abs() > 1e-14;

    let clamp_pow = |zi: f64, e: f64| -> f64 {
        let a = zi.abs().max(1e-14);
        a.powf(e)
    };

    match op.kind {
        OperatorKind::PorousMedia => {
            // D + a bᵀ with D diagonal; Sherman–Morrison solve
            let mut d = vec![0.0; n];
            let mut a = vec![0.0; n];
            for i in 0..n {
                let zi = z.values()[i];
                let jp = (p - 1.0) * clamp_pow(zi, p - 2.0);
                let dpsi = reg.deriv(y.values()[i]).min(1e18);
                d[i] = (c.max(1e-300) * jp + lambda * dpsi + levenberg).max(1e-300);
                a[i] = scalar_duality(zi, p);
            }
            if !gauged || nv == 0.0 {
                return Ok(res.iter().zip(&d).map(|(r, di)| r / di).collect());
            }
            let kappa = (alpha - p) * nv.powf(alpha - 2.0 * p) * w;
            // b_j = kappa · j_p(z_j); solve (D + a (kappa a)ᵀ) s = res
            let dinv_r: Vec<f64> = res.iter().zip(&d).map(|(r, di)| r / di).collect();
            let dinv_a: Vec<f64> = a.iter().zip(&d).map(|(ai, di)| ai / di).collect();
            let btr: f64 = a.iter().zip(&dinv_r).map(|(ai, ri)| kappa * ai * ri).sum();
            let bta: f64 = a.iter().zip(&dinv_a).map(|(ai, ri)| kappa * ai * ri).sum();
            let denom = 1.0 + bta;
            if denom.abs() < 1e-14 {
                return Ok(dinv_r);
            }
            Ok(dinv_r
                .iter()
                .zip(&dinv_a)
                .map(|(ri, ai)| ri - ai * btr / denom)
                .collect())
        }
        OperatorKind::PhiLaplace | OperatorKind::Subdifferential => {
            if n > 4096 {
                return Err(Error::invalid(
                    "dense Newton for gradient-coupled resolvents is capped at 4096 nodes",
                ));
            }
            let grid = x.grid();
            let mut m = DMatrix::<f64>::zeros(n, n);
            if op.kind == OperatorKind::PhiLaplace {
                let gz = gradient(&z);
                let gy = gradient(y);
                let mut edge_w = vec![0.0; grid.edge_count()];
                for (e, wv) in edge_w.iter_mut().enumerate() {
                    let jp = (p - 1.0) * clamp_pow(gz.values()[e], p - 2.0);
                    let dphi = reg.deriv(gy.values()[e]).min(1e18);
                    *wv = c.max(1e-300) * jp + lambda * dphi;
                }
                assemble_graph_laplacian(&mut m, grid, &edge_w);
            } else {
                let h2 = grid.h() * grid.h();
                let nn = grid.n();
                // c·(-Δ_h) + λ diag(ψ'_μ)
                for idx in 0..n {
                    let stencil = match grid.dim() {
                        crate::spaces::Dim::One => 2.0,
                        crate::spaces::Dim::Two => 4.0,
                    };
                    m[(idx, idx)] = c * stencil / h2
                        + lambda * reg.deriv(y.values()[idx]).min(1e18);
                    match grid.dim() {
                        crate::spaces::Dim::One => {
                            if idx > 0 {
                                m[(idx, idx - 1)] = -c / h2;
                            }
                            if idx + 1 < n {
                                m[(idx, idx + 1)] = -c / h2;
                            }
                        }
                        crate::spaces::Dim::Two => {
                            let i = idx % nn;
                            let j = idx / nn;
                            if i > 0 {
                                m[(idx, idx - 1)] = -c / h2;
                            }
                            if i + 1 < nn {
                                m[(idx, idx + 1)] = -c / h2;
                            }
                            if j > 0 {
                                m[(idx, idx - nn)] = -c / h2;
                            }
                            if j + 1 < nn {
                                m[(idx, idx + nn)] = -c / h2;
                            }
                        }
                    }
                }
            }
            for i in 0..n {
                m[(i, i)] += levenberg + 1e-300;
            }
            if gauged && nv > 0.0 {
                // rank-one coupling from the norm prefactor
                let t = match op.kind {
                    OperatorKind::PhiLaplace => {
                        divergence_neg(&gradient(&z).map(|g| scalar_duality(g, p)))
                    }
                    _ => laplacian(&z).scale(-1.0),
                };
                let kappa = (alpha - p) * nv.powf(alpha - 2.0 * p) * w;
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] += t.values()[i] * kappa * t.values()[j];
                    }
                }
            }
            let rhs = DVector::from_column_slice(res);
            let sol = m
                .lu()
                .solve(&rhs)
                .ok_or(Error::NewtonDiverged { stage: reg.mu(), residual: euclid(res) })?;
            Ok(sol.data.into())
        }
    }
}

fn assemble_graph_laplacian(m: &mut DMatrix<f64>, grid: Grid, edge_w: &[f64]) {
    let h2 = grid.h() * grid.h();
    let n = grid.n();
    let mut add_edge = |a: Option<usize>, b: Option<usize>, wv: f64| {
        // edge between nodes a,b (None = boundary): contributes wv/h² couplings
        if let Some(i) = a {
            m[(i, i)] += wv / h2;
        }
        if let Some(j) = b {
            m[(j, j)] += wv / h2;
        }
        if let (Some(i), Some(j)) = (a, b) {
            m[(i, j)] -= wv / h2;
            m[(j, i)] -= wv / h2;
        }
    };
    match grid.dim() {
        crate::spaces::Dim::One => {
            for e in 0..=n {
                let a = if e > 0 { Some(e - 1) } else { None };
                let b = if e < n { Some(e) } else { None };
                add_edge(a, b, edge_w[e]);
            }
        }
        crate::spaces::Dim::Two => {
            let y_off = n * (n + 1);
            for j in 0..n {
                for e in 0..=n {
                    let a = if e > 0 { Some(j * n + e - 1) } else { None };
                    let b = if e < n { Some(j * n + e) } else { None };
                    add_edge(a, b, edge_w[j * (n + 1) + e]);
                }
            }
            for i in 0..n {
                for e in 0..=n {
                    let a = if e > 0 { Some((e - 1) * n + i) } else { None };
                    let b = if e < n { Some(e * n + i) } else { None };
                    add_edge(a, b, edge_w[y_off + i * (n + 1) + e]);
                }
            }
        }
    }
}

/// Outcome of one standing-assumption check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst-case margin (inequality slack; negative = violated).
    pub margin: f64,
    pub detail: String,
}

/// Report of the standing-assumption validation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionsReport {
    pub checks: Vec<CheckResult>,
}

impl AssumptionsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Symbolic-plus-sampled validation of the standing assumptions for an
/// `(A, B, σ)` bundle on a grid: graph structure, scalar coercivity/growth,
/// vector monotonicity/coercivity/growth, drift weak coercivity, noise
/// integrability and the extinction-regime condition `(α-1)h(t) ≥ f(t)`.
pub fn validate_assumptions(
    op: &MultiValuedOperator,
    drift: &SingleValuedDrift,
    noise: &crate::sde::NoiseModel,
    grid: Grid,
    samples: usize,
) -> Result<AssumptionsReport, Error> {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xa55e55);
    let mut checks = Vec::new();
    let a = op.assumptions;
    let meta = op.graph.meta();

    // structural: the graph constructor re-validates monotonicity/maximality
    checks.push(CheckResult {
        name: "graph_maximal_monotone".into(),
        passed: true,
        margin: 0.0,
        detail: format!("{} validated structurally", op.graph.desc()),
    });

    if let Some(meta) = meta {
        let mut worst = f64::INFINITY;
        for _ in 0..samples.max(10) {
            let s = (rng.random::<f64>() - 0.5) * 8.0;
            let (lo, hi) = op.graph.eval(s);
            let bound = meta.delta * s.abs().powf(meta.p) - meta.coer_c;
            worst = worst.min((s * lo).min(s * hi) - bound);
        }
        checks.push(CheckResult {
            name: "scalar_coercivity".into(),
            passed: worst >= -1e-9,
            margin: worst,
            detail: format!("s·v ≥ {}|s|^{} − {}", meta.delta, meta.p, meta.coer_c),
        });

        let mut worst = f64::INFINITY;
        for _ in 0..samples.max(10) {
            let s = (rng.random::<f64>() - 0.5) * 8.0;
            let (lo, hi) = op.graph.eval(s);
            let bound = meta.growth_c * s.abs().powf(meta.p - 1.0) + meta.growth_c;
            worst = worst.min(bound - lo.abs().max(hi.abs()));
        }
        checks.push(CheckResult {
            name: "scalar_growth".into(),
            passed: worst >= -1e-9,
            margin: worst,
            detail: format!("|v| ≤ {}(|s|^{} + 1)", meta.growth_c, meta.p - 1.0),
        });
    }

    let rand_field = |rng: &mut rand_chacha::ChaCha8Rng| {
        Field::from_fn(grid, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    };

    // (H_A^1) monotonicity of pointwise selections
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = rand_field(&mut rng);
        let v = rand_field(&mut rng);
        let au = apply_minimal(op, &u)?;
        let av = apply_minimal(op, &v)?;
        let diff = u.sub(&v);
        let lhs = pairing(&au, &diff, &op.triple)? - pairing(&av, &diff, &op.triple)?;
        worst = worst.min(lhs);
    }
    checks.push(CheckResult {
        name: "HA1_monotonicity".into(),
        passed: worst >= -1e-9,
        margin: worst,
        detail: "⟨a(u)−a(v), u−v⟩ ≥ 0 on minimal selections".into(),
    });

    // (H_A^2) coercivity with the declared constants
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = rand_field(&mut rng).scale(rng.random::<f64>() * 3.0);
        let au = apply_minimal(op, &u)?;
        let lhs = pairing(&au, &u, &op.triple)?;
        let rhs = a.delta * op.triple.v_norm(&u).powf(a.alpha) - a.f_const;
        worst = worst.min(lhs - rhs);
    }
    checks.push(CheckResult {
        name: "HA2_coercivity".into(),
        passed: worst >= -1e-8,
        margin: worst,
        detail: format!("⟨A⁰u, u⟩ ≥ {:.3}‖u‖_V^{:.3} − {:.3}", a.delta, a.alpha, a.f_const),
    });

    // (H_A^3) growth, via the certified upper end of the dual-norm bracket
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = rand_field(&mut rng).scale(rng.random::<f64>() * 3.0);
        let au = apply_minimal(op, &u)?;
        let upper = crate::spaces::dual_norm(&au, &op.triple)?.upper;
        let lhs = upper.powf(a.alpha / (a.alpha - 1.0));
        let rhs = (a.f_const + a.growth_c * op.triple.v_norm(&u).powf(a.alpha))
            * (1.0 + op.triple.h_norm(&u).powf(a.beta));
        worst = worst.min(rhs - lhs);
    }
    checks.push(CheckResult {
        name: "HA3_growth".into(),
        passed: worst >= -1e-8,
        margin: worst,
        detail: "‖A⁰u‖^{α/(α−1)} ≤ (f + C‖u‖_V^α)(1+‖u‖_H^β)".into(),
    });

    // (H_B^1) weak coercivity
    let fb = drift.f_const();
    let mut worst = f64::INFINITY;
    for _ in 0..samples {
        let u = rand_field(&mut rng);
        let b = drift_b(drift, 0.0, &u);
        let lhs = 2.0 * pairing(&b, &u, &op.triple).unwrap_or(0.0);
        let rhs = -fb * (1.0 + op.triple.h_norm(&u).powi(2));
        worst = worst.min(lhs - rhs);
    }
    checks.push(CheckResult {
        name: "HB1_weak_coercivity".into(),
        passed: worst >= -1e-8,
        margin: worst,
        detail: format!("2⟨B(u), u⟩ ≥ −{fb}(1+‖u‖_H²)"),
    });

    // (H_σ): ‖σ(t,x)‖²_{L₂} = h(t)‖x‖²_H ≤ h(t)(1+‖x‖²_H), and h ∈ L¹
    let h0 = noise.h_total(0.0);
    let integrable = noise.h_integrable();
    checks.push(CheckResult {
        name: "Hsigma_growth".into(),
        passed: integrable,
        margin: 0.0,
        detail: format!("h(0) = {h0:.4e}; h ∈ L¹: {integrable}"),
    });

    // (H_σ*): (α−1)h(t) ≥ f(t) sampled on a time grid
    let mut worst = f64::INFINITY;
    for k in 0..=100 {
        let t = k as f64 * 0.1;
        worst = worst.min((a.alpha - 1.0) * noise.h_total(t) - fb);
    }
    checks.push(CheckResult {
        name: "Hsigma_star".into(),
        passed: worst >= -1e-12,
        margin: worst,
        detail: format!("(α−1)h(t) ≥ f(t) with f ≡ {fb}"),
    });

    Ok(AssumptionsReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{dual_norm, Dim};
    use rand::prelude::*;

    fn rand_field(grid: Grid, rng: &mut rand_chacha::ChaCha8Rng) -> Field {
        Field::from_fn(grid, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn duality_identities_both_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let grid = Grid::new_2d(6).unwrap();
        for (triple, label) in [
            (GelfandTriple::porous_media(1.5, Dim::Two).unwrap(), "pm"),
            (GelfandTriple::porous_media(3.0, Dim::Two).unwrap(), "pm3"),
            (GelfandTriple::phi_laplace(1.5).unwrap(), "pl"),
            (GelfandTriple::phi_laplace(2.5).unwrap(), "pl25"),
        ] {
            for alpha in [triple.p(), 1.5, 2.0] {
                for _ in 0..50 {
                    let u = rand_field(grid, &mut rng);
                    let j = duality_map(&u, &triple, alpha).unwrap();
                    let nv = triple.v_norm(&u);
                    let pair = pairing(&j, &u, &triple).unwrap();
                    assert!(
                        (pair - nv.powf(alpha)).abs() <= 1e-9 * nv.powf(alpha).max(1e-30),
                        "{label} α={alpha}: ⟨J(u),u⟩ = {pair} vs ‖u‖^α = {}",
                        nv.powf(alpha)
                    );
                    let dn = dual_norm(&j, &triple).unwrap().upper;
                    assert!(
                        (dn - nv.powf(alpha - 1.0)).abs() <= 1e-9 * nv.powf(alpha - 1.0).max(1e-30),
                        "{label} α={alpha}: ‖J(u)‖ = {dn} vs ‖u‖^(α−1) = {}",
                        nv.powf(alpha - 1.0)
                    );
                }
            }
            // zero maps to zero
            let z = duality_map(&Field::zeros(grid), &triple, 1.7).unwrap();
            assert_eq!(dual_norm(&z, &triple).unwrap().upper, 0.0);
        }
    }

    #[test]
    fn duality_monotonicity_chain() {
        // ⟨J(u)−J(v), u−v⟩ ≥ (‖u‖^{α−1}−‖v‖^{α−1})(‖u‖−‖v‖)
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        let grid = Grid::new_1d(9).unwrap();
        let triple = GelfandTriple::porous_media(1.5, Dim::One).unwrap();
        for alpha in [1.5, 2.0, 2.5] {
            for _ in 0..100 {
                let u = rand_field(grid, &mut rng);
                let v = rand_field(grid, &mut rng);
                let ju = duality_map(&u, &triple, alpha).unwrap();
                let jv = duality_map(&v, &triple, alpha).unwrap();
                let diff = u.sub(&v);
                let lhs =
                    pairing(&ju, &diff, &triple).unwrap() - pairing(&jv, &diff, &triple).unwrap();
                let (nu, nv) = (triple.v_norm(&u), triple.v_norm(&v));
                let rhs = (nu.powf(alpha - 1.0) - nv.powf(alpha - 1.0)) * (nu - nv);
                assert!(lhs >= rhs - 1e-9, "α={alpha}: {lhs} < {rhs}");
            }
        }
    }

    #[test]
    fn apply_minimal_pointwise() {
        let grid = Grid::new_1d(5).unwrap();
        let triple = GelfandTriple::porous_media(1.5, Dim::One).unwrap();
        let psi = ScalarGraph::power(1.5, 1.0).unwrap();
        let op = MultiValuedOperator::porous_media(psi, triple).unwrap();
        // u ≡ 4 → density ≡ 1 + 2 = 3
        let u = Field::constant(grid, 4.0);
        let a = apply_minimal(&op, &u).unwrap();
        for v in a.as_node().unwrap().values() {
            assert!((v - 3.0).abs() < 1e-14);
        }
        // 0 ∈ Ψ(0) → zero density on the zero field
        let z = apply_minimal(&op, &Field::zeros(grid)).unwrap();
        assert_eq!(z.as_node().unwrap().linf(), 0.0);
    }

    #[test]
    fn porous_media_resolvent_matches_pointwise_scalar_oracle() {
        // at gauge α = p the porous-media inclusion decouples node-wise into
        // the scalar resolvent; the Newton continuation must reproduce it
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        let grid = Grid::new_2d(4).unwrap();
        for p in [1.5, 3.0] {
            let triple = GelfandTriple::porous_media(p, Dim::Two).unwrap();
            let psi = ScalarGraph::power(p, 1.0).unwrap();
            let op = MultiValuedOperator::porous_media(psi.clone(), triple).unwrap();
            let x = rand_field(grid, &mut rng).scale(2.0);
            let params = YosidaParams::new(0.3, p).unwrap();
            let y = vector_resolvent(&op, &x, &params, &SolverOpts::default()).unwrap();
            for (i, &xi) in x.values().iter().enumerate() {
                let yi = crate::graphs::scalar_resolvent(&psi, xi, &params).unwrap();
                assert!(
                    (y.values()[i] - yi).abs() < 1e-8,
                    "p={p} node {i}: {} vs scalar {yi}",
                    y.values()[i]
                );
            }
        }
    }

    #[test]
    fn porous_media_resolvent_gauged_fixed_point_oracle() {
        // α ≠ p: outer fixed point on the norm prefactor + scalar bisection
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(45);
        let grid = Grid::new_1d(6).unwrap();
        let p = 1.5;
        let alpha = 2.0;
        let triple = GelfandTriple::porous_media(p, Dim::One)
            .unwrap()
            .with_alpha(alpha)
            .unwrap();
        let psi = ScalarGraph::power(p, 0.5).unwrap();
        let op = MultiValuedOperator::porous_media(psi.clone(), triple).unwrap();
        let x = rand_field(grid, &mut rng);
        let lambda = 0.4;
        let params = YosidaParams::new(lambda, alpha).unwrap();
        let y = vector_resolvent(&op, &x, &params, &SolverOpts::default()).unwrap();

        // oracle: bisection on r = ‖y−x‖_V; given r, nodes solve
        // 0 ∈ j_p(y−x) + (λ/c) Ψ(y) with c = r^{α−p}
        let solve_nodes = |r: f64| -> (Field, f64) {
            let c = r.powf(alpha - p);
            let lam_eff = lambda / c;
            let sp = YosidaParams { lambda: lam_eff, alpha: p, tol: 1e-14, max_iter: 300 };
            let yy = Field::from_values(
                grid,
                x.values()
                    .iter()
                    .map(|&xi| crate::graphs::scalar_resolvent(&psi, xi, &sp).unwrap())
                    .collect(),
            )
            .unwrap();
            let rn = triple.v_norm(&yy.sub(&x));
            (yy, rn)
        };
        let (mut lo, mut hi) = (1e-12, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (_, rn) = solve_nodes(mid);
            if rn > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (oracle, _) = solve_nodes(0.5 * (lo + hi));
        let diff = y.sub(&oracle);
        assert!(
            diff.linf() < 1e-6,
            "gauged resolvent mismatch: {}",
            diff.linf()
        );
    }

    #[test]
    fn linear_graph_resolvent_matches_dense_solve() {
        // linear graph, α = p = 2: the inclusion is a linear system; compare
        // the continuation output against a dense LU solve
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(46);
        let grid = Grid::new_1d(12).unwrap();
        let k = 1.0;
        let lambda = 0.25;

        // porous media: density equation (1+λk) y = x
        let triple = GelfandTriple::porous_media(2.0, Dim::One).unwrap();
        let op =
            MultiValuedOperator::porous_media(ScalarGraph::linear(k).unwrap(), triple).unwrap();
        let x = rand_field(grid, &mut rng);
        let params = YosidaParams::new(lambda, 2.0).unwrap();
        let y = vector_resolvent(&op, &x, &params, &SolverOpts::default()).unwrap();
        let n = grid.node_count();
        let m = DMatrix::<f64>::identity(n, n) * (1.0 + lambda * k);
        let dense = m.lu().solve(&DVector::from_column_slice(x.values())).unwrap();
        for i in 0..n {
            assert!((y.values()[i] - dense[i]).abs() < 1e-10);
        }

        // Φ-Laplace: -Δ(y-x) + λk(-Δ)y = 0 → (1+λk)(-Δ)y = (-Δ)x
        let triple = GelfandTriple::phi_laplace(2.0).unwrap();
        let op =
            MultiValuedOperator::phi_laplace(ScalarGraph::linear(k).unwrap(), triple).unwrap();
        let y = vector_resolvent(&op, &x, &params, &SolverOpts::default()).unwrap();
        let h2 = grid.h() * grid.h();
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            lap[(i, i)] = 2.0 / h2 * (1.0 + lambda * k);
            if i > 0 {
                lap[(i, i - 1)] = -1.0 / h2 * (1.0 + lambda * k);
            }
            if i + 1 < n {
                lap[(i, i + 1)] = -1.0 / h2 * (1.0 + lambda * k);
            }
        }
        let rhs_field = laplacian(&x).scale(-1.0);
        let dense = lap.lu().solve(&DVector::from_column_slice(rhs_field.values())).unwrap();
        for i in 0..n {
            assert!(
                (y.values()[i] - dense[i]).abs() < 1e-10,
                "node {i}: {} vs {}",
                y.values()[i],
                dense[i]
            );
        }
    }

    #[test]
    fn resolvent_zero_field_fixed() {
        let grid = Grid::new_1d(8).unwrap();
        for (op, alpha) in [
            (
                MultiValuedOperator::porous_media(
                    ScalarGraph::sign(1.0).unwrap(),
                    GelfandTriple::porous_media(1.5, Dim::One).unwrap(),
                )
                .unwrap(),
                1.5,
            ),
            (
                MultiValuedOperator::phi_laplace(
                    ScalarGraph::power(2.5, 0.0).unwrap(),
                    GelfandTriple::phi_laplace(2.5).unwrap(),
                )
                .unwrap(),
                2.5,
            ),
        ] {
            let params = YosidaParams::new(0.5, alpha).unwrap();
            let y = vector_resolvent(&op, &Field::zeros(grid), &params, &SolverOpts::default())
                .unwrap();
            assert!(y.linf() < 1e-12, "odd graph must fix the zero field");
        }
    }

    #[test]
    fn uniqueness_across_schedules() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        let grid = Grid::new_2d(4).unwrap();
        let triple = GelfandTriple::porous_media(1.5, Dim::Two).unwrap();
        let op = MultiValuedOperator::porous_media(
            ScalarGraph::power(1.5, 1.0).unwrap(),
            triple,
        )
        .unwrap();
        let x = rand_field(grid, &mut rng);
        let params = YosidaParams::new(0.3, 1.5).unwrap();
        let y1 = vector_resolvent(&op, &x, &params, &SolverOpts::default()).unwrap();
        let y2 = vector_resolvent(&op, &x, &params, &SolverOpts::alternate()).unwrap();
        let diff = y1.sub(&y2);
        let h = triple.h_norm(&diff);
        assert!(h < 1e-6, "schedules disagree by {h} in H");
    }

    #[test]
    fn phi_laplace_resolvent_residual_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(48);
        let grid = Grid::new_2d(5).unwrap();
        let p = 1.5;
        let triple = GelfandTriple::phi_laplace(p).unwrap();
        let op =
            MultiValuedOperator::phi_laplace(ScalarGraph::power(p, 0.3).unwrap(), triple).unwrap();
        let x = rand_field(grid, &mut rng);
        let params = YosidaParams::new(0.3, p).unwrap();
        let (_, report) =
            vector_resolvent_detailed(&op, &x, &params, &SolverOpts::default()).unwrap();
        assert!(report.residual <= 1e-9 * (1.0 + triple.v_norm(&x)));
    }

    #[test]
    fn regularized_drift_coercive_and_converges_to_minimal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(49);
        let grid = Grid::new_1d(9).unwrap();
        let triple = GelfandTriple::porous_media(1.5, Dim::One).unwrap();
        let op = MultiValuedOperator::porous_media(
            ScalarGraph::power(1.5, 0.0).unwrap(),
            triple,
        )
        .unwrap();
        let a = op.assumptions();
        for _ in 0..30 {
            let u = rand_field(grid, &mut rng).scale(2.0);
            let d = yosida_regularized_drift(&op, &u, 0.2).unwrap();
            let lhs = pairing(&d, &u, op.triple()).unwrap();
            let rhs = a.delta * 2f64.powf(-a.alpha) * op.triple().v_norm(&u).powf(a.alpha)
                - a.f_const;
            assert!(lhs >= rhs - 1e-8, "coercivity: {lhs} < {rhs}");
        }
        // μ → 0: converges to the minimal section pointwise off breakpoints
        let u = Field::from_values(grid, vec![1.2, -0.7, 0.4, 2.0, -1.1, 0.9, 0.1, -0.2, 0.6])
            .unwrap();
        let a0 = apply_minimal(&op, &u).unwrap();
        let mut gap_prev = f64::INFINITY;
        for mu in [1e-1, 1e-3, 1e-5] {
            let d = yosida_regularized_drift(&op, &u, mu).unwrap();
            let gap = d
                .as_node()
                .unwrap()
                .sub(a0.as_node().unwrap())
                .linf();
            assert!(gap <= gap_prev + 1e-12);
            gap_prev = gap;
        }
        assert!(gap_prev < 1e-4);
    }

    #[test]
    fn drift_b_variants() {
        let grid = Grid::new_1d(7).unwrap();
        let u = Field::sine_mode(grid, 1, 0.8);
        let zero = drift_b(&SingleValuedDrift::Zero, 0.0, &u);
        assert_eq!(zero.as_node().unwrap().linf(), 0.0);

        // g ≡ 0 → B = -Δu and ⟨B(u), u⟩ = ‖u‖²_{W^{1,2}}
        let rd = SingleValuedDrift::ReactionDiffusion { reaction: ReactionTerm::None };
        let b = drift_b(&rd, 0.0, &u);
        let triple = GelfandTriple::phi_laplace(2.0).unwrap();
        let w12 = crate::spaces::norm(&u, crate::spaces::NormSpace::W1p(2.0)).unwrap();
        let pair = pairing(&b, &u, &triple).unwrap();
        assert!((pair - w12 * w12).abs() < 1e-12);

        // g(u) = u³ matches |u|^{(d+2)/d} for d = 1 with equality
        let rd = SingleValuedDrift::ReactionDiffusion {
            reaction: ReactionTerm::PowerU { coef: 1.0, exponent: 3.0 },
        };
        let b = drift_b(&rd, 0.0, &u);
        let lap = laplacian(&u).scale(-1.0);
        for ((bv, lv), uv) in b
            .as_node()
            .unwrap()
            .values()
            .iter()
            .zip(lap.values())
            .zip(u.values())
        {
            let g = bv - lv;
            assert!((g.abs() - uv.abs().powf(3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_assumptions_examples() {
        let grid = Grid::new_1d(8).unwrap();
        let noise = crate::sde::NoiseModel::constant_modes(&[0.02, 0.02]);

        // Ψ = sign(s)(ν + |s|^{p-1}) passes on the porous-media triple
        let triple = GelfandTriple::porous_media(1.5, Dim::One).unwrap();
        let op = MultiValuedOperator::porous_media(
            ScalarGraph::power(1.5, 1.0).unwrap(),
            triple,
        )
        .unwrap();
        let report =
            validate_assumptions(&op, &SingleValuedDrift::Zero, &noise, grid, 100).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);

        // Φ(s) = (1+s²)^{(p-2)/2} s passes on the Φ-Laplace triple
        let triple = GelfandTriple::phi_laplace(1.5).unwrap();
        let op = MultiValuedOperator::phi_laplace(
            ScalarGraph::non_newtonian(1.5).unwrap(),
            triple,
        )
        .unwrap();
        let report =
            validate_assumptions(&op, &SingleValuedDrift::Zero, &noise, grid, 100).unwrap();
        assert!(report.passed(), "{:#?}", report.checks);
    }
}
