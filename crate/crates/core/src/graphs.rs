//! Scalar maximal-monotone multi-valued graphs on the real line and their
//! generalized resolvent / Yosida operators under the gauge duality map
//! `j(r) = |r|^{α-1} sign(r)`.
//!
//! A graph is a finite list of breakpoints carrying closed value intervals,
//! with continuous nondecreasing branch functions in between. That covers
//! every model nonlinearity shipped here: the sign graph, `sign(s)(ν+|s|^{p-1})`
//! power graphs, the sandpile (BTW/Zhang) graph, linear graphs, and the
//! non-Newtonian potential `(1+s²)^{(p-2)/2} s`.
//!
//! The resolvent inclusion `0 ∈ j(y-s) + λ g(y)` is solved by bisection on the
//! strictly increasing set-valued map; that solver is the ground truth every
//! other solver in the crate is checked against. Closed forms exist for the
//! shipped graph families and back the fast path used inside simulations.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One continuous nondecreasing piece of a graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Branch {
    Const { value: f64 },
    Affine { slope: f64, intercept: f64 },
    /// `sign(s)·(offset + coef·|s|^exp)`; odd, nondecreasing for
    /// `coef, offset ≥ 0`, `exp > 0`.
    SignedPower { coef: f64, exp: f64, offset: f64 },
    /// `(1+s²)^{(p-2)/2}·s`, nondecreasing for `p > 1`.
    NonNewtonian { p: f64 },
}

impl Branch {
    fn validate(&self) -> Result<(), Error> {
        match *self {
            Branch::Const { value } => {
                if !value.is_finite() {
                    return Err(Error::invalid("branch constant must be finite"));
                }
            }
            Branch::Affine { slope, intercept } => {
                if slope < 0.0 || !slope.is_finite() || !intercept.is_finite() {
                    return Err(Error::invalid("affine branch needs slope >= 0"));
                }
            }
            Branch::SignedPower { coef, exp, offset } => {
                if coef < 0.0 || offset < 0.0 || exp <= 0.0 {
                    return Err(Error::invalid(
                        "signed power branch needs coef, offset >= 0 and exp > 0",
                    ));
                }
            }
            Branch::NonNewtonian { p } => {
                if p <= 1.0 {
                    return Err(Error::invalid("non-Newtonian branch needs p > 1"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Branch::Const { value } => value,
            Branch::Affine { slope, intercept } => slope * s + intercept,
            Branch::SignedPower { coef, exp, offset } => {
                if s == 0.0 {
                    0.0
                } else {
                    s.signum() * (offset + coef * s.abs().powf(exp))
                }
            }
            Branch::NonNewtonian { p } => (1.0 + s * s).powf((p - 2.0) / 2.0) * s,
        }
    }

    /// One-sided limit; only differs from `eval` for the sign factor at 0.
    fn limit(&self, s: f64, from_right: bool) -> f64 {
        if s == 0.0 {
            if let Branch::SignedPower { .. } = self {
                return self.eval(if from_right { 1e-300 } else { -1e-300 });
            }
        }
        self.eval(s)
    }

    /// Derivative on the open branch domain (where it exists).
    pub fn deriv(&self, s: f64) -> f64 {
        match *self {
            Branch::Const { .. } => 0.0,
            Branch::Affine { slope, .. } => slope,
            Branch::SignedPower { coef, exp, .. } => {
                if s == 0.0 {
                    if exp > 1.0 {
                        0.0
                    } else if exp == 1.0 {
                        coef
                    } else {
                        f64::INFINITY
                    }
                } else {
                    coef * exp * s.abs().powf(exp - 1.0)
                }
            }
            Branch::NonNewtonian { p } => {
                let q = 1.0 + s * s;
                q.powf((p - 4.0) / 2.0) * (1.0 + (p - 1.0) * s * s)
            }
        }
    }
}

/// Jump of a graph: a closed value interval `[lo, hi]` at abscissa `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Breakpoint {
    pub s: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Declared constants for assumption checks: `s·v ≥ delta·|s|^p − coer_c` for
/// all `v ∈ g(s)`, and `|v| ≤ growth_c·|s|^{p-1} + growth_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub p: f64,
    pub delta: f64,
    pub coer_c: f64,
    pub growth_c: f64,
}

/// A maximal-monotone multi-valued map on the real line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarGraph {
    breakpoints: Vec<Breakpoint>,
    branches: Vec<Branch>,
    meta: Option<GraphMeta>,
    desc: String,
}

impl ScalarGraph {
    /// Builds and validates a graph from raw pieces. `branches` must have one
    /// more entry than `breakpoints`; branch limits have to meet the interval
    /// endpoints exactly so the graph is closed with no monotone gap
    /// (maximality) and globally nondecreasing.
    pub fn piecewise(
        breakpoints: Vec<Breakpoint>,
        branches: Vec<Branch>,
        meta: Option<GraphMeta>,
        desc: impl Into<String>,
    ) -> Result<ScalarGraph, Error> {
        if branches.len() != breakpoints.len() + 1 {
            return Err(Error::invalid("need exactly one branch more than breakpoints"));
        }
        for b in &branches {
            b.validate()?;
        }
        for w in breakpoints.windows(2) {
            if !(w[0].s < w[1].s) {
                return Err(Error::invalid("breakpoints must be strictly increasing"));
            }
        }
        for bp in &breakpoints {
            if !(bp.lo <= bp.hi) || !bp.lo.is_finite() || !bp.hi.is_finite() {
                return Err(Error::invalid("breakpoint interval must satisfy lo <= hi"));
            }
        }
        let g = ScalarGraph { breakpoints, branches, meta, desc: desc.into() };
        g.check_maximality()?;
        g.check_monotone_branches()?;
        Ok(g)
    }

    fn check_maximality(&self) -> Result<(), Error> {
        let tol = 1e-9;
        for (j, bp) in self.breakpoints.iter().enumerate() {
            let left = self.branches[j].limit(bp.s, false);
            let right = self.branches[j + 1].limit(bp.s, true);
            let scale = 1.0 + bp.lo.abs().max(bp.hi.abs());
            if (left - bp.lo).abs() > tol * scale || (right - bp.hi).abs() > tol * scale {
                return Err(Error::invalid(format!(
                    "branch limits at s = {} do not match the value interval \
                     (left {left} vs lo {}, right {right} vs hi {})",
                    bp.s, bp.lo, bp.hi
                )));
            }
        }
        Ok(())
    }

    fn check_monotone_branches(&self) -> Result<(), Error> {
        let radius = 10.0
            * (1.0
                + self
                    .breakpoints
                    .iter()
                    .fold(0.0_f64, |m, b| m.max(b.s.abs())));
        for (j, br) in self.branches.iter().enumerate() {
            let a = if j == 0 { -radius } else { self.breakpoints[j - 1].s };
            let b = if j == self.branches.len() - 1 { radius } else { self.breakpoints[j].s };
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=50 {
                let s = a + (b - a) * (k as f64 + 0.5) / 51.0;
                let v = br.eval(s);
                if v < prev - 1e-12 * (1.0 + v.abs()) {
                    return Err(Error::invalid(format!(
                        "branch {j} decreases near s = {s}"
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }

    pub fn meta(&self) -> Option<GraphMeta> {
        self.meta
    }

    pub fn desc(&self) -> &str {
        &self.desc
    }

    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    /// `ρ·sign(s)` with the full interval `[-ρ, ρ]` at 0.
    pub fn sign(rho: f64) -> Result<ScalarGraph, Error> {
        if rho <= 0.0 {
            return Err(Error::invalid("sign graph needs rho > 0"));
        }
        ScalarGraph::piecewise(
            vec![Breakpoint { s: 0.0, lo: -rho, hi: rho }],
            vec![Branch::Const { value: -rho }, Branch::Const { value: rho }],
            Some(GraphMeta { p: 1.0, delta: 0.0, coer_c: 0.0, growth_c: rho }),
            format!("sign(rho={rho})"),
        )
    }

    /// `sign(s)(ν + |s|^{p-1})`; with `ν = 0` the continuous power graph.
    /// Coercive with `s·v ≥ |s|^p`.
    pub fn power(p: f64, nu: f64) -> Result<ScalarGraph, Error> {
        if p <= 1.0 || nu < 0.0 {
            return Err(Error::invalid("power graph needs p > 1 and nu >= 0"));
        }
        let branch = Branch::SignedPower { coef: 1.0, exp: p - 1.0, offset: nu };
        let meta = Some(GraphMeta { p, delta: 1.0, coer_c: 0.0, growth_c: 1.0_f64.max(nu) });
        if nu == 0.0 {
            ScalarGraph::piecewise(vec![], vec![branch], meta, format!("power(p={p})"))
        } else {
            ScalarGraph::piecewise(
                vec![Breakpoint { s: 0.0, lo: -nu, hi: nu }],
                vec![branch.clone(), branch],
                meta,
                format!("power(p={p}, nu={nu})"),
            )
        }
    }

    /// Sandpile graph: `0` for `s<0`, `[0,1]` at `0`, `1 + delta·s` for `s>0`
    /// (`delta = 0` is the BTW model, `delta > 0` the Zhang model). Not
    /// coercive.
    pub fn btw(delta: f64) -> Result<ScalarGraph, Error> {
        if delta < 0.0 {
            return Err(Error::invalid("btw graph needs delta >= 0"));
        }
        ScalarGraph::piecewise(
            vec![Breakpoint { s: 0.0, lo: 0.0, hi: 1.0 }],
            vec![Branch::Const { value: 0.0 }, Branch::Affine { slope: delta, intercept: 1.0 }],
            Some(GraphMeta { p: 2.0, delta: 0.0, coer_c: 0.0, growth_c: 1.0_f64.max(delta) }),
            format!("btw(delta={delta})"),
        )
    }

    /// Single-valued linear graph `s ↦ slope·s`.
    pub fn linear(slope: f64) -> Result<ScalarGraph, Error> {
        if slope < 0.0 {
            return Err(Error::invalid("linear graph needs slope >= 0"));
        }
        ScalarGraph::piecewise(
            vec![],
            vec![Branch::Affine { slope, intercept: 0.0 }],
            Some(GraphMeta { p: 2.0, delta: slope, coer_c: 0.0, growth_c: slope.max(1e-300) }),
            format!("linear(slope={slope})"),
        )
    }

    /// Non-Newtonian potential `(1+s²)^{(p-2)/2}·s`.
    pub fn non_newtonian(p: f64) -> Result<ScalarGraph, Error> {
        if p <= 1.0 {
            return Err(Error::invalid("non-Newtonian graph needs p > 1"));
        }
        // s·Φ(s) = (1+s²)^{(p-2)/2} s²:  ≥ 2^{(p-2)/2}|s|^p - 1 for p < 2
        // (ratio ≥ 2^{(p-2)/2} once |s| ≥ 1), and ≥ |s|^p directly for p ≥ 2.
        let (delta, coer_c) = if p >= 2.0 {
            (1.0, 0.0)
        } else {
            (2.0_f64.powf((p - 2.0) / 2.0), 1.0)
        };
        ScalarGraph::piecewise(
            vec![],
            vec![Branch::NonNewtonian { p }],
            Some(GraphMeta { p, delta, coer_c, growth_c: 1.0 }),
            format!("non_newtonian(p={p})"),
        )
    }

    /// The full value set of the graph at `s`, as a closed interval.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        for (j, bp) in self.breakpoints.iter().enumerate() {
            if s == bp.s {
                return (bp.lo, bp.hi);
            }
            if s < bp.s {
                let v = self.branches[j].eval(s);
                return (v, v);
            }
        }
        let v = self.branches[self.branches.len() - 1].eval(s);
        (v, v)
    }

    /// Value bounds of the graph over the closed interval `[s-w, s+w]`; by
    /// monotonicity this is `[lo(s-w), hi(s+w)]`. Residual and membership
    /// checks use it so that solutions sitting a solver-tolerance away from a
    /// jump are still recognized as admissible.
    pub fn eval_fuzzy(&self, s: f64, w: f64) -> (f64, f64) {
        let w = w.abs();
        (self.eval(s - w).0, self.eval(s + w).1)
    }

    /// The element of `g(s)` with least absolute value (the scalar minimal
    /// section `A⁰`).
    pub fn minimal_section(&self, s: f64) -> f64 {
        let (lo, hi) = self.eval(s);
        if lo <= 0.0 && 0.0 <= hi {
            0.0
        } else if lo > 0.0 {
            lo
        } else {
            hi
        }
    }

    /// Branch derivative at `s`; 0 at breakpoints (where the branch picture
    /// is vertical and Newton steps are handled by the jump logic instead).
    pub fn deriv(&self, s: f64) -> f64 {
        for (j, bp) in self.breakpoints.iter().enumerate() {
            if s == bp.s {
                return 0.0;
            }
            if s < bp.s {
                return self.branches[j].deriv(s);
            }
        }
        self.branches[self.branches.len() - 1].deriv(s)
    }

    /// True if `g(-s) = -g(s)` structurally (used by odd-symmetry shortcuts).
    pub fn is_odd(&self) -> bool {
        // cheap spot check; the shipped builders are odd except btw
        let pts = [0.3, 1.0, 2.7, 10.0];
        pts.iter().all(|&s| {
            let (lo1, hi1) = self.eval(s);
            let (lo2, hi2) = self.eval(-s);
            (lo1 + hi2).abs() <= 1e-12 * (1.0 + lo1.abs()) && (hi1 + lo2).abs() <= 1e-12 * (1.0 + hi1.abs())
        })
    }
}

/// Gauge duality map on the line: `j(r) = |r|^{α-1} sign(r)`, `j(0) = 0`;
/// odd, strictly increasing, continuous for `α > 1`.
pub fn scalar_duality(r: f64, alpha: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else if alpha == 2.0 {
        r
    } else if alpha == 1.5 {
        // hot path in fast-diffusion steps
        r.signum() * r.abs().sqrt()
    } else if alpha == 3.0 {
        r.signum() * (r * r)
    } else {
        r.signum() * r.abs().powf(alpha - 1.0)
    }
}

/// Inverse of the scalar gauge map: `j^{-1}(v) = |v|^{1/(α-1)} sign(v)`.
pub fn scalar_duality_inv(v: f64, alpha: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else if alpha == 2.0 {
        v
    } else if alpha == 1.5 {
        v.signum() * (v * v)
    } else if alpha == 3.0 {
        v.signum() * v.abs().sqrt()
    } else {
        v.signum() * v.abs().powf(1.0 / (alpha - 1.0))
    }
}

/// Resolvent parameters: step `λ`, gauge exponent `α`, and bisection control.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct YosidaParams {
    pub lambda: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl YosidaParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<YosidaParams, Error> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(alpha > 1.0) {
            return Err(Error::invalid("alpha must exceed 1"));
        }
        Ok(YosidaParams { lambda, alpha, tol: 1e-12, max_iter: 200 })
    }

    pub fn with_tol(mut self, tol: f64) -> YosidaParams {
        self.tol = tol;
        self
    }

    /// `λ < δ^{-1}` whenever the graph declares a coercivity constant `δ > 0`.
    pub fn validate_for(&self, graph: &ScalarGraph) -> Result<(), Error> {
        if let Some(meta) = graph.meta() {
            if meta.delta > 0.0 && self.lambda >= 1.0 / meta.delta {
                return Err(Error::invalid(format!(
                    "lambda = {} must stay below 1/delta = {}",
                    self.lambda,
                    1.0 / meta.delta
                )));
            }
        }
        Ok(())
    }
}

enum SidedValue {
    Below,
    Above,
    Contains,
}

fn classify(lo: f64, hi: f64) -> SidedValue {
    if hi < 0.0 {
        SidedValue::Below
    } else if lo > 0.0 {
        SidedValue::Above
    } else {
        SidedValue::Contains
    }
}

/// Bisection on a strictly increasing set-valued map `F`. Returns the unique
/// `y` with `0 ∈ F(y)` (up to `tol` in argument space).
fn bisect_inclusion(
    f: impl Fn(f64) -> (f64, f64),
    mut a: f64,
    mut b: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let (lo, hi) = f(mid);
        match classify(lo, hi) {
            SidedValue::Below => a = mid,
            SidedValue::Above => b = mid,
            SidedValue::Contains => return mid,
        }
    }
    0.5 * (a + b)
}

fn expand_bracket(
    f: &impl Fn(f64) -> (f64, f64),
    center: f64,
    mut radius: f64,
) -> Result<(f64, f64), Error> {
    for _ in 0..200 {
        let (alo, ahi) = f(center - radius);
        let (blo, bhi) = f(center + radius);
        let left_ok = ahi <= 0.0;
        let right_ok = blo >= 0.0;
        if left_ok && right_ok {
            return Ok((center - radius, center + radius));
        }
        // one-sided containment still brackets the root
        if matches!(classify(alo, ahi), SidedValue::Contains)
            || matches!(classify(blo, bhi), SidedValue::Contains)
        {
            return Ok((center - radius, center + radius));
        }
        radius *= 2.0;
        if !radius.is_finite() {
            break;
        }
    }
    Err(Error::BracketFailure { point: center, radius })
}

/// Generalized resolvent on the line: the unique `y` with
/// `0 ∈ j(y - s) + λ·g(y)`.
///
/// `bracket_seed` perturbs the initial bracket radius so independent runs can
/// serve as oracles for one another; `None` uses the default radius
/// `1 + (λ|g⁰(s)|)^{1/(α-1)}`, which always contains the solution.
pub fn scalar_resolvent_seeded(
    g: &ScalarGraph,
    s: f64,
    params: &YosidaParams,
    bracket_seed: Option<f64>,
) -> Result<f64, Error> {
    params.validate_for(g)?;
    scalar_resolvent_raw(g, s, params.lambda, params.alpha, params.tol, params.max_iter, bracket_seed)
}

/// Resolvent bisection without the λ < δ^{-1} parameter gate (the inclusion
/// itself is solvable for every λ > 0; internal callers rescale λ freely).
pub(crate) fn scalar_resolvent_raw(
    g: &ScalarGraph,
    s: f64,
    lambda: f64,
    alpha: f64,
    tol: f64,
    max_iter: usize,
    bracket_seed: Option<f64>,
) -> Result<f64, Error> {
    let f = |y: f64| {
        let (lo, hi) = g.eval(y);
        let j = scalar_duality(y - s, alpha);
        (j + lambda * lo, j + lambda * hi)
    };
    let base = 1.0 + (lambda * g.minimal_section(s).abs()).powf(1.0 / (alpha - 1.0));
    let radius = base * bracket_seed.unwrap_or(1.0);
    let (a, b) = expand_bracket(&f, s, radius)?;
    Ok(bisect_inclusion(f, a, b, tol, max_iter))
}

/// Generalized resolvent with the default bracket.
pub fn scalar_resolvent(g: &ScalarGraph, s: f64, params: &YosidaParams) -> Result<f64, Error> {
    scalar_resolvent_seeded(g, s, params, None)
}

/// Residual interval of the inclusion at a candidate `y`: distance from 0 to
/// the closed set `j(y-s) + λ·g(y)` (0 when the membership holds exactly).
pub fn resolvent_residual(g: &ScalarGraph, s: f64, y: f64, params: &YosidaParams) -> f64 {
    let w = 4.0 * params.tol.max(1e-13) * (1.0 + y.abs());
    let (lo, hi) = g.eval_fuzzy(y, w);
    // bracket the whole increasing map j(·-s) + λg(·) over [y-w, y+w]
    let flo = scalar_duality(y - w - s, params.alpha) + params.lambda * lo;
    let fhi = scalar_duality(y + w - s, params.alpha) + params.lambda * hi;
    if flo <= 0.0 && 0.0 <= fhi {
        0.0
    } else {
        flo.abs().min(fhi.abs())
    }
}

/// Value-space bisection for the Yosida approximation: `a = A_λ(s)` is the
/// unique solution of `a ∈ g(s - j^{-1}(λa))`, a strictly increasing scalar
/// inclusion in `a`. Solving for the value directly sidesteps the `|ε|^{α-1}/λ`
/// amplification a resolvent-space tolerance would suffer near breakpoints
/// (severe for gauges close to 1).
fn yosida_value_bisection(g: &ScalarGraph, s: f64, lambda: f64, alpha: f64, tol: f64) -> f64 {
    let f = |a: f64| {
        let y = s - scalar_duality_inv(lambda * a, alpha);
        let (lo, hi) = g.eval(y);
        (a - hi, a - lo)
    };
    let bound = g.minimal_section(s).abs() + 1.0;
    bisect_inclusion(f, -bound, bound, tol * bound, 220)
}

/// Generalized Yosida approximation on the line:
/// `A_λ(s) = (1/λ)·j(s - R_λ(s))`; always a selection of `g` at the resolvent.
/// Computed to `params.tol` in value space (see [`scalar_resolvent`] for the
/// companion solve that is accurate in resolvent space).
pub fn scalar_yosida(g: &ScalarGraph, s: f64, params: &YosidaParams) -> Result<f64, Error> {
    params.validate_for(g)?;
    Ok(yosida_value_bisection(g, s, params.lambda, params.alpha, params.tol.min(1e-13)))
}

/// Surjectivity of `λj + g`: the unique `x` with `y ∈ λ·j(x) + g(x)`.
pub fn range_solve(g: &ScalarGraph, y: f64, lambda: f64, alpha: f64) -> Result<f64, Error> {
    if !(lambda > 0.0) || !(alpha > 1.0) {
        return Err(Error::invalid("range_solve needs lambda > 0, alpha > 1"));
    }
    let f = |x: f64| {
        let (lo, hi) = g.eval(x);
        let j = lambda * scalar_duality(x, alpha);
        (j + lo - y, j + hi - y)
    };
    let radius = 1.0 + ((2.0 * y.abs() + 1.0) / lambda).powf(1.0 / (alpha - 1.0));
    let (a, b) = expand_bracket(&f, 0.0, radius)?;
    Ok(bisect_inclusion(f, a, b, 1e-13, 250))
}

/// Residual of the range equation at `x`: distance from `y` to `λj(x) + g(x)`.
pub fn range_residual(g: &ScalarGraph, y: f64, x: f64, lambda: f64, alpha: f64) -> f64 {
    let w = 4.0 * 1e-13 * (1.0 + x.abs());
    let (lo, hi) = g.eval_fuzzy(x, w);
    let flo = lambda * scalar_duality(x - w, alpha) + lo - y;
    let fhi = lambda * scalar_duality(x + w, alpha) + hi - y;
    if flo <= 0.0 && 0.0 <= fhi {
        0.0
    } else {
        flo.abs().min(fhi.abs())
    }
}

/// A graph composed with generalized Yosida smoothing at level `μ`: the
/// single-valued map `s ↦ (1/μ) j(s - R_μ(s))`, used both as the simulation
/// drift nonlinearity and as the smooth stage inside Newton continuation.
#[derive(Clone, Debug)]
pub struct RegularizedGraph<'a> {
    graph: &'a ScalarGraph,
    mu: f64,
    alpha: f64,
    closed: ClosedForm,
}

#[derive(Clone, Copy, Debug)]
enum ClosedForm {
    /// pure power `coef·|s|^{α-1}sign(s)` at matching gauge: plain rescaling
    PowerScaled { coef: f64, scale: f64 },
    /// `ρ·sign` at any gauge: soft threshold in `j`-space
    Sign { rho: f64 },
    /// affine single branch at gauge 2
    LinearG2 { slope: f64, intercept: f64 },
    /// sandpile graph at gauge 2
    BtwG2 { delta: f64 },
    None,
}

fn detect_closed_form(g: &ScalarGraph, mu: f64, alpha: f64) -> ClosedForm {
    match (g.breakpoints(), g.branches.as_slice()) {
        ([], [Branch::SignedPower { coef, exp, offset: o }])
            if *o == 0.0 && (*exp - (alpha - 1.0)).abs() < 1e-14 =>
        {
            let sigma = (mu * coef).powf(1.0 / (alpha - 1.0));
            ClosedForm::PowerScaled { coef: *coef, scale: 1.0 / (1.0 + sigma).powf(alpha - 1.0) }
        }
        ([bp], [Branch::Const { value: a }, Branch::Const { value: b }])
            if bp.s == 0.0 && *a == -*b && *b > 0.0 =>
        {
            ClosedForm::Sign { rho: *b }
        }
        ([], [Branch::Affine { slope, intercept }]) if alpha == 2.0 => {
            ClosedForm::LinearG2 { slope: *slope, intercept: *intercept }
        }
        ([bp], [Branch::Const { value: z }, Branch::Affine { slope, intercept }])
            if alpha == 2.0 && bp.s == 0.0 && *z == 0.0 && bp.lo == 0.0 && bp.hi == 1.0 && *intercept == 1.0 =>
        {
            ClosedForm::BtwG2 { delta: *slope }
        }
        _ => ClosedForm::None,
    }
}

impl<'a> RegularizedGraph<'a> {
    pub fn new(graph: &'a ScalarGraph, mu: f64, alpha: f64) -> Result<RegularizedGraph<'a>, Error> {
        if !(mu > 0.0) || !(alpha > 1.0) {
            return Err(Error::invalid("regularization needs mu > 0 and alpha > 1"));
        }
        if let Some(meta) = graph.meta() {
            if meta.delta > 0.0 && mu >= 1.0 / meta.delta {
                return Err(Error::invalid(format!(
                    "mu = {mu} must stay below 1/delta = {}",
                    1.0 / meta.delta
                )));
            }
        }
        let closed = detect_closed_form(graph, mu, alpha);
        Ok(RegularizedGraph { graph, mu, alpha, closed })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn resolvent(&self, s: f64) -> f64 {
        let (mu, alpha) = (self.mu, self.alpha);
        match self.closed {
            ClosedForm::PowerScaled { coef, .. } => {
                let sigma = (mu * coef).powf(1.0 / (alpha - 1.0));
                s / (1.0 + sigma)
            }
            ClosedForm::Sign { rho } => {
                let gap = (mu * rho).powf(1.0 / (alpha - 1.0));
                if s.abs() <= gap {
                    0.0
                } else {
                    s - s.signum() * gap
                }
            }
            ClosedForm::LinearG2 { slope, intercept } => {
                (s - mu * intercept) / (1.0 + mu * slope)
            }
            ClosedForm::BtwG2 { delta } => {
                if s < 0.0 {
                    s
                } else if s <= mu {
                    0.0
                } else {
                    (s - mu) / (1.0 + mu * delta)
                }
            }
            ClosedForm::None => {
                let params = YosidaParams { lambda: self.mu, alpha: self.alpha, tol: 1e-13, max_iter: 200 };
                scalar_resolvent(self.graph, s, &params).expect("bracket always exists")
            }
        }
    }

    /// `ψ_μ(s) = (1/μ) j(s - R_μ(s))`.
    ///
    /// The general path solves for the value directly: `a = ψ_μ(s)` is the
    /// unique solution of `a ∈ g(s - j^{-1}(μa))`, a strictly increasing
    /// scalar inclusion in `a`. Solving in value space avoids the `j'/μ`
    /// amplification that a resolvent-space solve would hand to the value
    /// near breakpoints.
    pub fn value(&self, s: f64) -> f64 {
        // every closed form is written subtraction-free: computing
        // j(s - R_μ(s))/μ would lose ~ε/μ digits to cancellation
        match self.closed {
            ClosedForm::PowerScaled { coef, scale } => {
                scale * coef * scalar_duality(s, self.alpha)
            }
            ClosedForm::Sign { rho } => {
                let gap = (self.mu * rho).powf(1.0 / (self.alpha - 1.0));
                if s.abs() <= gap {
                    scalar_duality(s, self.alpha) / self.mu
                } else {
                    rho * s.signum()
                }
            }
            ClosedForm::LinearG2 { slope, intercept } => {
                (slope * s + intercept) / (1.0 + self.mu * slope)
            }
            ClosedForm::BtwG2 { delta } => {
                if s < 0.0 {
                    0.0
                } else if s <= self.mu {
                    s / self.mu
                } else {
                    (1.0 + delta * s) / (1.0 + self.mu * delta)
                }
            }
            ClosedForm::None => yosida_value_bisection(self.graph, s, self.mu, self.alpha, 1e-14),
        }
    }

    /// Derivative of the regularized map; analytic for the closed forms,
    /// central finite differences elsewhere.
    pub fn deriv(&self, s: f64) -> f64 {
        match self.closed {
            ClosedForm::PowerScaled { coef, scale } => {
                let e = self.alpha - 1.0;
                if s == 0.0 {
                    if e >= 1.0 { if e == 1.0 { scale * coef } else { 0.0 } } else { f64::INFINITY }
                } else {
                    scale * coef * e * s.abs().powf(e - 1.0)
                }
            }
            ClosedForm::Sign { rho } => {
                let gap = (self.mu * rho).powf(1.0 / (self.alpha - 1.0));
                let e = self.alpha - 1.0;
                if s.abs() <= gap {
                    if s == 0.0 {
                        if e >= 1.0 { if e == 1.0 { 1.0 / self.mu } else { 0.0 } } else { f64::INFINITY }
                    } else {
                        e * s.abs().powf(e - 1.0) / self.mu
                    }
                } else {
                    0.0
                }
            }
            ClosedForm::LinearG2 { slope, .. } => slope / (1.0 + self.mu * slope),
            ClosedForm::BtwG2 { delta } => {
                if s < 0.0 {
                    0.0
                } else if s <= self.mu {
                    1.0 / self.mu
                } else {
                    delta / (1.0 + self.mu * delta)
                }
            }
            ClosedForm::None => {
                let h = 1e-6 * (1.0 + s.abs());
                (self.value(s + h) - self.value(s - h)) / (2.0 * h)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(lambda: f64, alpha: f64) -> YosidaParams {
        YosidaParams::new(lambda, alpha).unwrap()
    }

    #[test]
    fn eval_value_sets() {
        let sign = ScalarGraph::sign(1.0).unwrap();
        assert_eq!(sign.eval(0.0), (-1.0, 1.0));
        assert_eq!(sign.eval(2.0), (1.0, 1.0));
        let btw = ScalarGraph::btw(0.0).unwrap();
        assert_eq!(btw.eval(0.0), (0.0, 1.0));
        assert_eq!(btw.eval(-3.0), (0.0, 0.0));
        assert_eq!(btw.eval(2.0), (1.0, 1.0));
    }

    #[test]
    fn minimal_sections() {
        let sign = ScalarGraph::sign(1.0).unwrap();
        assert_eq!(sign.minimal_section(0.0), 0.0);
        assert_eq!(sign.minimal_section(2.0), 1.0);
        assert_eq!(sign.minimal_section(-2.0), -1.0);
        // Ψ(s)=sign(s)(1+|s|^{0.5}) at s=4 → 1 + 2 = 3
        let psi = ScalarGraph::power(1.5, 1.0).unwrap();
        assert!((psi.minimal_section(4.0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn duality_map_basics() {
        assert_eq!(scalar_duality(0.0, 1.5), 0.0);
        assert_eq!(scalar_duality(-3.0, 2.0), -3.0);
        assert_eq!(scalar_duality(-1.0, 1.5), -1.0);
        assert_eq!(scalar_duality(1.0, 2.71), 1.0);
        for alpha in [1.2, 1.5, 2.0, 3.0] {
            for r in [-2.0, -0.5, 0.3, 4.0] {
                let v = scalar_duality(r, alpha);
                assert!((scalar_duality_inv(v, alpha) - r).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resolvent_frozen_examples() {
        let sign = ScalarGraph::sign(1.0).unwrap();
        // sign graph, λ=1, any α, s=3 → y = 2
        for alpha in [1.5, 2.0, 2.5] {
            let y = scalar_resolvent(&sign, 3.0, &params(1.0, alpha)).unwrap();
            assert!((y - 2.0).abs() < 1e-10, "alpha={alpha}: y={y}");
        }
        // dead zone: λ=1, α=2, s=0.5 → 0
        let y = scalar_resolvent(&sign, 0.5, &params(1.0, 2.0)).unwrap();
        assert!(y.abs() < 1e-10);
        // linear graph, α=2, λ=0.25, s=1 → 0.8
        let lin = ScalarGraph::linear(1.0).unwrap();
        let y = scalar_resolvent(&lin, 1.0, &params(0.25, 2.0)).unwrap();
        assert!((y - 0.8).abs() < 1e-10);
    }

    #[test]
    fn yosida_frozen_examples() {
        let sign = ScalarGraph::sign(1.0).unwrap();
        let a = scalar_yosida(&sign, 3.0, &params(1.0, 1.5)).unwrap();
        assert!((a - 1.0).abs() < 1e-9);
        let a = scalar_yosida(&sign, 0.5, &params(1.0, 2.0)).unwrap();
        assert!((a - 0.5).abs() < 1e-9);
        // 0 ∈ g(s) → A_λ(s) = 0
        let btw = ScalarGraph::btw(0.5).unwrap();
        let a = scalar_yosida(&btw, -2.0, &params(0.7, 2.0)).unwrap();
        assert!(a.abs() < 1e-10);
    }

    #[test]
    fn range_solve_examples() {
        let sign = ScalarGraph::sign(1.0).unwrap();
        assert!(range_solve(&sign, 0.0, 1.0, 2.0).unwrap().abs() < 1e-10);
        assert!((range_solve(&sign, 3.0, 1.0, 2.0).unwrap() - 2.0).abs() < 1e-10);
        let lin = ScalarGraph::linear(1.0).unwrap();
        assert!((range_solve(&lin, 4.0, 1.0, 2.0).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn lambda_constraint_enforced() {
        let lin = ScalarGraph::linear(2.0).unwrap(); // delta = 2 → λ < 0.5
        let p = params(0.6, 2.0);
        assert!(scalar_resolvent(&lin, 1.0, &p).is_err());
        assert!(scalar_resolvent(&lin, 1.0, &params(0.4, 2.0)).is_ok());
    }

    #[test]
    fn maximality_validation_rejects_gaps() {
        // interval [−1, 0.5] does not meet the right branch limit +1
        let bad = ScalarGraph::piecewise(
            vec![Breakpoint { s: 0.0, lo: -1.0, hi: 0.5 }],
            vec![Branch::Const { value: -1.0 }, Branch::Const { value: 1.0 }],
            None,
            "bad",
        );
        assert!(bad.is_err());
    }

    #[test]
    fn regularized_closed_forms_match_bisection() {
        let cases: Vec<(ScalarGraph, f64)> = vec![
            (ScalarGraph::power(1.5, 0.0).unwrap(), 1.5),
            (ScalarGraph::sign(1.0).unwrap(), 1.5),
            (ScalarGraph::sign(2.0).unwrap(), 2.0),
            (ScalarGraph::linear(0.8).unwrap(), 2.0),
            (ScalarGraph::btw(0.3).unwrap(), 2.0),
            (ScalarGraph::power(3.0, 0.0).unwrap(), 3.0),
        ];
        for (g, alpha) in &cases {
            let reg = RegularizedGraph::new(g, 0.05, *alpha).unwrap();
            for s in [-2.0, -0.3, -0.01, 0.0, 0.02, 0.7, 3.0] {
                let p = YosidaParams { lambda: 0.05, alpha: *alpha, tol: 1e-13, max_iter: 300 };
                let oracle = scalar_resolvent(g, s, &p).unwrap();
                let fast = reg.resolvent(s);
                assert!(
                    (oracle - fast).abs() < 1e-9 * (1.0 + oracle.abs()),
                    "{} alpha={alpha} s={s}: fast {fast} vs oracle {oracle}",
                    g.desc()
                );
            }
        }
    }

    #[test]
    fn regularized_deriv_matches_fd() {
        let g = ScalarGraph::power(1.5, 0.5).unwrap();
        let reg = RegularizedGraph::new(&g, 0.1, 1.5).unwrap();
        for s in [-1.7_f64, -0.2, 0.4, 2.2] {
            let h = 1e-6 * (1.0 + s.abs());
            let fd = (reg.value(s + h) - reg.value(s - h)) / (2.0 * h);
            let an = reg.deriv(s);
            assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "s={s}: {an} vs fd {fd}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn legal_lambda(g: &ScalarGraph, lam: f64) -> f64 {
            match g.meta() {
                Some(m) if m.delta > 0.0 => lam.min(0.9 / m.delta),
                _ => lam,
            }
        }

        fn arb_graph() -> impl Strategy<Value = ScalarGraph> {
            prop_oneof![
                (0.1..3.0f64).prop_map(|r| ScalarGraph::sign(r).unwrap()),
                ((1.1..3.0f64), (0.0..2.0f64)).prop_map(|(p, nu)| ScalarGraph::power(p, nu).unwrap()),
                (0.0..2.0f64).prop_map(|d| ScalarGraph::btw(d).unwrap()),
                (0.0..3.0f64).prop_map(|k| ScalarGraph::linear(k).unwrap()),
            ]
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            // Prop 2.9: two bisection runs with different bracket seeds agree.
            #[test]
            fn resolvent_unique(g in arb_graph(), s in -5.0..5.0f64,
                                lam in 0.05..0.45f64, alpha in 1.1..3.0f64) {
                let lam = legal_lambda(&g, lam);
                let p = YosidaParams { lambda: lam, alpha, tol: 1e-13, max_iter: 300 };
                let y1 = scalar_resolvent_seeded(&g, s, &p, None).unwrap();
                let y2 = scalar_resolvent_seeded(&g, s, &p, Some(3.7)).unwrap();
                prop_assert!((y1 - y2).abs() < 1e-10);
            }

            // Prop 2.11(ii): |A_λ(s)| ≤ |A⁰(s)|.
            #[test]
            fn yosida_bounded_by_minimal_section(g in arb_graph(), s in -5.0..5.0f64,
                                                 lam in 0.05..0.45f64, alpha in 1.1..3.0f64) {
                let lam = legal_lambda(&g, lam);
                let p = YosidaParams { lambda: lam, alpha, tol: 1e-13, max_iter: 300 };
                let a = scalar_yosida(&g, s, &p).unwrap();
                prop_assert!(a.abs() <= g.minimal_section(s).abs() + 1e-10);
            }

            // Prop 2.11(i): monotonicity of A_λ.
            #[test]
            fn yosida_monotone(g in arb_graph(), s in -5.0..5.0f64, t in -5.0..5.0f64,
                               lam in 0.05..0.45f64, alpha in 1.1..3.0f64) {
                let lam = legal_lambda(&g, lam);
                let p = YosidaParams { lambda: lam, alpha, tol: 1e-13, max_iter: 300 };
                let a = scalar_yosida(&g, s, &p).unwrap();
                let b = scalar_yosida(&g, t, &p).unwrap();
                prop_assert!((a - b) * (s - t) >= -1e-10);
            }

            // odd graphs: R_λ(-s) = -R_λ(s)
            #[test]
            fn odd_symmetry(s in -5.0..5.0f64, lam in 0.05..0.45f64, alpha in 1.1..3.0f64) {
                let g = ScalarGraph::power(1.5, 0.7).unwrap();
                let p = YosidaParams { lambda: lam, alpha, tol: 1e-13, max_iter: 300 };
                let y1 = scalar_resolvent(&g, s, &p).unwrap();
                let y2 = scalar_resolvent(&g, -s, &p).unwrap();
                prop_assert!((y1 + y2).abs() < 1e-10);
            }

            // Theorem A.2 realized: the range equation is always solvable.
            #[test]
            fn range_condition(g in arb_graph(), y in -10.0..10.0f64,
                               lam in 0.1..10.0f64, alpha in 1.1..3.0f64) {
                let x = range_solve(&g, y, lam, alpha).unwrap();
                prop_assert!(range_residual(&g, y, x, lam, alpha) < 1e-9);
            }
        }
    }

    #[test]
    fn prop211_iii_lambda_limit() {
        // A_λ(s) → A⁰(s) as λ → 0 for the §5-style graphs
        let graphs = [
            ScalarGraph::sign(1.0).unwrap(),
            ScalarGraph::power(1.5, 1.0).unwrap(),
            ScalarGraph::btw(0.5).unwrap(),
        ];
        for g in &graphs {
            for s in [-2.3, -0.4, 0.0, 0.7, 3.1] {
                let a0 = g.minimal_section(s);
                let mut last_gap = f64::INFINITY;
                for k in 0..=6 {
                    let lam = if k == 0 { 0.99 } else { 10f64.powi(-k) };
                    let p = YosidaParams { lambda: lam, alpha: 1.5, tol: 1e-13, max_iter: 300 };
                    let a = scalar_yosida(g, s, &p).unwrap();
                    last_gap = (a - a0).abs();
                }
                assert!(last_gap <= 1e-4, "{} at s={s}: gap {last_gap}", g.desc());
            }
        }
    }

    #[test]
    fn lemma_a3_scalar_coercivity() {
        // A_λ(s)·s ≥ δ2^{-α}|s|^α + C for λ < 1/δ with the declared constants
        let g = ScalarGraph::power(1.5, 0.0).unwrap();
        let meta = g.meta().unwrap();
        let alpha = meta.p;
        for lam in [0.1, 0.5, 0.9] {
            for s in [-3.0, -1.0, -0.1, 0.2, 1.4, 5.0] {
                let p = YosidaParams { lambda: lam, alpha, tol: 1e-13, max_iter: 300 };
                let a = scalar_yosida(&g, s, &p).unwrap();
                let rhs = meta.delta * 2f64.powf(-alpha) * s.abs().powf(alpha) - meta.coer_c;
                assert!(a * s >= rhs - 1e-9, "lam={lam} s={s}: {} < {rhs}", a * s);
            }
        }
    }

    #[test]
    fn gauge_identity() {
        // |s - R_λ(s)|^α = λ^{α/(α-1)} |A_λ(s)|^{α/(α-1)}
        let g = ScalarGraph::power(2.5, 0.3).unwrap();
        for (lam, alpha, s) in [(0.3, 1.5, 2.0), (0.05, 2.0, -1.2), (0.7, 2.6, 0.4)] {
            let p = YosidaParams { lambda: lam, alpha, tol: 1e-14, max_iter: 300 };
            let y = scalar_resolvent(&g, s, &p).unwrap();
            let a = scalar_duality(s - y, alpha) / lam;
            let lhs = (s - y).abs().powf(alpha);
            let rhs = lam.powf(alpha / (alpha - 1.0)) * a.abs().powf(alpha / (alpha - 1.0));
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs), "lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn prop211_iv_membership() {
        let g = ScalarGraph::power(1.5, 1.0).unwrap();
        for s in [-2.0, -0.5, 0.0, 0.3, 2.0] {
            let p = YosidaParams { lambda: 0.3, alpha: 1.8, tol: 1e-13, max_iter: 300 };
            let y = scalar_resolvent(&g, s, &p).unwrap();
            let a = scalar_yosida(&g, s, &p).unwrap();
            let (lo, hi) = g.eval_fuzzy(y, 1e-10 * (1.0 + y.abs()));
            assert!(a >= lo - 1e-8 && a <= hi + 1e-8, "s={s}: {a} ∉ [{lo}, {hi}]");
        }
    }
}
