//! The built-in verification suite: every module's invariant block as a
//! runtime-checkable property with an explicit margin. `Fast` caps grids at 16
//! nodes per axis and samples at 100; `Full` runs the 8×8 vector-Yosida suite
//! and the larger sample counts. All randomness is internally seeded, so the
//! summary is byte-identical across runs and thread counts.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extinction::c_star;
use crate::graphs::{
    range_residual, range_solve, scalar_duality, scalar_resolvent, scalar_resolvent_seeded,
    scalar_yosida, ScalarGraph, YosidaParams,
};
use crate::operators::{
    apply_minimal, duality_map, vector_resolvent, vector_yosida_detailed, MultiValuedOperator,
    SingleValuedDrift, SolverOpts,
};
use crate::sde::{simulate, simulate_batch, NoiseModel, Scheme, SimConfig};
use crate::spaces::{
    dual_norm, embedding_constant, inv_laplacian, laplacian, norm, pairing, Dim,
    DualField, Field, GelfandTriple, Grid, NormSpace,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    Fast,
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    /// Worst-case slack of the checked inequality (negative = violated).
    pub margin: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub level: VerifyLevel,
    pub results: Vec<PropertyResult>,
    pub passed: bool,
}

struct Suite {
    results: Vec<PropertyResult>,
    samples: usize,
    grid_cap: usize,
    full: bool,
}

impl Suite {
    fn push(&mut self, name: &str, margin: f64, tol: f64, detail: String) {
        self.results.push(PropertyResult {
            name: name.into(),
            passed: margin >= -tol,
            margin,
            detail,
        });
    }

    fn push_flag(&mut self, name: &str, passed: bool, detail: String) {
        self.results.push(PropertyResult { name: name.into(), passed, margin: 0.0, detail });
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5u64 << 32 | tag)
}

fn rand_field(grid: Grid, rng: &mut ChaCha8Rng) -> Field {
    Field::from_fn(grid, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

fn shipped_graphs() -> Vec<ScalarGraph> {
    vec![
        ScalarGraph::sign(1.0).unwrap(),
        ScalarGraph::power(1.5, 1.0).unwrap(),
        ScalarGraph::power(3.0, 0.0).unwrap(),
        ScalarGraph::btw(0.5).unwrap(),
        ScalarGraph::linear(1.0).unwrap(),
    ]
}

/// Runs the suite at the given level.
pub fn run_suite(level: VerifyLevel) -> SuiteSummary {
    let full = level == VerifyLevel::Full;
    let mut suite = Suite {
        results: vec![],
        samples: if full { 500 } else { 100 },
        grid_cap: if full { 32 } else { 16 },
        full,
    };

    spaces_properties(&mut suite);
    graphs_properties(&mut suite);
    operators_properties(&mut suite);
    sde_properties(&mut suite);
    extinction_properties(&mut suite);

    let passed = suite.results.iter().all(|r| r.passed);
    SuiteSummary { level, results: suite.results, passed }
}

fn spaces_properties(suite: &mut Suite) {
    let mut rng = rng(1);
    let grid = Grid::new_1d(suite.grid_cap.min(16)).unwrap();
    let grid2 = Grid::new_2d(8.min(suite.grid_cap)).unwrap();

    // Δ_h symmetry and negative definiteness
    let mut worst_sym = f64::INFINITY;
    let mut worst_neg = f64::INFINITY;
    for g in [grid, grid2] {
        for _ in 0..suite.samples.min(100) {
            let u = rand_field(g, &mut rng);
            let v = rand_field(g, &mut rng);
            let lu = laplacian(&u);
            let lv = laplacian(&v);
            worst_sym = worst_sym.min(1e-12 - (lu.dot_quad(&v) - u.dot_quad(&lv)).abs());
            worst_neg = worst_neg.min(-lu.dot_quad(&u));
        }
    }
    suite.push("laplacian_symmetry", worst_sym, 0.0, "⟨Δu,v⟩ = ⟨u,Δv⟩ to 1e-12".into());
    suite.push("laplacian_negative_definite", worst_neg, 0.0, "⟨Δu,u⟩ < 0 for u ≠ 0".into());

    // Riesz identity
    let mut worst = f64::INFINITY;
    for _ in 0..suite.samples.min(100) {
        let u = rand_field(grid, &mut rng);
        let riesz = inv_laplacian(&u).unwrap();
        let h2 = riesz.dot_quad(&u);
        let n = norm(&u, NormSpace::Hminus1).unwrap();
        worst = worst.min(h2.min(1e-12 - (n * n - h2).abs()));
    }
    suite.push("riesz_identity", worst, 0.0, "‖u‖²_{H^{-1}} = ⟨(-Δ)⁻¹u, u⟩ ≥ 0".into());

    // embedding constant: inequality on random fields + homogeneity
    for (triple, label) in [
        (GelfandTriple::porous_media(1.5, Dim::One).unwrap(), "porous_media_p1.5"),
        (GelfandTriple::phi_laplace(2.0).unwrap(), "phi_laplace_p2"),
    ] {
        let c0 = embedding_constant(&triple, grid).unwrap();
        let mut worst = f64::INFINITY;
        for _ in 0..suite.samples {
            let u = rand_field(grid, &mut rng);
            worst = worst.min(triple.v_norm(&u) - c0 * triple.h_norm(&u));
        }
        suite.push(
            &format!("embedding_{label}"),
            worst,
            1e-9,
            format!("‖u‖_V ≥ c0‖u‖_H with c0 = {c0:.6}"),
        );
    }
    // p = 2 cross-check against the eigenvalue
    let pl2 = GelfandTriple::phi_laplace(2.0).unwrap();
    let c0 = embedding_constant(&pl2, grid).unwrap();
    let mu1 = grid.mu1();
    suite.push(
        "embedding_eigen_crosscheck",
        1e-6 * mu1 - (c0 * c0 - mu1).abs(),
        0.0,
        format!("c0² = {:.8} vs μ₁ = {mu1:.8}", c0 * c0),
    );

    // Hölder consistency: measure-normalized L^p norm nondecreasing in p
    let u = rand_field(grid, &mut rng);
    let measure = grid.node_count() as f64 * grid.weight();
    let mut prev = 0.0;
    let mut worst = f64::INFINITY;
    for p in [1.0, 1.5, 2.0, 4.0, 8.0] {
        let m = norm(&u, NormSpace::Lp(p)).unwrap() / measure.powf(1.0 / p);
        worst = worst.min(m - prev);
        prev = m;
    }
    suite.push("holder_consistency", worst, 1e-12, "power means nondecreasing in p".into());
}

fn graphs_properties(suite: &mut Suite) {
    let mut rng = rng(2);
    let graphs = shipped_graphs();

    // resolvent uniqueness across bracket seeds
    let n = if suite.full { 10_000 } else { 1_000 };
    let mut worst = f64::INFINITY;
    for _ in 0..n {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let s = rng.random::<f64>() * 10.0 - 5.0;
        let lambda = 0.05 + rng.random::<f64>() * 0.4;
        let alpha = 1.1 + rng.random::<f64>() * 1.9;
        let p = YosidaParams { lambda, alpha, tol: 1e-13, max_iter: 300 };
        let y1 = scalar_resolvent_seeded(g, s, &p, None).unwrap();
        let y2 = scalar_resolvent_seeded(g, s, &p, Some(2.9)).unwrap();
        worst = worst.min(1e-10 - (y1 - y2).abs());
    }
    suite.push("scalar_resolvent_uniqueness", worst, 0.0, format!("{n} random cases, two brackets"));

    // Prop 2.11 (ii): |A_λ| ≤ |A⁰|
    let mut worst = f64::INFINITY;
    for _ in 0..suite.samples * 2 {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let s = rng.random::<f64>() * 10.0 - 5.0;
        let p = YosidaParams {
            lambda: 0.05 + rng.random::<f64>() * 0.4,
            alpha: 1.1 + rng.random::<f64>() * 1.9,
            tol: 1e-13,
            max_iter: 300,
        };
        let a = scalar_yosida(g, s, &p).unwrap();
        worst = worst.min(g.minimal_section(s).abs() + 1e-10 - a.abs());
    }
    suite.push("prop211_ii_scalar", worst, 0.0, "|A_λ(s)| ≤ |A⁰(s)| + 1e-10".into());

    // Prop 2.11 (iii): λ-limit to the minimal section
    let mut worst_gap = 0.0_f64;
    for g in &graphs[..3] {
        for s in [-2.0, -0.3, 0.0, 0.5, 3.0] {
            let a0 = g.minimal_section(s);
            let mut a = 0.0;
            for k in 0..=6 {
                let p = YosidaParams {
                    lambda: 10f64.powi(-k),
                    alpha: 1.5,
                    tol: 1e-13,
                    max_iter: 300,
                };
                a = scalar_yosida(g, s, &p).unwrap();
            }
            worst_gap = worst_gap.max((a - a0).abs());
        }
    }
    suite.push(
        "prop211_iii_scalar",
        1e-4 - worst_gap,
        0.0,
        format!("A_λ → A⁰ over λ ∈ 10⁰..10⁻⁶, final gap {worst_gap:.2e}"),
    );

    // Prop 2.11 (iv): A_λ(s) ∈ g(R_λ(s))
    let mut worst = f64::INFINITY;
    for _ in 0..suite.samples {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let s = rng.random::<f64>() * 10.0 - 5.0;
        let p = YosidaParams {
            lambda: 0.05 + rng.random::<f64>() * 0.4,
            alpha: 1.1 + rng.random::<f64>() * 1.9,
            tol: 1e-13,
            max_iter: 300,
        };
        let y = scalar_resolvent(g, s, &p).unwrap();
        let a = scalar_duality(s - y, p.alpha) / p.lambda;
        let (lo, hi) = g.eval(y);
        worst = worst.min((a - lo).min(hi - a) + 1e-8);
    }
    suite.push("prop211_iv_scalar", worst, 0.0, "A_λ(s) ∈ g(R_λ(s)) within tol".into());

    // Prop 2.11 (i): monotone A_λ
    let mut worst = f64::INFINITY;
    for _ in 0..suite.samples {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let (s, t) = (rng.random::<f64>() * 8.0 - 4.0, rng.random::<f64>() * 8.0 - 4.0);
        let p = YosidaParams {
            lambda: 0.05 + rng.random::<f64>() * 0.4,
            alpha: 1.1 + rng.random::<f64>() * 1.9,
            tol: 1e-13,
            max_iter: 300,
        };
        let a = scalar_yosida(g, s, &p).unwrap();
        let b = scalar_yosida(g, t, &p).unwrap();
        worst = worst.min((a - b) * (s - t) + 1e-10);
    }
    suite.push("prop211_i_scalar", worst, 0.0, "(A_λ(s)-A_λ(t))(s-t) ≥ -1e-10".into());

    // Lemma A.3 scalar coercivity with declared constants
    let mut worst = f64::INFINITY;
    let coercive = [ScalarGraph::power(1.5, 0.0).unwrap(), ScalarGraph::power(2.5, 0.4).unwrap()];
    for g in &coercive {
        let meta = g.meta().unwrap();
        for _ in 0..suite.samples {
            let s = rng.random::<f64>() * 8.0 - 4.0;
            let lambda = rng.random::<f64>() * 0.9 / meta.delta.max(1e-9);
            let p = YosidaParams {
                lambda: lambda.max(1e-3),
                alpha: meta.p,
                tol: 1e-13,
                max_iter: 300,
            };
            let a = scalar_yosida(g, s, &p).unwrap();
            let rhs = meta.delta * 2f64.powf(-meta.p) * s.abs().powf(meta.p) - meta.coer_c;
            worst = worst.min(a * s - rhs);
        }
    }
    suite.push("lemma_a3_scalar", worst, 1e-9, "A_λ(s)s ≥ δ2^{-α}|s|^α + C".into());

    // gauge identity
    let mut worst = f64::INFINITY;
    for _ in 0..suite.samples {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let s = rng.random::<f64>() * 8.0 - 4.0;
        let p = YosidaParams {
            lambda: 0.05 + rng.random::<f64>() * 0.4,
            alpha: 1.1 + rng.random::<f64>() * 1.9,
            tol: 1e-14,
            max_iter: 300,
        };
        let y = scalar_resolvent(g, s, &p).unwrap();
        let a = scalar_duality(s - y, p.alpha) / p.lambda;
        let lhs = (s - y).abs().powf(p.alpha);
        let rhs = p.lambda.powf(p.alpha / (p.alpha - 1.0))
            * a.abs().powf(p.alpha / (p.alpha - 1.0));
        worst = worst.min(1e-9 * (1.0 + lhs) - (lhs - rhs).abs());
    }
    suite.push("gauge_identity_scalar", worst, 0.0, "‖s-R_λ‖^α = λ^{α'}‖A_λ‖^{α'}".into());

    // odd symmetry
    let mut worst = f64::INFINITY;
    let odd = ScalarGraph::power(1.5, 0.7).unwrap();
    for _ in 0..suite.samples {
        let s = rng.random::<f64>() * 8.0 - 4.0;
        let p = YosidaParams {
            lambda: 0.05 + rng.random::<f64>() * 0.4,
            alpha: 1.1 + rng.random::<f64>() * 1.9,
            tol: 1e-13,
            max_iter: 300,
        };
        let y1 = scalar_resolvent(&odd, s, &p).unwrap();
        let y2 = scalar_resolvent(&odd, -s, &p).unwrap();
        worst = worst.min(1e-10 - (y1 + y2).abs());
    }
    suite.push("odd_symmetry_scalar", worst, 0.0, "R_λ(-s) = -R_λ(s) for odd graphs".into());

    // Theorem A.2 range condition
    let n = if suite.full { 1000 } else { 200 };
    let mut worst = f64::INFINITY;
    for _ in 0..n {
        let g = &graphs[rng.random_range(0..graphs.len())];
        let y = rng.random::<f64>() * 20.0 - 10.0;
        let lambda = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let alpha = 1.1 + rng.random::<f64>() * 1.9;
        let x = range_solve(g, y, lambda, alpha).unwrap();
        worst = worst.min(1e-10 - range_residual(g, y, x, lambda, alpha));
    }
    suite.push("range_condition", worst, 0.0, format!("R(λJ+A) = V* on {n} cases"));
}

fn operators_properties(suite: &mut Suite) {
    let mut rng = rng(3);
    let grid = Grid::new_2d(if suite.full { 8 } else { 6 }).unwrap();

    // duality identities, both triples
    for (triple, label) in [
        (GelfandTriple::porous_media(1.5, Dim::Two).unwrap(), "pm15"),
        (GelfandTriple::porous_media(3.0, Dim::Two).unwrap(), "pm30"),
        (GelfandTriple::phi_laplace(1.5).unwrap(), "pl15"),
        (GelfandTriple::phi_laplace(2.0).unwrap(), "pl20"),
    ] {
        let mut worst = f64::INFINITY;
        for alpha in [triple.p(), 1.5, 2.0] {
            for _ in 0..suite.samples / 3 + 1 {
                let u = rand_field(grid, &mut rng);
                let j = duality_map(&u, &triple, alpha).unwrap();
                let nv = triple.v_norm(&u);
                let pair = pairing(&j, &u, &triple).unwrap();
                let dn = dual_norm(&j, &triple).unwrap().upper;
                let e1 = (pair - nv.powf(alpha)).abs() / nv.powf(alpha).max(1e-30);
                let e2 = (dn - nv.powf(alpha - 1.0)).abs() / nv.powf(alpha - 1.0).max(1e-30);
                worst = worst.min(1e-9 - e1.max(e2));
            }
        }
        suite.push(
            &format!("duality_identities_{label}"),
            worst,
            0.0,
            "⟨J(u),u⟩ = ‖u‖^α, ‖J(u)‖_* = ‖u‖^{α-1} (relative)".into(),
        );
    }

    // duality monotonicity chain
    let triple = GelfandTriple::porous_media(1.5, Dim::Two).unwrap();
    let mut worst = f64::INFINITY;
    for _ in 0..suite.samples {
        let u = rand_field(grid, &mut rng);
        let v = rand_field(grid, &mut rng);
        let alpha = 1.2 + rng.random::<f64>() * 1.5;
        let ju = duality_map(&u, &triple, alpha).unwrap();
        let jv = duality_map(&v, &triple, alpha).unwrap();
        let diff = u.sub(&v);
        let lhs = pairing(&ju, &diff, &triple).unwrap() - pairing(&jv, &diff, &triple).unwrap();
        let (nu, nv) = (triple.v_norm(&u), triple.v_norm(&v));
        let rhs = (nu.powf(alpha - 1.0) - nv.powf(alpha - 1.0)) * (nu - nv);
        worst = worst.min(lhs - rhs);
    }
    suite.push("duality_monotonicity", worst, 1e-9, "⟨J(u)-J(v), u-v⟩ ≥ norm chain".into());

    // operator monotonicity and coercivity of minimal selections
    for (op, label) in [
        (
            MultiValuedOperator::porous_media(
                ScalarGraph::power(1.5, 1.0).unwrap(),
                GelfandTriple::porous_media(1.5, Dim::Two).unwrap(),
            )
            .unwrap(),
            "pm",
        ),
        (
            MultiValuedOperator::phi_laplace(
                ScalarGraph::power(2.0, 0.0).unwrap(),
                GelfandTriple::phi_laplace(2.0).unwrap(),
            )
            .unwrap(),
            "pl",
        ),
    ] {
        let mut worst_mono = f64::INFINITY;
        let mut worst_coer = f64::INFINITY;
        let a = op.assumptions();
        for _ in 0..suite.samples {
            let u = rand_field(grid, &mut rng);
            let v = rand_field(grid, &mut rng);
            let au = apply_minimal(&op, &u).unwrap();
            let av = apply_minimal(&op, &v).unwrap();
            let diff = u.sub(&v);
            worst_mono = worst_mono.min(
                pairing(&au, &diff, op.triple()).unwrap()
                    - pairing(&av, &diff, op.triple()).unwrap(),
            );
            let lhs = pairing(&au, &u, op.triple()).unwrap();
            worst_coer =
                worst_coer.min(lhs - (a.delta * op.triple().v_norm(&u).powf(a.alpha) - a.f_const));
        }
        suite.push(&format!("ha1_monotone_{label}"), worst_mono, 1e-9, "⟨a(u)-a(v),u-v⟩ ≥ 0".into());
        suite.push(&format!("ha2_coercive_{label}"), worst_coer, 1e-8, "⟨A⁰u,u⟩ ≥ δ‖u‖^α - f".into());
    }

    // vector resolvent: residual + uniqueness across schedules
    let op = MultiValuedOperator::porous_media(
        ScalarGraph::power(1.5, 1.0).unwrap(),
        GelfandTriple::porous_media(1.5, Dim::Two).unwrap(),
    )
    .unwrap();
    let params = YosidaParams::new(0.3, 1.5).unwrap();
    let mut worst = f64::INFINITY;
    for _ in 0..(if suite.full { 10 } else { 4 }) {
        let x = rand_field(grid, &mut rng);
        let y1 = vector_resolvent(&op, &x, &params, &SolverOpts::default()).unwrap();
        let y2 = vector_resolvent(&op, &x, &params, &SolverOpts::alternate()).unwrap();
        worst = worst.min(1e-6 - op.triple().h_norm(&y1.sub(&y2)));
    }
    suite.push("vector_resolvent_uniqueness", worst, 0.0, "two continuation schedules agree in H".into());

    if suite.full {
        // vector Prop 2.11 suite on the 8×8 grid (both shipped exponents)
        for p in [1.5_f64, 3.0] {
            let triple = GelfandTriple::porous_media(p, Dim::Two).unwrap();
            let op = MultiValuedOperator::porous_media(
                ScalarGraph::power(p, 1.0).unwrap(),
                triple,
            )
            .unwrap();
            let mut worst_ii = f64::INFINITY;
            let mut worst_iv = f64::INFINITY;
            let mut worst_gauge = f64::INFINITY;
            let mut worst_mono = f64::INFINITY;
            let mut prev_gap = f64::INFINITY;
            let mut gaps_monotone = true;
            for lam in [1.0_f64, 0.1, 0.01] {
                let lambda = lam.min(0.99 / op.assumptions().delta.max(1e-9));
                let params = YosidaParams::new(lambda, p).unwrap();
                let mut gap_here = 0.0_f64;
                for k in 0..10 {
                    let x = rand_field(grid, &mut rng).scale(1.5);
                    let (a, y) =
                        vector_yosida_detailed(&op, &x, &params, &SolverOpts::default()).unwrap();
                    let a0 = apply_minimal(&op, &x).unwrap();
                    let na = dual_norm(&a, op.triple()).unwrap().upper;
                    let na0 = dual_norm(&a0, op.triple()).unwrap().upper;
                    worst_ii = worst_ii.min(na0 * (1.0 + 1e-6) - na);
                    // membership: density of A_λ within the graph at R_λ
                    let ad = a.as_node().unwrap();
                    let mut memb = f64::INFINITY;
                    for (av, yv) in ad.values().iter().zip(y.values()) {
                        let (lo, hi) = op.graph().eval(*yv);
                        memb = memb.min((av - lo).min(hi - av) + 1e-6 * (1.0 + av.abs()));
                    }
                    worst_iv = worst_iv.min(memb);
                    // gauge identity in the density representation
                    let lhs = op.triple().v_norm(&x.sub(&y)).powf(p);
                    let rhs = lambda.powf(p / (p - 1.0)) * na.powf(p / (p - 1.0));
                    worst_gauge =
                        worst_gauge.min(1e-7 * (1.0 + lhs) - (lhs - rhs).abs());
                    gap_here = gap_here.max(dual_norm(
                        &sub_dual(&a, &a0),
                        op.triple(),
                    )
                    .unwrap()
                    .upper);
                    if k < 3 {
                        let x2 = rand_field(grid, &mut rng).scale(1.5);
                        let a2 = vector_yosida_detailed(&op, &x2, &params, &SolverOpts::default())
                            .unwrap()
                            .0;
                        let lhsm = pairing(&sub_dual(&a, &a2), &x.sub(&x2), op.triple()).unwrap();
                        worst_mono = worst_mono.min(lhsm);
                    }
                }
                gaps_monotone &= gap_here <= prev_gap * (1.0 + 1e-6) || gap_here < 1e-8;
                prev_gap = gap_here;
            }
            suite.push(&format!("prop211_ii_vector_p{p}"), worst_ii, 0.0, "‖A_λ‖ ≤ ‖A⁰‖(1+1e-6)".into());
            suite.push(&format!("prop211_iv_vector_p{p}"), worst_iv, 0.0, "A_λ(x) ∈ A(R_λ(x))".into());
            suite.push(&format!("gauge_identity_vector_p{p}"), worst_gauge, 0.0, "vector gauge identity".into());
            suite.push(&format!("prop211_i_vector_p{p}"), worst_mono, 1e-8, "⟨A_λ(u)-A_λ(v),u-v⟩ ≥ 0".into());
            suite.push_flag(
                &format!("prop211_iii_vector_p{p}"),
                gaps_monotone,
                "‖A_λ - A⁰‖ decreasing along λ ∈ {1, 0.1, 0.01}".into(),
            );
        }

        // Lemma A.3 on fields
        let p = 1.5;
        let op = MultiValuedOperator::porous_media(
            ScalarGraph::power(p, 0.0).unwrap(),
            GelfandTriple::porous_media(p, Dim::Two).unwrap(),
        )
        .unwrap();
        let a = op.assumptions();
        let mut worst = f64::INFINITY;
        for _ in 0..50 {
            let x = rand_field(grid, &mut rng).scale(2.0);
            let lambda = 0.05 + rng.random::<f64>() * 0.9 / a.delta.max(1.0);
            let params = YosidaParams::new(lambda, p).unwrap();
            let (al, _) = vector_yosida_detailed(&op, &x, &params, &SolverOpts::default()).unwrap();
            let lhs = pairing(&al, &x, op.triple()).unwrap();
            let rhs = a.delta * 2f64.powf(-p) * op.triple().v_norm(&x).powf(p) - a.f_const;
            worst = worst.min(lhs - rhs);
        }
        suite.push("lemma_a3_vector", worst, 1e-8, "⟨A_λx, x⟩ ≥ δ2^{-α}‖x‖^α - f".into());
    }
}

fn sub_dual(a: &DualField, b: &DualField) -> DualField {
    match (a, b) {
        (DualField::Node(x), DualField::Node(y)) => DualField::Node(x.sub(y)),
        (DualField::Grad(x), DualField::Grad(y)) => DualField::Grad(x.sub(y)),
        _ => panic!("mixed dual representations"),
    }
}

fn fast_diffusion_config(n: usize, noise: NoiseModel) -> SimConfig {
    let grid = Grid::new_1d(n).unwrap();
    let triple = GelfandTriple::porous_media(1.5, Dim::One).unwrap();
    let op =
        MultiValuedOperator::porous_media(ScalarGraph::power(1.5, 0.0).unwrap(), triple).unwrap();
    let initial = Field::sine_mode(grid, 1, 0.2);
    let eps = 1e-6 * op.triple().h_norm(&initial);
    SimConfig {
        op,
        drift: SingleValuedDrift::Zero,
        noise,
        horizon: 0.01,
        dt: 5e-6,
        mu: 1e-3,
        initial,
        seed: 2024,
        scheme: Scheme::Explicit,
        eps_extinct: eps,
        record_stride: 100,
        checkpoints: vec![],
        keep_snapshots: false,
    }
}

fn sde_properties(suite: &mut Suite) {
    // determinism across thread counts
    let cfg = fast_diffusion_config(suite.grid_cap.min(16), NoiseModel::constant_modes(&[0.05]));
    let b1 = {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| simulate_batch(&cfg, 4).unwrap())
    };
    let b8 = {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        pool.install(|| simulate_batch(&cfg, 4).unwrap())
    };
    let same = b1
        .iter()
        .zip(&b8)
        .all(|(x, y)| x.norm_h == y.norm_h && x.norm_v == y.norm_v);
    suite.push_flag("trajectory_determinism", same, "1-thread vs 8-thread bit-exact".into());

    // zero absorbing + monotone H-norm decay for K = 0
    let mut det = fast_diffusion_config(suite.grid_cap.min(16), NoiseModel::none());
    det.initial = Field::sine_mode(det.grid(), 1, 0.05);
    det.eps_extinct = 1e-3 * det.op.triple().h_norm(&det.initial);
    det.horizon = 1.0;
    det.dt = 2e-5;
    let traj = simulate(&det, 0).unwrap();
    let mut monotone = true;
    for w in traj.norm_h.windows(2) {
        if w[1] > w[0] + 1e-14 {
            monotone = false;
        }
    }
    suite.push_flag(
        "energy_decay_deterministic",
        monotone,
        "t ↦ ‖X‖_H nonincreasing for K = 0, f = 0".into(),
    );
    let absorbed = traj
        .extinction_time
        .map(|tau| {
            traj.times
                .iter()
                .zip(&traj.norm_h)
                .all(|(t, h)| *t <= tau || *h == 0.0)
        })
        .unwrap_or(false);
    suite.push_flag("zero_absorbing", absorbed, "state is exactly 0 after τ_ε".into());

    // multiplicative noise keeps the state collinear with x (flat graph)
    let grid = Grid::new_1d(8).unwrap();
    let triple = GelfandTriple::porous_media(2.0, Dim::One).unwrap();
    let op = MultiValuedOperator::porous_media(ScalarGraph::btw(0.0).unwrap(), triple).unwrap();
    let initial = Field::constant(grid, -1.0);
    let mut cfg = SimConfig {
        op,
        drift: SingleValuedDrift::Zero,
        noise: NoiseModel::constant_modes(&[0.4]),
        horizon: 0.02,
        dt: 1e-4,
        mu: 1e-3,
        initial,
        seed: 9,
        scheme: Scheme::Explicit,
        eps_extinct: 1e-9,
        record_stride: 10,
        checkpoints: vec![0.01, 0.02],
        keep_snapshots: true,
    };
    let traj = simulate(&cfg, 0).unwrap();
    let mut worst = f64::INFINITY;
    for (_, snap) in &traj.snapshots {
        let ratio = snap.values()[0] / cfg.initial.values()[0];
        let expect = cfg.initial.scale(ratio);
        worst = worst.min(1e-12 * ratio.abs().max(1.0) - snap.sub(&expect).linf());
    }
    suite.push("noise_collinearity", worst, 0.0, "X(t) ∥ x under pure multiplicative noise".into());

    // scheme consistency on the linear model
    let n = if suite.full { 32 } else { 16 };
    let grid = Grid::new_1d(n).unwrap();
    let triple = GelfandTriple::porous_media(2.0, Dim::One).unwrap();
    let op = MultiValuedOperator::porous_media(ScalarGraph::linear(1.0).unwrap(), triple).unwrap();
    cfg = SimConfig {
        op,
        drift: SingleValuedDrift::Zero,
        noise: NoiseModel::none(),
        horizon: 0.1,
        dt: 1e-3,
        mu: 1e-8,
        initial: Field::sine_mode(grid, 1, 0.2),
        seed: 1,
        scheme: Scheme::SemiImplicitLinear,
        eps_extinct: 1e-12,
        record_stride: 1000,
        checkpoints: vec![],
        keep_snapshots: false,
    };
    let mut errs = vec![];
    for dt in [1e-3, 5e-4] {
        let mut c = cfg.clone();
        c.dt = dt;
        let t = simulate(&c, 0).unwrap();
        let rate = grid.mu1() / (1.0 + cfg.mu);
        let exact = cfg
            .op
            .triple()
            .h_norm(&Field::sine_mode(grid, 1, 0.2 * (-rate * cfg.horizon).exp()));
        errs.push((t.norm_h.last().unwrap() - exact).abs());
    }
    let ratio = errs[0] / errs[1];
    suite.push(
        "scheme_consistency",
        0.3 - (ratio - 2.0).abs(),
        0.0,
        format!("halving Δt scales the error by {ratio:.3} (want [1.7, 2.3])"),
    );
}

fn extinction_properties(suite: &mut Suite) {
    // deterministic fast diffusion goes extinct; report is reproducible
    let mut cfg = fast_diffusion_config(16, NoiseModel::constant_modes(&[0.02, 0.02]));
    cfg.initial = Field::sine_mode(cfg.grid(), 1, 0.05);
    cfg.eps_extinct = 1e-4 * cfg.op.triple().h_norm(&cfg.initial);
    cfg.horizon = 1.5;
    cfg.dt = 2e-5;
    let study1 = crate::extinction::run_extinction_study(&cfg, 100, 5).unwrap();
    let study2 = crate::extinction::run_extinction_study(&cfg, 100, 5).unwrap();
    let j1 = serde_json::to_string(&study1).unwrap();
    let j2 = serde_json::to_string(&study2).unwrap();
    suite.push_flag("extinction_report_determinism", j1 == j2, "identical seeds, identical JSON".into());

    suite.push_flag(
        "supermartingale_fast_diffusion",
        study1.supermartingale.passed,
        "E‖X‖^{2-α} nonincreasing within 2·SE".into(),
    );
    suite.push_flag(
        "energy_inequality_fast_diffusion",
        study1.energy.passed,
        "Lemma-4.6-style inequality within 2·SE".into(),
    );
    suite.push_flag(
        "moment_envelope",
        study1.moment.pass,
        "sup_t ‖X‖² ≤ 10‖x‖² for small noise".into(),
    );

    // censored-mean bracketing direction
    let cens = study1.report.mean_tau_censored;
    let obs = study1.report.mean_tau_observed.unwrap_or(cens);
    suite.push(
        "censored_mean_direction",
        cens - obs,
        1e-12,
        "censored-at-T mean ≥ observed-only mean".into(),
    );

    // c* formula sanity
    let c = c_star(1.0, 1.5, 2.0).unwrap();
    suite.push("c_star_formula", 1e-12 - (c - 4.0).abs(), 0.0, "c*(1, 1.5, 2) = 4".into());
}
