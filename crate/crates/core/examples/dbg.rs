use std::time::Instant;
use yosida::extinction::*;
use yosida::graphs::ScalarGraph;
use yosida::operators::{MultiValuedOperator, SingleValuedDrift};
use yosida::sde::*;
use yosida::spaces::*;

fn main() {
    let grid = Grid::new_1d(64).unwrap();
    let triple = GelfandTriple::porous_media(1.5, Dim::One).unwrap();
    let op = MultiValuedOperator::porous_media(ScalarGraph::power(1.5, 0.0).unwrap(), triple)
        .unwrap();
    let initial = Field::sine_mode(grid, 1, 0.2);
    let x_h = op.triple().h_norm(&initial);
    let c0 = embedding_constant(op.triple(), grid).unwrap();
    let cstar = c_star(1.0, 1.5, c0).unwrap();
    let t_floor = horizon_for_floor(cstar, x_h, 1.5, 0.5).unwrap();
    let cfg = SimConfig {
        op: op.clone(),
        drift: SingleValuedDrift::Zero,
        noise: NoiseModel::constant_modes(&[0.02, 0.02]),
        horizon: t_floor,
        dt: 1.5e-7,
        mu: 1e-3,
        initial: initial.clone(),
        seed: 42,
        scheme: Scheme::Explicit,
        eps_extinct: 1e-6 * x_h,
        record_stride: 50_000,
        checkpoints: vec![],
        keep_snapshots: false,
    };
    let t0 = Instant::now();
    let traj = simulate(&cfg, 0).unwrap();
    println!("single traj: tau = {:?} wall = {:?}", traj.extinction_time, t0.elapsed());

    let t0 = Instant::now();
    let study = run_extinction_study(&cfg, 100, 10).unwrap();
    println!("study N=100 wall = {:?}", t0.elapsed());
    let r = &study.report;
    println!("P = {:.4} floor = {:.4} pass = {}", r.prob_empirical, r.prob_floor, r.prob_pass);
    println!("mean = {:.5} bound = {:.5} pass = {}", r.mean_tau_censored, r.mean_bound, r.mean_pass);
    println!("tenth: P = {:.4} mean = {:.5}", r.prob_empirical_tenth, r.mean_tau_censored_tenth);
    println!("supermartingale pass = {}", study.supermartingale.passed);
    for row in &study.supermartingale.rows { println!("  t={:.3} m={:.6} se={:.2e} {}", row.t, row.mean, row.se, row.pass); }
    println!("energy pass = {}", study.energy.passed);
    for row in &study.energy.rows { println!("  t={:.3} lhs={:.6} rhs={:.6} {}", row.t, row.lhs, row.rhs, row.pass); }
    println!("moment pass = {} ({:.3e} vs {:.3e})", study.moment.pass, study.moment.worst_sup_sq, study.moment.envelope);
}
