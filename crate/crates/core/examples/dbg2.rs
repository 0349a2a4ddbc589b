use std::time::Instant;
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
    let cfg = SimConfig {
        op: op.clone(),
        drift: SingleValuedDrift::Zero,
        noise: NoiseModel::constant_modes(&[0.02, 0.02]),
        horizon: 0.01,   // short probe
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
    let steps = (cfg.horizon / cfg.dt) as f64;
    let el = t0.elapsed();
    println!(
        "probe: {steps} steps in {el:?} → {:.2} ns/step/node; tau={:?}",
        el.as_nanos() as f64 / steps / 64.0,
        traj.extinction_time
    );
}
