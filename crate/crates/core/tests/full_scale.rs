//! Large polytope instance. Takes hours on a single core, so it only runs
//! with `cargo test --release -p povmsim --test full_scale -- --ignored`.

use povmsim::polytope::{build_qubit_polytope, scan_lower_bound, Preset};

#[test]
#[ignore]
fn full_preset_bound() {
    let cfg = Preset::Full.config();
    let h = build_qubit_polytope(&cfg.directions, cfg.polygon_sides, cfg.tangent_to_tetra).unwrap();
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let scan = scan_lower_bound(&h, jobs).unwrap();
    println!("t_delta = {:.17} over {} vertices", scan.t_delta, scan.vertex_count);
    assert!(scan.t_delta >= 0.5 && scan.t_delta <= (2.0f64 / 3.0).sqrt() + 1e-6);
}
