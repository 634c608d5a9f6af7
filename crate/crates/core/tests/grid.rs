mod common;

use inverse_lmp::grid::{compute_ptdf, ieee14, load_grid, save_grid, synthetic_grid, Grid, SyntheticGridSpec};
use inverse_lmp::GridError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn flows(grid: &Grid, inj: &[f64]) -> Vec<f64> {
    grid.ptdf
        .iter()
        .map(|row| row.iter().zip(inj).map(|(p, i)| p * i).sum())
        .collect()
}

#[test]
fn two_bus_ptdf() {
    let ptdf = compute_ptdf(2, &[0], &[1], &[0.1], 0).unwrap();
    assert_eq!(ptdf, vec![vec![0.0, -1.0]]);
}

#[test]
fn triangle_splits_two_thirds_one_third() {
    // lines 0-1, 1-2, 0-2 with equal reactance; reference at bus 2 so
    // column 0 is "inject at 0, withdraw at 2"
    let ptdf = compute_ptdf(3, &[0, 1, 0], &[1, 2, 2], &[0.2, 0.2, 0.2], 2).unwrap();
    assert!((ptdf[2][0] - 2.0 / 3.0).abs() < 1e-12);
    assert!((ptdf[0][0] - 1.0 / 3.0).abs() < 1e-12);
    assert!((ptdf[1][0] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn ieee14_ptdf_matches_nodal_power_flow() {
    let grid = ieee14();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..10 {
        let inj = common::balanced_injection(&mut rng, grid.n_buses);
        let oracle = common::dc_flows(&grid, &inj);
        let got = flows(&grid, &inj);
        for (a, b) in got.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn reference_column_is_zero() {
    let grid = ieee14();
    assert!(grid.ptdf.iter().all(|row| row[grid.reference_bus] == 0.0));
}

#[test]
fn ptdf_is_linear() {
    let grid = ieee14();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = common::balanced_injection(&mut rng, 14);
    let b = common::balanced_injection(&mut rng, 14);
    let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.5 * x - 0.7 * y).collect();
    let (fa, fb, fm) = (flows(&grid, &a), flows(&grid, &b), flows(&grid, &mix));
    for l in 0..grid.n_lines() {
        assert!((fm[l] - (2.5 * fa[l] - 0.7 * fb[l])).abs() < 1e-9);
    }
}

#[test]
fn flows_do_not_depend_on_reference_bus() {
    let grid = ieee14();
    let moved = grid.with_reference(6).unwrap();
    assert_ne!(grid.ptdf, moved.ptdf);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let inj = common::balanced_injection(&mut rng, 14);
        for (a, b) in flows(&grid, &inj).iter().zip(flows(&moved, &inj)) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn ieee14_fixture_has_five_100mw_units() {
    let grid = ieee14();
    assert_eq!(grid.n_gens(), 5);
    assert!(grid.gen_max.iter().all(|&x| x == 100.0));
    assert!(grid.gen_min.iter().all(|&x| x == 0.0));
    grid.validate().unwrap();
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    let grid = ieee14();
    save_grid(&grid, &path).unwrap();
    let back = load_grid(&path).unwrap();
    assert_eq!(grid, back);
}

#[test]
fn shipped_fixture_matches_builtin_case() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/ieee14.json");
    let shipped = load_grid(std::path::Path::new(path)).unwrap();
    assert_eq!(shipped, ieee14());
}

#[test]
fn missing_line_limit_is_reported() {
    let mut doc: serde_json::Value = serde_json::from_str(&ieee14().to_json()).unwrap();
    doc.as_object_mut().unwrap().remove("line_limit");
    let err = Grid::from_json(&doc.to_string()).unwrap_err();
    assert!(matches!(err, GridError::MissingField("line_limit")), "{err}");
    assert!(err.to_string().contains("line_limit"));
}

#[test]
fn disconnected_network_is_rejected() {
    let err = compute_ptdf(4, &[0, 2], &[1, 3], &[0.1, 0.1], 0).unwrap_err();
    assert!(matches!(err, GridError::Disconnected(_)));
}

#[test]
fn synthetic_grid_is_reproducible_and_valid() {
    let spec = SyntheticGridSpec::default();
    let a = synthetic_grid(&spec).unwrap();
    let b = synthetic_grid(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.n_buses, 100);
    a.validate().unwrap();
    let load: f64 = a.base_load.iter().sum();
    assert!(load < a.total_capacity());
}
