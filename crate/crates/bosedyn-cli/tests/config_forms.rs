//! Config-layer checks: builtin Hamiltonians, file-based tensors,
//! initial-state disambiguation.

use bosedyn_cli::config::*;
use bosedyn_core::fock::sector;

fn base(dir: &std::path::Path) -> ScenarioConfig {
    serde_json::from_value(serde_json::json!({
        "d": 3, "n": 2,
        "h1": { "kind": "harmonic", "j": 1.0, "k": 0.4 },
        "h2": { "kind": "contact", "g": 0.2 },
        "initial_state": { "kind": "fock", "occupations": [2, 0, 0] },
        "grid": { "t1": 1.0, "dt_out": 0.5 },
        "engines": ["exact"],
        "output_dir": dir.join("out"),
    }))
    .unwrap()
}

#[test]
fn harmonic_builtin_is_hermitian_with_centered_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = base(dir.path());
    let h1 = cfg.build_one_body().unwrap();
    assert!(h1.hermiticity_deviation() < 1e-15);
    // center site has the smallest on-site energy
    let diag: Vec<f64> = (0..3).map(|x| h1.coeffs()[(x, x)].re).collect();
    assert!(diag[1] < diag[0] && diag[1] < diag[2]);
}

#[test]
fn file_based_tensors_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let h1_path = dir.path().join("h1.json");
    std::fs::write(&h1_path, "[[[0.0,0.0],[0.5,-0.25]],[[0.5,0.25],[1.0,0.0]]]").unwrap();
    let h2_path = dir.path().join("h2.json");
    // d=2 contact written out longhand: only (ii;ii) entries
    let mut tensor = vec![vec![[0.0, 0.0]; 4]; 4];
    tensor[0][0] = [0.7, 0.0];
    tensor[3][3] = [0.7, 0.0];
    std::fs::write(&h2_path, serde_json::to_string(&tensor).unwrap()).unwrap();
    let mut cfg = base(dir.path());
    cfg.d = 2;
    cfg.initial_state = InitialStateSpec::Fock {
        occupations: vec![2, 0],
    };
    cfg.h1 = OneBodySpec::File { path: h1_path };
    cfg.h2 = TwoBodySpec::File { path: h2_path };
    let h = cfg.build_hamiltonian().unwrap();
    assert!((h.one_body().coeffs()[(0, 1)].re - 0.5).abs() < 1e-15);
    assert!((h.two_body().element(0, 0, 0, 0).re - 0.7).abs() < 1e-15);
}

#[test]
fn explicit_amplitudes_disambiguate_by_length() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    // d = 3, n = 2: sector dimension 6
    let basis = sector(3, 2).unwrap();
    // single-particle length-3 vector expands to the condensate
    let s = 1.0 / 3f64.sqrt();
    cfg.initial_state = InitialStateSpec::Explicit {
        amplitudes: vec![[s, 0.0], [s, 0.0], [s, 0.0]],
    };
    let v = initial_sector_amplitudes(&cfg, &basis).unwrap();
    assert_eq!(v.len(), 6);
    assert!((v.norm() - 1.0).abs() < 1e-12);
    // full-length sector vector is taken as-is
    let mut sect = vec![[0.0, 0.0]; 6];
    sect[0] = [1.0, 0.0];
    cfg.initial_state = InitialStateSpec::Explicit { amplitudes: sect };
    let v = initial_sector_amplitudes(&cfg, &basis).unwrap();
    assert!((v[0].re - 1.0).abs() < 1e-12);
    // wrong length rejected
    cfg.initial_state = InitialStateSpec::Explicit {
        amplitudes: vec![[1.0, 0.0]; 4],
    };
    assert!(initial_sector_amplitudes(&cfg, &basis).is_err());
}

#[test]
fn fock_initial_state_must_match_sector() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = base(dir.path());
    cfg.initial_state = InitialStateSpec::Fock {
        occupations: vec![1, 0, 0],
    }; // sums to 1, n = 2
    let basis = sector(3, 2).unwrap();
    let e = initial_sector_amplitudes(&cfg, &basis).unwrap_err();
    assert!(e.0.contains("sum to 1"));
}
