mod common;

use common::*;
use invpde::basis::{
    eval_basis_jets, eval_basis_jets_mapped, eval_basis_values, init_hidden, init_hidden_stream, HiddenLayer,
    HiddenParams, InputMap, StreamMode,
};
use invpde::{Activation, Architecture, BasisConfig, EnsembleBasis, JetComponent};
use proptest::prelude::*;

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

#[test]
fn two_hidden_layers_match_finite_differences() {
    let arch = Architecture::new(vec![2, 6, 8, 1]).unwrap();
    let params = init_hidden(&arch, 1.0, 17).unwrap();
    let mut g = rng(4);
    let pts: Vec<[f64; 2]> = (0..6).map(|_| [rand::Rng::random::<f64>(&mut g), rand::Rng::random::<f64>(&mut g)]).collect();
    let table = eval_basis_jets(&params, &pts);
    for (p, &[x, y]) in pts.iter().enumerate() {
        for j in 0..table.width {
            let f = |a: f64, b: f64| eval_basis_values(&params, &InputMap::IDENTITY, &[[a, b]])[j];
            let fd = fd_jet(f, x, y, 1e-4);
            let jet = table.jet(p, j);
            let scale = [jet.value, jet.dx, jet.dy, jet.dxx, jet.dyy]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for c in JetComponent::ALL {
                let e = rel(jet.component(c), fd.component(c), scale);
                assert!(e <= 1e-6, "point {p} basis {j} {c:?}: rel err {e:e}");
            }
        }
    }
}

#[test]
fn mapped_inputs_match_finite_differences() {
    let arch = Architecture::new(vec![2, 5, 1]).unwrap();
    let params = init_hidden(&arch, 2.0, 3).unwrap();
    let map = InputMap::onto_unit_box([0.5, -1.0], [2.0, 3.0]);
    let pts = [[0.7, 0.0], [1.9, 2.5], [1.2, -0.8]];
    let table = eval_basis_jets_mapped(&params, &map, &pts);
    for (p, &[x, y]) in pts.iter().enumerate() {
        for j in 0..table.width {
            let fd = fd_jet(|a, b| eval_basis_values(&params, &map, &[[a, b]])[j], x, y, 1e-4);
            let jet = table.jet(p, j);
            let scale = [jet.value, jet.dx, jet.dy, jet.dxx, jet.dyy]
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for c in JetComponent::ALL {
                assert!(rel(jet.component(c), fd.component(c), scale) <= 1e-6);
            }
        }
    }
}

#[test]
fn square_activation_is_exact() {
    // One node z = w·x + b with σ(z) = z² has value z², gradient 2z w and
    // pure second derivatives 2 w_i².
    let params = HiddenParams {
        layers: vec![HiddenLayer {
            inputs: 2,
            outputs: 1,
            weights: vec![0.5, -1.5],
            bias: vec![0.25],
        }],
        r_m: 2.0,
        seed: 0,
        stream: 0,
        activation: Activation::Square,
    };
    let t = eval_basis_jets(&params, &[[2.0, 1.0]]);
    let z = 0.5 * 2.0 - 1.5 * 1.0 + 0.25;
    let j = t.jet(0, 0);
    assert_eq!(j.value, z * z);
    assert_eq!(j.dx, 2.0 * z * 0.5);
    assert_eq!(j.dy, 2.0 * z * -1.5);
    assert_eq!(j.dxx, 2.0 * 0.25);
    assert_eq!(j.dyy, 2.0 * 2.25);
}

#[test]
fn entries_have_zero_mean() {
    let arch = Architecture::new(vec![2, 33_333, 1]).unwrap();
    let p = init_hidden(&arch, 1.0, 99).unwrap();
    let n = p.entries().count();
    assert!(n >= 100_000 - 1);
    let mean = p.entries().sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!(p.entries().all(|v| v.abs() <= 1.0));
}

#[test]
fn expansion_is_the_same_linear_combination_for_every_component() {
    let arch = Architecture::new(vec![2, 12, 1]).unwrap();
    let cfg = BasisConfig::new(arch, 1.5, 8);
    let basis = EnsembleBasis::new(cfg, &[([0.0, 0.0], [1.0, 2.0])]).unwrap();
    let pts = [[0.1, 0.3], [0.9, 1.7], [0.5, 1.0]];
    let table = basis.jets(0, &pts);
    let mut g = rng(6);
    let beta: Vec<f64> = (0..12).map(|_| rand::Rng::random::<f64>(&mut g) - 0.5).collect();
    for (p, &pt) in pts.iter().enumerate() {
        let combined = table.combine(p, &beta);
        let direct: f64 = basis.values(0, &[pt]).iter().zip(&beta).map(|(a, b)| a * b).sum();
        assert!((combined.value - direct).abs() < 1e-14);
        let fd = fd_jet(
            |x, y| basis.values(0, &[[x, y]]).iter().zip(&beta).map(|(a, b)| a * b).sum(),
            pt[0],
            pt[1],
            1e-4,
        );
        for c in JetComponent::ALL {
            assert!((combined.component(c) - fd.component(c)).abs() <= 1e-6 * (1.0 + fd.component(c).abs()));
        }
    }
}

#[test]
fn subdomains_use_distinct_streams_unless_copies_requested() {
    let arch = Architecture::new(vec![2, 4, 1]).unwrap();
    let boxes = [([0.0, 0.0], [1.0, 1.0]), ([1.0, 0.0], [2.0, 1.0])];
    let distinct = EnsembleBasis::new(BasisConfig::new(arch.clone(), 1.0, 5), &boxes).unwrap();
    assert_ne!(distinct.nets[0].layers[0].weights, distinct.nets[1].layers[0].weights);
    let mut cfg = BasisConfig::new(arch.clone(), 1.0, 5);
    cfg.streams = StreamMode::IdenticalCopies;
    let copies = EnsembleBasis::new(cfg, &boxes).unwrap();
    assert_eq!(copies.nets[0].layers, copies.nets[1].layers);
    let single = init_hidden_stream(&arch, 1.0, 5, 1, Activation::Gaussian).unwrap();
    assert_eq!(single.layers, distinct.nets[1].layers);
}

#[test]
fn invalid_architectures_are_rejected() {
    assert!(Architecture::new(vec![2]).is_err());
    assert!(Architecture::new(vec![2, 0, 1]).is_err());
    let arch = Architecture::new(vec![2, 3, 1]).unwrap();
    assert_eq!(arch.basis_width(), 3);
    assert!(init_hidden(&arch, 0.0, 1).is_err());
    assert!(init_hidden(&arch, -1.0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn entries_stay_in_range(r_m in 0.01f64..10.0, seed in 0u64..10_000, w in 1usize..20) {
        let arch = Architecture::new(vec![2, w, w + 1, 1]).unwrap();
        let a = init_hidden(&arch, r_m, seed).unwrap();
        prop_assert!(a.entries().all(|v| v.abs() <= r_m));
        prop_assert_eq!(a, init_hidden(&arch, r_m, seed).unwrap());
    }

    #[test]
    fn jets_vary_continuously(x in -1.0f64..1.0, y in -1.0f64..1.0, seed in 0u64..100) {
        let arch = Architecture::new(vec![2, 6, 1]).unwrap();
        let p = init_hidden(&arch, 1.0, seed).unwrap();
        let t0 = eval_basis_jets(&p, &[[x, y]]);
        let t1 = eval_basis_jets(&p, &[[x + 1e-9, y - 1e-9]]);
        for c in JetComponent::ALL {
            for (a, b) in t0.component(c).iter().zip(t1.component(c)) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
