mod common;

use common::*;
use invpde::geometry::{locate_outer_boundary, Edge};
use invpde::{build_discretization, Benchmark, DomainSpec};
use proptest::prelude::*;

#[test]
fn unit_square_grid() {
    let spec = DomainSpec::new([(0.0, 1.0), (0.0, 1.0)], (1, 1), (1, 1)).unwrap();
    let d = build_discretization(&spec, (5, 5), 0, &mut rng(0)).unwrap();
    let pts = &d.subs[0].colloc;
    assert_eq!(pts[0], [0.0, 0.0]);
    assert_eq!(pts[24], [1.0, 1.0]);
    assert_eq!(pts[d.grid_index(1, 0)], [0.25, 0.0]);
    assert_eq!(pts[d.grid_index(0, 3)], [0.0, 0.75]);
}

#[test]
fn two_by_one_has_five_matching_vertical_pairs() {
    let spec = DomainSpec::new([(0.0, 2.0), (0.0, 1.0)], (2, 1), (1, 1)).unwrap();
    let d = build_discretization(&spec, (5, 5), 3, &mut rng(0)).unwrap();
    assert_eq!(d.vertical.len(), 5);
    assert!(d.horizontal.is_empty());
    for p in &d.vertical {
        let a = d.coord(p.e1, p.p1);
        let b = d.coord(p.e2, p.p2);
        assert_eq!(a, b);
        assert_eq!(a[0], 1.0);
    }
}

#[test]
fn poisson_row_count_audit() {
    let case = small_case(Benchmark::Poisson, [2, 2], 10, 5, 7);
    assert_eq!(case.disc.standard_row_count(), 588);
    assert_eq!(case.tables.n_rows(), 588);
    assert_eq!(case.tables.n_theta(), 4 * 5 + 1);
}

#[test]
fn boundary_descriptor_counts() {
    let spec = DomainSpec::new([(0.0, 1.0), (0.0, 1.0)], (1, 1), (1, 1)).unwrap();
    let d = build_discretization(&spec, (5, 5), 0, &mut rng(0)).unwrap();
    assert_eq!(locate_outer_boundary(&spec, &d).len(), 20);

    let spec = DomainSpec::new([(0.0, 3.0), (-1.0, 1.0)], (3, 2), (1, 1)).unwrap();
    let d = build_discretization(&spec, (4, 4), 0, &mut rng(0)).unwrap();
    let bps = locate_outer_boundary(&spec, &d);
    assert_eq!(bps.len(), 40);
    let mut last = 0;
    for bp in &bps {
        let order = Edge::ALL.iter().position(|e| *e == bp.edge).unwrap();
        assert!(order >= last, "edges must appear left, right, bottom, top");
        last = order;
        let [x, y] = d.coord(bp.sub, bp.point);
        let ok = match bp.edge {
            Edge::Left => x == 0.0,
            Edge::Right => x == 3.0,
            Edge::Bottom => y == -1.0,
            Edge::Top => y == 1.0,
        };
        assert!(ok, "{bp:?} at ({x}, {y})");
    }
}

#[test]
fn degenerate_inputs_are_rejected() {
    assert!(DomainSpec::new([(1.0, 1.0), (0.0, 1.0)], (1, 1), (1, 1)).is_err());
    assert!(DomainSpec::new([(0.0, 1.0), (0.0, 1.0)], (0, 1), (1, 1)).is_err());
    assert!(DomainSpec::new([(0.0, 1.0), (0.0, 1.0)], (1, 1), (2, 1)).is_err());
    let spec = DomainSpec::new([(0.0, 1.0), (0.0, 1.0)], (1, 1), (1, 1)).unwrap();
    assert!(build_discretization(&spec, (1, 5), 0, &mut rng(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counts_pairs_and_measurements(n1 in 1usize..4, n2 in 1usize..4, q1 in 2usize..7, q2 in 2usize..7, q_s in 0usize..6, seed in 0u64..100) {
        let spec = DomainSpec::new([(-0.5, 2.0), (0.0, 1.5)], (n1, n2), (1, 1)).unwrap();
        let d = build_discretization(&spec, (q1, q2), q_s, &mut rng(seed)).unwrap();
        prop_assert_eq!(d.n_sub(), n1 * n2);
        prop_assert_eq!(d.vertical.len(), (n1 - 1) * n2 * q2);
        prop_assert_eq!(d.horizontal.len(), n1 * (n2 - 1) * q1);
        for p in d.vertical.iter().chain(&d.horizontal) {
            prop_assert_eq!(d.coord(p.e1, p.p1), d.coord(p.e2, p.p2));
        }
        for s in &d.subs {
            prop_assert_eq!(s.colloc.len(), q1 * q2);
            prop_assert_eq!(s.meas.len(), q_s);
            for m in &s.meas {
                prop_assert!(m[0] > s.lo[0] && m[0] < s.hi[0] && m[1] > s.lo[1] && m[1] < s.hi[1]);
            }
            prop_assert_eq!(s.index, spec.sub_index(s.ij.0, s.ij.1));
        }
        prop_assert_eq!(locate_outer_boundary(&spec, &d).len(), 2 * n2 * q2 + 2 * n1 * q1);
        let again = build_discretization(&spec, (q1, q2), q_s, &mut rng(seed)).unwrap();
        prop_assert_eq!(again, d);
    }

    #[test]
    fn dirichlet_row_identity(n1 in 1usize..3, n2 in 1usize..3, q in 3usize..6, q_s in 0usize..5) {
        let case = small_case(Benchmark::Poisson, [n1, n2], q, 3, q_s);
        prop_assert_eq!(case.tables.n_rows(), case.disc.standard_row_count());
        prop_assert_eq!(case.tables.n_theta(), n1 * n2 * 3 + 1);
    }
}
