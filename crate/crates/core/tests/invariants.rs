//! Property-based checks of the structural invariants: operator laws that
//! must hold for every input, not just the curated examples in the unit
//! suites. Fields are kept small so the brute-force paths stay cheap.

use std::sync::Arc;

use maxharm_core::field::{ScalarField, VectorField};
use maxharm_core::grid::{Domain, Grid, Topology};
use maxharm_core::linalg::SmallMat;
use maxharm_core::maximal::{max_hl, max_sharp, max_spherical, EvalMode, MaximalConfig};
use maxharm_core::norms::lq_norm;
use maxharm_core::report::InequalityReport;
use maxharm_core::rng::SplitMix64;
use maxharm_core::singular::{riesz2_apply, t_apply};
use proptest::prelude::*;

fn torus(n: usize) -> Arc<Domain> {
    let grid = Grid::new(&[n, n], 1.0 / n as f64, Topology::Torus).unwrap();
    Arc::new(Domain::full(grid).unwrap())
}

fn field_on(dom: &Arc<Domain>, values: Vec<f64>) -> ScalarField {
    ScalarField::from_values(dom.clone(), values).unwrap()
}

fn values_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The centered maximal function sees radius zero, so it dominates the
    /// data pointwise with no tolerance at all.
    #[test]
    fn maximal_dominates_pointwise(values in values_strategy(64)) {
        let dom = torus(8);
        let f = field_on(&dom, values);
        let cfg = MaximalConfig::build(&dom).unwrap();
        let mf = max_hl(&f, &cfg).unwrap();
        for i in 0..64 {
            prop_assert!(mf.get(i) >= f.get(i).abs());
        }
    }

    /// Sublinearity M(f + g) <= Mf + Mg, cellwise, up to summation
    /// roundoff.
    #[test]
    fn maximal_is_sublinear(
        a in values_strategy(64),
        b in values_strategy(64),
    ) {
        let dom = torus(8);
        let cfg = MaximalConfig::build(&dom).unwrap();
        let f = field_on(&dom, a.clone());
        let g = field_on(&dom, b.clone());
        let sum = field_on(&dom, a.iter().zip(&b).map(|(x, y)| x + y).collect());
        for op in [max_hl, max_sharp, max_spherical] {
            let mf = op(&f, &cfg).unwrap();
            let mg = op(&g, &cfg).unwrap();
            let ms = op(&sum, &cfg).unwrap();
            for i in 0..64 {
                prop_assert!(
                    ms.get(i) <= mf.get(i) + mg.get(i) + 1e-9,
                    "cell {}: {} > {} + {}", i, ms.get(i), mf.get(i), mg.get(i)
                );
            }
        }
    }

    /// Scaling by a power of two commutes with every rounding step, so
    /// homogeneity M(c f) = |c| M(f) holds bitwise.
    #[test]
    fn maximal_homogeneity_is_bitwise_for_dyadic_scalars(
        values in values_strategy(64),
        pow in -3i32..6,
    ) {
        let dom = torus(8);
        let cfg = MaximalConfig::build(&dom).unwrap();
        let c = (2.0f64).powi(pow);
        let f = field_on(&dom, values.clone());
        let cf = field_on(&dom, values.iter().map(|v| c * v).collect());
        let mf = max_hl(&f, &cfg).unwrap();
        let mcf = max_hl(&cf, &cfg).unwrap();
        for i in 0..64 {
            prop_assert_eq!(mcf.get(i).to_bits(), (c * mf.get(i)).to_bits());
        }
    }

    /// The pruned evaluator must be indistinguishable from the exhaustive
    /// one, bit for bit.
    #[test]
    fn fast_mode_is_bit_identical_to_brute_force(values in values_strategy(100)) {
        let dom = torus(10);
        let fast = MaximalConfig::build(&dom).unwrap();
        let brute = MaximalConfig::build(&dom).unwrap().with_mode(EvalMode::BruteForce);
        let f = field_on(&dom, values);
        for op in [max_hl, max_sharp, max_spherical] {
            let a = op(&f, &fast).unwrap();
            let b = op(&f, &brute).unwrap();
            for i in 0..100 {
                prop_assert_eq!(a.get(i).to_bits(), b.get(i).to_bits());
            }
        }
    }

    /// Domination transfers to every norm: ||f||_q <= ||Mf||_q with no
    /// slack, since the comparison already holds cell by cell.
    #[test]
    fn norm_of_maximal_dominates_norm_of_data(
        values in values_strategy(64),
        q in 1.0f64..4.0,
    ) {
        let dom = torus(8);
        let cfg = MaximalConfig::build(&dom).unwrap();
        let f = field_on(&dom, values);
        let mf = max_hl(&f, &cfg).unwrap();
        prop_assert!(lq_norm(&f, q).unwrap() <= lq_norm(&mf, q).unwrap());
    }

    /// On a unit-volume torus the q-norms are ordered in q.
    #[test]
    fn lq_norms_increase_with_the_exponent(
        values in values_strategy(64),
        q in 1.0f64..3.0,
        bump in 0.1f64..2.0,
    ) {
        let dom = torus(8);
        let f = field_on(&dom, values);
        let lo = lq_norm(&f, q).unwrap();
        let hi = lq_norm(&f, q + bump).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Gradient-part and divergence-free-part projections add back to the
    /// identity, and each projection is idempotent.
    #[test]
    fn projections_split_and_are_idempotent(values in values_strategy(128)) {
        let dom = torus(8);
        let v = VectorField::from_values(dom.clone(), values).unwrap();
        let r = riesz2_apply(&v).unwrap();
        let t = t_apply(&v).unwrap();
        let scale = (0..64).map(|i| v.norm_at(i)).fold(0.0f64, f64::max).max(1e-30);
        for i in 0..64 {
            for a in 0..2 {
                prop_assert!((r.get(i, a) + t.get(i, a) - v.get(i, a)).abs() <= 1e-12 * scale);
            }
        }
        let rr = riesz2_apply(&r).unwrap();
        for i in 0..64 {
            for a in 0..2 {
                prop_assert!((rr.get(i, a) - r.get(i, a)).abs() <= 1e-10 * scale);
            }
        }
        // The two parts are L2-orthogonal.
        let mut pairing = 0.0;
        for i in 0..64 {
            for a in 0..2 {
                pairing += r.get(i, a) * t.get(i, a);
            }
        }
        prop_assert!(pairing.abs() <= 1e-10 * scale * scale * 64.0);
    }
}

fn smallmat_strategy(n: usize) -> impl Strategy<Value = SmallMat> {
    prop::collection::vec(-10.0f64..10.0, n * n)
        .prop_map(move |entries| SmallMat::from_rows(n, &entries))
}

proptest! {
    /// Transposed-cofactor identity Aᵀ·cof(A) = det(A)·I in both supported
    /// dimensions, with no assumptions on invertibility.
    #[test]
    fn cofactor_identity_holds(
        a2 in smallmat_strategy(2),
        a3 in smallmat_strategy(3),
    ) {
        for a in [a2, a3] {
            let n = a.n();
            let product = a.transpose().mul(&a.cofactor());
            let det = a.det();
            let scale = a.frobenius().powi(n as i32 - 1).max(1.0);
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { det } else { 0.0 };
                    prop_assert!(
                        (product.get(i, j) - want).abs() <= 1e-12 * scale,
                        "entry ({i},{j}) off by {}", (product.get(i, j) - want).abs()
                    );
                }
            }
        }
    }

    /// Hadamard-type bound |det A| <= |cof A|^{n/(n-1)} with constant one
    /// in spectral norm.
    #[test]
    fn determinant_bounded_by_cofactor_norm(
        a2 in smallmat_strategy(2),
        a3 in smallmat_strategy(3),
    ) {
        for a in [a2, a3] {
            let n = a.n() as f64;
            let bound = a.cofactor().spectral_norm().powf(n / (n - 1.0));
            prop_assert!(a.det().abs() <= bound * (1.0 + 1e-12));
        }
    }

    /// Determinants are multiplicative.
    #[test]
    fn determinant_is_multiplicative(
        a in smallmat_strategy(3),
        b in smallmat_strategy(3),
    ) {
        let lhs = a.mul(&b).det();
        let rhs = a.det() * b.det();
        let scale = a.frobenius().powi(3) * b.frobenius().powi(3);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0));
    }
}

proptest! {
    /// Cell index and coordinate views agree on every cell of every shape.
    #[test]
    fn grid_indexing_round_trips(
        nx in 4usize..12,
        ny in 4usize..12,
        topology in prop::sample::select(vec![Topology::Torus, Topology::Box]),
    ) {
        let grid = Grid::new(&[nx, ny], 0.25, topology).unwrap();
        for idx in 0..grid.ncells() {
            let coords = grid.coords_of(idx);
            prop_assert_eq!(grid.index_of(&coords), idx);
        }
    }

    /// Minimal-image displacements never exceed half the period.
    #[test]
    fn torus_displacement_is_minimal(
        n in 4usize..12,
        from in 0usize..100,
        to in 0usize..100,
    ) {
        let grid = Grid::new(&[n, n], 1.0, Topology::Torus).unwrap();
        let from = from % (n * n);
        let to = to % (n * n);
        let d = grid.displacement(from, to);
        for a in 0..2 {
            prop_assert!(2 * d[a].abs() as usize <= n);
        }
    }

    /// Ratio bookkeeping: degenerate exactly when the right side vanishes,
    /// and the stored ratio reproduces lhs/rhs.
    #[test]
    fn inequality_report_ratio_is_consistent(
        lhs in 0.0f64..1e6,
        rhs in 0.0f64..1e6,
    ) {
        let rep = InequalityReport::new("prop", lhs, rhs);
        prop_assert_eq!(rep.degenerate, rhs == 0.0);
        match rep.ratio {
            Some(r) => prop_assert_eq!(r, lhs / rhs),
            None => prop_assert!(rep.degenerate),
        }
    }

    /// Instance streams are reproducible and pairwise independent-looking:
    /// the same (seed, index) pair always yields the same draws, different
    /// indexes differ somewhere early.
    #[test]
    fn instance_rng_streams_are_stable(seed in any::<u64>(), index in 0u64..1000) {
        let mut a = SplitMix64::for_instance(seed, index);
        let mut b = SplitMix64::for_instance(seed, index);
        for _ in 0..16 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SplitMix64::for_instance(seed, index);
        let mut d = SplitMix64::for_instance(seed, index + 1);
        let distinct = (0..16).any(|_| c.next_u64() != d.next_u64());
        prop_assert!(distinct);
    }
}

#[test]
fn stencil_ladder_is_strictly_increasing_with_unit_mass_balls() {
    use maxharm_core::stencil::StencilSet;
    for shape in [vec![16usize, 16], vec![48], vec![12, 12, 12]] {
        let grid = Grid::new(&shape, 1.0 / 16.0, Topology::Torus).unwrap();
        let dom = Arc::new(Domain::full(grid).unwrap());
        let st = StencilSet::build(&dom).unwrap();
        let radii = st.radii();
        for w in radii.windows(2) {
            assert!(w[0] < w[1], "ladder not increasing: {w:?}");
        }
        for k in 0..st.len() {
            let ball = st.ball(k);
            let mass: f64 = ball.weights.iter().sum();
            assert!((mass - 1.0).abs() < 1e-12, "ball {k} mass {mass}");
            let m = st.radii_cells()[k] as i64;
            for off in &ball.offsets {
                let d2: i64 = off.iter().map(|&x| (x as i64) * (x as i64)).sum();
                assert!(d2 <= m * m, "offset {off:?} outside radius {m}");
            }
        }
    }
}
