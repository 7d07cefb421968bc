use lsreinit::basis::{gauss_legendre, Matrix, ReferenceElement};
use lsreinit::field::smoothed_sign;
use lsreinit::fvsubcell::{build_ls_operators, fv_gradients, StencilKind, SubcellTopology};
use lsreinit::hamiltonian::godunov;
use lsreinit::harness::{eoc, weighted_norms};
use lsreinit::ldg::{br1_gradient, ldg_gradients};
use lsreinit::mesh::Mesh;
use lsreinit::regularization::blend_factor;
use lsreinit::timeint::{rk3_step, Integrator, Scheme, Solver, TimeConfig};
use lsreinit::{Discretization, LevelSetField};
use proptest::prelude::*;

fn nodal(disc: &Discretization, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    disc.metrics.iter().flat_map(|m| m.nodes.iter().map(|n| f(n.position)).collect::<Vec<_>>()).collect()
}

fn perturbed(cells: usize, amplitude: f64, seed: u64) -> Mesh {
    Mesh::perturbed(&[0.0, 0.0], &[1.0, 1.0], &[cells, cells], amplitude, seed).unwrap()
}

fn is_identity(m: &Matrix, tol: f64) -> bool {
    m.max_abs_diff(&Matrix::identity(m.n)) < tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_is_exact_to_degree_2n_plus_1(n in 0usize..10, coeffs in prop::collection::vec(-1.0f64..1.0, 22)) {
        let (x, w) = gauss_legendre(n + 1);
        let deg = 2 * n + 1;
        let poly = |t: f64| (0..=deg).map(|k| coeffs[k] * t.powi(k as i32)).sum::<f64>();
        let exact: f64 = (0..=deg).step_by(2).map(|k| 2.0 * coeffs[k] / (k as f64 + 1.0)).sum();
        let quad: f64 = x.iter().zip(&w).map(|(x, w)| w * poly(*x)).sum();
        prop_assert!((quad - exact).abs() < 1e-12, "{quad} vs {exact}");
    }

    #[test]
    fn transform_pairs_are_identities(n in 0usize..10) {
        let r = ReferenceElement::new(n).unwrap();
        prop_assert!(is_identity(&r.vandermonde.mul(&r.vandermonde_inv), 1e-11));
        prop_assert!(is_identity(&r.projection.mul(&r.reconstruction), 1e-11));
        prop_assert!(is_identity(&r.reconstruction.mul(&r.projection), 1e-11));
    }

    #[test]
    fn subcell_means_conserve_the_element_mean(n in 0usize..7, dim in 2usize..4, seed in 0u64..1000) {
        let r = ReferenceElement::new(n).unwrap();
        let npe = r.nodes_per_element(dim);
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let values: Vec<f64> = (0..npe)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect();
        let mut means = vec![0.0; npe];
        r.project_tensor(dim, &values, &mut means);
        let n1 = r.n1();
        let quad: f64 = (0..npe)
            .map(|k| {
                let mut w = 1.0;
                let mut rem = k;
                for _ in 0..dim {
                    w *= r.weights[rem % n1];
                    rem /= n1;
                }
                w * values[k]
            })
            .sum::<f64>()
            / 2f64.powi(dim as i32);
        let sub: f64 = means.iter().sum::<f64>() / npe as f64;
        prop_assert!((quad - sub).abs() < 1e-12);
        let mut back = vec![0.0; npe];
        r.reconstruct_tensor(dim, &means, &mut back);
        for (a, b) in back.iter().zip(&values) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn godunov_fixed_point_on_unit_gradients(theta in 0.0f64..std::f64::consts::TAU, z in -1.0f64..1.0, s in -1.0f64..1.0) {
        let rxy = (1.0 - z * z).sqrt();
        let g = [rxy * theta.cos(), rxy * theta.sin(), z];
        prop_assert!(godunov(g, g, s).abs() < 1e-14);
    }

    #[test]
    fn godunov_is_sign_covariant(p in prop::array::uniform3(-3.0f64..3.0), q in prop::array::uniform3(-3.0f64..3.0), s in 0.01f64..1.0) {
        // Flipping the field flips the sign and swaps the roles of the one-sided gradients.
        let neg = |v: [f64; 3]| [-v[0], -v[1], -v[2]];
        prop_assert!((godunov(p, q, s) + godunov(neg(p), neg(q), -s)).abs() < 1e-12);
        prop_assert!(godunov(p, q, 0.0) == 0.0);
    }

    #[test]
    fn br1_is_the_mean_of_the_one_sided_lifts(n in 1usize..5, amplitude in 0.0f64..0.2, seed in 0u64..1000) {
        let disc = Discretization::new(perturbed(3, amplitude, seed), n).unwrap();
        let values = nodal(&disc, |p| (3.0 * p[0]).sin() + p[1] * p[1] * p[0]);
        let g = ldg_gradients(&disc, &values, None);
        let c = br1_gradient(&disc, &values, None);
        for i in 0..values.len() {
            for m in 0..2 {
                prop_assert!((c[i][m] - 0.5 * (g.p[i][m] + g.q[i][m])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rk3_matches_its_stability_polynomial(z in -2.5f64..0.5) {
        let mut u = vec![1.0];
        rk3_step(&mut u, 1.0, |s| vec![z * s[0]]);
        prop_assert!((u[0] - (1.0 + z + z * z / 2.0 + z * z * z / 6.0)).abs() < 1e-13);
    }

    #[test]
    fn blend_factor_endpoints_and_midpoint(lo in -12.0f64..-1.0, width in 0.1f64..5.0) {
        let hi = lo + width;
        prop_assert_eq!(blend_factor(lo, lo, hi), 0.0);
        prop_assert_eq!(blend_factor(hi, lo, hi), 1.0);
        prop_assert!((blend_factor(0.5 * (lo + hi), lo, hi) - 0.5).abs() < 1e-12);
        prop_assert_eq!(blend_factor(lo - 1.0, lo, hi), 0.0);
        prop_assert_eq!(blend_factor(hi + 1.0, lo, hi), 1.0);
    }

    #[test]
    fn smoothed_sign_is_bounded_and_sign_preserving(phi in -1e6f64..1e6, eps in 1e-3f64..100.0, l in 1e-3f64..1.0) {
        let s = smoothed_sign(phi, eps, l);
        prop_assert!(s.abs() < 1.0);
        prop_assert_eq!(s.partial_cmp(&0.0), phi.partial_cmp(&0.0));
    }

    #[test]
    fn normalized_norms_are_ordered(samples in prop::collection::vec((0.01f64..1.0, -5.0f64..5.0), 1..50)) {
        let n = weighted_norms(samples).unwrap();
        prop_assert!(n.l1 <= n.l2 * (1.0 + 1e-12));
        prop_assert!(n.l2 <= n.linf * (1.0 + 1e-12));
    }

    #[test]
    fn eoc_recovers_power_laws(order in 0.5f64..8.0, h in 0.01f64..1.0, ratio in 1.2f64..4.0) {
        let (hc, hf) = (h * ratio, h);
        prop_assert!((eoc(hc.powf(order), hf.powf(order), hc, hf) - order).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn least_squares_differences_are_exact_for_linear_fields(
        n in 0usize..4, amplitude in 0.0f64..0.2, seed in 0u64..1000, a in -2.0f64..2.0, b in -2.0f64..2.0,
    ) {
        let disc = Discretization::new(perturbed(3, amplitude, seed), n).unwrap();
        let topo = SubcellTopology::build(&disc);
        let ops = build_ls_operators(&disc, &topo).unwrap();
        let means: Vec<f64> = topo.barycenters.iter().map(|p| 0.3 + a * p[0] + b * p[1]).collect();
        let g = fv_gradients(&topo, &ops, &means, None);
        for c in 0..topo.num_cells() {
            if (0..4).any(|s| topo.link(c, s).is_none()) {
                continue;
            }
            for (i, exact) in [a, b].into_iter().enumerate() {
                for (down, grad) in [(false, g.p[c]), (true, g.q[c])] {
                    // Rank-deficient stencils only recover the resolved part of the gradient.
                    if matches!(ops.row(c, i, down).kind, StencilKind::LeastSquares | StencilKind::DirectDifference) {
                        prop_assert!((grad[i] - exact).abs() < 1e-9, "{:?}", grad);
                    }
                }
            }
        }
    }

    #[test]
    fn cutoff_bounds_hold_during_reinitialization(cutoff in 0.05f64..0.4, steps in 1usize..6, rk3 in any::<bool>()) {
        let disc = Discretization::new(Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[6, 6]).unwrap(), 2).unwrap();
        let solver = Solver::new(disc).unwrap();
        let disc = &solver.disc;
        let mut field = LevelSetField::init_analytic(disc, |p| 3.0 * (p[0] - 0.45) + (p[1] - 0.5).powi(2)).unwrap();
        field.apply_cutoff(disc, cutoff).unwrap();
        let once = field.values().to_vec();
        field.apply_cutoff(disc, cutoff).unwrap();
        prop_assert_eq!(&once, &field.values().to_vec());
        field.freeze_sign(disc, 20.0, disc.l_ref).unwrap();
        let cfg = TimeConfig {
            cfl: 0.5,
            integrator: if rk3 { Integrator::Rk3 } else { Integrator::Euler },
            tolerance: 1e-300,
            stall_limit: usize::MAX,
            max_iterations: steps,
            degree_scaling: true,
        };
        let mut ok = true;
        solver
            .reinitialize(&mut field, Scheme::Ldg, &cfg, |s| {
                ok &= s.field.values().iter().all(|v| v.abs() <= cutoff);
                for e in 0..s.field.num_elements() {
                    if !s.field.active()[e] {
                        ok &= s.field.element(e).iter().all(|v| v.abs() >= cutoff);
                    }
                }
            })
            .unwrap();
        prop_assert!(ok);
    }
}

#[test]
fn godunov_hand_value() {
    assert!((godunov([0.5, 0.0, 0.0], [1.5, 0.0, 0.0], 0.8) - 0.4).abs() < 1e-15);
}
