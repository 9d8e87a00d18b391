use gasket_core::approximation::{partition_of_unity, piecewise_harmonic_approx};
use gasket_core::chainmetric::{epsilon_net, net_covers};
use gasket_core::diagnostics::concentration_profile;
use gasket_core::forms::{cell_energy_measure, leibniz_residual, vertex_energy_measure};
use gasket_core::measure::CellMeasure;
use gasket_core::model::GasketModel;
use gasket_core::scaling::{phi_eval, ScaleFunction, ScalingProfile};
use gasket_core::stochastic::build_walk;
use gasket_core::GasketSpec;
use proptest::prelude::*;
use std::sync::OnceLock;

fn model() -> &'static GasketModel {
    static M: OnceLock<GasketModel> = OnceLock::new();
    M.get_or_init(|| GasketModel::constant(2, 2, 3).unwrap())
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leibniz_and_total_mass(f in values(42), g in values(42)) {
        let m = model();
        prop_assert!(leibniz_residual(&m.form, &f, &g).unwrap() < 1e-10);
        let e = m.form.energy(&f);
        let cells = cell_energy_measure(&m.graph, &m.params, &f).unwrap();
        let vertices = vertex_energy_measure(&m.form, &f).unwrap();
        prop_assert!((cells.total() - e).abs() <= 1e-10 * e.max(1.0));
        prop_assert!((vertices.total() - e).abs() <= 1e-10 * e.max(1.0));
        prop_assert!(e >= -1e-12);
    }

    #[test]
    fn energy_is_invariant_under_constants(f in values(42), c in -5.0f64..5.0) {
        let m = model();
        let shifted: Vec<f64> = f.iter().map(|x| x + c).collect();
        let (a, b) = (m.form.energy(&f), m.form.energy(&shifted));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn psi_is_increasing(levels in prop::collection::vec(2u32..6, 1..6), a in 1e-4f64..2.0, b in 1e-4f64..2.0) {
        let p = ScalingProfile::new(&GasketSpec::new(2, levels).unwrap()).unwrap();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        prop_assert!(p.psi(lo) < p.psi(hi));
        let back = p.psi_inverse(p.psi(lo));
        prop_assert!((back - lo).abs() <= 1e-9 * lo);
    }

    #[test]
    fn phi_monotone(r in 0.01f64..5.0, t in 0.01f64..5.0) {
        let p = ScalingProfile::new(&GasketSpec::new(2, vec![2, 3, 2]).unwrap()).unwrap();
        let base = phi_eval(&p, r, t).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!(phi_eval(&p, 1.5 * r, t).unwrap() >= base - 1e-12);
        prop_assert!(phi_eval(&p, r, 1.5 * t).unwrap() <= base + 1e-12);
    }

    #[test]
    fn reference_measure_profile(tail in 0.001f64..0.999) {
        let m = model();
        let p = concentration_profile(&m.cell_mass, &m.cell_mass, tail).unwrap();
        prop_assert!((p.minimal_mass - (1.0 - tail)).abs() < 1e-12);
        prop_assert!(p.entropy_rate.abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_nonnegative(weights in prop::collection::vec(0.0f64..1.0, 27)) {
        prop_assume!(weights.iter().sum::<f64>() > 1e-6);
        let m = model();
        let gamma = CellMeasure::new(3, weights).unwrap();
        let p = concentration_profile(&gamma, &m.cell_mass, 0.01).unwrap();
        prop_assert!(p.entropy_rate >= 0.0);
        prop_assert!((0.0..=1.0).contains(&p.minimal_mass));
        for w in p.lorenz.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1 - 1e-15);
        }
    }

    #[test]
    fn piecewise_approximation_contract(f in prop::collection::vec(0.0f64..1.0, 42), n in 1u32..6) {
        let m = model();
        let a = piecewise_harmonic_approx(&m.form, &f, n, false).unwrap();
        let h = 0.5f64.powi(n as i32);
        prop_assert!(a.iter().zip(&f).all(|(x, y)| (x - y).abs() <= h + 1e-12));
        let finer = piecewise_harmonic_approx(&m.form, &f, n + 1, false).unwrap();
        prop_assert!(m.form.energy(&a) <= m.form.energy(&finer) + 1e-10);
        prop_assert!(m.form.energy(&finer) <= m.form.energy(&f) + 1e-10);
    }

    #[test]
    fn nets_and_partitions(eps in 0.13f64..1.2) {
        let m = model();
        let s = m.space().unwrap();
        let net = epsilon_net(&s, eps).unwrap();
        prop_assert!(net_covers(&s, &net, eps));
        let family = partition_of_unity(&s, &net, eps).unwrap();
        prop_assert!(family.min_denominator >= 0.5);
        prop_assert!(family.sum_defect() < 1e-12);
        prop_assert!(family.bounds_hold(&s));
    }

    #[test]
    fn walk_is_reversible(theta in 0.0f64..0.9) {
        let m = model();
        let w = build_walk(&m.form, theta).unwrap();
        prop_assert!(w.row_sum_residual() < 1e-12);
        prop_assert!(w.detailed_balance_residual() < 1e-12);
        let moved = w.step(w.stationary());
        prop_assert!(moved.iter().zip(w.stationary()).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn entropy_rate_grows_along_refinement() {
    let profiles = gasket_core::suite::singularity_sweep(&GasketSpec::constant(2, 2, 5).unwrap(), 1..=5, 0.01).unwrap();
    for w in profiles.windows(2) {
        assert!(w[1].entropy_rate >= w[0].entropy_rate - 1e-12);
        assert!(w[1].entropy_rate > 0.0);
    }
}
