use proptest::prelude::*;
use topochaos::topo::{
    alpha, kernel_from_spec, rank, riemann_error, transition_probs, transition_probs_direct, Configuration, Kernel,
    KernelSpec, RankTable,
};

fn kernels() -> Vec<std::sync::Arc<dyn Kernel>> {
    [
        KernelSpec::named("uniform"),
        KernelSpec::named("linear"),
        KernelSpec::named("truncated_linear").with_parameter("epsilon", 0.7),
        KernelSpec {
            table: vec![[0.0, 3.0], [0.2, 1.0], [1.0, 0.25]],
            ..KernelSpec::named("tabulated")
        },
    ]
    .iter()
    .map(|s| kernel_from_spec(s).unwrap())
    .collect()
}

fn config_strategy(dim: usize) -> impl Strategy<Value = Configuration> {
    (3usize..40).prop_flat_map(move |n| {
        prop::collection::vec(0.0f64..1.0, n * dim)
            .prop_map(move |pos| Configuration::new(dim, pos, vec![0.0; n * dim]).unwrap())
    })
}

fn wrap(x: f64) -> f64 {
    x - x.floor()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ranks_form_a_bijection(config in config_strategy(1), focal_seed in 0usize..1000) {
        let n = config.len();
        let focal = focal_seed % n;
        let table = RankTable::build(&config, focal).unwrap();
        let mut seen: Vec<usize> = (0..n).filter(|&j| j != focal).map(|j| table.rank_of(j)).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (1..n).collect::<Vec<_>>());
        for r in 1..n {
            prop_assert_eq!(table.rank_of(table.particle_at(r)), r);
        }
        let j = (focal + 1) % n;
        prop_assert_eq!(rank(&config, focal, j).unwrap(), table.rank_of(j));
    }

    #[test]
    fn rows_are_normalized_in_both_forms(config in config_strategy(2), k in 0usize..4, focal_seed in 0usize..1000) {
        let kernel = &kernels()[k];
        let focal = focal_seed % config.len();
        let p = transition_probs(&config, kernel.as_ref(), focal).unwrap();
        let q = transition_probs_direct(&config, kernel.as_ref(), focal).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(p[focal], 0.0);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!(*a >= 0.0);
        }
    }

    #[test]
    fn translation_preserves_ranks_and_rates(config in config_strategy(2), shift in prop::array::uniform2(0.0f64..1.0)) {
        let n = config.len();
        let moved: Vec<f64> = config
            .positions()
            .chunks(2)
            .flat_map(|p| [wrap(p[0] + shift[0]), wrap(p[1] + shift[1])])
            .collect();
        let moved = Configuration::new(2, moved, config.velocities().to_vec()).unwrap();
        let kernel = &kernels()[1];
        for focal in 0..n {
            let a = RankTable::build(&config, focal).unwrap();
            let b = RankTable::build(&moved, focal).unwrap();
            prop_assert_eq!(a.ranks(), b.ranks());
            prop_assert_eq!(
                transition_probs(&config, kernel.as_ref(), focal).unwrap(),
                transition_probs(&moved, kernel.as_ref(), focal).unwrap()
            );
        }
    }

    #[test]
    fn alpha_inverts_the_riemann_sum(k in 0usize..4, n in 3usize..5000) {
        let kernel = &kernels()[k];
        let e = riemann_error(kernel.as_ref(), n).unwrap();
        let a = alpha(kernel.as_ref(), n).unwrap();
        prop_assert!((a * (n - 1) as f64 * (1.0 - e) - 1.0).abs() <= 1e-12);
        prop_assert!(e.abs() <= kernel.lipschitz() / (n - 1) as f64 + 1e-15);
    }
}

#[test]
fn linear_riemann_error_is_exact() {
    let kernel = &kernels()[1];
    for n in 3..=4096 {
        let e = riemann_error(kernel.as_ref(), n).unwrap();
        assert!((e - 1.0 / (n - 1) as f64).abs() <= 1e-12, "n = {n}: {e}");
    }
}
