use std::sync::Arc;

use topochaos::coupling::{
    reference_registry, run_trials, z_marginal_exactness_check, CoupledParams, CoupledSimulator, CoupledState,
    ReferenceModel, ReferenceSpec, TrialSetup,
};
use topochaos::kinetic::PhaseGrid;
use topochaos::particle::{DensitySpec, HistogramSpec, InitialLaw, InitialLawSpec, VelocitySpec};
use topochaos::rng::stream_rng;
use topochaos::topo::{Configuration, Kernel, Linear, Uniform};

fn law(density: DensitySpec) -> InitialLaw {
    InitialLaw::from_spec(&InitialLawSpec {
        density,
        velocity: VelocitySpec::discrete(&[-0.75, -0.25, 0.25, 0.75], &[]),
    })
    .unwrap()
}

fn model(form: &str, kernel: Arc<dyn Kernel>, density: DensitySpec, horizon: f64) -> Arc<dyn ReferenceModel> {
    reference_registry()
        .build(&ReferenceSpec {
            form: form.into(),
            kernel,
            law: law(density),
            dim: 1,
            horizon,
            grid: PhaseGrid::new(128, 4, 1.0).unwrap(),
            dt: 1.0 / 32.0,
            solution: None,
        })
        .unwrap()
}

#[test]
fn coupled_z_of_two_uniform_particles_reaches_consensus_at_rate_two() {
    let m = model("homogeneous", Arc::new(Uniform), DensitySpec::named("uniform"), 0.5);
    let mut sim = CoupledSimulator::new(Arc::new(Uniform), m.as_ref(), 2).unwrap();
    let params = CoupledParams::new(Arc::new(Uniform), 0.5);
    let initial = Configuration::line(&[0.2, 0.7], &[-0.25, 0.75]).unwrap();
    let runs = 20_000u64;
    let mut apart = 0usize;
    for r in 0..runs {
        let run = sim.run(&params, &initial, &mut stream_rng(8, r)).unwrap();
        let z = &run.final_state.z;
        apart += usize::from(z.velocity(0) != z.velocity(1));
        assert_eq!(run.diagnostics.z_only, 0);
    }
    let p = apart as f64 / runs as f64;
    let expected = (-1.0f64).exp();
    assert!((p - expected).abs() <= 4.0 * (expected * (1.0 - expected) / runs as f64).sqrt(), "{p}");
}

#[test]
fn z_marginal_matches_standalone_process() {
    let m = model("kinetic", Arc::new(Linear), DensitySpec::cosine(0.5), 1.0);
    let setup = TrialSetup {
        law: law(DensitySpec::cosine(0.5)),
        dim: 1,
        n: 32,
        params: CoupledParams::new(Arc::new(Linear), 1.0),
    };
    let report = z_marginal_exactness_check(&setup, m.as_ref(), 1500, 99, &[0.5, 1.0], 0.01).unwrap();
    assert!(report.counts_consistent);
    assert!(report.passed(), "{report:?}");
}

#[test]
fn d_n_starts_at_zero_and_never_decreases() {
    let m = model("kinetic", Arc::new(Linear), DensitySpec::cosine(0.5), 1.0);
    let mut params = CoupledParams::new(Arc::new(Linear), 1.0);
    params.record_times = (0..=8).map(|k| k as f64 / 8.0).collect();
    params.histogram = Some(HistogramSpec::new(8, 4, 1.0).unwrap());
    let setup = TrialSetup {
        law: law(DensitySpec::cosine(0.5)),
        dim: 1,
        n: 48,
        params,
    };
    for r in run_trials(&setup, m.as_ref(), 40, 5).unwrap() {
        assert_eq!(r.records[0].d_n, 0.0);
        assert!(r.records.windows(2).all(|w| w[1].d_n >= w[0].d_n));
        assert!(r.records.iter().all(|rec| (0.0..=1.0).contains(&rec.d_n)));
        assert!(r.records.iter().all(|rec| rec.tv_estimate.is_some()));
        assert_eq!(r.diagnostics.joint + r.diagnostics.z_only, r.diagnostics.events);
    }
}

#[test]
fn trials_are_independent_of_worker_count() {
    let m = model("kinetic", Arc::new(Linear), DensitySpec::cosine(0.5), 1.0);
    let setup = TrialSetup {
        law: law(DensitySpec::cosine(0.5)),
        dim: 1,
        n: 40,
        params: CoupledParams::new(Arc::new(Linear), 1.0),
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_trials(&setup, m.as_ref(), 16, 123).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.trial, y.trial);
        let dx: Vec<f64> = x.records.iter().map(|r| r.d_n).collect();
        let dy: Vec<f64> = y.records.iter().map(|r| r.d_n).collect();
        assert_eq!(dx, dy);
        assert_eq!(x.diagnostics.events, y.diagnostics.events);
    }
}

#[test]
fn decoupling_is_absorbing_along_events() {
    let m = model("kinetic", Arc::new(Linear), DensitySpec::cosine(0.5), 1.0);
    let mut sim = CoupledSimulator::new(Arc::new(Linear), m.as_ref(), 32).unwrap();
    let mut rng = stream_rng(17, 0);
    let initial = topochaos::particle::sample_initial_with(&law(DensitySpec::cosine(0.5)), 32, 1, &mut rng).unwrap();
    let mut state = CoupledState::delta(initial);
    let mut prev = state.coupled.clone();
    while state.t < 0.9 {
        let dt = 0.9 / 400.0;
        state.z.advance(dt);
        state.sigma.advance(dt);
        state.t += dt;
        sim.event(&mut state, &mut rng).unwrap();
        state.check_flags().unwrap();
        for (before, after) in prev.iter().zip(&state.coupled) {
            assert!(*before || !*after);
        }
        prev = state.coupled.clone();
    }
}
