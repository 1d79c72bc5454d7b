use levcs_core::constants::K_B;
use levcs_core::dynamics::{
    cavity_derivative, damping_coefficients, initial_state, simulate, thermal_noise_amplitudes, write_trace, Dynamics,
    Environment, InitialCondition, SystemState,
};
use levcs_core::linearized::find_equilibrium;
use levcs_core::rigidbody::{EulerAngles, Orientation};
use levcs_core::Config;
use nalgebra::Vector3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn conservative(c: &mut Config) {
    c.cavity.enabled = false;
    c.tweezer.scattering_force = false;
    c.environment.pressure_mbar = 0.0;
}

#[test]
fn energy_conserved_without_dissipation() {
    let mut c = Config::paper_defaults();
    conservative(&mut c);
    let dynamics = c.dynamics().unwrap();
    let eq = find_equilibrium(dynamics.model()).unwrap();
    let mut s = eq.state();
    s.r += Vector3::new(20e-9, -15e-9, 60e-9);
    s.q = s.q.rotate_body(Vector3::new(0.02, -0.015, 0.3));
    s.l = Vector3::new(0.0, 0.0, 2e4 * dynamics.model().particle.inertia.z);
    let e0 = dynamics.energy(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1_000_000 {
        s = dynamics.step(&s, 1e-8, &mut rng).unwrap();
        if i % 1000 == 0 {
            worst = worst.max((dynamics.energy(&s) - e0).abs());
        }
    }
    worst = worst.max((dynamics.energy(&s) - e0).abs());
    assert!(worst <= 1e-6 * e0.abs(), "relative drift {}", worst / e0.abs());
    assert!((s.q.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn free_asymmetric_top_keeps_first_integrals() {
    let mut c = Config::paper_defaults();
    conservative(&mut c);
    c.tweezer.power_w = 0.0;
    let dynamics = c.dynamics().unwrap();
    let inertia = dynamics.model().particle.inertia;
    let mut s = SystemState::at_rest(Vector3::zeros(), Orientation::from_euler(EulerAngles::new(0.3, 1.1, -0.7)));
    s.l = inertia.component_mul(&Vector3::new(3e4, -5e4, 8e4));
    let l0 = s.l.norm();
    let k0 = 0.5 * s.l.dot(&s.omega_body(&inertia));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1_000_000 {
        s = dynamics.step(&s, 1e-8, &mut rng).unwrap();
    }
    let k1 = 0.5 * s.l.dot(&s.omega_body(&inertia));
    assert!((s.l.norm() / l0 - 1.0).abs() < 1e-8);
    assert!((k1 / k0 - 1.0).abs() < 1e-8);
    assert!((s.q.norm() - 1.0).abs() < 1e-9);
}

#[test]
fn free_particle_reaches_equipartition() {
    let mut c = Config::paper_defaults();
    c.cavity.enabled = false;
    c.tweezer.scattering_force = false;
    c.tweezer.power_w = 0.0;
    c.environment.pressure_mbar = 100.0;
    let dynamics = c.dynamics().unwrap();
    let p = &dynamics.model().particle;
    let kt = K_B * 300.0;
    let mut s = SystemState::at_rest(Vector3::zeros(), Orientation::identity());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100_000 {
        s = dynamics.step(&s, 1e-8, &mut rng).unwrap();
    }
    let mut sum = [0.0; 6];
    let n = 2_000_000;
    for _ in 0..n {
        s = dynamics.step(&s, 1e-8, &mut rng).unwrap();
        for i in 0..3 {
            sum[i] += s.p[i] * s.p[i] / p.mass;
            sum[3 + i] += s.l[i] * s.l[i] / p.inertia[i];
        }
    }
    for (i, v) in sum.iter().enumerate() {
        let t = v / n as f64 / kt;
        assert!((t - 1.0).abs() < 0.05, "axis {i}: ⟨p²⟩/(m k_B T) = {t}");
    }
}

#[test]
fn noise_strength_is_linear_in_temperature() {
    let env = |t: f64| Environment {
        pressure_mbar: 2.5,
        temperature: t,
        ..Default::default()
    };
    let inertia = Vector3::new(1e-32, 1.2e-32, 0.8e-32);
    let s1 = thermal_noise_amplitudes(&env(300.0), 1e-17, &inertia).unwrap();
    let s2 = thermal_noise_amplitudes(&env(600.0), 1e-17, &inertia).unwrap();
    let g = damping_coefficients(&env(300.0)).unwrap();
    for i in 0..6 {
        assert!((s2[i] / s1[i] - 2.0).abs() < 1e-12);
    }
    assert!((s1[0] - 2.0 * 1e-17 * g[0] * K_B * 300.0).abs() < 1e-12 * s1[0]);
    assert!((s1[3] - 2.0 * 1e-32 * g[3] * K_B * 300.0).abs() < 1e-12 * s1[3]);
    let vacuum = Environment {
        pressure_mbar: 0.0,
        ..env(300.0)
    };
    let zero = thermal_noise_amplitudes(&vacuum, 1e-17, &inertia).unwrap();
    assert!(zero.iter().all(|v| *v == 0.0));
}

#[test]
fn negative_pressure_rejected() {
    let env = Environment {
        pressure_mbar: -1.0,
        ..Default::default()
    };
    assert!(damping_coefficients(&env).is_err());
}

#[test]
fn empty_cavity_decays_exponentially() {
    let mut c = Config::paper_defaults();
    c.particle.eps_r = 1.0;
    c.environment.pressure_mbar = 0.0;
    let dynamics = c.dynamics().unwrap();
    let cav = dynamics.model().setup.cavity;
    let a0 = Complex64::new(300.0, -120.0);
    let mut s = SystemState::at_rest(Vector3::zeros(), Orientation::identity());
    s.a = a0;
    s.b = a0 * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dt = 1e-8;
    let n = 500;
    for _ in 0..n {
        s = dynamics.step(&s, dt, &mut rng).unwrap();
    }
    let t = n as f64 * dt;
    let expected = a0 * (Complex64::new(-cav.kappa, cav.detuning) * t).exp();
    assert!((s.a - expected).norm() < 1e-7 * expected.norm(), "{} vs {}", s.a, expected);
    assert!((s.b - expected * 0.5).norm() < 1e-7 * expected.norm());
}

#[test]
fn steady_cavity_is_a_fixed_point() {
    let c = Config::paper_defaults();
    let model = c.model().unwrap();
    let eq = find_equilibrium(&model).unwrap();
    for (dr, dphi) in [
        (Vector3::zeros(), Vector3::zeros()),
        (Vector3::new(40e-9, -25e-9, 80e-9), Vector3::new(0.05, -0.03, 0.6)),
        (Vector3::new(-70e-9, 60e-9, -30e-9), Vector3::new(-0.1, 0.02, 1.4)),
    ] {
        let r = eq.r + dr;
        let q = eq.q.rotate_body(dphi);
        let (a, b) = model.steady_cavity(&r, &q);
        let mut s = SystemState::at_rest(r, q);
        s.a = a;
        s.b = b;
        let d = cavity_derivative(&model, &s);
        let scale = model.setup.cavity.kappa * (a.norm() + b.norm());
        assert!(d[0].norm() < 1e-12 * scale && d[1].norm() < 1e-12 * scale);

        // relaxing the cavity equations with the particle held fixed
        let mut x = SystemState { a: Complex64::new(0.0, 0.0), b: Complex64::new(0.0, 0.0), ..s };
        let h = 2e-9;
        for _ in 0..20_000 {
            let f = |y: &SystemState| cavity_derivative(&model, y);
            let k1 = f(&x);
            let y2 = SystemState { a: x.a + k1[0] * (h / 2.0), b: x.b + k1[1] * (h / 2.0), ..x };
            let k2 = f(&y2);
            let y3 = SystemState { a: x.a + k2[0] * (h / 2.0), b: x.b + k2[1] * (h / 2.0), ..x };
            let k3 = f(&y3);
            let y4 = SystemState { a: x.a + k3[0] * h, b: x.b + k3[1] * h, ..x };
            let k4 = f(&y4);
            x.a += (k1[0] + k2[0] * 2.0 + k3[0] * 2.0 + k4[0]) * (h / 6.0);
            x.b += (k1[1] + k2[1] * 2.0 + k3[1] * 2.0 + k4[1]) * (h / 6.0);
        }
        assert!((x.a - a).norm() < 1e-6 * (a.norm() + b.norm()));
        assert!((x.b - b).norm() < 1e-6 * (a.norm() + b.norm()));
    }
}

#[test]
fn same_seed_gives_identical_bytes() {
    let mut c = Config::paper_defaults();
    c.simulation.duration = 2e-4;
    c.simulation.seed = 99;
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.csv");
    let p2 = dir.path().join("b.csv");
    write_trace(&simulate(&c).unwrap(), &p1).unwrap();
    write_trace(&simulate(&c).unwrap(), &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    c.simulation.seed = 100;
    let p3 = dir.path().join("c.csv");
    write_trace(&simulate(&c).unwrap(), &p3).unwrap();
    assert_ne!(std::fs::read(&p1).unwrap(), std::fs::read(&p3).unwrap());
}

#[test]
fn zero_duration_gives_empty_trace() {
    let mut c = Config::paper_defaults();
    c.simulation.duration = 0.0;
    let trace = simulate(&c).unwrap();
    assert!(trace.is_empty());
    assert_eq!(trace.fs, c.simulation.fs);
}

#[test]
fn rest_start_sits_at_equilibrium() {
    let c = Config::paper_defaults();
    let dynamics = c.dynamics().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = initial_state(&dynamics, InitialCondition::Rest, &mut rng).unwrap();
    let eq = find_equilibrium(dynamics.model()).unwrap();
    assert_eq!(s.r, eq.r);
    assert_eq!(s.p, Vector3::zeros());
    assert!((s.a - eq.a).norm() == 0.0);
}

#[test]
fn divergence_is_reported() {
    let c = Config::paper_defaults();
    let dynamics: Dynamics = c.dynamics().unwrap();
    let mut s = SystemState::at_rest(Vector3::zeros(), Orientation::identity());
    s.t = 1.5e-3;
    s.p = Vector3::new(f64::NAN, 0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    match dynamics.step(&s, 1e-8, &mut rng) {
        Err(levcs_core::Error::IntegrationDiverged { last_good_t }) => assert_eq!(last_good_t, 1.5e-3),
        other => panic!("expected divergence, got {other:?}"),
    }
}
