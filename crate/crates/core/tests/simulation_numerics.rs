use backstep::analysis::{decay_fit, lyapunov_trace};
use backstep::expr::parse;
use backstep::registry::{get_example, list_examples};
use backstep::simulation::{
    euler_step, rk4_step, simulate, simulate_closed_loop, Method, SimConfig, SimError,
};
use backstep::synthesis::{synthesize, GainSet, SystemModel};

fn decay(_: f64, x: &[f64]) -> Result<Vec<f64>, SimError> {
    Ok(x.iter().map(|v| -v).collect())
}

fn global_error(method: Method, dt: f64) -> f64 {
    let steps = (1.0 / dt).round() as usize;
    let mut x = vec![1.0];
    for i in 0..steps {
        let t = i as f64 * dt;
        x = match method {
            Method::Euler => euler_step(decay, &x, t, dt),
            Method::Rk4 => rk4_step(decay, &x, t, dt),
        }
        .unwrap();
    }
    (x[0] - (-1.0f64).exp()).abs()
}

#[test]
fn rk4_is_fourth_order() {
    let ratio = global_error(Method::Rk4, 1e-2) / global_error(Method::Rk4, 5e-3);
    assert!((14.0..=18.0).contains(&ratio), "{ratio}");
}

#[test]
fn euler_is_first_order() {
    let ratio = global_error(Method::Euler, 1e-2) / global_error(Method::Euler, 5e-3);
    assert!((1.9..=2.1).contains(&ratio), "{ratio}");
}

fn model(states: &[(&str, &str)], params: &[(&str, f64)]) -> SystemModel {
    SystemModel {
        name: "m".into(),
        states: states.iter().map(|(s, _)| s.to_string()).collect(),
        dynamics: states.iter().map(|(_, e)| parse(e).unwrap()).collect(),
        control: "u".into(),
        params: params
            .iter()
            .map(|(p, v)| (p.to_string(), Some(*v)))
            .collect(),
    }
}

fn linear2d() -> SystemModel {
    model(&[("x1", "a*x1 + x2"), ("x2", "u")], &[("a", 1.0)])
}

fn config(x0: &[f64], gains: &[f64], tf: f64) -> SimConfig {
    let mut cfg = SimConfig::new(x0.to_vec());
    cfg.tf = tf;
    cfg.gain_values = GainSet::with_values(gains).unwrap().bindings();
    cfg
}

#[test]
fn step_count_contract() {
    let m = linear2d();
    for (t0, tf, dt) in [(0.0, 10.0, 1e-3), (0.5, 1.0, 0.1), (0.0, 1.0, 0.3)] {
        let mut cfg = config(&[1.0, 0.0], &[1.0, 1.0], tf);
        cfg.t0 = t0;
        cfg.dt = dt;
        let traj = simulate(&m, None, &cfg).unwrap();
        let n = ((tf - t0) / dt * (1.0 + 1e-12)).floor() as usize;
        assert_eq!(traj.len(), n + 1);
        assert_eq!(traj.states.len(), n + 1);
        assert_eq!(traj.controls.len(), n + 1);
        for (i, t) in traj.times.iter().enumerate() {
            assert_eq!(*t, t0 + i as f64 * dt);
        }
    }
}

#[test]
fn runs_are_bit_identical() {
    let m = linear2d();
    let r = synthesize(&m, &GainSet::symbolic(2)).unwrap();
    let cfg = config(&[1.0, 1.0], &[2.0, 3.0], 2.0);
    let a = simulate_closed_loop(&m, &r, &cfg).unwrap();
    let b = simulate_closed_loop(&m, &r, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn linear2d_converges() {
    let m = linear2d();
    let r = synthesize(&m, &GainSet::symbolic(2)).unwrap();
    let traj = simulate_closed_loop(&m, &r, &config(&[1.0, 1.0], &[2.0, 3.0], 10.0)).unwrap();
    let end = traj.final_state().unwrap();
    assert!(end.iter().all(|v| v.abs() < 1e-3), "{end:?}");
}

#[test]
fn origin_is_an_equilibrium_of_every_example() {
    for id in list_examples() {
        let ex = get_example(id).unwrap();
        let r = synthesize(&ex.model, &ex.gains).unwrap();
        let mut cfg = ex.sim.clone();
        cfg.x0 = vec![0.0; ex.model.n()];
        cfg.tf = 1.0;
        let traj = simulate_closed_loop(&ex.model, &r, &cfg).unwrap();
        assert!(traj.states.iter().flatten().all(|v| *v == 0.0), "{id}");
        assert!(traj.controls.iter().all(|u| *u == 0.0), "{id}");
        assert_eq!(decay_fit(&traj, 2.0).unwrap(), 0.0);
    }
}

#[test]
fn open_loop_van_der_pol_reaches_its_limit_cycle() {
    let ex = get_example("vanderpol").unwrap();
    let mut cfg = ex.sim.clone();
    cfg.x0 = vec![0.1, 0.0];
    cfg.tf = 20.0;
    let traj = simulate(&ex.model, None, &cfg).unwrap();
    let end = traj.final_state().unwrap();
    assert!(
        end.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.5,
        "{end:?}"
    );
}

#[test]
fn blow_up_is_reported_with_its_time() {
    // x1' = x1^2 from x1 = 1 escapes at t = 1
    let m = model(&[("x1", "x1^2 + x2"), ("x2", "u")], &[]);
    let mut cfg = SimConfig::new(vec![1.0, 0.0]);
    cfg.tf = 2.0;
    match simulate(&m, None, &cfg) {
        Err(SimError::Diverged { t }) => assert!((0.99..=1.01).contains(&t), "{t}"),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn last_coordinate_decays_exponentially() {
    for id in list_examples() {
        let ex = get_example(id).unwrap();
        let r = synthesize(&ex.model, &ex.gains).unwrap();
        let traj = simulate_closed_loop(&ex.model, &r, &ex.sim).unwrap();
        let k_n = ex.sim.gain_values[r.last_gain()];
        let fit = decay_fit(&traj, k_n).unwrap();
        assert!(fit <= 1e-5, "{id}: {fit}");
    }
}

#[test]
fn euler_decay_fit_is_method_limited() {
    let m = linear2d();
    let r = synthesize(&m, &GainSet::symbolic(2)).unwrap();
    let mut cfg = config(&[1.0, 1.0], &[2.0, 3.0], 5.0);
    cfg.method = Method::Euler;
    cfg.dt = 1e-2;
    let fit = decay_fit(&simulate_closed_loop(&m, &r, &cfg).unwrap(), 3.0).unwrap();
    assert!((1e-4..=1e-1).contains(&fit), "{fit}");
}

#[test]
fn decay_fit_is_scale_invariant() {
    let m = linear2d();
    let r = synthesize(&m, &GainSet::symbolic(2)).unwrap();
    let fit = |x0: &[f64]| {
        let traj = simulate_closed_loop(&m, &r, &config(x0, &[2.0, 3.0], 5.0)).unwrap();
        decay_fit(&traj, 3.0).unwrap()
    };
    let (a, b) = (fit(&[1.0, 1.0]), fit(&[1000.0, 1000.0]));
    assert!((a - b).abs() <= 1e-9 * a.max(1e-12) + 1e-15, "{a} vs {b}");
}

/// Closed form for linear2d with a = 1, k = (2, 3), x0 = (1, 1):
/// z2 = 3 e^{-3t}, z1 = e^{-t} (1 + 3/2 (1 - e^{-2t})).
fn analytic_vc(t: f64) -> f64 {
    let z2 = 3.0 * (-3.0 * t).exp();
    let z1 = (-t).exp() * (1.0 + 1.5 * (1.0 - (-2.0 * t).exp()));
    0.5 * (z1 * z1 + z2 * z2)
}

#[test]
fn lyapunov_checkpoints_match_closed_form() {
    let m = linear2d();
    let r = synthesize(&m, &GainSet::symbolic(2)).unwrap();
    let cfg = config(&[1.0, 1.0], &[2.0, 3.0], 10.0);
    let traj = simulate_closed_loop(&m, &r, &cfg).unwrap();
    let mut bindings = cfg.gain_values.clone();
    bindings.insert("a".into(), 1.0);
    let trace = lyapunov_trace(&r, &m.states, &traj, &bindings).unwrap();
    assert!(trace.nonincreasing);
    assert!(trace.values.windows(2).all(|w| w[1] < w[0]));
    for k in [0, 1000, 2000, 5000, 10000] {
        let t = traj.times[k];
        let want = analytic_vc(t);
        assert!(
            (trace.values[k] - want).abs() <= 1e-9 * want.max(1e-12),
            "t={t}: {} vs {want}",
            trace.values[k]
        );
    }
    assert_eq!(trace.values[0], 5.0);
}

#[test]
fn destabilizing_gain_breaks_monotonicity() {
    let m = linear2d();
    let r = synthesize(&m, &GainSet::symbolic(2)).unwrap();
    let mut cfg = config(&[1.0, 1.0], &[2.0, 3.0], 2.0);
    cfg.gain_values.insert("k2".into(), -1.0);
    let traj = simulate_closed_loop(&m, &r, &cfg).unwrap();
    let mut bindings = cfg.gain_values.clone();
    bindings.insert("a".into(), 1.0);
    let trace = lyapunov_trace(&r, &m.states, &traj, &bindings).unwrap();
    assert!(!trace.nonincreasing);
}

#[test]
fn registry_defaults_agree_with_fine_reference() {
    for id in list_examples() {
        let ex = get_example(id).unwrap();
        let r = synthesize(&ex.model, &ex.gains).unwrap();
        let coarse = simulate_closed_loop(&ex.model, &r, &ex.sim).unwrap();
        let mut fine_cfg = ex.sim.clone();
        fine_cfg.dt = 1e-5;
        let fine = simulate_closed_loop(&ex.model, &r, &fine_cfg).unwrap();
        let (a, b) = (coarse.final_state().unwrap(), fine.final_state().unwrap());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-9, "{id}: {a:?} vs {b:?}");
        }
        assert!(b.iter().all(|v| v.abs() <= 1e-3), "{id}: {b:?}");
    }
}
