mod common;

use common::{hub_path, random_matrix, rng, room, uncertain, uncertain_path_synthesis, x0};
use lure_consensus::graph::Graph;
use lure_consensus::lmi::SectorBounds;
use lure_consensus::simulator::{check_consensus, disagreement, lyapunov_value, simulate, Nonlinearity, SimError};
use lure_consensus::{Graph64, Matrix64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn network_matrix(g: &Graph64, k: &Matrix64, gain: f64) -> Matrix64 {
    let d = room();
    let na = g.n_agents();
    &Matrix64::identity(na).kron(d.a()) + &g.laplacian().kron(&(d.b() * k)).scale(gain)
}

fn to_na(m: &Matrix64) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

/// `exp(M t) x0` by nalgebra's Padé scaling and squaring.
fn exact(m: &Matrix64, x0: &[f64], t: f64) -> Vec<f64> {
    let e = (to_na(m) * t).exp();
    (e * DVector::from_column_slice(x0)).as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn linear_regime_matches_a_dense_kronecker_integrator() {
    let k = uncertain_path_synthesis().k;
    let g = hub_path();
    let gain = 0.9;
    let f = Nonlinearity::static_gain(vec![gain], uncertain()).unwrap();
    let (dt, horizon) = (0.1, 60.0);
    let trace = simulate(&room(), &g, &k, &f, &x0(), dt, horizon).unwrap();

    let m = network_matrix(&g, &k, gain);
    let mut x = x0();
    for (j, row) in trace.states.iter().enumerate() {
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        assert!(max_diff(row, &x) <= 1e-9 * scale, "step {j}: {}", max_diff(row, &x));
        let k1 = m.mul_vec(&x);
        let s: Vec<f64> = x.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = m.mul_vec(&s);
        let s: Vec<f64> = x.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = m.mul_vec(&s);
        let s: Vec<f64> = x.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = m.mul_vec(&s);
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        }
    }
}

#[test]
fn halving_the_step_shrinks_the_error_sixteenfold() {
    let k = uncertain_path_synthesis().k;
    let g = hub_path();
    let f = Nonlinearity::static_gain(vec![1.1, 0.8, 1.2], uncertain()).unwrap();
    let mut m = Matrix64::identity(3).kron(room().a());
    let bk = room().b() * &k;
    let l = g.laplacian();
    for (i, gain) in [1.1, 0.8, 1.2].into_iter().enumerate() {
        for j in 0..3 {
            let coupled = bk.scale(gain * l[(i, j)]);
            let mut block = m.block(2 * i, 2 * j, 2, 2);
            block.axpy(1.0, &coupled);
            m.set_block(2 * i, 2 * j, &block);
        }
    }
    let horizon = 8.0;
    let reference = exact(&m, &x0(), horizon);
    let err = |dt: f64| {
        let trace = simulate(&room(), &g, &k, &f, &x0(), dt, horizon).unwrap();
        max_diff(trace.states.last().unwrap(), &reference)
    };
    let (coarse, fine) = (err(0.2), err(0.1));
    let ratio = coarse / fine;
    assert!(fine > 1e-12, "error {fine} is at rounding level, the ratio would mean nothing");
    assert!((13.0..=19.0).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn recorded_signals_can_be_recomputed() {
    let r = uncertain_path_synthesis();
    let g = hub_path();
    let f = Nonlinearity::saturation(vec![-0.2], vec![0.1]).unwrap();
    let mut trace = simulate(&room(), &g, &r.k, &f, &x0(), 0.1, 100.0).unwrap();
    trace.attach_lyapunov(&r.solution.decision.x).unwrap();
    let lk = g.laplacian().kron(&r.k);
    let projector = &Matrix64::identity(3) - &Matrix64::from_fn(3, 3, |_, _| 1.0 / 3.0);
    let p = projector.kron(&Matrix64::identity(2));
    let v = projector.kron(&r.solution.decision.x.inverse().unwrap());
    let lyapunov = trace.lyapunov.as_ref().unwrap();
    for j in 0..trace.len() {
        let x = &trace.states[j];
        let z = lk.mul_vec(x);
        assert!(max_diff(&z, &trace.z_signals[j]) <= 1e-12 * (1.0 + z.iter().fold(0.0f64, |a, b| a.max(b.abs()))));
        for (zi, ui) in z.iter().zip(&trace.inputs[j]) {
            assert!((zi.clamp(-0.2, 0.1) - ui).abs() <= 1e-12);
        }
        let px = p.mul_vec(x);
        let d = px.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((d - trace.disagreement[j]).abs() <= 1e-12 * (1.0 + d));
        let vx = v.quad_form(x);
        assert!((vx - lyapunov[j]).abs() <= 1e-9 * (1.0 + vx), "step {j}: {vx} vs {}", lyapunov[j]);
    }
    assert!(trace.max_sector_product(&SectorBounds::saturation(1)) <= 0.0);
}

#[test]
fn lyapunov_function_is_positive_off_consensus() {
    let x = uncertain_path_synthesis().solution.decision.x;
    let mut rng = rng(11);
    for _ in 0..100 {
        let state: Vec<f64> = (0..6).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let v = lyapunov_value(&state, 3, &x).unwrap();
        assert!(v > 0.0 && disagreement(&state, 3) > 0.0);
        // adding a common offset to every agent leaves V unchanged
        let c: [f64; 2] = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)];
        let shifted: Vec<f64> = state.iter().enumerate().map(|(i, s)| s + c[i % 2]).collect();
        let w = lyapunov_value(&shifted, 3, &x).unwrap();
        assert!((v - w).abs() <= 1e-9 * v);
    }
    let agreed = [1.5, -0.3, 1.5, -0.3, 1.5, -0.3];
    assert!(lyapunov_value(&agreed, 3, &x).unwrap() <= 1e-12);
}

#[test]
fn static_gains_are_checked_against_the_sector() {
    let k = uncertain_path_synthesis().k;
    let g = Graph::complete(3).unwrap();
    let inside = Nonlinearity::static_gain(vec![0.7, 1.0, 1.2], uncertain()).unwrap();
    let trace = simulate(&room(), &g, &k, &inside, &x0(), 0.1, 300.0).unwrap();
    assert!(check_consensus(&trace, 1e-3).achieved);
    assert!(trace.max_sector_product(&uncertain()) <= 1e-12);

    let outside = Nonlinearity::static_gain(vec![0.7, 1.3, 1.2], uncertain()).unwrap();
    match simulate(&room(), &g, &k, &outside, &x0(), 0.1, 300.0) {
        Err(SimError::SectorViolation { agent, channel, product, .. }) => {
            assert_eq!((agent, channel), (1, 0));
            assert!(product > 0.0);
        }
        other => panic!("expected a sector violation, got {other:?}"),
    }
}

#[test]
fn random_gain_matrices_diverge_or_not_but_never_silently() {
    // without synthesis the closed loop may blow up; that must surface as an error
    let mut rng = rng(3);
    let g = Graph::complete(3).unwrap();
    let f = Nonlinearity::static_gain(vec![1.0], uncertain()).unwrap();
    for _ in 0..10 {
        let k = random_matrix(&mut rng, 1, 2).scale(50.0);
        match simulate(&room(), &g, &k, &f, &x0(), 0.1, 200.0) {
            Ok(trace) => assert!(trace.states.iter().flatten().all(|v| v.is_finite())),
            Err(e) => assert!(matches!(e, SimError::Divergence { .. }), "{e:?}"),
        }
    }
}
