mod common;

use common::{random_matrix, rng, room, uncertain};
use lure_consensus::dynamics::AgentDynamics;
use lure_consensus::graph::{cycle_eigenvalue, Graph};
use lure_consensus::linalg::{eigenvalues, symmetric_eigen};
use lure_consensus::lmi::{riccati_residual, undirected_block, CycleVariant, Decision};
use lure_consensus::synthesis::{gain_from_solution, synthesize, Assumption, SynthesisError, SynthesisOptions, Theorem};
use lure_consensus::Matrix64;
use num_complex::Complex;
use rand::Rng;

/// Rightmost real part of `A + δλBK` over the given gains, via the real
/// `2n` embedding of the complex matrix.
fn rightmost_mode(d: &AgentDynamics<f64>, k: &Matrix64, lambda: Complex<f64>, gains: &[f64]) -> f64 {
    let bk = d.b() * k;
    let n = d.n();
    gains
        .iter()
        .map(|&g| {
            let re = d.a() + &bk.scale(g * lambda.re);
            let im = bk.scale(g * lambda.im);
            let mut m = Matrix64::zeros(2 * n, 2 * n);
            m.set_block(0, 0, &re);
            m.set_block(n, n, &re);
            m.set_block(0, n, &im.scale(-1.0));
            m.set_block(n, 0, &im);
            eigenvalues(&m).unwrap().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn every_path_eigenvalue_satisfies_the_quadratic_form() {
    let g = Graph::path(5).unwrap();
    let s = uncertain();
    let r = synthesize(&room(), &g, &s, 0.1, &SynthesisOptions::default()).unwrap();
    let nonzero = g.spectrum().unwrap().real_nonzero().unwrap();
    assert_eq!(r.eigenvalue_checks.len(), 4);
    for (check, lambda) in r.eigenvalue_checks.iter().zip(&nonzero) {
        assert!((check.lambda - lambda).abs() <= 1e-12);
        assert!(check.residual < 0.0, "λ = {lambda}: {}", check.residual);
        // the block at λ is negative definite iff its Schur complement is
        let block = undirected_block(&room(), &s, *lambda, 0.1, &r.solution.decision);
        let top = symmetric_eigen(&block).unwrap().values.last().copied().unwrap();
        assert!(top < 0.0, "λ = {lambda}: block {top}");
    }
    // the form is convex in λ, so the interior never beats the ends
    let ends = r.eigenvalue_checks[0].residual.max(r.eigenvalue_checks[3].residual);
    for mid in 0..=20 {
        let lambda = nonzero[0] + (nonzero[3] - nonzero[0]) * mid as f64 / 20.0;
        let res = riccati_residual(&room(), &s, lambda, 0.1, &r.solution.decision).unwrap();
        assert!(res <= ends + 1e-12, "λ = {lambda}: {res} > {ends}");
    }
}

#[test]
fn synthesized_gain_stabilizes_every_mode_at_the_decay_rate() {
    let eps = 0.1;
    let gains = [0.7, 0.8, 0.95, 1.1, 1.2];
    let g = Graph::path(5).unwrap();
    let r = synthesize(&room(), &g, &uncertain(), eps, &SynthesisOptions::default()).unwrap();
    for lambda in g.spectrum().unwrap().real_nonzero().unwrap() {
        let right = rightmost_mode(&room(), &r.k, Complex::new(lambda, 0.0), &gains);
        assert!(right <= -eps / 2.0, "λ = {lambda}: {right}");
    }

    let n = 5;
    let opts = SynthesisOptions { cycle_variant: CycleVariant::Derived, ..Default::default() };
    let r = synthesize(&room(), &Graph::directed_cycle(n).unwrap(), &uncertain(), eps, &opts).unwrap();
    assert_eq!(r.theorem, Theorem::DirectedCycle);
    for i in 2..=n {
        let right = rightmost_mode(&room(), &r.k, cycle_eigenvalue(n, i), &gains);
        assert!(right <= -eps / 2.0, "i = {i}: {right}");
    }
}

#[test]
fn gain_recovery_round_trips() {
    let mut rng = rng(7);
    for trial in 0..50 {
        let n = rng.gen_range(1..6);
        let m = rng.gen_range(1..4);
        let r = random_matrix(&mut rng, n, n);
        let x = (&(&r * &r.transpose()) + &Matrix64::identity(n).scale(0.1)).symmetric_part();
        let y = random_matrix(&mut rng, m, n).scale(10.0);
        let k = gain_from_solution(&Decision::new(x.clone(), y.clone(), vec![1.0; m]).unwrap()).unwrap();
        let back = &(&k * &x) - &y;
        assert!(back.max_abs() <= 1e-10 * y.max_abs().max(1.0), "trial {trial}: {}", back.max_abs());
    }
}

#[test]
fn ill_conditioned_x_is_refused() {
    let x = Matrix64::diag(&[1.0, 1e-13]);
    let err = gain_from_solution(&Decision::new(x, Matrix64::zeros(1, 2), vec![1.0]).unwrap()).unwrap_err();
    assert!(matches!(err, SynthesisError::IllConditioned { condition } if condition > 1e12));
}

#[test]
fn balanced_digraphs_other_than_plain_cycles_are_unsupported() {
    // a directed triangle plus an undirected pendant edge: balanced, strongly
    // connected, neither symmetric nor a cycle
    let mixed = Matrix64::from_rows(&[
        [0.0, 0.0, 1.0, 1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]);
    let g = Graph::from_weights(mixed, true).unwrap();
    assert!(g.is_balanced() && g.has_spanning_tree());
    let err = synthesize(&room(), &g, &uncertain(), 0.1, &SynthesisOptions::default()).unwrap_err();
    assert!(matches!(err, SynthesisError::UnsupportedTopology(_)), "{err:?}");

    let weighted = Graph::from_weights(Graph::<f64>::directed_cycle(4).unwrap().weights().scale(2.0), true).unwrap();
    assert!(weighted.is_balanced());
    let err = synthesize(&room(), &weighted, &uncertain(), 0.1, &SynthesisOptions::default()).unwrap_err();
    assert!(matches!(err, SynthesisError::UnsupportedTopology(_)), "{err:?}");
}

#[test]
fn unstable_open_loop_is_refused() {
    // a / (s (T s − 1)): the second pole sits at +1/T
    let d = AgentDynamics::new(Matrix64::from_rows(&[[0.0, 1.0], [0.0, 0.02]]), Matrix64::from_rows(&[[0.0], [0.2]])).unwrap();
    let err = synthesize(&d, &Graph::complete(3).unwrap(), &uncertain(), 0.1, &SynthesisOptions::default()).unwrap_err();
    match err {
        SynthesisError::AssumptionViolated { assumption, detail } => {
            assert_eq!(assumption, Assumption::A2);
            assert!(detail.contains("0.02"), "{detail}");
        }
        other => panic!("unexpected {other:?}"),
    }
}
