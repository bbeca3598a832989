use std::sync::Arc;

use perpetuity::asymptotics::{regime_select, SelectOptions};
use perpetuity::chain::{backward_sample, encode, jump_sample};
use perpetuity::dist::{h_tail_bounds, TailModel};
use perpetuity::law::{CoefficientLaw, DiscreteLaw, Marginal, ScalarLaw};
use perpetuity::montecarlo::{
    conditional_big_jump_sweep, estimate_stationary_tail, estimate_tail_grid,
    sample_terminal_states, Event, McOptions, Probe,
};
use perpetuity::oracle::exact_distribution;
use perpetuity::stats::{aux_rng, ks_critical, ks_two_sample, path_rng};

fn regvar_law() -> CoefficientLaw {
    let a = ScalarLaw::positive(TailModel::reg_var_log(2.0, 1.0).unwrap(), -3.0).unwrap();
    let b = ScalarLaw::positive(TailModel::reg_var_log(3.0, 1.0).unwrap(), -3.0).unwrap();
    CoefficientLaw::independent(a, b).unwrap()
}

fn opts(n_paths: u64, seed: u64, d0: f64) -> McOptions {
    McOptions {
        n_paths,
        seed,
        workers: 1,
        d0,
    }
}

#[test]
fn empirical_h_tail_lies_in_the_sandwich() {
    let a = ScalarLaw::positive(TailModel::reg_var_log(2.0, 1.0).unwrap(), -1.0).unwrap();
    let b = ScalarLaw::positive(TailModel::weibull_log(0.5, 1.0).unwrap(), 0.0).unwrap();
    let law = Arc::new(CoefficientLaw::independent(a, b).unwrap());
    let (f, g) = (law.marginal(Marginal::F), law.marginal(Marginal::G));
    const N: usize = 1_000_000;
    let mut rng = aux_rng(21, 0);
    let mut h: Vec<f64> = (0..N)
        .map(|_| {
            let (a, b) = law.sample(&mut rng);
            (a.value + b.value).ln_1p()
        })
        .collect();
    h.sort_by(f64::total_cmp);
    for i in 0..=20 {
        let x = 0.5 + 0.5 * i as f64;
        let p = (N - h.partition_point(|&v| v <= x)) as f64 / N as f64;
        let sigma = (p * (1.0 - p) / N as f64).sqrt().max(1.0 / N as f64);
        let bd = h_tail_bounds(f.as_ref(), g.as_ref(), x, true);
        assert!(p >= bd.lower - 4.0 * sigma, "x={x}: {p} below {}", bd.lower);
        assert!(p <= bd.upper + 4.0 * sigma, "x={x}: {p} above {}", bd.upper);
    }
}

#[test]
fn forward_and_backward_sums_agree_in_law() {
    let law = regvar_law();
    const N: usize = 100_000;
    for n in [1u64, 5, 30] {
        let mut fwd = sample_terminal_states(&law, n, opts(N as u64, 4, 1.0)).unwrap();
        let mut rng = aux_rng(4, 10 + n);
        let mut bwd: Vec<f64> = (0..N).map(|_| backward_sample(&law, n as usize, 1.0, &mut rng)).collect();
        let d = ks_two_sample(&mut fwd, &mut bwd);
        assert!(d < ks_critical(0.01, N, N), "n={n}: KS {d}");
    }
}

#[test]
fn jump_law_approaches_log_a() {
    let a = ScalarLaw::positive(TailModel::weibull_log(1.0, 1.0).unwrap(), -1.5).unwrap();
    let b = ScalarLaw::positive(TailModel::reg_var_log(3.0, 1.0).unwrap(), 0.0).unwrap();
    let law = CoefficientLaw::independent(a, b).unwrap();
    const N: usize = 100_000;
    let mut rng = aux_rng(9, 0);
    let log_a: Vec<f64> = (0..N).map(|_| law.sample(&mut rng).0.ln_abs).collect();
    let noise = ks_critical(0.01, N, N);
    let mut prev = f64::INFINITY;
    for (i, x) in [2.0, 5.0, 10.0, 20.0, 50.0].into_iter().enumerate() {
        let mut rng = aux_rng(9, 1 + i as u64);
        let mut xi: Vec<f64> = (0..N).map(|_| jump_sample(&law, x, &mut rng).unwrap()).collect();
        let d = ks_two_sample(&mut xi, &mut log_a.clone());
        assert!(d <= prev + noise, "x={x}: KS {d} after {prev}");
        prev = d;
        if x == 50.0 {
            assert!(d < 0.01, "KS at 50: {d}");
        }
    }
}

#[test]
fn monte_carlo_matches_the_oracle_on_small_laws() {
    let laws = [
        DiscreteLaw::product(&[(0.0, 0.5), (2.0, 0.5)], &[(1.0, 1.0)]).unwrap(),
        DiscreteLaw::product(&[(0.7, 1.0)], &[(-1.0, 0.4), (2.0, 0.6)]).unwrap(),
        DiscreteLaw::new(vec![((-0.8, 1.0), 0.5), ((0.6, 0.5), 0.5)]).unwrap(),
    ];
    const N: u64 = 200_000;
    for (i, dl) in laws.iter().enumerate() {
        let law = CoefficientLaw::discrete(dl.clone()).unwrap();
        let mut probes = Vec::new();
        let mut exact = Vec::new();
        for n in 1..=4u64 {
            let d = exact_distribution(dl, n, 1.0).unwrap();
            for m in d.midpoints() {
                probes.push(Probe {
                    n,
                    event: Event::d_above(m),
                });
                exact.push(d.tail(m));
            }
        }
        let est = estimate_tail_grid(&law, &probes, opts(N, 30 + i as u64, 1.0)).unwrap();
        for ((e, p), probe) in est.iter().zip(&exact).zip(&probes) {
            assert!((e.p_hat - p).abs() <= 4.0 * e.stderr, "law {i} {probe:?}: {} vs {p}", e.p_hat);
        }
    }
}

#[test]
fn stationary_estimate_decreases_in_x() {
    let law = Arc::new(regvar_law());
    let cfg = regime_select(&law, SelectOptions::default()).unwrap();
    let xs: Vec<f64> = (1..=6).map(|l| f64::exp(l as f64)).collect();
    let est = estimate_stationary_tail(&law, &cfg, &xs, opts(50_000, 6, 1.0)).unwrap();
    for w in est.windows(2) {
        assert!(w[1].p_hat <= w[0].p_hat + 4.0 * (w[0].stderr + w[1].stderr));
        assert!(w[1].horizon_n >= w[0].horizon_n);
    }
}

#[test]
fn conditional_sample_is_the_tail_counter() {
    let a = ScalarLaw::constant((-1.0f64).exp()).unwrap();
    let b = ScalarLaw::positive(TailModel::reg_var_log(2.0, 1.0).unwrap(), 0.0).unwrap();
    let law = CoefficientLaw::independent(a, b).unwrap();
    let o = opts(50_000, 12, 1.0);
    let sweep = conditional_big_jump_sweep(&law, 10, 4.0, &[1.5, 2.0, 3.0], 0.1, 1.0, o).unwrap();
    let direct = estimate_tail_grid(
        &law,
        &[Probe {
            n: 10,
            event: Event::d_above_log(4.0),
        }],
        o,
    )
    .unwrap();
    for e in &sweep {
        assert_eq!(e.tail.n_hits, direct[0].n_hits);
        assert_eq!(e.conditional.n_samples, direct[0].n_hits);
        assert!(e.conditional.n_hits <= e.conditional.n_samples);
    }
}

#[test]
fn paths_replay_identically() {
    let law = regvar_law();
    let x0 = encode(1.0);
    for idx in [0u64, 7, 4095, 4096] {
        let p = perpetuity::chain::simulate_path_indexed(&law, 25, 1.0, 3, idx).unwrap();
        assert_eq!(p.replay(), p.states);
        assert_eq!(perpetuity::chain::terminal_state(&law, 25, x0, 3, idx), p.states[25]);
        let mut rng = path_rng(3, idx);
        let (a, _) = law.sample(&mut rng);
        assert_eq!(a, p.coeffs[0].0);
    }
}
