//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Every Monte Carlo run is repeated with a different worker count at the end
//! and its hit counts compared.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use perpetuity::asymptotics::{
    atom_factor, crossover_ratio_at_log, crossover_threshold, horizon_rule, prediction_at_log,
    regime_select, Regime, RegimeConfig, SelectOptions, HORIZON_CAP,
};
use perpetuity::chain::{
    abs_domination_check, encode, simulate_path_indexed, zeta_drift, MajorantCoupling,
};
use perpetuity::config::ExperimentConfig;
use perpetuity::dist::TailModel;
use perpetuity::law::{estimate_drift, softplus, CoefficientLaw, DiscreteLaw};
use perpetuity::montecarlo::{
    auto_tune, conditional_big_jump_sweep, estimate_tail_grid, sample_terminal_states, Event,
    McOptions, Probe, TailEstimate, C_GRID,
};
use perpetuity::oracle::exact_distribution;

const WORKERS: usize = 1;
const RERUN_WORKERS: usize = 2;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Hit counts of one Monte Carlo run, replayable with another worker count.
struct Run {
    label: String,
    counts: Vec<u64>,
    replay: Box<dyn Fn(usize) -> Vec<u64>>,
}

fn config(name: &str) -> ExperimentConfig {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "examples", "configs", name].iter().collect();
    ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn hits(est: &[TailEstimate]) -> Vec<u64> {
    est.iter().map(|e| e.n_hits).collect()
}

fn select(law: &Arc<CoefficientLaw>) -> RegimeConfig {
    regime_select(law, SelectOptions::default()).expect("regime selection")
}

fn oracle_corpus() -> Vec<(&'static str, DiscreteLaw)> {
    let third = 1.0 / 3.0;
    vec![
        (
            "positive product",
            DiscreteLaw::product(&[(0.5, 0.5), (1.4, 0.5)], &[(1.0, 1.0)]).unwrap(),
        ),
        (
            "positive dependent",
            DiscreteLaw::new(vec![((0.3, 2.0), 0.4), ((1.3, 0.5), 0.6)]).unwrap(),
        ),
        (
            "atom at zero",
            DiscreteLaw::product(&[(0.0, 0.4), (1.3, 0.6)], &[(1.0, 1.0)]).unwrap(),
        ),
        (
            "signed B, two atoms",
            DiscreteLaw::product(&[(0.7, 1.0)], &[(-1.0, 0.4), (2.0, 0.6)]).unwrap(),
        ),
        (
            "signed B, three atoms",
            DiscreteLaw::product(&[(0.6, 1.0)], &[(2.0, third), (-1.0, third), (0.5, third)]).unwrap(),
        ),
        (
            "signed A",
            DiscreteLaw::product(&[(-0.8, 0.5), (0.6, 0.5)], &[(1.0, 1.0)]).unwrap(),
        ),
    ]
}

/// Counts of `X_n > encode(m)` for every midpoint `m`, from sorted terminal states.
fn midpoint_counts(law: &CoefficientLaw, n: u64, mids: &[f64], opts: McOptions) -> Vec<u64> {
    let mut xs = sample_terminal_states(law, n, opts).expect("terminal states");
    xs.sort_by(f64::total_cmp);
    mids.iter()
        .map(|&m| {
            let t = encode(m);
            (xs.len() - xs.partition_point(|&x| x <= t)) as u64
        })
        .collect()
}

fn criterion_1(runs: &mut Vec<Run>) -> Outcome {
    const N: u64 = 1_000_000;
    let mut regimes = Vec::new();
    let (mut points, mut worst, mut fails) = (0usize, 0.0f64, Vec::new());
    for (i, (name, dl)) in oracle_corpus().into_iter().enumerate() {
        let law = Arc::new(CoefficientLaw::discrete(dl.clone()).unwrap());
        regimes.push(select(&law).regime);
        for n in 1..=8u64 {
            let exact = exact_distribution(&dl, n, 0.0).unwrap();
            let mids = exact.midpoints();
            let opts = McOptions {
                n_paths: N,
                seed: 100 + i as u64,
                workers: WORKERS,
                d0: 0.0,
            };
            let counts = midpoint_counts(&law, n, &mids, opts);
            for (&m, &h) in mids.iter().zip(&counts) {
                let est = TailEstimate::from_counts(h, N, opts.seed, n);
                let z = (est.p_hat - exact.tail(m)).abs() / est.stderr;
                points += 1;
                worst = worst.max(z);
                if !(z <= 4.0) {
                    fails.push(format!("{name} n={n} x={m}: z={z:.2}"));
                }
            }
            let (law, mids) = (Arc::clone(&law), mids.clone());
            runs.push(Run {
                label: format!("oracle {name} n={n}"),
                counts,
                replay: Box::new(move |w| midpoint_counts(&law, n, &mids, McOptions { workers: w, ..opts })),
            });
        }
    }
    let all_regimes = [
        Regime::PositivePositive,
        Regime::AtomAtZero,
        Regime::PositiveSignedB,
        Regime::SignedA,
    ]
    .iter()
    .all(|r| regimes.contains(r));
    Outcome {
        pass: fails.is_empty() && all_regimes,
        detail: format!(
            "{} laws, regimes {:?}, {points} points, max |z| = {worst:.2}{}",
            regimes.len(),
            regimes,
            if fails.is_empty() { String::new() } else { format!(", failures: {}", fails.join("; ")) }
        ),
    }
}

/// Criteria 2 and 3 share one pass of `N = 10⁷` paths.
fn criteria_2_3(runs: &mut Vec<Run>) -> (Outcome, Outcome) {
    const N: u64 = 10_000_000;
    let cfg = config("regvar.json");
    let law = cfg.law_arc();
    let rc = select(&law);
    let drift = estimate_drift(&law, 4_000_000, cfg.seed);
    let levels = [6.0, 8.0, 10.0];
    let finite_n = [2u64, 5, 20, 200];
    let mut probes: Vec<Probe> = levels
        .iter()
        .map(|&l| Probe {
            n: horizon_rule(&rc, f64::exp(l), HORIZON_CAP).unwrap(),
            event: Event::d_above_log(l),
        })
        .collect();
    probes.extend(finite_n.iter().map(|&n| Probe {
        n,
        event: Event::d_above_log(8.0),
    }));
    let opts = McOptions {
        n_paths: N,
        seed: cfg.seed,
        workers: WORKERS,
        d0: cfg.d0,
    };
    let est = estimate_tail_grid(&law, &probes, opts).unwrap();
    let ratio = |i: usize, n: Option<u64>, l: f64| {
        est[i].p_hat / prediction_at_log(&rc, n, l, false).unwrap().value
    };
    let stationary: Vec<f64> = levels.iter().enumerate().map(|(i, &l)| ratio(i, None, l)).collect();
    let finite: Vec<f64> = finite_n
        .iter()
        .enumerate()
        .map(|(j, &n)| ratio(levels.len() + j, Some(n), 8.0))
        .collect();
    let in_band = |r: &f64| (0.7..=1.4).contains(r);
    let trend = (stationary[2] - 1.0).abs() < (stationary[0] - 1.0).abs();
    let drift_ok = drift.stderr < 0.01 && (drift.value - rc.a).abs() <= 4.0 * drift.stderr;
    let horizons: Vec<u64> = probes[..3].iter().map(|p| p.n).collect();
    let replay_probes = probes.clone();
    runs.push(Run {
        label: "regvar tail grid".into(),
        counts: hits(&est),
        replay: Box::new(move |w| {
            hits(&estimate_tail_grid(&law, &replay_probes, McOptions { workers: w, ..opts }).unwrap())
        }),
    });
    let c2 = Outcome {
        pass: stationary.iter().all(in_band) && trend && drift_ok && rc.regime == Regime::PositivePositive,
        detail: format!(
            "a = {} (estimate {:.4} ± {:.4}), horizons {horizons:?}, ratios at e^6, e^8, e^10 = {:.4}, {:.4}, {:.4}",
            rc.a, drift.value, drift.stderr, stationary[0], stationary[1], stationary[2]
        ),
    };
    let c3 = Outcome {
        pass: finite.iter().all(in_band),
        detail: format!(
            "x = e^8, ratios at n = 2, 5, 20, 200: {}",
            finite.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
    };
    (c2, c3)
}

fn criterion_4(runs: &mut Vec<Run>) -> Outcome {
    const N: u64 = 10_000_000;
    let cfg = config("atom_at_zero.json");
    let law = cfg.law_arc();
    let rc = select(&law);
    let ns = [1u64, 2, 5];
    let probes: Vec<Probe> = ns
        .iter()
        .map(|&n| Probe {
            n,
            event: Event::d_above_log(8.0),
        })
        .collect();
    let opts = McOptions {
        n_paths: N,
        seed: cfg.seed,
        workers: WORKERS,
        d0: cfg.d0,
    };
    let est = estimate_tail_grid(&law, &probes, opts).unwrap();
    let ratios: Vec<f64> = ns
        .iter()
        .zip(&est)
        .map(|(&n, e)| e.p_hat / prediction_at_log(&rc, Some(n), 8.0, false).unwrap().value)
        .collect();
    let mut factor_gap: f64 = 0.0;
    for n in 1..=60u64 {
        for l in [2.0, 5.0, 8.0, 20.0, 100.0] {
            let r = crossover_ratio_at_log(&rc, n, l).unwrap();
            let identity = 1.0 - (1.0 - rc.p0).powi(n as i32);
            factor_gap = factor_gap.max((r - identity).abs());
            factor_gap = factor_gap.max((atom_factor(rc.p0, n) * rc.p0 - identity).abs());
        }
    }
    let replay_probes = probes.clone();
    runs.push(Run {
        label: "atom at zero".into(),
        counts: hits(&est),
        replay: Box::new(move |w| {
            hits(&estimate_tail_grid(&law, &replay_probes, McOptions { workers: w, ..opts }).unwrap())
        }),
    });
    Outcome {
        pass: rc.regime == Regime::AtomAtZero
            && rc.p0 == 0.5
            && ratios.iter().all(|r| (0.8..=1.25).contains(r))
            && factor_gap <= 1e-12,
        detail: format!(
            "p0 = {}, ratios at n = 1, 2, 5: {}, max factor identity gap {factor_gap:.1e}",
            rc.p0,
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn criterion_5(runs: &mut Vec<Run>) -> Outcome {
    const N: u64 = 1_000_000;
    let cfg = config("sign_balance.json");
    let law = cfg.law_arc();
    let rc = select(&law);
    let n = horizon_rule(&rc, f64::exp(8.0), HORIZON_CAP).unwrap();
    let t = softplus(8.0);
    let probes = [
        Probe { n, event: Event::AbsAbove(8.0) },
        Probe { n, event: Event::Above(8.0) },
        Probe { n, event: Event::AbsAbove(t) },
        Probe { n, event: Event::Above(t) },
    ];
    let opts = McOptions {
        n_paths: N,
        seed: cfg.seed,
        workers: WORKERS,
        d0: cfg.d0,
    };
    let est = estimate_tail_grid(&law, &probes, opts).unwrap();
    let share = est[1].n_hits as f64 / est[0].n_hits as f64;
    let ratio = est[3].n_hits as f64 / est[2].n_hits as f64;
    runs.push(Run {
        label: "sign balance".into(),
        counts: hits(&est),
        replay: Box::new(move |w| {
            hits(&estimate_tail_grid(&law, &probes, McOptions { workers: w, ..opts }).unwrap())
        }),
    });
    Outcome {
        pass: rc.regime == Regime::SignedA
            && (rc.p_plus - 0.7).abs() < 1e-12
            && (share - 0.5).abs() <= 0.03
            && (ratio - 0.5).abs() <= 0.05,
        detail: format!(
            "p+ = {}, n = {n}, positive share among |X| > 8: {share:.4} of {}, P{{D > e^8}}/P{{|D| > e^8}} = {ratio:.4}",
            rc.p_plus, est[0].n_hits
        ),
    }
}

fn criterion_6(runs: &mut Vec<Run>) -> Outcome {
    let cfg = config("bigjump.json");
    let law = cfg.law_arc();
    let a = law.drift().value;
    let n = cfg.n_grid[0];
    let log_x = cfg.x_grid[0].log_x;
    let tune = match auto_tune(&law, n, a, 20_000, cfg.seed) {
        Ok(t) => t,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("auto-tune failed: {e}"),
            }
        }
    };
    let start = C_GRID.iter().position(|&c| c == tune.params.c).expect("grid value");
    let cs: Vec<f64> = C_GRID[start..(start + 3).min(C_GRID.len())].to_vec();
    let opts = McOptions {
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        workers: WORKERS,
        d0: cfg.d0,
    };
    let eps = tune.params.epsilon;
    let n_cs = cs.len();
    let sweep = move |w: usize| {
        conditional_big_jump_sweep(&law, n, log_x, &cs, eps, a, McOptions { workers: w, ..opts })
    };
    let est = match sweep(WORKERS) {
        Ok(e) => e,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("sweep failed: {e}"),
            }
        }
    };
    let flat = |v: &[perpetuity::montecarlo::BigJumpEstimate]| {
        let mut out = vec![v[0].tail.n_hits];
        out.extend(v.iter().map(|e| e.conditional.n_hits));
        out
    };
    let counts = flat(&est);
    let trend = est
        .windows(2)
        .all(|w| w[1].conditional.p_hat >= w[0].conditional.p_hat || w[1].conditional.ci95.1 >= w[0].conditional.ci95.0);
    let sample = est[0].conditional.n_samples;
    let first = est[0].conditional.p_hat;
    let detail = format!(
        "a = {a}, tuned c = {}, eps = {eps:.3}, conditional sample {sample}, estimates {}",
        tune.params.c,
        est.iter()
            .map(|e| format!(
                "c={}: {:.4} [{:.4}, {:.4}]",
                e.params.c, e.conditional.p_hat, e.conditional.ci95.0, e.conditional.ci95.1
            ))
            .collect::<Vec<_>>()
            .join("; ")
    );
    runs.push(Run {
        label: "big jump".into(),
        counts,
        replay: Box::new(move |w| flat(&sweep(w).unwrap())),
    });
    Outcome {
        pass: first >= 0.9 && trend && sample >= 1000 && n_cs == 3,
        detail,
    }
}

fn criterion_7() -> Outcome {
    let regvar = RegimeConfig::manual(
        Regime::PositivePositive,
        1.0,
        0.0,
        Arc::new(TailModel::reg_var_log(2.0, 1.0).unwrap()),
    );
    let ns = [1u64, 2, 5, 10, 20, 50, 100, 200, 500, 1000];
    let ls = [2.0, 3.0, 5.0, 8.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0];
    let mut gap: f64 = 0.0;
    for &n in &ns {
        for &l in &ls {
            let r = crossover_ratio_at_log(&regvar, n, l).unwrap();
            gap = gap.max((r - (1.0 - l / (l + n as f64))).abs());
        }
    }

    let beta = 0.5;
    let weibull = RegimeConfig::manual(
        Regime::PositivePositive,
        1.0,
        0.0,
        Arc::new(TailModel::weibull_log(beta, 1.0).unwrap()),
    );
    let wl = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
    let mut thresholds = Vec::new();
    let mut exact = true;
    for &l in &wl {
        let t = crossover_threshold(&weibull, l, 0.99).unwrap();
        for n in (1..=4 * t).step_by(((t / 50).max(1)) as usize).chain([t - 1, t]) {
            if n == 0 {
                continue;
            }
            let above = crossover_ratio_at_log(&weibull, n, l).unwrap() > 0.99;
            exact &= above == (n >= t);
        }
        thresholds.push(t);
    }
    let ks: Vec<f64> = wl
        .iter()
        .zip(&thresholds)
        .map(|(l, &t)| t as f64 / l.powf(1.0 - beta))
        .collect();
    let monotone = thresholds.windows(2).all(|w| w[0] <= w[1]);
    let sublinear = thresholds.windows(2).zip(wl.windows(2)).all(|(t, l)| {
        (t[1] as f64 / l[1]) < (t[0] as f64 / l[0])
    });
    // n* = K·log^{1−β} x plus lower-order terms: K(L) settles from above
    let settling = ks.windows(2).all(|w| w[1] <= w[0]);
    let m = wl.len();
    let slope = (thresholds[m - 1] as f64 / thresholds[m - 2] as f64).ln() / (wl[m - 1] / wl[m - 2]).ln();
    let k = ks[m - 1];
    Outcome {
        pass: gap <= 1e-9
            && exact
            && monotone
            && sublinear
            && settling
            && (slope - (1.0 - beta)).abs() <= 0.1,
        detail: format!(
            "RegVar max gap {gap:.1e} on {} points; Weibull(0.5) thresholds {thresholds:?} at log x = {wl:?}, \
             K = {k:.2} (K(L) from {:.2}), log-log slope {slope:.3}",
            ns.len() * ls.len(),
            ks[0]
        ),
    }
}

fn criterion_8() -> Outcome {
    const PATHS: u64 = 1000;
    const STEPS: usize = 1000;
    let positive = config("regvar.json").law_arc();
    let x0 = 5.0;
    let drift = zeta_drift(&positive, x0, 1_000_000, 8);
    let mut lindley = 0usize;
    let mut domination = 0usize;
    for i in 0..PATHS {
        let path = simulate_path_indexed(&positive, STEPS, 1.0, 8, i).unwrap();
        lindley += MajorantCoupling::for_path(&path, x0, drift).violations(&path);
        domination += abs_domination_check(&path);
    }
    let signed = [
        config("sign_balance.json").law_arc(),
        Arc::new(CoefficientLaw::discrete(oracle_corpus()[4].1.clone()).unwrap()),
    ];
    for law in &signed {
        for i in 0..PATHS {
            let path = simulate_path_indexed(law, STEPS, 1.0, 8, i).unwrap();
            domination += abs_domination_check(&path);
        }
    }
    Outcome {
        pass: drift.0 < 0.0 && lindley == 0 && domination == 0,
        detail: format!(
            "{PATHS} paths x {STEPS} steps; E zeta({x0}) = {:.4}; Lindley violations {lindley}, |D| domination violations {domination} over 3 laws",
            drift.0
        ),
    }
}

fn criterion_9(runs: &[Run]) -> Outcome {
    let mismatched: Vec<&str> = runs
        .iter()
        .filter(|r| (r.replay)(RERUN_WORKERS) != r.counts)
        .map(|r| r.label.as_str())
        .collect();
    Outcome {
        pass: mismatched.is_empty(),
        detail: format!(
            "{} runs repeated with {RERUN_WORKERS} workers instead of {WORKERS}; mismatched: {mismatched:?}",
            runs.len()
        ),
    }
}

fn report(id: u32, name: &str, started: Instant, o: &Outcome) -> bool {
    println!(
        "{} criterion {id} ({name}) [{:.1}s]: {}",
        if o.pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64(),
        o.detail
    );
    o.pass
}

fn main() -> ExitCode {
    let mut runs = Vec::new();
    let mut ok = true;

    let t = Instant::now();
    ok &= report(1, "oracle equivalence", t, &criterion_1(&mut runs));
    let t = Instant::now();
    let (c2, c3) = criteria_2_3(&mut runs);
    ok &= report(2, "stationary ratio", t, &c2);
    ok &= report(3, "finite-n uniformity", t, &c3);
    let t = Instant::now();
    ok &= report(4, "atom factor", t, &criterion_4(&mut runs));
    let t = Instant::now();
    ok &= report(5, "sign balance", t, &criterion_5(&mut runs));
    let t = Instant::now();
    ok &= report(6, "single big jump", t, &criterion_6(&mut runs));
    let t = Instant::now();
    ok &= report(7, "crossover", t, &criterion_7());
    let t = Instant::now();
    ok &= report(8, "pathwise couplings", t, &criterion_8());
    let t = Instant::now();
    ok &= report(9, "determinism", t, &criterion_9(&runs));

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
