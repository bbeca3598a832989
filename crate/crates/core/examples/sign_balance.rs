//! With signed `A` the sign of a large `D` is a fair coin, whatever `P{A > 0}`.

use std::sync::Arc;

use perpetuity::asymptotics::{horizon_rule, regime_select, SelectOptions, HORIZON_CAP};
use perpetuity::config::ExperimentConfig;
use perpetuity::montecarlo::{estimate_tail_grid, Event, McOptions, Probe};

fn main() -> perpetuity::Result<()> {
    let cfg = ExperimentConfig::from_json(include_str!("configs/sign_balance.json"))?;
    let law = Arc::new(cfg.law.clone());
    let rc = regime_select(&law, SelectOptions::default())?;
    let n = horizon_rule(&rc, f64::exp(8.0), HORIZON_CAP)?;
    let mut probes = Vec::new();
    for t in [2.0, 4.0, 6.0, 8.0] {
        probes.push(Probe { n, event: Event::AbsAbove(t) });
        probes.push(Probe { n, event: Event::Above(t) });
    }
    let est = estimate_tail_grid(
        &law,
        &probes,
        McOptions { n_paths: 200_000, seed: cfg.seed, workers: 1, d0: cfg.d0 },
    )?;
    println!("P{{A > 0}} = {}, horizon {n}", rc.p_plus);
    for pair in est.chunks(2).zip([2.0, 4.0, 6.0, 8.0]) {
        let (e, t) = pair;
        println!("|X| > {t}: {} states, positive share {:.4}", e[0].n_hits, e[1].n_hits as f64 / e[0].n_hits as f64);
    }
    Ok(())
}
