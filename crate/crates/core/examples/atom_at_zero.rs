//! When `A` can vanish the finite-`n` tail is the stationary one times
//! `1 − (1−p0)^n`.

use std::sync::Arc;

use perpetuity::asymptotics::{crossover_ratio_at_log, prediction_at_log, regime_select, SelectOptions};
use perpetuity::config::ExperimentConfig;
use perpetuity::montecarlo::{estimate_tail_grid, Event, McOptions, Probe};

fn main() -> perpetuity::Result<()> {
    let cfg = ExperimentConfig::from_json(include_str!("configs/atom_at_zero.json"))?;
    let law = Arc::new(cfg.law.clone());
    let rc = regime_select(&law, SelectOptions::default())?;
    let log_x = 8.0;
    let probes: Vec<Probe> = cfg
        .n_grid
        .iter()
        .map(|&n| Probe { n, event: Event::d_above_log(log_x) })
        .collect();
    let est = estimate_tail_grid(
        &law,
        &probes,
        McOptions { n_paths: 1_000_000, seed: cfg.seed, workers: 1, d0: cfg.d0 },
    )?;
    for (&n, e) in cfg.n_grid.iter().zip(&est) {
        let p = prediction_at_log(&rc, Some(n), log_x, false)?.value;
        println!(
            "n = {n}: MC {:.4e} [{:.4e}, {:.4e}], predicted {p:.4e}, factor {:.4}",
            e.p_hat,
            e.ci95.0,
            e.ci95.1,
            crossover_ratio_at_log(&rc, n, log_x)?
        );
    }
    Ok(())
}
