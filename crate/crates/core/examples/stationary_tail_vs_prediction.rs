//! Quasi-stationary Monte Carlo tail against the leading-order prediction.

use std::sync::Arc;

use perpetuity::asymptotics::{prediction_at_log, regime_select, SelectOptions};
use perpetuity::config::ExperimentConfig;
use perpetuity::montecarlo::{estimate_stationary_tail, McOptions};

fn main() -> perpetuity::Result<()> {
    let cfg = ExperimentConfig::from_json(include_str!("configs/regvar.json"))?;
    let law = Arc::new(cfg.law.clone());
    let rc = regime_select(&law, SelectOptions::default())?;
    let xs: Vec<f64> = cfg.x_grid.iter().map(|l| l.x).collect();
    let opts = McOptions {
        n_paths: 200_000,
        seed: cfg.seed,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        d0: cfg.d0,
    };
    let est = estimate_stationary_tail(&law, &rc, &xs, opts)?;
    println!("{:>6} {:>6} {:>11} {:>11} {:>7}", "log x", "n", "MC", "predicted", "ratio");
    for (lv, e) in cfg.x_grid.iter().zip(&est) {
        let p = prediction_at_log(&rc, None, lv.log_x, false)?.value;
        println!("{:>6} {:>6} {:>11.4e} {:>11.4e} {:>7.3}", lv.log_x, e.horizon_n, e.p_hat, p, e.p_hat / p);
    }
    Ok(())
}
