//! Large values of `D_n` come from one big coefficient followed by a
//! law-of-large-numbers descent. Auto-tunes `(c, ε)` and sweeps `c`.

use perpetuity::config::ExperimentConfig;
use perpetuity::montecarlo::{auto_tune, conditional_big_jump_sweep, McOptions, C_GRID};

fn main() -> perpetuity::Result<()> {
    let cfg = ExperimentConfig::from_json(include_str!("configs/bigjump.json"))?;
    let a = cfg.law.drift().value;
    let n = cfg.n_grid[0];
    let tune = auto_tune(&cfg.law, n, a, 20_000, cfg.seed)?;
    println!(
        "tuned c = {}, eps = {}, window rate {:.3}, minorant rate {:.3}",
        tune.params.c, tune.params.epsilon, tune.window_rate, tune.minorant_rate
    );
    let start = C_GRID.iter().position(|&c| c == tune.params.c).unwrap_or(0);
    let cs = &C_GRID[start..(start + 4).min(C_GRID.len())];
    let opts = McOptions { n_paths: 300_000, seed: cfg.seed, workers: 1, d0: cfg.d0 };
    let sweep = conditional_big_jump_sweep(&cfg.law, n, cfg.x_grid[0].log_x, cs, tune.params.epsilon, a, opts)?;
    println!("P{{D_{n} > x}} = {:.4e} from {} paths", sweep[0].tail.p_hat, opts.n_paths);
    for e in &sweep {
        println!(
            "c = {:>5}: P{{one big jump | D_n > x}} = {:.4} [{:.4}, {:.4}], overlaps {}",
            e.params.c, e.conditional.p_hat, e.conditional.ci95.0, e.conditional.ci95.1, e.overlaps
        );
    }
    Ok(())
}
