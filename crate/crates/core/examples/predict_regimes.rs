//! Regime selection and tail predictions for one law per regime.

use std::sync::Arc;

use perpetuity::asymptotics::{
    crossover_threshold, prediction_at_log, regime_select, SelectOptions, SignProb,
};
use perpetuity::config::ExperimentConfig;
use perpetuity::montecarlo::{estimate_sign_prob, McOptions};

fn main() -> perpetuity::Result<()> {
    for name in ["regvar.json", "atom_at_zero.json", "sign_balance.json", "signed_b_dependent.json"] {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs").join(name);
        let cfg = ExperimentConfig::load(&path)?;
        let law = Arc::new(cfg.law.clone());
        let mut rc = match regime_select(&law, SelectOptions::default()) {
            Ok(rc) => rc,
            Err(e) => {
                println!("{name}: rejected ({e})\n");
                continue;
            }
        };
        if rc.prob_dinf_positive == SignProb::NeedsMc {
            let s = estimate_sign_prob(&law, &rc, McOptions::default())?;
            rc.prob_dinf_positive = SignProb::Estimated {
                value: s.positive.p_hat,
                lo: s.positive.ci95.0,
                hi: s.positive.ci95.1,
            };
        }
        println!("{name}: {:?}, a = {}", rc.regime, rc.a);
        for h in &rc.hypotheses {
            println!("  {}: {}", h.name, h.status);
        }
        for l in [6.0, 10.0] {
            let s = prediction_at_log(&rc, None, l, false)?;
            let f = prediction_at_log(&rc, Some(20), l, false)?;
            println!("  log x = {l}: stationary {:.4e}, n = 20 {:.4e}", s.value, f.value);
        }
        if rc.a.is_finite() {
            println!("  n for 99% of the stationary tail at log x = 10: {}", crossover_threshold(&rc, 10.0, 0.99)?);
        }
        println!();
    }
    Ok(())
}
