//! Pathwise checks: the Lindley majorant, `|D|` domination and the sign chain
//! of large states.

use perpetuity::chain::{abs_domination_check, coupled_majorant, sign_chain, simulate_path};
use perpetuity::config::ExperimentConfig;

fn main() -> perpetuity::Result<()> {
    let positive = ExperimentConfig::from_json(include_str!("configs/regvar.json"))?;
    let mut lindley = 0;
    let mut peak: f64 = 0.0;
    for seed in 0..200 {
        let (path, coupling) = coupled_majorant(&positive.law, 1000, 5.0, 1.0, seed)?;
        lindley += coupling.violations(&path);
        peak = peak.max(path.states.iter().copied().fold(0.0, f64::max));
    }
    println!("Lindley majorant: {lindley} violations over 200 paths, largest X {peak:.2}");

    let signed = ExperimentConfig::from_json(include_str!("configs/sign_balance.json"))?;
    let path = simulate_path(&signed.law, 200_000, 1.0, 3)?;
    println!("|D| domination violations: {}", abs_domination_check(&path));
    let sc = sign_chain(&path, 8.0)?;
    println!(
        "{} states with |X| > 8, positive share {:.3}, transitions {:?}",
        sc.signs.len(),
        sc.positive_share(),
        sc.transition
    );
    Ok(())
}
