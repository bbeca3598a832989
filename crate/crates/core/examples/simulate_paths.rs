//! One trajectory in the signed-log coordinate, written as CSV and as a
//! binary trace, then read back.

use perpetuity::chain::{simulate_path, step};
use perpetuity::config::ExperimentConfig;
use perpetuity::trace::{read_binary, write_binary, write_csv};

fn main() -> perpetuity::Result<()> {
    // the state survives coefficients far beyond the float range
    let x = step(500.0, 1e300, 1.0)?;
    println!("X after a 1e300 multiplier: {x:.3}");

    let cfg = ExperimentConfig::from_json(include_str!("configs/regvar.json"))?;
    let path = simulate_path(&cfg.law, 12, cfg.d0, cfg.seed)?;
    write_csv(&path, std::io::stdout().lock())?;

    let mut buf = Vec::new();
    write_binary(&path, &mut buf)?;
    let back = read_binary(buf.as_slice())?;
    assert_eq!(back.replay(), path.states);
    println!("binary trace: {} bytes, replay matches", buf.len());
    Ok(())
}
