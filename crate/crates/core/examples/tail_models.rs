//! Tail families, integrated tails, class diagnostics and the `H` sandwich.
//!
//! ```text
//! cargo run --release --example tail_models
//! ```

use std::sync::Arc;

use perpetuity::dist::{class_diagnostic, h_tail_bounds, DiagnosticOptions, TailModel};
use perpetuity::law::{CoefficientLaw, Marginal, ScalarLaw};

fn main() -> perpetuity::Result<()> {
    let models = [
        ("RegVarLog(2, 1)", TailModel::reg_var_log(2.0, 1.0)?),
        ("WeibullLog(0.5, 1)", TailModel::weibull_log(0.5, 1.0)?),
        ("FiniteSupport", TailModel::finite_support(vec![(1.0, 0.5), (3.0, 0.5)])?),
    ];
    println!("{:<20} {:>8} {:>12} {:>12}", "model", "x", "tail", "int. tail");
    for (name, m) in &models {
        for x in [2.0, 5.0, 20.0] {
            println!("{name:<20} {x:>8} {:>12.4e} {:>12.4e}", m.tail(x), m.integrated_tail(x)?);
        }
    }

    let xs = [10.0, 30.0, 100.0, 300.0, 1000.0];
    let ys = [1.0, 2.0, 5.0];
    for (name, m) in &models[..2] {
        let d = class_diagnostic(m, &xs, &ys, DiagnosticOptions::default())?;
        println!(
            "{name}: long-tailed {:?}, subexponential {:?}, strong subexponential {:?}",
            d.long_tailed, d.subexponential, d.strong_subexponential
        );
    }

    let a = ScalarLaw::positive(TailModel::reg_var_log(2.0, 1.0)?, -1.0)?;
    let b = ScalarLaw::positive(TailModel::weibull_log(0.5, 1.0)?, 0.0)?;
    let law = Arc::new(CoefficientLaw::independent(a, b)?);
    let (f, g, h) = (law.marginal(Marginal::F), law.marginal(Marginal::G), law.marginal(Marginal::H));
    println!("\n{:>6} {:>12} {:>12} {:>12}", "x", "lower", "H tail", "upper");
    for x in [1.0, 3.0, 6.0, 10.0] {
        let bd = h_tail_bounds(f.as_ref(), g.as_ref(), x, true);
        println!("{x:>6} {:>12.4e} {:>12.4e} {:>12.4e}", bd.lower, h.tail(x), bd.upper);
    }
    Ok(())
}
