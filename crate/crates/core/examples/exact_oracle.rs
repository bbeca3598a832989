//! Exact law of `D_n` for finitely supported coefficients, checked against
//! Monte Carlo at the midpoints of the support.

use perpetuity::law::{CoefficientLaw, DiscreteLaw};
use perpetuity::montecarlo::{estimate_tail_grid, Event, McOptions, Probe};
use perpetuity::oracle::exact_distribution;

fn main() -> perpetuity::Result<()> {
    let dl = DiscreteLaw::product(&[(0.0, 0.5), (2.0, 0.5)], &[(1.0, 1.0)])?;
    for n in 1..=3 {
        let d = exact_distribution(&dl, n, 1.0)?;
        println!("n = {n}: {:?}", d.support);
    }

    let dl = DiscreteLaw::new(vec![((0.5, 1.0), 0.3), ((1.5, -0.5), 0.2), ((-0.7, 2.0), 0.5)])?;
    let law = CoefficientLaw::discrete(dl.clone())?;
    let d = exact_distribution(&dl, 6, 0.0)?;
    println!("\nn = 6: {} support points, mass {}", d.support.len(), d.total_mass());
    let mids: Vec<f64> = d.midpoints().into_iter().step_by(40).collect();
    let probes: Vec<Probe> = mids.iter().map(|&m| Probe { n: 6, event: Event::d_above(m) }).collect();
    let est = estimate_tail_grid(&law, &probes, McOptions { n_paths: 200_000, ..Default::default() })?;
    for (m, e) in mids.iter().zip(&est) {
        let exact = d.tail(*m);
        println!("x = {m:>8.4}: exact {exact:.5}, MC {:.5}, z = {:+.2}", e.p_hat, (e.p_hat - exact) / e.stderr);
    }
    Ok(())
}
