//! Path traces.
//!
//! Binary layout, all little endian:
//!
//! ```text
//! seed: u64 | n: u64 | x0: f64 | n × (A: f64, B: f64, X: f64)
//! ```
//!
//! `X` is the signed-log state after the step. Coefficients whose magnitude
//! exceeds the float range are written as `±inf`; replaying such a trace
//! reproduces the stored states only up to that step.

use std::io::{Read, Write};

use crate::chain::{decode, PathRecord};
use crate::error::{Error, Result};
use crate::law::Coef;

pub fn write_binary<W: Write>(path: &PathRecord, mut w: W) -> Result<()> {
    w.write_all(&path.seed.to_le_bytes())?;
    w.write_all(&(path.n as u64).to_le_bytes())?;
    w.write_all(&path.states[0].to_le_bytes())?;
    for (k, (a, b)) in path.coeffs.iter().enumerate() {
        for v in [a.value, b.value, path.states[k + 1]] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Reads a trace; the states are taken from the file, not replayed.
pub fn read_binary<R: Read>(mut r: R) -> Result<PathRecord> {
    let seed = read_u64(&mut r)?;
    let n = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::Io("trace length overflows".into()))?;
    let mut states = Vec::with_capacity(n + 1);
    states.push(read_f64(&mut r)?);
    let mut coeffs = Vec::with_capacity(n);
    for _ in 0..n {
        let a = read_f64(&mut r)?;
        let b = read_f64(&mut r)?;
        coeffs.push((Coef::new(a), Coef::new(b)));
        states.push(read_f64(&mut r)?);
    }
    Ok(PathRecord {
        seed,
        n,
        states,
        coeffs,
    })
}

/// CSV with columns `k, A, B, X, D`; step 0 has no coefficients.
pub fn write_csv<W: Write>(path: &PathRecord, mut w: W) -> Result<()> {
    writeln!(w, "# schema=v1")?;
    writeln!(w, "# seed={}", path.seed)?;
    let mut csv = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    csv.write_record(["k", "A", "B", "X", "D"]).map_err(io)?;
    let x0 = path.states[0];
    csv.write_record(["0", "NA", "NA", &x0.to_string(), &decode(x0).to_string()])
        .map_err(io)?;
    for (k, (a, b)) in path.coeffs.iter().enumerate() {
        let x = path.states[k + 1];
        csv.write_record([
            (k + 1).to_string(),
            a.value.to_string(),
            b.value.to_string(),
            x.to_string(),
            decode(x).to_string(),
        ])
        .map_err(io)?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::simulate_path;
    use crate::law::CoefficientLaw;

    #[test]
    fn binary_round_trip() {
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let p = simulate_path(&law, 7, 2.0, 99).unwrap();
        let mut buf = Vec::new();
        write_binary(&p, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 7 * 24);
        let q = read_binary(buf.as_slice()).unwrap();
        assert_eq!(q.seed, 99);
        assert_eq!(q.states, p.states);
        assert_eq!(q.replay(), p.states);
    }

    #[test]
    fn truncated_trace_is_an_error() {
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let p = simulate_path(&law, 3, 0.0, 1).unwrap();
        let mut buf = Vec::new();
        write_binary(&p, &mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(read_binary(buf.as_slice()), Err(Error::Io(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let law = CoefficientLaw::constant(0.5, 1.0).unwrap();
        let p = simulate_path(&law, 2, 0.0, 5).unwrap();
        let mut buf = Vec::new();
        write_csv(&p, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# schema=v1");
        assert_eq!(lines[1], "# seed=5");
        assert_eq!(lines[2], "k,A,B,X,D");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("2,0.5,1,"));
    }
}
