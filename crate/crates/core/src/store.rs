//! On-disk storage of posterior draws and their CSV summaries.
//!
//! `draws.bin` holds an 8-byte magic, a little-endian `u64` header length,
//! a JSON header and then the columns as little-endian `f64` in the order
//! listed by the header.

use crate::error::{Error, Result};
use crate::gibbs::{PosteriorDraws, SamplerSettings, SweepTrace};
use crate::panel::fmt_f64;
use crate::priors::{MixtureHyperparams, ModelSpec};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"PTDRAWS1";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Column {
    name: String,
    len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    n_units: usize,
    n_periods: usize,
    n_x: usize,
    n_draws: usize,
    spec: ModelSpec,
    settings: SamplerSettings,
    columns: Vec<Column>,
}

fn columns(d: &PosteriorDraws) -> Vec<(&'static str, &[f64])> {
    vec![
        ("rho", &d.rho),
        ("beta", &d.beta),
        ("lambda", &d.lambda),
        ("sigma2", &d.sigma2),
        ("y_star_last", &d.y_star_last),
        ("xi", &d.xi),
        ("trace_rho", &d.trace.rho),
        ("trace_log_lik", &d.trace.log_lik),
        ("trace_accept_rate", &d.trace.accept_rate),
    ]
}

pub fn write_draws<W: Write>(draws: &PosteriorDraws, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let cols = columns(draws);
    let header = Header {
        n_units: draws.n_units,
        n_periods: draws.n_periods,
        n_x: draws.n_x,
        n_draws: draws.n_draws(),
        spec: draws.spec.clone(),
        settings: draws.settings.clone(),
        columns: cols.iter().map(|(n, v)| Column { name: n.to_string(), len: v.len() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, v) in cols {
        for x in v {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_draws<R: Read>(reader: R) -> Result<PosteriorDraws> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Store("not a draws file".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let h: Header = serde_json::from_slice(&json)?;
    let mut read_col = |c: &Column| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; c.len * 8];
        r.read_exact(&mut buf).map_err(|_| Error::Store(format!("column {} is truncated", c.name)))?;
        Ok(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect())
    };
    let mut get = std::collections::HashMap::new();
    for c in &h.columns {
        get.insert(c.name.clone(), read_col(c)?);
    }
    let mut take = |name: &str| get.remove(name).ok_or_else(|| Error::Store(format!("missing column {name}")));
    let d = PosteriorDraws {
        spec: h.spec,
        settings: h.settings,
        n_units: h.n_units,
        n_periods: h.n_periods,
        n_x: h.n_x,
        rho: take("rho")?,
        beta: take("beta")?,
        lambda: take("lambda")?,
        sigma2: take("sigma2")?,
        y_star_last: take("y_star_last")?,
        xi: take("xi")?,
        trace: SweepTrace {
            rho: take("trace_rho")?,
            log_lik: take("trace_log_lik")?,
            accept_rate: take("trace_accept_rate")?,
        },
    };
    let m = h.n_draws;
    let xi_len = MixtureHyperparams::flat_len(&d.spec);
    let ok = d.rho.len() == m
        && d.beta.len() == m * d.n_x
        && d.lambda.len() == m * d.n_units
        && d.sigma2.len() == m * d.n_units
        && d.y_star_last.len() == m * d.n_units
        && d.xi.len() == m * xi_len;
    if !ok {
        return Err(Error::Store("column lengths disagree with the header".into()));
    }
    Ok(d)
}

pub fn save_draws(draws: &PosteriorDraws, path: &Path) -> Result<()> {
    write_draws(draws, std::fs::File::create(path)?)
}

pub fn load_draws(path: &Path) -> Result<PosteriorDraws> {
    read_draws(std::fs::File::open(path)?)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `[mean, sd, q05, q50, q95]`.
pub fn summarize(values: &[f64]) -> [f64; 5] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    [mean, var.sqrt(), quantile(&s, 0.05), quantile(&s, 0.5), quantile(&s, 0.95)]
}

/// Posterior summaries of `rho` and `beta`.
pub fn write_common_summary<W: Write>(draws: &PosteriorDraws, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["parameter", "mean", "sd", "q05", "q50", "q95"])?;
    let mut row = |name: String, v: &[f64]| -> Result<()> {
        let s = summarize(v);
        let mut rec = vec![name];
        rec.extend(s.iter().map(|x| fmt_f64(*x)));
        w.write_record(&rec)?;
        Ok(())
    };
    row("rho".into(), &draws.rho)?;
    for j in 0..draws.n_x {
        let b: Vec<f64> = (0..draws.n_draws()).map(|d| draws.beta_at(d)[j]).collect();
        row(format!("beta{}", j + 1), &b)?;
    }
    w.flush()?;
    Ok(())
}

/// Posterior means and standard deviations of `lambda_i` and `sigma_i^2`.
pub fn write_unit_summary<W: Write>(draws: &PosteriorDraws, unit_ids: &[String], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["unit_id", "lambda_mean", "lambda_sd", "sigma2_mean", "sigma2_sd"])?;
    let m = draws.n_draws();
    for (i, id) in unit_ids.iter().enumerate().take(draws.n_units) {
        let l: Vec<f64> = (0..m).map(|j| draws.lambda_at(j, i)).collect();
        let s: Vec<f64> = (0..m).map(|j| draws.sigma2_at(j, i)).collect();
        let (l, s) = (summarize(&l), summarize(&s));
        w.write_record([id.clone(), fmt_f64(l[0]), fmt_f64(l[1]), fmt_f64(s[0]), fmt_f64(s[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-sweep trace, burn-in included.
pub fn write_trace<W: Write>(trace: &SweepTrace, burn_in: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sweep", "burn_in", "rho", "log_lik", "accept_rate"])?;
    for s in 0..trace.rho.len() {
        w.write_record([
            s.to_string(),
            (s < burn_in).to_string(),
            fmt_f64(trace.rho[s]),
            fmt_f64(trace.log_lik[s]),
            fmt_f64(trace.accept_rate[s]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::Dependence;

    fn toy() -> PosteriorDraws {
        let spec = ModelSpec::named("normal-het", Dependence::Re, 1).unwrap();
        let xi_len = MixtureHyperparams::flat_len(&spec);
        PosteriorDraws {
            spec,
            settings: SamplerSettings { n_draws: 3, burn_in: 1, ..Default::default() },
            n_units: 2,
            n_periods: 4,
            n_x: 1,
            rho: vec![0.1, 0.2, 0.3],
            beta: vec![1.0, 1.5, -0.25],
            lambda: (0..6).map(|v| v as f64 / 7.0).collect(),
            sigma2: vec![1.0; 6],
            y_star_last: vec![-0.5, 2.0, 1e-300, f64::MAX, 0.0, -0.0],
            xi: (0..3 * xi_len).map(|v| v as f64).collect(),
            trace: SweepTrace { rho: vec![0.0; 4], log_lik: vec![-1.0; 4], accept_rate: vec![f64::NAN; 4] },
        }
    }

    #[test]
    fn draws_round_trip_bitwise() {
        let d = toy();
        let mut buf = Vec::new();
        write_draws(&d, &mut buf).unwrap();
        let back = read_draws(buf.as_slice()).unwrap();
        let mut again = Vec::new();
        write_draws(&back, &mut again).unwrap();
        assert_eq!(buf, again);
        assert_eq!(back.lambda, d.lambda);
        assert_eq!(back.spec, d.spec);
        assert!(read_draws(&buf[..buf.len() - 3]).is_err());
        assert!(read_draws(&b"garbage!........"[..]).is_err());
    }

    #[test]
    fn quantiles() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 0.9), 4.6);
        let r = summarize(&s);
        assert_eq!(r[0], 3.0);
        assert!((r[1] - 2.5f64.sqrt()).abs() < 1e-15);
    }
}
