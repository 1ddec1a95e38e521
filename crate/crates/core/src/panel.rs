//! Panel data, latent outcomes and the dynamic Tobit law of motion.

use crate::distributions::std_normal;
use crate::error::{Error, Result};
use crate::rng::{label, substream};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

/// How regressors are standardised before estimation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeMode {
    /// One mean and variance per regressor, pooled over units and periods.
    #[default]
    Pooled,
    /// A separate mean and variance per regressor and period.
    PerPeriod,
    /// Leave regressors as given.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mode: StandardizeMode,
    /// Indexed `[period_slot * n_x + j]` for per-period mode, `[j]` otherwise.
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Map a coefficient on standardised regressor `j` back to raw units.
    pub fn destandardize_beta(&self, j: usize, beta: f64) -> f64 {
        match self.mode {
            StandardizeMode::Pooled => beta / self.sd[j],
            _ => beta,
        }
    }
}

/// Observed censored panel.
///
/// `y` is stored unit-major with `T + 1` cells per unit covering `t = 0..=T`.
/// `x` is unit-major with `T + 2` rows per unit covering `t = -1..=T`, each
/// row holding `n_x` regressors; `x_{t-1}` enters the period-`t` mean.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelData {
    pub n_units: usize,
    pub n_periods: usize,
    pub n_x: usize,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub unit_ids: Vec<String>,
    pub n_holdout: usize,
    /// `n_units * n_holdout`, periods `T+1..=T+H`.
    pub holdout_y: Option<Vec<f64>>,
    /// `n_units * n_holdout * n_x`, periods `T+1..=T+H`.
    pub holdout_x: Option<Vec<f64>>,
    pub standardization: Option<Standardization>,
}

impl PanelData {
    pub fn new(n_units: usize, n_periods: usize, n_x: usize, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if n_units == 0 || n_periods == 0 {
            return Err(Error::InvalidParameter("panel needs N >= 1 and T >= 1".into()));
        }
        if y.len() != n_units * (n_periods + 1) {
            return Err(Error::Dimension(format!(
                "y has {} cells, expected {}",
                y.len(),
                n_units * (n_periods + 1)
            )));
        }
        if x.len() != n_units * (n_periods + 2) * n_x {
            return Err(Error::Dimension(format!(
                "x has {} cells, expected {}",
                x.len(),
                n_units * (n_periods + 2) * n_x
            )));
        }
        for (k, &v) in y.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "y[{}, {}] = {v} is not a censored outcome",
                    k / (n_periods + 1),
                    k % (n_periods + 1)
                )));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite regressor".into()));
        }
        Ok(Self {
            n_units,
            n_periods,
            n_x,
            y,
            x,
            unit_ids: (0..n_units).map(|i| format!("{}", i + 1)).collect(),
            n_holdout: 0,
            holdout_y: None,
            holdout_x: None,
            standardization: None,
        })
    }

    pub fn without_regressors(n_units: usize, n_periods: usize, y: Vec<f64>) -> Result<Self> {
        Self::new(n_units, n_periods, 0, y, Vec::new())
    }

    #[inline]
    pub fn y(&self, i: usize, t: usize) -> f64 {
        self.y[i * (self.n_periods + 1) + t]
    }

    #[inline]
    pub fn y_row(&self, i: usize) -> &[f64] {
        let w = self.n_periods + 1;
        &self.y[i * w..(i + 1) * w]
    }

    /// Regressor row for period `t` in `-1..=T`.
    #[inline]
    pub fn x_row(&self, i: usize, t: isize) -> &[f64] {
        let k = self.n_x;
        let start = (i * (self.n_periods + 2) + (t + 1) as usize) * k;
        &self.x[start..start + k]
    }

    /// Regressor row for a holdout period `T + s`, `s >= 1`.
    pub fn holdout_x_row(&self, i: usize, s: usize) -> Option<&[f64]> {
        let hx = self.holdout_x.as_ref()?;
        if s == 0 || s > self.n_holdout {
            return None;
        }
        let k = self.n_x;
        let start = (i * self.n_holdout + (s - 1)) * k;
        Some(&hx[start..start + k])
    }

    pub fn holdout(&self, i: usize, s: usize) -> Option<f64> {
        let h = self.holdout_y.as_ref()?;
        if s == 0 || s > self.n_holdout {
            return None;
        }
        Some(h[i * self.n_holdout + s - 1])
    }

    pub fn holdout_column(&self, s: usize) -> Option<Vec<f64>> {
        (0..self.n_units).map(|i| self.holdout(i, s)).collect()
    }

    /// Cross-sectional average of the per-unit sample variances of `y`.
    pub fn v_star(&self) -> f64 {
        let w = self.n_periods + 1;
        let mut total = 0.0;
        for i in 0..self.n_units {
            let row = self.y_row(i);
            let m = row.iter().sum::<f64>() / w as f64;
            let v = row.iter().map(|y| (y - m) * (y - m)).sum::<f64>() / (w - 1) as f64;
            total += v;
        }
        total / self.n_units as f64
    }

    pub fn zero_fraction(&self) -> f64 {
        self.y.iter().filter(|&&v| v == 0.0).count() as f64 / self.y.len() as f64
    }

    pub fn all_zero_fraction(&self) -> f64 {
        (0..self.n_units).filter(|&i| self.y_row(i).iter().all(|&v| v == 0.0)).count() as f64
            / self.n_units as f64
    }

    /// Move the last `h` periods into the holdout block.
    pub fn split_holdout(&self, h: usize) -> Result<PanelData> {
        if h >= self.n_periods {
            return Err(Error::Insufficient(format!("cannot hold out {h} of {} periods", self.n_periods)));
        }
        if self.n_holdout > 0 {
            return Err(Error::InvalidParameter("panel already has a holdout block".into()));
        }
        let t_new = self.n_periods - h;
        let k = self.n_x;
        let mut y = Vec::with_capacity(self.n_units * (t_new + 1));
        let mut x = Vec::with_capacity(self.n_units * (t_new + 2) * k);
        let mut hy = Vec::with_capacity(self.n_units * h);
        let mut hx = Vec::with_capacity(self.n_units * h * k);
        for i in 0..self.n_units {
            let row = self.y_row(i);
            y.extend_from_slice(&row[..=t_new]);
            hy.extend_from_slice(&row[t_new + 1..]);
            for t in -1..=(t_new as isize) {
                x.extend_from_slice(self.x_row(i, t));
            }
            for t in (t_new + 1)..=self.n_periods {
                hx.extend_from_slice(self.x_row(i, t as isize));
            }
        }
        let mut out = PanelData::new(self.n_units, t_new, k, y, x)?;
        out.unit_ids = self.unit_ids.clone();
        out.n_holdout = h;
        out.holdout_y = Some(hy);
        out.holdout_x = Some(hx);
        out.standardization = self.standardization.clone();
        Ok(out)
    }

    /// Standardise regressors in place (estimation rows and holdout rows share
    /// the parameters computed from estimation rows).
    pub fn standardize(&mut self, mode: StandardizeMode) {
        let k = self.n_x;
        if k == 0 || mode == StandardizeMode::None {
            self.standardization = Some(Standardization { mode: StandardizeMode::None, mean: vec![], sd: vec![] });
            return;
        }
        let rows = self.n_periods + 2;
        let slots = if mode == StandardizeMode::PerPeriod { rows } else { 1 };
        let mut mean = vec![0.0; slots * k];
        let mut sd = vec![0.0; slots * k];
        for slot in 0..slots {
            for j in 0..k {
                let mut vals = Vec::new();
                for i in 0..self.n_units {
                    for r in 0..rows {
                        if slots == 1 || r == slot {
                            vals.push(self.x[(i * rows + r) * k + j]);
                        }
                    }
                }
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let v = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
                mean[slot * k + j] = m;
                sd[slot * k + j] = if v > 0.0 { v.sqrt() } else { 1.0 };
            }
        }
        let idx = |slot: usize, j: usize| slot * k + j;
        for i in 0..self.n_units {
            for r in 0..rows {
                let slot = if slots == 1 { 0 } else { r };
                for j in 0..k {
                    let c = &mut self.x[(i * rows + r) * k + j];
                    *c = (*c - mean[idx(slot, j)]) / sd[idx(slot, j)];
                }
            }
        }
        if let Some(hx) = self.holdout_x.as_mut() {
            let slot = if slots == 1 { 0 } else { rows - 1 };
            for cell in hx.chunks_mut(k) {
                for j in 0..k {
                    cell[j] = (cell[j] - mean[idx(slot, j)]) / sd[idx(slot, j)];
                }
            }
        }
        self.standardization = Some(Standardization { mode, mean, sd });
    }

    /// Read a long-format CSV with header `unit_id,time,y,x1,...,xk`.
    ///
    /// Times `0..=T` are estimation periods, `-1` carries initial regressors
    /// (its `y` may be blank), and the last `holdout` periods become the
    /// holdout block. If no `-1` rows are present the `t = 0` regressors are
    /// duplicated and a warning is logged.
    pub fn read_csv<R: Read>(reader: R, holdout: usize) -> Result<PanelData> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 3
            || headers.get(0) != Some("unit_id")
            || headers.get(1) != Some("time")
            || headers.get(2) != Some("y")
        {
            return Err(Error::Parse { row: 1, msg: "header must start with unit_id,time,y".into() });
        }
        let k = headers.len() - 3;
        struct Cell {
            y: Option<f64>,
            x: Vec<f64>,
        }
        let mut order: Vec<String> = Vec::new();
        let mut cells: HashMap<String, HashMap<i64, Cell>> = HashMap::new();
        let (mut tmin, mut tmax) = (i64::MAX, i64::MIN);
        for (r, rec) in rdr.records().enumerate() {
            let row = r + 2;
            let rec = rec?;
            if rec.len() != k + 3 {
                return Err(Error::Parse { row, msg: format!("expected {} fields, found {}", k + 3, rec.len()) });
            }
            let id = rec[0].to_string();
            let t: i64 = rec[1]
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("bad time value {:?}", &rec[1]) })?;
            let y = if rec[2].is_empty() {
                None
            } else {
                let v: f64 =
                    rec[2].parse().map_err(|_| Error::Parse { row, msg: format!("bad y value {:?}", &rec[2]) })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Parse { row, msg: format!("y must be finite and non-negative, got {v}") });
                }
                Some(v)
            };
            let mut x = Vec::with_capacity(k);
            for j in 0..k {
                let v: f64 = rec[3 + j]
                    .parse()
                    .map_err(|_| Error::Parse { row, msg: format!("bad regressor value {:?}", &rec[3 + j]) })?;
                if !v.is_finite() {
                    return Err(Error::Parse { row, msg: "non-finite regressor".into() });
                }
                x.push(v);
            }
            if t >= 0 && y.is_none() {
                return Err(Error::Parse { row, msg: "missing y".into() });
            }
            if !cells.contains_key(&id) {
                order.push(id.clone());
            }
            let unit = cells.entry(id).or_default();
            if unit.insert(t, Cell { y, x }).is_some() {
                return Err(Error::Parse { row, msg: format!("duplicate time {t}") });
            }
            tmin = tmin.min(t);
            tmax = tmax.max(t);
        }
        if order.is_empty() {
            return Err(Error::Parse { row: 2, msg: "no data rows".into() });
        }
        if tmin < -1 {
            return Err(Error::Parse { row: 0, msg: format!("time {tmin} is before -1") });
        }
        let t_all = tmax as usize;
        if holdout >= t_all {
            return Err(Error::Insufficient(format!("holdout {holdout} leaves no estimation periods")));
        }
        let has_initial = tmin == -1;
        if !has_initial {
            log::warn!("no t = -1 rows; duplicating t = 0 regressors as initial values");
        }
        let n = order.len();
        let mut y = Vec::with_capacity(n * (t_all + 1));
        let mut x = Vec::with_capacity(n * (t_all + 2) * k);
        for id in &order {
            let unit = &cells[id];
            for t in 0..=t_all as i64 {
                match unit.get(&t) {
                    Some(c) => y.push(c.y.unwrap_or(0.0)),
                    None => return Err(Error::Parse { row: 0, msg: format!("unit {id} is missing time {t}") }),
                }
            }
            let first = if has_initial { -1 } else { 0 };
            match unit.get(&first) {
                Some(c) => x.extend_from_slice(&c.x),
                None => return Err(Error::Parse { row: 0, msg: format!("unit {id} is missing time {first}") }),
            }
            for t in 0..=t_all as i64 {
                x.extend_from_slice(&unit[&t].x);
            }
        }
        let mut panel = PanelData::new(n, t_all, k, y, x)?;
        panel.unit_ids = order;
        if holdout > 0 {
            panel = panel.split_holdout(holdout)?;
        }
        Ok(panel)
    }

    pub fn read_csv_path(path: &std::path::Path, holdout: usize) -> Result<PanelData> {
        PanelData::read_csv(std::fs::File::open(path)?, holdout)
    }

    /// Write the panel in the long CSV layout accepted by [`PanelData::read_csv`],
    /// holdout periods included.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["unit_id".to_string(), "time".to_string(), "y".to_string()];
        header.extend((1..=self.n_x).map(|j| format!("x{j}")));
        w.write_record(&header)?;
        for i in 0..self.n_units {
            let id = &self.unit_ids[i];
            let mut rec = vec![id.clone(), "-1".into(), String::new()];
            rec.extend(self.x_row(i, -1).iter().map(|v| fmt_f64(*v)));
            w.write_record(&rec)?;
            for t in 0..=self.n_periods {
                let mut rec = vec![id.clone(), t.to_string(), fmt_f64(self.y(i, t))];
                rec.extend(self.x_row(i, t as isize).iter().map(|v| fmt_f64(*v)));
                w.write_record(&rec)?;
            }
            for s in 1..=self.n_holdout {
                let mut rec = vec![
                    id.clone(),
                    (self.n_periods + s).to_string(),
                    fmt_f64(self.holdout(i, s).unwrap_or(0.0)),
                ];
                if let Some(row) = self.holdout_x_row(i, s) {
                    rec.extend(row.iter().map(|v| fmt_f64(*v)));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal representation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Latent outcomes `y*` for `t = 0..=T`, unit-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPanel {
    pub n_units: usize,
    pub n_periods: usize,
    pub y_star: Vec<f64>,
}

impl LatentPanel {
    pub fn from_observed(data: &PanelData) -> Self {
        Self { n_units: data.n_units, n_periods: data.n_periods, y_star: data.y.clone() }
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.y_star[i * (self.n_periods + 1) + t]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_periods + 1;
        &self.y_star[i * w..(i + 1) * w]
    }

    /// Check that positive observations are reproduced exactly and censored
    /// cells carry non-positive latents.
    pub fn is_consistent_with(&self, data: &PanelData) -> bool {
        self.y_star.len() == data.y.len()
            && self.y_star.iter().zip(&data.y).all(|(&s, &y)| if y > 0.0 { s == y } else { s <= 0.0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitParams {
    pub lambda: Vec<f64>,
    pub sigma2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonParams {
    pub rho: f64,
    pub beta: Vec<f64>,
}

/// `lambda + rho * y_star_prev + beta' x_prev`.
pub fn conditional_mean(lambda: f64, rho: f64, beta: &[f64], y_star_prev: f64, x_prev: &[f64]) -> Result<f64> {
    if beta.len() != x_prev.len() {
        return Err(Error::Dimension(format!("beta has {} entries, x has {}", beta.len(), x_prev.len())));
    }
    Ok(lambda + rho * y_star_prev + dot(beta, x_prev))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn censor(y_star: f64) -> f64 {
    if y_star >= 0.0 {
        y_star
    } else {
        0.0
    }
}

/// Iterate the law of motion for `t = 1..=T` from the given initial latents.
///
/// `x` is unit-major with `T + 2` rows of `n_x` values (periods `-1..=T`);
/// pass an empty slice when there are no regressors. Unit `i` draws its
/// shocks from its own substream, so the result does not depend on how
/// units are scheduled.
pub fn simulate_panel(
    unit: &UnitParams,
    common: &CommonParams,
    y0_star: &[f64],
    x: &[f64],
    n_periods: usize,
    seed: u64,
) -> Result<(LatentPanel, PanelData)> {
    let n = unit.lambda.len();
    let k = common.beta.len();
    if unit.sigma2.len() != n || y0_star.len() != n {
        return Err(Error::Dimension("unit parameter lengths differ".into()));
    }
    if x.len() != n * (n_periods + 2) * k {
        return Err(Error::Dimension(format!(
            "x has {} cells, expected {}",
            x.len(),
            n * (n_periods + 2) * k
        )));
    }
    if let Some(s) = unit.sigma2.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidParameter(format!("innovation variance {s} is not positive")));
    }
    let w = n_periods + 1;
    let mut ys = vec![0.0; n * w];
    for i in 0..n {
        let mut rng = substream(seed, &[label::SIMULATE, i as u64]);
        let sd = unit.sigma2[i].sqrt();
        ys[i * w] = y0_star[i];
        for t in 1..=n_periods {
            let xr = &x[(i * (n_periods + 2) + t) * k..(i * (n_periods + 2) + t + 1) * k];
            let m = unit.lambda[i] + common.rho * ys[i * w + t - 1] + dot(&common.beta, xr);
            ys[i * w + t] = m + sd * std_normal(&mut rng);
        }
    }
    let y: Vec<f64> = ys.iter().map(|&v| censor(v)).collect();
    let data = PanelData::new(n, n_periods, k, y, x.to_vec())?;
    Ok((LatentPanel { n_units: n, n_periods, y_star: ys }, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conditional_mean_examples() {
        assert_eq!(conditional_mean(0.0, 0.0, &[], 5.0, &[]).unwrap(), 0.0);
        assert!((conditional_mean(1.0, 0.8, &[], 2.0, &[]).unwrap() - 2.6).abs() < 1e-15);
        let v = conditional_mean(0.25, 0.8, &[-0.03, 0.15], 1.0, &[1.0, 2.0]).unwrap();
        // 0.25 + 0.8 - 0.03 + 0.30
        assert!((v - 1.32).abs() < 1e-12);
        assert!(conditional_mean(0.0, 0.0, &[1.0], 0.0, &[]).is_err());
    }

    #[test]
    fn censor_examples() {
        assert_eq!(censor(3.2), 3.2);
        assert_eq!(censor(-1.7), 0.0);
        assert_eq!(censor(0.0), 0.0);
    }

    #[test]
    fn noiseless_recursion() {
        let unit = UnitParams { lambda: vec![1.0; 3], sigma2: vec![1e-30; 3] };
        let common = CommonParams { rho: 0.0, beta: vec![] };
        let (lat, data) = simulate_panel(&unit, &common, &[0.0; 3], &[], 3, 1).unwrap();
        for i in 0..3 {
            for t in 1..=3 {
                assert!((lat.get(i, t) - 1.0).abs() < 1e-12);
                assert!((data.y(i, t) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simulation_rejects_bad_variance() {
        let unit = UnitParams { lambda: vec![1.0], sigma2: vec![0.0] };
        let common = CommonParams { rho: 0.0, beta: vec![] };
        assert!(simulate_panel(&unit, &common, &[0.0], &[], 3, 1).is_err());
    }

    #[test]
    fn csv_roundtrip_and_holdout() {
        let n = 3;
        let t = 4;
        let y: Vec<f64> = (0..n * (t + 1)).map(|k| (k % 3) as f64 * 0.5).collect();
        let x: Vec<f64> = (0..n * (t + 2)).map(|k| k as f64 * 0.1).collect();
        let mut p = PanelData::new(n, t, 1, y, x).unwrap();
        p.unit_ids = vec!["a".into(), "b".into(), "c".into()];
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = PanelData::read_csv(&buf[..], 0).unwrap();
        assert_eq!(back, p);
        let h = PanelData::read_csv(&buf[..], 1).unwrap();
        assert_eq!(h.n_periods, 3);
        assert_eq!(h.holdout(1, 1), Some(p.y(1, 4)));
        assert_eq!(h.holdout_x_row(2, 1).unwrap(), p.x_row(2, 4));
    }

    #[test]
    fn csv_rejects_negative_y_with_row_number() {
        let s = "unit_id,time,y\na,0,1\na,1,-2\n";
        match PanelData::read_csv(s.as_bytes(), 0) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
        let s = "unit_id,time,y\na,0,1\na,1,NaN\n";
        assert!(matches!(PanelData::read_csv(s.as_bytes(), 0), Err(Error::Parse { row: 3, .. })));
    }

    #[test]
    fn csv_without_initial_rows_duplicates_first() {
        let s = "unit_id,time,y,x1\na,0,1,5\na,1,2,6\n";
        let p = PanelData::read_csv(s.as_bytes(), 0).unwrap();
        assert_eq!(p.x_row(0, -1), &[5.0]);
        assert_eq!(p.x_row(0, 0), &[5.0]);
    }

    #[test]
    fn pooled_standardization_has_unit_moments() {
        let n = 5;
        let t = 3;
        let x: Vec<f64> = (0..n * (t + 2) * 2).map(|k| ((k * 7919) % 13) as f64 + (k % 2) as f64 * 10.0).collect();
        let mut p = PanelData::new(n, t, 2, vec![1.0; n * (t + 1)], x).unwrap();
        p.standardize(StandardizeMode::Pooled);
        for j in 0..2 {
            let v: Vec<f64> = p.x.chunks(2).map(|c| c[j]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64;
            assert!(m.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
    }
}
