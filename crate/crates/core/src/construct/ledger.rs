use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::ConstructError;

/// Compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LedgerGrid {
    /// Every `m` from 2 to `m_max`.
    Linear,
    /// About `per_decade` points per factor of ten, plus `m_max`.
    Geometric { per_decade: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerParams {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub eps: f64,
    pub m_max: u64,
    pub grid: LedgerGrid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub m: u64,
    pub log_a: f64,
    /// `ln M_B(m) = B m + π D² Σ_{j=2}^{m-1} j² ln⁴ j`.
    pub log_mb: f64,
    /// The same exponent with the sum `Σ_{k=2}^{m} (a_k/a_{k-1})²`.
    pub log_mb_alt: f64,
    /// `ln(ln 2 + 2^{1-B} M_B(m+1))`.
    pub log_logmax: f64,
    /// `(ln 2 + (1-B) ln 2 + ln M_B(m+1)) / ln^{3+ε} a_m`.
    pub ratio: f64,
    /// `ratio · m^ε / ln^{1-ε} m`, asymptotically constant.
    pub normalized_ratio: f64,
    /// `(ln a_{m+1} / ln a_m)^{3+ε/2}`.
    pub interpolation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthLedger {
    pub params: LedgerParams,
    pub rows: Vec<LedgerRow>,
    /// `|log_mb_alt / log_mb - 1|` at `m_max`.
    pub form_discrepancy: f64,
}

impl GrowthLedger {
    pub fn row(&self, m: u64) -> Option<&LedgerRow> {
        self.rows.iter().find(|r| r.m == m)
    }

    /// Rows from `m_from` on have strictly decreasing ratios.
    pub fn ratio_decreasing_from(&self, m_from: u64) -> bool {
        let tail: Vec<f64> = self.rows.iter().filter(|r| r.m >= m_from).map(|r| r.ratio).collect();
        tail.windows(2).all(|w| w[1] < w[0])
    }

    /// `max/min - 1` of the normalized ratio over rows with `m >= m_from`.
    pub fn normalized_spread_from(&self, m_from: u64) -> f64 {
        let tail: Vec<f64> = self.rows.iter().filter(|r| r.m >= m_from).map(|r| r.normalized_ratio).collect();
        let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
        hi / lo - 1.0
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["m", "log_a_m", "log_M_B", "log_M_B_alt", "log_logmax", "ratio", "normalized_ratio", "interpolation"])?;
        for r in &self.rows {
            w.serialize((r.m, r.log_a, r.log_mb, r.log_mb_alt, r.log_logmax, r.ratio, r.normalized_ratio, r.interpolation))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn grid_points(m_max: u64, grid: LedgerGrid) -> Vec<u64> {
    let mut pts: Vec<u64> = match grid {
        LedgerGrid::Linear => (2..=m_max).collect(),
        LedgerGrid::Geometric { per_decade } => {
            let step = 10f64.powf(1.0 / per_decade.max(1) as f64);
            let mut v = vec![2, 3];
            let mut x = 3.0f64;
            while x < m_max as f64 {
                x *= step;
                v.push((x.round() as u64).min(m_max));
            }
            v
        }
    };
    pts.push(m_max);
    pts.sort_unstable();
    pts.dedup();
    pts.retain(|&m| m >= 2 && m <= m_max);
    pts
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-space growth ledger by a single compensated pass over `j <= m_max + 1`.
pub fn growth_ledger(p: &LedgerParams) -> Result<GrowthLedger, ConstructError> {
    if p.m_max < 3 || !(p.d > 0.0) || !(p.eps > 0.0) || !p.b.is_finite() {
        return Err(ConstructError::Input(format!(
            "ledger needs m_max >= 3, D > 0, eps > 0 and finite B; got {}, {}, {}, {}",
            p.m_max, p.d, p.eps, p.b
        )));
    }
    let pts = grid_points(p.m_max, p.grid);
    let (b, d2, e) = (p.b, p.d * p.d, p.eps);
    // s_j = Σ_{k=2}^{j} k² ln⁴ k and log a_j, both up to j = m_max + 2
    let mut s = Neumaier::default();
    let mut log_a = Neumaier::default();
    let term = |k: u64| {
        let kf = k as f64;
        let l = kf.ln();
        kf * kf * l * l * l * l
    };
    let step_a = |k: u64| {
        let kf = k as f64;
        (p.d * kf * kf.ln().powi(2)).ln()
    };
    // state at j: s holds Σ_{k=2}^{j}, log_a holds ln a_j
    let mut j: u64 = 1;
    let mut rows = Vec::with_capacity(pts.len());
    let mut discrepancy = 0.0f64;
    for &m in &pts {
        while j < m - 1 {
            j += 1;
            s.add(term(j));
            log_a.add(step_a(j));
        }
        // here j = m - 1
        let sum_to_m_minus_1 = s.value();
        let log_a_m_minus_1 = log_a.value();
        let log_a_m = log_a_m_minus_1 + step_a(m);
        let log_a_m1 = log_a_m + step_a(m + 1);
        let log_mb = b * m as f64 + PI * d2 * sum_to_m_minus_1;
        let log_mb_next = b * (m + 1) as f64 + PI * d2 * (sum_to_m_minus_1 + term(m));
        let log_mb_alt = log_mb + PI * d2 * term(m);
        let log_cap = (1.0 - b) * LN_2 + log_mb_next;
        let log_logmax = log_add(LN_2.ln(), log_cap);
        let ratio = (LN_2 + log_cap) / log_a_m.powf(3.0 + e);
        let mf = m as f64;
        let normalized_ratio = ratio * mf.powf(e) / mf.ln().powf(1.0 - e);
        let interpolation = (log_a_m1 / log_a_m).powf(3.0 + e / 2.0);
        discrepancy = (log_mb_alt / log_mb - 1.0).abs();
        rows.push(LedgerRow { m, log_a: log_a_m, log_mb, log_mb_alt, log_logmax, ratio, normalized_ratio, interpolation });
    }
    Ok(GrowthLedger { params: p.clone(), rows, form_discrepancy: discrepancy })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m_max: u64, grid: LedgerGrid) -> LedgerParams {
        LedgerParams { b: 20.0, d: 100.0, eps: 0.5, m_max, grid }
    }

    #[test]
    fn small_m_values() {
        let l = growth_ledger(&params(50, LedgerGrid::Linear)).unwrap();
        assert_eq!(l.row(2).unwrap().log_mb, 40.0);
        let expect = 60.0 + PI * 1e4 * 4.0 * 2f64.ln().powi(4);
        let got = l.row(3).unwrap().log_mb;
        assert!((got / expect - 1.0).abs() < 1e-14 && (got / 2.9068e4 - 1.0).abs() < 1e-4, "{got}");
        let la3 = (100.0 * 2.0 * 2f64.ln().powi(2)).ln() + (100.0 * 3.0 * 3f64.ln().powi(2)).ln();
        assert!((l.row(3).unwrap().log_a - la3).abs() < 1e-12);
        assert!(l.rows.iter().all(|r| r.ratio.is_finite() && r.log_logmax.is_finite()));
    }

    #[test]
    fn geometric_grid_agrees_with_linear() {
        let lin = growth_ledger(&params(3000, LedgerGrid::Linear)).unwrap();
        let geo = growth_ledger(&params(3000, LedgerGrid::Geometric { per_decade: 7 })).unwrap();
        for r in &geo.rows {
            let l = lin.row(r.m).unwrap();
            assert!((l.log_mb / r.log_mb - 1.0).abs() < 1e-15 && (l.ratio / r.ratio - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn compensated_sum_matches_pairwise_oracle() {
        // naive pairwise summation in extended steps as an independent reference
        let terms: Vec<f64> = (2..200_000u64).map(|k| (k as f64).powi(2) * (k as f64).ln().powi(4)).collect();
        fn pairwise(v: &[f64]) -> f64 {
            if v.len() <= 8 {
                v.iter().sum()
            } else {
                let (a, b) = v.split_at(v.len() / 2);
                pairwise(a) + pairwise(b)
            }
        }
        let mut n = Neumaier::default();
        terms.iter().for_each(|&t| n.add(t));
        assert!((n.value() / pairwise(&terms) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn asymptotic_sum_is_approached() {
        // Σ j² ln⁴ j ~ m³ ln⁴ m / 3
        let l = growth_ledger(&LedgerParams { b: 0.0, d: 1.0, eps: 0.5, m_max: 1_000_000, grid: LedgerGrid::Geometric { per_decade: 1 } }).unwrap();
        let r = l.row(1_000_000).unwrap();
        let m = 1e6f64;
        let sum = (r.log_mb) / PI;
        let lead = m.powi(3) * m.ln().powi(4) / 3.0;
        assert!((sum / lead - 1.0).abs() < 4.0 / (3.0 * m.ln()) + 0.05);
    }

    #[test]
    fn rejects_small_m_max() {
        assert!(growth_ledger(&params(2, LedgerGrid::Linear)).is_err());
    }
}
