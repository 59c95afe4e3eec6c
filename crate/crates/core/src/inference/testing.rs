//! Sup-type test of a single effect and Benjamini-Hochberg selection.

use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapResult;
use super::debias::DebiasedCurve;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// `sup_t |F(t)| sqrt(n h) / sigma_n(t)` over grid points with `sigma_n > 0`,
/// calibrated against the bootstrap sups.
pub fn test_pair(curve: &DebiasedCurve, boot: &BootstrapResult, h: f64) -> Result<PairTest> {
    let sn = curve.sigma_n();
    let root = (curve.n_total as f64 * h).sqrt();
    let mut stat: Option<f64> = None;
    for (v, s) in curve.centered.iter().zip(&sn) {
        if *s > 0.0 {
            let z = v.abs() * root / s;
            stat = Some(stat.map_or(z, |m| m.max(z)));
        }
    }
    let statistic = stat.ok_or_else(|| Error::NoInformation("every grid point has sigma_n = 0".into()))?;
    Ok(PairTest {
        statistic,
        p_value: boot.p_value(statistic),
    })
}

/// Indices rejected by the Benjamini-Hochberg step-up procedure at level `q`.
pub fn bh_select(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    if m == 0 {
        return vec![];
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut k = 0;
    for (rank, &i) in order.iter().enumerate() {
        if p[i] <= (rank + 1) as f64 * q / m as f64 {
            k = rank + 1;
        }
    }
    let mut sel: Vec<usize> = order[..k].to_vec();
    sel.sort_unstable();
    sel
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bh_examples() {
        assert_eq!(bh_select(&[0.001, 0.02, 0.04, 0.9], 0.1), vec![0, 1, 2]);
        assert_eq!(bh_select(&[1.0; 5], 0.2), Vec::<usize>::new());
        assert_eq!(bh_select(&[0.0; 4], 0.05), vec![0, 1, 2, 3]);
    }
}
