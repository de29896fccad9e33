//! Rank correlation, ordered performance curves and cross-problem rank tables.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signed-area band inside which a curve counts as diagonal.
pub const NEUTRAL_BAND: f64 = 0.05;
/// Minimum per-half area for a curve to count as crossing the diagonal.
const CROSSING_BAND: f64 = NEUTRAL_BAND / 4.0;
pub const MIN_CLASSIFY_POINTS: usize = 10;

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn has_ties(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rank correlation.
///
/// Tie-free inputs use `1 - 6 Σd² / (n(n² - 1))` with integer rank
/// differences; inputs with ties fall back to Pearson correlation of
/// average ranks.
pub fn spearman_rho(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let n = u.len();
    if n < 2 {
        return Err(Error::TooShort { n, min: 2 });
    }
    let constant = |w: &[f64]| w.iter().all(|&x| x == w[0]);
    if constant(u) || constant(v) {
        return Err(Error::ZeroVariance);
    }
    let (ru, rv) = (average_ranks(u), average_ranks(v));
    if has_ties(u) || has_ties(v) {
        return Ok(pearson(&ru, &rv));
    }
    let d2: u128 = ru
        .iter()
        .zip(&rv)
        .map(|(a, b)| {
            let d = (*a as i64 - *b as i64).unsigned_abs() as u128;
            d * d
        })
        .sum();
    let n = n as u128;
    Ok(1.0 - (6 * d2) as f64 / (n * (n * n - 1)) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpcType {
    Flat,
    UShaped,
    Neutral,
    Bell,
    Steep,
    Degenerate,
}

impl fmt::Display for OpcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OpcType::Flat => "flat",
            OpcType::UShaped => "u-shaped",
            OpcType::Neutral => "neutral",
            OpcType::Bell => "bell",
            OpcType::Steep => "steep",
            OpcType::Degenerate => "degenerate",
        };
        f.write_str(s)
    }
}

/// Sorted performance values normalized to a curve from (0, 0) to (1, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpcCurve {
    pub normalized_rank: Vec<f64>,
    pub normalized_performance: Vec<f64>,
    /// `Degenerate` when every value is equal, otherwise unclassified
    /// until [`classify_opc`] runs.
    pub opc_type: Option<OpcType>,
}

impl OpcCurve {
    pub fn len(&self) -> usize {
        self.normalized_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized_rank.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.opc_type == Some(OpcType::Degenerate)
    }

    /// Linear interpolation of the curve at `x` in `[0, 1]`.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.len();
        let pos = (x.clamp(0.0, 1.0) * (n - 1) as f64).min((n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let t = pos - i as f64;
        let y = &self.normalized_performance;
        y[i] + t * (y[i + 1] - y[i])
    }

    /// Trapezoid integral of `y(x) - x` over `[0, 1]`.
    pub fn signed_area(&self) -> f64 {
        self.area_between(0, self.len() - 1)
    }

    fn area_between(&self, lo: usize, hi: usize) -> f64 {
        let (x, y) = (&self.normalized_rank, &self.normalized_performance);
        (lo..hi)
            .map(|i| 0.5 * (x[i + 1] - x[i]) * ((y[i] - x[i]) + (y[i + 1] - x[i + 1])))
            .sum()
    }

    /// Areas of `y(x) - x` over `[0, 0.5]` and `[0.5, 1]`, with the midpoint
    /// interpolated when it falls between samples.
    fn half_areas(&self) -> (f64, f64) {
        let n = self.len();
        let (x, y) = (&self.normalized_rank, &self.normalized_performance);
        let split = x.iter().position(|&xi| xi >= 0.5).unwrap_or(n - 1);
        let h = self.value_at(0.5);
        let mut left = self.area_between(0, split.saturating_sub(1));
        let mut right = self.area_between(split, n - 1);
        if split > 0 {
            let (x0, d0) = (x[split - 1], y[split - 1] - x[split - 1]);
            let (x1, d1) = (x[split], y[split] - x[split]);
            let dm = h - 0.5;
            left += 0.5 * (0.5 - x0) * (d0 + dm);
            right += 0.5 * (x1 - 0.5) * (dm + d1);
        }
        (left, right)
    }
}

/// Sort `values` ascending and normalize to the unit square.
pub fn build_opc(values: &[f64]) -> Result<OpcCurve> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooShort { n, min: 2 });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidSize(format!("performance values must be finite, got {v}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let normalized_rank = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if lo == hi {
        return Ok(OpcCurve {
            normalized_rank,
            normalized_performance: vec![0.0; n],
            opc_type: Some(OpcType::Degenerate),
        });
    }
    let range = hi - lo;
    let mut normalized_performance: Vec<f64> = sorted.iter().map(|v| (v - lo) / range).collect();
    normalized_performance[n - 1] = 1.0;
    Ok(OpcCurve {
        normalized_rank,
        normalized_performance,
        opc_type: None,
    })
}

/// Shape statistics behind a classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpcShape {
    pub opc_type: OpcType,
    pub signed_area: f64,
    pub left_area: f64,
    pub right_area: f64,
    pub half_point: f64,
}

/// Classify a curve by its signed area against the diagonal.
///
/// A curve that bows below the diagonal on one half and above on the other
/// is U-shaped when its first half is convex and Bell when concave. Any
/// other curve is Neutral within the area band, Flat below it, Steep above.
pub fn classify_opc_shape(curve: &OpcCurve) -> Result<OpcShape> {
    let n = curve.len();
    if n < MIN_CLASSIFY_POINTS {
        return Err(Error::TooFewPoints {
            n,
            min: MIN_CLASSIFY_POINTS,
        });
    }
    if curve.is_degenerate() {
        return Ok(OpcShape {
            opc_type: OpcType::Degenerate,
            signed_area: 0.0,
            left_area: 0.0,
            right_area: 0.0,
            half_point: 0.0,
        });
    }
    let signed_area = curve.signed_area();
    let (left_area, right_area) = curve.half_areas();
    let half_point = curve.value_at(0.5);
    let crosses = left_area.signum() != right_area.signum()
        && left_area.abs() >= CROSSING_BAND
        && right_area.abs() >= CROSSING_BAND;
    let opc_type = if crosses {
        // Chord from (0, 0) to (0.5, h) encloses 0.25 h; a convex first half lies below it.
        let under_curve = left_area + 0.125;
        if under_curve < 0.25 * half_point {
            OpcType::UShaped
        } else {
            OpcType::Bell
        }
    } else if signed_area.abs() <= NEUTRAL_BAND {
        OpcType::Neutral
    } else if signed_area < 0.0 {
        OpcType::Flat
    } else {
        OpcType::Steep
    };
    Ok(OpcShape {
        opc_type,
        signed_area,
        left_area,
        right_area,
        half_point,
    })
}

pub fn classify_opc(curve: &OpcCurve) -> Result<OpcType> {
    Ok(classify_opc_shape(curve)?.opc_type)
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median with lower and upper quartiles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quartiles(values: &[f64]) -> Quartiles {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Quartiles {
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
    }
}

pub fn median(values: &[f64]) -> f64 {
    quartiles(values).median
}

/// One (problem, algorithm) cell of a rank table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMedian {
    pub problem: String,
    pub algorithm: String,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub problems: Vec<String>,
    pub algorithms: Vec<String>,
    /// `medians[p][a]`.
    pub medians: Vec<Vec<f64>>,
    /// `ranks[p][a]`, 1 = lowest median.
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
    /// Average wall-clock seconds per trial, where known.
    pub tavg: Vec<Option<f64>>,
}

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = Vec::<String>::new();
    for s in items {
        if !seen.iter().any(|x| x == s) {
            seen.push(s.to_owned());
        }
    }
    seen
}

/// Rank algorithms within each problem and average the ranks.
///
/// Problems and algorithms keep their order of first appearance.
pub fn mean_rank_table(cells: &[CellMedian], tavg: &BTreeMap<String, f64>) -> Result<RankTable> {
    let problems = first_appearance(cells.iter().map(|c| c.problem.as_str()));
    let algorithms = first_appearance(cells.iter().map(|c| c.algorithm.as_str()));
    let lookup: BTreeMap<(&str, &str), f64> = cells
        .iter()
        .map(|c| ((c.problem.as_str(), c.algorithm.as_str()), c.median))
        .collect();
    let mut medians = Vec::with_capacity(problems.len());
    let mut ranks = Vec::with_capacity(problems.len());
    for p in &problems {
        let row = algorithms
            .iter()
            .map(|a| {
                lookup.get(&(p.as_str(), a.as_str())).copied().ok_or_else(|| Error::MissingCell {
                    problem: p.clone(),
                    algorithm: a.clone(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        ranks.push(average_ranks(&row));
        medians.push(row);
    }
    let np = problems.len().max(1) as f64;
    let mean_ranks = (0..algorithms.len())
        .map(|a| ranks.iter().map(|r| r[a]).sum::<f64>() / np)
        .collect();
    let tavg = algorithms.iter().map(|a| tavg.get(a).copied()).collect();
    Ok(RankTable {
        problems,
        algorithms,
        medians,
        ranks,
        mean_ranks,
        tavg,
    })
}

impl RankTable {
    pub fn mean_rank(&self, algorithm: &str) -> Option<f64> {
        self.algorithms
            .iter()
            .position(|a| a == algorithm)
            .map(|i| self.mean_ranks[i])
    }

    /// Problem rows of medians, then `mean_rank` and `tavg` footer rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["problem".to_owned()];
        header.extend(self.algorithms.iter().cloned());
        w.write_record(&header)?;
        let fmt = |v: f64| format!("{v:e}");
        for (p, row) in self.problems.iter().zip(&self.medians) {
            let mut rec = vec![p.clone()];
            rec.extend(row.iter().map(|&v| fmt(v)));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["mean_rank".to_owned()];
        rec.extend(self.mean_ranks.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
        let mut rec = vec!["tavg".to_owned()];
        rec.extend(self.tavg.iter().map(|t| t.map(|v| format!("{v:.6}")).unwrap_or_default()));
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman_rho(&[5.0, 2.0, 9.0], &[5.0, 2.0, 9.0]).unwrap(), 1.0);
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(spearman_rho(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(spearman_rho(&[1.0], &[1.0]), Err(Error::TooShort { .. })));
        assert!(matches!(spearman_rho(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let rho = spearman_rho(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        // Pearson of (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
        assert!(close(rho, 4.5 / (4.5f64 * 5.0).sqrt()));
    }

    #[test]
    fn opc_examples() {
        let c = build_opc(&[2.0, 0.0, 1.0]).unwrap();
        assert_eq!(c.normalized_performance, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.normalized_rank, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.opc_type, None);
        let c = build_opc(&[7.0; 5]).unwrap();
        assert!(c.is_degenerate());
        assert!(c.normalized_performance.iter().all(|&y| y == 0.0));
        assert!(matches!(build_opc(&[1.0]), Err(Error::TooShort { .. })));
    }

    fn curve(f: impl Fn(f64) -> f64, n: usize) -> OpcCurve {
        build_opc(&(0..n).map(|i| f(i as f64 / (n - 1) as f64)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn classification_of_analytic_shapes() {
        assert_eq!(classify_opc(&curve(|x| x, 101)).unwrap(), OpcType::Neutral);
        let flat = classify_opc_shape(&curve(|x| x * x, 1001)).unwrap();
        assert_eq!(flat.opc_type, OpcType::Flat);
        assert!((flat.signed_area + 1.0 / 6.0).abs() < 1e-5);
        let steep = classify_opc_shape(&curve(f64::sqrt, 100_001)).unwrap();
        assert_eq!(steep.opc_type, OpcType::Steep);
        assert!((steep.signed_area - 1.0 / 6.0).abs() < 1e-4);
        // Smoothstep: flat at both ends, values cluster at the extremes.
        let s = |x: f64| x * x * (3.0 - 2.0 * x);
        assert_eq!(classify_opc(&curve(s, 201)).unwrap(), OpcType::UShaped);
        // Steep at both ends, values cluster in the middle.
        let inv = |x: f64| 0.5 + (2.0 * x - 1.0).powi(3) / 2.0;
        assert_eq!(classify_opc(&curve(inv, 201)).unwrap(), OpcType::Bell);
        assert!(matches!(classify_opc(&curve(|x| x, 9)), Err(Error::TooFewPoints { .. })));
        assert_eq!(classify_opc(&build_opc(&[1.0; 20]).unwrap()).unwrap(), OpcType::Degenerate);
    }

    #[test]
    fn half_areas_sum_to_total() {
        for n in [10, 11, 57] {
            let c = curve(|x| x.powi(3), n);
            let (l, r) = c.half_areas();
            assert!((l + r - c.signed_area()).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn quantiles_type7() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        let q = quartiles(&v);
        assert_eq!(q.median, 5.5);
        assert_eq!(q.q1, 3.25);
        assert_eq!(q.q3, 7.75);
        let q = quartiles(&[4.0]);
        assert_eq!((q.q1, q.median, q.q3), (4.0, 4.0, 4.0));
    }

    fn cells(rows: &[(&str, &str, f64)]) -> Vec<CellMedian> {
        rows.iter()
            .map(|&(p, a, m)| CellMedian {
                problem: p.into(),
                algorithm: a.into(),
                median: m,
            })
            .collect()
    }

    #[test]
    fn rank_table_examples() {
        let all_a: Vec<_> = (0..4)
            .flat_map(|p| {
                let p = format!("p{p}");
                [(p.clone(), "A", 1.0), (p, "B", 2.0)]
            })
            .collect();
        let c: Vec<_> = all_a.iter().map(|(p, a, m)| (p.as_str(), *a, *m)).collect();
        let t = mean_rank_table(&cells(&c), &BTreeMap::new()).unwrap();
        assert_eq!(t.mean_ranks, vec![1.0, 2.0]);

        let t = mean_rank_table(&cells(&[("p", "A", 3.0), ("p", "B", 3.0)]), &BTreeMap::new()).unwrap();
        assert_eq!(t.ranks[0], vec![1.5, 1.5]);

        let c = cells(&[
            ("p1", "A", 1.0),
            ("p1", "B", 2.0),
            ("p2", "A", 1.0),
            ("p2", "B", 2.0),
            ("p3", "A", 1.0),
            ("p3", "B", 2.0),
            ("p4", "A", 5.0),
            ("p4", "B", 2.0),
        ]);
        let tavg = BTreeMap::from([("A".to_owned(), 2.0)]);
        let t = mean_rank_table(&c, &tavg).unwrap();
        assert_eq!(t.mean_ranks, vec![1.25, 1.75]);
        assert_eq!(t.tavg, vec![Some(2.0), None]);
        for r in &t.ranks {
            assert_eq!(r.iter().sum::<f64>(), 3.0);
        }
        let csv = t.to_csv_string().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "problem,A,B");
        assert_eq!(lines[5], "mean_rank,1.25,1.75");
        assert_eq!(lines[6], "tavg,2.000000,");
    }

    #[test]
    fn missing_cell_is_named() {
        let c = cells(&[("p1", "A", 1.0), ("p1", "B", 2.0), ("p2", "A", 1.0)]);
        match mean_rank_table(&c, &BTreeMap::new()) {
            Err(Error::MissingCell { problem, algorithm }) => {
                assert_eq!((problem.as_str(), algorithm.as_str()), ("p2", "B"));
            }
            other => panic!("{other:?}"),
        }
    }
}
