//! Market-level views built from the curves of every ordered pair.

use std::cmp::Ordering;
use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_increasing, CurveKind, LagCurve};
use crate::error::{Error, Result};

/// Curves of all ordered pairs `(i, j)` of a universe on one lag grid.
///
/// `i` indexes the stock whose price (or lagged sign) is observed, `j` the
/// stock whose trade sign is the cause.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveGrid {
    pub kind: CurveKind,
    pub symbols: Vec<String>,
    pub lags: Vec<u32>,
    values: Vec<Option<f64>>,
    counts: Vec<u64>,
}

impl CurveGrid {
    pub fn new(kind: CurveKind, symbols: Vec<String>, lags: Vec<u32>) -> Result<Self> {
        check_increasing(&lags)?;
        let len = symbols.len() * symbols.len() * lags.len();
        Ok(CurveGrid {
            kind,
            symbols,
            lags,
            values: vec![None; len],
            counts: vec![0; len],
        })
    }

    pub fn n_stocks(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.symbols.len() + j) * self.lags.len() + k
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol(symbol.to_string()))
    }

    pub fn lag_index(&self, lag: u32) -> Result<usize> {
        self.lags
            .binary_search(&lag)
            .map_err(|_| Error::InvalidLags(format!("lag {lag} is not on the grid")))
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> Option<f64> {
        self.values[self.at(i, j, k)]
    }

    pub fn count(&self, i: usize, j: usize, k: usize) -> u64 {
        self.counts[self.at(i, j, k)]
    }

    pub fn set_point(&mut self, i: usize, j: usize, k: usize, value: Option<f64>, count: u64) {
        let at = self.at(i, j, k);
        self.values[at] = value;
        self.counts[at] = count;
    }

    /// Stores a pair curve; its lags must match the grid's.
    pub fn set(&mut self, i: usize, j: usize, curve: &LagCurve) -> Result<()> {
        if curve.lags != self.lags {
            return Err(Error::LagMismatch);
        }
        for k in 0..self.lags.len() {
            self.set_point(i, j, k, curve.values[k], curve.counts[k]);
        }
        Ok(())
    }

    pub fn curve(&self, i: usize, j: usize) -> LagCurve {
        let range = self.at(i, j, 0)..self.at(i, j, 0) + self.lags.len();
        LagCurve {
            kind: self.kind,
            stock_i: self.symbols[i].clone(),
            stock_j: self.symbols[j].clone(),
            lags: self.lags.clone(),
            values: self.values[range.clone()].to_vec(),
            counts: self.counts[range].to_vec(),
            flag: None,
        }
    }

    /// Pair values at lag index `k` as an `N x N` array with NaN for missing.
    pub fn slice_at(&self, k: usize) -> Array2<f64> {
        let n = self.n_stocks();
        Array2::from_shape_fn((n, n), |(i, j)| self.value(i, j, k).unwrap_or(f64::NAN))
    }

    /// Largest `|R_ij|` over all pairs, diagonal included, at lag index `k`.
    pub fn max_abs_at(&self, k: usize) -> Option<f64> {
        let n = self.n_stocks();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.value(i, j, k))
            .map(f64::abs)
            .reduce(f64::max)
    }
}

/// Normalized market response at one lag, stocks grouped by sector.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    pub tau: u32,
    pub symbols: Vec<String>,
    pub sectors: Vec<String>,
    pub raw: Array2<f64>,
    pub normalized: Array2<f64>,
    /// `max |R_ij(tau)|` over every entry; 0 when the matrix carries no signal.
    pub normalizer: f64,
    /// Index of the first stock of each sector block.
    pub sector_boundaries: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub tau: u32,
    pub normalizer: f64,
    pub degenerate: bool,
    pub sector_boundaries: Vec<usize>,
    pub sectors: Vec<String>,
    pub symbols: Vec<String>,
}

impl ResponseMatrix {
    /// True when the normalizer is zero or undefined and `normalized` is all NaN.
    pub fn is_degenerate(&self) -> bool {
        !(self.normalizer > 0.0)
    }

    pub fn sidecar(&self) -> MatrixSidecar {
        let mut block_names = Vec::new();
        for &b in &self.sector_boundaries {
            block_names.push(self.sectors[b].clone());
        }
        MatrixSidecar {
            tau: self.tau,
            normalizer: self.normalizer,
            degenerate: self.is_degenerate(),
            sector_boundaries: self.sector_boundaries.clone(),
            sectors: block_names,
            symbols: self.symbols.clone(),
        }
    }

    /// Dense CSV of the normalized entries with a symbol header row and column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_labelled_matrix(&self.symbols, &self.normalized, w)
    }

    pub fn write_raw_csv<W: Write>(&self, w: W) -> Result<()> {
        write_labelled_matrix(&self.symbols, &self.raw, w)
    }
}

fn write_labelled_matrix<W: Write>(symbols: &[String], m: &Array2<f64>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![String::new()];
    header.extend(symbols.iter().cloned());
    wtr.write_record(&header)?;
    for (i, row) in m.rows().into_iter().enumerate() {
        let mut rec = vec![symbols[i].clone()];
        rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<matrix writer>", e))?;
    Ok(())
}

/// Normalizes `raw` (indexed like `symbols`) by its largest absolute entry.
///
/// Stocks are regrouped so each sector forms one contiguous block; sectors
/// appear in order of first occurrence in `sectors`, and stocks keep their
/// relative order inside a block. NaN entries stay NaN and are ignored by
/// the normalizer.
pub fn market_response_matrix(
    tau: u32,
    symbols: &[String],
    sectors: &[String],
    raw: &Array2<f64>,
) -> Result<ResponseMatrix> {
    let n = symbols.len();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    if sectors.len() != n || raw.dim() != (n, n) {
        return Err(Error::Config(format!(
            "matrix of shape {:?} does not match {n} symbols and {} sectors",
            raw.dim(),
            sectors.len()
        )));
    }
    let mut sector_rank: Vec<&String> = Vec::new();
    for s in sectors {
        if !sector_rank.contains(&s) {
            sector_rank.push(s);
        }
    }
    let rank = |s: &String| sector_rank.iter().position(|r| *r == s).unwrap();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| rank(&sectors[k]));

    let ordered = Array2::from_shape_fn((n, n), |(a, b)| raw[[order[a], order[b]]]);
    let normalizer = ordered
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let normalized = if normalizer > 0.0 {
        ordered.mapv(|v| v / normalizer)
    } else {
        Array2::from_elem((n, n), f64::NAN)
    };
    let ordered_sectors: Vec<String> = order.iter().map(|&k| sectors[k].clone()).collect();
    let sector_boundaries = (0..n)
        .filter(|&a| a == 0 || ordered_sectors[a] != ordered_sectors[a - 1])
        .collect();
    Ok(ResponseMatrix {
        tau,
        symbols: order.iter().map(|&k| symbols[k].clone()).collect(),
        sectors: ordered_sectors,
        raw: ordered,
        normalized,
        normalizer,
        sector_boundaries,
    })
}

impl ResponseMatrix {
    pub fn from_grid(grid: &CurveGrid, tau: u32, sectors: &[String]) -> Result<Self> {
        let k = grid.lag_index(tau)?;
        market_response_matrix(tau, &grid.symbols, sectors, &grid.slice_at(k))
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

fn averaged_kind(kind: CurveKind) -> CurveKind {
    match kind {
        CurveKind::SignCorrelator | CurveKind::AveragedCorrelator => CurveKind::AveragedCorrelator,
        _ => CurveKind::AveragedResponse,
    }
}

/// Market average: mean over `j != i` of each row, then mean over rows.
pub fn market_average_response(grid: &CurveGrid) -> Result<LagCurve> {
    let n = grid.n_stocks();
    if n < 2 {
        return Err(Error::EmptyPool);
    }
    let mut values = Vec::with_capacity(grid.lags.len());
    let mut counts = Vec::with_capacity(grid.lags.len());
    for k in 0..grid.lags.len() {
        let rows = (0..n).filter_map(|i| mean((0..n).filter(|&j| j != i).filter_map(|j| grid.value(i, j, k))));
        values.push(mean(rows));
        counts.push(
            (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| grid.count(i, j, k))
                .sum(),
        );
    }
    LagCurve::new(averaged_kind(grid.kind), "market", "market", grid.lags.clone(), values, counts)
}

fn pool_indices(grid: &CurveGrid, fixed: usize, pool: &[String]) -> Result<Vec<usize>> {
    let mut idx = Vec::with_capacity(pool.len());
    for s in pool {
        let k = grid.index_of(s)?;
        if k != fixed && !idx.contains(&k) {
            idx.push(k);
        }
    }
    if idx.is_empty() {
        return Err(Error::EmptyPool);
    }
    Ok(idx)
}

fn pool_average(
    grid: &CurveGrid,
    fixed: &str,
    pool: &[String],
    pool_tag: &str,
    passive: bool,
) -> Result<LagCurve> {
    let f = grid.index_of(fixed)?;
    let members = pool_indices(grid, f, pool)?;
    let pair = |m: usize| if passive { (f, m) } else { (m, f) };
    let mut values = Vec::with_capacity(grid.lags.len());
    let mut counts = Vec::with_capacity(grid.lags.len());
    for k in 0..grid.lags.len() {
        values.push(mean(members.iter().filter_map(|&m| {
            let (i, j) = pair(m);
            grid.value(i, j, k)
        })));
        counts.push(members.iter().map(|&m| {
            let (i, j) = pair(m);
            grid.count(i, j, k)
        }).sum());
    }
    let (si, sj) = if passive {
        (fixed.to_string(), pool_tag.to_string())
    } else {
        (pool_tag.to_string(), fixed.to_string())
    };
    LagCurve::new(averaged_kind(grid.kind), si, sj, grid.lags.clone(), values, counts)
}

fn require_kind(grid: &CurveGrid, kind: CurveKind) -> Result<()> {
    if grid.kind != kind {
        return Err(Error::Config(format!("expected a {kind:?} grid, got {:?}", grid.kind)));
    }
    Ok(())
}

/// Passive response of `stock`: its price response averaged over the trades of `pool`.
pub fn passive_response(grid: &CurveGrid, stock: &str, pool: &[String], pool_tag: &str) -> Result<LagCurve> {
    require_kind(grid, CurveKind::Response)?;
    pool_average(grid, stock, pool, pool_tag, true)
}

/// Active response of `stock`: the response of `pool`'s prices to its trades.
pub fn active_response(grid: &CurveGrid, stock: &str, pool: &[String], pool_tag: &str) -> Result<LagCurve> {
    require_kind(grid, CurveKind::Response)?;
    pool_average(grid, stock, pool, pool_tag, false)
}

/// `<Theta_ij>_j` for fixed `i = stock`.
pub fn passive_correlator(grid: &CurveGrid, stock: &str, pool: &[String], pool_tag: &str) -> Result<LagCurve> {
    require_kind(grid, CurveKind::SignCorrelator)?;
    pool_average(grid, stock, pool, pool_tag, true)
}

/// `<Theta_ij>_i` for fixed `j = stock`.
pub fn active_correlator(grid: &CurveGrid, stock: &str, pool: &[String], pool_tag: &str) -> Result<LagCurve> {
    require_kind(grid, CurveKind::SignCorrelator)?;
    pool_average(grid, stock, pool, pool_tag, false)
}

/// Divides each lag's value by that lag's normalizer.
pub fn normalize_per_lag(values: &[Option<f64>], normalizers: &[Option<f64>]) -> Vec<Option<f64>> {
    values
        .iter()
        .zip(normalizers)
        .map(|(v, n)| match (v, n) {
            (Some(v), Some(n)) if *n > 0.0 => Some(v / n),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub symbol: String,
    pub values: Vec<Option<f64>>,
}

/// Top `k` stocks by value at `primary` (descending), ties broken by symbol.
///
/// Stocks without a value at the primary lag rank last.
pub fn rank_by_response(entries: &[(String, Vec<Option<f64>>)], primary: usize, k: usize) -> Vec<RankEntry> {
    let mut sorted: Vec<&(String, Vec<Option<f64>>)> = entries.iter().collect();
    sorted.sort_by(|a, b| {
        let va = a.1.get(primary).copied().flatten();
        let vb = b.1.get(primary).copied().flatten();
        let by_value = match (va, vb) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_value.then_with(|| a.0.cmp(&b.0))
    });
    sorted
        .into_iter()
        .take(k)
        .map(|(s, v)| RankEntry {
            symbol: s.clone(),
            values: v.clone(),
        })
        .collect()
}
