//! Temporal distribution characterization.
//!
//! The series is cut into `N` near-equal minimal units; a split into `K`
//! periods places `K - 1` boundaries on unit edges so that the mean pairwise
//! distance between the periods' feature distributions is as large as
//! possible. The search is greedy: boundaries are inserted one at a time,
//! each at the remaining edge that maximizes the objective of the periods it
//! produces. An exhaustive search is provided as an oracle for small `N`.

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::distances::{DistanceKind, SampleSet};
use crate::error::{Error, Result};
use crate::numgraph::Matrix;

/// Default number of minimal units.
pub const DEFAULT_UNITS: usize = 10;

/// Default candidate period counts.
pub const DEFAULT_K_CANDIDATES: [usize; 5] = [2, 3, 5, 7, 10];

/// Exhaustive search refuses more combinations than this.
pub const BRUTE_FORCE_BUDGET: u128 = 100_000;

/// `N` contiguous units covering `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitPartition {
    /// `N + 1` increasing row offsets, from 0 to `len`.
    pub edges: Vec<usize>,
}

impl UnitPartition {
    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn len(&self) -> usize {
        *self.edges.last().expect("non-empty")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row range spanned by units `units`.
    pub fn rows(&self, units: Range<usize>) -> Range<usize> {
        self.edges[units.start]..self.edges[units.end]
    }
}

/// Splits `len` rows into `n` units whose sizes differ by at most one; the
/// leading units absorb the remainder.
pub fn partition_units(len: usize, n: usize) -> Result<UnitPartition> {
    if n == 0 {
        return Err(Error::Config("unit count must be >= 1".into()));
    }
    if len < n {
        return Err(Error::InputTooShort(format!("{len} steps cannot form {n} units")));
    }
    let (base, extra) = (len / n, len % n);
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(0);
    for u in 0..n {
        let size = base + usize::from(u < extra);
        edges.push(edges[u] + size);
    }
    Ok(UnitPartition { edges })
}

/// A split of the series into `k` periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodSplit {
    pub k: usize,
    /// Row offsets `0 = n_0 < n_1 < ... < n_K = n`.
    pub boundaries: Vec<usize>,
    /// Mean pairwise divergence between the periods.
    pub objective: f64,
    pub distance: DistanceKind,
    /// Unit indices of the boundaries, `0 = u_0 < ... < u_K = N`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unit_boundaries: Vec<usize>,
}

impl PeriodSplit {
    /// Row range of period `i`.
    pub fn period(&self, i: usize) -> Range<usize> {
        self.boundaries[i]..self.boundaries[i + 1]
    }

    /// Groups item indices by the period containing their origin row.
    ///
    /// Origins at or past the last boundary fall into the last period.
    pub fn assign(&self, origins: &[usize]) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &o) in origins.iter().enumerate() {
            let p = self.boundaries[1..self.k].partition_point(|&b| b <= o);
            groups[p].push(i);
        }
        groups
    }

    /// Checks coverage, monotonicity and unit alignment.
    pub fn validate(&self, units: &UnitPartition) -> Result<()> {
        let n = units.count();
        let ok = self.k >= 2
            && self.boundaries.len() == self.k + 1
            && self.unit_boundaries.len() == self.k + 1
            && self.boundaries.first() == Some(&0)
            && self.boundaries.last() == Some(&units.len())
            && self.unit_boundaries.first() == Some(&0)
            && self.unit_boundaries.last() == Some(&n)
            && self.unit_boundaries.windows(2).all(|w| w[0] < w[1] && w[1] - w[0] <= n + 1 - self.k)
            && self
                .unit_boundaries
                .iter()
                .zip(&self.boundaries)
                .all(|(&u, &b)| units.edges[u] == b);
        if ok {
            Ok(())
        } else {
            Err(Error::Contract(format!("invalid period split {:?}", self.unit_boundaries)))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "k": self.k,
            "boundaries": self.boundaries,
            "objective": self.objective,
            "distance": self.distance.name(),
        })
        .to_string()
    }
}

/// One boundary insertion of the greedy search.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    /// Unit edge chosen.
    pub chosen: usize,
    /// Objective of every candidate edge considered, in ascending edge order.
    pub scores: Vec<(usize, f64)>,
}

/// Distance oracle over unit ranges of one series, with memoized period pairs.
pub struct Characterizer<'a> {
    samples: &'a Matrix,
    units: UnitPartition,
    kind: DistanceKind,
    cache: HashMap<(usize, usize, usize, usize), f64>,
    evaluations: usize,
}

impl<'a> Characterizer<'a> {
    /// `samples` holds one feature vector per row; `n_units` is `N`.
    pub fn new(samples: &'a Matrix, n_units: usize, kind: DistanceKind) -> Result<Self> {
        kind.validate()?;
        let units = partition_units(samples.rows(), n_units)?;
        Ok(Characterizer {
            samples,
            units,
            kind,
            cache: HashMap::new(),
            evaluations: 0,
        })
    }

    pub fn units(&self) -> &UnitPartition {
        &self.units
    }

    pub fn kind(&self) -> &DistanceKind {
        &self.kind
    }

    /// Number of objective evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Divergence between the samples of two disjoint unit ranges.
    pub fn period_distance(&mut self, a: Range<usize>, b: Range<usize>) -> Result<f64> {
        if a.is_empty() || b.is_empty() || a.end > self.units.count() || b.end > self.units.count() {
            return Err(Error::Contract(format!("bad unit ranges {a:?} and {b:?}")));
        }
        if a.start < b.end && b.start < a.end {
            return Err(Error::Contract(format!("unit ranges {a:?} and {b:?} overlap")));
        }
        let key = (a.start, a.end, b.start, b.end);
        if let Some(&d) = self.cache.get(&key) {
            return Ok(d);
        }
        let ra = self.units.rows(a);
        let rb = self.units.rows(b);
        let sa = SampleSet::new(self.samples.slice_rows(ra.start, ra.end))?;
        let sb = SampleSet::new(self.samples.slice_rows(rb.start, rb.end))?;
        let d = self.kind.divergence(&sa, &sb)?;
        self.cache.insert(key, d);
        Ok(d)
    }

    /// Mean pairwise divergence of the periods delimited by sorted interior unit edges.
    pub fn objective(&mut self, cuts: &[usize]) -> Result<f64> {
        self.evaluations += 1;
        let edges = self.edges_with(cuts);
        let k = edges.len() - 1;
        let mut total = 0.0;
        for i in 0..k {
            for j in i + 1..k {
                total += self.period_distance(edges[i]..edges[i + 1], edges[j]..edges[j + 1])?;
            }
        }
        Ok(total * 2.0 / (k * (k - 1)) as f64)
    }

    fn edges_with(&self, cuts: &[usize]) -> Vec<usize> {
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(0);
        edges.extend_from_slice(cuts);
        edges.push(self.units.count());
        edges
    }

    fn check_k(&self, k: usize) -> Result<()> {
        let n = self.units.count();
        if k < 2 || k > n {
            return Err(Error::Infeasible(format!("K = {k} periods from {n} units (need 2 <= K <= N)")));
        }
        Ok(())
    }

    fn make_split(&self, cuts: &[usize], objective: f64) -> PeriodSplit {
        let unit_boundaries = self.edges_with(cuts);
        PeriodSplit {
            k: unit_boundaries.len() - 1,
            boundaries: unit_boundaries.iter().map(|&u| self.units.edges[u]).collect(),
            objective,
            distance: self.kind.clone(),
            unit_boundaries,
        }
    }

    /// Greedy insertion of `k - 1` boundaries; ties go to the earliest edge.
    pub fn greedy_split(&mut self, k: usize) -> Result<PeriodSplit> {
        self.greedy_split_traced(k).map(|(s, _)| s)
    }

    /// [`Characterizer::greedy_split`] plus the per-insertion candidate scores.
    pub fn greedy_split_traced(&mut self, k: usize) -> Result<(PeriodSplit, Vec<Insertion>)> {
        self.check_k(k)?;
        let n = self.units.count();
        let mut cuts: Vec<usize> = Vec::with_capacity(k - 1);
        let mut trace = Vec::with_capacity(k - 1);
        let mut objective = 0.0;
        for _ in 1..k {
            let mut best: Option<(usize, f64)> = None;
            let mut scores = Vec::new();
            for c in 1..n {
                if cuts.contains(&c) {
                    continue;
                }
                let mut trial = cuts.clone();
                let pos = trial.partition_point(|&x| x < c);
                trial.insert(pos, c);
                let score = self.objective(&trial)?;
                scores.push((c, score));
                if best.map_or(true, |(_, s)| score > s) {
                    best = Some((c, score));
                }
            }
            let (c, score) = best.expect("K <= N leaves a free edge");
            let pos = cuts.partition_point(|&x| x < c);
            cuts.insert(pos, c);
            objective = score;
            trace.push(Insertion { chosen: c, scores });
        }
        Ok((self.make_split(&cuts, objective), trace))
    }

    /// Exhaustive maximization over every placement of `k - 1` boundaries.
    ///
    /// Ties go to the lexicographically earliest boundary set.
    pub fn brute_force_split(&mut self, k: usize) -> Result<PeriodSplit> {
        self.check_k(k)?;
        let n = self.units.count();
        let combos = binomial((n - 1) as u128, (k - 1) as u128);
        if combos > BRUTE_FORCE_BUDGET {
            return Err(Error::OracleTooLarge {
                combinations: combos,
                budget: BRUTE_FORCE_BUDGET,
            });
        }
        let r = k - 1;
        let mut cuts: Vec<usize> = (1..=r).collect();
        let mut best: Option<(Vec<usize>, f64)> = None;
        loop {
            let score = self.objective(&cuts)?;
            if best.as_ref().map_or(true, |(_, s)| score > *s) {
                best = Some((cuts.clone(), score));
            }
            // Next combination of r values from 1..n in lexicographic order.
            let mut i = r;
            loop {
                if i == 0 {
                    let (c, s) = best.expect("at least one combination");
                    return Ok(self.make_split(&c, s));
                }
                i -= 1;
                if cuts[i] < n - r + i {
                    cuts[i] += 1;
                    for j in i + 1..r {
                        cuts[j] = cuts[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Runs the greedy search for each candidate `K` and keeps the largest
    /// objective; ties prefer the smaller `K`.
    pub fn select_split(&mut self, candidates: &[usize]) -> Result<Selection> {
        if candidates.is_empty() {
            return Err(Error::Config("empty K candidate set".into()));
        }
        let mut ks = candidates.to_vec();
        ks.sort_unstable();
        ks.dedup();
        let mut best: Option<PeriodSplit> = None;
        let mut scores = Vec::with_capacity(ks.len());
        for &k in &ks {
            let split = self.greedy_split(k)?;
            log::info!("tdc: K={k} objective={:.6} boundaries={:?}", split.objective, split.boundaries);
            scores.push((k, split.objective));
            if best.as_ref().map_or(true, |b| split.objective > b.objective) {
                best = Some(split);
            }
        }
        Ok(Selection {
            split: best.expect("non-empty candidates"),
            candidates: scores,
        })
    }
}

/// Result of [`Characterizer::select_split`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub split: PeriodSplit,
    /// `(K, objective)` for every candidate, ascending in `K`.
    pub candidates: Vec<(usize, f64)>,
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

pub fn greedy_split(samples: &Matrix, n_units: usize, k: usize, kind: &DistanceKind) -> Result<PeriodSplit> {
    Characterizer::new(samples, n_units, kind.clone())?.greedy_split(k)
}

pub fn brute_force_split(samples: &Matrix, n_units: usize, k: usize, kind: &DistanceKind) -> Result<PeriodSplit> {
    Characterizer::new(samples, n_units, kind.clone())?.brute_force_split(k)
}

pub fn select_split(samples: &Matrix, n_units: usize, candidates: &[usize], kind: &DistanceKind) -> Result<Selection> {
    Characterizer::new(samples, n_units, kind.clone())?.select_split(candidates)
}

#[cfg(test)]
mod tests;
