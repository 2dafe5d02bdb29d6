//! Risk-estimation criteria, penalties and selection by argmin.
//!
//! All criteria work from per-bin counts. The V-fold quantities on equal
//! blocks go through [`fastvf`](crate::fastvf); [`crit_vf`] instead evaluates
//! the defining averages fold by fold, so the two routes check each other.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::densities::Measure;
use crate::error::{invalid, Error, Result};
use crate::fastvf::{sparse_sums, VfOutputs};
use crate::models::{HistogramModel, ModelCollection};
use crate::projection::{argmin_prefer_small, true_projection, BinnedSample};
use crate::sample::Sample;
use crate::seeding;

/// How points are dealt into blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldScheme {
    /// Consecutive positions; the first `n mod V` blocks get one extra point.
    Contiguous,
    /// A seeded random permutation cut into the contiguous sizes.
    Shuffled(u64),
}

/// A partition of positions `0..n` into `V` blocks whose sizes differ by at most one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPartition {
    n: usize,
    assignment: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl FoldPartition {
    /// Builds a partition from an explicit block label per position.
    pub fn from_assignment(assignment: Vec<usize>, v: usize) -> Result<Self> {
        let n = assignment.len();
        if v < 2 || v > n {
            return Err(invalid(format!("need 2 ≤ V ≤ n, got V = {v}, n = {n}")));
        }
        let mut blocks = vec![Vec::new(); v];
        for (i, &b) in assignment.iter().enumerate() {
            blocks
                .get_mut(b)
                .ok_or_else(|| invalid(format!("block label {b} ≥ V = {v}")))?
                .push(i);
        }
        let min = blocks.iter().map(Vec::len).min().unwrap_or(0);
        let max = blocks.iter().map(Vec::len).max().unwrap_or(0);
        if min == 0 || max - min > 1 {
            return Err(invalid("block sizes must be positive and differ by at most one"));
        }
        Ok(Self {
            n,
            assignment,
            blocks,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn v(&self) -> usize {
        self.blocks.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// All blocks have exactly `n / V` points.
    pub fn exact_reg(&self) -> bool {
        self.n.is_multiple_of(self.blocks.len())
    }
}

pub fn make_folds(n: usize, v: usize, scheme: FoldScheme) -> Result<FoldPartition> {
    if v < 2 || v > n {
        return Err(invalid(format!("need 2 ≤ V ≤ n, got V = {v}, n = {n}")));
    }
    let (base, extra) = (n / v, n % v);
    let mut order: Vec<usize> = (0..n).collect();
    if let FoldScheme::Shuffled(seed) = scheme {
        order.shuffle(&mut seeding::rng(seed));
    }
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for block in 0..v {
        let size = base + usize::from(block < extra);
        for &i in &order[pos..pos + size] {
            assignment[i] = block;
        }
        pos += size;
    }
    FoldPartition::from_assignment(assignment, v)
}

fn check_folds(n: usize, folds: &FoldPartition) -> Result<()> {
    if folds.n() != n {
        return Err(Error::Mismatch(format!(
            "partition covers {} points but the sample has {n}",
            folds.n()
        )));
    }
    Ok(())
}

fn check_multiplier(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(invalid(format!("{what} must be a positive real, got {x}")));
    }
    Ok(())
}

/// Per-block bin counts, row-major `V × d`.
fn block_counts(binned: &BinnedSample<'_>, folds: &FoldPartition) -> Vec<u32> {
    let d = binned.model().dim();
    let mut out = vec![0u32; folds.v() * d];
    for (i, &b) in binned.bins().iter().enumerate() {
        out[folds.assignment()[i] * d + b as usize] += 1;
    }
    out
}

/// Empirical risk and the three V-fold quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VfCriteria {
    pub emp_risk: f64,
    /// Average over blocks of the hold-out criterion trained on the complement.
    pub vfcv: f64,
    /// Bias-corrected V-fold criterion.
    pub corr_vfcv: f64,
    /// V-fold penalty at `x = V − 1`.
    pub pen_base: f64,
}

/// V-fold criteria from their defining averages; valid for unequal blocks too.
pub fn crit_vf(sample: &Sample, model: &HistogramModel, folds: &FoldPartition) -> Result<VfCriteria> {
    check_folds(sample.len(), folds)?;
    Ok(crit_vf_binned(&BinnedSample::from_sample(sample, model), folds))
}

pub fn crit_vf_binned(binned: &BinnedSample<'_>, folds: &FoldPartition) -> VfCriteria {
    let widths = binned.model().widths();
    let d = widths.len();
    let n = binned.n() as f64;
    let counts = binned.counts();
    let per_block = block_counts(binned, folds);
    let (mut vfcv, mut corr_shift, mut pen) = (0.0, 0.0, 0.0);
    for (k, members) in folds.blocks().iter().enumerate() {
        let nk = members.len() as f64;
        let na = n - nk;
        let (mut norm, mut test, mut full) = (0.0, 0.0, 0.0);
        for l in 0..d {
            let ck = per_block[k * d + l] as f64;
            let ca = counts[l] as f64 - ck;
            let train = ca / na;
            norm += train * train / widths[l];
            test += (ck / nk) * train / widths[l];
            full += (counts[l] as f64 / n) * train / widths[l];
        }
        vfcv += norm - 2.0 * test;
        corr_shift += norm - 2.0 * full;
        pen += norm - full;
    }
    let v = folds.v() as f64;
    let emp_risk = binned.empirical_risk();
    VfCriteria {
        emp_risk,
        vfcv: vfcv / v,
        corr_vfcv: vfcv / v + emp_risk - corr_shift / v,
        pen_base: 2.0 * (v - 1.0) / v * pen,
    }
}

/// V-fold penalty at multiplier `x`.
pub fn pen_vf(sample: &Sample, model: &HistogramModel, folds: &FoldPartition, x: f64) -> Result<f64> {
    check_folds(sample.len(), folds)?;
    check_multiplier(x, "penalty multiplier")?;
    Ok(pen_vf_binned(&BinnedSample::from_sample(sample, model), folds, x))
}

pub fn pen_vf_binned(binned: &BinnedSample<'_>, folds: &FoldPartition, x: f64) -> f64 {
    if folds.exact_reg() {
        let (s, t) = sparse_sums(binned, folds);
        VfOutputs::from_sums(s, t, folds.v()).penalty(x)
    } else {
        x / (folds.v() as f64 - 1.0) * crit_vf_binned(binned, folds).pen_base
    }
}

/// Leave-p-out criterion in closed form.
pub fn crit_lpo_closed(sample: &Sample, model: &HistogramModel, p: usize) -> Result<f64> {
    crit_lpo_binned(&BinnedSample::from_sample(sample, model), p)
}

pub fn crit_lpo_binned(binned: &BinnedSample<'_>, p: usize) -> Result<f64> {
    let n = binned.n();
    if n < 2 || p == 0 || p >= n {
        return Err(invalid(format!("leave-p-out needs 1 ≤ p ≤ n − 1, got p = {p}, n = {n}")));
    }
    let (nf, pf) = (n as f64, p as f64);
    let ratio = (nf - pf + 1.0) / (nf - 1.0);
    let sum: f64 = binned
        .counts()
        .iter()
        .zip(binned.model().widths())
        .map(|(&c, w)| {
            let c = c as f64;
            (c - ratio * (c * c - c)) / w
        })
        .sum();
    Ok(sum / (nf * (nf - pf)))
}

/// A training subset given by positions; its complement is the test set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HoldOutSet {
    mask: Vec<bool>,
    size: usize,
}

impl HoldOutSet {
    pub fn new(n: usize, positions: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n];
        for &i in positions {
            let slot = mask
                .get_mut(i)
                .ok_or_else(|| invalid(format!("position {i} outside the sample of size {n}")))?;
            if *slot {
                return Err(invalid(format!("position {i} listed twice")));
            }
            *slot = true;
        }
        let size = positions.len();
        if size == 0 || size == n {
            return Err(invalid("training set and its complement must both be nonempty"));
        }
        Ok(Self { mask, size })
    }

    /// The first `⌈τ n⌉` positions.
    pub fn leading(n: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(invalid(format!("training fraction must lie in (0, 1), got {tau}")));
        }
        let t = (tau * n as f64 - 1e-9).ceil() as usize;
        Self::new(n, &(0..t).collect::<Vec<_>>())
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|b| !b).collect(),
            size: self.mask.len() - self.size,
        }
    }

    pub fn n(&self) -> usize {
        self.mask.len()
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    fn split_counts(&self, binned: &BinnedSample<'_>) -> (Vec<u32>, Vec<u32>) {
        let d = binned.model().dim();
        let mut inside = vec![0u32; d];
        let mut outside = vec![0u32; d];
        for (&b, &m) in binned.bins().iter().zip(&self.mask) {
            if m {
                inside[b as usize] += 1;
            } else {
                outside[b as usize] += 1;
            }
        }
        (inside, outside)
    }
}

fn check_holdout(n: usize, set: &HoldOutSet) -> Result<()> {
    if set.n() != n {
        return Err(Error::Mismatch(format!(
            "hold-out set is defined on {} points but the sample has {n}",
            set.n()
        )));
    }
    Ok(())
}

/// Hold-out criterion: train on the set, test on its complement.
pub fn crit_ho(sample: &Sample, model: &HistogramModel, train: &HoldOutSet) -> Result<f64> {
    check_holdout(sample.len(), train)?;
    Ok(crit_ho_binned(&BinnedSample::from_sample(sample, model), train))
}

pub fn crit_ho_binned(binned: &BinnedSample<'_>, train: &HoldOutSet) -> f64 {
    let (inside, outside) = train.split_counts(binned);
    let t = train.size() as f64;
    let tc = (train.n() - train.size()) as f64;
    inside
        .iter()
        .zip(&outside)
        .zip(binned.model().widths())
        .map(|((&a, &b), w)| {
            let fit = a as f64 / t;
            (fit * fit - 2.0 * (b as f64 / tc) * fit) / w
        })
        .sum()
}

/// `Σ_λ ((P^T − P^{Tᶜ}) ψ_λ)²`, symmetric in the set and its complement.
fn split_gap(binned: &BinnedSample<'_>, train: &HoldOutSet) -> f64 {
    let (inside, outside) = train.split_counts(binned);
    let t = train.size() as f64;
    let tc = (train.n() - train.size()) as f64;
    inside
        .iter()
        .zip(&outside)
        .zip(binned.model().widths())
        .map(|((&a, &b), w)| {
            let g = a as f64 / t - b as f64 / tc;
            g * g / w
        })
        .sum()
}

/// Hold-out penalty `2x (P^T − P_n)(ŝ^T − ŝ)` at multiplier `x`.
pub fn pen_ho(sample: &Sample, model: &HistogramModel, train: &HoldOutSet, x: f64) -> Result<f64> {
    check_holdout(sample.len(), train)?;
    check_multiplier(x, "penalty multiplier")?;
    let binned = BinnedSample::from_sample(sample, model);
    let tau_c = (train.n() - train.size()) as f64 / train.n() as f64;
    Ok(2.0 * x * tau_c * tau_c * split_gap(&binned, train))
}

/// Hold-out penalty at `x = C τ / (1 − τ)`, whose expectation is `2 C D_m / n`.
pub fn pen_ho_c(sample: &Sample, model: &HistogramModel, train: &HoldOutSet, c: f64) -> Result<f64> {
    check_holdout(sample.len(), train)?;
    check_multiplier(c, "C")?;
    Ok(pen_ho_c_binned(&BinnedSample::from_sample(sample, model), train, c))
}

pub fn pen_ho_c_binned(binned: &BinnedSample<'_>, train: &HoldOutSet, c: f64) -> f64 {
    let n = train.n() as f64;
    let prod = (train.size() * (train.n() - train.size())) as f64;
    2.0 * c * prod / (n * n) * split_gap(binned, train)
}

pub fn pen_dim(model: &HistogramModel, n: usize) -> f64 {
    2.0 * model.dim() as f64 / n as f64
}

/// Empirical risk plus `C` times the expected ideal penalty `2 D_m / n`.
pub fn crit_ideal_expected<M: Measure + ?Sized>(
    sample: &Sample,
    model: &HistogramModel,
    d: &M,
    c: f64,
) -> Result<f64> {
    check_multiplier(c, "C")?;
    let binned = BinnedSample::from_sample(sample, model);
    let d_cal = true_projection(d, model).d_cal;
    Ok(binned.empirical_risk() + c * 2.0 * d_cal / sample.len() as f64)
}

/// Number of blocks, possibly tied to the sample size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldCount {
    Fixed(usize),
    /// `V = n`, leave-one-out.
    SampleSize,
}

impl FoldCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            FoldCount::Fixed(v) => v,
            FoldCount::SampleSize => n,
        }
    }
}

impl fmt::Display for FoldCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldCount::Fixed(v) => write!(f, "{v}"),
            FoldCount::SampleSize => f.write_str("n"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CriterionKind {
    Vfcv { v: FoldCount },
    CorrVfcv { v: FoldCount },
    PenVf { v: FoldCount, c: f64 },
    Lpo { p: usize },
    HoldOut { tau: f64 },
    PenHo { tau: f64, c: f64 },
    PenDim,
    Ideal { c: f64 },
}

/// A criterion and its over-penalization factor.
///
/// The factor multiplies the penalty part only: the criterion becomes
/// `emp_risk + over · (criterion − emp_risk)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriterionSpec {
    pub kind: CriterionKind,
    pub overpen: f64,
}

/// Criterion names accepted by the parser.
pub const CRITERION_NAMES: [&str; 8] = [
    "vfcv", "corrvfcv", "penvf", "lpo", "holdout", "penho", "pendim", "ideal",
];

impl CriterionSpec {
    pub fn new(kind: CriterionKind) -> Self {
        Self { kind, overpen: 1.0 }
    }

    pub fn with_overpen(mut self, overpen: f64) -> Self {
        self.overpen = overpen;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            CriterionKind::Vfcv { .. } => "vfcv",
            CriterionKind::CorrVfcv { .. } => "corrvfcv",
            CriterionKind::PenVf { .. } => "penvf",
            CriterionKind::Lpo { .. } => "lpo",
            CriterionKind::HoldOut { .. } => "holdout",
            CriterionKind::PenHo { .. } => "penho",
            CriterionKind::PenDim => "pendim",
            CriterionKind::Ideal { .. } => "ideal",
        }
    }

    /// Number of blocks used, if this is a V-fold criterion.
    pub fn folds(&self, n: usize) -> Option<usize> {
        match self.kind {
            CriterionKind::Vfcv { v }
            | CriterionKind::CorrVfcv { v }
            | CriterionKind::PenVf { v, .. } => Some(v.resolve(n)),
            _ => None,
        }
    }

    pub fn needs_density(&self) -> bool {
        matches!(self.kind, CriterionKind::Ideal { .. })
    }

    /// Checks the parameters against a sample size.
    pub fn validate(&self, n: usize) -> Result<()> {
        check_multiplier(self.overpen, "over-penalization factor")?;
        if let Some(v) = self.folds(n) {
            if v < 2 || v > n {
                return Err(invalid(format!("{self}: need 2 ≤ V ≤ n = {n}")));
            }
        }
        match self.kind {
            CriterionKind::PenVf { c, .. }
            | CriterionKind::PenHo { c, .. }
            | CriterionKind::Ideal { c } => check_multiplier(c, "C")?,
            CriterionKind::Lpo { p } if p == 0 || p >= n => {
                return Err(invalid(format!("{self}: need 1 ≤ p ≤ n − 1 = {}", n.saturating_sub(1))));
            }
            _ => {}
        }
        if let CriterionKind::HoldOut { tau } | CriterionKind::PenHo { tau, .. } = self.kind {
            HoldOutSet::leading(n, tau)?;
        }
        Ok(())
    }

    /// The constant `C` and block count with which this criterion matches
    /// `emp_risk + pen_VF(C (V − 1))` in expectation and variance.
    pub fn vfold_equivalent(&self, n: usize) -> Option<(usize, f64)> {
        let vfcv_c = |v: usize| 1.0 + 1.0 / (2.0 * (v as f64 - 1.0));
        let (v, c) = match self.kind {
            CriterionKind::Vfcv { v } => {
                let v = v.resolve(n);
                (v, vfcv_c(v))
            }
            CriterionKind::CorrVfcv { v } => (v.resolve(n), 1.0),
            CriterionKind::PenVf { v, c } => (v.resolve(n), c),
            // Leave-p-out is the leave-one-out penalty with the constant that
            // matches training on n − p points.
            CriterionKind::Lpo { p } => (n, 1.0 + p as f64 / (2.0 * (n - p) as f64)),
            _ => return None,
        };
        Some((v, self.overpen * c))
    }
}

impl fmt::Display for CriterionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut params: Vec<String> = Vec::new();
        match self.kind {
            CriterionKind::Vfcv { v } | CriterionKind::CorrVfcv { v } => params.push(format!("V={v}")),
            CriterionKind::PenVf { v, c } => {
                params.push(format!("V={v}"));
                params.push(format!("C={c}"));
            }
            CriterionKind::Lpo { p } => params.push(format!("p={p}")),
            CriterionKind::HoldOut { tau } => params.push(format!("tau={tau}")),
            CriterionKind::PenHo { tau, c } => {
                params.push(format!("tau={tau}"));
                params.push(format!("C={c}"));
            }
            CriterionKind::PenDim => {}
            CriterionKind::Ideal { c } => params.push(format!("C={c}")),
        }
        if self.overpen != 1.0 {
            params.push(format!("over={}", self.overpen));
        }
        f.write_str(self.name())?;
        if !params.is_empty() {
            write!(f, ":{}", params.join(","))?;
        }
        Ok(())
    }
}

impl FromStr for CriterionSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, rest) = match text.split_once(':') {
            Some((a, b)) => (a.trim(), b.trim()),
            None => (text, ""),
        };
        let mut params: BTreeMap<&str, &str> = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("{text:?}: expected key=value, got {item:?}")))?;
            if params.insert(k.trim(), v.trim()).is_some() {
                return Err(Error::Parse(format!("{text:?}: parameter {k} given twice")));
            }
        }
        let allowed: &[&str] = match name {
            "vfcv" | "corrvfcv" => &["V", "over"],
            "penvf" => &["V", "C", "over"],
            "lpo" => &["p", "over"],
            "holdout" => &["tau", "over"],
            "penho" => &["tau", "C", "over"],
            "pendim" => &["over"],
            "ideal" => &["C", "over"],
            _ => {
                return Err(Error::Parse(format!(
                    "unknown criterion {name:?}; expected one of {}",
                    CRITERION_NAMES.join(", ")
                )))
            }
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(k)) {
            return Err(Error::Parse(format!(
                "{text:?}: unknown parameter {k:?} for {name} (allowed: {})",
                allowed.join(", ")
            )));
        }
        let real = |key: &str, default: Option<f64>| -> Result<f64> {
            match params.get(key) {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Parse(format!("{text:?}: {key} must be a real number"))),
                None => default.ok_or_else(|| Error::Parse(format!("{text:?}: missing {key}"))),
            }
        };
        let folds = || -> Result<FoldCount> {
            match params.get("V") {
                Some(&"n") => Ok(FoldCount::SampleSize),
                Some(v) => v
                    .parse()
                    .map(FoldCount::Fixed)
                    .map_err(|_| Error::Parse(format!("{text:?}: V must be an integer or n"))),
                None => Err(Error::Parse(format!("{text:?}: missing V"))),
            }
        };
        let kind = match name {
            "vfcv" => CriterionKind::Vfcv { v: folds()? },
            "corrvfcv" => CriterionKind::CorrVfcv { v: folds()? },
            "penvf" => CriterionKind::PenVf {
                v: folds()?,
                c: real("C", Some(1.0))?,
            },
            "lpo" => CriterionKind::Lpo {
                p: params
                    .get("p")
                    .ok_or_else(|| Error::Parse(format!("{text:?}: missing p")))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("{text:?}: p must be an integer")))?,
            },
            "holdout" => CriterionKind::HoldOut {
                tau: real("tau", Some(0.5))?,
            },
            "penho" => CriterionKind::PenHo {
                tau: real("tau", Some(0.5))?,
                c: real("C", Some(1.0))?,
            },
            "pendim" => CriterionKind::PenDim,
            _ => CriterionKind::Ideal {
                c: real("C", Some(1.0))?,
            },
        };
        let spec = CriterionSpec {
            kind,
            overpen: real("over", Some(1.0))?,
        };
        check_multiplier(spec.overpen, "over-penalization factor")
            .map_err(|e| Error::Parse(e.to_string()))?;
        if let CriterionKind::PenVf { c, .. } | CriterionKind::PenHo { c, .. } | CriterionKind::Ideal { c } = kind {
            check_multiplier(c, "C").map_err(|e| Error::Parse(format!("{text:?}: {e}")))?;
        }
        Ok(spec)
    }
}

/// Parses a list separated by `;`.
pub fn parse_spec_list(text: &str) -> Result<Vec<CriterionSpec>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// The procedure menu of the reference simulation study: four
/// over-penalization factors for each penalty, plus plain V-fold CV.
pub fn default_procedures() -> Vec<CriterionSpec> {
    let mut out = Vec::new();
    for over in [1.0, 1.25, 1.5, 2.0] {
        out.push(CriterionSpec::new(CriterionKind::Ideal { c: 1.0 }).with_overpen(over));
        out.push(CriterionSpec::new(CriterionKind::PenDim).with_overpen(over));
        for v in [FoldCount::SampleSize, FoldCount::Fixed(10), FoldCount::Fixed(5), FoldCount::Fixed(2)] {
            out.push(CriterionSpec::new(CriterionKind::PenVf { v, c: 1.0 }).with_overpen(over));
        }
    }
    for v in [FoldCount::Fixed(10), FoldCount::Fixed(5), FoldCount::Fixed(2)] {
        out.push(CriterionSpec::new(CriterionKind::Vfcv { v }));
    }
    out
}

/// Evaluates a fixed list of criteria for one sample size, sharing the
/// partitions and the per-model V-fold sums between them.
pub struct Evaluator {
    n: usize,
    specs: Vec<CriterionSpec>,
    partitions: BTreeMap<usize, FoldPartition>,
    holdouts: Vec<Option<HoldOutSet>>,
}

impl Evaluator {
    pub fn new(specs: &[CriterionSpec], n: usize) -> Result<Self> {
        let mut partitions = BTreeMap::new();
        let mut holdouts = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate(n)?;
            if let Some(v) = spec.folds(n) {
                if let std::collections::btree_map::Entry::Vacant(e) = partitions.entry(v) {
                    e.insert(make_folds(n, v, FoldScheme::Contiguous)?);
                }
            }
            holdouts.push(match spec.kind {
                CriterionKind::HoldOut { tau } | CriterionKind::PenHo { tau, .. } => {
                    Some(HoldOutSet::leading(n, tau)?)
                }
                _ => None,
            });
        }
        Ok(Self {
            n,
            specs: specs.to_vec(),
            partitions,
            holdouts,
        })
    }

    pub fn specs(&self) -> &[CriterionSpec] {
        &self.specs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn needs_density(&self) -> bool {
        self.specs.iter().any(CriterionSpec::needs_density)
    }

    /// Every criterion value for one model. `d_cal` is required by the
    /// expected-ideal-penalty criterion only.
    pub fn evaluate(&self, binned: &BinnedSample<'_>, d_cal: Option<f64>) -> Result<Vec<f64>> {
        if binned.n() != self.n {
            return Err(Error::Mismatch(format!(
                "evaluator built for n = {} but sample has {}",
                self.n,
                binned.n()
            )));
        }
        let nf = self.n as f64;
        let emp = binned.empirical_risk();
        let mut vf_cache: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
        let mut vf = |v: usize| -> (f64, f64, f64) {
            *vf_cache.entry(v).or_insert_with(|| {
                let folds = &self.partitions[&v];
                if folds.exact_reg() {
                    let (s, t) = sparse_sums(binned, folds);
                    let out = VfOutputs::from_sums(s, t, v);
                    (out.vfcv, out.corr_vfcv(), out.pen_corrected)
                } else {
                    let c = crit_vf_binned(binned, folds);
                    (c.vfcv, c.corr_vfcv, c.pen_base)
                }
            })
        };
        self.specs
            .iter()
            .zip(&self.holdouts)
            .map(|(spec, holdout)| {
                let raw = match spec.kind {
                    CriterionKind::Vfcv { v } => vf(v.resolve(self.n)).0,
                    CriterionKind::CorrVfcv { v } => vf(v.resolve(self.n)).1,
                    CriterionKind::PenVf { v, c } => emp + c * vf(v.resolve(self.n)).2,
                    CriterionKind::Lpo { p } => crit_lpo_binned(binned, p)?,
                    CriterionKind::HoldOut { .. } => {
                        crit_ho_binned(binned, holdout.as_ref().expect("hold-out set"))
                    }
                    CriterionKind::PenHo { c, .. } => {
                        emp + pen_ho_c_binned(binned, holdout.as_ref().expect("hold-out set"), c)
                    }
                    CriterionKind::PenDim => emp + pen_dim(binned.model(), self.n),
                    CriterionKind::Ideal { c } => {
                        let d_cal = d_cal.ok_or_else(|| {
                            invalid(format!("{spec} needs the true density"))
                        })?;
                        emp + c * 2.0 * d_cal / nf
                    }
                };
                Ok(emp + spec.overpen * (raw - emp))
            })
            .collect()
    }
}

/// Criterion values over a collection, in collection order.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionTable {
    pub spec: CriterionSpec,
    pub n: usize,
    pub values: Vec<f64>,
}

pub fn compute_table(
    spec: &CriterionSpec,
    sample: &Sample,
    collection: &ModelCollection,
    density: Option<&dyn Measure>,
) -> Result<CriterionTable> {
    let n = sample.len();
    let eval = Evaluator::new(std::slice::from_ref(spec), n)?;
    if spec.needs_density() && density.is_none() {
        return Err(invalid(format!("{spec} needs the true density")));
    }
    let values = collection
        .models()
        .par_iter()
        .map(|m| {
            let binned = BinnedSample::from_sample(sample, m);
            let d_cal = density.map(|d| true_projection(d, m).d_cal);
            Ok(eval.evaluate(&binned, d_cal)?[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CriterionTable {
        spec: *spec,
        n,
        values,
    })
}

/// Index of the selected model; ties go to the smaller dimension, then to
/// the earlier position.
pub fn select(table: &CriterionTable, collection: &ModelCollection) -> Result<usize> {
    if table.values.len() != collection.len() {
        return Err(Error::Mismatch(format!(
            "table has {} values for {} models",
            table.values.len(),
            collection.len()
        )));
    }
    argmin_prefer_small(&table.values, &collection.dims())
        .ok_or_else(|| invalid("no finite criterion value to minimize"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::TrueDensity;
    use crate::models::regu_collection;

    #[test]
    fn fold_sizes() {
        let f = make_folds(10, 5, FoldScheme::Contiguous).unwrap();
        assert!(f.exact_reg());
        assert!(f.blocks().iter().all(|b| b.len() == 2));
        let f = make_folds(10, 4, FoldScheme::Contiguous).unwrap();
        assert!(!f.exact_reg());
        let sizes: Vec<usize> = f.blocks().iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![3, 3, 2, 2]);
        let loo = make_folds(7, 7, FoldScheme::Contiguous).unwrap();
        assert!(loo.blocks().iter().all(|b| b.len() == 1));
        assert!(make_folds(5, 6, FoldScheme::Contiguous).is_err());
        assert!(make_folds(5, 1, FoldScheme::Contiguous).is_err());
        let sh = make_folds(10, 4, FoldScheme::Shuffled(3)).unwrap();
        let mut sizes: Vec<usize> = sh.blocks().iter().map(Vec::len).collect();
        sizes.sort();
        assert_eq!(sizes, vec![2, 2, 3, 3]);
    }

    #[test]
    fn single_bin_criteria() {
        let m = HistogramModel::regular(1).unwrap();
        let s = TrueDensity::uniform().sample(12, 4).unwrap();
        let f = make_folds(12, 3, FoldScheme::Contiguous).unwrap();
        let c = crit_vf(&s, &m, &f).unwrap();
        for v in [c.emp_risk, c.vfcv, c.corr_vfcv] {
            assert!((v + 1.0).abs() < 1e-12);
        }
        assert!(pen_vf(&s, &m, &f, 3.0).unwrap().abs() < 1e-12);
        for p in 1..12 {
            assert!((crit_lpo_closed(&s, &m, p).unwrap() + 1.0).abs() < 1e-12);
        }
        let t = HoldOutSet::leading(12, 0.25).unwrap();
        assert!((crit_ho(&s, &m, &t).unwrap() + 1.0).abs() < 1e-12);
        assert!(pen_ho(&s, &m, &t, 1.0).unwrap().abs() < 1e-12);
        let u = TrueDensity::uniform();
        assert!((crit_ideal_expected(&s, &m, &u, 2.0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pen_dim_values() {
        let m1 = HistogramModel::regular(1).unwrap();
        let m50 = HistogramModel::regular(50).unwrap();
        assert_eq!(pen_dim(&m1, 100), 0.02);
        assert_eq!(pen_dim(&m50, 500), 0.2);
    }

    #[test]
    fn errors_on_bad_inputs() {
        let m = HistogramModel::regular(2).unwrap();
        let s = TrueDensity::uniform().sample(10, 1).unwrap();
        let f = make_folds(12, 3, FoldScheme::Contiguous).unwrap();
        assert!(matches!(pen_vf(&s, &m, &f, 1.0), Err(Error::Mismatch(_))));
        let f = make_folds(10, 5, FoldScheme::Contiguous).unwrap();
        assert!(pen_vf(&s, &m, &f, 0.0).is_err());
        assert!(crit_lpo_closed(&s, &m, 0).is_err());
        assert!(crit_lpo_closed(&s, &m, 10).is_err());
        assert!(HoldOutSet::new(10, &[]).is_err());
        assert!(HoldOutSet::new(10, &(0..10).collect::<Vec<_>>()).is_err());
        assert!(HoldOutSet::new(10, &[1, 1]).is_err());
        assert!(HoldOutSet::new(10, &[11]).is_err());
    }

    #[test]
    fn spec_grammar() {
        let cases = [
            "vfcv:V=5",
            "corrvfcv:V=10",
            "penvf:V=5,C=1,over=1.5",
            "penvf:V=n,C=1.25",
            "lpo:p=25",
            "penho:tau=0.5,C=1",
            "holdout:tau=0.25",
            "pendim",
            "ideal:C=1",
        ];
        for text in cases {
            let spec: CriterionSpec = text.parse().unwrap();
            let back: CriterionSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, back, "{text}");
        }
        let s: CriterionSpec = "penvf:V=5,C=1,over=1.5".parse().unwrap();
        assert_eq!(
            s.kind,
            CriterionKind::PenVf {
                v: FoldCount::Fixed(5),
                c: 1.0
            }
        );
        assert_eq!(s.overpen, 1.5);
        for bad in ["vfcv", "penvf:V=5,K=2", "lpo:p=x", "nope:V=2", "pendim:over=-1", "vfcv:V=5,V=6"] {
            assert!(bad.parse::<CriterionSpec>().is_err(), "{bad}");
        }
        assert_eq!(parse_spec_list("vfcv:V=5; pendim").unwrap().len(), 2);
        assert_eq!(default_procedures().len(), 27);
    }

    #[test]
    fn over_penalization_scales_penalty_only() {
        let c = regu_collection(10).unwrap();
        let s = TrueDensity::uniform().sample(40, 2).unwrap();
        let plain = compute_table(&"penvf:V=5".parse().unwrap(), &s, &c, None).unwrap();
        let over = compute_table(&"penvf:V=5,over=2".parse().unwrap(), &s, &c, None).unwrap();
        for (m, (a, b)) in c.models().iter().zip(plain.values.iter().zip(&over.values)) {
            let emp = BinnedSample::from_sample(&s, m).empirical_risk();
            assert!(((b - emp) - 2.0 * (a - emp)).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_ties_and_shifts() {
        let c = regu_collection(6).unwrap();
        let table = CriterionTable {
            spec: CriterionSpec::new(CriterionKind::PenDim),
            n: 6,
            values: vec![0.0; 6],
        };
        assert_eq!(select(&table, &c).unwrap(), 0);
        let s = TrueDensity::uniform().sample(60, 5).unwrap();
        let t = compute_table(&"vfcv:V=5".parse().unwrap(), &s, &c, None).unwrap();
        let mut shifted = t.clone();
        shifted.values.iter_mut().for_each(|v| *v += 3.5);
        assert_eq!(select(&t, &c).unwrap(), select(&shifted, &c).unwrap());
        let short = CriterionTable {
            values: vec![0.0],
            ..t
        };
        assert!(select(&short, &c).is_err());
        assert!(compute_table(&"ideal".parse().unwrap(), &s, &c, None).is_err());
    }
}
