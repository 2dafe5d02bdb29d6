//! Gaussian proxy for selection probabilities.
//!
//! Model `m` beats `m'` when the increment `crit(m) − crit(m')` is negative.
//! Treating each increment as Gaussian, the chance that `m` survives its
//! strongest competitor is `Φ̄(SR(m))` with
//! `SR(m) = max_{m' ≠ m} E[Δ(m, m')] / √Var(Δ(m, m'))`.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::criteria::{CriterionKind, CriterionSpec, Evaluator};
use crate::densities::{CdfCache, Measure, TrueDensity};
use crate::error::{invalid, Error, Result};
use crate::models::{HistogramModel, ModelCollection};
use crate::projection::{argmin_prefer_small, true_projection, BinnedSample, ProjectionStats};
use crate::seeding;
use crate::variance;

/// Standard normal upper tail `P(Z > t)`; accepts `±∞`.
pub fn phi_bar(t: f64) -> f64 {
    if t == f64::INFINITY {
        0.0
    } else if t == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(t / SQRT_2)
    }
}

/// `mean / sd`, with `+∞` for a certain positive increment and `−∞` for a
/// certain nonpositive one.
pub fn signal_ratio(mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        mean / var.sqrt()
    } else if mean > 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Mean and variance structure of a criterion's increments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Procedure {
    /// `emp + pen_VF(C (V − 1))`.
    VFold { v: usize, c: f64 },
    /// `emp + pen_HO(T, C τ / (1 − τ))`.
    HoldOut { tau: f64, c: f64 },
    /// `emp + C · 2 D_m / n`.
    Ideal { c: f64 },
    /// `emp + factor · 2 d_m / n`.
    Dimension { factor: f64 },
}

impl Procedure {
    pub fn from_spec(spec: &CriterionSpec, n: usize) -> Result<Self> {
        spec.validate(n)?;
        if let Some(v) = spec.folds(n).filter(|v| !n.is_multiple_of(*v)) {
            return Err(invalid(format!(
                "{spec}: the closed-form variance needs equal blocks, but V = {v} does not divide n = {n}"
            )));
        }
        if let Some((v, c)) = spec.vfold_equivalent(n) {
            return Ok(Procedure::VFold { v, c });
        }
        match spec.kind {
            CriterionKind::PenHo { tau, c } => Ok(Procedure::HoldOut {
                tau,
                c: spec.overpen * c,
            }),
            CriterionKind::Ideal { c } => Ok(Procedure::Ideal { c: spec.overpen * c }),
            CriterionKind::PenDim => Ok(Procedure::Dimension {
                factor: spec.overpen,
            }),
            _ => Err(invalid(format!(
                "{spec}: no closed-form increment variance for this criterion"
            ))),
        }
    }

    fn mean_delta(&self, a: &ProjectionStats, b: &ProjectionStats, n: usize) -> f64 {
        let nf = n as f64;
        let bias = b.norm_sm_sq - a.norm_sm_sq;
        match *self {
            Procedure::VFold { c, .. } | Procedure::HoldOut { c, .. } | Procedure::Ideal { c } => {
                bias + (2.0 * c - 1.0) * (a.d_cal - b.d_cal) / nf
            }
            Procedure::Dimension { factor } => {
                bias - (a.d_cal - b.d_cal) / nf
                    + factor * 2.0 * (a.dim() as f64 - b.dim() as f64) / nf
            }
        }
    }

    fn var_delta<M: Measure + ?Sized>(
        &self,
        d: &M,
        m1: &HistogramModel,
        m2: &HistogramModel,
        n: usize,
    ) -> Result<f64> {
        let r = match *self {
            Procedure::VFold { v, c } => variance::var_increment(d, m1, m2, n, v, c)?,
            Procedure::HoldOut { tau, c } => variance::var_holdout(d, m1, m2, n, tau, c)?,
            Procedure::Ideal { .. } | Procedure::Dimension { .. } => {
                variance::var_ideal(d, m1, m2, n)?
            }
        };
        Ok(r.analytic)
    }
}

/// `SR(m)` and the competitor attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SrEntry {
    pub sr: f64,
    pub competitor: usize,
}

fn sr_with<M: Measure + ?Sized>(
    d: &M,
    collection: &ModelCollection,
    stats: &[ProjectionStats],
    index: usize,
    n: usize,
    procedure: Procedure,
) -> Result<SrEntry> {
    let models = collection.models();
    let mut best = SrEntry {
        sr: f64::NEG_INFINITY,
        competitor: index,
    };
    for (j, other) in models.iter().enumerate() {
        if j == index {
            continue;
        }
        let mean = procedure.mean_delta(&stats[index], &stats[j], n);
        let var = procedure.var_delta(d, &models[index], other, n)?;
        let r = signal_ratio(mean, var);
        if r > best.sr || best.competitor == index {
            best = SrEntry { sr: r, competitor: j };
        }
    }
    Ok(best)
}

/// `SR(m)` for the model at `index` under a V-fold criterion with constant `C`.
pub fn sr(
    d: &TrueDensity,
    collection: &ModelCollection,
    index: usize,
    n: usize,
    v: usize,
    c: f64,
) -> Result<f64> {
    if collection.len() < 2 {
        return Err(invalid("the signal ratio needs at least two models"));
    }
    if index >= collection.len() {
        return Err(invalid(format!("model index {index} out of range")));
    }
    let stats: Vec<ProjectionStats> = collection
        .models()
        .iter()
        .map(|m| true_projection(d, m))
        .collect();
    Ok(sr_with(d, collection, &stats, index, n, Procedure::VFold { v, c })?.sr)
}

/// `SR(m)` for every model, in parallel.
pub fn sr_all(
    d: &TrueDensity,
    collection: &ModelCollection,
    n: usize,
    procedure: Procedure,
) -> Result<Vec<SrEntry>> {
    if collection.len() < 2 {
        return Err(invalid("the signal ratio needs at least two models"));
    }
    let cache = CdfCache::new(d, collection.all_breakpoints());
    let stats: Vec<ProjectionStats> = collection
        .models()
        .iter()
        .map(|m| true_projection(&cache, m))
        .collect();
    (0..collection.len())
        .into_par_iter()
        .map(|i| sr_with(&cache, collection, &stats, i, n, procedure))
        .collect()
}

/// Index of the model with smallest expected loss `‖s − s_m‖² + D_m / n`.
pub fn m_star<M: Measure + ?Sized>(d: &M, collection: &ModelCollection, n: usize) -> usize {
    let risks: Vec<f64> = collection
        .models()
        .iter()
        .map(|m| true_projection(d, m).expected_loss(n))
        .collect();
    argmin_prefer_small(&risks, &collection.dims()).expect("nonempty collection")
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicRow {
    pub index: usize,
    pub dim: usize,
    pub sr: f64,
    /// `Φ̄(SR)`, renormalized to sum one when requested.
    pub phi_bar: f64,
    pub freq: f64,
    pub freq_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicReport {
    pub spec: CriterionSpec,
    pub n: usize,
    pub reps: usize,
    pub renormalized: bool,
    pub m_star: usize,
    pub rows: Vec<HeuristicRow>,
}

/// Empirical distribution of the selected model over `reps` seeded samples,
/// alongside the analytic proxy.
pub fn selection_distribution(
    d: &TrueDensity,
    collection: &ModelCollection,
    n: usize,
    spec: &CriterionSpec,
    reps: usize,
    seed: u64,
    renormalize: bool,
) -> Result<HeuristicReport> {
    if reps == 0 {
        return Err(invalid("need at least one replicate"));
    }
    let procedure = Procedure::from_spec(spec, n)?;
    let srs = sr_all(d, collection, n, procedure)?;
    let counts = selection_counts(d, collection, n, spec, reps, seed)?;
    let mut phi: Vec<f64> = srs.iter().map(|e| phi_bar(e.sr)).collect();
    if renormalize {
        let total: f64 = phi.iter().sum();
        if total > 0.0 {
            phi.iter_mut().for_each(|p| *p /= total);
        }
    }
    let rf = reps as f64;
    let rows = collection
        .models()
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let freq = counts[i] as f64 / rf;
            HeuristicRow {
                index: i,
                dim: m.dim(),
                sr: srs[i].sr,
                phi_bar: phi[i],
                freq,
                freq_se: (freq * (1.0 - freq) / rf).sqrt(),
            }
        })
        .collect();
    Ok(HeuristicReport {
        spec: *spec,
        n,
        reps,
        renormalized: renormalize,
        m_star: m_star(d, collection, n),
        rows,
    })
}

/// How often each model is selected over `reps` seeded samples.
pub fn selection_counts(
    d: &TrueDensity,
    collection: &ModelCollection,
    n: usize,
    spec: &CriterionSpec,
    reps: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let eval = Evaluator::new(std::slice::from_ref(spec), n)?;
    let d_cals: Option<Vec<f64>> = eval.needs_density().then(|| {
        collection
            .models()
            .iter()
            .map(|m| true_projection(d, m).d_cal)
            .collect()
    });
    let dims = collection.dims();
    let picks = seeding::par_replicates(seed, reps, |_, rng| -> Result<usize> {
        let xs = d.draw_many(rng, n);
        let values = collection
            .models()
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let binned = BinnedSample::new(&xs, m);
                Ok(eval.evaluate(&binned, d_cals.as_ref().map(|v| v[i]))?[0])
            })
            .collect::<Result<Vec<f64>>>()?;
        argmin_prefer_small(&values, &dims).ok_or_else(|| Error::Invalid("no finite value".into()))
    });
    let mut counts = vec![0usize; collection.len()];
    for pick in picks {
        counts[pick?] += 1;
    }
    Ok(counts)
}
