//! Projection estimators on histogram models and the population quantities
//! that describe them.
//!
//! With the orthonormal basis `ψ_λ = 1_λ / √μ(λ)`, the estimator on model `m`
//! has coefficients `α_λ = n_λ / (n √μ(λ))` and the empirical least-squares
//! risk at the minimizer is `−Σ α_λ²`.

use crate::densities::Measure;
use crate::error::{invalid, Result};
use crate::models::{HistogramModel, ModelCollection};
use crate::sample::Sample;

/// Bin membership of every sample point for one model.
#[derive(Clone, Debug)]
pub struct BinnedSample<'m> {
    model: &'m HistogramModel,
    bins: Vec<u32>,
    counts: Vec<u32>,
}

impl<'m> BinnedSample<'m> {
    pub fn new(values: &[f64], model: &'m HistogramModel) -> Self {
        let mut counts = vec![0u32; model.dim()];
        let bins = values
            .iter()
            .map(|&x| {
                let b = model.bin_of(x);
                counts[b] += 1;
                b as u32
            })
            .collect();
        Self {
            model,
            bins,
            counts,
        }
    }

    pub fn from_sample(sample: &Sample, model: &'m HistogramModel) -> Self {
        Self::new(sample.values(), model)
    }

    pub fn model(&self) -> &'m HistogramModel {
        self.model
    }

    pub fn n(&self) -> usize {
        self.bins.len()
    }

    pub fn bins(&self) -> &[u32] {
        &self.bins
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `Σ_λ n_λ² / μ(λ)`; the empirical risk is minus this over `n²`.
    pub fn weighted_square_sum(&self) -> f64 {
        self.counts
            .iter()
            .zip(self.model.widths())
            .map(|(&c, w)| (c as f64) * (c as f64) / w)
            .sum()
    }

    pub fn empirical_risk(&self) -> f64 {
        let n = self.n() as f64;
        -self.weighted_square_sum() / (n * n)
    }

    pub fn estimate(&self) -> ProjectedEstimate<'m> {
        let n = self.n() as f64;
        let coeffs = self
            .counts
            .iter()
            .zip(self.model.widths())
            .map(|(&c, w)| c as f64 / (n * w.sqrt()))
            .collect();
        ProjectedEstimate {
            model: self.model,
            coeffs,
            n: self.n(),
        }
    }
}

/// The projection estimator `ŝ_m` in coordinates of the histogram basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedEstimate<'m> {
    model: &'m HistogramModel,
    coeffs: Vec<f64>,
    n: usize,
}

impl<'m> ProjectedEstimate<'m> {
    pub fn model(&self) -> &'m HistogramModel {
        self.model
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Value of the estimated density at `x`.
    pub fn value_at(&self, x: f64) -> f64 {
        match self.model.bin_index(x) {
            Some(b) => self.coeffs[b] / self.model.widths()[b].sqrt(),
            None => 0.0,
        }
    }
}

pub fn fit<'m>(sample: &Sample, model: &'m HistogramModel) -> ProjectedEstimate<'m> {
    BinnedSample::from_sample(sample, model).estimate()
}

pub fn empirical_risk(est: &ProjectedEstimate<'_>) -> f64 {
    -est.coeffs.iter().map(|a| a * a).sum::<f64>()
}

/// `‖s − ŝ_m‖²`, split as `‖s − s_m‖² + ‖s_m − ŝ_m‖²`.
pub fn loss<M: Measure + ?Sized>(d: &M, est: &ProjectedEstimate<'_>) -> f64 {
    let stats = true_projection(d, est.model);
    loss_with_stats(&stats, est)
}

pub fn loss_with_stats(stats: &ProjectionStats, est: &ProjectedEstimate<'_>) -> f64 {
    loss_from_coeffs(stats, &est.coeffs)
}

pub(crate) fn loss_from_coeffs(stats: &ProjectionStats, coeffs: &[f64]) -> f64 {
    let estimation: f64 = coeffs
        .iter()
        .zip(&stats.sm_coeffs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    stats.bias_sq + estimation
}

/// Loss of the estimator fitted on binned data, without allocating.
pub fn loss_binned(stats: &ProjectionStats, binned: &BinnedSample<'_>) -> f64 {
    let n = binned.n() as f64;
    let estimation: f64 = binned
        .counts
        .iter()
        .zip(binned.model.widths())
        .zip(&stats.sm_coeffs)
        .map(|((&c, w), b)| {
            let a = c as f64 / (n * w.sqrt());
            (a - b) * (a - b)
        })
        .sum();
    stats.bias_sq + estimation
}

/// Population quantities of model `m` under the true law.
///
/// `s_m = Σ P(λ)/μ(λ) 1_λ` is the projection of `s`, `Ψ_m = Σ 1_λ / μ(λ)`,
/// and `D_m = E Ψ_m(ξ) − ‖s_m‖²` drives the expected ideal penalty `2 D_m / n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionStats {
    pub bin_probs: Vec<f64>,
    pub widths: Vec<f64>,
    pub sm_coeffs: Vec<f64>,
    pub norm_sm_sq: f64,
    pub p_psi: f64,
    pub d_cal: f64,
    pub var_sm: f64,
    pub var_psi: f64,
    pub cov_sm_psi: f64,
    pub bias_sq: f64,
}

impl ProjectionStats {
    pub fn dim(&self) -> usize {
        self.bin_probs.len()
    }

    /// `s_m` on each bin.
    pub fn sm_values(&self) -> Vec<f64> {
        self.bin_probs
            .iter()
            .zip(&self.widths)
            .map(|(p, w)| p / w)
            .collect()
    }

    /// `‖s − s_m‖² + D_m / n`, the expected loss of `ŝ_m`.
    pub fn expected_loss(&self, n: usize) -> f64 {
        self.bias_sq + self.d_cal / n as f64
    }
}

pub fn true_projection<M: Measure + ?Sized>(d: &M, model: &HistogramModel) -> ProjectionStats {
    let b = model.breakpoints();
    let bin_probs: Vec<f64> = b.windows(2).map(|w| d.mass(w[0], w[1])).collect();
    stats_from_probs(d.norm_sq(), bin_probs, model.widths().to_vec())
}

fn stats_from_probs(norm_s_sq: f64, bin_probs: Vec<f64>, widths: Vec<f64>) -> ProjectionStats {
    let sm: Vec<f64> = bin_probs.iter().zip(&widths).map(|(p, w)| p / w).collect();
    let psi: Vec<f64> = widths.iter().map(|w| 1.0 / w).collect();
    let sm_coeffs = bin_probs
        .iter()
        .zip(&widths)
        .map(|(p, w)| p / w.sqrt())
        .collect();
    let norm_sm_sq: f64 = bin_probs.iter().zip(&sm).map(|(p, v)| p * v).sum();
    let p_psi: f64 = bin_probs.iter().zip(&psi).map(|(p, v)| p * v).sum();
    // Centered second pass keeps tiny variances from drowning in cancellation.
    let mut var_sm = 0.0;
    let mut var_psi = 0.0;
    let mut cov = 0.0;
    for ((p, a), c) in bin_probs.iter().zip(&sm).zip(&psi) {
        let da = a - norm_sm_sq;
        let dc = c - p_psi;
        var_sm += p * da * da;
        var_psi += p * dc * dc;
        cov += p * da * dc;
    }
    ProjectionStats {
        bin_probs,
        widths,
        sm_coeffs,
        norm_sm_sq,
        p_psi,
        d_cal: (p_psi - norm_sm_sq).max(0.0),
        var_sm,
        var_psi,
        cov_sm_psi: cov,
        bias_sq: (norm_s_sq - norm_sm_sq).max(0.0),
    }
}

/// The model of smallest true loss on this sample.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleChoice {
    pub index: usize,
    pub id: String,
    pub loss: f64,
}

pub fn oracle_model<M: Measure + ?Sized>(
    d: &M,
    collection: &ModelCollection,
    sample: &Sample,
) -> Result<OracleChoice> {
    let losses: Vec<f64> = collection
        .models()
        .iter()
        .map(|m| loss(d, &fit(sample, m)))
        .collect();
    let index = argmin_prefer_small(&losses, &collection.dims())
        .ok_or_else(|| invalid("empty collection"))?;
    Ok(OracleChoice {
        index,
        id: collection.models()[index].id().to_string(),
        loss: losses[index],
    })
}

/// Index of the smallest value; ties go to the smaller dimension, then to
/// the earlier position. NaN values never win.
pub fn argmin_prefer_small(values: &[f64], dims: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) if v < values[b] || (v == values[b] && dims[i] < dims[b]) => Some(i),
            keep => keep,
        };
    }
    best
}
