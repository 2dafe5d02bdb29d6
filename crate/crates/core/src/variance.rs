//! Exact variances of penalized criteria and of their increments.
//!
//! Every formula needs only bin masses: the functions involved (`s_m`,
//! `Ψ_m`) are constant on the cells of the common refinement of the two
//! partitions, so expectations become finite sums over those cells.
//!
//! For a criterion `emp + pen_VF(C(V−1))` the variance splits into a
//! quadratic part `(2/n²)(1 + 4C²/(V−1) − (2C−1)²/n) β` and a linear part
//! `(4/n) Var((1 + (2C−1)/n) s_m(ξ) − ((2C−1)/(2n)) Ψ_m(ξ))`.

use crate::densities::Measure;
use crate::error::{invalid, Result};
use crate::models::HistogramModel;
use crate::projection::true_projection;

/// Piecewise-constant quantities of one or two models on their common refinement.
struct Cells {
    prob: Vec<f64>,
    width1: Vec<f64>,
    width2: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    psi1: Vec<f64>,
    psi2: Vec<f64>,
    norm1: f64,
    norm2: f64,
}

fn bin_probs<M: Measure + ?Sized>(d: &M, m: &HistogramModel) -> Vec<f64> {
    m.breakpoints().windows(2).map(|w| d.mass(w[0], w[1])).collect()
}

impl Cells {
    /// With `m2 = None` the second model contributes zero functions.
    fn new<M: Measure + ?Sized>(d: &M, m1: &HistogramModel, m2: Option<&HistogramModel>) -> Self {
        let p1 = bin_probs(d, m1);
        let w1 = m1.widths();
        let b1 = m1.breakpoints();
        let (b2, p2, w2): (&[f64], Vec<f64>, &[f64]) = match m2 {
            Some(m) => (m.breakpoints(), bin_probs(d, m), m.widths()),
            None => (&[0.0, 1.0], vec![1.0], &[1.0]),
        };
        let on2 = m2.is_some() as u8 as f64;
        let mut cells = Cells {
            prob: Vec::new(),
            width1: Vec::new(),
            width2: Vec::new(),
            s1: Vec::new(),
            s2: Vec::new(),
            psi1: Vec::new(),
            psi2: Vec::new(),
            norm1: p1.iter().zip(w1).map(|(p, w)| p * p / w).sum(),
            norm2: on2 * p2.iter().zip(w2).map(|(p, w)| p * p / w).sum::<f64>(),
        };
        let (mut i, mut j) = (0usize, 0usize);
        let mut left = 0.0;
        while i < w1.len() && j < w2.len() {
            let right = b1[i + 1].min(b2[j + 1]);
            let prob = if right > left { d.mass(left, right) } else { 0.0 };
            cells.prob.push(prob);
            cells.width1.push(w1[i]);
            cells.width2.push(w2[j]);
            cells.s1.push(p1[i] / w1[i]);
            cells.psi1.push(1.0 / w1[i]);
            cells.s2.push(on2 * p2[j] / w2[j]);
            cells.psi2.push(on2 / w2[j]);
            if b1[i + 1] == right {
                i += 1;
            }
            if b2[j + 1] == right {
                j += 1;
            }
            left = right;
        }
        cells
    }

    /// `β` between the two partitions; meaningful only when both are present.
    fn beta_cross(&self) -> f64 {
        let mut quad = 0.0;
        let mut mixed = 0.0;
        for c in 0..self.prob.len() {
            let p = self.prob[c];
            quad += p * p / (self.width1[c] * self.width2[c]);
            mixed += p * self.s1[c] * self.s2[c];
        }
        quad - 2.0 * mixed + self.norm1 * self.norm2
    }

    /// `Var(a (s1 − s2)(ξ) + b (Ψ1 − Ψ2)(ξ))`, two-pass.
    fn var_linear(&self, a: f64, b: f64) -> f64 {
        let g = |c: usize| a * (self.s1[c] - self.s2[c]) + b * (self.psi1[c] - self.psi2[c]);
        let mean: f64 = (0..self.prob.len()).map(|c| self.prob[c] * g(c)).sum();
        (0..self.prob.len())
            .map(|c| {
                let dev = g(c) - mean;
                self.prob[c] * dev * dev
            })
            .sum()
    }
}

/// `β(Λ1, Λ2) = Σ_{λ, λ'} (P(ψ_λ ψ_λ') − Pψ_λ Pψ_λ')²`, by merging breakpoints.
pub fn beta<M: Measure + ?Sized>(d: &M, m1: &HistogramModel, m2: &HistogramModel) -> f64 {
    Cells::new(d, m1, Some(m2)).beta_cross()
}

/// The same double sum evaluated bin pair by bin pair, `O(d1 d2)`.
pub fn beta_pairwise<M: Measure + ?Sized>(d: &M, m1: &HistogramModel, m2: &HistogramModel) -> f64 {
    let p1 = bin_probs(d, m1);
    let p2 = bin_probs(d, m2);
    let (b1, b2) = (m1.breakpoints(), m2.breakpoints());
    let mut total = 0.0;
    for (l, (&pa, wa)) in p1.iter().zip(m1.widths()).enumerate() {
        for (k, (&pb, wb)) in p2.iter().zip(m2.widths()).enumerate() {
            let lo = b1[l].max(b2[k]);
            let hi = b1[l + 1].min(b2[k + 1]);
            let inter = if hi > lo { d.mass(lo, hi) } else { 0.0 };
            let cov = inter - pa * pb;
            total += cov * cov / (wa * wb);
        }
    }
    total
}

/// Closed form for a regular `coarse` partition and a refinement `fine` of it:
/// `d ‖s_fine‖² − 2 P(s_coarse s_fine) + ‖s_coarse‖² ‖s_fine‖²`.
pub fn beta_nested_regular<M: Measure + ?Sized>(
    d: &M,
    coarse: &HistogramModel,
    fine: &HistogramModel,
) -> Result<f64> {
    let w = coarse.widths();
    if w.iter().any(|x| (x - w[0]).abs() > 1e-12 * w[0]) {
        return Err(invalid(format!("{} is not a regular partition", coarse.id())));
    }
    let fb = fine.breakpoints();
    if coarse
        .breakpoints()
        .iter()
        .any(|b| fb.binary_search_by(|x| x.total_cmp(b)).is_err())
    {
        return Err(invalid(format!("{} does not refine {}", fine.id(), coarse.id())));
    }
    let coarse_stats = true_projection(d, coarse);
    let fine_stats = true_projection(d, fine);
    let coarse_values = coarse_stats.sm_values();
    let mixed: f64 = fine
        .breakpoints()
        .windows(2)
        .zip(&fine_stats.bin_probs)
        .zip(fine_stats.sm_values())
        .map(|((edge, p), sf)| p * sf * coarse_values[coarse.bin_of(edge[0])])
        .sum();
    Ok(coarse.dim() as f64 * fine_stats.norm_sm_sq - 2.0 * mixed
        + coarse_stats.norm_sm_sq * fine_stats.norm_sm_sq)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaTerms {
    pub beta_11: f64,
    pub beta_22: f64,
    pub beta_12: f64,
    /// `B(m1, m2) = β11 + β22 − 2 β12`, clamped at zero.
    pub b_incr: f64,
}

pub fn beta_terms<M: Measure + ?Sized>(d: &M, m1: &HistogramModel, m2: &HistogramModel) -> BetaTerms {
    let beta_11 = beta(d, m1, m1);
    let beta_22 = beta(d, m2, m2);
    let beta_12 = beta(d, m1, m2);
    BetaTerms {
        beta_11,
        beta_22,
        beta_12,
        b_incr: (beta_11 + beta_22 - 2.0 * beta_12).max(0.0),
    }
}

pub fn beta_increment<M: Measure + ?Sized>(d: &M, m1: &HistogramModel, m2: &HistogramModel) -> f64 {
    beta_terms(d, m1, m2).b_incr
}

/// Monte Carlo counterpart of an analytic variance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
}

/// An analytic variance with its additive decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceReport {
    pub analytic: f64,
    /// Quadratic (U-statistic) part.
    pub first_term: f64,
    /// Linear part.
    pub second_term: f64,
    /// Split-asymmetry part; nonzero only for hold-out criteria with `τ ≠ 1/2`.
    pub third_term: f64,
    pub mc: Option<McEstimate>,
}

impl VarianceReport {
    fn from_terms(first: f64, second: f64, third: f64) -> Self {
        Self {
            analytic: first + second + third,
            first_term: first,
            second_term: second,
            third_term: third,
            mc: None,
        }
    }

    fn zero() -> Self {
        Self::from_terms(0.0, 0.0, 0.0)
    }
}

fn check_grid(n: usize, v: usize, c: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("need n ≥ 2, got {n}")));
    }
    if v < 2 || v > n {
        return Err(invalid(format!("need 2 ≤ V ≤ n, got V = {v}, n = {n}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid(format!("C must be positive, got {c}")));
    }
    Ok(())
}

fn vfold_report(cells: &Cells, b: f64, n: usize, v: usize, c: f64) -> VarianceReport {
    let nf = n as f64;
    let k = 2.0 * c - 1.0;
    let first = 2.0 / (nf * nf) * (1.0 + 4.0 * c * c / (v as f64 - 1.0) - k * k / nf) * b;
    let second = 4.0 / nf * cells.var_linear(1.0 + k / nf, -k / (2.0 * nf));
    VarianceReport::from_terms(first, second, 0.0)
}

/// Variance of `emp + pen_VF(C(V−1))` for one model.
pub fn var_criterion<M: Measure + ?Sized>(
    d: &M,
    m: &HistogramModel,
    n: usize,
    v: usize,
    c: f64,
) -> Result<VarianceReport> {
    check_grid(n, v, c)?;
    let cells = Cells::new(d, m, None);
    let b = beta(d, m, m);
    Ok(vfold_report(&cells, b, n, v, c))
}

/// Variance of the increment between two models of `emp + pen_VF(C(V−1))`.
pub fn var_increment<M: Measure + ?Sized>(
    d: &M,
    m1: &HistogramModel,
    m2: &HistogramModel,
    n: usize,
    v: usize,
    c: f64,
) -> Result<VarianceReport> {
    check_grid(n, v, c)?;
    if m1 == m2 {
        return Ok(VarianceReport::zero());
    }
    let cells = Cells::new(d, m1, Some(m2));
    let b = beta_increment(d, m1, m2);
    Ok(vfold_report(&cells, b, n, v, c))
}

/// Variance of the increment of the empirical risk plus a deterministic
/// penalty, e.g. the expected ideal penalty.
pub fn var_ideal<M: Measure + ?Sized>(
    d: &M,
    m1: &HistogramModel,
    m2: &HistogramModel,
    n: usize,
) -> Result<VarianceReport> {
    if n < 2 {
        return Err(invalid(format!("need n ≥ 2, got {n}")));
    }
    if m1 == m2 {
        return Ok(VarianceReport::zero());
    }
    let cells = Cells::new(d, m1, Some(m2));
    Ok(ideal_report(&cells, beta_increment(d, m1, m2), n))
}

/// Single-model version of [`var_ideal`].
pub fn var_ideal_criterion<M: Measure + ?Sized>(
    d: &M,
    m: &HistogramModel,
    n: usize,
) -> Result<VarianceReport> {
    if n < 2 {
        return Err(invalid(format!("need n ≥ 2, got {n}")));
    }
    let cells = Cells::new(d, m, None);
    let b = beta(d, m, m);
    Ok(ideal_report(&cells, b, n))
}

fn ideal_report(cells: &Cells, b: f64, n: usize) -> VarianceReport {
    let nf = n as f64;
    let first = 2.0 / (nf * nf) * (1.0 - 1.0 / nf) * b;
    let second = 4.0 / nf * cells.var_linear(1.0 - 1.0 / nf, 1.0 / (2.0 * nf));
    VarianceReport::from_terms(first, second, 0.0)
}

fn check_tau(n: usize, tau: f64, c: f64) -> Result<()> {
    if n < 2 {
        return Err(invalid(format!("need n ≥ 2, got {n}")));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("τ must lie in (0, 1), got {tau}")));
    }
    let t = tau * n as f64;
    if (t - t.round()).abs() > 1e-9 {
        return Err(invalid(format!("τ n = {t} is not an integer")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(invalid(format!("C must be positive, got {c}")));
    }
    Ok(())
}

fn holdout_report(cells: &Cells, b: f64, n: usize, tau: f64, c: f64) -> VarianceReport {
    let nf = n as f64;
    let k = 2.0 * c - 1.0;
    let kappa = (1.0 - 2.0 * tau).powi(2) / (tau * (1.0 - tau));
    let first = 2.0 / (nf * nf) * (1.0 + 4.0 * c * c - k * k / nf) * b;
    let second = 4.0 / nf * cells.var_linear(1.0 + k / nf, -k / (2.0 * nf));
    let third = if kappa == 0.0 {
        0.0
    } else {
        4.0 * c * c * kappa / (nf * nf * nf) * (cells.var_linear(-2.0, 1.0) - 2.0 * b)
    };
    VarianceReport::from_terms(first, second, third)
}

/// Variance of the increment of `emp + pen_HO(T, Cτ/(1−τ))` with `|T| = τ n`.
pub fn var_holdout<M: Measure + ?Sized>(
    d: &M,
    m1: &HistogramModel,
    m2: &HistogramModel,
    n: usize,
    tau: f64,
    c: f64,
) -> Result<VarianceReport> {
    check_tau(n, tau, c)?;
    if m1 == m2 {
        return Ok(VarianceReport::zero());
    }
    let cells = Cells::new(d, m1, Some(m2));
    Ok(holdout_report(&cells, beta_increment(d, m1, m2), n, tau, c))
}

/// Single-model version of [`var_holdout`].
pub fn var_holdout_criterion<M: Measure + ?Sized>(
    d: &M,
    m: &HistogramModel,
    n: usize,
    tau: f64,
    c: f64,
) -> Result<VarianceReport> {
    check_tau(n, tau, c)?;
    let cells = Cells::new(d, m, None);
    let b = beta(d, m, m);
    Ok(holdout_report(&cells, b, n, tau, c))
}

/// `E[crit(m1) − crit(m2)]` for any criterion with expectation
/// `−‖s‖² + ‖s − s_m‖² + (2C − 1) D_m / n`.
pub fn expected_delta<M: Measure + ?Sized>(
    d: &M,
    m1: &HistogramModel,
    m2: &HistogramModel,
    n: usize,
    c: f64,
) -> f64 {
    if m1 == m2 {
        return 0.0;
    }
    let a = true_projection(d, m1);
    let b = true_projection(d, m2);
    // ‖s − s_m‖² = ‖s‖² − ‖s_m‖², and ‖s‖² cancels in the difference.
    (b.norm_sm_sq - a.norm_sm_sq) + (2.0 * c - 1.0) * (a.d_cal - b.d_cal) / n as f64
}
