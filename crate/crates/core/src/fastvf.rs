//! V-fold quantities in `O((n + V²) d)` instead of `O(n V d)`.
//!
//! With `A[i][λ] = (V/n) Σ_{j ∈ B_i} ψ_λ(ξ_j)`, `C = A Aᵀ`, `S = Σ C` and
//! `T = tr C`, every V-fold quantity is a function of `(S, T, V)`:
//!
//! * empirical risk `−S / V²`
//! * V-fold criterion `T / (V(V−1)) − (S − T) / (V−1)²`
//! * V-fold penalty `x · 2 (T − S/V) / (V (V−1)²)`
//!
//! `T − S/V = Σ_λ Σ_i (A[i][λ] − mean_i A[i][λ])²` is a sum of squares, so
//! the penalty is nonnegative. The naive reference trains one estimator per
//! fold and evaluates every basis function at every point.

use std::time::Instant;

use crate::criteria::{make_folds, FoldPartition, FoldScheme};
use crate::densities::TrueDensity;
use crate::error::{invalid, Error, Result};
use crate::models::HistogramModel;
use crate::projection::BinnedSample;
use crate::sample::Sample;

/// Default cap on the number of entries of `C` kept in memory.
pub const DEFAULT_C_LIMIT: usize = 1 << 20;

/// An orthonormal family evaluated pointwise.
pub trait Basis {
    fn dim(&self) -> usize;
    /// Writes `ψ_λ(x)` for every `λ` into `out`.
    fn eval_into(&self, x: f64, out: &mut [f64]);
}

impl Basis for HistogramModel {
    fn dim(&self) -> usize {
        HistogramModel::dim(self)
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        out.fill(0.0);
        let b = self.bin_of(x);
        out[b] = 1.0 / self.widths()[b].sqrt();
    }
}

/// A basis given by a closure, for non-histogram families.
pub struct FnBasis<F> {
    dim: usize,
    eval: F,
}

impl<F: Fn(f64, &mut [f64])> FnBasis<F> {
    pub fn new(dim: usize, eval: F) -> Self {
        Self { dim, eval }
    }
}

impl<F: Fn(f64, &mut [f64])> Basis for FnBasis<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        (self.eval)(x, out)
    }
}

/// The three outputs shared by every V-fold kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VfOutputs {
    pub v: usize,
    /// `P_n γ(ŝ_m) = −‖ŝ_m‖²`.
    pub emp_risk: f64,
    /// The V-fold cross-validation criterion.
    pub vfcv: f64,
    /// The V-fold penalty at `x = V − 1`, the unbiased constant.
    pub pen_corrected: f64,
}

impl VfOutputs {
    pub fn from_sums(s: f64, t: f64, v: usize) -> Self {
        let vf = v as f64;
        let spread = t - s / vf;
        Self {
            v,
            emp_risk: -s / (vf * vf),
            vfcv: t / (vf * (vf - 1.0)) - (s - t) / ((vf - 1.0) * (vf - 1.0)),
            pen_corrected: 2.0 * spread / (vf * (vf - 1.0)),
        }
    }

    /// The V-fold penalty at an arbitrary multiplier `x`.
    pub fn penalty(&self, x: f64) -> f64 {
        x * self.pen_corrected / (self.v as f64 - 1.0)
    }

    /// Bias-corrected V-fold criterion, `emp_risk + penalty(V − 1)`.
    pub fn corr_vfcv(&self) -> f64 {
        self.emp_risk + self.pen_corrected
    }
}

/// Intermediate matrices of the fast algorithm, kept for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct VfAggregates {
    v: usize,
    d: usize,
    a: Vec<f64>,
    c: Option<Vec<f64>>,
    s: f64,
    t: f64,
}

impl VfAggregates {
    pub fn v(&self) -> usize {
        self.v
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `A`, row-major `V × d`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// `C`, row-major `V × V`, when it was small enough to store.
    pub fn c(&self) -> Option<&[f64]> {
        self.c.as_deref()
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn outputs(&self) -> VfOutputs {
        VfOutputs::from_sums(self.s, self.t, self.v)
    }

    fn finish(v: usize, d: usize, a: Vec<f64>, c_limit: usize) -> Self {
        if v.saturating_mul(v) <= c_limit {
            let mut c = vec![0.0; v * v];
            for i in 0..v {
                let ri = &a[i * d..(i + 1) * d];
                for j in i..v {
                    let rj = &a[j * d..(j + 1) * d];
                    let dot: f64 = ri.iter().zip(rj).map(|(x, y)| x * y).sum();
                    c[i * v + j] = dot;
                    c[j * v + i] = dot;
                }
            }
            let s = c.iter().sum();
            let t = (0..v).map(|i| c[i * v + i]).sum();
            Self {
                v,
                d,
                a,
                c: Some(c),
                s,
                t,
            }
        } else {
            let mut col = vec![0.0; d];
            let mut t = 0.0;
            for row in a.chunks_exact(d) {
                for (acc, x) in col.iter_mut().zip(row) {
                    *acc += x;
                    t += x * x;
                }
            }
            let s = col.iter().map(|x| x * x).sum();
            Self {
                v,
                d,
                a,
                c: None,
                s,
                t,
            }
        }
    }
}

fn check_exact(n: usize, folds: &FoldPartition) -> Result<()> {
    if folds.n() != n {
        return Err(Error::Mismatch(format!(
            "partition covers {} points but the sample has {n}",
            folds.n()
        )));
    }
    if !folds.exact_reg() {
        return Err(invalid(format!(
            "the fast and naive kernels need equal block sizes; V = {} does not divide n = {n}",
            folds.v()
        )));
    }
    Ok(())
}

/// `A`, `C`, `S`, `T` for a histogram model: one pass adds `(V/n) / √μ(λ)`
/// into a zeroed `V × d` matrix.
pub fn aggregates_histogram(
    sample: &Sample,
    model: &HistogramModel,
    folds: &FoldPartition,
    c_limit: usize,
) -> Result<VfAggregates> {
    let n = sample.len();
    check_exact(n, folds)?;
    let (v, d) = (folds.v(), model.dim());
    let scale = v as f64 / n as f64;
    let weights: Vec<f64> = model.widths().iter().map(|w| scale / w.sqrt()).collect();
    let mut a = vec![0.0; v * d];
    for (block, members) in folds.blocks().iter().enumerate() {
        let row = &mut a[block * d..(block + 1) * d];
        for &i in members {
            let b = model.bin_of(sample.values()[i]);
            row[b] += weights[b];
        }
    }
    Ok(VfAggregates::finish(v, d, a, c_limit))
}

/// `A`, `C`, `S`, `T` for an arbitrary basis; `O(n d + V² d)`.
pub fn aggregates_generic<B: Basis + ?Sized>(
    sample: &Sample,
    basis: &B,
    folds: &FoldPartition,
    c_limit: usize,
) -> Result<VfAggregates> {
    let n = sample.len();
    check_exact(n, folds)?;
    let (v, d) = (folds.v(), basis.dim());
    let scale = v as f64 / n as f64;
    let mut a = vec![0.0; v * d];
    let mut buf = vec![0.0; d];
    for (block, members) in folds.blocks().iter().enumerate() {
        let row = &mut a[block * d..(block + 1) * d];
        for &i in members {
            basis.eval_into(sample.values()[i], &mut buf);
            for (acc, psi) in row.iter_mut().zip(&buf) {
                *acc += scale * psi;
            }
        }
    }
    Ok(VfAggregates::finish(v, d, a, c_limit))
}

pub fn vf_fast(sample: &Sample, model: &HistogramModel, folds: &FoldPartition) -> Result<VfOutputs> {
    Ok(aggregates_histogram(sample, model, folds, DEFAULT_C_LIMIT)?.outputs())
}

pub fn vf_fast_generic<B: Basis + ?Sized>(
    sample: &Sample,
    basis: &B,
    folds: &FoldPartition,
) -> Result<VfOutputs> {
    Ok(aggregates_generic(sample, basis, folds, DEFAULT_C_LIMIT)?.outputs())
}

/// `S` and `T` straight from bin memberships, touching only occupied bins:
/// `O(n)` per call once the sample is binned.
pub fn sparse_sums(binned: &BinnedSample<'_>, folds: &FoldPartition) -> (f64, f64) {
    let n = binned.n();
    let widths = binned.model().widths();
    let scale = folds.v() as f64 / n as f64;
    let scale_sq = scale * scale;
    let s = scale_sq * binned.weighted_square_sum();
    let mut counts = vec![0u32; widths.len()];
    let mut touched: Vec<u32> = Vec::new();
    let mut t = 0.0;
    let bins = binned.bins();
    for members in folds.blocks() {
        for &i in members {
            let b = bins[i];
            if counts[b as usize] == 0 {
                touched.push(b);
            }
            counts[b as usize] += 1;
        }
        for &b in &touched {
            let c = counts[b as usize] as f64;
            t += c * c / widths[b as usize];
            counts[b as usize] = 0;
        }
        touched.clear();
    }
    (s, scale_sq * t)
}

/// Histogram V-fold outputs from a binned sample.
pub fn vf_sparse(binned: &BinnedSample<'_>, folds: &FoldPartition) -> Result<VfOutputs> {
    check_exact(binned.n(), folds)?;
    let (s, t) = sparse_sums(binned, folds);
    Ok(VfOutputs::from_sums(s, t, folds.v()))
}

/// Reference algorithm: one estimator per training set, every basis
/// function evaluated at every point, `O(n V d)`.
pub fn vf_naive<B: Basis + ?Sized>(
    sample: &Sample,
    basis: &B,
    folds: &FoldPartition,
) -> Result<VfOutputs> {
    let n = sample.len();
    check_exact(n, folds)?;
    let (v, d) = (folds.v(), basis.dim());
    let xs = sample.values();
    let nf = n as f64;
    let vf = v as f64;
    let train_scale = vf / ((vf - 1.0) * nf);
    let test_scale = vf / nf;
    let mut buf = vec![0.0; d];
    let mut alpha = vec![0.0; d];
    let mut in_block = vec![false; n];
    let (mut vfcv, mut gap) = (0.0, 0.0);
    for members in folds.blocks() {
        in_block.iter_mut().for_each(|f| *f = false);
        for &i in members {
            in_block[i] = true;
        }
        alpha.iter_mut().for_each(|a| *a = 0.0);
        for (i, &x) in xs.iter().enumerate() {
            if in_block[i] {
                continue;
            }
            basis.eval_into(x, &mut buf);
            for (a, p) in alpha.iter_mut().zip(&buf) {
                *a += train_scale * p;
            }
        }
        let norm: f64 = alpha.iter().map(|a| a * a).sum();
        let (mut q, mut r) = (0.0, 0.0);
        for (i, &x) in xs.iter().enumerate() {
            basis.eval_into(x, &mut buf);
            let dot: f64 = alpha.iter().zip(&buf).map(|(a, p)| a * p).sum();
            if in_block[i] {
                q += test_scale * dot;
            } else {
                r += train_scale * dot;
            }
        }
        vfcv += norm - 2.0 * q;
        gap += r - q;
    }
    alpha.iter_mut().for_each(|a| *a = 0.0);
    for &x in xs {
        basis.eval_into(x, &mut buf);
        for (a, p) in alpha.iter_mut().zip(&buf) {
            *a += p / nf;
        }
    }
    let norm: f64 = alpha.iter().map(|a| a * a).sum();
    let mut cross = 0.0;
    for &x in xs {
        basis.eval_into(x, &mut buf);
        cross += alpha.iter().zip(&buf).map(|(a, p)| a * p).sum::<f64>() / nf;
    }
    Ok(VfOutputs {
        v,
        emp_risk: norm - 2.0 * cross,
        vfcv: vfcv / vf,
        pen_corrected: 2.0 * (vf - 1.0) / (vf * vf) * gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    /// Dense `A` and `C` on the histogram path.
    Fast,
    /// Occupied-bin sums on a pre-binned sample (binning included in the timing).
    Sparse,
    /// Per-fold training with full basis evaluation.
    Naive,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Fast => "fast",
            Kernel::Sparse => "sparse",
            Kernel::Naive => "naive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Kernel::Fast),
            "sparse" => Ok(Kernel::Sparse),
            "naive" => Ok(Kernel::Naive),
            _ => Err(Error::Parse(format!(
                "unknown kernel {s:?}; expected fast, sparse or naive"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub algorithm: &'static str,
    pub n: usize,
    pub v: usize,
    pub d: usize,
    pub median_ns: f64,
    pub iqr_ns: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub v_list: Vec<usize>,
    pub d_list: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub kernels: Vec<Kernel>,
}

/// Time one kernel on one uniform sample; returns the per-run durations in ns.
pub fn time_kernel(
    kernel: Kernel,
    sample: &Sample,
    model: &HistogramModel,
    folds: &FoldPartition,
    repeats: usize,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        let res = match kernel {
            Kernel::Fast => vf_fast(sample, model, folds)?,
            Kernel::Sparse => vf_sparse(&BinnedSample::from_sample(sample, model), folds)?,
            Kernel::Naive => vf_naive(sample, model, folds)?,
        };
        std::hint::black_box(res);
        out.push(start.elapsed().as_nanos() as f64);
    }
    Ok(out)
}

/// Median and interquartile range (linear interpolation between order statistics).
pub fn median_iqr(times: &[f64]) -> (f64, f64) {
    let mut t = times.to_vec();
    t.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if t.is_empty() {
            return f64::NAN;
        }
        let h = p * (t.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        t[lo] + (h - lo as f64) * (t[hi] - t[lo])
    };
    (q(0.5), q(0.75) - q(0.25))
}

/// Timing table over the grid; combinations with `V ∤ n` are skipped.
pub fn bench_kernels(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    if config.repeats == 0 {
        return Err(invalid("repeats must be positive"));
    }
    let uniform = TrueDensity::uniform();
    let mut rows = Vec::new();
    for &n in &config.n_list {
        let sample = uniform.sample(n, config.seed)?;
        for &v in &config.v_list {
            if v < 2 || v > n || n % v != 0 {
                continue;
            }
            let folds = make_folds(n, v, FoldScheme::Contiguous)?;
            for &d in &config.d_list {
                let model = HistogramModel::regular(d)?;
                for &kernel in &config.kernels {
                    let times = time_kernel(kernel, &sample, &model, &folds, config.repeats)?;
                    let (median_ns, iqr_ns) = median_iqr(&times);
                    rows.push(BenchRow {
                        algorithm: kernel.name(),
                        n,
                        v,
                        d,
                        median_ns,
                        iqr_ns,
                    });
                }
            }
        }
    }
    Ok(rows)
}
