//! Seeded Monte Carlo studies: oracle-ratio tables, variance curves with
//! their low-dimensional fit, Monte Carlo variances, and CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::criteria::{CriterionSpec, Evaluator};
use crate::densities::{density_by_name, CdfCache, TrueDensity};
use crate::error::{invalid, Error, Result};
use crate::fastvf::BenchRow;
use crate::heuristic::{m_star, HeuristicReport};
use crate::models::{collection_by_name, HistogramModel, ModelCollection};
use crate::projection::{argmin_prefer_small, loss_binned, true_projection, BinnedSample};
use crate::seeding;
use crate::stats::{mean_se, ols_line, variance_se};
use crate::variance::{self, McEstimate};

/// One simulation study.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// `L`, `S`, `uniform` or `file:PATH`.
    pub setting: String,
    /// `regu`, `dya2` or `file:PATH`.
    pub collection: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub procedures: Vec<CriterionSpec>,
}

/// On-disk form of [`ExperimentConfig`], with procedures as strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfigFile {
    pub setting: String,
    pub collection: String,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub procedures: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_file(file: ExperimentConfigFile) -> Result<Self> {
        let procedures = if file.procedures.is_empty() {
            crate::criteria::default_procedures()
        } else {
            file.procedures
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self {
            setting: file.setting,
            collection: file.collection,
            n: file.n,
            reps: file.reps,
            seed: file.seed,
            procedures,
        })
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_file(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(invalid("need at least one replicate"));
        }
        if self.procedures.is_empty() {
            return Err(invalid("need at least one procedure"));
        }
        if self.n < 2 {
            return Err(invalid("need n ≥ 2"));
        }
        Ok(())
    }
}

/// Mean loss ratio to the per-sample oracle and mean loss for one procedure.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcedureResult {
    pub label: String,
    pub c_or: f64,
    pub c_or_se: f64,
    pub risk: f64,
    pub risk_se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ProcedureResult>,
    pub oracle: ProcedureResult,
    /// Index into `rows` of the procedure with smallest mean loss.
    pub best: Option<usize>,
}

/// Ratio of a selected loss to the oracle loss; both zero counts as a tie.
fn loss_ratio(selected: f64, oracle: f64) -> f64 {
    if oracle > 0.0 {
        selected / oracle
    } else if selected <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

pub fn run_cor(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let density = density_by_name(&config.setting)?;
    let collection = collection_by_name(&config.collection, config.n)?;
    run_cor_with(&density, &collection, config)
}

/// As [`run_cor`] with the density and collection already built.
pub fn run_cor_with(
    density: &TrueDensity,
    collection: &ModelCollection,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    let n = config.n;
    let eval = Evaluator::new(&config.procedures, n)?;
    let cache = CdfCache::new(density, collection.all_breakpoints());
    let stats: Vec<_> = collection
        .models()
        .iter()
        .map(|m| true_projection(&cache, m))
        .collect();
    let dims = collection.dims();
    let k = config.procedures.len();
    let per_rep = seeding::par_replicates(config.seed, config.reps, |_, rng| -> Result<(f64, Vec<f64>)> {
        let xs = density.draw_many(rng, n);
        let mut losses = Vec::with_capacity(collection.len());
        let mut table = vec![Vec::with_capacity(collection.len()); k];
        for (m, st) in collection.models().iter().zip(&stats) {
            let binned = BinnedSample::new(&xs, m);
            losses.push(loss_binned(st, &binned));
            for (col, v) in table.iter_mut().zip(eval.evaluate(&binned, Some(st.d_cal))?) {
                col.push(v);
            }
        }
        let oracle = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let picks = table
            .iter()
            .map(|vals| {
                argmin_prefer_small(vals, &dims)
                    .map(|i| losses[i])
                    .ok_or_else(|| invalid("criterion produced no finite value"))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok((oracle, picks))
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
    let oracle_losses: Vec<f64> = per_rep.iter().map(|(o, _)| *o).collect();
    let rows: Vec<ProcedureResult> = config
        .procedures
        .iter()
        .enumerate()
        .map(|(p, spec)| {
            let losses: Vec<f64> = per_rep.iter().map(|(_, l)| l[p]).collect();
            let ratios: Vec<f64> = per_rep.iter().map(|(o, l)| loss_ratio(l[p], *o)).collect();
            let (c_or, c_or_se) = mean_se(&ratios);
            let (risk, risk_se) = mean_se(&losses);
            ProcedureResult {
                label: spec.to_string(),
                c_or,
                c_or_se,
                risk,
                risk_se,
            }
        })
        .collect();
    let (risk, risk_se) = mean_se(&oracle_losses);
    let oracle = ProcedureResult {
        label: "oracle".into(),
        c_or: 1.0,
        c_or_se: 0.0,
        risk,
        risk_se,
    };
    let best = (0..rows.len()).min_by(|&a, &b| rows[a].risk.total_cmp(&rows[b].risk));
    Ok(ExperimentReport { rows, oracle, best })
}

/// Monte Carlo variance of `crit(m1) − crit(m2)`, or of `crit(m1)` alone.
pub fn mc_variance(
    density: &TrueDensity,
    m1: &HistogramModel,
    m2: Option<&HistogramModel>,
    n: usize,
    spec: &CriterionSpec,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let xs = mc_increments(density, m1, m2, n, spec, reps, seed)?;
    let (estimate, se) = variance_se(&xs);
    Ok(McEstimate { estimate, se })
}

/// Raw replicate values of `crit(m1) − crit(m2)` (or `crit(m1)`).
pub fn mc_increments(
    density: &TrueDensity,
    m1: &HistogramModel,
    m2: Option<&HistogramModel>,
    n: usize,
    spec: &CriterionSpec,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if reps < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let eval = Evaluator::new(std::slice::from_ref(spec), n)?;
    let d1 = true_projection(density, m1).d_cal;
    let d2 = m2.map(|m| true_projection(density, m).d_cal);
    seeding::par_replicates(seed, reps, |_, rng| -> Result<f64> {
        let xs = density.draw_many(rng, n);
        let a = eval.evaluate(&BinnedSample::new(&xs, m1), Some(d1))?[0];
        let b = match m2 {
            Some(m) => eval.evaluate(&BinnedSample::new(&xs, m), d2)?[0],
            None => 0.0,
        };
        Ok(a - b)
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub m1: String,
    pub m2: String,
    pub dim1: usize,
    pub dim2: usize,
    pub n: usize,
    pub v: usize,
    pub c: f64,
    pub report: variance::VarianceReport,
}

/// Rows of increment variances, with or without Monte Carlo columns.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
    pub with_mc: bool,
}

/// Low-dimensional description of `n² Var(Δ(m, m*))` as
/// `K1 (1 + K2/(V−1)) + K3 (1 + K4/(V−1)) (m − m*)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KFit {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Per V: intercept and slope of the line in `m − m*`.
    pub per_v: Vec<(usize, f64, f64)>,
    pub m_star_dim: usize,
}

/// Increment variances `Var(Δ(m, m*))` over a collection for each V, and
/// the fit over models with more bins than `m*`.
pub fn run_variance_curves(
    density: &TrueDensity,
    collection: &ModelCollection,
    n: usize,
    v_list: &[usize],
    c: f64,
    mc: Option<(usize, u64)>,
) -> Result<(VarianceTable, Option<KFit>)> {
    let cache = CdfCache::new(density, collection.all_breakpoints());
    let star = m_star(&cache, collection, n);
    let ms = &collection.models()[star];
    let mut rows = Vec::new();
    for &v in v_list {
        let spec = crate::criteria::CriterionSpec::new(crate::criteria::CriterionKind::PenVf {
            v: crate::criteria::FoldCount::Fixed(v),
            c,
        });
        for m in collection.models() {
            let mut report = variance::var_increment(&cache, m, ms, n, v, c)?;
            if let Some((reps, seed)) = mc {
                report.mc = Some(if m == ms {
                    McEstimate {
                        estimate: 0.0,
                        se: 0.0,
                    }
                } else {
                    mc_variance(density, m, Some(ms), n, &spec, reps, seed)?
                });
            }
            rows.push(VarianceRow {
                m1: m.id().to_string(),
                m2: ms.id().to_string(),
                dim1: m.dim(),
                dim2: ms.dim(),
                n,
                v,
                c,
                report,
            });
        }
    }
    let table = VarianceTable {
        rows,
        with_mc: mc.is_some(),
    };
    let fit = k_fit(&table, n).ok();
    Ok((table, fit))
}

/// Fits the `K1..K4` description to the rows with `dim1 > dim2`.
pub fn k_fit(table: &VarianceTable, n: usize) -> Result<KFit> {
    let mut vs: Vec<usize> = table.rows.iter().map(|r| r.v).collect();
    vs.sort_unstable();
    vs.dedup();
    let nf2 = (n * n) as f64;
    let mut per_v = Vec::new();
    let mut m_star_dim = 0;
    let mut points = 0;
    for &v in &vs {
        let (xs, ys): (Vec<f64>, Vec<f64>) = table
            .rows
            .iter()
            .filter(|r| r.v == v && r.dim1 > r.dim2)
            .map(|r| {
                m_star_dim = r.dim2;
                ((r.dim1 - r.dim2) as f64, nf2 * r.report.analytic)
            })
            .unzip();
        points += xs.len();
        if let Some((a, b)) = ols_line(&xs, &ys) {
            per_v.push((v, a, b));
        }
    }
    if points < 4 || per_v.len() < 2 {
        return Err(invalid(
            "the fit needs at least four points and two values of V",
        ));
    }
    let u: Vec<f64> = per_v.iter().map(|(v, _, _)| 1.0 / (*v as f64 - 1.0)).collect();
    let a: Vec<f64> = per_v.iter().map(|(_, a, _)| *a).collect();
    let b: Vec<f64> = per_v.iter().map(|(_, _, b)| *b).collect();
    let (k1, s1) = ols_line(&u, &a).ok_or_else(|| invalid("degenerate V grid"))?;
    let (k3, s3) = ols_line(&u, &b).ok_or_else(|| invalid("degenerate V grid"))?;
    Ok(KFit {
        k1,
        k2: s1 / k1,
        k3,
        k4: s3 / k3,
        per_v,
        m_star_dim,
    })
}

/// Fixed-header CSV output.
pub trait CsvReport {
    fn header(&self) -> Vec<&'static str>;
    fn records(&self) -> Vec<Vec<String>>;
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_csv_to<W: Write, R: CsvReport + ?Sized>(report: &R, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(report.header())?;
    for rec in report.records() {
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv<R: CsvReport + ?Sized>(report: &R, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(report, BufWriter::new(file)).map_err(|e| match e {
        Error::Csv(inner) => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(inner.to_string()),
        },
        other => other,
    })
}

impl CsvReport for ExperimentReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["procedure", "c_or", "c_or_se", "risk", "risk_se"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        let row = |label: String, r: &ProcedureResult| {
            vec![
                label,
                fmt_float(r.c_or),
                fmt_float(r.c_or_se),
                fmt_float(r.risk),
                fmt_float(r.risk_se),
            ]
        };
        let mut out: Vec<Vec<String>> = self.rows.iter().map(|r| row(r.label.clone(), r)).collect();
        if !self.rows.is_empty() {
            out.push(row("oracle".into(), &self.oracle));
        }
        if let Some(b) = self.best {
            out.push(row(format!("best:{}", self.rows[b].label), &self.rows[b]));
        }
        out
    }
}

impl CsvReport for VarianceTable {
    fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["m1", "m2", "n", "V", "C", "analytic", "first_term", "second_term"];
        if self.with_mc {
            h.extend(["mc_estimate", "mc_se"]);
        }
        h
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut rec = vec![
                    r.m1.clone(),
                    r.m2.clone(),
                    r.n.to_string(),
                    r.v.to_string(),
                    fmt_float(r.c),
                    fmt_float(r.report.analytic),
                    fmt_float(r.report.first_term),
                    fmt_float(r.report.second_term),
                ];
                if self.with_mc {
                    let (e, s) = r.report.mc.map_or((f64::NAN, f64::NAN), |m| (m.estimate, m.se));
                    rec.push(fmt_float(e));
                    rec.push(fmt_float(s));
                }
                rec
            })
            .collect()
    }
}

impl CsvReport for HeuristicReport {
    fn header(&self) -> Vec<&'static str> {
        vec!["m_dim", "sr", "phi_bar_sr", "freq", "freq_se"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.dim.to_string(),
                    fmt_float(r.sr),
                    fmt_float(r.phi_bar),
                    fmt_float(r.freq),
                    fmt_float(r.freq_se),
                ]
            })
            .collect()
    }
}

/// Benchmark rows as a report.
pub struct BenchTable(pub Vec<BenchRow>);

impl CsvReport for BenchTable {
    fn header(&self) -> Vec<&'static str> {
        vec!["algorithm", "n", "V", "d", "median_ns", "iqr_ns"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|r| {
                vec![
                    r.algorithm.to_string(),
                    r.n.to_string(),
                    r.v.to_string(),
                    r.d.to_string(),
                    fmt_float(r.median_ns),
                    fmt_float(r.iqr_ns),
                ]
            })
            .collect()
    }
}

/// Long-format points for external plotting: `series,x,y,y_se`.
pub struct PlotData(pub Vec<(String, f64, f64, f64)>);

impl CsvReport for PlotData {
    fn header(&self) -> Vec<&'static str> {
        vec!["series", "x", "y", "y_se"]
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.0
            .iter()
            .map(|(s, x, y, e)| vec![s.clone(), fmt_float(*x), fmt_float(*y), fmt_float(*e)])
            .collect()
    }
}

impl ExperimentReport {
    pub fn plot_data(&self) -> PlotData {
        PlotData(
            self.rows
                .iter()
                .enumerate()
                .flat_map(|(i, r)| {
                    [
                        (format!("c_or:{}", r.label), i as f64, r.c_or, r.c_or_se),
                        (format!("risk:{}", r.label), i as f64, r.risk, r.risk_se),
                    ]
                })
                .collect(),
        )
    }
}

impl VarianceTable {
    pub fn plot_data(&self) -> PlotData {
        let mut pts = Vec::new();
        for r in &self.rows {
            pts.push((format!("analytic:V={}", r.v), r.dim1 as f64, r.report.analytic, 0.0));
            if let Some(mc) = r.report.mc {
                pts.push((format!("mc:V={}", r.v), r.dim1 as f64, mc.estimate, mc.se));
            }
        }
        PlotData(pts)
    }
}

impl HeuristicReport {
    pub fn plot_data(&self) -> PlotData {
        let mut pts = Vec::new();
        for r in &self.rows {
            pts.push(("freq".to_string(), r.dim as f64, r.freq, r.freq_se));
            pts.push(("phi_bar_sr".to_string(), r.dim as f64, r.phi_bar, 0.0));
        }
        PlotData(pts)
    }
}

impl BenchTable {
    pub fn plot_data(&self) -> PlotData {
        PlotData(
            self.0
                .iter()
                .map(|r| {
                    (
                        format!("{}:V={}:d={}", r.algorithm, r.v, r.d),
                        r.n as f64,
                        r.median_ns,
                        r.iqr_ns,
                    )
                })
                .collect(),
        )
    }
}
