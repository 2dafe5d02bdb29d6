//! True densities on `[0, 1]`: the two simulation settings, the uniform law,
//! user-supplied piecewise-linear densities and mixtures with truncated
//! Gaussian components.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{domain, invalid, Error, Result};
use crate::quadrature;
use crate::sample::Sample;
use crate::seeding;

const MASS_TOL: f64 = 1e-9;

/// Anything with a distribution function on `[0, 1]` and a finite L2 norm.
///
/// The variance formulas only ever need bin masses and `‖s‖²`, so they are
/// written against this trait; [`CdfCache`] plugs in here to reuse values.
pub trait Measure: Sync {
    /// Distribution function, with arguments clamped to `[0, 1]`.
    fn cumulative(&self, x: f64) -> f64;

    /// `∫ s²`.
    fn norm_sq(&self) -> f64;

    /// Mass of `[a, b)`.
    fn mass(&self, a: f64, b: f64) -> f64 {
        (self.cumulative(b) - self.cumulative(a)).max(0.0)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Continuous piecewise-linear density given by its values at the knots.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(invalid(
                "piecewise density needs at least two knots and one value per knot",
            ));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(invalid("piecewise density knots must start at 0 and end at 1"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("piecewise density knots must be strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("piecewise density values must be finite and nonnegative"));
        }
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        for k in 0..knots.len() - 1 {
            let h = knots[k + 1] - knots[k];
            cum.push(cum[k] + 0.5 * h * (values[k] + values[k + 1]));
        }
        let total = *cum.last().unwrap();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!(
                "piecewise density integrates to {total}, not 1"
            )));
        }
        Ok(Self { knots, values, cum })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, x: f64) -> usize {
        let interior = &self.knots[1..self.knots.len() - 1];
        interior.partition_point(|&k| k <= x)
    }

    fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let k = self.segment(x);
        self.values[k] + self.slope(k) * (x - self.knots[k])
    }

    fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let k = self.segment(x);
        let h = x - self.knots[k];
        (self.cum[k] + h * self.values[k] + 0.5 * self.slope(k) * h * h).min(1.0)
    }

    /// Inverse-CDF draw from one uniform variate.
    fn quantile(&self, u: f64) -> f64 {
        let total = *self.cum.last().unwrap();
        let target = u * total;
        let k = self.cum[1..]
            .partition_point(|&c| c <= target)
            .min(self.knots.len() - 2);
        let r = target - self.cum[k];
        let fa = self.values[k];
        let slope = self.slope(k);
        let denom = fa + (fa * fa + 2.0 * slope * r).max(0.0).sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (self.knots[k] + t).clamp(self.knots[k], self.knots[k + 1])
    }

    fn norm_sq(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, f)| (x[1] - x[0]) * (f[0] * f[0] + f[0] * f[1] + f[1] * f[1]) / 3.0)
            .sum()
    }
}

/// Normal law conditioned on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedGaussian {
    mean: f64,
    sd: f64,
    lower: f64,
    mass: f64,
}

impl TruncatedGaussian {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
            return Err(invalid("gaussian component needs a finite mean and positive sd"));
        }
        let lower = std_normal_cdf(-mean / sd);
        let mass = std_normal_cdf((1.0 - mean) / sd) - lower;
        if !(mass > 1e-300) {
            return Err(invalid("gaussian component puts no mass on [0, 1]"));
        }
        Ok(Self {
            mean,
            sd,
            lower,
            mass,
        })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let z = (x - self.mean) / self.sd;
        (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * self.sd * self.mass)
    }

    fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        ((std_normal_cdf((x - self.mean) / self.sd) - self.lower) / self.mass).clamp(0.0, 1.0)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean + self.sd * z;
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Component {
    Piecewise(PiecewiseLinear),
    Gaussian(TruncatedGaussian),
}

impl Component {
    fn pdf(&self, x: f64) -> f64 {
        match self {
            Component::Piecewise(p) => p.pdf(x),
            Component::Gaussian(g) => g.pdf(x),
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        match self {
            Component::Piecewise(p) => p.cdf(x),
            Component::Gaussian(g) => g.cdf(x),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Component::Piecewise(p) => p.quantile(rng.random::<f64>()),
            Component::Gaussian(g) => g.draw(rng),
        }
    }

    fn cuts(&self, out: &mut Vec<f64>) {
        match self {
            Component::Piecewise(p) => out.extend_from_slice(p.knots()),
            Component::Gaussian(g) => {
                for k in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
                    out.push(g.mean - k * g.sd);
                    out.push(g.mean + k * g.sd);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Uniform,
    Piecewise(PiecewiseLinear),
    Mixture {
        weights: Vec<f64>,
        cum_weights: Vec<f64>,
        components: Vec<Component>,
    },
}

/// Named simulation settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Setting {
    /// Two linear pieces joined continuously at `x = 1/3`.
    L,
    /// A ramp on `[1/2, 1]` mixed with four narrow bumps.
    S,
    Uniform,
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(Setting::L),
            "S" | "s" => Ok(Setting::S),
            "uniform" | "U" | "u" => Ok(Setting::Uniform),
            _ => Err(Error::Parse(format!(
                "unknown setting {s:?}; expected L, S or uniform"
            ))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::L => "L",
            Setting::S => "S",
            Setting::Uniform => "uniform",
        })
    }
}

/// A density on `[0, 1]` with exact distribution function, sampler and
/// precomputed squared L2 norm.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueDensity {
    name: String,
    kind: Kind,
    norm_sq: f64,
}

impl TrueDensity {
    pub fn uniform() -> Self {
        Self {
            name: "uniform".into(),
            kind: Kind::Uniform,
            norm_sq: 1.0,
        }
    }

    pub fn piecewise(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = PiecewiseLinear::new(knots, values)?;
        let norm_sq = p.norm_sq();
        Ok(Self {
            name: "piecewise".into(),
            kind: Kind::Piecewise(p),
            norm_sq,
        })
    }

    pub fn mixture(parts: Vec<(f64, Component)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        if parts.iter().any(|(w, _)| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("mixture weights must be positive"));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let (weights, components): (Vec<f64>, Vec<Component>) = parts.into_iter().unzip();
        let cum_weights = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let mut density = Self {
            name: "mixture".into(),
            kind: Kind::Mixture {
                weights,
                cum_weights,
                components,
            },
            norm_sq: 0.0,
        };
        density.norm_sq = density.quadrature_norm_sq();
        Ok(density)
    }

    pub fn setting(setting: Setting) -> Self {
        let mut d = match setting {
            Setting::Uniform => Self::uniform(),
            Setting::L => {
                Self::piecewise(vec![0.0, 1.0 / 3.0, 1.0], vec![0.0, 10.0 / 9.0, 4.0 / 3.0])
                    .expect("setting L is a valid density")
            }
            Setting::S => {
                let ramp = PiecewiseLinear::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 4.0])
                    .expect("ramp is a valid density");
                let mut parts = vec![(0.8, Component::Piecewise(ramp))];
                for k in 1..=4 {
                    let g = TruncatedGaussian::new(k as f64 / 10.0, 1.0 / 60.0)
                        .expect("bump is a valid component");
                    parts.push((0.05, Component::Gaussian(g)));
                }
                Self::mixture(parts).expect("setting S is a valid density")
            }
        };
        d.name = setting.to_string();
        d
    }

    pub fn from_spec(spec: &DensitySpec) -> Result<Self> {
        match spec {
            DensitySpec::L => Ok(Self::setting(Setting::L)),
            DensitySpec::S => Ok(Self::setting(Setting::S)),
            DensitySpec::Uniform => Ok(Self::uniform()),
            DensitySpec::Piecewise { breakpoints, values } => {
                Self::piecewise(breakpoints.clone(), values.clone())
            }
            DensitySpec::Mixture { components } => {
                let parts = components
                    .iter()
                    .map(|c| match c {
                        ComponentSpec::Piecewise {
                            weight,
                            breakpoints,
                            values,
                        } => Ok((
                            *weight,
                            Component::Piecewise(PiecewiseLinear::new(
                                breakpoints.clone(),
                                values.clone(),
                            )?),
                        )),
                        ComponentSpec::Gaussian { weight, mean, sd } => Ok((
                            *weight,
                            Component::Gaussian(TruncatedGaussian::new(*mean, *sd)?),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::mixture(parts)
            }
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: DensitySpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match &self.kind {
            Kind::Uniform => 1.0,
            Kind::Piecewise(p) => p.pdf(x),
            Kind::Mixture {
                weights,
                components,
                ..
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.pdf(x))
                .sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
            return Err(domain(format!("cdf argument {x} outside [0, 1]")));
        }
        Ok(self.cumulative(x))
    }

    /// `P([a, b))`.
    pub fn bin_prob(&self, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= 1.0) {
            return Err(domain(format!("bin [{a}, {b}) is not a subinterval of [0, 1]")));
        }
        Ok(self.mass(a, b))
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// Draws `n` points from a fresh stream seeded by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        if n == 0 {
            return Err(invalid("sample size must be positive"));
        }
        let mut rng = seeding::rng(seed);
        Sample::new(self.draw_many(&mut rng, n))
    }

    /// Draws `n` points from an existing generator.
    pub fn draw_many<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        self.draw_into(rng, n, &mut out);
        out
    }

    /// Clears `out` and fills it with `n` draws.
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, n: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..n).map(|_| self.draw(rng)));
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            Kind::Uniform => rng.random::<f64>(),
            Kind::Piecewise(p) => p.quantile(rng.random::<f64>()),
            Kind::Mixture {
                cum_weights,
                components,
                ..
            } => {
                let u = rng.random::<f64>() * cum_weights.last().unwrap();
                let k = cum_weights
                    .partition_point(|&c| c <= u)
                    .min(components.len() - 1);
                components[k].draw(rng)
            }
        }
    }

    /// Points where the density or its derivative changes quickly.
    fn cuts(&self) -> Vec<f64> {
        let mut cuts = Vec::new();
        match &self.kind {
            Kind::Uniform => {}
            Kind::Piecewise(p) => cuts.extend_from_slice(p.knots()),
            Kind::Mixture { components, .. } => {
                for c in components {
                    c.cuts(&mut cuts);
                }
            }
        }
        cuts
    }

    fn quadrature_norm_sq(&self) -> f64 {
        let f = |x: f64| {
            let v = self.pdf(x);
            v * v
        };
        quadrature::integrate(&f, 0.0, 1.0, &self.cuts(), 1e-13)
    }
}

impl Measure for TrueDensity {
    fn cumulative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.kind {
            Kind::Uniform => x,
            Kind::Piecewise(p) => p.cdf(x),
            Kind::Mixture {
                weights,
                components,
                ..
            } => weights
                .iter()
                .zip(components)
                .map(|(w, c)| w * c.cdf(x))
                .sum::<f64>()
                .clamp(0.0, 1.0),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.norm_sq
    }
}

/// Distribution-function values at a fixed set of points, typically every
/// breakpoint of a model collection. Misses fall back to the density.
pub struct CdfCache<'a> {
    density: &'a TrueDensity,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl<'a> CdfCache<'a> {
    pub fn new(density: &'a TrueDensity, points: impl IntoIterator<Item = f64>) -> Self {
        let mut points: Vec<f64> = points.into_iter().map(|x| x.clamp(0.0, 1.0)).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let values = points.iter().map(|&x| density.cumulative(x)).collect();
        Self {
            density,
            points,
            values,
        }
    }

    pub fn density(&self) -> &TrueDensity {
        self.density
    }
}

impl Measure for CdfCache<'_> {
    fn cumulative(&self, x: f64) -> f64 {
        match self.points.binary_search_by(|p| p.total_cmp(&x)) {
            Ok(i) => self.values[i],
            Err(_) => self.density.cumulative(x),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.density.norm_sq
    }
}

/// Resolves `L`, `S`, `uniform` or `file:PATH` (a JSON density description).
pub fn density_by_name(name: &str) -> Result<TrueDensity> {
    match name.strip_prefix("file:") {
        Some(path) => TrueDensity::from_json_file(Path::new(path)),
        None => Ok(TrueDensity::setting(name.parse()?)),
    }
}

/// JSON description of a density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DensitySpec {
    L,
    S,
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "piecewise")]
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    #[serde(rename = "mixture")]
    Mixture { components: Vec<ComponentSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ComponentSpec {
    Piecewise {
        weight: f64,
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    Gaussian {
        weight: f64,
        mean: f64,
        sd: f64,
    },
}
