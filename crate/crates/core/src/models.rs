//! Histogram models on `[0, 1]` and the two standard collections.
//!
//! A model is a partition into intervals `[a, b)`; the last bin is closed on
//! the right so that the point `1` belongs to it.

use std::path::Path;

use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramModel {
    id: String,
    breakpoints: Vec<f64>,
    widths: Vec<f64>,
    regular: bool,
}

impl HistogramModel {
    /// A model with the given breakpoints (first 0, last 1, strictly increasing).
    pub fn custom(breakpoints: Vec<f64>) -> Result<Self> {
        let id = format!("custom:{}", breakpoints.len().saturating_sub(1));
        Self::with_id(id, breakpoints)
    }

    pub fn with_id(id: impl Into<String>, breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(invalid("a partition needs at least two breakpoints"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(invalid("breakpoints must be finite"));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(invalid("breakpoints must start at 0 and end at 1"));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(invalid(format!(
                "breakpoints must be strictly increasing (zero-width or reversed bin at {})",
                w[0]
            )));
        }
        let widths: Vec<f64> = breakpoints.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            id: id.into(),
            breakpoints,
            widths,
            regular: false,
        })
    }

    /// The regular partition into `d` bins.
    pub fn regular(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("a regular partition needs at least one bin"));
        }
        let breakpoints = (0..=d).map(|l| l as f64 / d as f64).collect();
        let mut m = Self::with_id(format!("regu:{d}"), breakpoints)?;
        m.regular = true;
        Ok(m)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.widths.len()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Whether the model was built as a regular partition.
    pub fn is_regular(&self) -> bool {
        self.regular
    }

    /// Bin containing `x`, or `None` outside `[0, 1]`.
    pub fn bin_index(&self, x: f64) -> Option<usize> {
        (0.0..=1.0).contains(&x).then(|| self.bin_of(x))
    }

    /// Bin containing `x`, for `x` already known to lie in `[0, 1]`.
    #[inline]
    pub fn bin_of(&self, x: f64) -> usize {
        let interior = &self.breakpoints[1..self.breakpoints.len() - 1];
        interior.partition_point(|&b| b <= x)
    }

    pub fn min_width(&self) -> f64 {
        self.widths.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether every bin has width at least `1/n`.
    pub fn bins_wider_than_inverse_n(&self, n: usize) -> bool {
        n as f64 * self.min_width() >= 1.0 - 1e-9
    }
}

/// Position of a model in the two-bin-size dyadic family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicIndex {
    /// Change point is at `k / ñ`.
    pub k: usize,
    /// `2^i` bins on the left of the change point.
    pub i: u32,
    /// `2^j` bins on the right.
    pub j: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCollection {
    name: String,
    models: Vec<HistogramModel>,
}

impl ModelCollection {
    pub fn new(name: impl Into<String>, models: Vec<HistogramModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(invalid("a model collection cannot be empty"));
        }
        let mut ids: Vec<&str> = models.iter().map(|m| m.id()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate model id {}", w[0])));
        }
        Ok(Self {
            name: name.into(),
            models,
        })
    }

    /// Reads either one breakpoint array or an array of them from JSON.
    pub fn from_json_str(name: &str, text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let arrays: Vec<Vec<f64>> = match &value {
            serde_json::Value::Array(items) if items.iter().all(|v| v.is_number()) => {
                vec![serde_json::from_value(value)?]
            }
            _ => serde_json::from_value(value)?,
        };
        let models = arrays
            .into_iter()
            .enumerate()
            .map(|(i, b)| HistogramModel::with_id(format!("custom:{i}"), b))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, models)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("custom")
            .to_string();
        Self::from_json_str(&name, &text)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn models(&self) -> &[HistogramModel] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&HistogramModel> {
        self.models.get(index)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.id() == id)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.dim()).collect()
    }

    /// Every breakpoint used by some model, sorted and deduplicated.
    pub fn all_breakpoints(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .models
            .iter()
            .flat_map(|m| m.breakpoints().iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// Regular partitions with `1, …, n` bins.
pub fn regu_collection(n: usize) -> Result<ModelCollection> {
    if n == 0 {
        return Err(invalid("regu collection needs n ≥ 1"));
    }
    let models = (1..=n)
        .map(HistogramModel::regular)
        .collect::<Result<Vec<_>>>()?;
    ModelCollection::new("regu", models)
}

/// `floor(n / ln n)`.
pub fn dya2_grid_size(n: usize) -> usize {
    if n < 2 {
        return 0;
    }
    (n as f64 / (n as f64).ln()).floor() as usize
}

fn floor_log2(k: usize) -> u32 {
    usize::BITS - 1 - k.leading_zeros()
}

/// Indices `(k, i, j)` of the dyadic two-bin-size family, in collection order.
pub fn dya2_indices(n: usize) -> Result<Vec<DyadicIndex>> {
    let grid = dya2_grid_size(n);
    if n < 3 || grid < 2 {
        return Err(invalid(format!(
            "dya2 collection needs floor(n / ln n) ≥ 2, got n = {n}"
        )));
    }
    let mut out = Vec::new();
    for k in 1..grid {
        for i in 0..=floor_log2(k) {
            for j in 0..=floor_log2(grid - k) {
                out.push(DyadicIndex { k, i, j });
            }
        }
    }
    Ok(out)
}

/// The model with `2^i` regular bins on `[0, k/ñ)` and `2^j` on `[k/ñ, 1]`.
///
/// Breakpoints are formed as one integer ratio each, so the shared change
/// point is the same float on both sides.
pub fn dya2_model(grid: usize, index: DyadicIndex) -> Result<HistogramModel> {
    let DyadicIndex { k, i, j } = index;
    if k == 0 || k >= grid {
        return Err(invalid(format!("change point index {k} outside 1..{grid}")));
    }
    let left = 1u64 << i;
    let right = 1u64 << j;
    let (k, g) = (k as u64, grid as u64);
    let mut breakpoints = Vec::with_capacity((left + right + 1) as usize);
    for l in 0..left {
        breakpoints.push((k * l) as f64 / (g * left) as f64);
    }
    for l in 0..=right {
        breakpoints.push((k * right + (g - k) * l) as f64 / (g * right) as f64);
    }
    HistogramModel::with_id(format!("dya2:{k},{i},{j}"), breakpoints)
}

pub fn dya2_collection(n: usize) -> Result<ModelCollection> {
    let grid = dya2_grid_size(n);
    let models = dya2_indices(n)?
        .into_iter()
        .map(|idx| dya2_model(grid, idx))
        .collect::<Result<Vec<_>>>()?;
    ModelCollection::new("dya2", models)
}

/// Resolves a collection by name: `regu`, `dya2`, or `file:PATH`.
pub fn collection_by_name(name: &str, n: usize) -> Result<ModelCollection> {
    match name {
        "regu" => regu_collection(n),
        "dya2" => dya2_collection(n),
        other => match other.strip_prefix("file:") {
            Some(path) => ModelCollection::from_json_file(Path::new(path)),
            None => Err(Error::Parse(format!(
                "unknown collection {other:?}; expected regu, dya2 or file:PATH"
            ))),
        },
    }
}
