//! Observed samples on the unit interval.

use std::io::BufRead;

use crate::error::{invalid, Error, Result};

/// An i.i.d. sample of points in `[0, 1]`, in observation order.
///
/// Order matters: fold partitions and hold-out subsets refer to positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sample is empty"));
        }
        if let Some((i, x)) = values
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && (0.0..=1.0).contains(*x)))
        {
            return Err(Error::Domain(format!(
                "sample point {i} = {x} lies outside [0, 1]"
            )));
        }
        Ok(Self { values })
    }

    /// Reads one value per line. Blank lines and lines starting with `#` are
    /// skipped; errors report the 1-based line number.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut values = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let x: f64 = trimmed.parse().map_err(|_| {
                Error::Parse(format!("line {}: cannot parse {trimmed:?} as a number", lineno + 1))
            })?;
            if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                return Err(Error::Domain(format!(
                    "line {}: value {x} lies outside [0, 1]",
                    lineno + 1
                )));
            }
            values.push(x);
        }
        if values.is_empty() {
            return Err(invalid("data file contains no observations"));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The sub-sample at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Result<Self> {
        let values = positions
            .iter()
            .map(|&i| {
                self.values
                    .get(i)
                    .copied()
                    .ok_or_else(|| invalid(format!("position {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_points_off_the_unit_interval() {
        assert!(Sample::new(vec![0.2, 1.5]).is_err());
        assert!(Sample::new(vec![f64::NAN]).is_err());
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn reader_reports_line_numbers() {
        let text = "0.1\n# comment\n\n0.4\nabc\n";
        let err = Sample::from_reader(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
        let s = Sample::from_reader("0.25\n\n0.75\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[0.25, 0.75]);
        assert!(Sample::from_reader("".as_bytes()).is_err());
    }
}
