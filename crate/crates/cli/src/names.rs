//! Checks on names given on the command line, with spelling suggestions.

use std::str::FromStr;

use vfold::criteria::{CriterionSpec, CRITERION_NAMES};

use crate::Failure;

const SETTINGS: [&str; 3] = ["L", "S", "uniform"];
const COLLECTIONS: [&str; 2] = ["regu", "dya2"];

fn closest<'a>(input: &str, candidates: &[&'a str]) -> Option<&'a str> {
    let lower = input.to_lowercase();
    candidates
        .iter()
        .map(|&c| (strsim::jaro_winkler(&lower, &c.to_lowercase()), c))
        .filter(|(score, _)| *score >= 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

fn unknown(kind: &str, input: &str, candidates: &[&str]) -> Failure {
    let hint = match closest(input, candidates) {
        Some(c) => format!("; did you mean {c:?}?"),
        None => format!("; expected one of {}", candidates.join(", ")),
    };
    Failure::Usage(format!("unknown {kind} {input:?}{hint}"))
}

pub fn setting(name: &str) -> Result<(), Failure> {
    if name.starts_with("file:") || name.parse::<vfold::Setting>().is_ok() {
        Ok(())
    } else {
        Err(unknown("setting", name, &[&SETTINGS[..], &["file:PATH"]].concat()))
    }
}

pub fn collection(name: &str) -> Result<(), Failure> {
    if name.starts_with("file:") || COLLECTIONS.contains(&name) {
        Ok(())
    } else {
        Err(unknown("collection", name, &[&COLLECTIONS[..], &["file:PATH"]].concat()))
    }
}

pub fn criterion(text: &str) -> Result<CriterionSpec, Failure> {
    let name = text.split(':').next().unwrap_or("").trim();
    if !CRITERION_NAMES.contains(&name) {
        return Err(unknown("criterion", name, &CRITERION_NAMES));
    }
    text.parse().map_err(|e: vfold::Error| Failure::Usage(e.to_string()))
}

pub fn procedures(text: &str) -> Result<Vec<CriterionSpec>, Failure> {
    let specs = text
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(criterion)
        .collect::<Result<Vec<_>, _>>()?;
    if specs.is_empty() {
        return Err(Failure::Usage("--procedures lists no procedure".into()));
    }
    Ok(specs)
}

/// A ','-separated list; the empty string is the empty list.
pub fn list<T: FromStr>(text: &str, flag: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Failure::Usage(format!("{flag}: cannot read {s:?} as a whole number")))
        })
        .collect()
}
