//! Grid specs for sweeps.
//!
//! `key=v1,v2,v3` varies one field. Several fields can move together with
//! `k1:k2=a1:b1,a2:b2`, e.g. `schedule.steps_per_level:schedule.levels=1:20,2:10`
//! keeps their product fixed. Separate axes combine as a cartesian product.

use crate::config::{ConfigError, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub keys: Vec<String>,
    /// One tuple of raw values per point, same length as `keys`.
    pub points: Vec<Vec<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid axis '{0}' must look like key=v1,v2 or k1:k2=a1:b1,a2:b2")]
    Syntax(String),
    #[error("grid point '{point}' has {got} values for {want} keys")]
    Arity {
        point: String,
        want: usize,
        got: usize,
    },
    #[error("grid run {index} ({assignment}): {source}")]
    Config {
        index: usize,
        assignment: String,
        source: ConfigError,
    },
}

pub fn parse_axis(spec: &str) -> Result<GridAxis, GridError> {
    let (keys, values) = spec
        .split_once('=')
        .ok_or_else(|| GridError::Syntax(spec.to_owned()))?;
    let keys: Vec<String> = keys.split(':').map(|k| k.trim().to_owned()).collect();
    if keys.iter().any(String::is_empty) || values.trim().is_empty() {
        return Err(GridError::Syntax(spec.to_owned()));
    }
    let points = values
        .split(',')
        .map(|p| {
            let tuple: Vec<String> = p.split(':').map(|v| v.trim().to_owned()).collect();
            if tuple.len() != keys.len() || tuple.iter().any(String::is_empty) {
                return Err(GridError::Arity {
                    point: p.to_owned(),
                    want: keys.len(),
                    got: tuple.len(),
                });
            }
            Ok(tuple)
        })
        .collect::<Result<_, _>>()?;
    Ok(GridAxis { keys, points })
}

/// Every combination as a list of `(key, value)` assignments. No axes gives
/// one empty assignment, i.e. the baseline run.
pub fn expand(axes: &[GridAxis]) -> Vec<Vec<(String, String)>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        combos = combos
            .iter()
            .flat_map(|base| {
                axis.points.iter().map(move |point| {
                    let mut next = base.clone();
                    next.extend(axis.keys.iter().cloned().zip(point.iter().cloned()));
                    next
                })
            })
            .collect();
    }
    combos
}

/// Column names for the swept keys, in axis order.
pub fn grid_keys(axes: &[GridAxis]) -> Vec<String> {
    axes.iter().flat_map(|a| a.keys.iter().cloned()).collect()
}

/// Field assignments of one grid point, with the config they produce.
pub type PlannedRun = (Vec<(String, String)>, RunConfig);

/// Builds every run's config up front, so a bad field fails before any training.
pub fn plan(base: &RunConfig, axes: &[GridAxis]) -> Result<Vec<PlannedRun>, GridError> {
    expand(axes)
        .into_iter()
        .enumerate()
        .map(|(index, assignment)| {
            let mut cfg = base.clone();
            let pairs: Vec<(&str, &str)> = assignment
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .collect();
            cfg.set_many(&pairs).map_err(|source| GridError::Config {
                index,
                assignment: describe(&assignment),
                source,
            })?;
            Ok((assignment, cfg))
        })
        .collect()
}

pub fn describe(assignment: &[(String, String)]) -> String {
    if assignment.is_empty() {
        return "baseline".into();
    }
    assignment
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}
