use faer::{Mat, MatMut};

use super::build::{write_features, DelayWindow};
use super::{FeatureFamily, FeatureMap};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Column-aligned training pairs: column `c` of `features` is built from the
/// window ending at step `first_step + c`, and column `c` of `targets` is the
/// state one step later.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub features: Mat<f64>,
    pub targets: Mat<f64>,
    pub first_step: usize,
}

impl FeatureSet {
    pub fn n_samples(&self) -> usize {
        self.features.ncols()
    }
}

fn check_series(series: &TimeSeries, map: &FeatureMap) -> Result<usize> {
    if map.config.family == FeatureFamily::EsnState {
        return Err(Error::config("esn_state features come from a reservoir, not a delay window"));
    }
    if series.dim() != map.config.q {
        return Err(Error::mismatch(format!(
            "series has dimension {}, feature map expects {}",
            series.dim(),
            map.config.q
        )));
    }
    let depth = map.history_depth();
    if series.len() < depth + 2 {
        return Err(Error::SeriesTooShort {
            needed: depth + 2,
            available: series.len(),
        });
    }
    Ok(series.len() - 1 - depth)
}

/// Fills `out` (`total_dim x steps.len()`) with the feature columns for the
/// window ending at each step in `steps`.
pub fn featurize_range(
    series: &TimeSeries,
    map: &FeatureMap,
    steps: std::ops::Range<usize>,
    mut out: MatMut<'_, f64>,
) -> Result<()> {
    let depth = map.history_depth();
    if steps.start < depth || steps.end > series.len() {
        return Err(Error::InsufficientHistory {
            needed: depth + 1,
            available: steps.start + 1,
        });
    }
    if out.nrows() != map.total_dim || out.ncols() != steps.len() {
        return Err(Error::mismatch("output block does not match feature range"));
    }
    for (c, t) in steps.enumerate() {
        let window = DelayWindow::from_series(series, t, depth)?;
        let col = out.as_mut().col_mut(c).try_as_col_major_mut().expect("faer columns are contiguous");
        write_features(&window, map, col.as_slice_mut());
    }
    Ok(())
}

/// Builds every feature column the series supports together with its
/// next-state target.
pub fn featurize_series(series: &TimeSeries, map: &FeatureMap) -> Result<FeatureSet> {
    let n = check_series(series, map)?;
    let depth = map.history_depth();
    let mut features = Mat::<f64>::zeros(map.total_dim, n);
    featurize_range(series, map, depth..depth + n, features.as_mut())?;
    let q = series.dim();
    let targets = Mat::<f64>::from_fn(q, n, |i, c| series.get(i, depth + c + 1));
    Ok(FeatureSet {
        features,
        targets,
        first_step: depth,
    })
}
