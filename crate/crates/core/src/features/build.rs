use super::{FeatureConfig, FeatureFamily, FeatureMap};
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Recent states, newest first: `columns[d]` is `u(t - d)`.
#[derive(Debug, Clone)]
pub struct DelayWindow<'a> {
    columns: Vec<&'a [f64]>,
}

impl<'a> DelayWindow<'a> {
    pub fn new(columns: Vec<&'a [f64]>) -> Result<Self> {
        let q = columns
            .first()
            .map(|c| c.len())
            .ok_or_else(|| Error::config("delay window needs at least one state"))?;
        if columns.iter().any(|c| c.len() != q) {
            return Err(Error::mismatch("delay window states differ in dimension"));
        }
        Ok(Self { columns })
    }

    /// Window ending at step `t` of `series` reaching back `depth` steps.
    pub fn from_series(series: &'a TimeSeries, t: usize, depth: usize) -> Result<Self> {
        if t >= series.len() {
            return Err(Error::mismatch(format!(
                "step {t} beyond series of length {}",
                series.len()
            )));
        }
        if depth > t {
            return Err(Error::InsufficientHistory {
                needed: depth + 1,
                available: t + 1,
            });
        }
        Ok(Self {
            columns: (0..=depth).map(|d| series.column(t - d)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }

    /// Number of states held (`deepest delay + 1`).
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn at(&self, delay: usize) -> &'a [f64] {
        self.columns[delay]
    }

    fn require(&self, depth: usize, q: usize) -> Result<()> {
        if self.dim() != q {
            return Err(Error::mismatch(format!(
                "window states have dimension {}, feature map expects {q}",
                self.dim()
            )));
        }
        if self.len() < depth + 1 {
            return Err(Error::InsufficientHistory {
                needed: depth + 1,
                available: self.len(),
            });
        }
        Ok(())
    }
}

/// `u(t) ⊕ u(t-1) ⊕ ... ⊕ u(t-k)`.
pub fn build_linear(window: &DelayWindow<'_>, config: &FeatureConfig) -> Result<Vec<f64>> {
    window.require(config.k, config.q)?;
    let mut out = Vec::with_capacity(config.q * (config.k + 1));
    for d in 0..=config.k {
        out.extend_from_slice(window.at(d));
    }
    Ok(out)
}

/// Unordered pairwise products `l_a * l_b` for `a <= b`, lexicographic in `(a, b)`.
pub fn build_ngrc_nonlinear(linear: &[f64]) -> Vec<f64> {
    let d = linear.len();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for a in 0..d {
        let la = linear[a];
        out.extend(linear[a..].iter().map(|lb| la * lb));
    }
    out
}

/// Neighbour-coupled products: six per dimension per delay block.
pub fn build_heng_nonlinear(window: &DelayWindow<'_>, config: &FeatureConfig) -> Result<Vec<f64>> {
    let mut c = *config;
    c.family = FeatureFamily::HengRc;
    c.validate()?;
    window.require(c.history_depth(), c.q)?;
    let mut out = vec![0.0; 6 * c.heng_dims() * c.k];
    write_heng(window, &c, &mut out);
    Ok(out)
}

fn write_heng(window: &DelayWindow<'_>, c: &FeatureConfig, out: &mut [f64]) {
    let mut slot = 0;
    for j in 0..c.k {
        let lead = window.at(c.delay_offset + j);
        let older = window.at(c.delay_offset + j + 1);
        for i in 0..c.heng_dims() {
            let h = lead[i];
            let [left, mid, right] = c.neighbors(i);
            out[slot] = h * lead[left];
            out[slot + 1] = h * lead[mid];
            out[slot + 2] = h * lead[right];
            out[slot + 3] = h * older[left];
            out[slot + 4] = h * older[mid];
            out[slot + 5] = h * older[right];
            slot += 6;
        }
    }
}

/// Writes the full feature vector for `window` into `out` (`map.total_dim` long).
/// The window must already be validated against the map.
pub(crate) fn write_features(window: &DelayWindow<'_>, map: &FeatureMap, out: &mut [f64]) {
    let c = &map.config;
    let mut pos = 0;
    if c.include_constant {
        out[0] = c.constant_value;
        pos = 1;
    }
    let lin_start = pos;
    for d in 0..map.dim_linear / c.q {
        out[pos..pos + c.q].copy_from_slice(window.at(d));
        pos += c.q;
    }
    let (head, tail) = out.split_at_mut(pos);
    match c.family {
        FeatureFamily::HengRc => write_heng(window, c, tail),
        FeatureFamily::NgRc => {
            let linear = &head[lin_start..];
            let mut slot = 0;
            for a in 0..linear.len() {
                let la = linear[a];
                for lb in &linear[a..] {
                    tail[slot] = la * lb;
                    slot += 1;
                }
            }
        }
        FeatureFamily::EsnState => {}
    }
}

/// `constant ⊕ linear ⊕ nonlinear` for the map's family.
pub fn assemble(window: &DelayWindow<'_>, map: &FeatureMap) -> Result<Vec<f64>> {
    window.require(map.history_depth(), map.config.q)?;
    let mut out = vec![0.0; map.total_dim];
    write_features(window, map, &mut out);
    Ok(out)
}
