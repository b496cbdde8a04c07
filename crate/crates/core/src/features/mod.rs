//! Feature vectors built from delayed observations.
//!
//! Every map is the concatenation `constant ⊕ linear ⊕ nonlinear`:
//!
//! * linear: `u(t) ⊕ u(t-1) ⊕ ... ⊕ u(t-k)`, delay-major then dimension;
//! * NG-RC nonlinear: every unordered product `l_a * l_b` (`a <= b`) of the
//!   linear block;
//! * HENG-RC nonlinear: for each delay block and each dimension `i`, the six
//!   products of `H_i` at the block's lead delay with its spatial neighbours
//!   `i-1, i, i+1` at the lead delay and at one step older.
//!
//! The HENG-RC nonlinear block has `6 Q k` entries against `d (d + 1) / 2`
//! for NG-RC with `d = Q (k + 1)`.

pub(crate) mod build;
mod matrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use build::{assemble, build_heng_nonlinear, build_linear, build_ngrc_nonlinear, DelayWindow};
pub use matrix::{featurize_range, featurize_series, FeatureSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    HengRc,
    NgRc,
    /// Reservoir node states used directly as features.
    EsnState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborWrap {
    Periodic,
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HengVariant {
    /// Six products for every dimension.
    Full,
    /// Six products of the first dimension only (the three-variable
    /// specialization with 6 nonlinear terms per delay block).
    FirstDimOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub family: FeatureFamily,
    /// Input dimension `Q` (reservoir size for `esn_state`).
    pub q: usize,
    /// Number of delay blocks `k`.
    pub k: usize,
    pub include_constant: bool,
    pub constant_value: f64,
    pub neighbor_wrap: NeighborWrap,
    pub heng_variant: HengVariant,
    /// Delay of the first HENG-RC block: block `j` pairs delay
    /// `delay_offset + j` with `delay_offset + j + 1`.
    pub delay_offset: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            family: FeatureFamily::HengRc,
            q: 3,
            k: 1,
            include_constant: false,
            constant_value: 1.0,
            neighbor_wrap: NeighborWrap::Periodic,
            heng_variant: HengVariant::Full,
            delay_offset: 1,
        }
    }
}

impl FeatureConfig {
    pub fn heng_rc(q: usize, k: usize) -> Self {
        Self {
            q,
            k,
            ..Default::default()
        }
    }

    pub fn ng_rc(q: usize, k: usize) -> Self {
        Self {
            family: FeatureFamily::NgRc,
            q,
            k,
            ..Default::default()
        }
    }

    pub fn esn_state(n_nodes: usize) -> Self {
        Self {
            family: FeatureFamily::EsnState,
            q: n_nodes,
            k: 1,
            ..Default::default()
        }
    }

    pub fn with_constant(mut self, on: bool) -> Self {
        self.include_constant = on;
        self
    }

    pub fn with_offset(mut self, offset: usize) -> Self {
        self.delay_offset = offset;
        self
    }

    pub fn with_variant(mut self, variant: HengVariant) -> Self {
        self.heng_variant = variant;
        self
    }

    pub fn with_wrap(mut self, wrap: NeighborWrap) -> Self {
        self.neighbor_wrap = wrap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::config("q must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !self.constant_value.is_finite() {
            return Err(Error::config("constant value must be finite"));
        }
        if self.family == FeatureFamily::HengRc
            && self.neighbor_wrap == NeighborWrap::Periodic
            && self.q < 3
        {
            return Err(Error::config(format!(
                "periodic neighbour wrap needs q >= 3, got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Deepest delay any slot reads.
    pub fn history_depth(&self) -> usize {
        match self.family {
            FeatureFamily::HengRc => self.k.max(self.delay_offset + self.k),
            FeatureFamily::NgRc => self.k,
            FeatureFamily::EsnState => 0,
        }
    }

    pub(crate) fn neighbors(&self, i: usize) -> [usize; 3] {
        let q = self.q;
        match self.neighbor_wrap {
            NeighborWrap::Periodic => [(i + q - 1) % q, i, (i + 1) % q],
            NeighborWrap::Clamped => [i.saturating_sub(1), i, (i + 1).min(q - 1)],
        }
    }

    pub(crate) fn heng_dims(&self) -> usize {
        match self.heng_variant {
            HengVariant::Full => self.q,
            HengVariant::FirstDimOnly => 1,
        }
    }
}

/// A state value at a given delay: `u_dim(t - delay)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tap {
    pub delay: usize,
    pub dim: usize,
}

impl Tap {
    pub fn new(delay: usize, dim: usize) -> Self {
        Self { delay, dim }
    }
}

/// Symbolic meaning of one feature slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Constant,
    Linear(Tap),
    Product(Tap, Tap),
}

impl Term {
    pub fn evaluate(&self, window: &DelayWindow<'_>, constant_value: f64) -> f64 {
        match *self {
            Term::Constant => constant_value,
            Term::Linear(t) => window.at(t.delay)[t.dim],
            Term::Product(a, b) => window.at(a.delay)[a.dim] * window.at(b.delay)[b.dim],
        }
    }

    pub fn reads(&self, tap: Tap) -> bool {
        match *self {
            Term::Constant => false,
            Term::Linear(t) => t == tap,
            Term::Product(a, b) => a == tap || b == tap,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Term::Constant => "constant",
            Term::Linear(_) => "linear",
            Term::Product(..) => "nonlinear",
        }
    }
}

/// Planned layout of a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub config: FeatureConfig,
    pub dim_constant: usize,
    pub dim_linear: usize,
    pub dim_nonlinear: usize,
    pub total_dim: usize,
    #[serde(skip)]
    pub term_index: Vec<Term>,
}

/// Computes exact block sizes and the slot-by-slot term index.
pub fn plan_features(config: &FeatureConfig) -> Result<FeatureMap> {
    config.validate()?;
    let q = config.q;
    let k = config.k;
    let mut terms = Vec::new();
    if config.include_constant {
        terms.push(Term::Constant);
    }

    let linear_delays = match config.family {
        FeatureFamily::EsnState => 0,
        _ => k,
    };
    for delay in 0..=linear_delays {
        for dim in 0..q {
            terms.push(Term::Linear(Tap::new(delay, dim)));
        }
    }
    let dim_linear = q * (linear_delays + 1);

    match config.family {
        FeatureFamily::HengRc => {
            for j in 0..k {
                let lead = config.delay_offset + j;
                for i in 0..config.heng_dims() {
                    let head = Tap::new(lead, i);
                    for delay in [lead, lead + 1] {
                        for n in config.neighbors(i) {
                            terms.push(Term::Product(head, Tap::new(delay, n)));
                        }
                    }
                }
            }
        }
        FeatureFamily::NgRc => {
            let d = dim_linear;
            d.checked_mul(d + 1)
                .filter(|n| *n / 2 <= 100_000_000)
                .ok_or_else(|| Error::config(format!("NG-RC with {d} linear terms is too large")))?;
            let taps: Vec<Tap> = (0..=k)
                .flat_map(|delay| (0..q).map(move |dim| Tap::new(delay, dim)))
                .collect();
            for a in 0..d {
                for b in a..d {
                    terms.push(Term::Product(taps[a], taps[b]));
                }
            }
        }
        FeatureFamily::EsnState => {}
    }

    let dim_constant = usize::from(config.include_constant);
    let total_dim = terms.len();
    Ok(FeatureMap {
        config: *config,
        dim_constant,
        dim_linear,
        dim_nonlinear: total_dim - dim_constant - dim_linear,
        total_dim,
        term_index: terms,
    })
}

impl FeatureMap {
    pub fn history_depth(&self) -> usize {
        self.config.history_depth()
    }

    /// Restores the term index after deserialization.
    pub fn rebuild(config: &FeatureConfig) -> Result<Self> {
        plan_features(config)
    }

    /// Human-readable structured description (TOML).
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            features: &'a FeatureConfig,
            dims: Dims,
        }
        #[derive(Serialize)]
        struct Dims {
            constant: usize,
            linear: usize,
            nonlinear: usize,
            total: usize,
        }
        toml::to_string(&Doc {
            features: &self.config,
            dims: Dims {
                constant: self.dim_constant,
                linear: self.dim_linear,
                nonlinear: self.dim_nonlinear,
                total: self.total_dim,
            },
        })
        .expect("feature map always serializes")
    }

    /// Term index as CSV: `slot,kind,delay_a,dim_a,delay_b,dim_b` with
    /// empty cells where a field does not apply. Dimensions are 0-based.
    pub fn term_index_csv(&self) -> String {
        let mut out = String::from("slot,kind,delay_a,dim_a,delay_b,dim_b\n");
        for (slot, term) in self.term_index.iter().enumerate() {
            let row = match term {
                Term::Constant => format!("{slot},{},,,,", term.kind()),
                Term::Linear(t) => format!("{slot},{},{},{},,", term.kind(), t.delay, t.dim),
                Term::Product(a, b) => format!(
                    "{slot},{},{},{},{},{}",
                    term.kind(),
                    a.delay,
                    a.dim,
                    b.delay,
                    b.dim
                ),
            };
            out.push_str(&row);
            out.push('\n');
        }
        out
    }
}
