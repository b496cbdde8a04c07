//! `CCMD` model snapshots.
//!
//! Layout, little-endian:
//!
//! | field         | type                  |
//! |---------------|-----------------------|
//! | magic         | `b"CCMD"`             |
//! | version       | u32 (= 1)             |
//! | text length   | u32                   |
//! | text          | UTF-8 TOML            |
//! | target mode   | u8 (0 next_state, 1 delta) |
//! | lambda        | f64                   |
//! | normalizer    | u8 flag, then Q means and Q stds (f64) when set |
//! | rows, cols    | u32, u32              |
//! | W_out         | rows x cols f64, row-major |
//!
//! The text block describes the feature source: a feature map, or an echo
//! state network config (input dimension, washout, reservoir parameters)
//! from which the reservoir is regenerated. Reservoir states are row
//! vectors: node `j` receives `sum_i S_i A_ij`.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::esn::{EsnConfig, Reservoir};
use super::model::{ModelKind, Normalizer, ReadoutModel, TargetMode};
use crate::error::{Error, Result};
use crate::features::{plan_features, FeatureConfig};

pub const MODEL_MAGIC: &[u8; 4] = b"CCMD";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EsnDoc {
    kind: String,
    input_dim: usize,
    washout: usize,
    esn: EsnConfig,
}

#[derive(Deserialize)]
struct Dims {
    total: usize,
}

#[derive(Deserialize)]
struct FeaturesDoc {
    features: FeatureConfig,
    dims: Dims,
}

/// The structured text block embedded in a snapshot.
pub fn model_text(model: &ReadoutModel) -> Result<String> {
    match &model.kind {
        ModelKind::Features(map) => Ok(format!("kind = \"features\"\n\n{}", map.to_text())),
        ModelKind::Esn { reservoir, washout } => {
            if reservoir.is_custom() {
                return Err(Error::config(
                    "reservoirs built from explicit weights cannot be snapshotted",
                ));
            }
            let doc = EsnDoc {
                kind: "esn".into(),
                input_dim: reservoir.input_dim(),
                washout: *washout,
                esn: reservoir.config().clone(),
            };
            Ok(toml::to_string(&doc).expect("esn doc serializes"))
        }
    }
}

fn parse_kind(text: &str) -> Result<ModelKind> {
    let value: toml::Table = text
        .parse()
        .map_err(|e| Error::format(format!("model text block: {e}")))?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("features") => {
            let mut table = value.clone();
            table.remove("kind");
            let doc: FeaturesDoc = table
                .try_into()
                .map_err(|e| Error::format(format!("feature map block: {e}")))?;
            let map = plan_features(&doc.features)?;
            if map.total_dim != doc.dims.total {
                return Err(Error::format(format!(
                    "feature map declares {} features, config yields {}",
                    doc.dims.total, map.total_dim
                )));
            }
            Ok(ModelKind::Features(map))
        }
        Some("esn") => {
            let doc: EsnDoc = toml::from_str(text).map_err(|e| Error::format(format!("esn block: {e}")))?;
            Ok(ModelKind::Esn {
                reservoir: Box::new(Reservoir::new(&doc.esn, doc.input_dim)?),
                washout: doc.washout,
            })
        }
        other => Err(Error::format(format!("unknown model kind {other:?}"))),
    }
}

pub fn write_model<W: Write>(model: &ReadoutModel, mut w: W) -> Result<()> {
    model.validate()?;
    let text = model_text(model)?;
    let mut buf = Vec::with_capacity(64 + text.len() + 8 * model.w_out.nrows() * model.w_out.ncols());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    buf.push(model.target_mode.code());
    buf.extend_from_slice(&model.lambda.to_le_bytes());
    match &model.normalizer {
        Some(n) => {
            buf.push(1);
            for v in n.means.iter().chain(&n.stds) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => buf.push(0),
    }
    let (rows, cols) = (model.w_out.nrows(), model.w_out.ncols());
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            buf.extend_from_slice(&model.w_out[(i, j)].to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| Error::format("model snapshot is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<ReadoutModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MODEL_MAGIC {
        return Err(Error::format("not a model snapshot (bad magic)"));
    }
    let version = c.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::format(format!("unsupported model snapshot version {version}")));
    }
    let text_len = c.u32()? as usize;
    let text = std::str::from_utf8(c.take(text_len)?).map_err(|_| Error::format("model text block is not UTF-8"))?;
    let kind = parse_kind(text)?;
    let target_mode = TargetMode::from_code(c.u8()?)?;
    let lambda = c.f64()?;
    let normalizer = match c.u8()? {
        0 => None,
        1 => {
            let q = match &kind {
                ModelKind::Features(m) => m.config.q,
                ModelKind::Esn { reservoir, .. } => reservoir.input_dim(),
            };
            let means = (0..q).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            let stds = (0..q).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            Some(Normalizer { means, stds })
        }
        f => return Err(Error::format(format!("bad normalizer flag {f}"))),
    };
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let payload = c.take(rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or_else(|| Error::format("weight matrix too large"))?)?;
    if c.pos != bytes.len() {
        return Err(Error::format("trailing bytes after model snapshot"));
    }
    let w_out = Mat::from_fn(rows, cols, |i, j| {
        let at = 8 * (i * cols + j);
        f64::from_le_bytes(payload[at..at + 8].try_into().expect("8 bytes"))
    });
    let model = ReadoutModel {
        w_out,
        lambda,
        kind,
        target_mode,
        normalizer,
    };
    model.validate().map_err(|e| Error::format(format!("inconsistent snapshot: {e}")))?;
    Ok(model)
}

pub fn read_model<R: Read>(mut r: R) -> Result<ReadoutModel> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_model(&bytes)
}

pub fn save_model(model: &ReadoutModel, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ReadoutModel> {
    decode_model(&std::fs::read(path)?)
}

/// Human-readable summary of a model.
pub fn inspect(model: &ReadoutModel) -> String {
    let mut out = String::new();
    let w = &model.w_out;
    match &model.kind {
        ModelKind::Features(map) => {
            let c = &map.config;
            out.push_str(&format!("family          {:?}\n", c.family));
            out.push_str(&format!("input dim       {}\n", c.q));
            out.push_str(&format!("delay blocks    {}\n", c.k));
            out.push_str(&format!("history depth   {}\n", map.history_depth()));
            out.push_str(&format!(
                "features        {} ({} constant, {} linear, {} nonlinear)\n",
                map.total_dim, map.dim_constant, map.dim_linear, map.dim_nonlinear
            ));
        }
        ModelKind::Esn { reservoir, washout } => {
            let c = reservoir.config();
            out.push_str("family          EsnState\n");
            out.push_str(&format!("input dim       {}\n", reservoir.input_dim()));
            out.push_str(&format!("nodes           {}\n", c.n_nodes));
            out.push_str(&format!("nonzeros in A   {}\n", reservoir.nonzeros()));
            out.push_str(&format!("spectral radius {}\n", c.spectral_radius));
            out.push_str(&format!("leak rate       {}\n", c.leak_rate));
            out.push_str(&format!("washout         {washout}\n"));
            out.push_str(&format!("seed            {}\n", c.seed));
        }
    }
    out.push_str(&format!("target mode     {}\n", model.target_mode.name()));
    out.push_str(&format!("lambda          {:e}\n", model.lambda));
    out.push_str(&format!(
        "normalized      {}\n",
        if model.normalizer.is_some() { "yes" } else { "no" }
    ));
    out.push_str(&format!("W_out           {} x {}\n", w.nrows(), w.ncols()));
    let max = (0..w.ncols())
        .flat_map(|j| w.col(j).iter().map(|v| v.abs()).collect::<Vec<_>>())
        .fold(0.0_f64, f64::max);
    out.push_str(&format!("||W_out||_F     {:e}\n", w.norm_l2()));
    out.push_str(&format!("max |w|         {max:e}\n"));
    out
}
