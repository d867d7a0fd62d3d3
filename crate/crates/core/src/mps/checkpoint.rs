//! Structured-text checkpoints of an MPS.
//!
//! JSON with shape headers per site. Floats are written with shortest
//! round-trip formatting, so a save/load cycle is bit-exact.

use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::state::{MpsState, SiteTensor};
use crate::error::{Error, Result};
use crate::model::ModelParams;

const FORMAT: &str = "mmrabi-mps";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SiteRecord {
    shape: [usize; 3],
    re: Vec<f64>,
    im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    format: String,
    version: u32,
    pub params_hash: String,
    pub step: u64,
    pub time: f64,
    centre: usize,
    discarded_weight: f64,
    normalized: bool,
    sites: Vec<SiteRecord>,
}

/// SHA-256 of the canonical JSON form of `params`.
pub fn params_hash(params: &ModelParams) -> String {
    let bytes = serde_json::to_vec(params).expect("parameters serialize");
    hex::encode(Sha256::digest(&bytes))
}

impl Checkpoint {
    pub fn new(state: &MpsState, params: &ModelParams, step: u64, time: f64) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            params_hash: params_hash(params),
            step,
            time,
            centre: state.centre,
            discarded_weight: state.discarded_weight,
            normalized: state.normalized,
            sites: state
                .sites
                .iter()
                .map(|t| SiteRecord {
                    shape: [t.left, t.phys, t.right],
                    re: t.data.iter().map(|z| z.re).collect(),
                    im: t.data.iter().map(|z| z.im).collect(),
                })
                .collect(),
        }
    }

    /// Rebuild the state, checking the format and that it belongs to `params`.
    pub fn restore(&self, params: &ModelParams) -> Result<MpsState> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported format {} v{}", self.format, self.version)));
        }
        if self.params_hash != params_hash(params) {
            return Err(Error::Checkpoint("parameter hash mismatch".into()));
        }
        let mut sites = Vec::with_capacity(self.sites.len());
        for (k, rec) in self.sites.iter().enumerate() {
            let [l, d, r] = rec.shape;
            if rec.re.len() != l * d * r || rec.im.len() != l * d * r {
                return Err(Error::Checkpoint(format!("site {k}: data does not match shape {:?}", rec.shape)));
            }
            if k > 0 && sites.last().map(|t: &SiteTensor| t.right) != Some(l) {
                return Err(Error::Checkpoint(format!("site {k}: bond dimension mismatch")));
            }
            let data = rec.re.iter().zip(&rec.im).map(|(&a, &b)| C64::new(a, b)).collect();
            sites.push(SiteTensor { left: l, phys: d, right: r, data });
        }
        if sites.len() != params.site_dims().len()
            || sites.iter().zip(params.site_dims()).any(|(t, d)| t.phys != d)
            || self.centre >= sites.len()
        {
            return Err(Error::Checkpoint("site layout does not match parameters".into()));
        }
        Ok(MpsState { sites, centre: self.centre, discarded_weight: self.discarded_weight, normalized: self.normalized })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
