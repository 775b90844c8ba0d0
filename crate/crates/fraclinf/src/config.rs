//! Run configuration: a single JSON document describing grid, domain, data,
//! weight, supremand, schedule, and tolerances. Validation reports every
//! violation at once; the effective config (defaults applied) is what gets
//! hashed, so identical hashes mean identical runs.

use crate::error::{Error, Result};
use crate::grid::{DomainSpec, Grid, OmegaShape};
use crate::profiles::{exterior, supremand, weight, BuildCtx};
use crate::solver::{ContinuationOptions, Problem};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn default_p_schedule() -> Vec<f64> {
    vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0]
}

fn default_seed() -> u64 {
    17
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub profile: String,
    #[serde(default)]
    pub params: Value,
}

impl ProfileSpec {
    pub fn named(profile: &str) -> Self {
        ProfileSpec {
            profile: profile.to_string(),
            params: Value::Null,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "Tolerances::default_grad_tol_factor")]
    pub grad_tol_factor: f64,
    #[serde(default = "Tolerances::default_max_stage_iters")]
    pub max_stage_iters: usize,
    #[serde(default = "Tolerances::default_epoch_iters")]
    pub epoch_iters: usize,
    #[serde(default = "Tolerances::default_lbfgs_memory")]
    pub lbfgs_memory: usize,
}

impl Tolerances {
    fn default_grad_tol_factor() -> f64 {
        ContinuationOptions::default().grad_tol_factor
    }
    fn default_max_stage_iters() -> usize {
        ContinuationOptions::default().max_stage_iters
    }
    fn default_epoch_iters() -> usize {
        ContinuationOptions::default().epoch_iters
    }
    fn default_lbfgs_memory() -> usize {
        ContinuationOptions::default().lbfgs_memory
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            grad_tol_factor: Self::default_grad_tol_factor(),
            max_stage_iters: Self::default_max_stage_iters(),
            epoch_iters: Self::default_epoch_iters(),
            lbfgs_memory: Self::default_lbfgs_memory(),
        }
    }
}

/// The complete, serializable description of one run. An empty
/// `exterior_data` list is the degenerate (zero data) problem: allowed,
/// solved trivially, and flagged everywhere downstream.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub s: f64,
    pub half_width: f64,
    pub spacing: f64,
    pub omega: OmegaShape,
    #[serde(default)]
    pub exterior_data: Vec<exterior::ExteriorTermSpec>,
    #[serde(default = "RunConfig::default_weight")]
    pub weight: ProfileSpec,
    #[serde(default = "RunConfig::default_supremand")]
    pub supremand: ProfileSpec,
    #[serde(default = "default_p_schedule")]
    pub p_schedule: Vec<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Where run artifacts go; a CLI path flag takes precedence.
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl RunConfig {
    fn default_weight() -> ProfileSpec {
        ProfileSpec::named("gaussian")
    }

    fn default_supremand() -> ProfileSpec {
        ProfileSpec::named("identity")
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("schema: {e}")]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn continuation_options(&self) -> ContinuationOptions {
        ContinuationOptions {
            p_schedule: self.p_schedule.clone(),
            grad_tol_factor: self.tolerances.grad_tol_factor,
            max_stage_iters: self.tolerances.max_stage_iters,
            epoch_iters: self.tolerances.epoch_iters,
            lbfgs_memory: self.tolerances.lbfgs_memory,
        }
    }

    /// Collects every violation instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        if self.dim != 1 && self.dim != 2 {
            errs.push(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            errs.push(format!("s must lie in (0, 1), got {}", self.s));
        }
        if (self.dim == 1 || self.dim == 2) && 2.0 * self.s >= self.dim as f64 {
            errs.push(format!(
                "requires n > 2s: dim {} with s = {}",
                self.dim, self.s
            ));
        }
        let grid = match Grid::new(self.dim, self.half_width, self.spacing) {
            Ok(g) => Some(g),
            Err(e) => {
                errs.push(format!("grid: {e}"));
                None
            }
        };
        if let Some(grid) = grid {
            let ctx = BuildCtx { grid };
            if let Err(e) =
                weight::registry().build(&self.weight.profile, &self.weight.params, &ctx)
            {
                errs.push(format!("weight: {e}"));
            }
            if let Err(e) =
                supremand::registry().build(&self.supremand.profile, &self.supremand.params, &ctx)
            {
                errs.push(format!("supremand: {e}"));
            }
            match DomainSpec::new(grid, self.omega.clone()) {
                Ok(domain) => {
                    if let Err(e) =
                        exterior::sample_terms(&exterior::registry(), &self.exterior_data, &domain)
                    {
                        errs.push(format!("exterior_data: {e}"));
                    }
                }
                Err(e) => errs.push(format!("omega: {e}")),
            }
        }
        if let Err(e) = self.continuation_options().validate() {
            errs.push(format!("p_schedule: {e}"));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Builds the problem this config describes. Assumes validate() passed;
    /// any residual error surfaces normally.
    pub fn assemble(&self) -> Result<Problem> {
        let grid = Grid::new(self.dim, self.half_width, self.spacing)?;
        let ctx = BuildCtx { grid };
        let w = weight::registry().build(&self.weight.profile, &self.weight.params, &ctx)?;
        let sup =
            supremand::registry().build(&self.supremand.profile, &self.supremand.params, &ctx)?;
        let domain = DomainSpec::new(grid, self.omega.clone())?;
        let g = exterior::sample_terms(&exterior::registry(), &self.exterior_data, &domain)?;
        Problem::assemble(domain, self.s, w.as_ref(), sup, g)
    }

    /// Canonical JSON of the effective config: defaults applied, fields in
    /// declaration order, compact separators. The hash input, except that the
    /// output location is blanked: where artifacts land is not part of the
    /// experiment's identity.
    pub fn canonical_json(&self) -> String {
        let mut hashed = self.clone();
        hashed.output_dir = None;
        serde_json::to_string(&hashed).expect("config serializes")
    }

    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical_json().as_bytes());
        hex::encode(h.finalize())
    }
}
