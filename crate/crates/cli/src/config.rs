use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wflow_core::convex::{AssumptionReport, CostSpec, EnergySpec, EnergyTerm, PotentialSpec, Preset};
use wflow_core::density::{Domain, GridDensity, Profile};
use wflow_core::jko::{JkoProblem, SolverOptions};
use wflow_core::Model;

/// One run, as read from a flat TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Named family; omit to give `cost_q` and `energy` explicitly.
    pub preset: Option<String>,
    pub exponent_m: Option<f64>,
    pub exponent_p: Option<f64>,
    pub exponent_n: Option<f64>,
    pub kappa: Option<f64>,
    pub center: Option<f64>,

    /// Explicit model: `c = |z|^q / q`.
    pub cost_q: Option<f64>,
    /// `"entropy"` or `"power"`.
    pub energy: Option<String>,
    pub energy_m: Option<f64>,
    pub energy_coef: Option<f64>,

    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "default_cells")]
    pub n: usize,
    #[serde(default = "default_cells")]
    pub m: usize,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_t")]
    pub t_final: f64,

    pub rho0: Option<Profile>,
    /// `x,rho` file, relative to the config file.
    pub rho0_csv: Option<PathBuf>,
    pub floor_delta: Option<f64>,

    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,

    /// Crosscheck reference: `"fd"` or `"barenblatt"`.
    #[serde(default = "default_reference")]
    pub reference: String,
    pub reference_domain: Option<[f64; 2]>,
    pub reference_dt: Option<f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,

    /// Output root; `WFLOW_OUT` takes precedence.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

fn one() -> f64 {
    1.0
}
fn default_cells() -> usize {
    64
}
fn default_h() -> f64 {
    0.01
}
fn default_t() -> f64 {
    0.1
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    200
}
fn default_reference() -> String {
    "fd".into()
}
fn default_threshold() -> f64 {
    1e-2
}

/// A config together with where it came from.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub dir: PathBuf,
    /// Digest of the initial-data file, if any.
    pub csv_digest: Option<String>,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let csv_digest = match &config.rho0_csv {
        Some(p) => {
            let full = dir.join(p);
            let bytes = std::fs::read(&full).with_context(|| format!("initial density {}", full.display()))?;
            Some(hex::encode(Sha256::digest(&bytes)))
        }
        None => None,
    };
    if config.rho0.is_some() && config.rho0_csv.is_some() {
        bail!("give either rho0 or rho0_csv, not both");
    }
    Ok(Loaded { config, dir, csv_digest })
}

fn need(v: Option<f64>, key: &str, preset: &str) -> Result<f64> {
    v.ok_or_else(|| anyhow!("preset {preset} needs {key}"))
}

impl RunConfig {
    pub fn domain(&self) -> Result<Domain> {
        Ok(Domain::new(self.a, self.b)?)
    }

    pub fn preset(&self) -> Result<Option<Preset>> {
        let Some(name) = self.preset.as_deref() else { return Ok(None) };
        let p = match name {
            "fokker-planck" => Preset::FokkerPlanck { kappa: self.kappa.unwrap_or(1.0), center: self.center.unwrap_or(0.0) },
            "heat" => Preset::Heat,
            "porous-medium" => Preset::PorousMedium { m: need(self.exponent_m, "exponent_m", name)? },
            "fast-diffusion" => Preset::FastDiffusion { m: need(self.exponent_m, "exponent_m", name)? },
            "generalized-heat" => Preset::GeneralizedHeat { p: need(self.exponent_p, "exponent_p", name)? },
            "p-laplacian" => Preset::PLaplacian { p: need(self.exponent_p, "exponent_p", name)? },
            "doubly-degenerate" => {
                Preset::DoublyDegenerate { n: need(self.exponent_n, "exponent_n", name)?, p: need(self.exponent_p, "exponent_p", name)? }
            }
            other => bail!("unknown preset {other:?}"),
        };
        Ok(Some(p))
    }

    /// Directory prefix: the preset name or `custom`.
    pub fn label(&self) -> &str {
        self.preset.as_deref().unwrap_or("custom")
    }

    /// Model plus the assumption report, including the family range check.
    pub fn model(&self) -> Result<(Model, AssumptionReport)> {
        let domain = self.domain()?;
        if let Some(p) = self.preset()? {
            if self.cost_q.is_some() || self.energy.is_some() {
                bail!("preset and explicit cost/energy keys are exclusive");
            }
            let model = Model::from_preset(&p, domain)?;
            let mut report = model.validate();
            report.push(p.range_check());
            return Ok((model, report));
        }
        let q = self.cost_q.ok_or_else(|| anyhow!("need preset or cost_q"))?;
        let cost = CostSpec::power(q)?;
        let coef = self.energy_coef.unwrap_or(1.0);
        let energy = match self.energy.as_deref() {
            Some("entropy") => EnergySpec::new(vec![EnergyTerm::Entropy { coef }])?,
            Some("power") => {
                EnergySpec::new(vec![EnergyTerm::Power { coef, m: self.energy_m.ok_or_else(|| anyhow!("power energy needs energy_m"))? }])?
            }
            Some(other) => bail!("unknown energy {other:?}"),
            None => bail!("explicit model needs energy"),
        };
        let potential = match self.kappa {
            Some(k) => PotentialSpec::quadratic(k, self.center.unwrap_or(0.0))?,
            None => PotentialSpec::Zero,
        };
        let model = Model::new(cost, energy, potential, domain);
        let report = model.validate();
        Ok((model, report))
    }

    pub fn initial(&self, dir: &Path) -> Result<GridDensity> {
        let domain = self.domain()?;
        let rho = match (&self.rho0, &self.rho0_csv) {
            (_, Some(p)) => {
                let full = dir.join(p);
                let g = GridDensity::load_csv(&full, Some(domain)).with_context(|| format!("initial density {}", full.display()))?;
                if g.n() == self.n {
                    g
                } else {
                    g.rebin(self.n)?
                }
            }
            (Some(profile), None) => profile.density(domain, self.n)?,
            (None, None) => Profile::Cosine { amplitude: 0.5, mode: 1 }.density(domain, self.n)?,
        };
        match self.floor_delta {
            Some(d) => Ok(rho.floored(d)?),
            None => Ok(rho),
        }
    }

    pub fn problem(&self, model: Model, report: AssumptionReport, force: bool) -> Result<JkoProblem> {
        let p = JkoProblem::with_report(model, self.h, self.m, self.n, report, force)?;
        Ok(p.with_options(SolverOptions { tol: self.tol, max_iter: self.max_iter }))
    }

    /// First 12 hex digits of the SHA-256 of the canonical config JSON and
    /// any extra inputs.
    pub fn digest(&self, extra: &serde_json::Value) -> String {
        let doc = serde_json::json!({ "config": self, "extra": extra });
        let full = hex::encode(Sha256::digest(doc.to_string().as_bytes()));
        full[..12].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> RunConfig {
        toml::from_str(s).unwrap()
    }

    #[test]
    fn defaults() {
        let c = parse("preset = \"fokker-planck\"");
        assert_eq!((c.n, c.m, c.h, c.t_final), (64, 64, 0.01, 0.1));
        assert!(matches!(c.preset().unwrap(), Some(Preset::FokkerPlanck { kappa, .. }) if kappa == 1.0));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(toml::from_str::<RunConfig>("preset = \"heat\"\nsteps = 3").is_err());
    }

    #[test]
    fn missing_exponent() {
        let c = parse("preset = \"porous-medium\"");
        assert!(c.model().is_err());
    }

    #[test]
    fn profile_table() {
        let c = parse("preset = \"heat\"\nrho0 = { profile = \"gaussian\", center = 0.5, width = 0.1, floor = 0.1 }");
        assert!(matches!(c.rho0, Some(Profile::Gaussian { .. })));
        assert_eq!(c.initial(Path::new(".")).unwrap().n(), 64);
    }

    #[test]
    fn digest_ignores_output_root() {
        let mut c = parse("preset = \"heat\"");
        let d = c.digest(&serde_json::Value::Null);
        c.output = Some("elsewhere".into());
        assert_eq!(c.digest(&serde_json::Value::Null), d);
        c.h = 0.02;
        assert_ne!(c.digest(&serde_json::Value::Null), d);
    }

    #[test]
    fn out_of_range_preset_fails_report() {
        let c = parse("preset = \"fast-diffusion\"\nexponent_m = 0.3");
        let (_, r) = c.model().unwrap();
        assert!(!r.all_pass());
    }
}
