//! Run configuration: TOML text, scenario library and validation.
//!
//! A minimal file may name only a scenario; every omitted key is filled in
//! and the resolved configuration can be echoed back as TOML.
//!
//! ```toml
//! scenario = "channel-inflow-shear"
//!
//! [grid]
//! k = 6
//! p = 24
//!
//! [schedule]
//! tau0 = 0.2
//! m = 2.0
//! ```

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic_norms::{NormParams, RadiusSchedule};
use crate::grid_field::{GridField, VectorGridField};
use crate::pressure::BoundaryForm;
use crate::solver::{PicardSettings, RunSpec, SolverSettings};
use crate::suites::{random_stream_function, stream_function, BaseFlow, RandomSpec, StreamMode, DEFAULT_SEED};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Driver {
    #[default]
    Rk4,
    Picard,
}

impl std::str::FromStr for Driver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Driver::Rk4),
            "picard" => Ok(Driver::Picard),
            _ => Err(Error::Config(format!("unknown driver {s:?}; expected rk4 or picard"))),
        }
    }
}

/// Initial perturbation `v0`, always built from a stream function vanishing
/// on the walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Modes {
        modes: Vec<StreamMode>,
    },
    /// Seeded from the top-level `seed`.
    Random(RandomSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub k: usize,
    pub p: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { k: 6, p: 24 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub dt: f64,
    /// Final time; defaults to `tau0 / M`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    pub sample_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    /// Blow-up ceiling on `||v||_X~`; defaults to 1000 times the initial value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ceiling: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            dt: 1e-4,
            t0: None,
            sample_every: 1,
            checkpoint_every: None,
            ceiling: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub tau0: f64,
    pub m: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { tau0: 0.2, m: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormConfig {
    pub r: u32,
    pub eps: f64,
    pub n_max: usize,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            r: 3,
            eps: 0.5,
            n_max: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    pub iterations: usize,
    pub nodes: usize,
    pub floor: f64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let d = PicardSettings::default();
        PicardConfig {
            iterations: 20,
            nodes: d.nodes,
            floor: d.floor,
        }
    }
}

/// Parameters of the estimate suites run by the `check-*` commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub tau: f64,
    pub eps: f64,
    pub n_max: usize,
    pub suite_size: usize,
    pub max_k: u32,
    pub max_m: u32,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            tau: 0.1,
            eps: 0.1,
            n_max: 8,
            suite_size: 20,
            max_k: 3,
            max_m: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_scenario")]
    pub scenario: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub driver: Driver,
    #[serde(default)]
    pub boundary_form: BoundaryForm,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub norms: NormConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    /// Overrides the scenario's base flow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_flow: Option<BaseFlow>,
    /// Overrides the scenario's initial data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
}

fn default_scenario() -> String {
    "channel-inflow-shear".into()
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("the empty configuration is valid")
    }
}

/// Named pairs of base flow and initial data.
pub const SCENARIOS: &[&str] = &[
    "channel-inflow-shear",
    "uniform-inflow",
    "transpiration",
    "cellular",
    "rest",
    "zero-data",
];

fn small_modes() -> InitialData {
    InitialData::Modes {
        modes: vec![
            StreamMode {
                k: 1,
                m: 1,
                cos: 0.0,
                sin: 0.02,
            },
            StreamMode {
                k: 2,
                m: 2,
                cos: 0.01,
                sin: 0.0,
            },
        ],
    }
}

pub fn scenario(name: &str) -> Result<(BaseFlow, InitialData)> {
    Ok(match name {
        "channel-inflow-shear" => (BaseFlow::InflowShear { speed: 1.0, shear: 0.3 }, small_modes()),
        "uniform-inflow" => (BaseFlow::Uniform { speed: 1.0 }, small_modes()),
        "transpiration" => (
            BaseFlow::Transpiration {
                speed: 1.0,
                amplitude: 0.05,
            },
            small_modes(),
        ),
        "cellular" => (BaseFlow::Cellular { amplitude: 0.1 }, small_modes()),
        "rest" => (BaseFlow::Rest, small_modes()),
        "zero-data" => (BaseFlow::InflowShear { speed: 1.0, shear: 0.3 }, InitialData::Zero),
        _ => {
            return Err(Error::Config(format!(
                "unknown scenario {name:?}; known scenarios: {}",
                SCENARIOS.join(", ")
            )))
        }
    })
}

/// Parse, fill defaults from the scenario and validate.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunConfig {
    /// Fill scenario defaults and `T0`, then validate.
    pub fn resolve(&mut self) -> Result<()> {
        let (flow, init) = scenario(&self.scenario)?;
        self.base_flow.get_or_insert(flow);
        self.initial.get_or_insert(init);
        self.time.t0.get_or_insert(self.schedule.tau0 / self.schedule.m);
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let GridConfig { k, p } = self.grid;
        if k < 1 {
            return Err(Error::Config("grid.k must be at least 1".into()));
        }
        if p < 8 {
            return Err(Error::Config(format!("grid.p = {p} but at least 8 is required")));
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return Err(Error::Config(format!("time.dt = {} must be positive", self.time.dt)));
        }
        if self.time.sample_every == 0 {
            return Err(Error::Config("time.sample_every must be at least 1".into()));
        }
        if self.time.checkpoint_every == Some(0) {
            return Err(Error::Config("time.checkpoint_every must be at least 1".into()));
        }
        if let Some(c) = self.time.ceiling {
            if !(c > 0.0) {
                return Err(Error::Config(format!("time.ceiling = {c} must be positive")));
            }
        }
        self.schedule()?;
        self.norm_params()?;
        if self.picard.iterations < 2 {
            return Err(Error::Config("picard.iterations must be at least 2".into()));
        }
        if self.picard.nodes < 2 {
            return Err(Error::Config("picard.nodes must be at least 2".into()));
        }
        if !(self.picard.floor > 0.0 && self.picard.floor < 1.0) {
            return Err(Error::Config(format!(
                "picard.floor = {} must lie in (0, 1)",
                self.picard.floor
            )));
        }
        self.check_params()?;
        if self.checks.suite_size < 2 || self.checks.max_m == 0 {
            return Err(Error::Config("checks need suite_size >= 2 and max_m >= 1".into()));
        }
        if let Some(f) = &self.base_flow {
            f.validate()?;
        }
        match &self.initial {
            Some(InitialData::Modes { modes }) => {
                if let Some(bad) = modes
                    .iter()
                    .find(|m| m.m == 0 || !m.cos.is_finite() || !m.sin.is_finite())
                {
                    return Err(Error::Config(format!(
                        "initial mode {bad:?} needs m >= 1 and finite amplitudes"
                    )));
                }
            }
            Some(InitialData::Random(r)) => {
                if r.max_m == 0 || !r.amplitude.is_finite() {
                    return Err(Error::Config(
                        "random initial data needs max_m >= 1 and a finite amplitude".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Radius schedule; rejects `T0 > tau0 / M`.
    pub fn schedule(&self) -> Result<RadiusSchedule> {
        let t0 = self.time.t0.unwrap_or(self.schedule.tau0 / self.schedule.m);
        RadiusSchedule::new(self.schedule.tau0, self.schedule.m, t0)
    }

    /// Norm parameters at the initial radius.
    pub fn norm_params(&self) -> Result<NormParams> {
        NormParams::new(self.norms.r, self.schedule.tau0, self.norms.eps, self.norms.n_max)
    }

    pub fn check_params(&self) -> Result<NormParams> {
        NormParams::new(self.norms.r, self.checks.tau, self.checks.eps, self.checks.n_max)
    }

    /// Unit-amplitude random suite for the estimate checks.
    pub fn check_suite(&self, impermeable: bool) -> Vec<crate::mode_field::VectorModeField> {
        let spec = RandomSpec {
            max_k: self.checks.max_k,
            max_m: self.checks.max_m,
            amplitude: 1.0,
        };
        crate::suites::random_velocity_suite(self.seed, self.checks.suite_size, &spec, impermeable)
    }

    pub fn settings(&self) -> SolverSettings {
        SolverSettings {
            form: self.boundary_form,
            ..SolverSettings::default()
        }
    }

    pub fn picard_settings(&self) -> PicardSettings {
        PicardSettings {
            nodes: self.picard.nodes,
            floor: self.picard.floor,
        }
    }

    pub fn base_flow(&self) -> BaseFlow {
        self.base_flow.unwrap_or_default()
    }

    pub fn initial_velocity(&self) -> VectorGridField {
        let GridConfig { k, p } = self.grid;
        let psi = match self.initial.as_ref().unwrap_or(&InitialData::Zero) {
            InitialData::Zero => return VectorGridField::zeros(k, p),
            InitialData::Modes { modes } => stream_function(modes),
            InitialData::Random(spec) => random_stream_function(&mut ChaCha8Rng::seed_from_u64(self.seed), spec, true),
        };
        VectorGridField::from_stream_function(&GridField::from_mode(&psi, k, p).0)
    }

    pub fn base_velocity(&self) -> VectorGridField {
        VectorGridField::from_mode(&self.base_flow().field(), self.grid.k, self.grid.p).0
    }

    pub fn to_run_spec(&self) -> Result<RunSpec> {
        Ok(RunSpec {
            v0: self.initial_velocity(),
            ubar: self.base_velocity(),
            schedule: self.schedule()?,
            dt: self.time.dt,
            norms: self.norm_params()?,
            settings: self.settings(),
            ceiling: self.time.ceiling,
            sample_every: self.time.sample_every,
            checkpoint_every: self.time.checkpoint_every,
            checkpoint_dir: self.time.checkpoint_every.map(|_| self.out.join("checkpoints")),
        })
    }

    /// The resolved configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Echo with the output directory reset, so that the same run written to
    /// two places hashes the same.
    pub fn canonical(&self) -> String {
        RunConfig {
            out: default_out(),
            ..self.clone()
        }
        .echo()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults_and_echoes() {
        let cfg = parse_config("scenario = \"uniform-inflow\"\n").unwrap();
        assert_eq!(cfg.base_flow, Some(BaseFlow::Uniform { speed: 1.0 }));
        assert_eq!(cfg.time.t0, Some(0.1));
        assert_eq!(cfg.seed, DEFAULT_SEED);
        let back = parse_config(&cfg.echo()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn radius_constraint_is_named() {
        let err = parse_config("[schedule]\ntau0 = 0.2\nm = 2.0\n[time]\nt0 = 0.2\n").unwrap_err();
        assert!(
            matches!(&err, Error::Config(m) if m.contains("radius constraint")),
            "{err}"
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config("colour = 3\n"), Err(Error::Config(_))));
        assert!(matches!(
            parse_config("[grid]\nk = 4\np = 16\nq = 1\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn existence_hypotheses_are_checked() {
        assert!(parse_config("[norms]\nr = 2\nn_max = 6\n").is_err());
        assert!(parse_config("[norms]\neps = 1.0\n").is_err());
        assert!(parse_config("[time]\ndt = 0.0\n").is_err());
        assert!(parse_config("scenario = \"nope\"\n").is_err());
    }

    #[test]
    fn inflow_shear_scenario_is_solenoidal() {
        let cfg = parse_config("scenario = \"channel-inflow-shear\"\n").unwrap();
        assert!(cfg.base_flow().field().is_divergence_free());
        let text = "[base_flow]\nfamily = \"inflow-shear\"\nspeed = 1.0\nshear = 0.5\n";
        assert_eq!(
            parse_config(text).unwrap().base_flow,
            Some(BaseFlow::InflowShear { speed: 1.0, shear: 0.5 })
        );
    }

    #[test]
    fn initial_data_variants_parse() {
        let cfg = parse_config("[initial]\nkind = \"random\"\nmax_k = 1\nmax_m = 2\namplitude = 0.01\n").unwrap();
        let v = cfg.initial_velocity();
        assert!(v.l2_norm() > 0.0);
        assert_eq!(v, cfg.initial_velocity());
        let cfg = parse_config("[initial]\nkind = \"modes\"\nmodes = [{ k = 1, m = 1, sin = 0.1 }]\n").unwrap();
        assert!(cfg.initial_velocity().normal_trace_norm() < 1e-14);
        assert_eq!(
            parse_config("[initial]\nkind = \"zero\"\n")
                .unwrap()
                .initial_velocity()
                .l2_norm(),
            0.0
        );
    }
}
