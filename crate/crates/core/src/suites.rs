//! Closed-form base flows and seeded random test fields.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mode_field::{ModeField, VectorModeField, VerticalBasis};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Steady, divergence-free base flows `ubar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseFlow {
    /// `ubar = 0`
    Rest,
    /// `ubar = (speed, 0)`
    Uniform { speed: f64 },
    /// `ubar = (speed + shear cos(pi x2), 0)`, a parallel shear flow
    InflowShear { speed: f64, shear: f64 },
    /// `ubar = (speed, -2 pi amplitude cos(2 pi x1))`: fluid enters through
    /// one part of each wall and leaves through another
    Transpiration { speed: f64, amplitude: f64 },
    /// `ubar = grad-perp (amplitude sin(pi x2) sin(2 pi x1))`
    Cellular { amplitude: f64 },
}

impl Default for BaseFlow {
    fn default() -> Self {
        BaseFlow::InflowShear { speed: 1.0, shear: 0.0 }
    }
}

impl BaseFlow {
    pub fn field(&self) -> VectorModeField {
        match *self {
            BaseFlow::Rest => VectorModeField::zero(),
            BaseFlow::Uniform { speed } => VectorModeField::new(ModeField::constant(speed), ModeField::zero()),
            BaseFlow::InflowShear { speed, shear } => VectorModeField::new(
                ModeField::constant(speed).add(&ModeField::cos_x1(0, VerticalBasis::Cos(1), shear)),
                ModeField::zero(),
            ),
            BaseFlow::Transpiration { speed, amplitude } => VectorModeField::new(
                ModeField::constant(speed),
                ModeField::cos_x1(1, VerticalBasis::ONE, -2.0 * PI * amplitude),
            ),
            BaseFlow::Cellular { amplitude } => {
                VectorModeField::from_stream_function(&ModeField::sin_x1(1, VerticalBasis::Sin(1), amplitude))
            }
        }
    }

    /// Exact divergence check in mode algebra.
    pub fn validate(&self) -> Result<()> {
        let f = self.field();
        if !f.is_divergence_free() {
            return Err(Error::Config(format!("base flow {self:?} is not divergence-free")));
        }
        Ok(())
    }
}

/// One stream-function mode `(c cos(2 pi k x1) + s sin(2 pi k x1)) sin(m pi x2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamMode {
    pub k: u32,
    pub m: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl StreamMode {
    fn field(&self) -> ModeField {
        let b = VerticalBasis::Sin(self.m);
        let k = self.k as i64;
        ModeField::cos_x1(k, b, self.cos).add(&ModeField::sin_x1(k, b, self.sin))
    }
}

/// Stream function vanishing on both walls, so its velocity is impermeable.
pub fn stream_function(modes: &[StreamMode]) -> ModeField {
    modes.iter().fold(ModeField::zero(), |acc, m| acc.add(&m.field()))
}

/// Random field parameters; amplitudes decay like `1 / (k + m)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub max_k: u32,
    pub max_m: u32,
    pub amplitude: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_k: 2,
            max_m: 2,
            amplitude: 0.05,
        }
    }
}

/// Random stream function. With `impermeable` the vertical profiles are
/// `sin(m pi x2)`; otherwise `cos` profiles are mixed in.
pub fn random_stream_function(rng: &mut ChaCha8Rng, spec: &RandomSpec, impermeable: bool) -> ModeField {
    let mut psi = ModeField::zero();
    for k in 0..=spec.max_k {
        for m in 1..=spec.max_m {
            let w = spec.amplitude / ((k + m) as f64).powi(2);
            let basis = if impermeable || rng.gen_bool(0.5) {
                VerticalBasis::Sin(m)
            } else {
                VerticalBasis::Cos(m)
            };
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            psi = psi.add(&ModeField::cos_x1(k as i64, basis, w * a));
            if k > 0 {
                psi = psi.add(&ModeField::sin_x1(k as i64, basis, w * b));
            }
        }
    }
    psi
}

/// `count` random divergence-free velocities from one seed.
pub fn random_velocity_suite(seed: u64, count: usize, spec: &RandomSpec, impermeable: bool) -> Vec<VectorModeField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| VectorModeField::from_stream_function(&random_stream_function(&mut rng, spec, impermeable)))
        .collect()
}
