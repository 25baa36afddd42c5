//! Concrete stochastic systems `s⁺ = f(s, u) + w` and the 1-D example chains.

mod abstraction;
mod audit;
mod chain;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::{BoxMap, Interval, IntervalExtension, Scalar};
use crate::grid::{GridError, HyperRect};

pub use abstraction::{build_abstraction, AbstractionError};
pub use audit::{check_fu_alternative, AuditEdge, AuditReport, Kernel};
pub use chain::{ChainKind, FiniteCMP};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("unknown system '{0}'; valid names are vanderpol, dubins, chain-ex43, chain-ex52")]
    UnknownSystem(String),
    #[error("the input list is empty")]
    NoInputs,
    #[error("input {index} has dimension {found}, expected {expected}")]
    InputDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("noise support has dimension {found}, the state has {expected}")]
    NoiseDimension { expected: usize, found: usize },
    #[error("noise support {0} is empty")]
    EmptyNoise(HyperRect),
    #[error("under-approximation margin {margin} leaves no positive-volume noise support")]
    MarginTooLarge { margin: f64 },
    #[error("gaussian noise needs one positive sigma per dimension")]
    BadSigma,
    #[error("parameter '{name}' = {value} is invalid: {reason}")]
    BadParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Density of the additive noise on its support `D`.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    Uniform,
    /// Independent centred normals with the given deviations, conditioned on `D`.
    TruncatedGaussian {
        sigma: Vec<f64>,
    },
}

type PointFn = dyn Fn(&[f64], usize) -> Vec<f64> + Send + Sync;

/// A sampled-time system with additive noise of bounded support.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    inputs: Vec<Vec<f64>>,
    reach: Arc<dyn BoxMap>,
    point: Arc<PointFn>,
    noise: HyperRect,
    d_over: HyperRect,
    d_under: HyperRect,
    kind: NoiseKind,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("inputs", &self.inputs)
            .field("noise", &self.noise)
            .field("d_under", &self.d_under)
            .field("kind", &self.kind)
            .finish()
    }
}

impl SystemModel {
    /// `noise` is the support `D`; `D̄ = D` and `D̲` is `D` shrunk by
    /// `under_margin` on every side.
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<Vec<f64>>,
        reach: Arc<dyn BoxMap>,
        point: Arc<PointFn>,
        noise: HyperRect,
        under_margin: f64,
        kind: NoiseKind,
    ) -> Result<Self, ModelError> {
        let n = noise.dim();
        if inputs.is_empty() {
            return Err(ModelError::NoInputs);
        }
        let input_dim = inputs[0].len();
        if let Some((index, u)) = inputs.iter().enumerate().find(|(_, u)| u.len() != input_dim) {
            return Err(ModelError::InputDimension {
                index,
                expected: input_dim,
                found: u.len(),
            });
        }
        if noise.is_empty() {
            return Err(ModelError::EmptyNoise(noise));
        }
        if under_margin.is_nan() || under_margin < 0.0 {
            return Err(ModelError::MarginTooLarge { margin: under_margin });
        }
        let d_under = HyperRect::new(
            noise.lo().iter().map(|x| x + under_margin).collect(),
            noise.hi().iter().map(|x| x - under_margin).collect(),
        )?;
        if d_under.is_empty() || (0..n).any(|i| d_under.width(i) <= 0.0 && noise.width(i) > 0.0) {
            return Err(ModelError::MarginTooLarge { margin: under_margin });
        }
        if let NoiseKind::TruncatedGaussian { sigma } = &kind {
            if sigma.len() != n || sigma.iter().any(|s| s.is_nan() || *s <= 0.0) {
                return Err(ModelError::BadSigma);
            }
        }
        Ok(Self {
            name: name.into(),
            inputs,
            reach,
            point,
            d_over: noise.clone(),
            noise,
            d_under,
            kind,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn box_map(&self) -> &dyn BoxMap {
        self.reach.as_ref()
    }

    /// Noise support `D`.
    pub fn noise_support(&self) -> &HyperRect {
        &self.noise
    }

    pub fn d_over(&self) -> &HyperRect {
        &self.d_over
    }

    pub fn d_under(&self) -> &HyperRect {
        &self.d_under
    }

    pub fn noise_kind(&self) -> &NoiseKind {
        &self.kind
    }

    /// Nominal successor `f(s, u)`.
    pub fn nominal(&self, s: &[f64], u: usize) -> Vec<f64> {
        (self.point)(s, u)
    }

    pub fn sample_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = &self.noise;
        match &self.kind {
            NoiseKind::Uniform => (0..d.dim())
                .map(|i| {
                    if d.width(i) > 0.0 {
                        rng.random_range(d.lo()[i]..=d.hi()[i])
                    } else {
                        d.lo()[i]
                    }
                })
                .collect(),
            NoiseKind::TruncatedGaussian { sigma } => (0..d.dim())
                .map(|i| {
                    if d.width(i) == 0.0 {
                        return d.lo()[i];
                    }
                    let normal = Normal::new(0.0, sigma[i]).expect("positive sigma");
                    loop {
                        let x: f64 = normal.sample(rng);
                        if d.lo()[i] <= x && x <= d.hi()[i] {
                            return x;
                        }
                    }
                })
                .collect(),
        }
    }

    /// One step `f(s, u) + w` with freshly sampled noise.
    pub fn step<R: Rng + ?Sized>(&self, s: &[f64], u: usize, rng: &mut R) -> Vec<f64> {
        let mut next = self.nominal(s, u);
        for (x, w) in next.iter_mut().zip(self.sample_noise(rng)) {
            *x += w;
        }
        next
    }
}

/// Parameters accepted by [`builtin_system`]; `None` selects the default.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub tau: Option<f64>,
    pub velocity: Option<f64>,
    /// Scalar inputs (turn rates for the vehicle).
    pub inputs: Option<Vec<f64>>,
    pub noise: Option<HyperRect>,
    pub under_margin: f64,
    pub kind: NoiseKind,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            tau: None,
            velocity: None,
            inputs: None,
            noise: None,
            under_margin: 0.0,
            kind: NoiseKind::Uniform,
        }
    }
}

pub const VANDERPOL_TAU: f64 = 0.1;
pub const VANDERPOL_NOISE: f64 = 0.02;
pub const DUBINS_TAU: f64 = 1.0;
pub const DUBINS_VELOCITY: f64 = 0.1;
pub const DUBINS_NOISE: f64 = 0.06;
/// Default turn rates of the vehicle.
pub const DUBINS_INPUTS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

/// Either a system with additive noise or one of the example chains.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum System {
    Continuous(SystemModel),
    Chain(FiniteCMP),
}

impl System {
    pub fn dim(&self) -> usize {
        match self {
            System::Continuous(m) => m.dim(),
            System::Chain(_) => 1,
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            System::Continuous(m) => m.n_inputs(),
            System::Chain(_) => 1,
        }
    }
}

/// Van der Pol oscillator, Euler-discretized. The second coordinate is
/// `x₂ + (−x₁ + (1 − x₁²)x₂)τ`, factored so that `x₂` appears once.
pub fn vanderpol_step<S: Scalar>(x: &[S], tau: f64) -> Vec<S> {
    let (x1, x2) = (x[0], x[1]);
    vec![x1 + x2 * tau, x2 * ((x1.sqr() * -tau) + (1.0 + tau)) - x1 * tau]
}

/// Unicycle with constant speed `v` and turn rate `u`, integrated exactly
/// over one sampling period. The straight-line branch is taken for `u = 0`.
pub fn dubins_step<S: Scalar>(x: &[S], u: f64, v: f64, tau: f64) -> Vec<S> {
    let (x1, x2, x3) = (x[0], x[1], x[2]);
    if u == 0.0 {
        return vec![x1 + x3.cos() * (v * tau), x2 - x3.sin() * (v * tau), x3];
    }
    // (v/u)(sin(x₃ + uτ) − sin x₃) rewritten as a single sine/cosine of the
    // midpoint heading, which keeps interval enclosures tight.
    let chord = 2.0 * v / u * (u * tau / 2.0).sin();
    let mid = x3 + u * tau / 2.0;
    vec![x1 + mid.cos() * chord, x2 + mid.sin() * chord, x3 + u * tau]
}

fn positive(name: &'static str, value: f64) -> Result<f64, ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::BadParameter {
            name,
            value,
            reason: "must be positive",
        })
    }
}

fn noise_or(params: &SystemParams, radius: f64, dim: usize) -> Result<HyperRect, ModelError> {
    let d = params
        .noise
        .clone()
        .unwrap_or_else(|| HyperRect::symmetric(&vec![radius; dim]));
    if d.dim() != dim {
        return Err(ModelError::NoiseDimension {
            expected: dim,
            found: d.dim(),
        });
    }
    Ok(d)
}

/// Looks up one of the named benchmark systems.
pub fn builtin_system(name: &str, params: &SystemParams) -> Result<System, ModelError> {
    match name {
        "vanderpol" => {
            let tau = positive("tau", params.tau.unwrap_or(VANDERPOL_TAU))?;
            let inputs = params.inputs.clone().unwrap_or_else(|| vec![0.0]);
            let noise = noise_or(params, VANDERPOL_NOISE, 2)?;
            let reach = IntervalExtension::new(move |x: &[Interval], _| vanderpol_step(x, tau));
            SystemModel::new(
                name,
                inputs.into_iter().map(|u| vec![u]).collect(),
                Arc::new(reach),
                Arc::new(move |x: &[f64], _| vanderpol_step(x, tau)),
                noise,
                params.under_margin,
                params.kind.clone(),
            )
            .map(System::Continuous)
        }
        "dubins" => {
            let tau = positive("tau", params.tau.unwrap_or(DUBINS_TAU))?;
            let v = positive("velocity", params.velocity.unwrap_or(DUBINS_VELOCITY))?;
            let rates = params.inputs.clone().unwrap_or_else(|| DUBINS_INPUTS.to_vec());
            let noise = noise_or(params, DUBINS_NOISE, 3)?;
            let r = rates.clone();
            let reach = IntervalExtension::new(move |x: &[Interval], u| dubins_step(x, r[u], v, tau));
            let r = rates.clone();
            SystemModel::new(
                name,
                rates.into_iter().map(|u| vec![u]).collect(),
                Arc::new(reach),
                Arc::new(move |x: &[f64], u| dubins_step(x, r[u], v, tau)),
                noise,
                params.under_margin,
                params.kind.clone(),
            )
            .map(System::Continuous)
        }
        "chain-ex43" => Ok(System::Chain(FiniteCMP::new(ChainKind::Quadratic))),
        "chain-ex52" => Ok(System::Chain(FiniteCMP::new(ChainKind::Constant))),
        other => Err(ModelError::UnknownSystem(other.to_string())),
    }
}
