use serde::{Deserialize, Serialize};

use crate::conductance::ConductanceProfile;
use crate::error::{Error, Result};
use crate::field::Lattice;

/// Occupancy field `eta` on `T_N^d`, one byte per site holding 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    lattice: Lattice,
    occupancy: Vec<u8>,
}

impl Configuration {
    pub fn new(dim: usize, n: usize, occupancy: Vec<u8>) -> Result<Self> {
        let lattice = Lattice::new(dim, n);
        if occupancy.len() != lattice.sites() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} sites", lattice.sites()),
                got: format!("{} sites", occupancy.len()),
            });
        }
        if occupancy.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter(
                "occupancy entries must be 0 or 1".into(),
            ));
        }
        Ok(Self { lattice, occupancy })
    }

    pub fn empty(dim: usize, n: usize) -> Self {
        Self::filled(dim, n, 0)
    }

    pub fn full(dim: usize, n: usize) -> Self {
        Self::filled(dim, n, 1)
    }

    fn filled(dim: usize, n: usize, v: u8) -> Self {
        let lattice = Lattice::new(dim, n);
        Self {
            occupancy: vec![v; lattice.sites()],
            lattice,
        }
    }

    /// Decodes a state index of the exact oracle: bit `s` is `eta(s)`.
    pub fn from_bits(dim: usize, n: usize, bits: usize) -> Self {
        let lattice = Lattice::new(dim, n);
        let occupancy = (0..lattice.sites())
            .map(|s| ((bits >> s) & 1) as u8)
            .collect();
        Self { lattice, occupancy }
    }

    pub fn to_bits(&self) -> usize {
        self.occupancy
            .iter()
            .enumerate()
            .fold(0, |acc, (s, &v)| acc | ((v as usize) << s))
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn n(&self) -> usize {
        self.lattice.n
    }

    pub fn sites(&self) -> usize {
        self.occupancy.len()
    }

    #[inline]
    pub fn get(&self, site: usize) -> u8 {
        self.occupancy[site]
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    pub fn particle_count(&self) -> usize {
        self.occupancy.iter().map(|&v| v as usize).sum()
    }

    pub fn density(&self) -> f64 {
        self.particle_count() as f64 / self.sites() as f64
    }

    pub(crate) fn swap_sites(&mut self, x: usize, y: usize) {
        self.occupancy.swap(x, y);
    }
}

/// Parameters of one run of the speeded-up exclusion dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub n: usize,
    pub dim: usize,
    /// Interaction strength in `c = 1 + a (eta(x - e_j) + eta(x + 2 e_j))`.
    pub a: f64,
    pub profile: ConductanceProfile,
    /// Macroscopic time horizon.
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub observable_times: Vec<f64>,
}

impl SimParams {
    /// Validated parameters for production runs (`N >= 4`).
    pub fn new(
        n: usize,
        a: f64,
        profile: ConductanceProfile,
        horizon: f64,
        seed: u64,
        observable_times: Vec<f64>,
    ) -> Result<Self> {
        let p = Self::oracle(n, a, profile, horizon, seed, observable_times)?;
        if n < 4 {
            return Err(Error::InvalidParameter(format!("grid size {n} < 4")));
        }
        Ok(p)
    }

    /// Like [`SimParams::new`] but admits the tiny lattices (`N >= 2`) used
    /// against the exact generator.
    pub fn oracle(
        n: usize,
        a: f64,
        profile: ConductanceProfile,
        horizon: f64,
        seed: u64,
        observable_times: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            n,
            dim: profile.dim(),
            a,
            profile,
            horizon,
            seed,
            observable_times,
        };
        p.validate(2)?;
        Ok(p)
    }

    pub fn validate(&self, min_n: usize) -> Result<()> {
        if self.n < min_n {
            return Err(Error::InvalidParameter(format!(
                "grid size {} < {min_n}",
                self.n
            )));
        }
        if self.dim != self.profile.dim() {
            return Err(Error::InvalidParameter(format!(
                "dim {} does not match profile dim {}",
                self.dim,
                self.profile.dim()
            )));
        }
        if !(self.a > -0.5 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "interaction a = {} must exceed -1/2",
                self.a
            )));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} < 0",
                self.horizon
            )));
        }
        let times = &self.observable_times;
        if times.iter().any(|&t| !(0.0..=self.horizon).contains(&t)) {
            return Err(Error::InvalidParameter(
                "observable times must lie in [0, horizon]".into(),
            ));
        }
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(
                "observable times must be sorted".into(),
            ));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.dim, self.n)
    }

    /// `count` uniformly spaced times `0, T/(count-1), ..., T`.
    pub fn uniform_times(horizon: f64, count: usize) -> Vec<f64> {
        match count {
            0 => Vec::new(),
            1 => vec![horizon],
            _ => (0..count)
                .map(|k| horizon * k as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

/// Local functions of the configuration appearing in the drift and in the
/// replacement diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CylinderFunction {
    /// `eta(0)`.
    Occupation,
    /// `h_{1,j} = eta(0) eta(e_j)`.
    Pair { axis: usize },
    /// `h_{2,j} = eta(-e_j) eta(e_j)`.
    Straddle { axis: usize },
    /// `eta(0) + a eta(0) eta(e_j)`.
    Affine { axis: usize, a: f64 },
}

impl CylinderFunction {
    /// `(tau_x g)(eta)`.
    pub fn eval_at(&self, eta: &Configuration, x: usize) -> f64 {
        let l = eta.lattice();
        let at = |s: usize| eta.get(s) as f64;
        match *self {
            Self::Occupation => at(x),
            Self::Pair { axis } => at(x) * at(l.shift(x, axis, 1)),
            Self::Straddle { axis } => at(l.shift(x, axis, -1)) * at(l.shift(x, axis, 1)),
            Self::Affine { axis, a } => at(x) + a * at(x) * at(l.shift(x, axis, 1)),
        }
    }

    /// `g~(alpha) = E_{nu_alpha}[g]`.
    pub fn g_tilde(&self, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameter(format!(
                "density {alpha} outside [0, 1]"
            )));
        }
        Ok(self.g_tilde_unchecked(alpha))
    }

    pub(crate) fn g_tilde_unchecked(&self, alpha: f64) -> f64 {
        match *self {
            Self::Occupation => alpha,
            Self::Pair { .. } | Self::Straddle { .. } => alpha * alpha,
            Self::Affine { a, .. } => alpha + a * alpha * alpha,
        }
    }

    pub fn axis(&self) -> Option<usize> {
        match *self {
            Self::Occupation => None,
            Self::Pair { axis } | Self::Straddle { axis } | Self::Affine { axis, .. } => Some(axis),
        }
    }
}
