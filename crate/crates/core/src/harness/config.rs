//! JSON experiment configuration shared by all commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conductance::ConductanceProfile;
use crate::error::{Error, Result};
use crate::exclusion::{CylinderFunction, SimParams};
use crate::hydro::PhiFunction;
use crate::profiles::Profile;

fn default_horizon() -> f64 {
    0.05
}

fn default_replicates() -> usize {
    1
}

fn default_initial() -> Profile {
    Profile::constant(0.5)
}

fn default_test_functions() -> Vec<Profile> {
    vec![Profile::cosine(0.0, 1.0)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: ConductanceProfile,
    /// Grid sizes; single-grid commands run once per entry.
    pub n: Vec<usize>,
    #[serde(default)]
    pub a: f64,
    /// Coefficients `[a_2, a_3, ...]` of `Phi`; defaults to `[a]`.
    #[serde(default)]
    pub phi: Option<PhiFunction>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Defaults to `[horizon]`.
    #[serde(default)]
    pub observable_times: Vec<f64>,
    /// Initial density `rho_0` / `gamma`.
    #[serde(default = "default_initial")]
    pub initial: Profile,
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<Profile>,
    /// Admits `N < 4` (exact-generator cross-checks).
    #[serde(default)]
    pub oracle: bool,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub pde: PdeOptions,
    #[serde(default)]
    pub converge: ConvergeOptions,
    #[serde(default)]
    pub diagnose: DiagnoseOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumOptions {
    pub lambdas: Vec<f64>,
    pub random_inputs: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            lambdas: vec![0.5, 1.0, 10.0],
            random_inputs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateOptions {
    /// Write `replicate,time,site_index,occupancy` rows.
    pub write_sites: bool,
    /// Also write box averages over boxes of this side.
    pub box_side: Option<usize>,
    /// Total-variation tolerance of the exact-generator comparison.
    pub oracle_tv: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            write_sites: true,
            box_side: None,
            oracle_tv: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeOptions {
    /// Overrides the default step (must respect the stability bound).
    pub dt: Option<f64>,
    /// Uniform stored times on `[0, horizon]`, endpoints included.
    pub stored_times: usize,
    pub lambdas: Vec<f64>,
    /// Weak residual must be `<= residual_tol * ||H||_inf`.
    pub residual_tol: f64,
    /// L-infinity tolerance of the spectral comparison when `Phi` is linear.
    pub linear_tol: f64,
}

impl Default for PdeOptions {
    fn default() -> Self {
        Self {
            dt: None,
            stored_times: 64,
            lambdas: vec![1.0, 10.0],
            residual_tol: 1e-4,
            linear_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeOptions {
    /// Reference grid; defaults to `4 * max(n)`.
    pub n_ref: Option<usize>,
    /// Required mean error at the largest `N`, if any.
    pub final_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseOptions {
    pub lambda: f64,
    /// Box scales of the replacement diagnostic.
    pub eps: Vec<f64>,
    pub cylinder: CylinderFunction,
    /// Uniform snapshots on `[0, horizon]`.
    pub snapshots: usize,
    pub k1: f64,
    pub energy_eps: f64,
    pub energy_delta: f64,
    /// Highest frequency of the test-function dictionary.
    pub dictionary_kmax: usize,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eps: vec![0.5, 0.25, 0.125],
            cylinder: CylinderFunction::Pair { axis: 0 },
            snapshots: 64,
            k1: crate::energy::DEFAULT_K1,
            energy_eps: 0.125,
            energy_delta: 0.0625,
            dictionary_kmax: 2,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    pub fn phi(&self) -> Result<PhiFunction> {
        match &self.phi {
            Some(p) => Ok(p.clone()),
            None => PhiFunction::quadratic(self.a),
        }
    }

    pub fn observable_times(&self) -> Vec<f64> {
        if self.observable_times.is_empty() {
            vec![self.horizon]
        } else {
            self.observable_times.clone()
        }
    }

    fn min_n(&self) -> usize {
        if self.oracle {
            2
        } else {
            4
        }
    }

    /// Simulation parameters at grid size `n` with the given snapshot times.
    pub fn sim_params(&self, n: usize, times: Vec<f64>) -> Result<SimParams> {
        let p = SimParams {
            n,
            dim: self.dim(),
            a: self.a,
            profile: self.profile.clone(),
            horizon: self.horizon,
            seed: self.seed,
            observable_times: times,
        };
        p.validate(self.min_n())?;
        Ok(p)
    }

    /// Checks shared by every command; runs before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return Err(Error::Config("`n` lists no grid sizes".into()));
        }
        for &n in &self.n {
            self.sim_params(n, self.observable_times())?;
        }
        self.phi()?;
        if self.replicates == 0 {
            return Err(Error::Config("replicate count must be positive".into()));
        }
        if self.test_functions.is_empty() {
            return Err(Error::Config("no test functions given".into()));
        }
        Ok(())
    }
}
