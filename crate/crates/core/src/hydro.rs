//! The hydrodynamic equation `d_t rho = L_W Phi(rho)` discretized as
//! `d rho / dt = L_N Phi(rho)` and integrated by explicit Euler.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::generator::GeneratorND;

/// Slack allowed on `[0, 1]` for values produced by floating-point steps.
pub const RANGE_TOL: f64 = 1e-12;

/// Safety factor in the stability bound `dt <= theta / (2 d N^2 max xi max Phi')`.
pub const CFL_THETA: f64 = 0.9;

/// `Phi(alpha) = alpha + sum_{j >= 2} a_j alpha^j`, stored as `[a_2, a_3, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhiFunction {
    coefficients: Vec<f64>,
    max_derivative: f64,
}

impl TryFrom<Vec<f64>> for PhiFunction {
    type Error = Error;

    fn try_from(c: Vec<f64>) -> Result<Self> {
        Self::new(c)
    }
}

impl From<PhiFunction> for Vec<f64> {
    fn from(p: PhiFunction) -> Self {
        p.coefficients
    }
}

impl PhiFunction {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "Phi coefficients must be finite".into(),
            ));
        }
        let mut phi = Self {
            coefficients,
            max_derivative: 0.0,
        };
        let (lo, hi) = phi.derivative_range();
        let constraint = 1.0
            + phi
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, a)| (i + 2) as f64 * a)
                .sum::<f64>();
        if !(lo > 0.0) || !(constraint > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Phi' must be positive on [0, 1]; its minimum is {lo}"
            )));
        }
        phi.max_derivative = hi;
        Ok(phi)
    }

    /// `Phi(alpha) = alpha`.
    pub fn linear() -> Self {
        Self::new(Vec::new()).expect("identity is admissible")
    }

    /// `Phi(alpha) = alpha + a alpha^2`, the hydrodynamic flux of the
    /// exclusion process with interaction `a`.
    pub fn quadratic(a: f64) -> Result<Self> {
        Self::new(vec![a])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn max_derivative(&self) -> f64 {
        self.max_derivative
    }

    fn check(alpha: f64) -> Result<()> {
        if (-RANGE_TOL..=1.0 + RANGE_TOL).contains(&alpha) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "density {alpha} outside [0, 1]"
            )))
        }
    }

    pub fn eval(&self, alpha: f64) -> Result<f64> {
        Self::check(alpha)?;
        Ok(self.eval_unchecked(alpha))
    }

    pub fn derivative(&self, alpha: f64) -> Result<f64> {
        Self::check(alpha)?;
        Ok(self.derivative_unchecked(alpha))
    }

    pub(crate) fn eval_unchecked(&self, alpha: f64) -> f64 {
        // Horner on alpha (1 + a_2 alpha + a_3 alpha^2 + ...)
        let tail = self
            .coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, a| acc * alpha + a);
        alpha * (1.0 + alpha * tail)
    }

    pub(crate) fn derivative_unchecked(&self, alpha: f64) -> f64 {
        let tail = self
            .coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, a)| acc * alpha + (i + 2) as f64 * a);
        1.0 + alpha * tail
    }

    fn second_derivative(&self, alpha: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, a)| {
                let j = (i + 2) as f64;
                acc * alpha + j * (j - 1.0) * a
            })
    }

    /// `(min, max)` of `Phi'` on `[0, 1]`: dense sampling plus the critical
    /// points of `Phi'` located by bisection on sign changes of `Phi''`.
    fn derivative_range(&self) -> (f64, f64) {
        const SAMPLES: usize = 2048;
        let mut candidates = vec![0.0, 1.0];
        let grid: Vec<f64> = (0..=SAMPLES).map(|k| k as f64 / SAMPLES as f64).collect();
        for w in grid.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (self.second_derivative(lo), self.second_derivative(hi));
            candidates.push(lo);
            if flo == 0.0 || flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if self.second_derivative(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            candidates.push(0.5 * (lo + hi));
        }
        candidates
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
                let d = self.derivative_unchecked(a);
                (lo.min(d), hi.max(d))
            })
    }
}

/// A field with values in `[0, 1]` (up to [`RANGE_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField(Field);

impl DensityField {
    pub fn new(field: Field) -> Result<Self> {
        if let Some(v) = field.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "density value {v} is not finite"
            )));
        }
        let (lo, hi) = (field.min(), field.max());
        if lo < -RANGE_TOL || hi > 1.0 + RANGE_TOL {
            return Err(Error::InvalidParameter(format!(
                "density range [{lo}, {hi}] leaves [0, 1]"
            )));
        }
        Ok(Self(field))
    }

    pub fn from_fn(dim: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::new(Field::from_fn(dim, n, f))
    }

    pub fn field(&self) -> &Field {
        &self.0
    }

    pub fn into_field(self) -> Field {
        self.0
    }
}

impl std::ops::Deref for DensityField {
    type Target = Field;

    fn deref(&self) -> &Field {
        &self.0
    }
}

/// `L_N Phi(rho)`.
pub fn rhs(gen: &GeneratorND, phi: &PhiFunction, rho: &DensityField) -> Result<Field> {
    gen.apply(&rho.map(|v| phi.eval_unchecked(v)))
}

/// Largest admissible explicit Euler step for this generator and `Phi`.
pub fn cfl_bound(gen: &GeneratorND, phi: &PhiFunction) -> f64 {
    let n = gen.n() as f64;
    CFL_THETA / (2.0 * gen.dim() as f64 * n * n * gen.max_conductance() * phi.max_derivative())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    /// Starts at 0.
    pub times: Vec<f64>,
    pub fields: Vec<DensityField>,
    /// Largest step taken; steps are shortened to land on output times.
    pub dt: f64,
    pub steps: u64,
    pub scheme: &'static str,
}

impl PdeSolution {
    pub fn final_field(&self) -> &DensityField {
        self.fields
            .last()
            .expect("solution holds the initial field")
    }

    /// `max_t |mass(t) - mass(0)| / max(|mass(0)|, tiny)`.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.fields[0].mean();
        self.fields
            .iter()
            .map(|f| (f.mean() - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Rows `time,site_index,rho`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "time,site_index,rho")?;
        for (t, f) in self.times.iter().zip(&self.fields) {
            for (s, v) in f.values().iter().enumerate() {
                writeln!(w, "{t:.16e},{s},{v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// Integrates from `gamma` to the last of `output_times` (or `horizon` when
/// none are given), recording `gamma` at time 0 and the state at every
/// output time. `dt` overrides the default step `cfl_bound`; larger values are
/// rejected.
pub fn solve(
    gen: &GeneratorND,
    phi: &PhiFunction,
    gamma: &DensityField,
    horizon: f64,
    output_times: &[f64],
    dt: Option<f64>,
) -> Result<PdeSolution> {
    if gamma.lattice() != gen.lattice() {
        return Err(Error::ShapeMismatch {
            expected: format!("N={}, d={}", gen.n(), gen.dim()),
            got: format!("N={}, d={}", gamma.n(), gamma.dim()),
        });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon {horizon} < 0")));
    }
    if output_times.iter().any(|&t| !(0.0..=horizon).contains(&t))
        || output_times.windows(2).any(|w| w[0] > w[1])
    {
        return Err(Error::InvalidParameter(
            "output times must be sorted and lie in [0, horizon]".into(),
        ));
    }
    let bound = cfl_bound(gen, phi);
    let dt = match dt {
        Some(dt) if !(dt > 0.0) => {
            return Err(Error::InvalidParameter(format!(
                "time step {dt} must be positive"
            )))
        }
        Some(dt) if dt > bound => return Err(Error::CflViolation { dt, bound }),
        Some(dt) => dt,
        None => bound,
    };
    let targets: Vec<f64> = if output_times.is_empty() {
        vec![horizon]
    } else {
        output_times.to_vec()
    };

    let mut rho = gamma.values().to_vec();
    let mut flux = vec![0.0; rho.len()];
    let mut phi_rho = vec![0.0; rho.len()];
    let mut times = vec![0.0];
    let mut fields = vec![gamma.clone()];
    let mut t = 0.0;
    let mut steps = 0u64;
    let (dim, n) = (gen.dim(), gen.n());
    for &target in &targets {
        if target > t {
            let count = ((target - t) / dt * (1.0 - 1e-12)).ceil().max(1.0) as u64;
            let h = (target - t) / count as f64;
            for k in 0..count {
                for (p, r) in phi_rho.iter_mut().zip(&rho) {
                    *p = phi.eval_unchecked(*r);
                }
                gen.apply_into(&phi_rho, &mut flux);
                for (r, f) in rho.iter_mut().zip(&flux) {
                    *r += h * f;
                }
                steps += 1;
                if rho.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(t + (k + 1) as f64 * h));
                }
            }
            t = target;
        }
        if target == 0.0 {
            continue;
        }
        times.push(target);
        fields.push(DensityField::new(Field::new(dim, n, rho.clone())?)?);
    }
    Ok(PdeSolution {
        times,
        fields,
        dt,
        steps,
        scheme: "explicit_euler",
    })
}

/// `|<rho_T, G> - <gamma, G> - int_0^T <Phi(rho_s), L_N G> ds|` with
/// `G = G_lambda H`, `T` the last stored time and the time integral taken by
/// the trapezoid rule over the stored fields.
pub fn weak_residual(
    sol: &PdeSolution,
    gen: &GeneratorND,
    phi: &PhiFunction,
    h: &Field,
    lambda: f64,
) -> Result<f64> {
    let g = gen.resolvent_solve(lambda, h)?;
    let lg = gen.apply(&g)?;
    let integrand = sol
        .fields
        .iter()
        .map(|rho| rho.map(|v| phi.eval_unchecked(v)).inner(&lg))
        .collect::<Result<Vec<f64>>>()?;
    let integral: f64 = sol
        .times
        .windows(2)
        .zip(integrand.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum();
    let first = sol.fields[0].inner(&g)?;
    let last = sol.final_field().inner(&g)?;
    Ok((last - first - integral).abs())
}
