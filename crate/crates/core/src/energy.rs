//! W-derivatives, the `L^2(x_j (x) W_j)` norm and the energy of density
//! trajectories.

use std::f64::consts::TAU;

use crate::conductance::{ConductanceFunction, ConductanceProfile};
use crate::error::{Error, Result};
use crate::exclusion::{box_averages, Configuration};
use crate::field::Field;
use crate::generator::discrete_partial;
use crate::hydro::{PdeSolution, PhiFunction};

/// Default penalty constant of the energy statistic.
pub const DEFAULT_K1: f64 = 4.0;

/// `(d/dW_j) f` on the grid: `[f(x + e_j) - f(x)] / [W_j((x_j+1)/N) - W_j(x_j/N)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WGradientField {
    pub axis: usize,
    pub field: Field,
}

fn check_axis(f: &Field, j: usize) -> Result<()> {
    if j >= f.dim() {
        return Err(Error::InvalidParameter(format!(
            "axis {j} >= dim {}",
            f.dim()
        )));
    }
    Ok(())
}

pub fn w_derivative(f: &Field, w: &ConductanceFunction, j: usize) -> Result<WGradientField> {
    check_axis(f, j)?;
    let weights = w.w_weights(f.n());
    let field = f.map_along_axis(j, |a, b| {
        let n = a.len();
        for x in 0..n {
            b[x] = (a[(x + 1) % n] - a[x]) / weights[x];
        }
    });
    Ok(WGradientField { axis: j, field })
}

/// `sum_x G(x)^2 w_j(x_j) N^{-(d-1)}`, the squared `L^2(x_j (x) W_j)` norm.
pub fn l2_xw_norm(g: &WGradientField, w: &ConductanceFunction) -> f64 {
    let f = &g.field;
    let l = f.lattice();
    let weights = w.w_weights(l.n);
    let sum: f64 = f
        .values()
        .iter()
        .enumerate()
        .map(|(s, v)| v * v * weights[l.coord(s, g.axis)])
        .sum();
    sum / (l.n as f64).powi(l.dim as i32 - 1)
}

/// `(1/N^d) sum_x (grad_j f)(x) (dg/dW_j)(x)`: the Lebesgue-gradient against
/// W-gradient pairing, equal to `<-L_N^j g, f>`.
pub fn mixed_pairing(f: &Field, g: &WGradientField) -> Result<f64> {
    check_axis(f, g.axis)?;
    discrete_partial(f, g.axis).inner(&g.field)
}

/// `int_0^T ||(d/dW_j) Phi(rho_s)||^2 ds`, trapezoid over the given times.
pub fn energy_functional(
    times: &[f64],
    fields: &[&Field],
    phi: &PhiFunction,
    profile: &ConductanceProfile,
    j: usize,
) -> Result<f64> {
    if times.len() != fields.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} fields", times.len()),
            got: fields.len().to_string(),
        });
    }
    if j >= profile.dim() {
        return Err(Error::InvalidParameter(format!(
            "axis {j} >= dim {}",
            profile.dim()
        )));
    }
    let w = profile.axis(j);
    let values = fields
        .iter()
        .map(|rho| {
            let r = crate::hydro::DensityField::new((*rho).clone())?;
            let phi_rho = r.map(|v| phi.eval_unchecked(v));
            Ok(l2_xw_norm(&w_derivative(&phi_rho, w, j)?, w))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum())
}

/// [`energy_functional`] over the stored fields of a PDE solution.
pub fn solution_energy(
    sol: &PdeSolution,
    phi: &PhiFunction,
    profile: &ConductanceProfile,
    j: usize,
) -> Result<f64> {
    let fields: Vec<&Field> = sol.fields.iter().map(|f| f.field()).collect();
    energy_functional(&sol.times, &fields, phi, profile, j)
}

fn scale(name: &str, v: f64, n: usize) -> Result<usize> {
    let k = (v * n as f64 + 1e-9).floor();
    if !(k >= 1.0) || k > n as f64 {
        return Err(Error::InvalidParameter(format!(
            "{name} N = {} must lie in [1, N]",
            v * n as f64
        )));
    }
    Ok(k as usize)
}

/// The energy statistic
/// `N^{-(d-1)} [ sum_x H(x/N) (1/(eps N)) {Phi(eta^{dN}(x)) - Phi(eta^{dN}(x + eps N e_j))}
///  - (K1/(eps N)) sum_x H(x/N)^2 {W_j((x_j + eps N + 1)/N) - W_j(x_j/N)} ]`
/// with `eta^{dN}` the box average of side `delta N`.
#[allow(clippy::too_many_arguments)]
pub fn energy_statistic(
    eta: &Configuration,
    h: &Field,
    eps: f64,
    delta: f64,
    j: usize,
    k1: f64,
    profile: &ConductanceProfile,
    phi: &PhiFunction,
) -> Result<f64> {
    let l = eta.lattice();
    if h.lattice() != l {
        return Err(Error::ShapeMismatch {
            expected: format!("N={}, d={}", l.n, l.dim),
            got: format!("N={}, d={}", h.n(), h.dim()),
        });
    }
    check_axis(h, j)?;
    let n = l.n;
    let k = scale("eps", eps, n)?;
    let side = scale("delta", delta, n)?;
    let phi_box = box_averages(eta, side)?.map(|v| phi.eval_unchecked(v));
    let weights = profile.axis(j).w_weights(n);
    // W_j((x_j + k + 1)/N) - W_j(x_j/N) = sum of k + 1 consecutive bond weights
    let mass: Vec<f64> = (0..n)
        .map(|x| (0..=k).map(|i| weights[(x + i) % n]).sum())
        .collect();
    let hv = h.values();
    let pv = phi_box.values();
    let mut first = 0.0;
    let mut penalty = 0.0;
    for x in 0..l.sites() {
        first += hv[x] * (pv[x] - pv[l.shift(x, j, k as isize)]);
        penalty += hv[x] * hv[x] * mass[l.coord(x, j)];
    }
    let kn = k as f64;
    Ok((first / kn - k1 * penalty / kn) / (n as f64).powi(l.dim as i32 - 1))
}

/// Finite stand-in for the supremum over test functions: constants and
/// `cos(2 pi k x_j)`, `sin(2 pi k x_j)` for `1 <= k <= kmax` on every axis.
pub fn test_dictionary(dim: usize, n: usize, kmax: usize) -> Vec<(String, Field)> {
    let mut out = vec![("const".to_string(), Field::constant(dim, n, 1.0))];
    for j in 0..dim {
        for k in 1..=kmax {
            let kf = k as f64;
            out.push((
                format!("cos{k}_x{j}"),
                Field::from_fn(dim, n, |x| (TAU * kf * x[j]).cos()),
            ));
            out.push((
                format!("sin{k}_x{j}"),
                Field::from_fn(dim, n, |x| (TAU * kf * x[j]).sin()),
            ));
        }
    }
    out
}
