//! Exact generator of the exclusion process on tiny tori, for checking the
//! simulator against the master equation.
//!
//! States are bitmasks: bit `s` holds `eta(s)`, matching
//! [`Configuration::from_bits`].

use nalgebra::{DMatrix, DVector};

use super::config::{Configuration, SimParams};
use super::dynamics::{exchange, jump_rate};
use crate::error::{Error, Result};

/// Largest admissible number of sites (`2^16` states).
pub const MAX_ORACLE_SITES: usize = 16;

fn state_count(params: &SimParams) -> Result<usize> {
    params.validate(2)?;
    let sites = params.lattice().sites();
    if sites > MAX_ORACLE_SITES {
        return Err(Error::StateSpaceTooLarge { sites });
    }
    Ok(1usize << sites)
}

/// Off-diagonal transitions `(from, to, rate)` of `N^2 L_N`, one per bond
/// with differing occupancies.
pub fn transitions(params: &SimParams) -> Result<Vec<(usize, usize, f64)>> {
    let states = state_count(params)?;
    let (dim, n) = (params.dim, params.n);
    let xi = params.profile.conductance_tables(n);
    let n2 = (n * n) as f64;
    let lattice = params.lattice();
    let mut out = Vec::new();
    for bits in 0..states {
        let eta = Configuration::from_bits(dim, n, bits);
        for x in 0..lattice.sites() {
            for (j, table) in xi.iter().enumerate() {
                let y = lattice.shift(x, j, 1);
                if eta.get(x) == eta.get(y) {
                    continue;
                }
                let rate = n2 * jump_rate(&eta, x, j, params.a, table[lattice.coord(x, j)]);
                out.push((bits, exchange(&eta, x, j).to_bits(), rate));
            }
        }
    }
    Ok(out)
}

/// Dense rate matrix `Q` of `N^2 L_N`: `Q[(eta, eta')]` is the rate of
/// `eta -> eta'`, rows sum to zero.
pub fn exact_generator_matrix(params: &SimParams) -> Result<DMatrix<f64>> {
    let states = state_count(params)?;
    let mut q = DMatrix::zeros(states, states);
    for (from, to, rate) in transitions(params)? {
        q[(from, to)] += rate;
        q[(from, from)] -= rate;
    }
    Ok(q)
}

/// Product Bernoulli measure `nu_alpha` on the bitmask state space.
pub fn bernoulli_law(dim: usize, n: usize, alpha: f64) -> Result<DVector<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "density {alpha} outside [0, 1]"
        )));
    }
    let sites = n.pow(dim as u32);
    if sites > MAX_ORACLE_SITES {
        return Err(Error::StateSpaceTooLarge { sites });
    }
    Ok(DVector::from_fn(1 << sites, |bits, _| {
        let k = (bits as u32).count_ones() as i32;
        alpha.powi(k) * (1.0 - alpha).powi(sites as i32 - k)
    }))
}

/// Law at time `t` started from `initial`: the row vector `initial^T exp(t Q)`.
pub fn transition_law(params: &SimParams, initial: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time {t} < 0")));
    }
    let q = exact_generator_matrix(params)?;
    if initial.len() != q.nrows() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} states", q.nrows()),
            got: initial.len().to_string(),
        });
    }
    let p = (q * t).exp();
    Ok(p.tr_mul(initial))
}

fn check_density(params: &SimParams, f: &[f64], alpha: f64) -> Result<DVector<f64>> {
    let nu = bernoulli_law(params.dim, params.n, alpha)?;
    if f.len() != nu.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} states", nu.len()),
            got: f.len().to_string(),
        });
    }
    if f.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(
            "density must be finite and nonnegative".into(),
        ));
    }
    let mass: f64 = f.iter().zip(nu.iter()).map(|(a, b)| a * b).sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "density has total mass {mass} under nu_alpha"
        )));
    }
    Ok(nu)
}

/// `I_N(f) = <-L_N sqrt f, sqrt f>_{nu_alpha}` through the rate matrix, with
/// `L_N = Q / N^2`.
pub fn dirichlet_form_exact(params: &SimParams, f: &[f64], alpha: f64) -> Result<f64> {
    let nu = check_density(params, f, alpha)?;
    let root = DVector::from_iterator(f.len(), f.iter().map(|v| v.sqrt()));
    let q = exact_generator_matrix(params)?;
    let lg = &q * &root;
    let n2 = (params.n * params.n) as f64;
    Ok(-(0..f.len()).map(|s| nu[s] * root[s] * lg[s]).sum::<f64>() / n2)
}

/// The same form as the sum over bonds of
/// `(1/2) xi int c {sqrt f(sigma eta) - sqrt f(eta)}^2 d nu_alpha`.
pub fn dirichlet_form_bonds(params: &SimParams, f: &[f64], alpha: f64) -> Result<f64> {
    let nu = check_density(params, f, alpha)?;
    let xi = params.profile.conductance_tables(params.n);
    let lattice = params.lattice();
    let mut total = 0.0;
    for (bits, &weight) in nu.iter().enumerate() {
        let eta = Configuration::from_bits(params.dim, params.n, bits);
        for x in 0..lattice.sites() {
            for (j, table) in xi.iter().enumerate() {
                let swapped = exchange(&eta, x, j).to_bits();
                let diff = f[swapped].sqrt() - f[bits].sqrt();
                let rate = jump_rate(&eta, x, j, params.a, table[lattice.coord(x, j)]);
                total += 0.5 * weight * rate * diff * diff;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::{ConductanceFunction, ConductanceProfile};
    use crate::ensemble::replicate_rng;
    use rand::Rng;

    fn params(n: usize, dim: usize, a: f64) -> SimParams {
        let w = ConductanceFunction::new(1.0, vec![(0.5, 1.0)]).unwrap();
        SimParams::oracle(n, a, ConductanceProfile::uniform(dim, w), 1.0, 1, vec![]).unwrap()
    }

    fn random_density(p: &SimParams, alpha: f64, seed: u64) -> Vec<f64> {
        let nu = bernoulli_law(p.dim, p.n, alpha).unwrap();
        let mut rng = replicate_rng(seed, 0);
        let raw: Vec<f64> = (0..nu.len()).map(|_| rng.random::<f64>()).collect();
        let mass: f64 = raw.iter().zip(nu.iter()).map(|(a, b)| a * b).sum();
        raw.iter().map(|v| v / mass).collect()
    }

    #[test]
    fn two_sites_exchange_only_mixed_states() {
        let p = params(2, 1, 0.0);
        let q = exact_generator_matrix(&p).unwrap();
        assert_eq!(q.nrows(), 4);
        for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 0), (1, 3), (3, 1), (3, 2)] {
            assert_eq!(q[(i, j)], 0.0, "({i},{j})");
        }
        assert!(q[(1, 2)] > 0.0 && q[(2, 1)] > 0.0);
    }

    #[test]
    fn rows_sum_to_zero() {
        let q = exact_generator_matrix(&params(3, 1, 0.3)).unwrap();
        for r in 0..q.nrows() {
            assert!(q.row(r).sum().abs() < 1e-9);
            for c in 0..q.ncols() {
                if c != r {
                    assert!(q[(r, c)] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn bernoulli_is_stationary_and_reversible() {
        for a in [-0.4, 0.0, 0.3, 2.0] {
            let p = params(4, 1, a);
            let q = exact_generator_matrix(&p).unwrap();
            let nu = bernoulli_law(1, 4, 0.4).unwrap();
            let flow = q.tr_mul(&nu);
            assert!(flow.amax() < 1e-12, "{a}: {}", flow.amax());
            for (from, to, _) in transitions(&p).unwrap() {
                let lhs = nu[from] * q[(from, to)];
                let rhs = nu[to] * q[(to, from)];
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_large_is_rejected() {
        let p = SimParams::oracle(
            5,
            0.0,
            ConductanceProfile::uniform(2, ConductanceFunction::identity()),
            1.0,
            0,
            vec![],
        )
        .unwrap();
        assert!(matches!(
            exact_generator_matrix(&p),
            Err(Error::StateSpaceTooLarge { sites: 25 })
        ));
    }

    #[test]
    fn transition_law_is_a_probability_and_fixes_nu() {
        let p = params(3, 1, 0.3);
        let nu = bernoulli_law(1, 3, 0.7).unwrap();
        let out = transition_law(&p, &nu, 0.5).unwrap();
        assert!((out - &nu).amax() < 1e-12);
        let mut delta = DVector::zeros(8);
        delta[0b001] = 1.0;
        let out = transition_law(&p, &delta, 0.1).unwrap();
        assert!((out.sum() - 1.0).abs() < 1e-12);
        assert!(out.iter().all(|&v| v > -1e-14));
        // one particle never leaves the one-particle sector
        let sector: f64 = [0b001, 0b010, 0b100].iter().map(|&s| out[s]).sum();
        assert!((sector - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dirichlet_forms_agree() {
        let p = params(3, 1, 0.3);
        let ones = vec![1.0; 8];
        assert!(dirichlet_form_exact(&p, &ones, 0.4).unwrap().abs() < 1e-14);
        for seed in 0..100 {
            let f = random_density(&p, 0.4, seed);
            let a = dirichlet_form_exact(&p, &f, 0.4).unwrap();
            let b = dirichlet_form_bonds(&p, &f, 0.4).unwrap();
            assert!(a >= -1e-14);
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!(dirichlet_form_exact(&p, &[2.0; 8], 0.4).is_err());
        assert!(dirichlet_form_exact(&p, &[1.0; 7], 0.4).is_err());
    }
}
