//! Property checks on a generator, run by the `spectrum` command.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::conductance::ConductanceFunction;
use crate::ensemble::replicate_rng;
use crate::error::Result;
use crate::field::Field;
use crate::generator::{GeneratorND, SpectralDecomposition1D};

/// Dense cross-checks are skipped above this many sites.
pub const DENSE_LIMIT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= tolerance,
            value,
            tolerance,
        }
    }
}

fn random(gen: &GeneratorND, seed: u64, k: u64) -> Field {
    let mut rng = replicate_rng(seed, k);
    let l = gen.lattice();
    let values = (0..l.sites())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Field::new(l.dim, l.n, values).expect("lattice-sized field")
}

fn l2(f: &Field) -> f64 {
    f.norm_l2()
}

fn sorted_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

fn reconstruction_error(
    s: &SpectralDecomposition1D,
    gen: &GeneratorND,
    j: usize,
    f: &[f64],
) -> f64 {
    let n = s.n() as f64;
    let mut rebuilt = vec![0.0; f.len()];
    for (k, lambda) in s.eigenvalues().iter().enumerate() {
        let phi = s.eigenvector(k);
        let c: f64 = phi.iter().zip(f).map(|(p, v)| p * v).sum::<f64>() / n;
        for (r, p) in rebuilt.iter_mut().zip(&phi) {
            *r -= lambda * c * p;
        }
    }
    let direct = gen.axis(j).apply(f);
    let err: f64 = direct
        .iter()
        .zip(&rebuilt)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / n;
    let norm: f64 = f.iter().map(|v| v * v).sum::<f64>() / n;
    (err / norm.max(f64::MIN_POSITIVE)).sqrt()
}

/// Runs the generator invariants on `inputs` random fields.
pub fn generator_checks(
    gen: &GeneratorND,
    axes: &[ConductanceFunction],
    lambdas: &[f64],
    inputs: usize,
    seed: u64,
) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let n = gen.n();
    let spectra = gen.spectra()?;

    let mut sym = 0.0f64;
    let mut nonpos = 0.0f64;
    let mut dissip = 0.0f64;
    let mut bij = 0.0f64;
    let mut bound_l2 = 0.0f64;
    let mut bound_dir = 0.0f64;
    let mut dform = 0.0f64;
    for k in 0..inputs as u64 {
        let f = random(gen, seed, 2 * k);
        let g = random(gen, seed, 2 * k + 1);
        let lf = gen.apply(&f)?;
        let lg = gen.apply(&g)?;
        sym = sym.max((lf.inner(&g)? - f.inner(&lg)?).abs() / (l2(&f) * l2(&g)));
        let q = -lf.inner(&f)?;
        nonpos = nonpos.max(-q);
        dform = dform.max((gen.dirichlet_form(&f, &f)? - q).abs() / q.abs().max(1e-300));
        for &lambda in lambdas {
            let r = f.zip_map(&lf, |a, b| lambda * a - b)?;
            dissip = dissip.max(lambda * l2(&f) / l2(&r) - 1.0);
            let u = gen.resolvent_solve(lambda, &f)?;
            let h2 = f.inner(&f)?;
            bound_l2 = bound_l2.max(u.inner(&u)? / (h2 / (lambda * lambda)) - 1.0);
            bound_dir = bound_dir.max(gen.dirichlet_form(&u, &u)? / (h2 / lambda) - 1.0);
        }
        let u = gen.resolvent_solve(1.0, &f)?;
        let lu = gen.apply(&u)?;
        let back = u.zip_map(&lu, |a, b| a - b)?;
        bij = bij.max(back.zip_map(&f, |a, b| a - b)?.sup_norm() / f.sup_norm());
    }
    out.push(Check::at_most("symmetry", sym, 1e-10));
    out.push(Check::at_most("non_positivity", nonpos, 1e-12));
    out.push(Check::at_most("dirichlet_form_identity", dform, 1e-10));
    out.push(Check::at_most("dissipativity", dissip, 1e-10));
    out.push(Check::at_most("bijectivity", bij, 1e-9));
    out.push(Check::at_most("resolvent_l2_bound", bound_l2, 1e-10));
    out.push(Check::at_most(
        "resolvent_dirichlet_bound",
        bound_dir,
        1e-10,
    ));

    // spectral structure per axis
    let mut recon = 0.0f64;
    let mut zero = 0.0f64;
    for (j, s) in spectra.iter().enumerate() {
        let f = random(gen, seed.wrapping_add(1), j as u64);
        let row: Vec<f64> = f.values()[..n].to_vec();
        recon = recon.max(reconstruction_error(s, gen, j, &row));
        zero = zero.max(s.eigenvalues()[0].abs());
        if axes[j] == ConductanceFunction::identity() {
            let exact: Vec<f64> = {
                let mut v: Vec<f64> = (0..n)
                    .map(|k| {
                        let nf = n as f64;
                        4.0 * nf * nf * (std::f64::consts::PI * k as f64 / nf).sin().powi(2)
                    })
                    .collect();
                v.sort_by(f64::total_cmp);
                v
            };
            out.push(Check::at_most(
                format!("identity_eigenvalues_axis{j}"),
                sorted_distance(s.eigenvalues(), &exact),
                1e-8,
            ));
        }
    }
    out.push(Check::at_most("reconstruction", recon, 1e-8));
    out.push(Check::at_most("zero_eigenvalue", zero, 0.0));

    if gen.lattice().sites() <= DENSE_LIMIT {
        let m = -gen.matrix()?;
        let dense = SymmetricEigen::new(m.clone()).eigenvalues;
        let mut dense: Vec<f64> = dense.iter().copied().collect();
        dense.sort_by(f64::total_cmp);
        out.push(Check::at_most(
            "kronecker_eigen_sum",
            sorted_distance(&dense, &gen.eigenvalues()?),
            1e-8,
        ));
        let t = 0.01;
        let k = gen.semigroup_kernel(t)?;
        let scale = k.amax();
        out.push(Check::at_most(
            "semigroup_symmetry",
            (&k - k.transpose()).amax() / scale,
            1e-10,
        ));
        if gen.dim() >= 2 {
            out.push(Check::at_most(
                "semigroup_factorization",
                factorization_error(gen, &k, t),
                1e-10,
            ));
        }
    }
    let h = random(gen, seed.wrapping_add(2), 0);
    let p = gen.semigroup_apply(0.01, &h)?;
    out.push(Check::at_most(
        "semigroup_mass",
        (p.mean() - h.mean()).abs() / h.mean().abs().max(1e-300),
        1e-10,
    ));
    Ok(out)
}

/// `max |P_t(x, y) - prod_j P_t^j(x_j, y_j)|`.
fn factorization_error(gen: &GeneratorND, k: &DMatrix<f64>, t: f64) -> f64 {
    let l = gen.lattice();
    let n = l.n;
    let kernels: Vec<Vec<f64>> = match gen.spectra() {
        Ok(s) => s.iter().map(|s| s.kernel(t)).collect(),
        Err(_) => return f64::INFINITY,
    };
    let mut worst = 0.0f64;
    for x in 0..l.sites() {
        for y in 0..l.sites() {
            let prod: f64 = (0..l.dim)
                .map(|j| kernels[j][l.coord(x, j) * n + l.coord(y, j)])
                .product();
            worst = worst.max((k[(x, y)] - prod).abs());
        }
    }
    worst
}
