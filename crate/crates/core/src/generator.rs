//! The random-walk generator `L_N f = sum_j L_N^j f` with
//! `L_N^j f(x) = N^2 { xi_{x,x+e_j} [f(x+e_j) - f(x)] + xi_{x-e_j,x} [f(x-e_j) - f(x)] }`,
//! its per-axis spectral decompositions, semigroup and resolvent.
//!
//! All inner products are the counting product `(1/N^d) sum_x f(x) g(x)`,
//! for which the generator is symmetric and non-positive. The semigroup and
//! resolvent are evaluated in the tensorized eigenbasis, so they carry no
//! time-stepping error.

use std::io::Write;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::conductance::{ConductanceFunction, ConductanceProfile};
use crate::error::{Error, Result};
use crate::field::{Field, Lattice};

/// One-dimensional conductance Laplacian on `T_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator1D {
    n: usize,
    conductances: Vec<f64>,
}

impl Generator1D {
    pub fn new(w: &ConductanceFunction, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("grid size {n} < 2")));
        }
        Ok(Self {
            n,
            conductances: w.conductances(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `xi_{x,x+1}` for `x = 0..N`.
    pub fn conductances(&self) -> &[f64] {
        &self.conductances
    }

    pub fn apply_slice(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        let n2 = (n * n) as f64;
        for x in 0..n {
            let right = (x + 1) % n;
            let left = (x + n - 1) % n;
            out[x] = n2
                * (self.conductances[x] * (f[right] - f[x])
                    + self.conductances[left] * (f[left] - f[x]));
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_slice(f, &mut out);
        out
    }

    /// Dense matrix of `L_N^j` (symmetric, zero row sums).
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.n;
        let n2 = (n * n) as f64;
        let mut m = DMatrix::zeros(n, n);
        for x in 0..n {
            let y = (x + 1) % n;
            let r = n2 * self.conductances[x];
            m[(x, y)] += r;
            m[(y, x)] += r;
            m[(x, x)] -= r;
            m[(y, y)] -= r;
        }
        m
    }
}

/// Eigen-decomposition of `-L_N^j`: `0 = lambda_0 <= lambda_1 <= ...`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition1D {
    eigenvalues: Vec<f64>,
    /// Row-major `N x N`; column `k` is the unit-Euclidean eigenvector `k`.
    vectors: Vec<f64>,
    n: usize,
}

impl SpectralDecomposition1D {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Eigenvector `k`, normalized under `(1/N) sum`.
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let scale = (self.n as f64).sqrt();
        (0..self.n)
            .map(|x| scale * self.vectors[x * self.n + k])
            .collect()
    }

    /// `c_k = sum_x v_k(x) f(x)` for unit-Euclidean eigenvectors.
    fn forward(&self, f: &[f64], out: &mut [f64]) {
        let n = self.n;
        out.iter_mut().for_each(|c| *c = 0.0);
        for (x, &fx) in f.iter().enumerate() {
            let row = &self.vectors[x * n..(x + 1) * n];
            for (c, v) in out.iter_mut().zip(row) {
                *c += v * fx;
            }
        }
    }

    fn inverse(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (x, o) in out.iter_mut().enumerate() {
            let row = &self.vectors[x * n..(x + 1) * n];
            *o = row.iter().zip(c).map(|(v, ck)| v * ck).sum();
        }
    }

    /// Transition kernel `P_t(x, y) = sum_k e^{-t lambda_k} v_k(x) v_k(y)`, row-major.
    pub fn kernel(&self, t: f64) -> Vec<f64> {
        let n = self.n;
        let decay: Vec<f64> = self.eigenvalues.iter().map(|l| (-t * l).exp()).collect();
        let mut k = vec![0.0; n * n];
        for x in 0..n {
            let vx = &self.vectors[x * n..(x + 1) * n];
            for y in x..n {
                let vy = &self.vectors[y * n..(y + 1) * n];
                let s: f64 = (0..n).map(|m| decay[m] * vx[m] * vy[m]).sum();
                k[x * n + y] = s;
                k[y * n + x] = s;
            }
        }
        k
    }
}

/// Dense symmetric eigen-decomposition of `-L`.
pub fn spectral_decompose(gen: &Generator1D) -> Result<SpectralDecomposition1D> {
    let n = gen.n();
    let a = -gen.matrix();
    let scale = a.amax().max(1.0);
    let eig = SymmetricEigen::try_new(a, 1e-14 * scale, 10_000).ok_or_else(|| {
        Error::Eigensolver(format!(
            "symmetric QR iteration did not converge (N = {n}, max |entry| = {scale:e})"
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    // The constant vector is an exact null vector.
    if eigenvalues[0].abs() > 1e-9 * scale * n as f64 {
        return Err(Error::Eigensolver(format!(
            "smallest eigenvalue {:e} is not zero (scale {scale:e})",
            eigenvalues[0]
        )));
    }
    eigenvalues[0] = 0.0;
    for l in eigenvalues.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    let mut vectors = vec![0.0; n * n];
    for (k, &i) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(i);
        for x in 0..n {
            vectors[x * n + k] = col[x];
        }
    }
    Ok(SpectralDecomposition1D {
        eigenvalues,
        vectors,
        n,
    })
}

/// The d-dimensional generator as a Kronecker sum of per-axis generators.
#[derive(Debug)]
pub struct GeneratorND {
    lattice: Lattice,
    axes: Vec<Generator1D>,
    spectra: OnceLock<Vec<SpectralDecomposition1D>>,
}

impl Clone for GeneratorND {
    fn clone(&self) -> Self {
        let spectra = OnceLock::new();
        if let Some(s) = self.spectra.get() {
            let _ = spectra.set(s.clone());
        }
        Self {
            lattice: self.lattice,
            axes: self.axes.clone(),
            spectra,
        }
    }
}

impl GeneratorND {
    pub fn new(profile: &ConductanceProfile, n: usize) -> Result<Self> {
        let axes = profile
            .axes()
            .iter()
            .map(|w| Generator1D::new(w, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lattice: Lattice::new(profile.dim(), n),
            axes,
            spectra: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim
    }

    pub fn n(&self) -> usize {
        self.lattice.n
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn axis(&self, j: usize) -> &Generator1D {
        &self.axes[j]
    }

    /// Largest bond conductance over all axes.
    pub fn max_conductance(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| a.conductances.iter().copied())
            .fold(0.0, f64::max)
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.lattice() != self.lattice {
            return Err(Error::ShapeMismatch {
                expected: format!("N={}, d={}", self.n(), self.dim()),
                got: format!("N={}, d={}", f.n(), f.dim()),
            });
        }
        Ok(())
    }

    /// `L_N^j f` along one axis.
    pub fn apply_axis(&self, j: usize, f: &Field) -> Result<Field> {
        self.check(f)?;
        let g = &self.axes[j];
        Ok(f.map_along_axis(j, |a, b| g.apply_slice(a, b)))
    }

    /// `L_N f = sum_j L_N^j f`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut out = vec![0.0; f.len()];
        self.apply_into(f.values(), &mut out);
        Field::new(self.dim(), self.n(), out)
    }

    /// Stencil form of `apply` on raw slices, used by the PDE stepper.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let l = self.lattice;
        let n = l.n;
        let n2 = (n * n) as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, g) in self.axes.iter().enumerate() {
            let stride = l.stride(j);
            let block = stride * n;
            let xi = &g.conductances;
            for base in (0..f.len()).step_by(block) {
                for x in 0..n {
                    let right = (x + 1) % n;
                    let left = (x + n - 1) % n;
                    let (cr, cl) = (n2 * xi[x], n2 * xi[left]);
                    for o in 0..stride {
                        let s = base + x * stride + o;
                        let fx = f[s];
                        out[s] += cr * (f[base + right * stride + o] - fx)
                            + cl * (f[base + left * stride + o] - fx);
                    }
                }
            }
        }
    }

    /// Per-axis spectral decompositions, computed on first use.
    pub fn spectra(&self) -> Result<&[SpectralDecomposition1D]> {
        if let Some(s) = self.spectra.get() {
            return Ok(s);
        }
        let mut computed: Vec<SpectralDecomposition1D> = Vec::with_capacity(self.dim());
        for (j, g) in self.axes.iter().enumerate() {
            // Axes with identical conductances share a decomposition.
            match self.axes[..j].iter().position(|h| h == g) {
                Some(i) => computed.push(computed[i].clone()),
                None => computed.push(spectral_decompose(g)?),
            }
        }
        let _ = self.spectra.set(computed);
        Ok(self.spectra.get().expect("spectra initialized"))
    }

    /// All eigenvalues of `-L_N` (sums of per-axis eigenvalues), ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let spectra = self.spectra()?;
        let mut all = vec![0.0];
        for s in spectra {
            all = all
                .iter()
                .flat_map(|a| s.eigenvalues().iter().map(move |b| a + b))
                .collect();
        }
        all.sort_by(f64::total_cmp);
        Ok(all)
    }

    /// `P_t^N H`, applying `exp(t L_N^j)` along every axis.
    pub fn semigroup_apply(&self, t: f64, h: &Field) -> Result<Field> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "semigroup time {t} must be >= 0"
            )));
        }
        self.check(h)?;
        if t == 0.0 {
            return Ok(h.clone());
        }
        let spectra = self.spectra()?;
        let n = self.n();
        let mut out = h.clone();
        for (j, s) in spectra.iter().enumerate() {
            let k = s.kernel(t);
            out = out.map_along_axis(j, |a, b| {
                for (x, bx) in b.iter_mut().enumerate() {
                    *bx = k[x * n..(x + 1) * n]
                        .iter()
                        .zip(a)
                        .map(|(p, v)| p * v)
                        .sum();
                }
            });
        }
        Ok(out)
    }

    /// Full transition kernel `P_t^N(x, y)`, assembled column by column from
    /// indicator fields. Intended for small lattices.
    pub fn semigroup_kernel(&self, t: f64) -> Result<DMatrix<f64>> {
        let m = self.lattice.sites();
        let mut k = DMatrix::zeros(m, m);
        for y in 0..m {
            let mut e = Field::zeros(self.dim(), self.n());
            e.values_mut()[y] = 1.0;
            let col = self.semigroup_apply(t, &e)?;
            for x in 0..m {
                k[(x, y)] = col.values()[x];
            }
        }
        Ok(k)
    }

    /// Runs `scale(multi_index) * coefficient` through the tensor eigenbasis.
    fn spectral_multiply(&self, h: &Field, weight: impl Fn(f64) -> f64) -> Result<Field> {
        let spectra = self.spectra()?;
        let mut coeffs = h.clone();
        for (j, s) in spectra.iter().enumerate() {
            coeffs = coeffs.map_along_axis(j, |a, b| s.forward(a, b));
        }
        let l = self.lattice;
        for (site, c) in coeffs.values_mut().iter_mut().enumerate() {
            let alpha: f64 = (0..l.dim)
                .map(|j| spectra[j].eigenvalues()[l.coord(site, j)])
                .sum();
            *c *= weight(alpha);
        }
        for (j, s) in spectra.iter().enumerate() {
            coeffs = coeffs.map_along_axis(j, |a, b| s.inverse(a, b));
        }
        Ok(coeffs)
    }

    /// `G_lambda H = (lambda - L_N)^{-1} H`.
    pub fn resolvent_solve(&self, lambda: f64, h: &Field) -> Result<Field> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "resolvent parameter {lambda} must be positive"
            )));
        }
        self.check(h)?;
        self.spectral_multiply(h, |alpha| 1.0 / (lambda + alpha))
    }

    /// Symmetric Dirichlet form
    /// `(1/N^d) sum_j sum_x xi_{x,x+e_j} (grad_j f)(x) (grad_j g)(x)`,
    /// equal to `<-L_N f, g>`.
    pub fn dirichlet_form(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        let l = self.lattice;
        let mut total = 0.0;
        for (j, axis) in self.axes.iter().enumerate() {
            let df = discrete_partial(f, j);
            let dg = discrete_partial(g, j);
            for s in 0..f.len() {
                total += axis.conductances[l.coord(s, j)] * df.values()[s] * dg.values()[s];
            }
        }
        Ok(total / f.len() as f64)
    }

    /// Dense `N^d x N^d` matrix of `L_N`; small lattices only.
    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let m = self.lattice.sites();
        let mut out = DMatrix::zeros(m, m);
        for y in 0..m {
            let mut e = Field::zeros(self.dim(), self.n());
            e.values_mut()[y] = 1.0;
            let col = self.apply(&e)?;
            for x in 0..m {
                out[(x, y)] = col.values()[x];
            }
        }
        Ok(out)
    }
}

/// `grad_{N,j} f(x) = N [f(x + e_j) - f(x)]`, periodic.
pub fn discrete_partial(f: &Field, j: usize) -> Field {
    let n = f.n() as f64;
    f.map_along_axis(j, |a, b| {
        let len = a.len();
        for x in 0..len {
            b[x] = n * (a[(x + 1) % len] - a[x]);
        }
    })
}

/// Writes `k,eigenvalue` rows with 17 significant digits.
pub fn write_spectrum_csv(mut w: impl Write, eigenvalues: &[f64]) -> std::io::Result<()> {
    writeln!(w, "k,eigenvalue")?;
    for (k, l) in eigenvalues.iter().enumerate() {
        writeln!(w, "{k},{l:.16e}")?;
    }
    Ok(())
}
