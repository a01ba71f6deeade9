//! Real-valued fields on the discrete torus `T_N^d`, stored row-major with
//! axis 0 varying slowest.

use crate::error::{Error, Result};

/// Geometry of `T_N^d`: site arithmetic shared by fields and configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    pub dim: usize,
    pub n: usize,
}

impl Lattice {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim >= 1 && n >= 1, "lattice needs dim >= 1 and n >= 1");
        Self { dim, n }
    }

    pub fn sites(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.stride(axis)) % self.n
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.dim).map(|j| self.coord(site, j)).collect()
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.n + c % self.n)
    }

    /// `site + shift * e_axis`, wrapping around the torus.
    pub fn shift(&self, site: usize, axis: usize, shift: isize) -> usize {
        let stride = self.stride(axis);
        let c = self.coord(site, axis) as isize;
        let moved = (c + shift).rem_euclid(self.n as isize) as usize;
        site - (c as usize) * stride + moved * stride
    }

    /// Macroscopic position `x / N` of a site.
    pub fn position(&self, site: usize) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.dim)
            .map(|j| self.coord(site, j) as f64 / n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    lattice: Lattice,
    values: Vec<f64>,
}

impl Field {
    pub fn new(dim: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let lattice = Lattice::new(dim, n);
        if values.len() != lattice.sites() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for N={n}, d={dim}", lattice.sites()),
                got: format!("{} values", values.len()),
            });
        }
        Ok(Self { lattice, values })
    }

    pub fn zeros(dim: usize, n: usize) -> Self {
        Self::constant(dim, n, 0.0)
    }

    pub fn constant(dim: usize, n: usize, c: f64) -> Self {
        let lattice = Lattice::new(dim, n);
        Self {
            values: vec![c; lattice.sites()],
            lattice,
        }
    }

    /// Samples `f(x/N)` at every site.
    pub fn from_fn(dim: usize, n: usize, f: impl Fn(&[f64]) -> f64) -> Self {
        let lattice = Lattice::new(dim, n);
        let values = (0..lattice.sites())
            .map(|s| f(&lattice.position(s)))
            .collect();
        Self { lattice, values }
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::ShapeMismatch {
                expected: format!("N={}, d={}", self.n(), self.dim()),
                got: format!("N={}, d={}", other.n(), other.dim()),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            lattice: self.lattice,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check_same_shape(other)?;
        Ok(Field {
            lattice: self.lattice,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `(1/N^d) sum_x f(x)`.
    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    /// Counting inner product `(1/N^d) sum_x f(x) g(x)`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / self.len() as f64)
    }

    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.len() as f64
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Applies `op(fiber_in, fiber_out)` to every 1-D fiber along `axis`.
    pub fn map_along_axis(&self, axis: usize, mut op: impl FnMut(&[f64], &mut [f64])) -> Field {
        let n = self.n();
        let stride = self.lattice.stride(axis);
        let block = stride * n;
        let mut out = vec![0.0; self.len()];
        let mut fin = vec![0.0; n];
        let mut fout = vec![0.0; n];
        for base in (0..self.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (i, v) in fin.iter_mut().enumerate() {
                    *v = self.values[start + i * stride];
                }
                op(&fin, &mut fout);
                for (i, v) in fout.iter().enumerate() {
                    out[start + i * stride] = *v;
                }
            }
        }
        Field {
            lattice: self.lattice,
            values: out,
        }
    }

    /// Piecewise-constant extension onto a finer grid `N_fine = k N`:
    /// each fine point `y` takes the value of the coarse site `x` with
    /// `x/N <= y < (x+1)/N` in every coordinate.
    pub fn extend_to(&self, n_fine: usize) -> Result<Field> {
        if !n_fine.is_multiple_of(self.n()) {
            return Err(Error::InvalidParameter(format!(
                "fine grid {n_fine} is not a multiple of {}",
                self.n()
            )));
        }
        let ratio = n_fine / self.n();
        let fine = Lattice::new(self.dim(), n_fine);
        let values = (0..fine.sites())
            .map(|s| {
                let coarse: Vec<usize> = fine.coords(s).iter().map(|c| c / ratio).collect();
                self.values[self.lattice.site(&coarse)]
            })
            .collect();
        Ok(Field {
            lattice: fine,
            values,
        })
    }

    /// Box-average restriction onto a coarser grid `N_coarse = N / k`.
    pub fn restrict_to(&self, n_coarse: usize) -> Result<Field> {
        if n_coarse == 0 || !self.n().is_multiple_of(n_coarse) {
            return Err(Error::InvalidParameter(format!(
                "coarse grid {n_coarse} does not divide {}",
                self.n()
            )));
        }
        let ratio = self.n() / n_coarse;
        let coarse = Lattice::new(self.dim(), n_coarse);
        let mut values = vec![0.0; coarse.sites()];
        for s in 0..self.len() {
            let c: Vec<usize> = self.lattice.coords(s).iter().map(|c| c / ratio).collect();
            values[coarse.site(&c)] += self.values[s];
        }
        let w = 1.0 / ratio.pow(self.dim() as u32) as f64;
        values.iter_mut().for_each(|v| *v *= w);
        Ok(Field {
            lattice: coarse,
            values,
        })
    }
}
