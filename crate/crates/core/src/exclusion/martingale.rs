//! The martingale
//! `M_t = <pi_t, H_lambda> - <pi_0, H_lambda> - int_0^t N^2 L_N <pi_s, H_lambda> ds`
//! with `H_lambda = G_lambda^N H`, tracked exactly along a trajectory.
//!
//! The drift `N^2 L_N <pi, G>` is evaluated through its gradient
//! decomposition
//! `sum_j (1/N^d) sum_x { (L^j G)(x) eta(x)
//!     + a [(L^j G)(x + e_j) + (L^j G)(x)] eta(x) eta(x + e_j)
//!     - a (L^j G)(x) eta(x - e_j) eta(x + e_j) }`.
//! It is piecewise constant between jumps and only terms touching the two
//! exchanged sites change, so the observer updates it in O(d) per event.

use super::config::{Configuration, SimParams};
use super::dynamics::{simulate_from_profile, Observer};
use crate::error::{Error, Result};
use crate::field::{Field, Lattice};
use crate::generator::{discrete_partial, GeneratorND};

/// Precomputed coefficient fields of the drift decomposition.
#[derive(Debug, Clone)]
pub struct DriftDecomposition {
    lattice: Lattice,
    a: f64,
    /// `H_lambda` values.
    test: Vec<f64>,
    /// `(L^j H_lambda)(x) / N^d`, one vector per axis.
    axis_terms: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    Linear(usize),
    Pair(usize, usize),
    Straddle(usize, usize),
}

impl DriftDecomposition {
    pub fn new(gen: &GeneratorND, a: f64, test: &Field) -> Result<Self> {
        let vol = test.len() as f64;
        let axis_terms = (0..gen.dim())
            .map(|j| {
                gen.apply_axis(j, test)
                    .map(|f| f.values().iter().map(|v| v / vol).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lattice: gen.lattice(),
            a,
            test: test.values().to_vec(),
            axis_terms,
        })
    }

    /// `<pi, H_lambda>`.
    pub fn pairing(&self, eta: &Configuration) -> f64 {
        eta.occupancy()
            .iter()
            .zip(&self.test)
            .map(|(&o, v)| o as f64 * v)
            .sum::<f64>()
            / self.test.len() as f64
    }

    fn term(&self, eta: &Configuration, t: Term) -> f64 {
        let l = self.lattice;
        let at = |s: usize| eta.get(s) as f64;
        match t {
            Term::Linear(x) => {
                let coeff: f64 = self.axis_terms.iter().map(|c| c[x]).sum();
                coeff * at(x)
            }
            Term::Pair(j, x) => {
                let y = l.shift(x, j, 1);
                let c = &self.axis_terms[j];
                self.a * (c[y] + c[x]) * at(x) * at(y)
            }
            Term::Straddle(j, x) => {
                -self.a * self.axis_terms[j][x] * at(l.shift(x, j, -1)) * at(l.shift(x, j, 1))
            }
        }
    }

    /// `N^2 L_N <pi, H_lambda>` evaluated from the decomposition.
    pub fn drift(&self, eta: &Configuration) -> f64 {
        let sites = self.lattice.sites();
        let mut total = 0.0;
        for x in 0..sites {
            total += self.term(eta, Term::Linear(x));
            for j in 0..self.lattice.dim {
                total += self.term(eta, Term::Pair(j, x)) + self.term(eta, Term::Straddle(j, x));
            }
        }
        total
    }

    fn touching(&self, sites: [usize; 2], out: &mut Vec<Term>) {
        out.clear();
        let l = self.lattice;
        let mut push = |t: Term| {
            if !out.contains(&t) {
                out.push(t);
            }
        };
        for s in sites {
            push(Term::Linear(s));
            for j in 0..l.dim {
                push(Term::Pair(j, s));
                push(Term::Pair(j, l.shift(s, j, -1)));
                push(Term::Straddle(j, l.shift(s, j, 1)));
                push(Term::Straddle(j, l.shift(s, j, -1)));
            }
        }
    }

    fn local(&self, eta: &Configuration, terms: &[Term]) -> f64 {
        terms.iter().map(|&t| self.term(eta, t)).sum()
    }
}

/// Drift computed bond by bond: `sum_b rate_b(eta) [<pi, G>(sigma_b eta) - <pi, G>(eta)]`.
/// Independent of the decomposition; used to cross-check it.
pub fn drift_direct(params: &SimParams, test: &Field, eta: &Configuration) -> f64 {
    let l = eta.lattice();
    let n2 = (params.n * params.n) as f64;
    let xi = params.profile.conductance_tables(params.n);
    let vol = eta.sites() as f64;
    let mut total = 0.0;
    for x in 0..eta.sites() {
        for (j, table) in xi.iter().enumerate() {
            let y = l.shift(x, j, 1);
            let (ex, ey) = (eta.get(x) as f64, eta.get(y) as f64);
            if ex == ey {
                continue;
            }
            let c = 1.0
                + params.a * (eta.get(l.shift(x, j, -1)) as f64 + eta.get(l.shift(y, j, 1)) as f64);
            let delta = (test.values()[x] - test.values()[y]) * (ey - ex) / vol;
            total += n2 * table[l.coord(x, j)] * c * delta;
        }
    }
    total
}

/// Observer accumulating `M_t` exactly between jumps.
#[derive(Debug, Clone)]
pub struct MartingaleObserver {
    decomposition: DriftDecomposition,
    scratch: Vec<Term>,
    pairing0: f64,
    pairing: f64,
    drift: f64,
    integral: f64,
    last_t: f64,
    pub sup_abs: f64,
    pub samples: Vec<(f64, f64)>,
}

impl MartingaleObserver {
    pub fn new(decomposition: DriftDecomposition) -> Self {
        Self {
            decomposition,
            scratch: Vec::new(),
            pairing0: 0.0,
            pairing: 0.0,
            drift: 0.0,
            integral: 0.0,
            last_t: 0.0,
            sup_abs: 0.0,
            samples: Vec::new(),
        }
    }

    fn value_at(&self, t: f64) -> f64 {
        self.pairing - self.pairing0 - (self.integral + self.drift * (t - self.last_t))
    }

    fn advance(&mut self, t: f64) {
        self.integral += self.drift * (t - self.last_t);
        self.last_t = t;
    }

    /// Drift currently held by the incremental update.
    pub fn current_drift(&self) -> f64 {
        self.drift
    }
}

impl Observer for MartingaleObserver {
    fn start(&mut self, eta: &Configuration) {
        self.pairing0 = self.decomposition.pairing(eta);
        self.pairing = self.pairing0;
        self.drift = self.decomposition.drift(eta);
        self.integral = 0.0;
        self.last_t = 0.0;
        self.sup_abs = 0.0;
        self.samples.clear();
    }

    fn before_jump(&mut self, t: f64, eta: &Configuration, x: usize, y: usize) {
        self.advance(t);
        self.sup_abs = self.sup_abs.max(self.value_at(t).abs());
        let mut terms = std::mem::take(&mut self.scratch);
        self.decomposition.touching([x, y], &mut terms);
        self.drift -= self.decomposition.local(eta, &terms);
        let g = &self.decomposition.test;
        let vol = g.len() as f64;
        self.pairing -= (eta.get(x) as f64 * g[x] + eta.get(y) as f64 * g[y]) / vol;
        self.scratch = terms;
    }

    fn after_jump(&mut self, t: f64, eta: &Configuration, x: usize, y: usize) {
        self.drift += self.decomposition.local(eta, &self.scratch);
        let g = &self.decomposition.test;
        let vol = g.len() as f64;
        self.pairing += (eta.get(x) as f64 * g[x] + eta.get(y) as f64 * g[y]) / vol;
        self.sup_abs = self.sup_abs.max(self.value_at(t).abs());
    }

    fn snapshot(&mut self, t: f64, _eta: &Configuration) {
        let m = self.value_at(t);
        self.sup_abs = self.sup_abs.max(m.abs());
        self.samples.push((t, m));
    }

    fn finish(&mut self, t: f64, _eta: &Configuration) {
        self.sup_abs = self.sup_abs.max(self.value_at(t).abs());
    }
}

/// One replicate's martingale path.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingalePath {
    /// `(t, M_t)` at the observable times.
    pub samples: Vec<(f64, f64)>,
    /// `sup_t |M_t|` over the whole run, checked at every jump.
    pub sup_abs: f64,
    pub replicate: u64,
}

/// Upper bounds on `E[M_t^2] / t` from the quadratic variation:
/// `sharp = (1 + 2a^+) N^{-2d} sum_j sum_x xi (grad_j H_lambda)^2` and the
/// cruder `C(H) / (lambda N^d)` with `C(H) = (1 + 2a^+) <H, H>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticVariationBound {
    pub sharp_rate: f64,
    pub resolvent_rate: f64,
}

pub fn quadratic_variation_bound(
    gen: &GeneratorND,
    a: f64,
    h: &Field,
    lambda: f64,
) -> Result<QuadraticVariationBound> {
    let h_lambda = gen.resolvent_solve(lambda, h)?;
    let c_max = 1.0 + 2.0 * a.max(0.0);
    let l = gen.lattice();
    let vol = h.len() as f64;
    let mut sum = 0.0;
    for j in 0..l.dim {
        let grad = discrete_partial(&h_lambda, j);
        let xi = gen.axis(j).conductances();
        for s in 0..h.len() {
            sum += xi[l.coord(s, j)] * grad.values()[s].powi(2);
        }
    }
    let h2 = h.inner(h)?;
    Ok(QuadraticVariationBound {
        sharp_rate: c_max * sum / (vol * vol),
        resolvent_rate: c_max * h2 / (lambda * vol),
    })
}

/// Simulates one replicate from `rho0` and returns its martingale path.
pub fn martingale_residual(
    params: &SimParams,
    rho0: &dyn Fn(&[f64]) -> f64,
    h: &Field,
    lambda: f64,
    replicate: u64,
) -> Result<MartingalePath> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda = {lambda} must be positive"
        )));
    }
    let gen = GeneratorND::new(&params.profile, params.n)?;
    let h_lambda = gen.resolvent_solve(lambda, h)?;
    martingale_with_test(params, &gen, rho0, &h_lambda, replicate)
}

/// As [`martingale_residual`] with a precomputed `H_lambda`, for ensembles.
pub fn martingale_with_test(
    params: &SimParams,
    gen: &GeneratorND,
    rho0: &dyn Fn(&[f64]) -> f64,
    h_lambda: &Field,
    replicate: u64,
) -> Result<MartingalePath> {
    let decomposition = DriftDecomposition::new(gen, params.a, h_lambda)?;
    let mut obs = MartingaleObserver::new(decomposition);
    simulate_from_profile(params, rho0, replicate, &mut obs)?;
    Ok(MartingalePath {
        samples: obs.samples,
        sup_abs: obs.sup_abs,
        replicate,
    })
}
