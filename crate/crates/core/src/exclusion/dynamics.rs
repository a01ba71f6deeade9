//! Rejection-free event-driven simulation of the exclusion process with
//! generator `N^2 L_N`.
//!
//! Every undirected bond `(x, x + e_j)` carries the rate
//! `N^2 xi_{x,x+e_j} c_{x,x+e_j}(eta)` when its two sites differ and zero
//! otherwise (exchanging equal occupancies leaves `eta` unchanged). Rates
//! live in a binary sum tree; after an exchange only the bonds whose rate
//! reads one of the two flipped sites are recomputed.

use rand::Rng;

use super::config::{Configuration, SimParams};
use crate::ensemble::{replicate_rng, SimRng};
use crate::error::{Error, Result};
use crate::field::Lattice;

/// `xi * (1 + a (eta(x - e_j) + eta(x + 2 e_j)))`. Reads only sites outside
/// the exchanged pair, so it is invariant under `exchange(eta, x, j)`.
pub fn jump_rate(eta: &Configuration, x: usize, j: usize, a: f64, xi: f64) -> f64 {
    let l = eta.lattice();
    let left = eta.get(l.shift(x, j, -1)) as f64;
    let right = eta.get(l.shift(x, j, 2)) as f64;
    xi * (1.0 + a * (left + right))
}

/// `sigma^{x, x+e_j} eta`.
pub fn exchange(eta: &Configuration, x: usize, j: usize) -> Configuration {
    let mut out = eta.clone();
    let y = eta.lattice().shift(x, j, 1);
    out.swap_sites(x, y);
    out
}

/// Independent Bernoulli occupation with `P(eta(x) = 1) = rho0(x/N)`.
pub fn sample_bernoulli_with(
    rho0: &dyn Fn(&[f64]) -> f64,
    lattice: Lattice,
    rng: &mut SimRng,
) -> Result<Configuration> {
    let mut occ = Vec::with_capacity(lattice.sites());
    for s in 0..lattice.sites() {
        let p = rho0(&lattice.position(s));
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "initial density {p} outside [0, 1] at site {s}"
            )));
        }
        let u: f64 = rng.random();
        occ.push(u8::from(u < p));
    }
    Configuration::new(lattice.dim, lattice.n, occ)
}

/// [`sample_bernoulli_with`] on the stream `(seed, 0)`.
pub fn sample_bernoulli_profile(
    rho0: &dyn Fn(&[f64]) -> f64,
    n: usize,
    dim: usize,
    seed: u64,
) -> Result<Configuration> {
    sample_bernoulli_with(rho0, Lattice::new(dim, n), &mut replicate_rng(seed, 0))
}

/// Hooks into the event loop. `before_jump` and `after_jump` bracket every
/// exchange that changes the configuration; `snapshot` fires at each
/// observable time with the state at that time.
pub trait Observer {
    fn start(&mut self, _eta: &Configuration) {}
    fn before_jump(&mut self, _t: f64, _eta: &Configuration, _x: usize, _y: usize) {}
    fn after_jump(&mut self, _t: f64, _eta: &Configuration, _x: usize, _y: usize) {}
    fn snapshot(&mut self, _t: f64, _eta: &Configuration) {}
    fn finish(&mut self, _t: f64, _eta: &Configuration) {}
}

impl Observer for () {}

/// Configurations at the observable times of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub snapshots: Vec<(f64, Configuration)>,
    /// Exchanges that changed the configuration.
    pub jump_count: u64,
    /// Per-bond jump counts, indexed `site * d + axis`.
    pub bond_jumps: Vec<u64>,
    pub seed: u64,
    pub replicate: u64,
}

/// Complete binary tree of partial sums; parents are recomputed from their
/// children on every update so no rounding drift accumulates.
#[derive(Debug, Clone)]
pub struct SumTree {
    size: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(leaves: &[f64]) -> Self {
        let size = leaves.len().next_power_of_two().max(1);
        let mut nodes = vec![0.0; 2 * size];
        nodes[size..size + leaves.len()].copy_from_slice(leaves);
        for i in (1..size).rev() {
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1];
        }
        Self { size, nodes }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        let mut k = self.size + i;
        self.nodes[k] = value;
        while k > 1 {
            k /= 2;
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
        }
    }

    /// Leaf `i` with `prefix(i) <= u < prefix(i) + leaf(i)`; never returns a
    /// zero-rate leaf while the total is positive.
    pub fn find(&self, mut u: f64) -> usize {
        let mut k = 1;
        while k < self.size {
            let left = self.nodes[2 * k];
            let right = self.nodes[2 * k + 1];
            if (u < left && left > 0.0) || right <= 0.0 {
                k *= 2;
            } else {
                u -= left;
                k = 2 * k + 1;
            }
        }
        k - self.size
    }
}

/// Event-driven simulator for one trajectory.
pub struct Simulator<'p> {
    params: &'p SimParams,
    lattice: Lattice,
    /// `N^2 xi` per axis, indexed by the bond's coordinate along that axis.
    scaled_xi: Vec<Vec<f64>>,
    eta: Configuration,
    tree: SumTree,
    rng: SimRng,
    replicate: u64,
}

impl<'p> Simulator<'p> {
    pub fn new(params: &'p SimParams, eta0: Configuration, replicate: u64) -> Result<Self> {
        Self::with_rng(
            params,
            eta0,
            replicate_rng(params.seed, replicate),
            replicate,
        )
    }

    /// Continues an existing stream, e.g. after the initial state was drawn from it.
    pub fn with_rng(
        params: &'p SimParams,
        eta0: Configuration,
        rng: SimRng,
        replicate: u64,
    ) -> Result<Self> {
        params.validate(2)?;
        let lattice = params.lattice();
        if eta0.lattice() != lattice {
            return Err(Error::ShapeMismatch {
                expected: format!("N={}, d={}", lattice.n, lattice.dim),
                got: format!("N={}, d={}", eta0.n(), eta0.dim()),
            });
        }
        let n2 = (params.n * params.n) as f64;
        let scaled_xi = params
            .profile
            .conductance_tables(params.n)
            .into_iter()
            .map(|t| t.into_iter().map(|xi| n2 * xi).collect())
            .collect();
        let mut sim = Self {
            params,
            lattice,
            scaled_xi,
            tree: SumTree::new(&[]),
            eta: eta0,
            rng,
            replicate,
        };
        let rates: Vec<f64> = (0..lattice.sites() * lattice.dim)
            .map(|b| sim.bond_rate(b))
            .collect();
        sim.tree = SumTree::new(&rates);
        Ok(sim)
    }

    pub fn configuration(&self) -> &Configuration {
        &self.eta
    }

    /// Current total event rate.
    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    #[inline]
    fn bond_rate(&self, bond: usize) -> f64 {
        let d = self.lattice.dim;
        let (x, j) = (bond / d, bond % d);
        let l = self.lattice;
        let y = l.shift(x, j, 1);
        if self.eta.get(x) == self.eta.get(y) {
            return 0.0;
        }
        let left = self.eta.get(l.shift(x, j, -1)) as f64;
        let right = self.eta.get(l.shift(y, j, 1)) as f64;
        self.scaled_xi[j][l.coord(x, j)] * (1.0 + self.params.a * (left + right))
    }

    fn refresh_around(&mut self, site: usize) {
        let l = self.lattice;
        let d = l.dim;
        for k in 0..d {
            for off in -2..=1 {
                let z = l.shift(site, k, off);
                let b = z * d + k;
                let r = self.bond_rate(b);
                if r != self.tree.get(b) {
                    self.tree.set(b, r);
                }
            }
        }
    }

    /// Runs to the horizon, recording snapshots at the observable times.
    pub fn run(mut self, observer: &mut impl Observer) -> TrajectoryRecord {
        let horizon = self.params.horizon;
        let times = &self.params.observable_times;
        let d = self.lattice.dim;
        let mut snapshots = Vec::with_capacity(times.len());
        let mut bond_jumps = vec![0u64; self.lattice.sites() * d];
        let mut jump_count = 0u64;
        let mut next_obs = 0;
        let mut t = 0.0;
        observer.start(&self.eta);
        loop {
            let total = self.tree.total();
            let t_next = if total > 0.0 {
                let u: f64 = self.rng.random();
                t - (1.0 - u).ln() / total
            } else {
                f64::INFINITY
            };
            // The state is constant on [t, t_next).
            while next_obs < times.len() && times[next_obs] < t_next {
                observer.snapshot(times[next_obs], &self.eta);
                snapshots.push((times[next_obs], self.eta.clone()));
                next_obs += 1;
            }
            if t_next > horizon {
                break;
            }
            let u: f64 = self.rng.random::<f64>() * total;
            let bond = self.tree.find(u);
            let (x, j) = (bond / d, bond % d);
            let y = self.lattice.shift(x, j, 1);
            observer.before_jump(t_next, &self.eta, x, y);
            self.eta.swap_sites(x, y);
            self.refresh_around(x);
            self.refresh_around(y);
            observer.after_jump(t_next, &self.eta, x, y);
            bond_jumps[bond] += 1;
            jump_count += 1;
            t = t_next;
        }
        observer.finish(horizon, &self.eta);
        TrajectoryRecord {
            snapshots,
            jump_count,
            bond_jumps,
            seed: self.params.seed,
            replicate: self.replicate,
        }
    }
}

/// Simulates one trajectory from `eta0` on the stream `(params.seed, 0)`.
pub fn simulate(params: &SimParams, eta0: Configuration) -> Result<TrajectoryRecord> {
    Ok(Simulator::new(params, eta0, 0)?.run(&mut ()))
}

/// Simulates replicate `replicate` with an observer attached.
pub fn simulate_observed(
    params: &SimParams,
    eta0: Configuration,
    replicate: u64,
    observer: &mut impl Observer,
) -> Result<TrajectoryRecord> {
    Ok(Simulator::new(params, eta0, replicate)?.run(observer))
}

/// Draws the initial state from `rho0` and runs the dynamics, both on the
/// stream `(params.seed, replicate)`.
pub fn simulate_from_profile(
    params: &SimParams,
    rho0: &dyn Fn(&[f64]) -> f64,
    replicate: u64,
    observer: &mut impl Observer,
) -> Result<TrajectoryRecord> {
    let mut rng = replicate_rng(params.seed, replicate);
    let eta0 = sample_bernoulli_with(rho0, params.lattice(), &mut rng)?;
    Ok(Simulator::with_rng(params, eta0, rng, replicate)?.run(observer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conductance::{ConductanceFunction, ConductanceProfile};

    fn params(n: usize, dim: usize, a: f64, horizon: f64, times: Vec<f64>) -> SimParams {
        let w = ConductanceFunction::new(1.0, vec![(0.5, 1.0)]).unwrap();
        SimParams::oracle(
            n,
            a,
            ConductanceProfile::uniform(dim, w),
            horizon,
            42,
            times,
        )
        .unwrap()
    }

    #[test]
    fn rate_examples() {
        let eta = Configuration::new(1, 8, vec![0, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        assert_eq!(jump_rate(&eta, 3, 0, 0.3, 1.0), 1.0);
        let eta = Configuration::new(1, 8, vec![0, 0, 1, 0, 0, 0, 0, 0]).unwrap();
        assert!((jump_rate(&eta, 3, 0, 0.3, 1.0) - 1.3).abs() < 1e-15);
        let eta = Configuration::new(1, 8, vec![0, 0, 1, 0, 0, 1, 0, 0]).unwrap();
        assert!((jump_rate(&eta, 3, 0, 0.3, 1.0 / 9.0) - 1.6 / 9.0).abs() < 1e-15);
        let swapped = exchange(&eta, 3, 0);
        assert_eq!(
            jump_rate(&swapped, 3, 0, 0.3, 1.0),
            jump_rate(&eta, 3, 0, 0.3, 1.0)
        );
    }

    #[test]
    fn exchange_examples() {
        let eta = Configuration::new(1, 4, vec![1, 0, 0, 0]).unwrap();
        assert_eq!(exchange(&eta, 0, 0).occupancy(), &[0, 1, 0, 0]);
        assert_eq!(exchange(&exchange(&eta, 0, 0), 0, 0), eta);
        assert_eq!(exchange(&eta, 1, 0), eta);
        assert_eq!(exchange(&eta, 3, 0).occupancy(), &[0, 0, 0, 1]);
    }

    #[test]
    fn bernoulli_extremes_and_validation() {
        assert_eq!(
            sample_bernoulli_profile(&|_| 1.0, 8, 2, 1).unwrap(),
            Configuration::full(2, 8)
        );
        assert_eq!(
            sample_bernoulli_profile(&|_| 0.0, 8, 2, 1).unwrap(),
            Configuration::empty(2, 8)
        );
        assert!(sample_bernoulli_profile(&|_| 1.5, 8, 1, 1).is_err());
    }

    #[test]
    fn bernoulli_half_concentrates() {
        // 4 sigma of Binomial(10^4, 1/2) / 10^4 is 0.02.
        for seed in [1, 2, 3] {
            let eta = sample_bernoulli_profile(&|_| 0.5, 100, 2, seed).unwrap();
            assert!((eta.density() - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn sum_tree_selects_proportionally() {
        let mut t = SumTree::new(&[1.0, 0.0, 2.0, 0.0, 0.5]);
        assert_eq!(t.total(), 3.5);
        assert_eq!(t.find(0.5), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.99), 2);
        assert_eq!(t.find(3.2), 4);
        assert_eq!(t.find(3.5), 4);
        t.set(4, 0.0);
        assert_eq!(t.find(3.4), 2);
    }

    #[test]
    fn full_lattice_is_frozen() {
        let p = params(8, 2, 0.2, 0.5, vec![0.0, 0.25, 0.5]);
        let rec = simulate(&p, Configuration::full(2, 8)).unwrap();
        assert_eq!(rec.jump_count, 0);
        assert_eq!(rec.snapshots.len(), 3);
        assert!(rec
            .snapshots
            .iter()
            .all(|(_, c)| *c == Configuration::full(2, 8)));
    }

    #[test]
    fn conserves_particles_and_is_seed_deterministic() {
        let p = params(16, 2, -0.3, 0.05, SimParams::uniform_times(0.05, 6));
        let eta0 = sample_bernoulli_profile(&|x| 0.5 + 0.4 * (6.3 * x[0]).sin(), 16, 2, 9).unwrap();
        let rec = simulate(&p, eta0.clone()).unwrap();
        assert!(rec.jump_count > 100);
        let count = eta0.particle_count();
        assert!(rec
            .snapshots
            .iter()
            .all(|(_, c)| c.particle_count() == count));
        assert_eq!(rec, simulate(&p, eta0).unwrap());
    }

    #[test]
    fn incremental_rates_match_rebuild() {
        let p = params(6, 2, 0.4, 0.02, vec![]);
        let eta0 = sample_bernoulli_profile(&|_| 0.5, 6, 2, 4).unwrap();
        let mut sim = Simulator::new(&p, eta0, 0).unwrap();
        for step in 0..200 {
            let total = sim.tree.total();
            let u: f64 = sim.rng.random::<f64>() * total;
            let b = sim.tree.find(u);
            assert!(sim.tree.get(b) > 0.0, "step {step}");
            let (x, j) = (b / 2, b % 2);
            let y = sim.lattice.shift(x, j, 1);
            sim.eta.swap_sites(x, y);
            sim.refresh_around(x);
            sim.refresh_around(y);
            for bond in 0..72 {
                assert_eq!(sim.tree.get(bond), sim.bond_rate(bond));
            }
        }
    }

    #[test]
    fn wrong_shape_rejected() {
        let p = params(8, 1, 0.0, 0.1, vec![]);
        assert!(simulate(&p, Configuration::full(1, 6)).is_err());
    }
}
