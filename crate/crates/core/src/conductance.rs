//! Conductance functions `W_k`: strictly increasing, right-continuous, with
//! 1-periodic increments, represented as a linear drift plus finitely many atoms.
//!
//! An atom at `u` contributes to `W(x)` for every `x >= u` (modulo periodic
//! extension), so on the grid it belongs to the bond whose half-open interval
//! `(x/N, (x+1)/N]` contains it. An atom at `u = 0` therefore sits on the
//! seam bond `(N-1, 0)` and keeps `W(0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coordinate's `W`: `W(x) = slope * x + sum_{0 < u_i <= x} w_i` on `[0, 1)`,
/// extended by `W(x + 1) = W(x) + W(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConductance", into = "RawConductance")]
pub struct ConductanceFunction {
    slope: f64,
    atoms: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawConductance {
    slope: f64,
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<RawConductance> for ConductanceFunction {
    type Error = Error;
    fn try_from(raw: RawConductance) -> Result<Self> {
        Self::new(raw.slope, raw.atoms)
    }
}

impl From<ConductanceFunction> for RawConductance {
    fn from(w: ConductanceFunction) -> Self {
        RawConductance {
            slope: w.slope,
            atoms: w.atoms,
        }
    }
}

impl ConductanceFunction {
    pub fn new(slope: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(slope.is_finite() && slope > 0.0) {
            return Err(Error::InvalidConductance(format!(
                "drift slope must be positive and finite, got {slope}"
            )));
        }
        for (i, &(u, w)) in atoms.iter().enumerate() {
            if !(0.0..1.0).contains(&u) {
                return Err(Error::InvalidConductance(format!(
                    "atom location {u} outside [0, 1)"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidConductance(format!(
                    "atom weight {w} at {u} must be positive and finite"
                )));
            }
            if i > 0 && atoms[i - 1].0 >= u {
                return Err(Error::InvalidConductance(
                    "atom locations must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { slope, atoms })
    }

    /// `W(x) = x`.
    pub fn identity() -> Self {
        Self {
            slope: 1.0,
            atoms: Vec::new(),
        }
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `W(1) - W(0)`, the increment over one period.
    pub fn total_mass(&self) -> f64 {
        self.slope + self.atoms.iter().map(|&(_, w)| w).sum::<f64>()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = x.floor();
        let frac = x - k;
        let jumps: f64 = self
            .atoms
            .iter()
            .filter(|&&(u, _)| u > 0.0 && u <= frac)
            .map(|&(_, w)| w)
            .sum();
        k * self.total_mass() + self.slope * frac + jumps
    }

    /// `W(b) - W(a)`, summed from the atom list rather than by differencing
    /// two evaluations.
    pub fn increment(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(Error::ReversedInterval { a, b });
        }
        Ok(self.increment_unchecked(a, b))
    }

    fn increment_unchecked(&self, a: f64, b: f64) -> f64 {
        // Number of periodic images u + k inside (a, b].
        let jumps: f64 = self
            .atoms
            .iter()
            .map(|&(u, w)| w * ((b - u).floor() - (a - u).floor()))
            .sum();
        self.slope * (b - a) + jumps
    }

    /// Index of the grid bond `(x, x+1)` whose interval `(x/N, (x+1)/N]`
    /// contains the atom at `u`.
    pub fn atom_bond(u: f64, n: usize) -> usize {
        let scaled = u * n as f64;
        // u = k/N must land on bond k-1 even when u * N rounds just above k.
        let nearest = scaled.round();
        let top = if (scaled - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest
        } else {
            scaled.ceil()
        };
        let c = top as i64 - 1;
        c.rem_euclid(n as i64) as usize
    }

    /// Grid increments `W((x+1)/N) - W(x/N)` for `x = 0..N`.
    pub fn w_weights(&self, n: usize) -> Vec<f64> {
        assert!(n >= 1, "grid size must be positive");
        let mut weights = vec![self.slope / n as f64; n];
        for &(u, w) in &self.atoms {
            weights[Self::atom_bond(u, n)] += w;
        }
        weights
    }

    /// Bond conductance `xi_{x,x+1} = 1 / (N [W((x+1)/N) - W(x/N)])`.
    pub fn conductance(&self, n: usize, x: usize) -> f64 {
        1.0 / (n as f64 * self.w_weights(n)[x % n])
    }

    /// All `N` bond conductances at once.
    pub fn conductances(&self, n: usize) -> Vec<f64> {
        self.w_weights(n)
            .into_iter()
            .map(|w| 1.0 / (n as f64 * w))
            .collect()
    }
}

/// `W = W_1(x_1) + ... + W_d(x_d)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct ConductanceProfile {
    axes: Vec<ConductanceFunction>,
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    dim: usize,
    axes: Vec<ConductanceFunction>,
}

impl TryFrom<RawProfile> for ConductanceProfile {
    type Error = Error;
    fn try_from(raw: RawProfile) -> Result<Self> {
        if raw.dim == 0 || raw.axes.len() != raw.dim {
            return Err(Error::InvalidConductance(format!(
                "profile declares dim {} but lists {} axes",
                raw.dim,
                raw.axes.len()
            )));
        }
        Ok(Self { axes: raw.axes })
    }
}

impl From<ConductanceProfile> for RawProfile {
    fn from(p: ConductanceProfile) -> Self {
        RawProfile {
            dim: p.axes.len(),
            axes: p.axes,
        }
    }
}

impl ConductanceProfile {
    pub fn new(axes: Vec<ConductanceFunction>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidConductance(
                "profile needs at least one axis".into(),
            ));
        }
        Ok(Self { axes })
    }

    pub fn uniform(dim: usize, w: ConductanceFunction) -> Self {
        Self {
            axes: vec![w; dim.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, j: usize) -> &ConductanceFunction {
        &self.axes[j]
    }

    pub fn axes(&self) -> &[ConductanceFunction] {
        &self.axes
    }

    /// `W(x) = sum_k W_k(x_k)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.axes.iter().zip(x).map(|(w, &xi)| w.eval(xi)).sum()
    }

    /// Per-axis conductance tables, `xi[j][x_j]`.
    pub fn conductance_tables(&self, n: usize) -> Vec<Vec<f64>> {
        self.axes.iter().map(|w| w.conductances(n)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn membrane() -> ConductanceFunction {
        ConductanceFunction::new(1.0, vec![(0.5, 1.0)]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(ConductanceFunction::identity().eval(0.25), 0.25);
        assert_eq!(membrane().eval(0.5), 1.5);
        assert_eq!(membrane().eval(1.25), 2.25);
        assert_eq!(membrane().eval(0.0), 0.0);
        assert_eq!(membrane().eval(0.4999), 0.4999);
    }

    #[test]
    fn increment_examples() {
        let id = ConductanceFunction::identity();
        assert_eq!(id.increment(0.0, 0.5).unwrap(), 0.5);
        assert!((membrane().increment(3.0 / 8.0, 4.0 / 8.0).unwrap() - 1.125).abs() < 1e-15);
        let w = membrane();
        let p0 = w.increment(0.0, 1.0).unwrap();
        for x in [0.3, 0.7] {
            assert!((w.increment(x, x + 1.0).unwrap() - p0).abs() < 1e-12 * p0);
        }
        assert!(matches!(
            w.increment(0.5, 0.2),
            Err(Error::ReversedInterval { .. })
        ));
    }

    #[test]
    fn conductance_examples() {
        let id = ConductanceFunction::identity();
        for x in 0..8 {
            assert!((id.conductance(8, x) - 1.0).abs() < 1e-15);
        }
        assert!((membrane().conductance(8, 3) - 1.0 / 9.0).abs() < 1e-15);
        assert!((membrane().conductance(8, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weight_examples() {
        assert_eq!(ConductanceFunction::identity().w_weights(4), vec![0.25; 4]);
        assert_eq!(membrane().w_weights(4), vec![0.25, 1.25, 0.25, 0.25]);
        let s: f64 = membrane().w_weights(4).iter().sum();
        assert!((s - membrane().eval(1.0)).abs() < 1e-15);
    }

    #[test]
    fn atom_at_origin_sits_on_seam_bond() {
        let w = ConductanceFunction::new(1.0, vec![(0.0, 2.0)]).unwrap();
        assert_eq!(w.eval(0.0), 0.0);
        assert_eq!(w.eval(1.0), 3.0);
        assert_eq!(w.w_weights(4), vec![0.25, 0.25, 0.25, 2.25]);
        assert!((w.increment(-0.1, 0.0).unwrap() - 2.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ConductanceFunction::new(0.0, vec![]).is_err());
        assert!(ConductanceFunction::new(1.0, vec![(1.0, 1.0)]).is_err());
        assert!(ConductanceFunction::new(1.0, vec![(0.5, 0.0)]).is_err());
        assert!(ConductanceFunction::new(1.0, vec![(0.5, 1.0), (0.5, 1.0)]).is_err());
        let bad = r#"{"dim": 2, "axes": [{"slope": 1.0, "atoms": []}]}"#;
        assert!(serde_json::from_str::<ConductanceProfile>(bad).is_err());
    }

    #[test]
    fn profile_json_roundtrip() {
        let json = r#"{"dim": 2, "axes": [{"slope": 1.0, "atoms": [[0.5, 1.0]]}, {"slope": 2.0}]}"#;
        let p: ConductanceProfile = serde_json::from_str(json).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.axis(0), &membrane());
        let back: ConductanceProfile =
            serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    fn arb_w() -> impl Strategy<Value = ConductanceFunction> {
        (
            0.1f64..5.0,
            proptest::collection::btree_map(0u32..1000, 0.01f64..3.0, 0..4),
        )
            .prop_map(|(s, m)| {
                let atoms = m.into_iter().map(|(k, w)| (k as f64 / 1000.0, w)).collect();
                ConductanceFunction::new(s, atoms).unwrap()
            })
    }

    proptest! {
        #[test]
        fn increments_positive_additive_periodic(
            w in arb_w(), a in -2.0f64..2.0, d1 in 1e-6f64..1.5, d2 in 1e-6f64..1.5
        ) {
            let b = a + d1;
            let c = b + d2;
            let ab = w.increment(a, b).unwrap();
            let bc = w.increment(b, c).unwrap();
            let ac = w.increment(a, c).unwrap();
            prop_assert!(ab > 0.0);
            prop_assert!((ab + bc - ac).abs() <= 1e-12 * ac.abs().max(1.0));
            let per = w.increment(a, a + 1.0).unwrap();
            prop_assert!((per - w.total_mass()).abs() <= 1e-12 * per);
        }

        #[test]
        fn conductance_weight_duality(w in arb_w(), n in 2usize..64) {
            let weights = w.w_weights(n);
            let total: f64 = weights.iter().sum();
            prop_assert!((total - w.total_mass()).abs() <= 1e-12 * total);
            for (x, &dw) in weights.iter().enumerate() {
                let prod = w.conductance(n, x) * n as f64 * dw;
                prop_assert!((prod - 1.0).abs() <= 1e-12);
                let direct = w.increment(x as f64 / n as f64, (x + 1) as f64 / n as f64).unwrap();
                prop_assert!((direct - dw).abs() <= 1e-12 * dw.max(1.0));
            }
        }
    }
}
