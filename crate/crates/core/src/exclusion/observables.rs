//! Empirical measures, box averages and the replacement diagnostic.

use std::io::Write;

use super::config::{Configuration, CylinderFunction};
use crate::error::{Error, Result};
use crate::field::Field;

/// `<pi^N, H> = (1/N^d) sum_x H(x/N) eta(x)`.
pub fn empirical_pairing(eta: &Configuration, h: &Field) -> Result<f64> {
    if eta.lattice() != h.lattice() {
        return Err(Error::ShapeMismatch {
            expected: format!("N={}, d={}", eta.n(), eta.dim()),
            got: format!("N={}, d={}", h.n(), h.dim()),
        });
    }
    Ok(eta
        .occupancy()
        .iter()
        .zip(h.values())
        .filter(|(&o, _)| o == 1)
        .map(|(_, &v)| v)
        .sum::<f64>()
        / eta.sites() as f64)
}

/// Same pairing against a function of the macroscopic position.
pub fn empirical_pairing_fn(eta: &Configuration, h: &dyn Fn(&[f64]) -> f64) -> f64 {
    let l = eta.lattice();
    (0..eta.sites())
        .filter(|&s| eta.get(s) == 1)
        .map(|s| h(&l.position(s)))
        .sum::<f64>()
        / eta.sites() as f64
}

/// `eta^l(x)`: mean occupancy over the box `{y : 0 <= y_i - x_i < l}`.
pub fn box_average(eta: &Configuration, x: usize, side: usize) -> Result<f64> {
    check_side(eta, side)?;
    let l = eta.lattice();
    let base = l.coords(x);
    let mut offsets = vec![0usize; l.dim];
    let mut total = 0usize;
    loop {
        let c: Vec<usize> = base.iter().zip(&offsets).map(|(b, o)| b + o).collect();
        total += eta.get(l.site(&c)) as usize;
        // odometer over the box
        let mut k = 0;
        while k < l.dim {
            offsets[k] += 1;
            if offsets[k] < side {
                break;
            }
            offsets[k] = 0;
            k += 1;
        }
        if k == l.dim {
            break;
        }
    }
    Ok(total as f64 / side.pow(l.dim as u32) as f64)
}

/// `eta^l(x)` at every site, via separable periodic window sums.
pub fn box_averages(eta: &Configuration, side: usize) -> Result<Field> {
    check_side(eta, side)?;
    let l = eta.lattice();
    let mut f = Field::new(
        l.dim,
        l.n,
        eta.occupancy().iter().map(|&o| o as f64).collect(),
    )?;
    for j in 0..l.dim {
        f = f.map_along_axis(j, |a, b| {
            let n = a.len();
            let mut run: f64 = (0..side).map(|k| a[k % n]).sum();
            for x in 0..n {
                b[x] = run;
                run += a[(x + side) % n] - a[x];
            }
        });
    }
    let norm = side.pow(l.dim as u32) as f64;
    Ok(f.map(|v| (v / norm).clamp(0.0, 1.0)))
}

fn check_side(eta: &Configuration, side: usize) -> Result<()> {
    if side == 0 || side > eta.n() {
        return Err(Error::InvalidParameter(format!(
            "box side {side} outside [1, {}]",
            eta.n()
        )));
    }
    Ok(())
}

/// `(1/N^d) sum_x F(x/N) { tau_x g(eta) - g~(eta^{l}(x)) }` for one configuration.
pub fn replacement_integrand(
    eta: &Configuration,
    f: &Field,
    g: &CylinderFunction,
    side: usize,
) -> Result<f64> {
    let boxes = box_averages(eta, side)?;
    if f.lattice() != eta.lattice() {
        return Err(Error::ShapeMismatch {
            expected: format!("N={}, d={}", eta.n(), eta.dim()),
            got: format!("N={}, d={}", f.n(), f.dim()),
        });
    }
    let sum: f64 = (0..eta.sites())
        .map(|x| f.values()[x] * (g.eval_at(eta, x) - g.g_tilde_unchecked(boxes.values()[x])))
        .sum();
    Ok(sum / eta.sites() as f64)
}

/// `| int_0^t replacement_integrand(eta_s) ds |` by the trapezoid rule over
/// the snapshots with time `<= t`, boxes of side `floor(eps N)`.
pub fn replacement_gap(
    snapshots: &[(f64, Configuration)],
    f: &Field,
    g: &CylinderFunction,
    eps: f64,
    t: f64,
) -> Result<f64> {
    let n = f.n();
    let side = (eps * n as f64 + 1e-9).floor() as usize;
    if side < 1 {
        return Err(Error::InvalidParameter(format!(
            "eps N = {} < 1",
            eps * n as f64
        )));
    }
    let mut prev: Option<(f64, f64)> = None;
    let mut integral = 0.0;
    for (s, eta) in snapshots.iter().filter(|(s, _)| *s <= t + 1e-12) {
        let v = replacement_integrand(eta, f, g, side)?;
        if let Some((s0, v0)) = prev {
            integral += 0.5 * (s - s0) * (v + v0);
        }
        prev = Some((*s, v));
    }
    Ok(integral.abs())
}

/// Rows `replicate,time,site_index,occupancy`.
pub fn write_site_csv(
    mut w: impl Write,
    replicate: u64,
    snapshots: &[(f64, Configuration)],
    header: bool,
) -> std::io::Result<()> {
    if header {
        writeln!(w, "replicate,time,site_index,occupancy")?;
    }
    for (t, eta) in snapshots {
        for (s, o) in eta.occupancy().iter().enumerate() {
            writeln!(w, "{replicate},{t:.16e},{s},{o}")?;
        }
    }
    Ok(())
}

/// Rows `replicate,time,box_index,box_average` over the non-overlapping
/// boxes of side `side` anchored at multiples of `side`.
pub fn write_density_csv(
    mut w: impl Write,
    replicate: u64,
    snapshots: &[(f64, Configuration)],
    side: usize,
    header: bool,
) -> Result<()> {
    if header {
        writeln!(w, "replicate,time,box_index,box_average")?;
    }
    for (t, eta) in snapshots {
        let l = eta.lattice();
        if side == 0 || l.n % side != 0 {
            return Err(Error::InvalidParameter(format!(
                "box side {side} must divide N = {}",
                l.n
            )));
        }
        let boxes = box_averages(eta, side)?;
        let coarse = crate::field::Lattice::new(l.dim, l.n / side);
        for b in 0..coarse.sites() {
            let anchor: Vec<usize> = coarse.coords(b).iter().map(|c| c * side).collect();
            let v = boxes.values()[l.site(&anchor)];
            writeln!(w, "{replicate},{t:.16e},{b},{v:.16e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_examples() {
        let eta = Configuration::new(1, 4, vec![1, 0, 1, 1]).unwrap();
        let one = Field::constant(1, 4, 1.0);
        assert_eq!(empirical_pairing(&eta, &one).unwrap(), 0.75);
        assert_eq!(
            empirical_pairing(&Configuration::empty(1, 4), &one).unwrap(),
            0.0
        );
        assert_eq!(empirical_pairing_fn(&eta, &|_| 1.0), 0.75);
        assert!(empirical_pairing(&eta, &Field::constant(1, 5, 1.0)).is_err());
    }

    #[test]
    fn box_examples() {
        let eta = Configuration::new(1, 4, vec![1, 0, 1, 0]).unwrap();
        assert_eq!(box_average(&eta, 0, 2).unwrap(), 0.5);
        assert_eq!(box_average(&eta, 2, 1).unwrap(), 1.0);
        assert_eq!(box_average(&Configuration::full(2, 5), 7, 3).unwrap(), 1.0);
        assert!(box_average(&eta, 0, 0).is_err());
        assert!(box_average(&eta, 0, 5).is_err());
    }

    #[test]
    fn box_field_matches_pointwise() {
        let occ: Vec<u8> = (0..36).map(|i| ((i * 7 + i / 5) % 3 == 0) as u8).collect();
        let eta = Configuration::new(2, 6, occ).unwrap();
        for side in 1..=6 {
            let all = box_averages(&eta, side).unwrap();
            for x in 0..36 {
                let direct = box_average(&eta, x, side).unwrap();
                assert!((all.values()[x] - direct).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn g_tilde_examples() {
        let h1 = CylinderFunction::Pair { axis: 0 };
        assert!((h1.g_tilde(0.4).unwrap() - 0.16).abs() < 1e-15);
        assert_eq!(CylinderFunction::Occupation.g_tilde(0.7).unwrap(), 0.7);
        let g = CylinderFunction::Affine { axis: 0, a: 0.2 };
        assert!((g.g_tilde(0.5).unwrap() - 0.55).abs() < 1e-15);
        assert!(h1.g_tilde(1.2).is_err());
    }

    #[test]
    fn replacement_gap_trivial_cases() {
        let n = 8;
        let occ: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let eta = Configuration::new(1, n, occ).unwrap();
        let snaps = vec![(0.0, eta.clone()), (0.1, eta.clone()), (0.2, eta)];
        let f = Field::from_fn(1, n, |x| (std::f64::consts::TAU * x[0]).cos());
        let gap = replacement_gap(
            &snaps,
            &f,
            &CylinderFunction::Occupation,
            1.0 / n as f64,
            0.2,
        )
        .unwrap();
        assert_eq!(gap, 0.0);
        let full = vec![
            (0.0, Configuration::full(1, n)),
            (0.2, Configuration::full(1, n)),
        ];
        let gap = replacement_gap(&full, &f, &CylinderFunction::Pair { axis: 0 }, 0.5, 0.2);
        assert_eq!(gap.unwrap(), 0.0);
        assert!(replacement_gap(&full, &f, &CylinderFunction::Occupation, 0.05, 0.2).is_err());
    }

    #[test]
    fn density_csv_rows() {
        let eta = Configuration::new(1, 4, vec![1, 1, 0, 1]).unwrap();
        let mut buf = Vec::new();
        write_density_csv(&mut buf, 3, &[(0.5, eta)], 2, true).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = s.lines().collect();
        assert_eq!(rows[0], "replicate,time,box_index,box_average");
        assert_eq!(rows[1], "3,5.0000000000000000e-1,0,1.0000000000000000e0");
        assert_eq!(rows[2], "3,5.0000000000000000e-1,1,5.0000000000000000e-1");
    }
}
