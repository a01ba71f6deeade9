use hydroscale::exclusion::{sample_bernoulli_profile, simulate, simulate_from_profile, SimParams};
use hydroscale::hydro::{solve, DensityField, PhiFunction};
use hydroscale::{ConductanceFunction, ConductanceProfile, Field, GeneratorND};
use proptest::prelude::*;

fn arb_w() -> impl Strategy<Value = ConductanceFunction> {
    (
        0.2f64..3.0,
        proptest::collection::btree_map(0u32..100, 0.01f64..2.0, 0..3),
    )
        .prop_map(|(slope, atoms)| {
            let atoms = atoms
                .into_iter()
                .map(|(u, w)| (u as f64 / 100.0, w))
                .collect();
            ConductanceFunction::new(slope, atoms).unwrap()
        })
}

fn arb_profile() -> impl Strategy<Value = ConductanceProfile> {
    prop_oneof![
        arb_w().prop_map(|w| ConductanceProfile::uniform(1, w)),
        (arb_w(), arb_w()).prop_map(|(a, b)| ConductanceProfile::new(vec![a, b]).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dynamics_conserve_particles_and_replay(
        profile in arb_profile(),
        n in 4usize..10,
        a in -0.45f64..1.5,
        density in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let times = SimParams::uniform_times(0.02, 4);
        let p = SimParams::new(n, a, profile, 0.02, seed, times).unwrap();
        let eta0 = sample_bernoulli_profile(&|_| density, n, p.dim, seed).unwrap();
        let first = simulate(&p, eta0.clone()).unwrap();
        for (_, eta) in &first.snapshots {
            prop_assert_eq!(eta.particle_count(), eta0.particle_count());
        }
        prop_assert_eq!(first.bond_jumps.iter().sum::<u64>(), first.jump_count);
        let again = simulate(&p, eta0).unwrap();
        prop_assert_eq!(first, again);
    }

    #[test]
    fn replicates_use_distinct_streams(seed in any::<u64>()) {
        let w = ConductanceFunction::identity();
        let p = SimParams::new(16, 0.0, ConductanceProfile::uniform(1, w), 0.05, seed, vec![0.05]).unwrap();
        let a = simulate_from_profile(&p, &|_| 0.5, 0, &mut ()).unwrap();
        let b = simulate_from_profile(&p, &|_| 0.5, 1, &mut ()).unwrap();
        prop_assert_ne!(a.snapshots, b.snapshots);
    }

    #[test]
    fn pde_conserves_mass_within_initial_range(
        profile in arb_profile(),
        a in -0.45f64..1.0,
        values in proptest::collection::vec(0.0f64..1.0, 64),
    ) {
        let dim = profile.dim();
        let n = if dim == 1 { 64 } else { 8 };
        let gen = GeneratorND::new(&profile, n).unwrap();
        let phi = PhiFunction::quadratic(a).unwrap();
        let gamma = DensityField::new(Field::new(dim, n, values).unwrap()).unwrap();
        let times = SimParams::uniform_times(0.01, 5);
        let sol = solve(&gen, &phi, &gamma, 0.01, &times, None).unwrap();
        prop_assert!(sol.mass_drift() <= 1e-12);
        let (lo, hi) = (gamma.min(), gamma.max());
        for f in &sol.fields {
            prop_assert!(f.min() >= lo - 1e-12 && f.max() <= hi + 1e-12);
        }
    }

    #[test]
    fn semigroup_and_resolvent_calculus(
        profile in arb_profile(),
        s in 0.0f64..0.01,
        t in 0.0f64..0.01,
        lambda in 0.1f64..50.0,
        values in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let dim = profile.dim();
        let n = if dim == 1 { 64 } else { 8 };
        let gen = GeneratorND::new(&profile, n).unwrap();
        let h = Field::new(dim, n, values).unwrap();
        let scale = h.sup_norm().max(1e-3);

        let two_steps = gen.semigroup_apply(t, &gen.semigroup_apply(s, &h).unwrap()).unwrap();
        let one_step = gen.semigroup_apply(s + t, &h).unwrap();
        let diff = two_steps.zip_map(&one_step, |x, y| x - y).unwrap().sup_norm();
        prop_assert!(diff <= 1e-10 * scale);

        let u = gen.resolvent_solve(lambda, &h).unwrap();
        let lu = gen.apply(&u).unwrap();
        let back = u.zip_map(&lu, |x, y| lambda * x - y).unwrap();
        let diff = back.zip_map(&h, |x, y| x - y).unwrap().sup_norm();
        prop_assert!(diff <= 1e-9 * scale);
        prop_assert!(u.sup_norm() <= h.sup_norm() / lambda * (1.0 + 1e-10));
    }
}
