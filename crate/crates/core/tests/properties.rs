use std::f64::consts::PI;
use std::sync::OnceLock;

use driftlab_core::attribution::{FrequencyBand, TrajectoryPartition};
use driftlab_core::fid::{sigma2_charge, sigma2_magnetic};
use driftlab_core::noise::{
    psd_continuous, psd_discrete, Axis, ComponentMask, NoiseModel, TrajectoryCursor,
};
use driftlab_core::pulse::{phase_equivalent, CliffordGroup};
use driftlab_core::qubit::{step_unitary, Unitary2};
use driftlab_core::rb::fit_rb;
use proptest::prelude::*;

fn group() -> &'static CliffordGroup {
    static G: OnceLock<CliffordGroup> = OnceLock::new();
    G.get_or_init(|| CliffordGroup::build().unwrap())
}

/// Random charge and magnetic ladders inside 1 mHz..10 MHz.
fn model_strategy() -> impl Strategy<Value = NoiseModel> {
    (
        -3i32..4,
        0i32..4,
        -3i32..4,
        0i32..4,
        1e-10f64..1e-7,
        1e6f64..1e10,
    )
        .prop_map(|(ci, cw, mi, mw, pv, pb)| {
            let ir = |e: i32| 10f64.powi(e);
            NoiseModel::empty("p")
                .with_ladder(Axis::Charge, ir(ci), ir(ci + cw), pv)
                .unwrap()
                .with_ladder(Axis::Magnetic, ir(mi), ir(mi + mw), pb)
                .unwrap()
        })
}

fn matrix_distance(a: &Unitary2, b: &Unitary2) -> f64 {
    let mut d: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            d = d.max((a.entry(r, c) - b.entry(r, c)).norm());
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_is_unitary(j in 0.0f64..500.0, b in -100.0f64..100.0, dt in 1e-12f64..1e-6) {
        let u = step_unitary(j, b, dt);
        prop_assert!(u.unitarity_deviation() <= 1e-12);
        prop_assert!((u.det().norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn commuting_steps_accumulate_phase(js in prop::collection::vec(0.0f64..200.0, 1..200)) {
        let dt = 1e-9;
        let u = js.iter().fold(Unitary2::IDENTITY, |acc, &j| step_unitary(j, 0.0, dt) * acc);
        let angle: f64 = js.iter().map(|&j| 2.0 * PI * j * 1e6 * dt).sum();
        prop_assert!(matrix_distance(&u, &Unitary2::rz(angle)) <= 1e-9);
    }

    #[test]
    fn sigma2_is_linear_in_power(m in model_strategy(), t in 1e-9f64..1e-4, k in 0.1f64..10.0) {
        let s = m.scaled(k);
        let (a, b) = (sigma2_charge(t, &m, 12.0, 18.0), sigma2_charge(t, &s, 12.0, 18.0));
        prop_assert!((b - k * a).abs() <= 1e-12 * b.abs().max(1e-300));
        let (a, b) = (sigma2_magnetic(t, &m), sigma2_magnetic(t, &s));
        prop_assert!((b - k * a).abs() <= 1e-12 * b.abs().max(1e-300));
    }

    #[test]
    fn aliasing_only_adds_power(m in model_strategy(), fs_exp in 4i32..10, frac in 1e-6f64..0.5) {
        let fs = 10f64.powi(fs_exp);
        let f = frac * fs;
        let d = psd_discrete(&m, f, fs).unwrap();
        let c = psd_continuous(&m, f);
        prop_assert!(d >= c * (1.0 - 1e-9), "f {f} fs {fs}: {d} < {c}");
    }

    #[test]
    fn masking_leaves_evolution_alone(m in model_strategy(), seed in 0u64..1000, steps in prop::collection::vec(-9.0f64..-1.0, 1..20)) {
        let mut parent = TrajectoryCursor::new(&m, 7, seed);
        let mut masked = TrajectoryCursor::new(&m, 7, seed);
        masked.set_mask(ComponentMask::axis(&m, Axis::Magnetic)).unwrap();
        for (i, e) in steps.iter().enumerate() {
            let dt = 10f64.powf(*e);
            if i % 2 == 0 {
                parent.advance(dt).unwrap();
                masked.advance(dt).unwrap();
            } else {
                parent.fast_forward(dt).unwrap();
                masked.fast_forward(dt).unwrap();
            }
            prop_assert_eq!(parent.values(), masked.values());
            prop_assert_eq!(masked.current().delta_v, 0.0);
            prop_assert_eq!(masked.current().delta_bz, parent.current().delta_bz);
        }
    }

    #[test]
    fn partitions_sum_to_parent(m in model_strategy(), seed in 0u64..1000, window in 1e-9f64..1.0) {
        let mut cursor = TrajectoryCursor::new(&m, 3, seed);
        cursor.fast_forward(window).unwrap();
        let whole = ComponentMask::all(&m).sample(cursor.values());
        // parts sum in a different order from the parent
        let tol = 1e-12 * cursor.values().iter().map(|x| x.abs()).sum::<f64>();
        for p in [TrajectoryPartition::axis(&m), TrajectoryPartition::frequency(&m, &FrequencyBand::millisecond_split()).unwrap()] {
            p.validate(&m).unwrap();
            let (mut v, mut b) = (0.0, 0.0);
            for (_, mask) in p.views(&m).unwrap().into_iter().skip(1) {
                let s = mask.sample(cursor.values());
                v += s.delta_v;
                b += s.delta_bz;
            }
            prop_assert!((v - whole.delta_v).abs() <= tol);
            prop_assert!((b - whole.delta_bz).abs() <= tol);
        }
    }

    #[test]
    fn composed_cliffords_match_matrix_products(seq in prop::collection::vec(0usize..24, 1..12)) {
        let g = group();
        let u = seq.iter().fold(Unitary2::IDENTITY, |acc, &i| g.element(i).unitary * acc);
        let c = g.compose(&seq);
        prop_assert!(phase_equivalent(&u, &g.element(c).unitary));
        let back = g.product(g.inverse(c), c);
        prop_assert!(phase_equivalent(&g.element(back).unitary, &Unitary2::IDENTITY));
    }

    #[test]
    fn exact_decay_is_recovered(r0 in 1e-5f64..0.1) {
        let depths = [2usize, 4, 8, 16, 32, 64, 128, 256, 512];
        let p: Vec<f64> = depths.iter().map(|&l| 0.5 + 0.5 * (1.0 - 2.0 * r0).powi(l as i32)).collect();
        let f = fit_rb(&depths, &p).unwrap();
        prop_assert!((f.r - r0).abs() <= 1e-10, "{r0}: {f:?}");
        prop_assert!(f.ci_low <= f.r && f.r <= f.ci_high);
    }
}
