use num_complex::Complex64;
use rand::Rng;

use crate::pulse::CliffordGroup;
use crate::qubit::{BasisState, Unitary2};

/// Shot-level RB under a depolarizing channel, for checking the fit.
///
/// For each depth, `circuits` random sequences are drawn (with the inverting
/// last element) and each is run `shots_per_circuit` times. After every
/// Clifford a uniformly random Pauli (identity included) is applied with
/// probability `2 r0`, which is the channel whose survival decays as
/// `½ + ½ (1 - 2 r0)^L`. Returns the mean shot outcome per depth.
pub fn simulate_depolarizing<R: Rng>(
    group: &CliffordGroup,
    depths: &[usize],
    circuits: usize,
    shots_per_circuit: usize,
    r0: f64,
    rng: &mut R,
) -> Vec<f64> {
    let paulis = [
        Unitary2::IDENTITY,
        Unitary2::rx(std::f64::consts::PI),
        Unitary2::ry(std::f64::consts::PI),
        Unitary2::rz(std::f64::consts::PI),
    ];
    let p_err = 2.0 * r0;
    depths
        .iter()
        .map(|&depth| {
            let mut returned = 0usize;
            for _ in 0..circuits {
                let mut seq: Vec<usize> = (0..depth - 1)
                    .map(|_| rng.random_range(0..group.len()))
                    .collect();
                seq.push(group.inverse(group.compose(&seq)));
                for _ in 0..shots_per_circuit {
                    let mut psi = BasisState::Zero.amplitudes();
                    for &k in &seq {
                        psi = apply(&group.element(k).unitary, psi);
                        if rng.random::<f64>() < p_err {
                            psi = apply(&paulis[rng.random_range(0..4)], psi);
                        }
                    }
                    let p0 = psi[0].norm_sqr();
                    if rng.random::<f64>() < p0 {
                        returned += 1;
                    }
                }
            }
            returned as f64 / (circuits * shots_per_circuit) as f64
        })
        .collect()
}

fn apply(u: &Unitary2, psi: [Complex64; 2]) -> [Complex64; 2] {
    let m = u.matrix();
    [
        m[0][0] * psi[0] + m[0][1] * psi[1],
        m[1][0] * psi[0] + m[1][1] * psi[1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn noiseless_channel_always_returns() {
        let g = CliffordGroup::build().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = simulate_depolarizing(&g, &[2, 16, 64], 3, 5, 0.0, &mut rng);
        assert_eq!(p, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn strong_channel_decays_to_half() {
        let g = CliffordGroup::build().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = simulate_depolarizing(&g, &[256], 10, 200, 0.05, &mut rng);
        assert!((p[0] - 0.5).abs() < 0.05, "{p:?}");
    }
}
