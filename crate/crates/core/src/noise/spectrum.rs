use std::f64::consts::PI;

use super::NoiseModel;
use crate::error::{Error, Result};

/// One-sided PSD of the summed model, `Σ p_i f_i / (π (f_i² + f²))`.
pub fn psd_continuous(model: &NoiseModel, f: f64) -> f64 {
    model
        .components()
        .iter()
        .map(|c| c.power * c.frequency / (PI * (c.frequency * c.frequency + f * f)))
        .sum()
}

/// PSD of the model sampled at `fs`, i.e. the image sum `Σ_n S(f + n fs)` in
/// closed form.
///
/// Per component this is `p sinh(2πa) / (2 fs (sinh²(πa) + sin²(πx)))` with
/// `a = f_i/fs`, `x = f/fs`, which is the cot/coth expression rewritten so that
/// neither `a → 0` nor `x → 0` cancels catastrophically.
pub fn psd_discrete(model: &NoiseModel, f: f64, fs: f64) -> Result<f64> {
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sample rate must be > 0, got {fs}"
        )));
    }
    if !(f >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "frequency must be >= 0, got {f}"
        )));
    }
    if f > 0.5 * fs {
        return Err(Error::AboveNyquist {
            f,
            nyquist: 0.5 * fs,
        });
    }
    let s = (PI * f / fs).sin();
    let s2 = s * s;
    Ok(model
        .components()
        .iter()
        .map(|c| {
            let u = PI * c.frequency / fs;
            if u > 20.0 {
                // sinh(2u) / (2 sinh²u) = coth u, and sin²/sinh² is negligible.
                c.power / fs / u.tanh() / (1.0 + s2 / u.sinh().powi(2))
            } else {
                let sh = u.sinh();
                c.power * (2.0 * u).sinh() / (2.0 * fs * (sh * sh + s2))
            }
        })
        .sum())
}

/// Truncated image sum `Σ_{n=-N..N} S(f + n fs)`, the direct form of the
/// aliased spectrum.
pub fn psd_folded_sum(model: &NoiseModel, f: f64, fs: f64, images: u32) -> f64 {
    let n = images as i64;
    let mut total = 0.0;
    // Smallest terms first.
    for k in (1..=n).rev() {
        let kf = k as f64;
        total += psd_continuous(model, f + kf * fs) + psd_continuous(model, f - kf * fs);
    }
    total + psd_continuous(model, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{Axis, OuComponent};

    fn single(p: f64, fi: f64) -> NoiseModel {
        NoiseModel::new(
            "s",
            vec![OuComponent::new(Axis::Charge, p, fi, "c").unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn continuous_closed_values() {
        let m = single(3.0, 2.0);
        assert!((psd_continuous(&m, 0.0) - 3.0 / (PI * 2.0)).abs() < 1e-15);
        assert!((psd_continuous(&m, 2.0) - 3.0 / (2.0 * PI * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn discrete_rejects_above_nyquist() {
        let m = single(1.0, 1.0);
        assert!(matches!(
            psd_discrete(&m, 0.6, 1.0),
            Err(Error::AboveNyquist { .. })
        ));
        assert!(psd_discrete(&m, 0.5, 1.0).is_ok());
    }

    #[test]
    fn discrete_converges_to_continuous() {
        let m = single(1.0, 1.0);
        for f in [0.0, 0.3, 1.0, 10.0] {
            let c = psd_continuous(&m, f);
            let d = psd_discrete(&m, f, 1e9).unwrap();
            assert!(((d - c) / c).abs() < 1e-6, "f={f}: {d} vs {c}");
        }
    }

    #[test]
    fn discrete_matches_folded_sum_including_large_ratio_branch() {
        // f_i far above fs exercises the coth branch.
        let m = NoiseModel::empty("m")
            .with_ladder(Axis::Charge, 1e-3, 1e7, 1.0)
            .unwrap();
        for &fs in &[1e5, 1e6] {
            for &x in &[0.0, 0.1, 0.37, 0.5] {
                let f = x * fs;
                let d = psd_discrete(&m, f, fs).unwrap();
                let o = psd_folded_sum(&m, f, fs, 10_000);
                assert!(((d - o) / d).abs() < 1e-2, "fs={fs} f={f}: {d} vs {o}");
            }
        }
    }
}
