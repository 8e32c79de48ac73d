use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares fit of `P(L) = ½ + ½ (1 - 2r)^L`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbFit {
    pub r: f64,
    /// Standard error of `r`: sandwich covariance of the unweighted fit under
    /// a quasi-binomial variance `s² P(1 - P)`, with `s²` from the residuals.
    pub sigma: f64,
    /// `r ± 2σ`, clipped to `[0, ½]`.
    pub ci_low: f64,
    pub ci_high: f64,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The estimate sits on `r = ½` (fully decayed data).
    pub at_boundary: bool,
}

const MAX_ITER: usize = 200;

fn model(l: f64, r: f64) -> f64 {
    0.5 + 0.5 * (1.0 - 2.0 * r).powf(l)
}

/// `dP/dr = -L (1 - 2r)^{L-1}`.
fn slope(l: f64, r: f64) -> f64 {
    -l * (1.0 - 2.0 * r).powf(l - 1.0)
}

fn sse(depths: &[f64], p: &[f64], r: f64) -> f64 {
    depths
        .iter()
        .zip(p)
        .map(|(&l, &y)| (y - model(l, r)).powi(2))
        .sum()
}

/// Fits the RB decay on `r ∈ [0, ½]`, unweighted.
///
/// Starts from the log-linear slope of `ln(2P - 1)` against `L` through the
/// origin, then runs damped Gauss-Newton.
pub fn fit_rb(depths: &[usize], mean_survival: &[f64]) -> Result<RbFit> {
    if depths.len() != mean_survival.len() {
        return Err(Error::Fit("depth and survival counts differ".into()));
    }
    if depths.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 depths, got {}",
            depths.len()
        )));
    }
    if mean_survival.iter().any(|p| !p.is_finite()) {
        return Err(Error::Fit("non-finite survival".into()));
    }
    let l: Vec<f64> = depths.iter().map(|&d| d as f64).collect();
    let y = mean_survival;

    // log-linear start from points still above ½
    let (mut num, mut den) = (0.0, 0.0);
    for (&li, &yi) in l.iter().zip(y) {
        let e = 2.0 * yi - 1.0;
        if e > 0.0 {
            num += li * e.min(1.0).ln();
            den += li * li;
        }
    }
    let mut r = if den > 0.0 {
        (0.5 * (1.0 - (num / den).exp())).clamp(0.0, 0.5)
    } else {
        0.5
    };
    let mut s = sse(&l, y, r);

    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        let (mut jtj, mut jte) = (0.0, 0.0);
        for (&li, &yi) in l.iter().zip(y) {
            let j = slope(li, r);
            jtj += j * j;
            jte += j * (yi - model(li, r));
        }
        if jtj == 0.0 {
            converged = true;
            break;
        }
        let step = jte / jtj;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda > 1e-12 {
            let cand = (r + lambda * step).clamp(0.0, 0.5);
            let sc = sse(&l, y, cand);
            if sc <= s {
                let moved = (cand - r).abs();
                r = cand;
                s = sc;
                accepted = true;
                if moved <= 1e-15 + 1e-13 * r {
                    converged = true;
                }
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            // no descent along the Gauss-Newton direction: stationary
            converged = true;
        }
        if converged {
            break;
        }
    }

    let jtj: f64 = l.iter().map(|&li| slope(li, r).powi(2)).sum();
    let n = l.len() as f64;
    let var_fn: Vec<f64> = l
        .iter()
        .map(|&li| {
            let p = model(li, r);
            (p * (1.0 - p)).max(1e-15)
        })
        .collect();
    let scale: f64 = l
        .iter()
        .zip(y)
        .zip(&var_fn)
        .map(|((&li, &yi), v)| (yi - model(li, r)).powi(2) / v)
        .sum::<f64>()
        / (n - 1.0);
    let meat: f64 = l
        .iter()
        .zip(&var_fn)
        .map(|(&li, v)| slope(li, r).powi(2) * scale * v)
        .sum();
    let sigma = if jtj > 0.0 {
        meat.sqrt() / jtj
    } else {
        f64::INFINITY
    };
    let at_boundary = r >= 0.5 - 1e-12;
    Ok(RbFit {
        r,
        sigma,
        ci_low: (r - 2.0 * sigma).max(0.0),
        ci_high: (r + 2.0 * sigma).min(0.5),
        sse: s,
        iterations,
        converged,
        at_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEPTHS: [usize; 9] = [2, 4, 8, 16, 32, 64, 128, 256, 512];

    #[test]
    fn perfect_survival_gives_zero() {
        let f = fit_rb(&DEPTHS, &[1.0; 9]).unwrap();
        assert_eq!(f.r, 0.0);
        assert!(f.converged && !f.at_boundary);
    }

    #[test]
    fn exact_exponential_recovered() {
        for r0 in [1e-4, 1e-3, 1e-2, 0.05] {
            let p: Vec<f64> = DEPTHS.iter().map(|&l| model(l as f64, r0)).collect();
            let f = fit_rb(&DEPTHS, &p).unwrap();
            assert!((f.r - r0).abs() < 1e-10, "{r0}: {f:?}");
            assert!(f.converged);
        }
    }

    #[test]
    fn fully_decayed_flags_boundary() {
        let f = fit_rb(&DEPTHS, &[0.5; 9]).unwrap();
        assert_eq!(f.r, 0.5);
        assert!(f.at_boundary);
    }

    #[test]
    fn noisy_data_converges_inside_range() {
        let p: Vec<f64> = DEPTHS
            .iter()
            .enumerate()
            .map(|(i, &l)| model(l as f64, 2e-3) + if i % 2 == 0 { 3e-3 } else { -3e-3 })
            .collect();
        let f = fit_rb(&DEPTHS, &p).unwrap();
        assert!(f.converged);
        assert!(f.ci_low <= f.r && f.r <= f.ci_high);
        assert!((f.r - 2e-3).abs() < 5e-4);
    }

    #[test]
    fn too_few_depths_rejected() {
        assert!(fit_rb(&[2, 4], &[1.0, 1.0]).is_err());
    }
}
