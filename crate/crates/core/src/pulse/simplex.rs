/// Settings for [`nelder_mead`].
#[derive(Clone, Debug)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Stop once the best value is at or below this.
    pub target: f64,
    /// Stop once the spread of values over the simplex falls below this.
    pub f_tol: f64,
    /// Stop once every vertex lies within this (∞-norm) of the best one.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 5000,
            target: f64::NEG_INFINITY,
            f_tol: 0.0,
            x_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Minimises `f` by the Nelder-Mead simplex method with dimension-adapted
/// coefficients (Gao & Han 2012). The initial simplex is `x0` plus one vertex
/// per axis displaced by `step[i]`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(step.len(), n, "one step per coordinate");
    let nf = n.max(1) as f64;
    let (alpha, gamma, rho, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let shrink = if n == 1 { 0.5 } else { shrink };

    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, &mut evals)).collect();

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    loop {
        // order vertices, best first; stable on ties
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let best = vals[0];
        let worst = vals[n];
        let spread = worst - best;
        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best <= opts.target
            || evals >= opts.max_evals
            || spread <= opts.f_tol && size <= opts.x_tol
        {
            break;
        }
        if size == 0.0 {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |coef: f64, out: &mut Vec<f64>| {
            for i in 0..n {
                out[i] = centroid[i] + coef * (pts[n][i] - centroid[i]);
            }
        };

        along(-alpha, &mut trial);
        let fr = eval(&trial, &mut evals);
        if fr < best {
            along(-alpha * gamma, &mut trial2);
            let fe = eval(&trial2, &mut evals);
            if fe < fr {
                pts[n].clone_from(&trial2);
                vals[n] = fe;
            } else {
                pts[n].clone_from(&trial);
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n].clone_from(&trial);
            vals[n] = fr;
            continue;
        }
        // contraction, outside or inside
        let (coef, bound) = if fr < worst {
            (-alpha * rho, fr)
        } else {
            (rho, worst)
        };
        along(coef, &mut trial2);
        let fc = eval(&trial2, &mut evals);
        if fc <= bound {
            pts[n].clone_from(&trial2);
            vals[n] = fc;
            continue;
        }
        for j in 1..=n {
            for i in 0..n {
                pts[j][i] = pts[0][i] + shrink * (pts[j][i] - pts[0][i]);
            }
            vals[j] = eval(&pts[j], &mut evals);
        }
    }
    SimplexResult {
        x: pts.swap_remove(0),
        value: vals[0],
        evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SimplexOptions {
            max_evals: 10_000,
            f_tol: 1e-24,
            x_tol: 1e-12,
            ..Default::default()
        };
        let r = nelder_mead(rosen, &[-1.2, 1.0], &[0.1, 0.1], &opts);
        assert!(r.value < 1e-16, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn minimises_shifted_quadratic_in_six_dims() {
        let c = [1.0, -2.0, 0.5, 3.0, -1.5, 0.25];
        let f = |x: &[f64]| {
            x.iter()
                .zip(&c)
                .enumerate()
                .map(|(i, (a, b))| (i + 1) as f64 * (a - b).powi(2))
                .sum()
        };
        let opts = SimplexOptions {
            max_evals: 20_000,
            f_tol: 1e-30,
            x_tol: 1e-14,
            ..Default::default()
        };
        let r = nelder_mead(f, &[0.0; 6], &[1.0; 6], &opts);
        assert!(r.value < 1e-20, "{r:?}");
    }

    #[test]
    fn stops_at_target_and_budget() {
        let f = |x: &[f64]| x[0] * x[0];
        let r = nelder_mead(
            f,
            &[10.0],
            &[1.0],
            &SimplexOptions {
                target: 1.0,
                ..Default::default()
            },
        );
        assert!(r.value <= 1.0);
        let r = nelder_mead(
            f,
            &[10.0],
            &[1.0],
            &SimplexOptions {
                max_evals: 5,
                ..Default::default()
            },
        );
        assert!(r.evals <= 7);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] * x[0]).sin().powi(2);
        let a = nelder_mead(f, &[1.0, 2.0], &[0.5, 0.5], &SimplexOptions::default());
        let b = nelder_mead(f, &[1.0, 2.0], &[0.5, 0.5], &SimplexOptions::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.evals, b.evals);
    }
}
