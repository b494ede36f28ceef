//! Composite adaptive Gauss-Legendre quadrature, with the square-root
//! substitution used for integrands whose mass concentrates at the lower
//! endpoint (the escape integrals as theta -> 0).

/// Nodes and weights of the n-point rule on [-1, 1], by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x), P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// One adaptive pass: integrate `f` on [a, b] to absolute tolerance by
/// bisecting panels where the embedded GL(8)/GL(16) estimates disagree.
/// Returns (integral, achieved error estimate).
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (n16, w16) = gauss_legendre(16);
    let (n8, w8) = gauss_legendre(8);
    let panel = |f: &mut F, lo: f64, hi: f64| -> (f64, f64) {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let fine: f64 = n16.iter().zip(&w16).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h;
        let coarse: f64 = n8.iter().zip(&w8).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h;
        (fine, (fine - coarse).abs())
    };
    // priority-less work list; refine worst panels until the global
    // estimate meets tol or the budget runs out
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = panel(&mut f, a, b);
    panels.push((a, b, v, e));
    for _ in 0..2000 {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        panels.push({
            let (v, e) = panel(&mut f, lo, mid);
            (lo, mid, v, e)
        });
        panels.push({
            let (v, e) = panel(&mut f, mid, hi);
            (mid, hi, v, e)
        });
    }
    (
        panels.iter().map(|p| p.2).sum(),
        panels.iter().map(|p| p.3).sum(),
    )
}

/// Integrate f(theta) over (0, pi) with the u = sqrt(theta) substitution
/// on (0, split] and plain panels on [split, pi). Endpoints excluded by
/// construction (Gauss nodes are interior).
pub fn integrate_theta<F: FnMut(f64) -> f64>(
    mut f: F,
    split: f64,
    tol: f64,
) -> (f64, f64) {
    let (low, elow) = adaptive(|u| 2.0 * u * f(u * u), 0.0, split.sqrt(), 0.5 * tol);
    let (high, ehigh) = adaptive(&mut f, split, std::f64::consts::PI, 0.5 * tol);
    (low + high, elow + ehigh)
}

/// Vector-valued variant of [`adaptive`]: refinement is driven by the
/// summed componentwise error, so all components converge together.
pub fn adaptive_vec<F: FnMut(f64) -> Vec<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_refine: usize,
) -> (Vec<f64>, f64) {
    let (n16, w16) = gauss_legendre(16);
    let (n8, w8) = gauss_legendre(8);
    struct Panel {
        lo: f64,
        hi: f64,
        fine: Vec<f64>,
        err: f64,
    }
    let eval = |f: &mut F, lo: f64, hi: f64| -> Panel {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let mut fine: Vec<f64> = Vec::new();
        let mut coarse: Vec<f64> = Vec::new();
        for (x, w) in n16.iter().zip(&w16) {
            let v = f(c + h * x);
            if fine.is_empty() {
                fine = vec![0.0; v.len()];
                coarse = vec![0.0; v.len()];
            }
            for (acc, vi) in fine.iter_mut().zip(&v) {
                *acc += w * h * vi;
            }
        }
        for (x, w) in n8.iter().zip(&w8) {
            let v = f(c + h * x);
            for (acc, vi) in coarse.iter_mut().zip(&v) {
                *acc += w * h * vi;
            }
        }
        let err = fine
            .iter()
            .zip(&coarse)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
        Panel {
            lo,
            hi,
            fine,
            err,
        }
    };
    let mut panels = vec![eval(&mut f, a, b)];
    for _ in 0..max_refine {
        let total: f64 = panels.iter().map(|p| p.err).sum();
        if total <= tol {
            break;
        }
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .unwrap();
        let p = panels.swap_remove(idx);
        let mid = 0.5 * (p.lo + p.hi);
        panels.push(eval(&mut f, p.lo, mid));
        panels.push(eval(&mut f, mid, p.hi));
    }
    let dim = panels[0].fine.len();
    let mut out = vec![0.0; dim];
    for p in &panels {
        for (acc, v) in out.iter_mut().zip(&p.fine) {
            *acc += v;
        }
    }
    (out, panels.iter().map(|p| p.err).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is exact for GL(8)
        let val: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert_abs_diff_eq!(val, 2.0 / 15.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_peaked_integrands() {
        let (v, e) = adaptive(|x| 1.0 / ((x - 0.3).powi(2) + 1e-4), 0.0, 1.0, 1e-10);
        let exact = 100.0 * ((0.7f64 / 0.01).atan() + (0.3f64 / 0.01).atan());
        assert!((v - exact).abs() < 1e-8, "{v} vs {exact}, est {e}");
    }

    #[test]
    fn sqrt_substitution_integrates_endpoint_cusp() {
        // integral of 1/sqrt(theta) over (0, pi) = 2 sqrt(pi)
        let (v, _) = integrate_theta(|th| th.powf(-0.5), 0.1, 1e-10);
        assert_abs_diff_eq!(v, 2.0 * std::f64::consts::PI.sqrt(), epsilon = 1e-9);
    }
}
