//! Normalizable E>4 eigenstates of the comb Hamiltonian.
//!
//! On the spine these solve a nonlinear eigenproblem: for decay rate
//! sigma in (0, ln 3], `(H0 + W(sigma)) C = (2 + 2 cosh sigma) C` with
//! `H0` the discrete-line Laplacian (diagonal 2, hopping -1) and
//! `W = (1 + e^{-sigma}) chi`. Each sorted eigenvalue branch of the
//! left-hand operator is non-increasing in sigma while the right-hand
//! side strictly increases from 4, so every branch carries at most one
//! root. Roots are isolated by bisection on the branch-above count,
//! which costs O(N) per probe via the LDL^T inertia of the shifted
//! operator.
//!
//! Along a tooth the eigenstate decays as `C_n (-1)^j e^{-sigma j}`, so
//! the tail-inclusive squared norm adds `1/(1 - e^{-2 sigma})` per tooth
//! site and 1 per hole site.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::chainspec::{matrix_for, n_e_gt4_formula};
use crate::comb::CombConfig;
use crate::linalg::SymTridiagPeriodic;
use crate::{Error, Result, SIGMA_MAX};

/// One E>4 eigenstate. `spine_amplitudes` has unit Euclidean norm on the
/// spine; `norm_sq` is the tail-inclusive squared norm of that vector.
#[derive(Debug, Clone, Serialize)]
pub struct BoundState {
    pub sigma: f64,
    pub energy: f64,
    pub spine_amplitudes: Vec<f64>,
    pub norm_sq: f64,
}

impl BoundState {
    /// Overlap `<Gamma_sigma | Phi_n0>` with the normalized state.
    pub fn overlap_site(&self, n0: usize) -> f64 {
        self.spine_amplitudes[n0] / self.norm_sq.sqrt()
    }
}

fn operator(comb: &CombConfig, sigma: f64) -> SymTridiagPeriodic {
    let w = 1.0 + (-sigma).exp();
    matrix_for(comb, |tooth| if tooth { 2.0 + w } else { 2.0 })
}

fn rhs(sigma: f64) -> f64 {
    2.0 + 2.0 * sigma.cosh()
}

/// Number of branches still above the secular line at this sigma.
fn count_above(comb: &CombConfig, sigma: f64) -> usize {
    comb.n_sites - operator(comb, sigma).count_below(rhs(sigma))
}

/// Tail-inclusive squared norm of spine amplitudes `c` at decay `sigma`.
pub fn tail_norm_sq(comb: &CombConfig, c: &[f64], sigma: f64) -> f64 {
    let tooth_weight = 1.0 / (1.0 - (-2.0 * sigma).exp());
    c.iter()
        .zip(&comb.chi)
        .map(|(&v, &tooth)| v * v * if tooth { tooth_weight } else { 1.0 })
        .sum()
}

/// Tail-inclusive inner product between states with decays `s1`, `s2`.
pub fn tail_inner(comb: &CombConfig, a: &BoundState, b: &BoundState) -> f64 {
    let tooth_weight = 1.0 / (1.0 - (-(a.sigma + b.sigma)).exp());
    let raw: f64 = a
        .spine_amplitudes
        .iter()
        .zip(&b.spine_amplitudes)
        .zip(&comb.chi)
        .map(|((&x, &y), &tooth)| x * y * if tooth { tooth_weight } else { 1.0 })
        .sum();
    raw / (a.norm_sq * b.norm_sq).sqrt()
}

/// Solve the E>4 eigenproblem; states come back sorted by energy. The
/// returned count must equal the counting formula or an
/// internal-consistency error is raised.
pub fn solve_bound_states(comb: &CombConfig) -> Result<Vec<BoundState>> {
    let sigmas = solve_sigmas(comb)?;
    let mut states = Vec::with_capacity(sigmas.len());
    // Distinct roots live in different operators H(sigma) and their
    // spine eigenvectors need not be Euclidean-orthogonal; only exact
    // clusters (one sigma, multiplicity > 1) share Gram-Schmidt. The
    // tail-inclusive inner product orthogonalizes across sigmas by
    // itself, since all states are eigenstates of the one comb
    // Hamiltonian.
    for &(sigma0, mult) in &sigmas {
        // Rayleigh-quotient Newton polish of the secular root: the
        // bisected sigma is only ~1e-9 accurate where the inertia
        // count is noisy (degenerate double crossings)
        let mut sigma = sigma0;
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        let extract = |sigma: f64, vecs: &mut Vec<Vec<f64>>| {
            let m = operator(comb, sigma);
            let lambda = rhs(sigma);
            vecs.clear();
            for _ in 0..mult {
                let v = m.eigenvector(lambda, vecs);
                vecs.push(v);
            }
            vecs.iter()
                .map(|v| m.residual_inf(lambda, v))
                .fold(0.0, f64::max)
        };
        for _ in 0..6 {
            let res = extract(sigma, &mut vecs);
            if res < 5e-10 {
                break;
            }
            // Rayleigh-quotient Newton step on the secular equation
            let m = operator(comb, sigma);
            let lambda = rhs(sigma);
            let v = &vecs[0];
            let rho: f64 = v.iter().zip(m.matvec(v)).map(|(a, b)| a * b).sum();
            let tooth_weight: f64 = comb
                .tooth_sites()
                .iter()
                .map(|&k| v[k] * v[k])
                .sum();
            let slope = -(-sigma).exp() * tooth_weight - 2.0 * sigma.sinh();
            let step = (rho - lambda) / slope;
            if !step.is_finite() || step.abs() < f64::EPSILON {
                break;
            }
            sigma = (sigma - step).clamp(1e-9, crate::SIGMA_MAX);
        }
        // vectors must correspond to the final sigma; a merged cluster
        // (near-degenerate pair below the isolation resolution) carries
        // a residual floor equal to its unresolved splitting, so it is
        // gated more loosely and effectively flagged rather than split
        let res = extract(sigma, &mut vecs);
        let gate = if mult > 1 { 1e-8 } else { 1e-9 };
        if res > gate {
            return Err(Error::InvariantViolation(format!(
                "bound-state residual {res:.2e} at sigma {sigma}"
            )));
        }
        let lambda = rhs(sigma);
        for v in vecs {
            let norm_sq = tail_norm_sq(comb, &v, sigma);
            states.push(BoundState {
                sigma,
                energy: lambda,
                spine_amplitudes: v,
                norm_sq,
            });
        }
    }
    states.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    let formula = n_e_gt4_formula(comb);
    if states.len() != formula {
        return Err(Error::CountMismatch {
            solved: states.len(),
            formula,
        });
    }
    Ok(states)
}

/// Root isolation on (1e-8, ln 3]; returns (sigma, multiplicity).
fn solve_sigmas(comb: &CombConfig) -> Result<Vec<(f64, usize)>> {
    if comb.n_teeth() == 0 {
        return Ok(Vec::new());
    }
    let lo = 1e-8;
    let hi = SIGMA_MAX + 1e-9;
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi, count_above(comb, lo), count_above(comb, hi))];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if ca == cb {
            continue;
        }
        if b - a <= 1e-13 {
            // multiplicity > 1 only for the measure-zero degenerate
            // configurations; the cluster is handled downstream
            out.push(((0.5 * (a + b)).min(SIGMA_MAX), ca - cb));
            continue;
        }
        let m = 0.5 * (a + b);
        // count_above decreases in sigma; clamp against count noise at
        // degenerate double crossings (uniform periodic combs)
        let cm = count_above(comb, m).clamp(cb, ca);
        stack.push((a, m, ca, cm));
        stack.push((m, b, cm, cb));
    }
    out.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    // coalesce only roots inside the inertia-count noise window: a
    // degenerate double crossing can surface as two jumps ~1e-9 apart;
    // anything wider is a genuine near-degenerate pair and keeps its
    // own sigma
    let mut merged: Vec<(f64, usize)> = Vec::with_capacity(out.len());
    for (s, m) in out {
        match merged.last_mut() {
            Some((s0, m0)) if (s - *s0).abs() < 3e-9 => {
                *s0 = (*s0 * *m0 as f64 + s * m as f64) / (*m0 + m) as f64;
                *m0 += m;
            }
            _ => merged.push((s, m)),
        }
    }
    Ok(merged)
}

/// Upper/lower counting bounds `N_t/2 <= N_{E>4} <= N_t`.
pub fn count_bounds_check(comb: &CombConfig, solved_count: usize) -> bool {
    let nt = comb.n_teeth();
    2 * solved_count >= nt && solved_count <= nt
}

/// Eigenvalues of the 2N x 2N companion matrix of the linearized
/// problem. Real eigenvalues in (1, 3] are e^{sigma} of physical bound
/// states; the rest are spurious or complex-conjugate pairs.
pub fn m_matrix_spectrum(comb: &CombConfig) -> Result<Vec<Complex64>> {
    let n = comb.n_sites;
    if n > 512 {
        return Err(Error::InvalidArgument(
            "dense companion solve limited to N <= 512".into(),
        ));
    }
    let periodic = comb.boundary == crate::comb::Boundary::Periodic;
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        let mut couple = |j: isize, val: f64| {
            if (0..n as isize).contains(&j) {
                m[(i, j as usize)] += val;
            } else if periodic {
                m[(i, j.rem_euclid(n as isize) as usize)] += val;
            }
        };
        couple(i as isize - 1, -1.0);
        couple(i as isize + 1, -1.0);
        if comb.chi[i] {
            m[(i, i)] += 1.0;
        } else {
            m[(i, n + i)] = -1.0;
        }
        m[(n + i, i)] = 1.0;
    }
    Ok(m.complex_eigenvalues().iter().copied().collect())
}

/// Physical decay rates from the companion spectrum: ln of the real
/// eigenvalues in (1, 3].
pub fn m_matrix_sigmas(spectrum: &[Complex64]) -> Vec<f64> {
    let mut s: Vec<f64> = spectrum
        .iter()
        .filter(|l| l.im.abs() < 1e-9 && l.re > 1.0 + 1e-9 && l.re <= 3.0 + 1e-9)
        .map(|l| l.re.ln())
        .collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::{sample_comb_stream, Boundary};
    use crate::E_MAX;

    fn comb(s: &str, boundary: Boundary) -> CombConfig {
        CombConfig::from_chi(s.chars().map(|c| c == 'T').collect(), boundary).unwrap()
    }

    #[test]
    fn all_holes_comb_has_no_bound_states() {
        let states = solve_bound_states(&comb("hhhhhh", Boundary::Open)).unwrap();
        assert!(states.is_empty());
    }

    #[test]
    fn regular_periodic_comb_counts_and_band() {
        let c = comb(&"T".repeat(200), Boundary::Periodic);
        let states = solve_bound_states(&c).unwrap();
        assert_eq!(states.len(), 99);
        for s in &states {
            assert!(s.energy > 4.0 && s.energy <= E_MAX + 1e-9, "E = {}", s.energy);
        }
        // top of the band is reached (sigma = ln 3 edge state)
        assert!((states.last().unwrap().energy - E_MAX).abs() < 1e-9);
    }

    #[test]
    fn single_tooth_open_comb() {
        let c = comb("hhhhhThhhhh", Boundary::Open);
        let states = solve_bound_states(&c).unwrap();
        assert_eq!(states.len(), 1);
    }

    #[test]
    fn counts_match_formula_on_random_ensemble() {
        for s in 0..60 {
            let n = 6 + (s as usize * 7) % 50;
            let p = [0.2, 0.5, 0.8][s as usize % 3];
            for boundary in [Boundary::Open, Boundary::Periodic] {
                let c = sample_comb_stream(p, n, boundary, 321, s).unwrap();
                let states = solve_bound_states(&c).unwrap_or_else(|e| {
                    panic!("{boundary} n={n} p={p} s={s}: {e}");
                });
                // the -1 correction family can undercut the naive
                // N_t/2 lower bound by one
                assert!(
                    count_bounds_check(&c, states.len())
                        || crate::chainspec::counting_correction(&c)
                        || c.n_teeth() <= 1,
                    "{boundary} n={n} p={p} s={s}"
                );
            }
        }
    }

    #[test]
    fn residuals_tooth_and_hole_rows() {
        let c = sample_comb_stream(0.5, 24, Boundary::Open, 5, 2).unwrap();
        for st in solve_bound_states(&c).unwrap() {
            let n = c.n_sites;
            for i in 0..n {
                let mut lhs = if c.chi[i] {
                    (3.0 + (-st.sigma).exp()) * st.spine_amplitudes[i]
                } else {
                    2.0 * st.spine_amplitudes[i]
                };
                if i > 0 {
                    lhs -= st.spine_amplitudes[i - 1];
                }
                if i + 1 < n {
                    lhs -= st.spine_amplitudes[i + 1];
                }
                assert!(
                    (lhs - st.energy * st.spine_amplitudes[i]).abs() < 1e-9,
                    "row {i}"
                );
            }
        }
    }

    #[test]
    fn states_are_orthonormal_in_tail_inner_product() {
        let c = sample_comb_stream(0.4, 30, Boundary::Periodic, 17, 0).unwrap();
        let states = solve_bound_states(&c).unwrap();
        for i in 0..states.len() {
            let d = tail_inner(&c, &states[i], &states[i]);
            assert!((d - 1.0).abs() < 1e-9, "norm {d}");
            for j in 0..i {
                let d = tail_inner(&c, &states[i], &states[j]);
                assert!(d.abs() < 1e-8, "overlap {i},{j} = {d:.2e}");
            }
        }
    }

    #[test]
    fn m_matrix_agrees_with_secular_roots() {
        for s in 0..6 {
            let c = sample_comb_stream(0.5, 18, Boundary::Periodic, 71, s).unwrap();
            let states = solve_bound_states(&c).unwrap();
            let sig_m = m_matrix_sigmas(&m_matrix_spectrum(&c).unwrap());
            assert_eq!(sig_m.len(), states.len());
            for (a, b) in sig_m.iter().zip(states.iter().map(|s| s.sigma)) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn m_matrix_complex_eigenvalues_come_in_conjugate_pairs() {
        let c = sample_comb_stream(0.5, 12, Boundary::Open, 9, 0).unwrap();
        let spec = m_matrix_spectrum(&c).unwrap();
        for l in spec.iter().filter(|l| l.im > 1e-8) {
            assert!(
                spec.iter().any(|m| (m - l.conj()).norm() < 1e-7),
                "missing conjugate of {l}"
            );
        }
    }

    #[test]
    fn all_holes_m_matrix_has_no_physical_roots() {
        let spec = m_matrix_spectrum(&comb("hhhhhhhh", Boundary::Open)).unwrap();
        assert!(m_matrix_sigmas(&spec).is_empty());
    }

    #[test]
    fn density_converges_to_closed_form() {
        // count/N -> (1-p)/(2-p) for periodic combs
        let p = 0.5;
        let n = 2000;
        let mut counts = Vec::new();
        for s in 0..40 {
            let c = sample_comb_stream(p, n, Boundary::Periodic, 2718, s).unwrap();
            counts.push(n_e_gt4_formula(&c) as f64 / n as f64);
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (counts.len() - 1) as f64;
        let se = (var / counts.len() as f64).sqrt();
        let want = (1.0 - p) / (2.0 - p);
        assert!((mean - want).abs() < 3.0 * se + 1e-4, "{mean} vs {want}");
    }
}
