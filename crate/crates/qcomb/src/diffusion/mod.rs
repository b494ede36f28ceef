//! Localization and escape observables for a walker started at a spine
//! site: the trapped probability P^loc and its ensemble statistics, the
//! time-averaged localization profile, per-tooth escape probabilities by
//! theta-quadrature of the scattering overlaps, the large-distance
//! escape asymptotics, and a direct time-evolution oracle.

mod evolve;

pub use evolve::{bessel_j_sequence, evolve_oracle, EvolveSpec, OracleRun, TruncatedComb};

use rayon::prelude::*;
use serde::Serialize;

use crate::boundstates::BoundState;
use crate::comb::{sample_comb_stream, Boundary, CombConfig};
use crate::smatrix::ThetaSolver;
use crate::{Error, Result};

/// `P^loc(n0)`: total probability to stay trapped near the spine,
/// `sum_sigma |<Gamma_sigma|Phi_n0>|^2` with tail-inclusive norms.
pub fn p_loc(states: &[BoundState], n0: usize) -> f64 {
    states
        .iter()
        .map(|s| {
            let c = s.spine_amplitudes[n0];
            c * c / s.norm_sq
        })
        .sum()
}

/// Time-averaged localization profile `P^loc_bar(n0, n)`. Degenerate
/// energy clusters keep their off-diagonal projector terms (the basis
/// where the projector is diagonal would reproduce exactly this sum).
pub fn p_loc_profile(comb: &CombConfig, states: &[BoundState], n0: usize) -> Vec<f64> {
    let n = comb.n_sites;
    let mut prof = vec![0.0; n];
    let mut i = 0;
    while i < states.len() {
        let mut j = i + 1;
        while j < states.len() && (states[j].energy - states[i].energy).abs() < 1e-9 {
            j += 1;
        }
        // cluster [i, j): same energy, same sigma
        let sigma = states[i].sigma;
        let tooth_w = 1.0 / (1.0 - (-2.0 * sigma).exp());
        for site in 0..n {
            let w = if comb.chi[site] { tooth_w } else { 1.0 };
            let mut amp = 0.0;
            for s in &states[i..j] {
                let norm = s.norm_sq;
                amp += s.spine_amplitudes[n0] * s.spine_amplitudes[site] / norm;
            }
            // single state: |c_sigma|^2 |Gamma(n)|^2 w ; clusters add
            // coherently inside the time-averaged diagonal block
            prof[site] += amp * amp * w;
        }
        i = j;
    }
    prof
}

/// The T-independent envelope `Q(n0, n)`: absolute double sum over all
/// state pairs. Bounds the instantaneous localized probability at every
/// time.
pub fn q_envelope(comb: &CombConfig, states: &[BoundState], n0: usize) -> Vec<f64> {
    let n = comb.n_sites;
    let mut q = vec![0.0; n];
    for site in 0..n {
        let mut acc = 0.0;
        for a in states {
            for b in states {
                let w = if comb.chi[site] {
                    1.0 / (1.0 - (-(a.sigma + b.sigma)).exp())
                } else {
                    1.0
                };
                let term = a.overlap_site(n0)
                    * (a.spine_amplitudes[site] / a.norm_sq.sqrt())
                    * (b.spine_amplitudes[site] / b.norm_sq.sqrt())
                    * b.overlap_site(n0)
                    * w;
                acc += term.abs();
            }
        }
        q[site] = acc;
    }
    q
}

/// Escape probabilities along every tooth from start site `n0`:
/// `integral over (0, pi) of |(S_full + 1)_{n0, t}|^2 dtheta / 2pi`,
/// using the sqrt substitution near theta = 0. Returns (per-tooth
/// values aligned with `comb.tooth_sites()`, achieved error estimate).
pub fn p_esc_by_tooth(comb: &CombConfig, n0: usize, tol: f64) -> Result<(Vec<f64>, f64)> {
    let teeth = comb.tooth_sites();
    if teeth.is_empty() {
        return Ok((Vec::new(), 0.0));
    }
    let overlap_sq = |theta: f64| -> Vec<f64> {
        let solver = ThetaSolver::new(comb, theta).expect("interior theta");
        let row = solver.overlap_row(n0);
        teeth
            .iter()
            .map(|&t| row[t].norm_sqr() / (2.0 * std::f64::consts::PI))
            .collect()
    };
    let split: f64 = 0.1;
    let (low, e_low) = crate::quad::adaptive_vec(
        |u| {
            let v = overlap_sq(u * u);
            v.into_iter().map(|x| 2.0 * u * x).collect()
        },
        0.0,
        split.sqrt(),
        0.5 * tol,
        600,
    );
    let (high, e_high) = crate::quad::adaptive_vec(
        overlap_sq,
        split,
        std::f64::consts::PI,
        0.5 * tol,
        600,
    );
    let vals = low.iter().zip(&high).map(|(a, b)| a + b).collect();
    Ok((vals, e_low + e_high))
}

/// Escape probability along a single tooth.
pub fn p_esc_tooth(comb: &CombConfig, n0: usize, t: usize, tol: f64) -> Result<f64> {
    if t >= comb.n_sites || !comb.chi[t] {
        return Err(Error::InvalidArgument(format!("site {t} is not a tooth")));
    }
    let (vals, _) = p_esc_by_tooth(comb, n0, tol)?;
    let teeth = comb.tooth_sites();
    let k = teeth.iter().position(|&s| s == t).unwrap();
    Ok(vals[k])
}

/// Localization/escape summary for one start site.
#[derive(Debug, Clone, Serialize)]
pub struct DiffusionReport {
    pub occupancy: String,
    pub boundary: Boundary,
    pub start_site: usize,
    pub p_loc: f64,
    /// (tooth site, escape probability)
    pub p_esc_by_tooth: Vec<(usize, f64)>,
    pub completeness_residual: f64,
    pub profile: Vec<f64>,
    pub quadrature_error: f64,
}

pub fn diffusion_report(
    comb: &CombConfig,
    states: &[BoundState],
    n0: usize,
    tol: f64,
) -> Result<DiffusionReport> {
    if comb.n_teeth() == 0 {
        return Err(Error::InvalidArgument(
            "completeness needs at least one tooth (no escape channels otherwise)".into(),
        ));
    }
    let ploc = p_loc(states, n0);
    let (pesc, qerr) = p_esc_by_tooth(comb, n0, tol)?;
    let total: f64 = ploc + pesc.iter().sum::<f64>();
    let profile = p_loc_profile(comb, states, n0);
    Ok(DiffusionReport {
        occupancy: comb.occupancy_string(),
        boundary: comb.boundary,
        start_site: n0,
        p_loc: ploc,
        p_esc_by_tooth: comb.tooth_sites().into_iter().zip(pesc).collect(),
        completeness_residual: (total - 1.0).abs(),
        profile,
        quadrature_error: qerr,
    })
}

/// Ensemble statistics of P^loc over periodic combs, split by whether
/// the start site is a tooth or a hole.
#[derive(Debug, Clone, Serialize)]
pub struct EnsemblePloc {
    pub p: f64,
    pub length: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub stderr: f64,
    /// 100 bins on [0, 1]
    pub histogram: Vec<u64>,
    pub tooth_histogram: Vec<u64>,
    pub hole_histogram: Vec<u64>,
    pub tooth_start_min: f64,
    pub hole_start_max: f64,
    pub upper_bound: f64,
}

impl EnsemblePloc {
    /// Hole starts cluster low, tooth starts high; a positive width
    /// means the two clusters do not overlap.
    pub fn gap_width(&self) -> f64 {
        self.tooth_start_min - self.hole_start_max
    }
}

pub fn ensemble_ploc(p: f64, length: usize, n_samples: usize, seed: u64) -> Result<EnsemblePloc> {
    if n_samples == 0 || length < 3 {
        return Err(Error::InvalidArgument("empty ensemble".into()));
    }
    struct Acc {
        sum: f64,
        sum_sq: f64,
        count: u64,
        hist: Vec<u64>,
        t_hist: Vec<u64>,
        h_hist: Vec<u64>,
        t_min: f64,
        h_max: f64,
    }
    let accs: Vec<Acc> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let comb = sample_comb_stream(p, length, Boundary::Periodic, seed, s).unwrap();
            let states = crate::boundstates::solve_bound_states(&comb)
                .unwrap_or_else(|e| panic!("sample {s}: {e}"));
            let mut acc = Acc {
                sum: 0.0,
                sum_sq: 0.0,
                count: 0,
                hist: vec![0; 100],
                t_hist: vec![0; 100],
                h_hist: vec![0; 100],
                t_min: f64::INFINITY,
                h_max: f64::NEG_INFINITY,
            };
            for n0 in 0..length {
                let v = p_loc(&states, n0);
                let bin = ((v * 100.0).floor() as usize).min(99);
                acc.sum += v;
                acc.sum_sq += v * v;
                acc.count += 1;
                acc.hist[bin] += 1;
                if comb.chi[n0] {
                    acc.t_hist[bin] += 1;
                    acc.t_min = acc.t_min.min(v);
                } else {
                    acc.h_hist[bin] += 1;
                    acc.h_max = acc.h_max.max(v);
                }
            }
            acc
        })
        .collect();
    let mut hist = vec![0u64; 100];
    let mut t_hist = vec![0u64; 100];
    let mut h_hist = vec![0u64; 100];
    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0u64);
    let mut t_min = f64::INFINITY;
    let mut h_max = f64::NEG_INFINITY;
    // per-comb means carry the real sampling error (sites within one
    // comb are correlated)
    let mut comb_means = Vec::with_capacity(n_samples);
    for a in &accs {
        sum += a.sum;
        sum_sq += a.sum_sq;
        count += a.count;
        comb_means.push(a.sum / a.count as f64);
        for i in 0..100 {
            hist[i] += a.hist[i];
            t_hist[i] += a.t_hist[i];
            h_hist[i] += a.h_hist[i];
        }
        t_min = t_min.min(a.t_min);
        h_max = h_max.max(a.h_max);
    }
    let _ = sum_sq;
    let mean = sum / count as f64;
    let m = comb_means.len() as f64;
    let var_c = comb_means
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (m - 1.0).max(1.0);
    Ok(EnsemblePloc {
        p,
        length,
        n_samples,
        mean,
        stderr: (var_c / m).sqrt(),
        histogram: hist,
        tooth_histogram: t_hist,
        hole_histogram: h_hist,
        tooth_start_min: t_min,
        hole_start_max: h_max,
        upper_bound: (1.0 - p) / (2.0 - p),
    })
}

/// Ensemble-mean escape probability versus distance, with a log-log fit
/// of `mean(d) = amplitude * d^exponent`.
#[derive(Debug, Clone, Serialize)]
pub struct EscapeFit {
    pub p: f64,
    pub length: usize,
    pub n_samples: usize,
    /// (distance, ensemble mean, stderr over combs)
    pub points: Vec<(usize, f64, f64)>,
    pub exponent: f64,
    pub exponent_err: f64,
    pub amplitude: f64,
    pub amplitude_err: f64,
}

/// Fixed composite quadrature nodes over theta in (0, pi): Gauss panels
/// in u = sqrt(theta) below the split, plain panels above. Shared by all
/// ensemble members, accurate to ~1e-9 on these smooth ensemble means.
fn escape_theta_grid() -> Vec<(f64, f64)> {
    let (gn, gw) = crate::quad::gauss_legendre(8);
    let mut nodes = Vec::new();
    let split: f64 = 0.25;
    let u_hi = split.sqrt();
    let panels = 60;
    for k in 0..panels {
        let lo = u_hi * k as f64 / panels as f64;
        let hi = u_hi * (k + 1) as f64 / panels as f64;
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        for (x, w) in gn.iter().zip(&gw) {
            let u = c + h * x;
            nodes.push((u * u, w * h * 2.0 * u));
        }
    }
    let panels = 40;
    for k in 0..panels {
        let lo = split + (std::f64::consts::PI - split) * k as f64 / panels as f64;
        let hi = split + (std::f64::consts::PI - split) * (k + 1) as f64 / panels as f64;
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        for (x, w) in gn.iter().zip(&gw) {
            nodes.push((c + h * x, w * h));
        }
    }
    nodes
}

pub fn escape_asymptotics(
    p: f64,
    length: usize,
    distances: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<EscapeFit> {
    if distances.iter().any(|&d| d < 1 || d > length / 4) {
        return Err(Error::InvalidArgument(
            "distances must satisfy 1 <= d <= L/4".into(),
        ));
    }
    let grid = escape_theta_grid();
    // per comb, per distance: translation-averaged integral
    let per_comb: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let comb = sample_comb_stream(p, length, Boundary::Periodic, seed, s).unwrap();
            let mut integrals = vec![0.0; distances.len()];
            for &(theta, w) in &grid {
                let solver = ThetaSolver::new(&comb, theta).expect("interior theta");
                // mean over (n0, direction) pairs of |(S+1)_{n0, n0 +- d}|^2
                let mut sums = vec![0.0; distances.len()];
                let mut counts = vec![0u64; distances.len()];
                for n0 in 0..length {
                    let row = solver.overlap_row(n0);
                    for (di, &d) in distances.iter().enumerate() {
                        for t in [(n0 + d) % length, (n0 + length - d) % length] {
                            if comb.chi[t] {
                                sums[di] += row[t].norm_sqr();
                                counts[di] += 1;
                            }
                        }
                    }
                }
                for di in 0..distances.len() {
                    if counts[di] > 0 {
                        integrals[di] +=
                            w * sums[di] / counts[di] as f64 / (2.0 * std::f64::consts::PI);
                    }
                }
            }
            integrals
        })
        .collect();

    let mut points = Vec::with_capacity(distances.len());
    for (di, &d) in distances.iter().enumerate() {
        let vals: Vec<f64> = per_comb.iter().map(|c| c[di]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        points.push((d, mean, (var / n).sqrt()));
    }
    // weighted log-log least squares
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, m, se) in &points {
        let x = (d as f64).ln();
        let y = m.ln();
        let wgt = if se > 0.0 { (m / se).powi(2) } else { 1.0 };
        sw += wgt;
        sx += wgt * x;
        sy += wgt * y;
        sxx += wgt * x * x;
        sxy += wgt * x * y;
    }
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let slope_err = (sw / det).sqrt();
    let intercept_err = (sxx / det).sqrt();
    Ok(EscapeFit {
        p,
        length,
        n_samples,
        points,
        exponent: slope,
        exponent_err: slope_err,
        amplitude: intercept.exp(),
        amplitude_err: intercept.exp() * intercept_err,
    })
}

/// Closed-form escape asymptote `6 / ((1-p)^3 d^4)`.
pub fn escape_asymptote(p: f64, d: f64) -> f64 {
    6.0 / ((1.0 - p).powi(3) * d.powi(4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundstates::solve_bound_states;

    fn comb(s: &str, boundary: Boundary) -> CombConfig {
        CombConfig::from_chi(s.chars().map(|c| c == 'T').collect(), boundary).unwrap()
    }

    #[test]
    fn all_holes_has_zero_ploc_and_profile() {
        let c = comb("hhhhhh", Boundary::Periodic);
        let states = solve_bound_states(&c).unwrap();
        assert_eq!(p_loc(&states, 2), 0.0);
        assert!(p_loc_profile(&c, &states, 2).iter().all(|&v| v == 0.0));
        assert!(q_envelope(&c, &states, 2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ploc_is_a_probability_and_profile_sums_to_it() {
        for s in 0..6 {
            let c = sample_comb_stream(0.5, 24, Boundary::Periodic, 1001, s).unwrap();
            let states = solve_bound_states(&c).unwrap();
            for n0 in [0, 7, 13] {
                let pl = p_loc(&states, n0);
                assert!((0.0..=1.0 + 1e-12).contains(&pl));
                let prof = p_loc_profile(&c, &states, n0);
                let total: f64 = prof.iter().sum();
                assert!((total - pl).abs() < 1e-8, "profile sum {total} vs {pl}");
            }
        }
    }

    #[test]
    fn q_envelope_dominates_profile() {
        let c = sample_comb_stream(0.5, 20, Boundary::Periodic, 55, 0).unwrap();
        let states = solve_bound_states(&c).unwrap();
        let prof = p_loc_profile(&c, &states, 3);
        let q = q_envelope(&c, &states, 3);
        for (a, b) in prof.iter().zip(&q) {
            assert!(a <= &(b + 1e-12));
        }
    }

    #[test]
    fn completeness_on_small_combs() {
        for s in 0..4 {
            let c = sample_comb_stream(0.5, 14, Boundary::Periodic, 77, s).unwrap();
            if c.n_teeth() == 0 || !crate::comb::classify_chain(&c).is_generic {
                continue;
            }
            let states = solve_bound_states(&c).unwrap();
            let rep = diffusion_report(&c, &states, 3, 1e-7).unwrap();
            assert!(
                rep.completeness_residual < 1e-6,
                "residual {}",
                rep.completeness_residual
            );
        }
    }

    #[test]
    fn single_tooth_completeness_on_a_generic_comb() {
        // single tooth at an incommensurate open position: not a k-chain
        let c = comb("hhhThh", Boundary::Open);
        assert!(crate::comb::classify_chain(&c).is_generic);
        let states = solve_bound_states(&c).unwrap();
        for n0 in [0, 3] {
            let rep = diffusion_report(&c, &states, n0, 1e-7).unwrap();
            assert!(rep.completeness_residual < 1e-6);
        }
    }

    #[test]
    fn dark_states_break_completeness_on_k_chains() {
        // a single tooth on a ring of 8 is a 2-tooth chain: three spine
        // sin modes decouple from the tooth and carry weight that the
        // Gamma/Upsilon families cannot see from a generic start site
        let c = comb("hhThhhhh", Boundary::Periodic);
        assert!(!crate::comb::classify_chain(&c).is_generic);
        let states = solve_bound_states(&c).unwrap();
        let rep = diffusion_report(&c, &states, 7, 1e-7).unwrap();
        assert!((rep.completeness_residual - 0.5).abs() < 1e-6);
    }

    #[test]
    fn p_esc_tooth_rejects_holes() {
        let c = comb("ThT", Boundary::Open);
        assert!(p_esc_tooth(&c, 0, 1, 1e-6).is_err());
    }

    #[test]
    fn ensemble_bound_and_extremes() {
        let ens = ensemble_ploc(0.5, 60, 40, 9).unwrap();
        assert!(ens.mean <= ens.upper_bound + 3.0 * ens.stderr);
        assert!(ensemble_ploc(1.0, 40, 5, 2).unwrap().mean == 0.0);
    }
}
