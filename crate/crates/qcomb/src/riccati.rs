//! Monte Carlo Lyapunov exponents and integrated densities of states via
//! Riccati recursions `psi_{n+1} = -1/psi_n + (site term)`, for the three
//! state families of the random comb and for the underlying binary
//! chain, plus transfer-matrix and Thouless-formula cross-checks and the
//! small-energy scaling analysis.
//!
//! Conventions:
//! - E>4 family (site terms `e^sigma - 1` on teeth, `2 cosh sigma` on
//!   holes): gamma is the spine decay rate of the bound states; the
//!   negative-psi fraction of this recursion counts the states *above*
//!   the probe energy, so the IDOS eta(E) (states in (4, E] per site) is
//!   reported as the anchored difference nu(4+) - nu(E) with common
//!   random numbers.
//! - Upsilon family: complex recursion (`1 + e^{-i theta}` / `2 cos
//!   theta`); gamma only.
//! - Binary chain `psi' = -1/psi + V(n) - E`: the negative fraction is
//!   the chain IDOS directly.

use num_complex::Complex64;
use serde::Serialize;

use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;

type C64 = Complex64;

pub const DEFAULT_BURN_IN: usize = 1000;
const N_BATCHES: usize = 100;

/// Which recursion produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum Family {
    EGt4 { e: f64 },
    Upsilon { e: f64 },
    PhaseShift { e: f64, delta: f64 },
    BinaryChain { energy_chain: f64, v: f64 },
}

/// Monte Carlo output for one parameter point.
#[derive(Debug, Clone, Serialize)]
pub struct RiccatiEstimate {
    pub family: Family,
    pub p: f64,
    pub gamma_bar: f64,
    pub stderr_gamma: f64,
    /// IDOS estimate; absent for the complex Upsilon recursion
    pub eta_bar: Option<f64>,
    pub stderr_eta: Option<f64>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl RiccatiEstimate {
    /// Localization length `xi = 1/gamma`, defined for positive gamma.
    pub fn xi(&self) -> Option<f64> {
        (self.gamma_bar > 0.0).then(|| 1.0 / self.gamma_bar)
    }
}

struct RealRun {
    gamma: f64,
    se_gamma: f64,
    frac_neg: f64,
    se_frac: f64,
}

/// Iterate the real recursion and accumulate batch-means statistics.
fn run_real(
    a_tooth: f64,
    a_hole: f64,
    p: f64,
    n_iter: usize,
    burn_in: usize,
    seed: u64,
    stream: u64,
) -> RealRun {
    let mut rng = stream_rng(seed, stream);
    let mut psi = 1.0f64;
    // division pole guard: a psi that lands exactly on 0 is nudged to a
    // sign-preserving subnormal-scale value so the log stays finite and
    // the sign crossing is still counted
    let guard = |psi: f64| {
        if psi == 0.0 {
            if psi.is_sign_negative() {
                -1e-300
            } else {
                1e-300
            }
        } else {
            psi
        }
    };
    for _ in 0..burn_in {
        let term = if rng.gen::<f64>() < p { a_hole } else { a_tooth };
        psi = guard(-1.0 / psi + term);
    }
    let batch = (n_iter / N_BATCHES).max(1);
    let mut g_batches = Vec::with_capacity(N_BATCHES + 1);
    let mut f_batches = Vec::with_capacity(N_BATCHES + 1);
    let mut done = 0usize;
    while done < n_iter {
        let m = batch.min(n_iter - done);
        // Kahan-compensated batch sum
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut neg = 0usize;
        for _ in 0..m {
            let term = if rng.gen::<f64>() < p { a_hole } else { a_tooth };
            psi = guard(-1.0 / psi + term);
            let y = psi.abs().ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            if psi < 0.0 {
                neg += 1;
            }
        }
        g_batches.push(sum / m as f64);
        f_batches.push(neg as f64 / m as f64);
        done += m;
    }
    let stats = |b: &[f64]| -> (f64, f64) {
        let n = b.len() as f64;
        let mean = b.iter().sum::<f64>() / n;
        if b.len() < 2 {
            return (mean, f64::NAN);
        }
        let var = b.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (gamma, se_gamma) = stats(&g_batches);
    let (frac_neg, se_frac) = stats(&f_batches);
    RealRun {
        gamma,
        se_gamma,
        frac_neg,
        se_frac,
    }
}

fn run_complex(
    a_tooth: C64,
    a_hole: C64,
    p: f64,
    n_iter: usize,
    burn_in: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = stream_rng(seed, 0);
    let one = C64::new(1.0, 0.0);
    let mut psi = one;
    let guard = |psi: C64| {
        if psi.norm_sqr() == 0.0 {
            C64::new(1e-300, 0.0)
        } else {
            psi
        }
    };
    for _ in 0..burn_in {
        let term = if rng.gen::<f64>() < p { a_hole } else { a_tooth };
        psi = guard(-one / psi + term);
    }
    let batch = (n_iter / N_BATCHES).max(1);
    let mut g_batches = Vec::with_capacity(N_BATCHES + 1);
    let mut done = 0usize;
    while done < n_iter {
        let m = batch.min(n_iter - done);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for _ in 0..m {
            let term = if rng.gen::<f64>() < p { a_hole } else { a_tooth };
            psi = guard(-one / psi + term);
            let y = 0.5 * psi.norm_sqr().ln() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        g_batches.push(sum / m as f64);
        done += m;
    }
    let n = g_batches.len() as f64;
    let mean = g_batches.iter().sum::<f64>() / n;
    let var = g_batches.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Tooth decay rate for a comb energy E > 4: `arcosh((E-2)/2)`.
pub fn sigma_of_energy(e: f64) -> Result<f64> {
    let x = (e - 2.0) / 2.0;
    if !(x > 1.0) {
        return Err(Error::InvalidArgument(format!("E = {e} is not above 4")));
    }
    Ok((x + (x * x - 1.0).sqrt()).ln())
}

/// theta in (0, pi) for a comb energy E in (0, 4): `E = 2 - 2 cos theta`.
pub fn theta_of_energy(e: f64) -> Result<f64> {
    if !(0.0 < e && e < 4.0) {
        return Err(Error::InvalidArgument(format!("E = {e} outside (0,4)")));
    }
    Ok((1.0 - e / 2.0).acos())
}

/// Effective binary-chain potential of a phase-shift eigenstate,
/// `V(E, delta) = E/2 + sqrt(E(1 - E/4)) tan(delta/2)`.
pub fn v_of_e_delta(e: f64, delta: f64) -> Result<f64> {
    if !(0.0 < e && e < 4.0) {
        return Err(Error::InvalidArgument(format!("E = {e} outside (0,4)")));
    }
    if (delta.abs() - std::f64::consts::PI).abs() < 1e-12 {
        return Err(Error::InvalidArgument(
            "delta = +-pi is the C_n = 0 pole".into(),
        ));
    }
    Ok(e / 2.0 + (e * (1.0 - e / 4.0)).sqrt() * (delta / 2.0).tan())
}

/// Phase shift at which the effective potential vanishes: `delta_0 = -theta`.
pub fn delta_zero(e: f64) -> Result<f64> {
    Ok(-theta_of_energy(e)?)
}

/// E>4 family. `eta_bar` is the density of E>4 states with energy in
/// (4, E], from the anchored difference described in the module docs.
pub fn lyapunov_egt4(e: f64, p: f64, n_iter: usize, seed: u64) -> Result<RiccatiEstimate> {
    let sigma = sigma_of_energy(e)?;
    check_mc_args(p, n_iter)?;
    let run = run_real(
        sigma.exp() - 1.0,
        sigma.exp() + (-sigma).exp(),
        p,
        n_iter,
        DEFAULT_BURN_IN,
        seed,
        0,
    );
    // anchor at sigma -> 0+ (E -> 4+), common random numbers
    let s0 = 1e-9f64;
    let anchor = run_real(
        s0.exp() - 1.0,
        s0.exp() + (-s0).exp(),
        p,
        n_iter,
        DEFAULT_BURN_IN,
        seed,
        0,
    );
    let eta = (anchor.frac_neg - run.frac_neg).max(0.0);
    let se_eta = (anchor.se_frac.powi(2) + run.se_frac.powi(2)).sqrt();
    Ok(RiccatiEstimate {
        family: Family::EGt4 { e },
        p,
        gamma_bar: run.gamma,
        stderr_gamma: run.se_gamma,
        eta_bar: Some(eta),
        stderr_eta: Some(se_eta),
        n_iter,
        burn_in: DEFAULT_BURN_IN,
        seed,
    })
}

/// S-matrix column (Upsilon) family, complex recursion; gamma only.
pub fn lyapunov_upsilon(e: f64, p: f64, n_iter: usize, seed: u64) -> Result<RiccatiEstimate> {
    let theta = theta_of_energy(e)?;
    check_mc_args(p, n_iter)?;
    lyapunov_upsilon_theta(theta, p, n_iter, seed)
}

/// Same family parameterized by theta (used by the small-theta scaling).
pub fn lyapunov_upsilon_theta(
    theta: f64,
    p: f64,
    n_iter: usize,
    seed: u64,
) -> Result<RiccatiEstimate> {
    if !(0.0 < theta && theta < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!("theta = {theta}")));
    }
    check_mc_args(p, n_iter)?;
    let a_tooth = C64::new(1.0 + theta.cos(), -theta.sin());
    let a_hole = C64::new(2.0 * theta.cos(), 0.0);
    let (gamma, se) = run_complex(a_tooth, a_hole, p, n_iter, DEFAULT_BURN_IN, seed);
    Ok(RiccatiEstimate {
        family: Family::Upsilon {
            e: 2.0 - 2.0 * theta.cos(),
        },
        p,
        gamma_bar: gamma,
        stderr_gamma: se,
        eta_bar: None,
        stderr_eta: None,
        n_iter,
        burn_in: DEFAULT_BURN_IN,
        seed,
    })
}

/// General binary-chain engine: `psi' = -1/psi + V chi - E`.
pub fn lyapunov_binary_chain(
    energy_chain: f64,
    v: f64,
    p: f64,
    n_iter: usize,
    seed: u64,
) -> Result<RiccatiEstimate> {
    if !energy_chain.is_finite() || !v.is_finite() {
        return Err(Error::InvalidArgument("non-finite chain parameters".into()));
    }
    check_mc_args(p, n_iter)?;
    let run = run_real(
        v - energy_chain,
        -energy_chain,
        p,
        n_iter,
        DEFAULT_BURN_IN,
        seed,
        0,
    );
    Ok(RiccatiEstimate {
        family: Family::BinaryChain { energy_chain, v },
        p,
        gamma_bar: run.gamma,
        stderr_gamma: run.se_gamma,
        eta_bar: Some(run.frac_neg),
        stderr_eta: Some(run.se_frac),
        n_iter,
        burn_in: DEFAULT_BURN_IN,
        seed,
    })
}

/// Phase-shift eigenstate family: the binary chain at
/// `(E - 2, V(E, delta))`.
pub fn lyapunov_phase_shift(
    e: f64,
    delta: f64,
    p: f64,
    n_iter: usize,
    seed: u64,
) -> Result<RiccatiEstimate> {
    let v = v_of_e_delta(e, delta)?;
    let mut est = lyapunov_binary_chain(e - 2.0, v, p, n_iter, seed)?;
    est.family = Family::PhaseShift { e, delta };
    Ok(est)
}

/// Transfer-matrix cross-check: renormalized products of
/// `T = [[V - E, -1], [1, 0]]`.
pub fn lyapunov_transfer(
    energy_chain: f64,
    v: f64,
    p: f64,
    n_iter: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !energy_chain.is_finite() || !v.is_finite() {
        return Err(Error::InvalidArgument("non-finite chain parameters".into()));
    }
    check_mc_args(p, n_iter)?;
    let mut rng = stream_rng(seed, 0);
    let mut u = 1.0f64;
    let mut w = 0.0f64;
    let batch = (n_iter / N_BATCHES).max(1);
    let mut batches = Vec::with_capacity(N_BATCHES + 1);
    let mut done = 0;
    while done < n_iter {
        let m = batch.min(n_iter - done);
        let mut sum = 0.0;
        for _ in 0..m {
            let site = if rng.gen::<f64>() < p { 0.0 } else { v };
            let un = (site - energy_chain) * u - w;
            w = u;
            u = un;
            let norm = u.hypot(w);
            if norm > 0.0 {
                sum += norm.ln();
                u /= norm;
                w /= norm;
            }
        }
        batches.push(sum / m as f64);
        done += m;
    }
    let n = batches.len() as f64;
    let mean = batches.iter().sum::<f64>() / n;
    let var = batches.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Closed forms used as oracles.
pub mod closed_form {
    use super::C64;

    /// Deterministic p=1 limit of the E>4 family: gamma = sigma.
    pub fn gamma_egt4_p1(e: f64) -> f64 {
        super::sigma_of_energy(e).unwrap()
    }

    /// Density of E>4 states per site, `(1-p)/(2-p)`.
    pub fn egt4_density(p: f64) -> f64 {
        (1.0 - p) / (2.0 - p)
    }

    /// p=0 Upsilon decay rate: `-ln |w_-(e^{i theta})|` with `w_-` the
    /// smaller-modulus root of `w^2 - (1+z) w + 1 = 0`.
    pub fn gamma_upsilon_p0(theta: f64) -> f64 {
        let z = C64::from_polar(1.0, theta);
        let disc = ((z + 3.0) * (z - 1.0)).sqrt();
        let wm = (C64::new(1.0, 0.0) + z - disc) * 0.5;
        let wp = (C64::new(1.0, 0.0) + z + disc) * 0.5;
        -wm.norm().min(wp.norm()).ln()
    }

    /// Leading small-theta prefactor `sqrt((1-p)/2)` of gamma/sqrt(theta).
    pub fn small_theta_prefactor(p: f64) -> f64 {
        ((1.0 - p) / 2.0).sqrt()
    }
}

fn check_mc_args(p: f64, n_iter: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("hole probability {p}")));
    }
    if n_iter < DEFAULT_BURN_IN {
        return Err(Error::InvalidArgument(format!(
            "n_iter {n_iter} smaller than burn-in {DEFAULT_BURN_IN}"
        )));
    }
    Ok(())
}

/// Thouless consistency report at one probe energy.
#[derive(Debug, Clone, Serialize)]
pub struct ThoulessCheck {
    pub e_probe: f64,
    pub gamma_direct: f64,
    pub gamma_thouless: f64,
    pub rel_deviation: f64,
}

/// Compare gamma(E) with the Thouless integral
/// `int log|E - E'| d eta(E')` built from the empirical IDOS of the
/// binary chain on `grid` (which must span the spectrum support).
pub fn thouless_check(
    p: f64,
    v: f64,
    grid: &[f64],
    probes: &[f64],
    n_iter: usize,
    seed: u64,
) -> Result<Vec<ThoulessCheck>> {
    if grid.len() < 16 {
        return Err(Error::InvalidArgument("IDOS grid too coarse".into()));
    }
    use rayon::prelude::*;
    let eta: Vec<f64> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            lyapunov_binary_chain(e, v, p, n_iter, seed.wrapping_add(i as u64))
                .map(|est| est.eta_bar.unwrap())
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(probes.len());
    for &e_star in probes {
        let direct = lyapunov_binary_chain(e_star, v, p, n_iter, seed ^ 0xabcd_1234)?;
        // Stieltjes sum over the empirical IDOS increments
        let mut integral = 0.0;
        for i in 0..grid.len() - 1 {
            let de = eta[i + 1] - eta[i];
            if de != 0.0 {
                let mid = 0.5 * (grid[i] + grid[i + 1]);
                integral += (e_star - mid).abs().ln() * de;
            }
        }
        // mass below / above the grid (should be ~0/1 if the grid spans
        // the spectrum)
        integral += eta[0] * (e_star - grid[0]).abs().ln();
        integral += (1.0 - eta[grid.len() - 1]) * (e_star - grid[grid.len() - 1]).abs().ln();
        let rel = (direct.gamma_bar - integral).abs() / direct.gamma_bar.abs().max(1e-12);
        out.push(ThoulessCheck {
            e_probe: e_star,
            gamma_direct: direct.gamma_bar,
            gamma_thouless: integral,
            rel_deviation: rel,
        });
    }
    Ok(out)
}

/// Minimum of gamma over an E>4 grid.
pub fn min_lyapunov_egt4(
    p: f64,
    grid: &[f64],
    n_iter: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument("grid too small".into()));
    }
    use rayon::prelude::*;
    let ests: Vec<RiccatiEstimate> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &e)| lyapunov_egt4(e, p, n_iter, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let best = ests
        .iter()
        .min_by(|a, b| a.gamma_bar.partial_cmp(&b.gamma_bar).unwrap())
        .unwrap();
    let e = match best.family {
        Family::EGt4 { e } => e,
        _ => unreachable!(),
    };
    Ok((best.gamma_bar, e, best.stderr_gamma))
}

/// Least-squares fit of `gamma(theta) = c sqrt(theta) + b theta`; the
/// second term absorbs the O(theta) correction so `c` is the clean
/// leading prefactor.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub p: f64,
    pub prefactor: f64,
    pub correction: f64,
    pub target: f64,
    /// (theta, gamma, stderr) samples behind the fit
    pub samples: Vec<(f64, f64, f64)>,
}

pub fn small_e_scaling(p: f64, thetas: &[f64], n_iter: usize, seed: u64) -> Result<ScalingFit> {
    if thetas.len() < 3 {
        return Err(Error::InvalidArgument("need at least 3 theta points".into()));
    }
    use rayon::prelude::*;
    let samples: Vec<(f64, f64, f64)> = thetas
        .par_iter()
        .enumerate()
        .map(|(i, &th)| {
            lyapunov_upsilon_theta(th, p, n_iter, seed.wrapping_add(i as u64))
                .map(|est| (th, est.gamma_bar, est.stderr_gamma))
        })
        .collect::<Result<_>>()?;
    // normal equations for gamma = c sqrt(th) + b th
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(th, g, _) in &samples {
        let x1 = th.sqrt();
        let x2 = th;
        s11 += x1 * x1;
        s12 += x1 * x2;
        s22 += x2 * x2;
        r1 += x1 * g;
        r2 += x2 * g;
    }
    let det = s11 * s22 - s12 * s12;
    let c = (s22 * r1 - s12 * r2) / det;
    let b = (s11 * r2 - s12 * r1) / det;
    Ok(ScalingFit {
        p,
        prefactor: c,
        correction: b,
        target: closed_form::small_theta_prefactor(p),
        samples,
    })
}

/// Stationary statistics of the complex fluctuation process
/// `dkappa = -2 sqrt(1-p) e^{-i pi/4} kappa dtau - i sqrt(p(1-p)) dW`.
#[derive(Debug, Clone, Serialize)]
pub struct KappaStats {
    pub p: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub mean: (f64, f64),
    /// covariance of (Re kappa, Im kappa), row-major
    pub cov: [[f64; 2]; 2],
    /// distance of the noiseless chi flow endpoint from chi*_+
    pub chi_flow_error: f64,
}

/// Exact stationary covariance of the linear process (Lyapunov
/// equation): `alpha [[1,-1],[-1,3]]` with `alpha = p sqrt(1-p)/(8 sqrt 2)`.
pub fn kappa_stationary_cov(p: f64) -> [[f64; 2]; 2] {
    let alpha = p * (1.0 - p).sqrt() / (8.0 * std::f64::consts::SQRT_2);
    [[alpha, -alpha], [-alpha, 3.0 * alpha]]
}

/// Attractive fixed point of the noiseless flow, `e^{-i pi/4} sqrt(1-p)`.
pub fn chi_star_plus(p: f64) -> C64 {
    C64::from_polar((1.0 - p).sqrt(), -std::f64::consts::FRAC_PI_4)
}

pub fn simulate_kappa(p: f64, dt: f64, n_steps: usize, seed: u64) -> Result<KappaStats> {
    if !(0.0..=1.0).contains(&p) || dt <= 0.0 || n_steps < 100 {
        return Err(Error::InvalidArgument("bad kappa simulation inputs".into()));
    }
    let drift = C64::from_polar(2.0 * (1.0 - p).sqrt(), -std::f64::consts::FRAC_PI_4);
    let noise_amp = (p * (1.0 - p)).sqrt() * dt.sqrt();
    let mut rng = stream_rng(seed, 0);
    let mut k = C64::new(0.0, 0.0);
    let burn = n_steps / 10;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut kept = 0usize;
    for step in 0..n_steps {
        // Box-Muller normal from two uniforms
        let u1: f64 = rng.gen::<f64>().max(1e-300);
        let u2: f64 = rng.gen();
        let gauss = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        k -= drift * k * dt + C64::new(0.0, 1.0) * noise_amp * gauss;
        if step >= burn {
            let (x, y) = (k.re, k.im);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
            kept += 1;
        }
    }
    let n = kept as f64;
    let mean = (sx / n, sy / n);
    let cov = [
        [sxx / n - mean.0 * mean.0, sxy / n - mean.0 * mean.1],
        [sxy / n - mean.0 * mean.1, syy / n - mean.1 * mean.1],
    ];
    // noiseless chi flow, RK4, must land on chi*_+
    let f = |c: C64| -c * c - C64::new(0.0, 1.0 - p);
    let mut c = C64::new(2.0, 1.0);
    let h = 1e-3;
    for _ in 0..200_000 {
        let k1 = f(c);
        let k2 = f(c + k1 * (h / 2.0));
        let k3 = f(c + k2 * (h / 2.0));
        let k4 = f(c + k3 * h);
        c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let chi_flow_error = (c - chi_star_plus(p)).norm();
    Ok(KappaStats {
        p,
        dt,
        n_steps,
        mean,
        cov,
        chi_flow_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn v_of_e_delta_examples() {
        assert_abs_diff_eq!(v_of_e_delta(2.0, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            v_of_e_delta(2.0, std::f64::consts::FRAC_PI_2).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        let e = 1.3;
        let d0 = delta_zero(e).unwrap();
        assert_abs_diff_eq!(v_of_e_delta(e, d0).unwrap(), 0.0, epsilon = 1e-14);
        assert!(v_of_e_delta(2.0, std::f64::consts::PI).is_err());
    }

    #[test]
    fn deterministic_p1_fixed_point() {
        for e in [4.3, 5.0, 16.0 / 3.0] {
            let est = lyapunov_egt4(e, 1.0, 20_000, 5).unwrap();
            assert_abs_diff_eq!(
                est.gamma_bar,
                closed_form::gamma_egt4_p1(e),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn egt4_gamma_vanishes_on_regular_comb() {
        let est = lyapunov_egt4(4.8, 0.0, 1_000_000, 11).unwrap();
        assert!(
            est.gamma_bar.abs() < 3.0 * est.stderr_gamma.max(1e-5),
            "gamma {} +- {}",
            est.gamma_bar,
            est.stderr_gamma
        );
    }

    #[test]
    fn egt4_idos_at_band_top_matches_density() {
        let p = 0.5;
        let est = lyapunov_egt4(16.0 / 3.0, p, 1_000_000, 3).unwrap();
        let eta = est.eta_bar.unwrap();
        let se = est.stderr_eta.unwrap();
        let want = closed_form::egt4_density(p);
        assert!(
            (eta - want).abs() < (3.0 * se).max(0.01 * want),
            "eta {eta} vs {want} (se {se})"
        );
    }

    #[test]
    fn upsilon_p0_matches_closed_form() {
        for theta in [0.5f64, 1.2, 2.4] {
            let e = 2.0 - 2.0 * theta.cos();
            let est = lyapunov_upsilon(e, 0.0, 400_000, 9).unwrap();
            let want = closed_form::gamma_upsilon_p0(theta);
            assert!(
                (est.gamma_bar - want).abs() < 3.0 * est.stderr_gamma + 1e-4,
                "theta {theta}: {} vs {want}",
                est.gamma_bar
            );
        }
    }

    #[test]
    fn upsilon_band_edge_matches_egt4_band_bottom() {
        // theta -> pi (E -> 4-) equals sigma -> 0 (E -> 4+) up to a sign flip
        let p = 0.5;
        let a = lyapunov_upsilon(3.999, p, 400_000, 21).unwrap();
        let b = lyapunov_egt4(4.001, p, 400_000, 22).unwrap();
        let tol = 3.0 * (a.stderr_gamma.powi(2) + b.stderr_gamma.powi(2)).sqrt() + 2e-3;
        assert!(
            (a.gamma_bar - b.gamma_bar).abs() < tol,
            "{} vs {}",
            a.gamma_bar,
            b.gamma_bar
        );
    }

    #[test]
    fn chain_consistency_with_egt4_mapping() {
        // V = 1 + e^{-sigma}, E_chain = 2 cosh sigma reproduces the E>4 family
        let p = 0.35;
        let e = 4.7;
        let sigma = sigma_of_energy(e).unwrap();
        let a = lyapunov_egt4(e, p, 600_000, 31).unwrap();
        let b = lyapunov_binary_chain(
            2.0 * sigma.cosh(),
            1.0 + (-sigma).exp(),
            p,
            600_000,
            32,
        )
        .unwrap();
        let tol = 3.0 * (a.stderr_gamma.powi(2) + b.stderr_gamma.powi(2)).sqrt();
        assert!((a.gamma_bar - b.gamma_bar).abs() < tol);
    }

    #[test]
    fn phase_shift_at_delta_zero_has_no_localization() {
        let e = 2.5;
        let d0 = delta_zero(e).unwrap();
        let est = lyapunov_phase_shift(e, d0, 0.25, 400_000, 8).unwrap();
        assert!(est.gamma_bar.abs() < 3.0 * est.stderr_gamma.max(1e-5));
    }

    #[test]
    fn transfer_matrix_agrees_with_riccati() {
        let free = lyapunov_transfer(0.7, 0.0, 0.5, 200_000, 4).unwrap();
        assert!(free.0.abs() < 1e-3, "free chain gamma {}", free.0);
        let hyper = lyapunov_transfer(3.0, 0.0, 0.5, 200_000, 4).unwrap();
        assert_abs_diff_eq!(hyper.0, (1.5f64 + (1.25f64).sqrt()).ln(), epsilon = 1e-3);
        for (e, v, p) in [(0.4, 2.0, 0.3), (1.1, 3.5, 0.6)] {
            let t = lyapunov_transfer(e, v, p, 400_000, 13).unwrap();
            let r = lyapunov_binary_chain(e, v, p, 400_000, 14).unwrap();
            let tol = 3.0 * (t.1.powi(2) + r.stderr_gamma.powi(2)).sqrt() + 1e-4;
            assert!((t.0 - r.gamma_bar).abs() < tol, "{} vs {}", t.0, r.gamma_bar);
        }
    }

    #[test]
    fn idos_monotone_in_energy() {
        let p = 0.5;
        let v = 3.0;
        let mut last = -1.0;
        for i in 0..12 {
            let e = -2.2 + i as f64 * 0.65;
            let est = lyapunov_binary_chain(e, v, p, 200_000, 77).unwrap();
            let eta = est.eta_bar.unwrap();
            assert!(
                eta >= last - 2.0 * est.stderr_eta.unwrap(),
                "eta not monotone at {e}"
            );
            last = eta;
        }
    }

    #[test]
    fn seed_independence_within_error() {
        let a = lyapunov_egt4(4.9, 0.5, 200_000, 100).unwrap();
        let b = lyapunov_egt4(4.9, 0.5, 200_000, 900).unwrap();
        let tol = 4.0 * (a.stderr_gamma.powi(2) + b.stderr_gamma.powi(2)).sqrt();
        assert!((a.gamma_bar - b.gamma_bar).abs() < tol);
    }

    #[test]
    fn doubling_iterations_is_stable() {
        let a = lyapunov_egt4(4.6, 0.5, 100_000, 42).unwrap();
        let b = lyapunov_egt4(4.6, 0.5, 200_000, 43).unwrap();
        let tol = 4.0 * (a.stderr_gamma.powi(2) + b.stderr_gamma.powi(2)).sqrt();
        assert!((a.gamma_bar - b.gamma_bar).abs() < tol);
    }

    #[test]
    fn kappa_simulation_matches_ou_covariance() {
        let p = 0.5;
        let stats = simulate_kappa(p, 5e-4, 8_000_000, 12).unwrap();
        assert!(stats.chi_flow_error < 1e-9);
        let want = kappa_stationary_cov(p);
        for i in 0..2 {
            assert!(stats.mean.0.abs() < 0.02 && stats.mean.1.abs() < 0.02);
            for j in 0..2 {
                let rel = (stats.cov[i][j] - want[i][j]).abs() / want[i][j].abs();
                assert!(rel < 0.08, "cov[{i}][{j}] {} vs {}", stats.cov[i][j], want[i][j]);
            }
        }
    }

    #[test]
    fn kappa_noise_vanishes_with_p() {
        let stats = simulate_kappa(1e-4, 1e-3, 400_000, 5).unwrap();
        assert!(stats.cov[0][0] < 1e-4 && stats.cov[1][1] < 1e-4);
        let bigger = simulate_kappa(1e-2, 1e-3, 400_000, 5).unwrap();
        assert!(bigger.cov[1][1] > 10.0 * stats.cov[1][1]);
    }
}
