//! Random comb configurations: sampling, run-length statistics and
//! k-chain classification.
//!
//! A comb is a spine of `n_sites` active sites; each site carries a
//! half-infinite tooth (`chi = true`) or is a bare hole (`chi = false`),
//! independently with hole probability `p`. Open combs sit between two
//! Dirichlet endpoints that never carry teeth; periodic combs wrap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::fmt::Display for Boundary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Boundary::Open => write!(f, "open"),
            Boundary::Periodic => write!(f, "periodic"),
        }
    }
}

/// A finite random comb, reproducible from `(hole_prob, n_sites,
/// boundary, seed, stream)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombConfig {
    pub n_sites: usize,
    pub boundary: Boundary,
    /// true = tooth, false = hole, indexed by active site.
    pub chi: Vec<bool>,
    pub hole_prob: f64,
    pub seed: u64,
}

impl CombConfig {
    /// Explicit occupancy; `hole_prob`/`seed` are recorded as-is.
    pub fn from_chi(chi: Vec<bool>, boundary: Boundary) -> Result<Self> {
        if chi.is_empty() {
            return Err(Error::InvalidArgument("n_sites = 0".into()));
        }
        Ok(Self {
            n_sites: chi.len(),
            boundary,
            chi,
            hole_prob: f64::NAN,
            seed: 0,
        })
    }

    pub fn n_teeth(&self) -> usize {
        self.chi.iter().filter(|&&c| c).count()
    }

    pub fn n_holes(&self) -> usize {
        self.n_sites - self.n_teeth()
    }

    pub fn tooth_sites(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&i| self.chi[i]).collect()
    }

    pub fn hole_sites(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&i| !self.chi[i]).collect()
    }

    /// Occupancy as a 0/1 string (1 = tooth), the form used in manifests.
    pub fn occupancy_string(&self) -> String {
        self.chi.iter().map(|&c| if c { '1' } else { '0' }).collect()
    }

    /// Spine distance between two sites (wrap-aware for periodic combs).
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let d = a.abs_diff(b);
        match self.boundary {
            Boundary::Open => d,
            Boundary::Periodic => d.min(self.n_sites - d),
        }
    }
}

/// Sample one comb: each site is a hole with probability `p`.
pub fn sample_comb(p: f64, n_sites: usize, boundary: Boundary, seed: u64) -> Result<CombConfig> {
    sample_comb_stream(p, n_sites, boundary, seed, 0)
}

/// Ensemble member `stream` under `master_seed`; members get independent
/// RNG streams so parallel sampling is deterministic.
pub fn sample_comb_stream(
    p: f64,
    n_sites: usize,
    boundary: Boundary,
    master_seed: u64,
    stream: u64,
) -> Result<CombConfig> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("hole probability {p}")));
    }
    if n_sites == 0 {
        return Err(Error::InvalidArgument("n_sites = 0".into()));
    }
    let mut rng = crate::rng::stream_rng(master_seed, stream);
    let chi = (0..n_sites).map(|_| rng.gen::<f64>() >= p).collect();
    Ok(CombConfig {
        n_sites,
        boundary,
        chi,
        hole_prob: p,
        seed: master_seed,
    })
}

/// Maximal runs of consecutive equal occupancy. For periodic combs a run
/// may wrap across the seam and is counted once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunLengths {
    pub tooth_runs: Vec<usize>,
    pub hole_runs: Vec<usize>,
    /// number of tooth runs of odd length
    pub n_t_odd: usize,
}

pub fn run_lengths(comb: &CombConfig) -> RunLengths {
    let n = comb.n_sites;
    let chi = &comb.chi;
    let mut tooth_runs = Vec::new();
    let mut hole_runs = Vec::new();
    if chi.iter().all(|&c| c) {
        tooth_runs.push(n);
    } else if chi.iter().all(|&c| !c) {
        hole_runs.push(n);
    } else {
        // start at a run boundary so a wrapping run is counted once
        let start = match comb.boundary {
            Boundary::Open => 0,
            Boundary::Periodic => (0..n)
                .find(|&i| chi[(i + n - 1) % n] != chi[i])
                .unwrap_or(0),
        };
        let at = |k: usize| match comb.boundary {
            Boundary::Open => chi[k],
            Boundary::Periodic => chi[(start + k) % n],
        };
        let mut cur = at(0);
        let mut len = 1usize;
        for k in 1..n {
            let c = at(k);
            if c == cur {
                len += 1;
            } else {
                if cur {
                    tooth_runs.push(len);
                } else {
                    hole_runs.push(len);
                }
                cur = c;
                len = 1;
            }
        }
        if cur {
            tooth_runs.push(len);
        } else {
            hole_runs.push(len);
        }
    }
    let n_t_odd = tooth_runs.iter().filter(|&&r| r % 2 == 1).count();
    RunLengths {
        tooth_runs,
        hole_runs,
        n_t_odd,
    }
}

/// Which species the degenerate uniform comb consists of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    Tooth,
    Hole,
}

/// k-chain classification record. `k_tooth` holds every prime k >= 2 for
/// which the inter-tooth distances (endpoints counted as teeth on open
/// combs) are multiples of k and the total length is a multiple of k;
/// `k_hole` is the mirror image. Uniform combs report empty sets with the
/// `uniform` flag set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainClass {
    pub k_tooth: Vec<u32>,
    pub k_hole: Vec<u32>,
    pub is_generic: bool,
    pub uniform: Option<Species>,
}

fn primes_up_to(n: usize) -> Vec<u32> {
    let mut sieve = vec![true; n + 1];
    let mut out = Vec::new();
    for k in 2..=n {
        if sieve[k] {
            out.push(k as u32);
            let mut m = k * k;
            while m <= n {
                sieve[m] = false;
                m += k;
            }
        }
    }
    out
}

/// Positions (1-based) of one species, with the open-comb endpoint
/// convention of the k-chain definitions.
fn anchor_positions(comb: &CombConfig, species: Species) -> Vec<usize> {
    let mut pos: Vec<usize> = (0..comb.n_sites)
        .filter(|&i| comb.chi[i] == matches!(species, Species::Tooth))
        .map(|i| i + 1)
        .collect();
    if comb.boundary == Boundary::Open {
        pos.insert(0, 0);
        pos.push(comb.n_sites + 1);
    }
    pos
}

fn is_k_chain(comb: &CombConfig, k: usize, species: Species) -> bool {
    let total_len = match comb.boundary {
        Boundary::Open => comb.n_sites + 1,
        Boundary::Periodic => comb.n_sites,
    };
    if total_len % k != 0 {
        return false;
    }
    let pos = anchor_positions(comb, species);
    match comb.boundary {
        Boundary::Open => pos.iter().all(|&q| q % k == 0),
        Boundary::Periodic => {
            let r = pos[0] % k;
            pos.iter().all(|&q| q % k == r)
        }
    }
}

pub fn classify_chain(comb: &CombConfig) -> ChainClass {
    let nt = comb.n_teeth();
    if nt == comb.n_sites || nt == 0 {
        return ChainClass {
            k_tooth: Vec::new(),
            k_hole: Vec::new(),
            is_generic: false,
            uniform: Some(if nt == 0 { Species::Hole } else { Species::Tooth }),
        };
    }
    let total_len = match comb.boundary {
        Boundary::Open => comb.n_sites + 1,
        Boundary::Periodic => comb.n_sites,
    };
    let mut k_tooth = Vec::new();
    let mut k_hole = Vec::new();
    for &k in &primes_up_to(total_len) {
        if is_k_chain(comb, k as usize, Species::Tooth) {
            k_tooth.push(k);
        }
        if is_k_chain(comb, k as usize, Species::Hole) {
            k_hole.push(k);
        }
    }
    let is_generic = k_tooth.is_empty() && k_hole.is_empty();
    ChainClass {
        k_tooth,
        k_hole,
        is_generic,
        uniform: None,
    }
}

/// Empirical per-unit-length densities of hole/tooth strings, with
/// standard errors over the sample, against the closed forms
/// `D_h(l) = (1-p)^2 p^l`, `D_t(l) = p^2 (1-p)^l` and the odd/even tooth
/// string densities.
#[derive(Debug, Clone, Serialize)]
pub struct StringDensityStats {
    pub p: f64,
    pub n_sites: usize,
    pub n_samples: usize,
    /// (length, mean density, stderr) for hole strings
    pub hole: Vec<(usize, f64, f64)>,
    /// (length, mean density, stderr) for tooth strings
    pub tooth: Vec<(usize, f64, f64)>,
    pub d_t_odd: (f64, f64),
    pub d_t_even: (f64, f64),
}

pub fn string_density_stats(
    p: f64,
    n_sites: usize,
    max_len: usize,
    n_samples: usize,
    seed: u64,
) -> Result<StringDensityStats> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples = 0".into()));
    }
    let per_sample: Vec<(Vec<f64>, Vec<f64>, f64, f64)> = (0..n_samples as u64)
        .map(|s| {
            let comb = sample_comb_stream(p, n_sites, Boundary::Periodic, seed, s).unwrap();
            let rl = run_lengths(&comb);
            let mut h = vec![0.0; max_len + 1];
            let mut t = vec![0.0; max_len + 1];
            for &r in &rl.hole_runs {
                if r <= max_len {
                    h[r] += 1.0 / n_sites as f64;
                }
            }
            for &r in &rl.tooth_runs {
                if r <= max_len {
                    t[r] += 1.0 / n_sites as f64;
                }
            }
            let odd = rl.n_t_odd as f64 / n_sites as f64;
            let even = (rl.tooth_runs.len() - rl.n_t_odd) as f64 / n_sites as f64;
            (h, t, odd, even)
        })
        .collect();

    let mean_se = |vals: &[f64]| -> (f64, f64) {
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    };

    let hole = (1..=max_len)
        .map(|l| {
            let vals: Vec<f64> = per_sample.iter().map(|s| s.0[l]).collect();
            let (m, se) = mean_se(&vals);
            (l, m, se)
        })
        .collect();
    let tooth = (1..=max_len)
        .map(|l| {
            let vals: Vec<f64> = per_sample.iter().map(|s| s.1[l]).collect();
            let (m, se) = mean_se(&vals);
            (l, m, se)
        })
        .collect();
    let odd: Vec<f64> = per_sample.iter().map(|s| s.2).collect();
    let even: Vec<f64> = per_sample.iter().map(|s| s.3).collect();
    Ok(StringDensityStats {
        p,
        n_sites,
        n_samples,
        hole,
        tooth,
        d_t_odd: mean_se(&odd),
        d_t_even: mean_se(&even),
    })
}

/// Density of hole strings of length l on the infinite comb.
pub fn hole_string_density(p: f64, l: usize) -> f64 {
    (1.0 - p) * (1.0 - p) * p.powi(l as i32)
}

/// Density of tooth strings of length l on the infinite comb.
pub fn tooth_string_density(p: f64, l: usize) -> f64 {
    p * p * (1.0 - p).powi(l as i32)
}

/// Density of odd-length tooth strings, `p(1-p)/(2-p)`.
pub fn tooth_string_density_odd(p: f64) -> f64 {
    p * (1.0 - p) / (2.0 - p)
}

/// Density of even-length tooth strings, `p(1-p)^2/(2-p)`.
pub fn tooth_string_density_even(p: f64) -> f64 {
    p * (1.0 - p) * (1.0 - p) / (2.0 - p)
}
