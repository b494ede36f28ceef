//! The E<4 scattering problem on a finite comb.
//!
//! For energy `E = 2 - 2 cos theta` the tooth amplitudes of an
//! eigenstate split into outgoing (`A`) and incoming (`B`) waves obeying
//! `X A + Y B = 0` with `Y = conj(X)`; the extended reflection matrix is
//! `S_full = -X^{-1} Y`. Its tooth-tooth block `S` is unitary and
//! symmetric, holes reflect trivially (`-I` block), and the column of
//! `S_full` at a tooth `t` is the stationary scattering state fed by a
//! unit incoming wave on that tooth.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::comb::{Boundary, CombConfig};
use crate::linalg::{CTriLU, CTridiagPeriodic};
use crate::{Error, Result};

type C64 = Complex64;

const COND_LIMIT: f64 = 1e12;
const THETA_NUDGE: f64 = 1e-7;

/// Formal S-matrix value at the theta endpoints 0 and pi (Dirichlet
/// reflection, no propagating tooth states). Never computed, only
/// documented.
pub const S_AT_THETA_ENDPOINTS: f64 = -1.0;

/// Assemble X(theta); Y is its entrywise conjugate. Tooth rows carry
/// diagonal `1 + e^{-i theta}`, hole rows `2 cos theta`, hopping -1,
/// with a wrap entry for periodic combs.
pub fn assemble_xy(comb: &CombConfig, theta: f64) -> Result<(CTridiagPeriodic, CTridiagPeriodic)> {
    if theta <= 0.0 || theta >= std::f64::consts::PI {
        return Err(Error::ThetaEndpoint(theta));
    }
    let x = assemble_x(comb, theta);
    let y = conj_matrix(&x);
    Ok((x, y))
}

fn assemble_x(comb: &CombConfig, theta: f64) -> CTridiagPeriodic {
    let n = comb.n_sites;
    let tooth_diag = C64::new(1.0 + theta.cos(), -theta.sin());
    let hole_diag = C64::new(2.0 * theta.cos(), 0.0);
    let diag = comb
        .chi
        .iter()
        .map(|&c| if c { tooth_diag } else { hole_diag })
        .collect();
    let off = vec![C64::new(-1.0, 0.0); n.saturating_sub(1)];
    let corner = match comb.boundary {
        Boundary::Open => C64::new(0.0, 0.0),
        Boundary::Periodic => C64::new(-1.0, 0.0),
    };
    CTridiagPeriodic::new(diag, off, corner)
}

fn conj_matrix(x: &CTridiagPeriodic) -> CTridiagPeriodic {
    CTridiagPeriodic::new(
        x.diag.iter().map(|v| v.conj()).collect(),
        x.off.iter().map(|v| v.conj()).collect(),
        x.corner.conj(),
    )
}

/// A factored X(theta) ready for row/column solves, with the
/// ill-conditioning fallback already applied.
pub struct ThetaSolver {
    pub comb: CombConfig,
    /// theta actually used (nudged by +-1e-7 near a singular value)
    pub theta: f64,
    pub requested_theta: f64,
    pub x: CTridiagPeriodic,
    pub y: CTridiagPeriodic,
    pub cond_x: f64,
    lu: CTriLU,
}

impl ThetaSolver {
    pub fn new(comb: &CombConfig, theta: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::PI).contains(&theta) || theta == 0.0 {
            return Err(Error::ThetaEndpoint(theta));
        }
        let mut best: Option<(f64, f64, CTriLU)> = None;
        for nudge in [0.0, THETA_NUDGE, -THETA_NUDGE] {
            let th = theta + nudge;
            if th <= 0.0 || th >= std::f64::consts::PI {
                continue;
            }
            let x = assemble_x(comb, th);
            if let Some(lu) = x.factor() {
                let cond = lu.cond_estimate();
                if best.as_ref().map_or(true, |(_, c, _)| cond < *c) {
                    best = Some((th, cond, lu));
                }
                if cond < COND_LIMIT {
                    break;
                }
            }
        }
        let Some((th, cond, lu)) = best else {
            return Err(Error::SingularTheta {
                theta,
                cond: f64::INFINITY,
            });
        };
        if cond > COND_LIMIT {
            return Err(Error::SingularTheta { theta, cond });
        }
        let x = assemble_x(comb, th);
        let y = conj_matrix(&x);
        Ok(Self {
            comb: comb.clone(),
            theta: th,
            requested_theta: theta,
            x,
            y,
            cond_x: cond,
            lu,
        })
    }

    /// Column t of S_full: the outgoing amplitudes for `B = e_t`.
    pub fn column(&self, t: usize) -> Vec<C64> {
        let n = self.comb.n_sites;
        let mut b = vec![C64::new(0.0, 0.0); n];
        b[t] = C64::new(1.0, 0.0);
        let mut rhs = self.y.matvec(&b);
        for v in &mut rhs {
            *v = -*v;
        }
        self.lu.solve(&rhs)
    }

    /// Row n0 of S_full. X and Y are symmetric, so the row is
    /// `-(Y (X^{-1} e_{n0}))^T`, one solve and one matvec.
    pub fn row(&self, n0: usize) -> Vec<C64> {
        let n = self.comb.n_sites;
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[n0] = C64::new(1.0, 0.0);
        let w = self.lu.solve(&e);
        let mut r = self.y.matvec(&w);
        for v in &mut r {
            *v = -*v;
        }
        r
    }

    /// Row n0 of `S_full + I`, the overlap `<Phi_n0 | Upsilon_theta,t>`
    /// as a function of t.
    pub fn overlap_row(&self, n0: usize) -> Vec<C64> {
        let mut r = self.row(n0);
        r[n0] += 1.0;
        r
    }
}

/// Scattering data at one theta.
#[derive(Debug, Clone)]
pub struct ScatterSet {
    pub theta: f64,
    pub x_matrix: CTridiagPeriodic,
    pub y_matrix: CTridiagPeriodic,
    /// N x N extended matrix, row-major
    pub s_full: Vec<Vec<C64>>,
    /// unitary symmetric tooth block, N_t x N_t
    pub s_tooth: Vec<Vec<C64>>,
    /// hole rows x tooth columns (the paper states the transposed shape;
    /// the block equation forces this one)
    pub c_block: Vec<Vec<C64>>,
    pub cond_x: f64,
    pub tooth_sites: Vec<usize>,
    pub hole_sites: Vec<usize>,
}

/// Compute the full scattering set and verify its structural invariants.
pub fn compute_smatrix(comb: &CombConfig, theta: f64) -> Result<ScatterSet> {
    let solver = ThetaSolver::new(comb, theta)?;
    let n = comb.n_sites;
    let mut s_full = Vec::with_capacity(n);
    for n0 in 0..n {
        s_full.push(solver.row(n0));
    }
    let tooth_sites = comb.tooth_sites();
    let hole_sites = comb.hole_sites();
    let s_tooth: Vec<Vec<C64>> = tooth_sites
        .iter()
        .map(|&i| tooth_sites.iter().map(|&j| s_full[i][j]).collect())
        .collect();
    let c_block: Vec<Vec<C64>> = hole_sites
        .iter()
        .map(|&i| tooth_sites.iter().map(|&j| s_full[i][j]).collect())
        .collect();
    let set = ScatterSet {
        theta: solver.theta,
        x_matrix: solver.x,
        y_matrix: solver.y,
        s_full,
        s_tooth,
        c_block,
        cond_x: solver.cond_x,
        tooth_sites,
        hole_sites,
    };
    let diag = scatter_invariants(&set);
    if diag.worst() > 1e-9 {
        return Err(Error::InvariantViolation(format!(
            "scattering invariants at theta {theta}: {diag:?}"
        )));
    }
    Ok(set)
}

/// Residuals of the structural identities; all should be < 1e-9.
#[derive(Debug, Clone, Serialize)]
pub struct ScatterInvariants {
    pub unitarity: f64,
    pub symmetry: f64,
    pub tooth_hole_block: f64,
    pub hole_hole_block: f64,
    pub s_inverse_conj: f64,
    pub xy_conjugate: f64,
    pub xy_difference: f64,
    pub c_consistency: f64,
}

impl ScatterInvariants {
    pub fn worst(&self) -> f64 {
        [
            self.unitarity,
            self.symmetry,
            self.tooth_hole_block,
            self.hole_hole_block,
            self.s_inverse_conj,
            self.xy_conjugate,
            self.xy_difference,
            self.c_consistency,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn scatter_invariants(set: &ScatterSet) -> ScatterInvariants {
    let nt = set.tooth_sites.len();
    let n = set.s_full.len();

    // ||S^dag S - I||_inf
    let mut unitarity: f64 = 0.0;
    for i in 0..nt {
        for j in 0..nt {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..nt {
                acc += set.s_tooth[k][i].conj() * set.s_tooth[k][j];
            }
            if i == j {
                acc -= 1.0;
            }
            unitarity = unitarity.max(acc.norm());
        }
    }
    let mut symmetry: f64 = 0.0;
    for i in 0..nt {
        for j in 0..i {
            symmetry = symmetry.max((set.s_tooth[i][j] - set.s_tooth[j][i]).norm());
        }
    }
    let mut tooth_hole_block: f64 = 0.0;
    for &i in &set.tooth_sites {
        for &j in &set.hole_sites {
            tooth_hole_block = tooth_hole_block.max(set.s_full[i][j].norm());
        }
    }
    let mut hole_hole_block: f64 = 0.0;
    for (a, &i) in set.hole_sites.iter().enumerate() {
        for (b, &j) in set.hole_sites.iter().enumerate() {
            let want = if a == b {
                C64::new(-1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            };
            hole_hole_block = hole_hole_block.max((set.s_full[i][j] - want).norm());
        }
    }
    // || S_full conj(S_full) - I ||_inf  (S^{-1} = conj(S))
    let mut s_inverse_conj: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += set.s_full[i][k] * set.s_full[k][j].conj();
            }
            if i == j {
                acc -= 1.0;
            }
            s_inverse_conj = s_inverse_conj.max(acc.norm());
        }
    }
    let mut xy_conjugate: f64 = 0.0;
    for (a, b) in set.x_matrix.diag.iter().zip(&set.y_matrix.diag) {
        xy_conjugate = xy_conjugate.max((a.conj() - b).norm());
    }
    // X - Y = 2 i sin(theta) T entrywise
    let mut xy_difference: f64 = 0.0;
    let want = C64::new(0.0, -2.0 * set.theta.sin());
    for (i, (a, b)) in set.x_matrix.diag.iter().zip(&set.y_matrix.diag).enumerate() {
        let t = if set.tooth_sites.binary_search(&i).is_ok() {
            want
        } else {
            C64::new(0.0, 0.0)
        };
        xy_difference = xy_difference.max((a - b - t).norm());
    }
    for (a, b) in set.x_matrix.off.iter().zip(&set.y_matrix.off) {
        xy_difference = xy_difference.max((a - b).norm());
    }
    // C = conj(C) S
    let mut c_consistency: f64 = 0.0;
    for row in 0..set.hole_sites.len() {
        for j in 0..nt {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..nt {
                acc += set.c_block[row][k].conj() * set.s_tooth[k][j];
            }
            c_consistency = c_consistency.max((set.c_block[row][j] - acc).norm());
        }
    }
    ScatterInvariants {
        unitarity,
        symmetry,
        tooth_hole_block,
        hole_hole_block,
        s_inverse_conj,
        xy_conjugate,
        xy_difference,
        c_consistency,
    }
}

/// Scattering state fed by a unit incoming wave on tooth `t`.
#[derive(Debug, Clone)]
pub struct UpsilonState {
    pub theta: f64,
    pub source_tooth: usize,
    /// outgoing amplitudes A_n = (S_full)_{n,t}
    pub a_coeffs: Vec<C64>,
    /// residual of the defining linear system
    pub residual: f64,
}

pub fn upsilon(comb: &CombConfig, theta: f64, t: usize) -> Result<UpsilonState> {
    if t >= comb.n_sites || !comb.chi[t] {
        return Err(Error::InvalidArgument(format!("site {t} is not a tooth")));
    }
    let solver = ThetaSolver::new(comb, theta)?;
    let a = solver.column(t);
    let mut b = vec![C64::new(0.0, 0.0); comb.n_sites];
    b[t] = C64::new(1.0, 0.0);
    let lhs = solver.x.matvec(&a);
    let rhs = solver.y.matvec(&b);
    let residual = lhs
        .iter()
        .zip(&rhs)
        .map(|(l, r)| (l + r).norm())
        .fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(Error::InvariantViolation(format!(
            "upsilon residual {residual:.2e}"
        )));
    }
    Ok(UpsilonState {
        theta: solver.theta,
        source_tooth: t,
        a_coeffs: a,
        residual,
    })
}

/// Tooth-space flux imbalance `|sum_teeth |A|^2 - sum_teeth |B|^2|`.
pub fn flux_check(a: &[C64], b: &[C64], comb: &CombConfig) -> f64 {
    let fa: f64 = comb
        .tooth_sites()
        .iter()
        .map(|&t| a[t].norm_sqr())
        .sum();
    let fb: f64 = comb
        .tooth_sites()
        .iter()
        .map(|&t| b[t].norm_sqr())
        .sum();
    (fa - fb).abs()
}

/// Unitary eigensystem of the tooth block: phases delta_k in (-pi, pi]
/// and real orthonormal eigenvectors (S is unitary and symmetric, so a
/// real eigenbasis exists).
#[derive(Debug, Clone)]
pub struct PhaseShiftEigensystem {
    pub theta: f64,
    pub phases: Vec<f64>,
    /// real eigenvectors over the tooth index, one per phase
    pub vectors: Vec<Vec<f64>>,
    /// a delta = pi eigenvalue signals the C_n = 0 special solutions
    pub has_pi_phase: bool,
}

pub fn phase_shift_eigensystem(comb: &CombConfig, theta: f64) -> Result<PhaseShiftEigensystem> {
    let set = compute_smatrix(comb, theta)?;
    phase_shift_from_set(&set)
}

pub fn phase_shift_from_set(set: &ScatterSet) -> Result<PhaseShiftEigensystem> {
    let nt = set.tooth_sites.len();
    if nt == 0 {
        return Ok(PhaseShiftEigensystem {
            theta: set.theta,
            phases: Vec::new(),
            vectors: Vec::new(),
            has_pi_phase: false,
        });
    }
    // Re S and Im S are commuting real symmetric matrices; a generic
    // combination has the shared eigenbasis as a plain symmetric
    // eigenproblem.
    let mut result = None;
    for &mix in &[0.618_033_988_749_895, 1.324_717_957_244_746, 0.070_707] {
        let mut m = DMatrix::<f64>::zeros(nt, nt);
        for i in 0..nt {
            for j in 0..nt {
                m[(i, j)] = set.s_tooth[i][j].re + mix * set.s_tooth[i][j].im;
            }
        }
        let eig = SymmetricEigen::new(m);
        let mut phases = Vec::with_capacity(nt);
        let mut vectors = Vec::with_capacity(nt);
        let mut worst: f64 = 0.0;
        for k in 0..nt {
            let q: Vec<f64> = (0..nt).map(|i| eig.eigenvectors[(i, k)]).collect();
            // Rayleigh value lambda = q^T S q
            let mut lam = C64::new(0.0, 0.0);
            for i in 0..nt {
                let mut row = C64::new(0.0, 0.0);
                for j in 0..nt {
                    row += set.s_tooth[i][j] * q[j];
                }
                lam += q[i] * row;
            }
            // residual || S q - lam q ||_inf
            for i in 0..nt {
                let mut row = C64::new(0.0, 0.0);
                for j in 0..nt {
                    row += set.s_tooth[i][j] * q[j];
                }
                worst = worst.max((row - lam * q[i]).norm());
            }
            worst = worst.max((lam.norm() - 1.0).abs());
            phases.push(lam.arg());
            vectors.push(q);
        }
        if worst < 1e-8 {
            result = Some((phases, vectors));
            break;
        }
    }
    let Some((phases, vectors)) = result else {
        return Err(Error::InvariantViolation(
            "phase-shift eigensystem residual too large".into(),
        ));
    };
    let has_pi_phase = phases
        .iter()
        .any(|d| (d.abs() - std::f64::consts::PI).abs() < 1e-9);
    let mut order: Vec<usize> = (0..phases.len()).collect();
    order.sort_by(|&a, &b| phases[a].partial_cmp(&phases[b]).unwrap());
    Ok(PhaseShiftEigensystem {
        theta: set.theta,
        phases: order.iter().map(|&i| phases[i]).collect(),
        vectors: order.iter().map(|&i| vectors[i].clone()).collect(),
        has_pi_phase,
    })
}

/// Extend a tooth-space eigenvector of S with phase delta to the full
/// spine: B on teeth is the eigenvector, holes carry
/// `B_h = (S_full (b,0))_h / (1 + e^{i delta})`.
pub fn extend_phase_shift_vector(
    set: &ScatterSet,
    b_teeth: &[f64],
    delta: f64,
) -> Result<Vec<C64>> {
    let n = set.s_full.len();
    let phase = C64::from_polar(1.0, delta);
    let denom = C64::new(1.0, 0.0) + phase;
    if denom.norm() < 1e-12 {
        return Err(Error::InvalidArgument(
            "delta = pi branch has C_n = 0; no spine extension".into(),
        ));
    }
    let mut b_full = vec![C64::new(0.0, 0.0); n];
    for (k, &t) in set.tooth_sites.iter().enumerate() {
        b_full[t] = C64::new(b_teeth[k], 0.0);
    }
    // a = S_full * b  (only tooth columns contribute)
    for (h_row, &h) in set.hole_sites.iter().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (k, _) in set.tooth_sites.iter().enumerate() {
            acc += set.c_block[h_row][k] * b_teeth[k];
        }
        b_full[h] = acc / denom;
    }
    Ok(b_full)
}

/// Residual of the binary-chain equation satisfied by the extended
/// phase-shift vector: `2B - B_- - B_+ + V(E,delta) chi B = E B`.
pub fn bth_residual(comb: &CombConfig, theta: f64, delta: f64, b_full: &[C64]) -> f64 {
    let n = comb.n_sites;
    let e = 2.0 - 2.0 * theta.cos();
    let v = crate::riccati::v_of_e_delta(e, delta).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let mut lhs = C64::new(2.0, 0.0) * b_full[i];
        match comb.boundary {
            Boundary::Periodic => {
                lhs -= b_full[(i + n - 1) % n] + b_full[(i + 1) % n];
            }
            Boundary::Open => {
                if i > 0 {
                    lhs -= b_full[i - 1];
                }
                if i + 1 < n {
                    lhs -= b_full[i + 1];
                }
            }
        }
        if comb.chi[i] {
            lhs += C64::new(v, 0.0) * b_full[i];
        }
        worst = worst.max((lhs - C64::new(e, 0.0) * b_full[i]).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::sample_comb_stream;

    fn comb(s: &str, boundary: Boundary) -> CombConfig {
        CombConfig::from_chi(s.chars().map(|c| c == 'T').collect(), boundary).unwrap()
    }

    #[test]
    fn theta_endpoints_are_rejected() {
        let c = comb("ThT", Boundary::Open);
        assert!(matches!(
            assemble_xy(&c, 0.0),
            Err(Error::ThetaEndpoint(_))
        ));
        assert!(matches!(
            assemble_xy(&c, std::f64::consts::PI),
            Err(Error::ThetaEndpoint(_))
        ));
    }

    #[test]
    fn x_assembly_matches_row_rules() {
        let c = comb("Th", Boundary::Open);
        let th = std::f64::consts::FRAC_PI_2;
        let (x, y) = assemble_xy(&c, th).unwrap();
        assert!((x.diag[0] - C64::new(1.0, -1.0)).norm() < 1e-15);
        assert!(x.diag[1].norm() < 1e-15); // 2cos(pi/2)
        // X - Y = 2 i sin(theta) T
        let d = x.diag[0] - y.diag[0];
        assert!((d - C64::new(0.0, -2.0 * th.sin())).norm() < 1e-15);
        assert!((x.diag[1] - y.diag[1]).norm() < 1e-15);
    }

    #[test]
    fn invariants_hold_on_random_combs() {
        for s in 0..6 {
            let boundary = if s % 2 == 0 {
                Boundary::Periodic
            } else {
                Boundary::Open
            };
            let c = sample_comb_stream(0.5, 24, boundary, 99, s).unwrap();
            let set = compute_smatrix(&c, 1.234).unwrap();
            let inv = scatter_invariants(&set);
            assert!(inv.worst() < 1e-9, "{inv:?}");
        }
    }

    #[test]
    fn all_holes_comb_scatters_trivially() {
        let c = comb("hhhhh", Boundary::Open);
        let set = compute_smatrix(&c, 0.9).unwrap();
        assert!(set.s_tooth.is_empty());
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j {
                    C64::new(-1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((set.s_full[i][j] - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn single_tooth_reflection_is_a_pure_phase() {
        let c = comb("hhThh", Boundary::Open);
        for theta in [0.3, 1.1, 2.7] {
            let set = compute_smatrix(&c, theta).unwrap();
            assert_eq!(set.s_tooth.len(), 1);
            assert!((set.s_tooth[0][0].norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn upsilon_is_a_column_with_unit_tooth_flux() {
        let c = sample_comb_stream(0.5, 20, Boundary::Periodic, 7, 0).unwrap();
        let t = c.tooth_sites()[1];
        let ups = upsilon(&c, 0.8, t).unwrap();
        let flux: f64 = c
            .tooth_sites()
            .iter()
            .map(|&s| ups.a_coeffs[s].norm_sqr())
            .sum();
        assert!((flux - 1.0).abs() < 1e-10, "flux {flux}");
        // overlap row identity <Phi_n0 | Upsilon> = (S_full + 1)_{n0,t}
        let set = compute_smatrix(&c, 0.8).unwrap();
        for n0 in 0..c.n_sites {
            let mut want = set.s_full[n0][t];
            if n0 == t {
                want += 1.0;
            }
            let got = ups.a_coeffs[n0] + if n0 == t { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            assert!((got - want).norm() < 1e-9);
        }
    }

    #[test]
    fn upsilon_rejects_holes() {
        let c = comb("ThT", Boundary::Open);
        assert!(upsilon(&c, 1.0, 1).is_err());
    }

    #[test]
    fn flux_check_on_scattered_waves() {
        let c = sample_comb_stream(0.4, 16, Boundary::Open, 3, 1).unwrap();
        let solver = ThetaSolver::new(&c, 1.9).unwrap();
        // random incoming wave supported on teeth
        let mut b = vec![C64::new(0.0, 0.0); c.n_sites];
        for (k, &t) in c.tooth_sites().iter().enumerate() {
            b[t] = C64::new(0.3 + k as f64 * 0.21, -0.4 + (k as f64).sin());
        }
        let mut a = vec![C64::new(0.0, 0.0); c.n_sites];
        for &t in &c.tooth_sites() {
            let col = solver.column(t);
            for i in 0..c.n_sites {
                a[i] += col[i] * b[t];
            }
        }
        let total: f64 = c.tooth_sites().iter().map(|&t| b[t].norm_sqr()).sum();
        assert!(flux_check(&a, &b, &c) < 1e-10 * total);
    }

    #[test]
    fn phase_shift_eigensystem_properties() {
        let c = sample_comb_stream(0.5, 18, Boundary::Periodic, 13, 2).unwrap();
        let theta = 1.3;
        let set = compute_smatrix(&c, theta).unwrap();
        let ps = phase_shift_from_set(&set).unwrap();
        assert_eq!(ps.phases.len(), c.n_teeth());
        for d in &ps.phases {
            assert!((-std::f64::consts::PI..=std::f64::consts::PI).contains(d));
        }
        // extended vectors satisfy the binary-chain equation
        for (k, d) in ps.phases.iter().enumerate() {
            if (d.abs() - std::f64::consts::PI).abs() < 1e-6 {
                continue;
            }
            let b_full = extend_phase_shift_vector(&set, &ps.vectors[k], *d).unwrap();
            let r = bth_residual(&c, theta, *d, &b_full);
            assert!(r < 1e-8, "BthEq residual {r:.2e} at delta {d}");
        }
    }

    #[test]
    fn s_matrix_is_continuous_on_fine_grids() {
        let c = sample_comb_stream(0.5, 16, Boundary::Open, 21, 0).unwrap();
        let spacing = 1e-3;
        for k in 1..40 {
            let th = 0.05 + k as f64 * 0.07;
            let s1 = compute_smatrix(&c, th).unwrap();
            let s2 = compute_smatrix(&c, th + spacing).unwrap();
            let mut diff: f64 = 0.0;
            for i in 0..s1.s_tooth.len() {
                for j in 0..s1.s_tooth.len() {
                    diff = diff.max((s1.s_tooth[i][j] - s2.s_tooth[i][j]).norm());
                }
            }
            // derivative-scaled continuity bound
            assert!(diff < 10.0 * spacing / spacing.sqrt(), "jump {diff} at {th}");
        }
    }
}
