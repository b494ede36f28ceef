//! Real symmetric tridiagonal matrix with an optional periodic corner
//! entry: eigenvalue counting by LDL^T inertia, eigenvalues by bisection,
//! eigenvectors by inverse iteration.
//!
//! The bordered elimination keeps the corner column as a running scalar,
//! so counting the eigenvalues below a probe costs O(n) even in the
//! periodic case. By Sylvester's law the number of negative pivots of
//! A - lambda*I equals the number of eigenvalues below lambda.

/// `A[i][i] = diag[i]`, `A[i][i+1] = A[i+1][i] = off[i]`,
/// `A[0][n-1] = A[n-1][0] = corner` (0 for open chains).
#[derive(Debug, Clone)]
pub struct SymTridiagPeriodic {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub corner: f64,
}

impl SymTridiagPeriodic {
    pub fn new(diag: Vec<f64>, off: Vec<f64>, corner: f64) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length");
        assert!(diag.len() >= 2 || corner == 0.0, "corner needs n >= 2");
        Self { diag, off, corner }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = self.diag[i] * x[i];
            if i > 0 {
                y[i] += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                y[i] += self.off[i] * x[i + 1];
            }
        }
        if self.corner != 0.0 && n >= 2 {
            y[0] += self.corner * x[n - 1];
            y[n - 1] += self.corner * x[0];
        }
        y
    }

    pub fn residual_inf(&self, lambda: f64, x: &[f64]) -> f64 {
        self.matvec(x)
            .iter()
            .zip(x)
            .map(|(hx, xi)| (hx - lambda * xi).abs())
            .fold(0.0, f64::max)
    }

    /// Interval guaranteed to contain the spectrum (Gershgorin).
    pub fn bounds(&self) -> (f64, f64) {
        let n = self.n();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            if (i == 0 || i == n - 1) && n >= 2 {
                r += self.corner.abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `lambda`.
    pub fn count_below(&self, lambda: f64) -> usize {
        let n = self.n();
        if n == 0 {
            return 0;
        }
        if n == 1 {
            return usize::from(self.diag[0] < lambda);
        }
        let off_max = self
            .off
            .iter()
            .fold(self.corner.abs(), |m, v| m.max(v.abs()))
            .max(1.0);
        // LAPACK-style pivot floor: tiny pivots become -pivmin so the
        // count stays deterministic and e^2/pivot cannot overflow
        let pivmin = f64::MIN_POSITIVE.sqrt() * off_max * off_max;
        let guard = |q: f64| if q.abs() < pivmin { -pivmin } else { q };

        let mut neg = 0usize;
        let mut q = self.diag[0] - lambda; // active pivot
        let mut w = self.corner; // fill of the border column in the active row
        let mut last = self.diag[n - 1] - lambda; // Schur complement of A[n-1][n-1]
        for i in 0..n - 1 {
            let p = guard(q);
            if p < 0.0 {
                neg += 1;
            }
            if i == n - 2 {
                let coup = self.off[i] + w;
                last -= coup * coup / p;
            } else {
                let e = self.off[i];
                last -= w * w / p;
                let w_next = -e * w / p;
                q = (self.diag[i + 1] - lambda) - e * e / p;
                w = w_next;
            }
        }
        if last < 0.0 {
            neg += 1;
        }
        neg
    }

    /// All eigenvalues, ascending, repeated by multiplicity, to absolute
    /// accuracy `tol` (clamped to a spectrum-scaled floor).
    pub fn eigenvalues(&self, tol: f64) -> Vec<f64> {
        let n = self.n();
        if n == 0 {
            return Vec::new();
        }
        let (lo, hi) = self.bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let tol = tol.max(8.0 * f64::EPSILON * scale);
        let lo = lo - scale * 1e-12 - tol;
        let hi = hi + scale * 1e-12 + tol;
        let mut out = Vec::with_capacity(n);
        // interval stack: (a, b, count_below(a), count_below(b))
        let mut stack = vec![(lo, hi, self.count_below(lo), self.count_below(hi))];
        while let Some((a, b, ca, cb)) = stack.pop() {
            if cb == ca {
                continue;
            }
            if b - a <= tol {
                let mid = 0.5 * (a + b);
                for _ in ca..cb {
                    out.push(mid);
                }
                continue;
            }
            let m = 0.5 * (a + b);
            // clamp to the bracket invariant: raw counts can wiggle by
            // one in a ~1e-9 window around exactly degenerate doublets
            // of the periodic case
            let cm = self.count_below(m).clamp(ca, cb);
            stack.push((a, m, ca, cm));
            stack.push((m, b, cm, cb));
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out
    }

    /// Eigenvector for the eigenvalue nearest `lambda` by inverse
    /// iteration, orthogonalized against `prev` (members of the same
    /// degenerate cluster). Returns a unit vector with its largest
    /// component positive.
    pub fn eigenvector(&self, lambda: f64, prev: &[Vec<f64>]) -> Vec<f64> {
        let n = self.n();
        let (lo, hi) = self.bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for (k, jit) in [0.0, 1e-12, -1e-12, 1e-10].iter().enumerate() {
            let shift = lambda + jit * scale;
            let Some(lu) = TriLU::factor(self, shift) else {
                continue;
            };
            let mut x = pseudo_random_unit(n, 0x9e3779b97f4a7c15 ^ (k as u64) << 32);
            orthogonalize(&mut x, prev);
            let mut ok = false;
            for _ in 0..5 {
                let mut y = lu.solve(&x);
                orthogonalize(&mut y, prev);
                let nrm = norm(&y);
                if !nrm.is_finite() || nrm == 0.0 {
                    break;
                }
                for v in &mut y {
                    *v /= nrm;
                }
                x = y;
                if self.residual_inf(lambda, &x) < 1e-11 * scale {
                    ok = true;
                    break;
                }
            }
            let r = self.residual_inf(lambda, &x);
            if best.as_ref().map_or(true, |(rb, _)| r < *rb) {
                best = Some((r, x));
            }
            if ok {
                break;
            }
        }
        let (_, mut x) = best.expect("inverse iteration failed to produce a vector");
        fix_sign(&mut x);
        x
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn orthogonalize(x: &mut [f64], prev: &[Vec<f64>]) {
    for p in prev {
        let d: f64 = x.iter().zip(p).map(|(a, b)| a * b).sum();
        for (xi, pi) in x.iter_mut().zip(p) {
            *xi -= d * pi;
        }
    }
}

fn fix_sign(x: &mut [f64]) {
    let mut imax = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[imax].abs() {
            imax = i;
        }
    }
    if x[imax] < 0.0 {
        for v in x.iter_mut() {
            *v = -*v;
        }
    }
}

fn pseudo_random_unit(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed | 1;
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            // splitmix64 step
            s = s.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z as f64 / u64::MAX as f64) - 0.5
        })
        .collect();
    let nrm = norm(&x);
    for v in &mut x {
        *v /= nrm;
    }
    x
}

/// Partial-pivoting LU of `T - shift*I` for the tridiagonal part, with
/// the corner handled by a rank-2 Woodbury update at solve time.
struct TriLU {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swap: Vec<bool>,
    /// cached T^{-1} e_0 and T^{-1} e_{n-1} plus the 2x2 capacitance
    /// inverse, present when corner != 0
    wood: Option<Wood>,
}

struct Wood {
    w0: Vec<f64>,
    w1: Vec<f64>,
    m: [f64; 4], // inverse of (C^{-1} + U^T T^{-1} U), row-major
}

impl TriLU {
    fn factor(a: &SymTridiagPeriodic, shift: f64) -> Option<Self> {
        let n = a.n();
        let mut d: Vec<f64> = a.diag.iter().map(|v| v - shift).collect();
        let mut dl = a.off.clone();
        let mut du = a.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swap = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
                if i + 2 < n {
                    du2[i] = 0.0;
                }
            } else {
                swap[i] = true;
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let tmp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = tmp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
            }
        }
        if d[n - 1] == 0.0 {
            return None;
        }
        let mut lu = Self {
            dl,
            d,
            du,
            du2,
            swap,
            wood: None,
        };
        if a.corner != 0.0 && n >= 2 {
            let mut e0 = vec![0.0; n];
            e0[0] = 1.0;
            let mut e1 = vec![0.0; n];
            e1[n - 1] = 1.0;
            let w0 = lu.solve_tri(&e0);
            let w1 = lu.solve_tri(&e1);
            let c = a.corner;
            // M = C^{-1} + U^T T^{-1} U  with U = [e0 e_{n-1}], C = [[0,c],[c,0]]
            let m00 = w0[0];
            let m01 = 1.0 / c + w1[0];
            let m10 = 1.0 / c + w0[n - 1];
            let m11 = w1[n - 1];
            let det = m00 * m11 - m01 * m10;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            lu.wood = Some(Wood {
                w0,
                w1,
                m: [m11 / det, -m01 / det, -m10 / det, m00 / det],
            });
        }
        Some(lu)
    }

    fn solve_tri(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if self.swap[i] {
                x.swap(i, i + 1);
            }
            let t = self.dl[i] * x[i];
            x[i + 1] -= t;
        }
        x[n - 1] /= self.d[n - 1];
        if n >= 2 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = self.solve_tri(b);
        if let Some(w) = &self.wood {
            let n = z.len();
            let s0 = z[0];
            let s1 = z[n - 1];
            let y0 = w.m[0] * s0 + w.m[1] * s1;
            let y1 = w.m[2] * s0 + w.m[3] * s1;
            for i in 0..n {
                z[i] -= w.w0[i] * y0 + w.w1[i] * y1;
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn dense(a: &SymTridiagPeriodic) -> DMatrix<f64> {
        let n = a.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = a.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = a.off[i];
                m[(i + 1, i)] = a.off[i];
            }
        }
        if n >= 2 {
            m[(0, n - 1)] += a.corner;
            m[(n - 1, 0)] += a.corner;
        }
        m
    }

    fn random_matrix(n: usize, corner: bool, rng: &mut impl Rng) -> SymTridiagPeriodic {
        SymTridiagPeriodic::new(
            (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect(),
            (0..n - 1).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            if corner { rng.gen_range(-2.0..2.0) } else { 0.0 },
        )
    }

    #[test]
    fn eigenvalues_match_dense_oracle() {
        let mut rng = crate::rng::seed_rng(11);
        for &n in &[2usize, 3, 5, 17, 40] {
            for &corner in &[false, true] {
                let a = random_matrix(n, corner, &mut rng);
                let mine = a.eigenvalues(1e-13);
                let mut reference: Vec<f64> =
                    dense(&a).symmetric_eigenvalues().iter().copied().collect();
                reference.sort_by(|x, y| x.partial_cmp(y).unwrap());
                assert_eq!(mine.len(), n);
                for (m, r) in mine.iter().zip(&reference) {
                    assert_abs_diff_eq!(m, r, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn count_below_matches_dense_oracle() {
        let mut rng = crate::rng::seed_rng(5);
        for _ in 0..30 {
            let a = random_matrix(12, true, &mut rng);
            let evs = dense(&a).symmetric_eigenvalues();
            let probe = rng.gen_range(-6.0..6.0);
            let want = evs.iter().filter(|&&e| e < probe).count();
            assert_eq!(a.count_below(probe), want);
        }
    }

    #[test]
    fn eigenvectors_have_small_residual_and_are_orthonormal() {
        let mut rng = crate::rng::seed_rng(3);
        for &corner in &[false, true] {
            let a = random_matrix(24, corner, &mut rng);
            let evs = a.eigenvalues(1e-13);
            let mut vecs: Vec<Vec<f64>> = Vec::new();
            for (i, &l) in evs.iter().enumerate() {
                let cluster: Vec<Vec<f64>> = evs[..i]
                    .iter()
                    .zip(&vecs)
                    .filter(|(l2, _)| (l - **l2).abs() < 1e-8)
                    .map(|(_, v)| v.clone())
                    .collect();
                let v = a.eigenvector(l, &cluster);
                assert!(a.residual_inf(l, &v) < 1e-9, "residual too large");
                vecs.push(v);
            }
            for i in 0..vecs.len() {
                for j in 0..i {
                    let d: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                    assert!(
                        d.abs() < 1e-8,
                        "vectors {i},{j} not orthogonal: {d:.2e} (gap {:.2e})",
                        (evs[i] - evs[j]).abs()
                    );
                }
            }
        }
    }

    #[test]
    fn degenerate_periodic_free_chain() {
        // V=0 periodic chain: eigenvalues -2cos(2 pi k / n), doubly
        // degenerate; exact doublets limit the bisection accuracy to the
        // count-noise window (~1e-9) rather than the generic 1e-12
        let n = 8;
        let a = SymTridiagPeriodic::new(vec![0.0; n], vec![-1.0; n - 1], -1.0);
        let evs = a.eigenvalues(1e-13);
        assert_eq!(evs.len(), n);
        let mut want: Vec<f64> = (0..n)
            .map(|k| -2.0 * (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos())
            .collect();
        want.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (m, w) in evs.iter().zip(&want) {
            assert_abs_diff_eq!(m, w, epsilon = 5e-9);
        }
    }
}
