//! Iterative solvers for the five-point systems produced by the finite-volume assembly.

/// Rows of the form `diag[i] * x[i] - sum(a_nb * x[nb]) = rhs[i]` with at most four
/// neighbors per row.
#[derive(Clone, Debug, Default)]
pub struct FivePoint {
    pub diag: Vec<f64>,
    pub nbr: Vec<[(usize, f64); 4]>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iters: usize,
    pub rel_residual: f64,
}

impl FivePoint {
    pub fn with_capacity(n: usize) -> Self {
        FivePoint {
            diag: Vec::with_capacity(n),
            nbr: Vec::with_capacity(n),
            rhs: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Appends a row; unused neighbor slots point at the row itself with zero weight.
    pub fn push_row(&mut self, diag: f64, nbrs: &[(usize, f64)], rhs: f64) {
        let row = self.diag.len();
        let mut slots = [(row, 0.0); 4];
        slots[..nbrs.len()].copy_from_slice(nbrs);
        self.diag.push(diag);
        self.nbr.push(slots);
        self.rhs.push(rhs);
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = self.diag[i] * x[i];
            for &(j, a) in &self.nbr[i] {
                acc -= a * x[j];
            }
            *yi = acc;
        }
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) {
        self.apply(x, r);
        for (ri, bi) in r.iter_mut().zip(&self.rhs) {
            *ri = bi - *ri;
        }
    }

    /// Jacobi-preconditioned conjugate gradients. The matrix must be symmetric positive definite.
    pub fn solve_cg(&self, x: &mut [f64], rel_tol: f64, max_iters: usize) -> SolveStats {
        let n = self.len();
        let bnorm = norm(&self.rhs).max(f64::MIN_POSITIVE);
        let mut r = vec![0.0; n];
        self.residual(x, &mut r);
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let mut rel = norm(&r) / bnorm;
        let mut iters = 0;
        while rel > rel_tol && iters < max_iters {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                break;
            }
            let alpha = rz / pap;
            axpy(alpha, &p, x);
            axpy(-alpha, &ap, &mut r);
            for ((zi, ri), d) in z.iter_mut().zip(&r).zip(&self.diag) {
                *zi = ri / d;
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
            rel = norm(&r) / bnorm;
            iters += 1;
        }
        SolveStats {
            iters,
            rel_residual: rel,
        }
    }

    /// Jacobi-preconditioned BiCGSTAB for the nonsymmetric momentum systems.
    pub fn solve_bicgstab(&self, x: &mut [f64], rel_tol: f64, max_iters: usize) -> SolveStats {
        let n = self.len();
        let bnorm = norm(&self.rhs).max(f64::MIN_POSITIVE);
        let mut r = vec![0.0; n];
        self.residual(x, &mut r);
        let r0 = r.clone();
        let mut rel = norm(&r) / bnorm;
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut phat = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut shat = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut iters = 0;
        while rel > rel_tol && iters < max_iters {
            let rho_new = dot(&r0, &r);
            if rho_new == 0.0 || !rho_new.is_finite() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                phat[i] = p[i] / self.diag[i];
            }
            self.apply(&phat, &mut v);
            let r0v = dot(&r0, &v);
            if r0v == 0.0 || !r0v.is_finite() {
                break;
            }
            alpha = rho / r0v;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / bnorm <= rel_tol {
                axpy(alpha, &phat, x);
                iters += 1;
                rel = norm(&s) / bnorm;
                break;
            }
            for i in 0..n {
                shat[i] = s[i] / self.diag[i];
            }
            self.apply(&shat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 || !tt.is_finite() {
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * phat[i] + omega * shat[i];
                r[i] = s[i] - omega * t[i];
            }
            rel = norm(&r) / bnorm;
            iters += 1;
            if omega == 0.0 {
                break;
            }
        }
        SolveStats {
            iters,
            rel_residual: rel,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
