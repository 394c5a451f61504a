//! Per-branch squared-apparent-power flow constraints and their local
//! derivatives. Each branch end sees exactly four voltage variables, so
//! gradients and Hessians are computed as dense local blocks and scattered.

use num_complex::Complex64;

/// One end of a branch in polar coordinates:
/// `S = conj(y_own) v1^2 + conj(y_other) v1 v2 e^{j phi}` where v1 is the
/// magnitude at this end, v2 at the far end and `phi` the angle of this end
/// minus the far end.
pub struct PolarEnd {
    pub a2: f64,
    pub b2: f64,
    /// Re / Im of `conj(y_own) y_other^T ...` coupling term, see below.
    pub re: f64,
    pub im: f64,
    pub v1: f64,
    pub v2: f64,
}

impl PolarEnd {
    pub fn new(y_own: Complex64, y_other: Complex64, v1: f64, v2: f64, phi: f64) -> Self {
        let alpha = y_own.conj();
        let beta = y_other.conj();
        let gamma = alpha * beta.conj();
        let rot = Complex64::from_polar(1.0, -phi);
        let g = gamma * rot;
        PolarEnd {
            a2: alpha.norm_sqr(),
            b2: beta.norm_sqr(),
            re: g.re,
            im: g.im,
            v1,
            v2,
        }
    }

    /// |S|^2 at this end.
    pub fn value(&self) -> f64 {
        let (v1, v2) = (self.v1, self.v2);
        self.a2 * v1.powi(4) + self.b2 * v1 * v1 * v2 * v2 + 2.0 * v1.powi(3) * v2 * self.re
    }

    /// (d/dv1, d/dv2, d/dphi) of |S|^2.
    pub fn grad(&self) -> (f64, f64, f64) {
        let (v1, v2, r, i) = (self.v1, self.v2, self.re, self.im);
        let dv1 = 4.0 * self.a2 * v1.powi(3) + 2.0 * self.b2 * v1 * v2 * v2 + 6.0 * v1 * v1 * v2 * r;
        let dv2 = 2.0 * self.b2 * v1 * v1 * v2 + 2.0 * v1.powi(3) * r;
        let dphi = 2.0 * v1.powi(3) * v2 * i;
        (dv1, dv2, dphi)
    }

    /// Symmetric local Hessian over (v1, v2, phi).
    pub fn hess(&self) -> [[f64; 3]; 3] {
        let (v1, v2, r, i) = (self.v1, self.v2, self.re, self.im);
        let h11 = 12.0 * self.a2 * v1 * v1 + 2.0 * self.b2 * v2 * v2 + 12.0 * v1 * v2 * r;
        let h12 = 4.0 * self.b2 * v1 * v2 + 6.0 * v1 * v1 * r;
        let h13 = 6.0 * v1 * v1 * v2 * i;
        let h22 = 2.0 * self.b2 * v1 * v1;
        let h23 = 2.0 * v1.powi(3) * i;
        let h33 = -2.0 * v1.powi(3) * v2 * r;
        [[h11, h12, h13], [h12, h22, h23], [h13, h23, h33]]
    }
}

/// One end of a branch in Cartesian coordinates. The flow is
/// `S = conj(y_own) |V1|^2 + conj(y_other) V1 conj(V2)`; with
/// `u = (x1, y1, x2, y2)` the first derivatives are linear and the second
/// derivatives constant, so `|S|^2` derivatives follow from
/// `d|S|^2 = 2 Re(conj(S) dS)`.
pub struct CartEnd {
    s: Complex64,
    /// dS/du for u = (x1, y1, x2, y2).
    ds: [Complex64; 4],
    alpha: Complex64,
    beta: Complex64,
}

impl CartEnd {
    pub fn new(y_own: Complex64, y_other: Complex64, v1: Complex64, v2: Complex64) -> Self {
        let alpha = y_own.conj();
        let beta = y_other.conj();
        let s = alpha * v1.norm_sqr() + beta * v1 * v2.conj();
        let ds = [
            alpha * 2.0 * v1.re + beta * v2.conj(),
            alpha * 2.0 * v1.im + beta * Complex64::I * v2.conj(),
            beta * v1,
            beta * v1 * (-Complex64::I),
        ];
        CartEnd { s, ds, alpha, beta }
    }

    pub fn value(&self) -> f64 {
        self.s.norm_sqr()
    }

    /// Gradient of |S|^2 over (x1, y1, x2, y2).
    pub fn grad(&self) -> [f64; 4] {
        let mut g = [0.0; 4];
        for (gi, dsi) in g.iter_mut().zip(&self.ds) {
            *gi = 2.0 * (self.s.conj() * dsi).re;
        }
        g
    }

    /// Symmetric local Hessian over (x1, y1, x2, y2).
    pub fn hess(&self) -> [[f64; 4]; 4] {
        // constant second derivatives of S: only (x1,x1), (y1,y1) from the
        // |V1|^2 term and the (1,2)-block from the bilinear term
        let mut h = [[0.0; 4]; 4];
        let sc = self.s.conj();
        let d2 = |u: usize, v: usize| -> Complex64 {
            match (u.min(v), u.max(v)) {
                (0, 0) | (1, 1) => 2.0 * self.alpha,
                (0, 2) => self.beta,
                (0, 3) => self.beta * (-Complex64::I),
                (1, 2) => self.beta * Complex64::I,
                (1, 3) => self.beta,
                _ => Complex64::ZERO,
            }
        };
        for u in 0..4 {
            for v in u..4 {
                let val = 2.0 * (sc * d2(u, v) + self.ds[u] * self.ds[v].conj()).re;
                h[u][v] = val;
                h[v][u] = val;
            }
        }
        h
    }
}
