//! Periodic four-point Lagrange (cubic) interpolation on the grid.

use crate::field::ScalarField;

/// Cubic Lagrange weights for nodes `-1, 0, 1, 2` at fractional offset `t`.
#[inline]
pub fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// Stencil (indices and weights) along one periodic axis.
#[derive(Clone, Copy, Debug)]
pub struct AxisStencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
}

#[derive(Clone, Copy, Debug)]
pub struct PeriodicInterp {
    n: usize,
    half_length: f64,
    dx: f64,
}

impl PeriodicInterp {
    pub fn new(n: usize, half_length: f64) -> Self {
        Self { n, half_length, dx: 2.0 * half_length / n as f64 }
    }

    #[inline]
    pub fn axis(&self, x: f64) -> AxisStencil {
        let u = (x + self.half_length) / self.dx;
        let base = u.floor();
        let t = u - base;
        let n = self.n as i64;
        let b = base as i64;
        let idx = [-1i64, 0, 1, 2].map(|o| (b + o).rem_euclid(n) as usize);
        AxisStencil { idx, w: cubic_weights(t) }
    }

    /// Interpolate each field in `fields` at the point `p`, writing into `out`.
    pub fn eval_many(&self, fields: &[&ScalarField], p: [f64; 3], out: &mut [f64]) {
        let sx = self.axis(p[0]);
        let sy = self.axis(p[1]);
        let sz = self.axis(p[2]);
        let n = self.n;
        out[..fields.len()].iter_mut().for_each(|o| *o = 0.0);
        for c in 0..4 {
            for b in 0..4 {
                let wbc = sy.w[b] * sz.w[c];
                let row = n * (sy.idx[b] + n * sz.idx[c]);
                for a in 0..4 {
                    let w = sx.w[a] * wbc;
                    let i = sx.idx[a] + row;
                    for (o, f) in out.iter_mut().zip(fields) {
                        *o += w * f.as_slice()[i];
                    }
                }
            }
        }
    }

    pub fn eval(&self, f: &ScalarField, p: [f64; 3]) -> f64 {
        let mut out = [0.0];
        self.eval_many(&[f], p, &mut out);
        out[0]
    }

    /// Interpolate along the x3 column through grid point `(i1, i2)`.
    pub fn eval_column(&self, f: &ScalarField, i1: usize, i2: usize, x3: f64) -> f64 {
        let s = self.axis(x3);
        let n = self.n;
        (0..4).map(|c| s.w[c] * f.as_slice()[i1 + n * (i2 + n * s.idx[c])]).sum()
    }
}
