//! Periodic-grid spectral machinery on the box `[-L, L)^3`.
//!
//! Transforms are real-to-complex along x1 followed by complex transforms
//! along x2 and x3, with orthonormal scaling (`1/sqrt(n^3)` each way). The
//! half spectrum is stored x1-mode fastest: mode `(m1, m2, m3)` with
//! `m1 in 0..=n/2` lives at `m1 + nh * (m2 + n * m3)` where `nh = n/2 + 1`
//! and `m2, m3` are unsigned FFT indices.
//!
//! Derivatives use the wavenumber with the Nyquist entry set to zero; the
//! Leray projector, the pressure solve and the divergence all use the same
//! derivative symbol so they stay mutually consistent.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{det_sum, ScalarField, VectorField};

/// Half spectrum of a real field.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn scale(&mut self, s: f64) {
        self.data.par_iter_mut().for_each(|c| *c *= s);
    }

    pub fn add_assign(&mut self, other: &Spectrum) {
        self.data.par_iter_mut().zip(other.data.par_iter()).for_each(|(a, b)| *a += b);
    }

    pub fn sub(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            data: self.data.par_iter().zip(other.data.par_iter()).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

#[derive(Clone)]
pub struct Grid {
    n: usize,
    half_length: f64,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Derivative wavenumbers (Nyquist zeroed) along axis 1 (half) and axes 2, 3.
    kd1: Vec<f64>,
    kd: Vec<f64>,
    /// True wavenumbers, Nyquist kept at `-n/2 * k0`.
    kt1: Vec<f64>,
    kt: Vec<f64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n", &self.n).field("half_length", &self.half_length).finish()
    }
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Validation(format!("grid size n = {n} must be even and >= 8")));
        }
        if !(half_length > 0.0 && half_length.is_finite()) {
            return Err(Error::Validation(format!("half length L = {half_length} must be > 0")));
        }
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        let k0 = PI / half_length;
        let nh = n / 2 + 1;
        let signed = |i: usize| -> i64 {
            if i < n / 2 {
                i as i64
            } else {
                i as i64 - n as i64
            }
        };
        let nyq = (n / 2) as i64;
        let kd_of = |m: i64| if m.abs() == nyq { 0.0 } else { m as f64 * k0 };
        Ok(Self {
            n,
            half_length,
            r2c: rp.plan_fft_forward(n),
            c2r: rp.plan_fft_inverse(n),
            fwd: cp.plan_fft_forward(n),
            inv: cp.plan_fft_inverse(n),
            kd1: (0..nh).map(|i| kd_of(i as i64)).collect(),
            kd: (0..n).map(|i| kd_of(signed(i))).collect(),
            kt1: (0..nh).map(|i| i as f64 * k0).collect(),
            kt: (0..n).map(|i| signed(i) as f64 * k0).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    /// Fundamental wavenumber `pi / L`.
    pub fn k0(&self) -> f64 {
        PI / self.half_length
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectral_len(&self) -> usize {
        (self.n / 2 + 1) * self.n * self.n
    }

    /// Physical coordinate of grid index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.dx()
    }

    /// Sample `f(x1, x2, x3)` on the grid.
    pub fn sample<F>(&self, f: F) -> ScalarField
    where
        F: Fn(f64, f64, f64) -> f64 + Sync,
    {
        ScalarField::from_index_fn(self.n, |i, j, k| f(self.coord(i), self.coord(j), self.coord(k)))
    }

    /// Signed integer mode numbers of the half-spectrum index `s`.
    pub fn mode(&self, s: usize) -> [i64; 3] {
        let nh = self.n / 2 + 1;
        let n = self.n as i64;
        let m1 = (s % nh) as i64;
        let i2 = ((s / nh) % self.n) as i64;
        let i3 = (s / (nh * self.n)) as i64;
        let sg = |i: i64| if i < n / 2 { i } else { i - n };
        [m1, sg(i2), sg(i3)]
    }

    /// Derivative wavenumber vector of mode `s` (Nyquist components zero).
    #[inline]
    pub fn kd_vec(&self, s: usize) -> [f64; 3] {
        let nh = self.n / 2 + 1;
        [self.kd1[s % nh], self.kd[(s / nh) % self.n], self.kd[s / (nh * self.n)]]
    }

    /// True wavenumber vector of mode `s`.
    #[inline]
    pub fn k_vec(&self, s: usize) -> [f64; 3] {
        let nh = self.n / 2 + 1;
        [self.kt1[s % nh], self.kt[(s / nh) % self.n], self.kt[s / (nh * self.n)]]
    }

    /// Multiplicity of a half-spectrum entry in the full spectrum.
    #[inline]
    pub fn hermitian_weight(&self, s: usize) -> f64 {
        let m1 = s % (self.n / 2 + 1);
        if m1 == 0 || m1 == self.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    fn norm(&self) -> f64 {
        1.0 / (self.len() as f64).sqrt()
    }

    pub fn forward(&self, f: &ScalarField) -> Spectrum {
        assert_eq!(f.n(), self.n, "field/grid size mismatch");
        let n = self.n;
        let nh = n / 2 + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); self.spectral_len()];

        data.par_chunks_mut(nh).zip(f.as_slice().par_chunks(n)).for_each_init(
            || (self.r2c.make_input_vec(), self.r2c.make_scratch_vec()),
            |(buf, scratch), (out, line)| {
                buf.copy_from_slice(line);
                self.r2c.process_with_scratch(buf, out, scratch).expect("r2c length mismatch");
            },
        );
        self.complex_pass(&mut data, &self.fwd);
        let s = self.norm();
        data.par_iter_mut().for_each(|c| *c *= s);
        Spectrum { data }
    }

    pub fn inverse(&self, spec: &Spectrum) -> ScalarField {
        let n = self.n;
        let nh = n / 2 + 1;
        let mut data = spec.data.clone();
        self.complex_pass(&mut data, &self.inv);
        let s = self.norm();
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(n).zip(data.par_chunks(nh)).for_each_init(
            || (self.c2r.make_input_vec(), self.c2r.make_scratch_vec()),
            |(buf, scratch), (line, sp)| {
                buf.copy_from_slice(sp);
                buf[0].im = 0.0;
                buf[nh - 1].im = 0.0;
                self.c2r.process_with_scratch(buf, line, scratch).expect("c2r length mismatch");
                for v in line.iter_mut() {
                    *v *= s;
                }
            },
        );
        ScalarField::from_vec(n, out)
    }

    /// Complex transforms along axes 2 and 3 (order is irrelevant: they commute).
    fn complex_pass(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let nh = n / 2 + 1;
        let slab = nh * n;

        let zero = Complex64::new(0.0, 0.0);
        let scratch_len = plan.get_inplace_scratch_len();
        data.par_chunks_mut(slab).for_each_init(
            || (vec![zero; slab], vec![zero; scratch_len]),
            |(buf, scratch), sl| {
                for i2 in 0..n {
                    for m1 in 0..nh {
                        buf[m1 * n + i2] = sl[m1 + nh * i2];
                    }
                }
                plan.process_with_scratch(buf, scratch);
                for i2 in 0..n {
                    for m1 in 0..nh {
                        sl[m1 + nh * i2] = buf[m1 * n + i2];
                    }
                }
            },
        );

        let mut cols = vec![zero; data.len()];
        {
            let src: &[Complex64] = data;
            cols.par_chunks_mut(n * nh).enumerate().for_each_init(
                || vec![zero; scratch_len],
                |scratch, (block, c)| {
                    for i3 in 0..n {
                        let row = &src[slab * i3 + block * nh..slab * i3 + block * nh + nh];
                        for (j, v) in row.iter().enumerate() {
                            c[j * n + i3] = *v;
                        }
                    }
                    plan.process_with_scratch(c, scratch);
                },
            );
        }
        data.par_chunks_mut(slab).enumerate().for_each(|(i3, sl)| {
            for (col, v) in sl.iter_mut().enumerate() {
                *v = cols[col * n + i3];
            }
        });
    }

    pub fn zero_spectrum(&self) -> Spectrum {
        Spectrum { data: vec![Complex64::new(0.0, 0.0); self.spectral_len()] }
    }

    /// Apply a per-mode multiplier `f(s)`.
    pub fn map_modes<F>(&self, spec: &Spectrum, f: F) -> Spectrum
    where
        F: Fn(usize, Complex64) -> Complex64 + Sync,
    {
        Spectrum { data: spec.data.par_iter().enumerate().map(|(s, &c)| f(s, c)).collect() }
    }

    /// Spectral `d/dx_axis` (axis in 0..3).
    pub fn spectral_derivative(&self, spec: &Spectrum, axis: usize) -> Spectrum {
        self.map_modes(spec, |s, c| c * Complex64::new(0.0, self.kd_vec(s)[axis]))
    }

    /// Mixed partial `d^alpha` in spectral space.
    pub fn partial(&self, spec: &Spectrum, alpha: [u32; 3]) -> Spectrum {
        let order: u32 = alpha.iter().sum();
        let unit = Complex64::new(0.0, 1.0).powu(order);
        self.map_modes(spec, |s, c| {
            let k = self.kd_vec(s);
            let mut f = 1.0;
            for ax in 0..3 {
                f *= k[ax].powi(alpha[ax] as i32);
            }
            c * unit * f
        })
    }

    /// Spectral derivative along `axis` (0-based: 0 = x1, 1 = x2, 2 = x3).
    pub fn derivative(&self, f: &ScalarField, axis: usize) -> ScalarField {
        self.inverse(&self.spectral_derivative(&self.forward(f), axis))
    }

    pub fn gradient(&self, f: &ScalarField) -> VectorField {
        let spec = self.forward(f);
        let [a, b, c] = [0, 1, 2].map(|ax| self.inverse(&self.spectral_derivative(&spec, ax)));
        VectorField::new(a, b, c)
    }

    pub fn divergence(&self, v: &VectorField) -> ScalarField {
        let specs = self.forward_vec(v);
        self.inverse(&self.spectral_divergence(&specs))
    }

    pub fn spectral_divergence(&self, v: &[Spectrum; 3]) -> Spectrum {
        Spectrum {
            data: (0..self.spectral_len())
                .into_par_iter()
                .map(|s| {
                    let k = self.kd_vec(s);
                    Complex64::new(0.0, 1.0)
                        * (k[0] * v[0].data[s] + k[1] * v[1].data[s] + k[2] * v[2].data[s])
                })
                .collect(),
        }
    }

    pub fn forward_vec(&self, v: &VectorField) -> [Spectrum; 3] {
        [0, 1, 2].map(|c| self.forward(&v.comps[c]))
    }

    pub fn inverse_vec(&self, v: &[Spectrum; 3]) -> VectorField {
        let [a, b, c] = [0, 1, 2].map(|i| self.inverse(&v[i]));
        VectorField::new(a, b, c)
    }

    pub fn spectral_curl(&self, v: &[Spectrum; 3]) -> [Spectrum; 3] {
        let i = Complex64::new(0.0, 1.0);
        let comp = |a: usize, b: usize| {
            // (curl v)_c = d_a v_b - d_b v_a
            Spectrum {
                data: (0..self.spectral_len())
                    .into_par_iter()
                    .map(|s| {
                        let k = self.kd_vec(s);
                        i * (k[a] * v[b].data[s] - k[b] * v[a].data[s])
                    })
                    .collect(),
            }
        };
        [comp(1, 2), comp(2, 0), comp(0, 1)]
    }

    pub fn curl(&self, v: &VectorField) -> VectorField {
        self.inverse_vec(&self.spectral_curl(&self.forward_vec(v)))
    }

    /// Project onto divergence-free fields, `P = I - k k^T / |k|^2` per mode;
    /// the mean mode passes through unchanged.
    pub fn spectral_leray(&self, v: &mut [Spectrum; 3]) {
        let [a, b, c] = v;
        a.data
            .par_iter_mut()
            .zip(b.data.par_iter_mut())
            .zip(c.data.par_iter_mut())
            .enumerate()
            .for_each(|(s, ((x, y), z))| {
                let k = self.kd_vec(s);
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 == 0.0 {
                    return;
                }
                let kv = (k[0] * *x + k[1] * *y + k[2] * *z) / k2;
                *x -= kv * k[0];
                *y -= kv * k[1];
                *z -= kv * k[2];
            });
    }

    pub fn leray_project(&self, v: &VectorField) -> VectorField {
        let mut specs = self.forward_vec(v);
        self.spectral_leray(&mut specs);
        self.inverse_vec(&specs)
    }

    /// Zero-mean `p` with `|k|^2 p = -sum_jk k_j k_k T_jk`, where `T_jk` is
    /// the spectrum of `zm^j zp^k`.
    pub fn solve_pressure(&self, zp: &VectorField, zm: &VectorField) -> ScalarField {
        let mut rhs = self.zero_spectrum();
        for j in 0..3 {
            for k in 0..3 {
                let prod = zm.comps[j].zip_map(&zp.comps[k], |a, b| a * b);
                let t = self.forward(&prod);
                rhs.data.par_iter_mut().zip(t.data.par_iter()).enumerate().for_each(|(s, (r, tv))| {
                    let kv = self.kd_vec(s);
                    *r -= kv[j] * kv[k] * tv;
                });
            }
        }
        self.inverse(&self.inverse_laplacian(&rhs))
    }

    /// Solve `-Delta p = rhs` in spectral space with zero mean.
    pub fn inverse_laplacian(&self, rhs: &Spectrum) -> Spectrum {
        self.map_modes(rhs, |s, c| {
            let k = self.kd_vec(s);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c / k2
            }
        })
    }

    /// True if mode `s` survives 2/3-rule truncation.
    #[inline]
    pub fn dealias_keep(&self, s: usize) -> bool {
        let cut = (self.n / 3) as i64;
        self.mode(s).iter().all(|m| m.abs() <= cut)
    }

    pub fn dealias(&self, spec: &mut Spectrum) {
        spec.data.par_iter_mut().enumerate().for_each(|(s, c)| {
            if !self.dealias_keep(s) {
                *c = Complex64::new(0.0, 0.0);
            }
        });
    }

    /// Rectangle-rule integral over the box.
    pub fn integrate_box(&self, f: &ScalarField) -> f64 {
        f.sum() * self.dx().powi(3)
    }

    /// `integral |f|^2 dx` evaluated from the spectrum via Parseval.
    pub fn spectral_mass(&self, spec: &Spectrum) -> f64 {
        self.spectral_weighted_mass(spec, |_| 1.0)
    }

    /// `sum_k w(k) |f_k|^2 * dx^3` over the full (Hermitian-completed) spectrum.
    pub fn spectral_weighted_mass<W>(&self, spec: &Spectrum, w: W) -> f64
    where
        W: Fn(usize) -> f64 + Sync,
    {
        det_sum(spec.data.len(), |s| self.hermitian_weight(s) * w(s) * spec.data[s].norm_sqr())
            * self.dx().powi(3)
    }

    /// Real part of `sum_k w(k) conj(a_k) b_k * dx^3` over the full spectrum.
    pub fn spectral_inner<W>(&self, a: &Spectrum, b: &Spectrum, w: W) -> f64
    where
        W: Fn(usize) -> f64 + Sync,
    {
        det_sum(a.data.len(), |s| {
            self.hermitian_weight(s) * w(s) * (a.data[s].conj() * b.data[s]).re
        }) * self.dx().powi(3)
    }
}
