//! Characteristic geometry of the two wave families: optical functions
//! `x_i^+-` transported by `L+- = d_t + Z+- . grad`, the wrapped labels `u+-`,
//! the weights `<w+->`, `<wbar+->`, and Lagrangian flow maps `psi+-`.
//!
//! Optical functions are stored as periodic residuals,
//! `x_i^+- = x_i -+ delta_i3 t + phi_i^+-`, with
//! `d_t phi_i + Z . grad phi_i = -z^i`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{det_sum, ScalarField, VectorField};
use crate::interp::PeriodicInterp;
use crate::mhd::{ElsasserState, Species};
use crate::spectral::Grid;

/// Default weight offset `R`.
pub const DEFAULT_R: f64 = 100.0;

/// Reduce `x` modulo `2L` into `(-L, L]`.
#[inline]
pub fn wrap_u(x: f64, half_length: f64) -> f64 {
    half_length - (half_length - x).rem_euclid(2.0 * half_length)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelFields {
    pub t: f64,
    pub r: f64,
    /// `phi[s][i]`, species index `s` as in [`Species::index`].
    pub phi: [[ScalarField; 3]; 2],
    pub u: [ScalarField; 2],
    pub w: [ScalarField; 2],
    pub wbar: [ScalarField; 2],
}

impl LabelFields {
    /// Labels at `t = 0`: `x^+- = x`.
    pub fn initial(grid: &Grid, r: f64) -> Self {
        let n = grid.n();
        let z = || [ScalarField::zeros(n), ScalarField::zeros(n), ScalarField::zeros(n)];
        let mut l = Self {
            t: 0.0,
            r,
            phi: [z(), z()],
            u: [ScalarField::zeros(n), ScalarField::zeros(n)],
            w: [ScalarField::zeros(n), ScalarField::zeros(n)],
            wbar: [ScalarField::zeros(n), ScalarField::zeros(n)],
        };
        l.compute_weights(grid, r);
        l
    }

    pub fn phi(&self, s: Species) -> &[ScalarField; 3] {
        &self.phi[s.index()]
    }

    pub fn u(&self, s: Species) -> &ScalarField {
        &self.u[s.index()]
    }

    pub fn w(&self, s: Species) -> &ScalarField {
        &self.w[s.index()]
    }

    pub fn wbar(&self, s: Species) -> &ScalarField {
        &self.wbar[s.index()]
    }

    /// Secular part of `x_3^+-`: `-t` for plus, `+t` for minus.
    pub fn drift(&self, s: Species) -> f64 {
        -s.sign() * self.t
    }

    /// The optical function `x_i^+-` (axis `i` in `0..3`), unwrapped.
    pub fn x_label(&self, grid: &Grid, s: Species, i: usize) -> ScalarField {
        let n = grid.n();
        let shift = if i == 2 { self.drift(s) } else { 0.0 };
        ScalarField::from_index_fn(n, |i1, i2, i3| {
            let c = [i1, i2, i3][i];
            grid.coord(c) + shift + self.phi[s.index()][i].at(i1, i2, i3)
        })
    }

    /// `u+-` as `x_3^+-` reduced into `(-L, L]`.
    pub fn wrap_u(&self, grid: &Grid) -> [ScalarField; 2] {
        let l = grid.half_length();
        Species::BOTH.map(|s| self.x_label(grid, s, 2).map(|x| wrap_u(x, l)))
    }

    /// Recompute `u`, `<w>` and `<wbar>` with offset `r`.
    pub fn compute_weights(&mut self, grid: &Grid, r: f64) {
        self.r = r;
        let l = grid.half_length();
        let r2 = r * r;
        for s in Species::BOTH {
            let x1 = self.x_label(grid, s, 0);
            let x2 = self.x_label(grid, s, 1);
            let x3 = self.x_label(grid, s, 2);
            let u = x3.map(|x| wrap_u(x, l));
            let base = x1.zip_map(&x2, |a, b| r2 + a * a + b * b);
            self.w[s.index()] = base.zip_map(&u, |b, u| (b + u * u).sqrt());
            self.wbar[s.index()] = base.zip_map(&x3, |b, x| (b + x * x).sqrt());
            self.u[s.index()] = u;
        }
    }

    /// Root `X3` on the column `(i1, i2)` of `u+-(X3) = a`. Returns
    /// `NotMonotone` if `x_3^+-` is not strictly increasing along the column.
    pub fn level_set_x3(&self, grid: &Grid, s: Species, a: f64, i1: usize, i2: usize) -> Result<f64> {
        level_set_column(grid, &self.phi[s.index()][2], self.drift(s), a, i1, i2)
    }
}

/// Solve `x3 + shift + phi3(x1, x2, x3) = a (mod 2L)` on the column `(i1, i2)`
/// for `x3` in `[-L, L)`, by bisection on the cubic interpolant.
pub fn level_set_column(grid: &Grid, phi3: &ScalarField, shift: f64, a: f64, i1: usize, i2: usize) -> Result<f64> {
    let n = grid.n();
    let l = grid.half_length();
    let period = 2.0 * l;
    let h: Vec<f64> = (0..n).map(|k| grid.coord(k) + shift + phi3.at(i1, i2, k)).collect();
    for k in 0..n {
        let next = if k + 1 < n { h[k + 1] } else { h[0] + period };
        if next <= h[k] {
            return Err(Error::NotMonotone { i1, i2 });
        }
    }
    let target = h[0] + (a - h[0]).rem_euclid(period);
    let k = h.partition_point(|&v| v <= target).saturating_sub(1);
    let ip = PeriodicInterp::new(n, l);
    let g = |x: f64| x + shift + ip.eval_column(phi3, i1, i2, x) - target;
    let mut lo = grid.coord(k);
    let mut hi = lo + grid.dx();
    let mut glo = g(lo);
    if glo == 0.0 {
        return Ok(lo);
    }
    while hi - lo > 1e-13 * l {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            lo = mid;
            break;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(if x >= l { x - period } else { x })
}

/// Field of one species linearly interpolated in time between two states.
struct TimeSlab<'a> {
    ip: PeriodicInterp,
    start: [&'a ScalarField; 3],
    mid: [ScalarField; 3],
    end: [&'a ScalarField; 3],
}

impl<'a> TimeSlab<'a> {
    fn new(grid: &Grid, a: &'a VectorField, b: &'a VectorField) -> Self {
        let mid = [0, 1, 2].map(|c| a.comps[c].zip_map(&b.comps[c], |x, y| 0.5 * (x + y)));
        Self {
            ip: PeriodicInterp::new(grid.n(), grid.half_length()),
            start: [&a.comps[0], &a.comps[1], &a.comps[2]],
            mid,
            end: [&b.comps[0], &b.comps[1], &b.comps[2]],
        }
    }

    /// `stage` 0, 1, 2 for the start, middle and end of the interval.
    fn eval(&self, stage: usize, p: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        match stage {
            0 => self.ip.eval_many(&self.start, p, &mut out),
            1 => self.ip.eval_many(&[&self.mid[0], &self.mid[1], &self.mid[2]], p, &mut out),
            _ => self.ip.eval_many(&self.end, p, &mut out),
        }
        out
    }
}

#[inline]
fn add(a: [f64; 3], s: f64, b: [f64; 3]) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Advance the labels from `s0.t` to `s1.t` by semi-Lagrangian transport:
/// each grid point is traced back along `Z+-` with RK4, the old residual is
/// interpolated at the foot point, and the source `-z^i` is integrated along
/// the path.
pub fn advect_labels(grid: &Grid, labels: &LabelFields, s0: &ElsasserState, s1: &ElsasserState) -> LabelFields {
    let h = s1.t - s0.t;
    let n = grid.n();
    let ip = PeriodicInterp::new(n, grid.half_length());
    let mut out = labels.clone();
    out.t = s1.t;
    for s in Species::BOTH {
        let slab = TimeSlab::new(grid, s0.z(s), s1.z(s));
        let b3 = s.sign();
        let old = &labels.phi[s.index()];
        let old_refs = [&old[0], &old[1], &old[2]];
        let vals: Vec<[f64; 3]> = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let (i1, i2, i3) = (idx % n, (idx / n) % n, idx / (n * n));
                let x = [grid.coord(i1), grid.coord(i2), grid.coord(i3)];
                let vel = |z: [f64; 3]| [z[0], z[1], z[2] + b3];
                let z1 = slab.eval(2, x);
                let z2 = slab.eval(1, add(x, -0.5 * h, vel(z1)));
                let z3 = slab.eval(1, add(x, -0.5 * h, vel(z2)));
                let z4 = slab.eval(0, add(x, -h, vel(z3)));
                let mut sum = [0.0; 3];
                for (zk, wk) in [(z1, 1.0), (z2, 2.0), (z3, 2.0), (z4, 1.0)] {
                    sum = add(sum, wk, zk);
                }
                let foot = add(x, -h / 6.0, [sum[0], sum[1], sum[2] + 6.0 * b3]);
                let mut prev = [0.0; 3];
                ip.eval_many(&old_refs, foot, &mut prev);
                add(prev, -h / 6.0, sum)
            })
            .collect();
        out.phi[s.index()] = [0, 1, 2].map(|c| ScalarField::from_vec(n, vals.iter().map(|v| v[c]).collect()));
    }
    out.compute_weights(grid, labels.r);
    out
}

/// Separation of the two label fields on the slab `|x3| <= L/3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationRecord {
    pub min_abs_diff: f64,
    pub max_abs_diff: f64,
    pub min_weight_product: f64,
}

pub fn separation_metrics(grid: &Grid, labels: &LabelFields) -> Result<SeparationRecord> {
    let n = grid.n();
    let l = grid.half_length();
    let rows: Vec<usize> = (0..n).filter(|&k| grid.coord(k).abs() <= l / 3.0).collect();
    if rows.is_empty() {
        return Err(Error::RegionEmpty);
    }
    let (up, um) = (labels.u(Species::Plus), labels.u(Species::Minus));
    let (wp, wm) = (labels.w(Species::Plus), labels.w(Species::Minus));
    let mut rec = SeparationRecord { min_abs_diff: f64::INFINITY, max_abs_diff: 0.0, min_weight_product: f64::INFINITY };
    for &k in &rows {
        for i2 in 0..n {
            for i1 in 0..n {
                let d = (um.at(i1, i2, k) - up.at(i1, i2, k)).abs();
                rec.min_abs_diff = rec.min_abs_diff.min(d);
                rec.max_abs_diff = rec.max_abs_diff.max(d);
                rec.min_weight_product = rec.min_weight_product.min(wp.at(i1, i2, k) * wm.at(i1, i2, k));
            }
        }
    }
    Ok(rec)
}

type Mat3 = [[f64; 3]; 3];

/// Lagrangian markers `psi+-(t, y)` on a periodic seed lattice, together with
/// the tangent maps `d psi / d y` integrated along each trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowMapState {
    pub t: f64,
    /// Lattice points per axis.
    pub m: usize,
    pub half_length: f64,
    pub seeds: Vec<[f64; 3]>,
    pub psi: [Vec<[f64; 3]>; 2],
    pub tangent: [Vec<Mat3>; 2],
    /// `max |d psi / d y - I|` (entrywise) from centered differences on the lattice.
    pub jacobian_deviation: f64,
}

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl FlowMapState {
    /// Markers at their seeds on an `m^3` lattice (`m` defaults to `n / 2`).
    pub fn new(grid: &Grid, m: usize) -> Self {
        let l = grid.half_length();
        let dy = 2.0 * l / m as f64;
        let seeds: Vec<[f64; 3]> = (0..m * m * m)
            .map(|j| [j % m, (j / m) % m, j / (m * m)].map(|c| -l + c as f64 * dy))
            .collect();
        Self {
            t: 0.0,
            m,
            half_length: l,
            psi: [seeds.clone(), seeds.clone()],
            tangent: [vec![IDENTITY; seeds.len()], vec![IDENTITY; seeds.len()]],
            seeds,
            jacobian_deviation: 0.0,
        }
    }

    pub fn psi(&self, s: Species) -> &[[f64; 3]] {
        &self.psi[s.index()]
    }

    /// `max |det(d psi / d y) - 1|` from the integrated tangent maps.
    pub fn det_deviation(&self) -> f64 {
        self.tangent.iter().flatten().map(|j| (det3(j) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Lattice finite-difference Jacobian `d psi / d y` at marker `j`.
    pub fn fd_jacobian(&self, s: Species, j: usize) -> Mat3 {
        let m = self.m;
        let dy = 2.0 * self.half_length / m as f64;
        let c = [j % m, (j / m) % m, j / (m * m)];
        let psi = &self.psi[s.index()];
        let disp = |idx: [usize; 3]| {
            let k = idx[0] + m * (idx[1] + m * idx[2]);
            add(psi[k], -1.0, self.seeds[k])
        };
        let mut out = IDENTITY;
        for b in 0..3 {
            let mut fwd = c;
            let mut bwd = c;
            fwd[b] = (c[b] + 1) % m;
            bwd[b] = (c[b] + m - 1) % m;
            let (pf, pb) = (disp(fwd), disp(bwd));
            for a in 0..3 {
                out[a][b] += (pf[a] - pb[a]) / (2.0 * dy);
            }
        }
        out
    }

    fn update_jacobian_deviation(&mut self) {
        let mut worst: f64 = 0.0;
        for s in Species::BOTH {
            for j in 0..self.seeds.len() {
                let jac = self.fd_jacobian(s, j);
                for (a, row) in jac.iter().enumerate() {
                    for (b, v) in row.iter().enumerate() {
                        worst = worst.max((v - IDENTITY[a][b]).abs());
                    }
                }
            }
        }
        self.jacobian_deviation = worst;
    }
}

fn det3(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn mat_axpy(a: &Mat3, s: f64, b: &Mat3) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] += s * b[i][j];
        }
    }
    c
}

/// Advance the markers from `s0.t` to `s1.t` with RK4, interpolating `Z+-`
/// and `grad z+-` cubically in space and linearly in time.
pub fn advance_flowmap(grid: &Grid, fm: &FlowMapState, s0: &ElsasserState, s1: &ElsasserState) -> FlowMapState {
    let h = s1.t - s0.t;
    let ip = PeriodicInterp::new(grid.n(), grid.half_length());
    let mut out = fm.clone();
    out.t = s1.t;
    for s in Species::BOTH {
        let b3 = s.sign();
        // 12 fields per time level: z (3) then d_b z^a at 3 + 3a + b
        let fields = |st: &ElsasserState| -> Vec<ScalarField> {
            let z = st.z(s);
            let mut v: Vec<ScalarField> = z.comps.to_vec();
            for a in 0..3 {
                for b in 0..3 {
                    v.push(grid.derivative(&z.comps[a], b));
                }
            }
            v
        };
        let f0 = fields(s0);
        let f1 = fields(s1);
        let fm_mid: Vec<ScalarField> = f0.iter().zip(&f1).map(|(a, b)| a.zip_map(b, |x, y| 0.5 * (x + y))).collect();
        let levels = [f0, fm_mid, f1];
        let eval = |stage: usize, p: [f64; 3]| -> ([f64; 3], Mat3) {
            let refs: Vec<&ScalarField> = levels[stage].iter().collect();
            let mut v = [0.0; 12];
            ip.eval_many(&refs, p, &mut v);
            let mut g = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    g[a][b] = v[3 + 3 * a + b];
                }
            }
            ([v[0], v[1], v[2] + b3], g)
        };
        let pairs: Vec<([f64; 3], Mat3)> = fm.psi[s.index()]
            .par_iter()
            .zip(fm.tangent[s.index()].par_iter())
            .map(|(&p, j)| {
                let (v1, g1) = eval(0, p);
                let k1 = matmul(&g1, j);
                let (v2, g2) = eval(1, add(p, 0.5 * h, v1));
                let k2 = matmul(&g2, &mat_axpy(j, 0.5 * h, &k1));
                let (v3, g3) = eval(1, add(p, 0.5 * h, v2));
                let k3 = matmul(&g3, &mat_axpy(j, 0.5 * h, &k2));
                let (v4, g4) = eval(2, add(p, h, v3));
                let k4 = matmul(&g4, &mat_axpy(j, h, &k3));
                let mut vs = [0.0; 3];
                let mut ks = [[0.0; 3]; 3];
                for (v, k, w) in [(v1, k1, 1.0), (v2, k2, 2.0), (v3, k3, 2.0), (v4, k4, 1.0)] {
                    vs = add(vs, w, v);
                    ks = mat_axpy(&ks, w, &k);
                }
                (add(p, h / 6.0, vs), mat_axpy(j, h / 6.0, &ks))
            })
            .collect();
        out.psi[s.index()] = pairs.iter().map(|p| p.0).collect();
        out.tangent[s.index()] = pairs.iter().map(|p| p.1).collect();
    }
    out.update_jacobian_deviation();
    out
}

/// `max_{y} |x^+-(t, psi+-(t, y)) - y|` over markers and species, using
/// periodic interpolation of the label residuals.
pub fn duality_error(grid: &Grid, labels: &LabelFields, fm: &FlowMapState) -> f64 {
    let ip = PeriodicInterp::new(grid.n(), grid.half_length());
    let mut worst: f64 = 0.0;
    for s in Species::BOTH {
        let phi = labels.phi(s);
        let refs = [&phi[0], &phi[1], &phi[2]];
        let drift = labels.drift(s);
        let e = fm.psi(s)
            .par_iter()
            .zip(fm.seeds.par_iter())
            .map(|(p, y)| {
                let mut r = [0.0; 3];
                ip.eval_many(&refs, *p, &mut r);
                let x = [p[0] + r[0], p[1] + r[1], p[2] + drift + r[2]];
                (0..3).map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        worst = worst.max(e);
    }
    worst
}

/// Count grid points violating `x3 + t/4 <= x_3^-(t, x) <= x3 + 7t/4`.
pub fn sandwich_violations(grid: &Grid, labels: &LabelFields) -> usize {
    let t = labels.t;
    let phi = &labels.phi(Species::Minus)[2];
    det_sum(grid.len(), |i| {
        // x_3^- - x3 = t + phi
        let d = t + phi.as_slice()[i];
        if d < 0.25 * t || d > 1.75 * t {
            1.0
        } else {
            0.0
        }
    }) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhd::solver::tests::smooth_div_free;
    use crate::mhd::{MhdSolver, SolverParams};

    #[test]
    fn wrap_examples() {
        let l = 3.0;
        assert!((wrap_u(0.5 * l, l) - 0.5 * l).abs() < 1e-15);
        assert!((wrap_u(-1.5 * l, l) - 0.5 * l).abs() < 1e-15);
        assert!((wrap_u(1.7 * l, l) + 0.3 * l).abs() < 1e-14);
        assert_eq!(wrap_u(l, l), l);
        assert_eq!(wrap_u(-l, l), l);
    }

    #[test]
    fn initial_weights_match_bracket_of_x() {
        let g = Grid::new(8, 5.0).unwrap();
        let l = LabelFields::initial(&g, 100.0);
        let br = ScalarField::from_index_fn(8, |a, b, c| {
            let x = [g.coord(a), g.coord(b), g.coord(c)];
            (1e4 + x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
        });
        for s in Species::BOTH {
            assert!(l.w(s).max_abs_diff(&br) < 1e-12);
            assert!(l.wbar(s).max_abs_diff(&br) < 1e-12);
        }
    }

    #[test]
    fn weight_arithmetic() {
        // x1 = x2 = u = 0 at the origin grid point, u = 100 elsewhere by choice of phi
        let g = Grid::new(8, 200.0).unwrap();
        let mut l = LabelFields::initial(&g, 100.0);
        let o = 4;
        assert!((l.w(Species::Plus).at(o, o, o) - 100.0).abs() < 1e-12);
        l.phi[0][2] = ScalarField::constant(8, 100.0);
        l.compute_weights(&g, 100.0);
        assert!((l.w(Species::Plus).at(o, o, o) - 100.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn free_streaming_labels_and_level_sets() {
        let g = Grid::new(16, 4.0).unwrap();
        let z = ElsasserState::zeros(16);
        let mut l = LabelFields::initial(&g, 100.0);
        let mut prev = z.clone();
        for k in 1..=5 {
            let next = ElsasserState { t: 0.3 * k as f64, ..z.clone() };
            l = advect_labels(&g, &l, &prev, &next);
            prev = next;
        }
        let t = l.t;
        let [up, um] = l.wrap_u(&g);
        for i in 0..g.len() {
            let x3 = g.coord(i / 256);
            assert!((up.as_slice()[i] - wrap_u(x3 - t, 4.0)).abs() < 1e-12);
            assert!((um.as_slice()[i] - wrap_u(x3 + t, 4.0)).abs() < 1e-12);
        }
        let x = l.level_set_x3(&g, Species::Minus, 0.7, 3, 5).unwrap();
        assert!((x - (0.7 - t)).abs() < 1e-10);
        let x = l.level_set_x3(&g, Species::Plus, 1.0, 3, 5).unwrap();
        assert!((x - (1.0 + t)).abs() < 1e-10);
        let at0 = LabelFields::initial(&g, 100.0);
        assert!((at0.level_set_x3(&g, Species::Plus, 1.0, 0, 0).unwrap() - 1.0).abs() < 1e-10);
        let sep = separation_metrics(&g, &l).unwrap();
        assert!((sep.min_abs_diff - 2.0 * t).abs() < 1e-12 && (sep.max_abs_diff - 2.0 * t).abs() < 1e-12);
    }

    #[test]
    fn non_monotone_column_is_reported() {
        let g = Grid::new(16, 4.0).unwrap();
        let mut l = LabelFields::initial(&g, 100.0);
        l.phi[0][2] = g.sample(|_, _, x3| -2.0 * (std::f64::consts::PI * x3 / 4.0).sin());
        assert!(matches!(l.level_set_x3(&g, Species::Plus, 0.0, 1, 1), Err(Error::NotMonotone { .. })));
    }

    #[test]
    fn perturbed_level_set_residual() {
        let g = Grid::new(16, 4.0).unwrap();
        let mut l = LabelFields::initial(&g, 100.0);
        l.t = 0.4;
        l.phi[1][2] = g.sample(|x1, x2, x3| 0.2 * (0.7 * x3 + x1).sin() * x2.cos());
        let ip = PeriodicInterp::new(16, 4.0);
        for a in [-1.0, 0.0, 0.5, 1.0] {
            for (i1, i2) in [(0, 0), (3, 9), (15, 2)] {
                let x = l.level_set_x3(&g, Species::Minus, a, i1, i2).unwrap();
                let u = wrap_u(x + 0.4 + ip.eval_column(&l.phi[1][2], i1, i2, x), 4.0);
                assert!((u - a).abs() <= 1e-8 * 4.0);
            }
        }
    }

    #[test]
    fn free_streaming_flow_map() {
        let g = Grid::new(16, 4.0).unwrap();
        let mut fm = FlowMapState::new(&g, 8);
        let z = ElsasserState::zeros(16);
        let mut prev = z.clone();
        for k in 1..=4 {
            let next = ElsasserState { t: 0.25 * k as f64, ..z.clone() };
            fm = advance_flowmap(&g, &fm, &prev, &next);
            prev = next;
        }
        for s in Species::BOTH {
            for (p, y) in fm.psi(s).iter().zip(&fm.seeds) {
                assert!((p[0] - y[0]).abs() < 1e-12 && (p[1] - y[1]).abs() < 1e-12);
                assert!((p[2] - (y[2] + s.sign() * 1.0)).abs() < 1e-10);
            }
        }
        assert!(fm.jacobian_deviation < 1e-12 && fm.det_deviation() < 1e-12);
    }

    fn short_run(g: &Grid, amp: f64, steps: usize, dt: f64) -> Vec<ElsasserState> {
        let s = MhdSolver::new(g.clone(), SolverParams::new(0.1, dt).unwrap()).unwrap();
        let mut st = ElsasserState { t: 0.0, z_plus: smooth_div_free(g, amp, 31), z_minus: smooth_div_free(g, amp, 32) };
        let mut out = vec![st.clone()];
        for _ in 0..steps {
            st = s.step(&st).unwrap();
            out.push(st.clone());
        }
        out
    }

    #[test]
    fn labels_invert_flow_map_and_volume_is_preserved() {
        let g = Grid::new(24, 3.0).unwrap();
        let run = short_run(&g, 0.2, 20, 0.05);
        let mut l = LabelFields::initial(&g, 100.0);
        let mut fm = FlowMapState::new(&g, 12);
        for w in run.windows(2) {
            l = advect_labels(&g, &l, &w[0], &w[1]);
            fm = advance_flowmap(&g, &fm, &w[0], &w[1]);
        }
        assert!(duality_error(&g, &l, &fm) <= 3.0 * g.dx());
        assert!(fm.det_deviation() <= 1e-3, "{}", fm.det_deviation());
        assert!(fm.jacobian_deviation > 0.0);
        assert_eq!(sandwich_violations(&g, &l), 0);
    }

    #[test]
    fn shifted_data_gives_shifted_labels() {
        // translation by L in x3 commutes with label transport, which is the
        // periodicity identity x3(x + 2L e3) = x3(x) + 2L in disguise
        let g = Grid::new(16, 3.0).unwrap();
        let run = short_run(&g, 0.2, 4, 0.05);
        let shift = |f: &ScalarField| ScalarField::from_index_fn(16, |a, b, c| f.at(a, b, (c + 8) % 16));
        let shift_v = |v: &VectorField| VectorField::new(shift(&v.comps[0]), shift(&v.comps[1]), shift(&v.comps[2]));
        let mut a = LabelFields::initial(&g, 100.0);
        let mut b = LabelFields::initial(&g, 100.0);
        for w in run.windows(2) {
            a = advect_labels(&g, &a, &w[0], &w[1]);
            let sh = |s: &ElsasserState| ElsasserState { t: s.t, z_plus: shift_v(&s.z_plus), z_minus: shift_v(&s.z_minus) };
            b = advect_labels(&g, &b, &sh(&w[0]), &sh(&w[1]));
        }
        for s in 0..2 {
            for i in 0..3 {
                assert!(shift(&a.phi[s][i]).max_abs_diff(&b.phi[s][i]) < 1e-13);
            }
        }
    }
}
