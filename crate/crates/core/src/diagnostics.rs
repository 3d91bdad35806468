//! Weighted energy, flux and diffusion functionals, the total energy ladder,
//! and the fitting helpers used to compare runs against linear theory.
//!
//! Weights act on species `+-` through the labels of the opposite species:
//! `z+` is weighted with `<w->` and vice versa.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::characteristics::LabelFields;
use crate::error::{Error, Result};
use crate::field::{det_sum, ScalarField, VectorField};
use crate::interp::PeriodicInterp;
use crate::mhd::{ElsasserState, Species};
use crate::spectral::{Grid, Spectrum};

/// Number of sampled `a` values realizing the supremum over `|a| <= L/4`.
pub const FLUX_A_SAMPLES: usize = 33;

/// Weight tier of a ladder order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tier {
    /// `<w>^2 log^4 <w>`
    Main,
    /// `<w> log^4 <w>`
    Half,
    /// `log^4 <w>`
    Log,
    /// `1 / L`
    InvL,
}

impl Tier {
    #[inline]
    pub fn weight(self, w: f64, half_length: f64) -> f64 {
        let l4 = w.ln().powi(4);
        match self {
            Tier::Main => w * w * l4,
            Tier::Half => w * l4,
            Tier::Log => l4,
            Tier::InvL => 1.0 / half_length,
        }
    }
}

/// Derivative ladder: orders `0..=k` are diagnosed, orders up to `main_top`
/// carry the main weight and the next three orders step down through the
/// remaining tiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LadderConfig {
    pub k: usize,
    pub main_top: usize,
}

impl LadderConfig {
    pub fn new(k: usize) -> Self {
        Self { k, main_top: k }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k > n / 6 {
            return Err(Error::Validation(format!("K = {} exceeds n/6 = {}", self.k, n / 6)));
        }
        Ok(())
    }

    pub fn tier(&self, order: usize) -> Tier {
        match order.saturating_sub(self.main_top) {
            0 => Tier::Main,
            1 => Tier::Half,
            2 => Tier::Log,
            _ => Tier::InvL,
        }
    }
}

/// Multi-indices `beta` with `|beta| = m`.
pub fn multi_indices(m: u32) -> Vec<[u32; 3]> {
    let mut v = Vec::new();
    for a in 0..=m {
        for b in 0..=m - a {
            v.push([a, b, m - a - b]);
        }
    }
    v
}

/// Number of `(alpha, i)` with `alpha + e_i = beta`.
pub fn first_multiplicity(beta: [u32; 3]) -> f64 {
    beta.iter().filter(|&&b| b >= 1).count() as f64
}

/// Number of `(alpha, i, j)` with `alpha + e_i + e_j = beta`.
pub fn second_multiplicity(beta: [u32; 3]) -> f64 {
    let mut c = 0;
    for i in 0..3 {
        for j in 0..3 {
            let mut b = beta;
            if b[i] == 0 {
                continue;
            }
            b[i] -= 1;
            if b[j] == 0 {
                continue;
            }
            c += 1;
        }
    }
    c as f64
}

/// `m! / beta!`, the multiplicity of `d^beta` in the full tensor `grad^m`.
pub fn multinomial(beta: [u32; 3]) -> f64 {
    let f = |k: u32| (1..=k).map(|x| x as f64).product::<f64>();
    f(beta[0] + beta[1] + beta[2]) / (f(beta[0]) * f(beta[1]) * f(beta[2]))
}

/// `sum_{|beta| = m} mult(beta) sum_c |d^beta v_c|^2` on the grid.
pub fn derivative_density<M>(grid: &Grid, spec: &[Spectrum; 3], m: u32, mult: M) -> ScalarField
where
    M: Fn([u32; 3]) -> f64,
{
    let n = grid.n();
    let mut acc = vec![0.0; grid.len()];
    for beta in multi_indices(m) {
        let c = mult(beta);
        if c == 0.0 {
            continue;
        }
        for comp in spec.iter() {
            let d = grid.inverse(&grid.partial(comp, beta));
            acc.par_iter_mut().zip(d.as_slice().par_iter()).for_each(|(a, v)| *a += c * v * v);
        }
    }
    ScalarField::from_vec(n, acc)
}

fn weighted_integral(grid: &Grid, density: &ScalarField, w: &ScalarField, tier: Tier) -> f64 {
    let l = grid.half_length();
    det_sum(grid.len(), |i| tier.weight(w.as_slice()[i], l) * density.as_slice()[i]) * grid.dx().powi(3)
}

fn weight_of(labels: &LabelFields, s: Species) -> &ScalarField {
    labels.w(s.other())
}

/// `E+- = integral log^4 <w-+> |z+-|^2 dx`.
pub fn energy_lowest(grid: &Grid, state: &ElsasserState, labels: &LabelFields) -> [f64; 2] {
    Species::BOTH.map(|s| weighted_integral(grid, &state.z(s).norm_sq(), weight_of(labels, s), Tier::Log))
}

/// `E+-^k = sum_{|alpha| = k} integral tier_k(<w-+>) |grad z+-^(alpha)|^2 dx`.
pub fn energy_order(grid: &Grid, state: &ElsasserState, labels: &LabelFields, k: usize, cfg: &LadderConfig) -> [f64; 2] {
    Species::BOTH.map(|s| {
        let d = derivative_density(grid, &grid.forward_vec(state.z(s)), k as u32 + 1, first_multiplicity);
        weighted_integral(grid, &d, weight_of(labels, s), cfg.tier(k))
    })
}

/// Instantaneous diffusion integrands (without the factor `mu`): the lowest
/// order `integral log^4 <w> |grad z|^2` followed by the ladder orders
/// `integral tier_k(<w>) |grad^2 z^(alpha)|^2`, per species.
pub fn diffusion_integrands(grid: &Grid, state: &ElsasserState, labels: &LabelFields, cfg: &LadderConfig) -> [Vec<f64>; 2] {
    Species::BOTH.map(|s| {
        let spec = grid.forward_vec(state.z(s));
        let w = weight_of(labels, s);
        let mut v = vec![weighted_integral(grid, &derivative_density(grid, &spec, 1, |_| 1.0), w, Tier::Log)];
        for k in 0..=cfg.k {
            let d = derivative_density(grid, &spec, k as u32 + 2, second_multiplicity);
            v.push(weighted_integral(grid, &d, w, cfg.tier(k)));
        }
        v
    })
}

fn unweighted_grad_sq(grid: &Grid, z: &VectorField) -> f64 {
    grid.forward_vec(z)
        .iter()
        .map(|c| {
            grid.spectral_weighted_mass(c, |s| {
                let k = grid.kd_vec(s);
                k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
            })
        })
        .sum()
}

fn l2_sq(grid: &Grid, z: &VectorField) -> f64 {
    grid.forward_vec(z).iter().map(|c| grid.spectral_mass(c)).sum()
}

/// Running `mu integral_0^t integral |grad z+-|^2`, which closes the basic
/// energy identity. Simpson's rule when the mid-step gradient energy is
/// supplied, trapezoidal otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct BasicEnergyBudget {
    pub mu: f64,
    pub integral: [f64; 2],
    pub initial_l2: [f64; 2],
    last: [f64; 2],
}

impl BasicEnergyBudget {
    pub fn new(grid: &Grid, state: &ElsasserState, mu: f64) -> Self {
        Self {
            mu,
            integral: [0.0; 2],
            initial_l2: Species::BOTH.map(|s| l2_sq(grid, state.z(s))),
            last: Species::BOTH.map(|s| unweighted_grad_sq(grid, state.z(s))),
        }
    }

    /// Advance by one step of length `dt` ending at `state`.
    pub fn accumulate(&mut self, grid: &Grid, state: &ElsasserState, dt: f64, midpoint_grad_sq: Option<[f64; 2]>) {
        let g1 = Species::BOTH.map(|s| unweighted_grad_sq(grid, state.z(s)));
        for s in 0..2 {
            let incr = match midpoint_grad_sq {
                Some(mid) => dt / 6.0 * (self.last[s] + 4.0 * mid[s] + g1[s]),
                None => 0.5 * dt * (self.last[s] + g1[s]),
            };
            self.integral[s] += self.mu * incr;
        }
        self.last = g1;
    }

    /// `||z+-(t)||^2 + 2 D_unweighted - ||z+-(0)||^2`.
    pub fn residual(&self, grid: &Grid, state: &ElsasserState) -> [f64; 2] {
        Species::BOTH.map(|s| l2_sq(grid, state.z(s)) + 2.0 * self.integral[s.index()] - self.initial_l2[s.index()])
    }
}

/// Running time integrals of the weighted diffusion functionals
/// (trapezoidal rule) together with the unweighted budget.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionAccumulator {
    pub mu: f64,
    /// `[species][0]` lowest order, `[species][1 + k]` ladder order `k`.
    pub weighted: [Vec<f64>; 2],
    pub basic: BasicEnergyBudget,
    last_weighted: [Vec<f64>; 2],
}

impl DiffusionAccumulator {
    pub fn new(grid: &Grid, state: &ElsasserState, labels: &LabelFields, cfg: &LadderConfig, mu: f64) -> Self {
        let w = diffusion_integrands(grid, state, labels, cfg);
        let zeros = vec![0.0; cfg.k + 2];
        Self {
            mu,
            weighted: [zeros.clone(), zeros],
            basic: BasicEnergyBudget::new(grid, state, mu),
            last_weighted: w,
        }
    }

    /// Advance by one step of length `dt` ending at `state`.
    pub fn accumulate(
        &mut self,
        grid: &Grid,
        state: &ElsasserState,
        labels: &LabelFields,
        cfg: &LadderConfig,
        dt: f64,
        midpoint_grad_sq: Option<[f64; 2]>,
    ) {
        let w = diffusion_integrands(grid, state, labels, cfg);
        for s in 0..2 {
            for (acc, (a, b)) in self.weighted[s].iter_mut().zip(self.last_weighted[s].iter().zip(&w[s])) {
                *acc += 0.5 * dt * self.mu * (a + b);
            }
        }
        self.basic.accumulate(grid, state, dt, midpoint_grad_sq);
        self.last_weighted = w;
    }

    pub fn basic_residual(&self, grid: &Grid, state: &ElsasserState) -> [f64; 2] {
        self.basic.residual(grid, state)
    }
}

/// Total energy `E(t)`: unweighted norms of `z` and its derivatives through
/// order `main_top`, plus `mu` times order `main_top + 1`, summed over species.
pub fn total_energy(grid: &Grid, state: &ElsasserState, cfg: &LadderConfig, mu: f64) -> f64 {
    total_energy_of(grid, &state.z_plus, cfg, mu) + total_energy_of(grid, &state.z_minus, cfg, mu)
}

fn total_energy_of(grid: &Grid, z: &VectorField, cfg: &LadderConfig, mu: f64) -> f64 {
    let top = cfg.main_top as u32;
    let spec = grid.forward_vec(z);
    let symbol = |s: usize| {
        let k = grid.kd_vec(s);
        let mut total = 1.0;
        for m in 1..=top + 1 {
            let scale = if m == top + 1 { mu } else { 1.0 };
            for beta in multi_indices(m) {
                let mut p = first_multiplicity(beta) * scale;
                for ax in 0..3 {
                    p *= k[ax].powi(2 * beta[ax] as i32);
                }
                total += p;
            }
        }
        total
    };
    spec.iter().map(|c| grid.spectral_weighted_mass(c, symbol)).sum()
}

/// Initial weighted energy with `<x> = (R^2 + |x|^2)^(1/2)`, derivative
/// orders `0..=k+1`; orders past `main_top` take the reduced weights and the
/// `mu`, `mu / log L`, `mu / log^2 L`, `mu / L` prefactors.
pub fn initial_weighted_energy(grid: &Grid, state: &ElsasserState, cfg: &LadderConfig, mu: f64, r: f64) -> f64 {
    let l = grid.half_length();
    let bracket = grid.sample(|a, b, c| (r * r + a * a + b * b + c * c).sqrt());
    let log_l = l.ln();
    let mut total = 0.0;
    for s in Species::BOTH {
        let z = state.z(s);
        let x4 = bracket.map(|w| w.powi(4));
        total += grid.integrate_box(&z.norm_sq().zip_map(&x4, |a, b| a * b));
        let spec = grid.forward_vec(z);
        for m in 1..=(cfg.k as u32 + 1) {
            let over = m as i64 - cfg.main_top as i64;
            let (tier, pre) = match over {
                i64::MIN..=0 => (Tier::Main, 1.0),
                1 => (Tier::Main, mu),
                2 => (Tier::Half, mu / log_l),
                3 => (Tier::Log, mu / (log_l * log_l)),
                _ => (Tier::InvL, mu),
            };
            let d = derivative_density(grid, &spec, m, multinomial);
            total += pre * weighted_integral(grid, &d, &bracket, tier);
        }
    }
    total
}

/// `sum_{|k| <= h} |z+_k|^2 + |z-_k|^2` (Parseval normalization).
pub fn low_freq_mass(grid: &Grid, state: &ElsasserState, h: f64) -> f64 {
    let keep = |s: usize| {
        let k = grid.k_vec(s);
        if k[0] * k[0] + k[1] * k[1] + k[2] * k[2] <= h * h {
            1.0
        } else {
            0.0
        }
    };
    Species::BOTH
        .iter()
        .flat_map(|&s| grid.forward_vec(state.z(s)))
        .map(|c| grid.spectral_weighted_mass(&c, keep))
        .sum()
}

/// Half-spectrum index of the signed mode `m`, and whether the stored value
/// must be conjugated.
pub fn mode_index(grid: &Grid, m: [i64; 3]) -> (usize, bool) {
    let n = grid.n() as i64;
    let (m, conj) = if m[0] < 0 { ([-m[0], -m[1], -m[2]], true) } else { (m, false) };
    let nh = n / 2 + 1;
    let s = m[0] + nh * (m[1].rem_euclid(n) + n * m[2].rem_euclid(n));
    (s as usize, conj)
}

/// Fourier coefficient of `p . v` at mode `m`.
pub fn mode_amplitude(grid: &Grid, v: &VectorField, m: [i64; 3], p: [f64; 3]) -> Complex64 {
    let (s, conj) = mode_index(grid, m);
    let spec = grid.forward_vec(v);
    let c: Complex64 = (0..3).map(|i| p[i] * spec[i].data[s]).sum();
    if conj {
        c.conj()
    } else {
        c
    }
}

/// Least-squares fit of `a(t) = a0 exp((i omega - gamma) t)`.
pub fn dispersion_fit(times: &[f64], amps: &[Complex64]) -> Result<(f64, f64)> {
    const NEEDED: usize = 10;
    if times.len() < NEEDED || amps.len() != times.len() {
        return Err(Error::FitIllConditioned { needed: NEEDED, got: times.len().min(amps.len()) });
    }
    let mut phase = Vec::with_capacity(amps.len());
    let mut prev = amps[0].arg();
    let mut offset = 0.0;
    for a in amps {
        let mut p = a.arg() + offset;
        while p - prev > std::f64::consts::PI {
            p -= std::f64::consts::TAU;
            offset -= std::f64::consts::TAU;
        }
        while p - prev < -std::f64::consts::PI {
            p += std::f64::consts::TAU;
            offset += std::f64::consts::TAU;
        }
        phase.push(p);
        prev = p;
    }
    let logs: Vec<f64> = amps.iter().map(|a| a.norm().ln()).collect();
    let omega = slope(times, &phase);
    let gamma = -slope(times, &logs);
    Ok((omega, gamma))
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayReport {
    /// `E(t_n) / E(t_{n-1})`; empty when any denominator vanishes.
    pub ratios: Vec<f64>,
    /// Geometric mean of the ratios.
    pub geometric_rate: Option<f64>,
}

pub fn decay_schedule(values: &[f64]) -> DecayReport {
    if values.len() < 2 || values[..values.len() - 1].contains(&0.0) {
        return DecayReport { ratios: Vec::new(), geometric_rate: None };
    }
    let ratios: Vec<f64> = values.windows(2).map(|w| w[1] / w[0]).collect();
    let rate = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    DecayReport { ratios, geometric_rate: Some(rate) }
}

/// True if no entry exceeds its predecessor.
pub fn is_non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Per-column fields sampled on a characteristic surface.
fn surface_integrands(grid: &Grid, state: &ElsasserState, labels: &LabelFields, s: Species, cfg: &LadderConfig) -> Vec<ScalarField> {
    let w = weight_of(labels, s);
    let l = grid.half_length();
    let apply = |d: ScalarField, tier: Tier| d.zip_map(w, |v, wv| v * tier.weight(wv, l));
    let z = state.z(s);
    let spec = grid.forward_vec(z);
    let mut out = vec![apply(z.norm_sq(), Tier::Log)];
    out.push(apply(derivative_density(grid, &spec, 1, |_| 1.0), cfg.tier(0)));
    if cfg.k >= 1 {
        let j = grid.spectral_curl(&spec);
        for k in 1..=cfg.k {
            out.push(apply(derivative_density(grid, &j, k as u32, |_| 1.0), cfg.tier(k)));
        }
    }
    out
}

/// Characteristic fluxes accumulated in time at the flux cadence.
///
/// Row 0 is the lowest-order flux `F+-`, row `1 + k` is `F+-^k` (order 0 with
/// the full gradient, higher orders with vorticity derivatives).
#[derive(Clone, Debug, PartialEq)]
pub struct FluxAccumulator {
    pub a_values: Vec<f64>,
    pub integral: [Vec<Vec<f64>>; 2],
    last: Option<(f64, [Vec<Vec<f64>>; 2])>,
}

impl FluxAccumulator {
    pub fn new(grid: &Grid, cfg: &LadderConfig) -> Self {
        let q = grid.half_length() / 4.0;
        let a_values: Vec<f64> =
            (0..FLUX_A_SAMPLES).map(|i| -q + 2.0 * q * i as f64 / (FLUX_A_SAMPLES - 1) as f64).collect();
        let rows = vec![vec![0.0; FLUX_A_SAMPLES]; cfg.k + 2];
        Self { a_values, integral: [rows.clone(), rows], last: None }
    }

    /// `sqrt(2) sum_{x1, x2} f(x1, x2, X3(a)) dx1 dx2` for every row and `a`.
    pub fn surface_integrals(
        &self,
        grid: &Grid,
        state: &ElsasserState,
        labels: &LabelFields,
        cfg: &LadderConfig,
    ) -> Result<[Vec<Vec<f64>>; 2]> {
        let n = grid.n();
        let ip = PeriodicInterp::new(n, grid.half_length());
        let da = 2f64.sqrt() * grid.dx() * grid.dx();
        let mut out: [Vec<Vec<f64>>; 2] = [Vec::new(), Vec::new()];
        for s in Species::BOTH {
            let f = surface_integrands(grid, state, labels, s, cfg);
            let rows = f.len();
            let mut table = vec![vec![0.0; self.a_values.len()]; rows];
            for (ia, &a) in self.a_values.iter().enumerate() {
                let cols: Vec<Vec<f64>> = (0..n * n)
                    .into_par_iter()
                    .map(|c| {
                        let (i1, i2) = (c % n, c / n);
                        let x3 = labels.level_set_x3(grid, s, a, i1, i2)?;
                        Ok(f.iter().map(|g| ip.eval_column(g, i1, i2, x3)).collect())
                    })
                    .collect::<Result<_>>()?;
                for (r, row) in table.iter_mut().enumerate() {
                    let vals: Vec<f64> = cols.iter().map(|c| c[r]).collect();
                    row[ia] = crate::field::pairwise_sum(&vals) * da;
                }
            }
            out[s.index()] = table;
        }
        Ok(out)
    }

    /// Add the slab between the previous sample and `state.t` (trapezoidal in time).
    pub fn sample(&mut self, grid: &Grid, state: &ElsasserState, labels: &LabelFields, cfg: &LadderConfig) -> Result<()> {
        let now = self.surface_integrals(grid, state, labels, cfg)?;
        if let Some((t0, prev)) = &self.last {
            let dt = state.t - t0;
            for s in 0..2 {
                for (r, row) in self.integral[s].iter_mut().enumerate() {
                    for (ia, v) in row.iter_mut().enumerate() {
                        *v += 0.5 * dt * (prev[s][r][ia] + now[s][r][ia]);
                    }
                }
            }
        }
        self.last = Some((state.t, now));
        Ok(())
    }

    /// Max over `a` of row `row` for species `s`.
    pub fn flux(&self, s: Species, row: usize) -> f64 {
        self.integral[s.index()][row].iter().copied().fold(0.0, f64::max)
    }
}
