use num_complex::Complex64;
use rayon::prelude::*;

use super::{ElsasserState, SolverParams, Species};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::spectral::{Grid, Spectrum};

pub(crate) type Spec3 = [Spectrum; 3];

/// Result of one step together with the gradient energies `||grad z+-||^2`
/// at the half step (third-stage input of the scheme), used for Simpson-rule
/// accumulation of the dissipated energy.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: ElsasserState,
    pub midpoint_grad_sq: [f64; 2],
}

/// Integrating-factor SSP-RK3 stepper.
///
/// The linear part `+-d_3 - mu Lap` of each species is integrated exactly per
/// Fourier mode; the cross-advection `z-+ . grad z+-` and the pressure are
/// explicit. Every stage is dealiased (2/3 rule) and Leray-projected, which
/// recomputes the pressure from the stage fields.
#[derive(Clone, Debug)]
pub struct MhdSolver {
    grid: Grid,
    params: SolverParams,
}

pub(crate) struct Advection {
    /// `D[z- . grad z+]` (spectral, dealiased, unprojected)
    pub plus: Spec3,
    /// `D[z+ . grad z-]`
    pub minus: Spec3,
}

impl MhdSolver {
    pub fn new(grid: Grid, params: SolverParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { grid, params })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        Self::new(self.grid.clone(), SolverParams { dt, ..self.params })
    }

    pub(crate) fn to_spec(&self, v: &VectorField) -> Spec3 {
        self.grid.forward_vec(v)
    }

    pub(crate) fn to_phys(&self, s: &Spec3) -> VectorField {
        self.grid.inverse_vec(s)
    }

    fn zero3(&self) -> Spec3 {
        [self.grid.zero_spectrum(), self.grid.zero_spectrum(), self.grid.zero_spectrum()]
    }

    /// Spectrum of `D[a . grad b]` for a physical advecting field `a`.
    pub(crate) fn advect(&self, a: &VectorField, b: &Spec3) -> Spec3 {
        let g = &self.grid;
        let n = g.n();
        [0, 1, 2].map(|c| {
            let grads: Vec<_> =
                (0..3).into_par_iter().map(|ax| g.inverse(&g.spectral_derivative(&b[c], ax))).collect();
            let prod = crate::field::ScalarField::from_vec(
                n,
                (0..g.len())
                    .into_par_iter()
                    .map(|i| {
                        a.comps[0].as_slice()[i] * grads[0].as_slice()[i]
                            + a.comps[1].as_slice()[i] * grads[1].as_slice()[i]
                            + a.comps[2].as_slice()[i] * grads[2].as_slice()[i]
                    })
                    .collect(),
            );
            let mut s = g.forward(&prod);
            if self.params.dealias {
                g.dealias(&mut s);
            }
            s
        })
    }

    pub(crate) fn advection(&self, zp: &Spec3, zm: &Spec3) -> Advection {
        let zp_zero = zp.iter().all(Spectrum::is_zero);
        let zm_zero = zm.iter().all(Spectrum::is_zero);
        let plus = if zm_zero {
            self.zero3()
        } else {
            self.advect(&self.to_phys(zm), zp)
        };
        let minus = if zp_zero { self.zero3() } else { self.advect(&self.to_phys(zp), zm) };
        Advection { plus, minus }
    }

    /// `-P adv`, the explicit right-hand side of one species.
    pub(crate) fn projected_negative(&self, adv: &Spec3) -> Spec3 {
        let mut out = adv.clone();
        for s in out.iter_mut() {
            s.scale(-1.0);
        }
        self.grid.spectral_leray(&mut out);
        out
    }

    /// `-(Z-+ . grad) z+- - grad p`, Leray-projected; diffusion excluded.
    pub fn rhs_elsasser(&self, state: &ElsasserState) -> (VectorField, VectorField) {
        let zp = self.to_spec(&state.z_plus);
        let zm = self.to_spec(&state.z_minus);
        let adv = self.advection(&zp, &zm);
        let mut out = Vec::with_capacity(2);
        for (sp, a, z) in [(Species::Plus, &adv.plus, &zp), (Species::Minus, &adv.minus, &zm)] {
            let mut r = self.projected_negative(a);
            for c in 0..3 {
                let d3 = self.grid.spectral_derivative(&z[c], 2);
                r[c].data.par_iter_mut().zip(d3.data.par_iter()).for_each(|(x, d)| *x += sp.sign() * d);
            }
            out.push(self.to_phys(&r));
        }
        let minus = out.pop().unwrap();
        let plus = out.pop().unwrap();
        (plus, minus)
    }

    /// Pressure consistent with the stepper: `p = i k . D[adv] / |k|^2`.
    pub fn pressure(&self, state: &ElsasserState) -> crate::field::ScalarField {
        let zp = self.to_spec(&state.z_plus);
        let zm = self.to_spec(&state.z_minus);
        let adv = self.advection(&zp, &zm);
        let div = self.grid.spectral_divergence(&adv.plus);
        self.grid.inverse(&self.grid.inverse_laplacian(&div))
    }

    /// Integrating factors `exp(lambda h)` for species sign `sigma`, with
    /// `lambda = sigma i k3 - mu |k|^2`.
    fn factors(&self, sigma: f64, h: f64) -> Vec<Complex64> {
        let g = &self.grid;
        let mu = self.params.mu;
        (0..g.spectral_len())
            .into_par_iter()
            .map(|s| {
                let k = g.k_vec(s);
                let kd = g.kd_vec(s);
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                Complex64::from_polar((-mu * k2 * h).exp(), sigma * kd[2] * h)
            })
            .collect()
    }

    pub fn check_cfl(&self, state: &ElsasserState) -> Result<()> {
        let bound = self.params.cfl_bound(self.grid.dx(), state.max_amplitude());
        if self.params.dt > bound * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt: self.params.dt, bound });
        }
        Ok(())
    }

    /// Generic IF-SSPRK3 over a list of spectra; `signs[i]` selects the
    /// linear operator of entry `i`. Returns `(u(t+dt), u2)` where `u2` is
    /// the half-step stage value.
    pub(crate) fn if_ssprk3<F>(
        &self,
        u0: &[Spectrum],
        signs: &[f64],
        mut nl: F,
    ) -> (Vec<Spectrum>, Vec<Spectrum>)
    where
        F: FnMut(&[Spectrum]) -> Vec<Spectrum>,
    {
        let dt = self.params.dt;
        let table = |sigma: f64| {
            (self.factors(sigma, dt), self.factors(sigma, 0.5 * dt), self.factors(sigma, -0.5 * dt))
        };
        let plus = table(1.0);
        let minus = table(-1.0);
        let pick = |sigma: f64| if sigma > 0.0 { &plus } else { &minus };

        // u + dt N, then multiply by factor
        let euler = |u: &Spectrum, n: &Spectrum, f: &[Complex64]| Spectrum {
            data: u
                .data
                .par_iter()
                .zip(n.data.par_iter())
                .zip(f.par_iter())
                .map(|((a, b), e)| e * (a + dt * b))
                .collect(),
        };

        let n0 = nl(u0);
        let u1: Vec<Spectrum> = (0..u0.len())
            .map(|i| euler(&u0[i], &n0[i], &pick(signs[i]).0))
            .collect();
        let n1 = nl(&u1);
        let u2: Vec<Spectrum> = (0..u0.len())
            .map(|i| {
                let (_, half, neg_half) = pick(signs[i]);
                let tail = euler(&u1[i], &n1[i], neg_half);
                Spectrum {
                    data: u0[i]
                        .data
                        .par_iter()
                        .zip(tail.data.par_iter())
                        .zip(half.par_iter())
                        .map(|((a, t), e)| 0.75 * e * a + 0.25 * t)
                        .collect(),
                }
            })
            .collect();
        let n2 = nl(&u2);
        let u3: Vec<Spectrum> = (0..u0.len())
            .map(|i| {
                let (full, half, _) = pick(signs[i]);
                let tail = euler(&u2[i], &n2[i], half);
                Spectrum {
                    data: u0[i]
                        .data
                        .par_iter()
                        .zip(tail.data.par_iter())
                        .zip(full.par_iter())
                        .map(|((a, t), e)| e * a / 3.0 + 2.0 / 3.0 * t)
                        .collect(),
                }
            })
            .collect();
        (u3, u2)
    }

    fn full_nonlinear(&self, u: &[Spectrum]) -> Vec<Spectrum> {
        let zp: Spec3 = [u[0].clone(), u[1].clone(), u[2].clone()];
        let zm: Spec3 = [u[3].clone(), u[4].clone(), u[5].clone()];
        let adv = self.advection(&zp, &zm);
        let [a, b, c] = self.projected_negative(&adv.plus);
        let [d, e, f] = self.projected_negative(&adv.minus);
        vec![a, b, c, d, e, f]
    }

    pub fn step(&self, state: &ElsasserState) -> Result<ElsasserState> {
        Ok(self.step_with_midpoint(state)?.state)
    }

    pub fn step_with_midpoint(&self, state: &ElsasserState) -> Result<StepOutcome> {
        self.check_cfl(state)?;
        let zp = self.to_spec(&state.z_plus);
        let zm = self.to_spec(&state.z_minus);
        let u0: Vec<Spectrum> = zp.into_iter().chain(zm).collect();
        let signs = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let (u3, u2) = self.if_ssprk3(&u0, &signs, |u| self.full_nonlinear(u));
        let midpoint_grad_sq = [self.grad_sq(&u2[0..3]), self.grad_sq(&u2[3..6])];
        let mut it = u3.into_iter();
        let mut take3 = || -> Spec3 { [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()] };
        let p = take3();
        let m = take3();
        Ok(StepOutcome {
            state: ElsasserState {
                t: state.t + self.params.dt,
                z_plus: self.to_phys(&p),
                z_minus: self.to_phys(&m),
            },
            midpoint_grad_sq,
        })
    }

    /// `integral |z|^2 dx` from spectra.
    pub fn l2_sq(&self, z: &[Spectrum]) -> f64 {
        z.iter().map(|c| self.grid.spectral_mass(c)).sum()
    }

    /// `integral |grad z|^2 dx` from spectra.
    pub fn grad_sq(&self, z: &[Spectrum]) -> f64 {
        let g = &self.grid;
        z.iter()
            .map(|c| {
                g.spectral_weighted_mass(c, |s| {
                    let k = g.kd_vec(s);
                    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
                })
            })
            .sum()
    }

    pub fn l2_sq_field(&self, z: &VectorField) -> f64 {
        self.l2_sq(&self.to_spec(z))
    }

    pub fn grad_sq_field(&self, z: &VectorField) -> f64 {
        self.grad_sq(&self.to_spec(z))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::field::ScalarField;
    use std::f64::consts::PI;

    fn solver(n: usize, l: f64, mu: f64, dt: f64) -> MhdSolver {
        MhdSolver::new(Grid::new(n, l).unwrap(), SolverParams::new(mu, dt).unwrap()).unwrap()
    }

    /// Divergence-free field built as a curl of smooth low modes.
    pub(crate) fn smooth_div_free(g: &Grid, amp: f64, seed: u64) -> VectorField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let k0 = g.k0();
        let mut pot = Vec::new();
        for _ in 0..3 {
            let mut terms = Vec::new();
            for _ in 0..4 {
                let m: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-2..=2) as f64 * k0);
                terms.push((m, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU)));
            }
            pot.push(g.sample(|x, y, z| {
                terms.iter().map(|(m, a, ph)| a * (m[0] * x + m[1] * y + m[2] * z + ph).cos()).sum()
            }));
        }
        let v = g.curl(&VectorField::new(pot[0].clone(), pot[1].clone(), pot[2].clone()));
        let s = amp / v.max_abs();
        v.scaled(s)
    }

    #[test]
    fn rejects_nonpositive_viscosity() {
        assert!(SolverParams::new(0.0, 0.1).is_err());
        assert!(SolverParams::new(-1.0, 0.1).is_err());
    }

    #[test]
    fn zero_state_has_zero_rhs_and_stays_zero() {
        let s = solver(8, PI, 0.1, 0.05);
        let z = ElsasserState::zeros(8);
        let (a, b) = s.rhs_elsasser(&z);
        assert!(a.is_zero() && b.is_zero());
        let next = s.step(&z).unwrap();
        assert!(next.z_plus.is_zero() && next.z_minus.is_zero());
        assert!((next.t - 0.05).abs() < 1e-15);
    }

    #[test]
    fn background_only_advection_for_lone_species() {
        let s = solver(16, PI, 0.1, 0.01);
        let zp = smooth_div_free(s.grid(), 0.2, 1);
        let state = ElsasserState { t: 0.0, z_plus: zp.clone(), z_minus: VectorField::zeros(16) };
        let (dp, dm) = s.rhs_elsasser(&state);
        let d3 = VectorField::new(
            s.grid().derivative(&zp.comps[0], 2),
            s.grid().derivative(&zp.comps[1], 2),
            s.grid().derivative(&zp.comps[2], 2),
        );
        assert!(dp.max_abs_diff(&d3) <= 1e-12);
        assert!(dm.is_zero());
        assert!(s.pressure(&state).max_abs() == 0.0);
    }

    #[test]
    fn rhs_is_divergence_free_and_matches_pressure_solve_without_dealiasing() {
        let g = Grid::new(16, PI).unwrap();
        let params = SolverParams { dealias: false, ..SolverParams::new(0.1, 0.01).unwrap() };
        let s = MhdSolver::new(g.clone(), params).unwrap();
        let state = ElsasserState {
            t: 0.0,
            z_plus: smooth_div_free(&g, 0.3, 2),
            z_minus: smooth_div_free(&g, 0.3, 3),
        };
        let (dp, dm) = s.rhs_elsasser(&state);
        assert!(g.divergence(&dp).max_abs() <= 1e-10 * dp.max_abs());
        assert!(g.divergence(&dm).max_abs() <= 1e-10 * dm.max_abs());

        // -(z- . grad) z+ + d3 z+ - grad p with p from the standalone pressure solve
        let p = g.solve_pressure(&state.z_plus, &state.z_minus);
        let gp = g.gradient(&p);
        let mut expect = VectorField::zeros(16);
        for c in 0..3 {
            let mut acc = g.derivative(&state.z_plus.comps[c], 2);
            for j in 0..3 {
                let d = g.derivative(&state.z_plus.comps[c], j);
                acc.axpy(-1.0, &d.zip_map(&state.z_minus.comps[j], |a, b| a * b));
            }
            acc.axpy(-1.0, &gp.comps[c]);
            expect.comps[c] = acc;
        }
        assert!(dp.max_abs_diff(&expect) <= 1e-10 * dp.max_abs());
    }

    #[test]
    fn advection_conserves_l2_semi_discretely() {
        let s = solver(16, PI, 0.1, 0.01);
        let g = s.grid().clone();
        let state = ElsasserState {
            t: 0.0,
            z_plus: smooth_div_free(&g, 0.3, 4),
            z_minus: smooth_div_free(&g, 0.3, 5),
        };
        let (dp, dm) = s.rhs_elsasser(&state);
        for (z, d) in [(&state.z_plus, &dp), (&state.z_minus, &dm)] {
            let rate: f64 = (0..3)
                .map(|c| g.integrate_box(&z.comps[c].zip_map(&d.comps[c], |a, b| a * b)))
                .sum();
            let norm = s.l2_sq_field(z);
            assert!(rate.abs() <= 1e-10 * norm, "rate {rate} vs norm {norm}");
        }
    }

    #[test]
    fn single_mode_heat_decay_and_phase_shift() {
        let (mu, dt, eps) = (0.01, 0.05, 1e-3);
        let s = solver(16, PI, mu, dt);
        let g = s.grid();
        let k0 = g.k0();
        let zp = VectorField::new(
            ScalarField::zeros(16),
            g.sample(|_, _, z| eps * (k0 * z).cos()),
            ScalarField::zeros(16),
        );
        let state = ElsasserState { t: 0.0, z_plus: zp, z_minus: VectorField::zeros(16) };
        let next = s.step(&state).unwrap();
        let decay = (-mu * k0 * k0 * dt).exp();
        // z+ ~ cos(k0 (x3 + t)): moves towards -x3
        let expect = g.sample(|_, _, z| eps * decay * (k0 * (z + dt)).cos());
        assert!(next.z_plus.comps[1].max_abs_diff(&expect) <= 1e-14);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let s = solver(8, PI, 0.1, 1.0);
        let z = ElsasserState::zeros(8);
        assert!(matches!(s.step(&z), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn step_converges_to_rhs_plus_diffusion() {
        let g = Grid::new(16, PI).unwrap();
        let mu = 0.05;
        let state = ElsasserState {
            t: 0.0,
            z_plus: smooth_div_free(&g, 0.3, 6),
            z_minus: smooth_div_free(&g, 0.3, 7),
        };
        let base = solver(16, PI, mu, 0.01);
        let (dp, dm) = base.rhs_elsasser(&state);
        let lap = |z: &VectorField| {
            let s = g.forward_vec(z).map(|c| {
                g.map_modes(&c, |s, v| {
                    let k = g.k_vec(s);
                    -v * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
                })
            });
            g.inverse_vec(&s)
        };
        let mut fp = dp.clone();
        fp.axpy(mu, &lap(&state.z_plus));
        let mut fm = dm.clone();
        fm.axpy(mu, &lap(&state.z_minus));
        // || step(u) - u - dt f(u) || = O(dt^2)
        let err = |dt: f64| {
            let next = base.with_dt(dt).unwrap().step(&state).unwrap();
            let mut a = next.z_plus.clone();
            a.axpy(-1.0, &state.z_plus);
            a.axpy(-dt, &fp);
            let mut b = next.z_minus.clone();
            b.axpy(-1.0, &state.z_minus);
            b.axpy(-dt, &fm);
            a.max_abs().max(b.max_abs())
        };
        let errs: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&dt| err(dt)).collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!(slope > 1.95, "slope {slope}");
        }
    }
}
