//! Per-interval split `z = z_lin + z_non` where, on `[t_{n-1}, t_n]`,
//!
//! ```text
//! d_t z_lin + Z-+ . grad z_lin - mu Lap z_lin = 0,        z_lin(t_{n-1}) = z(t_{n-1})
//! d_t z_non + Z-+ . grad z_non - mu Lap z_non = -grad p,  z_non(t_{n-1}) = 0
//! ```
//!
//! with `Z-+` and `p` taken from the full solution. Both parts are stepped
//! with the same integrating-factor scheme and the same stage fields as the
//! full solution, so the sum is preserved to roundoff.

use super::solver::{MhdSolver, Spec3, StepOutcome};
use super::{ElsasserState, Species};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::spectral::Spectrum;

/// Relative tolerance on `||z - z_lin - z_non||_inf / ||z||_inf`.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionState {
    pub interval_start: f64,
    pub z_lin_plus: VectorField,
    pub z_lin_minus: VectorField,
    pub z_non_plus: VectorField,
    pub z_non_minus: VectorField,
}

impl DecompositionState {
    /// Split at the start of an interval: everything is linear.
    pub fn start(state: &ElsasserState) -> Self {
        let n = state.n();
        Self {
            interval_start: state.t,
            z_lin_plus: state.z_plus.clone(),
            z_lin_minus: state.z_minus.clone(),
            z_non_plus: VectorField::zeros(n),
            z_non_minus: VectorField::zeros(n),
        }
    }

    pub fn lin(&self, s: Species) -> &VectorField {
        match s {
            Species::Plus => &self.z_lin_plus,
            Species::Minus => &self.z_lin_minus,
        }
    }

    pub fn non(&self, s: Species) -> &VectorField {
        match s {
            Species::Plus => &self.z_non_plus,
            Species::Minus => &self.z_non_minus,
        }
    }

    /// `max_s ||z_s - lin_s - non_s||_inf / max_s ||z_s||_inf`
    pub fn drift(&self, state: &ElsasserState) -> f64 {
        let mut worst: f64 = 0.0;
        for s in Species::BOTH {
            let mut r = state.z(s).clone();
            r.axpy(-1.0, self.lin(s));
            r.axpy(-1.0, self.non(s));
            worst = worst.max(r.max_abs());
        }
        let scale = state.max_amplitude();
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }

    fn check(&self, state: &ElsasserState) -> Result<()> {
        let drift = self.drift(state);
        if drift > DECOMPOSITION_TOL {
            return Err(Error::DecompositionDrift { drift, tol: DECOMPOSITION_TOL });
        }
        Ok(())
    }
}

fn split3(v: &[Spectrum]) -> Spec3 {
    [v[0].clone(), v[1].clone(), v[2].clone()]
}

impl MhdSolver {
    /// Advance the full solution and its linear/nonlinear split by one step.
    /// The full part is identical to [`MhdSolver::step_with_midpoint`].
    pub fn evolve_decomposition(
        &self,
        dec: &DecompositionState,
        state: &ElsasserState,
    ) -> Result<(StepOutcome, DecompositionState)> {
        self.check_cfl(state)?;
        dec.check(state)?;

        let mut u0: Vec<Spectrum> = Vec::with_capacity(18);
        for v in [
            &state.z_plus,
            &state.z_minus,
            &dec.z_lin_plus,
            &dec.z_lin_minus,
            &dec.z_non_plus,
            &dec.z_non_minus,
        ] {
            u0.extend(self.to_spec(v));
        }
        let signs: Vec<f64> = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0]
            .iter()
            .flat_map(|&s| std::iter::repeat_n(s, 3))
            .collect();

        let (u3, u2) = self.if_ssprk3(&u0, &signs, |u| {
            let zp = split3(&u[0..3]);
            let zm = split3(&u[3..6]);
            let adv = self.advection(&zp, &zm);
            let full_p = self.projected_negative(&adv.plus);
            let full_m = self.projected_negative(&adv.minus);
            let zp_phys = self.to_phys(&zp);
            let zm_phys = self.to_phys(&zm);
            let zp_zero = zp_phys.is_zero();
            let zm_zero = zm_phys.is_zero();

            let adv_by = |carrier: &VectorField, carrier_zero: bool, target: &[Spectrum]| -> Spec3 {
                let t = split3(target);
                if carrier_zero || t.iter().all(Spectrum::is_zero) {
                    let mut z = t;
                    for c in z.iter_mut() {
                        c.scale(0.0);
                    }
                    z
                } else {
                    self.advect(carrier, &t)
                }
            };
            let lin_p = adv_by(&zm_phys, zm_zero, &u[6..9]);
            let lin_m = adv_by(&zp_phys, zp_zero, &u[9..12]);
            let non_p = adv_by(&zm_phys, zm_zero, &u[12..15]);
            let non_m = adv_by(&zp_phys, zp_zero, &u[15..18]);

            let mut out = Vec::with_capacity(18);
            out.extend(full_p.iter().cloned());
            out.extend(full_m.iter().cloned());
            for a in lin_p.iter().chain(lin_m.iter()) {
                let mut a = a.clone();
                a.scale(-1.0);
                out.push(a);
            }
            // -grad p = (I - P) adv = adv + (-P adv)
            for (a, (adv_c, full_c)) in non_p
                .iter()
                .zip(adv.plus.iter().zip(full_p.iter()))
                .chain(non_m.iter().zip(adv.minus.iter().zip(full_m.iter())))
            {
                let mut r = adv_c.sub(a);
                r.add_assign(full_c);
                out.push(r);
            }
            out
        });

        let phys: Vec<VectorField> = u3.chunks(3).map(|c| self.to_phys(&split3(c))).collect();
        let next = ElsasserState {
            t: state.t + self.params().dt,
            z_plus: phys[0].clone(),
            z_minus: phys[1].clone(),
        };
        let dec_next = DecompositionState {
            interval_start: dec.interval_start,
            z_lin_plus: phys[2].clone(),
            z_lin_minus: phys[3].clone(),
            z_non_plus: phys[4].clone(),
            z_non_minus: phys[5].clone(),
        };
        dec_next.check(&next)?;
        let midpoint_grad_sq = [self.grad_sq(&u2[0..3]), self.grad_sq(&u2[3..6])];
        Ok((StepOutcome { state: next, midpoint_grad_sq }, dec_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhd::solver::tests::smooth_div_free;
    use crate::mhd::SolverParams;
    use crate::spectral::Grid;
    use std::f64::consts::PI;

    fn setup(zm_zero: bool) -> (MhdSolver, ElsasserState) {
        let g = Grid::new(16, PI).unwrap();
        let s = MhdSolver::new(g.clone(), SolverParams::new(0.1, 0.02).unwrap()).unwrap();
        let zm = if zm_zero { VectorField::zeros(16) } else { smooth_div_free(&g, 0.3, 12) };
        let st = ElsasserState { t: 0.0, z_plus: smooth_div_free(&g, 0.3, 11), z_minus: zm };
        (s, st)
    }

    #[test]
    fn start_is_all_linear() {
        let (_, st) = setup(false);
        let d = DecompositionState::start(&st);
        assert_eq!(d.z_lin_plus, st.z_plus);
        assert!(d.z_non_plus.is_zero() && d.z_non_minus.is_zero());
        assert_eq!(d.drift(&st), 0.0);
    }

    #[test]
    fn no_pressure_means_no_nonlinear_part() {
        let (s, mut st) = setup(true);
        let mut d = DecompositionState::start(&st);
        for _ in 0..5 {
            let (a, b) = s.evolve_decomposition(&d, &st).unwrap();
            st = a.state;
            d = b;
        }
        assert!(d.z_non_plus.is_zero() && d.z_non_minus.is_zero());
    }

    #[test]
    fn full_part_matches_plain_step_and_sum_holds() {
        let (s, st) = setup(false);
        let d = DecompositionState::start(&st);
        let (next, dn) = s.evolve_decomposition(&d, &st).unwrap();
        let plain = s.step_with_midpoint(&st).unwrap();
        assert_eq!(next.state, plain.state);
        assert_eq!(next.midpoint_grad_sq, plain.midpoint_grad_sq);
        assert!(dn.drift(&next.state) <= 1e-12);
        assert!(dn.z_non_plus.max_abs() > 0.0);
    }

    #[test]
    fn inconsistent_split_is_rejected() {
        let (s, st) = setup(false);
        let mut d = DecompositionState::start(&st);
        d.z_non_plus = st.z_plus.scaled(1e-3);
        assert!(matches!(s.evolve_decomposition(&d, &st), Err(Error::DecompositionDrift { .. })));
    }
}
