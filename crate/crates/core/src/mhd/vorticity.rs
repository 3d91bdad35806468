//! Consistency check against the vorticity form of the system,
//!
//! ```text
//! d_t j+ + Z- . grad j+ - mu Lap j+ = -eps_ijk d_i z-^l d_l z+^j,   j+ = curl z+
//! ```
//!
//! and its mirror for `j-`.

use super::{ElsasserState, Species};
use crate::field::{ScalarField, VectorField};
use crate::spectral::{Grid, Spectrum};

/// `eps_ijk d_i a^l d_l b^j`, dealiased.
fn cross_gradient_term(g: &Grid, a: &[Spectrum; 3], b: &[Spectrum; 3]) -> [Spectrum; 3] {
    let da: Vec<Vec<ScalarField>> =
        (0..3).map(|i| (0..3).map(|l| g.inverse(&g.spectral_derivative(&a[l], i))).collect()).collect();
    let db: Vec<Vec<ScalarField>> =
        (0..3).map(|l| (0..3).map(|j| g.inverse(&g.spectral_derivative(&b[j], l))).collect()).collect();
    // m[i][j] = sum_l d_i a^l d_l b^j
    let m = |i: usize, j: usize| {
        let mut acc = ScalarField::zeros(g.n());
        for l in 0..3 {
            acc = acc.zip_map(&da[i][l].zip_map(&db[l][j], |x, y| x * y), |s, p| s + p);
        }
        acc
    };
    [0usize, 1, 2].map(|k| {
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let t = m(i, j).zip_map(&m(j, i), |x, y| x - y);
        let mut s = g.forward(&t);
        g.dealias(&mut s);
        s
    })
}

/// `-z-+ . grad j+- +- d_3 j+- + mu Lap j+- - eps-term`, spectral.
fn vorticity_rhs(g: &Grid, state: &ElsasserState, s: Species, mu: f64) -> [Spectrum; 3] {
    let own = g.forward_vec(state.z(s));
    let other = g.forward_vec(state.z(s.other()));
    let other_phys = state.z(s.other());
    let j = g.spectral_curl(&own);
    let eps = cross_gradient_term(g, &other, &own);
    [0usize, 1, 2].map(|c| {
        let mut adv = ScalarField::zeros(g.n());
        for ax in 0..3 {
            let d = g.inverse(&g.spectral_derivative(&j[c], ax));
            adv = adv.zip_map(&d.zip_map(&other_phys.comps[ax], |x, y| x * y), |a, b| a + b);
        }
        let mut adv = g.forward(&adv);
        g.dealias(&mut adv);
        let d3 = g.spectral_derivative(&j[c], 2);
        let lin = g.map_modes(&j[c], |m, v| {
            let k = g.k_vec(m);
            s.sign() * d3.data[m] - mu * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * v
        });
        let mut out = lin.sub(&adv);
        out = out.sub(&eps[c]);
        out
    })
}

/// Max-norm residual of the vorticity equations between two consecutive
/// states, with the time derivative taken as a forward difference and the
/// right-hand side averaged over both end points.
pub fn vorticity_residual(g: &Grid, s0: &ElsasserState, s1: &ElsasserState, mu: f64) -> f64 {
    let dt = s1.t - s0.t;
    let mut worst: f64 = 0.0;
    for s in Species::BOTH {
        let j0 = g.curl(s0.z(s));
        let j1 = g.curl(s1.z(s));
        let f0 = g.inverse_vec(&vorticity_rhs(g, s0, s, mu));
        let f1 = g.inverse_vec(&vorticity_rhs(g, s1, s, mu));
        let mut r: VectorField = j1;
        r.axpy(-1.0, &j0);
        let mut r = r.scaled(1.0 / dt);
        r.axpy(-0.5, &f0);
        r.axpy(-0.5, &f1);
        worst = worst.max(r.max_abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhd::solver::tests::smooth_div_free;
    use crate::mhd::{MhdSolver, SolverParams};
    use std::f64::consts::PI;

    #[test]
    fn zero_state_has_zero_residual() {
        let g = Grid::new(8, PI).unwrap();
        let a = ElsasserState::zeros(8);
        let b = ElsasserState { t: 0.1, ..a.clone() };
        assert_eq!(vorticity_residual(&g, &a, &b, 0.1), 0.0);
    }

    #[test]
    fn eps_term_matches_curl_of_advection_identity() {
        // curl(a . grad b) = a . grad(curl b) + eps_kij d_i a^l d_l b^j
        let g = Grid::new(16, PI).unwrap();
        let a = smooth_div_free(&g, 0.5, 21);
        let b = smooth_div_free(&g, 0.5, 22);
        let mut adv = VectorField::zeros(16);
        for c in 0..3 {
            for l in 0..3 {
                let d = g.derivative(&b.comps[c], l);
                adv.comps[c].axpy(1.0, &d.zip_map(&a.comps[l], |x, y| x * y));
            }
        }
        let lhs = g.curl(&adv);
        let jb = g.curl(&b);
        let mut rhs = VectorField::zeros(16);
        for c in 0..3 {
            for l in 0..3 {
                let d = g.derivative(&jb.comps[c], l);
                rhs.comps[c].axpy(1.0, &d.zip_map(&a.comps[l], |x, y| x * y));
            }
        }
        let eps = g.inverse_vec(&cross_gradient_term(&g, &g.forward_vec(&a), &g.forward_vec(&b)));
        rhs.axpy(1.0, &eps);
        // dealiasing of eps only removes modes absent from the low-mode product
        assert!(lhs.max_abs_diff(&rhs) <= 1e-10 * lhs.max_abs());
    }

    #[test]
    fn residual_converges_at_second_order() {
        let g = Grid::new(16, PI).unwrap();
        let mu = 0.05;
        let s0 = ElsasserState {
            t: 0.0,
            z_plus: smooth_div_free(&g, 0.2, 23),
            z_minus: smooth_div_free(&g, 0.2, 24),
        };
        let res = |dt: f64| {
            let s = MhdSolver::new(g.clone(), SolverParams::new(mu, dt).unwrap()).unwrap();
            vorticity_residual(&g, &s0, &s.step(&s0).unwrap(), mu)
        };
        let r: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&d| res(d)).collect();
        for w in r.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{r:?}");
        }
    }

    #[test]
    fn constant_fields_have_zero_residual() {
        let g = Grid::new(8, PI).unwrap();
        let c = VectorField::new(
            ScalarField::constant(8, 0.1),
            ScalarField::constant(8, -0.2),
            ScalarField::constant(8, 0.05),
        );
        let s0 = ElsasserState { t: 0.0, z_plus: c.clone(), z_minus: c.clone() };
        let s1 = ElsasserState { t: 0.01, ..s0.clone() };
        assert!(vorticity_residual(&g, &s0, &s1, 0.1) <= 1e-15);
    }
}
