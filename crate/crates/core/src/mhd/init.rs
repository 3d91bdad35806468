//! Initial data: localized wave packets and single Fourier modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ElsasserState, Species};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::spectral::Grid;

/// Largest admissible `max |z+-|`.
pub const MAX_AMPLITUDE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeciesSel {
    Plus,
    Minus,
    Both,
}

impl SpeciesSel {
    pub fn includes(self, s: Species) -> bool {
        matches!(
            (self, s),
            (SpeciesSel::Both, _) | (SpeciesSel::Plus, Species::Plus) | (SpeciesSel::Minus, Species::Minus)
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    Packet(SpeciesSel),
    /// `amplitude * p * cos(k . x)` with integer mode numbers `k`.
    SingleMode { k: [i64; 3], species: Species },
    Zero,
}

/// Packet parameters. The stream function is
/// `S(x1, x2) exp(-x3^2 / (2 sigma^2)) cos(carrier k0 x3 + theta)` and the
/// packet is its curl along `e3`, rescaled so that `max |z| = amplitude`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PacketShape {
    pub amplitude: f64,
    pub sigma: f64,
    pub carrier_mode: u32,
    pub seed: u64,
}

impl PacketShape {
    pub fn new(grid: &Grid, amplitude: f64) -> Self {
        Self { amplitude, sigma: grid.half_length() / 16.0, carrier_mode: 0, seed: 0 }
    }
}

/// Unit vector orthogonal to `k` used for single-mode data.
pub fn single_mode_polarization(k: [i64; 3]) -> [f64; 3] {
    if k[0] == 0 && k[1] == 0 {
        return [1.0, 0.0, 0.0];
    }
    // e3 x k
    let p = [-(k[1] as f64), k[0] as f64, 0.0];
    let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
    [p[0] / norm, p[1] / norm, 0.0]
}

fn packet(grid: &Grid, shape: &PacketShape, seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k0 = grid.k0();
    let ph: [f64; 4] = [0; 4].map(|_| rng.gen_range(0.0..std::f64::consts::TAU));
    let theta = if shape.carrier_mode == 0 { 0.0 } else { ph[3] };
    let kc = shape.carrier_mode as f64 * k0;
    let sigma = shape.sigma;
    let psi = grid.sample(|x1, x2, x3| {
        let s = (k0 * x1 + ph[0]).cos() + (k0 * x2 + ph[1]).cos() + 0.5 * (k0 * (x1 + x2) + ph[2]).cos();
        s * (-x3 * x3 / (2.0 * sigma * sigma)).exp() * (kc * x3 + theta).cos()
    });
    let z = VectorField::new(grid.derivative(&psi, 1), grid.derivative(&psi, 0).scaled(-1.0), ScalarField::zeros(grid.n()));
    let m = z.max_abs();
    let mut spec = grid.forward_vec(&z.scaled(shape.amplitude / m));
    for c in spec.iter_mut() {
        grid.dealias(c);
    }
    grid.spectral_leray(&mut spec);
    grid.inverse_vec(&spec)
}

fn single_mode(grid: &Grid, k: [i64; 3], amplitude: f64) -> VectorField {
    let p = single_mode_polarization(k);
    let k0 = grid.k0();
    let kk = k.map(|m| m as f64 * k0);
    let wave = grid.sample(|x1, x2, x3| amplitude * (kk[0] * x1 + kk[1] * x2 + kk[2] * x3).cos());
    VectorField::new(wave.scaled(p[0]), wave.scaled(p[1]), wave.scaled(p[2]))
}

/// Build the initial state; fails if either species exceeds the amplitude bound.
pub fn init_state(grid: &Grid, ic: &InitialCondition, shape: &PacketShape) -> Result<ElsasserState> {
    let n = grid.n();
    let mut state = ElsasserState::zeros(n);
    match *ic {
        InitialCondition::Zero => {}
        InitialCondition::Packet(sel) => {
            if shape.amplitude != 0.0 {
                if sel.includes(Species::Plus) {
                    state.z_plus = packet(grid, shape, shape.seed);
                }
                if sel.includes(Species::Minus) {
                    state.z_minus = packet(grid, shape, shape.seed.wrapping_add(1));
                }
            }
        }
        InitialCondition::SingleMode { k, species } => {
            let half = (n / 2) as i64;
            if k.iter().all(|&m| m == 0) || k.iter().any(|&m| m.abs() >= half) {
                return Err(Error::Validation(format!(
                    "single-mode wavevector {k:?} must be nonzero with |k_i| < n/2"
                )));
            }
            let z = single_mode(grid, k, shape.amplitude);
            match species {
                Species::Plus => state.z_plus = z,
                Species::Minus => state.z_minus = z,
            }
        }
    }
    let max_abs = state.max_amplitude();
    if max_abs > MAX_AMPLITUDE {
        return Err(Error::AmplitudeTooLarge { max_abs });
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(32, 8.0).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_zero_state() {
        let g = grid();
        let s = init_state(&g, &InitialCondition::Packet(SpeciesSel::Both), &PacketShape::new(&g, 0.0)).unwrap();
        assert!(s.z_plus.is_zero() && s.z_minus.is_zero());
    }

    #[test]
    fn plus_packet_is_divergence_free_and_bounded() {
        let g = grid();
        let s = init_state(&g, &InitialCondition::Packet(SpeciesSel::Plus), &PacketShape::new(&g, 0.1)).unwrap();
        let m = s.z_plus.max_abs();
        assert!((0.05..=0.1 + 1e-12).contains(&m), "{m}");
        assert!(s.z_minus.is_zero());
        assert!(g.divergence(&s.z_plus).max_abs() <= 1e-10 * m);
    }

    #[test]
    fn packet_mass_is_localized() {
        let g = Grid::new(64, 8.0).unwrap();
        let s = init_state(&g, &InitialCondition::Packet(SpeciesSel::Plus), &PacketShape::new(&g, 0.1)).unwrap();
        let e = s.z_plus.norm_sq();
        let inner = g.sample(|_, _, x3| if x3.abs() <= 2.0 { 1.0 } else { 0.0 });
        let frac = g.integrate_box(&e.zip_map(&inner, |a, b| a * b)) / g.integrate_box(&e);
        assert!(frac >= 0.9999, "{frac}");
    }

    #[test]
    fn too_large_amplitude_is_rejected() {
        let g = grid();
        let r = init_state(&g, &InitialCondition::Packet(SpeciesSel::Minus), &PacketShape::new(&g, 0.9));
        assert!(matches!(r, Err(Error::AmplitudeTooLarge { .. })));
    }

    #[test]
    fn single_mode_is_transverse() {
        let g = grid();
        for k in [[0, 0, 1], [1, 0, 0], [1, 1, 2]] {
            let p = single_mode_polarization(k);
            let dot: f64 = (0..3).map(|i| p[i] * k[i] as f64).sum();
            assert!(dot.abs() < 1e-15);
            let ic = InitialCondition::SingleMode { k, species: Species::Minus };
            let s = init_state(&g, &ic, &PacketShape::new(&g, 1e-6)).unwrap();
            assert!(g.divergence(&s.z_minus).max_abs() <= 1e-20);
        }
    }
}
