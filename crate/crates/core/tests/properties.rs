use proptest::prelude::*;

use alfven_core::characteristics::{wrap_u, LabelFields};
use alfven_core::diagnostics::{
    energy_lowest, energy_order, low_freq_mass, total_energy, DiffusionAccumulator, FluxAccumulator, LadderConfig,
};
use alfven_core::io::config::TimeStep;
use alfven_core::io::{parse_config, SimConfig, Snapshot};
use alfven_core::mhd::{
    DecompositionState, ElsasserState, InitialCondition, MhdSolver, SolverParams, Species, SpeciesSel,
};
use alfven_core::{Grid, ScalarField, VectorField};

const N: usize = 8;

fn grid() -> Grid {
    Grid::new(N, 2.0).unwrap()
}

fn raw_field() -> impl Strategy<Value = ScalarField> {
    prop::collection::vec(-1.0f64..1.0, N * N * N).prop_map(|v| ScalarField::from_vec(N, v))
}

fn raw_vector() -> impl Strategy<Value = VectorField> {
    (raw_field(), raw_field(), raw_field()).prop_map(|(a, b, c)| VectorField::new(a, b, c))
}

/// Dealiased, divergence-free field scaled to `max |v| = amp`.
fn solenoidal(g: &Grid, v: &VectorField, amp: f64) -> VectorField {
    let mut spec = g.forward_vec(v);
    for c in spec.iter_mut() {
        g.dealias(c);
    }
    g.spectral_leray(&mut spec);
    let f = g.inverse_vec(&spec);
    let m = f.max_abs();
    f.scaled(amp / m)
}

fn grad_sq(g: &Grid, v: &VectorField) -> f64 {
    let mut total = 0.0;
    for c in &v.comps {
        for ax in 0..3 {
            let d = g.derivative(c, ax);
            total += g.integrate_box(&d.map(|x| x * x));
        }
    }
    total
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval(f in raw_field()) {
        let g = grid();
        let phys = g.integrate_box(&f.map(|x| x * x));
        let spec = g.spectral_mass(&g.forward(&f));
        prop_assert!(rel(spec, phys) <= 1e-12);
    }

    #[test]
    fn gradient_and_curl_norms_agree_for_solenoidal_fields(v in raw_vector()) {
        let g = grid();
        let f = solenoidal(&g, &v, 1.0);
        let c = g.curl(&f);
        prop_assert!(rel(g.integrate_box(&c.norm_sq()), grad_sq(&g, &f)) <= 1e-10);
    }

    #[test]
    fn leray_is_a_projector_commuting_with_derivatives(v in raw_vector(), axis in 0usize..3) {
        let g = grid();
        let p = g.leray_project(&v);
        let pp = g.leray_project(&p);
        prop_assert!(pp.max_abs_diff(&p) <= 1e-12 * p.max_abs().max(1.0));
        let dv = VectorField::new(g.derivative(&v.comps[0], axis), g.derivative(&v.comps[1], axis), g.derivative(&v.comps[2], axis));
        let a = g.leray_project(&dv);
        let b = VectorField::new(g.derivative(&p.comps[0], axis), g.derivative(&p.comps[1], axis), g.derivative(&p.comps[2], axis));
        prop_assert!(a.max_abs_diff(&b) <= 1e-10 * a.max_abs().max(1.0));
    }

    #[test]
    fn wrap_lands_in_half_open_box_and_is_congruent(x in -1e3f64..1e3, l in 0.5f64..50.0) {
        let u = wrap_u(x, l);
        prop_assert!(u > -l && u <= l);
        let m = (x - u) / (2.0 * l);
        prop_assert!((m - m.round()).abs() <= 1e-9 * (1.0 + m.abs()));
    }

    #[test]
    fn config_text_round_trips(
        mu in 0.01f64..0.99,
        l in 1.0f64..100.0,
        half_n in 6usize..40,
        dt in prop::option::of(1e-4f64..0.1),
        t_final in 0.0f64..20.0,
        amp in 0.0f64..0.5,
        seed in any::<u64>(),
        k in -3i64..4,
        sp in any::<bool>(),
    ) {
        let n = 2 * half_n;
        let mut cfg = parse_config(&format!("mu = {mu}\nL = {l}\nn = {n}\nt_final = {t_final}\nic = zero\nK = 1")).unwrap();
        cfg.dt = dt.map_or(TimeStep::Auto, TimeStep::Fixed);
        cfg.amplitude = amp;
        cfg.seed = seed;
        cfg.ic = if sp {
            InitialCondition::SingleMode { k: [k, 1, -k], species: Species::Minus }
        } else {
            InitialCondition::Packet(SpeciesSel::Both)
        };
        if t_final > 0.0 {
            cfg.checkpoint_times = vec![t_final / 3.0, t_final];
        }
        let back: SimConfig = parse_config(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(bits in prop::collection::vec(any::<u64>(), N * N * N), t in any::<f64>()) {
        let g = grid();
        let f = ScalarField::from_vec(N, bits.iter().map(|b| f64::from_bits(*b)).collect());
        let mut labels = LabelFields::initial(&g, 100.0);
        labels.phi[0][1] = f.clone();
        let state = ElsasserState { t, z_plus: VectorField::new(f.clone(), f.clone(), f), z_minus: VectorField::zeros(N) };
        let snap = Snapshot::from_state(&state, &labels, 2.0, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.alfv");
        snap.write(&p).unwrap();
        let back = Snapshot::read(&p).unwrap();
        let same = back.fields.iter().zip(&snap.fields).all(|(a, b)| {
            a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits())
        });
        prop_assert!(same);
        prop_assert_eq!(back.t.to_bits(), t.to_bits());
    }

    #[test]
    fn ladder_energies_are_quadratic(v in raw_vector(), w in raw_vector(), alpha in -3.0f64..3.0) {
        let g = grid();
        let labels = LabelFields::initial(&g, 100.0);
        let cfg = LadderConfig::new(1);
        let s = ElsasserState { t: 0.0, z_plus: solenoidal(&g, &v, 0.3), z_minus: solenoidal(&g, &w, 0.3) };
        let sa = ElsasserState { t: 0.0, z_plus: s.z_plus.scaled(alpha), z_minus: s.z_minus.scaled(alpha) };
        let a2 = alpha * alpha;
        for (x, y) in energy_lowest(&g, &sa, &labels).iter().zip(energy_lowest(&g, &s, &labels)) {
            prop_assert!((x - a2 * y).abs() <= 1e-12 * a2 * y + 1e-300);
        }
        for k in 0..=1 {
            for (x, y) in energy_order(&g, &sa, &labels, k, &cfg).iter().zip(energy_order(&g, &s, &labels, k, &cfg)) {
                prop_assert!((x - a2 * y).abs() <= 1e-12 * a2 * y + 1e-300);
            }
        }
        let (x, y) = (total_energy(&g, &sa, &cfg, 0.3), total_energy(&g, &s, &cfg, 0.3));
        prop_assert!((x - a2 * y).abs() <= 1e-12 * a2 * y + 1e-300);
    }

    #[test]
    fn low_freq_mass_is_monotone_and_bounded(v in raw_vector(), h1 in 0.0f64..10.0, dh in 0.0f64..10.0) {
        let g = grid();
        let s = ElsasserState { t: 0.0, z_plus: v.clone(), z_minus: v.scaled(0.5) };
        let a = low_freq_mass(&g, &s, h1);
        let b = low_freq_mass(&g, &s, h1 + dh);
        let total = g.integrate_box(&s.z_plus.norm_sq()) + g.integrate_box(&s.z_minus.norm_sq());
        prop_assert!(a <= b);
        prop_assert!(b <= total * (1.0 + 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn evolution_dissipates_and_keeps_diagnostics_monotone(v in raw_vector(), w in raw_vector(), mu in 0.05f64..0.5) {
        let g = grid();
        let solver = MhdSolver::new(g.clone(), SolverParams::new(mu, g.dx() / 8.0).unwrap()).unwrap();
        let mut s = ElsasserState { t: 0.0, z_plus: solenoidal(&g, &v, 0.4), z_minus: solenoidal(&g, &w, 0.4) };
        let cfg = LadderConfig::new(1);
        let mut labels = LabelFields::initial(&g, 100.0);
        let mut diff = DiffusionAccumulator::new(&g, &s, &labels, &cfg, mu);
        let mut flux = FluxAccumulator::new(&g, &cfg);
        flux.sample(&g, &s, &labels, &cfg).unwrap();
        let mut dec = DecompositionState::start(&s);
        for _ in 0..4 {
            let l2 = [solver.l2_sq_field(&s.z_plus), solver.l2_sq_field(&s.z_minus)];
            let d_prev = diff.weighted.clone();
            let f_prev = flux.integral.clone();
            let (out, d) = solver.evolve_decomposition(&dec, &s).unwrap();
            labels = alfven_core::characteristics::advect_labels(&g, &labels, &s, &out.state);
            s = out.state;
            dec = d;
            diff.accumulate(&g, &s, &labels, &cfg, solver.params().dt, Some(out.midpoint_grad_sq));
            flux.sample(&g, &s, &labels, &cfg).unwrap();
            prop_assert!(solver.l2_sq_field(&s.z_plus) <= l2[0]);
            prop_assert!(solver.l2_sq_field(&s.z_minus) <= l2[1]);
            for sp in 0..2 {
                for (a, b) in diff.weighted[sp].iter().zip(&d_prev[sp]) {
                    prop_assert!(a >= b);
                }
                for (ra, rb) in flux.integral[sp].iter().zip(&f_prev[sp]) {
                    for (a, b) in ra.iter().zip(rb) {
                        prop_assert!(a >= b);
                    }
                }
            }
            let mut sum = ElsasserState { t: s.t, z_plus: dec.z_lin_plus.clone(), z_minus: dec.z_lin_minus.clone() };
            sum.z_plus.axpy(1.0, &dec.z_non_plus);
            sum.z_minus.axpy(1.0, &dec.z_non_minus);
            prop_assert!(rel(total_energy(&g, &sum, &cfg, mu), total_energy(&g, &s, &cfg, mu)) <= 1e-8);
        }
    }

    #[test]
    fn tiny_data_evolves_linearly(v in raw_vector(), w in raw_vector(), alpha in 0.1f64..10.0) {
        let g = grid();
        let solver = MhdSolver::new(g.clone(), SolverParams::new(0.2, g.dx() / 8.0).unwrap()).unwrap();
        let s = ElsasserState { t: 0.0, z_plus: solenoidal(&g, &v, 1e-10), z_minus: solenoidal(&g, &w, 1e-10) };
        let sa = ElsasserState { t: 0.0, z_plus: s.z_plus.scaled(alpha), z_minus: s.z_minus.scaled(alpha) };
        let (mut a, mut b) = (s, sa);
        for _ in 0..3 {
            a = solver.step(&a).unwrap();
            b = solver.step(&b).unwrap();
        }
        let scale = b.max_amplitude();
        prop_assert!(b.z_plus.max_abs_diff(&a.z_plus.scaled(alpha)) <= 1e-8 * scale);
        prop_assert!(b.z_minus.max_abs_diff(&a.z_minus.scaled(alpha)) <= 1e-8 * scale);
    }
}
