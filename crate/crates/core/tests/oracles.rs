//! End-to-end checks against closed-form and independently computed values.

use admhd::diagnostics::{
    blowup_alpha_sweep, energy_balance_residual, energy_inequality_check, limit_study, model_energy,
    stability_probe, DiagnosticsRecord, NdjsonSink, StudySetup, TrajectorySink,
};
use admhd::filter_ops::{apply_helmholtz_power, helmholtz_symbol};
use admhd::initial::{abc_field, random_solenoidal};
use admhd::time_integrator::Stepper;
use admhd::{
    run, DeconvParams, FilterParams, GridSpec, IntegratorConfig, MhdModel, MhdState, ModelCase, PhysicalParams,
    PhysicalVectorField, SpectralTransform, SpectralVectorField,
};

fn euler(grid: GridSpec, fp: FilterParams, n: u32) -> MhdModel {
    MhdModel::new(grid, fp, DeconvParams::new(n), PhysicalParams::new(0.0, 0.0, ModelCase::DeconvEuler).unwrap())
}

fn viscous(grid: GridSpec, fp: FilterParams, n: u32, nu: f64, mu: f64) -> MhdModel {
    MhdModel::new(grid, fp, DeconvParams::new(n), PhysicalParams::new(nu, mu, ModelCase::DoubleViscous).unwrap())
}

fn random_state(grid: GridSpec, seed: u64, with_b: bool) -> MhdState {
    let b = if with_b { random_solenoidal(grid, seed + 1000, -1.0, (1.0, 4.0), 0.8) } else { SpectralVectorField::zeros(grid) };
    MhdState { w: random_solenoidal(grid, seed, -1.0, (1.0, 4.0), 1.0), b, t: 0.0 }
}

#[test]
fn abc_self_advection_is_gradient_of_half_speed_squared() {
    let g = GridSpec::with_default_padding(16).unwrap();
    let (a, b, c) = (1.0, 0.7, 0.4);
    let u = abc_field(g, a, b, c);
    let model = euler(g, FilterParams::new(0.5, 1.0).unwrap(), 2);
    let adv = model.filtered_divergence_of_product(&u, &u, false).unwrap();

    // ∇(|u|²/2) sampled pointwise, then transformed
    let m = g.padded_n();
    let grad = PhysicalVectorField::from_fn(m, |x| {
        let (sx, cx, sy, cy, sz, cz) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos(), x[2].sin(), x[2].cos());
        let u = [a * sz + c * cy, b * sx + a * cz, c * sy + b * cx];
        let du = [
            [0.0, -c * sy, a * cz],
            [b * cx, 0.0, -a * sz],
            [-b * sx, c * cy, 0.0],
        ];
        std::array::from_fn(|j| (0..3).map(|i| u[i] * du[i][j]).sum())
    });
    let oracle = SpectralTransform::new(g).forward_transform(&grad).unwrap();
    assert!(adv.sub(&oracle).l2_norm() <= 1e-14 * oracle.l2_norm(), "{}", adv.sub(&oracle).l2_norm());

    let (nw, nb) = model.nonlinear_terms(&MhdState { w: u.clone(), b: SpectralVectorField::zeros(g), t: 0.0 }).unwrap();
    assert!(nw.l2_norm() <= 1e-14 * u.l2_norm());
    assert_eq!(nb.l2_norm(), 0.0);
}

#[test]
fn products_do_not_depend_on_extra_padding() {
    let fp = FilterParams::new(0.5, 0.75).unwrap();
    let base = GridSpec::with_default_padding(16).unwrap();
    let wide = GridSpec::new(16, 32).unwrap();
    let s = random_state(base, 3, true);
    let (nw, nb) = viscous(base, fp, 3, 0.1, 0.1).nonlinear_terms(&s).unwrap();
    let sw = MhdState {
        w: SpectralVectorField::from_coeffs(wide, remap(&s.w, wide)).unwrap(),
        b: SpectralVectorField::from_coeffs(wide, remap(&s.b, wide)).unwrap(),
        t: 0.0,
    };
    let (ww, wb) = viscous(wide, fp, 3, 0.1, 0.1).nonlinear_terms(&sw).unwrap();
    for k in wide.modes().map(|m| m.k) {
        for c in 0..3 {
            assert!((nw.get(k)[c] - ww.get(k)[c]).norm() <= 1e-13 * nw.l2_norm());
            assert!((nb.get(k)[c] - wb.get(k)[c]).norm() <= 1e-13 * nb.l2_norm());
        }
    }
}

fn remap(f: &SpectralVectorField, to: GridSpec) -> Vec<[num_complex::Complex64; 3]> {
    let mut out = vec![[num_complex::Complex64::default(); 3]; to.mode_count()];
    for m in to.modes() {
        out[m.idx] = f.get(m.k);
    }
    out
}

#[test]
fn integrator_is_fourth_order() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let model = viscous(g, FilterParams::new(0.5, 1.0).unwrap(), 2, 0.05, 0.05);
    let s0 = random_state(g, 21, true);
    let integrate = |dt: f64| {
        let stepper = Stepper::new(&model, dt);
        let mut s = s0.clone();
        for _ in 0..(0.4 / dt).round() as usize {
            s = stepper.step(&s).unwrap().0;
        }
        s
    };
    let reference = integrate(0.4 / 512.0);
    let err = |dt: f64| {
        let s = integrate(dt);
        (s.w.sub(&reference.w).norm_sq() + s.b.sub(&reference.b).norm_sq()).sqrt()
    };
    let (e1, e2) = (err(0.4 / 16.0), err(0.4 / 32.0));
    let order = (e1 / e2).log2();
    assert!((3.7..4.3).contains(&order), "observed order {order} ({e1:e} → {e2:e})");
}

#[test]
fn pure_diffusion_beltrami_balance() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let fp = FilterParams::new(0.5, 1.0).unwrap();
    let (nu, mu) = (0.05, 0.02);
    let model = viscous(g, fp, 3, nu, mu);
    let w = abc_field(g, 1.0, 1.0, 1.0);
    let initial = MhdState { w, b: SpectralVectorField::zeros(g), t: 0.0 };
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    run(&initial, &model, &IntegratorConfig::new(0.01, 1.0).unwrap(), &mut records).unwrap();
    assert!(energy_balance_residual(&records).unwrap() <= 1e-10);
    // single shell: E(t) = E(0) e^{−2νt}
    let e0 = records[0].model_energy;
    for r in &records {
        assert!((r.model_energy - e0 * (-2.0 * nu * r.t).exp()).abs() <= 1e-10 * e0);
    }
}

#[test]
fn viscous_mhd_short_run_balance() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let model = viscous(g, FilterParams::new(0.5, 0.5).unwrap(), 3, 0.01, 0.01);
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    run(&random_state(g, 8, true), &model, &IntegratorConfig::new(1e-3, 0.2).unwrap(), &mut records).unwrap();
    assert!(energy_balance_residual(&records).unwrap() <= 1e-6);
    assert!(records.windows(2).all(|p| p[1].visc_dissip_cum >= p[0].visc_dissip_cum
        && p[1].mag_dissip_cum >= p[0].mag_dissip_cum));
    assert!(records.iter().all(|r| r.model_energy >= 0.0));
}

#[test]
fn inviscid_ade_conserves_model_energy_and_inequality() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let fp = FilterParams::new(0.5, 1.0).unwrap();
    let model = euler(g, fp, 4);
    let v0 = random_solenoidal(g, 30, -1.0, (1.0, 3.0), 1.0);
    let initial = MhdState { w: apply_helmholtz_power(&v0, &fp, -1.0), b: SpectralVectorField::zeros(g), t: 0.0 };
    let mut sink = TrajectorySink::default();
    run(&initial, &model, &IntegratorConfig::new(2e-3, 0.5).unwrap(), &mut sink).unwrap();
    let r = energy_balance_residual(&sink.records).unwrap();
    assert!(r <= 1e-9, "{r}");
    assert!(sink.states.iter().all(|s| energy_inequality_check(s, &fp, v0.l2_norm())));
    let e = model_energy(&sink.states[0], &fp, &DeconvParams::new(4));
    assert_eq!(e, sink.records[0].model_energy);
}

#[test]
fn zero_length_run_emits_single_record() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let model = euler(g, FilterParams::new(0.5, 1.0).unwrap(), 1);
    let initial = random_state(g, 1, false);
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let out = run(&initial, &model, &IntegratorConfig::new(1e-3, 0.0).unwrap(), &mut records).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(out.state, initial);
    assert_eq!(records[0].balance_residual, Some(0.0));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let model = viscous(g, FilterParams::new(0.3, 0.75).unwrap(), 2, 0.02, 0.03);
    let cfg = IntegratorConfig::new(5e-3, 0.1).unwrap();
    let stream = || {
        let mut sink = NdjsonSink::new(Vec::new());
        run(&random_state(g, 77, true), &model, &cfg, &mut sink).unwrap();
        sink.into_inner()
    };
    let a = stream();
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 21);
    assert_eq!(a, stream());
}

fn study(grid: GridSpec) -> StudySetup {
    StudySetup {
        grid,
        fp: FilterParams::new(0.5, 0.75).unwrap(),
        pp: PhysicalParams::new(0.02, 0.02, ModelCase::DoubleViscous).unwrap(),
        integrator: IntegratorConfig::new(5e-3, 0.2).unwrap().with_record_interval(2),
        v0: random_solenoidal(grid, 40, -1.0, (1.0, 3.0), 1.0),
        b0: random_solenoidal(grid, 41, -1.0, (1.0, 3.0), 1.0),
    }
}

#[test]
fn limit_study_errors_shrink_with_order() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let table = limit_study(&study(g), &[8, 0, 2, 1, 4], 1.0, 0.5, 2).unwrap();
    assert_eq!(table.rows.iter().map(|r| r.n).collect::<Vec<_>>(), [0, 1, 2, 4, 8]);
    assert!(table.strictly_decreasing(), "{table:?}");
    assert!(table.invariant_residual <= 1e-12);
    // a very high order is indistinguishable from the limit
    let far = limit_study(&study(g), &[0, 400], 1.0, 0.5, 1).unwrap();
    assert!(far.rows[1].err_w <= 1e-10 * far.rows[0].err_w, "{far:?}");
    let mut csv = Vec::new();
    table.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("N,err_w,err_B\n0,"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn operator_gap_matches_geometric_prediction_on_one_shell() {
    // on a single shell every mode shares r, so e_(N+1)/e_N = r exactly
    let g = GridSpec::with_default_padding(8).unwrap();
    let fp = FilterParams::new(0.5, 0.75).unwrap();
    let v = abc_field(g, 1.0, 0.3, 0.6);
    let e = |n| admhd::filter_ops::deconv_limit_error(&v, &fp, &DeconvParams::new(n));
    let r = admhd::filter_ops::contraction_ratio(1.0, &fp);
    for n in 0..10 {
        assert!((e(n + 1) / e(n) - r).abs() < 1e-13);
    }
}

#[test]
fn stability_probe_contracts() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let model = viscous(g, FilterParams::new(0.5, 0.75).unwrap(), 2, 0.05, 0.05);
    let cfg = IntegratorConfig::new(1e-2, 0.2).unwrap();
    let mut initial = random_state(g, 90, true);
    initial.w.axpy(1.0, &abc_field(g, 1.0, 1.0, 1.0));
    let zero = stability_probe(&initial, &model, &cfg, 0.0, 5).unwrap();
    assert_eq!(zero.ratio, 1.0);
    let big = stability_probe(&initial, &model, &cfg, 1e-6, 5).unwrap();
    let half = stability_probe(&initial, &model, &cfg, 5e-7, 5).unwrap();
    assert!(big.ratio.is_finite() && big.ratio > 0.0);
    // quadratic functional of a linear response: a quarter, early on
    let q = half.differences[1] / big.differences[1];
    assert!((q - 0.25).abs() < 1e-4, "{q}");
}

#[test]
fn alpha_sweep_reports_every_width() {
    let g = GridSpec::with_default_padding(8).unwrap();
    let mut setup = study(g);
    setup.pp = PhysicalParams::new(0.0, 0.0, ModelCase::DeconvEuler).unwrap();
    setup.b0 = SpectralVectorField::zeros(g);
    setup.integrator = IntegratorConfig::new(1e-2, 0.1).unwrap();
    let rows = blowup_alpha_sweep(&setup, DeconvParams::new(2), &[1.0, 0.5, 0.25]).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.alpha).collect::<Vec<_>>(), [1.0, 0.5, 0.25]);
    assert!(rows.iter().all(|r| r.sup_monitor.is_finite() && r.sup_monitor > 0.0));
}

#[test]
fn filtered_initial_data_satisfies_inequality_at_start() {
    let g = GridSpec::with_default_padding(8).unwrap();
    for (alpha, theta) in [(0.1, 0.0), (0.5, 0.5), (2.0, 1.0)] {
        let fp = FilterParams::new(alpha, theta).unwrap();
        let v0 = random_solenoidal(g, 60, 0.0, (1.0, 5.0), 2.0);
        let s = MhdState { w: apply_helmholtz_power(&v0, &fp, -1.0), b: SpectralVectorField::zeros(g), t: 0.0 };
        assert!(energy_inequality_check(&s, &fp, v0.l2_norm()));
        assert!(helmholtz_symbol(1.0, &fp, 1.0) >= 1.0);
    }
}
