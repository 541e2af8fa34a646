//! Operator property suites, shared by `operator_check` and the acceptance run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::filter_ops::{
    apply_deconvolution, apply_energy_root, apply_helmholtz_power, deconv_limit_error, deconv_symbol,
    helmholtz_norm_identity_check, helmholtz_symbol, DeconvParams, FilterParams,
};
use crate::initial::random_solenoidal;
use crate::mhd_model::{MhdModel, MhdState, ModelCase, PhysicalParams};
use crate::spectral_field::{GridSpec, SpectralVectorField};
use crate::transform::SpectralTransform;

/// Outcome of one property. `worst` is the extreme measured value, compared
/// against `tolerance` in the direction the property states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn at_most(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), worst, tolerance, passed: worst <= tolerance, detail }
    }

    fn at_least(name: &str, worst: f64, tolerance: f64, detail: String) -> Self {
        Self { name: name.into(), worst, tolerance, passed: worst >= tolerance, detail }
    }
}

fn field(grid: GridSpec, seed: u64) -> SpectralVectorField {
    let band = (1.0, grid.k_max());
    random_solenoidal(grid, seed, -1.0, band, 1.0)
}

fn state(grid: GridSpec, seed: u64, with_b: bool) -> MhdState {
    let w = field(grid, seed);
    let b = if with_b {
        random_solenoidal(grid, seed ^ 0x5555, -1.0, (1.0, grid.k_max()), 0.7)
    } else {
        SpectralVectorField::zeros(grid)
    };
    MhdState { w, b, t: 0.0 }
}

/// `1 ≤ D̂ ≤ N+1` and `D̂ ≤ Â` on random `(|k|², α, θ, N)`; reports the
/// smallest slack.
pub fn symbol_bounds(samples: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut at = String::new();
    for _ in 0..samples {
        let k_sq = rng.random_range(0.0..=1e4);
        let alpha = 10f64.powf(rng.random_range(-2.0..=1.0));
        let theta = rng.random_range(0.0..=1.0);
        let n = rng.random_range(0..=64u32);
        let fp = FilterParams { alpha, theta };
        let d = deconv_symbol(k_sq, &fp, &DeconvParams::new(n));
        let a = helmholtz_symbol(k_sq, &fp, 1.0);
        let slack = (d - 1.0).min(f64::from(n) + 1.0 - d).min(a - d);
        if !(slack >= worst) {
            worst = slack;
            at = format!("|k|²={k_sq:.6e} α={alpha:.4e} θ={theta:.4} N={n}");
        }
    }
    CheckOutcome::at_least("symbol_bounds", worst, -1e-12, format!("{samples} samples, worst at {at}"))
}

fn rel_slack(small: f64, big: f64) -> f64 {
    if big == 0.0 {
        if small == 0.0 {
            0.0
        } else {
            -f64::INFINITY
        }
    } else {
        (big - small) / big
    }
}

/// `‖v‖_s ≤ ‖D_N v‖_s ≤ (N+1)‖v‖_s` and `‖A^{1/2}D_N^{1/2} A⁻¹ v‖_s ≤ ‖v‖_s`.
pub fn norm_chain(grid: GridSpec, fp: &FilterParams, fields: usize, s_list: &[f64], n_list: &[u32], seed: u64) -> CheckOutcome {
    let mut worst = f64::INFINITY;
    for f in 0..fields {
        let v = field(grid, seed + f as u64);
        let filtered = apply_helmholtz_power(&v, fp, -1.0);
        for &n in n_list {
            let dp = DeconvParams::new(n);
            let dv = apply_deconvolution(&v, fp, &dp);
            let root = apply_energy_root(&filtered, fp, &dp);
            for &s in s_list {
                let nv = v.sobolev_norm(s);
                let nd = dv.sobolev_norm(s);
                worst = worst
                    .min(rel_slack(nv, nd))
                    .min(rel_slack(nd, (f64::from(n) + 1.0) * nv))
                    .min(rel_slack(root.sobolev_norm(s), nv));
            }
        }
    }
    CheckOutcome::at_least(
        "norm_chain",
        worst,
        -1e-10,
        format!("{fields} fields, s ∈ {s_list:?}, N ∈ {n_list:?}"),
    )
}

pub fn helmholtz_identity(grid: GridSpec, fp: &FilterParams, fields: usize, seed: u64) -> CheckOutcome {
    let worst = (0..fields)
        .map(|f| helmholtz_norm_identity_check(&field(grid, seed + f as u64), fp))
        .fold(0.0, f64::max);
    CheckOutcome::at_most("helmholtz_identity", worst, 1e-12, format!("{fields} fields"))
}

/// `max_N e_{N+1}/e_N − r_max` over `N = 0..n_max−1`, `e_N = ‖D_N v − A v‖₂`.
pub fn deconv_limit_ratio(v: &SpectralVectorField, fp: &FilterParams, n_max: u32) -> CheckOutcome {
    let grid = v.grid();
    let k_sq_max = grid.modes().map(|m| m.k_sq).fold(0.0, f64::max);
    let a = fp.filter_excess(k_sq_max);
    let r_max = a / (1.0 + a);
    let errs: Vec<f64> = (0..=n_max).map(|n| deconv_limit_error(v, fp, &DeconvParams::new(n))).collect();
    let worst = errs.windows(2).map(|e| e[1] / e[0] - r_max).fold(f64::NEG_INFINITY, f64::max);
    CheckOutcome::at_most(
        "deconv_limit_ratio",
        worst,
        1e-10,
        format!("r_max = {r_max:.12}, e_0 = {:.3e}, e_{n_max} = {:.3e}", errs[0], errs[n_max as usize]),
    )
}

fn case_params(case: ModelCase) -> PhysicalParams {
    match case {
        ModelCase::DoubleViscous | ModelCase::LimitModel => PhysicalParams { nu: 0.01, mu: 0.01, case },
        ModelCase::InviscidMomentum => PhysicalParams { nu: 0.0, mu: 0.01, case },
        ModelCase::DeconvEuler => PhysicalParams { nu: 0.0, mu: 0.0, case },
    }
}

const ALL_CASES: [ModelCase; 4] =
    [ModelCase::DoubleViscous, ModelCase::InviscidMomentum, ModelCase::DeconvEuler, ModelCase::LimitModel];

/// Relative work of the nonlinear terms on the model energy, every case.
pub fn energy_neutrality(grid: GridSpec, fp: &FilterParams, dp: &DeconvParams, states: usize, seed: u64) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for case in ALL_CASES {
        let model = MhdModel::new(grid, *fp, *dp, case_params(case));
        for s in 0..states {
            let st = state(grid, seed + s as u64, case != ModelCase::DeconvEuler);
            worst = worst.max(model.energy_cancellation_check(&st)?);
        }
    }
    Ok(CheckOutcome::at_most("energy_neutrality", worst, 1e-10, format!("{states} states × {} cases", ALL_CASES.len())))
}

/// `⟨B⊗B, ∇u⟩ = −⟨(B·∇)B, u⟩` through two independent routes.
pub fn cross_term_identity(grid: GridSpec, fp: &FilterParams, dp: &DeconvParams, states: usize, seed: u64) -> Result<CheckOutcome> {
    let model = MhdModel::new(grid, *fp, *dp, case_params(ModelCase::DoubleViscous));
    let mut worst = 0.0f64;
    for s in 0..states {
        worst = worst.max(model.cross_term_identity_residual(&state(grid, seed + s as u64, true))?);
    }
    Ok(CheckOutcome::at_most("cross_term_identity", worst, 1e-10, format!("{states} states")))
}

/// `Δq` of the recovered pressure against `−div div(overline(u⊗u) − overline(B⊗B))`
/// assembled from separately formed products.
pub fn pressure_recovery(grid: GridSpec, fp: &FilterParams, dp: &DeconvParams, states: usize, seed: u64) -> Result<CheckOutcome> {
    let model = MhdModel::new(grid, *fp, *dp, case_params(ModelCase::DoubleViscous));
    let mut worst = 0.0f64;
    for s in 0..states {
        let st = state(grid, seed + s as u64, true);
        let q = model.recover_pressure(&st)?;
        let u = model.advecting_velocity(&st.w);
        let mut f = model.filtered_divergence_of_product(&u, &u, true)?;
        f.axpy(-1.0, &model.filtered_divergence_of_product(&st.b, &st.b, true)?);
        let (mut num, mut den) = (0.0, 0.0);
        for m in grid.modes() {
            let c = f.coeffs()[m.idx];
            // −div F = −i k·F
            let src = -num_complex::Complex64::i() * (c[0] * m.kf[0] + c[1] * m.kf[1] + c[2] * m.kf[2]);
            let lap = -q.coeffs()[m.idx] * m.k_sq;
            num += (lap - src).norm_sqr();
            den += src.norm_sqr();
        }
        worst = worst.max(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() });
    }
    Ok(CheckOutcome::at_most("pressure_recovery", worst, 1e-10, format!("{states} states")))
}

/// Idempotence, solenoidality and `L²` contraction of the Leray projector.
pub fn leray_projection(grid: GridSpec, fields: usize, seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..fields {
        let raw = SpectralVectorField::from_fn(grid, |_| {
            std::array::from_fn(|_| num_complex::Complex64::new(rng.random_range(-1.0..1.0), 0.0))
        });
        // real-symmetric so the field is real
        let mut sym = raw.clone();
        for m in grid.modes() {
            let mk = grid.index([-m.k[0], -m.k[1], -m.k[2]]).expect("retained set is symmetric");
            let c = raw.coeffs()[mk];
            let own = raw.coeffs()[m.idx];
            sym.coeffs_mut()[m.idx] = std::array::from_fn(|i| {
                num_complex::Complex64::new(own[i].re + c[i].re, own[i].re - c[i].re)
            });
        }
        let p = sym.leray_project();
        let pp = p.leray_project();
        let norm = sym.l2_norm().max(f64::MIN_POSITIVE);
        worst = worst
            .max(pp.sub(&p).l2_norm() / norm)
            .max(p.divergence_residual() / norm)
            .max((p.l2_norm() - norm).max(0.0) / norm);
    }
    CheckOutcome::at_most("leray_projection", worst, 1e-12, format!("{fields} fields"))
}

/// Inverse then forward transform reproduces the coefficients.
pub fn transform_round_trip(grid: GridSpec, fields: usize, seed: u64) -> Result<CheckOutcome> {
    let t = SpectralTransform::new(grid);
    let mut worst = 0.0f64;
    for f in 0..fields {
        let v = field(grid, seed + f as u64);
        let back = t.forward_transform(&t.inverse_transform(&v)?)?;
        worst = worst.max(back.sub(&v).l2_norm() / v.l2_norm());
    }
    Ok(CheckOutcome::at_most("transform_round_trip", worst, 1e-12, format!("{fields} fields")))
}

/// The suite run by `operator_check` at the configured grid and filter.
pub fn operator_suite(grid: GridSpec, fp: &FilterParams, dp: &DeconvParams, seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        symbol_bounds(10_000, seed),
        norm_chain(grid, fp, 10, &[-1.0, 0.0, 0.5, 1.0, 2.0], &[0, 1, 4, 16, dp.order_n], seed),
        helmholtz_identity(grid, fp, 10, seed),
        deconv_limit_ratio(&field(grid, seed), fp, 16),
        leray_projection(grid, 5, seed),
        transform_round_trip(grid, 5, seed)?,
        energy_neutrality(grid, fp, dp, 3, seed)?,
        cross_term_identity(grid, fp, dp, 3, seed)?,
        pressure_recovery(grid, fp, dp, 3, seed)?,
    ])
}
