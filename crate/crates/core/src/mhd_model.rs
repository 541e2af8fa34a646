//! Right-hand sides of the deconvolution MHD system.
//!
//! With `u = D_N w` (or `u = A_θ w` for the limit model) the evolution is
//!
//! ```text
//! ∂t w = −P A⁻¹ div(u⊗u − B⊗B) + ν Δw
//! ∂t B = div(u⊗B − B⊗u) + μ ΔB  = curl(u × B) + μ ΔB
//! ```
//!
//! where `P` is the Leray projector and `A⁻¹` the Helmholtz filter applied
//! componentwise. Quadratic products are formed on the padded grid and
//! truncated to the retained lattice, which makes every retained coefficient
//! of a product exact.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_ops::{deconv_symbol, helmholtz_symbol, DeconvParams, FilterParams};
use crate::spectral_field::{symbol_table, GridSpec, SpectralScalarField, SpectralVectorField};
use crate::transform::SpectralTransform;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Symmetric tensor component order used throughout: xx, yy, zz, xy, xz, yz.
const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[inline]
fn sym_index(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCase {
    /// `ν > 0`, `μ > 0`.
    DoubleViscous,
    /// `ν = 0`, `μ > 0`.
    InviscidMomentum,
    /// `ν = 0`, `B ≡ 0`.
    DeconvEuler,
    /// `D_N` replaced by `A_θ`.
    LimitModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub nu: f64,
    pub mu: f64,
    pub case: ModelCase,
}

impl PhysicalParams {
    pub fn new(nu: f64, mu: f64, case: ModelCase) -> Result<Self> {
        let errs = Self::violations(nu, mu, case);
        if errs.is_empty() {
            Ok(Self { nu, mu, case })
        } else {
            Err(Error::Config(errs))
        }
    }

    pub(crate) fn violations(nu: f64, mu: f64, case: ModelCase) -> Vec<String> {
        let mut errs = Vec::new();
        if !(nu >= 0.0 && nu.is_finite()) {
            errs.push(format!("nu must be >= 0 (got {nu})"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            errs.push(format!("mu must be >= 0 (got {mu})"));
        }
        match case {
            ModelCase::DoubleViscous if !(nu > 0.0 && mu > 0.0) => errs.push(format!(
                "case double_viscous requires nu > 0 and mu > 0 for the double viscous \
                 well-posedness result (got nu = {nu}, mu = {mu})"
            )),
            ModelCase::InviscidMomentum if !(nu == 0.0 && mu > 0.0) => errs.push(format!(
                "case inviscid_momentum requires nu = 0 and mu > 0 (got nu = {nu}, mu = {mu})"
            )),
            ModelCase::DeconvEuler if nu != 0.0 => {
                errs.push(format!("case deconv_euler requires nu = 0 (got nu = {nu})"))
            }
            _ => {}
        }
        errs
    }

    /// Magnetic diffusivity actually applied (zero when `B` is pinned).
    pub fn effective_mu(&self) -> f64 {
        if self.case == ModelCase::DeconvEuler {
            0.0
        } else {
            self.mu
        }
    }
}

/// Filtered velocity `w`, magnetic field `B`, time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MhdState {
    pub w: SpectralVectorField,
    pub b: SpectralVectorField,
    pub t: f64,
}

impl MhdState {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { w: SpectralVectorField::zeros(grid), b: SpectralVectorField::zeros(grid), t: 0.0 }
    }

    pub fn grid(&self) -> GridSpec {
        self.w.grid()
    }
}

/// Multiplier taking `w` to the advecting velocity `u`.
#[inline]
pub fn velocity_symbol(k_sq: f64, fp: &FilterParams, dp: &DeconvParams, case: ModelCase) -> f64 {
    match case {
        ModelCase::LimitModel => helmholtz_symbol(k_sq, fp, 1.0),
        _ => deconv_symbol(k_sq, fp, dp),
    }
}

/// Energy weight `Â·D̂` (or `Â²` for the limit model) per mode.
#[inline]
pub fn energy_weight(k_sq: f64, fp: &FilterParams, dp: &DeconvParams, case: ModelCase) -> f64 {
    helmholtz_symbol(k_sq, fp, 1.0) * velocity_symbol(k_sq, fp, dp, case)
}

/// Parameters plus planned transforms; evaluates every model term.
#[derive(Debug)]
pub struct MhdModel {
    transform: SpectralTransform,
    pub fp: FilterParams,
    pub dp: DeconvParams,
    pub pp: PhysicalParams,
    /// Per-slot `Â`, velocity symbol and energy weight.
    helm: Vec<f64>,
    vel: Vec<f64>,
    weight: Vec<f64>,
}

/// Spectral products of the advecting velocity and the magnetic field.
struct Products {
    /// `u⊗u − B⊗B`, symmetric order.
    stress: [Vec<Complex64>; 6],
    /// `u × B`, absent when the magnetic field is inactive.
    emf: Option<[Vec<Complex64>; 3]>,
}

impl MhdModel {
    pub fn new(grid: GridSpec, fp: FilterParams, dp: DeconvParams, pp: PhysicalParams) -> Self {
        let helm = symbol_table(grid, |k_sq| helmholtz_symbol(k_sq, &fp, 1.0));
        let vel = symbol_table(grid, |k_sq| velocity_symbol(k_sq, &fp, &dp, pp.case));
        let weight = helm.iter().zip(&vel).map(|(a, v)| a * v).collect();
        Self { transform: SpectralTransform::new(grid), fp, dp, pp, helm, vel, weight }
    }

    /// Per-slot energy weight table (zero on pinned slots).
    pub fn energy_weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn grid(&self) -> GridSpec {
        self.transform.grid()
    }

    pub fn transform(&self) -> &SpectralTransform {
        &self.transform
    }

    pub fn velocity_symbol(&self, k_sq: f64) -> f64 {
        velocity_symbol(k_sq, &self.fp, &self.dp, self.pp.case)
    }

    pub fn energy_weight(&self, k_sq: f64) -> f64 {
        energy_weight(k_sq, &self.fp, &self.dp, self.pp.case)
    }

    /// `u = D_N w` (or `A_θ w`).
    pub fn advecting_velocity(&self, w: &SpectralVectorField) -> SpectralVectorField {
        w.scaled_by_table(&self.vel)
    }

    fn check_state(&self, state: &MhdState) -> Result<()> {
        let g = self.grid();
        if state.w.grid() != g || state.b.grid() != g {
            return Err(Error::config(format!(
                "state grid {:?}/{:?} does not match model grid {g:?}",
                state.w.grid(),
                state.b.grid()
            )));
        }
        Ok(())
    }

    fn magnetic_active(&self, b: &SpectralVectorField) -> bool {
        self.pp.case != ModelCase::DeconvEuler && b.norm_sq() > 0.0
    }

    fn products(&self, state: &MhdState) -> Products {
        let u = self.advecting_velocity(&state.w);
        let with_b = self.magnetic_active(&state.b);
        let t = &self.transform;
        let phys = if with_b { t.inverse_vectors(&[&u, &state.b]) } else { t.inverse_vectors(&[&u]) };

        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(9);
        for &(i, j) in &SYM_PAIRS {
            let (ui, uj) = (&phys[i], &phys[j]);
            let mut s = t.take_real();
            if with_b {
                let (bi, bj) = (&phys[3 + i], &phys[3 + j]);
                for p in 0..s.len() {
                    s[p] = ui[p] * uj[p] - bi[p] * bj[p];
                }
            } else {
                for p in 0..s.len() {
                    s[p] = ui[p] * uj[p];
                }
            }
            fields.push(s);
        }
        if with_b {
            let (u, b) = (&phys[..3], &phys[3..]);
            for (j, k) in [(1, 2), (2, 0), (0, 1)] {
                // (u × B)_i = u_j B_k − u_k B_j, i = 0, 1, 2
                let mut e = t.take_real();
                for p in 0..e.len() {
                    e[p] = u[j][p] * b[k][p] - u[k][p] * b[j][p];
                }
                fields.push(e);
            }
        }
        let refs: Vec<&[f64]> = fields.iter().map(Vec::as_slice).collect();
        let mut spec = t.forward_many(&refs).into_iter();
        t.recycle(phys.into_iter().chain(fields));
        let stress = std::array::from_fn(|_| spec.next().unwrap());
        let emf = with_b.then(|| std::array::from_fn(|_| spec.next().unwrap()));
        Products { stress, emf }
    }

    /// Projected nonlinear terms `(−P A⁻¹ div(u⊗u − B⊗B), curl(u × B))`,
    /// without the diffusive parts.
    pub fn nonlinear_terms(&self, state: &MhdState) -> Result<(SpectralVectorField, SpectralVectorField)> {
        self.check_state(state)?;
        Ok(self.nonlinear_unchecked(state))
    }

    pub(crate) fn nonlinear_unchecked(&self, state: &MhdState) -> (SpectralVectorField, SpectralVectorField) {
        let grid = self.grid();
        let prod = self.products(state);
        let s = &prod.stress;
        let mut nw = SpectralVectorField::zeros(grid);
        let mut nb = SpectralVectorField::zeros(grid);
        {
            let out = nw.coeffs_mut();
            for m in grid.modes() {
                let k = m.kf;
                let filt = -1.0 / self.helm[m.idx];
                let mut d = [Complex64::new(0.0, 0.0); 3];
                for (i, di) in d.iter_mut().enumerate() {
                    let row = (0..3).map(|j| s[sym_index(i, j)][m.idx] * k[j]).sum::<Complex64>();
                    *di = I * row * filt;
                }
                let kd = (d[0] * k[0] + d[1] * k[1] + d[2] * k[2]) / m.k_sq;
                out[m.idx] = [d[0] - kd * k[0], d[1] - kd * k[1], d[2] - kd * k[2]];
            }
        }
        if let Some(e) = &prod.emf {
            let out = nb.coeffs_mut();
            for m in grid.modes() {
                let k = m.kf;
                let ev = [e[0][m.idx], e[1][m.idx], e[2][m.idx]];
                out[m.idx] = [
                    I * (ev[2] * k[1] - ev[1] * k[2]),
                    I * (ev[0] * k[2] - ev[2] * k[0]),
                    I * (ev[1] * k[0] - ev[0] * k[1]),
                ];
            }
        }
        (nw, nb)
    }

    /// `∂t w` with the pressure gradient removed by projection.
    pub fn momentum_rhs(&self, state: &MhdState) -> Result<SpectralVectorField> {
        let (mut nw, _) = self.nonlinear_terms(state)?;
        nw.axpy(1.0, &state.w.scaled_by_symbol(|k_sq| -self.pp.nu * k_sq));
        Ok(nw)
    }

    /// `∂t B`.
    pub fn induction_rhs(&self, state: &MhdState) -> Result<SpectralVectorField> {
        let (_, mut nb) = self.nonlinear_terms(state)?;
        let mu = self.pp.effective_mu();
        nb.axpy(1.0, &state.b.scaled_by_symbol(|k_sq| -mu * k_sq));
        Ok(nb)
    }

    /// `div(u ⊗ v)` with `(u⊗v)_{ij} = u_i v_j`, truncated to the retained
    /// lattice; filtered componentwise when `apply_bar` is set.
    pub fn filtered_divergence_of_product(
        &self,
        u: &SpectralVectorField,
        v: &SpectralVectorField,
        apply_bar: bool,
    ) -> Result<SpectralVectorField> {
        let g = self.grid();
        if u.grid() != g || v.grid() != g {
            return Err(Error::config("operand grid does not match model grid"));
        }
        let pu = self.transform.to_physical(u);
        let pv = self.transform.to_physical(v);
        let mut fields = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                fields.push(pu.comps[i].iter().zip(&pv.comps[j]).map(|(a, b)| a * b).collect::<Vec<f64>>());
            }
        }
        let refs: Vec<&[f64]> = fields.iter().map(Vec::as_slice).collect();
        let t = self.transform.forward_many(&refs);
        let out = SpectralVectorField::from_fn(g, |m| {
            let bar = if apply_bar { 1.0 / helmholtz_symbol(m.k_sq, &self.fp, 1.0) } else { 1.0 };
            std::array::from_fn(|i| {
                I * (0..3).map(|j| t[3 * i + j][m.idx] * m.kf[j]).sum::<Complex64>() * bar
            })
        });
        Ok(out)
    }

    /// Pressure from `Δq = −div div Π(overline(u⊗u) − overline(B⊗B))`.
    pub fn recover_pressure(&self, state: &MhdState) -> Result<SpectralScalarField> {
        self.check_state(state)?;
        let src = self.pressure_source(state);
        let grid = self.grid();
        let mut q = vec![Complex64::new(0.0, 0.0); grid.mode_count()];
        for m in grid.modes() {
            q[m.idx] = -src[m.idx] / m.k_sq;
        }
        SpectralScalarField::from_coeffs(grid, q)
    }

    /// Coefficients of `−div div T` with `T` the filtered stress difference.
    pub fn pressure_source(&self, state: &MhdState) -> Vec<Complex64> {
        let grid = self.grid();
        let prod = self.products(state);
        let mut src = vec![Complex64::new(0.0, 0.0); grid.mode_count()];
        for m in grid.modes() {
            let bar = 1.0 / helmholtz_symbol(m.k_sq, &self.fp, 1.0);
            let k = m.kf;
            // −(ik_i)(ik_j) T_ij = k_i k_j T_ij
            let kk: Complex64 = (0..3)
                .flat_map(|i| (0..3).map(move |j| (i, j)))
                .map(|(i, j)| prod.stress[sym_index(i, j)][m.idx] * (k[i] * k[j]))
                .sum();
            src[m.idx] = kk * bar;
        }
        src
    }

    /// Relative size of the work done by the nonlinear terms on the model
    /// energy: `|⟨N_w, A u⟩ + ⟨N_B, B⟩|`, normalized by
    /// `‖N_w‖‖A u‖ + ‖N_B‖‖B‖`.
    pub fn energy_cancellation_check(&self, state: &MhdState) -> Result<f64> {
        let (nw, nb) = self.nonlinear_terms(state)?;
        let test_w = state.w.scaled_by_table(&self.weight);
        let work = nw.inner(&test_w) + nb.inner(&state.b);
        let scale = nw.l2_norm() * test_w.l2_norm() + nb.l2_norm() * state.b.l2_norm();
        Ok(if scale == 0.0 { work.abs() } else { work.abs() / scale })
    }

    /// Cross-term identity `⟨B⊗B, ∇u⟩ = −⟨(B·∇)B, u⟩` evaluated by two
    /// independent routes; returns the relative discrepancy.
    pub fn cross_term_identity_residual(&self, state: &MhdState) -> Result<f64> {
        self.check_state(state)?;
        let grid = self.grid();
        let t = &self.transform;
        let u = self.advecting_velocity(&state.w);
        let pb = t.to_physical(&state.b);

        // route 1: spectral B⊗B contracted with i k_j u_i
        let bb: Vec<Vec<f64>> = SYM_PAIRS
            .iter()
            .map(|&(i, j)| pb.comps[i].iter().zip(&pb.comps[j]).map(|(a, b)| a * b).collect())
            .collect();
        let refs: Vec<&[f64]> = bb.iter().map(Vec::as_slice).collect();
        let bb_hat = t.forward_many(&refs);
        let mut lhs = 0.0;
        for m in grid.modes() {
            let uc = u.coeffs()[m.idx];
            for i in 0..3 {
                for j in 0..3 {
                    let grad = I * uc[i] * m.kf[j];
                    lhs += (bb_hat[sym_index(i, j)][m.idx] * grad.conj()).re;
                }
            }
        }

        // route 2: physical (B·∇)B tested against u
        let grads: Vec<Vec<Complex64>> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| {
                let mut g = vec![Complex64::new(0.0, 0.0); grid.mode_count()];
                for m in grid.modes() {
                    g[m.idx] = I * state.b.coeffs()[m.idx][i] * m.kf[j];
                }
                g
            })
            .collect();
        let refs: Vec<&[Complex64]> = grads.iter().map(Vec::as_slice).collect();
        let dphys = t.inverse_many(&refs);
        let adv: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..pb.comps[0].len())
                    .map(|p| (0..3).map(|j| pb.comps[j][p] * dphys[3 * i + j][p]).sum())
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = adv.iter().map(Vec::as_slice).collect();
        let adv_hat = t.forward_many(&refs);
        let adv_field = t.assemble_vector(&adv_hat[0], &adv_hat[1], &adv_hat[2]);
        let rhs = -adv_field.inner(&u);

        let scale = lhs.abs().max(rhs.abs());
        Ok(if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale })
    }
}
