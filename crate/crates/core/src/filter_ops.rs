//! Fractional Helmholtz filter and van Cittert deconvolution as per-mode
//! spectral multipliers.
//!
//! With `a(k) = α^{2θ}|k|^{2θ}`, the Helmholtz symbol is `Â = 1 + a` and the
//! deconvolution symbol of order `N` is the closed form of the geometric
//! series `Σ_{i=0}^{N} (1 − 1/Â)^i`:
//!
//! ```text
//! D̂_N = Â (1 − r^{N+1}),   r = a / (1 + a)
//! ```
//!
//! `1 − r^{N+1}` is evaluated as `−expm1(−(N+1)·ln1p(1/a))`, which stays
//! accurate when `r` is close to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral_field::SpectralVectorField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub alpha: f64,
    pub theta: f64,
}

impl FilterParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        let errs = Self::violations(alpha, theta);
        if errs.is_empty() {
            Ok(Self { alpha, theta })
        } else {
            Err(Error::Config(errs))
        }
    }

    pub(crate) fn violations(alpha: f64, theta: f64) -> Vec<String> {
        let mut errs = Vec::new();
        if !(alpha > 0.0 && alpha.is_finite()) {
            errs.push(format!("alpha must be > 0 (got {alpha})"));
        }
        if !(0.0..=1.0).contains(&theta) {
            errs.push(format!("theta ∈ [0,1] required (got {theta})"));
        }
        errs
    }

    /// `α^{2θ}`.
    pub fn alpha_pow(&self) -> f64 {
        self.alpha.powf(2.0 * self.theta)
    }

    /// `a(k) = α^{2θ} |k|^{2θ}` from `|k|²`.
    #[inline]
    pub fn filter_excess(&self, k_sq: f64) -> f64 {
        self.alpha_pow() * k_sq.powf(self.theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeconvParams {
    pub order_n: u32,
}

impl DeconvParams {
    pub fn new(order_n: u32) -> Self {
        Self { order_n }
    }
}

/// `(1 + α^{2θ}|k|^{2θ})^p`.
#[inline]
pub fn helmholtz_symbol(k_sq: f64, fp: &FilterParams, p: f64) -> f64 {
    let a_hat = 1.0 + fp.filter_excess(k_sq);
    if p == 1.0 {
        a_hat
    } else if p == -1.0 {
        1.0 / a_hat
    } else {
        a_hat.powf(p)
    }
}

/// Closed-form symbol of the order-`N` deconvolution operator.
#[inline]
pub fn deconv_symbol(k_sq: f64, fp: &FilterParams, dp: &DeconvParams) -> f64 {
    let a = fp.filter_excess(k_sq);
    if dp.order_n == 0 || a == 0.0 {
        return 1.0;
    }
    let steps = f64::from(dp.order_n) + 1.0;
    (1.0 + a) * -f64::exp_m1(-steps * (1.0 / a).ln_1p())
}

/// `Â − D̂_N = Â r^{N+1}`, the per-mode gap to the full inverse filter.
#[inline]
pub fn deconv_gap_symbol(k_sq: f64, fp: &FilterParams, dp: &DeconvParams) -> f64 {
    let a = fp.filter_excess(k_sq);
    if a == 0.0 {
        return 0.0;
    }
    let steps = f64::from(dp.order_n) + 1.0;
    (1.0 + a) * f64::exp(-steps * (1.0 / a).ln_1p())
}

/// `r = a/(1+a)` at `|k|²`; the per-order contraction of the gap.
pub fn contraction_ratio(k_sq: f64, fp: &FilterParams) -> f64 {
    let a = fp.filter_excess(k_sq);
    a / (1.0 + a)
}

/// `A_θ^p v`. `p = −1` is the filter `v ↦ v̄`.
pub fn apply_helmholtz_power(field: &SpectralVectorField, fp: &FilterParams, p: f64) -> SpectralVectorField {
    field.scaled_by_symbol(|k_sq| helmholtz_symbol(k_sq, fp, p))
}

/// `D_{N,θ} v`.
pub fn apply_deconvolution(field: &SpectralVectorField, fp: &FilterParams, dp: &DeconvParams) -> SpectralVectorField {
    field.scaled_by_symbol(|k_sq| deconv_symbol(k_sq, fp, dp))
}

/// `A_θ^{1/2} D_{N,θ}^{1/2} v`, the square root of the energy weight.
pub fn apply_energy_root(field: &SpectralVectorField, fp: &FilterParams, dp: &DeconvParams) -> SpectralVectorField {
    field.scaled_by_symbol(|k_sq| (helmholtz_symbol(k_sq, fp, 1.0) * deconv_symbol(k_sq, fp, dp)).sqrt())
}

/// `‖D_{N,θ} v − A_θ v‖₂`.
pub fn deconv_limit_error(field: &SpectralVectorField, fp: &FilterParams, dp: &DeconvParams) -> f64 {
    field.weighted_norm_sq(|k_sq| deconv_gap_symbol(k_sq, fp, dp).powi(2)).sqrt()
}

/// Relative residual of `‖A v‖² = ‖v‖² + 2α^{2θ}‖v‖²_θ + α^{4θ}‖v‖²_{2θ}`.
pub fn helmholtz_norm_identity_check(field: &SpectralVectorField, fp: &FilterParams) -> f64 {
    let lhs = apply_helmholtz_power(field, fp, 1.0).norm_sq();
    let ap = fp.alpha_pow();
    let rhs = field.norm_sq()
        + 2.0 * ap * field.sobolev_norm(fp.theta).powi(2)
        + ap * ap * field.sobolev_norm(2.0 * fp.theta).powi(2);
    if lhs == 0.0 && rhs == 0.0 {
        return 0.0;
    }
    (lhs - rhs).abs() / lhs.max(f64::MIN_POSITIVE)
}

/// One row of the symbol table dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolRow {
    pub k_sq: f64,
    pub theta: f64,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "A_hat")]
    pub a_hat: f64,
    #[serde(rename = "D_hat")]
    pub d_hat: f64,
}

/// Tabulates both symbols over the cartesian product of the inputs.
pub fn symbol_table(k_sq: &[f64], filters: &[FilterParams], orders: &[u32]) -> Vec<SymbolRow> {
    let mut rows = Vec::new();
    for fp in filters {
        for &n in orders {
            for &ks in k_sq {
                let dp = DeconvParams::new(n);
                rows.push(SymbolRow {
                    k_sq: ks,
                    theta: fp.theta,
                    alpha: fp.alpha,
                    n,
                    a_hat: helmholtz_symbol(ks, fp, 1.0),
                    d_hat: deconv_symbol(ks, fp, &dp),
                });
            }
        }
    }
    rows
}

/// Writes `k_sq,theta,alpha,N,A_hat,D_hat` CSV.
pub fn write_symbol_table<W: std::io::Write>(rows: &[SymbolRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
