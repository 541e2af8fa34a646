//! Run configuration, read from and rendered to TOML.
//!
//! ```toml
//! [grid]
//! n_per_axis = 16        # padded_n defaults to ⌈3n/2⌉ rounded up to even
//! [filter]
//! alpha = 0.5
//! theta = 1.0
//! [deconv]
//! order_n = 5
//! [physics]
//! nu = 0.0
//! mu = 0.0
//! case = "deconv_euler"
//! [integrator]
//! t_end = 1.0            # dt = 1e-3, cfl_safety = 0.5 by default
//! [initial_condition]
//! kind = "abc"
//! a = 1.0
//! b = 1.0
//! c = 1.0
//! [output]
//! directory = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter_ops::{apply_helmholtz_power, DeconvParams, FilterParams};
use crate::initial::{abc_field, random_solenoidal};
use crate::mhd_model::{MhdState, ModelCase, PhysicalParams};
use crate::snapshot::load_state;
use crate::spectral_field::{GridSpec, SpectralVectorField};
use crate::time_integrator::{IntegratorConfig, Scheme};

/// Offset between the velocity and magnetic seed streams.
pub const MAGNETIC_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_per_axis: usize,
    pub padded_n: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub alpha: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvSection {
    pub order_n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    pub nu: f64,
    pub mu: f64,
    pub case: ModelCase,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_cfl() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
}

fn one() -> f64 {
    1.0
}

fn unit_band() -> [f64; 2] {
    [1.0, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Velocity `v₀` is the ABC flow; `B₀ = magnetic_scale · v₀`.
    Abc {
        a: f64,
        b: f64,
        c: f64,
        #[serde(default)]
        magnetic_scale: f64,
    },
    /// Seeded spectra on `band[0] ≤ |k| ≤ band[1]`; `B₀` uses an independent stream.
    RandomSolenoidal {
        seed: u64,
        #[serde(default)]
        spectrum_slope: f64,
        #[serde(default = "unit_band")]
        band: [f64; 2],
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        magnetic_amplitude: f64,
    },
    /// Saved `(w, B)` state, used as is.
    FromSnapshot { path: PathBuf },
}

fn default_record_interval() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_record_interval")]
    pub record_interval: usize,
    /// Steps between snapshots; 0 writes only the final state.
    #[serde(default)]
    pub snapshot_interval: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: None, record_interval: 1, snapshot_interval: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridSection,
    pub filter: FilterSection,
    pub deconv: DeconvSection,
    pub physics: PhysicsSection,
    pub integrator: IntegratorSection,
    pub initial_condition: InitialCondition,
    #[serde(default)]
    pub output: OutputSection,
}

impl SimConfig {
    /// Parses and validates, filling `padded_n`. Reports every violation at once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        if cfg.grid.padded_n.is_none() {
            cfg.grid.padded_n = Some(GridSpec::default_padding(cfg.grid.n_per_axis));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn violations(&self) -> Vec<String> {
        let mut errs = GridSpec::violations(self.grid.n_per_axis, self.padded_n());
        errs.extend(FilterParams::violations(self.filter.alpha, self.filter.theta));
        errs.extend(PhysicalParams::violations(self.physics.nu, self.physics.mu, self.physics.case));
        errs.extend(self.integrator_config().violations());
        if self.output.record_interval == 0 {
            errs.push("output.record_interval must be >= 1".into());
        }
        match &self.initial_condition {
            InitialCondition::Abc { a, b, c, magnetic_scale } => {
                if ![a, b, c, magnetic_scale].iter().all(|v| v.is_finite()) {
                    errs.push("ABC amplitudes must be finite".into());
                }
            }
            InitialCondition::RandomSolenoidal { seed, band, amplitude, magnetic_amplitude, spectrum_slope } => {
                if *seed > i64::MAX as u64 {
                    errs.push(format!("seed must be <= {} (got {seed})", i64::MAX));
                }
                if !(band[0] >= 0.0 && band[0] <= band[1] && band[1].is_finite()) {
                    errs.push(format!("band must satisfy 0 ≤ lo ≤ hi (got {band:?})"));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0 && magnetic_amplitude.is_finite() && *magnetic_amplitude >= 0.0) {
                    errs.push("amplitudes must be finite and >= 0".into());
                }
                if !spectrum_slope.is_finite() {
                    errs.push("spectrum_slope must be finite".into());
                }
            }
            InitialCondition::FromSnapshot { .. } => {}
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn padded_n(&self) -> usize {
        self.grid.padded_n.unwrap_or_else(|| GridSpec::default_padding(self.grid.n_per_axis))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n_per_axis, self.padded_n())
    }

    pub fn filter_params(&self) -> Result<FilterParams> {
        FilterParams::new(self.filter.alpha, self.filter.theta)
    }

    pub fn deconv_params(&self) -> DeconvParams {
        DeconvParams::new(self.deconv.order_n)
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(self.physics.nu, self.physics.mu, self.physics.case)
    }

    pub fn integrator_config(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.integrator.dt,
            t_end: self.integrator.t_end,
            cfl_safety: self.integrator.cfl_safety,
            scheme: Scheme::Ifrk4,
            record_interval: self.output.record_interval.max(1),
        }
    }

    /// Replaces the random seed; no effect on other initial conditions.
    pub fn override_seed(&mut self, new_seed: u64) {
        if let InitialCondition::RandomSolenoidal { seed, .. } = &mut self.initial_condition {
            *seed = new_seed;
        }
    }

    /// Unfiltered initial velocity and magnetic field, for ABC and random data.
    pub fn initial_fields(&self) -> Result<Option<(SpectralVectorField, SpectralVectorField)>> {
        let grid = self.grid_spec()?;
        let fields = match &self.initial_condition {
            InitialCondition::Abc { a, b, c, magnetic_scale } => {
                let v0 = abc_field(grid, *a, *b, *c);
                let mut b0 = v0.clone();
                b0.scale(*magnetic_scale);
                (v0, b0)
            }
            InitialCondition::RandomSolenoidal { seed, spectrum_slope, band, amplitude, magnetic_amplitude } => {
                let band = (band[0], band[1]);
                (
                    random_solenoidal(grid, *seed, *spectrum_slope, band, *amplitude),
                    random_solenoidal(grid, seed ^ MAGNETIC_SEED_OFFSET, *spectrum_slope, band, *magnetic_amplitude),
                )
            }
            InitialCondition::FromSnapshot { .. } => return Ok(None),
        };
        let b0 = if self.physics.case == ModelCase::DeconvEuler { SpectralVectorField::zeros(grid) } else { fields.1 };
        Ok(Some((fields.0, b0)))
    }
}

/// `w₀ = A⁻¹ v₀` for prescribed data; snapshots are loaded unchanged.
pub fn make_initial_state(cfg: &SimConfig) -> Result<MhdState> {
    let grid = cfg.grid_spec()?;
    match cfg.initial_fields()? {
        Some((v0, b0)) => {
            let w = apply_helmholtz_power(&v0, &cfg.filter_params()?, -1.0);
            Ok(MhdState { w, b: b0, t: 0.0 })
        }
        None => {
            let InitialCondition::FromSnapshot { path } = &cfg.initial_condition else { unreachable!() };
            let mut s = load_state(path, Some(grid))?;
            if cfg.physics.case == ModelCase::DeconvEuler && s.b.norm_sq() != 0.0 {
                return Err(Error::Config(vec!["deconv_euler requires B ≡ 0 but the snapshot carries a magnetic field".into()]));
            }
            s.t = 0.0;
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    const MINIMAL: &str = r#"
[grid]
n_per_axis = 8
[filter]
alpha = 0.5
theta = 1.0
[deconv]
order_n = 2
[physics]
nu = 0.0
mu = 0.0
case = "deconv_euler"
[integrator]
t_end = 0.1
[initial_condition]
kind = "abc"
a = 1.0
b = 1.0
c = 1.0
"#;

    fn errors(text: &str) -> Vec<String> {
        match SimConfig::parse(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = SimConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.grid.padded_n, Some(12));
        assert_eq!(cfg.integrator.dt, 1e-3);
        assert_eq!(cfg.integrator.cfl_safety, 0.5);
        assert_eq!(cfg.output, OutputSection::default());
    }

    #[test]
    fn render_round_trip() {
        let cfg = SimConfig::parse(MINIMAL).unwrap();
        assert_eq!(SimConfig::parse(&cfg.render()).unwrap(), cfg);
        let random = MINIMAL.replace(
            "kind = \"abc\"\na = 1.0\nb = 1.0\nc = 1.0",
            "kind = \"random_solenoidal\"\nseed = 3\nspectrum_slope = -2.0\nband = [1.0, 3.0]",
        );
        let cfg = SimConfig::parse(&random).unwrap();
        assert_eq!(SimConfig::parse(&cfg.render()).unwrap(), cfg);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = errors(&MINIMAL.replace("order_n = 2", "order_n = 2\nbogus_key = 1"));
        assert!(e[0].contains("bogus_key"), "{e:?}");
        let e = errors(&MINIMAL.replace("a = 1.0", "a = 1.0\nseed = 4"));
        assert!(e[0].contains("seed"), "{e:?}");
    }

    #[test]
    fn every_violation_is_reported() {
        let e = errors(&MINIMAL.replace("theta = 1.0", "theta = 1.5").replace("t_end = 0.1", "t_end = -1.0"));
        assert!(e.iter().any(|m| m.contains("theta ∈ [0,1]")), "{e:?}");
        assert!(e.iter().any(|m| m.contains("t_end")), "{e:?}");
        let e = errors(&MINIMAL.replace("case = \"deconv_euler\"", "case = \"double_viscous\""));
        assert!(e.iter().any(|m| m.contains("double_viscous") && m.contains("nu")), "{e:?}");
    }

    #[test]
    fn abc_state_is_filtered_abc() {
        let cfg = SimConfig::parse(MINIMAL).unwrap();
        let s = make_initial_state(&cfg).unwrap();
        // Â = 1 + 0.25 on |k| = 1
        let c = s.w.get([1, 0, 0]);
        assert!((c[1] - Complex64::new(0.0, -0.5 / 1.25)).norm() < 1e-15);
        assert!((c[2] - Complex64::new(0.5 / 1.25, 0.0)).norm() < 1e-15);
        assert!(s.w.is_solenoidal());
        assert_eq!(s.b.norm_sq(), 0.0);
    }

    #[test]
    fn random_state_is_deterministic_with_independent_b() {
        let text = MINIMAL
            .replace("case = \"deconv_euler\"", "case = \"double_viscous\"")
            .replace("nu = 0.0\nmu = 0.0", "nu = 0.1\nmu = 0.1")
            .replace(
                "kind = \"abc\"\na = 1.0\nb = 1.0\nc = 1.0",
                "kind = \"random_solenoidal\"\nseed = 9\nmagnetic_amplitude = 0.5",
            );
        let cfg = SimConfig::parse(&text).unwrap();
        let a = make_initial_state(&cfg).unwrap();
        assert_eq!(a, make_initial_state(&cfg).unwrap());
        assert!((a.b.l2_norm() - 0.5).abs() < 1e-14);
        let mut w_dir = a.w.clone();
        w_dir.scale(1.0 / w_dir.l2_norm());
        assert!(w_dir.inner(&a.b).abs() < 0.49);
    }

    #[test]
    fn snapshot_initial_condition_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let cfg = SimConfig::parse(MINIMAL).unwrap();
        let s = make_initial_state(&cfg).unwrap();
        crate::snapshot::save_state(&path, &s).unwrap();
        let mut snap = cfg.clone();
        snap.initial_condition = InitialCondition::FromSnapshot { path: path.clone() };
        assert_eq!(make_initial_state(&snap).unwrap(), s);
        snap.grid = GridSection { n_per_axis: 6, padded_n: Some(10) };
        assert!(matches!(make_initial_state(&snap), Err(Error::Snapshot(_))));
    }
}
