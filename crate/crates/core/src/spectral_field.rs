//! Mean-free periodic fields on the truncated Fourier lattice.
//!
//! The domain is the torus `[0, 2π)³`, so wavenumbers are integer vectors.
//! A grid with `n_per_axis = n` stores an `n × n × n` block of coefficients
//! in FFT order per axis; the retained lattice is `|k_j| ≤ n/2 − 1`,
//! `k ≠ 0`. The Nyquist planes and the `k = 0` slot are stored but pinned
//! to zero. Both `k` and `−k` are stored, so sums over the lattice count
//! each conjugate pair twice.

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Tolerance, relative to the field norm, used by the solenoidal and
/// conjugate-symmetry checks.
pub const SOLENOIDAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n_per_axis: usize,
    padded_n: usize,
}

impl GridSpec {
    pub fn new(n_per_axis: usize, padded_n: usize) -> Result<Self> {
        let errs = Self::violations(n_per_axis, padded_n);
        if errs.is_empty() {
            Ok(Self { n_per_axis, padded_n })
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Grid with the smallest even padded size satisfying the 3/2 rule.
    pub fn with_default_padding(n_per_axis: usize) -> Result<Self> {
        Self::new(n_per_axis, Self::default_padding(n_per_axis))
    }

    pub fn default_padding(n_per_axis: usize) -> usize {
        let p = (3 * n_per_axis).div_ceil(2);
        p + p % 2
    }

    pub(crate) fn violations(n_per_axis: usize, padded_n: usize) -> Vec<String> {
        let mut errs = Vec::new();
        if n_per_axis < 4 || n_per_axis % 2 != 0 {
            errs.push(format!("n_per_axis must be an even integer >= 4 (got {n_per_axis})"));
        }
        if padded_n % 2 != 0 || padded_n == 0 {
            errs.push(format!("padded_n must be a positive even integer (got {padded_n})"));
        }
        if 2 * padded_n < 3 * n_per_axis {
            errs.push(format!(
                "padded_n must be >= ceil(3*n_per_axis/2) = {} (got {padded_n})",
                (3 * n_per_axis).div_ceil(2)
            ));
        }
        errs
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    pub fn padded_n(&self) -> usize {
        self.padded_n
    }

    /// Largest retained wavenumber per axis.
    pub fn k_axis_max(&self) -> i64 {
        (self.n_per_axis / 2 - 1) as i64
    }

    /// Largest retained `|k|`, attained on the corners of the cube.
    pub fn k_max(&self) -> f64 {
        (3.0f64).sqrt() * self.k_axis_max() as f64
    }

    pub fn mode_count(&self) -> usize {
        self.n_per_axis.pow(3)
    }

    /// Grid spacing of the padded physical grid.
    pub fn dx(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.padded_n as f64
    }

    /// Wavenumber stored at FFT-order position `i`, `None` on the Nyquist plane.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> Option<i64> {
        let n = self.n_per_axis;
        let half = n / 2;
        match i.cmp(&half) {
            std::cmp::Ordering::Less => Some(i as i64),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i as i64 - n as i64),
        }
    }

    /// Storage slot of `k`, or `None` if `k` is outside the retained cube.
    #[inline]
    pub fn index(&self, k: [i64; 3]) -> Option<usize> {
        let kmax = self.k_axis_max();
        let n = self.n_per_axis as i64;
        if k.iter().any(|c| c.abs() > kmax) {
            return None;
        }
        let pos = |c: i64| c.rem_euclid(n) as usize;
        Some((pos(k[0]) * self.n_per_axis + pos(k[1])) * self.n_per_axis + pos(k[2]))
    }

    /// Wavevector at a storage slot, `None` for the pinned slots (Nyquist, `k = 0`).
    #[inline]
    pub fn wavevector(&self, idx: usize) -> Option<[i64; 3]> {
        let n = self.n_per_axis;
        let k = [
            self.wavenumber(idx / (n * n))?,
            self.wavenumber((idx / n) % n)?,
            self.wavenumber(idx % n)?,
        ];
        if k == [0, 0, 0] {
            None
        } else {
            Some(k)
        }
    }

    /// Iterates over every retained mode.
    pub fn modes(&self) -> impl Iterator<Item = Mode> + '_ {
        ModeIter { n: self.n_per_axis, pos: [0; 3], idx: 0 }
    }
}

/// Walks storage slots in order with per-axis counters, skipping pinned slots.
struct ModeIter {
    n: usize,
    pos: [usize; 3],
    idx: usize,
}

impl Iterator for ModeIter {
    type Item = Mode;

    #[inline]
    fn next(&mut self) -> Option<Mode> {
        let n = self.n;
        let half = n / 2;
        let wn = |i: usize| if i < half { i as i64 } else { i as i64 - n as i64 };
        while self.pos[0] < n {
            let [x, y, z] = self.pos;
            let idx = self.idx;
            self.idx += 1;
            self.pos[2] += 1;
            if self.pos[2] == n {
                self.pos[2] = 0;
                self.pos[1] += 1;
                if self.pos[1] == n {
                    self.pos[1] = 0;
                    self.pos[0] += 1;
                }
            }
            if x == half || y == half || z == half || idx == 0 {
                continue;
            }
            let k = [wn(x), wn(y), wn(z)];
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            return Some(Mode { idx, k, kf, k_sq: kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2] });
        }
        None
    }
}

/// Evaluates `f(|k|²)` at every retained slot; pinned slots get zero.
pub fn symbol_table(grid: GridSpec, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut t = vec![0.0; grid.mode_count()];
    for m in grid.modes() {
        t[m.idx] = f(m.k_sq);
    }
    t
}

/// One retained lattice point.
#[derive(Debug, Clone, Copy)]
pub struct Mode {
    pub idx: usize,
    pub k: [i64; 3],
    pub kf: [f64; 3],
    pub k_sq: f64,
}

#[inline]
pub(crate) fn dot_kc(k: &[f64; 3], c: &[Complex64; 3]) -> Complex64 {
    c[0] * k[0] + c[1] * k[1] + c[2] * k[2]
}

#[inline]
fn mode_norm_sq(c: &[Complex64; 3]) -> f64 {
    c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr()
}

/// Real, mean-free 3-vector field stored by its Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    grid: GridSpec,
    coeffs: Vec<[Complex64; 3]>,
}

impl SpectralVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, coeffs: vec![[ZERO; 3]; grid.mode_count()] }
    }

    /// Builds a field from a per-mode closure. Only retained modes are
    /// evaluated; the caller is responsible for conjugate symmetry.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&Mode) -> [Complex64; 3]) -> Self {
        let mut field = Self::zeros(grid);
        for m in grid.modes() {
            field.coeffs[m.idx] = f(&m);
        }
        field
    }

    /// Wraps raw storage. Pinned slots are forced back to zero.
    pub fn from_coeffs(grid: GridSpec, mut coeffs: Vec<[Complex64; 3]>) -> Result<Self> {
        if coeffs.len() != grid.mode_count() {
            return Err(Error::config(format!(
                "coefficient array has {} entries, grid needs {}",
                coeffs.len(),
                grid.mode_count()
            )));
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if grid.wavevector(idx).is_none() {
                *c = [ZERO; 3];
            }
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[[Complex64; 3]] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [[Complex64; 3]] {
        &mut self.coeffs
    }

    /// Coefficient at `k`; zero outside the retained lattice.
    pub fn get(&self, k: [i64; 3]) -> [Complex64; 3] {
        match self.grid.index(k) {
            Some(i) if k != [0, 0, 0] => self.coeffs[i],
            _ => [ZERO; 3],
        }
    }

    /// Sets `c` at `k` and `conj(c)` at `−k`.
    pub fn set_pair(&mut self, k: [i64; 3], c: [Complex64; 3]) -> Result<()> {
        let (Some(i), Some(j)) = (self.grid.index(k), self.grid.index([-k[0], -k[1], -k[2]])) else {
            return Err(Error::config(format!("wavevector {k:?} is outside the retained lattice")));
        };
        if k == [0, 0, 0] {
            return Err(Error::InvariantViolation("the k = 0 mode is pinned to zero".into()));
        }
        self.coeffs[i] = c;
        self.coeffs[j] = [c[0].conj(), c[1].conj(), c[2].conj()];
        Ok(())
    }

    /// Component `c` as a scalar coefficient array in storage order.
    pub fn component(&self, c: usize) -> Vec<Complex64> {
        self.coeffs.iter().map(|v| v[c]).collect()
    }

    /// Multiplies each retained mode by a real function of `|k|²`.
    pub fn scaled_by_symbol(&self, symbol: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.scale_by_symbol_in_place(symbol);
        out
    }

    pub(crate) fn scale_by_symbol_in_place(&mut self, symbol: impl Fn(f64) -> f64) {
        for m in self.grid.modes() {
            let s = symbol(m.k_sq);
            for c in self.coeffs[m.idx].iter_mut() {
                *c *= s;
            }
        }
    }

    /// Multiplies each stored mode by a precomputed per-slot factor.
    pub fn scaled_by_table(&self, table: &[f64]) -> Self {
        let mut out = self.clone();
        for (c, &s) in out.coeffs.iter_mut().zip(table) {
            for v in c.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// `Σ_k t_k |c_k|²` with a precomputed per-slot weight.
    pub fn weighted_norm_sq_table(&self, table: &[f64]) -> f64 {
        self.coeffs.iter().zip(table).map(|(c, &t)| t * mode_norm_sq(c)).sum()
    }

    /// `Σ_k w(|k|²) |c_k|²` over the retained lattice.
    pub fn weighted_norm_sq(&self, weight: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .modes()
            .map(|m| weight(m.k_sq) * mode_norm_sq(&self.coeffs[m.idx]))
            .sum()
    }

    /// `Σ_k |c_k|²`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(mode_norm_sq).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `‖v‖_{s,2} = (Σ_k |k|^{2s} |c_k|²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        if s == 0.0 {
            return self.l2_norm();
        }
        self.weighted_norm_sq(|k_sq| k_sq.powf(s)).sqrt()
    }

    /// Real inner product `Σ_k Re(c_k · conj(d_k))`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (0..3).map(|i| (a[i] * b[i].conj()).re).sum::<f64>())
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in self.coeffs.iter_mut() {
            for c in v.iter_mut() {
                *c *= s;
            }
        }
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (v, w) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for i in 0..3 {
                v[i] += w[i] * a;
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Removes the gradient part mode by mode: `c ← c − k (k·c)/|k|²`.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        out.leray_project_in_place();
        out
    }

    pub(crate) fn leray_project_in_place(&mut self) {
        for m in self.grid.modes() {
            let c = &mut self.coeffs[m.idx];
            let kc = dot_kc(&m.kf, c) / m.k_sq;
            for i in 0..3 {
                c[i] -= kc * m.kf[i];
            }
        }
    }

    /// Sharp spherical cutoff: zeroes every mode with `|k| > cutoff`.
    pub fn galerkin_truncate(&self, cutoff: u32) -> Self {
        let cut_sq = (cutoff as f64).powi(2);
        let mut out = self.clone();
        for m in self.grid.modes() {
            if m.k_sq > cut_sq {
                out.coeffs[m.idx] = [ZERO; 3];
            }
        }
        out
    }

    /// `max_k |k · c_k|`.
    pub fn divergence_residual(&self) -> f64 {
        self.grid
            .modes()
            .map(|m| dot_kc(&m.kf, &self.coeffs[m.idx]).norm())
            .fold(0.0, f64::max)
    }

    /// Magnitude of the stored `k = 0` coefficient.
    pub fn mean_residual(&self) -> f64 {
        mode_norm_sq(&self.coeffs[0]).sqrt()
    }

    /// `max_k |c_{−k} − conj(c_k)|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in self.grid.modes() {
            let j = self.grid.index([-m.k[0], -m.k[1], -m.k[2]]).expect("cube is symmetric");
            let (a, b) = (&self.coeffs[m.idx], &self.coeffs[j]);
            for i in 0..3 {
                worst = worst.max((b[i] - a[i].conj()).norm());
            }
        }
        worst
    }

    pub fn is_solenoidal(&self) -> bool {
        self.divergence_residual() <= SOLENOIDAL_TOL * self.l2_norm().max(f64::MIN_POSITIVE)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

/// Real, mean-free scalar field (pressure).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralScalarField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, coeffs: vec![ZERO; grid.mode_count()] }
    }

    pub fn from_coeffs(grid: GridSpec, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.mode_count() {
            return Err(Error::config(format!(
                "coefficient array has {} entries, grid needs {}",
                coeffs.len(),
                grid.mode_count()
            )));
        }
        for (idx, c) in coeffs.iter_mut().enumerate() {
            if grid.wavevector(idx).is_none() {
                *c = ZERO;
            }
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, k: [i64; 3]) -> Complex64 {
        match self.grid.index(k) {
            Some(i) if k != [0, 0, 0] => self.coeffs[i],
            _ => ZERO,
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mean_residual(&self) -> f64 {
        self.coeffs[0].norm()
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.grid
            .modes()
            .map(|m| {
                let j = self.grid.index([-m.k[0], -m.k[1], -m.k[2]]).expect("cube is symmetric");
                (self.coeffs[j] - self.coeffs[m.idx].conj()).norm()
            })
            .fold(0.0, f64::max)
    }
}
