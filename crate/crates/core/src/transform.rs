//! Transforms between the retained spectral lattice and the padded physical grid.
//!
//! Physical samples live on an `M³` grid (`M = padded_n`) at
//! `x = 2π (i, j, l) / M`, stored with the last axis fastest. Forward
//! coefficients are normalized as `c_k = M⁻³ Σ_x f(x) e^{−ik·x}`, so the
//! inverse is the plain sum `f(x) = Σ_k c_k e^{ik·x}`.
//!
//! Two real fields share one complex FFT (`x + i y`). The 3-D transforms
//! are pruned: passes that would only touch zero padding, or produce
//! modes that are discarded, are skipped.

use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectral_field::{GridSpec, SpectralScalarField, SpectralVectorField, SOLENOIDAL_TOL};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Real 3-vector samples on the padded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalVectorField {
    pub padded_n: usize,
    pub comps: [Vec<f64>; 3],
}

impl PhysicalVectorField {
    pub fn zeros(padded_n: usize) -> Self {
        let len = padded_n.pow(3);
        Self { padded_n, comps: [vec![0.0; len], vec![0.0; len], vec![0.0; len]] }
    }

    /// Samples a closure at the grid points.
    pub fn from_fn(padded_n: usize, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(padded_n);
        let h = 2.0 * std::f64::consts::PI / padded_n as f64;
        for i in 0..padded_n {
            for j in 0..padded_n {
                for l in 0..padded_n {
                    let v = f([i as f64 * h, j as f64 * h, l as f64 * h]);
                    let idx = (i * padded_n + j) * padded_n + l;
                    for c in 0..3 {
                        out.comps[c][idx] = v[c];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        (0..self.comps[0].len())
            .map(|i| {
                (self.comps[0][i].powi(2) + self.comps[1][i].powi(2) + self.comps[2][i].powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Root-mean-square of all samples of all components.
    pub fn rms(&self) -> f64 {
        let len = self.comps[0].len() as f64;
        (self.comps.iter().flatten().map(|v| v * v).sum::<f64>() / len).sqrt()
    }
}

/// Planned FFTs for one grid.
pub struct SpectralTransform {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Padded positions that carry retained wavenumbers, ascending.
    active: Vec<usize>,
    /// `(storage index, padded position of k, padded position of −k)` per retained mode.
    slots: Vec<(usize, usize, usize)>,
    /// Reusable `M³` work buffers.
    work: Mutex<Vec<Vec<Complex64>>>,
    real: Mutex<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy)]
enum Source<'a> {
    Scalar(&'a [Complex64]),
    Component(&'a [[Complex64; 3]], usize),
}

impl Source<'_> {
    #[inline]
    fn at(&self, s: usize) -> Complex64 {
        match *self {
            Source::Scalar(v) => v[s],
            Source::Component(v, c) => v[s][c],
        }
    }
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: GridSpec) -> Self {
        let m = grid.padded_n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let pad_pos = (0..grid.n_per_axis())
            .map(|i| grid.wavenumber(i).map(|k| k.rem_euclid(m as i64) as usize))
            .collect::<Vec<_>>();
        let mut active: Vec<usize> = pad_pos.iter().flatten().copied().collect();
        active.sort_unstable();
        let neg = |p: usize| (m - p) % m;
        let slots = grid
            .modes()
            .map(|md| {
                let [px, py, pz] = md.k.map(|k| k.rem_euclid(m as i64) as usize);
                (md.idx, (px * m + py) * m + pz, (neg(px) * m + neg(py)) * m + neg(pz))
            })
            .collect();
        Self { grid, forward, inverse, active, slots, work: Mutex::new(Vec::new()), real: Mutex::new(Vec::new()) }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Physical samples to retained coefficients. The mean and all modes
    /// outside the retained cube are discarded.
    pub fn forward_transform(&self, samples: &PhysicalVectorField) -> Result<SpectralVectorField> {
        let m = self.grid.padded_n();
        if samples.padded_n != m || samples.comps.iter().any(|c| c.len() != m * m * m) {
            return Err(Error::config(format!(
                "sample array must be {m}³ per component, got padded_n = {} with lengths {:?}",
                samples.padded_n,
                samples.comps.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        let refs: Vec<&[f64]> = samples.comps.iter().map(Vec::as_slice).collect();
        let spec = self.forward_many(&refs);
        Ok(self.assemble_vector(&spec[0], &spec[1], &spec[2]))
    }

    /// Coefficients to physical samples on the padded grid.
    pub fn inverse_transform(&self, field: &SpectralVectorField) -> Result<PhysicalVectorField> {
        self.check_grid(field.grid())?;
        let norm = field.l2_norm();
        let defect = field.symmetry_defect();
        if defect > SOLENOIDAL_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::InvariantViolation(format!(
                "conjugate symmetry broken (defect {defect:e}, field norm {norm:e})"
            )));
        }
        Ok(self.to_physical(field))
    }

    /// Unchecked inverse for fields known to be Hermitian.
    pub(crate) fn to_physical(&self, field: &SpectralVectorField) -> PhysicalVectorField {
        let mut out = self.inverse_vectors(&[field]).into_iter();
        PhysicalVectorField {
            padded_n: self.grid.padded_n(),
            comps: [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()],
        }
    }

    pub fn inverse_scalar(&self, field: &SpectralScalarField) -> Result<Vec<f64>> {
        self.check_grid(field.grid())?;
        let norm = field.l2_norm();
        if field.symmetry_defect() > SOLENOIDAL_TOL * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::InvariantViolation("conjugate symmetry broken".into()));
        }
        Ok(self.inverse_many(&[field.coeffs()]).pop().unwrap())
    }

    fn check_grid(&self, grid: GridSpec) -> Result<()> {
        if grid != self.grid {
            return Err(Error::config(format!(
                "field grid {grid:?} does not match transform grid {:?}",
                self.grid
            )));
        }
        Ok(())
    }

    pub(crate) fn assemble_vector(
        &self,
        x: &[Complex64],
        y: &[Complex64],
        z: &[Complex64],
    ) -> SpectralVectorField {
        SpectralVectorField::from_fn(self.grid, |m| [x[m.idx], y[m.idx], z[m.idx]])
    }

    /// Inverse-transforms Hermitian scalar spectra (storage order), two per FFT.
    pub(crate) fn inverse_many(&self, spectra: &[&[Complex64]]) -> Vec<Vec<f64>> {
        let src: Vec<Source> = spectra.iter().map(|&s| Source::Scalar(s)).collect();
        self.inverse_sources(&src)
    }

    /// Inverse-transforms every component of Hermitian vector fields, in order.
    pub(crate) fn inverse_vectors(&self, fields: &[&SpectralVectorField]) -> Vec<Vec<f64>> {
        let src: Vec<Source> =
            fields.iter().flat_map(|f| (0..3).map(move |c| Source::Component(f.coeffs(), c))).collect();
        self.inverse_sources(&src)
    }

    fn inverse_sources(&self, spectra: &[Source]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(spectra.len());
        for pair in spectra.chunks(2) {
            let (a, b) = self.inverse_pair(pair[0], pair.get(1).copied());
            out.push(a);
            if pair.len() == 2 {
                out.push(b);
            }
        }
        out
    }

    /// Forward-transforms real samples to retained spectra (storage order), two per FFT.
    pub(crate) fn forward_many(&self, fields: &[&[f64]]) -> Vec<Vec<Complex64>> {
        let mut out = Vec::with_capacity(fields.len());
        for pair in fields.chunks(2) {
            let (a, b) = self.forward_pair(pair[0], pair.get(1).copied());
            out.push(a);
            if pair.len() == 2 {
                out.push(b);
            }
        }
        out
    }

    fn inverse_pair(&self, a: Source, b: Option<Source>) -> (Vec<f64>, Vec<f64>) {
        let m = self.grid.padded_n();
        let mut buf = self.take_work();
        buf.fill(ZERO);
        match b {
            Some(b) => {
                for &(s, p, _) in &self.slots {
                    let (x, y) = (a.at(s), b.at(s));
                    buf[p] = Complex64::new(x.re - y.im, x.im + y.re);
                }
            }
            None => {
                for &(s, p, _) in &self.slots {
                    buf[p] = a.at(s);
                }
            }
        }
        // k = 0 is never carried
        buf[0] = ZERO;

        let fft = &self.inverse;
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        // z lines with both x and y active
        for &px in &self.active {
            for &py in &self.active {
                let start = (px * m + py) * m;
                fft.process_with_scratch(&mut buf[start..start + m], &mut scratch);
            }
        }
        // y lines on active x planes
        let mut lines = vec![ZERO; m * m];
        for &px in &self.active {
            let plane = &mut buf[px * m * m..(px + 1) * m * m];
            transpose_square(plane, &mut lines, m);
            fft.process_with_scratch(&mut lines, &mut scratch);
            transpose_square(&lines, plane, m);
        }
        // x lines everywhere
        self.x_pass(&mut buf, fft.as_ref(), &mut scratch, &mut lines, None);

        let mut ra = self.take_real();
        let mut rb = Vec::new();
        match b {
            Some(_) => {
                rb = self.take_real();
                for ((v, x), y) in buf.iter().zip(ra.iter_mut()).zip(rb.iter_mut()) {
                    *x = v.re;
                    *y = v.im;
                }
            }
            None => {
                for (v, x) in buf.iter().zip(ra.iter_mut()) {
                    *x = v.re;
                }
            }
        }
        self.put_work(buf);
        (ra, rb)
    }

    fn forward_pair(&self, x: &[f64], y: Option<&[f64]>) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.grid.n_per_axis();
        let m = self.grid.padded_n();
        let mut buf = self.take_work();
        match y {
            Some(y) => {
                for ((z, &a), &b) in buf.iter_mut().zip(x).zip(y) {
                    *z = Complex64::new(a, b);
                }
            }
            None => {
                for (z, &a) in buf.iter_mut().zip(x) {
                    *z = Complex64::new(a, 0.0);
                }
            }
        }
        let fft = &self.forward;
        let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
        // all z lines
        fft.process_with_scratch(&mut buf, &mut scratch);
        // y lines, only the active z columns are needed
        let mut lines = vec![ZERO; m * m];
        let na = self.active.len();
        for px in 0..m {
            let plane = &mut buf[px * m * m..(px + 1) * m * m];
            for py in 0..m {
                let row = &plane[py * m..(py + 1) * m];
                for (c, &pz) in self.active.iter().enumerate() {
                    lines[c * m + py] = row[pz];
                }
            }
            fft.process_with_scratch(&mut lines[..na * m], &mut scratch);
            for py in 0..m {
                let row = &mut plane[py * m..(py + 1) * m];
                for (c, &pz) in self.active.iter().enumerate() {
                    row[pz] = lines[c * m + py];
                }
            }
        }
        // x lines at active (y, z)
        self.x_pass(&mut buf, fft.as_ref(), &mut scratch, &mut lines, Some(()));

        let scale = 1.0 / (m * m * m) as f64;
        let mut a = vec![ZERO; n * n * n];
        let mut b = if y.is_some() { vec![ZERO; n * n * n] } else { Vec::new() };
        match y {
            Some(_) => {
                for &(s, p, q) in &self.slots {
                    let zk = buf[p] * scale;
                    let zmk = buf[q].conj() * scale;
                    a[s] = (zk + zmk) * 0.5;
                    let d = zk - zmk;
                    // (zk − conj z(−k)) / 2i
                    b[s] = Complex64::new(d.im * 0.5, -d.re * 0.5);
                }
            }
            None => {
                for &(s, p, _) in &self.slots {
                    a[s] = buf[p] * scale;
                }
            }
        }
        self.put_work(buf);
        (a, b)
    }

    fn take_work(&self) -> Vec<Complex64> {
        let m = self.grid.padded_n();
        let pooled = self.work.lock().unwrap_or_else(|e| e.into_inner()).pop();
        pooled.unwrap_or_else(|| vec![ZERO; m * m * m])
    }

    fn put_work(&self, buf: Vec<Complex64>) {
        self.work.lock().unwrap_or_else(|e| e.into_inner()).push(buf);
    }

    /// An `M³` real buffer with unspecified contents.
    pub(crate) fn take_real(&self) -> Vec<f64> {
        let m = self.grid.padded_n();
        let pooled = self.real.lock().unwrap_or_else(|e| e.into_inner()).pop();
        pooled.unwrap_or_else(|| vec![0.0; m * m * m])
    }

    /// Returns physical buffers for reuse.
    pub(crate) fn recycle(&self, bufs: impl IntoIterator<Item = Vec<f64>>) {
        let len = self.grid.padded_n().pow(3);
        let mut pool = self.real.lock().unwrap_or_else(|e| e.into_inner());
        pool.extend(bufs.into_iter().filter(|b| b.len() == len));
    }

    /// FFT along the slowest axis. With `active_only`, only lines whose
    /// `(y, z)` positions are both active are transformed.
    fn x_pass(
        &self,
        buf: &mut [Complex64],
        fft: &dyn Fft<f64>,
        scratch: &mut [Complex64],
        lines: &mut [Complex64],
        active_only: Option<()>,
    ) {
        let m = self.grid.padded_n();
        let all: Vec<usize> = (0..m).collect();
        let (ys, zs) = match active_only {
            Some(()) => (&self.active, &self.active),
            None => (&all, &all),
        };
        for &py in ys {
            let nz = zs.len();
            for px in 0..m {
                let row = &buf[(px * m + py) * m..(px * m + py + 1) * m];
                for (c, &pz) in zs.iter().enumerate() {
                    lines[c * m + px] = row[pz];
                }
            }
            fft.process_with_scratch(&mut lines[..nz * m], scratch);
            for px in 0..m {
                let row = &mut buf[(px * m + py) * m..(px * m + py + 1) * m];
                for (c, &pz) in zs.iter().enumerate() {
                    row[pz] = lines[c * m + px];
                }
            }
        }
    }
}

fn transpose_square(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    const B: usize = 8;
    for i0 in (0..m).step_by(B) {
        for j0 in (0..m).step_by(B) {
            for i in i0..(i0 + B).min(m) {
                for j in j0..(j0 + B).min(m) {
                    dst[j * m + i] = src[i * m + j];
                }
            }
        }
    }
}
