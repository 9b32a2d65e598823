//! Square torus `[0, L)^2` with a cosine-mode reference density and
//! pseudo-spectral differentiation.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PcfError, Result};
use crate::field::{GridShape, ScalarField};
use crate::parallel::{for_each_chunk, threads};

/// One cosine term `amplitude * cos(2π (kx x + ky y) / L)` of the reference density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CosineMode {
    pub kx: i64,
    pub ky: i64,
    pub amplitude: f64,
}

impl CosineMode {
    pub fn new(kx: i64, ky: i64, amplitude: f64) -> Self {
        Self { kx, ky, amplitude }
    }
}

struct Plans {
    fwd_x: Arc<dyn RealToComplex<f64>>,
    inv_x: Arc<dyn ComplexToReal<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

/// Flat or conformally flat torus. `ω₀ = i σ₀ dz∧dz̄` in the chart `z = x + iy`.
#[derive(Clone)]
pub struct TorusGeometry {
    nx: usize,
    ny: usize,
    length: f64,
    sigma0: ScalarField,
    sigma0_modes: Vec<CosineMode>,
    /// Angular wavenumbers along x, in FFT order (full length `nx`).
    kx: Vec<f64>,
    /// Angular wavenumbers along y, in FFT order.
    ky: Vec<f64>,
    /// Signed integer mode indices along x and y.
    mx: Vec<i64>,
    my: Vec<i64>,
    plans: Arc<Plans>,
    ric0_trace: ScalarField,
}

impl fmt::Debug for TorusGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGeometry")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("length", &self.length)
            .field("sigma0_modes", &self.sigma0_modes)
            .finish()
    }
}

fn signed_modes(n: usize) -> Vec<i64> {
    (0..n)
        .map(|i| if i <= n / 2 { i as i64 } else { i as i64 - n as i64 })
        .collect()
}

impl TorusGeometry {
    pub fn new(nx: usize, ny: usize, length: f64, sigma0_modes: &[CosineMode]) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 16 || !n.is_power_of_two() {
                return Err(PcfError::BadGrid(format!(
                    "{name} = {n} must be a power of two >= 16"
                )));
            }
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(PcfError::BadGrid(format!("length = {length} must be positive")));
        }
        let shape = GridShape::Torus { nx, ny };
        let mut sigma = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = length * i as f64 / nx as f64;
                let y = length * j as f64 / ny as f64;
                let s: f64 = sigma0_modes
                    .iter()
                    .map(|m| {
                        m.amplitude
                            * (2.0 * PI * (m.kx as f64 * x + m.ky as f64 * y) / length).cos()
                    })
                    .sum();
                sigma.push(1.0 + s);
            }
        }
        let sigma0 = ScalarField::new(shape, sigma)?;
        let min = sigma0.min();
        if min <= 0.0 {
            return Err(PcfError::NonPositiveDensity { min });
        }

        let mut real_planner = RealFftPlanner::new();
        let mut planner = FftPlanner::new();
        let plans = Arc::new(Plans {
            fwd_x: real_planner.plan_fft_forward(nx),
            inv_x: real_planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        });
        let mx = signed_modes(nx);
        let my = signed_modes(ny);
        let base = 2.0 * PI / length;
        let kx = mx.iter().map(|&m| base * m as f64).collect();
        let ky = my.iter().map(|&m| base * m as f64).collect();

        let mut geom = Self {
            nx,
            ny,
            length,
            sigma0,
            sigma0_modes: sigma0_modes.to_vec(),
            kx,
            ky,
            mx,
            my,
            plans,
            ric0_trace: ScalarField::zeros(shape),
        };
        // tr_{ω₀} Ric(ω₀) = -(log σ₀)_{zz̄} / σ₀
        let log_sigma = geom.sigma0.map(f64::ln);
        let r0 = geom.mixed_second_derivative(&log_sigma)?;
        geom.ric0_trace = r0.zip_map(&geom.sigma0, |r, s| -r / s)?;
        Ok(geom)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn shape(&self) -> GridShape {
        GridShape::Torus { nx: self.nx, ny: self.ny }
    }

    pub fn sigma0(&self) -> &ScalarField {
        &self.sigma0
    }

    pub fn sigma0_modes(&self) -> &[CosineMode] {
        &self.sigma0_modes
    }

    /// Angular wavenumbers `(kx, ky)` in FFT order.
    pub fn wavenumbers(&self) -> (&[f64], &[f64]) {
        (&self.kx, &self.ky)
    }

    pub fn is_flat(&self) -> bool {
        self.sigma0_modes.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn ric0_trace(&self) -> &ScalarField {
        &self.ric0_trace
    }

    fn cell_area(&self) -> f64 {
        (self.length / self.nx as f64) * (self.length / self.ny as f64)
    }

    /// Samples `f(x, y)` at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let mut v = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let x = self.length * i as f64 / self.nx as f64;
                let y = self.length * j as f64 / self.ny as f64;
                v.push(f(x, y));
            }
        }
        ScalarField::new(self.shape(), v).expect("sample length")
    }

    /// Number of stored x-modes (`kx >= 0` only).
    fn nxh(&self) -> usize {
        self.nx / 2 + 1
    }

    /// 2-D DFT of a real field. Only `kx >= 0` is stored, transposed:
    /// index `ix * ny + iy` with `ix < nx/2 + 1`.
    fn forward(&self, f: &[f64]) -> Vec<Complex64> {
        let (nx, ny, nxh) = (self.nx, self.ny, self.nxh());
        let mut input = f.to_vec();
        let mut rows = vec![Complex64::new(0.0, 0.0); ny * nxh];
        let r2c = &self.plans.fwd_x;
        let run_row = |inp: &mut [f64], out: &mut [Complex64], scratch: &mut [Complex64]| {
            r2c.process_with_scratch(inp, out, scratch).expect("r2c lengths");
        };
        if threads() > 1 {
            use rayon::prelude::*;
            input
                .par_chunks_mut(nx)
                .zip(rows.par_chunks_mut(nxh))
                .for_each(|(i, o)| run_row(i, o, &mut r2c.make_scratch_vec()));
        } else {
            let mut scratch = r2c.make_scratch_vec();
            for (i, o) in input.chunks_mut(nx).zip(rows.chunks_mut(nxh)) {
                run_row(i, o, &mut scratch);
            }
        }
        let mut cols = transpose(&rows, ny, nxh);
        let fy = &self.plans.fwd_y;
        for_each_chunk(&mut cols, ny, |c| fy.process(c));
        cols
    }

    /// Inverse of [`Self::forward`].
    fn inverse(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        let (nx, ny, nxh) = (self.nx, self.ny, self.nxh());
        let iy = &self.plans.inv_y;
        for_each_chunk(&mut spec, ny, |c| iy.process(c));
        let mut rows = transpose(&spec, nxh, ny);
        // Real data has purely real kx = 0 and kx = nx/2 coefficients.
        for row in rows.chunks_mut(nxh) {
            row[0].im = 0.0;
            row[nxh - 1].im = 0.0;
        }
        let mut out = vec![0.0; nx * ny];
        let c2r = &self.plans.inv_x;
        let run_row = |inp: &mut [Complex64], o: &mut [f64], scratch: &mut [Complex64]| {
            c2r.process_with_scratch(inp, o, scratch).expect("c2r lengths");
        };
        if threads() > 1 {
            use rayon::prelude::*;
            rows.par_chunks_mut(nxh)
                .zip(out.par_chunks_mut(nx))
                .for_each(|(i, o)| run_row(i, o, &mut c2r.make_scratch_vec()));
        } else {
            let mut scratch = c2r.make_scratch_vec();
            for (i, o) in rows.chunks_mut(nxh).zip(out.chunks_mut(nx)) {
                run_row(i, o, &mut scratch);
            }
        }
        let norm = 1.0 / (nx * ny) as f64;
        for v in &mut out {
            *v *= norm;
        }
        out
    }

    /// Spectrum of `f - f[0]`. Derivatives never see the constant offset, so
    /// shifting a field by an exactly representable constant leaves every
    /// derivative bitwise unchanged.
    fn derivative_spectrum(&self, f: &ScalarField) -> Result<Vec<Complex64>> {
        f.check_shape(self.shape())?;
        let v = f.values();
        let f0 = v[0];
        let shifted: Vec<f64> = v.iter().map(|&x| x - f0).collect();
        Ok(self.forward(&shifted))
    }

    /// Applies a real spectral multiplier `symbol(kx, ky)` to `f`.
    fn apply_symbol(&self, f: &ScalarField, symbol: impl Fn(usize, usize) -> f64) -> Result<ScalarField> {
        let mut spec = self.derivative_spectrum(f)?;
        let ny = self.ny;
        for ix in 0..self.nxh() {
            for iy in 0..ny {
                spec[ix * ny + iy] *= symbol(ix, iy);
            }
        }
        ScalarField::new(self.shape(), self.inverse(spec))
    }

    fn k2(&self, ix: usize, iy: usize) -> f64 {
        self.kx[ix] * self.kx[ix] + self.ky[iy] * self.ky[iy]
    }

    /// `f_{zz̄} = ¼ (f_xx + f_yy)`.
    pub fn mixed_second_derivative(&self, f: &ScalarField) -> Result<ScalarField> {
        self.apply_symbol(f, |ix, iy| -0.25 * self.k2(ix, iy))
    }

    /// `(f_x, f_y)` with the Nyquist modes dropped.
    pub fn gradient(&self, f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
        let spec = self.derivative_spectrum(f)?;
        let (nx, ny) = (self.nx, self.ny);
        let mut dx = spec.clone();
        let mut dy = spec;
        for ix in 0..self.nxh() {
            for iy in 0..ny {
                let idx = ix * ny + iy;
                let kx = if 2 * ix == nx { 0.0 } else { self.kx[ix] };
                let ky = if 2 * iy == ny { 0.0 } else { self.ky[iy] };
                dx[idx] *= Complex64::new(0.0, kx);
                dy[idx] *= Complex64::new(0.0, ky);
            }
        }
        Ok((
            ScalarField::new(self.shape(), self.inverse(dx))?,
            ScalarField::new(self.shape(), self.inverse(dy))?,
        ))
    }

    /// `|∇u|²_{ω₀} = u_z u_z̄ / σ₀ = ¼ (u_x² + u_y²) / σ₀`.
    pub fn grad_sq0(&self, u: &ScalarField) -> Result<ScalarField> {
        let (ux, uy) = self.gradient(u)?;
        let g = ux.zip_map(&uy, |a, b| 0.25 * (a * a + b * b))?;
        g.zip_map(&self.sigma0, |g, s| g / s)
    }

    /// `∫ f · weight ω₀ = Σ f w σ₀ · 2 dx dy`.
    pub fn integrate(&self, f: &ScalarField, weight: Option<&ScalarField>) -> Result<f64> {
        f.check_shape(self.shape())?;
        let s = self.sigma0.values();
        let mut acc = 0.0;
        match weight {
            Some(w) => {
                w.check_shape(self.shape())?;
                for ((a, b), c) in f.values().iter().zip(w.values()).zip(s) {
                    acc += a * b * c;
                }
            }
            None => {
                for (a, c) in f.values().iter().zip(s) {
                    acc += a * c;
                }
            }
        }
        Ok(2.0 * self.cell_area() * acc)
    }

    /// `∫ f · i dz∧dz̄ = ∫ 2 f dx dy`.
    pub fn integrate_chart(&self, f: &ScalarField) -> Result<f64> {
        f.check_shape(self.shape())?;
        let acc: f64 = f.values().iter().fold(0.0, |a, v| a + v);
        Ok(2.0 * self.cell_area() * acc)
    }

    /// `∫ i ∂u∧∂̄u`, summed mode by mode so the result is nonnegative.
    pub fn dirichlet_energy(&self, u: &ScalarField) -> Result<f64> {
        let spec = self.derivative_spectrum(u)?;
        let ny = self.ny;
        let nxh = self.nxh();
        let mut acc = 0.0;
        for ix in 0..nxh {
            // modes with kx > 0 stand for their conjugate partner as well
            let mult = if ix == 0 || 2 * ix == self.nx { 1.0 } else { 2.0 };
            for iy in 0..ny {
                acc += mult * 0.25 * self.k2(ix, iy) * spec[ix * ny + iy].norm_sqr();
            }
        }
        let n = (self.nx * self.ny) as f64;
        Ok(2.0 * self.cell_area() * acc / n)
    }

    /// Zero-chart-mean solution of `u_{zz̄} = g`; the zero mode of `g` is discarded.
    pub fn solve_mixed(&self, g: &ScalarField) -> Result<ScalarField> {
        g.check_shape(self.shape())?;
        let mut spec = self.forward(g.values());
        let ny = self.ny;
        for ix in 0..self.nxh() {
            for iy in 0..ny {
                let k2 = self.k2(ix, iy);
                let idx = ix * ny + iy;
                spec[idx] = if k2 == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    spec[idx] * (-4.0 / k2)
                };
            }
        }
        ScalarField::new(self.shape(), self.inverse(spec))
    }

    /// Solves `(Id - coef · ∂z∂z̄) u = b`.
    pub fn solve_helmholtz(&self, b: &ScalarField, coef: f64) -> Result<ScalarField> {
        b.check_shape(self.shape())?;
        let mut spec = self.forward(b.values());
        let ny = self.ny;
        for ix in 0..self.nxh() {
            for iy in 0..ny {
                spec[ix * ny + iy] /= 1.0 + coef * 0.25 * self.k2(ix, iy);
            }
        }
        ScalarField::new(self.shape(), self.inverse(spec))
    }

    /// Removes modes outside the two-thirds band on either axis.
    pub fn dealias(&self, f: &ScalarField) -> Result<ScalarField> {
        let cut_x = self.nx as i64 / 3;
        let cut_y = self.ny as i64 / 3;
        if self
            .mx
            .iter()
            .all(|m| m.abs() <= cut_x) && self.my.iter().all(|m| m.abs() <= cut_y)
        {
            return Ok(f.clone());
        }
        f.check_shape(self.shape())?;
        let mut spec = self.forward(f.values());
        let ny = self.ny;
        for ix in 0..self.nxh() {
            for iy in 0..ny {
                if self.mx[ix].abs() > cut_x || self.my[iy].abs() > cut_y {
                    spec[ix * ny + iy] = Complex64::new(0.0, 0.0);
                }
            }
        }
        ScalarField::new(self.shape(), self.inverse(spec))
    }

    /// Smallest grid spacing in the chart.
    pub fn min_spacing(&self) -> f64 {
        (self.length / self.nx as f64).min(self.length / self.ny as f64)
    }
}

/// Blocked transpose of a `rows x cols` row-major matrix.
fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    const TILE: usize = 8;
    let mut dst = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
    dst
}
