//! Discrete Fourier infrastructure on the periodic box: transforms, spectral
//! derivatives, the 2/3-rule dealiasing filter and the two elliptic inversions
//! used by the solvers (horizontal 2D Poisson, anisotropic 3D Poisson).
//!
//! Normalization: `forward_transform` produces coefficients `c_m` such that
//! synthesis is the plain sum `f(x) = sum_m c_m exp(i k_m . x)`. A pure mode
//! `cos(2 pi x / L1)` therefore has coefficients of magnitude 1/2 at
//! `m_x = +-1`, and Parseval reads `||f||_2^2 = |Omega| sum |c_m|^2`.
//!
//! All spectra of real fields are kept exactly Hermitian: the forward
//! transform symmetrizes its output bit-exactly, and every operator in this
//! module preserves that symmetry. This is what makes snapshot round-trips
//! (which store only the non-negative-mx half spectrum) bitwise exact.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{PemError, Result};
use crate::grid::{Axis, GridSpec};

// ---------------------------------------------------------------------------
// field containers
// ---------------------------------------------------------------------------

/// Real samples on the grid, x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField3D {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl PhysicalField3D {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.n_points() {
            return Err(PemError::DimensionMismatch {
                expected: grid.n_points(),
                got: samples.len(),
            });
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(PemError::InvalidParameter(
                "physical field contains non-finite samples".into(),
            ));
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            samples: vec![0.0; grid.n_points()],
        }
    }

    /// Skips the finiteness scan; hot paths rely on the steppers' blow-up
    /// detection instead. The length must still match.
    pub(crate) fn from_raw(grid: GridSpec, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), grid.n_points());
        Self { grid, samples }
    }

    /// Evaluates `f(x, y, z)` on the grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let (dx, dy, dz) = (
            grid.spacing(Axis::X),
            grid.spacing(Axis::Y),
            grid.spacing(Axis::Z),
        );
        let mut samples = Vec::with_capacity(grid.n_points());
        for iz in 0..grid.nz {
            let z = -1.0 + iz as f64 * dz;
            for iy in 0..grid.ny {
                let y = iy as f64 * dy;
                for ix in 0..grid.nx {
                    samples.push(f(ix as f64 * dx, y, z));
                }
            }
        }
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Complex Fourier coefficients in FFT index order per axis, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField3D {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField3D {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn mode_index(&self, mx: i64, my: i64, mz: i64) -> usize {
        let wrap = |m: i64, n: usize| -> usize {
            let n = n as i64;
            assert!(2 * m.abs() <= n, "mode {m} out of range for {n} samples");
            ((m + n) % n) as usize
        };
        self.grid.index(
            wrap(mx, self.grid.nx),
            wrap(my, self.grid.ny),
            wrap(mz, self.grid.nz),
        )
    }

    /// Coefficient at the signed mode triple.
    pub fn mode(&self, mx: i64, my: i64, mz: i64) -> Complex64 {
        self.coeffs[self.mode_index(mx, my, mz)]
    }

    /// Sets `c(m) = v` and `c(-m) = conj(v)` so the field stays real.
    pub fn set_mode_pair(&mut self, mx: i64, my: i64, mz: i64, v: Complex64) {
        let i = self.mode_index(mx, my, mz);
        let j = self.mode_index(-mx, -my, -mz);
        self.coeffs[i] = v;
        self.coeffs[j] = v.conj();
        if i == j {
            self.coeffs[i] = Complex64::new(v.re, 0.0);
        }
    }

    /// Parseval: `||f||_2^2 = |Omega| sum |c_m|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn linf_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn mean_coeff(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `self += s * other`.
    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    /// Multiplies each coefficient by a per-mode real factor.
    pub fn mul_mode_factors(&mut self, factors: &[f64]) {
        debug_assert_eq!(factors.len(), self.coeffs.len());
        for (c, f) in self.coeffs.iter_mut().zip(factors) {
            *c *= *f;
        }
    }
}

/// A z-independent field on `M = (0, L1) x (0, L2)`; used for the barotropic
/// pressure, which satisfies `dp/dz = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField2D {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField2D {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.nx * grid.ny],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn mode_index(&self, mx: i64, my: i64) -> usize {
        let wrap = |m: i64, n: usize| -> usize {
            let n = n as i64;
            assert!(2 * m.abs() <= n, "mode {m} out of range for {n} samples");
            ((m + n) % n) as usize
        };
        wrap(my, self.grid.ny) * self.grid.nx + wrap(mx, self.grid.nx)
    }

    pub fn mode(&self, mx: i64, my: i64) -> Complex64 {
        self.coeffs[self.mode_index(mx, my)]
    }

    pub fn set_mode_pair(&mut self, mx: i64, my: i64, v: Complex64) {
        let i = self.mode_index(mx, my);
        let j = self.mode_index(-mx, -my);
        self.coeffs[i] = v;
        self.coeffs[j] = v.conj();
        if i == j {
            self.coeffs[i] = Complex64::new(v.re, 0.0);
        }
    }

    /// Parseval over `M`: `||f||_{2,M}^2 = L1 L2 sum |c|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.l1 * self.grid.l2 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn linf_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// Real samples on `M`, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField2D {
    grid: GridSpec,
    samples: Vec<f64>,
}

impl PhysicalField2D {
    pub fn new(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.nx * grid.ny {
            return Err(PemError::DimensionMismatch {
                expected: grid.nx * grid.ny,
                got: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let (dx, dy) = (grid.spacing(Axis::X), grid.spacing(Axis::Y));
        let mut samples = Vec::with_capacity(grid.nx * grid.ny);
        for iy in 0..grid.ny {
            for ix in 0..grid.nx {
                samples.push(f(ix as f64 * dx, iy as f64 * dy));
            }
        }
        Self { grid, samples }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

// ---------------------------------------------------------------------------
// FFT plumbing
// ---------------------------------------------------------------------------

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    static SCRATCH: RefCell<Vec<Complex64>> = const { RefCell::new(Vec::new()) };
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Runs one FFT per contiguous chunk of length `n` over the whole buffer.
fn fft_lines(buf: &mut [Complex64], n: usize, forward: bool) {
    debug_assert_eq!(buf.len() % n, 0);
    let fft = plan(n, forward);
    SCRATCH.with(|s| {
        let mut s = s.borrow_mut();
        s.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        fft.process_with_scratch(buf, &mut s);
    });
}

/// In-place 3D transform over a buffer with x-fastest layout.
fn transform3d(data: &mut [Complex64], nx: usize, ny: usize, nz: usize, forward: bool) {
    // x lines are contiguous
    fft_lines(data, nx, forward);

    // y: transpose each z-plane to y-fastest, transform, transpose back
    let mut plane = vec![Complex64::new(0.0, 0.0); nx * ny];
    for iz in 0..nz {
        let base = iz * nx * ny;
        for iy in 0..ny {
            for ix in 0..nx {
                plane[ix * ny + iy] = data[base + iy * nx + ix];
            }
        }
        fft_lines(&mut plane, ny, forward);
        for ix in 0..nx {
            for iy in 0..ny {
                data[base + iy * nx + ix] = plane[ix * ny + iy];
            }
        }
    }

    // z: transpose the full cube to z-fastest, transform, transpose back
    let mut cube = vec![Complex64::new(0.0, 0.0); nx * ny * nz];
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                cube[(iy * nx + ix) * nz + iz] = data[(iz * ny + iy) * nx + ix];
            }
        }
    }
    fft_lines(&mut cube, nz, forward);
    for iy in 0..ny {
        for ix in 0..nx {
            for iz in 0..nz {
                data[(iz * ny + iy) * nx + ix] = cube[(iy * nx + ix) * nz + iz];
            }
        }
    }
}

fn transform2d(data: &mut [Complex64], nx: usize, ny: usize, forward: bool) {
    fft_lines(data, nx, forward);
    let mut t = vec![Complex64::new(0.0, 0.0); nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            t[ix * ny + iy] = data[iy * nx + ix];
        }
    }
    fft_lines(&mut t, ny, forward);
    for ix in 0..nx {
        for iy in 0..ny {
            data[iy * nx + ix] = t[ix * ny + iy];
        }
    }
}

/// Pairs `c(m) <- (c(m) + conj(c(-m))) / 2`, making the spectrum of a real
/// field exactly Hermitian. Self-conjugate modes get a zero imaginary part.
fn hermitian_symmetrize(coeffs: &mut [Complex64], nx: usize, ny: usize, nz: usize) {
    let mirror = |i: usize, n: usize| (n - i) % n;
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let i = (iz * ny + iy) * nx + ix;
                let j = (mirror(iz, nz) * ny + mirror(iy, ny)) * nx + mirror(ix, nx);
                if i < j {
                    let h = 0.5 * (coeffs[i] + coeffs[j].conj());
                    coeffs[i] = h;
                    coeffs[j] = h.conj();
                } else if i == j {
                    coeffs[i].im = 0.0;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// transforms
// ---------------------------------------------------------------------------

/// Physical samples -> Fourier coefficients (plain-sum synthesis convention).
pub fn forward_transform(f: &PhysicalField3D) -> SpectralField3D {
    let g = *f.grid();
    let mut coeffs: Vec<Complex64> = f
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform3d(&mut coeffs, g.nx, g.ny, g.nz, true);
    let scale = 1.0 / g.n_points() as f64;
    for c in &mut coeffs {
        *c *= scale;
    }
    hermitian_symmetrize(&mut coeffs, g.nx, g.ny, g.nz);
    SpectralField3D { grid: g, coeffs }
}

/// Fourier coefficients -> physical samples.
///
/// Errors if the input is not Hermitian (imaginary residue above
/// `1e-10` relative to the synthesized amplitude).
pub fn inverse_transform(f: &SpectralField3D) -> Result<PhysicalField3D> {
    let g = *f.grid();
    let mut buf = f.coeffs().to_vec();
    transform3d(&mut buf, g.nx, g.ny, g.nz, false);
    let mut max_im: f64 = 0.0;
    let mut max_re: f64 = 0.0;
    for c in &buf {
        max_im = max_im.max(c.im.abs());
        max_re = max_re.max(c.re.abs());
    }
    if max_im > 1e-10 * max_re.max(1.0) {
        return Err(PemError::NonHermitian { residue: max_im });
    }
    PhysicalField3D::new(g, buf.iter().map(|c| c.re).collect())
}

pub fn forward_transform_2d(f: &PhysicalField2D) -> SpectralField2D {
    let g = *f.grid();
    let mut coeffs: Vec<Complex64> = f
        .samples()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    transform2d(&mut coeffs, g.nx, g.ny, true);
    let scale = 1.0 / (g.nx * g.ny) as f64;
    for c in &mut coeffs {
        *c *= scale;
    }
    // reuse the 3D symmetrizer with nz = 1
    hermitian_symmetrize(&mut coeffs, g.nx, g.ny, 1);
    SpectralField2D { grid: g, coeffs }
}

pub fn inverse_transform_2d(f: &SpectralField2D) -> Result<PhysicalField2D> {
    let g = *f.grid();
    let mut buf = f.coeffs().to_vec();
    transform2d(&mut buf, g.nx, g.ny, false);
    let mut max_im: f64 = 0.0;
    let mut max_re: f64 = 0.0;
    for c in &buf {
        max_im = max_im.max(c.im.abs());
        max_re = max_re.max(c.re.abs());
    }
    if max_im > 1e-10 * max_re.max(1.0) {
        return Err(PemError::NonHermitian { residue: max_im });
    }
    PhysicalField2D::new(g, buf.iter().map(|c| c.re).collect())
}

/// Synthesizes a band-limited spectrum on a finer `(mx, my, mz)` grid by
/// zero-padding; used for alias-free quadrature of high-order integrands.
/// Returns raw samples, x fastest.
pub fn synthesize_oversampled(f: &SpectralField3D, mx: usize, my: usize, mz: usize) -> Vec<f64> {
    let g = f.grid();
    assert!(mx >= g.nx && my >= g.ny && mz >= g.nz);
    let mut fine = vec![Complex64::new(0.0, 0.0); mx * my * mz];
    let place = |m: i64, n: usize| -> usize { ((m + n as i64) % n as i64) as usize };
    for iz in 0..g.nz {
        let mz_s = GridSpec::signed_mode(g.nz, iz);
        for iy in 0..g.ny {
            let my_s = GridSpec::signed_mode(g.ny, iy);
            for ix in 0..g.nx {
                let c = f.coeffs[(iz * g.ny + iy) * g.nx + ix];
                if c.re == 0.0 && c.im == 0.0 {
                    continue;
                }
                let mx_s = GridSpec::signed_mode(g.nx, ix);
                fine[(place(mz_s, mz) * my + place(my_s, my)) * mx + place(mx_s, mx)] = c;
            }
        }
    }
    transform3d(&mut fine, mx, my, mz, false);
    fine.iter().map(|c| c.re).collect()
}

pub fn synthesize_oversampled_2d(f: &SpectralField2D, mx: usize, my: usize) -> Vec<f64> {
    let g = f.grid();
    assert!(mx >= g.nx && my >= g.ny);
    let mut fine = vec![Complex64::new(0.0, 0.0); mx * my];
    let place = |m: i64, n: usize| -> usize { ((m + n as i64) % n as i64) as usize };
    for iy in 0..g.ny {
        let my_s = GridSpec::signed_mode(g.ny, iy);
        for ix in 0..g.nx {
            let c = f.coeffs[iy * g.nx + ix];
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let mx_s = GridSpec::signed_mode(g.nx, ix);
            fine[place(my_s, my) * mx + place(mx_s, mx)] = c;
        }
    }
    transform2d(&mut fine, mx, my, false);
    fine.iter().map(|c| c.re).collect()
}

/// Smallest `2^a 3^b` size >= `n` (keeps oversampled transforms fast).
pub fn next_fast_size(n: usize) -> usize {
    let mut m = n.max(4);
    loop {
        let mut k = m;
        while k % 2 == 0 {
            k /= 2;
        }
        while k % 3 == 0 {
            k /= 3;
        }
        if k == 1 && m % 2 == 0 {
            return m;
        }
        m += 1;
    }
}

// ---------------------------------------------------------------------------
// spectral operators
// ---------------------------------------------------------------------------

/// Spectral derivative along `axis`: coefficient at mode `m` multiplied by
/// `i k_axis(m)`; the Nyquist mode carries zero weight.
pub fn derivative(f: &SpectralField3D, axis: Axis) -> SpectralField3D {
    let g = *f.grid();
    let mut out = f.clone();
    let n = g.len(axis);
    let k: Vec<f64> = (0..n).map(|i| g.wavenumber(axis, i)).collect();
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let kk = match axis {
                    Axis::X => k[ix],
                    Axis::Y => k[iy],
                    Axis::Z => k[iz],
                };
                let i = (iz * g.ny + iy) * g.nx + ix;
                let c = out.coeffs[i];
                out.coeffs[i] = Complex64::new(-kk * c.im, kk * c.re);
            }
        }
    }
    out
}

/// `Delta f` as a per-mode multiply by `-|k|^2`.
pub fn laplacian(f: &SpectralField3D) -> SpectralField3D {
    let g = *f.grid();
    let mut out = f.clone();
    for iz in 0..g.nz {
        let kz = g.wavenumber(Axis::Z, iz);
        for iy in 0..g.ny {
            let ky = g.wavenumber(Axis::Y, iy);
            for ix in 0..g.nx {
                let kx = g.wavenumber(Axis::X, ix);
                out.coeffs[(iz * g.ny + iy) * g.nx + ix] *= -(kx * kx + ky * ky + kz * kz);
            }
        }
    }
    out
}

#[inline]
fn in_band(g: &GridSpec, ix: usize, iy: usize, iz: usize) -> bool {
    GridSpec::signed_mode(g.nx, ix).abs() <= g.dealias_band(Axis::X)
        && GridSpec::signed_mode(g.ny, iy).abs() <= g.dealias_band(Axis::Y)
        && GridSpec::signed_mode(g.nz, iz).abs() <= g.dealias_band(Axis::Z)
}

/// 2/3-rule filter: zeroes every coefficient with `|m| > floor(N/3)` on any
/// axis, which keeps quadratic products alias-free in the retained band.
pub fn dealias(f: &SpectralField3D) -> SpectralField3D {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(f: &mut SpectralField3D) {
    let g = *f.grid();
    for iz in 0..g.nz {
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                if !in_band(&g, ix, iy, iz) {
                    f.coeffs[(iz * g.ny + iy) * g.nx + ix] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// elliptic inversions
// ---------------------------------------------------------------------------

/// Solves `Delta_H p = rhs` on `M` with zero mean: `p(m) = -rhs(m)/|k_H|^2`.
///
/// Errors if the right-hand side has a mean (or a discrete-kernel Nyquist
/// component) above tolerance: the assembled RHS is a double divergence and
/// must integrate to zero, so a violation signals broken assembly upstream.
pub fn solve_poisson_2d(rhs: &SpectralField2D) -> Result<SpectralField2D> {
    let g = *rhs.grid();
    let tol = 1e-10 * rhs.linf_coeff().max(1.0);
    let mut out = SpectralField2D::zeros(g);
    for iy in 0..g.ny {
        let ky = g.wavenumber(Axis::Y, iy);
        for ix in 0..g.nx {
            let kx = g.wavenumber(Axis::X, ix);
            let kh2 = kx * kx + ky * ky;
            let i = iy * g.nx + ix;
            if kh2 == 0.0 {
                // (0,0) mean mode plus Nyquist kernel modes
                if rhs.coeffs[i].norm() > tol {
                    return Err(PemError::Constraint(format!(
                        "2D Poisson RHS has non-solvable content {:.3e} at kernel mode ({ix},{iy})",
                        rhs.coeffs[i].norm()
                    )));
                }
            } else {
                out.coeffs[i] = -rhs.coeffs[i] / kh2;
            }
        }
    }
    Ok(out)
}

/// Solves `(Delta_H + eps^-2 d_z^2) p = rhs` with zero mean:
/// `p(m) = -rhs(m) / (|k_H|^2 + k_z^2 / eps^2)`.
pub fn solve_poisson_aniso_3d(rhs: &SpectralField3D, eps: f64) -> Result<SpectralField3D> {
    if !(eps > 0.0) {
        return Err(PemError::InvalidParameter(format!(
            "anisotropic Poisson requires eps > 0, got {eps}"
        )));
    }
    let g = *rhs.grid();
    let tol = 1e-10 * rhs.linf_coeff().max(1.0);
    let inv_eps2 = 1.0 / (eps * eps);
    let mut out = SpectralField3D::zeros(g);
    for iz in 0..g.nz {
        let kz = g.wavenumber(Axis::Z, iz);
        for iy in 0..g.ny {
            let ky = g.wavenumber(Axis::Y, iy);
            for ix in 0..g.nx {
                let kx = g.wavenumber(Axis::X, ix);
                let div = kx * kx + ky * ky + kz * kz * inv_eps2;
                let i = (iz * g.ny + iy) * g.nx + ix;
                if div == 0.0 {
                    if rhs.coeffs[i].norm() > tol {
                        return Err(PemError::Constraint(format!(
                            "anisotropic Poisson RHS has non-solvable content {:.3e} \
                             at kernel mode ({ix},{iy},{iz})",
                            rhs.coeffs[i].norm()
                        )));
                    }
                } else {
                    out.coeffs[i] = -rhs.coeffs[i] / div;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(1.0, 1.0, 16, 16, 16).unwrap()
    }

    /// Random real field with content only inside the dealias band.
    fn random_dealised_field(g: GridSpec, seed: u64) -> SpectralField3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField3D::zeros(g);
        let b = g.dealias_band(Axis::X);
        for mz in -b..=b {
            for my in -b..=b {
                for mx in 0..=b {
                    if mx == 0 && (my < 0 || (my == 0 && mz < 0)) {
                        continue; // canonical half
                    }
                    let v = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    f.set_mode_pair(mx, my, mz, v);
                }
            }
        }
        f.set_mode_pair(0, 0, 0, Complex64::new(0.3, 0.0));
        f
    }

    #[test]
    fn forward_inverse_round_trip() {
        let g = grid();
        let spec = random_dealised_field(g, 7);
        let phys = inverse_transform(&spec).unwrap();
        let spec2 = forward_transform(&phys);
        let scale = spec.linf_coeff();
        let err = spec
            .coeffs()
            .iter()
            .zip(spec2.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(err <= 1e-12 * scale, "round trip error {err:.3e}");

        // and the other composition, starting from physical samples
        let phys2 = inverse_transform(&spec2).unwrap();
        let perr = phys
            .samples()
            .iter()
            .zip(phys2.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(perr <= 1e-12 * phys.max_abs(), "physical round trip {perr:.3e}");
    }

    #[test]
    fn single_sine_mode_coefficients() {
        let g = grid();
        let phys = PhysicalField3D::from_fn(g, |x, _, _| (2.0 * PI * x / g.l1).sin());
        let spec = forward_transform(&phys);
        // sin(kx) = -(i/2) e^{ikx} + (i/2) e^{-ikx}
        let cp = spec.mode(1, 0, 0);
        let cm = spec.mode(-1, 0, 0);
        assert!((cp - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((cm - Complex64::new(0.0, 0.5)).norm() < 1e-14);
        let nonzero = spec
            .coeffs()
            .iter()
            .filter(|c| c.norm() > 1e-12)
            .count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn synthesis_of_single_mode_is_sine() {
        let g = grid();
        let mut spec = SpectralField3D::zeros(g);
        spec.set_mode_pair(1, 0, 0, Complex64::new(0.0, -0.5));
        let phys = inverse_transform(&spec).unwrap();
        let oracle = PhysicalField3D::from_fn(g, |x, _, _| (2.0 * PI * x / g.l1).sin());
        let err = phys
            .samples()
            .iter()
            .zip(oracle.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn zero_spectrum_gives_zero_samples() {
        let g = grid();
        let phys = inverse_transform(&SpectralField3D::zeros(g)).unwrap();
        assert!(phys.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let g = grid();
        let mut spec = SpectralField3D::zeros(g);
        // break the symmetry on purpose
        spec.coeffs_mut()[1] = Complex64::new(1.0, 0.3);
        assert!(matches!(
            inverse_transform(&spec),
            Err(PemError::NonHermitian { .. })
        ));
    }

    #[test]
    fn parseval_against_quadrature_oracle() {
        let g = grid();
        let spec = random_dealised_field(g, 42);
        let phys = inverse_transform(&spec).unwrap();
        // trapezoidal quadrature on the uniform periodic grid
        let quad: f64 =
            phys.samples().iter().map(|v| v * v).sum::<f64>() * g.cell_volume();
        let sum_sq: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum();
        // grid-weighted sum of |c|^2 equals ||f||_2^2 / |Omega|
        let rel = (sum_sq - quad / g.volume()).abs() / sum_sq;
        assert!(rel < 1e-12, "Parseval relative error {rel:.3e}");
        assert!((spec.l2_norm_sq() - quad).abs() / quad < 1e-12);
    }

    #[test]
    fn derivative_of_sine() {
        let g = grid();
        let phys = PhysicalField3D::from_fn(g, |x, _, _| (2.0 * PI * x / g.l1).sin());
        let spec = forward_transform(&phys);
        let dx = inverse_transform(&derivative(&spec, Axis::X)).unwrap();
        let k = 2.0 * PI / g.l1;
        let oracle = PhysicalField3D::from_fn(g, |x, _, _| k * (k * x).cos());
        let err = dx
            .samples()
            .iter()
            .zip(oracle.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(err <= 1e-10, "max pointwise error {err:.3e}");
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = grid();
        let spec = forward_transform(&PhysicalField3D::from_fn(g, |_, _, _| 4.2));
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            assert_eq!(derivative(&spec, axis).linf_coeff(), 0.0);
        }
    }

    #[test]
    fn vertical_derivative_of_cosine() {
        let g = grid();
        let phys = PhysicalField3D::from_fn(g, |_, _, z| (PI * z).cos());
        let dz = inverse_transform(&derivative(&forward_transform(&phys), Axis::Z)).unwrap();
        let oracle = PhysicalField3D::from_fn(g, |_, _, z| -PI * (PI * z).sin());
        let err = dz
            .samples()
            .iter()
            .zip(oracle.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(err <= 1e-10);
    }

    #[test]
    fn dealias_keeps_band_and_kills_nyquist() {
        let g = grid();
        let f = random_dealised_field(g, 3);
        // fields inside the band are unchanged
        assert_eq!(dealias(&f), f);

        let mut nyq = SpectralField3D::zeros(g);
        nyq.set_mode_pair(g.nx as i64 / 2, 0, 0, Complex64::new(1.0, 0.0));
        assert_eq!(dealias(&nyq).linf_coeff(), 0.0);
    }

    #[test]
    fn dealiased_square_of_sine_keeps_only_mean() {
        let g = grid();
        let band = g.dealias_band(Axis::X); // 5 for N = 16
        let k = 2.0 * PI * band as f64 / g.l1;
        let phys = PhysicalField3D::from_fn(g, |x, _, _| (k * x).sin());
        let sq_samples: Vec<f64> = phys.samples().iter().map(|v| v * v).collect();
        let sq = forward_transform(&PhysicalField3D::new(g, sq_samples).unwrap());
        let filtered = dealias(&sq);
        // sin^2 = 1/2 - cos(2k.)/2; 2k is outside the band, leaving the mean
        assert!((filtered.mode(0, 0, 0) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        let off_mean: f64 = filtered
            .coeffs()
            .iter()
            .skip(1)
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(off_mean < 1e-12);
    }

    #[test]
    fn derivative_commutes_with_dealias() {
        let g = grid();
        let mut f = random_dealised_field(g, 9);
        // add out-of-band junk so the filter has something to do
        f.set_mode_pair(7, 0, 0, Complex64::new(0.4, 0.1));
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let a = dealias(&derivative(&f, axis));
            let b = derivative(&dealias(&f), axis);
            let err = a
                .coeffs()
                .iter()
                .zip(b.coeffs())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0_f64, f64::max);
            assert!(err == 0.0, "axis {axis:?}: {err:.3e}");
        }
    }

    #[test]
    fn poisson_2d_sine_mode() {
        let g = grid();
        let k = 2.0 * PI / g.l1;
        let rhs_phys = PhysicalField2D::from_fn(g, |x, _| -k * k * (k * x).sin());
        let p = solve_poisson_2d(&forward_transform_2d(&rhs_phys)).unwrap();
        let oracle = forward_transform_2d(&PhysicalField2D::from_fn(g, |x, _| (k * x).sin()));
        let err = p
            .coeffs()
            .iter()
            .zip(oracle.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn poisson_2d_zero_and_round_trip() {
        let g = grid();
        assert_eq!(
            solve_poisson_2d(&SpectralField2D::zeros(g)).unwrap().linf_coeff(),
            0.0
        );

        // random zero-mean dealiased rhs
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rhs = SpectralField2D::zeros(g);
        for my in -4_i64..=4 {
            for mx in 0_i64..=4 {
                if mx == 0 && my <= 0 {
                    continue;
                }
                rhs.set_mode_pair(
                    mx,
                    my,
                    Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5),
                );
            }
        }
        let p = solve_poisson_2d(&rhs).unwrap();
        // apply Delta_H and compare
        let mut back = p.clone();
        for iy in 0..g.ny {
            let ky = g.wavenumber(Axis::Y, iy);
            for ix in 0..g.nx {
                let kx = g.wavenumber(Axis::X, ix);
                back.coeffs_mut()[iy * g.nx + ix] *= -(kx * kx + ky * ky);
            }
        }
        let err = back
            .coeffs()
            .iter()
            .zip(rhs.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-12 * rhs.linf_coeff());
    }

    #[test]
    fn poisson_2d_rejects_nonzero_mean() {
        let g = grid();
        let mut rhs = SpectralField2D::zeros(g);
        rhs.set_mode_pair(0, 0, Complex64::new(1.0, 0.0));
        assert!(matches!(
            solve_poisson_2d(&rhs),
            Err(PemError::Constraint(_))
        ));
    }

    #[test]
    fn aniso_poisson_divisors() {
        let g = grid();
        // mode (1,0,1): divisor 4 pi^2 + pi^2 / eps^2
        let mut rhs = SpectralField3D::zeros(g);
        rhs.set_mode_pair(1, 0, 1, Complex64::new(1.0, 0.0));

        let p1 = solve_poisson_aniso_3d(&rhs, 1.0).unwrap();
        let expect1 = -1.0 / (4.0 * PI * PI + PI * PI);
        assert!((p1.mode(1, 0, 1).re - expect1).abs() < 1e-14 * expect1.abs());

        let p01 = solve_poisson_aniso_3d(&rhs, 0.1).unwrap();
        let expect01 = -1.0 / (4.0 * PI * PI + 100.0 * PI * PI);
        assert!((p01.mode(1, 0, 1).re - expect01).abs() < 1e-14 * expect01.abs());
    }

    #[test]
    fn aniso_poisson_round_trip() {
        let g = grid();
        let eps = 0.5;
        let mut rhs = random_dealised_field(g, 12);
        rhs.set_mode_pair(0, 0, 0, Complex64::new(0.0, 0.0));
        let p = solve_poisson_aniso_3d(&rhs, eps).unwrap();
        // apply (Delta_H + 4 d_z^2)
        let mut back = p.clone();
        for iz in 0..g.nz {
            let kz = g.wavenumber(Axis::Z, iz);
            for iy in 0..g.ny {
                let ky = g.wavenumber(Axis::Y, iy);
                for ix in 0..g.nx {
                    let kx = g.wavenumber(Axis::X, ix);
                    back.coeffs_mut()[(iz * g.ny + iy) * g.nx + ix] *=
                        -(kx * kx + ky * ky + kz * kz / (eps * eps));
                }
            }
        }
        let scale = rhs.linf_coeff();
        let err = back
            .coeffs()
            .iter()
            .zip(rhs.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-12 * scale, "residual {err:.3e}");
    }

    #[test]
    fn aniso_poisson_rejects_bad_eps() {
        let g = grid();
        let rhs = SpectralField3D::zeros(g);
        assert!(solve_poisson_aniso_3d(&rhs, 0.0).is_err());
        assert!(solve_poisson_aniso_3d(&rhs, -1.0).is_err());
    }

    #[test]
    fn oversampled_synthesis_matches_fn() {
        let g = GridSpec::new(1.0, 1.0, 8, 8, 8).unwrap();
        let phys = PhysicalField3D::from_fn(g, |x, y, z| {
            (2.0 * PI * x).sin() + (2.0 * PI * y).cos() * (PI * z).cos()
        });
        let spec = forward_transform(&phys);
        let fine = synthesize_oversampled(&spec, 12, 12, 12);
        let gf = GridSpec::new(1.0, 1.0, 12, 12, 12).unwrap();
        let oracle = PhysicalField3D::from_fn(gf, |x, y, z| {
            (2.0 * PI * x).sin() + (2.0 * PI * y).cos() * (PI * z).cos()
        });
        let err = fine
            .iter()
            .zip(oracle.samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        assert!(err < 1e-12, "oversampled synthesis error {err:.3e}");
    }

    #[test]
    fn next_fast_size_values() {
        assert_eq!(next_fast_size(17), 18);
        assert_eq!(next_fast_size(48), 48);
        assert_eq!(next_fast_size(49), 54);
        assert_eq!(next_fast_size(65), 72);
    }
}
