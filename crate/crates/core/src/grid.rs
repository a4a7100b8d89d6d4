//! Periodic box geometry and wavenumber bookkeeping.
//!
//! The domain is `(0, L1) x (0, L2) x (-1, 1)`: the horizontal periods are
//! free parameters, the vertical period is always 2. Samples live on the
//! uniform grid `x_i = i L1/Nx`, `y_j = j L2/Ny`, `z_k = -1 + 2k/Nz`, stored
//! x-fastest, then y, then z.

use crate::error::{PemError, Result};

/// Vertical period of the box; the domain is always `M x (-1, 1)`.
pub const LZ: f64 = 2.0;

/// Coordinate axis of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Grid resolution and horizontal periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub l1: f64,
    pub l2: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridSpec {
    /// Validates the grid: sample counts even and at least 4, positive periods.
    pub fn new(l1: f64, l2: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if !(l1 > 0.0 && l1.is_finite() && l2 > 0.0 && l2.is_finite()) {
            return Err(PemError::InvalidParameter(format!(
                "periods must be positive finite, got L1 = {l1}, L2 = {l2}"
            )));
        }
        for (name, n) in [("Nx", nx), ("Ny", ny), ("Nz", nz)] {
            if n < 4 || n % 2 != 0 {
                return Err(PemError::InvalidParameter(format!(
                    "{name} must be even and >= 4, got {n}"
                )));
            }
        }
        Ok(Self { l1, l2, nx, ny, nz })
    }

    pub fn n_points(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Cell volume of the uniform grid, `|Omega| / (Nx Ny Nz)`.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.n_points() as f64
    }

    /// Box volume `L1 * L2 * 2`.
    pub fn volume(&self) -> f64 {
        self.l1 * self.l2 * LZ
    }

    pub fn len(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }

    pub fn period(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.l1,
            Axis::Y => self.l2,
            Axis::Z => LZ,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        self.period(axis) / self.len(axis) as f64
    }

    /// Signed integer mode for a storage index in FFT order
    /// `[0, 1, .., N/2, -(N/2 - 1), .., -1]`.
    pub fn signed_mode(n: usize, idx: usize) -> i64 {
        debug_assert!(idx < n);
        if idx <= n / 2 {
            idx as i64
        } else {
            idx as i64 - n as i64
        }
    }

    /// Wavenumber `2*pi*m / L` for storage index `idx` on `axis`.
    ///
    /// The Nyquist index carries k = 0: a real field has a real Nyquist
    /// coefficient, and an odd-derivative weight there would break realness.
    /// Dealiased fields never populate it.
    pub fn wavenumber(&self, axis: Axis, idx: usize) -> f64 {
        let n = self.len(axis);
        if idx == n / 2 {
            return 0.0;
        }
        let m = Self::signed_mode(n, idx);
        2.0 * std::f64::consts::PI * m as f64 / self.period(axis)
    }

    /// Dealiasing band limit `floor(N/3)` for `axis`.
    pub fn dealias_band(&self, axis: Axis) -> i64 {
        (self.len(axis) / 3) as i64
    }

    /// Flat index of `(ix, iy, iz)`, x fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.ny + iy) * self.nx + ix
    }
}
