//! Field algebra with the structural constraints of the model: z-parity
//! classes, zero-mean normalization, divergence operators, recovery of the
//! diagnostic vertical components from the horizontal ones, and the Elsasser
//! change of variables.

use num_complex::Complex64;

use crate::error::{PemError, Result};
use crate::grid::{Axis, GridSpec};
use crate::spectral::{derivative, SpectralField3D};

/// Symmetry class with respect to z -> -z.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityZ {
    EvenInZ,
    OddInZ,
}

/// Tolerance below which a constraint residual counts as satisfied.
pub const CONSTRAINT_TOL: f64 = 1e-10;

/// Projects onto the even or odd part in z by symmetrizing coefficients over
/// `m_z <-> -m_z`. The two projectors are complementary and idempotent.
pub fn project_symmetry(f: &SpectralField3D, parity: ParityZ) -> SpectralField3D {
    let g = *f.grid();
    let mut out = SpectralField3D::zeros(g);
    let src = f.coeffs();
    let dst = out.coeffs_mut();
    for iz in 0..g.nz {
        let jz = (g.nz - iz) % g.nz;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let i = g.index(ix, iy, iz);
                let j = g.index(ix, iy, jz);
                let e = 0.5 * (src[i] + src[j]);
                dst[i] = match parity {
                    ParityZ::EvenInZ => e,
                    ParityZ::OddInZ => src[i] - e,
                };
            }
        }
    }
    out
}

/// Spectral L2 distance of `f` from its projection onto `parity`.
pub fn parity_residual(f: &SpectralField3D, parity: ParityZ) -> f64 {
    let proj = project_symmetry(f, parity);
    let mut sum = 0.0;
    for (a, b) in f.coeffs().iter().zip(proj.coeffs()) {
        sum += (a - b).norm_sqr();
    }
    (f.grid().volume() * sum).sqrt()
}

/// Two horizontal components of a z-dependent vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalVectorField {
    pub cx: SpectralField3D,
    pub cy: SpectralField3D,
}

impl HorizontalVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            cx: SpectralField3D::zeros(grid),
            cy: SpectralField3D::zeros(grid),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.cx.grid()
    }

    /// Horizontal divergence `dx cx + dy cy`.
    pub fn divergence_h(&self) -> SpectralField3D {
        let mut d = derivative(&self.cx, Axis::X);
        d.add_scaled(&derivative(&self.cy, Axis::Y), 1.0);
        d
    }

    /// Spectral magnitude of the horizontal divergence of the vertical
    /// average (the barotropic incompressibility residual).
    pub fn barotropic_divergence_residual(&self) -> f64 {
        let d = self.divergence_h();
        let g = d.grid();
        let mut max = 0.0_f64;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                max = max.max(d.coeffs()[g.index(ix, iy, 0)].norm());
            }
        }
        max
    }

    /// Removes the gradient part of the vertical average so that
    /// `div_H <f> = 0` exactly (a Leray projection of the barotropic mode).
    pub fn clean_barotropic(&mut self) {
        let g = *self.grid();
        let d = self.divergence_h();
        for iy in 0..g.ny {
            let ky = g.wavenumber(Axis::Y, iy);
            for ix in 0..g.nx {
                let kx = g.wavenumber(Axis::X, ix);
                let kh2 = kx * kx + ky * ky;
                if kh2 == 0.0 {
                    continue;
                }
                let i = g.index(ix, iy, 0);
                // phi = div / (-kh2); subtract grad_H phi
                let phi = d.coeffs()[i] / -kh2;
                let ikx = Complex64::new(0.0, kx);
                let iky = Complex64::new(0.0, ky);
                self.cx.coeffs_mut()[i] -= ikx * phi;
                self.cy.coeffs_mut()[i] -= iky * phi;
            }
        }
    }

    pub fn parity_residual(&self, parity: ParityZ) -> f64 {
        parity_residual(&self.cx, parity).max(parity_residual(&self.cy, parity))
    }

    pub fn project_parity(&mut self, parity: ParityZ) {
        self.cx = project_symmetry(&self.cx, parity);
        self.cy = project_symmetry(&self.cy, parity);
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.cx.l2_norm_sq() + self.cy.l2_norm_sq()
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        self.cx.add_scaled(&other.cx, s);
        self.cy.add_scaled(&other.cy, s);
    }

    pub fn is_finite(&self) -> bool {
        self.cx.is_finite() && self.cy.is_finite()
    }
}

/// Antiderivative in z vanishing at z = 0:
/// `w(z) = -int_0^z d(xi) dxi`, computed per vertical mode. The `m_z = 0`
/// content of `d` must vanish (otherwise `w` would not be periodic); the
/// caller checks that precondition.
pub(crate) fn vertical_primitive(d: &SpectralField3D) -> SpectralField3D {
    let g = *d.grid();
    let mut w = SpectralField3D::zeros(g);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            // w_mz = -d_mz / (i k_z) for mz != 0; w_0 = sum d_mz / (i k_z)
            let mut w0 = Complex64::new(0.0, 0.0);
            for iz in 1..g.nz {
                let kz = g.wavenumber(Axis::Z, iz);
                if kz == 0.0 {
                    continue; // Nyquist carries no derivative weight
                }
                let c = d.coeffs()[g.index(ix, iy, iz)];
                let v = c / Complex64::new(0.0, kz);
                w.coeffs_mut()[g.index(ix, iy, iz)] = -v;
                w0 += v;
            }
            w.coeffs_mut()[g.index(ix, iy, 0)] = w0;
        }
    }
    w
}

/// Recovers the vertical component `w = -int_0^z div_H h dxi` of a
/// divergence-free 3D field from its horizontal part.
///
/// Preconditions: `h` even in z and its depth-averaged horizontal divergence
/// zero (within `1e-10`), so that `w` is z-periodic and odd.
pub fn recover_vertical(h: &HorizontalVectorField) -> Result<SpectralField3D> {
    let scale = h.cx.linf_coeff().max(h.cy.linf_coeff()).max(1.0);
    let parity = h.parity_residual(ParityZ::EvenInZ);
    if parity > CONSTRAINT_TOL * scale {
        return Err(PemError::Constraint(format!(
            "vertical recovery needs even-in-z horizontal field, parity residual {parity:.3e}"
        )));
    }
    let baro = h.barotropic_divergence_residual();
    if baro > CONSTRAINT_TOL * scale {
        return Err(PemError::Constraint(format!(
            "vertical recovery needs zero depth-averaged divergence, residual {baro:.3e}"
        )));
    }
    Ok(vertical_primitive(&h.divergence_h()))
}

/// Full 3D divergence `dx u1 + dy u2 + dz u3`.
pub fn divergence(u: &[SpectralField3D; 3]) -> Result<SpectralField3D> {
    if u[0].grid() != u[1].grid() || u[0].grid() != u[2].grid() {
        return Err(PemError::GridMismatch);
    }
    let mut d = derivative(&u[0], Axis::X);
    d.add_scaled(&derivative(&u[1], Axis::Y), 1.0);
    d.add_scaled(&derivative(&u[2], Axis::Z), 1.0);
    Ok(d)
}

/// Elsasser variables `A = u + b`, `A* = u - b`; a linear bijection whose
/// inverse is `u = (A + A*)/2`, `b = (A - A*)/2`.
pub fn elsasser(
    u_h: &HorizontalVectorField,
    b_h: &HorizontalVectorField,
) -> Result<(HorizontalVectorField, HorizontalVectorField)> {
    if u_h.grid() != b_h.grid() {
        return Err(PemError::GridMismatch);
    }
    let mut a = u_h.clone();
    a.add_scaled(b_h, 1.0);
    let mut astar = u_h.clone();
    astar.add_scaled(b_h, -1.0);
    Ok((a, astar))
}

/// Prognostic state of the hydrostatic magnetic model: horizontal velocity
/// and horizontal magnetic field. The vertical components are diagnostic,
/// via [`recover_vertical`].
#[derive(Debug, Clone, PartialEq)]
pub struct PEMState {
    pub u_h: HorizontalVectorField,
    pub b_h: HorizontalVectorField,
    pub time: f64,
}

impl PEMState {
    pub fn new(u_h: HorizontalVectorField, b_h: HorizontalVectorField, time: f64) -> Result<Self> {
        if u_h.grid() != b_h.grid() {
            return Err(PemError::GridMismatch);
        }
        let s = Self { u_h, b_h, time };
        s.validate()?;
        Ok(s)
    }

    pub fn grid(&self) -> &GridSpec {
        self.u_h.grid()
    }

    /// Checks parity, barotropic incompressibility and zero-mean
    /// normalization against the shared tolerance.
    pub fn validate(&self) -> Result<()> {
        let scale = self
            .u_h
            .cx
            .linf_coeff()
            .max(self.u_h.cy.linf_coeff())
            .max(self.b_h.cx.linf_coeff())
            .max(self.b_h.cy.linf_coeff())
            .max(1.0);
        for (name, h) in [("u_h", &self.u_h), ("b_h", &self.b_h)] {
            let p = h.parity_residual(ParityZ::EvenInZ);
            if p > CONSTRAINT_TOL * scale {
                return Err(PemError::Constraint(format!(
                    "{name} parity residual {p:.3e} exceeds tolerance"
                )));
            }
            let b = h.barotropic_divergence_residual();
            if b > CONSTRAINT_TOL * scale {
                return Err(PemError::Constraint(format!(
                    "{name} barotropic divergence residual {b:.3e} exceeds tolerance"
                )));
            }
            let mean = h.cx.mean_coeff().norm().max(h.cy.mean_coeff().norm());
            if mean > CONSTRAINT_TOL * scale {
                return Err(PemError::Constraint(format!(
                    "{name} mean {mean:.3e} violates zero-mean normalization"
                )));
            }
        }
        Ok(())
    }
}

/// Full state of the scaled anisotropic MHD system: three velocity and three
/// magnetic components plus the aspect ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct SMHDState {
    pub u: [SpectralField3D; 3],
    pub b: [SpectralField3D; 3],
    pub eps: f64,
    pub time: f64,
}

impl SMHDState {
    pub fn new(
        u: [SpectralField3D; 3],
        b: [SpectralField3D; 3],
        eps: f64,
        time: f64,
    ) -> Result<Self> {
        let s = Self { u, b, eps, time };
        s.validate()?;
        Ok(s)
    }

    pub fn grid(&self) -> &GridSpec {
        self.u[0].grid()
    }

    pub fn horizontal_u(&self) -> HorizontalVectorField {
        HorizontalVectorField {
            cx: self.u[0].clone(),
            cy: self.u[1].clone(),
        }
    }

    pub fn horizontal_b(&self) -> HorizontalVectorField {
        HorizontalVectorField {
            cx: self.b[0].clone(),
            cy: self.b[1].clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(PemError::InvalidParameter(format!(
                "aspect ratio must be positive, got {}",
                self.eps
            )));
        }
        let scale = self
            .u
            .iter()
            .chain(self.b.iter())
            .map(|f| f.linf_coeff())
            .fold(1.0_f64, f64::max);
        for (name, v) in [("u", &self.u), ("b", &self.b)] {
            for f in v.iter() {
                if f.grid() != self.u[0].grid() {
                    return Err(PemError::GridMismatch);
                }
            }
            let div = divergence(v)?;
            let d = div.linf_coeff();
            if d > CONSTRAINT_TOL * scale {
                return Err(PemError::Constraint(format!(
                    "div {name} residual {d:.3e} exceeds tolerance"
                )));
            }
            for (comp, parity) in [
                (&v[0], ParityZ::EvenInZ),
                (&v[1], ParityZ::EvenInZ),
                (&v[2], ParityZ::OddInZ),
            ] {
                let p = parity_residual(comp, parity);
                if p > CONSTRAINT_TOL * scale {
                    return Err(PemError::Constraint(format!(
                        "{name} parity residual {p:.3e} exceeds tolerance"
                    )));
                }
            }
        }
        Ok(())
    }
}
