//! Shared time-integration skeleton: explicit Runge-Kutta applied to the
//! diffusion-transformed system, with the stiff Laplacian handled by an exact
//! per-mode integrating factor `exp(-|k|^2 tau)`.
//!
//! Stage values follow the integrating-factor construction
//!
//! ```text
//! U_i     = E(c_i dt) u_n + dt sum_j a_ij E((c_i - c_j) dt) N(U_j)
//! u_{n+1} = E(dt) u_n + dt sum_i b_i E((1 - c_i) dt) N(U_i)
//! ```
//!
//! so a pure-diffusion step multiplies every mode by exactly `exp(-|k|^2 dt)`.
//! Both tableaus have non-decreasing nodes, which keeps every factor a decay.

use crate::error::{PemError, Result};
use crate::grid::{Axis, GridSpec};
use crate::spectral::SpectralField3D;

/// Time scheme for the explicit (nonlinear) part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Heun's second-order method on the transformed system.
    ImexRk2,
    /// Heun's third-order method on the transformed system.
    ImexRk3,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImexRk2 => "IMEX-RK2",
            Scheme::ImexRk3 => "IMEX-RK3",
        }
    }
}

/// Stepper parameters shared by both models.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Advisory Courant number; the step errors out when violated by 4x.
    pub cfl_limit: f64,
    /// Re-project the magnetic constraint after each step.
    pub clean_magnetic_barotropic: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            scheme: Scheme::ImexRk3,
            cfl_limit: 0.5,
            clean_magnetic_barotropic: false,
        }
    }
}

impl StepperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PemError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.cfl_limit > 0.0 && self.cfl_limit <= 1.0) {
            return Err(PemError::InvalidParameter(format!(
                "cfl_limit must lie in (0, 1], got {}",
                self.cfl_limit
            )));
        }
        Ok(())
    }
}

pub(crate) struct Tableau {
    pub c: &'static [f64],
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
}

pub(crate) const HEUN2: Tableau = Tableau {
    c: &[0.0, 1.0],
    a: &[&[], &[1.0]],
    b: &[0.5, 0.5],
};

pub(crate) const HEUN3: Tableau = Tableau {
    c: &[0.0, 1.0 / 3.0, 2.0 / 3.0],
    a: &[&[], &[1.0 / 3.0], &[0.0, 2.0 / 3.0]],
    b: &[0.25, 0.0, 0.75],
};

pub(crate) fn tableau(scheme: Scheme) -> &'static Tableau {
    match scheme {
        Scheme::ImexRk2 => &HEUN2,
        Scheme::ImexRk3 => &HEUN3,
    }
}

/// Caches `exp(-|k|^2 tau)` arrays for the handful of `tau` values a fixed
/// tableau needs. One cache belongs to one trajectory; clone per worker.
pub(crate) struct DecayCache {
    k2: Vec<f64>,
    factors: Vec<(f64, Vec<f64>)>,
}

impl DecayCache {
    pub fn new(grid: &GridSpec) -> Self {
        let mut k2 = Vec::with_capacity(grid.n_points());
        for iz in 0..grid.nz {
            let kz = grid.wavenumber(Axis::Z, iz);
            for iy in 0..grid.ny {
                let ky = grid.wavenumber(Axis::Y, iy);
                for ix in 0..grid.nx {
                    let kx = grid.wavenumber(Axis::X, ix);
                    k2.push(kx * kx + ky * ky + kz * kz);
                }
            }
        }
        Self {
            k2,
            factors: Vec::new(),
        }
    }

    fn ensure(&mut self, tau: f64) -> usize {
        if let Some(i) = self.factors.iter().position(|(t, _)| *t == tau) {
            return i;
        }
        let f: Vec<f64> = self.k2.iter().map(|k2| (-k2 * tau).exp()).collect();
        self.factors.push((tau, f));
        self.factors.len() - 1
    }

    /// Multiplies `f` by `exp(-|k|^2 tau)` per mode.
    pub fn apply(&mut self, f: &mut SpectralField3D, tau: f64) {
        if tau == 0.0 {
            return;
        }
        let i = self.ensure(tau);
        f.mul_mode_factors(&self.factors[i].1);
    }
}

/// One integrating-factor RK step over a flat list of prognostic spectra.
/// `rhs` evaluates the explicit tendency (nonlinear terms plus pressure) of
/// the untransformed system.
pub(crate) fn lawson_step<F>(
    cache: &mut DecayCache,
    tab: &Tableau,
    fields: &[SpectralField3D],
    t: f64,
    dt: f64,
    mut rhs: F,
) -> Result<Vec<SpectralField3D>>
where
    F: FnMut(&[SpectralField3D], f64) -> Result<Vec<SpectralField3D>>,
{
    let stages = tab.c.len();
    let mut k: Vec<Vec<SpectralField3D>> = Vec::with_capacity(stages);
    for i in 0..stages {
        let ci = tab.c[i];
        let mut u_i = fields.to_vec();
        for f in &mut u_i {
            cache.apply(f, ci * dt);
        }
        for (j, &aij) in tab.a[i].iter().enumerate() {
            if aij == 0.0 {
                continue;
            }
            let tau = (ci - tab.c[j]) * dt;
            for (uf, kf) in u_i.iter_mut().zip(&k[j]) {
                let mut tmp = kf.clone();
                cache.apply(&mut tmp, tau);
                uf.add_scaled(&tmp, dt * aij);
            }
        }
        k.push(rhs(&u_i, t + ci * dt)?);
    }

    let mut out = fields.to_vec();
    for f in &mut out {
        cache.apply(f, dt);
    }
    for (i, &bi) in tab.b.iter().enumerate() {
        if bi == 0.0 {
            continue;
        }
        let tau = (1.0 - tab.c[i]) * dt;
        for (of, kf) in out.iter_mut().zip(&k[i]) {
            let mut tmp = kf.clone();
            cache.apply(&mut tmp, tau);
            of.add_scaled(&tmp, dt * bi);
        }
    }
    Ok(out)
}
