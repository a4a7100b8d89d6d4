//! Time integration of the hydrostatic magnetic model: nonlinear/coupling
//! tendency assembly with diagnostic vertical components, the barotropic
//! pressure, and the integrating-factor stepper.
//!
//! The prognostic unknowns are the horizontal velocity and horizontal
//! magnetic field; `u3`, `b3` are recomputed from the incompressibility
//! constraints at every evaluation, which keeps the discrete divergence
//! structure exact by construction.

use num_complex::Complex64;

use crate::error::{PemError, Result};
use crate::fields::{recover_vertical, HorizontalVectorField, PEMState, ParityZ};
use crate::grid::{Axis, GridSpec};
use crate::spectral::{
    dealias_in_place, derivative, forward_transform, inverse_transform, laplacian,
    solve_poisson_2d, PhysicalField3D, SpectralField2D, SpectralField3D,
};
use crate::timestep::{lawson_step, tableau, DecayCache, StepperConfig};

/// Full tendency of the prognostic fields (nonlinear terms, coupling,
/// diffusion and pressure gradient).
#[derive(Debug, Clone)]
pub struct PEMTendency {
    pub du_h: HorizontalVectorField,
    pub db_h: HorizontalVectorField,
}

/// Explicit part of the tendency: advection, coupling and pressure, without
/// the diffusion handled by the integrating factor.
pub(crate) struct ExplicitTendency {
    pub du: HorizontalVectorField,
    pub db: HorizontalVectorField,
    pub max_velocity: f64,
}

fn physical(f: &SpectralField3D) -> Result<PhysicalField3D> {
    inverse_transform(f)
}

fn gradient_physical(f: &SpectralField3D) -> Result<[PhysicalField3D; 3]> {
    Ok([
        physical(&derivative(f, Axis::X))?,
        physical(&derivative(f, Axis::Y))?,
        physical(&derivative(f, Axis::Z))?,
    ])
}

#[inline]
fn dot3_at(a: &[PhysicalField3D; 3], d: &[PhysicalField3D; 3], i: usize) -> f64 {
    a[0].samples()[i] * d[0].samples()[i]
        + a[1].samples()[i] * d[1].samples()[i]
        + a[2].samples()[i] * d[2].samples()[i]
}

/// Subtracts `grad_H p` from `du`, with `p` solving the depth-averaged
/// horizontal Poisson problem for the instantaneous tendency; the barotropic
/// constraint `div_H <du> = 0` then holds exactly per mode. Returns `p`.
pub(crate) fn project_pressure(du: &mut HorizontalVectorField) -> Result<SpectralField2D> {
    let g = *du.grid();
    let d = du.divergence_h();
    let mut rhs = SpectralField2D::zeros(g);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            rhs.coeffs_mut()[iy * g.nx + ix] = d.coeffs()[g.index(ix, iy, 0)];
        }
    }
    let p = solve_poisson_2d(&rhs)?;
    for iy in 0..g.ny {
        let ky = g.wavenumber(Axis::Y, iy);
        for ix in 0..g.nx {
            let kx = g.wavenumber(Axis::X, ix);
            let c = p.coeffs()[iy * g.nx + ix];
            let i0 = g.index(ix, iy, 0);
            du.cx.coeffs_mut()[i0] -= Complex64::new(0.0, kx) * c;
            du.cy.coeffs_mut()[i0] -= Complex64::new(0.0, ky) * c;
        }
    }
    Ok(p)
}

/// Assembles the dealiased explicit tendency
/// `du = -(u . grad) u_h + (b . grad) b_h - grad_H p`,
/// `db = -(u . grad) b_h + (b . grad) u_h`
/// with the vertical components recovered from the constraints.
pub(crate) fn pem_explicit(
    u_h: &HorizontalVectorField,
    b_h: &HorizontalVectorField,
) -> Result<ExplicitTendency> {
    let g = *u_h.grid();
    let u3 = recover_vertical(u_h)?;
    let b3 = recover_vertical(b_h)?;
    let pu = [physical(&u_h.cx)?, physical(&u_h.cy)?, physical(&u3)?];
    let pb = [physical(&b_h.cx)?, physical(&b_h.cy)?, physical(&b3)?];
    let max_velocity = pu.iter().map(|f| f.max_abs()).fold(0.0, f64::max);

    let n = g.n_points();
    let mut du = HorizontalVectorField::zeros(g);
    let mut db = HorizontalVectorField::zeros(g);
    for comp in 0..2 {
        let (ui, bi) = if comp == 0 {
            (&u_h.cx, &b_h.cx)
        } else {
            (&u_h.cy, &b_h.cy)
        };
        let dui = gradient_physical(ui)?;
        let dbi = gradient_physical(bi)?;
        let mut du_phys = vec![0.0; n];
        let mut db_phys = vec![0.0; n];
        for i in 0..n {
            let adv_u = dot3_at(&pu, &dui, i);
            let lor_b = dot3_at(&pb, &dbi, i);
            let adv_b = dot3_at(&pu, &dbi, i);
            let lor_u = dot3_at(&pb, &dui, i);
            du_phys[i] = -adv_u + lor_b;
            db_phys[i] = -adv_b + lor_u;
        }
        let mut du_spec = forward_transform(&PhysicalField3D::new(g, du_phys)?);
        let mut db_spec = forward_transform(&PhysicalField3D::new(g, db_phys)?);
        dealias_in_place(&mut du_spec);
        dealias_in_place(&mut db_spec);
        if comp == 0 {
            du.cx = du_spec;
            db.cx = db_spec;
        } else {
            du.cy = du_spec;
            db.cy = db_spec;
        }
    }
    project_pressure(&mut du)?;
    Ok(ExplicitTendency {
        du,
        db,
        max_velocity,
    })
}

/// Full tendency of the model at a state; diffusion enters as a spectral
/// Laplacian, the pressure via the barotropic projection.
pub fn pem_rhs(s: &PEMState) -> Result<PEMTendency> {
    let ex = pem_explicit(&s.u_h, &s.b_h)?;
    let mut du_h = ex.du;
    let mut db_h = ex.db;
    du_h.cx.add_scaled(&laplacian(&s.u_h.cx), 1.0);
    du_h.cy.add_scaled(&laplacian(&s.u_h.cy), 1.0);
    db_h.cx.add_scaled(&laplacian(&s.b_h.cx), 1.0);
    db_h.cy.add_scaled(&laplacian(&s.b_h.cy), 1.0);
    Ok(PEMTendency { du_h, db_h })
}

/// Barotropic pressure from the depth-integrated double-divergence balance:
/// `int Delta_H p dz = -int div_H div_H (u x u) dz + int div_H div_H (b x b) dz`
/// normalized to zero mean. The pressure is z-independent by construction.
pub fn barotropic_pressure(s: &PEMState) -> Result<SpectralField2D> {
    let g = *s.grid();
    let pu = [physical(&s.u_h.cx)?, physical(&s.u_h.cy)?];
    let pb = [physical(&s.b_h.cx)?, physical(&s.b_h.cy)?];
    let tensor = |a: &PhysicalField3D, b: &PhysicalField3D| -> Result<SpectralField3D> {
        let prod: Vec<f64> = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| x * y)
            .collect();
        let mut spec = forward_transform(&PhysicalField3D::new(g, prod)?);
        dealias_in_place(&mut spec);
        Ok(spec)
    };
    let uu = [
        tensor(&pu[0], &pu[0])?,
        tensor(&pu[0], &pu[1])?,
        tensor(&pu[1], &pu[1])?,
    ];
    let bb = [
        tensor(&pb[0], &pb[0])?,
        tensor(&pb[0], &pb[1])?,
        tensor(&pb[1], &pb[1])?,
    ];
    let mut rhs = SpectralField2D::zeros(g);
    for iy in 0..g.ny {
        let ky = g.wavenumber(Axis::Y, iy);
        for ix in 0..g.nx {
            let kx = g.wavenumber(Axis::X, ix);
            let i0 = g.index(ix, iy, 0);
            let dd = |t: &[SpectralField3D; 3]| -> Complex64 {
                -(kx * kx) * t[0].coeffs()[i0]
                    - 2.0 * kx * ky * t[1].coeffs()[i0]
                    - (ky * ky) * t[2].coeffs()[i0]
            };
            // vertical average is the m_z = 0 coefficient
            rhs.coeffs_mut()[iy * g.nx + ix] = -dd(&uu) + dd(&bb);
        }
    }
    solve_poisson_2d(&rhs)
}

/// Stepper with cached integrating factors; one instance drives one
/// trajectory.
pub struct PemStepper {
    cfg: StepperConfig,
    cache: DecayCache,
}

impl PemStepper {
    pub fn new(grid: &GridSpec, cfg: StepperConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cache: DecayCache::new(grid),
            cfg,
        })
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    /// Advances one step: explicit RK on the nonlinear part, exact per-mode
    /// integrating factor for the diffusion, parity and barotropic
    /// re-projection, blow-up detection.
    pub fn step(&mut self, s: &PEMState) -> Result<PEMState> {
        let g = *s.grid();
        let dt = self.cfg.dt;
        let fields = [
            s.u_h.cx.clone(),
            s.u_h.cy.clone(),
            s.b_h.cx.clone(),
            s.b_h.cy.clone(),
        ];
        let mut max_vel = 0.0_f64;
        let tab = tableau(self.cfg.scheme);
        let out = lawson_step(&mut self.cache, tab, &fields, s.time, dt, |f, _| {
            let u_h = HorizontalVectorField {
                cx: f[0].clone(),
                cy: f[1].clone(),
            };
            let b_h = HorizontalVectorField {
                cx: f[2].clone(),
                cy: f[3].clone(),
            };
            let ex = pem_explicit(&u_h, &b_h)?;
            max_vel = max_vel.max(ex.max_velocity);
            Ok(vec![ex.du.cx, ex.du.cy, ex.db.cx, ex.db.cy])
        })?;

        let min_dx = g
            .spacing(Axis::X)
            .min(g.spacing(Axis::Y))
            .min(g.spacing(Axis::Z));
        if max_vel > 0.0 && dt > 4.0 * self.cfg.cfl_limit * min_dx / max_vel {
            return Err(PemError::Constraint(format!(
                "advective CFL advisory violated by more than 4x at t = {:.6}: \
                 dt = {dt:.3e}, limit = {:.3e}",
                s.time,
                self.cfg.cfl_limit * min_dx / max_vel
            )));
        }

        let mut it = out.into_iter();
        let mut u_h = HorizontalVectorField {
            cx: it.next().unwrap(),
            cy: it.next().unwrap(),
        };
        let mut b_h = HorizontalVectorField {
            cx: it.next().unwrap(),
            cy: it.next().unwrap(),
        };
        u_h.project_parity(ParityZ::EvenInZ);
        b_h.project_parity(ParityZ::EvenInZ);
        u_h.clean_barotropic();
        if self.cfg.clean_magnetic_barotropic {
            b_h.clean_barotropic();
        }
        let time = s.time + dt;
        if !(u_h.is_finite() && b_h.is_finite()) {
            return Err(PemError::BlowUp { time });
        }
        Ok(PEMState { u_h, b_h, time })
    }
}

/// One-shot step; loops should hold a [`PemStepper`] to reuse its caches.
pub fn step_pem(s: &PEMState, cfg: &StepperConfig) -> Result<PEMState> {
    PemStepper::new(s.grid(), cfg.clone())?.step(s)
}
