//! Shared builders and quadrature oracles for unit tests.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::fields::{
    project_symmetry, recover_vertical, HorizontalVectorField, PEMState, ParityZ, SMHDState,
};
use crate::grid::GridSpec;
use crate::spectral::{synthesize_oversampled, SpectralField3D};

/// Random even-in-z, zero-mean, barotropic-divergence-free horizontal field
/// with coefficient decay `|m|^-3` inside `|m| <= band`.
pub fn random_admissible_hvf(
    g: GridSpec,
    seed: u64,
    band: i64,
    amplitude: f64,
) -> HorizontalVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |seed_shift: u64| {
        let _ = seed_shift;
        let mut f = SpectralField3D::zeros(g);
        for mz in -band..=band {
            for my in -band..=band {
                for mx in 0..=band {
                    if mx == 0 && (my < 0 || (my == 0 && mz <= 0)) {
                        continue;
                    }
                    let m2 = (mx * mx + my * my + mz * mz) as f64;
                    let w = m2.sqrt().max(1.0).powi(-3);
                    f.set_mode_pair(
                        mx,
                        my,
                        mz,
                        Complex64::new(
                            w * (rng.gen::<f64>() - 0.5),
                            w * (rng.gen::<f64>() - 0.5),
                        ),
                    );
                }
            }
        }
        project_symmetry(&f, ParityZ::EvenInZ)
    };
    let mut h = HorizontalVectorField {
        cx: draw(0),
        cy: draw(1),
    };
    h.clean_barotropic();
    let norm = h.l2_norm_sq().sqrt();
    if norm > 0.0 {
        let s = amplitude / norm;
        h.cx.scale(s);
        h.cy.scale(s);
    }
    h
}

/// Admissible random state for the hydrostatic model.
pub fn random_pem_state(g: GridSpec, seed: u64, amplitude: f64) -> PEMState {
    let band = (g.nx.min(g.ny).min(g.nz) as i64 / 4).max(1);
    PEMState {
        u_h: random_admissible_hvf(g, seed.wrapping_mul(2) + 1, band, amplitude),
        b_h: random_admissible_hvf(g, seed.wrapping_mul(2) + 1000, band, 0.7 * amplitude),
        time: 0.0,
    }
}

/// Well-prepared state of the scaled system sharing horizontals with
/// [`random_pem_state`].
pub fn random_smhd_state(g: GridSpec, seed: u64, amplitude: f64, eps: f64) -> SMHDState {
    let p = random_pem_state(g, seed, amplitude);
    let u3 = recover_vertical(&p.u_h).unwrap();
    let b3 = recover_vertical(&p.b_h).unwrap();
    SMHDState {
        u: [p.u_h.cx, p.u_h.cy, u3],
        b: [p.b_h.cx, p.b_h.cy, b3],
        eps,
        time: 0.0,
    }
}

/// The exact-solution shear flow `u = (a sin(2 pi y / L2), 0)`, `b = 0`.
pub fn shear_state(g: GridSpec, a: f64) -> PEMState {
    let mut cx = SpectralField3D::zeros(g);
    cx.set_mode_pair(0, 1, 0, Complex64::new(0.0, -0.5 * a));
    PEMState {
        u_h: HorizontalVectorField {
            cx,
            cy: SpectralField3D::zeros(g),
        },
        b_h: HorizontalVectorField::zeros(g),
        time: 0.0,
    }
}

/// `int f g dV` by trapezoidal quadrature on a 2x-oversampled grid; exact for
/// dealiased inputs and independent of the Parseval route.
pub fn integral_product(f: &SpectralField3D, g: &SpectralField3D) -> f64 {
    let gr = f.grid();
    let (mx, my, mz) = (2 * gr.nx, 2 * gr.ny, 2 * gr.nz);
    let pf = synthesize_oversampled(f, mx, my, mz);
    let pg = synthesize_oversampled(g, mx, my, mz);
    let cell = gr.volume() / (mx * my * mz) as f64;
    pf.iter().zip(&pg).map(|(a, b)| a * b).sum::<f64>() * cell
}
