//! Beam-splitter equivalence of the imaging channel and the quantum
//! Fisher information upper bound.
//!
//! The symmetric and antisymmetric source modes are independently
//! attenuated with transmissivities `eta_pm = (1 +- delta) eta`. The
//! separation dependence of the image modes is a beam-splitter-like
//! rotation with angle `theta_pm = arccos sqrt(eta_pm)`, and the bound
//! is `QFI <= (2 eta N / x_R^2) max{f_+, f_-}` with
//! `f_pm = x_R^2 [eps_pm^2 + gamma^2 / ((1 +- delta)(1 - (1 +- delta) eta))]`.

use crate::error::{Error, Result};
use crate::psf::{OverlapFunctionals, PsfModel};

/// Attenuation plus PSF; the channel model requires `eta <= 1/2`.
#[derive(Debug, Clone)]
pub struct ImagingSystem {
    eta: f64,
    pub psf: PsfModel,
}

/// Everything the beam-splitter picture attaches to one separation.
#[derive(Debug, Clone, Copy)]
pub struct BsParameters {
    pub s: f64,
    pub eta_plus: f64,
    pub eta_minus: f64,
    pub theta_plus: f64,
    pub theta_minus: f64,
    pub dtheta_plus_ds: f64,
    pub dtheta_minus_ds: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

impl ImagingSystem {
    pub fn new(eta: f64, psf: PsfModel) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0 && eta <= 0.5) {
            return Err(Error::EtaOutOfRange(eta));
        }
        Ok(Self { eta, psf })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn x_r(&self) -> f64 {
        self.psf.x_r()
    }
}

/// Effective transmissivities `((1+delta) eta, (1-delta) eta)`.
pub fn transmissivities(system: &ImagingSystem, fns: &OverlapFunctionals) -> (f64, f64) {
    (
        (1.0 + fns.delta) * system.eta,
        fns.one_minus_delta * system.eta,
    )
}

/// Rotation angles `theta_pm = arccos sqrt(eta_pm)`, each in [0, pi/2].
pub fn bs_angles(eta_pm: (f64, f64)) -> (f64, f64) {
    (
        eta_pm.0.clamp(0.0, 1.0).sqrt().acos(),
        eta_pm.1.clamp(0.0, 1.0).sqrt().acos(),
    )
}

/// Chain-rule derivatives `d theta_pm / d s = -+ eta gamma / (2 sqrt(eta_pm (1 - eta_pm)))`.
pub fn dtheta_ds(system: &ImagingSystem, fns: &OverlapFunctionals) -> Result<(f64, f64)> {
    let (ep, em) = transmissivities(system, fns);
    let branch = |eta_pm: f64, sign: f64| -> Result<f64> {
        if eta_pm <= 0.0 || eta_pm >= 1.0 {
            return Err(Error::DegenerateAngle(eta_pm));
        }
        Ok(-sign * system.eta * fns.gamma / (2.0 * (eta_pm * (1.0 - eta_pm)).sqrt()))
    };
    Ok((branch(ep, 1.0)?, branch(em, -1.0)?))
}

/// Angular frequencies `omega_pm = sqrt((d theta_pm/ds)^2 + eps_pm^2 / (4 (1 +- delta)))`.
pub fn effective_frequencies(
    system: &ImagingSystem,
    fns: &OverlapFunctionals,
) -> Result<(f64, f64)> {
    let (dp, dm) = dtheta_ds(system, fns)?;
    let wp = (dp * dp + fns.eps_plus_sq / (4.0 * (1.0 + fns.delta))).sqrt();
    let wm = (dm * dm + fns.eps_minus_sq / (4.0 * (1.0 - fns.delta))).sqrt();
    Ok((wp, wm))
}

/// Full beam-splitter parameter bundle at one separation.
pub fn bs_params(system: &ImagingSystem, s: f64) -> Result<BsParameters> {
    let fns = system.psf.functionals(s)?;
    let (eta_plus, eta_minus) = transmissivities(system, &fns);
    let (theta_plus, theta_minus) = bs_angles((eta_plus, eta_minus));
    let (dtheta_plus_ds, dtheta_minus_ds) = dtheta_ds(system, &fns)?;
    let (omega_plus, omega_minus) = effective_frequencies(system, &fns)?;
    let (f_plus, f_minus) = f_functions(system, s)?;
    Ok(BsParameters {
        s,
        eta_plus,
        eta_minus,
        theta_plus,
        theta_minus,
        dtheta_plus_ds,
        dtheta_minus_ds,
        omega_plus,
        omega_minus,
        f_plus,
        f_minus,
    })
}

/// `f_pm` evaluated from precomputed functionals.
///
/// At s = 0 the antisymmetric ratio `gamma^2 / (1 - delta)` is taken at
/// its limit `2 dk^2`, giving `f_- = 2 dk^2 x_R^2` (1/2 for a Gaussian)
/// and `f_+ = 0`.
pub fn f_functions_from(
    system: &ImagingSystem,
    fns: &OverlapFunctionals,
) -> Result<(f64, f64)> {
    let xr2 = system.x_r() * system.x_r();
    let eta = system.eta;
    if fns.s == 0.0 {
        let f_minus = xr2 * (fns.eps_minus_sq + 2.0 * fns.dk2);
        let f_plus = xr2 * fns.eps_plus_sq;
        return Ok((f_plus, f_minus));
    }
    let g2 = fns.gamma * fns.gamma;
    let f_plus =
        xr2 * (fns.eps_plus_sq + g2 / ((1.0 + fns.delta) * (1.0 - (1.0 + fns.delta) * eta)));
    let f_minus = xr2
        * (fns.eps_minus_sq
            + g2 / (fns.one_minus_delta * (1.0 - fns.one_minus_delta * eta)));
    Ok((f_plus, f_minus))
}

/// The `f_pm` functions at separation s.
pub fn f_functions(system: &ImagingSystem, s: f64) -> Result<(f64, f64)> {
    let fns = system.psf.functionals(s)?;
    f_functions_from(system, &fns)
}

/// Upper bound `(2 eta N / x_R^2) max{f_+, f_-}`, with N the per-source
/// mean photon number (total 2N).
pub fn qfi_upper_bound(system: &ImagingSystem, s: f64, n_mean: f64) -> Result<f64> {
    let (fp, fm) = f_functions(system, s)?;
    let xr2 = system.x_r() * system.x_r();
    Ok(2.0 * system.eta * n_mean / xr2 * fp.max(fm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::PsfModel;
    use approx::assert_abs_diff_eq;

    fn system(eta: f64) -> ImagingSystem {
        ImagingSystem::new(eta, PsfModel::gaussian(1.0).unwrap()).unwrap()
    }

    #[test]
    fn eta_validation() {
        let psf = PsfModel::gaussian(1.0).unwrap();
        assert!(matches!(
            ImagingSystem::new(0.7, psf.clone()),
            Err(Error::EtaOutOfRange(_))
        ));
        assert!(matches!(
            ImagingSystem::new(0.0, psf),
            Err(Error::EtaOutOfRange(_))
        ));
    }

    #[test]
    fn transmissivity_examples() {
        let sys = system(0.4);
        let fns = sys.psf.functionals(1.0).unwrap();
        let (ep, em) = transmissivities(&sys, &fns);
        assert_abs_diff_eq!(ep, 0.752999, epsilon = 1e-6);
        assert_abs_diff_eq!(em, 0.047001, epsilon = 1e-6);
    }

    #[test]
    fn balanced_splitter_angle() {
        let (tp, _) = bs_angles((0.5, 0.5));
        assert_abs_diff_eq!(tp, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn dtheta_identity() {
        // 4 (d theta_pm/ds)^2 = eta gamma^2 / ((1 +- delta)(1 - (1 +- delta) eta))
        let sys = system(0.4);
        for s in [0.3, 1.0, 2.0, 5.0] {
            let fns = sys.psf.functionals(s).unwrap();
            let (dp, dm) = dtheta_ds(&sys, &fns).unwrap();
            let g2 = fns.gamma * fns.gamma;
            let rhs_p = 0.4 * g2 / ((1.0 + fns.delta) * (1.0 - (1.0 + fns.delta) * 0.4));
            let rhs_m = 0.4 * g2 / ((1.0 - fns.delta) * (1.0 - (1.0 - fns.delta) * 0.4));
            assert_abs_diff_eq!(4.0 * dp * dp, rhs_p, epsilon = 1e-10);
            assert_abs_diff_eq!(4.0 * dm * dm, rhs_m, epsilon = 1e-10);
        }
        let fns = sys.psf.functionals(1.0).unwrap();
        let (dp, _) = dtheta_ds(&sys, &fns).unwrap();
        assert_abs_diff_eq!(4.0 * dp * dp, 0.041872, epsilon = 1e-5);
    }

    #[test]
    fn frequencies_limits() {
        let sys = system(0.4);
        let fns = sys.psf.functionals(10.0).unwrap();
        let (wp, wm) = effective_frequencies(&sys, &fns).unwrap();
        assert_abs_diff_eq!(wp, 0.25, epsilon = 1e-3);
        assert_abs_diff_eq!(wm, 0.25, epsilon = 1e-3);
        let fns = sys.psf.functionals(1e-4).unwrap();
        let (wp, _) = effective_frequencies(&sys, &fns).unwrap();
        assert!(wp < 1e-4);
    }

    #[test]
    fn f_function_limits() {
        for eta in [0.1, 0.4, 0.5] {
            let sys = system(eta);
            let (_, fm) = f_functions(&sys, 1e-4).unwrap();
            assert_abs_diff_eq!(fm, 0.5, epsilon = 1e-6);
            let (fp, fm) = f_functions(&sys, 10.0).unwrap();
            assert_abs_diff_eq!(fp, 0.25, epsilon = 1e-3);
            assert_abs_diff_eq!(fm, 0.25, epsilon = 1e-3);
        }
        let sys = system(0.4);
        let (_, fm) = f_functions(&sys, 1.0).unwrap();
        assert_abs_diff_eq!(fm, 0.4359, epsilon = 1e-4);
    }

    #[test]
    fn upper_bound_examples() {
        // 2 eta N * f_-(0) = (2 * 0.5 * 1) * (1/2)
        let sys = system(0.5);
        assert_abs_diff_eq!(qfi_upper_bound(&sys, 1e-4, 1.0).unwrap(), 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(qfi_upper_bound(&sys, 10.0, 1.0).unwrap(), 0.25, epsilon = 1e-3);
        assert_eq!(qfi_upper_bound(&sys, 1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn consistency_route_through_angles() {
        // f_pm == x_R^2 [eps_pm^2 + 4 (d theta_pm/ds)^2 / eta]
        let sys = system(0.4);
        for s in [0.2, 1.0, 3.0] {
            let fns = sys.psf.functionals(s).unwrap();
            let (dp, dm) = dtheta_ds(&sys, &fns).unwrap();
            let (fp, fm) = f_functions(&sys, s).unwrap();
            assert_abs_diff_eq!(fp, fns.eps_plus_sq + 4.0 * dp * dp / 0.4, epsilon = 1e-10);
            assert_abs_diff_eq!(fm, fns.eps_minus_sq + 4.0 * dm * dm / 0.4, epsilon = 1e-10);
        }
    }

    #[test]
    fn s_zero_admitted() {
        let sys = system(0.4);
        let p = bs_params(&sys, 0.0);
        // delta = 1 makes eta_minus = 0: the derivative branch is degenerate there.
        assert!(matches!(p, Err(Error::DegenerateAngle(_))));
        let (fp, fm) = f_functions(&sys, 0.0).unwrap();
        assert_eq!(fp, 0.0);
        assert_abs_diff_eq!(fm, 0.5, epsilon = 1e-15);
    }
}
