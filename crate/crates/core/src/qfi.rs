//! Exact quantum Fisher information per source family and the
//! Cramer-Rao bound.

use crate::beamsplitter::{f_functions, qfi_upper_bound, ImagingSystem};
use crate::error::{Error, Result};
use crate::psf::OverlapFunctionals;
use crate::sources::{self, SourceSpec};
use serde::Serialize;

/// Resolution of the ambiguous last terms in the two-mode squeezed
/// vacuum formula: taken literally the terms are linear in `dr/ds`;
/// the squared variant reads them as `(dr/ds)^2`. The Fock-space
/// oracle adjudicates which one is correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TmsvVariant {
    AsPrinted,
    SquaredDerivative,
}

/// One QFI evaluation with its normalization and the matching bound.
#[derive(Debug, Clone, Serialize)]
pub struct QfiReport {
    pub s: f64,
    pub source: SourceSpec,
    pub eta: f64,
    pub qfi: f64,
    /// `x_R^2 qfi / photons_collected`, photons_collected = eta * total emitted.
    pub qfi_normalized: f64,
    pub crb: f64,
    pub bound: f64,
}

/// `gamma^2 / (1 - delta)` with its removable limit `2 dk^2` at s = 0.
fn g2_over_one_minus(fns: &OverlapFunctionals) -> f64 {
    if fns.s == 0.0 {
        2.0 * fns.dk2
    } else {
        fns.gamma * fns.gamma / fns.one_minus_delta
    }
}

/// Generic number-diagonal QFI:
/// `<(d/ds log p)^2> + eta N+ eps+^2 + eta N- eps-^2`.
pub fn qfi_number_diagonal(source: &SourceSpec, system: &ImagingSystem, s: f64) -> Result<f64> {
    let (n_plus, n_minus) = match *source {
        SourceSpec::Thermal { n_mean } => (n_mean, n_mean),
        SourceSpec::FockPm { n_plus, n_minus } => (n_plus as f64, n_minus as f64),
        SourceSpec::Tmsv { .. } => return Err(Error::UnsupportedState("tmsv")),
        SourceSpec::CorrThermal { .. } => return Err(Error::UnsupportedState("corr-thermal")),
    };
    let fns = system.psf.functionals(s)?;
    let moment = sources::log_derivative_moment(source, system, s)?;
    let eta = system.eta();
    Ok(moment + eta * n_plus * fns.eps_plus_sq + eta * n_minus * fns.eps_minus_sq)
}

/// Thermal sources, closed form:
/// `2 eta N [dk^2 - eta N (1 + eta N) gamma^2 / ((1 + eta N)^2 - delta^2 eta^2 N^2)]`.
///
/// The denominator is evaluated in the factored form
/// `(1 + eta N (1 - delta))(1 + eta N (1 + delta))` to keep precision
/// when `delta -> 1`.
pub fn qfi_thermal(n_mean: f64, system: &ImagingSystem, s: f64) -> Result<f64> {
    if !(n_mean.is_finite() && n_mean >= 0.0) {
        return Err(Error::UnphysicalState(format!("thermal N = {n_mean}")));
    }
    let fns = system.psf.functionals(s)?;
    let en = system.eta() * n_mean;
    let g2 = fns.gamma * fns.gamma;
    let denom = (1.0 + en * fns.one_minus_delta) * (1.0 + en * (1.0 + fns.delta));
    Ok(2.0 * en * (fns.dk2 - en * (1.0 + en) * g2 / denom))
}

/// Two-term route to the thermal QFI: geometric-law moment plus the
/// coherence contribution
/// `2 eta N [dk^2 - gamma^2/(2(1+delta)) - gamma^2/(2(1-delta))]`.
/// Must agree with [`qfi_thermal`] to near machine precision.
pub fn qfi_thermal_two_term(n_mean: f64, system: &ImagingSystem, s: f64) -> Result<f64> {
    let fns = system.psf.functionals(s)?;
    let moment =
        sources::log_derivative_moment(&SourceSpec::Thermal { n_mean }, system, s)?;
    let en = system.eta() * n_mean;
    let g2 = fns.gamma * fns.gamma;
    let coherence = fns.dk2 - g2 / (2.0 * (1.0 + fns.delta)) - 0.5 * g2_over_one_minus(&fns);
    Ok(moment + 2.0 * en * coherence)
}

/// Fock sources |N+, N->: `QFI = (eta / x_R^2)(N+ f+ + N- f-)`.
///
/// Shares the `f_pm` evaluation with the upper bound, so the
/// saturation identity is exact.
pub fn qfi_fock(n_plus: u32, n_minus: u32, system: &ImagingSystem, s: f64) -> Result<f64> {
    let (fp, fm) = f_functions(system, s)?;
    let xr2 = system.x_r() * system.x_r();
    // written term by term as the bound writes it, so saturation is
    // bit-exact
    let term = |n: f64, f: f64| 2.0 * system.eta() * (0.5 * n) / xr2 * f;
    Ok(term(n_plus as f64, fp) + term(n_minus as f64, fm))
}

/// Two-mode squeezed vacuum QFI in the squeezed eigenbasis
/// re-parameterization, under the chosen reading of the last terms.
pub fn qfi_tmsv(
    xi: f64,
    system: &ImagingSystem,
    s: f64,
    variant: TmsvVariant,
) -> Result<f64> {
    let fns = system.psf.functionals(s)?;
    let p = sources::tmsv_image_params(xi, system, s)?;
    let moment = sources::log_derivative_moment(&SourceSpec::Tmsv { xi }, system, s)?;
    let g2 = fns.gamma * fns.gamma;
    let coherence = fns.dk2 - g2 / (2.0 * (1.0 + fns.delta)) - 0.5 * g2_over_one_minus(&fns);
    let eta = system.eta();
    let squeeze_term = |t: f64, dr: f64| -> f64 {
        let c = 2.0 * (2.0 * t + 1.0) * (2.0 * t + 1.0) / (2.0 * t * t + 2.0 * t + 1.0);
        match variant {
            TmsvVariant::AsPrinted => c * dr,
            TmsvVariant::SquaredDerivative => c * dr * dr,
        }
    };
    Ok(moment
        + eta * ((2.0 * xi).cosh() - 1.0) * coherence
        + squeeze_term(p.t_plus, p.dr_plus_ds)
        + squeeze_term(p.t_minus, p.dr_minus_ds))
}

/// Correlated thermal sources, `N_pm = (1 +- w) N`:
/// `QFI = sum_pm eta N_pm [dk^2 -+ beta - eta N_pm gamma^2 / (1 + (1 +- delta) eta N_pm)]`.
pub fn qfi_corr_thermal(n_mean: f64, w: f64, system: &ImagingSystem, s: f64) -> Result<f64> {
    SourceSpec::CorrThermal { n_mean, w }.validate()?;
    let fns = system.psf.functionals(s)?;
    let eta = system.eta();
    let g2 = fns.gamma * fns.gamma;
    let en_plus = eta * (1.0 + w) * n_mean;
    let en_minus = eta * (1.0 - w) * n_mean;
    Ok(en_plus
        * (fns.dk2 - fns.beta - en_plus * g2 / (1.0 + (1.0 + fns.delta) * en_plus))
        + en_minus
            * (fns.dk2 + fns.beta - en_minus * g2 / (1.0 + fns.one_minus_delta * en_minus)))
}

/// Cramer-Rao bound `1/sqrt(qfi)`.
pub fn cramer_rao(qfi: f64) -> Result<f64> {
    if !(qfi.is_finite() && qfi >= 0.0) {
        return Err(Error::NonFinite("qfi"));
    }
    if qfi == 0.0 {
        return Err(Error::ZeroInformation);
    }
    Ok(1.0 / qfi.sqrt())
}

/// QFI of a source family through its dedicated path.
pub fn qfi_for(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    variant: TmsvVariant,
) -> Result<f64> {
    match *source {
        SourceSpec::Thermal { n_mean } => qfi_thermal(n_mean, system, s),
        SourceSpec::FockPm { n_plus, n_minus } => qfi_fock(n_plus, n_minus, system, s),
        SourceSpec::Tmsv { xi } => qfi_tmsv(xi, system, s, variant),
        SourceSpec::CorrThermal { n_mean, w } => qfi_corr_thermal(n_mean, w, system, s),
    }
}

/// Full report for one evaluation; `crb` is infinite when qfi = 0.
pub fn report(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    variant: TmsvVariant,
) -> Result<QfiReport> {
    let qfi = qfi_for(source, system, s, variant)?;
    let xr2 = system.x_r() * system.x_r();
    let collected = system.eta() * source.total_photons();
    let qfi_normalized = if collected > 0.0 { xr2 * qfi / collected } else { 0.0 };
    let crb = match cramer_rao(qfi) {
        Ok(v) => v,
        Err(Error::ZeroInformation) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    let bound = qfi_upper_bound(system, s, 0.5 * source.total_photons())?;
    Ok(QfiReport {
        s,
        source: *source,
        eta: system.eta(),
        qfi,
        qfi_normalized,
        crb,
        bound,
    })
}

impl QfiReport {
    pub const CSV_HEADER: &'static str = "s,eta,family,params,qfi,qfi_normalized,crb,bound";

    fn params_label(&self) -> String {
        match self.source {
            SourceSpec::Thermal { n_mean } => format!("N={n_mean}"),
            SourceSpec::FockPm { n_plus, n_minus } => format!("N+={n_plus};N-={n_minus}"),
            SourceSpec::Tmsv { xi } => format!("xi={xi}"),
            SourceSpec::CorrThermal { n_mean, w } => format!("N={n_mean};w={w}"),
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{:.9e},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e}",
            self.s,
            self.eta,
            self.source.family_name(),
            self.params_label(),
            self.qfi,
            self.qfi_normalized,
            self.crb,
            self.bound
        )
    }
}
