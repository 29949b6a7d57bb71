//! Source-state families and their image-plane photon-number statistics.
//!
//! Each family is a product state in the symmetric/antisymmetric source
//! modes, so the image distribution factorizes as `p_nm = p_n^+ p_m^-`:
//! geometric laws for thermal light (means `eta (1 +- delta) N`),
//! binomials for Fock sources, and geometric laws in the squeezed
//! eigenbasis for two-mode squeezed vacuum.

use crate::beamsplitter::{transmissivities, ImagingSystem};
use crate::error::{Error, Result};
use crate::psf::OverlapFunctionals;
use serde::{Deserialize, Serialize};

/// Source-state family emitted by the two point sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SourceSpec {
    /// Two thermal sources with `N` mean photons each.
    Thermal { n_mean: f64 },
    /// Fock state |N+, N-> in the symmetric/antisymmetric source modes.
    FockPm { n_plus: u32, n_minus: u32 },
    /// Two-mode squeezed vacuum with squeezing parameter `xi`.
    Tmsv { xi: f64 },
    /// Correlated (discordant) thermal state: `N_pm = (1 +- w) N`.
    CorrThermal { n_mean: f64, w: f64 },
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::Thermal { n_mean } => {
                if !(n_mean.is_finite() && n_mean >= 0.0) {
                    return Err(Error::UnphysicalState(format!("thermal N = {n_mean}")));
                }
            }
            SourceSpec::FockPm { .. } => {}
            SourceSpec::Tmsv { xi } => {
                if !(xi.is_finite() && xi >= 0.0) {
                    return Err(Error::UnphysicalState(format!("squeezing xi = {xi}")));
                }
            }
            SourceSpec::CorrThermal { n_mean, w } => {
                if !(n_mean.is_finite() && n_mean >= 0.0) {
                    return Err(Error::UnphysicalState(format!("thermal N = {n_mean}")));
                }
                if !(w.is_finite() && w.abs() <= 1.0) {
                    return Err(Error::UnphysicalState(format!("correlation w = {w}")));
                }
            }
        }
        Ok(())
    }

    /// Mean photons emitted by the symmetric/antisymmetric source modes.
    pub fn mode_photons(&self) -> (f64, f64) {
        match *self {
            SourceSpec::Thermal { n_mean } => (n_mean, n_mean),
            SourceSpec::FockPm { n_plus, n_minus } => (n_plus as f64, n_minus as f64),
            SourceSpec::Tmsv { xi } => {
                let n = xi.sinh().powi(2);
                (n, n)
            }
            SourceSpec::CorrThermal { n_mean, w } => ((1.0 + w) * n_mean, (1.0 - w) * n_mean),
        }
    }

    /// Total mean photons emitted by both sources.
    pub fn total_photons(&self) -> f64 {
        let (a, b) = self.mode_photons();
        a + b
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            SourceSpec::Thermal { .. } => "thermal",
            SourceSpec::FockPm { .. } => "fock",
            SourceSpec::Tmsv { .. } => "tmsv",
            SourceSpec::CorrThermal { .. } => "corr-thermal",
        }
    }
}

/// Basis the photon-number statistics refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistributionBasis {
    /// Bare Fock basis of the image modes a_pm.
    ModeNumber,
    /// Squeezed eigenbasis {|e_n>_pm} (TMSV only).
    SqueezedEigen,
}

/// Joint photon-number statistics p_nm at the image plane.
#[derive(Debug, Clone)]
pub struct ImageDistribution {
    pub s: f64,
    pub basis: DistributionBasis,
    /// p[n][m], n symmetric-mode photons, m antisymmetric-mode photons.
    pub p: Vec<Vec<f64>>,
    pub tail_mass: f64,
}

/// Cutoff search policy for the marginal laws.
#[derive(Debug, Clone, Copy)]
pub struct CutoffPolicy {
    pub tail_budget: f64,
    pub max_cutoff: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            tail_budget: 1e-10,
            max_cutoff: 4096,
        }
    }
}

/// Effective thermal occupations and residual squeezing of the TMSV
/// image modes, with analytic s-derivatives.
#[derive(Debug, Clone, Copy)]
pub struct TmsvImageParams {
    pub t_plus: f64,
    pub t_minus: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub dt_plus_ds: f64,
    pub dt_minus_ds: f64,
    pub dr_plus_ds: f64,
    pub dr_minus_ds: f64,
}

/// Geometric law with the given mean, truncated by the cutoff policy.
fn geometric_marginal(mean: f64, policy: &CutoffPolicy) -> Result<(Vec<f64>, f64)> {
    if mean <= 0.0 {
        return Ok((vec![1.0], 0.0));
    }
    let ratio = mean / (mean + 1.0);
    let mut cutoff = (10.0 * (mean + 1.0)).ceil() as usize;
    loop {
        // tail mass of the geometric law beyond n = cutoff; half budget
        // per marginal so the joint law stays within the full budget
        let tail = ratio.powi(cutoff as i32 + 1);
        if tail < 0.5 * policy.tail_budget {
            let mut p = Vec::with_capacity(cutoff + 1);
            let mut q = 1.0 / (mean + 1.0);
            for _ in 0..=cutoff {
                p.push(q);
                q *= ratio;
            }
            return Ok((p, tail));
        }
        if cutoff >= policy.max_cutoff {
            return Err(Error::CutoffOverflow {
                requested: cutoff * 2,
                limit: policy.max_cutoff,
            });
        }
        cutoff = (cutoff * 2).min(policy.max_cutoff);
    }
}

fn binomial_marginal(n: u32, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut coeff = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            coeff *= (n - k + 1) as f64 / k as f64;
        }
        out.push(coeff * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    out
}

fn product_distribution(
    s: f64,
    basis: DistributionBasis,
    plus: (Vec<f64>, f64),
    minus: (Vec<f64>, f64),
) -> ImageDistribution {
    let (pp, tp) = plus;
    let (pm, tm) = minus;
    let p: Vec<Vec<f64>> = pp.iter().map(|a| pm.iter().map(|b| a * b).collect()).collect();
    ImageDistribution {
        s,
        basis,
        p,
        tail_mass: tp + tm - tp * tm,
    }
}

/// Joint image-plane photon statistics in the family's natural basis.
///
/// For TMSV the returned law refers to the squeezed eigenbasis, flagged
/// by [`DistributionBasis::SqueezedEigen`].
pub fn image_distribution(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    policy: &CutoffPolicy,
) -> Result<ImageDistribution> {
    source.validate()?;
    let fns = system.psf.functionals(s)?;
    let (eta_plus, eta_minus) = transmissivities(system, &fns);
    match *source {
        SourceSpec::Thermal { n_mean } => Ok(product_distribution(
            s,
            DistributionBasis::ModeNumber,
            geometric_marginal(eta_plus * n_mean, policy)?,
            geometric_marginal(eta_minus * n_mean, policy)?,
        )),
        SourceSpec::CorrThermal { n_mean, w } => Ok(product_distribution(
            s,
            DistributionBasis::ModeNumber,
            geometric_marginal(eta_plus * (1.0 + w) * n_mean, policy)?,
            geometric_marginal(eta_minus * (1.0 - w) * n_mean, policy)?,
        )),
        SourceSpec::FockPm { n_plus, n_minus } => Ok(product_distribution(
            s,
            DistributionBasis::ModeNumber,
            (binomial_marginal(n_plus, eta_plus), 0.0),
            (binomial_marginal(n_minus, eta_minus), 0.0),
        )),
        SourceSpec::Tmsv { xi } => {
            let params = tmsv_image_params(xi, system, s)?;
            Ok(product_distribution(
                s,
                DistributionBasis::SqueezedEigen,
                geometric_marginal(params.t_plus, policy)?,
                geometric_marginal(params.t_minus, policy)?,
            ))
        }
    }
}

/// As [`image_distribution`] but guaranteed to be in the bare image-mode
/// number basis; errors for TMSV, whose statistics are only available in
/// the squeezed eigenbasis (or through the Fock-space oracle).
pub fn number_basis_distribution(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    policy: &CutoffPolicy,
) -> Result<ImageDistribution> {
    if matches!(source, SourceSpec::Tmsv { .. }) {
        return Err(Error::UnsupportedBasis {
            native: "squeezed eigenbasis",
        });
    }
    image_distribution(source, system, s, policy)
}

impl ImageDistribution {
    pub fn total_mass(&self) -> f64 {
        self.p.iter().flatten().sum::<f64>() + self.tail_mass
    }

    /// `n,m,p` CSV rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,p\n");
        for (n, row) in self.p.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                out.push_str(&format!("{n},{m},{v:.12e}\n"));
            }
        }
        out
    }
}

/// Fisher information of a geometric law with s-dependent mean:
/// `(dM/ds)^2 / (M (M + 1))`, with the removable singularity at M = 0
/// taken as its limit 0 when the derivative also vanishes.
fn geometric_fisher(mean: f64, dmean: f64) -> Result<f64> {
    if mean <= 0.0 {
        if dmean.abs() > 0.0 {
            return Err(Error::DegenerateDistribution(
                "zero mean with non-zero derivative",
            ));
        }
        return Ok(0.0);
    }
    Ok(dmean * dmean / (mean * (mean + 1.0)))
}

/// The classical log-derivative moment `sum p_nm (d/ds log p_nm)^2`
/// through the closed forms of each family.
pub fn log_derivative_moment(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
) -> Result<f64> {
    source.validate()?;
    let fns = system.psf.functionals(s)?;
    let eta = system.eta();
    if fns.s == 0.0 {
        // the minus branches keep a finite limit through
        // gamma^2 / (1 - delta) -> 2 dk^2
        return Ok(match *source {
            SourceSpec::Thermal { n_mean } => 2.0 * eta * n_mean * fns.dk2,
            SourceSpec::FockPm { n_plus, n_minus } => {
                fock_moment(&fns, eta, n_plus as f64, n_minus as f64)
            }
            SourceSpec::Tmsv { xi } => eta * ((2.0 * xi).cosh() - 1.0) * fns.dk2,
            SourceSpec::CorrThermal { .. } => {
                return Err(Error::UnsupportedState("corr-thermal"))
            }
        });
    }
    match *source {
        SourceSpec::Thermal { n_mean } => {
            let (mp, mm) = (
                eta * (1.0 + fns.delta) * n_mean,
                eta * fns.one_minus_delta * n_mean,
            );
            let d = eta * fns.gamma * n_mean;
            Ok(geometric_fisher(mp, d)? + geometric_fisher(mm, -d)?)
        }
        SourceSpec::FockPm { n_plus, n_minus } => {
            Ok(fock_moment(&fns, eta, n_plus as f64, n_minus as f64))
        }
        SourceSpec::Tmsv { xi } => {
            let p = tmsv_image_params(xi, system, s)?;
            Ok(geometric_fisher(p.t_plus, p.dt_plus_ds)?
                + geometric_fisher(p.t_minus, p.dt_minus_ds)?)
        }
        SourceSpec::CorrThermal { .. } => Err(Error::UnsupportedState("corr-thermal")),
    }
}

/// Binomial-law moment `sum_pm eta N_pm gamma^2 / ((1 +- delta)(1 - (1 +- delta) eta))`.
pub(crate) fn fock_moment(fns: &OverlapFunctionals, eta: f64, n_plus: f64, n_minus: f64) -> f64 {
    if fns.s == 0.0 {
        // gamma^2/(1-delta) -> 2 dk^2; the symmetric term vanishes
        return n_minus * eta * 2.0 * fns.dk2;
    }
    let g2 = fns.gamma * fns.gamma;
    n_plus * eta * g2 / ((1.0 + fns.delta) * (1.0 - (1.0 + fns.delta) * eta))
        + n_minus * eta * g2 / (fns.one_minus_delta * (1.0 - fns.one_minus_delta * eta))
}

/// Definition-based evaluation of the log-derivative moment by central
/// finite differences of the image distribution. Validation path for the
/// closed forms above.
pub fn log_derivative_moment_numeric(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    policy: &CutoffPolicy,
) -> Result<f64> {
    let h = 1e-5 * system.x_r();
    let lo = image_distribution(source, system, s - h, policy)?;
    let mid = image_distribution(source, system, s, policy)?;
    let hi = image_distribution(source, system, s + h, policy)?;
    let mut acc = 0.0;
    for (n, row) in mid.p.iter().enumerate() {
        for (m, &p) in row.iter().enumerate() {
            if p < 1e-300 {
                continue;
            }
            let a = lo.p.get(n).and_then(|r| r.get(m)).copied().unwrap_or(0.0);
            let b = hi.p.get(n).and_then(|r| r.get(m)).copied().unwrap_or(0.0);
            if a <= 0.0 || b <= 0.0 {
                continue;
            }
            let dlog = (b.ln() - a.ln()) / (2.0 * h);
            acc += p * dlog * dlog;
        }
    }
    Ok(acc)
}

/// Squeezed-thermal re-parameterization of the TMSV image modes and its
/// chain-rule derivatives through `eta_pm(s) = (1 +- delta(s)) eta`.
pub fn tmsv_image_params(xi: f64, system: &ImagingSystem, s: f64) -> Result<TmsvImageParams> {
    if !(xi.is_finite() && xi >= 0.0) {
        return Err(Error::UnphysicalState(format!("squeezing xi = {xi}")));
    }
    let fns = system.psf.functionals(s)?;
    let eta = system.eta();
    let cosh2 = (2.0 * xi).cosh();
    let sinh2 = (2.0 * xi).sinh();
    let branch = |eta_pm: f64, deta_ds: f64| -> (f64, f64, f64, f64) {
        if xi == 0.0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let g = eta_pm * eta_pm + (1.0 - eta_pm) * (1.0 - eta_pm)
            + 2.0 * eta_pm * (1.0 - eta_pm) * cosh2;
        let sq = g.sqrt();
        let t = 0.5 * (sq - 1.0);
        // dg/d eta = 2 (2 eta - 1)(1 - cosh 2xi)
        let dt_deta = (2.0 * eta_pm - 1.0) * (1.0 - cosh2) / (2.0 * sq);
        let dt_ds = dt_deta * deta_ds;
        let q = eta_pm * sinh2 / (2.0 * t + 1.0);
        let r = 0.5 * q.asinh();
        let dq_ds = sinh2 * (deta_ds * (2.0 * t + 1.0) - eta_pm * 2.0 * dt_ds)
            / ((2.0 * t + 1.0) * (2.0 * t + 1.0));
        let dr_ds = 0.5 * dq_ds / (1.0 + q * q).sqrt();
        (t, r, dt_ds, dr_ds)
    };
    let (eta_plus, eta_minus) = transmissivities(system, &fns);
    let deta = eta * fns.gamma;
    let (t_plus, r_plus, dt_plus_ds, dr_plus_ds) = branch(eta_plus, deta);
    let (t_minus, r_minus, dt_minus_ds, dr_minus_ds) = branch(eta_minus, -deta);
    Ok(TmsvImageParams {
        t_plus,
        t_minus,
        r_plus,
        r_minus,
        dt_plus_ds,
        dt_minus_ds,
        dr_plus_ds,
        dr_minus_ds,
    })
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
    fn thermal_distribution_decoupled_limit() {
        // s -> infinity: delta = 0, two geometric laws with mean eta N
        let sys = system(0.4);
        let d = image_distribution(
            &SourceSpec::Thermal { n_mean: 1.0 },
            &sys,
            50.0,
            &CutoffPolicy::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(d.p[0][0], (1.0 / 1.4f64).powi(2), epsilon = 1e-9);
        assert_abs_diff_eq!(d.total_mass(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn vacuum_distribution() {
        let sys = system(0.4);
        let d = image_distribution(
            &SourceSpec::Thermal { n_mean: 0.0 },
            &sys,
            1.0,
            &CutoffPolicy::default(),
        )
        .unwrap();
        assert_eq!(d.p.len(), 1);
        assert_eq!(d.p[0][0], 1.0);
    }

    #[test]
    fn fock_binomial_example() {
        // binomial with eta_minus = 0.4 (illustrative delta = 0)
        let p = binomial_marginal(2, 0.4);
        assert_abs_diff_eq!(p[2], 0.16, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 0.48, epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.36, epsilon = 1e-15);
    }

    #[test]
    fn tmsv_basis_guard() {
        let sys = system(0.4);
        let err = number_basis_distribution(
            &SourceSpec::Tmsv { xi: 0.5 },
            &sys,
            1.0,
            &CutoffPolicy::default(),
        );
        assert!(matches!(err, Err(Error::UnsupportedBasis { .. })));
    }

    #[test]
    fn fock_moment_reference_value() {
        let sys = system(0.4);
        let m = log_derivative_moment(&SourceSpec::FockPm { n_plus: 0, n_minus: 2 }, &sys, 1.0)
            .unwrap();
        assert_abs_diff_eq!(m, 0.347742, epsilon = 5e-6);
    }

    #[test]
    fn thermal_moment_vanishes_far() {
        let sys = system(0.3);
        let m = log_derivative_moment(&SourceSpec::Thermal { n_mean: 1.0 }, &sys, 40.0).unwrap();
        assert!(m < 1e-12);
    }

    #[test]
    fn closed_forms_match_numeric_fallback() {
        let sys = system(0.4);
        let policy = CutoffPolicy::default();
        for source in [
            SourceSpec::Thermal { n_mean: 0.7 },
            SourceSpec::FockPm { n_plus: 1, n_minus: 2 },
            SourceSpec::Tmsv { xi: 0.4 },
        ] {
            for s in [0.5, 1.0, 2.0] {
                let closed = log_derivative_moment(&source, &sys, s).unwrap();
                let numeric = log_derivative_moment_numeric(&source, &sys, s, &policy).unwrap();
                let scale = closed.abs().max(1e-12);
                assert!(
                    ((closed - numeric) / scale).abs() < 1e-6,
                    "{source:?} s={s}: closed={closed} numeric={numeric}"
                );
            }
        }
    }

    #[test]
    fn tmsv_params_examples() {
        let sys = system(0.4);
        let p = tmsv_image_params(0.0, &sys, 1.0).unwrap();
        assert_eq!(p.t_plus, 0.0);
        assert_eq!(p.r_plus, 0.0);
        // xi = 1, delta = 0 (large s): T = (sqrt(0.16 + 0.36 + 0.48 cosh 2) - 1)/2
        let p = tmsv_image_params(1.0, &sys, 60.0).unwrap();
        assert_abs_diff_eq!(p.t_plus, 0.26254, epsilon = 2e-5);
        assert_abs_diff_eq!(p.t_minus, 0.26254, epsilon = 2e-5);
    }

    #[test]
    fn tmsv_derivatives_match_finite_differences() {
        let sys = system(0.4);
        let h = 1e-6;
        for s in [0.5, 1.0, 2.5] {
            let p = tmsv_image_params(0.8, &sys, s).unwrap();
            let lo = tmsv_image_params(0.8, &sys, s - h).unwrap();
            let hi = tmsv_image_params(0.8, &sys, s + h).unwrap();
            let fd_t = (hi.t_plus - lo.t_plus) / (2.0 * h);
            let fd_r = (hi.r_minus - lo.r_minus) / (2.0 * h);
            assert!(((p.dt_plus_ds - fd_t) / fd_t.abs().max(1e-9)).abs() < 1e-6);
            assert!(((p.dr_minus_ds - fd_r) / fd_r.abs().max(1e-9)).abs() < 1e-6);
        }
    }

    #[test]
    fn tmsv_energy_bookkeeping() {
        // sum_pm [T + (2T+1) sinh^2 r] = eta (cosh 2xi - 1)
        let sys = system(0.4);
        for (xi, s) in [(0.3, 0.7), (1.0, 1.5), (1.5, 3.0)] {
            let p = tmsv_image_params(xi, &sys, s).unwrap();
            let total = p.t_plus
                + (2.0 * p.t_plus + 1.0) * p.r_plus.sinh().powi(2)
                + p.t_minus
                + (2.0 * p.t_minus + 1.0) * p.r_minus.sinh().powi(2);
            let expected = 0.4 * ((2.0 * xi).cosh() - 1.0);
            assert_abs_diff_eq!(total, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn corr_thermal_validation() {
        assert!(SourceSpec::CorrThermal { n_mean: 1.0, w: -1.5 }
            .validate()
            .is_err());
        assert!(SourceSpec::CorrThermal { n_mean: 1.0, w: -1.0 }
            .validate()
            .is_ok());
    }
}
