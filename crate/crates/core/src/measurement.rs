//! Parity (even/odd mode) photon counting: its classical Fisher
//! information and a Monte Carlo maximum-likelihood benchmark of
//! Cramer-Rao attainment.

use crate::beamsplitter::{transmissivities, ImagingSystem};
use crate::error::{Error, Result};
use crate::sources::{fock_moment, SourceSpec};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// One shot of even/odd photon counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountSample {
    pub n_even: u32,
    pub n_odd: u32,
}

/// Search grid for the maximum-likelihood estimator.
#[derive(Debug, Clone, Copy)]
pub struct SearchGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub geometric: bool,
}

impl SearchGrid {
    /// 400 geometric points on [0.05, 6] x_R.
    pub fn default_for(x_r: f64) -> Self {
        Self {
            s_min: 0.05 * x_r,
            s_max: 6.0 * x_r,
            points: 400,
            geometric: true,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if self.geometric {
                    self.s_min * (self.s_max / self.s_min).powf(t)
                } else {
                    self.s_min + (self.s_max - self.s_min) * t
                }
            })
            .collect()
    }
}

/// Result of one Monte Carlo Cramer-Rao benchmark.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorRun {
    pub true_s: f64,
    pub shots: u64,
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub empirical_variance: f64,
    /// 1 / (shots * F_s)
    pub crb_classical: f64,
}

fn fock_params(source: &SourceSpec) -> Result<(u32, u32)> {
    match *source {
        SourceSpec::FockPm { n_plus, n_minus } => Ok((n_plus, n_minus)),
        _ => Err(Error::UnsupportedState(source.family_name())),
    }
}

/// Classical Fisher information of parity counting on Fock sources:
/// `F_s = eta N+ gamma^2/((1+delta)(1-(1+delta)eta)) + eta N- gamma^2/((1-delta)(1-(1-delta)eta))`.
pub fn parity_fisher_information(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
) -> Result<f64> {
    let (n_plus, n_minus) = fock_params(source)?;
    let fns = system.psf.functionals(s)?;
    Ok(fock_moment(&fns, system.eta(), n_plus as f64, n_minus as f64))
}

fn binomial_cdf_sample(n: u32, p: f64, u: f64) -> u32 {
    let mut prob = (1.0 - p).powi(n as i32);
    let mut acc = prob;
    let mut k = 0u32;
    while u > acc && k < n {
        prob *= (n - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
        k += 1;
        acc += prob;
    }
    k
}

/// RNG for one (seed, stream) pair; streams keep parallel repeats
/// reproducible.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn sample_counts_stream(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<Vec<CountSample>> {
    let (n_plus, n_minus) = fock_params(source)?;
    let fns = system.psf.functionals(s)?;
    let (eta_plus, eta_minus) = transmissivities(system, &fns);
    let mut rng = stream_rng(seed, stream);
    let unit = Uniform::new(0.0, 1.0);
    Ok((0..shots)
        .map(|_| CountSample {
            n_even: binomial_cdf_sample(n_plus, eta_plus, unit.sample(&mut rng)),
            n_odd: binomial_cdf_sample(n_minus, eta_minus, unit.sample(&mut rng)),
        })
        .collect())
}

/// Deterministic parity-counting samples for a Fock source.
pub fn sample_counts(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    shots: u64,
    seed: u64,
) -> Result<Vec<CountSample>> {
    sample_counts_stream(source, system, s, shots, seed, 0)
}

/// `shot,n_even,n_odd` CSV rows.
pub fn samples_to_csv(samples: &[CountSample]) -> String {
    let mut out = String::from("shot,n_even,n_odd\n");
    for (i, c) in samples.iter().enumerate() {
        out.push_str(&format!("{i},{},{}\n", c.n_even, c.n_odd));
    }
    out
}

fn log_likelihood(
    counts: &[(CountSample, f64)],
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
) -> Result<f64> {
    let (n_plus, n_minus) = fock_params(source)?;
    let fns = system.psf.functionals(s)?;
    let (eta_plus, eta_minus) = transmissivities(system, &fns);
    let log_binom = |n: u32, k: u32, p: f64| -> f64 {
        let mut lc = 0.0;
        for i in 0..k {
            lc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
        let lp = if k == 0 { 0.0 } else { k as f64 * p.max(1e-300).ln() };
        let lq = if n == k {
            0.0
        } else {
            (n - k) as f64 * (1.0 - p).max(1e-300).ln()
        };
        lc + lp + lq
    };
    Ok(counts
        .iter()
        .map(|&(c, mult)| {
            mult * (log_binom(n_plus, c.n_even, eta_plus)
                + log_binom(n_minus, c.n_odd, eta_minus))
        })
        .sum())
}

fn collapse(samples: &[CountSample]) -> Vec<(CountSample, f64)> {
    let mut counts: Vec<(CountSample, f64)> = Vec::new();
    for &c in samples {
        match counts.iter_mut().find(|(k, _)| *k == c) {
            Some((_, m)) => *m += 1.0,
            None => counts.push((c, 1.0)),
        }
    }
    counts
}

/// Grid maximum-likelihood estimate with one parabolic refinement step.
/// Ties break toward smaller s.
pub fn ml_estimate(
    samples: &[CountSample],
    source: &SourceSpec,
    system: &ImagingSystem,
    grid: &SearchGrid,
) -> Result<f64> {
    let counts = collapse(samples);
    let xs = grid.values();
    let lls: Vec<f64> = xs
        .iter()
        .map(|&s| log_likelihood(&counts, source, system, s))
        .collect::<Result<_>>()?;
    let lo = lls.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        return Err(Error::FlatLikelihood);
    }
    let mut best = 0;
    for (i, &v) in lls.iter().enumerate() {
        if v > lls[best] {
            best = i;
        }
    }
    if best == 0 || best == xs.len() - 1 {
        return Ok(xs[best]);
    }
    // parabola through three unevenly spaced points
    let (x0, x1, x2) = (xs[best - 1], xs[best], xs[best + 1]);
    let (y0, y1, y2) = (lls[best - 1], lls[best], lls[best + 1]);
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    if curv >= 0.0 {
        return Ok(x1);
    }
    let vertex = 0.5 * (x0 + x1 - d01 / curv);
    Ok(vertex.clamp(x0, x2))
}

/// Monte Carlo benchmark of the classical Cramer-Rao bound; repeats
/// run in parallel on per-repeat RNG streams.
pub fn crb_benchmark(
    source: &SourceSpec,
    system: &ImagingSystem,
    true_s: f64,
    shots: u64,
    repeats: u64,
    seed: u64,
) -> Result<EstimatorRun> {
    if repeats < 2 {
        return Err(Error::DegenerateDistribution("need at least 2 repeats"));
    }
    let grid = SearchGrid::default_for(system.x_r());
    let estimates: Vec<f64> = (0..repeats)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let samples = sample_counts_stream(source, system, true_s, shots, seed, rep + 1)?;
            ml_estimate(&samples, source, system, &grid)
        })
        .collect::<Result<_>>()?;
    let mean = estimates.iter().sum::<f64>() / repeats as f64;
    let empirical_variance = estimates
        .iter()
        .map(|e| (e - mean) * (e - mean))
        .sum::<f64>()
        / (repeats as f64 - 1.0);
    let fisher = parity_fisher_information(source, system, true_s)?;
    if fisher <= 0.0 {
        return Err(Error::ZeroInformation);
    }
    Ok(EstimatorRun {
        true_s,
        shots,
        seed,
        estimates,
        empirical_variance,
        crb_classical: 1.0 / (shots as f64 * fisher),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::PsfModel;
    use crate::qfi::qfi_fock;
    use crate::sources::log_derivative_moment;
    use approx::assert_abs_diff_eq;

    fn system(eta: f64) -> ImagingSystem {
        ImagingSystem::new(eta, PsfModel::gaussian(1.0).unwrap()).unwrap()
    }

    fn fock02() -> SourceSpec {
        SourceSpec::FockPm { n_plus: 0, n_minus: 2 }
    }

    #[test]
    fn fisher_closed_form_values() {
        let sys = system(0.4);
        let f = parity_fisher_information(&fock02(), &sys, 1.0).unwrap();
        assert_abs_diff_eq!(f, 0.347742, epsilon = 5e-6);
        // s -> 0: F -> eta N- gamma^2/(1-delta) -> 2 eta N- dk^2 = 0.4
        let f0 = parity_fisher_information(&fock02(), &sys, 1e-5).unwrap();
        assert_abs_diff_eq!(f0, 0.4, epsilon = 1e-6);
        let far = parity_fisher_information(&fock02(), &sys, 40.0).unwrap();
        assert!(far < 1e-12);
    }

    #[test]
    fn fisher_equals_log_derivative_moment() {
        let sys = system(0.4);
        for s in [0.1, 0.5, 1.0, 3.0] {
            let f = parity_fisher_information(&fock02(), &sys, s).unwrap();
            let m = log_derivative_moment(&fock02(), &sys, s).unwrap();
            assert_eq!(f, m);
        }
    }

    #[test]
    fn fisher_near_optimal_at_small_s() {
        let sys = system(0.4);
        let s = 0.05;
        let f = parity_fisher_information(&fock02(), &sys, s).unwrap();
        let q = qfi_fock(0, 2, &sys, s).unwrap();
        assert!(f <= q);
        assert!(f / q > 0.98, "ratio {}", f / q);
    }

    #[test]
    fn sampling_is_deterministic_and_converges() {
        let sys = system(0.4);
        // far separation: delta = 0, eta_pm = 0.4, p2 = 0.16
        let a = sample_counts(&fock02(), &sys, 50.0, 100_000, 7).unwrap();
        let b = sample_counts(&fock02(), &sys, 50.0, 100_000, 7).unwrap();
        assert_eq!(a, b);
        let p2 = a.iter().filter(|c| c.n_odd == 2).count() as f64 / 1e5;
        assert_abs_diff_eq!(p2, 0.16, epsilon = 0.004);
        assert!(a.iter().all(|c| c.n_even == 0 && c.n_odd <= 2));
        assert_eq!(sample_counts(&fock02(), &sys, 1.0, 1, 0).unwrap().len(), 1);
    }

    #[test]
    fn ml_recovers_true_separation() {
        let sys = system(0.4);
        let s_true = 0.5;
        let shots = 10_000;
        let samples = sample_counts(&fock02(), &sys, s_true, shots, 11).unwrap();
        let grid = SearchGrid::default_for(1.0);
        let est = ml_estimate(&samples, &fock02(), &sys, &grid).unwrap();
        let f = parity_fisher_information(&fock02(), &sys, s_true).unwrap();
        let sigma = (1.0 / (shots as f64 * f)).sqrt();
        assert!(
            (est - s_true).abs() < 3.0 * sigma,
            "est {est}, sigma {sigma}"
        );
    }

    #[test]
    fn flat_likelihood_detected() {
        let sys = system(0.4);
        // all-vacuum data on a grid where the law barely moves
        let samples = vec![CountSample { n_even: 0, n_odd: 0 }; 4];
        let grid = SearchGrid {
            s_min: 30.0,
            s_max: 31.0,
            points: 16,
            geometric: false,
        };
        let r = ml_estimate(&samples, &fock02(), &sys, &grid);
        assert!(matches!(r, Err(Error::FlatLikelihood)));
    }

    #[test]
    fn benchmark_attains_crb() {
        let sys = system(0.4);
        let run = crb_benchmark(&fock02(), &sys, 0.5, 10_000, 200, 42).unwrap();
        let ratio = run.empirical_variance / run.crb_classical;
        assert!(ratio > 0.85 && ratio < 1.15, "ratio {ratio}");
        let again = crb_benchmark(&fock02(), &sys, 0.5, 10_000, 200, 42).unwrap();
        assert_eq!(run.estimates, again.estimates);
    }

    #[test]
    fn non_fock_rejected() {
        let sys = system(0.4);
        assert!(matches!(
            parity_fisher_information(&SourceSpec::Thermal { n_mean: 1.0 }, &sys, 1.0),
            Err(Error::UnsupportedState(_))
        ));
    }
}
