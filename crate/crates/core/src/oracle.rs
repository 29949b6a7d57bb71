//! Brute-force QFI oracle in a truncated multimode Fock space.
//!
//! The two shifted PSFs are expanded over a fixed Hermite-Gauss basis,
//! so the image state is a smooth matrix family in one basis and a
//! central finite difference of rho captures the mode-distortion
//! information automatically. The QFI is then evaluated spectrally,
//! `QFI = sum_{j,k: lambda_j + lambda_k > floor} 2 |<j|drho|k>|^2 / (lambda_j + lambda_k)`.
//!
//! Density matrices never get eigendecomposed in the ambient occupation
//! space: rho(s) has rank at most the number of retained photon pairs,
//! and the supports at the five stencil points span a small subspace.
//! Everything is projected there first, which keeps large photon caps
//! cheap.

use crate::beamsplitter::ImagingSystem;
use crate::error::{Error, Result};
use crate::psf::PsfModel;
use crate::qfi::{qfi_tmsv, TmsvVariant};
use crate::sources::SourceSpec;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

const BASIS_RESIDUAL_LIMIT: f64 = 1e-4;
const PAIR_TAIL_LIMIT: f64 = 1e-2;
const SOURCE_CAP_LIMIT: usize = 512;
const AMBIENT_DIM_LIMIT: usize = 200_000;
const EIG_FLOOR: f64 = 1e-12;

/// Fixed orthonormal image-plane mode basis (Hermite-Gauss).
///
/// The shifted PSF expands with coefficients
/// `c_k(+-s) = exp(-alpha^2/2) (+-alpha)^k / sqrt(k!)`, `alpha = s/(4 x_R)`.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub k: usize,
    pub x_r: f64,
}

impl ModeBasis {
    pub fn new(k: usize, psf: &PsfModel) -> Result<Self> {
        match psf {
            PsfModel::Gaussian { x_r } => {
                if k < 2 {
                    return Err(Error::CutoffOverflow { requested: k, limit: 2 });
                }
                Ok(Self { k, x_r: *x_r })
            }
            _ => Err(Error::UnsupportedPsf),
        }
    }

    /// Coefficient vector of the PSF shifted by `sign * s/2`.
    pub fn coefficients(&self, s: f64, sign: f64) -> Vec<f64> {
        let alpha = sign * s / (4.0 * self.x_r);
        let pre = (-0.5 * alpha * alpha).exp();
        let mut c = Vec::with_capacity(self.k);
        let mut term = pre;
        for k in 0..self.k {
            if k > 0 {
                term *= alpha / (k as f64).sqrt();
            }
            c.push(term);
        }
        c
    }

    /// Truncation residual `1 - sum_{k<K} |c_k|^2`.
    pub fn residual(&self, s: f64) -> f64 {
        let c = self.coefficients(s, 1.0);
        let kept: f64 = c.iter().map(|v| v * v).sum();
        (1.0 - kept).max(0.0)
    }
}

/// Truncation diagnostics carried by every oracle result.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationReport {
    pub tail_mass: f64,
    pub basis_residual: f64,
}

/// Dense image state over the K-mode occupation basis.
#[derive(Debug, Clone)]
pub struct TruncatedState {
    pub k: usize,
    pub n_max: u32,
    pub dim: usize,
    pub rho: Array2<f64>,
    /// Occupation tuple of each matrix index.
    pub index_map: Vec<Vec<u8>>,
    pub truncation: TruncationReport,
}

/// SLD-route QFI with its numerical provenance.
#[derive(Debug, Clone, Serialize)]
pub struct SldResult {
    pub qfi: f64,
    pub eig_floor_used: f64,
    pub fd_step: f64,
    pub truncation_report: TruncationReport,
}

/// Image state in factored form: `rho = V rho2 V^T` with orthonormal
/// pair columns V over the occupation basis.
struct FactoredState {
    v: Array2<f64>,
    rho2: Array2<f64>,
    truncation: TruncationReport,
}

fn occupations(k: usize, n_max: u32) -> Vec<Vec<u8>> {
    fn rec(k: usize, left: u32, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if k == 1 {
            for n in 0..=left {
                let mut t = prefix.clone();
                t.push(n as u8);
                out.push(t);
            }
            return;
        }
        for n in 0..=left {
            prefix.push(n as u8);
            rec(k - 1, left - n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, n_max, &mut Vec::new(), &mut out);
    out
}

/// raise[i][mode] = index of the state with one more photon in `mode`.
fn raise_table(states: &[Vec<u8>], n_max: u32) -> Vec<Vec<Option<usize>>> {
    let lookup: HashMap<&[u8], usize> =
        states.iter().enumerate().map(|(i, t)| (t.as_slice(), i)).collect();
    states
        .iter()
        .map(|t| {
            let total: u32 = t.iter().map(|&n| n as u32).sum();
            (0..t.len())
                .map(|m| {
                    if total >= n_max {
                        return None;
                    }
                    let mut up = t.clone();
                    up[m] += 1;
                    lookup.get(up.as_slice()).copied()
                })
                .collect()
        })
        .collect()
}

/// `out = u . a^dagger |vec>` in the occupation basis.
fn apply_creation(
    u: &[f64],
    vec: &Array1<f64>,
    states: &[Vec<u8>],
    raise: &[Vec<Option<usize>>],
) -> Array1<f64> {
    let mut out = Array1::zeros(vec.len());
    for (i, &amp) in vec.iter().enumerate() {
        if amp == 0.0 {
            continue;
        }
        for (m, &coeff) in u.iter().enumerate() {
            if coeff == 0.0 {
                continue;
            }
            if let Some(j) = raise[i][m] {
                out[j] += coeff * ((states[i][m] as f64) + 1.0).sqrt() * amp;
            }
        }
    }
    out
}

/// Single-mode source density matrix in the +/- source mode, photon cap
/// chosen so the discarded mass stays below 1e-13.
fn single_mode_source(source: &SourceSpec, sign: f64, n_max: u32) -> Result<Array2<f64>> {
    let cap_for_ratio = |ratio: f64| -> Result<usize> {
        if ratio <= 0.0 {
            return Ok(0);
        }
        let cap = (1e-13f64.ln() / ratio.ln()).ceil() as usize;
        let cap = cap.max(n_max as usize);
        if cap > SOURCE_CAP_LIMIT {
            return Err(Error::CutoffOverflow { requested: cap, limit: SOURCE_CAP_LIMIT });
        }
        Ok(cap)
    };
    match *source {
        SourceSpec::Thermal { n_mean } | SourceSpec::CorrThermal { n_mean, .. } => {
            let mean = match *source {
                SourceSpec::CorrThermal { w, .. } => (1.0 + sign * w) * n_mean,
                _ => n_mean,
            };
            if mean <= 0.0 {
                return Ok(Array2::from_elem((1, 1), 1.0));
            }
            let ratio = mean / (mean + 1.0);
            let cap = cap_for_ratio(ratio)?;
            let mut rho = Array2::zeros((cap + 1, cap + 1));
            let mut p = 1.0 / (mean + 1.0);
            for n in 0..=cap {
                rho[(n, n)] = p;
                p *= ratio;
            }
            Ok(rho)
        }
        SourceSpec::FockPm { n_plus, n_minus } => {
            let n = if sign > 0.0 { n_plus } else { n_minus } as usize;
            let mut rho = Array2::zeros((n + 1, n + 1));
            rho[(n, n)] = 1.0;
            Ok(rho)
        }
        SourceSpec::Tmsv { xi } => {
            // TMSV factors into single-mode squeezed vacua with
            // parameters +-xi in the +- source modes; amplitudes
            // psi_{2m} = cosh(xi)^(-1/2) (+-tanh xi)^m sqrt((2m)!)/(2^m m!)
            let t = sign * xi.tanh();
            if t == 0.0 {
                return Ok(Array2::from_elem((1, 1), 1.0));
            }
            let cap = cap_for_ratio(t.abs())?;
            let cap = cap + (cap % 2);
            let mut psi = vec![0.0; cap + 1];
            let mut amp = 1.0 / xi.cosh().sqrt();
            psi[0] = amp;
            for m in 1..=(cap / 2) {
                // ratio psi_{2m}/psi_{2(m-1)} = t sqrt((2m-1)(2m)) / (2m)
                let tm = 2.0 * m as f64;
                amp *= t * ((tm - 1.0) * tm).sqrt() / tm;
                psi[2 * m] = amp;
            }
            let v = Array1::from(psi);
            Ok(outer(&v, &v))
        }
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.len(), b.len()));
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[(i, j)] = x * y;
        }
    }
    out
}

/// Pure-loss channel with transmissivity `t` on a single mode.
fn apply_loss(rho: &Array2<f64>, t: f64) -> Array2<f64> {
    let n = rho.nrows();
    let mut out = Array2::zeros((n, n));
    // K_l[a, a+l] = sqrt(C(a+l, l) t^a (1-t)^l)
    let mut log_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        log_fact[i] = log_fact[i - 1] + (i as f64).ln();
    }
    let kraus = |a: usize, l: usize| -> f64 {
        let lc = log_fact[a + l] - log_fact[a] - log_fact[l];
        let lt = if t > 0.0 { a as f64 * t.ln() } else if a == 0 { 0.0 } else { f64::NEG_INFINITY };
        let ll = if t < 1.0 { l as f64 * (1.0 - t).ln() } else if l == 0 { 0.0 } else { f64::NEG_INFINITY };
        (0.5 * (lc + lt + ll)).exp()
    };
    for l in 0..n {
        for a in 0..n - l {
            let ka = kraus(a, l);
            if ka == 0.0 {
                continue;
            }
            for b in 0..n - l {
                let v = rho[(a + l, b + l)];
                if v != 0.0 {
                    out[(a, b)] += ka * kraus(b, l) * v;
                }
            }
        }
    }
    out
}

fn pairs_within(n_max: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for n in 0..=n_max {
        for m in 0..=(n_max - n) {
            out.push((n, m));
        }
    }
    out
}

fn factored_state(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    k: usize,
    n_max: u32,
) -> Result<FactoredState> {
    source.validate()?;
    let basis = ModeBasis::new(k, &system.psf)?;
    let basis_residual = basis.residual(s);
    if basis_residual > BASIS_RESIDUAL_LIMIT {
        return Err(Error::TruncationBudgetExceeded {
            budget: "basis residual",
            value: basis_residual,
            limit: BASIS_RESIDUAL_LIMIT,
        });
    }
    let c1 = basis.coefficients(s, -1.0);
    let c2 = basis.coefficients(s, 1.0);
    let nu: f64 = c1.iter().map(|v| v * v).sum();
    let delta_t: f64 = c1.iter().zip(&c2).map(|(a, b)| a * b).sum();
    // orthonormal image modes carrying the +- source photons
    let norm_p = (2.0 * (nu + delta_t)).sqrt();
    let norm_m = (2.0 * (nu - delta_t)).sqrt().max(1e-300);
    let u_plus: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| (a + b) / norm_p).collect();
    let u_minus: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| (a - b) / norm_m).collect();
    // per-photon survival probabilities, truncation-consistent
    let t_plus = system.eta() * (nu + delta_t);
    let t_minus = system.eta() * (nu - delta_t);

    let rho_plus = apply_loss(&single_mode_source(source, 1.0, n_max)?, t_plus);
    let rho_minus = apply_loss(&single_mode_source(source, -1.0, n_max)?, t_minus);

    let pairs = pairs_within(n_max);
    let np = pairs.len();
    let mut rho2 = Array2::zeros((np, np));
    let get = |r: &Array2<f64>, i: usize, j: usize| -> f64 {
        if i < r.nrows() && j < r.ncols() {
            r[(i, j)]
        } else {
            0.0
        }
    };
    for (a, &(n, m)) in pairs.iter().enumerate() {
        for (b, &(np_, mp)) in pairs.iter().enumerate() {
            rho2[(a, b)] = get(&rho_plus, n as usize, np_ as usize)
                * get(&rho_minus, m as usize, mp as usize);
        }
    }
    let trace: f64 = (0..np).map(|i| rho2[(i, i)]).sum();
    let tail_mass = (1.0 - trace).max(0.0);
    if tail_mass > PAIR_TAIL_LIMIT {
        return Err(Error::TruncationBudgetExceeded {
            budget: "photon pair tail",
            value: tail_mass,
            limit: PAIR_TAIL_LIMIT,
        });
    }
    rho2.mapv_inplace(|v| v / trace);

    let states = occupations(k, n_max);
    let dim = states.len();
    if dim > AMBIENT_DIM_LIMIT {
        return Err(Error::CutoffOverflow { requested: dim, limit: AMBIENT_DIM_LIMIT });
    }
    let raise = raise_table(&states, n_max);
    // Phi_{n,m} = (A+^dag)^n (A-^dag)^m |0> / sqrt(n! m!), built by
    // walking the pair lattice
    let mut v = Array2::zeros((dim, np));
    let mut col_of: HashMap<(u32, u32), usize> = HashMap::new();
    for (col, &(n, m)) in pairs.iter().enumerate() {
        let phi = if n == 0 && m == 0 {
            let mut vac = Array1::zeros(dim);
            vac[0] = 1.0;
            vac
        } else if m > 0 {
            let prev = v.column(col_of[&(n, m - 1)]).to_owned();
            apply_creation(&u_minus, &prev, &states, &raise) / (m as f64).sqrt()
        } else {
            let prev = v.column(col_of[&(n - 1, 0)]).to_owned();
            apply_creation(&u_plus, &prev, &states, &raise) / (n as f64).sqrt()
        };
        v.column_mut(col).assign(&phi);
        col_of.insert((n, m), col);
    }
    Ok(FactoredState {
        v,
        rho2,
        truncation: TruncationReport { tail_mass, basis_residual },
    })
}

/// Exact image-plane state of the K-mode truncated Fock space.
pub fn build_image_state(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    k: usize,
    n_max: u32,
) -> Result<TruncatedState> {
    let f = factored_state(source, system, s, k, n_max)?;
    let states = occupations(k, n_max);
    let dim = states.len();
    if dim > 4000 {
        return Err(Error::CutoffOverflow { requested: dim, limit: 4000 });
    }
    let rho = f.v.dot(&f.rho2).dot(&f.v.t());
    Ok(TruncatedState {
        k,
        n_max,
        dim,
        rho,
        index_map: states,
        truncation: f.truncation,
    })
}

/// Modified Gram-Schmidt with reorthogonalization; drops columns whose
/// residual norm falls below `tol`.
fn orthonormal_basis(cols: &[Array2<f64>], tol: f64) -> Array2<f64> {
    let dim = cols[0].nrows();
    let total: usize = cols.iter().map(|c| c.ncols()).sum();
    let mut q: Vec<Array1<f64>> = Vec::with_capacity(total);
    for block in cols {
        for j in 0..block.ncols() {
            let mut v = block.column(j).to_owned();
            for _ in 0..2 {
                for e in &q {
                    let proj = e.dot(&v);
                    v.scaled_add(-proj, e);
                }
            }
            let n = v.dot(&v).sqrt();
            if n > tol {
                q.push(v / n);
            }
        }
    }
    let mut out = Array2::zeros((dim, q.len()));
    for (j, e) in q.iter().enumerate() {
        out.column_mut(j).assign(e);
    }
    out
}

/// Spectral QFI from the state and its s-derivative, both expressed in
/// the same orthonormal subspace.
fn spectral_qfi(rho: &Array2<f64>, drho: &Array2<f64>, floor: f64) -> Result<f64> {
    let (eigs, vecs) = rho
        .eigh(UPLO::Lower)
        .map_err(|_| Error::NonFinite("eigendecomposition"))?;
    let m = vecs.t().dot(drho).dot(&vecs);
    let n = eigs.len();
    let mut qfi = 0.0;
    for j in 0..n {
        for k in 0..n {
            let denom = eigs[j] + eigs[k];
            if denom > floor {
                qfi += 2.0 * m[(j, k)] * m[(j, k)] / denom;
            }
        }
    }
    Ok(qfi)
}

/// SLD-route QFI with Richardson extrapolation over `h` and `h/2`.
pub fn qfi_sld(
    source: &SourceSpec,
    system: &ImagingSystem,
    s: f64,
    k: usize,
    n_max: u32,
    fd_step: f64,
) -> Result<SldResult> {
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(Error::NonFinite("fd_step"));
    }
    let h = fd_step;
    let offsets = [0.0, -h, h, -0.5 * h, 0.5 * h];
    let stencil: Vec<FactoredState> = offsets
        .iter()
        .map(|&d| factored_state(source, system, s + d, k, n_max))
        .collect::<Result<_>>()?;
    let vs: Vec<Array2<f64>> = stencil.iter().map(|f| f.v.clone()).collect();
    let q = orthonormal_basis(&vs, 1e-10);
    let small: Vec<Array2<f64>> = stencil
        .iter()
        .map(|f| {
            let b = q.t().dot(&f.v);
            b.dot(&f.rho2).dot(&b.t())
        })
        .collect();
    let d_h = (&small[2] - &small[1]) / (2.0 * h);
    let d_h2 = (&small[4] - &small[3]) / h;
    let q_h = spectral_qfi(&small[0], &d_h, EIG_FLOOR)?;
    let q_h2 = spectral_qfi(&small[0], &d_h2, EIG_FLOOR)?;
    let richardson = (4.0 * q_h2 - q_h) / 3.0;
    if (q_h - q_h2).abs() / richardson.abs().max(1e-12) > 1e-3 {
        return Err(Error::IllConditioned { a: q_h, b: q_h2, tol: 1e-3 });
    }
    Ok(SldResult {
        qfi: richardson.max(0.0),
        eig_floor_used: EIG_FLOOR,
        fd_step,
        truncation_report: stencil[0].truncation,
    })
}

/// One grid point of the TMSV adjudication run.
#[derive(Debug, Clone, Serialize)]
pub struct TmsvPoint {
    pub s: f64,
    pub oracle: f64,
    pub as_printed: f64,
    pub squared_derivative: f64,
    pub dev_printed: f64,
    pub dev_squared: f64,
}

/// Verdict on the ambiguous TMSV formula terms.
#[derive(Debug, Clone, Serialize)]
pub struct TmsvAdjudication {
    pub xi: f64,
    pub eta: f64,
    pub k: usize,
    pub n_max: u32,
    pub fd_step: f64,
    pub points: Vec<TmsvPoint>,
    pub max_dev_printed: f64,
    pub max_dev_squared: f64,
    pub verdict: TmsvVariant,
}

/// Runs the oracle against both analytic TMSV variants over a grid and
/// declares the variant with the smaller worst-case deviation.
pub fn adjudicate_tmsv(
    xi: f64,
    system: &ImagingSystem,
    s_grid: &[f64],
    k: usize,
    n_max: u32,
) -> Result<TmsvAdjudication> {
    if xi > 1.5 {
        return Err(Error::UnphysicalState(format!(
            "adjudication limited to xi <= 1.5, got {xi}"
        )));
    }
    let fd_step = 1e-3 * system.x_r();
    let points: Vec<TmsvPoint> = s_grid
        .par_iter()
        .map(|&s| -> Result<TmsvPoint> {
            let source = SourceSpec::Tmsv { xi };
            let oracle = qfi_sld(&source, system, s, k, n_max, fd_step)?.qfi;
            let as_printed = qfi_tmsv(xi, system, s, TmsvVariant::AsPrinted)?;
            let squared = qfi_tmsv(xi, system, s, TmsvVariant::SquaredDerivative)?;
            let scale = oracle.abs().max(1e-12);
            Ok(TmsvPoint {
                s,
                oracle,
                as_printed,
                squared_derivative: squared,
                dev_printed: (as_printed - oracle).abs() / scale,
                dev_squared: (squared - oracle).abs() / scale,
            })
        })
        .collect::<Result<_>>()?;
    let max_dev_printed = points.iter().map(|p| p.dev_printed).fold(0.0, f64::max);
    let max_dev_squared = points.iter().map(|p| p.dev_squared).fold(0.0, f64::max);
    let verdict = if max_dev_squared <= max_dev_printed {
        TmsvVariant::SquaredDerivative
    } else {
        TmsvVariant::AsPrinted
    };
    Ok(TmsvAdjudication {
        xi,
        eta: system.eta(),
        k,
        n_max,
        fd_step,
        points,
        max_dev_printed,
        max_dev_squared,
        verdict,
    })
}
