//! Property-based invariants across the analytic layers.

use proptest::prelude::*;
use rqfi::beamsplitter::{f_functions, qfi_upper_bound};
use rqfi::qfi::{qfi_fock, qfi_for, qfi_thermal, TmsvVariant};
use rqfi::sources::{image_distribution, CutoffPolicy};
use rqfi::{ImagingSystem, PsfModel, SourceSpec};

fn system(eta: f64, x_r: f64) -> ImagingSystem {
    ImagingSystem::new(eta, PsfModel::gaussian(x_r).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gamma_is_derivative_of_delta(
        s in 0.05f64..8.0,
        x_r in 0.2f64..5.0,
    ) {
        let psf = PsfModel::gaussian(x_r).unwrap();
        let h = 1e-5 * x_r;
        let fd = (psf.delta(s + h).unwrap() - psf.delta(s - h).unwrap()) / (2.0 * h);
        let gamma = psf.functionals(s).unwrap().gamma;
        prop_assert!((gamma - fd).abs() < 1e-8 / x_r);
    }

    #[test]
    fn epsilon_squares_nonnegative(
        s in 0.0f64..10.0,
        x_r in 0.2f64..5.0,
    ) {
        let psf = PsfModel::gaussian(x_r).unwrap();
        let fns = psf.functionals(s).unwrap();
        prop_assert!(fns.eps_plus_sq >= 0.0);
        prop_assert!(fns.eps_minus_sq >= 0.0);
    }

    #[test]
    fn normalized_curves_rescale(
        s in 0.05f64..6.0,
        lambda in 0.3f64..4.0,
        eta in 0.05f64..0.5,
    ) {
        let a = system(eta, 1.0);
        let b = system(eta, lambda);
        let (fp1, fm1) = f_functions(&a, s).unwrap();
        let (fp2, fm2) = f_functions(&b, lambda * s).unwrap();
        prop_assert!((fp1 - fp2).abs() < 1e-10);
        prop_assert!((fm1 - fm2).abs() < 1e-10);
        let q1 = qfi_thermal(1.0, &a, s).unwrap();
        let q2 = qfi_thermal(1.0, &b, lambda * s).unwrap();
        prop_assert!((q1 - q2 * lambda * lambda).abs() < 1e-10);
    }

    #[test]
    fn distributions_are_normalized(
        s in 0.0f64..8.0,
        eta in 0.05f64..0.5,
        n_mean in 0.0f64..20.0,
        xi in 0.0f64..1.5,
        w in -1.0f64..1.0,
    ) {
        let sys = system(eta, 1.0);
        let policy = CutoffPolicy::default();
        for source in [
            SourceSpec::Thermal { n_mean },
            SourceSpec::FockPm { n_plus: 2, n_minus: 1 },
            SourceSpec::Tmsv { xi },
            SourceSpec::CorrThermal { n_mean, w },
        ] {
            let d = image_distribution(&source, &sys, s, &policy).unwrap();
            prop_assert!((d.total_mass() - 1.0).abs() < 1e-12);
            prop_assert!(d.tail_mass < 1e-10);
            prop_assert!(d.p.iter().flatten().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn qfi_monotone_in_photons(
        s in 0.05f64..6.0,
        eta in 0.05f64..0.5,
        n in 0.01f64..50.0,
    ) {
        let sys = system(eta, 1.0);
        let lo = qfi_thermal(n, &sys, s).unwrap();
        let hi = qfi_thermal(1.5 * n, &sys, s).unwrap();
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn bound_dominates_every_family(
        s in 0.05f64..8.0,
        eta in 0.05f64..0.5,
        n_mean in 0.01f64..10.0,
        xi in 0.0f64..1.5,
        w in -1.0f64..1.0,
    ) {
        let sys = system(eta, 1.0);
        for source in [
            SourceSpec::Thermal { n_mean },
            SourceSpec::FockPm { n_plus: 1, n_minus: 2 },
            SourceSpec::Tmsv { xi },
            SourceSpec::CorrThermal { n_mean, w },
        ] {
            let q = qfi_for(&source, &sys, s, TmsvVariant::SquaredDerivative).unwrap();
            let bound = qfi_upper_bound(&sys, s, 0.5 * source.total_photons()).unwrap();
            prop_assert!(q <= bound * (1.0 + 1e-9) + 1e-15,
                "{source:?}: qfi {q} > bound {bound}");
        }
    }

    #[test]
    fn fock_saturation_is_exact(
        s in 0.0f64..8.0,
        eta in 0.05f64..0.5,
        n in 1u32..6,
    ) {
        let sys = system(eta, 1.0);
        let bound = qfi_upper_bound(&sys, s, n as f64).unwrap();
        let best = qfi_fock(2 * n, 0, &sys, s)
            .unwrap()
            .max(qfi_fock(0, 2 * n, &sys, s).unwrap());
        prop_assert!(best == bound);
    }
}
