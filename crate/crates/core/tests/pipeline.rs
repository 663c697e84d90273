mod common;

use oem_swap::gaussian::{log_negativity, B1, W1};
use oem_swap::oem::{LinearModel, SystemParams};
use oem_swap::spectra::{output_cm, FilterBank};
use oem_swap::swap::{evaluate, SiteState};
use oem_swap::sweep::{render_csv, run_sweep, Scale, SweepConfig, SweepVariable};

fn reference_site(temperature: f64, tau: f64) -> SiteState {
    let mut p = SystemParams::reference();
    p.temperature = temperature;
    let m = LinearModel::from_params(&p).unwrap();
    let out = output_cm(&m, &FilterBank::centered_on_detunings(&m, tau / m.omega_m)).unwrap();
    SiteState::from_output(&out).unwrap()
}

#[test]
fn reference_point_is_certified() {
    let site = reference_site(0.05, 500.0);
    // The Bell light carries the microwave entanglement before the swap.
    let wb = site.cm().submatrix(&[W1, B1]).unwrap();
    assert!(log_negativity(&wb, (&[W1], &[B1])).unwrap() > 0.0);
    let r = evaluate(&site).unwrap();
    assert!(r.certified && r.certifying_state);
    assert!(r.en_ww > r.en_cc && r.en_cc > 0.0);
}

#[test]
fn shortcut_matches_measured_route_on_output_states() {
    for (t, tau) in [(0.05, 50.0), (0.05, 500.0), (0.1, 100.0), (0.1, 1000.0)] {
        let r = evaluate(&reference_site(t, tau)).unwrap();
        assert!(r.discrepancy_ww <= 1e-8 && r.discrepancy_cc <= 1e-8, "T={t} tau={tau}: {r:?}");
    }
}

#[test]
fn certification_fails_for_broad_filters_at_100mk() {
    // Below τω_m ≈ 19 the remote pair is separable and nothing can be certified.
    let r = evaluate(&reference_site(0.1, 10.0)).unwrap();
    assert!(!r.certified && r.en_ww == 0.0);
    let r = evaluate(&reference_site(0.1, 30.0)).unwrap();
    assert!(r.certified);
}

#[test]
fn unstable_points_do_not_abort() {
    let mut cfg = common::config("default.json");
    cfg.system.bell.power_w = 3e-3;
    cfg.sweep = SweepConfig { variable: SweepVariable::Temperature, start: 0.01, stop: 0.2, points: 4, scale: Scale::Log };
    let mut hot = cfg.clone();
    hot.system.bell.power_w = 1.0;
    let out = run_sweep(&hot).unwrap();
    assert_eq!(out.points.len(), 4);
    assert_eq!(out.stable_count(), 0);
    let out = run_sweep(&cfg).unwrap();
    assert_eq!(out.stable_count(), 4);
    assert!(out.points.windows(2).all(|w| w[0].record.swept_value < w[1].record.swept_value));
}

#[test]
fn thread_count_does_not_change_output() {
    let cfg = common::config("tau_sweep_100mk.json");
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_sweep(&cfg).unwrap());
    let parallel = run_sweep(&cfg).unwrap();
    assert_eq!(render_csv(&serial.records()), render_csv(&parallel.records()));
}

#[test]
fn single_point_config_is_valid() {
    let cfg = common::config("default.json");
    assert_eq!(cfg.sweep.points, 1);
    let report = oem_swap::sweep::validate(&cfg).unwrap();
    assert_eq!(report.points, 1);
    assert!(report.endpoints[0].stable);
}

#[test]
fn entanglement_is_smooth_in_tau() {
    // Fine grid; a window or breakpoint artifact would show up as a jump.
    let mut cfg = common::config("tau_sweep_50mk.json");
    cfg.sweep = SweepConfig { variable: SweepVariable::Tau, start: 50.0, stop: 1000.0, points: 191, scale: Scale::Linear };
    let recs = run_sweep(&cfg).unwrap().records();
    for w in recs.windows(2) {
        for (a, b) in [(w[0].en_ww, w[1].en_ww), (w[0].en_cc, w[1].en_cc)] {
            let (a, b) = (a.unwrap(), b.unwrap());
            assert!((b - a).abs() <= 0.1 * a, "jump {a} -> {b} at tau {}", w[1].swept_value);
        }
    }
}
