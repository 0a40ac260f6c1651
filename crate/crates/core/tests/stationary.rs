use proptest::prelude::*;
use riverkpp::network::RiverNetwork;
use riverkpp::simulator::{discretize, FarBoundary, GridSpec, Observers, Scheme, Simulator};
use riverkpp::stationary::*;
use riverkpp::Error;

fn tb(bu: f64, bl: f64) -> RiverNetwork {
    RiverNetwork::two_branch(bu, bl).unwrap()
}

fn primary(net: &RiverNetwork) -> f64 {
    compute_thresholds(net).unwrap().primary().unwrap().value
}

// Thresholds frozen from the phase-plane construction; each one is also
// cross-checked against an independent route further down.
const TB_3_1: f64 = 0.245_516_106_1;
const TB_25_15: f64 = 0.052_464_537_6;
const TB_2_1: f64 = 0.354_081_558_2;
const UUL_25_25_1: f64 = 0.266_558_409_6;
const UUL_3_1_2: f64 = 0.409_263_862_3;

#[test]
fn regime_examples() {
    assert_eq!(classify_case(&tb(3.0, 1.0)).unwrap().regime, Regime::TbIII);
    let uul = RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap();
    assert_eq!(classify_case(&uul).unwrap().regime, Regime::UulIII);
    let ull = RiverNetwork::one_up_two_down(1.5, 1.0, 1.0).unwrap();
    assert_eq!(classify_case(&ull).unwrap().regime, Regime::UllI);
}

#[test]
fn frozen_thresholds() {
    for (net, want) in [
        (tb(3.0, 1.0), TB_3_1),
        (tb(2.5, 1.5), TB_25_15),
        (tb(2.0, 1.0), TB_2_1),
        (RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap(), UUL_25_25_1),
        (RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap(), UUL_3_1_2),
        (RiverNetwork::one_up_two_down(3.0, 1.0, 1.0).unwrap(), TB_3_1),
    ] {
        let r = compute_thresholds(&net).unwrap();
        let t = r.primary().unwrap();
        assert!((t.value - want).abs() < 1e-8, "{}: {} vs {want}", r.case, t.value);
        assert_eq!(t.crossing_count, 1);
    }
}

#[test]
fn threshold_names_and_types() {
    let r = compute_thresholds(&tb(3.0, 1.0)).unwrap();
    assert_eq!(r.primary().unwrap().name, "alpha0");
    let r = compute_thresholds(&RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap()).unwrap();
    let t = r.primary().unwrap();
    assert_eq!(t.name, "alpha_star_star");
    assert_eq!(t.solution_type, SolutionType::Type01);
    assert_eq!(t.decreasing_branch, Some(1));
}

#[test]
fn identical_branches_reduce_to_two_branch_thresholds() {
    // Two identical upper (or lower) branches act as one branch carrying
    // their combined flux, so the three-branch threshold is the two-branch one.
    for (bu, bl) in [(2.5, 1.0), (3.0, 0.5), (2.2, 1.8)] {
        let two = primary(&tb(bu, bl));
        let uul = primary(&RiverNetwork::two_up_one_down(bu, bu, bl).unwrap());
        let ull = primary(&RiverNetwork::one_up_two_down(bu, bl, bl).unwrap());
        assert!((uul - two).abs() < 1e-8, "UUL {uul} vs TB {two}");
        assert!((ull - two).abs() < 1e-8, "ULL {ull} vs TB {two}");
    }
}

#[test]
fn symmetric_uul_has_equal_hat_thresholds() {
    let r = compute_thresholds(&RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap()).unwrap();
    let hats: Vec<f64> = r.thresholds.iter().filter(|t| t.name.starts_with("alpha_hat")).map(|t| t.value).collect();
    assert_eq!(hats.len(), 2);
    assert!((hats[0] - hats[1]).abs() < 1e-9);
    assert!(hats[0] > r.primary().unwrap().value);
}

#[test]
fn regimes_without_thresholds() {
    for net in [tb(1.0, 3.0), tb(2.5, 2.5), RiverNetwork::one_up_two_down(3.0, 2.0, 2.5).unwrap()] {
        assert!(matches!(compute_thresholds(&net), Err(Error::RegimeHasNoThreshold(_))));
    }
}

#[test]
fn existence_examples() {
    assert_eq!(existence_classification(&tb(2.5, 2.5), 0.3).unwrap(), ExistenceLabel::Unique);
    assert_eq!(existence_classification(&tb(1.0, 1.0), 0.3).unwrap(), ExistenceLabel::NoSolution);
    let uul2 = RiverNetwork::two_up_one_down(2.5, 3.0, 2.5).unwrap();
    assert_eq!(existence_classification(&uul2, 0.5).unwrap(), ExistenceLabel::Continuum);
    let uul3 = RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap();
    assert_eq!(existence_classification(&uul3, UUL_25_25_1 - 1e-3).unwrap(), ExistenceLabel::NoSolution);
    assert_eq!(existence_classification(&uul3, 0.5).unwrap(), ExistenceLabel::Continuum);
    let tb3 = tb(3.0, 1.0);
    assert_eq!(existence_classification(&tb3, 0.2).unwrap(), ExistenceLabel::NoSolution);
    assert_eq!(existence_classification(&tb3, 0.5).unwrap(), ExistenceLabel::Unique);
    let uul4 = RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap();
    assert_eq!(existence_classification(&uul4, 0.6).unwrap(), ExistenceLabel::UniqueType01);
    for alpha in [0.0, 1.0, -0.5, 1.5] {
        assert_eq!(existence_classification(&tb3, alpha).unwrap(), ExistenceLabel::NoSolution);
    }
}

fn assert_monotone(p: &StationaryProfile) {
    for b in &p.branches {
        // Values move toward the branch limit as |x| grows.
        let rising = b.limit > p.alpha;
        for w in b.value.windows(2) {
            let d = if rising { w[1] - w[0] } else { w[0] - w[1] };
            assert!(d >= -1e-10, "branch {} not monotone: {w:?}", b.branch);
        }
    }
}

#[test]
fn tb_iii_profile_at_threshold() {
    let net = tb(3.0, 1.0);
    let p = stationary_profile(&net, TB_3_1, TypeSelector::default()).unwrap();
    assert_eq!(p.solution_type, SolutionType::Type00);
    let (up, low) = (p.branch(0), p.branch(1));
    assert_eq!((up.limit, low.limit), (0.0, 1.0));
    assert!(up.slope.iter().all(|&s| s > 0.0));
    assert!(low.slope.iter().all(|&s| s > 0.0));
    assert!(p.flux_residual < 1e-6, "{}", p.flux_residual);
    assert!(*up.value.last().unwrap() < 1e-7 && *low.value.last().unwrap() > 1.0 - 1e-7);
    assert_monotone(&p);
}

#[test]
fn constant_profiles_at_the_ends() {
    let net = tb(3.0, 1.0);
    let one = stationary_profile(&net, 1.0, TypeSelector::default()).unwrap();
    for b in &one.branches {
        assert!(b.value.iter().all(|&v| v == 1.0));
        assert_eq!(b.eval(-7.0), 1.0);
    }
    let zero = stationary_profile(&net, 0.0, TypeSelector::default()).unwrap();
    assert!(zero.branches.iter().all(|b| b.value.iter().all(|&v| v == 0.0)));
}

#[test]
fn below_threshold_is_refused() {
    let err = stationary_profile(&tb(3.0, 1.0), 0.2, TypeSelector::default()).unwrap_err();
    assert!(matches!(err, Error::InfeasibleAlpha { .. }));
}

#[test]
fn uul_iv_type01_profile() {
    let net = RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap();
    let p = stationary_profile(&net, 0.6, TypeSelector::Type01 { decreasing: 1 }).unwrap();
    assert_eq!(p.solution_type, SolutionType::Type01);
    let (fast, slow) = (p.branch(0), p.branch(1));
    assert_eq!(fast.limit, 0.0);
    assert_eq!(slow.limit, 1.0);
    assert!(slow.slope.iter().all(|&s| s < 0.0));
    assert!(fast.slope.iter().all(|&s| s > 0.0));
    assert!(p.flux_residual < 1e-6);
    assert_monotone(&p);
}

#[test]
fn uul_iii_continuum_splits() {
    let net = RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap();
    let (lo, hi) = feasible_split(&net, 0.5, &ProfileOptions::default()).unwrap();
    assert!(0.0 <= lo && lo < hi);
    // A zero slope is the flat, non-decaying limit of the family.
    for split in [lo + 0.1 * (hi - lo), 0.5 * (lo + hi), hi] {
        let p = stationary_profile(&net, 0.5, TypeSelector::Type00 { split: Some(split) }).unwrap();
        assert!((p.branch(0).junction_slope() - split).abs() < 1e-6 * split.abs().max(1.0));
        assert!(p.flux_residual < 1e-6);
        assert_monotone(&p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn type00_profiles_are_monotone(bu in 2.0f64..4.0, bl in 0.3f64..1.9, t in 0.0f64..1.0) {
        let net = tb(bu, bl);
        let a0 = primary(&net);
        let alpha = a0 + t * (0.98 - a0);
        let p = stationary_profile(&net, alpha, TypeSelector::default()).unwrap();
        prop_assert!(p.flux_residual < 1e-6);
        assert_monotone(&p);
    }
}

#[test]
fn decay_rates() {
    let net = tb(3.0, 1.0);
    let (kp, km) = (0.5 * (3.0 + 5f64.sqrt()), 0.5 * (3.0 - 5f64.sqrt()));
    let at = stationary_profile(&net, TB_3_1, TypeSelector::default()).unwrap();
    let d = decay_rate(&at, 0).unwrap();
    assert_eq!(d.kind, DecayKind::Fast);
    assert!(((d.fitted_exponent - kp) / kp).abs() < 0.02, "{d:?}");
    let above = stationary_profile(&net, 0.5 * (TB_3_1 + 1.0), TypeSelector::default()).unwrap();
    let d = decay_rate(&above, 0).unwrap();
    assert_eq!(d.kind, DecayKind::Slow);
    assert!(((d.fitted_exponent - km) / km).abs() < 0.02, "{d:?}");

    // beta = 2: both exponents equal 1.
    let net = tb(2.0, 1.0);
    let at = stationary_profile(&net, TB_2_1, TypeSelector::default()).unwrap();
    let d = decay_rate(&at, 0).unwrap();
    assert_eq!(d.kind, DecayKind::Fast);
    assert!((d.fitted_exponent - 1.0).abs() < 0.02, "{d:?}");
    let above = stationary_profile(&net, 0.6, TypeSelector::default()).unwrap();
    let d = decay_rate(&above, 0).unwrap();
    assert_eq!(d.kind, DecayKind::SlowCritical);
    assert!((d.fitted_exponent - 1.0).abs() < 0.02, "{d:?}");
}

#[test]
fn oracle_agrees_with_the_phase_plane() {
    let nets = [
        tb(3.0, 1.0),
        tb(2.5, 1.5),
        tb(4.0, 0.5),
        tb(2.2, 1.2),
        tb(3.0, 1.8),
        RiverNetwork::one_up_two_down(3.0, 1.0, 1.0).unwrap(),
        RiverNetwork::one_up_two_down(2.5, 1.0, 1.5).unwrap(),
        RiverNetwork::one_up_two_down(3.0, 0.5, 1.0).unwrap(),
        RiverNetwork::one_up_two_down(4.0, 1.0, 1.0).unwrap(),
        RiverNetwork::one_up_two_down(2.5, 1.5, 1.5).unwrap(),
    ];
    for net in &nets {
        let alpha = primary(net);
        let oracle = relaxation_oracle(net, &supersolution(net, 5.0), &OracleOptions::default()).unwrap();
        let case = classify_case(net).unwrap();
        assert!((oracle.alpha - alpha).abs() < 1e-3, "{case}: oracle {} vs {alpha}", oracle.alpha);
    }
}

#[test]
fn oracle_fills_to_capacity_in_tb_i() {
    let net = tb(1.5, 1.0);
    let bump = |_: usize, x: f64| 0.1 * (1.0 - x * x).max(0.0);
    let p = relaxation_oracle(&net, &bump, &OracleOptions::default()).unwrap();
    for b in &p.branches {
        assert!(b.value.iter().all(|v| (v - 1.0).abs() < 1e-3));
    }
}

#[test]
fn oracle_keeps_a_relaxed_state() {
    let net = tb(3.0, 1.0);
    let opts = OracleOptions::default();
    let grid = GridSpec::with_spacing(&net, opts.length, opts.h, opts.far_bc).unwrap();
    let first = relax(discretize(&net, &grid, &supersolution(&net, 5.0)).unwrap(), &opts).unwrap();
    let again = relax(first.state.clone(), &opts).unwrap();
    assert!(again.state.distance(&first.state).unwrap() < 1e-8);
}

fn profile_drift(net: &RiverNetwork, alpha: f64, selector: TypeSelector, h: f64, span: f64) -> f64 {
    let opts = ProfileOptions { spacing: Some(h), ..ProfileOptions::default() };
    let p = stationary_profile_with(net, alpha, selector, &opts).unwrap();
    let grid = GridSpec::with_spacing(net, 50.0, h, FarBoundary::Neumann).unwrap();
    let mut state = discretize(net, &grid, &p.as_initial_data()).unwrap();
    let start = state.clone();
    let sim = Simulator::new(net, &grid, 0.005, Scheme::default()).unwrap();
    sim.run(&mut state, span, &Observers { sample_every: span, ..Observers::default() }).unwrap();
    state.distance(&start).unwrap()
}

#[test]
fn profiles_are_discrete_near_fixed_points() {
    let cases = [
        (tb(3.0, 1.0), TB_3_1, TypeSelector::default()),
        (tb(3.0, 1.0), 0.6, TypeSelector::default()),
        (RiverNetwork::two_up_one_down(2.5, 2.5, 1.0).unwrap(), UUL_25_25_1, TypeSelector::default()),
        (RiverNetwork::two_up_one_down(3.0, 1.0, 2.0).unwrap(), 0.6, TypeSelector::Type01 { decreasing: 1 }),
    ];
    for (net, alpha, sel) in &cases {
        let drift = profile_drift(net, *alpha, *sel, 1e-3, 1.0);
        assert!(drift < 1e-6, "alpha {alpha}: drift {drift:e}");
    }
}

#[test]
fn fine_grid_drift_per_unit_time() {
    // The state settles onto the discrete fixed point within about one time
    // unit (an O(h^2) move, about 1.2e-8 here) and then stops, so the
    // displacement saturates and the rate is an average over two units.
    let span = 2.0;
    let drift = profile_drift(&tb(3.0, 1.0), TB_3_1, TypeSelector::default(), 1.25e-4, span);
    assert!(drift / span < 1e-8, "drift rate {:e}", drift / span);
}

#[test]
fn scaled_profile_matches_extrapolated_oracle() {
    // Richardson extrapolation of the oracle at h and h/2 removes its
    // second-order error, leaving a physical-variable reference.
    for net in [tb(3.0, 1.0), RiverNetwork::one_up_two_down(3.0, 1.0, 1.0).unwrap()] {
        let h = 0.01;
        let coarse = relaxation_oracle(&net, &supersolution(&net, 5.0), &OracleOptions { h, ..OracleOptions::default() }).unwrap();
        let fine = relaxation_oracle(&net, &supersolution(&net, 5.0), &OracleOptions { h: h / 2.0, ..OracleOptions::default() }).unwrap();
        let profile = stationary_profile(&net, primary(&net), TypeSelector::default()).unwrap();
        let mut worst = 0.0_f64;
        for (c, f) in coarse.branches.iter().zip(&fine.branches) {
            for (j, (&x, &v)) in c.x.iter().zip(&c.value).enumerate() {
                let r = (4.0 * f.value[2 * j] - v) / 3.0;
                worst = worst.max((profile.branch(c.branch).eval(x) - r).abs());
            }
        }
        assert!(worst < 1e-6, "worst {worst:e}");
    }
}
