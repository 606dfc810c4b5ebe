use hdsel::sim::{
    design_condition_mc, gen_design, run_mc, run_rep, run_sigma_mc, summarize, toeplitz, Beta0Spec,
    McConfig, SigmaMode,
};
use hdsel::Error;

fn small() -> McConfig {
    McConfig {
        n: 60,
        p: 40,
        s: 4,
        reps: 16,
        sim_draws: 300,
        seed: 3,
        ..McConfig::default()
    }
}

#[test]
fn report_is_identical_across_thread_counts() {
    let cfg = small();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_mc(&cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn summary_matches_rep_outcomes() {
    let cfg = small();
    let outs: Vec<_> = (0..cfg.reps).map(|r| run_rep(&cfg, r)).collect();
    let rep = summarize(&cfg, &outs);
    let ok: Vec<_> = outs.iter().map(|o| o.as_ref().unwrap()).collect();
    let k = ok.len() as f64;
    let mean_pred = ok.iter().map(|o| o.lasso_pred).sum::<f64>() / k;
    assert!((rep.lasso.mean_pred_error - mean_pred).abs() < 1e-12);
    let mean_sel = ok.iter().map(|o| o.selected as f64).sum::<f64>() / k;
    assert!((rep.lasso.mean_l0 - mean_sel).abs() < 1e-12);
    let beta0 = cfg.beta0_vector();
    let mut mean_beta = beta0.clone() * 0.0;
    for o in &ok {
        mean_beta += &o.oracle_beta;
    }
    assert!((rep.oracle.bias_norm - (mean_beta / k - beta0).norm()).abs() < 1e-12);
    assert_eq!(rep, run_mc(&cfg).unwrap());
}

#[test]
fn failed_reps_are_counted_and_flagged() {
    let cfg = small();
    let mut outs: Vec<_> = (0..cfg.reps).map(|r| run_rep(&cfg, r)).collect();
    outs[2] = Err(Error::Singular);
    let rep = summarize(&cfg, &outs);
    assert_eq!(rep.failures, 1);
    assert_eq!(rep.rep_count, cfg.reps - 1);
    assert!(rep.flagged);
}

#[test]
fn custom_coefficients_and_free_intercept() {
    let mut b = vec![0.0; 40];
    b[0] = 2.0;
    b[5] = -1.0;
    let cfg = McConfig {
        beta0: Beta0Spec::Custom(b.clone()),
        s: 2,
        ..small()
    };
    let ds = gen_design(&cfg, 0).unwrap();
    let truth = ds.truth().unwrap();
    assert_eq!(truth.support.as_ref().unwrap().as_slice(), &[0, 5]);
    let o = run_rep(&cfg, 0).unwrap();
    assert!(o.lasso_beta[0] != 0.0);
    let bad = McConfig {
        beta0: Beta0Spec::Custom(vec![1.0; 3]),
        ..small()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn estimated_noise_modes() {
    let base = McConfig {
        reps: 10,
        ..small()
    };
    assert!(run_sigma_mc(&base).is_err());
    let post = run_sigma_mc(&McConfig {
        sigma_mode: SigmaMode::EstimatedPostLasso,
        ..base.clone()
    })
    .unwrap();
    let lasso = run_sigma_mc(&McConfig {
        sigma_mode: SigmaMode::EstimatedLasso,
        ..base
    })
    .unwrap();
    let (ps, ls) = (post.sigma.unwrap(), lasso.sigma.unwrap());
    assert!(ls.estimate.mean >= ps.estimate.mean);
    assert!(ps.initial.mean >= ps.estimate.mean);
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = McConfig::design2();
    let text = toml::to_string(&cfg).unwrap();
    let back: McConfig = toml::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    let partial: McConfig = toml::from_str("reps = 7\nsigma2 = 0.1\n").unwrap();
    assert_eq!(partial.reps, 7);
    assert_eq!(partial.p, 500);
    assert!(toml::from_str::<McConfig>("bogus = 1\n").is_err());
}

#[test]
fn gaussian_design_conditions_hold_with_high_frequency() {
    let cfg = McConfig {
        n: 100,
        p: 12,
        s: 2,
        rho: 0.0,
        seed: 9,
        ..McConfig::default()
    };
    let r = design_condition_mc(&cfg, 2, 50).unwrap();
    assert!((r.population_kappa - 1.0).abs() < 1e-12);
    assert!((r.population_phi - 1.0).abs() < 1e-12);
    assert!(r.frequency >= r.guaranteed);
    let t = toeplitz(4, 0.5);
    assert_eq!(t[(0, 3)], 0.125);
}
