use langevin_core::sampler::{compile_scheme, ensemble_run};
use langevin_core::schedule::{MassMode, PrecondMode, StepRule};
use langevin_core::score::LinearGaussianScore;
use langevin_core::verify::posterior_mean_check;
use langevin_core::{AnnealSchedule, DynamicsParams, Order, ScheduleConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Problem {
    h: DMatrix<f64>,
    y: DVector<f64>,
    sigma0: f64,
    prior_mean: DVector<f64>,
    prior_var: DVector<f64>,
}

fn problem(seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n) = (6, 3);
    let h = DMatrix::from_fn(m, n, |_, _| {
        rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt()
    });
    let x = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma0 = 0.3;
    let y = &h * x + DVector::from_fn(m, |_, _| sigma0 * rng.sample::<f64, _>(StandardNormal));
    Problem {
        h,
        y,
        sigma0,
        prior_mean: DVector::from_vec(vec![0.2, -0.1, 0.0]),
        prior_var: DVector::from_vec(vec![1.0, 0.5, 2.0]),
    }
}

fn schedule_cfg() -> ScheduleConfig {
    ScheduleConfig {
        levels: 10,
        sigma1: 1.0,
        sigma_last: 0.05,
        eps0: 0.02 * 0.05 * 0.05,
        step_rule: StepRule::Constant,
        t_inner: 500,
        tau: 1.0,
        mass_mode: MassMode::Scalar(1.0),
        precond: PrecondMode::Identity,
        max_iters: None,
    }
}

fn build(p: &Problem) -> (LinearGaussianScore, AnnealSchedule) {
    let schedule = AnnealSchedule::build(&schedule_cfg(), 1.0, 3, &[], p.sigma0).unwrap();
    let score = LinearGaussianScore::new(
        p.h.clone(),
        p.y.clone(),
        p.sigma0,
        p.prior_mean.clone(),
        p.prior_var.clone(),
        schedule.sigmas.clone(),
    )
    .unwrap();
    (score, schedule)
}

/// Textbook posterior of `y = Hx + n` with a diagonal Gaussian prior.
fn normal_equations(p: &Problem) -> (DVector<f64>, DMatrix<f64>) {
    let s2 = p.sigma0 * p.sigma0;
    let prior_prec = DMatrix::from_diagonal(&p.prior_var.map(|v| 1.0 / v));
    let prec = p.h.transpose() * &p.h / s2 + &prior_prec;
    let cov = prec.try_inverse().unwrap();
    let mean = &cov * (p.h.transpose() * &p.y / s2 + prior_prec * &p.prior_mean);
    (mean, cov)
}

#[test]
fn closed_form_matches_normal_equations() {
    let p = problem(1);
    let (score, _) = build(&p);
    let (mean, cov) = score.exact_posterior().unwrap();
    let (m2, c2) = normal_equations(&p);
    assert!((mean - m2).amax() < 1e-12);
    assert!((cov - c2).amax() < 1e-12);
}

#[test]
fn sample_means_hit_the_posterior_mean() {
    let p = problem(2);
    let (score, schedule) = build(&p);
    for (name, order, params) in [
        ("ULA", Order::First, DynamicsParams::overdamped()),
        ("BAOAB", Order::Second, DynamicsParams::underdamped(1.0)),
        ("ABO", Order::Second, DynamicsParams::underdamped(1.0)),
        (
            "BACOCAB",
            Order::Third,
            DynamicsParams::third_order(1.0, 1.0, 1.2),
        ),
        (
            "BCOABC",
            Order::Third,
            DynamicsParams::third_order(1.0, 1.0, 1.2),
        ),
    ] {
        let scheme = compile_scheme(name, order).unwrap();
        let r = posterior_mean_check(&score, &schedule, &params, &scheme, 400, 7, 3.0).unwrap();
        assert_eq!(r.n_samples, 400);
        assert!(r.pass, "{name}: max |z| = {}", r.max_abs_z);
    }
}

#[test]
fn sample_spread_tracks_tempered_posterior() {
    let p = problem(3);
    let (score, mut schedule) = build(&p);
    let (_, cov) = normal_equations(&p);
    schedule.tau = 0.25;
    let scheme = compile_scheme("BAOAB", Order::Second).unwrap();
    let out = ensemble_run(
        &schedule,
        &DynamicsParams::underdamped(1.0),
        &scheme,
        &score,
        2000,
        9,
        true,
    )
    .unwrap();
    let n = out.candidates.len() as f64;
    let mean = out.candidates.iter().fold(DVector::zeros(3), |a, c| a + c) / n;
    for i in 0..3 {
        let var = out
            .candidates
            .iter()
            .map(|c| (c[i] - mean[i]).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let target = schedule.tau * cov[(i, i)];
        // Variance of a sample variance with 2000 Gaussian draws is about 3%.
        assert!(
            (var / target - 1.0).abs() < 0.15,
            "coordinate {i}: {var} vs {target}"
        );
    }
}
