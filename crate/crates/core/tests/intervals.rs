//! Monte-Carlo checks of the interval methods at small scale.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use selinf::bootstrap::{plr_glm, residual_bootstrap_lm, BootstrapConfig, LambdaRule};
use selinf::debias::{debias_glm, nodewise_theta, select_nodewise_lambda, weighted_design};
use selinf::solver::fit_penalized_glm;
use selinf::{CvResult, FamilySpec, IntervalTable, PenaltySpec, SolverConfig};

fn design(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn tally(covered: &mut [usize], table: &IntervalTable, truth: &[f64]) {
    for (c, (row, &t)) in covered.iter_mut().zip(table.rows.iter().zip(truth)) {
        *c += usize::from(row.contains(t));
    }
}

#[test]
fn residual_bootstrap_lm_covers_near_nominal() {
    let (n, p, reps) = (150, 6, 60);
    let truth = [0.5, 1.0, -0.8, 0.6, 0.0, 0.0, 0.0];
    let mut covered = vec![0; p + 1];
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + r);
        let x = design(&mut rng, n, p);
        let y: Vec<f64> = (0..n)
            .map(|i| truth[0] + (0..p).map(|j| truth[j + 1] * x[(i, j)]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cfg = BootstrapConfig {
            n_replicates: 100,
            master_seed: r,
            ..BootstrapConfig::default()
        };
        let run = residual_bootstrap_lm(&x, &y, &cfg, &CvResult::fixed(0.02)).unwrap();
        tally(&mut covered, &run.table, &truth);
    }
    let mean = covered[1..4].iter().sum::<usize>() as f64 / (3 * reps) as f64;
    assert!(mean >= 0.82, "nonzero coverage {mean}");
}

#[test]
fn poisson_debias_covers_near_nominal() {
    let (n, p, reps) = (400, 8, 40);
    let truth = [0.3, 0.5, -0.4, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0];
    let fam = FamilySpec::poisson();
    let mut covered = vec![0; p + 1];
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + r);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let eta = truth[0] + (0..p).map(|j| truth[j + 1] * x[(i, j)]).sum::<f64>();
                Poisson::new(eta.exp()).unwrap().sample(&mut rng)
            })
            .collect();
        let fit = fit_penalized_glm(&x, &y, &fam, &PenaltySpec::lasso(0.02, p), &SolverConfig::default()).unwrap();
        let xw = weighted_design(&x, &fit, &fam).unwrap();
        let lam = select_nodewise_lambda(&xw, true, r).unwrap();
        let theta = nodewise_theta(&xw, &vec![lam; p + 1]).unwrap();
        let res = debias_glm(&fit, &x, &y, &fam, &theta, 0.95).unwrap();
        tally(&mut covered, &res.intervals, &truth);
    }
    let rates: Vec<f64> = covered[1..].iter().map(|&c| c as f64 / reps as f64).collect();
    let mean = rates.iter().sum::<f64>() / p as f64;
    assert!(mean >= 0.85, "mean coverage {mean}, rates {rates:?}");
}

fn plr_mean_width(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 5;
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n)
        .map(|i| Poisson::new(f64::exp(0.5 + 0.5 * x[(i, 0)] - 0.4 * x[(i, 1)])).unwrap().sample(&mut rng))
        .collect();
    let cfg = BootstrapConfig {
        n_replicates: 100,
        master_seed: seed,
        ..BootstrapConfig::default()
    };
    let run = plr_glm(&x, &y, &FamilySpec::poisson(), &cfg, &LambdaRule::Fixed { lambda: 0.01 }, None).unwrap();
    run.table.rows[1..3].iter().map(|r| r.width).sum::<f64>() / 2.0
}

#[test]
fn plr_widths_shrink_like_root_n() {
    let small = (0..3).map(|s| plr_mean_width(300, s)).sum::<f64>();
    let large = (0..3).map(|s| plr_mean_width(1200, 10 + s)).sum::<f64>();
    let ratio = small / large;
    assert!((1.6..2.5).contains(&ratio), "width ratio {ratio}");
}
