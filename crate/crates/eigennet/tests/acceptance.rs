//! Acceptance suite: one test per release criterion, each printing a
//! single PASS or FAIL line (visible with `--nocapture`). The three
//! experiment suites are expensive, so tests share them through lazily
//! initialized statics; criteria that reuse a suite see its cached result.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use eigennet::baselines::{fit_elastic_logistic, fit_l1_logistic, PenalizedFit};
use eigennet::data::Dataset;
use eigennet::datagen::{generate_correlated, SynthSpec};
use eigennet::eigen::{eigendecompose, project_data, verify_change_of_variables, EigenBasis};
use eigennet::experiments::{
    run_experiment, ExperimentConfig, ExperimentOutcome, ExperimentReport, Method, Suite,
};
use eigennet::model::{composite_regularizer, log_posterior, log_sigmoid, HyperParams, ModelState};
use eigennet::sampler::{run_chain, run_chain_with_target, SamplerConfig};

/// Required margin of the grouped-prior classifier over the elastic net.
const MARGIN_OVER_ENET: f64 = 0.03;
/// Required margin of the grouped-prior classifier over the lasso.
const MARGIN_OVER_LASSO: f64 = 0.05;
/// Largest allowed spread between method means at n = 80 on independent
/// features.
const LARGE_N_SPREAD: f64 = 0.05;
/// Within-group covariance entries must exceed group-to-noise entries by
/// this factor.
const COVARIANCE_CONTRAST: f64 = 2.0;
/// Allowed gap between chain means and grid-quadrature means on the toy.
const QUADRATURE_TOL: f64 = 0.02;
/// Bound on pseudo-inverse and determinant deviations of a basis.
const BASIS_ALGEBRA_TOL: f64 = 1e-10;
/// Bound on the spread of the prior-kernel difference across points.
const KERNEL_CONSTANCY_TOL: f64 = 1e-8;
/// Convergence tolerance the baseline fits are held to.
const KKT_TOL: f64 = 1e-6;
/// Allowed disagreement between a converged fit and the Newton oracle.
const NEWTON_TOL: f64 = 1e-5;
/// Wall-clock budget for the grouped-recovery suite.
const GROUP_SUITE_BUDGET_S: f64 = 900.0;
/// Wall-clock budget for the quadrature check.
const QUADRATURE_BUDGET_S: f64 = 60.0;

struct Timed<T> {
    value: T,
    seconds: f64,
}

fn timed_suite(suite: Suite, label: &str) -> Timed<ExperimentOutcome> {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let value = run_experiment(suite, &cfg).unwrap_or_else(|e| panic!("{label} suite failed: {e}"));
    Timed {
        value,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn visualization() -> &'static Timed<ExperimentOutcome> {
    static CELL: OnceLock<Timed<ExperimentOutcome>> = OnceLock::new();
    CELL.get_or_init(|| timed_suite(Suite::Visualization, "visualization"))
}

fn correlated_sweep() -> &'static Timed<ExperimentOutcome> {
    static CELL: OnceLock<Timed<ExperimentOutcome>> = OnceLock::new();
    CELL.get_or_init(|| timed_suite(Suite::SynthCorrelatedSweep, "correlated sweep"))
}

fn independent_sweep() -> &'static Timed<ExperimentOutcome> {
    static CELL: OnceLock<Timed<ExperimentOutcome>> = OnceLock::new();
    CELL.get_or_init(|| timed_suite(Suite::SynthIndependentSweep, "independent sweep"))
}

fn mean_error(reports: &[ExperimentReport], method: Method, n_train: usize) -> f64 {
    reports
        .iter()
        .find(|r| r.method == method && r.n_train == n_train)
        .map(|r| r.mean_error)
        .unwrap_or_else(|| panic!("no report for {method} at n_train {n_train}"))
}

fn conclude(name: &str, check: impl FnOnce() -> Result<String, String>) {
    match check() {
        Ok(detail) => println!("acceptance {name}: PASS ({detail})"),
        Err(detail) => {
            println!("acceptance {name}: FAIL ({detail})");
            panic!("acceptance {name} failed: {detail}");
        }
    }
}

#[test]
fn criterion_1_grouped_recovery_beats_the_convex_baselines() {
    conclude("1 grouped recovery margins", || {
        let vis = visualization();
        let reports = &vis.value.reports;
        let eig = mean_error(reports, Method::EigenNet, 80);
        let enet = mean_error(reports, Method::ElasticNet, 80);
        let lasso = mean_error(reports, Method::Lasso, 80);
        if eig > enet - MARGIN_OVER_ENET {
            return Err(format!(
                "eigennet {eig:.4} not {MARGIN_OVER_ENET} below enet {enet:.4}"
            ));
        }
        if eig > lasso - MARGIN_OVER_LASSO {
            return Err(format!(
                "eigennet {eig:.4} not {MARGIN_OVER_LASSO} below lasso {lasso:.4}"
            ));
        }
        if vis.seconds > GROUP_SUITE_BUDGET_S {
            return Err(format!(
                "suite took {:.0}s, budget {GROUP_SUITE_BUDGET_S}s",
                vis.seconds
            ));
        }
        Ok(format!(
            "eigennet {eig:.4}, enet {enet:.4}, lasso {lasso:.4}, {:.0}s",
            vis.seconds
        ))
    });
}

#[test]
fn criterion_2_correlated_sweep_stays_lowest_at_every_size() {
    conclude("2 correlated sweep dominance", || {
        let reports = &correlated_sweep().value.reports;
        let mut smallest_margin = f64::INFINITY;
        for n in (10..=80).step_by(10) {
            let eig = mean_error(reports, Method::EigenNet, n);
            for other in [Method::Lasso, Method::ElasticNet, Method::BayesianLasso] {
                let err = mean_error(reports, other, n);
                if eig >= err {
                    return Err(format!(
                        "at n={n} eigennet {eig:.4} is not strictly below {other} {err:.4}"
                    ));
                }
                smallest_margin = smallest_margin.min(err - eig);
            }
        }
        Ok(format!(
            "strictly lowest at n=10..80, smallest margin {smallest_margin:.4}"
        ))
    });
}

#[test]
fn criterion_3_independent_sweep_wins_small_and_levels_off_large() {
    conclude("3 independent sweep profile", || {
        let reports = &independent_sweep().value.reports;
        for n in [10, 20, 30] {
            let eig = mean_error(reports, Method::EigenNet, n);
            for other in [Method::Lasso, Method::ElasticNet, Method::BayesianLasso] {
                let err = mean_error(reports, other, n);
                if eig > err {
                    return Err(format!(
                        "at n={n} eigennet {eig:.4} is above {other} {err:.4}"
                    ));
                }
            }
        }
        let at_80: Vec<f64> = Method::ALL
            .iter()
            .map(|&m| mean_error(reports, m, 80))
            .collect();
        let spread = at_80.iter().cloned().fold(f64::MIN, f64::max)
            - at_80.iter().cloned().fold(f64::MAX, f64::min);
        if spread > LARGE_N_SPREAD {
            return Err(format!(
                "means at n=80 spread {spread:.4} > {LARGE_N_SPREAD}: {at_80:?}"
            ));
        }
        Ok(format!("lowest at n=10..30, spread at n=80 is {spread:.4}"))
    });
}

#[test]
fn criterion_4_posterior_covariance_exposes_the_correlated_groups() {
    conclude("4 covariance group contrast", || {
        let vis = visualization();
        let art = vis
            .value
            .visualization
            .as_ref()
            .ok_or_else(|| "visualization artifacts missing".to_string())?;
        let cov = &art.cov_eigennet;

        let mut within_sum = 0.0;
        let mut within_count = 0usize;
        for group in [0..4usize, 4..8] {
            for i in group.clone() {
                for j in group.clone() {
                    if i != j {
                        within_sum += cov[(i, j)].abs();
                        within_count += 1;
                    }
                }
            }
        }
        let mut cross_sum = 0.0;
        let mut cross_count = 0usize;
        for i in 0..8 {
            for j in 8..cov.ncols() {
                cross_sum += cov[(i, j)].abs();
                cross_count += 1;
            }
        }
        let within = within_sum / within_count as f64;
        let cross = cross_sum / cross_count as f64;
        if within < COVARIANCE_CONTRAST * cross {
            return Err(format!(
                "within-group mean {within:.3e} below {COVARIANCE_CONTRAST}x group-to-noise mean {cross:.3e}"
            ));
        }
        Ok(format!(
            "within-group {within:.3e} vs group-to-noise {cross:.3e}, ratio {:.1}",
            within / cross
        ))
    });
}

#[test]
fn criterion_5_toy_posterior_means_match_grid_quadrature() {
    conclude("5 quadrature agreement", || {
        let start = Instant::now();
        let (lambda1, lambda2, sigma_b) = (1.0, 1.0, 1.5);

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 20;
        let xs = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let labels = DVector::from_fn(n, |i, _| {
            let prob = log_sigmoid(1.2 * xs[(i, 0)] + 0.4).exp();
            if rng.random::<f64>() < prob {
                1.0
            } else {
                -1.0
            }
        });
        let data = Dataset::new(xs, labels).unwrap();
        let basis = eigendecompose(&data).map_err(|e| e.to_string())?;
        let z = project_data(data.features(), &basis).map_err(|e| e.to_string())?;
        let y = data.labels().clone();

        let log_post = |a: f64, b: f64| -> f64 {
            let mut lp =
                -lambda1 * a.abs() - 0.5 * lambda2 * a * a - b * b / (2.0 * sigma_b * sigma_b);
            for i in 0..n {
                lp += log_sigmoid(y[i] * (a * z[(i, 0)] + b));
            }
            lp
        };

        let mut target = |state: &ModelState| log_post(state.alpha[0], state.b);
        let init = ModelState {
            alpha: dvector![0.0],
            beta: DVector::zeros(0),
            s: DVector::zeros(0),
            b: 0.0,
        };
        let cfg = SamplerConfig {
            seed: 27,
            ..SamplerConfig::default()
        };
        let chain =
            run_chain_with_target(&mut target, init, &cfg, None).map_err(|e| e.to_string())?;
        let count = chain.samples.len() as f64;
        let chain_a: f64 = chain.samples.iter().map(|s| s.state.alpha[0]).sum::<f64>() / count;
        let chain_b: f64 = chain.samples.iter().map(|s| s.state.b).sum::<f64>() / count;

        // midpoint rule on a 400x400 grid spanning six prior standard
        // deviations in each coordinate
        let grid = 400;
        let (a_half, b_half) = (6.0, 6.0 * sigma_b);
        let mut values = Vec::with_capacity(grid * grid);
        let mut peak = f64::NEG_INFINITY;
        for i in 0..grid {
            let a = -a_half + (i as f64 + 0.5) * (2.0 * a_half / grid as f64);
            for j in 0..grid {
                let b = -b_half + (j as f64 + 0.5) * (2.0 * b_half / grid as f64);
                let lp = log_post(a, b);
                peak = peak.max(lp);
                values.push((a, b, lp));
            }
        }
        let mut mass = 0.0;
        let mut quad_a = 0.0;
        let mut quad_b = 0.0;
        for (a, b, lp) in values {
            let density = (lp - peak).exp();
            mass += density;
            quad_a += a * density;
            quad_b += b * density;
        }
        quad_a /= mass;
        quad_b /= mass;

        let gap_a = (chain_a - quad_a).abs();
        let gap_b = (chain_b - quad_b).abs();
        let seconds = start.elapsed().as_secs_f64();
        if gap_a > QUADRATURE_TOL || gap_b > QUADRATURE_TOL {
            return Err(format!(
                "chain ({chain_a:.4}, {chain_b:.4}) vs quadrature ({quad_a:.4}, {quad_b:.4})"
            ));
        }
        if seconds > QUADRATURE_BUDGET_S {
            return Err(format!("took {seconds:.1}s, budget {QUADRATURE_BUDGET_S}s"));
        }
        Ok(format!(
            "gaps ({gap_a:.4}, {gap_b:.4}) within {QUADRATURE_TOL}, {seconds:.1}s"
        ))
    });
}

#[test]
fn criterion_6_reparameterization_algebra_holds_on_tall_bases() {
    conclude("6 tall-basis algebra", || {
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let mut worst_pinv = 0.0f64;
        let mut worst_det = 0.0f64;
        let mut worst_kernel = 0.0f64;
        for case in 0..20 {
            let n = 4 + case % 9;
            let p = 15 + (case * 7) % 26;
            let features = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let labels = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
            let data = Dataset::new(features, labels).unwrap();
            let basis = eigendecompose(&data).map_err(|e| e.to_string())?;
            assert!(basis.p() > data.n(), "case {case} basis is not tall");
            let check =
                verify_change_of_variables(&basis, 100, &mut rng).map_err(|e| e.to_string())?;
            if check.max_pinv_deviation > BASIS_ALGEBRA_TOL
                || check.max_det_deviation > BASIS_ALGEBRA_TOL
                || check.max_kernel_deviation > KERNEL_CONSTANCY_TOL
            {
                return Err(format!(
                    "case {case} (n={n}, p={p}): pinv {:.2e}, det {:.2e}, kernel {:.2e}",
                    check.max_pinv_deviation, check.max_det_deviation, check.max_kernel_deviation
                ));
            }
            worst_pinv = worst_pinv.max(check.max_pinv_deviation);
            worst_det = worst_det.max(check.max_det_deviation);
            worst_kernel = worst_kernel.max(check.max_kernel_deviation);
        }
        Ok(format!(
            "20 bases, worst pinv {worst_pinv:.2e}, det {worst_det:.2e}, kernel {worst_kernel:.2e}"
        ))
    });
}

fn sigmoid(t: f64) -> f64 {
    log_sigmoid(t).exp()
}

fn penalized_instance(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let truth = DVector::from_fn(p, |j, _| match j {
        0 => 1.5,
        1 => -1.0,
        2 => 0.75,
        _ => 0.0,
    });
    let labels = DVector::from_fn(n, |i, _| {
        let margin = features.row(i).transpose().dot(&truth) + 0.25;
        if rng.random::<f64>() < sigmoid(margin) {
            1.0
        } else {
            -1.0
        }
    });
    Dataset::new(features, labels).unwrap()
}

/// A dataset no hyperplane can separate: the leading points appear twice
/// with both labels, so the unpenalized likelihood has a finite maximizer.
fn contradictory_pairs_instance(pairs: usize, extra: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 2 * pairs + extra;
    let mut features = DMatrix::zeros(n, p);
    let mut labels = DVector::zeros(n);
    for k in 0..pairs {
        let point = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        features.row_mut(2 * k).copy_from(&point.transpose());
        features.row_mut(2 * k + 1).copy_from(&point.transpose());
        labels[2 * k] = 1.0;
        labels[2 * k + 1] = -1.0;
    }
    for i in 2 * pairs..n {
        for j in 0..p {
            features[(i, j)] = rng.sample(StandardNormal);
        }
        labels[i] = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
    }
    Dataset::new(features, labels).unwrap()
}

/// Gradient of the smooth objective part (logistic loss plus the ridge
/// term) with respect to `(w, b)`.
fn smooth_gradient(data: &Dataset, w: &DVector<f64>, b: f64, lambda2: f64) -> (DVector<f64>, f64) {
    let mut gw = DVector::zeros(data.p());
    let mut gb = 0.0;
    for i in 0..data.n() {
        let xi = data.features().row(i);
        let margin = xi.transpose().dot(w) + b;
        let y = data.labels()[i];
        let r = -y * sigmoid(-y * margin);
        gw += xi.transpose() * r;
        gb += r;
    }
    gw.axpy(2.0 * lambda2, w, 1.0);
    (gw, gb)
}

/// Largest violation of the stationarity conditions at the reported fit.
fn stationarity_violation(data: &Dataset, fit: &PenalizedFit, lambda1: f64, lambda2: f64) -> f64 {
    let (gw, gb) = smooth_gradient(data, &fit.w, fit.b, lambda2);
    let mut worst = gb.abs();
    for j in 0..fit.w.len() {
        let v = if fit.w[j] != 0.0 {
            (gw[j] + lambda1 * fit.w[j].signum()).abs()
        } else {
            (gw[j].abs() - lambda1).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Damped Newton with halving line search on the smooth objective; the
/// independent second-order reference the first-order fits must match.
fn damped_newton(data: &Dataset, lambda2: f64) -> (DVector<f64>, f64) {
    let p = data.p();
    let mut w = DVector::zeros(p);
    let mut b = 0.0;
    let objective = |w: &DVector<f64>, b: f64| -> f64 {
        let mut f = lambda2 * w.norm_squared();
        for i in 0..data.n() {
            let margin = data.features().row(i).transpose().dot(w) + b;
            f -= log_sigmoid(data.labels()[i] * margin);
        }
        f
    };
    for _ in 0..200 {
        let (gw, gb) = smooth_gradient(data, &w, b, lambda2);
        let mut grad = DVector::zeros(p + 1);
        grad.rows_mut(0, p).copy_from(&gw);
        grad[p] = gb;
        if grad.amax() < 1e-11 {
            break;
        }
        let mut hess = DMatrix::zeros(p + 1, p + 1);
        for i in 0..data.n() {
            let xi = data.features().row(i);
            let margin = xi.transpose().dot(&w) + b;
            let mu = sigmoid(margin);
            let weight = mu * (1.0 - mu);
            for a in 0..p {
                for c in 0..p {
                    hess[(a, c)] += weight * xi[a] * xi[c];
                }
                hess[(a, p)] += weight * xi[a];
                hess[(p, a)] += weight * xi[a];
            }
            hess[(p, p)] += weight;
        }
        for a in 0..p {
            hess[(a, a)] += 2.0 * lambda2;
        }
        let step = hess
            .lu()
            .solve(&grad)
            .expect("newton system should be solvable");
        let f0 = objective(&w, b);
        let mut scale = 1.0;
        loop {
            let w_try = &w - step.rows(0, p) * scale;
            let b_try = b - step[p] * scale;
            if objective(&w_try, b_try) <= f0 || scale < 1e-8 {
                w = w_try;
                b = b_try;
                break;
            }
            scale *= 0.5;
        }
    }
    (w, b)
}

#[test]
fn criterion_7_baseline_fits_are_stationary_and_match_newton() {
    conclude("7 baseline stationarity and oracle agreement", || {
        let cases: [(usize, usize, f64, f64); 20] = [
            (30, 5, 0.05, 0.3),
            (45, 8, 0.5, 1.0),
            (50, 12, 0.2, 0.5),
            (40, 4, 1.0, 2.0),
            (36, 10, 0.1, 0.8),
            (28, 6, 0.7, 0.1),
            (50, 16, 0.3, 1.5),
            (44, 14, 0.05, 0.05),
            (38, 7, 2.0, 3.0),
            (32, 9, 0.4, 0.6),
            (15, 30, 0.5, 1.0),
            (12, 40, 0.3, 0.7),
            (20, 50, 0.8, 1.2),
            (10, 25, 1.0, 2.0),
            (18, 35, 0.2, 0.4),
            (25, 48, 0.6, 0.9),
            (14, 22, 0.9, 1.1),
            (22, 44, 0.15, 0.25),
            (16, 50, 1.5, 2.5),
            (11, 33, 0.35, 0.55),
        ];
        let residual_bound = 10.0 * KKT_TOL;
        let mut worst_residual = 0.0f64;
        let mut worst_gap = 0.0f64;

        for (case, &(n, p, lambda1, lambda2)) in cases.iter().enumerate() {
            let data = penalized_instance(n, p, 1000 + case as u64);
            let (pos, neg) = data.class_counts();
            if pos == 0 || neg == 0 {
                return Err(format!("case {case} drew a single-class sample"));
            }

            for (label, fit) in [
                ("lasso", fit_l1_logistic(&data, lambda1, KKT_TOL, 400_000)),
                (
                    "enet",
                    fit_elastic_logistic(&data, lambda1, lambda2, KKT_TOL, 400_000),
                ),
            ] {
                let fit = fit.map_err(|e| e.to_string())?;
                if !fit.converged {
                    return Err(format!("case {case} {label} did not converge"));
                }
                let l2 = if label == "enet" { lambda2 } else { 0.0 };
                let res = stationarity_violation(&data, &fit, lambda1, l2);
                if res > residual_bound {
                    return Err(format!(
                        "case {case} {label} (n={n}, p={p}) residual {res:.2e} > {residual_bound:.0e}"
                    ));
                }
                worst_residual = worst_residual.max(res);
            }

            let ridge = fit_elastic_logistic(&data, 0.0, lambda2, 1e-8, 400_000)
                .map_err(|e| e.to_string())?;
            let (nw, nb) = damped_newton(&data, lambda2);
            let gap = (&nw - &ridge.w).amax().max((nb - ridge.b).abs());
            if gap > NEWTON_TOL {
                return Err(format!(
                    "case {case} ridge fit is {gap:.2e} from the Newton solution"
                ));
            }
            worst_gap = worst_gap.max(gap);
        }

        // random tall samples can still be separable, where the unpenalized
        // maximum likelihood runs off to infinity; contradictory pairs pin
        // it down, making the zero-penalty comparison meaningful
        let blocked = contradictory_pairs_instance(8, 12, 5, 2024);
        let mle = fit_l1_logistic(&blocked, 0.0, 1e-8, 400_000).map_err(|e| e.to_string())?;
        if !mle.converged {
            return Err("unpenalized fit did not converge".into());
        }
        let (nw, nb) = damped_newton(&blocked, 0.0);
        let gap = (&nw - &mle.w).amax().max((nb - mle.b).abs());
        if gap > NEWTON_TOL {
            return Err(format!(
                "unpenalized fit is {gap:.2e} from the Newton solution"
            ));
        }
        worst_gap = worst_gap.max(gap);
        Ok(format!(
            "20 instances, worst residual {worst_residual:.2e}, worst oracle gap {worst_gap:.2e}"
        ))
    });
}

#[test]
fn criterion_8_structural_invariants_hold() {
    conclude("8 structural invariants", || {
        let mut rng = ChaCha8Rng::seed_from_u64(808);

        // flipping an eigenvector's sign together with its coefficients
        // must leave the posterior untouched
        let data = penalized_instance(14, 6, 514);
        let basis = eigendecompose(&data).map_err(|e| e.to_string())?;
        let hp = HyperParams::new(0.7, 1.3, 2.1).map_err(|e| e.to_string())?;
        let m = basis.m();
        let state = ModelState {
            alpha: DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)),
            beta: DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal)),
            s: DVector::from_fn(m, |_, _| rng.random::<f64>() * 2.0),
            b: 0.4,
        };
        let reference = log_posterior(&state, &basis, &data, &hp).map_err(|e| e.to_string())?;
        for j in 0..m {
            let mut vectors = basis.vectors().clone();
            vectors.column_mut(j).neg_mut();
            let flipped_basis =
                EigenBasis::new(vectors, basis.values().clone(), basis.mean().clone())
                    .map_err(|e| e.to_string())?;
            let mut flipped = state.clone();
            flipped.alpha[j] = -flipped.alpha[j];
            flipped.beta[j] = -flipped.beta[j];
            let lp =
                log_posterior(&flipped, &flipped_basis, &data, &hp).map_err(|e| e.to_string())?;
            if (lp - reference).abs() > 1e-12 * reference.abs().max(1.0) {
                return Err(format!(
                    "sign flip of eigenvector {j} moved the posterior by {:.2e}",
                    (lp - reference).abs()
                ));
            }
        }

        // every produced basis must have orthonormal columns
        for (n, p) in [(30, 8), (8, 30), (15, 15), (5, 40)] {
            let sample = penalized_instance(n, p, 900 + n as u64);
            let basis = eigendecompose(&sample).map_err(|e| e.to_string())?;
            let gram = basis.vectors().transpose() * basis.vectors();
            let dev = (&gram - DMatrix::identity(basis.m(), basis.m()))
                .abs()
                .max();
            if dev > 1e-10 {
                return Err(format!(
                    "basis for n={n}, p={p} off orthonormal by {dev:.2e}"
                ));
            }
        }

        // with the identity basis, zero scales, and a constant spectrum the
        // composite penalty must collapse to the elastic net
        let (p_id, c, lambda1, lambda2) = (7usize, 0.6, 0.8, 1.7);
        let identity_basis = EigenBasis::new(
            DMatrix::identity(p_id, p_id),
            DVector::from_element(p_id, c),
            DVector::zeros(p_id),
        )
        .map_err(|e| e.to_string())?;
        let enet_hp = HyperParams::new(lambda1, lambda2, 1.0).map_err(|e| e.to_string())?;
        let zero_s = DVector::zeros(p_id);
        for _ in 0..20 {
            let w = DVector::from_fn(p_id, |_, _| rng.sample::<f64, _>(StandardNormal));
            let composite = composite_regularizer(&w, &zero_s, &identity_basis, &enet_hp)
                .map_err(|e| e.to_string())?;
            let l1: f64 = w.iter().map(|v| v.abs()).sum();
            let expected = lambda1 * l1 + 0.5 * lambda2 * c * p_id as f64 * w.norm_squared();
            if (composite - expected).abs() > 1e-12 * expected.abs().max(1.0) {
                return Err(format!(
                    "composite penalty {composite:.12} differs from elastic net {expected:.12}"
                ));
            }
        }

        // a real run must keep every retained scale non-negative and must
        // replay bit-identically under its seed
        let train = generate_correlated(&SynthSpec::two_group_default(40), 9)
            .map_err(|e| e.to_string())?
            .train;
        let chain_basis = eigendecompose(&train).map_err(|e| e.to_string())?;
        let chain_hp = HyperParams::new(1.0, 1.0, 1.0).map_err(|e| e.to_string())?;
        let cfg = SamplerConfig {
            seed: 23,
            ..SamplerConfig::desk_scale()
        };
        let first = run_chain(&train, &chain_basis, &chain_hp, &cfg).map_err(|e| e.to_string())?;
        if let Some(bad) = first
            .samples
            .iter()
            .find(|smp| smp.state.s.iter().any(|&v| v < 0.0))
        {
            return Err(format!(
                "retained state at sweep {} carries a negative scale",
                bad.iteration
            ));
        }
        let second = run_chain(&train, &chain_basis, &chain_hp, &cfg).map_err(|e| e.to_string())?;
        if first.samples != second.samples
            || first.best_log_density != second.best_log_density
            || first.best_state != second.best_state
        {
            return Err("identical seeds produced different chains".into());
        }
        let replay_a = generate_correlated(&SynthSpec::two_group_default(40), 77)
            .map_err(|e| e.to_string())?;
        let replay_b = generate_correlated(&SynthSpec::two_group_default(40), 77)
            .map_err(|e| e.to_string())?;
        if replay_a.train != replay_b.train || replay_a.truth.w != replay_b.truth.w {
            return Err("identical seeds produced different synthetic data".into());
        }

        Ok("sign invariance, orthonormality, elastic-net reduction, \
            non-negative scales, seed determinism"
            .to_string())
    });
}
