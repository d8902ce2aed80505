use jams_core::burnin::{
    bfgs_minimize, find_modes, merge_modes, run_burnin, sample_starts, BfgsConfig, BurninConfig,
    ModeSearchConfig, OptimizerResult,
};
use jams_core::augmented_target::ModeSet;
use jams_core::numerics::{Matrix, SpdMatrix};
use jams_core::targets::{gaussian_mixture_target, TargetDensity};
use jams_core::Sequential;
use proptest::prelude::*;

struct DoubleWell;

impl TargetDensity for DoubleWell {
    fn dim(&self) -> usize {
        1
    }
    fn log_pdf(&self, x: &[f64]) -> f64 {
        ((-(x[0] - 1.0).powi(2)).exp() + (-(x[0] + 1.0).powi(2)).exp()).ln()
    }
    fn name(&self) -> &str {
        "double_well"
    }
}

/// `N(μ, diag(v))`.
struct DiagGaussian {
    mu: Vec<f64>,
    var: Vec<f64>,
}

impl TargetDensity for DiagGaussian {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    fn log_pdf(&self, x: &[f64]) -> f64 {
        -0.5 * x.iter().zip(&self.mu).zip(&self.var).map(|((x, m), v)| (x - m).powi(2) / v).sum::<f64>()
    }
    fn grad_log_pdf(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().zip(&self.mu).zip(&self.var).map(|((x, m), v)| -(x - m) / v).collect())
    }
    fn name(&self) -> &str {
        "diag_gaussian"
    }
}

#[test]
fn start_points_follow_the_box() {
    let mut rng = jams_core::rng::stream(1, &[]);
    let bounds = [(-2.0, 2.0), (0.0, 10.0), (3.0, 3.0)];
    let n = 100_000;
    let s = sample_starts(&bounds, n, &mut rng);
    assert_eq!(s.len(), n);
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mean = s.iter().map(|p| p[j]).sum::<f64>() / n as f64;
        let se = (hi - lo) / 12f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 0.5 * (lo + hi)).abs() <= 3.0 * se, "coordinate {j}: {mean}");
        assert!(s.iter().all(|p| p[j] >= lo && p[j] <= hi));
    }
    assert!(s.iter().all(|p| p[2] == 3.0));
    assert!(sample_starts(&bounds, 0, &mut rng).is_empty());
}

#[test]
fn double_well_never_settles_on_the_saddle() {
    let cfg = BfgsConfig::default();
    for x0 in [1e-3, -1e-3, 0.05, -0.2, 1e-7] {
        let r = bfgs_minimize(&DoubleWell, &[x0], &cfg);
        if r.converged {
            assert!(r.x_star[0].abs() > 0.9, "start {x0} gave {:?}", r.x_star);
        }
    }
    // started exactly on the stationary point the gradient is zero but the Hessian is not PD
    let r = bfgs_minimize(&DoubleWell, &[0.0], &cfg);
    assert!(!r.converged);
}

#[test]
fn quadratic_converges_to_its_centre() {
    let t = DiagGaussian { mu: vec![0.5, -1.0, 2.0], var: vec![1.0, 0.25, 4.0] };
    let r = bfgs_minimize(&t, &[3.0, 3.0, -3.0], &BfgsConfig::default());
    assert!(r.converged);
    for (a, b) in r.x_star.iter().zip(&t.mu) {
        assert!((a - b).abs() < 1e-8);
    }
    for j in 0..3 {
        let d = 1.0 / t.var[j];
        assert!((r.hessian[(j, j)] - d).abs() < 1e-3 * d);
    }
}

#[test]
fn ten_dimensional_mixture_has_two_modes() {
    let t = gaussian_mixture_target(10);
    let cfg = ModeSearchConfig {
        n_starts: 300,
        bounds: vec![(-2.0, 2.0); 10],
        ..ModeSearchConfig::default()
    };
    let rep = find_modes(&t, &cfg, 5, &Sequential).unwrap();
    assert_eq!(rep.modes.len(), 2);
    for mu in rep.modes.locations() {
        let s = mu[0].signum();
        assert!(mu.iter().all(|v| (v - s).abs() < 1e-4), "{mu:?}");
    }
    assert_eq!(rep.evals_per_start.len(), 300);
}

fn candidate(x: Vec<f64>, f: f64) -> OptimizerResult {
    let d = x.len();
    OptimizerResult {
        hessian: Matrix::identity(d),
        x_star: x,
        f_star: f,
        grad_norm: 0.0,
        converged: true,
        iterations: 1,
        n_evals: 1,
    }
}

#[test]
fn merge_keeps_the_higher_representative_and_uses_strict_threshold() {
    let m = merge_modes(&[candidate(vec![0.0], 2.0), candidate(vec![0.5], 1.0)], 1.0).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m.mu(0), &[0.5]);
    // averaged squared distance exactly q
    let m = merge_modes(&[candidate(vec![0.0], 1.0), candidate(vec![1.0], 1.0)], 1.0).unwrap();
    assert_eq!(m.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merged_mode_count_ignores_candidate_order(
        clusters in prop::collection::vec(0usize..5, 3..30),
        jitter in prop::collection::vec(-0.2f64..0.2, 30),
        perm_seed in any::<u64>(),
    ) {
        // cluster centres 10 apart, jitter well below the threshold
        let cands: Vec<OptimizerResult> = clusters
            .iter()
            .zip(&jitter)
            .map(|(&c, &j)| candidate(vec![10.0 * c as f64 + j, 0.0], j))
            .collect();
        let base = merge_modes(&cands, 1.0).unwrap().len();
        let mut shuffled = cands.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut jams_core::rng::stream(perm_seed, &[]));
        prop_assert_eq!(merge_modes(&shuffled, 1.0).unwrap().len(), base);
        let mut distinct = clusters.clone();
        distinct.sort();
        distinct.dedup();
        prop_assert_eq!(base, distinct.len());
    }
}

fn single_mode(t: &DiagGaussian) -> ModeSet {
    let r = bfgs_minimize(t, &vec![0.0; t.dim()], &BfgsConfig::default());
    assert!(r.converged);
    merge_modes(&[r], 1.0).unwrap()
}

#[test]
fn hessian_start_is_exact_for_gaussians() {
    let t = DiagGaussian { mu: vec![1.0, 2.0, 3.0, 4.0], var: vec![0.5, 1.0, 2.0, 9.0] };
    let modes = single_mode(&t);
    let sigma0 = modes.hessian(0).inverse().unwrap();
    for j in 0..4 {
        assert!((sigma0.matrix()[(j, j)] - t.var[j]).abs() < 1e-4 * t.var[j]);
    }
}

#[test]
fn burnin_recovers_gaussian_covariance() {
    let var = vec![0.5, 1.0, 2.0, 4.0, 0.25];
    let t = DiagGaussian { mu: vec![1.0; 5], var: var.clone() };
    let modes = single_mode(&t);
    let rep = run_burnin(&t, &modes, &BurninConfig::default(), 17, &Sequential).unwrap();
    assert!(rep.converged);
    assert!(rep.covariance_rounds <= 6);
    assert!(rep.inhomogeneity_history.last().unwrap()[0] <= 1.1);
    let truth = SpdMatrix::from_diag(&var).unwrap();
    let b = jams_core::burnin::inhomogeneity_factor(&truth, &rep.sigma0[0]).unwrap();
    assert!(b < 1.1, "b against the truth {b}");
    for j in 0..5 {
        let s = rep.sigma0[0].matrix()[(j, j)];
        assert!((s - var[j]).abs() < 0.25 * var[j], "{j}: {s} vs {}", var[j]);
    }
    assert_eq!(rep.moments[0].n(), rep.steps_per_mode);
}

#[test]
fn mixture_burnin_uses_three_thousand_steps() {
    let t = gaussian_mixture_target(10);
    let cfg = ModeSearchConfig { n_starts: 50, bounds: vec![(-2.0, 2.0); 10], ..Default::default() };
    let modes = find_modes(&t, &cfg, 2, &Sequential).unwrap().modes;
    let rep = run_burnin(&t, &modes, &BurninConfig::default(), 2, &Sequential).unwrap();
    assert_eq!(rep.steps_per_mode, 3000);
    assert_eq!(rep.covariance_rounds, 1);
}

#[test]
fn burnin_is_reproducible() {
    let t = gaussian_mixture_target(4);
    let cfg = ModeSearchConfig { n_starts: 40, bounds: vec![(-2.0, 2.0); 4], ..Default::default() };
    let a = find_modes(&t, &cfg, 9, &Sequential).unwrap();
    let b = find_modes(&t, &cfg, 9, &Sequential).unwrap();
    assert_eq!(a, b);
    let ra = run_burnin(&t, &a.modes, &BurninConfig::default(), 9, &Sequential).unwrap();
    let rb = run_burnin(&t, &b.modes, &BurninConfig::default(), 9, &Sequential).unwrap();
    assert_eq!(ra, rb);
}
