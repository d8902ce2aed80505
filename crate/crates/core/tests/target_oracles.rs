use jams_core::numerics::fd_gradient;
use jams_core::numerics::special::log_sum_exp;
use jams_core::targets::{
    banana_t_mixture_target, gaussian_mixture_target, observation_probability, sensor_network_target,
    simulate_sensor_data, Observation, SensorData, SensorNetwork, TargetDensity, KOU_CENTERS,
};
use nalgebra::DVector;
use rand::Rng;
use statrs::distribution::{Continuous, MultivariateStudent};

const TRUTH: [[f64; 2]; 11] = [
    [0.15, 0.80], [0.10, 0.30], [0.30, 0.15], [0.80, 0.10], [0.55, 0.35], [0.35, 0.55],
    [0.80, 0.45], [0.85, 0.85], [0.60, 0.45], [0.35, 0.95], [0.45, 0.10],
];

fn sensor() -> SensorNetwork {
    sensor_network_target(simulate_sensor_data(&TRUTH, 29).unwrap())
}

fn check_gradient<T: TargetDensity>(t: &T, points: impl Iterator<Item = Vec<f64>>) {
    let mut checked = 0;
    for x in points {
        if !t.log_pdf(&x).is_finite() {
            continue;
        }
        let g = t.grad_log_pdf(&x).expect("analytic gradient");
        let fd = fd_gradient(|p| t.log_pdf(p), &x, 1e-6).unwrap();
        let scale = g.iter().chain(&fd).fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-4 * scale, "{}: {a} vs {b} at {x:?}", t.name());
        }
        checked += 1;
    }
    assert!(checked >= 90, "only {checked} finite points");
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut rng = jams_core::rng::stream(7, &[]);
    let gm = gaussian_mixture_target(5);
    check_gradient(&gm, (0..100).map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect()));
    let banana = banana_t_mixture_target(10);
    let centers = banana.centers();
    // near the components, where the gradient is informative
    check_gradient(
        &banana,
        (0..100).map(|k| centers[k % 20].iter().map(|c| c + rng.random_range(-0.3..0.3)).collect()),
    );
    let s = sensor();
    check_gradient(&s, (0..100).map(|_| (0..16).map(|_| rng.random_range(0.0..1.0)).collect()));
}

#[test]
fn mixture_value_at_narrow_mode() {
    let t = gaussian_mixture_target(2);
    let (s1, s2) = (0.5 * 0.02f64.sqrt(), 0.02f64.sqrt());
    let pi = std::f64::consts::PI;
    let expected = (0.5 / (2.0 * pi * s1) + 0.5 / (2.0 * pi * s2) * (-4.0 / s2).exp()).ln();
    assert!((t.log_pdf(&[-1.0, -1.0]) - expected).abs() < 1e-12);
}

#[test]
fn one_dimensional_mixture_integrates_to_one() {
    let t = gaussian_mixture_target(1);
    let (a, b, n) = (-6.0, 6.0, 200_000);
    let h = (b - a) / n as f64;
    let total: f64 = (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * t.log_pdf(&[a + k as f64 * h]).exp()
        })
        .sum::<f64>()
        * h;
    assert!((total - 1.0).abs() < 1e-6);
}

fn banana_t_oracle(dim: usize) -> MultivariateStudent<nalgebra::Dyn> {
    let mut scale = vec![0.0; dim * dim];
    for j in 0..dim {
        scale[j * dim + j] = if j == 0 { 100.0 } else { 1.0 };
    }
    MultivariateStudent::new(vec![0.0; dim], scale, 7.0).unwrap()
}

#[test]
fn banana_matches_independent_composition() {
    let d = 10;
    let t = banana_t_mixture_target(d);
    let f = banana_t_oracle(d);
    let phi = |w: &[f64], bent: usize| {
        let mut u = w.to_vec();
        u[bent] += 0.03 * w[0] * w[0] - 3.0;
        DVector::from_vec(u)
    };
    let mut rng = jams_core::rng::stream(3, &[]);
    for bent in [1, 3, 5, 7, 9] {
        let at_ridge: Vec<f64> = (0..d).map(|j| if j == bent { 3.0 } else { 0.0 }).collect();
        assert!((t.raw_banana_log_pdf(&at_ridge, bent) - f.ln_pdf(&DVector::zeros(d))).abs() < 1e-10);
        for _ in 0..20 {
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert!((t.raw_banana_log_pdf(&w, bent) - f.ln_pdf(&phi(&w, bent))).abs() < 1e-10);
        }
    }

    // whole mixture against a term-by-term sum
    let s = 20.0 / (d as f64).powf(0.25);
    let scale = 0.01 * (d as f64).sqrt();
    let centers = t.centers();
    for _ in 0..50 {
        let k = rng.random_range(0..20);
        let x: Vec<f64> = centers[k].iter().map(|c| c + rng.random_range(-0.5..0.5)).collect();
        let terms: Vec<f64> = centers
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let lw = 0.05f64.ln();
                if idx < 5 {
                    let bent = 2 * idx + 1;
                    let mut w: Vec<f64> = x.iter().zip(c).map(|(a, b)| s * (a - b)).collect();
                    w[bent] += 3.0;
                    lw + d as f64 * s.ln() + f.ln_pdf(&phi(&w, bent))
                } else {
                    let mut sh = vec![0.0; d * d];
                    (0..d).for_each(|j| sh[j * d + j] = scale);
                    let comp = MultivariateStudent::new(c.clone(), sh, 7.0).unwrap();
                    lw + comp.ln_pdf(&DVector::from_vec(x.clone()))
                }
            })
            .collect();
        let expected = log_sum_exp(&terms);
        assert!((t.log_pdf(&x) - expected).abs() < 1e-9 * expected.abs().max(1.0));
    }
    assert_eq!(centers[0][..2], KOU_CENTERS[0]);
    assert_eq!(centers[0][2..4], KOU_CENTERS[0]);
}

#[test]
fn sensor_posterior_is_the_pairwise_sum() {
    let t = sensor();
    let data = t.data();
    let mut rng = jams_core::rng::stream(11, &[]);
    for _ in 0..50 {
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let loc = |s: usize| if s < 8 { [x[2 * s], x[2 * s + 1]] } else { data.known_locations()[s - 8] };
        let mut expected = 0.0;
        let mut n_terms = 0;
        for i in 0..8 {
            for j in (i + 1)..11 {
                let (a, b) = (loc(i), loc(j));
                let r = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
                let p = (-r * r / (2.0 * 0.3 * 0.3)).exp();
                expected += match data.observations().iter().find(|o| o.i == i && o.j == j) {
                    Some(o) => p.ln() - (o.y - r).powi(2) / (2.0 * 0.02 * 0.02),
                    None => (1.0 - p).ln(),
                };
                n_terms += 1;
            }
        }
        assert_eq!(n_terms, 8 * 3 + 28);
        let got = t.log_pdf(&x);
        assert!((got - expected).abs() < 1e-9 * expected.abs().max(1.0), "{got} vs {expected}");
    }
}

#[test]
fn sensor_posterior_is_label_symmetric() {
    let t = sensor();
    let data = t.data();
    let perm = [3usize, 0, 7, 1, 6, 2, 5, 4];
    let relabel = |s: usize| if s < 8 { perm[s] } else { s };
    let obs: Vec<Observation> = data
        .observations()
        .iter()
        .map(|o| {
            let (a, b) = (relabel(o.i), relabel(o.j));
            Observation { i: a.min(b), j: a.max(b), y: o.y }
        })
        .collect();
    let permuted = sensor_network_target(SensorData::new(*data.known_locations(), obs).unwrap());
    let mut rng = jams_core::rng::stream(12, &[]);
    for _ in 0..20 {
        let x: Vec<f64> = (0..16).map(|_| rng.random_range(0.0..1.0)).collect();
        let mut y = vec![0.0; 16];
        for s in 0..8 {
            y[2 * perm[s]] = x[2 * s];
            y[2 * perm[s] + 1] = x[2 * s + 1];
        }
        assert!((t.log_pdf(&x) - permuted.log_pdf(&y)).abs() < 1e-9);
    }
}

#[test]
fn observation_probability_values() {
    assert_eq!(observation_probability(0.0), 1.0);
    let r = 0.3 * 2f64.sqrt();
    assert!((observation_probability(r) - (-1f64).exp()).abs() < 1e-15);
}
