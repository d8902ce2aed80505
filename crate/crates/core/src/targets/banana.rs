use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::TargetDensity;
use crate::numerics::special::{log_sum_exp, t_log_normalizer};

/// Mode centres of the 20-component bivariate mixture of Kou, Zhou & Wong
/// (2006). Externally sourced configuration data; lifted to dimension `d` by
/// coordinate-wise tiling `(x, y, x, y, ...)`.
pub const KOU_CENTERS: [[f64; 2]; 20] = [
    [2.18, 5.76],
    [8.67, 9.59],
    [4.24, 8.48],
    [8.41, 1.68],
    [3.93, 8.82],
    [3.25, 3.47],
    [1.70, 0.50],
    [4.59, 5.60],
    [6.91, 5.81],
    [6.87, 5.40],
    [5.41, 2.65],
    [2.70, 7.88],
    [4.98, 3.70],
    [1.14, 2.39],
    [8.33, 9.50],
    [4.93, 1.50],
    [1.83, 0.09],
    [2.26, 0.31],
    [5.54, 6.86],
    [1.69, 8.11],
];

const DOF: f64 = 7.0;
const BEND: f64 = 0.03;
const BANANA_VAR_FIRST: f64 = 100.0;
const N_BANANAS: usize = 5;
const WEIGHT: f64 = 0.05;

#[derive(Debug, Clone)]
enum Shape {
    /// t₇ with shape `scale · I`.
    T { scale: f64 },
    /// Banana with t tails; `bent` is the coordinate carrying `x_bent + b x₁² − 100b`.
    Banana { bent: usize },
}

#[derive(Debug, Clone)]
struct Component {
    center: Vec<f64>,
    shape: Shape,
}

/// Equal-weight mixture of five banana-shaped t₇ components and fifteen
/// isotropic t₇ components.
///
/// Every component has its mode at its centre. The banana density is
/// `s^d f(φ_b(s·(x − c) + m))` with `s = 20/d^{1/4}`, `f = t₇(0, diag(100, 1, …, 1))`,
/// `φ_b(w) = (w₁, …, w_bent + b w₁² − 100b, …)` and `m` the offset that puts the
/// banana's ridge maximum at the centre.
#[derive(Debug, Clone)]
pub struct BananaTMixture {
    dim: usize,
    stretch: f64,
    components: Vec<Component>,
    t_log_norm: f64,
    t_scale: f64,
}

impl BananaTMixture {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2 * N_BANANAS, "banana/t mixture needs d >= 10");
        let d = dim as f64;
        let t_scale = 0.01 * d.sqrt();
        let components = KOU_CENTERS
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let center: Vec<f64> = (0..dim).map(|j| c[j % 2]).collect();
                let shape = if idx < N_BANANAS {
                    Shape::Banana { bent: 2 * idx + 1 }
                } else {
                    Shape::T { scale: t_scale }
                };
                Component { center, shape }
            })
            .collect();
        Self {
            dim,
            stretch: 20.0 / d.powf(0.25),
            components,
            t_log_norm: t_log_normalizer(DOF, dim),
            t_scale,
        }
    }

    pub fn centers(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.center.clone()).collect()
    }

    pub fn t_shape_scale(&self) -> f64 {
        self.t_scale
    }

    pub fn weights(&self) -> Vec<f64> {
        vec![WEIGHT; self.components.len()]
    }

    /// `s = 20 / d^{1/4}`.
    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn bend(&self) -> f64 {
        BEND
    }

    /// Log density of the unshifted, unstretched banana `f ∘ φ_b` with the bent
    /// formula on coordinate `bent`.
    pub fn raw_banana_log_pdf(&self, w: &[f64], bent: usize) -> f64 {
        let u = self.phi(w, bent);
        self.banana_t_log_pdf(&u)
    }

    fn phi(&self, w: &[f64], bent: usize) -> Vec<f64> {
        let mut u = w.to_vec();
        u[bent] += BEND * w[0] * w[0] - 100.0 * BEND;
        u
    }

    fn banana_t_log_pdf(&self, u: &[f64]) -> f64 {
        let q = u[0] * u[0] / BANANA_VAR_FIRST + u[1..].iter().map(|v| v * v).sum::<f64>();
        self.t_log_norm - 0.5 * BANANA_VAR_FIRST.ln() - 0.5 * (DOF + self.dim as f64) * (q / DOF).ln_1p()
    }

    /// Banana argument `w = s (x − c) + m`, where `m` moves the mode to `c`.
    fn banana_w(&self, x: &[f64], center: &[f64], bent: usize) -> Vec<f64> {
        let mut w: Vec<f64> = x
            .iter()
            .zip(center)
            .map(|(a, b)| self.stretch * (a - b))
            .collect();
        w[bent] += 100.0 * BEND;
        w
    }

    fn component_log_pdf(&self, c: &Component, x: &[f64]) -> f64 {
        match c.shape {
            Shape::T { scale } => {
                let q: f64 = x
                    .iter()
                    .zip(&c.center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / scale;
                self.t_log_norm - 0.5 * self.dim as f64 * scale.ln()
                    - 0.5 * (DOF + self.dim as f64) * (q / DOF).ln_1p()
            }
            Shape::Banana { bent } => {
                let w = self.banana_w(x, &c.center, bent);
                self.dim as f64 * self.stretch.ln() + self.raw_banana_log_pdf(&w, bent)
            }
        }
    }

    fn component_grad(&self, c: &Component, x: &[f64]) -> Vec<f64> {
        let dp = DOF + self.dim as f64;
        match c.shape {
            Shape::T { scale } => {
                let diff: Vec<f64> = x.iter().zip(&c.center).map(|(a, b)| a - b).collect();
                let q = diff.iter().map(|v| v * v).sum::<f64>() / scale;
                let k = -dp / (DOF + q) / scale;
                diff.into_iter().map(|v| k * v).collect()
            }
            Shape::Banana { bent } => {
                let w = self.banana_w(x, &c.center, bent);
                let u = self.phi(&w, bent);
                let q = u[0] * u[0] / BANANA_VAR_FIRST + u[1..].iter().map(|v| v * v).sum::<f64>();
                let k = -dp / (DOF + q);
                let mut g: Vec<f64> = u.iter().map(|v| k * v).collect();
                g[0] /= BANANA_VAR_FIRST;
                // chain rule through φ_b: ∂u_bent/∂w₁ = 2 b w₁
                g[0] += g[bent] * 2.0 * BEND * w[0];
                g.iter_mut().for_each(|v| *v *= self.stretch);
                g
            }
        }
    }

    fn terms(&self, x: &[f64]) -> Vec<f64> {
        let lw = WEIGHT.ln();
        self.components
            .iter()
            .map(|c| lw + self.component_log_pdf(c, x))
            .collect()
    }

    /// Exact mixture mean. A banana component's mean sits `100 b ν/(ν−2) / s`
    /// below its centre along the bent coordinate.
    pub fn true_mean(&self) -> Vec<f64> {
        let shift = 100.0 * BEND * DOF / (DOF - 2.0) / self.stretch;
        let mut mean = vec![0.0; self.dim];
        for c in &self.components {
            for (m, v) in mean.iter_mut().zip(&c.center) {
                *m += WEIGHT * v;
            }
            if let Shape::Banana { bent } = c.shape {
                mean[bent] -= WEIGHT * shift;
            }
        }
        mean
    }
}

impl TargetDensity for BananaTMixture {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_pdf(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.terms(x))
    }

    fn grad_log_pdf(&self, x: &[f64]) -> Option<Vec<f64>> {
        let terms = self.terms(x);
        let lse = log_sum_exp(&terms);
        let mut grad = vec![0.0; self.dim];
        for (c, t) in self.components.iter().zip(&terms) {
            let r = (t - lse).exp();
            if r < 1e-300 {
                continue;
            }
            for (g, v) in grad.iter_mut().zip(self.component_grad(c, x)) {
                *g += r * v;
            }
        }
        Some(grad)
    }

    fn name(&self) -> &str {
        "banana_t"
    }
}

pub fn banana_t_mixture_target(dim: usize) -> BananaTMixture {
    BananaTMixture::new(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configuration_values() {
        let t = banana_t_mixture_target(10);
        assert!(t.weights().iter().all(|&w| w == 0.05));
        assert!((t.t_shape_scale() - 0.01 * 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(t.centers().len(), 20);
        assert_eq!(t.centers()[1][..4], [8.67, 9.59, 8.67, 9.59]);
    }

    #[test]
    fn centers_are_axis_local_maxima() {
        let t = banana_t_mixture_target(10);
        for c in t.centers() {
            let f0 = t.log_pdf(&c);
            for j in 0..10 {
                for h in [1e-3, -1e-3] {
                    let mut p = c.clone();
                    p[j] += h;
                    assert!(t.log_pdf(&p) < f0);
                }
            }
        }
    }
}
