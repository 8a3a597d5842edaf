//! Wigner function W(α) = (2/π) tr(ρ D(α) (−1)^n̂ D(−α)).
//!
//! The displaced parity has closed-form Fock matrix elements; for m ≥ n
//!
//! ```text
//! ⟨m|D(α)(−1)^n̂ D(α)†|n⟩ = (−1)ⁿ √(n!/m!) (2α)^{m−n} e^{−2|α|²} Lₙ^{(m−n)}(4|α|²)
//! ```
//!
//! and the remaining elements follow from Hermiticity.

use std::f64::consts::FRAC_2_PI;

use super::{DensityMatrix, C64};

/// Evaluates the Wigner function of one state at many points.
#[derive(Clone, Debug)]
pub struct WignerEvaluator {
    dim: usize,
    /// ρ_{n,n+k} stored per diagonal offset k.
    diagonals: Vec<Vec<C64>>,
    /// √(n!/(n+k)!) per offset k.
    ratios: Vec<Vec<f64>>,
}

impl WignerEvaluator {
    pub fn new(state: &DensityMatrix) -> Self {
        let dim = state.dim();
        let rho = state.entries();
        let mut diagonals = Vec::with_capacity(dim);
        let mut ratios = Vec::with_capacity(dim);
        for k in 0..dim {
            diagonals.push((0..dim - k).map(|n| rho[(n, n + k)]).collect());
            ratios.push(
                (0..dim - k)
                    .map(|n| {
                        let prod: f64 = (n + 1..=n + k).map(|j| j as f64).product();
                        1.0 / prod.sqrt()
                    })
                    .collect(),
            );
        }
        Self {
            dim,
            diagonals,
            ratios,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// W at the phase-space point `alpha`.
    pub fn eval(&self, alpha: C64) -> f64 {
        let r2 = alpha.norm_sqr();
        let x = 4.0 * r2;
        let two_alpha = alpha * 2.0;
        let mut pow = C64::new(1.0, 0.0);
        let mut total = 0.0;
        for k in 0..self.dim {
            if k > 0 {
                pow *= two_alpha;
            }
            let diag = &self.diagonals[k];
            let ratio = &self.ratios[k];
            let kf = k as f64;
            // generalized Laguerre recurrence in n at fixed order k
            let mut l_prev = 0.0;
            let mut l_cur = 1.0;
            let mut sum = C64::new(0.0, 0.0);
            for n in 0..diag.len() {
                if n == 1 {
                    l_prev = l_cur;
                    l_cur = 1.0 + kf - x;
                } else if n > 1 {
                    let nf = (n - 1) as f64;
                    let next = ((2.0 * nf + 1.0 + kf - x) * l_cur - (nf + kf) * l_prev) / (nf + 1.0);
                    l_prev = l_cur;
                    l_cur = next;
                }
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sum += diag[n] * (sign * ratio[n] * l_cur);
            }
            // tr(ρM) picks ρ_{n,m} M_{m,n}; off-diagonals come in conjugate pairs
            let contrib = (sum * pow).re;
            total += if k == 0 { contrib } else { 2.0 * contrib };
        }
        FRAC_2_PI * (-2.0 * r2).exp() * total
    }
}

/// Wigner function of `state` at `alpha`, in [−2/π, 2/π].
pub fn wigner(state: &DensityMatrix, alpha: C64) -> f64 {
    WignerEvaluator::new(state).eval(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{make_cat, make_coherent, make_snap_state, DEFAULT_DIM};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    /// D(α) by a scaled-and-squared Taylor series of α a† − α* a on a larger space.
    fn displacement(alpha: C64, dim: usize) -> DMatrix<C64> {
        let mut gen = DMatrix::<C64>::zeros(dim, dim);
        for n in 1..dim {
            let s = (n as f64).sqrt();
            gen[(n, n - 1)] = alpha * s;
            gen[(n - 1, n)] = -alpha.conj() * s;
        }
        let scale = 10;
        let g = gen * C64::new(1.0 / f64::powi(2.0, scale), 0.0);
        let mut out = DMatrix::<C64>::identity(dim, dim);
        let mut term = DMatrix::<C64>::identity(dim, dim);
        for j in 1..30 {
            term = &term * &g * C64::new(1.0 / j as f64, 0.0);
            out += &term;
        }
        for _ in 0..scale {
            out = &out * &out;
        }
        out
    }

    /// Brute-force (2/π) tr(ρ D(α) P D(α)†) embedded in a 3×-larger space.
    fn brute_force(state: &DensityMatrix, alpha: C64) -> f64 {
        let big = 3 * state.dim();
        let mut rho = DMatrix::<C64>::zeros(big, big);
        rho.view_mut((0, 0), (state.dim(), state.dim()))
            .copy_from(state.entries());
        let d = displacement(alpha, big);
        let parity = DMatrix::from_fn(big, big, |i, j| {
            if i == j {
                C64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let op = &d * parity * d.adjoint();
        (2.0 / PI) * (rho * op).trace().re
    }

    #[test]
    fn vacuum_at_origin() {
        let w = wigner(&DensityMatrix::vacuum(DEFAULT_DIM), C64::new(0.0, 0.0));
        assert!((w - 2.0 / PI).abs() < 1e-12);
    }

    #[test]
    fn coherent_gaussian() {
        for a0 in [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 1.0)] {
            let rho = make_coherent(a0, DEFAULT_DIM).unwrap().to_density();
            let ev = WignerEvaluator::new(&rho);
            for (re, im) in [(0.0, 0.0), (0.3, -0.7), (1.0, 1.0), (-2.5, 1.5), (2.9, 2.9)] {
                let a = C64::new(re, im);
                let expect = (2.0 / PI) * (-2.0 * (a - a0).norm_sqr()).exp();
                assert!((ev.eval(a) - expect).abs() < 1e-6, "a0 {a0} a {a}");
            }
        }
    }

    #[test]
    fn matches_brute_force_on_structured_states() {
        let dim = 12;
        let cat = make_cat(C64::new(1.1, 0.4), 2, dim).unwrap().to_density();
        let snap = make_snap_state(C64::new(0.9, 0.0), &[PI, PI], dim)
            .unwrap()
            .to_density();
        for rho in [cat, snap] {
            let ev = WignerEvaluator::new(&rho);
            for (re, im) in [(0.0, 0.0), (0.4, -0.2), (-1.1, 0.7), (1.5, 1.2)] {
                let a = C64::new(re, im);
                let bf = brute_force(&rho, a);
                assert!((ev.eval(a) - bf).abs() < 1e-9, "point {a}: {} vs {bf}", ev.eval(a));
            }
        }
    }

    #[test]
    fn cat_origin_has_even_parity() {
        let rho = make_cat(C64::new(1.4, 0.0), 2, DEFAULT_DIM).unwrap().to_density();
        assert!((wigner(&rho, C64::new(0.0, 0.0)) - 2.0 / PI).abs() < 1e-8);
    }

    #[test]
    fn stays_in_range_far_out() {
        let rho = make_cat(C64::new(2.0, 0.0), 4, DEFAULT_DIM).unwrap().to_density();
        let ev = WignerEvaluator::new(&rho);
        for (re, im) in [(6.0, 6.0), (-8.0, 3.0), (0.0, 9.0)] {
            let w = ev.eval(C64::new(re, im));
            assert!(w.is_finite() && w.abs() <= 2.0 / PI);
            assert!(w.abs() < 1e-12);
        }
    }
}
