//! Diophantine frequencies and the small-divisor equation `𝔏_ω u = v − ⟨v⟩`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fourier::{FourierError, FourierMap};

/// Divisors `|k·ω|` below this value are treated as exact resonances.
pub const RESONANCE_TOL: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohomologyError {
    #[error("divisor collision: |k·ω| = {value:.3e} at k = {k:?}")]
    Resonance { k: Vec<i64>, value: f64 },
    #[error("invalid Diophantine data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

pub type Result<T> = std::result::Result<T, CohomologyError>;

/// Frequency vector together with a scanned Diophantine certificate `(γ, τ)`.
///
/// The inequality `|k·ω| ≥ γ/|k|₁^τ` is verified for `0 < |k|₁ ≤ scan_limit`
/// only; nothing is claimed beyond the scanned set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiophantineParams {
    pub omega: Vec<f64>,
    pub gamma: f64,
    pub tau: f64,
    pub scan_limit: usize,
}

impl DiophantineParams {
    /// Scans the divisors and takes the largest admissible `γ` for the given `τ`.
    pub fn scan(omega: &[f64], tau: f64, scan_limit: usize) -> Result<Self> {
        let (gamma, _) = estimate_gamma(omega, tau, scan_limit)?;
        Self::new(omega, gamma, tau, scan_limit)
    }

    /// Validates user supplied `(γ, τ)` against a divisor scan.
    pub fn new(omega: &[f64], gamma: f64, tau: f64, scan_limit: usize) -> Result<Self> {
        let d = omega.len();
        if d < 2 {
            return Err(CohomologyError::Invalid("the torus dimension must be at least 2".into()));
        }
        if !(gamma > 0.0) {
            return Err(CohomologyError::Invalid(format!("gamma = {gamma} is not positive")));
        }
        if tau < (d - 1) as f64 {
            return Err(CohomologyError::Invalid(format!("tau = {tau} is below d - 1 = {}", d - 1)));
        }
        let (best, k) = estimate_gamma(omega, tau, scan_limit)?;
        if best < gamma * (1.0 - 1e-12) {
            return Err(CohomologyError::Invalid(format!(
                "gamma = {gamma} violated at k = {k:?} (scan minimum {best})"
            )));
        }
        Ok(Self { omega: omega.to_vec(), gamma, tau, scan_limit })
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Certificate for `s ω`: every divisor scales by `|s|`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            omega: self.omega.iter().map(|w| s * w).collect(),
            gamma: self.gamma * s.abs(),
            tau: self.tau,
            scan_limit: self.scan_limit,
        }
    }
}

#[derive(Debug, Clone)]
struct ScanState {
    best: f64,
    best_k: Vec<i64>,
    resonance: Option<(f64, Vec<i64>)>,
}

impl ScanState {
    fn empty() -> Self {
        Self { best: f64::INFINITY, best_k: Vec::new(), resonance: None }
    }

    fn visit(&mut self, k: &[i64], omega: &[f64], tau: f64) {
        let kw: f64 = k.iter().zip(omega).map(|(&a, &b)| a as f64 * b).sum::<f64>().abs();
        let norm1: i64 = k.iter().map(|x| x.abs()).sum();
        if kw < RESONANCE_TOL {
            let replace = match &self.resonance {
                None => true,
                Some((_, rk)) => key(k) < key(rk),
            };
            if replace {
                self.resonance = Some((kw, k.to_vec()));
            }
            return;
        }
        let value = kw * (norm1 as f64).powf(tau);
        if value < self.best || (value == self.best && key(k) < key(&self.best_k)) {
            self.best = value;
            self.best_k = k.to_vec();
        }
    }

    fn merge(mut self, other: Self) -> Self {
        if other.best < self.best || (other.best == self.best && key(&other.best_k) < key(&self.best_k)) {
            self.best = other.best;
            self.best_k = other.best_k;
        }
        self.resonance = match (self.resonance, other.resonance) {
            (Some(a), Some(b)) => Some(if key(&b.1) < key(&a.1) { b } else { a }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn key(k: &[i64]) -> (i64, Vec<i64>) {
    (k.iter().map(|x| x.abs()).sum(), k.to_vec())
}

/// Visits every `k` with `|k|₁ ≤ budget` whose first nonzero entry is positive
/// (when `positive` is set), one representative per pair `±k`.
fn enumerate(prefix: &mut Vec<i64>, dims_left: usize, budget: i64, positive: bool, f: &mut dyn FnMut(&[i64])) {
    if dims_left == 0 {
        if !positive {
            f(prefix);
        }
        return;
    }
    let lo = if positive { 0 } else { -budget };
    for v in lo..=budget {
        prefix.push(v);
        enumerate(prefix, dims_left - 1, budget - v.abs(), positive && v == 0, f);
        prefix.pop();
    }
}

/// Finite-scan lower bound `γ = min_{0<|k|₁≤L} |k·ω| |k|₁^τ` and its minimiser.
pub fn estimate_gamma(omega: &[f64], tau: f64, scan_limit: usize) -> Result<(f64, Vec<i64>)> {
    let d = omega.len();
    if d == 0 || scan_limit == 0 {
        return Err(CohomologyError::Invalid("empty frequency or zero scan limit".into()));
    }
    let limit = scan_limit as i64;
    let state = (0..=limit)
        .into_par_iter()
        .map(|first| {
            let mut st = ScanState::empty();
            let mut prefix = vec![first];
            enumerate(&mut prefix, d - 1, limit - first, first == 0, &mut |k| st.visit(k, omega, tau));
            st
        })
        .reduce(ScanState::empty, ScanState::merge);
    if let Some((value, k)) = state.resonance {
        return Err(CohomologyError::Resonance { k, value });
    }
    Ok((state.best, state.best_k))
}

/// Zero-average solution `u` of `𝔏_ω u = v − ⟨v⟩`: `û_k = −v̂_k/(2πi k·ω)`, `û_0 = 0`.
pub fn solve_cohomological(v: &FourierMap, dio: &DiophantineParams) -> Result<FourierMap> {
    if v.torus_dim() != dio.dim() {
        return Err(CohomologyError::Invalid(format!(
            "map on a {}-torus with a frequency of length {}",
            v.torus_dim(),
            dio.dim()
        )));
    }
    let mut collision = None;
    for m in 0..v.num_modes() {
        let k = v.mode(m);
        if k.iter().all(|&x| x == 0) {
            continue;
        }
        let kw: f64 = k.iter().zip(&dio.omega).map(|(&a, &b)| a as f64 * b).sum();
        if kw.abs() < RESONANCE_TOL {
            collision = Some(CohomologyError::Resonance { k, value: kw.abs() });
            break;
        }
    }
    if let Some(err) = collision {
        return Err(err);
    }
    Ok(v.multiply_modes(|k| {
        if k.iter().all(|&x| x == 0) {
            return Complex64::new(0.0, 0.0);
        }
        let kw: f64 = k.iter().zip(&dio.omega).map(|(&a, &b)| a as f64 * b).sum();
        Complex64::new(0.0, 1.0 / (2.0 * PI * kw))
    }))
}

/// Constant `c_R(δ)` with `‖ℛ_ω v‖_{ρ−δ} ≤ c_R/(γδ^τ) ‖v‖_ρ` on maps with `|k_i| ≤ band_limit`.
///
/// In the majorant norm the solution operator is diagonal, so its norm is the
/// largest multiplier. Bounding `1/|k·ω| ≤ |k|₁^τ/γ` gives
/// `c_R = δ^τ max_{1≤m≤d·N} m^τ e^{−2πmδ} / (2π)`.
pub fn russmann_constant(tau: f64, delta: f64, d: usize, band_limit: usize) -> f64 {
    let top = d * band_limit;
    (1..=top)
        .map(|m| (m as f64).powf(tau) * (-2.0 * PI * m as f64 * delta).exp())
        .fold(0.0, f64::max)
        * delta.powf(tau)
        / (2.0 * PI)
}

/// Band-independent bound `sup_{δ,m} (mδ)^τ e^{−2πmδ}/(2π) = (τ/(2πe))^τ/(2π)`.
pub fn russmann_uniform(tau: f64) -> f64 {
    (tau / (2.0 * PI * std::f64::consts::E)).powf(tau) / (2.0 * PI)
}

/// Constant computed from the actual divisors of `ω` inside a band box.
pub fn russmann_constant_sharp(dio: &DiophantineParams, delta: f64, bands: &[usize]) -> f64 {
    let probe = FourierMap::zeros(bands, &crate::fourier::dealias_grid(bands), 1, 1).expect("valid bands");
    let mut worst = 0.0_f64;
    for m in 0..probe.num_modes() {
        let k = probe.mode(m);
        let k1: i64 = k.iter().map(|x| x.abs()).sum();
        if k1 == 0 {
            continue;
        }
        let kw: f64 = k.iter().zip(&dio.omega).map(|(&a, &b)| a as f64 * b).sum::<f64>().abs();
        worst = worst.max((-2.0 * PI * k1 as f64 * delta).exp() / (2.0 * PI * kw));
    }
    dio.gamma * delta.powf(dio.tau) * worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::dealias_grid;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn golden() -> DiophantineParams {
        DiophantineParams::scan(&[1.0, GOLDEN], 1.0, 200).unwrap()
    }

    fn pruned_minimum(omega: [f64; 2], tau: f64, limit: i64) -> f64 {
        let mut best = f64::INFINITY;
        for k2 in -limit..=limit {
            let centre = (-(k2 as f64) * omega[1] / omega[0]).round() as i64;
            for k1 in centre - 1..=centre + 1 {
                let k1n = k1.abs() + k2.abs();
                if k1n == 0 || k1n > limit {
                    continue;
                }
                let kw = (k1 as f64 * omega[0] + k2 as f64 * omega[1]).abs();
                best = best.min(kw * (k1n as f64).powf(tau));
            }
        }
        best
    }

    #[test]
    fn golden_frequency_scan_agrees_with_pruned_rescan() {
        let omega = [1.0, GOLDEN];
        let (gamma, k) = estimate_gamma(&omega, 1.0, 2000).unwrap();
        assert!(gamma <= 1.5 * omega[0]);
        assert_eq!(k, vec![1, 0]);
        assert_eq!(gamma, 1.0);
        assert!((pruned_minimum(omega, 1.0, 2000) - gamma).abs() < 1e-12);
        let far = pruned_minimum(omega, 1.0, 10_000);
        assert_eq!(far, gamma);
    }

    #[test]
    fn rational_frequency_resonates() {
        match estimate_gamma(&[1.0, 2.0], 1.0, 10) {
            Err(CohomologyError::Resonance { k, .. }) => assert_eq!(k, vec![2, -1]),
            other => panic!("expected a resonance, got {other:?}"),
        }
    }

    #[test]
    fn one_dimensional_frequencies_are_rejected() {
        assert!(DiophantineParams::new(&[1.0], 1.0, 0.0, 10).is_err());
        assert!(DiophantineParams::new(&[1.0, GOLDEN], 1.0, 0.5, 10).is_err());
        assert!(DiophantineParams::new(&[1.0, GOLDEN], 10.0, 1.0, 10).is_err());
    }

    #[test]
    fn constant_right_hand_side_gives_zero() {
        let v = FourierMap::constant(&[4, 4], &[16, 16], &DMatrix::from_element(1, 1, 2.0)).unwrap();
        assert_eq!(solve_cohomological(&v, &golden()).unwrap().max_coeff(), 0.0);
    }

    #[test]
    fn cosine_right_hand_side() {
        let dio = golden();
        let v = FourierMap::from_fn(&[3, 3], &[16, 16], 1, 1, |t| {
            DMatrix::from_element(1, 1, (2.0 * PI * t[0]).cos())
        })
        .unwrap();
        let u = solve_cohomological(&v, &dio).unwrap();
        let expected = FourierMap::from_fn(&[3, 3], &[16, 16], 1, 1, |t| {
            DMatrix::from_element(1, 1, -(2.0 * PI * t[0]).sin() / (2.0 * PI * dio.omega[0]))
        })
        .unwrap();
        assert!(u.sub(&expected).unwrap().max_coeff() < 1e-15);
        let back = u.lie_derivative(&dio.omega).unwrap();
        assert!(back.sub(&v).unwrap().max_coeff() < 1e-15);
    }

    #[test]
    fn single_mode_ratio_is_below_the_constant() {
        let dio = golden();
        let (rho, delta) = (0.2, 0.05);
        for k in [[1i64, 0], [1, -1], [3, -2], [5, -3], [0, 4]] {
            let bands = [6usize, 6];
            let mut v = FourierMap::zeros(&bands, &dealias_grid(&bands), 1, 1).unwrap();
            v.set_coeff(&k, 0, 0, Complex64::new(1.0, 0.0));
            let u = solve_cohomological(&v, &dio).unwrap();
            let ratio = u.norm(rho - delta).unwrap() / v.norm(rho).unwrap();
            let c_r = russmann_constant(dio.tau, delta, 2, 6);
            assert!(ratio <= c_r / (dio.gamma * delta.powf(dio.tau)) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn loss_factor_is_monotone_in_delta() {
        let mut previous = f64::INFINITY;
        for i in 1..200 {
            let delta = i as f64 * 1e-3;
            let factor = russmann_constant(1.0, delta, 2, 16) / delta;
            assert!(factor <= previous);
            previous = factor;
            assert!(russmann_constant(1.0, delta, 2, 16) <= russmann_uniform(1.0) * (1.0 + 1e-12));
        }
        let wide: Vec<f64> = (0..20).map(|i| russmann_constant(1.0, 0.2 + 0.05 * i as f64, 2, 16)).collect();
        assert!(wide.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sharp_constant_is_below_the_band_constant() {
        let dio = golden();
        for delta in [0.004, 0.02, 0.1] {
            assert!(russmann_constant_sharp(&dio, delta, &[16, 16]) <= russmann_constant(1.0, delta, 2, 16) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn scaled_certificate() {
        let dio = golden();
        let s = dio.scaled(1.3);
        let (g, _) = estimate_gamma(&s.omega, 1.0, 200).unwrap();
        assert!((g - s.gamma).abs() < 1e-12);
    }

    fn arb_v() -> impl Strategy<Value = FourierMap> {
        proptest::collection::vec(-1.0f64..1.0, 2 * 81).prop_map(|v| {
            let bands = [4usize, 4];
            FourierMap::from_coefficients(&bands, &dealias_grid(&bands), 1, 1, |k, _, _| {
                let idx = ((k[0] + 4) * 9 + (k[1] + 4)) as usize;
                Complex64::new(v[2 * idx], v[2 * idx + 1]) * (-0.3 * (k[0].abs() + k[1].abs()) as f64).exp()
            })
            .unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn solution_is_unique_up_to_constants(v in arb_v(), c in -5.0f64..5.0) {
            let dio = golden();
            let u1 = solve_cohomological(&v, &dio).unwrap();
            let u2 = solve_cohomological(&v.add_constant(&DMatrix::from_element(1, 1, c)).unwrap(), &dio).unwrap();
            prop_assert_eq!(u1, u2);
        }

        #[test]
        fn solver_inverts_the_lie_derivative(v in arb_v()) {
            let dio = golden();
            let centred = v.zero_average();
            let u = solve_cohomological(&v, &dio).unwrap();
            prop_assert!(u.average()[(0, 0)] == 0.0);
            prop_assert!(u.lie_derivative(&dio.omega).unwrap().sub(&centred).unwrap().max_coeff() <= 1e-12);
            let w = solve_cohomological(&v.lie_derivative(&dio.omega).unwrap(), &dio).unwrap();
            prop_assert!(w.sub(&centred).unwrap().max_coeff() <= 1e-12);
        }

        #[test]
        fn russmann_inequality_holds(v in arb_v(), rho in 0.05f64..0.3, frac in 0.05f64..0.9) {
            let dio = golden();
            let delta = rho * frac;
            let u = solve_cohomological(&v, &dio).unwrap();
            let c_r = russmann_constant(dio.tau, delta, 2, 4);
            let lhs = u.norm(rho - delta).unwrap();
            let rhs = c_r / (dio.gamma * delta.powf(dio.tau)) * v.norm(rho).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }
}
