//! Iteration that fixes the average of a conserved quantity by moving the
//! frequency along a ray `Θ = {s ω_* : 1 < s < σ_ω}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cohomology::{solve_cohomological, DiophantineParams};
use crate::fourier::{FourierError, FourierMap};
use crate::frames::{FrameBundle, FrameError, TorusCandidate};
use crate::linalg::{checked_inverse, row_sum_norm};
use crate::solver::{
    check_hypotheses, frak_c, frame_diagnostics, maybe_refine, DivergenceGuard, HypothesisMargin, KamRun,
    NewtonSchedule, RunStatus, SolverError, StepDiagnostics, COMPATIBILITY_TOL,
};
use crate::system::Conserved;

/// Frequencies `s ω_*` with `1 < s < σ_ω`; the certificate of `ω_*` scales with `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRay {
    pub dio_star: DiophantineParams,
    pub sigma_omega: f64,
    pub scale: f64,
}

impl FrequencyRay {
    pub fn new(dio_star: DiophantineParams, sigma_omega: f64, scale: f64) -> Result<Self, SolverError> {
        if !(sigma_omega > 1.0) {
            return Err(SolverError::InvalidSchedule(format!("sigma_omega = {sigma_omega} must exceed 1")));
        }
        let ray = Self { dio_star, sigma_omega, scale };
        if !(ray.margin() > 0.0) {
            return Err(SolverError::Hypothesis {
                name: "frequency_ray".into(),
                detail: format!("scale {scale} outside (1, {sigma_omega})"),
            });
        }
        Ok(ray)
    }

    /// Ray through `ω` with `ω` at the geometric midpoint `s = √σ_ω`.
    pub fn through(dio: &DiophantineParams, sigma_omega: f64) -> Result<Self, SolverError> {
        let s = sigma_omega.sqrt();
        Self::new(dio.scaled(1.0 / s), sigma_omega, s)
    }

    pub fn omega_star(&self) -> &[f64] {
        &self.dio_star.omega
    }

    pub fn omega(&self) -> Vec<f64> {
        self.dio().omega
    }

    /// Certificate of the current frequency.
    pub fn dio(&self) -> DiophantineParams {
        self.dio_star.scaled(self.scale)
    }

    /// `dist(ω, ∂Θ) = |ω_*| min(s − 1, σ_ω − s)`.
    pub fn margin(&self) -> f64 {
        let norm = self.omega_star().iter().fold(0.0_f64, |m, w| m.max(w.abs()));
        norm * (self.scale - 1.0).min(self.sigma_omega - self.scale)
    }

    pub fn rescaled(&self, factor: f64) -> Self {
        Self { dio_star: self.dio_star.clone(), sigma_omega: self.sigma_omega, scale: self.scale * factor }
    }
}

/// `E_c = (E, E^ω)` with `E^ω = ⟨c∘K⟩ − c₀`.
#[derive(Debug, Clone)]
pub struct TotalError {
    pub e: FourierMap,
    pub e_omega: f64,
    pub c0: f64,
}

impl TotalError {
    pub fn of(cand: &TorusCandidate, c: Conserved, c0: f64) -> Result<Self, SolverError> {
        let e = cand.invariance_error()?;
        let avg = cand.conserved_map(c)?.average()[(0, 0)];
        Ok(Self { e, e_omega: avg - c0, c0 })
    }

    /// `max(‖E‖_ρ, |E^ω|)`.
    pub fn norm(&self, rho: f64) -> Result<f64, FourierError> {
        Ok(self.e.norm(rho)?.max(self.e_omega.abs()))
    }
}

/// Solution of the extended triangular system.
#[derive(Debug, Clone)]
pub struct IsoSolution {
    pub xi_l: FourierMap,
    pub xi_n: FourierMap,
    pub xi_n0: DMatrix<f64>,
    pub xi_omega: f64,
    pub residual: f64,
}

fn omega_hat(omega: &[f64], n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, 1);
    for (i, w) in omega.iter().enumerate() {
        out[(i, 0)] = *w;
    }
    out
}

/// Solves `𝔏ξ^L + Tξ^N + ω̂ξ^ω = η^L`, `𝔏ξ^N = η^N`, `⟨T̂ξ^N⟩ = η^ω`.
#[allow(clippy::too_many_arguments)]
pub fn solve_triangular_iso(
    eta_l: &FourierMap,
    eta_n: &FourierMap,
    eta_omega: f64,
    t: &FourierMap,
    t_hat: &FourierMap,
    dio: &DiophantineParams,
    xi_l0: &DMatrix<f64>,
) -> Result<IsoSolution, SolverError> {
    let n = t.rows();
    let scale = eta_l.norm(0.0)?.max(eta_n.norm(0.0)?).max(eta_omega.abs()).max(1.0);
    let avg_n = row_sum_norm(&eta_n.average());
    if avg_n > COMPATIBILITY_TOL * scale {
        return Err(SolverError::Compatibility { value: avg_n, tolerance: COMPATIBILITY_TOL * scale });
    }
    let w = omega_hat(&dio.omega, n);
    let mut avg_tc = DMatrix::zeros(n + 1, n + 1);
    avg_tc.view_mut((0, 0), (n, n)).copy_from(&t.average());
    avg_tc.view_mut((0, n), (n, 1)).copy_from(&w);
    avg_tc.view_mut((n, 0), (1, n)).copy_from(&t_hat.average());
    let inv = checked_inverse(&avg_tc).map_err(|e| SolverError::Frame(FrameError::SingularTorsion(e)))?;

    let bands = eta_l.bands();
    let grid = eta_l.grid();
    let r = solve_cohomological(eta_n, dio)?;
    let top = eta_l.sub(&t.mul(&r)?.with_bands(bands, grid)?)?.average();
    let bottom = eta_omega - t_hat.mul(&r)?.average()[(0, 0)];
    let mut rhs = DMatrix::zeros(n + 1, 1);
    rhs.view_mut((0, 0), (n, 1)).copy_from(&top);
    rhs[(n, 0)] = bottom;
    let sol = inv * rhs;
    let xi_n0 = sol.rows(0, n).into_owned();
    let xi_omega = sol[(n, 0)];
    let xi_n = r.add_constant(&xi_n0)?;
    let forced = eta_l.sub(&t.mul(&xi_n)?.with_bands(bands, grid)?)?.add_constant(&(-&w * xi_omega))?;
    let xi_l = solve_cohomological(&forced, dio)?.add_constant(xi_l0)?;

    let res_top = t
        .mul(&xi_n)?
        .with_bands(bands, grid)?
        .add(&xi_l.lie_derivative(&dio.omega)?)?
        .add_constant(&(&w * xi_omega))?
        .sub(eta_l)?
        .norm(0.0)?;
    let res_bottom = xi_n.lie_derivative(&dio.omega)?.sub(eta_n)?.norm(0.0)?;
    let res_scalar = (t_hat.mul(&xi_n)?.average()[(0, 0)] - eta_omega).abs();
    Ok(IsoSolution { xi_l, xi_n, xi_n0, xi_omega, residual: res_top.max(res_bottom).max(res_scalar) })
}

#[derive(Debug, Clone)]
pub struct IsoStep {
    pub candidate: TorusCandidate,
    pub ray: FrequencyRay,
    pub frames: FrameBundle,
    pub solution: IsoSolution,
    pub delta_k: FourierMap,
    pub diagnostics: StepDiagnostics,
}

/// One step correcting both `K` and the scale of `ω`.
#[allow(clippy::too_many_arguments)]
pub fn newton_step_iso(
    cand: &TorusCandidate,
    ray: &FrequencyRay,
    c: Conserved,
    c0: f64,
    schedule: &NewtonSchedule,
    frak_c: f64,
    iteration: usize,
    rho: f64,
    delta: f64,
) -> Result<IsoStep, SolverError> {
    let frames = FrameBundle::build(cand, Some(c))?;
    let ext = frames.extended.as_ref().expect("conserved quantity requested");
    let e_omega = ext.c_avg - c0;
    let mut diag = frame_diagnostics(iteration, rho, delta, &frames, cand)?;
    diag.error_omega = e_omega.abs();
    diag.avg_t_inverse_norm = frames.avg_tc_inverse().map(|m| row_sum_norm(&m)).unwrap_or(f64::INFINITY);
    let combined = diag.error_before.max(e_omega.abs());
    diag.hypotheses.push(HypothesisMargin::less_than("error_over_delta", combined / delta, frak_c));
    diag.hypotheses.push(HypothesisMargin::less_than("frequency_ray", 0.0, ray.margin()));
    check_hypotheses(&diag.hypotheses, schedule.enforce_hypotheses)?;

    let zero = DMatrix::zeros(cand.n(), 1);
    let sol = solve_triangular_iso(&frames.eta_l, &frames.eta_n, -e_omega, &frames.t, &ext.t_hat, &cand.dio, &zero)?;
    let factor = 1.0 - sol.xi_omega;
    if !(factor > 1.0 / ray.sigma_omega && factor < ray.sigma_omega) {
        return Err(SolverError::Hypothesis {
            name: "frequency_ray".into(),
            detail: format!("frequency factor {factor} outside (1/sigma, sigma)"),
        });
    }
    let next_ray = ray.rescaled(factor);
    let margin = next_ray.margin();
    if !(margin > 0.0) {
        return Err(SolverError::Hypothesis {
            name: "frequency_ray".into(),
            detail: format!("updated frequency leaves the ray (margin {margin:.3e})"),
        });
    }
    let delta_k = frames
        .l
        .mul(&sol.xi_l)?
        .add(&frames.n.mul(&sol.xi_n)?)?
        .with_bands(cand.bands(), cand.grid())?;
    let mut next = cand.with_k(cand.k.add(&delta_k)?, rho - 3.0 * delta);
    next.dio = next_ray.dio();
    let distance = next.domain_distance(next.rho);
    diag.hypotheses.push(HypothesisMargin::less_than("domain_escape", 0.0, distance));
    if !(distance > 0.0) {
        return Err(SolverError::Frame(FrameError::DomainEscape(distance)));
    }
    diag.error_after = TotalError::of(&next, c, c0)?.norm(rho - 2.0 * delta)?;
    diag.correction = delta_k.norm(rho - 2.0 * delta)?;
    diag.xi_l_average = row_sum_norm(&sol.xi_l.average());
    diag.solve_residual = sol.residual;
    diag.xi_omega = sol.xi_omega;
    Ok(IsoStep { candidate: next, ray: next_ray, frames, solution: sol, delta_k, diagnostics: diag })
}

/// Result of [`iterate_kam_iso`].
#[derive(Debug, Clone)]
pub struct IsoRun {
    pub run: KamRun,
    pub conserved: Conserved,
    pub c0: f64,
    pub c_final: f64,
    pub omega_initial: Vec<f64>,
    pub ray: FrequencyRay,
    pub rays: Vec<FrequencyRay>,
}

impl IsoRun {
    pub fn omega_final(&self) -> Vec<f64> {
        self.ray.omega()
    }
}

/// Runs [`newton_step_iso`] until `max(‖E‖_{ρ_s}, |E^ω|) ≤ stop_tol`.
pub fn iterate_kam_iso(
    cand: &TorusCandidate,
    ray: &FrequencyRay,
    c: Conserved,
    c0: f64,
    schedule: &NewtonSchedule,
) -> Result<IsoRun, SolverError> {
    schedule.validate()?;
    cand.system.check_conserved(c).map_err(FrameError::from)?;
    let mut current = cand.with_k(cand.k.clone(), schedule.rho0);
    current.dio = ray.dio();
    let fc = frak_c(&current, schedule)?;
    let mut ray = ray.clone();
    let mut out = IsoRun {
        run: KamRun {
            status: RunStatus::IterationCap,
            failure: None,
            candidate: current.clone(),
            final_error: f64::NAN,
            steps: 0,
            log: Vec::new(),
            history: vec![current.clone()],
            frak_c: fc,
        },
        conserved: c,
        c0,
        c_final: f64::NAN,
        omega_initial: ray.omega(),
        ray: ray.clone(),
        rays: vec![ray.clone()],
    };
    let mut guard = DivergenceGuard::default();
    for s in 0..=schedule.max_iters {
        let rho = schedule.rho(s);
        let total = TotalError::of(&current, c, c0)?;
        let err = total.norm(rho)?;
        out.run.final_error = err;
        out.run.candidate = current.clone();
        out.run.steps = s;
        out.c_final = total.e_omega + c0;
        out.ray = ray.clone();
        if err <= schedule.stop_tol {
            out.run.status = RunStatus::Converged;
            return Ok(out);
        }
        if guard.record(err) {
            out.run.status = RunStatus::Diverged;
            out.run.failure = Some(SolverError::Divergence(s));
            return Ok(out);
        }
        if s == schedule.max_iters {
            break;
        }
        current = maybe_refine(current, &total.e, rho, schedule.refine_bands)?;
        match newton_step_iso(&current, &ray, c, c0, schedule, fc, s, rho, schedule.delta(s)) {
            Ok(step) => {
                out.run.log.push(step.diagnostics);
                current = step.candidate;
                ray = step.ray;
                out.run.history.push(current.clone());
                out.rays.push(ray.clone());
            }
            Err(err) => {
                out.run.status = RunStatus::Failed;
                out.run.failure = Some(err);
                return Ok(out);
            }
        }
    }
    out.run.failure = Some(SolverError::IterationCap(schedule.max_iters));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::dealias_grid;
    use crate::system::builtin_system;
    use std::sync::Arc;

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn dio() -> DiophantineParams {
        DiophantineParams::scan(&[1.0, GOLDEN], 1.0, 200).unwrap()
    }

    #[test]
    fn ray_bookkeeping() {
        let ray = FrequencyRay::through(&dio(), 2.0).unwrap();
        let w = ray.omega();
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - GOLDEN).abs() < 1e-15);
        let star = ray.omega_star()[1];
        assert!((ray.margin() - star * (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(FrequencyRay::new(dio(), 2.0, 2.5).is_err());
        let moved = ray.rescaled(1.1);
        assert_eq!(moved.omega_star(), ray.omega_star());
        assert!((moved.dio().gamma - ray.dio().gamma * 1.1).abs() < 1e-15);
    }

    #[test]
    fn zero_data() {
        let bands = [4, 4];
        let grid = dealias_grid(&bands);
        let z = FourierMap::zeros(&bands, &grid, 2, 1).unwrap();
        let t = FourierMap::constant(&bands, &grid, &DMatrix::identity(2, 2)).unwrap();
        let th = FourierMap::constant(&bands, &grid, &DMatrix::from_row_slice(1, 2, &[1.0, GOLDEN])).unwrap();
        let sol = solve_triangular_iso(&z, &z, 0.0, &t, &th, &dio(), &DMatrix::zeros(2, 1)).unwrap();
        assert_eq!(sol.xi_omega, 0.0);
        assert_eq!(sol.xi_l.max_coeff(), 0.0);
        assert_eq!(sol.xi_n.max_coeff(), 0.0);
    }

    #[test]
    fn hand_solved_extended_system() {
        let bands = [4, 4];
        let grid = dealias_grid(&bands);
        let z = FourierMap::zeros(&bands, &grid, 2, 1).unwrap();
        let t = FourierMap::constant(&bands, &grid, &DMatrix::identity(2, 2)).unwrap();
        let th = FourierMap::constant(&bands, &grid, &DMatrix::from_row_slice(1, 2, &[1.0, GOLDEN])).unwrap();
        let sol = solve_triangular_iso(&z, &z, 1.0, &t, &th, &dio(), &DMatrix::zeros(2, 1)).unwrap();
        let w2 = 1.0 + GOLDEN * GOLDEN;
        assert!((sol.xi_omega + 1.0 / w2).abs() < 1e-15);
        assert!((sol.xi_n0[(0, 0)] - 1.0 / w2).abs() < 1e-15);
        assert!((sol.xi_n0[(1, 0)] - GOLDEN / w2).abs() < 1e-15);
        assert!(sol.residual < 1e-14);
    }

    #[test]
    fn exact_target_converges_immediately() {
        let sys = Arc::new(builtin_system("symmetric_rotors", 0.0).unwrap());
        let cand = TorusCandidate::flat(sys, dio(), &[4, 4], 0.01).unwrap();
        let ray = FrequencyRay::through(&dio(), 2.0).unwrap();
        let c0 = cand.conserved_map(Conserved::Energy).unwrap().average()[(0, 0)];
        let run = iterate_kam_iso(&cand, &ray, Conserved::Energy, c0, &NewtonSchedule::default()).unwrap();
        assert!(run.run.converged(), "{:?}", run.run.failure);
        assert_eq!(run.run.steps, 0);
        assert_eq!(run.omega_final(), run.omega_initial);
    }

    #[test]
    fn energy_offset_contracts() {
        let sys = Arc::new(builtin_system("symmetric_rotors", 0.0).unwrap());
        let ray = FrequencyRay::through(&dio(), 2.0).unwrap();
        let cand = TorusCandidate::flat(sys, ray.dio(), &[4, 4], 0.01).unwrap();
        let c0 = cand.conserved_map(Conserved::Energy).unwrap().average()[(0, 0)] + 1e-4;
        let s = NewtonSchedule::default();
        let step = newton_step_iso(&cand, &ray, Conserved::Energy, c0, &s, 1.0, 0, s.rho0, s.delta0()).unwrap();
        let after = TotalError::of(&step.candidate, Conserved::Energy, c0).unwrap();
        assert!(after.e_omega.abs() * 100.0 <= 1e-4, "{}", after.e_omega);
        let ratio = step.ray.scale / ray.scale;
        let rescanned = DiophantineParams::scan(&step.ray.omega(), 1.0, 200).unwrap();
        assert!((rescanned.gamma - ray.dio().gamma * ratio).abs() < 1e-12);
    }
}
