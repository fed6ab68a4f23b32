//! Torus candidates and the adapted frame `P = (L N)` attached to them.
//!
//! Composition with the global objects happens pointwise on the working grid
//! of `K`; the results are projected back onto the band box of `K`.
//! Spectral operations (`𝔏_ω L`, `𝔏_ω N`) act on the projected maps, and the
//! products that involve them are formed again on the grid.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomology::DiophantineParams;
use crate::fourier::{grid_point, FourierError, FourierMap, GridField};
use crate::linalg::{checked_inverse, omega0, re, symmetrize, LinalgError};
use crate::system::{Conserved, FrameCase, HamiltonianSystem, SystemError};

/// Smallest singular value of `L(θ)` accepted on the grid.
pub const MIN_RANK_SINGULAR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("tangent frame loses rank: smallest singular value {0:.3e}")]
    RankDeficient(f64),
    #[error("metric Gram matrix L^T G L is not invertible: {0}")]
    SingularGram(LinalgError),
    #[error("average torsion is not invertible: {0}")]
    SingularTorsion(LinalgError),
    #[error("torus leaves the domain: boundary distance {0:.3e}")]
    DomainEscape(f64),
    #[error("invalid candidate: {0}")]
    Invalid(String),
}

/// Parameterization `K(θ) = (θ, 0) + k(θ)` of an approximately invariant torus.
///
/// `k` is the periodic part; the first `d` coordinates additionally wind once
/// around each angle. The frequency is the one carried by `dio`.
#[derive(Debug, Clone)]
pub struct TorusCandidate {
    pub system: Arc<HamiltonianSystem>,
    pub k: FourierMap,
    pub dio: DiophantineParams,
    pub rho: f64,
}

impl TorusCandidate {
    pub fn new(
        system: Arc<HamiltonianSystem>,
        k: FourierMap,
        dio: DiophantineParams,
        rho: f64,
    ) -> Result<Self, FrameError> {
        let n = system.n();
        let d = system.torus_dim();
        if k.rows() != 2 * n || k.cols() != 1 {
            return Err(FrameError::Invalid(format!("K must be a {}x1 map, found {}x{}", 2 * n, k.rows(), k.cols())));
        }
        if k.torus_dim() != d || dio.dim() != d {
            return Err(FrameError::Invalid(format!(
                "torus dimension {} expected from the system, K has {} and omega has {}",
                d,
                k.torus_dim(),
                dio.dim()
            )));
        }
        if !(rho > 0.0) {
            return Err(FrameError::Invalid(format!("strip width {rho} is not positive")));
        }
        Ok(Self { system, k, dio, rho })
    }

    /// The unperturbed torus `K(θ) = (θ, 0, ω, 0)` of a mechanical system.
    pub fn flat(
        system: Arc<HamiltonianSystem>,
        dio: DiophantineParams,
        bands: &[usize],
        rho: f64,
    ) -> Result<Self, FrameError> {
        let n = system.n();
        let mut avg = DMatrix::zeros(2 * n, 1);
        for (i, w) in dio.omega.iter().enumerate() {
            avg[(n + i, 0)] = *w;
        }
        let k = FourierMap::constant(bands, &crate::fourier::dealias_grid(bands), &avg)?;
        Self::new(system, k, dio, rho)
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }

    pub fn d(&self) -> usize {
        self.k.torus_dim()
    }

    pub fn omega(&self) -> &[f64] {
        &self.dio.omega
    }

    pub fn bands(&self) -> &[usize] {
        self.k.bands()
    }

    pub fn grid(&self) -> &[usize] {
        self.k.grid()
    }

    pub fn with_k(&self, k: FourierMap, rho: f64) -> Self {
        Self { system: Arc::clone(&self.system), k, dio: self.dio.clone(), rho }
    }

    /// Constant `2n × d` matrix `[I_d; 0]` of the winding part.
    pub fn lift(&self) -> DMatrix<f64> {
        DMatrix::from_fn(2 * self.n(), self.d(), |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// `DK = Dk + [I_d; 0]`.
    pub fn dk(&self) -> Result<FourierMap, FrameError> {
        Ok(self.k.jacobian()?.add_constant(&self.lift())?)
    }

    /// Samples of `K` (including the winding part) on the working grid.
    pub fn points(&self) -> GridField {
        let periodic = self.k.eval_grid();
        let grid = self.grid().to_vec();
        let d = self.d();
        periodic.map(2 * self.n(), 1, |p, v| {
            let theta = grid_point(&grid, p);
            let mut out = v.clone();
            for i in 0..d {
                out[(i, 0)] += theta[i];
            }
            out
        })
    }

    /// Lower bound on `dist(K(T^d_ρ), ∂ℬ)`.
    pub fn domain_distance(&self, rho: f64) -> f64 {
        self.system.domain.distance(&self.k, self.d(), rho)
    }

    /// Translated candidate `θ ↦ K(θ + α)`, whose winding part adds the constant `α`.
    pub fn shifted(&self, alpha: &[f64]) -> Result<Self, FrameError> {
        let mut k = self.k.shift(alpha)?;
        let mut add = DMatrix::zeros(2 * self.n(), 1);
        for (i, a) in alpha.iter().enumerate() {
            add[(i, 0)] = *a;
        }
        k = k.add_constant(&add)?;
        Ok(self.with_k(k, self.rho))
    }

    /// `E(θ) = X_H(K(θ)) − DK(θ) ω`.
    pub fn invariance_error(&self) -> Result<FourierMap, FrameError> {
        let pts = self.points();
        let dk = self.dk()?.eval_grid();
        let omega = DMatrix::from_column_slice(self.d(), 1, self.omega());
        let model = Arc::clone(&self.system.model);
        let samples = pts.map(2 * self.n(), 1, |p, z| {
            let cz: Vec<Complex64> = z.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let xh = model.vector_field(&cz).map(|c| c.re);
            DMatrix::from_column_slice(xh.len(), 1, xh.as_slice()) - dk.at(p) * &omega
        });
        Ok(FourierMap::from_samples(&samples, self.bands())?)
    }

    /// `c ∘ K` for a conserved quantity.
    pub fn conserved_map(&self, c: Conserved) -> Result<FourierMap, FrameError> {
        self.system.check_conserved(c)?;
        let sys = Arc::clone(&self.system);
        let samples = self.points().map(1, 1, |_, z| {
            let cz: Vec<Complex64> = z.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            DMatrix::from_element(1, 1, sys.conserved(c, &cz).re)
        });
        Ok(FourierMap::from_samples(&samples, self.bands())?)
    }
}

/// Frames, error maps and torsion of one candidate.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub case: FrameCase,
    pub e: FourierMap,
    pub dk: FourierMap,
    pub l: FourierMap,
    pub n0: FourierMap,
    pub b: FourierMap,
    pub a: FourierMap,
    pub n: FourierMap,
    pub p: FourierMap,
    pub omega_k: FourierMap,
    pub e_lag: FourierMap,
    pub e_sym: FourierMap,
    pub e_red: FourierMap,
    pub t: FourierMap,
    pub avg_t: DMatrix<f64>,
    /// `η^L = −N^⊤(Ω∘K)E` and `η^N = L^⊤(Ω∘K)E`.
    pub eta_l: FourierMap,
    pub eta_n: FourierMap,
    /// `⟨L^⊤(Ω∘K)E⟩` from raw grid values.
    pub compatibility: DMatrix<f64>,
    /// Extended torsion data for a conserved quantity `c`.
    pub extended: Option<ExtendedTorsion>,
    pub min_singular_l: f64,
    pub b_asymmetry: f64,
}

#[derive(Debug, Clone)]
pub struct ExtendedTorsion {
    pub conserved: Conserved,
    /// `T̂ = Dc(K) N`, a `1 × n` map.
    pub t_hat: FourierMap,
    pub tc: FourierMap,
    pub avg_tc: DMatrix<f64>,
    pub c_map: FourierMap,
    pub c_avg: f64,
}

struct PointFrame {
    e: DMatrix<f64>,
    l: DMatrix<f64>,
    n0: DMatrix<f64>,
    b: DMatrix<f64>,
    a: DMatrix<f64>,
    n: DMatrix<f64>,
    omega: DMatrix<f64>,
    dxh: DMatrix<f64>,
    dc: Option<(f64, DMatrix<f64>)>,
    min_sv: f64,
    asym: f64,
}

fn field(grid: &[usize], rows: usize, cols: usize, values: Vec<DMatrix<f64>>) -> GridField {
    GridField::new(grid.to_vec(), rows, cols, values).expect("grid sized consistently")
}

fn on_grid<F>(grid: &[usize], rows: usize, cols: usize, f: F) -> GridField
where
    F: Fn(usize) -> DMatrix<f64> + Sync + Send,
{
    let points: usize = grid.iter().product();
    field(grid, rows, cols, (0..points).into_par_iter().map(f).collect())
}

impl FrameBundle {
    /// Builds every frame object; `conserved` adds the extended torsion.
    pub fn build(cand: &TorusCandidate, conserved: Option<Conserved>) -> Result<Self, FrameError> {
        let sys = Arc::clone(&cand.system);
        if let Some(c) = conserved {
            sys.check_conserved(c)?;
        }
        let n = cand.n();
        let d = cand.d();
        let m = n - d;
        let bands = cand.bands().to_vec();
        let grid = cand.grid().to_vec();
        let omega_vec = DMatrix::from_column_slice(d, 1, cand.omega());
        let case = sys.geometry.case();

        let dk_map = cand.dk()?;
        let dk_grid = dk_map.eval_grid();
        let pts = cand.points();
        let points = pts.len();

        let frames: Vec<Result<PointFrame, FrameError>> = (0..points)
            .into_par_iter()
            .map(|p| {
                let z: Vec<Complex64> = pts.at(p).iter().map(|&x| Complex64::new(x, 0.0)).collect();
                let xh = re(&{
                    let v = sys.model.vector_field(&z);
                    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
                });
                let dxh = re(&sys.model.d_vector_field(&z));
                let omega = re(&sys.geometry.symplectic(&z));
                let metric = re(&sys.geometry.metric(&z));
                let iso = re(&sys.geometry.isomorphism(&z));
                let dk = dk_grid.at(p);
                let mut l = DMatrix::zeros(2 * n, n);
                l.view_mut((0, 0), (2 * n, d)).copy_from(dk);
                if m > 0 {
                    let xp = re(&sys.model.integral_fields(&z));
                    l.view_mut((0, d), (2 * n, m)).copy_from(&xp);
                }
                let min_sv = l.clone().svd(false, false).singular_values.min();
                if !(min_sv > MIN_RANK_SINGULAR) {
                    return Err(FrameError::RankDeficient(min_sv));
                }
                let gram = l.transpose() * &metric * &l;
                let b_raw = checked_inverse(&gram).map_err(FrameError::SingularGram)?;
                let asym = (&b_raw - b_raw.transpose()).amax();
                let b = symmetrize(&b_raw);
                let n0 = &iso * &l;
                let a = match case {
                    FrameCase::III => DMatrix::zeros(n, n),
                    FrameCase::II => {
                        let tilde = re(&sys.geometry.tilde_symplectic(&z));
                        (b.transpose() * l.transpose() * tilde * &l * &b) * -0.5
                    }
                };
                let nn = &l * &a + &n0 * &b;
                let e = xh - dk * &omega_vec;
                let dc = conserved.map(|c| {
                    let g = sys.d_conserved(c, &z).map(|v| v.re);
                    (sys.conserved(c, &z).re, DMatrix::from_row_slice(1, 2 * n, g.as_slice()))
                });
                Ok(PointFrame { e, l, n0, b, a, n: nn, omega, dxh, dc, min_sv, asym })
            })
            .collect();
        let frames: Vec<PointFrame> = frames.into_iter().collect::<Result<_, _>>()?;

        let min_singular_l = frames.iter().map(|f| f.min_sv).fold(f64::INFINITY, f64::min);
        let b_asymmetry = frames.iter().map(|f| f.asym).fold(0.0, f64::max);
        let project = |rows: usize, cols: usize, get: &dyn Fn(&PointFrame) -> DMatrix<f64>| {
            FourierMap::from_samples(&field(&grid, rows, cols, frames.iter().map(get).collect()), &bands)
        };
        let e = project(2 * n, 1, &|f| f.e.clone())?;
        let l = project(2 * n, n, &|f| f.l.clone())?;
        let n0 = project(2 * n, n, &|f| f.n0.clone())?;
        let b = project(n, n, &|f| f.b.clone())?;
        let a = project(n, n, &|f| f.a.clone())?;
        let nmap = project(2 * n, n, &|f| f.n.clone())?;
        let p = l.hstack(&nmap)?;

        let compat_raw: Vec<DMatrix<f64>> = frames.iter().map(|f| f.l.transpose() * &f.omega * &f.e).collect();
        let compatibility = field(&grid, n, 1, compat_raw).mean();

        let omega_k = FourierMap::from_samples(
            &on_grid(&grid, d, d, |q| {
                let dk = dk_grid.at(q);
                dk.transpose() * &frames[q].omega * dk
            }),
            &bands,
        )?;

        let l_grid = l.eval_grid();
        let n_grid = nmap.eval_grid();
        let e_grid = e.eval_grid();
        let lie_p_grid = p.lie_derivative(cand.omega())?.eval_grid();
        let p_grid = p.eval_grid();
        let o0 = omega0(n);

        let e_lag = FourierMap::from_samples(
            &on_grid(&grid, n, n, |q| l_grid.at(q).transpose() * &frames[q].omega * l_grid.at(q)),
            &bands,
        )?;
        let e_sym = FourierMap::from_samples(
            &on_grid(&grid, 2 * n, 2 * n, |q| p_grid.at(q).transpose() * &frames[q].omega * p_grid.at(q) - &o0),
            &bands,
        )?;
        let w_grid = on_grid(&grid, 2 * n, 2 * n, |q| {
            let f = &frames[q];
            p_grid.at(q).transpose() * &f.omega * (&f.dxh * p_grid.at(q) + lie_p_grid.at(q))
        });
        let t = FourierMap::from_samples(&w_grid.map(n, n, |_, w| w.view((n, n), (n, n)).into_owned()), &bands)?;
        let e_red = FourierMap::from_samples(
            &w_grid.map(2 * n, 2 * n, |_, w| {
                let mut r = -&o0 * w;
                let block = w.view((n, n), (n, n)).into_owned();
                let mut top = r.view_mut((0, n), (n, n));
                top -= &block;
                r
            }),
            &bands,
        )?;
        let avg_t = t.average();

        let eta_l = FourierMap::from_samples(
            &on_grid(&grid, n, 1, |q| -(n_grid.at(q).transpose() * &frames[q].omega * e_grid.at(q))),
            &bands,
        )?;
        let eta_n = FourierMap::from_samples(
            &on_grid(&grid, n, 1, |q| l_grid.at(q).transpose() * &frames[q].omega * e_grid.at(q)),
            &bands,
        )?;

        let extended = match conserved {
            None => None,
            Some(c) => {
                let t_hat = FourierMap::from_samples(
                    &on_grid(&grid, 1, n, |q| &frames[q].dc.as_ref().expect("requested").1 * n_grid.at(q)),
                    &bands,
                )?;
                let c_map = FourierMap::from_samples(
                    &field(
                        &grid,
                        1,
                        1,
                        frames.iter().map(|f| DMatrix::from_element(1, 1, f.dc.as_ref().expect("requested").0)).collect(),
                    ),
                    &bands,
                )?;
                let c_avg = c_map.average()[(0, 0)];
                let mut omega_hat = DMatrix::zeros(n, 1);
                for (i, w) in cand.omega().iter().enumerate() {
                    omega_hat[(i, 0)] = *w;
                }
                let top = t.hstack(&FourierMap::constant(&bands, &grid, &omega_hat)?)?;
                let bottom = t_hat.hstack(&FourierMap::zeros(&bands, &grid, 1, 1)?)?;
                let tc = stack_rows(&top, &bottom)?;
                let avg_tc = tc.average();
                Some(ExtendedTorsion { conserved: c, t_hat, tc, avg_tc, c_map, c_avg })
            }
        };

        Ok(Self {
            case,
            e,
            dk: dk_map,
            l,
            n0,
            b,
            a,
            n: nmap,
            p,
            omega_k,
            e_lag,
            e_sym,
            e_red,
            t,
            avg_t,
            eta_l,
            eta_n,
            compatibility,
            extended,
            min_singular_l,
            b_asymmetry,
        })
    }

    /// `⟨T⟩^{-1}`, failing on a degenerate twist.
    pub fn avg_t_inverse(&self) -> Result<DMatrix<f64>, FrameError> {
        checked_inverse(&self.avg_t).map_err(FrameError::SingularTorsion)
    }

    /// `⟨T_c⟩^{-1}`, failing on a degenerate extended twist.
    pub fn avg_tc_inverse(&self) -> Result<DMatrix<f64>, FrameError> {
        let ext = self.extended.as_ref().ok_or_else(|| FrameError::Invalid("no conserved quantity selected".into()))?;
        checked_inverse(&ext.avg_tc).map_err(FrameError::SingularTorsion)
    }

    /// Largest entry of the block `E_red^{1,2}`.
    pub fn e_red_upper_right(&self) -> f64 {
        let n = self.t.rows();
        self.e_red.block(0, n, n, n).map(|b| b.max_coeff()).unwrap_or(f64::INFINITY)
    }

    /// Strip norms of every error map at `rho`.
    pub fn norm_table(&self, rho: f64) -> Result<Vec<NormEntry>, FrameError> {
        let entries: [(&str, &FourierMap); 9] = [
            ("E", &self.e),
            ("Omega_K", &self.omega_k),
            ("E_lag", &self.e_lag),
            ("E_sym", &self.e_sym),
            ("E_red", &self.e_red),
            ("T", &self.t),
            ("L", &self.l),
            ("N", &self.n),
            ("B", &self.b),
        ];
        entries
            .iter()
            .map(|(name, map)| Ok(NormEntry { name: name.to_string(), rho, value: map.norm(rho)? }))
            .collect()
    }
}

/// One row of a [`FrameBundle::norm_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub name: String,
    pub rho: f64,
    pub value: f64,
}

fn stack_rows(top: &FourierMap, bottom: &FourierMap) -> Result<FourierMap, FourierError> {
    Ok(top.transpose().hstack(&bottom.transpose())?.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{builtin_system, ConstantGeometry};

    const GOLDEN: f64 = 1.618_033_988_749_895;

    fn dio() -> DiophantineParams {
        DiophantineParams::scan(&[1.0, GOLDEN], 1.0, 100).unwrap()
    }

    fn candidate(name: &str, eps: f64, bands: usize) -> TorusCandidate {
        let sys = Arc::new(builtin_system(name, eps).unwrap());
        TorusCandidate::flat(sys, dio(), &[bands, bands], 0.05).unwrap()
    }

    #[test]
    fn free_rotor_frames_are_explicit() {
        let cand = candidate("free_rotor", 0.0, 4);
        let f = FrameBundle::build(&cand, None).unwrap();
        let l = f.l.average();
        let n = f.n.average();
        let mut expected_l = DMatrix::zeros(4, 2);
        expected_l[(0, 0)] = 1.0;
        expected_l[(1, 1)] = 1.0;
        let mut expected_n = DMatrix::zeros(4, 2);
        expected_n[(2, 0)] = 1.0;
        expected_n[(3, 1)] = 1.0;
        assert!((l - expected_l).amax() < 1e-15);
        assert!((n - &expected_n).amax() < 1e-15);
        assert!((f.n0.average() - expected_n).amax() < 1e-15);
        assert!((f.b.average() - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert_eq!(f.a.max_coeff(), 0.0);
        assert!((&f.avg_t - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert!(f.t.zero_average().max_coeff() < 1e-15);
    }

    #[test]
    fn symmetric_rotors_tangent_frame_is_constant() {
        let cand = candidate("symmetric_rotors", 0.0, 4);
        let f = FrameBundle::build(&cand, None).unwrap();
        let l = f.l.average();
        let expected = DMatrix::from_row_slice(6, 3, &[
            1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        ]);
        assert!((l - expected).amax() < 1e-15);
        let gram = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 2.0]);
        let b = gram.try_inverse().unwrap();
        assert!((&f.avg_t - &b).amax() < 1e-13);
        assert!(f.avg_t_inverse().is_ok());
    }

    #[test]
    fn exact_torus_has_vanishing_errors() {
        let cand = candidate("symmetric_rotors", 0.0, 8);
        let f = FrameBundle::build(&cand, Some(Conserved::Energy)).unwrap();
        for entry in f.norm_table(cand.rho).unwrap() {
            if ["E", "Omega_K", "E_lag", "E_sym", "E_red"].contains(&entry.name.as_str()) {
                assert!(entry.value <= 1e-13, "{entry:?}");
            }
        }
    }

    #[test]
    fn free_rotor_extended_torsion() {
        let cand = candidate("free_rotor", 0.0, 4);
        let f = FrameBundle::build(&cand, Some(Conserved::Energy)).unwrap();
        let tc = &f.extended.as_ref().unwrap().avg_tc;
        let w2 = 1.0 + GOLDEN * GOLDEN;
        assert!((tc.determinant() + w2).abs() < 1e-13);
        assert!((tc[(2, 0)] - 1.0).abs() < 1e-15 && (tc[(2, 1)] - GOLDEN).abs() < 1e-15);
    }

    #[test]
    fn perturbed_identities() {
        let mut cand = candidate("symmetric_rotors", 0.05, 8);
        cand.k.set_coeff(&[1, 0], 0, 0, Complex64::new(0.01, 0.003));
        cand.k.set_coeff(&[1, -1], 4, 0, Complex64::new(-0.004, 0.002));
        let f = FrameBundle::build(&cand, None).unwrap();
        assert!(f.omega_k.average().amax() < 1e-12);
        assert!(f.compatibility.amax() < 1e-12);
        assert_eq!(f.e_red_upper_right(), 0.0);
        let n = cand.n();
        let lon = FourierMap::from_samples(
            &on_grid(&cand.grid().to_vec(), n, n, |q| {
                let z = f.l.eval_grid();
                let w = f.n.eval_grid();
                z.at(q).transpose() * crate::linalg::omega0(n) * w.at(q)
            }),
            cand.bands(),
        )
        .unwrap();
        let expected = f.e_lag.mul(&f.a).unwrap().add_constant(&-DMatrix::identity(n, n)).unwrap();
        assert!(lon.sub(&expected).unwrap().max_coeff() < 1e-10);
    }

    #[test]
    fn case_two_frames_satisfy_the_identities() {
        let base = builtin_system("lagrangian_rotors", 0.05).unwrap();
        let geometry = Arc::new(ConstantGeometry::diagonal_metric(2, &[1.5, 0.8, 1.2, 2.0]).unwrap());
        let sys = Arc::new(
            HamiltonianSystem::new("metric_rotors", 0.05, geometry, Arc::clone(&base.model), base.domain.clone()).unwrap(),
        );
        let mut cand = TorusCandidate::flat(sys, dio(), &[16, 16], 0.05).unwrap();
        cand.k.set_coeff(&[1, 0], 0, 0, Complex64::new(0.02, 0.0));
        cand.k.set_coeff(&[1, 0], 3, 0, Complex64::new(0.0, 0.01));
        let f = FrameBundle::build(&cand, None).unwrap();
        assert_eq!(f.case, FrameCase::II);
        assert!(f.a.max_coeff() > 1e-6);
        let a = f.a.eval_grid();
        let worst = a.values().iter().map(|m| (m + m.transpose()).amax()).fold(0.0, f64::max);
        assert!(worst < 1e-13);
        let n = 2;
        let grid = cand.grid().to_vec();
        let (lg, ng, elag, ag) = (f.l.eval_grid(), f.n.eval_grid(), f.e_lag.eval_grid(), f.a.eval_grid());
        let o = omega0(n);
        let mut worst_ln = 0.0_f64;
        let mut worst_nn = 0.0_f64;
        for q in 0..grid.iter().product::<usize>() {
            let lon = lg.at(q).transpose() * &o * ng.at(q);
            worst_ln = worst_ln.max((lon - (elag.at(q) * ag.at(q) - DMatrix::identity(n, n))).amax());
            let non = ng.at(q).transpose() * &o * ng.at(q);
            worst_nn = worst_nn.max((non - ag.at(q).transpose() * elag.at(q) * ag.at(q)).amax());
        }
        assert!(worst_ln < 1e-8 && worst_nn < 1e-8, "{worst_ln} {worst_nn}");
    }

    #[test]
    fn phase_shift_preserves_the_error_norm() {
        let mut cand = candidate("lagrangian_rotors", 1e-3, 8);
        cand.rho = 0.02;
        let e0 = cand.invariance_error().unwrap().norm(0.02).unwrap();
        let e1 = cand.shifted(&[0.123, 0.456]).unwrap().invariance_error().unwrap().norm(0.02).unwrap();
        assert!(e0 > 1e-4);
        assert!((e0 - e1).abs() < 1e-12 * e0.max(1.0));
    }
}
