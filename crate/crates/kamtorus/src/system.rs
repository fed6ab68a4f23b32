//! Hamiltonian systems on `R^{2n}` with an exact symplectic structure, a metric,
//! a linear isomorphism `J` and `n − d` first integrals in involution.
//!
//! Every callback is evaluated on complex points so that global norm constants
//! can be sampled on a complex neighbourhood of the real domain. Real callers go
//! through the `*_real` helpers, which take real parts.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fourier::FourierMap;
use crate::linalg::{checked_inverse, omega0, re, row_sum_norm, LinalgError};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Tolerance for the involution and commutation checks.
pub const BRACKET_TOL: f64 = 1e-10;
/// Relative tolerance for finite-difference cross-checks of derivative callbacks.
pub const DERIVATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("unknown built-in system `{0}`")]
    UnknownSystem(String),
    #[error("symplectic matrix is singular at the sample point")]
    SingularStructure(#[from] LinalgError),
    #[error("integral index {index} out of range ({count} integrals)")]
    NoSuchIntegral { index: usize, count: usize },
    #[error("invalid system data: {0}")]
    Invalid(String),
}

/// Frame construction case: II for a general `J`, III when `(Ω, G, J)` is compatible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameCase {
    II,
    III,
}

/// The matrix fields `a, Ω, G, J, Ω̃` of the geometric structure.
///
/// Derivatives are returned as slices: `d_x(z)[k] = ∂X/∂z_k` and
/// `d2_x(z)[k][l] = ∂²X/∂z_k∂z_l`.
pub trait Geometry: Send + Sync {
    fn n(&self) -> usize;
    fn case(&self) -> FrameCase;
    /// True for `Ω = Ω̃ = J = Ω₀`, `G = I`, which fixes the global constants exactly.
    fn is_canonical(&self) -> bool {
        false
    }
    fn action_form(&self, z: &[Complex64]) -> CVec;
    fn symplectic(&self, z: &[Complex64]) -> CMat;
    fn d_symplectic(&self, z: &[Complex64]) -> Vec<CMat>;
    fn metric(&self, z: &[Complex64]) -> CMat;
    fn d_metric(&self, z: &[Complex64]) -> Vec<CMat>;
    fn d2_metric(&self, z: &[Complex64]) -> Vec<Vec<CMat>>;
    fn isomorphism(&self, z: &[Complex64]) -> CMat;
    fn d_isomorphism(&self, z: &[Complex64]) -> Vec<CMat>;
    fn d2_isomorphism(&self, z: &[Complex64]) -> Vec<Vec<CMat>>;
    fn tilde_symplectic(&self, z: &[Complex64]) -> CMat {
        let j = self.isomorphism(z);
        j.transpose() * self.symplectic(z) * j
    }
    fn d_tilde_symplectic(&self, z: &[Complex64]) -> Vec<CMat>;
    fn d2_tilde_symplectic(&self, z: &[Complex64]) -> Vec<Vec<CMat>>;
}

/// Constant structure `Ω`, `G`, `J = Ω^{-⊤}G` with primitive `a(z) = −½Ωz`.
#[derive(Debug, Clone)]
pub struct ConstantGeometry {
    n: usize,
    omega: CMat,
    metric: CMat,
    iso: CMat,
    case: FrameCase,
    canonical: bool,
}

impl ConstantGeometry {
    /// `Ω = Ω₀`, `G = I`, `J = Ω₀`.
    pub fn canonical(n: usize) -> Self {
        let o = crate::linalg::cx(&omega0(n));
        Self {
            n,
            omega: o.clone(),
            metric: CMat::identity(2 * n, 2 * n),
            iso: o,
            case: FrameCase::III,
            canonical: true,
        }
    }

    /// `Ω = Ω₀` with a diagonal metric; `J = Ω₀ G` is not a complex structure
    /// unless `G = I`, so the frame uses Case II.
    pub fn diagonal_metric(n: usize, diag: &[f64]) -> Result<Self, SystemError> {
        if diag.len() != 2 * n || diag.iter().any(|&g| !(g > 0.0)) {
            return Err(SystemError::Invalid("metric diagonal must have 2n positive entries".into()));
        }
        let o = omega0(n);
        let g = DMatrix::from_diagonal(&DVector::from_column_slice(diag));
        let j = &o * &g;
        Ok(Self {
            n,
            omega: crate::linalg::cx(&o),
            metric: crate::linalg::cx(&g),
            iso: crate::linalg::cx(&j),
            case: FrameCase::II,
            canonical: false,
        })
    }

    fn zeros1(&self) -> Vec<CMat> {
        vec![CMat::zeros(2 * self.n, 2 * self.n); 2 * self.n]
    }

    fn zeros2(&self) -> Vec<Vec<CMat>> {
        vec![self.zeros1(); 2 * self.n]
    }
}

impl Geometry for ConstantGeometry {
    fn n(&self) -> usize {
        self.n
    }
    fn case(&self) -> FrameCase {
        self.case
    }
    fn is_canonical(&self) -> bool {
        self.canonical
    }
    fn action_form(&self, z: &[Complex64]) -> CVec {
        (&self.omega * CVec::from_column_slice(z)) * Complex64::new(-0.5, 0.0)
    }
    fn symplectic(&self, _: &[Complex64]) -> CMat {
        self.omega.clone()
    }
    fn d_symplectic(&self, _: &[Complex64]) -> Vec<CMat> {
        self.zeros1()
    }
    fn metric(&self, _: &[Complex64]) -> CMat {
        self.metric.clone()
    }
    fn d_metric(&self, _: &[Complex64]) -> Vec<CMat> {
        self.zeros1()
    }
    fn d2_metric(&self, _: &[Complex64]) -> Vec<Vec<CMat>> {
        self.zeros2()
    }
    fn isomorphism(&self, _: &[Complex64]) -> CMat {
        self.iso.clone()
    }
    fn d_isomorphism(&self, _: &[Complex64]) -> Vec<CMat> {
        self.zeros1()
    }
    fn d2_isomorphism(&self, _: &[Complex64]) -> Vec<Vec<CMat>> {
        self.zeros2()
    }
    fn d_tilde_symplectic(&self, _: &[Complex64]) -> Vec<CMat> {
        self.zeros1()
    }
    fn d2_tilde_symplectic(&self, _: &[Complex64]) -> Vec<Vec<CMat>> {
        self.zeros2()
    }
}

/// Hamiltonian, vector field and first integrals with analytic derivatives.
///
/// `d2_vector_field(z)[k] = ∂(DX_H)/∂z_k`; integral fields are the columns of
/// `X_p`, with `d_integral_fields(z)[j] = DX_{p_j}` and
/// `d2_integral_fields(z)[j][k] = ∂(DX_{p_j})/∂z_k`.
pub trait Model: Send + Sync {
    fn n(&self) -> usize;
    fn num_integrals(&self) -> usize;
    fn hamiltonian(&self, z: &[Complex64]) -> Complex64;
    fn grad_hamiltonian(&self, z: &[Complex64]) -> CVec;
    fn hess_hamiltonian(&self, z: &[Complex64]) -> CMat;
    fn vector_field(&self, z: &[Complex64]) -> CVec;
    fn d_vector_field(&self, z: &[Complex64]) -> CMat;
    fn d2_vector_field(&self, z: &[Complex64]) -> Vec<CMat>;
    fn integrals(&self, z: &[Complex64]) -> CVec;
    /// `Dp` as an `(n−d) × 2n` matrix.
    fn d_integrals(&self, z: &[Complex64]) -> CMat;
    fn hess_integral(&self, j: usize, z: &[Complex64]) -> CMat;
    /// `X_p` as a `2n × (n−d)` matrix.
    fn integral_fields(&self, z: &[Complex64]) -> CMat;
    fn d_integral_fields(&self, z: &[Complex64]) -> Vec<CMat>;
    fn d2_integral_fields(&self, z: &[Complex64]) -> Vec<Vec<CMat>>;
}

/// Trigonometric potential `V(x) = Σ_j a_j cos(2π q_j·x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPotential {
    pub modes: Vec<(f64, Vec<i64>)>,
}

impl TrigPotential {
    fn phase(q: &[i64], x: &[Complex64]) -> Complex64 {
        q.iter().zip(x).map(|(&qi, &xi)| xi * (2.0 * PI * qi as f64)).sum()
    }

    pub fn value(&self, x: &[Complex64]) -> Complex64 {
        self.modes.iter().map(|(a, q)| Self::phase(q, x).cos() * *a).sum()
    }

    pub fn gradient(&self, x: &[Complex64]) -> CVec {
        let mut g = CVec::zeros(x.len());
        for (a, q) in &self.modes {
            let s = Self::phase(q, x).sin() * (-2.0 * PI * a);
            for (i, &qi) in q.iter().enumerate() {
                g[i] += s * qi as f64;
            }
        }
        g
    }

    pub fn hessian(&self, x: &[Complex64]) -> CMat {
        let n = x.len();
        let mut h = CMat::zeros(n, n);
        for (a, q) in &self.modes {
            let c = Self::phase(q, x).cos() * (-4.0 * PI * PI * a);
            for i in 0..n {
                for j in 0..n {
                    h[(i, j)] += c * (q[i] * q[j]) as f64;
                }
            }
        }
        h
    }

    /// `∂³V/∂x_i∂x_j∂x_k`, returned as slices over `k`.
    pub fn third(&self, x: &[Complex64]) -> Vec<CMat> {
        let n = x.len();
        let mut t = vec![CMat::zeros(n, n); n];
        for (a, q) in &self.modes {
            let s = Self::phase(q, x).sin() * (8.0 * PI * PI * PI * a);
            for (k, slice) in t.iter_mut().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        slice[(i, j)] += s * (q[i] * q[j] * q[k]) as f64;
                    }
                }
            }
        }
        t
    }
}

/// `H = ½|y|² + V(x)` in canonical coordinates `z = (x, y)` with linear momenta
/// `p_j = m_j·y` as first integrals.
#[derive(Debug, Clone)]
pub struct MechanicalModel {
    n: usize,
    potential: TrigPotential,
    momenta: Vec<Vec<f64>>,
    /// Injected fault: flips the sign of entry `(row, column)` of `X_p`.
    fault: Option<(usize, usize)>,
}

impl MechanicalModel {
    pub fn new(n: usize, potential: TrigPotential, momenta: Vec<Vec<f64>>) -> Result<Self, SystemError> {
        if potential.modes.iter().any(|(_, q)| q.len() != n) || momenta.iter().any(|m| m.len() != n) {
            return Err(SystemError::Invalid("potential modes and momenta must have length n".into()));
        }
        if momenta.len() > n {
            return Err(SystemError::Invalid("more integrals than degrees of freedom".into()));
        }
        Ok(Self { n, potential, momenta, fault: None })
    }

    pub fn with_fault(mut self, row: usize, column: usize) -> Self {
        self.fault = Some((row, column));
        self
    }

    fn split<'a>(&self, z: &'a [Complex64]) -> (&'a [Complex64], &'a [Complex64]) {
        z.split_at(self.n)
    }

    fn zero_tensor(&self) -> Vec<CMat> {
        vec![CMat::zeros(2 * self.n, 2 * self.n); 2 * self.n]
    }
}

impl Model for MechanicalModel {
    fn n(&self) -> usize {
        self.n
    }
    fn num_integrals(&self) -> usize {
        self.momenta.len()
    }
    fn hamiltonian(&self, z: &[Complex64]) -> Complex64 {
        let (x, y) = self.split(z);
        y.iter().map(|v| v * v).sum::<Complex64>() * 0.5 + self.potential.value(x)
    }
    fn grad_hamiltonian(&self, z: &[Complex64]) -> CVec {
        let (x, y) = self.split(z);
        let g = self.potential.gradient(x);
        CVec::from_fn(2 * self.n, |i, _| if i < self.n { g[i] } else { y[i - self.n] })
    }
    fn hess_hamiltonian(&self, z: &[Complex64]) -> CMat {
        let (x, _) = self.split(z);
        let h = self.potential.hessian(x);
        let mut m = CMat::zeros(2 * self.n, 2 * self.n);
        m.view_mut((0, 0), (self.n, self.n)).copy_from(&h);
        for i in 0..self.n {
            m[(self.n + i, self.n + i)] = Complex64::new(1.0, 0.0);
        }
        m
    }
    fn vector_field(&self, z: &[Complex64]) -> CVec {
        let (x, y) = self.split(z);
        let g = self.potential.gradient(x);
        CVec::from_fn(2 * self.n, |i, _| if i < self.n { y[i] } else { -g[i - self.n] })
    }
    fn d_vector_field(&self, z: &[Complex64]) -> CMat {
        let (x, _) = self.split(z);
        let h = self.potential.hessian(x);
        let mut m = CMat::zeros(2 * self.n, 2 * self.n);
        for i in 0..self.n {
            m[(i, self.n + i)] = Complex64::new(1.0, 0.0);
        }
        m.view_mut((self.n, 0), (self.n, self.n)).copy_from(&(-h));
        m
    }
    fn d2_vector_field(&self, z: &[Complex64]) -> Vec<CMat> {
        let (x, _) = self.split(z);
        let t = self.potential.third(x);
        let mut out = self.zero_tensor();
        for (k, slice) in t.iter().enumerate() {
            out[k].view_mut((self.n, 0), (self.n, self.n)).copy_from(&(-slice));
        }
        out
    }
    fn integrals(&self, z: &[Complex64]) -> CVec {
        let (_, y) = self.split(z);
        CVec::from_fn(self.momenta.len(), |j, _| self.momenta[j].iter().zip(y).map(|(&m, &v)| v * m).sum())
    }
    fn d_integrals(&self, _: &[Complex64]) -> CMat {
        CMat::from_fn(self.momenta.len(), 2 * self.n, |j, i| {
            Complex64::new(if i >= self.n { self.momenta[j][i - self.n] } else { 0.0 }, 0.0)
        })
    }
    fn hess_integral(&self, _: usize, _: &[Complex64]) -> CMat {
        CMat::zeros(2 * self.n, 2 * self.n)
    }
    fn integral_fields(&self, _: &[Complex64]) -> CMat {
        let mut m = CMat::from_fn(2 * self.n, self.momenta.len(), |i, j| {
            Complex64::new(if i < self.n { self.momenta[j][i] } else { 0.0 }, 0.0)
        });
        if let Some((r, c)) = self.fault {
            m[(r, c)] = -m[(r, c)];
        }
        m
    }
    fn d_integral_fields(&self, _: &[Complex64]) -> Vec<CMat> {
        vec![CMat::zeros(2 * self.n, 2 * self.n); self.momenta.len()]
    }
    fn d2_integral_fields(&self, _: &[Complex64]) -> Vec<Vec<CMat>> {
        vec![self.zero_tensor(); self.momenta.len()]
    }
}

/// Complex neighbourhood `ℬ` of the real phase-space region.
///
/// The first `angles` coordinates are periodic with unrestricted real part;
/// the others lie in `centre ± radius`. All coordinates may move `imag_width`
/// off the real axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub angles: usize,
    pub centre: Vec<f64>,
    pub radius: Vec<f64>,
    pub imag_width: f64,
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.centre.len()
    }

    /// Box fitted around the averages of a parameterization.
    pub fn around(k: &FourierMap, angles: usize, radius: f64, imag_width: f64) -> Self {
        let avg = k.average();
        let dim = k.rows();
        Self {
            angles,
            centre: (0..dim).map(|i| if i < angles { 0.0 } else { avg[(i, 0)] }).collect(),
            radius: vec![radius; dim],
            imag_width,
        }
    }

    /// Majorant lower bound on `dist(K(T^d_ρ), ∂ℬ)` for `K(θ) = (θ, 0) + k(θ)`.
    pub fn distance(&self, k: &FourierMap, winding: usize, rho: f64) -> f64 {
        let tail = k.zero_average().entry_majorants(rho).map(|m| m.column(0).into_owned());
        let tail = match tail {
            Ok(t) => t,
            Err(_) => return f64::NEG_INFINITY,
        };
        let avg = k.average();
        (0..self.dim())
            .map(|i| {
                let spread = tail[i] + if i < winding { rho } else { 0.0 };
                let imag = self.imag_width - spread;
                if i < self.angles {
                    imag
                } else {
                    let real = self.radius[i] - ((avg[(i, 0)] - self.centre[i]).abs() + tail[i]);
                    imag.min(real)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Real interval for coordinate `i`.
    pub fn real_range(&self, i: usize) -> (f64, f64) {
        if i < self.angles {
            (0.0, 1.0)
        } else {
            (self.centre[i] - self.radius[i], self.centre[i] + self.radius[i])
        }
    }

    pub fn random_real_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = self.real_range(i);
                rng.random_range(lo..hi)
            })
            .collect()
    }

    pub fn random_complex_point(&self, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..self.dim())
            .map(|i| {
                let (lo, hi) = self.real_range(i);
                Complex64::new(rng.random_range(lo..hi), rng.random_range(-self.imag_width..=self.imag_width))
            })
            .collect()
    }
}

/// Conserved quantity targeted by the iso-energetic solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conserved {
    Energy,
    Integral(usize),
}

/// A Hamiltonian system with its structure, integrals and domain.
#[derive(Clone)]
pub struct HamiltonianSystem {
    pub name: String,
    pub epsilon: f64,
    pub geometry: Arc<dyn Geometry>,
    pub model: Arc<dyn Model>,
    pub domain: Domain,
}

impl std::fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("n", &self.n())
            .field("integrals", &self.num_integrals())
            .field("case", &self.geometry.case())
            .field("domain", &self.domain)
            .finish()
    }
}

fn to_complex(z: &[f64]) -> Vec<Complex64> {
    z.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

impl HamiltonianSystem {
    pub fn new(
        name: impl Into<String>,
        epsilon: f64,
        geometry: Arc<dyn Geometry>,
        model: Arc<dyn Model>,
        domain: Domain,
    ) -> Result<Self, SystemError> {
        let n = model.n();
        if geometry.n() != n || domain.dim() != 2 * n || domain.radius.len() != 2 * n {
            return Err(SystemError::Invalid("geometry, model and domain dimensions differ".into()));
        }
        Ok(Self { name: name.into(), epsilon, geometry, model, domain })
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// Torus dimension `d = n − #integrals`.
    pub fn torus_dim(&self) -> usize {
        self.model.n() - self.model.num_integrals()
    }

    pub fn num_integrals(&self) -> usize {
        self.model.num_integrals()
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self, SystemError> {
        if domain.dim() != 2 * self.n() {
            return Err(SystemError::Invalid("domain dimension differs from 2n".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn check_conserved(&self, c: Conserved) -> Result<(), SystemError> {
        match c {
            Conserved::Integral(j) if j >= self.num_integrals() => {
                Err(SystemError::NoSuchIntegral { index: j, count: self.num_integrals() })
            }
            _ => Ok(()),
        }
    }

    pub fn conserved(&self, c: Conserved, z: &[Complex64]) -> Complex64 {
        match c {
            Conserved::Energy => self.model.hamiltonian(z),
            Conserved::Integral(j) => self.model.integrals(z)[j],
        }
    }

    /// `(Dc)^⊤` at `z`.
    pub fn d_conserved(&self, c: Conserved, z: &[Complex64]) -> CVec {
        match c {
            Conserved::Energy => self.model.grad_hamiltonian(z),
            Conserved::Integral(j) => self.model.d_integrals(z).row(j).transpose(),
        }
    }

    pub fn hess_conserved(&self, c: Conserved, z: &[Complex64]) -> CMat {
        match c {
            Conserved::Energy => self.model.hess_hamiltonian(z),
            Conserved::Integral(j) => self.model.hess_integral(j, z),
        }
    }

    pub fn hamiltonian_real(&self, z: &[f64]) -> f64 {
        self.model.hamiltonian(&to_complex(z)).re
    }

    pub fn vector_field_real(&self, z: &[f64]) -> DVector<f64> {
        self.model.vector_field(&to_complex(z)).map(|c| c.re)
    }

    pub fn integrals_real(&self, z: &[f64]) -> DVector<f64> {
        self.model.integrals(&to_complex(z)).map(|c| c.re)
    }

    pub fn integral_fields_real(&self, z: &[f64]) -> DMatrix<f64> {
        re(&self.model.integral_fields(&to_complex(z)))
    }

    pub fn symplectic_real(&self, z: &[f64]) -> DMatrix<f64> {
        re(&self.geometry.symplectic(&to_complex(z)))
    }
}

/// Names accepted by [`builtin_system`].
pub const BUILTIN_SYSTEMS: [&str; 5] =
    ["lagrangian_rotors", "symmetric_rotors", "free_rotor", "kicked_rotor", "faulty_symmetric_rotors"];

fn rotor_domain(n: usize) -> Domain {
    Domain { angles: n, centre: vec![0.0; 2 * n], radius: vec![3.0; 2 * n], imag_width: 0.25 }
}

/// Built-in fixtures, all in canonical coordinates.
///
/// * `lagrangian_rotors`: `n = d = 2`, `V = ε(cos 2πx₁ + cos 2π(x₁−x₂))`.
/// * `symmetric_rotors`: `n = 3`, `d = 2`, `V = ε cos 2πx₁ (1 + cos 2π(x₂−x₃))`, `p = y₂ + y₃`.
/// * `free_rotor`: `n = d = 2`, `V = 0`.
/// * `kicked_rotor`: `n = 2`, `V = cos 2πx₁` with `p = y₁`, which is not in involution.
/// * `faulty_symmetric_rotors`: `symmetric_rotors` with one sign of `X_p` flipped.
pub fn builtin_system(name: &str, epsilon: f64) -> Result<HamiltonianSystem, SystemError> {
    let rotors_b = |eps: f64| {
        TrigPotential {
            modes: vec![(eps, vec![1, 0, 0]), (0.5 * eps, vec![1, 1, -1]), (0.5 * eps, vec![1, -1, 1])],
        }
    };
    let (n, model): (usize, MechanicalModel) = match name {
        "lagrangian_rotors" => (
            2,
            MechanicalModel::new(
                2,
                TrigPotential { modes: vec![(epsilon, vec![1, 0]), (epsilon, vec![1, -1])] },
                vec![],
            )?,
        ),
        "symmetric_rotors" => (3, MechanicalModel::new(3, rotors_b(epsilon), vec![vec![0.0, 1.0, 1.0]])?),
        "faulty_symmetric_rotors" => {
            (3, MechanicalModel::new(3, rotors_b(epsilon), vec![vec![0.0, 1.0, 1.0]])?.with_fault(2, 0))
        }
        "free_rotor" => (2, MechanicalModel::new(2, TrigPotential { modes: vec![] }, vec![])?),
        "kicked_rotor" => (
            2,
            MechanicalModel::new(2, TrigPotential { modes: vec![(1.0, vec![1, 0])] }, vec![vec![1.0, 0.0]])?,
        ),
        other => return Err(SystemError::UnknownSystem(other.to_string())),
    };
    HamiltonianSystem::new(
        name,
        epsilon,
        Arc::new(ConstantGeometry::canonical(n)),
        Arc::new(model),
        rotor_domain(n),
    )
}

/// `{f, g}(z) = Df(z) Ω(z)^{-1} (Dg(z))^⊤` from the gradients of `f` and `g`.
pub fn poisson_bracket(
    geometry: &dyn Geometry,
    grad_f: &DVector<f64>,
    grad_g: &DVector<f64>,
    z: &[f64],
) -> Result<f64, SystemError> {
    let omega = re(&geometry.symplectic(&to_complex(z)));
    let inv = checked_inverse(&omega)?;
    Ok((grad_f.transpose() * inv * grad_g)[(0, 0)])
}

/// Outcome of a sampled hypothesis check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub samples: usize,
    pub max_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub worst_point: Option<Vec<f64>>,
}

impl CheckReport {
    fn from_defects(check: &str, tolerance: f64, samples: usize, defects: Vec<(f64, Vec<f64>)>) -> Self {
        let mut worst = None;
        let mut max_defect = 0.0_f64;
        for (value, z) in defects {
            if !(value <= max_defect) {
                max_defect = value;
                worst = Some(z);
            }
        }
        Self {
            check: check.to_string(),
            samples,
            max_defect,
            tolerance,
            passed: max_defect <= tolerance,
            worst_point: worst,
        }
    }
}

fn sample_points(sys: &HamiltonianSystem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sys.domain.random_real_point(&mut rng)).collect()
}

/// Checks `{H, p_j} = 0` and `{p_i, p_j} = 0` at random real points of the domain.
pub fn verify_involution(sys: &HamiltonianSystem, samples: usize, seed: u64) -> Result<CheckReport, SystemError> {
    let m = sys.num_integrals();
    let mut defects = Vec::with_capacity(samples);
    for z in sample_points(sys, samples, seed) {
        let cz = to_complex(&z);
        let dh = sys.model.grad_hamiltonian(&cz).map(|c| c.re);
        let dp = re(&sys.model.d_integrals(&cz));
        let mut worst = 0.0_f64;
        for j in 0..m {
            let pj = dp.row(j).transpose();
            worst = worst.max(poisson_bracket(sys.geometry.as_ref(), &dh, &pj, &z)?.abs());
            for i in 0..j {
                let pi = dp.row(i).transpose();
                worst = worst.max(poisson_bracket(sys.geometry.as_ref(), &pi, &pj, &z)?.abs());
            }
        }
        defects.push((worst, z));
    }
    Ok(CheckReport::from_defects("involution", BRACKET_TOL, samples, defects))
}

/// Checks `DX_H X_{p_j} = DX_{p_j} X_H` and `DX_{p_i} X_{p_j} = DX_{p_j} X_{p_i}`.
pub fn verify_commutation(sys: &HamiltonianSystem, samples: usize, seed: u64) -> CheckReport {
    let m = sys.num_integrals();
    let defects = sample_points(sys, samples, seed)
        .into_iter()
        .map(|z| {
            let cz = to_complex(&z);
            let xh = sys.model.vector_field(&cz);
            let dxh = sys.model.d_vector_field(&cz);
            let xp = sys.model.integral_fields(&cz);
            let dxp = sys.model.d_integral_fields(&cz);
            let mut worst = 0.0_f64;
            for j in 0..m {
                let col = xp.column(j).into_owned();
                worst = worst.max((&dxh * &col - &dxp[j] * &xh).camax());
                for i in 0..j {
                    let ci = xp.column(i).into_owned();
                    worst = worst.max((&dxp[i] * &col - &dxp[j] * &ci).camax());
                }
            }
            (worst, z)
        })
        .collect();
    CheckReport::from_defects("commutation", BRACKET_TOL, samples, defects)
}

/// Checks the algebraic identities of the structure: `Ω^⊤ = −Ω`, `G^⊤ = G > 0`,
/// `J^⊤Ω = G`, exactness `Ω = (Da)^⊤ − Da`, and compatibility in Case III.
pub fn verify_structure(sys: &HamiltonianSystem, samples: usize, seed: u64) -> CheckReport {
    let g = sys.geometry.as_ref();
    let h = 1e-5;
    let defects = sample_points(sys, samples, seed)
        .into_iter()
        .map(|z| {
            let cz = to_complex(&z);
            let omega = re(&g.symplectic(&cz));
            let metric = re(&g.metric(&cz));
            let j = re(&g.isomorphism(&cz));
            let mut worst = (&omega + omega.transpose()).amax();
            worst = worst.max((&metric - metric.transpose()).amax());
            let pd = metric.clone().symmetric_eigenvalues().min();
            if pd <= 0.0 {
                worst = worst.max(1.0);
            }
            worst = worst.max((j.transpose() * &omega - &metric).amax());
            let dim = z.len();
            let mut da = DMatrix::zeros(dim, dim);
            for k in 0..dim {
                let (mut zp, mut zm) = (cz.clone(), cz.clone());
                zp[k] += h;
                zm[k] -= h;
                let col = (g.action_form(&zp) - g.action_form(&zm)).map(|c| c.re / (2.0 * h));
                da.set_column(k, &col);
            }
            worst = worst.max((da.transpose() - &da - &omega).amax() / DERIVATIVE_TOL * BRACKET_TOL);
            if g.case() == FrameCase::III {
                let id = DMatrix::<f64>::identity(dim, dim);
                worst = worst.max((&j * &j + &id).amax());
                worst = worst.max((j.transpose() * &omega * &j - &omega).amax());
                worst = worst.max((j.transpose() * &metric * &j - &metric).amax());
            }
            let tilde = re(&g.tilde_symplectic(&cz));
            worst = worst.max((j.transpose() * &omega * &j - tilde).amax());
            (worst, z)
        })
        .collect();
    CheckReport::from_defects("structure", BRACKET_TOL, samples, defects)
}

fn relative_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / (1.0 + b.amax())
}

fn fd_column<F: Fn(&[Complex64]) -> CMat>(f: &F, cz: &[Complex64], k: usize, h: f64) -> DMatrix<f64> {
    let (mut zp, mut zm) = (cz.to_vec(), cz.to_vec());
    zp[k] += h;
    zm[k] -= h;
    (f(&zp) - f(&zm)).map(|c| c.re / (2.0 * h))
}

/// Finite-difference cross-check of every derivative callback plus the
/// vector-field identities `X_H = Ω^{-1}(DH)^⊤` and `X_p = Ω^{-1}(Dp)^⊤`.
pub fn verify_derivatives(sys: &HamiltonianSystem, samples: usize, seed: u64) -> Result<CheckReport, SystemError> {
    let model = sys.model.as_ref();
    let dim = 2 * sys.n();
    let m = sys.num_integrals();
    let h = 1e-5;
    let mut defects = Vec::with_capacity(samples);
    for z in sample_points(sys, samples, seed) {
        let cz = to_complex(&z);
        let mut worst = 0.0_f64;
        let as_col = |v: CVec| CMat::from_column_slice(v.len(), 1, v.as_slice());
        for k in 0..dim {
            let fd_h = fd_column(&|p: &[Complex64]| CMat::from_element(1, 1, model.hamiltonian(p)), &cz, k, h);
            worst = worst.max(relative_gap(&fd_h, &DMatrix::from_element(1, 1, model.grad_hamiltonian(&cz)[k].re)));
            let fd_grad = fd_column(&|p: &[Complex64]| as_col(model.grad_hamiltonian(p)), &cz, k, h);
            worst = worst.max(relative_gap(&fd_grad, &re(&model.hess_hamiltonian(&cz)).columns(k, 1).into_owned()));
            let fd_x = fd_column(&|p: &[Complex64]| as_col(model.vector_field(p)), &cz, k, h);
            worst = worst.max(relative_gap(&fd_x, &re(&model.d_vector_field(&cz)).columns(k, 1).into_owned()));
            let fd_dx = fd_column(&|p: &[Complex64]| model.d_vector_field(p), &cz, k, h);
            worst = worst.max(relative_gap(&fd_dx, &re(&model.d2_vector_field(&cz)[k])));
            if m > 0 {
                let fd_p = fd_column(&|p: &[Complex64]| as_col(model.integrals(p)), &cz, k, h);
                worst = worst.max(relative_gap(&fd_p, &re(&model.d_integrals(&cz)).columns(k, 1).into_owned()));
                let fd_xp = fd_column(&|p: &[Complex64]| model.integral_fields(p), &cz, k, h);
                let dxp = model.d_integral_fields(&cz);
                let analytic = DMatrix::from_fn(dim, m, |i, j| dxp[j][(i, k)].re);
                worst = worst.max(relative_gap(&fd_xp, &analytic));
                for j in 0..m {
                    let fd_dp = fd_column(&|p: &[Complex64]| model.d_integrals(p).rows(j, 1).transpose(), &cz, k, h);
                    worst = worst.max(relative_gap(&fd_dp, &re(&model.hess_integral(j, &cz)).columns(k, 1).into_owned()));
                    let fd_dxp = fd_column(&|p: &[Complex64]| model.d_integral_fields(p)[j].clone(), &cz, k, h);
                    worst = worst.max(relative_gap(&fd_dxp, &re(&model.d2_integral_fields(&cz)[j][k])));
                }
            }
        }
        let omega = re(&sys.geometry.symplectic(&cz));
        let inv = checked_inverse(&omega)?;
        let xh = model.vector_field(&cz).map(|c| c.re);
        let dh = model.grad_hamiltonian(&cz).map(|c| c.re);
        worst = worst.max((&inv * dh - xh).amax() / DERIVATIVE_TOL * 1e-10);
        if m > 0 {
            let xp = re(&model.integral_fields(&cz));
            let dp = re(&model.d_integrals(&cz));
            worst = worst.max((&inv * dp.transpose() - xp).amax() / DERIVATIVE_TOL * 1e-10);
        }
        defects.push((worst, z));
    }
    Ok(CheckReport::from_defects("derivatives", DERIVATIVE_TOL, samples, defects))
}

/// Full hypothesis validation of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub system: String,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

pub fn validate_system(sys: &HamiltonianSystem, samples: usize, seed: u64) -> Result<ValidationReport, SystemError> {
    let checks = vec![
        verify_structure(sys, samples, seed),
        verify_derivatives(sys, samples, seed.wrapping_add(1))?,
        verify_involution(sys, samples, seed.wrapping_add(2))?,
        verify_commutation(sys, samples, seed.wrapping_add(3)),
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { system: sys.name.clone(), checks, passed })
}

/// Geometric identity `DΩ[X_H] + (DX_H)^⊤Ω + Ω DX_H = O` at a real point.
pub fn lie_symplectic_defect(sys: &HamiltonianSystem, z: &[f64]) -> f64 {
    let cz = to_complex(z);
    let omega = re(&sys.geometry.symplectic(&cz));
    let d_omega = sys.geometry.d_symplectic(&cz);
    let xh = sys.model.vector_field(&cz).map(|c| c.re);
    let dxh = re(&sys.model.d_vector_field(&cz));
    let mut acc = dxh.transpose() * &omega + &omega * &dxh;
    for (k, slice) in d_omega.iter().enumerate() {
        acc += re(slice) * xh[k];
    }
    row_sum_norm(&acc)
}
