//! Explicit constants of the a-posteriori theorems and the hypothesis check.
//!
//! All arithmetic is plain double precision. Global constants are sampled
//! maxima with a 5% margin; the resulting certificate is a numerical
//! assessment, not a computer-assisted proof.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohomology::{russmann_constant, russmann_uniform};
use crate::fourier::FourierError;
use crate::frames::{FrameBundle, FrameError, TorusCandidate};
use crate::iso::FrequencyRay;
use crate::linalg::{
    checked_inverse, row_sum_norm, row_sum_norm_c, tensor_norm_c, tensor_norm_transpose_c,
};
use crate::solver::HypothesisMargin;
use crate::system::{CMat, Conserved, FrameCase, HamiltonianSystem, SystemError};

/// Safety factor applied to sampled global constants.
pub const SAMPLING_MARGIN: f64 = 1.05;
/// Default ratio between `σ` inputs and the measured norms.
pub const SIGMA_FACTOR: f64 = 1.1;
/// Absolute slack allowed when comparing measured norms with ledger bounds.
pub const TRUNCATION_SLACK: f64 = 1e-9;

pub const REPORT_HEADER: &str = "double-precision evaluation of explicit constants; sampled global \
constants carry a 5% margin; no directed rounding or interval arithmetic";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("ledger row {row} evaluates to {value}")]
    NonFinite { row: String, value: f64 },
    #[error("missing input: {0}")]
    MissingInput(String),
    #[error("unknown global constant {0}")]
    UnknownConstant(String),
    #[error("csv output failed: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Sampled,
    CanonicalExact,
    UserSupplied,
    Measured,
    Input,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalConstant {
    pub value: f64,
    pub provenance: Provenance,
}

/// Names of all global constants, in reporting order.
pub const GLOBAL_NAMES: [&str; 28] = [
    "c_Omega_0", "c_Omega_1", "c_tOmega_0", "c_tOmega_1", "c_tOmega_2", "c_G_0", "c_G_1", "c_G_2", "c_J_0",
    "c_J_1", "c_J_2", "c_JT_0", "c_JT_1", "c_H_1", "c_XH_0", "c_XH_1", "c_XH_2", "c_XHT_1", "c_p_1", "c_pT_1",
    "c_Xp_0", "c_Xp_1", "c_Xp_2", "c_XpT_0", "c_XpT_1", "c_XpT_2", "c_c_1", "c_c_2",
];

const GEOMETRY_NAMES: [&str; 13] = [
    "c_Omega_0", "c_Omega_1", "c_tOmega_0", "c_tOmega_1", "c_tOmega_2", "c_G_0", "c_G_1", "c_G_2", "c_J_0",
    "c_J_1", "c_J_2", "c_JT_0", "c_JT_1",
];

const INTEGRAL_NAMES: [&str; 8] = ["c_p_1", "c_pT_1", "c_Xp_0", "c_Xp_1", "c_Xp_2", "c_XpT_0", "c_XpT_1", "c_XpT_2"];

/// Bounds on the global objects over the domain `ℬ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalNormConstants {
    pub values: BTreeMap<String, GlobalConstant>,
    pub conserved: Conserved,
    pub samples: usize,
}

impl GlobalNormConstants {
    pub fn get(&self, name: &str) -> f64 {
        self.values.get(name).unwrap_or_else(|| panic!("unknown global constant {name}")).value
    }

    pub fn provenance(&self, name: &str) -> Provenance {
        self.values[name].provenance
    }

    pub fn set_user(&mut self, name: &str, value: f64) -> Result<(), CertificateError> {
        let slot = self.values.get_mut(name).ok_or_else(|| CertificateError::UnknownConstant(name.into()))?;
        *slot = GlobalConstant { value, provenance: Provenance::UserSupplied };
        Ok(())
    }

    /// Copy with every entry multiplied by `factor` (used for monotonicity probes).
    pub fn scaled_entry(&self, name: &str, factor: f64) -> Self {
        let mut out = self.clone();
        if let Some(c) = out.values.get_mut(name) {
            c.value *= factor;
        }
        out
    }
}

fn flatten2(t: Vec<Vec<CMat>>) -> Vec<CMat> {
    t.into_iter().flatten().collect()
}

/// Slices `∂X_p/∂z_k` of the `2n × m` map `X_p` built from the per-integral Jacobians.
fn xp_first(cols: &[CMat]) -> Vec<CMat> {
    if cols.is_empty() {
        return Vec::new();
    }
    let dim = cols[0].nrows();
    (0..dim)
        .map(|k| CMat::from_fn(dim, cols.len(), |i, j| cols[j][(i, k)]))
        .collect()
}

fn xp_second(per_integral: &[Vec<CMat>]) -> Vec<CMat> {
    if per_integral.is_empty() {
        return Vec::new();
    }
    let dim = per_integral[0].len();
    let m = per_integral.len();
    let mut out = Vec::with_capacity(dim * dim);
    for k in 0..dim {
        for l in 0..dim {
            out.push(CMat::from_fn(dim, m, |i, j| per_integral[j][k][(i, l)]));
        }
    }
    out
}

fn point_norms(sys: &HamiltonianSystem, c: Conserved, z: &[Complex64], geometry: bool) -> Vec<f64> {
    let g = &sys.geometry;
    let m = &sys.model;
    let mut out = BTreeMap::new();
    if geometry {
        out.insert("c_Omega_0", row_sum_norm_c(&g.symplectic(z)));
        out.insert("c_Omega_1", tensor_norm_c(&g.d_symplectic(z)));
        out.insert("c_tOmega_0", row_sum_norm_c(&g.tilde_symplectic(z)));
        out.insert("c_tOmega_1", tensor_norm_c(&g.d_tilde_symplectic(z)));
        out.insert("c_tOmega_2", tensor_norm_c(&flatten2(g.d2_tilde_symplectic(z))));
        out.insert("c_G_0", row_sum_norm_c(&g.metric(z)));
        out.insert("c_G_1", tensor_norm_c(&g.d_metric(z)));
        out.insert("c_G_2", tensor_norm_c(&flatten2(g.d2_metric(z))));
        let j = g.isomorphism(z);
        out.insert("c_J_0", row_sum_norm_c(&j));
        out.insert("c_JT_0", row_sum_norm_c(&j.transpose()));
        let dj = g.d_isomorphism(z);
        out.insert("c_J_1", tensor_norm_c(&dj));
        out.insert("c_JT_1", tensor_norm_transpose_c(&dj));
        out.insert("c_J_2", tensor_norm_c(&flatten2(g.d2_isomorphism(z))));
    }
    let grad = m.grad_hamiltonian(z);
    out.insert("c_H_1", grad.iter().map(|x| x.norm()).sum());
    out.insert("c_XH_0", m.vector_field(z).iter().fold(0.0, |a, x| a.max(x.norm())));
    let dxh = m.d_vector_field(z);
    out.insert("c_XH_1", row_sum_norm_c(&dxh));
    out.insert("c_XHT_1", row_sum_norm_c(&dxh.transpose()));
    out.insert("c_XH_2", tensor_norm_c(&m.d2_vector_field(z)));
    if m.num_integrals() > 0 {
        let dp = m.d_integrals(z);
        out.insert("c_p_1", row_sum_norm_c(&dp));
        out.insert("c_pT_1", row_sum_norm_c(&dp.transpose()));
        let xp = m.integral_fields(z);
        out.insert("c_Xp_0", row_sum_norm_c(&xp));
        out.insert("c_XpT_0", row_sum_norm_c(&xp.transpose()));
        let first = xp_first(&m.d_integral_fields(z));
        out.insert("c_Xp_1", tensor_norm_c(&first));
        out.insert("c_XpT_1", tensor_norm_transpose_c(&first));
        let second = xp_second(&m.d2_integral_fields(z));
        out.insert("c_Xp_2", tensor_norm_c(&second));
        out.insert("c_XpT_2", tensor_norm_transpose_c(&second));
    }
    out.insert("c_c_1", sys.d_conserved(c, z).iter().map(|x| x.norm()).sum());
    out.insert("c_c_2", sys.hess_conserved(c, z).iter().map(|x| x.norm()).sum());
    GLOBAL_NAMES.iter().map(|n| out.get(n).copied().unwrap_or(0.0)).collect()
}

/// Sample points: a complexified lattice with `density` real values per
/// coordinate at imaginary parts `±imag_width`, plus `random` seeded points.
pub fn sample_points(sys: &HamiltonianSystem, density: usize, random: usize, seed: u64) -> Vec<Vec<Complex64>> {
    let dom = &sys.domain;
    let dim = dom.dim();
    let per_axis: Vec<Vec<Complex64>> = (0..dim)
        .map(|i| {
            let (lo, hi) = dom.real_range(i);
            let q = density.max(2);
            (0..q)
                .flat_map(|t| {
                    let x = lo + (hi - lo) * t as f64 / (q - 1) as f64;
                    [Complex64::new(x, -dom.imag_width), Complex64::new(x, dom.imag_width)]
                })
                .collect()
        })
        .collect();
    let total: usize = per_axis.iter().map(|a| a.len()).product();
    let mut points: Vec<Vec<Complex64>> = (0..total)
        .map(|mut idx| {
            per_axis
                .iter()
                .map(|axis| {
                    let v = axis[idx % axis.len()];
                    idx /= axis.len();
                    v
                })
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    points.extend((0..random).map(|_| dom.random_complex_point(&mut rng)));
    points
}

/// Sampled suprema of every global constant over `ℬ`, times [`SAMPLING_MARGIN`].
///
/// A canonical structure gets its exact constants; without first integrals
/// every integral constant is exactly zero.
pub fn estimate_global_constants(
    sys: &HamiltonianSystem,
    c: Conserved,
    density: usize,
    random: usize,
    seed: u64,
) -> Result<GlobalNormConstants, CertificateError> {
    sys.check_conserved(c)?;
    let canonical = sys.geometry.is_canonical();
    let points = sample_points(sys, density, random, seed);
    let maxima = points
        .par_iter()
        .map(|z| point_norms(sys, c, z, !canonical))
        .reduce(
            || vec![0.0; GLOBAL_NAMES.len()],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect(),
        );
    let mut values = BTreeMap::new();
    for (name, max) in GLOBAL_NAMES.iter().zip(&maxima) {
        if !max.is_finite() {
            return Err(CertificateError::NonFinite { row: name.to_string(), value: *max });
        }
        values.insert(name.to_string(), GlobalConstant { value: max * SAMPLING_MARGIN, provenance: Provenance::Sampled });
    }
    if canonical {
        for name in GEOMETRY_NAMES {
            let exact = if name.ends_with("_0") { 1.0 } else { 0.0 };
            values.insert(name.to_string(), GlobalConstant { value: exact, provenance: Provenance::CanonicalExact });
        }
    }
    if sys.num_integrals() == 0 {
        for name in INTEGRAL_NAMES {
            values.insert(name.to_string(), GlobalConstant { value: 0.0, provenance: Provenance::CanonicalExact });
        }
    }
    Ok(GlobalNormConstants { values, conserved: c, samples: points.len() })
}

/// Measured norms of one candidate and the `σ` bounds derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredSigmas {
    pub dk_norm: f64,
    pub dk_transpose_norm: f64,
    pub b_norm: f64,
    /// `|⟨T⟩^{-1}|`, or `|⟨T_c⟩^{-1}|` for iso certificates.
    pub avg_t_inverse_norm: f64,
    pub sigma_k: f64,
    pub sigma_kt: f64,
    pub sigma_b: f64,
    pub sigma_t: f64,
    pub domain_distance: f64,
}

impl MeasuredSigmas {
    pub fn measure(frames: &FrameBundle, cand: &TorusCandidate, iso: bool, factor: f64) -> Result<Self, CertificateError> {
        let rho = cand.rho;
        let dk_norm = frames.dk.norm(rho)?;
        let dk_transpose_norm = frames.dk.transpose().norm(rho)?;
        let b_norm = frames.b.norm(rho)?;
        let inv = if iso { frames.avg_tc_inverse()? } else { frames.avg_t_inverse()? };
        let avg_t_inverse_norm = row_sum_norm(&inv);
        Ok(Self {
            dk_norm,
            dk_transpose_norm,
            b_norm,
            avg_t_inverse_norm,
            sigma_k: factor * dk_norm,
            sigma_kt: factor * dk_transpose_norm,
            sigma_b: factor * b_norm,
            sigma_t: factor * avg_t_inverse_norm,
            domain_distance: cand.domain_distance(rho),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerMode {
    Ordinary,
    Iso,
}

/// Scalar inputs of the ledger besides the global constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerInputs {
    pub mode: LedgerMode,
    pub case: FrameCase,
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub tau: f64,
    pub rho: f64,
    pub delta: f64,
    pub a1: f64,
    pub a2: f64,
    pub frak_c: f64,
    pub c_r: f64,
    pub sigmas: MeasuredSigmas,
    /// `σ_ω`, `|ω_*|` and `dist(ω, ∂Θ)`; required in iso mode.
    pub sigma_omega: Option<f64>,
    pub omega_star_norm: Option<f64>,
    pub ray_margin: Option<f64>,
}

impl LedgerInputs {
    pub fn a3(&self) -> f64 {
        3.0 * self.a1 * self.a2 / ((self.a1 - 1.0) * (self.a2 - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub name: String,
    pub value: f64,
    pub formula_label: String,
    pub table: String,
    pub provenance: Provenance,
}

/// Every constant of the chain, in evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    pub mode: LedgerMode,
    pub rows: Vec<LedgerRow>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

/// Rows that vanish identically in Case III.
pub const CASE_III_ZERO_ROWS: [&str; 4] = ["C_A", "C_LieA", "C_DeltaA", "C_DeltaLieA"];

impl ConstantLedger {
    fn new(mode: LedgerMode) -> Self {
        Self { mode, rows: Vec::new(), index: BTreeMap::new() }
    }

    fn push(&mut self, name: &str, table: &str, formula: &str, value: f64, provenance: Provenance) -> Result<f64, CertificateError> {
        if !value.is_finite() {
            return Err(CertificateError::NonFinite { row: name.into(), value });
        }
        let row = LedgerRow {
            name: name.into(),
            value,
            formula_label: formula.into(),
            table: table.into(),
            provenance,
        };
        match self.index.get(name) {
            Some(&i) => self.rows[i] = row,
            None => {
                self.index.insert(name.into(), self.rows.len());
                self.rows.push(row);
            }
        }
        Ok(value)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.index.get(name).map(|&i| self.rows[i].value)
    }

    /// Value of a row known to exist.
    pub fn value(&self, name: &str) -> f64 {
        self.get(name).unwrap_or_else(|| panic!("ledger has no row {name}"))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CertificateError> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row).map_err(|e| CertificateError::Io(e.to_string()))?;
        }
        w.flush().map_err(|e| CertificateError::Io(e.to_string()))
    }

    /// Names of rows whose values differ from `other` beyond a relative `1e-15`.
    pub fn diff(&self, other: &Self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| match other.get(&r.name) {
                Some(v) => (r.value - v).abs() > 1e-15 * r.value.abs().max(v.abs()),
                None => true,
            })
            .map(|r| r.name.clone())
            .collect()
    }
}

/// Evaluates the geometry, step and convergence rows (or their iso counterparts) in dependency order.
pub fn build_ledger(globals: &GlobalNormConstants, inp: &LedgerInputs) -> Result<ConstantLedger, CertificateError> {
    let iso = inp.mode == LedgerMode::Iso;
    let mut lg = ConstantLedger::new(inp.mode);
    let g = |name: &str| globals.get(name);
    for name in GLOBAL_NAMES {
        let prov = globals.provenance(name);
        let label = match prov {
            Provenance::Sampled => "sampled supremum over the domain times 1.05",
            Provenance::CanonicalExact => "exact value for this structure",
            _ => "user supplied",
        };
        lg.push(name, "global", label, g(name), prov)?;
    }
    let (n, d) = (inp.n as f64, inp.d as f64);
    let (gamma, tau, rho, delta) = (inp.gamma, inp.tau, inp.rho, inp.delta);
    let (a1, a2, a3) = (inp.a1, inp.a2, inp.a3());
    let (c_r, fc) = (inp.c_r, inp.frak_c);
    let s = &inp.sigmas;
    let (sk, skt, sb) = (s.sigma_k, s.sigma_kt, s.sigma_b);
    let st = s.sigma_t;
    let gd = gamma * delta.powf(tau);
    let case3 = inp.case == FrameCase::III;
    let star = |v: f64| if case3 { 0.0 } else { v };

    for (name, v, prov) in [
        ("gamma", gamma, Provenance::Input),
        ("tau", tau, Provenance::Input),
        ("rho", rho, Provenance::Input),
        ("delta", delta, Provenance::Input),
        ("a1", a1, Provenance::Input),
        ("a2", a2, Provenance::Input),
        ("a3", a3, Provenance::Derived),
        ("frak_c", fc, Provenance::Input),
        ("c_R", c_r, Provenance::Input),
        ("sigma_K", sk, Provenance::Measured),
        ("sigma_KT", skt, Provenance::Measured),
        ("sigma_B", sb, Provenance::Measured),
        (if iso { "sigma_Tc" } else { "sigma_T" }, st, Provenance::Measured),
    ] {
        lg.push(name, "input", "", v, prov)?;
    }

    const GEO: &str = "geometry";
    let c_lie_ok = lg.push(
        "C_LieOmegaK",
        GEO,
        "2n c_Omega_0 sigma_K + sigma_KT c_Omega_1 sigma_K delta + d sigma_KT c_Omega_0",
        2.0 * n * g("c_Omega_0") * sk + skt * g("c_Omega_1") * sk * delta + d * skt * g("c_Omega_0"),
        Provenance::Derived,
    )?;
    let p = Provenance::Derived;
    lg.push("C_OmegaK", GEO, "c_R C_LieOmegaK", c_r * c_lie_ok, p)?;
    let c_l = lg.push("C_L", GEO, "sigma_K + c_Xp_0", sk + g("c_Xp_0"), p)?;
    let c_lt = lg.push("C_LT", GEO, "max{sigma_KT, c_XpT_0}", skt.max(g("c_XpT_0")), p)?;
    let c_ol = lg.push(
        "C_OmegaL",
        GEO,
        "c_R max{C_LieOmegaK + c_pT_1, d c_p_1}",
        c_r * (c_lie_ok + g("c_pT_1")).max(d * g("c_p_1")),
        p,
    )?;
    lg.push("C_GL", GEO, "C_LT c_G_0 C_L", c_lt * g("c_G_0") * c_l, p)?;
    let c_tol = lg.push("C_tOmegaL", GEO, "C_LT c_tOmega_0 C_L", c_lt * g("c_tOmega_0") * c_l, p)?;
    let c_n0 = lg.push("C_N0", GEO, "c_J_0 C_L", g("c_J_0") * c_l, p)?;
    let c_n0t = lg.push("C_N0T", GEO, "C_LT c_JT_0", c_lt * g("c_JT_0"), p)?;
    let c_a = lg.push("C_A", GEO, "1/2 sigma_B^2 C_tOmegaL (0 in Case III)", star(0.5 * sb * sb * c_tol), p)?;
    let c_n = lg.push("C_N", GEO, "C_L C_A + C_N0 sigma_B", c_l * c_a + c_n0 * sb, p)?;
    let c_nt = lg.push("C_NT", GEO, "C_A C_LT + sigma_B C_N0T", c_a * c_lt + sb * c_n0t, p)?;
    let chi0 = if c_a == 0.0 { 1.0 } else { 0.0 };
    let c_sym = lg.push(
        "C_sym",
        GEO,
        "(1 + C_A) max{1, C_A + sigma_B^2 chi_0(C_A)} C_OmegaL",
        (1.0 + c_a) * 1f64.max(c_a + sb * sb * chi0) * c_ol,
        p,
    )?;
    let c_lie_k = lg.push("C_LieK", GEO, "delta frak_c + c_XH_0", delta * fc + g("c_XH_0"), p)?;
    let c_lie_l = lg.push(
        "C_LieL",
        GEO,
        "d frak_c + c_XH_1 sigma_K + c_Xp_1 C_LieK",
        d * fc + g("c_XH_1") * sk + g("c_Xp_1") * c_lie_k,
        p,
    )?;
    let c_lie_lt = lg.push(
        "C_LieLT",
        GEO,
        "max{2n frak_c + c_XHT_1 sigma_K, c_XpT_1 C_LieK}",
        (2.0 * n * fc + g("c_XHT_1") * sk).max(g("c_XpT_1") * c_lie_k),
        p,
    )?;
    let c_lie_j = lg.push("C_LieJ", GEO, "c_J_1 C_LieK", g("c_J_1") * c_lie_k, p)?;
    let c_lie_g = lg.push("C_LieG", GEO, "c_G_1 C_LieK", g("c_G_1") * c_lie_k, p)?;
    let c_lie_to = lg.push("C_LietOmega", GEO, "c_tOmega_1 C_LieK", g("c_tOmega_1") * c_lie_k, p)?;
    let c_lie_n0 = lg.push("C_LieN0", GEO, "C_LieJ C_L + c_J_0 C_LieL", c_lie_j * c_l + g("c_J_0") * c_lie_l, p)?;
    let c_lie_gl = lg.push(
        "C_LieGL",
        GEO,
        "C_LieLT c_G_0 C_L + C_LT C_LieG C_L + C_LT c_G_0 C_LieL",
        c_lie_lt * g("c_G_0") * c_l + c_lt * c_lie_g * c_l + c_lt * g("c_G_0") * c_lie_l,
        p,
    )?;
    let c_lie_tol = lg.push(
        "C_LietOmegaL",
        GEO,
        "C_LieLT c_tOmega_0 C_L + C_LT C_LietOmega C_L + C_LT c_tOmega_0 C_LieL",
        c_lie_lt * g("c_tOmega_0") * c_l + c_lt * c_lie_to * c_l + c_lt * g("c_tOmega_0") * c_lie_l,
        p,
    )?;
    let c_lie_b = lg.push("C_LieB", GEO, "sigma_B^2 C_LieGL", sb * sb * c_lie_gl, p)?;
    let c_lie_a = lg.push(
        "C_LieA",
        GEO,
        "C_LieB C_tOmegaL sigma_B + 1/2 sigma_B^2 C_LietOmegaL (0 in Case III)",
        star(c_lie_b * c_tol * sb + 0.5 * sb * sb * c_lie_tol),
        p,
    )?;
    let c_lie_n = lg.push(
        "C_LieN",
        GEO,
        "C_LieL C_A + C_L C_LieA + C_LieN0 sigma_B + C_N0 C_LieB",
        c_lie_l * c_a + c_l * c_lie_a + c_lie_n0 * sb + c_n0 * c_lie_b,
        p,
    )?;
    let c_lop_l = lg.push("C_LopL", GEO, "d + c_Xp_1 delta", d + g("c_Xp_1") * delta, p)?;
    let c_lop_lt = lg.push("C_LopLT", GEO, "max{2n, c_XpT_1 delta}", (2.0 * n).max(g("c_XpT_1") * delta), p)?;
    let c_lop_n = lg.push(
        "C_LopN",
        GEO,
        "C_LopL frak_c C_A + c_XH_1 C_N0 sigma_B + C_L C_LieA + C_LieN0 sigma_B + C_N0 C_LieB",
        c_lop_l * fc * c_a + g("c_XH_1") * c_n0 * sb + c_l * c_lie_a + c_lie_n0 * sb + c_n0 * c_lie_b,
        p,
    )?;
    let c_t = lg.push("C_T", GEO, "C_NT c_Omega_0 C_LopN", c_nt * g("c_Omega_0") * c_lop_n, p)?;
    let c_lie_oml = lg.push(
        "C_LieOmegaL",
        GEO,
        "max{C_LieOmegaK + c_pT_1, d c_p_1}",
        (c_lie_ok + g("c_pT_1")).max(d * g("c_p_1")),
        p,
    )?;
    let c_red11 = lg.push("C_red11", GEO, "C_NT c_Omega_0 C_LopL", c_nt * g("c_Omega_0") * c_lop_l, p)?;
    let c_red21 = lg.push("C_red21", GEO, "C_LT c_Omega_0 C_LopL", c_lt * g("c_Omega_0") * c_lop_l, p)?;
    let c_red22 = lg.push(
        "C_red22",
        GEO,
        "(C_LT c_Omega_1 C_N delta + C_LopLT c_Omega_0 C_N + C_LieOmegaL C_A) gamma delta^tau + C_OmegaL C_LieA",
        (c_lt * g("c_Omega_1") * c_n * delta + c_lop_lt * g("c_Omega_0") * c_n + c_lie_oml * c_a) * gd
            + c_ol * c_lie_a,
        p,
    )?;
    let c_red = lg.push(
        "C_red",
        GEO,
        "max{C_red11 gamma delta^tau, C_red21 gamma delta^tau + C_red22}",
        (c_red11 * gd).max(c_red21 * gd + c_red22),
        p,
    )?;

    let step = if iso { "step_iso" } else { "step" };
    let co0 = g("c_Omega_0");
    let (c_xi_n0, c_xi_omega, c_omega, c_delta_omega) = if iso {
        let sw = inp.sigma_omega.ok_or_else(|| CertificateError::MissingInput("sigma_omega".into()))?;
        let wn = inp.omega_star_norm.ok_or_else(|| CertificateError::MissingInput("omega_star_norm".into()))?;
        lg.push("sigma_omega", "input", "", sw, Provenance::Input)?;
        let v = lg.push(
            "C_xiN0",
            step,
            "sigma_Tc max{C_NT c_Omega_0 gamma delta^tau + c_R C_T C_LT c_Omega_0, gamma delta^tau + c_R c_c_1 C_N C_LT c_Omega_0}",
            st * (c_nt * co0 * gd + c_r * c_t * c_lt * co0).max(gd + c_r * g("c_c_1") * c_n * c_lt * co0),
            p,
        )?;
        let xw = lg.push("C_xiomega", step, "C_xiN0", v, p)?;
        let cw = lg.push("C_omega", step, "sigma_omega |omega_*|", sw * wn, p)?;
        let dw = lg.push("C_Deltaomega", step, "C_omega C_xiN0", cw * v, p)?;
        (v, xw, cw, dw)
    } else {
        let v = lg.push(
            "C_xiN0",
            step,
            "sigma_T (C_NT c_Omega_0 gamma delta^tau + c_R C_T C_LT c_Omega_0)",
            st * (c_nt * co0 * gd + c_r * c_t * c_lt * co0),
            p,
        )?;
        (v, 0.0, 0.0, 0.0)
    };
    let c_xi_n = lg.push("C_xiN", step, "C_xiN0 + c_R C_LT c_Omega_0", c_xi_n0 + c_r * c_lt * co0, p)?;
    let c_xi_l = lg.push(
        "C_xiL",
        step,
        "c_R (C_NT c_Omega_0 gamma delta^tau + C_T C_xiN)",
        c_r * (c_nt * co0 * gd + c_t * c_xi_n),
        p,
    )?;
    let c_xi = lg.push("C_xi", step, "max{C_xiL, C_xiN gamma delta^tau}", c_xi_l.max(c_xi_n * gd), p)?;
    let c_dk = lg.push("C_DeltaK", step, "C_L C_xiL + C_N C_xiN gamma delta^tau", c_l * c_xi_l + c_n * c_xi_n * gd, p)?;
    let c_lie_xin = lg.push("C_LiexiN", step, "C_LT c_Omega_0", c_lt * co0, p)?;
    let c_lie_xil = if iso {
        lg.push(
            "C_LiexiL",
            step,
            "C_NT c_Omega_0 gamma delta^tau + C_T C_xiN + C_omega C_xiomega",
            c_nt * co0 * gd + c_t * c_xi_n + c_omega * c_xi_omega,
            p,
        )?
    } else {
        lg.push("C_LiexiL", step, "C_NT c_Omega_0 gamma delta^tau + C_T C_xiN", c_nt * co0 * gd + c_t * c_xi_n, p)?
    };
    let c_lie_xi = lg.push("C_Liexi", step, "max{C_LiexiL, C_LiexiN gamma delta^tau}", c_lie_xil.max(c_lie_xin * gd), p)?;
    let c_lin = if iso {
        lg.push(
            "C_lin",
            step,
            "C_red C_xi + c_Omega_0 C_sym C_Liexi gamma delta^tau + max{C_A, 1} C_OmegaL C_omega C_xiomega gamma delta^tau",
            c_red * c_xi + co0 * c_sym * c_lie_xi * gd + c_a.max(1.0) * c_ol * c_omega * c_xi_omega * gd,
            p,
        )?
    } else {
        lg.push(
            "C_lin",
            step,
            "C_red C_xi + c_Omega_0 C_sym C_Liexi gamma delta^tau",
            c_red * c_xi + co0 * c_sym * c_lie_xi * gd,
            p,
        )?
    };
    let lie_dk_formula = "C_LieL C_xiL + (C_L C_LiexiL + C_LieN C_xiN) gamma delta^tau + C_N C_LiexiN gamma^2 delta^{2 tau}";
    let lie_dk_value = c_lie_l * c_xi_l + (c_l * c_lie_xil + c_lie_n * c_xi_n) * gd + c_n * c_lie_xin * gd * gd;
    let e_base = 2.0 * (c_l + c_n) * c_lin * gamma * delta.powf(tau - 1.0) + 0.5 * g("c_XH_2") * c_dk * c_dk;
    let c_delta_lie_k = if iso {
        let c_lie_dk = lg.push("C_LieDeltaK", step, lie_dk_formula, lie_dk_value, p)?;
        let c_e = lg.push(
            "C_E",
            step,
            "2(C_L + C_N) C_lin gamma delta^{tau-1} + 1/2 c_XH_2 C_DeltaK^2 + C_xiomega C_LieDeltaK gamma delta^tau",
            e_base + c_xi_omega * c_lie_dk * gd,
            p,
        )?;
        let c_lin_w = lg.push("C_linomega", step, "d c_R c_c_1 C_xiL", d * c_r * g("c_c_1") * c_xi_l, p)?;
        let c_ew = lg.push(
            "C_Eomega",
            step,
            "C_linomega gamma delta^{tau-1} + 1/2 c_c_2 C_DeltaK^2",
            c_lin_w * gamma * delta.powf(tau - 1.0) + 0.5 * g("c_c_2") * c_dk * c_dk,
            p,
        )?;
        lg.push("C_Ec", step, "max{C_E, C_Eomega}", c_e.max(c_ew), p)?;
        let sw = inp.sigma_omega.unwrap_or(0.0);
        lg.push(
            "C_DeltaLieK",
            step,
            "sigma_omega C_xiomega C_LieK gamma delta^tau + C_LieDeltaK",
            sw * c_xi_omega * c_lie_k * gd + c_lie_dk,
            p,
        )?
    } else {
        lg.push(
            "C_E",
            step,
            "2(C_L + C_N) C_lin gamma delta^{tau-1} + 1/2 c_XH_2 C_DeltaK^2",
            e_base,
            p,
        )?;
        lg.push("C_DeltaLieK", step, lie_dk_formula, lie_dk_value, p)?
    };
    let c_dl = lg.push("C_DeltaL", step, "(d + c_Xp_1 delta) C_DeltaK", (d + g("c_Xp_1") * delta) * c_dk, p)?;
    let c_dlt = lg.push(
        "C_DeltaLT",
        step,
        "max{2n, c_XpT_1 delta} C_DeltaK",
        (2.0 * n).max(g("c_XpT_1") * delta) * c_dk,
        p,
    )?;
    let c_dg = lg.push("C_DeltaG", step, "c_G_1 C_DeltaK", g("c_G_1") * c_dk, p)?;
    let c_dgl = lg.push(
        "C_DeltaGL",
        step,
        "C_LT c_G_0 C_DeltaL + C_LT C_DeltaG C_L delta + C_DeltaLT c_G_0 C_L",
        c_lt * g("c_G_0") * c_dl + c_lt * c_dg * c_l * delta + c_dlt * g("c_G_0") * c_l,
        p,
    )?;
    let c_db = lg.push("C_DeltaB", step, "2 sigma_B^2 C_DeltaGL", 2.0 * sb * sb * c_dgl, p)?;
    let c_dto = lg.push("C_DeltatOmega", step, "c_tOmega_1 C_DeltaK", g("c_tOmega_1") * c_dk, p)?;
    let c_dtol = lg.push(
        "C_DeltatOmegaL",
        step,
        "C_LT c_tOmega_0 C_DeltaL + C_LT C_DeltatOmega C_L delta + C_DeltaLT c_tOmega_0 C_L",
        c_lt * g("c_tOmega_0") * c_dl + c_lt * c_dto * c_l * delta + c_dlt * g("c_tOmega_0") * c_l,
        p,
    )?;
    let c_da = lg.push(
        "C_DeltaA",
        step,
        "sigma_B C_tOmegaL C_DeltaB + 1/2 sigma_B^2 C_DeltatOmegaL (0 in Case III)",
        star(sb * c_tol * c_db + 0.5 * sb * sb * c_dtol),
        p,
    )?;
    let c_dj = lg.push("C_DeltaJ", step, "c_J_1 C_DeltaK", g("c_J_1") * c_dk, p)?;
    let c_djt = lg.push("C_DeltaJT", step, "c_JT_1 C_DeltaK", g("c_JT_1") * c_dk, p)?;
    let c_dn0 = lg.push("C_DeltaN0", step, "c_J_0 C_DeltaL + C_DeltaJ C_L delta", g("c_J_0") * c_dl + c_dj * c_l * delta, p)?;
    let c_dn0t = lg.push(
        "C_DeltaN0T",
        step,
        "C_DeltaLT c_JT_0 + C_LT C_DeltaJT delta",
        c_dlt * g("c_JT_0") + c_lt * c_djt * delta,
        p,
    )?;
    let c_dn = lg.push(
        "C_DeltaN",
        step,
        "C_L C_DeltaA + C_DeltaL C_A + C_N0 C_DeltaB + C_DeltaN0 sigma_B",
        c_l * c_da + c_dl * c_a + c_n0 * c_db + c_dn0 * sb,
        p,
    )?;
    let c_dnt = lg.push(
        "C_DeltaNT",
        step,
        "C_A C_DeltaLT + C_DeltaA C_LT + C_DeltaB C_N0T + sigma_B C_DeltaN0T",
        c_a * c_dlt + c_da * c_lt + c_db * c_n0t + sb * c_dn0t,
        p,
    )?;
    let c_dlie_l = lg.push(
        "C_DeltaLieL",
        step,
        "d C_DeltaLieK + c_Xp_1 C_DeltaLieK delta + c_Xp_2 C_DeltaK C_LieK delta",
        d * c_delta_lie_k + g("c_Xp_1") * c_delta_lie_k * delta + g("c_Xp_2") * c_dk * c_lie_k * delta,
        p,
    )?;
    let c_dlie_lt = lg.push(
        "C_DeltaLieLT",
        step,
        "max{2n C_DeltaLieK, c_XpT_1 C_DeltaLieK delta + c_XpT_2 C_DeltaK C_LieK delta}",
        (2.0 * n * c_delta_lie_k).max(g("c_XpT_1") * c_delta_lie_k * delta + g("c_XpT_2") * c_dk * c_lie_k * delta),
        p,
    )?;
    let c_dlie_g = lg.push(
        "C_DeltaLieG",
        step,
        "c_G_1 C_DeltaLieK + c_G_2 C_DeltaK C_LieK",
        g("c_G_1") * c_delta_lie_k + g("c_G_2") * c_dk * c_lie_k,
        p,
    )?;
    let nine = |c0: f64, c1: f64, d_lie: f64| {
        c_lie_lt * c0 * c_dl
            + c_lie_lt * c1 * c_dk * c_l * delta
            + c_dlie_lt * c0 * c_l
            + c_lt * c1 * c_lie_k * c_dl
            + c_lt * d_lie * c_l * delta
            + c_dlt * c1 * c_lie_k * c_l
            + c_lt * c0 * c_dlie_l
            + c_lt * c1 * c_dk * c_lie_l * delta
            + c_dlt * c0 * c_lie_l
    };
    let c_dlie_gl = lg.push(
        "C_DeltaLieGL",
        step,
        "C_LieLT c_G_0 C_DeltaL + C_LieLT c_G_1 C_DeltaK C_L delta + C_DeltaLieLT c_G_0 C_L + C_LT c_G_1 C_LieK C_DeltaL \
         + C_LT C_DeltaLieG C_L delta + C_DeltaLT c_G_1 C_LieK C_L + C_LT c_G_0 C_DeltaLieL + C_LT c_G_1 C_DeltaK C_LieL delta \
         + C_DeltaLT c_G_0 C_LieL",
        nine(g("c_G_0"), g("c_G_1"), c_dlie_g),
        p,
    )?;
    let c_dlie_b = lg.push(
        "C_DeltaLieB",
        step,
        "2 sigma_B C_LieGL C_DeltaB + sigma_B^2 C_DeltaLieGL",
        2.0 * sb * c_lie_gl * c_db + sb * sb * c_dlie_gl,
        p,
    )?;
    let c_dlie_to = lg.push(
        "C_DeltaLietOmega",
        step,
        "c_tOmega_1 C_DeltaLieK + c_tOmega_2 C_DeltaK C_LieK",
        g("c_tOmega_1") * c_delta_lie_k + g("c_tOmega_2") * c_dk * c_lie_k,
        p,
    )?;
    let c_dlie_tol = lg.push(
        "C_DeltaLietOmegaL",
        step,
        "same nine-term form as C_DeltaLieGL with c_tOmega_0, c_tOmega_1, C_DeltaLietOmega",
        nine(g("c_tOmega_0"), g("c_tOmega_1"), c_dlie_to),
        p,
    )?;
    let c_dlie_a = lg.push(
        "C_DeltaLieA",
        step,
        "C_LieB C_tOmegaL C_DeltaB + C_LieB C_DeltatOmegaL sigma_B + C_DeltaLieB C_tOmegaL sigma_B \
         + sigma_B C_LietOmegaL C_DeltaB + 1/2 sigma_B^2 C_DeltaLietOmegaL (0 in Case III)",
        star(
            c_lie_b * c_tol * c_db
                + c_lie_b * c_dtol * sb
                + c_dlie_b * c_tol * sb
                + sb * c_lie_tol * c_db
                + 0.5 * sb * sb * c_dlie_tol,
        ),
        p,
    )?;
    let c_dlie_j = lg.push(
        "C_DeltaLieJ",
        step,
        "c_J_1 C_DeltaLieL + c_J_2 C_DeltaK C_LieK",
        g("c_J_1") * c_dlie_l + g("c_J_2") * c_dk * c_lie_k,
        p,
    )?;
    let c_dlie_n0 = lg.push(
        "C_DeltaLieN0",
        step,
        "C_LieJ C_DeltaL + C_DeltaLieJ C_L delta + c_J_0 C_DeltaLieL + C_DeltaJ C_LieL delta",
        c_lie_j * c_dl + c_dlie_j * c_l * delta + g("c_J_0") * c_dlie_l + c_dj * c_lie_l * delta,
        p,
    )?;
    let c_dlie_n = lg.push(
        "C_DeltaLieN",
        step,
        "C_LieL C_DeltaA + C_DeltaLieL C_A + C_L C_DeltaLieA + C_DeltaL C_LieA + C_LieN0 C_DeltaB + C_DeltaLieN0 sigma_B \
         + C_N0 C_DeltaLieB + C_DeltaN0 C_LieB",
        c_lie_l * c_da
            + c_dlie_l * c_a
            + c_l * c_dlie_a
            + c_dl * c_lie_a
            + c_lie_n0 * c_db
            + c_dlie_n0 * sb
            + c_n0 * c_dlie_b
            + c_dn0 * c_lie_b,
        p,
    )?;
    let c_dlop_n = lg.push(
        "C_DeltaLopN",
        step,
        "c_XH_1 C_DeltaN + c_XH_2 C_DeltaK C_N delta + C_DeltaLieN",
        g("c_XH_1") * c_dn + g("c_XH_2") * c_dk * c_n * delta + c_dlie_n,
        p,
    )?;
    let c_dt = lg.push(
        "C_DeltaT",
        step,
        "C_NT c_Omega_0 C_DeltaLopN + C_NT c_Omega_1 C_DeltaK C_LopN delta + C_DeltaNT c_Omega_0 C_LopN",
        c_nt * co0 * c_dlop_n + c_nt * g("c_Omega_1") * c_dk * c_lop_n * delta + c_dnt * co0 * c_lop_n,
        p,
    )?;
    let c_dtinv = if iso {
        let c_dtc = lg.push(
            "C_DeltaTc",
            step,
            "max{C_DeltaT + C_Deltaomega gamma delta^{tau+1}, c_c_1 C_DeltaN + c_c_2 C_DeltaK C_N delta}",
            (c_dt + c_delta_omega * gd * delta).max(g("c_c_1") * c_dn + g("c_c_2") * c_dk * c_n * delta),
            p,
        )?;
        lg.push("C_DeltaTcinv", step, "2 sigma_Tc^2 C_DeltaTc", 2.0 * st * st * c_dtc, p)?
    } else {
        lg.push("C_DeltaTinv", step, "2 sigma_T^2 C_DeltaT", 2.0 * st * st * c_dt, p)?
    };

    let conv = if iso { "convergence_iso" } else { "convergence" };
    let margin = |sigma: f64, measured: f64| sigma - measured;
    let c_d1 = lg.push(
        "C_Delta1",
        conv,
        "max{d C_DeltaK/(sigma_K - |DK|), 2n C_DeltaK/(sigma_KT - |DK^T|), C_DeltaB/(sigma_B - |B|), C_DeltaTinv/(sigma_T - |<T>^-1|)}",
        (d * c_dk / margin(sk, s.dk_norm))
            .max(2.0 * n * c_dk / margin(skt, s.dk_transpose_norm))
            .max(c_db / margin(sb, s.b_norm))
            .max(c_dtinv / margin(st, s.avg_t_inverse_norm)),
        p,
    )?;
    let c_d2 = lg.push(
        "C_Delta2",
        conv,
        "C_DeltaK delta / dist(K(T_rho), boundary)",
        c_dk * delta / s.domain_distance,
        p,
    )?;
    let mut c_delta = (gamma * gamma * delta.powf(2.0 * tau) / fc)
        .max(2.0 * c_sym * gd)
        .max(c_d1 / (1.0 - a1.powf(1.0 - 2.0 * tau)))
        .max(c_d2 / (1.0 - a1.powf(-2.0 * tau)));
    if iso {
        let rm = inp.ray_margin.ok_or_else(|| CertificateError::MissingInput("ray_margin".into()))?;
        let c_d3 = lg.push(
            "C_Delta3",
            conv,
            "C_Deltaomega gamma delta^{tau+1} / dist(omega, boundary of ray)",
            c_delta_omega * gd * delta / rm,
            p,
        )?;
        c_delta = c_delta.max(c_d3 / (1.0 - a1.powf(1.0 - 3.0 * tau)));
    }
    let c_delta = lg.push(
        "C_Delta",
        conv,
        if iso {
            "max{gamma^2 delta^{2tau}/frak_c, 2 C_sym gamma delta^tau, C_Delta1/(1-a1^{1-2tau}), C_Delta2/(1-a1^{-2tau}), C_Delta3/(1-a1^{1-3tau})}"
        } else {
            "max{gamma^2 delta^{2tau}/frak_c, 2 C_sym gamma delta^tau, C_Delta1/(1-a1^{1-2tau}), C_Delta2/(1-a1^{-2tau})}"
        },
        c_delta,
        p,
    )?;
    let c_e_final = if iso { lg.value("C_Ec") } else { lg.value("C_E") };
    lg.push(
        "frakC1",
        conv,
        if iso {
            "max{(a1 a3)^{4tau} C_Ec, a3^{2tau+1} gamma^2 rho^{2tau-1} C_Delta}"
        } else {
            "max{(a1 a3)^{4tau} C_E, a3^{2tau+1} gamma^2 rho^{2tau-1} C_Delta}"
        },
        ((a1 * a3).powf(4.0 * tau) * c_e_final).max(a3.powf(2.0 * tau + 1.0) * gamma * gamma * rho.powf(2.0 * tau - 1.0) * c_delta),
        p,
    )?;
    let e2 = lg.push("frakC2", conv, "a3^{2tau} C_DeltaK / (1 - a1^{-2tau})", a3.powf(2.0 * tau) * c_dk / (1.0 - a1.powf(-2.0 * tau)), p)?;
    if iso {
        lg.push(
            "frakC3",
            conv,
            "a3^tau C_Deltaomega / (1 - a1^{-3tau})",
            a3.powf(tau) * c_delta_omega / (1.0 - a1.powf(-3.0 * tau)),
            p,
        )?;
    } else {
        lg.push("frakC3", conv, "c_c_1 frakC2", g("c_c_1") * e2, p)?;
    }
    Ok(lg)
}

/// Options of [`kam_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertificateOptions {
    pub a1: f64,
    pub a2: f64,
    /// `𝔠`; `None` selects `max(1, ‖X_H∘K‖_ρ)`.
    pub frak_c: Option<f64>,
    pub sigma_factor: f64,
    /// Rüssmann constant; `None` uses the band-independent uniform bound.
    pub c_r: Option<f64>,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self { a1: 2.0, a2: 2.0, frak_c: None, sigma_factor: SIGMA_FACTOR, c_r: None }
    }
}

/// What the check is about: a fixed frequency, or a ray and a target level.
#[derive(Debug, Clone)]
pub enum CertificateMode {
    Ordinary,
    Iso { ray: FrequencyRay, c0: f64 },
}

/// Outcome of [`kam_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub header: String,
    pub mode: LedgerMode,
    pub conserved: Conserved,
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
    pub tau: f64,
    pub error_norm: f64,
    pub error_omega: f64,
    pub frak_c1: f64,
    pub frak_c2: f64,
    pub frak_c3: f64,
    pub ratio: f64,
    pub passed: bool,
    /// Largest contribution to `𝔈₁`.
    pub dominant: String,
    pub margins: Vec<HypothesisMargin>,
    pub sigmas: MeasuredSigmas,
    /// `𝔈₂‖E‖/(γ²ρ^{2τ})`, reported when the check passes.
    pub closeness_k: Option<f64>,
    /// `𝔈₃‖E‖/(γ²ρ^{2τ})` for `⟨c∘K⟩`, or `𝔈₃‖E_c‖/(γρ^τ)` for `ω` in iso mode.
    pub closeness_third: Option<f64>,
}

fn dominant_term(lg: &ConstantLedger, inp: &LedgerInputs) -> String {
    let a3 = inp.a3();
    let tau = inp.tau;
    let e_name = if inp.mode == LedgerMode::Iso { "C_Ec" } else { "C_E" };
    let first = (inp.a1 * a3).powf(4.0 * tau) * lg.value(e_name);
    let second = a3.powf(2.0 * tau + 1.0) * inp.gamma.powi(2) * inp.rho.powf(2.0 * tau - 1.0) * lg.value("C_Delta");
    if first >= second {
        let lin = 2.0 * (lg.value("C_L") + lg.value("C_N")) * lg.value("C_lin") * inp.gamma * inp.delta.powf(tau - 1.0);
        let quad = 0.5 * lg.value("c_XH_2") * lg.value("C_DeltaK").powi(2);
        format!("{e_name} ({})", if lin >= quad { "C_lin" } else { "C_DeltaK" })
    } else {
        "C_Delta".into()
    }
}

/// Resolved `𝔠 = max(1, ‖X_H∘K‖_ρ)` for a candidate.
pub fn default_frak_c(cand: &TorusCandidate) -> Result<f64, CertificateError> {
    let e = cand.invariance_error()?;
    let omega = DMatrix::from_column_slice(cand.d(), 1, cand.omega());
    let dk = cand.dk()?;
    let flow = dk.mul(&crate::fourier::FourierMap::constant(cand.bands(), cand.grid(), &omega)?)?;
    Ok(e.add(&flow)?.norm(cand.rho)?.max(1.0))
}

/// Ledger inputs measured on a candidate at its strip `ρ` with `δ = ρ/a₃`.
pub fn ledger_inputs(
    cand: &TorusCandidate,
    frames: &FrameBundle,
    mode: &CertificateMode,
    opts: &CertificateOptions,
) -> Result<LedgerInputs, CertificateError> {
    let iso = matches!(mode, CertificateMode::Iso { .. });
    let sigmas = MeasuredSigmas::measure(frames, cand, iso, opts.sigma_factor)?;
    let a3 = 3.0 * opts.a1 * opts.a2 / ((opts.a1 - 1.0) * (opts.a2 - 1.0));
    let frak_c = match opts.frak_c {
        Some(c) => c,
        None => default_frak_c(cand)?,
    };
    let (sigma_omega, omega_star_norm, ray_margin) = match mode {
        CertificateMode::Iso { ray, .. } => (
            Some(ray.sigma_omega),
            Some(ray.omega_star().iter().fold(0.0_f64, |m, w| m.max(w.abs()))),
            Some(ray.margin()),
        ),
        CertificateMode::Ordinary => (None, None, None),
    };
    Ok(LedgerInputs {
        mode: if iso { LedgerMode::Iso } else { LedgerMode::Ordinary },
        case: frames.case,
        n: cand.n(),
        d: cand.d(),
        gamma: cand.dio.gamma,
        tau: cand.dio.tau,
        rho: cand.rho,
        delta: cand.rho / a3,
        a1: opts.a1,
        a2: opts.a2,
        frak_c,
        c_r: opts.c_r.unwrap_or_else(|| russmann_uniform(cand.dio.tau)),
        sigmas,
        sigma_omega,
        omega_star_norm,
        ray_margin,
    })
}

/// Evaluates the KAM hypothesis `𝔈₁‖E‖_ρ/(γ⁴ρ^{4τ}) < 1` on a candidate.
pub fn kam_check(
    cand: &TorusCandidate,
    conserved: Conserved,
    mode: &CertificateMode,
    globals: &GlobalNormConstants,
    opts: &CertificateOptions,
) -> Result<(CertificateReport, ConstantLedger), CertificateError> {
    let frames = FrameBundle::build(cand, Some(conserved))?;
    let inp = ledger_inputs(cand, &frames, mode, opts)?;
    let ledger = build_ledger(globals, &inp)?;
    let rho = cand.rho;
    let (gamma, tau) = (inp.gamma, inp.tau);
    let e_norm = frames.e.norm(rho)?;
    let e_omega = match mode {
        CertificateMode::Iso { c0, .. } => frames.extended.as_ref().map(|x| x.c_avg - c0).unwrap_or(0.0),
        CertificateMode::Ordinary => 0.0,
    };
    let total = e_norm.max(e_omega.abs());
    let e1 = ledger.value("frakC1");
    let e2 = ledger.value("frakC2");
    let e3 = ledger.value("frakC3");
    let ratio = e1 * total / (gamma.powi(4) * rho.powf(4.0 * tau));
    let s = &inp.sigmas;
    let mut margins = vec![
        HypothesisMargin::less_than("kam_ratio", ratio, 1.0),
        HypothesisMargin::less_than("sigma_K", s.dk_norm, s.sigma_k),
        HypothesisMargin::less_than("sigma_KT", s.dk_transpose_norm, s.sigma_kt),
        HypothesisMargin::less_than("sigma_B", s.b_norm, s.sigma_b),
        HypothesisMargin::less_than(if inp.mode == LedgerMode::Iso { "sigma_Tc" } else { "sigma_T" }, s.avg_t_inverse_norm, s.sigma_t),
        HypothesisMargin::less_than("domain_distance", 0.0, s.domain_distance),
    ];
    if let Some(m) = inp.ray_margin {
        margins.push(HypothesisMargin::less_than("frequency_ray", 0.0, m));
    }
    let passed = margins.iter().all(|m| m.satisfied);
    let closeness_k = passed.then(|| e2 * total / (gamma * gamma * rho.powf(2.0 * tau)));
    let closeness_third = passed.then(|| match inp.mode {
        LedgerMode::Ordinary => e3 * total / (gamma * gamma * rho.powf(2.0 * tau)),
        LedgerMode::Iso => e3 * total / (gamma * rho.powf(tau)),
    });
    let report = CertificateReport {
        header: REPORT_HEADER.into(),
        mode: inp.mode,
        conserved,
        rho,
        delta: inp.delta,
        gamma,
        tau,
        error_norm: e_norm,
        error_omega: e_omega,
        frak_c1: e1,
        frak_c2: e2,
        frak_c3: e3,
        ratio,
        passed,
        dominant: dominant_term(&ledger, &inp),
        margins,
        sigmas: inp.sigmas.clone(),
        closeness_k,
        closeness_third,
    };
    Ok((report, ledger))
}

/// One literal inequality `measured ≤ bound` between a norm and its ledger bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn new(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, bound, holds: measured <= bound + TRUNCATION_SLACK }
    }
}

/// Checks every geometric lemma bound on a candidate against its ledger.
pub fn lemma_bounds(
    frames: &FrameBundle,
    ledger: &ConstantLedger,
    inp: &LedgerInputs,
) -> Result<Vec<BoundCheck>, CertificateError> {
    let (rho, delta, gamma, tau) = (inp.rho, inp.delta, inp.gamma, inp.tau);
    let e = frames.e.norm(rho)?;
    let scale1 = e / (gamma * delta.powf(tau + 1.0));
    let mut out = Vec::new();
    if let Some(ext) = &frames.extended {
        out.push(BoundCheck::new(
            "shadowing",
            ext.c_map.zero_average().norm(rho - delta)?,
            inp.c_r * ledger.value("c_c_1") / (gamma * delta.powf(tau)) * e,
        ));
    }
    out.push(BoundCheck::new("isotropy", frames.omega_k.norm(rho - 2.0 * delta)?, ledger.value("C_OmegaK") * scale1));
    out.push(BoundCheck::new("lagrangianity", frames.e_lag.norm(rho - 2.0 * delta)?, ledger.value("C_OmegaL") * scale1));
    out.push(BoundCheck::new("frame_L", frames.l.norm(rho)?, ledger.value("C_L")));
    out.push(BoundCheck::new("frame_LT", frames.l.transpose().norm(rho)?, ledger.value("C_LT")));
    out.push(BoundCheck::new("frame_N", frames.n.norm(rho)?, ledger.value("C_N")));
    out.push(BoundCheck::new("frame_NT", frames.n.transpose().norm(rho)?, ledger.value("C_NT")));
    out.push(BoundCheck::new("symplecticity", frames.e_sym.norm(rho - 2.0 * delta)?, ledger.value("C_sym") * scale1));
    out.push(BoundCheck::new("torsion", frames.t.norm(rho - delta)?, ledger.value("C_T")));
    out.push(BoundCheck::new("reducibility", frames.e_red.norm(rho - 2.0 * delta)?, ledger.value("C_red") * scale1));
    Ok(out)
}

/// Rüssmann constant for a band-limited step: the band formula at `δ`.
pub fn step_russmann(cand: &TorusCandidate, delta: f64) -> f64 {
    let band = cand.bands().iter().copied().max().unwrap_or(0);
    russmann_constant(cand.dio.tau, delta, cand.d(), band)
}

/// Conclusions of the matrix perturbation lemma.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseControl {
    pub precondition: bool,
    pub condition: f64,
    pub applies: bool,
    /// `2σ²|M̄ − M|`.
    pub bound: f64,
    pub actual_difference: f64,
    pub perturbed_inverse_norm: f64,
    pub conclusions_hold: bool,
}

/// `|M^{-1}| < σ` and `2σ²|M̄−M|/(σ−|M^{-1}|) ≤ 1` imply `M̄` invertible,
/// `|M̄^{-1} − M^{-1}| < 2σ²|M̄−M|` and `|M̄^{-1}| < σ`.
pub fn matrix_inverse_control(m: &DMatrix<f64>, mbar: &DMatrix<f64>, sigma: f64) -> InverseControl {
    let inv = match checked_inverse(m) {
        Ok(i) => i,
        Err(_) => {
            return InverseControl {
                precondition: false,
                condition: f64::INFINITY,
                applies: false,
                bound: f64::INFINITY,
                actual_difference: f64::NAN,
                perturbed_inverse_norm: f64::NAN,
                conclusions_hold: false,
            }
        }
    };
    let inv_norm = row_sum_norm(&inv);
    let precondition = inv_norm < sigma;
    let diff = row_sum_norm(&(mbar - m));
    let condition = 2.0 * sigma * sigma * diff / (sigma - inv_norm);
    let applies = precondition && condition <= 1.0;
    let bound = 2.0 * sigma * sigma * diff;
    let (actual, pert_norm, holds) = match mbar.clone().lu().try_inverse() {
        Some(bi) => {
            let actual = row_sum_norm(&(&bi - &inv));
            let pn = row_sum_norm(&bi);
            let holds = (actual < bound || (diff == 0.0 && actual <= 1e-15 * inv_norm)) && pn < sigma;
            (actual, pn, holds)
        }
        None => (f64::INFINITY, f64::INFINITY, false),
    };
    InverseControl {
        precondition,
        condition,
        applies,
        bound,
        actual_difference: actual,
        perturbed_inverse_norm: pert_norm,
        conclusions_hold: holds,
    }
}

/// Analytic bound for `c_{X_H,2}` of the trigonometric fixtures: the third
/// derivative tensor of `Σ a cos(2πq·x)` on `|Im x| ≤ w`.
pub fn trig_third_derivative_bound(modes: &[(f64, Vec<i64>)], imag_width: f64) -> f64 {
    let dim = modes.first().map(|m| m.1.len()).unwrap_or(0);
    (0..dim)
        .map(|i| {
            modes
                .iter()
                .map(|(a, q)| {
                    let q1: i64 = q.iter().map(|x| x.abs()).sum();
                    let growth = (2.0 * PI * q1 as f64 * imag_width).cosh();
                    a.abs() * (2.0 * PI).powi(3) * (q[i].abs() * q1 * q1) as f64 * growth
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}
