//! Device parameters and the closed-form dressed-state theory of a phonon
//! mode hybridized with a two-level qubit.
//!
//! All quantities are angular (rad/s) unless a name ends in `_hz`. Energies
//! are in the frame rotating at the phonon frequency, so the bare `|g,n⟩`
//! ladder sits at `−Δ/2` for every `n`.

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, basis_index, Dims, Operator, Qubit};

pub const DEFAULT_DIM_FOCK: usize = 10;

/// Physical parameters of the qubit–phonon device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Intrinsic (unshifted) qubit frequency.
    pub omega_q: f64,
    pub omega_p: f64,
    pub g: f64,
    pub alpha_qubit: f64,
    pub t1_q: f64,
    pub t2_q_ramsey: f64,
    pub t2_q_echo: f64,
    pub t1_p: f64,
    pub t2_p: f64,
    /// Operating detuning `Δ = ω_q − ω_p` after the Stark shift.
    pub delta: f64,
    pub dim_fock: usize,
}

impl Default for DeviceParams {
    /// The reference device at its operating detuning of −0.71 MHz.
    fn default() -> Self {
        Self {
            omega_q: TAU * 5.057e9,
            omega_p: TAU * 5.049e9,
            g: TAU * 280e3,
            alpha_qubit: TAU * -186e6,
            t1_q: 23.8e-6,
            t2_q_ramsey: 20.4e-6,
            t2_q_echo: 30.9e-6,
            t1_p: 104e-6,
            t2_p: 205e-6,
            delta: TAU * -0.71e6,
            dim_fock: DEFAULT_DIM_FOCK,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, message: String| Err(Error::Config { context: key.to_string(), message });
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return fail("g_hz", format!("coupling must be non-negative, got {}", self.g));
        }
        for (key, t) in [
            ("t1_q_s", self.t1_q),
            ("t2_q_ramsey_s", self.t2_q_ramsey),
            ("t2_q_echo_s", self.t2_q_echo),
            ("t1_p_s", self.t1_p),
            ("t2_p_s", self.t2_p),
        ] {
            if !(t > 0.0) || !t.is_finite() {
                return fail(key, format!("time constant must be positive, got {t}"));
            }
        }
        for (key, t2, t1) in [
            ("t2_q_ramsey_s", self.t2_q_ramsey, self.t1_q),
            ("t2_q_echo_s", self.t2_q_echo, self.t1_q),
            ("t2_p_s", self.t2_p, self.t1_p),
        ] {
            if t2 > 2.0 * t1 {
                return fail(key, format!("T2 = {t2} exceeds 2·T1 = {}", 2.0 * t1));
            }
        }
        if self.dim_fock < 2 {
            return fail("dim_fock", format!("truncation must be at least 2, got {}", self.dim_fock));
        }
        Ok(())
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn dims(&self) -> Dims {
        Dims::composite(self.dim_fock)
    }

    /// Qubit frequency once Stark-shifted to the operating detuning.
    pub fn omega_q_shifted(&self) -> f64 {
        self.omega_p + self.delta
    }

    pub fn phonon_gamma1(&self) -> f64 {
        1.0 / self.t1_p
    }

    /// Pure phonon dephasing rate `γφ = 1/T2 − 1/(2T1)`.
    pub fn phonon_gamma_phi(&self) -> f64 {
        1.0 / self.t2_p - 0.5 / self.t1_p
    }

    pub fn qubit_gamma1(&self) -> f64 {
        1.0 / self.t1_q
    }

    /// Rate multiplying the σz dissipator: `(1/T2* − 1/(2T1))/2`.
    pub fn qubit_sigma_z_rate(&self) -> f64 {
        0.5 * (1.0 / self.t2_q_ramsey - 0.5 / self.t1_q)
    }
}

/// Device file schema: frequencies in Hz, times in seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub omega_q_hz: f64,
    pub omega_p_hz: f64,
    pub g_hz: f64,
    pub alpha_qubit_hz: f64,
    pub t1_q_s: f64,
    pub t2_q_ramsey_s: f64,
    pub t2_q_echo_s: f64,
    pub t1_p_s: f64,
    pub t2_p_s: f64,
    #[serde(default = "default_delta_hz")]
    pub delta_hz: f64,
    #[serde(default = "default_dim_fock")]
    pub dim_fock: usize,
}

fn default_delta_hz() -> f64 {
    -0.71e6
}

fn default_dim_fock() -> usize {
    DEFAULT_DIM_FOCK
}

impl From<&DeviceParams> for DeviceConfig {
    fn from(p: &DeviceParams) -> Self {
        Self {
            omega_q_hz: p.omega_q / TAU,
            omega_p_hz: p.omega_p / TAU,
            g_hz: p.g / TAU,
            alpha_qubit_hz: p.alpha_qubit / TAU,
            t1_q_s: p.t1_q,
            t2_q_ramsey_s: p.t2_q_ramsey,
            t2_q_echo_s: p.t2_q_echo,
            t1_p_s: p.t1_p,
            t2_p_s: p.t2_p,
            delta_hz: p.delta / TAU,
            dim_fock: p.dim_fock,
        }
    }
}

impl DeviceConfig {
    pub fn to_params(&self) -> Result<DeviceParams> {
        let p = DeviceParams {
            omega_q: TAU * self.omega_q_hz,
            omega_p: TAU * self.omega_p_hz,
            g: TAU * self.g_hz,
            alpha_qubit: TAU * self.alpha_qubit_hz,
            t1_q: self.t1_q_s,
            t2_q_ramsey: self.t2_q_ramsey_s,
            t2_q_echo: self.t2_q_echo_s,
            t1_p: self.t1_p_s,
            t2_p: self.t2_p_s,
            delta: TAU * self.delta_hz,
            dim_fock: self.dim_fock,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parses a JSON device file; errors carry `source:line:column` context.
    pub fn from_json_str(text: &str, source: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            context: format!("{source}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, &path.display().to_string())
    }
}

/// Loads and validates a device file.
pub fn load_device(path: &Path) -> Result<DeviceParams> {
    DeviceConfig::load(path)?.to_params()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    PhononRotating,
}

/// Jaynes–Cummings Hamiltonian at the operating detuning `params.delta`.
///
/// In the lab frame the qubit sits at its Stark-shifted frequency `ω_p + Δ`.
pub fn build_jc_hamiltonian(params: &DeviceParams, frame: Frame) -> Result<Operator> {
    let rotating = jc_hamiltonian(params.delta, params.g, params.dim_fock)?;
    match frame {
        Frame::PhononRotating => Ok(rotating),
        Frame::Lab => {
            let n = hilbert::number(params.dim_fock)?.on_fock()?;
            let sz = hilbert::sigma_z().on_qubit(params.dim_fock)?;
            let shift = &(&n * params.omega_p) + &(&sz * (0.5 * params.omega_p));
            Ok(&rotating + &shift)
        }
    }
}

/// `Δ/2 σz + g(σ−p† + σ+p)` on a `2 × dim_fock` space.
pub fn jc_hamiltonian(delta: f64, g: f64, dim_fock: usize) -> Result<Operator> {
    let dims = Dims::composite(dim_fock);
    let mut m = DMatrix::zeros(dims.total(), dims.total());
    for n in 0..dim_fock {
        m[(basis_index(dims, Qubit::Ground, n), basis_index(dims, Qubit::Ground, n))] = C64::new(-0.5 * delta, 0.0);
        m[(basis_index(dims, Qubit::Excited, n), basis_index(dims, Qubit::Excited, n))] = C64::new(0.5 * delta, 0.0);
    }
    if dim_fock < 2 {
        return Err(Error::InvalidDimension(format!("Fock truncation must be at least 2, got {dim_fock}")));
    }
    for n in 1..dim_fock {
        let (gn, e) = (basis_index(dims, Qubit::Ground, n), basis_index(dims, Qubit::Excited, n - 1));
        let c = C64::new(g * (n as f64).sqrt(), 0.0);
        m[(gn, e)] = c;
        m[(e, gn)] = c;
    }
    Operator::from_matrix(dims, m)
}

fn require_detuned(delta: f64) -> Result<()> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::OutsideDispersiveRegime { delta });
    }
    Ok(())
}

/// Dressed phonon anharmonicity `α = E₂' − 2E₁' + E₀'`.
///
/// Evaluated as `16 g⁴ sgn Δ / ((a+|Δ|)(b+|Δ|)(a+b))` with `a = √(Δ²+4g²)`,
/// `b = √(Δ²+8g²)`, which is algebraically the two-branch closed form but free
/// of cancellation for `|Δ| ≫ g`. `sgn α = sgn Δ`.
pub fn anharmonicity(delta: f64, g: f64) -> Result<f64> {
    require_detuned(delta)?;
    let d = delta.abs();
    let a = (d * d + 4.0 * g * g).sqrt();
    let b = (d * d + 8.0 * g * g).sqrt();
    Ok(delta.signum() * 16.0 * g.powi(4) / ((a + d) * (b + d) * (a + b)))
}

/// Large-detuning limit `2g⁴/Δ³`.
pub fn anharmonicity_dispersive_limit(delta: f64, g: f64) -> Result<f64> {
    require_detuned(delta)?;
    Ok(2.0 * g.powi(4) / delta.powi(3))
}

/// Mechanical-branch level `|g,n'⟩` of the dressed ladder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedLevel {
    pub n: usize,
    /// Rotating-frame eigenenergy.
    pub energy: f64,
    /// Weight of the bare `|g,n⟩` component.
    pub phonon_weight: f64,
}

impl DressedLevel {
    /// Weight on `|e,n−1⟩`; the two branches share the doublet so this is `1 − phonon_weight`.
    pub fn qubit_weight(&self) -> f64 {
        1.0 - self.phonon_weight
    }
}

/// Energy of `|g,0⟩`, which does not hybridize.
pub fn ground_energy(delta: f64) -> f64 {
    -0.5 * delta
}

/// Mechanical-branch energies and phonon weights for `n = 1..=n_max`.
pub fn dressed_levels(delta: f64, g: f64, n_max: usize) -> Result<Vec<DressedLevel>> {
    if delta == 0.0 {
        return Err(Error::DegenerateBranch);
    }
    if n_max < 1 {
        return Err(Error::InvalidDimension("n_max must be at least 1".into()));
    }
    Ok((1..=n_max)
        .map(|n| {
            let split = (delta * delta + 4.0 * g * g * n as f64).sqrt();
            DressedLevel {
                n,
                energy: -delta.signum() * 0.5 * split,
                phonon_weight: 0.5 * (1.0 + delta.abs() / split),
            }
        })
        .collect())
}

/// Frequency of the `|g0'⟩ → |g1'⟩` transition relative to the bare phonon.
pub fn dressed_phonon_shift(delta: f64, g: f64) -> Result<f64> {
    let l = dressed_levels(delta, g, 1)?;
    Ok(l[0].energy - ground_energy(delta))
}

/// Matrix element `|⟨e0|g1'⟩|`, the fraction of a qubit drive that reaches the dressed phonon.
pub fn dressed_coupling(delta: f64, g: f64) -> Result<f64> {
    Ok(dressed_levels(delta, g, 1)?[0].qubit_weight().sqrt())
}

/// Expected bare-qubit population `Σₙ (1 − p_{p,n})/p_{p,n} · Pₙ` for phonon
/// populations `Pₙ` held in the dressed mechanical ladder.
pub fn qubit_population_estimate(delta: f64, g: f64, phonon_populations: &[f64]) -> Result<f64> {
    if phonon_populations.len() < 2 {
        return Ok(0.0);
    }
    let levels = dressed_levels(delta, g, phonon_populations.len() - 1)?;
    Ok(levels.iter().map(|l| l.qubit_weight() / l.phonon_weight * phonon_populations[l.n]).sum())
}

/// Anharmonicity from numerically diagonalized n = 1, 2 doublets.
pub fn anharmonicity_from_spectrum(delta: f64, g: f64) -> Result<f64> {
    require_detuned(delta)?;
    let mechanical = |n: usize| -> Result<f64> {
        let c = C64::new(g * (n as f64).sqrt(), 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[C64::new(-0.5 * delta, 0.0), c, c, C64::new(0.5 * delta, 0.0)]);
        let e = hilbert::eigh(&Operator::from_matrix(Dims::qubit(), m)?)?;
        // the mechanical branch is the eigenvector dominated by |g,n⟩ (index 0)
        let k = if e.vectors.get(0, 0).norm() >= e.vectors.get(0, 1).norm() { 0 } else { 1 };
        Ok(e.values[k])
    };
    let e0 = ground_energy(delta);
    Ok(mechanical(2)? - 2.0 * mechanical(1)? + e0)
}

/// Coherence budget at detuning `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub delta: f64,
    /// Signed `g/Δ`.
    pub epsilon: f64,
    /// `2g²/Δ`.
    pub chi: f64,
    /// `1/T2*` of the qubit.
    pub gamma2_qubit: f64,
    pub gamma2_intrinsic: f64,
    pub gamma2_purcell: f64,
    pub gamma2_total: f64,
    pub alpha: f64,
    /// `|α| / Γ2,total`.
    pub alpha_over_gamma2: f64,
    /// Dispersive approximation `2g|ε|³ / (ε²γ2 + Γ2,intrinsic)`.
    pub alpha_over_gamma2_dispersive: f64,
}

pub fn coherence_budget(params: &DeviceParams, delta: f64) -> Result<DerivedRates> {
    require_detuned(delta)?;
    let g = params.g;
    let epsilon = g / delta;
    let gamma2_qubit = 1.0 / params.t2_q_ramsey;
    let gamma2_intrinsic = 1.0 / params.t2_p;
    let gamma2_purcell = epsilon * epsilon * gamma2_qubit;
    let gamma2_total = gamma2_intrinsic + gamma2_purcell;
    let alpha = anharmonicity(delta, g)?;
    Ok(DerivedRates {
        delta,
        epsilon,
        chi: 2.0 * g * g / delta,
        gamma2_qubit,
        gamma2_intrinsic,
        gamma2_purcell,
        gamma2_total,
        alpha,
        alpha_over_gamma2: alpha.abs() / gamma2_total,
        alpha_over_gamma2_dispersive: 2.0 * g * epsilon.abs().powi(3) / gamma2_total,
    })
}

/// One row of the detuning sweep written by `mechq theory`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub delta: f64,
    pub alpha: f64,
    pub gamma2_purcell: f64,
    pub gamma2_total: f64,
    pub p_p1: f64,
    pub alpha_over_gamma2: f64,
}

pub fn theory_table(params: &DeviceParams, deltas: &[f64]) -> Result<Vec<TheoryRow>> {
    deltas
        .iter()
        .map(|&delta| {
            let b = coherence_budget(params, delta)?;
            Ok(TheoryRow {
                delta,
                alpha: b.alpha,
                gamma2_purcell: b.gamma2_purcell,
                gamma2_total: b.gamma2_total,
                p_p1: dressed_levels(delta, params.g, 1)?[0].phonon_weight,
                alpha_over_gamma2: b.alpha_over_gamma2,
            })
        })
        .collect()
}

/// Signed dressed splitting `Δ' = sgn Δ · √(Δ² + 4g²)`.
pub fn dressed_detuning(delta: f64, g: f64) -> f64 {
    let s = if delta < 0.0 { -1.0 } else { 1.0 };
    s * (delta * delta + 4.0 * g * g).sqrt()
}

/// Inverts [`dressed_detuning`]: `Δ = sgn Δ' · √(Δ'² − 4g²)`.
pub fn bare_detuning_from_dressed(delta_prime: f64, g: f64) -> Result<f64> {
    let limit = 2.0 * g;
    if delta_prime.abs() < limit {
        return Err(Error::InsideAvoidedCrossing { delta_prime, limit });
    }
    let d = ((delta_prime - limit) * (delta_prime + limit)).max(0.0).sqrt();
    Ok(if delta_prime < 0.0 { -d } else { d })
}

/// Eigenstates of the full truncated Hamiltonian labelled by the bare state they connect to.
#[derive(Clone, Debug)]
pub struct DressedSpectrum {
    dims: Dims,
    eig: hilbert::Eigh,
    /// `label[basis_index] = eigen index`.
    label: Vec<usize>,
}

impl DressedSpectrum {
    pub fn new(delta: f64, g: f64, dim_fock: usize) -> Result<Self> {
        require_detuned(delta)?;
        let h = jc_hamiltonian(delta, g, dim_fock)?;
        let eig = hilbert::eigh(&h)?;
        let d = h.dim();
        let mut label = vec![usize::MAX; d];
        for k in 0..d {
            let col = eig.vectors.matrix().column(k);
            let best = (0..d).max_by(|&a, &b| col[a].norm_sqr().total_cmp(&col[b].norm_sqr())).unwrap_or(0);
            label[best] = k;
        }
        if label.contains(&usize::MAX) {
            return Err(Error::DegenerateBranch);
        }
        Ok(Self { dims: h.dims(), eig, label })
    }

    pub fn energy(&self, q: Qubit, n: usize) -> f64 {
        self.eig.values[self.label[basis_index(self.dims, q, n)]]
    }

    pub fn state(&self, q: Qubit, n: usize) -> nalgebra::DVector<C64> {
        self.eig.vector(self.label[basis_index(self.dims, q, n)])
    }

    /// `|⟨q', n'| ψ_(q,n)⟩|²` for the dressed state labelled `(q, n)`.
    pub fn overlap(&self, q: Qubit, n: usize, bare_q: Qubit, bare_n: usize) -> f64 {
        self.state(q, n)[basis_index(self.dims, bare_q, bare_n)].norm_sqr()
    }

    pub fn anharmonicity(&self) -> f64 {
        self.energy(Qubit::Ground, 2) - 2.0 * self.energy(Qubit::Ground, 1) + self.energy(Qubit::Ground, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const G: f64 = TAU * 280e3;

    fn naive_anharmonicity(delta: f64, g: f64) -> f64 {
        let a = (delta * delta + 4.0 * g * g).sqrt();
        let b = (delta * delta + 8.0 * g * g).sqrt();
        let s = if delta > 0.0 { 1.0 } else { -1.0 };
        -0.5 * delta + s * 0.5 * (2.0 * a - b)
    }

    #[test]
    fn stable_form_matches_two_branch_expression() {
        for d_mhz in [-4.0, -2.0, -0.71, -0.6, 0.6, 1.0, 3.0] {
            let d = TAU * d_mhz * 1e6;
            assert_relative_eq!(anharmonicity(d, G).unwrap(), naive_anharmonicity(d, G), max_relative = 1e-9);
        }
    }

    #[test]
    fn anharmonicity_values() {
        let a = anharmonicity(TAU * -0.71e6, G).unwrap() / TAU;
        assert_relative_eq!(a, -17.3e3, max_relative = 0.03);
        let a = anharmonicity(TAU * -2e6, G).unwrap() / TAU;
        assert_relative_eq!(a, -1.37e3, max_relative = 0.03);
        assert!(matches!(anharmonicity(0.0, G), Err(Error::OutsideDispersiveRegime { .. })));
    }

    #[test]
    fn dispersive_limit() {
        let d = 50.0 * G;
        let ratio = anharmonicity(d, G).unwrap() / anharmonicity_dispersive_limit(d, G).unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn hybridization_weights() {
        let l = dressed_levels(TAU * -0.71e6, G, 2).unwrap();
        assert!((l[0].phonon_weight - 0.893).abs() < 0.002);
        assert!((l[1].qubit_weight() - 0.165).abs() < 0.002);
        let l = dressed_levels(TAU * -0.71e6, 0.0, 3).unwrap();
        assert!(l.iter().all(|x| x.phonon_weight == 1.0));
        assert!(matches!(dressed_levels(0.0, G, 1), Err(Error::DegenerateBranch)));
    }

    #[test]
    fn spectral_matches_closed_form() {
        let d = TAU * -0.71e6;
        assert_relative_eq!(anharmonicity_from_spectrum(d, G).unwrap(), anharmonicity(d, G).unwrap(), max_relative = 1e-12);
        assert_eq!(anharmonicity_from_spectrum(d, 0.0).unwrap(), 0.0);
        assert_relative_eq!(anharmonicity_from_spectrum(TAU * -2e6, G).unwrap() / TAU, -1.37e3, max_relative = 0.03);
    }

    #[test]
    fn block_eigenvalues() {
        let p = DeviceParams::default().with_delta(TAU * 1.3e6);
        let h = build_jc_hamiltonian(&p, Frame::PhononRotating).unwrap();
        let e = hilbert::eigh(&h).unwrap();
        let half = 0.5 * (p.delta.powi(2) + 4.0 * p.g * p.g).sqrt();
        assert!(e.values.iter().any(|&x| (x - half).abs() < 1e-6));
        assert!(e.values.iter().any(|&x| (x + half).abs() < 1e-6));
    }

    #[test]
    fn uncoupled_hamiltonian_is_diagonal() {
        let p = DeviceParams { g: 1e-300, ..DeviceParams::default() };
        let h = jc_hamiltonian(p.delta, 0.0, 4).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(h.get(i, j).norm(), 0.0);
                } else {
                    assert_eq!(h.get(i, i).re.abs(), 0.5 * p.delta.abs());
                }
            }
        }
    }

    #[test]
    fn lab_frame_coupling_element() {
        let p = DeviceParams::default();
        let h = build_jc_hamiltonian(&p, Frame::Lab).unwrap();
        let dims = p.dims();
        let el = h.get(basis_index(dims, Qubit::Excited, 0), basis_index(dims, Qubit::Ground, 1));
        assert_relative_eq!(el.re / TAU, 280e3, max_relative = 1e-12);
        assert!(h.is_hermitian(1e-12));
    }

    #[test]
    fn full_hamiltonian_matches_blocks() {
        let (d, dim) = (TAU * -0.71e6, 10);
        let s = DressedSpectrum::new(d, G, dim).unwrap();
        let l = dressed_levels(d, G, dim - 2).unwrap();
        for lvl in &l {
            assert!((s.energy(Qubit::Ground, lvl.n) - lvl.energy).abs() < 1e-10 * G.max(d.abs()));
            assert!((s.overlap(Qubit::Ground, lvl.n, Qubit::Ground, lvl.n) - lvl.phonon_weight).abs() < 1e-10);
        }
        assert_relative_eq!(s.anharmonicity(), anharmonicity(d, G).unwrap(), max_relative = 1e-8);
    }

    #[test]
    fn detuning_round_trip() {
        assert_eq!(bare_detuning_from_dressed(2.0 * G, G).unwrap(), 0.0);
        let d = bare_detuning_from_dressed(TAU * 1e6, G).unwrap() / TAU;
        assert!((d - 0.828e6).abs() < 1e3);
        for d in [TAU * -0.71e6, TAU * 3.3e6] {
            let back = bare_detuning_from_dressed(dressed_detuning(d, G), G).unwrap();
            assert_relative_eq!(back, d, max_relative = 1e-12);
        }
        assert!(matches!(bare_detuning_from_dressed(G, G), Err(Error::InsideAvoidedCrossing { .. })));
    }

    #[test]
    fn coherence_budget_consistency() {
        let p = DeviceParams::default();
        let r = coherence_budget(&p, p.delta).unwrap();
        assert_relative_eq!(r.epsilon * r.delta, p.g, max_relative = 1e-15);
        assert_eq!(r.gamma2_total, r.gamma2_intrinsic + r.gamma2_purcell);
        let far = coherence_budget(&DeviceParams { g: 1e-9, ..p }, p.delta).unwrap();
        assert!(far.gamma2_purcell < 1e-20);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let p = DeviceParams::default();
        let text = serde_json::to_string(&DeviceConfig::from(&p)).unwrap();
        let back = DeviceConfig::from_json_str(&text, "mem").unwrap().to_params().unwrap();
        assert_relative_eq!(back.g, p.g, max_relative = 1e-15);
        let err = DeviceConfig::from_json_str("{\n \"g_hz\": 1,\n \"bogus\": 2\n}", "dev.json").unwrap_err();
        match err {
            Error::Config { context, .. } => assert!(context.starts_with("dev.json:3"), "{context}"),
            e => panic!("{e}"),
        }
        let bad = DeviceConfig { t2_p_s: 1.0, ..DeviceConfig::from(&p) };
        assert!(bad.to_params().is_err());
    }
}
