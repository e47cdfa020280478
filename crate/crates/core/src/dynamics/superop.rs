//! Column-stacked superoperators and the two RK4 engines built on them.
//!
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`; nalgebra's column-major storage makes
//! `vec(ρ)` a plain reinterpretation of the matrix buffer.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64 as C64;

use crate::hilbert::{matmul, I, ONE};

pub(crate) fn vectorize(rho: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_column_slice(rho.as_slice())
}

pub(crate) fn unvectorize(v: &DVector<C64>, d: usize) -> DMatrix<C64> {
    DMatrix::from_column_slice(d, d, v.as_slice())
}

/// Superoperator of `X ↦ −i[H, X]`.
pub(crate) fn commutator_superop(h: &DMatrix<C64>) -> DMatrix<C64> {
    let d = h.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I)
}

/// Superoperator of `rate · (c X c† − ½{c†c, X})`.
pub(crate) fn dissipator_superop(c: &DMatrix<C64>, rate: f64) -> DMatrix<C64> {
    let d = c.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let cdc = c.adjoint() * c;
    let jump = c.conjugate().kronecker(c);
    let anti = id.kronecker(&cdc) + cdc.transpose().kronecker(&id);
    (jump - anti * C64::new(0.5, 0.0)) * C64::new(rate, 0.0)
}

/// `Σ_{k≤4} X^k / k!` in Horner form.
fn taylor4(x: &DMatrix<C64>) -> DMatrix<C64> {
    let n = x.nrows();
    let id = DMatrix::<C64>::identity(n, n);
    let mut acc = &id + x * C64::new(0.25, 0.0);
    for k in [3.0, 2.0, 1.0] {
        acc = &id + matmul(x, &acc) * C64::new(1.0 / k, 0.0);
    }
    acc
}

fn power(s: &DMatrix<C64>, mut k: usize) -> DMatrix<C64> {
    let n = s.nrows();
    let mut result: Option<DMatrix<C64>> = None;
    let mut base = s.clone();
    while k > 0 {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => matmul(&r, &base),
            });
        }
        k >>= 1;
        if k > 0 {
            base = matmul(&base, &base);
        }
    }
    result.unwrap_or_else(|| DMatrix::identity(n, n))
}

/// Number of RK4 steps covering `duration` with steps no longer than `max_step`.
pub(crate) fn step_count(duration: f64, max_step: f64) -> usize {
    ((duration / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Largest `‖L‖∞ h` used by the static path; keeps the per-step Taylor
/// remainder near 1e-14 so long waits stay inside the error budget.
const MAX_SCALED_STEP: f64 = 5e-3;

fn inf_norm(m: &DMatrix<C64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Map of `steps` fixed RK4 steps of a static Liouvillian, with the
/// step-halving difference kept for a posteriori error estimates.
#[derive(Clone, Debug)]
pub struct StaticPropagator {
    map: DMatrix<C64>,
    /// `S(h) − S(h/2)²`.
    halving_gap: DMatrix<C64>,
    steps: usize,
}

impl StaticPropagator {
    pub(crate) fn new(liouvillian: &DMatrix<C64>, duration: f64, max_step: f64) -> Self {
        let n = liouvillian.nrows();
        if duration <= 0.0 {
            return Self::identity(n);
        }
        let norm = inf_norm(liouvillian);
        let cap = if norm > 0.0 { max_step.min(MAX_SCALED_STEP / norm) } else { max_step };
        let steps = step_count(duration, cap);
        let h = duration / steps as f64;
        let full = taylor4(&(liouvillian * C64::new(h, 0.0)));
        let half = taylor4(&(liouvillian * C64::new(0.5 * h, 0.0)));
        let halving_gap = &full - matmul(&half, &half);
        Self { map: power(&full, steps), halving_gap, steps }
    }

    pub(crate) fn identity(n: usize) -> Self {
        Self { map: DMatrix::identity(n, n), halving_gap: DMatrix::zeros(n, n), steps: 0 }
    }

    /// Propagates `v`; the second value bounds the accumulated step error.
    pub(crate) fn apply(&self, v: &DVector<C64>) -> (DVector<C64>, f64) {
        if self.steps == 0 {
            return (v.clone(), 0.0);
        }
        let local = l1(&(&self.halving_gap * v)) * 16.0 / 15.0;
        (&self.map * v, local * self.steps as f64)
    }
}

pub(crate) fn l1(v: &DVector<C64>) -> f64 {
    v.iter().map(|x| x.norm()).sum()
}

pub(crate) fn to_csr(m: &DMatrix<C64>) -> CsrMatrix<C64> {
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let x = m[(i, j)];
            if x.re != 0.0 || x.im != 0.0 {
                coo.push(i, j, x);
            }
        }
    }
    CsrMatrix::from(&coo)
}

/// `out += scale · A v`.
fn csr_axpy(a: &CsrMatrix<C64>, v: &[C64], scale: C64, out: &mut [C64]) {
    let (offsets, cols, vals) = (a.row_offsets(), a.col_indices(), a.values());
    for (row, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for k in offsets[row]..offsets[row + 1] {
            acc += vals[k] * v[cols[k]];
        }
        *o += scale * acc;
    }
}

/// Time-dependent Liouvillian `L0 + a(t) L₋ + a(t)* L₊`.
pub(crate) struct DrivenLiouvillian<'a, F: Fn(f64) -> C64> {
    pub base: CsrMatrix<C64>,
    pub lower: CsrMatrix<C64>,
    pub raise: CsrMatrix<C64>,
    pub amplitude: &'a F,
}

impl<F: Fn(f64) -> C64> DrivenLiouvillian<'_, F> {
    fn eval(&self, t: f64, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        csr_axpy(&self.base, v, ONE, out);
        let a = (self.amplitude)(t);
        if a.re != 0.0 || a.im != 0.0 {
            csr_axpy(&self.lower, v, a, out);
            csr_axpy(&self.raise, v, a.conj(), out);
        }
    }

    fn rk4_step(&self, t: f64, h: f64, v: &mut [C64], scratch: &mut Rk4Scratch) {
        let n = v.len();
        let Rk4Scratch { k1, k2, k3, k4, tmp } = scratch;
        self.eval(t, v, k1);
        for i in 0..n {
            tmp[i] = v[i] + k1[i] * (0.5 * h);
        }
        self.eval(t + 0.5 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = v[i] + k2[i] * (0.5 * h);
        }
        self.eval(t + 0.5 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = v[i] + k3[i] * h;
        }
        self.eval(t + h, tmp, k4);
        for i in 0..n {
            v[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }

    /// Integrates from `t0` to `t1` in place; returns the accumulated error
    /// estimate from step-halving probes taken every `probe_every` steps.
    pub(crate) fn integrate(&self, v: &mut DVector<C64>, t0: f64, t1: f64, max_step: f64, probe_every: usize) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let steps = step_count(t1 - t0, max_step);
        let h = (t1 - t0) / steps as f64;
        let mut scratch = Rk4Scratch::new(v.len());
        let mut worst_local = 0.0f64;
        let slice = v.as_mut_slice();
        for s in 0..steps {
            let t = t0 + s as f64 * h;
            if s % probe_every == 0 {
                let mut coarse = slice.to_vec();
                let mut fine = slice.to_vec();
                self.rk4_step(t, h, &mut coarse, &mut scratch);
                self.rk4_step(t, 0.5 * h, &mut fine, &mut scratch);
                self.rk4_step(t + 0.5 * h, 0.5 * h, &mut fine, &mut scratch);
                let gap: f64 = coarse.iter().zip(&fine).map(|(a, b)| (a - b).norm()).sum();
                worst_local = worst_local.max(gap * 16.0 / 15.0);
                slice.copy_from_slice(&coarse);
            } else {
                self.rk4_step(t, h, slice, &mut scratch);
            }
        }
        worst_local * steps as f64
    }
}

struct Rk4Scratch {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }
}
