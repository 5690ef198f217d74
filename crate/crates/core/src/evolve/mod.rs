//! Time-ordered exponentials U(t, s) of generator paths: ∂_t U = A(t) U,
//! U(s, s) = 1, later times on the left.

mod rk;

pub use rk::{integrate, segment_of, Method, OdeOptions, OdeStats};

use crate::error::{Error, Result};
use crate::field::{apply_field, FieldPath};
use crate::linalg::{all_finite, expm, gauss_legendre, gemm_into, one_norm, op_norm, CMat, C64};
use crate::virmod::ModuleData;
use serde_json::json;

/// A(t) on [0, 1], smooth on each piece between consecutive break points.
pub trait GeneratorPath {
    fn dim(&self) -> usize;

    /// 0 = b_0 < b_1 < … < b_J = 1.
    fn breakpoints(&self) -> Vec<f64>;

    /// out = A(t)·y using the data of piece `seg`.
    fn apply(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>);

    /// out = A(t)*·y.
    fn apply_adjoint(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>);

    fn dense(&self, seg: usize, t: f64) -> CMat {
        let d = self.dim();
        let mut out = CMat::zeros(d, d);
        self.apply(seg, t, &CMat::identity(d, d), &mut out, &mut Vec::new());
        out
    }

    /// Piece used at t (right-continuous).
    fn segment_at(&self, t: f64) -> usize {
        segment_of(&self.breakpoints(), t)
    }
}

/// t ↦ π(X(t)) on a truncated module, applied without dense matrices.
pub struct FieldGenerator<'m> {
    path: FieldPath,
    module: &'m ModuleData,
}

impl<'m> FieldGenerator<'m> {
    pub fn new(path: FieldPath, module: &'m ModuleData) -> Result<Self> {
        let support = path.support();
        if support > module.cutoff() {
            return Err(Error::ModeOutOfRange { mode: support, cutoff: module.cutoff() });
        }
        Ok(FieldGenerator { path, module })
    }

    pub fn path(&self) -> &FieldPath {
        &self.path
    }

    pub fn module(&self) -> &ModuleData {
        self.module
    }
}

impl GeneratorPath for FieldGenerator<'_> {
    fn dim(&self) -> usize {
        self.module.dim()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.path.breakpoints()
    }

    fn apply(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>) {
        out.fill(C64::new(0.0, 0.0));
        apply_field(&self.path.eval_segment(seg, t), self.module, y, out, false, scratch);
    }

    fn apply_adjoint(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>) {
        out.fill(C64::new(0.0, 0.0));
        apply_field(&self.path.eval_segment(seg, t), self.module, y, out, true, scratch);
    }
}

type Sampler = Box<dyn Fn(usize, f64) -> CMat + Send + Sync>;

/// Generator given by a dense-matrix sampler.
pub struct MatrixPath {
    dim: usize,
    breaks: Vec<f64>,
    sampler: Sampler,
}

impl MatrixPath {
    pub fn new(dim: usize, breaks: Vec<f64>, sampler: impl Fn(usize, f64) -> CMat + Send + Sync + 'static) -> Self {
        MatrixPath { dim, breaks, sampler: Box::new(sampler) }
    }

    pub fn constant(a: CMat) -> Self {
        MatrixPath::new(a.nrows(), vec![0.0, 1.0], move |_, _| a.clone())
    }

    /// A(t) = a(t)·D.
    pub fn scalar_times(d: CMat, a: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        MatrixPath::new(d.nrows(), vec![0.0, 1.0], move |_, t| &d * a(t))
    }
}

impl GeneratorPath for MatrixPath {
    fn dim(&self) -> usize {
        self.dim
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }

    fn apply(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, _: &mut Vec<C64>) {
        gemm_into(C64::new(1.0, 0.0), &(self.sampler)(seg, t), y, C64::new(0.0, 0.0), out);
    }

    fn apply_adjoint(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, _: &mut Vec<C64>) {
        gemm_into(C64::new(1.0, 0.0), &(self.sampler)(seg, t).adjoint(), y, C64::new(0.0, 0.0), out);
    }

    fn dense(&self, seg: usize, t: f64) -> CMat {
        (self.sampler)(seg, t)
    }
}

/// B(t) = A(1 − t)*.
pub struct Reversed<'a, G: ?Sized> {
    inner: &'a G,
    pieces: usize,
}

impl<'a, G: GeneratorPath + ?Sized> Reversed<'a, G> {
    pub fn new(inner: &'a G) -> Self {
        Reversed { pieces: inner.breakpoints().len() - 1, inner }
    }
}

impl<G: GeneratorPath + ?Sized> GeneratorPath for Reversed<'_, G> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints().iter().rev().map(|b| if *b == 1.0 { 0.0 } else { 1.0 - b }).collect()
    }

    fn apply(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>) {
        self.inner.apply_adjoint(self.pieces - 1 - seg, 1.0 - t, y, out, scratch);
    }

    fn apply_adjoint(&self, seg: usize, t: f64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>) {
        self.inner.apply(self.pieces - 1 - seg, 1.0 - t, y, out, scratch);
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub u: CMat,
    pub s: f64,
    pub t: f64,
    pub steps: usize,
    pub rejected: usize,
    pub evals: usize,
    pub errest: f64,
    pub method: String,
    /// max ‖A(τ)‖₁ over the piece ends, a stiffness indicator.
    pub generator_norm: f64,
}

impl EvolutionResult {
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.u.nrows())
            .map(|i| (0..self.u.ncols()).map(|j| [self.u[(i, j)].re, self.u[(i, j)].im]).collect())
            .collect();
        json!({
            "method": self.method,
            "s": self.s,
            "t": self.t,
            "steps": self.steps,
            "rejected": self.rejected,
            "evals": self.evals,
            "errest": self.errest,
            "generator_norm": self.generator_norm,
            "U": rows,
        })
    }
}

fn generator_norm<G: GeneratorPath + ?Sized>(g: &G, s: f64, t: f64) -> f64 {
    let b = g.breakpoints();
    let mut m = 0.0f64;
    for j in 0..b.len() - 1 {
        let (lo, hi) = (b[j].max(s), b[j + 1].min(t));
        if lo < hi {
            m = m.max(one_norm(&g.dense(j, lo))).max(one_norm(&g.dense(j, hi)));
        }
    }
    m
}

/// U(t, s)·y0 at each of `times` (within [s, t] or [t, s]).
pub fn propagate_at<G: GeneratorPath + ?Sized>(g: &G, s: f64, t: f64, y0: CMat, times: &[f64], opts: &OdeOptions) -> Result<(Vec<CMat>, OdeStats)> {
    let mut scratch = Vec::new();
    let mut rhs = |seg: usize, tau: f64, y: &CMat, out: &mut CMat| g.apply(seg, tau, y, out, &mut scratch);
    integrate(&mut rhs, &g.breakpoints(), s, t, y0, times, opts)
}

/// U(t, s)·y0.
pub fn propagate<G: GeneratorPath + ?Sized>(g: &G, s: f64, t: f64, y0: CMat, opts: &OdeOptions) -> Result<(CMat, OdeStats)> {
    let (mut ys, stats) = propagate_at(g, s, t, y0, &[t], opts)?;
    Ok((ys.pop().unwrap(), stats))
}

/// U(t, r)*·y for r in `times` ⊂ [s, t], from ∂_r V = −A(r)* V, V(t) = y.
pub fn propagate_adjoint<G: GeneratorPath + ?Sized>(g: &G, t: f64, s: f64, y: CMat, times: &[f64], opts: &OdeOptions) -> Result<(Vec<CMat>, OdeStats)> {
    let mut scratch = Vec::new();
    let mut rhs = |seg: usize, tau: f64, v: &CMat, out: &mut CMat| {
        g.apply_adjoint(seg, tau, v, out, &mut scratch);
        out.neg_mut();
    };
    integrate(&mut rhs, &g.breakpoints(), t, s, y, times, opts)
}

/// Adaptive Runge–Kutta solution of U' = A(t)U, U(s) = 1.
pub fn ode_exp<G: GeneratorPath + ?Sized>(g: &G, s: f64, t: f64, opts: &OdeOptions) -> Result<EvolutionResult> {
    if !(s <= t) || !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("ode_exp needs s ≤ t and tol > 0 (s={s}, t={t}, tol={})", opts.tol)));
    }
    let d = g.dim();
    let (u, stats) = propagate(g, s, t, CMat::identity(d, d), opts)?;
    Ok(EvolutionResult {
        u,
        s,
        t,
        steps: stats.steps,
        rejected: stats.rejected,
        evals: stats.evals,
        errest: stats.errest,
        method: opts.method.name().to_string(),
        generator_norm: generator_norm(g, s, t),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    Left,
    Midpoint,
}

/// exp(Δ A(τ_{n−1}))⋯exp(Δ A(τ_0)), Δ = (t − s)/n, τ_j = s + jΔ (left
/// endpoints). Runs of identical consecutive samples are multiplied by
/// repeated squaring.
pub fn piecewise_exp<G: GeneratorPath + ?Sized>(g: &G, s: f64, t: f64, n: usize, sampling: Sampling) -> Result<EvolutionResult> {
    if !(s <= t) || n == 0 {
        return Err(Error::Domain(format!("piecewise_exp needs s ≤ t and n ≥ 1 (s={s}, t={t}, n={n})")));
    }
    let d = g.dim();
    let delta = (t - s) / n as f64;
    let shift = match sampling {
        Sampling::Left => 0.0,
        Sampling::Midpoint => 0.5,
    };
    let sample = |j: usize| {
        let tau = s + (j as f64 + shift) * delta;
        g.dense(g.segment_at(tau), tau)
    };
    let mut u = CMat::identity(d, d);
    let mut tmp = CMat::zeros(d, d);
    let mut gen_norm = 0.0f64;
    let mut j = 0;
    let mut current = sample(0);
    while j < n {
        let mut run = 1;
        let mut next = None;
        while j + run < n {
            let a = sample(j + run);
            if a == current {
                run += 1;
            } else {
                next = Some(a);
                break;
            }
        }
        gen_norm = gen_norm.max(one_norm(&current));
        let factor = matrix_power(&expm(&(&current * C64::new(delta, 0.0))), run);
        gemm_into(C64::new(1.0, 0.0), &factor, &u, C64::new(0.0, 0.0), &mut tmp);
        std::mem::swap(&mut u, &mut tmp);
        if !all_finite(&u) {
            return Err(Error::NonFinite("piecewise product"));
        }
        j += run;
        if let Some(a) = next {
            current = a;
        }
    }
    Ok(EvolutionResult {
        u,
        s,
        t,
        steps: n,
        rejected: 0,
        evals: n,
        errest: f64::NAN,
        method: match sampling {
            Sampling::Left => "product-left".into(),
            Sampling::Midpoint => "product-midpoint".into(),
        },
        generator_norm: gen_norm,
    })
}

fn matrix_power(a: &CMat, mut k: usize) -> CMat {
    let d = a.nrows();
    let mut result = CMat::identity(d, d);
    let mut base = a.clone();
    let mut first = true;
    while k > 0 {
        if k & 1 == 1 {
            result = if first { base.clone() } else { &base * &result };
            first = false;
        }
        k >>= 1;
        if k > 0 {
            base = &base * &base;
        }
    }
    result
}

/// max over (s, t) of ‖Ũ(t, s) − U(1 − s, 1 − t)*‖ with Ũ generated by A(1 − t)*.
pub fn adjoint_residual_at<G: GeneratorPath + ?Sized>(g: &G, pairs: &[(f64, f64)], opts: &OdeOptions) -> Result<f64> {
    let rev = Reversed::new(g);
    let mut worst = 0.0f64;
    for &(s, t) in pairs {
        let lhs = ode_exp(&rev, s, t, opts)?.u;
        let rhs = ode_exp(g, 1.0 - t, 1.0 - s, opts)?.u.adjoint();
        worst = worst.max(op_norm(&(lhs - rhs)));
    }
    Ok(worst)
}

pub const ADJOINT_PAIRS: [(f64, f64); 3] = [(0.0, 1.0), (0.25, 0.75), (0.1, 0.6)];

pub fn adjoint_evolution_check<G: GeneratorPath + ?Sized>(g: &G, opts: &OdeOptions) -> Result<f64> {
    adjoint_residual_at(g, &ADJOINT_PAIRS, opts)
}

/// ∂_p U_p(1, 0) two ways.
#[derive(Clone, Debug)]
pub struct DerivativePair {
    /// ∫_0^1 U_p(1, x) ∂_p A(p, x) U_p(x, 0) dx by Gauss–Legendre per piece.
    pub integral: CMat,
    /// (U_{p+δ}(1, 0) − U_{p−δ}(1, 0)) / 2δ.
    pub difference: CMat,
}

impl DerivativePair {
    pub fn residual(&self) -> f64 {
        op_norm(&(&self.integral - &self.difference))
    }
}

pub fn parameter_derivative<G, F>(family: F, p: f64, delta: f64, nodes: usize, opts: &OdeOptions) -> Result<DerivativePair>
where
    G: GeneratorPath,
    F: Fn(f64) -> Result<G>,
{
    let g = family(p)?;
    let gp = family(p + delta)?;
    let gm = family(p - delta)?;
    let d = g.dim();
    let breaks = g.breakpoints();
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for j in 0..breaks.len() - 1 {
        let (x, w) = gauss_legendre(nodes, breaks[j], breaks[j + 1]);
        xs.extend(x);
        ws.extend(w);
    }
    let (forward, _) = propagate_at(&g, 0.0, 1.0, CMat::identity(d, d), &xs, opts)?;
    let (backward, _) = propagate_adjoint(&g, 1.0, 0.0, CMat::identity(d, d), &xs, opts)?;
    let mut integral = CMat::zeros(d, d);
    let mut tmp = CMat::zeros(d, d);
    for (k, &x) in xs.iter().enumerate() {
        let da = (gp.dense(gp.segment_at(x), x) - gm.dense(gm.segment_at(x), x)) / C64::new(2.0 * delta, 0.0);
        gemm_into(C64::new(1.0, 0.0), &da, &forward[k], C64::new(0.0, 0.0), &mut tmp);
        // backward[k] = U(1, x)*
        gemm_into(C64::new(ws[k], 0.0), &backward[k].adjoint(), &tmp, C64::new(1.0, 0.0), &mut integral);
    }
    let up = ode_exp(&gp, 0.0, 1.0, opts)?.u;
    let um = ode_exp(&gm, 0.0, 1.0, opts)?.u;
    let difference = (up - um) / C64::new(2.0 * delta, 0.0);
    Ok(DerivativePair { integral, difference })
}

#[derive(Clone, Debug)]
pub struct GrowthReport {
    /// max over samples of ‖U(t, s)v‖ − e^{ω(t−s)}‖v‖; ≤ 0 when the bound holds.
    pub margin: f64,
    pub worst: (f64, f64),
    pub samples: usize,
}

impl GrowthReport {
    pub fn violation(&self) -> f64 {
        self.margin.max(0.0)
    }
}

/// Growth bound ‖U(t, s)v‖ ≤ e^{ω(t−s)}‖v‖ on the columns of `vectors`.
pub fn growth_bound_check<G: GeneratorPath + ?Sized>(g: &G, omega: f64, pairs: &[(f64, f64)], vectors: &CMat, opts: &OdeOptions) -> Result<GrowthReport> {
    let mut report = GrowthReport { margin: f64::NEG_INFINITY, worst: (0.0, 0.0), samples: 0 };
    for &(s, t) in pairs {
        let (y, _) = propagate(g, s, t, vectors.clone(), opts)?;
        let bound = (omega * (t - s)).exp();
        for j in 0..vectors.ncols() {
            let m = y.column(j).norm() - bound * vectors.column(j).norm();
            report.samples += 1;
            if m > report.margin {
                report.margin = m;
                report.worst = (s, t);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Interp, VectorField};
    use crate::linalg::{c, max_abs};
    use crate::virmod::{ModuleParams, DEFAULT_NULLTOL};

    fn module(n: usize) -> ModuleData {
        ModuleData::build(ModuleParams::new(2.0, 0.5, n), DEFAULT_NULLTOL).unwrap()
    }

    fn random_small(d: usize, seed: u64) -> CMat {
        let mut r = crate::sample::rng(seed);
        CMat::from_fn(d, d, |_, _| crate::sample::complex_normal(&mut r) * 0.5)
    }

    #[test]
    fn constant_path_matches_expm_for_every_n() {
        let a = random_small(5, 1);
        let g = MatrixPath::constant(a.clone());
        let exact = expm(&(&a * c(0.7, 0.0)));
        for n in [1, 3, 16] {
            let u = piecewise_exp(&g, 0.1, 0.8, n, Sampling::Left).unwrap().u;
            assert!(max_abs(&(u - &exact)) < 1e-12, "n={n}");
        }
        let u = ode_exp(&g, 0.1, 0.8, &OdeOptions::with_tol(1e-12)).unwrap();
        assert!(max_abs(&(u.u - &exact)) < 1e-10);
    }

    #[test]
    fn zero_path_is_identity() {
        let g = MatrixPath::constant(CMat::zeros(4, 4));
        let r = ode_exp(&g, 0.0, 1.0, &OdeOptions::default()).unwrap();
        assert_eq!(r.u, CMat::identity(4, 4));
        assert_eq!(piecewise_exp(&g, 0.0, 1.0, 5, Sampling::Left).unwrap().u, CMat::identity(4, 4));
    }

    #[test]
    fn commuting_family_matches_quadrature() {
        let dvec = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(-1.0, 0.0), c(0.5, 1.0), c(0.0, -2.0)]));
        let a = |t: f64| c((3.0 * t).sin() + 1.0, 0.2 * t);
        let g = MatrixPath::scalar_times(dvec.clone(), a);
        // ∫_0^1 a = (1 − cos 3)/3 + 1, + 0.1i
        let integral = c((1.0 - 3f64.cos()) / 3.0 + 1.0, 0.1);
        let exact = expm(&(&dvec * integral));
        let u = ode_exp(&g, 0.0, 1.0, &OdeOptions::with_tol(1e-12)).unwrap();
        assert!(max_abs(&(u.u - &exact)) < 1e-10);
        let p = piecewise_exp(&g, 0.0, 1.0, 4096, Sampling::Left).unwrap();
        assert!(max_abs(&(p.u - &exact)) < 5e-3);
    }

    #[test]
    fn diagonal_standard_path() {
        let m = module(6);
        let r: f64 = 0.5;
        let path = FieldPath::constant(VectorField::ell(0).scale(c(r.ln(), 0.0)));
        let g = FieldGenerator::new(path, &m).unwrap();
        let u = ode_exp(&g, 0.0, 1.0, &OdeOptions::default()).unwrap().u;
        for (i, k) in m.levels().into_iter().enumerate() {
            assert!((u[(i, i)] - c(r.powf(0.5 + k as f64), 0.0)).norm() < 1e-10);
        }
        assert!(max_abs(&(u.clone() - CMat::from_diagonal(&u.diagonal()))) < 1e-14);
    }

    #[test]
    fn methods_agree_and_flow_property() {
        let m = module(5);
        let mut rng = crate::sample::rng(11);
        let path = crate::sample::random_inward_path(&mut rng, &[-1, 1, 2], 3, 0.4, Interp::Linear);
        let g = FieldGenerator::new(path, &m).unwrap();
        let a = ode_exp(&g, 0.0, 1.0, &OdeOptions::with_tol(1e-11)).unwrap();
        let b = ode_exp(&g, 0.0, 1.0, &OdeOptions { tol: 1e-11, method: Method::Rk45, max_steps: 1_000_000 }).unwrap();
        assert!(max_abs(&(&a.u - &b.u)) < 1e-8);
        let d = m.dim();
        let (mid, _) = propagate(&g, 0.0, 0.4, CMat::identity(d, d), &OdeOptions::with_tol(1e-11)).unwrap();
        let (rest, _) = propagate(&g, 0.4, 1.0, mid, &OdeOptions::with_tol(1e-11)).unwrap();
        assert!(max_abs(&(rest - &a.u)) < 1e-9);
    }

    #[test]
    fn adjoint_identity_on_rotation_and_self_adjoint() {
        let m = module(5);
        let rot = FieldPath::constant(VectorField::ell(0).scale(c(0.0, 0.8)));
        let g = FieldGenerator::new(rot, &m).unwrap();
        assert!(adjoint_evolution_check(&g, &OdeOptions::default()).unwrap() < 1e-9);
        let h = random_small(4, 5);
        let sa = MatrixPath::constant(&h + h.adjoint());
        assert!(adjoint_evolution_check(&sa, &OdeOptions::default()).unwrap() < 1e-9);
    }

    #[test]
    fn propagate_adjoint_matches_dense() {
        let a = random_small(4, 9);
        let b = random_small(4, 10);
        let g = MatrixPath::new(4, vec![0.0, 0.5, 1.0], move |seg, t| if seg == 0 { &a * c(t, 0.0) } else { &b * c(1.0 - t, 0.0) });
        let opts = OdeOptions::with_tol(1e-12);
        let u = ode_exp(&g, 0.3, 1.0, &opts).unwrap().u;
        let (v, _) = propagate_adjoint(&g, 1.0, 0.0, CMat::identity(4, 4), &[0.3], &opts).unwrap();
        assert!(max_abs(&(u.adjoint() - &v[0])) < 1e-10);
    }

    #[test]
    fn derivative_of_standard_family() {
        let m = module(4);
        let family = |r: f64| FieldGenerator::new(FieldPath::constant(VectorField::ell(0).scale(c(r.ln(), 0.0))), &m);
        let r = 0.6;
        let pair = parameter_derivative(family, r, 1e-3, 4, &OdeOptions::with_tol(1e-12)).unwrap();
        for (i, k) in m.levels().into_iter().enumerate() {
            let e = 0.5 + k as f64;
            let exact = e * r.powf(e - 1.0);
            assert!((pair.integral[(i, i)].re - exact).abs() < 1e-5 * exact.max(1.0));
        }
        assert!(pair.residual() < 1e-5);
    }

    #[test]
    fn rotation_preserves_norms() {
        let m = module(6);
        let g = FieldGenerator::new(FieldPath::constant(VectorField::ell(0).scale(c(0.0, 1.3))), &m).unwrap();
        let mut rng = crate::sample::rng(2);
        let v = crate::sample::random_protected_vectors(&mut rng, &m, 4, 5);
        let rep = growth_bound_check(&g, 0.0, &[(0.0, 1.0), (0.3, 0.6)], &v, &OdeOptions::default()).unwrap();
        assert!(rep.margin.abs() < 1e-9);
    }
}
