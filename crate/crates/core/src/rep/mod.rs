//! The representation π of the annulus semigroup on truncated modules and
//! the residuals of its structural identities.
//!
//! Every residual is measured on a protected block: the columns of the
//! identity spanning levels ≤ N − 2·(mode budget), where the mode budget is
//! the largest mode any input field carries.

mod suite;

pub use suite::*;

use crate::annulus::{compose, dagger, homotopy_cocycle, AnnulusElement, FramingHomotopy, FramingOptions};
use crate::error::{Error, Result};
use crate::evolve::{integrate, propagate, propagate_adjoint, FieldGenerator, OdeOptions, OdeStats};
use crate::field::{apply_field, cocycle, field_norm, witt_bracket, FieldPath, Interp, VectorField, DEFAULT_GRID, DEFAULT_INWARD_TOL};
use crate::linalg::{gauss_legendre, op_norm, CMat, C64, I};
use crate::virmod::{sobolev_weights, ModuleData, Partition, VermaAction};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::json;

/// Coefficients below this fraction of a field's ℓ¹ norm do not count
/// towards its mode budget.
pub const SUPPORT_REL_TOL: f64 = 1e-6;

/// z·U with U the time-ordered exponential of π(X(t)), restricted to the
/// first `cols` basis vectors when only a block was requested.
#[derive(Clone, Debug)]
pub struct RepresentedAnnulus {
    pub u: CMat,
    pub z: C64,
    pub cols: usize,
    pub stats: OdeStats,
    pub method: String,
    pub mode_budget: usize,
}

impl RepresentedAnnulus {
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.u.nrows())
            .map(|i| (0..self.u.ncols()).map(|j| [self.u[(i, j)].re, self.u[(i, j)].im]).collect())
            .collect();
        json!({
            "z": [self.z.re, self.z.im],
            "method": self.method,
            "steps": self.stats.steps,
            "rejected": self.stats.rejected,
            "evals": self.stats.evals,
            "errest": self.stats.errest,
            "mode_budget": self.mode_budget,
            "U": rows,
        })
    }
}

/// Largest |n| whose coefficient exceeds `rel`·‖X‖₁ anywhere along the path.
pub fn effective_support(path: &FieldPath, rel: f64) -> usize {
    path.fields()
        .iter()
        .map(|x| {
            let cut = rel * x.l1_norm();
            x.modes().filter(|(_, a)| a.norm() > cut).map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0)
        })
        .max()
        .unwrap_or(0)
}

pub fn mode_budget(e: &AnnulusElement) -> usize {
    effective_support(&e.path, SUPPORT_REL_TOL)
}

/// Highest protected level N − 2·budget.
pub fn protected_level(module: &ModuleData, budget: usize) -> Result<usize> {
    module
        .cutoff()
        .checked_sub(2 * budget)
        .ok_or_else(|| Error::Domain(format!("cutoff {} leaves no protected levels for mode budget {budget}", module.cutoff())))
}

/// The d×p block of the identity spanning levels ≤ `level`.
pub fn protected_block(module: &ModuleData, level: usize) -> CMat {
    CMat::identity(module.dim(), module.dim_through(level))
}

/// Coefficients below this fraction of a field's ℓ¹ norm are roundoff
/// (framing extraction leaves them on every mode) and are dropped before
/// the evolution, also above the cutoff.
pub const DROP_REL_TOL: f64 = 1e-12;

fn generator<'m>(e: &AnnulusElement, module: &'m ModuleData) -> Result<FieldGenerator<'m>> {
    e.path.check_inward(DEFAULT_GRID, DEFAULT_INWARD_TOL)?;
    let n = module.cutoff();
    let support = effective_support(&e.path, DROP_REL_TOL);
    if support > n {
        return Err(Error::ModeOutOfRange { mode: support, cutoff: n });
    }
    let path = e.path.map(|x| {
        let cut = DROP_REL_TOL * x.l1_norm();
        let mut y = x.resized(support);
        for m in -(support as i32)..=support as i32 {
            if y.get(m).norm() <= cut {
                y.set(m, C64::new(0.0, 0.0));
            }
        }
        y
    });
    FieldGenerator::new(path, module)
}

/// z·U(1, 0)·y0.
pub fn represent_on(e: &AnnulusElement, module: &ModuleData, y0: CMat, opts: &OdeOptions) -> Result<(CMat, OdeStats)> {
    let g = generator(e, module)?;
    let (mut y, stats) = propagate(&g, 0.0, 1.0, y0, opts)?;
    y *= e.z;
    Ok((y, stats))
}

/// (z·U(1, 0))*·y.
pub fn represent_adjoint_on(e: &AnnulusElement, module: &ModuleData, y: CMat, opts: &OdeOptions) -> Result<(CMat, OdeStats)> {
    let g = generator(e, module)?;
    let (mut ys, stats) = propagate_adjoint(&g, 1.0, 0.0, y, &[0.0], opts)?;
    let mut v = ys.pop().unwrap();
    v *= e.z.conj();
    Ok((v, stats))
}

pub fn represent(e: &AnnulusElement, module: &ModuleData, opts: &OdeOptions) -> Result<RepresentedAnnulus> {
    represent_columns(e, module, module.dim(), opts)
}

/// The first `cols` columns of π(E).
pub fn represent_columns(e: &AnnulusElement, module: &ModuleData, cols: usize, opts: &OdeOptions) -> Result<RepresentedAnnulus> {
    let (u, stats) = represent_on(e, module, CMat::identity(module.dim(), cols.min(module.dim())), opts)?;
    Ok(RepresentedAnnulus { cols: u.ncols(), u, z: e.z, stats, method: opts.method.name().to_string(), mode_budget: mode_budget(e) })
}

/// ‖U‖ as an operator on ℋ_n (norm ‖(1 + L₀)ⁿ·‖) restricted to the
/// represented columns, next to max_τ ‖X(τ)‖_{n+5/2} which controls it.
#[derive(Clone, Debug)]
pub struct HnNorm {
    pub order: f64,
    pub norm: f64,
    pub field_norm: f64,
}

pub fn hn_norm(rep: &RepresentedAnnulus, e: &AnnulusElement, module: &ModuleData, order: f64) -> HnNorm {
    let w = sobolev_weights(module, order);
    let mut m = rep.u.clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            m[(i, j)] *= w[i] / w[j];
        }
    }
    let field_norm = e.path.fields().iter().map(|x| field_norm(x, order + 2.5)).fold(0.0, f64::max);
    HnNorm { order, norm: op_norm(&m), field_norm }
}

/// A residual measured on the block of levels ≤ `level`.
#[derive(Clone, Debug)]
pub struct BlockResidual {
    pub residual: f64,
    pub level: usize,
}

/// ‖(π(E1∘E2) − π(E1)π(E2))·P‖.
pub fn semigroup_residual(e1: &AnnulusElement, e2: &AnnulusElement, module: &ModuleData, opts: &OdeOptions) -> Result<BlockResidual> {
    let level = protected_level(module, mode_budget(e1).max(mode_budget(e2)))?;
    let p = protected_block(module, level);
    let (lhs, _) = represent_on(&compose(e1, e2)?, module, p.clone(), opts)?;
    let (inner, _) = represent_on(e2, module, p, opts)?;
    let (rhs, _) = represent_on(e1, module, inner, opts)?;
    Ok(BlockResidual { residual: op_norm(&(lhs - rhs)), level })
}

/// ‖(π(E†) − π(E)*)·P‖.
pub fn dagger_residual(e: &AnnulusElement, module: &ModuleData, opts: &OdeOptions) -> Result<BlockResidual> {
    let level = protected_level(module, mode_budget(e))?;
    let p = protected_block(module, level);
    let (lhs, _) = represent_on(&dagger(e), module, p.clone(), opts)?;
    let (rhs, _) = represent_adjoint_on(e, module, p, opts)?;
    Ok(BlockResidual { residual: op_norm(&(lhs - rhs)), level })
}

#[derive(Clone, Debug)]
pub struct CocycleCheck {
    pub residual: f64,
    /// E = ∬ ω(X, Y); the end framings satisfy U₁ = e^E·U₀.
    pub exponent: C64,
    pub level: usize,
}

/// ‖U₁·P − e^{∬ω(X,Y)}·U₀·P‖ for the framings at u = 0 and u = 1.
pub fn cocycle_invariance_residual(hm: &FramingHomotopy, module: &ModuleData, fopts: &FramingOptions, opts: &OdeOptions) -> Result<CocycleCheck> {
    let one = C64::new(1.0, 0.0);
    let e0 = AnnulusElement::from_framing(hm.first(), one, fopts)?;
    let e1 = AnnulusElement::from_framing(hm.last(), one, fopts)?;
    let exponent = homotopy_cocycle(hm, module.params.c, fopts)?;
    let level = protected_level(module, mode_budget(&e0).max(mode_budget(&e1)))?;
    let p = protected_block(module, level);
    let (u0, _) = represent_on(&e0, module, p.clone(), opts)?;
    let (u1, _) = represent_on(&e1, module, p, opts)?;
    Ok(CocycleCheck { residual: op_norm(&(u1 - u0 * exponent.exp())), exponent, level })
}

/// Solution of f' = [X(t), f] (the θ-form f_t = X_θ f − X f_θ), f(0) = f0.
#[derive(Clone, Debug)]
pub struct Transport {
    pub times: Vec<f64>,
    pub fields: Vec<VectorField>,
    /// ∫₀¹ ω(X(τ), f(τ)) dτ, Gauss–Legendre on each piece of the path.
    pub omega: C64,
    /// Largest relative ℓ¹ mass of f(t) beyond the mode budget.
    pub tail: f64,
    pub maxmode: usize,
}

impl Transport {
    pub fn last(&self) -> &VectorField {
        self.fields.last().expect("transport has samples")
    }

    pub fn to_path(&self) -> Result<FieldPath> {
        FieldPath::new(self.times.clone(), self.fields.clone(), Interp::Linear)
    }
}

const TRANSPORT_NODES: usize = 8;

/// Transport with coefficients kept up to 2×(budget of f0 and X); fails
/// with ModeOverflow when the mass beyond the budget exceeds `tail_tol`.
pub fn transport_field(f0: &VectorField, path: &FieldPath, c: f64, tail_tol: f64, opts: &OdeOptions) -> Result<Transport> {
    let budget = f0.support() + effective_support(path, SUPPORT_REL_TOL);
    let t = transport_field_with(f0, path, c, 2 * budget, budget, opts)?;
    if t.tail > tail_tol {
        return Err(Error::ModeOverflow { tail: t.tail, allowed: tail_tol });
    }
    Ok(t)
}

/// Transport kept to modes ≤ `maxmode`; `tail` measured beyond `budget`.
pub fn transport_field_with(f0: &VectorField, path: &FieldPath, c: f64, maxmode: usize, budget: usize, opts: &OdeOptions) -> Result<Transport> {
    let k = maxmode as i32;
    let len = 2 * maxmode + 1;
    let to_vec = |f: &VectorField| CMat::from_fn(len, 1, |i, _| f.get(i as i32 - k));
    let from_vec = |y: &CMat| {
        let mut f = VectorField::zero(maxmode);
        for i in 0..len {
            f.set(i as i32 - k, y[(i, 0)]);
        }
        f
    };
    let breaks = path.breakpoints();
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut node_seg = Vec::new();
    for j in 0..breaks.len() - 1 {
        let (x, w) = gauss_legendre(TRANSPORT_NODES, breaks[j], breaks[j + 1]);
        nodes.extend(x);
        weights.extend(w);
        node_seg.extend(std::iter::repeat_n(j, TRANSPORT_NODES));
    }
    let mut outputs = breaks.clone();
    outputs.extend(nodes.iter().copied());
    let mut rhs = |seg: usize, t: f64, y: &CMat, out: &mut CMat| {
        let b = witt_bracket(&path.eval_segment(seg, t), &from_vec(y));
        for i in 0..len {
            out[(i, 0)] = b.get(i as i32 - k);
        }
    };
    let (ys, _) = integrate(&mut rhs, &breaks, 0.0, 1.0, to_vec(f0), &outputs, opts)?;
    let fields: Vec<VectorField> = ys.iter().map(|y| from_vec(y)).collect();
    let nb = breaks.len();
    let mut omega = C64::new(0.0, 0.0);
    for (i, f) in fields[nb..].iter().enumerate() {
        omega += cocycle(&path.eval_segment(node_seg[i], nodes[i]), f, c) * weights[i];
    }
    let tail = fields
        .iter()
        .map(|f| {
            let total = f.l1_norm();
            if total > 0.0 { f.tail(budget) / total } else { 0.0 }
        })
        .fold(0.0, f64::max);
    Ok(Transport { times: breaks, fields: fields[..nb].to_vec(), omega, tail, maxmode })
}

#[derive(Clone, Debug)]
pub struct SegalCheck {
    pub residual: f64,
    pub omega: C64,
    pub tail: f64,
    pub level: usize,
}

/// ‖(T·π(f(0)) − π(f(1))·T − (∫ω(X, f))·T)·P‖ with T = π(E) and f
/// transported along the path of E, kept to modes ≤ N. The mode budget is
/// that of the path and f0; the transported f(t) is not counted, its
/// support keeps growing along paths with |modes| ≥ 2.
pub fn segal_residual(e: &AnnulusElement, f0: &VectorField, module: &ModuleData, opts: &OdeOptions) -> Result<SegalCheck> {
    Ok(segal_residuals(e, std::slice::from_ref(f0), module, opts)?.remove(0))
}

/// `segal_residual` for several f0 at once, with a single evolution of
/// [P | π(f0₁)P | …] on the block for the largest budget.
pub fn segal_residuals(e: &AnnulusElement, f0s: &[VectorField], module: &ModuleData, opts: &OdeOptions) -> Result<Vec<SegalCheck>> {
    let n = module.cutoff();
    let budgets: Vec<usize> = f0s.iter().map(|f| mode_budget(e).max(f.support())).collect();
    let level = protected_level(module, budgets.iter().copied().max().unwrap_or(0))?;
    let p = protected_block(module, level);
    let (d, w) = (p.nrows(), p.ncols());
    let mut scratch = Vec::new();
    let mut stacked = CMat::zeros(d, w * (f0s.len() + 1));
    stacked.columns_mut(0, w).copy_from(&p);
    for (i, f0) in f0s.iter().enumerate() {
        let mut fp = CMat::zeros(d, w);
        apply_field(f0, module, &p, &mut fp, false, &mut scratch);
        stacked.columns_mut((i + 1) * w, w).copy_from(&fp);
    }
    let (t, _) = represent_on(e, module, stacked, opts)?;
    let tp = t.columns(0, w).into_owned();
    let mut out = Vec::with_capacity(f0s.len());
    for (i, f0) in f0s.iter().enumerate() {
        let tr = transport_field_with(f0, &e.path, module.params.c, n, budgets[i], opts)?;
        let mut ft = CMat::zeros(d, w);
        apply_field(tr.last(), module, &tp, &mut ft, false, &mut scratch);
        let r = t.columns((i + 1) * w, w) - ft - &tp * tr.omega;
        out.push(SegalCheck { residual: op_norm(&r), omega: tr.omega, tail: tr.tail, level });
    }
    Ok(out)
}

/// ½[(F(m+ε) − F(m−ε))/2ε + i(F(m+iε) − F(m−iε))/2ε] applied to the
/// columns of `xi`, with F(m) = π(A_m); returns the largest column norm.
pub fn holomorphy_residual<F>(family: F, m: C64, module: &ModuleData, eps: f64, xi: &CMat, opts: &OdeOptions) -> Result<f64>
where
    F: Fn(C64) -> Result<AnnulusElement>,
{
    let apply = |dm: C64| -> Result<CMat> { Ok(represent_on(&family(m + dm)?, module, xi.clone(), opts)?.0) };
    let e = C64::new(eps, 0.0);
    let ie = I * eps;
    let dx = (apply(e)? - apply(-e)?) / C64::new(2.0 * eps, 0.0);
    let dy = (apply(ie)? - apply(-ie)?) / C64::new(2.0 * eps, 0.0);
    let d = (dx + dy * I) * C64::new(0.5, 0.0);
    Ok(d.column_iter().map(|col| col.norm()).fold(0.0, f64::max))
}

/// ‖L₋₁ⁿ v‖² for n = 0..=nmax, exactly, through the Verma action.
pub fn l_minus_one_norms(c: &BigRational, h: &BigRational, nmax: usize) -> Vec<BigRational> {
    let mut act = VermaAction::new(c.clone(), h.clone());
    let mut out = vec![BigRational::one()];
    for n in 1..=nmax {
        // L_1ⁿ L_{-1}ⁿ v, one lowering at a time
        let mut vec: Vec<(Partition, BigRational)> = vec![(Partition(vec![1; n]), BigRational::one())];
        for _ in 0..n {
            let mut next: std::collections::BTreeMap<Partition, BigRational> = Default::default();
            for (lam, a) in &vec {
                for (mu, b) in act.act(1, lam).iter() {
                    let e = next.entry(mu.clone()).or_insert_with(BigRational::zero);
                    *e = e.clone() + a * b;
                }
            }
            vec = next.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        }
        out.push(vec.into_iter().find(|(p, _)| p.is_empty()).map(|(_, v)| v).unwrap_or_else(BigRational::zero));
    }
    out
}

#[derive(Clone, Debug)]
pub struct MobiusOverlap {
    pub partial_sums: Vec<f64>,
    pub target: f64,
    /// max_n |‖L₋₁ⁿv‖² − n!∏_{k<n}(2h+k)| relative, over the computed terms.
    pub term_mismatch: f64,
}

/// Partial sums Σ_{n≤N} |w|^{2n}‖L₋₁ⁿv‖²/(n!)² of ‖e^{wL₋₁}v‖² against (1−|w|²)^{−2h}.
pub fn mobius_overlap(c: f64, h: f64, w: f64, nmax: usize) -> MobiusOverlap {
    let norms = l_minus_one_norms(&crate::virmod::rational(c), &crate::virmod::rational(h), nmax);
    let mut partial = Vec::with_capacity(nmax + 1);
    let mut sum = 0.0;
    let mut fact = 1.0f64;
    let mut closed = 1.0f64;
    let mut mismatch = 0.0f64;
    for (n, q) in norms.iter().enumerate() {
        if n > 0 {
            fact *= n as f64;
            closed *= n as f64 * (2.0 * h + (n - 1) as f64);
        }
        let val = q.to_f64().unwrap_or(f64::NAN);
        mismatch = mismatch.max((val - closed).abs() / closed.abs().max(f64::MIN_POSITIVE));
        sum += w.abs().powi(2 * n as i32) * val / (fact * fact);
        partial.push(sum);
    }
    MobiusOverlap { partial_sums: partial, target: (1.0 - w * w).powf(-2.0 * h), term_mismatch: mismatch }
}

#[cfg(test)]
mod tests;
