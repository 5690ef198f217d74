//! Vector fields on the circle in the ℓ-basis, ℓ_n = z^{n+1}∂_z, and paths of them.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, I};
use crate::virmod::ModuleData;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_GRIDTOL: f64 = 1e-12;
pub const DEFAULT_INWARD_TOL: f64 = 1e-10;

/// X = Σ_{|n| ≤ M} a_n ℓ_n.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    maxmode: usize,
    coeffs: Vec<C64>,
}

impl VectorField {
    pub fn zero(maxmode: usize) -> Self {
        VectorField { maxmode, coeffs: vec![C64::new(0.0, 0.0); 2 * maxmode + 1] }
    }

    /// The single mode ℓ_n.
    pub fn ell(n: i32) -> Self {
        let mut x = VectorField::zero(n.unsigned_abs() as usize);
        x.set(n, C64::new(1.0, 0.0));
        x
    }

    pub fn from_modes(modes: &[(i32, C64)]) -> Self {
        let m = modes.iter().map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0);
        let mut x = VectorField::zero(m);
        for &(n, a) in modes {
            x.set(n, x.get(n) + a);
        }
        x
    }

    pub fn maxmode(&self) -> usize {
        self.maxmode
    }

    /// Largest |n| with a nonzero coefficient.
    pub fn support(&self) -> usize {
        self.modes().filter(|(_, a)| *a != C64::new(0.0, 0.0)).map(|(n, _)| n.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn get(&self, n: i32) -> C64 {
        if n.unsigned_abs() as usize > self.maxmode {
            return C64::new(0.0, 0.0);
        }
        self.coeffs[(n + self.maxmode as i32) as usize]
    }

    /// Sets a_n, widening the mode bound when needed.
    pub fn set(&mut self, n: i32, a: C64) {
        let need = n.unsigned_abs() as usize;
        if need > self.maxmode {
            *self = self.resized(need);
        }
        let m = self.maxmode as i32;
        self.coeffs[(n + m) as usize] = a;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i32, C64)> + '_ {
        let m = self.maxmode as i32;
        self.coeffs.iter().enumerate().map(move |(i, &a)| (i as i32 - m, a))
    }

    /// Same field with mode bound `m` (dropping modes above it).
    pub fn resized(&self, m: usize) -> Self {
        let mut out = VectorField::zero(m);
        for (n, a) in self.modes() {
            if n.unsigned_abs() as usize <= m {
                out.coeffs[(n + m as i32) as usize] = a;
            }
        }
        out
    }

    /// ℓ¹ mass of the modes with |n| > m.
    pub fn tail(&self, m: usize) -> f64 {
        self.modes().filter(|(n, _)| n.unsigned_abs() as usize > m).map(|(_, a)| a.norm()).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        VectorField { maxmode: self.maxmode, coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    /// The field X* with π(X)* = π(X*): (X*)_n = conj(a_{-n}).
    pub fn adjoint(&self) -> Self {
        let mut out = VectorField::zero(self.maxmode);
        for (n, a) in self.modes() {
            out.set(-n, a.conj());
        }
        out
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a.norm()).sum()
    }

    /// Σ a_n e^{inθ} at θ.
    pub fn series(&self, theta: f64) -> C64 {
        self.modes().map(|(n, a)| a * C64::from_polar(1.0, n as f64 * theta)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|a| *a == C64::new(0.0, 0.0))
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        let m = self.maxmode.max(rhs.maxmode);
        let mut out = self.resized(m);
        for (n, a) in rhs.modes() {
            out.set(n, out.get(n) + a);
        }
        out
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        self + &rhs.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul<C64> for &VectorField {
    type Output = VectorField;
    fn mul(self, s: C64) -> VectorField {
        self.scale(s)
    }
}

/// [X, Y] with [ℓ_m, ℓ_n] = (m − n) ℓ_{m+n}.
pub fn witt_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    let mut out = VectorField::zero(x.maxmode + y.maxmode);
    for (m, a) in x.modes() {
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        for (n, b) in y.modes() {
            if m != n {
                let k = m + n;
                out.set(k, out.get(k) + a * b * (m - n) as f64);
            }
        }
    }
    out
}

/// ω(X, Y) = (c/12) Σ_m (m³ − m) a_m b_{-m}.
pub fn cocycle(x: &VectorField, y: &VectorField, c: f64) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (m, a) in x.modes() {
        let w = (m as f64).powi(3) - m as f64;
        if w != 0.0 {
            s += a * y.get(-m) * w;
        }
    }
    s * (c / 12.0)
}

/// ‖X‖_t = Σ (1 + |m|)^t |a_m|.
pub fn field_norm(x: &VectorField, t: f64) -> f64 {
    x.modes().map(|(m, a)| (1.0 + m.abs() as f64).powf(t) * a.norm()).sum()
}

/// Samples of g with X = g(θ)∂_θ on the uniform grid θ_j = 2πj/G.
pub fn to_theta(x: &VectorField, grid: usize) -> Vec<C64> {
    (0..grid)
        .map(|j| -I * x.series(2.0 * PI * j as f64 / grid as f64))
        .collect()
}

/// min over the grid of −Re Σ a_n e^{inθ} = min Im g; ≥ 0 for inward fields.
pub fn inward_margin(x: &VectorField, grid: usize) -> f64 {
    let g = grid.max(4 * x.maxmode + 8);
    (0..g)
        .map(|j| -x.series(2.0 * PI * j as f64 / g as f64).re)
        .fold(f64::INFINITY, f64::min)
}

pub fn is_inward(x: &VectorField, grid: usize, tol: f64) -> bool {
    inward_margin(x, grid) >= -tol
}

/// μ_X = (c/24) ∫_0^{2π} (∂_θ √g)² dθ with g = Im of the θ-coefficient.
///
/// The integrand is evaluated as g_θ²/(4g) from exact derivatives of the
/// trigonometric polynomial. At nodes where g ≤ gridtol it takes the limit
/// g_θθ/2 at a double zero; the zero convention for ∂_θ√g only concerns
/// a null set and leaves the integral unchanged.
pub fn qei_bound(x: &VectorField, c: f64, grid: usize, gridtol: f64, tol: f64) -> Result<f64> {
    let g_pts = grid.max(4 * x.maxmode + 8);
    let mut sum = 0.0;
    let mut margin = f64::INFINITY;
    for j in 0..g_pts {
        let th = 2.0 * PI * j as f64 / g_pts as f64;
        let (mut g, mut g1, mut g2) = (0.0, 0.0, 0.0);
        for (n, a) in x.modes() {
            let e = a * C64::from_polar(1.0, n as f64 * th);
            let nf = n as f64;
            g -= e.re;
            g1 -= (e * I * nf).re;
            g2 += (e * nf * nf).re;
        }
        margin = margin.min(g);
        sum += if g > gridtol { g1 * g1 / (4.0 * g) } else { g2.max(0.0) / 2.0 };
    }
    if margin < -tol {
        return Err(Error::NotInward { margin, t: f64::NAN });
    }
    Ok(c / 24.0 * sum * 2.0 * PI / g_pts as f64)
}

/// ‖∂_θ² f‖_{L²(S¹)} for the θ-coefficient f = −i Σ a_n e^{inθ} (Parseval).
pub fn second_derivative_l2(x: &VectorField) -> f64 {
    (2.0 * PI * x.modes().map(|(n, a)| (n as f64).powi(4) * a.norm_sqr()).sum::<f64>()).sqrt()
}

/// π(X) = Σ a_n L_n as a dense matrix.
pub fn pi_field(x: &VectorField, module: &ModuleData) -> Result<CMat> {
    let support = x.support();
    if support > module.cutoff() {
        return Err(Error::ModeOutOfRange { mode: support, cutoff: module.cutoff() });
    }
    let d = module.dim();
    let mut m = CMat::zeros(d, d);
    for (n, a) in x.modes() {
        if a != C64::new(0.0, 0.0) {
            if let Some(op) = module.mode_op(n) {
                op.add_dense(a, &mut m);
            }
        }
    }
    Ok(m)
}

/// out += π(X)·y (or π(X)*·y) without forming the dense matrix.
pub fn apply_field(x: &VectorField, module: &ModuleData, y: &CMat, out: &mut CMat, adjoint: bool, scratch: &mut Vec<C64>) {
    for (n, a) in x.modes() {
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        if adjoint {
            module.apply_mode_adjoint(n, a.conj(), y, out, scratch);
        } else {
            module.apply_mode(n, a, y, out, scratch);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    Constant,
    /// Cubic Hermite with knot slopes from finite differences inside each
    /// piece between jumps.
    Cubic,
}

/// t ↦ X(t) on [0, 1], sampled at non-decreasing knots. A knot listed twice
/// marks a jump; evaluation is right-continuous. With `Constant`
/// interpolation X(t) = X(t_i) on [t_i, t_{i+1}).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldPath {
    knots: Vec<f64>,
    fields: Vec<VectorField>,
    interp: Interp,
    slopes: Vec<VectorField>,
}

impl FieldPath {
    pub fn new(knots: Vec<f64>, fields: Vec<VectorField>, interp: Interp) -> Result<Self> {
        if knots.len() != fields.len() || knots.len() < 2 {
            return Err(Error::Domain("a path needs at least two knots, one field per knot".into()));
        }
        if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
            return Err(Error::Domain("knots must start at 0 and end at 1".into()));
        }
        for w in knots.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::Domain("knots must be non-decreasing".into()));
            }
        }
        for w in knots.windows(3) {
            if w[0] == w[2] {
                return Err(Error::Domain("a knot may repeat at most once".into()));
            }
        }
        if knots[0] == knots[1] || knots[knots.len() - 2] == knots[knots.len() - 1] {
            return Err(Error::Domain("jumps at the end points are not allowed".into()));
        }
        let m = fields.iter().map(VectorField::maxmode).max().unwrap_or(0);
        let fields: Vec<VectorField> = fields.into_iter().map(|f| if f.maxmode() == m { f } else { f.resized(m) }).collect();
        let slopes = if interp == Interp::Cubic { knot_slopes(&knots, &fields) } else { Vec::new() };
        Ok(FieldPath { knots, fields, interp, slopes })
    }

    pub fn constant(x: VectorField) -> Self {
        FieldPath { knots: vec![0.0, 1.0], fields: vec![x.clone(), x], interp: Interp::Linear, slopes: Vec::new() }
    }

    pub fn zero() -> Self {
        FieldPath::constant(VectorField::zero(0))
    }

    pub fn from_fn(knots: Vec<f64>, interp: Interp, f: impl Fn(f64) -> VectorField) -> Result<Self> {
        let fields = knots.iter().map(|&t| f(t)).collect();
        FieldPath::new(knots, fields, interp)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn maxmode(&self) -> usize {
        self.fields.first().map(VectorField::maxmode).unwrap_or(0)
    }

    pub fn support(&self) -> usize {
        self.fields.iter().map(VectorField::support).max().unwrap_or(0)
    }

    /// Smooth pieces: knot index pairs (i, i+1) with t_i < t_{i+1}.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        (0..self.knots.len() - 1)
            .filter(|&i| self.knots[i] < self.knots[i + 1])
            .map(|i| (i, i + 1))
            .collect()
    }

    /// Distinct knots, i.e. the break points of the generator.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.knots.clone();
        b.dedup();
        b
    }

    /// X(t) using the data of segment `seg` (so a jump is resolved by side).
    pub fn eval_segment(&self, seg: usize, t: f64) -> VectorField {
        let (i, j) = self.segments()[seg];
        self.eval_pair(i, j, t)
    }

    fn eval_pair(&self, i: usize, j: usize, t: f64) -> VectorField {
        match self.interp {
            Interp::Constant => self.fields[i].clone(),
            Interp::Linear => {
                let (t0, t1) = (self.knots[i], self.knots[j]);
                let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                let m = self.maxmode() as i32;
                let mut out = VectorField::zero(m as usize);
                for n in -m..=m {
                    out.set(n, self.fields[i].get(n) * (1.0 - s) + self.fields[j].get(n) * s);
                }
                out
            }
            Interp::Cubic => {
                let (t0, t1) = (self.knots[i], self.knots[j]);
                let h = t1 - t0;
                let s = ((t - t0) / h).clamp(0.0, 1.0);
                let (s2, s3) = (s * s, s * s * s);
                let w = [2.0 * s3 - 3.0 * s2 + 1.0, (s3 - 2.0 * s2 + s) * h, -2.0 * s3 + 3.0 * s2, (s3 - s2) * h];
                let m = self.maxmode() as i32;
                let mut out = VectorField::zero(m as usize);
                for n in -m..=m {
                    let v = self.fields[i].get(n) * w[0] + self.slopes[i].get(n) * w[1] + self.fields[j].get(n) * w[2] + self.slopes[j].get(n) * w[3];
                    out.set(n, v);
                }
                out
            }
        }
    }

    /// Right-continuous evaluation.
    pub fn evaluate(&self, t: f64) -> VectorField {
        let segs = self.segments();
        let k = segs
            .iter()
            .position(|&(i, j)| t >= self.knots[i] && t < self.knots[j])
            .unwrap_or(segs.len() - 1);
        let (i, j) = segs[k];
        self.eval_pair(i, j, t)
    }

    /// t ↦ X(1−t)*, the path of the dagger element.
    pub fn dagger(&self) -> FieldPath {
        let n = self.knots.len();
        let knots: Vec<f64> = self.knots.iter().rev().map(|t| 1.0 - t).collect();
        let fields: Vec<VectorField> = match self.interp {
            Interp::Linear | Interp::Cubic => self.fields.iter().rev().map(VectorField::adjoint).collect(),
            Interp::Constant => (0..n)
                .map(|j| {
                    // new piece [1 − t_{n−1−j}, 1 − t_{n−2−j}) carries old piece n−2−j
                    let old = if j + 1 < n { n - 2 - j } else { n - 1 };
                    self.fields[old].adjoint()
                })
                .collect(),
        };
        let mut knots = knots;
        for t in knots.iter_mut() {
            if t.abs() < 1e-15 {
                *t = 0.0;
            }
        }
        let slopes = if self.interp == Interp::Cubic { knot_slopes(&knots, &fields) } else { Vec::new() };
        FieldPath { knots, fields, interp: self.interp, slopes }
    }

    /// The same path as a cubic one: every linear or constant segment becomes
    /// its own piece (interior knots doubled), where the cubic interpolant
    /// reproduces it exactly.
    pub fn to_cubic(&self) -> FieldPath {
        if self.interp == Interp::Cubic {
            return self.clone();
        }
        let mut knots = Vec::new();
        let mut fields = Vec::new();
        for (i, j) in self.segments() {
            let right = if self.interp == Interp::Constant { i } else { j };
            knots.extend([self.knots[i], self.knots[j]]);
            fields.extend([self.fields[i].clone(), self.fields[right].clone()]);
        }
        FieldPath::new(knots, fields, Interp::Cubic).expect("segments of a valid path")
    }

    /// `first` on [0, ½] then `second` on [½, 1], each time-compressed (fields
    /// doubled). Paths with different interpolation are joined as cubic ones.
    pub fn concat(first: &FieldPath, second: &FieldPath) -> Result<FieldPath> {
        if first.interp != second.interp {
            return FieldPath::concat(&first.to_cubic(), &second.to_cubic());
        }
        let two = C64::new(2.0, 0.0);
        let mut knots: Vec<f64> = first.knots.iter().map(|t| t / 2.0).collect();
        knots.extend(second.knots.iter().map(|t| 0.5 + t / 2.0));
        let mut fields: Vec<VectorField> = first.fields.iter().map(|f| f.scale(two)).collect();
        fields.extend(second.fields.iter().map(|f| f.scale(two)));
        FieldPath::new(knots, fields, first.interp)
    }

    /// Maps every field through `f`, keeping knots.
    pub fn map(&self, f: impl Fn(&VectorField) -> VectorField) -> FieldPath {
        let fields: Vec<VectorField> = self.fields.iter().map(f).collect();
        let m = fields.iter().map(VectorField::maxmode).max().unwrap_or(0);
        let fields: Vec<VectorField> = fields.into_iter().map(|x| x.resized(m)).collect();
        let slopes = if self.interp == Interp::Cubic { knot_slopes(&self.knots, &fields) } else { Vec::new() };
        FieldPath { knots: self.knots.clone(), fields, interp: self.interp, slopes }
    }

    /// Smallest inward margin with the time where it occurs. Linear and
    /// constant interpolation stay in the cone spanned by the knot fields;
    /// cubic pieces can overshoot, so they are also sampled inside.
    pub fn inward_margin(&self, grid: usize) -> (f64, f64) {
        let mut best = self
            .knots
            .iter()
            .zip(&self.fields)
            .map(|(&t, x)| (inward_margin(x, grid), t))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a });
        if self.interp == Interp::Cubic {
            for (seg, (i, j)) in self.segments().into_iter().enumerate() {
                for q in 1..CUBIC_CHECKS {
                    let t = self.knots[i] + (self.knots[j] - self.knots[i]) * q as f64 / CUBIC_CHECKS as f64;
                    let m = inward_margin(&self.eval_segment(seg, t), grid);
                    if m < best.0 {
                        best = (m, t);
                    }
                }
            }
        }
        best
    }

    pub fn check_inward(&self, grid: usize, tol: f64) -> Result<()> {
        let (margin, t) = self.inward_margin(grid);
        if margin < -tol {
            return Err(Error::NotInward { margin, t });
        }
        Ok(())
    }
}

const CUBIC_CHECKS: usize = 4;
const SLOPE_STENCIL: usize = 9;

/// d/dt of the coefficients at every knot, from up to nine knots of the
/// knot's piece (pieces end at repeated knots).
fn knot_slopes(knots: &[f64], fields: &[VectorField]) -> Vec<VectorField> {
    let m = fields[0].maxmode();
    let mut out = vec![VectorField::zero(m); knots.len()];
    let mut a = 0;
    while a < knots.len() {
        let mut b = a;
        while b + 1 < knots.len() && knots[b + 1] > knots[b] {
            b += 1;
        }
        let width = (b - a + 1).min(SLOPE_STENCIL);
        for i in a..=b {
            let lo = i.saturating_sub(width / 2).max(a).min(b + 1 - width);
            let w = crate::linalg::fornberg_weights(knots[i], &knots[lo..lo + width], 1);
            let mut d = VectorField::zero(m);
            for (k, wk) in w.iter().enumerate() {
                for (n, x) in fields[lo + k].modes() {
                    d.set(n, d.get(n) + x * *wk);
                }
            }
            out[i] = d;
        }
        a = b + 1;
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub modes: Vec<(i32, f64, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub knots: Vec<f64>,
    pub fields: Vec<FieldDoc>,
    #[serde(default = "default_interp")]
    pub interp: Interp,
}

fn default_interp() -> Interp {
    Interp::Linear
}

impl From<&VectorField> for FieldDoc {
    fn from(x: &VectorField) -> Self {
        FieldDoc { modes: x.modes().filter(|(_, a)| *a != C64::new(0.0, 0.0)).map(|(n, a)| (n, a.re, a.im)).collect() }
    }
}

impl From<&FieldDoc> for VectorField {
    fn from(d: &FieldDoc) -> Self {
        let modes: Vec<(i32, C64)> = d.modes.iter().map(|&(n, re, im)| (n, C64::new(re, im))).collect();
        VectorField::from_modes(&modes)
    }
}

impl FieldPath {
    pub fn to_doc(&self) -> PathDoc {
        PathDoc { knots: self.knots.clone(), fields: self.fields.iter().map(FieldDoc::from).collect(), interp: self.interp }
    }

    pub fn from_doc(doc: &PathDoc) -> Result<FieldPath> {
        FieldPath::new(doc.knots.clone(), doc.fields.iter().map(VectorField::from).collect(), doc.interp)
    }
}

impl VectorField {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FieldDoc::from(self)).expect("field serializes")
    }

    pub fn from_json(text: &str) -> Result<VectorField> {
        let doc: FieldDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Ok(VectorField::from(&doc))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::virmod::{ModuleParams, DEFAULT_NULLTOL};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn bracket_examples() {
        let b = witt_bracket(&VectorField::ell(1), &VectorField::ell(-1));
        assert_eq!(b.get(0), c(2.0, 0.0));
        assert_eq!(b.support(), 0);
        let b = witt_bracket(&VectorField::ell(2), &VectorField::ell(-1));
        assert_eq!(b.get(1), c(3.0, 0.0));
        let x = VectorField::from_modes(&[(1, c(0.3, 1.0)), (-2, c(2.0, 0.0))]);
        assert!(witt_bracket(&x, &x).is_zero());
    }

    #[test]
    fn cocycle_examples() {
        let cc = 1.7;
        assert!((cocycle(&VectorField::ell(2), &VectorField::ell(-2), cc) - c(cc / 2.0, 0.0)).norm() < 1e-15);
        assert_eq!(cocycle(&VectorField::ell(1), &VectorField::ell(-1), cc), c(0.0, 0.0));
        assert!((cocycle(&VectorField::ell(3), &VectorField::ell(-3), cc) - c(2.0 * cc, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn cubic_path_is_exact_on_cubics() {
        let f = |t: f64| VectorField::from_modes(&[(1, c(t * t * t - t, 0.5 * t)), (0, c(-1.0 - t * t, 0.0))]);
        let knots: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let p = FieldPath::from_fn(knots, Interp::Cubic, f).unwrap();
        for t in [0.0, 0.03, 0.37, 0.5, 0.91, 1.0] {
            let d = &p.evaluate(t) - &f(t);
            assert!(d.l1_norm() < 1e-12, "t = {t}: {}", d.l1_norm());
        }
        let d = p.dagger().dagger();
        assert!((&d.evaluate(0.37) - &f(0.37)).l1_norm() < 1e-12);
    }

    #[test]
    fn mixed_concat_goes_through_cubic() {
        let a = FieldPath::new(vec![0.0, 0.5, 1.0], vec![VectorField::ell(0), VectorField::ell(1), VectorField::ell(0)], Interp::Linear).unwrap();
        let b = FieldPath::new(vec![0.0, 1.0], vec![VectorField::ell(-1), VectorField::ell(0)], Interp::Constant).unwrap();
        let ac = a.to_cubic();
        for t in [0.1, 0.5, 0.77] {
            assert!((&ac.evaluate(t) - &a.evaluate(t)).l1_norm() < 1e-14);
        }
        let j = FieldPath::concat(&a, &b).unwrap();
        assert!((&j.evaluate(0.15) - &a.evaluate(0.3).scale(c(2.0, 0.0))).l1_norm() < 1e-14);
        assert!((&j.evaluate(0.8) - &b.evaluate(0.6).scale(c(2.0, 0.0))).l1_norm() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        assert!((field_norm(&VectorField::ell(1), 1.5) - 2f64.powf(1.5)).abs() < 1e-15);
        assert_eq!(field_norm(&VectorField::ell(0), 7.3), 1.0);
        let x = VectorField::from_modes(&[(2, c(1.0, 0.0)), (-2, c(1.0, 0.0))]);
        assert_eq!(field_norm(&x, 1.0), 6.0);
    }

    #[test]
    fn theta_examples() {
        for z in to_theta(&VectorField::ell(0), 16) {
            assert!((z - c(0.0, -1.0)).norm() < 1e-15);
        }
        for z in to_theta(&VectorField::ell(0).scale(I), 16) {
            assert!((z - c(1.0, 0.0)).norm() < 1e-15);
        }
        let x = VectorField::from_modes(&[(1, I), (-1, I)]);
        for (j, z) in to_theta(&x, 16).into_iter().enumerate() {
            let th = 2.0 * PI * j as f64 / 16.0;
            assert!((z - c(2.0 * th.cos(), 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn inward_examples() {
        assert!(is_inward(&VectorField::ell(0).scale(c(0.3f64.ln(), 0.0)), 64, 1e-10));
        assert!(is_inward(&VectorField::ell(0).scale(I), 64, 1e-10));
        assert!(!is_inward(&VectorField::ell(0), 64, 1e-10));
    }

    #[test]
    fn qei_examples() {
        let cc = 2.0;
        let rot = VectorField::ell(0).scale(c(-0.7, 0.2));
        assert!(qei_bound(&rot, cc, 512, 1e-12, 1e-10).unwrap().abs() < 1e-15);
        // Im g = 1 + cos θ
        let x = VectorField::from_modes(&[(0, c(-1.0, 0.0)), (1, c(-0.5, 0.0)), (-1, c(-0.5, 0.0))]);
        let mu = qei_bound(&x, cc, 512, 1e-12, 1e-10).unwrap();
        assert!((mu - cc * PI / 48.0).abs() < 1e-12 * mu);
        let mu_odd = qei_bound(&x, cc, 511, 1e-12, 1e-10).unwrap();
        assert!((mu_odd - cc * PI / 48.0).abs() < 1e-9 * mu);
        assert!(qei_bound(&VectorField::ell(0), cc, 64, 1e-12, 1e-10).is_err());
    }

    #[test]
    fn pi_field_examples() {
        let m = ModuleData::build(ModuleParams::new(2.0, 0.5, 4), DEFAULT_NULLTOL).unwrap();
        let p = pi_field(&VectorField::ell(0).scale(c(0.5f64.ln(), 0.0)), &m).unwrap();
        for (i, k) in m.levels().into_iter().enumerate() {
            assert!((p[(i, i)].re - 0.5f64.ln() * (0.5 + k as f64)).abs() < 1e-14);
        }
        let x = VectorField::from_modes(&[(1, c(0.2, 0.3)), (-2, c(-1.0, 0.5)), (0, c(0.0, 1.0))]);
        let lhs = pi_field(&x, &m).unwrap().adjoint();
        let rhs = pi_field(&x.adjoint(), &m).unwrap();
        assert!(crate::linalg::max_abs(&(lhs - rhs)) < 1e-14);
        assert!(matches!(pi_field(&VectorField::ell(5), &m), Err(Error::ModeOutOfRange { .. })));
    }

    #[test]
    fn path_dagger_is_involution() {
        let a = VectorField::from_modes(&[(0, c(-1.0, 0.3)), (2, c(0.1, 0.2))]);
        let b = VectorField::from_modes(&[(0, c(-0.5, 0.0)), (-1, c(0.1, -0.2))]);
        for interp in [Interp::Linear, Interp::Constant] {
            let p = FieldPath::new(vec![0.0, 0.25, 0.25, 1.0], vec![a.clone(), b.clone(), a.clone(), b.clone()], interp).unwrap();
            assert_eq!(p.dagger().dagger(), p);
            let d = p.dagger();
            for t in [0.1, 0.3, 0.8] {
                let lhs = d.evaluate(t);
                let rhs = p.evaluate(1.0 - t).adjoint();
                assert!((&lhs - &rhs).l1_norm() < 1e-14, "{interp:?} t={t}");
            }
        }
    }

    #[test]
    fn path_json_round_trip() {
        let p = FieldPath::from_fn(vec![0.0, 0.5, 1.0], Interp::Linear, |t| {
            VectorField::from_modes(&[(0, c(-1.0 - t, 0.0)), (1, c(t, 0.5))])
        })
        .unwrap();
        let text = serde_json::to_string(&p.to_doc()).unwrap();
        let back = FieldPath::from_doc(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
