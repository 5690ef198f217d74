use crate::error::{Error, Result};
use crate::field::{is_inward, inward_margin, FieldPath, Interp, VectorField};
use crate::linalg::{fornberg_weights, C64, I};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const DEFAULT_G: usize = 256;
pub const DEFAULT_K: usize = 64;
pub const DEFAULT_MAXMODE: usize = 16;

/// Samples h(θ_j, t_i) of a family of closed curves sweeping an annulus,
/// θ_j = 2πj/G. Stored from the outer boundary (t = 0) to the inner one
/// (t = 1); a repeated knot is a junction where h may be non-smooth in t.
#[derive(Clone, Debug, PartialEq)]
pub struct Framing {
    g: usize,
    knots: Vec<f64>,
    h: Vec<Vec<C64>>,
    pub sitting: [bool; 2],
}

#[derive(Clone, Debug)]
pub struct FramingOptions {
    pub maxmode: usize,
    /// Largest allowed ℓ¹ mass above `maxmode`, relative to the total.
    pub tail_tol: f64,
    pub inward_tol: f64,
    pub min_h_theta: f64,
}

impl Default for FramingOptions {
    fn default() -> Self {
        FramingOptions { maxmode: DEFAULT_MAXMODE, tail_tol: 1e-8, inward_tol: 1e-10, min_h_theta: 1e-8 }
    }
}

impl FramingOptions {
    pub fn with_maxmode(maxmode: usize) -> Self {
        FramingOptions { maxmode, ..Default::default() }
    }
}

pub fn theta_grid(g: usize) -> Vec<f64> {
    (0..g).map(|j| 2.0 * PI * j as f64 / g as f64).collect()
}

pub fn uniform_knots(k: usize) -> Vec<f64> {
    (0..=k).map(|i| i as f64 / k as f64).collect()
}

pub(crate) fn check_knots(knots: &[f64]) -> Result<()> {
    if knots.len() < 2 || knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
        return Err(Error::Domain("time knots must run from 0 to 1".into()));
    }
    if knots.windows(2).any(|w| !(w[1] >= w[0])) || knots.windows(3).any(|w| w[0] == w[2]) {
        return Err(Error::Domain("time knots must be non-decreasing with at most double repeats".into()));
    }
    Ok(())
}

impl Framing {
    pub fn new(g: usize, knots: Vec<f64>, h: Vec<Vec<C64>>) -> Result<Self> {
        check_knots(&knots)?;
        if g < 8 || h.len() != knots.len() || h.iter().any(|row| row.len() != g) {
            return Err(Error::Domain(format!("framing grid must be {} curves of {g} samples (G ≥ 8)", knots.len())));
        }
        if h.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("framing samples"));
        }
        Ok(Framing { g, knots, h, sitting: [false, false] })
    }

    pub fn from_fn(g: usize, knots: Vec<f64>, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let th = theta_grid(g);
        let h = knots.iter().map(|&t| th.iter().map(|&x| f(x, t)).collect()).collect();
        Framing::new(g, knots, h)
    }

    /// h(θ, t) = (1 − t)·outer(θ) + t·inner(θ).
    pub fn radial(outer: &[C64], inner: &[C64], k: usize) -> Result<Self> {
        if outer.len() != inner.len() {
            return Err(Error::Domain("boundary curves need the same θ-grid".into()));
        }
        let knots = uniform_knots(k);
        let h = knots
            .iter()
            .map(|&t| outer.iter().zip(inner).map(|(a, b)| a * (1.0 - t) + b * t).collect())
            .collect();
        Framing::new(outer.len(), knots, h)
    }

    /// The trivial framing e^{iθ} of the identity annulus.
    pub fn identity(g: usize) -> Self {
        Framing::from_fn(g, vec![0.0, 0.5, 1.0], |th, _| C64::from_polar(1.0, th)).unwrap()
    }

    pub fn grid(&self) -> usize {
        self.g
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn curve(&self, i: usize) -> &[C64] {
        &self.h[i]
    }

    pub fn curves(&self) -> &[Vec<C64>] {
        &self.h
    }

    pub fn outer(&self) -> &[C64] {
        &self.h[0]
    }

    pub fn inner(&self) -> &[C64] {
        self.h.last().unwrap()
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Framing {
        Framing {
            g: self.g,
            knots: self.knots.clone(),
            h: self.h.iter().map(|row| row.iter().map(|&z| f(z)).collect()).collect(),
            sitting: self.sitting,
        }
    }

    /// Ranges of knot indices [a, b] over which h is smooth in t.
    pub fn pieces(&self) -> Vec<(usize, usize)> {
        pieces_of(&self.knots)
    }

    /// ∂_t h at every sample: finite differences of up to 8th order inside each piece.
    pub fn time_derivative(&self) -> Vec<Vec<C64>> {
        time_derivative(&self.knots, &self.h)
    }

    pub fn theta_derivative(&self) -> Vec<Vec<C64>> {
        let sp = Spectral::new(self.g);
        self.h.iter().map(|row| sp.derivative(row)).collect()
    }
}

pub(crate) fn pieces_of(knots: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut a = 0;
    for i in 0..knots.len() - 1 {
        if knots[i + 1] == knots[i] {
            out.push((a, i));
            a = i + 1;
        }
    }
    out.push((a, knots.len() - 1));
    out
}

const STENCIL: usize = 9;

/// d/dx of samples y[i] at each knot, using up to 9 points of its smooth piece.
pub(crate) fn time_derivative(knots: &[f64], y: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let g = y[0].len();
    let mut out = vec![vec![C64::new(0.0, 0.0); g]; knots.len()];
    for (a, b) in pieces_of(knots) {
        let n = b - a + 1;
        let width = n.min(STENCIL);
        for i in a..=b {
            let lo = (i.saturating_sub(width / 2)).max(a).min(b + 1 - width);
            let xs = &knots[lo..lo + width];
            let w = fornberg_weights(knots[i], xs, 1);
            for (k, wk) in w.iter().enumerate() {
                if *wk != 0.0 {
                    for j in 0..g {
                        out[i][j] += y[lo + k][j] * *wk;
                    }
                }
            }
        }
    }
    out
}

pub(crate) struct Spectral {
    g: usize,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Spectral {
    pub fn new(g: usize) -> Self {
        let mut p = FftPlanner::new();
        Spectral { g, fwd: p.plan_fft_forward(g), inv: p.plan_fft_inverse(g) }
    }

    fn wavenumber(&self, k: usize) -> f64 {
        let g = self.g;
        if 2 * k == g {
            0.0
        } else if k < g / 2 + g % 2 {
            k as f64
        } else {
            k as f64 - g as f64
        }
    }

    /// Fourier coefficients c_k with f(θ_j) = Σ c_k e^{ikθ_j}, index k mod G.
    pub fn coefficients(&self, f: &[C64]) -> Vec<C64> {
        let mut buf = f.to_vec();
        self.fwd.process(&mut buf);
        let s = 1.0 / self.g as f64;
        buf.iter_mut().for_each(|z| *z *= s);
        buf
    }

    pub fn derivative(&self, f: &[C64]) -> Vec<C64> {
        let mut c = self.coefficients(f);
        for (k, z) in c.iter_mut().enumerate() {
            *z *= I * self.wavenumber(k);
        }
        self.inv.process(&mut c);
        c
    }

    /// ℓ-coefficients a_n (|n| ≤ m) of a sampled series Σ a_n e^{inθ} and the
    /// ℓ¹ mass of the remaining coefficients.
    pub fn to_field(&self, f: &[C64], m: usize) -> (VectorField, f64, f64) {
        let c = self.coefficients(f);
        let mut x = VectorField::zero(m);
        let mut tail = 0.0;
        let mut total = 0.0;
        for (k, z) in c.iter().enumerate() {
            let n = self.wavenumber(k);
            total += z.norm();
            if 2 * k == self.g {
                tail += z.norm();
            } else if n.abs() as usize <= m {
                x.set(n as i32, *z);
            } else {
                tail += z.norm();
            }
        }
        (x, tail, total)
    }
}

/// Generator fields at every knot, in stored order: Σ a_n e^{inθ} = i·h_t/h_θ.
pub struct Extraction {
    pub fields: Vec<VectorField>,
    /// Largest relative tail mass over knots.
    pub tail: f64,
    pub min_h_theta: f64,
}

const TAIL_FLOOR: f64 = 1e-12;

pub(crate) fn series_to_fields(knots_series: &[Vec<C64>], sp: &Spectral, opts: &FramingOptions) -> Result<(Vec<VectorField>, f64)> {
    let mut fields = Vec::with_capacity(knots_series.len());
    let mut worst = 0.0f64;
    for f in knots_series {
        let (x, tail, total) = sp.to_field(f, opts.maxmode);
        // roundoff in h_t (e.g. where the framing is stationary) is not overflow
        let rel = if tail > TAIL_FLOOR * f.len() as f64 { tail / total } else { 0.0 };
        worst = worst.max(rel);
        if rel > opts.tail_tol {
            return Err(Error::ModeOverflow { tail: rel, allowed: opts.tail_tol });
        }
        fields.push(x);
    }
    Ok((fields, worst))
}

pub fn extract_fields(f: &Framing, opts: &FramingOptions) -> Result<Extraction> {
    let sp = Spectral::new(f.g);
    let ht = f.time_derivative();
    let hth = f.theta_derivative();
    let min_h_theta = hth.iter().flatten().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if min_h_theta < opts.min_h_theta {
        return Err(Error::DegenerateFraming { min_h_theta });
    }
    let series: Vec<Vec<C64>> = ht.iter().zip(&hth).map(|(a, b)| a.iter().zip(b).map(|(x, y)| I * x / y).collect()).collect();
    let (fields, tail) = series_to_fields(&series, &sp, opts)?;
    Ok(Extraction { fields, tail, min_h_theta })
}

/// The generator path s ↦ X(s) of a framing: path time s runs from the inner
/// boundary (stored t = 1) to the outer one, X(s) is read at t = 1 − s.
pub fn framing_path(f: &Framing, opts: &FramingOptions) -> Result<(FieldPath, f64)> {
    let ex = extract_fields(f, opts)?;
    let n = f.knots.len();
    let knots: Vec<f64> = f.knots.iter().rev().map(|t| if *t == 1.0 { 0.0 } else { 1.0 - t }).collect();
    let fields: Vec<VectorField> = ex.fields.into_iter().rev().collect();
    for (i, x) in fields.iter().enumerate() {
        if !is_inward(x, 4 * f.g, opts.inward_tol) {
            return Err(Error::NotInward { margin: inward_margin(x, 4 * f.g), t: knots[i] });
        }
    }
    debug_assert_eq!(fields.len(), n);
    Ok((FieldPath::new(knots, fields, Interp::Cubic)?, ex.tail))
}

/// Winding number of a closed sampled curve about p.
pub fn winding_number(curve: &[C64], p: C64) -> f64 {
    let n = curve.len();
    let mut total = 0.0;
    for j in 0..n {
        let a = curve[j] - p;
        let b = curve[(j + 1) % n] - p;
        total += (b / a).arg();
    }
    total / (2.0 * PI)
}

#[derive(Clone, Debug, Serialize)]
pub struct FramingDiagnostics {
    pub min_h_theta: f64,
    pub min_jacobian: f64,
    pub winding_outer: f64,
    pub winding_inner: f64,
    /// Smallest inward margin of the extracted fields; NaN when extraction failed.
    pub inward_margin: f64,
    pub tail: f64,
    pub degenerate: bool,
    pub orientation_ok: bool,
    pub problems: Vec<String>,
}

impl FramingDiagnostics {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

pub fn validate_framing(f: &Framing, tol: f64, opts: &FramingOptions) -> FramingDiagnostics {
    let ht = f.time_derivative();
    let hth = f.theta_derivative();
    let min_h_theta = hth.iter().flatten().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let min_jacobian = ht
        .iter()
        .flatten()
        .zip(hth.iter().flatten())
        .map(|(t, th)| (th.conj() * t).im)
        .fold(f64::INFINITY, f64::min);
    let centre = f.inner().iter().sum::<C64>() / f.g as f64;
    let winding_outer = winding_number(f.outer(), centre);
    let winding_inner = winding_number(f.inner(), centre);
    let mut problems = Vec::new();
    let degenerate = min_h_theta < opts.min_h_theta;
    if degenerate {
        problems.push(format!("min |h_θ| = {min_h_theta:.3e} below {:.1e}", opts.min_h_theta));
    }
    let orientation_ok = min_jacobian >= -tol;
    if !orientation_ok {
        problems.push(format!("negative Jacobian {min_jacobian:.3e}"));
    }
    for (name, w) in [("outer", winding_outer), ("inner", winding_inner)] {
        if (w - 1.0).abs() > 1e-6 {
            problems.push(format!("{name} winding number {w:.3}"));
        }
    }
    let (inward_margin, tail) = match extract_fields(f, &FramingOptions { tail_tol: f64::INFINITY, ..opts.clone() }) {
        Ok(ex) => (ex.fields.iter().map(|x| crate::field::inward_margin(x, 4 * f.g)).fold(f64::INFINITY, f64::min), ex.tail),
        Err(_) => (f64::NAN, f64::NAN),
    };
    if inward_margin.is_nan() || inward_margin < -tol {
        problems.push(format!("inward margin {inward_margin:.3e}"));
    }
    if tail > opts.tail_tol {
        problems.push(format!("mode tail {tail:.3e} above {:.1e}", opts.tail_tol));
    }
    FramingDiagnostics { min_h_theta, min_jacobian, winding_outer, winding_inner, inward_margin, tail, degenerate, orientation_ok, problems }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramingDoc {
    #[serde(rename = "G")]
    pub g: usize,
    pub knots: Vec<f64>,
    pub h: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<[f64; 2]>,
}

impl Framing {
    pub fn to_doc(&self) -> FramingDoc {
        FramingDoc {
            g: self.g,
            knots: self.knots.clone(),
            h: self.h.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect(),
            z: None,
        }
    }

    pub fn from_doc(doc: &FramingDoc) -> Result<Framing> {
        let h = doc.h.iter().map(|row| row.iter().map(|p| C64::new(p[0], p[1])).collect()).collect();
        Framing::new(doc.g, doc.knots.clone(), h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn standard_framing_gives_log_r() {
        let r: f64 = 0.3;
        let f = Framing::from_fn(64, uniform_knots(32), |th, t| C64::from_polar(r.powf(t), th)).unwrap();
        let (p, tail) = framing_path(&f, &FramingOptions::with_maxmode(4)).unwrap();
        assert!(tail < 1e-12);
        for x in p.fields() {
            assert!((x.get(0) - c(r.ln(), 0.0)).norm() < 1e-11, "{:?}", x.get(0));
            assert!((x - &VectorField::ell(0).scale(c(r.ln(), 0.0))).l1_norm() < 1e-11);
        }
    }

    #[test]
    fn constant_and_rotating_framings() {
        let f = Framing::from_fn(32, uniform_knots(8), |th, _| C64::from_polar(1.0, th)).unwrap();
        let (p, _) = framing_path(&f, &FramingOptions::default()).unwrap();
        assert!(p.fields().iter().all(|x| x.l1_norm() < 1e-12));
        let alpha = 0.7;
        let f = Framing::from_fn(32, uniform_knots(16), |th, t| C64::from_polar(1.0, th + alpha * t)).unwrap();
        let (p, _) = framing_path(&f, &FramingOptions::default()).unwrap();
        for x in p.fields() {
            assert!((x.get(0) - c(0.0, alpha)).norm() < 1e-10);
        }
    }

    #[test]
    fn path_runs_inner_to_outer() {
        // r(t) = 0.5^{t²}: d/dt ln r = 2t ln 0.5, path time s = 1 − t
        let f = Framing::from_fn(32, uniform_knots(40), |th, t| C64::from_polar(0.5f64.powf(t * t), th)).unwrap();
        let (p, _) = framing_path(&f, &FramingOptions::default()).unwrap();
        for s in [0.0, 0.25, 1.0] {
            let x = p.evaluate(s);
            assert!((x.get(0).re - 2.0 * (1.0 - s) * 0.5f64.ln()).abs() < 1e-9, "s={s}");
        }
    }

    #[test]
    fn outward_framing_is_rejected_and_flagged() {
        let f = Framing::from_fn(32, uniform_knots(8), |th, t| C64::from_polar(0.5f64.powf(1.0 - t), th)).unwrap();
        assert!(matches!(framing_path(&f, &FramingOptions::default()), Err(Error::NotInward { .. })));
        let d = validate_framing(&f, 1e-10, &FramingOptions::default());
        assert!(!d.orientation_ok && !d.ok());
        let good = Framing::from_fn(32, uniform_knots(8), |th, t| C64::from_polar(0.5f64.powf(t), th)).unwrap();
        let d = validate_framing(&good, 1e-10, &FramingOptions::default());
        assert!(d.ok(), "{:?}", d.problems);
        assert!(d.min_jacobian > 0.0 && d.inward_margin > 0.0);
        assert!((d.winding_outer - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinched_curve_is_flagged() {
        let mut f = Framing::from_fn(32, uniform_knots(4), |th, t| C64::from_polar(0.5f64.powf(t), th)).unwrap();
        let v = f.h[2][5];
        f.h[2][6] = v;
        f.h[2][7] = v;
        let d = validate_framing(&f, 1e-10, &FramingOptions { min_h_theta: 0.5, ..Default::default() });
        assert!(d.degenerate);
    }

    #[test]
    fn spectral_derivative_is_exact_for_trig_polynomials() {
        let sp = Spectral::new(16);
        let th = theta_grid(16);
        let f: Vec<C64> = th.iter().map(|&x| c((3.0 * x).cos(), (2.0 * x).sin())).collect();
        let d = sp.derivative(&f);
        for (j, &x) in th.iter().enumerate() {
            assert!((d[j] - c(-3.0 * (3.0 * x).sin(), 2.0 * (2.0 * x).cos())).norm() < 1e-13);
        }
    }

    #[test]
    fn pieces_split_at_repeated_knots() {
        assert_eq!(pieces_of(&[0.0, 0.5, 0.5, 1.0]), vec![(0, 1), (2, 3)]);
        assert_eq!(pieces_of(&[0.0, 1.0]), vec![(0, 1)]);
    }
}
