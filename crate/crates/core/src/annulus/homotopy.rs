use super::framing::{check_knots, series_to_fields, time_derivative, Framing, FramingOptions, Spectral};
use crate::error::{Error, Result};
use crate::field::{cocycle, witt_bracket, VectorField};
use crate::linalg::{sample_weights, C64, I};

/// h(θ_j, t_i; u_l): a one-parameter family of framings of one annulus.
#[derive(Clone, Debug)]
pub struct FramingHomotopy {
    g: usize,
    t_knots: Vec<f64>,
    u_knots: Vec<f64>,
    h: Vec<Vec<Vec<C64>>>,
}

impl FramingHomotopy {
    pub fn new(g: usize, t_knots: Vec<f64>, u_knots: Vec<f64>, h: Vec<Vec<Vec<C64>>>) -> Result<Self> {
        check_knots(&t_knots)?;
        check_knots(&u_knots)?;
        if t_knots.windows(2).any(|w| w[0] == w[1]) || u_knots.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("homotopy knots must be strictly increasing".into()));
        }
        if h.len() != u_knots.len() || h.iter().any(|s| s.len() != t_knots.len() || s.iter().any(|r| r.len() != g)) {
            return Err(Error::Domain("homotopy grid has the wrong shape".into()));
        }
        Ok(FramingHomotopy { g, t_knots, u_knots, h })
    }

    pub fn from_fn(g: usize, t_knots: Vec<f64>, u_knots: Vec<f64>, f: impl Fn(f64, f64, f64) -> C64) -> Result<Self> {
        let th = super::theta_grid(g);
        let h = u_knots
            .iter()
            .map(|&u| t_knots.iter().map(|&t| th.iter().map(|&x| f(x, t, u)).collect()).collect())
            .collect();
        FramingHomotopy::new(g, t_knots, u_knots, h)
    }

    pub fn slice(&self, l: usize) -> Framing {
        Framing::new(self.g, self.t_knots.clone(), self.h[l].clone()).expect("validated grid")
    }

    pub fn first(&self) -> Framing {
        self.slice(0)
    }

    pub fn last(&self) -> Framing {
        self.slice(self.u_knots.len() - 1)
    }

    pub fn t_knots(&self) -> &[f64] {
        &self.t_knots
    }

    pub fn u_knots(&self) -> &[f64] {
        &self.u_knots
    }
}

/// Framings h(θ, t) = Φ_t(e^{iθ}) with Φ_t(z)^p = ρ_t·e^{iα_t}(z^p − b_t)/(1 − b̄_t z^p),
/// a path in the Möbius group acting on z^p. Their generator fields lie in
/// span{ℓ₋ₚ, ℓ₀, ℓₚ}, which is closed under the bracket, so a homotopy of
/// such framings has X and Y with modes in {−p, 0, p} exactly.
///
/// ρ_t = r^{t + uδ sin πt}, b_t = t·b₁ + uβ sin πt, α_t = t·α₁ + uγ sin πt:
/// the end maps do not depend on u.
#[derive(Clone, Copy, Debug)]
pub struct MobiusFamily {
    pub power: u32,
    pub r: f64,
    pub b1: C64,
    pub alpha1: f64,
    pub beta: C64,
    pub gamma: f64,
    pub delta: f64,
}

impl MobiusFamily {
    pub fn eval(&self, th: f64, t: f64, u: f64) -> C64 {
        let bump = (std::f64::consts::PI * t).sin();
        let rho = self.r.powf(t + u * self.delta * bump);
        let b = self.b1 * t + self.beta * (u * bump);
        let alpha = self.alpha1 * t + self.gamma * u * bump;
        let p = self.power as f64;
        let lift = (C64::new(1.0, 0.0) - b * C64::from_polar(1.0, -p * th)).ln().im;
        C64::from_polar(rho.powf(1.0 / p), (alpha + 2.0 * lift) / p + th)
    }

    /// The same end framings with the u-deformation (β, γ, δ) scaled by s.
    pub fn with_deformation(&self, s: f64) -> MobiusFamily {
        MobiusFamily { beta: self.beta * s, gamma: self.gamma * s, delta: self.delta * s, ..*self }
    }

    pub fn homotopy(&self, g: usize, k: usize, l: usize) -> Result<FramingHomotopy> {
        let f = *self;
        FramingHomotopy::from_fn(g, super::uniform_knots(k), super::uniform_knots(l), move |th, t, u| f.eval(th, t, u))
    }

    /// The framing at a fixed u.
    pub fn framing(&self, g: usize, k: usize, u: f64) -> Result<Framing> {
        let f = *self;
        Framing::from_fn(g, super::uniform_knots(k), move |th, t| f.eval(th, t, u))
    }
}

/// Generator fields of a homotopy on the (u, t) grid, stored t order:
/// X from i·h_t/h_θ as in framing_path and Y from −i·h_u/h_θ, so that in path
/// time s = 1 − t both are the fields −∂h/h_θ.
pub struct HomotopyFields {
    pub x: Vec<Vec<VectorField>>,
    pub y: Vec<Vec<VectorField>>,
    pub tail: f64,
}

pub fn homotopy_fields(hm: &FramingHomotopy, opts: &FramingOptions) -> Result<HomotopyFields> {
    let sp = Spectral::new(hm.g);
    let nt = hm.t_knots.len();
    let mut hu = vec![Vec::with_capacity(nt); hm.u_knots.len()];
    for i in 0..nt {
        let rows: Vec<Vec<C64>> = hm.h.iter().map(|s| s[i].clone()).collect();
        for (l, d) in time_derivative(&hm.u_knots, &rows).into_iter().enumerate() {
            hu[l].push(d);
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut tail = 0.0f64;
    for (l, slice) in hm.h.iter().enumerate() {
        let ht = time_derivative(&hm.t_knots, slice);
        let hth: Vec<Vec<C64>> = slice.iter().map(|row| sp.derivative(row)).collect();
        let min_h_theta = hth.iter().flatten().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        if min_h_theta < opts.min_h_theta {
            return Err(Error::DegenerateFraming { min_h_theta });
        }
        let sx: Vec<Vec<C64>> = ht.iter().zip(&hth).map(|(a, b)| a.iter().zip(b).map(|(p, q)| I * p / q).collect()).collect();
        let sy: Vec<Vec<C64>> = hu[l].iter().zip(&hth).map(|(a, b)| a.iter().zip(b).map(|(p, q)| -I * p / q).collect()).collect();
        let (fx, tx) = series_to_fields(&sx, &sp, opts)?;
        let (fy, ty) = series_to_fields(&sy, &sp, opts)?;
        tail = tail.max(tx).max(ty);
        xs.push(fx);
        ys.push(fy);
    }
    Ok(HomotopyFields { x: xs, y: ys, tail })
}

/// E = ∬ ω(X, Y) dt du over the homotopy square; the framings at u = 0 and
/// u = 1 (with common boundary curves) then satisfy U₁ = e^{E}·U₀.
pub fn homotopy_cocycle(hm: &FramingHomotopy, c: f64, opts: &FramingOptions) -> Result<C64> {
    let f = homotopy_fields(hm, opts)?;
    let wt = sample_weights(&hm.t_knots);
    let wu = sample_weights(&hm.u_knots);
    let mut e = C64::new(0.0, 0.0);
    for (l, (xl, yl)) in f.x.iter().zip(&f.y).enumerate() {
        let inner: C64 = xl.iter().zip(yl).zip(&wt).map(|((x, y), w)| cocycle(x, y, c) * *w).sum();
        e += inner * wu[l];
    }
    Ok(e)
}

/// max over the grid of ‖∂_s Y − ∂_u X − [X, Y]‖₁ (s = 1 − t), relative to
/// the largest ‖[X, Y]‖₁.
pub fn witt_compatibility_residual(hm: &FramingHomotopy, opts: &FramingOptions) -> Result<f64> {
    let f = homotopy_fields(hm, opts)?;
    let m = opts.maxmode as i32;
    let coeffs = |x: &VectorField| -> Vec<C64> { (-m..=m).map(|n| x.get(n)).collect() };
    let dy_dt: Vec<Vec<Vec<C64>>> = f.y.iter().map(|yl| time_derivative(&hm.t_knots, &yl.iter().map(coeffs).collect::<Vec<_>>())).collect();
    let nt = hm.t_knots.len();
    let mut dx_du = vec![Vec::new(); hm.u_knots.len()];
    for i in 0..nt {
        let rows: Vec<Vec<C64>> = f.x.iter().map(|xl| coeffs(&xl[i])).collect();
        for (l, d) in time_derivative(&hm.u_knots, &rows).into_iter().enumerate() {
            dx_du[l].push(d);
        }
    }
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for l in 0..hm.u_knots.len() {
        for i in 0..nt {
            let b = witt_bracket(&f.x[l][i], &f.y[l][i]);
            scale = scale.max(b.l1_norm());
            let mut r = 0.0;
            for (k, n) in (-m..=m).enumerate() {
                r += (-dy_dt[l][i][k] - dx_du[l][i][k] - b.get(n)).norm();
            }
            worst = worst.max(r);
        }
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}
