use super::framing::{theta_grid, Framing};
use super::compose_framings;
use crate::error::{Error, Result};
use crate::linalg::C64;
use std::f64::consts::PI;

/// Closed arc of S¹ from `start` counterclockwise to `end` (radians).
#[derive(Clone, Copy, Debug)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn new(start: f64, end: f64) -> Self {
        Arc { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).rem_euclid(2.0 * PI)
    }

    pub fn contains(&self, th: f64) -> bool {
        (th - self.start).rem_euclid(2.0 * PI) <= self.length()
    }

    /// Circular distance from θ to the arc (0 inside).
    pub fn distance(&self, th: f64) -> f64 {
        if self.contains(th) {
            return 0.0;
        }
        let a = (self.start - th).rem_euclid(2.0 * PI);
        let b = (th - self.end).rem_euclid(2.0 * PI);
        a.min(b)
    }

    /// S¹ minus the interior of the arc.
    pub fn complement(&self) -> Arc {
        Arc { start: self.end, end: self.start }
    }
}

fn smooth_step(x: f64) -> f64 {
    // 1 at x ≤ 0, 0 at x ≥ 1, C^∞ in between
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    if x <= 0.0 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else {
        f(1.0 - x) / (f(1.0 - x) + f(x))
    }
}

/// Reference data for factorizing annuli near A₀ into two bigons.
#[derive(Clone, Debug)]
pub struct BigonSetup {
    pub ref_in: Vec<C64>,
    pub ref_out: Vec<C64>,
    pub delta: Vec<C64>,
    pub lambda_minus: Vec<f64>,
    pub lambda_plus: Vec<f64>,
}

impl BigonSetup {
    /// A₀ = {r ≤ |z| ≤ 1}, δ the circle of radius √r, λ₋ ≡ 1 off I₂ and
    /// λ₊ ≡ 1 off I₁, with smooth transitions inside the overlaps.
    pub fn round(r: f64, g: usize, i1: Arc, i2: Arc) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::Domain(format!("reference radius must lie in (0, 1), got {r}")));
        }
        let th = theta_grid(g);
        let (c1, c2) = (i1.complement(), i2.complement());
        let disjoint = !c1.contains(c2.start) && !c2.contains(c1.start);
        if !disjoint || i1.length() >= 2.0 * PI || i2.length() >= 2.0 * PI {
            return Err(Error::Domain("the interiors of I₁ and I₂ must cover the circle".into()));
        }
        let w = 0.5 * c1.start_gap(&c2);
        Ok(BigonSetup {
            ref_in: th.iter().map(|&x| C64::from_polar(r, x)).collect(),
            ref_out: th.iter().map(|&x| C64::from_polar(1.0, x)).collect(),
            delta: th.iter().map(|&x| C64::from_polar(r.sqrt(), x)).collect(),
            lambda_minus: th.iter().map(|&x| smooth_step(c2.distance(x) / w)).collect(),
            lambda_plus: th.iter().map(|&x| smooth_step(c1.distance(x) / w)).collect(),
        })
    }

    pub fn with_delta(mut self, delta: Vec<C64>) -> Self {
        self.delta = delta;
        self
    }

    /// δ_A = λ₋(γ_in + δ − γ⁰_in) + λ₊(γ_out + δ − γ⁰_out) + λ∘ δ.
    pub fn delta_for(&self, gamma_in: &[C64], gamma_out: &[C64]) -> Vec<C64> {
        (0..self.delta.len())
            .map(|j| {
                let (lm, lp) = (self.lambda_minus[j], self.lambda_plus[j]);
                let lo = 1.0 - lm - lp;
                (gamma_in[j] + self.delta[j] - self.ref_in[j]) * lm + (gamma_out[j] + self.delta[j] - self.ref_out[j]) * lp + self.delta[j] * lo
            })
            .collect()
    }
}

impl Arc {
    fn start_gap(&self, other: &Arc) -> f64 {
        // circular distance between two disjoint arcs
        let d1 = (other.start - self.end).rem_euclid(2.0 * PI);
        let d2 = (self.start - other.end).rem_euclid(2.0 * PI);
        d1.min(d2)
    }
}

fn distance_to_polygon(curve: &[C64], p: C64) -> f64 {
    let n = curve.len();
    let mut best = f64::INFINITY;
    for j in 0..n {
        let a = curve[j];
        let b = curve[(j + 1) % n];
        let ab = b - a;
        let len2 = ab.norm_sqr();
        let s = if len2 > 0.0 { ((p - a) * ab.conj()).re / len2 } else { 0.0 };
        best = best.min((p - (a + ab * s.clamp(0.0, 1.0))).norm());
    }
    best
}

/// Signed margin for `inner ≤ outer`: minimum over sample points of the
/// distance to the other curve, negative where a point is on the wrong side.
pub fn nesting_margin(inner: &[C64], outer: &[C64]) -> f64 {
    let mut m = f64::INFINITY;
    for &p in inner {
        let d = distance_to_polygon(outer, p);
        let inside = super::winding_number(outer, p).round() == 1.0;
        m = m.min(if inside || d < 1e-12 { d } else { -d });
    }
    for &p in outer {
        let d = distance_to_polygon(inner, p);
        let outside = super::winding_number(inner, p).round() == 0.0;
        m = m.min(if outside || d < 1e-12 { d } else { -d });
    }
    m
}

pub struct BigonFactors {
    pub delta_a: Vec<C64>,
    /// (δ_A, γ_out), the factor in Bigon(I₁).
    pub outer: Framing,
    /// (γ_in, δ_A), the factor in Bigon(I₂).
    pub inner: Framing,
    pub margin: f64,
}

impl BigonFactors {
    /// The composite framing outer ∘ inner.
    pub fn recompose(&self, tol: f64) -> Result<Framing> {
        compose_framings(&self.outer, &self.inner, tol)
    }

    /// sup-norm distance between the recomposed boundary curves and the input.
    pub fn curve_residual(&self, gamma_in: &[C64], gamma_out: &[C64], tol: f64) -> Result<f64> {
        let f = self.recompose(tol)?;
        let sup = |a: &[C64], b: &[C64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        Ok(sup(f.outer(), gamma_out).max(sup(f.inner(), gamma_in)))
    }
}

/// Splits the annulus between γ_in and γ_out along δ_A into two factors with
/// radial framings (k time steps each).
pub fn bigon_factor(gamma_in: &[C64], gamma_out: &[C64], setup: &BigonSetup, k: usize, tol: f64) -> Result<BigonFactors> {
    let g = setup.delta.len();
    if gamma_in.len() != g || gamma_out.len() != g {
        return Err(Error::Domain("curves must be sampled on the setup's θ-grid".into()));
    }
    let delta_a = setup.delta_for(gamma_in, gamma_out);
    let margin = nesting_margin(gamma_in, &delta_a).min(nesting_margin(&delta_a, gamma_out));
    if margin < -tol {
        return Err(Error::NotNested { margin });
    }
    Ok(BigonFactors {
        outer: Framing::radial(gamma_out, &delta_a, k)?,
        inner: Framing::radial(&delta_a, gamma_in, k)?,
        delta_a,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arcs() -> (Arc, Arc) {
        (Arc::new(0.3, PI + 0.8), Arc::new(PI - 0.2, 2.0 * PI + 1.0))
    }

    #[test]
    fn partition_of_unity() {
        let (i1, i2) = arcs();
        let s = BigonSetup::round(0.25, 128, i1, i2).unwrap();
        for j in 0..128 {
            let (a, b) = (s.lambda_minus[j], s.lambda_plus[j]);
            assert!(a >= 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-15);
            assert!(a * b == 0.0);
        }
        assert!(BigonSetup::round(0.25, 128, Arc::new(0.0, 1.0), Arc::new(2.0, 3.0)).is_err());
    }

    #[test]
    fn round_annulus_factors_into_round_pieces() {
        let (i1, i2) = arcs();
        let r = 0.25;
        let s = BigonSetup::round(r, 128, i1, i2).unwrap();
        let th = theta_grid(128);
        let gin: Vec<C64> = th.iter().map(|&x| C64::from_polar(r, x)).collect();
        let gout: Vec<C64> = th.iter().map(|&x| C64::from_polar(1.0, x)).collect();
        let f = bigon_factor(&gin, &gout, &s, 16, 1e-10).unwrap();
        for z in &f.delta_a {
            assert!((z.norm() - 0.5).abs() < 1e-15);
        }
        assert!(f.curve_residual(&gin, &gout, 1e-8).unwrap() < 1e-12);
    }

    #[test]
    fn nesting_failure_is_reported() {
        let (i1, i2) = arcs();
        let s = BigonSetup::round(0.25, 128, i1, i2).unwrap();
        let th = theta_grid(128);
        // bulge of γ_in past δ where λ₋ vanishes
        let gin: Vec<C64> = th.iter().map(|&x| C64::from_polar(0.25 + 0.4 * (-((x - 5.1) / 0.3).powi(2)).exp(), x)).collect();
        let gout: Vec<C64> = th.iter().map(|&x| C64::from_polar(1.0, x)).collect();
        assert!(matches!(bigon_factor(&gin, &gout, &s, 16, 1e-10), Err(Error::NotNested { .. })));
    }
}
