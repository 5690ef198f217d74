//! Annuli with framings, their generator paths, composition and dagger.

mod bigon;
mod framing;
mod homotopy;

pub use bigon::{bigon_factor, nesting_margin, Arc, BigonFactors, BigonSetup};
pub use framing::{
    extract_fields, framing_path, theta_grid, uniform_knots, validate_framing, winding_number, Extraction, Framing, FramingDiagnostics, FramingDoc,
    FramingOptions, DEFAULT_G, DEFAULT_K, DEFAULT_MAXMODE,
};
pub use homotopy::{homotopy_cocycle, homotopy_fields, witt_compatibility_residual, FramingHomotopy, HomotopyFields, MobiusFamily};

use crate::error::{Error, Result};
use crate::field::{FieldPath, PathDoc};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};

pub const BOUNDARY_TOL: f64 = 1e-8;

/// z · (annulus with generator path X). The framing is kept when known.
#[derive(Clone, Debug)]
pub struct AnnulusElement {
    pub path: FieldPath,
    pub z: C64,
    pub framing: Option<Framing>,
}

impl AnnulusElement {
    pub fn from_framing(framing: Framing, z: C64, opts: &FramingOptions) -> Result<Self> {
        let (path, _) = framing_path(&framing, opts)?;
        Ok(AnnulusElement { path, z, framing: Some(framing) })
    }

    pub fn from_path(path: FieldPath, z: C64) -> Self {
        AnnulusElement { path, z, framing: None }
    }

    pub fn identity() -> Self {
        AnnulusElement { path: FieldPath::zero(), z: C64::new(1.0, 0.0), framing: Some(Framing::identity(DEFAULT_G)) }
    }

    pub fn with_z(mut self, z: C64) -> Self {
        self.z = z;
        self
    }
}

/// q^{ℓ_0}: framing q^t e^{iθ} (principal branch), z = 1.
pub fn standard_element(q: C64) -> Result<AnnulusElement> {
    standard_element_with(q, DEFAULT_G, DEFAULT_K, &FramingOptions::default())
}

pub fn standard_element_with(q: C64, g: usize, k: usize, opts: &FramingOptions) -> Result<AnnulusElement> {
    let r = q.norm();
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("standard element needs 0 < |q| < 1, got |q| = {r}")));
    }
    let lq = q.ln();
    let f = Framing::from_fn(g, uniform_knots(k), |th, t| (lq * t + C64::new(0.0, th)).exp())?;
    AnnulusElement::from_framing(f, C64::new(1.0, 0.0), opts)
}

/// Least-squares similarity z ↦ αz + β taking `from` onto `to`, with the sup residual.
pub fn fit_similarity(from: &[C64], to: &[C64]) -> (C64, C64, f64) {
    let n = from.len() as f64;
    let sw: C64 = from.iter().sum();
    let sv: C64 = to.iter().sum();
    let sww: f64 = from.iter().map(|w| w.norm_sqr()).sum();
    let swv: C64 = from.iter().zip(to).map(|(w, v)| w.conj() * v).sum();
    // [sww, conj(sw); sw, n] [α; β] = [swv; sv]
    let det = sww * n - sw.norm_sqr();
    let alpha = (swv * n - sw.conj() * sv) / det;
    let beta = (sv * sww - sw * swv) / det;
    let res = from.iter().zip(to).map(|(w, v)| (alpha * w + beta - v).norm()).fold(0.0, f64::max);
    (alpha, beta, res)
}

/// Glues `inner` inside `outer`: outer's framing on t ∈ [0, ½], inner's
/// (moved by the fitted similarity) on [½, 1], junction as a repeated knot.
pub fn compose_framings(outer: &Framing, inner: &Framing, tol: f64) -> Result<Framing> {
    if outer.grid() != inner.grid() {
        return Err(Error::Domain("framings on different θ-grids".into()));
    }
    let (alpha, beta, residual) = fit_similarity(inner.outer(), outer.inner());
    let scale = outer.inner().iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    if residual > tol * scale.max(1.0) {
        return Err(Error::BoundaryMismatch { residual, tol });
    }
    let moved = inner.map(|z| alpha * z + beta);
    let mut knots: Vec<f64> = outer.knots().iter().map(|t| t / 2.0).collect();
    knots.extend(inner.knots().iter().map(|t| 0.5 + t / 2.0));
    let mut h: Vec<Vec<C64>> = outer.curves().to_vec();
    h.extend(moved.curves().iter().cloned());
    let mut f = Framing::new(outer.grid(), knots, h)?;
    f.sitting = [outer.sitting[0], inner.sitting[1]];
    Ok(f)
}

/// E1 ∘ E2 with E2 the inner annulus: its path runs first, U = U(E1)·U(E2).
pub fn compose(e1: &AnnulusElement, e2: &AnnulusElement) -> Result<AnnulusElement> {
    compose_with_tol(e1, e2, BOUNDARY_TOL)
}

pub fn compose_with_tol(e1: &AnnulusElement, e2: &AnnulusElement, tol: f64) -> Result<AnnulusElement> {
    let framing = match (&e1.framing, &e2.framing) {
        (Some(f1), Some(f2)) => Some(compose_framings(f1, f2, tol)?),
        _ => None,
    };
    Ok(AnnulusElement { path: FieldPath::concat(&e2.path, &e1.path)?, z: e1.z * e2.z, framing })
}

/// h†(θ, t) = 1/conj(h(θ, 1 − t)): the reflected annulus with reversed time.
pub fn dagger_framing(f: &Framing) -> Framing {
    let knots: Vec<f64> = f.knots().iter().rev().map(|t| if *t == 1.0 { 0.0 } else { 1.0 - t }).collect();
    let h: Vec<Vec<C64>> = f.curves().iter().rev().map(|row| row.iter().map(|z| C64::new(1.0, 0.0) / z.conj()).collect()).collect();
    let mut out = Framing::new(f.grid(), knots, h).expect("reversed knots stay valid");
    out.sitting = [f.sitting[1], f.sitting[0]];
    out
}

/// Path t ↦ X(1 − t)* and scalar conj(z).
pub fn dagger(e: &AnnulusElement) -> AnnulusElement {
    AnnulusElement { path: e.path.dagger(), z: e.z.conj(), framing: e.framing.as_ref().map(dagger_framing) }
}

/// Element file: either a framing (optionally with z) or a path with z.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementDoc {
    Framing(FramingDoc),
    Path {
        path: PathDoc,
        #[serde(default = "one")]
        z: [f64; 2],
    },
}

fn one() -> [f64; 2] {
    [1.0, 0.0]
}

impl ElementDoc {
    pub fn from_json(text: &str) -> Result<ElementDoc> {
        serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn into_element(self, opts: &FramingOptions) -> Result<AnnulusElement> {
        match self {
            ElementDoc::Framing(doc) => {
                let z = doc.z.map(|p| C64::new(p[0], p[1])).unwrap_or(C64::new(1.0, 0.0));
                AnnulusElement::from_framing(Framing::from_doc(&doc)?, z, opts)
            }
            ElementDoc::Path { path, z } => {
                let path = FieldPath::from_doc(&path)?;
                Ok(AnnulusElement::from_path(path, C64::new(z[0], z[1])))
            }
        }
    }

    pub fn from_element(e: &AnnulusElement) -> ElementDoc {
        match &e.framing {
            Some(f) => {
                let mut doc = f.to_doc();
                doc.z = Some([e.z.re, e.z.im]);
                ElementDoc::Framing(doc)
            }
            None => ElementDoc::Path { path: e.path.to_doc(), z: [e.z.re, e.z.im] },
        }
    }
}
