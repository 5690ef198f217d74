use super::*;
use crate::annulus::standard_element;
use crate::linalg::c;
use crate::virmod::{ModuleParams, DEFAULT_NULLTOL};

fn module(c: f64, h: f64, n: usize) -> ModuleData {
    ModuleData::build(ModuleParams::new(c, h, n), DEFAULT_NULLTOL).unwrap()
}

#[test]
fn standard_element_is_r_to_the_l0() {
    let m = module(2.0, 0.5, 10);
    for q in [c(0.5, 0.0), C64::from_polar(0.5, 0.1)] {
        let rep = represent(&standard_element(q).unwrap(), &m, &OdeOptions::default()).unwrap();
        let mut err = 0.0f64;
        for (i, k) in m.levels().into_iter().enumerate() {
            for j in 0..m.dim() {
                let want = if i == j { (q.ln() * (0.5 + k as f64)).exp() } else { C64::new(0.0, 0.0) };
                err = err.max((rep.u[(i, j)] - want).norm());
            }
        }
        assert!(err < 1e-9, "q={q} err={err}");
    }
}
