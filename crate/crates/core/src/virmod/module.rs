use super::partition::{enumerate_basis, Partition};
use super::verma::VermaAction;
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

pub const DEFAULT_NULLTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModuleParams {
    pub c: f64,
    pub h: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl ModuleParams {
    pub fn new(c: f64, h: f64, n: usize) -> Self {
        ModuleParams { c, h, n }
    }
}

/// Real block of a generator matrix: target rows `row0..row0+rows`, source
/// columns `col0..col0+cols`, stored row-major.
#[derive(Clone, Debug)]
pub struct Block {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Matrix of a single L_n in the orthonormal basis, as graded blocks.
#[derive(Clone, Debug)]
pub struct ModeOp {
    pub n: i32,
    pub blocks: Vec<Block>,
    /// Only for n = 0: the diagonal h + k.
    pub diag: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ModuleData {
    pub params: ModuleParams,
    pub nulltol: f64,
    pub basis: Vec<Vec<Partition>>,
    pub gram: Vec<DMatrix<f64>>,
    /// Level-k transform: columns are the orthonormal vectors in partition coordinates.
    pub ortho: Vec<DMatrix<f64>>,
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    ops: Vec<ModeOp>,
}

/// Pivoted Cholesky of a PSD matrix, stopping once every remaining Schur
/// pivot is below `tol` times the largest diagonal. Returns the factor rows
/// (rank × n, with `rows[q][piv[p]] = 0` for p < q) and the pivot order.
fn pivoted_cholesky(s: &DMatrix<f64>, tol: f64) -> std::result::Result<(DMatrix<f64>, Vec<usize>), f64> {
    let n = s.nrows();
    let dmax = s.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    if n == 0 || dmax <= 0.0 {
        if s.iter().any(|&x| x.abs() > 0.0) {
            return Err(min_eigenvalue(s) / s.amax().max(f64::MIN_POSITIVE));
        }
        return Ok((DMatrix::zeros(0, n), Vec::new()));
    }
    let mut w = s.clone();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut piv = Vec::new();
    let mut rem: Vec<usize> = (0..n).collect();
    loop {
        let Some((pos, &j)) = rem.iter().enumerate().max_by(|a, b| w[(*a.1, *a.1)].total_cmp(&w[(*b.1, *b.1)])) else {
            break;
        };
        let pivot = w[(j, j)];
        if pivot <= tol * dmax {
            break;
        }
        let root = pivot.sqrt();
        let mut r = vec![0.0; n];
        for &i in rem.iter() {
            r[i] = w[(j, i)] / root;
        }
        rem.swap_remove(pos);
        for &a in rem.iter() {
            for &b in rem.iter() {
                w[(a, b)] -= r[a] * r[b];
            }
        }
        piv.push(j);
        rows.push(r);
    }
    if !rem.is_empty() {
        let tail = DMatrix::from_fn(rem.len(), rem.len(), |a, b| w[(rem[a], rem[b])]);
        if tail.iter().any(|&x| x.abs() > 10.0 * tol * dmax) || tail.diagonal().iter().any(|&x| x < -tol * dmax) {
            return Err(min_eigenvalue(&tail) / dmax);
        }
    }
    let r = DMatrix::from_fn(rows.len(), n, |q, i| rows[q][i]);
    Ok((r, piv))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Blocks of the lowering operators in the orthonormal basis:
/// `lower[n][j]` is L_{-n} from level j to level j+n.
struct Lowering {
    lower: Vec<Vec<DMatrix<f64>>>,
}

impl Lowering {
    fn get(&self, n: usize, j: usize) -> &DMatrix<f64> {
        &self.lower[n][j]
    }

    /// L_n from level j to level j−n (n > 0, j ≥ n).
    fn raise(&self, n: usize, j: usize) -> DMatrix<f64> {
        self.lower[n][j - n].transpose()
    }
}

impl ModuleData {
    /// Builds the truncated irreducible module.
    ///
    /// Level k is spanned by L_{-1}(level k−1) and L_{-2}(level k−2). Their
    /// Gram matrix follows from the lower levels through the bracket, and a
    /// pivoted Cholesky factor of it gives an orthonormal basis of the
    /// quotient together with the matrices of L_{-1} and L_{-2}; higher L_{-n}
    /// are read off from their inner products with the spanning vectors.
    pub fn build(params: ModuleParams, nulltol: f64) -> Result<ModuleData> {
        let ModuleParams { c, h, n } = params;
        if !(c.is_finite() && h.is_finite()) || c < 0.0 || h < 0.0 {
            return Err(Error::Domain(format!("need finite c ≥ 0 and h ≥ 0, got c = {c}, h = {h}")));
        }
        if !(nulltol > 0.0 && nulltol < 1.0) {
            return Err(Error::Domain(format!("nulltol must lie in (0, 1), got {nulltol}")));
        }
        let basis = enumerate_basis(n);
        let mut act = VermaAction::new(c, h);
        let mut grams_rows: Vec<Vec<Vec<f64>>> = vec![vec![vec![1.0]]];
        for k in 1..=n {
            let g = act.gram_level(&basis, k, &grams_rows);
            grams_rows.push(g);
        }
        let gram: Vec<DMatrix<f64>> = grams_rows
            .iter()
            .map(|g| DMatrix::from_fn(g.len(), g.len(), |i, j| g[i][j]))
            .collect();
        let index: Vec<HashMap<&Partition, usize>> = basis
            .iter()
            .map(|ls| ls.iter().enumerate().map(|(i, p)| (p, i)).collect())
            .collect();

        let mut dims = vec![1usize];
        let mut ortho = vec![DMatrix::from_element(1, 1, 1.0)];
        let mut low = Lowering { lower: vec![Vec::new(); n + 1] };
        for k in 1..=n {
            let d1 = dims[k - 1];
            let d2 = if k >= 2 { dims[k - 2] } else { 0 };
            let s_dim = d1 + d2;
            let mut s = DMatrix::<f64>::zeros(s_dim, s_dim);
            // ⟨L_{-1}a, L_{-1}b⟩ = ⟨L_1 a, L_1 b⟩ + 2(h + k − 1)⟨a, b⟩
            let mut a11 = DMatrix::<f64>::identity(d1, d1) * (2.0 * (h + (k - 1) as f64));
            if k >= 2 {
                let r = low.raise(1, k - 1);
                a11 += r.transpose() * r;
            }
            s.view_mut((0, 0), (d1, d1)).copy_from(&a11);
            if d2 > 0 {
                // ⟨L_{-2}a, L_{-2}b⟩ = ⟨L_2 a, L_2 b⟩ + (4(h + k − 2) + c/2)⟨a, b⟩
                let mut a22 = DMatrix::<f64>::identity(d2, d2) * (4.0 * (h + (k - 2) as f64) + c / 2.0);
                if k >= 4 {
                    let r = low.raise(2, k - 2);
                    a22 += r.transpose() * r;
                }
                // ⟨L_{-1}a, L_{-2}b⟩ = ⟨L_2 a, L_1 b⟩ + 3⟨a, L_{-1}b⟩
                let mut a12 = low.get(1, k - 2) * 3.0;
                if k >= 3 {
                    a12 += low.raise(2, k - 1).transpose() * low.raise(1, k - 2);
                }
                s.view_mut((d1, d1), (d2, d2)).copy_from(&a22);
                s.view_mut((0, d1), (d1, d2)).copy_from(&a12);
                s.view_mut((d1, 0), (d2, d1)).copy_from(&a12.transpose());
            }
            let (t, piv) = pivoted_cholesky(&s, nulltol).map_err(|e| Error::NonUnitary {
                c,
                h,
                level: k,
                eigenvalue: e,
            })?;
            let dk = t.nrows();
            let mut tri = DMatrix::<f64>::zeros(dk, dk);
            for q in 0..dk {
                for (p, &col) in piv.iter().enumerate().skip(q) {
                    tri[(q, p)] = t[(q, col)];
                }
            }
            low.lower[1].push(t.columns(0, d1).into_owned());
            if k >= 2 {
                low.lower[2].push(t.columns(d1, d2).into_owned());
            }
            for m in 3..=k {
                let j = k - m;
                let dj = dims[j];
                let mut g = DMatrix::<f64>::zeros(s_dim, dj);
                // ⟨L_{-1}a, L_{-m}b⟩ = ⟨L_m a, L_1 b⟩ + (m + 1)⟨a, L_{-(m-1)}b⟩
                let mut top = low.get(m - 1, j) * ((m + 1) as f64);
                if j >= 1 && k > m {
                    top += low.raise(m, k - 1).transpose() * low.raise(1, j);
                }
                g.view_mut((0, 0), (d1, dj)).copy_from(&top);
                if d2 > 0 {
                    // ⟨L_{-2}a, L_{-m}b⟩ = ⟨L_m a, L_2 b⟩ + (m + 2)⟨a, L_{-(m-2)}b⟩
                    let mut bottom = low.get(m - 2, j) * ((m + 2) as f64);
                    if j >= 2 && k >= m + 2 {
                        bottom += low.raise(m, k - 2).transpose() * low.raise(2, j);
                    }
                    g.view_mut((d1, 0), (d2, dj)).copy_from(&bottom);
                }
                let rhs = DMatrix::from_fn(dk, dj, |q, b| g[(piv[q], b)]);
                let block = tri
                    .transpose()
                    .solve_lower_triangular(&rhs)
                    .ok_or_else(|| Error::Domain(format!("singular factor at level {k}")))?;
                low.lower[m].push(block);
            }
            // orthonormal vectors in partition coordinates
            let pk = basis[k].len();
            let mut span = DMatrix::<f64>::zeros(pk, s_dim);
            for (step, (src, width, off)) in [(k - 1, d1, 0usize), (k.wrapping_sub(2), d2, d1)].into_iter().enumerate() {
                if width == 0 {
                    continue;
                }
                for (i, mu) in basis[src].iter().enumerate() {
                    for (nu, a) in act.act(-((step + 1) as i32), mu).iter() {
                        let row = index[k][nu];
                        for col in 0..width {
                            span[(row, off + col)] += a * ortho[src][(i, col)];
                        }
                    }
                }
            }
            let sp = DMatrix::from_fn(pk, dk, |i, q| span[(i, piv[q])]);
            let o = tri
                .transpose()
                .solve_lower_triangular(&sp.transpose())
                .map(|x| x.transpose())
                .unwrap_or_else(|| DMatrix::zeros(pk, dk));
            ortho.push(o);
            dims.push(dk);
        }
        for m in 1..=n {
            // blocks for levels that do not exist yet stay empty
            while low.lower[m].len() < n + 1 - m {
                let j = low.lower[m].len();
                low.lower[m].push(DMatrix::zeros(dims[j + m], dims[j]));
            }
        }

        let mut offsets = vec![0usize; n + 2];
        for k in 0..=n {
            offsets[k + 1] = offsets[k] + dims[k];
        }
        let mut ops = Vec::with_capacity(2 * n + 1);
        let mut raising: Vec<Vec<Block>> = vec![Vec::new(); n + 1];
        for (m, per_level) in low.lower.iter().enumerate().skip(1) {
            for (j, b) in per_level.iter().enumerate() {
                if b.nrows() == 0 || b.ncols() == 0 {
                    continue;
                }
                let mut data = Vec::with_capacity(b.nrows() * b.ncols());
                for i in 0..b.ncols() {
                    for r in 0..b.nrows() {
                        data.push(b[(r, i)]);
                    }
                }
                raising[m].push(Block {
                    row0: offsets[j],
                    col0: offsets[j + m],
                    rows: b.ncols(),
                    cols: b.nrows(),
                    data,
                });
            }
        }
        for m in (1..=n).rev() {
            ops.push(ModeOp {
                n: -(m as i32),
                blocks: raising[m].iter().map(transpose_block).collect(),
                diag: Vec::new(),
            });
        }
        let mut diag = Vec::with_capacity(offsets[n + 1]);
        for (k, &dk) in dims.iter().enumerate() {
            diag.extend(std::iter::repeat_n(h + k as f64, dk));
        }
        ops.push(ModeOp { n: 0, blocks: Vec::new(), diag });
        for (m, blocks) in raising.into_iter().enumerate().skip(1) {
            ops.push(ModeOp { n: m as i32, blocks, diag: Vec::new() });
        }
        Ok(ModuleData { params, nulltol, basis, gram, ortho, dims, offsets, ops })
    }

    pub fn cutoff(&self) -> usize {
        self.params.n
    }

    pub fn dim(&self) -> usize {
        self.offsets[self.params.n + 1]
    }

    /// Number of orthonormal basis vectors with level ≤ `level`.
    pub fn dim_through(&self, level: usize) -> usize {
        self.offsets[level.min(self.params.n) + 1]
    }

    /// Level of each orthonormal basis index.
    pub fn levels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dim());
        for (k, &d) in self.dims.iter().enumerate() {
            out.extend(std::iter::repeat_n(k, d));
        }
        out
    }

    pub fn mode_op(&self, n: i32) -> Option<&ModeOp> {
        let cutoff = self.params.n as i32;
        if n.abs() > cutoff {
            return None;
        }
        Some(&self.ops[(n + cutoff) as usize])
    }

    /// Dense matrix of L_n (zero for |n| > N, where no level pair is connected).
    pub fn lmat(&self, n: i32) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        if let Some(op) = self.mode_op(n) {
            op.add_dense(C64::new(1.0, 0.0), &mut m);
        }
        m
    }

    /// out += coeff · L_n · y  (y and out are d × m, column-major).
    pub fn apply_mode(&self, n: i32, coeff: C64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>) {
        if let Some(op) = self.mode_op(n) {
            op.apply(coeff, y, out, scratch, false);
        }
    }

    /// out += coeff · L_n^* · y = coeff · L_{-n} · y.
    pub fn apply_mode_adjoint(&self, n: i32, coeff: C64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>) {
        if let Some(op) = self.mode_op(n) {
            op.apply(coeff, y, out, scratch, true);
        }
    }

    /// Coefficients of the orthonormal vector `i` in the partition basis of its level.
    pub fn ortho_vector(&self, i: usize) -> (usize, DVector<f64>) {
        let k = self.levels()[i];
        let col = i - self.offsets[k];
        (k, self.ortho[k].column(col).into_owned())
    }
}

fn transpose_block(b: &Block) -> Block {
    let mut data = vec![0.0; b.data.len()];
    for i in 0..b.rows {
        for j in 0..b.cols {
            data[j * b.rows + i] = b.data[i * b.cols + j];
        }
    }
    Block { row0: b.col0, col0: b.row0, rows: b.cols, cols: b.rows, data }
}

impl ModeOp {
    pub fn add_dense(&self, coeff: C64, m: &mut CMat) {
        for (i, &v) in self.diag.iter().enumerate() {
            m[(i, i)] += coeff * v;
        }
        for b in &self.blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    m[(b.row0 + i, b.col0 + j)] += coeff * b.data[i * b.cols + j];
                }
            }
        }
    }

    /// out += coeff · M · y, or coeff · Mᵀ · y when `transpose` (M is real).
    pub fn apply(&self, coeff: C64, y: &CMat, out: &mut CMat, scratch: &mut Vec<C64>, transpose: bool) {
        let d = y.nrows();
        let ncols = y.ncols();
        assert_eq!(out.shape(), (d, ncols));
        if coeff == C64::new(0.0, 0.0) || ncols == 0 {
            return;
        }
        if !self.diag.is_empty() {
            for j in 0..ncols {
                for (i, &v) in self.diag.iter().enumerate() {
                    out[(i, j)] += coeff * v * y[(i, j)];
                }
            }
            return;
        }
        for b in &self.blocks {
            let (rows, cols, row0, col0, rsa, csa) = if transpose {
                (b.cols, b.rows, b.col0, b.row0, 1isize, b.cols as isize)
            } else {
                (b.rows, b.cols, b.row0, b.col0, b.cols as isize, 1isize)
            };
            scratch.clear();
            scratch.resize(rows * ncols, C64::new(0.0, 0.0));
            let yp = y.as_ptr() as *const f64;
            let sp = scratch.as_mut_ptr() as *mut f64;
            // SAFETY: complex entries are (re, im) pairs, so the real and
            // imaginary parts of column-major complex storage are strided
            // real matrices with row stride 2 and column stride 2·nrows.
            for part in 0..2 {
                unsafe {
                    matrixmultiply::dgemm(
                        rows,
                        cols,
                        ncols,
                        1.0,
                        b.data.as_ptr(),
                        rsa,
                        csa,
                        yp.add(2 * col0 + part),
                        2,
                        2 * d as isize,
                        0.0,
                        sp.add(part),
                        2,
                        2 * rows as isize,
                    );
                }
            }
            for j in 0..ncols {
                let src = &scratch[j * rows..(j + 1) * rows];
                let mut dst = out.view_mut((row0, j), (rows, 1));
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += coeff * s;
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModuleDoc {
    c: f64,
    h: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(default = "default_nulltol")]
    nulltol: f64,
    dims: Vec<usize>,
    lmat: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

fn default_nulltol() -> f64 {
    DEFAULT_NULLTOL
}

impl ModuleData {
    pub fn to_json(&self) -> String {
        let cutoff = self.params.n as i32;
        let mut lmat = BTreeMap::new();
        let mut keys: Vec<i32> = (-cutoff..=cutoff).collect();
        keys.sort_by_key(|k| k.to_string());
        for n in keys {
            let m = self.lmat(n);
            let rows = (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect();
            lmat.insert(n.to_string(), rows);
        }
        let doc = ModuleDoc {
            c: self.params.c,
            h: self.params.h,
            n: self.params.n,
            nulltol: self.nulltol,
            dims: self.dims.clone(),
            lmat,
        };
        serde_json::to_string(&doc).expect("module serializes")
    }

    /// Rebuilds the module from the stored parameters and checks that the
    /// stored dimensions and matrices agree with the rebuild.
    pub fn from_json(text: &str) -> Result<ModuleData> {
        let doc: ModuleDoc = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        let module = ModuleData::build(ModuleParams::new(doc.c, doc.h, doc.n), doc.nulltol)?;
        if module.dims != doc.dims {
            return Err(Error::Schema(format!(
                "stored dims {:?} disagree with rebuilt dims {:?}",
                doc.dims, module.dims
            )));
        }
        let d = module.dim();
        for (key, rows) in &doc.lmat {
            let n: i32 = key
                .parse()
                .map_err(|_| Error::Schema(format!("lmat key {key:?} is not an integer")))?;
            let m = module.lmat(n);
            if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                return Err(Error::Schema(format!("lmat[{n}] is not {d}×{d}")));
            }
            for (i, row) in rows.iter().enumerate() {
                for (j, z) in row.iter().enumerate() {
                    let diff = (m[(i, j)] - C64::new(z[0], z[1])).norm();
                    if diff > 1e-9 * (1.0 + m[(i, j)].norm()) {
                        return Err(Error::Schema(format!("lmat[{n}]({i},{j}) disagrees with rebuild")));
                    }
                }
            }
        }
        Ok(module)
    }
}

/// Coordinates in the orthonormal basis, blocked by level.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedVector {
    pub coeffs: DVector<C64>,
}

impl GradedVector {
    pub fn new(coeffs: DVector<C64>) -> Self {
        GradedVector { coeffs }
    }

    pub fn lowest_weight(module: &ModuleData) -> Self {
        let mut v = DVector::zeros(module.dim());
        v[0] = C64::new(1.0, 0.0);
        GradedVector { coeffs: v }
    }

    pub fn unit(module: &ModuleData, index: usize) -> Self {
        let mut v = DVector::zeros(module.dim());
        v[index] = C64::new(1.0, 0.0);
        GradedVector { coeffs: v }
    }

    pub fn level_block(&self, module: &ModuleData, k: usize) -> Vec<C64> {
        self.coeffs.as_slice()[module.offsets[k]..module.offsets[k + 1]].to_vec()
    }
}

/// ‖(1 + L_0)^n v‖.
pub fn sobolev_norm(v: &GradedVector, order: f64, module: &ModuleData) -> f64 {
    let h = module.params.h;
    let mut s = 0.0;
    for (k, &d) in module.dims.iter().enumerate() {
        let w = (1.0 + h + k as f64).powf(2.0 * order);
        let off = module.offsets[k];
        for i in off..off + d {
            s += w * v.coeffs[i].norm_sqr();
        }
    }
    s.sqrt()
}

/// Column-wise Sobolev weights (1 + h + k)^order for each basis index.
pub fn sobolev_weights(module: &ModuleData, order: f64) -> Vec<f64> {
    let h = module.params.h;
    module
        .levels()
        .into_iter()
        .map(|k| (1.0 + h + k as f64).powf(order))
        .collect()
}
