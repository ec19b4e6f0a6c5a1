//! Newton matrix with arrow-plus-low-rank structure.
//!
//! `H = [[A, B], [B', G]] + W diag(omega) W'`, where `A` is block diagonal
//! over the layout's dense blocks, `G` couples the global variables, `B`
//! couples each block with the globals, and every column of `W` touches
//! more than one block. Solves eliminate the blocks and then solve the dense
//! system over globals and low-rank multipliers:
//!
//! ```text
//! [ G - B'A^-1 B          W_g - B'A^-1 W_l        ] [x_g]   [b_g - B'A^-1 b_l]
//! [ (W_g - B'A^-1 W_l)'   -omega^-1 - W_l'A^-1 W_l ] [ y ] = [ -W_l'A^-1 b_l  ]
//! ```

use super::problem::{Layout, SparseVec};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct KktMatrix {
    layout: Layout,
    blocks: Vec<DMatrix<f64>>,
    global: DMatrix<f64>,
    /// Per block: dense `block x globals` coupling.
    coupling: Vec<DMatrix<f64>>,
    lowrank: Vec<(f64, SparseVec)>,
}

impl KktMatrix {
    pub fn new(layout: &Layout) -> Self {
        let ng = layout.globals.len();
        KktMatrix {
            blocks: layout
                .blocks
                .iter()
                .map(|r| DMatrix::zeros(r.len(), r.len()))
                .collect(),
            global: DMatrix::zeros(ng, ng),
            coupling: layout
                .blocks
                .iter()
                .map(|r| DMatrix::zeros(r.len(), ng))
                .collect(),
            lowrank: Vec::new(),
            layout: layout.clone(),
        }
    }

    fn locate(&self, var: usize) -> (Option<usize>, usize) {
        match self.layout.block_of(var) {
            Some(b) => (Some(b), var - self.layout.blocks[b].start),
            None => (None, var - self.layout.globals.start),
        }
    }

    pub fn add_diag(&mut self, var: usize, v: f64) {
        match self.locate(var) {
            (Some(b), i) => self.blocks[b][(i, i)] += v,
            (None, i) => self.global[(i, i)] += v,
        }
    }

    /// Adds `weight * v v'`; `v` must have unique indices.
    pub fn add_rank1(&mut self, weight: f64, v: &SparseVec) {
        if weight == 0.0 || v.is_empty() {
            return;
        }
        let mut block = None;
        let mut multi = false;
        for &i in &v.idx {
            if let Some(b) = self.layout.block_of(i) {
                match block {
                    None => block = Some(b),
                    Some(c) if c != b => multi = true,
                    _ => {}
                }
            }
        }
        if multi {
            self.lowrank.push((weight, v.clone()));
            return;
        }
        let entries: Vec<(Option<usize>, usize, f64)> = v
            .iter()
            .map(|(i, x)| {
                let (b, l) = self.locate(i);
                (b, l, x)
            })
            .collect();
        for &(b1, i1, x1) in &entries {
            for &(b2, i2, x2) in &entries {
                let w = weight * x1 * x2;
                match (b1, b2) {
                    (Some(b), Some(_)) => self.blocks[b][(i1, i2)] += w,
                    (None, None) => self.global[(i1, i2)] += w,
                    (Some(b), None) => self.coupling[b][(i1, i2)] += w,
                    (None, Some(_)) => {}
                }
            }
        }
    }

    pub fn num_lowrank(&self) -> usize {
        self.lowrank.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let gs = self.layout.globals.start;
        let xg = &x[gs..];
        let mut y = vec![0.0; x.len()];
        for (b, r) in self.layout.blocks.iter().enumerate() {
            let a = &self.blocks[b];
            let xb = &x[r.clone()];
            for i in 0..r.len() {
                let mut s = 0.0;
                for j in 0..r.len() {
                    s += a[(i, j)] * xb[j];
                }
                y[r.start + i] += s;
            }
            let c = &self.coupling[b];
            for g in 0..c.ncols() {
                for i in 0..r.len() {
                    let v = c[(i, g)];
                    y[r.start + i] += v * xg[g];
                    y[gs + g] += v * xb[i];
                }
            }
        }
        let ng = self.global.nrows();
        for i in 0..ng {
            let mut s = 0.0;
            for j in 0..ng {
                s += self.global[(i, j)] * xg[j];
            }
            y[gs + i] += s;
        }
        for (w, v) in &self.lowrank {
            let d = w * v.dot(x);
            for (i, vi) in v.iter() {
                y[i] += d * vi;
            }
        }
        y
    }

    /// Assembles the full dense matrix (for testing on small problems).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.layout.num_vars();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.matvec(&e);
            for i in 0..n {
                h[(i, j)] = col[i];
            }
        }
        h
    }

    /// Factors `H + reg * scale * I` blockwise; `reg` is relative to each diagonal's size.
    pub fn factor(&self, reg: f64) -> Result<KktFactor<'_>, String> {
        let gs = self.layout.globals.start;
        let ng = self.global.nrows();
        let r = self.lowrank.len();
        let nb = self.blocks.len();

        let mut ainv = Vec::with_capacity(nb);
        for a in &self.blocks {
            ainv.push(spd_inverse(a, reg)?);
        }

        // Low-rank columns split into per-block local entries and global entries.
        let mut lr_local: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nb];
        let mut red = DMatrix::<f64>::zeros(ng + r, ng + r);
        for (j, (w, v)) in self.lowrank.iter().enumerate() {
            red[(ng + j, ng + j)] = -1.0 / w;
            for (i, x) in v.iter() {
                match self.layout.block_of(i) {
                    Some(b) => lr_local[b].push((j, i - self.layout.blocks[b].start, x)),
                    None => red[(i - gs, ng + j)] += x,
                }
            }
        }
        for i in 0..ng {
            for k in 0..ng {
                red[(i, k)] += self.global[(i, k)];
            }
            red[(i, i)] += reg * (1.0 + self.global[(i, i)].abs());
        }

        let mut packed = Vec::with_capacity(nb);
        for b in 0..nb {
            let ai = &ainv[b];
            let (cols, cb) = nonzero_columns(&self.coupling[b]);
            let lr = &lr_local[b];
            let aib = ai * &cb;
            if !cols.is_empty() {
                let schur = cb.transpose() * &aib;
                for (c1, &g1) in cols.iter().enumerate() {
                    for (c2, &g2) in cols.iter().enumerate() {
                        red[(g1, g2)] -= schur[(c1, c2)];
                    }
                }
                for &(j, i2, v2) in lr {
                    for (c, &g) in cols.iter().enumerate() {
                        red[(g, ng + j)] -= aib[(i2, c)] * v2;
                    }
                }
            }
            for &(j1, i1, v1) in lr {
                for &(j2, i2, v2) in lr {
                    red[(ng + j1, ng + j2)] -= v1 * ai[(i1, i2)] * v2;
                }
            }
            packed.push((cols, cb));
        }
        for i in 0..ng {
            for j in 0..r {
                red[(ng + j, i)] = red[(i, ng + j)];
            }
        }
        let lu = red.lu();
        if !lu.is_invertible() {
            return Err("reduced KKT system is singular".into());
        }
        Ok(KktFactor {
            m: self,
            packed,
            ainv,
            lr_local,
            lu,
        })
    }
}

/// Columns of `c` with a nonzero entry, and `c` restricted to them.
fn nonzero_columns(c: &DMatrix<f64>) -> (Vec<usize>, DMatrix<f64>) {
    let cols: Vec<usize> = (0..c.ncols())
        .filter(|&j| c.column(j).iter().any(|&v| v != 0.0))
        .collect();
    let packed = DMatrix::from_fn(c.nrows(), cols.len(), |i, j| c[(i, cols[j])]);
    (cols, packed)
}

/// Inverse of a symmetric positive (semi)definite block, computed on the
/// Jacobi-scaled matrix with unit diagonal.
fn spd_inverse(a: &DMatrix<f64>, reg: f64) -> Result<DMatrix<f64>, String> {
    let n = a.nrows();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            let d = a[(i, i)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let mut shift = reg;
    for _ in 0..8 {
        let mut m = scaled.clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        if let Some(ch) = m.cholesky() {
            let mut inv = ch.inverse();
            for j in 0..n {
                for i in 0..n {
                    inv[(i, j)] *= scale[i] * scale[j];
                }
            }
            return Ok(inv);
        }
        shift = shift.max(1e-300) * 100.0;
    }
    Err("dense block is not positive definite".into())
}

pub struct KktFactor<'a> {
    m: &'a KktMatrix,
    /// Per block: global columns with nonzero coupling and the packed coupling.
    packed: Vec<(Vec<usize>, DMatrix<f64>)>,
    ainv: Vec<DMatrix<f64>>,
    lr_local: Vec<Vec<(usize, usize, f64)>>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl KktFactor<'_> {
    fn solve_once(&self, b: &[f64]) -> Vec<f64> {
        let lay = &self.m.layout;
        let gs = lay.globals.start;
        let ng = self.m.global.nrows();
        let r = self.m.lowrank.len();
        let mut rhs = DVector::<f64>::zeros(ng + r);
        rhs.rows_mut(0, ng).copy_from_slice(&b[gs..]);
        let mut ys = Vec::with_capacity(lay.blocks.len());
        for (bi, range) in lay.blocks.iter().enumerate() {
            let y = &self.ainv[bi] * DVector::from_column_slice(&b[range.clone()]);
            let (cols, cb) = &self.packed[bi];
            if !cols.is_empty() {
                let by = cb.tr_mul(&y);
                for (c, &g) in cols.iter().enumerate() {
                    rhs[g] -= by[c];
                }
            }
            for &(j, i, v) in &self.lr_local[bi] {
                rhs[ng + j] -= v * y[i];
            }
            ys.push(y);
        }
        let sol = self.lu.solve(&rhs).expect("factor checked invertible");
        let mut x = vec![0.0; b.len()];
        x[gs..].copy_from_slice(sol.rows(0, ng).as_slice());
        for (bi, range) in lay.blocks.iter().enumerate() {
            let mut t = DVector::from_column_slice(&b[range.clone()]);
            let (cols, cb) = &self.packed[bi];
            if !cols.is_empty() {
                let sg = DVector::from_iterator(cols.len(), cols.iter().map(|&g| sol[g]));
                t -= cb * sg;
            }
            for &(j, i, v) in &self.lr_local[bi] {
                t[i] -= v * sol[ng + j];
            }
            let xb = &self.ainv[bi] * t;
            x[range.clone()].copy_from_slice(xb.as_slice());
        }
        x
    }

    /// Solves `H x = b` with iterative refinement against the exact matrix.
    pub fn solve(&self, b: &[f64], refinements: usize) -> Vec<f64> {
        let mut x = self.solve_once(b);
        let bnorm = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for _ in 0..refinements {
            let hx = self.m.matvec(&x);
            let res: Vec<f64> = b.iter().zip(&hx).map(|(b, h)| b - h).collect();
            let rn = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if rn <= 1e-14 * bnorm.max(1e-300) {
                break;
            }
            let dx = self.solve_once(&res);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(seed: u64) -> KktMatrix {
        let layout = Layout {
            blocks: vec![0..4, 4..7, 7..10],
            globals: 10..13,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = KktMatrix::new(&layout);
        for i in 0..13 {
            h.add_diag(i, rng.gen_range(0.1..2.0));
        }
        for _ in 0..25 {
            let mut v = SparseVec::new();
            let nnz = rng.gen_range(1..5);
            let mut used = Vec::new();
            for _ in 0..nnz {
                let i = rng.gen_range(0..13);
                if !used.contains(&i) {
                    used.push(i);
                    v.push(i, rng.gen_range(-1.0..1.0));
                }
            }
            h.add_rank1(rng.gen_range(0.0..5.0), &v);
        }
        h
    }

    #[test]
    fn structured_solve_matches_dense() {
        for seed in 0..20 {
            let h = random_matrix(seed);
            let dense = h.to_dense();
            assert!((&dense - dense.transpose()).amax() < 1e-12);
            let b: Vec<f64> = (0..13).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = h.factor(1e-14).unwrap().solve(&b, 2);
            let xd = dense
                .clone()
                .lu()
                .solve(&DVector::from_column_slice(&b))
                .unwrap();
            for i in 0..13 {
                assert!(
                    (x[i] - xd[i]).abs() < 1e-9 * (1.0 + xd[i].abs()),
                    "seed {seed}"
                );
            }
        }
    }

    #[test]
    fn single_block_terms_stay_out_of_lowrank() {
        let layout = Layout {
            blocks: vec![0..2, 2..4],
            globals: 4..5,
        };
        let mut h = KktMatrix::new(&layout);
        h.add_rank1(
            1.0,
            &SparseVec {
                idx: vec![0, 1, 4],
                val: vec![1.0, 2.0, 3.0],
            },
        );
        assert_eq!(h.num_lowrank(), 0);
        h.add_rank1(
            1.0,
            &SparseVec {
                idx: vec![1, 2],
                val: vec![1.0, 1.0],
            },
        );
        assert_eq!(h.num_lowrank(), 1);
    }
}
