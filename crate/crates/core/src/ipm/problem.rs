//! Smooth convex constraint functions built from a few structured pieces.

use std::ops::Range;

/// Sparse vector over problem variables; indices need not be sorted or unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, v)| v * x[i]).sum()
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    /// Sums duplicate indices and sorts by index.
    pub fn compacted(&self) -> SparseVec {
        let mut pairs: Vec<(usize, f64)> = self.iter().collect();
        pairs.sort_by_key(|p| p.0);
        let mut out = SparseVec::new();
        for (i, v) in pairs {
            match out.idx.last() {
                Some(&last) if last == i => *out.val.last_mut().unwrap() += v,
                _ => out.push(i, v),
            }
        }
        out
    }
}

/// `f(x) = constant + l'x + sum_j c_j (w_j'x)^2 + sum_i d_i x_i^2 - sum_i e_i ln x_i`
/// with all `c_j, d_i, e_i >= 0`, hence convex on `{x_i > 0 for log terms}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvexFn {
    pub constant: f64,
    pub linear: SparseVec,
    pub squares: Vec<(f64, SparseVec)>,
    pub diag_squares: Vec<(usize, f64)>,
    pub neg_logs: Vec<(usize, f64)>,
}

impl ConvexFn {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut f = self.constant + self.linear.dot(x);
        for (c, w) in &self.squares {
            let d = w.dot(x);
            f += c * d * d;
        }
        for &(i, d) in &self.diag_squares {
            f += d * x[i] * x[i];
        }
        for &(i, e) in &self.neg_logs {
            if x[i] <= 0.0 {
                return f64::INFINITY;
            }
            f -= e * x[i].ln();
        }
        f
    }

    /// Sorted, unique variable indices the function depends on.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.linear.idx.clone();
        for (_, w) in &self.squares {
            s.extend(&w.idx);
        }
        s.extend(self.diag_squares.iter().map(|p| p.0));
        s.extend(self.neg_logs.iter().map(|p| p.0));
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Gradient as a sparse vector (duplicates possible).
    pub fn gradient(&self, x: &[f64]) -> SparseVec {
        let mut g = self.linear.clone();
        for (c, w) in &self.squares {
            let d = 2.0 * c * w.dot(x);
            for (i, v) in w.iter() {
                g.push(i, d * v);
            }
        }
        for &(i, d) in &self.diag_squares {
            g.push(i, 2.0 * d * x[i]);
        }
        for &(i, e) in &self.neg_logs {
            g.push(i, -e / x[i]);
        }
        g.compacted()
    }

    pub fn is_affine(&self) -> bool {
        self.squares.is_empty() && self.diag_squares.is_empty() && self.neg_logs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    Lower,
    Upper,
}

/// Simple bound `x_var >= value` or `x_var <= value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub var: usize,
    pub kind: BoundKind,
    pub value: f64,
}

impl Bound {
    pub fn lower(var: usize, value: f64) -> Self {
        Bound {
            var,
            kind: BoundKind::Lower,
            value,
        }
    }

    pub fn upper(var: usize, value: f64) -> Self {
        Bound {
            var,
            kind: BoundKind::Upper,
            value,
        }
    }

    /// Constraint value in `f(x) <= 0` form.
    pub fn value_at(&self, x: &[f64]) -> f64 {
        match self.kind {
            BoundKind::Lower => self.value - x[self.var],
            BoundKind::Upper => x[self.var] - self.value,
        }
    }

    /// Derivative of the constraint value with respect to its variable.
    pub fn sign(&self) -> f64 {
        match self.kind {
            BoundKind::Lower => -1.0,
            BoundKind::Upper => 1.0,
        }
    }
}

/// Variable ordering: contiguous dense blocks followed by global variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub blocks: Vec<Range<usize>>,
    pub globals: Range<usize>,
}

impl Layout {
    pub fn dense(n: usize) -> Self {
        Layout {
            blocks: Vec::new(),
            globals: 0..n,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.globals.end
    }

    /// Block containing `var`, or `None` for a global variable.
    pub fn block_of(&self, var: usize) -> Option<usize> {
        if var >= self.globals.start {
            return None;
        }
        let b = self.blocks.partition_point(|r| r.end <= var);
        debug_assert!(self.blocks[b].contains(&var));
        Some(b)
    }
}

/// Minimize `c'x` subject to `f_i(x) <= 0` and simple bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub layout: Layout,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<ConvexFn>,
    pub bounds: Vec<Bound>,
}

impl Problem {
    pub fn num_vars(&self) -> usize {
        self.layout.num_vars()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, x)| c * x)
                .sum::<f64>()
    }

    /// Largest constraint violation `max(0, f_i(x))` over constraints and bounds.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let c = self.constraints.iter().map(|f| f.value(x));
        let b = self.bounds.iter().map(|b| b.value_at(x));
        c.chain(b).fold(0.0, |acc, v| acc.max(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn value_and_gradient_agree() {
        let mut w = SparseVec::new();
        w.push(0, 1.0);
        w.push(2, -2.0);
        let f = ConvexFn {
            constant: 0.5,
            linear: SparseVec {
                idx: vec![1, 0],
                val: vec![3.0, -1.0],
            },
            squares: vec![(0.7, w)],
            diag_squares: vec![(1, 0.2)],
            neg_logs: vec![(2, 1.5)],
        };
        let x = [0.3, -0.4, 1.7];
        let g = f.gradient(&x);
        for (i, gi) in g.iter() {
            let h = 1e-6;
            let (mut xp, mut xm) = (x, x);
            xp[i] += h;
            xm[i] -= h;
            assert_relative_eq!(
                gi,
                (f.value(&xp) - f.value(&xm)) / (2.0 * h),
                epsilon = 1e-7
            );
        }
        assert_eq!(f.support(), vec![0, 1, 2]);
        assert!(f.value(&[0.0, 0.0, -1.0]).is_infinite());
    }

    #[test]
    fn layout_lookup() {
        let l = Layout {
            blocks: vec![0..3, 3..5],
            globals: 5..7,
        };
        assert_eq!(l.block_of(0), Some(0));
        assert_eq!(l.block_of(4), Some(1));
        assert_eq!(l.block_of(6), None);
    }
}
