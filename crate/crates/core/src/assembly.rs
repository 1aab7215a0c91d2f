//! The linear maps that turn `ΔA x`, `ΔB x` and `ΔBᵀ y` into products against vectorized
//! unknowns, and the constraint matrix J whose minimum-norm solution is the structured
//! backward error.
//!
//! J is stored column-compressed: every column has at most two nonzeros, so the Gram
//! matrix JJᵀ costs O(l) to form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symvec::{sign_mask, sym_len, SignMask};
use crate::system::{validate_case, ApproxSolution, Block, BlockSystem, Perturbation, StructureCase, Weights};

/// K_x with K_x · vec_s(A) = A x for symmetric A.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorK {
    pub n: usize,
    pub x: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

/// M^m_x = [x1 I_m, ..., xn I_m], so M · vec(A) = A x for m×n A.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorM {
    pub m: usize,
    pub x: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

/// N^n_y = blockdiag(yᵀ, ..., yᵀ), so N · vec(B) = Bᵀ y for m×n B.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorN {
    pub n: usize,
    pub y: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

/// Nonzeros of the K_x column for generator entry (i, j), i >= j.
fn k_entries(x: &DVector<f64>, i: usize, j: usize) -> [(usize, f64); 2] {
    if i == j {
        [(j, x[j]), (j, 0.0)]
    } else {
        [(i, x[j]), (j, x[i])]
    }
}

pub fn build_k(x: &DVector<f64>) -> OperatorK {
    let n = x.len();
    let mut matrix = DMatrix::zeros(n, sym_len(n));
    let mut col = 0;
    for j in 0..n {
        for i in j..n {
            for (row, v) in k_entries(x, i, j) {
                matrix[(row, col)] += v;
            }
            col += 1;
        }
    }
    OperatorK { n, x: x.clone(), matrix }
}

pub fn build_m(x: &DVector<f64>, m: usize) -> OperatorM {
    let n = x.len();
    let mut matrix = DMatrix::zeros(m, m * n);
    for c in 0..n {
        for r in 0..m {
            matrix[(r, c * m + r)] = x[c];
        }
    }
    OperatorM { m, x: x.clone(), matrix }
}

pub fn build_n(y: &DVector<f64>, n: usize) -> OperatorN {
    let m = y.len();
    let mut matrix = DMatrix::zeros(n, m * n);
    for c in 0..n {
        for r in 0..m {
            matrix[(c, c * m + r)] = y[r];
        }
    }
    OperatorN { n, y: y.clone(), matrix }
}

/// How a range of ΔX encodes a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentKind {
    /// θ · D_S · vec_s(ΔX) of a symmetric dim×dim block.
    Symmetric { dim: usize },
    /// θ · vec(ΔX) of a rows×cols block.
    General { rows: usize, cols: usize },
    /// θ · Δv.
    Vector { len: usize },
}

/// One block's column range in J.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub block: Block,
    /// Block forced equal to `block` by the structure case (B2 for a shared B, D2 for a shared D).
    pub shared_with: Option<Block>,
    pub offset: usize,
    pub len: usize,
    pub kind: SegmentKind,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub struct AssembledJ {
    pub case: StructureCase,
    pub sparsity: bool,
    nrows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    layout: Vec<Segment>,
    omitted: Vec<Block>,
}

/// Rows and columns of a wide matrix used by the minimum-norm solver.
pub trait WideOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn mul(&self, v: &DVector<f64>) -> DVector<f64>;
    fn tr_mul(&self, r: &DVector<f64>) -> DVector<f64>;
    fn gram(&self) -> DMatrix<f64>;
    fn to_dense(&self) -> DMatrix<f64>;
}

impl WideOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn mul(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
    fn tr_mul(&self, r: &DVector<f64>) -> DVector<f64> {
        self.tr_mul(r)
    }
    fn gram(&self) -> DMatrix<f64> {
        self * self.transpose()
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.clone()
    }
}

impl AssembledJ {
    pub fn column_layout(&self) -> &[Segment] {
        &self.layout
    }

    /// Blocks whose weight was zero and therefore have no columns.
    pub fn omitted(&self) -> &[Block] {
        &self.omitted
    }

    pub fn segment(&self, block: Block) -> Option<&Segment> {
        self.layout.iter().find(|s| s.block == block || s.shared_with == Some(block))
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.col_ptr[c], self.col_ptr[c + 1]);
        self.row_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    /// Pack a perturbation into ΔX using this layout's θ and D_S scalings.
    pub fn pack(&self, pert: &Perturbation) -> DVector<f64> {
        let mut dx = DVector::zeros(self.ncols());
        for seg in &self.layout {
            let mut k = seg.offset;
            match seg.kind {
                SegmentKind::Symmetric { dim } => {
                    let x = pert.matrix(seg.block);
                    for j in 0..dim {
                        for i in j..dim {
                            let s = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                            dx[k] = seg.theta * s * x[(i, j)];
                            k += 1;
                        }
                    }
                }
                SegmentKind::General { .. } => {
                    for &v in pert.matrix(seg.block).as_slice() {
                        dx[k] = seg.theta * v;
                        k += 1;
                    }
                }
                SegmentKind::Vector { .. } => {
                    for &v in pert.vector(seg.block).iter() {
                        dx[k] = seg.theta * v;
                        k += 1;
                    }
                }
            }
        }
        dx
    }
}

impl WideOperator for AssembledJ {
    fn nrows(&self) -> usize {
        self.nrows
    }

    fn ncols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    fn mul(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.ncols());
        let mut out = DVector::zeros(self.nrows);
        for c in 0..self.ncols() {
            if v[c] != 0.0 {
                for (r, val) in self.column(c) {
                    out[r] += val * v[c];
                }
            }
        }
        out
    }

    fn tr_mul(&self, r: &DVector<f64>) -> DVector<f64> {
        assert_eq!(r.len(), self.nrows);
        DVector::from_iterator(
            self.ncols(),
            (0..self.ncols()).map(|c| self.column(c).map(|(i, v)| v * r[i]).sum::<f64>()),
        )
    }

    fn gram(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.nrows, self.nrows);
        for c in 0..self.ncols() {
            let lo = self.col_ptr[c];
            let hi = self.col_ptr[c + 1];
            for a in lo..hi {
                for b in lo..hi {
                    g[(self.row_idx[a], self.row_idx[b])] += self.values[a] * self.values[b];
                }
            }
        }
        g
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.nrows, self.ncols());
        for c in 0..self.ncols() {
            for (r, v) in self.column(c) {
                j[(r, c)] += v;
            }
        }
        j
    }
}

struct Builder {
    nrows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    layout: Vec<Segment>,
    omitted: Vec<Block>,
}

impl Builder {
    fn ncols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    fn push_column(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (r, v) in entries {
            if v != 0.0 {
                self.row_idx.push(r);
                self.values.push(v);
            }
        }
        self.col_ptr.push(self.row_idx.len());
    }

    /// Adds a segment unless θ = 0; returns 1/θ when columns should be generated.
    fn begin(&mut self, block: Block, shared_with: Option<Block>, kind: SegmentKind, theta: f64) -> Option<f64> {
        if theta == 0.0 {
            self.omitted.push(block);
            self.omitted.extend(shared_with);
            return None;
        }
        let len = match kind {
            SegmentKind::Symmetric { dim } => sym_len(dim),
            SegmentKind::General { rows, cols } => rows * cols,
            SegmentKind::Vector { len } => len,
        };
        self.layout.push(Segment { block, shared_with, offset: self.ncols(), len, kind, theta });
        Some(1.0 / theta)
    }

    /// Symmetric block `x`·v placed in rows starting at `row0`, with a sign.
    fn symmetric(&mut self, block: Block, dim: usize, v: &DVector<f64>, row0: usize, sign: f64, theta: f64, mask: &SignMask) {
        let Some(inv) = self.begin(block, None, SegmentKind::Symmetric { dim }, theta) else {
            return;
        };
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..dim {
            for i in j..dim {
                let s = sign * inv * mask.entries[(i, j)] * if i == j { 1.0 } else { inv_sqrt2 };
                self.push_column(k_entries(v, i, j).map(|(r, val)| (row0 + r, s * val)));
            }
        }
    }

    /// General rows×cols block X with optional appearances X·u (rows at `mx_row0`) and
    /// Xᵀ·t (rows at `nt_row0`).
    #[allow(clippy::too_many_arguments)]
    fn general(
        &mut self,
        block: Block,
        shared_with: Option<Block>,
        rows: usize,
        cols: usize,
        m_part: Option<(&DVector<f64>, usize)>,
        n_part: Option<(&DVector<f64>, usize)>,
        theta: f64,
        mask: &SignMask,
    ) {
        let Some(inv) = self.begin(block, shared_with, SegmentKind::General { rows, cols }, theta) else {
            return;
        };
        for c in 0..cols {
            for r in 0..rows {
                let s = inv * mask.entries[(r, c)];
                let m_entry = m_part.map(|(u, row0)| (row0 + r, s * u[c]));
                let n_entry = n_part.map(|(t, row0)| (row0 + c, s * t[r]));
                self.push_column(m_entry.into_iter().chain(n_entry));
            }
        }
    }

    fn identity(&mut self, block: Block, len: usize, row0: usize, theta: f64) {
        let inv = self.begin(block, None, SegmentKind::Vector { len }, theta).expect("data weights are positive");
        for i in 0..len {
            self.push_column([(row0 + i, -inv)]);
        }
    }
}

/// Build J for the given case, weights and sparsity flag.
///
/// Column order: A, B (or B1, B2), C, D (or D1, D2), E, f, g, h. Blocks with θ = 0 get no columns.
pub fn assemble(
    sys: &BlockSystem,
    sol: &ApproxSolution,
    case: StructureCase,
    weights: &Weights,
    sparsity: bool,
) -> Result<AssembledJ> {
    sol.check_dims(sys)?;
    if !validate_case(sys, case) {
        return Err(Error::CaseMismatch(case));
    }
    weights.require_data_weights()?;

    let (n, m, p) = sys.dims();
    let (gf, gg, gh) = (0, n, n + m);
    let mask = |b: Block| {
        if sparsity {
            sign_mask(sys.matrix(b))
        } else {
            let (r, c) = sys.matrix(b).shape();
            SignMask::ones(r, c)
        }
    };
    let th = |b: Block| weights.get(b);
    let (x, y, z) = (&sol.x, &sol.y, &sol.z);

    let mut bld = Builder {
        nrows: n + m + p,
        col_ptr: vec![0],
        row_idx: Vec::new(),
        values: Vec::new(),
        layout: Vec::new(),
        omitted: Vec::new(),
    };

    if case.a_symmetric() {
        bld.symmetric(Block::A, n, x, gf, 1.0, th(Block::A), &mask(Block::A));
    } else {
        bld.general(Block::A, None, n, n, Some((x, gf)), None, th(Block::A), &mask(Block::A));
    }

    if case.b_shared() {
        bld.general(Block::B1, Some(Block::B2), m, n, Some((x, gg)), Some((y, gf)), th(Block::B1), &mask(Block::B1));
    } else {
        bld.general(Block::B1, None, m, n, None, Some((y, gf)), th(Block::B1), &mask(Block::B1));
        bld.general(Block::B2, None, m, n, Some((x, gg)), None, th(Block::B2), &mask(Block::B2));
    }

    bld.symmetric(Block::C, m, y, gg, -1.0, th(Block::C), &mask(Block::C));

    if case.d_shared() {
        bld.general(Block::D1, Some(Block::D2), p, m, Some((y, gh)), Some((z, gg)), th(Block::D1), &mask(Block::D1));
    } else {
        bld.general(Block::D1, None, p, m, None, Some((z, gg)), th(Block::D1), &mask(Block::D1));
        bld.general(Block::D2, None, p, m, Some((y, gh)), None, th(Block::D2), &mask(Block::D2));
    }

    bld.symmetric(Block::E, p, z, gh, 1.0, th(Block::E), &mask(Block::E));

    bld.identity(Block::F, n, gf, th(Block::F));
    bld.identity(Block::G, m, gg, th(Block::G));
    bld.identity(Block::H, p, gh, th(Block::H));

    Ok(AssembledJ {
        case,
        sparsity,
        nrows: bld.nrows,
        col_ptr: bld.col_ptr,
        row_idx: bld.row_idx,
        values: bld.values,
        layout: bld.layout,
        omitted: bld.omitted,
    })
}
