use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Which symmetry/equality constraints a system and its perturbations obey.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StructureCase {
    /// A, C, E symmetric; B1 = B2; D1 = D2.
    #[serde(rename = "I")]
    CaseI,
    /// A, C, E symmetric; D1 = D2; B1, B2 free.
    #[serde(rename = "II")]
    CaseII,
    /// C, E symmetric; B1 = B2; A, D1, D2 free.
    #[serde(rename = "III")]
    CaseIII,
}

impl StructureCase {
    pub const ALL: [StructureCase; 3] = [StructureCase::CaseI, StructureCase::CaseII, StructureCase::CaseIII];

    pub fn a_symmetric(self) -> bool {
        !matches!(self, StructureCase::CaseIII)
    }

    pub fn b_shared(self) -> bool {
        !matches!(self, StructureCase::CaseII)
    }

    pub fn d_shared(self) -> bool {
        !matches!(self, StructureCase::CaseIII)
    }
}

impl fmt::Display for StructureCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StructureCase::CaseI => "I",
            StructureCase::CaseII => "II",
            StructureCase::CaseIII => "III",
        })
    }
}

impl FromStr for StructureCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().trim_start_matches("CASE") {
            "I" | "1" => Ok(StructureCase::CaseI),
            "II" | "2" => Ok(StructureCase::CaseII),
            "III" | "3" => Ok(StructureCase::CaseIII),
            _ => Err(Error::InvalidArgument(format!("unknown structure case `{s}`"))),
        }
    }
}

/// Whether the structured perturbation must also keep the zero pattern of the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sparsity {
    Free,
    Preserving,
}

impl Sparsity {
    pub fn is_preserving(self) -> bool {
        self == Sparsity::Preserving
    }
}

impl From<bool> for Sparsity {
    fn from(b: bool) -> Self {
        if b {
            Sparsity::Preserving
        } else {
            Sparsity::Free
        }
    }
}

/// The ten data blocks, in weight order θ1..θ10.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    A,
    B1,
    B2,
    C,
    D1,
    D2,
    E,
    F,
    G,
    H,
}

impl Block {
    pub const ALL: [Block; 10] = [
        Block::A,
        Block::B1,
        Block::B2,
        Block::C,
        Block::D1,
        Block::D2,
        Block::E,
        Block::F,
        Block::G,
        Block::H,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["A", "B1", "B2", "C", "D1", "D2", "E", "f", "g", "h"][self.index()]
    }

    pub fn delta_name(self) -> &'static str {
        ["dA", "dB1", "dB2", "dC", "dD1", "dD2", "dE", "df", "dg", "dh"][self.index()]
    }

    pub fn is_vector(self) -> bool {
        self.index() >= 7
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Block::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown block `{s}`")))
    }
}

/// The coefficient blocks and right-hand side of a three-by-three block saddle point system.
///
/// Fields are private so that dimensions stay consistent after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSystem {
    a: Mat,
    b1: Mat,
    b2: Mat,
    c: Mat,
    d1: Mat,
    d2: Mat,
    e: Mat,
    f: Vector,
    g: Vector,
    h: Vector,
}

impl BlockSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Mat,
        b1: Mat,
        b2: Mat,
        c: Mat,
        d1: Mat,
        d2: Mat,
        e: Mat,
        f: Vector,
        g: Vector,
        h: Vector,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = c.nrows();
        let p = e.nrows();
        let check = |name: &str, mat: &Mat, r: usize, c: usize| {
            if mat.shape() != (r, c) {
                Err(Error::dim(name, (r, c), mat.shape()))
            } else {
                Ok(())
            }
        };
        check("A", &a, n, n)?;
        check("B1", &b1, m, n)?;
        check("B2", &b2, m, n)?;
        check("C", &c, m, m)?;
        check("D1", &d1, p, m)?;
        check("D2", &d2, p, m)?;
        check("E", &e, p, p)?;
        for (name, v, len) in [("f", &f, n), ("g", &g, m), ("h", &h, p)] {
            if v.len() != len {
                return Err(Error::len(name, len, v.len()));
            }
        }
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidArgument("block dimensions must be positive".into()));
        }
        Ok(BlockSystem { a, b1, b2, c, d1, d2, e, f, g, h })
    }

    /// Convenience constructor for systems with B1 = B2 and D1 = D2.
    pub fn symmetric(a: Mat, b: Mat, c: Mat, d: Mat, e: Mat, f: Vector, g: Vector, h: Vector) -> Result<Self> {
        BlockSystem::new(a, b.clone(), b, c, d.clone(), d, e, f, g, h)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.c.nrows()
    }
    pub fn p(&self) -> usize {
        self.e.nrows()
    }
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n(), self.m(), self.p())
    }
    pub fn size(&self) -> usize {
        self.n() + self.m() + self.p()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b1(&self) -> &Mat {
        &self.b1
    }
    pub fn b2(&self) -> &Mat {
        &self.b2
    }
    pub fn c(&self) -> &Mat {
        &self.c
    }
    pub fn d1(&self) -> &Mat {
        &self.d1
    }
    pub fn d2(&self) -> &Mat {
        &self.d2
    }
    pub fn e(&self) -> &Mat {
        &self.e
    }
    pub fn f(&self) -> &Vector {
        &self.f
    }
    pub fn g(&self) -> &Vector {
        &self.g
    }
    pub fn h(&self) -> &Vector {
        &self.h
    }

    /// Matrix block by id; panics for the vector blocks f, g, h.
    pub fn matrix(&self, block: Block) -> &Mat {
        match block {
            Block::A => &self.a,
            Block::B1 => &self.b1,
            Block::B2 => &self.b2,
            Block::C => &self.c,
            Block::D1 => &self.d1,
            Block::D2 => &self.d2,
            Block::E => &self.e,
            _ => panic!("{block} is a vector block"),
        }
    }

    pub fn vector(&self, block: Block) -> &Vector {
        match block {
            Block::F => &self.f,
            Block::G => &self.g,
            Block::H => &self.h,
            _ => panic!("{block} is a matrix block"),
        }
    }

    /// Frobenius/Euclidean norm of a block.
    pub fn block_norm(&self, block: Block) -> f64 {
        if block.is_vector() {
            self.vector(block).norm()
        } else {
            self.matrix(block).norm()
        }
    }

    /// Frobenius norm of the full coefficient matrix.
    pub fn frobenius_norm(&self) -> f64 {
        Block::ALL[..7]
            .iter()
            .map(|&b| self.matrix(b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn rhs(&self) -> Vector {
        let (n, m, _) = self.dims();
        let mut d = Vector::zeros(self.size());
        d.rows_mut(0, n).copy_from(&self.f);
        d.rows_mut(n, m).copy_from(&self.g);
        d.rows_mut(n + m, self.p()).copy_from(&self.h);
        d
    }

    /// Coefficient operator applied to a stacked vector w = (x, y, z).
    pub fn apply(&self, w: &Vector) -> Vector {
        let (n, m, p) = self.dims();
        assert_eq!(w.len(), n + m + p, "stacked vector length");
        let x = w.rows(0, n);
        let y = w.rows(n, m);
        let z = w.rows(n + m, p);
        let mut out = Vector::zeros(n + m + p);
        out.rows_mut(0, n).copy_from(&(&self.a * x + self.b1.tr_mul(&y)));
        out.rows_mut(n, m)
            .copy_from(&(&self.b2 * x - &self.c * y + self.d1.tr_mul(&z)));
        out.rows_mut(n + m, p).copy_from(&(&self.d2 * y + &self.e * z));
        out
    }

    /// The assembled (n+m+p)×(n+m+p) coefficient matrix.
    pub fn monolithic(&self) -> Mat {
        let (n, m, p) = self.dims();
        let mut k = Mat::zeros(n + m + p, n + m + p);
        k.view_mut((0, 0), (n, n)).copy_from(&self.a);
        k.view_mut((0, n), (n, m)).copy_from(&self.b1.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(&self.b2);
        k.view_mut((n, n), (m, m)).copy_from(&(-&self.c));
        k.view_mut((n, n + m), (m, p)).copy_from(&self.d1.transpose());
        k.view_mut((n + m, n), (p, m)).copy_from(&self.d2);
        k.view_mut((n + m, n + m), (p, p)).copy_from(&self.e);
        k
    }

    /// Replace the right-hand side so that `w` is the exact solution.
    pub fn with_solution(mut self, w: &Vector) -> Self {
        let d = self.apply(w);
        let (n, m, p) = self.dims();
        self.f = d.rows(0, n).into_owned();
        self.g = d.rows(n, m).into_owned();
        self.h = d.rows(n + m, p).into_owned();
        self
    }

    /// Apply a perturbation, giving the system (A+dA, ..., h+dh).
    pub fn perturbed(&self, pert: &Perturbation) -> Result<BlockSystem> {
        pert.check_dims(self)?;
        BlockSystem::new(
            &self.a + &pert.da,
            &self.b1 + &pert.db1,
            &self.b2 + &pert.db2,
            &self.c + &pert.dc,
            &self.d1 + &pert.dd1,
            &self.d2 + &pert.dd2,
            &self.e + &pert.de,
            &self.f + &pert.df,
            &self.g + &pert.dg,
            &self.h + &pert.dh,
        )
    }
}

fn is_symmetric(x: &Mat) -> bool {
    x.is_square() && (0..x.nrows()).all(|i| (0..i).all(|j| x[(i, j)] == x[(j, i)]))
}

/// True iff the exact symmetry/equality constraints of `case` hold on the stored entries.
pub fn validate_case(sys: &BlockSystem, case: StructureCase) -> bool {
    let sym_ce = is_symmetric(sys.c()) && is_symmetric(sys.e());
    let a_ok = !case.a_symmetric() || is_symmetric(sys.a());
    let b_ok = !case.b_shared() || sys.b1() == sys.b2();
    let d_ok = !case.d_shared() || sys.d1() == sys.d2();
    sym_ce && a_ok && b_ok && d_ok
}

/// Weights θ1..θ10 attached to A, B1, B2, C, D1, D2, E, f, g, h.
///
/// θ = 0 means the block is not perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    theta: [f64; 10],
}

impl Weights {
    pub fn new(theta: [f64; 10]) -> Result<Self> {
        for (b, &t) in Block::ALL.iter().zip(theta.iter()) {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidWeight { block: b.name(), value: t });
            }
        }
        Ok(Weights { theta })
    }

    pub fn unit() -> Self {
        Weights { theta: [1.0; 10] }
    }

    /// θ = 1/‖block‖ for every block, or 0 for a zero block.
    pub fn normalized(sys: &BlockSystem) -> Self {
        let mut theta = [0.0; 10];
        for b in Block::ALL {
            let nrm = sys.block_norm(b);
            theta[b.index()] = if nrm > 0.0 { 1.0 / nrm } else { 0.0 };
        }
        Weights { theta }
    }

    pub fn get(&self, block: Block) -> f64 {
        self.theta[block.index()]
    }

    pub fn with(mut self, block: Block, value: f64) -> Result<Self> {
        self.theta[block.index()] = value;
        Weights::new(self.theta)
    }

    pub fn as_array(&self) -> [f64; 10] {
        self.theta
    }

    pub(crate) fn require_data_weights(&self) -> Result<()> {
        for b in [Block::F, Block::G, Block::H] {
            if self.get(b) <= 0.0 {
                return Err(Error::ZeroDataWeight(b.name()));
            }
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Weights::unit()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSolution {
    pub x: Vector,
    pub y: Vector,
    pub z: Vector,
}

impl ApproxSolution {
    pub fn new(x: Vector, y: Vector, z: Vector) -> Self {
        ApproxSolution { x, y, z }
    }

    pub fn from_stacked(w: &Vector, n: usize, m: usize, p: usize) -> Result<Self> {
        if w.len() != n + m + p {
            return Err(Error::len("w", n + m + p, w.len()));
        }
        Ok(ApproxSolution {
            x: w.rows(0, n).into_owned(),
            y: w.rows(n, m).into_owned(),
            z: w.rows(n + m, p).into_owned(),
        })
    }

    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        ApproxSolution::new(Vector::zeros(n), Vector::zeros(m), Vector::zeros(p))
    }

    pub fn stacked(&self) -> Vector {
        let (n, m, p) = (self.x.len(), self.y.len(), self.z.len());
        let mut w = Vector::zeros(n + m + p);
        w.rows_mut(0, n).copy_from(&self.x);
        w.rows_mut(n, m).copy_from(&self.y);
        w.rows_mut(n + m, p).copy_from(&self.z);
        w
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared() + self.z.norm_squared()).sqrt()
    }

    pub(crate) fn check_dims(&self, sys: &BlockSystem) -> Result<()> {
        let (n, m, p) = sys.dims();
        for (name, v, len) in [("x", &self.x, n), ("y", &self.y, m), ("z", &self.z, p)] {
            if v.len() != len {
                return Err(Error::len(name, len, v.len()));
            }
        }
        Ok(())
    }
}

/// Residual blocks R_f, R_g, R_h of an approximate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub rf: Vector,
    pub rg: Vector,
    pub rh: Vector,
}

impl Residuals {
    pub fn stacked(&self) -> Vector {
        let (n, m, p) = (self.rf.len(), self.rg.len(), self.rh.len());
        let mut r = Vector::zeros(n + m + p);
        r.rows_mut(0, n).copy_from(&self.rf);
        r.rows_mut(n, m).copy_from(&self.rg);
        r.rows_mut(n + m, p).copy_from(&self.rh);
        r
    }

    pub fn norm(&self) -> f64 {
        (self.rf.norm_squared() + self.rg.norm_squared() + self.rh.norm_squared()).sqrt()
    }
}

pub fn residuals(sys: &BlockSystem, sol: &ApproxSolution) -> Result<Residuals> {
    sol.check_dims(sys)?;
    let (x, y, z) = (&sol.x, &sol.y, &sol.z);
    Ok(Residuals {
        rf: sys.f() - sys.a() * x - sys.b1().tr_mul(y),
        rg: sys.g() - sys.b2() * x + sys.c() * y - sys.d1().tr_mul(z),
        rh: sys.h() - sys.d2() * y - sys.e() * z,
    })
}

/// A perturbation of every block of the system, tagged with the structure it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub da: Mat,
    pub db1: Mat,
    pub db2: Mat,
    pub dc: Mat,
    pub dd1: Mat,
    pub dd2: Mat,
    pub de: Mat,
    pub df: Vector,
    pub dg: Vector,
    pub dh: Vector,
    pub case: StructureCase,
    pub sparsity_preserving: bool,
}

impl Perturbation {
    pub fn zeros(n: usize, m: usize, p: usize, case: StructureCase, sparsity_preserving: bool) -> Self {
        Perturbation {
            da: Mat::zeros(n, n),
            db1: Mat::zeros(m, n),
            db2: Mat::zeros(m, n),
            dc: Mat::zeros(m, m),
            dd1: Mat::zeros(p, m),
            dd2: Mat::zeros(p, m),
            de: Mat::zeros(p, p),
            df: Vector::zeros(n),
            dg: Vector::zeros(m),
            dh: Vector::zeros(p),
            case,
            sparsity_preserving,
        }
    }

    pub fn matrix(&self, block: Block) -> &Mat {
        match block {
            Block::A => &self.da,
            Block::B1 => &self.db1,
            Block::B2 => &self.db2,
            Block::C => &self.dc,
            Block::D1 => &self.dd1,
            Block::D2 => &self.dd2,
            Block::E => &self.de,
            _ => panic!("{block} is a vector block"),
        }
    }

    pub fn matrix_mut(&mut self, block: Block) -> &mut Mat {
        match block {
            Block::A => &mut self.da,
            Block::B1 => &mut self.db1,
            Block::B2 => &mut self.db2,
            Block::C => &mut self.dc,
            Block::D1 => &mut self.dd1,
            Block::D2 => &mut self.dd2,
            Block::E => &mut self.de,
            _ => panic!("{block} is a vector block"),
        }
    }

    pub fn vector(&self, block: Block) -> &Vector {
        match block {
            Block::F => &self.df,
            Block::G => &self.dg,
            Block::H => &self.dh,
            _ => panic!("{block} is a matrix block"),
        }
    }

    pub fn vector_mut(&mut self, block: Block) -> &mut Vector {
        match block {
            Block::F => &mut self.df,
            Block::G => &mut self.dg,
            Block::H => &mut self.dh,
            _ => panic!("{block} is a matrix block"),
        }
    }

    /// Weighted norm sqrt(Σ θ_i² ‖Δ_i‖²), counting shared blocks once.
    pub fn weighted_norm(&self, weights: &Weights) -> f64 {
        let mut s = 0.0;
        for b in Block::ALL {
            if (b == Block::B2 && self.case.b_shared()) || (b == Block::D2 && self.case.d_shared()) {
                continue;
            }
            let nrm2 = if b.is_vector() {
                self.vector(b).norm_squared()
            } else {
                self.matrix(b).norm_squared()
            };
            s += weights.get(b).powi(2) * nrm2;
        }
        s.sqrt()
    }

    pub(crate) fn check_dims(&self, sys: &BlockSystem) -> Result<()> {
        for b in Block::ALL {
            if b.is_vector() {
                let (want, got) = (sys.vector(b).len(), self.vector(b).len());
                if want != got {
                    return Err(Error::len(b.delta_name(), want, got));
                }
            } else {
                let (want, got) = (sys.matrix(b).shape(), self.matrix(b).shape());
                if want != got {
                    return Err(Error::dim(b.delta_name(), want, got));
                }
            }
        }
        Ok(())
    }
}
