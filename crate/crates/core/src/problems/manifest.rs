use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mmio::{read_matrix, read_vector, write_matrix, write_vector};
use crate::error::{Error, Result};
use crate::system::{ApproxSolution, Block, BlockSystem, Perturbation, StructureCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhsMode {
    /// f, g, h read from files.
    Explicit,
    /// d = 𝒜·1.
    AllOnesSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhsSpec {
    pub mode: RhsMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<BTreeMap<String, String>>,
}

/// JSON description of a system stored as one MatrixMarket file per block.
///
/// Paths are relative to the manifest's directory. `B` and `D` may stand in for
/// equal `B1`/`B2` and `D1`/`D2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemManifest {
    pub name: String,
    pub case: StructureCase,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub blocks: BTreeMap<String, String>,
    pub rhs: RhsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    let p = Path::new(rel);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_block(base: &Path, name: &str, rel: &str) -> Result<DMatrix<f64>> {
    let path = resolve(base, rel);
    if !path.exists() {
        return Err(Error::Manifest(format!("block {name}: file {} not found", path.display())));
    }
    read_matrix(&path)
}

/// Load a system from a manifest file; returns the system and the parsed manifest.
pub fn load(path: &Path) -> Result<(BlockSystem, ProblemManifest)> {
    let text = fs::read_to_string(path)?;
    let man: ProblemManifest = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let (n, m, p) = (man.n, man.m, man.p);

    let lookup = |name: &str, alias: &str| -> Result<DMatrix<f64>> {
        let rel = man
            .blocks
            .get(name)
            .or_else(|| man.blocks.get(alias))
            .ok_or_else(|| Error::Manifest(format!("missing block file for {name}")))?;
        read_block(base, name, rel)
    };
    let expect = |name: &str, x: DMatrix<f64>, shape: (usize, usize)| -> Result<DMatrix<f64>> {
        if x.shape() != shape {
            Err(Error::dim(name, shape, x.shape()))
        } else {
            Ok(x)
        }
    };
    let a = expect("A", lookup("A", "A")?, (n, n))?;
    let b1 = expect("B1", lookup("B1", "B")?, (m, n))?;
    let b2 = expect("B2", lookup("B2", "B")?, (m, n))?;
    let c = expect("C", lookup("C", "C")?, (m, m))?;
    let d1 = expect("D1", lookup("D1", "D")?, (p, m))?;
    let d2 = expect("D2", lookup("D2", "D")?, (p, m))?;
    let e = expect("E", lookup("E", "E")?, (p, p))?;

    let sys = match man.rhs.mode {
        RhsMode::Explicit => {
            let paths = man
                .rhs
                .paths
                .as_ref()
                .ok_or_else(|| Error::Manifest("explicit right-hand side needs `paths`".into()))?;
            let vec_of = |name: &str, len: usize| -> Result<DVector<f64>> {
                let rel = paths.get(name).ok_or_else(|| Error::Manifest(format!("missing rhs file for {name}")))?;
                let file = resolve(base, rel);
                if !file.exists() {
                    return Err(Error::Manifest(format!("rhs {name}: file {} not found", file.display())));
                }
                let v = read_vector(&file)?;
                if v.len() != len {
                    return Err(Error::len(name, len, v.len()));
                }
                Ok(v)
            };
            BlockSystem::new(a, b1, b2, c, d1, d2, e, vec_of("f", n)?, vec_of("g", m)?, vec_of("h", p)?)?
        }
        RhsMode::AllOnesSolution => {
            let sys = BlockSystem::new(a, b1, b2, c, d1, d2, e, DVector::zeros(n), DVector::zeros(m), DVector::zeros(p))?;
            let ones = DVector::from_element(n + m + p, 1.0);
            sys.with_solution(&ones)
        }
    };
    Ok((sys, man))
}

/// Write every block and the right-hand side to `dir` and a `manifest.json` describing them.
pub fn store(sys: &BlockSystem, case: StructureCase, name: &str, dir: &Path) -> Result<ProblemManifest> {
    fs::create_dir_all(dir)?;
    let mut blocks = BTreeMap::new();
    for b in &Block::ALL[..7] {
        let file = format!("{}.mtx", b.name());
        write_matrix(&dir.join(&file), sys.matrix(*b))?;
        blocks.insert(b.name().to_string(), file);
    }
    let mut paths = BTreeMap::new();
    for b in &Block::ALL[7..] {
        let file = format!("{}.mtx", b.name());
        write_vector(&dir.join(&file), sys.vector(*b))?;
        paths.insert(b.name().to_string(), file);
    }
    let (n, m, p) = sys.dims();
    let man = ProblemManifest {
        name: name.to_string(),
        case,
        n,
        m,
        p,
        blocks,
        rhs: RhsSpec { mode: RhsMode::Explicit, paths: Some(paths) },
        seed: None,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&man)?)?;
    Ok(man)
}

/// Stacked w = (x, y, z) as a single-column MatrixMarket array.
pub fn write_solution(path: &Path, sol: &ApproxSolution) -> Result<()> {
    write_vector(path, &sol.stacked())
}

pub fn read_solution(path: &Path, n: usize, m: usize, p: usize) -> Result<ApproxSolution> {
    ApproxSolution::from_stacked(&read_vector(path)?, n, m, p)
}

#[derive(Serialize, Deserialize)]
struct PerturbationMeta {
    case: StructureCase,
    sparsity_preserving: bool,
}

/// Write `dA.mtx` … `dh.mtx` plus `perturbation.json` into `dir`.
pub fn write_perturbation(dir: &Path, pert: &Perturbation) -> Result<()> {
    fs::create_dir_all(dir)?;
    for b in Block::ALL {
        let path = dir.join(format!("{}.mtx", b.delta_name()));
        if b.is_vector() {
            write_vector(&path, pert.vector(b))?;
        } else {
            write_matrix(&path, pert.matrix(b))?;
        }
    }
    let meta = PerturbationMeta { case: pert.case, sparsity_preserving: pert.sparsity_preserving };
    fs::write(dir.join("perturbation.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_perturbation(dir: &Path, n: usize, m: usize, p: usize) -> Result<Perturbation> {
    let meta: PerturbationMeta = serde_json::from_str(&fs::read_to_string(dir.join("perturbation.json"))?)?;
    let mut pert = Perturbation::zeros(n, m, p, meta.case, meta.sparsity_preserving);
    for b in Block::ALL {
        let path = dir.join(format!("{}.mtx", b.delta_name()));
        if b.is_vector() {
            let v = read_vector(&path)?;
            if v.len() != pert.vector(b).len() {
                return Err(Error::len(b.delta_name(), pert.vector(b).len(), v.len()));
            }
            *pert.vector_mut(b) = v;
        } else {
            let x = read_matrix(&path)?;
            if x.shape() != pert.matrix(b).shape() {
                return Err(Error::dim(b.delta_name(), pert.matrix(b).shape(), x.shape()));
            }
            *pert.matrix_mut(b) = x;
        }
    }
    Ok(pert)
}
