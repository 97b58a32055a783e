//! JSON persistence for problem instances and candidate points.
//!
//! Instances are stored self-contained: family tag, dimensions, and the
//! full problem data as nested arrays, with the generating seed kept as
//! provenance when known. Loading re-validates every invariant the in-memory
//! constructors enforce.

use crate::cs::{CsInstance, MatrixKind};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::portfolio::MvskInstance;
use crate::problem::ProblemSpec;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid instance data: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct CsBody {
    n: usize,
    m: usize,
    s: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<Vec<f64>>,
    d: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x_true: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MvskBody {
    n: usize,
    m: usize,
    s: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    phi: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    lambdas: [f64; 4],
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum InstanceFile {
    CsGaussian(CsBody),
    CsDct(CsBody),
    Mvsk(MvskBody),
}

/// An instance deserialized from disk, tagged with its family.
pub enum LoadedInstance {
    Cs { instance: CsInstance, kind: MatrixKind },
    Mvsk(MvskInstance),
}

impl LoadedInstance {
    pub fn problem(&self) -> &dyn ProblemSpec {
        match self {
            LoadedInstance::Cs { instance, .. } => instance,
            LoadedInstance::Mvsk(instance) => instance,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            LoadedInstance::Cs {
                kind: MatrixKind::Gaussian,
                ..
            } => "cs_gaussian",
            LoadedInstance::Cs {
                kind: MatrixKind::PartialDct,
                ..
            } => "cs_dct",
            LoadedInstance::Mvsk(_) => "mvsk",
        }
    }

    pub fn as_cs(&self) -> Option<&CsInstance> {
        match self {
            LoadedInstance::Cs { instance, .. } => Some(instance),
            LoadedInstance::Mvsk(_) => None,
        }
    }

    pub fn as_mvsk(&self) -> Option<&MvskInstance> {
        match self {
            LoadedInstance::Mvsk(instance) => Some(instance),
            LoadedInstance::Cs { .. } => None,
        }
    }
}

fn matrix_to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], expect_cols: usize) -> Result<DenseMatrix, IoError> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != expect_cols {
            return Err(IoError::Invalid(format!(
                "row {i} has {} entries, expected {expect_cols}",
                r.len()
            )));
        }
    }
    Ok(DenseMatrix::from_rows(rows))
}

/// Serializes an instance (with optional generating seed) to JSON text.
pub fn instance_to_json(inst: &LoadedInstance, seed: Option<u64>) -> Result<String, IoError> {
    let file = match inst {
        LoadedInstance::Cs { instance, kind } => {
            let (a, b) = instance.objective_block();
            let (c, d) = instance.constraint_block();
            let body = CsBody {
                n: instance.dim(),
                m: instance.num_constraints(),
                s: instance.sparsity(),
                seed,
                a: matrix_to_rows(a),
                b: b.as_slice().to_vec(),
                c: matrix_to_rows(c),
                d: d.as_slice().to_vec(),
                x_true: instance.x_true().map(|x| x.as_slice().to_vec()),
            };
            match kind {
                MatrixKind::Gaussian => InstanceFile::CsGaussian(body),
                MatrixKind::PartialDct => InstanceFile::CsDct(body),
            }
        }
        LoadedInstance::Mvsk(instance) => {
            let (mu, sigma, phi, psi) = instance.moments();
            InstanceFile::Mvsk(MvskBody {
                n: instance.dim(),
                m: 1,
                s: instance.sparsity(),
                seed,
                mu: mu.as_slice().to_vec(),
                sigma: matrix_to_rows(sigma),
                phi: matrix_to_rows(phi),
                psi: matrix_to_rows(psi),
                lambdas: instance.lambdas(),
            })
        }
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn save_instance(
    inst: &LoadedInstance,
    seed: Option<u64>,
    path: &Path,
) -> Result<(), IoError> {
    let text = instance_to_json(inst, seed)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Parses and fully re-validates an instance from JSON text.
pub fn instance_from_json(text: &str) -> Result<LoadedInstance, IoError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    match file {
        InstanceFile::CsGaussian(body) => cs_from_body(body, MatrixKind::Gaussian),
        InstanceFile::CsDct(body) => cs_from_body(body, MatrixKind::PartialDct),
        InstanceFile::Mvsk(body) => {
            if body.m != 1 {
                return Err(IoError::Invalid(format!(
                    "portfolio instances have exactly one constraint, got m={}",
                    body.m
                )));
            }
            let n = body.n;
            let mu = DenseVector::from_vec(body.mu);
            if mu.len() != n {
                return Err(IoError::Invalid("mu length disagrees with n".into()));
            }
            let sigma = rows_to_matrix(&body.sigma, n)?;
            let phi = rows_to_matrix(&body.phi, n * n)?;
            let psi = rows_to_matrix(&body.psi, n * n * n)?;
            if sigma.rows() != n || phi.rows() != n || psi.rows() != n {
                return Err(IoError::Invalid("tensor row counts disagree with n".into()));
            }
            let instance = MvskInstance::new(mu, sigma, phi, psi, body.lambdas, body.s)
                .map_err(|e| IoError::Invalid(e.to_string()))?;
            Ok(LoadedInstance::Mvsk(instance))
        }
    }
}

fn cs_from_body(body: CsBody, kind: MatrixKind) -> Result<LoadedInstance, IoError> {
    let n = body.n;
    let a = rows_to_matrix(&body.a, n)?;
    let c = rows_to_matrix(&body.c, n)?;
    if c.rows() != body.m {
        return Err(IoError::Invalid(format!(
            "constraint block has {} rows, header says m={}",
            c.rows(),
            body.m
        )));
    }
    let b = DenseVector::from_vec(body.b);
    let d = DenseVector::from_vec(body.d);
    let x_true = body.x_true.map(DenseVector::from_vec);
    let instance = CsInstance::new(a, b, c, d, body.s, x_true)
        .map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(LoadedInstance::Cs { instance, kind })
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance, IoError> {
    let text = std::fs::read_to_string(path)?;
    instance_from_json(&text)
}

/// A candidate point file: primal x, optional multipliers y.
#[derive(Serialize, Deserialize)]
pub struct PointFile {
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
}

pub fn save_point(point: &PointFile, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, serde_json::to_string(point)?)?;
    Ok(())
}

pub fn load_point(path: &Path) -> Result<PointFile, IoError> {
    let text = std::fs::read_to_string(path)?;
    let point: PointFile = serde_json::from_str(&text)?;
    if !point.x.iter().all(|v| v.is_finite())
        || !point
            .y
            .as_ref()
            .is_none_or(|y| y.iter().all(|v| v.is_finite()))
    {
        return Err(IoError::Invalid("non-finite entries in point".into()));
    }
    Ok(point)
}
