//! Text formats: libsvm datasets, Matrix Market coordinate matrices and
//! one-value-per-line vectors.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::warn;
use nysadmm_core::operators::{CsrMatrix, OperatorError};
use nysadmm_core::problems::ProblemError;
use nysadmm_core::prox::{BoxError, Hyperrectangle};
use nysadmm_core::QpProblem;
use thiserror::Error;

/// Asymmetry above which `P` is symmetrized with a warning.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{source_name}:{line}: {msg}")]
    Parse { source_name: String, line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Bounds(#[from] BoxError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn open(path: &Path) -> Result<BufReader<File>, InputError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| InputError::Io { path: path.to_path_buf(), source })
}

fn parse_err(source_name: &str, line: usize, msg: impl Into<String>) -> InputError {
    InputError::Parse { source_name: source_name.to_string(), line, msg: msg.into() }
}

fn lines<'a, R: BufRead + 'a>(reader: R, name: &'a str) -> impl Iterator<Item = Result<(usize, String), InputError>> + 'a {
    reader.lines().enumerate().map(move |(i, l)| {
        l.map(|s| (i + 1, s)).map_err(|e| parse_err(name, i + 1, e.to_string()))
    })
}

/// A libsvm dataset: sparse design matrix and labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
}

/// Parses `label idx:val idx:val ...` lines with 1-based indices. The column
/// count is the largest index seen, or `n_features` if that is larger.
pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, n_features: Option<usize>) -> Result<Dataset, InputError> {
    let mut triplets = Vec::new();
    let mut b = Vec::new();
    let mut ncols = n_features.unwrap_or(0);
    for item in lines(reader, name) {
        let (ln, raw) = item?;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let mut tokens = text.split_whitespace();
        let label = tokens.next().unwrap();
        let label: f64 = label.parse().map_err(|_| parse_err(name, ln, format!("bad label {label:?}")))?;
        let row = b.len();
        b.push(label);
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(name, ln, format!("expected idx:val, got {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(name, ln, format!("bad index {idx:?}")))?;
            if idx == 0 {
                return Err(parse_err(name, ln, "indices are 1-based"));
            }
            if idx <= last {
                return Err(parse_err(name, ln, "indices must be increasing"));
            }
            last = idx;
            let val: f64 = val.parse().map_err(|_| parse_err(name, ln, format!("bad value {val:?}")))?;
            ncols = ncols.max(idx);
            triplets.push((row, idx - 1, val));
        }
    }
    let a = CsrMatrix::from_triplets(b.len(), ncols, &triplets)?;
    Ok(Dataset { a, b })
}

pub fn read_libsvm(path: &Path) -> Result<Dataset, InputError> {
    parse_libsvm(open(path)?, &path.display().to_string(), None)
}

/// Writes `a` and `b` in libsvm format. Values use the shortest exact
/// representation, so reading the output back is lossless.
pub fn write_libsvm<W: Write>(mut w: W, a: &CsrMatrix, b: &[f64]) -> io::Result<()> {
    assert_eq!(a.nrows(), b.len(), "one label per row");
    for (i, label) in b.iter().enumerate() {
        write!(w, "{label}")?;
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            write!(w, " {}:{v}", j + 1)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses a Matrix Market `coordinate` matrix (real, integer or pattern;
/// general or symmetric).
pub fn parse_matrix_market<R: BufRead>(reader: R, name: &str) -> Result<CsrMatrix, InputError> {
    let mut it = lines(reader, name);
    let (ln, header) = it.next().ok_or_else(|| parse_err(name, 1, "empty file"))??;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(parse_err(name, ln, "missing %%MatrixMarket matrix header"));
    }
    if h[2] != "coordinate" {
        return Err(parse_err(name, ln, format!("unsupported layout {:?}", h[2])));
    }
    let pattern = match h[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return Err(parse_err(name, ln, format!("unsupported field {other:?}"))),
    };
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_err(name, ln, format!("unsupported symmetry {other:?}"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut count = 0usize;
    for item in it {
        let (ln, raw) = item?;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let tok: Vec<&str> = text.split_whitespace().collect();
        let Some((nr, nc, nnz)) = size else {
            if tok.len() != 3 {
                return Err(parse_err(name, ln, "expected `rows cols entries`"));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| parse_err(name, ln, format!("bad size {s:?}")));
            size = Some((p(tok[0])?, p(tok[1])?, p(tok[2])?));
            triplets.reserve(size.unwrap().2);
            continue;
        };
        let want = if pattern { 2 } else { 3 };
        if tok.len() != want {
            return Err(parse_err(name, ln, format!("expected {want} fields")));
        }
        let idx = |s: &str, bound: usize| -> Result<usize, InputError> {
            match s.parse::<usize>() {
                Ok(v) if v >= 1 && v <= bound => Ok(v - 1),
                _ => Err(parse_err(name, ln, format!("index {s:?} out of range 1..={bound}"))),
            }
        };
        let i = idx(tok[0], nr)?;
        let j = idx(tok[1], nc)?;
        let v = if pattern {
            1.0
        } else {
            tok[2].parse::<f64>().map_err(|_| parse_err(name, ln, format!("bad value {:?}", tok[2])))?
        };
        count += 1;
        if count > nnz {
            return Err(parse_err(name, ln, format!("more than {nnz} entries")));
        }
        triplets.push((i, j, v));
        if symmetric && i != j {
            triplets.push((j, i, v));
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| parse_err(name, 1, "missing size line"))?;
    if count != nnz {
        return Err(InputError::Dimension(format!("{name}: header declares {nnz} entries, found {count}")));
    }
    Ok(CsrMatrix::from_triplets(nr, nc, &triplets)?)
}

pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix, InputError> {
    parse_matrix_market(open(path)?, &path.display().to_string())
}

pub fn write_matrix_market<W: Write>(mut w: W, a: &CsrMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {v}", i + 1, j + 1)?;
        }
    }
    Ok(())
}

/// One decimal per line; `inf`, `+inf`, `-inf` and `infinity` are accepted.
/// Blank lines and `#` comments are skipped.
pub fn parse_vector<R: BufRead>(reader: R, name: &str) -> Result<Vec<f64>, InputError> {
    let mut out = Vec::new();
    for item in lines(reader, name) {
        let (ln, raw) = item?;
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let v: f64 = text.parse().map_err(|_| parse_err(name, ln, format!("not a number: {text:?}")))?;
        if v.is_nan() {
            return Err(parse_err(name, ln, "NaN is not allowed"));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, InputError> {
    parse_vector(open(path)?, &path.display().to_string())
}

pub fn write_vector<W: Write>(mut w: W, v: &[f64]) -> io::Result<()> {
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

/// Largest `|P_ij - P_ji|`.
pub fn asymmetry(p: &CsrMatrix) -> f64 {
    let pt = p.transpose();
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        let (c1, v1) = p.row(i);
        let (c2, v2) = pt.row(i);
        let (mut a, mut b) = (0, 0);
        while a < c1.len() || b < c2.len() {
            let ja = c1.get(a).copied().unwrap_or(usize::MAX);
            let jb = c2.get(b).copied().unwrap_or(usize::MAX);
            let d = if ja == jb {
                a += 1;
                b += 1;
                v1[a - 1] - v2[b - 1]
            } else if ja < jb {
                a += 1;
                v1[a - 1]
            } else {
                b += 1;
                v2[b - 1]
            };
            worst = worst.max(d.abs());
        }
    }
    worst
}

/// `(P + P^T) / 2`.
pub fn symmetrize(p: &CsrMatrix) -> Result<CsrMatrix, InputError> {
    let mut t = Vec::with_capacity(2 * p.nnz());
    for i in 0..p.nrows() {
        let (cols, vals) = p.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            t.push((i, j, 0.5 * v));
            t.push((j, i, 0.5 * v));
        }
    }
    Ok(CsrMatrix::from_triplets(p.nrows(), p.ncols(), &t)?)
}

/// Assembles a QP from Matrix Market `P`, `M` and vector files `q`, `l`, `u`.
/// An asymmetric `P` is replaced by `(P + P^T) / 2` with a warning.
pub fn read_qp_files(p: &Path, q: &Path, m: &Path, l: &Path, u: &Path) -> Result<QpProblem, InputError> {
    let pm = read_matrix_market(p)?;
    let qv = read_vector(q)?;
    let mm = read_matrix_market(m)?;
    let lv = read_vector(l)?;
    let uv = read_vector(u)?;
    assemble_qp(pm, qv, mm, lv, uv)
}

/// Reads `P.mtx`, `q.txt`, `M.mtx`, `l.txt` and `u.txt` from `dir`.
pub fn read_qp_dir(dir: &Path) -> Result<QpProblem, InputError> {
    read_qp_files(&dir.join("P.mtx"), &dir.join("q.txt"), &dir.join("M.mtx"), &dir.join("l.txt"), &dir.join("u.txt"))
}

pub fn assemble_qp(p: CsrMatrix, q: Vec<f64>, m: CsrMatrix, l: Vec<f64>, u: Vec<f64>) -> Result<QpProblem, InputError> {
    let n = q.len();
    if p.nrows() != n || p.ncols() != n {
        return Err(InputError::Dimension(format!("P is {}x{} but q has length {n}", p.nrows(), p.ncols())));
    }
    if m.ncols() != n {
        return Err(InputError::Dimension(format!("M has {} columns but q has length {n}", m.ncols())));
    }
    if l.len() != m.nrows() || u.len() != m.nrows() {
        return Err(InputError::Dimension(format!(
            "M has {} rows but l, u have lengths {}, {}",
            m.nrows(),
            l.len(),
            u.len()
        )));
    }
    let defect = asymmetry(&p);
    let p = if defect > SYMMETRY_TOL {
        warn!("P is not symmetric (max |P - P^T| = {defect:.3e}); using (P + P^T) / 2");
        symmetrize(&p)?
    } else if defect > 0.0 {
        symmetrize(&p)?
    } else {
        p
    };
    let bounds = Hyperrectangle::new(l, u)?;
    Ok(QpProblem::new(Arc::new(p), q, Arc::new(m), bounds)?)
}

/// Writes a QP in the layout read by [`read_qp_dir`].
pub fn write_qp_dir(dir: &Path, p: &CsrMatrix, q: &[f64], m: &CsrMatrix, l: &[f64], u: &[f64]) -> Result<(), InputError> {
    let io = |path: PathBuf, r: io::Result<()>| r.map_err(|source| InputError::Io { path, source });
    let create = |name: &str| {
        let path = dir.join(name);
        File::create(&path).map(io::BufWriter::new).map_err(|source| InputError::Io { path, source })
    };
    io(dir.join("P.mtx"), write_matrix_market(create("P.mtx")?, p))?;
    io(dir.join("M.mtx"), write_matrix_market(create("M.mtx")?, m))?;
    io(dir.join("q.txt"), write_vector(create("q.txt")?, q))?;
    io(dir.join("l.txt"), write_vector(create("l.txt")?, l))?;
    io(dir.join("u.txt"), write_vector(create("u.txt")?, u))?;
    Ok(())
}
