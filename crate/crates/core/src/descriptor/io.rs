//! Matrix Market blocks plus a JSON manifest.
//!
//! A model directory holds one coordinate-format `.mtx` file per block and a
//! `manifest.json` naming them:
//!
//! ```json
//! { "e1": "e1.mtx", "j1": "j1.mtx", ..., "d": "d.mtx",
//!   "n1": 40, "n2": 30, "p": 2, "m": 2 }
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::system::{Index1System, SystemBlocks};
use crate::error::{Error, Result};
use crate::linalg::SparseMat;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub e1: String,
    pub j1: String,
    pub j2: String,
    pub j3: String,
    pub j4: String,
    pub b1: String,
    pub b2: String,
    pub c1: String,
    pub c2: String,
    pub d: String,
    pub n1: usize,
    pub n2: usize,
    pub p: usize,
    pub m: usize,
}

impl Manifest {
    fn standard(n1: usize, n2: usize, p: usize, m: usize) -> Self {
        let f = |s: &str| format!("{s}.mtx");
        Self {
            e1: f("e1"),
            j1: f("j1"),
            j2: f("j2"),
            j3: f("j3"),
            j4: f("j4"),
            b1: f("b1"),
            b2: f("b2"),
            c1: f("c1"),
            c2: f("c2"),
            d: f("d"),
            n1,
            n2,
            p,
            m,
        }
    }
}

/// Reads a real general coordinate Matrix Market file.
pub fn read_matrix_market(path: &Path) -> Result<SparseMat> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, path)
}

fn parse_matrix_market(text: &str, path: &Path) -> Result<SparseMat> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::parse(path, 1, "missing %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::parse(path, 1, format!("unsupported format '{}'", tokens[2])));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(Error::parse(path, 1, format!("unsupported field '{}'", tokens[3])));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::parse(path, 1, format!("unsupported symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trips = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let mut it = line.split_whitespace();
        match size {
            None => {
                let mut next = || -> Result<usize> {
                    it.next()
                        .ok_or_else(|| Error::parse(path, lineno, "size line needs three integers"))?
                        .parse()
                        .map_err(|e| Error::parse(path, lineno, format!("bad size: {e}")))
                };
                let s = (next()?, next()?, next()?);
                trips.reserve(s.2);
                size = Some(s);
            }
            Some((nr, nc, _)) => {
                let mut field = |what: &str| {
                    it.next()
                        .ok_or_else(|| Error::parse(path, lineno, format!("missing {what}")))
                };
                let i: usize = field("row")?
                    .parse()
                    .map_err(|e| Error::parse(path, lineno, format!("bad row index: {e}")))?;
                let j: usize = field("column")?
                    .parse()
                    .map_err(|e| Error::parse(path, lineno, format!("bad column index: {e}")))?;
                let v: f64 = field("value")?
                    .parse()
                    .map_err(|e| Error::parse(path, lineno, format!("bad value: {e}")))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("entry ({i}, {j}) outside {nr}x{nc}"),
                    ));
                }
                trips.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    trips.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| Error::parse(path, 1, "missing size line"))?;
    let stored = if symmetric {
        trips.iter().filter(|t| t.0 >= t.1).count()
    } else {
        trips.len()
    };
    if stored != nnz {
        return Err(Error::parse(
            path,
            0,
            format!("header declares {nnz} entries, found {stored}"),
        ));
    }
    SparseMat::from_triplets(nr, nc, &trips)
}

/// Matrix Market text; values use the shortest representation that parses back exactly.
pub fn matrix_market_string(m: &SparseMat) -> String {
    let mut out = String::with_capacity(32 * m.nnz() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for (i, j, v) in m.triplets() {
        let _ = writeln!(out, "{} {} {:e}", i + 1, j + 1, v);
    }
    out
}

pub fn write_matrix_market(path: &Path, m: &SparseMat) -> Result<()> {
    fs::write(path, matrix_market_string(m)).map_err(|e| Error::io(path, e))
}

/// Resolves either a manifest file or a directory containing `manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_NAME)
    } else {
        path.to_path_buf()
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let path = manifest_path(path);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))
}

/// Loads and validates a system; `J4` and `E1` are factored on the way in.
pub fn load_system(path: &Path) -> Result<Index1System> {
    let manifest_file = manifest_path(path);
    let man = read_manifest(&manifest_file)?;
    let base = manifest_file.parent().unwrap_or_else(|| Path::new("."));
    let read = |name: &str, file: &str, shape: (usize, usize)| -> Result<SparseMat> {
        let m = read_matrix_market(&base.join(file))?;
        if m.shape() != shape {
            return Err(Error::dims(format!(
                "{name} in {file} is {}x{}, manifest implies {}x{}",
                m.nrows(),
                m.ncols(),
                shape.0,
                shape.1
            )));
        }
        Ok(m)
    };
    let Manifest { n1, n2, p, m, .. } = man;
    let blocks = SystemBlocks {
        e1: read("E1", &man.e1, (n1, n1))?,
        j1: read("J1", &man.j1, (n1, n1))?,
        j2: read("J2", &man.j2, (n1, n2))?,
        j3: read("J3", &man.j3, (n2, n1))?,
        j4: read("J4", &man.j4, (n2, n2))?,
        b1: read("B1", &man.b1, (n1, p))?,
        b2: read("B2", &man.b2, (n2, p))?,
        c1: read("C1", &man.c1, (m, n1))?,
        c2: read("C2", &man.c2, (m, n2))?,
        d: read("D", &man.d, (m, p))?.to_dense(),
    };
    Index1System::new(blocks)
}

/// Writes the ten blocks and `manifest.json` into `dir`, creating it if needed.
pub fn write_system(sys: &Index1System, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let man = Manifest::standard(sys.n1(), sys.n2(), sys.p(), sys.m());
    let b = sys.blocks();
    let d = SparseMat::from_dense(&b.d, 0.0);
    for (file, mat) in [
        (&man.e1, &b.e1),
        (&man.j1, &b.j1),
        (&man.j2, &b.j2),
        (&man.j3, &b.j3),
        (&man.j4, &b.j4),
        (&man.b1, &b.b1),
        (&man.b2, &b.b2),
        (&man.c1, &b.c1),
        (&man.c2, &b.c2),
        (&man.d, &d),
    ] {
        write_matrix_market(&dir.join(file), mat)?;
    }
    let path = dir.join(MANIFEST_NAME);
    let text = serde_json::to_string_pretty(&man).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
