//! JSON instance files for QMI problems.
//!
//! ```json
//! {
//!   "name": "deg-twin", "n": 1, "m": 2, "s": 0,
//!   "f": { "c0": 0.0, "c": [1.0], "Q": [[0.0]] },
//!   "G": { "A0": [[0.0, 0.0], [0.0, 0.0]], "A": [[[1.0, 0.0], [0.0, 1.0]]] },
//!   "h": { "b": [], "H": [] },
//!   "x0": [1.0]
//! }
//! ```
//!
//! `G.B` (an n×n table of m×m matrices) and `h.M` (s matrices of order n)
//! are optional; absent means the map is affine. `x0` and `xstar` are
//! optional hints for tracing and for the limit computations.

use std::path::{Path, PathBuf};

use cpath_core::{Mat, QmiData, QmiInstance, SymMat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Rows = Vec<Vec<f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmiFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub f: FPart,
    #[serde(rename = "G")]
    pub g: GPart,
    pub h: HPart,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xstar: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FPart {
    #[serde(default)]
    pub c0: f64,
    pub c: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Rows,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GPart {
    #[serde(rename = "A0")]
    pub a0: Rows,
    #[serde(rename = "A")]
    pub a: Vec<Rows>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<Rows>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HPart {
    pub b: Vec<f64>,
    #[serde(rename = "H")]
    pub h: Rows,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Rows>>,
}

/// An instance read from disk, with its optional point hints.
#[derive(Clone, Debug)]
pub struct LoadedQmi {
    pub instance: QmiInstance,
    pub x0: Option<Vec<f64>>,
    pub xstar: Option<Vec<f64>>,
}

struct Shapes<'a> {
    path: &'a Path,
}

impl Shapes<'_> {
    fn fail(&self, reason: String) -> Error {
        Error::InvalidFile {
            path: self.path.to_path_buf(),
            reason,
        }
    }

    fn vector(&self, what: &str, v: &[f64], len: usize) -> Result<Vec<f64>> {
        if v.len() != len {
            return Err(self.fail(format!("{what} has length {}, expected {len}", v.len())));
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(self.fail(format!("{what} has a non-finite entry {bad}")));
        }
        Ok(v.to_vec())
    }

    fn matrix(&self, what: &str, rows: &Rows, r: usize, c: usize) -> Result<Mat> {
        if rows.len() != r {
            return Err(self.fail(format!("{what} has {} rows, expected {r}", rows.len())));
        }
        let mut out = Mat::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            let row = self.vector(&format!("{what} row {i}"), row, c)?;
            for (j, v) in row.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    fn sym(&self, what: &str, rows: &Rows, m: usize) -> Result<SymMat> {
        let mat = self.matrix(what, rows, m, m)?;
        SymMat::from_mat(mat, what).map_err(|e| self.fail(e.to_string()))
    }
}

impl QmiFile {
    pub fn into_loaded(self, path: &Path) -> Result<LoadedQmi> {
        let sh = Shapes { path };
        let (n, m, s) = (self.n, self.m, self.s);
        if n == 0 || m == 0 {
            return Err(sh.fail(format!("need n ≥ 1 and m ≥ 1, got n={n}, m={m}")));
        }
        if self.g.a.len() != n {
            return Err(sh.fail(format!("G.A has {} matrices, expected {n}", self.g.a.len())));
        }
        let a = (0..n)
            .map(|i| sh.sym(&format!("G.A[{i}]"), &self.g.a[i], m))
            .collect::<Result<Vec<_>>>()?;
        let b_quad = match &self.g.b {
            None => None,
            Some(table) => {
                if table.len() != n {
                    return Err(sh.fail(format!("G.B has {} rows, expected {n}", table.len())));
                }
                let mut flat = Vec::with_capacity(n * n);
                for (i, row) in table.iter().enumerate() {
                    if row.len() != n {
                        return Err(sh.fail(format!("G.B row {i} has {} entries, expected {n}", row.len())));
                    }
                    for (j, bij) in row.iter().enumerate() {
                        flat.push(sh.sym(&format!("G.B[{i}][{j}]"), bij, m)?);
                    }
                }
                Some(flat)
            }
        };
        let m_quad = match &self.h.m {
            None => None,
            Some(ms) => {
                if ms.len() != s {
                    return Err(sh.fail(format!("h.M has {} matrices, expected {s}", ms.len())));
                }
                Some(
                    ms.iter()
                        .enumerate()
                        .map(|(k, mk)| sh.sym(&format!("h.M[{k}]"), mk, n))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
        };
        let data = QmiData {
            c0: self.f.c0,
            c: sh.vector("f.c", &self.f.c, n)?,
            q: sh.sym("f.Q", &self.f.q, n)?,
            a0: sh.sym("G.A0", &self.g.a0, m)?,
            a,
            b_quad,
            b: sh.vector("h.b", &self.h.b, s)?,
            h_lin: sh.matrix("h.H", &self.h.h, s, n)?,
            m_quad,
        };
        let x0 = self.x0.as_deref().map(|v| sh.vector("x0", v, n)).transpose()?;
        let xstar = self.xstar.as_deref().map(|v| sh.vector("xstar", v, n)).transpose()?;
        let instance = QmiInstance::new(self.name, self.description, data).map_err(|e| sh.fail(e.to_string()))?;
        Ok(LoadedQmi { instance, x0, xstar })
    }

    pub fn from_instance(inst: &QmiInstance, x0: Option<&[f64]>, xstar: Option<&[f64]>) -> Self {
        let d = &inst.data;
        let (n, s) = (d.n(), d.s());
        let rows = |m: &Mat| -> Rows { (0..m.rows()).map(|i| m.row(i).to_vec()).collect() };
        let sym_rows = |m: &SymMat| rows(m.as_mat());
        QmiFile {
            name: inst.name.clone(),
            description: inst.description.clone(),
            n,
            m: d.m(),
            s,
            f: FPart {
                c0: d.c0,
                c: d.c.clone(),
                q: sym_rows(&d.q),
            },
            g: GPart {
                a0: sym_rows(&d.a0),
                a: d.a.iter().map(sym_rows).collect(),
                b: d.b_quad.as_ref().map(|t| {
                    (0..n)
                        .map(|i| (0..n).map(|j| sym_rows(&t[i * n + j])).collect())
                        .collect()
                }),
            },
            h: HPart {
                b: d.b.clone(),
                h: rows(&d.h_lin),
                m: d.m_quad.as_ref().map(|ms| ms.iter().map(sym_rows).collect()),
            },
            x0: x0.map(<[f64]>::to_vec),
            xstar: xstar.map(<[f64]>::to_vec),
        }
    }
}

pub fn parse_qmi(text: &str, path: &Path) -> Result<LoadedQmi> {
    let file: QmiFile = serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    file.into_loaded(path)
}

pub fn load_qmi(path: &Path) -> Result<LoadedQmi> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_qmi(&text, path)
}

pub fn qmi_to_json(inst: &QmiInstance, x0: Option<&[f64]>, xstar: Option<&[f64]>) -> String {
    serde_json::to_string_pretty(&QmiFile::from_instance(inst, x0, xstar)).expect("finite QMI data serializes")
}

pub fn save_qmi(path: &Path, inst: &QmiInstance, x0: Option<&[f64]>, xstar: Option<&[f64]>) -> Result<()> {
    std::fs::write(path, qmi_to_json(inst, x0, xstar)).map_err(|source| Error::Io {
        path: PathBuf::from(path),
        source,
    })
}
