//! Problem export and import.
//!
//! A problem directory holds `A.mtx` (velocity block), `B.mtx` (divergence
//! block), `f.vec` (right-hand side `[f_u; f_p]`), `coords.txt` and, when
//! available, the mass matrices `Mv.mtx` and `Mp.mtx`.
//!
//! `coords.txt` layout:
//!
//! ```text
//! velocity <n_nodes>
//! <x> <y> <dirichlet_x 0|1> <dirichlet_y 0|1>     (one line per scalar node)
//! pressure <n_p> nullspace <0|1>
//! <x> <y> <co-located velocity node>              (one line per pressure)
//! ```
//! Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use q2q1_amg::fem::SaddleSystem;
use q2q1_amg::io::{read_matrix_market, read_vector, write_matrix_market, write_vector};
use q2q1_amg::{Error, SparseMatrix};

use crate::CliError;

/// A fine-level system with everything needed to build a hierarchy.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub label: String,
    pub refinement: Option<usize>,
    pub system: SaddleSystem,
    pub coords_v: Vec<[f64; 2]>,
    pub coords_p: Vec<[f64; 2]>,
    /// Full velocity mass (both components) and pressure mass.
    pub masses: Option<(SparseMatrix, SparseMatrix)>,
    /// Picard steps and final nonlinear residual when the system came from
    /// a Navier-Stokes solve.
    pub picard: Option<(usize, f64)>,
}

pub const MANIFEST: [&str; 4] = ["A.mtx", "B.mtx", "f.vec", "coords.txt"];

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io { path: path.into(), source })
}

fn parse_at<T>(path: &Path, r: Result<T, Error>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Parse { path: path.into(), source })
}

pub fn write_matrix(path: &Path, a: &SparseMatrix) -> Result<(), CliError> {
    write_file(path, &write_matrix_market(a))
}

pub fn read_matrix(path: &Path) -> Result<SparseMatrix, CliError> {
    let text = read_file(path)?;
    parse_at(path, read_matrix_market(&text))
}

pub fn coords_text(p: &LoadedProblem) -> String {
    let sys = &p.system;
    let ns = sys.n_velocity() / 2;
    let mut s = String::new();
    let _ = writeln!(s, "# x y dirichlet_x dirichlet_y");
    let _ = writeln!(s, "velocity {ns}");
    for (v, c) in p.coords_v.iter().enumerate() {
        let _ = writeln!(s, "{:.16e} {:.16e} {} {}", c[0], c[1], sys.dirichlet[v] as u8, sys.dirichlet[ns + v] as u8);
    }
    let _ = writeln!(s, "# x y co-located velocity node");
    let _ = writeln!(s, "pressure {} nullspace {}", sys.n_pressure(), sys.pressure_nullspace as u8);
    for (c, &v) in p.coords_p.iter().zip(&sys.colocation) {
        let _ = writeln!(s, "{:.16e} {:.16e} {}", c[0], c[1], v);
    }
    s
}

struct Coords {
    coords_v: Vec<[f64; 2]>,
    dirichlet: Vec<[bool; 2]>,
    coords_p: Vec<[f64; 2]>,
    colocation: Vec<usize>,
    nullspace: bool,
}

fn parse_coords(text: &str) -> Result<Coords, Error> {
    let err = |line: usize, message: String| Error::Parse { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")));
    let num = |line: usize, tok: Option<&str>| -> Result<f64, Error> {
        let tok = tok.ok_or_else(|| err(line, "missing field".into()))?;
        tok.parse().map_err(|_| err(line, format!("invalid number '{tok}'")))
    };
    let int = |line: usize, tok: Option<&str>| -> Result<usize, Error> {
        let tok = tok.ok_or_else(|| err(line, "missing field".into()))?;
        tok.parse().map_err(|_| err(line, format!("invalid integer '{tok}'")))
    };
    let flag = |line: usize, tok: Option<&str>| -> Result<bool, Error> {
        match tok {
            Some("0") => Ok(false),
            Some("1") => Ok(true),
            other => Err(err(line, format!("expected 0 or 1, found {other:?}"))),
        }
    };

    let (ln, l) = next("velocity header")?;
    let mut t = l.split_whitespace();
    if t.next() != Some("velocity") {
        return Err(err(ln, "expected 'velocity <count>'".into()));
    }
    let nv = int(ln, t.next())?;
    let mut coords_v = Vec::with_capacity(nv);
    let mut dirichlet = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next("velocity node")?;
        let mut t = l.split_whitespace();
        coords_v.push([num(ln, t.next())?, num(ln, t.next())?]);
        dirichlet.push([flag(ln, t.next())?, flag(ln, t.next())?]);
    }
    let (ln, l) = next("pressure header")?;
    let mut t = l.split_whitespace();
    if t.next() != Some("pressure") {
        return Err(err(ln, "expected 'pressure <count> nullspace <0|1>'".into()));
    }
    let np = int(ln, t.next())?;
    if t.next() != Some("nullspace") {
        return Err(err(ln, "expected 'nullspace' after the pressure count".into()));
    }
    let nullspace = flag(ln, t.next())?;
    let mut coords_p = Vec::with_capacity(np);
    let mut colocation = Vec::with_capacity(np);
    for _ in 0..np {
        let (ln, l) = next("pressure node")?;
        let mut t = l.split_whitespace();
        coords_p.push([num(ln, t.next())?, num(ln, t.next())?]);
        let v = int(ln, t.next())?;
        if v >= nv {
            return Err(err(ln, format!("co-located node {v} out of range")));
        }
        colocation.push(v);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing data".into()));
    }
    Ok(Coords { coords_v, dirichlet, coords_p, colocation, nullspace })
}

/// Writes the problem files into `dir` and returns the paths written.
pub fn export_problem(dir: &Path, p: &LoadedProblem) -> Result<Vec<PathBuf>, CliError> {
    create_dir(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<(), CliError> {
        let path = dir.join(name);
        write_file(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put("A.mtx", write_matrix_market(&p.system.a))?;
    put("B.mtx", write_matrix_market(&p.system.b))?;
    put("f.vec", write_vector(&p.system.rhs()))?;
    put("coords.txt", coords_text(p))?;
    if let Some((mv, mp)) = &p.masses {
        put("Mv.mtx", write_matrix_market(mv))?;
        put("Mp.mtx", write_matrix_market(mp))?;
    }
    Ok(written)
}

/// Reads a directory written by [`export_problem`].
pub fn import_problem(dir: &Path) -> Result<LoadedProblem, CliError> {
    let a = read_matrix(&dir.join("A.mtx"))?;
    let b = read_matrix(&dir.join("B.mtx"))?;
    let f_path = dir.join("f.vec");
    let f = parse_at(&f_path, read_vector(&read_file(&f_path)?))?;
    let c_path = dir.join("coords.txt");
    let c = parse_at(&c_path, parse_coords(&read_file(&c_path)?))?;
    let nv = a.n_rows();
    if f.len() != nv + b.n_rows() {
        return Err(CliError::Inconsistent(format!(
            "{}: {} entries, expected {}",
            f_path.display(),
            f.len(),
            nv + b.n_rows()
        )));
    }
    let ns = c.coords_v.len();
    let mut dirichlet = vec![false; 2 * ns];
    for (v, d) in c.dirichlet.iter().enumerate() {
        dirichlet[v] = d[0];
        dirichlet[ns + v] = d[1];
    }
    let system = SaddleSystem {
        a,
        b,
        f_u: f[..nv].to_vec(),
        f_p: f[nv..].to_vec(),
        colocation: c.colocation,
        pressure_nullspace: c.nullspace,
        dirichlet,
    };
    system.validate().map_err(|source| CliError::Parse { path: dir.into(), source })?;
    if system.n_velocity() != 2 * ns || system.n_pressure() != c.coords_p.len() {
        return Err(CliError::Inconsistent(format!("{}: node counts do not match the matrices", c_path.display())));
    }
    let (mv_path, mp_path) = (dir.join("Mv.mtx"), dir.join("Mp.mtx"));
    let masses = if mv_path.exists() && mp_path.exists() {
        Some((read_matrix(&mv_path)?, read_matrix(&mp_path)?))
    } else {
        None
    };
    Ok(LoadedProblem {
        label: format!("import:{}", dir.display()),
        refinement: None,
        system,
        coords_v: c.coords_v,
        coords_p: c.coords_p,
        masses,
        picard: None,
    })
}
