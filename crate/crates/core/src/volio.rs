//! Text file formats.
//!
//! Effects tables use the `PREVMAP-EFFECTS v1` layout:
//!
//! ```text
//! PREVMAP-EFFECTS v1
//! dims <nx> <ny> <nz>
//! subjects <n>
//! voxels <m>
//! <linear_index>,<e_1>,...,<e_n>      (m lines)
//! ```
//!
//! Parameter maps and truth volumes are CSV; slices are plain PGM (`P2`).
//! Floats are written in their shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::em::{donoho_threshold, VoxelFit};
use crate::error::{Error, Result};
use crate::model::{EffectsTable, MixtureParams};
use crate::pipeline::Analysis;
use crate::volume::{Dims, VoxelMap};

pub const EFFECTS_MAGIC: &str = "PREVMAP-EFFECTS v1";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn format_effects_table(table: &EffectsTable) -> String {
    let d = table.dims();
    let mut s = format!(
        "{EFFECTS_MAGIC}\ndims {} {} {}\nsubjects {}\nvoxels {}\n",
        d.nx,
        d.ny,
        d.nz,
        table.n_subjects(),
        table.n_voxels()
    );
    for (&v, row) in table.voxel_index().iter().zip(table.rows()) {
        write!(s, "{v}").unwrap();
        for x in row {
            write!(s, ",{x}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn header_values<const N: usize>(path: &Path, line: usize, text: Option<&str>, key: &str) -> Result<[usize; N]> {
    let text = text.ok_or_else(|| parse_err(path, line, format!("missing '{key}' line")))?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(key) {
        return Err(parse_err(path, line, format!("expected '{key} ...', found '{text}'")));
    }
    let vals: Vec<usize> = parts
        .map(|p| {
            p.parse::<usize>()
                .map_err(|_| parse_err(path, line, format!("'{p}' is not a non-negative integer")))
        })
        .collect::<Result<_>>()?;
    vals.try_into()
        .map_err(|v: Vec<usize>| parse_err(path, line, format!("'{key}' needs {N} values, found {}", v.len())))
}

/// Parses effects-table text; `path` only labels error messages.
pub fn parse_effects_table(text: &str, path: &Path) -> Result<EffectsTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.trim_end() == EFFECTS_MAGIC => {}
        other => {
            return Err(parse_err(
                path,
                1,
                format!("expected '{EFFECTS_MAGIC}', found '{}'", other.unwrap_or("")),
            ))
        }
    }
    let [nx, ny, nz] = header_values::<3>(path, 2, lines.next(), "dims")?;
    let [n] = header_values::<1>(path, 3, lines.next(), "subjects")?;
    let [m] = header_values::<1>(path, 4, lines.next(), "voxels")?;
    let dims = Dims::new(nx, ny, nz).map_err(|e| parse_err(path, 2, e.to_string()))?;
    if n == 0 {
        return Err(parse_err(path, 3, "number of subjects must be positive"));
    }
    let mut voxel_index = Vec::with_capacity(m);
    let mut effects = Vec::with_capacity(m.saturating_mul(n).min(1 << 28));
    let mut line_no = 4;
    for _ in 0..m {
        line_no += 1;
        let line = lines
            .next()
            .ok_or_else(|| parse_err(path, line_no, format!("expected {m} voxel rows, file ends early")))?;
        let mut fields = line.trim_end().split(',');
        let idx = fields.next().unwrap_or("");
        voxel_index.push(
            idx.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(path, line_no, format!("bad voxel index '{idx}'")))?,
        );
        let before = effects.len();
        for f in fields {
            let x = f
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(path, line_no, format!("bad number '{f}'")))?;
            effects.push(x);
        }
        let got = effects.len() - before;
        if got != n {
            return Err(parse_err(path, line_no, format!("expected {n} effects, found {got}")));
        }
    }
    for rest in lines {
        line_no += 1;
        if !rest.trim().is_empty() {
            return Err(parse_err(path, line_no, "unexpected content after the last voxel row"));
        }
    }
    EffectsTable::new(dims, voxel_index, effects, n)
}

pub fn read_effects_table(path: &Path) -> Result<EffectsTable> {
    parse_effects_table(&read_text(path)?, path)
}

pub fn write_effects_table(path: &Path, table: &EffectsTable) -> Result<()> {
    write_text(path, &format_effects_table(table))
}

/// One row of a parameter map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterMapRecord {
    pub voxel_index: usize,
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub mu: f64,
    pub var1: f64,
    pub var2: f64,
    pub var3: f64,
    pub loglik: f64,
    pub thresholded: bool,
    /// NaN when the voxel could not be tested.
    pub wilcoxon_stat: f64,
    /// NaN before testing; 1 for voxels that could not be tested.
    pub p_value: f64,
    pub q_value: f64,
    pub reject: bool,
    pub signed_prevalence: f64,
}

pub const PARAMETER_MAP_HEADER: &str = "voxel_index,x,y,z,p1,p2,p3,mu,var1,var2,var3,loglik,thresholded,wilcoxon_stat,p_value,q_value,reject,signed_prevalence";

impl ParameterMapRecord {
    /// A record holding only the fit; test columns are NaN / false.
    pub fn from_fit(dims: Dims, voxel_index: usize, fit: &VoxelFit) -> Self {
        let [x, y, z] = dims.coords(voxel_index);
        let p = &fit.params;
        ParameterMapRecord {
            voxel_index,
            x,
            y,
            z,
            p1: p.p1(),
            p2: p.p2(),
            p3: p.p3(),
            mu: p.mu(),
            var1: p.var1(),
            var2: p.var2(),
            var3: p.var3(),
            loglik: fit.loglik,
            thresholded: fit.thresholded,
            wilcoxon_stat: f64::NAN,
            p_value: f64::NAN,
            q_value: f64::NAN,
            reject: false,
            signed_prevalence: 0.0,
        }
    }

    pub fn params(&self) -> Result<MixtureParams> {
        MixtureParams::new(self.p1, self.p2, self.p3, self.mu, self.var1, self.var2, self.var3)
    }

    /// The stored fit. Iteration counts are not part of the format and come
    /// back as zero.
    pub fn to_fit(&self) -> Result<VoxelFit> {
        let params = self.params()?;
        Ok(VoxelFit {
            params,
            loglik: self.loglik,
            converged: true,
            n_iter: 0,
            n_starts_tried: 0,
            thresholded: self.thresholded,
            threshold_value: donoho_threshold(&params),
            unconstrained: params,
        })
    }

    /// Checks the coordinates against `dims`.
    pub fn check(&self, dims: &Dims) -> Result<()> {
        if self.voxel_index >= dims.len() || dims.coords(self.voxel_index) != [self.x, self.y, self.z] {
            return Err(Error::InvariantViolation(format!(
                "voxel {} does not sit at ({}, {}, {}) in a {}x{}x{} grid",
                self.voxel_index, self.x, self.y, self.z, dims.nx, dims.ny, dims.nz
            )));
        }
        Ok(())
    }

    fn write_row(&self, s: &mut String) {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.voxel_index,
            self.x,
            self.y,
            self.z,
            self.p1,
            self.p2,
            self.p3,
            self.mu,
            self.var1,
            self.var2,
            self.var3,
            self.loglik,
            self.thresholded as u8,
            self.wilcoxon_stat,
            self.p_value,
            self.q_value,
            self.reject as u8,
            self.signed_prevalence
        )
        .unwrap();
    }
}

/// Full records (fit plus test columns) for an analysed table.
pub fn analysis_records(table: &EffectsTable, analysis: &Analysis) -> Vec<ParameterMapRecord> {
    let dims = table.dims();
    table
        .voxel_index()
        .iter()
        .enumerate()
        .map(|(r, &v)| {
            let test = analysis.tests[r];
            ParameterMapRecord {
                wilcoxon_stat: test.map_or(f64::NAN, |t| t.statistic),
                p_value: test.map_or(1.0, |t| t.p_value),
                q_value: analysis.fdr.q_values[r],
                reject: analysis.fdr.reject[r],
                signed_prevalence: analysis.signed_prevalence[r],
                ..ParameterMapRecord::from_fit(dims, v, &analysis.fits[r])
            }
        })
        .collect()
}

/// CSV text of `records`, sorted by voxel index.
pub fn format_parameter_map(records: &[ParameterMapRecord]) -> String {
    let mut sorted: Vec<&ParameterMapRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.voxel_index);
    let mut s = String::with_capacity(64 + 200 * records.len());
    s.push_str(PARAMETER_MAP_HEADER);
    s.push('\n');
    for r in sorted {
        r.write_row(&mut s);
    }
    s
}

pub fn write_parameter_map(path: &Path, records: &[ParameterMapRecord]) -> Result<()> {
    write_text(path, &format_parameter_map(records))
}

fn field<T: FromStr>(path: &Path, line: usize, name: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad {name} '{s}'")))
}

fn flag(path: &Path, line: usize, name: &str, s: &str) -> Result<bool> {
    match s.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(parse_err(path, line, format!("{name} must be 0 or 1, found '{s}'"))),
    }
}

pub fn parse_parameter_map(text: &str, path: &Path) -> Result<Vec<ParameterMapRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == PARAMETER_MAP_HEADER => {}
        _ => return Err(parse_err(path, 1, "missing or wrong parameter map header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 18 {
            return Err(parse_err(path, n, format!("expected 18 fields, found {}", f.len())));
        }
        out.push(ParameterMapRecord {
            voxel_index: field(path, n, "voxel_index", f[0])?,
            x: field(path, n, "x", f[1])?,
            y: field(path, n, "y", f[2])?,
            z: field(path, n, "z", f[3])?,
            p1: field(path, n, "p1", f[4])?,
            p2: field(path, n, "p2", f[5])?,
            p3: field(path, n, "p3", f[6])?,
            mu: field(path, n, "mu", f[7])?,
            var1: field(path, n, "var1", f[8])?,
            var2: field(path, n, "var2", f[9])?,
            var3: field(path, n, "var3", f[10])?,
            loglik: field(path, n, "loglik", f[11])?,
            thresholded: flag(path, n, "thresholded", f[12])?,
            wilcoxon_stat: field(path, n, "wilcoxon_stat", f[13])?,
            p_value: field(path, n, "p_value", f[14])?,
            q_value: field(path, n, "q_value", f[15])?,
            reject: flag(path, n, "reject", f[16])?,
            signed_prevalence: field(path, n, "signed_prevalence", f[17])?,
        });
    }
    Ok(out)
}

pub fn read_parameter_map(path: &Path) -> Result<Vec<ParameterMapRecord>> {
    parse_parameter_map(&read_text(path)?, path)
}

/// CSV `voxel_index,x,y,z,value` for a map.
pub fn format_volume_csv(map: &VoxelMap) -> String {
    let mut s = String::from("voxel_index,x,y,z,value\n");
    for (&v, x) in map.voxel_index.iter().zip(&map.values) {
        let [i, j, k] = map.dims.coords(v);
        writeln!(s, "{v},{i},{j},{k},{x}").unwrap();
    }
    s
}

/// Slicing axis of a rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            _ => Err(Error::InvalidOption(format!("axis must be x, y or z, got '{s}'"))),
        }
    }
}

/// Grey level of `v` for the range `[lo, hi]`, rounding halves up.
pub fn grey_level(v: f64, lo: f64, hi: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    let t = (v.clamp(lo, hi) - lo) / (hi - lo);
    (t * 255.0 + 0.5).floor().min(255.0) as u8
}

/// Plain PGM of one slice. Rows run along the first remaining axis:
/// a `z` slice is `nx` wide and `ny` tall. Voxels outside the map are 0.
pub fn render_pgm_slice(map: &VoxelMap, axis: Axis, slice: usize, range: (f64, f64)) -> Result<String> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidOption(format!("value range needs min < max, got [{lo}, {hi}]")));
    }
    let d = map.dims;
    let (limit, w, h) = match axis {
        Axis::X => (d.nx, d.ny, d.nz),
        Axis::Y => (d.ny, d.nx, d.nz),
        Axis::Z => (d.nz, d.nx, d.ny),
    };
    if slice >= limit {
        return Err(Error::IndexOutOfRange(format!(
            "slice {slice} along {axis:?} of extent {limit}"
        )));
    }
    let dense = map.to_dense(f64::NAN);
    let mut s = format!("P2\n{w} {h}\n255\n");
    for r in 0..h {
        let row: Vec<String> = (0..w)
            .map(|c| {
                let i = match axis {
                    Axis::X => d.index(slice, c, r),
                    Axis::Y => d.index(c, slice, r),
                    Axis::Z => d.index(c, r, slice),
                };
                grey_level(dense[i], lo, hi).to_string()
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    Ok(s)
}
