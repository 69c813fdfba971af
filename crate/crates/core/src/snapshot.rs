//! Plain-text persistence of slices and densities.
//!
//! A snapshot file holds one field on one slice:
//!
//! ```text
//! # ricci-lab snapshot v1
//! kind = sphere_radial
//! n = 3
//! time = -5e-1
//! field = warp
//! scale = 1.4142135623730951
//! #data
//! 1.2e-2
//! ...
//! ```
//!
//! A manifest lists the snapshot files of a run in increasing time order,
//! optionally tagged with the kernel basepoint:
//!
//! ```text
//! # ricci-lab manifest v1
//! kind = euclidean_radial
//! basepoint = north
//! base_time = 0
//! slice -1e0 slice_0000.txt
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::conjugate_heat::DensityFlow;
use crate::error::{Error, Result};
use crate::geometry::{MetricSlice, ModelKind, Point};

const SNAPSHOT_HEADER: &str = "# ricci-lab snapshot v1";
const MANIFEST_HEADER: &str = "# ricci-lab manifest v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// Radial warping function `φ`.
    Warp,
    /// Conformal exponent `v` of the torus metric `e^{2v}(dx² + dy²)`.
    Conformal,
    Density,
}

impl FieldKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Warp => "warp",
            FieldKind::Conformal => "conformal",
            FieldKind::Density => "density",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "warp" => Some(FieldKind::Warp),
            "conformal" => Some(FieldKind::Conformal),
            "density" => Some(FieldKind::Density),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SliceSnapshot {
    pub kind: ModelKind,
    pub n: usize,
    pub time: f64,
    pub field: FieldKind,
    /// Radial scale factor, present on radial models.
    pub scale: Option<f64>,
    pub values: Vec<f64>,
}

impl SliceSnapshot {
    /// The metric of the slice: warp on radial models, conformal exponent on the torus.
    pub fn metric(slice: &MetricSlice) -> Self {
        let (field, values) = match slice.conformal_exponent() {
            Some(v) => (FieldKind::Conformal, v.to_vec()),
            None => (FieldKind::Warp, slice.warp().to_vec()),
        };
        SliceSnapshot {
            kind: slice.kind(),
            n: slice.dim(),
            time: slice.time(),
            field,
            scale: slice.scale(),
            values,
        }
    }

    pub fn density(slice: &MetricSlice, u: &[f64]) -> Self {
        SliceSnapshot {
            field: FieldKind::Density,
            values: u.to_vec(),
            ..Self::metric(slice)
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SNAPSHOT_HEADER}");
        let _ = writeln!(out, "kind = {}", self.kind.as_str());
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "time = {:e}", self.time);
        let _ = writeln!(out, "field = {}", self.field.as_str());
        if let Some(s) = self.scale {
            let _ = writeln!(out, "scale = {s:e}");
        }
        out.push_str("#data\n");
        for v in &self.values {
            let _ = writeln!(out, "{v:e}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        expect_header(&mut lines, SNAPSHOT_HEADER)?;
        let (mut kind, mut n, mut time, mut field, mut scale) = (None, None, None, None, None);
        let mut data_line = None;
        for (line, l) in lines.by_ref() {
            if l.is_empty() {
                continue;
            }
            if l == "#data" {
                data_line = Some(line);
                break;
            }
            let (key, value) = key_value(line, l)?;
            match key {
                "kind" => set_once(&mut kind, line, key, parse_kind(line, value)?)?,
                "n" => set_once(&mut n, line, key, parse_dim(line, value)?)?,
                "time" => set_once(&mut time, line, key, parse_finite(line, value)?)?,
                "field" => set_once(
                    &mut field,
                    line,
                    key,
                    FieldKind::parse(value).ok_or_else(|| parse_err(line, format!("unknown field `{value}`")))?,
                )?,
                "scale" => {
                    let s = parse_finite(line, value)?;
                    if !(s > 0.0) {
                        return Err(parse_err(line, "scale must be positive"));
                    }
                    set_once(&mut scale, line, key, s)?
                }
                other => return Err(parse_err(line, format!("unknown key `{other}`"))),
            }
        }
        let Some(end) = data_line else {
            return Err(parse_err(text.lines().count(), "missing #data section"));
        };
        let missing = |k: &str| parse_err(end, format!("missing key `{k}`"));
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let time = time.ok_or_else(|| missing("time"))?;
        let field = field.ok_or_else(|| missing("field"))?;
        if kind.is_radial() != scale.is_some() {
            return Err(parse_err(end, "scale is required exactly on radial models"));
        }
        if kind == ModelKind::FlatTorusConformal && n != 2 {
            return Err(parse_err(end, "torus snapshots have n = 2"));
        }
        let compatible = match field {
            FieldKind::Warp => kind.is_radial(),
            FieldKind::Conformal => !kind.is_radial(),
            FieldKind::Density => true,
        };
        if !compatible {
            return Err(parse_err(end, format!("field {} on {}", field.as_str(), kind.as_str())));
        }
        let mut values = Vec::new();
        for (line, l) in lines {
            if l.is_empty() {
                continue;
            }
            let v = parse_finite(line, l)?;
            if v < 0.0 && field == FieldKind::Density {
                return Err(parse_err(line, "negative density"));
            }
            if v <= 0.0 && field == FieldKind::Warp {
                return Err(parse_err(line, "warp must be positive"));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(parse_err(end, "no values"));
        }
        Ok(SliceSnapshot {
            kind,
            n,
            time,
            field,
            scale,
            values,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub time: f64,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub kind: ModelKind,
    pub basepoint: Option<Point>,
    pub base_time: Option<f64>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MANIFEST_HEADER}");
        let _ = writeln!(out, "kind = {}", self.kind.as_str());
        if let Some(p) = self.basepoint {
            let _ = writeln!(out, "basepoint = {}", p.label());
        }
        if let Some(t) = self.base_time {
            let _ = writeln!(out, "base_time = {t:e}");
        }
        for e in &self.entries {
            let _ = writeln!(out, "slice {:e} {}", e.time, e.file);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        expect_header(&mut lines, MANIFEST_HEADER)?;
        let (mut kind, mut basepoint, mut base_time) = (None, None, None);
        let mut entries: Vec<ManifestEntry> = Vec::new();
        let mut last_line = 1;
        for (line, l) in lines {
            last_line = line;
            if l.is_empty() {
                continue;
            }
            if let Some(rest) = l.strip_prefix("slice ") {
                let mut parts = rest.split_whitespace();
                let (Some(t), Some(file), None) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(parse_err(line, "expected `slice <time> <file>`"));
                };
                let time = parse_finite(line, t)?;
                if !valid_file_name(file) {
                    return Err(parse_err(line, format!("invalid file name `{file}`")));
                }
                if entries.last().is_some_and(|e| e.time >= time) {
                    return Err(parse_err(line, "slice times must increase"));
                }
                entries.push(ManifestEntry {
                    time,
                    file: file.to_string(),
                });
                continue;
            }
            if !entries.is_empty() {
                return Err(parse_err(line, "header keys must precede slices"));
            }
            let (key, value) = key_value(line, l)?;
            match key {
                "kind" => set_once(&mut kind, line, key, parse_kind(line, value)?)?,
                "basepoint" => set_once(
                    &mut basepoint,
                    line,
                    key,
                    Point::parse(value).ok_or_else(|| parse_err(line, format!("invalid point `{value}`")))?,
                )?,
                "base_time" => set_once(&mut base_time, line, key, parse_finite(line, value)?)?,
                other => return Err(parse_err(line, format!("unknown key `{other}`"))),
            }
        }
        let kind = kind.ok_or_else(|| parse_err(last_line, "missing key `kind`"))?;
        Ok(Manifest {
            kind,
            basepoint,
            base_time,
            entries,
        })
    }
}

fn valid_file_name(f: &str) -> bool {
    !f.is_empty()
        && f != "."
        && f != ".."
        && f.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn expect_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, header: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l == header => Ok(()),
        Some((line, l)) => Err(parse_err(line, format!("expected `{header}`, found `{l}`"))),
        None => Err(parse_err(1, "empty input")),
    }
}

fn key_value(line: usize, l: &str) -> Result<(&str, &str)> {
    let (k, v) = l
        .split_once('=')
        .ok_or_else(|| parse_err(line, format!("expected `key = value`, found `{l}`")))?;
    Ok((k.trim(), v.trim()))
}

fn set_once<T>(slot: &mut Option<T>, line: usize, key: &str, value: T) -> Result<()> {
    if slot.is_some() {
        return Err(parse_err(line, format!("duplicate key `{key}`")));
    }
    *slot = Some(value);
    Ok(())
}

fn parse_kind(line: usize, s: &str) -> Result<ModelKind> {
    ModelKind::parse(s).ok_or_else(|| parse_err(line, format!("unknown model kind `{s}`")))
}

fn parse_dim(line: usize, s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(n) if (2..=64).contains(&n) => Ok(n),
        _ => Err(parse_err(line, format!("invalid dimension `{s}`"))),
    }
}

fn parse_finite(line: usize, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(line, format!("invalid number `{s}`"))),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<SliceSnapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SliceSnapshot::parse(&text)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text)
}

/// Writes one file per snapshot plus `manifest.txt` into `dir`.
pub fn write_run(
    dir: &Path,
    prefix: &str,
    snapshots: &[SliceSnapshot],
    basepoint: Option<(Point, f64)>,
) -> Result<Manifest> {
    let Some(first) = snapshots.first() else {
        return Err(Error::InvalidArgument("nothing to write".into()));
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(snapshots.len());
    for (k, s) in snapshots.iter().enumerate() {
        let file = format!("{prefix}_{k:04}.txt");
        write_file(&dir.join(&file), &s.to_text())?;
        entries.push(ManifestEntry { time: s.time, file });
    }
    let manifest = Manifest {
        kind: first.kind,
        basepoint: basepoint.map(|b| b.0),
        base_time: basepoint.map(|b| b.1),
        entries,
    };
    Manifest::parse(&manifest.to_text())?;
    write_file(&dir.join(format!("{prefix}_manifest.txt")), &manifest.to_text())?;
    Ok(manifest)
}

/// Density snapshots of a solved conjugate heat flow at the requested times.
pub fn density_snapshots(density: &DensityFlow, times: &[f64]) -> Result<Vec<SliceSnapshot>> {
    let mut times = times.to_vec();
    times.sort_by(f64::total_cmp);
    times
        .iter()
        .map(|&t| {
            let (slice, u) = density.slice_and_field(t)?;
            Ok(SliceSnapshot::density(slice, u))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GeometryModel;

    #[test]
    fn slice_text_reproduces_values_exactly() {
        let s = GeometryModel::sphere(3, 1.3, 32).build(-0.25).unwrap().1;
        let snap = SliceSnapshot::metric(&s);
        let back = SliceSnapshot::parse(&snap.to_text()).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.field, FieldKind::Warp);
    }

    #[test]
    fn snapshot_errors_carry_line_numbers() {
        let bad = "# ricci-lab snapshot v1\nkind = sphere_radial\nn = 3\ntime = nan\n";
        assert!(matches!(SliceSnapshot::parse(bad), Err(Error::Parse { line: 4, .. })));
        let dup = "# ricci-lab snapshot v1\nkind = sphere_radial\nkind = sphere_radial\n";
        assert!(matches!(SliceSnapshot::parse(dup), Err(Error::Parse { line: 3, .. })));
        assert!(SliceSnapshot::parse("").is_err());
        let torus_warp = "# ricci-lab snapshot v1\nkind = flat_torus_conformal\nn = 2\ntime = 0\nfield = warp\n#data\n1\n";
        assert!(SliceSnapshot::parse(torus_warp).is_err());
    }

    #[test]
    fn manifest_rules() {
        let m = Manifest {
            kind: ModelKind::EuclideanRadial,
            basepoint: Some(Point::North),
            base_time: Some(0.0),
            entries: vec![
                ManifestEntry {
                    time: -1.0,
                    file: "k_0000.txt".into(),
                },
                ManifestEntry {
                    time: -0.5,
                    file: "k_0001.txt".into(),
                },
            ],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
        let unordered = "# ricci-lab manifest v1\nkind = sphere_radial\nslice 1 a.txt\nslice 0 b.txt\n";
        assert!(matches!(Manifest::parse(unordered), Err(Error::Parse { line: 4, .. })));
        let escape = "# ricci-lab manifest v1\nkind = sphere_radial\nslice 1 ../a.txt\n";
        assert!(Manifest::parse(escape).is_err());
    }

    #[test]
    fn writes_and_reads_a_run() {
        let dir = tempfile::tempdir().unwrap();
        let model = GeometryModel::euclidean(3, 10.0, 32);
        let slices: Vec<SliceSnapshot> = [-1.0, 0.0]
            .iter()
            .map(|&t| SliceSnapshot::metric(&model.build(t).unwrap().1))
            .collect();
        let m = write_run(dir.path(), "slice", &slices, None).unwrap();
        let back = read_manifest(&dir.path().join("slice_manifest.txt")).unwrap();
        assert_eq!(back, m);
        let first = read_snapshot(&dir.path().join(&back.entries[0].file)).unwrap();
        assert_eq!(first, slices[0]);
        assert!(matches!(
            read_snapshot(&dir.path().join("missing.txt")),
            Err(Error::Io { .. })
        ));
    }
}
