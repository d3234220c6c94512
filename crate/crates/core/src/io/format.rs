//! On-disk formats: JSON-lines level and terrain files, dataset manifests
//! with SHA-256 checksums, and plain-text level renders.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solve::{Level, LevelSpec, Tile, NUM_CLASSES};

pub const LEVELS_FORMAT: &str = "genco-levels";
pub const TERRAIN_FORMAT: &str = "genco-terrain";
pub const MANIFEST_FORMAT: &str = "genco-manifest";
pub const RENDER_MAGIC: &str = "# genco-render v1";
pub const FORMAT_VERSION: u32 = 1;

/// Tile symbols in class-index order.
pub fn legend() -> String {
    Tile::ALL.iter().map(|t| t.symbol()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridHeader {
    pub format: String,
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub legend: String,
    pub count: usize,
}

impl GridHeader {
    fn new(format: &str, height: usize, width: usize, count: usize) -> Self {
        Self {
            format: format.into(),
            version: FORMAT_VERSION,
            height,
            width,
            classes: NUM_CLASSES,
            legend: legend(),
            count,
        }
    }

    fn check(&self, format: &str) -> Result<()> {
        if self.format != format {
            return Err(Error::Parse(format!("expected a {format} file, found {}", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported version {}", self.version)));
        }
        if self.classes != NUM_CLASSES || self.legend != legend() {
            return Err(Error::Parse(format!("legend mismatch: {:?}", self.legend)));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::Parse("grid dimensions must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelRecord {
    id: usize,
    rows: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TerrainRecord {
    id: usize,
    probs: Vec<f64>,
}

fn level_rows(l: &Level) -> Vec<String> {
    (0..l.height())
        .map(|r| (0..l.width()).map(|c| l.get(r, c).symbol()).collect())
        .collect()
}

fn level_from_rows(rows: &[String], height: usize, width: usize) -> Result<Level> {
    if rows.len() != height {
        return Err(Error::Parse(format!("expected {height} rows, found {}", rows.len())));
    }
    let mut tiles = Vec::with_capacity(height * width);
    for row in rows {
        let before = tiles.len();
        for ch in row.chars() {
            tiles.push(Tile::from_symbol(ch).ok_or_else(|| Error::Parse(format!("unknown tile symbol {ch:?}")))?);
        }
        if tiles.len() - before != width {
            return Err(Error::Parse(format!("row {row:?} is not {width} tiles wide")));
        }
    }
    Level::new(height, width, tiles)
}

pub fn levels_to_string(height: usize, width: usize, levels: &[Level]) -> Result<String> {
    let mut out = serde_json::to_string(&GridHeader::new(LEVELS_FORMAT, height, width, levels.len()))?;
    out.push('\n');
    for (id, l) in levels.iter().enumerate() {
        if l.height() != height || l.width() != width {
            return Err(Error::Dimension(format!("level {id} is not {height}x{width}")));
        }
        out.push_str(&serde_json::to_string(&LevelRecord {
            id,
            rows: level_rows(l),
        })?);
        out.push('\n');
    }
    Ok(out)
}

fn split_header(text: &str) -> Result<(GridHeader, Vec<&str>)> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty file".into()))?;
    let header: GridHeader = serde_json::from_str(head).map_err(|e| Error::Parse(format!("header: {e}")))?;
    let body: Vec<&str> = lines.collect();
    if body.len() != header.count {
        return Err(Error::Parse(format!(
            "header promises {} records, found {}",
            header.count,
            body.len()
        )));
    }
    Ok((header, body))
}

pub fn parse_levels(text: &str) -> Result<(GridHeader, Vec<Level>)> {
    let (header, body) = split_header(text)?;
    header.check(LEVELS_FORMAT)?;
    let levels = body
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let rec: LevelRecord = serde_json::from_str(line).map_err(|e| Error::Parse(format!("record {i}: {e}")))?;
            if rec.id != i {
                return Err(Error::Parse(format!("record {i} has id {}", rec.id)));
            }
            level_from_rows(&rec.rows, header.height, header.width)
        })
        .collect::<Result<_>>()?;
    Ok((header, levels))
}

pub fn terrain_to_string(height: usize, width: usize, maps: &[Vec<f64>]) -> Result<String> {
    let dim = height * width * NUM_CLASSES;
    let mut out = serde_json::to_string(&GridHeader::new(TERRAIN_FORMAT, height, width, maps.len()))?;
    out.push('\n');
    for (id, m) in maps.iter().enumerate() {
        if m.len() != dim {
            return Err(Error::Dimension(format!(
                "map {id} has {} entries, expected {dim}",
                m.len()
            )));
        }
        out.push_str(&serde_json::to_string(&TerrainRecord { id, probs: m.clone() })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_terrain(text: &str) -> Result<(GridHeader, Vec<Vec<f64>>)> {
    let (header, body) = split_header(text)?;
    header.check(TERRAIN_FORMAT)?;
    let dim = header.height * header.width * NUM_CLASSES;
    let maps = body
        .iter()
        .enumerate()
        .map(|(i, line)| {
            let rec: TerrainRecord =
                serde_json::from_str(line).map_err(|e| Error::Parse(format!("record {i}: {e}")))?;
            if rec.id != i || rec.probs.len() != dim {
                return Err(Error::Parse(format!("record {i} has a bad id or length")));
            }
            if rec.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Parse(format!("record {i} has a probability outside [0, 1]")));
            }
            if let Some(c) = rec
                .probs
                .chunks(NUM_CLASSES)
                .position(|cell| (cell.iter().sum::<f64>() - 1.0).abs() > 1e-6)
            {
                return Err(Error::Parse(format!("record {i}: cell {c} does not sum to 1")));
            }
            Ok(rec.probs)
        })
        .collect::<Result<_>>()?;
    Ok((header, maps))
}

/// Contents of a samples or dataset file, whichever kind it holds.
#[derive(Clone, Debug, PartialEq)]
pub enum GridFile {
    Levels(GridHeader, Vec<Level>),
    Terrain(GridHeader, Vec<Vec<f64>>),
}

impl GridFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let head = text.lines().next().unwrap_or_default();
        let probe: serde_json::Value = serde_json::from_str(head).map_err(|e| Error::Parse(format!("header: {e}")))?;
        match probe.get("format").and_then(|f| f.as_str()) {
            Some(LEVELS_FORMAT) => parse_levels(&text).map(|(h, l)| GridFile::Levels(h, l)),
            Some(TERRAIN_FORMAT) => parse_terrain(&text).map(|(h, m)| GridFile::Terrain(h, m)),
            other => Err(Error::Parse(format!("unknown file format {other:?}"))),
        }
    }

    pub fn header(&self) -> &GridHeader {
        match self {
            GridFile::Levels(h, _) | GridFile::Terrain(h, _) => h,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GridFile::Levels(_, l) => l.len(),
            GridFile::Terrain(_, m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Levels,
    Terrain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub kind: DatasetKind,
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    /// Data file name, relative to the manifest's directory.
    pub file: String,
    pub sha256: String,
}

/// A verified dataset.
#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Levels(Vec<Level>),
    Terrain(Vec<Vec<f64>>),
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl DatasetManifest {
    /// Writes `data` and its manifest into `dir`; returns the manifest path.
    pub fn write(dir: &Path, data: &Dataset, height: usize, width: usize, seed: u64) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let (kind, file, text, count) = match data {
            Dataset::Levels(l) => (
                DatasetKind::Levels,
                "levels.jsonl",
                levels_to_string(height, width, l)?,
                l.len(),
            ),
            Dataset::Terrain(m) => (
                DatasetKind::Terrain,
                "terrain.jsonl",
                terrain_to_string(height, width, m)?,
                m.len(),
            ),
        };
        fs::write(dir.join(file), &text)?;
        let manifest = DatasetManifest {
            format: MANIFEST_FORMAT.into(),
            version: FORMAT_VERSION,
            kind,
            count,
            height,
            width,
            seed,
            file: file.into(),
            sha256: sha256_hex(text.as_bytes()),
        };
        let path = dir.join(MANIFEST_NAME);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }

    /// Reads a manifest, verifies the checksum and contents, and loads the data.
    /// Level records must also be feasible under `spec` when one is given.
    pub fn load(path: &Path, spec: Option<&LevelSpec>) -> Result<(Self, Dataset)> {
        let manifest: DatasetManifest =
            serde_json::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Parse(format!("manifest: {e}")))?;
        if manifest.format != MANIFEST_FORMAT || manifest.version != FORMAT_VERSION {
            return Err(Error::Parse("not a version-1 dataset manifest".into()));
        }
        let data_path = path.parent().unwrap_or(Path::new(".")).join(&manifest.file);
        let bytes = fs::read(&data_path)?;
        let found = sha256_hex(&bytes);
        if found != manifest.sha256 {
            return Err(Error::Checksum {
                path: data_path.display().to_string(),
                expected: manifest.sha256.clone(),
                found,
            });
        }
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        let (header, data) = match manifest.kind {
            DatasetKind::Levels => {
                let (h, levels) = parse_levels(&text)?;
                (h, Dataset::Levels(levels))
            }
            DatasetKind::Terrain => {
                let (h, maps) = parse_terrain(&text)?;
                (h, Dataset::Terrain(maps))
            }
        };
        if header.count != manifest.count || header.height != manifest.height || header.width != manifest.width {
            return Err(Error::DataValidation("manifest and data header disagree".into()));
        }
        if let (Dataset::Levels(levels), Some(spec)) = (&data, spec) {
            if let Some(i) = levels.iter().position(|l| !l.satisfies(spec)) {
                return Err(Error::DataValidation(format!("level {i} is not feasible")));
            }
        }
        Ok((manifest, data))
    }
}

/// Character-art render of levels, one block per sample.
pub fn render_levels(levels: &[Level]) -> String {
    let legend: Vec<String> = Tile::ALL
        .iter()
        .map(|t| format!("{}={}", t.symbol(), t.name()))
        .collect();
    let mut out = format!("{RENDER_MAGIC} legend {}\n", legend.join(" "));
    for (i, l) in levels.iter().enumerate() {
        out.push_str(&format!("## sample {i}\n{l}\n"));
    }
    out
}

/// Inverse of [`render_levels`].
pub fn parse_render(text: &str) -> Result<Vec<Level>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l.starts_with(RENDER_MAGIC) => {}
        _ => return Err(Error::Parse("missing render header".into())),
    }
    let mut out = Vec::new();
    let mut rows: Vec<String> = Vec::new();
    let mut in_block = false;
    let flush = |rows: &mut Vec<String>, out: &mut Vec<Level>| -> Result<()> {
        if rows.is_empty() {
            return Err(Error::Parse("empty sample block".into()));
        }
        let width = rows[0].chars().count();
        out.push(level_from_rows(rows, rows.len(), width)?);
        rows.clear();
        Ok(())
    };
    for line in lines {
        if let Some(rest) = line.strip_prefix("## sample ") {
            if in_block {
                flush(&mut rows, &mut out)?;
            }
            if rest.parse::<usize>().ok() != Some(out.len()) {
                return Err(Error::Parse(format!("unexpected sample label {rest:?}")));
            }
            in_block = true;
        } else if line.is_empty() {
            continue;
        } else if in_block {
            rows.push(line.to_string());
        } else {
            return Err(Error::Parse("tile row outside a sample block".into()));
        }
    }
    if in_block {
        flush(&mut rows, &mut out)?;
    }
    Ok(out)
}
