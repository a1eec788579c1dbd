//! On-disk formats: DIMACS CNF, puzzle lines, JSON for the toy and
//! de-mixing data, and the results and timing CSVs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use drnet_core::demix::{BasisLibrary, DemixDataset, MixtureSignal, PhaseParams, StickPattern};
use drnet_core::sat::{parse_dimacs, CnfFormula};
use drnet_core::sudoku::overlap::{Mixing, OverlapInstance, PrototypeDecoder};
use drnet_core::sudoku::SudokuPuzzle;

pub const PUZZLES_FILE: &str = "puzzles.txt";
pub const DECODER_FILE: &str = "decoder.json";
pub const INSTANCES_FILE: &str = "instances.json";
pub const LIBRARY_FILE: &str = "library.json";
pub const DATASET_FILE: &str = "dataset.json";

pub fn read_cnf(path: &Path) -> Result<CnfFormula> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dimacs(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_cnf(path: &Path, formula: &CnfFormula) -> Result<()> {
    write_text(path, &formula.to_dimacs())
}

/// `.cnf` files directly inside `dir`, sorted by name.
pub fn list_cnf(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "cnf"));
    files.sort();
    Ok(files)
}

/// One puzzle per line; blank lines and lines starting with `#` are skipped.
/// Ids are 1-based line numbers.
pub fn parse_puzzle_lines(text: &str) -> Result<Vec<(usize, SudokuPuzzle)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            SudokuPuzzle::parse(l.trim())
                .map(|p| (i + 1, p))
                .map_err(|e| anyhow!("line {}: {e}", i + 1))
        })
        .collect()
}

pub fn puzzle_lines<'a, I: IntoIterator<Item = &'a SudokuPuzzle>>(puzzles: I) -> String {
    puzzles.into_iter().map(|p| p.to_line() + "\n").collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct DecoderFile {
    mixing: String,
    prototypes: Vec<Vec<f64>>,
}

pub fn decoder_to_json(d: &PrototypeDecoder) -> Result<String> {
    let file = DecoderFile {
        mixing: match d.mixing {
            Mixing::Max => "max",
            Mixing::Additive => "additive",
        }
        .into(),
        prototypes: d.prototypes.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn decoder_from_json(text: &str) -> Result<PrototypeDecoder> {
    let file: DecoderFile = serde_json::from_str(text)?;
    let mixing = match file.mixing.as_str() {
        "max" => Mixing::Max,
        "additive" => Mixing::Additive,
        other => bail!("unknown mixing {other:?}"),
    };
    let dim = file.prototypes.first().map_or(0, Vec::len);
    if file.prototypes.len() != 8 || dim == 0 || file.prototypes.iter().any(|p| p.len() != dim) {
        bail!("decoder needs 8 prototypes of equal nonzero length");
    }
    Ok(PrototypeDecoder {
        prototypes: file.prototypes,
        mixing,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ToyInstance {
    observations: Vec<Vec<f64>>,
    low: Vec<u8>,
    high: Vec<u8>,
}

pub fn instances_to_json(instances: &[OverlapInstance]) -> Result<String> {
    let file: Vec<ToyInstance> = instances
        .iter()
        .map(|i| ToyInstance {
            observations: i.observations.clone(),
            low: i.low.clone(),
            high: i.high.clone(),
        })
        .collect();
    Ok(serde_json::to_string(&file)?)
}

pub fn instances_from_json(text: &str, dim: usize) -> Result<Vec<OverlapInstance>> {
    let file: Vec<ToyInstance> = serde_json::from_str(text)?;
    file.into_iter()
        .enumerate()
        .map(|(i, t)| {
            let inst = OverlapInstance {
                observations: t.observations,
                low: t.low,
                high: t.high,
            };
            inst.validate(dim).map_err(|e| anyhow!("instance {i}: {e}"))?;
            Ok(inst)
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct LibraryFile {
    dim: usize,
    /// `(location, amplitude)` sticks per phase.
    patterns: Vec<Vec<(f64, f64)>>,
}

pub fn library_to_json(lib: &BasisLibrary) -> Result<String> {
    let file = LibraryFile {
        dim: lib.dim,
        patterns: lib.patterns.iter().map(|p| p.sticks().to_vec()).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn library_from_json(text: &str) -> Result<BasisLibrary> {
    let file: LibraryFile = serde_json::from_str(text)?;
    let patterns = file
        .patterns
        .into_iter()
        .map(StickPattern::new)
        .collect::<drnet_core::Result<Vec<_>>>()?;
    Ok(BasisLibrary::new(patterns, file.dim)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct PhaseFile {
    phase: usize,
    shift: f64,
    width: f64,
    scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SignalFile {
    vertex: usize,
    y: Vec<f64>,
    truth: Vec<PhaseFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetFile {
    k: usize,
    noise: f64,
    edges: Vec<(usize, usize)>,
    signals: Vec<SignalFile>,
}

pub fn dataset_to_json(ds: &DemixDataset) -> Result<String> {
    let file = DatasetFile {
        k: ds.k,
        noise: ds.noise,
        edges: ds.edges.clone(),
        signals: ds
            .signals
            .iter()
            .map(|s| SignalFile {
                vertex: s.vertex,
                y: s.y.clone(),
                truth: s
                    .truth
                    .iter()
                    .map(|&(phase, z)| PhaseFile {
                        phase,
                        shift: z.shift,
                        width: z.width,
                        scale: z.scale,
                    })
                    .collect(),
            })
            .collect(),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn dataset_from_json(text: &str) -> Result<DemixDataset> {
    let file: DatasetFile = serde_json::from_str(text)?;
    let n = file.signals.len();
    for (i, s) in file.signals.iter().enumerate() {
        if s.vertex != i {
            bail!("signal {i} has vertex {}; signals must be listed in vertex order", s.vertex);
        }
    }
    if let Some(&(u, v)) = file.edges.iter().find(|&&(u, v)| u >= n || v >= n || u == v) {
        bail!("edge ({u}, {v}) is not between two distinct points");
    }
    Ok(DemixDataset {
        k: file.k,
        noise: file.noise,
        edges: file.edges,
        signals: file
            .signals
            .into_iter()
            .map(|s| MixtureSignal {
                vertex: s.vertex,
                y: s.y,
                truth: s
                    .truth
                    .into_iter()
                    .map(|p| {
                        (
                            p.phase,
                            PhaseParams {
                                shift: p.shift,
                                width: p.width,
                                scale: p.scale,
                            },
                        )
                    })
                    .collect(),
            })
            .collect(),
    })
}

/// One row of the results CSV. Every field is a pure function of the
/// input, the config and the seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: String,
    pub status: String,
    /// Iterations of the final attempt.
    pub iterations: usize,
    pub total_iterations: usize,
    pub restarts: u32,
    /// Outcome of the independent verifier on the decoded assignment.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub id: String,
    pub wall_time_ms: f64,
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(reader.deserialize().collect::<csv::Result<_>>()?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use drnet_core::demix::{synthesize_dataset, CompositionGraph};
    use drnet_core::rng::rng_from_seed;
    use drnet_core::sudoku::overlap::PROTOTYPE_DIM;

    #[test]
    fn toy_round_trip() {
        let mut rng = rng_from_seed(1);
        let d = PrototypeDecoder::generate(&mut rng, PROTOTYPE_DIM, 4.0, Mixing::Max);
        let insts: Vec<_> = (0..3).map(|_| OverlapInstance::generate(&mut rng, &d, 0.05)).collect();
        let d2 = decoder_from_json(&decoder_to_json(&d).unwrap()).unwrap();
        assert_eq!(d, d2);
        let back = instances_from_json(&instances_to_json(&insts).unwrap(), PROTOTYPE_DIM).unwrap();
        assert_eq!(back, insts);
    }

    #[test]
    fn demix_round_trip() {
        let mut rng = rng_from_seed(2);
        let lib = BasisLibrary::generate(5, 32, &mut rng).unwrap();
        let ds = synthesize_dataset(&lib, CompositionGraph::Chain(6), 2, 0.01, &mut rng).unwrap();
        assert_eq!(library_from_json(&library_to_json(&lib).unwrap()).unwrap(), lib);
        assert_eq!(dataset_from_json(&dataset_to_json(&ds).unwrap()).unwrap(), ds);
    }

    #[test]
    fn dataset_rejects_bad_edges() {
        let text = r#"{"k":1,"noise":0,"edges":[[0,5]],"signals":[{"vertex":0,"y":[0.0],"truth":[]}]}"#;
        assert!(dataset_from_json(text).is_err());
    }

    #[test]
    fn puzzle_lines_skip_comments() {
        let line = ".".repeat(81);
        let text = format!("# corpus\n\n{line}\n{line}\n");
        let ps = parse_puzzle_lines(&text).unwrap();
        assert_eq!(ps.iter().map(|p| p.0).collect::<Vec<_>>(), vec![3, 4]);
        assert_eq!(parse_puzzle_lines(&puzzle_lines(ps.iter().map(|p| &p.1))).unwrap().len(), 2);
        assert!(parse_puzzle_lines("123\n").is_err());
    }

    #[test]
    fn decoder_rejects_wrong_shape() {
        assert!(decoder_from_json(r#"{"mixing":"max","prototypes":[[1.0]]}"#).is_err());
        assert!(decoder_from_json(r#"{"mixing":"blend","prototypes":[]}"#).is_err());
    }
}
