//! Regression over the bundled family files.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{classify, verify, NamedClass, SymbolPattern, SymmetryType};
use crate::matrix::assemble_gs;
use crate::record::{load_family, parse_open_parameters, FamilyRecord, OpenParameters};

/// The `corpus/` directory at the workspace root.
pub fn default_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[derive(Clone, Copy, Debug)]
pub struct CorpusOptions {
    /// Families with `v` above this bound skip matrix assembly.
    pub hadamard_vmax: u32,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions { hadamard_vmax: 631 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug)]
pub struct EntryReport {
    pub label: String,
    pub path: PathBuf,
    pub v: Option<u32>,
    pub checks: Vec<Check>,
}

impl EntryReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug)]
pub struct CorpusReport {
    pub entries: Vec<EntryReport>,
}

impl CorpusReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(EntryReport::pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = (&EntryReport, &Check)> {
        self.entries
            .iter()
            .flat_map(|e| e.checks.iter().filter(|c| !c.pass).map(move |c| (e, c)))
    }
}

impl fmt::Display for CorpusReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let status = if e.pass() { "ok" } else { "FAIL" };
            writeln!(f, "{status:4} {}", e.label)?;
            for c in e.checks.iter().filter(|c| !c.pass) {
                writeln!(f, "       {}: {}", c.name, c.detail)?;
            }
        }
        let failed = self.entries.iter().filter(|e| !e.pass()).count();
        write!(f, "{} entries, {} passed, {} failed", self.entries.len(), self.entries.len() - failed, failed)
    }
}

/// Family files (`*.json` under `families/`), sorted by file name.
pub fn family_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let fam = dir.join("families");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&fam)
        .map_err(|e| Error::Io(format!("{}: {e}", fam.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn load_corpus(dir: &Path) -> Result<Vec<FamilyRecord>> {
    family_paths(dir)?.iter().map(|p| load_family(p)).collect()
}

pub fn load_open_parameters(dir: &Path) -> Result<Vec<OpenParameters>> {
    let path = dir.join("open_parameters.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_open_parameters(&text)
}

/// Every annotated claim of one record, plus verification and (for small enough
/// `v`) Hadamard assembly.
pub fn check_record(rec: &FamilyRecord, opts: &CorpusOptions) -> Vec<Check> {
    let mut checks = Vec::new();
    let f = match rec.family() {
        Ok(f) => f,
        Err(e) => {
            checks.push(Check::new("parse", false, e.to_string()));
            return checks;
        }
    };
    let ver = verify(&f);
    let detail = match (&ver.params, rec.declared()) {
        (None, _) => "not a difference family".to_string(),
        (Some(p), Some(d)) if *p != d => format!("realized {p}, declared {d}"),
        (Some(p), _) if !ver.is_gs_type() => format!("{p} has order {} != v", p.order()),
        (Some(p), _) => p.to_string(),
    };
    let verified = ver.valid && ver.is_gs_type() && rec.declared().is_none_or(|d| ver.params == Some(d));
    checks.push(Check::new("verify", verified, detail));

    let ann = &rec.annotations;
    if let Some(mu) = rec.mu() {
        match classify(&f, mu) {
            Ok(r) => {
                if let Some(want) = ann.structure {
                    checks.push(Check::new(
                        "structure",
                        r.kind == want,
                        format!("mu={mu}: {} (expected {want})", r.kind),
                    ));
                }
                if let Some(want) = ann.x0_fixed {
                    checks.push(Check::new("x0_fixed", r.fixes_x0 == want, format!("mu X0 = X0 is {}", r.fixes_x0)));
                }
                if let Some(want) = ann.x3_neg_x1 {
                    checks.push(Check::new("x3_neg_x1", r.x3_is_neg_x1 == want, format!("X3 = -X1 is {}", r.x3_is_neg_x1)));
                }
            }
            Err(e) => checks.push(Check::new("structure", false, e.to_string())),
        }
    }
    for alt in &ann.alternate {
        let mu = alt.mu.rem_euclid(rec.v as i64) as u32;
        let (pass, detail) = match classify(&f, mu) {
            Ok(r) => (r.kind == alt.structure, format!("{} (expected {})", r.kind, alt.structure)),
            Err(e) => (false, e.to_string()),
        };
        checks.push(Check::new(format!("structure mu={mu}"), pass, detail));
    }
    let symbol = crate::family::SymmetrySymbol(SymmetryType::of(f.block(0)), SymmetryType::of(f.block(1)));
    let pattern = ann.symbol.as_deref().and_then(|s| s.parse::<SymbolPattern>().ok());
    if let Some(p) = pattern {
        checks.push(Check::new("symbol", p.matches(&symbol), format!("actual {symbol}, expected {p}")));
    }
    if let Some(c) = ann.class.as_deref().and_then(|c| c.parse::<NamedClass>().ok()) {
        let classes = crate::family::named_classes(&f);
        checks.push(Check::new("class", classes.contains(&c), format!("actual {classes:?}, expected {c}")));
    }
    if rec.v <= opts.hadamard_vmax && ver.valid && ver.is_gs_type() {
        let m = assemble_gs(&f);
        checks.push(Check::new("hadamard", m.is_hadamard(), format!("order {}", m.order())));
        if pattern.is_some_and(|p| p.0 == Some(SymmetryType::Skew)) {
            checks.push(Check::new("skew_type", m.is_skew_type(), "M + M^T = 2I"));
        }
    }
    checks
}

pub fn run_corpus(dir: &Path, opts: &CorpusOptions) -> Result<CorpusReport> {
    let paths = family_paths(dir)?;
    let entries = paths
        .par_iter()
        .map(|path| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            match load_family(path) {
                Ok(rec) => EntryReport {
                    label: rec.label.clone().unwrap_or(stem),
                    path: path.clone(),
                    v: Some(rec.v),
                    checks: check_record(&rec, opts),
                },
                Err(e) => EntryReport {
                    label: stem,
                    path: path.clone(),
                    v: None,
                    checks: vec![Check::new("parse", false, e.to_string())],
                },
            }
        })
        .collect();
    Ok(CorpusReport { entries })
}
