//! The family file format.
//!
//! One JSON object per file:
//!
//! ```json
//! {
//!   "label": "spin-007-a",
//!   "v": 7, "k": [3, 2, 2, 2], "lambda": 2, "mu": 2,
//!   "explicit": [[1, 2, 4], [1, 6]],
//!   "annotations": {"structure": "spin", "symbol": "ks", "class": "good"}
//! }
//! ```
//!
//! Blocks are given under `explicit` (residue lists) or `reps` (orbit
//! representatives under `group`, which lists subgroup elements or generators).
//! Either four lists are given, or two lists `[X0, X1]` with `mu` set, in which
//! case `X2 = mu X1` and `X3 = mu X2`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{
    DifferenceFamily, NamedClass, ParameterSet, StructureKind, SymbolPattern,
};
use crate::zmod::{self, ResidueSet, UnitSubgroup};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotations {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureKind>,
    /// Two letters from `s`, `k`, `*`; `*` makes no claim about that block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_fixed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x3_neg_x1: Option<bool>,
    /// Further `(multiplier, structure)` claims about the same blocks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternate: Vec<AlternateClaim>,
    /// Free-text note on corrections applied to the printed data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub erratum: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternateClaim {
    pub mu: i64,
    pub structure: StructureKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<[u32; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<Vec<Vec<u32>>>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub annotations: Annotations,
}

fn is_default(a: &Annotations) -> bool {
    *a == Annotations::default()
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("field `{field}`: {msg}"))
}

impl FamilyRecord {
    /// The multiplier reduced into `[0, v)`.
    pub fn mu(&self) -> Option<u32> {
        self.mu.map(|m| m.rem_euclid(self.v as i64) as u32)
    }

    pub fn subgroup(&self) -> Result<Option<UnitSubgroup>> {
        match &self.group {
            None => Ok(None),
            Some(g) => UnitSubgroup::closure(self.v, g)
                .map(Some)
                .map_err(|e| field_err("group", e)),
        }
    }

    pub fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("v={}", self.v))
    }

    /// Declared parameters, when both `k` and `lambda` are present.
    pub fn declared(&self) -> Option<ParameterSet> {
        Some(ParameterSet::new(self.v, self.k?, self.lambda?))
    }

    /// Structural checks that do not need the expanded blocks.
    pub fn validate(&self) -> Result<()> {
        zmod::check_modulus(self.v).map_err(|e| field_err("v", e))?;
        let lists = match (&self.explicit, &self.reps) {
            (Some(_), Some(_)) => return Err(field_err("explicit", "both `explicit` and `reps` given")),
            (None, None) => return Err(Error::Parse("missing `explicit` or `reps`".into())),
            (Some(l), None) => ("explicit", l),
            (None, Some(l)) => {
                if self.group.is_none() {
                    return Err(field_err("reps", "rep form requires `group`"));
                }
                ("reps", l)
            }
        };
        match lists.1.len() {
            4 => {}
            2 if self.mu.is_some() => {}
            2 => return Err(field_err(lists.0, "two lists require `mu`")),
            n => return Err(field_err(lists.0, format!("expected 2 or 4 lists, got {n}"))),
        }
        for (i, list) in lists.1.iter().enumerate() {
            if let Some(&r) = list.iter().find(|&&r| r >= self.v) {
                return Err(field_err(
                    lists.0,
                    format!("list {i}: residue {r} out of range for modulus {}", self.v),
                ));
            }
        }
        if let Some(mu) = self.mu() {
            if !zmod::is_unit(self.v, mu) {
                return Err(field_err("mu", Error::NotInvertible { mu, modulus: self.v }));
            }
        }
        self.subgroup()?;
        if let Some(s) = &self.annotations.symbol {
            s.parse::<SymbolPattern>().map_err(|e| field_err("annotations.symbol", e))?;
        }
        if let Some(c) = &self.annotations.class {
            c.parse::<NamedClass>().map_err(|e| field_err("annotations.class", e))?;
        }
        Ok(())
    }

    /// Expands the blocks, checking them against declared `k` and `lambda`.
    ///
    /// The λ check uses the counting identity `Σ k_i(k_i - 1) = λ(v - 1)`, so a
    /// declared λ inconsistent with the block sizes is rejected even before the
    /// family itself is verified.
    pub fn family(&self) -> Result<DifferenceFamily> {
        self.validate()?;
        let v = self.v;
        let h = self.subgroup()?;
        let build = |list: &[u32]| -> Result<ResidueSet> {
            match (&self.reps, &h) {
                (Some(_), Some(h)) => h.expand_orbits(list),
                _ => ResidueSet::from_residues(v, list.iter().copied()),
            }
        };
        let lists = self.explicit.as_ref().or(self.reps.as_ref()).expect("validated");
        let f = if lists.len() == 4 {
            DifferenceFamily::new([
                build(&lists[0])?,
                build(&lists[1])?,
                build(&lists[2])?,
                build(&lists[3])?,
            ])?
        } else {
            DifferenceFamily::from_multiplier(build(&lists[0])?, build(&lists[1])?, self.mu().expect("validated"))?
        };
        let sizes = f.sizes();
        if let Some(k) = self.k {
            if k != sizes {
                return Err(Error::SizeMismatch { declared: k, realized: sizes });
            }
        }
        if let Some(lambda) = self.lambda {
            let sum: u64 = sizes.iter().map(|&k| k as u64 * (k as u64).saturating_sub(1)).sum();
            let realized = if v > 1 { sum / (v as u64 - 1) } else { 0 };
            if v > 1 && (!sum.is_multiple_of(v as u64 - 1) || realized != lambda as u64) {
                return Err(Error::LambdaMismatch { declared: lambda as u64, realized });
            }
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// An explicit four-list record for `f`.
    pub fn from_family(f: &DifferenceFamily, mu: Option<u32>) -> Self {
        let lambda = crate::family::verify(f).params.map(|p| p.lambda);
        FamilyRecord {
            label: None,
            v: f.modulus(),
            k: Some(f.sizes()),
            lambda,
            mu: mu.map(i64::from),
            group: None,
            explicit: Some(f.blocks().iter().map(|b| b.to_vec()).collect()),
            reps: None,
            annotations: Annotations::default(),
        }
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
}

/// Parses and validates a family file, expanding the blocks once to cross-check
/// declared sizes and λ.
pub fn parse_family(text: &str) -> Result<FamilyRecord> {
    let rec: FamilyRecord = serde_json::from_str(text).map_err(json_err)?;
    rec.family()?;
    Ok(rec)
}

pub fn load_family(path: &Path) -> Result<FamilyRecord> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_family(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// A parameter set with no known family, kept for scripted searches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpenParameters {
    pub v: u32,
    pub k: [u32; 4],
    pub lambda: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OpenParameters {
    pub fn params(&self) -> ParameterSet {
        ParameterSet::new(self.v, self.k, self.lambda)
    }
}

pub fn parse_open_parameters(text: &str) -> Result<Vec<OpenParameters>> {
    serde_json::from_str(text).map_err(json_err)
}
