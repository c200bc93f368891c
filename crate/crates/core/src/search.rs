//! Backtracking search for spin and slide difference families.
//!
//! For a fixed multiplier μ the outer blocks are determined by X1
//! (`X2 = μ X1`, `X3 = μ² X1`), so the search runs in two stages:
//!
//! 1. choose X1, accumulating the difference counts of all three outer blocks
//!    and cutting a branch as soon as any difference exceeds λ;
//! 2. for each complete X1, the residual `δ(d) = λ - count_{1,2,3}(d)` must be
//!    realized exactly by X0, which is found by a second backtrack.
//!
//! Blocks are built from *atoms*: orbits of a subgroup H when the problem asks
//! for H-invariant blocks (singletons otherwise), merged into `{O, -O}` pairs
//! for symmetric blocks or offered as `O` versus `-O` alternatives for skew
//! blocks. Difference counts of H-invariant blocks are constant on H-orbits of
//! differences, so counts are kept per difference class.
//!
//! With no subgroup and no symmetry constraint both stages are normalized
//! under translation: only one translate of each X1 and only X0 containing 0
//! are enumerated, and the full set of translates is restored on output.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{
    check_parameters, classify, verify, DifferenceFamily, ParameterSet, StructureKind,
    StructureReport,
};
use crate::zmod::{self, mul_mod, ResidueSet, UnitSubgroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    Spin,
    Slide,
    Either,
}

impl Structure {
    fn accepts(self, kind: StructureKind) -> bool {
        match self {
            Structure::Spin => kind == StructureKind::Spin,
            Structure::Slide => kind == StructureKind::Slide,
            Structure::Either => kind != StructureKind::None,
        }
    }
}

impl FromStr for Structure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spin" => Ok(Structure::Spin),
            "slide" => Ok(Structure::Slide),
            "either" => Ok(Structure::Either),
            _ => Err(Error::Parse(format!("unknown structure {s:?}"))),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Structure::Spin => "spin",
            Structure::Slide => "slide",
            Structure::Either => "either",
        })
    }
}

/// Symmetry requirement on one block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BlockConstraint {
    #[default]
    Free,
    Symmetric,
    Skew,
}

impl BlockConstraint {
    fn from_letter(c: char) -> Result<Self> {
        match c {
            's' => Ok(BlockConstraint::Symmetric),
            'k' => Ok(BlockConstraint::Skew),
            '*' => Ok(BlockConstraint::Free),
            _ => Err(Error::Parse(format!("bad symmetry letter {c:?}"))),
        }
    }
}

/// Parses a two-letter constraint such as `ks` or `*s` into `(X0, X1)` constraints.
pub fn parse_symmetry(s: &str) -> Result<(BlockConstraint, BlockConstraint)> {
    let cs: Vec<char> = s.chars().collect();
    if cs.len() != 2 {
        return Err(Error::Parse(format!("symmetry constraint must have two letters, got {s:?}")));
    }
    Ok((BlockConstraint::from_letter(cs[0])?, BlockConstraint::from_letter(cs[1])?))
}

#[derive(Clone, Debug)]
pub struct SearchProblem {
    pub params: ParameterSet,
    pub structure: Structure,
    /// When absent every eligible multiplier is tried.
    pub mu: Option<u32>,
    /// Blocks are constrained to be invariant under this subgroup.
    pub group: Option<UnitSubgroup>,
    /// Constraints on `(X0, X1)`; X2 and X3 inherit X1's.
    pub symmetry: (BlockConstraint, BlockConstraint),
    pub limit: Option<usize>,
    pub node_budget: Option<u64>,
    /// Worker threads; 0 uses the global rayon pool.
    pub threads: usize,
    /// Reject an X1 whose outer blocks alone exceed the spectral bound
    /// `Σ |χ(X_i)|² = n` at some nontrivial character. Exact; only a speedup.
    pub spectral_filter: bool,
    /// Emit only the smallest translate of each block that is free to
    /// translate (no subgroup, no symmetry constraint). Off by default: the raw
    /// solution set of an unconstrained problem is up to `v²` times larger.
    pub reduce_translations: bool,
}

impl SearchProblem {
    pub fn new(params: ParameterSet, structure: Structure) -> Self {
        SearchProblem {
            params,
            structure,
            mu: None,
            group: None,
            symmetry: (BlockConstraint::Free, BlockConstraint::Free),
            limit: None,
            node_budget: None,
            threads: 0,
            spectral_filter: true,
            reduce_translations: false,
        }
    }

    pub fn with_mu(mut self, mu: u32) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_group(mut self, group: UnitSubgroup) -> Self {
        self.group = Some(group);
        self
    }

    pub fn with_symmetry(mut self, x0: BlockConstraint, x1: BlockConstraint) -> Self {
        self.symmetry = (x0, x1);
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn with_node_budget(mut self, budget: u64) -> Self {
        self.node_budget = Some(budget);
        self
    }

    pub fn with_spectral_filter(mut self, on: bool) -> Self {
        self.spectral_filter = on;
        self
    }

    pub fn with_reduced_translations(mut self, on: bool) -> Self {
        self.reduce_translations = on;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        zmod::check_modulus(p.v)?;
        let c = check_parameters(p);
        if !c.well_formed {
            return Err(Error::InfeasibleParameters(format!("{p} violates the λ identity")));
        }
        if !c.gs_type {
            return Err(Error::InfeasibleParameters(format!("{p} is not of GS type (n != v)")));
        }
        if !c.special {
            return Err(Error::InfeasibleParameters(format!("{p} is not special (k1 = k2 = k3)")));
        }
        if let Some(h) = &self.group {
            if h.modulus() != p.v {
                return Err(Error::ModulusMismatch(p.v, h.modulus()));
            }
        }
        if let Some(mu) = self.mu {
            if !zmod::is_unit(p.v, mu) {
                return Err(Error::NotInvertible { mu, modulus: p.v });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub family: DifferenceFamily,
    pub mu: u32,
    pub report: StructureReport,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Canonically sorted; see [`canonicalize_solution`].
    pub solutions: Vec<Solution>,
    /// True when the search space was covered completely.
    pub exhausted: bool,
    pub nodes_explored: u64,
    /// Candidates the search produced that failed independent re-verification.
    /// Always zero unless there is a bug.
    pub rejected: u64,
}

/// Multipliers that can carry the structure when blocks are only required to be
/// invariant under `group`. A unit μ with μ³ in H forces `μ X3 = X1` (spin);
/// otherwise the pair can only slide. Elements of H itself are skipped since
/// they make all three outer blocks equal.
pub fn eligible_multipliers_for(v: u32, structure: Structure, group: &UnitSubgroup) -> Vec<u32> {
    zmod::units(v)
        .into_iter()
        .filter(|&m| m != 1 % v && !group.contains(m))
        .filter(|&m| {
            let cube_in_h = group.contains(mul_mod(mul_mod(m, m, v), m, v));
            match structure {
                Structure::Spin => cube_in_h,
                Structure::Slide => !cube_in_h,
                Structure::Either => true,
            }
        })
        .collect()
}

/// Units of order exactly 3 for spin; all other non-identity units for slide.
pub fn eligible_multipliers(v: u32, structure: Structure) -> Vec<u32> {
    match UnitSubgroup::trivial(v) {
        Ok(h) => eligible_multipliers_for(v, structure, &h),
        Err(_) => Vec::new(),
    }
}

/// Deterministic representative of a solution pair: `(F, μ)` and
/// `(F with X1 and X3 swapped, μ⁻¹)` describe the same structure, and the one
/// with the smaller multiplier (then smaller family) is kept.
pub fn canonicalize_solution(f: &DifferenceFamily, mu: u32) -> (DifferenceFamily, u32) {
    let v = f.modulus();
    let mu = mu % v.max(1);
    let Ok(inv) = zmod::inverse(v, mu) else {
        return (f.clone(), mu);
    };
    let partner = f.swap_outer();
    let partner_ok = classify(&partner, inv).is_ok_and(|r| r.kind != StructureKind::None);
    if partner_ok && (inv, &partner) < (mu, f) {
        (partner, inv)
    } else {
        (f.clone(), mu)
    }
}

struct Atom {
    size: u32,
    /// Elements of the atom under each image multiplier `μ^0, μ^1, ...`.
    images: Vec<Vec<u32>>,
    /// Differences internal to the atom, summed over images, as (class, count).
    internal: Vec<(u32, u32)>,
}

/// One branching decision: exactly one option is taken; `None` means "take nothing".
#[derive(Clone, Debug)]
struct Decision {
    options: Vec<Option<usize>>,
}

struct Classes {
    v: u32,
    /// `class_of[d]` for nonzero d.
    class_of: Vec<u32>,
    size: Vec<u32>,
}

impl Classes {
    fn new(h: &UnitSubgroup) -> Self {
        let v = h.modulus();
        let mut class_of = vec![u32::MAX; v as usize];
        let mut size = Vec::new();
        for orbit in h.orbits() {
            if orbit[0] == 0 {
                continue;
            }
            let c = size.len() as u32;
            for &d in &orbit {
                class_of[d as usize] = c;
            }
            size.push(orbit.len() as u32);
        }
        Classes { v, class_of, size }
    }

    fn len(&self) -> usize {
        self.size.len()
    }

    #[inline]
    fn of(&self, x: u32, y: u32) -> usize {
        let v = self.v;
        self.class_of[((x + v - y) % v) as usize] as usize
    }
}

/// Atoms and decisions for one block type.
struct Layout {
    atoms: Vec<Atom>,
    decisions: Vec<Decision>,
    /// `min_rest[i]`/`max_rest[i]`: size reachable from decisions `i..`.
    min_rest: Vec<u32>,
    max_rest: Vec<u32>,
    /// Pairwise cross contributions `table[a * n + b]`, when precomputed.
    table: Option<Vec<Vec<u32>>>,
}

impl Layout {
    fn build(
        group: &UnitSubgroup,
        constraint: BlockConstraint,
        multipliers: &[u32],
        classes: &Classes,
        force_zero: bool,
    ) -> Option<Layout> {
        let v = group.modulus();
        let orbits = group.orbits();
        let mut index_of = vec![0usize; v as usize];
        for (i, o) in orbits.iter().enumerate() {
            for &x in o {
                index_of[x as usize] = i;
            }
        }
        let neg = |i: usize| index_of[((v - orbits[i][0]) % v) as usize];
        let mut atom_sets: Vec<Vec<u32>> = Vec::new();
        let mut decisions = Vec::new();
        match constraint {
            BlockConstraint::Free => {
                for o in &orbits {
                    decisions.push(Decision { options: vec![Some(atom_sets.len()), None] });
                    atom_sets.push(o.clone());
                }
            }
            BlockConstraint::Symmetric => {
                for (i, o) in orbits.iter().enumerate() {
                    let j = neg(i);
                    if j < i {
                        continue;
                    }
                    let mut s = o.clone();
                    if j != i {
                        s.extend_from_slice(&orbits[j]);
                        s.sort_unstable();
                    }
                    decisions.push(Decision { options: vec![Some(atom_sets.len()), None] });
                    atom_sets.push(s);
                }
            }
            BlockConstraint::Skew => {
                for (i, o) in orbits.iter().enumerate() {
                    if o[0] == 0 {
                        continue;
                    }
                    let j = neg(i);
                    if j == i {
                        // an orbit closed under negation cannot be split
                        return None;
                    }
                    if j < i {
                        continue;
                    }
                    let a = atom_sets.len();
                    atom_sets.push(o.clone());
                    atom_sets.push(orbits[j].clone());
                    decisions.push(Decision { options: vec![Some(a), Some(a + 1)] });
                }
            }
        }
        if force_zero {
            // first atom is the orbit {0}
            debug_assert_eq!(atom_sets.first().map(|s| s[0]), Some(0));
            decisions[0].options = vec![Some(0)];
        }
        let atoms: Vec<Atom> = atom_sets
            .into_iter()
            .map(|s| {
                let images: Vec<Vec<u32>> = multipliers
                    .iter()
                    .map(|&m| {
                        let mut img: Vec<u32> = s.iter().map(|&x| mul_mod(x, m, v)).collect();
                        img.sort_unstable();
                        img
                    })
                    .collect();
                let mut dense = vec![0u32; classes.len()];
                for img in &images {
                    for &x in img {
                        for &y in img {
                            if x != y {
                                dense[classes.of(x, y)] += 1;
                            }
                        }
                    }
                }
                let internal = dense
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(i, &c)| (i as u32, c))
                    .collect();
                Atom { size: s.len() as u32, images, internal }
            })
            .collect();
        let n = decisions.len();
        let mut min_rest = vec![0u32; n + 1];
        let mut max_rest = vec![0u32; n + 1];
        for i in (0..n).rev() {
            let sizes = decisions[i].options.iter().map(|o| o.map_or(0, |a| atoms[a].size));
            let (lo, hi) = sizes.fold((u32::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
            min_rest[i] = min_rest[i + 1] + lo;
            max_rest[i] = max_rest[i + 1] + hi;
        }
        let mut layout = Layout { atoms, decisions, min_rest, max_rest, table: None };
        if !group.is_trivial() {
            layout.precompute_table(classes);
        }
        Some(layout)
    }

    fn precompute_table(&mut self, classes: &Classes) {
        let n = self.atoms.len();
        if n * n * classes.len() > 1 << 22 {
            return;
        }
        let mut table = vec![Vec::new(); n * n];
        for a in 0..n {
            // the diagonal is never read: an atom is not paired with itself
            for b in (0..n).filter(|&b| b != a) {
                let mut dense = vec![0u32; classes.len()];
                for (ia, ib) in self.atoms[a].images.iter().zip(&self.atoms[b].images) {
                    for &x in ia {
                        for &y in ib.iter().filter(|&&y| y != x) {
                            dense[classes.of(x, y)] += 1;
                            dense[classes.of(y, x)] += 1;
                        }
                    }
                }
                table[a * n + b] = dense;
            }
        }
        self.table = Some(table);
    }
}

/// Shared budget and stop signals.
struct Control {
    budget: Option<u64>,
    spent: AtomicU64,
    out_of_budget: AtomicBool,
    stop: AtomicBool,
}

impl Control {
    fn halted(&self) -> bool {
        self.stop.load(Ordering::Relaxed) || self.out_of_budget.load(Ordering::Relaxed)
    }
}

const FLUSH: u64 = 1 << 12;

/// Mutable state of one backtrack over a [`Layout`].
struct Walker<'a> {
    layout: &'a Layout,
    classes: &'a Classes,
    control: &'a Control,
    target: u32,
    /// Per-class upper bounds on the running totals.
    cap: Vec<u32>,
    totals: Vec<u32>,
    chosen: Vec<usize>,
    /// Chosen elements per image.
    elems: Vec<Vec<u32>>,
    size: u32,
    nodes: u64,
    unflushed: u64,
}

impl<'a> Walker<'a> {
    fn new(layout: &'a Layout, classes: &'a Classes, control: &'a Control, target: u32, cap: Vec<u32>) -> Self {
        let images = layout.atoms.first().map_or(1, |a| a.images.len());
        Walker {
            layout,
            classes,
            control,
            target,
            totals: vec![0; cap.len()],
            cap,
            chosen: Vec::new(),
            elems: vec![Vec::new(); images],
            size: 0,
            nodes: 0,
            unflushed: 0,
        }
    }

    fn tick(&mut self) -> bool {
        self.nodes += 1;
        self.unflushed += 1;
        if self.unflushed >= FLUSH {
            self.flush();
        }
        !self.control.halted()
    }

    fn flush(&mut self) {
        let spent = self.control.spent.fetch_add(self.unflushed, Ordering::Relaxed) + self.unflushed;
        self.unflushed = 0;
        if self.control.budget.is_some_and(|b| spent > b) {
            self.control.out_of_budget.store(true, Ordering::Relaxed);
        }
    }

    /// Adds atom `a`; returns false (with totals possibly dirty) on overshoot.
    fn add(&mut self, a: usize) -> bool {
        let atom = &self.layout.atoms[a];
        for &(c, n) in &atom.internal {
            let t = &mut self.totals[c as usize];
            *t += n;
            if *t > self.cap[c as usize] {
                return false;
            }
        }
        if let Some(table) = &self.layout.table {
            let n = self.layout.atoms.len();
            for &b in &self.chosen {
                for (c, &x) in table[a * n + b].iter().enumerate() {
                    let t = &mut self.totals[c];
                    *t += x;
                    if *t > self.cap[c] {
                        return false;
                    }
                }
            }
        } else {
            for (img, cur) in atom.images.iter().zip(&self.elems) {
                for &x in img {
                    for &y in cur {
                        let c1 = self.classes.of(x, y);
                        let c2 = self.classes.of(y, x);
                        self.totals[c1] += 1;
                        self.totals[c2] += 1;
                        if self.totals[c1] > self.cap[c1] || self.totals[c2] > self.cap[c2] {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn push(&mut self, a: usize) {
        let atom = &self.layout.atoms[a];
        for (img, cur) in atom.images.iter().zip(self.elems.iter_mut()) {
            cur.extend_from_slice(img);
        }
        self.chosen.push(a);
        self.size += atom.size;
    }

    fn pop(&mut self, a: usize, saved: &[u32]) {
        let atom = &self.layout.atoms[a];
        for (img, cur) in atom.images.iter().zip(self.elems.iter_mut()) {
            cur.truncate(cur.len() - img.len());
        }
        self.chosen.pop();
        self.size -= atom.size;
        self.totals.copy_from_slice(saved);
    }

    /// Depth-first walk from decision `depth`; `emit` sees each complete choice
    /// and returns false to stop the walk.
    fn walk(&mut self, depth: usize, emit: &mut dyn FnMut(&Walker<'_>) -> bool) -> bool {
        if !self.tick() {
            return false;
        }
        let lay = self.layout;
        if self.size + lay.min_rest[depth] > self.target || self.size + lay.max_rest[depth] < self.target {
            return true;
        }
        if self.size == self.target && lay.min_rest[depth] == 0 {
            // every remaining decision has an empty option
            return emit(self);
        }
        if depth == lay.decisions.len() {
            return true;
        }
        let saved = self.totals.clone();
        for opt in &lay.decisions[depth].options {
            match *opt {
                None => {
                    if !self.walk(depth + 1, emit) {
                        return false;
                    }
                }
                Some(a) => {
                    let ok = self.add(a);
                    self.push(a);
                    if ok && !self.walk(depth + 1, emit) {
                        self.pop(a, &saved);
                        return false;
                    }
                    self.pop(a, &saved);
                }
            }
        }
        true
    }

    /// Replays a prefix of options without branching.
    fn replay(&mut self, prefix: &[Option<usize>]) -> bool {
        for a in prefix.iter().flatten() {
            let ok = self.add(*a);
            self.push(*a);
            if !ok {
                return false;
            }
        }
        true
    }
}

/// X1 must be invariant under μ³ for a spin pair, so its group is enlarged.
fn outer_group(problem: &SearchProblem, h: &UnitSubgroup, mu: u32) -> Result<UnitSubgroup> {
    let v = problem.params.v;
    match problem.structure {
        Structure::Spin => h.join(&[mul_mod(mul_mod(mu, mu, v), mu, v)]),
        _ => Ok(h.clone()),
    }
}

/// Whether X0 and X1 are free to translate (and so enumerated up to translation).
fn normalization(problem: &SearchProblem, h: &UnitSubgroup, outer: &UnitSubgroup) -> (bool, bool) {
    let (c0, c1) = problem.symmetry;
    let k = problem.params.k;
    (
        h.is_trivial() && c0 == BlockConstraint::Free && k[0] > 0,
        outer.is_trivial() && c1 == BlockConstraint::Free && k[1] > 0,
    )
}

fn smallest_translate(x: &ResidueSet) -> ResidueSet {
    translates(x).into_iter().next().expect("at least one translate")
}

/// The representative of `(f, mu)` that a search with `reduce_translations`
/// reports: the smallest translate of X0 and the smallest translate of X1
/// that keeps the requested structure, each only when that block is free to
/// translate. Returns `f` unchanged when the problem does not reduce.
pub fn reduced_form(problem: &SearchProblem, f: &DifferenceFamily, mu: u32) -> Result<DifferenceFamily> {
    if !problem.reduce_translations {
        return Ok(f.clone());
    }
    let v = f.modulus();
    let h = match &problem.group {
        Some(h) => h.clone(),
        None => UnitSubgroup::trivial(v)?,
    };
    let outer = outer_group(problem, &h, mu)?;
    let (inner_free, outer_free) = normalization(problem, &h, &outer);
    let x0 = if inner_free { smallest_translate(f.block(0)) } else { f.block(0).clone() };
    let x1 = if outer_free {
        translates(f.block(1))
            .into_iter()
            .find(|x1| {
                let x3 = x1.scale_unchecked(mu).scale_unchecked(mu);
                let closes = x3.scale_unchecked(mu) == *x1;
                match problem.structure {
                    Structure::Spin => closes,
                    Structure::Slide => !closes,
                    Structure::Either => true,
                }
            })
            .unwrap_or_else(|| f.block(1).clone())
    } else {
        f.block(1).clone()
    };
    DifferenceFamily::from_multiplier(x0, x1, mu)
}

/// Everything fixed for one multiplier.
struct Plan {
    v: u32,
    mu: u32,
    k0: u32,
    k: u32,
    structure: Structure,
    classes: Classes,
    outer: Layout,
    inner: Layout,
    normalize_outer: bool,
    normalize_inner: bool,
    /// X0 uses [`SmallInner`].
    small_inner: bool,
    reduce: bool,
    cap: Vec<u32>,
    spectrum: Option<Spectrum>,
}

impl Plan {
    fn new(problem: &SearchProblem, h: &UnitSubgroup, mu: u32) -> Result<Option<Plan>> {
        let v = problem.params.v;
        let mu2 = mul_mod(mu, mu, v);
        let outer_group = outer_group(problem, h, mu)?;
        let classes = Classes::new(h);
        let (c0, c1) = problem.symmetry;
        let (normalize_inner, normalize_outer) = normalization(problem, h, &outer_group);
        let Some(outer) = Layout::build(&outer_group, c1, &[1 % v, mu, mu2], &classes, normalize_outer)
        else {
            return Ok(None);
        };
        let Some(inner) = Layout::build(h, c0, &[1 % v], &classes, normalize_inner) else {
            return Ok(None);
        };
        let lambda = problem.params.lambda;
        let cap = classes.size.iter().map(|&s| s * lambda).collect();
        Ok(Some(Plan {
            v,
            mu,
            k0: problem.params.k[0],
            k: problem.params.k[1],
            structure: problem.structure,
            classes,
            outer,
            inner,
            normalize_outer,
            normalize_inner,
            small_inner: h.is_trivial() && c0 == BlockConstraint::Free && v <= 128,
            reduce: problem.reduce_translations,
            cap,
            spectrum: problem.spectral_filter.then(|| Spectrum::new(v, problem.params.order() as f64)),
        }))
    }

    /// Prefixes of the outer decision tree used as parallel work units.
    fn split(&self, control: &Control, want: usize) -> (Vec<Vec<Option<usize>>>, u64) {
        let mut frontier: Vec<Vec<Option<usize>>> = vec![Vec::new()];
        let mut nodes = 0;
        let mut depth = 0;
        while frontier.len() < want && depth < self.outer.decisions.len().saturating_sub(1) {
            let mut next = Vec::new();
            for prefix in frontier {
                nodes += 1;
                for opt in &self.outer.decisions[depth].options {
                    let mut p = prefix.clone();
                    p.push(*opt);
                    let mut w = Walker::new(&self.outer, &self.classes, control, self.k, self.cap.clone());
                    let size: u32 = p.iter().flatten().map(|&a| self.outer.atoms[a].size).sum();
                    if size + self.outer.min_rest[depth + 1] > self.k
                        || size + self.outer.max_rest[depth + 1] < self.k
                    {
                        continue;
                    }
                    if w.replay(&p) {
                        next.push(p);
                    }
                }
            }
            frontier = next;
            depth += 1;
        }
        (frontier, nodes)
    }
}

/// Character values of Z_v for the spectral bound.
struct Spectrum {
    v: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    bound: f64,
}

impl Spectrum {
    fn new(v: u32, n: f64) -> Self {
        let (cos, sin) = (0..v)
            .map(|t| {
                let a = std::f64::consts::TAU * t as f64 / v as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Spectrum { v: v as usize, cos, sin, bound: n + 1e-6 * (1.0 + n) }
    }

    /// False if some nontrivial character has `Σ |χ(B)|² > n` over `blocks`.
    fn admits(&self, blocks: &[Vec<u32>]) -> bool {
        let v = self.v;
        // χ_j and χ_{-j} have equal norms
        (1..=v / 2).all(|j| {
            let mut total = 0.0;
            for b in blocks {
                let (mut re, mut im) = (0.0, 0.0);
                for &x in b {
                    let t = j * x as usize % v;
                    re += self.cos[t];
                    im += self.sin[t];
                }
                total += re * re + im * im;
            }
            total <= self.bound
        })
    }
}

struct UnitResult {
    found: Vec<(DifferenceFamily, u32)>,
    nodes: u64,
}

/// Smallest sorted element list among the translates of `x1` that contain 0.
fn is_canonical_translate(x1: &[u32], v: u32) -> bool {
    let mut base: Vec<u32> = x1.to_vec();
    base.sort_unstable();
    for &s in &base {
        let mut t: Vec<u32> = base.iter().map(|&x| (x + v - s) % v).collect();
        t.sort_unstable();
        if t < base {
            return false;
        }
    }
    true
}

fn translates(x: &ResidueSet) -> Vec<ResidueSet> {
    let mut out: Vec<ResidueSet> = (0..x.modulus()).map(|t| x.translate(t)).collect();
    out.sort();
    out.dedup();
    out
}

fn run_unit(
    plan: &Plan,
    prefix: &[Option<usize>],
    control: &Control,
    limit_counter: &AtomicU64,
    limit: Option<usize>,
) -> UnitResult {
    let v = plan.v;
    let mut found = Vec::new();
    let mut nodes = 0u64;
    let mut cache: HashMap<Vec<u32>, Arc<Vec<ResidueSet>>> = HashMap::new();
    let mut outer = Walker::new(&plan.outer, &plan.classes, control, plan.k, plan.cap.clone());
    if !outer.replay(prefix) {
        return UnitResult { found, nodes: 0 };
    }
    let depth = prefix.len();
    let mut emit = |w: &Walker<'_>| -> bool {
        let x1_elems = &w.elems[0];
        if plan.normalize_outer && !is_canonical_translate(x1_elems, v) {
            return true;
        }
        if plan.spectrum.as_ref().is_some_and(|s| !s.admits(&w.elems)) {
            return true;
        }
        let delta: Vec<u32> = plan.cap.iter().zip(&w.totals).map(|(c, t)| c - t).collect();
        let x0s = match cache.get(&delta) {
            Some(x0s) => x0s.clone(),
            None => {
                let (x0s, n) = complete_inner(plan, &delta, control);
                nodes += n;
                let x0s = Arc::new(x0s);
                cache.insert(delta, x0s.clone());
                x0s
            }
        };
        if x0s.is_empty() {
            return true;
        }
        let x1 = ResidueSet::from_residues(v, x1_elems.iter().copied()).expect("in range");
        let x1s = if plan.normalize_outer { translates(&x1) } else { vec![x1] };
        let mut emitted = false;
        for x1 in x1s {
            if emitted && plan.reduce {
                break;
            }
            let x2 = x1.scale_unchecked(plan.mu);
            let x3 = x2.scale_unchecked(plan.mu);
            let closes = x3.scale_unchecked(plan.mu) == x1;
            let ok = match plan.structure {
                Structure::Spin => closes,
                Structure::Slide => !closes,
                Structure::Either => true,
            };
            if !ok {
                continue;
            }
            emitted = true;
            for x0 in x0s.iter() {
                let f = DifferenceFamily::new([x0.clone(), x1.clone(), x2.clone(), x3.clone()])
                    .expect("same modulus");
                found.push((f, plan.mu));
                if let Some(l) = limit {
                    if limit_counter.fetch_add(1, Ordering::Relaxed) + 1 >= l as u64 {
                        control.stop.store(true, Ordering::Relaxed);
                        return false;
                    }
                }
            }
        }
        true
    };
    outer.walk(depth, &mut emit);
    outer.flush();
    nodes += outer.nodes;
    UnitResult { found, nodes }
}

/// All X0 realizing the residual class totals `delta` exactly.
fn complete_inner(plan: &Plan, delta: &[u32], control: &Control) -> (Vec<ResidueSet>, u64) {
    let v = plan.v;
    if plan.small_inner {
        let (out, nodes) = SmallInner::run(plan, delta, control);
        return (expand_inner(plan, out), nodes);
    }
    if let Some(table) = &plan.inner.table {
        let (out, nodes) = AtomInner::run(plan, table, delta, control);
        return (expand_inner(plan, out), nodes);
    }
    let mut w = Walker::new(&plan.inner, &plan.classes, control, plan.k0, delta.to_vec());
    let mut out = Vec::new();
    let mut emit = |w: &Walker<'_>| -> bool {
        if w.totals.as_slice() == delta {
            out.push(ResidueSet::from_residues(v, w.elems[0].iter().copied()).expect("in range"));
        }
        true
    };
    w.walk(0, &mut emit);
    w.flush();
    (expand_inner(plan, out), w.nodes)
}

fn expand_inner(plan: &Plan, out: Vec<ResidueSet>) -> Vec<ResidueSet> {
    if !plan.normalize_inner {
        return out;
    }
    if plan.reduce {
        return out.into_iter().filter(|x| is_canonical_translate(&x.to_vec(), plan.v)).collect();
    }
    let mut all: Vec<ResidueSet> = out.iter().flat_map(translates).collect();
    all.sort();
    all.dedup();
    all
}

/// X0 completion over orbit atoms with forward checking. For every atom not
/// yet decided, `acc` holds what adding it now would contribute (its internal
/// differences plus its cross terms with the chosen atoms); atoms that would
/// overshoot are skipped, and a branch dies when the surviving options cannot
/// reach the target size.
struct AtomInner<'a> {
    v: u32,
    layout: &'a Layout,
    table: &'a [Vec<u32>],
    control: &'a Control,
    nc: usize,
    target: u32,
    cap: &'a [u32],
    totals: Vec<u32>,
    acc: Vec<u32>,
    /// Atoms of decisions after each depth.
    later: Vec<Vec<usize>>,
    chosen: Vec<usize>,
    size: u32,
    out: Vec<ResidueSet>,
    nodes: u64,
    unflushed: u64,
}

impl<'a> AtomInner<'a> {
    fn run(plan: &'a Plan, table: &'a [Vec<u32>], delta: &'a [u32], control: &'a Control) -> (Vec<ResidueSet>, u64) {
        let layout = &plan.inner;
        let nc = plan.classes.len();
        let n = layout.atoms.len();
        let mut acc = vec![0u32; n * nc];
        for (a, atom) in layout.atoms.iter().enumerate() {
            for &(c, k) in &atom.internal {
                acc[a * nc + c as usize] += k;
            }
        }
        let decisions = &layout.decisions;
        let later = (0..decisions.len())
            .map(|d| decisions[d + 1..].iter().flat_map(|x| x.options.iter().flatten().copied()).collect())
            .collect();
        let mut st = AtomInner {
            v: plan.v,
            layout,
            table,
            control,
            nc,
            target: plan.k0,
            cap: delta,
            totals: vec![0; nc],
            acc,
            later,
            chosen: Vec::new(),
            size: 0,
            out: Vec::new(),
            nodes: 0,
            unflushed: 0,
        };
        st.walk(0);
        control.spent.fetch_add(st.unflushed, Ordering::Relaxed);
        (st.out, st.nodes)
    }

    fn feasible(&self, a: usize) -> bool {
        let row = &self.acc[a * self.nc..(a + 1) * self.nc];
        row.iter().zip(&self.totals).zip(self.cap).all(|((x, t), c)| x + t <= *c)
    }

    fn walk(&mut self, depth: usize) -> bool {
        self.nodes += 1;
        self.unflushed += 1;
        if self.unflushed >= FLUSH {
            let spent = self.control.spent.fetch_add(self.unflushed, Ordering::Relaxed) + self.unflushed;
            self.unflushed = 0;
            if self.control.budget.is_some_and(|b| spent > b) {
                self.control.out_of_budget.store(true, Ordering::Relaxed);
            }
        }
        if self.control.halted() {
            return false;
        }
        let lay = self.layout;
        if self.size == self.target && lay.min_rest[depth] == 0 {
            if self.totals.as_slice() == self.cap {
                let v = self.v;
                let elems = self.chosen.iter().flat_map(|&a| lay.atoms[a].images[0].iter().copied());
                self.out.push(ResidueSet::from_residues(v, elems).expect("in range"));
            }
            return true;
        }
        if depth == lay.decisions.len() {
            return true;
        }
        let (mut lo, mut hi) = (0u32, 0u32);
        for d in &lay.decisions[depth..] {
            let sizes = d.options.iter().filter_map(|o| match *o {
                None => Some(0),
                Some(a) => self.feasible(a).then(|| lay.atoms[a].size),
            });
            let Some((l, h)) = sizes.fold(None, |acc: Option<(u32, u32)>, s| {
                Some(acc.map_or((s, s), |(l, h)| (l.min(s), h.max(s))))
            }) else {
                // no option of this decision fits
                return true;
            };
            lo += l;
            hi += h;
        }
        if self.size + lo > self.target || self.size + hi < self.target {
            return true;
        }
        for opt in &lay.decisions[depth].options {
            match *opt {
                None => {
                    if !self.walk(depth + 1) {
                        return false;
                    }
                }
                Some(a) => {
                    if !self.feasible(a) {
                        continue;
                    }
                    self.apply(a, depth, true);
                    let keep_going = self.walk(depth + 1);
                    self.apply(a, depth, false);
                    if !keep_going {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Adds (or removes) atom `a` chosen at `depth`.
    fn apply(&mut self, a: usize, depth: usize, add: bool) {
        let nc = self.nc;
        let n = self.layout.atoms.len();
        if add {
            for c in 0..nc {
                self.totals[c] += self.acc[a * nc + c];
            }
            for &b in &self.later[depth] {
                let row = &self.table[b * n + a];
                for c in 0..nc {
                    self.acc[b * nc + c] += row[c];
                }
            }
            self.chosen.push(a);
            self.size += self.layout.atoms[a].size;
        } else {
            for &b in &self.later[depth] {
                let row = &self.table[b * n + a];
                for c in 0..nc {
                    self.acc[b * nc + c] -= row[c];
                }
            }
            for c in 0..nc {
                self.totals[c] -= self.acc[a * nc + c];
            }
            self.chosen.pop();
            self.size -= self.layout.atoms[a].size;
        }
    }
}

/// X0 completion for unconstrained blocks over Z_v with `v <= 128`, choosing
/// elements in increasing order with forward checking: after each choice the
/// candidate mask drops every `z` with some `z - s` whose budget is spent.
struct SmallInner<'a> {
    v: u32,
    full: u128,
    control: &'a Control,
    /// Remaining budget per difference d.
    rem: Vec<u32>,
    /// Differences with no budget left.
    spent: u128,
    chosen: Vec<u32>,
    out: Vec<ResidueSet>,
    nodes: u64,
    unflushed: u64,
}

impl<'a> SmallInner<'a> {
    fn run(plan: &Plan, delta: &[u32], control: &'a Control) -> (Vec<ResidueSet>, u64) {
        let v = plan.v;
        let full = if v == 128 { u128::MAX } else { (1u128 << v) - 1 };
        let mut rem = vec![0u32; v as usize];
        for d in 1..v as usize {
            rem[d] = delta[plan.classes.class_of[d] as usize];
        }
        let spent = (1..v).filter(|&d| rem[d as usize] == 0).fold(1u128, |m, d| m | 1 << d);
        let mut st = SmallInner {
            v,
            full,
            control,
            rem,
            spent,
            chosen: Vec::new(),
            out: Vec::new(),
            nodes: 0,
            unflushed: 0,
        };
        let k0 = plan.k0 as usize;
        if k0 == 0 {
            st.out.push(ResidueSet::empty(v).expect("valid modulus"));
        } else if plan.normalize_inner {
            if st.place(0) {
                let cand = st.candidates(full & !1);
                st.walk(cand, k0);
            }
        } else {
            st.walk(full, k0);
        }
        control.spent.fetch_add(st.unflushed, Ordering::Relaxed);
        (st.out, st.nodes)
    }

    fn rot(&self, m: u128, s: u32) -> u128 {
        if s == 0 {
            m
        } else {
            ((m << s) | (m >> (self.v - s))) & self.full
        }
    }

    /// `cand` minus elements that would reuse a spent difference.
    fn candidates(&self, cand: u128) -> u128 {
        let mut bad = 0u128;
        for &s in &self.chosen {
            // z - s ∈ spent  <=>  z ∈ s + spent
            bad |= self.rot(self.spent, s);
        }
        cand & !bad
    }

    /// Adds `x`, charging all new differences; false on overshoot (state is
    /// still updated and must be undone with `unplace`).
    fn place(&mut self, x: u32) -> bool {
        let v = self.v;
        let mut ok = true;
        for i in 0..self.chosen.len() {
            let s = self.chosen[i];
            for d in [(x + v - s) % v, (s + v - x) % v] {
                let r = &mut self.rem[d as usize];
                if *r == 0 {
                    ok = false;
                    *r = u32::MAX; // marks the overshoot for unplace
                } else {
                    *r -= 1;
                    if *r == 0 {
                        self.spent |= 1 << d;
                    }
                }
            }
        }
        self.chosen.push(x);
        ok
    }

    fn unplace(&mut self) {
        let v = self.v;
        let x = self.chosen.pop().expect("placed");
        for i in (0..self.chosen.len()).rev() {
            let s = self.chosen[i];
            for d in [(s + v - x) % v, (x + v - s) % v] {
                let r = &mut self.rem[d as usize];
                if *r == u32::MAX {
                    *r = 0;
                } else {
                    *r += 1;
                    self.spent &= !(1 << d);
                }
            }
        }
    }

    fn walk(&mut self, cand: u128, k: usize) -> bool {
        self.nodes += 1;
        self.unflushed += 1;
        if self.unflushed >= FLUSH {
            let spent = self.control.spent.fetch_add(self.unflushed, Ordering::Relaxed) + self.unflushed;
            self.unflushed = 0;
            if self.control.budget.is_some_and(|b| spent > b) {
                self.control.out_of_budget.store(true, Ordering::Relaxed);
            }
        }
        if self.control.halted() {
            return false;
        }
        let need = k - self.chosen.len();
        if need == 0 {
            if self.rem[1..].iter().all(|&r| r == 0) {
                let set = ResidueSet::from_residues(self.v, self.chosen.iter().copied()).expect("in range");
                self.out.push(set);
            }
            return true;
        }
        if (cand.count_ones() as usize) < need {
            return true;
        }
        let mut rest = cand;
        while rest != 0 && rest.count_ones() as usize >= need {
            let x = rest.trailing_zeros();
            rest &= rest - 1;
            let ok = self.place(x);
            if ok {
                let next = self.candidates(rest);
                if !self.walk(next, k) {
                    self.unplace();
                    return false;
                }
            }
            self.unplace();
        }
        true
    }
}

/// Runs the two-stage search described in the module docs.
pub fn search(problem: &SearchProblem) -> Result<SearchOutcome> {
    problem.validate()?;
    if problem.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(problem.threads)
            .build()
            .map_err(|e| Error::Io(e.to_string()))?;
        pool.install(|| search_inner(problem))
    } else {
        search_inner(problem)
    }
}

fn search_inner(problem: &SearchProblem) -> Result<SearchOutcome> {
    let v = problem.params.v;
    let h = match &problem.group {
        Some(h) => h.clone(),
        None => UnitSubgroup::trivial(v)?,
    };
    let mus = match problem.mu {
        Some(m) => vec![m % v],
        None => eligible_multipliers_for(v, problem.structure, &h),
    };
    let control = Control {
        budget: problem.node_budget,
        spent: AtomicU64::new(0),
        out_of_budget: AtomicBool::new(false),
        stop: AtomicBool::new(false),
    };
    let limit_counter = AtomicU64::new(0);
    let mut nodes = 0u64;
    let mut raw: Vec<(DifferenceFamily, u32)> = Vec::new();
    let want = 4 * rayon::current_num_threads().max(1) * 8;
    for &mu in &mus {
        if control.halted() {
            break;
        }
        let Some(plan) = Plan::new(problem, &h, mu)? else {
            continue;
        };
        let (units, split_nodes) = plan.split(&control, want);
        nodes += split_nodes;
        let results: Vec<UnitResult> = units
            .par_iter()
            .map(|p| run_unit(&plan, p, &control, &limit_counter, problem.limit))
            .collect();
        for r in results {
            nodes += r.nodes;
            raw.extend(r.found);
        }
    }

    let mut rejected = 0;
    let mut unique: BTreeMap<(u32, DifferenceFamily), Solution> = BTreeMap::new();
    for (f, mu) in raw {
        let check = verify(&f);
        let report = match classify(&f, mu) {
            Ok(r) => r,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        let sizes_ok = f.sizes() == problem.params.k;
        let lambda_ok = check.params.is_some_and(|p| p.lambda == problem.params.lambda);
        if !(check.valid && sizes_ok && lambda_ok && problem.structure.accepts(report.kind)) {
            rejected += 1;
            continue;
        }
        // a pair and its partner are one solution; keep the smaller as found
        let (cf, cmu) = canonicalize_solution(&f, mu);
        let candidate = Solution { family: f, mu, report };
        unique
            .entry((cmu, cf))
            .and_modify(|s| {
                if (candidate.mu, &candidate.family) < (s.mu, &s.family) {
                    *s = candidate.clone();
                }
            })
            .or_insert(candidate);
    }
    let mut solutions: Vec<Solution> = unique.into_values().collect();
    solutions.sort_by(|a, b| (a.mu, &a.family).cmp(&(b.mu, &b.family)));
    let limit_hit = control.stop.load(Ordering::Relaxed);
    if let Some(l) = problem.limit {
        solutions.truncate(l);
    }
    let exhausted = !control.out_of_budget.load(Ordering::Relaxed) && !limit_hit;
    Ok(SearchOutcome { solutions, exhausted, nodes_explored: nodes, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eligible_examples() {
        assert_eq!(eligible_multipliers(27, Structure::Spin), vec![10, 19]);
        assert_eq!(eligible_multipliers(7, Structure::Spin), vec![2, 4]);
        assert!(eligible_multipliers(5, Structure::Spin).is_empty());
        assert_eq!(eligible_multipliers(7, Structure::Slide), vec![3, 5, 6]);
        let h = UnitSubgroup::closure(631, &[8]).unwrap();
        let spin = eligible_multipliers_for(631, Structure::Spin, &h);
        assert!(spin.contains(&2) && spin.contains(&4));
    }

    #[test]
    fn canonical_translates() {
        assert!(is_canonical_translate(&[0, 1, 3], 7));
        assert!(!is_canonical_translate(&[0, 2, 3], 7));
    }

    #[test]
    fn symmetry_parse() {
        assert_eq!(
            parse_symmetry("ks").unwrap(),
            (BlockConstraint::Skew, BlockConstraint::Symmetric)
        );
        assert!(parse_symmetry("k").is_err());
    }

    #[test]
    fn seven_spin() {
        let p = SearchProblem::new(ParameterSet::special(7, 3, 2, 2), Structure::Spin).with_mu(2);
        let out = search(&p).unwrap();
        assert!(out.exhausted);
        assert_eq!(out.rejected, 0);
        assert!(!out.solutions.is_empty());
        assert!(out.solutions.iter().all(|s| s.mu == 2 && verify(&s.family).valid));
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = SearchProblem::new(ParameterSet::special(7, 3, 2, 3), Structure::Spin);
        assert!(matches!(search(&p), Err(Error::InfeasibleParameters(_))));
        let p = SearchProblem::new(ParameterSet::new(13, [4, 4, 5, 6], 6), Structure::Spin);
        assert!(search(&p).is_err());
    }
}
