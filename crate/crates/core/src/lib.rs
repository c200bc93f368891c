//! Goethals-Seidel difference families over cyclic groups.
//!
//! - [`zmod`]: subsets of Z_v, unit multipliers, subgroup orbits
//! - [`family`]: four-block difference families, parameter identities, spin/slide structure
//! - [`matrix`]: the Goethals-Seidel array with bit-packed Hadamard and skew checks
//! - [`search`]: backtracking search for spin and slide families
//! - [`primes`]: prime chains under `p -> 2p + 1` and their census
//! - [`record`], [`corpus`]: the family file format and the bundled corpus regression

pub mod corpus;
pub mod error;
pub mod family;
pub mod matrix;
pub mod primes;
pub mod record;
pub mod search;
pub mod zmod;

pub use error::{Error, Result};
pub use family::{
    check_parameters, classify, complement_block, difference_counts, find_multipliers, verify,
    DifferenceFamily, NamedClass, ParameterCheck, ParameterSet, StructureKind, StructureReport,
    SymbolPattern, SymmetrySymbol, SymmetryType, Verification,
};
pub use matrix::{assemble_gs, back_identity, circulant, pm_row, PmMatrix};
pub use corpus::{run_corpus, CorpusOptions, CorpusReport};
pub use record::{parse_family, FamilyRecord};
pub use primes::{census, chain, is_head, is_prime, sigma, CensusRow, PrimeChain};
pub use search::{
    canonicalize_solution, eligible_multipliers, eligible_multipliers_for, reduced_form, search,
    BlockConstraint,
    SearchOutcome, SearchProblem, Solution, Structure,
};
pub use zmod::{ResidueSet, UnitSubgroup};
