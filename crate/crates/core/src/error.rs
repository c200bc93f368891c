use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("modulus must be odd and positive, got {0}")]
    InvalidModulus(u32),

    #[error("residue {residue} out of range for modulus {modulus}")]
    ResidueOutOfRange { residue: u64, modulus: u32 },

    #[error("multiplier not invertible: gcd({mu}, {modulus}) != 1")]
    NotInvertible { mu: u32, modulus: u32 },

    #[error("blocks have mismatched moduli ({0} vs {1})")]
    ModulusMismatch(u32, u32),

    #[error("block index {0} out of range (expected 0..=3)")]
    BlockIndex(usize),

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("{0} is not a chain head")]
    NotChainHead(u64),

    #[error("infeasible parameters: {0}")]
    InfeasibleParameters(String),

    #[error("lambda mismatch: declared {declared}, realized {realized}")]
    LambdaMismatch { declared: u64, realized: u64 },

    #[error("block sizes mismatch: declared {declared:?}, realized {realized:?}")]
    SizeMismatch { declared: [u32; 4], realized: [u32; 4] },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
