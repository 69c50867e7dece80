use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModMathError {
    #[error("zero has no multiplicative inverse")]
    ZeroNotInvertible,
    #[error("exponent is not coprime to the group order")]
    NotCoprime,
    #[error("modulus is below the minimum of 23")]
    PrimeTooSmall,
    #[error("modulus failed the primality test")]
    NotPrime,
    #[error("prime generation needs at least 5 bits, got {0}")]
    BitLengthTooSmall(u64),
    #[error("not a canonical lowercase hex integer: {0:?}")]
    BadHex(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("identity {0:?} does not satisfy the identity policy")]
    BadIdentityFormat(String),
    #[error("identity {0:?} reduces to a degenerate base (0, 1 or p-1)")]
    DegenerateIdentity(String),
    #[error("malformed login request: {0}")]
    MalformedRequest(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    /// The card needs the shadow identity for `C1 = SID^r`, but the user only
    /// keyed in `(ID, PW)` and the card stores no SID.
    #[error("login cannot proceed: the shadow identity SID is neither stored on the card nor keyed in by the user")]
    MissingSid,
    #[error("card inputs are for scheme {keyed}, card is provisioned for {card}")]
    InputMismatch { card: String, keyed: String },
    #[error("password must lie in [1, p-1]")]
    PasswordOutOfRange,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttackError {
    #[error("exponent k is not invertible modulo p-1")]
    NotCoprime,
    #[error("coalition forgery needs at least one pair")]
    EmptyCoalition,
    #[error("server refused to register the derived identity: {0}")]
    RegistrationRefused(String),
    #[error("attack {attack} is not defined against scheme {scheme}")]
    UnsupportedCombination { attack: String, scheme: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("scenario not supported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
}
