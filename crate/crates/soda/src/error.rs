use thiserror::Error;

/// Errors produced when building or validating a market.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MarketError {
    #[error("hospital {0} has capacity 0; capacities must be at least 1")]
    ZeroCapacity(u32),
    #[error("total hospital capacity is 0; markets need at least one position")]
    NoPositions,
    #[error("hospital ids are not dense from 0 (got {got}, expected {expected})")]
    HospitalIdsNotDense { got: u32, expected: u32 },
    #[error("doctor ids are not dense from 0: id {0} out of range or missing")]
    DoctorIdsNotDense(u32),
    #[error("doctor id {0} appears in more than one role")]
    DuplicateDoctor(u32),
    #[error("hospital {hospital}: ranking is not a permutation of all doctors")]
    RankingNotPermutation { hospital: u32 },
    #[error("single {doctor}: preference list repeats hospital {hospital}")]
    DuplicateSinglePref { doctor: u32, hospital: u32 },
    #[error("couple {couple}: preference list repeats a hospital pair")]
    DuplicateCouplePref { couple: usize },
    #[error("couple {couple}: both members are the same doctor")]
    DegenerateCouple { couple: usize },
    #[error("unknown hospital id {0}")]
    UnknownHospital(u32),
    #[error("unknown doctor id {0}")]
    UnknownDoctor(u32),
}

/// Errors from the influence-analysis operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InfluenceError {
    #[error("rejection budget must be non-negative (got {0})")]
    NegativeBudget(i64),
    #[error("couple index {0} out of range")]
    UnknownCouple(u32),
    #[error("expected one influence tree per couple ({expected}), got {got}")]
    WrongTreeCount { expected: usize, got: usize },
    #[error("influence trees were built with mismatched budgets ({0} vs {1})")]
    MismatchedBudgets(u32, u32),
    #[error("influence tree exceeded the safety bound of {bound} entries")]
    TreeBudgetExceeded { bound: usize },
}

/// Errors from generators, the exhaustive oracle, and the pessimistic process.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("counterexample construction needs n >= 2 (got {0})")]
    CounterexampleTooSmall(usize),
    #[error("market failed validation after generation: {0}")]
    Market(#[from] MarketError),
    #[error("enumeration would visit {candidates} matchings, above the budget of {budget}")]
    BudgetExceeded { candidates: u128, budget: u64 },
    #[error("pessimistic process requires all capacities to be 1")]
    PessimisticCapacity,
    #[error("pessimistic process: l={l} exceeds the shortest preference list ({shortest})")]
    PessimisticListTooShort { l: usize, shortest: usize },
}
