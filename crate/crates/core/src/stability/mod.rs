//! Stability auditing: dominance, blocking searches, witnesses and their checker.

pub mod checker;
pub mod dichotomy;
pub mod fosd;
mod program;
pub mod search;
pub mod witness;

pub use checker::{verify_block_witness, verify_interim_witness};
pub use dichotomy::{
    ex_post_to_interim, interim_instability_witness, interim_to_ex_ante, mutual_first_violation, InstabilityWitness,
    MutualFirstViolation,
};
pub use fosd::{fosd_compare, Dominance, DominanceVerdict};
pub use program::strictness_checks;
pub use search::{
    ex_ante_block, ex_ante_block_in, ex_ante_pairwise_stable, ex_ante_stable, ex_post_block, ex_post_stable_at,
    interim_block, interim_block_in, interim_pairwise_stable, interim_stable, Audit, InterimSearch, SearchOptions,
    StabilityReport, Verdict,
};
pub use witness::{
    coalitions_up_to, pairwise_coalitions, AgentEvidence, BlockWitness, Coalition, Deviation, Fallback,
    InterimWitness, TypeEvidence,
};
