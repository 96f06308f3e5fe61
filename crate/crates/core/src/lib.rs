//! Informative multi-agent collaboration over information-asymmetric social
//! networks: each agent sees only its own user's messages, plans the missing
//! rationale explicitly, retrieves from mixed memory and reaches a consensus
//! with a partner agent. Includes benchmark generators with algorithmic
//! oracles, metrics and a deterministic evaluation harness.

pub mod agent;
pub mod backend;
pub mod benchgen;
pub mod corpus;
pub mod eval;
pub mod harness;
pub mod infonav;
pub mod memory;
pub mod trajectory;
