//! Symbolic core for object-oriented world modeling with UML plans.
//!
//! - [`parser`] reads PlantUML activity and class diagrams into typed trees.
//! - [`envelope`] splits model output into its reasoning and answer parts.
//! - [`embedding`] turns action text into vectors, offline or via a service.
//! - [`alignment`] pairs predicted and reference actions greedily.
//! - [`reward`] combines format and semantic scores into one reward.
//! - [`grpo`] computes group-relative advantages and the clipped loss.
//! - [`eval`] scores whole corpora with precision, recall and F1.

pub mod alignment;
pub mod diagram;
pub mod embedding;
pub mod envelope;
pub mod eval;
pub mod grpo;
pub mod parser;
pub mod reward;

pub use alignment::{
    greedy_match, greedy_match_matrix, partition_reward, MatchSet, MatchedPair, SimilarityMatrix,
};
pub use diagram::{
    ActivityDiagram, CanonicalKey, ClassDiagram, CollectOptions, FlowElement, Partition,
};
pub use embedding::{
    cosine, EmbedError, EmbeddingProvider, EmbeddingVector, HashingEmbedder, ServiceConfig,
    ServiceEmbedder,
};
pub use envelope::{split_envelope, split_envelope_with, Defect, Envelope, EnvelopeOptions};
pub use grpo::{
    group_advantages, grpo_loss, AdvantageBatch, GrpoError, PolicyRatioSample, RewardGroup,
};
pub use parser::{
    parse_activity, parse_class, serialize_activity, serialize_class, ParseError, ParseErrorKind,
    ParseMode,
};
pub use reward::{
    compute_reward, FailureCause, Paradigm, RewardBreakdown, RewardError, RewardOptions,
    RewardRequest,
};
