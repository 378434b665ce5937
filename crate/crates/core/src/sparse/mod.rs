//! ℓ¹-regularised sparse coding and dictionary learning.

pub(crate) mod dictionary;
mod lasso;
mod learn;

pub use dictionary::{mutual_coherence, Dictionary};
pub use lasso::{kkt_violation, lasso_objective, sparse_code, sparse_code_warm, LassoOptions, SparseCode};
pub use learn::{learn_dictionary, mod_update, LearnOptions, LearnedDictionary};
