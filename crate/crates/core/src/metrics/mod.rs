//! Pure numeric metrics for fidelity and downstream evaluation.

mod classification;
mod rouge;
mod similarity;
mod special;
mod ttest;

pub use classification::{auc_roc, f1_binary, median_binarize, mse, pearson_r};
pub use rouge::{rouge_l, rouge_n, tokenize, Prf};
pub use similarity::{cosine_similarity, EmbeddingVector, SimilarityScore};
pub use special::{ln_gamma, regularized_incomplete_beta, student_t_two_sided_p};
pub use ttest::{paired_t_test, TTestResult};
