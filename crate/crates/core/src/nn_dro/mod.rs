//! Desk-scale distributionally robust training: a small ELU network, the
//! penalized robust objective over perturbed inputs, and FGSM evaluation.

pub mod data;
pub mod dro;
pub mod mlp;
pub mod train;

pub use data::{label_of, make_synthetic_dataset, make_synthetic_dataset_sized, Dataset};
pub use dro::{fgsm_eval, fgsm_perturb, make_dro_problem, DroProblem};
pub use mlp::{forward, forward_backward, Arch, Backprop, MlpParams};
pub use train::{train_dro, DroTrainConfig, DroTrainResult, EpochRecord};
