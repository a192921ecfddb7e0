//! Comparison methods sharing the T²/KDE monitoring of [`crate::monitor`].

pub mod ae;
pub mod kpca;
pub mod pca;

pub use ae::{ae_train, sae_train, AeConfig, AeModel, AeParams, AeTrace};
pub use kpca::{kpca_fit, KpcaModel};
pub use pca::{components_for_energy, pca_fit, Components, PcaModel};
