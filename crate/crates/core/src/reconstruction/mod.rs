//! Sparse-recovery task models: classical ISTA and the unrolled LISTA network.

mod ista;
mod lista;
mod sensing;
mod shrink;

pub use ista::{
    ista, ista_batch, ista_realified, ista_with_observer, lasso_objective, soft_threshold,
    IstaConfig,
};
pub use lista::{
    init_lista, lista_backward, lista_forward, lista_forward_batch, ListaCache, ListaGrads,
    ListaParams, LISTA_FOLDS, LISTA_INIT_THRESHOLD, SHRINK_SLOPE,
};
pub use sensing::{build_sensing_matrix, dft_matrix, realify_measurements, SensingMatrix};
pub use shrink::{sigmoid, sigmoid_shrink, sigmoid_shrink_grad};
