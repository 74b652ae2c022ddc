//! Shared fixtures for the benchmarks.

use cevmix::{BoundaryBehaviour, CevModel};

/// The reference parameter set `y0 = 0.07`, `xi = 0.2 y0^{1/2-p}`, `t = 0.5`.
pub fn reference_model(p: f64) -> CevModel {
    CevModel::with_xi_auto(0.07, 0.2, 0.5, p, BoundaryBehaviour::Absorbing).expect("valid parameters")
}
