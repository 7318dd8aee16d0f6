//! AGEM gradient projection.

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Projects `g` away from conflict with the reference gradient: when
/// `g·g_ref ≥ 0` the gradient passes through unchanged, otherwise its
/// component along `g_ref` is removed.
pub fn project(g: &[f64], g_ref: &[f64]) -> Result<Vec<f64>> {
    if g.len() != g_ref.len() {
        return Err(Error::contract(format!(
            "gradient length {} vs reference length {}",
            g.len(),
            g_ref.len()
        )));
    }
    let d = dot(g, g_ref);
    if d >= 0.0 {
        return Ok(g.to_vec());
    }
    let denom = dot(g_ref, g_ref);
    let scale = d / denom;
    Ok(g.iter().zip(g_ref).map(|(&gi, &ri)| gi - scale * ri).collect())
}
