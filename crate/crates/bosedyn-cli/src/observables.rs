//! Observable extraction: every engine reduces its state to a
//! single-particle density matrix per output time, from which mode
//! occupations ⟨a†_k a_k⟩ = N ρ⁽¹⁾_kk, the momentum distribution
//! p_k = N ⟨k|ρ⁽¹⁾|k⟩ over the unitary DFT modes, and natural-orbital
//! occupations follow.

use bosedyn_core::linalg::{self, CMatrix};

use crate::config::ObservableSet;

/// One output-time record of an engine run.
#[derive(Debug, Clone)]
pub struct EngineFrame {
    pub time: f64,
    /// Single-particle reduced density matrix (unit trace up to the
    /// engine's own drift).
    pub rho1: CMatrix,
    pub purity: f64,
    pub energy: f64,
    pub trace_distance_exact: Option<f64>,
}

pub fn column_names(obs: &ObservableSet, d: usize, with_distance: bool) -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    if obs.occupations {
        cols.extend((0..d).map(|k| format!("occ_{k}")));
    }
    if obs.momentum {
        cols.extend((0..d).map(|k| format!("p_{k}")));
    }
    if obs.purity {
        cols.push("purity".into());
    }
    if obs.energy {
        cols.push("energy".into());
    }
    if obs.trace_distance_exact && with_distance {
        cols.push("trace_distance_exact".into());
    }
    if obs.natural_occupations {
        cols.extend((0..d).map(|k| format!("nocc_{k}")));
    }
    cols
}

pub fn row_values(
    obs: &ObservableSet,
    frame: &EngineFrame,
    n: usize,
    dft: &CMatrix,
    with_distance: bool,
) -> Vec<f64> {
    let d = frame.rho1.nrows();
    let scale = n as f64;
    let mut row = vec![frame.time];
    if obs.occupations {
        for k in 0..d {
            row.push(scale * frame.rho1[(k, k)].re);
        }
    }
    if obs.momentum {
        let in_k = dft.adjoint() * &frame.rho1 * dft;
        for k in 0..d {
            row.push(scale * in_k[(k, k)].re);
        }
    }
    if obs.purity {
        row.push(frame.purity);
    }
    if obs.energy {
        row.push(frame.energy);
    }
    if obs.trace_distance_exact && with_distance {
        row.push(frame.trace_distance_exact.unwrap_or(f64::NAN));
    }
    if obs.natural_occupations {
        let mut w: Vec<f64> = linalg::eigenvalues_hermitian(&frame.rho1)
            .iter()
            .copied()
            .collect();
        w.reverse(); // descending
        row.extend(w.iter().take(d).map(|x| scale * x));
    }
    row
}
