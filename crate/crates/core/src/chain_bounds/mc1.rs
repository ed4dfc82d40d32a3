//! Lower bound for finite reversible chains from single-state hitting times.

use rayon::prelude::*;
use serde::Serialize;

use crate::oracle::{hitting_moments, GeneratorMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mc1Bound {
    /// `sup_x (sup_{i != x} E_i tau_x)^-1`.
    pub value: f64,
    /// The state `x` attaining the supremum.
    pub center: usize,
    /// `sup_{i != x} E_i tau_x` at that state.
    pub max_hitting: f64,
}

/// `kappa >= sup_x (sup_{i != x} E_i tau_x)^-1` for a reversible chain.
pub fn mc1_bound(q: &GeneratorMatrix) -> Result<Mc1Bound> {
    if q.len() < 2 {
        return Err(Error::invalid("the hitting bound needs at least two states"));
    }
    if !q.is_reversible() {
        let (i, j, defect) = q.reversibility_defect().unwrap_or((0, 0, f64::NAN));
        return Err(Error::NotReversible { i, j, defect });
    }
    let per_center: Vec<(usize, f64)> = (0..q.len())
        .into_par_iter()
        .map(|x| {
            let u = hitting_moments(q, &[x], 1)?;
            Ok((x, u.iter().copied().fold(0.0, f64::max)))
        })
        .collect::<Result<_>>()?;
    let (center, max_hitting) = per_center
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least two states");
    Ok(Mc1Bound {
        value: 1.0 / max_hitting,
        center,
        max_hitting,
    })
}
