//! Plant samples on roots-of-unity grids.

use crate::dft::{CirculantMatrix, RootsGrid};
use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use num_complex::Complex64;

const REAL_TOL: f64 = 1e-10;

/// `q_j = G(z_j) − shift`, evaluated for `j ≤ N/2` and mirrored so that
/// `q_{N−j} = conj(q_j)` holds exactly.
pub fn shifted_samples(
    ss: &StateSpaceModel,
    grid: &RootsGrid,
    shift: f64,
) -> Result<Vec<Complex64>> {
    let n = grid.len();
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..=n / 2 {
        let mut g = ss.eval_transfer(grid.node(j))?;
        if j == 0 || 2 * j == n {
            if g.im.abs() > REAL_TOL * (1.0 + g.re.abs()) {
                return Err(Error::SymmetryViolation(g.im.abs()));
            }
            g.im = 0.0;
        }
        q[j] = g - shift;
    }
    for j in (n / 2 + 1)..n {
        q[j] = q[n - j].conj();
    }
    Ok(q)
}

/// `T = V diag(q) V*` with `q_j = G(z_j) − shift`; real and circulant.
pub fn build_circulant_t(
    ss: &StateSpaceModel,
    grid: &RootsGrid,
    shift: f64,
) -> Result<CirculantMatrix> {
    let q = shifted_samples(ss, grid, shift)?;
    let mut t = CirculantMatrix::from_eigenvalues(grid, &q);
    let worst = t.max_imag();
    if worst > REAL_TOL {
        return Err(Error::SymmetryViolation(worst));
    }
    for s in &mut t.symbol {
        s.im = 0.0;
    }
    Ok(t)
}

/// `1/κ`, with `1/∞ = 0`.
pub fn inverse_kappa(kappa: f64) -> f64 {
    if kappa.is_infinite() {
        0.0
    } else {
        1.0 / kappa
    }
}
