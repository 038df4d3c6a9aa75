//! Linear and linearised flows: fundamental matrices and flow Jacobians.

use crate::linalg::{Mat4, Matrix};
use crate::model::{SeirsModel, StateVec};
use crate::ode::{self, OdeError, Tolerances};
use crate::simulation::{clamp_slack, guarded_rhs};

/// `Φ(t1)` for `Φ' = A(t) Φ`, `Φ(t0) = I`, integrating one column at a time.
pub fn fundamental_matrix<const N: usize>(
    a: impl Fn(f64) -> Matrix<N>,
    t0: f64,
    t1: f64,
    tol: Tolerances,
) -> Result<Matrix<N>, OdeError> {
    let mut cols = [[0.0; N]; N];
    for (j, col) in cols.iter_mut().enumerate() {
        let mut e = [0.0; N];
        e[j] = 1.0;
        *col = ode::flow(|t, x: &[f64; N]| a(t).mul_vec(x), t0, e, t1, tol)?;
    }
    Ok(Matrix::from_columns(cols))
}

/// End state and `∂x(t0 + T)/∂x0`, from the model and its variational
/// equation integrated together as one 20-dimensional system.
pub fn flow_jacobian(
    model: &SeirsModel,
    x0: StateVec,
    t0: f64,
    horizon: f64,
    tol: Tolerances,
) -> Result<(StateVec, Mat4), OdeError> {
    let rhs = guarded_rhs(model, clamp_slack(tol));
    let mut z0 = [0.0; 20];
    z0[..4].copy_from_slice(&x0.to_array());
    for k in 0..4 {
        z0[4 + 5 * k] = 1.0;
    }
    let field = |t: f64, z: &[f64; 20]| {
        let x = [z[0], z[1], z[2], z[3]];
        let fx = rhs(t, &x);
        let jac = model.jacobian(t, &x);
        let mut dz = [0.0; 20];
        dz[..4].copy_from_slice(&fx);
        // Φ stored row-major in z[4..]
        for i in 0..4 {
            for j in 0..4 {
                dz[4 + 4 * i + j] = (0..4).map(|k| jac[(i, k)] * z[4 + 4 * k + j]).sum();
            }
        }
        dz
    };
    let z = ode::flow(field, t0, z0, t0 + horizon, tol)?;
    let phi = Matrix(std::array::from_fn(|i| std::array::from_fn(|j| z[4 + 4 * i + j])));
    Ok((StateVec::new(z[0], z[1], z[2], z[3]), phi))
}
