use super::VectorField;
use crate::error::{check_dim, param, Result};

/// Integrability residual between heads `i` and `j`:
/// `∂_{t_j} u_i − ∂_{t_i} u_j − [u_i, u_j]`, with `[u, v] = (∇u)v − (∇v)u`.
///
/// Computed from two directional derivatives: head `i` along `(−u_j, e_j)` minus
/// head `j` along `(−u_i, e_i)`.
pub fn lie_residual(field: &dyn VectorField, i: usize, j: usize, x: &[f64], t: &[f64]) -> Result<Vec<f64>> {
    let (d, n) = (field.dim(), field.n_params());
    check_dim(d, x.len(), "residual state")?;
    check_dim(n, t.len(), "residual parameter point")?;
    if i == j || i >= n || j >= n {
        return param(format!("residual needs two distinct heads below {n}, got ({i}, {j})"));
    }
    let mut value = vec![0.0; n * d];
    field.eval(x, t, &mut value);
    let mut tan = vec![0.0; n * d];
    let mut scratch = vec![0.0; n * d];
    let mut e = vec![0.0; n];

    let neg = |k: usize| value[k * d..(k + 1) * d].iter().map(|v| -v).collect::<Vec<_>>();
    e[j] = 1.0;
    field.jvp(x, t, &neg(j), &e, &mut scratch, &mut tan);
    let mut r = tan[i * d..(i + 1) * d].to_vec();
    e[j] = 0.0;
    e[i] = 1.0;
    field.jvp(x, t, &neg(i), &e, &mut scratch, &mut tan);
    for (rv, b) in r.iter_mut().zip(&tan[j * d..(j + 1) * d]) {
        *rv -= b;
    }
    Ok(r)
}
