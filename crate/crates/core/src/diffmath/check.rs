use super::{DiffError, Graph, NodeId, Tensor};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences. Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1, |analytic|)`.
///
/// `f` receives a fresh graph and the leaf holding `x` and must return the
/// scalar root.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, DiffError>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId, DiffError>,
{
    let mut g = Graph::new();
    let leaf = g.leaf(x.clone());
    let root = f(&mut g, leaf)?;
    g.backward(root)?;
    let analytic = g.grad(leaf).expect("gradient populated by backward").to_vec();

    let eval = |values: &[f64]| -> Result<f64, DiffError> {
        let mut g = Graph::new();
        let leaf = g.leaf(Tensor::new(x.shape().to_vec(), values.to_vec())?);
        let root = f(&mut g, leaf)?;
        Ok(g.item(root))
    };
    max_relative_error(&analytic, x.values(), eps, eval)
}

/// Central-difference comparison for an arbitrary flat parameter vector.
pub fn max_relative_error<F>(analytic: &[f64], x: &[f64], eps: f64, mut f: F) -> Result<f64, DiffError>
where
    F: FnMut(&[f64]) -> Result<f64, DiffError>,
{
    if analytic.len() != x.len() {
        return Err(DiffError::Dimension("gradient and point differ in length".into()));
    }
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let up = f(&probe)?;
        probe[i] = x[i] - eps;
        let down = f(&probe)?;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
