//! Reverse-mode automatic differentiation over small dense `f64` tensors.
//!
//! A [`Graph`] is rebuilt for every forward pass. Each operation appends a
//! node holding its value; [`Graph::backward`] walks the node list in reverse
//! and fills in `d root / d node` for every node.
//!
//! ```
//! use socialnav::diffmath::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.leaf(Tensor::scalar(3.0));
//! let y = g.leaf(Tensor::scalar(4.0));
//! let p = g.mul(x, y).unwrap();
//! g.backward(p).unwrap();
//! assert_eq!(g.grad(x).unwrap(), &[4.0]);
//! assert_eq!(g.grad(y).unwrap(), &[3.0]);
//! ```

mod check;
mod graph;
mod tensor;

pub use check::{finite_diff_check, max_relative_error};
pub use graph::{Elementwise, Graph, NodeId, Reduce};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiffError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("non-finite result in {0}")]
    NonFinite(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matmul_identity_and_scalar() {
        let mut g = Graph::new();
        let i = g.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let v = g.constant(Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap());
        let p = g.matmul(i, v).unwrap();
        assert_eq!(g.value(p).values(), &[3.0, 4.0]);
        assert_eq!(g.shape(p), &[2, 1]);

        let a = g.constant(Tensor::from_rows(&[vec![2.0]]).unwrap());
        let b = g.constant(Tensor::from_rows(&[vec![5.0]]).unwrap());
        let p = g.matmul(a, b).unwrap();
        assert_eq!(g.value(p).values(), &[10.0]);
    }

    #[test]
    fn matmul_shape_mismatch() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 3]));
        assert!(matches!(g.matmul(a, b), Err(DiffError::Dimension(_))));
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor(&mut rng, &[3, 3]);
        let b = random_tensor(&mut rng, &[3, 3]);
        let err = finite_diff_check(
            |g, x| {
                let bb = g.constant(b.clone());
                let p = g.matmul(x, bb)?;
                g.sum(p)
            },
            &a,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn relu_values_and_kink_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![-1.0, 0.0, 2.0]));
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).values(), &[0.0, 0.0, 2.0]);
        let s = g.sum(r).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn square_and_sqrt_domain() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![3.0]));
        let s = g.square(x).unwrap();
        assert_eq!(g.value(s).values(), &[9.0]);
        let neg = g.constant(Tensor::vector(vec![-1.0]));
        assert!(matches!(g.sqrt(neg), Err(DiffError::Domain(_))));
    }

    #[test]
    fn binary_shape_mismatch() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2]));
        let b = g.constant(Tensor::zeros(&[3]));
        assert!(matches!(g.add(a, b), Err(DiffError::Dimension(_))));
        assert!(matches!(
            g.elementwise(Elementwise::Add, &[a]),
            Err(DiffError::Usage(_))
        ));
    }

    #[test]
    fn reductions() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![0.3, -0.1, 0.5]));
        let m = g.reduce(Reduce::Min, x, None).unwrap();
        assert_eq!(g.item(m), -0.1);

        let z = g.constant(Tensor::vector(vec![0.0, 0.0]));
        let l = g.reduce(Reduce::LogSumExp(1.0), z, None).unwrap();
        assert!((g.item(l) - std::f64::consts::LN_2).abs() < 1e-12);

        let y = g.constant(Tensor::vector(vec![1.0, 2.0]));
        let l = g.reduce(Reduce::LogSumExp(0.01), y, None).unwrap();
        // 0.01 * ln(1 + e^-100) is ~3.7e-46
        assert!((g.item(l) - 2.0).abs() < 1e-6);

        let e = g.constant(Tensor::zeros(&[0]));
        assert!(matches!(g.reduce(Reduce::Sum, e, None), Err(DiffError::Domain(_))));
    }

    #[test]
    fn reduce_along_axis() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::from_rows(&[vec![1.0, 5.0, 2.0], vec![4.0, 0.0, 6.0]]).unwrap());
        let r = g.reduce(Reduce::Max, x, Some(1)).unwrap();
        assert_eq!(g.value(r).values(), &[5.0, 6.0]);
        let c = g.reduce(Reduce::Sum, x, Some(0)).unwrap();
        assert_eq!(g.value(c).values(), &[5.0, 5.0, 8.0]);
        let s = g.sum(r).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn hard_min_ties_go_to_first_index() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![2.0, 1.0, 1.0]));
        let m = g.reduce(Reduce::Min, x, None).unwrap();
        g.backward(m).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn concat_cases() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::vector(vec![1.0, 2.0]));
        let b = g.leaf(Tensor::vector(vec![3.0]));
        let c = g.concat(&[a, b], 0).unwrap();
        assert_eq!(g.value(c).values(), &[1.0, 2.0, 3.0]);

        let e = g.constant(Tensor::vector(vec![]));
        let f = g.constant(Tensor::vector(vec![5.0]));
        let c2 = g.concat(&[e, f], 0).unwrap();
        assert_eq!(g.value(c2).values(), &[5.0]);

        let s = g.sum(c).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.0, 1.0]);

        let m = g.constant(Tensor::zeros(&[2, 2]));
        let n = g.constant(Tensor::zeros(&[3, 3]));
        assert!(matches!(g.concat(&[m, n], 0), Err(DiffError::Dimension(_))));
    }

    #[test]
    fn concat_columns_then_split_is_identity() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::from_rows(&[vec![1.0], vec![2.0]]).unwrap());
        let b = g.constant(Tensor::from_rows(&[vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap());
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).values(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let parts = g.split(c, 1, &[1, 2]).unwrap();
        assert_eq!(g.value(parts[0]), g.value(a));
        assert_eq!(g.value(parts[1]), g.value(b));
    }

    #[test]
    fn backward_product_rule_and_disconnected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.leaf(Tensor::scalar(4.0));
        let other = g.leaf(Tensor::scalar(9.0));
        let p = g.mul(x, y).unwrap();
        g.backward(p).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.0]);
        assert_eq!(g.grad(y).unwrap(), &[3.0]);
        assert_eq!(g.grad(other).unwrap(), &[0.0]);
        // a second call recomputes instead of accumulating
        g.backward(p).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(DiffError::Usage(_))));
    }

    #[test]
    fn relu_layer_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random_tensor(&mut rng, &[4, 3]);
        let v = random_tensor(&mut rng, &[3, 1]);
        let err = finite_diff_check(
            |g, x| {
                let vv = g.constant(v.clone());
                let p = g.matmul(x, vv)?;
                let r = g.relu(p)?;
                g.sum(r)
            },
            &w,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn finite_diff_check_reference_cases() {
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let err = finite_diff_check(
            |g, x| {
                let s = g.square(x)?;
                g.sum(s)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");

        let err = finite_diff_check(|g, _| Ok(g.scalar(4.0)), &x, 1e-5).unwrap();
        assert_eq!(err, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, &[6]);
        let err = finite_diff_check(|g, x| g.reduce(Reduce::LogSumExp(0.1), x, None), &x, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn non_finite_forward_is_an_error() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![1000.0]));
        assert!(matches!(g.exp(x), Err(DiffError::NonFinite(_))));
    }
}
