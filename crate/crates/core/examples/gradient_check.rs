//! Builds a small expression graph, prints its reverse-mode gradient and
//! compares it with central differences.
//!
//! cargo run --example gradient_check

use socialnav::diffmath::{finite_diff_check, Graph, NodeId, Tensor};

fn heading_energy(g: &mut Graph, x: NodeId) -> Result<NodeId, socialnav::diffmath::DiffError> {
    let parts = g.split(x, 0, &[3, 3])?;
    let a = g.atan2(parts[1], parts[0])?;
    let s = g.sin(a)?;
    let sq = g.square(parts[0])?;
    let r = g.add(sq, s)?;
    let e = g.exp(r)?;
    let l = g.add_scalar(e, 1.0)?;
    let l = g.ln(l)?;
    g.mean(l)
}

fn main() {
    let x = Tensor::vector(vec![0.3, -1.2, 0.8, 0.5, 0.4, -0.7]);
    let mut g = Graph::new();
    let leaf = g.leaf(x.clone());
    let root = heading_energy(&mut g, leaf).expect("forward");
    g.backward(root).expect("backward");
    println!("f(x)  = {:.6}", g.item(root));
    println!("df/dx = {:?}", g.grad(leaf).expect("grad"));
    for eps in [1e-3, 1e-5, 1e-7] {
        let err = finite_diff_check(heading_energy, &x, eps).expect("check");
        println!("eps {eps:e}: max relative error {err:.2e}");
    }
}
