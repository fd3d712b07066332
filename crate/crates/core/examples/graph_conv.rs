//! Graph convolution over mesh edges, forward and backward.
//!
//! cargo run --example graph_conv

use rast3d::error::Result;
use rast3d::geometry::{graph_conv, graph_conv_backward, GraphConvWeights};
use rast3d::templates::ico_sphere;

fn main() -> Result<()> {
    let mesh = ico_sphere(1)?;
    let n = mesh.verts_packed().len();
    let edges = mesh.edges_packed().data().to_vec();

    // shifted vertex positions as 3-d features, mapped to 2 channels
    let features: Vec<f64> = mesh
        .verts_packed()
        .iter()
        .flatten()
        .map(|x| x + 1.0)
        .collect();
    let w = GraphConvWeights::new(
        3,
        2,
        vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        vec![0.0, 0.0, 0.0, 0.0, 0.2, -0.2],
        Some(vec![0.1, -0.1]),
    )?;
    let out = graph_conv(&features, n, &edges, &w)?;
    println!("{n} vertices, {} edges", edges.len());
    for v in 0..3 {
        println!("vertex {v}: {:.4?}", &out[2 * v..2 * v + 2]);
    }

    let ones = vec![1.0; out.len()];
    let g = graph_conv_backward(&features, n, &edges, &w, &ones)?;
    println!("d/dW0 {:.3?}", g.w0);
    println!("d/dW1 {:.3?}", g.w1);
    println!("d/dbias {:.3?}", g.bias);
    Ok(())
}
