//! Heterogeneous mesh batches and their list, packed and padded views.
//!
//! cargo run --example batching

use rast3d::batching::{MeshBatch, INDEX_PAD};
use rast3d::error::Result;
use rast3d::templates::{cube_parts, ico_sphere_parts, synthetic_batch};

fn main() -> Result<()> {
    let (sv, sf) = ico_sphere_parts(0)?;
    let (cv, cf) = cube_parts(1, 0.5)?;
    let batch = MeshBatch::new(vec![sv, cv], vec![sf, cf])?;

    println!("verts per mesh: {:?}", batch.num_verts_per_mesh());
    println!("faces per mesh: {:?}", batch.num_faces_per_mesh());
    println!("packed verts:   {}", batch.verts_packed().len());
    println!("vert offsets:   {:?}", batch.vert_offsets());

    // packed faces index into the packed vertex array
    let first_cube_face = batch.faces_packed()[batch.face_offsets()[1]];
    println!("first cube face, packed: {first_cube_face:?}");
    println!("first cube face, local:  {:?}", batch.faces_list(1)[0]);

    let padded = batch.faces_padded();
    let pads = padded.row(1).iter().filter(|f| f[0] == INDEX_PAD).count();
    println!(
        "padded faces: {} × {}, cube row has {pads} pad rows",
        padded.batch_size(),
        padded.max_len()
    );
    println!("unique edges: {:?}", batch.edges_packed().lengths());

    let synth = synthetic_batch(1000.0, 400.0, 6, 7)?;
    println!(
        "synthetic batch (μ=1000, σ=400): {:?}",
        synth.num_faces_per_mesh()
    );
    Ok(())
}
