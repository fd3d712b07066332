//! Batched geometric operators and losses.

pub mod chamfer;
pub mod graph_conv;
pub mod knn;
pub mod losses;
pub mod sampling;

pub use chamfer::{chamfer_backward, chamfer_distance, chamfer_forward, ChamferForward};
pub use graph_conv::{
    graph_conv, graph_conv_backward, Adjacency, GraphConvGrads, GraphConvWeights,
};
pub use knn::{knn, knn_generic, knn_points, KnnResult, PointSets};
pub use losses::{
    edge_length_loss, edge_length_loss_backward, laplacian_loss, laplacian_loss_backward,
    silhouette_iou_loss, silhouette_iou_loss_backward,
};
pub use sampling::{
    face_area, sample_points_from_meshes, sample_points_with_faces, SurfaceSamples,
};
