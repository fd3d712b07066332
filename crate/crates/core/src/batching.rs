//! Heterogeneous batches of meshes and point clouds.
//!
//! A batch can be viewed three ways:
//!
//! * **list**: one array per batch element,
//! * **packed**: all elements concatenated, plus cumulative offsets and a
//!   row-to-element ownership map,
//! * **padded**: a dense `batch × max_len` block where rows past each
//!   element's length hold a pad value.
//!
//! Batches are immutable. The packed view is the canonical storage and is
//! built at construction; padded views are produced on request. Derived
//! topology (unique edges) is computed once behind a `OnceLock`, so first
//! access from several threads is safe.

use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::math::Vec3;

pub type Face = [usize; 3];

/// Pad value used for integer index buffers (faces) in padded views.
pub const INDEX_PAD: i64 = -1;

/// Concatenated rows of a heterogeneous batch.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedView<T> {
    data: Vec<T>,
    offsets: Vec<usize>,
    item_to_element: Vec<usize>,
}

impl<T: Clone> PackedView<T> {
    pub fn from_list(list: &[Vec<T>]) -> Self {
        let lengths: Vec<usize> = list.iter().map(Vec::len).collect();
        let data = list.iter().flat_map(|v| v.iter().cloned()).collect();
        Self::from_data_unchecked(data, &lengths)
    }

    /// Wraps already-concatenated rows; `lengths` must sum to `data.len()`.
    pub fn from_data(data: Vec<T>, lengths: &[usize]) -> Result<Self> {
        let total: usize = lengths.iter().sum();
        if total != data.len() {
            return Err(Error::shape(format!(
                "packed data has {} rows but lengths sum to {total}",
                data.len()
            )));
        }
        Ok(Self::from_data_unchecked(data, lengths))
    }

    fn from_data_unchecked(data: Vec<T>, lengths: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(lengths.len() + 1);
        let mut item_to_element = Vec::with_capacity(data.len());
        let mut acc = 0;
        offsets.push(0);
        for (e, &len) in lengths.iter().enumerate() {
            acc += len;
            offsets.push(acc);
            item_to_element.extend(std::iter::repeat_n(e, len));
        }
        Self {
            data,
            offsets,
            item_to_element,
        }
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Cumulative start index per element, with a trailing total.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn item_to_element(&self) -> &[usize] {
        &self.item_to_element
    }

    pub fn num_elements(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn element(&self, e: usize) -> &[T] {
        &self.data[self.offsets[e]..self.offsets[e + 1]]
    }

    pub fn to_list(&self) -> Vec<Vec<T>> {
        (0..self.num_elements())
            .map(|e| self.element(e).to_vec())
            .collect()
    }

    pub fn to_padded(&self, pad: T) -> Padded<T> {
        let batch = self.num_elements();
        let max_len = self.lengths().into_iter().max().unwrap_or(0);
        let mut data = vec![pad; batch * max_len];
        for e in 0..batch {
            let src = self.element(e);
            data[e * max_len..e * max_len + src.len()].clone_from_slice(src);
        }
        Padded {
            data,
            batch,
            max_len,
        }
    }
}

/// Rectangular `batch × max_len` block of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Padded<T> {
    data: Vec<T>,
    batch: usize,
    max_len: usize,
}

impl<T: Clone> Padded<T> {
    pub fn from_list(list: &[Vec<T>], pad: T) -> Self {
        PackedView::from_list(list).to_padded(pad)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn row(&self, e: usize) -> &[T] {
        &self.data[e * self.max_len..(e + 1) * self.max_len]
    }

    pub fn get(&self, e: usize, i: usize) -> &T {
        &self.data[e * self.max_len + i]
    }

    /// Gathers the occupied prefix of each row back into packed form.
    pub fn to_packed(&self, lengths: &[usize]) -> Result<PackedView<T>> {
        if lengths.len() != self.batch {
            return Err(Error::shape(format!(
                "{} lengths for a padded batch of {}",
                lengths.len(),
                self.batch
            )));
        }
        if let Some(&l) = lengths.iter().find(|&&l| l > self.max_len) {
            return Err(Error::shape(format!(
                "length {l} exceeds padded width {}",
                self.max_len
            )));
        }
        let data = lengths
            .iter()
            .enumerate()
            .flat_map(|(e, &l)| self.row(e)[..l].iter().cloned())
            .collect();
        PackedView::from_data(data, lengths)
    }

    pub fn to_list(&self, lengths: &[usize]) -> Result<Vec<Vec<T>>> {
        Ok(self.to_packed(lengths)?.to_list())
    }
}

#[derive(Debug)]
struct MeshTopology {
    faces_local: PackedView<Face>,
    faces_packed: Vec<Face>,
    face_to_mesh: Vec<usize>,
    edges: OnceLock<PackedView<[usize; 2]>>,
}

/// A batch of triangle meshes with differing vertex and face counts.
#[derive(Clone, Debug)]
pub struct MeshBatch {
    verts: PackedView<Vec3>,
    topology: Arc<MeshTopology>,
}

impl MeshBatch {
    pub fn new(verts_list: Vec<Vec<Vec3>>, faces_list: Vec<Vec<Face>>) -> Result<Self> {
        if verts_list.len() != faces_list.len() {
            return Err(Error::shape(format!(
                "{} vertex arrays but {} face arrays",
                verts_list.len(),
                faces_list.len()
            )));
        }
        if verts_list.is_empty() {
            return Err(Error::EmptyInput("mesh batch has no elements".into()));
        }
        for (mesh, (verts, faces)) in verts_list.iter().zip(&faces_list).enumerate() {
            if verts.is_empty() {
                return Err(Error::EmptyInput(format!("mesh {mesh} has no vertices")));
            }
            for (face, f) in faces.iter().enumerate() {
                if let Some(&index) = f.iter().find(|&&i| i >= verts.len()) {
                    return Err(Error::FaceIndex {
                        mesh,
                        face,
                        index,
                        num_verts: verts.len(),
                    });
                }
            }
        }
        let verts = PackedView::from_list(&verts_list);
        let faces_local = PackedView::from_list(&faces_list);
        let mut faces_packed = Vec::with_capacity(faces_local.len());
        for e in 0..faces_local.num_elements() {
            let off = verts.offsets()[e];
            faces_packed.extend(
                faces_local
                    .element(e)
                    .iter()
                    .map(|f| [f[0] + off, f[1] + off, f[2] + off]),
            );
        }
        let face_to_mesh = faces_local.item_to_element().to_vec();
        Ok(Self {
            verts,
            topology: Arc::new(MeshTopology {
                faces_local,
                faces_packed,
                face_to_mesh,
                edges: OnceLock::new(),
            }),
        })
    }

    /// New batch sharing this batch's topology with replaced packed vertices.
    pub fn with_verts_packed(&self, verts: Vec<Vec3>) -> Result<Self> {
        let verts = PackedView::from_data(verts, &self.num_verts_per_mesh())?;
        Ok(Self {
            verts,
            topology: Arc::clone(&self.topology),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.verts.num_elements()
    }

    pub fn num_verts_per_mesh(&self) -> Vec<usize> {
        self.verts.lengths()
    }

    pub fn num_faces_per_mesh(&self) -> Vec<usize> {
        self.topology.faces_local.lengths()
    }

    pub fn verts_packed(&self) -> &[Vec3] {
        self.verts.data()
    }

    pub fn verts_packed_view(&self) -> &PackedView<Vec3> {
        &self.verts
    }

    /// Faces with indices into the packed vertex array.
    pub fn faces_packed(&self) -> &[Face] {
        &self.topology.faces_packed
    }

    pub fn face_to_mesh(&self) -> &[usize] {
        &self.topology.face_to_mesh
    }

    pub fn vert_offsets(&self) -> &[usize] {
        self.verts.offsets()
    }

    pub fn face_offsets(&self) -> &[usize] {
        self.topology.faces_local.offsets()
    }

    pub fn verts_list(&self, mesh: usize) -> &[Vec3] {
        self.verts.element(mesh)
    }

    /// Faces of one mesh with mesh-local indices.
    pub fn faces_list(&self, mesh: usize) -> &[Face] {
        self.topology.faces_local.element(mesh)
    }

    pub fn verts_padded(&self, pad: f64) -> Padded<Vec3> {
        self.verts.to_padded([pad; 3])
    }

    /// Mesh-local face indices, padded with [`INDEX_PAD`].
    pub fn faces_padded(&self) -> Padded<[i64; 3]> {
        let list: Vec<Vec<[i64; 3]>> = (0..self.batch_size())
            .map(|m| {
                self.faces_list(m)
                    .iter()
                    .map(|f| [f[0] as i64, f[1] as i64, f[2] as i64])
                    .collect()
            })
            .collect();
        Padded::from_list(&list, [INDEX_PAD; 3])
    }

    /// Unique undirected edges `(a, b)` with `a < b`, packed by mesh, indices
    /// into the packed vertex array, sorted within each mesh.
    pub fn edges_packed(&self) -> &PackedView<[usize; 2]> {
        self.topology.edges.get_or_init(|| {
            let list: Vec<Vec<[usize; 2]>> = (0..self.batch_size())
                .map(|m| {
                    let lo = self.face_offsets()[m];
                    let hi = self.face_offsets()[m + 1];
                    let mut set = BTreeSet::new();
                    for f in &self.faces_packed()[lo..hi] {
                        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                            if a != b {
                                set.insert([a.min(b), a.max(b)]);
                            }
                        }
                    }
                    set.into_iter().collect()
                })
                .collect();
            PackedView::from_list(&list)
        })
    }
}

/// Per-point feature rows (e.g. RGB) aligned with packed points.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    pub dim: usize,
    pub data: Vec<f64>,
}

/// A batch of 3D point clouds with differing sizes and optional features.
#[derive(Clone, Debug)]
pub struct PointCloudBatch {
    points: PackedView<Vec3>,
    features: Option<Features>,
}

impl PointCloudBatch {
    pub fn new(points_list: Vec<Vec<Vec3>>) -> Result<Self> {
        if points_list.is_empty() {
            return Err(Error::EmptyInput(
                "point cloud batch has no elements".into(),
            ));
        }
        Ok(Self {
            points: PackedView::from_list(&points_list),
            features: None,
        })
    }

    /// Attaches `dim`-dimensional features, one row per point, per cloud.
    pub fn with_features(self, dim: usize, features_list: Vec<Vec<f64>>) -> Result<Self> {
        if features_list.len() != self.batch_size() {
            return Err(Error::shape(format!(
                "{} feature arrays for {} clouds",
                features_list.len(),
                self.batch_size()
            )));
        }
        for (c, (f, n)) in features_list
            .iter()
            .zip(self.num_points_per_cloud())
            .enumerate()
        {
            if f.len() != n * dim {
                return Err(Error::shape(format!(
                    "cloud {c}: {} feature values for {n} points of dimension {dim}",
                    f.len()
                )));
            }
        }
        let data = features_list.into_iter().flatten().collect();
        Ok(Self {
            features: Some(Features { dim, data }),
            ..self
        })
    }

    pub fn from_packed(points: Vec<Vec3>, lengths: &[usize]) -> Result<Self> {
        if lengths.is_empty() {
            return Err(Error::EmptyInput(
                "point cloud batch has no elements".into(),
            ));
        }
        Ok(Self {
            points: PackedView::from_data(points, lengths)?,
            features: None,
        })
    }

    /// New batch with replaced packed positions; features are kept.
    pub fn with_points_packed(&self, points: Vec<Vec3>) -> Result<Self> {
        Ok(Self {
            points: PackedView::from_data(points, &self.num_points_per_cloud())?,
            features: self.features.clone(),
        })
    }

    pub fn batch_size(&self) -> usize {
        self.points.num_elements()
    }

    pub fn num_points_per_cloud(&self) -> Vec<usize> {
        self.points.lengths()
    }

    pub fn points_packed(&self) -> &[Vec3] {
        self.points.data()
    }

    pub fn points_packed_view(&self) -> &PackedView<Vec3> {
        &self.points
    }

    pub fn points_list(&self, cloud: usize) -> &[Vec3] {
        self.points.element(cloud)
    }

    pub fn points_padded(&self, pad: f64) -> Padded<Vec3> {
        self.points.to_padded([pad; 3])
    }

    pub fn features(&self) -> Option<&Features> {
        self.features.as_ref()
    }

    pub fn cloud_offsets(&self) -> &[usize] {
        self.points.offsets()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri() -> (Vec<Vec3>, Vec<Face>) {
        (
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn single_triangle_counts() {
        let (v, f) = tri();
        let m = MeshBatch::new(vec![v], vec![f]).unwrap();
        assert_eq!(m.batch_size(), 1);
        assert_eq!(m.num_verts_per_mesh(), vec![3]);
        assert_eq!(m.num_faces_per_mesh(), vec![1]);
    }

    #[test]
    fn second_mesh_faces_are_offset() {
        let (v, f) = tri();
        let v2 = vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let f2 = vec![[0, 1, 2], [0, 2, 3]];
        let m = MeshBatch::new(vec![v, v2], vec![f, f2]).unwrap();
        assert_eq!(m.verts_packed().len(), 7);
        assert_eq!(m.faces_packed()[1], [3, 4, 5]);
        assert_eq!(m.faces_packed()[2], [3, 5, 6]);
        assert_eq!(m.face_to_mesh(), &[0, 1, 1]);
        assert_eq!(m.faces_list(1), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn zero_face_mesh_is_valid() {
        let (v, _) = tri();
        let m = MeshBatch::new(vec![v], vec![vec![]]).unwrap();
        assert_eq!(m.num_faces_per_mesh(), vec![0]);
        assert!(m.edges_packed().is_empty());
    }

    #[test]
    fn construction_errors() {
        let (v, _) = tri();
        match MeshBatch::new(vec![v.clone()], vec![vec![[0, 1, 3]]]) {
            Err(Error::FaceIndex {
                mesh: 0, index: 3, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            MeshBatch::new(vec![v], vec![]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            MeshBatch::new(vec![vec![]], vec![vec![]]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn padded_points_use_pad_value() {
        let pc =
            PointCloudBatch::new(vec![vec![[1.0; 3], [2.0; 3], [3.0; 3]], vec![[4.0; 3]]]).unwrap();
        let p = pc.points_padded(0.0);
        assert_eq!((p.batch_size(), p.max_len()), (2, 3));
        assert_eq!(p.row(1), &[[4.0; 3], [0.0; 3], [0.0; 3]]);
    }

    #[test]
    fn item_to_element_map() {
        let pc = PointCloudBatch::new(vec![vec![[0.0; 3]; 2], vec![[1.0; 3]; 3]]).unwrap();
        assert_eq!(pc.points_packed_view().item_to_element(), &[0, 0, 1, 1, 1]);
        assert_eq!(pc.cloud_offsets(), &[0, 2, 5]);
    }

    #[test]
    fn faces_padded_uses_sentinel() {
        let (v, f) = tri();
        let m = MeshBatch::new(vec![v.clone(), v], vec![f, vec![]]).unwrap();
        let p = m.faces_padded();
        assert_eq!(p.row(1), &[[INDEX_PAD; 3]]);
    }

    #[test]
    fn features_must_match_points() {
        let pc = PointCloudBatch::new(vec![vec![[0.0; 3]; 2]]).unwrap();
        assert!(pc.clone().with_features(3, vec![vec![0.0; 5]]).is_err());
        let pc = pc.with_features(3, vec![vec![0.5; 6]]).unwrap();
        assert_eq!(pc.features().unwrap().data.len(), 6);
    }

    #[test]
    fn edges_are_unique_and_sorted() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        let m = MeshBatch::new(vec![v], vec![vec![[0, 1, 2], [0, 2, 3]]]).unwrap();
        assert_eq!(
            m.edges_packed().data(),
            &[[0, 1], [0, 2], [0, 3], [1, 2], [2, 3]]
        );
    }

    fn batch_strategy() -> impl Strategy<Value = Vec<Vec<Vec3>>> {
        prop::collection::vec(
            prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 0..500),
            1..64,
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn view_conversions_compose_to_identity(list in batch_strategy()) {
            let lengths: Vec<usize> = list.iter().map(Vec::len).collect();
            let packed = PackedView::from_list(&list);
            let padded = packed.to_padded([0.0; 3]);
            prop_assert_eq!(packed.to_list(), list.clone());
            prop_assert_eq!(padded.to_list(&lengths).unwrap(), list.clone());
            prop_assert_eq!(&padded.to_packed(&lengths).unwrap(), &packed);
            prop_assert_eq!(&Padded::from_list(&list, [0.0; 3]), &padded);
            for (e, l) in lengths.iter().enumerate() {
                prop_assert!(padded.row(e)[*l..].iter().all(|p| *p == [0.0; 3]));
            }
            prop_assert_eq!(packed.offsets()[0], 0);
            prop_assert_eq!(*packed.offsets().last().unwrap(), packed.len());
            prop_assert!(packed.offsets().windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn packed_faces_unoffset_to_list_faces(
            sizes in prop::collection::vec((1usize..20, 0usize..30), 1..8),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let verts: Vec<Vec<Vec3>> = sizes.iter().map(|&(nv, _)| vec![[0.0; 3]; nv]).collect();
            let faces: Vec<Vec<Face>> = sizes
                .iter()
                .map(|&(nv, nf)| (0..nf).map(|_| [rng.gen_range(0..nv), rng.gen_range(0..nv), rng.gen_range(0..nv)]).collect())
                .collect();
            let m = MeshBatch::new(verts, faces.clone()).unwrap();
            for (mesh, list_faces) in faces.iter().enumerate() {
                let off = m.vert_offsets()[mesh];
                let lo = m.face_offsets()[mesh];
                let hi = m.face_offsets()[mesh + 1];
                let unoffset: Vec<Face> = m.faces_packed()[lo..hi].iter().map(|f| [f[0] - off, f[1] - off, f[2] - off]).collect();
                prop_assert_eq!(&unoffset, list_faces);
            }
        }
    }
}
