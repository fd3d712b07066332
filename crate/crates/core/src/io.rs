//! Wavefront OBJ (positions, optional vertex colors, faces) and 8-bit PNG.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma, LumaA, Rgb, Rgba};

use crate::batching::{Face, MeshBatch};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// A single mesh read from OBJ, with per-vertex colors when every `v` line
/// carries them.
#[derive(Clone, Debug)]
pub struct ObjMesh {
    pub mesh: MeshBatch,
    pub colors: Option<Vec<Vec3>>,
}

pub fn load_obj(path: impl AsRef<Path>) -> Result<ObjMesh> {
    parse_obj(&fs::read_to_string(path)?)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_floats(line: usize, fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, format!("`{f}` is not a finite number")))
        })
        .collect()
}

/// Parses the OBJ subset: `v x y z [r g b]` and `f` with `i`, `i/t`,
/// `i//n` or `i/t/n` corners (1-based, negative counts back from the most
/// recent vertex). Polygons are fan-triangulated. Other statements are
/// ignored.
pub fn parse_obj(src: &str) -> Result<ObjMesh> {
    let mut verts = Vec::new();
    let mut colors: Vec<Vec3> = Vec::new();
    let mut faces: Vec<Face> = Vec::new();
    for (n, raw) in src.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut it = content.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let rest: Vec<&str> = it.collect();
        match tag {
            "v" => {
                let vals = parse_floats(line, &rest)?;
                match vals.len() {
                    3 | 4 => {
                        if !colors.is_empty() {
                            return Err(parse_err(
                                line,
                                "vertex without color after colored vertices",
                            ));
                        }
                        verts.push([vals[0], vals[1], vals[2]]);
                    }
                    6 => {
                        if colors.len() != verts.len() {
                            return Err(parse_err(line, "colored vertex after uncolored vertices"));
                        }
                        verts.push([vals[0], vals[1], vals[2]]);
                        colors.push([vals[3], vals[4], vals[5]]);
                    }
                    k => {
                        return Err(parse_err(
                            line,
                            format!("vertex has {k} values, expected 3 or 6"),
                        ))
                    }
                }
            }
            "f" => {
                if rest.len() < 3 {
                    return Err(parse_err(
                        line,
                        format!("face has {} corners, need at least 3", rest.len()),
                    ));
                }
                let idx = rest
                    .iter()
                    .map(|c| resolve_index(line, c, verts.len()))
                    .collect::<Result<Vec<_>>>()?;
                for i in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[i], idx[i + 1]]);
                }
            }
            _ => {}
        }
    }
    if verts.is_empty() {
        return Err(Error::EmptyInput("OBJ source has no vertices".into()));
    }
    let colors = (!colors.is_empty()).then_some(colors);
    Ok(ObjMesh {
        mesh: MeshBatch::new(vec![verts], vec![faces])?,
        colors,
    })
}

fn resolve_index(line: usize, corner: &str, num_verts: usize) -> Result<usize> {
    let head = corner.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| parse_err(line, format!("`{corner}` is not a vertex reference")))?;
    let resolved = match i {
        0 => None,
        i if i > 0 => Some(i - 1),
        i => Some(num_verts as i64 + i),
    };
    match resolved {
        Some(r) if r >= 0 && (r as usize) < num_verts => Ok(r as usize),
        _ => Err(parse_err(
            line,
            format!("vertex reference {i} with {num_verts} vertices defined"),
        )),
    }
}

/// OBJ text for one element of a batch.
pub fn write_obj(m: &MeshBatch, mesh: usize, colors: Option<&[Vec3]>) -> Result<String> {
    if mesh >= m.batch_size() {
        return Err(Error::IndexOutOfRange {
            context: "mesh",
            index: mesh,
            len: m.batch_size(),
        });
    }
    let verts = m.verts_list(mesh);
    if let Some(c) = colors {
        if c.len() != verts.len() {
            return Err(Error::shape(format!(
                "{} colors for {} verts",
                c.len(),
                verts.len()
            )));
        }
    }
    let mut out = String::new();
    for (i, v) in verts.iter().enumerate() {
        // `{}` on f64 is the shortest representation that round-trips
        match colors {
            Some(c) => writeln!(
                out,
                "v {} {} {} {} {} {}",
                v[0], v[1], v[2], c[i][0], c[i][1], c[i][2]
            ),
            None => writeln!(out, "v {} {} {}", v[0], v[1], v[2]),
        }
        .expect("writing to a String");
    }
    for f in m.faces_list(mesh) {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).expect("writing to a String");
    }
    Ok(out)
}

pub fn save_obj(
    path: impl AsRef<Path>,
    m: &MeshBatch,
    mesh: usize,
    colors: Option<&[Vec3]>,
) -> Result<()> {
    fs::write(path, write_obj(m, mesh, colors)?)?;
    Ok(())
}

#[inline]
fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an `height × width × channels` image (row-major, top row first,
/// values in `[0, 1]`) as 8-bit PNG. Channels: 1 gray, 2 gray+alpha, 3 RGB,
/// 4 RGBA. Values are clamped, then mapped to `round(v·255)`.
pub fn save_png(
    path: impl AsRef<Path>,
    height: usize,
    width: usize,
    channels: usize,
    data: &[f64],
) -> Result<()> {
    if data.len() != height * width * channels {
        return Err(Error::shape(format!(
            "{} values for a {height}×{width}×{channels} image",
            data.len()
        )));
    }
    let (w, h) = (width as u32, height as u32);
    let bytes: Vec<u8> = data.iter().map(|&v| quantize(v)).collect();
    let path = path.as_ref();
    match channels {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        2 => ImageBuffer::<LumaA<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        4 => ImageBuffer::<Rgba<u8>, _>::from_raw(w, h, bytes).map(|b| b.save(path)),
        c => {
            return Err(Error::InvalidParameter(format!(
                "PNG needs 1 to 4 channels, got {c}"
            )))
        }
    }
    .expect("buffer length checked above")?;
    Ok(())
}

/// Decoded 8-bit image with values scaled to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

pub fn load_png(path: impl AsRef<Path>) -> Result<Image> {
    let img = image::open(path)?;
    let channels = img.color().channel_count() as usize;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let bytes = match channels {
        1 => img.into_luma8().into_raw(),
        2 => img.into_luma_alpha8().into_raw(),
        3 => img.into_rgb8().into_raw(),
        _ => img.into_rgba8().into_raw(),
    };
    Ok(Image {
        height,
        width,
        channels: channels.min(4),
        data: bytes.iter().map(|&b| b as f64 / 255.0).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_triangle_and_quad() {
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3").unwrap();
        assert_eq!(m.mesh.verts_packed().len(), 3);
        assert_eq!(m.mesh.faces_packed(), &[[0, 1, 2]]);
        assert!(m.colors.is_none());

        let q = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        assert_eq!(q.mesh.faces_packed(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn slash_forms_negative_indices_and_colors() {
        let src = "# comment\nvn 0 0 1\nvt 0 0\nv 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1/1/1 2//1 -1/1\n";
        let m = parse_obj(src).unwrap();
        assert_eq!(m.mesh.faces_packed(), &[[0, 1, 2]]);
        assert_eq!(m.colors.unwrap()[2], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_obj("v 0 0 0\nv 1 x 0\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_obj("v 0 0 0\nv 1 0 0\nf 1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_obj("v 0 0 0\nf 1 2 5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_obj("v 0 0 0\nf 0 1 1\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn obj_round_trip() {
        let src = "v 0.1 -2.5 3\nv 1e-7 0 0\nv 0 1 0.333\nv 2 2 2\nf 1 2 3\nf 2 4 3\n";
        let a = parse_obj(src).unwrap();
        let text = write_obj(&a.mesh, 0, None).unwrap();
        let b = parse_obj(&text).unwrap();
        assert_eq!(a.mesh.verts_packed(), b.mesh.verts_packed());
        assert_eq!(a.mesh.faces_packed(), b.mesh.faces_packed());
        assert_eq!(write_obj(&b.mesh, 0, None).unwrap(), text);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let data: Vec<f64> = (0..4 * 3 * 4).map(|i| (i as f64 * 0.137).fract()).collect();
        save_png(&path, 4, 3, 4, &data).unwrap();
        let img = load_png(&path).unwrap();
        assert_eq!((img.height, img.width, img.channels), (4, 3, 4));
        for (a, b) in img.data.iter().zip(&data) {
            assert_eq!((a * 255.0).round() as u8, quantize(*b));
        }
        save_png(&path, 2, 2, 3, &[0.0; 12]).unwrap();
        assert!(load_png(&path).unwrap().data.iter().all(|&v| v == 0.0));
        save_png(&path, 1, 1, 3, &[1.0; 3]).unwrap();
        assert_eq!(load_png(&path).unwrap().data, vec![1.0; 3]);
        assert!(save_png(&path, 2, 2, 3, &[0.0; 11]).is_err());
    }
}
