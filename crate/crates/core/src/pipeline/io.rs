//! Reading anchor frames and meshes, writing frames.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::deform::DeformationField;
use crate::scene::{Camera, GaussianCloud, ImageBuffer, TriMesh, VideoClip};
use crate::{Error, Result};

/// Euclidean RGB distance from the background above which an opaque-less
/// pixel counts as foreground.
pub const MATTE_THRESHOLD: f64 = 0.05;

fn numbered(dir: &Path, prefix: &str, ext: &str) -> Result<BTreeSet<usize>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(digits) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(ext)) else {
            continue;
        };
        if digits.len() == 4 && digits.bytes().all(|b| b.is_ascii_digit()) {
            found.insert(digits.parse().unwrap());
        }
    }
    Ok(found)
}

fn frame_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("frame_{k:04}.png"))
}

/// Converts 8-bit RGBA to an image; without an alpha channel the alpha is
/// matted against `background`.
pub fn image_from_rgba8(width: usize, height: usize, rgba: &[u8], has_alpha: bool, background: [f64; 3]) -> ImageBuffer {
    let mut img = ImageBuffer::new(width, height);
    for (p, px) in rgba.chunks_exact(4).enumerate() {
        let rgb = [px[0], px[1], px[2]].map(|v| v as f64 / 255.0);
        img.rgb[3 * p..3 * p + 3].copy_from_slice(&rgb);
        img.alpha[p] = if has_alpha {
            px[3] as f64 / 255.0
        } else {
            let d2: f64 = rgb.iter().zip(&background).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2.sqrt() > MATTE_THRESHOLD {
                1.0
            } else {
                0.0
            }
        };
    }
    img
}

pub fn read_png(path: &Path, background: [f64; 3]) -> Result<ImageBuffer> {
    let decoded = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(other)),
    })?;
    let has_alpha = decoded.color().has_alpha();
    let rgba = decoded.to_rgba8();
    Ok(image_from_rgba8(
        rgba.width() as usize,
        rgba.height() as usize,
        rgba.as_raw(),
        has_alpha,
        background,
    ))
}

pub fn write_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    image::save_buffer(path, &img.to_rgba8(), img.width as u32, img.height as u32, image::ColorType::Rgba8).map_err(
        |e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::io(path, std::io::Error::other(other)),
        },
    )
}

/// Loads `frame_0000.png` onwards from `dir`.
pub fn ingest_anchor(dir: &Path, background: [f64; 3]) -> Result<VideoClip> {
    let found = numbered(dir, "frame_", ".png")?;
    let Some(&last) = found.last() else {
        return Err(Error::Ingestion {
            index: 0,
            detail: format!("no frame_NNNN.png files in {}", dir.display()),
        });
    };
    let mut frames = Vec::with_capacity(last + 1);
    for k in 0..=last {
        if !found.contains(&k) {
            return Err(Error::Ingestion {
                index: k,
                detail: format!("{} is missing", frame_path(dir, k).display()),
            });
        }
        let img = read_png(&frame_path(dir, k), background).map_err(|e| Error::Ingestion {
            index: k,
            detail: e.to_string(),
        })?;
        if let Some(first) = frames.first() {
            if !img.same_size(first) {
                return Err(Error::Ingestion {
                    index: k,
                    detail: format!("frame is {}x{}, frame 0 is {}x{}", img.width, img.height, first.width, first.height),
                });
            }
        }
        frames.push(img);
    }
    VideoClip::new(frames)
}

/// Parses one OBJ file; vertices without colors are mid-grey.
pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj(path, &opts).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut mesh = TriMesh::default();
    for m in models {
        let m = m.mesh;
        let n = m.positions.len() / 3;
        let part = TriMesh {
            vertices: m.positions.chunks_exact(3).map(|p| [p[0] as f64, p[1] as f64, p[2] as f64]).collect(),
            colors: if m.vertex_color.len() == 3 * n {
                m.vertex_color.chunks_exact(3).map(|c| [c[0] as f64, c[1] as f64, c[2] as f64]).collect()
            } else {
                vec![[0.5; 3]; n]
            },
            triangles: m
                .indices
                .chunks_exact(3)
                .map(|t| [t[0] as usize, t[1] as usize, t[2] as usize])
                .collect(),
        };
        mesh.merge(&part);
    }
    mesh.validate()?;
    Ok(mesh)
}

pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut s = String::new();
    for (v, c) in mesh.vertices.iter().zip(&mesh.colors) {
        s.push_str(&format!("v {} {} {} {} {} {}\n", v[0], v[1], v[2], c[0], c[1], c[2]));
    }
    for t in &mesh.triangles {
        s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Loads `mesh_NNNN.obj` for each of `frames` frames. A lone `mesh_0000.obj`
/// is reused for every frame.
pub fn ingest_meshes(dir: &Path, frames: usize) -> Result<Vec<TriMesh>> {
    let found = numbered(dir, "mesh_", ".obj")?;
    let path = |k: usize| dir.join(format!("mesh_{k:04}.obj"));
    if !found.contains(&0) {
        return Err(Error::Ingestion {
            index: 0,
            detail: format!("{} is missing", path(0).display()),
        });
    }
    let load = |k: usize| {
        read_obj(&path(k)).map_err(|e| Error::Ingestion {
            index: k,
            detail: e.to_string(),
        })
    };
    if found.len() == 1 {
        return Ok(vec![load(0)?; frames]);
    }
    (0..frames)
        .map(|k| {
            if found.contains(&k) {
                load(k)
            } else {
                Err(Error::Ingestion {
                    index: k,
                    detail: format!("{} is missing", path(k).display()),
                })
            }
        })
        .collect()
}

pub fn write_frames(frames: &[ImageBuffer], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let p = frame_path(dir, k);
            write_png(f, &p)?;
            Ok(p)
        })
        .collect()
}

/// Writes `frame_NNNN.png` for each time, rendered from the deformed cloud.
pub fn render_sequence(
    cloud: &GaussianCloud,
    field: &DeformationField,
    view: &Camera,
    times: &[f64],
    background: [f64; 3],
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    let frames = super::stages::render_frames(cloud, field, view, times, background)?;
    write_frames(&frames, dir)
}

pub fn read_field(path: &Path) -> Result<DeformationField> {
    DeformationField::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_field(field: &DeformationField, path: &Path) -> Result<()> {
    std::fs::write(path, field.to_bytes()).map_err(|e| Error::io(path, e))
}
