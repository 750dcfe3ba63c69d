//! Binary little-endian PLY in the layout common 3DGS viewers read.
//!
//! Opacity is stored as its logit, scales as logs and colors as degree-0
//! spherical-harmonic coefficients.

use crate::scene::GaussianCloud;
use crate::{Error, Result};

/// Degree-0 spherical harmonic basis constant.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

pub const PROPERTIES: [&str; 14] = [
    "x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1",
    "f_dc_2",
];

pub fn ply_bytes(cloud: &GaussianCloud) -> Vec<u8> {
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", cloud.len());
    for p in PROPERTIES {
        header.push_str(&format!("property float {p}\n"));
    }
    header.push_str("end_header\n");
    let mut out = header.into_bytes();
    out.reserve(cloud.len() * PROPERTIES.len() * 4);
    for i in 0..cloud.len() {
        let c = cloud.colors[i];
        let row = [
            cloud.positions[i][0],
            cloud.positions[i][1],
            cloud.positions[i][2],
            cloud.opacity_logits[i],
            cloud.log_scales[i][0],
            cloud.log_scales[i][1],
            cloud.log_scales[i][2],
            cloud.rotations[i][0],
            cloud.rotations[i][1],
            cloud.rotations[i][2],
            cloud.rotations[i][3],
            (c[0] - 0.5) / SH_C0,
            (c[1] - 0.5) / SH_C0,
            (c[2] - 0.5) / SH_C0,
        ];
        for v in row {
            out.extend((v as f32).to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::invalid(format!("ply: {}", msg.into()))
}

/// Reads a cloud back. Extra float properties (normals, higher harmonics) are skipped.
pub fn parse_ply(bytes: &[u8]) -> Result<GaussianCloud> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("missing end_header"))?;
    let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not utf-8"))?;
    let body = &bytes[end + END.len()..];
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing magic"));
    }
    let mut count = None;
    let mut names = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, _] => return Err(bad(format!("unsupported format {other}"))),
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|_| bad("bad vertex count"))?),
            ["element", other, ..] => return Err(bad(format!("unexpected element {other}"))),
            ["property", "float", name] if count.is_some() => names.push(*name),
            ["property", ty, name] => return Err(bad(format!("property {name} has unsupported type {ty}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            _ => return Err(bad(format!("unrecognised header line {line:?}"))),
        }
    }
    let n = count.ok_or_else(|| bad("no vertex element"))?;
    let column = |p: &str| names.iter().position(|q| *q == p).ok_or_else(|| bad(format!("missing property {p}")));
    let cols = PROPERTIES.iter().map(|p| column(p)).collect::<Result<Vec<_>>>()?;
    let stride = names.len() * 4;
    if body.len() != n * stride {
        return Err(bad(format!("expected {} data bytes, found {}", n * stride, body.len())));
    }
    let mut cloud = GaussianCloud::with_capacity(n);
    for row in body.chunks_exact(stride) {
        let v: Vec<f64> = cols
            .iter()
            .map(|&c| f32::from_le_bytes(row[c * 4..c * 4 + 4].try_into().unwrap()) as f64)
            .collect();
        cloud.push(
            [v[0], v[1], v[2]],
            [v[7], v[8], v[9], v[10]],
            [v[4], v[5], v[6]],
            [0.5 + SH_C0 * v[11], 0.5 + SH_C0 * v[12], 0.5 + SH_C0 * v[13]],
            v[3],
        );
    }
    Ok(cloud)
}

pub fn export_ply(cloud: &GaussianCloud, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, ply_bytes(cloud)).map_err(|e| Error::io(path, e))
}

pub fn import_ply(path: &std::path::Path) -> Result<GaussianCloud> {
    parse_ply(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_cloud_round_trips() {
        let bytes = ply_bytes(&GaussianCloud::default());
        assert!(std::str::from_utf8(&bytes).unwrap().contains("element vertex 0\n"));
        assert!(parse_ply(&bytes).unwrap().is_empty());
    }

    #[test]
    fn truncated_body_rejected() {
        let mut c = GaussianCloud::default();
        c.push([0.0; 3], [1.0, 0.0, 0.0, 0.0], [0.0; 3], [0.5; 3], 0.0);
        let bytes = ply_bytes(&c);
        assert!(parse_ply(&bytes[..bytes.len() - 1]).is_err());
    }
}
