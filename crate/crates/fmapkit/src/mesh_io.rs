//! OFF, OBJ and ASCII PLY triangle meshes.
//!
//! Polygons with more than three corners are fan-triangulated. Parse errors
//! carry the 1-based line number of the offending line.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use fmapkit_core::mesh::{Point3, TriangleMesh};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(Error::Validation(format!(
                "{}: unknown mesh extension (expected .off, .obj or .ply)",
                path.display()
            ))),
        }
    }
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, format, path)
}

/// Parses mesh text; `origin` only labels errors.
pub fn parse_mesh(text: &str, format: MeshFormat, origin: &Path) -> Result<TriangleMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text, origin)?,
        MeshFormat::Obj => parse_obj(text, origin)?,
        MeshFormat::Ply => parse_ply(text, origin)?,
    };
    Ok(TriangleMesh::new(vertices, faces)?)
}

/// Non-empty lines with comments stripped, paired with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<T: std::str::FromStr>(token: &str, origin: &Path, line: usize, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(origin, line, format!("invalid {what} '{token}'")))
}

fn parse_point<'a>(mut tokens: impl Iterator<Item = &'a str>, origin: &Path, line: usize) -> Result<Point3> {
    let mut p = [0.0f64; 3];
    for c in &mut p {
        let token = tokens
            .next()
            .ok_or_else(|| Error::parse(origin, line, "vertex needs three coordinates"))?;
        *c = parse_num(token, origin, line, "coordinate")?;
        if !c.is_finite() {
            return Err(Error::parse(origin, line, "non-finite coordinate"));
        }
    }
    Ok(p)
}

fn push_polygon(polygon: &[usize], n: usize, faces: &mut Vec<[usize; 3]>, origin: &Path, line: usize) -> Result<()> {
    if polygon.len() < 3 {
        return Err(Error::parse(origin, line, "face needs at least three vertices"));
    }
    if let Some(&bad) = polygon.iter().find(|&&v| v >= n) {
        return Err(Error::parse(origin, line, format!("vertex index {bad} out of range ({n} vertices)")));
    }
    for i in 1..polygon.len() - 1 {
        faces.push([polygon[0], polygon[i], polygon[i + 1]]);
    }
    Ok(())
}

type Parsed = (Vec<Point3>, Vec<[usize; 3]>);

fn parse_off(text: &str, origin: &Path) -> Result<Parsed> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty file"))?;
    let mut tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.first() != Some(&"OFF") {
        return Err(Error::parse(origin, line_no, "missing OFF header"));
    }
    tokens.remove(0);
    let mut count_line = line_no;
    if tokens.is_empty() {
        let (l, counts) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, line_no, "missing element counts"))?;
        tokens = counts.split_whitespace().collect();
        count_line = l;
    }
    if tokens.len() < 2 {
        return Err(Error::parse(origin, count_line, "expected vertex and face counts"));
    }
    let nv: usize = parse_num(tokens[0], origin, count_line, "vertex count")?;
    let nf: usize = parse_num(tokens[1], origin, count_line, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    let mut faces = Vec::with_capacity(nf);
    let mut last_line = count_line;
    for _ in 0..nv {
        let (l, line) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, last_line, format!("expected {nv} vertices, file ended early")))?;
        vertices.push(parse_point(line.split_whitespace(), origin, l)?);
        last_line = l;
    }
    for _ in 0..nf {
        let (l, line) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, last_line, format!("expected {nf} faces, file ended early")))?;
        let mut tokens = line.split_whitespace();
        let count: usize = parse_num(tokens.next().unwrap_or(""), origin, l, "polygon size")?;
        let polygon = tokens
            .take(count)
            .map(|t| parse_num(t, origin, l, "vertex index"))
            .collect::<Result<Vec<usize>>>()?;
        if polygon.len() != count {
            return Err(Error::parse(origin, l, format!("face declares {count} vertices but lists {}", polygon.len())));
        }
        push_polygon(&polygon, nv, &mut faces, origin, l)?;
        last_line = l;
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str, origin: &Path) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut polygons: Vec<(usize, Vec<usize>)> = Vec::new();
    for (l, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => vertices.push(parse_point(tokens, origin, l)?),
            Some("f") => {
                let mut polygon = Vec::new();
                for token in tokens {
                    let index_text = token.split('/').next().unwrap_or("");
                    let index: i64 = parse_num(index_text, origin, l, "vertex index")?;
                    // 1-based; negative indices count back from the latest vertex
                    let resolved = match index {
                        i if i > 0 => i - 1,
                        i if i < 0 => vertices.len() as i64 + i,
                        _ => return Err(Error::parse(origin, l, "vertex index 0 is invalid in OBJ")),
                    };
                    if resolved < 0 {
                        return Err(Error::parse(origin, l, format!("vertex index {index} out of range")));
                    }
                    polygon.push(resolved as usize);
                }
                polygons.push((l, polygon));
            }
            _ => {}
        }
    }
    let mut faces = Vec::with_capacity(polygons.len());
    for (l, polygon) in polygons {
        push_polygon(&polygon, vertices.len(), &mut faces, origin, l)?;
    }
    Ok((vertices, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
    list_property: Option<String>,
}

fn parse_ply(text: &str, origin: &Path) -> Result<Parsed> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((l, _)) => return Err(Error::parse(origin, l, "missing ply magic")),
        None => return Err(Error::parse(origin, 1, "empty file")),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut header_end = None;
    for (l, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(Error::parse(origin, l, format!("unsupported PLY format '{other}'"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(PlyElement {
                name: name.to_string(),
                count: parse_num(count, origin, l, "element count")?,
                properties: Vec::new(),
                list_property: None,
            }),
            ["property", "list", _, _, name] => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(origin, l, "property before any element"))?;
                element.list_property = Some(name.to_string());
                element.properties.push(name.to_string());
            }
            ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(origin, l, "property before any element"))?
                .properties
                .push(name.to_string()),
            ["end_header"] => {
                header_end = Some(l);
                break;
            }
            _ => return Err(Error::parse(origin, l, format!("unrecognized header line '{line}'"))),
        }
    }
    let mut last_line = header_end.ok_or_else(|| Error::parse(origin, 1, "missing end_header"))?;

    let mut body = lines.filter(|(_, l)| !l.is_empty());
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vertex_count = None;
    for element in &elements {
        for _ in 0..element.count {
            let (l, line) = body.next().ok_or_else(|| {
                Error::parse(origin, last_line, format!("expected {} '{}' records, file ended early", element.count, element.name))
            })?;
            last_line = l;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match element.name.as_str() {
                "vertex" => {
                    let mut p = [f64::NAN; 3];
                    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
                        let col = element
                            .properties
                            .iter()
                            .position(|p| p == name)
                            .ok_or_else(|| Error::parse(origin, l, format!("vertex element lacks property '{name}'")))?;
                        let token = tokens
                            .get(col)
                            .ok_or_else(|| Error::parse(origin, l, "vertex record is too short"))?;
                        p[axis] = parse_num(token, origin, l, "coordinate")?;
                    }
                    if p.iter().any(|c| !c.is_finite()) {
                        return Err(Error::parse(origin, l, "non-finite coordinate"));
                    }
                    vertices.push(p);
                }
                "face" => {
                    if element.properties.len() != 1 || element.list_property.is_none() {
                        return Err(Error::parse(origin, l, "face element must have exactly one list property"));
                    }
                    let count: usize = parse_num(tokens.first().copied().unwrap_or(""), origin, l, "polygon size")?;
                    if tokens.len() != count + 1 {
                        return Err(Error::parse(origin, l, format!("face declares {count} vertices but lists {}", tokens.len() - 1)));
                    }
                    let polygon = tokens[1..]
                        .iter()
                        .map(|t| parse_num(t, origin, l, "vertex index"))
                        .collect::<Result<Vec<usize>>>()?;
                    let n = *vertex_count.get_or_insert(vertices.len());
                    push_polygon(&polygon, n, &mut faces, origin, l)?;
                }
                _ => {}
            }
        }
        if element.name == "vertex" {
            vertex_count = Some(vertices.len());
        }
    }
    Ok((vertices, faces))
}

/// Writes OFF with shortest round-trip float formatting, so reading the file
/// back reproduces the mesh bit for bit.
pub fn write_off(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    out.push_str(&format!("OFF\n{} {} 0\n", mesh.n(), mesh.faces().len()));
    for p in mesh.vertices() {
        out.push_str(&format!("{:?} {:?} {:?}\n", p[0], p[1], p[2]));
    }
    for f in mesh.faces() {
        out.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    write_atomic(path, out.as_bytes())
}

/// Writes to a sibling temporary file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    // unique per writer, so concurrent writes of one entry cannot interleave
    tmp_name.push(format!(".{}.{}.tmp", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed)));
    let tmp = path.with_file_name(tmp_name);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn off_quad_is_fan_triangulated() {
        let text = "OFF\n# square\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let mesh = parse_mesh(text, MeshFormat::Off, origin()).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn off_counts_on_header_line() {
        let text = "OFF 3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert_eq!(parse_mesh(text, MeshFormat::Off, origin()).unwrap().n(), 3);
    }

    #[test]
    fn obj_indices_are_one_based_and_negative_relative() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 -1//1\n";
        let mesh = parse_mesh(text, MeshFormat::Obj, origin()).unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn ply_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 255\n1 0 0 255\n0 1 0 255\n3 0 1 2\n";
        let mesh = parse_mesh(text, MeshFormat::Ply, origin()).unwrap();
        assert_eq!(mesh.vertices()[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn errors_report_line_numbers() {
        let text = "OFF\n3 1 0\n0 0 0\n1 zero 0\n0 1 0\n3 0 1 2\n";
        match parse_mesh(text, MeshFormat::Off, origin()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "v 0 0 0\nv 1 0 0\nf 1 2 3\n";
        match parse_mesh(text, MeshFormat::Obj, origin()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(parse_mesh(text, MeshFormat::Ply, origin()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn truncated_off_is_rejected() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n";
        assert!(matches!(parse_mesh(text, MeshFormat::Off, origin()), Err(Error::Parse { .. })));
    }
}
