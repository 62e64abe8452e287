//! Gmsh MSH 2.2 ASCII reader and writer.
//!
//! Triangles (element type 2) become cells with their physical tag as cell
//! tag; lines (type 1) tag the boundary faces they cover. Points (type 15)
//! are ignored. Any other element type is rejected.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Mesh, MeshError, Point};

pub fn read_msh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_msh(&text)
}

pub fn write_msh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, format_msh(mesh))?;
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some(l);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str, MeshError> {
        let line = self.line;
        self.next().ok_or_else(|| MeshError::Parse {
            line: line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn end(&mut self, section: &str) -> Result<(), MeshError> {
        let l = self.expect(section)?;
        if l != section {
            return Err(self.err(format!("expected {section}, found `{l}`")));
        }
        Ok(())
    }
}

fn num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>, what: &str) -> Result<T, MeshError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| lines.err(format!("invalid or missing {what}")))
}

pub fn parse_msh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut nodes: HashMap<usize, Point> = HashMap::new();
    let mut node_order: Vec<usize> = Vec::new();
    let mut triangles: Vec<([usize; 3], i32)> = Vec::new();
    let mut segments: Vec<([usize; 2], i32)> = Vec::new();
    let mut saw_format = false;

    while let Some(header) = lines.next() {
        match header {
            "$MeshFormat" => {
                let l = lines.expect("format line")?;
                let mut tok = l.split_whitespace();
                let version: String = num(&lines, tok.next(), "version")?;
                let file_type: i32 = num(&lines, tok.next(), "file type")?;
                if !version.starts_with("2.") {
                    return Err(lines.err(format!("unsupported MSH version {version}")));
                }
                if file_type != 0 {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                lines.end("$EndMeshFormat")?;
                saw_format = true;
            }
            "$Nodes" => {
                let tok = lines.expect("node count")?;
                let count: usize = num(&lines, Some(tok), "node count")?;
                for _ in 0..count {
                    let l = lines.expect("node")?;
                    let mut tok = l.split_whitespace();
                    let id: usize = num(&lines, tok.next(), "node id")?;
                    let x: f64 = num(&lines, tok.next(), "x coordinate")?;
                    let y: f64 = num(&lines, tok.next(), "y coordinate")?;
                    if nodes.insert(id, [x, y]).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    node_order.push(id);
                }
                lines.end("$EndNodes")?;
            }
            "$Elements" => {
                let tok = lines.expect("element count")?;
                let count: usize = num(&lines, Some(tok), "element count")?;
                for _ in 0..count {
                    let l = lines.expect("element")?;
                    let tok: Vec<&str> = l.split_whitespace().collect();
                    let mut it = tok.iter().copied();
                    let _id: usize = num(&lines, it.next(), "element id")?;
                    let etype: i64 = num(&lines, it.next(), "element type")?;
                    let ntags: usize = num(&lines, it.next(), "tag count")?;
                    let tags: Vec<i32> = (0..ntags)
                        .map(|_| num(&lines, it.next(), "tag"))
                        .collect::<Result<_, _>>()?;
                    let physical = tags.first().copied().unwrap_or(0);
                    let verts: Vec<usize> = it
                        .map(|t| num(&lines, Some(t), "node reference"))
                        .collect::<Result<_, _>>()?;
                    let nverts = match etype {
                        15 => 1,
                        1 => 2,
                        2 => 3,
                        _ => {
                            return Err(MeshError::UnsupportedElement {
                                line: lines.line,
                                element_type: etype,
                            })
                        }
                    };
                    if verts.len() != nverts {
                        return Err(lines.err(format!(
                            "element type {etype} needs {nverts} nodes, got {}",
                            verts.len()
                        )));
                    }
                    if let Some(v) = verts.iter().find(|v| !nodes.contains_key(v)) {
                        return Err(lines.err(format!("unknown node {v}")));
                    }
                    match etype {
                        1 => segments.push(([verts[0], verts[1]], physical)),
                        2 => triangles.push(([verts[0], verts[1], verts[2]], physical)),
                        _ => {}
                    }
                }
                lines.end("$EndElements")?;
            }
            h if h.starts_with('$') => {
                // skip unknown sections such as $PhysicalNames
                let end = format!("$End{}", &h[1..]);
                loop {
                    if lines.expect(&end)? == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected line `{other}`"))),
        }
    }
    if !saw_format {
        return Err(MeshError::Parse {
            line: 1,
            message: "missing $MeshFormat section".into(),
        });
    }
    if triangles.is_empty() {
        return Err(MeshError::Parse {
            line: lines.line,
            message: "no triangle elements".into(),
        });
    }

    // compact to the nodes referenced by triangles, ordered by node id
    node_order.sort_unstable();
    let mut used: HashMap<usize, usize> = HashMap::new();
    let mut referenced: Vec<usize> = triangles.iter().flat_map(|(t, _)| t.iter().copied()).collect();
    referenced.sort_unstable();
    referenced.dedup();
    let mut vertices = Vec::with_capacity(referenced.len());
    for id in node_order.iter().filter(|id| referenced.binary_search(id).is_ok()) {
        used.insert(*id, vertices.len());
        vertices.push(nodes[id]);
    }
    let cells = triangles.iter().map(|(t, _)| t.map(|v| used[&v])).collect();
    let tags = triangles.iter().map(|&(_, tag)| tag).collect();
    let mut mesh = Mesh::new(vertices, cells, tags)?;

    let face_of: HashMap<(usize, usize), usize> = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, face)| ((face.vertices[0], face.vertices[1]), f))
        .collect();
    for ([a, b], tag) in segments {
        let (Some(&a), Some(&b)) = (used.get(&a), used.get(&b)) else {
            continue;
        };
        if let Some(&f) = face_of.get(&(a.min(b), a.max(b))) {
            mesh.set_face_tag(f, tag);
        }
    }
    Ok(mesh)
}

pub fn format_msh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(out, "$Nodes\n{}", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(out, "{} {:e} {:e} 0", i + 1, p[0], p[1]);
    }
    out.push_str("$EndNodes\n");
    let boundary: Vec<usize> = mesh.boundary_faces().collect();
    let _ = writeln!(out, "$Elements\n{}", boundary.len() + mesh.n_cells());
    let mut id = 1;
    for f in boundary {
        let [a, b] = mesh.face(f).vertices;
        let tag = mesh.face_tag(f);
        let _ = writeln!(out, "{id} 1 2 {tag} {tag} {} {}", a + 1, b + 1);
        id += 1;
    }
    for c in 0..mesh.n_cells() {
        let [a, b, d] = mesh.cell(c);
        let tag = mesh.cell_tag(c);
        let _ = writeln!(out, "{id} 2 2 {tag} {tag} {} {} {}", a + 1, b + 1, d + 1);
        id += 1;
    }
    out.push_str("$EndElements\n");
    out
}
