//! Reader for Gmsh MSH 2.2 ASCII files containing 3-node triangles.

use super::{from_triangles, Mesh};
use crate::geom::Vec3;
use crate::{Error, Result};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

/// Load a triangular mesh from a Gmsh MSH 2.2 ASCII file.
///
/// Points and lines are skipped; any other element type is rejected. Node ids
/// may be sparse and are reindexed.
pub fn load_gmsh<P: AsRef<Path>>(path: P) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_msh(&text, path.to_path_buf())
}

struct Lines<'a> {
    iter: std::str::Lines<'a>,
    lineno: usize,
    path: PathBuf,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for line in self.iter.by_ref() {
            self.lineno += 1;
            let trimmed = line.trim();
            if !trimmed.is_empty() {
                return Some((self.lineno, trimmed));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next_content().ok_or_else(|| self.err(self.lineno, format!("unexpected end of file, expected {what}")))
    }

    fn err(&self, line: usize, msg: String) -> Error {
        Error::MeshFormat { path: self.path.clone(), line, msg }
    }
}

fn parse_msh(text: &str, path: PathBuf) -> Result<Mesh> {
    let mut lines = Lines { iter: text.lines(), lineno: 0, path };

    let (ln, header) = lines.expect("$MeshFormat")?;
    if header != "$MeshFormat" {
        return Err(lines.err(ln, format!("expected $MeshFormat, found '{header}'")));
    }
    let (ln, version) = lines.expect("format line")?;
    let fields: Vec<&str> = version.split_whitespace().collect();
    match fields.first() {
        Some(&"2.2") => {}
        Some(v) if v.starts_with('4') => {
            return Err(lines.err(
                ln,
                format!("MSH version {v} is not supported; export as version 2.2 ASCII"),
            ));
        }
        _ => return Err(lines.err(ln, format!("unsupported mesh format line '{version}'"))),
    }
    if fields.get(1) != Some(&"0") {
        return Err(lines.err(ln, "binary MSH files are not supported".into()));
    }
    let (ln, end) = lines.expect("$EndMeshFormat")?;
    if end != "$EndMeshFormat" {
        return Err(lines.err(ln, format!("expected $EndMeshFormat, found '{end}'")));
    }

    let (ln, nodes_hdr) = lines.expect("$Nodes")?;
    if nodes_hdr != "$Nodes" {
        return Err(lines.err(ln, format!("expected $Nodes, found '{nodes_hdr}'")));
    }
    let (ln, count) = lines.expect("node count")?;
    let n_nodes: usize = count
        .parse()
        .map_err(|_| lines.err(ln, format!("invalid node count '{count}'")))?;
    let mut vertices = Vec::with_capacity(n_nodes);
    let mut node_index: HashMap<u64, usize> = HashMap::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, line) = lines.expect("node line")?;
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>, what: &str| -> Result<f64> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| lines.err(ln, format!("invalid node {what} in '{line}'")))
        };
        let id: u64 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| lines.err(ln, format!("invalid node id in '{line}'")))?;
        let x = parse(it.next(), "x")?;
        let y = parse(it.next(), "y")?;
        let _z = parse(it.next(), "z")?;
        node_index.insert(id, vertices.len());
        vertices.push(Vec3::xy(x, y));
    }
    let (ln, end) = lines.expect("$EndNodes")?;
    if end != "$EndNodes" {
        return Err(lines.err(ln, format!("expected $EndNodes, found '{end}'")));
    }

    let (ln, elems_hdr) = lines.expect("$Elements")?;
    if elems_hdr != "$Elements" {
        return Err(lines.err(ln, format!("expected $Elements, found '{elems_hdr}'")));
    }
    let (ln, count) = lines.expect("element count")?;
    let n_elems: usize = count
        .parse()
        .map_err(|_| lines.err(ln, format!("invalid element count '{count}'")))?;
    let mut tris: Vec<[usize; 3]> = Vec::new();
    let mut last_line = ln;
    for _ in 0..n_elems {
        let (ln, line) = lines.expect("element line")?;
        last_line = ln;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(lines.err(ln, format!("truncated element line '{line}'")));
        }
        let etype: usize = toks[1]
            .parse()
            .map_err(|_| lines.err(ln, format!("invalid element type '{}'", toks[1])))?;
        match etype {
            1 | 15 => continue, // lines and points carry no cells
            2 => {
                let ntags: usize = toks[2]
                    .parse()
                    .map_err(|_| lines.err(ln, format!("invalid tag count '{}'", toks[2])))?;
                let node_toks = &toks[3 + ntags..];
                if node_toks.len() != 3 {
                    return Err(lines.err(ln, format!("triangle needs 3 nodes, got {}", node_toks.len())));
                }
                let mut tri = [0usize; 3];
                for (slot, tok) in tri.iter_mut().zip(node_toks) {
                    let id: u64 = tok
                        .parse()
                        .map_err(|_| lines.err(ln, format!("invalid node reference '{tok}'")))?;
                    *slot = *node_index
                        .get(&id)
                        .ok_or_else(|| lines.err(ln, format!("element references unknown node {id}")))?;
                }
                tris.push(tri);
            }
            other => {
                return Err(lines.err(
                    ln,
                    format!("unsupported element type {other}; only 3-node triangles are read"),
                ));
            }
        }
    }
    let (ln, end) = lines.expect("$EndElements")?;
    if end != "$EndElements" {
        return Err(lines.err(ln, format!("expected $EndElements, found '{end}'")));
    }

    if tris.is_empty() {
        return Err(lines.err(last_line, "no triangular elements in file".into()));
    }
    from_triangles(vertices, tris)
}
