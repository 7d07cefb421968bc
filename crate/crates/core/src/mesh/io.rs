//! Line-oriented mesh text format:
//!
//! ```text
//! lsmesh 1 <dim>
//! nodes <count>
//! <x> <y> [<z>]
//! ...
//! elements <count>
//! <i0> <i1> ... (4 or 8 zero-based node indices)
//! ```

use std::fmt::Write as _;

use super::{Mesh, Point};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::MeshParse {
        line,
        message: message.into(),
    }
}

fn expect_count<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, name: &str) -> Result<usize> {
    let (ln, l) = lines
        .next()
        .ok_or_else(|| parse_err(0, format!("missing `{name}` section")))?;
    let parts: Vec<&str> = l.split_whitespace().collect();
    if parts.len() != 2 || parts[0] != name {
        return Err(parse_err(ln, format!("expected `{name} <count>`")));
    }
    parts[1]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad count `{}`", parts[1])))
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 3 || h[0] != "lsmesh" || h[1] != "1" {
        return Err(parse_err(ln, "expected header `lsmesh 1 <dim>`"));
    }
    let dim: usize = h[2]
        .parse()
        .map_err(|_| parse_err(ln, format!("bad dimension `{}`", h[2])))?;
    if dim != 2 && dim != 3 {
        return Err(parse_err(ln, format!("dimension must be 2 or 3, got {dim}")));
    }

    let n_nodes = expect_count(&mut lines, "nodes")?;
    let mut nodes: Vec<Point> = Vec::with_capacity(n_nodes);
    for _ in 0..n_nodes {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "truncated node list"))?;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(ln, "bad coordinate"))?;
        if vals.len() != dim {
            return Err(parse_err(ln, format!("expected {dim} coordinates, found {}", vals.len())));
        }
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&vals);
        nodes.push(p);
    }

    let n_elem = expect_count(&mut lines, "elements")?;
    let mut elements = Vec::with_capacity(n_elem);
    for e in 0..n_elem {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "truncated element list"))?;
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(ln, format!("bad node index in element {e}")))?;
        elements.push(idx);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "unexpected trailing content"));
    }
    Mesh::from_parts(dim, nodes, elements)
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "lsmesh 1 {}", mesh.dim);
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for p in &mesh.nodes {
        let coords: Vec<String> = p[..mesh.dim].iter().map(|v| format!("{v:.17e}")).collect();
        let _ = writeln!(s, "{}", coords.join(" "));
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for el in &mesh.elements {
        let ids: Vec<String> = el.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(s, "{}", ids.join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad() {
        let m = read_mesh("lsmesh 1 2\nnodes 4\n0 0\n1 0\n1 1\n0 1\nelements 1\n0 1 2 3\n").unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.num_boundary_faces(), 4);
    }

    #[test]
    fn out_of_range_index_names_element() {
        let err = read_mesh("lsmesh 1 2\nnodes 4\n0 0\n1 0\n1 1\n0 1\nelements 1\n0 1 2 4\n").unwrap_err();
        match err {
            Error::InvalidElement { element, .. } => assert_eq!(element, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header() {
        assert!(matches!(read_mesh("mesh 2\n"), Err(Error::MeshParse { .. })));
        assert!(matches!(read_mesh(""), Err(Error::MeshParse { .. })));
    }

    #[test]
    fn round_trip_preserves_geometry() {
        let m = Mesh::perturbed(&[0.0, 0.0], &[1.0, 1.0], &[4, 4], 0.1, 3).unwrap();
        let m2 = read_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(m.elements, m2.elements);
        for (a, b) in m.nodes.iter().zip(&m2.nodes) {
            assert_eq!(a, b);
        }
    }
}
