//! Plain-text mesh format.
//!
//! ```text
//! d nv nc nb
//! x_1 .. x_d            (nv lines)
//! i_0 .. i_d            (nc lines, zero-based vertex indices)
//! b                     (nb boundary vertex indices, whitespace separated)
//! ```
//!
//! Lines starting with `#` are ignored. Nodes are renumbered interior-first
//! on load; [`Mesh::original_index`] maps back to file order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Mesh, MeshError};

struct Tokens<R> {
    lines: std::io::Lines<BufReader<R>>,
    line: usize,
    pending: Vec<String>,
}

impl<R: Read> Tokens<R> {
    fn new(reader: R) -> Self {
        Self {
            lines: BufReader::new(reader).lines(),
            line: 0,
            pending: Vec::new(),
        }
    }

    /// Next non-empty, non-comment line split into tokens.
    fn line(&mut self) -> Result<Vec<String>, MeshError> {
        if !self.pending.is_empty() {
            return Ok(std::mem::take(&mut self.pending));
        }
        loop {
            let Some(text) = self.lines.next() else {
                return Err(self.error("unexpected end of file"));
            };
            let text = text?;
            self.line += 1;
            let trimmed = text.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok(trimmed.split_whitespace().map(str::to_string).collect());
        }
    }

    fn token(&mut self) -> Result<String, MeshError> {
        let mut toks = self.line()?;
        let first = toks.remove(0);
        self.pending = toks;
        Ok(first)
    }

    fn error(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str, what: &str) -> Result<T, MeshError> {
        tok.parse().map_err(|_| self.error(format!("invalid {what} `{tok}`")))
    }
}

pub fn read_mesh<R: Read>(reader: R) -> Result<Mesh, MeshError> {
    let mut toks = Tokens::new(reader);
    let header = toks.line()?;
    if header.len() != 4 {
        return Err(toks.error("header must be `d nv nc nb`"));
    }
    let d: usize = toks.parse(&header[0], "dimension")?;
    let nv: usize = toks.parse(&header[1], "vertex count")?;
    let nc: usize = toks.parse(&header[2], "cell count")?;
    let nb: usize = toks.parse(&header[3], "boundary count")?;
    if !(2..=3).contains(&d) {
        return Err(toks.error(format!("dimension {d} not supported (2 or 3)")));
    }
    let mut coords = Vec::with_capacity(nv * d);
    for _ in 0..nv {
        let line = toks.line()?;
        if line.len() != d {
            return Err(toks.error(format!("expected {d} coordinates")));
        }
        for t in &line {
            coords.push(toks.parse::<f64>(t, "coordinate")?);
        }
    }
    let mut cells = Vec::with_capacity(nc * (d + 1));
    for _ in 0..nc {
        let line = toks.line()?;
        if line.len() != d + 1 {
            return Err(toks.error(format!("expected {} vertex indices", d + 1)));
        }
        for t in &line {
            cells.push(toks.parse::<usize>(t, "vertex index")?);
        }
    }
    let mut boundary = vec![false; nv];
    for _ in 0..nb {
        let t = toks.token()?;
        let b: usize = toks.parse(&t, "boundary index")?;
        if b >= nv {
            return Err(toks.error(format!("boundary index {b} out of range")));
        }
        boundary[b] = true;
    }
    Mesh::new(d, coords, cells, &boundary)
}

pub fn read_mesh_file(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
    read_mesh(std::fs::File::open(path)?)
}

/// Writes the mesh in its current (interior-first) numbering.
pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> std::io::Result<()> {
    let boundary = mesh.num_nodes() - mesh.interior_count();
    writeln!(out, "{} {} {} {}", mesh.dim(), mesh.num_nodes(), mesh.num_cells(), boundary)?;
    for i in 0..mesh.num_nodes() {
        let row: Vec<String> = mesh.node(i).iter().map(|x| format!("{x:.17e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    for cell in mesh.cells() {
        let row: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    for i in mesh.interior_count()..mesh.num_nodes() {
        writeln!(out, "{i}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured_mesh, BoxDomain, Pattern};

    const FAN: &str = "# four triangles around the centre\n\
        2 5 4 4\n\
        0 0\n1 0\n1 1\n0 1\n0.5 0.5\n\
        0 1 4\n1 2 4\n2 3 4\n3 0 4\n\
        0 1 2 3\n";

    #[test]
    fn reads_and_reorders() {
        let mesh = read_mesh(FAN.as_bytes()).unwrap();
        assert_eq!(mesh.interior_count(), 1);
        assert_eq!(mesh.node(0), &[0.5, 0.5]);
        assert_eq!(mesh.original_index(0), 4);
        assert_eq!(mesh.original_indices(), &[4, 0, 1, 2, 3]);
    }

    #[test]
    fn write_read_round_trip() {
        let mesh = generate_structured_mesh(&BoxDomain::unit(2), 1, Pattern::Acute).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back.num_nodes(), mesh.num_nodes());
        assert_eq!(back.interior_count(), mesh.interior_count());
        for i in 0..mesh.num_nodes() {
            assert_eq!(back.node(i), mesh.node(i));
        }
        assert!(back.cells().eq(mesh.cells()));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "2 3 1 3\n0 0\n1 x\n0 1\n0 1 2\n0 1 2\n";
        match read_mesh(bad.as_bytes()) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let short = "2 3 1 3\n0 0\n1 0\n";
        assert!(matches!(read_mesh(short.as_bytes()), Err(MeshError::Parse { .. })));
    }
}
