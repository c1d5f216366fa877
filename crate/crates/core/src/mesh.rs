//! Conforming 2D triangulations with globally oriented edges and tagged
//! boundary segments.
//!
//! Conventions:
//! * cells are stored counterclockwise (positive signed area);
//! * local edge `i` of a cell is the edge opposite local vertex `i`, i.e. the
//!   segment from local vertex `i+1` to local vertex `i+2` (mod 3);
//! * every edge is globally oriented from its lower to its higher vertex id,
//!   and its global unit normal is the tangent rotated clockwise;
//! * `cell_edge_signs[c][i]` is `+1` when the global normal of local edge `i`
//!   points out of cell `c`, `-1` otherwise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    cell_edge_signs: Vec<[f64; 3]>,
    edge_cells: Vec<Vec<usize>>,
    vertex_edges: Vec<Vec<usize>>,
    vertex_cells: Vec<Vec<usize>>,
    boundary_tags: BTreeMap<usize, String>,
}

/// Side tags used by [`unit_square_mesh`].
pub const SQUARE_TAGS: [&str; 4] = ["left", "right", "bottom", "top"];

impl Mesh {
    /// Builds the edge structure for a triangulation. Cells with negative
    /// orientation are flipped. `boundary` lists `(a, b, tag)` segments; when
    /// it is empty every boundary edge receives the tag `"boundary"`.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        mut cells: Vec<[usize; 3]>,
        boundary: &[(usize, usize, String)],
    ) -> Result<Self> {
        let nv = vertices.len();
        for (c, cell) in cells.iter_mut().enumerate() {
            if cell.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("cell {c} references a missing vertex")));
            }
            let a = signed_area(&vertices, cell);
            if a == 0.0 || !a.is_finite() {
                return Err(Error::InvalidMesh(format!("cell {c} is degenerate")));
            }
            if a < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            let mut cs = [0.0f64; 3];
            for i in 0..3 {
                let a = cell[(i + 1) % 3];
                let b = cell[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[e].push(c);
                if edge_cells[e].len() > 2 {
                    return Err(Error::InvalidMesh(format!("edge {key:?} shared by more than two cells")));
                }
                ce[i] = e;
                // counterclockwise traversal a -> b agrees with low -> high
                cs[i] = if a < b { 1.0 } else { -1.0 };
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
        }

        let mut vertex_edges = vec![Vec::new(); nv];
        for (e, &[a, b]) in edges.iter().enumerate() {
            vertex_edges[a].push(e);
            vertex_edges[b].push(e);
        }
        let mut vertex_cells = vec![Vec::new(); nv];
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                vertex_cells[v].push(c);
            }
        }

        let mut boundary_tags = BTreeMap::new();
        if boundary.is_empty() {
            for (e, ec) in edge_cells.iter().enumerate() {
                if ec.len() == 1 {
                    boundary_tags.insert(e, "boundary".to_string());
                }
            }
        } else {
            for (a, b, tag) in boundary {
                let key = ((*a).min(*b), (*a).max(*b));
                let e = *edge_ids
                    .get(&key)
                    .ok_or_else(|| Error::InvalidMesh(format!("boundary segment {key:?} is not a mesh edge")))?;
                if edge_cells[e].len() != 1 {
                    return Err(Error::InvalidMesh(format!("segment {key:?} is not on the boundary")));
                }
                if boundary_tags.insert(e, tag.clone()).is_some() {
                    return Err(Error::InvalidMesh(format!("boundary segment {key:?} tagged twice")));
                }
            }
            if let Some(e) = (0..edges.len()).find(|&e| edge_cells[e].len() == 1 && !boundary_tags.contains_key(&e)) {
                return Err(Error::InvalidMesh(format!("boundary edge {:?} carries no tag", edges[e])));
            }
        }

        Ok(Self {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_signs,
            edge_cells,
            vertex_edges,
            vertex_cells,
            boundary_tags,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }
    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn cell_edges(&self, c: usize) -> [usize; 3] {
        self.cell_edges[c]
    }
    pub fn cell_edge_signs(&self, c: usize) -> [f64; 3] {
        self.cell_edge_signs[c]
    }
    pub fn edge_cells(&self, e: usize) -> &[usize] {
        &self.edge_cells[e]
    }
    pub fn vertex_edges(&self, v: usize) -> &[usize] {
        &self.vertex_edges[v]
    }
    pub fn vertex_cells(&self, v: usize) -> &[usize] {
        &self.vertex_cells[v]
    }
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_cells[e].len() == 1
    }
    pub fn boundary_tags(&self) -> &BTreeMap<usize, String> {
        &self.boundary_tags
    }
    pub fn edge_tag(&self, e: usize) -> Option<&str> {
        self.boundary_tags.get(&e).map(String::as_str)
    }
    pub fn tag_set(&self) -> BTreeSet<String> {
        self.boundary_tags.values().cloned().collect()
    }

    pub fn cell_coords(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        signed_area(&self.vertices, &self.cells[c])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        dist(self.vertices[a], self.vertices[b])
    }

    /// Unit normal of the global edge orientation (tangent rotated clockwise).
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let t = sub(self.vertices[b], self.vertices[a]);
        let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
        [t[1] / l, -t[0] / l]
    }

    /// Outward unit normal of a boundary edge.
    pub fn outward_normal(&self, e: usize) -> [f64; 2] {
        let c = self.edge_cells[e][0];
        let i = self.cell_edges[c].iter().position(|&x| x == e).unwrap();
        let n = self.edge_normal(e);
        let s = self.cell_edge_signs[c][i];
        [s * n[0], s * n[1]]
    }

    /// Position of `e` among the local edges of `c`.
    pub fn local_edge_index(&self, c: usize, e: usize) -> Option<usize> {
        self.cell_edges[c].iter().position(|&x| x == e)
    }

    pub fn diameter(&self, c: usize) -> f64 {
        let x = self.cell_coords(c);
        dist(x[0], x[1]).max(dist(x[1], x[2])).max(dist(x[2], x[0]))
    }

    pub fn inradius(&self, c: usize) -> f64 {
        let x = self.cell_coords(c);
        let perim = dist(x[0], x[1]) + dist(x[1], x[2]) + dist(x[2], x[0]);
        2.0 * self.cell_area(c) / perim
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.cell_area(c)).sum()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_cells() as i64
    }

    /// Checks the structural invariants: edge multiplicities, positive areas,
    /// tagged boundary and opposite relative signs across interior edges.
    pub fn validate(&self) -> Result<()> {
        for c in 0..self.num_cells() {
            if self.cell_area(c) <= 0.0 {
                return Err(Error::InvalidMesh(format!("cell {c} has non-positive area")));
            }
        }
        for e in 0..self.num_edges() {
            match self.edge_cells[e].as_slice() {
                [c] => {
                    if !self.boundary_tags.contains_key(&e) {
                        return Err(Error::InvalidMesh(format!("boundary edge {e} untagged (cell {c})")));
                    }
                }
                [c0, c1] => {
                    let s0 = self.cell_edge_signs[*c0][self.local_edge_index(*c0, e).unwrap()];
                    let s1 = self.cell_edge_signs[*c1][self.local_edge_index(*c1, e).unwrap()];
                    if s0 != -s1 {
                        return Err(Error::InvalidMesh(format!("interior edge {e} has inconsistent orientation")));
                    }
                }
                _ => return Err(Error::InvalidMesh(format!("edge {e} has invalid cell incidence"))),
            }
        }
        Ok(())
    }
}

fn signed_area(v: &[[f64; 2]], cell: &[usize; 3]) -> f64 {
    let a = v[cell[0]];
    let b = v[cell[1]];
    let c = v[cell[2]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[inline]
fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = sub(a, b);
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Structured right-triangle mesh of the unit square with `n` cells per side.
/// Each square is split along its lower-left to upper-right diagonal.
pub fn unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("unit_square_mesh needs n >= 1".into()));
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let h = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            // exact endpoints so that boundary coordinates are bitwise 0 or 1
            let x = if i == n { 1.0 } else { i as f64 * h };
            let y = if j == n { 1.0 } else { j as f64 * h };
            vertices.push([x, y]);
        }
    }
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = idx(i, j);
            let v10 = idx(i + 1, j);
            let v11 = idx(i + 1, j + 1);
            let v01 = idx(i, j + 1);
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    let mut boundary = Vec::with_capacity(4 * n);
    for k in 0..n {
        boundary.push((idx(0, k), idx(0, k + 1), "left".to_string()));
        boundary.push((idx(n, k), idx(n, k + 1), "right".to_string()));
        boundary.push((idx(k, 0), idx(k + 1, 0), "bottom".to_string()));
        boundary.push((idx(k, n), idx(k + 1, n), "top".to_string()));
    }
    Mesh::new(vertices, cells, &boundary)
}

/// Splits every triangle into four through its edge midpoints. Edge `e` of the
/// parent produces vertex `num_vertices + e`; boundary tags are inherited.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let nv = mesh.num_vertices();
    let mut vertices = mesh.vertices.clone();
    for &[a, b] in &mesh.edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
    }
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let [v0, v1, v2] = mesh.cells[c];
        let [e0, e1, e2] = mesh.cell_edges[c];
        // m_i is the midpoint of the edge opposite v_i
        let (m0, m1, m2) = (nv + e0, nv + e1, nv + e2);
        cells.push([v0, m2, m1]);
        cells.push([m2, v1, m0]);
        cells.push([m1, m0, v2]);
        cells.push([m0, m1, m2]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary_tags.len());
    for (&e, tag) in &mesh.boundary_tags {
        let [a, b] = mesh.edges[e];
        boundary.push((a, nv + e, tag.clone()));
        boundary.push((nv + e, b, tag.clone()));
    }
    Mesh::new(vertices, cells, &boundary)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub h_max: f64,
    pub h_min: f64,
    /// Maximum over cells of diameter / inradius.
    pub shape_regularity: f64,
}

pub fn mesh_stats(mesh: &Mesh) -> MeshStats {
    let mut s = MeshStats { h_max: 0.0, h_min: f64::INFINITY, shape_regularity: 0.0 };
    for c in 0..mesh.num_cells() {
        let d = mesh.diameter(c);
        s.h_max = s.h_max.max(d);
        s.h_min = s.h_min.min(d);
        s.shape_regularity = s.shape_regularity.max(d / mesh.inradius(c));
    }
    s
}

/// Parses the plain-text mesh format:
///
/// ```text
/// dim=2 nv=<V> nc=<T>
/// x y            (V lines)
/// i j k          (T lines)
/// boundary       (optional)
/// a b tag        (one line per boundary segment)
/// ```
///
/// Tokens are whitespace separated and `#` starts a comment.
pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let perr = |line: usize, msg: &str| Error::MeshParse { line, msg: msg.to_string() };

    let (hl, header) = lines.next().ok_or_else(|| perr(0, "empty mesh file"))?;
    let mut nv = None;
    let mut nc = None;
    for tok in header.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| perr(hl, "malformed header token"))?;
        let parsed: usize = v.parse().map_err(|_| perr(hl, "header value is not an integer"))?;
        match k {
            "dim" if parsed != 2 => return Err(perr(hl, "only dim=2 is supported")),
            "dim" => {}
            "nv" => nv = Some(parsed),
            "nc" => nc = Some(parsed),
            _ => return Err(perr(hl, "unknown header key")),
        }
    }
    let nv = nv.ok_or_else(|| perr(hl, "missing nv"))?;
    let nc = nc.ok_or_else(|| perr(hl, "missing nc"))?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of file in vertices"))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(ln, "bad coordinate"))?;
        if xs.len() != 2 {
            return Err(perr(ln, "expected two coordinates"));
        }
        vertices.push([xs[0], xs[1]]);
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (ln, l) = lines.next().ok_or_else(|| perr(0, "unexpected end of file in cells"))?;
        let ids: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| perr(ln, "bad vertex index"))?;
        if ids.len() != 3 {
            return Err(perr(ln, "expected three vertex indices"));
        }
        cells.push([ids[0], ids[1], ids[2]]);
    }
    let mut boundary = Vec::new();
    if let Some((ln, l)) = lines.next() {
        if l != "boundary" {
            return Err(perr(ln, "expected `boundary` section"));
        }
        for (ln, l) in lines {
            let toks: Vec<&str> = l.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(perr(ln, "expected `a b tag`"));
            }
            let a = toks[0].parse().map_err(|_| perr(ln, "bad vertex index"))?;
            let b = toks[1].parse().map_err(|_| perr(ln, "bad vertex index"))?;
            boundary.push((a, b, toks[2].to_string()));
        }
    }
    Mesh::new(vertices, cells, &boundary)
}

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = format!("dim=2 nv={} nc={}\n", mesh.num_vertices(), mesh.num_cells());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
    }
    for c in &mesh.cells {
        let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
    }
    s.push_str("boundary\n");
    for (&e, tag) in &mesh.boundary_tags {
        let [a, b] = mesh.edges[e];
        let _ = writeln!(s, "{a} {b} {tag}");
    }
    s
}

/// Mechanics condition on a tagged boundary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanicsBc {
    /// `ν·u = 0`, `ν×r = 0` (essential for rotation and displacement).
    Rotation,
    /// Tangential displacement `u₀` and normal stress datum `σ₀` (natural).
    Displacement,
}

/// Flow condition on a tagged boundary part.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowBc {
    /// Prescribed pressure `p₀` (natural for the mixed form).
    Pressure,
    /// `ν·q = 0` (essential).
    Flux,
}

/// Assignment of every boundary tag to one mechanics part and one flow part.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryConfig {
    pub mechanics: BTreeMap<String, MechanicsBc>,
    pub flow: BTreeMap<String, FlowBc>,
}

impl BoundaryConfig {
    /// Same conditions on every tag.
    pub fn uniform(tags: &[&str], mech: MechanicsBc, flow: FlowBc) -> Self {
        let mut bc = Self::default();
        for t in tags {
            bc.mechanics.insert(t.to_string(), mech);
            bc.flow.insert(t.to_string(), flow);
        }
        bc
    }

    pub fn set(mut self, tag: &str, mech: MechanicsBc, flow: FlowBc) -> Self {
        self.mechanics.insert(tag.to_string(), mech);
        self.flow.insert(tag.to_string(), flow);
        self
    }

    /// Checks that both maps partition the tags present on `mesh` and that a
    /// part of the boundary carries a pressure condition.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let tags = mesh.tag_set();
        for t in &tags {
            if !self.mechanics.contains_key(t) {
                return Err(Error::InvalidBoundary(format!("tag `{t}` has no mechanics condition")));
            }
            if !self.flow.contains_key(t) {
                return Err(Error::InvalidBoundary(format!("tag `{t}` has no flow condition")));
            }
        }
        for t in self.mechanics.keys().chain(self.flow.keys()) {
            if !tags.contains(t) {
                return Err(Error::InvalidBoundary(format!("tag `{t}` does not exist on the mesh")));
            }
        }
        if !self.flow.values().any(|f| *f == FlowBc::Pressure) {
            return Err(Error::InvalidBoundary("no boundary part carries a pressure condition".into()));
        }
        Ok(())
    }

    pub fn mechanics_of(&self, mesh: &Mesh, e: usize) -> Option<MechanicsBc> {
        mesh.edge_tag(e).and_then(|t| self.mechanics.get(t).copied())
    }

    pub fn flow_of(&self, mesh: &Mesh, e: usize) -> Option<FlowBc> {
        mesh.edge_tag(e).and_then(|t| self.flow.get(t).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = unit_square_mesh(1).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_edges()), (4, 2, 5));
        assert_eq!(m.euler_characteristic(), 1);
        let m = unit_square_mesh(2).unwrap();
        assert_eq!((m.num_vertices(), m.num_cells(), m.num_edges()), (9, 8, 16));
        assert!(unit_square_mesh(0).is_err());
    }

    #[test]
    fn area_and_h() {
        let m = unit_square_mesh(4).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert!((mesh_stats(&m).h_max - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((mesh_stats(&unit_square_mesh(1).unwrap()).h_max - 2f64.sqrt()).abs() < 1e-15);
        m.validate().unwrap();
    }

    #[test]
    fn refinement_inherits_tags_and_halves_h() {
        let m = unit_square_mesh(1).unwrap();
        let r = refine_uniform(&m).unwrap();
        assert_eq!(r.num_cells(), 8);
        r.validate().unwrap();
        let (s0, s1) = (mesh_stats(&m), mesh_stats(&r));
        assert_eq!(s1.h_max, 0.5 * s0.h_max);
        assert!((s1.shape_regularity - s0.shape_regularity).abs() < 1e-12);
        for (&e, tag) in r.boundary_tags() {
            let [a, b] = r.edges()[e];
            let (pa, pb) = (r.vertices()[a], r.vertices()[b]);
            if tag == "left" {
                assert_eq!((pa[0], pb[0]), (0.0, 0.0));
            }
        }
        assert_eq!(r.boundary_tags().values().filter(|t| *t == "left").count(), 2);
    }

    #[test]
    fn interior_edges_have_opposite_signs() {
        let m = unit_square_mesh(3).unwrap();
        for e in 0..m.num_edges() {
            if let [c0, c1] = m.edge_cells(e) {
                let s0 = m.cell_edge_signs(*c0)[m.local_edge_index(*c0, e).unwrap()];
                let s1 = m.cell_edge_signs(*c1)[m.local_edge_index(*c1, e).unwrap()];
                assert_eq!(s0, -s1);
            }
        }
    }

    #[test]
    fn outward_normals_on_square() {
        let m = unit_square_mesh(2).unwrap();
        for (&e, tag) in m.boundary_tags() {
            let n = m.outward_normal(e);
            let expect = match tag.as_str() {
                "left" => [-1.0, 0.0],
                "right" => [1.0, 0.0],
                "bottom" => [0.0, -1.0],
                _ => [0.0, 1.0],
            };
            assert!((n[0] - expect[0]).abs() < 1e-15 && (n[1] - expect[1]).abs() < 1e-15, "{tag}");
        }
    }

    #[test]
    fn text_format_roundtrip() {
        let m = unit_square_mesh(2).unwrap();
        let back = parse_mesh(&write_mesh(&m)).unwrap();
        assert_eq!(back.num_edges(), m.num_edges());
        assert_eq!(back.tag_set(), m.tag_set());
        assert_eq!(back.vertices(), m.vertices());
    }

    #[test]
    fn parse_with_comments_and_default_tag() {
        let text = "# a single triangle\ndim=2 nv=3 nc=1\n0 0\n1 0 # right corner\n0 1\n0 2 1\n";
        let m = parse_mesh(text).unwrap();
        assert_eq!(m.num_cells(), 1);
        assert!(m.cell_area(0) > 0.0, "clockwise input is reoriented");
        assert_eq!(m.tag_set().into_iter().collect::<Vec<_>>(), vec!["boundary".to_string()]);
        assert!(matches!(parse_mesh("dim=3 nv=0 nc=0"), Err(Error::MeshParse { .. })));
    }

    #[test]
    fn boundary_config_partition() {
        let m = unit_square_mesh(2).unwrap();
        let bc = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Pressure);
        bc.validate(&m).unwrap();
        let no_pressure = BoundaryConfig::uniform(&SQUARE_TAGS, MechanicsBc::Displacement, FlowBc::Flux);
        assert!(no_pressure.validate(&m).is_err());
        let mut missing = bc.clone();
        missing.mechanics.remove("top");
        assert!(missing.validate(&m).is_err());
        let extra = bc.set("nowhere", MechanicsBc::Rotation, FlowBc::Flux);
        assert!(extra.validate(&m).is_err());
    }
}
