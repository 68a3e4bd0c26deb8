//! Line-oriented ASCII formats for meshes (`tetmesh 1`) and
//! multiplicity-carrying surfaces (`trisurf 1`), plus legacy ASCII VTK
//! export for visualization. Coordinates are written with Rust's
//! shortest round-trip float formatting, so write/read is bit-exact.

use crate::error::{Error, Result};
use crate::mesh::{BodyMesh, BoundaryTag};
use crate::state::DeformationState;
use crate::tensor::{cof3, t3, vec, Vec3};
use crate::varifold::DiscreteVarifold;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

fn parse_err<T: std::fmt::Display>(line: usize, msg: T) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Token stream over non-empty, non-comment lines.
struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, raw) in self.iter.by_ref() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                return Ok((i + 1, line.split_whitespace().collect()));
            }
        }
        Err(parse_err(0, "unexpected end of file"))
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let (ln, tok) = self.next()?;
        if tok.len() != 2 || tok[0] != name {
            return Err(parse_err(ln, format!("expected `{name} <count>`")));
        }
        tok[1]
            .parse()
            .map_err(|e| parse_err(ln, format!("bad count: {e}")))
    }
}

fn parse_f64(ln: usize, s: &str) -> Result<f64> {
    s.parse().map_err(|e| parse_err(ln, format!("bad float `{s}`: {e}")))
}

fn parse_usize(ln: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|e| parse_err(ln, format!("bad index `{s}`: {e}")))
}

pub fn write_mesh_string(mesh: &BodyMesh) -> String {
    let mut out = String::from("tetmesh 1\n");
    let _ = writeln!(out, "nodes {}", mesh.nodes.len());
    for n in &mesh.nodes {
        let _ = writeln!(out, "{} {} {}", n[0], n[1], n[2]);
    }
    let _ = writeln!(out, "tets {}", mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "bfaces {}", mesh.boundary_faces.len());
    for (f, tag) in &mesh.boundary_faces {
        let tag = match tag {
            BoundaryTag::Gamma0 => "g0",
            BoundaryTag::Gamma1 => "g1",
        };
        let _ = writeln!(out, "{} {} {} {}", f[0], f[1], f[2], tag);
    }
    let _ = writeln!(out, "cfaces {}", mesh.candidate_faces.len());
    for f in &mesh.candidate_faces {
        let _ = writeln!(out, "{} {} {}", f[0], f[1], f[2]);
    }
    let _ = writeln!(out, "dirichlet {}", mesh.dirichlet.len());
    for (n, y) in &mesh.dirichlet {
        let _ = writeln!(out, "{} {} {} {}", n, y[0], y[1], y[2]);
    }
    out
}

pub fn read_mesh_string(text: &str) -> Result<BodyMesh> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.next()?;
    if header != ["tetmesh", "1"] {
        return Err(parse_err(ln, "expected header `tetmesh 1`"));
    }
    let n = lines.section("nodes")?;
    let mut nodes: Vec<Vec3> = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, tok) = lines.next()?;
        if tok.len() != 3 {
            return Err(parse_err(ln, "expected `x y z`"));
        }
        nodes.push([
            parse_f64(ln, tok[0])?,
            parse_f64(ln, tok[1])?,
            parse_f64(ln, tok[2])?,
        ]);
    }
    let m = lines.section("tets")?;
    let mut tets = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, tok) = lines.next()?;
        if tok.len() != 4 {
            return Err(parse_err(ln, "expected 4 node ids"));
        }
        let mut t = [0usize; 4];
        for (k, s) in tok.iter().enumerate() {
            t[k] = parse_usize(ln, s)?;
        }
        tets.push(t);
    }
    let k = lines.section("bfaces")?;
    let mut bfaces = Vec::with_capacity(k);
    for _ in 0..k {
        let (ln, tok) = lines.next()?;
        if tok.len() != 4 {
            return Err(parse_err(ln, "expected `n1 n2 n3 tag`"));
        }
        let tag = match tok[3] {
            "g0" => BoundaryTag::Gamma0,
            "g1" => BoundaryTag::Gamma1,
            other => return Err(parse_err(ln, format!("unknown tag `{other}`"))),
        };
        bfaces.push((
            [
                parse_usize(ln, tok[0])?,
                parse_usize(ln, tok[1])?,
                parse_usize(ln, tok[2])?,
            ],
            tag,
        ));
    }
    let l = lines.section("cfaces")?;
    let mut cfaces = Vec::with_capacity(l);
    for _ in 0..l {
        let (ln, tok) = lines.next()?;
        if tok.len() != 3 {
            return Err(parse_err(ln, "expected 3 node ids"));
        }
        cfaces.push([
            parse_usize(ln, tok[0])?,
            parse_usize(ln, tok[1])?,
            parse_usize(ln, tok[2])?,
        ]);
    }
    let p = lines.section("dirichlet")?;
    let mut dirichlet = BTreeMap::new();
    for _ in 0..p {
        let (ln, tok) = lines.next()?;
        if tok.len() != 4 {
            return Err(parse_err(ln, "expected `node yx yy yz`"));
        }
        dirichlet.insert(
            parse_usize(ln, tok[0])?,
            [
                parse_f64(ln, tok[1])?,
                parse_f64(ln, tok[2])?,
                parse_f64(ln, tok[3])?,
            ],
        );
    }
    BodyMesh::new(nodes, tets, bfaces, cfaces, dirichlet)
}

pub fn write_mesh(path: &Path, mesh: &BodyMesh) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<BodyMesh> {
    read_mesh_string(&std::fs::read_to_string(path)?)
}

/// Surface with per-triangle integer multiplicity.
pub fn write_surface_string(v: &DiscreteVarifold) -> String {
    let mut out = String::from("trisurf 1\n");
    let _ = writeln!(out, "nodes {}", v.vertices.len());
    for n in &v.vertices {
        let _ = writeln!(out, "{} {} {}", n[0], n[1], n[2]);
    }
    let _ = writeln!(out, "tris {}", v.triangles.len());
    for (t, tri) in v.triangles.iter().enumerate() {
        let _ = writeln!(out, "{} {} {} {}", tri[0], tri[1], tri[2], v.theta[t]);
    }
    out
}

pub fn read_surface_string(text: &str) -> Result<DiscreteVarifold> {
    let mut lines = Lines::new(text);
    let (ln, header) = lines.next()?;
    if header != ["trisurf", "1"] {
        return Err(parse_err(ln, "expected header `trisurf 1`"));
    }
    let n = lines.section("nodes")?;
    let mut vertices: Vec<Vec3> = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, tok) = lines.next()?;
        if tok.len() != 3 {
            return Err(parse_err(ln, "expected `x y z`"));
        }
        vertices.push([
            parse_f64(ln, tok[0])?,
            parse_f64(ln, tok[1])?,
            parse_f64(ln, tok[2])?,
        ]);
    }
    let m = lines.section("tris")?;
    let mut triangles = Vec::with_capacity(m);
    let mut theta = Vec::with_capacity(m);
    for _ in 0..m {
        let (ln, tok) = lines.next()?;
        if tok.len() != 4 {
            return Err(parse_err(ln, "expected `n1 n2 n3 theta`"));
        }
        triangles.push([
            parse_usize(ln, tok[0])?,
            parse_usize(ln, tok[1])?,
            parse_usize(ln, tok[2])?,
        ]);
        theta.push(
            tok[3]
                .parse::<u32>()
                .map_err(|e| parse_err(ln, format!("bad multiplicity: {e}")))?,
        );
    }
    DiscreteVarifold::from_triangles(vertices, triangles, theta)
}

pub fn write_surface(path: &Path, v: &DiscreteVarifold) -> Result<()> {
    std::fs::write(path, write_surface_string(v))?;
    Ok(())
}

pub fn read_surface(path: &Path) -> Result<DiscreteVarifold> {
    read_surface_string(&std::fs::read_to_string(path)?)
}

/// Deformed mesh as a legacy ASCII VTK unstructured grid with cell
/// fields det(grad y), |cof grad y|, and |grad det(grad y)|.
pub fn deformed_mesh_vtk(state: &DeformationState) -> String {
    let fields = state.fields();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    out.push_str("deformed body\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let y = &state.y;
    let _ = writeln!(out, "POINTS {} double", y.len());
    for p in y {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    let tets = &state.topo.tets;
    let _ = writeln!(out, "CELLS {} {}", tets.len(), 5 * tets.len());
    for t in tets {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", tets.len());
    for _ in tets {
        out.push_str("10\n");
    }
    let _ = writeln!(out, "CELL_DATA {}", tets.len());
    out.push_str("SCALARS det_grad_y double 1\nLOOKUP_TABLE default\n");
    for d in &fields.dets {
        let _ = writeln!(out, "{d}");
    }
    out.push_str("SCALARS cof_grad_y_norm double 1\nLOOKUP_TABLE default\n");
    for g in &fields.grads {
        let c = cof3(g);
        let _ = writeln!(out, "{}", c.dot(&c).sqrt());
    }
    out.push_str("SCALARS grad_det_norm double 1\nLOOKUP_TABLE default\n");
    for d2 in &fields.d2 {
        let _ = writeln!(out, "{}", vec::norm(d2));
    }
    out
}

/// Crack surface as a legacy ASCII VTK polydata-style grid with the
/// curvature magnitude as a vertex field.
pub fn crack_surface_vtk(v: &DiscreteVarifold) -> Result<String> {
    let curvature = v.curvature()?;
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    out.push_str("crack surface\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", v.vertices.len());
    for p in &v.vertices {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "CELLS {} {}", v.triangles.len(), 4 * v.triangles.len());
    for t in &v.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", v.triangles.len());
    for _ in &v.triangles {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}", v.vertices.len());
    out.push_str("SCALARS curvature_norm double 1\nLOOKUP_TABLE default\n");
    for a in &curvature {
        let _ = writeln!(out, "{}", t3::frobenius(a));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meshgen;
    use crate::state::cut_mesh;

    #[test]
    fn mesh_round_trip_is_bit_exact() {
        let mesh = meshgen::structured_bar(2, 2, 2, 1.0 / 3.0, 1.37, true).unwrap();
        let text = write_mesh_string(&mesh);
        let back = read_mesh_string(&text).unwrap();
        assert_eq!(mesh.nodes.len(), back.nodes.len());
        for (a, b) in mesh.nodes.iter().zip(&back.nodes) {
            for k in 0..3 {
                assert_eq!(a[k].to_bits(), b[k].to_bits(), "coordinate changed");
            }
        }
        assert_eq!(mesh.tets, back.tets);
        assert_eq!(mesh.boundary_faces, back.boundary_faces);
        assert_eq!(mesh.candidate_faces, back.candidate_faces);
        for ((na, ya), (nb, yb)) in mesh.dirichlet.iter().zip(&back.dirichlet) {
            assert_eq!(na, nb);
            for k in 0..3 {
                assert_eq!(ya[k].to_bits(), yb[k].to_bits());
            }
        }
        // second generation is identical text
        assert_eq!(text, write_mesh_string(&back));
    }

    #[test]
    fn surface_round_trip_preserves_multiplicity() {
        let surf = meshgen::icosphere(1.0, 2);
        let mut v = DiscreteVarifold::from_surface(&surf, 1).unwrap();
        v.theta[3] = 4; // non-uniform multiplicity must survive
        let v = DiscreteVarifold::from_triangles(v.vertices, v.triangles, v.theta).unwrap();
        let text = write_surface_string(&v);
        let back = read_surface_string(&text).unwrap();
        assert_eq!(v.triangles, back.triangles);
        assert_eq!(v.theta, back.theta);
        assert_eq!(text, write_surface_string(&back));
    }

    #[test]
    fn malformed_inputs_report_line_numbers() {
        let err = read_mesh_string("tetmesh 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = read_mesh_string("tetmesh 1\nnodes 1\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err =
            read_mesh_string("tetmesh 1\nnodes 0\ntets 0\nbfaces 1\n0 1 2 g7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 5, .. }), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mesh = meshgen::unit_cube().unwrap();
        let text = write_mesh_string(&mesh);
        let noisy: String = text
            .lines()
            .flat_map(|l| [format!("{l} # trailing"), String::new()])
            .collect::<Vec<_>>()
            .join("\n");
        let back = read_mesh_string(&noisy).unwrap();
        assert_eq!(mesh.tets, back.tets);
    }

    #[test]
    fn vtk_export_contains_required_fields() {
        let mesh = meshgen::unit_cube().unwrap();
        let state = cut_mesh(&mesh, &[]).unwrap();
        let vtk = deformed_mesh_vtk(&state);
        for needle in [
            "DATASET UNSTRUCTURED_GRID",
            "SCALARS det_grad_y double 1",
            "SCALARS cof_grad_y_norm double 1",
            "SCALARS grad_det_norm double 1",
        ] {
            assert!(vtk.contains(needle), "missing `{needle}`");
        }
        // identity deformation: every det field entry is 1
        let dets: Vec<&str> = vtk
            .lines()
            .skip_while(|l| !l.starts_with("SCALARS det_grad_y"))
            .skip(2)
            .take(state.topo.tets.len())
            .collect();
        assert!(dets.iter().all(|d| *d == "1"), "{dets:?}");

        let v = DiscreteVarifold::from_surface(&meshgen::disc(1.0, 4, 16), 1).unwrap();
        let svtk = crack_surface_vtk(&v).unwrap();
        assert!(svtk.contains("SCALARS curvature_norm double 1"));
    }
}
