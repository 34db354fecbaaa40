//! CSV export of meshes and fields.
//!
//! Field files have the header `x,y,z,value` and one row per DOF in DOF
//! order. Node files have `id,x,y,z`; element files `id,n0,...,n7` with the
//! local node order `ia + 2 ja + 4 ka`.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::field::{Field, Support};
use super::mesh::Mesh;
use crate::error::{Error, Result};

fn dof_coords(mesh: &Mesh, support: Support, i: usize) -> [f64; 3] {
    match support {
        Support::Volume => mesh.coords[i],
        Support::Bottom => mesh.bottom_coords(i),
    }
}

pub fn write_field_csv(path: &Path, mesh: &Mesh, field: &Field) -> Result<()> {
    field.check(mesh, field.support())?;
    let mut out = String::from("x,y,z,value\n");
    for (i, v) in field.values().iter().enumerate() {
        let c = dof_coords(mesh, field.support(), i);
        out.push_str(&format!("{},{},{},{:.16e}\n", c[0], c[1], c[2], v));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_field_csv(path: &Path, mesh: &Mesh, support: Support) -> Result<Field> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (ln, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let v = line
            .rsplit(',')
            .next()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse(format!("{}:{}: bad field row", path.display(), ln + 1)))?;
        values.push(v);
    }
    Field::new(mesh, support, values)
}

pub fn write_mesh_csv(dir: &Path, mesh: &Mesh) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut nodes = fs::File::create(dir.join("nodes.csv"))?;
    writeln!(nodes, "id,x,y,z")?;
    for (i, c) in mesh.coords.iter().enumerate() {
        writeln!(nodes, "{i},{},{},{}", c[0], c[1], c[2])?;
    }
    let mut elems = fs::File::create(dir.join("elements.csv"))?;
    writeln!(elems, "id,n0,n1,n2,n3,n4,n5,n6,n7")?;
    for (i, e) in mesh.elements.iter().enumerate() {
        let ids: Vec<String> = e.iter().map(|n| n.to_string()).collect();
        writeln!(elems, "{i},{}", ids.join(","))?;
    }
    Ok(())
}
