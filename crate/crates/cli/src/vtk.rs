//! Legacy ASCII VTK output. Each element is written as its sub-cell lattice:
//! `(N+1)^d` quads or hexahedra whose corners sit on the sub-cell boundaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lsreinit::{Discretization, Error, Result};

const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

/// Nodal fields written as point data, plus the per-element blend factor.
pub struct Snapshot<'a> {
    pub point_data: Vec<(&'a str, &'a [f64])>,
    pub fv_ratio: &'a [f64],
}

/// Point values of one element on its lattice. Polynomial elements are
/// interpolated; elements with a sub-cell share average the adjacent
/// sub-cell means instead.
fn lattice_values(disc: &Discretization, nodal: &[f64], fv: bool, lagrange: &[Vec<f64>]) -> Vec<f64> {
    let (dim, n1) = (disc.dim, disc.n1);
    let m1 = n1 + 1;
    let count = m1.pow(dim as u32);
    let means = if fv {
        let mut m = vec![0.0; nodal.len()];
        disc.reference.project_tensor(dim, nodal, &mut m);
        Some(m)
    } else {
        None
    };
    (0..count)
        .map(|p| {
            let idx: Vec<usize> = (0..dim).map(|m| (p / m1.pow(m as u32)) % m1).collect();
            match &means {
                Some(means) => {
                    let adjacent: Vec<Vec<usize>> = idx
                        .iter()
                        .map(|&a| (a.saturating_sub(1)..=a.min(n1 - 1)).collect())
                        .collect();
                    let mut sum = 0.0;
                    let mut k = 0usize;
                    let total: usize = adjacent.iter().map(|v| v.len()).product();
                    for t in 0..total {
                        let mut rem = t;
                        let mut flat = 0;
                        for (m, adj) in adjacent.iter().enumerate() {
                            flat += adj[rem % adj.len()] * n1.pow(m as u32);
                            rem /= adj.len();
                        }
                        sum += means[flat];
                        k += 1;
                    }
                    sum / k as f64
                }
                None => {
                    let mut sum = 0.0;
                    for (j, v) in nodal.iter().enumerate() {
                        let mut w = 1.0;
                        let mut rem = j;
                        for &a in &idx {
                            w *= lagrange[a][rem % n1];
                            rem /= n1;
                        }
                        sum += w * v;
                    }
                    sum
                }
            }
        })
        .collect()
}

pub fn write_vtk(disc: &Discretization, snap: &Snapshot, mut out: impl Write) -> Result<()> {
    let n_elem = disc.num_elements();
    let npe = disc.npe;
    for (name, data) in &snap.point_data {
        if data.len() != n_elem * npe {
            return Err(Error::InvalidArgument(format!(
                "point field '{name}' has {} values, expected {}",
                data.len(),
                n_elem * npe
            )));
        }
    }
    if snap.fv_ratio.len() != n_elem {
        return Err(Error::InvalidArgument(format!(
            "fv_ratio has {} values, expected {n_elem}",
            snap.fv_ratio.len()
        )));
    }
    write_body(disc, snap, &mut out).map_err(|source| Error::Io {
        path: "<vtk stream>".into(),
        source,
    })
}

fn write_body(disc: &Discretization, snap: &Snapshot, out: &mut impl Write) -> std::io::Result<()> {
    let (dim, n1, npe) = (disc.dim, disc.n1, disc.npe);
    let m1 = n1 + 1;
    let ppe = m1.pow(dim as u32);
    let n_elem = disc.num_elements();
    let bounds = &disc.reference.subcell_bounds;
    let lagrange: Vec<Vec<f64>> = bounds.iter().map(|&x| disc.reference.lagrange_at(x)).collect();

    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "level-set field")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", n_elem * ppe)?;
    for e in 0..n_elem {
        for p in 0..ppe {
            let mut xi = [0.0; 3];
            for (m, x) in xi.iter_mut().enumerate().take(dim) {
                *x = bounds[(p / m1.pow(m as u32)) % m1];
            }
            let x = disc.mesh.map_point(e, xi);
            writeln!(out, "{} {} {}", x[0], x[1], x[2])?;
        }
    }

    let corners: &[[usize; 3]] = if dim == 2 {
        &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]
    } else {
        &[
            [0, 0, 0],
            [1, 0, 0],
            [1, 1, 0],
            [0, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [1, 1, 1],
            [0, 1, 1],
        ]
    };
    let n_cells = n_elem * npe;
    writeln!(out, "CELLS {} {}", n_cells, n_cells * (corners.len() + 1))?;
    for e in 0..n_elem {
        for c in 0..npe {
            let idx = disc.unravel(c);
            write!(out, "{}", corners.len())?;
            for off in corners {
                let mut p = 0;
                for m in 0..dim {
                    p += (idx[m] + off[m]) * m1.pow(m as u32);
                }
                write!(out, " {}", e * ppe + p)?;
            }
            writeln!(out)?;
        }
    }
    writeln!(out, "CELL_TYPES {n_cells}")?;
    let ty = if dim == 2 { VTK_QUAD } else { VTK_HEXAHEDRON };
    for _ in 0..n_cells {
        writeln!(out, "{ty}")?;
    }

    writeln!(out, "POINT_DATA {}", n_elem * ppe)?;
    for (name, data) in &snap.point_data {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for e in 0..n_elem {
            let fv = snap.fv_ratio[e] > 0.0;
            for v in lattice_values(disc, &data[e * npe..(e + 1) * npe], fv, &lagrange) {
                writeln!(out, "{v}")?;
            }
        }
    }
    writeln!(out, "CELL_DATA {n_cells}")?;
    writeln!(out, "SCALARS fv_ratio double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for &a in snap.fv_ratio {
        for _ in 0..npe {
            writeln!(out, "{a}")?;
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, disc: &Discretization, snap: &Snapshot) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    match write_vtk(disc, snap, &mut w) {
        Err(Error::Io { source, .. }) => return Err(io_err(source)),
        other => other?,
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use lsreinit::mesh::Mesh;

    fn render(disc: &Discretization, phi: &[f64], alpha: &[f64]) -> String {
        let mut buf = Vec::new();
        let snap = Snapshot {
            point_data: vec![("phi", phi)],
            fv_ratio: alpha,
        };
        write_vtk(disc, &snap, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn single_linear_element_lattice() {
        let d = Discretization::new(Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap(), 1).unwrap();
        let phi: Vec<f64> = d.metrics[0].nodes.iter().map(|n| n.position[0] + 2.0 * n.position[1]).collect();
        let text = render(&d, &phi, &[0.0]);
        assert!(text.contains("POINTS 9 double"));
        assert!(text.contains("CELLS 4 20"));
        assert!(text.contains("CELL_DATA 4"));
        // Interpolation is exact for the linear field at the lattice corners.
        let pts: Vec<[f64; 3]> = text
            .lines()
            .skip_while(|l| !l.starts_with("POINTS"))
            .skip(1)
            .take(9)
            .map(|l| {
                let v: Vec<f64> = l.split_whitespace().map(|x| x.parse().unwrap()).collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        let vals: Vec<f64> = text
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .take(9)
            .map(|l| l.parse().unwrap())
            .collect();
        for (p, v) in pts.iter().zip(&vals) {
            assert!((v - (p[0] + 2.0 * p[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn flagged_elements_use_subcell_means() {
        let d = Discretization::new(Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap(), 2).unwrap();
        let text = render(&d, &vec![0.7; d.npe], &[1.0]);
        let vals: Vec<f64> = text
            .lines()
            .skip_while(|l| !l.starts_with("LOOKUP_TABLE"))
            .skip(1)
            .take(16)
            .map(|l| l.parse().unwrap())
            .collect();
        assert!(vals.iter().all(|v| (v - 0.7).abs() < 1e-13));
    }

    #[test]
    fn rejects_mismatched_sizes() {
        let d = Discretization::new(Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[2, 2]).unwrap(), 1).unwrap();
        let snap = Snapshot {
            point_data: vec![("phi", &[0.0; 3])],
            fv_ratio: &[0.0; 4],
        };
        assert!(write_vtk(&d, &snap, std::io::sink()).is_err());
    }
}
