//! Gradient lifting on the nodal DG representation.
//!
//! The gradient of each physical component is obtained from the weak form
//! `J p = sum_m D^weak_m (J a^m_i phi) + surface`, where the surface term uses
//! a component-wise biased trace for the upwind/downwind pair and the trace
//! average for the central (BR1) variant.

use rayon::prelude::*;

use crate::basis::apply_along;
use crate::discretization::Discretization;

/// Upwind (`p`) and downwind (`q`) gradients per node or per sub-cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub p: Vec<[f64; 3]>,
    pub q: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flux {
    Biased,
    Central,
}

/// Exterior trace at face point `q` of element `e`; the interior one on boundaries.
#[inline]
fn exterior(disc: &Discretization, traces: &[f64], e: usize, face: usize, q: usize) -> f64 {
    match disc.neighbor(e, face, q) {
        Some(l) => traces[disc.trace_index(l.element, l.face, l.point)],
        None => traces[disc.trace_index(e, face, q)],
    }
}

fn lift_element(
    disc: &Discretization,
    e: usize,
    u: &[f64],
    traces: &[f64],
    flux: Flux,
    out_a: &mut [[f64; 3]],
    mut out_b: Option<&mut [[f64; 3]]>,
) {
    let dim = disc.dim;
    let n1 = disc.n1;
    let npe = disc.npe;
    let metrics = &disc.metrics[e];
    let reference = &disc.reference;

    let mut theta = vec![0.0; npe];
    let mut tmp = vec![0.0; npe];
    for v in out_a.iter_mut() {
        *v = [0.0; 3];
    }
    for i in 0..dim {
        for m in 0..dim {
            for (t, (node, v)) in theta.iter_mut().zip(metrics.nodes.iter().zip(u)) {
                *t = node.ja[m][i] * v;
            }
            apply_along(&reference.weak_derivative, n1, dim, m, &theta, &mut tmp);
            for (o, t) in out_a.iter_mut().zip(&tmp) {
                o[i] += t;
            }
        }
    }
    if let Some(b) = out_b.as_deref_mut() {
        b.copy_from_slice(out_a);
    }

    for face in 0..2 * dim {
        let side = face % 2;
        let fm = &metrics.faces[face];
        for q in 0..disc.nfp {
            let int = traces[disc.trace_index(e, face, q)];
            let ext = exterior(disc, traces, e, face, q);
            let sn = fm.scaled_normal[q];
            let n = fm.normal[q];
            let mut fa = [0.0; 3];
            let mut fb = [0.0; 3];
            for i in 0..dim {
                match flux {
                    Flux::Central => fa[i] = 0.5 * (int + ext) * sn[i],
                    Flux::Biased => {
                        let (up, down) = if n[i] >= 0.0 { (ext, int) } else { (int, ext) };
                        fa[i] = up * sn[i];
                        fb[i] = down * sn[i];
                    }
                }
            }
            for a in 0..n1 {
                let node = disc.face_line_node(face, q, a);
                let c = reference.face_interp[side][a] / reference.weights[a];
                for i in 0..dim {
                    out_a[node][i] += c * fa[i];
                }
                if let Some(b) = out_b.as_deref_mut() {
                    for i in 0..dim {
                        b[node][i] += c * fb[i];
                    }
                }
            }
        }
    }

    for (idx, node) in metrics.nodes.iter().enumerate() {
        let inv = 1.0 / node.jac;
        for i in 0..dim {
            out_a[idx][i] *= inv;
        }
        if let Some(b) = out_b.as_deref_mut() {
            for i in 0..dim {
                b[idx][i] *= inv;
            }
        }
    }
}

#[inline]
fn is_active(active: Option<&[bool]>, e: usize) -> bool {
    active.is_none_or(|a| a[e])
}

/// Upwind/downwind gradients from the biased-flux lifting. Elements not
/// marked in `active` (when given) receive zero gradients.
pub fn ldg_gradients(disc: &Discretization, values: &[f64], active: Option<&[bool]>) -> GradientPair {
    let npe = disc.npe;
    let traces = disc.all_traces(values);
    let total = disc.num_elements() * npe;
    let mut p = vec![[0.0; 3]; total];
    let mut q = vec![[0.0; 3]; total];
    p.par_chunks_mut(npe)
        .zip(q.par_chunks_mut(npe))
        .enumerate()
        .for_each(|(e, (pe, qe))| {
            if is_active(active, e) {
                let u = &values[e * npe..(e + 1) * npe];
                lift_element(disc, e, u, &traces, Flux::Biased, pe, Some(qe));
            }
        });
    GradientPair { p, q }
}

/// Gradient from the central-flux (BR1) lifting.
pub fn br1_gradient(disc: &Discretization, values: &[f64], active: Option<&[bool]>) -> Vec<[f64; 3]> {
    let npe = disc.npe;
    let traces = disc.all_traces(values);
    let mut g = vec![[0.0; 3]; disc.num_elements() * npe];
    g.par_chunks_mut(npe).enumerate().for_each(|(e, ge)| {
        if is_active(active, e) {
            let u = &values[e * npe..(e + 1) * npe];
            lift_element(disc, e, u, &traces, Flux::Central, ge, None);
        }
    });
    g
}

/// Element-local derivative of the nodal polynomial via the chain rule.
pub fn direct_gradient(disc: &Discretization, values: &[f64]) -> Vec<[f64; 3]> {
    let npe = disc.npe;
    let dim = disc.dim;
    let n1 = disc.n1;
    let mut g = vec![[0.0; 3]; disc.num_elements() * npe];
    g.par_chunks_mut(npe).enumerate().for_each(|(e, ge)| {
        let u = &values[e * npe..(e + 1) * npe];
        let mut d = vec![0.0; npe];
        for m in 0..dim {
            apply_along(&disc.reference.derivative, n1, dim, m, u, &mut d);
            for (idx, node) in disc.metrics[e].nodes.iter().enumerate() {
                for i in 0..dim {
                    ge[idx][i] += node.contravariant[m][i] * d[idx];
                }
            }
        }
    });
    g
}
