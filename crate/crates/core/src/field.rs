//! Level-set unknowns: nodal values, cached sub-cell means, the frozen
//! smoothed sign and narrow-band bookkeeping.

use crate::discretization::Discretization;
use crate::error::{Error, Result};
use crate::mesh::Point;

/// Smoothed sign `phi / sqrt(phi^2 + eps * l_ref)`.
#[inline]
pub fn smoothed_sign(phi: f64, eps: f64, l_ref: f64) -> f64 {
    phi / (phi * phi + eps * l_ref).sqrt()
}

#[derive(Debug, Clone)]
pub struct LevelSetField {
    npe: usize,
    values: Vec<f64>,
    means: Vec<f64>,
    means_valid: Vec<bool>,
    sign_nodes: Option<Vec<f64>>,
    sign_subcells: Option<Vec<f64>>,
    active: Vec<bool>,
    cutoff: Option<f64>,
}

impl LevelSetField {
    /// Collocates `f` at the mapped volume quadrature nodes.
    pub fn init_analytic(disc: &Discretization, f: impl Fn(Point) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(disc.num_elements() * disc.npe);
        for (e, m) in disc.metrics.iter().enumerate() {
            for node in &m.nodes {
                let v = f(node.position);
                if !v.is_finite() {
                    return Err(Error::NonFiniteInitialValue { element: e });
                }
                values.push(v);
            }
        }
        Self::from_values(disc, values)
    }

    pub fn from_values(disc: &Discretization, values: Vec<f64>) -> Result<Self> {
        let n = disc.num_elements();
        if values.len() != n * disc.npe {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                n * disc.npe,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInitialValue { element: i / disc.npe });
        }
        Ok(Self {
            npe: disc.npe,
            means: vec![0.0; values.len()],
            values,
            means_valid: vec![false; n],
            sign_nodes: None,
            sign_subcells: None,
            active: vec![true; n],
            cutoff: None,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.active.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.npe
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn element(&self, e: usize) -> &[f64] {
        &self.values[e * self.npe..(e + 1) * self.npe]
    }

    /// Mutable access to all nodal values; invalidates every cached mean.
    pub fn values_mut(&mut self) -> &mut [f64] {
        self.means_valid.iter_mut().for_each(|v| *v = false);
        &mut self.values
    }

    pub fn element_mut(&mut self, e: usize) -> &mut [f64] {
        self.means_valid[e] = false;
        &mut self.values[e * self.npe..(e + 1) * self.npe]
    }

    pub fn means_valid(&self, e: usize) -> bool {
        self.means_valid[e]
    }

    /// Sub-cell means, recomputing stale elements.
    pub fn means(&mut self, disc: &Discretization) -> &[f64] {
        let npe = self.npe;
        for e in 0..self.active.len() {
            if !self.means_valid[e] {
                let r = e * npe..(e + 1) * npe;
                disc.reference
                    .project_tensor(disc.dim, &self.values[r.clone()], &mut self.means[r]);
                self.means_valid[e] = true;
            }
        }
        &self.means
    }

    pub fn cutoff(&self) -> Option<f64> {
        self.cutoff
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn num_active(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Clips nodal values to `+-cutoff` and recomputes the narrow band.
    ///
    /// An element is in the band when one of its values lies strictly inside
    /// `(-cutoff, cutoff)` or a sign change occurs within it or across one of
    /// its faces; face neighbors of band elements are active as well so the
    /// band can follow the evolving field.
    pub fn apply_cutoff(&mut self, disc: &Discretization, cutoff: f64) -> Result<()> {
        if !(cutoff > 0.0) {
            return Err(Error::InvalidArgument(format!("cut-off must be positive, got {cutoff}")));
        }
        self.cutoff = Some(cutoff);
        self.clip();
        self.update_active(disc);
        Ok(())
    }

    /// Re-applies the stored cut-off, if any.
    pub fn reapply_cutoff(&mut self, disc: &Discretization) {
        if self.cutoff.is_some() {
            self.clip();
            self.update_active(disc);
        }
    }

    fn clip(&mut self) {
        let Some(c) = self.cutoff else { return };
        for e in 0..self.active.len() {
            let mut changed = false;
            for v in &mut self.values[e * self.npe..(e + 1) * self.npe] {
                if v.abs() > c {
                    *v = c.copysign(*v);
                    changed = true;
                }
            }
            if changed {
                self.means_valid[e] = false;
            }
        }
    }

    fn update_active(&mut self, disc: &Discretization) {
        let Some(c) = self.cutoff else {
            self.active.iter_mut().for_each(|a| *a = true);
            return;
        };
        let n = self.active.len();
        let mut inside = vec![false; n];
        let mut neg = vec![false; n];
        let mut pos = vec![false; n];
        for (e, u) in self.values.chunks(self.npe).enumerate() {
            inside[e] = u.iter().any(|v| v.abs() < c);
            neg[e] = u.iter().any(|v| *v < 0.0);
            pos[e] = u.iter().any(|v| *v > 0.0);
        }
        let core: Vec<bool> = (0..n)
            .map(|e| {
                inside[e]
                    || (neg[e] && pos[e])
                    || disc.face_neighbors(e).any(|k| (neg[e] && pos[k]) || (pos[e] && neg[k]))
            })
            .collect();
        for e in 0..n {
            self.active[e] = core[e] || disc.face_neighbors(e).any(|n| core[n]);
        }
    }

    /// Freezes the smoothed sign at nodes and sub-cells from the current state.
    pub fn freeze_sign(&mut self, disc: &Discretization, eps: f64, l_ref: f64) -> Result<()> {
        if !(eps > 0.0) || !(l_ref > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothing needs eps > 0 and l_ref > 0, got {eps} and {l_ref}"
            )));
        }
        if self.sign_nodes.is_some() {
            return Err(Error::InvalidArgument("sign is already frozen".into()));
        }
        let s = |v: &f64| smoothed_sign(*v, eps, l_ref);
        self.sign_nodes = Some(self.values.iter().map(s).collect());
        let means = self.means(disc).to_vec();
        self.sign_subcells = Some(means.iter().map(s).collect());
        Ok(())
    }

    pub fn sign_nodes(&self) -> Option<&[f64]> {
        self.sign_nodes.as_deref()
    }

    pub fn sign_subcells(&self) -> Option<&[f64]> {
        self.sign_subcells.as_deref()
    }

    pub fn is_sign_frozen(&self) -> bool {
        self.sign_nodes.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn disc(n: usize) -> Discretization {
        Discretization::new(Mesh::cartesian(&[0.0, 0.0], &[1.0, 1.0], &[n, n]).unwrap(), 2).unwrap()
    }

    #[test]
    fn constant_initialization() {
        let d = disc(3);
        let f = LevelSetField::init_analytic(&d, |_| 1.5).unwrap();
        assert!(f.values().iter().all(|v| *v == 1.5));
    }

    #[test]
    fn non_finite_initial_value_names_element() {
        let d = disc(2);
        let err = LevelSetField::init_analytic(&d, |p| if p[0] > 0.5 && p[1] > 0.5 { f64::NAN } else { 0.0 })
            .unwrap_err();
        assert!(matches!(err, Error::NonFiniteInitialValue { element: 3 }));
    }

    #[test]
    fn cutoff_clips_and_flags() {
        let d = disc(4);
        let mut f = LevelSetField::init_analytic(&d, |_| 2.0).unwrap();
        f.apply_cutoff(&d, 0.25).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.25));
        assert_eq!(f.num_active(), 0);

        let mut g = LevelSetField::init_analytic(&d, |p| p[0] - 0.5).unwrap();
        let before = g.values().to_vec();
        g.apply_cutoff(&d, 0.25).unwrap();
        for (a, b) in before.iter().zip(g.values()) {
            if a.abs() <= 0.25 {
                assert_eq!(a, b);
            } else {
                assert_eq!(b.abs(), 0.25);
            }
        }
        assert!(g.active().iter().all(|a| *a));
        let snapshot = g.values().to_vec();
        g.apply_cutoff(&d, 0.25).unwrap();
        assert_eq!(snapshot, g.values());
    }

    #[test]
    fn inactive_elements_sit_at_the_cutoff() {
        let d = disc(8);
        let mut f = LevelSetField::init_analytic(&d, |p| 4.0 * (p[0] - 0.3)).unwrap();
        f.apply_cutoff(&d, 0.25).unwrap();
        assert!(f.num_active() > 0 && f.num_active() < 64);
        for e in 0..64 {
            if !f.active()[e] {
                assert!(f.element(e).iter().all(|v| v.abs() >= 0.25));
            }
        }
    }

    #[test]
    fn frozen_sign_values() {
        assert_eq!(smoothed_sign(0.0, 50.0, 1.0 / 16.0), 0.0);
        let s = smoothed_sign(0.1, 50.0, 1.0 / 16.0);
        assert!((s - 0.1 / (0.01f64 + 3.125).sqrt()).abs() < 1e-15);
        assert!((s - 0.05647).abs() < 1e-5);
        assert!(smoothed_sign(1e300, 1.0, 1.0).abs() <= 1.0);
    }

    #[test]
    fn sign_is_frozen_once() {
        let d = disc(2);
        let mut f = LevelSetField::init_analytic(&d, |p| p[0] - 0.4).unwrap();
        f.freeze_sign(&d, 20.0, d.l_ref).unwrap();
        let s = f.sign_nodes().unwrap().to_vec();
        for (v, sv) in f.values().iter().zip(&s) {
            assert_eq!(v.partial_cmp(&0.0), sv.partial_cmp(&0.0));
        }
        assert!(f.freeze_sign(&d, 20.0, d.l_ref).is_err());
        f.values_mut()[0] = 7.0;
        assert_eq!(f.sign_nodes().unwrap(), &s[..]);
        assert_eq!(f.sign_subcells().unwrap().len(), f.values().len());
    }

    #[test]
    fn means_cache_tracks_mutation() {
        let d = disc(2);
        let mut f = LevelSetField::init_analytic(&d, |_| 1.0).unwrap();
        assert!(f.means(&d).iter().all(|m| (m - 1.0).abs() < 1e-14));
        assert!(f.means_valid(0));
        f.element_mut(1).iter_mut().for_each(|v| *v = 3.0);
        assert!(f.means_valid(0) && !f.means_valid(1));
        let npe = d.npe;
        assert!(f.means(&d)[npe..2 * npe].iter().all(|m| (m - 3.0).abs() < 1e-14));
    }
}
