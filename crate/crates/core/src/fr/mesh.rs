use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FrError;

/// How mesh vertices are laid out on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    Uniform,
    /// Uniform vertices perturbed by up to 30% of the local spacing.
    Nonuniform,
}

impl std::str::FromStr for MeshKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "nonuniform" | "non-uniform" => Ok(Self::Nonuniform),
            other => Err(format!("unknown mesh kind `{other}`")),
        }
    }
}

/// Maximum relative vertex perturbation of a non-uniform mesh.
pub const PERTURBATION: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    vertices: Vec<f64>,
    jacobians: Vec<f64>,
}

impl Mesh1D {
    pub fn from_vertices(vertices: Vec<f64>) -> Result<Self, FrError> {
        if vertices.len() < 2 {
            return Err(FrError::InvalidMesh("need at least one element".into()));
        }
        if vertices[0] != 0.0 || *vertices.last().unwrap() != 1.0 {
            return Err(FrError::InvalidMesh("vertices must span [0, 1]".into()));
        }
        let jacobians: Vec<f64> = vertices.windows(2).map(|w| 0.5 * (w[1] - w[0])).collect();
        if jacobians.iter().any(|&j| !(j > 0.0)) {
            return Err(FrError::InvalidMesh("vertices must be strictly increasing".into()));
        }
        Ok(Self { vertices, jacobians })
    }

    pub fn uniform(n_elements: usize) -> Self {
        let vertices = (0..=n_elements)
            .map(|i| if i == n_elements { 1.0 } else { i as f64 / n_elements as f64 })
            .collect();
        Self::from_vertices(vertices).expect("uniform mesh is valid")
    }

    pub fn perturbed(n_elements: usize, seed: u64) -> Self {
        let h = 1.0 / n_elements as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices: Vec<f64> = (0..=n_elements).map(|i| i as f64 * h).collect();
        for v in vertices.iter_mut().take(n_elements).skip(1) {
            *v += rng.random_range(-PERTURBATION..PERTURBATION) * h;
        }
        vertices[n_elements] = 1.0;
        Self::from_vertices(vertices).expect("perturbation below half spacing keeps order")
    }

    pub fn build(kind: MeshKind, n_elements: usize, seed: u64) -> Self {
        match kind {
            MeshKind::Uniform => Self::uniform(n_elements),
            MeshKind::Nonuniform => Self::perturbed(n_elements, seed),
        }
    }

    /// Mesh obtained by merging consecutive element pairs.
    pub fn coarsened(&self) -> Result<Self, FrError> {
        if self.n_elements() % 2 != 0 {
            return Err(FrError::InvalidMesh(format!(
                "cannot merge pairs of {} elements",
                self.n_elements()
            )));
        }
        Self::from_vertices(self.vertices.iter().step_by(2).copied().collect())
    }

    #[inline]
    pub fn n_elements(&self) -> usize {
        self.jacobians.len()
    }

    pub fn vertices(&self) -> &[f64] {
        &self.vertices
    }

    pub fn jacobians(&self) -> &[f64] {
        &self.jacobians
    }

    #[inline]
    pub fn width(&self, j: usize) -> f64 {
        2.0 * self.jacobians[j]
    }

    pub fn min_width(&self) -> f64 {
        self.jacobians.iter().fold(f64::INFINITY, |m, &j| m.min(2.0 * j))
    }

    /// Physical coordinate of reference point `r` in element `j`.
    pub fn map_ref_to_phys(&self, j: usize, r: f64) -> Result<f64, FrError> {
        if j >= self.n_elements() {
            return Err(FrError::ElementOutOfRange { index: j, n_elements: self.n_elements() });
        }
        Ok(0.5 * (1.0 - r) * self.vertices[j] + 0.5 * (1.0 + r) * self.vertices[j + 1])
    }

    /// Physical coordinates of every node, element-major.
    pub fn node_coordinates(&self, nodes: &[f64]) -> Vec<f64> {
        (0..self.n_elements())
            .flat_map(|j| nodes.iter().map(move |&r| self.map_ref_to_phys(j, r).unwrap()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_map_endpoints_and_midpoint() {
        let m = Mesh1D::perturbed(8, 3);
        for j in 0..8 {
            let (a, b) = (m.vertices()[j], m.vertices()[j + 1]);
            assert_eq!(m.map_ref_to_phys(j, -1.0).unwrap(), a);
            assert!((m.map_ref_to_phys(j, 1.0).unwrap() - b).abs() < 1e-15);
            assert!((m.map_ref_to_phys(j, 0.0).unwrap() - 0.5 * (a + b)).abs() < 1e-15);
        }
        assert!(matches!(
            m.map_ref_to_phys(8, 0.0),
            Err(FrError::ElementOutOfRange { index: 8, .. })
        ));
    }

    #[test]
    fn perturbed_mesh_is_valid_and_seeded() {
        for seed in 0..50 {
            let m = Mesh1D::perturbed(32, seed);
            assert_eq!(m.vertices()[0], 0.0);
            assert_eq!(m.vertices()[32], 1.0);
            assert!(m.jacobians().iter().all(|&j| j > 0.0));
            assert!(m.min_width() >= 0.4 / 32.0 - 1e-15);
        }
        assert_eq!(Mesh1D::perturbed(16, 7), Mesh1D::perturbed(16, 7));
        assert_ne!(Mesh1D::perturbed(16, 7), Mesh1D::perturbed(16, 8));
    }

    #[test]
    fn rejects_bad_vertices() {
        assert!(Mesh1D::from_vertices(vec![0.0, 0.6, 0.5, 1.0]).is_err());
        assert!(Mesh1D::from_vertices(vec![0.1, 1.0]).is_err());
        assert!(Mesh1D::uniform(3).coarsened().is_err());
    }

    #[test]
    fn coarsening_keeps_even_vertices() {
        let m = Mesh1D::perturbed(16, 1);
        let c = m.coarsened().unwrap();
        assert_eq!(c.n_elements(), 8);
        for (i, v) in c.vertices().iter().enumerate() {
            assert_eq!(*v, m.vertices()[2 * i]);
        }
    }
}
