use serde::{Deserialize, Serialize};

use super::transfer::{HTransfer, PTransfer, Transfer};
use super::MgError;
use crate::fr::{Basis, BoundaryCondition, Discretization, EquationSpec, Mesh1D, DEFAULT_CFL};

/// Number of element-merging levels appended below order zero.
pub const H_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultigridMode {
    /// Polynomial coarsening only, down to order zero.
    P,
    /// Polynomial coarsening followed by three element-merging levels.
    Hp,
}

impl std::str::FromStr for MultigridMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p" | "p-only" => Ok(Self::P),
            "hp" | "h/p" => Ok(Self::Hp),
            other => Err(format!("unknown multigrid mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelKind {
    P,
    H,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub kind: LevelKind,
    pub disc: Discretization,
    pub cfl: f64,
}

impl Level {
    pub fn order(&self) -> usize {
        self.disc.basis.order
    }

    pub fn n_elements(&self) -> usize {
        self.disc.n_elements()
    }
}

/// Levels ordered finest to coarsest; `transfers[i]` connects level `i` to
/// level `i + 1`.
#[derive(Debug, Clone)]
pub struct MultigridHierarchy {
    pub levels: Vec<Level>,
    pub transfers: Vec<Transfer>,
    pub mode: MultigridMode,
}

impl MultigridHierarchy {
    pub fn build(
        order: usize,
        mesh: Mesh1D,
        eq: EquationSpec,
        bc: BoundaryCondition,
        mode: MultigridMode,
    ) -> Result<Self, MgError> {
        Self::build_with_cfl(order, mesh, eq, bc, mode, DEFAULT_CFL)
    }

    pub fn build_with_cfl(
        order: usize,
        mesh: Mesh1D,
        eq: EquationSpec,
        bc: BoundaryCondition,
        mode: MultigridMode,
        cfl: f64,
    ) -> Result<Self, MgError> {
        if order < 1 {
            return Err(MgError::InvalidOrder(order));
        }
        let n = mesh.n_elements();
        if mode == MultigridMode::Hp && n % (1 << H_LEVELS) != 0 {
            return Err(MgError::InvalidMesh(format!(
                "{n} elements cannot be halved {H_LEVELS} times"
            )));
        }

        let mut levels = Vec::new();
        let mut transfers = Vec::new();
        for p in (0..=order).rev() {
            levels.push(Level {
                kind: LevelKind::P,
                disc: Discretization::new(mesh.clone(), Basis::new(p), eq, bc),
                cfl,
            });
            if p > 0 {
                transfers.push(Transfer::P(PTransfer::new(p)));
            }
        }
        if mode == MultigridMode::Hp {
            let mut fine = mesh;
            for _ in 0..H_LEVELS {
                transfers.push(Transfer::H(HTransfer::new(&fine, 0)?));
                let coarse = fine.coarsened()?;
                levels.push(Level {
                    kind: LevelKind::H,
                    disc: Discretization::new(coarse.clone(), Basis::new(0), eq, bc),
                    cfl,
                });
                fine = coarse;
            }
        }
        Ok(Self { levels, transfers, mode })
    }

    pub fn order(&self) -> usize {
        self.levels[0].order()
    }

    pub fn finest(&self) -> &Discretization {
        &self.levels[0].disc
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn p_level_count(&self) -> usize {
        self.levels.iter().filter(|l| l.kind == LevelKind::P).count()
    }

    pub fn h_level_count(&self) -> usize {
        self.levels.iter().filter(|l| l.kind == LevelKind::H).count()
    }

    /// Degrees of freedom of every level relative to the finest.
    pub fn relative_cost(&self) -> Vec<f64> {
        let fine = self.levels[0].disc.n_dofs() as f64;
        self.levels.iter().map(|l| l.disc.n_dofs() as f64 / fine).collect()
    }
}
