//! All assembled data for levels 0..=max_level.

use crate::assembly::{assemble_mass, assemble_system, Forcing, SaddlePointSystem};
use crate::error::Result;
use crate::mesh::MeshLevel;
use crate::norm::NormOperator;
use crate::transfer::{build_transfer, TransferOperator};

#[derive(Debug, Clone)]
pub struct Level {
    pub mesh: MeshLevel,
    pub system: SaddlePointSystem,
    pub norm: NormOperator,
    /// Prolongation from the next coarser level; None on level 0.
    pub transfer: Option<TransferOperator>,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
}

impl Hierarchy {
    /// Assembles every level with zero forcing.
    pub fn build(max_level: usize) -> Result<Self> {
        Self::build_with_forcing(max_level, None)
    }

    pub fn build_with_forcing(max_level: usize, forcing: Option<Forcing>) -> Result<Self> {
        let mut levels: Vec<Level> = Vec::with_capacity(max_level + 1);
        for l in 0..=max_level {
            let mesh = MeshLevel::build(l)?;
            let system = assemble_system(&mesh, forcing)?;
            let (mv, mq) = assemble_mass(&mesh)?;
            let norm = NormOperator::new(mv, mq, mesh.h_min);
            let transfer = match levels.last() {
                Some(coarse) => Some(build_transfer(&coarse.mesh, &mesh)?),
                None => None,
            };
            levels.push(Level {
                mesh,
                system,
                norm,
                transfer,
            });
        }
        Ok(Self { levels })
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }
}
