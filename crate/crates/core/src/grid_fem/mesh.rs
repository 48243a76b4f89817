//! Nested uniform grids on the unit cube and trilinear prolongations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fem::problem::BoundaryPartition;
use crate::linalg::CsrMatrix;

/// One uniform level with `cells[d]` cells along axis `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLevel {
    pub cells: [usize; 3],
}

impl GridLevel {
    pub fn uniform(cells: usize) -> Self {
        Self { cells: [cells; 3] }
    }

    pub fn nodes_per_axis(&self) -> [usize; 3] {
        self.cells.map(|c| c + 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.cells.map(|c| 1.0 / c as f64)
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.nodes_per_axis();
        i + nx * (j + ny * k)
    }

    #[inline]
    pub fn node_ijk(&self, idx: usize) -> (usize, usize, usize) {
        let [nx, ny, _] = self.nodes_per_axis();
        (idx % nx, (idx / nx) % ny, idx / (nx * ny))
    }

    pub fn node_coords(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.node_ijk(idx);
        let h = self.spacing();
        [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]
    }

    #[inline]
    pub fn cell_ijk(&self, cell: usize) -> (usize, usize, usize) {
        let [cx, cy, _] = self.cells;
        (cell % cx, (cell / cx) % cy, cell / (cx * cy))
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [cx, cy, _] = self.cells;
        i + cx * (j + cy * k)
    }
}

/// How the grid is coarsened from one level to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coarsening {
    /// Halve the cell count along every axis.
    Full,
    /// Halve along x and y only; z keeps the finest resolution on every level.
    /// Suits operators whose z-coupling is much weaker than the in-plane one.
    SemiXy,
}

/// Map between grid nodes and free (unconstrained) degrees of freedom.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
}

impl DofMap {
    pub fn new(level: GridLevel, boundary: BoundaryPartition) -> Self {
        let n = level.nodes_per_axis();
        let mut node_to_dof = vec![None; level.node_count()];
        let mut dof_to_node = Vec::new();
        for idx in 0..level.node_count() {
            let (i, j, k) = level.node_ijk(idx);
            if !boundary.is_dirichlet(i, j, k, n) {
                node_to_dof[idx] = Some(dof_to_node.len());
                dof_to_node.push(idx);
            }
        }
        Self { node_to_dof, dof_to_node }
    }

    pub fn n_free(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_to_dof.len()
    }

    #[inline]
    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    #[inline]
    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }
}

/// Nested grids where level `i` has `m0 * 2^i` cells along each coarsened axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshHierarchy {
    base_cells: usize,
    coarsening: Coarsening,
    levels: Vec<GridLevel>,
    /// Node-to-node trilinear prolongation from level `i` to `i + 1`.
    prolongations: Vec<CsrMatrix>,
}

impl MeshHierarchy {
    pub fn build(levels: usize, base_cells: usize) -> Result<Self> {
        Self::with_coarsening(levels, base_cells, Coarsening::Full)
    }

    pub fn with_coarsening(levels: usize, base_cells: usize, coarsening: Coarsening) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidInput(format!("multigrid needs at least 2 levels, got {levels}")));
        }
        if base_cells < 2 {
            return Err(Error::InvalidInput(format!("base cells per dimension must be >= 2, got {base_cells}")));
        }
        let finest = base_cells << (levels - 1);
        let levels: Vec<GridLevel> = (0..levels)
            .map(|i| {
                let c = base_cells << i;
                match coarsening {
                    Coarsening::Full => GridLevel::uniform(c),
                    Coarsening::SemiXy => GridLevel { cells: [c, c, finest] },
                }
            })
            .collect();
        let prolongations = levels.windows(2).map(|w| trilinear_prolongation(w[0], w[1])).collect();
        Ok(Self { base_cells, coarsening, levels, prolongations })
    }

    pub fn base_cells(&self) -> usize {
        self.base_cells
    }

    pub fn coarsening(&self) -> Coarsening {
        self.coarsening
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> GridLevel {
        self.levels[i]
    }

    pub fn finest(&self) -> GridLevel {
        *self.levels.last().unwrap()
    }

    pub fn node_prolongation(&self, i: usize) -> &CsrMatrix {
        &self.prolongations[i]
    }

    /// Prolongations restricted to free DoFs on both sides. Constrained coarse
    /// nodes carry a zero correction, so their columns are dropped.
    pub fn free_prolongations(&self, boundary: BoundaryPartition) -> (Vec<DofMap>, Vec<CsrMatrix>) {
        let maps: Vec<DofMap> = self.levels.iter().map(|&l| DofMap::new(l, boundary)).collect();
        let ps = self
            .prolongations
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (coarse, fine) = (&maps[i], &maps[i + 1]);
                let mut trips = Vec::new();
                for row in 0..fine.n_free() {
                    let (cols, vals) = p.row(fine.node(row));
                    for (&c, &v) in cols.iter().zip(vals) {
                        if let Some(cd) = coarse.dof(c) {
                            trips.push((row, cd, v));
                        }
                    }
                }
                CsrMatrix::from_triplets(fine.n_free(), coarse.n_free(), &trips)
            })
            .collect();
        (maps, ps)
    }
}

fn trilinear_prolongation(coarse: GridLevel, fine: GridLevel) -> CsrMatrix {
    // per axis: injection when the axis is not coarsened; otherwise even fine
    // indices sit on a coarse node and odd ones halfway between two
    let stencil = |axis: usize, i: usize| -> Vec<(usize, f64)> {
        if fine.cells[axis] == coarse.cells[axis] {
            vec![(i, 1.0)]
        } else if i.is_multiple_of(2) {
            vec![(i / 2, 1.0)]
        } else {
            vec![(i / 2, 0.5), (i / 2 + 1, 0.5)]
        }
    };
    let mut trips = Vec::with_capacity(fine.node_count() * 8);
    for idx in 0..fine.node_count() {
        let (i, j, k) = fine.node_ijk(idx);
        for &(ci, wi) in &stencil(0, i) {
            for &(cj, wj) in &stencil(1, j) {
                for &(ck, wk) in &stencil(2, k) {
                    trips.push((idx, coarse.node_index(ci, cj, ck), wi * wj * wk));
                }
            }
        }
    }
    CsrMatrix::from_triplets(fine.node_count(), coarse.node_count(), &trips)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_node_counts() {
        let h = MeshHierarchy::build(2, 2).unwrap();
        assert_eq!(h.level(0).node_count(), 27);
        assert_eq!(h.level(1).node_count(), 125);
    }

    #[test]
    fn full_scale_node_count() {
        let h = MeshHierarchy::build(4, 4).unwrap();
        assert_eq!(h.finest().node_count(), 35_937);
    }

    #[test]
    fn rejects_single_level() {
        assert!(MeshHierarchy::build(1, 4).is_err());
        assert!(MeshHierarchy::build(3, 1).is_err());
    }

    #[test]
    fn prolongation_reproduces_constants() {
        let h = MeshHierarchy::build(3, 2).unwrap();
        for i in 0..2 {
            let p = h.node_prolongation(i);
            let ones = vec![1.0; p.ncols()];
            assert!(p.matvec(&ones).iter().all(|&v| (v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn free_prolongation_reproduces_constants_away_from_boundary() {
        let h = MeshHierarchy::build(3, 2).unwrap();
        let (maps, ps) = h.free_prolongations(BoundaryPartition::AllDirichlet);
        let fine = h.level(2);
        let out = ps[1].matvec(&vec![1.0; ps[1].ncols()]);
        let n = fine.nodes_per_axis()[0];
        for dof in 0..maps[2].n_free() {
            let (i, j, k) = fine.node_ijk(maps[2].node(dof));
            let interior = [i, j, k].iter().all(|&c| c >= 2 && c <= n - 3);
            if interior {
                assert!((out[dof] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn semi_coarsening_keeps_z_resolution() {
        let h = MeshHierarchy::with_coarsening(3, 2, Coarsening::SemiXy).unwrap();
        assert_eq!(h.level(0).cells, [2, 2, 8]);
        assert_eq!(h.finest().cells, [8, 8, 8]);
        let p = h.node_prolongation(1);
        assert_eq!(p.ncols(), 5 * 5 * 9);
        assert!(p.matvec(&vec![1.0; p.ncols()]).iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn neumann_face_nodes_are_free() {
        let level = GridLevel::uniform(4);
        let all = DofMap::new(level, BoundaryPartition::AllDirichlet);
        let mixed = DofMap::new(level, BoundaryPartition::NeumannAtXOne);
        assert_eq!(all.n_free(), 27);
        assert_eq!(mixed.n_free(), 36);
        assert!(mixed.dof(level.node_index(4, 2, 2)).is_some());
        assert!(mixed.dof(level.node_index(4, 0, 2)).is_none());
    }
}
