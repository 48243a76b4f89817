//! Trilinear hexahedral finite elements with 2x2x2 Gauss quadrature.
//!
//! Dirichlet nodes are eliminated: their rows and columns are dropped and the
//! known boundary values move into the right-hand side, which keeps the
//! operator symmetric positive definite.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid_fem::mesh::{DofMap, GridLevel, MeshHierarchy};
use crate::grid_fem::problem::{ParamPoint, ProblemSpec};
use crate::linalg::CsrMatrix;

const QUAD_POINTS: usize = 8;
const LOCAL_NODES: usize = 8;

/// Parametrized linear system on the free DoFs of the finest grid.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub mu: ParamPoint,
    pub dofs: Arc<DofMap>,
}

impl AssembledSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }
}

/// A subset of rows of `A(mu)` and the matching right-hand side entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRows {
    pub rows: Vec<usize>,
    /// One sparse row `(columns, values)` per requested index, in request order.
    pub entries: Vec<(Vec<usize>, Vec<f64>)>,
    pub rhs: Vec<f64>,
}

/// Reference-cube data for one grid spacing and anisotropy.
#[derive(Debug, Clone)]
struct ReferenceElement {
    /// Gauss points in unit-cell coordinates.
    points: [[f64; 3]; QUAD_POINTS],
    /// Weighted stiffness contributions per quadrature point.
    stiffness: [[[f64; LOCAL_NODES]; LOCAL_NODES]; QUAD_POINTS],
    /// Weighted shape values per quadrature point.
    mass: [[f64; LOCAL_NODES]; QUAD_POINTS],
}

impl ReferenceElement {
    fn new(h: [f64; 3], anisotropy: [f64; 3]) -> Self {
        let g = 0.5 / 3f64.sqrt();
        let pts1 = [0.5 - g, 0.5 + g];
        let shape = |a: usize, t: f64| if a == 0 { 1.0 - t } else { t };
        let dshape = |a: usize| if a == 0 { -1.0 } else { 1.0 };
        // each 1D Gauss weight is 1/2 on the unit interval
        let weight = 0.125 * h[0] * h[1] * h[2];

        let mut points = [[0.0; 3]; QUAD_POINTS];
        let mut stiffness = [[[0.0; LOCAL_NODES]; LOCAL_NODES]; QUAD_POINTS];
        let mut mass = [[0.0; LOCAL_NODES]; QUAD_POINTS];
        for q in 0..QUAD_POINTS {
            let xi = [pts1[q & 1], pts1[(q >> 1) & 1], pts1[(q >> 2) & 1]];
            points[q] = xi;
            let mut grads = [[0.0; 3]; LOCAL_NODES];
            for a in 0..LOCAL_NODES {
                let (ax, ay, az) = (a & 1, (a >> 1) & 1, (a >> 2) & 1);
                let (sx, sy, sz) = (shape(ax, xi[0]), shape(ay, xi[1]), shape(az, xi[2]));
                mass[q][a] = weight * sx * sy * sz;
                grads[a] = [dshape(ax) * sy * sz / h[0], sx * dshape(ay) * sz / h[1], sx * sy * dshape(az) / h[2]];
            }
            for a in 0..LOCAL_NODES {
                for b in 0..LOCAL_NODES {
                    let s: f64 = (0..3).map(|d| anisotropy[d] * grads[a][d] * grads[b][d]).sum();
                    stiffness[q][a][b] = weight * s;
                }
            }
        }
        Self { points, stiffness, mass }
    }
}

/// A problem bound to a grid hierarchy: everything needed to assemble
/// `A(mu)`, `f(mu)` and to build multigrid transfer operators.
#[derive(Debug, Clone)]
pub struct Discretization {
    spec: ProblemSpec,
    mesh: Arc<MeshHierarchy>,
    dof_maps: Vec<Arc<DofMap>>,
    prolongations: Vec<CsrMatrix>,
    element: ReferenceElement,
}

impl Discretization {
    pub fn new(spec: ProblemSpec, mesh: Arc<MeshHierarchy>) -> Result<Self> {
        spec.check_bounds()?;
        let (maps, prolongations) = mesh.free_prolongations(spec.boundary);
        let element = ReferenceElement::new(mesh.finest().spacing(), spec.anisotropy());
        Ok(Self { spec, mesh, dof_maps: maps.into_iter().map(Arc::new).collect(), prolongations, element })
    }

    /// Hierarchy with `levels` levels and `base_cells` coarsest cells per axis,
    /// coarsened the way the problem prefers.
    pub fn build(spec: ProblemSpec, levels: usize, base_cells: usize) -> Result<Self> {
        let mesh = MeshHierarchy::with_coarsening(levels, base_cells, spec.preferred_coarsening())?;
        Self::new(spec, Arc::new(mesh))
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn mesh(&self) -> &MeshHierarchy {
        &self.mesh
    }

    pub fn n_free(&self) -> usize {
        self.dof_maps.last().unwrap().n_free()
    }

    pub fn dof_map(&self, level: usize) -> &DofMap {
        &self.dof_maps[level]
    }

    /// Free-DoF prolongations, `prolongations()[i]` maps level `i` to `i + 1`.
    pub fn prolongations(&self) -> &[CsrMatrix] {
        &self.prolongations
    }

    /// Assembles `A(mu)` and `f(mu)` on the free DoFs of the finest grid.
    pub fn assemble(&self, mu: &ParamPoint) -> Result<AssembledSystem> {
        self.spec.validate(mu)?;
        let fine = self.mesh.finest();
        let dofs = self.dof_maps.last().unwrap();
        let n = dofs.n_free();
        let mut trips = Vec::with_capacity(fine.cell_count() * 64);
        let mut rhs = vec![0.0; n];
        for cell in 0..fine.cell_count() {
            self.element_contribution(fine, dofs, cell, &mu.0, |r, c, v| trips.push((r, c, v)), &mut rhs)?;
        }
        Ok(AssembledSystem { matrix: CsrMatrix::from_triplets(n, n, &trips), rhs, mu: mu.clone(), dofs: Arc::clone(dofs) })
    }

    /// Assembles only the requested rows. Elements are visited in the same
    /// order as [`Discretization::assemble`], so the entries are bit-identical
    /// to the corresponding rows of the full system.
    pub fn assemble_rows(&self, mu: &ParamPoint, rows: &[usize]) -> Result<SampledRows> {
        self.spec.validate(mu)?;
        let fine = self.mesh.finest();
        let dofs = self.dof_maps.last().unwrap();
        let n = dofs.n_free();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::DimensionMismatch(format!("row {bad} out of range for {n} DoFs")));
        }
        let mut cells = Vec::new();
        for &r in rows {
            let (i, j, k) = fine.node_ijk(dofs.node(r));
            for dk in 0..2 {
                for dj in 0..2 {
                    for di in 0..2 {
                        let (ci, cj, ck) = (i as isize - di, j as isize - dj, k as isize - dk);
                        let [lx, ly, lz] = fine.cells.map(|c| c as isize);
                        if (0..lx).contains(&ci) && (0..ly).contains(&cj) && (0..lz).contains(&ck) {
                            cells.push(fine.cell_index(ci as usize, cj as usize, ck as usize));
                        }
                    }
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();

        let mut slot = vec![usize::MAX; n];
        for (s, &r) in rows.iter().enumerate() {
            if slot[r] == usize::MAX {
                slot[r] = s;
            }
        }
        let mut trips = Vec::new();
        let mut full_rhs = vec![0.0; n];
        for &cell in &cells {
            self.element_contribution(
                fine,
                dofs,
                cell,
                &mu.0,
                |r, c, v| {
                    if slot[r] != usize::MAX {
                        trips.push((slot[r], c, v));
                    }
                },
                &mut full_rhs,
            )?;
        }
        let local = CsrMatrix::from_triplets(rows.len(), n, &trips);
        let entries = rows
            .iter()
            .map(|&r| {
                let (c, v) = local.row(slot[r]);
                (c.to_vec(), v.to_vec())
            })
            .collect();
        Ok(SampledRows { rows: rows.to_vec(), entries, rhs: rows.iter().map(|&r| full_rhs[r]).collect() })
    }

    fn element_contribution(
        &self,
        fine: GridLevel,
        dofs: &DofMap,
        cell: usize,
        mu: &[f64],
        mut emit: impl FnMut(usize, usize, f64),
        rhs: &mut [f64],
    ) -> Result<()> {
        let (ci, cj, ck) = fine.cell_ijk(cell);
        let h = fine.spacing();
        let el = &self.element;

        let mut ke = [[0.0; LOCAL_NODES]; LOCAL_NODES];
        let mut fe = [0.0; LOCAL_NODES];
        for q in 0..QUAD_POINTS {
            let xq = [(ci as f64 + el.points[q][0]) * h[0], (cj as f64 + el.points[q][1]) * h[1], (ck as f64 + el.points[q][2]) * h[2]];
            let kappa = self.spec.coefficient(xq, mu);
            if !(kappa > 0.0) {
                return Err(Error::NotSpd(format!("non-positive diffusion coefficient {kappa} at {xq:?}")));
            }
            let src = self.spec.source(xq, mu);
            for a in 0..LOCAL_NODES {
                for b in 0..LOCAL_NODES {
                    ke[a][b] += kappa * el.stiffness[q][a][b];
                }
                fe[a] += src * el.mass[q][a];
            }
        }

        let mut nodes = [0usize; LOCAL_NODES];
        for (a, node) in nodes.iter_mut().enumerate() {
            *node = fine.node_index(ci + (a & 1), cj + ((a >> 1) & 1), ck + ((a >> 2) & 1));
        }
        for a in 0..LOCAL_NODES {
            let Some(ra) = dofs.dof(nodes[a]) else { continue };
            rhs[ra] += fe[a];
            for b in 0..LOCAL_NODES {
                match dofs.dof(nodes[b]) {
                    Some(rb) => emit(ra, rb, ke[a][b]),
                    None => {
                        let g = self.spec.dirichlet(fine.node_coords(nodes[b]), mu);
                        rhs[ra] -= ke[a][b] * g;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Assembles `A(mu)`, `f(mu)` for `spec` on the finest level of `mesh`.
pub fn assemble_system(spec: &ProblemSpec, mu: &ParamPoint, mesh: Arc<MeshHierarchy>) -> Result<AssembledSystem> {
    Discretization::new(spec.clone(), mesh)?.assemble(mu)
}

/// Galerkin coarse operator `P^T A P`.
pub fn galerkin_coarsen(a_fine: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    if a_fine.nrows() != a_fine.ncols() || a_fine.ncols() != p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "operator {}x{} incompatible with prolongation {}x{}",
            a_fine.nrows(),
            a_fine.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    p.transpose().matmul(&a_fine.matmul(p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fem::problem::BoundaryPartition;

    fn disc(spec: ProblemSpec, levels: usize, m0: usize) -> Discretization {
        Discretization::new(spec, Arc::new(MeshHierarchy::build(levels, m0).unwrap())).unwrap()
    }

    #[test]
    fn constant_coefficient_rows_sum_to_zero_in_the_interior() {
        // Neumann-free interior rows: with kappa = 1 constants lie in the kernel.
        let d = disc(ProblemSpec::example1(), 2, 4);
        let sys = d.assemble(&ParamPoint::new(vec![0.0, 0.4])).unwrap();
        let fine = d.mesh().finest();
        let n = fine.nodes_per_axis()[0];
        for r in 0..sys.size() {
            let (i, j, k) = fine.node_ijk(sys.dofs.node(r));
            if [i, j, k].iter().all(|&c| c >= 2 && c <= n - 3) {
                let (_, vals) = sys.matrix.row(r);
                let s: f64 = vals.iter().sum();
                assert!(s.abs() < 1e-13, "row {r} sums to {s}");
            }
        }
    }

    #[test]
    fn operator_is_symmetric_with_positive_diagonal() {
        for spec in [ProblemSpec::example1(), ProblemSpec::example2()] {
            let d = disc(spec.clone(), 2, 2);
            let mu = ParamPoint::new(spec.bounds.iter().map(|(lo, hi)| 0.3 * lo + 0.7 * hi).collect());
            let sys = d.assemble(&mu).unwrap();
            assert!(sys.matrix.symmetry_defect() <= 1e-13 * sys.matrix.max_abs());
            assert!(sys.matrix.diagonal().iter().all(|&v| v > 0.0));
            assert!(sys.matrix.to_dense().cholesky().is_some());
        }
    }

    #[test]
    fn neumann_problem_has_face_dofs() {
        let d = disc(ProblemSpec::example2(), 2, 2);
        assert_eq!(d.spec().boundary, BoundaryPartition::NeumannAtXOne);
        assert_eq!(d.n_free(), 36);
    }

    #[test]
    fn rejects_parameters_outside_the_box() {
        let d = disc(ProblemSpec::example1(), 2, 2);
        assert!(matches!(d.assemble(&ParamPoint::new(vec![3.0, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn sampled_rows_match_full_assembly() {
        let d = disc(ProblemSpec::example1(), 2, 4);
        let mu = ParamPoint::new(vec![1.7, 0.25]);
        let sys = d.assemble(&mu).unwrap();
        let rows = vec![0, 13, sys.size() - 1, 200, 13];
        let sampled = d.assemble_rows(&mu, &rows).unwrap();
        for (s, &r) in rows.iter().enumerate() {
            let (c, v) = sys.matrix.row(r);
            assert_eq!(sampled.entries[s].0, c);
            assert_eq!(sampled.entries[s].1, v);
            assert_eq!(sampled.rhs[s], sys.rhs[r]);
        }
    }

    #[test]
    fn galerkin_with_identity_is_exact() {
        let d = disc(ProblemSpec::example1(), 2, 2);
        let sys = d.assemble(&ParamPoint::new(vec![1.0, 0.5])).unwrap();
        let id = CsrMatrix::identity(sys.size());
        assert_eq!(galerkin_coarsen(&sys.matrix, &id).unwrap(), sys.matrix);
        assert!(galerkin_coarsen(&sys.matrix, &CsrMatrix::identity(3)).is_err());
    }
}
