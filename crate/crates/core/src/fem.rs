//! Piecewise-linear finite elements for the Poisson problem on the unit square
//! with homogeneous Dirichlet boundary conditions.
//!
//! Nodes are numbered row-major, `node = j * (n_div + 1) + i` for the point
//! `(i h, j h)`. Every cell is split along its lower-left to upper-right
//! diagonal. Boundary nodes are eliminated, so all operators act on interior
//! degrees of freedom only.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::linalg::{conjugate_gradient, CsrMatrix, SymmetricSparseOperator};

pub type Point = [f64; 2];

/// State vectors are plain coefficient vectors over interior DOFs.
pub type StateVector = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    n_div: usize,
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
}

pub fn build_mesh(n_div: usize) -> Result<Mesh> {
    if n_div < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "mesh needs at least 2 subdivisions per side, got {n_div}"
        )));
    }
    let h = 1.0 / n_div as f64;
    let side = n_div + 1;
    let mut nodes = Vec::with_capacity(side * side);
    let mut node_to_dof = Vec::with_capacity(side * side);
    let mut dof_to_node = Vec::new();
    for j in 0..side {
        for i in 0..side {
            let id = j * side + i;
            nodes.push([i as f64 * h, j as f64 * h]);
            if i == 0 || j == 0 || i == n_div || j == n_div {
                node_to_dof.push(None);
            } else {
                node_to_dof.push(Some(dof_to_node.len()));
                dof_to_node.push(id);
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * n_div * n_div);
    for j in 0..n_div {
        for i in 0..n_div {
            let ll = j * side + i;
            let lr = ll + 1;
            let ul = ll + side;
            let ur = ul + 1;
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }
    Ok(Mesh {
        n_div,
        nodes,
        triangles,
        node_to_dof,
        dof_to_node,
    })
}

impl Mesh {
    pub fn n_div(&self) -> usize {
        self.n_div
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_div as f64
    }

    pub fn n_dof(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn dof_coordinates(&self) -> impl Iterator<Item = Point> + '_ {
        self.dof_to_node.iter().map(|&n| self.nodes[n])
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|n| self.nodes[n])
    }

    /// Signed area, positive for counter-clockwise vertex order.
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn centroids(&self) -> Vec<Point> {
        (0..self.n_triangles()).map(|t| self.centroid(t)).collect()
    }

    /// Gradients of the three barycentric hat functions on triangle `t`.
    fn hat_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.vertices(t);
        let two_area = 2.0 * self.signed_area(t);
        [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ]
    }

    /// Interior DOF couplings, including every pair sharing a triangle.
    /// All stiffness and mass operators on this mesh share this pattern.
    fn pattern_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.triangles.iter().flat_map(move |tri| {
            let dofs = tri.map(|n| self.node_to_dof[n]);
            (0..3).flat_map(move |a| {
                (0..3).filter_map(move |b| match (dofs[a], dofs[b]) {
                    (Some(i), Some(j)) => Some((i, j, 0.0)),
                    _ => None,
                })
            })
        })
    }

    fn assemble(&self, mut local: impl FnMut(usize) -> [[f64; 3]; 3]) -> SymmetricSparseOperator {
        let mut triplets: Vec<(usize, usize, f64)> = self.pattern_triplets().collect();
        for (t, tri) in self.triangles.iter().enumerate() {
            let k = local(t);
            let dofs = tri.map(|n| self.node_to_dof[n]);
            for a in 0..3 {
                for b in 0..3 {
                    if let (Some(i), Some(j)) = (dofs[a], dofs[b]) {
                        triplets.push((i, j, k[a][b]));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.n_dof(), triplets)
    }

    /// Local P1 stiffness `∫_T ∇φ_a·∇φ_b` on triangle `t`.
    pub fn local_stiffness(&self, t: usize) -> [[f64; 3]; 3] {
        let g = self.hat_gradients(t);
        let area = self.signed_area(t);
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                k[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        k
    }
}

/// Stiffness operator for an elementwise-constant coefficient.
///
/// Every coefficient must be strictly positive.
pub fn assemble_stiffness(mesh: &Mesh, coeff: &[f64]) -> Result<SymmetricSparseOperator> {
    check_len("per-triangle coefficient", mesh.n_triangles(), coeff.len())?;
    if let Some((element, &value)) = coeff.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
        return Err(Error::Ellipticity { element, value });
    }
    Ok(assemble_weighted_stiffness(mesh, coeff))
}

/// Stiffness assembly without the sign check, used for the individual terms
/// of an affine coefficient expansion.
pub(crate) fn assemble_weighted_stiffness(mesh: &Mesh, coeff: &[f64]) -> SymmetricSparseOperator {
    mesh.assemble(|t| {
        let k = mesh.local_stiffness(t);
        k.map(|row| row.map(|v| coeff[t] * v))
    })
}

pub fn assemble_mass(mesh: &Mesh) -> SymmetricSparseOperator {
    mesh.assemble(|t| {
        let c = mesh.signed_area(t) / 12.0;
        [[2.0 * c, c, c], [c, 2.0 * c, c], [c, c, 2.0 * c]]
    })
}

/// Load vector `∫ f φ_i` with one-point centroid quadrature per triangle.
pub fn assemble_load(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut b = vec![0.0; mesh.n_dof()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let share = f(mesh.centroid(t)) * mesh.signed_area(t) / 3.0;
        for &n in tri {
            if let Some(i) = mesh.node_to_dof[n] {
                b[i] += share;
            }
        }
    }
    b
}

/// Relative residual target of [`solve_spd`].
pub const SOLVE_TOLERANCE: f64 = 1e-12;

/// Solves `A v = b` for a symmetric positive definite operator with
/// Jacobi-preconditioned conjugate gradients.
pub fn solve_spd(a: &SymmetricSparseOperator, b: &[f64]) -> Result<Vec<f64>> {
    check_len("right-hand side", a.dim(), b.len())?;
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = 10 * a.dim() + 100;
    conjugate_gradient(
        |x, y| a.mul_vec_into(x, y),
        b,
        None,
        Some(&inv_diag),
        SOLVE_TOLERANCE,
        max_iter,
    )
    .map(|out| out.x)
}

/// Evaluates the P1 interpolant of the DOF vector `u` at barycentric
/// coordinates `bary` inside triangle `t` (boundary nodes contribute zero).
pub fn eval_in_triangle(mesh: &Mesh, u: &[f64], t: usize, bary: [f64; 3]) -> f64 {
    mesh.triangles[t]
        .iter()
        .zip(bary)
        .map(|(&n, w)| mesh.node_to_dof[n].map_or(0.0, |i| w * u[i]))
        .sum()
}

// Symmetric 6-point rule, exact for polynomials of degree 4.
const QUAD6: [([f64; 3], f64); 6] = [
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
];

/// `‖u_h − u‖_{L²(D)}` for a discrete solution `u_h` against a reference function.
pub fn l2_error(mesh: &Mesh, u_h: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.vertices(t);
        let area = mesh.signed_area(t);
        for (bary, w) in QUAD6 {
            let p = [
                bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
                bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
            ];
            let e = eval_in_triangle(mesh, u_h, t, bary) - exact(p);
            acc += w * area * e * e;
        }
    }
    libm::sqrt(acc)
}

/// L² error of the P1 solution of `−Δu = 2π² sin(πx₁) sin(πx₂)` with unit
/// coefficient against the exact `sin(πx₁) sin(πx₂)`.
pub fn manufactured_error(n_div: usize) -> Result<f64> {
    use core::f64::consts::PI;
    let mesh = build_mesh(n_div)?;
    let exact = |p: Point| libm::sin(PI * p[0]) * libm::sin(PI * p[1]);
    let a = assemble_stiffness(&mesh, &vec![1.0; mesh.n_triangles()])?;
    let b = assemble_load(&mesh, |p| 2.0 * PI * PI * exact(p));
    let u = solve_spd(&a, &b)?;
    Ok(l2_error(&mesh, &u, exact))
}
