//! Uniform space-time meshes, C¹ and bilinear shape functions, degree-of-
//! freedom maps, and tensor Gauss quadrature.
//!
//! The computational domain is always the cylinder `Q_T = (0,1) × (0,T)`,
//! cut into `Nx × Nt` identical rectangles. Two finite element spaces live
//! on this mesh:
//!
//! * the Bogner-Fox-Schmit rectangle (bicubic Hermite tensor product,
//!   C¹-conforming, 4 dofs per node: value, ∂x, ∂t, ∂xt) for the adjoint
//!   variable, and
//! * the bilinear Q1 rectangle (1 dof per node) for the multiplier.
//!
//! Shape functions are expressed on the reference cell `[0,1]²`; derivative
//! dofs are scaled by the cell lengths so that nodal dof values coincide
//! with physical derivatives.

use thiserror::Error;

/// Errors from mesh construction and dof mapping.
#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("cell counts must be positive (got Nx = {nx}, Nt = {nt})")]
    EmptyMesh { nx: usize, nt: usize },
    #[error("final time must be positive (got {t_final})")]
    NonPositiveTime { t_final: f64 },
    #[error("shape index {k} out of range (max {max})")]
    ShapeIndex { k: usize, max: usize },
}

/// Uniform rectangulation of `Q_T = (0,1) × (0,T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeMesh {
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
    pub dx: f64,
    pub dt: f64,
}

impl SpaceTimeMesh {
    pub fn new(nx: usize, nt: usize, t_final: f64) -> Result<Self, MeshError> {
        if nx == 0 || nt == 0 {
            return Err(MeshError::EmptyMesh { nx, nt });
        }
        if !(t_final > 0.0) {
            return Err(MeshError::NonPositiveTime { t_final });
        }
        Ok(SpaceTimeMesh { nx, nt, t_final, dx: 1.0 / nx as f64, dt: t_final / nt as f64 })
    }

    /// Mesh size `h = sqrt(Δx² + Δt²)` (the reporting convention of all
    /// result tables).
    pub fn h(&self) -> f64 {
        self.dx.hypot(self.dt)
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.nt + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.nt
    }

    /// Node index of the grid point `(i, n)`, `x = i·Δx`, `t = n·Δt`;
    /// x runs fastest.
    pub fn node(&self, i: usize, n: usize) -> usize {
        n * (self.nx + 1) + i
    }

    /// Lower-left grid point `(i, n)` of cell `e`; cells are numbered with
    /// the x index running fastest.
    pub fn cell_origin(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    /// The four nodes of cell `e`, in local corner order
    /// (lower-left, lower-right, upper-left, upper-right).
    pub fn cell_nodes(&self, e: usize) -> [usize; 4] {
        let (i, n) = self.cell_origin(e);
        [self.node(i, n), self.node(i + 1, n), self.node(i, n + 1), self.node(i + 1, n + 1)]
    }

    /// Coordinates of the lower-left corner of cell `e`.
    pub fn cell_corner(&self, e: usize) -> (f64, f64) {
        let (i, n) = self.cell_origin(e);
        (i as f64 * self.dx, n as f64 * self.dt)
    }
}

/// Finite element space on the space-time mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FemSpace {
    /// Bogner-Fox-Schmit bicubic Hermite rectangle, 4 dofs per node.
    Bfs,
    /// Bilinear rectangle, 1 dof per node.
    Q1,
}

/// How the homogeneous Dirichlet condition on the lateral boundary
/// `x ∈ {0,1}` is treated.
///
/// Spaces whose continuous counterpart carries no boundary condition at all
/// (e.g. an L²(Q_T) multiplier space) should simply be built with `Keep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirichletMode {
    /// Remove the trace dofs on `x ∈ {0,1}`: for BFS the value and ∂t dofs
    /// (the conforming choice: the trace and its tangential derivative
    /// vanish identically), for Q1 the value dof.
    #[default]
    Eliminate,
    /// Keep all dofs everywhere, so the count matches the headline
    /// `n_h = 4·m_h` of the reference experiments; any boundary condition
    /// is then enforced only weakly through the quadratic functional.
    Keep,
    /// Like `Eliminate`, and additionally remove the trace dofs on the final
    /// time line `t = T` (for BFS the value and ∂x dofs, for Q1 the value
    /// dof). This realizes spaces whose weighted norm is finite only for a
    /// vanishing terminal trace.
    EliminateAndTerminal,
}

/// Kind of a BFS nodal dof.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Value = 0,
    Dx = 1,
    Dt = 2,
    Dxt = 3,
}

const DOF_KINDS: [DofKind; 4] = [DofKind::Value, DofKind::Dx, DofKind::Dt, DofKind::Dxt];

/// Map from (node, dof kind) to global equation numbers.
///
/// Numbering is deterministic: lexicographic by node (x fastest, then t),
/// then by dof kind in the order value, ∂x, ∂t, ∂xt. Masked dofs map to
/// `None`.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub space: FemSpace,
    pub mode: DirichletMode,
    /// Number of unmasked global dofs.
    pub n_dofs: usize,
    /// `node_count * mult` entries; `-1` marks a masked dof.
    index: Vec<i64>,
    mult: usize,
    nx: usize,
}

impl DofMap {
    pub fn new(mesh: &SpaceTimeMesh, space: FemSpace, mode: DirichletMode) -> Self {
        let mult = match space {
            FemSpace::Bfs => 4,
            FemSpace::Q1 => 1,
        };
        let mut index = vec![-1i64; mesh.node_count() * mult];
        let mut next = 0i64;
        for n in 0..=mesh.nt {
            for i in 0..=mesh.nx {
                let node = mesh.node(i, n);
                for k in 0..mult {
                    let on_lateral = i == 0 || i == mesh.nx;
                    let on_terminal = n == mesh.nt;
                    // Trace and tangential-derivative kinds along each line.
                    let lateral_kind = match space {
                        FemSpace::Bfs => {
                            k == DofKind::Value as usize || k == DofKind::Dt as usize
                        }
                        FemSpace::Q1 => k == DofKind::Value as usize,
                    };
                    let terminal_kind = match space {
                        FemSpace::Bfs => {
                            k == DofKind::Value as usize || k == DofKind::Dx as usize
                        }
                        FemSpace::Q1 => k == DofKind::Value as usize,
                    };
                    let masked = match mode {
                        DirichletMode::Keep => false,
                        DirichletMode::Eliminate => on_lateral && lateral_kind,
                        DirichletMode::EliminateAndTerminal => {
                            (on_lateral && lateral_kind) || (on_terminal && terminal_kind)
                        }
                    };
                    if !masked {
                        index[node * mult + k] = next;
                        next += 1;
                    }
                }
            }
        }
        DofMap { space, mode, n_dofs: next as usize, index, mult, nx: mesh.nx }
    }

    /// Global dof for `(node, kind)`, or `None` if masked. For Q1 only
    /// `DofKind::Value` exists.
    pub fn global(&self, node: usize, kind: DofKind) -> Option<usize> {
        let k = kind as usize;
        debug_assert!(k < self.mult);
        let g = self.index[node * self.mult + k];
        (g >= 0).then_some(g as usize)
    }

    /// Global dofs of one cell in local order (corner-major, kind-minor for
    /// BFS), `None` for masked entries.
    pub fn cell_dofs(&self, mesh: &SpaceTimeMesh, e: usize) -> Vec<Option<usize>> {
        debug_assert_eq!(self.nx, mesh.nx);
        let nodes = mesh.cell_nodes(e);
        let mut out = Vec::with_capacity(4 * self.mult);
        for &node in &nodes {
            for k in 0..self.mult {
                out.push(self.global(node, DOF_KINDS[k]));
            }
        }
        out
    }

    pub fn dofs_per_cell(&self) -> usize {
        4 * self.mult
    }
}

/// Values and derivatives of a scalar shape function at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct ShapeEval {
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
    pub dxx: f64,
    pub dxt: f64,
    pub dtt: f64,
}

/// 1D cubic Hermite basis on [0,1]: `(value, first, second)` derivatives of
/// the four functions `(value-left, slope-left, value-right, slope-right)`
/// with respect to the reference coordinate.
fn hermite1d(u: f64) -> [(f64, f64, f64); 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [
        (1.0 - 3.0 * u2 + 2.0 * u3, -6.0 * u + 6.0 * u2, -6.0 + 12.0 * u),
        (u - 2.0 * u2 + u3, 1.0 - 4.0 * u + 3.0 * u2, -4.0 + 6.0 * u),
        (3.0 * u2 - 2.0 * u3, 6.0 * u - 6.0 * u2, 6.0 - 12.0 * u),
        (-u2 + u3, -2.0 * u + 3.0 * u2, -2.0 + 6.0 * u),
    ]
}

/// Evaluates BFS shape `k` (0..16, corner-major, kind-minor) at reference
/// point `(ξ, τ)` of a cell with physical lengths `(dx, dt)`.
///
/// Returned derivatives are physical; derivative-type dofs carry the usual
/// `dx`/`dt` scaling so that a coefficient vector holds physical nodal
/// derivatives.
pub fn bfs_shape(k: usize, xi: f64, tau: f64, dx: f64, dt: f64) -> Result<ShapeEval, MeshError> {
    if k >= 16 {
        return Err(MeshError::ShapeIndex { k, max: 15 });
    }
    let corner = k / 4;
    let kind = k % 4;
    // Corner order: (0,0), (1,0), (0,1), (1,1) in (x,t).
    let cx = corner % 2;
    let ct = corner / 2;
    let hx = hermite1d(xi);
    let ht = hermite1d(tau);
    // Pick the 1D factor per dof kind: value dofs use the value functions,
    // derivative dofs the slope functions scaled by the cell length.
    let (fx, sx) = match kind {
        0 | 2 => (hx[2 * cx], 1.0),
        _ => (hx[2 * cx + 1], dx),
    };
    let (ft, st) = match kind {
        0 | 1 => (ht[2 * ct], 1.0),
        _ => (ht[2 * ct + 1], dt),
    };
    let scale = sx * st;
    Ok(ShapeEval {
        value: scale * fx.0 * ft.0,
        dx: scale * fx.1 * ft.0 / dx,
        dt: scale * fx.0 * ft.1 / dt,
        dxx: scale * fx.2 * ft.0 / (dx * dx),
        dxt: scale * fx.1 * ft.1 / (dx * dt),
        dtt: scale * fx.0 * ft.2 / (dt * dt),
    })
}

/// Evaluates Q1 shape `k` (0..4, corner order as above) at `(ξ, τ)`.
/// Derivatives are with respect to the reference coordinates; divide by the
/// cell lengths for physical ones.
pub fn q1_shape(k: usize, xi: f64, tau: f64) -> Result<(f64, f64, f64), MeshError> {
    if k >= 4 {
        return Err(MeshError::ShapeIndex { k, max: 3 });
    }
    let cx = (k % 2) as f64;
    let ct = (k / 2) as f64;
    let gx = cx * xi + (1.0 - cx) * (1.0 - xi);
    let gt = ct * tau + (1.0 - ct) * (1.0 - tau);
    let dgx = 2.0 * cx - 1.0;
    let dgt = 2.0 * ct - 1.0;
    Ok((gx * gt, dgx * gt, gx * dgt))
}

/// 1D C¹ Hermite space on `(0,1)` with `Nx` cells: 2 dofs per node (value,
/// ∂x), value dofs removed at `x ∈ {0,1}`. Used by the time-marching
/// verification solver.
#[derive(Debug, Clone)]
pub struct Hermite1dSpace {
    pub nx: usize,
    pub dx: f64,
    /// `2(Nx+1)` entries, `-1` for the two removed boundary value dofs.
    index: Vec<i64>,
    pub n_dofs: usize,
}

impl Hermite1dSpace {
    pub fn new(nx: usize) -> Result<Self, MeshError> {
        Self::build(nx, true)
    }

    /// Variant without the Dirichlet mask (all `2(Nx+1)` dofs kept), for
    /// quadrature checks against functions with nonzero boundary values.
    pub fn new_free(nx: usize) -> Result<Self, MeshError> {
        Self::build(nx, false)
    }

    fn build(nx: usize, dirichlet: bool) -> Result<Self, MeshError> {
        if nx < 2 {
            return Err(MeshError::EmptyMesh { nx, nt: 1 });
        }
        let mut index = vec![-1i64; 2 * (nx + 1)];
        let mut next = 0i64;
        for i in 0..=nx {
            for k in 0..2 {
                let masked = dirichlet && k == 0 && (i == 0 || i == nx);
                if !masked {
                    index[2 * i + k] = next;
                    next += 1;
                }
            }
        }
        Ok(Hermite1dSpace { nx, dx: 1.0 / nx as f64, index, n_dofs: next as usize })
    }

    /// Global dof of `(node i, kind)` with kind 0 = value, 1 = ∂x.
    pub fn global(&self, i: usize, kind: usize) -> Option<usize> {
        let g = self.index[2 * i + kind];
        (g >= 0).then_some(g as usize)
    }

    /// The four local shapes on cell `e` at reference coordinate `ξ`:
    /// `(value, ∂x, ∂xx)` each, in order (value-left, slope-left,
    /// value-right, slope-right).
    pub fn shapes(&self, xi: f64) -> [(f64, f64, f64); 4] {
        let h = hermite1d(xi);
        let d = self.dx;
        [
            (h[0].0, h[0].1 / d, h[0].2 / (d * d)),
            (d * h[1].0, h[1].1, h[1].2 / d),
            (h[2].0, h[2].1 / d, h[2].2 / (d * d)),
            (d * h[3].0, h[3].1, h[3].2 / d),
        ]
    }

    /// Local-to-global for cell `e`: dofs of nodes `e` and `e+1`.
    pub fn cell_dofs(&self, e: usize) -> [Option<usize>; 4] {
        [self.global(e, 0), self.global(e, 1), self.global(e + 1, 0), self.global(e + 1, 1)]
    }
}

/// Tensor Gauss-Legendre quadrature on the reference cell `[0,1]²`.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Points per direction.
    pub order: usize,
    /// 1D nodes on (0,1), strictly interior.
    pub nodes: Vec<f64>,
    /// Matching 1D weights, summing to 1.
    pub weights: Vec<f64>,
}

impl QuadRule {
    /// Gauss-Legendre rule with `q` points per direction (exact for degree
    /// `2q-1` polynomials per direction). Nodes are strictly inside (0,1),
    /// so integrands singular on cell edges are never sampled there.
    pub fn gauss(q: usize) -> Self {
        assert!(q >= 1 && q <= 64, "quadrature order out of supported range");
        let (nodes, weights) = gauss_legendre_01(q);
        QuadRule { order: q, nodes, weights }
    }

    /// Iterates over the tensor rule: `(ξ, τ, weight)` with the weight
    /// normalized for the unit reference cell.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let q = self.order;
        (0..q * q).map(move |idx| {
            let (a, b) = (idx % q, idx / q);
            (self.nodes[a], self.nodes[b], self.weights[a] * self.weights[b])
        })
    }
}

/// Gauss-Legendre nodes/weights on (0,1) by Newton iteration on the
/// Legendre polynomial (standard Golub-Welsch-free construction).
fn gauss_legendre_01(q: usize) -> (Vec<f64>, Vec<f64>) {
    let n = q;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess for the i-th root of P_n on (-1,1).
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            // Evaluate P_n(z) and P_{n-1}(z) by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut p0, mut p1) = (1.0, 0.0);
                for j in 0..n {
                    let p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
                }
                let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
                nodes[i] = 0.5 * (1.0 - z);
                nodes[n - 1 - i] = 0.5 * (1.0 + z);
                let w = 1.0 / ((1.0 - z * z) * dp * dp);
                weights[i] = w;
                weights[n - 1 - i] = w;
                break;
            }
        }
    }
    (nodes, weights)
}
