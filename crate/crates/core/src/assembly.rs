//! Assembly of the discrete space-time mixed systems and of the 1D
//! matrices used by the time-marching verification solver.
//!
//! All three mixed formulations lead to a block system
//!
//! ```text
//!   [ A  Bᵀ ] [ φ ]   [ L ]
//!   [ B  0  ] [ λ ] = [ 0 ]
//! ```
//!
//! on a uniform rectangular mesh of `Q_T = (0,1)×(0,T)`, with `q_T = ω×(0,T)`
//! the control cylinder:
//!
//! * [`assemble_mf1`] — adjoint variable `φ` in the C¹ Bogner-Fox-Schmit
//!   space, multiplier `λ` in Q1 (an L²(Q_T) discretization):
//!   `a(φ,φ̄) = ∬_{q_T} ρ0⁻²φφ̄ + ε(φ(·,T),φ̄(·,T)) + r∬_{Q_T} L*φ·L*φ̄`,
//!   `b(φ,λ) = −∬_{Q_T} L*φ·λ`, `l(φ) = −(y0, φ(·,0))`, where
//!   `L*φ = −φ_t − (c φ_x)_x + dφ` is applied in strong form (BFS has the
//!   required second derivatives).
//! * [`assemble_mf3norm`] — the ε = 0 limit after normalizing `ψ = ρ0⁻¹φ`:
//!   `â(ψ,ψ̄) = ∬_{q_T} ψψ̄ + r∬_{Q_T} w(ψ)·w(ψ̄)` with
//!   `w(ψ) = α1 L*ψ + α0 ψ` (coefficients from
//!   [`crate::weights::WeightSpec::normalized_coeffs`], which realize
//!   `ρ⁻¹L*(ρ0ψ)`), `b̂(ψ,λ) = −∬ w(ψ)·λ`, `l̂(ψ) = −(y0, ρ0(·,0)ψ(·,0))`.
//! * [`assemble_mf2`] — both variables in Q1; the constraint is tested
//!   against a multiplier in L²(0,T;H¹₀) so only first derivatives appear:
//!   `b̂(φ,λ) = ∬ φ_t λ − ∬ (c φ_x λ_x + d φ λ)`. The least-squares term of
//!   the quadratic form is `r⟨Ŝ⁻¹B φ, B φ̄⟩` with `Ŝ` the multiplier Gram
//!   matrix (discrete Riesz map of the dual norm); it is *not* assembled —
//!   it would be dense — so [`MixedSystem::h1_augmented`] marks that the
//!   stored `a` is only the weighted-mass + terminal part and downstream
//!   solvers must apply `A = a + r·BᵀJ⁻¹B` through solves with `J`.
//!
//! Control-support integrals split straddling cells exactly at the `ω`
//! endpoints so that the indicator function never crosses a quadrature
//! panel. The terminal term and the initial load use 1D Gauss rules on the
//! top and bottom edges of the mesh.

use std::fmt;
use std::sync::Arc;

use crate::linalg::{LinalgError, SparseMat, SparseSym, TripletBuilder};
use crate::mesh::{
    bfs_shape, q1_shape, DirichletMode, DofMap, FemSpace, Hermite1dSpace, MeshError, QuadRule,
    ShapeEval, SpaceTimeMesh,
};
use crate::weights::{WeightError, WeightSpec};

/// A scalar coefficient of the operator, either constant or a callable of
/// `(x, t)` (with its x-derivative, needed for the strong form of the
/// divergence term).
#[derive(Clone)]
pub enum Coefficient {
    Const(f64),
    Varying {
        f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        /// ∂/∂x of `f`, used in `−(c φ_x)_x = −c φ_xx − c_x φ_x`.
        df_dx: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl Coefficient {
    pub fn eval(&self, x: f64, t: f64) -> f64 {
        match self {
            Coefficient::Const(v) => *v,
            Coefficient::Varying { f, .. } => f(x, t),
        }
    }

    pub fn eval_dx(&self, x: f64, t: f64) -> f64 {
        match self {
            Coefficient::Const(_) => 0.0,
            Coefficient::Varying { df_dx, .. } => df_dx(x, t),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Coefficient::Const(v) => Some(*v),
            Coefficient::Varying { .. } => None,
        }
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Const(v) => write!(f, "Const({v})"),
            Coefficient::Varying { .. } => write!(f, "Varying(..)"),
        }
    }
}

/// Initial datum `y0` of the controlled equation.
#[derive(Clone)]
pub enum InitialData {
    /// `y0(x) = Σ_k modes[k]·sin((k+1)πx)`.
    SineModes(Vec<f64>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl InitialData {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialData::SineModes(modes) => modes
                .iter()
                .enumerate()
                .map(|(k, b)| b * ((k + 1) as f64 * std::f64::consts::PI * x).sin())
                .sum(),
            InitialData::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::SineModes(m) => write!(f, "SineModes({m:?})"),
            InitialData::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Continuous problem data: the heat operator, the control support, the
/// initial datum, and the parameters of the quadratic functional.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    /// Diffusion coefficient `c > 0`.
    pub c: Coefficient,
    /// Zeroth-order potential `d`.
    pub d: Coefficient,
    /// Control support `ω = (a, b) ⊂ (0, 1)`.
    pub omega: (f64, f64),
    /// Final time `T`.
    pub t_final: f64,
    /// Initial datum.
    pub y0: InitialData,
    /// Terminal penalty `ε ≥ 0` (`ε = 0` only with the normalized form).
    pub epsilon: f64,
    /// Augmentation parameter `r > 0` of the least-squares term.
    pub r: f64,
    /// Norm parameter `η` (recorded for reporting; never assembled).
    pub eta: f64,
    /// Weight in the control term (`ρ0`).
    pub rho0: WeightSpec,
    /// Weight in the constraint term (`ρ`).
    pub rho: WeightSpec,
}

impl ProblemSpec {
    /// The data set of the reference experiments: `c = 0.1`, `d = 0`,
    /// `ω = (0.2, 0.5)`, `T = 1/2`, `y0(x) = sin(πx)`, standard weight pair,
    /// and `η = r`.
    pub fn baseline(epsilon: f64, r: f64) -> Self {
        let t_final = 0.5;
        let (rho0, rho) = WeightSpec::standard_pair(t_final);
        ProblemSpec {
            c: Coefficient::Const(0.1),
            d: Coefficient::Const(0.0),
            omega: (0.2, 0.5),
            t_final,
            y0: InitialData::SineModes(vec![1.0]),
            epsilon,
            r,
            eta: r,
            rho0,
            rho,
        }
    }

    /// Same data but with both weights ≡ 1 (used by quadrature-exactness
    /// tests: every integrand becomes polynomial).
    pub fn with_unit_weights(mut self) -> Self {
        self.rho0 = WeightSpec::unit(self.t_final);
        self.rho = WeightSpec::unit(self.t_final);
        self
    }

    pub fn validate(&self) -> Result<(), AssemblyError> {
        let (a, b) = self.omega;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return Err(AssemblyError::InvalidSupport(a, b));
        }
        if !(self.t_final > 0.0) {
            return Err(AssemblyError::InvalidTime(self.t_final));
        }
        if let Some(c) = self.c.as_const() {
            if c <= 0.0 {
                return Err(AssemblyError::NonPositiveDiffusion(c));
            }
        }
        if self.r <= 0.0 {
            return Err(AssemblyError::NonPositiveR(self.r));
        }
        if self.epsilon < 0.0 {
            return Err(AssemblyError::NegativeEpsilon(self.epsilon));
        }
        for w in [&self.rho0, &self.rho] {
            if w.t_final != self.t_final {
                return Err(AssemblyError::TimeMismatch {
                    weights: w.t_final,
                    problem: self.t_final,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("control support (a,b) = ({0}, {1}) must satisfy 0 <= a < b <= 1")]
    InvalidSupport(f64, f64),
    #[error("final time T = {0} must be positive")]
    InvalidTime(f64),
    #[error("diffusion coefficient must be positive, got {0}")]
    NonPositiveDiffusion(f64),
    #[error("augmentation parameter r must be positive, got {0} (the solve needs r > 0)")]
    NonPositiveR(f64),
    #[error("terminal penalty must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("epsilon = 0 is only supported by the normalized formulation (assemble_mf3norm)")]
    EpsilonZeroUnnormalized,
    #[error("the normalized formulation requires epsilon = 0, got {0}")]
    EpsilonNonZeroNormalized(f64),
    #[error("weights use T = {weights} but the problem uses T = {problem}")]
    TimeMismatch { weights: f64, problem: f64 },
    #[error("the time-marching solver needs a constant potential d")]
    VaryingPotentialUnsupported,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Knobs of the discretization that are not part of the continuous problem.
#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Gauss points per direction.
    pub quad_order: usize,
    /// Dirichlet treatment of the *primal* (φ or ψ) space. The multiplier
    /// space is fixed per formulation: unconstrained Q1 for MF1/MF3norm
    /// (an L²(Q_T) space has no trace), Q1 with eliminated lateral values
    /// for MF2 (conforming in L²(0,T;H¹₀)).
    pub phi_mode: DirichletMode,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Eliminate }
    }
}

/// Which mixed formulation a [`MixedSystem`] was assembled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Mf1,
    Mf2,
    Mf3Norm,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formulation::Mf1 => write!(f, "MF1"),
            Formulation::Mf2 => write!(f, "MF2"),
            Formulation::Mf3Norm => write!(f, "MF3norm"),
        }
    }
}

/// Assembled saddle-point system of one mixed formulation.
#[derive(Debug)]
pub struct MixedSystem {
    pub formulation: Formulation,
    pub mesh: SpaceTimeMesh,
    /// Dof map of the primal space (BFS for MF1/MF3norm, Q1 for MF2).
    pub phi_map: DofMap,
    /// Dof map of the multiplier space (always Q1).
    pub mult_map: DofMap,
    /// Sparse symmetric part of the primal form. For MF1/MF3norm this is
    /// the whole of `A`; for MF2 (`h1_augmented = true`) the full form is
    /// `A = a + r·BᵀJ⁻¹B`, applied through solves with `J`.
    pub a: SparseSym,
    /// Constraint matrix, multiplier-by-primal (`m × n`).
    pub b: SparseMat,
    /// Multiplier Gram matrix: Q1 mass on `Q_T` (MF1/MF3norm) or the
    /// `H¹₀ ⊗ L²` Gram (MF2), where it doubles as the Riesz map `Ŝ` of the
    /// augmentation.
    pub j: SparseSym,
    /// Load vector of the primal equation.
    pub l: Vec<f64>,
    pub epsilon: f64,
    pub r: f64,
    pub eta: f64,
    pub quad_order: usize,
    /// True iff `A` carries the implicit `r·BᵀJ⁻¹B` term (MF2).
    pub h1_augmented: bool,
    pub spec: ProblemSpec,
}

impl MixedSystem {
    /// Primal dimension `n_h`.
    pub fn n(&self) -> usize {
        self.phi_map.n_dofs
    }

    /// Multiplier dimension `m_h`.
    pub fn m(&self) -> usize {
        self.mult_map.n_dofs
    }
}

/// One quadrature point of a cached per-cell rule: reference coordinates
/// and the weight in physical measure.
#[derive(Clone, Copy)]
struct QPoint {
    xi: f64,
    tau: f64,
    w: f64,
}

/// Per-x-column quadrature rule for integrals over `ω ∩ cell`, exact with
/// respect to the ω endpoints. `None` when the column misses ω.
fn omega_column_rules(mesh: &SpaceTimeMesh, omega: (f64, f64), quad: &QuadRule) -> Vec<Option<Vec<QPoint>>> {
    let (a, b) = omega;
    let dx = mesh.dx;
    (0..mesh.nx)
        .map(|i| {
            let x0 = i as f64 * dx;
            let x1 = x0 + dx;
            let s = a.max(x0);
            let e = b.min(x1);
            if e - s <= 1e-14 * dx {
                return None;
            }
            let mut pts = Vec::with_capacity(quad.order * quad.order);
            for (k, &u) in quad.nodes.iter().enumerate() {
                let xi = (s - x0 + u * (e - s)) / dx;
                let wx = quad.weights[k] * (e - s);
                for (l, &tau) in quad.nodes.iter().enumerate() {
                    pts.push(QPoint { xi, tau, w: wx * quad.weights[l] * mesh.dt });
                }
            }
            Some(pts)
        })
        .collect()
}

/// Scatter a dense symmetric local block (lower triangle filled) into a
/// lower-triangle triplet builder.
fn scatter_sym(builder: &mut TripletBuilder, dofs: &[Option<usize>], loc: impl Fn(usize, usize) -> f64) {
    for p in 0..dofs.len() {
        let Some(gp) = dofs[p] else { continue };
        for q in 0..=p {
            let Some(gq) = dofs[q] else { continue };
            let v = loc(p, q);
            let (row, col) = if gp >= gq { (gp, gq) } else { (gq, gp) };
            builder.push(row, col, v);
        }
    }
}

/// BFS shape table at a list of points (physical derivatives).
fn bfs_table(pts: &[QPoint], dx: f64, dt: f64) -> Vec<[ShapeEval; 16]> {
    pts.iter()
        .map(|p| {
            let mut row = [ShapeEval::default(); 16];
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = bfs_shape(k, p.xi, p.tau, dx, dt).expect("valid shape index");
            }
            row
        })
        .collect()
}

/// Q1 shape table at a list of points: `(value, ∂x, ∂t)` physical.
fn q1_table(pts: &[QPoint], dx: f64, dt: f64) -> Vec<[(f64, f64, f64); 4]> {
    pts.iter()
        .map(|p| {
            let mut row = [(0.0, 0.0, 0.0); 4];
            for (k, slot) in row.iter_mut().enumerate() {
                let (v, dxi, dtau) = q1_shape(k, p.xi, p.tau).expect("valid shape index");
                *slot = (v, dxi / dx, dtau / dt);
            }
            row
        })
        .collect()
}

/// Full-cell tensor rule in physical measure.
fn full_cell_rule(mesh: &SpaceTimeMesh, quad: &QuadRule) -> Vec<QPoint> {
    quad.points()
        .map(|(xi, tau, w)| QPoint { xi, tau, w: w * mesh.dx * mesh.dt })
        .collect()
}

/// 1D edge rule at fixed `τ` (physical x-measure).
fn edge_rule(mesh: &SpaceTimeMesh, quad: &QuadRule, tau: f64) -> Vec<QPoint> {
    quad.nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&u, &w)| QPoint { xi: u, tau, w: w * mesh.dx })
        .collect()
}

/// Assembles the C¹/Q1 mixed formulation with terminal penalty `ε > 0`.
pub fn assemble_mf1(
    mesh: &SpaceTimeMesh,
    spec: &ProblemSpec,
    opts: &AssemblyOptions,
) -> Result<MixedSystem, AssemblyError> {
    spec.validate()?;
    if spec.epsilon == 0.0 {
        return Err(AssemblyError::EpsilonZeroUnnormalized);
    }
    let phi_map = DofMap::new(mesh, FemSpace::Bfs, opts.phi_mode);
    let mult_map = DofMap::new(mesh, FemSpace::Q1, DirichletMode::Keep);
    let quad = QuadRule::gauss(opts.quad_order);
    let (dx, dt) = (mesh.dx, mesh.dt);

    let full = full_cell_rule(mesh, &quad);
    let full_bfs = bfs_table(&full, dx, dt);
    let full_q1 = q1_table(&full, dx, dt);
    let omega_cols = omega_column_rules(mesh, spec.omega, &quad);
    let omega_bfs: Vec<Option<Vec<[ShapeEval; 16]>>> =
        omega_cols.iter().map(|c| c.as_ref().map(|pts| bfs_table(pts, dx, dt))).collect();
    let top = edge_rule(mesh, &quad, 1.0);
    let top_bfs = bfs_table(&top, dx, dt);
    let bottom = edge_rule(mesh, &quad, 0.0);
    let bottom_bfs = bfs_table(&bottom, dx, dt);

    let n = phi_map.n_dofs;
    let m = mult_map.n_dofs;
    let mut ta = TripletBuilder::new();
    let mut tb = TripletBuilder::new();
    let mut tj = TripletBuilder::new();
    let mut l = vec![0.0; n];

    for e in 0..mesh.cell_count() {
        let (i, nrow) = mesh.cell_origin(e);
        let (x0, t0) = mesh.cell_corner(e);
        let pdofs = phi_map.cell_dofs(mesh, e);
        let mdofs = mult_map.cell_dofs(mesh, e);

        let mut a_loc = [[0.0f64; 16]; 16];
        let mut b_loc = [[0.0f64; 16]; 4];
        let mut j_loc = [[0.0f64; 4]; 4];

        // Least-squares term r·L*φ·L*φ̄, constraint −L*φ·λ, multiplier mass.
        for (pt_idx, pt) in full.iter().enumerate() {
            let x = x0 + pt.xi * dx;
            let t = t0 + pt.tau * dt;
            let sh = &full_bfs[pt_idx];
            let qv = &full_q1[pt_idx];
            let c = spec.c.eval(x, t);
            let c_x = spec.c.eval_dx(x, t);
            let d = spec.d.eval(x, t);
            let mut ls = [0.0f64; 16];
            for (k, s) in sh.iter().enumerate() {
                ls[k] = -s.dt - c * s.dxx - c_x * s.dx + d * s.value;
            }
            for p in 0..16 {
                let wp = spec.r * pt.w * ls[p];
                for q in 0..=p {
                    a_loc[p][q] += wp * ls[q];
                }
            }
            for mm in 0..4 {
                let wm = pt.w * qv[mm].0;
                for p in 0..16 {
                    b_loc[mm][p] -= wm * ls[p];
                }
                for m2 in 0..=mm {
                    j_loc[mm][m2] += wm * qv[m2].0;
                }
            }
        }

        // Control-window term ∬_{q_T} ρ0⁻² φ φ̄.
        if let (Some(pts), Some(tables)) = (&omega_cols[i], &omega_bfs[i]) {
            for (pt, sh) in pts.iter().zip(tables) {
                let t = t0 + pt.tau * dt;
                let w0i = spec.rho0.eval_inv(t)?;
                let wgt = pt.w * w0i * w0i;
                for p in 0..16 {
                    let wp = wgt * sh[p].value;
                    for q in 0..=p {
                        a_loc[p][q] += wp * sh[q].value;
                    }
                }
            }
        }

        // Terminal term ε(φ(·,T), φ̄(·,T)) on the top edge.
        if nrow == mesh.nt - 1 {
            for (pt, sh) in top.iter().zip(&top_bfs) {
                let wgt = spec.epsilon * pt.w;
                for p in 0..16 {
                    let wp = wgt * sh[p].value;
                    for q in 0..=p {
                        a_loc[p][q] += wp * sh[q].value;
                    }
                }
            }
        }

        // Load −(y0, φ(·,0)) on the bottom edge.
        if nrow == 0 {
            for (pt, sh) in bottom.iter().zip(&bottom_bfs) {
                let x = x0 + pt.xi * dx;
                let y0 = spec.y0.eval(x);
                for p in 0..16 {
                    if let Some(g) = pdofs[p] {
                        l[g] -= pt.w * y0 * sh[p].value;
                    }
                }
            }
        }

        scatter_sym(&mut ta, &pdofs, |p, q| a_loc[p][q]);
        scatter_sym(&mut tj, &mdofs, |p, q| j_loc[p][q]);
        for (mm, row) in b_loc.iter().enumerate() {
            let Some(gm) = mdofs[mm] else { continue };
            for (p, &v) in row.iter().enumerate() {
                if let Some(gp) = pdofs[p] {
                    tb.push(gm, gp, v);
                }
            }
        }
    }

    Ok(MixedSystem {
        formulation: Formulation::Mf1,
        mesh: *mesh,
        phi_map,
        mult_map,
        a: ta.build_sym_lower(n)?,
        b: tb.build(m, n)?,
        j: tj.build_sym_lower(m)?,
        l,
        epsilon: spec.epsilon,
        r: spec.r,
        eta: spec.eta,
        quad_order: opts.quad_order,
        h1_augmented: false,
        spec: spec.clone(),
    })
}

/// Assembles the normalized (ε = 0) formulation in the variable
/// `ψ = ρ0⁻¹φ`.
pub fn assemble_mf3norm(
    mesh: &SpaceTimeMesh,
    spec: &ProblemSpec,
    opts: &AssemblyOptions,
) -> Result<MixedSystem, AssemblyError> {
    spec.validate()?;
    if spec.epsilon != 0.0 {
        return Err(AssemblyError::EpsilonNonZeroNormalized(spec.epsilon));
    }
    let phi_map = DofMap::new(mesh, FemSpace::Bfs, opts.phi_mode);
    let mult_map = DofMap::new(mesh, FemSpace::Q1, DirichletMode::Keep);
    let quad = QuadRule::gauss(opts.quad_order);
    let (dx, dt) = (mesh.dx, mesh.dt);

    let full = full_cell_rule(mesh, &quad);
    let full_bfs = bfs_table(&full, dx, dt);
    let full_q1 = q1_table(&full, dx, dt);
    let omega_cols = omega_column_rules(mesh, spec.omega, &quad);
    let omega_bfs: Vec<Option<Vec<[ShapeEval; 16]>>> =
        omega_cols.iter().map(|c| c.as_ref().map(|pts| bfs_table(pts, dx, dt))).collect();
    let bottom = edge_rule(mesh, &quad, 0.0);
    let bottom_bfs = bfs_table(&bottom, dx, dt);
    let rho0_at_0 = spec.rho0.eval(0.0)?;

    let n = phi_map.n_dofs;
    let m = mult_map.n_dofs;
    let mut ta = TripletBuilder::new();
    let mut tb = TripletBuilder::new();
    let mut tj = TripletBuilder::new();
    let mut l = vec![0.0; n];

    for e in 0..mesh.cell_count() {
        let (i, nrow) = mesh.cell_origin(e);
        let (x0, t0) = mesh.cell_corner(e);
        let pdofs = phi_map.cell_dofs(mesh, e);
        let mdofs = mult_map.cell_dofs(mesh, e);

        let mut a_loc = [[0.0f64; 16]; 16];
        let mut b_loc = [[0.0f64; 16]; 4];
        let mut j_loc = [[0.0f64; 4]; 4];

        for (pt_idx, pt) in full.iter().enumerate() {
            let x = x0 + pt.xi * dx;
            let t = t0 + pt.tau * dt;
            let sh = &full_bfs[pt_idx];
            let qv = &full_q1[pt_idx];
            let c = spec.c.eval(x, t);
            let c_x = spec.c.eval_dx(x, t);
            let d = spec.d.eval(x, t);
            let (alpha1, alpha0) = spec.rho0.normalized_coeffs(&spec.rho, t)?;
            let mut wv = [0.0f64; 16];
            for (k, s) in sh.iter().enumerate() {
                let lstar = -s.dt - c * s.dxx - c_x * s.dx + d * s.value;
                wv[k] = alpha1 * lstar + alpha0 * s.value;
            }
            for p in 0..16 {
                let wp = spec.r * pt.w * wv[p];
                for q in 0..=p {
                    a_loc[p][q] += wp * wv[q];
                }
            }
            for mm in 0..4 {
                let wm = pt.w * qv[mm].0;
                for p in 0..16 {
                    b_loc[mm][p] -= wm * wv[p];
                }
                for m2 in 0..=mm {
                    j_loc[mm][m2] += wm * qv[m2].0;
                }
            }
        }

        // Unweighted control-window mass ∬_{q_T} ψ ψ̄.
        if let (Some(pts), Some(tables)) = (&omega_cols[i], &omega_bfs[i]) {
            for (pt, sh) in pts.iter().zip(tables) {
                for p in 0..16 {
                    let wp = pt.w * sh[p].value;
                    for q in 0..=p {
                        a_loc[p][q] += wp * sh[q].value;
                    }
                }
            }
        }

        // Load −(y0, ρ0(·,0) ψ(·,0)).
        if nrow == 0 {
            for (pt, sh) in bottom.iter().zip(&bottom_bfs) {
                let x = x0 + pt.xi * dx;
                let y0 = spec.y0.eval(x);
                for p in 0..16 {
                    if let Some(g) = pdofs[p] {
                        l[g] -= pt.w * y0 * rho0_at_0 * sh[p].value;
                    }
                }
            }
        }

        scatter_sym(&mut ta, &pdofs, |p, q| a_loc[p][q]);
        scatter_sym(&mut tj, &mdofs, |p, q| j_loc[p][q]);
        for (mm, row) in b_loc.iter().enumerate() {
            let Some(gm) = mdofs[mm] else { continue };
            for (p, &v) in row.iter().enumerate() {
                if let Some(gp) = pdofs[p] {
                    tb.push(gm, gp, v);
                }
            }
        }
    }

    Ok(MixedSystem {
        formulation: Formulation::Mf3Norm,
        mesh: *mesh,
        phi_map,
        mult_map,
        a: ta.build_sym_lower(n)?,
        b: tb.build(m, n)?,
        j: tj.build_sym_lower(m)?,
        l,
        epsilon: 0.0,
        r: spec.r,
        eta: spec.eta,
        quad_order: opts.quad_order,
        h1_augmented: false,
        spec: spec.clone(),
    })
}

/// Assembles the Q1/Q1 formulation with the constraint tested in
/// `L²(0,T;H¹₀)'`.
pub fn assemble_mf2(
    mesh: &SpaceTimeMesh,
    spec: &ProblemSpec,
    opts: &AssemblyOptions,
) -> Result<MixedSystem, AssemblyError> {
    spec.validate()?;
    if spec.epsilon == 0.0 {
        return Err(AssemblyError::EpsilonZeroUnnormalized);
    }
    let phi_map = DofMap::new(mesh, FemSpace::Q1, opts.phi_mode);
    let mult_map = DofMap::new(mesh, FemSpace::Q1, DirichletMode::Eliminate);
    let quad = QuadRule::gauss(opts.quad_order);
    let (dx, dt) = (mesh.dx, mesh.dt);

    let full = full_cell_rule(mesh, &quad);
    let full_q1 = q1_table(&full, dx, dt);
    let omega_cols = omega_column_rules(mesh, spec.omega, &quad);
    let omega_q1: Vec<Option<Vec<[(f64, f64, f64); 4]>>> =
        omega_cols.iter().map(|c| c.as_ref().map(|pts| q1_table(pts, dx, dt))).collect();
    let top = edge_rule(mesh, &quad, 1.0);
    let top_q1 = q1_table(&top, dx, dt);
    let bottom = edge_rule(mesh, &quad, 0.0);
    let bottom_q1 = q1_table(&bottom, dx, dt);

    let n = phi_map.n_dofs;
    let m = mult_map.n_dofs;
    let mut ta = TripletBuilder::new();
    let mut tb = TripletBuilder::new();
    let mut tj = TripletBuilder::new();
    let mut l = vec![0.0; n];

    for e in 0..mesh.cell_count() {
        let (i, nrow) = mesh.cell_origin(e);
        let (x0, t0) = mesh.cell_corner(e);
        let pdofs = phi_map.cell_dofs(mesh, e);
        let mdofs = mult_map.cell_dofs(mesh, e);

        let mut a_loc = [[0.0f64; 4]; 4];
        let mut b_loc = [[0.0f64; 4]; 4];
        let mut j_loc = [[0.0f64; 4]; 4];

        // Constraint b̂(φ,λ) = ∬ φ_t λ − c φ_x λ_x − d φ λ and the
        // H¹₀ ⊗ L² multiplier Gram.
        for (pt_idx, pt) in full.iter().enumerate() {
            let x = x0 + pt.xi * dx;
            let t = t0 + pt.tau * dt;
            let qv = &full_q1[pt_idx];
            let c = spec.c.eval(x, t);
            let d = spec.d.eval(x, t);
            for mm in 0..4 {
                let (lv, ldx, _) = qv[mm];
                for p in 0..4 {
                    let (pv, pdx, pdt) = qv[p];
                    b_loc[mm][p] += pt.w * (pdt * lv - c * pdx * ldx - d * pv * lv);
                }
                for m2 in 0..=mm {
                    j_loc[mm][m2] += pt.w * ldx * qv[m2].1;
                }
            }
        }

        // Weighted control-window mass.
        if let (Some(pts), Some(tables)) = (&omega_cols[i], &omega_q1[i]) {
            for (pt, sh) in pts.iter().zip(tables) {
                let t = t0 + pt.tau * dt;
                let w0i = spec.rho0.eval_inv(t)?;
                let wgt = pt.w * w0i * w0i;
                for p in 0..4 {
                    let wp = wgt * sh[p].0;
                    for q in 0..=p {
                        a_loc[p][q] += wp * sh[q].0;
                    }
                }
            }
        }

        // Terminal term.
        if nrow == mesh.nt - 1 {
            for (pt, sh) in top.iter().zip(&top_q1) {
                let wgt = spec.epsilon * pt.w;
                for p in 0..4 {
                    let wp = wgt * sh[p].0;
                    for q in 0..=p {
                        a_loc[p][q] += wp * sh[q].0;
                    }
                }
            }
        }

        // Load.
        if nrow == 0 {
            for (pt, sh) in bottom.iter().zip(&bottom_q1) {
                let x = x0 + pt.xi * dx;
                let y0 = spec.y0.eval(x);
                for p in 0..4 {
                    if let Some(g) = pdofs[p] {
                        l[g] -= pt.w * y0 * sh[p].0;
                    }
                }
            }
        }

        scatter_sym(&mut ta, &pdofs, |p, q| a_loc[p][q]);
        scatter_sym(&mut tj, &mdofs, |p, q| j_loc[p][q]);
        for (mm, row) in b_loc.iter().enumerate() {
            let Some(gm) = mdofs[mm] else { continue };
            for (p, &v) in row.iter().enumerate() {
                if let Some(gp) = pdofs[p] {
                    tb.push(gm, gp, v);
                }
            }
        }
    }

    Ok(MixedSystem {
        formulation: Formulation::Mf2,
        mesh: *mesh,
        phi_map,
        mult_map,
        a: ta.build_sym_lower(n)?,
        b: tb.build(m, n)?,
        j: tj.build_sym_lower(m)?,
        l,
        epsilon: spec.epsilon,
        r: spec.r,
        eta: spec.eta,
        quad_order: opts.quad_order,
        h1_augmented: true,
        spec: spec.clone(),
    })
}

/// Mass and stiffness-plus-potential matrices of the 1D C¹ Hermite space
/// used by the time-marching verification solver.
#[derive(Debug)]
pub struct ForwardMatrices {
    pub space: Hermite1dSpace,
    /// `M[i][j] = ∫ ψ_i ψ_j`.
    pub mass: SparseSym,
    /// `K[i][j] = ∫ c ψ_i' ψ_j' + ∫ d ψ_i ψ_j` (constant-in-time
    /// coefficients).
    pub stiff: SparseSym,
}

/// Assembles the 1D matrices on `Nx_f` cells with homogeneous Dirichlet
/// conditions.
pub fn assemble_forward(
    nx_f: usize,
    spec: &ProblemSpec,
    quad_order: usize,
) -> Result<ForwardMatrices, AssemblyError> {
    spec.validate()?;
    let d = match spec.d {
        Coefficient::Const(v) => v,
        Coefficient::Varying { .. } => return Err(AssemblyError::VaryingPotentialUnsupported),
    };
    let space = Hermite1dSpace::new(nx_f)?;
    let (mass, stiff) = hermite_matrices(&space, &spec.c, d, quad_order)?;
    Ok(ForwardMatrices { space, mass, stiff })
}

/// Shared 1D assembly over a Hermite space (masked or free).
fn hermite_matrices(
    space: &Hermite1dSpace,
    c: &Coefficient,
    d: f64,
    quad_order: usize,
) -> Result<(SparseSym, SparseSym), AssemblyError> {
    let quad = QuadRule::gauss(quad_order);
    let dx = space.dx;
    let n = space.n_dofs;
    let mut tm = TripletBuilder::new();
    let mut tk = TripletBuilder::new();
    for e in 0..space.nx {
        let dofs = space.cell_dofs(e);
        let x0 = e as f64 * dx;
        let mut m_loc = [[0.0f64; 4]; 4];
        let mut k_loc = [[0.0f64; 4]; 4];
        for (k, &u) in quad.nodes.iter().enumerate() {
            let w = quad.weights[k] * dx;
            let x = x0 + u * dx;
            let cv = c.eval(x, 0.0);
            let sh = space.shapes(u);
            for p in 0..4 {
                for q in 0..=p {
                    m_loc[p][q] += w * sh[p].0 * sh[q].0;
                    k_loc[p][q] += w * (cv * sh[p].1 * sh[q].1 + d * sh[p].0 * sh[q].0);
                }
            }
        }
        scatter_sym(&mut tm, &dofs.map(Some).map(|o| o.flatten()), |p, q| m_loc[p][q]);
        scatter_sym(&mut tk, &dofs.map(Some).map(|o| o.flatten()), |p, q| k_loc[p][q]);
    }
    Ok((tm.build_sym_lower(n)?, tk.build_sym_lower(n)?))
}

/// Mass matrix of a (possibly free) Hermite space, for quadrature checks.
pub fn hermite_mass(space: &Hermite1dSpace, quad_order: usize) -> Result<SparseSym, AssemblyError> {
    let (mass, _) = hermite_matrices(space, &Coefficient::Const(1.0), 0.0, quad_order)?;
    Ok(mass)
}

/// Load vector `∫_ω f(x) ψ_i(x) dx`, splitting cells at the ω endpoints.
pub fn control_load(
    space: &Hermite1dSpace,
    omega: (f64, f64),
    quad_order: usize,
    f: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let quad = QuadRule::gauss(quad_order);
    let dx = space.dx;
    let mut l = vec![0.0; space.n_dofs];
    for e in 0..space.nx {
        let x0 = e as f64 * dx;
        let x1 = x0 + dx;
        let s = omega.0.max(x0);
        let en = omega.1.min(x1);
        if en - s <= 1e-14 * dx {
            continue;
        }
        let dofs = space.cell_dofs(e);
        for (k, &u) in quad.nodes.iter().enumerate() {
            let x = s + u * (en - s);
            let w = quad.weights[k] * (en - s);
            let sh = space.shapes((x - x0) / dx);
            let fv = f(x);
            for p in 0..4 {
                if let Some(g) = dofs[p] {
                    l[g] += w * fv * sh[p].0;
                }
            }
        }
    }
    l
}

/// Load vector `∫₀¹ f(x) ψ_i(x) dx` over the whole domain.
pub fn line_load(space: &Hermite1dSpace, quad_order: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    control_load(space, (0.0, 1.0), quad_order, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::extreme_eigen;
    use crate::mesh::DofKind;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    fn sym_to_map(s: &SparseSym) -> HashMap<(usize, usize), f64> {
        let mut map = HashMap::new();
        for (i, j, v) in s.entries_lower() {
            map.insert((i, j), v);
            map.insert((j, i), v);
        }
        map
    }

    fn mat_to_map(s: &SparseMat) -> HashMap<(usize, usize), f64> {
        s.entries().map(|(i, j, v)| ((i, j), v)).collect()
    }

    fn max_abs(m: &[Vec<f64>]) -> f64 {
        m.iter().flat_map(|r| r.iter()).fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    fn compare_dense(map: &HashMap<(usize, usize), f64>, dense: &[Vec<f64>], tol: f64, label: &str) {
        let scale = 1.0 + max_abs(dense);
        for (i, row) in dense.iter().enumerate() {
            for (j, &dv) in row.iter().enumerate() {
                let sv = map.get(&(i, j)).copied().unwrap_or(0.0);
                assert!(
                    (sv - dv).abs() <= tol * scale,
                    "{label}[{i}][{j}]: sparse {sv:.16e} vs dense {dv:.16e}"
                );
            }
        }
    }

    /// Interpolant of the constant 1 in a BFS dof vector (value dofs 1,
    /// derivative dofs 0); panics if a value dof is masked.
    fn bfs_one(mesh: &SpaceTimeMesh, map: &DofMap) -> Vec<f64> {
        let mut v = vec![0.0; map.n_dofs];
        for node in 0..mesh.node_count() {
            let g = map.global(node, DofKind::Value).expect("value dof present");
            v[g] = 1.0;
        }
        v
    }

    /// Brute-force dense assembly of MF1 with straightforward loops:
    /// dense scatter (both triangles), fresh shape evaluations, and its own
    /// handling of the ω window and the edge terms.
    fn dense_mf1(
        mesh: &SpaceTimeMesh,
        spec: &ProblemSpec,
        phi_map: &DofMap,
        mult_map: &DofMap,
        q: usize,
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let quad = QuadRule::gauss(q);
        let n = phi_map.n_dofs;
        let m = mult_map.n_dofs;
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![vec![0.0; n]; m];
        let mut j = vec![vec![0.0; m]; m];
        let mut l = vec![0.0; n];
        let (dx, dt) = (mesh.dx, mesh.dt);
        let c = spec.c.as_const().unwrap();
        let d = spec.d.as_const().unwrap();
        for e in 0..mesh.cell_count() {
            let (_, nrow) = mesh.cell_origin(e);
            let (x0, t0) = mesh.cell_corner(e);
            let pd = phi_map.cell_dofs(mesh, e);
            let md = mult_map.cell_dofs(mesh, e);
            // Full-cell terms.
            for (xi, tau, w) in quad.points() {
                let w = w * dx * dt;
                let t = t0 + tau * dt;
                let mut ls = [0.0; 16];
                let mut qv = [0.0; 4];
                for k in 0..16 {
                    let s = bfs_shape(k, xi, tau, dx, dt).unwrap();
                    ls[k] = -s.dt - c * s.dxx + d * s.value;
                }
                for k in 0..4 {
                    qv[k] = q1_shape(k, xi, tau).unwrap().0;
                }
                let _ = t;
                for p in 0..16 {
                    for qq in 0..16 {
                        if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                            a[gp][gq] += spec.r * w * ls[p] * ls[qq];
                        }
                    }
                }
                for mm in 0..4 {
                    for p in 0..16 {
                        if let (Some(gm), Some(gp)) = (md[mm], pd[p]) {
                            b[gm][gp] -= w * qv[mm] * ls[p];
                        }
                    }
                    for m2 in 0..4 {
                        if let (Some(g1), Some(g2)) = (md[mm], md[m2]) {
                            j[g1][g2] += w * qv[mm] * qv[m2];
                        }
                    }
                }
            }
            // ω window term.
            let s = spec.omega.0.max(x0);
            let en = spec.omega.1.min(x0 + dx);
            if en - s > 1e-14 {
                for (kx, &ux) in quad.nodes.iter().enumerate() {
                    let x = s + ux * (en - s);
                    let xi = (x - x0) / dx;
                    for (kt, &tau) in quad.nodes.iter().enumerate() {
                        let t = t0 + tau * dt;
                        let w = quad.weights[kx] * (en - s) * quad.weights[kt] * dt;
                        let w0i = spec.rho0.eval_inv(t).unwrap();
                        for p in 0..16 {
                            for qq in 0..16 {
                                if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                                    let vp = bfs_shape(p, xi, tau, dx, dt).unwrap().value;
                                    let vq = bfs_shape(qq, xi, tau, dx, dt).unwrap().value;
                                    a[gp][gq] += w * w0i * w0i * vp * vq;
                                }
                            }
                        }
                    }
                }
            }
            // Terminal term.
            if nrow == mesh.nt - 1 {
                for (k, &u) in quad.nodes.iter().enumerate() {
                    let w = quad.weights[k] * dx;
                    for p in 0..16 {
                        for qq in 0..16 {
                            if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                                let vp = bfs_shape(p, u, 1.0, dx, dt).unwrap().value;
                                let vq = bfs_shape(qq, u, 1.0, dx, dt).unwrap().value;
                                a[gp][gq] += spec.epsilon * w * vp * vq;
                            }
                        }
                    }
                }
            }
            // Load.
            if nrow == 0 {
                for (k, &u) in quad.nodes.iter().enumerate() {
                    let w = quad.weights[k] * dx;
                    let x = x0 + u * dx;
                    for p in 0..16 {
                        if let Some(gp) = pd[p] {
                            let vp = bfs_shape(p, u, 0.0, dx, dt).unwrap().value;
                            l[gp] -= w * spec.y0.eval(x) * vp;
                        }
                    }
                }
            }
        }
        (a, b, j, l)
    }

    #[test]
    fn multiplier_mass_measures_cylinder() {
        let mesh = SpaceTimeMesh::new(3, 2, 0.5).unwrap();
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let sys = assemble_mf1(&mesh, &spec, &AssemblyOptions::default()).unwrap();
        let ones = vec![1.0; sys.m()];
        assert_relative_eq!(sys.j.quad_form(&ones), 0.5, max_relative = 1e-13);
    }

    #[test]
    fn zero_initial_datum_gives_zero_load() {
        let mesh = SpaceTimeMesh::new(3, 2, 0.5).unwrap();
        let opts = AssemblyOptions::default();
        let mut spec = ProblemSpec::baseline(1e-2, 1.0);
        spec.y0 = InitialData::SineModes(vec![]);
        let mf1 = assemble_mf1(&mesh, &spec, &opts).unwrap();
        assert!(mf1.l.iter().all(|&v| v == 0.0));
        let mf2 = assemble_mf2(&mesh, &spec, &opts).unwrap();
        assert!(mf2.l.iter().all(|&v| v == 0.0));
        spec.epsilon = 0.0;
        let mf3 = assemble_mf3norm(&mesh, &spec, &opts).unwrap();
        assert!(mf3.l.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parameter_validation_rejects_bad_data() {
        let mesh = SpaceTimeMesh::new(3, 2, 0.5).unwrap();
        let opts = AssemblyOptions::default();
        let mut spec = ProblemSpec::baseline(1e-2, 1.0);
        spec.r = 0.0;
        assert!(matches!(
            assemble_mf1(&mesh, &spec, &opts),
            Err(AssemblyError::NonPositiveR(_))
        ));
        let mut spec = ProblemSpec::baseline(0.0, 1.0);
        spec.epsilon = 0.0;
        assert!(matches!(
            assemble_mf1(&mesh, &spec, &opts),
            Err(AssemblyError::EpsilonZeroUnnormalized)
        ));
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        assert!(matches!(
            assemble_mf3norm(&mesh, &spec, &opts),
            Err(AssemblyError::EpsilonNonZeroNormalized(_))
        ));
        let mut spec = ProblemSpec::baseline(1e-2, 1.0);
        spec.omega = (0.7, 0.3);
        assert!(matches!(
            assemble_mf2(&mesh, &spec, &opts),
            Err(AssemblyError::InvalidSupport(..))
        ));
    }

    /// With unit weights, d = 0 and the interpolant of the constant 1
    /// (which satisfies L*1 = 0), the quadratic form reduces to the area of
    /// the control window plus the terminal penalty — an exact probe of the
    /// straddling-cell splitting.
    #[test]
    fn constant_field_isolates_control_window_mass() {
        let mesh = SpaceTimeMesh::new(5, 1, 0.5).unwrap();
        let mut spec = ProblemSpec::baseline(0.7, 1.0).with_unit_weights();
        spec.omega = (0.25, 0.55);
        let opts = AssemblyOptions { quad_order: 6, phi_mode: DirichletMode::Keep };
        let sys = assemble_mf1(&mesh, &spec, &opts).unwrap();
        let one = bfs_one(&mesh, &sys.phi_map);
        // (0.55−0.25)·T + ε·1
        assert_relative_eq!(sys.a.quad_form(&one), 0.3 * 0.5 + 0.7, max_relative = 1e-13);
        // l(1) = −∫ sin(πx) = −2/π.
        let lv: f64 = one.iter().zip(&sys.l).map(|(a, b)| a * b).sum();
        assert_relative_eq!(lv, -2.0 / std::f64::consts::PI, max_relative = 1e-10);
    }

    #[test]
    fn mf1_matches_dense_oracle_on_smallest_mesh() {
        let mesh = SpaceTimeMesh::new(2, 1, 0.5).unwrap();
        let mut spec = ProblemSpec::baseline(1.0, 1.0).with_unit_weights();
        // Polynomial initial datum, so the load is also quadrature-exact.
        spec.y0 = InitialData::Custom(Arc::new(|x| x * (1.0 - x)));
        for phi_mode in [DirichletMode::Keep, DirichletMode::Eliminate] {
            let opts = AssemblyOptions { quad_order: 4, phi_mode };
            let sys = assemble_mf1(&mesh, &spec, &opts).unwrap();
            // Unit weights make every integrand polynomial, so the q = 8
            // oracle and the q = 4 assembly must both be exact.
            let (da, db, dj, dl) = dense_mf1(&mesh, &spec, &sys.phi_map, &sys.mult_map, 8);
            compare_dense(&sym_to_map(&sys.a), &da, 1e-12, "A");
            compare_dense(&mat_to_map(&sys.b), &db, 1e-12, "B");
            compare_dense(&sym_to_map(&sys.j), &dj, 1e-12, "J");
            for (g, (&sv, &dv)) in sys.l.iter().zip(&dl).enumerate() {
                assert!((sv - dv).abs() < 1e-12, "L[{g}]: {sv} vs {dv}");
            }
        }
    }

    #[test]
    fn mf1_matches_dense_oracle_with_real_weights() {
        let mesh = SpaceTimeMesh::new(3, 2, 0.5).unwrap();
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let opts = AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Eliminate };
        let sys = assemble_mf1(&mesh, &spec, &opts).unwrap();
        // Same quadrature order on both sides: checks tables, splitting and
        // scatter, independent of the quadrature choice itself.
        let (da, db, dj, dl) = dense_mf1(&mesh, &spec, &sys.phi_map, &sys.mult_map, 4);
        compare_dense(&sym_to_map(&sys.a), &da, 1e-12, "A");
        compare_dense(&mat_to_map(&sys.b), &db, 1e-12, "B");
        compare_dense(&sym_to_map(&sys.j), &dj, 1e-12, "J");
        for (g, (&sv, &dv)) in sys.l.iter().zip(&dl).enumerate() {
            assert!((sv - dv).abs() < 1e-12, "L[{g}]: {sv} vs {dv}");
        }
    }

    /// Dense oracle for the normalized form, with the time coefficients
    /// written out explicitly for T = 1/2, K1 = 3/4 — an independent check
    /// of the product-rule cancellation used by `normalized_coeffs`:
    /// α1 = (T−t)^{3/2}, α0 = (3/2)(T−t)^{1/2} − (3/4)(T−t)^{-1/2}.
    #[test]
    fn mf3_matches_dense_oracle_on_smallest_mesh() {
        let mesh = SpaceTimeMesh::new(2, 1, 0.5).unwrap();
        let spec = ProblemSpec::baseline(0.0, 1.0);
        let opts = AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Eliminate };
        let sys = assemble_mf3norm(&mesh, &spec, &opts).unwrap();
        let quad = QuadRule::gauss(4);
        let (dx, dt) = (mesh.dx, mesh.dt);
        let n = sys.n();
        let m = sys.m();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![vec![0.0; n]; m];
        let mut l = vec![0.0; n];
        let c = 0.1;
        for e in 0..mesh.cell_count() {
            let (_, nrow) = mesh.cell_origin(e);
            let (x0, t0) = mesh.cell_corner(e);
            let pd = sys.phi_map.cell_dofs(&mesh, e);
            let md = sys.mult_map.cell_dofs(&mesh, e);
            for (xi, tau, w) in quad.points() {
                let w = w * dx * dt;
                let t = t0 + tau * dt;
                let u = 0.5 - t;
                let alpha1 = u.powf(1.5);
                let alpha0 = 1.5 * u.sqrt() - 0.75 / u.sqrt();
                let mut wv = [0.0; 16];
                for k in 0..16 {
                    let s = bfs_shape(k, xi, tau, dx, dt).unwrap();
                    wv[k] = alpha1 * (-s.dt - c * s.dxx) + alpha0 * s.value;
                }
                for p in 0..16 {
                    for qq in 0..16 {
                        if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                            a[gp][gq] += w * wv[p] * wv[qq];
                        }
                    }
                }
                for mm in 0..4 {
                    if let Some(gm) = md[mm] {
                        let qv = q1_shape(mm, xi, tau).unwrap().0;
                        for p in 0..16 {
                            if let Some(gp) = pd[p] {
                                b[gm][gp] -= w * qv * wv[p];
                            }
                        }
                    }
                }
            }
            let s = spec.omega.0.max(x0);
            let en = spec.omega.1.min(x0 + dx);
            if en - s > 1e-14 {
                for (kx, &ux) in quad.nodes.iter().enumerate() {
                    let x = s + ux * (en - s);
                    let xi = (x - x0) / dx;
                    for (kt, &tau) in quad.nodes.iter().enumerate() {
                        let w = quad.weights[kx] * (en - s) * quad.weights[kt] * dt;
                        for p in 0..16 {
                            for qq in 0..16 {
                                if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                                    let vp = bfs_shape(p, xi, tau, dx, dt).unwrap().value;
                                    let vq = bfs_shape(qq, xi, tau, dx, dt).unwrap().value;
                                    a[gp][gq] += w * vp * vq;
                                }
                            }
                        }
                    }
                }
            }
            if nrow == 0 {
                let rho0_at_0 = 0.5f64.powf(1.5) * (0.75 / 0.5f64).exp();
                for (k, &u) in quad.nodes.iter().enumerate() {
                    let w = quad.weights[k] * dx;
                    let x = x0 + u * dx;
                    for p in 0..16 {
                        if let Some(gp) = pd[p] {
                            let vp = bfs_shape(p, u, 0.0, dx, dt).unwrap().value;
                            l[gp] -= w * (std::f64::consts::PI * x).sin() * rho0_at_0 * vp;
                        }
                    }
                }
            }
        }
        compare_dense(&sym_to_map(&sys.a), &a, 1e-12, "A");
        compare_dense(&mat_to_map(&sys.b), &b, 1e-12, "B");
        let scale = 1.0 + l.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (g, (&sv, &dv)) in sys.l.iter().zip(&l).enumerate() {
            assert!((sv - dv).abs() < 1e-12 * scale, "L[{g}]: {sv} vs {dv}");
        }
    }

    #[test]
    fn mf2_matches_dense_oracle_on_small_mesh() {
        let mesh = SpaceTimeMesh::new(3, 2, 0.5).unwrap();
        let spec = ProblemSpec::baseline(1e-4, 1.0);
        let opts = AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Keep };
        let sys = assemble_mf2(&mesh, &spec, &opts).unwrap();
        let quad = QuadRule::gauss(4);
        let (dx, dt) = (mesh.dx, mesh.dt);
        let (n, m) = (sys.n(), sys.m());
        assert_eq!(n, 4 * 3);
        assert_eq!(m, 2 * 3);
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![vec![0.0; n]; m];
        let mut j = vec![vec![0.0; m]; m];
        let mut l = vec![0.0; n];
        let c = 0.1;
        let shp = |k: usize, xi: f64, tau: f64| {
            let (v, dxi, dtau) = q1_shape(k, xi, tau).unwrap();
            (v, dxi / dx, dtau / dt)
        };
        for e in 0..mesh.cell_count() {
            let (_, nrow) = mesh.cell_origin(e);
            let (x0, t0) = mesh.cell_corner(e);
            let pd = sys.phi_map.cell_dofs(&mesh, e);
            let md = sys.mult_map.cell_dofs(&mesh, e);
            for (xi, tau, w) in quad.points() {
                let w = w * dx * dt;
                for mm in 0..4 {
                    let (lv, ldx, _) = shp(mm, xi, tau);
                    for p in 0..4 {
                        let (pv, pdx, pdt) = shp(p, xi, tau);
                        if let (Some(gm), Some(gp)) = (md[mm], pd[p]) {
                            b[gm][gp] += w * (pdt * lv - c * pdx * ldx);
                        }
                        let _ = pv;
                    }
                    for m2 in 0..4 {
                        if let (Some(g1), Some(g2)) = (md[mm], md[m2]) {
                            j[g1][g2] += w * ldx * shp(m2, xi, tau).1;
                        }
                    }
                }
            }
            let s = spec.omega.0.max(x0);
            let en = spec.omega.1.min(x0 + dx);
            if en - s > 1e-14 {
                for (kx, &ux) in quad.nodes.iter().enumerate() {
                    let x = s + ux * (en - s);
                    let xi = (x - x0) / dx;
                    for (kt, &tau) in quad.nodes.iter().enumerate() {
                        let t = t0 + tau * dt;
                        let w = quad.weights[kx] * (en - s) * quad.weights[kt] * dt;
                        let w0i = spec.rho0.eval_inv(t).unwrap();
                        for p in 0..4 {
                            for qq in 0..4 {
                                if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                                    a[gp][gq] += w * w0i * w0i * shp(p, xi, tau).0 * shp(qq, xi, tau).0;
                                }
                            }
                        }
                    }
                }
            }
            if nrow == mesh.nt - 1 {
                for (k, &u) in quad.nodes.iter().enumerate() {
                    let w = quad.weights[k] * dx;
                    for p in 0..4 {
                        for qq in 0..4 {
                            if let (Some(gp), Some(gq)) = (pd[p], pd[qq]) {
                                a[gp][gq] +=
                                    spec.epsilon * w * shp(p, u, 1.0).0 * shp(qq, u, 1.0).0;
                            }
                        }
                    }
                }
            }
            if nrow == 0 {
                for (k, &u) in quad.nodes.iter().enumerate() {
                    let w = quad.weights[k] * dx;
                    let x = x0 + u * dx;
                    for p in 0..4 {
                        if let Some(gp) = pd[p] {
                            l[gp] -= w * (std::f64::consts::PI * x).sin() * shp(p, u, 0.0).0;
                        }
                    }
                }
            }
        }
        compare_dense(&sym_to_map(&sys.a), &a, 1e-12, "A0");
        compare_dense(&mat_to_map(&sys.b), &b, 1e-12, "B");
        compare_dense(&sym_to_map(&sys.j), &j, 1e-12, "S");
        for (g, (&sv, &dv)) in sys.l.iter().zip(&l).enumerate() {
            assert!((sv - dv).abs() < 1e-12, "L[{g}]: {sv} vs {dv}");
        }
        assert!(sys.h1_augmented);
    }

    /// A(r) must be affine in r — checked through three assemblies.
    #[test]
    fn r_scaling_is_affine() {
        let mesh = SpaceTimeMesh::new(4, 2, 0.5).unwrap();
        let opts = AssemblyOptions::default();
        for eps in [1e-2, 0.0] {
            let build = |r: f64| {
                let mut spec = ProblemSpec::baseline(eps, r);
                spec.epsilon = eps;
                if eps == 0.0 {
                    sym_to_map(&assemble_mf3norm(&mesh, &spec, &opts).unwrap().a)
                } else {
                    sym_to_map(&assemble_mf1(&mesh, &spec, &opts).unwrap().a)
                }
            };
            let a1 = build(1.0);
            let a2 = build(2.0);
            let a4 = build(4.0);
            let scale = a1.values().fold(0.0f64, |acc, v| acc.max(v.abs()));
            for (k, v1) in &a1 {
                let v2 = a2[k];
                let v4 = a4[k];
                // A(4) = A(1) + 3·(A(2) − A(1)).
                assert!(
                    (v4 - (v1 + 3.0 * (v2 - v1))).abs() <= 1e-12 * scale,
                    "entry {k:?} not affine in r"
                );
            }
        }
    }

    #[test]
    fn mf3_load_scales_mf1_load_by_initial_weight() {
        let mesh = SpaceTimeMesh::new(4, 3, 0.5).unwrap();
        let opts = AssemblyOptions::default();
        let spec1 = ProblemSpec::baseline(1e-2, 1.0);
        let spec3 = ProblemSpec::baseline(0.0, 1.0);
        let l1 = assemble_mf1(&mesh, &spec1, &opts).unwrap().l;
        let l3 = assemble_mf3norm(&mesh, &spec3, &opts).unwrap().l;
        let rho0_at_0 = spec1.rho0.eval(0.0).unwrap();
        for (a, b) in l1.iter().zip(&l3) {
            assert_relative_eq!(rho0_at_0 * a, *b, max_relative = 1e-12, epsilon = 1e-15);
        }
    }

    /// The assembled quadratic forms must admit a Cholesky factorization
    /// (SPD on the masked dof set) for r > 0, in both Dirichlet modes.
    #[test]
    fn assembled_forms_factor_as_spd() {
        let mesh = SpaceTimeMesh::new(6, 4, 0.5).unwrap();
        for phi_mode in [DirichletMode::Eliminate, DirichletMode::Keep] {
            let opts = AssemblyOptions { quad_order: 4, phi_mode };
            let spec = ProblemSpec::baseline(1e-2, 1.0);
            assemble_mf1(&mesh, &spec, &opts).unwrap().a.factor_spd().unwrap();
            let spec = ProblemSpec::baseline(0.0, 1.0);
            assemble_mf3norm(&mesh, &spec, &opts).unwrap().a.factor_spd().unwrap();
        }
        // MF2: the full form a + r·BᵀJ⁻¹B, realized densely on a small mesh.
        let mesh = SpaceTimeMesh::new(6, 3, 0.5).unwrap();
        let opts = AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Keep };
        let sys = assemble_mf2(&mesh, &ProblemSpec::baseline(1e-4, 1.0), &opts).unwrap();
        let jf = sys.j.factor_spd().unwrap();
        let (n, m) = (sys.n(), sys.m());
        let mut full = nalgebra::DMatrix::<f64>::zeros(n, n);
        for (i, jj, v) in sys.a.entries_lower() {
            full[(i, jj)] += v;
            if i != jj {
                full[(jj, i)] += v;
            }
        }
        for col in 0..n {
            let mut unit = vec![0.0; n];
            unit[col] = 1.0;
            let mut bx = vec![0.0; m];
            sys.b.matvec(&unit, &mut bx);
            let w = jf.solve(&bx);
            let mut btw = vec![0.0; n];
            sys.b.matvec_transpose(&w, &mut btw);
            for row in 0..n {
                full[(row, col)] += sys.r * btw[row];
            }
        }
        // Symmetrize away roundoff from the solve-based construction.
        let fullt = full.transpose();
        let full = (full + fullt) * 0.5;
        assert!(full.cholesky().is_some(), "MF2 full form not SPD");
    }

    /// For smooth fields interpolated into the Q1 spaces, the relaxed
    /// constraint form must converge to the strong-form pairing
    /// −∬ L*φ·λ as the mesh refines.
    #[test]
    fn mf2_constraint_consistent_with_strong_pairing() {
        use std::f64::consts::PI;
        let phi = |x: f64, t: f64| (PI * x).sin() * (1.0 + t * t);
        let lam = |x: f64, t: f64| x * (1.0 - x) * (1.0 - t);
        let c = 0.1;
        // −∬ L*φ λ with L*φ = −φ_t − cφ_xx, by composite Gauss quadrature.
        let quad = QuadRule::gauss(6);
        let mut exact = 0.0;
        let panels = 60;
        let (hx, ht) = (1.0 / panels as f64, 0.5 / panels as f64);
        for ix in 0..panels {
            for it in 0..panels {
                for (xi, tau, w) in quad.points() {
                    let x = (ix as f64 + xi) * hx;
                    let t = (it as f64 + tau) * ht;
                    let phi_t = (PI * x).sin() * 2.0 * t;
                    let phi_xx = -PI * PI * phi(x, t);
                    exact -= w * hx * ht * (-phi_t - c * phi_xx) * lam(x, t);
                }
            }
        }
        let spec = ProblemSpec::baseline(1e-4, 1.0);
        let opts = AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Eliminate };
        let mut errs = Vec::new();
        for (nx, nt) in [(8, 4), (16, 8), (32, 16)] {
            let mesh = SpaceTimeMesh::new(nx, nt, 0.5).unwrap();
            let sys = assemble_mf2(&mesh, &spec, &opts).unwrap();
            let mut pv = vec![0.0; sys.n()];
            let mut lv = vec![0.0; sys.m()];
            for n in 0..=nt {
                for i in 0..=nx {
                    let (x, t) = (i as f64 * mesh.dx, n as f64 * mesh.dt);
                    let node = mesh.node(i, n);
                    if let Some(g) = sys.phi_map.global(node, DofKind::Value) {
                        pv[g] = phi(x, t);
                    }
                    if let Some(g) = sys.mult_map.global(node, DofKind::Value) {
                        lv[g] = lam(x, t);
                    }
                }
            }
            let mut bphi = vec![0.0; sys.m()];
            sys.b.matvec(&pv, &mut bphi);
            let bh: f64 = bphi.iter().zip(&lv).map(|(a, b)| a * b).sum();
            errs.push((bh - exact).abs());
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0], "not converging: {errs:?}");
        assert!(
            errs[0] / errs[2] > 8.0,
            "slower than O(h²): {errs:?} (exact {exact:.6e})"
        );
    }

    #[test]
    fn forward_mass_measures_domain_and_spectrum_matches() {
        // Free space: the constant 1 is representable and 1ᵀM1 = |Ω| = 1.
        let free = Hermite1dSpace::new_free(8).unwrap();
        let mass = hermite_mass(&free, 4).unwrap();
        let mut one = vec![0.0; free.n_dofs];
        for i in 0..=free.nx {
            one[free.global(i, 0).unwrap()] = 1.0;
        }
        assert_relative_eq!(mass.quad_form(&one), 1.0, max_relative = 1e-13);

        // Dirichlet space: smallest generalized eigenvalue of (K, M) is cπ².
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let fwd = assemble_forward(64, &spec, 4).unwrap();
        let kf = fwd.stiff.factor_spd().unwrap();
        let n = fwd.space.n_dofs;
        let mass = fwd.mass;
        let est = extreme_eigen(
            n,
            |x, y| {
                let mut tmp = vec![0.0; n];
                mass.matvec(x, &mut tmp);
                let sol = kf.solve(&tmp);
                y.copy_from_slice(&sol);
            },
            Some(&mass),
            crate::linalg::EigenSide::SmallestViaInverse,
            1e-10,
            500,
        );
        assert!(est.converged);
        let exact = 0.1 * std::f64::consts::PI.powi(2);
        assert_relative_eq!(est.value, exact, max_relative = 1e-3);
    }

    #[test]
    fn control_load_restricts_to_window() {
        let space = Hermite1dSpace::new(10).unwrap();
        let l = control_load(&space, (0.25, 0.55), 6, |_| 1.0);
        // Pair with the interpolant of 1; ω stays away from the boundary so
        // the masked dofs never see it.
        let mut one = vec![0.0; space.n_dofs];
        for i in 0..=space.nx {
            if let Some(g) = space.global(i, 0) {
                one[g] = 1.0;
            }
        }
        let total: f64 = l.iter().zip(&one).map(|(a, b)| a * b).sum();
        assert_relative_eq!(total, 0.3, max_relative = 1e-13);
        let lx = control_load(&space, (0.25, 0.55), 6, |x| x);
        let sx: f64 = lx.iter().zip(&one).map(|(a, b)| a * b).sum();
        assert_relative_eq!(sx, (0.55f64.powi(2) - 0.25f64.powi(2)) / 2.0, max_relative = 1e-13);
    }

    /// Real-weight entries should be stable under quadrature refinement
    /// (the weights are smooth and flat near t = T).
    #[test]
    fn quadrature_refinement_is_stable() {
        let mesh = SpaceTimeMesh::new(10, 5, 0.5).unwrap();
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let a4 = assemble_mf1(&mesh, &spec, &AssemblyOptions { quad_order: 4, phi_mode: DirichletMode::Eliminate })
            .unwrap()
            .a;
        let a8 = assemble_mf1(&mesh, &spec, &AssemblyOptions { quad_order: 8, phi_mode: DirichletMode::Eliminate })
            .unwrap()
            .a;
        let m4 = sym_to_map(&a4);
        let m8 = sym_to_map(&a8);
        let scale = m8.values().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for (k, v8) in &m8 {
            let v4 = m4.get(k).copied().unwrap_or(0.0);
            assert!((v4 - v8).abs() <= 1e-2 * scale, "entry {k:?}: {v4} vs {v8}");
        }
    }
}
