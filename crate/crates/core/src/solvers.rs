//! End-to-end solution paths for the assembled mixed systems: the direct
//! saddle-point solve, the discrete inf-sup constant, and the conjugate
//! gradient iteration on the dual functional, plus evaluators and norms of
//! the resulting control/state fields.
//!
//! All paths share a [`SolverWorkspace`] that builds factorizations lazily
//! and can be reused across calls (the saddle factorization, the primal
//! factorization and the multiplier-Gram factorization are each computed at
//! most once per system).
//!
//! For the Q1/Q1 formulation the primal form `A = A0 + r·BᵀJ⁻¹B` is never
//! assembled (it is dense); solves with `A` use the equivalent sparse
//! symmetric extended system
//!
//! ```text
//!   [ A0  rBᵀ ] [φ]   [b]
//!   [ rB  −rJ ] [w] = [0]
//! ```
//!
//! whose first Schur complement reproduces `A` exactly (`w = J⁻¹Bφ`).
//!
//! The Q1/Q1 pair carries no discrete constraint kernel: `B` maps the
//! primal space onto the multiplier space one-to-one, so enforcing
//! `Bφ = 0` exactly would only admit `φ = 0`. The direct solve therefore
//! uses the proximally regularized saddle system
//!
//! ```text
//!   [ A0   Bᵀ     ] [φ]   [L]
//!   [ B   −(1/r)J ] [λ] = [g]
//! ```
//!
//! (one augmented-Lagrangian step from `λ = 0`: `λ = rJ⁻¹Bφ`, i.e. the
//! constraint `L*φ = 0` is penalized in the discrete `H⁻¹` norm with
//! weight `r`). The C¹/Q1 formulations keep the exact constraint block.

use crate::assembly::{Formulation, MixedSystem};
use crate::linalg::{
    dot, norm2, seeded_start, LinalgError, LuFactor, SpdFactor, TripletBuilder,
};
use crate::mesh::{bfs_shape, q1_shape, FemSpace, QuadRule};
use crate::weights::WeightError;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("{what} did not converge within {iterations} iterations")]
    NotConverged { what: &'static str, iterations: usize },
    #[error("dual operator lost positivity (⟨Jw̄,w⟩ = {0:.3e}); the primal form is not SPD")]
    DualBreakdown(f64),
    #[error("the inf-sup test requires a system assembled with η = r (got η = {eta}, r = {r})")]
    EtaMismatch { eta: f64, r: f64 },
    #[error("{0} is only defined for the exactly constrained formulations")]
    RequiresExactConstraint(&'static str),
    #[error("eigenvalue iteration broke down: {0}")]
    Breakdown(&'static str),
}

/// Lazily-built factorizations shared by the solution paths.
pub struct SolverWorkspace<'a> {
    pub sys: &'a MixedSystem,
    saddle: Option<LuFactor>,
    primal: Option<PrimalFactor>,
    gram: Option<SpdFactor>,
}

enum PrimalFactor {
    /// Cholesky of the assembled SPD `A` (MF1 / MF3norm).
    Direct(SpdFactor),
    /// LU of the 2×2 extended block (MF2); unknowns ordered `[φ; w]`.
    Extended(LuFactor),
}

impl<'a> SolverWorkspace<'a> {
    pub fn new(sys: &'a MixedSystem) -> Self {
        SolverWorkspace { sys, saddle: None, primal: None, gram: None }
    }

    fn gram(&mut self) -> Result<&SpdFactor, SolverError> {
        if self.gram.is_none() {
            self.gram = Some(self.sys.j.factor_spd()?);
        }
        Ok(self.gram.as_ref().unwrap())
    }

    fn primal(&mut self) -> Result<&PrimalFactor, SolverError> {
        if self.primal.is_none() {
            let sys = self.sys;
            let fact = if sys.h1_augmented {
                let (n, m) = (sys.n(), sys.m());
                let mut t = TripletBuilder::new();
                for (i, j, v) in sys.a.entries_lower() {
                    t.push(i, j, v);
                    if i != j {
                        t.push(j, i, v);
                    }
                }
                for (i, j, v) in sys.b.entries() {
                    t.push(n + i, j, sys.r * v);
                    t.push(j, n + i, sys.r * v);
                }
                for (i, j, v) in sys.j.entries_lower() {
                    t.push(n + i, n + j, -sys.r * v);
                    if i != j {
                        t.push(n + j, n + i, -sys.r * v);
                    }
                }
                PrimalFactor::Extended(t.build(n + m, n + m)?.factor_lu()?)
            } else {
                PrimalFactor::Direct(sys.a.factor_spd()?)
            };
            self.primal = Some(fact);
        }
        Ok(self.primal.as_ref().unwrap())
    }

    fn saddle(&mut self) -> Result<&LuFactor, SolverError> {
        if self.saddle.is_none() {
            let sys = self.sys;
            let (n, m) = (sys.n(), sys.m());
            let mut t = TripletBuilder::new();
            for (i, j, v) in sys.a.entries_lower() {
                t.push(i, j, v);
                if i != j {
                    t.push(j, i, v);
                }
            }
            for (i, j, v) in sys.b.entries() {
                t.push(n + i, j, v);
                t.push(j, n + i, v);
            }
            if sys.h1_augmented {
                // Proximal regularization of the constraint: −(1/r)J in
                // the multiplier block, so λ = rJ⁻¹Bφ.
                for (i, j, v) in sys.j.entries_lower() {
                    t.push(n + i, n + j, -v / sys.r);
                    if i != j {
                        t.push(n + j, n + i, -v / sys.r);
                    }
                }
            }
            let dim = n + m;
            self.saddle = Some(t.build(dim, dim)?.factor_lu()?);
        }
        Ok(self.saddle.as_ref().unwrap())
    }

    /// Solves the full saddle system for right-hand side `(f, g)` and
    /// returns `(φ, λ)`.
    pub fn solve_saddle(&mut self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let (n, m) = (self.sys.n(), self.sys.m());
        let fact = self.saddle()?;
        let mut rhs = vec![0.0; n + m];
        rhs[..n].copy_from_slice(f);
        rhs[n..].copy_from_slice(g);
        fact.solve_in_place(&mut rhs);
        let lambda = rhs[n..].to_vec();
        rhs.truncate(n);
        Ok((rhs, lambda))
    }

    /// Solves `A φ = b` with the full primal form.
    pub fn solve_primal(&mut self, b: &[f64]) -> Result<Vec<f64>, SolverError> {
        let (n, m) = (self.sys.n(), self.sys.m());
        match self.primal()? {
            PrimalFactor::Direct(chol) => Ok(chol.solve(b)),
            PrimalFactor::Extended(lu) => {
                let mut rhs = vec![0.0; n + m];
                rhs[..n].copy_from_slice(b);
                lu.solve_in_place(&mut rhs);
                rhs.truncate(n);
                Ok(rhs)
            }
        }
    }

    /// Applies the full primal form `A` (including the implicit
    /// `r·BᵀJ⁻¹B` term for MF2).
    pub fn apply_primal(&mut self, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        let sys = self.sys;
        let mut y = vec![0.0; sys.n()];
        sys.a.matvec(x, &mut y);
        if sys.h1_augmented {
            let mut bx = vec![0.0; sys.m()];
            sys.b.matvec(x, &mut bx);
            let w = {
                let gram = self.gram()?;
                gram.solve(&bx)
            };
            let mut btw = vec![0.0; sys.n()];
            sys.b.matvec_transpose(&w, &mut btw);
            for (yi, bi) in y.iter_mut().zip(&btw) {
                *yi += sys.r * bi;
            }
        }
        Ok(y)
    }

    /// One application of the dual operator in multiplier coordinates:
    /// `w ↦ J⁻¹ B A⁻¹ Bᵀ w`.
    pub fn apply_dual(&mut self, w: &[f64]) -> Result<Vec<f64>, SolverError> {
        let sys = self.sys;
        let mut btw = vec![0.0; sys.n()];
        sys.b.matvec_transpose(w, &mut btw);
        for v in btw.iter_mut() {
            *v = -*v;
        }
        let phi = self.solve_primal(&btw)?;
        let mut bphi = vec![0.0; sys.m()];
        sys.b.matvec(&phi, &mut bphi);
        for v in bphi.iter_mut() {
            *v = -*v;
        }
        let gram = self.gram()?;
        Ok(gram.solve(&bphi))
    }
}

/// Solution of one mixed system, in primal/multiplier coordinates.
#[derive(Debug, Clone)]
pub struct MixedSolution {
    pub formulation: Formulation,
    /// Coefficients of φ (MF1/MF2) or ψ (MF3norm).
    pub phi: Vec<f64>,
    /// Coefficients of the multiplier λ.
    pub lambda: Vec<f64>,
    /// Conjugate-gradient iterates computed, counting the initial residual
    /// evaluation (which costs one primal solve, like every later step) as
    /// the first. 0 for the direct path.
    pub iterations: usize,
    /// `‖Aφ + Bᵀλ − L‖₂ / (1 + ‖L‖₂)`.
    pub residual_primal: f64,
    /// `‖Bφ‖∞ / (1 + ‖φ‖∞)` for the exactly constrained formulations;
    /// `‖Bφ − (1/r)Jλ‖∞ / (1 + ‖φ‖∞)` for the Q1/Q1 regularized one.
    pub residual_constraint: f64,
}

fn finish_solution(
    ws: &mut SolverWorkspace,
    phi: Vec<f64>,
    lambda: Vec<f64>,
    iterations: usize,
) -> Result<MixedSolution, SolverError> {
    let sys = ws.sys;
    let mut row1 = vec![0.0; sys.n()];
    sys.a.matvec(&phi, &mut row1);
    let mut btl = vec![0.0; sys.n()];
    sys.b.matvec_transpose(&lambda, &mut btl);
    for ((r, b), l) in row1.iter_mut().zip(&btl).zip(&sys.l) {
        *r += b - l;
    }
    let residual_primal = norm2(&row1) / (1.0 + norm2(&sys.l));
    let mut bphi = vec![0.0; sys.m()];
    sys.b.matvec(&phi, &mut bphi);
    if sys.h1_augmented {
        // Second block row of the regularized system: Bφ − (1/r)Jλ = 0.
        let mut jl = vec![0.0; sys.m()];
        sys.j.matvec(&lambda, &mut jl);
        for (b, j) in bphi.iter_mut().zip(&jl) {
            *b -= j / sys.r;
        }
    }
    let binf = bphi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let pinf = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(MixedSolution {
        formulation: sys.formulation,
        phi,
        lambda,
        iterations,
        residual_primal,
        residual_constraint: binf / (1.0 + pinf),
    })
}

/// Solves the block system by a sparse LU factorization of the (extended)
/// saddle matrix.
pub fn solve_direct(sys: &MixedSystem) -> Result<MixedSolution, SolverError> {
    solve_direct_with(&mut SolverWorkspace::new(sys))
}

pub fn solve_direct_with(ws: &mut SolverWorkspace) -> Result<MixedSolution, SolverError> {
    let zero = vec![0.0; ws.sys.m()];
    let l = ws.sys.l.clone();
    let (phi, lambda) = ws.solve_saddle(&l, &zero)?;
    finish_solution(ws, phi, lambda, 0)
}

/// Estimate of the discrete inf-sup constant.
#[derive(Debug, Clone, Copy)]
pub struct InfSupEstimate {
    pub delta: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Discrete inf-sup constant `δ` as the square root of the smallest
/// eigenvalue of `J⁻¹·BA⁻¹Bᵀ`, by the power iteration on coupled saddle
/// solves: given `‖vⁿ‖₂ = 1`, solve
///
/// ```text
///   A φⁿ + Bᵀλⁿ = 0,   B φⁿ = −J vⁿ,
/// ```
///
/// set `vⁿ⁺¹ = λⁿ/‖λⁿ‖₂`; then `δ = lim (‖λⁿ‖₂)^{−1/2}`. Convergence is
/// measured on successive δ estimates.
pub fn infsup_delta(sys: &MixedSystem, tol: f64, maxit: usize) -> Result<InfSupEstimate, SolverError> {
    infsup_delta_with(&mut SolverWorkspace::new(sys), tol, maxit)
}

pub fn infsup_delta_with(
    ws: &mut SolverWorkspace,
    tol: f64,
    maxit: usize,
) -> Result<InfSupEstimate, SolverError> {
    let sys = ws.sys;
    if sys.h1_augmented {
        return Err(SolverError::RequiresExactConstraint("the inf-sup estimate"));
    }
    if sys.eta != sys.r {
        return Err(SolverError::EtaMismatch { eta: sys.eta, r: sys.r });
    }
    let m = sys.m();
    let mut v = seeded_start(m, 42);
    let nv = norm2(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let zero_f = vec![0.0; sys.n()];
    let mut delta_prev = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < maxit {
        iterations += 1;
        let mut jv = vec![0.0; m];
        sys.j.matvec(&v, &mut jv);
        for x in jv.iter_mut() {
            *x = -*x;
        }
        let (_, lambda) = ws.solve_saddle(&zero_f, &jv)?;
        let nl = norm2(&lambda);
        let delta = nl.powf(-0.5);
        if delta_prev.is_finite() && (delta - delta_prev).abs() <= tol * delta.abs() {
            delta_prev = delta;
            converged = true;
            break;
        }
        delta_prev = delta;
        v = lambda;
        for x in v.iter_mut() {
            *x /= nl;
        }
    }
    Ok(InfSupEstimate { delta: delta_prev, iterations, converged })
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (`beta.len() == alpha.len() - 1`), by
/// Sturm-sequence bisection on the `LDLᵀ` pivot recurrence of `T − xI`.
fn tridiag_max_eig(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    debug_assert_eq!(beta.len() + 1, n.max(1));
    if n == 1 {
        return alpha[0];
    }
    // Number of eigenvalues strictly below x = number of negative pivots.
    let negatives_below = |x: f64| -> usize {
        let mut cnt = 0usize;
        let mut d = 1.0f64;
        for i in 0..n {
            let b2 = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
            d = (alpha[i] - x) - b2 / d;
            if d == 0.0 {
                d = -f64::MIN_POSITIVE;
            }
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { beta[i - 1].abs() };
        let right = if i + 1 < n { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - left - right);
        hi = hi.max(alpha[i] + left + right);
    }
    let mut a = lo;
    let mut b = hi + 1e-12 * (hi - lo).abs() + f64::MIN_POSITIVE;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if negatives_below(mid) >= n {
            b = mid;
        } else {
            a = mid;
        }
        if b - a <= 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Discrete inf-sup constant by a Lanczos iteration on the same coupled
/// saddle solves as [`infsup_delta`], orthogonalized in the Gram inner
/// product of the multiplier space (in which the iterated operator is
/// self-adjoint). Each step costs one saddle solve, like one power-iteration
/// step, but the extreme Ritz value converges superlinearly, so the same
/// accuracy is reached in one to two orders of magnitude fewer solves. The
/// basis is kept and fully reorthogonalized, which keeps the tridiagonal
/// projection faithful in floating point.
pub fn infsup_delta_krylov(
    sys: &MixedSystem,
    tol: f64,
    maxit: usize,
) -> Result<InfSupEstimate, SolverError> {
    infsup_delta_krylov_with(&mut SolverWorkspace::new(sys), tol, maxit)
}

pub fn infsup_delta_krylov_with(
    ws: &mut SolverWorkspace,
    tol: f64,
    maxit: usize,
) -> Result<InfSupEstimate, SolverError> {
    let sys = ws.sys;
    if sys.h1_augmented {
        return Err(SolverError::RequiresExactConstraint("the inf-sup estimate"));
    }
    if sys.eta != sys.r {
        return Err(SolverError::EtaMismatch { eta: sys.eta, r: sys.r });
    }
    let m = sys.m();
    let zero_f = vec![0.0; sys.n()];
    let gram_dot = |jx: &[f64], y: &[f64]| dot(jx, y);

    let mut v = seeded_start(m, 42);
    let mut jv = vec![0.0; m];
    sys.j.matvec(&v, &mut jv);
    let nv = gram_dot(&jv, &v).max(0.0).sqrt();
    if nv == 0.0 {
        return Err(SolverError::Breakdown("degenerate Gram matrix"));
    }
    for (x, j) in v.iter_mut().zip(jv.iter_mut()) {
        *x /= nv;
        *j /= nv;
    }

    // J-orthonormal basis and its J-images, for full reorthogonalization.
    let mut basis: Vec<Vec<f64>> = vec![v];
    let mut jbasis: Vec<Vec<f64>> = vec![jv];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut delta_prev = f64::NAN;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < maxit.min(m) {
        iterations += 1;
        let k = basis.len() - 1;
        // w = S⁻¹ J v_k  via the coupled solve with second block −J v_k.
        let neg_jv: Vec<f64> = jbasis[k].iter().map(|x| -x).collect();
        let (_, w0) = ws.solve_saddle(&zero_f, &neg_jv)?;
        let mut w = w0;
        let alpha = gram_dot(&jbasis[k], &w);
        alphas.push(alpha);
        // Two full reorthogonalization sweeps (classical Gram-Schmidt).
        for _ in 0..2 {
            for (u, ju) in basis.iter().zip(&jbasis) {
                let c = gram_dot(ju, &w);
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let theta = tridiag_max_eig(&alphas, &betas);
        if theta > 0.0 {
            let delta = theta.powf(-0.5);
            if delta_prev.is_finite() && (delta - delta_prev).abs() <= tol * delta.abs() {
                delta_prev = delta;
                converged = true;
                break;
            }
            delta_prev = delta;
        }
        let mut jw = vec![0.0; m];
        sys.j.matvec(&w, &mut jw);
        let beta = gram_dot(&jw, &w).max(0.0).sqrt();
        if beta <= 1e-14 * alpha.abs().max(1.0) {
            // Invariant subspace reached: the Ritz value is exact.
            converged = true;
            break;
        }
        betas.push(beta);
        for (wi, ji) in w.iter_mut().zip(jw.iter_mut()) {
            *wi /= beta;
            *ji /= beta;
        }
        basis.push(w);
        jbasis.push(jw);
    }
    if !delta_prev.is_finite() {
        return Err(SolverError::Breakdown("no Ritz value produced"));
    }
    Ok(InfSupEstimate { delta: delta_prev, iterations, converged })
}

/// Conjugate gradient on the dual functional, entirely in multiplier
/// coordinates with the `J`-inner product:
///
/// * initialization: `λ⁰ = 0`, solve `A φ⁰ = L − Bᵀλ⁰`, project
///   `J g⁰ = −B φ⁰`, `w⁰ = g⁰`;
/// * step: solve `A φ̄ = −Bᵀwⁿ`, project `J w̄ = −B φ̄`,
///   `ρ = ⟨Jg,g⟩/⟨Jw̄,w⟩`, `λ ← λ − ρw`, `g ← g − ρw̄`;
/// * stop when `‖g‖_J ≤ γ‖g⁰‖_J`, else `w ← g + (⟨Jg⁺,g⁺⟩/⟨Jg,g⟩)·w`;
/// * recover `φ` from `A φ = L − Bᵀλ`.
pub fn cg_dual(sys: &MixedSystem, gamma: f64, maxit: usize) -> Result<MixedSolution, SolverError> {
    cg_dual_with(&mut SolverWorkspace::new(sys), gamma, maxit)
}

pub fn cg_dual_with(
    ws: &mut SolverWorkspace,
    gamma: f64,
    maxit: usize,
) -> Result<MixedSolution, SolverError> {
    let sys = ws.sys;
    if sys.h1_augmented {
        return Err(SolverError::RequiresExactConstraint(
            "conjugate gradient on the dual functional",
        ));
    }
    let (n, m) = (sys.n(), sys.m());
    let mut lambda = vec![0.0; m];
    let l = sys.l.clone();
    let phi0 = ws.solve_primal(&l)?;
    let mut bphi = vec![0.0; m];
    sys.b.matvec(&phi0, &mut bphi);
    for x in bphi.iter_mut() {
        *x = -*x;
    }
    let mut g = {
        let gram = ws.gram()?;
        gram.solve(&bphi)
    };
    let mut jg = vec![0.0; m];
    sys.j.matvec(&g, &mut jg);
    let mut gg = dot(&jg, &g);
    let g0_norm = gg.sqrt();
    let mut iterations = 1;
    if g0_norm > 0.0 {
        let mut w = g.clone();
        loop {
            if iterations >= maxit {
                return Err(SolverError::NotConverged {
                    what: "conjugate gradient on the dual functional",
                    iterations,
                });
            }
            iterations += 1;
            let wbar = ws.apply_dual(&w)?;
            let mut jwbar = vec![0.0; m];
            sys.j.matvec(&wbar, &mut jwbar);
            let denom = dot(&jwbar, &w);
            if denom <= 0.0 {
                return Err(SolverError::DualBreakdown(denom));
            }
            let rho = gg / denom;
            for (li, wi) in lambda.iter_mut().zip(&w) {
                *li -= rho * wi;
            }
            for (gi, wi) in g.iter_mut().zip(&wbar) {
                *gi -= rho * wi;
            }
            sys.j.matvec(&g, &mut jg);
            let gg_next = dot(&jg, &g);
            if gg_next.sqrt() <= gamma * g0_norm {
                break;
            }
            let beta = gg_next / gg;
            gg = gg_next;
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi = gi + beta * *wi;
            }
        }
    }
    // Recover φ from the first block row at the final multiplier.
    let mut rhs = vec![0.0; n];
    let mut btl = vec![0.0; n];
    sys.b.matvec_transpose(&lambda, &mut btl);
    for ((r, l), b) in rhs.iter_mut().zip(&sys.l).zip(&btl) {
        *r = l - b;
    }
    let phi = ws.solve_primal(&rhs)?;
    finish_solution(ws, phi, lambda, iterations)
}

/// A priori bound `ν ≈ r⁻¹δ⁻²` on the condition number of the dual
/// operator driving [`cg_dual`].
pub fn cg_condition_bound(r: f64, delta: f64) -> f64 {
    1.0 / (r * delta * delta)
}

/// Pointwise evaluation of the primal field (BFS or Q1) with derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct FieldDerivs {
    pub value: f64,
    pub dx: f64,
    pub dt: f64,
    pub dxx: f64,
}

fn locate(sys: &MixedSystem, x: f64, t: f64) -> (usize, f64, f64) {
    let mesh = &sys.mesh;
    let i = ((x / mesh.dx) as usize).min(mesh.nx - 1);
    let n = ((t / mesh.dt) as usize).min(mesh.nt - 1);
    let xi = (x - i as f64 * mesh.dx) / mesh.dx;
    let tau = (t - n as f64 * mesh.dt) / mesh.dt;
    (n * mesh.nx + i, xi, tau)
}

/// Evaluates the primal variable (φ or ψ) at `(x, t) ∈ Q_T`.
pub fn eval_primal(sys: &MixedSystem, coeffs: &[f64], x: f64, t: f64) -> FieldDerivs {
    let (e, xi, tau) = locate(sys, x, t);
    let dofs = sys.phi_map.cell_dofs(&sys.mesh, e);
    let mut out = FieldDerivs::default();
    match sys.phi_map.space {
        FemSpace::Bfs => {
            for (k, dof) in dofs.iter().enumerate() {
                let Some(g) = dof else { continue };
                let s = bfs_shape(k, xi, tau, sys.mesh.dx, sys.mesh.dt).expect("valid index");
                let c = coeffs[*g];
                out.value += c * s.value;
                out.dx += c * s.dx;
                out.dt += c * s.dt;
                out.dxx += c * s.dxx;
            }
        }
        FemSpace::Q1 => {
            for (k, dof) in dofs.iter().enumerate() {
                let Some(g) = dof else { continue };
                let (v, dxi, dtau) = q1_shape(k, xi, tau).expect("valid index");
                let c = coeffs[*g];
                out.value += c * v;
                out.dx += c * dxi / sys.mesh.dx;
                out.dt += c * dtau / sys.mesh.dt;
            }
        }
    }
    out
}

/// Evaluates the multiplier (always Q1) at `(x, t) ∈ Q_T`.
pub fn eval_mult(sys: &MixedSystem, coeffs: &[f64], x: f64, t: f64) -> f64 {
    let (e, xi, tau) = locate(sys, x, t);
    let dofs = sys.mult_map.cell_dofs(&sys.mesh, e);
    let mut out = 0.0;
    for (k, dof) in dofs.iter().enumerate() {
        let Some(g) = dof else { continue };
        let (v, _, _) = q1_shape(k, xi, tau).expect("valid index");
        out += coeffs[*g] * v;
    }
    out
}

/// The computed control `v_h`, vanishing outside the control window:
/// `v_h = ρ0⁻²φ_h·1_ω` (MF1/MF2) or `v_h = ρ0⁻¹ψ_h·1_ω` (MF3norm).
pub struct ControlField<'a> {
    sys: &'a MixedSystem,
    phi: &'a [f64],
}

impl<'a> ControlField<'a> {
    pub fn new(sys: &'a MixedSystem, sol: &'a MixedSolution) -> Self {
        ControlField { sys, phi: &sol.phi }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64, WeightError> {
        let (a, b) = self.sys.spec.omega;
        if x < a || x > b {
            return Ok(0.0);
        }
        let w0i = self.sys.spec.rho0.eval_inv(t)?;
        let p = eval_primal(self.sys, self.phi, x, t).value;
        Ok(match self.sys.formulation {
            Formulation::Mf1 | Formulation::Mf2 => w0i * w0i * p,
            Formulation::Mf3Norm => w0i * p,
        })
    }

    /// The weighted control `ρ0·v_h`, the quantity whose L²(q_T) distance
    /// to the reference control the experiments report. Evaluating it
    /// through the primal variable (`ρ0⁻¹φ_h` or `ψ_h`) avoids the
    /// indeterminate product `ρ0·ρ0⁻²` near `t = T`.
    pub fn eval_weighted(&self, x: f64, t: f64) -> Result<f64, WeightError> {
        let (a, b) = self.sys.spec.omega;
        if x < a || x > b {
            return Ok(0.0);
        }
        let p = eval_primal(self.sys, self.phi, x, t).value;
        Ok(match self.sys.formulation {
            Formulation::Mf1 | Formulation::Mf2 => self.sys.spec.rho0.eval_inv(t)? * p,
            Formulation::Mf3Norm => p,
        })
    }
}

/// The computed state `y_h = λ_h` (MF1/MF2) or `y_h = ρ⁻¹λ_h` (MF3norm).
pub struct StateField<'a> {
    sys: &'a MixedSystem,
    lambda: &'a [f64],
}

impl<'a> StateField<'a> {
    pub fn new(sys: &'a MixedSystem, sol: &'a MixedSolution) -> Self {
        StateField { sys, lambda: &sol.lambda }
    }

    pub fn eval(&self, x: f64, t: f64) -> Result<f64, WeightError> {
        let lam = eval_mult(self.sys, self.lambda, x, t);
        Ok(match self.sys.formulation {
            Formulation::Mf1 | Formulation::Mf2 => lam,
            Formulation::Mf3Norm => self.sys.spec.rho.eval_inv(t)? * lam,
        })
    }
}

/// Integrates `f(x,t)²` over the cylinder with the assembly Gauss rule;
/// `over_window` restricts to `q_T` (cells split at the ω endpoints).
pub fn integrate_sq(
    sys: &MixedSystem,
    over_window: bool,
    mut f: impl FnMut(f64, f64) -> f64,
) -> f64 {
    let mesh = &sys.mesh;
    let quad = QuadRule::gauss(sys.quad_order);
    let (a, b) = sys.spec.omega;
    let mut acc = 0.0;
    for e in 0..mesh.cell_count() {
        let (x0, t0) = mesh.cell_corner(e);
        let (s, en) = if over_window {
            (a.max(x0), b.min(x0 + mesh.dx))
        } else {
            (x0, x0 + mesh.dx)
        };
        if en - s <= 1e-14 * mesh.dx {
            continue;
        }
        for (kx, &ux) in quad.nodes.iter().enumerate() {
            let x = s + ux * (en - s);
            for (kt, &tau) in quad.nodes.iter().enumerate() {
                let t = t0 + tau * mesh.dt;
                let w = quad.weights[kx] * (en - s) * quad.weights[kt] * mesh.dt;
                let v = f(x, t);
                acc += w * v * v;
            }
        }
    }
    acc
}

/// `‖L*φ_h‖_{L²(Q_T)}` for the strong-form paths; for the Q1/Q1 system the
/// relaxed analogue `‖L*φ_h‖_{L²(0,T;H⁻¹)} = ⟨J⁻¹Bφ, Bφ⟩^{1/2}`; for the
/// normalized path `‖α1 L*ψ_h + α0 ψ_h‖_{L²(Q_T)}` (the residual whose
/// square the least-squares term penalizes).
pub fn lstar_norm(sys: &MixedSystem, sol: &MixedSolution) -> Result<f64, SolverError> {
    match sys.formulation {
        Formulation::Mf2 => {
            let mut bphi = vec![0.0; sys.m()];
            sys.b.matvec(&sol.phi, &mut bphi);
            let gram = sys.j.factor_spd()?;
            let w = gram.solve(&bphi);
            Ok(dot(&w, &bphi).max(0.0).sqrt())
        }
        Formulation::Mf1 => {
            let val = integrate_sq(sys, false, |x, t| {
                let d = eval_primal(sys, &sol.phi, x, t);
                let c = sys.spec.c.eval(x, t);
                let c_x = sys.spec.c.eval_dx(x, t);
                let dv = sys.spec.d.eval(x, t);
                -d.dt - c * d.dxx - c_x * d.dx + dv * d.value
            });
            Ok(val.sqrt())
        }
        Formulation::Mf3Norm => {
            let mut err: Option<WeightError> = None;
            let val = integrate_sq(sys, false, |x, t| {
                let d = eval_primal(sys, &sol.phi, x, t);
                let c = sys.spec.c.eval(x, t);
                let c_x = sys.spec.c.eval_dx(x, t);
                let dv = sys.spec.d.eval(x, t);
                let lstar = -d.dt - c * d.dxx - c_x * d.dx + dv * d.value;
                match sys.spec.rho0.normalized_coeffs(&sys.spec.rho, t) {
                    Ok((a1, a0)) => a1 * lstar + a0 * d.value,
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                }
            });
            match err {
                Some(e) => Err(e.into()),
                None => Ok(val.sqrt()),
            }
        }
    }
}

/// `‖ρ0·v_h‖_{L²(q_T)}`, evaluated through the primal variable.
pub fn weighted_control_norm(sys: &MixedSystem, sol: &MixedSolution) -> Result<f64, SolverError> {
    let field = ControlField::new(sys, sol);
    let mut err: Option<WeightError> = None;
    let val = integrate_sq(sys, true, |x, t| match field.eval_weighted(x, t) {
        Ok(v) => v,
        Err(e) => {
            err = Some(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e.into()),
        None => Ok(val.sqrt()),
    }
}

/// 1D L² norm over `(0,1)` of a line function sampled by the assembly
/// Gauss rule on the mesh columns.
fn line_norm(sys: &MixedSystem, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mesh = &sys.mesh;
    let quad = QuadRule::gauss(sys.quad_order);
    let mut acc = 0.0;
    for i in 0..mesh.nx {
        let x0 = i as f64 * mesh.dx;
        for (k, &u) in quad.nodes.iter().enumerate() {
            let v = f(x0 + u * mesh.dx);
            acc += quad.weights[k] * mesh.dx * v * v;
        }
    }
    acc.sqrt()
}

/// `‖λ_h(·,T)‖_{L²(0,1)}` — for the penalized paths this is the terminal
/// norm of the computed state.
pub fn terminal_multiplier_norm(sys: &MixedSystem, sol: &MixedSolution) -> f64 {
    line_norm(sys, |x| eval_mult(sys, &sol.lambda, x, sys.mesh.t_final))
}

/// `‖λ_h(·,T) + ε·φ_h(·,T)‖_{L²(0,1)}`: the discrete defect in the
/// penalty identity `y(·,T) = −ε·φ(·,T)`.
pub fn terminal_identity_residual(sys: &MixedSystem, sol: &MixedSolution) -> f64 {
    let t = sys.mesh.t_final;
    line_norm(sys, |x| {
        eval_mult(sys, &sol.lambda, x, t) + sys.epsilon * eval_primal(sys, &sol.phi, x, t).value
    })
}
