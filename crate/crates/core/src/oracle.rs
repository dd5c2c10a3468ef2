//! Semi-explicit Fourier reference solution for the penalized control
//! problem with constant diffusion, zero potential, and ε > 0.
//!
//! The minimizer of the dual functional over terminal data φ_T is expanded
//! in the sine basis, φ_T = Σ_p a_p sin(pπx); the adjoint state is then
//! φ(x,t) = Σ_p a_p e^{cπ²p²(t−T)} sin(pπx), the control v = ρ0⁻²φ·1_ω,
//! and the controlled state follows by Duhamel's formula:
//!
//! ```text
//!   y(x,t) = Σ_q [ e^{−cπ²q²t}·b⁰_q + Σ_p a_p c_{p,q}(ω) d_{p,q}(t) ] sin(qπx)
//!   c_{p,q}(ω) = 2∫_ω sin(pπx) sin(qπx) dx
//!   d_{p,q}(t) = ∫₀ᵗ ρ0⁻²(s) e^{cπ²(p²(s−T) + q²(s−t))} ds
//! ```
//!
//! (the first index of `d` rides the adjoint decay toward t = T, the second
//! the state decay toward the evaluation time; the basis index of the outer
//! sum is the state index q). The coefficients solve the symmetric
//! positive-definite optimality system 𝓜a = 𝓕 with
//! 𝓜_pq = ½·c_pq(ω)·d_pq(T) + (ε/2)·δ_pq and 𝓕_p = −½·b⁰_p·e^{−cπ²p²T}.
//!
//! This module is the independent verification route for the mixed-FEM
//! solvers: it shares no assembly or linear-algebra code with them (dense
//! work uses nalgebra; the solvers use sparse faer paths).

use crate::assembly::{Formulation, InitialData, MixedSystem, ProblemSpec};
use crate::mesh::QuadRule;
use crate::solvers::{eval_mult, ControlField, MixedSolution};
use crate::weights::{WeightError, WeightSpec};

use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("the Fourier oracle requires ε > 0 (got {0}); use a fine-mesh reference for ε = 0")]
    NonPositiveEpsilon(f64),
    #[error("the Fourier oracle requires at least one mode")]
    NoModes,
    #[error("the Fourier oracle covers constant diffusion and zero potential only")]
    UnsupportedCoefficients,
    #[error("optimality system is not positive definite")]
    Factorization,
    #[error("oracle and discrete system disagree on {0}")]
    SpecMismatch(&'static str),
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// `c_{p,q}(ω) = 2∫_ω sin(pπx) sin(qπx) dx`, by the product-to-sum
/// antiderivative; symmetric in (p,q).
pub fn c_pq(omega: (f64, f64), p: usize, q: usize) -> f64 {
    let (a, b) = omega;
    let (pf, qf) = (p as f64, q as f64);
    if p == q {
        // 2∫ sin² = x − sin(2pπx)/(2pπ)
        let anti = |x: f64| x - (2.0 * pf * PI * x).sin() / (2.0 * pf * PI);
        anti(b) - anti(a)
    } else {
        let (dm, dp) = (pf - qf, pf + qf);
        let anti = |x: f64| (dm * PI * x).sin() / (dm * PI) - (dp * PI * x).sin() / (dp * PI);
        anti(b) - anti(a)
    }
}

/// Composite Gauss rule on `[0, t]` with panels geometrically refined
/// toward `s = t`, where both the weight ρ0⁻²(s) (as t → T) and the state
/// factor e^{cπ²q²(s−t)} vary fastest.
fn refined_panels(t: f64) -> impl Iterator<Item = (f64, f64)> {
    const LEVELS: usize = 52;
    (0..LEVELS).map(move |j| {
        let lo = t * (1.0 - 0.5f64.powi(j as i32));
        let hi = if j + 1 == LEVELS { t } else { t * (1.0 - 0.5f64.powi(j as i32 + 1)) };
        (lo, hi)
    })
}

/// `d_{p,q}(t)` by quadrature; nonnegative and nondecreasing in `t`.
/// At `t = T` this is the time factor of the Gram matrix 𝓜.
pub fn d_pq(
    rho0: &WeightSpec,
    c: f64,
    t: f64,
    p: usize,
    q: usize,
) -> Result<f64, WeightError> {
    let t_final = rho0.t_final;
    let (kp, kq) = (
        c * PI * PI * (p * p) as f64,
        c * PI * PI * (q * q) as f64,
    );
    let quad = QuadRule::gauss(12);
    let mut acc = 0.0;
    for (lo, hi) in refined_panels(t) {
        if hi <= lo {
            continue;
        }
        let len = hi - lo;
        for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
            let s = lo + node * len;
            let w0i = rho0.eval_inv(s)?;
            acc += weight * len * w0i * w0i * (kp * (s - t_final) + kq * (s - t)).exp();
        }
    }
    Ok(acc)
}

/// Relative errors of one discrete solution against the Fourier reference.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    /// `‖ρ0(v_ε − v_h)‖_{L²(q_T)} / ‖ρ0 v_ε‖_{L²(q_T)}`.
    pub control_rel: f64,
    /// `‖y_ε − y_h‖_{L²(Q_T)} / ‖y_ε‖_{L²(Q_T)}`.
    pub state_rel: f64,
    /// Numerator of the control error.
    pub control_abs: f64,
    /// Numerator of the state error.
    pub state_abs: f64,
    /// `‖ρ0 v_ε‖_{L²(q_T)}` of the reference control.
    pub control_ref_norm: f64,
    /// `‖y_ε‖_{L²(Q_T)}` of the reference state.
    pub state_ref_norm: f64,
}

/// Truncated Fourier reference solution (φ_ε, v_ε, y_ε).
#[derive(Debug, Clone)]
pub struct FourierOracle {
    pub n_modes: usize,
    /// Coefficients a_p of the optimal terminal datum, index p−1.
    pub a: Vec<f64>,
    /// Sine coefficients b⁰_q of the initial datum, index q−1.
    pub b0: Vec<f64>,
    pub epsilon: f64,
    pub c: f64,
    pub t_final: f64,
    pub omega: (f64, f64),
    pub rho0: WeightSpec,
    /// `‖𝓜a − 𝓕‖₂ / ‖𝓕‖₂` after refinement.
    pub residual: f64,
    /// `|a_N| / ‖a‖∞`: relative weight of the last retained mode.
    pub tail: f64,
}

impl FourierOracle {
    /// Assembles and solves the truncated optimality system for the data in
    /// `spec` (which must have constant diffusion, zero potential, ε > 0).
    pub fn build_and_solve(n_modes: usize, spec: &ProblemSpec) -> Result<Self, OracleError> {
        if n_modes == 0 {
            return Err(OracleError::NoModes);
        }
        if spec.epsilon <= 0.0 {
            return Err(OracleError::NonPositiveEpsilon(spec.epsilon));
        }
        let c = spec.c.as_const().ok_or(OracleError::UnsupportedCoefficients)?;
        match spec.d.as_const() {
            Some(d) if d == 0.0 => {}
            _ => return Err(OracleError::UnsupportedCoefficients),
        }
        let t_final = spec.t_final;
        let b0 = sine_coefficients(&spec.y0, n_modes);

        // Time factor of the Gram matrix depends on p²+q² only.
        let mut time_factor = std::collections::HashMap::new();
        for p in 1..=n_modes {
            for q in p..=n_modes {
                time_factor
                    .entry(p * p + q * q)
                    .or_insert(d_pq(&spec.rho0, c, t_final, p, q)?);
            }
        }
        let m = nalgebra::DMatrix::from_fn(n_modes, n_modes, |i, j| {
            let (p, q) = (i + 1, j + 1);
            let tf = time_factor[&(p * p + q * q)];
            0.5 * c_pq(spec.omega, p, q) * tf + if i == j { 0.5 * spec.epsilon } else { 0.0 }
        });
        let f = nalgebra::DVector::from_fn(n_modes, |i, _| {
            let p = (i + 1) as f64;
            -0.5 * b0[i] * (-c * PI * PI * p * p * t_final).exp()
        });
        let chol = m.clone().cholesky().ok_or(OracleError::Factorization)?;
        let mut a = chol.solve(&f);
        // One or two steps of iterative refinement push the residual to the
        // rounding floor even when ε is tiny and 𝓜 is ill conditioned.
        let f_norm = f.norm();
        let mut residual = (&f - &m * &a).norm() / f_norm.max(f64::MIN_POSITIVE);
        for _ in 0..3 {
            if residual <= 1e-14 {
                break;
            }
            let corr = chol.solve(&(&f - &m * &a));
            a += corr;
            residual = (&f - &m * &a).norm() / f_norm.max(f64::MIN_POSITIVE);
        }
        let a: Vec<f64> = a.iter().copied().collect();
        let amax = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let tail = if amax > 0.0 { a[n_modes - 1].abs() / amax } else { 0.0 };
        Ok(FourierOracle {
            n_modes,
            a,
            b0,
            epsilon: spec.epsilon,
            c,
            t_final,
            omega: spec.omega,
            rho0: spec.rho0,
            residual,
            tail,
        })
    }

    /// Adjoint state φ_ε(x,t) = Σ_p a_p e^{cπ²p²(t−T)} sin(pπx).
    pub fn eval_phi(&self, x: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &ap) in self.a.iter().enumerate() {
            let p = (i + 1) as f64;
            acc += ap * (self.c * PI * PI * p * p * (t - self.t_final)).exp() * (p * PI * x).sin();
        }
        acc
    }

    /// Reference control v_ε = ρ0⁻²φ_ε·1_ω.
    pub fn eval_v(&self, x: f64, t: f64) -> f64 {
        let (a, b) = self.omega;
        if x < a || x > b {
            return 0.0;
        }
        let w0i = self.rho0.eval_inv(t).expect("t within [0, T]");
        w0i * w0i * self.eval_phi(x, t)
    }

    /// Weighted control ρ0·v_ε = ρ0⁻¹φ_ε·1_ω — the quantity the error
    /// tables measure; finite up to t = T.
    pub fn eval_weighted_v(&self, x: f64, t: f64) -> f64 {
        let (a, b) = self.omega;
        if x < a || x > b {
            return 0.0;
        }
        self.rho0.eval_inv(t).expect("t within [0, T]") * self.eval_phi(x, t)
    }

    /// Modal coefficients Y_q(t) of the controlled state at time `t`.
    pub fn state_modes_at(&self, t: f64) -> Vec<f64> {
        let n = self.n_modes;
        let mut y = vec![0.0; n];
        for (qi, yq) in y.iter_mut().enumerate() {
            let q = qi + 1;
            let qf = q as f64;
            *yq = (-self.c * PI * PI * qf * qf * t).exp() * self.b0[qi];
            for (pi, &ap) in self.a.iter().enumerate() {
                let p = pi + 1;
                *yq += ap
                    * c_pq(self.omega, p, q)
                    * d_pq(&self.rho0, self.c, t, p, q).expect("t within [0, T]");
            }
        }
        y
    }

    /// Controlled state y_ε(x,t) by Duhamel's formula.
    pub fn eval_y(&self, x: f64, t: f64) -> f64 {
        self.state_modes_at(t)
            .iter()
            .enumerate()
            .map(|(qi, yq)| yq * ((qi + 1) as f64 * PI * x).sin())
            .sum()
    }

    /// `‖y_ε(·,T)‖_{L²(0,1)} = ε·‖φ_T‖` via the terminal identity
    /// y_ε(·,T) = −ε·φ_ε(·,T).
    pub fn terminal_state_norm(&self) -> f64 {
        self.epsilon * (0.5 * self.a.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Value of the dual functional at the optimum, −½·aᵀ𝓕.
    pub fn optimal_value(&self) -> f64 {
        let mut acc = 0.0;
        for (i, &ap) in self.a.iter().enumerate() {
            let p = (i + 1) as f64;
            acc += ap * -0.5 * self.b0[i] * (-self.c * PI * PI * p * p * self.t_final).exp();
        }
        -0.5 * acc
    }
}

/// Sine coefficients of the initial datum: exact for modal data, composite
/// Gauss quadrature otherwise.
fn sine_coefficients(y0: &InitialData, n_modes: usize) -> Vec<f64> {
    match y0 {
        InitialData::SineModes(modes) => {
            let mut b0 = vec![0.0; n_modes];
            for (k, &v) in modes.iter().enumerate() {
                if k < n_modes {
                    b0[k] = v;
                }
            }
            b0
        }
        custom => {
            let panels = (4 * n_modes).max(64);
            let quad = QuadRule::gauss(6);
            let mut b0 = vec![0.0; n_modes];
            for e in 0..panels {
                let lo = e as f64 / panels as f64;
                let len = 1.0 / panels as f64;
                for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
                    let x = lo + node * len;
                    let fv = custom.eval(x);
                    for (qi, b) in b0.iter_mut().enumerate() {
                        let q = (qi + 1) as f64;
                        *b += 2.0 * weight * len * fv * (q * PI * x).sin();
                    }
                }
            }
            b0
        }
    }
}

/// Relative control and state errors of a mixed solution against the
/// Fourier reference, integrated with the assembly Gauss rule. The state
/// modes are advanced through the quadrature time levels by one recursion
/// step each, so the cost stays linear in the number of levels:
/// `d_pq(t₁) = e^{−cπ²q²(t₁−t₀)}·d_pq(t₀) + ∫_{t₀}^{t₁} …`.
pub fn error_report(
    oracle: &FourierOracle,
    sys: &MixedSystem,
    sol: &MixedSolution,
) -> Result<ErrorReport, OracleError> {
    let spec = &sys.spec;
    if spec.epsilon != oracle.epsilon {
        return Err(OracleError::SpecMismatch("the penalty parameter ε"));
    }
    if spec.c.as_const() != Some(oracle.c) {
        return Err(OracleError::SpecMismatch("the diffusion coefficient"));
    }
    if spec.omega != oracle.omega {
        return Err(OracleError::SpecMismatch("the control window"));
    }
    if spec.t_final != oracle.t_final || sys.mesh.t_final != oracle.t_final {
        return Err(OracleError::SpecMismatch("the time horizon"));
    }
    if spec.rho0 != oracle.rho0 {
        return Err(OracleError::SpecMismatch("the control weight"));
    }

    let mesh = &sys.mesh;
    let quad = QuadRule::gauss(sys.quad_order);
    let n = oracle.n_modes;
    let kpi = PI * PI * oracle.c;

    // x-quadrature nodes over (0,1) and over the control window.
    let mut x_full: Vec<(f64, f64)> = Vec::new(); // (x, weight)
    let mut x_window: Vec<(f64, f64)> = Vec::new();
    let (wa, wb) = spec.omega;
    for i in 0..mesh.nx {
        let x0 = i as f64 * mesh.dx;
        for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
            x_full.push((x0 + node * mesh.dx, weight * mesh.dx));
        }
        let (lo, hi) = (wa.max(x0), wb.min(x0 + mesh.dx));
        if hi - lo > 1e-14 * mesh.dx {
            for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
                x_window.push((lo + node * (hi - lo), weight * (hi - lo)));
            }
        }
    }
    // Precomputed sine tables, mode-major.
    let sines = |pts: &[(f64, f64)]| -> Vec<Vec<f64>> {
        (1..=n)
            .map(|p| pts.iter().map(|&(x, _)| (p as f64 * PI * x).sin()).collect())
            .collect()
    };
    let sin_full = sines(&x_full);
    let sin_window = sines(&x_window);

    let control = ControlField::new(sys, sol);
    let panel_quad = QuadRule::gauss(8);

    // Recursion state for d_pq, flattened p-major.
    let mut d = vec![0.0; n * n];
    let mut t_prev = 0.0;
    let (mut c_num, mut c_den, mut s_num, mut s_den) = (0.0, 0.0, 0.0, 0.0);

    // Window overlaps c_pq(ω), p-major.
    let cmat: Vec<f64> = (1..=n)
        .flat_map(|p| (1..=n).map(move |q| (p, q)))
        .map(|(p, q)| c_pq(spec.omega, p, q))
        .collect();

    for row in 0..mesh.nt {
        let t0 = row as f64 * mesh.dt;
        for (t_node, t_weight) in quad.nodes.iter().zip(&quad.weights) {
            let t = t0 + t_node * mesh.dt;
            let wt = t_weight * mesh.dt;

            // Advance the state mode integrals from t_prev to t.
            let dt_step = t - t_prev;
            for q in 1..=n {
                let decay = (-kpi * (q * q) as f64 * dt_step).exp();
                for p in 1..=n {
                    d[(p - 1) * n + (q - 1)] *= decay;
                }
            }
            for (node, weight) in panel_quad.nodes.iter().zip(&panel_quad.weights) {
                let s = t_prev + node * dt_step;
                let w0i = oracle.rho0.eval_inv(s)?;
                let base = weight * dt_step * w0i * w0i;
                if base == 0.0 {
                    continue;
                }
                let up: Vec<f64> = (1..=n)
                    .map(|p| (kpi * (p * p) as f64 * (s - oracle.t_final)).exp())
                    .collect();
                let zq: Vec<f64> = (1..=n).map(|q| (kpi * (q * q) as f64 * (s - t)).exp()).collect();
                for p in 0..n {
                    let bup = base * up[p];
                    if bup == 0.0 {
                        continue;
                    }
                    for q in 0..n {
                        d[p * n + q] += bup * zq[q];
                    }
                }
            }
            t_prev = t;

            // State modes and the modal factors of the weighted control.
            let y_modes: Vec<f64> = (1..=n)
                .map(|q| {
                    let mut yq = (-kpi * (q * q) as f64 * t).exp() * oracle.b0[q - 1];
                    for p in 1..=n {
                        yq += oracle.a[p - 1] * cmat[(p - 1) * n + (q - 1)] * d[(p - 1) * n + (q - 1)];
                    }
                    yq
                })
                .collect();
            let w0i_t = oracle.rho0.eval_inv(t)?;
            let phi_modes: Vec<f64> = (1..=n)
                .map(|p| oracle.a[p - 1] * (kpi * (p * p) as f64 * (t - oracle.t_final)).exp())
                .collect();

            // State error over the full section.
            for (k, &(x, wx)) in x_full.iter().enumerate() {
                let mut y_ref = 0.0;
                for (q, ym) in y_modes.iter().enumerate() {
                    y_ref += ym * sin_full[q][k];
                }
                let y_num = match sys.formulation {
                    Formulation::Mf1 | Formulation::Mf2 => eval_mult(sys, &sol.lambda, x, t),
                    Formulation::Mf3Norm => {
                        spec.rho.eval_inv(t)? * eval_mult(sys, &sol.lambda, x, t)
                    }
                };
                let w = wt * wx;
                s_num += w * (y_ref - y_num) * (y_ref - y_num);
                s_den += w * y_ref * y_ref;
            }

            // Weighted control error over the window section.
            for (k, &(x, wx)) in x_window.iter().enumerate() {
                let mut phi_ref = 0.0;
                for (p, pm) in phi_modes.iter().enumerate() {
                    phi_ref += pm * sin_window[p][k];
                }
                let v_ref = w0i_t * phi_ref;
                let v_num = control.eval_weighted(x, t)?;
                let w = wt * wx;
                c_num += w * (v_ref - v_num) * (v_ref - v_num);
                c_den += w * v_ref * v_ref;
            }
        }
    }

    Ok(ErrorReport {
        control_rel: (c_num / c_den).sqrt(),
        state_rel: (s_num / s_den).sqrt(),
        control_abs: c_num.sqrt(),
        state_abs: s_num.sqrt(),
        control_ref_norm: c_den.sqrt(),
        state_ref_norm: s_den.sqrt(),
    })
}
