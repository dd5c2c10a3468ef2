//! Independent time-marching verification solver: the heat equation driven
//! by a computed (or manufactured) control, discretized with the C¹ Hermite
//! space in `x` and the two-step implicit Gear scheme (BDF2) in time. Its
//! final-time norm `‖y_h(·,T)‖_{L²(0,1)}` measures how well a control does
//! its job, through a discretization that shares nothing with the space-time
//! solves that produced the control.

use crate::assembly::{assemble_forward, AssemblyError, ForwardMatrices, ProblemSpec};
use crate::linalg::{LinalgError, SpdFactor, TripletBuilder};
use crate::mesh::QuadRule;
use crate::solvers::ControlField;
use crate::weights::WeightError;

#[derive(Debug, thiserror::Error)]
pub enum ForwardError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error("the time grid needs at least 2 steps (got {0})")]
    TooFewSteps(usize),
}

/// Right-hand side drive of the forward solve.
pub enum ForwardControl<'a> {
    /// Free decay, `v = 0`.
    Zero,
    /// A control computed by one of the mixed solves; already windowed by ω
    /// and weighted, so the load integrates it over the ω-overlap of each
    /// spatial cell.
    Field(&'a ControlField<'a>),
    /// An arbitrary source `v(x, t)` applied on all of `(0,1)` (for
    /// manufactured-solution tests).
    Custom(&'a dyn Fn(f64, f64) -> f64),
}

/// A completed forward run: the trajectory of Hermite coefficient vectors at
/// every time level, and the matrices that give its norms a meaning.
pub struct ForwardRun {
    pub nx_f: usize,
    pub nt_f: usize,
    /// `nt_f + 1` coefficient vectors, `trajectory[0]` = projected `y0`.
    pub trajectory: Vec<Vec<f64>>,
    pub t_final: f64,
    pub matrices: ForwardMatrices,
}

impl ForwardRun {
    /// `‖y_h(·,T)‖_{L²(0,1)} = √(yᵀMy)` at the last time level.
    pub fn final_norm(&self) -> f64 {
        self.norm_at(self.nt_f)
    }

    /// `√(yᵀMy)` at time level `step`.
    pub fn norm_at(&self, step: usize) -> f64 {
        let y = &self.trajectory[step];
        let mut my = vec![0.0; y.len()];
        self.matrices.mass.matvec(y, &mut my);
        y.iter().zip(&my).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    }

    /// Pointwise value of the trajectory at time level `step`.
    pub fn eval(&self, step: usize, x: f64) -> f64 {
        let space = &self.matrices.space;
        let e = ((x / space.dx) as usize).min(space.nx - 1);
        let xi = (x - e as f64 * space.dx) / space.dx;
        let shapes = space.shapes(xi);
        let coeffs = &self.trajectory[step];
        space
            .cell_dofs(e)
            .iter()
            .zip(shapes)
            .filter_map(|(dof, s)| dof.map(|g| coeffs[g] * s.0))
            .sum()
    }
}

/// Marches `M ẏ + K y = F(t)` from the L²-projected initial datum with BDF2
/// `(3yⁿ⁺¹ − 4yⁿ + yⁿ⁻¹)/(2Δt)` (first step backward Euler), the load
/// evaluated fully implicitly at `tⁿ⁺¹`.
pub fn solve_forward(
    spec: &ProblemSpec,
    control: ForwardControl<'_>,
    nx_f: usize,
    nt_f: usize,
    quad_order: usize,
) -> Result<ForwardRun, ForwardError> {
    if nt_f < 2 {
        return Err(ForwardError::TooFewSteps(nt_f));
    }
    let matrices = assemble_forward(nx_f, spec, quad_order)?;
    let n = matrices.space.n_dofs;
    let dt = spec.t_final / nt_f as f64;
    let quad = QuadRule::gauss(quad_order);

    let combine = |mass_coeff: f64| -> Result<SpdFactor, LinalgError> {
        let mut t = TripletBuilder::new();
        for (i, j, v) in matrices.mass.entries_lower() {
            t.push(i, j, mass_coeff * v);
        }
        for (i, j, v) in matrices.stiff.entries_lower() {
            t.push(i, j, v);
        }
        t.build_sym_lower(n)?.factor_spd()
    };
    let euler = combine(1.0 / dt)?;
    let gear = combine(1.5 / dt)?;

    // Load functional at a fixed time: ∫ v(·,t)·ψ_i.
    let load = |t: f64| -> Result<Vec<f64>, ForwardError> {
        let mut f = vec![0.0; n];
        let mut add_segment = |lo: f64, hi: f64, v: &mut dyn FnMut(f64) -> Result<f64, WeightError>|
         -> Result<(), ForwardError> {
            let space = &matrices.space;
            let e = ((lo / space.dx) as usize).min(space.nx - 1);
            let x0 = e as f64 * space.dx;
            let dofs = space.cell_dofs(e);
            for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
                let x = lo + node * (hi - lo);
                let w = weight * (hi - lo) * v(x)?;
                let shapes = space.shapes((x - x0) / space.dx);
                for (dof, s) in dofs.iter().zip(shapes) {
                    if let Some(g) = dof {
                        f[*g] += w * s.0;
                    }
                }
            }
            Ok(())
        };
        match &control {
            ForwardControl::Zero => {}
            ForwardControl::Field(field) => {
                // Integrate over the ω-overlap of each cell so the window
                // edges never cut through a quadrature panel.
                let (a, b) = spec.omega;
                for e in 0..nx_f {
                    let x0 = e as f64 * matrices.space.dx;
                    let (lo, hi) = (a.max(x0), b.min(x0 + matrices.space.dx));
                    if hi - lo > 1e-14 * matrices.space.dx {
                        add_segment(lo, hi, &mut |x| field.eval(x, t))?;
                    }
                }
            }
            ForwardControl::Custom(v) => {
                for e in 0..nx_f {
                    let x0 = e as f64 * matrices.space.dx;
                    add_segment(x0, x0 + matrices.space.dx, &mut |x| Ok(v(x, t)))?;
                }
            }
        }
        Ok(f)
    };

    // L² projection of y0: M y⁰ = ∫ y0 ψ_i.
    let mass_fact = matrices.mass.factor_spd()?;
    let mut rhs0 = vec![0.0; n];
    {
        let space = &matrices.space;
        for e in 0..nx_f {
            let x0 = e as f64 * space.dx;
            let dofs = space.cell_dofs(e);
            for (node, weight) in quad.nodes.iter().zip(&quad.weights) {
                let x = x0 + node * space.dx;
                let w = weight * space.dx * spec.y0.eval(x);
                let shapes = space.shapes(*node);
                for (dof, s) in dofs.iter().zip(shapes) {
                    if let Some(g) = dof {
                        rhs0[*g] += w * s.0;
                    }
                }
            }
        }
    }
    let y0 = mass_fact.solve(&rhs0);

    let mut trajectory = Vec::with_capacity(nt_f + 1);
    trajectory.push(y0);

    // Backward Euler first step: (M/Δt + K) y¹ = F(t¹) + M y⁰/Δt.
    {
        let mut rhs = load(dt)?;
        let mut my = vec![0.0; n];
        matrices.mass.matvec(&trajectory[0], &mut my);
        for (r, m) in rhs.iter_mut().zip(&my) {
            *r += m / dt;
        }
        trajectory.push(euler.solve(&rhs));
    }

    // Gear steps: (3M/(2Δt) + K) yⁿ⁺¹ = F(tⁿ⁺¹) + M (4yⁿ − yⁿ⁻¹)/(2Δt).
    for step in 1..nt_f {
        let t_next = (step + 1) as f64 * dt;
        let mut rhs = load(t_next)?;
        let mut comb = vec![0.0; n];
        for ((c, cur), prev) in comb.iter_mut().zip(&trajectory[step]).zip(&trajectory[step - 1]) {
            *c = (4.0 * cur - prev) / (2.0 * dt);
        }
        let mut mc = vec![0.0; n];
        matrices.mass.matvec(&comb, &mut mc);
        for (r, m) in rhs.iter_mut().zip(&mc) {
            *r += m;
        }
        trajectory.push(gear.solve(&rhs));
    }

    Ok(ForwardRun { nx_f, nt_f, trajectory, t_final: spec.t_final, matrices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_mf1, AssemblyOptions, InitialData};
    use crate::mesh::SpaceTimeMesh;
    use crate::solvers::{solve_direct, terminal_multiplier_norm};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn decay_norm(modes: &[f64], c: f64, t: f64) -> f64 {
        modes
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let q = (k + 1) as f64;
                0.5 * (b * (-c * PI * PI * q * q * t).exp()).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn uncontrolled_single_mode_decay() {
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let run = solve_forward(&spec, ForwardControl::Zero, 64, 200, 4).unwrap();
        let exact = decay_norm(&[1.0], 0.1, 0.5);
        assert_relative_eq!(exact, 4.31687e-1, max_relative = 1e-5);
        assert_relative_eq!(run.final_norm(), exact, max_relative = 5e-3);
    }

    #[test]
    fn uncontrolled_two_mode_decay_matches_analytic_sum() {
        let mut spec = ProblemSpec::baseline(1e-2, 1.0);
        spec.y0 = InitialData::SineModes(vec![1.0, 0.0, 0.3]);
        let run = solve_forward(&spec, ForwardControl::Zero, 64, 400, 4).unwrap();
        assert_relative_eq!(
            run.final_norm(),
            decay_norm(&[1.0, 0.0, 0.3], 0.1, 0.5),
            max_relative = 5e-3
        );
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let mut spec = ProblemSpec::baseline(1e-2, 1.0);
        spec.y0 = InitialData::SineModes(vec![]);
        let run = solve_forward(&spec, ForwardControl::Zero, 16, 8, 4).unwrap();
        for level in &run.trajectory {
            assert!(level.iter().all(|v| v.abs() < 1e-14));
        }
        assert_eq!(run.final_norm(), 0.0);
    }

    #[test]
    fn gear_steps_converge_at_second_order() {
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let exact = decay_norm(&[1.0], 0.1, 0.5);
        // Fine space (Nx=128) keeps the spatial error ~1e-7, far below the
        // temporal errors being measured.
        let errs: Vec<f64> = [25usize, 50, 100]
            .iter()
            .map(|&nt| {
                let run = solve_forward(&spec, ForwardControl::Zero, 128, nt, 4).unwrap();
                (run.final_norm() - exact).abs()
            })
            .collect();
        for pair in errs.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.0..5.5).contains(&ratio), "halving Δt gave error ratio {ratio}");
        }
    }

    #[test]
    fn trajectory_is_linear_in_data_and_control() {
        let source = |x: f64, t: f64| (2.0 * PI * x).sin() * (1.0 + t);
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let mut spec0 = spec.clone();
        spec0.y0 = InitialData::SineModes(vec![]);
        let full = solve_forward(&spec, ForwardControl::Custom(&source), 24, 20, 4).unwrap();
        let data_only = solve_forward(&spec, ForwardControl::Zero, 24, 20, 4).unwrap();
        let source_only = solve_forward(&spec0, ForwardControl::Custom(&source), 24, 20, 4).unwrap();
        let scale: f64 =
            full.trajectory.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        for (step, level) in full.trajectory.iter().enumerate() {
            for (k, v) in level.iter().enumerate() {
                let sum = data_only.trajectory[step][k] + source_only.trajectory[step][k];
                assert!((v - sum).abs() <= 1e-10 * scale.max(1.0), "step {step}, dof {k}");
            }
        }
    }

    /// Two-route check: the forward march driven by a computed control must
    /// land on the same final norm as the space-time solve's multiplier.
    #[test]
    fn forward_march_confirms_computed_control() {
        let spec = ProblemSpec::baseline(1e-2, 1.0);
        let mesh = SpaceTimeMesh::new(20, 10, 0.5).unwrap();
        let sys = assemble_mf1(&mesh, &spec, &AssemblyOptions::default()).unwrap();
        let sol = solve_direct(&sys).unwrap();
        let field = ControlField::new(&sys, &sol);
        let run = solve_forward(&spec, ForwardControl::Field(&field), 40, 40, 4).unwrap();
        let multiplier_norm = terminal_multiplier_norm(&sys, &sol);
        assert_relative_eq!(run.final_norm(), multiplier_norm, max_relative = 5e-2);
    }
}
