//! Time weights with prescribed blow-up at the final time.
//!
//! The weighted formulations measure the adjoint variable with a weight
//! `ρ0(t)` that blows up as `t → T⁻`, which forces the associated control to
//! vanish smoothly at the final time. The working pair is
//!
//! ```text
//! ρ0(t) = (T-t)^s · exp(K1/(T-t))      (s = 3/2 in all experiments),
//! ρ(t)  =           exp(K1/(T-t)),
//! ```
//!
//! together with their inverses, which extend continuously by `0` at `t = T`
//! because the exponential dominates any negative power. Only the inverses
//! are ever integrated; the direct evaluators refuse `t ≥ T`.
//!
//! The change of variable `ψ = ρ0⁻¹φ` used by the `ε = 0` formulation turns
//! `ρ⁻¹L*(ρ0ψ)` into `α1(t)·L*ψ + α0(t)·ψ` with bounded coefficients; see
//! [`WeightSpec::normalized_coeffs`].

use thiserror::Error;

/// Functional form of a weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    /// Constant weight 1 (unweighted formulations).
    Unit,
    /// `(T-t)^s · exp(k1/(T-t))` with `s ≥ 0`, `k1 > 0`.
    PolyExp { s: f64, k1: f64 },
    /// Carleman-type weight `exp(β(x)/(T-t))` with interior-maximized `β`.
    ///
    /// Declared for completeness of the typing; carries the two constants of
    /// its definition but has no evaluator, because the auxiliary function
    /// `β0` entering `β` is only characterized abstractly (existence of
    /// sufficiently large constants), not constructed.
    CarlemanTyped { k1: f64, k2: f64 },
}

/// A weight function of time on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    /// Final time `T` of the cylinder.
    pub t_final: f64,
}

/// Errors from weight evaluation.
#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("weight is singular at t = {t} (requires 0 <= t < T = {t_final})")]
    OutOfDomain { t: f64, t_final: f64 },
    #[error("Carleman-typed weights carry no evaluator")]
    UnsupportedVariant,
    #[error("normalized coefficients require the (poly-exp, exp) pair with matching K1")]
    UnsupportedPair,
}

impl WeightSpec {
    /// The pair `(ρ0, ρ)` with `s = 3/2`, `K1 = 3/4` used throughout the
    /// numerical experiments.
    pub fn standard_pair(t_final: f64) -> (WeightSpec, WeightSpec) {
        (
            WeightSpec { kind: WeightKind::PolyExp { s: 1.5, k1: 0.75 }, t_final },
            WeightSpec { kind: WeightKind::PolyExp { s: 0.0, k1: 0.75 }, t_final },
        )
    }

    /// Unit weight (turns every weighted term into its unweighted analogue).
    pub fn unit(t_final: f64) -> WeightSpec {
        WeightSpec { kind: WeightKind::Unit, t_final }
    }

    fn check_domain(&self, t: f64) -> Result<(), WeightError> {
        if t < 0.0 || t >= self.t_final {
            Err(WeightError::OutOfDomain { t, t_final: self.t_final })
        } else {
            Ok(())
        }
    }

    /// Evaluates the weight itself. Errors for `t ≥ T` (blow-up) and for the
    /// Carleman-typed variant.
    pub fn eval(&self, t: f64) -> Result<f64, WeightError> {
        match self.kind {
            WeightKind::Unit => Ok(1.0),
            WeightKind::PolyExp { s, k1 } => {
                self.check_domain(t)?;
                let u = self.t_final - t;
                // exp-log form avoids 0·∞ at tiny T-t.
                Ok((s * u.ln() + k1 / u).exp())
            }
            WeightKind::CarlemanTyped { .. } => Err(WeightError::UnsupportedVariant),
        }
    }

    /// Evaluates the inverse weight on `[0, T]`, extended continuously by `0`
    /// at `t = T` for the poly-exp family.
    pub fn eval_inv(&self, t: f64) -> Result<f64, WeightError> {
        match self.kind {
            WeightKind::Unit => Ok(1.0),
            WeightKind::PolyExp { s, k1 } => {
                if t < 0.0 || t > self.t_final {
                    return Err(WeightError::OutOfDomain { t, t_final: self.t_final });
                }
                let u = self.t_final - t;
                if u == 0.0 {
                    return Ok(0.0);
                }
                Ok((-s * u.ln() - k1 / u).exp())
            }
            WeightKind::CarlemanTyped { .. } => Err(WeightError::UnsupportedVariant),
        }
    }

    /// Bounded coefficients `(α1, α0)` of the normalized adjoint operator.
    ///
    /// For the pair `ρ0 = (T-t)^s e^{K1/(T-t)}`, `ρ = e^{K1/(T-t)}` the
    /// product rule gives, for any smooth `ψ`,
    ///
    /// ```text
    /// ρ⁻¹ L*(ρ0 ψ) = α1(t)·L*ψ + α0(t)·ψ,
    /// α1 = ρ0/ρ = (T-t)^s,
    /// α0 = -(ρ0)'/ρ = s(T-t)^{s-1} - K1(T-t)^{s-2},
    /// ```
    ///
    /// so for `s = 3/2`: `α1 = (T-t)^{3/2}` and
    /// `α0 = (3/2)(T-t)^{1/2} - K1(T-t)^{-1/2}`. Both stay integrable up to
    /// `t = T`, which is the point of the normalization: the assembled forms
    /// see only `α1, α0` and never the exponentially large weights.
    ///
    /// `self` is the `ρ0` spec; `rho` must be the matching pure-exponential
    /// spec (same `K1`, same `T`, `s = 0`), otherwise the cancellation of the
    /// exponential does not take place and the call is rejected.
    pub fn normalized_coeffs(&self, rho: &WeightSpec, t: f64) -> Result<(f64, f64), WeightError> {
        let (s, k1) = match self.kind {
            WeightKind::PolyExp { s, k1 } => (s, k1),
            _ => return Err(WeightError::UnsupportedPair),
        };
        match rho.kind {
            WeightKind::PolyExp { s: 0.0, k1: k1r } if k1r == k1 && rho.t_final == self.t_final => {}
            _ => return Err(WeightError::UnsupportedPair),
        }
        self.check_domain(t)?;
        let u = self.t_final - t;
        let alpha1 = u.powf(s);
        let alpha0 = s * u.powf(s - 1.0) - k1 * u.powf(s - 2.0);
        Ok((alpha1, alpha0))
    }

    /// True when this weight is identically 1.
    pub fn is_unit(&self) -> bool {
        matches!(self.kind, WeightKind::Unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const T: f64 = 0.5;

    fn pair() -> (WeightSpec, WeightSpec) {
        WeightSpec::standard_pair(T)
    }

    #[test]
    fn unit_weight_is_one_everywhere() {
        let w = WeightSpec::unit(1.0);
        for t in [0.0, 0.3, 0.999] {
            assert_eq!(w.eval(t).unwrap(), 1.0);
            assert_eq!(w.eval_inv(t).unwrap(), 1.0);
        }
        assert_eq!(w.eval_inv(1.0).unwrap(), 1.0);
    }

    #[test]
    fn rho0_matches_high_precision_reference() {
        let (rho0, rho) = pair();
        // Reference values from 40-digit evaluation of the closed forms.
        assert_relative_eq!(rho0.eval(0.0).unwrap(), 1.5845163664028398, max_relative = 1e-15);
        assert_relative_eq!(rho0.eval_inv(0.25).unwrap(), 0.39829654694291154, max_relative = 1e-15);
        assert_relative_eq!(rho.eval(0.0).unwrap(), 4.481689070338065, max_relative = 1e-15);
        assert_relative_eq!(rho.eval_inv(0.3).unwrap(), 0.023517745856009108, max_relative = 1e-15);
    }

    #[test]
    fn direct_eval_rejects_terminal_time() {
        let (rho0, _) = pair();
        assert!(matches!(rho0.eval(T), Err(WeightError::OutOfDomain { .. })));
        assert!(matches!(rho0.eval(T + 0.1), Err(WeightError::OutOfDomain { .. })));
        assert!(matches!(rho0.eval(-0.01), Err(WeightError::OutOfDomain { .. })));
    }

    #[test]
    fn inverse_extends_by_zero_at_terminal_time() {
        let (rho0, rho) = pair();
        assert_eq!(rho0.eval_inv(T).unwrap(), 0.0);
        assert_eq!(rho.eval_inv(T).unwrap(), 0.0);
        // Continuity of the extension: already below 1e-12 at T - T/50.
        let near = rho0.eval_inv(T - T / 50.0).unwrap();
        assert!(near > 0.0 && near < 1e-12, "rho0_inv(T - T/50) = {near}");
        assert_relative_eq!(near, 2.678636961808078e-30, max_relative = 1e-13);
        // No NaN from the 0·∞ fight immediately below T.
        let closest = rho0.eval_inv(T - 1e-300).unwrap();
        assert_eq!(closest, 0.0);
    }

    #[test]
    fn rho0_blows_up_monotonically_near_terminal_time() {
        let (rho0, _) = pair();
        let mut last = rho0.eval(0.4).unwrap();
        for k in 1..40 {
            let t = 0.4 + 0.0024 * k as f64;
            let v = rho0.eval(t).unwrap();
            assert!(v > last, "rho0 must increase towards T on the terminal subinterval");
            last = v;
        }
        assert!(rho0.eval(T - 1e-6).unwrap() > 1e100);
    }

    #[test]
    fn carleman_variant_has_no_evaluator() {
        let w = WeightSpec { kind: WeightKind::CarlemanTyped { k1: 1.0, k2: 2.0 }, t_final: 1.0 };
        assert_eq!(w.eval(0.1), Err(WeightError::UnsupportedVariant));
        assert_eq!(w.eval_inv(0.1), Err(WeightError::UnsupportedVariant));
    }

    #[test]
    fn normalized_coeffs_match_reference_values() {
        let (rho0, rho) = pair();
        let (a1, a0) = rho0.normalized_coeffs(&rho, 0.0).unwrap();
        // At t=0 with T=1/2, K1=3/4 the zeroth coefficient vanishes exactly:
        // (3/2)(T-t) = K1 there.
        assert_relative_eq!(a1, 0.3535533905932738, max_relative = 1e-15);
        assert!(a0.abs() < 1e-15, "alpha0(0) = {a0}");
        let (a1, a0) = rho0.normalized_coeffs(&rho, 0.25).unwrap();
        assert_relative_eq!(a1, 0.125, max_relative = 1e-15);
        assert_relative_eq!(a0, -0.75, max_relative = 1e-15);
        let (a1, a0) = rho0.normalized_coeffs(&rho, 0.4).unwrap();
        assert_relative_eq!(a1, 0.03162277660168379, max_relative = 1e-14);
        assert_relative_eq!(a0, -1.8973665961010276, max_relative = 1e-14);
    }

    #[test]
    fn normalized_coeffs_reject_mismatched_pairs() {
        let (rho0, _) = pair();
        let wrong_k1 = WeightSpec { kind: WeightKind::PolyExp { s: 0.0, k1: 0.8 }, t_final: T };
        let wrong_t = WeightSpec { kind: WeightKind::PolyExp { s: 0.0, k1: 0.75 }, t_final: 1.0 };
        let not_exp = WeightSpec { kind: WeightKind::PolyExp { s: 1.0, k1: 0.75 }, t_final: T };
        assert_eq!(rho0.normalized_coeffs(&wrong_k1, 0.1), Err(WeightError::UnsupportedPair));
        assert_eq!(rho0.normalized_coeffs(&wrong_t, 0.1), Err(WeightError::UnsupportedPair));
        assert_eq!(rho0.normalized_coeffs(&not_exp, 0.1), Err(WeightError::UnsupportedPair));
        assert_eq!(
            WeightSpec::unit(T).normalized_coeffs(&not_exp, 0.1),
            Err(WeightError::UnsupportedPair)
        );
    }

    /// Product-rule oracle: for polynomial ψ and the heat adjoint
    /// L*w = -w_t - c w_xx + d w, the pair (α1, α0) must reproduce
    /// ρ⁻¹ L*(ρ0 ψ) evaluated directly from derivatives of ρ0.
    #[test]
    fn normalized_pair_cancels_exponential() {
        let (rho0, rho) = pair();
        let (c, d) = (0.1, 0.3);
        // ψ(x,t) = (1 + 2x²)(1 - t + t²), chosen with no special symmetry.
        let psi = |x: f64, t: f64| (1.0 + 2.0 * x * x) * (1.0 - t + t * t);
        let psi_t = |x: f64, t: f64| (1.0 + 2.0 * x * x) * (2.0 * t - 1.0);
        let psi_xx = |_x: f64, t: f64| 4.0 * (1.0 - t + t * t);
        let lstar_psi = |x: f64, t: f64| -psi_t(x, t) - c * psi_xx(x, t) + d * psi(x, t);
        // Direct route: L*(ρ0ψ) = ρ0·L*ψ - ρ0'·ψ with
        // ρ0'(t) = e^{K1/(T-t)}·(-(3/2)(T-t)^{1/2} + K1(T-t)^{-1/2}).
        let k1 = 0.75;
        let rho0_dt = |t: f64| {
            let u = T - t;
            (k1 / u).exp() * (-1.5 * u.sqrt() + k1 / u.sqrt())
        };
        for &(x, t) in &[(0.3, 0.0), (0.7, 0.12), (0.11, 0.25), (0.9, 0.37), (0.5, 0.46)] {
            let direct = rho.eval_inv(t).unwrap()
                * (rho0.eval(t).unwrap() * lstar_psi(x, t) - rho0_dt(t) * psi(x, t));
            let (a1, a0) = rho0.normalized_coeffs(&rho, t).unwrap();
            let via_coeffs = a1 * lstar_psi(x, t) + a0 * psi(x, t);
            let scale = direct.abs().max(1.0);
            assert!(
                (via_coeffs - direct).abs() <= 1e-10 * scale,
                "cancellation failed at (x,t)=({x},{t}): {via_coeffs} vs {direct}"
            );
        }
    }
}
