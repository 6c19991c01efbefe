//! Over-approximations `f̄(q, v, D)` of one-step reachable sets.
//!
//! Two operators are provided. `ExactLinear` evaluates affine dynamics with
//! monotone interval arithmetic, which is the interval hull of the image and
//! hence tight (δ = 0). `GrowthBound` returns a box around the image of the
//! cell centre whose half-widths are `L(v)·r + b(v)`.
//!
//! For the unicycle the growth matrix comes from global Jacobian bounds: with
//! `x¹⁺ = x¹ + τ(u¹ cos x³ + w¹)` we have `|∂x¹⁺/∂x³| ≤ τ|u¹|`, and likewise for
//! `x²⁺`, so
//!
//! ```text
//!        ⎡1 0 τ|u¹|⎤
//! L(v) = ⎢0 1 τ|u¹|⎥ ,   b(v) = τ·(half-widths of D).
//!        ⎣0 0   1  ⎦
//! ```
//!
//! For affine dynamics the derived growth matrix is `|A|` and `b = |E|·r_D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HyperRect;
use crate::systems::{AffineDynamics, Dynamics, SystemSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReachOperator {
    ExactLinear,
    /// Growth-bound operator. `matrix` and `offset`, when given, replace the
    /// growth matrix and disturbance term derived from the dynamics.
    GrowthBound {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<f64>>,
    },
}

impl ReachOperator {
    pub fn growth_bound() -> Self {
        ReachOperator::GrowthBound {
            matrix: None,
            offset: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ReachOperator::ExactLinear => "exact_linear",
            ReachOperator::GrowthBound { .. } => "growth_bound",
        }
    }

    /// Declared tightness δ. `None` means "some unknown finite bound".
    pub fn declared_delta(&self) -> Option<f64> {
        match self {
            ReachOperator::ExactLinear => Some(0.0),
            ReachOperator::GrowthBound { .. } => None,
        }
    }

    /// Checks that the operator applies to the system.
    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        let n = sys.state_dim();
        match self {
            ReachOperator::ExactLinear => {
                sys.dynamics()
                    .as_affine()
                    .ok_or(Error::NotAffine(sys.dynamics().name()))?;
            }
            ReachOperator::GrowthBound { matrix, offset } => {
                if let Some(m) = matrix {
                    if m.len() != n || m.iter().any(|row| row.len() != n) {
                        return Err(Error::DimensionMismatch {
                            what: "growth matrix",
                            expected: n,
                            got: m.len(),
                        });
                    }
                    if m.iter().flatten().any(|v| *v < 0.0 || !v.is_finite()) {
                        return Err(Error::System("growth matrix entries must be finite and >= 0".into()));
                    }
                }
                if let Some(b) = offset {
                    if b.len() != n {
                        return Err(Error::DimensionMismatch {
                            what: "growth offset",
                            expected: n,
                            got: b.len(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Over-approximation of `f(cell, v, D)`.
    pub fn reach(&self, sys: &SystemSpec, cell: &HyperRect, v: &[f64]) -> Result<HyperRect> {
        match self {
            ReachOperator::ExactLinear => reach_exact_linear(sys, cell, v),
            ReachOperator::GrowthBound { matrix, offset } => {
                reach_growth_bound_with(sys, cell, v, matrix.as_deref(), offset.as_deref())
            }
        }
    }

    /// Prepares a reusable evaluator, hoisting per-system work out of the
    /// per-cell loop.
    pub(crate) fn evaluator<'a>(&'a self, sys: &'a SystemSpec) -> Result<Evaluator<'a>> {
        self.validate(sys)?;
        let affine = sys.dynamics().as_affine();
        Ok(Evaluator {
            op: self,
            sys,
            affine,
        })
    }
}

pub(crate) struct Evaluator<'a> {
    op: &'a ReachOperator,
    sys: &'a SystemSpec,
    affine: Option<AffineDynamics>,
}

impl Evaluator<'_> {
    pub(crate) fn eval(&self, cell: &HyperRect, v: &[f64]) -> Result<HyperRect> {
        match (self.op, &self.affine) {
            (ReachOperator::ExactLinear, Some(aff)) => {
                Ok(affine_interval(aff, cell, v, self.sys.disturbance_set()))
            }
            _ => self.op.reach(self.sys, cell, v),
        }
    }
}

fn check_dims(sys: &SystemSpec, cell: &HyperRect, v: &[f64]) -> Result<()> {
    if cell.dim() != sys.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "cell",
            expected: sys.state_dim(),
            got: cell.dim(),
        });
    }
    if v.len() != sys.input_dim() {
        return Err(Error::DimensionMismatch {
            what: "input",
            expected: sys.input_dim(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Interval hull of `f(cell, v, D)` for affine dynamics.
pub fn reach_exact_linear(sys: &SystemSpec, cell: &HyperRect, v: &[f64]) -> Result<HyperRect> {
    check_dims(sys, cell, v)?;
    let aff = sys
        .dynamics()
        .as_affine()
        .ok_or(Error::NotAffine(sys.dynamics().name()))?;
    Ok(affine_interval(&aff, cell, v, sys.disturbance_set()))
}

fn affine_interval(aff: &AffineDynamics, cell: &HyperRect, v: &[f64], dist: &HyperRect) -> HyperRect {
    let n = aff.a.len();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let c = aff.c.get(i).copied().unwrap_or(0.0);
        let (mut l, mut h) = (c, c);
        for (j, &a) in aff.a[i].iter().enumerate() {
            let (p, q) = (a * cell.lo()[j], a * cell.hi()[j]);
            l += p.min(q);
            h += p.max(q);
        }
        for (j, &b) in aff.b[i].iter().enumerate() {
            l += b * v[j];
            h += b * v[j];
        }
        for (j, &e) in aff.e[i].iter().enumerate() {
            let (p, q) = (e * dist.lo()[j], e * dist.hi()[j]);
            l += p.min(q);
            h += p.max(q);
        }
        lo.push(l);
        hi.push(h);
    }
    HyperRect::from_parts_unchecked(lo, hi)
}

/// Growth matrix and disturbance term derived from the dynamics at input `v`.
pub fn derived_growth(sys: &SystemSpec, v: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rd = sys.disturbance_set().half_widths();
    match *sys.dynamics() {
        Dynamics::Unicycle { tau } => {
            let s = tau * v[0].abs();
            Ok((
                vec![
                    vec![1.0, 0.0, s],
                    vec![0.0, 1.0, s],
                    vec![0.0, 0.0, 1.0],
                ],
                rd.iter().map(|r| tau * r).collect(),
            ))
        }
        _ => {
            let aff = sys
                .dynamics()
                .as_affine()
                .ok_or(Error::MissingGrowthMatrix(sys.dynamics().name()))?;
            let l = aff
                .a
                .iter()
                .map(|row| row.iter().map(|a| a.abs()).collect())
                .collect();
            let b = aff
                .e
                .iter()
                .map(|row| row.iter().zip(&rd).map(|(e, r)| e.abs() * r).sum())
                .collect();
            Ok((l, b))
        }
    }
}

/// Growth-bound over-approximation with the derived growth matrix.
pub fn reach_growth_bound(sys: &SystemSpec, cell: &HyperRect, v: &[f64]) -> Result<HyperRect> {
    reach_growth_bound_with(sys, cell, v, None, None)
}

fn reach_growth_bound_with(
    sys: &SystemSpec,
    cell: &HyperRect,
    v: &[f64],
    matrix: Option<&[Vec<f64>]>,
    offset: Option<&[f64]>,
) -> Result<HyperRect> {
    check_dims(sys, cell, v)?;
    let (derived_l, derived_b) = match (matrix, offset) {
        (Some(_), Some(_)) => (Vec::new(), Vec::new()),
        _ => derived_growth(sys, v)?,
    };
    let l = matrix.unwrap_or(&derived_l);
    let b = offset.unwrap_or(&derived_b);
    let c = cell.center();
    let r = cell.half_widths();
    let dc = sys.disturbance_set().center();
    let fc = sys.step_unchecked(&c, v, &dc);
    let n = sys.state_dim();
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    for i in 0..n {
        let rad = l[i].iter().zip(&r).map(|(a, x)| a * x).sum::<f64>() + b[i];
        lo.push(fc[i] - rad);
        hi.push(fc[i] + rad);
    }
    Ok(HyperRect::from_parts_unchecked(lo, hi))
}
