//! Concrete discrete-time control systems `x⁺ = f(x, u, d)`, their additively
//! perturbed versions, and the finite input grids used by abstractions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_into, HyperRect};

/// `x⁺ = A x + B u + E d + c`, matrices stored row-major as nested rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineDynamics {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    #[serde(default)]
    pub c: Vec<f64>,
}

impl AffineDynamics {
    fn validate(&self, n: usize, p: usize, q: usize) -> Result<()> {
        let check = |what: &'static str, m: &Vec<Vec<f64>>, cols: usize| -> Result<()> {
            if m.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: m.len(),
                });
            }
            for row in m {
                if row.len() != cols {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected: cols,
                        got: row.len(),
                    });
                }
            }
            Ok(())
        };
        check("A rows", &self.a, n)?;
        check("B rows", &self.b, p)?;
        check("E rows", &self.e, q)?;
        if !self.c.is_empty() && self.c.len() != n {
            return Err(Error::DimensionMismatch {
                what: "affine offset",
                expected: n,
                got: self.c.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        (0..self.a.len())
            .map(|i| {
                let dot = |row: &[f64], v: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
                dot(&self.a[i], x)
                    + dot(&self.b[i], u)
                    + dot(&self.e[i], d)
                    + self.c.get(i).copied().unwrap_or(0.0)
            })
            .collect()
    }
}

/// Named dynamics with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dynamics {
    /// Sampled double integrator with disturbance on both rows.
    DoubleIntegrator { tau: f64 },
    /// Unicycle with heading in the third coordinate (wrapped to `[-π, π)`).
    Unicycle { tau: f64 },
    Affine(AffineDynamics),
}

impl Dynamics {
    pub fn name(&self) -> &'static str {
        match self {
            Dynamics::DoubleIntegrator { .. } => "double_integrator",
            Dynamics::Unicycle { .. } => "unicycle",
            Dynamics::Affine(_) => "affine",
        }
    }

    /// The affine form of the dynamics, when they have one.
    pub fn as_affine(&self) -> Option<AffineDynamics> {
        match *self {
            Dynamics::DoubleIntegrator { tau } => {
                let half = 0.5 * tau * tau;
                Some(AffineDynamics {
                    a: vec![vec![1.0, tau], vec![0.0, 1.0]],
                    b: vec![vec![half], vec![tau]],
                    e: vec![vec![half, 0.0], vec![0.0, tau]],
                    c: vec![0.0, 0.0],
                })
            }
            Dynamics::Unicycle { .. } => None,
            Dynamics::Affine(ref aff) => Some(aff.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SystemRepr", into = "SystemRepr")]
pub struct SystemSpec {
    domain: HyperRect,
    input_set: HyperRect,
    disturbance_set: HyperRect,
    dynamics: Dynamics,
    periodic: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemRepr {
    dynamics: Dynamics,
    domain: HyperRect,
    input_set: HyperRect,
    disturbance_set: HyperRect,
    #[serde(default)]
    periodic: Option<Vec<bool>>,
}

impl TryFrom<SystemRepr> for SystemSpec {
    type Error = Error;
    fn try_from(r: SystemRepr) -> Result<Self> {
        let periodic = r.periodic.unwrap_or_else(|| vec![false; r.domain.dim()]);
        SystemSpec::new(r.dynamics, r.domain, r.input_set, r.disturbance_set, periodic)
    }
}

impl From<SystemSpec> for SystemRepr {
    fn from(s: SystemSpec) -> Self {
        SystemRepr {
            dynamics: s.dynamics,
            domain: s.domain,
            input_set: s.input_set,
            disturbance_set: s.disturbance_set,
            periodic: Some(s.periodic),
        }
    }
}

impl SystemSpec {
    pub fn new(
        dynamics: Dynamics,
        domain: HyperRect,
        input_set: HyperRect,
        disturbance_set: HyperRect,
        periodic: Vec<bool>,
    ) -> Result<Self> {
        let n = domain.dim();
        let (p, q) = (input_set.dim(), disturbance_set.dim());
        if periodic.len() != n {
            return Err(Error::DimensionMismatch {
                what: "periodic flags",
                expected: n,
                got: periodic.len(),
            });
        }
        let expect = |what: &'static str, expected: usize, got: usize| -> Result<()> {
            if expected == got {
                Ok(())
            } else {
                Err(Error::DimensionMismatch {
                    what,
                    expected,
                    got,
                })
            }
        };
        match &dynamics {
            Dynamics::DoubleIntegrator { tau } | Dynamics::Unicycle { tau } => {
                if !(*tau > 0.0) || !tau.is_finite() {
                    return Err(Error::System(format!("sampling period must be > 0, got {tau}")));
                }
                let (sn, sp) = if matches!(dynamics, Dynamics::DoubleIntegrator { .. }) {
                    (2, 1)
                } else {
                    (3, 2)
                };
                expect("state dimension", sn, n)?;
                expect("input dimension", sp, p)?;
                expect("disturbance dimension", sn, q)?;
            }
            Dynamics::Affine(aff) => aff.validate(n, p, q)?,
        }
        if matches!(dynamics, Dynamics::Unicycle { .. }) {
            if !periodic[2] {
                return Err(Error::System("unicycle heading axis must be periodic".into()));
            }
            if (domain.width(2) - 2.0 * PI).abs() > 1e-9 {
                return Err(Error::System("unicycle heading axis must span 2π".into()));
            }
        }
        Ok(SystemSpec {
            domain,
            input_set,
            disturbance_set,
            dynamics,
            periodic,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn input_dim(&self) -> usize {
        self.input_set.dim()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.disturbance_set.dim()
    }

    pub fn domain(&self) -> &HyperRect {
        &self.domain
    }

    pub fn input_set(&self) -> &HyperRect {
        &self.input_set
    }

    pub fn disturbance_set(&self) -> &HyperRect {
        &self.disturbance_set
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    /// Wraps periodic coordinates into `[lo, hi)` of the domain.
    pub fn wrap(&self, x: &mut [f64]) {
        for (d, &p) in self.periodic.iter().enumerate() {
            if p {
                x[d] = wrap_into(x[d], self.domain.lo()[d], self.domain.width(d));
            }
        }
    }

    fn check_dims(&self, x: &[f64], u: &[f64], d: &[f64]) -> Result<()> {
        for (what, expected, got) in [
            ("state", self.state_dim(), x.len()),
            ("input", self.input_dim(), u.len()),
            ("disturbance", self.disturbance_dim(), d.len()),
        ] {
            if expected != got {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    /// One step of the nominal dynamics.
    pub fn step(&self, x: &[f64], u: &[f64], d: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, u, d)?;
        Ok(self.step_unchecked(x, u, d))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let mut next = match &self.dynamics {
            &Dynamics::DoubleIntegrator { tau } => {
                let half = 0.5 * tau * tau;
                vec![
                    x[0] + tau * x[1] + half * u[0] + half * d[0],
                    x[1] + tau * u[0] + tau * d[1],
                ]
            }
            &Dynamics::Unicycle { tau } => vec![
                x[0] + tau * (u[0] * x[2].cos() + d[0]),
                x[1] + tau * (u[0] * x[2].sin() + d[1]),
                x[2] + tau * (u[1] + d[2]),
            ],
            Dynamics::Affine(aff) => aff.apply(x, u, d),
        };
        self.wrap(&mut next);
        next
    }

    /// One step of the perturbed dynamics `f(x, u, d) + p`, with `‖p‖∞`
    /// limited by the active budget.
    pub fn perturbed_step(
        &self,
        x: &[f64],
        u: &[f64],
        d: &[f64],
        p: &[f64],
        budget: f64,
    ) -> Result<Vec<f64>> {
        self.check_dims(x, u, d)?;
        if p.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                what: "perturbation",
                expected: self.state_dim(),
                got: p.len(),
            });
        }
        let norm = inf_norm(p);
        if norm > budget {
            return Err(Error::BudgetViolated { norm, budget });
        }
        let mut next = self.step_unchecked(x, u, d);
        for (v, dp) in next.iter_mut().zip(p) {
            *v += dp;
        }
        self.wrap(&mut next);
        Ok(next)
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Uniform finite input set: `counts[i]` values per input axis, endpoints
/// included (a single value sits at the midpoint). Flat input indices are
/// row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InputGridRepr", into = "InputGridRepr")]
pub struct InputGrid {
    set: HyperRect,
    counts: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InputGridRepr {
    set: HyperRect,
    counts: Vec<usize>,
}

impl TryFrom<InputGridRepr> for InputGrid {
    type Error = Error;
    fn try_from(r: InputGridRepr) -> Result<Self> {
        InputGrid::new(&r.set, r.counts)
    }
}

impl From<InputGrid> for InputGridRepr {
    fn from(g: InputGrid) -> Self {
        InputGridRepr {
            set: g.set,
            counts: g.counts,
        }
    }
}

impl InputGrid {
    pub fn new(set: &HyperRect, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != set.dim() {
            return Err(Error::DimensionMismatch {
                what: "input counts",
                expected: set.dim(),
                got: counts.len(),
            });
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::System("input counts must be positive".into()));
        }
        let axes: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let (a, b) = (set.lo()[i], set.hi()[i]);
                if m == 1 {
                    vec![0.5 * (a + b)]
                } else {
                    (0..m)
                        .map(|k| {
                            if k + 1 == m {
                                b
                            } else {
                                a + k as f64 * (b - a) / (m - 1) as f64
                            }
                        })
                        .collect()
                }
            })
            .collect();
        let total: usize = counts.iter().product();
        let p = set.dim();
        let mut values = Vec::with_capacity(total * p);
        for flat in 0..total {
            let mut rem = flat;
            let mut v = vec![0.0; p];
            for i in (0..p).rev() {
                v[i] = axes[i][rem % counts[i]];
                rem /= counts[i];
            }
            values.extend(v);
        }
        Ok(InputGrid {
            set: set.clone(),
            counts,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn set(&self) -> &HyperRect {
        &self.set
    }

    pub fn value(&self, v: usize) -> &[f64] {
        let p = self.dim();
        &self.values[v * p..(v + 1) * p]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks(self.dim())
    }
}

/// How large the additive perturbation may be at `(x, u)`, given the margin
/// `ε(x, u)` and the reach operator's declared tightness δ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationMap {
    None,
    /// `μ = ρ·ε` with `0 ≤ ρ < 1`.
    Scaled { rho: f64 },
    /// Constant bound `c`.
    Uniform { c: f64 },
    /// `μ̄ = ρ̄·ε + δ` with `ρ̄ > 1`.
    Adversarial { rho: f64 },
}

impl PerturbationMap {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PerturbationMap::None => Ok(()),
            PerturbationMap::Scaled { rho } if (0.0..1.0).contains(&rho) => Ok(()),
            PerturbationMap::Scaled { rho } => Err(Error::Perturbation(format!(
                "scaled mode needs 0 <= rho < 1, got {rho}"
            ))),
            PerturbationMap::Uniform { c } if c >= 0.0 && c.is_finite() => Ok(()),
            PerturbationMap::Uniform { c } => Err(Error::Perturbation(format!(
                "uniform bound must be finite and >= 0, got {c}"
            ))),
            PerturbationMap::Adversarial { rho } if rho > 1.0 && rho.is_finite() => Ok(()),
            PerturbationMap::Adversarial { rho } => Err(Error::Perturbation(format!(
                "adversarial mode needs rho > 1, got {rho}"
            ))),
        }
    }

    /// Budget at a state-input pair whose margin is `eps`. `delta` is the
    /// reach operator's declared tightness (treated as 0 when unknown).
    pub fn bound(&self, eps: f64, delta: Option<f64>) -> f64 {
        match *self {
            PerturbationMap::None => 0.0,
            PerturbationMap::Scaled { rho } => rho * eps,
            PerturbationMap::Uniform { c } => c,
            PerturbationMap::Adversarial { rho } => rho * eps + delta.unwrap_or(0.0),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PerturbationMap::None)
    }
}
