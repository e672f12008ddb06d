//! Named parameter groups and their bijections to unconstrained space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Real,
    /// `(0, ∞)` via `exp`.
    Positive,
    /// `(0, 1)` via the logistic function.
    UnitInterval,
    /// Probability vector via stick-breaking; one fewer free coordinate.
    Simplex,
    /// Strictly increasing positive vector via log-increments.
    OrderedPositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub support: Support,
    pub dim: usize,
}

impl ParamGroup {
    pub fn free_dim(&self) -> usize {
        match self.support {
            Support::Simplex => self.dim - 1,
            _ => self.dim,
        }
    }
}

/// Handle to a group inside a [`ParamSpace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupId(pub usize);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    groups: Vec<ParamGroup>,
    offsets: Vec<usize>,
    free_offsets: Vec<usize>,
    dim: usize,
    free_dim: usize,
}

#[inline]
fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 { x } else { x.exp().ln_1p() }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ParamSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, support: Support, dim: usize) -> GroupId {
        assert!(dim >= 1, "parameter group `{name}` needs dim >= 1");
        assert!(
            support != Support::Simplex || dim >= 2,
            "simplex `{name}` needs at least 2 entries"
        );
        assert!(self.find(name).is_none(), "duplicate parameter group `{name}`");
        let group = ParamGroup {
            name: name.to_string(),
            support,
            dim,
        };
        self.offsets.push(self.dim);
        self.free_offsets.push(self.free_dim);
        self.dim += dim;
        self.free_dim += group.free_dim();
        self.groups.push(group);
        GroupId(self.groups.len() - 1)
    }

    pub fn scalar(&mut self, name: &str, support: Support) -> GroupId {
        self.add(name, support, 1)
    }

    pub fn find(&self, name: &str) -> Option<GroupId> {
        self.groups.iter().position(|g| g.name == name).map(GroupId)
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group(&self, id: GroupId) -> &ParamGroup {
        &self.groups[id.0]
    }

    /// Constrained dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn free_dim(&self) -> usize {
        self.free_dim
    }

    pub fn range(&self, id: GroupId) -> std::ops::Range<usize> {
        let start = self.offsets[id.0];
        start..start + self.groups[id.0].dim
    }

    pub fn free_range(&self, id: GroupId) -> std::ops::Range<usize> {
        let start = self.free_offsets[id.0];
        start..start + self.groups[id.0].free_dim()
    }

    /// Scalar labels such as `alpha[2]`, in constrained-vector order.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.dim);
        for g in &self.groups {
            if g.dim == 1 {
                out.push(g.name.clone());
            } else {
                out.extend((0..g.dim).map(|i| format!("{}[{i}]", g.name)));
            }
        }
        out
    }

    /// Map unconstrained `free` to constrained `out`; returns `ln |det J|`.
    pub fn constrain(&self, free: &[f64], out: &mut [f64]) -> f64 {
        debug_assert_eq!(free.len(), self.free_dim);
        debug_assert_eq!(out.len(), self.dim);
        let mut log_jac = 0.0;
        for (gi, g) in self.groups.iter().enumerate() {
            let u = &free[self.free_offsets[gi]..self.free_offsets[gi] + g.free_dim()];
            let x = &mut out[self.offsets[gi]..self.offsets[gi] + g.dim];
            match g.support {
                Support::Real => x.copy_from_slice(u),
                Support::Positive => {
                    for (xi, &ui) in x.iter_mut().zip(u) {
                        *xi = ui.exp();
                        log_jac += ui;
                    }
                }
                Support::UnitInterval => {
                    for (xi, &ui) in x.iter_mut().zip(u) {
                        *xi = logistic(ui);
                        log_jac -= log1p_exp(-ui) + log1p_exp(ui);
                    }
                }
                Support::Simplex => {
                    let k = g.dim;
                    let mut remaining = 1.0;
                    for i in 0..k - 1 {
                        let shifted = u[i] - ((k - 1 - i) as f64).ln();
                        let z = logistic(shifted);
                        x[i] = remaining * z;
                        log_jac += -log1p_exp(-shifted) - log1p_exp(shifted) + remaining.ln();
                        remaining -= x[i];
                    }
                    x[k - 1] = remaining.max(0.0);
                }
                Support::OrderedPositive => {
                    let mut acc = 0.0;
                    for (xi, &ui) in x.iter_mut().zip(u) {
                        acc += ui.exp();
                        *xi = acc;
                        log_jac += ui;
                    }
                }
            }
        }
        log_jac
    }

    /// Inverse of [`constrain`](Self::constrain); fails outside the support.
    pub fn unconstrain(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim {
            return Err(Error::Parameter(format!(
                "expected {} constrained values, got {}",
                self.dim,
                values.len()
            )));
        }
        let mut free = vec![0.0; self.free_dim];
        for (gi, g) in self.groups.iter().enumerate() {
            let x = &values[self.offsets[gi]..self.offsets[gi] + g.dim];
            let u = &mut free[self.free_offsets[gi]..self.free_offsets[gi] + g.free_dim()];
            let bad = |why: &str| Error::Parameter(format!("`{}` outside support ({why}): {x:?}", g.name));
            match g.support {
                Support::Real => {
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(bad("not finite"));
                    }
                    u.copy_from_slice(x);
                }
                Support::Positive => {
                    if x.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                        return Err(bad("must be > 0"));
                    }
                    for (ui, &xi) in u.iter_mut().zip(x) {
                        *ui = xi.ln();
                    }
                }
                Support::UnitInterval => {
                    if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                        return Err(bad("must lie in (0, 1)"));
                    }
                    for (ui, &xi) in u.iter_mut().zip(x) {
                        *ui = (xi / (1.0 - xi)).ln();
                    }
                }
                Support::Simplex => {
                    let total: f64 = x.iter().sum();
                    if x.iter().any(|&v| v <= 0.0) || (total - 1.0).abs() > 1e-9 {
                        return Err(bad("must be a strictly positive probability vector"));
                    }
                    let k = g.dim;
                    let mut remaining = 1.0;
                    for i in 0..k - 1 {
                        let z = (x[i] / remaining).clamp(1e-300, 1.0 - 1e-16);
                        u[i] = (z / (1.0 - z)).ln() + ((k - 1 - i) as f64).ln();
                        remaining -= x[i];
                    }
                }
                Support::OrderedPositive => {
                    let mut prev = 0.0;
                    for (ui, &xi) in u.iter_mut().zip(x) {
                        if !(xi > prev && xi.is_finite()) {
                            return Err(bad("must be positive and strictly increasing"));
                        }
                        *ui = (xi - prev).ln();
                        prev = xi;
                    }
                }
            }
        }
        Ok(free)
    }

    pub fn view<'a>(&'a self, values: &'a [f64]) -> Params<'a> {
        Params { space: self, values }
    }
}

/// Read-only view of a constrained parameter vector.
#[derive(Clone, Copy)]
pub struct Params<'a> {
    space: &'a ParamSpace,
    values: &'a [f64],
}

impl<'a> Params<'a> {
    pub fn get(&self, id: GroupId) -> &'a [f64] {
        &self.values[self.space.range(id)]
    }

    pub fn scalar(&self, id: GroupId) -> f64 {
        self.values[self.space.offsets[id.0]]
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn space(&self) -> &'a ParamSpace {
        self.space
    }
}
