//! Scalar reproducing kernels and the composite kernel over main effects and
//! pairwise interactions.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Matern kernel with smoothness 3/2 and length-scale `nu`.
pub fn matern32(d: f64, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::InvalidConfig(format!("Matern length-scale must be positive, got {nu}")));
    }
    Ok(matern32_unchecked(d, nu))
}

#[inline]
fn matern32_unchecked(d: f64, nu: f64) -> f64 {
    let s = 3f64.sqrt() * d.abs() / nu;
    (1.0 + s) * (-s).exp()
}

/// `(a - center) * (b - center)`.
pub fn centered_linear(a: f64, b: f64, center: f64) -> f64 {
    (a - center) * (b - center)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Matern32 { nu: f64 },
    CenteredLinear { center: f64 },
    Constant { value: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Matern32 { nu } if !(nu > 0.0) => Err(Error::InvalidConfig(format!(
                "Matern length-scale must be positive, got {nu}"
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        match *self {
            KernelSpec::Matern32 { nu } => matern32_unchecked(a - b, nu),
            KernelSpec::CenteredLinear { center } => centered_linear(a, b, center),
            KernelSpec::Constant { value } => value,
        }
    }

    pub fn gram(&self, a: &[f64], b: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(a[i], b[j]))
    }
}

/// One additive component of the composite kernel (0-based coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    Main(usize),
    Pair(usize, usize),
}

impl Component {
    pub fn involves(&self, k: usize) -> bool {
        match *self {
            Component::Main(l) => l == k,
            Component::Pair(l, r) => l == k || r == k,
        }
    }
}

/// Ordered list of components: main effects by coordinate, then ordered pairs
/// `(l, r)` with `l != r`, both in ascending order, skipping `excluded`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentLayout {
    pub p: usize,
    pub excluded: Option<usize>,
    pub pairs: bool,
    components: Vec<Component>,
}

impl ComponentLayout {
    pub fn new(p: usize, excluded: Option<usize>, pairs: bool) -> Self {
        let keep = |l: usize| Some(l) != excluded;
        let mut components: Vec<Component> = (0..p).filter(|&l| keep(l)).map(Component::Main).collect();
        if pairs {
            for l in (0..p).filter(|&l| keep(l)) {
                for r in (0..p).filter(|&r| keep(r) && r != l) {
                    components.push(Component::Pair(l, r));
                }
            }
        }
        Self {
            p,
            excluded,
            pairs,
            components,
        }
    }

    /// Components excluding coordinate `k`, with interactions.
    pub fn excluding(p: usize, k: usize) -> Self {
        Self::new(p, Some(k), true)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn index_of(&self, c: Component) -> Option<usize> {
        self.components.iter().position(|&x| x == c)
    }
}

/// Non-negative weights aligned with a [`ComponentLayout`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaWeights {
    pub layout: ComponentLayout,
    pub values: Vec<f64>,
}

impl ThetaWeights {
    pub fn ones(layout: ComponentLayout) -> Self {
        let values = vec![1.0; layout.len()];
        Self { layout, values }
    }

    pub fn new(layout: ComponentLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {} components",
                values.len(),
                layout.len()
            )));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidConfig("kernel weights must be non-negative".into()));
        }
        Ok(Self { layout, values })
    }

    pub fn get(&self, c: Component) -> f64 {
        self.layout.index_of(c).map_or(0.0, |i| self.values[i])
    }
}

/// Weighted sum of per-coordinate kernels and their pairwise products.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeKernel {
    pub coords: Vec<KernelSpec>,
    pub theta: ThetaWeights,
}

impl CompositeKernel {
    pub fn new(coords: Vec<KernelSpec>, theta: ThetaWeights) -> Result<Self> {
        if coords.len() != theta.layout.p {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinate kernels for dimension {}",
                coords.len(),
                theta.layout.p
            )));
        }
        for k in &coords {
            k.validate()?;
        }
        Ok(Self { coords, theta })
    }

    #[inline]
    pub fn component(&self, c: Component, a: &[f64], b: &[f64]) -> f64 {
        match c {
            Component::Main(l) => self.coords[l].eval(a[l], b[l]),
            Component::Pair(l, r) => self.coords[l].eval(a[l], b[l]) * self.coords[r].eval(a[r], b[r]),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.theta
            .layout
            .components()
            .iter()
            .zip(&self.theta.values)
            .filter(|(_, w)| **w != 0.0)
            .map(|(c, w)| w * self.component(*c, a, b))
            .sum()
    }

    /// Gram matrix between the rows of `a` and the rows of `b`.
    pub fn gram(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        let rows_a: Vec<Vec<f64>> = a.row_iter().map(|r| r.iter().copied().collect()).collect();
        let rows_b: Vec<Vec<f64>> = b.row_iter().map(|r| r.iter().copied().collect()).collect();
        DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| self.eval(&rows_a[i], &rows_b[j]))
    }
}
