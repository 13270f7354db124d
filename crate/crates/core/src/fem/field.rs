use std::fmt;
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Point at which a field is sampled: physical coordinates plus its
/// representation as a convex combination of mesh vertices.
#[derive(Debug, Clone, Copy)]
pub struct Location<'a> {
    pub x: [f64; 2],
    pub vertices: &'a [(usize, f64)],
}

/// Space-time scalar field. `Nodal` holds per-vertex values interpolated
/// linearly and is constant in time.
#[derive(Clone, Default)]
pub enum ScalarField {
    #[default]
    Zero,
    Constant(f64),
    Analytic(ScalarFn),
    Nodal(Arc<[f64]>),
}

#[derive(Clone, Default)]
pub enum VectorField {
    #[default]
    Zero,
    Constant([f64; 2]),
    Analytic(VectorFn),
    Nodal(Arc<[[f64; 2]]>),
}

impl ScalarField {
    pub fn analytic(f: impl Fn([f64; 2], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Analytic(Arc::new(f))
    }

    pub fn eval(&self, at: &Location<'_>, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Analytic(f) => f(at.x, t),
            Self::Nodal(v) => at.vertices.iter().map(|&(i, w)| w * v[i]).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

impl VectorField {
    pub fn analytic(f: impl Fn([f64; 2], f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self::Analytic(Arc::new(f))
    }

    pub fn eval(&self, at: &Location<'_>, t: f64) -> [f64; 2] {
        match self {
            Self::Zero => [0.0; 2],
            Self::Constant(c) => *c,
            Self::Analytic(f) => f(at.x, t),
            Self::Nodal(v) => at.vertices.iter().fold([0.0; 2], |acc, &(i, w)| {
                [acc[0] + w * v[i][0], acc[1] + w * v[i][1]]
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Analytic(_) => write!(f, "Analytic(..)"),
            Self::Nodal(v) => write!(f, "Nodal({} values)", v.len()),
        }
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c:?})"),
            Self::Analytic(_) => write!(f, "Analytic(..)"),
            Self::Nodal(v) => write!(f, "Nodal({} values)", v.len()),
        }
    }
}
