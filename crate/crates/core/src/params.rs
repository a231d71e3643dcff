use crate::tensor::Tensor;

/// Role of a trainable tensor; the optimizer uses it to pick a learning rate
/// and to honor frozen Gaussians.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Weight,
    Bias,
    /// Gaussian means, in nanometres.
    WroiMean,
    /// Unconstrained variance parameters before softplus.
    WroiVariance,
    /// The scalar weights of the shared prototypes.
    ShareWeight,
}

impl ParamKind {
    pub fn is_wroi(self) -> bool {
        matches!(self, ParamKind::WroiMean | ParamKind::WroiVariance)
    }
}

#[derive(Clone, Debug)]
pub struct ParamRef<'a> {
    pub name: String,
    pub kind: ParamKind,
    pub value: &'a Tensor,
}

impl<'a> ParamRef<'a> {
    pub fn new(name: impl Into<String>, kind: ParamKind, value: &'a Tensor) -> Self {
        ParamRef {
            name: name.into(),
            kind,
            value,
        }
    }
}

/// Total number of scalars across `params`.
pub fn scalar_count(params: &[ParamRef<'_>]) -> usize {
    params.iter().map(|p| p.value.numel()).sum()
}
