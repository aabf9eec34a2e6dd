//! One flow step: invertible 1x1 convolution followed by an affine coupling
//! whose `(log s, t)` come from a WN network on the untouched half.
//!
//! The split is fixed: `x_a` is channels `[0, c/2)`, `x_b` is `[c/2, c)`.

mod coupling;
mod inv1x1;
mod wn;

pub use coupling::{coupling_forward, coupling_inverse};
pub use inv1x1::{inv1x1_forward, inv1x1_inverse, InvertiblePointwise};
pub use wn::{wn, wn_projected, CouplingCoeffs, WnShape, WnVariant, WnWeights};

use crate::error::{shape_err, Result};
use crate::tensor::FeatureMap;

/// Weights of one flow step.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowStep {
    pub inv: InvertiblePointwise,
    pub wn: WnWeights,
}

impl FlowStep {
    pub fn new(inv: InvertiblePointwise, wn: WnWeights) -> Result<Self> {
        if inv.size() != 2 * wn.shape().half_channels {
            return Err(shape_err!(
                "1x1 convolution of size {} does not match WN on {} channels",
                inv.size(),
                2 * wn.shape().half_channels
            ));
        }
        Ok(Self { inv, wn })
    }

    pub fn channels(&self) -> usize {
        self.inv.size()
    }

    pub fn param_count(&self) -> usize {
        self.inv.size() * self.inv.size() + self.wn.param_count()
    }
}

fn split(x: &FeatureMap) -> Result<(FeatureMap, FeatureMap)> {
    let half = x.channels() / 2;
    Ok((x.slice_channels(0..half)?, x.slice_channels(half..x.channels())?))
}

/// Forward step with raw conditioning aligned to `x` (`cond_layer` applied here).
pub fn flow_step_forward(x: &FeatureMap, cond: &FeatureMap, step: &FlowStep) -> Result<(FeatureMap, f64)> {
    let projected = step.wn.cond_layer().forward(cond)?;
    flow_step_forward_projected(x, &projected, step)
}

/// Inverse of [`flow_step_forward`].
pub fn flow_step_inverse(y: &FeatureMap, cond: &FeatureMap, step: &FlowStep) -> Result<FeatureMap> {
    let projected = step.wn.cond_layer().forward(cond)?;
    flow_step_inverse_projected(y, &projected, step)
}

/// Forward step with conditioning that has already been through `cond_layer`.
pub fn flow_step_forward_projected(
    x: &FeatureMap,
    cond: &FeatureMap,
    step: &FlowStep,
) -> Result<(FeatureMap, f64)> {
    let (mixed, ld_inv) = inv1x1_forward(x, &step.inv)?;
    let (x_a, x_b) = split(&mixed)?;
    let coeffs = wn_projected(&x_a, cond, &step.wn)?;
    let (y_b, ld_coupling) = coupling_forward(&x_b, &coeffs)?;
    Ok((FeatureMap::concat_channels(&[&x_a, &y_b])?, ld_inv + ld_coupling))
}

pub fn flow_step_inverse_projected(y: &FeatureMap, cond: &FeatureMap, step: &FlowStep) -> Result<FeatureMap> {
    if y.channels() != step.channels() {
        return Err(shape_err!(
            "flow step on {} channels applied to {}",
            step.channels(),
            y.channels()
        ));
    }
    let (y_a, y_b) = split(y)?;
    let coeffs = wn_projected(&y_a, cond, &step.wn)?;
    let x_b = coupling_inverse(&y_b, &coeffs)?;
    inv1x1_inverse(&FeatureMap::concat_channels(&[&y_a, &x_b])?, &step.inv)
}
