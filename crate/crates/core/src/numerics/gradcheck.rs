use super::{Graph, NodeId, NumericsError};

/// Default central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Compares the analytic gradient of `root` with respect to `param` against
/// central finite differences, entry by entry. Runs its own backward pass and
/// restores every leaf before returning.
///
/// Returns `max |a - n| / (|a| + |n| + floor)`, where `floor` is the rounding
/// noise of the difference quotient, `1e4 * eps_machine * max(1, |root|) / epsilon`.
/// Without it, entries whose true gradient sits near that noise report large
/// relative errors that say nothing about the backward pass.
pub fn grad_check(
    graph: &mut Graph,
    root: NodeId,
    param: NodeId,
    epsilon: f64,
) -> Result<f64, NumericsError> {
    let n = graph.value(param).len();
    let all: Vec<usize> = (0..n).collect();
    grad_check_entries(graph, root, param, epsilon, &all)
}

/// As [`grad_check`], restricted to the listed flat entry indices.
pub fn grad_check_entries(
    graph: &mut Graph,
    root: NodeId,
    param: NodeId,
    epsilon: f64,
    entries: &[usize],
) -> Result<f64, NumericsError> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(NumericsError::InvalidArgument(format!(
            "epsilon {epsilon} outside (0, 1e-3]"
        )));
    }
    graph.backward(root)?;
    let shape = graph.shape(param);
    let analytic = graph
        .grad(param)
        .cloned()
        .unwrap_or_else(|| super::Matrix::zeros(shape.0, shape.1));

    let floor = 1e4 * f64::EPSILON * graph.value(root).get(0, 0).abs().max(1.0) / epsilon;
    let mut worst: f64 = 0.0;
    for &i in entries {
        if i >= analytic.len() {
            return Err(NumericsError::InvalidArgument(format!(
                "entry {i} out of range for {} values",
                analytic.len()
            )));
        }
        let original = graph.value(param).data()[i];
        graph.leaf_mut(param).data_mut()[i] = original + epsilon;
        graph.recompute()?;
        let up = graph.value(root).get(0, 0);
        graph.leaf_mut(param).data_mut()[i] = original - epsilon;
        graph.recompute()?;
        let down = graph.value(root).get(0, 0);
        graph.leaf_mut(param).data_mut()[i] = original;

        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic.data()[i];
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs() + floor));
    }
    graph.recompute()?;
    Ok(worst)
}
