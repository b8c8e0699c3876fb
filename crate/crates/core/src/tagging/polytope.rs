use super::{MarginalTensor, TagSequence};

/// Constraint residuals of a point against the tagging polytope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolytopeReport {
    /// `max_i |sum_{a in delta^-(V_i)} q_a - 1|` over interior clusters.
    pub entering_residual: f64,
    /// Largest inflow/outflow imbalance over interior nodes.
    pub flow_residual: f64,
    pub min_entry: f64,
    pub tol: f64,
}

impl PolytopeReport {
    pub fn max_residual(&self) -> f64 {
        self.entering_residual.max(self.flow_residual).max((-self.min_entry).max(0.0))
    }

    pub fn passed(&self) -> bool {
        self.max_residual() <= self.tol
    }
}

/// Checks cluster-entering and flow-conservation equalities.
pub fn check_polytope_membership(q: &MarginalTensor, tol: f64) -> PolytopeReport {
    let shape = q.shape();
    let t = shape.num_tags();
    let n = shape.len();
    let mut entering_residual: f64 = 0.0;
    let mut flow_residual: f64 = 0.0;
    for position in 1..n - 1 {
        let incoming = q.slice(position - 1);
        let outgoing = q.slice(position);
        let total: f64 = incoming.iter().sum();
        entering_residual = entering_residual.max((total - 1.0).abs());
        for tag in 0..t {
            let inflow: f64 = (0..t).map(|from| incoming[from * t + tag]).sum();
            let outflow: f64 = outgoing[tag * t..(tag + 1) * t].iter().sum();
            flow_residual = flow_residual.max((inflow - outflow).abs());
        }
    }
    let min_entry = q.values().iter().copied().fold(f64::INFINITY, f64::min);
    PolytopeReport {
        entering_residual,
        flow_residual,
        min_entry,
        tol,
    }
}

/// The labeling of `q` if `q` is a binary point of the polytope.
pub fn is_vertex(q: &MarginalTensor) -> Option<TagSequence> {
    if q.values().iter().any(|&v| v != 0.0 && v != 1.0) {
        return None;
    }
    if !check_polytope_membership(q, 0.0).passed() {
        return None;
    }
    let shape = q.shape();
    let t = shape.num_tags();
    let mut tags = Vec::with_capacity(shape.len());
    for i in 0..shape.num_slices() {
        let block = q.slice(i);
        let mut active = block.iter().enumerate().filter(|(_, &v)| v == 1.0);
        let (pos, _) = active.next()?;
        if active.next().is_some() {
            return None;
        }
        let (from, to) = (pos / t, pos % t);
        if i == 0 {
            tags.push(from);
        } else if tags[i] != from {
            return None;
        }
        tags.push(to);
    }
    Some(TagSequence::new(tags))
}
