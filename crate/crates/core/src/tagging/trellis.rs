use std::ops::Range;

use super::{ProblemShape, TransitionMask, WeightTensor};
use crate::logspace::NEG_INF;

/// Node `v_i^t`: tag `tag` at position `position` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Node {
    pub position: usize,
    pub tag: usize,
}

/// Arc from `v_slice^from` to `v_{slice+1}^to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Arc {
    pub slice: usize,
    pub from: usize,
    pub to: usize,
}

/// The layered graph whose source-to-sink paths are the labelings.
///
/// Nodes and arcs are implicit; arc ids coincide with tensor indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrellisGraph {
    shape: ProblemShape,
}

impl TrellisGraph {
    pub fn new(shape: ProblemShape) -> Self {
        Self { shape }
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn num_clusters(&self) -> usize {
        self.shape.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.shape.num_arcs()
    }

    pub fn cluster(&self, position: usize) -> impl Iterator<Item = Node> {
        (0..self.shape.num_tags()).map(move |tag| Node { position, tag })
    }

    pub fn arc(&self, id: usize) -> Arc {
        let (slice, from, to) = self.shape.unindex(id);
        Arc { slice, from, to }
    }

    pub fn tail(&self, id: usize) -> Node {
        let a = self.arc(id);
        Node {
            position: a.slice,
            tag: a.from,
        }
    }

    pub fn head(&self, id: usize) -> Node {
        let a = self.arc(id);
        Node {
            position: a.slice + 1,
            tag: a.to,
        }
    }

    /// `delta^-(v)`.
    pub fn incoming(&self, v: Node) -> Vec<usize> {
        if v.position == 0 {
            return Vec::new();
        }
        (0..self.shape.num_tags())
            .map(|from| self.shape.index(v.position - 1, from, v.tag))
            .collect()
    }

    /// `delta^+(v)`.
    pub fn outgoing(&self, v: Node) -> Vec<usize> {
        if v.position + 1 >= self.shape.len() {
            return Vec::new();
        }
        (0..self.shape.num_tags())
            .map(|to| self.shape.index(v.position, v.tag, to))
            .collect()
    }

    /// `delta^-(V_position)`: the whole slice feeding the cluster.
    pub fn entering(&self, position: usize) -> Range<usize> {
        if position == 0 {
            return 0..0;
        }
        let len = self.shape.slice_len();
        (position - 1) * len..position * len
    }

    /// `delta^+(V_position)`.
    pub fn leaving(&self, position: usize) -> Range<usize> {
        if position + 1 >= self.shape.len() {
            let end = self.shape.num_arcs();
            return end..end;
        }
        let len = self.shape.slice_len();
        position * len..(position + 1) * len
    }
}

/// Anything that says, per arc, whether the arc may be used.
pub trait ArcSupport {
    fn shape(&self) -> ProblemShape;
    fn arc_allowed(&self, index: usize) -> bool;
}

impl ArcSupport for WeightTensor {
    fn shape(&self) -> ProblemShape {
        WeightTensor::shape(self)
    }

    fn arc_allowed(&self, index: usize) -> bool {
        self.values()[index] != NEG_INF
    }
}

impl ArcSupport for TransitionMask {
    fn shape(&self) -> ProblemShape {
        TransitionMask::shape(self)
    }

    fn arc_allowed(&self, index: usize) -> bool {
        self.allowed()[index]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    pub reachable: bool,
    /// First position no allowed prefix reaches, if any.
    pub blocked_at: Option<usize>,
    pub diagnostic: String,
}

/// Boolean forward/backward reachability over allowed arcs.
pub fn validate_reachability<S: ArcSupport + ?Sized>(support: &S) -> Reachability {
    let shape = support.shape();
    let t = shape.num_tags();
    let mut forward = vec![true; t];
    for i in 0..shape.num_slices() {
        let next: Vec<bool> = (0..t)
            .map(|to| (0..t).any(|from| forward[from] && support.arc_allowed(shape.index(i, from, to))))
            .collect();
        if !next.iter().any(|&b| b) {
            return Reachability {
                reachable: false,
                blocked_at: Some(i + 1),
                diagnostic: format!("no allowed path reaches position {}", i + 1),
            };
        }
        forward = next;
    }
    Reachability {
        reachable: true,
        blocked_at: None,
        diagnostic: String::from("ok"),
    }
}

/// Arcs that lie on at least one complete allowed path.
pub fn live_arcs<S: ArcSupport + ?Sized>(support: &S) -> Vec<bool> {
    let shape = support.shape();
    let t = shape.num_tags();
    let n = shape.len();
    let mut fwd = vec![vec![false; t]; n];
    fwd[0] = vec![true; t];
    for i in 0..shape.num_slices() {
        for to in 0..t {
            fwd[i + 1][to] = (0..t).any(|from| fwd[i][from] && support.arc_allowed(shape.index(i, from, to)));
        }
    }
    let mut bwd = vec![vec![false; t]; n];
    bwd[n - 1] = vec![true; t];
    for i in (0..shape.num_slices()).rev() {
        for from in 0..t {
            bwd[i][from] = (0..t).any(|to| bwd[i + 1][to] && support.arc_allowed(shape.index(i, from, to)));
        }
    }
    (0..shape.num_arcs())
        .map(|a| {
            let (i, from, to) = shape.unindex(a);
            fwd[i][from] && bwd[i + 1][to] && support.arc_allowed(a)
        })
        .collect()
}
