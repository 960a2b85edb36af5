use std::collections::BTreeMap;

use super::IndModel;
use crate::instance::{EdgeId, Mode, NodeId, TransitInstance};
use crate::lp::{LinearRow, Sense};
use crate::mip::CutCallback;

/// Subtour rows Σ_{e ⊆ S} x_e ≤ |S| − 1 for every component S of the chosen
/// edges (per mode) that contains a cycle.
pub fn subtour_cuts(inst: &TransitInstance, m: &IndModel, x: &[f64]) -> Vec<LinearRow> {
    let mut cuts = Vec::new();
    let modes: &[Mode] = if m.scope.slow { &[Mode::Rapid, Mode::Slow] } else { &[Mode::Rapid] };
    for &mode in modes {
        let chosen: Vec<EdgeId> = inst
            .edges_of(mode)
            .iter()
            .copied()
            .filter(|&e| m.dir.value(x, super::x(mode, e)) > 0.5)
            .collect();
        let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        fn find(p: &mut BTreeMap<NodeId, NodeId>, v: NodeId) -> NodeId {
            let mut r = v;
            while p[&r] != r {
                r = p[&r];
            }
            p.insert(v, r);
            r
        }
        for &e in &chosen {
            for &v in &inst.edges[e].endpoints {
                parent.entry(v).or_insert(v);
            }
            let [a, b] = inst.edges[e].endpoints;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent.insert(ra, rb);
            }
        }
        let mut comps: BTreeMap<NodeId, (Vec<NodeId>, usize)> = BTreeMap::new();
        let nodes: Vec<NodeId> = parent.keys().copied().collect();
        for v in nodes {
            let r = find(&mut parent, v);
            comps.entry(r).or_default().0.push(v);
        }
        for &e in &chosen {
            let r = find(&mut parent, inst.edges[e].endpoints[0]);
            comps.get_mut(&r).unwrap().1 += 1;
        }
        for (set, n_edges) in comps.values() {
            if *n_edges < set.len() {
                continue;
            }
            let coeffs: Vec<(usize, f64)> = inst
                .edges_of(mode)
                .iter()
                .filter(|&&e| inst.edges[e].endpoints.iter().all(|v| set.contains(v)))
                .filter_map(|&e| m.dir.col(super::x(mode, e)).map(|j| (j, 1.0)))
                .collect();
            cuts.push(LinearRow::new(coeffs, Sense::Le, set.len() as f64 - 1.0));
        }
    }
    cuts
}

/// Lazy callback separating [`subtour_cuts`] at integral candidates.
pub struct SubtourCuts<'a> {
    pub inst: &'a TransitInstance,
    pub model: &'a IndModel,
    pub emitted: usize,
}

impl<'a> SubtourCuts<'a> {
    pub fn new(inst: &'a TransitInstance, model: &'a IndModel) -> Self {
        SubtourCuts { inst, model, emitted: 0 }
    }
}

impl CutCallback for SubtourCuts<'_> {
    fn lazy(&mut self, x: &[f64]) -> Vec<LinearRow> {
        let cuts = subtour_cuts(self.inst, self.model, x);
        self.emitted += cuts.len();
        cuts
    }
}
