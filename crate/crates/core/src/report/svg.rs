use std::fmt::Write;

use crate::formulation::DesignSolution;
use crate::instance::{EdgeId, Mode, NodeId, TransitInstance};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 30.0;

struct Frame {
    min: [f64; 2],
    scale: f64,
    height: f64,
}

impl Frame {
    fn new(inst: &TransitInstance) -> Frame {
        let pts = inst.nodes.iter().map(|n| n.position).chain(inst.centroids.iter().map(|c| c.position));
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in pts {
            for d in 0..2 {
                min[d] = min[d].min(p[d]);
                max[d] = max[d].max(p[d]);
            }
        }
        if !min[0].is_finite() {
            min = [0.0; 2];
            max = [1.0; 2];
        }
        let span_x = (max[0] - min[0]).max(1.0);
        let span_y = (max[1] - min[1]).max(1.0);
        let scale = (WIDTH - 2.0 * MARGIN) / span_x;
        Frame {
            min,
            scale,
            height: span_y * scale + 2.0 * MARGIN,
        }
    }

    /// Screen coordinates (y grows downward).
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let x = MARGIN + (p[0] - self.min[0]) * self.scale;
        let y = self.height - MARGIN - (p[1] - self.min[1]) * self.scale;
        (x, y)
    }
}

/// Node sequences covering `edges`: one per path component when the edges
/// form paths, walked from a degree-1 end (lowest id first).
fn polylines(inst: &TransitInstance, edges: &[EdgeId]) -> Vec<Vec<NodeId>> {
    let mut left: Vec<EdgeId> = edges.to_vec();
    let mut out = Vec::new();
    while !left.is_empty() {
        let degree = |v: NodeId, es: &[EdgeId]| es.iter().filter(|&&e| inst.edges[e].endpoints.contains(&v)).count();
        let mut ends: Vec<NodeId> = left
            .iter()
            .flat_map(|&e| inst.edges[e].endpoints)
            .filter(|&v| degree(v, &left) == 1)
            .collect();
        ends.sort_unstable();
        let start = ends.first().copied().unwrap_or(inst.edges[left[0]].endpoints[0]);
        let mut seq = vec![start];
        let mut cur = start;
        while let Some(pos) = left.iter().position(|&e| inst.edges[e].endpoints.contains(&cur)) {
            let e = left.remove(pos);
            cur = inst.other_end(e, cur);
            seq.push(cur);
        }
        out.push(seq);
    }
    out
}

fn points(frame: &Frame, inst: &TransitInstance, seq: &[NodeId]) -> String {
    seq.iter()
        .map(|&v| {
            let (x, y) = frame.map(inst.nodes[v].position);
            format!("{x:.1},{y:.1}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Static drawing of a design: candidate network in grey, the rapid line
/// solid, the slow line dashed. Output is byte-stable for fixed input.
pub fn render_design(inst: &TransitInstance, sol: &DesignSolution) -> String {
    let f = Frame::new(inst);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{:.0}" viewBox="0 0 {WIDTH:.0} {:.0}">"#,
        f.height, f.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(s, r##"<g id="network" stroke="#d0d0d0" stroke-width="1">"##);
    for e in &inst.edges {
        let (x1, y1) = f.map(inst.nodes[e.endpoints[0]].position);
        let (x2, y2) = f.map(inst.nodes[e.endpoints[1]].position);
        let _ = writeln!(s, r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}"/>"#);
    }
    let _ = writeln!(s, "</g>");

    for (mode, id, style) in [
        (Mode::Slow, "slow-line", r##"stroke="#1f77b4" stroke-width="3" stroke-dasharray="8 5""##),
        (Mode::Rapid, "rapid-line", r##"stroke="#d62728" stroke-width="4""##),
    ] {
        let edges = sol.design.edges(mode);
        if edges.is_empty() {
            continue;
        }
        let _ = writeln!(s, r#"<g id="{id}" fill="none" {style}>"#);
        for seq in polylines(inst, edges) {
            let _ = writeln!(s, r#"<polyline points="{}"/>"#, points(&f, inst, &seq));
        }
        let _ = writeln!(s, "</g>");
    }

    let _ = writeln!(s, r#"<g id="nodes" stroke="black">"#);
    for n in &inst.nodes {
        let (x, y) = f.map(n.position);
        let stop = sol.design.is_stop(n.id, Mode::Rapid) || sol.design.is_stop(n.id, Mode::Slow);
        let (r, w) = if stop { (6.0, 2.0) } else { (3.5, 1.0) };
        let fill = if n.in_rapid { "black" } else { "white" };
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.1}" cy="{y:.1}" r="{r}" fill="{fill}" stroke-width="{w}"><title>{}</title></circle>"#,
            n.id
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r##"<g id="centroids" fill="#888888">"##);
    for c in &inst.centroids {
        let (x, y) = f.map(c.position);
        let _ = writeln!(s, r#"<rect x="{:.1}" y="{:.1}" width="4" height="4"/>"#, x - 2.0, y - 2.0);
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
