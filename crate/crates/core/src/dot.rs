//! Graphviz export of an architecture.
//!
//! Layers are laid out as columns (left to right) and scales as rows, scale 1
//! on top. Only active nodes are drawn; edges are labeled with their
//! operation name.

use std::fmt::Write;

use crate::space::ChildArchitecture;

fn node_name(layer: usize, scale: usize) -> String {
    format!("n{layer}_{scale}")
}

pub fn to_dot(arch: &ChildArchitecture) -> String {
    let cfg = arch.config();
    let active = arch.active_nodes();
    let mut out = String::new();
    out.push_str("digraph architecture {\n");
    out.push_str("  rankdir=LR;\n");
    out.push_str("  node [shape=circle, fontsize=10];\n");
    for (layer, flags) in active.iter().enumerate() {
        let layer = layer + 1;
        let names: Vec<String> = flags
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(s, _)| node_name(layer, s + 1))
            .collect();
        if names.is_empty() {
            continue;
        }
        writeln!(out, "  subgraph layer_{layer} {{").unwrap();
        out.push_str("    rank=same;\n");
        for (s, &a) in flags.iter().enumerate() {
            if a {
                let label = if layer == 1 {
                    "stem".to_owned()
                } else {
                    format!("L{layer}\\nS{}", s + 1)
                };
                writeln!(out, "    {} [label=\"{label}\"];", node_name(layer, s + 1)).unwrap();
            }
        }
        // invisible chain keeps scale 1 above scale 2 and so on
        if names.len() > 1 {
            writeln!(out, "    {} [style=invis];", names.join(" -> ")).unwrap();
        }
        out.push_str("  }\n");
    }
    out.push_str("  output [shape=doublecircle, label=\"out\"];\n");
    for (slot, op) in arch.present_edges() {
        if !active[slot.layer - 1][slot.from_scale - 1] {
            continue;
        }
        let from = node_name(slot.layer, slot.from_scale);
        let to = match slot.target() {
            Some(t) => node_name(t.layer, t.scale),
            None => "output".to_owned(),
        };
        let label = cfg.op_alphabet()[op]
            .replace('\\', "\\\\")
            .replace('"', "\\\"");
        writeln!(out, "  {from} -> {to} [label=\"{label}\"];").unwrap();
    }
    out.push_str("}\n");
    out
}
