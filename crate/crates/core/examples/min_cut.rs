//! Minimum s/t cut on a small graph.

use foodcal::segment::maxflow::{min_cut, CutGraph};

pub fn run() -> f64 {
    // 0 and 1 lean toward the source, 3 toward the sink, 2 is undecided
    let mut g = CutGraph::new(4);
    g.set_terminals(0, 9.0, 1.0);
    g.set_terminals(1, 6.0, 2.0);
    g.set_terminals(2, 2.0, 2.0);
    g.set_terminals(3, 0.0, 8.0);
    g.add_edge(0, 1, 3.0, 3.0);
    g.add_edge(1, 2, 4.0, 4.0);
    g.add_edge(2, 3, 1.0, 1.0);
    let cut = min_cut(&g);
    println!("max flow = min cut = {}", cut.flow);
    for (n, s) in cut.source_side.iter().enumerate() {
        println!("  node {n}: {}", if *s { "source" } else { "sink" });
    }
    assert_eq!(g.cut_value(&cut.source_side), cut.flow);
    cut.flow
}

#[allow(dead_code)]
fn main() {
    run();
}
