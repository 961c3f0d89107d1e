//! Edge and node homophily of a hand-built graph and of the two synthetic
//! generators.

use lemp::experiment::{synth_dataset, SynthKind, SynthSpec};
use lemp::graph::{edge_homophily, node_homophily, norm_adjacency, Graph, Split};

fn main() -> lemp::Result<()> {
    // a triangle of class 0 hanging off a class-1 hub
    let edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (3, 5)];
    let labels = [0, 0, 0, 1, 0, 1].map(Some).to_vec();
    let g = Graph::build(6, &edges, labels, vec![Split::Train; 6], None)?;
    println!("hand graph: {} nodes, {} edges", g.n(), g.num_edges());
    println!("  edge homophily {:.4}", edge_homophily(&g)?);
    println!("  node homophily {:.4}", node_homophily(&g)?);

    let adj = norm_adjacency(&g);
    println!("  normalised adjacency, row 3:");
    for j in 0..g.n() {
        print!(" {:.3}", adj.entry(3, j));
    }
    println!();

    for kind in [SynthKind::Heterophilic, SynthKind::Homophilic] {
        let spec = SynthSpec { kind, ..SynthSpec::default() };
        let spec = match kind {
            SynthKind::Heterophilic => spec,
            SynthKind::Homophilic => SynthSpec { p_intra: spec.p_inter, p_inter: spec.p_intra, ..spec },
        };
        let b = synth_dataset(&spec)?;
        println!(
            "{kind:?}: {} edges, edge homophily {:.3} (expected {:.3}), node homophily {:.3}",
            b.graph.num_edges(),
            edge_homophily(&b.graph)?,
            spec.expected_edge_homophily(),
            node_homophily(&b.graph)?,
        );
    }
    Ok(())
}
