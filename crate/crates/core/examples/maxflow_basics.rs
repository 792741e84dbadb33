// Minimum s-t cut on a small hand-built network.

use unioncut::maxflow::{solve_min_cut, FlowNetwork, NeighborArc};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // chain 0 - 1 - 2 - 3, source pulls on 0, sink on 3
    let arcs = vec![
        NeighborArc {
            u: 0,
            v: 1,
            capacity_uv: 3.0,
            capacity_vu: 3.0,
        },
        NeighborArc {
            u: 1,
            v: 2,
            capacity_uv: 1.0,
            capacity_vu: 1.0,
        },
        NeighborArc {
            u: 2,
            v: 3,
            capacity_uv: 4.0,
            capacity_vu: 4.0,
        },
    ];
    let net = FlowNetwork::new(4, arcs, vec![5.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 5.0])?;
    let cut = solve_min_cut(&net);
    println!("flow = {}", cut.flow_value);
    println!("source side = {:?}", cut.source_nodes());
    assert_eq!(cut.flow_value, 1.0);
    assert_eq!(cut.source_nodes(), vec![0, 1]);
    assert_eq!(net.cut_capacity(&cut.source_side), cut.flow_value);

    // cheaper terminal links move the cut onto them
    let net = net.with_terminal_caps(vec![0.5, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 5.0])?;
    let cut = solve_min_cut(&net);
    println!("after weakening the source link: flow = {}", cut.flow_value);
    assert_eq!(cut.flow_value, 0.5);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
