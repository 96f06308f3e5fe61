use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use super::{CorpusError, SocialNetwork};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub density: f64,
    pub avg_degree: f64,
    /// Computed on the largest connected component.
    pub diameter: usize,
    /// Mean over ordered reachable pairs of the largest connected component.
    pub avg_path_length: f64,
    pub component_count: usize,
    pub largest_component_size: usize,
}

pub fn graph_stats(net: &SocialNetwork) -> Result<GraphStats, CorpusError> {
    let n = net.node_count();
    if n == 0 {
        return Err(CorpusError::EmptyNetwork);
    }
    let index: BTreeMap<&str, usize> = net.ids().enumerate().map(|(i, id)| (id, i)).collect();
    let mut adj = vec![Vec::new(); n];
    for (a, b) in net.edges() {
        let (ia, ib) = (index[a], index[b]);
        adj[ia].push(ib);
        adj[ib].push(ia);
    }

    let mut component = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        let mut size = 0;
        let mut queue = VecDeque::from([start]);
        component[start] = c;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &v in &adj[u] {
                if component[v] == usize::MAX {
                    component[v] = c;
                    queue.push_back(v);
                }
            }
        }
        sizes.push(size);
    }
    // first component wins ties, components are discovered in id order
    let (largest, &largest_size) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("at least one component");

    let mut diameter = 0usize;
    let mut total = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![usize::MAX; n];
    for src in (0..n).filter(|&v| component[v] == largest) {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (v, &d) in dist.iter().enumerate() {
            if v != src && d != usize::MAX {
                diameter = diameter.max(d);
                total += d as u64;
                pairs += 1;
            }
        }
    }

    let e = net.edge_count();
    let density = if n > 1 {
        2.0 * e as f64 / (n as f64 * (n as f64 - 1.0))
    } else {
        0.0
    };
    Ok(GraphStats {
        node_count: n,
        edge_count: e,
        density,
        avg_degree: 2.0 * e as f64 / n as f64,
        diameter,
        avg_path_length: if pairs > 0 { total as f64 / pairs as f64 } else { 0.0 },
        component_count: sizes.len(),
        largest_component_size: largest_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_network;

    #[test]
    fn triangle() {
        let s = graph_stats(&parse_network("person a\nperson b\nperson c\nedge a b\nedge b c\nedge a c\n").unwrap()).unwrap();
        assert_eq!(s.density, 1.0);
        assert_eq!(s.avg_degree, 2.0);
        assert_eq!(s.diameter, 1);
        assert_eq!(s.avg_path_length, 1.0);
    }

    #[test]
    fn path_graph() {
        // pairs: a-b 1, b-c 1, a-c 2 => 4/3
        let s = graph_stats(&parse_network("person a\nperson b\nperson c\nedge a b\nedge b c\n").unwrap()).unwrap();
        assert!((s.density - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.diameter, 2);
        assert!((s.avg_path_length - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_uses_largest_component() {
        let s = graph_stats(&parse_network("person a\nperson b\nperson c\nperson d\nperson e\nedge a b\nedge b c\nedge d e\n").unwrap())
            .unwrap();
        assert_eq!(s.component_count, 2);
        assert_eq!(s.largest_component_size, 3);
        assert_eq!(s.diameter, 2);
    }

    #[test]
    fn empty_network_errors() {
        assert!(matches!(graph_stats(&SocialNetwork::new()), Err(CorpusError::EmptyNetwork)));
    }
}
