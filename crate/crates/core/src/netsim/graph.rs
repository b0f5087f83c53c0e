use super::NetError;

/// Undirected receiver graph. Every receiver is its own neighbor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    n: usize,
    adjacency: Vec<bool>,
}

impl NetworkGraph {
    /// Builds a graph from zero-based undirected edges; self-loops are added.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetError> {
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        for (idx, &(a, b)) in edges.iter().enumerate() {
            if a >= n || b >= n {
                return Err(NetError::invalid(
                    format!("graph.edges[{idx}]"),
                    format!("edge ({a}, {b}) references a receiver outside 0..{n}"),
                ));
            }
            adjacency[a * n + b] = true;
            adjacency[b * n + a] = true;
        }
        Ok(Self { n, adjacency })
    }

    /// Validates a dense adjacency matrix: square, symmetric, true diagonal.
    pub fn from_matrix(rows: &[Vec<bool>]) -> Result<Self, NetError> {
        let n = rows.len();
        let mut adjacency = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(NetError::invalid(
                    format!("graph.adjacency[{i}]"),
                    format!("row has {} entries, expected {n}", row.len()),
                ));
            }
            adjacency.extend_from_slice(row);
        }
        for i in 0..n {
            if !adjacency[i * n + i] {
                return Err(NetError::invalid(
                    format!("graph.adjacency[{i}][{i}]"),
                    "every receiver must be connected to itself".into(),
                ));
            }
            for j in 0..i {
                if adjacency[i * n + j] != adjacency[j * n + i] {
                    return Err(NetError::invalid(
                        format!("graph.adjacency[{i}][{j}]"),
                        "adjacency must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(Self { n, adjacency })
    }

    pub fn fully_connected(n: usize) -> Self {
        Self {
            n,
            adjacency: vec![true; n * n],
        }
    }

    /// Only self-loops.
    pub fn disconnected(n: usize) -> Self {
        Self::from_edges(n, &[]).expect("no edges to validate")
    }

    pub fn n_receivers(&self) -> usize {
        self.n
    }

    pub fn connected(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    /// Neighborhood of `i` in increasing order, including `i` itself.
    pub fn neighborhood(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.connected(i, j)).collect()
    }

    pub fn to_matrix(&self) -> Vec<Vec<bool>> {
        self.adjacency
            .chunks(self.n.max(1))
            .take(self.n)
            .map(<[bool]>::to_vec)
            .collect()
    }
}
