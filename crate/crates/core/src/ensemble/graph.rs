use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfLoops {
    All,
    None,
}

/// Support pattern of the matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GraphKind {
    /// `(x, y)` is an edge iff the cyclic distance of `x` and `y` is at most `w`.
    CirculantBand {
        w: usize,
    },
    /// Disjoint complete blocks of size `s`.
    Block {
        s: usize,
    },
    Complete,
    /// `(x, x + s mod n)` for every listed shift `s`.
    ShiftUnion {
        shifts: Vec<i64>,
    },
    Explicit {
        edges: Vec<(usize, usize)>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    #[serde(flatten)]
    pub kind: GraphKind,
    pub n: usize,
    pub self_loops: SelfLoops,
    #[serde(default)]
    pub directed: bool,
}

impl GraphSpec {
    pub fn circulant_band(n: usize, w: usize, self_loops: SelfLoops) -> Self {
        Self {
            kind: GraphKind::CirculantBand { w },
            n,
            self_loops,
            directed: false,
        }
    }

    pub fn block(n: usize, s: usize, self_loops: SelfLoops) -> Self {
        Self {
            kind: GraphKind::Block { s },
            n,
            self_loops,
            directed: false,
        }
    }

    pub fn complete(n: usize, self_loops: SelfLoops) -> Self {
        Self {
            kind: GraphKind::Complete,
            n,
            self_loops,
            directed: false,
        }
    }

    pub fn directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }
}

/// A validated d-regular graph, stored as sorted out-neighbour lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub n: usize,
    pub degree: usize,
    pub self_loops: bool,
    pub directed: bool,
    out: Vec<Vec<usize>>,
}

impl Graph {
    pub fn out_neighbors(&self, x: usize) -> &[usize] {
        &self.out[x]
    }

    pub fn has_edge(&self, x: usize, y: usize) -> bool {
        self.out[x].binary_search(&y).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.n * self.degree
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(x, ys)| ys.iter().map(move |&y| (x, y)))
    }
}

fn cyclic(x: usize, shift: i64, n: usize) -> usize {
    (x as i64 + shift).rem_euclid(n as i64) as usize
}

/// Builds and validates the graph described by `spec`, reporting the common degree.
pub fn build_graph(spec: &GraphSpec) -> Result<Graph> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::InvalidGraph(
            "graph needs at least one vertex".into(),
        ));
    }
    let loops = spec.self_loops == SelfLoops::All;
    let out: Vec<Vec<usize>> = match &spec.kind {
        GraphKind::CirculantBand { w } => {
            let w = *w;
            if 2 * w + 1 > n {
                return Err(Error::InvalidGraph(format!(
                    "band half-width {w} needs 2w+1 <= n = {n}"
                )));
            }
            (0..n)
                .map(|x| {
                    (-(w as i64)..=w as i64)
                        .filter(|&j| loops || j != 0)
                        .map(|j| cyclic(x, j, n))
                        .collect()
                })
                .collect()
        }
        GraphKind::Block { s } => {
            let s = *s;
            if s == 0 || !n.is_multiple_of(s) {
                return Err(Error::InvalidGraph(format!(
                    "block size {s} must divide n = {n}"
                )));
            }
            (0..n)
                .map(|x| {
                    let start = x / s * s;
                    (start..start + s).filter(|&y| loops || y != x).collect()
                })
                .collect()
        }
        GraphKind::Complete => (0..n)
            .map(|x| (0..n).filter(|&y| loops || y != x).collect())
            .collect(),
        GraphKind::ShiftUnion { shifts } => {
            let mut normalized: Vec<i64> = shifts.iter().map(|s| s.rem_euclid(n as i64)).collect();
            normalized.sort_unstable();
            if normalized.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(
                    "shift list repeats a shift modulo n (multiple edges)".into(),
                ));
            }
            let has_zero = normalized.first() == Some(&0);
            match (loops, has_zero) {
                (true, false) => normalized.insert(0, 0),
                (false, true) => {
                    return Err(Error::InvalidGraph(
                        "shift 0 (a self loop) listed with self_loops = none".into(),
                    ))
                }
                _ => {}
            }
            (0..n)
                .map(|x| normalized.iter().map(|&s| cyclic(x, s, n)).collect())
                .collect()
        }
        GraphKind::Explicit { edges } => {
            let mut out = vec![Vec::new(); n];
            for &(x, y) in edges {
                if x >= n || y >= n {
                    return Err(Error::InvalidGraph(format!(
                        "edge ({x}, {y}) out of range for n = {n}"
                    )));
                }
                out[x].push(y);
            }
            out
        }
    };
    validate(spec, out)
}

fn validate(spec: &GraphSpec, mut out: Vec<Vec<usize>>) -> Result<Graph> {
    let n = spec.n;
    let mut in_degree = vec![0usize; n];
    for (x, ys) in out.iter_mut().enumerate() {
        ys.sort_unstable();
        if let Some(w) = ys.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!(
                "multiple edge ({x}, {})",
                w[0]
            )));
        }
        for &y in ys.iter() {
            in_degree[y] += 1;
        }
    }

    let first_loop = out[0].binary_search(&0).is_ok();
    for (x, ys) in out.iter().enumerate() {
        if ys.binary_search(&x).is_ok() != first_loop {
            return Err(Error::MixedSelfLoops { vertex: x });
        }
    }
    let wants_loops = spec.self_loops == SelfLoops::All;
    if first_loop != wants_loops {
        return Err(Error::InvalidGraph(format!(
            "edge set has self loops = {first_loop} but the graph asks for {:?}",
            spec.self_loops
        )));
    }

    let degree = out[0].len();
    for x in 0..n {
        if out[x].len() != degree || in_degree[x] != degree {
            return Err(Error::NotRegular {
                vertex: x,
                out_degree: out[x].len(),
                in_degree: in_degree[x],
                expected: degree,
            });
        }
    }
    if degree == 0 {
        return Err(Error::InvalidGraph("graph has no edges".into()));
    }

    if !spec.directed {
        for (x, ys) in out.iter().enumerate() {
            for &y in ys {
                if out[y].binary_search(&x).is_err() {
                    return Err(Error::InvalidGraph(format!(
                        "undirected graph has edge ({x}, {y}) without its reverse"
                    )));
                }
            }
        }
    }

    Ok(Graph {
        n,
        degree,
        self_loops: first_loop,
        directed: spec.directed,
        out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circulant_band_degree() {
        let g = build_graph(&GraphSpec::circulant_band(5, 1, SelfLoops::All)).unwrap();
        assert_eq!(g.degree, 3);
        assert_eq!(g.out_neighbors(0), &[0, 1, 4]);
        let g = build_graph(&GraphSpec::circulant_band(8, 2, SelfLoops::None)).unwrap();
        assert_eq!(g.degree, 4);
        assert!(!g.has_edge(3, 3));
        assert!(build_graph(&GraphSpec::circulant_band(4, 2, SelfLoops::All)).is_err());
    }

    #[test]
    fn blocks() {
        let g = build_graph(&GraphSpec::block(6, 3, SelfLoops::All)).unwrap();
        assert_eq!(g.degree, 3);
        for x in 0..3 {
            for y in 0..6 {
                assert_eq!(g.has_edge(x, y), y < 3);
                assert_eq!(g.has_edge(x + 3, y), y >= 3);
            }
        }
        assert!(build_graph(&GraphSpec::block(6, 4, SelfLoops::All)).is_err());
    }

    #[test]
    fn complete() {
        let g = build_graph(&GraphSpec::complete(10, SelfLoops::All)).unwrap();
        assert_eq!(g.degree, 10);
        assert_eq!(g.edge_count(), 100);
        let g = build_graph(&GraphSpec::complete(10, SelfLoops::None)).unwrap();
        assert_eq!(g.degree, 9);
    }

    #[test]
    fn shift_union() {
        let spec = GraphSpec {
            kind: GraphKind::ShiftUnion { shifts: vec![1, 3] },
            n: 7,
            self_loops: SelfLoops::All,
            directed: true,
        };
        let g = build_graph(&spec).unwrap();
        assert_eq!(g.degree, 3);
        assert_eq!(g.out_neighbors(6), &[0, 2, 6]);
        // undirected needs the reverse shifts
        assert!(build_graph(&GraphSpec {
            directed: false,
            ..spec.clone()
        })
        .is_err());
        let sym = GraphSpec {
            kind: GraphKind::ShiftUnion {
                shifts: vec![1, -1, 3, 4],
            },
            directed: false,
            ..spec.clone()
        };
        assert_eq!(build_graph(&sym).unwrap().degree, 5);
        let dup = GraphSpec {
            kind: GraphKind::ShiftUnion { shifts: vec![1, 8] },
            ..spec
        };
        assert!(build_graph(&dup).is_err());
    }

    #[test]
    fn explicit_edge_lists() {
        let cycle = GraphSpec {
            kind: GraphKind::Explicit {
                edges: vec![(0, 1), (1, 2), (2, 0)],
            },
            n: 3,
            self_loops: SelfLoops::None,
            directed: true,
        };
        assert_eq!(build_graph(&cycle).unwrap().degree, 1);

        let irregular = GraphSpec {
            kind: GraphKind::Explicit {
                edges: vec![(0, 1), (1, 2), (2, 0), (0, 2)],
            },
            ..cycle.clone()
        };
        match build_graph(&irregular) {
            Err(Error::NotRegular { vertex, .. }) => assert_eq!(vertex, 0),
            other => panic!("expected NotRegular, got {other:?}"),
        }

        let mixed = GraphSpec {
            kind: GraphKind::Explicit {
                edges: vec![(0, 0), (1, 2), (2, 1)],
            },
            ..cycle.clone()
        };
        match build_graph(&mixed) {
            Err(Error::MixedSelfLoops { vertex }) => assert_eq!(vertex, 1),
            other => panic!("expected MixedSelfLoops, got {other:?}"),
        }

        let duplicate = GraphSpec {
            kind: GraphKind::Explicit {
                edges: vec![(0, 1), (0, 1), (1, 0), (1, 0)],
            },
            n: 2,
            ..cycle
        };
        assert!(build_graph(&duplicate).is_err());
    }

    #[test]
    fn self_loop_flag_must_match_edges() {
        let spec = GraphSpec {
            kind: GraphKind::Explicit {
                edges: vec![(0, 0), (1, 1)],
            },
            n: 2,
            self_loops: SelfLoops::None,
            directed: false,
        };
        assert!(build_graph(&spec).is_err());
    }

    #[test]
    fn json_shape() {
        let spec = GraphSpec::circulant_band(8, 1, SelfLoops::None);
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"kind": "circulant-band", "w": 1, "n": 8, "self_loops": "none", "directed": false})
        );
        let back: GraphSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
        let explicit: GraphSpec = serde_json::from_str(
            r#"{"kind":"explicit","edges":[[0,1],[1,0]],"n":2,"self_loops":"none","directed":false}"#,
        )
        .unwrap();
        assert_eq!(build_graph(&explicit).unwrap().degree, 1);
    }
}
