use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entries::EntryModel;
use super::graph::{build_graph, Graph, GraphSpec};
use super::truncate::TruncationInfo;
use crate::rng::StreamKey;
use crate::{CMat, Error, Result, C64};

/// Graph plus entry law; the JSON document accepted by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub graph: GraphSpec,
    pub entries: EntryModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl EnsembleSpec {
    pub fn new(graph: GraphSpec, entries: EntryModel) -> Self {
        Self {
            graph,
            entries,
            seed: None,
        }
    }

    /// Checks the graph and the entry model together and returns the graph.
    pub fn validate(&self) -> Result<Graph> {
        let graph = build_graph(&self.graph)?;
        self.entries.law(self.graph.n)?;
        if self.entries.is_elliptic() && graph.directed {
            return Err(Error::InvalidModel(
                "correlated transpose pairs need an undirected graph".into(),
            ));
        }
        Ok(graph)
    }
}

/// One realization of `d^{-1/2} X`.
#[derive(Clone, Debug)]
pub struct MatrixSample {
    pub n: usize,
    pub entries: CMat,
    pub seed: u64,
    pub trial_index: u64,
    /// Distinguishes independent factors drawn within the same trial.
    pub factor: u64,
    pub spec: EnsembleSpec,
    pub degree: usize,
    /// Multiplier applied to the raw draws (`d^{-1/2}`, or `(d V)^{-1/2}` after truncation).
    pub scale: f64,
    pub truncation: Option<TruncationInfo>,
}

pub fn sample_matrix(spec: &EnsembleSpec, seed: u64, trial_index: u64) -> Result<MatrixSample> {
    sample_factor(spec, seed, trial_index, 0)
}

/// Like [`sample_matrix`] with an extra stream key component, used for the
/// independent factors of a product.
pub fn sample_factor(
    spec: &EnsembleSpec,
    seed: u64,
    trial_index: u64,
    factor: u64,
) -> Result<MatrixSample> {
    let graph = spec.validate()?;
    let n = graph.n;
    let law = spec.entries.law(n)?;
    let key = StreamKey::new(seed, trial_index, factor);
    let scale = (graph.degree as f64).sqrt().recip();
    let paired = !graph.directed;

    // every row produces its own (column, value) list; stream ids are entry coordinates
    let rows: Vec<Vec<(usize, usize, C64)>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut out = Vec::new();
            for &y in graph.out_neighbors(x) {
                let id = (x * n + y) as u64;
                if x == y {
                    out.push((x, x, law.sample_diagonal(&mut key.stream(id)) * scale));
                } else if !paired {
                    out.push((x, y, law.draw(&mut key.stream(id)) * scale));
                } else if x < y {
                    let (g1, g2) = law.sample_pair(&mut key.stream(id));
                    out.push((x, y, g1 * scale));
                    out.push((y, x, g2 * scale));
                }
            }
            out
        })
        .collect();

    let mut entries = CMat::zeros(n, n);
    for row in rows {
        for (x, y, v) in row {
            entries[(x, y)] = v;
        }
    }
    Ok(MatrixSample {
        n,
        entries,
        seed,
        trial_index,
        factor,
        spec: spec.clone(),
        degree: graph.degree,
        scale,
        truncation: None,
    })
}
