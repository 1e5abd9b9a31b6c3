//! TOML model files.
//!
//! ```toml
//! [graph]
//! edges = [[0, 1], [1, 2]]      # or: torus = { width = 4, height = 4 }
//! vertices = 3                  # optional with `edges`
//!
//! [space]
//! kind = "sphere"               # ising | sphere | circle | labels | atoms
//! q = 2
//!
//! [potential]
//! form = "rotator"              # ising | rotator | tabulated
//! coupling = 0.2                # uniform over edges
//! couplings = [[0, 1, 0.3]]     # per-edge overrides
//!
//! [apriori]
//! kind = "uniform"              # uniform | weights
//!
//! [channel]
//! kind = "heat-kernel"          # heat-kernel | discrete | identity | independent | fuzzy
//! t = 0.5
//!
//! [simulate]
//! kind = "height"               # height | first-passage | heat-bath
//! ```

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{Atom, AprioriMeasure, Graph, InteractionModel, PairForm, PairPotential, SingleSpinSpace};
use crate::two_layer::{Channel, DiscreteChannel, FuzzyPartition};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    graph: RawGraph,
    space: RawSpace,
    potential: RawPotential,
    #[serde(default)]
    apriori: Option<RawApriori>,
    #[serde(default)]
    channel: Option<RawChannel>,
    #[serde(default)]
    simulate: Option<SimulateSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    vertices: Option<usize>,
    edges: Option<Vec<[usize; 2]>>,
    torus: Option<RawTorus>,
    path: Option<usize>,
    cycle: Option<usize>,
    complete: Option<usize>,
    labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTorus {
    width: usize,
    height: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    kind: String,
    q: Option<usize>,
    m: Option<usize>,
    atoms: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    form: String,
    coupling: Option<f64>,
    couplings: Option<Vec<(usize, usize, f64)>>,
    table: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApriori {
    kind: String,
    weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    kind: String,
    t: Option<f64>,
    q: Option<usize>,
    matrix: Option<Vec<Vec<f64>>>,
    outputs: Option<usize>,
    cells: Option<Vec<usize>>,
    diameters: Option<Vec<f64>>,
    arcs: Option<usize>,
}

/// Optional `[simulate]` section.
#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    pub kind: String,
    pub q: Option<usize>,
    pub z0: Option<f64>,
    pub phi0: Option<f64>,
    pub t: Option<f64>,
    pub dt: Option<f64>,
    pub paths: Option<usize>,
    pub sweeps: Option<usize>,
    pub burn_in: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
}

/// A parsed model file.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub model: InteractionModel,
    pub channel: Option<Channel>,
    pub simulate: Option<SimulateSpec>,
    pub vertex_labels: Vec<String>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

fn field_err<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::Validation(format!("{field}: {}", message.into())))
}

fn require<T: Clone>(v: &Option<T>, field: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::Validation(format!("{field}: missing required field")))
}

pub fn parse_model_file(path: &std::path::Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    parse_model_str(&text)
}

pub fn parse_model_str(text: &str) -> Result<ModelFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let (l, c) = line_col(text, span.start);
                format!("line {l}, column {c}")
            }
            None => "input".into(),
        };
        Error::Parse { location, message: e.message().trim().to_string() }
    })?;

    let graph = build_graph(&raw.graph)?;
    let vertex_labels = match &raw.graph.labels {
        Some(l) if l.len() == graph.n_vertices() => l.clone(),
        Some(l) => return field_err("graph.labels", format!("{} labels for {} vertices", l.len(), graph.n_vertices())),
        None => (0..graph.n_vertices()).map(|i| i.to_string()).collect(),
    };
    let space = build_space(&raw.space)?;
    let form = match raw.potential.form.as_str() {
        "ising" => PairForm::Ising,
        "rotator" => PairForm::Rotator,
        "tabulated" => {
            let rows = require(&raw.potential.table, "potential.table")?;
            PairForm::Tabulated(square_matrix(&rows, "potential.table")?)
        }
        other => return field_err("potential.form", format!("unknown form `{other}`")),
    };
    let n = graph.n_vertices();
    let mut j = DMatrix::zeros(n, n);
    if let Some(c) = raw.potential.coupling {
        for &(a, b) in graph.edges() {
            j[(a, b)] = c;
            j[(b, a)] = c;
        }
    }
    if let Some(list) = &raw.potential.couplings {
        for (k, &(a, b, c)) in list.iter().enumerate() {
            let field = format!("potential.couplings[{k}]");
            if a >= n || b >= n {
                return field_err(&field, format!("vertex {} is not in the graph", a.max(b)));
            }
            if !graph.has_edge(a, b) {
                return field_err(&field, format!("({a}, {b}) is not an edge"));
            }
            j[(a, b)] = c;
            j[(b, a)] = c;
        }
    }
    if raw.potential.coupling.is_none() && raw.potential.couplings.is_none() {
        return field_err("potential", "needs `coupling` or `couplings`");
    }
    let potential = PairPotential::new(j, form).map_err(|e| Error::Validation(format!("potential: {e}")))?;
    let apriori = build_apriori(raw.apriori.as_ref(), &space)?;
    let model = InteractionModel::new(graph, space, apriori, potential)?;
    let channel = raw.channel.as_ref().map(|c| build_channel(c, &model)).transpose()?;
    Ok(ModelFile { model, channel, simulate: raw.simulate, vertex_labels })
}

fn build_graph(g: &RawGraph) -> Result<Graph> {
    let shapes = [g.edges.is_some(), g.torus.is_some(), g.path.is_some(), g.cycle.is_some(), g.complete.is_some()];
    if shapes.iter().filter(|s| **s).count() != 1 {
        return field_err("graph", "give exactly one of `edges`, `torus`, `path`, `cycle`, `complete`");
    }
    let res = if let Some(edges) = &g.edges {
        let max = edges.iter().flat_map(|e| e.iter()).max().map_or(0, |m| m + 1);
        let n = g.vertices.unwrap_or(max);
        if let Some((k, e)) = edges.iter().enumerate().find(|(_, e)| e[0] >= n || e[1] >= n) {
            return field_err(&format!("graph.edges[{k}]"), format!("edge {:?} uses a vertex outside 0..{n}", e));
        }
        Graph::new(n, edges.iter().map(|e| (e[0], e[1])))
    } else if let Some(t) = &g.torus {
        Graph::torus(t.width, t.height)
    } else if let Some(n) = g.path {
        Ok(Graph::path(n))
    } else if let Some(n) = g.cycle {
        Graph::cycle(n)
    } else {
        Ok(Graph::complete(g.complete.unwrap_or(0)))
    };
    res.map_err(|e| Error::Validation(format!("graph: {e}")))
}

fn build_space(s: &RawSpace) -> Result<SingleSpinSpace> {
    let space = match s.kind.as_str() {
        "ising" => SingleSpinSpace::ising(),
        "sphere" => SingleSpinSpace::Sphere { q: require(&s.q, "space.q")? },
        "circle" => SingleSpinSpace::discretized_circle(require(&s.m, "space.m")?),
        "labels" => SingleSpinSpace::labels(require(&s.m, "space.m")?),
        "atoms" => {
            let coords = require(&s.atoms, "space.atoms")?;
            let labels = s.labels.clone().unwrap_or_else(|| (0..coords.len()).map(|k| k.to_string()).collect());
            if labels.len() != coords.len() {
                return field_err("space.labels", "one label per atom");
            }
            SingleSpinSpace::Discrete {
                atoms: labels.into_iter().zip(coords).map(|(l, c)| Atom::new(l, c)).collect(),
            }
        }
        other => return field_err("space.kind", format!("unknown space `{other}`")),
    };
    space.validate().map_err(|e| Error::Validation(format!("space: {e}")))?;
    Ok(space)
}

fn build_apriori(a: Option<&RawApriori>, space: &SingleSpinSpace) -> Result<AprioriMeasure> {
    let kind = a.map_or("uniform", |a| a.kind.as_str());
    let m = match kind {
        "uniform" => match space {
            SingleSpinSpace::Sphere { .. } => AprioriMeasure::SphereUniform,
            SingleSpinSpace::Discrete { atoms } => AprioriMeasure::uniform_discrete(atoms.len()),
        },
        "weights" => {
            let w = require(&a.and_then(|a| a.weights.clone()), "apriori.weights")?;
            let s: f64 = w.iter().sum();
            if !(s > 0.0) || w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return field_err("apriori.weights", "weights must be non-negative with positive sum");
            }
            AprioriMeasure::Discrete(w.into_iter().map(|v| v / s).collect())
        }
        other => return field_err("apriori.kind", format!("unknown a priori measure `{other}`")),
    };
    m.validate_for(space).map_err(|e| Error::Validation(format!("apriori: {e}")))?;
    Ok(m)
}

fn square_matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return field_err(field, "matrix must be square");
    }
    Ok(DMatrix::from_fn(n, n, |a, b| rows[a][b]))
}

fn build_channel(c: &RawChannel, model: &InteractionModel) -> Result<Channel> {
    let n_atoms = model.space().n_atoms();
    let ch = match c.kind.as_str() {
        "heat-kernel" => {
            let t = require(&c.t, "channel.t")?;
            if !(t > 0.0) || !t.is_finite() {
                return field_err("channel.t", format!("time must be finite and positive (got {t})"));
            }
            let q = match (c.q, model.space()) {
                (Some(q), _) => q,
                (None, SingleSpinSpace::Sphere { q }) => *q,
                (None, SingleSpinSpace::Discrete { atoms }) => atoms.first().map_or(0, |a| a.coords.len()),
            };
            Channel::heat_kernel(q, t).map_err(|e| Error::Validation(format!("channel: {e}")))?
        }
        "discrete" => {
            let rows = require(&c.matrix, "channel.matrix")?;
            let cols = rows.first().map_or(0, |r| r.len());
            if rows.iter().any(|r| r.len() != cols) {
                return field_err("channel.matrix", "rows must have equal length");
            }
            let m = DMatrix::from_fn(rows.len(), cols, |a, b| rows[a][b]);
            Channel::Discrete(DiscreteChannel::from_weights(m).map_err(|e| Error::Validation(format!("channel.matrix: {e}")))?)
        }
        "identity" => Channel::Discrete(DiscreteChannel::identity(require(&n_atoms, "channel (identity needs a discrete space)")?)),
        "independent" => {
            let m = require(&n_atoms, "channel (independent needs a discrete space)")?;
            Channel::Discrete(DiscreteChannel::independent(m, c.outputs.unwrap_or(m)))
        }
        "fuzzy" => {
            let p = if let Some(cells) = &c.cells {
                FuzzyPartition::from_map(model.space(), cells.clone())
            } else if let Some(d) = &c.diameters {
                FuzzyPartition::from_diameters(d.clone())
            } else if let Some(m) = c.arcs {
                FuzzyPartition::circle_arcs(m)
            } else {
                return field_err("channel", "fuzzy channel needs `cells`, `diameters` or `arcs`");
            };
            Channel::Fuzzy(p.map_err(|e| Error::Validation(format!("channel: {e}")))?)
        }
        other => return field_err("channel.kind", format!("unknown channel `{other}`")),
    };
    ch.resolve(model).map_err(|e| Error::Validation(format!("channel: {e}")))?;
    Ok(ch)
}
