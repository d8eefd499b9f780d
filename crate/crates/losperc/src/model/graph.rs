use std::io::Write;
use std::path::Path;

use crate::delaunay::Triangulation;
use crate::geometry::Point2;

use super::{CoxSample, Marks, ModelError, ModelParams, Range, StreetUser};

/// Kind of a node of the connectivity graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    /// An open crossroad.
    Crossroad {
        /// Vertex index.
        vertex: usize,
    },
    /// A street user.
    Street {
        /// Edge index of the street.
        edge: usize,
    },
}

/// A node with its position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphNode {
    /// Node kind.
    pub kind: NodeKind,
    /// Position in the plane.
    pub pos: Point2,
}

/// Nodes of one street in position order with their local components and
/// connections.
#[derive(Clone, Debug, Default)]
pub struct StreetItems {
    /// Global node ids.
    pub nodes: Vec<usize>,
    /// Distance of each node from endpoint `u`.
    pub offsets: Vec<f64>,
    /// Street-local component label of each item.
    pub comp: Vec<u32>,
    /// Connected item pairs, as indices into `nodes`.
    pub links: Vec<(u32, u32)>,
}

/// The point-level connectivity graph.
#[derive(Clone, Debug)]
pub struct ConnectivityGraph {
    nodes: Vec<GraphNode>,
    adj: Vec<Vec<usize>>,
    crossroad_node: Vec<Option<usize>>,
    streets: Vec<StreetItems>,
    n_links: usize,
}

/// An endpoint of a connection query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeRef {
    /// A crossroad by vertex index.
    Crossroad(usize),
    /// A street user.
    Street(StreetUser),
}

/// Linkage of the two crossroads of one street.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreetStatus {
    /// A chain of connections joins the two crossroads.
    pub endpoints_linked: bool,
    /// The connection segments cover the whole street.
    pub fully_covered: bool,
}

/// A street-level graph on the vertices and edges of a triangulation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreetGraph {
    /// Open-site indicator per vertex.
    pub open_vertex: Vec<bool>,
    /// Open indicator per edge.
    pub open_edge: Vec<bool>,
}

impl StreetGraph {
    /// Indices of the open edges.
    pub fn open_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.open_edge.iter().enumerate().filter(|(_, &o)| o).map(|(e, _)| e)
    }
}

fn distance_along(t: &Triangulation, e: usize, vertex: usize, offset: f64) -> f64 {
    let edge = t.edges()[e];
    if vertex == edge.u {
        offset
    } else {
        edge.length - offset
    }
}

/// Connection rule between two nodes.
///
/// Returns false when the nodes do not share a street or a crossroad is
/// closed.
pub fn connect(t: &Triangulation, marks: &Marks, params: &ModelParams, a: NodeRef, b: NodeRef) -> bool {
    let open = |v: usize| marks.site_uniform(v) < params.p;
    let reach_x = |v: usize, e: usize| {
        let (ru, rv) = t.edge_ranks(e);
        let rank = if t.edges()[e].u == v { ru } else { rv };
        (params.r_prime, marks.crossroad_exp(v, rank))
    };
    let within = |d: f64, parts: &[(Range, f64)]| {
        if parts.iter().any(|(r, _)| r.is_infinite()) {
            return true;
        }
        let total: f64 = parts.iter().map(|&(r, m)| r.half_reach(m)).sum();
        d <= total
    };
    match (a, b) {
        (NodeRef::Street(y), NodeRef::Street(z)) => {
            y.edge == z.edge && within((y.offset - z.offset).abs(), &[(params.r, y.e), (params.r, z.e)])
        }
        (NodeRef::Crossroad(x), NodeRef::Street(y)) | (NodeRef::Street(y), NodeRef::Crossroad(x)) => {
            let edge = t.edges()[y.edge];
            if !(edge.u == x || edge.v == x) || !open(x) {
                return false;
            }
            let d = distance_along(t, y.edge, x, y.offset);
            within(d, &[reach_x(x, y.edge), (params.r, y.e)])
        }
        (NodeRef::Crossroad(x), NodeRef::Crossroad(z)) => {
            let Some(e) = t.edge_index(x, z) else {
                return false;
            };
            if x == z || !open(x) || !open(z) {
                return false;
            }
            within(t.edges()[e].length, &[reach_x(x, e), reach_x(z, e)])
        }
    }
}

struct LocalUf {
    parent: Vec<u32>,
}

impl LocalUf {
    fn new(n: usize) -> Self {
        LocalUf { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// Builds the connectivity graph at the parameters `params`.
pub fn build_graph(
    t: &Triangulation,
    marks: &Marks,
    cox: &CoxSample,
    params: &ModelParams,
) -> Result<ConnectivityGraph, ModelError> {
    build_inner(t, marks, cox, params, false)
}

/// As [`build_graph`] with every crossroad reach capped at the street length.
pub fn build_graph_capped(
    t: &Triangulation,
    marks: &Marks,
    cox: &CoxSample,
    params: &ModelParams,
) -> Result<ConnectivityGraph, ModelError> {
    build_inner(t, marks, cox, params, true)
}

fn build_inner(
    t: &Triangulation,
    marks: &Marks,
    cox: &CoxSample,
    params: &ModelParams,
    cap: bool,
) -> Result<ConnectivityGraph, ModelError> {
    let keep = cox.threshold(params.lambda)?;
    let verts = t.vertices();
    let mut nodes = Vec::new();
    let mut crossroad_node = vec![None; verts.len()];
    for (v, &pos) in verts.iter().enumerate() {
        if marks.site_uniform(v) < params.p {
            crossroad_node[v] = Some(nodes.len());
            nodes.push(GraphNode { kind: NodeKind::Crossroad { vertex: v }, pos });
        }
    }

    let mut streets = Vec::with_capacity(t.edges().len());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    let mut n_links = 0usize;
    // Scratch: (offset, reach, node id).
    let mut items: Vec<(f64, f64, usize)> = Vec::new();
    let mut order: Vec<usize> = Vec::new();
    for (e, edge) in t.edges().iter().enumerate() {
        items.clear();
        let (ru, rv) = t.edge_ranks(e);
        let len = edge.length;
        let cross_reach = |v: usize, rank: usize| {
            let reach = params.r_prime.half_reach(marks.crossroad_exp(v, rank));
            if cap {
                reach.min(len)
            } else {
                reach
            }
        };
        if let Some(id) = crossroad_node[edge.u] {
            items.push((0.0, cross_reach(edge.u, ru), id));
        }
        let pu = verts[edge.u];
        let pv = verts[edge.v];
        let mut users: Vec<&StreetUser> = cox.master_users(e).iter().filter(|u| u.master_u < keep).collect();
        users.sort_by(|a, b| a.offset.total_cmp(&b.offset));
        for u in users {
            let id = nodes.len();
            nodes.push(GraphNode { kind: NodeKind::Street { edge: e }, pos: pu.lerp(pv, u.offset / len) });
            adj.push(Vec::new());
            items.push((u.offset, params.r.half_reach(u.e), id));
        }
        if let Some(id) = crossroad_node[edge.v] {
            items.push((len, cross_reach(edge.v, rv), id));
        }

        let k = items.len();
        order.clear();
        order.extend(0..k);
        let left = |i: usize| items[i].0 - items[i].1;
        let right = |i: usize| items[i].0 + items[i].1;
        order.sort_by(|&a, &b| left(a).total_cmp(&left(b)).then(a.cmp(&b)));
        let mut links = Vec::new();
        let mut uf = LocalUf::new(k);
        for (oi, &i) in order.iter().enumerate() {
            let ri = right(i);
            for &j in &order[oi + 1..] {
                if left(j) > ri {
                    break;
                }
                let (a, b) = (i.min(j) as u32, i.max(j) as u32);
                links.push((a, b));
                uf.union(a, b);
            }
        }
        links.sort_unstable();
        for &(a, b) in &links {
            let (na, nb) = (items[a as usize].2, items[b as usize].2);
            adj[na].push(nb);
            adj[nb].push(na);
        }
        n_links += links.len();
        let comp = (0..k as u32).map(|i| uf.find(i)).collect();
        streets.push(StreetItems {
            nodes: items.iter().map(|it| it.2).collect(),
            offsets: items.iter().map(|it| it.0).collect(),
            comp,
            links,
        });
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    Ok(ConnectivityGraph { nodes, adj, crossroad_node, streets, n_links })
}

impl ConnectivityGraph {
    /// All nodes.
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    /// Sorted neighbors of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    /// Number of connections.
    pub fn link_count(&self) -> usize {
        self.n_links
    }

    /// Node id of the crossroad at vertex `v`, if open.
    pub fn crossroad_node(&self, v: usize) -> Option<usize> {
        self.crossroad_node[v]
    }

    /// Items of street `e`.
    pub fn street(&self, e: usize) -> &StreetItems {
        &self.streets[e]
    }

    /// Number of streets.
    pub fn street_count(&self) -> usize {
        self.streets.len()
    }

    /// Writes `<stem>_nodes.csv` and `<stem>_links.csv`.
    pub fn dump_csv(&self, stem: &Path) -> std::io::Result<()> {
        let with_suffix = |s: &str| {
            let mut name = stem.file_name().map(|f| f.to_os_string()).unwrap_or_default();
            name.push(s);
            stem.with_file_name(name)
        };
        let mut fnodes = std::io::BufWriter::new(std::fs::File::create(with_suffix("_nodes.csv"))?);
        writeln!(fnodes, "id,kind,x,y")?;
        for (i, n) in self.nodes.iter().enumerate() {
            let kind = match n.kind {
                NodeKind::Crossroad { .. } => "crossroad",
                NodeKind::Street { .. } => "street",
            };
            writeln!(fnodes, "{i},{kind},{},{}", n.pos.x, n.pos.y)?;
        }
        let mut flinks = std::io::BufWriter::new(std::fs::File::create(with_suffix("_links.csv"))?);
        writeln!(flinks, "a,b")?;
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb.iter().filter(|&&b| b > a) {
                writeln!(flinks, "{a},{b}")?;
            }
        }
        Ok(())
    }
}

/// Linkage and coverage of street `e`.
pub fn street_status(g: &ConnectivityGraph, t: &Triangulation, e: usize) -> StreetStatus {
    let edge = t.edges()[e];
    let (Some(nu), Some(nv)) = (g.crossroad_node(edge.u), g.crossroad_node(edge.v)) else {
        return StreetStatus { endpoints_linked: false, fully_covered: false };
    };
    let st = g.street(e);
    let iu = st.nodes.iter().position(|&n| n == nu).expect("crossroad on its street");
    let iv = st.nodes.iter().position(|&n| n == nv).expect("crossroad on its street");
    let endpoints_linked = st.comp[iu] == st.comp[iv];

    let mut segs: Vec<(f64, f64)> = st
        .links
        .iter()
        .map(|&(a, b)| {
            let (sa, sb) = (st.offsets[a as usize], st.offsets[b as usize]);
            (sa.min(sb), sa.max(sb))
        })
        .collect();
    segs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reach = 0.0f64;
    let mut covered = false;
    for (s0, s1) in segs {
        if s0 > reach {
            break;
        }
        reach = reach.max(s1);
        if reach >= edge.length {
            covered = true;
            break;
        }
    }
    StreetStatus { endpoints_linked, fully_covered: covered }
}

/// The pruned street-level graph: open crossroads joined by fully covered
/// streets.
pub fn build_pruned(g: &ConnectivityGraph, t: &Triangulation) -> StreetGraph {
    let open_vertex = (0..t.vertices().len()).map(|v| g.crossroad_node(v).is_some()).collect();
    let open_edge = (0..t.edges().len()).map(|e| street_status(g, t, e).fully_covered).collect();
    StreetGraph { open_vertex, open_edge }
}

/// Bernoulli-edge graph from explicit site states and per-edge uniforms.
pub fn bernoulli_edges<F>(t: &Triangulation, open_vertex: &[bool], uniforms: &[f64], q: F) -> Result<StreetGraph, ModelError>
where
    F: Fn(f64) -> Option<f64>,
{
    let mut open_edge = vec![false; t.edges().len()];
    for (e, edge) in t.edges().iter().enumerate() {
        if open_vertex[edge.u] && open_vertex[edge.v] {
            let p = q(edge.length).ok_or(ModelError::MissingCoverageValue { length: edge.length })?;
            open_edge[e] = uniforms[e] < p;
        }
    }
    Ok(StreetGraph { open_vertex: open_vertex.to_vec(), open_edge })
}

/// The Bernoulli-edge graph: an edge is open iff both endpoints are open
/// and its keyed uniform falls below the coverage probability of its length.
pub fn build_bernoulli_edges<F>(t: &Triangulation, params: &ModelParams, marks: &Marks, q: F) -> Result<StreetGraph, ModelError>
where
    F: Fn(f64) -> Option<f64>,
{
    let open = marks.open_sites(params.p);
    let uniforms: Vec<f64> = (0..t.edges().len()).map(|e| marks.edge_uniform(e)).collect();
    bernoulli_edges(t, &open, &uniforms, q)
}
