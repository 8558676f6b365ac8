//! CLIQUE(k) as linear minimization over a star-shaped polyhedron.
//!
//! Each edge `e = (i, j)` gives a block constraint `x ≥ ψᵉ`, i.e. `xᵢ ≥ 1` and
//! `xⱼ ≥ 1`. The body is `[0, a]ⁿ` intersected with "at least C(k,2) blocks
//! hold". Minimizing `Σxᵢ` over it reaches `k` exactly when a k-clique exists.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Point, StarBody};
use crate::rng::{purpose, stream};
use crate::stats::binomial_se;

/// Simple undirected graph, vertices numbered `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n: usize,
    /// Sorted, 1-based, `u < v`.
    edges: Vec<(usize, usize)>,
    adjacency: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertex_count: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Self> {
        Graph::new(r.vertex_count, r.edges.into_iter().map(|[u, v]| (u, v)).collect())
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr { vertex_count: g.n, edges: g.edges.iter().map(|&(u, v)| [u, v]).collect() }
    }
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::InvalidSpec(format!("vertex count {n} must lie in [1, 64]")));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidSpec(format!("self-loop at vertex {u}")));
            }
            if u < 1 || v < 1 || u > n || v > n {
                return Err(Error::InvalidSpec(format!("edge ({u}, {v}) has a vertex outside [1, {n}]")));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        if let Some(w) = norm.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        let mut adjacency = vec![0u64; n];
        for &(u, v) in &norm {
            adjacency[u - 1] |= 1 << (v - 1);
            adjacency[v - 1] |= 1 << (u - 1);
        }
        Ok(Graph { n, edges: norm, adjacency })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (1..=n).flat_map(|u| (u + 1..=n).map(move |v| (u, v))).collect();
        Graph::new(n, edges).expect("complete graph is simple")
    }

    pub fn cycle(n: usize) -> Self {
        Graph::new(n, (1..=n).map(|u| (u, u % n + 1)).collect()).expect("cycle is simple for n >= 3")
    }

    pub fn path(n: usize) -> Self {
        Graph::new(n, (1..n).map(|u| (u, u + 1)).collect()).expect("path is simple")
    }

    /// Erdős–Rényi `G(n, p)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Self {
        let mut edges = Vec::new();
        for u in 1..=n {
            for v in u + 1..=n {
                if rng.random::<f64>() < p {
                    edges.push((u, v));
                }
            }
        }
        Graph::new(n, edges).expect("random graph is simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Number of edges with both endpoints in the vertex mask.
    pub fn induced_edges(&self, mask: u64) -> usize {
        let mut m = mask;
        let mut total = 0;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            total += (self.adjacency[i] & mask).count_ones() as usize;
            m &= m - 1;
        }
        total / 2
    }

    /// Size of a maximum clique (Bron–Kerbosch with pivoting).
    pub fn max_clique(&self) -> usize {
        fn bk(adj: &[u64], r: usize, mut p: u64, mut x: u64, best: &mut usize) {
            if p == 0 && x == 0 {
                *best = (*best).max(r);
                return;
            }
            if r + p.count_ones() as usize <= *best {
                return;
            }
            let pivot = (p | x).trailing_zeros() as usize;
            let mut cand = p & !adj[pivot];
            while cand != 0 {
                let v = cand.trailing_zeros() as usize;
                bk(adj, r + 1, p & adj[v], x & adj[v], best);
                p &= !(1 << v);
                x |= 1 << v;
                cand &= cand - 1;
            }
        }
        let mut best = 0;
        let all = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        bk(&self.adjacency, 0, all, 0, &mut best);
        best
    }
}

/// Edge-list text: header `n m`, then `m` lines `u v`. Blank lines and lines
/// starting with `#` or `c` are skipped.
impl FromStr for Graph {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut lines =
            s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with('c'));
        let parse_pair = |l: &str| -> Result<(usize, usize)> {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 2 {
                return Err(Error::InvalidSpec(format!("expected two integers, got {l:?}")));
            }
            let p = |t: &str| t.parse::<usize>().map_err(|_| Error::InvalidSpec(format!("bad integer {t:?}")));
            Ok((p(f[0])?, p(f[1])?))
        };
        let (n, m) = parse_pair(lines.next().ok_or_else(|| Error::InvalidSpec("empty graph file".into()))?)?;
        let edges: Vec<(usize, usize)> = lines.map(parse_pair).collect::<Result<_>>()?;
        if edges.len() != m {
            return Err(Error::InvalidSpec(format!("header announces {m} edges, found {}", edges.len())));
        }
        Graph::new(n, edges)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n, self.edges.len())?;
        for (u, v) in &self.edges {
            writeln!(f, "{u} {v}")?;
        }
        Ok(())
    }
}

pub fn binomial2(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueBody {
    graph: Graph,
    k: usize,
    a: f64,
    block_threshold: usize,
}

/// Body with `a` defaulting to `n`.
pub fn make_clique_body(graph: Graph, k: usize, a: Option<f64>) -> Result<CliqueBody> {
    let n = graph.vertex_count();
    let a = a.unwrap_or(n as f64);
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("box bound a = {a} must exceed 1")));
    }
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in [2, {n}]")));
    }
    let t = binomial2(k);
    if t > graph.edges().len() {
        return Err(Error::InvalidSpec(format!(
            "threshold C({k},2) = {t} exceeds the {} edges; the body is empty",
            graph.edges().len()
        )));
    }
    Ok(CliqueBody { graph, k, a, block_threshold: t })
}

impl CliqueBody {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn block_threshold(&self) -> usize {
        self.block_threshold
    }

    /// Number of edges whose block constraint holds at `x`.
    pub fn blocks_satisfied(&self, x: &[f64]) -> usize {
        self.graph.edges.iter().filter(|(u, v)| x[u - 1] >= 1.0 && x[v - 1] >= 1.0).count()
    }

    fn in_box(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| (0.0..=self.a).contains(&v))
    }

    pub fn objective(x: &[f64]) -> f64 {
        x.iter().sum()
    }
}

impl StarBody for CliqueBody {
    fn dimension(&self) -> usize {
        self.graph.n
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.in_box(x) && self.blocks_satisfied(x) >= self.block_threshold
    }
    fn kernel_contains(&self, x: &[f64]) -> bool {
        self.in_box(x) && self.blocks_satisfied(x) == self.graph.edges.len()
    }
    /// Centre of `[1, a]ⁿ`, the all-ones corner moved inward.
    fn interior_point(&self) -> Point {
        Point::from_finite(vec![(1.0 + self.a) / 2.0; self.graph.n])
    }
    fn radius_bound(&self) -> f64 {
        self.a * (self.graph.n as f64).sqrt()
    }
    fn kernel_inner_radius(&self) -> f64 {
        (self.a - 1.0) / 2.0
    }
    fn bounding_box(&self) -> BoundingBox {
        BoundingBox::new(vec![0.0; self.graph.n], vec![self.a; self.graph.n])
    }
    fn diameter_bound(&self) -> f64 {
        self.radius_bound()
    }
}

const VERTEX_ENUMERATION_MAX: usize = 20;
const EDGE_ENUMERATION_MAX: usize = 24;

/// Minimizing vertex mask and `min Σxᵢ`, found as the fewest vertices
/// spanning at least `C(k,2)` edges.
pub fn min_objective_bruteforce(body: &CliqueBody) -> Result<(f64, u64)> {
    let g = &body.graph;
    let t = body.block_threshold;
    if g.n <= VERTEX_ENUMERATION_MAX {
        for size in 0..=g.n {
            let hit = subsets_of_size(g.n, size).into_par_iter().find_first(|&m| g.induced_edges(m) >= t);
            if let Some(mask) = hit {
                return Ok((size as f64, mask));
            }
        }
        unreachable!("the full vertex set spans every edge and t <= |E|");
    }
    if g.edges.len() <= EDGE_ENUMERATION_MAX {
        let (v, mask) = min_objective_edge_subsets(g, t);
        return Ok((v as f64, mask));
    }
    Err(Error::TooLarge(format!("{} vertices and {} edges exceed the enumeration limits", g.n, g.edges.len())))
}

fn subsets_of_size(n: usize, size: usize) -> Vec<u64> {
    let mut out = Vec::new();
    crate::geometry::for_each_combination(n, size, |idx| out.push(idx.iter().fold(0u64, |m, &i| m | 1 << i)));
    out
}

/// Second oracle: `min_{F ⊆ E, |F| ≥ t} |V(F)|` over edge subsets.
pub fn min_objective_edge_subsets(g: &Graph, t: usize) -> (usize, u64) {
    let m = g.edges.len();
    assert!(m <= EDGE_ENUMERATION_MAX, "edge subset enumeration is for tiny graphs");
    (0u64..1 << m)
        .into_par_iter()
        .filter(|f| f.count_ones() as usize >= t)
        .map(|f| {
            let mut cover = 0u64;
            for (i, &(u, v)) in g.edges.iter().enumerate() {
                if f >> i & 1 == 1 {
                    cover |= 1 << (u - 1) | 1 << (v - 1);
                }
            }
            (cover.count_ones() as usize, cover)
        })
        .min()
        .expect("t <= |E| leaves the full edge set")
}

/// Indicator of a vertex mask as a point of `ℝⁿ`.
pub fn indicator(n: usize, mask: u64) -> Vec<f64> {
    (0..n).map(|i| (mask >> i & 1) as f64).collect()
}

/// Whether `G` has a clique on `k` vertices, via the body's minimum.
pub fn clique_decision(graph: &Graph, k: usize) -> Result<bool> {
    if binomial2(k) > graph.edges().len() {
        return Ok(false);
    }
    let body = make_clique_body(graph.clone(), k, None)?;
    Ok(min_objective_bruteforce(&body)?.0 <= k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaFloorReport {
    pub n: usize,
    pub a: f64,
    pub eta_hat: f64,
    pub eta_se: f64,
    pub body_samples: usize,
    pub box_draws: usize,
    /// `((a−1)/a)ⁿ`: the kernel box's share of `[0, a]ⁿ`.
    pub certificate_fraction: f64,
    pub inv_e: f64,
    /// Whether `((a−1)/a)ⁿ ≥ 1/e`; false for every finite `n` when `a = n`.
    pub certificate_exceeds_inv_e: bool,
    pub certificate_probes: usize,
    pub certificate_ok: bool,
    /// `η̂ ≥ ((a−1)/a)ⁿ − 3σ`.
    pub floor_holds: bool,
}

/// η̂ by rejection from `[0, a]ⁿ`, plus the `[1, a]ⁿ ⊆ K` probe certificate.
pub fn eta_floor_check(body: &CliqueBody, body_samples: usize, seed: u64) -> Result<EtaFloorReport> {
    let n = body.dimension();
    if n > 6 {
        return Err(Error::TooLarge(format!("box rejection needs n <= 6, got {n}")));
    }
    let a = body.a;
    let max_draws = body_samples.saturating_mul(10_000).max(1_000_000);
    let mut rng = stream(seed, purpose::REJECTION, 0);
    let (mut hits, mut accepted, mut draws) = (0usize, 0usize, 0usize);
    let mut x = vec![0.0; n];
    while accepted < body_samples {
        if draws >= max_draws {
            return Err(Error::KernelRejection { attempts: draws as u64 });
        }
        draws += 1;
        for v in x.iter_mut() {
            *v = rng.random_range(0.0..a);
        }
        if body.contains(&x) {
            accepted += 1;
            hits += body.kernel_contains(&x) as usize;
        }
    }
    let eta_hat = hits as f64 / accepted as f64;
    let eta_se = binomial_se(eta_hat, accepted);
    let probes = 1000;
    let mut prng = stream(seed, purpose::DIAGNOSTIC, 0);
    let certificate_ok = (0..probes).all(|_| {
        let p: Vec<f64> = (0..n).map(|_| prng.random_range(1.0..=a)).collect();
        body.kernel_contains(&p)
    });
    let cert = ((a - 1.0) / a).powi(n as i32);
    let inv_e = (-1f64).exp();
    Ok(EtaFloorReport {
        n,
        a,
        eta_hat,
        eta_se,
        body_samples: accepted,
        box_draws: draws,
        certificate_fraction: cert,
        inv_e,
        certificate_exceeds_inv_e: cert >= inv_e,
        certificate_probes: probes,
        certificate_ok,
        floor_holds: eta_hat >= cert - 3.0 * eta_se.max(1.0 / accepted as f64),
    })
}
