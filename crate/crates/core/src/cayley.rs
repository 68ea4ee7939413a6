//! Cayley graphs of `Z^N` and the discrete Heisenberg group.
//!
//! Elements are stored as integer coordinate tuples. Edges join `x` and `x*s`
//! for generators `s`, so the word metric is left-invariant.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calculus::LatticeFunction;
use crate::error::{invalid, Error, Result};

/// Default ceiling on the number of vertices a ball may hold.
pub const DEFAULT_VERTEX_CAP: usize = 4_000_000;

/// Slot value marking a neighbor outside the truncation.
pub const EXTERIOR: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum GroupSpec {
    FreeAbelian(usize),
    Heisenberg3,
}

impl GroupSpec {
    /// Bass degree of polynomial growth.
    pub fn homogeneous_dimension(&self) -> usize {
        match *self {
            GroupSpec::FreeAbelian(n) => n,
            GroupSpec::Heisenberg3 => 4,
        }
    }

    /// Length of the coordinate tuple.
    pub fn rank(&self) -> usize {
        match *self {
            GroupSpec::FreeAbelian(n) => n,
            GroupSpec::Heisenberg3 => 3,
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::FreeAbelian(n) => write!(f, "zN:{n}"),
            GroupSpec::Heisenberg3 => f.write_str("heisenberg"),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "heisenberg" || t == "heisenberg3" || t == "h3" {
            return Ok(GroupSpec::Heisenberg3);
        }
        let rest = t
            .strip_prefix("zn:")
            .or_else(|| t.strip_prefix('z'))
            .ok_or_else(|| Error::Invalid(format!("unknown group `{s}`")))?;
        let n: usize = rest
            .parse()
            .map_err(|_| Error::Invalid(format!("bad rank in group `{s}`")))?;
        if n == 0 {
            return invalid("FreeAbelian rank must be at least 1");
        }
        Ok(GroupSpec::FreeAbelian(n))
    }
}

impl From<GroupSpec> for String {
    fn from(g: GroupSpec) -> String {
        g.to_string()
    }
}

impl TryFrom<String> for GroupSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupElement(pub Vec<i64>);

impl GroupElement {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A group together with its standard symmetric generating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    spec: GroupSpec,
    generators: Vec<GroupElement>,
}

pub fn make_group(spec: GroupSpec) -> Result<Group> {
    Group::new(spec)
}

impl Group {
    pub fn new(spec: GroupSpec) -> Result<Self> {
        let generators = match spec {
            GroupSpec::FreeAbelian(0) => return invalid("FreeAbelian rank must be at least 1"),
            GroupSpec::FreeAbelian(n) => {
                let mut gens = Vec::with_capacity(2 * n);
                for k in 0..n {
                    for s in [1, -1] {
                        let mut c = vec![0; n];
                        c[k] = s;
                        gens.push(GroupElement(c));
                    }
                }
                gens
            }
            GroupSpec::Heisenberg3 => vec![
                GroupElement(vec![1, 0, 0]),
                GroupElement(vec![-1, 0, 0]),
                GroupElement(vec![0, 1, 0]),
                GroupElement(vec![0, -1, 0]),
            ],
        };
        Ok(Group { spec, generators })
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    /// Number of edge slots at every vertex.
    pub fn degree(&self) -> usize {
        self.generators.len()
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement(vec![0; self.spec.rank()])
    }

    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        match self.spec {
            GroupSpec::FreeAbelian(_) => {
                GroupElement(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect())
            }
            GroupSpec::Heisenberg3 => {
                let (x, y, z) = (a.0[0], a.0[1], a.0[2]);
                let (u, v, w) = (b.0[0], b.0[1], b.0[2]);
                GroupElement(vec![x + u, y + v, z + w + x * v])
            }
        }
    }

    pub fn invert(&self, a: &GroupElement) -> GroupElement {
        match self.spec {
            GroupSpec::FreeAbelian(_) => GroupElement(a.0.iter().map(|x| -x).collect()),
            GroupSpec::Heisenberg3 => {
                let (x, y, z) = (a.0[0], a.0[1], a.0[2]);
                GroupElement(vec![-x, -y, -z + x * y])
            }
        }
    }

    pub fn check_element(&self, a: &GroupElement) -> Result<()> {
        if a.0.len() != self.spec.rank() {
            return invalid(format!(
                "element {a} has {} coordinates, group {} needs {}",
                a.0.len(),
                self.spec,
                self.spec.rank()
            ));
        }
        Ok(())
    }
}

/// Closed word-metric ball with its adjacency and boundary layer.
#[derive(Debug)]
pub struct Ball {
    group: Group,
    center: GroupElement,
    radius: u32,
    vertices: Vec<GroupElement>,
    dist: Vec<u32>,
    index: HashMap<GroupElement, usize>,
    slots: Vec<u32>,
    boundary: Vec<usize>,
}

pub fn ball(group: &Group, center: GroupElement, radius: u32) -> Result<Ball> {
    Ball::with_cap(group, center, radius, DEFAULT_VERTEX_CAP)
}

impl Ball {
    pub fn new(group: &Group, center: GroupElement, radius: u32) -> Result<Self> {
        Self::with_cap(group, center, radius, DEFAULT_VERTEX_CAP)
    }

    /// Ball about the identity, wrapped for sharing.
    pub fn centered(spec: GroupSpec, radius: u32) -> Result<Arc<Self>> {
        let g = Group::new(spec)?;
        let e = g.identity();
        Ok(Arc::new(Self::new(&g, e, radius)?))
    }

    pub fn with_cap(group: &Group, center: GroupElement, radius: u32, cap: usize) -> Result<Self> {
        group.check_element(&center)?;
        let mut seen: HashSet<GroupElement> = HashSet::new();
        seen.insert(center.clone());
        let mut layers: Vec<Vec<GroupElement>> = vec![vec![center.clone()]];
        for _ in 0..radius {
            let mut next = Vec::new();
            for x in layers.last().unwrap() {
                for s in group.generators() {
                    let y = group.multiply(x, s);
                    if !seen.contains(&y) {
                        if seen.len() >= cap {
                            return Err(Error::Cap {
                                what: "ball vertices",
                                needed: seen.len() + 1,
                                cap,
                            });
                        }
                        seen.insert(y.clone());
                        next.push(y);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            layers.push(next);
        }

        let mut vertices = Vec::with_capacity(seen.len());
        let mut dist = Vec::with_capacity(seen.len());
        for (d, mut layer) in layers.into_iter().enumerate() {
            layer.sort();
            dist.extend(std::iter::repeat_n(d as u32, layer.len()));
            vertices.extend(layer);
        }
        let index: HashMap<GroupElement, usize> =
            vertices.iter().cloned().enumerate().map(|(i, v)| (v, i)).collect();

        let deg = group.degree();
        let mut slots = Vec::with_capacity(vertices.len() * deg);
        let mut boundary = Vec::new();
        for (i, x) in vertices.iter().enumerate() {
            let mut exterior = false;
            for s in group.generators() {
                match index.get(&group.multiply(x, s)) {
                    Some(&j) => slots.push(j as u32),
                    None => {
                        slots.push(EXTERIOR);
                        exterior = true;
                    }
                }
            }
            if exterior {
                boundary.push(i);
            }
        }

        Ok(Ball {
            group: group.clone(),
            center,
            radius,
            vertices,
            dist,
            index,
            slots,
            boundary,
        })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn spec(&self) -> GroupSpec {
        self.group.spec
    }

    pub fn center(&self) -> &GroupElement {
        &self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.group.degree()
    }

    pub fn vertices(&self) -> &[GroupElement] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &GroupElement {
        &self.vertices[i]
    }

    /// Word distance from the center to vertex `i`.
    pub fn distance(&self, i: usize) -> u32 {
        self.dist[i]
    }

    pub fn distances(&self) -> &[u32] {
        &self.dist
    }

    pub fn index_of(&self, x: &GroupElement) -> Option<usize> {
        self.index.get(x).copied()
    }

    /// Neighbor slots of vertex `i` in generator order; `EXTERIOR` marks outside.
    pub fn slots(&self, i: usize) -> &[u32] {
        let d = self.degree();
        &self.slots[i * d..(i + 1) * d]
    }

    pub fn interior_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.slots(i).iter().filter(|&&j| j != EXTERIOR).map(|&j| j as usize)
    }

    pub fn exterior_count(&self, i: usize) -> usize {
        self.slots(i).iter().filter(|&&j| j == EXTERIOR).count()
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Undirected interior edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for j in self.interior_neighbors(i) {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Hex SHA-256 of the group, radius, center and vertex ordering.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.group.spec.to_string().as_bytes());
        h.update(self.radius.to_le_bytes());
        for c in &self.center.0 {
            h.update(c.to_le_bytes());
        }
        for v in &self.vertices {
            h.update([0xff]);
            for c in &v.0 {
                h.update(c.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Whether two balls describe the same vertex set in the same order.
    pub fn same_as(&self, other: &Ball) -> bool {
        std::ptr::eq(self, other)
            || (self.group.spec == other.group.spec
                && self.radius == other.radius
                && self.center == other.center
                && self.vertices == other.vertices)
    }

    pub fn to_export(&self) -> BallExport {
        BallExport {
            group: self.group.spec,
            center: self.center.0.clone(),
            radius: self.radius,
            vertices: self.vertices.iter().map(|v| v.0.clone()).collect(),
            edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect(),
        }
    }
}

/// Serialized form of a truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallExport {
    pub group: GroupSpec,
    pub center: Vec<i64>,
    pub radius: u32,
    pub vertices: Vec<Vec<i64>>,
    pub edges: Vec<[usize; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WordDistance {
    Finite(u32),
    Unreachable(u32),
}

impl WordDistance {
    pub fn finite(self) -> Option<u32> {
        match self {
            WordDistance::Finite(d) => Some(d),
            WordDistance::Unreachable(_) => None,
        }
    }
}

/// Shortest word length from `x` to `y`, by breadth-first search from `x`.
pub fn word_distance(group: &Group, x: &GroupElement, y: &GroupElement, cap: u32) -> Result<WordDistance> {
    group.check_element(x)?;
    group.check_element(y)?;
    if x == y {
        return Ok(WordDistance::Finite(0));
    }
    let mut seen: HashSet<GroupElement> = HashSet::new();
    seen.insert(x.clone());
    let mut frontier = vec![x.clone()];
    for d in 1..=cap {
        let mut next = Vec::new();
        for a in &frontier {
            for s in group.generators() {
                let b = group.multiply(a, s);
                if &b == y {
                    return Ok(WordDistance::Finite(d));
                }
                if seen.insert(b.clone()) {
                    next.push(b);
                }
            }
        }
        frontier = next;
    }
    Ok(WordDistance::Unreachable(cap))
}

/// `beta(n) = |ball(e, n)|` for `n = 0..=n_max`.
pub fn growth_function(group: &Group, n_max: u32) -> Result<Vec<usize>> {
    growth_function_with_cap(group, n_max, DEFAULT_VERTEX_CAP)
}

pub fn growth_function_with_cap(group: &Group, n_max: u32, cap: usize) -> Result<Vec<usize>> {
    let b = Ball::with_cap(group, group.identity(), n_max, cap)?;
    let mut counts = vec![0usize; n_max as usize + 1];
    for &d in b.distances() {
        counts[d as usize] += 1;
    }
    for n in 1..counts.len() {
        counts[n] += counts[n - 1];
    }
    Ok(counts)
}

/// Result of a translation: the moved function and the share of squared
/// mass that left the truncation.
#[derive(Clone, Debug)]
pub struct Translated {
    pub function: LatticeFunction,
    pub dropped_fraction: f64,
}

/// `(translate(u, g))(x) = u(g x)`; values carried outside the ball are dropped.
pub fn translate(u: &LatticeFunction, g: &GroupElement) -> Result<Translated> {
    let dom = u.domain();
    let group = dom.group();
    group.check_element(g)?;
    let mut out = vec![0.0; dom.len()];
    for (i, x) in dom.vertices().iter().enumerate() {
        if let Some(j) = dom.index_of(&group.multiply(g, x)) {
            out[i] = u.values()[j];
        }
    }
    let total: f64 = u.values().iter().map(|v| v * v).sum();
    let kept: f64 = out.iter().map(|v| v * v).sum();
    let dropped_fraction = if total > 0.0 { ((total - kept) / total).max(0.0) } else { 0.0 };
    Ok(Translated {
        function: LatticeFunction::new(Arc::clone(u.domain_arc()), out)?,
        dropped_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h3() -> Group {
        Group::new(GroupSpec::Heisenberg3).unwrap()
    }

    #[test]
    fn generator_counts() {
        assert_eq!(Group::new(GroupSpec::FreeAbelian(3)).unwrap().generators().len(), 6);
        assert_eq!(h3().generators().len(), 4);
        assert!(Group::new(GroupSpec::FreeAbelian(0)).is_err());
    }

    #[test]
    fn heisenberg_law() {
        let g = h3();
        let p = g.multiply(&GroupElement(vec![1, 0, 0]), &GroupElement(vec![0, 1, 0]));
        assert_eq!(p, GroupElement(vec![1, 1, 1]));
        let q = g.multiply(&GroupElement(vec![0, 1, 0]), &GroupElement(vec![1, 0, 0]));
        assert_eq!(q, GroupElement(vec![1, 1, 0]));
    }

    #[test]
    fn generating_sets_are_symmetric() {
        for spec in [GroupSpec::FreeAbelian(4), GroupSpec::Heisenberg3] {
            let g = Group::new(spec).unwrap();
            for s in g.generators() {
                assert!(g.generators().contains(&g.invert(s)));
            }
        }
    }

    #[test]
    fn small_balls() {
        let z3 = Group::new(GroupSpec::FreeAbelian(3)).unwrap();
        assert_eq!(Ball::new(&z3, z3.identity(), 1).unwrap().len(), 7);
        let z2 = Group::new(GroupSpec::FreeAbelian(2)).unwrap();
        assert_eq!(Ball::new(&z2, z2.identity(), 2).unwrap().len(), 13);
        assert_eq!(Ball::new(&h3(), h3().identity(), 2).unwrap().len(), 17);
    }

    #[test]
    fn vertex_order_is_distance_then_lex() {
        let z2 = Group::new(GroupSpec::FreeAbelian(2)).unwrap();
        let b = Ball::new(&z2, z2.identity(), 3).unwrap();
        for i in 1..b.len() {
            let a = (b.distance(i - 1), b.vertex(i - 1));
            let c = (b.distance(i), b.vertex(i));
            assert!(a < c);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let z3 = Group::new(GroupSpec::FreeAbelian(3)).unwrap();
        let err = Ball::with_cap(&z3, z3.identity(), 5, 100).unwrap_err();
        assert!(matches!(err, Error::Cap { .. }));
    }

    #[test]
    fn distances() {
        let z2 = Group::new(GroupSpec::FreeAbelian(2)).unwrap();
        let d = word_distance(&z2, &GroupElement(vec![0, 0]), &GroupElement(vec![2, 3]), 10).unwrap();
        assert_eq!(d, WordDistance::Finite(5));
        let g = h3();
        let e = g.identity();
        assert_eq!(word_distance(&g, &e, &e, 0).unwrap(), WordDistance::Finite(0));
        let z = GroupElement(vec![0, 0, 1]);
        assert_eq!(word_distance(&g, &e, &z, 10).unwrap(), WordDistance::Finite(4));
        assert_eq!(word_distance(&g, &e, &z, 3).unwrap(), WordDistance::Unreachable(3));
    }

    #[test]
    fn growth_small() {
        let z3 = Group::new(GroupSpec::FreeAbelian(3)).unwrap();
        assert_eq!(growth_function(&z3, 1).unwrap(), vec![1, 7]);
        assert_eq!(growth_function(&h3(), 2).unwrap(), vec![1, 5, 17]);
    }

    #[test]
    fn group_spec_round_trip() {
        for s in ["zN:3", "heisenberg", "zN:5"] {
            let g: GroupSpec = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
        }
        assert!("zN:0".parse::<GroupSpec>().is_err());
        assert!("free".parse::<GroupSpec>().is_err());
    }

    #[test]
    fn checksum_tracks_ordering() {
        let a = Ball::centered(GroupSpec::FreeAbelian(3), 3).unwrap();
        let b = Ball::centered(GroupSpec::FreeAbelian(3), 3).unwrap();
        let c = Ball::centered(GroupSpec::FreeAbelian(3), 4).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.checksum(), c.checksum());
    }
}
