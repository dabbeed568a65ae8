//! Hierarchy tree of chains: orders, path arithmetic and configuration.
//!
//! A hierarchy with `R` orders is a tree whose root (order 1) is the chain
//! every miner works on and whose leaves (order `R`) are the chains a miner
//! picks as the bottom of its mining slice. Chains are addressed by their
//! root-to-node path, written `{1,2,1}`; the leading `1` is the root.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Deepest hierarchy supported. Paths are stored inline so they stay `Copy`.
pub const MAX_ORDERS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HierarchyError {
    #[error("hierarchy needs at least one order")]
    NoOrders,
    #[error("at most {MAX_ORDERS} orders are supported, got {0}")]
    TooManyOrders(usize),
    #[error("branching factor at order {order} must be at least 1")]
    ZeroBranching { order: usize },
    #[error("branching factor {0} exceeds the supported maximum")]
    BranchingTooLarge(usize),
    #[error("chain path must be non-empty and start at the root index 1")]
    BadRoot,
    #[error("chain path index must be positive")]
    ZeroIndex,
    #[error("chain path {path} has order {order}, hierarchy has {orders} orders")]
    TooDeep { path: ChainPath, order: usize, orders: usize },
    #[error("chain path {path}: index {index} at depth {depth} exceeds branching {branching}")]
    IndexOutOfRange { path: ChainPath, depth: usize, index: u16, branching: u16 },
    #[error("the root chain has no parent")]
    RootHasNoParent,
    #[error("{path} is not a leaf: order {order} < {orders}")]
    NotALeaf { path: ChainPath, order: usize, orders: usize },
    #[error("cannot parse chain path {0:?}")]
    Parse(String),
}

/// Root-to-node path identifying a sub-network, its blockchain and its state
/// partition.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainPath {
    len: u8,
    idx: [u16; MAX_ORDERS],
}

impl ChainPath {
    /// The root chain `{1}`.
    pub const ROOT: ChainPath = ChainPath { len: 1, idx: [1, 0, 0, 0, 0, 0, 0, 0] };

    pub fn new(indices: &[u16]) -> Result<Self, HierarchyError> {
        if indices.first() != Some(&1) {
            return Err(HierarchyError::BadRoot);
        }
        if indices.len() > MAX_ORDERS {
            return Err(HierarchyError::TooManyOrders(indices.len()));
        }
        if indices.contains(&0) {
            return Err(HierarchyError::ZeroIndex);
        }
        let mut idx = [0; MAX_ORDERS];
        idx[..indices.len()].copy_from_slice(indices);
        Ok(ChainPath { len: indices.len() as u8, idx })
    }

    pub fn indices(&self) -> &[u16] {
        &self.idx[..self.len as usize]
    }

    /// Order of the chain: the length of its path.
    pub fn order(&self) -> usize {
        self.len as usize
    }

    pub fn is_root(&self) -> bool {
        self.len == 1
    }

    pub fn parent(&self) -> Result<ChainPath, HierarchyError> {
        if self.is_root() {
            return Err(HierarchyError::RootHasNoParent);
        }
        let mut p = *self;
        p.len -= 1;
        p.idx[p.len as usize] = 0;
        Ok(p)
    }

    /// The ancestor-or-self of this chain at `order`, if `order` is in range.
    pub fn ancestor_at(&self, order: usize) -> Option<ChainPath> {
        if order == 0 || order > self.order() {
            return None;
        }
        let mut p = *self;
        p.len = order as u8;
        p.idx[order..].iter_mut().for_each(|i| *i = 0);
        Some(p)
    }

    /// Child path with `index` appended.
    pub fn child(&self, index: u16) -> Result<ChainPath, HierarchyError> {
        if self.order() >= MAX_ORDERS {
            return Err(HierarchyError::TooManyOrders(self.order() + 1));
        }
        if index == 0 {
            return Err(HierarchyError::ZeroIndex);
        }
        let mut c = *self;
        c.idx[c.len as usize] = index;
        c.len += 1;
        Ok(c)
    }

    /// `true` if `self` lies on the path from the root to `other` (inclusive).
    pub fn is_prefix_of(&self, other: &ChainPath) -> bool {
        self.len <= other.len && self.indices() == &other.indices()[..self.order()]
    }

    /// Longest common prefix. Never empty since every path starts at the root.
    pub fn common_ancestor(&self, other: &ChainPath) -> ChainPath {
        let shared = self
            .indices()
            .iter()
            .zip(other.indices())
            .take_while(|(a, b)| a == b)
            .count();
        self.ancestor_at(shared.max(1)).expect("root is shared")
    }

    /// All prefixes root-first, ending with `self`.
    pub fn prefixes(&self) -> impl Iterator<Item = ChainPath> + '_ {
        (1..=self.order()).map(move |o| self.ancestor_at(o).expect("in range"))
    }
}

impl PartialOrd for ChainPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on the index sequence, which orders siblings left to right.
impl Ord for ChainPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.indices().cmp(other.indices())
    }
}

impl fmt::Display for ChainPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.indices().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for ChainPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `{1,2,1}`, `1,2,1` and `1.2.1`.
impl FromStr for ChainPath {
    type Err = HierarchyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('{').trim_end_matches('}');
        let parts: Result<Vec<u16>, _> = inner
            .split([',', '.'])
            .map(|p| p.trim().parse::<u16>())
            .collect();
        let parts = parts.map_err(|_| HierarchyError::Parse(s.to_string()))?;
        ChainPath::new(&parts)
    }
}

impl Serialize for ChainPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChainPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            List(Vec<u16>),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::List(v) => ChainPath::new(&v).map_err(serde::de::Error::custom),
        }
    }
}

/// Shape of the hierarchy: `branching[k]` is the number of children of every
/// node at order `k + 1`, so `R = branching.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "HierarchyRepr", into = "HierarchyRepr")]
pub struct HierarchyConfig {
    branching: Vec<u16>,
}

#[derive(Serialize, Deserialize)]
struct HierarchyRepr {
    #[serde(default)]
    branching: Vec<u16>,
}

impl TryFrom<HierarchyRepr> for HierarchyConfig {
    type Error = HierarchyError;
    fn try_from(r: HierarchyRepr) -> Result<Self, Self::Error> {
        HierarchyConfig::new(r.branching)
    }
}

impl From<HierarchyConfig> for HierarchyRepr {
    fn from(h: HierarchyConfig) -> Self {
        HierarchyRepr { branching: h.branching }
    }
}

impl HierarchyConfig {
    pub fn new(branching: Vec<u16>) -> Result<Self, HierarchyError> {
        if branching.len() + 1 > MAX_ORDERS {
            return Err(HierarchyError::TooManyOrders(branching.len() + 1));
        }
        if let Some(k) = branching.iter().position(|&b| b == 0) {
            return Err(HierarchyError::ZeroBranching { order: k + 1 });
        }
        Ok(HierarchyConfig { branching })
    }

    /// A single classic chain (`R = 1`).
    pub fn single_chain() -> Self {
        HierarchyConfig { branching: Vec::new() }
    }

    pub fn num_orders(&self) -> usize {
        self.branching.len() + 1
    }

    pub fn branching(&self) -> &[u16] {
        &self.branching
    }

    /// Number of chains at `order`.
    pub fn chains_at(&self, order: usize) -> usize {
        self.branching[..order - 1].iter().map(|&b| b as usize).product()
    }

    pub fn validate(&self, path: &ChainPath) -> Result<(), HierarchyError> {
        let r = self.num_orders();
        if path.order() > r {
            return Err(HierarchyError::TooDeep { path: *path, order: path.order(), orders: r });
        }
        for (depth, &index) in path.indices().iter().enumerate().skip(1) {
            let branching = self.branching[depth - 1];
            if index > branching {
                return Err(HierarchyError::IndexOutOfRange {
                    path: *path,
                    depth: depth + 1,
                    index,
                    branching,
                });
            }
        }
        Ok(())
    }

    pub fn is_leaf(&self, path: &ChainPath) -> bool {
        path.order() == self.num_orders()
    }

    /// Chains mined together by a miner whose slice ends at `leaf`, root first.
    pub fn mining_slice(&self, leaf: &ChainPath) -> Result<Vec<ChainPath>, HierarchyError> {
        self.validate(leaf)?;
        if !self.is_leaf(leaf) {
            return Err(HierarchyError::NotALeaf {
                path: *leaf,
                order: leaf.order(),
                orders: self.num_orders(),
            });
        }
        Ok(leaf.prefixes().collect())
    }

    /// Every chain, ordered by order and then left to right.
    pub fn chains(&self) -> Vec<ChainPath> {
        let mut out = vec![ChainPath::ROOT];
        let mut frontier = vec![ChainPath::ROOT];
        for &b in &self.branching {
            let mut next = Vec::with_capacity(frontier.len() * b as usize);
            for p in &frontier {
                for i in 1..=b {
                    next.push(p.child(i).expect("depth checked at construction"));
                }
            }
            out.extend_from_slice(&next);
            frontier = next;
        }
        out
    }

    pub fn leaves(&self) -> Vec<ChainPath> {
        let r = self.num_orders();
        self.chains().into_iter().filter(|c| c.order() == r).collect()
    }

    pub fn children(&self, path: &ChainPath) -> Vec<ChainPath> {
        if path.order() >= self.num_orders() {
            return Vec::new();
        }
        let b = self.branching[path.order() - 1];
        (1..=b).map(|i| path.child(i).expect("depth in range")).collect()
    }
}

pub fn parent(path: &ChainPath) -> Result<ChainPath, HierarchyError> {
    path.parent()
}

pub fn order(path: &ChainPath) -> usize {
    path.order()
}

pub fn common_ancestor(a: &ChainPath, b: &ChainPath) -> ChainPath {
    a.common_ancestor(b)
}
