//! Finite permutation groups acting on indexed data.
//!
//! Every group element acts on a flat vector of coordinates. Nested elements
//! act on a cluster-major flattening: clusters are first permuted internally
//! and then reordered, so the action on `((a,b),(c,d))` by
//! `σ = (swap, id), π = swap` yields `((c,d),(b,a))`.
//!
//! Orbit sums over a group collapse to a short weighted list of coset
//! representatives; [`GroupSpec::target_cosets`] gives the closed form for the
//! label "which source coordinate lands in the last slot".

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the number of elements [`GroupSpec::enumerate`] will materialize.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

/// A bijection on `{0, …, n−1}`; `map[i]` is the image of `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    map: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Permutation::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.map
    }
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &v in &map {
            if v >= n || seen[v] {
                return Err(Error::structural(format!(
                    "{map:?} is not a bijection on 0..{n}"
                )));
            }
            seen[v] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    /// Swaps `a` and `b`, fixing everything else.
    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Self { map }
    }

    pub fn degree(&self) -> usize {
        self.map.len()
    }

    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &v) in self.map.iter().enumerate() {
            inv[v] = i;
        }
        Self { map: inv }
    }

    /// Function composition `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.degree() != other.degree() {
            return Err(Error::structural(format!(
                "cannot compose permutations of degree {} and {}",
                self.degree(),
                other.degree()
            )));
        }
        Ok(Self {
            map: other.map.iter().map(|&j| self.map[j]).collect(),
        })
    }

    /// Permutation action: coordinate `i` of the result is `z[g⁻¹(i)]`.
    pub fn act<T: Clone>(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.degree() {
            return Err(Error::structural(format!(
                "permutation of degree {} cannot act on {} coordinates",
                self.degree(),
                z.len()
            )));
        }
        let mut out: Vec<Option<T>> = vec![None; z.len()];
        for (j, item) in z.iter().enumerate() {
            out[self.map[j]] = Some(item.clone());
        }
        Ok(out.into_iter().map(|v| v.expect("bijection")).collect())
    }
}

/// An element `(σ₁, …, σ_K; π)` of the nested symmetric group.
///
/// `inner[i]` permutes the members of input cluster `i`; `outer` then moves
/// cluster `i` to position `π(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NestedElement {
    inner: Vec<Permutation>,
    outer: Permutation,
}

impl NestedElement {
    pub fn new(inner: Vec<Permutation>, outer: Permutation) -> Result<Self> {
        if inner.len() != outer.degree() {
            return Err(Error::structural(format!(
                "{} inner permutations but outer permutation has degree {}",
                inner.len(),
                outer.degree()
            )));
        }
        Ok(Self { inner, outer })
    }

    pub fn identity(cluster_sizes: &[usize]) -> Self {
        Self {
            inner: cluster_sizes
                .iter()
                .map(|&n| Permutation::identity(n))
                .collect(),
            outer: Permutation::identity(cluster_sizes.len()),
        }
    }

    pub fn inner(&self) -> &[Permutation] {
        &self.inner
    }

    pub fn outer(&self) -> &Permutation {
        &self.outer
    }

    /// Cluster sizes of the layout this element acts on.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.inner.iter().map(Permutation::degree).collect()
    }

    pub fn degree(&self) -> usize {
        self.inner.iter().map(Permutation::degree).sum()
    }

    /// `(σ, π)(τ, η) = ((σ_{η(1)}τ₁, …, σ_{η(K)}τ_K), πη)`.
    ///
    /// Requires `deg σ_{η(j)} = deg τ_j`, i.e. the output layout of `other`
    /// must be the input layout of `self`.
    pub fn compose(&self, other: &NestedElement) -> Result<Self> {
        let outer = self.outer.compose(&other.outer)?;
        let inner = other
            .inner
            .iter()
            .enumerate()
            .map(|(j, tau)| self.inner[other.outer.image(j)].compose(tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { inner, outer })
    }

    pub fn inverse(&self) -> Self {
        let outer = self.outer.inverse();
        let inner = (0..self.inner.len())
            .map(|j| self.inner[outer.image(j)].inverse())
            .collect();
        Self { inner, outer }
    }

    /// Action on an explicit list of clusters.
    pub fn act_clusters<T: Clone>(&self, clusters: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        if clusters.len() != self.inner.len() {
            return Err(Error::structural(format!(
                "element has {} clusters, data has {}",
                self.inner.len(),
                clusters.len()
            )));
        }
        let permuted = clusters
            .iter()
            .zip(&self.inner)
            .map(|(c, sigma)| sigma.act(c))
            .collect::<Result<Vec<_>>>()?;
        self.outer.act(&permuted)
    }

    /// The induced permutation of flat (cluster-major) coordinates.
    pub fn flat_permutation(&self) -> Permutation {
        let sizes = self.cluster_sizes();
        let k = sizes.len();
        let outer_inv = self.outer.inverse();
        // offset of output position p
        let mut out_offset = vec![0usize; k];
        let mut acc = 0;
        for p in 0..k {
            out_offset[p] = acc;
            acc += sizes[outer_inv.image(p)];
        }
        let mut map = Vec::with_capacity(acc);
        for (i, sigma) in self.inner.iter().enumerate() {
            let base = out_offset[self.outer.image(i)];
            map.extend(sigma.as_slice().iter().map(|&v| base + v));
        }
        Permutation { map }
    }
}

/// An element of one of the supported finite groups.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupElement {
    Perm(Permutation),
    Nested(NestedElement),
    /// Direct product acting block-wise on consecutive coordinate ranges.
    Product(Vec<GroupElement>),
}

impl From<Permutation> for GroupElement {
    fn from(p: Permutation) -> Self {
        GroupElement::Perm(p)
    }
}

impl From<NestedElement> for GroupElement {
    fn from(e: NestedElement) -> Self {
        GroupElement::Nested(e)
    }
}

impl GroupElement {
    pub fn degree(&self) -> usize {
        match self {
            GroupElement::Perm(p) => p.degree(),
            GroupElement::Nested(e) => e.degree(),
            GroupElement::Product(parts) => parts.iter().map(GroupElement::degree).sum(),
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            GroupElement::Perm(p) => GroupElement::Perm(p.inverse()),
            GroupElement::Nested(e) => GroupElement::Nested(e.inverse()),
            GroupElement::Product(parts) => {
                GroupElement::Product(parts.iter().map(GroupElement::inverse).collect())
            }
        }
    }

    /// The group law `self · other` (apply `other` first).
    pub fn compose(&self, other: &GroupElement) -> Result<Self> {
        match (self, other) {
            (GroupElement::Perm(a), GroupElement::Perm(b)) => Ok(GroupElement::Perm(a.compose(b)?)),
            (GroupElement::Nested(a), GroupElement::Nested(b)) => {
                Ok(GroupElement::Nested(a.compose(b)?))
            }
            (GroupElement::Product(a), GroupElement::Product(b)) if a.len() == b.len() => {
                Ok(GroupElement::Product(
                    a.iter()
                        .zip(b)
                        .map(|(x, y)| x.compose(y))
                        .collect::<Result<_>>()?,
                ))
            }
            _ => Err(Error::structural(
                "cannot compose elements of different group kinds",
            )),
        }
    }

    /// The induced permutation of flat coordinates.
    pub fn to_permutation(&self) -> Permutation {
        match self {
            GroupElement::Perm(p) => p.clone(),
            GroupElement::Nested(e) => e.flat_permutation(),
            GroupElement::Product(parts) => {
                let mut map = Vec::with_capacity(self.degree());
                let mut offset = 0;
                for part in parts {
                    let p = part.to_permutation();
                    map.extend(p.as_slice().iter().map(|&v| offset + v));
                    offset += p.degree();
                }
                Permutation { map }
            }
        }
    }

    pub fn act<T: Clone>(&self, z: &[T]) -> Result<Vec<T>> {
        self.to_permutation().act(z)
    }

    /// Flat index of the input coordinate that the action moves into the last slot.
    pub fn target_source(&self) -> usize {
        let p = self.to_permutation();
        let last = p.degree() - 1;
        p.as_slice()
            .iter()
            .position(|&v| v == last)
            .expect("bijection")
    }
}

/// A coset of the label's stabilizer: one representative, the label it
/// induces and the number of group elements sharing that label.
#[derive(Clone, Debug)]
pub struct Coset<K> {
    pub representative: GroupElement,
    pub label: K,
    pub multiplicity: BigUint,
}

/// Descriptor of a finite group acting on flat coordinates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum GroupSpec {
    /// `S_n` acting on `n` coordinates.
    Symmetric(usize),
    /// `(S_{n₁} × … × S_{n_K}) ⋊ S_K` acting on cluster-major coordinates.
    NestedSymmetric(Vec<usize>),
    /// Direct product acting on consecutive coordinate blocks.
    Product(Vec<GroupSpec>),
    /// A user-supplied list of elements, e.g. a graph automorphism group.
    Explicit(Vec<GroupElement>),
}

fn factorial(n: usize) -> BigUint {
    (2..=n).fold(BigUint::one(), |acc, k| acc * BigUint::from(k))
}

/// `num / den` as a float without overflowing on huge factorials.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    let shift = den.bits().saturating_sub(62);
    let n = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let d = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Lexicographic successor; returns false after the last permutation.
fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![Permutation { map: cur.clone() }];
    while next_permutation(&mut cur) {
        out.push(Permutation { map: cur.clone() });
    }
    out
}

fn cartesian<T: Clone>(lists: &[Vec<T>]) -> Vec<Vec<T>> {
    lists.iter().fold(vec![Vec::new()], |acc, list| {
        acc.iter()
            .flat_map(|prefix| {
                list.iter().map(move |item| {
                    let mut next = prefix.clone();
                    next.push(item.clone());
                    next
                })
            })
            .collect()
    })
}

impl GroupSpec {
    /// Validated explicit group; all elements must share one degree.
    pub fn explicit(elements: Vec<GroupElement>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::data("explicit group needs at least one element"))?;
        let degree = first.degree();
        if elements.iter().any(|g| g.degree() != degree) {
            return Err(Error::structural(
                "explicit group elements differ in degree",
            ));
        }
        Ok(GroupSpec::Explicit(elements))
    }

    pub fn degree(&self) -> usize {
        match self {
            GroupSpec::Symmetric(n) => *n,
            GroupSpec::NestedSymmetric(sizes) => sizes.iter().sum(),
            GroupSpec::Product(parts) => parts.iter().map(GroupSpec::degree).sum(),
            GroupSpec::Explicit(elems) => elems.first().map_or(0, GroupElement::degree),
        }
    }

    pub fn cardinality(&self) -> BigUint {
        match self {
            GroupSpec::Symmetric(n) => factorial(*n),
            GroupSpec::NestedSymmetric(sizes) => sizes
                .iter()
                .fold(factorial(sizes.len()), |acc, &n| acc * factorial(n)),
            GroupSpec::Product(parts) => parts
                .iter()
                .fold(BigUint::one(), |acc, p| acc * p.cardinality()),
            GroupSpec::Explicit(elems) => BigUint::from(elems.len()),
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self {
            GroupSpec::Symmetric(n) => Permutation::identity(*n).into(),
            GroupSpec::NestedSymmetric(sizes) => NestedElement::identity(sizes).into(),
            GroupSpec::Product(parts) => {
                GroupElement::Product(parts.iter().map(GroupSpec::identity).collect())
            }
            GroupSpec::Explicit(elems) => GroupElement::Perm(Permutation::identity(
                elems.first().map_or(0, |g| g.degree()),
            )),
        }
    }

    /// Every element, in a deterministic order; fails beyond `cap` elements.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<GroupElement>> {
        let order = self.cardinality();
        if order > BigUint::from(cap) {
            return Err(Error::Capability {
                order: order.to_string(),
                cap,
            });
        }
        Ok(self.enumerate_unchecked())
    }

    fn enumerate_unchecked(&self) -> Vec<GroupElement> {
        match self {
            GroupSpec::Symmetric(n) => all_permutations(*n).into_iter().map(Into::into).collect(),
            GroupSpec::NestedSymmetric(sizes) => {
                let inner_lists: Vec<Vec<Permutation>> =
                    sizes.iter().map(|&n| all_permutations(n)).collect();
                let inners = cartesian(&inner_lists);
                let outers = all_permutations(sizes.len());
                let mut out = Vec::with_capacity(inners.len() * outers.len());
                for outer in &outers {
                    for inner in &inners {
                        out.push(GroupElement::Nested(NestedElement {
                            inner: inner.clone(),
                            outer: outer.clone(),
                        }));
                    }
                }
                out
            }
            GroupSpec::Product(parts) => {
                let lists: Vec<Vec<GroupElement>> =
                    parts.iter().map(GroupSpec::enumerate_unchecked).collect();
                cartesian(&lists)
                    .into_iter()
                    .map(GroupElement::Product)
                    .collect()
            }
            GroupSpec::Explicit(elems) => elems.clone(),
        }
    }

    /// Whether `g` has the shape of an element of this group. Explicit groups
    /// check membership in the list.
    pub fn contains(&self, g: &GroupElement) -> bool {
        match (self, g) {
            (GroupSpec::Symmetric(n), GroupElement::Perm(p)) => p.degree() == *n,
            (GroupSpec::NestedSymmetric(sizes), GroupElement::Nested(e)) => {
                e.cluster_sizes() == *sizes
            }
            (GroupSpec::Product(specs), GroupElement::Product(parts)) => {
                specs.len() == parts.len() && specs.iter().zip(parts).all(|(s, p)| s.contains(p))
            }
            (GroupSpec::Explicit(elems), _) => elems.contains(g),
            _ => false,
        }
    }

    /// `count` independent draws from the uniform (Haar) distribution.
    pub fn haar_sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<GroupElement> {
        (0..count).map(|_| self.haar_draw(rng)).collect()
    }

    fn haar_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        fn shuffle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
            let mut map: Vec<usize> = (0..n).collect();
            map.shuffle(rng);
            Permutation { map }
        }
        match self {
            GroupSpec::Symmetric(n) => shuffle(*n, rng).into(),
            GroupSpec::NestedSymmetric(sizes) => {
                let inner = sizes.iter().map(|&n| shuffle(n, rng)).collect();
                let outer = shuffle(sizes.len(), rng);
                NestedElement { inner, outer }.into()
            }
            GroupSpec::Product(parts) => {
                GroupElement::Product(parts.iter().map(|p| p.haar_draw(rng)).collect())
            }
            GroupSpec::Explicit(elems) => elems[rng.random_range(0..elems.len())].clone(),
        }
    }

    /// One representative per distinct `label`, by enumeration.
    ///
    /// Multiplicities sum to the group order. Labels must depend on `g` only
    /// through the function it induces on the data.
    pub fn coset_representatives<K, F>(&self, label: F, cap: usize) -> Result<Vec<Coset<K>>>
    where
        K: Ord + Clone,
        F: Fn(&GroupElement) -> K,
    {
        let mut buckets: BTreeMap<K, (GroupElement, BigUint)> = BTreeMap::new();
        for g in self.enumerate(cap)? {
            let key = label(&g);
            buckets
                .entry(key)
                .and_modify(|(_, m)| *m += 1u32)
                .or_insert((g, BigUint::one()));
        }
        Ok(buckets
            .into_iter()
            .map(|(label, (representative, multiplicity))| Coset {
                representative,
                label,
                multiplicity,
            })
            .collect())
    }

    /// Cosets of the stabilizer of the last coordinate, labelled by the flat
    /// index of the coordinate each coset moves into the last slot.
    ///
    /// Closed form for symmetric, nested and product groups; explicit groups
    /// are scanned directly.
    pub fn target_cosets(&self) -> Result<Vec<Coset<usize>>> {
        let degree = self.degree();
        if degree == 0 {
            return Err(Error::data("group acts on zero coordinates"));
        }
        match self {
            GroupSpec::Symmetric(n) => {
                let mult = factorial(n - 1);
                Ok((0..*n)
                    .map(|i| Coset {
                        representative: Permutation::transposition(*n, i, n - 1).into(),
                        label: i,
                        multiplicity: mult.clone(),
                    })
                    .collect())
            }
            GroupSpec::NestedSymmetric(sizes) => {
                if sizes.contains(&0) {
                    return Err(Error::data("nested group with an empty cluster"));
                }
                let k = sizes.len();
                let all = sizes
                    .iter()
                    .fold(BigUint::one(), |acc, &n| acc * factorial(n));
                let mut out = Vec::with_capacity(degree);
                let mut offset = 0;
                for (i, &ni) in sizes.iter().enumerate() {
                    // (K−1)!·(nᵢ−1)!·∏_{k≠i} n_k!
                    let mult = factorial(k - 1) * &all / BigUint::from(ni);
                    for j in 0..ni {
                        let inner = sizes
                            .iter()
                            .enumerate()
                            .map(|(c, &n)| {
                                if c == i {
                                    Permutation::transposition(n, j, n - 1)
                                } else {
                                    Permutation::identity(n)
                                }
                            })
                            .collect();
                        let outer = Permutation::transposition(k, i, k - 1);
                        out.push(Coset {
                            representative: NestedElement { inner, outer }.into(),
                            label: offset + j,
                            multiplicity: mult.clone(),
                        });
                    }
                    offset += ni;
                }
                Ok(out)
            }
            GroupSpec::Product(parts) => {
                let (last, rest) = parts
                    .split_last()
                    .ok_or_else(|| Error::data("empty product group"))?;
                let rest_order = rest
                    .iter()
                    .fold(BigUint::one(), |acc, p| acc * p.cardinality());
                let offset: usize = rest.iter().map(GroupSpec::degree).sum();
                let ids: Vec<GroupElement> = rest.iter().map(GroupSpec::identity).collect();
                Ok(last
                    .target_cosets()?
                    .into_iter()
                    .map(|c| {
                        let mut elems = ids.clone();
                        elems.push(c.representative);
                        Coset {
                            representative: GroupElement::Product(elems),
                            label: offset + c.label,
                            multiplicity: c.multiplicity * &rest_order,
                        }
                    })
                    .collect())
            }
            GroupSpec::Explicit(elems) => {
                self.coset_representatives(GroupElement::target_source, elems.len().max(1))
            }
        }
    }

    /// Checks closure, identity and inverses by enumeration.
    pub fn verify_axioms(&self, cap: usize) -> Result<()> {
        let elems = self.enumerate(cap)?;
        let perms: std::collections::HashSet<Permutation> =
            elems.iter().map(GroupElement::to_permutation).collect();
        if !perms.contains(&Permutation::identity(self.degree())) {
            return Err(Error::structural("identity missing"));
        }
        for g in &elems {
            if !perms.contains(&g.inverse().to_permutation()) {
                return Err(Error::structural("inverse missing"));
            }
            for h in &elems {
                let gh = g.to_permutation().compose(&h.to_permutation())?;
                if !perms.contains(&gh) {
                    return Err(Error::structural("not closed under composition"));
                }
            }
        }
        Ok(())
    }
}
