//! Automorphism groups of frames, stabilizers, orbit partitions, restricted
//! actions, and the finite extension-property check.
//!
//! The search is a backtracking scan over candidate images with partition
//! refinement: vertices are split into cells by iterated (out-degree,
//! in-degree, edges-to-fixed-points) signatures, candidate images are
//! confined to the source vertex's cell, and a branch is pruned on the first
//! relation violation. Two shortcuts keep large-but-boring frames cheap:
//!
//! * if every refined cell is "free" (all transpositions against the cell
//!   representative preserve the relation) the group is exactly the product
//!   of symmetric groups on the cells and no search runs;
//! * otherwise a point-stabilizer chain is built level by level, giving the
//!   order as the product of orbit sizes without enumerating elements.
//!
//! Orders are exact big integers. All tie-breaking is by ascending index so
//! outputs are byte-stable across runs and schedules.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::frame::{Frame, WorldSet};
use crate::perm::Permutation;

/// Groups with order at most this are fully enumerated; larger ones carry
/// generators and order only.
pub const DEFAULT_ENUMERATION_BOUND: u64 = 100_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("set is not invariant: generator maps {point} to {image} outside the set")]
    NotInvariant { point: usize, image: usize },
    #[error("blocks overlap at world {point}")]
    OverlappingBlocks { point: usize },
    #[error("group is not enumerated (order {order} exceeds the enumeration bound)")]
    NotEnumerated { order: String },
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
}

/// A permutation group on `0..degree`: generators, exact order, and a full
/// element enumeration when the order is small enough.
#[derive(Debug, Clone)]
pub struct PermGroup {
    degree: usize,
    generators: Vec<Permutation>,
    elements: Option<Vec<Permutation>>,
    order: BigUint,
    /// Set when the group is exactly a direct product of full symmetric
    /// groups on these cells (every other point fixed).
    sym_cells: Option<Vec<Vec<usize>>>,
}

impl PermGroup {
    pub fn trivial(degree: usize) -> Self {
        PermGroup {
            degree,
            generators: Vec::new(),
            elements: Some(vec![Permutation::identity(degree)]),
            order: BigUint::from(1u32),
            sym_cells: None,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn generators(&self) -> &[Permutation] {
        &self.generators
    }

    /// Full element list in canonical (lexicographic image) order, when
    /// enumerated.
    pub fn elements(&self) -> Option<&[Permutation]> {
        self.elements.as_deref()
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    pub fn is_enumerated(&self) -> bool {
        self.elements.is_some()
    }

    fn from_parts(
        degree: usize,
        mut generators: Vec<Permutation>,
        elements: Option<Vec<Permutation>>,
        order: BigUint,
        sym_cells: Option<Vec<Vec<usize>>>,
    ) -> Self {
        generators.retain(|g| !g.is_identity());
        generators.sort();
        generators.dedup();
        let elements = elements.map(|mut e| {
            e.sort();
            e.dedup();
            e
        });
        if let Some(e) = &elements {
            debug_assert_eq!(BigUint::from(e.len()), order);
        }
        PermGroup {
            degree,
            generators,
            elements,
            order,
            sym_cells,
        }
    }
}

pub fn factorial(n: usize) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 2..=n {
        acc *= BigUint::from(i);
    }
    acc
}

// ---------------------------------------------------------------------------
// Partition refinement
// ---------------------------------------------------------------------------

/// Iterated signature refinement. Vertices are keyed by (position among the
/// fixed points if any, out-degree, in-degree, relation bits against each
/// fixed point), then repeatedly split by edge counts into the current cells
/// until stable. Cells are returned in signature order, members ascending.
///
/// Every automorphism that fixes `fixed` pointwise maps each cell to itself.
fn refine_cells(frame: &Frame, fixed: &[usize]) -> Vec<Vec<usize>> {
    let n = frame.world_count();
    let mut initial: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for v in 0..n {
        let mut key = Vec::with_capacity(3 + 2 * fixed.len());
        key.push(match fixed.iter().position(|&f| f == v) {
            Some(p) => p,
            None => usize::MAX,
        });
        key.push((0..n).filter(|&j| frame.related(v, j)).count());
        key.push((0..n).filter(|&j| frame.related(j, v)).count());
        for &f in fixed {
            key.push(frame.related(f, v) as usize);
            key.push(frame.related(v, f) as usize);
        }
        initial.entry(key).or_default().push(v);
    }
    let mut cells: Vec<Vec<usize>> = initial.into_values().collect();
    loop {
        let mut cell_of = vec![0usize; n];
        for (ci, cell) in cells.iter().enumerate() {
            for &v in cell {
                cell_of[v] = ci;
            }
        }
        let mut split: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let mut sig = Vec::with_capacity(1 + 2 * cells.len());
            sig.push(cell_of[v]);
            for cell in &cells {
                sig.push(cell.iter().filter(|&&u| frame.related(v, u)).count());
                sig.push(cell.iter().filter(|&&u| frame.related(u, v)).count());
            }
            split.entry(sig).or_default().push(v);
        }
        let next: Vec<Vec<usize>> = split.into_values().collect();
        if next.len() == cells.len() {
            return next;
        }
        cells = next;
    }
}

/// True iff swapping `u` and `v` (fixing everything else) preserves the
/// relation.
fn transposition_preserves(frame: &Frame, u: usize, v: usize) -> bool {
    if frame.related(u, u) != frame.related(v, v) || frame.related(u, v) != frame.related(v, u) {
        return false;
    }
    (0..frame.world_count()).all(|x| {
        x == u
            || x == v
            || (frame.related(u, x) == frame.related(v, x)
                && frame.related(x, u) == frame.related(x, v))
    })
}

fn cell_is_free(frame: &Frame, cell: &[usize]) -> bool {
    let c0 = cell[0];
    cell[1..]
        .iter()
        .all(|&v| transposition_preserves(frame, c0, v))
}

// ---------------------------------------------------------------------------
// Backtracking completion and the point-stabilizer chain
// ---------------------------------------------------------------------------

/// Finds any automorphism fixing `fixed` pointwise with `base -> target`,
/// or proves there is none. Candidate images stay within refinement cells;
/// a branch dies on the first relation violation against assigned pairs.
fn complete_automorphism(
    frame: &Frame,
    fixed: &[usize],
    cells: &[Vec<usize>],
    base: usize,
    target: usize,
) -> Option<Permutation> {
    let n = frame.world_count();
    let mut cell_of = vec![0usize; n];
    for (ci, cell) in cells.iter().enumerate() {
        for &v in cell {
            cell_of[v] = ci;
        }
    }
    let mut image: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    let mut assigned: Vec<usize> = Vec::with_capacity(n);

    fn consistent(
        frame: &Frame,
        image: &[Option<usize>],
        assigned: &[usize],
        u: usize,
        w: usize,
    ) -> bool {
        if frame.related(u, u) != frame.related(w, w) {
            return false;
        }
        for &x in assigned {
            let y = image[x].unwrap();
            if frame.related(u, x) != frame.related(w, y)
                || frame.related(x, u) != frame.related(y, w)
            {
                return false;
            }
        }
        true
    }

    for &f in fixed {
        image[f] = Some(f);
        used[f] = true;
        assigned.push(f);
    }
    if !consistent(frame, &image, &assigned, base, target) || used[target] {
        return None;
    }
    image[base] = Some(target);
    used[target] = true;
    assigned.push(base);

    fn backtrack(
        frame: &Frame,
        cells: &[Vec<usize>],
        cell_of: &[usize],
        image: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        assigned: &mut Vec<usize>,
    ) -> bool {
        let n = frame.world_count();
        let next = (0..n).find(|&u| image[u].is_none());
        let Some(u) = next else {
            return true;
        };
        for &w in &cells[cell_of[u]] {
            if used[w] || !consistent(frame, image, assigned, u, w) {
                continue;
            }
            image[u] = Some(w);
            used[w] = true;
            assigned.push(u);
            if backtrack(frame, cells, cell_of, image, used, assigned) {
                return true;
            }
            assigned.pop();
            used[w] = false;
            image[u] = None;
        }
        false
    }

    if backtrack(frame, cells, &cell_of, &mut image, &mut used, &mut assigned) {
        let images: Vec<usize> = image.into_iter().map(|o| o.unwrap()).collect();
        Some(Permutation::from_images(images).expect("search produced a bijection"))
    } else {
        None
    }
}

/// One level of a point-stabilizer chain: the base point and, per orbit
/// member, a representative mapping the base there. Sorted by target,
/// identity first.
struct ChainLevel {
    transversal: Vec<(usize, Permutation)>,
}

fn chain_search(frame: &Frame, init_fixed: &[usize]) -> (Vec<ChainLevel>, BigUint) {
    let n = frame.world_count();
    let mut fixed = init_fixed.to_vec();
    let mut levels = Vec::new();
    let mut order = BigUint::from(1u32);
    loop {
        let cells = refine_cells(frame, &fixed);
        let base = cells
            .iter()
            .filter(|c| c.len() > 1)
            .flat_map(|c| c.iter().copied())
            .min();
        let Some(base) = base else { break };
        let cell = cells
            .iter()
            .find(|c| c.contains(&base))
            .expect("base lies in a cell")
            .clone();
        let mut transversal = vec![(base, Permutation::identity(n))];
        for &v in cell.iter().filter(|&&v| v != base) {
            if let Some(g) = complete_automorphism(frame, &fixed, &cells, base, v) {
                transversal.push((v, g));
            }
        }
        order *= BigUint::from(transversal.len());
        if transversal.len() > 1 {
            levels.push(ChainLevel { transversal });
        }
        fixed.push(base);
    }
    (levels, order)
}

/// Expands a stabilizer chain into the full element list via the unique
/// factorization g = t_0 ∘ t_1 ∘ … with t_i from level i's transversal.
fn expand_chain(levels: &[ChainLevel], degree: usize) -> Vec<Permutation> {
    let mut elems = vec![Permutation::identity(degree)];
    for level in levels.iter().rev() {
        let mut next = Vec::with_capacity(elems.len() * level.transversal.len());
        for (_, t) in &level.transversal {
            for e in &elems {
                next.push(t.compose(e));
            }
        }
        elems = next;
    }
    elems
}

/// All permutations of `cell` (identity elsewhere), ascending lexicographic.
fn cell_permutations(cell: &[usize], degree: usize) -> Vec<Permutation> {
    fn rec(cell: &[usize], chosen: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if chosen.len() == cell.len() {
            out.push(chosen.clone());
            return;
        }
        for i in 0..cell.len() {
            if !used[i] {
                used[i] = true;
                chosen.push(cell[i]);
                rec(cell, chosen, used, out);
                chosen.pop();
                used[i] = false;
            }
        }
    }
    let mut orders = Vec::new();
    rec(
        cell,
        &mut Vec::with_capacity(cell.len()),
        &mut vec![false; cell.len()],
        &mut orders,
    );
    orders
        .into_iter()
        .map(|ord| {
            let mut images: Vec<usize> = (0..degree).collect();
            for (slot, &img) in cell.iter().zip(ord.iter()) {
                images[*slot] = img;
            }
            Permutation::from_images(images).expect("cell permutation is a bijection")
        })
        .collect()
}

fn product_of_sym_group(cells: &[Vec<usize>], degree: usize, bound: u64) -> PermGroup {
    let free_cells: Vec<Vec<usize>> = cells.iter().filter(|c| c.len() > 1).cloned().collect();
    let mut order = BigUint::from(1u32);
    let mut generators = Vec::new();
    for cell in &free_cells {
        order *= factorial(cell.len());
        for &v in &cell[1..] {
            generators.push(Permutation::transposition(degree, cell[0], v));
        }
    }
    let elements = if order <= BigUint::from(bound) {
        let mut elems = vec![Permutation::identity(degree)];
        for cell in &free_cells {
            let perms = cell_permutations(cell, degree);
            let mut next = Vec::with_capacity(elems.len() * perms.len());
            for p in &perms {
                for e in &elems {
                    next.push(p.compose(e));
                }
            }
            elems = next;
        }
        Some(elems)
    } else {
        None
    };
    PermGroup::from_parts(degree, generators, elements, order, Some(free_cells))
}

fn search_group(frame: &Frame, fixed: &[usize], bound: u64) -> PermGroup {
    let n = frame.world_count();
    let cells = refine_cells(frame, fixed);
    if cells
        .iter()
        .filter(|c| c.len() > 1)
        .all(|c| cell_is_free(frame, c))
    {
        return product_of_sym_group(&cells, n, bound);
    }
    let (levels, order) = chain_search(frame, fixed);
    let generators: Vec<Permutation> = levels
        .iter()
        .flat_map(|l| l.transversal.iter().map(|(_, g)| g.clone()))
        .collect();
    let elements = if order <= BigUint::from(bound) {
        Some(expand_chain(&levels, n))
    } else {
        None
    };
    PermGroup::from_parts(n, generators, elements, order, None)
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// The full automorphism group of the frame.
pub fn automorphism_group(frame: &Frame) -> PermGroup {
    automorphism_group_with_bound(frame, DEFAULT_ENUMERATION_BOUND)
}

pub fn automorphism_group_with_bound(frame: &Frame, bound: u64) -> PermGroup {
    search_group(frame, &[], bound)
}

/// The stabilizer of the designated world within the automorphism group.
pub fn stabilizer(frame: &Frame) -> PermGroup {
    stabilizer_with_bound(frame, DEFAULT_ENUMERATION_BOUND)
}

pub fn stabilizer_with_bound(frame: &Frame, bound: u64) -> PermGroup {
    let group = search_group(frame, &[frame.designated()], bound);
    // The stabilizer permutes the accessible cluster.
    let cluster = frame
        .accessible_cluster(frame.designated())
        .expect("designated index is in range");
    for g in group.generators() {
        for w in cluster.iter() {
            assert!(
                cluster.contains(g.apply(w)),
                "stabilizer generator must preserve the accessible cluster"
            );
        }
    }
    group
}

/// Partition of the orbit blocks of `on` under the group, blocks sorted by
/// smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrbitPartition {
    blocks: Vec<WorldSet>,
    block_of: BTreeMap<usize, usize>,
}

impl OrbitPartition {
    /// Builds a partition from explicit blocks: nonempty, pairwise disjoint,
    /// reordered by smallest member.
    pub fn from_blocks(blocks: Vec<WorldSet>) -> Result<OrbitPartition, GroupError> {
        let mut blocks: Vec<WorldSet> = blocks.into_iter().filter(|b| !b.is_empty()).collect();
        blocks.sort_by_key(|b| b.indices()[0]);
        let mut block_of = BTreeMap::new();
        for (id, block) in blocks.iter().enumerate() {
            for w in block.iter() {
                if block_of.insert(w, id).is_some() {
                    return Err(GroupError::OverlappingBlocks { point: w });
                }
            }
        }
        Ok(OrbitPartition { blocks, block_of })
    }

    pub fn blocks(&self) -> &[WorldSet] {
        &self.blocks
    }

    pub fn block_of(&self, world: usize) -> Option<usize> {
        self.block_of.get(&world).copied()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Orbits of `on` under the group: closure of each point under generator
/// images. Errors if a generator maps a member outside `on`.
pub fn orbit_partition(group: &PermGroup, on: &WorldSet) -> Result<OrbitPartition, GroupError> {
    for g in group.generators() {
        for p in on.iter() {
            let img = g.apply(p);
            if !on.contains(img) {
                return Err(GroupError::NotInvariant { point: p, image: img });
            }
        }
    }
    let mut block_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut blocks: Vec<WorldSet> = Vec::new();
    for seed in on.iter() {
        if block_of.contains_key(&seed) {
            continue;
        }
        let id = blocks.len();
        let mut members = vec![seed];
        let mut queue = VecDeque::from([seed]);
        block_of.insert(seed, id);
        while let Some(p) = queue.pop_front() {
            for g in group.generators() {
                let img = g.apply(p);
                if !block_of.contains_key(&img) {
                    block_of.insert(img, id);
                    members.push(img);
                    queue.push_back(img);
                }
            }
        }
        blocks.push(WorldSet::new(members));
    }
    Ok(OrbitPartition { blocks, block_of })
}

/// True iff the group acts with a single orbit on the cluster minus the
/// designated world.
pub fn is_point_homogeneous(
    group: &PermGroup,
    cluster: &WorldSet,
    designated: usize,
) -> Result<bool, GroupError> {
    let rest = cluster.without(designated);
    if rest.is_empty() {
        return Ok(true);
    }
    Ok(orbit_partition(group, &rest)?.len() == 1)
}

/// Image of the group under restriction to an invariant orbit, re-indexed to
/// `0..|orbit|`. Order comes from the parent enumeration when available,
/// from the product-of-symmetric-groups structure when the orbit is one of
/// its cells, and from a deterministic Schreier–Sims otherwise.
pub fn restrict(
    group: &PermGroup,
    orbit: &WorldSet,
    bound: u64,
) -> Result<PermGroup, GroupError> {
    let positions: BTreeMap<usize, usize> = orbit
        .indices()
        .iter()
        .enumerate()
        .map(|(i, &p)| (p, i))
        .collect();
    let m = orbit.len();
    let project = |g: &Permutation| -> Result<Permutation, GroupError> {
        let mut images = vec![0usize; m];
        for (&p, &i) in &positions {
            let img = g.apply(p);
            let Some(&j) = positions.get(&img) else {
                return Err(GroupError::NotInvariant { point: p, image: img });
            };
            images[i] = j;
        }
        Ok(Permutation::from_images(images).expect("projection of a bijection"))
    };
    for g in group.generators() {
        project(g)?;
    }

    if let Some(cells) = &group.sym_cells {
        if cells.iter().any(|c| c.as_slice() == orbit.indices()) {
            let cell: Vec<usize> = (0..m).collect();
            return Ok(product_of_sym_group(&[cell], m, bound));
        }
    }

    if let Some(elements) = group.elements() {
        let mut projected: Vec<Permutation> = elements
            .iter()
            .map(|g| project(g))
            .collect::<Result<_, _>>()?;
        projected.sort();
        projected.dedup();
        let order = BigUint::from(projected.len());
        let gens: Vec<Permutation> = group
            .generators()
            .iter()
            .map(|g| project(g))
            .collect::<Result<_, _>>()?;
        return Ok(PermGroup::from_parts(m, gens, Some(projected), order, None));
    }

    let gens: Vec<Permutation> = group
        .generators()
        .iter()
        .map(|g| project(g))
        .collect::<Result<_, _>>()?;
    let bsgs = Bsgs::from_generators(m, &gens);
    let order = bsgs.order();
    let elements = if order <= BigUint::from(bound) {
        Some(bsgs.elements())
    } else {
        None
    };
    Ok(PermGroup::from_parts(m, gens, elements, order, None))
}

/// Finite extension-property report for one orbit block: holds iff the
/// restricted group is the full symmetric group on the orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExtReport {
    pub orbit: usize,
    pub orbit_size: usize,
    pub restricted_order: String,
    pub holds: bool,
}

pub fn check_ext(
    group: &PermGroup,
    orbit: &WorldSet,
    block_index: usize,
) -> Result<ExtReport, GroupError> {
    let restricted = restrict(group, orbit, DEFAULT_ENUMERATION_BOUND)?;
    let target = factorial(orbit.len());
    Ok(ExtReport {
        orbit: block_index,
        orbit_size: orbit.len(),
        restricted_order: restricted.order().to_string(),
        holds: *restricted.order() == target,
    })
}

// ---------------------------------------------------------------------------
// Deterministic Schreier–Sims
// ---------------------------------------------------------------------------

struct BsgsLevel {
    base: usize,
    gens: Vec<Permutation>,
    transversal: BTreeMap<usize, Permutation>,
}

/// Base and strong generating set built incrementally with base points in
/// ascending order (each new base is the smallest point moved by the residue
/// that created the level).
pub struct Bsgs {
    degree: usize,
    levels: Vec<BsgsLevel>,
}

impl Bsgs {
    pub fn from_generators(degree: usize, gens: &[Permutation]) -> Bsgs {
        let mut bsgs = Bsgs {
            degree,
            levels: Vec::new(),
        };
        let mut queue: VecDeque<Permutation> = gens
            .iter()
            .filter(|g| !g.is_identity())
            .cloned()
            .collect();
        while let Some(g) = queue.pop_front() {
            bsgs.absorb(g, &mut queue);
        }
        bsgs
    }

    fn sift(&self, mut g: Permutation) -> (Permutation, usize) {
        for (i, level) in self.levels.iter().enumerate() {
            let target = g.apply(level.base);
            match level.transversal.get(&target) {
                Some(rep) => g = rep.inverse().compose(&g),
                None => return (g, i),
            }
        }
        (g, self.levels.len())
    }

    fn absorb(&mut self, g: Permutation, queue: &mut VecDeque<Permutation>) {
        let (residue, level) = self.sift(g);
        if residue.is_identity() {
            return;
        }
        if level == self.levels.len() {
            let base = (0..self.degree)
                .find(|&p| residue.apply(p) != p)
                .expect("non-identity residue moves a point");
            self.levels.push(BsgsLevel {
                base,
                gens: Vec::new(),
                transversal: BTreeMap::new(),
            });
        }
        self.levels[level].gens.push(residue);
        self.rebuild_transversal(level);
        // Re-queue this level's Schreier generators; most sift to identity.
        let lvl = &self.levels[level];
        for (&t, rep) in &lvl.transversal {
            for s in &lvl.gens {
                let image_rep = &lvl.transversal[&s.apply(t)];
                let schreier = image_rep.inverse().compose(&s.compose(rep));
                if !schreier.is_identity() {
                    queue.push_back(schreier);
                }
            }
        }
    }

    fn rebuild_transversal(&mut self, level: usize) {
        let base = self.levels[level].base;
        let gens = self.levels[level].gens.clone();
        let mut transversal = BTreeMap::new();
        transversal.insert(base, Permutation::identity(self.degree));
        let mut queue = VecDeque::from([base]);
        while let Some(p) = queue.pop_front() {
            for g in &gens {
                let img = g.apply(p);
                if !transversal.contains_key(&img) {
                    let rep = g.compose(&transversal[&p]);
                    transversal.insert(img, rep);
                    queue.push_back(img);
                }
            }
        }
        self.levels[level].transversal = transversal;
    }

    pub fn order(&self) -> BigUint {
        self.levels
            .iter()
            .map(|l| BigUint::from(l.transversal.len()))
            .fold(BigUint::from(1u32), |a, b| a * b)
    }

    pub fn elements(&self) -> Vec<Permutation> {
        let levels: Vec<ChainLevel> = self
            .levels
            .iter()
            .map(|l| ChainLevel {
                transversal: l
                    .transversal
                    .iter()
                    .map(|(&t, p)| (t, p.clone()))
                    .collect(),
            })
            .collect();
        expand_chain(&levels, self.degree)
    }
}
