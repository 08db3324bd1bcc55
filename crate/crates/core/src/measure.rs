//! Exact probability measures on the valuation space: group action,
//! symmetrization, invariance checking, ergodic decomposition, exact
//! hierarchical mixtures, and marginals.
//!
//! A valuation assigns each world a packed outcome (bit ℓ = truth of atom ℓ).
//! The canonical index of a valuation is world-major, atom-minor,
//! little-endian: index = Σ_w outcome(w) << (k·w). Everything downstream
//! (CSV files, reports, sampler datasets) uses this layout.

use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::group::{OrbitPartition, PermGroup};
use crate::perm::Permutation;
use crate::sampler::{Coupling, DirectingMeasure, HierarchicalSpec, OrbitPrior};

/// Comparison tolerance for exact-path checks.
pub const EXACT_TOL: f64 = 1e-12;

/// Hard cap on the valuation space: 2^26 states.
const MAX_SPACE_BITS: u32 = 26;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("valuation space needs {bits} bits, cap is {MAX_SPACE_BITS}")]
    SpaceTooLarge { bits: u32 },
    #[error("probability vector has length {got}, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("negative probability at index {index}")]
    NegativeEntry { index: usize },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("outcome at world {world} does not fit {atom_count} atoms")]
    OutcomeOutOfRange { world: usize, atom_count: usize },
    #[error("world index {index} out of range for {count} worlds")]
    WorldOutOfRange { index: usize, count: usize },
    #[error("atom names must be nonempty and unique")]
    BadAtoms,
    #[error("group is not enumerated; symmetrization needs the full element list")]
    GroupNotEnumerated,
    #[error("measure is not invariant (max deviation {max_deviation})")]
    NotInvariant { max_deviation: f64 },
    #[error("orbit through index {index} carries non-uniform mass")]
    NonUniformOrbit { index: usize },
    #[error("prior for block {block} has no finite atom list")]
    NonFinitePrior { block: usize },
    #[error("prior weights sum to {sum}, not 1")]
    BadWeights { sum: f64 },
    #[error("no prior given for orbit block {block}")]
    MissingPrior { block: usize },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Ordered list of atomic proposition names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AtomSet {
    names: Vec<String>,
}

impl AtomSet {
    pub fn new(names: Vec<String>) -> Result<AtomSet, MeasureError> {
        if names.is_empty() {
            return Err(MeasureError::BadAtoms);
        }
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() || names[..i].contains(n) {
                return Err(MeasureError::BadAtoms);
            }
        }
        Ok(AtomSet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Number of outcomes per world: 2^k.
    pub fn outcome_count(&self) -> usize {
        1usize << self.names.len()
    }
}

/// Size of the valuation space 2^(k·n), capped.
pub fn space_size(world_count: usize, atom_count: usize) -> Result<usize, MeasureError> {
    let bits = (world_count * atom_count) as u32;
    if bits > MAX_SPACE_BITS {
        return Err(MeasureError::SpaceTooLarge { bits });
    }
    Ok(1usize << bits)
}

/// One world-indexed assignment of packed outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Valuation {
    outcomes: Vec<usize>,
    atom_count: usize,
}

impl Valuation {
    pub fn new(outcomes: Vec<usize>, atom_count: usize) -> Result<Valuation, MeasureError> {
        let cap = 1usize << atom_count;
        for (w, &o) in outcomes.iter().enumerate() {
            if o >= cap {
                return Err(MeasureError::OutcomeOutOfRange { world: w, atom_count });
            }
        }
        Ok(Valuation { outcomes, atom_count })
    }

    pub fn from_index(index: usize, world_count: usize, atom_count: usize) -> Valuation {
        let mask = (1usize << atom_count) - 1;
        let outcomes = (0..world_count)
            .map(|w| (index >> (atom_count * w)) & mask)
            .collect();
        Valuation { outcomes, atom_count }
    }

    pub fn world_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn outcome(&self, world: usize) -> usize {
        self.outcomes[world]
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn atom_true(&self, world: usize, atom: usize) -> bool {
        (self.outcomes[world] >> atom) & 1 == 1
    }

    /// Canonical index: world-major, atom-minor, little-endian.
    pub fn index(&self) -> usize {
        self.outcomes
            .iter()
            .enumerate()
            .fold(0, |acc, (w, &o)| acc | (o << (self.atom_count * w)))
    }
}

/// (π·V)(w) = V(π⁻¹(w)): the outcome at world u lands at world π(u).
pub fn act(perm: &Permutation, v: &Valuation) -> Result<Valuation, MeasureError> {
    if perm.degree() != v.world_count() {
        return Err(MeasureError::DegreeMismatch {
            expected: v.world_count(),
            got: perm.degree(),
        });
    }
    let mut outcomes = vec![0usize; v.world_count()];
    for u in 0..v.world_count() {
        outcomes[perm.apply(u)] = v.outcome(u);
    }
    Ok(Valuation {
        outcomes,
        atom_count: v.atom_count,
    })
}

/// Index-level action, avoiding Valuation allocation in hot loops.
pub fn act_index(perm: &Permutation, index: usize, atom_count: usize) -> usize {
    let mask = (1usize << atom_count) - 1;
    let mut out = 0usize;
    for u in 0..perm.degree() {
        let bits = (index >> (atom_count * u)) & mask;
        out |= bits << (atom_count * perm.apply(u));
    }
    out
}

fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// A probability distribution over the valuation space, stored densely in
/// canonical index order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMeasure {
    world_count: usize,
    atom_count: usize,
    p: Vec<f64>,
}

impl ExactMeasure {
    pub fn new(
        world_count: usize,
        atom_count: usize,
        p: Vec<f64>,
    ) -> Result<ExactMeasure, MeasureError> {
        let size = space_size(world_count, atom_count)?;
        if p.len() != size {
            return Err(MeasureError::BadLength {
                expected: size,
                got: p.len(),
            });
        }
        if let Some(i) = p.iter().position(|&x| x < 0.0 || !x.is_finite()) {
            return Err(MeasureError::NegativeEntry { index: i });
        }
        let sum = kahan_sum(p.iter().copied());
        if (sum - 1.0).abs() > EXACT_TOL {
            return Err(MeasureError::NotNormalized { sum });
        }
        Ok(ExactMeasure {
            world_count,
            atom_count,
            p,
        })
    }

    pub fn uniform(world_count: usize, atom_count: usize) -> Result<ExactMeasure, MeasureError> {
        let size = space_size(world_count, atom_count)?;
        Ok(ExactMeasure {
            world_count,
            atom_count,
            p: vec![1.0 / size as f64; size],
        })
    }

    pub fn point(
        world_count: usize,
        atom_count: usize,
        index: usize,
    ) -> Result<ExactMeasure, MeasureError> {
        let size = space_size(world_count, atom_count)?;
        if index >= size {
            return Err(MeasureError::BadLength {
                expected: size,
                got: index,
            });
        }
        let mut p = vec![0.0; size];
        p[index] = 1.0;
        Ok(ExactMeasure {
            world_count,
            atom_count,
            p,
        })
    }

    pub fn world_count(&self) -> usize {
        self.world_count
    }

    pub fn atom_count(&self) -> usize {
        self.atom_count
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, index: usize) -> f64 {
        self.p[index]
    }

    pub fn fingerprint(&self) -> String {
        let mut bytes = Vec::with_capacity(self.p.len() * 8 + 16);
        bytes.extend_from_slice(&(self.world_count as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.atom_count as u64).to_le_bytes());
        for x in &self.p {
            bytes.extend_from_slice(&x.to_bits().to_le_bytes());
        }
        crate::fingerprint_bytes(&bytes)
    }
}

/// q(act(π,v)) = p(v): relabels mass along the action, preserving it exactly.
pub fn pushforward(
    p: &ExactMeasure,
    perm: &Permutation,
) -> Result<ExactMeasure, MeasureError> {
    if perm.degree() != p.world_count {
        return Err(MeasureError::DegreeMismatch {
            expected: p.world_count,
            got: perm.degree(),
        });
    }
    let mut q = vec![0.0; p.p.len()];
    for v in 0..p.p.len() {
        q[act_index(perm, v, p.atom_count)] = p.p[v];
    }
    Ok(ExactMeasure {
        world_count: p.world_count,
        atom_count: p.atom_count,
        p: q,
    })
}

/// One output entry of the group average. Element order is the group's
/// canonical enumeration order, so parallel and sequential paths produce
/// bit-identical results.
fn symmetrized_entry(p: &[f64], inverses: &[Permutation], atom_count: usize, j: usize) -> f64 {
    let scale = 1.0 / inverses.len() as f64;
    let mut sum = 0.0;
    for inv in inverses {
        sum += p[act_index(inv, j, atom_count)];
    }
    sum * scale
}

fn symmetrize_with(
    p: &ExactMeasure,
    g: &PermGroup,
    parallel: bool,
) -> Result<ExactMeasure, MeasureError> {
    if g.degree() != p.world_count {
        return Err(MeasureError::DegreeMismatch {
            expected: p.world_count,
            got: g.degree(),
        });
    }
    let elements = g.elements().ok_or(MeasureError::GroupNotEnumerated)?;
    let inverses: Vec<Permutation> = elements.iter().map(|e| e.inverse()).collect();
    let len = p.p.len();
    let q: Vec<f64>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        q = if parallel {
            (0..len)
                .into_par_iter()
                .map(|j| symmetrized_entry(&p.p, &inverses, p.atom_count, j))
                .collect()
        } else {
            (0..len)
                .map(|j| symmetrized_entry(&p.p, &inverses, p.atom_count, j))
                .collect()
        };
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = parallel;
        q = (0..len)
            .map(|j| symmetrized_entry(&p.p, &inverses, p.atom_count, j))
            .collect();
    }
    Ok(ExactMeasure {
        world_count: p.world_count,
        atom_count: p.atom_count,
        p: q,
    })
}

/// Group average (1/|G|) Σ_π pushforward(p, π). Output is G-invariant and
/// the map is idempotent. Requires the group to be enumerated.
pub fn symmetrize(p: &ExactMeasure, g: &PermGroup) -> Result<ExactMeasure, MeasureError> {
    symmetrize_with(p, g, true)
}

/// Sequential reference path; output is bit-identical to `symmetrize`.
pub fn symmetrize_seq(p: &ExactMeasure, g: &PermGroup) -> Result<ExactMeasure, MeasureError> {
    symmetrize_with(p, g, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceCheck {
    pub invariant: bool,
    pub max_deviation: f64,
    pub tolerance: f64,
}

/// Max over generators π and indices v of |p(v) − p(π·v)|. Invariance under
/// generators extends to the whole group.
pub fn check_invariance_exact(p: &ExactMeasure, g: &PermGroup, tol: f64) -> InvarianceCheck {
    let mut max_dev = 0.0f64;
    for gen in g.generators() {
        for v in 0..p.p.len() {
            let dev = (p.p[v] - p.p[act_index(gen, v, p.atom_count)]).abs();
            max_dev = max_dev.max(dev);
        }
    }
    InvarianceCheck {
        invariant: max_dev <= tol,
        max_deviation: max_dev,
        tolerance: tol,
    }
}

/// One ergodic component: a single Ω-orbit with its mass. The component
/// measure is uniform on the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicComponent {
    pub weight: f64,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicDecomposition {
    world_count: usize,
    atom_count: usize,
    components: Vec<ErgodicComponent>,
}

impl ErgodicDecomposition {
    pub fn components(&self) -> &[ErgodicComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Σ weight · uniform(support).
    pub fn reconstruct(&self) -> ExactMeasure {
        let size = 1usize << (self.world_count * self.atom_count);
        let mut p = vec![0.0; size];
        for c in &self.components {
            let share = c.weight / c.support.len() as f64;
            for &v in &c.support {
                p[v] = share;
            }
        }
        ExactMeasure {
            world_count: self.world_count,
            atom_count: self.atom_count,
            p,
        }
    }
}

/// Splits an invariant measure into uniform measures on the Ω-orbits that
/// carry mass. The component index is the finite latent: conditioning on it
/// yields an ergodic (single-orbit) invariant law.
pub fn ergodic_decompose(
    p: &ExactMeasure,
    g: &PermGroup,
) -> Result<ErgodicDecomposition, MeasureError> {
    if g.degree() != p.world_count {
        return Err(MeasureError::DegreeMismatch {
            expected: p.world_count,
            got: g.degree(),
        });
    }
    let check = check_invariance_exact(p, g, EXACT_TOL);
    if !check.invariant {
        return Err(MeasureError::NotInvariant {
            max_deviation: check.max_deviation,
        });
    }
    let len = p.p.len();
    let mut seen = vec![false; len];
    let mut components = Vec::new();
    for seed in 0..len {
        if seen[seed] || p.p[seed] == 0.0 {
            continue;
        }
        let mut orbit = vec![seed];
        seen[seed] = true;
        let mut cursor = 0;
        while cursor < orbit.len() {
            let v = orbit[cursor];
            cursor += 1;
            for gen in g.generators() {
                let img = act_index(gen, v, p.atom_count);
                if !seen[img] {
                    seen[img] = true;
                    orbit.push(img);
                }
            }
        }
        orbit.sort_unstable();
        let base = p.p[orbit[0]];
        if orbit.iter().any(|&v| (p.p[v] - base).abs() > EXACT_TOL) {
            return Err(MeasureError::NonUniformOrbit { index: orbit[0] });
        }
        let weight = kahan_sum(orbit.iter().map(|&v| p.p[v]));
        components.push(ErgodicComponent {
            weight,
            support: orbit,
        });
    }
    Ok(ErgodicDecomposition {
        world_count: p.world_count,
        atom_count: p.atom_count,
        components,
    })
}

/// Outcome law of a directing measure as a dense vector over 2^k outcomes.
pub fn outcome_law(dm: &DirectingMeasure, atom_count: usize) -> Result<Vec<f64>, MeasureError> {
    let size = 1usize << atom_count;
    match dm {
        DirectingMeasure::Full(p) => {
            if p.len() != size {
                return Err(MeasureError::BadLength {
                    expected: size,
                    got: p.len(),
                });
            }
            Ok(p.clone())
        }
        DirectingMeasure::BernoulliProduct(theta) => {
            if theta.len() != atom_count {
                return Err(MeasureError::BadLength {
                    expected: atom_count,
                    got: theta.len(),
                });
            }
            let mut law = vec![0.0; size];
            for (o, slot) in law.iter_mut().enumerate() {
                let mut prob = 1.0;
                for (l, &t) in theta.iter().enumerate() {
                    prob *= if (o >> l) & 1 == 1 { t } else { 1.0 - t };
                }
                *slot = prob;
            }
            Ok(law)
        }
    }
}

/// Finite atoms of a prior: list of (weight, directing measure). Errors for
/// kinds without a finite support.
fn finite_atoms(
    prior: &OrbitPrior,
    block: usize,
) -> Result<Vec<(f64, DirectingMeasure)>, MeasureError> {
    match prior {
        OrbitPrior::Point(dm) => Ok(vec![(1.0, dm.clone())]),
        OrbitPrior::FiniteMixture(atoms) => {
            let sum = kahan_sum(atoms.iter().map(|(w, _)| *w));
            if (sum - 1.0).abs() > 1e-9 {
                return Err(MeasureError::BadWeights { sum });
            }
            Ok(atoms.clone())
        }
        OrbitPrior::BetaPerAtom(_) | OrbitPrior::Dirichlet(_) => {
            Err(MeasureError::NonFinitePrior { block })
        }
    }
}

/// Joint prior atoms: weight plus one directing measure per block, expanded
/// per the coupling mode.
fn joint_atoms(
    spec: &HierarchicalSpec,
    block_count: usize,
) -> Result<Vec<(f64, Vec<DirectingMeasure>)>, MeasureError> {
    for b in 0..block_count {
        if spec.prior(b).is_none() {
            return Err(MeasureError::MissingPrior { block: b });
        }
    }
    match spec.coupling() {
        Coupling::Independent => {
            let per_block: Vec<Vec<(f64, DirectingMeasure)>> = (0..block_count)
                .map(|b| finite_atoms(spec.prior(b).unwrap(), b))
                .collect::<Result<_, _>>()?;
            let mut joint = vec![(1.0, Vec::new())];
            for atoms in &per_block {
                let mut next = Vec::with_capacity(joint.len() * atoms.len());
                for (w, dms) in &joint {
                    for (aw, adm) in atoms {
                        let mut dms = dms.clone();
                        dms.push(adm.clone());
                        next.push((w * aw, dms));
                    }
                }
                joint = next;
            }
            Ok(joint)
        }
        Coupling::Shared => {
            if block_count == 0 {
                return Ok(vec![(1.0, Vec::new())]);
            }
            let atoms = finite_atoms(spec.prior(0).unwrap(), 0)?;
            Ok(atoms
                .into_iter()
                .map(|(w, dm)| (w, vec![dm; block_count]))
                .collect())
        }
        Coupling::ListedJoint(atoms) => {
            let sum = kahan_sum(atoms.iter().map(|(w, _)| *w));
            if (sum - 1.0).abs() > 1e-9 {
                return Err(MeasureError::BadWeights { sum });
            }
            for (_, dms) in atoms {
                if dms.len() != block_count {
                    return Err(MeasureError::BadLength {
                        expected: block_count,
                        got: dms.len(),
                    });
                }
            }
            Ok(atoms.clone())
        }
    }
}

/// Exact law of the hierarchical construction with finitely supported
/// priors: P(v) = Σ_atoms weight · Π_w law_w(outcome of v at w). Worlds
/// outside every block follow the designated-world law.
pub fn exact_hier_measure(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
) -> Result<ExactMeasure, MeasureError> {
    let k = spec.atoms().len();
    let size = space_size(world_count, k)?;
    let block_count = partition.blocks().len();
    let atoms = joint_atoms(spec, block_count)?;
    let designated_law = outcome_law(spec.designated_law(), k)?;

    let mut p = vec![0.0; size];
    let mask = (1usize << k) - 1;
    for (weight, dms) in &atoms {
        let mut laws: Vec<&[f64]> = Vec::with_capacity(world_count);
        let block_laws: Vec<Vec<f64>> = dms
            .iter()
            .map(|dm| outcome_law(dm, k))
            .collect::<Result<_, _>>()?;
        for w in 0..world_count {
            match partition.block_of(w) {
                Some(b) => laws.push(&block_laws[b]),
                None => laws.push(&designated_law),
            }
        }
        for (v, slot) in p.iter_mut().enumerate() {
            let mut prob = *weight;
            for (w, law) in laws.iter().enumerate() {
                prob *= law[(v >> (k * w)) & mask];
            }
            *slot += prob;
        }
    }
    ExactMeasure::new(world_count, k, p)
}

/// Outcome distribution at one world: sums p over all valuations with a
/// fixed outcome there.
pub fn marginal(p: &ExactMeasure, world: usize) -> Result<Vec<f64>, MeasureError> {
    if world >= p.world_count {
        return Err(MeasureError::WorldOutOfRange {
            index: world,
            count: p.world_count,
        });
    }
    let k = p.atom_count;
    let mask = (1usize << k) - 1;
    let mut out = vec![0.0; 1 << k];
    for (v, &mass) in p.p.iter().enumerate() {
        out[(v >> (k * world)) & mask] += mass;
    }
    Ok(out)
}

/// Joint outcome distribution at an ordered tuple of worlds, packed
/// position-major in tuple order.
pub fn joint_distribution(p: &ExactMeasure, worlds: &[usize]) -> Result<Vec<f64>, MeasureError> {
    for &w in worlds {
        if w >= p.world_count {
            return Err(MeasureError::WorldOutOfRange {
                index: w,
                count: p.world_count,
            });
        }
    }
    let k = p.atom_count;
    let mask = (1usize << k) - 1;
    let mut out = vec![0.0; 1usize << (k * worlds.len())];
    for (v, &mass) in p.p.iter().enumerate() {
        let mut idx = 0usize;
        for (pos, &w) in worlds.iter().enumerate() {
            idx |= ((v >> (k * w)) & mask) << (k * pos);
        }
        out[idx] += mass;
    }
    Ok(out)
}

/// Largest entrywise gap between within-block marginals: zero (up to fp)
/// for any invariant measure.
pub fn max_rigidity_deviation(
    p: &ExactMeasure,
    partition: &OrbitPartition,
) -> Result<f64, MeasureError> {
    let mut max_dev = 0.0f64;
    for block in partition.blocks() {
        let worlds = block.indices();
        if worlds.len() < 2 {
            continue;
        }
        let first = marginal(p, worlds[0])?;
        for &w in &worlds[1..] {
            let m = marginal(p, w)?;
            for (a, b) in first.iter().zip(&m) {
                max_dev = max_dev.max((a - b).abs());
            }
        }
    }
    Ok(max_dev)
}

fn tuple_permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in 0..m {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(m, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(m, &mut Vec::new(), &mut vec![false; m], &mut out);
    out
}

fn combinations(items: &[usize], m: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], m: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, m, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, m, 0, &mut Vec::new(), &mut out);
    out
}

/// Largest deviation from permutation invariance of m-tuple joints within
/// the orbit: zero (up to fp) when the restricted action is fully symmetric.
pub fn max_exchangeability_deviation(
    p: &ExactMeasure,
    orbit: &[usize],
    m: usize,
) -> Result<f64, MeasureError> {
    let k = p.atom_count;
    let mask = (1usize << k) - 1;
    let perms = tuple_permutations(m);
    let mut max_dev = 0.0f64;
    for subset in combinations(orbit, m) {
        let joint = joint_distribution(p, &subset)?;
        for sigma in &perms {
            for (idx, &mass) in joint.iter().enumerate() {
                let mut permuted = 0usize;
                for pos in 0..m {
                    let o = (idx >> (k * pos)) & mask;
                    permuted |= o << (k * sigma[pos]);
                }
                max_dev = max_dev.max((mass - joint[permuted]).abs());
            }
        }
    }
    Ok(max_dev)
}

/// Writes `valuation_index,probability` rows for the full dense vector.
/// Float formatting is shortest-round-trip, so files are byte-stable.
pub fn write_measure_csv<W: Write>(p: &ExactMeasure, out: &mut W) -> io::Result<()> {
    writeln!(out, "valuation_index,probability")?;
    for (v, &mass) in p.p.iter().enumerate() {
        writeln!(out, "{v},{mass}")?;
    }
    Ok(())
}

/// Reads a measure CSV. Missing indices default to zero; `#` lines are
/// comments.
pub fn read_measure_csv<R: BufRead>(
    input: R,
    world_count: usize,
    atom_count: usize,
) -> Result<ExactMeasure, MeasureError> {
    let size = space_size(world_count, atom_count)?;
    let mut p = vec![0.0; size];
    let mut saw_header = false;
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| MeasureError::Parse {
            line: lineno + 1,
            reason: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "valuation_index,probability" {
                return Err(MeasureError::Parse {
                    line: lineno + 1,
                    reason: "expected header `valuation_index,probability`".into(),
                });
            }
            saw_header = true;
            continue;
        }
        let (idx, prob) = line.split_once(',').ok_or_else(|| MeasureError::Parse {
            line: lineno + 1,
            reason: "expected `index,probability`".into(),
        })?;
        let idx: usize = idx.trim().parse().map_err(|_| MeasureError::Parse {
            line: lineno + 1,
            reason: format!("bad index `{idx}`"),
        })?;
        if idx >= size {
            return Err(MeasureError::Parse {
                line: lineno + 1,
                reason: format!("index {idx} out of range for space of {size}"),
            });
        }
        let prob: f64 = prob.trim().parse().map_err(|_| MeasureError::Parse {
            line: lineno + 1,
            reason: format!("bad probability `{prob}`"),
        })?;
        p[idx] = prob;
    }
    if !saw_header {
        return Err(MeasureError::Parse {
            line: 1,
            reason: "missing header".into(),
        });
    }
    ExactMeasure::new(world_count, atom_count, p)
}
