//! Seeded sampling from the two-stage construction: draw a directing
//! measure per orbit from its prior (with selectable cross-orbit coupling),
//! then fill each orbit's worlds i.i.d. from its draw.
//!
//! Randomness is counter-based: a root seed plus (replicate, kind, index)
//! derive an independent stream per replicate and lane, so replicates can be
//! generated on any number of workers in any order and the output bytes
//! never change.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;
use serde::Serialize;
use thiserror::Error;

use crate::group::OrbitPartition;
use crate::measure::{AtomSet, Valuation};

/// Tolerance for user-supplied weights and probability vectors.
pub const WEIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("block {block}: {reason}")]
    BadPrior { block: usize, reason: String },
    #[error("designated law: {0}")]
    BadDesignated(String),
    #[error("{0}")]
    BadSpec(String),
    #[error("expected {expected} latents, got {got}")]
    WrongLatentCount { expected: usize, got: usize },
    #[error("replicate count must be at least 1")]
    BadCount,
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Outcome law for one orbit: either a dense vector over the 2^k outcomes
/// or an independent-atom Bernoulli product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum DirectingMeasure {
    Full(Vec<f64>),
    BernoulliProduct(Vec<f64>),
}

impl DirectingMeasure {
    pub fn validate(&self, atom_count: usize) -> Result<(), String> {
        match self {
            DirectingMeasure::Full(p) => {
                if p.len() != (1usize << atom_count) {
                    return Err(format!(
                        "full law needs {} entries, got {}",
                        1usize << atom_count,
                        p.len()
                    ));
                }
                if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    return Err("full law entries must be nonnegative".into());
                }
                let sum: f64 = p.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_TOL {
                    return Err(format!("full law sums to {sum}, not 1"));
                }
            }
            DirectingMeasure::BernoulliProduct(theta) => {
                if theta.len() != atom_count {
                    return Err(format!(
                        "theta needs {atom_count} entries, got {}",
                        theta.len()
                    ));
                }
                if theta.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                    return Err("theta entries must lie in [0,1]".into());
                }
            }
        }
        Ok(())
    }

    /// Compact text form used in dataset CSV cells and spec files.
    pub fn to_compact(&self) -> String {
        match self {
            DirectingMeasure::Full(p) => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                format!("full:{}", parts.join("|"))
            }
            DirectingMeasure::BernoulliProduct(t) => {
                let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                format!("theta:{}", parts.join("|"))
            }
        }
    }

    pub fn from_compact(s: &str) -> Result<DirectingMeasure, String> {
        let (tag, body) = s
            .split_once(':')
            .ok_or_else(|| format!("bad directing measure `{s}`"))?;
        let values: Vec<f64> = body
            .split('|')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}`")))
            .collect::<Result<_, _>>()?;
        match tag.trim() {
            "full" => Ok(DirectingMeasure::Full(values)),
            "theta" => Ok(DirectingMeasure::BernoulliProduct(values)),
            other => Err(format!("unknown directing measure form `{other}`")),
        }
    }
}

/// Prior over directing measures for one orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OrbitPrior {
    Point(DirectingMeasure),
    FiniteMixture(Vec<(f64, DirectingMeasure)>),
    /// One (a, b) shape pair per atom; draws are Bernoulli products.
    BetaPerAtom(Vec<(f64, f64)>),
    /// Concentration vector over the 2^k outcomes; draws are full laws.
    Dirichlet(Vec<f64>),
}

impl OrbitPrior {
    fn validate(&self, atom_count: usize) -> Result<(), String> {
        match self {
            OrbitPrior::Point(dm) => dm.validate(atom_count),
            OrbitPrior::FiniteMixture(atoms) => {
                if atoms.is_empty() {
                    return Err("mixture needs at least one atom".into());
                }
                let sum: f64 = atoms.iter().map(|(w, _)| *w).sum();
                if (sum - 1.0).abs() > WEIGHT_TOL {
                    return Err(format!("mixture weights sum to {sum}, not 1"));
                }
                for (w, dm) in atoms {
                    if *w < 0.0 {
                        return Err("mixture weights must be nonnegative".into());
                    }
                    dm.validate(atom_count)?;
                }
                Ok(())
            }
            OrbitPrior::BetaPerAtom(shapes) => {
                if shapes.len() != atom_count {
                    return Err(format!(
                        "beta prior needs {atom_count} shape pairs, got {}",
                        shapes.len()
                    ));
                }
                if shapes.iter().any(|&(a, b)| a <= 0.0 || b <= 0.0) {
                    return Err("beta shapes must be positive".into());
                }
                Ok(())
            }
            OrbitPrior::Dirichlet(conc) => {
                if conc.len() != (1usize << atom_count) {
                    return Err(format!(
                        "dirichlet prior needs {} concentrations, got {}",
                        1usize << atom_count,
                        conc.len()
                    ));
                }
                if conc.iter().any(|&c| c <= 0.0) {
                    return Err("dirichlet concentrations must be positive".into());
                }
                Ok(())
            }
        }
    }
}

/// Joint law of the per-orbit draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Coupling {
    /// Disjoint sub-streams per orbit.
    Independent,
    /// One draw, reused for every orbit. Requires identical priors.
    Shared,
    /// Explicit finite list of (weight, one directing measure per block).
    ListedJoint(Vec<(f64, Vec<DirectingMeasure>)>),
}

/// Full sampling specification: atoms, per-block priors, the law of the
/// designated world (and any world outside every block), and the coupling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchicalSpec {
    atoms: AtomSet,
    priors: Vec<OrbitPrior>,
    designated: DirectingMeasure,
    coupling: Coupling,
}

impl HierarchicalSpec {
    pub fn new(
        atoms: AtomSet,
        priors: Vec<OrbitPrior>,
        designated: DirectingMeasure,
        coupling: Coupling,
    ) -> Result<HierarchicalSpec, SamplerError> {
        let k = atoms.len();
        designated.validate(k).map_err(SamplerError::BadDesignated)?;
        for (b, prior) in priors.iter().enumerate() {
            prior
                .validate(k)
                .map_err(|reason| SamplerError::BadPrior { block: b, reason })?;
        }
        let priors = match &coupling {
            Coupling::Independent => priors,
            Coupling::Shared => {
                if priors.is_empty() {
                    return Err(SamplerError::BadSpec(
                        "shared coupling needs at least one orbit prior".into(),
                    ));
                }
                if priors.iter().any(|p| p != &priors[0]) {
                    return Err(SamplerError::BadSpec(
                        "shared coupling requires identical priors across orbits".into(),
                    ));
                }
                priors
            }
            Coupling::ListedJoint(atoms_list) => {
                if atoms_list.is_empty() {
                    return Err(SamplerError::BadSpec("joint coupling needs atoms".into()));
                }
                let width = atoms_list[0].1.len();
                if width == 0 {
                    return Err(SamplerError::BadSpec(
                        "joint atoms need at least one orbit".into(),
                    ));
                }
                let sum: f64 = atoms_list.iter().map(|(w, _)| *w).sum();
                if (sum - 1.0).abs() > WEIGHT_TOL {
                    return Err(SamplerError::BadSpec(format!(
                        "joint weights sum to {sum}, not 1"
                    )));
                }
                for (w, dms) in atoms_list {
                    if *w < 0.0 {
                        return Err(SamplerError::BadSpec(
                            "joint weights must be nonnegative".into(),
                        ));
                    }
                    if dms.len() != width {
                        return Err(SamplerError::BadSpec(
                            "joint atoms must list the same orbits".into(),
                        ));
                    }
                    for (b, dm) in dms.iter().enumerate() {
                        dm.validate(k)
                            .map_err(|reason| SamplerError::BadPrior { block: b, reason })?;
                    }
                }
                if priors.is_empty() {
                    // Derive per-orbit priors as the joint's marginals so
                    // every block carries one.
                    (0..width)
                        .map(|b| {
                            OrbitPrior::FiniteMixture(
                                atoms_list.iter().map(|(w, dms)| (*w, dms[b].clone())).collect(),
                            )
                        })
                        .collect()
                } else {
                    if priors.len() != width {
                        return Err(SamplerError::BadSpec(format!(
                            "joint atoms cover {width} orbits but {} priors given",
                            priors.len()
                        )));
                    }
                    priors
                }
            }
        };
        Ok(HierarchicalSpec {
            atoms,
            priors,
            designated,
            coupling,
        })
    }

    pub fn atoms(&self) -> &AtomSet {
        &self.atoms
    }

    pub fn block_count(&self) -> usize {
        self.priors.len()
    }

    pub fn prior(&self, block: usize) -> Option<&OrbitPrior> {
        self.priors.get(block)
    }

    pub fn designated_law(&self) -> &DirectingMeasure {
        &self.designated
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_bytes(self.to_cfg().as_bytes())
    }

    /// Canonical text form; `parse_spec` inverts it.
    pub fn to_cfg(&self) -> String {
        let mut out = String::new();
        out.push_str("atoms = ");
        out.push_str(&self.atoms.names().join(" "));
        out.push('\n');
        for (b, prior) in self.priors.iter().enumerate() {
            out.push_str(&format!("orbit {b}: prior = {}\n", prior_to_text(prior)));
        }
        match &self.coupling {
            Coupling::Independent => out.push_str("coupling = independent\n"),
            Coupling::Shared => out.push_str("coupling = shared\n"),
            Coupling::ListedJoint(atoms) => {
                out.push_str("coupling = joint\n");
                for (w, dms) in atoms {
                    let parts: Vec<String> = dms.iter().map(|d| d.to_compact()).collect();
                    out.push_str(&format!("joint: {w} @ {}\n", parts.join(" / ")));
                }
            }
        }
        out.push_str(&format!("designated = point({})\n", self.designated.to_compact()));
        out
    }
}

fn prior_to_text(prior: &OrbitPrior) -> String {
    match prior {
        OrbitPrior::Point(dm) => format!("point({})", dm.to_compact()),
        OrbitPrior::FiniteMixture(atoms) => {
            let parts: Vec<String> = atoms
                .iter()
                .map(|(w, dm)| format!("{w} @ {}", dm.to_compact()))
                .collect();
            format!("mixture({})", parts.join("; "))
        }
        OrbitPrior::BetaPerAtom(shapes) => {
            let parts: Vec<String> = shapes.iter().map(|(a, b)| format!("{a}, {b}")).collect();
            format!("beta({})", parts.join("; "))
        }
        OrbitPrior::Dirichlet(conc) => {
            let parts: Vec<String> = conc.iter().map(|c| c.to_string()).collect();
            format!("dirichlet({})", parts.join(", "))
        }
    }
}

fn parse_paren(s: &str, head: &str) -> Option<String> {
    let s = s.trim();
    let rest = s.strip_prefix(head)?.trim();
    let rest = rest.strip_prefix('(')?;
    let rest = rest.strip_suffix(')')?;
    Some(rest.trim().to_string())
}

fn parse_prior_text(s: &str) -> Result<OrbitPrior, String> {
    let s = s.trim();
    if let Some(body) = parse_paren(s, "point") {
        return Ok(OrbitPrior::Point(DirectingMeasure::from_compact(&body)?));
    }
    if let Some(body) = parse_paren(s, "mixture") {
        let mut atoms = Vec::new();
        for part in body.split(';') {
            let (w, dm) = part
                .split_once('@')
                .ok_or_else(|| format!("mixture atom `{part}` needs `weight @ law`"))?;
            let w: f64 = w.trim().parse().map_err(|_| format!("bad weight `{w}`"))?;
            atoms.push((w, DirectingMeasure::from_compact(dm.trim())?));
        }
        return Ok(OrbitPrior::FiniteMixture(atoms));
    }
    if let Some(body) = parse_paren(s, "beta") {
        let mut shapes = Vec::new();
        for pair in body.split(';') {
            let (a, b) = pair
                .split_once(',')
                .ok_or_else(|| format!("beta shapes `{pair}` need `a, b`"))?;
            let a: f64 = a.trim().parse().map_err(|_| format!("bad shape `{a}`"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad shape `{b}`"))?;
            shapes.push((a, b));
        }
        return Ok(OrbitPrior::BetaPerAtom(shapes));
    }
    if let Some(body) = parse_paren(s, "dirichlet") {
        let conc: Vec<f64> = body
            .split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| format!("bad concentration `{c}`")))
            .collect::<Result<_, _>>()?;
        return Ok(OrbitPrior::Dirichlet(conc));
    }
    Err(format!("unknown prior `{s}`"))
}

/// Parses the spec file format written by `to_cfg`:
///
/// ```text
/// atoms = p q
/// orbit 0: prior = mixture(0.5 @ theta:0.2|0.5; 0.5 @ theta:0.8|0.5)
/// coupling = independent
/// designated = point(theta:0.5|0.5)
/// ```
///
/// `coupling` defaults to independent. Under `coupling = joint`, `joint:`
/// lines list the atoms and per-orbit `orbit` lines may be omitted.
pub fn parse_spec(text: &str) -> Result<HierarchicalSpec, SamplerError> {
    let mut atoms: Option<AtomSet> = None;
    let mut priors: BTreeMap<usize, OrbitPrior> = BTreeMap::new();
    let mut designated: Option<DirectingMeasure> = None;
    let mut coupling_word: Option<String> = None;
    let mut joint_atoms: Vec<(f64, Vec<DirectingMeasure>)> = Vec::new();

    let err = |line: usize, reason: String| SamplerError::Parse { line, reason };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("atoms") {
            let rest = rest
                .trim()
                .strip_prefix('=')
                .ok_or_else(|| err(lineno, "expected `atoms = ...`".into()))?;
            let names: Vec<String> = rest.split_whitespace().map(|s| s.to_string()).collect();
            atoms = Some(
                AtomSet::new(names).map_err(|e| err(lineno, e.to_string()))?,
            );
        } else if let Some(rest) = line.strip_prefix("orbit") {
            let (idx, rest) = rest
                .trim()
                .split_once(':')
                .ok_or_else(|| err(lineno, "expected `orbit <i>: prior = ...`".into()))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad orbit index `{idx}`")))?;
            let rest = rest.trim();
            let rest = rest
                .strip_prefix("prior")
                .and_then(|r| r.trim().strip_prefix('='))
                .ok_or_else(|| err(lineno, "expected `prior = ...`".into()))?;
            let prior = parse_prior_text(rest).map_err(|e| err(lineno, e))?;
            if priors.insert(idx, prior).is_some() {
                return Err(err(lineno, format!("orbit {idx} given twice")));
            }
        } else if let Some(rest) = line.strip_prefix("coupling") {
            let rest = rest
                .trim()
                .strip_prefix('=')
                .ok_or_else(|| err(lineno, "expected `coupling = ...`".into()))?;
            coupling_word = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("joint:") {
            let (w, dms) = rest
                .split_once('@')
                .ok_or_else(|| err(lineno, "expected `joint: w @ law / law / ...`".into()))?;
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad weight `{w}`")))?;
            let dms: Vec<DirectingMeasure> = dms
                .split('/')
                .map(|d| DirectingMeasure::from_compact(d.trim()))
                .collect::<Result<_, _>>()
                .map_err(|e| err(lineno, e))?;
            joint_atoms.push((w, dms));
        } else if let Some(rest) = line.strip_prefix("designated") {
            let rest = rest
                .trim()
                .strip_prefix('=')
                .ok_or_else(|| err(lineno, "expected `designated = point(...)`".into()))?;
            let body = parse_paren(rest, "point")
                .ok_or_else(|| err(lineno, "designated law must be `point(...)`".into()))?;
            designated =
                Some(DirectingMeasure::from_compact(&body).map_err(|e| err(lineno, e))?);
        } else {
            return Err(err(lineno, format!("unrecognized line `{line}`")));
        }
    }

    let atoms = atoms.ok_or_else(|| err(0, "missing `atoms` line".into()))?;
    let designated = designated.ok_or_else(|| err(0, "missing `designated` line".into()))?;
    let coupling = match coupling_word.as_deref() {
        Some("joint") => Coupling::ListedJoint(joint_atoms),
        other => {
            if !joint_atoms.is_empty() {
                return Err(err(0, "`joint:` lines need `coupling = joint`".into()));
            }
            match other {
                None | Some("independent") => Coupling::Independent,
                Some("shared") => Coupling::Shared,
                Some(word) => return Err(err(0, format!("unknown coupling `{word}`"))),
            }
        }
    };
    let mut prior_list = Vec::with_capacity(priors.len());
    for (expect, (idx, prior)) in priors.into_iter().enumerate() {
        if idx != expect {
            return Err(err(0, format!("orbit indices must be dense; missing {expect}")));
        }
        prior_list.push(prior);
    }
    HierarchicalSpec::new(atoms, prior_list, designated, coupling)
}

// ---------------------------------------------------------------------------
// Streams
// ---------------------------------------------------------------------------

const LANE_LATENT: u64 = 0;
const LANE_OUTCOME: u64 = 1;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-replicate handle deriving independent lanes from (root seed,
/// replicate, kind, index). Same inputs, same stream, on any schedule.
#[derive(Debug, Clone, Copy)]
pub struct RngStream {
    root: u64,
    replicate: u64,
}

impl RngStream {
    pub fn new(root: u64, replicate: u64) -> RngStream {
        RngStream { root, replicate }
    }

    fn lane(&self, kind: u64, index: u64) -> ChaCha12Rng {
        let mut h = mix64(self.root);
        h = mix64(h ^ self.replicate);
        h = mix64(h ^ kind);
        h = mix64(h ^ index);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            h = mix64(h);
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }
}

fn draw_from_prior(
    prior: &OrbitPrior,
    rng: &mut ChaCha12Rng,
    block: usize,
) -> Result<DirectingMeasure, SamplerError> {
    match prior {
        OrbitPrior::Point(dm) => Ok(dm.clone()),
        OrbitPrior::FiniteMixture(atoms) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (w, dm) in atoms {
                acc += w;
                if u < acc {
                    return Ok(dm.clone());
                }
            }
            Ok(atoms.last().expect("mixture validated nonempty").1.clone())
        }
        OrbitPrior::BetaPerAtom(shapes) => {
            let mut theta = Vec::with_capacity(shapes.len());
            for &(a, b) in shapes {
                let beta = rand_distr::Beta::new(a, b).map_err(|e| SamplerError::BadPrior {
                    block,
                    reason: e.to_string(),
                })?;
                theta.push(beta.sample(rng));
            }
            Ok(DirectingMeasure::BernoulliProduct(theta))
        }
        OrbitPrior::Dirichlet(conc) => {
            let dir = rand_distr::Dirichlet::new(conc).map_err(|e| SamplerError::BadPrior {
                block,
                reason: e.to_string(),
            })?;
            Ok(DirectingMeasure::Full(dir.sample(rng)))
        }
    }
}

/// One directing-measure draw per orbit block, honoring the coupling mode.
pub fn draw_latents(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    stream: &RngStream,
) -> Result<Vec<DirectingMeasure>, SamplerError> {
    let blocks = partition.blocks().len();
    if blocks != spec.block_count() {
        return Err(SamplerError::WrongLatentCount {
            expected: blocks,
            got: spec.block_count(),
        });
    }
    match spec.coupling() {
        Coupling::Independent => (0..blocks)
            .map(|b| {
                let mut rng = stream.lane(LANE_LATENT, b as u64);
                draw_from_prior(spec.prior(b).unwrap(), &mut rng, b)
            })
            .collect(),
        Coupling::Shared => {
            let mut rng = stream.lane(LANE_LATENT, 0);
            let dm = draw_from_prior(spec.prior(0).unwrap(), &mut rng, 0)?;
            Ok(vec![dm; blocks])
        }
        Coupling::ListedJoint(atoms) => {
            let mut rng = stream.lane(LANE_LATENT, 0);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut chosen = &atoms.last().expect("joint validated nonempty").1;
            for (w, dms) in atoms {
                acc += w;
                if u < acc {
                    chosen = dms;
                    break;
                }
            }
            if chosen.len() != blocks {
                return Err(SamplerError::WrongLatentCount {
                    expected: blocks,
                    got: chosen.len(),
                });
            }
            Ok(chosen.clone())
        }
    }
}

/// Inverse-CDF draw from a dense outcome law; consumes exactly one uniform.
fn draw_outcome(law: &[f64], rng: &mut ChaCha12Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (o, &p) in law.iter().enumerate() {
        acc += p;
        if u < acc {
            return o;
        }
    }
    law.len() - 1
}

/// Dense outcome law of a directing measure.
fn dense_law(dm: &DirectingMeasure, atom_count: usize) -> Vec<f64> {
    crate::measure::outcome_law(dm, atom_count).expect("directing measure validated")
}

/// One valuation: every world of block b draws i.i.d. from latents[b], any
/// world outside all blocks (the designated one included) draws from the
/// designated law. Worlds are filled in ascending index order from one
/// outcome lane, so the draw is a pure function of the stream.
pub fn sample_valuation(
    latents: &[DirectingMeasure],
    partition: &OrbitPartition,
    designated_law: &DirectingMeasure,
    world_count: usize,
    atom_count: usize,
    stream: &RngStream,
) -> Result<Valuation, SamplerError> {
    if latents.len() != partition.blocks().len() {
        return Err(SamplerError::WrongLatentCount {
            expected: partition.blocks().len(),
            got: latents.len(),
        });
    }
    let block_laws: Vec<Vec<f64>> = latents.iter().map(|dm| dense_law(dm, atom_count)).collect();
    let fallback = dense_law(designated_law, atom_count);
    let mut rng = stream.lane(LANE_OUTCOME, 0);
    let mut outcomes = Vec::with_capacity(world_count);
    for w in 0..world_count {
        let law = match partition.block_of(w) {
            Some(b) => &block_laws[b],
            None => &fallback,
        };
        outcomes.push(draw_outcome(law, &mut rng));
    }
    Ok(Valuation::new(outcomes, atom_count).expect("drawn outcomes fit the atom count"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replicate {
    pub latents: Vec<DirectingMeasure>,
    pub valuation: Valuation,
}

/// Sampled replicates plus everything needed to reproduce them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub seed: u64,
    pub spec_fingerprint: String,
    pub world_count: usize,
    pub atom_count: usize,
    pub block_count: usize,
    pub replicates: Vec<Replicate>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        crate::fingerprint_bytes(&buf)
    }

    /// CSV with `#` metadata lines, then one row per replicate: id, one
    /// latent cell per block, one packed outcome per world. Byte-stable.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(out, "# spec={}", self.spec_fingerprint)?;
        writeln!(out, "# worlds={}", self.world_count)?;
        writeln!(out, "# atoms={}", self.atom_count)?;
        writeln!(out, "# blocks={}", self.block_count)?;
        let mut header = String::from("replicate");
        for b in 0..self.block_count {
            header.push_str(&format!(",latent_{b}"));
        }
        for w in 0..self.world_count {
            header.push_str(&format!(",world_{w}"));
        }
        writeln!(out, "{header}")?;
        for (r, rep) in self.replicates.iter().enumerate() {
            let mut row = r.to_string();
            for dm in &rep.latents {
                row.push(',');
                row.push_str(&dm.to_compact());
            }
            for w in 0..self.world_count {
                row.push_str(&format!(",{}", rep.valuation.outcome(w)));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Dataset, SamplerError> {
        let mut seed = 0u64;
        let mut spec_fingerprint = String::new();
        let mut world_count = None;
        let mut atom_count = None;
        let mut block_count = None;
        let mut replicates = Vec::new();
        let mut saw_header = false;
        let err = |line: usize, reason: String| SamplerError::Parse { line, reason };
        for (i, line) in input.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| err(lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let meta = meta.trim();
                if let Some((key, value)) = meta.split_once('=') {
                    match key.trim() {
                        "seed" => {
                            seed = value
                                .trim()
                                .parse()
                                .map_err(|_| err(lineno, format!("bad seed `{value}`")))?
                        }
                        "spec" => spec_fingerprint = value.trim().to_string(),
                        "worlds" => {
                            world_count = Some(value.trim().parse().map_err(|_| {
                                err(lineno, format!("bad world count `{value}`"))
                            })?)
                        }
                        "atoms" => {
                            atom_count = Some(value.trim().parse().map_err(|_| {
                                err(lineno, format!("bad atom count `{value}`"))
                            })?)
                        }
                        "blocks" => {
                            block_count = Some(value.trim().parse().map_err(|_| {
                                err(lineno, format!("bad block count `{value}`"))
                            })?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !saw_header {
                if !line.starts_with("replicate") {
                    return Err(err(lineno, "expected header row".into()));
                }
                saw_header = true;
                continue;
            }
            let worlds = world_count.ok_or_else(|| err(lineno, "missing `# worlds=`".into()))?;
            let atoms = atom_count.ok_or_else(|| err(lineno, "missing `# atoms=`".into()))?;
            let blocks = block_count.ok_or_else(|| err(lineno, "missing `# blocks=`".into()))?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + blocks + worlds {
                return Err(err(
                    lineno,
                    format!("expected {} fields, got {}", 1 + blocks + worlds, fields.len()),
                ));
            }
            let id: usize = fields[0]
                .parse()
                .map_err(|_| err(lineno, format!("bad replicate id `{}`", fields[0])))?;
            if id != replicates.len() {
                return Err(err(lineno, format!("replicate ids must be sequential; got {id}")));
            }
            let latents: Vec<DirectingMeasure> = fields[1..1 + blocks]
                .iter()
                .map(|f| DirectingMeasure::from_compact(f))
                .collect::<Result<_, _>>()
                .map_err(|e| err(lineno, e))?;
            let outcomes: Vec<usize> = fields[1 + blocks..]
                .iter()
                .map(|f| f.parse::<usize>().map_err(|_| format!("bad outcome `{f}`")))
                .collect::<Result<_, _>>()
                .map_err(|e| err(lineno, e))?;
            let valuation =
                Valuation::new(outcomes, atoms).map_err(|e| err(lineno, e.to_string()))?;
            replicates.push(Replicate { latents, valuation });
        }
        Ok(Dataset {
            seed,
            spec_fingerprint,
            world_count: world_count.unwrap_or(0),
            atom_count: atom_count.unwrap_or(0),
            block_count: block_count.unwrap_or(0),
            replicates,
        })
    }
}

fn sample_one(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
    seed: u64,
    replicate: u64,
) -> Result<Replicate, SamplerError> {
    let stream = RngStream::new(seed, replicate);
    let latents = draw_latents(spec, partition, &stream)?;
    let valuation = sample_valuation(
        &latents,
        partition,
        spec.designated_law(),
        world_count,
        spec.atoms().len(),
        &stream,
    )?;
    Ok(Replicate { latents, valuation })
}

fn collect_replicates(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
    n: usize,
    seed: u64,
    parallel: bool,
) -> Result<Vec<Replicate>, SamplerError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if parallel {
            return (0..n as u64)
                .into_par_iter()
                .map(|r| sample_one(spec, partition, world_count, seed, r))
                .collect();
        }
    }
    let _ = parallel;
    (0..n as u64)
        .map(|r| sample_one(spec, partition, world_count, seed, r))
        .collect()
}

/// n independent replicates. Output is a pure function of (spec, partition,
/// world_count, n, seed); worker scheduling cannot change a byte.
pub fn sample_replicates(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
    n: usize,
    seed: u64,
) -> Result<Dataset, SamplerError> {
    sample_replicates_with(spec, partition, world_count, n, seed, true)
}

/// Sequential reference path; bit-identical to `sample_replicates`.
pub fn sample_replicates_seq(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
    n: usize,
    seed: u64,
) -> Result<Dataset, SamplerError> {
    sample_replicates_with(spec, partition, world_count, n, seed, false)
}

fn sample_replicates_with(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
    n: usize,
    seed: u64,
    parallel: bool,
) -> Result<Dataset, SamplerError> {
    if n == 0 {
        return Err(SamplerError::BadCount);
    }
    let replicates = collect_replicates(spec, partition, world_count, n, seed, parallel)?;
    Ok(Dataset {
        seed,
        spec_fingerprint: spec.fingerprint(),
        world_count,
        atom_count: spec.atoms().len(),
        block_count: partition.blocks().len(),
        replicates,
    })
}

/// Streaming histogram of valuation indices over n replicates, without
/// materializing a Dataset. Counts are schedule-independent (integer sums).
pub fn empirical_distribution(
    spec: &HierarchicalSpec,
    partition: &OrbitPartition,
    world_count: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<u64>, SamplerError> {
    if n == 0 {
        return Err(SamplerError::BadCount);
    }
    let size = crate::measure::space_size(world_count, spec.atoms().len())
        .map_err(|e| SamplerError::BadSpec(e.to_string()))?;
    let tally = |range: std::ops::Range<u64>| -> Result<Vec<u64>, SamplerError> {
        let mut hist = vec![0u64; size];
        for r in range {
            let rep = sample_one(spec, partition, world_count, seed, r)?;
            hist[rep.valuation.index()] += 1;
        }
        Ok(hist)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        const CHUNK: u64 = 1 << 14;
        let chunks: Vec<std::ops::Range<u64>> = (0..n as u64)
            .step_by(CHUNK as usize)
            .map(|lo| lo..(lo + CHUNK).min(n as u64))
            .collect();
        return chunks
            .into_par_iter()
            .map(tally)
            .try_reduce(
                || vec![0u64; size],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(&b) {
                        *x += y;
                    }
                    Ok(a)
                },
            );
    }
    #[cfg(not(feature = "parallel"))]
    tally(0..n as u64)
}
