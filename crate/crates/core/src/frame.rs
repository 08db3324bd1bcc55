//! Finite Kripke frames: a world set, a boolean accessibility matrix, and a
//! designated world, plus the line-oriented frame DSL.
//!
//! The DSL (UTF-8, `#` comments):
//!
//! ```text
//! frame <name>
//! world <id>            # one per line, id = [A-Za-z0-9_]+
//! designated <id>
//! edge <src> <dst>      # either side may be * for "all worlds"
//! biedge <a> <b>
//! close reflexive
//! close transitive
//! end
//! ```
//!
//! `close` directives are applied after all edge declarations, with the
//! transitive closure computed to fixpoint. Declaration order of `world`
//! lines is the canonical world order for all matrices and valuation
//! indexing.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("line {line}: unknown world token `{token}`")]
    UnknownWorld { line: usize, token: String },
    #[error("line {line}: duplicate world declaration `{token}`")]
    DuplicateWorld { line: usize, token: String },
    #[error("missing `designated` declaration")]
    MissingDesignated,
    #[error("line {line}: malformed line: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("world index {index} out of range for {count} worlds")]
    IndexOutOfRange { index: usize, count: usize },
}

/// A finite frame: ordered world identifiers, an |W|x|W| accessibility
/// matrix in that order, and the designated world's index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub name: String,
    worlds: Vec<String>,
    relation: Vec<bool>,
    designated: usize,
}

/// Frame-class flags and the derived label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameClass {
    pub reflexive: bool,
    pub transitive: bool,
    pub symmetric: bool,
    pub label: FrameLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FrameLabel {
    #[serde(rename = "S5")]
    S5,
    #[serde(rename = "S4-not-S5")]
    S4NotS5,
    #[serde(rename = "not-S4")]
    NotS4,
}

/// A set of world indices, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorldSet {
    indices: Vec<usize>,
}

impl WorldSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        WorldSet { indices }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn without(&self, index: usize) -> WorldSet {
        WorldSet {
            indices: self
                .indices
                .iter()
                .copied()
                .filter(|&i| i != index)
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }
}

impl Frame {
    /// Builds a frame from parts, validating the invariants.
    pub fn new(
        name: impl Into<String>,
        worlds: Vec<String>,
        relation: Vec<bool>,
        designated: usize,
    ) -> Result<Self, FrameError> {
        let n = worlds.len();
        if relation.len() != n * n {
            return Err(FrameError::Malformed {
                line: 0,
                reason: format!("relation has {} entries, expected {}", relation.len(), n * n),
            });
        }
        if designated >= n {
            return Err(FrameError::IndexOutOfRange {
                index: designated,
                count: n,
            });
        }
        for (i, w) in worlds.iter().enumerate() {
            if worlds[..i].contains(w) {
                return Err(FrameError::DuplicateWorld {
                    line: 0,
                    token: w.clone(),
                });
            }
        }
        Ok(Frame {
            name: name.into(),
            worlds,
            relation,
            designated,
        })
    }

    pub fn world_count(&self) -> usize {
        self.worlds.len()
    }

    pub fn worlds(&self) -> &[String] {
        &self.worlds
    }

    pub fn world_name(&self, index: usize) -> &str {
        &self.worlds[index]
    }

    pub fn world_index(&self, name: &str) -> Option<usize> {
        self.worlds.iter().position(|w| w == name)
    }

    pub fn designated(&self) -> usize {
        self.designated
    }

    pub fn related(&self, from: usize, to: usize) -> bool {
        self.relation[from * self.worlds.len() + to]
    }

    /// Exhaustive matrix checks for the three frame-class flags.
    pub fn classify(&self) -> FrameClass {
        let n = self.worlds.len();
        let reflexive = (0..n).all(|i| self.related(i, i));
        let symmetric =
            (0..n).all(|i| (0..n).all(|j| self.related(i, j) == self.related(j, i)));
        let transitive = (0..n).all(|a| {
            (0..n).all(|b| {
                !self.related(a, b) || (0..n).all(|c| !self.related(b, c) || self.related(a, c))
            })
        });
        let label = if reflexive && transitive && symmetric {
            FrameLabel::S5
        } else if reflexive && transitive {
            FrameLabel::S4NotS5
        } else {
            FrameLabel::NotS4
        };
        FrameClass {
            reflexive,
            transitive,
            symmetric,
            label,
        }
    }

    /// Worlds accessible from `w`: row `w` of the matrix. Under reflexivity
    /// `w` itself is a member.
    pub fn accessible_cluster(&self, w: usize) -> Result<WorldSet, FrameError> {
        let n = self.worlds.len();
        if w >= n {
            return Err(FrameError::IndexOutOfRange { index: w, count: n });
        }
        Ok(WorldSet::new(
            (0..n).filter(|&v| self.related(w, v)).collect(),
        ))
    }

    /// Canonical DSL serialization: world lines in canonical order, one
    /// explicit `edge` line per true matrix entry, no shorthands.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("frame {}\n", self.name));
        for w in &self.worlds {
            out.push_str(&format!("world {w}\n"));
        }
        out.push_str(&format!("designated {}\n", self.worlds[self.designated]));
        let n = self.worlds.len();
        for i in 0..n {
            for j in 0..n {
                if self.related(i, j) {
                    out.push_str(&format!("edge {} {}\n", self.worlds[i], self.worlds[j]));
                }
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint_bytes(self.to_dsl().as_bytes())
    }
}

/// Parses a frame DSL document. Edges are recorded exactly as declared;
/// `close reflexive` / `close transitive` run afterwards, the latter to
/// fixpoint.
pub fn parse_frame(text: &str) -> Result<Frame, FrameError> {
    let mut name = String::from("frame");
    let mut worlds: Vec<String> = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut designated: Option<usize> = None;
    let mut close_reflexive = false;
    let mut close_transitive = false;

    let valid_id = |s: &str| {
        !s.is_empty()
            && s.chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_')
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let malformed = |reason: &str| FrameError::Malformed {
            line,
            reason: reason.to_string(),
        };
        let resolve = |tok: &str, worlds: &[String]| -> Result<usize, FrameError> {
            worlds
                .iter()
                .position(|w| w == tok)
                .ok_or(FrameError::UnknownWorld {
                    line,
                    token: tok.to_string(),
                })
        };
        match tokens[0] {
            "frame" => {
                if tokens.len() != 2 {
                    return Err(malformed("expected `frame <name>`"));
                }
                name = tokens[1].to_string();
            }
            "world" => {
                if tokens.len() != 2 || !valid_id(tokens[1]) {
                    return Err(malformed("expected `world <id>`"));
                }
                if worlds.iter().any(|w| w == tokens[1]) {
                    return Err(FrameError::DuplicateWorld {
                        line,
                        token: tokens[1].to_string(),
                    });
                }
                worlds.push(tokens[1].to_string());
            }
            "designated" => {
                if tokens.len() != 2 {
                    return Err(malformed("expected `designated <id>`"));
                }
                designated = Some(resolve(tokens[1], &worlds)?);
            }
            "edge" | "biedge" => {
                if tokens.len() != 3 {
                    return Err(malformed("expected two world tokens"));
                }
                let sources: Vec<usize> = if tokens[1] == "*" {
                    (0..worlds.len()).collect()
                } else {
                    vec![resolve(tokens[1], &worlds)?]
                };
                let targets: Vec<usize> = if tokens[2] == "*" {
                    (0..worlds.len()).collect()
                } else {
                    vec![resolve(tokens[2], &worlds)?]
                };
                for &s in &sources {
                    for &t in &targets {
                        edges.push((s, t));
                        if tokens[0] == "biedge" {
                            edges.push((t, s));
                        }
                    }
                }
            }
            "close" => {
                match tokens.get(1).copied() {
                    Some("reflexive") => close_reflexive = true,
                    Some("transitive") => close_transitive = true,
                    _ => return Err(malformed("expected `close reflexive|transitive`")),
                }
                if tokens.len() != 2 {
                    return Err(malformed("expected `close reflexive|transitive`"));
                }
            }
            "end" => break,
            other => {
                return Err(FrameError::Malformed {
                    line,
                    reason: format!("unknown directive `{other}`"),
                })
            }
        }
    }

    let designated = designated.ok_or(FrameError::MissingDesignated)?;
    let n = worlds.len();
    let mut relation = vec![false; n * n];
    for (s, t) in edges {
        relation[s * n + t] = true;
    }
    if close_reflexive {
        for i in 0..n {
            relation[i * n + i] = true;
        }
    }
    if close_transitive {
        // Warshall fixpoint.
        for k in 0..n {
            for i in 0..n {
                if relation[i * n + k] {
                    for j in 0..n {
                        if relation[k * n + j] {
                            relation[i * n + j] = true;
                        }
                    }
                }
            }
        }
    }
    Frame::new(name, worlds, relation, designated)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn universal(n_extra: usize) -> String {
        let mut s = String::from("frame s5\nworld w0\n");
        for i in 1..=n_extra {
            s.push_str(&format!("world v{i}\n"));
        }
        s.push_str("designated w0\nedge * *\nend\n");
        s
    }

    pub(crate) const EXAMPLE2: &str = "\
frame example2
world w0
world a1
world a2
world a3
world b1
world b2
designated w0
edge w0 *
biedge a1 a2
biedge a1 a3
biedge a2 a3
close reflexive
end
";

    pub(crate) const CHAIN5: &str = "\
frame chain
world t0
world t1
world t2
world t3
world t4
designated t0
edge t0 t1
edge t1 t2
edge t2 t3
edge t3 t4
close reflexive
close transitive
end
";

    #[test]
    fn edge_star_star_gives_universal_relation() {
        let f = parse_frame("frame u\nworld w0\nworld a\ndesignated w0\nedge * *\nend\n").unwrap();
        assert_eq!(f.world_count(), 2);
        for i in 0..2 {
            for j in 0..2 {
                assert!(f.related(i, j));
            }
        }
    }

    #[test]
    fn example2_truncation_matrix() {
        let f = parse_frame(EXAMPLE2).unwrap();
        assert_eq!(f.world_count(), 6);
        let idx = |s: &str| f.world_index(s).unwrap();
        // row(w0) all true
        for j in 0..6 {
            assert!(f.related(idx("w0"), j));
        }
        // a-block all true
        for a in ["a1", "a2", "a3"] {
            for b in ["a1", "a2", "a3"] {
                assert!(f.related(idx(a), idx(b)));
            }
        }
        // b-diagonal only
        assert!(f.related(idx("b1"), idx("b1")));
        assert!(f.related(idx("b2"), idx("b2")));
        assert!(!f.related(idx("b1"), idx("b2")));
        // no accessibility between a and b blocks either way
        for a in ["a1", "a2", "a3"] {
            for b in ["b1", "b2"] {
                assert!(!f.related(idx(a), idx(b)));
                assert!(!f.related(idx(b), idx(a)));
            }
        }
    }

    #[test]
    fn chain_closure_is_leq() {
        let f = parse_frame(CHAIN5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(f.related(i, j), i <= j, "({i},{j})");
            }
        }
    }

    #[test]
    fn classify_examples() {
        let f = parse_frame(&universal(3)).unwrap();
        assert_eq!(f.classify().label, FrameLabel::S5);

        let f = parse_frame(EXAMPLE2).unwrap();
        let c = f.classify();
        assert!(c.reflexive && c.transitive && !c.symmetric);
        assert_eq!(c.label, FrameLabel::S4NotS5);

        let f = parse_frame(CHAIN5).unwrap();
        assert_eq!(f.classify().label, FrameLabel::S4NotS5);

        let f = parse_frame("frame x\nworld a\nworld b\ndesignated a\nedge a b\nend\n").unwrap();
        assert_eq!(f.classify().label, FrameLabel::NotS4);
    }

    #[test]
    fn cluster_examples() {
        let chain = parse_frame(CHAIN5).unwrap();
        let c = chain.accessible_cluster(2).unwrap();
        assert_eq!(c.indices(), &[2, 3, 4]);

        // Cluster from w0 includes w0 under reflexivity.
        let ex2 = parse_frame(EXAMPLE2).unwrap();
        let c = ex2.accessible_cluster(0).unwrap();
        assert_eq!(c.indices(), &[0, 1, 2, 3, 4, 5]);

        let uni = parse_frame(&universal(4)).unwrap();
        for w in 0..5 {
            assert_eq!(uni.accessible_cluster(w).unwrap().len(), 5);
        }

        assert!(matches!(
            chain.accessible_cluster(9),
            Err(FrameError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn parse_errors_report_lines() {
        let err = parse_frame("frame f\nworld a\ndesignated a\nedge a zz\nend\n").unwrap_err();
        assert_eq!(
            err,
            FrameError::UnknownWorld {
                line: 4,
                token: "zz".into()
            }
        );

        let err = parse_frame("frame f\nworld a\nworld a\n").unwrap_err();
        assert_eq!(
            err,
            FrameError::DuplicateWorld {
                line: 3,
                token: "a".into()
            }
        );

        let err = parse_frame("frame f\nworld a\nedge a a\nend\n").unwrap_err();
        assert_eq!(err, FrameError::MissingDesignated);

        let err = parse_frame("frame f\nworld a\ndesignated a\nedge a\nend\n").unwrap_err();
        assert!(matches!(err, FrameError::Malformed { line: 4, .. }));
    }

    #[test]
    fn round_trip_examples() {
        for text in [EXAMPLE2, CHAIN5, &universal(4)] {
            let f = parse_frame(text).unwrap();
            let again = parse_frame(&f.to_dsl()).unwrap();
            assert_eq!(f, again);
        }
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let f = parse_frame(
            "# header\nframe f\n\nworld a # trailing\ndesignated a\nclose reflexive\nend\n",
        )
        .unwrap();
        assert!(f.related(0, 0));
    }
}
