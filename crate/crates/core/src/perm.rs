//! Permutations of world indices, stored as image arrays.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    #[error("image array of length {0} is not a bijection of 0..{0}")]
    NotBijective(usize),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
}

/// A permutation of `0..degree`, `apply(i) = images[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(degree: usize) -> Self {
        Permutation {
            images: (0..degree).collect(),
        }
    }

    /// Validates that `images` is a bijection of its index range.
    pub fn from_images(images: Vec<usize>) -> Result<Self, PermError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &img in &images {
            if img >= n || seen[img] {
                return Err(PermError::NotBijective(n));
            }
            seen[img] = true;
        }
        Ok(Permutation { images })
    }

    /// Swap of `a` and `b`, identity elsewhere.
    pub fn transposition(degree: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<usize> = (0..degree).collect();
        images.swap(a, b);
        Permutation { images }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, point: usize) -> usize {
        self.images[point]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &img)| i == img)
    }

    pub fn inverse(&self) -> Permutation {
        let mut images = vec![0; self.images.len()];
        for (i, &img) in self.images.iter().enumerate() {
            images[img] = i;
        }
        Permutation { images }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        debug_assert_eq!(self.degree(), other.degree());
        let images = (0..self.images.len())
            .map(|i| self.apply(other.apply(i)))
            .collect();
        Permutation { images }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_applies_right_then_left() {
        // other: 0->1, self: 1->2, so compose maps 0->2.
        let other = Permutation::from_images(vec![1, 0, 2]).unwrap();
        let this = Permutation::from_images(vec![0, 2, 1]).unwrap();
        assert_eq!(this.compose(&other).apply(0), 2);
    }

    #[test]
    fn inverse_cancels() {
        let p = Permutation::from_images(vec![0, 2, 1, 4, 7, 8, 3, 5, 6]).unwrap();
        assert_eq!(p.compose(&p.inverse()), Permutation::identity(9));
        assert_eq!(p.inverse().compose(&p), Permutation::identity(9));
    }

    #[test]
    fn rejects_non_bijections() {
        assert_eq!(
            Permutation::from_images(vec![0, 0, 1]),
            Err(PermError::NotBijective(3))
        );
        assert_eq!(
            Permutation::from_images(vec![0, 3, 1]),
            Err(PermError::NotBijective(3))
        );
    }

    #[test]
    fn transposition_swaps() {
        let t = Permutation::transposition(4, 1, 3);
        assert_eq!(t.apply(1), 3);
        assert_eq!(t.apply(3), 1);
        assert_eq!(t.apply(0), 0);
        assert!(t.compose(&t).is_identity());
    }
}
