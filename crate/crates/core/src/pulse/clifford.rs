use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{gate_fidelity, gate_infidelity, GateSet, Generator};
use crate::error::{Error, Result};
use crate::qubit::Unitary2;

/// `U ≡ V` up to global phase: `|Tr(U†V)|²/4 > 1 - 10⁻⁹`.
pub fn phase_equivalent(u: &Unitary2, v: &Unitary2) -> bool {
    gate_fidelity(u, v) > 1.0 - 1e-9
}

/// One element of the 24-element Clifford quotient group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordElement {
    pub index: usize,
    /// Representative with its first non-negligible entry real and positive.
    pub unitary: Unitary2,
    /// Generators in time order; the unitary is their product with the last
    /// generator leftmost.
    pub word: Vec<Generator>,
}

/// The single-qubit Clifford group modulo phase, with multiplication and
/// inverse tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CliffordGroup {
    elements: Vec<CliffordElement>,
    /// `product[a][b]` is the class of `U_a U_b` (b applied first).
    product: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

pub const GROUP_ORDER: usize = 24;

impl CliffordGroup {
    /// Breadth-first closure over the generator targets. Words are extended
    /// in the order `X+ < X- < Z+ < Z-`, so each class keeps its shortest,
    /// lexicographically first word.
    pub fn build() -> Result<Self> {
        let mut elements: Vec<CliffordElement> = vec![CliffordElement {
            index: 0,
            unitary: Unitary2::IDENTITY.phase_normalized(),
            word: Vec::new(),
        }];
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            for g in Generator::ROTATIONS {
                let u = g.target() * elements[i].unitary;
                if elements.iter().any(|e| phase_equivalent(&e.unitary, &u)) {
                    continue;
                }
                if elements.len() >= 4 * GROUP_ORDER {
                    return Err(Error::GroupConstruction(elements.len()));
                }
                let mut word = elements[i].word.clone();
                word.push(g);
                let index = elements.len();
                elements.push(CliffordElement {
                    index,
                    unitary: u.phase_normalized(),
                    word,
                });
                queue.push_back(index);
            }
        }
        if elements.len() != GROUP_ORDER {
            return Err(Error::GroupConstruction(elements.len()));
        }
        let classify = |u: &Unitary2| -> Result<usize> {
            let hits: Vec<usize> = elements
                .iter()
                .filter(|e| phase_equivalent(&e.unitary, u))
                .map(|e| e.index)
                .collect();
            match hits.as_slice() {
                [one] => Ok(*one),
                _ => Err(Error::GroupConstruction(elements.len())),
            }
        };
        let mut product = vec![vec![0; GROUP_ORDER]; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            for b in 0..GROUP_ORDER {
                product[a][b] = classify(&(elements[a].unitary * elements[b].unitary))?;
            }
        }
        let mut inverse = vec![0; GROUP_ORDER];
        for (a, inv) in inverse.iter_mut().enumerate() {
            let found: Vec<usize> = (0..GROUP_ORDER).filter(|&b| product[a][b] == 0).collect();
            match found.as_slice() {
                [one] => *inv = *one,
                _ => return Err(Error::GroupConstruction(found.len())),
            }
        }
        Ok(Self {
            elements,
            product,
            inverse,
        })
    }

    pub fn elements(&self) -> &[CliffordElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, index: usize) -> &CliffordElement {
        &self.elements[index]
    }

    /// Class of `U_a U_b`.
    pub fn product(&self, a: usize, b: usize) -> usize {
        self.product[a][b]
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a]
    }

    /// Class of the sequence applied in time order (first index first).
    pub fn compose(&self, sequence: &[usize]) -> usize {
        sequence.iter().fold(0, |acc, &k| self.product[k][acc])
    }

    /// Class of an arbitrary unitary, if it is a Clifford.
    pub fn classify(&self, u: &Unitary2) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| phase_equivalent(&e.unitary, u))
    }

    /// Generator word of a sequence of elements, in time order.
    pub fn word_of(&self, sequence: &[usize]) -> Vec<Generator> {
        sequence
            .iter()
            .flat_map(|&k| self.elements[k].word.iter().copied())
            .collect()
    }

    /// Worst noiseless infidelity of any element realised through `gates`.
    pub fn max_compiled_infidelity(&self, gates: &GateSet) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for e in &self.elements {
            let u = crate::qubit::propagate_static(
                &gates.word_timeline(&e.word),
                &gates.params,
                Default::default(),
            )?;
            worst = worst.max(gate_infidelity(&e.unitary, &u));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn word_unitary(word: &[Generator]) -> Unitary2 {
        word.iter()
            .fold(Unitary2::IDENTITY, |acc, g| g.target() * acc)
    }

    #[test]
    fn closure_has_24_classes() {
        let g = CliffordGroup::build().unwrap();
        assert_eq!(g.len(), 24);
        assert!(g.element(0).word.is_empty());
        assert_eq!(g.inverse(0), 0);
        assert!(g.elements().iter().all(|e| e.word.len() <= 4));
        assert_eq!(g.elements().iter().filter(|e| e.word.len() == 1).count(), 4);
    }

    #[test]
    fn words_realise_their_unitaries() {
        let g = CliffordGroup::build().unwrap();
        for e in g.elements() {
            assert!(gate_fidelity(&e.unitary, &word_unitary(&e.word)) >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn table_matches_matrix_products_for_all_pairs() {
        let g = CliffordGroup::build().unwrap();
        for a in 0..24 {
            for b in 0..24 {
                let m = g.element(a).unitary * g.element(b).unitary;
                assert!(phase_equivalent(&g.element(g.product(a, b)).unitary, &m));
            }
        }
    }

    #[test]
    fn group_axioms() {
        let g = CliffordGroup::build().unwrap();
        for a in 0..24 {
            assert_eq!(g.product(a, g.inverse(a)), 0);
            assert_eq!(g.product(g.inverse(a), a), 0);
            assert_eq!(g.product(0, a), a);
            for b in 0..24 {
                for c in 0..24 {
                    assert_eq!(g.product(g.product(a, b), c), g.product(a, g.product(b, c)));
                }
            }
        }
    }

    #[test]
    fn x_plus_then_x_minus_is_identity() {
        let g = CliffordGroup::build().unwrap();
        let xp = g.classify(&Generator::XPlus.target()).unwrap();
        let xm = g.classify(&Generator::XMinus.target()).unwrap();
        assert_eq!(g.compose(&[xp, xm]), 0);
        assert_eq!(g.inverse(xp), xm);
    }

    #[test]
    fn representatives_are_phase_normalised() {
        let g = CliffordGroup::build().unwrap();
        for e in g.elements() {
            let first = e
                .unitary
                .matrix()
                .iter()
                .flatten()
                .find(|z| z.norm() > 1e-9)
                .copied()
                .unwrap();
            assert!(first.re > 0.0 && first.im.abs() < 1e-12);
        }
    }
}
