use alloc::vec;
use alloc::vec::Vec;

/// Total-degree multi-index set `{ν ∈ ℕ₀^s : |ν| ≤ degree}`.
///
/// Indices are graded: sorted by `|ν|`, then by ascending lexicographic
/// comparison of the tuples. The first index is always the zero tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultiIndexSet {
    s: usize,
    degree: usize,
    indices: Vec<Vec<u32>>,
}

pub fn gen_total_degree(s: usize, degree: usize) -> MultiIndexSet {
    fn fill(prefix: &mut Vec<u32>, s: usize, budget: u32, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == s {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=budget {
            prefix.push(k);
            fill(prefix, s, budget - k, out);
            prefix.pop();
        }
    }
    let mut indices = Vec::new();
    fill(&mut Vec::with_capacity(s), s, degree as u32, &mut indices);
    indices.sort_by(|a, b| {
        let sa: u32 = a.iter().sum();
        let sb: u32 = b.iter().sum();
        sa.cmp(&sb).then_with(|| a.cmp(b))
    });
    MultiIndexSet { s, degree, indices }
}

/// `(degree + s)! / (degree! s!)` without overflow for moderate sizes.
pub fn total_degree_cardinality(s: usize, degree: usize) -> usize {
    // C(degree + s, s), built incrementally so every intermediate is integral.
    (1..=s).fold(1usize, |acc, i| acc * (degree + i) / i)
}

impl MultiIndexSet {
    pub fn s(&self) -> usize {
        self.s
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[Vec<u32>] {
        &self.indices
    }

    pub fn position(&self, nu: &[u32]) -> Option<usize> {
        self.indices.iter().position(|i| i == nu)
    }
}

/// Legendre polynomial of degree `k`, normalized to `∫_{-1}^{1} P_k² dt/2 = 1`.
pub fn legendre_1d(k: usize, t: f64) -> f64 {
    legendre_table(k, t)[k]
}

/// Normalized Legendre values `P_0(t) … P_max(t)` from the three-term recurrence.
pub fn legendre_table(max: usize, t: f64) -> Vec<f64> {
    let mut p = vec![0.0; max + 1];
    p[0] = 1.0;
    if max >= 1 {
        p[1] = t;
    }
    for n in 1..max {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * t * p[n] - nf * p[n - 1]) / (nf + 1.0);
    }
    for (k, v) in p.iter_mut().enumerate() {
        *v *= libm::sqrt(2.0 * k as f64 + 1.0);
    }
    p
}

fn monomial_table(max: usize, t: f64) -> Vec<f64> {
    let mut p = vec![1.0; max + 1];
    for k in 1..=max {
        p[k] = p[k - 1] * t;
    }
    p
}

/// The univariate family a chaos expansion is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BasisKind {
    #[default]
    Legendre,
    /// Plain power series `y^ν`.
    Monomial,
}

/// Values of every tensorized basis function `Π_j P_{ν_j}(y_j)` at `y`.
pub fn basis_vector(set: &MultiIndexSet, kind: BasisKind, y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(y.len(), set.s);
    let tables: Vec<Vec<f64>> = y
        .iter()
        .map(|&t| match kind {
            BasisKind::Legendre => legendre_table(set.degree, t),
            BasisKind::Monomial => monomial_table(set.degree, t),
        })
        .collect();
    set.indices
        .iter()
        .map(|nu| nu.iter().zip(&tables).map(|(&k, tab)| tab[k as usize]).product())
        .collect()
}
