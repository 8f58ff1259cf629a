//! Structural analysis of a finite Markov chain: communicating classes,
//! recurrent classes, stationary distributions and the Cesàro limit matrix.
//!
//! Everything is computed from the positive-probability graph, so periodic
//! chains are handled exactly (no matrix powers are taken).

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::Result;
use crate::linalg::solve;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStructure {
    /// Closed communicating classes, each sorted, ordered by smallest member.
    pub recurrent_classes: Vec<Vec<usize>>,
    /// States outside every recurrent class, ascending.
    pub transient: Vec<usize>,
}

impl ChainStructure {
    pub fn is_recurrent(&self, state: usize) -> bool {
        self.recurrent_classes.iter().any(|c| c.binary_search(&state).is_ok())
    }

    pub fn is_unichain(&self) -> bool {
        self.recurrent_classes.len() == 1
    }
}

pub fn decompose(transition: &DMatrix<f64>) -> ChainStructure {
    let n = transition.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if transition[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&graph);
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let mut recurrent_classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, members)| {
            members.iter().all(|node| {
                let i = node.index();
                (0..n).all(|j| transition[(i, j)] <= 0.0 || component[j] == *c)
            })
        })
        .map(|(_, members)| {
            let mut v: Vec<usize> = members.iter().map(|node| node.index()).collect();
            v.sort_unstable();
            v
        })
        .collect();
    recurrent_classes.sort_by_key(|c| c[0]);
    let transient = (0..n)
        .filter(|s| !recurrent_classes.iter().any(|c| c.contains(s)))
        .collect();
    ChainStructure {
        recurrent_classes,
        transient,
    }
}

/// Stationary distribution of the chain restricted to an irreducible class.
fn class_stationary(transition: &DMatrix<f64>, class: &[usize]) -> Result<DVector<f64>> {
    let k = class.len();
    // rows: (P_C - I)^T x = 0, last equation replaced by sum(x) = 1
    let mut a = DMatrix::zeros(k, k);
    for (r, &i) in class.iter().enumerate() {
        for (c, &j) in class.iter().enumerate() {
            a[(r, c)] = transition[(j, i)] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for c in 0..k {
        a[(k - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    solve(&a, &b, "stationary distribution")
}

/// Probability of eventual absorption in each recurrent class, for every
/// state (rows) and class (columns).
pub fn absorption_probabilities(transition: &DMatrix<f64>, structure: &ChainStructure) -> Result<DMatrix<f64>> {
    let n = transition.nrows();
    let classes = &structure.recurrent_classes;
    let mut out = DMatrix::zeros(n, classes.len());
    for (c, class) in classes.iter().enumerate() {
        for &s in class {
            out[(s, c)] = 1.0;
        }
    }
    let t = &structure.transient;
    if t.is_empty() {
        return Ok(out);
    }
    let m = t.len();
    let mut a = DMatrix::identity(m, m);
    for (r, &i) in t.iter().enumerate() {
        for (c, &j) in t.iter().enumerate() {
            a[(r, c)] -= transition[(i, j)];
        }
    }
    for (c, class) in classes.iter().enumerate() {
        let b = DVector::from_iterator(m, t.iter().map(|&i| class.iter().map(|&j| transition[(i, j)]).sum()));
        let x = solve(&a, &b, "absorption probabilities")?;
        for (r, &i) in t.iter().enumerate() {
            out[(i, c)] = x[r];
        }
    }
    Ok(out)
}

/// Expected number of steps spent among transient states before entering a
/// recurrent class, per starting state (zero on recurrent states).
pub fn absorption_times(transition: &DMatrix<f64>, structure: &ChainStructure) -> Result<DVector<f64>> {
    let n = transition.nrows();
    let mut out = DVector::zeros(n);
    let t = &structure.transient;
    if t.is_empty() {
        return Ok(out);
    }
    let m = t.len();
    let mut a = DMatrix::identity(m, m);
    for (r, &i) in t.iter().enumerate() {
        for (c, &j) in t.iter().enumerate() {
            a[(r, c)] -= transition[(i, j)];
        }
    }
    let x = solve(&a, &DVector::from_element(m, 1.0), "absorption times")?;
    for (r, &i) in t.iter().enumerate() {
        out[i] = x[r];
    }
    Ok(out)
}

/// Cesàro limit `P* = lim (1/T) Σ_{t<T} P^t`.
pub fn limiting_matrix(transition: &DMatrix<f64>, structure: &ChainStructure) -> Result<DMatrix<f64>> {
    let n = transition.nrows();
    let absorb = absorption_probabilities(transition, structure)?;
    let mut p_star = DMatrix::zeros(n, n);
    for (c, class) in structure.recurrent_classes.iter().enumerate() {
        let pi = class_stationary(transition, class)?;
        for i in 0..n {
            let w = absorb[(i, c)];
            if w == 0.0 {
                continue;
            }
            for (k, &j) in class.iter().enumerate() {
                p_star[(i, j)] = w * pi[k];
            }
        }
    }
    Ok(p_star)
}

/// Deviation matrix `H = (I − P + P*)^{-1} (I − P*)`.
pub fn deviation_matrix(transition: &DMatrix<f64>, p_star: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = transition.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let fundamental = &eye - transition + p_star;
    let rhs = &eye - p_star;
    let mut h = DMatrix::zeros(n, n);
    for c in 0..n {
        let col = solve(&fundamental, &rhs.column(c).into_owned(), "deviation matrix")?;
        h.set_column(c, &col);
    }
    Ok(h)
}
