//! Constraint graph over data points and batch sampling for constraint-aware SGD.
//!
//! Vertices are data points; two vertices are adjacent iff they appear
//! together in some global constraint. A batch is either a set of whole
//! connected components or a self-avoiding path inside one component, plus
//! every global constraint whose members all lie in the batch.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::relaxations::TermKind;
use crate::{Error, Result};

/// A constraint over several data points, with its penalty kind. The
/// penalty-weight state used for it is the one at index `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalConstraint {
    pub id: usize,
    pub members: Vec<usize>,
    pub kind: TermKind,
}

impl GlobalConstraint {
    pub fn new(id: usize, members: Vec<usize>, kind: TermKind) -> Self {
        Self { id, members, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    /// Whole connected components, sampled without replacement.
    Component,
    /// A self-avoiding random walk from a uniform start; it stops early
    /// when the walk gets stuck.
    Subpath,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Batch {
    /// Sorted vertex ids.
    pub vertices: Vec<usize>,
    /// Sorted ids of the global constraints fully inside `vertices`.
    pub constraints: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ConstraintGraph {
    adjacency: Vec<Vec<usize>>,
    constraint_index: Vec<Vec<usize>>,
    constraint_members: Vec<Vec<usize>>,
    components: Vec<Vec<usize>>,
    component_of: Vec<usize>,
}

impl ConstraintGraph {
    /// Builds the graph for `n` vertices. Constraint ids must equal their
    /// position in `constraints`.
    pub fn build(n: usize, constraints: &[GlobalConstraint]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut constraint_index = vec![Vec::new(); n];
        let mut constraint_members = Vec::with_capacity(constraints.len());
        for (pos, c) in constraints.iter().enumerate() {
            if c.id != pos {
                return Err(Error::InvalidArgument(alloc::format!(
                    "constraint id {} at position {pos}",
                    c.id
                )));
            }
            if c.members.is_empty() {
                return Err(Error::InvalidSet(alloc::format!("constraint {pos} has no members")));
            }
            for &m in &c.members {
                if m >= n {
                    return Err(Error::IndexOutOfRange { index: m, len: n });
                }
            }
            for (i, &a) in c.members.iter().enumerate() {
                constraint_index[a].push(pos);
                for &b in &c.members[i + 1..] {
                    if a != b {
                        adjacency[a].push(b);
                        adjacency[b].push(a);
                    }
                }
            }
            constraint_members.push(c.members.clone());
        }
        for list in adjacency.iter_mut().chain(constraint_index.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }

        let mut component_of = vec![usize::MAX; n];
        let mut components = Vec::new();
        for start in 0..n {
            if component_of[start] != usize::MAX {
                continue;
            }
            let label = components.len();
            let mut comp = vec![start];
            component_of[start] = label;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &w in &adjacency[v] {
                    if component_of[w] == usize::MAX {
                        component_of[w] = label;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }

        Ok(Self {
            adjacency,
            constraint_index,
            constraint_members,
            components,
            component_of,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn constraints_of(&self, v: usize) -> &[usize] {
        &self.constraint_index[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }

    /// The whole graph as one batch.
    pub fn full_batch(&self) -> Batch {
        Batch {
            vertices: (0..self.vertex_count()).collect(),
            constraints: (0..self.constraint_members.len()).collect(),
        }
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R, budget: usize, mode: BatchMode) -> Batch {
        let budget = budget.max(1);
        let mut vertices = match mode {
            BatchMode::Component => self.sample_components(rng, budget),
            BatchMode::Subpath => self.sample_path(rng, budget),
        };
        vertices.sort_unstable();
        let constraints = self.constraints_inside(&vertices);
        Batch {
            vertices,
            constraints,
        }
    }

    fn sample_components<R: Rng + ?Sized>(&self, rng: &mut R, budget: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.components.len()).collect();
        order.shuffle(rng);
        let mut out = Vec::new();
        for c in order {
            let comp = &self.components[c];
            if !out.is_empty() && out.len() + comp.len() > budget {
                break;
            }
            out.extend_from_slice(comp);
            if out.len() >= budget {
                break;
            }
        }
        out
    }

    fn sample_path<R: Rng + ?Sized>(&self, rng: &mut R, budget: usize) -> Vec<usize> {
        let n = self.vertex_count();
        if n == 0 {
            return Vec::new();
        }
        let start = rng.random_range(0..n);
        let mut visited = vec![false; n];
        visited[start] = true;
        let mut path = vec![start];
        let mut candidates = Vec::new();
        while path.len() < budget {
            let end = *path.last().unwrap();
            candidates.clear();
            candidates.extend(self.adjacency[end].iter().copied().filter(|&w| !visited[w]));
            if candidates.is_empty() {
                break;
            }
            let next = candidates[rng.random_range(0..candidates.len())];
            visited[next] = true;
            path.push(next);
        }
        path
    }

    /// Ids of constraints whose members all lie in the sorted `vertices`.
    pub fn constraints_inside(&self, vertices: &[usize]) -> Vec<usize> {
        let mut inside = vec![false; self.vertex_count()];
        for &v in vertices {
            inside[v] = true;
        }
        let mut out: Vec<usize> = vertices
            .iter()
            .flat_map(|&v| self.constraint_index[v].iter().copied())
            .filter(|&c| self.constraint_members[c].iter().all(|&m| inside[m]))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::sudoku::Grid;

    fn alldiff(id: usize, members: Vec<usize>) -> GlobalConstraint {
        GlobalConstraint::new(id, members, TermKind::AllDifferent)
    }

    fn chain(n: usize) -> ConstraintGraph {
        let cs: Vec<_> = (0..n - 1).map(|i| GlobalConstraint::new(i, vec![i, i + 1], TermKind::CustomEdge)).collect();
        ConstraintGraph::build(n, &cs).unwrap()
    }

    fn sudoku_constraints(grid: Grid, offset: usize, first_id: usize) -> Vec<GlobalConstraint> {
        grid.units()
            .into_iter()
            .enumerate()
            .map(|(i, u)| alldiff(first_id + i, u.into_iter().map(|c| c + offset).collect()))
            .collect()
    }

    #[test]
    fn single_sudoku_is_one_component() {
        let cs = sudoku_constraints(Grid::Four, 0, 0);
        assert_eq!(cs.len(), 12);
        let g = ConstraintGraph::build(16, &cs).unwrap();
        assert_eq!(g.components().len(), 1);
        assert_eq!(g.components()[0].len(), 16);
    }

    #[test]
    fn no_constraints_gives_singletons() {
        let g = ConstraintGraph::build(4, &[]).unwrap();
        assert_eq!(g.components(), &[vec![0], vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn two_triangles() {
        let g = ConstraintGraph::build(6, &[alldiff(0, vec![0, 1, 2]), alldiff(1, vec![3, 4, 5])]).unwrap();
        assert_eq!(g.components(), &[vec![0, 1, 2], vec![3, 4, 5]]);
        assert!(g.neighbors(0).contains(&2) && !g.neighbors(0).contains(&3));
    }

    #[test]
    fn chain_is_connected() {
        let g = chain(3);
        assert_eq!(g.components(), &[vec![0, 1, 2]]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn out_of_range_member_rejected() {
        assert!(matches!(
            ConstraintGraph::build(3, &[alldiff(0, vec![0, 3])]),
            Err(Error::IndexOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn batch_of_sudokus() {
        for (grid, size) in [(Grid::Four, 16), (Grid::Nine, 81)] {
            let mut cs = Vec::new();
            for p in 0..5 {
                let first = cs.len();
                cs.extend(sudoku_constraints(grid, p * size, first));
            }
            let g = ConstraintGraph::build(5 * size, &cs).unwrap();
            assert_eq!(g.components().len(), 5);
            assert!(g.components().iter().all(|c| c.len() == size));
        }
    }

    #[test]
    fn component_sampling_respects_budget() {
        let mut cs = sudoku_constraints(Grid::Four, 0, 0);
        cs.extend(sudoku_constraints(Grid::Four, 16, 12));
        let g = ConstraintGraph::build(32, &cs).unwrap();
        let mut rng = rng_from_seed(1);
        let b = g.sample_batch(&mut rng, 32, BatchMode::Component);
        assert_eq!(b.vertices.len(), 32);
        assert_eq!(b.constraints.len(), 24);
        let b = g.sample_batch(&mut rng, 1, BatchMode::Component);
        assert_eq!(b.vertices.len(), 16);
        assert_eq!(b.constraints.len(), 12);
        let b = g.sample_batch(&mut rng, 20, BatchMode::Component);
        assert_eq!(b.vertices.len(), 16);
    }

    #[test]
    fn subpath_on_chain() {
        let g = chain(100);
        let mut rng = rng_from_seed(2);
        let mut full = 0;
        for _ in 0..200 {
            let b = g.sample_batch(&mut rng, 5, BatchMode::Subpath);
            assert!(!b.vertices.is_empty() && b.vertices.len() <= 5);
            assert!(b.vertices.windows(2).all(|w| w[1] == w[0] + 1));
            assert_eq!(b.constraints.len(), b.vertices.len() - 1);
            full += usize::from(b.vertices.len() == 5);
        }
        // only walks that start next to an end and head into it stop early
        assert!(full >= 180, "{full}");
    }

    #[test]
    fn subpath_covers_edges_evenly() {
        let g = chain(100);
        let mut rng = rng_from_seed(3);
        let mut counts = vec![0usize; 99];
        for _ in 0..10_000 {
            for c in g.sample_batch(&mut rng, 5, BatchMode::Subpath).constraints {
                counts[c] += 1;
            }
        }
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        for (e, &c) in counts.iter().enumerate() {
            let rel = (c as f64 - mean).abs() / mean;
            assert!(rel <= 0.30, "edge {e}: {c} vs mean {mean}");
        }
    }

    #[test]
    fn batch_constraints_are_fully_inside() {
        let cs = sudoku_constraints(Grid::Nine, 0, 0);
        let g = ConstraintGraph::build(81, &cs).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..100 {
            let b = g.sample_batch(&mut rng, 12, BatchMode::Subpath);
            for &c in &b.constraints {
                assert!(cs[c].members.iter().all(|m| b.vertices.binary_search(m).is_ok()));
            }
        }
    }
}
