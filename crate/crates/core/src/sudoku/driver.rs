use alloc::vec::Vec;

use super::{Grid, SudokuPuzzle};
use crate::autodiff::{Tape, TensorValue, Var};
use crate::encoder::{argmax, Encoder, EncoderMode, LatentLayout};
use crate::graph::{Batch, GlobalConstraint};
use crate::optimizer::{Driver, LocalWeightRule, ObjectiveTerms, SolveConfig, UpdateRule};
use crate::relaxations::{all_different_penalties, one_hot, row_entropies, ConstrainedSet, TermKind};
use crate::rng::SolverRng;
use crate::Result;

/// Default solver settings for Sudoku completion: the cell-entropy weight
/// starts at 0.01 and grows by 10% every 50 iterations; logits stay within ±4.
pub fn default_config() -> SolveConfig {
    SolveConfig {
        learning_rate: 0.3,
        update: UpdateRule::adam(),
        max_iterations: 3000,
        decode_interval: 20,
        param_bound: Some(4.0),
        local_weight_init: 0.01,
        local_weight_rule: LocalWeightRule::Annealed { factor: 1.1, every: 50 },
        ..SolveConfig::default()
    }
}

/// Relaxed Sudoku completion: one categorical per cell, cardinality
/// penalties per cell and all-different penalties per row, column and box.
/// Clue cells are frozen one-hot constants.
#[derive(Debug, Clone)]
pub struct SudokuDriver {
    puzzle: SudokuPuzzle,
    encoder: Encoder,
    free: Vec<usize>,
    clue_rows: TensorValue,
    /// Row of each cell in `[clue one-hots; free probabilities]`.
    stacked_row: Vec<usize>,
    sets: Vec<ConstrainedSet>,
    constraints: Vec<GlobalConstraint>,
}

impl SudokuDriver {
    pub fn new(puzzle: SudokuPuzzle, mode: EncoderMode) -> Result<Self> {
        let grid = puzzle.grid();
        let k = grid.side();
        let layout = LatentLayout::new(&[("digit", k)]);
        let encoder = Encoder::with_mode(mode, grid.cells(), layout, || mlp_features(&puzzle))?;
        let clues: Vec<usize> = (0..grid.cells()).filter(|&c| puzzle.cells()[c] != 0).collect();
        let free: Vec<usize> = (0..grid.cells()).filter(|&c| puzzle.cells()[c] == 0).collect();
        let mut stacked_row = alloc::vec![0; grid.cells()];
        let mut clue_data = Vec::with_capacity(clues.len() * k);
        for (i, &c) in clues.iter().enumerate() {
            stacked_row[c] = i;
            clue_data.extend(one_hot(k, puzzle.cells()[c] as usize - 1));
        }
        for (i, &c) in free.iter().enumerate() {
            stacked_row[c] = clues.len() + i;
        }
        let units = grid.units();
        let sets = units
            .iter()
            .map(|u| ConstrainedSet::new(u.clone()))
            .collect::<Result<Vec<_>>>()?;
        let constraints = units
            .into_iter()
            .enumerate()
            .map(|(i, u)| GlobalConstraint::new(i, u, TermKind::AllDifferent))
            .collect();
        Ok(Self {
            clue_rows: TensorValue::matrix(clues.len(), k, clue_data)?,
            puzzle,
            encoder,
            free,
            stacked_row,
            sets,
            constraints,
        })
    }

    pub fn puzzle(&self) -> &SudokuPuzzle {
        &self.puzzle
    }

    /// Cells with a trainable categorical.
    pub fn trainable_cells(&self) -> &[usize] {
        &self.free
    }

    /// `[cells, k]` probabilities in cell order, clues as one-hot constants.
    pub fn cell_probs(&self, tape: &mut Tape, params: &[Var]) -> Result<Var> {
        let logits = self.encoder.encode(tape, params, &self.free)?;
        let probs = tape.softmax(logits)?;
        let clues = tape.leaf(self.clue_rows.clone());
        let stacked = tape.concat_rows(&[clues, probs])?;
        tape.gather_rows(stacked, &self.stacked_row)
    }
}

/// Per-cell features: one-hot clue (zeros when blank) and normalized (row, col).
fn mlp_features(p: &SudokuPuzzle) -> TensorValue {
    let n = p.grid().side();
    let width = n + 2;
    let mut data = Vec::with_capacity(p.grid().cells() * width);
    for (c, &d) in p.cells().iter().enumerate() {
        for j in 1..=n {
            data.push(if d as usize == j { 1.0 } else { 0.0 });
        }
        data.push((c / n) as f64 / (n - 1) as f64);
        data.push((c % n) as f64 / (n - 1) as f64);
    }
    TensorValue::matrix(p.grid().cells(), width, data).expect("feature shape")
}

impl Driver for SudokuDriver {
    type Assignment = Vec<u8>;

    fn vertex_count(&self) -> usize {
        self.puzzle.grid().cells()
    }

    fn constraints(&self) -> &[GlobalConstraint] {
        &self.constraints
    }

    fn init_params(&self, rng: &mut SolverRng) -> Vec<TensorValue> {
        self.encoder.init(rng)
    }

    fn build(&self, tape: &mut Tape, params: &[Var], batch: &Batch, _iteration: usize) -> Result<ObjectiveTerms> {
        let probs = self.cell_probs(tape, params)?;
        let batch_probs = tape.gather_rows(probs, &batch.vertices)?;
        let local = row_entropies(tape, batch_probs)?;
        let sets: Vec<ConstrainedSet> = batch.constraints.iter().map(|&c| self.sets[c].clone()).collect();
        let global = if sets.is_empty() {
            tape.leaf(TensorValue::vector(Vec::new()))
        } else {
            all_different_penalties(tape, probs, &sets)?
        };
        Ok(ObjectiveTerms {
            reconstruction: None,
            local: Some(local),
            global: Some(global),
            global_violation: None,
        })
    }

    fn decode(&self, params: &[TensorValue]) -> Result<Vec<u8>> {
        let logits = self.encoder.evaluate(params, &self.free)?;
        let mut cells = self.puzzle.cells().to_vec();
        for (i, &c) in self.free.iter().enumerate() {
            cells[c] = argmax(logits.row(i)) as u8 + 1;
        }
        Ok(cells)
    }

    fn verify(&self, assignment: &Vec<u8>) -> bool {
        self.puzzle.accepts(assignment)
    }
}

impl SudokuDriver {
    pub fn grid(&self) -> Grid {
        self.puzzle.grid()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ConstraintGraph;
    use crate::optimizer::{assemble_objective, solve, LocalReduction, SolveStatus};
    use crate::rng::rng_from_seed;
    use crate::sudoku::generate_puzzle;

    const SOLVED: &str = "534678912672195348198342567859761423426853791713924856961537284287419635345286179";

    #[test]
    fn empty_puzzle_has_27_sets_of_nine() {
        let d = SudokuDriver::new(SudokuPuzzle::empty(Grid::Nine), EncoderMode::FreeLogits).unwrap();
        assert_eq!(d.constraints().len(), 27);
        assert!(d.constraints().iter().all(|c| c.members.len() == 9));
        assert_eq!(d.trainable_cells().len(), 81);
    }

    #[test]
    fn clue_count_sets_trainable_cells() {
        let (p, _) = generate_puzzle(Grid::Nine, 24, &mut rng_from_seed(3));
        let d = SudokuDriver::new(p, EncoderMode::FreeLogits).unwrap();
        assert_eq!(d.trainable_cells().len(), 57);
    }

    #[test]
    fn single_batch_term_counts() {
        let d = SudokuDriver::new(SudokuPuzzle::empty(Grid::Nine), EncoderMode::FreeLogits).unwrap();
        let g = ConstraintGraph::build(81, d.constraints()).unwrap();
        let batch = g.full_batch();
        let mut tape = Tape::new();
        let params = d.init_params(&mut rng_from_seed(0));
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let t = d.build(&mut tape, &vars, &batch, 0).unwrap();
        assert_eq!(tape.value(t.local.unwrap()).len(), 81);
        assert_eq!(tape.value(t.global.unwrap()).len(), 27);
    }

    #[test]
    fn fully_clued_puzzle_starts_at_zero_and_solves_immediately() {
        let p = SudokuPuzzle::parse(SOLVED).unwrap();
        let d = SudokuDriver::new(p, EncoderMode::FreeLogits).unwrap();
        let g = ConstraintGraph::build(81, d.constraints()).unwrap();
        let mut tape = Tape::new();
        let params = d.init_params(&mut rng_from_seed(0));
        let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
        let batch = g.full_batch();
        let t = d.build(&mut tape, &vars, &batch, 0).unwrap();
        let o = assemble_objective(&mut tape, 81, &t, 1.0, &[1.0; 27], LocalReduction::Mean).unwrap();
        assert!(tape.value(o).item().abs() < 1e-9);
        let r = solve(&d, &default_config()).unwrap();
        assert_eq!(r.status, SolveStatus::Solved);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn ground_truth_logits_decode_valid() {
        let (p, sol) = generate_puzzle(Grid::Nine, 30, &mut rng_from_seed(8));
        let d = SudokuDriver::new(p, EncoderMode::FreeLogits).unwrap();
        let mut logits = TensorValue::zeros(&[81, 9]);
        for c in 0..81 {
            logits.data_mut()[c * 9 + sol[c] as usize - 1] = 5.0;
        }
        let a = d.decode(&[logits]).unwrap();
        assert_eq!(a, sol);
        assert!(d.verify(&a));
        let mut bad = sol.clone();
        let free = d.trainable_cells();
        // swap two free cells in the same row if possible, else any two cells
        let pair = free
            .iter()
            .flat_map(|&a| free.iter().map(move |&b| (a, b)))
            .find(|&(a, b)| a < b && a / 9 == b / 9 && sol[a] != sol[b]);
        if let Some((a, b)) = pair {
            bad.swap(a, b);
            assert!(!d.verify(&bad));
        }
    }

    #[test]
    fn mlp_mode_runs() {
        let (p, _) = generate_puzzle(Grid::Four, 8, &mut rng_from_seed(1));
        let d = SudokuDriver::new(p, EncoderMode::Mlp { hidden: 16 }).unwrap();
        let cfg = SolveConfig {
            learning_rate: 0.01,
            max_iterations: 400,
            ..default_config()
        };
        let r = solve(&d, &cfg).unwrap();
        assert!(r.objective.is_finite());
        if r.solved() {
            assert!(d.verify(&r.assignment));
        }
    }
}
