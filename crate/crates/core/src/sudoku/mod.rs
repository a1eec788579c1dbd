//! Sudoku puzzles: parsing, an exact backtracking oracle, benchmark
//! generation and the relaxed-solve driver. The overlapping 4x4 de-mixing
//! toy lives in [`overlap`].

mod driver;
pub mod overlap;

pub use driver::{default_config, SudokuDriver};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// Board geometry. 4x4 boards use the four 2x2 corner boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grid {
    Four,
    Nine,
}

impl Grid {
    pub const fn side(self) -> usize {
        match self {
            Grid::Four => 4,
            Grid::Nine => 9,
        }
    }

    pub const fn box_side(self) -> usize {
        match self {
            Grid::Four => 2,
            Grid::Nine => 3,
        }
    }

    pub const fn cells(self) -> usize {
        self.side() * self.side()
    }

    pub fn from_cells(n: usize) -> Option<Self> {
        match n {
            16 => Some(Grid::Four),
            81 => Some(Grid::Nine),
            _ => None,
        }
    }

    /// Rows, then columns, then boxes; each a list of cell indices.
    pub fn units(self) -> Vec<Vec<usize>> {
        let n = self.side();
        let b = self.box_side();
        let mut out = Vec::with_capacity(3 * n);
        for r in 0..n {
            out.push((0..n).map(|c| r * n + c).collect());
        }
        for c in 0..n {
            out.push((0..n).map(|r| r * n + c).collect());
        }
        for br in 0..n / b {
            for bc in 0..n / b {
                let mut unit = Vec::with_capacity(n);
                for r in 0..b {
                    for c in 0..b {
                        unit.push((br * b + r) * n + bc * b + c);
                    }
                }
                out.push(unit);
            }
        }
        out
    }

    /// True iff every unit of a completely filled grid holds distinct values.
    pub fn is_valid_solution(self, cells: &[u8]) -> bool {
        let n = self.side();
        if cells.len() != self.cells() || cells.iter().any(|&d| d == 0 || d as usize > n) {
            return false;
        }
        self.units().iter().all(|u| {
            let mut seen = 0u32;
            u.iter().all(|&c| {
                let bit = 1 << cells[c];
                let fresh = seen & bit == 0;
                seen |= bit;
                fresh
            })
        })
    }
}

/// A puzzle: `0` marks a blank, `1..=side` a clue.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SudokuPuzzle {
    grid: Grid,
    cells: Vec<u8>,
}

impl SudokuPuzzle {
    pub fn new(grid: Grid, cells: Vec<u8>) -> Result<Self> {
        if cells.len() != grid.cells() {
            return Err(Error::SudokuParse(format!(
                "expected {} cells, got {}",
                grid.cells(),
                cells.len()
            )));
        }
        if let Some(&d) = cells.iter().find(|&&d| d as usize > grid.side()) {
            return Err(Error::SudokuParse(format!("digit {d} out of range")));
        }
        let p = Self { grid, cells };
        if let Some((a, b)) = p.first_conflict() {
            return Err(Error::SudokuParse(format!(
                "conflicting clues {} at cells {a} and {b}",
                p.cells[a]
            )));
        }
        Ok(p)
    }

    /// Parses 81 (or 16) characters from `.0123456789`; whitespace is ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cells = Vec::with_capacity(81);
        for ch in text.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '.' | '0' => cells.push(0),
                '1'..='9' => cells.push(ch as u8 - b'0'),
                other => return Err(Error::SudokuParse(format!("bad character {other:?}"))),
            }
        }
        let grid = Grid::from_cells(cells.len())
            .ok_or_else(|| Error::SudokuParse(format!("bad length {}", cells.len())))?;
        Self::new(grid, cells)
    }

    pub fn empty(grid: Grid) -> Self {
        Self {
            grid,
            cells: vec![0; grid.cells()],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn clue_count(&self) -> usize {
        self.cells.iter().filter(|&&d| d != 0).count()
    }

    /// One line, `.` for blanks.
    pub fn to_line(&self) -> String {
        self.cells
            .iter()
            .map(|&d| if d == 0 { '.' } else { (b'0' + d) as char })
            .collect()
    }

    fn first_conflict(&self) -> Option<(usize, usize)> {
        for u in self.grid.units() {
            for (i, &a) in u.iter().enumerate() {
                for &b in &u[i + 1..] {
                    if self.cells[a] != 0 && self.cells[a] == self.cells[b] {
                        return Some((a, b));
                    }
                }
            }
        }
        None
    }

    /// A complete valid grid that agrees with every clue.
    pub fn accepts(&self, solution: &[u8]) -> bool {
        self.grid.is_valid_solution(solution)
            && self
                .cells
                .iter()
                .zip(solution)
                .all(|(&clue, &s)| clue == 0 || clue == s)
    }

    /// Exact backtracking search; `None` if unsatisfiable.
    pub fn oracle_solve(&self) -> Option<Vec<u8>> {
        let mut s = Search::new(self)?;
        s.run(&mut |_| true, &mut NoShuffle).then(|| s.cells.clone())
    }

    /// Number of completions, stopping at `limit`.
    pub fn count_solutions(&self, limit: usize) -> usize {
        let Some(mut s) = Search::new(self) else {
            return 0;
        };
        let mut count = 0;
        s.run(
            &mut |_| {
                count += 1;
                count >= limit
            },
            &mut NoShuffle,
        );
        count
    }
}

trait Order {
    fn order(&mut self, digits: &mut [u8]);
}

struct NoShuffle;

impl Order for NoShuffle {
    fn order(&mut self, _digits: &mut [u8]) {}
}

struct Shuffled<'a, R: Rng + ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> Order for Shuffled<'_, R> {
    fn order(&mut self, digits: &mut [u8]) {
        digits.shuffle(self.0);
    }
}

/// Bitmask backtracking with most-constrained-cell selection.
struct Search {
    grid: Grid,
    cells: Vec<u8>,
    peers: Vec<Vec<usize>>,
}

impl Search {
    fn new(p: &SudokuPuzzle) -> Option<Self> {
        let grid = p.grid;
        let mut peers = vec![Vec::new(); grid.cells()];
        for u in grid.units() {
            for &a in &u {
                for &b in &u {
                    if a != b {
                        peers[a].push(b);
                    }
                }
            }
        }
        for list in peers.iter_mut() {
            list.sort_unstable();
            list.dedup();
        }
        if p.first_conflict().is_some() {
            return None;
        }
        Some(Self {
            grid,
            cells: p.cells.clone(),
            peers,
        })
    }

    fn candidates(&self, cell: usize) -> u32 {
        let full = ((1u32 << self.grid.side()) - 1) << 1;
        let used = self.peers[cell].iter().fold(0u32, |m, &p| m | (1 << self.cells[p]));
        full & !used
    }

    /// Calls `found` on every solution until it returns true; returns whether it did.
    fn run(&mut self, found: &mut dyn FnMut(&[u8]) -> bool, order: &mut dyn Order) -> bool {
        let mut best: Option<(usize, u32)> = None;
        for c in 0..self.cells.len() {
            if self.cells[c] != 0 {
                continue;
            }
            let cand = self.candidates(c);
            let n = cand.count_ones();
            if n == 0 {
                return false;
            }
            if best.is_none_or(|(_, b)| n < b.count_ones()) {
                best = Some((c, cand));
                if n == 1 {
                    break;
                }
            }
        }
        let Some((cell, cand)) = best else {
            return found(&self.cells);
        };
        let mut digits: Vec<u8> = (1..=self.grid.side() as u8).filter(|d| cand & (1 << d) != 0).collect();
        order.order(&mut digits);
        for d in digits {
            self.cells[cell] = d;
            if self.run(found, order) {
                return true;
            }
        }
        self.cells[cell] = 0;
        false
    }
}

/// Uniformly shuffled search from the empty board: a random complete grid.
pub fn random_solution<R: Rng + ?Sized>(grid: Grid, rng: &mut R) -> Vec<u8> {
    let mut s = Search::new(&SudokuPuzzle::empty(grid)).expect("empty board");
    let ok = s.run(&mut |_| true, &mut Shuffled(rng));
    debug_assert!(ok);
    s.cells
}

/// Masks a random complete grid down to `clues` clues. Solvable by
/// construction; uniqueness is not enforced.
pub fn generate_puzzle<R: Rng + ?Sized>(grid: Grid, clues: usize, rng: &mut R) -> (SudokuPuzzle, Vec<u8>) {
    let solution = random_solution(grid, rng);
    let mut order: Vec<usize> = (0..grid.cells()).collect();
    order.shuffle(rng);
    let mut cells = solution.clone();
    for &c in order.iter().take(grid.cells().saturating_sub(clues)) {
        cells[c] = 0;
    }
    (SudokuPuzzle { grid, cells }, solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    const SOLVED: &str = "534678912672195348198342567859761423426853791713924856961537284287419635345286179";

    #[test]
    fn parse_empty() {
        let p = SudokuPuzzle::parse(&".".repeat(81)).unwrap();
        assert_eq!(p.clue_count(), 0);
        assert_eq!(p.grid(), Grid::Nine);
    }

    #[test]
    fn parse_solved() {
        let p = SudokuPuzzle::parse(SOLVED).unwrap();
        assert_eq!(p.clue_count(), 81);
        assert!(p.grid().is_valid_solution(p.cells()));
        assert_eq!(p.to_line(), SOLVED);
    }

    #[test]
    fn parse_errors() {
        let conflict = alloc::format!("11{}", ".".repeat(79));
        assert!(matches!(SudokuPuzzle::parse(&conflict), Err(Error::SudokuParse(m)) if m.contains("conflict")));
        assert!(SudokuPuzzle::parse(&".".repeat(80)).is_err());
        assert!(SudokuPuzzle::parse(&alloc::format!("x{}", ".".repeat(80))).is_err());
        // whitespace and '0' accepted
        let spaced: String = SOLVED.chars().flat_map(|c| [c, ' ']).collect();
        assert_eq!(SudokuPuzzle::parse(&spaced).unwrap().clue_count(), 81);
    }

    #[test]
    fn four_by_four_has_288_solutions() {
        assert_eq!(SudokuPuzzle::empty(Grid::Four).count_solutions(usize::MAX), 288);
    }

    #[test]
    fn oracle_returns_full_grid_unchanged() {
        let p = SudokuPuzzle::parse(SOLVED).unwrap();
        assert_eq!(p.oracle_solve().unwrap(), p.cells());
    }

    #[test]
    fn oracle_detects_unsatisfiable() {
        // row 0 forces cell 8 to be 9, column 8 already holds a 9
        let mut cells = vec![0u8; 81];
        for (i, d) in (1..=8).enumerate() {
            cells[i] = d;
        }
        cells[9 * 4 + 8] = 9;
        let p = SudokuPuzzle::new(Grid::Nine, cells).unwrap();
        assert!(p.oracle_solve().is_none());
        assert_eq!(p.count_solutions(10), 0);
    }

    #[test]
    fn generated_puzzles_are_consistent() {
        let mut rng = rng_from_seed(5);
        for clues in [24, 28, 32] {
            let (p, sol) = generate_puzzle(Grid::Nine, clues, &mut rng);
            assert_eq!(p.clue_count(), clues);
            assert!(p.accepts(&sol));
            let solved = p.oracle_solve().unwrap();
            assert!(p.accepts(&solved));
        }
    }

    #[test]
    fn swapped_pair_is_rejected() {
        let p = SudokuPuzzle::parse(SOLVED).unwrap();
        let mut s = p.cells().to_vec();
        s.swap(0, 1);
        assert!(!Grid::Nine.is_valid_solution(&s));
        assert!(!SudokuPuzzle::empty(Grid::Nine).accepts(&s));
    }

    #[test]
    fn unit_counts() {
        assert_eq!(Grid::Nine.units().len(), 27);
        assert_eq!(Grid::Four.units().len(), 12);
        assert!(Grid::Four.units()[8..].contains(&vec![0, 1, 4, 5]));
        assert!(Grid::Four.units()[8..].contains(&vec![10, 11, 14, 15]));
    }
}
