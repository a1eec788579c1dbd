use drnet_core::encoder::EncoderMode;
use drnet_core::optimizer::{solve_with_restarts, SolveConfig, SolveStatus};
use drnet_core::rng::rng_from_seed;
use drnet_core::sat::{self, dpll_solve, generate_random_3sat, parse_dimacs, SatDriver};
use drnet_core::sudoku::{self, generate_puzzle, Grid, SudokuDriver, SudokuPuzzle};

#[test]
fn four_by_four_sudoku_is_solved_and_verified() {
    let mut rng = rng_from_seed(21);
    for seed in 0..5 {
        let (puzzle, _) = generate_puzzle(Grid::Four, 6, &mut rng);
        let driver = SudokuDriver::new(puzzle.clone(), EncoderMode::FreeLogits).unwrap();
        let config = SolveConfig {
            seed,
            restart_limit: 5,
            ..sudoku::default_config()
        };
        let r = solve_with_restarts(&driver, &config).unwrap();
        assert_eq!(r.status, SolveStatus::Solved);
        assert!(puzzle.accepts(&r.assignment));
    }
}

#[test]
fn random_3sat_solutions_pass_clause_evaluation() {
    let mut rng = rng_from_seed(22);
    let mut solved = 0;
    for seed in 0..10 {
        let formula = generate_random_3sat(20, sat::HARD_RATIO, &mut rng).unwrap();
        assert!(dpll_solve(&formula).is_some());
        let driver = SatDriver::new(formula.clone(), EncoderMode::FreeLogits).unwrap();
        let config = SolveConfig {
            seed,
            restart_limit: 3,
            ..sat::default_config()
        };
        let r = solve_with_restarts(&driver, &config).unwrap();
        if r.solved() {
            solved += 1;
            assert!(formula.verify(&r.assignment));
        }
    }
    assert!(solved >= 8, "{solved}/10");
}

#[test]
fn dimacs_round_trip_preserves_models() {
    let f = parse_dimacs("c example\np cnf 3 3\n1 -2 0\n2 3 0\n-1 -3 0\n").unwrap();
    let g = parse_dimacs(&f.to_dimacs()).unwrap();
    assert_eq!(f, g);
    let model = dpll_solve(&g).unwrap();
    assert!(f.verify(&model));
}

#[test]
fn unsatisfiable_puzzle_never_reports_solved() {
    // Cell (0, 0) sees 2 and 3 in its row, 4 in its column and 1 in its box.
    let mut cells = vec![0u8; 16];
    cells[1] = 2;
    cells[2] = 3;
    cells[8] = 4;
    cells[5] = 1;
    let puzzle = SudokuPuzzle::new(Grid::Four, cells).unwrap();
    assert_eq!(puzzle.count_solutions(1), 0);
    let driver = SudokuDriver::new(puzzle, EncoderMode::FreeLogits).unwrap();
    let config = SolveConfig {
        max_iterations: 200,
        restart_limit: 2,
        ..sudoku::default_config()
    };
    let r = solve_with_restarts(&driver, &config).unwrap();
    assert!(!r.solved());
    assert_eq!(r.restarts, 2);
}
