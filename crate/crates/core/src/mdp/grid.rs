use std::collections::VecDeque;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::numerics::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Start,
    Goal,
    Empty,
    Wall,
    Lava,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Start => 'S',
            Cell::Goal => 'G',
            Cell::Empty => '.',
            Cell::Wall => '#',
            Cell::Lava => 'L',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Some(match c {
            'S' => Cell::Start,
            'G' => Cell::Goal,
            '.' => Cell::Empty,
            '#' => Cell::Wall,
            'L' => Cell::Lava,
            _ => return None,
        })
    }

    /// Reward for occupying this cell after a move.
    pub fn reward(self) -> f64 {
        match self {
            Cell::Goal => 1.0,
            Cell::Lava => -1.0,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    NoOp,
}

pub const NUM_ACTIONS: usize = 5;
pub const ACTIONS: [Action; NUM_ACTIONS] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::NoOp];

impl Action {
    pub fn index(self) -> usize {
        self as usize
    }

    fn offset(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::NoOp => (0, 0),
        }
    }
}

/// Grid MDP with five actions and slip noise. States are cell indices
/// `row * width + col`; wall cells are never occupied.
#[derive(Clone, Debug, PartialEq)]
pub struct GridWorld {
    pub height: usize,
    pub width: usize,
    pub cells: Vec<Cell>,
    /// Probability that the chosen action is replaced by one drawn
    /// uniformly from all five (possibly the chosen one again).
    pub slip_prob: f64,
    pub gamma: f64,
    pub seed: Option<u64>,
}

/// First line of the text format.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    height: usize,
    width: usize,
    slip: f64,
    gamma: f64,
    seed: Option<u64>,
    absorbing_goals: bool,
}

impl GridWorld {
    pub fn new(height: usize, width: usize, cells: Vec<Cell>, slip_prob: f64, gamma: f64) -> Result<Self> {
        let gw = Self {
            height,
            width,
            cells,
            slip_prob,
            gamma,
            seed: None,
        };
        gw.validate()?;
        Ok(gw)
    }

    /// Parses rows of `S G . # L`.
    pub fn from_rows(rows: &[&str], slip_prob: f64, gamma: f64) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(height * width);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Config(format!("grid row {} has {} cells, expected {width}", i + 1, row.chars().count())));
            }
            for c in row.chars() {
                cells.push(
                    Cell::from_symbol(c)
                        .ok_or_else(|| Error::Config(format!("grid row {}: unknown cell {c:?}", i + 1)))?,
                );
            }
        }
        Self::new(height, width, cells, slip_prob, gamma)
    }

    fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.cells.len() != self.height * self.width {
            return Err(contract("GridWorld", format!("{}x{} grid with {} cells", self.height, self.width, self.cells.len())));
        }
        if !(0.0..=1.0).contains(&self.slip_prob) {
            return Err(contract("GridWorld", format!("slip probability {} outside [0, 1]", self.slip_prob)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(contract("GridWorld", format!("discount {} outside [0, 1)", self.gamma)));
        }
        let starts = self.cells.iter().filter(|&&c| c == Cell::Start).count();
        let goals = self.cells.iter().filter(|&&c| c == Cell::Goal).count();
        if starts != 1 || goals == 0 {
            return Err(contract("GridWorld", format!("{starts} start cells and {goals} goals")));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, state: usize) -> Cell {
        self.cells[state]
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state / self.width, state % self.width)
    }

    pub fn start(&self) -> usize {
        self.cells.iter().position(|&c| c == Cell::Start).expect("validated")
    }

    /// Every non-wall state, ascending.
    pub fn states(&self) -> Vec<usize> {
        (0..self.cells.len()).filter(|&s| self.cells[s] != Cell::Wall).collect()
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }

    /// Deterministic effect of `action` from `state`: walls and edges block.
    pub fn step_target(&self, state: usize, action: Action) -> usize {
        let (r, c) = self.coords(state);
        let (dr, dc) = action.offset();
        let (nr, nc) = (r as isize + dr, c as isize + dc);
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            return state;
        }
        let next = nr as usize * self.width + nc as usize;
        if self.cells[next] == Cell::Wall {
            state
        } else {
            next
        }
    }

    /// Samples one step.
    pub fn transition(&self, state: usize, action: Action, rng: &mut RngStream) -> (usize, f64) {
        let taken = if rng.uniform() < self.slip_prob {
            ACTIONS[rng.index(NUM_ACTIONS)]
        } else {
            action
        };
        let next = self.step_target(state, taken);
        (next, self.cells[next].reward())
    }

    /// Outcomes `(next_state, probability, reward)` with equal next states
    /// merged, in order of first appearance over `ACTIONS`.
    pub fn transition_distribution(&self, state: usize, action: Action) -> Vec<(usize, f64, f64)> {
        let mut out: Vec<(usize, f64, f64)> = Vec::with_capacity(NUM_ACTIONS);
        let slip_each = self.slip_prob / NUM_ACTIONS as f64;
        for a in ACTIONS {
            let p = slip_each + if a == action { 1.0 - self.slip_prob } else { 0.0 };
            if p == 0.0 {
                continue;
            }
            let next = self.step_target(state, a);
            match out.iter_mut().find(|o| o.0 == next) {
                Some(o) => o.1 += p,
                None => out.push((next, p, self.cells[next].reward())),
            }
        }
        out
    }

    /// Whether some goal can be reached from the start through non-wall cells.
    pub fn goal_reachable(&self) -> bool {
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([self.start()]);
        seen[self.start()] = true;
        while let Some(s) = queue.pop_front() {
            if self.cells[s] == Cell::Goal {
                return true;
            }
            for a in &ACTIONS[..4] {
                let n = self.step_target(s, *a);
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        false
    }

    pub fn to_text(&self) -> String {
        let header = Header {
            height: self.height,
            width: self.width,
            slip: self.slip_prob,
            gamma: self.gamma,
            seed: self.seed,
            absorbing_goals: false,
        };
        let mut s = serde_json::to_string(&header).expect("header serializes");
        s.push('\n');
        for r in 0..self.height {
            s.extend(self.cells[r * self.width..(r + 1) * self.width].iter().map(|c| c.symbol()));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Header = serde_json::from_str(lines.next().unwrap_or(""))?;
        if header.absorbing_goals {
            return Err(Error::Config("absorbing goals are not supported".into()));
        }
        let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
        let mut gw = Self::from_rows(&rows, header.slip, header.gamma)?;
        if gw.height != header.height || gw.width != header.width {
            return Err(Error::Config(format!(
                "header says {}x{}, grid is {}x{}",
                header.height, header.width, gw.height, gw.width
            )));
        }
        gw.seed = header.seed;
        Ok(gw)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

const MAX_RETRIES: usize = 100;

/// Random grid: each cell independently Lava with probability `lava_frac`,
/// Wall with `wall_frac`, else Empty; then Start and Goal on distinct
/// random Empty cells. Redrawn until the goal is reachable. Dynamics
/// default to slip 0.2 and discount 0.9.
pub fn generate_gridworld(
    rng: &mut RngStream,
    height: usize,
    width: usize,
    lava_frac: f64,
    wall_frac: f64,
) -> Result<GridWorld> {
    if !(lava_frac >= 0.0 && wall_frac >= 0.0 && lava_frac + wall_frac < 1.0) {
        return Err(contract(
            "generate_gridworld",
            format!("fractions lava {lava_frac}, wall {wall_frac} must be >= 0 and sum below 1"),
        ));
    }
    if height * width < 2 {
        return Err(contract("generate_gridworld", "grid needs at least two cells"));
    }
    let seed = rng.seed();
    for _ in 0..MAX_RETRIES {
        let mut cells: Vec<Cell> = (0..height * width)
            .map(|_| {
                let u = rng.uniform();
                if u < lava_frac {
                    Cell::Lava
                } else if u < lava_frac + wall_frac {
                    Cell::Wall
                } else {
                    Cell::Empty
                }
            })
            .collect();
        let empty: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == Cell::Empty).collect();
        if empty.len() < 2 {
            continue;
        }
        let si = rng.index(empty.len());
        let mut gi = rng.index(empty.len() - 1);
        if gi >= si {
            gi += 1;
        }
        cells[empty[si]] = Cell::Start;
        cells[empty[gi]] = Cell::Goal;
        let mut gw = GridWorld::new(height, width, cells, 0.2, 0.9)?;
        if gw.goal_reachable() {
            gw.seed = Some(seed);
            return Ok(gw);
        }
    }
    Err(Error::Unreachable { retries: MAX_RETRIES })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_fractions_give_open_grid() {
        let gw = generate_gridworld(&mut RngStream::new(1), 5, 7, 0.0, 0.0).unwrap();
        assert_eq!(gw.count(Cell::Empty), 33);
        assert_eq!(gw.count(Cell::Start), 1);
        assert_eq!(gw.count(Cell::Goal), 1);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let a = generate_gridworld(&mut RngStream::new(9), 16, 16, 0.25, 0.1).unwrap();
        let b = generate_gridworld(&mut RngStream::new(9), 16, 16, 0.25, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn start_and_goal_distinct_for_tiny_grid() {
        for seed in 0..50 {
            let gw = generate_gridworld(&mut RngStream::new(seed), 1, 2, 0.0, 0.0).unwrap();
            assert_eq!(gw.count(Cell::Goal), 1);
        }
    }

    #[test]
    fn blocked_goal_and_degenerate_sizes() {
        let gw = GridWorld::from_rows(&["S#G"], 0.0, 0.9).unwrap();
        assert!(!gw.goal_reachable());
        assert!(matches!(
            generate_gridworld(&mut RngStream::new(0), 1, 1, 0.0, 0.0),
            Err(Error::Contract { .. })
        ));
    }

    #[test]
    fn deterministic_moves_and_walls() {
        let gw = GridWorld::from_rows(&["S.G", ".#L"], 0.0, 0.9).unwrap();
        assert_eq!(gw.transition_distribution(0, Action::Right), vec![(1, 1.0, 0.0)]);
        assert_eq!(gw.transition_distribution(1, Action::Right), vec![(2, 1.0, 1.0)]);
        assert_eq!(gw.transition_distribution(1, Action::Down), vec![(1, 1.0, 0.0)]);
        assert_eq!(gw.transition_distribution(2, Action::Down), vec![(5, 1.0, -1.0)]);
        assert_eq!(gw.transition_distribution(0, Action::Up), vec![(0, 1.0, 0.0)]);
        let mut rng = RngStream::new(0);
        assert_eq!(gw.transition(2, Action::NoOp, &mut rng), (2, 1.0));
    }

    #[test]
    fn slip_mass_is_uniform_over_all_actions() {
        let gw = GridWorld::from_rows(&["...", ".S.", "..G"], 0.2, 0.9).unwrap();
        let d = gw.transition_distribution(4, Action::Up);
        assert_eq!(d.len(), 5);
        assert!((d[0].1 - 0.84).abs() < 1e-15);
        assert!(d[1..].iter().all(|o| (o.1 - 0.04).abs() < 1e-15));
    }

    #[test]
    fn text_roundtrip() {
        let mut gw = generate_gridworld(&mut RngStream::new(4), 6, 9, 0.25, 0.1).unwrap();
        gw.slip_prob = 0.3;
        let text = gw.to_text();
        assert!(text.starts_with('{'));
        assert_eq!(GridWorld::from_text(&text).unwrap(), gw);
        assert!(GridWorld::from_text("{}\nS.G\n").is_err());
        assert!(GridWorld::from_rows(&["S.X"], 0.0, 0.9).is_err());
        assert!(GridWorld::from_rows(&["..G"], 0.0, 0.9).is_err());
    }
}
