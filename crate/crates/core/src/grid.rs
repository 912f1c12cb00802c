//! Grid-world environment: map representation, movement, reward, and the
//! geometry used for peer visibility.
//!
//! Maps are rectangular ASCII grids. `.` is free space, `#` is an obstacle,
//! digits `0`-`9` mark goals (the digit is the goal id) and letters `a`-`t`
//! mark agent spawn cells (`a` is agent 0). Coordinates are `(x, y)` with the
//! origin at the top-left corner and `y` growing downward, row-major.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use thiserror::Error;

/// A cell coordinate. `x` is the column, `y` the row.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct Position {
    pub x: u32,
    pub y: u32,
}

impl Position {
    pub fn new(x: u32, y: u32) -> Self {
        Position { x, y }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The five movement primitives available to every agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ActionKind {
    Stay = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
}

impl ActionKind {
    pub const COUNT: usize = 5;
    pub const ALL: [ActionKind; Self::COUNT] = [
        ActionKind::Stay,
        ActionKind::Up,
        ActionKind::Down,
        ActionKind::Left,
        ActionKind::Right,
    ];

    /// Stable index used for one-hot encodings and policy outputs.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ActionKind> {
        Self::ALL.get(index).copied()
    }

    /// Displacement in `(dx, dy)`; `Up` decreases `y`.
    pub fn delta(self) -> (i32, i32) {
        match self {
            ActionKind::Stay => (0, 0),
            ActionKind::Up => (0, -1),
            ActionKind::Down => (0, 1),
            ActionKind::Left => (-1, 0),
            ActionKind::Right => (1, 0),
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ActionKind::Stay => "stay",
            ActionKind::Up => "up",
            ActionKind::Down => "down",
            ActionKind::Left => "left",
            ActionKind::Right => "right",
        };
        f.write_str(name)
    }
}

/// Reward shaping knobs. `lambda_stay` is the penalty magnitude for staying
/// in place away from the goal and must lie in `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RewardParams {
    pub lambda_stay: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { lambda_stay: 0.5 }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.lambda_stay > 0.0 && self.lambda_stay < 1.0) {
            return Err(MapError::BadRewardParams {
                lambda_stay: self.lambda_stay,
            });
        }
        Ok(())
    }
}

/// Result of applying an action: where the agent ended up and whether the
/// attempted move was admissible.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    pub position: Position,
    pub valid: bool,
}

/// A spawn marker: where an agent starts and which goal it pursues.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Spawn {
    pub position: Position,
    pub goal: usize,
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("map is not rectangular: row {row} has width {got}, expected {expected}")]
    NotRectangular { row: usize, expected: usize, got: usize },
    #[error("unknown map character {c:?} at ({x}, {y})")]
    UnknownChar { c: char, x: u32, y: u32 },
    #[error("goal {id} appears more than once")]
    DuplicateGoal { id: usize },
    #[error("agent marker {marker:?} appears more than once")]
    DuplicateAgent { marker: char },
    #[error("goal ids are not contiguous: goal {id} is missing")]
    MissingGoal { id: usize },
    #[error("agent markers are not contiguous: agent {id} is missing")]
    MissingAgent { id: usize },
    #[error("agent {id} has no goal assignment")]
    UnassignedAgent { id: usize },
    #[error("assignment references agent {id}, but the map has {agents} spawn markers")]
    UnknownAgent { id: usize, agents: usize },
    #[error("agent {agent} is assigned goal {goal}, but the map has {goals} goals")]
    UnknownGoal { agent: usize, goal: usize, goals: usize },
    #[error("agent {id} is assigned more than once")]
    DuplicateAssignment { id: usize },
    #[error("bad directive line {row}: {text:?}")]
    BadDirective { row: usize, text: String },
    #[error("position {pos} lies outside the {width}x{height} map")]
    OutOfBounds { pos: Position, width: u32, height: u32 },
    #[error("{what} at {pos} coincides with an obstacle")]
    OnObstacle { what: &'static str, pos: Position },
    #[error("spawn positions overlap at {pos}")]
    SpawnOverlap { pos: Position },
    #[error("lambda_stay = {lambda_stay} is outside (0, 1)")]
    BadRewardParams { lambda_stay: f64 },
    #[error("failed to read map: {0}")]
    Io(#[from] std::io::Error),
}

/// An immutable, validated grid world.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMap {
    width: u32,
    height: u32,
    obstacles: Vec<bool>,
    goals: Vec<Position>,
    spawns: Vec<Spawn>,
}

impl GridMap {
    /// Builds a map from raw parts, enforcing the structural invariants:
    /// everything in bounds, goals pairwise distinct and off obstacles,
    /// spawn cells pairwise distinct and off obstacles, and every spawn's
    /// goal id in range.
    pub fn new(
        width: u32,
        height: u32,
        obstacles: Vec<bool>,
        goals: Vec<Position>,
        spawns: Vec<Spawn>,
    ) -> Result<GridMap, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::Empty);
        }
        assert_eq!(obstacles.len(), (width * height) as usize);
        let map = GridMap {
            width,
            height,
            obstacles,
            goals,
            spawns,
        };
        for (id, &g) in map.goals.iter().enumerate() {
            if !map.in_bounds(g) {
                return Err(MapError::OutOfBounds {
                    pos: g,
                    width,
                    height,
                });
            }
            if map.is_obstacle(g) {
                return Err(MapError::OnObstacle { what: "goal", pos: g });
            }
            if map.goals[..id].contains(&g) {
                return Err(MapError::DuplicateGoal { id });
            }
        }
        for (id, s) in map.spawns.iter().enumerate() {
            if !map.in_bounds(s.position) {
                return Err(MapError::OutOfBounds {
                    pos: s.position,
                    width,
                    height,
                });
            }
            if map.is_obstacle(s.position) {
                return Err(MapError::OnObstacle {
                    what: "spawn",
                    pos: s.position,
                });
            }
            if map.spawns[..id].iter().any(|p| p.position == s.position) {
                return Err(MapError::SpawnOverlap { pos: s.position });
            }
            if s.goal >= map.goals.len() {
                return Err(MapError::UnknownGoal {
                    agent: id,
                    goal: s.goal,
                    goals: map.goals.len(),
                });
            }
        }
        Ok(map)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn is_obstacle(&self, p: Position) -> bool {
        self.obstacles[(p.y * self.width + p.x) as usize]
    }

    /// Free means in-bounds and not an obstacle.
    pub fn is_free(&self, p: Position) -> bool {
        self.in_bounds(p) && !self.is_obstacle(p)
    }

    /// Goal positions ordered by goal id.
    pub fn goals(&self) -> &[Position] {
        &self.goals
    }

    pub fn goal_count(&self) -> usize {
        self.goals.len()
    }

    /// Spawns ordered by agent id.
    pub fn spawns(&self) -> &[Spawn] {
        &self.spawns
    }
}

const SPAWN_MARKERS: &str = "abcdefghijklmnopqrst";

/// Parses the grid portion of a map together with an explicit
/// `(agent id, goal id)` assignment list.
pub fn parse_map(text: &str, assignments: &[(usize, usize)]) -> Result<GridMap, MapError> {
    let mut rows: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        rows.push(line);
    }
    if rows.is_empty() {
        return Err(MapError::Empty);
    }
    let width = rows[0].chars().count();
    let height = rows.len();
    let mut obstacles = vec![false; width * height];
    let mut goals: Vec<Option<Position>> = Vec::new();
    let mut spawn_cells: Vec<Option<Position>> = Vec::new();
    for (y, row) in rows.iter().enumerate() {
        let n = row.chars().count();
        if n != width {
            return Err(MapError::NotRectangular {
                row: y,
                expected: width,
                got: n,
            });
        }
        for (x, c) in row.chars().enumerate() {
            let pos = Position::new(x as u32, y as u32);
            match c {
                '.' => {}
                '#' => obstacles[y * width + x] = true,
                '0'..='9' => {
                    let id = c as usize - '0' as usize;
                    if goals.len() <= id {
                        goals.resize(id + 1, None);
                    }
                    if goals[id].is_some() {
                        return Err(MapError::DuplicateGoal { id });
                    }
                    goals[id] = Some(pos);
                }
                'a'..='t' => {
                    let id = c as usize - 'a' as usize;
                    if spawn_cells.len() <= id {
                        spawn_cells.resize(id + 1, None);
                    }
                    if spawn_cells[id].is_some() {
                        return Err(MapError::DuplicateAgent { marker: c });
                    }
                    spawn_cells[id] = Some(pos);
                }
                _ => {
                    return Err(MapError::UnknownChar {
                        c,
                        x: pos.x,
                        y: pos.y,
                    })
                }
            }
        }
    }
    let goals: Vec<Position> = goals
        .iter()
        .enumerate()
        .map(|(id, g)| g.ok_or(MapError::MissingGoal { id }))
        .collect::<Result<_, _>>()?;
    let spawn_cells: Vec<Position> = spawn_cells
        .iter()
        .enumerate()
        .map(|(id, s)| s.ok_or(MapError::MissingAgent { id }))
        .collect::<Result<_, _>>()?;

    let mut assigned: Vec<Option<usize>> = vec![None; spawn_cells.len()];
    for &(agent, goal) in assignments {
        if agent >= spawn_cells.len() {
            return Err(MapError::UnknownAgent {
                id: agent,
                agents: spawn_cells.len(),
            });
        }
        if assigned[agent].is_some() {
            return Err(MapError::DuplicateAssignment { id: agent });
        }
        if goal >= goals.len() {
            return Err(MapError::UnknownGoal {
                agent,
                goal,
                goals: goals.len(),
            });
        }
        assigned[agent] = Some(goal);
    }
    let spawns: Vec<Spawn> = spawn_cells
        .iter()
        .zip(assigned.iter())
        .enumerate()
        .map(|(id, (&position, goal))| {
            Ok(Spawn {
                position,
                goal: goal.ok_or(MapError::UnassignedAgent { id })?,
            })
        })
        .collect::<Result<_, MapError>>()?;

    GridMap::new(width as u32, height as u32, obstacles, goals, spawns)
}

/// Parses a self-contained map file: optional `@assign` directive lines
/// followed by the ASCII grid.
///
/// Directive syntax: `@assign a=0 b=1 ...` where the letter is a spawn
/// marker and the digit a goal id.
pub fn parse_map_file(text: &str) -> Result<GridMap, MapError> {
    let mut assignments: Vec<(usize, usize)> = Vec::new();
    let mut grid = String::new();
    for (row, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('@') {
            let bad = || MapError::BadDirective {
                row,
                text: line.to_string(),
            };
            let rest = rest.strip_prefix("assign").ok_or_else(bad)?;
            for token in rest.split_whitespace() {
                let (marker, goal) = token.split_once('=').ok_or_else(bad)?;
                let mut chars = marker.chars();
                let m = match (chars.next(), chars.next()) {
                    (Some(m), None) if SPAWN_MARKERS.contains(m) => m,
                    _ => return Err(bad()),
                };
                let goal: usize = goal.parse().map_err(|_| bad())?;
                assignments.push((m as usize - 'a' as usize, goal));
            }
        } else {
            grid.push_str(line);
            grid.push('\n');
        }
    }
    parse_map(&grid, &assignments)
}

/// Reads and parses a map file from disk.
pub fn load_map(path: &Path) -> Result<GridMap, MapError> {
    let text = std::fs::read_to_string(path)?;
    parse_map_file(&text)
}

/// Serializes a map back to the self-contained file format.
/// `parse_map_file(&render_map(&m))` reproduces `m` exactly.
pub fn render_map(map: &GridMap) -> String {
    let mut out = String::new();
    if !map.spawns().is_empty() {
        out.push_str("@assign");
        for (id, s) in map.spawns().iter().enumerate() {
            let marker = SPAWN_MARKERS.as_bytes()[id] as char;
            out.push_str(&format!(" {marker}={}", s.goal));
        }
        out.push('\n');
    }
    for y in 0..map.height() {
        for x in 0..map.width() {
            let pos = Position::new(x, y);
            let mut c = if map.is_obstacle(pos) { '#' } else { '.' };
            if let Some(goal) = map.goals().iter().position(|&g| g == pos) {
                c = char::from_digit(goal as u32, 10).unwrap();
            }
            if let Some(agent) = map.spawns().iter().position(|s| s.position == pos) {
                c = SPAWN_MARKERS.as_bytes()[agent] as char;
            }
            out.push(c);
        }
        out.push('\n');
    }
    out
}

/// Applies an action. Moves that would leave the map or enter an obstacle
/// keep the agent in place and are reported as invalid. `Stay` is always
/// valid. Agents never block one another, so other agents play no part here.
pub fn transition(map: &GridMap, pos: Position, action: ActionKind) -> StepOutcome {
    debug_assert!(map.is_free(pos), "agent must stand on a free cell");
    let (dx, dy) = action.delta();
    let target = Position {
        x: pos.x.wrapping_add_signed(dx),
        y: pos.y.wrapping_add_signed(dy),
    };
    if target == pos {
        return StepOutcome {
            position: pos,
            valid: true,
        };
    }
    if map.is_free(target) {
        StepOutcome {
            position: target,
            valid: true,
        }
    } else {
        StepOutcome {
            position: pos,
            valid: false,
        }
    }
}

/// Euclidean distance between cell centers.
pub fn distance(a: Position, b: Position) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    (dx * dx + dy * dy).sqrt()
}

/// Per-step reward. The branches are evaluated strictly top-down:
/// reaching the goal dominates, then invalid moves, then deliberately
/// staying put, and finally the distance shaping term for an actual move.
/// The result always lies in `[-1, 1]`.
pub fn reward(
    prev: Position,
    new: Position,
    goal: Position,
    move_was_valid: bool,
    params: &RewardParams,
) -> f64 {
    if new == goal {
        1.0
    } else if !move_was_valid {
        -1.0
    } else if new == prev {
        -params.lambda_stay
    } else {
        1.0 / distance(new, goal)
    }
}

/// Whether `b` falls inside the square observation window of radius `c`
/// centered on `a` (Chebyshev distance at most `c`). Symmetric in its
/// arguments; radii are validated to be positive at configuration time.
pub fn in_observation_range(a: Position, b: Position, c: u32) -> bool {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    dx.max(dy) <= c
}

/// Room decomposition of a map's free cells.
///
/// A free cell is a *door* when the two in-bounds cells on opposite sides of
/// it (left/right or up/down) are both obstacles; rooms are the connected
/// components of the remaining free cells under 4-connectivity. Doors belong
/// to no room. Room ids are assigned in row-major discovery order.
#[derive(Clone, Debug)]
pub struct RoomMap {
    width: u32,
    rooms: Vec<Option<usize>>,
    room_count: usize,
    doors: Vec<Position>,
}

impl RoomMap {
    pub fn room_count(&self) -> usize {
        self.room_count
    }

    /// The room containing `p`, or `None` for obstacles and doors.
    pub fn room_of(&self, p: Position) -> Option<usize> {
        self.rooms[(p.y * self.width + p.x) as usize]
    }

    pub fn doors(&self) -> &[Position] {
        &self.doors
    }
}

fn is_door(map: &GridMap, p: Position) -> bool {
    if !map.is_free(p) {
        return false;
    }
    let blocked = |dx: i32, dy: i32| {
        let q = Position {
            x: p.x.wrapping_add_signed(dx),
            y: p.y.wrapping_add_signed(dy),
        };
        map.in_bounds(q) && map.is_obstacle(q)
    };
    (blocked(-1, 0) && blocked(1, 0)) || (blocked(0, -1) && blocked(0, 1))
}

/// Flood-fills the map's free cells into rooms.
pub fn decompose_rooms(map: &GridMap) -> RoomMap {
    let w = map.width();
    let h = map.height();
    let mut rooms: Vec<Option<usize>> = vec![None; (w * h) as usize];
    let mut doors = Vec::new();
    let mut door_mask = vec![false; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let p = Position::new(x, y);
            if is_door(map, p) {
                door_mask[(y * w + x) as usize] = true;
                doors.push(p);
            }
        }
    }
    let mut room_count = 0;
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let start = Position::new(x, y);
            let idx = (y * w + x) as usize;
            if !map.is_free(start) || door_mask[idx] || rooms[idx].is_some() {
                continue;
            }
            let room = room_count;
            room_count += 1;
            rooms[idx] = Some(room);
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                for (dx, dy) in [(0, -1), (0, 1), (-1, 0), (1, 0)] {
                    let q = Position {
                        x: p.x.wrapping_add_signed(dx),
                        y: p.y.wrapping_add_signed(dy),
                    };
                    if !map.is_free(q) {
                        continue;
                    }
                    let qi = (q.y * w + q.x) as usize;
                    if door_mask[qi] || rooms[qi].is_some() {
                        continue;
                    }
                    rooms[qi] = Some(room);
                    queue.push_back(q);
                }
            }
        }
    }
    RoomMap {
        width: w,
        rooms,
        room_count,
        doors,
    }
}

/// Structural advisories for a map: an agent that spawns in the same
/// enclosed room as its own goal. These are warnings, not errors.
pub fn room_warnings(map: &GridMap) -> Vec<String> {
    let rooms = decompose_rooms(map);
    let mut out = Vec::new();
    for (id, s) in map.spawns().iter().enumerate() {
        let goal_pos = map.goals()[s.goal];
        if let (Some(a), Some(b)) = (rooms.room_of(s.position), rooms.room_of(goal_pos)) {
            if a == b {
                out.push(format!(
                    "agent {id} spawns in the same room as its goal {} at {goal_pos}",
                    s.goal
                ));
            }
        }
    }
    out
}
