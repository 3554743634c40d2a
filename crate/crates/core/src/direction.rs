//! The finite direction algebra every other module is built on.
//!
//! Nine directions are distinguished: eight compass-style relations plus
//! `overlap` for coincident positions. Each direction is identified with a
//! unit offset on the integer grid, and the relation `r(A, B)` always means
//! `pos(A) - pos(B) = offset(r)` — i.e. the subject sits at the stated
//! direction *from* the object. Composing a chain of such facts is therefore
//! plain vector addition, and the answer to "where is S relative to O?" is the
//! direction whose signs match `pos(S) - pos(O)`.

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

/// A spatial relation between two grid positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Same cell.
    Overlap,
    /// Directly above.
    Top,
    /// Directly below.
    Down,
    /// Directly to the left.
    Left,
    /// Directly to the right.
    Right,
    /// Above and to the left.
    TopLeft,
    /// Above and to the right.
    TopRight,
    /// Below and to the left.
    DownLeft,
    /// Below and to the right.
    DownRight,
}

impl Direction {
    /// All nine directions, `Overlap` included.
    pub const ALL: [Direction; 9] = [
        Direction::Overlap,
        Direction::Top,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::TopLeft,
        Direction::TopRight,
        Direction::DownLeft,
        Direction::DownRight,
    ];

    /// The eight directions a story step or an answer can take (everything
    /// except `Overlap`; walks never revisit a cell).
    pub const COMPASS: [Direction; 8] = [
        Direction::Top,
        Direction::Down,
        Direction::Left,
        Direction::Right,
        Direction::TopLeft,
        Direction::TopRight,
        Direction::DownLeft,
        Direction::DownRight,
    ];

    /// Canonical lower-snake name, as used in emitted ASP facts.
    pub fn canonical(self) -> &'static str {
        match self {
            Direction::Overlap => "overlap",
            Direction::Top => "top",
            Direction::Down => "down",
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::TopLeft => "top_left",
            Direction::TopRight => "top_right",
            Direction::DownLeft => "down_left",
            Direction::DownRight => "down_right",
        }
    }

    /// Parses a canonical name only (no synonyms); see [`normalize`] for the
    /// synonym-aware version.
    pub fn from_canonical(name: &str) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| d.canonical() == name)
    }
}

/// A displacement between two grid positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Offset {
    /// Rightward component.
    pub dx: i64,
    /// Upward component.
    pub dy: i64,
}

impl Offset {
    /// Component-wise negation.
    pub fn neg(self) -> Offset {
        Offset { dx: -self.dx, dy: -self.dy }
    }
}

/// An absolute cell on the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Position {
    /// Horizontal coordinate (grows rightward).
    pub x: i64,
    /// Vertical coordinate (grows upward).
    pub y: i64,
}

impl Position {
    /// The origin cell.
    pub const ORIGIN: Position = Position { x: 0, y: 0 };

    /// Displacement from `other` to `self`.
    pub fn delta(self, other: Position) -> Offset {
        Offset { dx: self.x - other.x, dy: self.y - other.y }
    }

    /// The cell one step away in direction `d`.
    pub fn step(self, d: Direction) -> Position {
        let o = offset_of(d);
        Position { x: self.x + o.dx, y: self.y + o.dy }
    }
}

/// Unit offset of a direction: `r(A, B)` asserts `pos(A) - pos(B) = offset_of(r)`.
pub fn offset_of(d: Direction) -> Offset {
    let (dx, dy) = match d {
        Direction::Overlap => (0, 0),
        Direction::Top => (0, 1),
        Direction::Down => (0, -1),
        Direction::Left => (-1, 0),
        Direction::Right => (1, 0),
        Direction::TopLeft => (-1, 1),
        Direction::TopRight => (1, 1),
        Direction::DownLeft => (-1, -1),
        Direction::DownRight => (1, -1),
    };
    Offset { dx, dy }
}

/// Classifies an arbitrary displacement by the signs of its components.
///
/// This is the whole answering rule: however long the chain between two
/// entities, only the signs of the summed displacement matter.
pub fn direction_of(delta: Offset) -> Direction {
    match (delta.dx.signum(), delta.dy.signum()) {
        (0, 0) => Direction::Overlap,
        (0, 1) => Direction::Top,
        (0, -1) => Direction::Down,
        (-1, 0) => Direction::Left,
        (1, 0) => Direction::Right,
        (-1, 1) => Direction::TopLeft,
        (1, 1) => Direction::TopRight,
        (-1, -1) => Direction::DownLeft,
        (1, -1) => Direction::DownRight,
        _ => unreachable!("signum returns -1, 0 or 1"),
    }
}

/// The direction with the negated offset, i.e. the relation seen from the
/// other entity: `r(A, B)` holds iff `invert(r)(B, A)` holds.
pub fn invert(d: Direction) -> Direction {
    direction_of(offset_of(d).neg())
}

/// A relation term that is not in the accepted vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown relation term `{0}`")]
pub struct UnknownTerm(pub String);

/// Maps a relation term — canonical or synonym — to its direction.
///
/// The synonym table mirrors the solver knowledge module: compass words and
/// their `-Of` forms fold onto the four cardinal directions, and `up` is an
/// alias for `top`. Matching is exact (ASP atoms are case-sensitive), except
/// that the lenient fact parser in the evaluation harness lowercases its
/// input first, which this table also accepts ("northof" etc.).
pub fn normalize(term: &str) -> Result<Direction, UnknownTerm> {
    match term {
        "overlap" => Ok(Direction::Overlap),
        "top" | "up" | "north" | "northOf" | "northof" => Ok(Direction::Top),
        "down" | "south" | "southOf" | "southof" => Ok(Direction::Down),
        "left" | "west" | "westOf" | "westof" => Ok(Direction::Left),
        "right" | "east" | "eastOf" | "eastof" => Ok(Direction::Right),
        "top_left" => Ok(Direction::TopLeft),
        "top_right" => Ok(Direction::TopRight),
        "down_left" => Ok(Direction::DownLeft),
        "down_right" => Ok(Direction::DownRight),
        other => Err(UnknownTerm(other.to_string())),
    }
}
