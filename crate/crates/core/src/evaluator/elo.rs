//! ELO ratings over faceoff rounds.

use serde::{Deserialize, Serialize};

pub const DEFAULT_K: f64 = 32.0;
pub const INITIAL_RATING: f64 = 1000.0;

/// Result of one round from side 1's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win,
    Draw,
    Loss,
}

impl Outcome {
    /// Actual score `S ∈ {1, ½, 0}`.
    pub fn score(self) -> f64 {
        match self {
            Outcome::Win => 1.0,
            Outcome::Draw => 0.5,
            Outcome::Loss => 0.0,
        }
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Win => Outcome::Loss,
            Outcome::Draw => Outcome::Draw,
            Outcome::Loss => Outcome::Win,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub rating: f64,
    pub games: u64,
    pub k: f64,
}

impl Default for Rating {
    fn default() -> Self {
        Rating { rating: INITIAL_RATING, games: 0, k: DEFAULT_K }
    }
}

impl Rating {
    pub fn new(rating: f64, k: f64) -> Self {
        Rating { rating, games: 0, k }
    }
}

/// `E₁ = 1 / (1 + 10^((R₂ − R₁)/400))`.
pub fn expected_score(r1: f64, r2: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r2 - r1) / 400.0))
}

/// Rating changes `(K₁(S₁ − E₁), K₂(S₂ − E₂))` with `E₂ = 1 − E₁` and
/// `S₂ = 1 − S₁`. With equal `K` the second is exactly the negated first.
pub fn elo_deltas(r1: Rating, r2: Rating, outcome: Outcome) -> (f64, f64) {
    let e1 = expected_score(r1.rating, r2.rating);
    let s1 = outcome.score();
    let d1 = r1.k * (s1 - e1);
    let d2 = if r1.k == r2.k { -d1 } else { r2.k * ((1.0 - s1) - (1.0 - e1)) };
    (d1, d2)
}

/// `R′ = R + K(S − E)` for both sides.
pub fn elo_update(r1: Rating, r2: Rating, outcome: Outcome) -> (Rating, Rating) {
    let (d1, d2) = elo_deltas(r1, r2, outcome);
    (
        Rating { rating: r1.rating + d1, games: r1.games + 1, k: r1.k },
        Rating { rating: r2.rating + d2, games: r2.games + 1, k: r2.k },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_ratings() {
        assert_eq!(expected_score(1200.0, 1200.0), 0.5);
        let (a, b) = elo_update(Rating::default(), Rating::default(), Outcome::Win);
        assert_eq!(a.rating, 1016.0);
        assert_eq!(b.rating, 984.0);
        let (a, b) = elo_update(Rating::default(), Rating::default(), Outcome::Draw);
        assert_eq!((a.rating, b.rating), (1000.0, 1000.0));
        assert_eq!((a.games, b.games), (1, 1));
    }

    #[test]
    fn four_hundred_points_is_ten_to_one() {
        let e = expected_score(1400.0, 1000.0);
        assert!((e - 10.0 / 11.0).abs() < 1e-15);
    }
}
