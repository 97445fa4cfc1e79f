//! Ratings ingestion, per-node partitioning and synthetic ratings.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{self, Purpose};

/// Default probability that a synthetic user rates a given movie.
pub const SYNTH_RATE_PROB: f64 = 0.1;

/// `rounds[t][u]` is the rating vector of the `u`-th user of round `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingsByRound {
    pub rounds: Vec<Vec<Vec<f64>>>,
}

impl RatingsByRound {
    pub fn user_vectors(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// `[t][i][u]`: round `t`'s users split contiguously over `nodes`.
    pub fn partition(&self, nodes: usize) -> Result<Vec<Vec<Vec<Vec<f64>>>>> {
        self.rounds.iter().map(|users| partition_users(users, nodes)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Data rows parsed, header excluded.
    pub rows: usize,
    /// Distinct users in the file.
    pub users: usize,
    /// Users kept: the first `T b` by first appearance.
    pub kept_users: usize,
    /// Rows of kept users dropped because `movieId >= n_movies`.
    pub excluded_rows: usize,
    /// Kept users with no rating among the first `n_movies` movies.
    pub empty_users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub ratings: RatingsByRound,
    pub report: IngestReport,
}

fn parse_field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str, line: usize) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {name} column"),
    })?;
    raw.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad {name} '{raw}'"),
    })
}

fn is_half_star(r: f64) -> bool {
    (0.5..=5.0).contains(&r) && (r * 2.0).fract() == 0.0
}

/// Read `userId,movieId,rating[,timestamp]` rows (header optional) and keep
/// the first `rounds * per_round` users in order of first appearance. Movie
/// ids index the rating vector directly; ids `>= n_movies` are dropped and
/// unrated movies are 0.
pub fn ingest_reader(reader: impl Read, n_movies: usize, rounds: usize, per_round: usize) -> Result<Ingested> {
    if n_movies == 0 || rounds == 0 || per_round == 0 {
        return Err(invalid("n_movies, T and b must all be positive"));
    }
    let needed = rounds * per_round;
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut order: HashMap<u64, usize> = HashMap::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut rows = 0;
    let mut excluded_rows = 0;
    for (k, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(k + 1, |p| p.line() as usize);
        if k == 0 && record.get(0).is_some_and(|f| f.parse::<u64>().is_err()) {
            continue;
        }
        if record.len() < 3 || record.len() > 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 or 4 columns, found {}", record.len()),
            });
        }
        let user: u64 = parse_field(&record, 0, "userId", line)?;
        let movie: usize = parse_field(&record, 1, "movieId", line)?;
        let rating: f64 = parse_field(&record, 2, "rating", line)?;
        if !is_half_star(rating) {
            return Err(Error::Parse {
                line,
                message: format!("rating {rating} is not a half-star value in 0.5..=5.0"),
            });
        }
        if record.len() == 4 {
            parse_field::<i64>(&record, 3, "timestamp", line)?;
        }
        rows += 1;
        let next = order.len();
        let slot = *order.entry(user).or_insert(next);
        if slot >= needed {
            continue;
        }
        if slot == vectors.len() {
            vectors.push(vec![0.0; n_movies]);
        }
        if movie < n_movies {
            vectors[slot][movie] = rating;
        } else {
            excluded_rows += 1;
        }
    }
    if order.len() < needed {
        return Err(Error::DataInsufficient {
            needed,
            found: order.len(),
        });
    }
    let empty_users = vectors.iter().filter(|v| v.iter().all(|r| *r == 0.0)).count();
    let rounds_out = vectors.chunks(per_round).map(<[Vec<f64>]>::to_vec).collect();
    Ok(Ingested {
        ratings: RatingsByRound { rounds: rounds_out },
        report: IngestReport {
            rows,
            users: order.len(),
            kept_users: needed,
            excluded_rows,
            empty_users,
        },
    })
}

pub fn ingest_ratings(path: &Path, n_movies: usize, rounds: usize, per_round: usize) -> Result<Ingested> {
    ingest_reader(std::fs::File::open(path)?, n_movies, rounds, per_round)
}

/// Contiguous slices of `users.len() / nodes` users; slice `i` goes to node `i`.
pub fn partition_users(users: &[Vec<f64>], nodes: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    if nodes == 0 || !users.len().is_multiple_of(nodes) {
        return Err(invalid(format!(
            "{} users per round cannot be split evenly over {nodes} nodes",
            users.len()
        )));
    }
    Ok(users.chunks(users.len() / nodes).map(<[Vec<f64>]>::to_vec).collect())
}

/// Every user rates every movie independently with probability `prob`, at a
/// level drawn uniformly from `levels`.
pub fn synth_ratings(
    seed: u64,
    rounds: usize,
    per_round: usize,
    n_movies: usize,
    levels: &[f64],
    prob: f64,
) -> Result<RatingsByRound> {
    if levels.is_empty() || levels.iter().any(|r| !is_half_star(*r)) {
        return Err(invalid("rating levels must be nonempty half-star values in 0.5..=5.0"));
    }
    if !(0.0..=1.0).contains(&prob) {
        return Err(invalid(format!("rating probability must lie in [0, 1], got {prob}")));
    }
    let mut rng = rng::stream(seed, Purpose::Synthetic, 0);
    let rounds = (0..rounds)
        .map(|_| {
            (0..per_round)
                .map(|_| {
                    (0..n_movies)
                        .map(|_| {
                            if rng.random::<f64>() < prob {
                                levels[rng.random_range(0..levels.len())]
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(RatingsByRound { rounds })
}

/// `0.5, 1.0, ..., 5.0`
pub fn all_levels() -> Vec<f64> {
    (1..=10).map(|k| k as f64 * 0.5).collect()
}
