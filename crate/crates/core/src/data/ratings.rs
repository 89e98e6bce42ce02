//! Ratings triples with densified ids, MovieLens readers/writers and a
//! synthetic low-rank generator.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::stream_rng;
use crate::{Error, Result};

/// One observed rating, indices already densified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Ratings with contiguous user/item ids in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsDataset {
    pub ratings: Vec<Rating>,
    pub n_users: usize,
    pub n_items: usize,
    /// Dense index -> original id.
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

impl RatingsDataset {
    pub fn n_ratings(&self) -> usize {
        self.ratings.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MovielensFormat {
    /// Lines "user::item::rating::timestamp".
    DoubleColonDat,
    /// Header plus "userId,movieId,rating,timestamp".
    Csv,
}

struct Densifier {
    map: HashMap<u64, usize>,
    ids: Vec<u64>,
}

impl Densifier {
    fn new() -> Self {
        Densifier {
            map: HashMap::new(),
            ids: Vec::new(),
        }
    }

    fn index(&mut self, id: u64) -> usize {
        *self.map.entry(id).or_insert_with(|| {
            self.ids.push(id);
            self.ids.len() - 1
        })
    }
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what} from {field:?}"),
    })
}

/// Parses MovieLens-style ratings. Ids are densified in first-seen
/// order; timestamps are discarded; ratings must lie in [1, 5].
pub fn parse_movielens(path: impl AsRef<Path>, format: MovielensFormat) -> Result<RatingsDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut users = Densifier::new();
    let mut items = Densifier::new();
    let mut ratings = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if format == MovielensFormat::Csv && i == 0 {
            // Header row.
            continue;
        }
        let fields: Vec<&str> = match format {
            MovielensFormat::DoubleColonDat => line.split("::").collect(),
            MovielensFormat::Csv => line.split(',').collect(),
        };
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let user: u64 = parse_field(fields[0], line_no, "user id")?;
        let item: u64 = parse_field(fields[1], line_no, "item id")?;
        let value: f64 = parse_field(fields[2], line_no, "rating")?;
        if !(1.0..=5.0).contains(&value) {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("rating {value} outside [1, 5]"),
            });
        }
        ratings.push(Rating {
            user: users.index(user),
            item: items.index(item),
            value,
        });
    }
    if ratings.is_empty() {
        return Err(Error::Contract(format!(
            "no ratings found in {}",
            path.display()
        )));
    }
    Ok(RatingsDataset {
        ratings,
        n_users: users.ids.len(),
        n_items: items.ids.len(),
        user_ids: users.ids,
        item_ids: items.ids,
    })
}

/// Writes a dataset back out in the given format, restoring original ids.
pub fn write_movielens(
    ds: &RatingsDataset,
    path: impl AsRef<Path>,
    format: MovielensFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    if format == MovielensFormat::Csv {
        writeln!(w, "userId,movieId,rating,timestamp").map_err(io_err)?;
    }
    for r in &ds.ratings {
        let (u, i) = (ds.user_ids[r.user], ds.item_ids[r.item]);
        match format {
            MovielensFormat::DoubleColonDat => {
                writeln!(w, "{}::{}::{}::0", u, i, r.value).map_err(io_err)?
            }
            MovielensFormat::Csv => writeln!(w, "{},{},{},0", u, i, r.value).map_err(io_err)?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct RatingsGenOptions {
    /// Round to the nearest star and clip to [1, 5].
    pub discretize: bool,
    /// Additive shift before discretization.
    pub offset: f64,
}

impl Default for RatingsGenOptions {
    fn default() -> Self {
        RatingsGenOptions {
            discretize: true,
            offset: 3.0,
        }
    }
}

/// Synthetic low-rank ratings: u*, v* iid Gaussian with per-coordinate
/// variance 1/sqrt(d) (so u^T v has unit variance), observations kept
/// independently with probability `density`, and
/// y = clip(round(u^T v + offset + noise), 1, 5) when discretizing.
/// Returns the dataset and the true factors (row-major, d per row).
pub fn gen_ratings_synthetic(
    n_users: usize,
    n_items: usize,
    d: usize,
    density: f64,
    sigma2: f64,
    seed: u64,
    opts: &RatingsGenOptions,
) -> Result<(RatingsDataset, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Contract(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    let mut rng = stream_rng(seed, "gen-ratings", 0);
    let coord_sd = (1.0 / (d as f64).sqrt()).sqrt();
    let factor = Normal::new(0.0, coord_sd).expect("finite sd");
    let draw_factors = |count: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..d).map(|_| factor.sample(rng)).collect())
            .collect()
    };
    let u: Vec<Vec<f64>> = draw_factors(n_users, &mut rng);
    let v: Vec<Vec<f64>> = draw_factors(n_items, &mut rng);
    let noise = if sigma2 > 0.0 {
        Some(Normal::new(0.0, sigma2.sqrt()).expect("finite sd"))
    } else {
        None
    };

    let mut ratings = Vec::new();
    for i in 0..n_users {
        for j in 0..n_items {
            if density < 1.0 && rng.random::<f64>() >= density {
                continue;
            }
            let mut y: f64 = u[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum::<f64>() + opts.offset;
            if let Some(n) = &noise {
                y += n.sample(&mut rng);
            }
            if opts.discretize {
                y = y.round().clamp(1.0, 5.0);
            }
            ratings.push(Rating {
                user: i,
                item: j,
                value: y,
            });
        }
    }
    let ds = RatingsDataset {
        ratings,
        n_users,
        n_items,
        user_ids: (0..n_users as u64).collect(),
        item_ids: (0..n_items as u64).collect(),
    };
    Ok((ds, u, v))
}
