//! Rectangular lattice storage with toroidal Moore neighbourhoods.
//!
//! Neighbours are always listed in the order NW, N, NE, W, E, SW, S, SE, and
//! a 3×3 patch places the centre at index 4 with the neighbours around it in
//! that same order, so a patch is simply the 3×3 window read row-major.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Moore neighbourhood support.
pub const MOORE_SUPPORT: usize = 8;

/// Length of a local configuration patch (centre plus Moore neighbours).
pub const PATCH_LEN: usize = 9;

/// Index of the centre cell inside a patch.
pub const PATCH_CENTER: usize = 4;

/// Patch positions of the eight neighbours, in neighbour order.
pub const NEIGHBOR_SLOTS: [usize; MOORE_SUPPORT] = [0, 1, 2, 3, 5, 6, 7, 8];

/// (row, col) offsets in neighbour order NW, N, NE, W, E, SW, S, SE.
pub const MOORE_OFFSETS: [(isize, isize); MOORE_SUPPORT] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// A local configuration pattern: the centre value and its Moore neighbours.
pub type Patch<F> = [F; PATCH_LEN];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteIndex {
    pub row: usize,
    pub col: usize,
}

impl SiteIndex {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Global state of the field: a `rows × cols` grid stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<F> {
    rows: usize,
    cols: usize,
    cells: Vec<F>,
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows < 3 || cols < 3 {
        return Err(Error::InvalidParameter(format!(
            "lattice must be at least 3x3, got {rows}x{cols}"
        )));
    }
    Ok(())
}

impl<F: Scalar> Configuration<F> {
    pub fn new(rows: usize, cols: usize, cells: Vec<F>) -> Result<Self> {
        check_shape(rows, cols)?;
        if cells.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "expected {} cells for a {rows}x{cols} lattice, got {}",
                rows * cols,
                cells.len()
            )));
        }
        if let Some(k) = cells.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("cell {k} is not finite")));
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn constant(rows: usize, cols: usize, value: F) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// Build a configuration from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Result<Self> {
        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                cells.push(f(r, c));
            }
        }
        Self::new(rows, cols, cells)
    }

    /// Independent Gaussian cells, deterministic in `seed`.
    pub fn iid_gaussian(rows: usize, cols: usize, mean: F, variance: F, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::iid_gaussian_with(rows, cols, mean, variance, &mut rng)
    }

    pub fn iid_gaussian_with<R: Rng + ?Sized>(
        rows: usize,
        cols: usize,
        mean: F,
        variance: F,
        rng: &mut R,
    ) -> Result<Self> {
        if !(variance > F::zero()) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "variance must be positive and finite, got {variance}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidParameter(format!("mean must be finite, got {mean}")));
        }
        check_shape(rows, cols)?;
        let sd = variance.sqrt();
        let cells = (0..rows * cols)
            .map(|_| mean + sd * F::standard_normal(rng))
            .collect();
        Self::new(rows, cols, cells)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[F] {
        &self.cells
    }

    /// Mutable access for in-place sweeps. Sweeps may drive cells to
    /// non-finite values when the coupling is outside the model's stable
    /// range; analysis flags such states as degenerate.
    pub(crate) fn cells_mut(&mut self) -> &mut [F] {
        &mut self.cells
    }

    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|v| v.is_finite())
    }

    pub fn get(&self, site: SiteIndex) -> F {
        self.cells[self.linear(site)]
    }

    pub fn linear(&self, site: SiteIndex) -> usize {
        debug_assert!(site.row < self.rows && site.col < self.cols);
        site.row * self.cols + site.col
    }

    /// Linear indices of the eight Moore neighbours of `(row, col)`,
    /// wrapping toroidally.
    #[inline]
    pub fn neighbor_indices(&self, row: usize, col: usize) -> [usize; MOORE_SUPPORT] {
        neighbor_indices(self.rows, self.cols, row, col)
    }

    pub fn neighbors(&self, site: SiteIndex) -> Result<[F; MOORE_SUPPORT]> {
        if site.row >= self.rows || site.col >= self.cols {
            return Err(Error::InvalidInput(format!(
                "site ({}, {}) outside {}x{} lattice",
                site.row, site.col, self.rows, self.cols
            )));
        }
        let idx = self.neighbor_indices(site.row, site.col);
        Ok(idx.map(|k| self.cells[k]))
    }

    /// Sum of the neighbour values of `(row, col)`.
    #[inline]
    pub fn neighbor_sum(&self, row: usize, col: usize) -> F {
        self.neighbor_indices(row, col)
            .iter()
            .fold(F::zero(), |acc, &k| acc + self.cells[k])
    }

    pub fn patch(&self, site: SiteIndex) -> Patch<F> {
        let idx = self.neighbor_indices(site.row, site.col);
        let mut patch = [F::zero(); PATCH_LEN];
        patch[PATCH_CENTER] = self.get(site);
        for (slot, k) in NEIGHBOR_SLOTS.iter().zip(idx) {
            patch[*slot] = self.cells[k];
        }
        patch
    }

    /// One patch per site, ordered row-major by centre site.
    pub fn extract_patches(&self) -> Vec<Patch<F>> {
        let mut out = Vec::with_capacity(self.len());
        for row in 0..self.rows {
            for col in 0..self.cols {
                out.push(self.patch(SiteIndex { row, col }));
            }
        }
        out
    }

    /// Cyclic shift: the value at `(r, c)` moves to `(r + dr, c + dc)`.
    pub fn rolled(&self, dr: usize, dc: usize) -> Self {
        let mut cells = vec![F::zero(); self.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let to = ((r + dr) % self.rows) * self.cols + (c + dc) % self.cols;
                cells[to] = self.cells[r * self.cols + c];
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            cells,
        }
    }
}

#[inline]
pub(crate) fn neighbor_indices(rows: usize, cols: usize, row: usize, col: usize) -> [usize; MOORE_SUPPORT] {
    let up = if row == 0 { rows - 1 } else { row - 1 };
    let down = if row + 1 == rows { 0 } else { row + 1 };
    let left = if col == 0 { cols - 1 } else { col - 1 };
    let right = if col + 1 == cols { 0 } else { col + 1 };
    [
        up * cols + left,
        up * cols + col,
        up * cols + right,
        row * cols + left,
        row * cols + right,
        down * cols + left,
        down * cols + col,
        down * cols + right,
    ]
}

const SNAPSHOT_MAGIC: &str = "GMRF-SNAPSHOT";
const SNAPSHOT_VERSION: &str = "v1";

/// A configuration together with the inverse temperature it was sampled at.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<F> {
    pub config: Configuration<F>,
    pub beta_set: F,
}

impl<F: Scalar> Snapshot<F> {
    /// Text form: `GMRF-SNAPSHOT v1 <rows> <cols> <beta_set>` followed by one
    /// line per lattice row, values in 17-significant-digit scientific notation.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let cfg = &self.config;
        writeln!(
            out,
            "{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {} {} {:.16e}",
            cfg.rows, cfg.cols, self.beta_set
        )?;
        let mut line = String::new();
        for row in cfg.cells.chunks(cfg.cols) {
            line.clear();
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    line.push(' ');
                }
                write!(line, "{v:.16e}").expect("writing to a String cannot fail");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("snapshot text is ASCII")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Parse {
            what: "snapshot",
            line,
            reason,
        };
        let mut lines = input.lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return Err(err(1, "empty file".into())),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 || fields[0] != SNAPSHOT_MAGIC || fields[1] != SNAPSHOT_VERSION {
            return Err(err(1, format!("bad header {header:?}")));
        }
        let rows: usize = fields[2]
            .parse()
            .map_err(|_| err(1, format!("bad row count {:?}", fields[2])))?;
        let cols: usize = fields[3]
            .parse()
            .map_err(|_| err(1, format!("bad column count {:?}", fields[3])))?;
        let beta_set = F::parse_decimal(fields[4])
            .ok_or_else(|| err(1, format!("bad beta {:?}", fields[4])))?;

        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| err(1, "lattice size overflows".into()))?;
        let mut cells = Vec::with_capacity(expected);
        for (k, line) in lines.enumerate() {
            let line = line?;
            for tok in line.split_whitespace() {
                let v = F::parse_decimal(tok)
                    .ok_or_else(|| err(k + 2, format!("bad value {tok:?}")))?;
                cells.push(v);
            }
        }
        if cells.len() != expected {
            return Err(err(
                0,
                format!("expected {expected} values, found {}", cells.len()),
            ));
        }
        let config = Configuration::new(rows, cols, cells).map_err(|e| err(0, e.to_string()))?;
        Ok(Self { config, beta_set })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::read_from(text.as_bytes())
    }
}
