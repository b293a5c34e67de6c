//! Basis indexing, magnetization sectors, sparse operators and state carriers.
//!
//! Conventions used throughout the crate:
//!
//! * `|0⟩` is spin up (`σ^z = +1`), `|1⟩` is spin down.
//! * A basis index stores one bit per site. Channel site `j` sits on bit
//!   `N - j`, the sender site `0` on bit `N`, and the isolated partner `0'`
//!   on bit `N + 1` (the most significant one). The channel therefore
//!   occupies the contiguous low bits and `0'` only doubles the space.
//! * Magnetization labels are the eigenvalue of `Σ_i σ_i^z`, i.e. the number
//!   of up spins minus the number of down spins.

use std::fmt;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat4 = Matrix4<C64>;

/// Largest channel that may be requested.
pub const MAX_CHANNEL_SITES: usize = 20;

/// Dense matrices over the full Hilbert space are refused above this many sites.
pub const DENSE_SITE_LIMIT: usize = 12;

/// Full-space sparse operators are refused above this many sites; larger
/// problems must go through [`SectorBasis`].
pub const FULL_SPACE_SITE_LIMIT: usize = 16;

const ZERO: C64 = C64::new(0.0, 0.0);

/// A site label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Site {
    /// The isolated partner `0'` of the sender singlet.
    Prime,
    /// Site `0` (sender) or channel site `1..=N`.
    Chain(usize),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Prime => write!(f, "0'"),
            Site::Chain(j) => write!(f, "{j}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SystemGeometry {
    n_channel: usize,
    includes_sender_pair: bool,
}

impl SystemGeometry {
    /// Channel sites `1..=n_channel` only.
    pub fn channel(n_channel: usize) -> Result<Self> {
        Self::new(n_channel, false)
    }

    /// Channel plus the sender pair `0'`, `0`.
    pub fn with_sender_pair(n_channel: usize) -> Result<Self> {
        Self::new(n_channel, true)
    }

    pub fn new(n_channel: usize, includes_sender_pair: bool) -> Result<Self> {
        if !(2..=MAX_CHANNEL_SITES).contains(&n_channel) {
            return Err(Error::InvalidGeometry(format!(
                "n_channel = {n_channel} outside supported range 2..={MAX_CHANNEL_SITES}"
            )));
        }
        Ok(Self {
            n_channel,
            includes_sender_pair,
        })
    }

    pub fn n_channel(&self) -> usize {
        self.n_channel
    }

    pub fn includes_sender_pair(&self) -> bool {
        self.includes_sender_pair
    }

    pub fn total_sites(&self) -> usize {
        if self.includes_sender_pair {
            self.n_channel + 2
        } else {
            self.n_channel
        }
    }

    /// Dimension of the full computational basis.
    pub fn dim(&self) -> usize {
        1usize << self.total_sites()
    }

    /// The same channel without the sender pair.
    pub fn channel_only(&self) -> Self {
        Self {
            n_channel: self.n_channel,
            includes_sender_pair: false,
        }
    }

    /// The same channel with the sender pair attached.
    pub fn joint(&self) -> Self {
        Self {
            n_channel: self.n_channel,
            includes_sender_pair: true,
        }
    }

    /// Bit position of `site` in a basis index.
    pub fn bit(&self, site: Site) -> Result<u32> {
        let n = self.n_channel;
        let bit = match site {
            Site::Prime if self.includes_sender_pair => n + 1,
            Site::Chain(0) if self.includes_sender_pair => n,
            Site::Chain(j) if (1..=n).contains(&j) => n - j,
            _ => {
                return Err(Error::InvalidSite {
                    site: site.to_string(),
                    n_channel: n,
                })
            }
        };
        Ok(bit as u32)
    }

    /// All sites ordered from the most significant bit down.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.total_sites());
        if self.includes_sender_pair {
            out.push(Site::Prime);
            out.push(Site::Chain(0));
        }
        out.extend((1..=self.n_channel).map(Site::Chain));
        out
    }
}

/// `σ^z` eigenvalue of the spin stored on `bit`.
#[inline]
pub fn sigma_z(index: usize, bit: u32) -> f64 {
    if (index >> bit) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Total `Σ σ^z` of a basis index over `n_sites` bits.
#[inline]
pub fn magnetization(index: usize, n_sites: usize) -> i32 {
    n_sites as i32 - 2 * index.count_ones() as i32
}

/// The basis states of one magnetization sector, with an `O(1)` reverse
/// lookup table from full-space index to sector offset.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_sites: usize,
    magnetization: i32,
    states: Vec<usize>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl SectorBasis {
    pub fn new(n_sites: usize, magnetization: i32) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_CHANNEL_SITES + 2 {
            return Err(Error::InvalidGeometry(format!(
                "sector basis over {n_sites} sites"
            )));
        }
        let n = n_sites as i32;
        if magnetization.abs() > n || (n - magnetization) % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "magnetization {magnetization} impossible for {n_sites} sites"
            )));
        }
        let down = ((n - magnetization) / 2) as u32;
        let states = states_with_popcount(n_sites, down);
        let mut lookup = vec![ABSENT; 1usize << n_sites];
        for (offset, &s) in states.iter().enumerate() {
            lookup[s] = offset as u32;
        }
        Ok(Self {
            n_sites,
            magnetization,
            states,
            lookup,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn magnetization(&self) -> i32 {
        self.magnetization
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Full-space basis indices, ascending.
    pub fn states(&self) -> &[usize] {
        &self.states
    }

    #[inline]
    pub fn state(&self, offset: usize) -> usize {
        self.states[offset]
    }

    #[inline]
    pub fn index_of(&self, state: usize) -> Option<usize> {
        match self.lookup.get(state) {
            Some(&o) if o != ABSENT => Some(o as usize),
            _ => None,
        }
    }

    /// Embed a sector vector into the full `2^n` space.
    pub fn embed(&self, amplitudes: &[C64]) -> Vec<C64> {
        let mut full = vec![ZERO; 1usize << self.n_sites];
        for (&s, &a) in self.states.iter().zip(amplitudes) {
            full[s] = a;
        }
        full
    }
}

/// All `n`-bit integers with exactly `k` bits set, in increasing order.
fn states_with_popcount(n: usize, k: u32) -> Vec<usize> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(0);
        return out;
    }
    let limit = 1usize << n;
    let mut v: usize = (1usize << k) - 1;
    while v < limit {
        out.push(v);
        // Gosper's hack: next integer with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

/// A real sparse matrix in CSR layout.
///
/// Every Hamiltonian in this crate is real symmetric in the computational
/// basis, so values are stored as `f64` and applied to complex vectors.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    hermitian: bool,
}

const PARALLEL_MATVEC_DIM: usize = 1 << 15;

impl SparseOperator {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>, hermitian: bool) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c as u32);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian,
        }
    }

    /// Build row by row; `row` is called for each row index in order and
    /// must push `(col, value)` pairs with distinct columns.
    pub fn from_rows<F>(dim: usize, hermitian: bool, row: F) -> Self
    where
        F: Fn(usize, &mut Vec<(usize, f64)>) + Sync,
    {
        let rows: Vec<Vec<(usize, f64)>> = (0..dim)
            .into_par_iter()
            .map_init(Vec::new, |buf, r| {
                buf.clear();
                row(r, buf);
                let mut out = buf.clone();
                out.sort_unstable_by_key(|&(c, _)| c);
                out
            })
            .collect();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for r in rows {
            for (c, v) in r {
                cols.push(c as u32);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
            hermitian,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// The flag given at construction.
    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Nonzero entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.vals[span])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    /// True when the entry set is symmetric within `tol`.
    pub fn check_hermitian(&self, tol: f64) -> bool {
        self.entries().all(|(r, c, v)| (self.get(c, r) - v).abs() <= tol)
    }

    /// `out = A x` for complex vectors.
    pub fn matvec_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        let kernel = |(r, o): (usize, &mut C64)| {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *o = acc;
        };
        if self.dim >= PARALLEL_MATVEC_DIM {
            out.par_iter_mut().enumerate().for_each(kernel);
        } else {
            out.iter_mut().enumerate().for_each(kernel);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.dim];
        self.matvec_into(x, &mut out);
        out
    }

    /// `out = A x` for real vectors.
    pub fn matvec_real_into(&self, x: &[f64], out: &mut [f64]) {
        let kernel = |(r, o): (usize, &mut f64)| {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k] as usize] * self.vals[k];
            }
            *o = acc;
        };
        if self.dim >= PARALLEL_MATVEC_DIM {
            out.par_iter_mut().enumerate().for_each(kernel);
        } else {
            out.iter_mut().enumerate().for_each(kernel);
        }
    }

    /// `⟨x|A|x⟩`.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let ax = self.apply(x);
        dot(x, &ax)
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        if self.dim > 1 << DENSE_SITE_LIMIT {
            return Err(Error::TooLarge(format!(
                "dense copy of a {}-dimensional operator",
                self.dim
            )));
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        Ok(m)
    }
}

/// `⟨a|b⟩`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// A pure state over the full computational basis of a geometry.
#[derive(Clone, Debug)]
pub struct PureState {
    geometry: SystemGeometry,
    amplitudes: Vec<C64>,
    sector: Option<i32>,
}

impl PureState {
    pub fn new(geometry: SystemGeometry, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != geometry.dim() {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for a {}-dimensional space",
                amplitudes.len(),
                geometry.dim()
            )));
        }
        Ok(Self {
            geometry,
            amplitudes,
            sector: None,
        })
    }

    /// Attach a magnetization label, checking that every nonzero amplitude
    /// lies in that sector.
    pub fn with_sector(mut self, sector: i32) -> Result<Self> {
        let n = self.geometry.total_sites();
        if let Some((idx, _)) = self
            .amplitudes
            .iter()
            .enumerate()
            .find(|(i, a)| a.norm_sqr() > 0.0 && magnetization(*i, n) != sector)
        {
            return Err(Error::InvalidParameter(format!(
                "basis state {idx} is outside sector {sector}"
            )));
        }
        self.sector = Some(sector);
        Ok(self)
    }

    /// Computational basis state.
    pub fn basis(geometry: SystemGeometry, index: usize) -> Result<Self> {
        let mut amps = vec![ZERO; geometry.dim()];
        *amps.get_mut(index).ok_or_else(|| {
            Error::InvalidParameter(format!("basis index {index} out of range"))
        })? = C64::new(1.0, 0.0);
        let n = geometry.total_sites();
        Self::new(geometry, amps)?.with_sector(magnetization(index, n))
    }

    pub fn geometry(&self) -> SystemGeometry {
        self.geometry
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn sector(&self) -> Option<i32> {
        self.sector
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    fn require_normalized(&self) -> Result<()> {
        let n = self.norm();
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }

    /// Split into magnetization sectors carrying weight. Each component holds
    /// the full sector sub-vector in ascending basis order.
    pub fn sector_decompose(&self) -> Result<Vec<SectorComponent>> {
        self.require_normalized()?;
        let n = self.geometry.total_sites();
        let mut by_sector: std::collections::BTreeMap<i32, SectorComponent> = Default::default();
        for (i, &a) in self.amplitudes.iter().enumerate() {
            let m = magnetization(i, n);
            let comp = by_sector.entry(m).or_insert_with(|| SectorComponent {
                magnetization: m,
                indices: Vec::new(),
                amplitudes: Vec::new(),
            });
            comp.indices.push(i);
            comp.amplitudes.push(a);
        }
        Ok(by_sector
            .into_values()
            .rev()
            .filter(|c| c.weight() > 0.0)
            .collect())
    }

    /// Inverse of [`PureState::sector_decompose`].
    pub fn assemble(geometry: SystemGeometry, parts: &[SectorComponent]) -> Result<Self> {
        let mut amps = vec![ZERO; geometry.dim()];
        for p in parts {
            for (&i, &a) in p.indices.iter().zip(&p.amplitudes) {
                *amps.get_mut(i).ok_or_else(|| {
                    Error::InvalidParameter(format!("basis index {i} out of range"))
                })? += a;
            }
        }
        let state = Self::new(geometry, amps)?;
        Ok(match parts {
            [single] => state.with_sector(single.magnetization)?,
            _ => state,
        })
    }
}

/// One magnetization sector of a decomposed state.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorComponent {
    pub magnetization: i32,
    pub indices: Vec<usize>,
    pub amplitudes: Vec<C64>,
}

impl SectorComponent {
    pub fn weight(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// A mixed state, either as an explicit density matrix or as a weighted
/// ensemble of pure branches.
#[derive(Clone, Debug)]
pub enum MixedState {
    Dense {
        geometry: SystemGeometry,
        matrix: DMatrix<C64>,
    },
    Ensemble {
        geometry: SystemGeometry,
        branches: Vec<(f64, PureState)>,
    },
}

impl MixedState {
    pub fn dense(geometry: SystemGeometry, matrix: DMatrix<C64>) -> Result<Self> {
        if geometry.total_sites() > DENSE_SITE_LIMIT {
            return Err(Error::TooLarge(format!(
                "dense density matrix over {} sites",
                geometry.total_sites()
            )));
        }
        if matrix.nrows() != geometry.dim() || matrix.ncols() != geometry.dim() {
            return Err(Error::InvalidParameter("density matrix shape".into()));
        }
        Ok(Self::Dense { geometry, matrix })
    }

    pub fn ensemble(geometry: SystemGeometry, branches: Vec<(f64, PureState)>) -> Result<Self> {
        if branches.iter().any(|(w, s)| *w < 0.0 || s.geometry() != geometry) {
            return Err(Error::InvalidParameter(
                "ensemble weights must be nonnegative and share one geometry".into(),
            ));
        }
        Ok(Self::Ensemble { geometry, branches })
    }

    /// `|ψ⟩⟨ψ|` as a dense matrix.
    pub fn from_pure(state: &PureState) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(state.amplitudes());
        Self::dense(state.geometry(), &v * v.adjoint())
    }

    pub fn geometry(&self) -> SystemGeometry {
        match self {
            Self::Dense { geometry, .. } | Self::Ensemble { geometry, .. } => *geometry,
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Dense { matrix, .. } => matrix.trace().re,
            Self::Ensemble { branches, .. } => branches
                .iter()
                .map(|(w, s)| w * s.norm().powi(2))
                .sum(),
        }
    }

    fn require_normalized(&self) -> Result<()> {
        let t = self.trace();
        if (t - 1.0).abs() > 1e-8 {
            return Err(Error::NotNormalized(t));
        }
        Ok(())
    }
}

/// States whose two-site marginals can be extracted.
pub trait TwoSiteReduce {
    /// Reduced density matrix on `(i, j)`, with `i` as the first qubit of
    /// the `|00⟩, |01⟩, |10⟩, |11⟩` basis.
    fn reduce_to_pair(&self, i: Site, j: Site) -> Result<Mat4>;
}

/// Trace out everything except sites `i` and `j`.
pub fn partial_trace_two_sites<S: TwoSiteReduce + ?Sized>(state: &S, i: Site, j: Site) -> Result<Mat4> {
    state.reduce_to_pair(i, j)
}

fn pair_bits(geometry: &SystemGeometry, i: Site, j: Site) -> Result<(u32, u32)> {
    if i == j {
        return Err(Error::InvalidSite {
            site: format!("{i} (repeated)"),
            n_channel: geometry.n_channel(),
        });
    }
    Ok((geometry.bit(i)?, geometry.bit(j)?))
}

/// Accumulate `Σ_rest ψ(a, rest) ψ*(b, rest)` for a full-space vector.
pub(crate) fn pure_pair_marginal(amps: &[C64], bi: u32, bj: u32) -> Mat4 {
    let mi = 1usize << bi;
    let mj = 1usize << bj;
    let mut rho = Mat4::zeros();
    for x in 0..amps.len() {
        if x & (mi | mj) != 0 {
            continue;
        }
        let v = [amps[x], amps[x | mj], amps[x | mi], amps[x | mi | mj]];
        for a in 0..4 {
            if v[a] == ZERO {
                continue;
            }
            for b in 0..4 {
                rho[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    rho
}

impl TwoSiteReduce for PureState {
    fn reduce_to_pair(&self, i: Site, j: Site) -> Result<Mat4> {
        let (bi, bj) = pair_bits(&self.geometry, i, j)?;
        self.require_normalized()?;
        Ok(pure_pair_marginal(&self.amplitudes, bi, bj))
    }
}

impl TwoSiteReduce for MixedState {
    fn reduce_to_pair(&self, i: Site, j: Site) -> Result<Mat4> {
        let geometry = self.geometry();
        let (bi, bj) = pair_bits(&geometry, i, j)?;
        self.require_normalized()?;
        match self {
            Self::Dense { matrix, .. } => Ok(dense_pair_marginal(matrix, bi, bj)),
            Self::Ensemble { branches, .. } => {
                let mut rho = Mat4::zeros();
                for (w, s) in branches {
                    rho += pure_pair_marginal(s.amplitudes(), bi, bj) * C64::from(*w);
                }
                Ok(rho)
            }
        }
    }
}

/// Two-site marginal of a density matrix over `geometry` that is not
/// wrapped in a [`MixedState`] (no size limit, no trace check).
pub fn reduce_dense_pair(geometry: &SystemGeometry, matrix: &DMatrix<C64>, i: Site, j: Site) -> Result<Mat4> {
    let (bi, bj) = pair_bits(geometry, i, j)?;
    Ok(dense_pair_marginal(matrix, bi, bj))
}

pub(crate) fn dense_pair_marginal(matrix: &DMatrix<C64>, bi: u32, bj: u32) -> Mat4 {
    let mi = 1usize << bi;
    let mj = 1usize << bj;
    let offsets = [0, mj, mi, mi | mj];
    let mut rho = Mat4::zeros();
    for x in 0..matrix.nrows() {
        if x & (mi | mj) != 0 {
            continue;
        }
        for a in 0..4 {
            for b in 0..4 {
                rho[(a, b)] += matrix[(x | offsets[a], x | offsets[b])];
            }
        }
    }
    rho
}
