//! Block splitting of the phase space and the spectral data attached to it.
//!
//! Coordinates are ordered as stable blocks `X_1..X_k`, then the center block
//! `X_c`, then unstable blocks `X_{k+1}..X_p`. Projections are coordinate
//! selections.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};

/// Spectral class of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockClass {
    Stable,
    Center,
    Unstable,
}

/// One diagonal block of the linear part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub size: usize,
    pub modulus: f64,
    pub class: BlockClass,
}

/// Envelope constants of the dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelopes {
    pub lambda_s_minus: f64,
    pub lambda_s_plus: f64,
    pub lambda_u_minus: f64,
    pub lambda_u_plus: f64,
    /// Perturbation margin of the center rates.
    pub margin: f64,
    /// Dichotomy constant `K >= 1`.
    pub dichotomy_k: f64,
}

/// Block dimensions, per-block moduli and envelope constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralStructure {
    stable: Vec<Block>,
    center: usize,
    unstable: Vec<Block>,
    pub envelopes: Envelopes,
}

/// Named coordinate projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    S,
    C,
    U,
    CS,
    CU,
    SU,
    /// Single block, numbered `1..=p` in coordinate order (stable blocks
    /// first, then unstable blocks; the center block is not numbered).
    Block(usize),
}

impl Projection {
    /// Parses `s`, `c`, `u`, `cs`, `cu`, `su` or a block number.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "s" => Ok(Projection::S),
            "c" => Ok(Projection::C),
            "u" => Ok(Projection::U),
            "cs" | "sc" => Ok(Projection::CS),
            "cu" | "uc" => Ok(Projection::CU),
            "su" | "us" => Ok(Projection::SU),
            other => other
                .parse::<usize>()
                .ok()
                .filter(|&i| i >= 1)
                .map(Projection::Block)
                .ok_or_else(|| Error::input(format!("unknown projection name `{other}`"))),
        }
    }
}

impl SpectralStructure {
    /// Builds a structure from stable blocks, center dimension and unstable
    /// blocks. Blocks must be listed in increasing modulus.
    pub fn new(
        stable: Vec<Block>,
        center: usize,
        unstable: Vec<Block>,
        envelopes: Envelopes,
    ) -> Result<Self> {
        if stable.iter().any(|b| b.class != BlockClass::Stable)
            || unstable.iter().any(|b| b.class != BlockClass::Unstable)
        {
            return Err(Error::input("block class does not match its position"));
        }
        if stable.iter().chain(unstable.iter()).any(|b| b.size == 0) {
            return Err(Error::input("blocks must have positive size"));
        }
        Ok(Self {
            stable,
            center,
            unstable,
            envelopes,
        })
    }

    /// Builds a structure from a block list in any order of classes.
    pub fn from_blocks(blocks: &[Block], envelopes: Envelopes) -> Result<Self> {
        let mut stable = Vec::new();
        let mut unstable = Vec::new();
        let mut center = 0;
        let mut phase = 0;
        for b in blocks {
            let rank = match b.class {
                BlockClass::Stable => 0,
                BlockClass::Center => 1,
                BlockClass::Unstable => 2,
            };
            if rank < phase {
                return Err(Error::input(
                    "blocks must be ordered stable, center, unstable",
                ));
            }
            phase = rank;
            match b.class {
                BlockClass::Stable => stable.push(b.clone()),
                BlockClass::Center => center += b.size,
                BlockClass::Unstable => unstable.push(b.clone()),
            }
        }
        Self::new(stable, center, unstable, envelopes)
    }

    pub fn dim(&self) -> usize {
        self.dim_s() + self.center + self.dim_u()
    }

    pub fn dim_s(&self) -> usize {
        self.stable.iter().map(|b| b.size).sum()
    }

    pub fn dim_c(&self) -> usize {
        self.center
    }

    pub fn dim_u(&self) -> usize {
        self.unstable.iter().map(|b| b.size).sum()
    }

    pub fn stable_blocks(&self) -> &[Block] {
        &self.stable
    }

    pub fn unstable_blocks(&self) -> &[Block] {
        &self.unstable
    }

    /// All blocks in coordinate order, the center block included when present.
    pub fn blocks(&self) -> Vec<Block> {
        let mut out = self.stable.clone();
        if self.center > 0 {
            out.push(Block {
                size: self.center,
                modulus: 1.0,
                class: BlockClass::Center,
            });
        }
        out.extend(self.unstable.iter().cloned());
        out
    }

    pub fn s_range(&self) -> Range<usize> {
        0..self.dim_s()
    }

    pub fn c_range(&self) -> Range<usize> {
        let s = self.dim_s();
        s..s + self.center
    }

    pub fn u_range(&self) -> Range<usize> {
        let cs = self.dim_s() + self.center;
        cs..cs + self.dim_u()
    }

    pub fn cs_range(&self) -> Range<usize> {
        0..self.dim_s() + self.center
    }

    pub fn cu_range(&self) -> Range<usize> {
        self.dim_s()..self.dim()
    }

    /// Coordinate range of hyperbolic block `i` (1-based, stable then unstable).
    pub fn block_range(&self, i: usize) -> Result<Range<usize>> {
        let k = self.stable.len();
        let p = k + self.unstable.len();
        if i == 0 || i > p {
            return Err(Error::input(format!("block index {i} outside 1..={p}")));
        }
        if i <= k {
            let start: usize = self.stable[..i - 1].iter().map(|b| b.size).sum();
            Ok(start..start + self.stable[i - 1].size)
        } else {
            let j = i - k - 1;
            let start = self.u_range().start
                + self.unstable[..j].iter().map(|b| b.size).sum::<usize>();
            Ok(start..start + self.unstable[j].size)
        }
    }

    /// Ranges of the unstable blocks relative to the start of `X_u`.
    pub fn unstable_local_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.unstable
            .iter()
            .map(|b| {
                let r = start..start + b.size;
                start += b.size;
                r
            })
            .collect()
    }

    /// Coordinate indices selected by a projection.
    pub fn indices(&self, which: Projection) -> Result<Vec<usize>> {
        let v: Vec<usize> = match which {
            Projection::S => self.s_range().collect(),
            Projection::C => self.c_range().collect(),
            Projection::U => self.u_range().collect(),
            Projection::CS => self.cs_range().collect(),
            Projection::CU => self.cu_range().collect(),
            Projection::SU => self.s_range().chain(self.u_range()).collect(),
            Projection::Block(i) => self.block_range(i)?.collect(),
        };
        Ok(v)
    }

    /// Returns the named component of `x` (coordinate selection).
    pub fn split(&self, x: &DVector<f64>, which: Projection) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let idx = self.indices(which)?;
        Ok(DVector::from_iterator(idx.len(), idx.iter().map(|&i| x[i])))
    }

    /// Zeroes every coordinate not selected by `which`.
    pub fn project(&self, x: &DVector<f64>, which: Projection) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        let idx = self.indices(which)?;
        let mut out = DVector::zeros(x.len());
        for i in idx {
            out[i] = x[i];
        }
        Ok(out)
    }

    /// Places a component back into a full-dimensional vector of zeros.
    pub fn embed(&self, component: &DVector<f64>, which: Projection) -> Result<DVector<f64>> {
        let idx = self.indices(which)?;
        if idx.len() != component.len() {
            return Err(Error::input(format!(
                "component has length {}, projection expects {}",
                component.len(),
                idx.len()
            )));
        }
        let mut out = DVector::zeros(self.dim());
        for (k, i) in idx.into_iter().enumerate() {
            out[i] = component[k];
        }
        Ok(out)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::input(format!(
                "vector has dimension {}, structure expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Block-diagonal matrix with `modulus * I` on every block.
    pub fn diagonal_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        let mut i = 0;
        for b in self.blocks() {
            for _ in 0..b.size {
                a[(i, i)] = b.modulus;
                i += 1;
            }
        }
        a
    }
}

/// Copies the rows and columns `r` x `c` out of a matrix.
pub fn sub_matrix(m: &DMatrix<f64>, r: Range<usize>, c: Range<usize>) -> DMatrix<f64> {
    m.view((r.start, c.start), (r.len(), c.len())).into_owned()
}

/// Copies a coordinate range out of a vector.
pub fn sub_vector(v: &DVector<f64>, r: Range<usize>) -> DVector<f64> {
    v.rows(r.start, r.len()).into_owned()
}

/// Writes `src` into `dst[r]`.
pub fn set_sub_vector(dst: &mut DVector<f64>, r: Range<usize>, src: &DVector<f64>) {
    dst.rows_mut(r.start, r.len()).copy_from(src);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> Envelopes {
        Envelopes {
            lambda_s_minus: 0.4,
            lambda_s_plus: 0.6,
            lambda_u_minus: 1.5,
            lambda_u_plus: 5.0,
            margin: 0.1,
            dichotomy_k: 1.0,
        }
    }

    fn blk(size: usize, modulus: f64, class: BlockClass) -> Block {
        Block {
            size,
            modulus,
            class,
        }
    }

    fn three() -> SpectralStructure {
        SpectralStructure::from_blocks(
            &[
                blk(1, 0.5, BlockClass::Stable),
                blk(1, 1.0, BlockClass::Center),
                blk(1, 2.0, BlockClass::Unstable),
            ],
            env(),
        )
        .unwrap()
    }

    #[test]
    fn cs_selection() {
        let s = three();
        let x = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let cs = s.split(&x, Projection::CS).unwrap();
        assert_eq!(cs.as_slice(), &[0.1, 0.2]);
    }

    #[test]
    fn block_selection_in_two_unstable_blocks() {
        let s = SpectralStructure::from_blocks(
            &[
                blk(1, 0.5, BlockClass::Stable),
                blk(1, 1.0, BlockClass::Center),
                blk(1, 2.0, BlockClass::Unstable),
                blk(1, 4.0, BlockClass::Unstable),
            ],
            env(),
        )
        .unwrap();
        assert_eq!(s.indices(Projection::Block(2)).unwrap(), vec![2]);
        assert_eq!(s.indices(Projection::Block(3)).unwrap(), vec![3]);
        assert!(s.indices(Projection::Block(4)).is_err());
    }

    #[test]
    fn unknown_name_and_dimension_mismatch() {
        assert!(Projection::parse("xs").is_err());
        let s = three();
        assert!(s.split(&DVector::zeros(4), Projection::S).is_err());
    }
}
