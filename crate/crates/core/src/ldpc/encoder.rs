use super::ParityCheckMatrix;
use crate::channel::ComplexSignal;
use crate::error::{invalid, Result};

/// Systematic encoder obtained by Gaussian elimination of `H` over GF(2).
///
/// Message bits occupy the non-pivot columns; each pivot column is a parity of
/// message bits.
#[derive(Debug, Clone)]
pub struct SystematicEncoder {
    n: usize,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// For each parity position, the packed mask of message bits it depends on.
    parity_masks: Vec<Vec<u64>>,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl SystematicEncoder {
    pub fn new(h: &ParityCheckMatrix) -> Result<Self> {
        let (n, m) = (h.n(), h.m());
        let w = words(n);
        let mut rows: Vec<Vec<u64>> = h
            .rows()
            .iter()
            .map(|r| {
                let mut v = vec![0u64; w];
                for &c in r {
                    v[c / 64] ^= 1 << (c % 64);
                }
                v
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        // Pivot from the last column backwards so message bits sit at the front when possible.
        for col in (0..n).rev() {
            if rank == m {
                break;
            }
            let (wi, bit) = (col / 64, 1u64 << (col % 64));
            let Some(p) = (rank..m).find(|&r| rows[r][wi] & bit != 0) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[wi] & bit != 0 {
                    row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        let mut is_pivot = vec![false; n];
        pivots.iter().for_each(|&p| is_pivot[p] = true);
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let k = info_positions.len();
        if k == 0 {
            return Err(crate::Error::CodeConstruction("parity-check matrix has full column rank; no message bits".into()));
        }
        let parity_masks = (0..rank)
            .map(|r| {
                let mut mask = vec![0u64; words(k)];
                for (j, &c) in info_positions.iter().enumerate() {
                    if rows[r][c / 64] >> (c % 64) & 1 == 1 {
                        mask[j / 64] |= 1 << (j % 64);
                    }
                }
                mask
            })
            .collect();
        Ok(Self { n, info_positions, parity_positions: pivots, parity_masks })
    }

    /// Fails unless the code dimension equals `k`.
    pub fn require_dimension(self, k: usize) -> Result<Self> {
        if self.k() != k {
            return Err(crate::Error::CodeConstruction(format!(
                "matrix supports dimension {} but {k} was requested",
                self.k()
            )));
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        let k = self.k();
        if message.len() != k {
            return Err(invalid(format!("message has {} bits, code dimension is {k}", message.len())));
        }
        let mut packed = vec![0u64; words(k)];
        let mut out = vec![0u8; self.n];
        for (j, (&b, &pos)) in message.iter().zip(&self.info_positions).enumerate() {
            let b = b & 1;
            out[pos] = b;
            packed[j / 64] |= (b as u64) << (j % 64);
        }
        for (mask, &pos) in self.parity_masks.iter().zip(&self.parity_positions) {
            let ones: u32 = mask.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            out[pos] = (ones & 1) as u8;
        }
        Ok(out)
    }

    /// Message bits read back from a codeword.
    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }
}

/// BPSK: bit 0 to `+√P`, bit 1 to `-√P`, on the in-phase axis.
pub fn bpsk_map(bits: &[u8], power: f64) -> Result<ComplexSignal> {
    let a = power.sqrt();
    let v: Vec<f64> = bits.iter().map(|&b| if b & 1 == 0 { a } else { -a }).collect();
    ComplexSignal::from_real(&v)
}
