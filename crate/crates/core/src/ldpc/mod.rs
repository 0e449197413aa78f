//! Binary LDPC codes: alist parity-check matrices, systematic encoding, BPSK mapping
//! and flooding belief-propagation decoding.
//!
//! LLR sign convention: a positive LLR favors bit 0, which is sent as `+√P`.

mod construct;
mod decoder;
mod encoder;

pub use construct::{design_code, peg_construct};
pub use decoder::{BpDecoder, BpVariant, DecodeOutcome, LLR_CLAMP};
pub use encoder::{bpsk_map, SystematicEncoder};

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Sparse binary parity-check matrix with `n` columns (code bits) and `m` rows (checks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    n: usize,
    m: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from its row supports (0-based column indices).
    pub fn from_rows(n: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let m = rows.len();
        if n == 0 || m == 0 {
            return Err(Error::CodeConstruction("matrix must have rows and columns".into()));
        }
        let mut cols = vec![Vec::new(); n];
        for (r, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::CodeConstruction(format!("row {r} is empty")));
            }
            for &c in row {
                if c >= n {
                    return Err(Error::CodeConstruction(format!("row {r} references column {c} >= {n}")));
                }
                if cols[c].last() == Some(&r) {
                    return Err(Error::CodeConstruction(format!("duplicate entry ({r},{c})")));
                }
                cols[c].push(r);
            }
        }
        if let Some(c) = cols.iter().position(|c| c.is_empty()) {
            return Err(Error::CodeConstruction(format!("column {c} is empty")));
        }
        let mut rows = rows;
        rows.iter_mut().for_each(|r| r.sort_unstable());
        Ok(Self { n, m, rows, cols })
    }

    /// Code length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of parity checks.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// True when every check is satisfied by the hard decisions.
    pub fn syndrome_is_zero(&self, bits: &[u8]) -> bool {
        self.rows.iter().all(|r| r.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)) == 0)
    }

    pub fn parse_alist(text: &str) -> Result<Self> {
        let lines: Vec<(usize, Vec<i64>)> = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                l.split_whitespace()
                    .map(|t| t.parse::<i64>().map_err(|_| alist_err(i + 1, format!("bad integer `{t}`"))))
                    .collect::<Result<Vec<_>>>()
                    .map(|v| (i + 1, v))
            })
            .collect::<Result<_>>()?;
        let mut it = lines.into_iter();
        let mut next = |what: &str| it.next().ok_or_else(|| alist_err(0, format!("unexpected end of file, expected {what}")));
        let (ln, dims) = next("dimensions")?;
        if dims.len() != 2 || dims[0] <= 0 || dims[1] <= 0 {
            return Err(alist_err(ln, "expected two positive dimensions"));
        }
        let (n, m) = (dims[0] as usize, dims[1] as usize);
        let (ln, maxes) = next("maximum degrees")?;
        if maxes.len() != 2 {
            return Err(alist_err(ln, "expected two maximum degrees"));
        }
        let (ln_c, col_deg) = next("column degrees")?;
        if col_deg.len() != n {
            return Err(alist_err(ln_c, format!("expected {n} column degrees")));
        }
        let (ln_r, row_deg) = next("row degrees")?;
        if row_deg.len() != m {
            return Err(alist_err(ln_r, format!("expected {m} row degrees")));
        }
        if let Some(i) = row_deg.iter().position(|&d| d <= 0) {
            return Err(alist_err(ln_r, format!("row {} has zero degree", i + 1)));
        }
        if let Some(i) = col_deg.iter().position(|&d| d <= 0) {
            return Err(alist_err(ln_c, format!("column {} has zero degree", i + 1)));
        }
        if col_deg.iter().max() != Some(&maxes[0]) || row_deg.iter().max() != Some(&maxes[1]) {
            return Err(alist_err(ln, "maximum degrees disagree with degree lists"));
        }
        let mut col_lists = Vec::with_capacity(n);
        for (c, &deg) in col_deg.iter().enumerate() {
            let (ln, v) = next("column index list")?;
            let idx: Vec<usize> = v.iter().filter(|&&x| x != 0).map(|&x| x as usize).collect();
            if idx.len() != deg as usize || idx.iter().any(|&x| x > m) || v.iter().any(|&x| x < 0) {
                return Err(alist_err(ln, format!("column {} list disagrees with its degree", c + 1)));
            }
            col_lists.push(idx);
        }
        let mut rows = Vec::with_capacity(m);
        for (r, &deg) in row_deg.iter().enumerate() {
            let (ln, v) = next("row index list")?;
            let idx: Vec<usize> = v.iter().filter(|&&x| x != 0).map(|&x| x as usize - 1).collect();
            if idx.len() != deg as usize || idx.iter().any(|&x| x >= n) || v.iter().any(|&x| x < 0) {
                return Err(alist_err(ln, format!("row {} list disagrees with its degree", r + 1)));
            }
            rows.push(idx);
        }
        let h = Self::from_rows(n, rows).map_err(|e| alist_err(0, e.to_string()))?;
        for (c, list) in col_lists.iter().enumerate() {
            let mut a: Vec<usize> = list.iter().map(|x| x - 1).collect();
            a.sort_unstable();
            if a != h.cols[c] {
                return Err(alist_err(0, format!("column {} list inconsistent with row lists", c + 1)));
            }
        }
        Ok(h)
    }

    pub fn to_alist(&self) -> String {
        let mut s = String::new();
        let cd: Vec<usize> = self.cols.iter().map(Vec::len).collect();
        let rd: Vec<usize> = self.rows.iter().map(Vec::len).collect();
        let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "{} {}", self.n, self.m).unwrap();
        writeln!(s, "{} {}", cd.iter().max().unwrap(), rd.iter().max().unwrap()).unwrap();
        writeln!(s, "{}", join(&mut cd.iter().copied())).unwrap();
        writeln!(s, "{}", join(&mut rd.iter().copied())).unwrap();
        for c in &self.cols {
            writeln!(s, "{}", join(&mut c.iter().map(|x| x + 1))).unwrap();
        }
        for r in &self.rows {
            writeln!(s, "{}", join(&mut r.iter().map(|x| x + 1))).unwrap();
        }
        s
    }
}

fn alist_err(line: usize, message: impl Into<String>) -> Error {
    Error::Alist { line, message: message.into() }
}

pub fn load_parity_matrix(path: impl AsRef<Path>) -> Result<ParityCheckMatrix> {
    let text = std::fs::read_to_string(path)?;
    ParityCheckMatrix::parse_alist(&text)
}

/// Codes bundled with the library, by name.
pub const SHIPPED_CODES: &[(&str, &str)] = &[
    ("ldpc_32_16", include_str!("../../codes/ldpc_32_16.alist")),
    ("ldpc_128_64", include_str!("../../codes/ldpc_128_64.alist")),
    ("ldpc_200_100", include_str!("../../codes/ldpc_200_100.alist")),
    ("ldpc_400_100", include_str!("../../codes/ldpc_400_100.alist")),
];

/// A parity-check matrix together with its systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    pub matrix: Arc<ParityCheckMatrix>,
    pub encoder: Arc<SystematicEncoder>,
}

impl LdpcCode {
    pub fn new(matrix: ParityCheckMatrix) -> Result<Self> {
        let encoder = SystematicEncoder::new(&matrix)?;
        Ok(Self { matrix: Arc::new(matrix), encoder: Arc::new(encoder) })
    }

    /// A bundled code by name, or an alist file path.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some((_, text)) = SHIPPED_CODES.iter().find(|(n, _)| *n == name_or_path) {
            return Self::new(ParityCheckMatrix::parse_alist(text)?);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(Error::CodeConstruction(format!("unknown code `{name_or_path}`: not bundled and no such file")));
        }
        Self::new(load_parity_matrix(path)?)
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn k(&self) -> usize {
        self.encoder.k()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "4 3\n2 3\n1 2 2 1\n2 3 2\n1\n1 2\n2 3\n3\n1 2\n2 3 4\n3 1\n";

    #[test]
    fn toy_alist_round_trip() {
        let toy = "4 3\n2 3\n1 2 2 1\n2 3 1\n1\n1 2\n2 3\n2\n1 2\n2 3 4\n3\n";
        let h = ParityCheckMatrix::parse_alist(toy).unwrap();
        assert_eq!((h.n(), h.m()), (4, 3));
        assert_eq!(h.rows().iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 3, 1]);
        assert_eq!(h.cols().iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 2, 2, 1]);
        assert_eq!(ParityCheckMatrix::parse_alist(&h.to_alist()).unwrap(), h);
    }

    #[test]
    fn inconsistent_alist_rejected() {
        assert!(ParityCheckMatrix::parse_alist(TOY).is_err());
        let zero_row = "2 2\n1 1\n1 1\n1 0\n1\n1\n2\n\n";
        assert!(ParityCheckMatrix::parse_alist(zero_row).is_err());
        assert!(ParityCheckMatrix::parse_alist("3 x\n").is_err());
    }

    #[test]
    fn shipped_codes_have_stated_dimensions() {
        for (name, n, k) in [("ldpc_32_16", 32, 16), ("ldpc_128_64", 128, 64), ("ldpc_200_100", 200, 100), ("ldpc_400_100", 400, 100)] {
            let code = LdpcCode::load(name).unwrap();
            assert_eq!((code.n(), code.k()), (n, k), "{name}");
            // all-ones is not a codeword, so BPSK sign flips do not map codewords to codewords
            assert!(!code.matrix.syndrome_is_zero(&vec![1u8; n]));
        }
        assert!(LdpcCode::load("no_such_code").is_err());
    }
}
