//! Token embedding tables in the plain-text interchange format
//! (`V D` header, then `token v1 ... vD` per line).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::neural::seeded_rng;

/// Range of the uniform distribution used by [`EmbeddingTable::random_init`].
pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    vocab_index: HashMap<String, usize>,
    matrix: Vec<f64>,
    dim: usize,
    unk_row: usize,
}

impl EmbeddingTable {
    /// Read a table; the `<unk>` row serves misses, or row 0 when absent.
    pub fn load_text<R: BufRead>(source: R) -> Result<Self> {
        let mut lines = source.lines();
        let header = lines.next().ok_or_else(|| Error::parse(1, "missing header"))??;
        let mut it = header.split_whitespace();
        let (v, d) = match (it.next(), it.next(), it.next()) {
            (Some(v), Some(d), None) => (v.parse::<usize>(), d.parse::<usize>()),
            _ => return Err(Error::parse(1, "header must be `V D`")),
        };
        let (v, d) = match (v, d) {
            (Ok(v), Ok(d)) if v > 0 && d > 0 => (v, d),
            _ => return Err(Error::parse(1, "header must hold two positive integers")),
        };
        let mut tokens = Vec::with_capacity(v);
        let mut vocab_index = HashMap::with_capacity(v);
        let mut matrix = Vec::with_capacity(v * d);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            if tokens.len() == v {
                return Err(Error::parse(lineno, format!("more than {v} rows")));
            }
            let mut fields = line.split(' ').filter(|f| !f.is_empty());
            let token = fields.next().ok_or_else(|| Error::parse(lineno, "empty row"))?;
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(lineno, "non-numeric value"))?;
            if values.len() != d {
                return Err(Error::parse(lineno, format!("expected {d} values, found {}", values.len())));
            }
            if vocab_index.insert(token.to_string(), tokens.len()).is_some() {
                return Err(Error::parse(lineno, format!("duplicate token {token}")));
            }
            tokens.push(token.to_string());
            matrix.extend(values);
        }
        if tokens.len() != v {
            return Err(Error::parse(tokens.len() + 2, format!("expected {v} rows, found {}", tokens.len())));
        }
        let unk_row = vocab_index.get("<unk>").copied().unwrap_or(0);
        Ok(EmbeddingTable {
            tokens,
            vocab_index,
            matrix,
            dim: d,
            unk_row,
        })
    }

    pub fn save_text<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "{} {}", self.tokens.len(), self.dim)?;
        for (i, t) in self.tokens.iter().enumerate() {
            let row: Vec<String> = self.row(i).iter().map(f64::to_string).collect();
            writeln!(sink, "{t} {}", row.join(" "))?;
        }
        Ok(())
    }

    /// Seeded table with entries uniform in `[-0.05, 0.05]`; rows are named
    /// by their index.
    pub fn random_init(vocab_size: usize, dim: usize, seed: u64) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::input("vocab_size and dim must be positive"));
        }
        let mut rng = seeded_rng(seed);
        let matrix = (0..vocab_size * dim)
            .map(|_| rng.gen_range(-INIT_RANGE..=INIT_RANGE))
            .collect();
        let tokens: Vec<String> = (0..vocab_size).map(|i| i.to_string()).collect();
        let vocab_index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(EmbeddingTable {
            tokens,
            vocab_index,
            matrix,
            dim,
            unk_row: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn unk_row(&self) -> usize {
        self.unk_row
    }

    pub fn row_of(&self, token: &str) -> Option<usize> {
        self.vocab_index.get(token).copied()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.dim..(i + 1) * self.dim]
    }

    /// The token's vector, or the unknown row's vector.
    pub fn lookup(&self, token: &str) -> &[f64] {
        self.row(self.row_of(token).unwrap_or(self.unk_row))
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "3 4\nev 0.1 0.2 0.3 0.4\n<unk> 0 0 0 0\nkedi -1 2.5 3e-2 1\n";

    #[test]
    fn loads_and_looks_up() {
        let t = EmbeddingTable::load_text(SAMPLE.as_bytes()).unwrap();
        assert_eq!((t.len(), t.dim()), (3, 4));
        assert_eq!(t.lookup("kedi"), &[-1.0, 2.5, 0.03, 1.0]);
        assert_eq!(t.lookup("köpek"), &[0.0; 4]);
        assert_eq!(t.lookup("ev"), t.lookup("ev"));
    }

    #[test]
    fn unk_defaults_to_row_zero() {
        let t = EmbeddingTable::load_text("1 2\nev 1 2\n".as_bytes()).unwrap();
        assert_eq!(t.lookup("yok"), &[1.0, 2.0]);
    }

    #[test]
    fn arity_and_duplicates_are_parse_errors() {
        let short = "2 4\nev 1 2 3 4\nkedi 1 2 3\n";
        match EmbeddingTable::load_text(short.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let dup = "2 1\nev 1\nev 2\n";
        assert!(EmbeddingTable::load_text(dup.as_bytes()).is_err());
        assert!(EmbeddingTable::load_text("2 1\nev 1\n".as_bytes()).is_err());
        assert!(EmbeddingTable::load_text("x\n".as_bytes()).is_err());
    }

    #[test]
    fn text_round_trip() {
        let t = EmbeddingTable::load_text(SAMPLE.as_bytes()).unwrap();
        let mut buf = Vec::new();
        t.save_text(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::load_text(&buf[..]).unwrap(), t);
    }

    #[test]
    fn random_init_is_seeded_and_bounded() {
        let a = EmbeddingTable::random_init(10, 4, 42).unwrap();
        let b = EmbeddingTable::random_init(10, 4, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.matrix().iter().all(|x| x.abs() <= INIT_RANGE));
        let col = EmbeddingTable::random_init(5, 1, 1).unwrap();
        assert_eq!(col.row(3).len(), 1);
        assert!(EmbeddingTable::random_init(0, 3, 1).is_err());
    }
}
