//! Word-vector text format: a `V d` header line followed by `V` lines of
//! `unit v1 ... vd`. Values are written with the shortest representation
//! that parses back to the same `f32`, so a save/load cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::trainer::{NgramEmbeddings, Vocab};

pub fn write_embeddings(emb: &NgramEmbeddings, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {}", emb.len(), emb.dim())?;
    for (unit, v) in emb.iter() {
        w.write_all(unit.as_bytes())?;
        for x in v {
            write!(w, " {x}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_embeddings(emb: &NgramEmbeddings, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embeddings(emb, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(reader: impl BufRead) -> Result<NgramEmbeddings> {
    let mut lines = reader.lines().enumerate();
    let read_err = |line: usize, e: std::io::Error| Error::parse(line, e.to_string());

    let header = match lines.next() {
        Some((_, l)) => l.map_err(|e| read_err(1, e))?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n, dim) = match fields.as_slice() {
        [n, d] => (
            n.parse::<usize>()
                .map_err(|_| Error::parse(1, format!("bad unit count {n:?}")))?,
            d.parse::<usize>()
                .map_err(|_| Error::parse(1, format!("bad dimension {d:?}")))?,
        ),
        _ => return Err(Error::parse(1, "header must be \"<count> <dim>\"")),
    };
    if dim == 0 {
        return Err(Error::parse(1, "dimension must be positive"));
    }

    let mut units = Vec::with_capacity(n);
    let mut seen = FxHashSet::default();
    let mut vectors = Vec::with_capacity(n * dim);
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| read_err(lineno, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if units.len() == n {
            return Err(Error::parse(lineno, format!("more than {n} units")));
        }
        let mut fields = line.split_whitespace();
        let unit = fields.next().expect("non-empty line");
        let before = vectors.len();
        for f in fields {
            let x: f32 = f
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad value {f:?}")))?;
            if !x.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value {f:?}")));
            }
            vectors.push(x);
        }
        if vectors.len() - before != dim {
            return Err(Error::parse(
                lineno,
                format!("expected {dim} values, found {}", vectors.len() - before),
            ));
        }
        if !seen.insert(unit.to_owned()) {
            return Err(Error::parse(lineno, format!("duplicate unit {unit:?}")));
        }
        units.push(unit.to_owned());
    }
    if units.len() != n {
        return Err(Error::parse(
            units.len() + 2,
            format!("header announces {n} units, file has {}", units.len()),
        ));
    }
    NgramEmbeddings::new(Vocab::from_units(units)?, dim, vectors)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<NgramEmbeddings> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file))
}
