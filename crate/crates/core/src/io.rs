//! Field serialization.
//!
//! A field file is a single text header line followed by binary payload:
//!
//! ```text
//! MAXHARM1 dim=<d> shape=<a,b,c> h=<real> topology=<torus|box> kind=<scalar|vector|matrix>\n
//! [mask plane: ncells bytes of 0/1, box topology only]
//! [payload: ncells * comps little-endian f64, row-major cells,
//!  components contiguous within a cell]
//! ```
//!
//! The header stores `h` with Rust's shortest round-trip formatting, so
//! save/load is bit-exact for the spacing as well as the payload.

use crate::error::{Error, Result};
use crate::field::{MatrixField, ScalarField, VectorField};
use crate::grid::{Domain, Grid, Topology};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

/// Any of the three field ranks, as stored on disk.
#[derive(Debug, Clone)]
pub enum StoredField {
    Scalar(ScalarField),
    Vector(VectorField),
    Matrix(MatrixField),
}

impl StoredField {
    pub fn domain(&self) -> &Arc<Domain> {
        match self {
            StoredField::Scalar(f) => f.domain(),
            StoredField::Vector(f) => f.domain(),
            StoredField::Matrix(f) => f.domain(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StoredField::Scalar(_) => "scalar",
            StoredField::Vector(_) => "vector",
            StoredField::Matrix(_) => "matrix",
        }
    }

    fn raw_values(&self) -> &[f64] {
        match self {
            StoredField::Scalar(f) => f.values(),
            StoredField::Vector(f) => f.values(),
            StoredField::Matrix(f) => f.values(),
        }
    }
}

pub fn save_field(f: &StoredField, path: &Path) -> Result<()> {
    let dom = f.domain();
    let grid = dom.grid();
    let shape = grid
        .shape()
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let header = format!(
        "MAXHARM1 dim={} shape={} h={} topology={} kind={}\n",
        grid.dim(),
        shape,
        grid.spacing(),
        grid.topology().name(),
        f.kind_name()
    );
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(header.as_bytes())?;
    if grid.topology() == Topology::Box {
        let mask: Vec<u8> = (0..grid.ncells())
            .map(|i| if dom.is_in(i) { 1 } else { 0 })
            .collect();
        w.write_all(&mask)?;
    }
    for v in f.raw_values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<StoredField> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);

    let mut header = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        let n = r.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Format("missing header line".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        if header.len() > 4096 {
            return Err(Error::Format("header line exceeds 4096 bytes".into()));
        }
        header.push(byte[0]);
    }
    let header = String::from_utf8(header)
        .map_err(|_| Error::Format("header is not valid UTF-8".into()))?;

    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("MAXHARM1") {
        return Err(Error::Format(format!(
            "bad magic string in header: {header:?}"
        )));
    }
    let mut dim = None;
    let mut shape: Option<Vec<usize>> = None;
    let mut h = None;
    let mut topology = None;
    let mut kind = None;
    for tok in tokens {
        let (key, val) = tok
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header token {tok:?}")))?;
        match key {
            "dim" => {
                dim = Some(val.parse::<usize>().map_err(|_| {
                    Error::Format(format!("bad dim value {val:?}"))
                })?)
            }
            "shape" => {
                let parsed: std::result::Result<Vec<usize>, _> =
                    val.split(',').map(|s| s.parse::<usize>()).collect();
                shape = Some(parsed.map_err(|_| {
                    Error::Format(format!("bad shape value {val:?}"))
                })?);
            }
            "h" => {
                h = Some(val.parse::<f64>().map_err(|_| {
                    Error::Format(format!("bad spacing value {val:?}"))
                })?)
            }
            "topology" => {
                topology = Some(match val {
                    "torus" => Topology::Torus,
                    "box" => Topology::Box,
                    _ => return Err(Error::Format(format!("unknown topology {val:?}"))),
                })
            }
            "kind" => kind = Some(val.to_string()),
            _ => return Err(Error::Format(format!("unknown header key {key:?}"))),
        }
    }
    let dim = dim.ok_or_else(|| Error::Format("header missing dim".into()))?;
    let shape = shape.ok_or_else(|| Error::Format("header missing shape".into()))?;
    let h = h.ok_or_else(|| Error::Format("header missing h".into()))?;
    let topology = topology.ok_or_else(|| Error::Format("header missing topology".into()))?;
    let kind = kind.ok_or_else(|| Error::Format("header missing kind".into()))?;
    if shape.len() != dim {
        return Err(Error::Format(format!(
            "shape {shape:?} does not match dim={dim}"
        )));
    }

    let grid = Grid::new(&shape, h, topology)
        .map_err(|e| Error::Format(format!("invalid grid in header: {e}")))?;
    let ncells = grid.ncells();

    let domain = if topology == Topology::Box {
        let mut mask_bytes = vec![0u8; ncells];
        r.read_exact(&mut mask_bytes)
            .map_err(|_| Error::Format("truncated mask plane".into()))?;
        let mut mask = Vec::with_capacity(ncells);
        for (i, b) in mask_bytes.iter().enumerate() {
            match b {
                0 => mask.push(false),
                1 => mask.push(true),
                _ => {
                    return Err(Error::Format(format!(
                        "mask byte at cell {i} is {b}, expected 0 or 1"
                    )))
                }
            }
        }
        Domain::with_mask(grid, mask)
            .map_err(|e| Error::Format(format!("invalid mask plane: {e}")))?
    } else {
        Domain::full(grid).map_err(|e| Error::Format(format!("invalid grid: {e}")))?
    };
    let domain = Arc::new(domain);

    let comps = match kind.as_str() {
        "scalar" => 1,
        "vector" => dim,
        "matrix" => dim * dim,
        _ => return Err(Error::Format(format!("unknown field kind {kind:?}"))),
    };
    let count = ncells * comps;
    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload)
        .map_err(|_| Error::Format(format!("payload shorter than {count} values")))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let mut values = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite payload value {v}")));
        }
        values.push(v);
    }

    match kind.as_str() {
        "scalar" => Ok(StoredField::Scalar(
            ScalarField::from_values(domain, values)
                .map_err(|e| Error::Format(format!("bad scalar payload: {e}")))?,
        )),
        "vector" => Ok(StoredField::Vector(
            VectorField::from_values(domain, values)
                .map_err(|e| Error::Format(format!("bad vector payload: {e}")))?,
        )),
        _ => Ok(StoredField::Matrix(
            MatrixField::from_values(domain, values)
                .map_err(|e| Error::Format(format!("bad matrix payload: {e}")))?,
        )),
    }
}

/// Convenience wrappers for the common scalar case.
pub fn save_scalar(f: &ScalarField, path: &Path) -> Result<()> {
    save_field(&StoredField::Scalar(f.clone()), path)
}

pub fn load_scalar(path: &Path) -> Result<ScalarField> {
    match load_field(path)? {
        StoredField::Scalar(f) => Ok(f),
        other => Err(Error::Format(format!(
            "expected a scalar field, file holds a {} field",
            other.kind_name()
        ))),
    }
}

pub fn save_vector(f: &VectorField, path: &Path) -> Result<()> {
    save_field(&StoredField::Vector(f.clone()), path)
}

pub fn load_vector(path: &Path) -> Result<VectorField> {
    match load_field(path)? {
        StoredField::Vector(f) => Ok(f),
        other => Err(Error::Format(format!(
            "expected a vector field, file holds a {} field",
            other.kind_name()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_domain(seed: u64, topology: Topology) -> Arc<Domain> {
        let grid = Grid::new(&[12, 10], 1.0 / 12.0, topology).unwrap();
        match topology {
            Topology::Torus => Arc::new(Domain::full(grid).unwrap()),
            Topology::Box => {
                let mut rng = SplitMix64::new(seed);
                let mask: Vec<bool> = (0..grid.ncells())
                    .map(|i| {
                        let c = grid.coords_of(i);
                        // Keep a solid core so the domain stays usable.
                        let core = c[0] >= 2 && c[0] < 10 && c[1] >= 2 && c[1] < 8;
                        core || rng.uniform(0.0, 1.0) < 0.5
                    })
                    .collect();
                Arc::new(Domain::with_mask(grid, mask).unwrap())
            }
        }
    }

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let tmp = tempfile::tempdir().unwrap();
        for topology in [Topology::Torus, Topology::Box] {
            let dom = random_domain(9, topology);
            let mut rng = SplitMix64::new(100);
            let f = ScalarField::from_values(
                dom.clone(),
                (0..dom.grid().ncells())
                    .map(|i| if dom.is_in(i) { rng.uniform(-5.0, 5.0) } else { 0.0 })
                    .collect(),
            )
            .unwrap();
            let path = tmp.path().join(format!("f-{}.mxh", dom.grid().topology().name()));
            save_scalar(&f, &path).unwrap();
            let g = load_scalar(&path).unwrap();
            assert_eq!(f.values(), g.values());
            assert_eq!(f.domain().grid().shape(), g.domain().grid().shape());
            assert_eq!(
                f.domain().grid().spacing().to_bits(),
                g.domain().grid().spacing().to_bits()
            );
            for i in 0..dom.grid().ncells() {
                assert_eq!(f.domain().is_in(i), g.domain().is_in(i));
            }
        }
    }

    #[test]
    fn vector_3d_round_trip() {
        let grid = Grid::new(&[16, 16, 16], 1.0 / 16.0, Topology::Torus).unwrap();
        let dom = Arc::new(Domain::full(grid).unwrap());
        let mut rng = SplitMix64::new(4);
        let f = VectorField::from_values(
            dom.clone(),
            (0..dom.grid().ncells() * 3).map(|_| rng.normal()).collect(),
        )
        .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("v.mxh");
        save_vector(&f, &path).unwrap();
        let g = load_vector(&path).unwrap();
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn matrix_round_trip() {
        let grid = Grid::new(&[8, 8], 0.125, Topology::Torus).unwrap();
        let dom = Arc::new(Domain::full(grid).unwrap());
        let mut rng = SplitMix64::new(5);
        let f = MatrixField::from_values(
            dom.clone(),
            (0..dom.grid().ncells() * 4).map(|_| rng.normal()).collect(),
        )
        .unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("m.mxh");
        save_field(&StoredField::Matrix(f.clone()), &path).unwrap();
        match load_field(&path).unwrap() {
            StoredField::Matrix(g) => assert_eq!(f.values(), g.values()),
            other => panic!("wrong kind {}", other.kind_name()),
        }
    }

    #[test]
    fn bad_magic_is_a_format_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("bad.mxh");
        std::fs::write(&path, b"NOTAFIELD dim=1 shape=8 h=0.125 topology=torus kind=scalar\n").unwrap();
        match load_field(&path) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_is_a_format_error() {
        let grid = Grid::new(&[8], 0.125, Topology::Torus).unwrap();
        let dom = Arc::new(Domain::full(grid).unwrap());
        let f = ScalarField::from_fn(dom, |x| x[0]).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("trunc.mxh");
        save_scalar(&f, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_field(&path), Err(Error::Format(_))));
        // Extra bytes are rejected too.
        let mut long = bytes.clone();
        long.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, &long).unwrap();
        assert!(matches!(load_field(&path), Err(Error::Format(_))));
    }

    #[test]
    fn non_finite_payload_is_a_format_error() {
        let grid = Grid::new(&[8], 0.125, Topology::Torus).unwrap();
        let dom = Arc::new(Domain::full(grid).unwrap());
        let f = ScalarField::from_fn(dom, |x| x[0]).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("nan.mxh");
        save_scalar(&f, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_field(&path), Err(Error::Format(_))));
    }
}
