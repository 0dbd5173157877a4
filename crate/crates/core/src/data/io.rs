use std::io::{Read, Write};
use std::path::Path;

use super::{TrajectoryDataset, TrajectorySample};
use crate::error::{Error, Result};
use crate::structures::StructureIndicator;

pub const DATASET_MAGIC: &[u8; 8] = b"NESVDATA";
pub const DATASET_VERSION: u32 = 1;

// Layout (little-endian): magic, u32 version, u32 nodes, u32 steps, u32 feat,
// u64 samples, f64 noise, u64 seed, then per sample the truth as one byte per
// edge followed by the trajectory as f64.

pub fn write_dataset<W: Write>(d: &TrajectoryDataset, mut w: W) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_all(&DATASET_VERSION.to_le_bytes())?;
    for v in [d.nodes, d.steps, d.feat] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    w.write_all(&(d.samples.len() as u64).to_le_bytes())?;
    w.write_all(&d.noise.to_le_bytes())?;
    w.write_all(&d.seed.to_le_bytes())?;
    for s in &d.samples {
        let bits: Vec<u8> = s.truth.0.iter().map(|&b| b as u8).collect();
        w.write_all(&bits)?;
        for v in &s.x {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const N: usize>(buf: &[u8], pos: &mut usize) -> Result<[u8; N]> {
    let end = *pos + N;
    let bytes = buf.get(*pos..end).ok_or_else(|| Error::CorruptFile(format!("truncated at byte {}", *pos)))?;
    *pos = end;
    Ok(bytes.try_into().expect("slice length"))
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<TrajectoryDataset> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut pos = 0;
    if take::<8>(&buf, &mut pos)? != *DATASET_MAGIC {
        return Err(Error::CorruptFile("not a dataset file".into()));
    }
    let version = u32::from_le_bytes(take(&buf, &mut pos)?);
    if version != DATASET_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: DATASET_VERSION,
        });
    }
    let nodes = u32::from_le_bytes(take(&buf, &mut pos)?) as usize;
    let steps = u32::from_le_bytes(take(&buf, &mut pos)?) as usize;
    let feat = u32::from_le_bytes(take(&buf, &mut pos)?) as usize;
    let count = u64::from_le_bytes(take(&buf, &mut pos)?) as usize;
    let noise = f64::from_le_bytes(take(&buf, &mut pos)?);
    let seed = u64::from_le_bytes(take(&buf, &mut pos)?);
    if nodes < 2 {
        return Err(Error::CorruptFile(format!("bad node count {nodes}")));
    }
    let edges = nodes * (nodes - 1) / 2;
    let len = nodes * steps * feat;
    let need = count.checked_mul(edges + 8 * len).ok_or_else(|| Error::CorruptFile("size overflow".into()))?;
    if buf.len() - pos != need {
        return Err(Error::CorruptFile(format!("expected {need} payload bytes, found {}", buf.len() - pos)));
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut truth = Vec::with_capacity(edges);
        for _ in 0..edges {
            match take::<1>(&buf, &mut pos)?[0] {
                0 => truth.push(false),
                1 => truth.push(true),
                b => return Err(Error::CorruptFile(format!("bad indicator byte {b}"))),
            }
        }
        let x = (0..len)
            .map(|_| Ok(f64::from_le_bytes(take(&buf, &mut pos)?)))
            .collect::<Result<Vec<_>>>()?;
        samples.push(TrajectorySample {
            x,
            truth: StructureIndicator(truth),
        });
    }
    let d = TrajectoryDataset {
        nodes,
        steps,
        feat,
        noise,
        seed,
        samples,
    };
    d.validate().map_err(|e| Error::CorruptFile(e.to_string()))?;
    Ok(d)
}

pub fn save_dataset(d: &TrajectoryDataset, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(d, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<TrajectoryDataset> {
    read_dataset(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_latent_tree_dataset;
    use crate::math::RngStream;

    fn bytes() -> (TrajectoryDataset, Vec<u8>) {
        let d = gen_latent_tree_dataset(4, 3, 5, 0.1, 2, &RngStream::new(1)).unwrap();
        let mut out = Vec::new();
        write_dataset(&d, &mut out).unwrap();
        (d, out)
    }

    #[test]
    fn roundtrip() {
        let (d, out) = bytes();
        assert_eq!(read_dataset(out.as_slice()).unwrap(), d);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        save_dataset(&d, &p).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), d);
    }

    #[test]
    fn header_is_little_endian() {
        let (_, out) = bytes();
        assert_eq!(&out[..8], b"NESVDATA");
        assert_eq!(&out[8..12], &[1, 0, 0, 0]);
        assert_eq!(&out[12..16], &[4, 0, 0, 0]);
    }

    #[test]
    fn truncation_is_corrupt() {
        let (_, out) = bytes();
        for cut in [3, 20, out.len() - 1] {
            assert!(matches!(read_dataset(&out[..cut]), Err(Error::CorruptFile(_))), "cut {cut}");
        }
    }

    #[test]
    fn version_mismatch() {
        let (_, mut out) = bytes();
        out[8] = 9;
        assert!(matches!(read_dataset(out.as_slice()), Err(Error::VersionMismatch { found: 9, expected: 1 })));
    }
}
