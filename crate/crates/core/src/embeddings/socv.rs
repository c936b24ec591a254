//! SOCV: little-endian binary vector collections.
//!
//! ```text
//! magic "SOCV" | version u32 = 1 | dim u32 | count u64
//! count × ( question_id u64 | dim × f32 )
//! ```

use std::io::{self, BufReader, BufWriter, Read, Write};

use super::VectorCollection;
use crate::error::{Error, Result};

pub const SOCV_MAGIC: [u8; 4] = *b"SOCV";
pub const SOCV_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Writes `collection` to `sink` and returns the number of bytes written.
pub fn write_vectors<W: Write>(collection: &VectorCollection, sink: W) -> Result<u64> {
    let dim = u32::try_from(collection.dim())
        .map_err(|_| Error::config("dimension does not fit in u32"))?;
    let mut out = BufWriter::new(sink);
    out.write_all(&SOCV_MAGIC)?;
    out.write_all(&SOCV_VERSION.to_le_bytes())?;
    out.write_all(&dim.to_le_bytes())?;
    out.write_all(&(collection.len() as u64).to_le_bytes())?;

    let mut record = Vec::with_capacity(8 + 4 * collection.dim());
    for (id, values) in collection.iter() {
        record.clear();
        record.extend_from_slice(&id.to_le_bytes());
        for v in values {
            record.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&record)?;
    }
    out.flush()?;
    Ok(HEADER_LEN as u64 + collection.len() as u64 * (8 + 4 * collection.dim() as u64))
}

/// Reads and validates a SOCV stream.
pub fn read_vectors<R: Read>(source: R) -> Result<VectorCollection> {
    let mut input = BufReader::new(source);

    let mut magic = [0u8; 4];
    if read_full(&mut input, &mut magic)? < 4 || magic != SOCV_MAGIC {
        return Err(Error::NotSocv);
    }
    let mut header = [0u8; HEADER_LEN - 4];
    if read_full(&mut input, &mut header)? < header.len() {
        return Err(Error::Truncated("incomplete header".into()));
    }
    let version = u32::from_le_bytes(header[0..4].try_into().unwrap());
    if version != SOCV_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap());
    if dim == 0 {
        return Err(Error::Corrupt("dim is 0".into()));
    }

    // The declared count is untrusted; cap the up-front reservation.
    let reserve = usize::try_from(count).unwrap_or(usize::MAX).min(1 << 16);
    let mut collection = VectorCollection::with_capacity(dim, reserve)?;
    let mut record = vec![0u8; 8 + 4 * dim];
    let mut values = vec![0f32; dim];
    for seen in 0..count {
        if read_full(&mut input, &mut record)? < record.len() {
            return Err(Error::Truncated(format!("declared {count} records, found {seen}")));
        }
        let id = u64::from_le_bytes(record[..8].try_into().unwrap());
        for (v, b) in values.iter_mut().zip(record[8..].chunks_exact(4)) {
            *v = f32::from_le_bytes(b.try_into().unwrap());
        }
        collection.push(id, &values)?;
    }
    let mut probe = [0u8; 1];
    if read_full(&mut input, &mut probe)? != 0 {
        return Err(Error::TrailingData(count));
    }
    Ok(collection)
}

/// Like `read_exact`, but reports how many bytes arrived before EOF.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
