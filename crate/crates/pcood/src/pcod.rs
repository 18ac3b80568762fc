//! PCOD prediction tensor files.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "PCOD"
//! 4       2     version (u16) = 1
//! 6       1     kind (u8): 0 = probabilities, 1 = logits
//! 7       1     reserved (u8) = 0
//! 8       8     N points (u64)
//! 16      2     C classes (u16)
//! 18      2     K members (u16)
//! 20      ..    K·N·C f32 values, member-major, then point, then class
//! ```

use std::fs::File;
use std::io::{BufReader, ErrorKind, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::Path;

use pcood_core::predictive::{tensor_len, PredictiveTensor, TensorKind};

use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"PCOD";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 20;

/// Values per read when streaming a payload.
const READ_CHUNK: usize = 1 << 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcodHeader {
    pub kind: TensorKind,
    pub n_points: u64,
    pub n_classes: u16,
    pub n_members: u16,
}

impl PcodHeader {
    pub fn for_tensor(t: &PredictiveTensor<f32>) -> Result<Self> {
        let narrow = |v: usize, what: &str| {
            u16::try_from(v).map_err(|_| Error::Capacity(format!("{what} {v} does not fit in u16")))
        };
        Ok(Self {
            kind: t.kind(),
            n_points: t.n_points() as u64,
            n_classes: narrow(t.n_classes(), "class count")?,
            n_members: narrow(t.n_members(), "member count")?,
        })
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN as usize] {
        let mut b = [0u8; HEADER_LEN as usize];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&VERSION.to_le_bytes());
        b[6] = self.kind.code();
        b[7] = 0;
        b[8..16].copy_from_slice(&self.n_points.to_le_bytes());
        b[16..18].copy_from_slice(&self.n_classes.to_le_bytes());
        b[18..20].copy_from_slice(&self.n_members.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8; HEADER_LEN as usize]) -> Result<Self> {
        if b[0..4] != MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected \"PCOD\"", String::from_utf8_lossy(&b[0..4]))));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported PCOD version {version}")));
        }
        let kind = TensorKind::from_code(b[6]).ok_or_else(|| Error::Format(format!("unknown tensor kind {}", b[6])))?;
        if b[7] != 0 {
            return Err(Error::Format(format!("reserved byte is {}, expected 0", b[7])));
        }
        let n_points = u64::from_le_bytes(b[8..16].try_into().unwrap());
        let n_classes = u16::from_le_bytes([b[16], b[17]]);
        let n_members = u16::from_le_bytes([b[18], b[19]]);
        if n_classes < 2 {
            return Err(Error::Format(format!("class count {n_classes} < 2")));
        }
        if n_members < 1 {
            return Err(Error::Format(String::from("member count is 0")));
        }
        Ok(Self { kind, n_points, n_classes, n_members })
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut b = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut b).map_err(|e| Error::io("reading PCOD header", e))?;
        Self::from_bytes(&b)
    }

    pub fn n_points_usize(&self) -> Result<usize> {
        usize::try_from(self.n_points)
            .map_err(|_| Error::Capacity(format!("{} points exceed addressable memory", self.n_points)))
    }

    /// Number of f32 values in the payload.
    pub fn value_count(&self) -> Result<usize> {
        let n = self.n_points_usize()?;
        tensor_len(self.n_members as usize, n, self.n_classes as usize)
            .filter(|v| v.checked_mul(4).is_some_and(|b| b <= isize::MAX as usize))
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "{}x{}x{} values exceed addressable memory",
                    self.n_members, self.n_points, self.n_classes
                ))
            })
    }

    pub fn payload_bytes(&self) -> Result<u64> {
        Ok(self.value_count()? as u64 * 4)
    }
}

fn read_f32s<R: Read>(r: &mut R, count: usize, out: &mut Vec<f32>) -> Result<()> {
    let mut buf = vec![0u8; count.min(READ_CHUNK) * 4];
    let mut left = count;
    while left > 0 {
        let n = left.min(READ_CHUNK);
        let bytes = &mut buf[..n * 4];
        r.read_exact(bytes).map_err(|e| {
            if e.kind() == ErrorKind::UnexpectedEof {
                Error::io("truncated PCOD payload", e)
            } else {
                Error::io("reading PCOD payload", e)
            }
        })?;
        out.extend(bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
        left -= n;
    }
    Ok(())
}

/// Read a whole tensor. The buffer grows as data arrives, so a header that
/// overstates the payload fails with an I/O error rather than a huge
/// allocation.
pub fn read_tensor<R: Read>(source: &mut R) -> Result<PredictiveTensor<f32>> {
    let header = PcodHeader::read_from(source)?;
    let count = header.value_count()?;
    let mut values = Vec::new();
    read_f32s(source, count, &mut values)?;
    let mut probe = [0u8; 1];
    match source.read(&mut probe) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Format(String::from("trailing bytes after PCOD payload"))),
        Err(e) => return Err(Error::io("reading PCOD payload", e)),
    }
    Ok(PredictiveTensor::new(
        header.kind,
        header.n_points_usize()?,
        header.n_classes as usize,
        header.n_members as usize,
        values,
    )?)
}

pub fn write_f32s<W: Write + ?Sized>(sink: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len().min(READ_CHUNK) * 4);
    for chunk in values.chunks(READ_CHUNK) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf).map_err(|e| Error::io("writing PCOD payload", e))?;
    }
    Ok(())
}

pub fn write_tensor<W: Write + ?Sized>(tensor: &PredictiveTensor<f32>, sink: &mut W) -> Result<()> {
    let header = PcodHeader::for_tensor(tensor)?;
    sink.write_all(&header.to_bytes()).map_err(|e| Error::io("writing PCOD header", e))?;
    write_f32s(sink, tensor.values())
}

/// Random access to a PCOD file by (member prefix, point range), used to
/// stream huge tensors chunk by chunk.
#[derive(Debug)]
pub struct PcodFile {
    header: PcodHeader,
    reader: BufReader<File>,
}

impl PcodFile {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io("opening", e).at(path))?;
        let len = file.metadata().map_err(|e| Error::io("stat", e).at(path))?.len();
        let mut reader = BufReader::new(file);
        let header = PcodHeader::read_from(&mut reader).map_err(|e| e.at(path))?;
        let expected = HEADER_LEN + header.payload_bytes().map_err(|e| e.at(path))?;
        if len < expected {
            return Err(Error::io(
                format!("truncated PCOD payload ({len} bytes, header implies {expected})"),
                std::io::Error::from(ErrorKind::UnexpectedEof),
            )
            .at(path));
        }
        if len > expected {
            return Err(Error::Format(format!("{} trailing bytes after PCOD payload", len - expected)).at(path));
        }
        Ok(Self { header, reader })
    }

    pub fn header(&self) -> PcodHeader {
        self.header
    }

    /// The first `k` members restricted to `points`, as a small tensor.
    pub fn read_block(&mut self, k: usize, points: Range<usize>) -> Result<PredictiveTensor<f32>> {
        let h = self.header;
        let (n, c) = (h.n_points_usize()?, h.n_classes as usize);
        if k < 1 || k > h.n_members as usize {
            return Err(Error::Usage(format!("ensemble size {k} outside 1..={}", h.n_members)));
        }
        assert!(points.end <= n, "point range {points:?} beyond {n}");
        let mut values = Vec::with_capacity(k * points.len() * c);
        for m in 0..k {
            let offset = HEADER_LEN + ((m as u64 * n as u64 + points.start as u64) * c as u64) * 4;
            self.reader.seek(SeekFrom::Start(offset)).map_err(|e| Error::io("seeking PCOD payload", e))?;
            read_f32s(&mut self.reader, points.len() * c, &mut values)?;
        }
        PredictiveTensor::new(h.kind, points.len(), c, k, values)
            .map_err(|e| Error::from(e).context(format!("points {}..{}", points.start, points.end)))
    }
}
