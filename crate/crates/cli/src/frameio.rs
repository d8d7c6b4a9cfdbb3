//! Frame containers: numbered PGM/PPM directories and the packed ORDV1 file.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use anyhow::{anyhow, bail, Context, Result};
use ordinalflow::{Frame, PixelLayout};

pub const PACKED_MAGIC: &[u8; 5] = b"ORDV1";

pub fn frame_file_name(index: usize, layout: PixelLayout) -> String {
    let ext = if layout == PixelLayout::Gray { "pgm" } else { "ppm" };
    format!("frame_{index:06}.{ext}")
}

fn skip_space_and_comments(data: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_number(data: &[u8], pos: &mut usize) -> Result<usize> {
    *pos = skip_space_and_comments(data, *pos);
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&data[start..*pos])?
        .parse()
        .map_err(|_| anyhow!("malformed netpbm header at byte {start}"))
}

/// Decodes a binary PGM (P5) or PPM (P6) with maxval 255.
pub fn decode_pnm(data: &[u8]) -> Result<Frame> {
    let layout = match data.get(..2) {
        Some(b"P5") => PixelLayout::Gray,
        Some(b"P6") => PixelLayout::Rgb,
        _ => bail!("not a binary PGM/PPM file"),
    };
    let mut pos = 2;
    let width = header_number(data, &mut pos)?;
    let height = header_number(data, &mut pos)?;
    let maxval = header_number(data, &mut pos)?;
    if maxval != 255 {
        bail!("unsupported maxval {maxval}, only 8-bit frames are read");
    }
    if !data.get(pos).is_some_and(u8::is_ascii_whitespace) {
        bail!("missing separator after netpbm header");
    }
    pos += 1;
    let need = width * height * layout.channels();
    let body = data
        .get(pos..pos + need)
        .ok_or_else(|| anyhow!("truncated pixel data: need {need} bytes"))?;
    Ok(Frame::new(width, height, layout, body.to_vec(), 0)?)
}

pub fn encode_pnm(frame: &Frame) -> Vec<u8> {
    let (magic, pixels) = match frame.layout() {
        PixelLayout::Gray => ("P5", frame.pixels().to_vec()),
        PixelLayout::Rgb => ("P6", frame.pixels().to_vec()),
        PixelLayout::Bgr => (
            "P6",
            frame
                .pixels()
                .chunks_exact(3)
                .flat_map(|p| [p[2], p[1], p[0]])
                .collect(),
        ),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(&pixels);
    out
}

pub fn write_pnm(path: &Path, frame: &Frame) -> Result<()> {
    fs::write(path, encode_pnm(frame)).with_context(|| format!("writing {}", path.display()))
}

/// Writes `frame_NNNNNN.pgm|ppm` files into `dir`, creating it if needed.
pub fn write_frame_dir<'a>(dir: &Path, frames: impl IntoIterator<Item = &'a Frame>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, f) in frames.into_iter().enumerate() {
        write_pnm(&dir.join(frame_file_name(i, f.layout())), f)?;
    }
    Ok(())
}

pub fn write_packed(path: &Path, frames: &[Frame]) -> Result<()> {
    let first = frames.first().ok_or_else(|| anyhow!("no frames to pack"))?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(PACKED_MAGIC)?;
    for v in [first.width(), first.height(), first.channels(), frames.len()] {
        out.write_all(&u32::try_from(v)?.to_le_bytes())?;
    }
    for f in frames {
        if f.width() != first.width()
            || f.height() != first.height()
            || f.channels() != first.channels()
        {
            bail!("packed container needs frames of one size");
        }
        out.write_all(f.pixels())?;
    }
    out.flush()?;
    Ok(())
}

/// An ordered stream of frames from disk.
pub enum FrameSource {
    Dir(std::vec::IntoIter<PathBuf>),
    Packed {
        reader: BufReader<File>,
        width: usize,
        height: usize,
        layout: PixelLayout,
        remaining: usize,
    },
}

impl FrameSource {
    /// A directory is read as numbered PGM/PPM files in name order; a regular
    /// file as a packed container.
    pub fn open(path: &Path) -> Result<Self> {
        if path.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    name.starts_with("frame_") && (name.ends_with(".pgm") || name.ends_with(".ppm"))
                })
                .collect();
            files.sort();
            return Ok(Self::Dir(files.into_iter()));
        }
        let mut reader = BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        );
        let mut head = [0u8; 21];
        reader
            .read_exact(&mut head)
            .context("packed container header is truncated")?;
        if &head[..5] != PACKED_MAGIC {
            bail!("{} is neither a frame directory nor an ORDV1 file", path.display());
        }
        let field = |i: usize| u32::from_le_bytes(head[5 + 4 * i..9 + 4 * i].try_into().unwrap()) as usize;
        let layout = match field(2) {
            1 => PixelLayout::Gray,
            3 => PixelLayout::Rgb,
            c => bail!("packed container has unsupported channel count {c}"),
        };
        Ok(Self::Packed {
            reader,
            width: field(0),
            height: field(1),
            layout,
            remaining: field(3),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Dir(files) => files.len(),
            Self::Packed { remaining, .. } => *remaining,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Decodes frames on a worker thread, at most `depth` ahead of the consumer.
    pub fn prefetch(self, depth: usize) -> impl Iterator<Item = Result<Frame>> {
        let (tx, rx) = mpsc::sync_channel(depth.max(1));
        thread::spawn(move || {
            for item in self {
                let stop = item.is_err();
                if tx.send(item).is_err() || stop {
                    break;
                }
            }
        });
        rx.into_iter()
    }
}

impl Iterator for FrameSource {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Result<Frame>> {
        match self {
            Self::Dir(files) => {
                let path = files.next()?;
                Some(
                    fs::read(&path)
                        .map_err(anyhow::Error::from)
                        .and_then(|bytes| decode_pnm(&bytes))
                        .with_context(|| format!("decoding {}", path.display())),
                )
            }
            Self::Packed {
                reader,
                width,
                height,
                layout,
                remaining,
            } => {
                if *remaining == 0 {
                    return None;
                }
                *remaining -= 1;
                let mut buf = vec![0u8; *width * *height * layout.channels()];
                Some(match reader.read_exact(&mut buf) {
                    Ok(()) => Frame::new(*width, *height, *layout, buf, 0).map_err(Into::into),
                    Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => {
                        *remaining = 0;
                        Err(anyhow!("packed container ends early"))
                    }
                    Err(e) => Err(e.into()),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pnm_round_trip() {
        let gray = Frame::gray(3, 2, vec![0, 10, 20, 30, 40, 255]).unwrap();
        assert_eq!(decode_pnm(&encode_pnm(&gray)).unwrap(), gray);
        let rgb = Frame::new(2, 1, PixelLayout::Rgb, vec![1, 2, 3, 4, 5, 6], 0).unwrap();
        assert_eq!(decode_pnm(&encode_pnm(&rgb)).unwrap(), rgb);
    }

    #[test]
    fn bgr_is_written_as_rgb() {
        let bgr = Frame::new(1, 1, PixelLayout::Bgr, vec![1, 2, 3], 0).unwrap();
        let back = decode_pnm(&encode_pnm(&bgr)).unwrap();
        assert_eq!(back.pixels(), &[3, 2, 1]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut data = b"P5\n# made by hand\n2 1\n# max\n255\n".to_vec();
        data.extend([7, 9]);
        assert_eq!(decode_pnm(&data).unwrap().pixels(), &[7, 9]);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(decode_pnm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pnm(b"P5\n2 2\n255\n\x01").is_err());
        assert!(decode_pnm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn packed_and_dir_agree() {
        let tmp = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..5u8)
            .map(|i| Frame::gray(4, 3, vec![i; 12]).unwrap())
            .collect();
        let packed = tmp.path().join("clip.ordv");
        write_packed(&packed, &frames).unwrap();
        write_frame_dir(&tmp.path().join("dir"), &frames).unwrap();
        let a: Vec<Frame> = FrameSource::open(&packed).unwrap().map(Result::unwrap).collect();
        let src = FrameSource::open(&tmp.path().join("dir")).unwrap();
        assert_eq!(src.len(), 5);
        let b: Vec<Frame> = src.prefetch(2).map(Result::unwrap).collect();
        assert_eq!(a, frames);
        assert_eq!(b, frames);
    }

    #[test]
    fn truncated_packed_reports_error() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("short.ordv");
        let mut bytes = PACKED_MAGIC.to_vec();
        for v in [2u32, 2, 1, 3] {
            bytes.extend(v.to_le_bytes());
        }
        bytes.extend([0u8; 6]);
        fs::write(&path, bytes).unwrap();
        let results: Vec<_> = FrameSource::open(&path).unwrap().collect();
        assert_eq!(results.len(), 2);
        assert!(results[0].is_ok());
        assert!(results[1].is_err());
    }
}
