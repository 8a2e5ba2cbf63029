//! Binary time-tag files.
//!
//! Little-endian, packed:
//!
//! ```text
//! header: b"QTAG"  u32 version (= 1)  u64 record count
//! record: u64 pulse_index  u8 channel (0 = A, 1 = B)  i64 arrival (fs)
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::events::{Channel, TimeTag};

pub const MAGIC: &[u8; 4] = b"QTAG";
pub const VERSION: u32 = 1;
pub const RECORD_BYTES: usize = 17;

pub fn write_qtag<W: Write>(w: &mut W, tags: &[TimeTag]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(tags.len() as u64).to_le_bytes())?;
    let mut rec = [0u8; RECORD_BYTES];
    for t in tags {
        rec[..8].copy_from_slice(&t.pulse_index.to_le_bytes());
        rec[8] = t.channel.code();
        rec[9..].copy_from_slice(&t.arrival_fs.to_le_bytes());
        w.write_all(&rec)?;
    }
    Ok(())
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

pub fn read_qtag<R: Read>(r: &mut R) -> Result<Vec<TimeTag>> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| bad("QTAG header truncated"))?;
    if &head[..4] != MAGIC {
        return Err(bad("not a QTAG file"));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported QTAG version {version}")));
    }
    let count = u64::from_le_bytes(head[8..16].try_into().expect("8 bytes"));
    let mut tags = Vec::with_capacity(count.min(1 << 24) as usize);
    let mut rec = [0u8; RECORD_BYTES];
    for i in 0..count {
        r.read_exact(&mut rec).map_err(|_| bad(format!("QTAG truncated at record {i} of {count}")))?;
        let channel = Channel::from_code(rec[8]).ok_or_else(|| bad(format!("record {i}: bad channel {}", rec[8])))?;
        tags.push(TimeTag {
            pulse_index: u64::from_le_bytes(rec[..8].try_into().expect("8 bytes")),
            channel,
            arrival_fs: i64::from_le_bytes(rec[9..].try_into().expect("8 bytes")),
        });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(bad("trailing bytes after the last QTAG record"));
    }
    Ok(tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let tags = [TimeTag { pulse_index: 0x0102, channel: Channel::B, arrival_fs: -2 }];
        let mut buf = Vec::new();
        write_qtag(&mut buf, &tags).unwrap();
        let mut expected = b"QTAG".to_vec();
        expected.extend([1, 0, 0, 0]);
        expected.extend([1, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend([2, 1, 0, 0, 0, 0, 0, 0]);
        expected.push(1);
        expected.extend([0xfe, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff]);
        assert_eq!(buf, expected);
        assert_eq!(read_qtag(&mut buf.as_slice()).unwrap(), tags);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        write_qtag(&mut buf, &[TimeTag { pulse_index: 1, channel: Channel::A, arrival_fs: 5 }]).unwrap();
        assert!(read_qtag(&mut &buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_qtag(&mut extra.as_slice()).is_err());
        let mut chan = buf.clone();
        chan[16 + 8] = 7;
        assert!(read_qtag(&mut chan.as_slice()).is_err());
        assert!(read_qtag(&mut &b"QTAX"[..]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn round_trip(recs in proptest::collection::vec((proptest::num::u64::ANY, proptest::bool::ANY, proptest::num::i64::ANY), 0..50)) {
            let tags: Vec<TimeTag> = recs
                .iter()
                .map(|&(p, b, t)| TimeTag { pulse_index: p, channel: if b { Channel::B } else { Channel::A }, arrival_fs: t })
                .collect();
            let mut buf = Vec::new();
            write_qtag(&mut buf, &tags).unwrap();
            proptest::prop_assert_eq!(buf.len(), 16 + RECORD_BYTES * tags.len());
            proptest::prop_assert_eq!(read_qtag(&mut buf.as_slice()).unwrap(), tags);
        }
    }
}
